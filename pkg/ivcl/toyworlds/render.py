from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from ..exceptions import ConfigurationError
from .attributes import (
    BACKGROUND_COLOR,
    PLATFORM_DIM_COLOR,
    PLATFORM_LIT_COLOR,
    Color,
    Material,
    Shape,
    SizeTier,
)

HIGHLIGHT_SCALE = 0.4
"""Extent of the metal highlight relative to its shape"""


class PlatformState(str, Enum):
    LIT = "lit"
    DIM = "dim"

    __str__ = str.__str__


@dataclass(frozen=True)
class SceneObject:
    row: int
    col: int
    shape: Shape
    size: SizeTier
    color: Color
    material: Material = Material.RUBBER


@dataclass(frozen=True)
class Scene:
    """Objects laid out on a grid of cells, and an optional platform.

    The platform fills the band of the last row of cells.
    """

    rows: int
    cols: int
    objects: Tuple[SceneObject, ...] = ()
    platform: Optional[PlatformState] = None


def cell_rect(scene: Scene, row: int, col: int, height: int, width: int) -> Tuple[int, int, int, int]:
    """Pixel rectangle (y0, y1, x0, x1) of a cell, end excluded."""
    return (
        row * height // scene.rows,
        (row + 1) * height // scene.rows,
        col * width // scene.cols,
        (col + 1) * width // scene.cols,
    )


def shape_mask(shape: Shape, height: int, width: int, scale: float) -> np.ndarray:
    """Boolean mask of a shape centered in a height x width box."""
    yy, xx = np.mgrid[0:height, 0:width] + 0.5
    cy, cx = height / 2, width / 2
    r = scale * min(height, width) / 2
    if shape is Shape.CUBE:
        return (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)
    if shape is Shape.SPHERE:
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    t = (yy - (cy - r)) / (2 * r)
    return (t >= 0) & (t <= 1) & (np.abs(xx - cx) <= t * r)


def _highlight(color: Color) -> np.ndarray:
    return np.minimum(np.asarray(color, dtype=np.int32) + 90, 255).astype(np.uint8)


def render_frame_u8(scene: Scene, height: int, width: int) -> np.ndarray:
    """Flat-shaded rasterization of a scene, (height, width, 3) uint8.

    Objects stay inside their cell; larger objects are drawn over smaller ones.

    Raises:
        ConfigurationError: an object lies outside of the grid or on the platform band
    """
    if height < scene.rows or width < scene.cols:
        raise ConfigurationError(f"A {height}x{width} image cannot hold a {scene.rows}x{scene.cols} grid.")
    image = np.empty((height, width, 3), dtype=np.uint8)
    image[...] = BACKGROUND_COLOR
    if scene.platform is not None:
        y0, y1, _, _ = cell_rect(scene, scene.rows - 1, 0, height, width)
        inset = max((y1 - y0) // 6, 1)
        color = PLATFORM_LIT_COLOR if scene.platform is PlatformState.LIT else PLATFORM_DIM_COLOR
        image[y0 + inset : y1 - inset, inset : width - inset] = color
    for obj in sorted(scene.objects, key=lambda o: o.size):
        if not (0 <= obj.row < scene.rows and 0 <= obj.col < scene.cols):
            raise ConfigurationError(f"{obj} lies outside of the {scene.rows}x{scene.cols} grid.")
        if scene.platform is not None and obj.row == scene.rows - 1:
            raise ConfigurationError(f"{obj} lies on the platform band.")
        y0, y1, x0, x1 = cell_rect(scene, obj.row, obj.col, height, width)
        cell = image[y0:y1, x0:x1]
        cell[shape_mask(obj.shape, y1 - y0, x1 - x0, obj.size.scale)] = obj.color
        if obj.material is Material.METAL:
            mask = shape_mask(obj.shape, y1 - y0, x1 - x0, obj.size.scale * HIGHLIGHT_SCALE)
            cell[mask] = _highlight(obj.color)
    return image


def render_frame(scene: Scene, height: int, width: int) -> np.ndarray:
    """Rendered scene with values in [0, 1]."""
    return render_frame_u8(scene, height, width).astype(np.float32) / 255.0
