import logging
from pathlib import Path
from typing import Union

import numpy as np

from ..exceptions import DataError

logger = logging.getLogger(__name__)

HEAT_COLOR = np.array([1.0, 0.0, 0.0])
GRAYSCALE_WEIGHTS = np.array([0.299, 0.587, 0.114])


def upsample(heatmap: np.ndarray, height: int, width: int) -> np.ndarray:
    """Nearest-neighbor upsampling of a (rows, cols) map to (height, width)."""
    rows, cols = heatmap.shape
    ys = np.arange(height) * rows // height
    xs = np.arange(width) * cols // width
    return heatmap[ys[:, None], xs[None, :]]


def blend(heatmap: np.ndarray, frame: np.ndarray, alpha: float = 0.6) -> np.ndarray:
    """Heatmap painted over the grayscale frame, (H, W, 3) uint8.

    The map is scaled to a maximum of 1; an all-zero map leaves the grayscale frame.
    """
    height, width = frame.shape[:2]
    gray = np.repeat((frame[..., :3] @ GRAYSCALE_WEIGHTS)[..., None], 3, axis=-1)
    peak = heatmap.max()
    heat = upsample(heatmap / peak if peak > 0 else np.zeros_like(heatmap), height, width)
    weight = alpha * heat[..., None]
    out = (1.0 - weight) * gray + weight * HEAT_COLOR
    return np.round(np.clip(out, 0.0, 1.0) * 255.0).astype(np.uint8)


def ppm_header(width: int, height: int) -> bytes:
    return f"P6\n{width} {height}\n255\n".encode("ascii")


def write_ppm(path: Union[str, Path], image: np.ndarray) -> None:
    """Write a (H, W, 3) uint8 image as binary PPM."""
    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[-1] != 3:
        raise DataError(f"PPM images are (H, W, 3) uint8, got {image.shape} {image.dtype}.")
    height, width = image.shape[:2]
    Path(path).write_bytes(ppm_header(width, height) + np.ascontiguousarray(image).tobytes())


def read_ppm(path: Union[str, Path]) -> np.ndarray:
    """Read a binary PPM written by `write_ppm`.

    Raises:
        DataError: not a P6 file with maxval 255
    """
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P6" or parts[2] != b"255":
        raise DataError(f"{path}: not a binary PPM with maxval 255.")
    try:
        width, height = (int(v) for v in parts[1].split())
    except ValueError:
        raise DataError(f"{path}: malformed PPM size {parts[1]!r}.") from None
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != width * height * 3:
        raise DataError(f"{path}: expected {width * height * 3} bytes of pixels, got {pixels.size}.")
    return pixels.reshape(height, width, 3)


def export_heatmap(
    heatmap: np.ndarray, frame: np.ndarray, path: Union[str, Path], alpha: float = 0.6
) -> np.ndarray:
    """Blend a heatmap over a frame in [0, 1] and write it as PPM.

    Returns:
        the written image
    """
    image = blend(heatmap, frame, alpha)
    write_ppm(path, image)
    logger.debug("Wrote %s", path)
    return image
