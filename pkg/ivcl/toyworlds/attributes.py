from enum import Enum, IntEnum
from itertools import product
from typing import List, Tuple

Color = Tuple[int, int, int]


class Shape(str, Enum):
    CUBE = "cube"
    SPHERE = "sphere"
    CONE = "cone"

    __str__ = str.__str__

    @property
    def primitive(self) -> str:
        """Flat primitive the shape is drawn as"""
        return {
            Shape.CUBE: "square",
            Shape.SPHERE: "circle",
            Shape.CONE: "triangle",
        }[self]


class Material(str, Enum):
    RUBBER = "rubber"
    METAL = "metal"

    __str__ = str.__str__


class SizeTier(IntEnum):
    SMALL = 0
    MEDIUM = 1
    LARGE = 2

    @property
    def scale(self) -> float:
        """Extent of the shape, as a fraction of the side of its cell"""
        return (0.45, 0.65, 0.85)[self]


PALETTE: Tuple[Color, ...] = (
    (220, 50, 47),
    (38, 139, 210),
    (133, 153, 0),
    (211, 54, 130),
    (42, 161, 152),
    (108, 113, 196),
    (203, 75, 22),
    (238, 232, 213),
)
"""Object colors, indexed by color id"""

SNITCH_COLOR: Color = (255, 200, 0)
BACKGROUND_COLOR: Color = (48, 48, 48)
PLATFORM_LIT_COLOR: Color = (250, 250, 170)
PLATFORM_DIM_COLOR: Color = (90, 80, 60)

Combo = Tuple[Shape, int, Material]
"""Shape, color id and material of a blicket object"""


def attribute_combos(num_colors: int) -> List[Combo]:
    """Every shape-color-material combination, in a fixed order."""
    return list(product(Shape, range(num_colors), Material))
