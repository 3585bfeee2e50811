from typing import Tuple

from pydantic import ConstrainedFloat, conint


class RangedInt:
    """
    Type hint that specifies ranged integers

    Args:
        min_value (int): minimum value - included in range
        max_value (int): maximum value - included in range
    """

    def __class_getitem__(cls, param: Tuple[int, int]):
        mn, mx = param
        return conint(strict=True, ge=mn, le=mx)


class RangedFloat:
    """
    Type hint that specifies ranged floats, integers being accepted

    Args:
        min_value (float): minimum value - included in range
        max_value (float): maximum value - included in range
    """

    def __class_getitem__(cls, param: Tuple[float, float]):
        mn, mx = param
        return type("RangedFloatValue", (ConstrainedFloat,), {"ge": mn, "le": mx})


PositiveInt = conint(strict=True, ge=1)
"""Strictly positive integer"""

NonNegativeInt = conint(strict=True, ge=0)
"""Integer greater than or equal to zero"""
