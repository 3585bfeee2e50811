from typing import List, Optional

from pydantic import BaseModel, Extra

from ..typing_utils import NonNegativeInt, PositiveInt, RangedFloat


class _BaseModel(BaseModel):
    class Config:
        extra = Extra.forbid
        frozen = True


class AnalysisConfig(_BaseModel):
    """Attention rollout and heatmap export."""

    residual_weight: RangedFloat[0.0, 1.0] = 0.5
    """Weight of the identity added to every attention matrix"""
    heatmap_alpha: RangedFloat[0.0, 1.0] = 0.6
    episodes: PositiveInt = 4
    """Test episodes visualized"""
    frames: Optional[List[NonNegativeInt]] = None
    """Frames exported per episode, all by default"""
    slots: Optional[List[NonNegativeInt]] = None
    """Slots exported per frame, all by default"""
