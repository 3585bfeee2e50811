from pydantic import BaseModel, Extra, StrictBool

from ..typing_utils import PositiveInt, RangedInt


class _BaseModel(BaseModel):
    class Config:
        extra = Extra.forbid
        frozen = True


class BaselineConfig(_BaseModel):
    """Supervised pretraining baselines: object detection and object counting."""

    n_bins: RangedInt[2, 4096] = 128
    """Quantization bins of the box coordinates"""
    max_sequence_length: PositiveInt = 64
    """Longer target sequences are truncated"""
    decoder_layers: PositiveInt = 2
    decoder_heads: PositiveInt = 4
    probe_random_slot: StrictBool = False
    """The detection decoder only sees one randomly sampled slot per frame"""
