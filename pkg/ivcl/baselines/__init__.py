from .classification import classification_loss, classification_pretrain_step
from .config import BaselineConfig
from .detection import (
    BoxAnnotation,
    DetectionVocab,
    box_to_tokens,
    build_sequence,
    detection_loss,
    detection_pretrain_step,
    parse_sequence,
    tokens_to_box,
)
from .training import init_baseline_head, supervised_pretrain

__all__ = [
    "BaselineConfig",
    "BoxAnnotation",
    "DetectionVocab",
    "box_to_tokens",
    "build_sequence",
    "classification_loss",
    "classification_pretrain_step",
    "detection_loss",
    "detection_pretrain_step",
    "init_baseline_head",
    "parse_sequence",
    "supervised_pretrain",
    "tokens_to_box",
]
