from .config import AnalysisConfig
from .heatmap import blend, export_heatmap, read_ppm, write_ppm
from .rollout import attention_rollout, encoder_rollout, head_average, slot_heatmap, snitch_alignment

__all__ = [
    "AnalysisConfig",
    "attention_rollout",
    "blend",
    "encoder_rollout",
    "export_heatmap",
    "head_average",
    "read_ppm",
    "slot_heatmap",
    "snitch_alignment",
    "write_ppm",
]
