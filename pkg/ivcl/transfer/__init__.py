from .config import TransferConfig
from .finetune import (
    Evaluation,
    FinetuneResult,
    MetricsWriter,
    TaskData,
    create_optimizer,
    evaluate,
    finetune,
    finetune_loss,
    finetune_step,
    init_task_head,
    task_logits,
)
from .inputs import FrameSequence, assemble_blicket_input, assemble_multi_image_input, shell_game_input

__all__ = [
    "Evaluation",
    "FinetuneResult",
    "FrameSequence",
    "MetricsWriter",
    "TaskData",
    "TransferConfig",
    "assemble_blicket_input",
    "assemble_multi_image_input",
    "create_optimizer",
    "evaluate",
    "finetune",
    "finetune_loss",
    "finetune_step",
    "init_task_head",
    "shell_game_input",
    "task_logits",
]
