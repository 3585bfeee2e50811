from typing import Any, Dict, Optional

from pydantic import BaseModel, Extra, StrictBool, root_validator, validator

from ..constants import DEFAULT_FINETUNE_BATCH_SIZE, DEFAULT_FINETUNE_EPOCHS, DEFAULT_FINETUNE_LR
from ..toyworlds.config import Task
from ..typing_utils import PositiveInt, RangedFloat


class _BaseModel(BaseModel):
    class Config:
        extra = Extra.forbid
        frozen = True


BLICKET_CLASSES = 3
"""Activated, inactive, undetermined"""


class TransferConfig(_BaseModel):
    """Finetuning of a pretrained model on a toy reasoning task."""

    task: Task = Task.SHELL_GAME
    frames_per_example: PositiveInt = 8
    """Frames taken out of a shell-game episode; blicket inputs always have 7"""
    lr: float = DEFAULT_FINETUNE_LR
    weight_decay: RangedFloat[0.0, 1.0] = 0.05
    epochs: PositiveInt = DEFAULT_FINETUNE_EPOCHS
    batch_size: PositiveInt = DEFAULT_FINETUNE_BATCH_SIZE
    max_steps: Optional[PositiveInt] = None
    num_classes: Optional[PositiveInt] = None
    """Defaults to the number of grid cells, or 3 for the blicket task"""
    linear_probe: StrictBool = False
    """Train the task head only"""
    refit_on_train_val: StrictBool = False
    """Retrain on train and validation data for the selected number of epochs"""
    eval_stride: Optional[PositiveInt] = None
    """Stride between evaluation frames, the largest that fits by default"""

    @validator("lr")
    def check_lr(cls, value: float):
        if not value > 0.0:
            raise ValueError(f"lr must be positive, got {value}")
        return value

    @root_validator(skip_on_failure=True)
    def check_classes(cls, values: Dict[str, Any]):
        if values["task"] is Task.BLICKET and values["num_classes"] not in (None, BLICKET_CLASSES):
            raise ValueError(
                f"transfer.num_classes: the blicket task has {BLICKET_CLASSES} classes, "
                f"got {values['num_classes']}"
            )
        return values

    def resolve_num_classes(self, grid_size: int) -> int:
        """Number of classes of the task on a grid of `grid_size` x `grid_size` cells.

        Raises:
            ValueError: `num_classes` disagrees with the grid
        """
        expected = BLICKET_CLASSES if self.task is Task.BLICKET else grid_size**2
        if self.num_classes is not None and self.num_classes != expected:
            raise ValueError(
                f"transfer.num_classes: {self.task} on a {grid_size}x{grid_size} grid "
                f"has {expected} classes, got {self.num_classes}"
            )
        return expected
