from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Extra, root_validator, validator

from ..typing_utils import PositiveInt, RangedFloat, RangedInt
from .attributes import PALETTE


class _BaseModel(BaseModel):
    class Config:
        extra = Extra.forbid
        frozen = True


class Task(str, Enum):
    SHELL_GAME = "shell_game"
    BLICKET = "blicket"

    __str__ = str.__str__


class SplitKind(str, Enum):
    IID = "iid"
    COMP = "comp"
    """Test objects use attribute combinations never seen in training"""
    SYS = "sys"
    """Training contexts have a fixed number of lit frames, evaluation contexts another one"""

    __str__ = str.__str__


class ShellGameConfig(_BaseModel):
    grid_size: RangedInt[2, 16] = 4
    num_objects: RangedInt[2, 64] = 5
    num_frames: PositiveInt = 24
    cover_rate: RangedFloat[0.0, 1.0] = 0.3
    """Probability that an event is a cover or an uncover when one is possible"""
    event_rate: RangedFloat[0.0, 1.0] = 0.8
    """Probability that an event happens between two frames"""
    image_size: PositiveInt = 64

    @root_validator(skip_on_failure=True)
    def check_grid(cls, values: Dict[str, Any]):
        if values["num_objects"] > values["grid_size"] ** 2:
            raise ValueError(
                f"data.num_objects: {values['num_objects']} objects do not fit "
                f"a {values['grid_size']}x{values['grid_size']} grid"
            )
        if values["image_size"] < values["grid_size"]:
            raise ValueError("data.image_size: smaller than the grid")
        return values

    @property
    def num_cells(self) -> int:
        return self.grid_size**2


class BlicketConfig(_BaseModel):
    num_objects: RangedInt[2, 16] = 5
    num_colors: RangedInt[1, len(PALETTE)] = 3
    question_type_mix: List[float] = [0.25, 0.25, 0.25, 0.25]
    """Weights of the direct, indirect, screened-off and backward-blocking questions"""
    image_size: PositiveInt = 64
    max_retries: PositiveInt = 100

    @validator("question_type_mix")
    def check_mix(cls, value: List[float]):
        if len(value) != 4 or any(w < 0 for w in value) or sum(value) <= 0:
            raise ValueError("question_type_mix must hold 4 non-negative weights, not all zero")
        return value


class DataConfig(_BaseModel):
    """Toy-world datasets used by a run"""

    task: Task = Task.SHELL_GAME
    image_size: PositiveInt = 64
    grid_size: RangedInt[2, 16] = 4
    num_objects: RangedInt[2, 64] = 5
    num_frames: PositiveInt = 24
    cover_rate: RangedFloat[0.0, 1.0] = 0.3
    event_rate: RangedFloat[0.0, 1.0] = 0.8
    blicket_objects: RangedInt[2, 16] = 5
    num_colors: RangedInt[1, len(PALETTE)] = 3
    question_type_mix: List[float] = [0.25, 0.25, 0.25, 0.25]
    split: SplitKind = SplitKind.IID
    holdout_fraction: RangedFloat[0.0, 1.0] = 0.25
    sys_train_lit: RangedInt[0, 6] = 3
    sys_test_lit: RangedInt[0, 6] = 4
    train_episodes: PositiveInt = 2000
    val_episodes: PositiveInt = 200
    test_episodes: PositiveInt = 500
    pretrain_videos: PositiveInt = 1000
    pretrain_video_frames: Optional[PositiveInt] = None
    """Frames of a pretraining video; by default enough for a pretraining clip"""

    @root_validator(skip_on_failure=True)
    def check_split(cls, values: Dict[str, Any]):
        if values["task"] is Task.SHELL_GAME and values["split"] is not SplitKind.IID:
            raise ValueError("data.split: the shell game only has an iid split")
        return values

    def shell_game(self, num_frames: Optional[int] = None) -> ShellGameConfig:
        return ShellGameConfig(
            grid_size=self.grid_size,
            num_objects=self.num_objects,
            num_frames=num_frames or self.num_frames,
            cover_rate=self.cover_rate,
            event_rate=self.event_rate,
            image_size=self.image_size,
        )

    def blicket(self) -> BlicketConfig:
        return BlicketConfig(
            num_objects=self.blicket_objects,
            num_colors=self.num_colors,
            question_type_mix=self.question_type_mix,
            image_size=self.image_size,
        )

    @property
    def num_classes(self) -> int:
        return self.grid_size**2 if self.task is Task.SHELL_GAME else 3

    @property
    def episode_frames(self) -> int:
        """Frames of a task episode"""
        return self.num_frames if self.task is Task.SHELL_GAME else 7
