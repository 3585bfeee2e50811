from .blicket import BlicketEpisode, ContextFrame, classify_query, gen_blicket, label_oracle
from .config import BlicketConfig, DataConfig, ShellGameConfig, SplitKind, Task
from .dataset_file import DatasetFile, EpisodeRecord, read_dataset, write_dataset
from .render import Scene, SceneObject, render_frame
from .shell_game import ShellGameEpisode, gen_shell_game
from .splits import DatasetSplits, EpisodeSource, Partition, build_compositional_split, build_splits

__all__ = [
    "BlicketConfig",
    "BlicketEpisode",
    "ContextFrame",
    "DataConfig",
    "DatasetFile",
    "DatasetSplits",
    "EpisodeRecord",
    "EpisodeSource",
    "Partition",
    "Scene",
    "SceneObject",
    "ShellGameConfig",
    "ShellGameEpisode",
    "SplitKind",
    "Task",
    "build_compositional_split",
    "build_splits",
    "classify_query",
    "gen_blicket",
    "gen_shell_game",
    "label_oracle",
    "read_dataset",
    "render_frame",
    "write_dataset",
]
