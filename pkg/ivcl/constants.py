from enum import IntEnum

DEFAULT_MASK_RATIO = 0.375
"""Best mask ratio of the mask-ratio sweep"""
DEFAULT_CONTEXT_FRAMES = 8
"""Best number of context frames of the context-size sweep"""
DEFAULT_TOTAL_FRAMES = 32
"""Frames sampled per pretraining clip"""
DEFAULT_PRETRAIN_LR = 1e-3
"""Adam learning rate used for pretraining"""
DEFAULT_FINETUNE_LR = 5e-5
"""AdamW learning rate used for transfer learning"""
DEFAULT_PRETRAIN_EPOCHS = 1000
DEFAULT_PRETRAIN_BATCH_SIZE = 256
DEFAULT_FINETUNE_EPOCHS = 500
DEFAULT_FINETUNE_BATCH_SIZE = 512

LAYER_NORM_EPS = 1e-6
"""Epsilon added to the variance in layer normalization"""
INIT_STD = 0.02
"""Standard deviation of the truncated normal parameter initialization"""
POSITION_FREQUENCY_BASE = 10000.0
"""Frequency base of the sinusoidal position encodings"""
ATTENTION_MASK_VALUE = -1e9
"""Additive bias used to forbid attention to a key"""

ABLATION_MASK_RATIOS = (0.125, 0.375, 0.5, 0.875)
ABLATION_CONTEXT_SIZES = (0, 4, 8, 16)
ABLATION_FRAME_LENGTHS = (8, 16, 32, 64)
ABLATION_SLOT_COUNTS = (1, 2, 4, 8)

DATASET_MAGIC = b"IVTW"
"""Magic number of toy-world dataset files"""
DATASET_VERSION = 1

CHECKPOINT_MAGIC = b"IVCK"
"""Magic number of checkpoint files"""
CHECKPOINT_VERSION = 1

SHELL_GAME_QUESTION_TYPE = 255
"""Question type stored for shell-game episodes in dataset files"""

THREADS_ENV_VAR = "IVCL_THREADS"
"""Environment variable capping the number of worker threads"""

LOSS_RECORD_FORMAT = "step {step} loss {loss!r}"
METRICS_CSV_HEADER = ("epoch", "split", "loss", "top1")
ABLATION_CSV_HEADER = ("mask_ratio", "context", "frames", "slots", "metric")


class BlicketLabel(IntEnum):
    """Effect of the query frame on the platform"""

    ACTIVATED = 0
    INACTIVE = 1
    UNDETERMINED = 2


class QuestionType(IntEnum):
    """Kind of reasoning a blicket query tests"""

    DIRECT = 0
    """The query repeats a context combination."""
    INDIRECT = 1
    """A novel combination whose effect follows from several context frames."""
    SCREENED_OFF = 2
    """Undetermined: the query objects were only seen next to a revealed blicket."""
    BACKWARD_BLOCKING = 3
    """Undetermined for any other reason."""
