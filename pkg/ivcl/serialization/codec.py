import struct
from enum import Enum
from typing import Any, List, Sequence, Tuple

import numpy as np

from ..exceptions import IntegrityError

BYTE_ORDER = "<"
"""Checkpoints and dataset files are little-endian"""


class TruncatedDataError(IntegrityError):
    """The buffer ended before the requested value."""


class Dtype(str, Enum):
    """Scalar types and their format for conversion to bytes"""

    UINT8 = "B"
    UINT16 = "H"
    UINT32 = "I"
    UINT64 = "Q"
    FLOAT32 = "f"
    FLOAT64 = "d"

    __str__ = str.__str__

    @property
    def nb_bytes(self) -> int:
        return struct.calcsize(self.value)

    @property
    def max_value(self) -> int:
        return (1 << (8 * self.nb_bytes)) - 1


class BinaryWriter:
    """Append-only little-endian buffer"""

    def __init__(self) -> None:
        self._chunks: List[bytes] = []

    def write(self, dtype: Dtype, value: float) -> None:
        if dtype not in (Dtype.FLOAT32, Dtype.FLOAT64) and not 0 <= value <= dtype.max_value:
            raise ValueError(f"{value} does not fit in {dtype.name}.")
        self._chunks.append(struct.pack(f"{BYTE_ORDER}{dtype}", value))

    def write_bytes(self, data: bytes) -> None:
        self._chunks.append(bytes(data))

    def write_text(self, text: str, length_dtype: Dtype = Dtype.UINT32) -> None:
        """Write a length-prefixed UTF-8 text block."""
        encoded = text.encode("utf-8")
        self.write(length_dtype, len(encoded))
        self.write_bytes(encoded)

    def write_array(self, array: np.ndarray, dtype: np.dtype) -> None:
        """Write the raw row-major content of an array."""
        target = np.dtype(dtype).newbyteorder(BYTE_ORDER)
        self.write_bytes(np.ascontiguousarray(array, dtype=target).tobytes())

    def write_shape(self, shape: Sequence[int], dtype: Dtype = Dtype.UINT32) -> None:
        """Write a rank followed by as many dimensions."""
        self.write(Dtype.UINT8, len(shape))
        for dim in shape:
            self.write(dtype, dim)

    def getvalue(self) -> bytes:
        return b"".join(self._chunks)


class BinaryReader:
    """Sequential reader of a little-endian buffer"""

    def __init__(self, data: bytes, *, name: str = "buffer") -> None:
        self.data = memoryview(data)
        self.name = name
        self.offset = 0

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset

    def read_bytes(self, size: int) -> bytes:
        if size > self.remaining:
            raise TruncatedDataError(
                f"{self.name}: expected {size} bytes at offset {self.offset}, "
                f"only {self.remaining} left."
            )
        chunk = bytes(self.data[self.offset : self.offset + size])
        self.offset += size
        return chunk

    def read(self, dtype: Dtype) -> Any:
        (value,) = struct.unpack(
            f"{BYTE_ORDER}{dtype}", self.read_bytes(dtype.nb_bytes)
        )
        return value

    def read_text(self, length_dtype: Dtype = Dtype.UINT32) -> str:
        return self.read_bytes(self.read(length_dtype)).decode("utf-8")

    def read_array(self, shape: Sequence[int], dtype: np.dtype) -> np.ndarray:
        source = np.dtype(dtype).newbyteorder(BYTE_ORDER)
        count = int(np.prod(shape, dtype=np.int64))
        raw = self.read_bytes(count * source.itemsize)
        return np.frombuffer(raw, dtype=source).astype(dtype).reshape(tuple(shape))

    def read_shape(self, dtype: Dtype = Dtype.UINT32) -> Tuple[int, ...]:
        """Read a rank followed by as many dimensions."""
        rank = self.read(Dtype.UINT8)
        return tuple(self.read(dtype) for _ in range(rank))

    def expect_end(self) -> None:
        if self.remaining:
            raise IntegrityError(
                f"{self.name}: {self.remaining} unexpected trailing bytes."
            )
