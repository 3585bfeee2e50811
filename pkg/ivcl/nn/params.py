from typing import Dict, Iterator, Mapping, Optional, Sequence

import numpy as np

from ..autodiff.tensor import ParamTable, Tensor
from ..constants import INIT_STD


def truncated_normal(
    rng: np.random.Generator, shape: Sequence[int], std: float = INIT_STD
) -> np.ndarray:
    """Normal samples redrawn until they fall within two standard deviations."""
    values = rng.standard_normal(shape)
    while (outside := np.abs(values) > 2.0).any():
        values[outside] = rng.standard_normal(int(outside.sum()))
    return (values * std).astype(np.float32)


class ParamBuilder:
    """Create a flat parameter table with hierarchical '/'-separated names.

    Builders returned by `child` share the table and the generator of their
    parent, so the table order is the order of creation.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        *,
        std: float = INIT_STD,
        prefix: str = "",
        table: Optional[Dict[str, np.ndarray]] = None,
    ) -> None:
        self.rng = rng
        self.std = std
        self.prefix = prefix
        self.table: Dict[str, np.ndarray] = {} if table is None else table

    def child(self, name: str) -> "ParamBuilder":
        return ParamBuilder(
            self.rng, std=self.std, prefix=f"{self.prefix}{name}/", table=self.table
        )

    def _add(self, name: str, value: np.ndarray) -> None:
        if (key := f"{self.prefix}{name}") in self.table:
            raise KeyError(f"Parameter '{key}' defined twice.")
        self.table[key] = value

    def normal(self, name: str, shape: Sequence[int]) -> None:
        self._add(name, truncated_normal(self.rng, shape, self.std))

    def zeros(self, name: str, shape: Sequence[int]) -> None:
        self._add(name, np.zeros(shape, dtype=np.float32))

    def ones(self, name: str, shape: Sequence[int]) -> None:
        self._add(name, np.ones(shape, dtype=np.float32))

    def build(self) -> ParamTable:
        return {name: Tensor(value) for name, value in self.table.items()}


class Scope(Mapping[str, Tensor]):
    """Read-only view of the parameters under a name prefix."""

    def __init__(self, table: Mapping[str, Tensor], prefix: str = "") -> None:
        self.table = table
        self.prefix = prefix

    def __truediv__(self, name: str) -> "Scope":
        return Scope(self.table, f"{self.prefix}{name}/")

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self.table[f"{self.prefix}{name}"]
        except KeyError:
            raise KeyError(f"Missing parameter '{self.prefix}{name}'.") from None

    def __contains__(self, name: object) -> bool:
        return f"{self.prefix}{name}" in self.table

    def __iter__(self) -> Iterator[str]:
        n = len(self.prefix)
        return (k[n:] for k in self.table if k.startswith(self.prefix))

    def __len__(self) -> int:
        return sum(1 for _ in self)


def count_parameters(table: Mapping[str, Tensor]) -> int:
    return int(np.sum([t.size for t in table.values()], dtype=np.int64))
