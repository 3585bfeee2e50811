"""One-dimensional sweeps around a run configuration."""

import csv
import logging
from dataclasses import dataclass
from typing import IO, Any, Dict, Iterator, List, Optional, Sequence, Set, Tuple

from pydantic import ValidationError

from ..constants import ABLATION_CSV_HEADER
from ..exceptions import ConfigurationError
from ..logging_utils import LogDict
from ..model.config import PoolMethod
from ..utils import merge_dicts
from .configuration import AblationAxis, AblationMetric, RunConfig
from .pipeline import finetune_and_test, init_pretrain_params, reconstruction_metric, run_pretraining, transfer_params

logger = logging.getLogger(__name__)

POOL_CSV_HEADER = ("pool_layer", "pool_method", "metric")

ARCHITECTURE_AXES = (AblationAxis.MASK_RATIO, AblationAxis.CONTEXT, AblationAxis.FRAMES, AblationAxis.SLOTS)
POOL_AXES = (AblationAxis.POOL_LAYER, AblationAxis.POOL_METHOD)

Overrides = Dict[str, Dict[str, Any]]


@dataclass(frozen=True)
class AblationCell:
    axis: AblationAxis
    overrides: Overrides
    config: RunConfig

    @property
    def row(self) -> Tuple[Any, ...]:
        """Swept settings of the cell, in the column order of its CSV."""
        if self.axis in POOL_AXES:
            return (self.config.model.pool_layer, self.config.model.pool_method.value)
        return (
            self.config.pretrain.mask_ratio,
            self.config.pretrain.context_frames,
            self.config.pretrain.total_frames,
            self.config.model.num_slots,
        )


def _axis_overrides(config: RunConfig, axis: AblationAxis) -> Iterator[Overrides]:
    sweep = config.ablation
    if axis is AblationAxis.MASK_RATIO:
        for ratio in sweep.mask_ratios:
            yield {"pretrain": {"mask_ratio": ratio}}
    elif axis is AblationAxis.CONTEXT:
        for context in sweep.context_sizes:
            yield {"pretrain": {"context_frames": context}}
    elif axis is AblationAxis.FRAMES:
        for total in sweep.frame_lengths:
            context = min(config.pretrain.context_frames, total // 2)
            yield {"pretrain": {"total_frames": total, "context_frames": context}}
    elif axis is AblationAxis.SLOTS:
        for slots in sweep.slot_counts:
            yield {"model": {"num_slots": slots}}
    elif axis is AblationAxis.POOL_LAYER:
        for layer in sweep.pool_layers or range(config.model.encoder_layers):
            yield {"model": {"pool_layer": layer}}
    else:
        for method in sweep.pool_methods:
            yield {"model": {"pool_method": PoolMethod(method).value}}


def ablation_cells(config: RunConfig, axes: Optional[Sequence[AblationAxis]] = None) -> List[AblationCell]:
    """Configurations of every cell, each axis swept with the others at their configured value.

    Raises:
        ConfigurationError: a cell is not a valid configuration
    """
    cells = []
    base = config.dict()
    for axis in axes if axes is not None else config.ablation.axes:
        axis = AblationAxis(axis)
        for overrides in _axis_overrides(config, axis):
            try:
                cell = RunConfig.parse_obj(merge_dicts(base, overrides))
            except ValidationError as exc:
                raise ConfigurationError(f"ablation cell {overrides} of the {axis} sweep: {exc}") from None
            cells.append(AblationCell(axis, overrides, cell))
    return cells


def run_cell(cell: AblationCell) -> float:
    """Pretrain with the cell configuration and measure the ablation metric."""
    config = cell.config
    logger.info("Ablation cell %s=%s.%s", cell.axis, cell.row, LogDict(cell.overrides))
    result = run_pretraining(config, init_pretrain_params(config))
    if config.ablation.metric is AblationMetric.RECONSTRUCTION:
        return reconstruction_metric(config, result.params)
    start = transfer_params(config, result.params)
    _, test = finetune_and_test(config, start.params)
    return test.top1


class AblationWriter:
    """Rows of the architecture sweeps and of the pool sweeps, in separate CSV streams."""

    def __init__(self, stream: Optional[IO[str]] = None, pool_stream: Optional[IO[str]] = None) -> None:
        self.rows: List[Tuple[Any, ...]] = []
        self.pool_rows: List[Tuple[Any, ...]] = []
        self._writer = csv.writer(stream, lineterminator="\n") if stream is not None else None
        self._pool_writer = csv.writer(pool_stream, lineterminator="\n") if pool_stream is not None else None
        self._headers_written: Set[int] = set()

    def _write(self, writer: Any, header: Tuple[str, ...], row: Tuple[Any, ...]) -> None:
        if writer is None:
            return
        if id(writer) not in self._headers_written:
            writer.writerow(header)
            self._headers_written.add(id(writer))
        writer.writerow(tuple(repr(v) if isinstance(v, float) else v for v in row))

    def __call__(self, cell: AblationCell, metric: float) -> None:
        row = (*cell.row, metric)
        if cell.axis in POOL_AXES:
            self.pool_rows.append(row)
            self._write(self._pool_writer, POOL_CSV_HEADER, row)
        else:
            self.rows.append(row)
            self._write(self._writer, ABLATION_CSV_HEADER, row)


def run_ablation(
    config: RunConfig,
    writer: AblationWriter,
    *,
    axes: Optional[Sequence[AblationAxis]] = None,
) -> None:
    """Run every cell; datasets are generated for each cell from the run seed."""
    cells = ablation_cells(config, axes)
    logger.info("Running %d ablation cells (metric: %s).", len(cells), config.ablation.metric)
    for index, cell in enumerate(cells, 1):
        metric = run_cell(cell)
        logger.info("cell %d/%d: %s %s -> %.6f", index, len(cells), cell.axis, cell.row, metric)
        writer(cell, metric)
