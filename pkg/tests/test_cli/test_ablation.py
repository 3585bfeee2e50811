import io
import math

import pytest

from ivcl.cli.ablation import AblationWriter, ablation_cells, run_ablation
from ivcl.cli.configuration import AblationAxis, parse_config
from ivcl.exceptions import ConfigurationError


def test_mask_ratio_sweep(tiny_config):
    cells = ablation_cells(tiny_config, [AblationAxis.MASK_RATIO])
    assert [c.row for c in cells] == [(r, 1, 4, 2) for r in (0.125, 0.375, 0.5, 0.875)]
    assert all(c.config.model == tiny_config.model for c in cells)


def test_pool_layer_sweep_defaults_to_every_layer(tiny_config):
    cells = ablation_cells(tiny_config, [AblationAxis.POOL_LAYER])
    assert [c.row for c in cells] == [(0, "slice"), (1, "slice")]


def test_pool_method_sweep(tiny_config):
    cells = ablation_cells(tiny_config, [AblationAxis.POOL_METHOD])
    assert [c.row[1] for c in cells] == ["slice", "soft_attention", "gumbel_max"]


def test_invalid_cell(tiny_config):
    with pytest.raises(ConfigurationError, match="context"):
        ablation_cells(tiny_config, [AblationAxis.CONTEXT])


def test_writer_splits_the_pool_rows(tiny_config):
    stream, pool_stream = io.StringIO(), io.StringIO()
    writer = AblationWriter(stream, pool_stream)
    mask_cell = ablation_cells(tiny_config, [AblationAxis.MASK_RATIO])[0]
    pool_cell = ablation_cells(tiny_config, [AblationAxis.POOL_LAYER])[1]
    writer(mask_cell, 0.25)
    writer(mask_cell, 0.5)
    writer(pool_cell, 0.75)
    assert stream.getvalue().splitlines() == [
        "mask_ratio,context,frames,slots,metric",
        "0.125,1,4,2,0.25",
        "0.125,1,4,2,0.5",
    ]
    assert pool_stream.getvalue().splitlines() == ["pool_layer,pool_method,metric", "1,slice,0.75"]
    assert writer.rows == [(0.125, 1, 4, 2, 0.25), (0.125, 1, 4, 2, 0.5)]


@pytest.mark.slow
def test_run_ablation(tiny_config_file):
    config = parse_config(tiny_config_file, [("ablation.mask_ratios", "[0.5]"), ("ablation.axes", "[mask_ratio]")])
    writer = AblationWriter()
    run_ablation(config, writer)
    assert len(writer.rows) == 1
    assert writer.rows[0][0] == 0.5
    assert math.isfinite(writer.rows[0][-1])
