from contextlib import nullcontext
from typing import Any, ContextManager, List, Tuple

import pytest

from ivcl.cli.main import get_input_arguments, main, parse_overrides
from ivcl.toyworlds.dataset_file import read_dataset


@pytest.mark.parametrize(
    "extras, expected, context",
    [
        pytest.param([], [], nullcontext(), id="none"),
        pytest.param(["--seed", "3"], [("seed", "3")], nullcontext(), id="separate"),
        pytest.param(["--pretrain.mask-ratio=0.5"], [("pretrain.mask_ratio", "0.5")], nullcontext(), id="joined"),
        pytest.param(["--a", "1", "--b=2"], [("a", "1"), ("b", "2")], nullcontext(), id="several"),
        pytest.param(["0.5"], None, pytest.raises(ValueError), id="positional"),
        pytest.param(["--seed"], None, pytest.raises(ValueError), id="missing_value"),
        pytest.param(["--"], None, pytest.raises(ValueError), id="empty_key"),
    ],
)
def test_parse_overrides(extras: List[str], expected: List[Tuple[str, str]], context: ContextManager[Any]):
    with context:
        assert parse_overrides(extras) == expected


def test_overrides_follow_the_subcommand():
    kwargs = get_input_arguments(["gen-data", "--mask-ratio", "0.5"])
    assert kwargs["subcommand"] == "gen-data"
    assert kwargs["overrides"] == [("mask_ratio", "0.5")]
    assert kwargs["needs_config"]


def test_short_prefixes_are_overrides():
    kwargs = get_input_arguments(["pretrain", "--out", "x"])
    assert kwargs["overrides"] == [("out", "x")]
    assert kwargs["output_dir"] is None


def test_commands_without_configuration_reject_extras():
    with pytest.raises(SystemExit):
        get_input_arguments(["gradcheck", "--seed", "1"])


def test_invalid_configuration_exits_with_an_error_line(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen-data", "-o", str(tmp_path), "--mask_ratio", "1.5"])
    assert info.value.code == 1
    err = capsys.readouterr().err
    assert "error: ConfigParseError: --mask_ratio: pretrain.mask_ratio" in err


def test_unwritable_output_exits_with_an_error_line(tmp_path, tiny_config_file, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(SystemExit) as info:
        main(["gen-data", "-c", str(tiny_config_file), "-o", str(blocker / "sub")])
    assert info.value.code == 1
    lines = capsys.readouterr().err.splitlines()
    assert lines[-1].startswith("error: NotADirectoryError: ")


def test_gen_data(tmp_path, tiny_config_file):
    out = tmp_path / "data"
    main(["gen-data", "-c", str(tiny_config_file), "-o", str(out)])
    assert (out / "config.txt").is_file()
    counts = {"train": 4, "val": 2, "test": 2, "pretrain": 2}
    for partition, count in counts.items():
        dataset = read_dataset(out / f"{partition}.ivtw")
        assert len(dataset.records) == count
        assert dataset.config["run.seed"] == "0"
        for record in dataset.records:
            record.check()
    assert read_dataset(out / "pretrain.ivtw").config["pretrain.total_frames"] == "4"


@pytest.mark.slow
def test_pretrain_finetune_eval(tmp_path, tiny_config_file):
    data, pre, fine = tmp_path / "data", tmp_path / "pre", tmp_path / "fine"
    config = ["-c", str(tiny_config_file)]
    main(["gen-data", *config, "-o", str(data)])
    main(["pretrain", *config, "-o", str(pre), "-d", str(data)])
    losses = (pre / "losses.txt").read_text().splitlines()
    assert [line.split()[:3] for line in losses] == [["step", "1", "loss"], ["step", "2", "loss"]]
    main(["finetune", *config, "-o", str(fine), "-d", str(data), "-k", str(pre / "pretrain.ckpt")])
    metrics = (fine / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "epoch,split,loss,top1"
    assert metrics[-1].split(",")[1] == "test"
    main(["eval", *config, "-o", str(fine), "-d", str(data), "-k", str(fine / "finetune.ckpt")])
    assert (fine / "eval.csv").read_text().splitlines()[1].startswith("0,test,")
    main(["visualize", *config, "-o", str(fine), "-k", str(pre / "pretrain.ckpt")])
    assert list((fine / "heatmaps").glob("*.ppm"))
    assert (fine / "alignment.csv").read_text().startswith("episode,frame,slot,alignment")


def test_mismatched_dataset_is_rejected(tmp_path, tiny_config_file, capsys):
    data = tmp_path / "data"
    main(["gen-data", "-c", str(tiny_config_file), "-o", str(data)])
    with pytest.raises(SystemExit):
        main(["finetune", "-c", str(tiny_config_file), "-o", str(tmp_path / "fine"), "-d", str(data), "--seed", "1"])
    assert "generated with other values of run.seed" in capsys.readouterr().err
