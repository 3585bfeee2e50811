import pytest

from ivcl.utils import merge_dicts, round_half_up


@pytest.mark.parametrize(
    "value, expected",
    [
        pytest.param(0.5, 1, id="half"),
        pytest.param(2.5, 3, id="half_even"),
        pytest.param(6.0, 6, id="integer"),
        pytest.param(1.4999, 1, id="below"),
        pytest.param(-0.5, -1, id="negative"),
    ],
)
def test_round_half_up(value: float, expected: int):
    assert round_half_up(value) == expected


def test_merge_dicts_later_wins():
    merged = merge_dicts({"a": {"x": 1, "y": 2}, "b": 3}, {"a": {"y": 4}}, {"c": 5})
    assert merged == {"a": {"x": 1, "y": 4}, "b": 3, "c": 5}
