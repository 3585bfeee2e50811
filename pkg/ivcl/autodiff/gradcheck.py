from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from ..random_number_generator import as_generator
from .tensor import GradTape, ParamTable, Tensor, float64_mode

DEFAULT_STEP = 1e-3
DEFAULT_RTOL = 1e-3
DEFAULT_ATOL = 1e-5


@dataclass(frozen=True)
class GradCheckResult:
    name: str
    max_error: float
    """Largest |analytic - numeric| / max(|analytic|, |numeric|, atol / rtol)"""
    checked: int
    passed: bool

    def __str__(self) -> str:
        status = "ok" if self.passed else "FAILED"
        return (
            f"{self.name}: {status} "
            f"(max relative error {self.max_error:.2e} over {self.checked} entries)"
        )


def check_gradients(
    fn: Callable[[ParamTable], Tensor],
    inputs: Mapping[str, np.ndarray],
    *,
    name: str = "",
    h: float = DEFAULT_STEP,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckResult:
    """Compare analytic gradients of a scalar function with central differences.

    Everything runs in double precision. `fn` must be deterministic: it is
    evaluated once on the tape, then twice per checked entry without tape.

    Args:
        fn: scalar function of named tensors
        inputs: the point at which gradients are checked
        name: label of the check
        h: finite-difference step
        rtol: relative tolerance
        atol: absolute tolerance
        max_entries: check at most this many randomly chosen entries per input
        rng: generator choosing the entries, default seeded with 0

    Returns:
        the result; an entry passes when |a - n| <= atol + rtol * max(|a|, |n|)
    """
    rng = as_generator(rng)
    with float64_mode():
        values = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}
        with GradTape() as tape:
            watched = tape.watch_all({k: Tensor(v) for k, v in values.items()})
            loss = fn(watched)
        analytic = tape.gradients(loss, watched)

        def evaluate() -> float:
            return fn({k: Tensor(v) for k, v in values.items()}).item()

        worst, checked, passed = 0.0, 0, True
        for key, array in values.items():
            flat = array.reshape(-1)
            grad = analytic[key].reshape(-1)
            entries = np.arange(flat.size)
            if max_entries is not None and flat.size > max_entries:
                entries = np.sort(rng.choice(flat.size, max_entries, replace=False))
            for i in entries:
                original = flat[i]
                flat[i] = original + h
                plus = evaluate()
                flat[i] = original - h
                minus = evaluate()
                flat[i] = original
                numeric = (plus - minus) / (2.0 * h)
                error = abs(grad[i] - numeric)
                scale = max(abs(grad[i]), abs(numeric))
                passed &= bool(error <= atol + rtol * scale)
                worst = max(worst, error / max(scale, atol / rtol))
                checked += 1
    return GradCheckResult(name=name, max_error=float(worst), checked=checked, passed=passed)
