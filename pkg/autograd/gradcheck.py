import logging
from typing import Callable

import numpy as np
from pydantic import BaseModel

from autograd.tensor import Tape, Tensor

logger = logging.getLogger(__name__)

LossFn = Callable[[dict[str, Tensor]], Tensor]


class GradCheckReport(BaseModel):
    checked: int
    skipped: int
    max_rel_err: float
    mean_rel_err: float
    within_tol: float  # fraction of checked coordinates with rel. err <= tol
    tol: float
    min_fraction: float = 0.95

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.within_tol >= self.min_fraction


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _evaluate(fn: LossFn, params: dict[str, np.ndarray], frozen: list[np.ndarray]) -> tuple[float, list[np.ndarray]]:
    tape = Tape(dtype=np.float64, record_kinks=True, frozen=frozen)
    loss = fn(tape.watch_all(params))
    return float(loss.data), tape.kinks


def _near_kink(base: list[np.ndarray], perturbed: list[list[np.ndarray]], margin: float) -> bool:
    """True when some ReLU input changes sign across the perturbed evaluations, or sits within
    `margin` of zero while moving by more than a tenth of its distance to it."""
    for idx, ref in enumerate(base):
        for values in perturbed:
            other = values[idx]
            if np.any(np.sign(other) != np.sign(ref)):
                return True
            moved = np.abs(other - ref)
            close = np.abs(ref) < margin
            if np.any(close & (moved * 10 > np.abs(ref))):
                return True
    return False


def finite_diff_check(
    fn: LossFn,
    params: dict[str, np.ndarray],
    step: float = 1e-5,
    kink_margin: float = 1e-3,
    samples: int = 200,
    tol: float = 1e-4,
    min_fraction: float = 0.95,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients of `fn` with central differences on sampled coordinates.

    `fn` receives the parameters as watched tensors on a fresh tape and must
    return a scalar loss; it is re-evaluated twice per checked coordinate, so
    every source of randomness must be fixed outside of it. Stop-gradient
    outputs are held at their unperturbed values during those re-evaluations,
    which is the function the analytic gradient differentiates.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    params = {name: np.array(value, dtype=np.float64) for name, value in params.items()}

    tape = Tape(dtype=np.float64, record_kinks=True)
    watched = tape.watch_all(params)
    grads = tape.backward(fn(watched))
    analytic = {name: grads.wrt(t) for name, t in watched.items()}
    base_kinks = tape.kinks
    base_stopped = tape.stopped

    coords = [(name, i) for name, value in params.items() for i in range(value.size)]
    rng = np.random.default_rng(seed)
    if len(coords) > samples:
        picked = rng.choice(len(coords), size=samples, replace=False)
        coords = [coords[i] for i in sorted(picked)]

    errors: list[float] = []
    skipped = 0
    for name, flat in coords:
        original = params[name].flat[flat]
        params[name].flat[flat] = original + step
        f_plus, kinks_plus = _evaluate(fn, params, base_stopped)
        params[name].flat[flat] = original - step
        f_minus, kinks_minus = _evaluate(fn, params, base_stopped)
        params[name].flat[flat] = original

        if _near_kink(base_kinks, [kinks_plus, kinks_minus], kink_margin):
            skipped += 1
            continue
        numeric = (f_plus - f_minus) / (2 * step)
        errors.append(relative_error(float(analytic[name].flat[flat]), numeric))

    if not errors:
        logger.warning("gradient check skipped every sampled coordinate")
        return GradCheckReport(
            checked=0,
            skipped=skipped,
            max_rel_err=0.0,
            mean_rel_err=0.0,
            within_tol=0.0,
            tol=tol,
            min_fraction=min_fraction,
        )

    err = np.array(errors)
    report = GradCheckReport(
        checked=len(errors),
        skipped=skipped,
        max_rel_err=float(err.max()),
        mean_rel_err=float(err.mean()),
        within_tol=float((err <= tol).mean()),
        tol=tol,
        min_fraction=min_fraction,
    )
    logger.debug("gradcheck: %s", report)
    return report
