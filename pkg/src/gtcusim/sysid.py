"""Transfer-function identification from logged I/O data.

Fits first- or second-order lag-plus-dead-time models to a recorded
input/output pair by searching a grid of candidate delays.  For each
candidate the one-step regression

    y[k] = a1*y[k-1] (+ a2*y[k-2]) + b*w[k-d]

is solved by linear least squares, where ``w`` carries the trapezoid
input weights of the discrete realization ((u[k]+u[k-1])/2 for first
order), so structurally exact data is recovered exactly.  When the data
carries measurement noise the plain regression is biased (the lagged
output regressor is itself noisy), so each candidate is refined with
instrumental variables: the instruments are the regressors rebuilt from
a noise-free simulation of the current parameter estimate, iterated to
a fixed point.  The winning delay is the one whose refined model has
the smallest full-series simulation error.

Residual-based anomaly detection for the diagnostic loop lives here as
well: a moving-window mean test against a healthy-baseline sigma.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.signal import lfilter

from gtcusim.dynamics import (
    DT_GUARD,
    Signal,
    TransferFunction,
    discretize,
    simulate_series,
)

__all__ = [
    "IdentDataset",
    "FitResult",
    "AnomalyInterval",
    "UnidentifiableError",
    "InstabilityError",
    "ConstantSignalError",
    "fit_first_order",
    "fit_second_order",
    "fit_percent",
    "detect_anomaly",
    "load_dataset",
    "default_delay_grid",
]

MIN_SAMPLES = 10

# IV refinement
MAX_IV_ITERATIONS = 20
IV_RTOL = 1e-10

# least-squares residual (relative to ||y||^2) below which the data is
# treated as structurally exact and refinement is unnecessary
EXACT_RSS_REL = 1e-16


class UnidentifiableError(ValueError):
    """The dataset carries no usable excitation."""


class InstabilityError(ValueError):
    """Every candidate delay mapped to unusable continuous parameters."""


class ConstantSignalError(ValueError):
    """fit_percent denominator undefined for a constant output."""


@dataclass(frozen=True)
class IdentDataset:
    """An input/output record sharing one uniform time base."""

    u: Signal
    y: Signal
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.u) != len(self.y) or not np.array_equal(self.u.times, self.y.times):
            raise ValueError("input and output must share timestamps exactly")
        if len(self.u) < MIN_SAMPLES:
            raise ValueError(f"dataset needs at least {MIN_SAMPLES} samples, got {len(self.u)}")

    @property
    def dt(self) -> float:
        return self.u.dt


@dataclass(frozen=True)
class FitResult:
    """An identified model plus its adequacy against the data."""

    tf: TransferFunction
    fit_percent: float
    residuals: Signal
    degenerate: bool = False

    def to_config(self) -> dict:
        """The fitted transfer function as a plant-config fragment."""
        return self.tf.to_config()


class AnomalyInterval(NamedTuple):
    t_start: float
    t_end: float
    score: float


def default_delay_grid(dt: float, max_delay: float = 5.0) -> np.ndarray:
    """Candidate dead times 0..max_delay in steps of dt."""
    return np.arange(0.0, max_delay + dt * 1e-6, dt)


def fit_percent(y: Signal, y_hat: Signal) -> float:
    """Normalized-RMSE fit: 100 * (1 - ||y-yh|| / ||y-mean(y)||).

    100 is a perfect model, 0 is no better than the mean, negative is
    worse than the mean.
    """
    if len(y) != len(y_hat):
        raise ValueError("signals must have equal length")
    yv = y.values
    denom = float(np.linalg.norm(yv - np.mean(yv)))
    if denom == 0.0:
        raise ConstantSignalError("output signal is constant; fit percent undefined")
    return 100.0 * (1.0 - float(np.linalg.norm(yv - y_hat.values)) / denom)


def fit_first_order(ds: IdentDataset, delay_grid: Sequence[float]) -> FitResult:
    """Identify gain, t1 and dead time of a first-order lag."""
    return _fit(ds, delay_grid, order=1)


def fit_second_order(ds: IdentDataset, delay_grid: Sequence[float]) -> FitResult:
    """Identify gain, t1, t2 and dead time of a second-order lag."""
    return _fit(ds, delay_grid, order=2)


# regression internals ------------------------------------------------------


def _input_weights(u: np.ndarray, order: int) -> np.ndarray:
    """Trapezoid-consistent input regressor, matching the realization."""
    n = len(u)
    w = np.zeros(n)
    if order == 1:
        w[0] = u[0] / 2.0
        w[1:] = 0.5 * (u[1:] + u[:-1])
    else:
        w[0] = u[0] / 4.0
        if n > 1:
            w[1] = (u[1] + 2.0 * u[0]) / 4.0
        w[2:] = (u[2:] + 2.0 * u[1:-1] + u[:-2]) / 4.0
    return w


def _map_back(theta: np.ndarray, dt: float, order: int):
    """Discrete regression coefficients -> (gain, t1, t2), or None.

    Rejects parameters that are unstable, non-causal, or too fast to be
    realized at this sampling step.
    """
    if order == 1:
        a, b = theta
        if not (0.0 < a < 1.0):
            return None
        t1 = 0.5 * dt * (1.0 + a) / (1.0 - a)
        gain = b / (1.0 - a)
        t2 = 0.0
    else:
        a1, a2, b = theta
        denom = 1.0 - a1 - a2
        if denom <= 0.0:
            return None
        s = 4.0 / denom
        q2 = (a1 * s + 2.0) / 2.0
        q1 = s - q2 - 1.0
        t1 = 0.5 * q1 * dt
        t2 = 0.25 * q2 * dt * dt
        gain = b / denom
        if t1 <= 0.0 or t2 < -0.01 * t1 * t1:
            return None
        # numerically-zero t2 would otherwise fake an ultra-fast second pole
        if t2 < 1e-12 * t1 * t1:
            t2 = 0.0
    if gain == 0.0 or not all(map(math.isfinite, (gain, t1, t2))):
        return None
    try:
        tf = TransferFunction(gain=gain, t1=t1, t2=t2)
    except ValueError:
        return None
    if tf.fastest_time_constant < DT_GUARD * dt:
        return None
    return gain, t1, t2


def _fast_sim(gain: float, t1: float, t2: float, d: int, dt: float, u: np.ndarray) -> np.ndarray:
    """Noise-free model response, same difference equation as the blocks."""
    block = discretize(TransferFunction(gain=gain, t1=t1, t2=t2, dead_time=d * dt), dt)
    if d:
        u = np.concatenate([np.zeros(d), u[: len(u) - d]])
    a = np.concatenate([[1.0], -np.asarray(block.a_coeffs)])
    return lfilter(block.b_coeffs, a, u)


def _regression(y: np.ndarray, w: np.ndarray, d: int, k0: int, order: int):
    n = len(y)
    cols = [y[k0 - 1 : n - 1]]
    if order == 2:
        cols.append(y[k0 - 2 : n - 2])
    cols.append(w[k0 - d : n - d])
    return np.column_stack(cols), y[k0:n]


def _fit(ds: IdentDataset, delay_grid: Sequence[float], order: int) -> FitResult:
    u = ds.u.values
    y = ds.y.values
    dt = ds.dt
    n = len(y)

    if np.ptp(u) == 0.0:
        raise UnidentifiableError("input is constant; no excitation to identify from")
    grid = sorted({int(math.floor(float(tc) / dt + 0.5)) for tc in delay_grid})
    if not grid or grid[0] < 0:
        raise ValueError("delay grid must be nonempty and nonnegative")
    k0_common = grid[-1] + order
    if n - k0_common < max(MIN_SAMPLES - order, order + 2):
        raise ValueError(
            f"dataset too short ({n} samples) for delay grid reaching {grid[-1] * dt:g}s"
        )

    w = _input_weights(u, order)
    rhs_common = y[k0_common:]
    rhs_sq = float(rhs_common @ rhs_common)

    candidates = []  # (eq_rss, d, theta)
    for d in grid:
        phi, rhs = _regression(y, w, d, k0_common, order)
        theta, *_ = np.linalg.lstsq(phi, rhs, rcond=None)
        resid = rhs - phi @ theta
        candidates.append((float(resid @ resid), d, theta))

    best_eq = min(c[0] for c in candidates)
    exact = best_eq <= EXACT_RSS_REL * max(rhs_sq, 1e-300)

    best = None  # (sim_rss, d, params)
    if exact:
        cutoff = max(10.0 * best_eq, 1e-14 * max(rhs_sq, 1e-300))
        pool = [(d, th) for eq, d, th in candidates if eq <= cutoff]
    else:
        pool = [(d, _iv_refine(y, w, u, d, th, dt, order)) for _, d, th in candidates]

    for d, theta in pool:
        params = _map_back(theta, dt, order)
        if params is None:
            continue
        y_hat = _fast_sim(*params, d, dt, u)
        sim_rss = float(np.sum((y - y_hat) ** 2))
        if best is None or sim_rss < best[0] or (sim_rss == best[0] and d < best[1]):
            best = (sim_rss, d, params)

    if best is None:
        delays = ", ".join(f"{d * dt:g}s" for d in grid)
        raise InstabilityError(
            f"no candidate delay gave stable positive time constants (tried {delays})"
        )

    _, d, (gain, t1, t2) = best
    tf = TransferFunction(gain=gain, t1=t1, t2=t2, dead_time=d * dt)
    y_hat_sig = simulate_series(tf, ds.u)
    residuals = Signal(ds.y.times.copy(), y - y_hat_sig.values)
    fp = fit_percent(ds.y, y_hat_sig)
    degenerate = order == 2 and t2 < 0.05 * t1 * t1
    return FitResult(tf=tf, fit_percent=fp, residuals=residuals, degenerate=degenerate)


def _iv_refine(y, w, u, d: int, theta0: np.ndarray, dt: float, order: int) -> np.ndarray:
    """Iterate instrumental-variable estimates to remove noise bias.

    Instruments are the regressors rebuilt from a simulation of the
    current estimate, uncorrelated with the output noise.  Falls back to
    the last valid estimate if an iteration leaves the stable region.
    """
    k0 = d + order
    phi, rhs = _regression(y, w, d, k0, order)
    theta = theta0
    for _ in range(MAX_IV_ITERATIONS):
        params = _map_back(theta, dt, order)
        if params is None:
            break
        y_sim = _fast_sim(*params, d, dt, u)
        z, _ = _regression(y_sim, w, d, k0, order)
        try:
            theta_new = np.linalg.solve(z.T @ phi, z.T @ rhs)
        except np.linalg.LinAlgError:
            break
        if _map_back(theta_new, dt, order) is None:
            break
        converged = np.allclose(theta_new, theta, rtol=IV_RTOL, atol=1e-14)
        theta = theta_new
        if converged:
            break
    return theta


# residual diagnostics ------------------------------------------------------


def detect_anomaly(
    residuals: Signal,
    window: int,
    threshold_sigma: float,
    healthy_samples: int | None = None,
) -> list[AnomalyInterval]:
    """Flag intervals whose moving-window mean residual is implausible.

    The baseline sigma comes from a healthy prefix (first 20% of the
    record unless ``healthy_samples`` says otherwise).  An index is
    flagged when |mean over the trailing window| exceeds
    threshold_sigma * sigma / sqrt(window); contiguous flagged indices
    are merged into maximal intervals scored by their peak normalized
    deviation.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    r = residuals.values
    n = len(r)
    healthy = int(0.2 * n) if healthy_samples is None else int(healthy_samples)
    if healthy < window:
        raise ValueError(
            f"healthy prefix ({healthy} samples) shorter than window ({window})"
        )
    if not math.isfinite(threshold_sigma):
        return []

    sigma = float(np.std(r[:healthy]))
    # trailing moving mean, defined from index window-1 on
    csum = np.concatenate([[0.0], np.cumsum(r)])
    mov = (csum[window:] - csum[:-window]) / window  # mov[j] ends at index j+window-1
    limit = threshold_sigma * sigma / math.sqrt(window)
    if sigma == 0.0:
        flagged = np.abs(mov) > 0.0
    else:
        flagged = np.abs(mov) > limit

    out: list[AnomalyInterval] = []
    times = residuals.times
    j = 0
    while j < len(flagged):
        if not flagged[j]:
            j += 1
            continue
        j_end = j
        while j_end + 1 < len(flagged) and flagged[j_end + 1]:
            j_end += 1
        seg = np.abs(mov[j : j_end + 1])
        score = float(np.max(seg) / (sigma / math.sqrt(window))) if sigma > 0 else math.inf
        out.append(
            AnomalyInterval(
                t_start=float(times[j + window - 1]),
                t_end=float(times[j_end + window - 1]),
                score=score,
            )
        )
        j = j_end + 1
    return out


# dataset I/O ----------------------------------------------------------------


def load_dataset(path, input_col: str, output_col: str, time_col: str = "t") -> IdentDataset:
    """Read a dataset from CSV with a header line and a time column."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty CSV")
        missing = {time_col, input_col, output_col} - set(reader.fieldnames)
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        t, u, y = [], [], []
        for row in reader:
            t.append(float(row[time_col]))
            u.append(float(row[input_col]))
            y.append(float(row[output_col]))
    return IdentDataset(
        u=Signal(np.asarray(t), np.asarray(u)),
        y=Signal(np.asarray(t), np.asarray(y)),
        meta={"input": input_col, "output": output_col, "source": str(path)},
    )
