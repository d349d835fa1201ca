"""Continuous-time transfer-function blocks and their fixed-step realization.

Every signal path in the plant model is one of these blocks:

    W(s) = gain * exp(-dead_time * s) / (t2 * s^2 + t1 * s + 1)

First-order blocks have ``t2 == 0``.  Blocks are discretized with the
bilinear (trapezoidal) transform at a fixed step ``dt``, with the dead time
realized as an integer sample delay.  The trapezoid rule treats a
sample-aligned discontinuity as a ramp over the preceding step, so the
realized response of a step applied at sample ``k`` matches the continuous
step response evaluated half a sample early; oracle comparisons in the
test-suite account for that half-sample offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Order",
    "TransferFunction",
    "DiscreteBlock",
    "Signal",
    "ModelError",
    "SamplingError",
    "PropagationError",
    "step_response",
    "discretize",
    "simulate_series",
]


class ModelError(ValueError):
    """Transfer-function parameters violate the model invariants."""


class SamplingError(ValueError):
    """Requested step size is too coarse for the fastest time constant."""


class PropagationError(ValueError):
    """A non-finite value was fed into a discrete block."""


class Order(Enum):
    FIRST = 1
    SECOND = 2


# dt must stay below fastest_time_constant / DT_GUARD
DT_GUARD = 5.0


@dataclass(frozen=True)
class TransferFunction:
    """Stable first- or second-order lag with gain and pure transport delay.

    gain:       steady-state output per unit input (finite, nonzero)
    t1:         first-order time constant, seconds (> 0)
    t2:         second-order coefficient, seconds^2 (0 for first order)
    dead_time:  transport delay, seconds (>= 0)
    """

    gain: float
    t1: float
    t2: float = 0.0
    dead_time: float = 0.0
    order: Order = field(init=False)

    def __post_init__(self) -> None:
        for name in ("gain", "t1", "t2", "dead_time"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ModelError(f"{name} must be finite, got {v!r}")
        if self.gain == 0.0:
            raise ModelError("gain must be nonzero")
        if self.t1 <= 0.0:
            raise ModelError(f"t1 must be positive, got {self.t1}")
        if self.t2 < 0.0:
            raise ModelError(f"t2 must be >= 0, got {self.t2}")
        if self.dead_time < 0.0:
            raise ModelError(f"dead_time must be >= 0, got {self.dead_time}")
        object.__setattr__(self, "order", Order.SECOND if self.t2 > 0.0 else Order.FIRST)

    @property
    def fastest_time_constant(self) -> float:
        """Shortest characteristic time of the lag, used by sampling guards."""
        if self.order is Order.FIRST:
            return self.t1
        disc = self.t1 * self.t1 - 4.0 * self.t2
        if disc > 0.0:
            # distinct real poles at -1/ta, -1/tb
            ta = 2.0 * self.t2 / (self.t1 + math.sqrt(disc))
            return ta
        # repeated or complex poles: natural time scale sqrt(t2)
        return math.sqrt(self.t2)

    def to_config(self) -> dict:
        """Serialize to the plant-configuration mapping."""
        return {
            "gain": self.gain,
            "t1": self.t1,
            "t2": self.t2,
            "dead_time": self.dead_time,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "TransferFunction":
        try:
            return cls(
                gain=float(cfg["gain"]),
                t1=float(cfg["t1"]),
                t2=float(cfg.get("t2", 0.0)),
                dead_time=float(cfg.get("dead_time", 0.0)),
            )
        except KeyError as exc:
            raise ModelError(f"transfer function config missing key {exc}") from exc


def step_response(tf: TransferFunction, t):
    """Closed-form unit-step response y(t).

    Accepts a scalar time or an array of times; returns the same shape.
    Second-order blocks are evaluated from the closed form of whichever
    pole case applies (distinct real, repeated, or complex).
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("step response time must be >= 0")
    tau = t_arr - tf.dead_time
    active = tau > 0
    tau = np.where(active, tau, 0.0)

    if tf.order is Order.FIRST:
        y = 1.0 - np.exp(-tau / tf.t1)
    else:
        disc = tf.t1 * tf.t1 - 4.0 * tf.t2
        rel = disc / (tf.t1 * tf.t1)
        if rel > 1e-12:
            # distinct real poles: time constants ta < tb
            root = math.sqrt(disc)
            ta = 2.0 * tf.t2 / (tf.t1 + root)
            tb = 2.0 * tf.t2 / (tf.t1 - root)
            y = 1.0 - (tb * np.exp(-tau / tb) - ta * np.exp(-tau / ta)) / (tb - ta)
        elif rel < -1e-12:
            # complex poles: damped oscillation
            wn = 1.0 / math.sqrt(tf.t2)
            zeta = tf.t1 / (2.0 * math.sqrt(tf.t2))
            wd = wn * math.sqrt(1.0 - zeta * zeta)
            decay = np.exp(-zeta * wn * tau)
            y = 1.0 - decay * (np.cos(wd * tau) + (zeta * wn / wd) * np.sin(wd * tau))
        else:
            # repeated pole at -t1/(2*t2)
            tr = 2.0 * tf.t2 / tf.t1
            y = 1.0 - (1.0 + tau / tr) * np.exp(-tau / tr)

    y = np.where(active, y, 0.0) * tf.gain
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(y)
    return y


class DiscreteBlock:
    """Fixed-step realization of a TransferFunction.

    Difference equation (after the ``delay_steps`` input delay):

        y[k] = sum_i a[i] * y[k-1-i] + sum_j b[j] * u[k-delay-j]

    Histories are plain lists, most recent first; the block is a value type
    owned by exactly one simulation loop.
    """

    def __init__(self, b_coeffs, a_coeffs, delay_steps: int, dt: float):
        self.b_coeffs = [float(b) for b in b_coeffs]
        self.a_coeffs = [float(a) for a in a_coeffs]
        self.delay_steps = int(delay_steps)
        self.dt = float(dt)
        if self.delay_steps < 0:
            raise ValueError("delay_steps must be >= 0")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        # input history spans the coefficient window plus the pure delay
        self._u = [0.0] * (len(self.b_coeffs) + self.delay_steps)
        self._y = [0.0] * len(self.a_coeffs)

    @property
    def output(self) -> float:
        return self._y[0] if self._y else 0.0

    def reset(self) -> None:
        self._u = [0.0] * len(self._u)
        self._y = [0.0] * len(self._y)

    def poles(self) -> np.ndarray:
        """Roots of the output-recursion polynomial in z."""
        return np.roots([1.0] + [-a for a in self.a_coeffs])

    def step(self, u: float) -> float:
        """Advance one sample; returns the new output.

        Non-finite input raises PropagationError and leaves the block
        state untouched.
        """
        u = float(u)
        if not math.isfinite(u):
            raise PropagationError(f"non-finite block input {u!r}")
        self._u.insert(0, u)
        self._u.pop()
        y = 0.0
        for j, b in enumerate(self.b_coeffs):
            y += b * self._u[self.delay_steps + j]
        for i, a in enumerate(self.a_coeffs):
            y += a * self._y[i]
        self._y.insert(0, y)
        self._y.pop()
        return y


def discretize(tf: TransferFunction, dt: float) -> DiscreteBlock:
    """Bilinear-transform realization of ``tf`` at fixed step ``dt``.

    Dead time becomes ``round(dead_time / dt)`` whole samples.  Rejects
    steps coarser than a fifth of the fastest time constant.
    """
    if dt <= 0:
        raise SamplingError(f"dt must be positive, got {dt}")
    fastest = tf.fastest_time_constant
    if dt > fastest / DT_GUARD:
        raise SamplingError(
            f"dt={dt:g} too coarse for time constant {fastest:g}s "
            f"(dt/T = {dt / fastest:.3g}, limit {1.0 / DT_GUARD:g})"
        )
    delay_steps = int(math.floor(tf.dead_time / dt + 0.5))

    if tf.order is Order.FIRST:
        c = 2.0 * tf.t1 / dt
        a0 = (c - 1.0) / (c + 1.0)
        b0 = tf.gain / (c + 1.0)
        return DiscreteBlock([b0, b0], [a0], delay_steps, dt)

    q1 = 2.0 * tf.t1 / dt
    q2 = 4.0 * tf.t2 / (dt * dt)
    s = q2 + q1 + 1.0
    a1 = (2.0 * q2 - 2.0) / s
    a2 = (q1 - q2 - 1.0) / s
    b0 = tf.gain / s
    return DiscreteBlock([b0, 2.0 * b0, b0], [a1, a2], delay_steps, dt)


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled time series."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.ndim != 1 or len(t) != len(v):
            raise ValueError("times and values must be 1-d arrays of equal length")
        if len(t) >= 2:
            steps = np.diff(t)
            dt = steps[0]
            if dt <= 0 or np.any(np.abs(steps - dt) > 1e-9 * max(abs(dt), 1.0)):
                raise ValueError("timestamps must increase with constant spacing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        if len(self.times) < 2:
            raise ValueError("dt undefined for signals shorter than 2 samples")
        return float(self.times[1] - self.times[0])

    @classmethod
    def from_values(cls, values, dt: float, t0: float = 0.0) -> "Signal":
        values = np.asarray(values, dtype=float)
        times = t0 + dt * np.arange(len(values))
        return cls(times, values)

    @classmethod
    def step(cls, amplitude: float, t_step: float, duration: float, dt: float) -> "Signal":
        """Step from 0 to ``amplitude`` at the first sample with t >= t_step."""
        n = int(round(duration / dt)) + 1
        times = dt * np.arange(n)
        values = np.where(times >= t_step - 1e-12, amplitude, 0.0)
        return cls(times, values)


def simulate_series(tf: TransferFunction, signal: Signal) -> Signal:
    """Drive a freshly realized block with ``signal`` from rest."""
    block = discretize(tf, signal.dt)
    out = np.empty(len(signal))
    for i, u in enumerate(signal.values):
        out[i] = block.step(u)
    return Signal(signal.times.copy(), out)
