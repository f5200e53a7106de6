"""Scalar low-pass delay differential equations of the Ikeda family.

The integrated system is

    T_R * dx/dt = -x(t) + f( sum_k gain_k * mu * x(t - delay_k) + rho * u(t) + phi0 )

with one or more feedback taps, a piecewise-constant drive ``u`` and a
selectable nonlinearity ``f``.  Because ``f`` only sees delayed states, every
block of steps shorter than the smallest delay is a linear first-order filter
with a known forcing term; the integrator exploits this and advances whole
blocks at once with :func:`scipy.signal.lfilter`.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import lfilter

from .errors import ContractError, DivergenceError, ParameterError, RegimeError

logger = logging.getLogger(__name__)

#: States with a larger magnitude abort the integration.
DIVERGENCE_BOUND = 1e6
#: Relative tolerance under which a tap delay counts as a multiple of the step.
COMMENSURABILITY_RTOL = 1e-9


class DelaySnapWarning(UserWarning):
    """A tap delay was moved to the nearest integer multiple of the step."""


class Nonlinearity(str, Enum):
    SIN_SQUARED = "sin2"
    SINE = "sine"
    TANH = "tanh"
    LINEAR = "linear"

    def __call__(self, a):
        if self is Nonlinearity.SIN_SQUARED:
            s = np.sin(a)
            return s * s
        if self is Nonlinearity.SINE:
            return np.sin(a)
        if self is Nonlinearity.TANH:
            return np.tanh(a)
        return a if isinstance(a, np.ndarray) else a + 0.0


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class FeedbackTap:
    """One delayed feedback path: ``gain * x(t - delay)``."""

    delay: float
    gain: float

    def __post_init__(self):
        _check_positive("tap delay", self.delay)
        if not math.isfinite(self.gain):
            raise ParameterError(f"tap gain must be finite, got {self.gain!r}")


@dataclass(frozen=True)
class SystemParams:
    """Dynamical parameters of the delay system.

    An empty ``taps`` tuple is the open-loop (extreme learning machine) case.
    """

    response_time: float
    taps: Tuple[FeedbackTap, ...] = ()
    mu: float = 1.0
    rho: float = 1.0
    phi0: float = 0.0
    nonlinearity: Nonlinearity = Nonlinearity.SIN_SQUARED

    def __post_init__(self):
        _check_positive("response_time", self.response_time)
        object.__setattr__(self, "taps", tuple(self.taps))
        object.__setattr__(self, "nonlinearity", Nonlinearity(self.nonlinearity))
        for name in ("mu", "rho", "phi0"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    @property
    def loop_gain(self) -> float:
        """Sum of the tap gains (the effective beta of a single-delay system)."""
        return float(sum(t.gain for t in self.taps))

    @property
    def max_delay(self) -> float:
        return max((t.delay for t in self.taps), default=0.0)


@dataclass(frozen=True)
class Drive:
    """Sample-and-hold drive: ``values[j]`` is held on ``[t0 + j*hold, t0 + (j+1)*hold)``.

    The drive is zero outside its support.
    """

    values: np.ndarray
    hold: float
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())
        _check_positive("hold", self.hold)

    @property
    def duration(self) -> float:
        return self.values.size * self.hold

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.floor((t - self.t0) / self.hold).astype(np.int64)
        inside = (idx >= 0) & (idx < self.values.size)
        out = np.zeros(t.shape)
        out[inside] = self.values[idx[inside]]
        return out if out.ndim else float(out)


@dataclass
class HistoryBuffer:
    """Initial function on ``[-(len(values) - 1) * step, 0]`` sampled uniformly.

    ``values[-1]`` is the state at ``t = 0``.  The buffer is owned by a single
    integration run.
    """

    values: np.ndarray
    step: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        _check_positive("step", self.step)
        if self.values.size < 2:
            raise ContractError("history buffer needs at least two samples")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("history buffer contains non-finite values")

    @classmethod
    def constant(cls, value: float, span: float, step: float) -> "HistoryBuffer":
        n = int(math.ceil(span / step - COMMENSURABILITY_RTOL)) + 2
        return cls(np.full(n, float(value)), step)

    @property
    def span(self) -> float:
        return (self.values.size - 1) * self.step

    def derivative(self) -> np.ndarray:
        if np.all(self.values == self.values[0]):
            return np.zeros_like(self.values)
        return np.gradient(self.values, self.step)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled state ``values[i] = x(t0 + i * step)``."""

    t0: float
    step: float
    values: np.ndarray
    delay_steps: Tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        _check_positive("step", self.step)
        if self.values.size == 0:
            raise ContractError("trajectory must be non-empty")

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.step * np.arange(self.values.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.step * (self.values.size - 1)

    def positions(self, t) -> np.ndarray:
        """Fractional sample index of time(s) ``t``; snapped to integers when within 1e-9."""
        pos = (np.asarray(t, dtype=float) - self.t0) / self.step
        near = np.rint(pos)
        return np.where(np.abs(pos - near) <= 1e-9 * np.maximum(1.0, np.abs(pos)), near, pos)

    def sample(self, t) -> np.ndarray:
        """Linearly interpolated state; grid times return stored samples exactly."""
        pos = self.positions(t)
        if np.any(pos < 0) or np.any(pos > self.values.size - 1):
            raise ContractError("sample time outside the trajectory")
        lo = np.minimum(np.floor(pos).astype(np.int64), self.values.size - 1)
        frac = pos - lo
        hi = np.minimum(lo + 1, self.values.size - 1)
        exact = frac == 0
        out = np.where(exact, self.values[lo], self.values[lo] + frac * (self.values[hi] - self.values[lo]))
        return out if out.ndim else float(out)


def impulse_response(t, response_time: float):
    """Causal low-pass impulse response ``exp(-t/T_R)/T_R`` (zero for ``t < 0``)."""
    response_time = _check_positive("response_time", response_time)
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 0, np.exp(-np.maximum(t, 0.0) / response_time) / response_time, 0.0)
    return out if out.ndim else float(out)


def _argument(params: SystemParams, delayed: Sequence, u):
    acc = params.rho * u + params.phi0
    for tap, xd in zip(params.taps, delayed):
        acc = acc + tap.gain * params.mu * xd
    return acc


def rhs(x, delayed: Sequence, u, params: SystemParams):
    """Return ``T_R * dx/dt`` for state ``x`` and one delayed state per tap."""
    delayed = list(delayed)
    if len(delayed) != len(params.taps):
        raise ContractError(f"expected {len(params.taps)} delayed states, got {len(delayed)}")
    return params.nonlinearity(_argument(params, delayed, u)) - x


def steady_state(params: SystemParams, u_const: float = 0.0, *, max_iter: int = 100_000,
                 tol: float = 1e-12) -> float:
    """Fixed point of ``x = f(loop_gain * mu * x + rho * u + phi0)`` by plain iteration.

    Raises:
        RegimeError: the iteration does not converge within ``max_iter`` steps,
            which happens outside the contractive regime (oscillatory or chaotic
            operation, or a linear loop gain of magnitude >= 1).
    """
    f = params.nonlinearity
    gain = params.loop_gain * params.mu
    offset = params.rho * u_const + params.phi0
    x = float(f(offset))
    for _ in range(max_iter):
        nxt = float(f(gain * x + offset))
        if not math.isfinite(nxt) or abs(nxt) > DIVERGENCE_BOUND:
            break
        if abs(nxt - x) <= tol:
            x = nxt
            if abs(x - float(f(gain * x + offset))) <= tol:
                return x
        x = nxt
    raise RegimeError(
        f"fixed-point iteration did not converge in {max_iter} steps "
        f"(loop gain {gain:g}); the system may be oscillatory or chaotic"
    )


def default_step(response_time: float, node_duration: Optional[float] = None) -> float:
    """Integration step ``min(T_R, node_duration) / 16``."""
    scale = response_time if node_duration is None else min(response_time, node_duration)
    return scale / 16.0


def snap_delays(params: SystemParams, step: float) -> Tuple[int, ...]:
    """Tap delays expressed as integer step counts.

    Delays that are not a multiple of ``step`` (relative 1e-9) are rounded to
    the nearest multiple and reported with a :class:`DelaySnapWarning`.
    """
    out = []
    for tap in params.taps:
        ratio = tap.delay / step
        n = int(round(ratio))
        if n < 1:
            raise ParameterError(f"tap delay {tap.delay:g} is shorter than the step {step:g}")
        if abs(n - ratio) > COMMENSURABILITY_RTOL * ratio:
            msg = f"tap delay {tap.delay:.6g} snapped to {n} steps ({n * step:.6g})"
            logger.warning(msg)
            warnings.warn(msg, DelaySnapWarning, stacklevel=3)
        out.append(n)
    return tuple(out)


def _rk4_coefficients(r: float) -> np.ndarray:
    # RK4 on r*(F - x) is affine in (x, F(t), F(t+h/2), F(t+h)); evaluate on a basis.
    x = np.array([1.0, 0.0, 0.0, 0.0])
    f0 = np.array([0.0, 1.0, 0.0, 0.0])
    fm = np.array([0.0, 0.0, 1.0, 0.0])
    f1 = np.array([0.0, 0.0, 0.0, 1.0])
    k1 = r * (f0 - x)
    k2 = r * (fm - (x + 0.5 * k1))
    k3 = r * (fm - (x + 0.5 * k2))
    k4 = r * (f1 - (x + k3))
    return x + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def _initial_history(params, initial_history, step, n_hist):
    if isinstance(initial_history, HistoryBuffer):
        if abs(initial_history.step - step) > COMMENSURABILITY_RTOL * step:
            raise ContractError("history buffer step differs from the integration step")
        if initial_history.values.size < n_hist + 1:
            raise ContractError(
                f"history spans {initial_history.span:g}, need at least {n_hist * step:g} plus one step"
            )
        vals = initial_history.values[-(n_hist + 1):].copy()
        deriv = initial_history.derivative()[-(n_hist + 1):].copy()
        return vals, deriv
    if initial_history is None:
        try:
            value = steady_state(params, 0.0)
        except RegimeError:
            logger.info("no contractive fixed point; starting from zero history")
            value = 0.0
    else:
        value = float(initial_history)
        if not math.isfinite(value):
            raise ParameterError("initial history must be finite")
    return np.full(n_hist + 1, value), np.zeros(n_hist + 1)


def integrate(params: SystemParams, drive: Union[Drive, float, None], step: Optional[float],
              duration: float, initial_history=None, scheme: str = "rk4") -> Trajectory:
    """Integrate the delay system on a uniform grid.

    Args:
        params: system parameters.
        drive: a :class:`Drive`, a constant, or ``None`` for no drive.  The
            drive value applied during ``[t_i, t_i + step)`` is the one in
            effect at the midpoint of that interval.
        step: integration step; ``None`` selects ``T_R / 16``.
        duration: simulated time; the result has ``duration / step + 1`` samples.
        initial_history: ``None`` (constant at the undriven steady state, or
            zero when no contractive fixed point exists), a constant, or a
            :class:`HistoryBuffer`.
        scheme: ``"euler"`` or ``"rk4"``.  RK4 reads delayed states between
            grid points by cubic Hermite interpolation of the stored samples
            and their one-sided derivatives.

    Raises:
        ParameterError: step coarser than ``T_R / 2`` or invalid numbers.
        DivergenceError: a state became non-finite or exceeded 1e6.
    """
    tr = params.response_time
    step = default_step(tr) if step is None else _check_positive("step", step)
    if step > tr / 2:
        raise ParameterError(f"step {step:g} is coarser than T_R/2 = {tr / 2:g}")
    if step > tr / 8:
        logger.warning("step %.3g exceeds T_R/8; accuracy is not guaranteed", step)
    if scheme not in ("euler", "rk4"):
        raise ParameterError(f"unknown scheme {scheme!r}")
    duration = _check_positive("duration", duration)
    ratio = duration / step
    n_steps = int(round(ratio)) if abs(ratio - round(ratio)) <= 1e-9 * ratio else int(math.ceil(ratio))

    lags = snap_delays(params, step)
    n_hist = max(lags, default=0) + 1
    hist, hist_deriv = _initial_history(params, initial_history, step, n_hist)
    o = n_hist
    x = np.empty(o + 1 + n_steps)
    x[: o + 1] = hist
    # One-sided derivatives (RK4 only): right-limit at grid point j, left-limit at j.
    d_right = np.zeros_like(x)
    d_left = np.zeros_like(x)
    d_right[:o] = hist_deriv[:o]
    d_left[: o + 1] = hist_deriv

    if drive is None:
        u = np.zeros(n_steps)
    elif isinstance(drive, Drive):
        u = drive(step * (np.arange(n_steps) + 0.5))
    else:
        u = np.full(n_steps, float(drive))
    u_term = params.rho * u + params.phi0

    f = params.nonlinearity
    r = step / tr
    gains = [tap.gain * params.mu for tap in params.taps]
    if scheme == "rk4":
        a, c0, cm, c1 = _rk4_coefficients(r)
    else:
        a, c0 = 1.0 - r, r
    block = min(lags, default=n_steps) or n_steps

    for c in range(0, n_steps, block):
        n = min(block, n_steps - c)
        arg0 = u_term[c : c + n].copy()
        if scheme == "rk4":
            argm = arg0.copy()
            arg1 = arg0.copy()
        for g, lag in zip(gains, lags):
            j = o + c - lag
            arg0 += g * x[j : j + n]
            if scheme == "rk4":
                lo, hi = x[j : j + n], x[j + 1 : j + 1 + n]
                mid = 0.5 * (lo + hi) + (step / 8.0) * (d_right[j : j + n] - d_left[j + 1 : j + 1 + n])
                argm += g * mid
                arg1 += g * hi
        f0 = f(arg0)
        if scheme == "rk4":
            f1 = f(arg1)
            forcing = c0 * f0 + cm * f(argm) + c1 * f1
        else:
            forcing = c0 * f0
        start = o + c
        seg, _ = lfilter([1.0], [1.0, -a], forcing, zi=[a * x[start]])
        x[start + 1 : start + 1 + n] = seg
        if not np.all(np.isfinite(seg)) or np.max(np.abs(seg)) > DIVERGENCE_BOUND:
            bad = int(np.argmax(~np.isfinite(seg) | (np.abs(np.nan_to_num(seg, nan=np.inf)) > DIVERGENCE_BOUND)))
            t_bad = (c + bad + 1) * step
            raise DivergenceError(f"state diverged at t = {t_bad:.6g}", time=t_bad)
        if scheme == "rk4":
            d_right[start : start + n] = (f0 - x[start : start + n]) / tr
            d_left[start + 1 : start + 1 + n] = (f1 - seg) / tr

    return Trajectory(0.0, step, x[o:].copy(), delay_steps=lags)
