"""Virtual-node view of a delay system.

Time multiplexing turns one delay interval into ``N`` virtual nodes of width
``node_duration``.  This module converts continuous trajectories into node
states, computes the impulse-response coupling between neighbouring nodes and
provides the instantaneous-limit discrete map used to cross-check the
continuous integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .dde import (Drive, FeedbackTap, SystemParams, Trajectory, impulse_response,
                  integrate, steady_state)
from .errors import ConfigurationError, ContractError, ParameterError, RegimeError

LAG_RTOL = 1e-9


class SamplingRule(str, Enum):
    END_OF_SLOT = "end"
    SLOT_AVERAGE = "average"
    MID_SLOT = "mid"


@dataclass(frozen=True)
class NodeGrid:
    """Node layout of one delay loop.

    The delay is ``(n_nodes + desync) * node_duration``; the input mask spans
    ``n_nodes * node_duration``.  A positive ``desync`` couples node ``l`` to
    node ``l - desync`` of the previous input step.
    """

    n_nodes: int
    node_duration: float
    desync: int = 0
    sampling_rule: SamplingRule = SamplingRule.END_OF_SLOT

    def __post_init__(self):
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 1:
            raise ParameterError(f"n_nodes must be a positive integer, got {self.n_nodes!r}")
        if not math.isfinite(self.node_duration) or self.node_duration <= 0:
            raise ParameterError("node_duration must be finite and > 0")
        if self.n_nodes + self.desync < 1:
            raise ParameterError("delay (n_nodes + desync) * node_duration must be > 0")
        object.__setattr__(self, "sampling_rule", SamplingRule(self.sampling_rule))

    @property
    def mask_duration(self) -> float:
        return self.n_nodes * self.node_duration

    @property
    def delay(self) -> float:
        return (self.n_nodes + self.desync) * self.node_duration

    @property
    def positions(self) -> np.ndarray:
        """Node start times ``l * node_duration`` within one mask period."""
        return self.node_duration * np.arange(self.n_nodes)

    def principal_tap(self, gain: float) -> FeedbackTap:
        return FeedbackTap(self.delay, gain)


@dataclass(frozen=True)
class CouplingKernel:
    weights: np.ndarray
    truncation_threshold: float

    def __len__(self):
        return self.weights.size


def _cumulative_at(values: np.ndarray, step: float, pos: np.ndarray) -> np.ndarray:
    # Exact integral of the piecewise-linear interpolant from sample 0 to fractional index pos.
    cum = np.concatenate(([0.0], np.cumsum(0.5 * step * (values[1:] + values[:-1]))))
    lo = np.minimum(np.floor(pos).astype(np.int64), values.size - 2)
    frac = pos - lo
    v0 = values[lo]
    v1 = values[lo + 1]
    return cum[lo] + frac * step * (v0 + 0.5 * frac * (v1 - v0))


def continuous_to_nodes(traj: Trajectory, grid: NodeGrid, n_steps: int, readout_desync: float = 0.0,
                        sublayers: int = 1, t_offset: float = 0.0) -> np.ndarray:
    """De-multiplex a trajectory into an ``(n_nodes // sublayers) x n_steps`` node matrix.

    Node ``l`` of input step ``n`` reads the slot
    ``[n*P + l*dr, n*P + (l+1)*dr)`` (0-based) where ``P`` is the input
    period ``(n_nodes // sublayers) * node_duration`` and
    ``dr = (1 + readout_desync) * node_duration``.  With a nonzero desync the
    last slots read into the next input period.
    """
    if sublayers < 1 or grid.n_nodes % sublayers:
        raise ConfigurationError("n_nodes must be divisible by the number of sublayers")
    n_sub = grid.n_nodes // sublayers
    period = n_sub * grid.node_duration
    width = (1.0 + readout_desync) * grid.node_duration
    if width <= 0:
        raise ParameterError("readout spacing (1 + xi) * node_duration must be > 0")
    starts = t_offset + period * np.arange(n_steps)[None, :] + width * np.arange(n_sub)[:, None]
    ends = starts + width
    if starts.min() < traj.t0 - 1e-9 * traj.step or traj.positions(ends.max()) > traj.values.size - 1:
        raise ContractError(
            f"trajectory too short: ends at {traj.t_end:.6g}, slots need up to {ends.max():.6g}"
        )
    rule = grid.sampling_rule
    if rule is SamplingRule.END_OF_SLOT:
        return traj.sample(ends)
    if rule is SamplingRule.MID_SLOT:
        return traj.sample(starts + 0.5 * width)
    pos_a = traj.positions(starts)
    pos_b = traj.positions(ends)
    area = _cumulative_at(traj.values, traj.step, pos_b) - _cumulative_at(traj.values, traj.step, pos_a)
    return area / width


def nodes_to_flat(nodes: np.ndarray) -> np.ndarray:
    """Re-flatten a node matrix into slot order (inverse of the multiplexing layout)."""
    return np.asarray(nodes).T.ravel()


def coupling_kernel(response_time: float, node_duration: float, max_offset: int,
                    truncation_threshold: float = 1e-4) -> CouplingKernel:
    """Slot-integrated impulse response linking a node to the nodes before it.

    ``weights[j]`` is the integral of ``h`` over ``[j*dt, (j+1)*dt]``: the share
    of the nonlinear response injected ``j`` slots earlier that is present at
    the end of the current slot.  Offsets whose weight falls below
    ``truncation_threshold * weights[0]`` are dropped.
    """
    if response_time <= 0 or node_duration <= 0:
        raise ParameterError("response_time and node_duration must be > 0")
    if max_offset < 0:
        raise ParameterError("max_offset must be >= 0")
    tr = float(response_time)

    def scaled(s):
        return impulse_response(s * tr, tr) * tr

    weights = []
    for j in range(int(max_offset) + 1):
        a = j * node_duration / tr
        b = (j + 1) * node_duration / tr
        if a > 745:  # exp underflow
            weights.append(0.0)
            continue
        # Beyond 60 response times the integrand is below double precision of the head.
        val, _ = quad(scaled, a, min(b, a + 60.0), epsabs=0.0, epsrel=1e-13, limit=200)
        weights.append(val)
    w = np.array(weights)
    if truncation_threshold > 0 and w[0] > 0:
        keep = w >= truncation_threshold * w[0]
        w = w[: int(np.argmin(keep)) if not keep.all() else w.size]
    return CouplingKernel(w, float(truncation_threshold))


def tap_lags(params: SystemParams, grid: NodeGrid) -> Tuple[int, ...]:
    """Tap delays in units of node slots; each must be a positive integer."""
    lags = []
    for tap in params.taps:
        ratio = tap.delay / grid.node_duration
        lag = int(round(ratio))
        if lag < 1 or abs(lag - ratio) > LAG_RTOL * ratio:
            raise ConfigurationError(
                f"tap delay {tap.delay:.6g} is not a positive multiple of the node duration "
                f"{grid.node_duration:.6g}"
            )
        lags.append(lag)
    return tuple(lags)


def _map_fill(buf: np.ndarray, start: int, u_flat: np.ndarray, params: SystemParams,
              lags: Sequence[int]) -> None:
    # buf[start + s] = f(sum g*mu*buf[start + s - lag] + rho*u[s] + phi0), advanced in blocks of min(lag).
    f = params.nonlinearity
    gains = [tap.gain * params.mu for tap in params.taps]
    total = u_flat.size
    block = min(lags, default=total) or total
    drive = params.rho * u_flat + params.phi0
    for c in range(0, total, block):
        n = min(block, total - c)
        arg = drive[c : c + n].copy()
        for g, lag in zip(gains, lags):
            j = start + c - lag
            arg += g * buf[j : j + n]
        buf[start + c : start + c + n] = f(arg)


def initial_state(params: SystemParams) -> float:
    """Undriven steady state, or zero when no contractive fixed point exists."""
    try:
        return steady_state(params, 0.0)
    except RegimeError:
        return 0.0


def discrete_map_run(params: SystemParams, grid: NodeGrid, u_flat: np.ndarray,
                     initial: Optional[float] = None) -> np.ndarray:
    """Iterate the instantaneous-limit map over a slot-ordered drive sequence.

    Every slot ``s`` takes the value ``f(sum_k gain_k*mu*x[s - lag_k] + rho*u[s] + phi0)``
    where ``lag_k`` is tap ``k``'s delay in slots.  Slots before the start hold
    ``initial`` (default: the undriven steady state).
    """
    u_flat = np.asarray(u_flat, dtype=float).ravel()
    lags = tap_lags(params, grid)
    hist = max(lags, default=0)
    x0 = initial_state(params) if initial is None else float(initial)
    buf = np.empty(hist + u_flat.size)
    buf[:hist] = x0
    _map_fill(buf, hist, u_flat, params, lags)
    return buf[hist:]


def discrete_map_step(prev_nodes, u_in, params: SystemParams, grid: NodeGrid, older=None) -> np.ndarray:
    """Advance the discrete map by one input step.

    Node ``l`` becomes ``f(beta*mu*x_{l-k}(n-1) + rho*u_l + phi0)``.  Indices
    ``l - k < 0`` fall into the tail of round ``n - 2`` (``older``), so the
    map needs a two-round buffer; without ``older`` round ``n - 2`` is taken
    equal to ``prev_nodes``.  Extra taps index the same buffer by their own
    slot lag.
    """
    n = grid.n_nodes
    if grid.desync >= n:
        raise ConfigurationError(f"desync k={grid.desync} must be smaller than n_nodes={n}")
    prev_nodes = np.asarray(prev_nodes, dtype=float).ravel()
    older = prev_nodes if older is None else np.asarray(older, dtype=float).ravel()
    u_in = np.asarray(u_in, dtype=float).ravel()
    if prev_nodes.size != n or older.size != n or u_in.size != n:
        raise ContractError(f"node vectors must have length {n}")
    lags = tap_lags(params, grid)
    if any(lag > 2 * n for lag in lags):
        raise ConfigurationError("tap lags beyond two input steps exceed the two-round buffer")
    buf = np.concatenate((older, prev_nodes, np.empty(n)))
    _map_fill(buf, 2 * n, u_in, params, lags)
    return buf[2 * n :]


def equivalence_check(params: SystemParams, grid: NodeGrid, drive, n_steps: int, *,
                      washout: int = 1, step: Optional[float] = None, scheme: str = "rk4",
                      return_states: bool = False):
    """Max |node difference| between the integrated DDE and the discrete map.

    Args:
        drive: masked input, ``(n_nodes, n_steps)`` or slot-ordered flat.
        washout: leading input steps excluded from the comparison.

    Raises:
        ConfigurationError: outside the instantaneous regime
            (``node_duration < 50 * T_R``) or ``desync < 1``.
    """
    if grid.node_duration < 50 * params.response_time:
        raise ConfigurationError("equivalence requires node_duration >= 50 * T_R")
    if grid.desync < 1:
        raise ConfigurationError("equivalence requires desync k >= 1")
    drive = np.asarray(drive, dtype=float)
    flat = drive.T.ravel() if drive.ndim == 2 else drive.ravel()
    if flat.size != grid.n_nodes * n_steps:
        raise ContractError("drive size does not match n_nodes * n_steps")
    x0 = initial_state(params)
    traj = integrate(params, Drive(flat, grid.node_duration), step, n_steps * grid.mask_duration,
                     initial_history=x0, scheme=scheme)
    end_grid = NodeGrid(grid.n_nodes, grid.node_duration, grid.desync, SamplingRule.END_OF_SLOT)
    cont = continuous_to_nodes(traj, end_grid, n_steps)
    disc = discrete_map_run(params, grid, flat, initial=x0).reshape(n_steps, grid.n_nodes).T
    err = float(np.max(np.abs(cont[:, washout:] - disc[:, washout:]))) if n_steps > washout else 0.0
    if return_states:
        return err, cont, disc
    return err
