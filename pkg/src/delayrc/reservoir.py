"""Delay reservoir forward pass: masking, multiplexing, engines, de-multiplexing."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .dde import (Drive, FeedbackTap, Nonlinearity, SystemParams, default_step, integrate)
from .errors import ConfigurationError, ContractError, DivergenceError, ParameterError
from .virtual import NodeGrid, continuous_to_nodes, discrete_map_run, initial_state


class MaskKind(str, Enum):
    BINARY = "binary"
    MULTILEVEL = "multilevel"
    UNIFORM = "uniform"
    TWO_TONE_SIN = "two_tone_sin"


class Mode(str, Enum):
    CONTINUOUS = "dde"
    DISCRETE_MAP = "map"
    ELM = "elm"


class DegenerateTapsWarning(UserWarning):
    """Two feedback taps share the same delay."""


@dataclass(frozen=True)
class InputMask:
    weights: np.ndarray
    kind: MaskKind
    seed: int
    levels: Optional[int] = None
    tones: Optional[Tuple[int, int]] = None
    bipolar: bool = True

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[1]

    def scaled(self, factor: float) -> "InputMask":
        return InputMask(self.weights * factor, self.kind, self.seed, self.levels, self.tones, self.bipolar)


def two_tone_value(phase, p: int, q: int):
    """Two-tone sinusoidal mask value at ``phase = t / tau_D``; always within [0, 1]."""
    phase = np.asarray(phase, dtype=float)
    arg = -0.25 * np.pi * np.cos(2 * np.pi * p * phase) - 0.25 * np.pi * np.cos(2 * np.pi * q * phase)
    return 0.5 * (1.0 + np.sin(arg))


def make_mask(kind, seed: int, n_nodes: int, n_inputs: int = 1, *, levels: Optional[int] = None,
              tones: Optional[Tuple[int, int]] = None, bipolar: bool = True,
              period_nodes: Optional[int] = None) -> InputMask:
    """Build an ``n_nodes x n_inputs`` input mask, deterministic in ``(kind, seed, shape)``.

    ``binary`` draws from {-1, +1} (or {0, 1} with ``bipolar=False``);
    ``multilevel`` from ``levels`` equispaced values in [-1, 1];
    ``uniform`` from U(-1, 1).  ``two_tone_sin`` evaluates the two-tone
    sinusoid with integer ``tones=(p, q)`` at node centres, taking the delay
    as ``period_nodes`` node slots (default ``n_nodes``).
    """
    kind = MaskKind(kind)
    if n_nodes < 1 or n_inputs < 1:
        raise ParameterError("mask dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    shape = (int(n_nodes), int(n_inputs))
    if kind is MaskKind.BINARY:
        values = np.array([-1.0, 1.0]) if bipolar else np.array([0.0, 1.0])
        w = values[rng.integers(0, 2, size=shape)]
    elif kind is MaskKind.MULTILEVEL:
        if levels is None or not 2 <= levels <= 6:
            raise ParameterError(f"multilevel masks need 2..6 levels, got {levels!r}")
        w = np.linspace(-1.0, 1.0, levels)[rng.integers(0, levels, size=shape)]
    elif kind is MaskKind.UNIFORM:
        w = rng.uniform(-1.0, 1.0, size=shape)
    else:
        if n_inputs != 1:
            raise ParameterError("two-tone masks support a single input")
        if tones is None or len(tones) != 2:
            raise ParameterError("two-tone masks need tones=(p, q)")
        p, q = tones
        if int(p) != p or int(q) != q or p == q:
            raise ParameterError("two-tone frequencies must be distinct integers")
        period = n_nodes if period_nodes is None else period_nodes
        centres = (np.arange(n_nodes) + 0.5) / period
        w = two_tone_value(centres, int(p), int(q))[:, None]
        tones = (int(p), int(q))
    return InputMask(w, kind, int(seed), levels, tones, bipolar)


def _as_input_matrix(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    if u.ndim != 2:
        raise ContractError("inputs must be a (T,) or (M, T) array")
    return u


def masked_inputs(u, mask: InputMask) -> np.ndarray:
    """``W_in @ u`` as an ``(n_nodes, T)`` matrix."""
    u = _as_input_matrix(u)
    if u.shape[0] != mask.n_inputs:
        raise ContractError(f"mask expects {mask.n_inputs} input channels, got {u.shape[0]}")
    return mask.weights @ u


def multiplex(u, mask: InputMask, grid: NodeGrid) -> Drive:
    """Sample-and-hold drive: slot ``(n, l)`` carries ``(W_in u(n))_l`` for one node duration."""
    return Drive(masked_inputs(u, mask).T.ravel(), grid.node_duration)


@dataclass(frozen=True)
class StateMatrix:
    """Virtual-node states, one column per retained input step."""

    values: np.ndarray
    washout_discarded: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ContractError("state matrix contains non-finite entries")

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class ReservoirConfig:
    params: SystemParams
    grid: NodeGrid
    mask: InputMask
    edm_sublayers: int = 1
    readout_desync: float = 0.0
    mode: Mode = Mode.CONTINUOUS
    washout: Optional[int] = None
    step: Optional[float] = None
    scheme: str = "rk4"
    initial_history: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode is Mode.ELM and self.params.taps:
            raise ConfigurationError("ELM mode runs open loop; remove the feedback taps")
        if self.edm_sublayers < 1 or self.grid.n_nodes % self.edm_sublayers:
            raise ConfigurationError(
                f"n_nodes={self.grid.n_nodes} is not divisible by edm_sublayers={self.edm_sublayers}"
            )
        if self.grid.desync >= self.grid.n_nodes:
            raise ConfigurationError(f"desync k={self.grid.desync} must be < n_nodes={self.grid.n_nodes}")
        if self.mask.n_nodes != self.nodes_per_step:
            raise ContractError(f"mask has {self.mask.n_nodes} rows, expected {self.nodes_per_step}")
        if self.readout_desync != 0 and self.mode is not Mode.CONTINUOUS:
            raise ConfigurationError("readout desync needs the continuous engine")
        if self.washout is not None and self.washout < 0:
            raise ParameterError("washout must be >= 0")
        if self.params.taps and self.mode is not Mode.ELM:
            principal = self.params.taps[0].delay
            if abs(principal - self.grid.delay) > 1e-9 * self.grid.delay:
                raise ConfigurationError(
                    f"first tap delay {principal:.6g} differs from the grid delay {self.grid.delay:.6g}"
                )

    @property
    def nodes_per_step(self) -> int:
        return self.grid.n_nodes // self.edm_sublayers

    @property
    def input_period(self) -> float:
        """Duration of one input step (the mask duration, divided among EDM sublayers)."""
        return self.nodes_per_step * self.grid.node_duration

    @property
    def washout_steps(self) -> int:
        if self.washout is not None:
            return int(self.washout)
        return max(100, int(math.ceil(10 * self.grid.delay / self.input_period)))

    def with_mode(self, mode) -> "ReservoirConfig":
        mode = Mode(mode)
        params = self.params
        if mode is Mode.ELM:
            params = replace(params, taps=())
        return replace(self, mode=mode, params=params)


def make_config(n_nodes: int = 50, *, desync: int = 1, beta: float = 0.5, phi0: float = 0.0,
                rho: float = 1.0, mu: float = 1.0, nonlinearity="sin2", mode="map",
                response_time: float = 1.0, node_duration: float = 100.0, mask_kind="binary",
                mask_seed: int = 0, n_inputs: int = 1, mask_levels: Optional[int] = None,
                mask_tones: Optional[Tuple[int, int]] = None, mask_bipolar: bool = True,
                edm_sublayers: int = 1, readout_desync: float = 0.0, washout: Optional[int] = None,
                extra_taps: Tuple[FeedbackTap, ...] = (), sampling_rule="end", step=None,
                scheme: str = "rk4") -> ReservoirConfig:
    """Convenience constructor from scalar settings.

    The principal tap has delay ``(n_nodes + desync) * node_duration`` and gain
    ``beta``; ``extra_taps`` are appended.  ELM mode drops all taps.
    """
    mode = Mode(mode)
    grid = NodeGrid(n_nodes, node_duration, desync, sampling_rule)
    taps: List[FeedbackTap] = [] if mode is Mode.ELM else [grid.principal_tap(beta), *extra_taps]
    params = SystemParams(response_time, tuple(taps), mu, rho, phi0, Nonlinearity(nonlinearity))
    if edm_sublayers < 1 or n_nodes % edm_sublayers:
        raise ConfigurationError(f"n_nodes={n_nodes} is not divisible by edm_sublayers={edm_sublayers}")
    mask = make_mask(mask_kind, mask_seed, n_nodes // edm_sublayers, n_inputs, levels=mask_levels,
                     tones=mask_tones, bipolar=mask_bipolar, period_nodes=n_nodes + desync)
    return ReservoirConfig(params, grid, mask, edm_sublayers, readout_desync, mode, washout, step, scheme)


def run(config: ReservoirConfig, inputs, *, keep_washout: bool = False) -> StateMatrix:
    """Drive the configured engine with ``inputs`` ((T,) or (M, T)) and collect node states.

    Returns an ``(nodes_per_step, T - washout)`` :class:`StateMatrix`; column
    ``n`` holds the nodes written while input ``washout + n`` was injected.

    Raises:
        ContractError: fewer inputs than the washout.
        DivergenceError: from the integrator, tagged with the input index.
    """
    u_in = masked_inputs(inputs, config.mask)
    n_sub, total = u_in.shape
    washout = 0 if keep_washout else config.washout_steps
    if total <= washout:
        raise ContractError(f"need more than {washout} inputs, got {total}")
    p = config.params
    flat = u_in.T.ravel()

    if config.mode is Mode.ELM:
        states = p.nonlinearity(p.rho * u_in + p.phi0)
    elif config.mode is Mode.DISCRETE_MAP:
        states = discrete_map_run(p, config.grid, flat, initial=config.initial_history)
        states = states.reshape(total, n_sub).T
    else:
        grid = config.grid
        period = config.input_period
        step = config.step if config.step is not None else default_step(p.response_time, grid.node_duration)
        slack = max(config.readout_desync, 0.0) * n_sub * grid.node_duration
        duration = total * period + slack
        x0 = initial_state(p) if config.initial_history is None else config.initial_history
        try:
            traj = integrate(p, Drive(flat, grid.node_duration), step, duration, x0, config.scheme)
        except DivergenceError as exc:
            index = int(exc.time // period)
            raise DivergenceError(f"{exc} while processing input {index}", exc.time, index) from exc
        states = continuous_to_nodes(traj, grid, total, config.readout_desync, config.edm_sublayers)
    return StateMatrix(np.ascontiguousarray(states[:, washout:]), washout)


def double_delay_config(tau_d1: float, nu_ro: float, beta: float) -> List[FeedbackTap]:
    """Two taps at ``tau_d1`` and ``tau_d1 + 1/(2 nu_ro)``, each with gain ``beta / 2``.

    Splitting the gain evenly keeps the total loop gain at ``beta``.
    """
    if not nu_ro > 0:
        raise ParameterError("relaxation-oscillation frequency must be > 0")
    tau_d2 = tau_d1 + 1.0 / (2.0 * nu_ro)
    if tau_d2 - tau_d1 <= 1e-12 * tau_d1:
        warnings.warn("double-delay taps coincide (nu_ro -> inf)", DegenerateTapsWarning, stacklevel=2)
    return [FeedbackTap(tau_d1, beta / 2.0), FeedbackTap(tau_d2, beta / 2.0)]
