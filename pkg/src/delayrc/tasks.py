"""Benchmark datasets: NARMA10, channel equalization, Santa Fe, memory-capacity probes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from . import definitions as D
from .dde import FeedbackTap, HistoryBuffer, SystemParams, integrate
from .errors import ContractError, GenerationError, NormalizationError, ParameterError, ParseError


@dataclass
class TaskDataset:
    """Aligned input/target sequences.

    ``inputs`` is ``(M, T)`` and ``targets`` ``(K, T)``; column ``n`` of the
    targets is what the readout should produce after seeing ``inputs[:, :n+1]``.
    """

    inputs: np.ndarray
    targets: np.ndarray
    train_fraction: float = 0.8
    folds: int = 1
    washout: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float)
        if self.targets.ndim == 1:
            self.targets = self.targets[None, :]
        if self.inputs.shape[1] != self.targets.shape[1]:
            raise ContractError("inputs and targets must have the same length")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ParameterError("dataset contains non-finite values")
        if not 0 < self.train_fraction < 1:
            raise ParameterError("train_fraction must lie in (0, 1)")
        if self.folds < 1:
            raise ParameterError("folds must be >= 1")

    @property
    def name(self) -> str:
        return self.meta.get("name", "dataset")

    def __len__(self):
        return self.inputs.shape[1]

    def denormalize(self, values):
        """Undo the zero-mean/unit-variance normalization recorded in ``meta``."""
        return np.asarray(values) * self.meta.get("std", 1.0) + self.meta.get("mean", 0.0)

    def to_csv(self, path) -> None:
        """Write ``n, u..., target...`` rows with a header; floats at 17 significant digits."""
        m, k = self.inputs.shape[0], self.targets.shape[0]
        header = ["n"] + (["u"] if m == 1 else [f"u{i}" for i in range(m)])
        header += ["target"] if k == 1 else [f"target{i}" for i in range(k)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for n in range(len(self)):
                row = [str(n)] + [f"{v:.17g}" for v in self.inputs[:, n]]
                row += [f"{v:.17g}" for v in self.targets[:, n]]
                writer.writerow(row)


def narma10_series(u: np.ndarray) -> np.ndarray:
    """NARMA10 response: ``y[n+1]`` for every input ``u[n]``, from a zero history."""
    u = np.asarray(u, dtype=float)
    order = D.NARMA_ORDER
    y = np.zeros(u.size + order + 1)  # y[order + m] is y(m); y(m <= 0) = 0
    up = np.concatenate((np.zeros(order - 1), u))  # up[n] is u(n - 9)
    window = 0.0  # sum_{i=0}^{9} y(n - i)
    for n in range(u.size):
        yn = y[order + n]
        window += yn - y[n]
        y[order + n + 1] = (D.NARMA_A * yn + D.NARMA_B * yn * window
                            + D.NARMA_C * up[n] * up[order - 1 + n] + D.NARMA_D)
        if not math.isfinite(y[order + n + 1]) or abs(y[order + n + 1]) > 1e12:
            y[order + n + 1:] = np.inf
            break
    return y[order + 1:]


def narma10(T: int, seed: int, *, input_range: Tuple[float, float] = D.NARMA_INPUT_RANGE,
            train_fraction: float = 0.8) -> TaskDataset:
    """NARMA10 driven by i.i.d. uniform input; target at step ``n`` is ``y(n+1)``.

    Divergent realisations (any ``|y| > 1``) are redrawn with the next derived
    seed; the retry count is stored in ``meta["retries"]``.

    Raises:
        GenerationError: more than 10 consecutive divergent draws.
    """
    if T < 200:
        raise ParameterError("NARMA10 needs T >= 200")
    lo, hi = input_range
    for attempt in range(D.NARMA_MAX_RETRIES + 1):
        rng = np.random.default_rng([int(seed), attempt])
        u = rng.uniform(lo, hi, size=T)
        y = narma10_series(u)
        if np.all(np.abs(y) <= D.NARMA_DIVERGENCE_BOUND):
            meta = {"name": "narma10", "seed": int(seed), "retries": attempt, "input_range": (lo, hi)}
            return TaskDataset(u[None, :], y[None, :], train_fraction, meta=meta)
    raise GenerationError(f"NARMA10 diverged for {D.NARMA_MAX_RETRIES + 1} consecutive seeds")


def decode_symbols(values, alphabet: Sequence[float] = D.CHANNEL_SYMBOLS) -> np.ndarray:
    """Nearest-symbol decision (ties go to the lower symbol)."""
    alphabet = np.asarray(alphabet, dtype=float)
    values = np.asarray(values, dtype=float)
    idx = np.argmin(np.abs(values[..., None] - alphabet), axis=-1)
    return alphabet[idx]


def channel_response(d, taps: Sequence[float] = D.CHANNEL_TAPS,
                     distortion: Optional[Tuple[float, float]] = D.CHANNEL_DISTORTION) -> np.ndarray:
    """Noiseless receiver signal for a symbol sequence ``d``.

    Output ``n`` uses ``d[n] .. d[n + len(taps) - 1]``, so it is the received
    value for the symbol ``d[n + len(taps) - 1 - lookahead]``.
    """
    d = np.asarray(d, dtype=float)
    taps = np.asarray(taps, dtype=float)
    length = d.size - taps.size + 1
    if length < 1:
        raise ContractError("symbol sequence shorter than the channel")
    q = np.zeros(length)
    span = taps.size - 1
    for i, c in enumerate(taps):
        q += c * d[span - i : span - i + length]  # taps[i] multiplies d(n + 2 - i)
    return q if distortion is None else q + distortion[0] * q ** 2 + distortion[1] * q ** 3


def channel_eq(T: int, snr_db: float, seed: int, *, taps: Sequence[float] = D.CHANNEL_TAPS,
               distortion: Optional[Tuple[float, float]] = D.CHANNEL_DISTORTION,
               decision_delay: int = 0, train_fraction: float = 0.8) -> TaskDataset:
    """Nonlinear channel equalization.

    ``taps[i]`` multiplies ``d(n + 2 - i)``; ``distortion=(a2, a3)`` applies
    ``q + a2 q^2 + a3 q^3`` (``None`` keeps the channel linear).  Gaussian
    noise of variance ``mean(u^2) / 10^(snr_db/10)`` is added; ``snr_db=inf``
    is noiseless.  The target at step ``n`` is ``d(n - decision_delay)``.
    """
    if T < 1000:
        raise ParameterError("channel equalization needs T >= 1000")
    snr_db = float(snr_db)
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ParameterError(f"invalid SNR {snr_db!r}")
    taps = np.asarray(taps, dtype=float)
    past = max(taps.size - 1 - D.CHANNEL_LOOKAHEAD, 0)
    if not 0 <= decision_delay <= past:
        raise ParameterError(f"decision_delay must lie in [0, {past}]")
    rng = np.random.default_rng(int(seed))
    symbols = np.asarray(D.CHANNEL_SYMBOLS)
    d = symbols[rng.integers(0, symbols.size, size=T + past + D.CHANNEL_LOOKAHEAD)]
    u = channel_response(d, taps, distortion)
    power = float(np.mean(u ** 2))
    if math.isinf(snr_db):
        noise_var = 0.0
    else:
        noise_var = power / 10 ** (snr_db / 10.0)
        u = u + rng.normal(0.0, math.sqrt(noise_var), size=T)
    target = d[past - decision_delay : past - decision_delay + T]
    meta = {"name": "channel_eq", "seed": int(seed), "snr_db": snr_db, "signal_power": power,
            "noise_variance": noise_var, "decision_delay": decision_delay,
            "symbols": tuple(D.CHANNEL_SYMBOLS), "linear": distortion is None}
    return TaskDataset(u[None, :], target[None, :], train_fraction, meta=meta)


def _prediction_dataset(series: np.ndarray, name: str, train_fraction: float, **meta) -> TaskDataset:
    mean = float(np.mean(series))
    std = float(np.std(series))
    if not std > 0:
        raise NormalizationError(f"{name}: series has zero variance and cannot be normalized")
    z = (series - mean) / std
    return TaskDataset(z[None, :-1], z[None, 1:], train_fraction,
                       meta={"name": name, "mean": mean, "std": std, **meta})


def santa_fe_load(path, train_fraction: float = 0.75) -> TaskDataset:
    """Load a one-sample-per-line text series for one-step-ahead prediction.

    The series is normalized to zero mean and unit variance (constants in
    ``meta``); input ``n`` is ``x(n)`` and target ``n`` is ``x(n+1)``.  Blank
    lines are ignored.
    """
    path = Path(path)
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                v = float(text)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: not a number: {text[:40]!r}") from None
            if not math.isfinite(v):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            values.append(v)
    if len(values) < 2:
        raise ParseError(f"{path}: need at least two samples")
    return _prediction_dataset(np.array(values), "santa_fe", train_fraction, path=str(path))


def santa_fe_surrogate(T: int = 4000, seed: int = 0, train_fraction: float = 0.75) -> TaskDataset:
    """Chaotic stand-in for the Santa Fe laser series (NOT the canonical data).

    Samples a sin^2 Ikeda delay system in its chaotic regime (loop gain 2.5,
    delay 20 T_R) once per response time, after discarding 500 samples.
    """
    step = 1.0 / 8
    params = SystemParams(1.0, (FeedbackTap(20.0, 2.5),), phi0=0.2)
    rng = np.random.default_rng(int(seed))
    hist = HistoryBuffer(0.3 + 0.1 * rng.standard_normal(int(20 / step) + 2), step)
    skip = 500
    traj = integrate(params, None, step, float(T + 1 + skip), initial_history=hist)
    series = traj.values[:: int(round(1 / step))][skip : skip + T + 1]
    return _prediction_dataset(series, "santa_fe_surrogate", train_fraction, seed=int(seed), canonical=False)


def mc_probe(T: int, seed: int) -> TaskDataset:
    """I.i.d. uniform probe on [-1, 1]; targets are built per lag by the trainer."""
    if T < 1000:
        raise ParameterError("memory-capacity probes need T >= 1000")
    rng = np.random.default_rng(int(seed))
    u = rng.uniform(*D.MC_PROBE_RANGE, size=T)
    return TaskDataset(u[None, :], np.empty((0, T)), meta={"name": "mc_probe", "seed": int(seed)})
