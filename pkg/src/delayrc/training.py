"""Linear readout training, metrics and memory capacity."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import ContractError, MetricError, ParameterError, RankError, StatisticsError
from .tasks import mc_probe

#: At lambda = 0, normal matrices with a larger condition number count as singular.
SINGULAR_CONDITION = 1e12


class Encoding(str, Enum):
    REGRESSION = "regression"
    ONE_HOT = "one_hot"


@dataclass(frozen=True)
class TeacherMatrix:
    values: np.ndarray
    encoding: Encoding = Encoding.REGRESSION

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "encoding", Encoding(self.encoding))
        if self.encoding is Encoding.ONE_HOT:
            ok = np.all((v == 0) | (v == 1)) and np.all(v.sum(axis=0) == 1)
            if not ok:
                raise ContractError("one-hot teacher columns need exactly one 1")

    @classmethod
    def one_hot(cls, labels, n_classes: Optional[int] = None) -> "TeacherMatrix":
        labels = np.asarray(labels, dtype=int)
        k = int(labels.max()) + 1 if n_classes is None else n_classes
        t = np.zeros((k, labels.size))
        t[labels, np.arange(labels.size)] = 1.0
        return cls(t, Encoding.ONE_HOT)


@dataclass(frozen=True)
class ReadoutWeights:
    """``K x N`` readout (``K x (N+1)`` with a trailing bias column)."""

    weights: np.ndarray
    lam: float
    bias_included: bool = False

    @property
    def n_features(self) -> int:
        return self.weights.shape[1] - int(self.bias_included)


def _matrix(x) -> np.ndarray:
    x = np.asarray(getattr(x, "values", x), dtype=float)
    return x[None, :] if x.ndim == 1 else x


def _with_bias(m: np.ndarray) -> np.ndarray:
    return np.vstack((m, np.ones((1, m.shape[1]))))


def default_lambda(m: np.ndarray) -> float:
    """Scale-free regularization ``1e-6 * trace(M M^T) / N``."""
    m = _matrix(m)
    return 1e-6 * float(np.sum(m * m)) / m.shape[0]


def ridge_train(states, teacher, lam: Optional[float] = None, *, bias: bool = False) -> ReadoutWeights:
    """Solve ``(M M^T + lam I) W^T = M T^T`` by Cholesky factorization.

    Args:
        states: ``N x Q`` feature matrix (array or :class:`StateMatrix`).
        teacher: ``K x Q`` targets (array or :class:`TeacherMatrix`).
        lam: ridge constant; ``None`` picks :func:`default_lambda`.
        bias: append a constant-one feature row.

    Raises:
        RankError: ``lam == 0`` and ``M M^T`` is numerically singular.
    """
    m = _matrix(states)
    t = _matrix(teacher)
    if m.shape[1] != t.shape[1]:
        raise ContractError(f"states have {m.shape[1]} columns, teacher {t.shape[1]}")
    if m.shape[1] < 1:
        raise ContractError("need at least one training sample")
    if bias:
        m = _with_bias(m)
    lam = default_lambda(m) if lam is None else float(lam)
    if not lam >= 0:
        raise ParameterError("lambda must be >= 0")
    gram = m @ m.T
    if lam > 0:
        gram[np.diag_indices_from(gram)] += lam
    elif np.linalg.cond(gram) > SINGULAR_CONDITION:
        raise RankError("M M^T is singular at lambda = 0; use a positive lambda")
    rhs = m @ t.T
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=True)
        w_t = scipy.linalg.cho_solve(factor, rhs)
    except np.linalg.LinAlgError as exc:
        raise RankError(f"ridge normal equations are not positive definite: {exc}") from None
    return ReadoutWeights(w_t.T, lam, bias)


def predict(readout: ReadoutWeights, states, *, decode: bool = False) -> np.ndarray:
    """``W_out @ x`` per column; ``decode=True`` returns argmax class labels (ties -> lowest)."""
    m = _matrix(states)
    if m.shape[0] != readout.n_features:
        raise ContractError(f"readout expects {readout.n_features} features, got {m.shape[0]}")
    if readout.bias_included:
        m = _with_bias(m)
    y = readout.weights @ m
    return np.argmax(y, axis=0) if decode else y


def nmse(y, target) -> float:
    """Mean squared error over the (population) variance of ``target``."""
    y = np.asarray(y, dtype=float).ravel()
    target = np.asarray(target, dtype=float).ravel()
    if y.size != target.size or y.size < 2:
        raise MetricError("nmse needs two sequences of equal length >= 2")
    var = float(np.var(target))
    if not var > 0:
        raise MetricError("target variance is zero")
    return float(np.mean((y - target) ** 2) / var)


def error_rate(predicted, true) -> float:
    """Fraction of mismatched labels."""
    predicted = np.asarray(predicted).ravel()
    true = np.asarray(true).ravel()
    if predicted.size == 0 or predicted.size != true.size:
        raise ContractError("error_rate needs two non-empty sequences of equal length")
    return float(np.mean(predicted != true))


def ser(predicted, true) -> float:
    """Symbol error rate."""
    return error_rate(predicted, true)


def kfold_slices(n: int, folds: int) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Contiguous cross-validation folds: yields ``(train_idx, test_idx)``.

    Each index is in exactly one test block.
    """
    if folds < 2 or folds > n:
        raise ParameterError(f"folds must lie in [2, {n}]")
    bounds = np.linspace(0, n, folds + 1).round().astype(int)
    idx = np.arange(n)
    for a, b in zip(bounds[:-1], bounds[1:]):
        yield np.concatenate((idx[:a], idx[b:])), idx[a:b]


def squared_correlation(a, b) -> float:
    """Squared Pearson correlation clipped to [0, 1]; zero if either side is constant."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    a = a - a.mean()
    b = b - b.mean()
    den = float(np.dot(a, a) * np.dot(b, b))
    if den <= 0:
        return 0.0
    return float(min(max(np.dot(a, b) ** 2 / den, 0.0), 1.0))


@dataclass(frozen=True)
class ProbeSettings:
    n_train: int = 10_000
    n_test: int = 2_000
    max_lag: Optional[int] = None  # default: 2 * nodes per input step
    seed: int = 0
    lam: Optional[float] = None
    bias: bool = True


@dataclass(frozen=True)
class MemoryCapacity:
    linear: float
    quadratic: float
    cross: float
    per_lag_linear: np.ndarray
    per_lag_quadratic: np.ndarray
    per_lag_cross: np.ndarray

    @property
    def total(self) -> float:
        return self.linear + self.quadratic + self.cross

    def as_dict(self) -> dict:
        return {"mc_linear": self.linear, "mc_quadratic": self.quadratic,
                "mc_cross": self.cross, "mc_total": self.total}


def memory_capacity(config, probe: ProbeSettings = ProbeSettings()) -> MemoryCapacity:
    """Linear, quadratic and cross memory capacity of a reservoir.

    For every lag ``d = 0..max_lag`` a readout is trained (on the first
    ``n_train`` retained steps) towards ``u(n-d)``, the centred square
    ``u(n-d)^2 - E[u^2]`` and the adjacent product ``u(n-d) u(n-d-1)``; each
    capacity is the squared correlation between prediction and target on the
    following ``n_test`` steps.

    Raises:
        StatisticsError: fewer than ``10 N`` training samples.
    """
    from .reservoir import run

    n = config.nodes_per_step
    max_lag = 2 * n if probe.max_lag is None else int(probe.max_lag)
    if max_lag < 0 or max_lag > 2 * n:
        raise ParameterError(f"max_lag must lie in [0, {2 * n}]")
    if probe.n_train < 10 * n or probe.n_test < 2:
        raise StatisticsError(f"need at least {10 * n} training samples for {n} nodes")
    washout = config.washout_steps
    q = probe.n_train + probe.n_test
    total = washout + max_lag + 1 + q
    u = mc_probe(max(total, 1000), probe.seed).inputs[0][:total]
    states = run(config, u).values[:, max_lag + 1 :]
    n_idx = washout + max_lag + 1 + np.arange(q)  # input index of each retained column

    lags = np.arange(max_lag + 1)
    lin = u[n_idx[None, :] - lags[:, None]]
    prev = u[n_idx[None, :] - lags[:, None] - 1]
    quad = lin ** 2 - np.mean(u ** 2)
    cross = lin * prev
    targets = np.vstack((lin, quad, cross))

    tr, te = slice(0, probe.n_train), slice(probe.n_train, q)
    readout = ridge_train(states[:, tr], targets[:, tr], probe.lam, bias=probe.bias)
    pred = predict(readout, states[:, te])
    caps = np.array([squared_correlation(pred[i], targets[i, te]) for i in range(targets.shape[0])])
    k = lags.size
    per_lin, per_quad, per_cross = caps[:k], caps[k : 2 * k], caps[2 * k :]
    return MemoryCapacity(float(per_lin.sum()), float(per_quad.sum()), float(per_cross.sum()),
                          per_lin, per_quad, per_cross)
