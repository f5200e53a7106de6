"""Task evaluation and seed bookkeeping shared by the CLI and the benchmark tests."""

from __future__ import annotations

import hashlib
from typing import Dict, Optional

import numpy as np

from .errors import ParameterError
from .reservoir import ReservoirConfig, run
from .tasks import TaskDataset, decode_symbols
from .training import kfold_slices, nmse, predict, ridge_train, ser

#: Metric columns in the order they appear in result tables.
METRIC_NAMES = ("nmse", "ser", "error_rate", "mc_linear", "mc_quadratic", "mc_cross", "mc_total")


def derive_seed(master_seed: int, index) -> int:
    """Deterministic 63-bit seed for sub-task ``index`` of a run seeded with ``master_seed``."""
    digest = hashlib.sha256(f"{int(master_seed)}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _score(dataset: TaskDataset, pred: np.ndarray, target: np.ndarray) -> Dict[str, float]:
    if dataset.name == "channel_eq":
        symbols = dataset.meta.get("symbols")
        decided = decode_symbols(pred[0], symbols) if symbols else decode_symbols(pred[0])
        return {"ser": ser(decided, target[0])}
    return {"nmse": nmse(pred, target)}


def evaluate_task(config: ReservoirConfig, dataset: TaskDataset, *, lam: Optional[float] = None,
                  bias: bool = True, folds: Optional[int] = None,
                  train_fraction: Optional[float] = None) -> Dict[str, float]:
    """Run the reservoir on ``dataset``, fit a ridge readout and score held-out data.

    The first ``config.washout_steps + dataset.washout`` steps are dropped.
    With one fold the retained steps are split chronologically at
    ``train_fraction``; with more folds every contiguous block is the test set
    once and the metric is computed on the pooled out-of-fold predictions.

    Returns:
        ``{"nmse": ...}`` for regression tasks, ``{"ser": ...}`` for channel
        equalization.
    """
    folds = dataset.folds if folds is None else int(folds)
    frac = dataset.train_fraction if train_fraction is None else float(train_fraction)
    states = run(config, dataset.inputs).values
    target = dataset.targets[:, config.washout_steps:]
    states, target = states[:, dataset.washout:], target[:, dataset.washout:]
    q = target.shape[1]
    if folds == 1:
        n_train = int(round(frac * q))
        if not 0 < n_train < q:
            raise ParameterError(f"train split {n_train} of {q} retained steps leaves an empty side")
        readout = ridge_train(states[:, :n_train], target[:, :n_train], lam, bias=bias)
        return _score(dataset, predict(readout, states[:, n_train:]), target[:, n_train:])
    pred = np.empty_like(target)
    for tr, te in kfold_slices(q, folds):
        readout = ridge_train(states[:, tr], target[:, tr], lam, bias=bias)
        pred[:, te] = predict(readout, states[:, te])
    return _score(dataset, pred, target)
