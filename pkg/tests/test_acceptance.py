"""Benchmark-level acceptance checks; each test prints one PASS/FAIL line.

Set ``DELAYRC_SANTA_FE`` to a one-sample-per-line Santa Fe laser file to
enable the Santa Fe check; without it that check is skipped and the bundled
chaotic surrogate runs as a smoke test.
"""

import itertools
import math
import os
import textwrap
import time
from pathlib import Path

import numpy as np
import pytest

from delayrc.cli import main
from delayrc.dde import SystemParams, steady_state
from delayrc.experiment import evaluate_task
from delayrc.reservoir import make_config, make_mask, masked_inputs
from delayrc.tasks import channel_eq, narma10, santa_fe_load, santa_fe_surrogate
from delayrc.training import ProbeSettings, memory_capacity, ridge_train
from delayrc.virtual import NodeGrid, equivalence_check

SANTA_FE_ENV = "DELAYRC_SANTA_FE"


@pytest.fixture
def report(capsys):
    def emit(number, title, passed, detail):
        status = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        with capsys.disabled():
            print(f"\ncriterion {number} ({title}): {status}  {detail}")
    return emit


def test_c1_narma10(report):
    start = time.perf_counter()
    ds = narma10(5200, 3)
    grid = itertools.product([0.5, 0.8, 0.95], [0.25 * math.pi, 0.4 * math.pi, 0.5 * math.pi], [0.2, 0.5, 1.0])
    results = []
    for beta, phi0, rho in grid:
        cfg = make_config(50, desync=1, beta=beta, phi0=phi0, rho=rho, mode="map", washout=200)
        results.append((evaluate_task(cfg, ds, train_fraction=0.8)["nmse"], beta, phi0, rho))
    best, beta, phi0, rho = min(results)
    # Re-run the winning point through the continuous integrator (node duration 10 T_R).
    cfg = make_config(50, desync=1, beta=beta, phi0=phi0, rho=rho, mode="dde", node_duration=10.0, washout=200)
    continuous = evaluate_task(cfg, ds, train_fraction=0.8)["nmse"]
    elapsed = time.perf_counter() - start
    passed = best <= 0.25 and continuous <= 0.25 and elapsed <= 120
    report(1, "NARMA10", passed,
           f"best map NMSE={best:.4f} at beta={beta}, phi0={phi0 / math.pi:.2f}pi, rho={rho}; "
           f"continuous NMSE={continuous:.4f}; {elapsed:.1f}s (accept <= 0.25, <= 120s)")
    assert passed


def _operating_phase(cfg):
    p = cfg.params
    return p.loop_gain * p.mu * steady_state(p) + p.phi0


def _distance(theta, offset):
    # Distance from theta to the nearest point offset + m*pi/2.
    r = (theta - offset) % (math.pi / 2)
    return min(r, math.pi / 2 - r)


def test_c2_memory_capacity(report):
    n = 50
    near = math.pi / 16
    inflection, extremum, totals = [], [], []
    for beta, phi0, rho in itertools.product([0.6, 0.8, 1.0], [i * math.pi / 8 for i in range(5)], [0.02, 0.1]):
        cfg = make_config(n, desync=1, beta=beta, phi0=phi0, rho=rho, mode="map", washout=300)
        mc = memory_capacity(cfg, ProbeSettings())
        totals.append(mc.total)
        theta = _operating_phase(cfg)
        if _distance(theta, math.pi / 4) <= near:
            inflection.append(mc)
        elif _distance(theta, 0.0) <= near:
            extremum.append(mc)
    best = max(inflection, key=lambda m: m.total)
    lin_infl = max(m.linear for m in inflection)
    lin_ext = max(m.linear for m in extremum)
    passed = (25 <= best.total <= 51 and max(totals) <= n + 1 and lin_infl >= 1.1 * lin_ext)
    report(2, "memory capacity", passed,
           f"total={best.total:.2f} (linear {best.linear:.2f}, quadratic {best.quadratic:.2f}, "
           f"cross {best.cross:.2f}); max total over grid={max(totals):.2f} <= {n + 1}; "
           f"linear MC inflection {lin_infl:.2f} vs extremum {lin_ext:.2f}")
    assert passed


def test_c3_channel_equalization(report):
    start = time.perf_counter()
    ds = channel_eq(120_200, 28.0, 5)
    frac = 20_000 / 120_000  # 20 000 training and 100 000 test symbols after the washout
    results = []
    for beta, phi0, rho in itertools.product([0.4, 0.6, 0.8], [1.5, 1.65, 1.8], [0.03, 0.05, 0.1]):
        cfg = make_config(50, desync=1, beta=beta, phi0=phi0, rho=rho, mode="map", washout=200)
        results.append((evaluate_task(cfg, ds, train_fraction=frac)["ser"], beta, phi0, rho))
    best, beta, phi0, rho = min(results)
    cfg = make_config(50, desync=1, beta=beta, phi0=phi0, rho=rho, mode="map", washout=200)
    clean = channel_eq(120_200, math.inf, 5, distortion=None)
    sanity = evaluate_task(cfg, clean, train_fraction=frac)["ser"]
    elapsed = time.perf_counter() - start
    passed = best <= 1e-3 and sanity == 0.0 and elapsed <= 300
    report(3, "channel equalization", passed,
           f"best SER={best:.2e} at beta={beta}, phi0={phi0}, rho={rho} on 1e5 test symbols; "
           f"linear noiseless SER={sanity}; {elapsed:.1f}s (accept <= 1e-3 and 0, <= 300s)")
    assert passed


def _santa_fe_grid(ds, n_nodes):
    results = []
    axes = ([0.2, 0.4, 0.6, 0.8], [0.1 * math.pi, 0.25 * math.pi, 0.4 * math.pi], [0.1, 0.3, 0.6])
    for beta, phi0, rho in itertools.product(*axes):
        cfg = make_config(n_nodes, desync=1, beta=beta, phi0=phi0, rho=rho, mode="map", washout=100)
        results.append((evaluate_task(cfg, ds)["nmse"], beta, phi0))
    return min(results)


def test_c4_santa_fe_surrogate_smoke(report):
    ds = santa_fe_surrogate(2000, 0)
    best, beta, phi0 = _santa_fe_grid(ds, 50)
    with_file = bool(os.environ.get(SANTA_FE_ENV))
    report("4 smoke", "Santa Fe surrogate, not the criterion", bool(np.isfinite(best) and best < 1),
           f"non-canonical surrogate NMSE={best:.4f} (smoke only{'' if with_file else '; canonical file absent'})")
    assert np.isfinite(best) and best < 1


def test_c4_santa_fe(report):
    path = os.environ.get(SANTA_FE_ENV)
    if not path or not Path(path).is_file():
        report(4, "Santa Fe", "SKIP", f"set {SANTA_FE_ENV} to the laser data file")
        pytest.skip(f"{SANTA_FE_ENV} not set; canonical Santa Fe data is user-supplied")
    ds = santa_fe_load(path)
    best, beta, phi0 = _santa_fe_grid(ds, 400)
    passed = best <= 0.15
    report(4, "Santa Fe", passed, f"best NMSE={best:.4f} at beta={beta}, phi0={phi0 / math.pi:.2f}pi (accept <= 0.15)")
    assert passed


def test_c5_equivalence(report):
    start = time.perf_counter()
    n, steps, washout = 50, 60, 5
    grid = NodeGrid(n, 100.0, desync=1)
    params = SystemParams(1.0, (grid.principal_tap(0.4),), rho=0.5, phi0=0.2 * math.pi)
    drive = masked_inputs(narma10(200, 0).inputs[:, :steps], make_mask("binary", 0, n))
    err, rk4, _ = equivalence_check(params, grid, drive, steps, washout=washout, return_states=True)
    step = 1.0 / 16
    _, euler, _ = equivalence_check(params, grid, drive, steps, washout=washout, step=step / 2,
                                    scheme="euler", return_states=True)
    schemes = float(np.max(np.abs(euler[:, washout:] - rk4[:, washout:])))
    elapsed = time.perf_counter() - start
    passed = err <= 1e-3 and schemes <= 1e-4 and elapsed <= 60
    report(5, "DDE vs discrete map", passed,
           f"max node deviation={err:.2e} (<= 1e-3); Euler(step/2) vs RK4={schemes:.2e} (<= 1e-4); {elapsed:.1f}s")
    assert passed


def test_c6_ridge_oracle(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        n, q, k = int(rng.integers(1, 21)), int(rng.integers(1, 51)), int(rng.integers(1, 4))
        m, t = rng.standard_normal((n, q)), rng.standard_normal((k, q))
        lam = 10 ** rng.uniform(-6, 0)
        w = ridge_train(m, t, lam).weights
        a = np.vstack((m.T, math.sqrt(lam) * np.eye(n)))
        b = np.vstack((t.T, np.zeros((n, k))))
        oracle = (np.linalg.pinv(a) @ b).T
        worst = max(worst, np.linalg.norm(w - oracle) / np.linalg.norm(oracle))
    passed = worst <= 1e-8
    report(6, "ridge oracle", passed, f"worst relative error over 200 instances={worst:.2e} (<= 1e-8)")
    assert passed


def test_c7_elm_memory(report):
    cfg = make_config(50, mode="elm", phi0=0.25 * math.pi, rho=0.5)
    mc = memory_capacity(cfg, ProbeSettings())
    worst = float(np.max(mc.per_lag_linear[2:]))
    passed = worst <= 0.05
    report(7, "ELM memory collapse", passed,
           f"max linear MC over lags >= 2: {worst:.4f} (<= 0.05); lag 0: {mc.per_lag_linear[0]:.3f}")
    assert passed


def test_c8_determinism(tmp_path, report):
    cfg = tmp_path / "det.yaml"
    cfg.write_text(textwrap.dedent("""
        master_seed: 11
        reservoir: {engine: map, n_nodes: 20, rho: 0.5}
        task: {name: narma10, length: 1500}
        training: {washout_steps: 100}
        sweep:
          beta: [0.4, 0.7, 0.9]
          phi0_rad: [0.1*pi, 0.3*pi, 0.5*pi]
          rho: [0.3, 0.6]
    """))
    threads = max(4, os.cpu_count() or 1)
    codes = [main(["sweep", str(cfg), "--out", str(tmp_path / "serial"), "--threads", "1"]),
             main(["sweep", str(cfg), "--out", str(tmp_path / "again"), "--threads", "1"]),
             main(["sweep", str(cfg), "--out", str(tmp_path / "parallel"), "--threads", str(threads)])]
    bodies = [(tmp_path / d / "det.csv").read_bytes() for d in ("serial", "again", "parallel")]
    passed = codes == [0, 0, 0] and bodies[0] == bodies[1] == bodies[2]
    report(8, "determinism", passed,
           f"18-point sweep, serial x2 and {threads} workers: byte-identical={bodies[0] == bodies[1] == bodies[2]}")
    assert passed
