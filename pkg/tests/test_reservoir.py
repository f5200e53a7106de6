import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delayrc.dde import steady_state
from delayrc.errors import ConfigurationError, ContractError, DivergenceError, ParameterError
from delayrc.reservoir import (DegenerateTapsWarning, InputMask, MaskKind, ReservoirConfig,
                               double_delay_config, make_config, make_mask, multiplex, run,
                               two_tone_value)
from delayrc.tasks import narma10
from delayrc.virtual import NodeGrid


# --- masks ---------------------------------------------------------------------

def test_binary_mask_deterministic_and_bipolar():
    a = make_mask("binary", 11, 4)
    b = make_mask("binary", 11, 4)
    assert np.array_equal(a.weights, b.weights)
    big = make_mask("binary", 11, 200)
    assert set(np.unique(big.weights)) == {-1.0, 1.0} and big.bipolar
    uni = make_mask("binary", 11, 200, bipolar=False)
    assert set(np.unique(uni.weights)) == {0.0, 1.0} and not uni.bipolar


def test_multilevel_mask_levels():
    m = make_mask("multilevel", 3, 300, levels=3)
    assert np.unique(m.weights).tolist() == [-1.0, 0.0, 1.0]
    for bad in (1, 7, None):
        with pytest.raises(ParameterError):
            make_mask("multilevel", 3, 10, levels=bad)


def test_uniform_mask_range():
    m = make_mask("uniform", 0, 500, 2)
    assert m.weights.shape == (500, 2)
    assert np.all(np.abs(m.weights) <= 1)


def test_two_tone_mask():
    assert two_tone_value(0.0, 3, 5) == pytest.approx(0.0, abs=1e-15)
    m = make_mask("two_tone_sin", 0, 50, tones=(3, 7))
    assert np.all((m.weights >= 0) & (m.weights <= 1))
    centres = (np.arange(50) + 0.5) / 50
    expected = 0.5 * (1 + np.sin(-0.25 * np.pi * np.cos(2 * np.pi * 3 * centres)
                                 - 0.25 * np.pi * np.cos(2 * np.pi * 7 * centres)))
    assert np.allclose(m.weights[:, 0], expected)
    with pytest.raises(ParameterError):
        make_mask("two_tone_sin", 0, 10, 2, tones=(1, 2))
    with pytest.raises(ParameterError):
        make_mask("two_tone_sin", 0, 10, tones=(2, 2))


@given(st.floats(-3, 3), st.integers(1, 9), st.integers(10, 19))
def test_two_tone_range(phase, p, q):
    assert 0.0 <= two_tone_value(phase, p, q) <= 1.0


# --- multiplex -----------------------------------------------------------------

def test_multiplex_examples():
    grid = NodeGrid(3, 1.0)
    mask = InputMask(np.array([[1.0], [0.0], [1.0]]), MaskKind.BINARY, 0)
    assert np.array_equal(multiplex(np.zeros(4), mask, grid).values, np.zeros(12))
    drive = multiplex(np.array([2.0]), mask, grid)
    assert drive.values.tolist() == [2.0, 0.0, 2.0]
    assert drive(0.5) == 2.0 and drive(1.5) == 0.0
    mask2 = InputMask(np.array([[0.5, 0.25]]), MaskKind.UNIFORM, 0)
    assert multiplex(np.array([[1.0], [-1.0]]), mask2, NodeGrid(1, 1.0)).values[0] == 0.25


def test_multiplex_dimension_mismatch():
    with pytest.raises(ContractError):
        multiplex(np.zeros((2, 5)), make_mask("binary", 0, 3), NodeGrid(3, 1.0))


@given(st.floats(0.1, 10.0))
def test_mask_scaling_identity(c):
    # Scaling W_in by c and rho by 1/c leaves rho * drive bit-identical when c is a power of two.
    c = 2.0 ** round(math.log2(c))
    mask = make_mask("uniform", 5, 6)
    grid = NodeGrid(6, 1.0)
    u = np.random.default_rng(0).uniform(-1, 1, 20)
    rho = 0.7
    a = rho * multiplex(u, mask, grid).values
    b = (rho / c) * multiplex(u, mask.scaled(c), grid).values
    assert np.array_equal(a, b)


# --- config invariants ---------------------------------------------------------

def test_config_rejects_elm_with_taps():
    cfg = make_config(10, mode="map")
    with pytest.raises(ConfigurationError):
        ReservoirConfig(cfg.params, cfg.grid, cfg.mask, mode="elm")
    assert make_config(10, mode="elm").params.taps == ()


def test_config_rejects_bad_edm_and_desync():
    with pytest.raises(ConfigurationError):
        make_config(10, edm_sublayers=3)
    with pytest.raises(ConfigurationError):
        make_config(10, desync=10)


def test_config_readout_desync_needs_continuous_engine():
    with pytest.raises(ConfigurationError):
        make_config(10, mode="map", readout_desync=0.01)


def test_default_washout():
    cfg = make_config(50, desync=1)
    assert cfg.washout_steps == max(100, math.ceil(10 * 51 / 50))
    assert make_config(20, edm_sublayers=20).washout_steps == 210


# --- run -----------------------------------------------------------------------

def test_elm_linear_identity():
    cfg = make_config(6, mode="elm", nonlinearity="linear", rho=1.0, phi0=0.0, mask_kind="uniform",
                      washout=0)
    u = np.random.default_rng(1).uniform(-1, 1, 15)
    states = run(cfg, u)
    assert np.allclose(states.values, cfg.mask.weights @ u[None, :])


def test_map_matches_continuous_in_instantaneous_regime():
    u = narma10(300, 2).inputs[0][:40]
    common = dict(desync=1, beta=0.4, phi0=0.2 * math.pi, rho=0.5, node_duration=100.0, washout=5)
    dde = run(make_config(20, mode="dde", **common), u)
    dmap = run(make_config(20, mode="map", **common), u)
    assert np.max(np.abs(dde.values - dmap.values)) <= 1e-3


def test_constant_input_reaches_fixed_point():
    cfg = make_config(50, desync=1, beta=0.5, phi0=0.3, rho=0.5, mode="dde", node_duration=0.2)
    states = run(cfg, np.zeros(cfg.washout_steps + 20))
    assert np.max(np.abs(np.diff(states.values, axis=1))) <= 1e-9
    assert np.allclose(states.values, steady_state(cfg.params), atol=1e-9)


def test_washout_sufficiency():
    u = np.random.default_rng(3).uniform(0, 0.5, 400)
    base = make_config(20, desync=1, beta=0.5, phi0=0.4, rho=0.5, mode="map", washout=100)
    longer = make_config(20, desync=1, beta=0.5, phi0=0.4, rho=0.5, mode="map", washout=200)
    a = run(base, u).values[:, 100:]
    b = run(longer, u).values
    assert np.max(np.abs(a - b)) <= 1e-6


@pytest.mark.parametrize("mode", ["map", "dde"])
def test_consistency_independent_of_initial_history(mode):
    u = np.random.default_rng(3).uniform(0, 0.5, 220)
    kw = dict(desync=1, beta=0.5, phi0=0.4, rho=0.5, mode=mode, node_duration=1.0, washout=100)
    cfg = make_config(20, **kw)
    a = run(cfg, u).values
    b = run(ReservoirConfig(**{**cfg.__dict__, "initial_history": 0.9}), u).values
    assert np.max(np.abs(a - b)) <= 1e-6


def test_run_deterministic():
    u = np.random.default_rng(5).uniform(0, 0.5, 150)
    cfg = make_config(12, mode="dde", node_duration=0.5, beta=0.6, phi0=0.3, washout=20)
    assert np.array_equal(run(cfg, u).values, run(cfg, u).values)


def test_run_needs_more_inputs_than_washout():
    with pytest.raises(ContractError):
        run(make_config(10, washout=50), np.zeros(50))
    assert run(make_config(10, washout=50), np.zeros(50), keep_washout=True).shape == (10, 50)


def test_edm_mixing():
    n_sub, steps = 3, 30
    cfg = make_config(12, desync=0, beta=0.8, phi0=0.4, rho=0.5, mode="map", edm_sublayers=n_sub,
                      washout=0)
    assert cfg.nodes_per_step == 4
    u = np.random.default_rng(7).uniform(0, 0.5, steps)
    base = run(cfg, u).values
    n = 10
    bumped = u.copy()
    bumped[n] += 1e-3
    diff = np.abs(run(cfg, bumped).values - base).max(axis=0)
    assert diff[n] > 0
    assert diff[n + 1] == 0 and diff[n + 2] == 0
    assert diff[n + n_sub] > 0
    assert np.all(diff[:n] == 0)


def test_readout_desync_reads_past_period():
    u = np.random.default_rng(5).uniform(0, 0.5, 30)
    kw = dict(mode="dde", node_duration=1.0, beta=0.5, phi0=0.3, washout=5)
    plain = run(make_config(8, **kw), u).values
    shifted = run(make_config(8, readout_desync=0.25, **kw), u).values
    assert plain.shape == shifted.shape
    assert not np.allclose(plain, shifted)


def test_divergence_carries_input_index():
    cfg = make_config(10, mode="dde", nonlinearity="linear", beta=3.0, phi0=1.0, node_duration=1.0,
                      washout=0)
    with pytest.raises(DivergenceError) as info:
        run(cfg, np.zeros(200))
    assert info.value.input_index is not None and 0 <= info.value.input_index < 200


# --- double delay --------------------------------------------------------------

def test_double_delay_examples():
    taps = double_delay_config(1.0, 0.5, 0.8)
    assert taps[1].delay == 2.0
    assert taps[0].gain == taps[1].gain == 0.4
    grid = NodeGrid(49, 0.02, desync=1)
    assert double_delay_config(grid.delay, 10.0, 0.8)[0].delay == grid.mask_duration + grid.node_duration


def test_double_delay_degenerate_warns():
    with pytest.warns(DegenerateTapsWarning):
        taps = double_delay_config(1.0, 1e15, 0.8)
    assert taps[0].delay == pytest.approx(taps[1].delay)
    with pytest.raises(ParameterError):
        double_delay_config(1.0, 0.0, 0.8)


def test_double_delay_runs_in_map_engine():
    cfg = make_config(10, desync=1, beta=0.6, mode="map", node_duration=1.0, washout=10)
    taps = double_delay_config(cfg.grid.delay, 0.25, 0.6)
    params = cfg.params.__class__(**{**cfg.params.__dict__, "taps": tuple(taps)})
    cfg2 = ReservoirConfig(params, cfg.grid, cfg.mask, mode="map", washout=10)
    states = run(cfg2, np.random.default_rng(0).uniform(0, 0.5, 40))
    assert states.shape == (10, 30)
