import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from khmlab.grid import ConfigurationError, Grid, VectorField, divergence_residual, random_field
from khmlab.solver import (
    BlowupError,
    CFLError,
    CFLLimits,
    SolverState,
    initial_state,
    invariants,
    potentials,
    rhs_emhd,
    rhs_hallmhd,
    run,
    step_rk4,
    vector_potential,
)


def test_abc_is_emhd_equilibrium():
    s = initial_state(Grid(16), "emhd", "abc")
    assert rhs_emhd(s.b, 1.0).max_norm() <= 1e-12
    res = run(s, 0.05, 0.01)
    assert res.ledger.drift("E") <= 1e-14
    assert (res.final.b - s.b).max_norm() <= 1e-13


def test_abc_hall_equilibrium():
    s = initial_state(Grid(16), "hallmhd", "abc")
    du, db = rhs_hallmhd(s.u, s.b, 1.0)
    assert du.max_norm() <= 1e-12 and db.max_norm() <= 1e-12


def test_linear_decay_rate():
    # single Beltrami mode: the Hall term vanishes, resistivity gives exp(-eta k^2 t)
    g = Grid(16)
    s = initial_state(g, "emhd", "abc", d_i=1.0, eta=0.05)
    res = run(s, 0.5, 0.01)
    assert res.final.b.max_norm() == pytest.approx(s.b.max_norm() * np.exp(-0.05 * 0.5), rel=1e-9)


@given(st.integers(0, 1000))
def test_rhs_conserves_quadratic_invariants(seed):
    # d/dt E and d/dt H_M vanish at the level of the dealiased right-hand side
    g = Grid(16)
    rng = np.random.default_rng(seed)
    b = random_field(g, 3, rng)
    db = rhs_emhd(b, 1.0)
    scale = np.mean(np.abs(db.data * b.data)) + 1e-300
    assert abs(np.mean(np.sum(db.data * b.data, axis=0))) <= 1e-12 * scale * 10
    A = vector_potential(b)
    assert abs(np.mean(np.sum(db.data * A.data, axis=0))) <= 1e-12 * np.mean(np.abs(db.data * A.data)) * 10


def test_short_run_conserves_and_preserves_divergence():
    s = initial_state(Grid(16), "hallmhd", "random_lowk", seed=4)
    res = run(s, 0.05, 1e-3, ledger_interval=0.01)
    for name in ("E", "H_M", "H_G"):
        assert res.ledger.drift(name) <= 1e-6
    assert divergence_residual(res.final.b) <= 1e-10
    assert divergence_residual(res.final.u) <= 1e-10


def test_cross_helicity_is_not_conserved():
    s = initial_state(Grid(16), "hallmhd", "random_lowk", seed=4)
    res = run(s, 0.1, 1e-3, ledger_interval=0.05)
    assert res.ledger.drift("H_C") > 100 * res.ledger.drift("H_G")


def test_dissipation_rate_matches_energy_decay():
    s = initial_state(Grid(16), "emhd", "random_lowk", seed=2, eta=0.02)
    dt = 1e-3
    res = run(s, 0.01, dt, ledger_interval=dt)
    E = np.array(res.ledger.E)
    dEdt = (E[2:] - E[:-2]) / (2 * dt)
    eps = np.array(res.ledger.eps_E)[1:-1]
    # inviscid Hall transfer leaves the energy alone: dE/dt = -eps
    assert np.max(np.abs(dEdt + eps)) <= 1e-5 * np.max(eps)


def test_cfl_and_blowup_errors():
    s = initial_state(Grid(16), "emhd", "random_lowk")
    with pytest.raises(CFLError):
        run(s, 1.0, 0.5)
    with pytest.raises(ConfigurationError):
        run(s, 0.0105, 0.01)
    bad = SolverState(0.0, VectorField(s.grid, np.full((3,) + s.grid.shape, np.nan)))
    with pytest.raises(BlowupError):
        step_rk4(bad, 1e-3)


def test_cfl_limits_scale():
    s = initial_state(Grid(32), "emhd", "random_lowk")
    lim = CFLLimits().max_dt(s)
    assert CFLLimits().max_dt(initial_state(Grid(32), "emhd", "random_lowk", amplitude=2.0)) == pytest.approx(lim / 2)


def test_state_validation():
    g = Grid(8)
    with pytest.raises(ConfigurationError):
        SolverState(0.0, VectorField.zeros(g), eta=-1.0)
    with pytest.raises(ConfigurationError):
        SolverState(0.0, VectorField.zeros(g), VectorField.zeros(Grid(10)))
    with pytest.raises(ConfigurationError):
        initial_state(g, "mhd", "abc")
    with pytest.raises(ConfigurationError):
        initial_state(g, "emhd", "vortex")


def test_ic_determinism_and_amplitude():
    a = initial_state(Grid(16), "hallmhd", "random_lowk", seed=7, amplitude=0.5)
    b = initial_state(Grid(16), "hallmhd", "random_lowk", seed=7, amplitude=0.5)
    assert np.array_equal(a.b.data, b.b.data) and np.array_equal(a.u.data, b.u.data)
    assert invariants(a)["E"] == pytest.approx(0.25)


def test_orszag_tang_is_solenoidal():
    s = initial_state(Grid(16), "hallmhd", "orszag_tang_3d")
    assert divergence_residual(s.b) <= 1e-12 and divergence_residual(s.u) <= 1e-12


def test_potentials_mean_free():
    s = initial_state(Grid(16), "hallmhd", "random_lowk", seed=3)
    p = potentials(s)
    assert abs(p["pi"].mean()) <= 1e-14 and abs(p["P"].mean()) <= 1e-14
