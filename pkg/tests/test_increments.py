import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from khmlab.grid import ConfigurationError, Grid, PreconditionError, VectorField, random_field
from khmlab.increments import (
    DirectionQuadrature,
    SeparationScan,
    ShellCsvWriter,
    ShellRecord,
    increment,
    project_longitudinal,
    project_transverse,
    shell_average,
)

unit = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1).map(lambda v: np.array(v) / np.linalg.norm(v))


def test_increment_of_single_mode():
    g = Grid(16)
    f = VectorField.from_function(g, lambda x, y, z: (np.sin(x), 0 * x, 0 * x))
    lam = 0.3
    d = increment(f, (lam, 0, 0))
    x = g.coordinates()[0]
    assert np.max(np.abs(d.data[0] - (np.sin(x + lam) - np.sin(x)))) <= 1e-13


def test_constant_increment_is_zero():
    g = Grid(8)
    f = VectorField(g, np.full((3,) + g.shape, 2.0))
    assert increment(f, (0.4, -1.0, 2.0)).max_norm() <= 1e-14


@given(unit, st.integers(0, 1000))
def test_projections_split(n, seed):
    g = Grid(8)
    f = random_field(g, 2, np.random.default_rng(seed), solenoidal=False)
    L, T = project_longitudinal(f, n), project_transverse(f, n)
    assert (L + T - f).max_norm() <= 1e-13 * f.max_norm()
    ortho = np.einsum("i...,i...->...", L.data, T.data)
    assert np.max(np.abs(ortho)) <= 1e-12 * f.max_norm() ** 2


def test_projection_needs_unit_vector():
    g = Grid(8)
    with pytest.raises(PreconditionError):
        project_longitudinal(VectorField.zeros(g), np.array([1.0, 1.0, 0.0]))


@pytest.mark.parametrize("quad", [DirectionQuadrature.fibonacci(256), DirectionQuadrature.octahedron(), DirectionQuadrature.icosahedron(), DirectionQuadrature.gauss_product(4)])
def test_isotropic_second_moment(quad):
    assert quad.isotropy_error() <= 1e-14
    assert np.sum(quad.weights) == pytest.approx(1.0)
    assert np.allclose(np.linalg.norm(quad.directions, axis=1), 1.0)
    # odd moments vanish on an antipodal set
    assert np.max(np.abs(quad.weights @ quad.directions)) <= 1e-15


def test_raw_fibonacci_is_not_isotropic():
    assert DirectionQuadrature.fibonacci(256, isotropize=False).isotropy_error() > 1e-4


def test_gauss_product_is_exact_for_quartics():
    q = DirectionQuadrature.gauss_product(4)
    z = q.directions[:, 2]
    assert q.weights @ z**4 == pytest.approx(1 / 5, abs=1e-15)
    assert q.weights @ (q.directions[:, 0] ** 2 * z**2) == pytest.approx(1 / 15, abs=1e-15)


def test_half_rule():
    q = DirectionQuadrature.fibonacci(64)
    h = q.half()
    assert len(h) == 32
    with pytest.raises(PreconditionError):
        h.half()


@pytest.mark.parametrize("count", [0, 4, 7])
def test_bad_fibonacci_counts(count):
    with pytest.raises(ConfigurationError):
        DirectionQuadrature.fibonacci(count)


def test_antipodal_storage_is_checked():
    with pytest.raises(ConfigurationError):
        DirectionQuadrature(np.eye(3).tolist() * 2, np.ones(6), antipodal=True)


def test_separation_scan():
    s = SeparationScan.geometric(0.05, 1.0, 6)
    keep, drop = s.split(Grid(32))
    assert all(x >= 2 * np.pi / 32 for x in keep) and all(x < 2 * np.pi / 32 for x in drop)
    for bad in [(), (0.2, 0.1), (0.0, 1.0), (0.1, 2.0)]:
        with pytest.raises(ConfigurationError):
            SeparationScan(bad)


def test_shell_average_linear_and_unresolvable():
    g = Grid(16)
    q = DirectionQuadrature.fibonacci(32)
    one = shell_average(lambda n, ell: 1.0, 0.5, q, g)
    assert one == pytest.approx(2.0)
    two = shell_average(lambda n, ell: 2.0 * n[0] ** 2, 0.5, q, g, even=True)
    assert two == pytest.approx(2.0 * (1 / 3) / 0.5)
    with pytest.raises(ConfigurationError):
        shell_average(lambda n, ell: 1.0, 0.1, q, g)


def test_shell_average_single_mode_oracle():
    # <(n.delta f)^2> for f = (sin x, 0, 0): mean_x (sin(x+l n_x)-sin x)^2 = 1 - cos(l n_x)
    g = Grid(16)
    f = VectorField.from_function(g, lambda x, y, z: (np.sin(x), 0 * x, 0 * x))
    q = DirectionQuadrature.gauss_product(16)
    lam = 0.6

    def integrand(n, ell):
        return (n[0] * increment(f, ell).data[0]) ** 2

    got = shell_average(integrand, lam, q, g)
    from scipy import integrate

    want = integrate.quad(lambda mu: 0.5 * mu * mu * (1 - np.cos(lam * mu)), -1, 1)[0] / lam
    assert got == pytest.approx(want, rel=1e-10)


def test_csv_writer(tmp_path):
    p = tmp_path / "s.csv"
    with ShellCsvWriter(p) as w:
        w.write(ShellRecord(0.1, 32, np.float64(1.5), "S_ML"))
    assert p.read_text().splitlines() == ["lambda,direction_count,value,estimator_name", "0.1,32,1.5,S_ML"]
