import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from khmlab.grid import ConfigurationError, Grid, VectorField, random_scalar
from khmlab.increments import DirectionQuadrature
from khmlab.mollify import (
    KernelSplit,
    RadialKernel,
    check_resolvable,
    mollify,
    mollify_scalar,
    projection_tensor,
    quadrature_multipliers,
    smooth_longitudinal,
    smooth_transverse,
    verify_pressure_claim,
)


@pytest.mark.parametrize("profile", ["bump", "gaussian"])
def test_unit_mass_and_moment(profile):
    k = RadialKernel(profile)
    assert k.moment(2) == pytest.approx(1.0, abs=1e-12)
    assert k.moment(3, derivative=True) == pytest.approx(-3.0, abs=1e-12)


def test_bad_kernel():
    with pytest.raises(ConfigurationError):
        RadialKernel("tophat")
    with pytest.raises(ConfigurationError):
        RadialKernel("bump", 0.0)


@given(st.floats(0.2, 2.0))
def test_radial_rule_mass(eps):
    _, mass = RadialKernel("bump", eps).shell_weights(32)
    assert np.sum(mass) == pytest.approx(1.0, abs=1e-8)


def test_gaussian_closed_form_on_sine():
    g = Grid(32)
    eps = 0.5
    f = VectorField.from_function(g, lambda x, y, z: (np.sin(x), 0 * x, 0 * x))
    out = mollify(f, RadialKernel("gaussian", eps))
    assert np.max(np.abs(out.data[0] - np.exp(-(eps**2) / 2) * np.sin(g.coordinates()[0]))) <= 1e-12


def test_bump_multiplier_vs_direct_integral():
    k = RadialKernel("bump", 1.0)
    from scipy import integrate

    for km in (0.5, 2.0, 7.0):
        want = integrate.quad(lambda r: 4 * np.pi * r * r * k.phi(r) * special.spherical_jn(0, km * r), 0, 1, epsabs=1e-14)[0]
        assert k.multiplier(np.array([km]))[0] == pytest.approx(want, abs=1e-12)


def test_constant_field_is_fixed(grid16):
    f = VectorField(grid16, np.ones((3,) + grid16.shape))
    out = mollify(f, RadialKernel("bump", 1.0))
    assert (out - f).max_norm() <= 1e-13


def test_resolvability(grid16):
    with pytest.raises(ConfigurationError):
        check_resolvable(RadialKernel("bump", 0.1), grid16)


def test_split_masses():
    s = KernelSplit(RadialKernel("bump"))
    assert s.mass("T") == pytest.approx(2 / 3, abs=1e-10)
    assert s.mass("L") == pytest.approx(1 / 3, abs=1e-10)


def test_split_multiplier_oracle():
    # independent form: 8 pi int phi(s) s^2 j1(ks)/(ks) ds
    k = RadialKernel("bump", 1.0)
    s = KernelSplit(k)
    from scipy import integrate

    for km in (0.0, 1.0, 3.0, 6.0):
        if km == 0:
            want = 2 / 3
        else:
            want = integrate.quad(lambda r: 8 * np.pi * k.phi(r) * r * r * special.spherical_jn(1, km * r) / (km * r), 0, 1, epsabs=1e-14)[0]
        assert s.multiplier(np.array([km]), "T")[0] == pytest.approx(want, abs=1e-10)


def test_projection_identity_default_quadrature():
    t = projection_tensor(RadialKernel("bump", 0.5), DirectionQuadrature.fibonacci(256), 32)
    assert np.max(np.abs(t - np.eye(3) / 3)) <= 1e-6


def test_longitudinal_plus_transverse_is_plain(grid16, rng):
    from khmlab.grid import random_field

    f = random_field(grid16, 4, rng)
    k, q = RadialKernel("bump", 1.0), DirectionQuadrature.fibonacci(64)
    total = smooth_longitudinal(f, k, q) + smooth_transverse(f, k, q)
    assert (total - mollify(f, k, q)).max_norm() <= 1e-13


def test_longitudinal_mean_mode_is_one_third(grid16):
    f = VectorField(grid16, np.ones((3,) + grid16.shape))
    out = smooth_longitudinal(f, RadialKernel("bump", 1.0), DirectionQuadrature.fibonacci(64))
    assert np.max(np.abs(out.data - 1 / 3)) <= 1e-8


def test_quadrature_multiplier_converges_to_continuum():
    k = RadialKernel("bump", 0.5)
    kv = np.array([[1.0, 2.0, 0.0], [3.0, -1.0, 2.0]])
    plain, _ = quadrature_multipliers(kv, k, DirectionQuadrature.gauss_product(16), 32)
    assert np.max(np.abs(plain - k.multiplier(np.linalg.norm(kv, axis=1)))) <= 1e-8


def test_pressure_claim_converges():
    g = Grid(32)
    x = g.coordinates()[0]
    pi = np.sin(x)
    k = RadialKernel("bump", 0.5)
    res = [verify_pressure_claim(pi, g, k, DirectionQuadrature.fibonacci(m)).residual for m in (128, 256, 512)]
    assert res[2] <= 5e-3
    assert res[0] > res[1] > res[2]


def test_scalar_parts_add_up(grid16, rng):
    s = random_scalar(grid16, 4, rng)
    k = RadialKernel("bump", 1.0)
    split = KernelSplit(k)
    total = mollify_scalar(s, grid16, k, "L", split) + mollify_scalar(s, grid16, k, "T", split)
    assert np.max(np.abs(total - mollify_scalar(s, grid16, k))) <= 1e-12
