"""Radial mollifiers and the longitudinal/transverse smoothed fields.

A kernel profile ``phi`` is normalized so that 4*pi * int r^2 phi(r) dr = 1 and
rescaled as phi_eps(r) = eps^-3 phi(r/eps).  Two profiles are bundled:

* ``bump``: exp(-1/(1 - r^2)) on r < 1, smooth and compactly supported.
* ``gaussian``: (2*pi)^-1.5 exp(-r^2/2).  Not compactly supported; its
  Fourier multiplier is exp(-eps^2 k^2 / 2), which makes it a closed-form
  cross-check.

Smoothed fields are linear, translation invariant operators, so every one of
them is a Fourier multiplier.  The ``quadrature`` multipliers below are what a
direction x radius sum of phase-shifted copies of the field produces; the
``exact`` multipliers are the continuum values written with spherical Bessel
functions and serve as oracles.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate, special

from .grid import ConfigurationError, Grid, VectorField, fft, ifft, ik
from .increments import DirectionQuadrature

PROFILES = ("bump", "gaussian")
GAUSSIAN_CUTOFF = 9.0  # exp(-81/2) ~ 2.6e-18
EXACT_NODES = 256


def _bump_raw(rho):
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    m = rho < 1.0
    out[m] = np.exp(-1.0 / (1.0 - rho[m] ** 2))
    return out


def _bump_raw_deriv(rho):
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    m = rho < 1.0
    q = 1.0 - rho[m] ** 2
    out[m] = np.exp(-1.0 / q) * (-2.0 * rho[m] / q**2)
    return out


def _quad(f, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13, limit=400, **kw)
    return val


@lru_cache(maxsize=None)
def _bump_norm() -> float:
    return 1.0 / _quad(lambda r: 4.0 * np.pi * r * r * _bump_raw(r), 0.0, 1.0)


def gauss_legendre(nodes: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (b - a) * (x + 1.0) + a, 0.5 * (b - a) * w


def graded_rule(nodes: int, radius: float, grading: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes r = radius * t^grading with Gauss-Legendre t; clusters nodes near 0."""
    t, wt = gauss_legendre(nodes, 0.0, 1.0)
    return radius * t**grading, radius * grading * t ** (grading - 1.0) * wt


@dataclass(frozen=True)
class RadialKernel:
    profile: str = "bump"
    epsilon: float = 0.5

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigurationError(f"kernel.profile must be one of {PROFILES}, got {self.profile!r}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"kernel.epsilon must be positive, got {self.epsilon}")

    @property
    def support_radius(self) -> float:
        return 1.0 if self.profile == "bump" else np.inf

    @property
    def quadrature_radius(self) -> float:
        """Unit-scale radius beyond which the profile is numerically zero."""
        return 1.0 if self.profile == "bump" else GAUSSIAN_CUTOFF

    def with_epsilon(self, epsilon: float) -> "RadialKernel":
        return RadialKernel(self.profile, epsilon)

    # unit-scale profile
    def phi(self, rho):
        if self.profile == "bump":
            return _bump_norm() * _bump_raw(rho)
        rho = np.asarray(rho, dtype=float)
        return (2.0 * np.pi) ** -1.5 * np.exp(-0.5 * rho**2)

    def dphi(self, rho):
        if self.profile == "bump":
            return _bump_norm() * _bump_raw_deriv(rho)
        rho = np.asarray(rho, dtype=float)
        return -rho * self.phi(rho)

    # scaled profile
    def phi_eps(self, r):
        e = self.epsilon
        return self.phi(np.asarray(r) / e) / e**3

    def dphi_eps(self, r):
        e = self.epsilon
        return self.dphi(np.asarray(r) / e) / e**4

    def moment(self, power: int, derivative: bool = False) -> float:
        """4*pi * int_0^R r^power phi(r) dr (phi' if ``derivative``), unit scale."""
        f = self.dphi if derivative else self.phi
        return _quad(lambda r: 4.0 * np.pi * r**power * float(f(r)), 0.0, self.quadrature_radius)

    def radial_rule(self, nodes: int = 32) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes and weights on [0, R*eps]."""
        return gauss_legendre(nodes, 0.0, self.quadrature_radius * self.epsilon)

    def shell_weights(self, nodes: int = 32) -> tuple[np.ndarray, np.ndarray]:
        """Radii and masses 4*pi r^2 phi_eps(r) dr; the masses sum to ~1."""
        r, w = self.radial_rule(nodes)
        return r, 4.0 * np.pi * r * r * self.phi_eps(r) * w

    def multiplier(self, kmag) -> np.ndarray:
        """Continuum Fourier multiplier of phi_eps at wavenumber magnitudes."""
        kmag = np.asarray(kmag, dtype=float)
        if self.profile == "gaussian":
            return np.exp(-0.5 * (self.epsilon * kmag) ** 2)
        r, w = self.shell_weights(EXACT_NODES)
        return _radial_transform(kmag, r, w, lambda x: special.spherical_jn(0, x))

    def longitudinal_multiplier(self, kvec: np.ndarray) -> np.ndarray:
        """Continuum tensor multiplier of int phi_eps (n n) f(x + l) dl, shape (K, 3, 3)."""
        kvec = np.atleast_2d(np.asarray(kvec, dtype=float))
        kmag = np.linalg.norm(kvec, axis=1)
        r, w = self.shell_weights(EXACT_NODES)

        def iso(x):
            return np.where(x > 1e-8, _j1_over_x(x), 1.0 / 3.0 - x * x / 30.0)

        def aniso(x):
            # j0 - 3 j1 / x, ~ -x^2/15 for small x
            safe = np.where(x > 1e-3, x, 1.0)
            full = special.spherical_jn(0, safe) - 3.0 * special.spherical_jn(1, safe) / safe
            return np.where(x > 1e-3, full, -x * x / 15.0 + x**4 / 210.0)

        a = _radial_transform(kmag, r, w, iso)
        b = _radial_transform(kmag, r, w, aniso)
        khat = np.divide(kvec, kmag[:, None], out=np.zeros_like(kvec), where=kmag[:, None] > 0)
        return a[:, None, None] * np.eye(3) + b[:, None, None] * np.einsum("ki,kj->kij", khat, khat)


def _j1_over_x(x):
    safe = np.where(x > 1e-8, x, 1.0)
    return special.spherical_jn(1, safe) / safe


def _radial_transform(kmag, r, w, fn):
    out = np.empty(kmag.shape)
    uniq, inv = np.unique(kmag.ravel(), return_inverse=True)
    vals = fn(np.outer(uniq, r)) @ w
    out.ravel()[:] = vals[inv]
    return out


@dataclass(frozen=True)
class KernelSplit:
    """The transverse and longitudinal scalar profiles built from a kernel.

    phi_T(r) = 2 int_r^inf phi(s)/s ds and phi_L = phi - phi_T.  phi_T has a
    logarithmic singularity at r = 0, so radial integrals against it use a
    mesh graded towards the origin.
    """

    kernel: RadialKernel
    nodes: int = 64
    grading: float = 2.0

    def phi_T(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return np.vectorize(self._phi_T_scalar)(rho)

    def _phi_T_scalar(self, rho: float) -> float:
        big = self.kernel.quadrature_radius
        if rho >= big:
            return 0.0
        if rho <= 0.0:
            return np.inf
        # substitute s = exp(t): 2 int phi(e^t) dt over [log rho, log R]
        return 2.0 * _quad(lambda t: float(self.kernel.phi(np.exp(t))), np.log(rho), np.log(big))

    def phi_L(self, rho) -> np.ndarray:
        return self.kernel.phi(rho) - self.phi_T(rho)

    def dphi_L(self, rho) -> np.ndarray:
        """d(phi_L)/dr = phi' + 2 phi / r, from phi_T' = -2 phi / r."""
        rho = np.asarray(rho, dtype=float)
        return self.kernel.dphi(rho) + 2.0 * self.kernel.phi(rho) / rho

    @cached_property
    def _graded(self):
        r, w = graded_rule(self.nodes, self.kernel.quadrature_radius, self.grading)
        return r, w, self.phi_T(r)

    def mass(self, part: str) -> float:
        """4*pi int r^2 phi_X dr for X in {T, L}: 2/3 and 1/3 in the continuum."""
        r, w, pt = self._graded
        t = float(np.sum(4.0 * np.pi * r * r * pt * w))
        if part == "T":
            return t
        if part == "L":
            return self.kernel.moment(2) - t
        raise ConfigurationError(f"part must be 'L' or 'T', got {part!r}")

    def multiplier(self, kmag, part: str) -> np.ndarray:
        """Continuum multiplier of the scaled phi_X profile (graded-mesh quadrature)."""
        kmag = np.asarray(kmag, dtype=float)
        r, w, pt = self._graded
        e = self.kernel.epsilon
        # scaled profile eps^-3 phi_T(r/eps) integrated in unit-scale radius
        trans = _radial_transform(kmag * e, r, 4.0 * np.pi * r * r * pt * w, lambda x: special.spherical_jn(0, x))
        if part == "T":
            return trans
        if part == "L":
            return self.kernel.multiplier(kmag) - trans
        raise ConfigurationError(f"part must be 'L' or 'T', got {part!r}")


# --- quadrature multipliers ------------------------------------------------

_CHUNK = 256


def quadrature_multipliers(
    kvec: np.ndarray, kernel: RadialKernel, quad: DirectionQuadrature, radial_nodes: int = 32
) -> tuple[np.ndarray, np.ndarray]:
    """Multipliers of the direction x radius sums at wavevectors ``kvec`` (K, 3).

    Returns (plain (K,), longitudinal (K, 3, 3)), i.e. the discrete versions of
    int phi_eps e^{ik.l} dl and int phi_eps (n n) e^{ik.l} dl.
    """
    kvec = np.atleast_2d(np.asarray(kvec, dtype=float))
    r, mass = kernel.shell_weights(radial_nodes)
    n, w = quad.directions, quad.weights
    plain = np.empty(len(kvec), dtype=complex)
    lon = np.empty((len(kvec), 3, 3), dtype=complex)
    nn = np.einsum("q,qi,qj->qij", w, n, n).reshape(len(w), 9)
    for lo in range(0, len(kvec), _CHUNK):
        s = kvec[lo : lo + _CHUNK] @ n.T
        g = np.exp(1j * s[..., None] * r) @ mass
        plain[lo : lo + _CHUNK] = g @ w
        lon[lo : lo + _CHUNK] = (g @ nn).reshape(-1, 3, 3)
    return plain, lon


def check_resolvable(kernel: RadialKernel, grid: Grid) -> None:
    if kernel.epsilon < 2.0 * grid.spacing:
        raise ConfigurationError(
            f"kernel.epsilon = {kernel.epsilon} is below 2 * grid spacing = {2 * grid.spacing:.6g}"
        )


def _support(c: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(c)) if c.size else 0.0
    mag = np.max(np.abs(c.reshape(-1, *c.shape[-3:])), axis=0)
    return mag > 1e-300 if scale == 0 else mag > 1e-15 * scale


def _wavevectors(grid: Grid, mask: np.ndarray) -> np.ndarray:
    kx, ky, kz = (np.broadcast_to(a, grid.spectral_shape) for a in grid.k)
    return np.stack([kx[mask], ky[mask], kz[mask]], axis=1)


def _apply_tensor(field: VectorField, kernel, quad, radial_nodes, part: str) -> VectorField:
    g = field.grid
    check_resolvable(kernel, g)
    c = fft(field.data)
    mask = _support(c) & g.nyquist_free
    kv = _wavevectors(g, mask)
    plain, lon = quadrature_multipliers(kv, kernel, quad, radial_nodes)
    if part == "L":
        tensor = lon
    elif part == "T":
        tensor = plain[:, None, None] * np.eye(3) - lon
    else:
        tensor = plain[:, None, None] * np.eye(3)
    out = np.zeros_like(c)
    sel = c[:, mask]  # (3, K)
    out[:, mask] = np.einsum("kij,jk->ik", tensor, sel)
    return VectorField(g, ifft(out, g.n))


def smooth_longitudinal(field: VectorField, kernel: RadialKernel, quad: DirectionQuadrature, radial_nodes: int = 32) -> VectorField:
    """int phi_eps(l) (n n) F(x + l) d^3 l by direction x radius quadrature."""
    return _apply_tensor(field, kernel, quad, radial_nodes, "L")


def smooth_transverse(field: VectorField, kernel: RadialKernel, quad: DirectionQuadrature, radial_nodes: int = 32) -> VectorField:
    """int phi_eps(l) (1 - n n) F(x + l) d^3 l by direction x radius quadrature."""
    return _apply_tensor(field, kernel, quad, radial_nodes, "T")


def mollify(field: VectorField, kernel: RadialKernel, quad: DirectionQuadrature | None = None, radial_nodes: int = 32) -> VectorField:
    """Plain mollification; exact multiplier unless a direction set is given."""
    if quad is not None:
        return _apply_tensor(field, kernel, quad, radial_nodes, "plain")
    g = field.grid
    check_resolvable(kernel, g)
    m = kernel.multiplier(np.sqrt(g.k2))
    return VectorField(g, ifft(fft(field.data) * m * g.nyquist_free, g.n))


def mollify_scalar(scalar: np.ndarray, grid: Grid, kernel: RadialKernel, part: str = "full", split: KernelSplit | None = None) -> np.ndarray:
    """Convolution of a scalar with phi_eps (``full``) or with phi_L / phi_T."""
    check_resolvable(kernel, grid)
    kmag = np.sqrt(grid.k2)
    if part == "full":
        m = kernel.multiplier(kmag)
    else:
        split = split or KernelSplit(kernel)
        m = split.multiplier(kmag, part)
    return ifft(fft(scalar) * m * grid.nyquist_free, grid.n)


@dataclass
class PressureReport:
    lhs_norm: float
    rhs_norm: float
    residual: float
    direction_count: int
    radial_nodes: int


def verify_pressure_claim(
    pi: np.ndarray, grid: Grid, kernel: RadialKernel, quad: DirectionQuadrature, radial_nodes: int = 32, split: KernelSplit | None = None
) -> PressureReport:
    """Compare div of int phi_eps (n n) pi(x+l) dl with grad of pi convolved with phi_L.

    The left side uses the direction x radius quadrature, the right side the
    continuum phi_L multiplier.  Residual: max-norm difference relative to the
    larger max norm.
    """
    check_resolvable(kernel, grid)
    split = split or KernelSplit(kernel)
    c = fft(pi)
    mask = _support(c) & grid.nyquist_free
    kv = _wavevectors(grid, mask)
    _, lon = quadrature_multipliers(kv, kernel, quad, radial_nodes)
    lhs_hat = np.zeros((3,) + grid.spectral_shape, dtype=complex)
    lhs_hat[:, mask] = 1j * np.einsum("ki,kij->jk", kv, lon) * c[mask]
    phi_l = split.multiplier(np.sqrt(grid.k2), "L")
    rhs_hat = np.stack([d * phi_l * c for d in ik(grid)])
    lhs = ifft(lhs_hat, grid.n)
    rhs = ifft(rhs_hat, grid.n)
    ln, rn = float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs)))
    diff = float(np.max(np.abs(lhs - rhs)))
    scale = max(ln, rn)
    return PressureReport(ln, rn, diff / scale if scale > 0 else diff, len(quad), radial_nodes)


def projection_tensor(kernel: RadialKernel, quad: DirectionQuadrature, radial_nodes: int = 32) -> np.ndarray:
    """Quadrature value of int phi_eps(l) n n d^3l; the continuum value is I/3."""
    _, mass = kernel.shell_weights(radial_nodes)
    return float(np.sum(mass)) * quad.second_moment()
