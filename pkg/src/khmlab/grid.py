"""Periodic-box fields and exact spectral operators on [0, 2*pi)^3.

Vector fields are stored as real arrays of shape ``(3, n, n, n)`` indexed
``[component, ix, iy, iz]``.  Spectra use the real-to-complex layout of
``scipy.fft.rfftn`` over the three spatial axes, shape ``(3, n, n, n//2 + 1)``.

Normalization: the forward transform divides by n^3, so a coefficient is the
Fourier amplitude itself; ``f(x) = sum_k c_k exp(i k.x)`` with integer k.

Band-limited means every coefficient with ``|k_i| = n/2`` (Nyquist) is zero.
Derivative operators and phase shifts drop Nyquist modes, which is exact for
band-limited input.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

AXES = (1, 2, 3)
BOX_LENGTH = 2.0 * np.pi

_fft_workers = 1


class ConfigurationError(ValueError):
    """Raised for invalid sizes, resolutions or parameters."""


class PreconditionError(ValueError):
    """Raised when an input violates an operation's documented precondition."""


def set_fft_workers(n: int) -> None:
    global _fft_workers
    _fft_workers = max(1, int(n))


@dataclass(frozen=True)
class Grid:
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or self.n % 2:
            raise ConfigurationError(f"n_per_axis must be an even integer >= 8, got {self.n!r}")

    @property
    def box_length(self) -> float:
        return BOX_LENGTH

    @property
    def spacing(self) -> float:
        return BOX_LENGTH / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable integer wavenumbers (kx, ky, kz) as floats."""
        return _wavenumbers(self.n)

    @property
    def k2(self) -> np.ndarray:
        return _k2(self.n)

    @property
    def nyquist_free(self) -> np.ndarray:
        """Boolean mask, False on any Nyquist plane."""
        return _nyquist_free(self.n)

    @property
    def dealias_mask(self) -> np.ndarray:
        return _dealias_mask(self.n)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.arange(self.n) * self.spacing
        return np.meshgrid(x, x, x, indexing="ij")


@lru_cache(maxsize=None)
def _wavenumbers(n: int):
    kf = np.fft.fftfreq(n, d=1.0 / n)
    kr = np.fft.rfftfreq(n, d=1.0 / n)
    kx = kf.reshape(n, 1, 1)
    ky = kf.reshape(1, n, 1)
    kz = kr.reshape(1, 1, n // 2 + 1)
    for a in (kx, ky, kz):
        a.flags.writeable = False
    return kx, ky, kz


@lru_cache(maxsize=None)
def _k2(n: int):
    kx, ky, kz = _wavenumbers(n)
    k2 = kx**2 + ky**2 + kz**2
    k2.flags.writeable = False
    return k2


@lru_cache(maxsize=None)
def _nyquist_free(n: int):
    kx, ky, kz = _wavenumbers(n)
    h = n // 2
    m = (np.abs(kx) < h) & (np.abs(ky) < h) & (np.abs(kz) < h)
    m.flags.writeable = False
    return m


@lru_cache(maxsize=None)
def _dealias_mask(n: int):
    kx, ky, kz = _wavenumbers(n)
    c = n / 3.0
    m = (np.abs(kx) <= c) & (np.abs(ky) <= c) & (np.abs(kz) <= c)
    m.flags.writeable = False
    return m


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class VectorField:
    """Three real components sampled on one periodic grid (read-only)."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != (3,) + self.grid.shape:
            raise ConfigurationError(
                f"field shape {data.shape} does not match grid {(3,) + self.grid.shape}"
            )
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((3,) + grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "VectorField":
        """Sample ``func(x, y, z) -> (fx, fy, fz)`` on the grid."""
        x, y, z = grid.coordinates()
        comps = [np.broadcast_to(np.asarray(c, dtype=float), grid.shape) for c in func(x, y, z)]
        return cls(grid, np.stack(comps))

    def _check(self, other: "VectorField"):
        if other.grid != self.grid:
            raise ConfigurationError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return VectorField(self.grid, self.data + other.data)

    def __sub__(self, other):
        self._check(other)
        return VectorField(self.grid, self.data - other.data)

    def __neg__(self):
        return VectorField(self.grid, -self.data)

    def __mul__(self, c: float):
        return VectorField(self.grid, self.data * float(c))

    __rmul__ = __mul__

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.data)))

    def mean(self) -> np.ndarray:
        return self.data.mean(axis=AXES)


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if c.shape != (3,) + self.grid.spectral_shape:
            raise ConfigurationError(
                f"spectrum shape {c.shape} does not match grid {(3,) + self.grid.spectral_shape}"
            )
        object.__setattr__(self, "coefficients", _frozen(c))


# --- raw array transforms -------------------------------------------------


def fft(a: np.ndarray) -> np.ndarray:
    """Forward transform of the trailing three axes, coefficients = amplitudes."""
    return sfft.rfftn(a, axes=tuple(range(a.ndim - 3, a.ndim)), norm="forward", workers=_fft_workers)


def ifft(c: np.ndarray, n: int) -> np.ndarray:
    return sfft.irfftn(
        c, s=(n, n, n), axes=tuple(range(c.ndim - 3, c.ndim)), norm="forward", workers=_fft_workers
    )


def transform(field: VectorField) -> SpectralField:
    return SpectralField(field.grid, fft(field.data))


def inverse_transform(spec: SpectralField) -> VectorField:
    return VectorField(spec.grid, ifft(spec.coefficients, spec.grid.n))


# --- spectral operators on raw coefficient arrays --------------------------


def ik(grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """i*k with Nyquist planes zeroed (odd derivatives of band-limited data)."""
    kx, ky, kz = grid.k
    m = grid.nyquist_free
    return 1j * kx * m, 1j * ky * m, 1j * kz * m


def curl_hat(c: np.ndarray, grid: Grid) -> np.ndarray:
    dx, dy, dz = ik(grid)
    return np.stack(
        [dy * c[2] - dz * c[1], dz * c[0] - dx * c[2], dx * c[1] - dy * c[0]]
    )


def div_hat(c: np.ndarray, grid: Grid) -> np.ndarray:
    dx, dy, dz = ik(grid)
    return dx * c[0] + dy * c[1] + dz * c[2]


def grad_hat(s: np.ndarray, grid: Grid) -> np.ndarray:
    dx, dy, dz = ik(grid)
    return np.stack([dx * s, dy * s, dz * s])


def inverse_curl_hat(c: np.ndarray, grid: Grid) -> np.ndarray:
    """(i k x c) / |k|^2 with the k = 0 mode set to zero."""
    k2 = grid.k2.copy()
    k2[0, 0, 0] = 1.0
    out = curl_hat(c, grid) / k2
    out[:, 0, 0, 0] = 0.0
    return out


def project_hat(c: np.ndarray, grid: Grid) -> np.ndarray:
    """Leray projection c - k (k.c)/|k|^2."""
    kx, ky, kz = grid.k
    k2 = grid.k2.copy()
    k2[0, 0, 0] = 1.0
    kdotc = (kx * c[0] + ky * c[1] + kz * c[2]) / k2
    return np.stack([c[0] - kx * kdotc, c[1] - ky * kdotc, c[2] - kz * kdotc])


def shift_hat(c: np.ndarray, grid: Grid, ell) -> np.ndarray:
    """Coefficients of f(x + ell) for band-limited f (exact phase shift)."""
    kx, ky, kz = grid.k
    ex = np.exp(1j * kx * ell[0])
    ey = np.exp(1j * ky * ell[1])
    ez = np.exp(1j * kz * ell[2])
    return c * (ex * ey * ez * grid.nyquist_free)


# --- field-level operators -------------------------------------------------


def _spec(field: VectorField) -> np.ndarray:
    return fft(field.data)


def _back(c: np.ndarray, grid: Grid) -> VectorField:
    return VectorField(grid, ifft(c, grid.n))


def curl(field: VectorField) -> VectorField:
    return _back(curl_hat(_spec(field), field.grid), field.grid)


def divergence(field: VectorField) -> np.ndarray:
    return ifft(div_hat(_spec(field), field.grid), field.grid.n)


def gradient(scalar: np.ndarray, grid: Grid) -> VectorField:
    if scalar.shape != grid.shape:
        raise ConfigurationError(f"scalar shape {scalar.shape} does not match grid {grid.shape}")
    return _back(grad_hat(fft(scalar), grid), grid)


def gradient_tensor_norm2(field: VectorField) -> np.ndarray:
    """Pointwise sum_ij (d_i F_j)^2."""
    c = _spec(field)
    g = field.grid
    out = np.zeros(g.shape)
    for d in ik(g):
        out += np.sum(ifft(d * c, g.n) ** 2, axis=0)
    return out


def _relative(num: float, den: float) -> float:
    return num / den if den > 0 else num


def inverse_curl(field: VectorField, rtol: float = 1e-8) -> VectorField:
    """Mean-free, divergence-free vector potential A with curl A = field.

    Raises PreconditionError when the input has a mean or a divergence above
    ``rtol`` relative to its gradient scale.
    """
    g = field.grid
    c = _spec(field)
    scale = max(float(np.max(np.abs(c))), np.finfo(float).tiny)
    mean_norm = float(np.max(np.abs(c[:, 0, 0, 0])))
    if mean_norm > rtol * scale:
        raise PreconditionError(f"inverse_curl needs a mean-free field: |mean| = {mean_norm:.3e}")
    div_norm = float(np.max(np.abs(div_hat(c, g))))
    grad_scale = max(float(np.max(np.abs(c * np.sqrt(g.k2)))), np.finfo(float).tiny)
    if div_norm > rtol * grad_scale:
        raise PreconditionError(
            f"inverse_curl needs a solenoidal field: max|div| = {div_norm:.3e}"
        )
    return _back(inverse_curl_hat(c, g), g)


def leray_project(field: VectorField) -> VectorField:
    return _back(project_hat(_spec(field), field.grid), field.grid)


def dealias(spec: SpectralField) -> SpectralField:
    return SpectralField(spec.grid, spec.coefficients * spec.grid.dealias_mask)


def shift(field: VectorField, ell) -> VectorField:
    """The field translated so that the result at x is field(x + ell)."""
    return _back(shift_hat(_spec(field), field.grid, ell), field.grid)


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack(
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    )


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def divergence_residual(field: VectorField) -> float:
    """max|div F| / max|grad F|, both from the spectrum."""
    c = _spec(field)
    g = field.grid
    div = ifft(div_hat(c, g), g.n)
    grad = max(
        float(np.max(np.abs(ifft(d * c, g.n)))) for d in ik(g)
    )
    return _relative(float(np.max(np.abs(div))), grad)


def random_field(
    grid: Grid, kmax: float, rng: np.random.Generator, solenoidal: bool = True, amplitude: float = 1.0
) -> VectorField:
    """Random real field with modes 0 < |k| <= kmax, rms |F| = amplitude."""
    shape = (3,) + grid.spectral_shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    k2 = grid.k2
    c *= (k2 > 0) & (k2 <= kmax**2) & grid.nyquist_free
    if solenoidal:
        c = project_hat(c, grid)
    data = ifft(c, grid.n)
    rms = float(np.sqrt(np.mean(np.sum(data**2, axis=0))))
    if rms == 0.0:
        return VectorField(grid, data)
    return VectorField(grid, data * (amplitude / rms))


def random_scalar(grid: Grid, kmax: float, rng: np.random.Generator) -> np.ndarray:
    shape = grid.spectral_shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    k2 = grid.k2
    c *= (k2 > 0) & (k2 <= kmax**2) & grid.nyquist_free
    return ifft(c, grid.n)
