"""Two-point increments, longitudinal/transverse projections and shell averages.

Direction sets are stored as ``[H; -H]``: the first half is a hemisphere and
the second half its antipodes, with equal weights across each pair.  Space
averages of third-order increment products are even under n -> -n, so
estimators may evaluate only the hemisphere (``half()``) at half the cost.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .grid import (
    BOX_LENGTH,
    ConfigurationError,
    Grid,
    PreconditionError,
    VectorField,
    fft,
    ifft,
    shift_hat,
)

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True, eq=False)
class DirectionQuadrature:
    directions: np.ndarray
    weights: np.ndarray
    antipodal: bool = False
    name: str = "custom"

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float).reshape(-1, 3)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(d) != len(w) or len(d) == 0:
            raise ConfigurationError("directions and weights must be non-empty and of equal length")
        if np.any(w <= 0):
            raise ConfigurationError("weights must be positive")
        d = d / np.linalg.norm(d, axis=1)[:, None]
        w = w / w.sum()
        if self.antipodal:
            h = len(d) // 2
            if len(d) % 2 or not np.allclose(d[:h], -d[h:], atol=1e-14) or not np.allclose(
                w[:h], w[h:], rtol=1e-14
            ):
                raise ConfigurationError("antipodal set must be stored as [H; -H] with paired weights")
        d.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    def second_moment(self) -> np.ndarray:
        return np.einsum("q,qi,qj->ij", self.weights, self.directions, self.directions)

    def isotropy_error(self) -> float:
        return float(np.max(np.abs(self.second_moment() - np.eye(3) / 3.0)))

    def half(self) -> "DirectionQuadrature":
        """Hemisphere rule with doubled weights; exact for even integrands."""
        if not self.antipodal:
            raise PreconditionError("half() needs an antipodally paired direction set")
        h = len(self) // 2
        return DirectionQuadrature(self.directions[:h], self.weights[:h], False, self.name + "/half")

    @classmethod
    def symmetric(cls, hemisphere, weights=None, name="custom") -> "DirectionQuadrature":
        h = np.asarray(hemisphere, dtype=float).reshape(-1, 3)
        w = np.ones(len(h)) if weights is None else np.asarray(weights, dtype=float)
        return cls(np.vstack([h, -h]), np.concatenate([w, w]), True, name)

    @classmethod
    def fibonacci(cls, count: int = 256, isotropize: bool = True) -> "DirectionQuadrature":
        """Equal-weight spherical Fibonacci lattice of count/2 points plus antipodes.

        The lattice covers the whole sphere; a hemisphere-only lattice leaves a
        seam at the equator and converges about five times more slowly.  With
        ``isotropize`` the points are moved by a linear map (then renormalized)
        until the second moment equals I/3 to rounding.  The map is linear, so
        antipodal pairing survives.
        """
        if count < 6 or count % 2:
            raise ConfigurationError(f"direction count must be even and >= 6, got {count}")
        m = count // 2
        i = np.arange(m) + 0.5
        z = 1.0 - 2.0 * i / m
        rho = np.sqrt(1.0 - z * z)
        h = np.stack([rho * np.cos(GOLDEN_ANGLE * i), rho * np.sin(GOLDEN_ANGLE * i), z], axis=1)
        if isotropize:
            h = _isotropize(h)
        return cls.symmetric(h, name=f"fibonacci{count}" + ("" if isotropize else "-raw"))

    @classmethod
    def octahedron(cls) -> "DirectionQuadrature":
        return cls.symmetric(np.eye(3), name="octahedron")

    @classmethod
    def icosahedron(cls) -> "DirectionQuadrature":
        g = (1.0 + np.sqrt(5.0)) / 2.0
        h = [[0, 1, g], [0, -1, g], [1, g, 0], [-1, g, 0], [g, 0, 1], [g, 0, -1]]
        return cls.symmetric(h, name="icosahedron")

    @classmethod
    def gauss_product(cls, m: int) -> "DirectionQuadrature":
        """Gauss-Legendre in cos(theta) (m nodes, m even) times 2m azimuths.

        Exact for spherical polynomials of degree <= 2m - 1.
        """
        if m < 2 or m % 2:
            raise ConfigurationError(f"gauss_product needs an even m >= 2, got {m}")
        z, wz = np.polynomial.legendre.leggauss(m)
        az = (np.arange(2 * m) + 0.5) * np.pi / m
        keep = z > 0
        zz, aa = np.meshgrid(z[keep], az, indexing="ij")
        rho = np.sqrt(1.0 - zz**2)
        h = np.stack([rho * np.cos(aa), rho * np.sin(aa), zz], axis=-1).reshape(-1, 3)
        w = np.repeat(wz[keep], 2 * m)
        return cls.symmetric(h, w, name=f"gauss{m}")

    @classmethod
    def by_name(cls, name: str, count: int = 256) -> "DirectionQuadrature":
        if name == "fibonacci":
            return cls.fibonacci(count)
        if name == "octahedron":
            return cls.octahedron()
        if name == "icosahedron":
            return cls.icosahedron()
        if name == "gauss":
            return cls.gauss_product(count)
        raise ConfigurationError(f"unknown direction set {name!r}")


def _isotropize(h: np.ndarray, tol: float = 1e-15, max_iter: int = 500) -> np.ndarray:
    # symmetric set: second moment of [H; -H] equals that of H
    for _ in range(max_iter):
        s = h.T @ h / len(h)
        if np.max(np.abs(s - np.eye(3) / 3.0)) <= tol:
            break
        vals, vecs = np.linalg.eigh(3.0 * s)
        h = h @ (vecs @ np.diag(vals**-0.5) @ vecs.T)
        h /= np.linalg.norm(h, axis=1)[:, None]
    return h


@dataclass(frozen=True)
class SeparationScan:
    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if not lam:
            raise ConfigurationError("empty separation scan")
        if any(b <= a for a, b in zip(lam, lam[1:])):
            raise ConfigurationError("separations must be strictly increasing")
        if lam[0] <= 0 or lam[-1] > BOX_LENGTH / 4:
            raise ConfigurationError("separations must lie in (0, box_length/4]")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def geometric(cls, lo: float, hi: float, count: int) -> "SeparationScan":
        return cls(tuple(np.geomspace(lo, hi, count)))

    def split(self, grid: Grid) -> tuple[list[float], list[float]]:
        """(resolvable, dropped) separations for this grid."""
        keep = [x for x in self.lambdas if x >= grid.spacing]
        drop = [x for x in self.lambdas if x < grid.spacing]
        return keep, drop


def increment(field: VectorField, separation) -> VectorField:
    """delta F(x) = F(x + separation) - F(x), translation by spectral phase shift."""
    c = fft(field.data)
    shifted = ifft(shift_hat(c, field.grid, np.asarray(separation, dtype=float)), field.grid.n)
    return VectorField(field.grid, shifted - field.data)


def _unit(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise PreconditionError(f"direction must be a unit 3-vector, |n| = {np.linalg.norm(n):.16g}")
    return n


def longitudinal_component(a: np.ndarray, n: np.ndarray) -> np.ndarray:
    """n . a for a stacked (3, ...) array."""
    return n[0] * a[0] + n[1] * a[1] + n[2] * a[2]


def project_longitudinal(incr: VectorField, n) -> VectorField:
    n = _unit(n)
    s = longitudinal_component(incr.data, n)
    return VectorField(incr.grid, n[:, None, None, None] * s)


def project_transverse(incr: VectorField, n) -> VectorField:
    return incr - project_longitudinal(incr, n)


def shell_average(
    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray | float],
    lam: float,
    quad: DirectionQuadrature,
    grid: Grid,
    even: bool = False,
    stride: int = 1,
) -> float:
    """(1/lam) * sum_q w_q * mean_x integrand(n_q, lam*n_q).

    ``integrand(n, ell)`` returns grid values (or a scalar).  With ``even`` the
    caller asserts that the space-averaged integrand is even in n, and only the
    hemisphere of an antipodal set is evaluated.  ``stride`` > 1 subsamples the
    x-mean and is meant for exploration only.
    """
    if lam < grid.spacing:
        raise ConfigurationError(f"separation {lam} below grid spacing {grid.spacing}")
    q = quad.half() if even and quad.antipodal else quad
    total = 0.0
    for n, w in zip(q.directions, q.weights):
        vals = np.asarray(integrand(n, lam * n), dtype=float)
        if vals.ndim == 3 and stride > 1:
            vals = vals[::stride, ::stride, ::stride]
        total += w * float(np.mean(vals))
    return total / lam


@dataclass
class ShellRecord:
    lam: float
    direction_count: int
    value: float
    estimator_name: str


@dataclass
class ShellCsvWriter:
    """Streams shell-average results to CSV as they are produced."""

    path: Path
    _fh: object = field(default=None, init=False, repr=False)
    _writer: object = field(default=None, init=False, repr=False)

    COLUMNS = ("lambda", "direction_count", "value", "estimator_name")

    def __enter__(self):
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(self.COLUMNS)
        return self

    def write(self, rec: ShellRecord):
        self._writer.writerow([repr(float(rec.lam)), int(rec.direction_count), repr(float(rec.value)), rec.estimator_name])
        self._fh.flush()

    def write_all(self, recs: Iterable[ShellRecord]):
        for r in recs:
            self.write(r)

    def __exit__(self, *exc):
        self._fh.close()
