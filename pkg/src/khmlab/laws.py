"""Third-order structure functions, dissipation functionals and balance audits.

Conventions
-----------
* Shell averages are (1/lam) sum_q w_q <integrand(n_q, lam n_q)>_x with the
  box average <.>_x over every grid point.
* Every integrand here is cubic in increments and, after the x-average, even
  under n -> -n.  Estimators therefore evaluate only the hemisphere of an
  antipodal direction set.
* A cubic x-average of band-limited fields is computed exactly on any grid
  with more than 3 * max|k_i| points per axis, so fields are resampled to the
  smallest such grid before the direction loop (``exact_mean``).
* The energy and helicity functionals carry the factor d_I; the Hall-MHD
  velocity block does not.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import ConfigurationError, Grid, VectorField, cross, curl_hat, fft, ifft, inverse_curl_hat
from .increments import DirectionQuadrature, SeparationScan
from .mollify import RadialKernel, check_resolvable, quadrature_multipliers
from .solver import SolverState, spectral_inner

log = logging.getLogger(__name__)

AUDITS = {
    "energy-L": -2.0 / 3.0,
    "energy-T": -4.0 / 3.0,
    "helicity-L": -4.0 / 3.0,
    "helicity-T": -8.0 / 3.0,
}


# --- exact reduced-grid evaluation ------------------------------------------


BAND_CUTOFF = 1e-12


def _band(c: np.ndarray, grid: Grid) -> int:
    """Largest |k_i| carrying more than BAND_CUTOFF of the peak amplitude (transform roundoff sits below)."""
    mag = np.max(np.abs(c.reshape(-1, *grid.spectral_shape)), axis=0)
    active = mag > BAND_CUTOFF * max(float(mag.max()), 1e-300)
    if not active.any():
        return 0
    kx, ky, kz = (np.broadcast_to(np.abs(a), grid.spectral_shape) for a in grid.k)
    return int(max(kx[active].max(), ky[active].max(), kz[active].max()))


def _resample(c: np.ndarray, src: Grid, dst: Grid) -> np.ndarray:
    """Copy the coefficients of modes |k_i| < dst.n/2 into dst's layout."""
    if dst.n == src.n:
        return c
    h = dst.n // 2
    out = np.zeros(c.shape[:-3] + dst.spectral_shape, dtype=complex)
    for sx in (slice(0, h), slice(-h, None)):
        for sy in (slice(0, h), slice(-h, None)):
            out[..., sx, sy, :h] = c[..., sx, sy, :h]
    # Nyquist planes of dst must be empty
    out[..., h, :, :] = 0
    out[..., :, h, :] = 0
    return out


class IncrementEngine:
    """Spectra of several fields, shifted together by arbitrary separations.

    With ``exact_mean`` the spectra are moved to the smallest even grid on
    which every x-average of a product of three fields is exact.
    """

    def __init__(self, fields: dict[str, VectorField], exact_mean: bool = True):
        if not fields:
            raise ConfigurationError("no fields given")
        grid = next(iter(fields.values())).grid
        spectra = {k: fft(v.data) * grid.nyquist_free for k, v in fields.items()}
        self.source_grid = grid
        if exact_mean:
            band = max(_band(c, grid) for c in spectra.values())
            m = max(8, 3 * band + 1)
            m += m % 2
            if m < grid.n:
                small = Grid(m)
                spectra = {k: _resample(c, grid, small) for k, c in spectra.items()}
                grid = small
        self.grid = grid
        self.spectra = spectra
        self.values = {k: ifft(c, grid.n) for k, c in spectra.items()}

    def increments(self, ell) -> dict[str, np.ndarray]:
        g = self.grid
        kx, ky, kz = g.k
        phase = np.exp(1j * kx * ell[0]) * np.exp(1j * ky * ell[1]) * np.exp(1j * kz * ell[2])
        phase = phase * g.nyquist_free
        return {k: ifft(c * phase, g.n) - self.values[k] for k, c in self.spectra.items()}


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _ndot(n, a):
    return n[0] * a[0] + n[1] * a[1] + n[2] * a[2]


def _check_lambda(lam: float, grid: Grid):
    if lam < grid.spacing:
        raise ConfigurationError(f"separation {lam} below grid spacing {grid.spacing}")


def _shell(engine: IncrementEngine, lam: float, quad: DirectionQuadrature, groups) -> dict[str, float]:
    """Shell averages of named integrands sharing one set of increments.

    Each entry of ``groups`` maps ``(n, increments)`` to a dict of named
    integrand arrays, so related terms share their intermediate products.
    """
    _check_lambda(lam, engine.source_grid)
    q = quad.half() if quad.antipodal else quad
    acc: dict[str, float] = {}
    for n, w in zip(q.directions, q.weights):
        d = engine.increments(lam * n)
        for group in groups:
            for name, arr in group(n, d).items():
                acc[name] = acc.get(name, 0.0) + float(w) * float(np.mean(arr))
    return {k: v / lam for k, v in acc.items()}


def _prefixed(fn, prefix: str):
    return lambda n, d: {prefix + k: v for k, v in fn(n, d).items()}


# --- integrands ----------------------------------------------------------------


def _energy_bar_terms(n, d, b="b", j="J"):
    db, dj = d[b], d[j]
    nb, nj = _ndot(n, db), _ndot(n, dj)
    bb, bj = _dot(db, db), _dot(db, dj)
    return {
        # n.[db (db_L.dJ_L) - dJ |db_L|^2 / 2]
        "S_EL_bar": nb * nb * nj - 0.5 * nj * nb * nb,
        # n.[db (db_T.dJ_T) - dJ |db_T|^2 / 2]
        "S_ET_bar": nb * (bj - nb * nj) - 0.5 * nj * (bb - nb * nb),
        # n.[db x (dJ x db)] = n.[dJ |db|^2 - db (dJ.db)]
        "S_E_bar": nj * bb - nb * bj,
    }


def _velocity_terms(n, d):
    dv, db = d["u"], d["b"]
    nv, nb = _ndot(n, dv), _ndot(n, db)
    vv, bb, bv = _dot(dv, dv), _dot(db, db), _dot(db, dv)
    vt, btv = vv - nv * nv, bv - nb * nv
    btb = bb - nb * nb
    return {
        "L": nv * (nv * nv + nb * nb) - 2.0 * nb * nv * nb,
        "T": nv * (vt + btb) - 2.0 * nb * btv,
        # n.[dv |db|^2 - db (db.dv)]; the opposite sign breaks the L/T route consistency
        "mix": nv * bb - nb * bv,
    }


def _magnetic_terms(n, d):
    db = d["b"]
    nb = _ndot(n, db)
    return {"S_ML": nb**3, "S_MT": nb * (_dot(db, db) - nb * nb)}


def _generalized_helicity(n, d):
    v, w, h = d["u"], d["w"], d["b"]
    nv, nw, nh = _ndot(n, v), _ndot(n, w), _ndot(n, h)
    vv = _dot(v, v)
    return (
        nv * nv * nw
        - 0.5 * nw * nv * nv
        + 2.0 * nv * nv * nh
        - nh * nv * nv
        - 0.4 * nw * vv
        + 0.4 * nv * _dot(v, w)
        - 0.8 * nh * vv
        + 0.8 * nv * _dot(v, h)
    )


# --- structure functions ---------------------------------------------------


def _curl(f: VectorField) -> VectorField:
    g = f.grid
    return VectorField(g, ifft(curl_hat(fft(f.data), g), g.n))


def energy_bar_functionals(b: VectorField, lam: float, quad: DirectionQuadrature, d_i: float = 1.0, J: VectorField | None = None, exact_mean: bool = True) -> dict[str, float]:
    """d_I-weighted S_EL_bar, S_ET_bar and S_E_bar at one separation."""
    J = _curl(b) if J is None else J
    eng = IncrementEngine({"b": b, "J": J}, exact_mean)
    out = _shell(eng, lam, quad, [_energy_bar_terms])
    return {k: d_i * v for k, v in out.items()}


def assemble_energy(bars: dict[str, float]) -> dict[str, float]:
    """S_EL = S_EL_bar - (2/5) S_E_bar and S_ET = S_ET_bar + (2/5) S_E_bar."""
    return {
        "S_EL": bars["S_EL_bar"] - 0.4 * bars["S_E_bar"],
        "S_ET": bars["S_ET_bar"] + 0.4 * bars["S_E_bar"],
    }


def s_el_energy(b, lam, quad, d_i=1.0, J=None) -> float:
    return assemble_energy(energy_bar_functionals(b, lam, quad, d_i, J))["S_EL"]


def s_et_energy(b, lam, quad, d_i=1.0, J=None) -> float:
    return assemble_energy(energy_bar_functionals(b, lam, quad, d_i, J))["S_ET"]


def s_e_bar(b, lam, quad, d_i=1.0, J=None) -> float:
    return energy_bar_functionals(b, lam, quad, d_i, J)["S_E_bar"]


def s_energy_hallmhd(u: VectorField, b: VectorField, lam: float, quad: DirectionQuadrature, d_i: float = 1.0, exact_mean: bool = True) -> dict[str, float]:
    """Total-energy S_EL and S_ET for Hall-MHD: velocity-magnetic block plus d_I times the b-J block."""
    J = _curl(b)
    eng = IncrementEngine({"u": u, "b": b, "J": J}, exact_mean)
    v = _shell(eng, lam, quad, [_prefixed(_velocity_terms, "v"), _energy_bar_terms])
    hall = assemble_energy({k: d_i * v[k] for k in ("S_EL_bar", "S_ET_bar", "S_E_bar")})
    return {
        "S_EL": v["vL"] + 0.8 * v["vmix"] + hall["S_EL"],
        "S_ET": v["vT"] - 0.8 * v["vmix"] + hall["S_ET"],
        "velocity_L": v["vL"] + 0.8 * v["vmix"],
        "velocity_T": v["vT"] - 0.8 * v["vmix"],
        "hall_L": hall["S_EL"],
        "hall_T": hall["S_ET"],
    }


def s_magnetic(b: VectorField, lam: float, quad: DirectionQuadrature, d_i: float = 1.0, exact_mean: bool = True) -> dict[str, float]:
    eng = IncrementEngine({"b": b}, exact_mean)
    v = _shell(eng, lam, quad, [_magnetic_terms])
    return {k: d_i * x for k, x in v.items()}


def s_ml(b, lam, quad, d_i=1.0) -> float:
    return s_magnetic(b, lam, quad, d_i)["S_ML"]


def s_mt(b, lam, quad, d_i=1.0) -> float:
    return s_magnetic(b, lam, quad, d_i)["S_MT"]


def s_hl_generalized(u: VectorField, omega: VectorField, b: VectorField, lam: float, quad: DirectionQuadrature, exact_mean: bool = True) -> float:
    """Eight-term generalized-helicity combination with v = u, w = omega, h = b."""
    eng = IncrementEngine({"u": u, "w": omega, "b": b}, exact_mean)
    return _shell(eng, lam, quad, [lambda n, d: {"S_HL": _generalized_helicity(n, d)}])["S_HL"]


# --- dissipation functionals ---------------------------------------------------


@dataclass
class DissipationEstimate:
    epsilon_kernel: float
    D_EL: float
    D_ET: float
    D_ML: float
    D_MT: float
    eps_E_measured: float | None = None

    def values(self) -> dict[str, float]:
        return {"D_EL": self.D_EL, "D_ET": self.D_ET, "D_ML": self.D_ML, "D_MT": self.D_MT}


def _d_integrands(n, d, r, phi, dphi):
    db, dj = d["b"], d["J"]
    nb, nj = _ndot(n, db), _ndot(n, dj)
    bb, bj = _dot(db, db), _dot(db, dj)
    btb = bb - nb * nb
    jtb = bj - nj * nb
    pn = nj * bb - nb * bj  # n.[db x (dJ x db)]
    g = 2.0 / r * phi
    return {
        "D_EL": 0.75 * (dphi * nb * nj * nb + g * (nb * jtb + pn))
        - 0.375 * (dphi * nj * nb * nb + g * nj * btb),
        "D_ET": -0.1875 * (dphi - g) * nj * btb + 0.375 * (dphi - g) * nb * jtb - 0.75 / r * phi * pn,
        "D_ML": 0.75 * (dphi * nb**3 + g * nb * btb),
        "D_MT": 0.375 * (dphi - g) * nb * btb,
    }


def d_functionals(b: VectorField, kernel: RadialKernel, quad: DirectionQuadrature, d_i: float = 1.0, radial_nodes: int = 32, J: VectorField | None = None, exact_mean: bool = True, which=("D_EL", "D_ET", "D_ML", "D_MT")) -> dict[str, float]:
    """Space averages of the four dissipation functionals at scale kernel.epsilon."""
    check_resolvable(kernel, b.grid)
    J = _curl(b) if J is None else J
    eng = IncrementEngine({"b": b, "J": J}, exact_mean)
    r, w_r = kernel.radial_rule(radial_nodes)
    phi, dphi = kernel.phi_eps(r), kernel.dphi_eps(r)
    vol = 4.0 * np.pi * r * r * w_r
    q = quad.half() if quad.antipodal else quad
    acc = {k: 0.0 for k in which}
    for n, w in zip(q.directions, q.weights):
        for ri, vi, p, dp in zip(r, vol, phi, dphi):
            if vi * (abs(p) + abs(dp)) == 0.0:
                continue
            vals = _d_integrands(n, eng.increments(ri * n), ri, p, dp)
            for k in which:
                acc[k] += w * vi * float(np.mean(vals[k]))
    return {k: d_i * v for k, v in acc.items()}


def d_spectral(b: VectorField, kernel: RadialKernel, quad: DirectionQuadrature, d_i: float = 1.0, radial_nodes: int = 32) -> dict[str, float]:
    """The same four space averages from smoothed products, without increments.

    With M_X the L or T smoothing (a Fourier multiplier built from the same
    direction and radial rules), <D_XL> = 3 d <(J x b) . M_L Y> and
    <D_XT> = (3/2) d <(J x b) . M_T Y> with Y = J for energy and Y = b for
    helicity.  Agreement with ``d_functionals`` checks the increment formulas.
    """
    check_resolvable(kernel, b.grid)
    g = b.grid
    bh = fft(b.data) * g.nyquist_free
    Jh = curl_hat(bh, g)
    flux = fft(cross(ifft(Jh, g.n), b.data))
    out = {}
    for part, fac in (("L", 3.0), ("T", 1.5)):
        smooth = _smoothed_pair(bh, g, kernel, quad, radial_nodes, part)
        out[f"D_E{part}"] = fac * d_i * spectral_inner(flux, smooth(Jh), g)
        out[f"D_M{part}"] = fac * d_i * spectral_inner(flux, smooth(bh), g)
    return {k: out[k] for k in ("D_EL", "D_ET", "D_ML", "D_MT")}


def d_energy(b, J, kernel, quad, d_i=1.0, radial_nodes=32) -> DissipationEstimate:
    v = d_functionals(b, kernel, quad, d_i, radial_nodes, J)
    return DissipationEstimate(kernel.epsilon, v["D_EL"], v["D_ET"], v["D_ML"], v["D_MT"])


def d_magnetic(b, kernel, quad, d_i=1.0, radial_nodes=32) -> dict[str, float]:
    return d_functionals(b, kernel, quad, d_i, radial_nodes, which=("D_ML", "D_MT"))


# --- KHM audit -------------------------------------------------------------------


@dataclass
class AuditReport:
    which: str
    lhs: float
    rhs: float
    residual: float
    factor: float
    floor: float
    dt: float
    d_mean: float
    tolerance: float = 1e-2
    passed: bool | None = None

    def to_dict(self):
        return asdict(self)

    def with_factor(self, factor: float) -> "AuditReport":
        """Re-score the same measurements against a different coefficient."""
        rhs = factor * self.d_mean
        res = abs(self.lhs - rhs) / max(abs(self.lhs), abs(rhs), self.floor)
        return AuditReport(self.which, self.lhs, rhs, res, factor, self.floor, self.dt, self.d_mean, self.tolerance, res <= self.tolerance)


def _smoothed_pair(bh, grid, kernel, quad, radial_nodes, part):
    """<X . M X>-type operator: returns a function applying the L or T smoothing to spectra."""
    c = bh
    mag = np.max(np.abs(c), axis=0)
    mask = (mag > 1e-15 * max(float(mag.max()), 1e-300)) & grid.nyquist_free
    kx, ky, kz = (np.broadcast_to(a, grid.spectral_shape) for a in grid.k)
    kv = np.stack([kx[mask], ky[mask], kz[mask]], axis=1)
    plain, lon = quadrature_multipliers(kv, kernel, quad, radial_nodes)
    tensor = lon if part == "L" else plain[:, None, None] * np.eye(3) - lon

    def apply(x):
        out = np.zeros_like(x)
        out[:, mask] = np.einsum("kij,jk->ik", tensor, x[:, mask])
        return out

    return apply


def _audit_quantity(state: SolverState, kernel, quad, radial_nodes, which: str) -> float:
    g = state.grid
    bh = fft(state.b.data) * g.nyquist_free
    part = which[-1]
    smooth = _smoothed_pair(bh, g, kernel, quad, radial_nodes, part)
    if which.startswith("energy"):
        return spectral_inner(smooth(bh), bh, g)
    Ah = inverse_curl_hat(bh, g)
    return spectral_inner(smooth(Ah), bh, g) + spectral_inner(Ah, smooth(bh), g)


def _velocity_source(state: SolverState, kernel, quad, radial_nodes, part) -> float:
    """4 <(u x b) . b_X^eps>: the non-flux velocity contribution to d/dt of the helicity pair."""
    if state.u is None:
        return 0.0
    g = state.grid
    bh = fft(state.b.data) * g.nyquist_free
    smooth = _smoothed_pair(bh, g, kernel, quad, radial_nodes, part)
    emf = fft(cross(state.u.data, state.b.data))
    return 4.0 * spectral_inner(emf, smooth(bh), g)


def audit_khm(
    s0: SolverState,
    s1: SolverState,
    kernel: RadialKernel,
    which: str,
    quad: DirectionQuadrature,
    radial_nodes: int = 32,
    factor: float | None = None,
    tolerance: float = 1e-2,
) -> AuditReport:
    """Space-integrated balance d/dt Q = factor * <D> between two snapshots.

    Q is <b_X^eps . b> (energy) or <A_X^eps . b + A . b_X^eps> (helicity).
    The left side is the difference quotient of Q; the right side averages D
    over the two snapshots, so both are centred at the midpoint.  For
    Hall-MHD helicity audits the velocity source 4<(u x b) . b_X^eps> is
    moved to the left side.  ``factor`` overrides the nominal coefficient
    (used by the sensitivity check).
    """
    if which not in AUDITS:
        raise ConfigurationError(f"unknown audit {which!r}; choose from {sorted(AUDITS)}")
    for s in (s0, s1):
        if not s.inviscid:
            raise ConfigurationError("audit_khm needs snapshots from an inviscid run (nu = eta = nu_h = 0)")
    if s0.grid != s1.grid or s0.model != s1.model or s0.d_i != s1.d_i:
        raise ConfigurationError("snapshots come from different runs")
    if which.startswith("energy") and s0.model != "emhd":
        raise ConfigurationError("energy audits apply to EMHD snapshots")
    dt = s1.t - s0.t
    if not dt > 0:
        raise ConfigurationError("snapshots must be in increasing time order")
    check_resolvable(kernel, s0.grid)
    factor = AUDITS[which] if factor is None else factor
    q0 = _audit_quantity(s0, kernel, quad, radial_nodes, which)
    q1 = _audit_quantity(s1, kernel, quad, radial_nodes, which)
    lhs = (q1 - q0) / dt
    part = which[-1]
    if which.startswith("helicity"):
        lhs -= 0.5 * (
            _velocity_source(s0, kernel, quad, radial_nodes, part)
            + _velocity_source(s1, kernel, quad, radial_nodes, part)
        )
    key = {"energy-L": "D_EL", "energy-T": "D_ET", "helicity-L": "D_ML", "helicity-T": "D_MT"}[which]
    d0 = d_functionals(s0.b, kernel, quad, s0.d_i, radial_nodes, which=(key,))[key]
    d1 = d_functionals(s1.b, kernel, quad, s1.d_i, radial_nodes, which=(key,))[key]
    d_mean = 0.5 * (d0 + d1)
    scale = max(s0.b.max_norm(), s1.b.max_norm())
    base = AuditReport(which, lhs, 0.0, 0.0, factor, 1e-12 * scale**3, dt, d_mean, tolerance)
    return base.with_factor(factor)


# --- coarea constants --------------------------------------------------------------


def verify_coarea_constants(kernel: RadialKernel, tol: float = 1e-8) -> dict:
    """Kernel moments and the constant combinations of the small-scale limits.

    With m2 = 4 pi int r^2 phi and m3 = 4 pi int r^3 phi':
      T route:  D = (3/8)(m3 - 2 m2) S_ET_bar - (3/4) m2 S_E_bar
      L route:  D = (3/4) m3 S_EL_bar + (3/2) m2 S_ET_bar + (3/2) m2 S_E_bar
    Eliminating S_ET_bar gives D = a S_EL_bar + c S_E_bar.
    """
    m2 = kernel.moment(2)
    m3 = kernel.moment(3, derivative=True)
    c_T, c_TE = 0.375 * (m3 - 2.0 * m2), -0.75 * m2
    c_L, c_LT, c_LE = 0.75 * m3, 1.5 * m2, 1.5 * m2
    # unknowns (D, S_ET_bar) from the two routes, per unit S_EL_bar and S_E_bar
    A = np.array([[1.0, -c_T], [1.0, -c_LT]])
    sol_L = np.linalg.solve(A, np.array([0.0, c_L]))
    sol_E = np.linalg.solve(A, np.array([c_TE, c_LE]))
    a, c = sol_L[0], sol_E[0]
    entries = {
        "m2": (m2, 1.0),
        "m3": (m3, -3.0),
        "T_route": (c_T, -15.0 / 8.0),
        "L_route": (c_L, -9.0 / 4.0),
        "L_route_S_ET_bar": (c_LT, 1.5),
        "L_route_S_E_bar": (c_LE, 1.5),
        "T_route_S_E_bar": (c_TE, -0.75),
        "eliminated_S_EL_bar": (a, -5.0 / 4.0),
        "eliminated_S_E_bar": (c, 0.5),
        "S_E_weight_L": (c / a, -0.4),
        "S_E_weight_T": (c_TE / c_T, 0.4),
        "four_fifths": (-1.0 / a, 0.8),
        "eight_fifteenths": (-1.0 / c_T, 8.0 / 15.0),
    }
    report = {"profile": kernel.profile, "tolerance": tol, "entries": {}}
    ok = True
    for name, (val, ref) in entries.items():
        err = abs(val - ref)
        report["entries"][name] = {"value": val, "expected": ref, "error": err, "pass": err <= tol}
        ok &= err <= tol
    report["pass"] = bool(ok)
    return report


# --- law scan ------------------------------------------------------------------


@dataclass
class LawScanRecord:
    lam: float
    t: float
    model: str
    S_EL: float
    S_ET: float
    S_E_bar: float
    S_EL_bar: float
    S_ET_bar: float
    S_ML: float
    S_MT: float
    S_HL: float | None = None

    COLUMNS = ("lambda", "t", "model", "S_EL", "S_ET", "S_E_bar", "S_EL_bar", "S_ET_bar", "S_ML", "S_MT", "S_HL")

    def row(self) -> list:
        return [self.lam, self.t, self.model, self.S_EL, self.S_ET, self.S_E_bar, self.S_EL_bar, self.S_ET_bar, self.S_ML, self.S_MT, self.S_HL]


def scan_snapshot(state: SolverState, lambdas, quad: DirectionQuadrature, include_hl: bool = True, exact_mean: bool = True) -> list[LawScanRecord]:
    """All S functionals of one snapshot at the given separations.

    Separations below the grid spacing are skipped and logged.
    """
    b, u = state.b, state.u
    J = _curl(b)
    fields = {"b": b, "J": J}
    if u is not None:
        fields["u"] = u
        if include_hl:
            fields["w"] = _curl(u)
    eng = IncrementEngine(fields, exact_mean)
    d_i = state.d_i

    groups = [_energy_bar_terms, _magnetic_terms]
    if u is not None:
        groups.append(_prefixed(_velocity_terms, "v"))
        if include_hl:
            groups.append(lambda n, d: {"S_HL": _generalized_helicity(n, d)})
    out = []
    for lam in lambdas:
        if lam < state.grid.spacing:
            log.info("skipping unresolvable separation %.4g (spacing %.4g)", lam, state.grid.spacing)
            continue
        v = _shell(eng, lam, quad, groups)
        bars = {k: d_i * v[k] for k in ("S_EL_bar", "S_ET_bar", "S_E_bar")}
        e = assemble_energy(bars)
        s_el, s_et = e["S_EL"], e["S_ET"]
        if u is not None:
            s_el += v["vL"] + 0.8 * v["vmix"]
            s_et += v["vT"] - 0.8 * v["vmix"]
        out.append(
            LawScanRecord(
                lam=float(lam),
                t=state.t,
                model=state.model,
                S_EL=s_el,
                S_ET=s_et,
                S_E_bar=bars["S_E_bar"],
                S_EL_bar=bars["S_EL_bar"],
                S_ET_bar=bars["S_ET_bar"],
                S_ML=d_i * v["S_ML"],
                S_MT=d_i * v["S_MT"],
                S_HL=v.get("S_HL"),
            )
        )
    return out


def helicity_dissipation(state: SolverState) -> float:
    """eps_M = eta <J . b> + nu_h <lap A . lap b>: minus half the helicity decay rate."""
    g = state.grid
    bh = fft(state.b.data)
    return state.eta * spectral_inner(curl_hat(bh, g), bh, g) + state.nu_h * spectral_inner(
        g.k2 * inverse_curl_hat(bh, g), g.k2 * bh, g
    )


@dataclass
class PlateauReport:
    window: tuple
    ratio_window: tuple
    lambdas: list
    ratio_L: list
    ratio_T: list
    ratio_M: list
    band: tuple | None
    band_decades: float
    route_agreement: float | None
    min_decades: float
    route_tolerance: float
    passed: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def widest_band(lambdas, ratios, lo, hi) -> tuple[int, int] | None:
    """Index range [i, j] of the widest (in log lambda) run with lo <= ratio <= hi."""
    best, best_w = None, -1.0
    i = 0
    n = len(lambdas)
    while i < n:
        if lo <= ratios[i] <= hi:
            j = i
            while j + 1 < n and lo <= ratios[j + 1] <= hi:
                j += 1
            w = np.log10(lambdas[j] / lambdas[i])
            if w > best_w:
                best, best_w = (i, j), w
            i = j + 1
        else:
            i += 1
    return best


def plateau_report(
    records: list[LawScanRecord],
    eps_E: float,
    eps_M: float | None = None,
    window=(0.0, np.inf),
    ratio_window=(0.5, 2.0),
    min_decades: float = 0.5,
    route_tolerance: float = 0.2,
) -> PlateauReport:
    """Time-average records inside ``window`` and look for the compensated plateau."""
    recs = [r for r in records if window[0] <= r.t <= window[1]]
    if not recs:
        raise ConfigurationError("no scan records inside the analysis window")
    lams = sorted({r.lam for r in recs})

    def mean(attr, lam):
        return float(np.mean([getattr(r, attr) for r in recs if r.lam == lam]))

    rl = [-1.25 * mean("S_EL", x) / eps_E for x in lams]
    rt = [-15.0 / 8.0 * mean("S_ET", x) / eps_E for x in lams]
    rm = [(-1.25 * mean("S_ML", x) / eps_M) if eps_M else float("nan") for x in lams]
    band = widest_band(lams, rl, *ratio_window)
    decades = 0.0 if band is None else float(np.log10(lams[band[1]] / lams[band[0]]))
    agreement = None
    if band is not None:
        i, j = band
        agreement = float(max(abs(rt[k] - rl[k]) / abs(rl[k]) for k in range(i, j + 1)))
    passed = band is not None and decades >= min_decades and agreement is not None and agreement <= route_tolerance
    return PlateauReport(
        window=tuple(float(w) for w in window),
        ratio_window=tuple(ratio_window),
        lambdas=lams,
        ratio_L=rl,
        ratio_T=rt,
        ratio_M=rm,
        band=None if band is None else (lams[band[0]], lams[band[1]]),
        band_decades=decades,
        route_agreement=agreement,
        min_decades=min_decades,
        route_tolerance=route_tolerance,
        passed=bool(passed),
    )


def scan_laws(snapshots, scan: SeparationScan, quad: DirectionQuadrature, include_hl: bool = True) -> list[LawScanRecord]:
    if not snapshots:
        raise ConfigurationError("empty scan: no snapshots")
    out = []
    for s in snapshots:
        out.extend(scan_snapshot(s, scan.lambdas, quad, include_hl))
    return out


def fit_slope(lambdas, values) -> float:
    """Least-squares slope of log|value| against log lambda."""
    x = np.log(np.asarray(lambdas, dtype=float))
    y = np.log(np.abs(np.asarray(values, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])
