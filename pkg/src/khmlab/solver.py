"""Pseudo-spectral EMHD and incompressible Hall-MHD on the periodic box.

EMHD:      db/dt = -d curl(J x b) + eta lap b
Hall-MHD:  du/dt = P[u x w + J x b] + nu lap u
           db/dt = curl(u x b - d J x b) + eta lap b

with J = curl b, w = curl u and P the Leray projector.  Products are formed
on the grid and truncated with the 2/3 rule; state is kept inside the
dealiased band, so the truncated system conserves energy, magnetic helicity
and (Hall-MHD) generalized helicity exactly in continuous time.  nu and eta
are extensions beyond the inviscid equations, as is the optional
hyperdissipation -nu_h lap^2 applied to every evolved field.

Time stepping is classical RK4 on the spectral coefficients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .grid import (
    ConfigurationError,
    Grid,
    VectorField,
    cross,
    curl_hat,
    div_hat,
    fft,
    grad_hat,
    ifft,
    ik,
    inverse_curl_hat,
    project_hat,
    random_field,
)

log = logging.getLogger(__name__)

MODELS = ("emhd", "hallmhd")
IC_KINDS = ("abc", "random_lowk", "orszag_tang_3d")


class CFLError(RuntimeError):
    """Raised when a step would violate the configured stability bound."""


class BlowupError(RuntimeError):
    """Raised when non-finite values appear; carries the offending time."""

    def __init__(self, t: float):
        super().__init__(f"non-finite field values at t = {t:.6g}")
        self.t = t


@dataclass(frozen=True)
class SolverState:
    t: float
    b: VectorField
    u: VectorField | None = None
    d_i: float = 1.0
    nu: float = 0.0
    eta: float = 0.0
    nu_h: float = 0.0

    def __post_init__(self):
        for name in ("d_i", "nu", "eta", "nu_h"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if self.u is not None and self.u.grid != self.b.grid:
            raise ConfigurationError("u and b live on different grids")

    @property
    def model(self) -> str:
        return "emhd" if self.u is None else "hallmhd"

    @property
    def grid(self) -> Grid:
        return self.b.grid

    @property
    def inviscid(self) -> bool:
        return self.nu == 0 and self.eta == 0 and self.nu_h == 0

    def params(self) -> dict[str, float]:
        return {"d_i": self.d_i, "nu": self.nu, "eta": self.eta, "nu_h": self.nu_h}


# --- spectral helpers ---------------------------------------------------------


def _half_weights(grid: Grid) -> np.ndarray:
    """Multiplicity of each stored rfft coefficient in the full spectrum."""
    kz = grid.k[2]
    w = np.where(kz > 0, 2.0, 1.0)
    return np.broadcast_to(w, grid.spectral_shape)


def spectral_inner(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    """Box average <a . b> from coefficient arrays (Parseval)."""
    w = _half_weights(grid)
    return float(np.sum(w * np.real(a * np.conj(b))))


def _product_hat(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    return fft(cross(a, b)) * grid.dealias_mask


def _damping(grid: Grid, coeff: float, hyper: float) -> np.ndarray:
    k2 = grid.k2
    return coeff * k2 + hyper * k2 * k2


def rhs_emhd_hat(bh: np.ndarray, grid: Grid, d_i: float, eta: float, nu_h: float = 0.0) -> np.ndarray:
    out = -_damping(grid, eta, nu_h) * bh
    if d_i != 0.0:
        b = ifft(bh, grid.n)
        J = ifft(curl_hat(bh, grid), grid.n)
        out = out - d_i * curl_hat(_product_hat(J, b, grid), grid)
    return out


def rhs_hallmhd_hat(uh, bh, grid: Grid, d_i: float, nu: float, eta: float, nu_h: float = 0.0):
    u = ifft(uh, grid.n)
    b = ifft(bh, grid.n)
    w = ifft(curl_hat(uh, grid), grid.n)
    J = ifft(curl_hat(bh, grid), grid.n)
    du = project_hat(fft(cross(u, w) + cross(J, b)) * grid.dealias_mask, grid)
    emf = cross(u, b)
    if d_i != 0.0:
        emf = emf - d_i * cross(J, b)
    db = curl_hat(fft(emf) * grid.dealias_mask, grid)
    du -= _damping(grid, nu, nu_h) * uh
    db -= _damping(grid, eta, nu_h) * bh
    return du, db


def rhs_emhd(b: VectorField, d_i: float, eta: float = 0.0, nu_h: float = 0.0) -> VectorField:
    """-d curl(J x b) + eta lap b, dealiased."""
    g = b.grid
    bh = fft(b.data) * g.dealias_mask
    return VectorField(g, ifft(rhs_emhd_hat(bh, g, d_i, eta, nu_h), g.n))


def rhs_hallmhd(u: VectorField, b: VectorField, d_i: float, nu: float = 0.0, eta: float = 0.0, nu_h: float = 0.0):
    """(du/dt, db/dt) with pressure removed by Leray projection."""
    g = b.grid
    m = g.dealias_mask
    du, db = rhs_hallmhd_hat(fft(u.data) * m, fft(b.data) * m, g, d_i, nu, eta, nu_h)
    return VectorField(g, ifft(du, g.n)), VectorField(g, ifft(db, g.n))


# --- diagnostics ------------------------------------------------------------


@dataclass
class InvariantLedger:
    """Box-averaged invariants per output time."""

    t: list = field(default_factory=list)
    E: list = field(default_factory=list)
    H_M: list = field(default_factory=list)
    H_G: list = field(default_factory=list)
    H_C: list = field(default_factory=list)
    eps_E: list = field(default_factory=list)

    COLUMNS = ("t", "E", "H_M", "H_G", "H_C", "eps_E")

    def append(self, row: dict):
        for c in self.COLUMNS:
            getattr(self, c).append(float(row[c]))

    def rows(self):
        return [dict(zip(self.COLUMNS, vals)) for vals in zip(*(getattr(self, c) for c in self.COLUMNS))]

    def drift(self, name: str, normalize: str | float = "self") -> float:
        """max_t |X(t) - X(0)| divided by |X(0)| (or by a given number)."""
        x = np.asarray(getattr(self, name))
        den = abs(x[0]) if normalize == "self" else float(normalize)
        diff = float(np.max(np.abs(x - x[0])))
        return diff / den if den > 0 else diff

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in self.rows():
                w.writerow([repr(row[c]) for c in self.COLUMNS])


def invariants_hat(uh, bh, grid: Grid, nu: float, eta: float, nu_h: float = 0.0) -> dict:
    Ah = inverse_curl_hat(bh, grid)
    Jh = curl_hat(bh, grid)
    k2 = grid.k2
    E = 0.5 * spectral_inner(bh, bh, grid)
    H_M = spectral_inner(Ah, bh, grid)
    eps = eta * spectral_inner(Jh, Jh, grid) + nu_h * spectral_inner(k2 * bh, k2 * bh, grid)
    if uh is None:
        H_G, H_C = H_M, 0.0
    else:
        wh = curl_hat(uh, grid)
        E += 0.5 * spectral_inner(uh, uh, grid)
        H_G = spectral_inner(Ah + uh, bh + wh, grid)
        H_C = spectral_inner(uh, bh, grid)
        # <|grad u|^2> = <|w|^2> for solenoidal u
        eps += nu * spectral_inner(wh, wh, grid) + nu_h * spectral_inner(k2 * uh, k2 * uh, grid)
    return {"E": E, "H_M": H_M, "H_G": H_G, "H_C": H_C, "eps_E": eps}


def invariants(state: SolverState) -> dict:
    g = state.grid
    uh = None if state.u is None else fft(state.u.data)
    out = invariants_hat(uh, fft(state.b.data), g, state.nu, state.eta, state.nu_h)
    out["t"] = state.t
    return out


def potentials(state: SolverState) -> dict[str, np.ndarray]:
    """Scalar potentials removed by the projection (mean-free).

    ``pi``: A_t = u x b - d J x b - grad pi in Coulomb gauge.
    ``P``: fluid pressure in u_t + div(u u) - div(b b) + grad P = 0
    (Hall-MHD only).
    """
    g = state.grid
    k2 = g.k2.copy()
    k2[0, 0, 0] = 1.0
    bh = fft(state.b.data)
    b = state.b.data
    J = ifft(curl_hat(bh, g), g.n)
    emf = -state.d_i * cross(J, b)
    if state.u is not None:
        emf = emf + cross(state.u.data, b)
    out = {"pi": ifft(-div_hat(fft(emf), g) / k2 * (g.k2 > 0), g.n)}
    if state.u is not None:
        u = state.u.data
        w = ifft(curl_hat(fft(u), g), g.n)
        rot = ifft(-div_hat(fft(cross(u, w) + cross(J, b)), g) / k2 * (g.k2 > 0), g.n)
        P = rot + 0.5 * (np.sum(b * b, axis=0) - np.sum(u * u, axis=0))
        out["P"] = P - P.mean()
    return out


# --- time stepping ------------------------------------------------------------


@dataclass(frozen=True)
class CFLLimits:
    advective: float = 1.0
    hall: float = 0.2

    def max_dt(self, state: SolverState) -> float:
        g = state.grid
        bmax = float(np.max(np.sqrt(np.sum(state.b.data**2, axis=0))))
        umax = 0.0 if state.u is None else float(np.max(np.sqrt(np.sum(state.u.data**2, axis=0))))
        limits = [np.inf]
        speed = umax + bmax
        if state.u is not None and speed > 0:
            limits.append(self.advective * g.spacing / speed)
        if state.d_i > 0 and bmax > 0:
            limits.append(self.hall * g.spacing**2 / (state.d_i * bmax))
        return float(min(limits))


def _pack(state: SolverState):
    g = state.grid
    m = g.dealias_mask
    bh = fft(state.b.data) * m
    uh = None if state.u is None else fft(state.u.data) * m
    return uh, bh


def _rk4_hat(uh, bh, dt, g: Grid, state: SolverState):
    p = state
    if uh is None:
        def f(b):
            return rhs_emhd_hat(b, g, p.d_i, p.eta, p.nu_h)

        k1 = f(bh)
        k2 = f(bh + 0.5 * dt * k1)
        k3 = f(bh + 0.5 * dt * k2)
        k4 = f(bh + dt * k3)
        return None, bh + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def f(u, b):
        return rhs_hallmhd_hat(u, b, g, p.d_i, p.nu, p.eta, p.nu_h)

    a1, b1 = f(uh, bh)
    a2, b2 = f(uh + 0.5 * dt * a1, bh + 0.5 * dt * b1)
    a3, b3 = f(uh + 0.5 * dt * a2, bh + 0.5 * dt * b2)
    a4, b4 = f(uh + dt * a3, bh + dt * b3)
    return (
        uh + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4),
        bh + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4),
    )


def _unpack(uh, bh, t, state: SolverState) -> SolverState:
    g = state.grid
    b = VectorField(g, ifft(bh, g.n))
    u = None if uh is None else VectorField(g, ifft(uh, g.n))
    return replace(state, t=t, b=b, u=u)


def _check_finite(uh, bh, t):
    if not np.all(np.isfinite(bh)) or (uh is not None and not np.all(np.isfinite(uh))):
        raise BlowupError(t)


def step_rk4(state: SolverState, dt: float, cfl: CFLLimits | None = None) -> SolverState:
    """One RK4 step; refuses dt above the CFL bound and aborts on NaN."""
    cfl = cfl or CFLLimits()
    limit = cfl.max_dt(state)
    if dt > limit:
        raise CFLError(f"dt = {dt:.3g} exceeds the stability bound {limit:.3g} at t = {state.t:.6g}")
    uh, bh = _pack(state)
    uh, bh = _rk4_hat(uh, bh, dt, state.grid, state)
    _check_finite(uh, bh, state.t + dt)
    return _unpack(uh, bh, state.t + dt, state)


@dataclass
class RunResult:
    snapshots: list
    ledger: InvariantLedger
    final: SolverState


def run(
    state: SolverState,
    t_end: float,
    dt: float,
    snapshot_interval: float | None = None,
    ledger_interval: float | None = None,
    cfl: CFLLimits | None = None,
    cfl_check_every: int = 10,
    on_snapshot: Callable[[SolverState], None] | None = None,
) -> RunResult:
    """Integrate to t_end with fixed dt, recording invariants and snapshots.

    Snapshots are kept in memory unless ``on_snapshot`` is given, in which case
    they are handed over one at a time.  The CFL bound is rechecked every
    ``cfl_check_every`` steps (from grid values, which costs two transforms).
    """
    cfl = cfl or CFLLimits()
    g = state.grid
    nsteps = int(round((t_end - state.t) / dt))
    if nsteps < 0 or abs(state.t + nsteps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ConfigurationError(f"t_end - t = {t_end - state.t} is not a multiple of dt = {dt}")
    every_snap = None if snapshot_interval is None else max(1, int(round(snapshot_interval / dt)))
    every_led = max(1, int(round((ledger_interval or dt) / dt)))
    ledger = InvariantLedger()
    snaps = []
    uh, bh = _pack(state)
    current = state

    def record(i, uh, bh):
        nonlocal current
        t = state.t + i * dt
        if i % every_led == 0 or i == nsteps:
            row = invariants_hat(uh, bh, g, state.nu, state.eta, state.nu_h)
            row["t"] = t
            ledger.append(row)
        if every_snap is not None and (i % every_snap == 0 or i == nsteps):
            current = _unpack(uh, bh, t, state)
            if on_snapshot is not None:
                on_snapshot(current)
            else:
                snaps.append(current)

    record(0, uh, bh)
    for i in range(1, nsteps + 1):
        if (i - 1) % cfl_check_every == 0:
            probe = _unpack(uh, bh, state.t + (i - 1) * dt, state)
            limit = cfl.max_dt(probe)
            if dt > limit:
                raise CFLError(f"dt = {dt:.3g} exceeds the stability bound {limit:.3g} at t = {probe.t:.6g}")
        uh, bh = _rk4_hat(uh, bh, dt, g, state)
        _check_finite(uh, bh, state.t + i * dt)
        record(i, uh, bh)
    final = _unpack(uh, bh, state.t + nsteps * dt, state)
    return RunResult(snaps, ledger, final)


# --- initial conditions -------------------------------------------------------


def _abc(x, y, z):
    return (np.sin(z) + np.cos(y), np.sin(x) + np.cos(z), np.sin(y) + np.cos(x))


def make_initial_condition(
    grid: Grid,
    kind: str,
    model: str = "emhd",
    seed: int = 1,
    amplitude: float = 1.0,
    kmax: float = 3.0,
) -> tuple[VectorField, VectorField | None]:
    """(b, u) for the requested model; u is None for EMHD.

    ``random_lowk`` draws Gaussian coefficients on 0 < |k| <= kmax, projects
    them and scales each field to rms magnitude ``amplitude``.
    ``orszag_tang_3d`` is a three-dimensional Orszag-Tang-like vortex.
    """
    if kind not in IC_KINDS:
        raise ConfigurationError(f"ic.kind must be one of {IC_KINDS}, got {kind!r}")
    if model not in MODELS:
        raise ConfigurationError(f"solver.model must be one of {MODELS}, got {model!r}")
    hall = model == "hallmhd"
    if kind == "abc":
        b = VectorField.from_function(grid, _abc) * amplitude
        u = b if hall else None
    elif kind == "random_lowk":
        if not 1 <= kmax < grid.n / 3:
            raise ConfigurationError(f"ic.kmax must lie in [1, n/3), got {kmax}")
        rng = np.random.default_rng(seed)
        b = random_field(grid, kmax, rng, amplitude=1.0) * amplitude
        u = random_field(grid, kmax, rng, amplitude=1.0) * amplitude if hall else None
    else:
        def vel(x, y, z):
            return (-2 * np.sin(y) + 0.2 * np.sin(z), 2 * np.sin(x) + 0.2 * np.sin(z), 0 * x)

        def mag(x, y, z):
            return (-2 * np.sin(y) + 0.2 * np.cos(z), np.sin(2 * x) + 0.2 * np.cos(z), 0.2 * np.sin(x))

        b = VectorField.from_function(grid, mag) * amplitude
        u = VectorField.from_function(grid, vel) * amplitude if hall else None
    return b, u


def initial_state(grid: Grid, model: str, kind: str, seed=1, amplitude=1.0, kmax=3.0, d_i=1.0, nu=0.0, eta=0.0, nu_h=0.0) -> SolverState:
    b, u = make_initial_condition(grid, kind, model, seed, amplitude, kmax)
    return SolverState(0.0, b, u, d_i, nu, eta, nu_h)


def vector_potential(b: VectorField) -> VectorField:
    """Coulomb-gauge A with curl A = b (no precondition check)."""
    g = b.grid
    return VectorField(g, ifft(inverse_curl_hat(fft(b.data), g), g.n))
