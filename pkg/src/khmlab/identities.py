"""Numerical checks of the algebraic identities behind the third-order laws.

* ``check_lemma21``: a pointwise tensor identity for derivatives of n n with
  n = l/|l|, evaluated in closed form.
* ``check_lemma22``: four identities linking l-integrals of third-order
  increment products to commutators of mollified products.  Both sides are
  evaluated at a 4^3 sublattice of sample points by direct Fourier sums over
  the (few) active modes, so no interpolation enters.
* ``check_hall_rewrites``: three spectral forms of curl((curl b) x b).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import (
    ConfigurationError,
    Grid,
    PreconditionError,
    VectorField,
    curl_hat,
    divergence_residual,
    fft,
    ifft,
    ik,
)
from .increments import DirectionQuadrature
from .mollify import RadialKernel, check_resolvable

LEMMA22_NAMES = ("2.16", "2.17", "2.18", "2.19")


@dataclass
class IdentityReport:
    identity_name: str
    lhs_norm: float
    rhs_norm: float
    residual: float
    resolution: dict = field(default_factory=dict)
    relative_residual: float | None = None

    def passed(self, tol: float) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= tol)

    def to_dict(self) -> dict:
        return asdict(self)


# --- pointwise tensor identity -------------------------------------------


def dn_dl(ell: np.ndarray) -> np.ndarray:
    """d n_i / d l_k = (delta_ik - n_i n_k) / |l|, returned as [..., i, k]."""
    r = np.linalg.norm(ell, axis=-1)[..., None, None]
    n = ell / r[..., 0]
    return (np.eye(3) - n[..., :, None] * n[..., None, :]) / r


def lemma21_sides(E, F, G, ell, dn=dn_dl) -> tuple[np.ndarray, np.ndarray]:
    """Both sides for stacked inputs of shape (..., 3).  ``dn`` supplies dn_i/dl_k."""
    E, F, G, ell = (np.asarray(a, dtype=float) for a in (E, F, G, ell))
    r = np.linalg.norm(ell, axis=-1)
    if np.any(r == 0):
        raise ConfigurationError("the tensor identity is undefined at l = 0")
    n = ell / r[..., None]
    d = dn(ell)  # [..., i, k]
    # d(n_i n_j)/dl_k - (dn_i/dl_j + dn_j/dl_i) n_k
    t = (
        np.einsum("...ik,...j->...ijk", d, n)
        + np.einsum("...jk,...i->...ijk", d, n)
        - np.einsum("...ij,...k->...ijk", d, n)
        - np.einsum("...ji,...k->...ijk", d, n)
    )
    lhs = np.einsum("...ijk,...k,...i,...j->...", t, E, F, G)

    def dot(a, b):
        return np.sum(a * b, axis=-1)

    rhs = dot(n, G * dot(E, F)[..., None] + F * dot(E, G)[..., None] - 2.0 * E * dot(F, G)[..., None]) / r
    return lhs, rhs


def check_lemma21(E, F, G, ell) -> IdentityReport:
    """Residual scaled by |E||F||G|/|l|, the natural size of either side."""
    lhs, rhs = lemma21_sides(E, F, G, ell)
    scale = (
        np.linalg.norm(E, axis=-1) * np.linalg.norm(F, axis=-1) * np.linalg.norm(G, axis=-1)
        / np.linalg.norm(ell, axis=-1)
    )
    diff = np.abs(lhs - rhs)
    res = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), diff)
    return IdentityReport(
        "tensor_identity",
        float(np.max(np.abs(lhs))),
        float(np.max(np.abs(rhs))),
        float(np.max(res)),
        {"samples": int(np.size(lhs))},
    )


# --- modal evaluation -------------------------------------------------------


class ModalField:
    """Direct Fourier-sum evaluation of a band-limited field at arbitrary points.

    Keeps only the active half-spectrum modes; f(x) = Re sum a_k c_k e^{ik.x}
    with a_k = 2 off the kz = 0 plane.
    """

    def __init__(self, field: VectorField):
        g = field.grid
        c = fft(field.data)
        mag = np.max(np.abs(c), axis=0)
        mask = (mag > 1e-15 * max(mag.max(), 1e-300)) & g.nyquist_free
        kx, ky, kz = (np.broadcast_to(a, g.spectral_shape) for a in g.k)
        self.k = np.stack([kx[mask], ky[mask], kz[mask]], axis=1)
        weight = np.where(self.k[:, 2] > 0, 2.0, 1.0)
        self.coef = (c[:, mask] * weight).T  # (K, 3)

    def components(self, gradient: bool = True) -> np.ndarray:
        """Coefficient columns for values (3) and, optionally, d_k F_j (9), shape (K, C)."""
        cols = [self.coef]
        if gradient:
            for kk in range(3):
                cols.append(1j * self.k[:, kk : kk + 1] * self.coef)
        return np.concatenate(cols, axis=1)


def _sample_points(grid: Grid, per_axis: int = 4) -> np.ndarray:
    idx = np.arange(per_axis) * (grid.n // per_axis)
    x = idx * grid.spacing
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


# --- shell-integral identities --------------------------------------------


def _lemma22_integrands(E0, F0, GE0, GF0, E1, F1, GE1, GF1, n, r, phi, dphi):
    """Integrand of (lhs - rhs) for the four identities, before l-quadrature.

    Arrays: E0, F0 (P,3,1,1) values at x; GE0, GF0 (P,3,3,1,1) [k,j] = d_k F_j;
    E1, F1 (P,3,M,R), GE1, GF1 (P,3,3,M,R) at x + r n.  n (3,M,1), r (R,).
    Returns dict name -> (lhs, rhs) integrands of shape (P, M, R) that still
    need to be multiplied by phi-weights already folded in.
    """
    dE = E1 - E0
    dF = F1 - F0
    nE1 = np.sum(n * E1, axis=1)
    nF1 = np.sum(n * F1, axis=1)
    ndE = np.sum(n * dE, axis=1)
    ndF = np.sum(n * dF, axis=1)
    dEdF = np.sum(dE * dF, axis=1)
    dEdE = np.sum(dE * dE, axis=1)
    dFdF = np.sum(dF * dF, axis=1)
    divE1 = GE1[:, 0, 0] + GE1[:, 1, 1] + GE1[:, 2, 2]
    divE0 = GE0[:, 0, 0] + GE0[:, 1, 1] + GE0[:, 2, 2]
    ddiv = divE1 - divE0

    # (dE . grad) applied to fields at x + l
    dE_gradF1 = np.einsum("pkmr,pkjmr->pjmr", dE, GF1)
    dE_gradE1 = np.einsum("pkmr,pkjmr->pjmr", dE, GE1)
    n_dE_gradF1 = np.sum(n * dE_gradF1, axis=1)
    n_dE_gradE1 = np.sum(n * dE_gradE1, axis=1)
    inv_r = 1.0 / r

    out = {}
    for proj in ("L", "T"):
        if proj == "L":
            def P(a, na):
                return n * na[:, None]

            FdotPE1 = nF1 * nE1
            FdotPF1 = nF1 * nF1
            dFdE_X = ndF * ndE
            dFdF_X = ndF * ndF
        else:
            def P(a, na):
                return a - n * na[:, None]

            FdotPE1 = np.sum(F1 * E1, axis=1) - nF1 * nE1
            FdotPF1 = np.sum(F1 * F1, axis=1) - nF1 * nF1
            dFdE_X = dEdF - ndF * ndE
            dFdF_X = dFdF - ndF * ndF

        # dE . grad of s = F'.P E' and of F'.P F'
        grad_s_E = np.sum(dE_gradF1 * P(E1, nE1), axis=1) + np.sum(F1 * P(dE_gradE1, n_dE_gradE1), axis=1)
        grad_s_F = 2.0 * np.sum(dE_gradF1 * P(F1, nF1), axis=1)
        div_term_E = ddiv * FdotPE1 + grad_s_E
        div_term_F = ddiv * FdotPF1 + grad_s_F

        # E_j d_k[(E_k F_Xj)^eps - E_k F_Xj^eps] and F_i d_k[(E_k E_Xi)^eps - E_k E_Xi^eps]
        PF1 = P(F1, nF1)
        PE1 = P(E1, nE1)
        rhs_EF = ddiv * np.sum(E0 * PF1, axis=1) + np.sum(E0 * P(dE_gradF1, n_dE_gradF1), axis=1)
        rhs_FE = ddiv * np.sum(F0 * PE1, axis=1) + np.sum(F0 * P(dE_gradE1, n_dE_gradE1), axis=1)
        rhs_FF = ddiv * np.sum(F0 * PF1, axis=1) + np.sum(F0 * P(dE_gradF1, n_dE_gradF1), axis=1)

        triple = np.sum(n * (dE * dEdF[:, None] - dF * dEdE[:, None]), axis=1)
        triple_F = np.sum(n * (dF * dEdF[:, None] - dE * dFdF[:, None]), axis=1)
        if proj == "L":
            name_a, name_b = "2.16", "2.17"
            lhs_a = (
                dphi * ndE * dFdE_X
                + 2.0 * inv_r * phi * ndE * (dEdF - ndF * ndE)
                - inv_r * phi * triple
                + phi * div_term_E
            )
            lhs_b = 0.5 * (
                dphi * ndE * dFdF_X
                + 2.0 * inv_r * phi * (ndE * (dFdF - ndF * ndF) + triple_F)
                + phi * div_term_F
            )
        else:
            name_a, name_b = "2.18", "2.19"
            lhs_a = (
                dphi * ndE * dFdE_X
                - 2.0 * inv_r * phi * ndE * dFdE_X
                + inv_r * phi * triple
                + phi * div_term_E
            )
            lhs_b = 0.5 * (
                dphi * ndE * dFdF_X
                - 2.0 * inv_r * phi * ndE * dFdF_X
                - 2.0 * inv_r * phi * triple_F
                + phi * div_term_F
            )
        out[name_a] = (lhs_a, phi * (rhs_EF + rhs_FE))
        out[name_b] = (lhs_b, phi * rhs_FF)
    return out


def lemma22_sides(
    E: VectorField,
    F: VectorField,
    kernel: RadialKernel,
    quad: DirectionQuadrature,
    radial_nodes: int = 32,
    points: np.ndarray | None = None,
    chunk: int = 32,
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Both sides of all four identities at the sample points."""
    g = E.grid
    check_resolvable(kernel, g)
    if F.grid != g:
        raise ConfigurationError("E and F live on different grids")
    pts = _sample_points(g) if points is None else np.atleast_2d(points)
    me, mf = ModalField(E), ModalField(F)
    k = np.concatenate([me.k, mf.k])
    cols_e, cols_f = me.components(), mf.components()
    # shared mode list: block-diagonal coefficient matrix
    coef = np.zeros((len(k), 24), dtype=complex)
    coef[: len(me.k), :12] = cols_e
    coef[len(me.k) :, 12:] = cols_f
    base = np.exp(1j * pts @ k.T)  # (P, K)
    at_x = np.real(base @ coef)  # (P, 24)

    r, w_r = kernel.radial_rule(radial_nodes)
    vol = 4.0 * np.pi * r * r * w_r
    phi = kernel.phi_eps(r)
    dphi = kernel.dphi_eps(r)
    P_ = len(pts)
    sums = {name: [np.zeros(P_), np.zeros(P_)] for name in LEMMA22_NAMES}

    def split(vals, m, rr):
        # vals (P, 24, m, rr) -> E, F, GE, GF with [k, j] gradient layout
        e = vals[:, 0:3]
        ge = vals[:, 3:12].reshape(P_, 3, 3, m, rr)
        f = vals[:, 12:15]
        gf = vals[:, 15:24].reshape(P_, 3, 3, m, rr)
        return e, f, ge, gf

    E0, F0, GE0, GF0 = split(at_x[:, :, None, None], 1, 1)
    # rows (p, c) of coefficient * e^{ik.x_p}; one BLAS product per chunk
    weighted = (base[:, None, :] * coef.T[None, :, :]).reshape(P_ * 24, len(k))
    for lo in range(0, len(quad), chunk):
        n = quad.directions[lo : lo + chunk]
        w = quad.weights[lo : lo + chunk]
        m = len(n)
        ell = n[:, None, :] * r[None, :, None]  # (m, R, 3)
        phase = np.exp(1j * np.einsum("mrc,kc->kmr", ell, k)).reshape(len(k), -1)
        vals = np.real(weighted @ phase).reshape(P_, 24, m, len(r))
        E1, F1, GE1, GF1 = split(vals, m, len(r))
        res = _lemma22_integrands(
            E0, F0, GE0, GF0, E1, F1, GE1, GF1, n.T[None, :, :, None], r, phi, dphi
        )
        wt = w[:, None] * vol[None, :]
        for name, (lhs, rhs) in res.items():
            sums[name][0] += lhs.reshape(P_, -1) @ wt.ravel()
            sums[name][1] += rhs.reshape(P_, -1) @ wt.ravel()
    return {name: (v[0], v[1]) for name, v in sums.items()}


def _report(name, lhs, rhs, resolution) -> IdentityReport:
    diff = np.abs(lhs - rhs)
    res = float(np.max(diff / (1.0 + np.abs(lhs) + np.abs(rhs))))
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    rel = float(np.max(diff)) / scale if scale > 0 else float(np.max(diff))
    return IdentityReport(name, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))), res, resolution, rel)


def check_lemma22(
    which: str | None,
    E: VectorField,
    F: VectorField,
    kernel: RadialKernel,
    quad: DirectionQuadrature,
    radial_nodes: int = 32,
    points: np.ndarray | None = None,
) -> IdentityReport | list[IdentityReport]:
    """Residuals of the four shell-integral identities over the sample points.

    ``relative_residual`` is max_x |lhs - rhs| / max(max_x |lhs|, max_x |rhs|)
    and is the gated quantity; ``residual`` is the pointwise mixed form
    max_x |lhs - rhs| / (1 + |lhs| + |rhs|), kept for small-field diagnostics.

    ``which`` is one of "2.16" .. "2.19", or None for all four.  The
    identities rely on div E = 0; a divergent E is rejected.
    """
    if which is not None and which not in LEMMA22_NAMES:
        raise ConfigurationError(f"unknown identity {which!r}; choose from {LEMMA22_NAMES}")
    if divergence_residual(E) > 1e-10:
        raise PreconditionError(f"check_lemma22 needs a solenoidal E: div residual {divergence_residual(E):.3e}")
    sides = lemma22_sides(E, F, kernel, quad, radial_nodes, points)
    resolution = {
        "directions": len(quad),
        "direction_set": quad.name,
        "radial_nodes": radial_nodes,
        "epsilon": kernel.epsilon,
        "profile": kernel.profile,
        "n": E.grid.n,
    }
    reports = [_report(name, *sides[name], resolution) for name in LEMMA22_NAMES]
    if which is None:
        return reports
    return reports[LEMMA22_NAMES.index(which)]


# --- nonlinear-term rewrites ----------------------------------------------


def exact_product_hat(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectrum of the pointwise product a*b (scalars), free of aliasing.

    Both factors are zero-padded to a 2n grid, multiplied there, and the
    result is truncated back, so every retained coefficient is exact.
    """
    n = grid.n
    m = 2 * n
    big = Grid(m)

    def pad(c):
        out = np.zeros(big.spectral_shape, dtype=complex)
        h = n // 2
        out[:h, :h, : h + 1] = c[:h, :h]
        out[:h, -h:, : h + 1] = c[:h, -h:]
        out[-h:, :h, : h + 1] = c[-h:, :h]
        out[-h:, -h:, : h + 1] = c[-h:, -h:]
        return out

    ca, cb = fft(a) * grid.nyquist_free, fft(b) * grid.nyquist_free
    prod = fft(ifft(pad(ca), m) * ifft(pad(cb), m))
    h = n // 2
    out = np.zeros(grid.spectral_shape, dtype=complex)
    out[:h, :h] = prod[:h, :h, : h + 1]
    out[:h, -h:] = prod[:h, -h:, : h + 1]
    out[-h:, :h] = prod[-h:, :h, : h + 1]
    out[-h:, -h:] = prod[-h:, -h:, : h + 1]
    return out * grid.nyquist_free


def hall_rewrite_forms(b: VectorField) -> dict[str, np.ndarray]:
    """Spectra of curl(J x b), div(b J) - div(J b) and curl(div(b b))."""
    g = b.grid
    bh = fft(b.data) * g.nyquist_free
    J = ifft(curl_hat(bh, g), g.n)
    bd = ifft(bh, g.n)
    d = ik(g)

    def prod(x, y):
        return exact_product_hat(x, y, g)

    cross = np.stack(
        [
            prod(J[1], bd[2]) - prod(J[2], bd[1]),
            prod(J[2], bd[0]) - prod(J[0], bd[2]),
            prod(J[0], bd[1]) - prod(J[1], bd[0]),
        ]
    )
    form_curl = curl_hat(cross, g)
    # [div(X Y)]_j = d_i (X_i Y_j)
    div_bJ = np.stack([sum(d[i] * prod(bd[i], J[j]) for i in range(3)) for j in range(3)])
    div_Jb = np.stack([sum(d[i] * prod(J[i], bd[j]) for i in range(3)) for j in range(3)])
    div_bb = np.stack([sum(d[i] * prod(bd[i], bd[j]) for i in range(3)) for j in range(3)])
    return {
        "curl(Jxb)": form_curl,
        "div(bJ)-div(Jb)": div_bJ - div_Jb,
        "curl(div(bb))": curl_hat(div_bb, g),
    }


def check_hall_rewrites(b: VectorField, rtol: float = 1e-10) -> list[IdentityReport]:
    """Pairwise max-norm residuals in grid space, relative to the largest form."""
    res = divergence_residual(b)
    if res > rtol:
        raise PreconditionError(f"check_hall_rewrites needs a solenoidal b: div residual {res:.3e}")
    forms = {k: ifft(v, b.grid.n) for k, v in hall_rewrite_forms(b).items()}
    names = list(forms)
    norms = {k: float(np.max(np.abs(v))) for k, v in forms.items()}
    # scale: |J||b| times the largest wavenumber, the natural size of each form
    bh = fft(b.data)
    kmax = float(np.sqrt(np.max(b.grid.k2 * (np.max(np.abs(bh), axis=0) > 1e-14 * max(np.abs(bh).max(), 1e-300)))))
    J = ifft(curl_hat(bh, b.grid), b.grid.n)
    scale = max(max(norms.values()), float(np.max(np.abs(J))) * b.max_norm() * kmax)
    out = []
    for i in range(3):
        for j in range(i + 1, 3):
            a, c = names[i], names[j]
            diff = float(np.max(np.abs(forms[a] - forms[c])))
            out.append(
                IdentityReport(
                    f"{a} = {c}",
                    norms[a],
                    norms[c],
                    diff / scale if scale > 0 else diff,
                    {"n": b.grid.n, "scale": scale},
                )
            )
    return out
