"""Membrane and bending strains and covariant derivatives.

All kernels take displacement components ``u = [u₁, u₂]`` and the
deflection ``w`` as jets (any common batch shape) together with a
:class:`~koiter_dg.geometry.GeometryEval` at the same points.  The order of
each result is the smallest order the inputs support, so the same code
serves basis functions, finite element fields and closed-form exact
solutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fe_space import LocalBasis
from .geometry import GeometryEval
from .jets import Jet

IDX = (0, 1)


def _sym(f):
    """Symmetric nested list from a function of (α, β) evaluated for α ≤ β."""
    t11, t12, t22 = f(0, 0), f(0, 1), f(1, 1)
    return [[t11, t12], [t12, t22]]


def cov_deriv_vector(u, g: GeometryEval):
    """``u_{α|β} = ∂_β u_α − Γ^γ_{αβ} u_γ`` as ``[α][β]``."""
    ch = g.chris
    return [[u[a].d(b) - ch[0][a][b] * u[0] - ch[1][a][b] * u[1] for b in IDX] for a in IDX]


def cov_hessian(w: Jet, g: GeometryEval):
    """``(∂_α w)|_β = ∂²_{αβ} w − Γ^γ_{αβ} ∂_γ w`` as a symmetric nested list."""
    dw = [w.d(0), w.d(1)]
    ch = g.chris
    return _sym(lambda a, b: dw[a].d(b) - ch[0][a][b] * dw[0] - ch[1][a][b] * dw[1])


def membrane_strain_jets(u, w, g: GeometryEval):
    """``γ_{αβ} = ½(u_{α|β} + u_{β|α}) − b_{αβ} w``."""
    ucd = cov_deriv_vector(u, g)
    return _sym(lambda a, b: 0.5 * (ucd[a][b] + ucd[b][a]) - g.b_cov[a][b] * w)


def bending_strain_jets(u, w, g: GeometryEval):
    """``ρ_{αβ}`` of the linear Koiter model."""
    if g.b_mix_cd is None:
        raise ValueError("bending strain needs geometry evaluated with order >= 1")
    ucd = cov_deriv_vector(u, g)
    hess = cov_hessian(w, g)
    bm, bcd = g.b_mix, g.b_mix_cd

    def comp(a, b):
        t = hess[a][b] - g.c_cov[a][b] * w
        for c in IDX:
            t = t + bcd[c][a][b] * u[c] + bm[c][a] * ucd[c][b] + bm[c][b] * ucd[c][a]
        return t

    return _sym(comp)


def cov_deriv_tensor(t, g: GeometryEval):
    """``t_{αβ|γ}`` of a symmetric covariant tensor, as ``[α][β][γ]``."""
    ch = g.chris
    out = [[[None, None], [None, None]], [[None, None], [None, None]]]
    for a in IDX:
        for b in IDX:
            if b < a:
                continue
            for c in IDX:
                v = t[a][b].d(c)
                for lm in IDX:
                    v = v - ch[lm][c][a] * t[lm][b] - ch[lm][c][b] * t[a][lm]
                out[a][b][c] = v
                out[b][a][c] = v
    return out


def cov_deriv2_tensor(t, g: GeometryEval, first=None):
    """``t_{αβ|γδ}`` as ``[α][β][γ][δ]``; ``first`` may pass precomputed ``t_{αβ|γ}``."""
    t1 = cov_deriv_tensor(t, g) if first is None else first
    ch = g.chris
    out = [[[[None] * 2 for _ in IDX] for _ in IDX] for _ in IDX]
    for a in IDX:
        for b in IDX:
            if b < a:
                continue
            for c in IDX:
                for d in IDX:
                    v = t1[a][b][c].d(d)
                    for s in IDX:
                        v = v - ch[s][a][d] * t1[s][b][c] - ch[s][b][d] * t1[a][s][c] - ch[s][c][d] * t1[a][b][s]
                    out[a][b][c][d] = v
                    out[b][a][c][d] = v
    return out


def cov_deriv_contra(s, g: GeometryEval):
    """``s^{αβ}|_γ`` of a symmetric contravariant tensor, as ``[α][β][γ]``."""
    ch = g.chris
    out = [[[None, None], [None, None]], [[None, None], [None, None]]]
    for a in IDX:
        for b in IDX:
            if b < a:
                continue
            for c in IDX:
                v = s[a][b].d(c)
                for lm in IDX:
                    v = v + ch[a][c][lm] * s[lm][b] + ch[b][c][lm] * s[a][lm]
                out[a][b][c] = v
                out[b][a][c] = v
    return out


def divergence_contra(s, g: GeometryEval):
    """``s^{αβ}|_β`` as ``[α]``."""
    d = cov_deriv_contra(s, g)
    return [d[a][0][0] + d[a][1][1] for a in IDX]


# ---------------------------------------------------------------------------
# local fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalField:
    """Displacement and deflection on one triangle in a local basis.

    Parameters
    ----------
    u_basis, w_basis : LocalBasis
    u_coeffs : ndarray, shape (2, nb_u)
    w_coeffs : ndarray, shape (nb_w,)
    """

    u_basis: LocalBasis
    w_basis: LocalBasis
    u_coeffs: np.ndarray
    w_coeffs: np.ndarray

    def jets(self, x, order: int):
        bu = self.u_basis.jets(x, order)
        bw = self.w_basis.jets(x, order)
        u = [Jet(bu.c @ self.u_coeffs[a], order) for a in IDX]
        w = Jet(bw.c @ self.w_coeffs, order)
        return u, w


def _fields(f, g: GeometryEval, order: int):
    if isinstance(f, LocalField):
        if g.points is None:
            raise ValueError("geometry carries no points to evaluate the local field at")
        return f.jets(g.points, order)
    u, w = f
    return list(u), w


def membrane_strain(f, g: GeometryEval):
    """Membrane strain values ``γ_{αβ}``, array of shape ``(2, 2, *points)``.

    ``f`` is a :class:`LocalField` or a pair ``(u, w)`` of jets.
    """
    u, w = _fields(f, g, 1)
    return _values(membrane_strain_jets(u, w, g), 2)


def bending_strain(f, g: GeometryEval):
    """Bending strain values ``ρ_{αβ}``, array of shape ``(2, 2, *points)``."""
    u, w = _fields(f, g, 2)
    return _values(bending_strain_jets(u, w, g), 2)


def strain_covderiv(f, g: GeometryEval, order: int = 1):
    """``ρ_{αβ|γ}`` (order 1) or ``ρ_{αβ|γδ}`` (order 2) values.

    The geometry must carry ``order + 1`` derivatives of its coefficients.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    u, w = _fields(f, g, order + 2)
    rho = bending_strain_jets(u, w, g)
    first = cov_deriv_tensor(rho, g)
    if order == 1:
        return _values(first, 3)
    return _values(cov_deriv2_tensor(rho, g, first), 4)


def _values(t, depth):
    if depth == 0:
        return np.asarray(t.val if isinstance(t, Jet) else t)
    return np.stack([_values(s, depth - 1) for s in t])
