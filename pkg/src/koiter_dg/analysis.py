"""Error norms, interpolation operators, manufactured solutions and reports."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import jets
from .assembly import (
    BasisField,
    CoefficientField,
    CoefficientStress,
    DifferenceField,
    DifferenceStress,
    ExactField,
    ExactStress,
    FormContext,
    Loads,
    P1StressBasis,
    assemble_a,
    assemble_b,
    assemble_c,
    assemble_gram_ah,
    assemble_gram_hh,
    assemble_gram_vh,
    assemble_load,
    default_penalty,
)
from .errors import DifferentiationToleranceExceeded, SingularMomentMatrix
from .fe_space import FESpace, monomial_values, quadrature
from .geometry import (
    Chart,
    ElasticModuli,
    apply_elastic,
    eval_geometry,
    geometry_seminorms,
    make_chart,
)
from .jets import Jet
from .mesh import Mesh, frame_jets
from .solver import FieldCoefficients, weak_seminorm
from .strains import (
    bending_strain_jets,
    cov_deriv2_tensor,
    cov_deriv_tensor,
    divergence_contra,
    membrane_strain_jets,
)

IDX = (0, 1)
ERROR_QUAD_DEGREE = 12
SEMINORM_FLOOR = 1e-12  # sampled geometry seminorms below this are round-off


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def gram_norm(x: np.ndarray, g: sp.spmatrix) -> float:
    """``√(xᵀ G x)``."""
    return float(np.sqrt(max(x @ (g @ x), 0.0)))


def _self_norm(assembler, ctx, fld) -> float:
    return float(np.sqrt(max(assembler(ctx, fld, fld).toarray()[0, 0], 0.0)))


def hh_norm(fld, ctx: FormContext) -> float:
    """``‖·‖_{H_h}`` of a single-column field by direct quadrature."""
    return _self_norm(assemble_gram_hh, ctx, fld)


def ah_norm(fld, ctx: FormContext) -> float:
    """Strain-based norm ``‖·‖_{a_h}`` of a single-column field."""
    return _self_norm(assemble_gram_ah, ctx, fld)


def vh_norm(stress, ctx: FormContext) -> float:
    """``‖N‖_{V_h}`` of a single-column stress field."""
    return _self_norm(assemble_gram_vh, ctx, stress)


def weak_stress_seminorm(m: np.ndarray, b: sp.spmatrix, g_hh: sp.spmatrix) -> float:
    """``|N|_{V̄_h} = sup_{(v,z)} b(N; v, z)/‖v, z‖_{H_h}`` for nodal values ``m``."""
    return weak_seminorm(np.asarray(m, dtype=float), b, g_hh)


def l2_errors(fld, ctx: FormContext) -> dict[str, float]:
    """Coordinate ``L²`` norms of ``u`` and ``w`` of a single-column field."""
    su = sw = 0.0
    for ch in ctx.volume_chunks:
        u, w = fld.volume(ch, 0)
        su += float(np.sum(ch.weights * (u[0].val[..., 0] ** 2 + u[1].val[..., 0] ** 2)))
        sw += float(np.sum(ch.weights * w.val[..., 0] ** 2))
    return {"u": float(np.sqrt(su)), "w": float(np.sqrt(sw))}


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------


def _edge_points(mesh: Mesh, elems: np.ndarray, local: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Points at parameters ``t`` along local edge ``local`` of each triangle."""
    tri = mesh.triangles[elems]
    va = mesh.vertices[tri[np.arange(len(elems)), (local + 1) % 3]]
    vb = mesh.vertices[tri[np.arange(len(elems)), (local + 2) % 3]]
    return va[:, None, :] + t[None, :, None] * (vb - va)[:, None, :]


def _u_size(space: FESpace, elems) -> np.ndarray:
    return space.dofmap.n_u[elems]


def moment_system(space: FESpace, elems: np.ndarray, fieldname: str, fn: Callable | None = None, degree: int = ERROR_QUAD_DEGREE):
    """Moment matrices defining the local interpolants.

    For ``fieldname="w"`` the conditions are the ``√a``-weighted moments
    against all cubics.  For ``"u"`` they are the weighted moments against
    quadratics plus, on each free edge (at most two), the ``√a``-weighted
    moments against ``1`` and the centred edge parameter.

    Parameters
    ----------
    space : FESpace
    elems : ndarray
        Triangles sharing one local basis size.
    fieldname : {"u", "w"}
    fn : callable, optional
        ``fn(x) -> (..., ncomp)`` target values; ``ncomp`` is 2 for ``u``.

    Returns
    -------
    gram : ndarray, shape (ne, nb, nb)
        Moment of every basis function against every test function.
    rhs : ndarray, shape (ne, nb, ncomp) or None
    """
    mesh, chart = space.mesh, space.chart
    elems = np.asarray(elems)
    nb = 10 if fieldname == "w" else int(_u_size(space, elems[:1])[0])
    if fieldname == "u" and np.any(_u_size(space, elems) != nb):
        raise ValueError("all triangles must share one displacement species")
    rule = quadrature("triangle", degree)
    pts = rule.map_triangle(mesh.elem_vertices[elems])
    g = eval_geometry(chart, pts, order=0)
    wts = mesh.area[elems][:, None] * rule.weights[None, :] * g.sqrt_a.val
    cu, cw = space.basis_jets(elems, pts, 0)
    phi = (cw if fieldname == "w" else cu)[0][..., :nb]
    xi = (pts - space.center[elems][:, None, :]) / space.h[elems][:, None, None]
    ntest = 10 if fieldname == "w" else 6
    tests = monomial_values(xi)[..., :ntest]
    gram = [np.einsum("eqi,eqj,eq->eij", tests, phi, wts)]
    rhs = []
    if fn is not None:
        vals = np.asarray(fn(pts), dtype=float).reshape(pts.shape[:2] + (-1,))
        rhs.append(np.einsum("eqi,eqc,eq->eic", tests, vals, wts))
    if fieldname == "u" and nb > 6:
        erule = quadrature("edge", degree)
        t = erule.points
        nfree = (nb - 6) // 2
        for k in range(nfree):
            local = np.array([space.free_edge(e)[k] for e in elems])
            ep = _edge_points(mesh, elems, local, t)
            ge = eval_geometry(chart, ep, order=0)
            tri = mesh.triangles[elems]
            va = mesh.vertices[tri[np.arange(len(elems)), (local + 1) % 3]]
            vb = mesh.vertices[tri[np.arange(len(elems)), (local + 2) % 3]]
            length = np.linalg.norm(vb - va, axis=1)
            ew = length[:, None] * erule.weights[None, :] * ge.sqrt_a.val
            etest = np.stack([np.ones_like(ew), np.broadcast_to(t - 0.5, ew.shape)], axis=-1)
            ecu, _ = space.basis_jets(elems, ep, 0)
            gram.append(np.einsum("eqi,eqj,eq->eij", etest, ecu[0][..., :nb], ew))
            if fn is not None:
                ev = np.asarray(fn(ep), dtype=float).reshape(ep.shape[:2] + (-1,))
                rhs.append(np.einsum("eqi,eqc,eq->eic", etest, ev, ew))
    gram = np.concatenate(gram, axis=1)
    return gram, (np.concatenate(rhs, axis=1) if fn is not None else None)


def _solve_moments(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(gram)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e12):
        raise SingularMomentMatrix(f"moment matrix condition number {np.max(cond):.3e}")
    return np.linalg.solve(gram, rhs)


def _values_fn(fld: ExactField, which: str) -> Callable:
    def fn(x):
        u, w = fld.at(None, x, 0)
        if which == "w":
            return w.val[..., 0][..., None]
        return np.stack([u[0].val[..., 0], u[1].val[..., 0]], axis=-1)

    return fn


def interpolate_deflection(w_exact: Callable, space: FESpace, elems=None) -> np.ndarray:
    """Local cubic interpolants ``w^I`` with vanishing weighted cubic moments.

    Parameters
    ----------
    w_exact : callable
        ``w_exact(x) -> values`` at points ``x`` of shape ``(..., 2)``.
    space : FESpace
    elems : array_like, optional
        Triangles to interpolate on (default all).

    Returns
    -------
    ndarray, shape (ne, 10)
        Coefficients in the local deflection bases.
    """
    elems = np.arange(space.mesh.n_elements) if elems is None else np.asarray(elems)
    gram, rhs = moment_system(space, elems, "w", w_exact)
    return _solve_moments(gram, rhs)[..., 0]


def interpolate_displacement(u_exact: Callable, space: FESpace, elems=None) -> list[np.ndarray]:
    """Local ``P2``/``P3*``/``P3`` interpolants ``u^I_α``.

    Returns one ``(2, n_u)`` coefficient array per requested triangle.
    """
    elems = np.arange(space.mesh.n_elements) if elems is None else np.asarray(elems)
    out: list[np.ndarray | None] = [None] * len(elems)
    sizes = _u_size(space, elems)
    for nb in np.unique(sizes):
        sel = np.flatnonzero(sizes == nb)
        gram, rhs = moment_system(space, elems[sel], "u", u_exact)
        coef = _solve_moments(gram, rhs)
        for k, i in enumerate(sel):
            out[i] = coef[k].T
    return out


def interpolate(exact: ExactField, space: FESpace) -> np.ndarray:
    """Global coefficient vector of the interpolant ``(u^I, w^I)``."""
    l2g = space.dofmap.local_to_global
    x = np.zeros(space.ndof)
    cw = interpolate_deflection(_values_fn(exact, "w"), space)
    x[l2g[:, 20:30]] = cw
    cu = interpolate_displacement(_values_fn(exact, "u"), space)
    for e, c in enumerate(cu):
        nb = c.shape[1]
        x[l2g[e, :nb]] = c[0]
        x[l2g[e, 10 : 10 + nb]] = c[1]
    return x


def interpolation_defects(exact: ExactField, space: FESpace, x: np.ndarray, elems=None) -> dict[str, float]:
    """Largest relative moment residual of the interpolant ``x`` per field."""
    elems = np.arange(space.mesh.n_elements) if elems is None else np.asarray(elems)
    l2g = space.dofmap.local_to_global
    out = {}
    gram, rhs = moment_system(space, elems, "w", _values_fn(exact, "w"))
    r = np.einsum("eij,ej->ei", gram, x[l2g[elems, 20:30]]) - rhs[..., 0]
    out["w"] = float(np.max(np.abs(r)) / max(np.max(np.abs(rhs)), 1e-300))
    sizes = _u_size(space, elems)
    worst = 0.0
    for nb in np.unique(sizes):
        sel = elems[sizes == nb]
        gram, rhs = moment_system(space, sel, "u", _values_fn(exact, "u"))
        c = np.stack([x[l2g[sel, :nb]], x[l2g[sel, 10 : 10 + nb]]], axis=-1)
        r = np.einsum("eij,ejc->eic", gram, c) - rhs
        worst = max(worst, float(np.max(np.abs(r)) / max(np.max(np.abs(rhs)), 1e-300)))
    out["u"] = worst
    return out


def p1_mass(ctx: FormContext, weighted: bool = True) -> sp.csr_matrix:
    """Scalar P1 mass matrix, optionally weighted by ``√a``."""
    basis = P1StressBasis(ctx.mesh)
    nv = ctx.mesh.n_vertices
    rows, cols, vals = [], [], []
    for ch in ctx.volume_chunks:
        lam = basis.hats(ch.elems, ch.points)
        w = ch.weights * (ch.sqrt_a if weighted else 1.0)
        loc = np.einsum("eqi,eqj,eq->eij", lam, lam, w)
        tri = ctx.mesh.triangles[ch.elems]
        rows.append(np.repeat(tri, 3, axis=1).ravel())
        cols.append(np.tile(tri, (1, 3)).ravel())
        vals.append(loc.ravel())
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nv, nv)).tocsr()


def project_stress(stress, ctx: FormContext) -> np.ndarray:
    """``√a``-weighted ``L²`` projection onto continuous P1, componentwise.

    Parameters
    ----------
    stress : ExactStress or callable
        Callable form: ``stress(x) -> [[M¹¹, M¹²], [M²¹, M²²]]``.

    Returns
    -------
    ndarray, shape (3·n_vertices,)
    """
    if not isinstance(stress, (ExactStress, CoefficientStress)):
        stress = ExactStress(stress)
    basis = P1StressBasis(ctx.mesh)
    nv = ctx.mesh.n_vertices
    rhs = np.zeros((nv, 3))
    for ch in ctx.volume_chunks:
        lam = basis.hats(ch.elems, ch.points)
        vals = stress.values(ch.elems, ch.points)
        comps = np.stack([vals[0][0][..., 0], vals[1][1][..., 0], vals[0][1][..., 0]], axis=-1)
        loc = np.einsum("eqi,eqc,eq->eic", lam, comps, ch.weights * ch.sqrt_a)
        np.add.at(rhs, ctx.mesh.triangles[ch.elems], loc)
    lu = spla.splu(sp.csc_matrix(p1_mass(ctx)))
    return lu.solve(rhs).reshape(-1)


def key_orthogonality_check(ctx: FormContext, exact: ExactField, x_interp: np.ndarray | None = None) -> dict[str, float]:
    """Size of ``b(N; u − u^I, w − w^I)`` over the stress space.

    Returns
    -------
    dict
        ``defect``: ``sup_N |b(N; e)|/‖N‖_{V_h}`` with ``e`` the interpolation
        error; ``scale``: ``[Σ h⁻²|u−u^I|² + h⁻⁴|w−w^I|²]^{1/2}``;
        ``normalized``: their ratio.
    """
    space = ctx.space
    xi = interpolate(exact, space) if x_interp is None else x_interp
    err = DifferenceField(exact, CoefficientField(space, xi))
    r = assemble_b(ctx, trial=err).toarray()[:, 0]
    gv = assemble_gram_vh(ctx)
    defect = float(np.sqrt(max(r @ spla.splu(sp.csc_matrix(gv)).solve(r), 0.0)))
    h = space.h
    s = 0.0
    for ch in ctx.volume_chunks:
        u, w = err.volume(ch, 0)
        he = h[ch.elems][:, None]
        uu = u[0].val[..., 0] ** 2 + u[1].val[..., 0] ** 2
        s += float(np.sum(ch.weights * (uu / he**2 + w.val[..., 0] ** 2 / he**4)))
    scale = float(np.sqrt(s))
    return {"defect": defect, "scale": scale, "normalized": defect / scale if scale > 0 else 0.0}


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------


def _zero(x1, x2):
    return 0.0 * x1


def _as_jet(c, like: Jet) -> Jet:
    if isinstance(c, Jet):
        return c
    return jets.constant(np.broadcast_to(np.asarray(c, dtype=float), like.shape), like.order)


@dataclass
class ManufacturedCase:
    """Closed-form solution ``(u, w, M)`` with loads from the strong form.

    The exact fields are ``u = u⁰ + ε² u¹`` and ``w = w⁰ + ε² w¹`` and the
    stress is ``M = ε⁻² a γ(u⁰, w⁰) + a γ(u¹, w¹)``, evaluated part by part
    so that an inextensional leading part does not lose accuracy for
    small ``ε``.  Each field function takes coordinate jets ``(x1, x2)``
    and is written with :mod:`koiter_dg.jets` functions.

    Attributes
    ----------
    name : str
    chart : Chart
    moduli : ElasticModuli
    eps : float
    u0, w0 : callable
        Leading part; ``u0`` returns a pair.
    u1, w1 : callable
        Part scaled by ``ε²``.
    markers : dict
        Intended boundary markers of the unit square sides.
    """

    name: str
    chart: Chart
    moduli: ElasticModuli
    eps: float
    u0: Callable
    w0: Callable
    u1: Callable | None = None
    w1: Callable | None = None
    markers: dict = field(default_factory=lambda: dict(left="D", right="D", top="D", bottom="D"))

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    # -- fields -----------------------------------------------------------
    def _parts(self, x1: Jet, x2: Jet):
        u0 = [_as_jet(c, x1) for c in self.u0(x1, x2)]
        w0 = _as_jet(self.w0(x1, x2), x1)
        u1 = [_as_jet(c, x1) for c in (self.u1 or (lambda a, b: (_zero(a, b), _zero(a, b))))(x1, x2)]
        w1 = _as_jet(self.w1(x1, x2) if self.w1 else _zero(x1, x2), x1)
        return (u0, w0), (u1, w1)

    def _combined(self, x1, x2):
        (u0, w0), (u1, w1) = self._parts(x1, x2)
        e2 = self.eps**2
        return (u0[0] + e2 * u1[0], u0[1] + e2 * u1[1]), w0 + e2 * w1

    def field(self) -> ExactField:
        return ExactField(lambda a, b: self._combined(a, b)[0], lambda a, b: self._combined(a, b)[1])

    def _coords(self, x, order):
        x = np.asarray(x, dtype=float)
        return jets.variable(x[..., 0], 0, order), jets.variable(x[..., 1], 1, order)

    def _stress_jets(self, g, parts):
        (u0, w0), (u1, w1) = parts
        m0 = apply_elastic(g.a_con, membrane_strain_jets(u0, w0, g), self.moduli)
        m1 = apply_elastic(g.a_con, membrane_strain_jets(u1, w1, g), self.moduli)
        s = 1.0 / self.eps**2
        return [[s * m0[a][b] + m1[a][b] for b in IDX] for a in IDX]

    def stress_values(self, x) -> list[list[np.ndarray]]:
        """``M^{αβ}`` at points ``x``."""
        g = eval_geometry(self.chart, x, order=0)
        parts = self._parts(*self._coords(x, 1))
        m = self._stress_jets(g, parts)
        return [[m[a][b].val for b in IDX] for a in IDX]

    def stress(self) -> ExactStress:
        return ExactStress(self.stress_values)

    # -- loads ------------------------------------------------------------
    def volume_loads(self, x) -> np.ndarray:
        """``(p¹, p², p³)`` at points ``x`` from the strong form."""
        x = np.asarray(x, dtype=float)
        mod = self.moduli
        g = eval_geometry(self.chart, x, order=3)
        x1, x2 = self._coords(x, 4)
        parts = self._parts(x1, x2)
        u, w = self._sum(parts)
        rho = bending_strain_jets(u, w, g)
        gam = membrane_strain_jets(u, w, g)
        ncon = apply_elastic(g.a_con, rho, mod)
        mcon = apply_elastic(g.a_con, gam, mod)
        mm = self._stress_jets(g, parts)
        acv = [[g.a_con[a][b].val for b in IDX] for a in IDX]
        drho = cov_deriv_tensor(rho, g)
        ddrho = cov_deriv2_tensor(rho, g, drho)
        dgam = cov_deriv_tensor(gam, g)

        def el(t):
            return apply_elastic(acv, [[t[a][b].val for b in IDX] for a in IDX], mod)

        wv = [0.0, 0.0]
        eg = [0.0, 0.0]
        lap = 0.0
        for c in IDX:
            s_rho = el([[drho[a][b][c] for b in IDX] for a in IDX])
            s_gam = el([[dgam[a][b][c] for b in IDX] for a in IDX])
            for a in IDX:
                wv[a] = wv[a] + s_rho[c][a]
                eg[a] = eg[a] + s_gam[a][c]
            for d in IDX:
                s2 = el([[ddrho[a][b][c][d] for b in IDX] for a in IDX])
                lap = lap + s2[c][d]
        div_m = divergence_contra(mm, g)
        bm, bcd = g.b_mix, g.b_mix_cd
        p = []
        for al in IDX:
            t1 = sum(2.0 * wv[be] * bm[al][be].val for be in IDX)
            t2 = sum(ncon[ga][be].val * bcd[al][ga][be].val for ga in IDX for be in IDX)
            p.append(-(t1 + t2 + eg[al]) / 3.0 - div_m[al].val)
        cn = sum(g.c_cov[a][b].val * ncon[a][b].val for a in IDX for b in IDX)
        bmn = sum(g.b_cov[a][b].val * mcon[a][b].val for a in IDX for b in IDX)
        bM = sum(g.b_cov[a][b].val * mm[a][b].val for a in IDX for b in IDX)
        p.append((lap - cn - bmn) / 3.0 - bM)
        shape = x.shape[:-1]
        return np.stack([np.broadcast_to(np.asarray(c, dtype=float), shape) for c in p])

    def boundary_loads(self, x, direction) -> dict:
        """Boundary data ``q``, ``q3``, ``m`` and ``twist`` at points ``x``.

        ``direction`` is the counterclockwise unit coordinate tangent seen
        from the triangle, shape ``(2, ...)``.
        """
        x = np.asarray(x, dtype=float)
        mod = self.moduli
        g = eval_geometry(self.chart, x, order=2)
        fr = frame_jets(g, np.asarray(direction, dtype=float))
        x1, x2 = self._coords(x, 3)
        parts = self._parts(x1, x2)
        u, w = self._sum(parts)
        rho = bending_strain_jets(u, w, g)
        gam = membrane_strain_jets(u, w, g)
        ncon = apply_elastic(g.a_con, rho, mod)
        acv = [[g.a_con[a][b].val for b in IDX] for a in IDX]
        mcon = apply_elastic(acv, [[gam[a][b].val for b in IDX] for a in IDX], mod)
        mm = self._stress_jets(g, parts)
        drho = cov_deriv_tensor(rho, g)
        ncov = [fr["n_cov"][a].val for a in IDX]
        scon = [fr["s_con"][a].val for a in IDX]
        nv = [[ncon[a][b].val for b in IDX] for a in IDX]
        bm = [[g.b_mix[a][b].val for b in IDX] for a in IDX]
        vvec = [0.0, 0.0]
        for be in IDX:
            s = apply_elastic(acv, [[drho[a][b][be].val for b in IDX] for a in IDX], mod)
            for al in IDX:
                vvec[al] = vvec[al] + s[al][be]
        q = []
        for al in IDX:
            f = 0.0
            for ga in IDX:
                f = f + (mcon[al][ga] + sum(2.0 * nv[ga][be] * bm[al][be] for be in IDX)) * ncov[ga]
            q.append(f / 3.0 + sum(mm[al][be].val * ncov[be] for be in IDX))
        tj = 0.0
        for a in IDX:
            for b in IDX:
                tj = ncon[a][b] * fr["n_cov"][b] * fr["s_cov"][a] + tj
        ds_t = tj.d(0).val * scon[0] + tj.d(1).val * scon[1]
        vn = vvec[0] * ncov[0] + vvec[1] * ncov[1]
        nn = sum(nv[a][b] * ncov[a] * ncov[b] for a in IDX for b in IDX)
        shape = x.shape[:-1]

        def full(v):
            return np.broadcast_to(np.asarray(v, dtype=float), shape)

        return {
            "q": np.stack([full(c) for c in q]),
            "q3": full(-(vn + ds_t) / 3.0),
            "m": full(nn / 3.0),
            "twist": full(tj.val / 3.0),
        }

    def loads(self) -> Loads:
        return Loads(self.volume_loads, self.boundary_loads)

    def _sum(self, parts):
        (u0, w0), (u1, w1) = parts
        e2 = self.eps**2
        return [u0[0] + e2 * u1[0], u0[1] + e2 * u1[1]], w0 + e2 * w1

    # -- checks -----------------------------------------------------------
    def consistency_residual(self, mesh: Mesh, quad_degree: int = ERROR_QUAD_DEGREE, penalty: float | None = None, twist: str = "weak", ctx: FormContext | None = None) -> dict[str, float]:
        """Residual of the exact triple in the discrete equations.

        Returns the max-norm residual of the first block equation relative
        to the load vector (``momentum``), of the second relative to its
        largest term (``constitutive``), and their maximum (``residual``).
        """
        if ctx is None:
            ctx = FormContext(FESpace(mesh, self.chart), self.moduli, quad_degree)
        ex, ms = self.field(), self.stress()
        basis = BasisField(ctx.space)
        cpen = default_penalty(ctx) if penalty is None else penalty
        ax = assemble_a(ctx, cpen, test=basis, trial=ex, twist=twist).toarray()[:, 0]
        btm = assemble_b(ctx, stress=ms, trial=basis).toarray()[0]
        f = assemble_load(ctx, self.loads())
        bx = assemble_b(ctx, trial=ex).toarray()[:, 0]
        cm = self.eps**2 * assemble_c(ctx, trial=ms).toarray()[:, 0]
        r1 = np.abs(ax + btm - f).max() / max(np.abs(f).max(), 1e-300)
        s2 = max(np.abs(bx).max(), np.abs(cm).max())
        r2 = np.abs(bx - cm).max() / s2 if s2 > 0 else 0.0
        return {"momentum": float(r1), "constitutive": float(r2), "residual": float(max(r1, r2))}

    def self_check(self, mesh: Mesh, tol: float = 1e-6, **kwargs) -> float:
        """Raise :class:`DifferentiationToleranceExceeded` if the exact triple is inconsistent."""
        r = self.consistency_residual(mesh, **kwargs)["residual"]
        if not r <= tol:
            raise DifferentiationToleranceExceeded(f"consistency residual {r:.3e} exceeds {tol:.1e}")
        return r


def manufactured_case(chart: Chart, u_exact: Callable, w_exact: Callable, eps: float, moduli: ElasticModuli | None = None, markers: dict | None = None, name: str = "custom") -> ManufacturedCase:
    """Case with exact fields ``(u, w)`` and ``M = ε⁻² a γ(u, w)``."""
    mk = dict(left="D", right="D", top="D", bottom="D") if markers is None else dict(markers)
    return ManufacturedCase(name, chart, moduli or ElasticModuli(), eps, u_exact, w_exact, markers=mk)


# -- named cases ----------------------------------------------------------


def _bubble(x1, x2):
    return x1 * (1.0 - x1) * x2 * (1.0 - x2)


def _clamped_plate(eps, mod, params):
    return ManufacturedCase(
        "clamped_plate",
        make_chart("plane", params),
        mod,
        eps,
        lambda x1, x2: (_zero(x1, x2), _zero(x1, x2)),
        lambda x1, x2: _bubble(x1, x2) ** 2,
    )


def _clamped_free_markers():
    return dict(left="D", right="F", top="F", bottom="F")


def _u1_clamped_left(x1, x2):
    return (x1 * x1 * jets.sin(x2), x1 * x1 * jets.cos(x2))


def _w1_clamped_left(x1, x2):
    return x1 * x1 * jets.cos(x2)


def _plate_clamped_free(eps, mod, params):
    return ManufacturedCase(
        "plate_clamped_free",
        make_chart("plane", params),
        mod,
        eps,
        lambda x1, x2: (_zero(x1, x2), _zero(x1, x2)),
        lambda x1, x2: (1.0 - jets.cos(2.0 * x1)) * jets.exp(0.5 * x2),
        _u1_clamped_left,
        _w1_clamped_left,
        _clamped_free_markers(),
    )


def _plate_polynomial(eps, mod, params):
    # lies in the discrete space: quadratic u, cubic w, linear stress
    return ManufacturedCase(
        "plate_polynomial",
        make_chart("plane", params),
        mod,
        eps,
        lambda x1, x2: (_zero(x1, x2), _zero(x1, x2)),
        lambda x1, x2: x1 * x1 * (1.0 + x2),
        lambda x1, x2: (x1 * x1, x1 * x2),
        lambda x1, x2: x1 * x1 * x2,
        _clamped_free_markers(),
    )


def _cylinder_clamped_free(eps, mod, params):
    # inextensional on the unit cylinder: γ(u⁰, w⁰) = 0 with w⁰ = −∂₁u⁰₁
    def u0(x1, x2):
        c, s = jets.cos(x1), jets.sin(x1)
        g = (1.0 - c) ** 2
        dg = 2.0 * s * (1.0 - c)
        f = s * (1.0 - c)
        return (f - x2 * dg, g)

    def w0(x1, x2):
        c, s = jets.cos(x1), jets.sin(x1)
        ddg = 2.0 * (s * s + c * (1.0 - c))
        df = c * (1.0 - c) + s * s
        return x2 * ddg - df

    return ManufacturedCase(
        "cylinder_clamped_free",
        make_chart("cylinder", params),
        mod,
        eps,
        u0,
        w0,
        _u1_clamped_left,
        _w1_clamped_left,
        _clamped_free_markers(),
    )


def _hypar_clamped_free(eps, mod, params):
    # inextensional bending of z = k x₁x₂ from the 3D field V = (−k x₂ F, B, F)
    # with F = sin²x₁ and B' = k(F − x₁F'); then u₁ = 0 identically
    chart = make_chart("hypar", params)
    k = chart.k

    def parts(x1, x2):
        s2, c2 = jets.sin(2.0 * x1), jets.cos(2.0 * x1)
        f = 0.5 * (1.0 - c2)
        b = k * (0.5 * x1 - 0.5 * s2 + 0.5 * x1 * c2)
        return f, b

    def u0(x1, x2):
        f, b = parts(x1, x2)
        return (_zero(x1, x2), b + k * x1 * f)

    def w0(x1, x2):
        f, b = parts(x1, x2)
        return (k * k * x2 * x2 * f - k * x1 * b + f) / jets.sqrt(1.0 + k * k * (x1 * x1 + x2 * x2))

    return ManufacturedCase(
        "hypar_clamped_free",
        chart,
        mod,
        eps,
        u0,
        w0,
        _u1_clamped_left,
        _w1_clamped_left,
        _clamped_free_markers(),
    )


CASES: dict[str, Callable] = {
    "clamped_plate": _clamped_plate,
    "plate_clamped_free": _plate_clamped_free,
    "plate_polynomial": _plate_polynomial,
    "cylinder_clamped_free": _cylinder_clamped_free,
    "hypar_clamped_free": _hypar_clamped_free,
}


def named_case(name: str, eps: float, moduli: ElasticModuli | None = None, chart_params: dict | None = None) -> ManufacturedCase:
    """Built-in manufactured case by name (see :data:`CASES`)."""
    try:
        factory = CASES[name]
    except KeyError:
        raise KeyError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None
    return factory(float(eps), moduli or ElasticModuli(), dict(chart_params or {}))


# ---------------------------------------------------------------------------
# error reports
# ---------------------------------------------------------------------------


@dataclass
class ErrorReport:
    """Errors of one discrete solution against a manufactured case."""

    h: float
    n_elements: int
    n_dofs: int
    err_Hh: float
    err_ah: float
    rel_Hh: float
    err_u_L2: float
    err_w_L2: float
    err_M_L2: float
    eps_err_M: float
    err_M_weak: float
    eps_err_MI: float
    indicator: float
    timings: dict = field(default_factory=dict)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("timings")
        d.update({f"time_{k}": v for k, v in self.timings.items()})
        return d


def error_report(
    sol: FieldCoefficients,
    case: ManufacturedCase,
    ctx: FormContext,
    b: sp.spmatrix | None = None,
    g_hh: sp.spmatrix | None = None,
    timings: dict | None = None,
    quad_degree: int = ERROR_QUAD_DEGREE,
) -> ErrorReport:
    """Compute every reported error of ``sol``.

    The exact−discrete differences are integrated at ``quad_degree``.  The
    stress errors compare with the exact stress in ``L²`` and, through the
    weak seminorm, with its P1 projection ``M^I``.
    """
    t0 = time.perf_counter()
    space = ctx.space
    mesh = space.mesh
    ectx = FormContext(space, ctx.moduli, quad_degree, ctx.chunk_size)
    ex = case.field()
    diff = DifferenceField(ex, CoefficientField(space, sol.uw))
    err_hh = hh_norm(diff, ectx)
    ref = hh_norm(ex, ectx)
    err_ah = ah_norm(diff, ectx)
    l2 = l2_errors(diff, ectx)
    ms = case.stress()
    dm = DifferenceStress(ms, CoefficientStress(mesh, sol.m))
    err_m = vh_norm(dm, ectx)
    m_i = project_stress(ms, ectx)
    b = assemble_b(ctx) if b is None else b
    g_hh = assemble_gram_hh(ctx) if g_hh is None else g_hh
    weak = weak_seminorm(sol.m - m_i, b, g_hh)
    eps_mi = case.eps * gram_norm(sol.m - m_i, assemble_gram_vh(ctx))
    ind = geometry_indicator(mesh, case.chart, case.eps)["factor"]
    tm = dict(timings or {})
    tm["errors"] = time.perf_counter() - t0
    return ErrorReport(
        h=float(mesh.h_tau.max()),
        n_elements=mesh.n_elements,
        n_dofs=space.ndof + 3 * mesh.n_vertices,
        err_Hh=err_hh,
        err_ah=err_ah,
        rel_Hh=err_hh / ref if ref > 0 else err_hh,
        err_u_L2=l2["u"],
        err_w_L2=l2["w"],
        err_M_L2=err_m,
        eps_err_M=case.eps * err_m,
        err_M_weak=weak,
        eps_err_MI=eps_mi,
        indicator=ind,
        timings=tm,
    )


def geometry_indicator(mesh: Mesh, chart: Chart, eps: float, sample_order: int = 6) -> dict:
    """Bracket ``1 + ε⁻¹ max_τ(h³|Γ|_{2,∞,τ} + h⁵|b|_{3,∞,τ})`` of the error estimate.

    Returns
    -------
    dict
        ``per_element`` values ``h³|Γ|₂ + h⁵|b|₃``, the ``gamma_term`` and
        ``b_term`` arrays, the global ``factor`` and the ``argmax`` triangle.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    verts = mesh.elem_vertices
    h = mesh.h_tau
    gam, bsn = (np.array(v, dtype=float) for v in geometry_seminorms(chart, verts, sample_order))
    gam[gam < SEMINORM_FLOOR] = 0.0
    bsn[bsn < SEMINORM_FLOOR] = 0.0
    gt = h**3 * gam
    bt = h**5 * bsn
    per = gt + bt
    k = int(np.argmax(per))
    return {
        "per_element": per,
        "gamma_term": gt,
        "b_term": bt,
        "factor": float(1.0 + per[k] / eps),
        "argmax": k,
    }
