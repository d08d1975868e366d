"""Assembly of the discrete bilinear forms, the load functional and norm Grams.

Every form is assembled from *fields*: objects that evaluate the
displacement ``u_α`` and deflection ``w`` (or the stress ``M^{αβ}``) as jets
at quadrature points, together with a map from their local columns to
global indices.  The discrete basis is one such field; a closed-form exact
solution is another with a single global column.  Assembling a form
between the basis and an exact field therefore yields the consistency
residual, and assembling a Gram between a difference field and itself
yields the error norm, with no second implementation of any term.

Edge conventions
----------------
Interior edges use the outward covariant normal ``n`` of their first side;
jumps are first side minus second side and averages are arithmetic means.
Boundary edges use the outward normal of their only triangle.  The twist
term on clamped and simply supported edges is integrated in its weak form
``−⅓∫ t(u) D_s z`` by default (``twist="weak"``); ``twist="literal"`` keeps
the tangential derivative on the twisting moment instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import jets
from ._kernels import weighted_outer
from .fe_space import LOCAL_WIDTH, SLOTS, FESpace, quadrature
from .geometry import (
    ElasticModuli,
    GeometryEval,
    apply_elastic,
    elastic_tensor,
    eval_geometry,
    pack_tensor,
    compliance_tensor,
)
from .jets import Jet
from .mesh import frame_jets
from .strains import bending_strain_jets, cov_deriv_tensor, membrane_strain_jets

IDX = (0, 1)
VOIGT_MULT = np.array([1.0, 1.0, 2.0])
TWIST_FORMS = ("weak", "literal")


# ---------------------------------------------------------------------------
# quadrature chunks with cached geometry
# ---------------------------------------------------------------------------


@dataclass
class VolumeChunk:
    elems: np.ndarray
    points: np.ndarray  # (ne, nq, 2)
    weights: np.ndarray  # (ne, nq) coordinate measure
    geom: GeometryEval  # batch (ne, nq, 1)

    @cached_property
    def sqrt_a(self) -> np.ndarray:
        return self.geom.sqrt_a.val[..., 0]


@dataclass
class EdgeChunk:
    kind: str  # "I", "D", "S" or "F"
    edges: np.ndarray
    elems: np.ndarray  # (ned, 2); -1 for the missing second side
    points: np.ndarray  # (ned, nq, 2)
    weights: np.ndarray  # (ned, nq) coordinate arc length
    h: np.ndarray  # (ned,)
    direction: np.ndarray  # (2, ned, nq, 1) counterclockwise for the first side
    geom: GeometryEval  # batch (ned, nq, 1)
    frame: dict = field(default_factory=dict)

    @cached_property
    def w_e(self) -> np.ndarray:
        return self.frame["w_e"].val[..., 0]

    @cached_property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end points in the stored orientation, shape (ned, 2) each."""
        return self.points_at(0.0), self.points_at(1.0)

    def points_at(self, t: float) -> np.ndarray:
        return self._a + t * (self._b - self._a)


class FormContext:
    """Quadrature points and geometry shared by every form on one mesh.

    Parameters
    ----------
    space : FESpace
    moduli : ElasticModuli
    quad_degree : int
        Degree of the triangle and edge rules.
    chunk_size : int
        Number of triangles (edges) per vectorized batch.
    """

    def __init__(self, space: FESpace, moduli: ElasticModuli, quad_degree: int = 10, chunk_size: int = 256):
        self.space = space
        self.mesh = space.mesh
        self.chart = space.chart
        self.moduli = moduli
        self.quad_degree = int(quad_degree)
        self.chunk_size = int(chunk_size)
        self._vol: list[VolumeChunk] | None = None
        self._edges: dict[str, list[EdgeChunk]] = {}

    @property
    def volume_chunks(self) -> list[VolumeChunk]:
        if self._vol is None:
            rule = quadrature("triangle", self.quad_degree)
            mesh = self.mesh
            out = []
            for start in range(0, mesh.n_elements, self.chunk_size):
                el = np.arange(start, min(start + self.chunk_size, mesh.n_elements))
                pts = rule.map_triangle(mesh.elem_vertices[el])
                w = mesh.area[el][:, None] * rule.weights[None, :]
                g = eval_geometry(self.chart, pts[:, :, None, :], order=1)
                out.append(VolumeChunk(el, pts, w, g))
            self._vol = out
        return self._vol

    def edge_chunks(self, kind: str) -> list[EdgeChunk]:
        """Edge batches of one kind: ``"I"`` (interior) or a boundary marker."""
        if kind not in self._edges:
            mesh = self.mesh
            ids = mesh.interior_edges if kind == "I" else mesh.boundary_edges(kind)
            rule = quadrature("edge", self.quad_degree)
            out = []
            for start in range(0, len(ids), self.chunk_size):
                ed = ids[start : start + self.chunk_size]
                a = mesh.vertices[mesh.edges[ed, 0]]
                b = mesh.vertices[mesh.edges[ed, 1]]
                t = rule.points
                pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
                h = mesh.h_e[ed]
                w = h[:, None] * rule.weights[None, :]
                d = (b - a) / h[:, None]
                direction = np.broadcast_to(d.T[:, :, None, None], (2, len(ed), len(t), 1))
                g = eval_geometry(self.chart, pts[:, :, None, :], order=2)
                ch = EdgeChunk(kind, ed, mesh.edge_elems[ed], pts, w, h, direction, g, frame_jets(g, direction))
                ch._a, ch._b = a, b
                out.append(ch)
            self._edges[kind] = out
        return self._edges[kind]

    @cached_property
    def default_penalty_base(self) -> float:
        """Largest operator norm of the elastic tensor over all edge quadrature points."""
        best = 0.0
        for kind in ("I", "D", "S", "F"):
            for ch in self.edge_chunks(kind):
                best = max(best, float(np.max(elastic_operator_norm(ch.geom, self.moduli))))
        if best == 0.0:
            best = float(np.max(elastic_operator_norm(self.volume_chunks[0].geom, self.moduli)))
        return best

    @cached_property
    def curvature_factor(self) -> float:
        """``(1 + L·max|κ|)²`` with ``L`` the mesh diameter and ``κ`` the principal curvatures.

        The curvature terms ``b·∇u`` of the bending strain make the flux of
        a discontinuous ``u`` scale like its ``h⁻¹`` penalty, so the
        penalty must grow with the curvature independently of ``h``.
        """
        kmax = 0.0
        for kind in ("I", "D", "S", "F"):
            for ch in self.edge_chunks(kind):
                bm = np.moveaxis(ch.geom.curvature_mixed, (0, 1), (-2, -1))
                kmax = max(kmax, float(np.abs(np.linalg.eigvals(bm)).max(initial=0.0)))
        v = self.mesh.vertices
        diam = float(np.linalg.norm(v.max(axis=0) - v.min(axis=0)))
        return (1.0 + diam * kmax) ** 2


DEFAULT_PENALTY_FACTOR = 10.0
# (k+1)(k+2)/2 for cubic traces; without it the factor 10 alone is not coercive
TRACE_INVERSE_FACTOR = 10.0


def elastic_operator_norm(geom: GeometryEval, moduli: ElasticModuli) -> np.ndarray:
    """Largest eigenvalue of ``a^{αβγδ}`` acting on symmetric tensors (Frobenius pairing)."""
    d = pack_tensor(elastic_tensor(geom, moduli), "elastic")
    s = np.array([1.0, 1.0, np.sqrt(2.0)])
    mandel = np.moveaxis(d, (0, 1), (-2, -1)) * (s[:, None] * s[None, :])
    return np.linalg.eigvalsh(mandel)[..., -1]


def default_penalty(ctx: FormContext, factor: float = 1.0) -> float:
    """Default penalty ``C_pen = 10·c_k·max‖a^{αβγδ}‖·(1 + L·max|κ|)²`` scaled by ``factor``.

    ``c_k = (k+1)(k+2)/2 = 10`` is the cubic trace-inverse factor and the
    last factor is :attr:`FormContext.curvature_factor`.  On flat charts,
    measured coercivity thresholds sit at 20 to 55 times ``max‖a‖``; curved
    charts with two free edges meeting at a corner need up to 300 times.
    """
    return factor * DEFAULT_PENALTY_FACTOR * TRACE_INVERSE_FACTOR * ctx.default_penalty_base * ctx.curvature_factor


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


class BasisField:
    """The broken finite element basis: one column per local slot."""

    def __init__(self, space: FESpace):
        self.space = space
        self.size = space.ndof

    def _jets(self, elems, points, order):
        cu, cw = self.space.basis_jets(elems, points, order)
        k = cu.shape[0]
        shape = cu.shape[1:-1] + (LOCAL_WIDTH,)
        u1 = np.zeros((k,) + shape)
        u2 = np.zeros((k,) + shape)
        w = np.zeros((k,) + shape)
        u1[..., :SLOTS] = cu
        u2[..., SLOTS : 2 * SLOTS] = cu
        w[..., 2 * SLOTS :] = cw
        return [Jet(u1, order), Jet(u2, order)], Jet(w, order)

    def volume(self, chunk: VolumeChunk, order: int):
        return self._jets(chunk.elems, chunk.points, order)

    def edge(self, chunk: EdgeChunk, side: int, order: int):
        return self._jets(chunk.elems[:, side], chunk.points, order)

    def at(self, elems, points, order):
        return self._jets(elems, points, order)

    def dofs(self, elems) -> np.ndarray:
        return self.space.dofmap.local_to_global[elems]


class ExactField:
    """Closed-form ``(u, w)`` given as functions of coordinate jets.

    Parameters
    ----------
    u : callable
        ``u(x1, x2) -> (u1, u2)`` using :mod:`koiter_dg.jets` functions.
    w : callable
        ``w(x1, x2) -> w``.
    """

    size = 1

    def __init__(self, u: Callable, w: Callable):
        self.u_fn = u
        self.w_fn = w

    def at(self, elems, points, order):
        x = np.asarray(points, dtype=float)[..., None, :]
        x1 = jets.variable(x[..., 0], 0, order)
        x2 = jets.variable(x[..., 1], 1, order)
        u = [_as_jet(c, x1) for c in self.u_fn(x1, x2)]
        return u, _as_jet(self.w_fn(x1, x2), x1)

    def volume(self, chunk, order):
        return self.at(chunk.elems, chunk.points, order)

    def edge(self, chunk, side, order):
        return self.at(None, chunk.points, order)

    def dofs(self, elems) -> np.ndarray:
        return np.zeros((len(elems), 1), dtype=np.int64)


def _as_jet(c, like: Jet) -> Jet:
    if isinstance(c, Jet):
        if c.shape != like.shape:
            c = Jet(np.broadcast_to(c.c, c.c.shape[:1] + like.shape).copy(), c.order)
        return c
    return jets.constant(np.broadcast_to(np.asarray(c, dtype=float), like.shape), like.order)


class CoefficientField:
    """A finite element function given by a global coefficient vector."""

    size = 1

    def __init__(self, space: FESpace, coeffs: np.ndarray):
        self.basis = BasisField(space)
        x = np.asarray(coeffs, dtype=float)
        if x.shape != (space.ndof,):
            raise ValueError(f"expected {space.ndof} coefficients, got shape {x.shape}")
        self.coeffs = np.concatenate([x, [0.0]])

    def at(self, elems, points, order):
        u, w = self.basis.at(elems, points, order)
        loc = self.coeffs[self.basis.dofs(elems)]  # -1 maps to the padded zero

        def contract(j):
            return Jet(np.einsum("keqd,ed->keq", j.c, loc)[..., None], j.order)

        return [contract(u[0]), contract(u[1])], contract(w)

    def volume(self, chunk, order):
        return self.at(chunk.elems, chunk.points, order)

    def edge(self, chunk, side, order):
        return self.at(chunk.elems[:, side], chunk.points, order)

    def dofs(self, elems):
        return np.zeros((len(elems), 1), dtype=np.int64)


class DifferenceField:
    """Pointwise difference ``a − b`` of two single-column fields."""

    size = 1

    def __init__(self, a, b):
        self.a, self.b = a, b

    def _sub(self, fa, fb):
        (ua, wa), (ub, wb) = fa, fb
        return [ua[0] - ub[0], ua[1] - ub[1]], wa - wb

    def at(self, elems, points, order):
        return self._sub(self.a.at(elems, points, order), self.b.at(elems, points, order))

    def volume(self, chunk, order):
        return self._sub(self.a.volume(chunk, order), self.b.volume(chunk, order))

    def edge(self, chunk, side, order):
        return self._sub(self.a.edge(chunk, side, order), self.b.edge(chunk, side, order))

    def dofs(self, elems):
        return np.zeros((len(elems), 1), dtype=np.int64)


# -- stress fields ------------------------------------------------------------


class P1StressBasis:
    """Continuous piecewise-linear stress basis: hat × component (11, 22, 12)."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.size = 3 * mesh.n_vertices
        v = mesh.elem_vertices
        t = np.concatenate([np.swapaxes(v, 1, 2), np.ones((len(v), 1, 3))], axis=1)
        self._inv = np.linalg.inv(t)  # λ = inv @ [x, y, 1]

    def hats(self, elems, points) -> np.ndarray:
        """Barycentric coordinates of ``points`` (ne, nq, 2) in ``elems`` -> (ne, nq, 3)."""
        inv = self._inv[elems]
        return np.einsum("eij,eqj->eqi", inv[:, :, :2], points) + inv[:, None, :, 2]

    def values(self, elems, points):
        lam = self.hats(elems, points)
        ne, nq = lam.shape[:2]
        comp = np.zeros((3, ne, nq, 9))
        for c in range(3):
            comp[c, :, :, c::3] = lam
        return _packed_to_nested(comp)

    def dofs(self, elems) -> np.ndarray:
        tri = self.mesh.triangles[elems]
        return (3 * tri[:, :, None] + np.arange(3)).reshape(len(elems), 9)


class ExactStress:
    """Closed-form ``M^{αβ}`` as a function returning a nested list of jets."""

    size = 1

    def __init__(self, fn: Callable):
        self.fn = fn

    def values(self, elems, points):
        x = np.asarray(points, dtype=float)
        m = self.fn(x)
        return [[np.asarray(jets.value(m[a][b]), dtype=float)[..., None] for b in IDX] for a in IDX]

    def dofs(self, elems):
        return np.zeros((len(elems), 1), dtype=np.int64)


class CoefficientStress:
    """Stress given by nodal coefficients ``m`` (length ``3·n_vertices``)."""

    size = 1

    def __init__(self, mesh, coeffs):
        self.basis = P1StressBasis(mesh)
        self.coeffs = np.asarray(coeffs, dtype=float)

    def values(self, elems, points):
        vals = self.basis.values(elems, points)
        loc = self.coeffs[self.basis.dofs(elems)]
        return [[np.einsum("eqd,ed->eq", vals[a][b], loc)[..., None] for b in IDX] for a in IDX]

    def dofs(self, elems):
        return np.zeros((len(elems), 1), dtype=np.int64)


class DifferenceStress:
    """Pointwise difference ``a − b`` of two single-column stress fields."""

    size = 1

    def __init__(self, a, b):
        self.a, self.b = a, b

    def values(self, elems, points):
        va, vb = self.a.values(elems, points), self.b.values(elems, points)
        return [[va[i][j] - vb[i][j] for j in IDX] for i in IDX]

    def dofs(self, elems):
        return np.zeros((len(elems), 1), dtype=np.int64)


def _packed_to_nested(p):
    return [[p[0], p[2]], [p[2], p[1]]]


def _nested_to_packed(t):
    return np.stack([t[0][0], t[1][1], t[0][1]])


# ---------------------------------------------------------------------------
# pointwise trace quantities
# ---------------------------------------------------------------------------


def _vals(t):
    return np.asarray(t.val if isinstance(t, Jet) else t)


def volume_strains(fld, chunk: VolumeChunk):
    """Voigt-packed ``(ρ, γ)`` values, each of shape ``(3, ne, nq, nd)``."""
    u, w = fld.volume(chunk, 2)
    rho = bending_strain_jets(u, w, chunk.geom)
    gam = membrane_strain_jets(u, w, chunk.geom)
    r = np.stack([_vals(rho[0][0]), _vals(rho[1][1]), 2.0 * _vals(rho[0][1])])
    g = np.stack([_vals(gam[0][0]), _vals(gam[1][1]), 2.0 * _vals(gam[0][1])])
    return r, g


def volume_sobolev(fld, chunk: VolumeChunk):
    """``(u, ∇u, w, ∇w, ∇²w)`` values for the broken Sobolev norms, shape (13, ne, nq, nd)."""
    u, w = fld.volume(chunk, 2)
    dw = [w.d(0), w.d(1)]
    rows = [u[0].val, u[1].val]
    rows += [u[a].d(b).val for a in IDX for b in IDX]
    rows += [w.val, dw[0].val, dw[1].val]
    rows += [dw[0].d(0).val, dw[0].d(1).val, dw[1].d(0).val, dw[1].d(1).val]
    return np.stack([np.broadcast_to(r, np.broadcast_shapes(*(x.shape for x in rows))) for r in rows])


@dataclass
class SideTraces:
    """Traces of one field on one side of an edge batch."""

    values: np.ndarray  # (5, ned, nq, nd): u1, u2, ∂1w, ∂2w, w
    flux: np.ndarray  # (5, ned, nq, nd): tractions paired with the values
    twist: np.ndarray  # t = n^{αβ} n_β s_α
    twist_ds: np.ndarray | None  # D_s t
    ds_w: np.ndarray  # D_s w
    dn_w: np.ndarray  # D_n w
    nn: np.ndarray  # n^{αβ} n_α n_β


def edge_traces(fld, chunk: EdgeChunk, side: int, moduli: ElasticModuli, sign: float = 1.0, literal: bool = False):
    """Trace quantities of ``fld`` on ``side`` of ``chunk``.

    ``sign`` multiplies the first-side normal (use ``1`` for both sides of an
    interior edge, so that fluxes refer to one common normal).
    """
    g = chunk.geom
    fr = chunk.frame
    u, w = fld.edge(chunk, side, 3)
    rho = bending_strain_jets(u, w, g)  # order 1
    gam = membrane_strain_jets(u, w, g)
    ncon = apply_elastic(g.a_con, rho, moduli)  # stress couple n^{αβ}
    acon = [[g.a_con[a][b].val for b in IDX] for a in IDX]
    mcon = apply_elastic(acon, [[_vals(gam[a][b]) for b in IDX] for a in IDX], moduli)
    ncov = [sign * fr["n_cov"][a].val for a in IDX]
    drho = cov_deriv_tensor(rho, g)  # ρ_{λγ|β}
    bm = [[g.b_mix[a][b].val for b in IDX] for a in IDX]
    nv = [[_vals(ncon[a][b]) for b in IDX] for a in IDX]
    # V^α = a^{αβλγ} ρ_{λγ|β}
    vvec = [0.0, 0.0]
    for be in IDX:
        s = apply_elastic(acon, [[_vals(drho[a][b][be]) for b in IDX] for a in IDX], moduli)
        for al in IDX:
            vvec[al] = vvec[al] + s[al][be]
    flux_u = []
    for al in IDX:
        f = 0.0
        for ga in IDX:
            t = mcon[al][ga]
            for be in IDX:
                t = t + 2.0 * nv[ga][be] * bm[al][be]
            f = f + t * ncov[ga]
        flux_u.append(f)
    flux_dw = [nv[al][0] * ncov[0] + nv[al][1] * ncov[1] for al in IDX]
    flux_w = vvec[0] * ncov[0] + vvec[1] * ncov[1]
    dw = [w.d(0), w.d(1)]
    values = [u[0].val, u[1].val, dw[0].val, dw[1].val, w.val]
    shape = np.broadcast_shapes(*(np.shape(x) for x in values + flux_u + flux_dw + [flux_w]))
    values = np.stack([np.broadcast_to(x, shape) for x in values])
    flux = np.stack([np.broadcast_to(x, shape) for x in flux_u + flux_dw + [flux_w]])
    scon = [sign * fr["s_con"][a].val for a in IDX]
    ncon_vec = [sign * fr["n_con"][a].val for a in IDX]
    scov = [sign * fr["s_cov"][a].val for a in IDX]
    twist = sum(nv[a][b] * ncov[b] * scov[a] for a in IDX for b in IDX)
    nn = sum(nv[a][b] * ncov[a] * ncov[b] for a in IDX for b in IDX)
    ds_w = dw[0].val * scon[0] + dw[1].val * scon[1]
    dn_w = dw[0].val * ncon_vec[0] + dw[1].val * ncon_vec[1]
    twist_ds = None
    if literal:
        tj = 0.0
        for a in IDX:
            for b in IDX:
                tj = ncon[a][b] * (sign * fr["n_cov"][b]) * (sign * fr["s_cov"][a]) + tj
        twist_ds = np.broadcast_to(tj.d(0).val * scon[0] + tj.d(1).val * scon[1], shape)
    return SideTraces(
        values,
        flux,
        np.broadcast_to(twist, shape),
        twist_ds,
        np.broadcast_to(ds_w, shape),
        np.broadcast_to(dn_w, shape),
        np.broadcast_to(nn, shape),
    )


# ---------------------------------------------------------------------------
# sparse accumulation
# ---------------------------------------------------------------------------


class _Triplets:
    def __init__(self, shape):
        self.shape = shape
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []

    def add(self, rows, cols, block):
        r = np.broadcast_to(rows[:, :, None], block.shape)
        c = np.broadcast_to(cols[:, None, :], block.shape)
        keep = (r >= 0) & (c >= 0) & (block != 0.0)
        self.rows.append(r[keep])
        self.cols.append(c[keep])
        self.vals.append(block[keep])

    def tocsr(self) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix(self.shape)
        r = np.concatenate(self.rows)
        c = np.concatenate(self.cols)
        v = np.concatenate(self.vals)
        m = sp.coo_matrix((v, (r, c)), shape=self.shape).tocsr()
        m.sum_duplicates()
        return m


def _same(a, b):
    return a is b


# ---------------------------------------------------------------------------
# forms
# ---------------------------------------------------------------------------


def assemble_a(ctx: FormContext, penalty: float | None = None, test=None, trial=None, twist: str = "weak"):
    """Matrix of the form ``a`` (rows: test columns, columns: trial columns).

    Parameters
    ----------
    ctx : FormContext
    penalty : float, optional
        ``C_pen``; defaults to :func:`default_penalty`.
    test, trial : field, optional
        Defaults to the finite element basis.
    twist : {"weak", "literal"}
        Treatment of the twisting-moment term on clamped and simply
        supported edges.
    """
    if twist not in TWIST_FORMS:
        raise ValueError(f"twist must be one of {TWIST_FORMS}")
    basis = BasisField(ctx.space)
    test = basis if test is None else test
    trial = test if trial is None else trial
    cpen = default_penalty(ctx) if penalty is None else float(penalty)
    mod = ctx.moduli
    out = _Triplets((test.size, trial.size))
    third = 1.0 / 3.0
    for ch in ctx.volume_chunks:
        d = pack_tensor(elastic_tensor(ch.geom, mod), "elastic")[..., 0]  # (3,3,ne,nq)
        rt, gt = volume_strains(test, ch)
        rr, gr = (rt, gt) if _same(test, trial) else volume_strains(trial, ch)
        left = np.concatenate([rt, gt])
        right = np.concatenate([np.einsum("ijeq,jeqb->ieqb", d, rr), np.einsum("ijeq,jeqb->ieqb", d, gr)])
        blk = weighted_outer(left, right, third * ch.weights * ch.sqrt_a)
        out.add(test.dofs(ch.elems), trial.dofs(ch.elems), blk)
    sgn = np.array([-1.0, -1.0, -1.0, -1.0, 1.0])
    for ch in ctx.edge_chunks("I"):
        hw = np.array([1.0, 1.0, 1.0, 1.0, 0.0])[:, None, None] / ch.h[None, :, None] + np.array(
            [0.0, 0.0, 0.0, 0.0, 1.0]
        )[:, None, None] / ch.h[None, :, None] ** 3
        t1 = edge_traces(test, ch, 0, mod)
        t2 = edge_traces(test, ch, 1, mod)
        if _same(test, trial):
            r1, r2 = t1, t2
        else:
            r1 = edge_traces(trial, ch, 0, mod)
            r2 = edge_traces(trial, ch, 1, mod)
        avg_t = 0.5 * np.concatenate([t1.flux, t2.flux], axis=-1)
        jmp_t = np.concatenate([t1.values, -t2.values], axis=-1)
        avg_r = 0.5 * np.concatenate([r1.flux, r2.flux], axis=-1)
        jmp_r = np.concatenate([r1.values, -r2.values], axis=-1)
        k1 = (third * sgn)[:, None, None, None] * ch.w_e[None, :, :, None]
        left = np.concatenate([avg_t, jmp_t, jmp_t])
        right = np.concatenate([k1 * jmp_r, k1 * avg_r, cpen * hw[..., None] * jmp_r])
        blk = weighted_outer(left, right, ch.weights)
        rows = np.concatenate([test.dofs(ch.elems[:, 0]), test.dofs(ch.elems[:, 1])], axis=1)
        cols = np.concatenate([trial.dofs(ch.elems[:, 0]), trial.dofs(ch.elems[:, 1])], axis=1)
        out.add(rows, cols, blk)
    literal = twist == "literal"
    for kind in ("D", "S"):
        for ch in ctx.edge_chunks(kind):
            t = edge_traces(test, ch, 0, mod, literal=literal)
            r = t if _same(test, trial) else edge_traces(trial, ch, 0, mod, literal=literal)
            lt, rt_ = _boundary_pairs(t, literal, kind)
            lr, rr_ = _boundary_pairs(r, literal, kind)
            sb = np.array([-1.0, -1.0, 1.0, 1.0 if literal else -1.0, -1.0 if kind == "D" else 0.0])
            k1 = (third * sb)[:, None, None, None] * ch.w_e[None, :, :, None]
            pen_t, pen_r, hw = _boundary_penalty(t, r, ch, kind)
            left = np.concatenate([lt, rt_, pen_t])
            right = np.concatenate([k1 * rr_, k1 * lr, cpen * hw * pen_r])
            blk = weighted_outer(left, right, ch.weights)
            out.add(test.dofs(ch.elems[:, 0]), trial.dofs(ch.elems[:, 0]), blk)
    return out.tocsr()


def _boundary_pairs(tr: SideTraces, literal: bool, kind: str):
    """Flux and value stacks of the boundary consistency terms."""
    if literal:
        t_flux, t_val = tr.twist_ds, tr.values[4]
    else:
        t_flux, t_val = tr.twist, tr.ds_w
    flux = np.stack([tr.flux[0], tr.flux[1], tr.flux[4], t_flux, tr.nn])
    vals = np.stack([tr.values[0], tr.values[1], tr.values[4], t_val, tr.dn_w])
    return flux, vals


def _boundary_penalty(t: SideTraces, r: SideTraces, ch: EdgeChunk, kind: str):
    h = ch.h[None, :, None, None]
    if kind == "D":
        hw = np.stack([1.0 / h[0], 1.0 / h[0], 1.0 / h[0] ** 3, 1.0 / h[0]])
        pt = np.stack([t.values[0], t.values[1], t.values[4], t.dn_w])
        pr = np.stack([r.values[0], r.values[1], r.values[4], r.dn_w])
    else:
        hw = np.stack([1.0 / h[0], 1.0 / h[0], 1.0 / h[0] ** 3])
        pt = np.stack([t.values[0], t.values[1], t.values[4]])
        pr = np.stack([r.values[0], r.values[1], r.values[4]])
    return pt, pr, hw


def assemble_b(ctx: FormContext, stress=None, trial=None):
    """Matrix of ``b(N; v, z)``: rows indexed by stress columns, columns by ``(u, w)`` columns."""
    stress = P1StressBasis(ctx.mesh) if stress is None else stress
    trial = BasisField(ctx.space) if trial is None else trial
    out = _Triplets((stress.size, trial.size))
    for ch in ctx.volume_chunks:
        n = _nested_to_packed(stress.values(ch.elems, ch.points))
        _, g = volume_strains(trial, ch)
        blk = weighted_outer(n, g, ch.weights * ch.sqrt_a)
        out.add(stress.dofs(ch.elems), trial.dofs(ch.elems), blk)
    for kind in ("I", "D", "S"):
        for ch in ctx.edge_chunks(kind):
            e0 = ch.elems[:, 0]
            nv = stress.values(e0, ch.points)
            ncov = [ch.frame["n_cov"][a].val[..., 0] for a in IDX]
            nn = np.stack([nv[a][0] * ncov[0][..., None] + nv[a][1] * ncov[1][..., None] for a in IDX])
            u0, _ = trial.edge(ch, 0, 0)
            jump = np.stack([u0[0].val, u0[1].val])
            cols = trial.dofs(e0)
            if kind == "I":
                u1, _ = trial.edge(ch, 1, 0)
                jump = np.concatenate([jump, -np.stack([u1[0].val, u1[1].val])], axis=-1)
                cols = np.concatenate([cols, trial.dofs(ch.elems[:, 1])], axis=1)
            jump = np.broadcast_to(jump, jump.shape[:3] + (cols.shape[1],))
            blk = weighted_outer(nn, jump, -ch.weights * ch.w_e)
            out.add(stress.dofs(e0), cols, blk)
    return out.tocsr()


def assemble_c(ctx: FormContext, test=None, trial=None):
    """Matrix of the compliance pairing ``∫ a_{αβλγ} M^{αβ} N^{λγ}``."""
    basis = P1StressBasis(ctx.mesh)
    test = basis if test is None else test
    trial = test if trial is None else trial
    out = _Triplets((test.size, trial.size))
    for ch in ctx.volume_chunks:
        s = pack_tensor(compliance_tensor(ch.geom, ctx.moduli), "compliance")[..., 0]
        nt = _nested_to_packed(test.values(ch.elems, ch.points))
        nr = _nested_to_packed(trial.values(ch.elems, ch.points))
        blk = weighted_outer(nt, np.einsum("ijeq,jeqb->ieqb", s, nr), ch.weights * ch.sqrt_a)
        out.add(test.dofs(ch.elems), trial.dofs(ch.elems), blk)
    return out.tocsr()


# ---------------------------------------------------------------------------
# loads
# ---------------------------------------------------------------------------


@dataclass
class Loads:
    """Load data of the shell problem.

    Attributes
    ----------
    volume : callable, optional
        ``volume(x) -> (3, ...)`` giving ``(p¹, p², p³)`` at points
        ``x`` of shape ``(..., 2)``.
    boundary : callable, optional
        ``boundary(x, direction) -> dict`` with keys ``q`` (shape
        ``(2, ...)``), ``q3``, ``m`` and optionally ``twist``; ``direction``
        is the counterclockwise unit coordinate tangent ``(2, ...)`` of the
        edge seen from its triangle.  ``q``/``q3`` are read on free edges,
        ``m`` on free and simply supported edges.  When ``twist`` is given,
        its endpoint values on free edges are added as point terms
        ``[t z]`` (see the module notes).
    """

    volume: Callable | None = None
    boundary: Callable | None = None

    @classmethod
    def constant(cls, p=(0.0, 0.0, 0.0), q=(0.0, 0.0, 0.0), m: float = 0.0) -> "Loads":
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)

        def vol(x):
            return np.broadcast_to(p.reshape((3,) + (1,) * (np.ndim(x) - 1)), (3,) + np.shape(x)[:-1])

        def bnd(x, direction):
            shp = np.shape(x)[:-1]
            return {
                "q": np.broadcast_to(q[:2].reshape((2,) + (1,) * len(shp)), (2,) + shp),
                "q3": np.full(shp, q[2]),
                "m": np.full(shp, float(m)),
            }

        return cls(vol, bnd)


def assemble_load(ctx: FormContext, loads: Loads, test=None) -> np.ndarray:
    """Load vector ``⟨f; v, z⟩`` against every column of ``test``."""
    test = BasisField(ctx.space) if test is None else test
    f = np.zeros(test.size)
    if loads.volume is not None:
        for ch in ctx.volume_chunks:
            p = np.asarray(loads.volume(ch.points), dtype=float)
            u, w = test.volume(ch, 0)
            vals = np.stack([u[0].val, u[1].val, w.val])
            loc = np.einsum("ieqd,ieq,eq->ed", vals, p, ch.weights * ch.sqrt_a)
            np.add.at(f, *_flat(test.dofs(ch.elems), loc))
    if loads.boundary is not None:
        for kind in ("S", "F"):
            for ch in ctx.edge_chunks(kind):
                e0 = ch.elems[:, 0]
                d = ch.direction[..., 0]
                bl = loads.boundary(ch.points, d)
                u, w = test.edge(ch, 0, 1)
                ncon = [ch.frame["n_con"][a].val for a in IDX]
                dn = w.d(0).val * ncon[0] + w.d(1).val * ncon[1]
                wt = ch.weights * ch.w_e
                loc = np.einsum("eqd,eq->ed", dn, np.asarray(bl["m"]) * wt)
                if kind == "F":
                    q = np.asarray(bl["q"])
                    loc = loc + np.einsum("eqd,eq->ed", u[0].val, q[0] * wt)
                    loc = loc + np.einsum("eqd,eq->ed", u[1].val, q[1] * wt)
                    loc = loc + np.einsum("eqd,eq->ed", w.val, np.asarray(bl["q3"]) * wt)
                np.add.at(f, *_flat(test.dofs(e0), loc))
                if kind == "F" and "twist" in bl:
                    a, b = ch.endpoints
                    dd = d[:, :, :1]
                    ta = np.asarray(loads.boundary(a[:, None, :], dd)["twist"])
                    tb = np.asarray(loads.boundary(b[:, None, :], dd)["twist"])
                    _, wa = test.at(e0, a[:, None, :], 0)
                    _, wb = test.at(e0, b[:, None, :], 0)
                    loc = wb.val[:, 0] * tb - wa.val[:, 0] * ta
                    np.add.at(f, *_flat(test.dofs(e0), loc))
    return f


def _flat(dofs, loc):
    loc = np.broadcast_to(loc, dofs.shape)
    keep = dofs >= 0
    return dofs[keep], loc[keep]


# ---------------------------------------------------------------------------
# norm Grams
# ---------------------------------------------------------------------------

STRAIN_WEIGHTS = np.array([1.0, 1.0, 0.5, 1.0, 1.0, 0.5])  # Voigt shear carries 2ρ₁₂


def _jump_gram(ctx: FormContext, test, trial, out: _Triplets):
    """Jump and boundary terms shared by the ``H_h`` and ``a_h`` norms."""
    for ch in ctx.edge_chunks("I"):
        hw = np.array([1.0, 1.0, 1.0, 1.0, 0.0])[:, None, None] / ch.h[None, :, None] + np.array(
            [0.0, 0.0, 0.0, 0.0, 1.0]
        )[:, None, None] / ch.h[None, :, None] ** 3
        jt = _jumps(test, ch)
        jr = jt if _same(test, trial) else _jumps(trial, ch)
        blk = weighted_outer(jt, hw[..., None] * jr, ch.weights)
        rows = np.concatenate([test.dofs(ch.elems[:, 0]), test.dofs(ch.elems[:, 1])], axis=1)
        cols = np.concatenate([trial.dofs(ch.elems[:, 0]), trial.dofs(ch.elems[:, 1])], axis=1)
        out.add(rows, cols, blk)
    for kind in ("D", "S"):
        for ch in ctx.edge_chunks(kind):
            t = _boundary_values(test, ch, kind)
            r = t if _same(test, trial) else _boundary_values(trial, ch, kind)
            h = ch.h[None, :, None, None]
            hw = np.concatenate([np.ones((2, 1, 1, 1)) / h, 1.0 / h**3, np.ones((len(t) - 3, 1, 1, 1)) / h])
            blk = weighted_outer(t, hw * r, ch.weights)
            out.add(test.dofs(ch.elems[:, 0]), trial.dofs(ch.elems[:, 0]), blk)


def _jumps(fld, ch):
    vals = []
    for side in (0, 1):
        u, w = fld.edge(ch, side, 1)
        v = [u[0].val, u[1].val, w.d(0).val, w.d(1).val, w.val]
        shp = np.broadcast_shapes(*(np.shape(x) for x in v))
        vals.append(np.stack([np.broadcast_to(x, shp) for x in v]))
    return np.concatenate([vals[0], -vals[1]], axis=-1)


def _boundary_values(fld, ch, kind):
    u, w = fld.edge(ch, 0, 1)
    v = [u[0].val, u[1].val, w.val]
    if kind == "D":
        ncon = [ch.frame["n_con"][a].val for a in IDX]
        v.append(w.d(0).val * ncon[0] + w.d(1).val * ncon[1])
    shp = np.broadcast_shapes(*(np.shape(x) for x in v))
    return np.stack([np.broadcast_to(x, shp) for x in v])


def assemble_gram_hh(ctx: FormContext, test=None, trial=None):
    """Gram matrix of the broken ``H_h`` norm."""
    test = BasisField(ctx.space) if test is None else test
    trial = test if trial is None else trial
    out = _Triplets((test.size, trial.size))
    for ch in ctx.volume_chunks:
        st = volume_sobolev(test, ch)
        sr = st if _same(test, trial) else volume_sobolev(trial, ch)
        blk = weighted_outer(st, sr, ch.weights)
        out.add(test.dofs(ch.elems), trial.dofs(ch.elems), blk)
    _jump_gram(ctx, test, trial, out)
    return out.tocsr()


def assemble_gram_ah(ctx: FormContext, test=None, trial=None):
    """Gram matrix of the strain-based ``a_h`` norm."""
    test = BasisField(ctx.space) if test is None else test
    trial = test if trial is None else trial
    out = _Triplets((test.size, trial.size))
    for ch in ctx.volume_chunks:
        rt, gt = volume_strains(test, ch)
        rr, gr = (rt, gt) if _same(test, trial) else volume_strains(trial, ch)
        left = np.concatenate([rt, gt])
        right = STRAIN_WEIGHTS[:, None, None, None] * np.concatenate([rr, gr])
        blk = weighted_outer(left, right, ch.weights)
        out.add(test.dofs(ch.elems), trial.dofs(ch.elems), blk)
    _jump_gram(ctx, test, trial, out)
    return out.tocsr()


def assemble_gram_vh(ctx: FormContext, test=None, trial=None):
    """Gram matrix of ``‖N‖²_{V_h} = Σ_{αβ} ‖N^{αβ}‖²`` (shear counted twice)."""
    basis = P1StressBasis(ctx.mesh)
    test = basis if test is None else test
    trial = test if trial is None else trial
    out = _Triplets((test.size, trial.size))
    for ch in ctx.volume_chunks:
        nt = _nested_to_packed(test.values(ch.elems, ch.points))
        nr = _nested_to_packed(trial.values(ch.elems, ch.points))
        blk = weighted_outer(nt, VOIGT_MULT[:, None, None, None] * nr, ch.weights)
        out.add(test.dofs(ch.elems), trial.dofs(ch.elems), blk)
    return out.tocsr()


def assemble_norm_grams(ctx: FormContext):
    """``(G_Hh, G_ah, G_Vh)`` on the finite element spaces."""
    return assemble_gram_hh(ctx), assemble_gram_ah(ctx), assemble_gram_vh(ctx)


# ---------------------------------------------------------------------------
# the saddle-point system
# ---------------------------------------------------------------------------


@dataclass
class AssembledSystem:
    """Blocks of ``[[A, Bᵀ], [B, −ε²C]] [X; M] = [F; 0]``."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    F: np.ndarray
    penalty: float
    eps: float
    moduli: ElasticModuli
    ctx: FormContext
    twist: str = "weak"

    @property
    def n_uw(self) -> int:
        return self.A.shape[0]

    @property
    def n_m(self) -> int:
        return self.C.shape[0]

    def block_matrix(self) -> sp.csc_matrix:
        return sp.bmat([[self.A, self.B.T], [self.B, -(self.eps**2) * self.C]], format="csc")

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.F, np.zeros(self.n_m)])


def assemble_system(
    ctx: FormContext,
    eps: float,
    loads: Loads | None = None,
    penalty: float | None = None,
    twist: str = "weak",
) -> AssembledSystem:
    """Assemble every block of the mixed system on ``ctx``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    cpen = default_penalty(ctx) if penalty is None else float(penalty)
    a = assemble_a(ctx, cpen, twist=twist)
    b = assemble_b(ctx)
    c = assemble_c(ctx)
    f = assemble_load(ctx, loads) if loads is not None else np.zeros(a.shape[0])
    return AssembledSystem(a, b, c, f, cpen, float(eps), ctx.moduli, ctx, twist)


def symmetry_defect(m: sp.spmatrix) -> float:
    """``‖M − Mᵀ‖_max / ‖M‖_max``."""
    d = abs(m - m.T).max()
    s = abs(m).max()
    return float(d / s) if s else 0.0

