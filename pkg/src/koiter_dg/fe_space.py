"""Quadrature, local polynomial bases and the global dof layout.

Local polynomials are written in scaled monomials ``ξ = (x − x_c)/h_τ``
about the triangle centroid ``x_c``.  A basis is a coefficient matrix whose
columns are orthonormal in the ``√a``-weighted ``L²(τ)`` inner product, so
the weighted projections used by the interpolants are plain moments.

Displacement species per triangle: ``P2`` (no free edge), ``P3*`` (one free
edge, quadratics plus two cubic enrichments), ``P3`` (two or three free
edges).  The deflection always uses ``P3``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil, comb

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from . import jets
from .errors import SingularMomentMatrix, UnsupportedDegree
from .geometry import Chart, eval_geometry
from .mesh import Mesh

MAX_DEGREE = 12
MONOMIALS = jets.multi_indices(3)
NMONO = len(MONOMIALS)
SPECIES_SIZE = {"P2": 6, "P3*": 8, "P3": 10}
SLOTS = 10  # padded basis width per field component
LOCAL_WIDTH = 3 * SLOTS  # [u1 | u2 | w]


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle or the unit interval.

    ``points`` are barycentric coordinates ``(n, 3)`` on triangles and
    parameters ``(n,)`` in ``[0, 1]`` on edges.  ``weights`` sum to one, so
    ``∫ f = |domain| Σ w f(x)``.
    """

    domain: str
    degree: int
    points: np.ndarray
    weights: np.ndarray

    def map_triangle(self, verts: np.ndarray) -> np.ndarray:
        """Physical points for triangles ``verts`` (shape ``(..., 3, 2)``)."""
        if self.domain != "triangle":
            raise ValueError("not a triangle rule")
        return np.einsum("qk,...kd->...qd", self.points, verts)


@lru_cache(maxsize=None)
def quadrature(domain: str, degree: int) -> QuadratureRule:
    """Gauss rule exact for polynomials of total degree ``degree``.

    Triangles use the collapsed (Duffy) product of Gauss–Jacobi and
    Gauss–Legendre rules; edges use Gauss–Legendre.

    Raises
    ------
    UnsupportedDegree
        If ``degree`` is outside ``0..12``.
    """
    if not isinstance(degree, (int, np.integer)) or not 0 <= degree <= MAX_DEGREE:
        raise UnsupportedDegree(f"quadrature degree must be an integer in [0, {MAX_DEGREE}], got {degree!r}")
    n = max(1, ceil((degree + 1) / 2))
    if domain == "edge":
        t, w = roots_legendre(n)
        return QuadratureRule("edge", int(degree), 0.5 * (t + 1.0), 0.5 * w)
    if domain != "triangle":
        raise ValueError(f"domain must be 'triangle' or 'edge', got {domain!r}")
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    tl, wl = roots_legendre(n)
    u = 0.5 * (tj + 1.0)
    v = 0.5 * (tl + 1.0)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = uu.ravel()
    y = ((1.0 - uu) * vv).ravel()
    # 1/8 from the two interval maps and the Duffy Jacobian, 2 = 1/|reference triangle|
    w = (np.outer(wj, wl) * 0.25).ravel()
    bary = np.stack([1.0 - x - y, x, y], axis=1)
    return QuadratureRule("triangle", int(degree), bary, w)


# ---------------------------------------------------------------------------
# scaled monomials
# ---------------------------------------------------------------------------


def monomial_values(xi: np.ndarray) -> np.ndarray:
    """Cubic monomials at scaled points ``xi`` (shape ``(..., 2)``) -> ``(..., 10)``."""
    return np.stack([xi[..., 0] ** i * xi[..., 1] ** j for i, j in MONOMIALS], axis=-1)


def monomial_jets(xi: np.ndarray, scale, order: int) -> np.ndarray:
    """Taylor coefficients in physical coordinates of the cubic monomials.

    Parameters
    ----------
    xi : ndarray, shape (..., 2)
        Scaled local coordinates of the expansion points.
    scale : array_like
        ``h_τ`` broadcastable to ``xi.shape[:-1]``.
    order : int

    Returns
    -------
    ndarray, shape (nterms(order), ..., 10)
    """
    scale = np.asarray(scale, dtype=float)
    pw = [[xi[..., a] ** p for p in range(4)] for a in (0, 1)]
    inv = [scale ** (-k) for k in range(order + 1)]
    out = np.zeros((jets.nterms(order),) + xi.shape[:-1] + (NMONO,))
    for r, (k, l) in enumerate(jets.multi_indices(order)):
        for m, (i, j) in enumerate(MONOMIALS):
            if k <= i and l <= j:
                out[r, ..., m] = comb(i, k) * comb(j, l) * pw[0][i - k] * pw[1][j - l] * inv[k + l]
    return out


def _mono_index(i, j):
    return jets.index_of(i, j)


def poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of two monomial-coefficient vectors; the result must stay cubic."""
    out = np.zeros(NMONO)
    for p, (i1, j1) in enumerate(MONOMIALS):
        if a[p] == 0:
            continue
        for q, (i2, j2) in enumerate(MONOMIALS):
            if b[q] == 0:
                continue
            if i1 + i2 + j1 + j2 > 3:
                raise ValueError("product exceeds cubic degree")
            out[_mono_index(i1 + i2, j1 + j2)] += a[p] * b[q]
    return out


def barycentric_polys(verts: np.ndarray, center: np.ndarray, h: float) -> np.ndarray:
    """Barycentric coordinates as affine polynomials in scaled monomials, shape (3, 10)."""
    t = np.vstack([verts.T, np.ones(3)])
    inv = np.linalg.inv(t)  # λ = inv @ [x, y, 1]
    out = np.zeros((3, NMONO))
    for i in range(3):
        gx, gy, c0 = inv[i]
        out[i, 0] = gx * center[0] + gy * center[1] + c0
        out[i, 1] = gx * h
        out[i, 2] = gy * h
    return out


# ---------------------------------------------------------------------------
# local bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ElementQuadrature:
    """Weighted quadrature data of one or more triangles."""

    points: np.ndarray  # (ne, nq, 2)
    weights: np.ndarray  # (ne, nq), includes area
    sqrt_a: np.ndarray  # (ne, nq)
    xi: np.ndarray  # (ne, nq, 2)
    mono: np.ndarray  # (ne, nq, 10)


def element_quadrature(verts: np.ndarray, center, h, chart: Chart, degree: int) -> ElementQuadrature:
    verts = np.asarray(verts, dtype=float)
    single = verts.ndim == 2
    if single:
        verts = verts[None]
    center = np.asarray(center, dtype=float).reshape(-1, 2)
    h = np.asarray(h, dtype=float).reshape(-1)
    rule = quadrature("triangle", degree)
    pts = rule.map_triangle(verts)
    area = 0.5 * np.abs(
        (verts[:, 1, 0] - verts[:, 0, 0]) * (verts[:, 2, 1] - verts[:, 0, 1])
        - (verts[:, 1, 1] - verts[:, 0, 1]) * (verts[:, 2, 0] - verts[:, 0, 0])
    )
    w = area[:, None] * rule.weights[None, :]
    sa = eval_geometry(chart, pts, order=0).sqrt_det
    xi = (pts - center[:, None, :]) / h[:, None, None]
    return ElementQuadrature(pts, w, sa, xi, monomial_values(xi))


def _weighted_gram(q: ElementQuadrature, coeffs: np.ndarray, extra: np.ndarray | None = None) -> np.ndarray:
    """``Cᵀ (∫ m mᵀ √a [extra]) C`` per element; ``coeffs`` shape ``(ne, 10, nb)``."""
    w = q.weights * q.sqrt_a
    if extra is not None:
        w = w * extra
    vals = np.einsum("eqm,emb->eqb", q.mono, coeffs)
    return np.einsum("eqa,eq,eqb->eab", vals, w, vals)


def orthonormalize(q: ElementQuadrature, coeffs: np.ndarray) -> np.ndarray:
    """Make the columns of ``coeffs`` orthonormal in the weighted inner product."""
    g = _weighted_gram(q, coeffs)
    cond = np.linalg.cond(g)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e12):
        raise SingularMomentMatrix(f"weighted Gram matrix is numerically singular (cond = {np.max(cond):.3e})")
    low = np.linalg.cholesky(g)
    eye = np.broadcast_to(np.eye(g.shape[-1]), g.shape)
    inv_t = np.swapaxes(np.linalg.solve(low, eye), -1, -2)
    return coeffs @ inv_t


def _monomial_identity(n: int, ne: int) -> np.ndarray:
    c = np.zeros((ne, NMONO, n))
    c[:, np.arange(n), np.arange(n)] = 1.0
    return c


@dataclass(frozen=True)
class LocalBasis:
    """Polynomial basis on one triangle.

    Attributes
    ----------
    species : str
        ``P2``, ``P3*`` or ``P3``.
    coeffs : ndarray, shape (10, nb)
        Scaled-monomial coefficients of each basis function.
    center, h :
        Scaling frame ``ξ = (x − center)/h``.
    """

    species: str
    coeffs: np.ndarray
    center: np.ndarray
    h: float

    @property
    def size(self) -> int:
        return self.coeffs.shape[1]

    def jets(self, x, order: int) -> jets.Jet:
        """Jets of every basis function at ``x``; trailing axis indexes the basis."""
        x = np.asarray(x, dtype=float)
        mj = monomial_jets((x - self.center) / self.h, self.h, order)
        return jets.Jet(mj @ self.coeffs, order)

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return monomial_values((x - self.center) / self.h) @ self.coeffs


def select_u_space(elem: int, mesh: Mesh) -> str:
    """Displacement species of triangle ``elem`` from its number of free edges."""
    nf = int(mesh.free_edge_count[elem])
    return "P2" if nf == 0 else ("P3*" if nf == 1 else "P3")


def build_p3star_basis(verts, chart: Chart, free_edge: int = 0, degree: int = 10):
    """The two cubic enrichment functions of the one-free-edge space.

    Parameters
    ----------
    verts : array_like, shape (3, 2)
        Triangle vertices (counterclockwise).
    chart : Chart
    free_edge : int
        Local index of the free edge ``e₁`` (the edge opposite that vertex).
    degree : int
        Quadrature degree for the weighted moments (at least 7).

    Returns
    -------
    coeffs : ndarray, shape (10, 2)
        Scaled-monomial coefficients of ``p³₁ = λ₁p²₁ + 1`` and
        ``p³₂ = λ₁p²₂ + λ₂``; ``λ₁`` vanishes on ``e₁`` and ``λ₂`` is the
        barycentric coordinate of the first endpoint of ``e₁`` in
        counterclockwise order.
    center, h : frame of the monomials.
    """
    verts = np.asarray(verts, dtype=float)
    if degree < 7:
        raise UnsupportedDegree("the enrichment moments need quadrature degree >= 7")
    center = verts.mean(axis=0)
    h = float(max(np.linalg.norm(verts[i] - verts[j]) for i, j in ((0, 1), (1, 2), (2, 0))))
    q = element_quadrature(verts, center, h, chart, degree)
    return _p3star(q, verts, center, h, free_edge), center, h


def _p3star(q: ElementQuadrature, verts, center, h, free_edge):
    lam = barycentric_polys(verts, center, h)
    l1 = lam[free_edge]
    l2 = lam[(free_edge + 1) % 3]
    p2 = orthonormalize(q, _monomial_identity(6, 1))[0]  # (10, 6)
    lam1_vals = q.mono[0] @ l1
    glam = _weighted_gram(q, p2[None], lam1_vals[None])[0]
    vals = q.mono[0] @ p2  # (nq, 6)
    w = q.weights[0] * q.sqrt_a[0]
    rhs1 = vals.T @ w
    rhs2 = vals.T @ (w * (q.mono[0] @ l2))
    try:
        cond = np.linalg.cond(glam)
        if not np.isfinite(cond) or cond > 1e12:
            raise np.linalg.LinAlgError
        sol = np.linalg.solve(glam, -np.stack([rhs1, rhs2], axis=1))
    except np.linalg.LinAlgError as exc:
        raise SingularMomentMatrix("the λ₁-weighted P2 Gram matrix is singular") from exc
    out = np.zeros((NMONO, 2))
    one = np.zeros(NMONO)
    one[0] = 1.0
    for a, base in enumerate((one, l2)):
        p2a = p2 @ sol[:, a]
        out[:, a] = poly_mul(l1, p2a) + base
    return out


# ---------------------------------------------------------------------------
# dof map and space
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DofMap:
    """Global layout of the displacement/deflection and stress dofs.

    Each triangle owns a contiguous block ``[u₁ | u₂ | w]`` of size
    ``2·n_u + 10``.  Stress dofs are numbered separately as
    ``3·vertex + component`` with components ``(11, 22, 12)``.
    """

    species: tuple[str, ...]
    n_u: np.ndarray
    offsets: np.ndarray
    local_to_global: np.ndarray  # (nt, 30), -1 for inactive slots
    n_vertices: int

    @property
    def N_u(self) -> int:
        return int(2 * self.n_u.sum())

    @property
    def N_w(self) -> int:
        return 10 * len(self.n_u)

    @property
    def N_uw(self) -> int:
        return self.N_u + self.N_w

    @property
    def N_M(self) -> int:
        return 3 * self.n_vertices

    def element_dofs(self, elem: int) -> np.ndarray:
        row = self.local_to_global[elem]
        return row[row >= 0]

    def u_dofs(self, elem: int, comp: int) -> np.ndarray:
        o, n = self.offsets[elem], self.n_u[elem]
        return np.arange(o + comp * n, o + (comp + 1) * n)

    def w_dofs(self, elem: int) -> np.ndarray:
        o, n = self.offsets[elem], self.n_u[elem]
        return np.arange(o + 2 * n, o + 2 * n + 10)

    def m_dofs(self, vertices) -> np.ndarray:
        """Stress dofs of the given vertices, shape ``(len, 3)``."""
        v = np.asarray(vertices)
        return 3 * v[..., None] + np.arange(3)


def build_dof_map(mesh: Mesh) -> DofMap:
    """Dof layout for ``mesh`` from the free-edge species rule."""
    species = tuple(select_u_space(e, mesh) for e in range(mesh.n_elements))
    n_u = np.array([SPECIES_SIZE[s] for s in species], dtype=np.int64)
    sizes = 2 * n_u + 10
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    l2g = -np.ones((mesh.n_elements, LOCAL_WIDTH), dtype=np.int64)
    for e in range(mesh.n_elements):
        n = n_u[e]
        o = offsets[e]
        l2g[e, :n] = o + np.arange(n)
        l2g[e, SLOTS : SLOTS + n] = o + n + np.arange(n)
        l2g[e, 2 * SLOTS :] = o + 2 * n + np.arange(10)
    return DofMap(species, n_u, offsets, l2g, mesh.n_vertices)


class FESpace:
    """Broken displacement/deflection space plus continuous P1 stresses.

    Parameters
    ----------
    mesh : Mesh
    chart : Chart
    quad_degree : int
        Quadrature degree used for the weighted Gram matrices.
    """

    def __init__(self, mesh: Mesh, chart: Chart, quad_degree: int = 10):
        self.mesh = mesh
        self.chart = chart
        self.quad_degree = quad_degree
        self.dofmap = build_dof_map(mesh)
        nt = mesh.n_elements
        self.center = mesh.centroid
        self.h = mesh.h_tau
        q = element_quadrature(mesh.elem_vertices, self.center, self.h, chart, max(quad_degree, 7))
        w_coeffs = orthonormalize(q, _monomial_identity(10, nt))
        u_coeffs = np.zeros((nt, NMONO, SLOTS))
        n_u = self.dofmap.n_u
        for species, n in SPECIES_SIZE.items():
            idx = np.flatnonzero(n_u == n)
            if len(idx) == 0:
                continue
            sub = ElementQuadrature(q.points[idx], q.weights[idx], q.sqrt_a[idx], q.xi[idx], q.mono[idx])
            if species == "P3":
                u_coeffs[idx] = w_coeffs[idx]
            elif species == "P2":
                u_coeffs[idx, :, :6] = orthonormalize(sub, _monomial_identity(6, len(idx)))
            else:
                raw = np.zeros((len(idx), NMONO, 8))
                for k, e in enumerate(idx):
                    f = self.free_edge(e)[0]
                    subk = ElementQuadrature(*(a[k : k + 1] for a in (sub.points, sub.weights, sub.sqrt_a, sub.xi, sub.mono)))
                    raw[k, :, 6:] = _p3star(subk, mesh.elem_vertices[e], self.center[e], self.h[e], f)
                raw[:, :6, :6] = np.eye(6)
                u_coeffs[idx, :, :8] = orthonormalize(sub, raw)
        self.u_coeffs = u_coeffs
        self.w_coeffs = w_coeffs

    def free_edge(self, elem: int) -> list[int]:
        """Local indices of the free edges of ``elem``."""
        marks = self.mesh.edge_marker[self.mesh.elem_edges[elem]]
        return [i for i in range(3) if marks[i] == "F"]

    @property
    def ndof(self) -> int:
        return self.dofmap.N_uw

    def local_basis(self, elem: int, field: str = "u") -> LocalBasis:
        if field == "u":
            n = self.dofmap.n_u[elem]
            return LocalBasis(self.dofmap.species[elem], self.u_coeffs[elem, :, :n], self.center[elem], self.h[elem])
        if field == "w":
            return LocalBasis("P3", self.w_coeffs[elem], self.center[elem], self.h[elem])
        raise ValueError("field must be 'u' or 'w'")

    def basis_jets(self, elems: np.ndarray, x: np.ndarray, order: int):
        """Jets of the padded displacement and deflection bases.

        Parameters
        ----------
        elems : ndarray, shape (ne,)
        x : ndarray, shape (ne, nq, 2)

        Returns
        -------
        (ndarray, ndarray)
            Coefficient arrays of shape ``(nterms(order), ne, nq, 10)``.
        """
        xi = (x - self.center[elems][:, None, :]) / self.h[elems][:, None, None]
        mj = monomial_jets(xi, self.h[elems][:, None], order)
        cu = np.einsum("kenm,emb->kenb", mj, self.u_coeffs[elems], optimize=True)
        cw = np.einsum("kenm,emb->kenb", mj, self.w_coeffs[elems], optimize=True)
        return cu, cw
