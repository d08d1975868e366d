"""Differential geometry of the shell mid-surface.

A chart maps the coordinate domain into R^3.  Every geometric coefficient
(metric, curvature, third fundamental form, Christoffel symbols, and their
partial derivatives) is obtained by evaluating the chart on jets, so the
derivatives are exact up to rounding.

Index conventions
-----------------
Symmetric 2x2 tensors are held as nested lists ``t[α][β]`` of jets or
arrays.  Mixed and contravariant objects keep the upper index first:
``b_mix[α][β] = b^α_β`` and ``chris[γ][α][β] = Γ^γ_{αβ}``.  Numeric views
put the tensor axes in front of the point axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import factorial
from typing import Callable, Mapping, Sequence

import numpy as np

from . import jets
from .errors import DegenerateChart, InsufficientSmoothness
from .jets import Jet

DEGENERACY_TOL = 1e-14
UNIT_SQUARE = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


@dataclass(frozen=True)
class ElasticModuli:
    """Constant Lamé coefficients of the shell material."""

    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")

    @property
    def lam_star(self) -> float:
        """Effective plane-stress coefficient ``2μλ/(2μ+λ)``."""
        return 2.0 * self.mu * self.lam / (2.0 * self.mu + self.lam)

    @property
    def lam_compliance(self) -> float:
        """Coefficient ``λ/(2μ+3λ)`` of the compliance tensor."""
        return self.lam / (2.0 * self.mu + 3.0 * self.lam)


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------


class Chart:
    """Parameterization ``φ: Ω → R³`` of the mid-surface.

    Subclasses implement :meth:`embed`, written with the elementary
    functions of :mod:`koiter_dg.jets`, so that the same code evaluates on
    arrays and on jets.
    """

    name = "chart"

    def __init__(self, domain: Sequence[Sequence[float]] = UNIT_SQUARE):
        self.domain = np.asarray(domain, dtype=float)

    def embed(self, x1, x2):
        raise NotImplementedError

    @property
    def params(self) -> dict:
        return {}

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.embed(x[..., 0], x[..., 1])
        return np.stack([np.broadcast_to(np.asarray(c, dtype=float), x.shape[:-1]) for c in out], axis=-1)

    def jet(self, x, order: int) -> list[Jet]:
        """Jets of the three components of φ at the points ``x`` (shape ``(..., 2)``)."""
        x = np.asarray(x, dtype=float)
        x1 = jets.variable(x[..., 0], 0, order)
        x2 = jets.variable(x[..., 1], 1, order)
        out = []
        for c in self.embed(x1, x2):
            if not isinstance(c, Jet):
                c = jets.constant(np.broadcast_to(np.asarray(c, dtype=float), x.shape[:-1]), order)
            out.append(c)
        return out

    def derivative(self, x, i: int, j: int) -> np.ndarray:
        """Partial derivative ``∂₁^i ∂₂^j φ`` at ``x``; shape ``(..., 3)``."""
        jt = self.jet(x, i + j)
        return np.stack([c.partial(i, j) for c in jt], axis=-1)

    def derivative_callables(self) -> dict[tuple[int, int], Callable]:
        """Derivative callables through order 3, keyed by multi-index."""
        return {
            (i, j): (lambda x, i=i, j=j: self.derivative(x, i, j))
            for i, j in jets.multi_indices(3)
            if i + j > 0
        }

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class PlaneChart(Chart):
    """Flat plate ``φ(x) = (x₁, x₂, 0)``."""

    name = "plane"

    def embed(self, x1, x2):
        return x1, x2, 0.0 * x1


class CylinderChart(Chart):
    """Circular cylinder ``φ(x) = (R cos(x₁/R), R sin(x₁/R), x₂)``."""

    name = "cylinder"

    def __init__(self, radius: float = 1.0, domain=UNIT_SQUARE):
        super().__init__(domain)
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)

    @property
    def params(self):
        return {"radius": self.radius}

    def embed(self, x1, x2):
        r = self.radius
        t = x1 * (1.0 / r)
        return r * jets.cos(t), r * jets.sin(t), x2


class GraphChart(Chart):
    """Polynomial graph ``φ(x) = (x₁, x₂, Σ c_pq x₁^p x₂^q)``.

    Parameters
    ----------
    coefficients : mapping
        ``{(p, q): c_pq}``.
    """

    name = "graph"

    def __init__(self, coefficients: Mapping[tuple[int, int], float], domain=UNIT_SQUARE):
        super().__init__(domain)
        self.coefficients = {(int(p), int(q)): float(c) for (p, q), c in dict(coefficients).items()}

    @property
    def params(self):
        return {"coefficients": [[p, q, c] for (p, q), c in sorted(self.coefficients.items())]}

    def embed(self, x1, x2):
        z = 0.0 * x1
        for (p, q), c in self.coefficients.items():
            z = z + c * (x1**p) * (x2**q)
        return x1, x2, z


class HyparChart(GraphChart):
    """Hyperbolic paraboloid ``φ(x) = (x₁, x₂, k x₁ x₂)``."""

    name = "hypar"

    def __init__(self, k: float = 1.0, domain=UNIT_SQUARE):
        super().__init__({(1, 1): k}, domain)
        self.k = float(k)

    @property
    def params(self):
        return {"k": self.k}


class SphereChart(Chart):
    """Longitude/latitude patch of a sphere of radius R.

    ``φ(x) = R (cos θ cos x₁, cos θ sin x₁, sin θ)`` with ``θ = x₂ − θ₀``.
    The default offset centers the unit square on the equator.
    """

    name = "sphere"

    def __init__(self, radius: float = 1.0, lat_offset: float = 0.5, domain=UNIT_SQUARE):
        super().__init__(domain)
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.lat_offset = float(lat_offset)

    @property
    def params(self):
        return {"radius": self.radius, "lat_offset": self.lat_offset}

    def embed(self, x1, x2):
        r = self.radius
        th = x2 - self.lat_offset
        ct = jets.cos(th)
        return r * ct * jets.cos(x1), r * ct * jets.sin(x1), r * jets.sin(th)


class TabulatedChart(Chart):
    """Chart built from user callables.

    Parameters
    ----------
    phi : callable
        ``phi(x) -> (..., 3)`` for points ``x`` of shape ``(..., 2)``.
    derivatives : mapping, optional
        ``{(i, j): callable}`` for ``1 <= i+j <= 3``.  Missing entries, and
        all derivatives of order above 3, are produced by Richardson
        extrapolated central differences of the nearest supplied lower
        derivative.
    fd_step : float
        Base step of the finite-difference fallback.
    fd_tol : float
        Relative disagreement between successive Richardson estimates above
        which :class:`InsufficientSmoothness` is raised.
    """

    name = "tabulated"

    def __init__(
        self,
        phi: Callable,
        derivatives: Mapping[tuple[int, int], Callable] | None = None,
        domain=UNIT_SQUARE,
        fd_step: float = 1e-2,
        fd_tol: float = 1e-5,
    ):
        super().__init__(domain)
        self.phi = phi
        self.derivatives = dict(derivatives or {})
        for key in self.derivatives:
            if not 1 <= sum(key) <= 3:
                raise ValueError(f"derivative callables are accepted through order 3, got {key}")
        self.fd_step = fd_step
        self.fd_tol = fd_tol

    def embed(self, x1, x2):
        if isinstance(x1, Jet) or isinstance(x2, Jet):
            raise TypeError("tabulated charts build jets through TabulatedChart.jet")
        x = np.stack(np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float)), axis=-1)
        out = np.asarray(self.phi(x), dtype=float)
        return out[..., 0], out[..., 1], out[..., 2]

    def derivative_callables(self):
        return dict(self.derivatives)

    def _base(self, i: int, j: int):
        """Supplied callable of largest order below (i, j), plus the remainder."""
        best = ((0, 0), lambda x: np.asarray(self.phi(x), dtype=float))
        for (a, b), fn in self.derivatives.items():
            if a <= i and b <= j and a + b > sum(best[0]):
                best = ((a, b), fn)
        (a, b), fn = best
        return fn, i - a, j - b

    def derivative(self, x, i: int, j: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if i == 0 and j == 0:
            return np.asarray(self.phi(x), dtype=float)
        fn, di, dj = self._base(i, j)
        if di == 0 and dj == 0:
            return np.asarray(fn(x), dtype=float)
        h = self.fd_step
        est = [_central_difference(fn, x, di, dj, h / 2**k) for k in range(3)]
        r1 = (4.0 * est[1] - est[0]) / 3.0
        r2 = (4.0 * est[2] - est[1]) / 3.0
        scale = 1.0 + np.max(np.abs(r2))
        if np.max(np.abs(r1 - r2)) > self.fd_tol * scale:
            raise InsufficientSmoothness(
                f"finite-difference estimate of derivative {(i, j)} did not settle "
                f"(successive Richardson values differ by {np.max(np.abs(r1 - r2)):.3e})"
            )
        return r2

    def jet(self, x, order: int) -> list[Jet]:
        x = np.asarray(x, dtype=float)
        c = np.zeros((jets.nterms(order), 3) + x.shape[:-1])
        for k, (i, j) in enumerate(jets.multi_indices(order)):
            d = self.derivative(x, i, j)
            c[k] = np.moveaxis(d, -1, 0) / (factorial(i) * factorial(j))
        return [Jet(c[:, m], order) for m in range(3)]


def _central_difference(fn, x, di: int, dj: int, h: float) -> np.ndarray:
    """Tensor-product central difference ``∂₁^di ∂₂^dj fn`` with step ``h``."""
    out = 0.0
    for k1 in range(di + 1):
        w1 = (-1) ** k1 * _binom(di, k1)
        s1 = (di / 2.0 - k1) * h
        for k2 in range(dj + 1):
            w2 = (-1) ** k2 * _binom(dj, k2)
            s2 = (dj / 2.0 - k2) * h
            shift = np.array([s1, s2])
            out = out + w1 * w2 * np.asarray(fn(x + shift), dtype=float)
    return out / h ** (di + dj)


def _binom(n, k):
    return factorial(n) // (factorial(k) * factorial(n - k))


def make_chart(name: str, params: Mapping | None = None) -> Chart:
    """Construct a built-in chart from its name and parameters."""
    params = dict(params or {})
    table = {
        "plane": PlaneChart,
        "flat": PlaneChart,
        "cylinder": CylinderChart,
        "hypar": HyparChart,
        "sphere": SphereChart,
    }
    if name == "graph":
        coeffs = {(int(p), int(q)): float(c) for p, q, c in params.pop("coefficients")}
        return GraphChart(coeffs, **params)
    if name not in table:
        raise ValueError(f"unknown chart {name!r}; choose from {sorted(table) + ['graph']}")
    return table[name](**params)


# ---------------------------------------------------------------------------
# geometric coefficients
# ---------------------------------------------------------------------------


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _cross(u, v):
    return [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]


def _stack(t, depth: int) -> np.ndarray:
    """Numeric array from a nested list of jets/arrays of the given depth."""
    if depth == 0:
        return np.asarray(jets.value(t), dtype=float)
    return np.stack([_stack(s, depth - 1) for s in t])


@dataclass(frozen=True)
class GeometryEval:
    """Geometric coefficients of the surface at a batch of points.

    All entries are jets sharing the batch shape of the query points.  The
    jet order of ``b_cov``/``chris`` is ``order``; ``b_mix_cd`` has order
    ``order - 1`` and is ``None`` when ``order == 0``.
    """

    order: int
    a_vec: list
    a3: list
    a_cov: list
    a_con: list
    sqrt_a: Jet
    b_cov: list
    b_mix: list
    c_cov: list
    chris: list
    b_mix_cd: list | None = field(default=None)
    points: np.ndarray | None = field(default=None, repr=False)

    # numeric views --------------------------------------------------------
    @property
    def metric(self) -> np.ndarray:
        return _stack(self.a_cov, 2)

    @property
    def metric_inv(self) -> np.ndarray:
        return _stack(self.a_con, 2)

    @property
    def sqrt_det(self) -> np.ndarray:
        return self.sqrt_a.val

    @property
    def curvature(self) -> np.ndarray:
        return _stack(self.b_cov, 2)

    @property
    def curvature_mixed(self) -> np.ndarray:
        return _stack(self.b_mix, 2)

    @property
    def third_form(self) -> np.ndarray:
        return _stack(self.c_cov, 2)

    @property
    def christoffel(self) -> np.ndarray:
        return _stack(self.chris, 3)

    @property
    def normal(self) -> np.ndarray:
        return _stack(self.a3, 1)

    @property
    def tangents(self) -> np.ndarray:
        return _stack(self.a_vec, 2)

    @property
    def christoffel_grad(self) -> np.ndarray:
        """``∂_δ Γ^γ_{αβ}`` with axes ``[γ, α, β, δ]``."""
        return np.stack([_stack([[[g.d(dl) for g in row] for row in blk] for blk in self.chris], 3) for dl in (0, 1)], axis=3)

    @property
    def curvature_grad(self) -> np.ndarray:
        """``∂_δ b_{αβ}`` with axes ``[α, β, δ]``."""
        return np.stack([_stack([[b.d(dl) for b in row] for row in self.b_cov], 2) for dl in (0, 1)], axis=2)

    @property
    def curvature_mixed_cd(self) -> np.ndarray:
        """``b^γ_{α|β}`` with axes ``[γ, α, β]``."""
        if self.b_mix_cd is None:
            raise ValueError("geometry evaluated without derivatives of b")
        return _stack(self.b_mix_cd, 3)


def geometry_from_jets(phi: Sequence[Jet]) -> GeometryEval:
    """Build every coefficient from the jets of φ (order ≥ 2)."""
    k = phi[0].order
    if k < 2:
        raise ValueError("geometry needs φ jets of order at least 2")
    a_vec = [[c.d(al) for c in phi] for al in (0, 1)]
    a11 = _dot(a_vec[0], a_vec[0])
    a12 = _dot(a_vec[0], a_vec[1])
    a22 = _dot(a_vec[1], a_vec[1])
    a_cov = [[a11, a12], [a12, a22]]
    nrm = _cross(a_vec[0], a_vec[1])
    det = a11 * a22 - a12 * a12
    if np.any(np.sqrt(np.abs(det.val)) < DEGENERACY_TOL):
        raise DegenerateChart("|a_1 x a_2| fell below 1e-14: the chart is not regular at some point")
    sqrt_a = det.sqrt()
    inv_sqrt = sqrt_a.reciprocal()
    inv_det = inv_sqrt * inv_sqrt
    a_con = [[a22 * inv_det, -a12 * inv_det], [-a12 * inv_det, a11 * inv_det]]
    a3 = [c * inv_sqrt for c in nrm]
    dda = [[[c.d(al).d(be) for c in phi] for be in (0, 1)] for al in (0, 1)]
    b12 = _dot(a3, dda[0][1])
    b_cov = [[_dot(a3, dda[0][0]), b12], [b12, _dot(a3, dda[1][1])]]
    a_up = [[a_con[g][0] * a_vec[0][i] + a_con[g][1] * a_vec[1][i] for i in range(3)] for g in (0, 1)]
    chris = []
    for g in (0, 1):
        g12 = _dot(a_up[g], dda[0][1])
        chris.append([[_dot(a_up[g], dda[0][0]), g12], [g12, _dot(a_up[g], dda[1][1])]])
    b_mix = [[a_con[al][0] * b_cov[0][be] + a_con[al][1] * b_cov[1][be] for be in (0, 1)] for al in (0, 1)]
    c12 = b_mix[0][0] * b_cov[0][1] + b_mix[1][0] * b_cov[1][1]
    c_cov = [
        [b_mix[0][0] * b_cov[0][0] + b_mix[1][0] * b_cov[1][0], c12],
        [c12, b_mix[0][1] * b_cov[0][1] + b_mix[1][1] * b_cov[1][1]],
    ]
    b_mix_cd = None
    if k >= 3:
        b_mix_cd = [[[None, None], [None, None]], [[None, None], [None, None]]]
        for g in (0, 1):
            for al in (0, 1):
                for be in (0, 1):
                    t = b_mix[g][al].d(be)
                    for lm in (0, 1):
                        t = t + chris[g][lm][be] * b_mix[lm][al] - chris[lm][al][be] * b_mix[g][lm]
                    b_mix_cd[g][al][be] = t
    return GeometryEval(
        order=k - 2,
        a_vec=a_vec,
        a3=a3,
        a_cov=a_cov,
        a_con=a_con,
        sqrt_a=sqrt_a,
        b_cov=b_cov,
        b_mix=b_mix,
        c_cov=c_cov,
        chris=chris,
        b_mix_cd=b_mix_cd,
    )


def eval_geometry(chart: Chart, x, order: int = 1) -> GeometryEval:
    """Evaluate the surface coefficients at points ``x`` (shape ``(..., 2)``).

    Parameters
    ----------
    chart : Chart
    x : array_like
        Coordinate points; a single point ``(2,)`` is accepted.
    order : int
        Number of partial derivatives of ``b_αβ`` and ``Γ^γ_αβ`` carried by
        the returned jets.

    Raises
    ------
    DegenerateChart
        If ``|a_1 × a_2| < 1e-14`` at any point.
    """
    x = np.asarray(x, dtype=float)
    g = geometry_from_jets(chart.jet(x, order + 2))
    return replace(g, points=x)


# ---------------------------------------------------------------------------
# elastic and compliance tensors
# ---------------------------------------------------------------------------

VOIGT = ((0, 0), (1, 1), (0, 1))
SHEAR_MULT = np.array([1.0, 1.0, 2.0])


def _full_tensor(g, c1, c2):
    return np.einsum("ac...,bd...->abcd...", g, g) * c1 + np.einsum("bc...,ad...->abcd...", g, g) * c1 + np.einsum(
        "ab...,cd...->abcd...", g, g
    ) * c2


def elastic_tensor(geom: GeometryEval, mod: ElasticModuli) -> np.ndarray:
    """``a^{αβγδ}`` at the points of ``geom``; axes ``[α, β, γ, δ, *points]``."""
    return _full_tensor(geom.metric_inv, mod.mu, mod.lam_star)


def compliance_tensor(geom: GeometryEval, mod: ElasticModuli) -> np.ndarray:
    """``a_{αβγδ}`` at the points of ``geom``; axes ``[α, β, γ, δ, *points]``."""
    g = geom.metric
    s = 1.0 / (2.0 * mod.mu)
    return _full_tensor(g, 0.5 * s, -s * mod.lam_compliance)


def pack_tensor(t4: np.ndarray, kind: str = "elastic") -> np.ndarray:
    """3×3 packed form of a 4-tensor in the (11, 22, 12) layout.

    ``kind="elastic"`` maps engineering strains ``(γ11, γ22, 2γ12)`` to
    stresses ``(σ11, σ22, σ12)``; ``kind="compliance"`` maps stresses back to
    engineering strains.  The two packed matrices are mutual inverses.
    """
    out = np.empty((3, 3) + t4.shape[4:])
    for i, (a, b) in enumerate(VOIGT):
        for j, (c, d) in enumerate(VOIGT):
            out[i, j] = t4[a, b, c, d]
    if kind == "compliance":
        out = out * (SHEAR_MULT[:, None] * SHEAR_MULT[None, :]).reshape((3, 3) + (1,) * (t4.ndim - 4))
    elif kind != "elastic":
        raise ValueError(f"kind must be 'elastic' or 'compliance', got {kind!r}")
    return out


def raise_indices(a_con, t_cov):
    """``t^{αβ} = a^{αλ} a^{βγ} t_{λγ}`` for nested-list tensors."""
    m = [[a_con[a][0] * t_cov[0][b] + a_con[a][1] * t_cov[1][b] for b in (0, 1)] for a in (0, 1)]
    t12 = m[0][0] * a_con[1][0] + m[0][1] * a_con[1][1]
    return [
        [m[0][0] * a_con[0][0] + m[0][1] * a_con[0][1], t12],
        [t12, m[1][0] * a_con[1][0] + m[1][1] * a_con[1][1]],
    ]


def trace(a_con, t_cov):
    """``a^{αβ} t_{αβ}``."""
    return a_con[0][0] * t_cov[0][0] + 2.0 * (a_con[0][1] * t_cov[0][1]) + a_con[1][1] * t_cov[1][1]


def apply_elastic(a_con, t_cov, mod: ElasticModuli):
    """``a^{αβλγ} t_{λγ}`` for a symmetric covariant tensor (jets or arrays)."""
    up = raise_indices(a_con, t_cov)
    tr = trace(a_con, t_cov)
    s = [[2.0 * mod.mu * up[a][b] + mod.lam_star * (tr * a_con[a][b]) for b in (0, 1)] for a in (0, 1)]
    s[1][0] = s[0][1]
    return s


def apply_compliance(a_cov, s_con, mod: ElasticModuli):
    """``a_{αβλγ} s^{λγ}`` for a symmetric contravariant tensor (jets or arrays)."""
    low = raise_indices(a_cov, s_con)
    tr = trace(a_cov, s_con)
    f = 1.0 / (2.0 * mod.mu)
    t = [[f * low[a][b] - (f * mod.lam_compliance) * (tr * a_cov[a][b]) for b in (0, 1)] for a in (0, 1)]
    t[1][0] = t[0][1]
    return t


# ---------------------------------------------------------------------------
# seminorms and validation
# ---------------------------------------------------------------------------


def _lattice(tri: np.ndarray, n: int) -> np.ndarray:
    """Barycentric lattice points of one triangle (3, 2) or a stack (..., 3, 2)."""
    lam = np.array([(1 - i / n - j / n, i / n, j / n) for i in range(n + 1) for j in range(n + 1 - i)])
    return np.einsum("pk,...kd->...pd", lam, tri)


def geometry_seminorms(chart: Chart, tri, sample_order: int = 6):
    """Sampled ``(|Γ|_{2,∞,τ}, |b|_{3,∞,τ})`` on the triangle ``tri``.

    Each seminorm is the sum over tensor components of the largest
    magnitude of any partial derivative of the stated order, taken over a
    barycentric lattice with ``sample_order`` subdivisions per side.  A
    stack of triangles (shape ``(nt, 3, 2)``) gives two arrays of length
    ``nt``.
    """
    tri = np.asarray(tri, dtype=float)
    x = _lattice(tri, max(int(sample_order), 1))
    g = eval_geometry(chart, x, order=3)

    def sup(c, k):
        return np.max(np.stack([np.abs(c.partial(i, k - i)) for i in range(k + 1)]), axis=(0, -1))

    gam = sum(sup(comp, 2) for blk in g.chris for row in blk for comp in row)
    bsn = sum(sup(comp, 3) for row in g.b_cov for comp in row)
    if tri.ndim == 2:
        return float(gam), float(bsn)
    return np.asarray(gam), np.asarray(bsn)


def fd_validate(chart: Chart, x, h: float = 1e-4) -> float:
    """Largest relative discrepancy between derivative callables and central differences.

    Each callable of order ``k`` is compared with the central difference of
    the callable of order ``k-1`` (or of φ) one step lower in the same
    multi-index.
    """
    x = np.asarray(x, dtype=float)
    calls = chart.derivative_callables()
    worst = 0.0
    for (i, j), fn in calls.items():
        if i > 0:
            parent, axis = (i - 1, j), 0
        else:
            parent, axis = (i, j - 1), 1
        pf = chart if parent == (0, 0) else calls.get(parent, lambda y, p=parent: chart.derivative(y, *p))
        e = np.zeros(2)
        e[axis] = h
        cd = (np.asarray(pf(x + e), float) - np.asarray(pf(x - e), float)) / (2.0 * h)
        an = np.asarray(fn(x), float)
        worst = max(worst, float(np.max(np.abs(an - cd) / (1.0 + np.abs(an)))))
    return worst
