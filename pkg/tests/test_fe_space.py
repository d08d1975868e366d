"""Quadrature exactness, local bases and the dof layout."""

from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koiter_dg.errors import UnsupportedDegree
from koiter_dg.fe_space import (
    FESpace,
    build_dof_map,
    build_p3star_basis,
    element_quadrature,
    monomial_jets,
    monomial_values,
    poly_mul,
    quadrature,
)
from koiter_dg.geometry import CylinderChart, HyparChart, PlaneChart, SphereChart
from koiter_dg.mesh import square_mesh


def _triangle_monomial(i, j):
    # ∫ x^i y^j over the reference triangle
    return factorial(i) * factorial(j) / factorial(i + j + 2)


@pytest.mark.parametrize("degree", range(0, 13))
def test_triangle_rule_exactness(degree):
    rule = quadrature("triangle", degree)
    x, y = rule.points[:, 1], rule.points[:, 2]
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            approx = 0.5 * np.sum(rule.weights * x**i * y**j)
            assert approx == pytest.approx(_triangle_monomial(i, j), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("degree", range(0, 13))
def test_edge_rule_exactness(degree):
    rule = quadrature("edge", degree)
    for k in range(degree + 1):
        assert np.sum(rule.weights * rule.points**k) == pytest.approx(1.0 / (k + 1), rel=1e-12)


@given(
    verts=st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=3, max_size=3),
    i=st.integers(0, 5),
    j=st.integers(0, 5),
)
@settings(max_examples=30, deadline=None)
def test_mapped_rule_integrates_on_any_triangle(verts, i, j):
    v = np.array(verts)
    area = 0.5 * abs((v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1]) - (v[1, 1] - v[0, 1]) * (v[2, 0] - v[0, 0]))
    if area < 1e-3:
        return
    rule = quadrature("triangle", i + j)
    p = rule.map_triangle(v)
    got = area * np.sum(rule.weights * p[:, 0] ** i * p[:, 1] ** j)
    fine = quadrature("triangle", 12)
    q = fine.map_triangle(v)
    ref = area * np.sum(fine.weights * q[:, 0] ** i * q[:, 1] ** j)
    assert got == pytest.approx(ref, rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("bad", [-1, 13, 2.5])
def test_unsupported_degree(bad):
    with pytest.raises(UnsupportedDegree):
        quadrature("triangle", bad)


def test_monomial_jets_differentiate_values():
    rng = np.random.default_rng(0)
    xi = rng.uniform(-1, 1, (4, 2))
    h = 0.3
    mj = monomial_jets(xi, h, 2)
    np.testing.assert_allclose(mj[0], monomial_values(xi))
    eps = 1e-6
    e = np.array([eps, 0.0])
    fd = (monomial_values(xi + e / h) - monomial_values(xi - e / h)) / (2 * eps)
    np.testing.assert_allclose(mj[1], fd, atol=1e-6)


def test_poly_mul_rejects_quartic():
    a = np.zeros(10)
    a[3] = 1.0  # x²
    with pytest.raises(ValueError):
        poly_mul(a, a)


def test_species_and_dof_layout():
    m = square_mesh(2, dict(left="D", right="F", bottom="F", top="F"))
    dm = build_dof_map(m)
    counts = {s: dm.species.count(s) for s in ("P2", "P3*", "P3")}
    assert counts["P3"] == 1 and counts["P3*"] >= 1
    assert dm.N_uw == int(np.sum(2 * dm.n_u + 10))
    seen = np.concatenate([dm.element_dofs(e) for e in range(m.n_elements)])
    np.testing.assert_array_equal(np.sort(seen), np.arange(dm.N_uw))
    assert dm.m_dofs([0, 2]).tolist() == [[0, 1, 2], [6, 7, 8]]


@pytest.mark.parametrize("chart", [PlaneChart(), CylinderChart(), HyparChart(), SphereChart()], ids=lambda c: type(c).__name__)
def test_local_bases_are_weighted_orthonormal(chart):
    m = square_mesh(2, dict(left="D", right="F", bottom="F", top="F"))
    space = FESpace(m, chart)
    for e in range(m.n_elements):
        q = element_quadrature(m.elem_vertices[e], space.center[e], space.h[e], chart, 10)
        w = q.weights[0] * q.sqrt_a[0]
        for field in ("u", "w"):
            b = space.local_basis(e, field)
            v = b.values(q.points[0])
            np.testing.assert_allclose(v.T @ (w[:, None] * v), np.eye(b.size), atol=1e-11)


def test_local_spaces_contain_quadratics():
    m = square_mesh(2, dict(left="D", right="F", bottom="S", top="F"))
    space = FESpace(m, HyparChart())
    for e in range(m.n_elements):
        b = space.local_basis(e, "u")
        # span check through least squares on sample points
        x = space.center[e] + 0.2 * space.h[e] * np.random.default_rng(e).uniform(-1, 1, (20, 2))
        target = np.stack([np.ones(20), x[:, 0], x[:, 1] ** 2, x[:, 0] * x[:, 1]], axis=1)
        v = b.values(x)
        coef, *_ = np.linalg.lstsq(v, target, rcond=None)
        np.testing.assert_allclose(v @ coef, target, atol=1e-10)


@pytest.mark.parametrize("chart", [PlaneChart(), SphereChart()], ids=lambda c: type(c).__name__)
@pytest.mark.parametrize("free_edge", [0, 1, 2])
def test_enrichment_traces_and_orthogonality(chart, free_edge):
    verts = np.array([[0.1, 0.2], [0.6, 0.25], [0.3, 0.7]])
    coeffs, center, h = build_p3star_basis(verts, chart, free_edge)
    a = verts[(free_edge + 1) % 3]
    b = verts[(free_edge + 2) % 3]
    t = np.linspace(0, 1, 7)
    pts = a + t[:, None] * (b - a)
    vals = monomial_values((pts - center) / h) @ coeffs
    np.testing.assert_allclose(vals[:, 0], 1.0, atol=1e-12)
    np.testing.assert_allclose(vals[:, 1], 1.0 - t, atol=1e-12)
    q = element_quadrature(verts, center, h, chart, 10)
    w = q.weights[0] * q.sqrt_a[0]
    enr = q.mono[0] @ coeffs
    p2 = q.mono[0][:, :6]
    np.testing.assert_allclose(p2.T @ (w[:, None] * enr), 0.0, atol=1e-12)


def test_enrichment_needs_enough_quadrature():
    with pytest.raises(UnsupportedDegree):
        build_p3star_basis(np.eye(3)[:, :2], PlaneChart(), 0, degree=5)
