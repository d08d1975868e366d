"""Interpolation, manufactured cases, error reports and the geometry indicator."""

import numpy as np
import pytest

from koiter_dg.analysis import (
    CASES,
    error_report,
    interpolate,
    interpolation_defects,
    key_orthogonality_check,
    l2_errors,
    geometry_indicator,
    manufactured_case,
    named_case,
    project_stress,
)
from koiter_dg.assembly import CoefficientField, DifferenceField, ExactField, FormContext, assemble_system
from koiter_dg.errors import DifferentiationToleranceExceeded
from koiter_dg.fe_space import FESpace
from koiter_dg.geometry import CylinderChart, ElasticModuli, HyparChart, PlaneChart, make_chart
from koiter_dg.mesh import square_mesh
from koiter_dg.solver import solve_mixed

DFFF = dict(left="D", right="F", bottom="F", top="F")

SMOOTH = ExactField(
    lambda x1, x2: (np.sin(x1 + 2 * x2), np.cos(x1 * x2)),
    lambda x1, x2: np.exp(x1) * np.sin(x2),
)


def _ctx(chart, n, markers=DFFF, q=10):
    return FormContext(FESpace(square_mesh(n, markers), chart), ElasticModuli(), q)


@pytest.mark.parametrize("chart", [PlaneChart(), HyparChart()], ids=["plane", "hypar"])
def test_polynomials_are_reproduced(chart):
    ctx = _ctx(chart, 2)
    poly = ExactField(
        lambda x1, x2: (1 + x1 - 2 * x1 * x2 + x2**2, 0.5 * x1**2 - x2),
        lambda x1, x2: x1**3 - x1 * x2**2 + 2 * x2 - 1,
    )
    x = interpolate(poly, ctx.space)
    err = l2_errors(DifferenceField(poly, CoefficientField(ctx.space, x)), ctx)
    assert err["u"] < 1e-12 and err["w"] < 1e-12


def test_interpolant_matches_its_moments():
    space = FESpace(square_mesh(3, DFFF), CylinderChart())
    x = interpolate(SMOOTH, space)
    d = interpolation_defects(SMOOTH, space, x)
    assert d["u"] < 1e-10 and d["w"] < 1e-10


def test_interpolation_error_decreases():
    errs = []
    for n in (2, 4):
        ctx = _ctx(PlaneChart(), n)
        x = interpolate(SMOOTH, ctx.space)
        errs.append(l2_errors(DifferenceField(SMOOTH, CoefficientField(ctx.space, x)), ctx)["w"])
    # cubic deflections: fourth order in L²
    assert np.log2(errs[0] / errs[1]) > 3.5


@pytest.mark.parametrize("n", [2, 4])
def test_flat_key_orthogonality(n):
    r = key_orthogonality_check(_ctx(PlaneChart(), n, q=12), SMOOTH)
    assert r["normalized"] < 1e-9
    assert r["scale"] > 0


def test_stress_projection_reproduces_linear_fields():
    ctx = _ctx(CylinderChart(), 2)
    m = project_stress(lambda x: [[1 + x[..., 0], 2 * x[..., 1]], [2 * x[..., 1], 3 - x[..., 0] + x[..., 1]]], ctx)
    v = ctx.mesh.vertices
    np.testing.assert_allclose(m[0::3], 1 + v[:, 0], atol=1e-12)
    np.testing.assert_allclose(m[1::3], 3 - v[:, 0] + v[:, 1], atol=1e-12)
    np.testing.assert_allclose(m[2::3], 2 * v[:, 1], atol=1e-12)


@pytest.mark.parametrize("name", sorted(CASES))
def test_named_cases_are_consistent(name):
    case = named_case(name, 1e-2)
    assert case.self_check(square_mesh(2, case.markers), tol=1e-7, quad_degree=10) < 1e-7


def test_self_check_raises():
    case = named_case("cylinder_clamped_free", 1e-2)
    with pytest.raises(DifferentiationToleranceExceeded):
        case.self_check(square_mesh(2, case.markers), tol=1e-30, quad_degree=2)


def test_unknown_case():
    with pytest.raises(KeyError, match="unknown case"):
        named_case("dome", 1e-2)


def test_custom_case_defaults_to_clamped():
    case = manufactured_case(PlaneChart(), lambda x1, x2: (0 * x1, 0 * x1), lambda x1, x2: x1**2, 0.1)
    assert set(case.markers.values()) == {"D"}


def test_polynomial_case_is_solved_exactly():
    case = named_case("plate_polynomial", 1e-3)
    ctx = FormContext(FESpace(square_mesh(2, case.markers), case.chart), case.moduli, 8)
    sol = solve_mixed(assemble_system(ctx, case.eps, case.loads()))
    rep = error_report(sol, case, ctx)
    assert rep.rel_Hh < 1e-9
    assert rep.err_M_weak < 1e-6
    assert rep.row()["n_elements"] == 8


def test_flat_and_cylinder_indicator_is_one():
    mesh = square_mesh(4, DFFF)
    assert geometry_indicator(mesh, PlaneChart(), 1e-4)["factor"] == 1.0
    assert geometry_indicator(mesh, CylinderChart(), 1e-4)["factor"] == 1.0


def test_indicator_gamma_term_is_third_order():
    chart = make_chart("graph", {"coefficients": [[3, 1, 1.0]]})
    g = [geometry_indicator(square_mesh(n, DFFF), chart, 1e-3)["gamma_term"].max() for n in (4, 8, 16)]
    ratios = [g[0] / g[1], g[1] / g[2]]
    assert all(6.0 < r < 10.0 for r in ratios)
    assert geometry_indicator(square_mesh(4, DFFF), chart, 1e-3)["factor"] > 1.0


def test_indicator_rejects_bad_eps():
    with pytest.raises(ValueError):
        geometry_indicator(square_mesh(2, DFFF), PlaneChart(), 0.0)
