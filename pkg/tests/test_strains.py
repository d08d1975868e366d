"""Strain kernels: rigid-motion annihilation, flat closed forms, local fields."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koiter_dg import jets
from koiter_dg.fe_space import FESpace
from koiter_dg.geometry import CylinderChart, GraphChart, HyparChart, PlaneChart, SphereChart, eval_geometry
from koiter_dg.mesh import square_mesh
from koiter_dg.strains import (
    LocalField,
    bending_strain,
    bending_strain_jets,
    divergence_contra,
    membrane_strain,
    membrane_strain_jets,
    strain_covderiv,
)

CHARTS = [PlaneChart(), CylinderChart(0.8), HyparChart(1.1), SphereChart(1.2), GraphChart({(3, 1): 0.7, (0, 2): 0.2})]
vec3 = st.tuples(*(st.floats(-1, 1),) * 3)


def _rigid(chart, x, c, omega):
    # u_α = V·a_α and w = V·a₃ for V = c + ω × φ
    g = eval_geometry(chart, x, order=2)
    phi = chart.jet(x, 4)
    cross = [omega[1] * phi[2] - omega[2] * phi[1], omega[2] * phi[0] - omega[0] * phi[2], omega[0] * phi[1] - omega[1] * phi[0]]
    v = [cross[i] + c[i] for i in range(3)]
    u = [sum(v[i] * g.a_vec[al][i] for i in range(3)) for al in (0, 1)]
    w = sum(v[i] * g.a3[i] for i in range(3))
    return u, w, g


@pytest.mark.parametrize("chart", CHARTS, ids=lambda c: type(c).__name__)
@given(c=vec3, omega=vec3)
@settings(max_examples=10, deadline=None)
def test_rigid_motions_have_zero_strain(chart, c, omega):
    x = np.array([[0.2, 0.3], [0.8, 0.6], [0.5, 0.95]])
    u, w, g = _rigid(chart, x, c, omega)
    gam = membrane_strain((u, w), g)
    rho = bending_strain((u, w), g)
    assert np.abs(gam).max() < 1e-12
    assert np.abs(rho).max() < 1e-12
    assert np.abs(strain_covderiv((u, w), g, 1)).max() < 1e-11


def test_flat_strains_are_symmetric_gradient_and_hessian():
    x = np.random.default_rng(0).uniform(0, 1, (6, 2))
    g = eval_geometry(PlaneChart(), x, order=1)
    a, b = jets.variable(x[:, 0], 0, 3), jets.variable(x[:, 1], 1, 3)
    u = [a * a * b, jets.sin(a + 2.0 * b)]
    w = jets.exp(a) * b * b
    gam = membrane_strain((u, w), g)
    rho = bending_strain((u, w), g)
    X, Y = x[:, 0], x[:, 1]
    np.testing.assert_allclose(gam[0, 0], 2 * X * Y, atol=1e-13)
    np.testing.assert_allclose(gam[1, 1], 2 * np.cos(X + 2 * Y), atol=1e-13)
    np.testing.assert_allclose(gam[0, 1], 0.5 * (X * X + np.cos(X + 2 * Y)), atol=1e-13)
    np.testing.assert_allclose(rho[0, 0], np.exp(X) * Y * Y, atol=1e-13)
    np.testing.assert_allclose(rho[0, 1], 2 * np.exp(X) * Y, atol=1e-13)
    np.testing.assert_allclose(rho[1, 1], 2 * np.exp(X), atol=1e-13)


def test_cylinder_membrane_strain_closed_form():
    r = 0.8
    x = np.random.default_rng(1).uniform(0, 1, (5, 2))
    g = eval_geometry(CylinderChart(r), x, order=1)
    a, b = jets.variable(x[:, 0], 0, 2), jets.variable(x[:, 1], 1, 2)
    u = [a * b, b * b]
    w = jets.cos(a)
    gam = membrane_strain((u, w), g)
    b11 = g.curvature[0, 0]
    np.testing.assert_allclose(gam[0, 0], x[:, 1] - b11 * np.cos(x[:, 0]), atol=1e-13)
    np.testing.assert_allclose(gam[1, 1], 2 * x[:, 1], atol=1e-13)
    np.testing.assert_allclose(gam[0, 1], 0.5 * x[:, 0], atol=1e-13)


def test_local_field_matches_pair_of_jets():
    m = square_mesh(1)
    chart = HyparChart()
    space = FESpace(m, chart)
    rng = np.random.default_rng(2)
    ub, wb = space.local_basis(0, "u"), space.local_basis(0, "w")
    f = LocalField(ub, wb, rng.normal(size=(2, ub.size)), rng.normal(size=wb.size))
    x = np.array([[0.6, 0.2], [0.7, 0.1]])
    g = eval_geometry(chart, x, order=1)
    u, w = f.jets(x, 2)
    np.testing.assert_allclose(bending_strain(f, g), bending_strain((u, w), g))
    np.testing.assert_allclose(membrane_strain(f, g), membrane_strain((u, w), g))
    with pytest.raises(ValueError):
        strain_covderiv(f, g, 3)


def test_jet_kernels_are_symmetric():
    x = np.array([[0.3, 0.4]])
    g = eval_geometry(SphereChart(), x, order=1)
    a, b = jets.variable(x[:, 0], 0, 3), jets.variable(x[:, 1], 1, 3)
    rho = bending_strain_jets([a * b, a], b * b * a, g)
    gam = membrane_strain_jets([a * b, a], b * b * a, g)
    assert rho[0][1] is rho[1][0] and gam[0][1] is gam[1][0]


def test_divergence_of_constant_flat_tensor_vanishes():
    x = np.array([[0.3, 0.4], [0.1, 0.9]])
    g = eval_geometry(PlaneChart(), x, order=1)
    one = jets.constant(np.ones(2), 2)
    div = divergence_contra([[one, 2.0 * one], [2.0 * one, 3.0 * one]], g)
    assert np.abs(div[0].val).max() == 0.0 and np.abs(div[1].val).max() == 0.0
