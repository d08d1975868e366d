"""Matrix assembly: symmetry, rigid-motion kernels, field-provider agreement, loads."""

import numpy as np
import pytest
import scipy.sparse as sp

from koiter_dg import _kernels
from koiter_dg.analysis import interpolate, named_case
from koiter_dg.assembly import (
    BasisField,
    CoefficientField,
    CoefficientStress,
    ExactField,
    FormContext,
    Loads,
    P1StressBasis,
    assemble_a,
    assemble_b,
    assemble_c,
    assemble_load,
    assemble_norm_grams,
    assemble_system,
    default_penalty,
    symmetry_defect,
)
from koiter_dg.fe_space import FESpace
from koiter_dg.geometry import CylinderChart, ElasticModuli, HyparChart, PlaneChart, SphereChart
from koiter_dg.mesh import square_mesh

FREE = dict(left="F", right="F", bottom="F", top="F")
MIXED = dict(left="D", right="F", bottom="S", top="F")


def _ctx(chart, n=2, markers=MIXED, q=8):
    return FormContext(FESpace(square_mesh(n, markers), chart), ElasticModuli(1.0, 0.7), q)


@pytest.fixture(scope="module", params=[PlaneChart(), CylinderChart(), HyparChart(), SphereChart()], ids=lambda c: type(c).__name__)
def ctx(request):
    return _ctx(request.param)


def test_symmetry(ctx):
    assert symmetry_defect(assemble_a(ctx)) < 1e-12
    assert symmetry_defect(assemble_c(ctx)) < 1e-12
    for g in assemble_norm_grams(ctx):
        assert symmetry_defect(g) < 1e-12


def test_shapes(ctx):
    n = ctx.space.ndof
    nm = 3 * ctx.mesh.n_vertices
    assert assemble_a(ctx).shape == (n, n)
    assert assemble_b(ctx).shape == (nm, n)
    assert assemble_c(ctx).shape == (nm, nm)


def test_compliance_and_norm_grams_are_positive(ctx):
    c = assemble_c(ctx).toarray()
    assert np.linalg.eigvalsh(c).min() > 0
    for g in assemble_norm_grams(ctx):
        assert np.linalg.eigvalsh(g.toarray()).min() > 0


def test_default_penalty_values():
    flat = _ctx(PlaneChart())
    assert flat.curvature_factor == pytest.approx(1.0)
    assert default_penalty(_ctx(PlaneChart(), markers=dict(left="D"))) == pytest.approx(
        100 * flat.default_penalty_base, rel=1e-12
    )
    cyl = FormContext(FESpace(square_mesh(2, MIXED), CylinderChart()), ElasticModuli(), 8)
    assert cyl.curvature_factor == pytest.approx((1 + np.sqrt(2.0)) ** 2, rel=1e-12)
    # μ = λ = 1: largest eigenvalue of the flat elastic tensor in Mandel form is 10/3
    assert cyl.default_penalty_base == pytest.approx(10.0 / 3.0, rel=1e-12)


def test_flat_rigid_motions_are_in_the_kernel():
    ctx = _ctx(PlaneChart(), n=3, markers=FREE)
    rigid = ExactField(lambda x1, x2: (0.3 - 0.7 * x2, -0.2 + 0.7 * x1), lambda x1, x2: 0.5 + 0.4 * x1 - 1.1 * x2)
    x = interpolate(rigid, ctx.space)
    a = assemble_a(ctx)
    b = assemble_b(ctx)
    assert np.abs(a @ x).max() < 1e-10 * abs(a).max()
    assert np.abs(b @ x).max() < 1e-12


def test_coefficient_field_reproduces_matrix_products(ctx):
    rng = np.random.default_rng(0)
    x = rng.normal(size=ctx.space.ndof)
    m = rng.normal(size=3 * ctx.mesh.n_vertices)
    a = assemble_a(ctx)
    fld = CoefficientField(ctx.space, x)
    col = assemble_a(ctx, test=BasisField(ctx.space), trial=fld).toarray()[:, 0]
    np.testing.assert_allclose(col, a @ x, atol=1e-9 * np.abs(a @ x).max())
    b = assemble_b(ctx)
    row = assemble_b(ctx, stress=CoefficientStress(ctx.mesh, m), trial=BasisField(ctx.space)).toarray()[0]
    np.testing.assert_allclose(row, b.T @ m, atol=1e-11 * np.abs(b.T @ m).max())
    c = assemble_c(ctx)
    cc = assemble_c(ctx, test=P1StressBasis(ctx.mesh), trial=CoefficientStress(ctx.mesh, m)).toarray()[:, 0]
    np.testing.assert_allclose(cc, c @ m, atol=1e-12 * np.abs(c @ m).max())


def test_constant_loads_integrate_exactly():
    ctx = _ctx(PlaneChart(), n=2, markers=dict(left="D", right="F", bottom="D", top="D"))
    loads = Loads.constant(p=(0.0, 0.0, 2.5), q=(0.0, 0.0, 0.75), m=0.0)
    f = assemble_load(ctx, loads)
    one = interpolate(ExactField(lambda x1, x2: (0 * x1, 0 * x1), lambda x1, x2: 1.0 + 0 * x1), ctx.space)
    # ∫ p³ over the unit square plus q³ over the free right side
    assert f @ one == pytest.approx(2.5 + 0.75, rel=1e-12)
    tang = Loads.constant(p=(1.0, -2.0, 0.0), q=(0.5, 0.0, 0.0))
    u1 = interpolate(ExactField(lambda x1, x2: (1.0 + 0 * x1, 0 * x1), lambda x1, x2: 0 * x1), ctx.space)
    assert assemble_load(ctx, tang) @ u1 == pytest.approx(1.0 + 0.5, rel=1e-12)


@pytest.mark.parametrize("twist", ["weak", "literal"])
def test_manufactured_consistency_small_mesh(twist):
    case = named_case("clamped_plate", 1e-2)
    r = case.consistency_residual(square_mesh(3, case.markers), twist=twist)
    assert r["residual"] < 1e-10


def test_system_blocks_and_validation():
    ctx = _ctx(PlaneChart())
    s = assemble_system(ctx, 0.1)
    k = s.block_matrix()
    assert k.shape == (s.n_uw + s.n_m,) * 2
    assert symmetry_defect(k) < 1e-12
    assert s.rhs().shape == (k.shape[0],)
    with pytest.raises(ValueError):
        assemble_system(ctx, 0.0)
    with pytest.raises(ValueError):
        assemble_a(ctx, twist="strong")


def test_numba_and_numpy_paths_agree(monkeypatch):
    ctx = _ctx(HyparChart(), markers=MIXED)
    a1 = assemble_a(ctx)
    monkeypatch.setenv("KOITER_DG_NUMBA", "0")
    assert not _kernels.numba_enabled()
    ctx0 = _ctx(HyparChart(), markers=MIXED)
    a0 = assemble_a(ctx0)
    assert abs(a1 - a0).max() <= 1e-12 * abs(a0).max()


def test_triplet_accumulation_is_order_independent():
    ctx = _ctx(PlaneChart(), n=2, q=6)
    a = assemble_a(ctx)
    ctx_small = FormContext(ctx.space, ctx.moduli, 6, chunk_size=3)
    b = assemble_a(ctx_small)
    assert sp.issparse(b)
    assert abs(a - b).max() <= 1e-12 * abs(a).max()
