"""Direct mixed solver and generalized eigenvalue tools."""

import warnings

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from koiter_dg.analysis import named_case
from koiter_dg.assembly import (
    FormContext,
    assemble_b,
    assemble_gram_ah,
    assemble_gram_hh,
    assemble_gram_vh,
    assemble_system,
    default_penalty,
)
from koiter_dg.errors import CoercivityWarning, SingularSystem
from koiter_dg.fe_space import FESpace
from koiter_dg.geometry import CylinderChart, ElasticModuli, PlaneChart
from koiter_dg.mesh import square_mesh
from koiter_dg.solver import (
    b_continuity,
    max_generalized_eig,
    min_generalized_eig,
    negative_inertia,
    relative_residual,
    solve_mixed,
    weak_seminorm,
)

MARKERS = dict(left="D", right="F", bottom="F", top="F")


@pytest.fixture(scope="module")
def ctx():
    return FormContext(FESpace(square_mesh(2, MARKERS), CylinderChart()), ElasticModuli(), 8)


def test_solution_satisfies_both_block_equations(ctx):
    case = named_case("cylinder_clamped_free", 1e-2)
    system = assemble_system(ctx, 1e-2, case.loads())
    sol = solve_mixed(system)
    assert max(relative_residual(system, sol.uw, sol.m)) < 1e-12
    assert sol.residual == relative_residual(system, sol.uw, sol.m)
    assert sol.stress(0).shape == (3,)


def test_zero_load_gives_zero_solution(ctx):
    sol = solve_mixed(assemble_system(ctx, 0.1))
    assert not np.any(sol.uw) and not np.any(sol.m)


def test_zero_diagonal_is_singular(ctx):
    case = named_case("cylinder_clamped_free", 1e-2)
    system = assemble_system(ctx, 1e-2, case.loads())
    system.A = sp.csr_matrix(system.A.shape)
    with pytest.raises(SingularSystem):
        solve_mixed(system)


def test_coercivity_warning_for_tiny_penalty(ctx):
    case = named_case("cylinder_clamped_free", 1e-2)
    system = assemble_system(ctx, 1e-2, case.loads(), penalty=1e-2 * default_penalty(ctx))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            solve_mixed(system, check_coercivity=True)
        except SingularSystem:
            pass
    assert any(issubclass(w.category, CoercivityWarning) for w in caught)


def _sym(n, seed, shift=0.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, n))
    return 0.5 * (x + x.T) + shift * np.eye(n)


@given(n=st.integers(2, 25), seed=st.integers(0, 10_000), shift=st.floats(-3.0, 3.0))
@settings(max_examples=30, deadline=None)
def test_negative_inertia_matches_dense_spectrum(n, seed, shift):
    k = _sym(n, seed, shift) + 4.0 * np.diag(np.sign(np.arange(n) % 3 - 0.5)) * n
    ev = la.eigvalsh(k)
    if np.abs(ev).min() < 1e-8:
        return
    assert negative_inertia(sp.csc_matrix(k)) == int(np.sum(ev < 0))


def test_eigen_paths_agree(ctx):
    g_hh = assemble_gram_hh(ctx)
    g_ah = assemble_gram_ah(ctx)
    dense = min_generalized_eig(g_ah, g_hh, k=3)
    sparse = min_generalized_eig(g_ah, g_hh, k=3, dense_limit=0)
    np.testing.assert_allclose(sparse, dense, rtol=1e-8, atol=1e-12)
    top_d = max_generalized_eig(g_ah, g_hh)
    top_s = max_generalized_eig(g_ah, g_hh, dense_limit=0)
    assert top_s == pytest.approx(top_d, rel=1e-8)
    assert 0 < dense[0] <= top_d


def test_identical_pencils_have_unit_spectrum(ctx):
    g = assemble_gram_hh(ctx)
    assert min_generalized_eig(g, g)[0] == pytest.approx(1.0)
    assert max_generalized_eig(g, g) == pytest.approx(1.0)


def test_weak_seminorm_and_continuity_constant(ctx):
    b = assemble_b(ctx)
    g_hh = assemble_gram_hh(ctx)
    g_vh = assemble_gram_vh(ctx)
    m = np.random.default_rng(3).normal(size=b.shape[0])
    bd = b.toarray()
    ref = np.sqrt(m @ bd @ np.linalg.solve(g_hh.toarray(), bd.T @ m))
    assert weak_seminorm(m, b, g_hh) == pytest.approx(ref, rel=1e-10)
    assert weak_seminorm(np.zeros_like(m), b, g_hh) == 0.0
    beta = b_continuity(b, g_hh, g_vh)
    assert weak_seminorm(m, b, g_hh) <= beta * np.sqrt(m @ (g_vh @ m)) * (1 + 1e-10)


def test_flat_rigid_body_free_mesh_singular_pencil():
    ctx = FormContext(FESpace(square_mesh(2, dict(left="F", right="F", bottom="F", top="F")), PlaneChart()), ElasticModuli(), 6)
    from koiter_dg.assembly import assemble_a

    # six rigid motions of the flat plate span the kernel of A
    lam = min_generalized_eig(assemble_a(ctx), assemble_gram_hh(ctx), k=7)
    assert np.all(np.abs(lam[:6]) < 1e-8 * lam[6])
    assert lam[6] > 0


def test_factorization_workspace_exhaustion_is_memory_error(ctx, monkeypatch):
    import koiter_dg.solver as mod

    def exhausted(*args, **kwargs):
        raise SystemError("gstrf was called with invalid arguments")

    case = named_case("cylinder_clamped_free", 1e-2)
    system = assemble_system(ctx, 1e-2, case.loads())
    monkeypatch.setattr(mod.spla, "splu", exhausted)
    with pytest.raises(MemoryError, match="ran out of memory"):
        solve_mixed(system)
