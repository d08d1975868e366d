"""Direct solution of the mixed system and generalized eigenvalue tools."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AssembledSystem
from .errors import CoercivityWarning, NoConvergence, SingularSystem

DENSE_LIMIT = 1500


@dataclass
class FieldCoefficients:
    """Discrete solution ``(u^h, w^h, M^h)``.

    Attributes
    ----------
    uw : ndarray
        Coefficients of the broken ``(u, w)`` basis in global numbering.
    m : ndarray
        Nodal stress values, index ``3·vertex + component`` with components
        ``(M¹¹, M²², M¹²)``.
    residual : tuple of float
        Normwise relative residuals of the two block equations.
    refinements : int
        Iterative refinement steps taken.
    """

    uw: np.ndarray
    m: np.ndarray
    residual: tuple[float, float] = (0.0, 0.0)
    refinements: int = 0

    def u(self, space, elem: int, comp: int) -> np.ndarray:
        return self.uw[space.dofmap.u_dofs(elem, comp)]

    def w(self, space, elem: int) -> np.ndarray:
        return self.uw[space.dofmap.w_dofs(elem)]

    def stress(self, vertex: int) -> np.ndarray:
        return self.m[3 * vertex : 3 * vertex + 3]


def _block_residuals(system: AssembledSystem, x: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r1 = system.F - system.A @ x - system.B.T @ m
    r2 = (system.eps**2) * (system.C @ m) - system.B @ x
    return r1, r2


def _row_norm(m: sp.spmatrix) -> float:
    return float(abs(m).sum(axis=1).max()) if m.shape[0] else 0.0


def relative_residual(system: AssembledSystem, x: np.ndarray, m: np.ndarray) -> tuple[float, float]:
    """Normwise relative residual ``‖r_i‖∞ / (‖K_i‖∞‖z‖∞ + ‖rhs_i‖∞)`` of each block row."""
    r1, r2 = _block_residuals(system, x, m)
    z = max(np.abs(x).max(initial=0.0), np.abs(m).max(initial=0.0))
    k1 = _row_norm(sp.hstack([system.A, system.B.T]))
    k2 = _row_norm(sp.hstack([system.B, (system.eps**2) * system.C]))
    d1 = k1 * z + np.abs(system.F).max(initial=0.0)
    d2 = k2 * z
    e1 = float(np.abs(r1).max(initial=0.0) / d1) if d1 > 0 else 0.0
    e2 = float(np.abs(r2).max(initial=0.0) / d2) if d2 > 0 else 0.0
    return e1, e2


def solve_mixed(
    system: AssembledSystem,
    tol: float = 1e-9,
    max_refine: int = 3,
    check_coercivity: bool = False,
) -> FieldCoefficients:
    """Solve ``[[A, Bᵀ], [B, −ε²C]] [X; M] = [F; 0]``.

    Parameters
    ----------
    system : AssembledSystem
    tol : float
        Target relative residual of each block equation.
    max_refine : int
        Maximum number of iterative refinement steps; refinement stops
        early once the correction is at round-off level.
    check_coercivity : bool
        Compute the smallest eigenvalue of ``(A, G_Hh)`` first and emit a
        :class:`CoercivityWarning` when it is not positive.

    Raises
    ------
    SingularSystem
        When the factorization breaks down, yields non-finite values or
        misses the residual target.
    """
    if check_coercivity:
        from .assembly import assemble_gram_hh

        lam = min_generalized_eig(system.A, assemble_gram_hh(system.ctx))[0]
        if lam <= 0:
            warnings.warn(f"form a is not coercive (min eigenvalue {lam:.3e})", CoercivityWarning, stacklevel=2)
    n = system.n_uw
    rhs = system.rhs()
    if not np.any(rhs):
        return FieldCoefficients(np.zeros(n), np.zeros(system.n_m))
    k = system.block_matrix()
    diag = np.abs(k.diagonal())
    if np.any(diag == 0):
        raise SingularSystem("zero diagonal entry in the block system")
    d = 1.0 / np.sqrt(diag)  # symmetric equilibration
    try:
        lu = spla.splu(sp.csc_matrix(sp.diags(d) @ k @ sp.diags(d)))
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    except SystemError as exc:
        # SuperLU reports exhausted workspace this way
        raise MemoryError(f"sparse factorization of a {k.shape[0]}-dof system ran out of memory") from exc
    sol = d * lu.solve(d * rhs)
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("factorization produced non-finite values")
    steps = 0
    while steps < max_refine:
        r1, r2 = _block_residuals(system, sol[:n], sol[n:])
        delta = d * lu.solve(d * np.concatenate([r1, r2]))
        sol = sol + delta
        steps += 1
        if np.abs(delta).max() <= 1e-14 * np.abs(sol).max():
            break
    res = relative_residual(system, sol[:n], sol[n:])
    if max(res) > tol:
        raise SingularSystem(f"relative residual {max(res):.2e} above {tol:.0e} after refinement")
    return FieldCoefficients(sol[:n], sol[n:], res, steps)


# ---------------------------------------------------------------------------
# generalized eigenvalues
# ---------------------------------------------------------------------------


def negative_inertia(k: sp.spmatrix) -> int:
    """Number of negative eigenvalues of a symmetric sparse matrix.

    Uses a symmetric-ordering LU without pivoting, i.e. ``L D Lᵀ`` with
    ``D = diag(U)``, and Sylvester's law of inertia.
    """
    lu = spla.splu(
        sp.csc_matrix(k),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise NoConvergence("factorization pivoted off the diagonal; inertia unavailable")
    return int(np.count_nonzero(lu.U.diagonal() < 0))


def _dense_eigh(p, q, lo: int, hi: int) -> np.ndarray:
    pd = p.toarray() if sp.issparse(p) else np.asarray(p)
    qd = q.toarray() if sp.issparse(q) else np.asarray(q)
    pd = 0.5 * (pd + pd.T)
    qd = 0.5 * (qd + qd.T)
    try:
        return la.eigh(pd, qd, eigvals_only=True, subset_by_index=[lo, hi])
    except la.LinAlgError:
        # the subset driver can fail on clustered spectra; the full one does not
        return la.eigh(pd, qd, eigvals_only=True, driver="gv")[lo : hi + 1]


def min_generalized_eig(p, q, k: int = 1, tol: float = 1e-10, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Smallest ``k`` eigenvalues of ``P x = λ Q x`` (``P`` symmetric, ``Q`` SPD).

    Small problems use a dense solver.  Larger ones locate a shift below
    the spectrum by inertia counts and then apply shift-invert Lanczos.

    Raises
    ------
    NoConvergence
        When the iterative eigensolver does not converge.
    """
    n = p.shape[0]
    if n <= dense_limit:
        return _dense_eigh(p, q, 0, k - 1)
    p = sp.csc_matrix(p)
    q = sp.csc_matrix(q)
    sigma = 0.0
    scale = abs(p).max() / max(abs(q).max(), 1e-300)
    step = 1e-3 * scale
    for _ in range(60):
        if negative_inertia(p - sigma * q) == 0:
            break
        sigma -= step
        step *= 4.0
    else:
        raise NoConvergence("no shift below the spectrum found")
    # a shift just below zero keeps the factorization away from a singular P
    sigma = sigma - 1e-8 * scale if sigma == 0.0 else sigma
    try:
        vals = spla.eigsh(p, k=k, M=q, sigma=sigma, which="LM", tol=tol, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(str(exc)) from exc
    return np.sort(vals)


def max_generalized_eig(p, q, tol: float = 1e-10, dense_limit: int = DENSE_LIMIT) -> float:
    """Largest eigenvalue of ``P x = λ Q x``."""
    n = p.shape[0]
    if n <= dense_limit:
        return float(_dense_eigh(p, q, n - 1, n - 1)[0])
    lu = spla.splu(sp.csc_matrix(q))
    minv = spla.LinearOperator(q.shape, matvec=lu.solve, dtype=float)
    try:
        vals = spla.eigsh(sp.csc_matrix(p), k=1, M=sp.csc_matrix(q), Minv=minv, which="LA", tol=tol, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(str(exc)) from exc
    return float(vals[0])


def weak_seminorm(m: np.ndarray, b: sp.spmatrix, g_hh: sp.spmatrix, lu=None) -> float:
    """``sup_v b(N; v)/‖v‖_{H_h} = √(mᵀ B G⁻¹ Bᵀ m)``."""
    r = b.T @ m
    if not np.any(r):
        return 0.0
    lu = spla.splu(sp.csc_matrix(g_hh)) if lu is None else lu
    return float(np.sqrt(max(r @ lu.solve(r), 0.0)))


def b_continuity(b: sp.spmatrix, g_hh: sp.spmatrix, g_vh: sp.spmatrix) -> float:
    """``sup_{N,v} b(N; v)/(‖N‖_{V_h}‖v‖_{H_h})``, evaluated densely in the stress space."""
    lu = spla.splu(sp.csc_matrix(g_hh))
    bt = b.T.toarray()
    s = b @ lu.solve(bt)
    s = 0.5 * (s + s.T)
    gv = g_vh.toarray()
    return float(np.sqrt(max(la.eigh(s, gv, eigvals_only=True)[-1], 0.0)))
