"""Hot inner kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``KOITER_DG_NUMBA`` is not set to ``0``.  Both paths compute the
same quantities; the benchmark in ``benchmarks/bench_kernels.py`` compares
them.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly depending on the install
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False


def numba_enabled() -> bool:
    """Return True when the compiled kernels are active."""
    return _HAVE_NUMBA and os.environ.get("KOITER_DG_NUMBA", "1") != "0"


# ---------------------------------------------------------------------------
# truncated bivariate series product
# ---------------------------------------------------------------------------


def _series_mul_numpy(a, b, p, q, r, nout):
    out = np.zeros((nout,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]))
    for pi, qi, ri in zip(p, q, r):
        out[ri] += a[pi] * b[qi]
    return out


def _series_mul_numba_impl(a, b, p, q, r, nout):  # pragma: no cover - compiled
    m = a.shape[1]
    out = np.zeros((nout, m))
    for k in range(p.shape[0]):
        pi = p[k]
        qi = q[k]
        ri = r[k]
        for j in range(m):
            out[ri, j] += a[pi, j] * b[qi, j]
    return out


# ---------------------------------------------------------------------------
# batched weighted bilinear contraction: K[e] = sum_q w[e,q] L[e,q]^T R[e,q]
# ---------------------------------------------------------------------------


def _weighted_outer_numpy(left, right, weight):
    return np.einsum("ieqa,eq,ieqb->eab", left, weight, right, optimize=True)


def _weighted_outer_numba_impl(left, right, weight):  # pragma: no cover - compiled
    ni, ne, nq, na = left.shape
    nb = right.shape[3]
    out = np.zeros((ne, na, nb))
    tmp = np.empty(nb)
    for e in range(ne):
        for qq in range(nq):
            wq = weight[e, qq]
            if wq == 0.0:
                continue
            for i in range(ni):
                for bb in range(nb):
                    tmp[bb] = wq * right[i, e, qq, bb]
                for aa in range(na):
                    la = left[i, e, qq, aa]
                    if la == 0.0:
                        continue
                    for bb in range(nb):
                        out[e, aa, bb] += la * tmp[bb]
    return out


if _HAVE_NUMBA:
    _series_mul_numba = numba.njit(cache=True)(_series_mul_numba_impl)
    _weighted_outer_numba = numba.njit(cache=True)(_weighted_outer_numba_impl)
else:  # pragma: no cover
    _series_mul_numba = None
    _weighted_outer_numba = None


def series_mul(a, b, p, q, r, nout, use_numba=None):
    """Multiply two coefficient stacks over the listed index triples.

    Parameters
    ----------
    a, b : ndarray
        Coefficient stacks with leading coefficient axis and broadcastable
        trailing shapes.
    p, q, r : ndarray of int
        ``out[r[k]] += a[p[k]] * b[q[k]]`` for every ``k``.
    nout : int
        Number of output coefficients.
    """
    if use_numba is None:
        use_numba = numba_enabled()
    shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    size = int(np.prod(shape)) if shape else 1
    if not use_numba or size < 512:
        return _series_mul_numpy(a, b, p, q, r, nout)
    a2 = np.ascontiguousarray(np.broadcast_to(a, (a.shape[0],) + shape)).reshape(a.shape[0], size)
    b2 = np.ascontiguousarray(np.broadcast_to(b, (b.shape[0],) + shape)).reshape(b.shape[0], size)
    out = _series_mul_numba(a2, b2, p, q, r, nout)
    return out.reshape((nout,) + shape)


def weighted_outer(left, right, weight, use_numba=None):
    """Batched ``sum_{i,q} w[e,q] left[i,e,q,a] right[i,e,q,b]``.

    Parameters
    ----------
    left : ndarray, shape (ni, ne, nq, na)
    right : ndarray, shape (ni, ne, nq, nb)
    weight : ndarray, shape (ne, nq)

    Returns
    -------
    ndarray, shape (ne, na, nb)
    """
    if use_numba is None:
        use_numba = numba_enabled()
    if not use_numba:
        return _weighted_outer_numpy(left, right, weight)
    return _weighted_outer_numba(
        np.ascontiguousarray(left, dtype=float),
        np.ascontiguousarray(right, dtype=float),
        np.ascontiguousarray(weight, dtype=float),
    )
