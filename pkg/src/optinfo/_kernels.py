"""Hot numeric kernels.

The dense simplex pivot loop dominates the runtime of polytope norm
evaluations and the property sweeps built on them, so it is compiled with
numba when available.  Setting the environment variable ``OPTINFO_NO_NUMBA``
to a non-empty value other than ``0`` selects the pure-Python/numpy path
(also used automatically when numba is not importable).  Both paths run the
same source; ``benchmarks/bench_kernels.py`` compares them.
"""

import os

import numpy as np


def _simplex_pivot_impl(tableau, basis, n_enterable, tol, max_iter):
    """Run Bland-rule pivots in place until optimal.

    tableau: (m+1) x (n+1) array; rows 0..m-1 are constraints [A | b],
    row m holds reduced costs and the negated objective value.  basis holds
    the m basic column indices.  Columns >= n_enterable never enter (used to
    freeze phase-1 artificials).  Returns 0 if optimal, 1 if unbounded,
    2 if the iteration cap was hit.
    """
    m = tableau.shape[0] - 1
    n = tableau.shape[1] - 1
    for _ in range(max_iter):
        enter = -1
        for j in range(n_enterable):
            if tableau[m, j] < -tol:
                enter = j
                break
        if enter < 0:
            return 0
        leave = -1
        best = 0.0
        for i in range(m):
            coef = tableau[i, enter]
            if coef > tol:
                ratio = tableau[i, n] / coef
                if leave < 0 or ratio < best - 1e-12 or (
                    ratio < best + 1e-12 and basis[i] < basis[leave]
                ):
                    best = ratio
                    leave = i
        if leave < 0:
            return 1
        piv = tableau[leave, enter]
        for j in range(n + 1):
            tableau[leave, j] /= piv
        for i in range(m + 1):
            if i != leave:
                f = tableau[i, enter]
                if f != 0.0:
                    for j in range(n + 1):
                        tableau[i, j] -= f * tableau[leave, j]
        basis[leave] = enter
    return 2


simplex_pivot_python = _simplex_pivot_impl

_disabled = os.environ.get("OPTINFO_NO_NUMBA", "").strip() not in ("", "0")
if not _disabled:
    try:
        from numba import njit

        simplex_pivot = njit(cache=True)(_simplex_pivot_impl)
    except ImportError:  # pragma: no cover - numba is a declared dependency
        simplex_pivot = _simplex_pivot_impl
else:
    simplex_pivot = _simplex_pivot_impl

USING_NUMBA = simplex_pivot is not _simplex_pivot_impl


def warm_up():
    """Trigger JIT compilation with a tiny problem (no-op on the numpy path)."""
    t = np.array([[1.0, 1.0, 1.0], [-1.0, 0.0, 0.0]])
    b = np.array([1], dtype=np.int64)
    simplex_pivot(t, b, 2, 1e-9, 10)
