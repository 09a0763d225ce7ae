"""Dense linear-algebra utilities shared by the abstract domain and solvers.

All routines work on plain numpy arrays of float64 and are pure functions.
"""

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import NonConvergence, SingularMatrix

# Condition number beyond which a matrix is treated as singular.  Callers
# degrade to a sound "unknown" answer in that case instead of trusting the
# inverse.
COND_LIMIT = 1e12

# Singular values below RANK_TOL * largest are treated as zero.
RANK_TOL = 1e-10


def invert(m):
    """Invert a square matrix via LU with partial pivoting.

    Raises SingularMatrix when the estimated 1-norm condition number
    exceeds COND_LIMIT (or the factorization itself breaks down).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SingularMatrix(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if not np.all(np.isfinite(m)):
        raise SingularMatrix("matrix has non-finite entries")
    try:
        lu, piv = lu_factor(m, check_finite=False)
    except Exception as exc:  # LinAlgError from a breakdown
        raise SingularMatrix(str(exc)) from exc
    diag = np.abs(np.diag(lu))
    if np.any(diag == 0.0) or not np.all(np.isfinite(lu)):
        raise SingularMatrix("zero pivot in LU factorization")
    inv = lu_solve((lu, piv), np.eye(n), check_finite=False)
    if not np.all(np.isfinite(inv)):
        raise SingularMatrix("non-finite entries in computed inverse")
    cond = np.abs(m).sum(axis=0).max() * np.abs(inv).sum(axis=0).max()
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMatrix(f"condition estimate {cond:.3e} exceeds {COND_LIMIT:.0e}")
    return inv


def _fix_signs(b):
    """Make the first entry of non-negligible magnitude in each column positive."""
    b = b.copy()
    for j in range(b.shape[1]):
        col = b[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            b[:, j] = -col
    return b


def pca_basis(a):
    """Orthonormal basis aligned with the principal directions of the columns of a.

    Returns a p x p orthonormal matrix whose leading columns are the left
    singular vectors of a (descending singular value); directions lost to
    rank deficiency are completed by Gram-Schmidt against the standard
    basis vectors in index order.  Deterministic for identical input.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    p, k = a.shape
    if k == 0 or not np.any(a):
        return np.eye(p)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    rank = int(np.count_nonzero(s > RANK_TOL * s[0]))
    cols = [u[:, j] for j in range(rank)]
    # Complete to a full basis with standard basis vectors, in index order.
    for i in range(p):
        if len(cols) == p:
            break
        v = np.zeros(p)
        v[i] = 1.0
        for c in cols:
            v -= (c @ v) * c
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            cols.append(v / nrm)
    basis = np.column_stack(cols)
    return _fix_signs(basis)


def spectral_norm(m):
    """Largest singular value via power iteration on m^T m.

    Relative tolerance 1e-10, at most 10000 iterations; raises
    NonConvergence if the tolerance is not met.
    """
    m = np.asarray(m, dtype=float)
    if m.size == 0 or not np.any(m):
        return 0.0
    # Work on the gram matrix of the smaller side.
    if m.shape[0] < m.shape[1]:
        m = m.T
    g = m.T @ m
    scale = np.abs(g).max()
    if scale == 0.0:
        return 0.0
    g = g / scale
    rng = np.random.default_rng(0)
    v = rng.standard_normal(g.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(10000):
        w = g @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = v @ (g @ v)
        if abs(lam_new - lam) <= 1e-10 * max(abs(lam_new), 1e-300):
            return float(np.sqrt(lam_new * scale))
        lam = lam_new
    raise NonConvergence("power iteration did not converge in 10000 steps")


def frobenius_norm(m):
    """Frobenius norm (used for conservative step-size bounds)."""
    return float(np.linalg.norm(np.asarray(m, dtype=float)))


def min_sym_eig(m):
    """Smallest eigenvalue of the symmetric part (m + m^T)/2.

    Uses shifted power iteration on s*I - sym(m) with tolerance 1e-8.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n == 0:
        return 0.0
    sym = 0.5 * (m + m.T)
    shift = float(np.abs(sym).sum(axis=0).max()) + 1.0
    b = shift * np.eye(n) - sym
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(100000):
        w = b @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return float(shift)
        v = w / nw
        lam_new = v @ (b @ v)
        if abs(lam_new - lam) <= 1e-8 * max(abs(lam_new), 1.0):
            return float(shift - lam_new)
        lam = lam_new
    raise NonConvergence("shifted power iteration did not converge")
