"""Dense small-matrix primitives: spectral norms, condition numbers,
angles to subspaces, and oblique projections onto a basis of directions.

All functions are pure and operate on plain numpy arrays.
"""

import numpy as np

from .errors import InvalidInputError, SingularMatrixError

# A matrix counts as singular when its smallest singular value falls below
# this fraction of the largest one.
SINGULAR_RTOL = 1e-12


def _as_matrix(m):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise InvalidInputError(f"expected a 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    return m


def _as_vector(v, name="vector"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-d, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return v


def spectral_norm(m):
    """Largest singular value of ``m``."""
    m = _as_matrix(m)
    return float(np.linalg.norm(m, 2))


def condition_number(m):
    """Spectral condition number ||m|| * ||m^-1||.

    Raises SingularMatrixError when the matrix is singular to tolerance.
    """
    m = _as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError("condition number requires a square matrix")
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= SINGULAR_RTOL * sv[0]:
        raise SingularMatrixError(
            f"matrix singular to tolerance (sigma_min={sv[-1]:.3e})",
            smallest_singular_value=float(sv[-1]),
        )
    return float(sv[0] / sv[-1])


def angle_between(p, q):
    """Angle between two nonzero vectors, in [0, pi]."""
    p = _as_vector(p, "p")
    q = _as_vector(q, "q")
    np_ = np.linalg.norm(p)
    nq = np.linalg.norm(q)
    if np_ == 0.0 or nq == 0.0:
        raise InvalidInputError("angle_between requires nonzero vectors")
    # rounding can push the cosine out of [-1, 1] by ~1e-16
    c = np.clip(np.dot(p, q) / (np_ * nq), -1.0, 1.0)
    return float(np.arccos(c))


def angle_to_subspace(p, basis):
    """Angle between a nonzero vector and the span of ``basis``, in [0, pi/2].

    Computed as arcsin of the normalized residual distance, which is
    accurate near both 0 and pi/2.  ``basis`` is a sequence of vectors or
    an (s, k) array of columns; it must have full column rank.
    """
    p = _as_vector(p, "p")
    b = np.asarray(basis, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    elif b.shape[0] != p.shape[0]:
        # sequence of vectors -> columns
        b = b.T
    if not np.all(np.isfinite(b)):
        raise InvalidInputError("basis has non-finite entries")
    norm_p = np.linalg.norm(p)
    if norm_p == 0.0:
        raise InvalidInputError("angle_to_subspace requires a nonzero vector")
    q, r = np.linalg.qr(b)
    diag = np.abs(np.diag(r))
    if diag.min(initial=np.inf) <= SINGULAR_RTOL * max(diag.max(initial=0.0), 1.0):
        raise InvalidInputError("basis is rank deficient to tolerance")
    residual = p - q @ (q.T @ p)
    s = np.clip(np.linalg.norm(residual) / norm_p, 0.0, 1.0)
    return float(np.arcsin(s))


def cosine_to_subspace(p, basis):
    """Cosine of the angle between ``p`` and the span of ``basis``.

    Computed as the norm of the orthogonal projection coefficient, which
    is accurate near pi/2 where the arcsin route loses digits.
    """
    p = _as_vector(p, "p")
    b = np.asarray(basis, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    elif b.shape[0] != p.shape[0]:
        b = b.T
    if not np.all(np.isfinite(b)):
        raise InvalidInputError("basis has non-finite entries")
    norm_p = np.linalg.norm(p)
    if norm_p == 0.0:
        raise InvalidInputError("cosine_to_subspace requires a nonzero vector")
    q, r = np.linalg.qr(b)
    diag = np.abs(np.diag(r))
    if diag.min(initial=np.inf) <= SINGULAR_RTOL * max(diag.max(initial=0.0), 1.0):
        raise InvalidInputError("basis is rank deficient to tolerance")
    c = np.linalg.norm(q.T @ p) / norm_p
    return float(np.clip(c, 0.0, 1.0))


def oblique_projections(columns):
    """Projections P^i = X E_i X^{-1} for the matrix X of given columns.

    Each P^i maps column i to itself and annihilates the others.  They sum
    to the identity and are mutually annihilating.  Raises
    SingularMatrixError for a near-singular X.
    """
    x = np.column_stack([_as_vector(c, "column") for c in columns])
    s = x.shape[0]
    if x.shape != (s, s):
        raise InvalidInputError(f"need {s} columns of dimension {s}, got shape {x.shape}")
    sv = np.linalg.svd(x, compute_uv=False)
    if sv[-1] <= SINGULAR_RTOL * sv[0]:
        raise SingularMatrixError(
            f"column matrix singular to tolerance (sigma_min={sv[-1]:.3e})",
            smallest_singular_value=float(sv[-1]),
        )
    xinv = np.linalg.solve(x, np.eye(s))
    return [np.outer(x[:, i], xinv[i, :]) for i in range(s)]
