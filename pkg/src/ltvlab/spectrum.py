"""Finite-horizon Lyapunov exponent and spectrum estimation.

All limsup constructs are replaced by tail-max estimators: the maximum of
the growth profile f(k) = ln||x(k*sigma)|| / (k*sigma) over the final
fraction of the horizon.  Indices attaining that maximum (to tolerance)
form the finite-horizon stand-in for a realizing sequence.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, PropagationError
from .system import propagate

TAIL_FRACTION = 0.5
REALIZE_TOL = 1e-2
GROUP_TOL = 1e-2
COMBINATION_GAP_TOL = 0.1


@dataclass(frozen=True)
class ExponentProfile:
    """Growth profile f(k; sigma) = ln||x(k*sigma)|| / (k*sigma)."""

    sigma: int
    ks: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class RealizingSequence:
    indices: np.ndarray  # strictly increasing k's attaining the tail max

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class SpectrumEstimate:
    exponents: np.ndarray  # nondecreasing, length s
    multiplicities: list  # (value, count) pairs, values increasing
    realizing_indices: list  # per exponent slot, checkpoint n's
    horizon: int


def exponent_profile(traj, sigma=1):
    """Profile of a TrajectoryLog along the multiples of sigma."""
    sigma = int(sigma)
    if sigma < 1:
        raise InvalidInputError("sigma must be a positive integer")
    kmax = traj.horizon // sigma
    if kmax < 1:
        raise InvalidInputError("trajectory does not cover one sigma step")
    ns = sigma * np.arange(1, kmax + 1)
    pos = np.searchsorted(traj.indices, ns)
    if not np.array_equal(traj.indices[pos], ns):
        raise InvalidInputError(
            "trajectory is not stored at every multiple of sigma; "
            "propagate with store_every=1"
        )
    values = traj.log_norms[pos] / ns
    return ExponentProfile(sigma, np.arange(1, kmax + 1), values)


def limsup_estimate(profile, tail_fraction=TAIL_FRACTION, realize_tol=REALIZE_TOL):
    """Tail-max exponent estimate and the indices realizing it.

    Returns (lambda_hat, RealizingSequence of k's).
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise InvalidInputError("tail_fraction must be in (0, 1]")
    ks = profile.ks
    if len(ks) == 0:
        raise InvalidInputError("empty profile")
    kmax = ks[-1]
    start = max(1, int(math.ceil(kmax * (1.0 - tail_fraction))))
    mask = ks >= start
    if not mask.any():
        raise InvalidInputError("empty tail window")
    window = profile.values[mask]
    lam = float(window.max())
    realizing = ks[mask][window >= lam - realize_tol]
    return lam, RealizingSequence(np.asarray(realizing))


def spectrum_estimate(
    seq,
    horizon,
    checkpoint_every=None,
    tail_fraction=TAIL_FRACTION,
    realize_tol=REALIZE_TOL,
    group_tol=GROUP_TOL,
):
    """Lyapunov spectrum estimate by the discrete QR method.

    Propagates an orthonormal basis with per-column log scales,
    re-orthonormalizing every step, and records per-column exponent
    estimates ln(sigma_j)/n at checkpoints.  Each exponent is the tail-max
    over checkpoints; equal exponents are grouped at resolution group_tol.
    """
    s = seq.dimension
    horizon = int(horizon)
    if horizon < 2:
        raise InvalidInputError("horizon must be >= 2")
    if checkpoint_every is None:
        checkpoint_every = max(1, horizon // 1000)

    basis = np.eye(s)
    logs = np.zeros(s)
    cp_ns, cp_vals = [], []
    for n in range(1, horizon):
        basis = seq.matrix_at(n) @ basis
        q, r = np.linalg.qr(basis)
        diag = np.diag(r).copy()
        sign = np.where(diag >= 0.0, 1.0, -1.0)
        q = q * sign
        diag = np.abs(diag)
        if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
            raise PropagationError(f"basis collapsed at n={n + 1}")
        logs += np.log(diag)
        basis = q
        m = n + 1
        if (m - 1) % checkpoint_every == 0 or m == horizon:
            cp_ns.append(m)
            cp_vals.append(logs / m)

    cp_ns = np.asarray(cp_ns)
    cp_vals = np.asarray(cp_vals)  # (num checkpoints, s)
    start = max(2, int(math.ceil(horizon * (1.0 - tail_fraction))))
    mask = cp_ns >= start
    if not mask.any():
        mask = cp_ns >= cp_ns[-1]
    window_ns = cp_ns[mask]
    window = cp_vals[mask]

    per_column = window.max(axis=0)
    realizing = [
        window_ns[window[:, j] >= per_column[j] - realize_tol] for j in range(s)
    ]
    order = np.argsort(per_column, kind="stable")
    exponents = per_column[order]
    realizing = [realizing[j] for j in order]

    groups = []
    for lam in exponents:
        if groups and lam - groups[-1][0] <= group_tol:
            value, count = groups[-1]
            groups[-1] = (value, count + 1)
        else:
            groups.append((float(lam), 1))

    return SpectrumEstimate(exponents, groups, realizing, horizon)


# --- incompressibility / normality ------------------------------------


@dataclass(frozen=True)
class IncompressibilityVerdict:
    status: str  # "NORMAL-UP-TO-HORIZON" or "NOT-NORMAL"
    witness: np.ndarray | None
    witness_exponent: float | None
    support_exponent: float | None
    horizon: int
    member_exponents: np.ndarray = field(default=None)

    @property
    def is_normal(self):
        return self.status == "NORMAL-UP-TO-HORIZON"


def _sign_patterns(s):
    """All nonzero coefficient patterns over {-1, 0, 1}^s with the first
    nonzero entry positive (sign duplicates removed)."""
    for raw in itertools.product((0, 1, -1), repeat=s):
        nz = [v for v in raw if v != 0]
        if not nz or nz[0] < 0:
            continue
        yield np.array(raw, dtype=float)


def incompressibility_test(
    fss,
    trials=64,
    horizon=None,
    seed=0,
    tail_fraction=TAIL_FRACTION,
    gap_tol=COMBINATION_GAP_TOL,
):
    """Test an FSS for incompressibility (equivalently, normality).

    Each candidate coefficient vector c defines a combined solution, which
    is propagated directly from its combined initial vector (avoiding
    cancellation in stored logs).  A violation is a combination whose
    estimated exponent falls more than gap_tol below the largest exponent
    among its supported members.  For dimension <= 3 all deterministic
    sign patterns are checked before random unit-sphere draws.
    """
    trajectories = fss.trajectories
    seq = fss.seq
    s = len(trajectories)
    if horizon is None:
        horizon = trajectories[0].horizon
    horizon = int(horizon)

    member_exps = np.empty(s)
    for j, traj in enumerate(trajectories):
        lam, _ = limsup_estimate(exponent_profile(traj, 1), tail_fraction)
        member_exps[j] = lam

    initials = np.column_stack([traj.value_at(1) for traj in trajectories])

    def check(c):
        support = np.abs(c) > 0.0
        if not support.any():
            return None  # degenerate sample, skipped
        y0 = initials @ c
        if np.linalg.norm(y0) == 0.0:
            return None  # numerically degenerate combination of initials
        traj = propagate(seq, y0, horizon)
        lam, _ = limsup_estimate(exponent_profile(traj, 1), tail_fraction)
        support_max = float(member_exps[support].max())
        if lam < support_max - gap_tol:
            return lam, support_max
        return None

    candidates = []
    if s <= 3:
        candidates.extend(_sign_patterns(s))
    rng = np.random.default_rng(seed)
    for _ in range(int(trials)):
        c = rng.normal(size=s)
        norm = np.linalg.norm(c)
        if norm == 0.0:
            continue
        candidates.append(c / norm)

    for c in candidates:
        hit = check(c)
        if hit is not None:
            lam, support_max = hit
            return IncompressibilityVerdict(
                "NOT-NORMAL", c.copy(), lam, support_max, horizon, member_exps
            )
    return IncompressibilityVerdict(
        "NORMAL-UP-TO-HORIZON", None, None, None, horizon, member_exps
    )
