import math

import numpy as np
import pytest

from ltvlab import (
    CoefficientSequence,
    exponent_profile,
    incompressibility_test,
    limsup_estimate,
    propagate,
    spectrum_estimate,
)
from ltvlab.presets import (
    geometric_diag,
    sin_log_witness_fss,
    standard_basis_fss,
)
from ltvlab.splitness import FSSRecord


def test_exponent_profile_constant_growth():
    seq = geometric_diag([1.0, 3.0])
    traj = propagate(seq, [0.0, 1.0], 1000)
    profile = exponent_profile(traj)
    # f(k) = (k-1) ln 3 / k -> ln 3
    assert profile.values[-1] == pytest.approx(999 * math.log(3) / 1000)
    lam, realizing = limsup_estimate(profile)
    assert lam == pytest.approx(math.log(3), abs=2e-3)
    assert len(realizing) > 0
    assert realizing.indices[-1] == 1000


def test_exponent_profile_sigma_subsampling():
    seq = geometric_diag([2.0, 1.0])
    traj = propagate(seq, [1.0, 0.0], 100)
    p1 = exponent_profile(traj, 1)
    p5 = exponent_profile(traj, 5)
    assert len(p5.ks) == 20
    assert p5.values[3] == pytest.approx(p1.values[19])


def test_limsup_estimate_tail_rules():
    seq = geometric_diag([2.0])
    traj = propagate(seq, [1.0], 200)
    profile = exponent_profile(traj)
    lam_half, _ = limsup_estimate(profile, tail_fraction=0.5)
    lam_full, _ = limsup_estimate(profile, tail_fraction=1.0)
    assert lam_half == pytest.approx(math.log(2), abs=1e-2)
    # full window includes the small early values but the max is unchanged
    assert lam_full == pytest.approx(lam_half)


def test_spectrum_estimate_diag_1_2():
    est = spectrum_estimate(geometric_diag([1.0, 2.0]), 10_000)
    assert np.abs(est.exponents - [0.0, math.log(2)]).max() < 1e-3
    assert [count for _, count in est.multiplicities] == [1, 1]


def test_spectrum_estimate_multiplicity_grouping():
    est = spectrum_estimate(geometric_diag([2.0, 2.0, 0.5]), 5000)
    assert [count for _, count in est.multiplicities] == [1, 2]
    assert est.multiplicities[1][0] == pytest.approx(math.log(2), abs=1e-3)


def test_spectrum_estimate_rotation_invariant():
    # conjugating a constant diagonal by a rotation must not change the
    # spectrum estimate beyond tolerance
    theta = 0.7
    rot = np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    a = rot @ np.diag([1.0, 2.0]) @ rot.T
    est = spectrum_estimate(CoefficientSequence.constant(a), 5000)
    assert np.abs(est.exponents - [0.0, math.log(2)]).max() < 2e-3


def test_spectrum_estimate_no_overflow_large_growth():
    est = spectrum_estimate(geometric_diag([math.e**2, math.e**-2]), 20_000)
    assert np.abs(est.exponents - [-2.0, 2.0]).max() < 1e-3


def test_incompressibility_normal_fss():
    seq = geometric_diag([1.0, 2.0])
    fss = standard_basis_fss(seq, 2000)
    verdict = incompressibility_test(fss, seed=0)
    assert verdict.is_normal
    assert verdict.witness is None
    assert np.abs(verdict.member_exponents - [0.0, math.log(2)]).max() < 5e-3


def test_incompressibility_detects_cancellation():
    # x1 = (1, 1)-solution and x2 = (0, 1)-solution of diag(1, 2) both grow
    # like 2^n, but x1 - x2 stays bounded
    seq = geometric_diag([1.0, 2.0])
    fss = FSSRecord.from_initial_vectors(seq, [[1.0, 1.0], [0.0, 1.0]], 2000)
    verdict = incompressibility_test(fss, seed=0)
    assert not verdict.is_normal
    assert verdict.status == "NOT-NORMAL"
    w = verdict.witness / np.abs(verdict.witness).max()
    assert np.allclose(np.abs(w), [1.0, 1.0])
    assert verdict.witness_exponent < verdict.support_exponent - 0.1


def test_incompressibility_sin_log_witness():
    fss = sin_log_witness_fss(10_000)
    verdict = incompressibility_test(fss, seed=0)
    assert verdict.status == "NOT-NORMAL"
    assert np.allclose(verdict.witness, [1.0, -1.0])
    assert verdict.witness_exponent <= 1.1


def test_incompressibility_deterministic_given_seed():
    fss = sin_log_witness_fss(3000)
    v1 = incompressibility_test(fss, seed=123)
    v2 = incompressibility_test(fss, seed=123)
    assert v1.status == v2.status
    assert np.array_equal(v1.witness, v2.witness)
