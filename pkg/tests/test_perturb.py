import math

import numpy as np
import pytest

from ltvlab import (
    BudgetError,
    FSSRecord,
    PreconditionError,
    build_plan,
    calibrate,
    execute_plan,
    instability_experiment,
    lambda_mu,
    openness_experiment,
    perturbation_at,
    plan_r_sequence,
    solve_mu,
    synthesis_constants,
)
from ltvlab.presets import (
    geometric_diag,
    sin_log_system,
    sin_log_witness_fss,
    standard_basis_fss,
)


def test_synthesis_constants_defaults():
    c = synthesis_constants(math.pi / 2, 1.0, 2)
    assert c.l1 == pytest.approx(0.25)
    assert c.delta1 == pytest.approx(math.log(1.25) / 2)
    assert c.lipschitz == pytest.approx(0.25 / (math.log(1.25) / 2))
    assert c.delta == pytest.approx(c.delta1 / 3)
    assert c.beta == pytest.approx(c.lipschitz * 2 * 3.0 / 1.0)
    assert c.beta == pytest.approx(13.444, abs=1e-3)


def test_synthesis_constants_validation():
    with pytest.raises(Exception):
        synthesis_constants(0.0, 1.0, 2)
    with pytest.raises(Exception):
        synthesis_constants(math.pi / 2, 0.0, 2)
    with pytest.raises(Exception):
        synthesis_constants(math.pi / 2, 1.0, 2, r=1.5)
    with pytest.raises(Exception):
        synthesis_constants(math.pi / 2, 1.0, 2, delta1=10.0)


def test_solve_mu_identity_density():
    # orthogonal FSS of diag(1,2): g = 1 everywhere, so mu = zeta
    fss = standard_basis_fss(geometric_diag([1.0, 2.0]), 4000)
    mu = solve_mu(fss, 0, 0.02, 1.0, math.pi / 2)
    assert mu == pytest.approx(0.02, abs=1e-6)
    assert solve_mu(fss, 0, 0.0, 1.0, math.pi / 2) == 0.0


def test_solve_mu_bracket_sin_log():
    # with the full-window tail the exponent estimate is realized near
    # k=2576 where the density floor is 0.19, so mu lands in
    # [zeta, zeta/0.19]
    fss = sin_log_witness_fss(10_000)
    cal = calibrate(fss)
    zeta = 0.01
    mu = solve_mu(fss, 0, zeta, 0.19, math.acos(0.9), tail_fraction=1.0)
    assert zeta <= mu <= zeta / 0.19 + 1e-9
    base = lambda_mu(fss, 0, 0.0, math.acos(0.9), tail_fraction=1.0)
    boosted = lambda_mu(fss, 0, mu, math.acos(0.9), tail_fraction=1.0)
    assert boosted - base == pytest.approx(zeta, abs=1e-6)
    assert cal.rho_hat > 0.05


def test_calibrate_rejects_non_splitted():
    seq = geometric_diag([1.0, 2.0])
    fss = FSSRecord.from_initial_vectors(seq, [[1.0, 1.0], [0.0, 1.0]], 2000)
    with pytest.raises(PreconditionError):
        calibrate(fss)


def test_build_plan_budget():
    fss = standard_basis_fss(geometric_diag([1.0, 2.0]), 2000)
    cal = calibrate(fss)
    with pytest.raises(BudgetError) as info:
        build_plan(fss, [cal.constants.delta * 2, 0.0], calibration=cal)
    assert info.value.delta == pytest.approx(cal.constants.delta)


def test_plan_eigenvector_property():
    # R(n) x_i(n) = exp(s_i(n)) x_i(n) for every FSS member and step
    fss = standard_basis_fss(geometric_diag([1.0, 2.0]), 300)
    plan = build_plan(fss, [0.01, -0.01])
    for n in (1, 2, 57, 299):
        r_mat = perturbation_at(plan, fss, n)
        for i, traj in enumerate(fss.trajectories):
            d = traj.direction_at(n)
            expected = math.exp(plan.schedule_at(n)[i]) * d
            assert np.abs(r_mat @ d - expected).max() < 1e-12


def test_plan_r_norm_within_proof_cap():
    fss = standard_basis_fss(geometric_diag([1.0, 2.0]), 2000)
    plan = build_plan(fss, [0.01, -0.01])
    r_seq = plan_r_sequence(plan, fss)
    eye = np.eye(2)
    worst = max(
        np.linalg.norm(r_seq.matrix_at(n) - eye, 2) for n in range(1, 2001)
    )
    assert worst < plan.constants.r
    assert worst <= plan.norm_budget + 1e-12


def test_execute_plan_shifts_spectrum():
    fss = standard_basis_fss(geometric_diag([1.0, 2.0]), 10_000)
    plan = build_plan(fss, [0.01, -0.01])
    outcome = execute_plan(fss.seq, fss, plan)
    assert outcome.perturbed_exponents[0] == pytest.approx(0.01, abs=1e-3)
    assert outcome.perturbed_exponents[1] == pytest.approx(
        math.log(2) - 0.01, abs=1e-3
    )
    assert outcome.r_norm_sup == pytest.approx(math.exp(0.01) - 1, abs=1e-8)
    assert outcome.r_norm_sup <= outcome.norm_budget
    assert outcome.agreement_residual < 1e-9


def test_execute_plan_zero_shift_is_identity():
    fss = standard_basis_fss(geometric_diag([1.0, 2.0]), 3000)
    plan = build_plan(fss, [0.0, 0.0])
    outcome = execute_plan(fss.seq, fss, plan)
    assert outcome.r_norm_sup == 0.0
    assert np.abs(outcome.achieved_shifts).max() < 1e-12
    assert outcome.agreement_residual < 1e-12


def test_execute_plan_sin_log_closed_form_oracle():
    seq = sin_log_system()
    fss = sin_log_witness_fss(4000, seq)
    cal = calibrate(fss)
    delta = cal.constants.delta
    plan = build_plan(fss, [-delta / 2, delta / 2], calibration=cal)
    outcome = execute_plan(seq, fss, plan)
    assert outcome.agreement_residual < 1e-9
    assert outcome.r_norm_sup <= outcome.norm_budget


def test_instability_experiment_sin_log():
    seq = sin_log_system()
    fss = sin_log_witness_fss(10_000, seq)
    report = instability_experiment(seq, fss, [0.05, 0.01])
    assert report["witness"] is not None
    for row in report["rows"]:
        assert row["r_norm_sup"] < row["epsilon"]
        assert row["success"]


def test_instability_requires_non_normal_fss():
    seq = geometric_diag([1.0, 2.0])
    fss = standard_basis_fss(seq, 2000)
    with pytest.raises(PreconditionError):
        instability_experiment(seq, fss, [0.1])


def test_openness_assigns_nearby_spectrum():
    seq = geometric_diag([1.0, 2.0])
    fss = standard_basis_fss(seq, 10_000)
    result = openness_experiment(seq, fss, [0.01, math.log(2) - 0.01], 0.2)
    assert result["assignment_error"] < 1e-3
    assert result["r_norm_sup"] < 0.2
    assert result["pairwise_distinct"]
    assert result["agreement_residual"] < 1e-9


def test_openness_identity_for_exact_targets():
    seq = geometric_diag([1.0, 2.0])
    fss = standard_basis_fss(seq, 3000)
    cal = calibrate(fss)
    lams = [v.lambda_hat for v in cal.verdicts]
    result = openness_experiment(seq, fss, lams, 0.1)
    assert result["r_norm_sup"] == 0.0


def test_openness_rejects_far_targets():
    seq = geometric_diag([1.0, 2.0])
    fss = standard_basis_fss(seq, 3000)
    with pytest.raises(PreconditionError) as info:
        openness_experiment(seq, fss, [1.0, 2.0], 0.2)
    assert "gamma" in str(info.value)
