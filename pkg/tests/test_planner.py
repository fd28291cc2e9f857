import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slcreduce.models import GaussianMixture, bundled_bimodal_2d
from slcreduce.planner import (
    MultiPlan,
    SlcPlan,
    estimate_cov_envelope,
    load_plan,
    multi_stepsize,
    plan_from_dict,
    plan_multi,
    plan_slc,
    plan_to_dict,
    slc_stepsize,
    worst_case_K,
    worst_case_lambdas,
)

# -- log-concave route ---------------------------------------------------------


def test_slc_stage_counts_frozen():
    # oracle: tests/oracles/oracle_planner.py
    for kappa, K in [(2.0, 0), (8.0, 3), (100.0, 7), (1e6, 20), (1.0, 0), (2.5, 1)]:
        assert plan_slc(1.0, kappa).K == K


def test_slc_recursion_matches_closed_form_bitwise():
    for kappa in (2.0, 8.0, 100.0, 1e6):
        plan = plan_slc(1.0, kappa)
        closed = 1.0 + (kappa - 1.0) / 2.0 ** np.arange(plan.K + 1)
        np.testing.assert_array_equal(plan.mu, closed)


def test_slc_kappa_eight_schedule():
    plan = plan_slc(0.5, 4.0)
    assert plan.kappa == 8.0
    np.testing.assert_array_equal(plan.mu, [8.0, 4.5, 2.75, 1.875])
    np.testing.assert_allclose(plan.a**2, [8 / 9, 4.5 / 5.5, 2.75 / 3.75])
    assert plan.rescale == pytest.approx(math.sqrt(0.5))


def test_slc_stage_count_closed_form():
    for kappa in np.geomspace(2.001, 1e8, 40):
        assert plan_slc(1.0, kappa).K == math.ceil(math.log2(kappa - 1.0))


@given(st.floats(1.0, 1e9))
@settings(max_examples=50, deadline=None)
def test_slc_terminal_conditioning_below_two(kappa):
    plan = plan_slc(1.0, kappa)
    assert plan.mu[-1] <= 2.0
    if plan.K:
        assert plan.mu[-2] > 2.0


def test_slc_tether_identity():
    # a_k^2 / (1 - a_k^2) recovers mu_k exactly from the step choice
    plan = plan_slc(1.0, 100.0)
    for k in range(plan.K):
        a_sq = plan.a[k] ** 2
        assert a_sq / (1.0 - a_sq) == pytest.approx(plan.mu[k], rel=1e-12)
        assert plan.tether(k) == plan.mu[k]


def test_slc_curvature_windows():
    plan = plan_slc(1.0, 8.0)
    assert plan.forward_interval(0) == (1.0, 8.0)
    assert plan.backward_interval(1) == (5.5, 9.0)
    assert plan.terminal_interval() == (1.0, 1.875)
    lo, hi = plan.backward_interval(0)
    assert hi / lo < 2.0


def test_plan_slc_validation():
    with pytest.raises(ValueError, match="m must be positive"):
        plan_slc(0.0, 1.0)
    with pytest.raises(ValueError, match="M must satisfy"):
        plan_slc(2.0, 1.0)
    with pytest.raises(ValueError, match="at least 1"):
        slc_stepsize(0.5)


# -- worst-case multimodal schedule ----------------------------------------------


def test_worst_case_stage_counts_frozen():
    # oracle: tests/oracles/oracle_planner.py
    for B, K in [(0.0, 1), (0.25, 1), (0.26, 2), (1.0, 8), (4.25, 25), (100.0, 418)]:
        assert worst_case_K(B) == K


def test_worst_case_stage_count_caps():
    for B in [1.0, 2.0, 4.25, 10.0, 50.0, 100.0]:
        K = worst_case_K(B)
        assert K <= 14.0 * B
        assert K <= 7.0 * (1.0 + B)


def test_worst_case_descent_identity():
    # each step drops the difficulty by exactly lam / (2 lam + 3)
    lams = worst_case_lambdas(10.0)
    drops = np.diff(lams)
    expected = -lams[:-1] / (2.0 * lams[:-1] + 3.0)
    np.testing.assert_allclose(drops, expected, rtol=1e-14)


def test_worst_case_terminates_at_half():
    lams = worst_case_lambdas(7.3)
    assert lams[-1] <= 0.5
    assert np.all(lams[:-1] > 0.5)


@given(st.floats(0.0, 200.0))
@settings(max_examples=40, deadline=None)
def test_multi_stepsize_bounds(lam):
    a_sq = multi_stepsize(lam)
    assert 2.0 / 3.0 <= a_sq < 1.0


# -- envelope estimation ---------------------------------------------------------


def test_envelope_matches_symmetric_closed_form():
    # for the bundled bimodal target the posterior spread peaks at the
    # midpoint y = 0; oracle scan confirms, closed form gives the value
    model = bundled_bimodal_2d()

    def closed(theta2, mu_norm2=4.0, s2=0.25):
        b2 = 1.0 - theta2
        S = theta2 * s2 + b2
        return s2 * b2 / S + mu_norm2 * (b2 / S) ** 2

    for theta2 in (0.5, 0.25, 0.1):
        est = estimate_cov_envelope(model, math.sqrt(theta2), seed_or_rng=3)
        assert est == pytest.approx(closed(theta2), rel=1e-9)


def test_envelope_single_gaussian_is_flat():
    # one component: cov(X | y) is constant in y, so the sup is exact
    cov = np.array([[0.8, 0.2], [0.2, 0.5]])
    gm = GaussianMixture([1.0], [[0.5, -1.0]], [cov])
    theta = 0.6
    S = theta**2 * cov + (1 - theta**2) * np.eye(2)
    post = cov - theta**2 * cov @ np.linalg.solve(S, cov)
    est = estimate_cov_envelope(gm, theta, n_candidates=32, seed_or_rng=0)
    assert est == pytest.approx(np.linalg.eigvalsh(post)[-1], rel=1e-12)


def test_envelope_rejects_bad_theta():
    with pytest.raises(ValueError, match="theta"):
        estimate_cov_envelope(bundled_bimodal_2d(), 1.0)


# -- full multimodal planning -----------------------------------------------------


@pytest.fixture(scope="module")
def bimodal_plan():
    return plan_multi(bundled_bimodal_2d(), sigma_tar=1.0, seed_or_rng=0)


def test_multi_plan_shapes_and_stopping(bimodal_plan):
    plan = bimodal_plan
    assert plan.K == 23
    assert plan.theta2.shape == (plan.K,)
    assert plan.a.shape == (plan.K - 1,)
    assert plan.lam.shape == plan.B.shape == (plan.K,)
    assert plan.lam[-1] <= 0.5
    assert np.all(plan.lam[:-1] > 0.5)


def test_multi_plan_recursions(bimodal_plan):
    plan = bimodal_plan
    assert plan.theta2[0] == 0.5
    np.testing.assert_allclose(plan.lam, 4.0 * plan.B * plan.theta2, rtol=1e-14)
    np.testing.assert_allclose(
        plan.theta2[1:], plan.a**2 * plan.theta2[:-1], rtol=1e-14
    )
    np.testing.assert_allclose(
        plan.a**2, [multi_stepsize(l) for l in plan.lam[:-1]], rtol=1e-14
    )
    assert np.all(plan.a**2 >= 2.0 / 3.0)


def test_multi_plan_first_stage_difficulty(bimodal_plan):
    # lambda_1 = 4 B(1/2) / 2 = 2 * 2.76, oracle closed form
    assert bimodal_plan.lam[0] == pytest.approx(5.52, rel=1e-9)


def test_multi_plan_stage_count_capped_by_worst_case(bimodal_plan):
    assert bimodal_plan.K <= worst_case_K(float(bimodal_plan.B.max()))


def test_multi_plan_curvature_windows(bimodal_plan):
    plan = bimodal_plan
    lam1 = float(plan.lam[0])
    assert plan.forward_interval(1) == (1.0 - lam1, 2.0)
    lo, hi = plan.backward_interval(1)
    assert (lo, hi) == (lam1 + 2.0, 2.0 * lam1 + 4.0)
    assert hi / lo == pytest.approx(2.0, abs=1e-12)
    lo_t, hi_t = plan.terminal_interval()
    assert lo_t >= 0.5
    assert hi_t == 2.0
    assert plan.tether(1) == pytest.approx(2.0 * lam1 + 2.0)


def test_multi_plan_sigma_rescaling():
    # doubling both the mode separation and sigma_tar is a pure rescale,
    # so the schedule must be identical
    base = bundled_bimodal_2d()
    wide = GaussianMixture(base.weights, 2.0 * base.means, 4.0 * base.covs)
    p1 = plan_multi(base, sigma_tar=1.0, seed_or_rng=5)
    p2 = plan_multi(wide, sigma_tar=2.0, seed_or_rng=5)
    assert p1.K == p2.K
    np.testing.assert_allclose(p1.lam, p2.lam, rtol=1e-9)


def test_plan_multi_validation():
    with pytest.raises(ValueError, match="sigma_tar"):
        plan_multi(bundled_bimodal_2d(), sigma_tar=0.0)


# -- serialization ----------------------------------------------------------------


def test_plan_json_round_trip(tmp_path, bimodal_plan):
    for plan in (plan_slc(0.5, 4.0), bimodal_plan):
        path = tmp_path / "plan.json"
        payload = plan_to_dict(plan)
        path.write_text(json.dumps(payload))
        clone = load_plan(path)
        assert type(clone) is type(plan)
        assert clone.K == plan.K
        for name in ("mu", "a") if isinstance(plan, SlcPlan) else ("theta2", "a", "lam", "B"):
            np.testing.assert_array_equal(getattr(clone, name), getattr(plan, name))


def test_plan_payload_types():
    assert plan_to_dict(plan_slc(1.0, 8.0))["type"] == "slc_plan"
    payload = plan_to_dict(plan_multi(bundled_bimodal_2d(), 1.0, n_candidates=64))
    assert payload["type"] == "multi_plan"
    assert "lambda" in payload


def test_plan_from_dict_rejects_malformed():
    with pytest.raises(ValueError, match="unknown plan type"):
        plan_from_dict({"type": "nope"})
    with pytest.raises(ValueError, match="missing"):
        plan_from_dict({"type": "slc_plan", "m": 1.0})
    good = plan_to_dict(plan_slc(1.0, 8.0))
    bad = dict(good, mu=good["mu"][:-1])
    with pytest.raises(ValueError, match="inconsistent"):
        plan_from_dict(bad)
