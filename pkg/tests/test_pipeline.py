import math

import numpy as np
import pytest

from slcreduce.gauss import kl_gaussian
from slcreduce.models import (
    GaussianMixture,
    SlcQuadraticPlus,
    bundled_bimodal_2d,
    hessian,
)
from slcreduce.pipeline import (
    RunRecord,
    StageBudget,
    allocate_budget,
    dump_samples,
    load_samples,
    run_summary,
    sample_multi_pipeline,
    sample_slc_pipeline,
    stage_marginal,
    total_calls,
)
from slcreduce.planner import MultiPlan, plan_multi, plan_slc
from slcreduce.samplers import SamplerConfig


def gaussian_2d(mean, cov_diag):
    return GaussianMixture([1.0], [mean], [np.diag(cov_diag)])


@pytest.fixture(scope="module")
def bimodal_plan():
    return plan_multi(bundled_bimodal_2d(), 1.0, seed_or_rng=0)


# -- budget allocation ----------------------------------------------------------


def test_kl_budget_is_uniform():
    plan = plan_slc(1.0, 10.0)  # K = 4
    budget = allocate_budget(plan.K, 0.2, "kl", plan)
    assert budget.deltas.shape == (plan.K + 1,)
    np.testing.assert_allclose(budget.shares, 1.0 / (plan.K + 1))
    np.testing.assert_allclose(budget.deltas, 0.2 / (plan.K + 1))
    assert budget.shares.sum() == pytest.approx(1.0, abs=1e-12)
    assert budget.epsilon_prime == budget.epsilon


def test_w2_budget_telescopes_exactly(bimodal_plan):
    # pushing stage k's budget back to stage 1 multiplies it by
    # prod 1/a_l; the allocation makes every pushed term equal
    budget = allocate_budget(bimodal_plan.K, 0.5, "w2", bimodal_plan)
    prefix = np.concatenate([[1.0], np.cumprod(bimodal_plan.a)])
    pushed = budget.deltas / prefix
    np.testing.assert_allclose(pushed, budget.epsilon_prime / bimodal_plan.K, rtol=1e-13)
    assert pushed.sum() == pytest.approx(budget.epsilon_prime, rel=1e-12)
    assert budget.epsilon_prime == pytest.approx(0.5 / math.sqrt(2.0))
    assert budget.shares.sum() == pytest.approx(1.0, abs=1e-12)


def test_w2_budget_with_unit_steps_is_uniform():
    # degenerate product: all a_l = 1 makes every stage equal
    plan = MultiPlan(
        sigma_tar=2.0,
        K=4,
        theta2=np.full(4, 0.5),
        a=np.ones(3),
        lam=np.full(4, 0.4),
        B=np.full(4, 0.2),
    )
    budget = allocate_budget(4, 0.4, "w2", plan)
    np.testing.assert_allclose(budget.deltas, budget.epsilon_prime / 4.0)


def test_budget_validation(bimodal_plan):
    plan = plan_slc(1.0, 8.0)
    with pytest.raises(ValueError, match="epsilon"):
        allocate_budget(plan.K, 0.0, "kl", plan)
    with pytest.raises(ValueError, match="epsilon"):
        allocate_budget(plan.K, 1.0, "kl", plan)
    with pytest.raises(ValueError, match="distance"):
        allocate_budget(plan.K, 0.5, "tv", plan)
    with pytest.raises(ValueError, match="does not match"):
        allocate_budget(plan.K + 1, 0.5, "kl", plan)
    with pytest.raises(ValueError, match="w2 only"):
        allocate_budget(bimodal_plan.K, 0.5, "kl", bimodal_plan)


# -- stage marginals ------------------------------------------------------------


def test_stage_marginal_interpolates_to_white_noise():
    # stage-k covariance is signal^2 * cov + (1 - signal^2) I in chain units
    model = gaussian_2d([1.0, -2.0], [1.0, 0.125])
    plan = plan_slc(1.0, 8.0)
    for k in range(plan.K + 1):
        sig = plan.signal(k)
        law = stage_marginal(plan, model, k)
        np.testing.assert_allclose(law.mean(), sig * np.array([1.0, -2.0]))
        np.testing.assert_allclose(
            law.cov(), sig**2 * np.diag([1.0, 0.125]) + (1 - sig**2) * np.eye(2)
        )


def test_stage_marginal_bounds_check(bimodal_plan):
    plan = plan_slc(1.0, 8.0)
    with pytest.raises(ValueError, match="stage index"):
        stage_marginal(plan, gaussian_2d([0, 0], [1, 1]), plan.K + 1)
    with pytest.raises(ValueError, match="stage index"):
        stage_marginal(bimodal_plan, bundled_bimodal_2d(), 0)


# -- log-concave pipeline -------------------------------------------------------


def test_slc_pipeline_recovers_gaussian_moments():
    mean = np.array([0.7, -1.1])
    model = gaussian_2d(mean, [1.0, 0.125])  # precision diag(1, 8), kappa = 8
    plan = plan_slc(1.0, 8.0)
    budget = allocate_budget(plan.K, 0.5, "kl", plan)
    record = sample_slc_pipeline(model, plan, budget, 4_096, seed=3)
    assert record.samples.shape == (4_096, 2)
    np.testing.assert_allclose(record.samples.mean(axis=0), mean, atol=0.06)
    np.testing.assert_allclose(
        record.samples.var(axis=0), [1.0, 0.125], rtol=0.08
    )
    # terminal stage conditioning after three halvings of kappa - 1
    assert record.records[0].kappa == pytest.approx(1.875)


def test_slc_pipeline_stage_order_and_accounting():
    plan = plan_slc(1.0, 8.0)
    budget = allocate_budget(plan.K, 0.5, "kl", plan)
    n = 64
    record = sample_slc_pipeline(
        gaussian_2d([0.0, 0.0], [1.0, 0.125]), plan, budget, n, seed=0,
        config=SamplerConfig(iterations=16),
    )
    names = [(r.name, r.stage) for r in record.records]
    assert names == [("terminal", 3), ("backward", 2), ("backward", 1), ("backward", 0)]
    for r in record.records:
        assert r.calls == r.calls_per_trajectory * n
        assert r.calls_per_trajectory == r.iterations + 1  # MALA's initial evaluation
        assert 0.0 <= r.accept_rate <= 1.0
    assert total_calls(record) == sum(r.calls for r in record.records)
    assert record.calls_per_trajectory == 4 * 17


def test_kappa_one_collapses_to_single_stage():
    model = gaussian_2d([0.5, 0.5], [0.7, 0.7])
    plan = plan_slc(1.0 / 0.7, 1.0 / 0.7)
    assert plan.K == 0
    budget = allocate_budget(0, 0.5, "kl", plan)
    record = sample_slc_pipeline(model, plan, budget, 2_048, seed=1)
    assert [r.name for r in record.records] == ["terminal"]
    np.testing.assert_allclose(record.samples.mean(axis=0), [0.5, 0.5], atol=0.06)
    np.testing.assert_allclose(record.samples.var(axis=0), [0.7, 0.7], rtol=0.08)


def test_plan_model_consistency_enforced():
    model = SlcQuadraticPlus(np.diag([1.3, 0.7]), 0.12, [2.0, 0.5])
    good = plan_slc(model.m, model.M)
    budget = allocate_budget(good.K, 0.5, "kl", good)
    sample_slc_pipeline(model, good, budget, 8, seed=0, config=SamplerConfig(iterations=4))
    bad = plan_slc(model.m * 4.0, model.M * 4.0)
    bad_budget = allocate_budget(bad.K, 0.5, "kl", bad)
    with pytest.raises(ValueError, match="lower curvature"):
        sample_slc_pipeline(model, bad, bad_budget, 8)
    with pytest.raises(ValueError, match="needs an SlcPlan"):
        sample_slc_pipeline(model, "not a plan", budget, 8)


def test_budget_plan_mismatch_rejected():
    plan = plan_slc(1.0, 8.0)
    other = plan_slc(1.0, 100.0)
    budget = allocate_budget(other.K, 0.5, "kl", other)
    with pytest.raises(ValueError, match="stage count"):
        sample_slc_pipeline(gaussian_2d([0, 0], [1, 0.125]), plan, budget, 8)


def test_kl_to_target_is_invariant_under_rescaling():
    # the chain works on Y = sqrt(m) X; Gaussian KL computed from fitted
    # moments must not depend on which unit system is used
    mean = np.array([0.7, -1.1])
    cov = np.diag([1.0, 0.125])
    model = gaussian_2d(mean, [1.0, 0.125])
    plan = plan_slc(1.0, 8.0)
    budget = allocate_budget(plan.K, 0.5, "kl", plan)
    record = sample_slc_pipeline(model, plan, budget, 2_048, seed=5)
    fit_mean = record.samples.mean(axis=0)
    fit_cov = np.cov(record.samples.T)
    c = plan.rescale
    kl_x = kl_gaussian(fit_mean, fit_cov, mean, cov)
    kl_y = kl_gaussian(c * fit_mean, c * c * fit_cov, c * mean, c * c * cov)
    assert kl_y == pytest.approx(kl_x, rel=1e-9)


# -- multimodal pipeline --------------------------------------------------------


def test_multi_pipeline_single_gaussian_matches_smoothed_law():
    # for a one-component "mixture" the smoothed target is
    # N(mu, cov + sigma_tar^2 I) in closed form
    model = GaussianMixture([1.0], [[0.3, -0.2]], [0.16 * np.eye(2)])
    sigma = 0.8
    plan = plan_multi(model, sigma, seed_or_rng=0)
    assert plan.K == 1  # flat envelope: one stage suffices
    budget = allocate_budget(plan.K, 0.3, "w2", plan)
    record = sample_multi_pipeline(model, sigma, plan, budget, 8_192, seed=2)
    assert [r.name for r in record.records] == ["terminal"]
    np.testing.assert_allclose(record.samples.mean(axis=0), [0.3, -0.2], atol=0.05)
    np.testing.assert_allclose(
        np.cov(record.samples.T), (0.16 + sigma * sigma) * np.eye(2), atol=0.06
    )


def test_multi_pipeline_balances_symmetric_modes(bimodal_plan):
    model = bundled_bimodal_2d()
    budget = allocate_budget(bimodal_plan.K, 0.5, "w2", bimodal_plan)
    record = sample_multi_pipeline(
        model, 1.0, bimodal_plan, budget, 4_096, seed=1,
        config=SamplerConfig(iterations=80),
    )
    right = float(np.mean(record.samples[:, 0] > 0.0))
    assert 0.40 <= right <= 0.60
    assert abs(record.samples[:, 0].mean()) < 0.2


def test_multi_pipeline_validation(bimodal_plan):
    model = bundled_bimodal_2d()
    budget = allocate_budget(bimodal_plan.K, 0.5, "w2", bimodal_plan)
    with pytest.raises(ValueError, match="different sigma_tar"):
        sample_multi_pipeline(model, 2.0, bimodal_plan, budget, 8)
    with pytest.raises(ValueError, match="needs a MultiPlan"):
        sample_multi_pipeline(model, 1.0, plan_slc(1.0, 8.0), budget, 8)
    with pytest.raises(ValueError, match="n must be"):
        sample_multi_pipeline(model, 1.0, bimodal_plan, budget, 0)


# -- determinism ----------------------------------------------------------------


def test_pipeline_is_deterministic_and_seed_sensitive():
    model = gaussian_2d([0.0, 0.0], [1.0, 0.125])
    plan = plan_slc(1.0, 8.0)
    budget = allocate_budget(plan.K, 0.5, "kl", plan)
    cfg = SamplerConfig(iterations=32)
    a = sample_slc_pipeline(model, plan, budget, 256, seed=7, config=cfg)
    b = sample_slc_pipeline(model, plan, budget, 256, seed=7, config=cfg)
    c = sample_slc_pipeline(model, plan, budget, 256, seed=8, config=cfg)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_pipeline_output_independent_of_thread_count():
    model = gaussian_2d([0.0, 0.0], [1.0, 0.125])
    plan = plan_slc(1.0, 8.0)
    budget = allocate_budget(plan.K, 0.5, "kl", plan)
    cfg = SamplerConfig(iterations=24)
    serial = sample_slc_pipeline(model, plan, budget, 2_500, seed=2, config=cfg, threads=1)
    parallel = sample_slc_pipeline(model, plan, budget, 2_500, seed=2, config=cfg, threads=4)
    np.testing.assert_array_equal(serial.samples, parallel.samples)


def test_pipeline_prefix_stable_under_larger_n():
    # chunked seeding: growing n must not disturb earlier samples
    model = gaussian_2d([0.0, 0.0], [1.0, 0.125])
    plan = plan_slc(1.0, 8.0)
    budget = allocate_budget(plan.K, 0.5, "kl", plan)
    cfg = SamplerConfig(iterations=24)
    small = sample_slc_pipeline(model, plan, budget, 2_048, seed=2, config=cfg)
    large = sample_slc_pipeline(model, plan, budget, 2_500, seed=2, config=cfg)
    np.testing.assert_array_equal(large.samples[:2_048], small.samples)


# -- stage conditioning ---------------------------------------------------------


def probe_stage_hessians(plan, model, k, n_probes, rng):
    """Min/max Hessian eigenvalues of the stage marginal at random probes."""
    law = stage_marginal(plan, model, k)
    pts = law.exact_sample(n_probes, rng)
    eigs = np.linalg.eigvalsh(hessian(law, pts))
    return float(eigs.min()), float(eigs.max())


def test_slc_stage_problems_respect_sandwiches():
    model = gaussian_2d([0.0, 0.0], [1.0, 0.125])
    plan = plan_slc(1.0, 8.0)
    rng = np.random.default_rng(0)
    for k in range(plan.K + 1):
        lo, hi = plan.forward_interval(k)
        emin, emax = probe_stage_hessians(plan, model, k, 50, rng)
        assert emin >= lo * (1.0 - 1e-8)
        assert emax <= hi * (1.0 + 1e-8)
        if k < plan.K:
            blo, bhi = plan.backward_interval(k)
            tether = plan.tether(k)
            assert emin + tether >= blo * (1.0 - 1e-8)
            assert emax + tether <= bhi * (1.0 + 1e-8)
            assert bhi / blo < 2.0


def test_multi_stage_problems_respect_sandwiches(bimodal_plan):
    model = bundled_bimodal_2d()
    rng = np.random.default_rng(1)
    for k in range(1, bimodal_plan.K + 1):
        lo, hi = bimodal_plan.forward_interval(k)
        emin, emax = probe_stage_hessians(bimodal_plan, model, k, 50, rng)
        assert emin >= lo - 1e-8
        assert emax <= hi * (1.0 + 1e-8)
        if k < bimodal_plan.K:
            blo, bhi = bimodal_plan.backward_interval(k)
            tether = bimodal_plan.tether(k)
            assert emin + tether >= blo - 1e-8
            assert emax + tether <= bhi * (1.0 + 1e-8)
            assert bhi / blo == pytest.approx(2.0)


# -- records and serialization ---------------------------------------------------


def test_total_calls_of_empty_record_is_zero():
    budget = StageBudget("kl", 0.5, 0.5, np.array([1.0]), np.array([0.5]))
    record = RunRecord(np.empty((0, 2)), None, budget, [], 0)
    assert total_calls(record) == 0


def test_samples_jsonl_roundtrip(tmp_path):
    model = gaussian_2d([0.0, 0.0], [1.0, 0.5])
    plan = plan_slc(1.0, 2.0)
    budget = allocate_budget(plan.K, 0.5, "kl", plan)
    record = sample_slc_pipeline(model, plan, budget, 17, seed=4, config=SamplerConfig(iterations=8))
    path = tmp_path / "samples.jsonl"
    dump_samples(record, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 17
    np.testing.assert_array_equal(load_samples(path), record.samples)


def test_run_summary_matches_recount():
    model = gaussian_2d([0.0, 0.0], [1.0, 0.125])
    plan = plan_slc(1.0, 8.0)
    budget = allocate_budget(plan.K, 0.5, "kl", plan)
    record = sample_slc_pipeline(model, plan, budget, 32, seed=0, config=SamplerConfig(iterations=8))
    summary = run_summary(record)
    assert summary["total_calls"] == sum(s["calls"] for s in summary["stages"])
    assert summary["total_calls"] == total_calls(record)
    assert summary["n"] == 32
    assert summary["distance"] == "kl"
    assert len(summary["stages"]) == plan.K + 1
