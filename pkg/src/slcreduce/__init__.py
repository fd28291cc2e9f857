"""Sampling from multimodal and ill-conditioned targets by short noising
trajectories, strongly log-concave backward conditionals, and black-box
chain samplers."""

from slcreduce.diagnostics import (
    CheckResult,
    DistanceEstimate,
    check_backward_sandwich,
    check_brascamp_lieb,
    check_forward_sandwich,
    check_kl_chain,
    check_spectral_propagation,
    check_tweedie_second_order,
    check_wasserstein_contraction,
    default_suite,
    probe_points,
    suite_passed,
    w2_exact_1d,
    w2_sliced,
    write_report,
)
from slcreduce.gauss import GaussianLaw, backward_pushforward, kl_gaussian, w2_gaussian
from slcreduce.models import (
    AnnealedView,
    BackwardConditional,
    GaussianMixture,
    SlcQuadraticPlus,
    anneal,
    backward_conditional,
    bundled_bimodal_2d,
    bundled_three_mode_2d,
    exact_sample,
    hessian,
    load_model,
    log_density,
    model_from_dict,
    model_to_dict,
    posterior_moments,
    score,
)
from slcreduce.pipeline import (
    RunRecord,
    StageBudget,
    StageRecord,
    allocate_budget,
    dump_samples,
    load_samples,
    run_summary,
    sample_multi_pipeline,
    sample_slc_pipeline,
    stage_marginal,
    total_calls,
)
from slcreduce.planner import (
    MultiPlan,
    SlcPlan,
    estimate_cov_envelope,
    load_plan,
    plan_from_dict,
    plan_multi,
    plan_slc,
    plan_to_dict,
    worst_case_K,
    worst_case_lambdas,
)
from slcreduce.samplers import (
    SamplerConfig,
    SamplerDivergenceError,
    SlcProblem,
    iterations_for,
    mala_step,
    run_sampler,
    run_sampler_batch,
    stepsize_for,
)

__version__ = "0.1.0"
