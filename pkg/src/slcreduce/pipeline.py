"""Backward-chain sampling: terminal marginal first, then step back.

A pipeline run samples the terminal marginal p_K with a black-box chain
sampler, then walks the plan backward: at stage k each trajectory
samples the conditional of Y_k given its own Y_{k+1}, a strongly
log-concave target with condition number below 2 (multimodal route:
exactly 2). Outputs are returned in target units.

Error budgeting
---------------
The total accuracy request epsilon is split into per-stage shares.

On the log-concave route every backward kernel is a W2 contraction and
KL does not grow under the kernel map, so uniform shares
epsilon / (K + 1) over the terminal plus K backward tasks suffice.

On the multimodal route the backward kernel can expand W2 by 1 / a_k,
so a stage-k error reaching stage 1 is inflated by
prod_{l<k} (1 / a_l). Budgets

  delta_k = (prod_{l=1}^{k-1} a_l) * epsilon' / K

cancel that inflation exactly: sum_k delta_k prod_{l<k} (1/a_l)
telescopes to epsilon', the request in rescaled units
epsilon' = epsilon / (sqrt(2) sigma_tar).

Reproducibility
---------------
Trajectories run in fixed chunks of 2048. The master seed's child
stream 0 is reserved for plan construction by callers (the CLI uses
it); chunk j consumes child j + 1. Sample j therefore depends only on
the seed and j's chunk, never on n or the thread count.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from slcreduce.kernels import Backend, get_backend, pack_mixture
from slcreduce.models import (
    GaussianMixture,
    anneal,
    as_rng,
    log_density_and_score,
)
from slcreduce.planner import MultiPlan, SlcPlan
from slcreduce.samplers import SamplerConfig, iterations_for, run_chains, stepsize_for

__all__ = [
    "StageBudget",
    "StageRecord",
    "RunRecord",
    "allocate_budget",
    "stage_marginal",
    "sample_slc_pipeline",
    "sample_multi_pipeline",
    "total_calls",
    "dump_samples",
    "load_samples",
    "run_summary",
    "CHUNK_SIZE",
]

CHUNK_SIZE = 2048


@dataclass(frozen=True)
class StageBudget:
    """Per-stage accuracy budgets, in stage order.

    Log-concave route: ``deltas[k]`` feeds backward stage k for k < K
    and the terminal task at index K. Multimodal route: ``deltas[k-1]``
    feeds stage k of 1..K, the terminal task last; these live in
    rescaled chain units, where they sum against ``epsilon_prime``.
    ``shares`` are the same budgets normalized to sum exactly to 1.
    """

    distance: str
    epsilon: float
    epsilon_prime: float
    shares: np.ndarray
    deltas: np.ndarray


def allocate_budget(K: int, epsilon: float, distance: str, plan) -> StageBudget:
    """Split an accuracy request across the plan's sampling tasks.

    Uniform over the K + 1 tasks of a log-concave plan (the backward
    kernels contract both supported distances, so errors never grow).
    On a multimodal plan stage k's budget shrinks by prod_{l<k} a_l,
    exactly cancelling the 1/a_l expansion an error suffers on its way
    back to stage 1.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1)")
    if distance not in ("kl", "w2"):
        raise ValueError(f"unknown distance {distance!r}")
    if K != plan.K:
        raise ValueError("K does not match the plan")
    if isinstance(plan, SlcPlan):
        shares = np.full(K + 1, 1.0 / (K + 1))
        return StageBudget(
            distance=distance,
            epsilon=epsilon,
            epsilon_prime=epsilon,
            shares=shares,
            deltas=epsilon * shares,
        )
    if isinstance(plan, MultiPlan):
        if distance != "w2":
            raise ValueError("multimodal plans budget in w2 only")
        eps_prime = epsilon / (math.sqrt(2.0) * plan.sigma_tar)
        # prefix[k-1] = prod_{l<k} a_l for stage k in 1..K
        prefix = np.concatenate([[1.0], np.cumprod(plan.a)])
        deltas = prefix * (eps_prime / K)
        return StageBudget(
            distance="w2",
            epsilon=epsilon,
            epsilon_prime=eps_prime,
            shares=deltas / deltas.sum(),
            deltas=deltas,
        )
    raise ValueError(f"cannot budget plan of type {type(plan).__name__}")


@dataclass(frozen=True)
class StageRecord:
    """Execution record of one sampling task."""

    name: str  # "terminal" or "backward"
    stage: int
    iterations: int
    stepsize: float
    delta: float
    kappa: float
    calls: int  # oracle calls summed over all trajectories
    calls_per_trajectory: int
    accept_rate: float | None
    seconds: float


@dataclass(frozen=True)
class RunRecord:
    """Samples plus per-stage execution records of one pipeline run."""

    samples: np.ndarray
    plan: object
    budget: StageBudget
    records: list[StageRecord]
    seed: int

    @property
    def calls_per_trajectory(self) -> int:
        return sum(r.calls_per_trajectory for r in self.records)


def total_calls(record: RunRecord) -> int:
    """Oracle calls summed over every stage and trajectory."""
    return sum(r.calls for r in record.records)


class _BatchedBackward:
    """Backward conditional with one tether point per chain.

    Row i of a batch evaluates the conditional tethered to y[i]; used by
    the generic driver when the stage marginal is not packable.
    """

    def __init__(self, marginal, a: float, y: np.ndarray):
        self.marginal = marginal
        self.a = float(a)
        self.y = np.asarray(y, dtype=float)
        self.dim = marginal.dim

    def log_density_and_score(self, u):
        logp, sc = log_density_and_score(self.marginal, u)
        b2 = 1.0 - self.a * self.a
        resid = self.a * u - self.y
        return (
            logp - 0.5 * np.sum(resid * resid, axis=-1) / b2,
            sc - (self.a / b2) * resid,
        )


@dataclass(frozen=True)
class _StageSpec:
    """Resolved settings for one task, shared by all chunks."""

    name: str
    stage: int
    marginal: object
    a: float | None  # None for the terminal task
    iterations: int
    stepsize: float
    delta: float
    kappa: float


def _rescaled_base(plan, model):
    if isinstance(plan, SlcPlan):
        scale = plan.rescale
    else:
        scale = 1.0 / plan.sigma_tar
    return model if scale == 1.0 else model.scaled(scale)


def _slc_marginal(plan: SlcPlan, base, k: int):
    """Stage-k marginal: anneal the rescaled base by the cumulative signal."""
    if k == 0:
        return base
    sig = plan.signal(k)
    return anneal(base, sig, math.sqrt(max(0.0, 1.0 - sig * sig)))


def stage_marginal(plan, model, k: int):
    """Law of the stage-k chain variable of ``model``, in chain units."""
    if isinstance(plan, SlcPlan):
        if not 0 <= k <= plan.K:
            raise ValueError("stage index out of range")
        return _slc_marginal(plan, _rescaled_base(plan, model), k)
    if isinstance(plan, MultiPlan):
        if not 1 <= k <= plan.K:
            raise ValueError("stage index out of range")
        base = _rescaled_base(plan, model)
        return anneal(base, plan.theta(k), plan.noise(k))
    raise ValueError(f"unknown plan type {type(plan).__name__}")


def _resolve_stages(plan, budget: StageBudget, base, dim: int, config: SamplerConfig):
    """Terminal task first, then backward tasks in execution order."""
    stages = []

    def make(name, stage, marginal, a, delta, lo, hi):
        kappa = hi / lo
        if kappa > 4.0 + 1e-9:
            raise ValueError("stage condition number exceeds 4; plan is inconsistent")
        iters = (
            config.iterations
            if config.iterations is not None
            else iterations_for(delta, dim, kappa)
        )
        h = config.stepsize or stepsize_for(config.method, hi, dim)
        stages.append(_StageSpec(name, stage, marginal, a, iters, h, delta, kappa))

    if isinstance(plan, SlcPlan):
        if budget.deltas.shape != (plan.K + 1,):
            raise ValueError("budget does not match the plan's stage count")
        lo, hi = plan.terminal_interval()
        make(
            "terminal", plan.K, _slc_marginal(plan, base, plan.K),
            None, float(budget.deltas[plan.K]), lo, hi,
        )
        for k in range(plan.K - 1, -1, -1):
            lo, hi = plan.backward_interval(k)
            make(
                "backward", k, _slc_marginal(plan, base, k),
                float(plan.a[k]), float(budget.deltas[k]), lo, hi,
            )
        return stages
    if isinstance(plan, MultiPlan):
        if budget.deltas.shape != (plan.K,):
            raise ValueError("budget does not match the plan's stage count")
        lo, hi = plan.terminal_interval()
        make(
            "terminal", plan.K, anneal(base, plan.theta(plan.K), plan.noise(plan.K)),
            None, float(budget.deltas[plan.K - 1]), lo, hi,
        )
        for k in range(plan.K - 1, 0, -1):
            lo, hi = plan.backward_interval(k)
            make(
                "backward", k, anneal(base, plan.theta(k), plan.noise(k)),
                float(plan.a[k - 1]), float(budget.deltas[k - 1]), lo, hi,
            )
        return stages
    raise ValueError(f"cannot execute plan of type {type(plan).__name__}")


def _stage_target(spec: _StageSpec, y: np.ndarray | None, n: int):
    """Packed target when the marginal is a mixture, else a model."""
    if spec.a is None:
        if isinstance(spec.marginal, GaussianMixture):
            return pack_mixture(spec.marginal, n)
        return spec.marginal
    b2 = 1.0 - spec.a * spec.a
    if isinstance(spec.marginal, GaussianMixture):
        return pack_mixture(
            spec.marginal, n, tau=spec.a * spec.a / b2, lin=(spec.a / b2) * y
        )
    return _BatchedBackward(spec.marginal, spec.a, y)


def _run_chunk(stages, warm_mean, n: int, seed, config: SamplerConfig, backend: Backend):
    """Run every stage for one chunk of trajectories.

    Returns the final points plus per-stage (calls, accepts or -1,
    seconds) rows for aggregation.
    """
    rng = as_rng(seed)
    y = np.tile(warm_mean, (n, 1))
    rows = []
    for spec in stages:
        x0 = y if spec.a is None else y / spec.a
        target = _stage_target(spec, y, n)
        t0 = time.perf_counter()
        y, calls, accepted = run_chains(
            target,
            x0,
            spec.stepsize,
            spec.iterations,
            method=config.method,
            seed_or_rng=rng,
            backend=backend,
            block_size=config.block_size,
            divergence_radius=config.divergence_radius,
        )
        rows.append((calls, accepted if config.method == "mala" else -1, time.perf_counter() - t0))
    return y, rows


def _run_pipeline(plan, budget, base, warm_mean, out_scale, n, config, seed, backend, threads):
    if n < 1:
        raise ValueError("n must be at least 1")
    dim = warm_mean.size
    backend = backend or get_backend()
    stages = _resolve_stages(plan, budget, base, dim, config)
    n_chunks = max(1, math.ceil(n / CHUNK_SIZE))
    children = np.random.SeedSequence(seed).spawn(n_chunks + 1)
    sizes = [min(CHUNK_SIZE, n - i * CHUNK_SIZE) for i in range(n_chunks)]

    def work(i):
        return _run_chunk(stages, warm_mean, sizes[i], children[i + 1], config, backend)

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(work, range(n_chunks)))
    else:
        outs = [work(i) for i in range(n_chunks)]

    samples = np.concatenate([o[0] for o in outs], axis=0) * out_scale
    records = []
    for si, spec in enumerate(stages):
        per_traj = outs[0][1][si][0]
        accepts = sum(o[1][si][1] for o in outs)
        seconds = sum(o[1][si][2] for o in outs)
        rate = None if config.method != "mala" else accepts / (spec.iterations * n)
        records.append(
            StageRecord(
                name=spec.name,
                stage=spec.stage,
                iterations=spec.iterations,
                stepsize=spec.stepsize,
                delta=spec.delta,
                kappa=spec.kappa,
                calls=per_traj * n,
                calls_per_trajectory=per_traj,
                accept_rate=rate,
                seconds=seconds,
            )
        )
    return RunRecord(samples=samples, plan=plan, budget=budget, records=records, seed=seed)


def sample_slc_pipeline(
    model,
    plan: SlcPlan,
    budget: StageBudget,
    n: int,
    seed: int = 0,
    *,
    config: SamplerConfig = SamplerConfig(),
    backend: Backend | None = None,
    threads: int = 1,
) -> RunRecord:
    """Sample n points from a strongly log-concave target.

    ``model`` must have curvature within [plan.m, plan.M] everywhere;
    models that certify their own bounds are checked against the plan.
    The chain runs on Y = sqrt(m) X, where the curvature window is
    [1, M/m]; the returned samples are mapped back to X units.
    """
    if not isinstance(plan, SlcPlan):
        raise ValueError("sample_slc_pipeline needs an SlcPlan")
    model_m = getattr(model, "m", None)
    model_M = getattr(model, "M", None)
    if model_m is not None and plan.m > model_m * (1.0 + 1e-9):
        raise ValueError("plan's lower curvature bound exceeds the model's")
    if model_M is not None and plan.M < model_M * (1.0 - 1e-9):
        raise ValueError("plan's upper curvature bound is below the model's")
    base = _rescaled_base(plan, model)
    warm = plan.signal(plan.K) * np.asarray(base.mean(), dtype=float)
    return _run_pipeline(
        plan, budget, base, warm, 1.0 / plan.rescale, n, config, seed, backend, threads
    )


def sample_multi_pipeline(
    model,
    sigma_tar: float,
    plan: MultiPlan,
    budget: StageBudget,
    n: int,
    seed: int = 0,
    *,
    config: SamplerConfig = SamplerConfig(),
    backend: Backend | None = None,
    threads: int = 1,
) -> RunRecord:
    """Sample n points from the sigma_tar-smoothed law of ``model``.

    Output units are Z = X_data + sigma_tar W: the chain's first stage
    Y_1 is Z / (sqrt(2) sigma_tar). The plan must have been produced
    from (model, sigma_tar).
    """
    if not isinstance(plan, MultiPlan):
        raise ValueError("sample_multi_pipeline needs a MultiPlan")
    if not math.isclose(plan.sigma_tar, sigma_tar, rel_tol=1e-9):
        raise ValueError("plan was built for a different sigma_tar")
    base = _rescaled_base(plan, model)
    warm = plan.theta(plan.K) * np.asarray(base.mean(), dtype=float)
    out_scale = math.sqrt(2.0) * sigma_tar
    return _run_pipeline(plan, budget, base, warm, out_scale, n, config, seed, backend, threads)


# -- serialization ------------------------------------------------------------


def dump_samples(record: RunRecord, path) -> None:
    """One JSON line per sample: {"index": i, "x": [...]}."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, x in enumerate(record.samples):
            fh.write(json.dumps({"index": i, "x": x.tolist()}) + "\n")


def load_samples(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    rows.sort(key=lambda r: r["index"])
    return np.array([r["x"] for r in rows], dtype=float)


def run_summary(record: RunRecord) -> dict:
    """JSON-ready run digest: totals plus the per-stage records."""
    return {
        "seed": record.seed,
        "n": int(record.samples.shape[0]),
        "distance": record.budget.distance,
        "epsilon": record.budget.epsilon,
        "total_calls": total_calls(record),
        "calls_per_trajectory": record.calls_per_trajectory,
        "stages": [asdict(r) for r in record.records],
    }
