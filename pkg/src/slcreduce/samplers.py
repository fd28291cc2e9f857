"""Black-box chain samplers for strongly log-concave targets.

The two methods are Metropolis-adjusted Langevin (MALA) and unadjusted
Langevin (ULA). Both advance n chains in parallel in fixed-size blocks
of pre-drawn randomness; see kernels.py for the backend contract.

Automatic settings for a target with curvature in [m, M]:

  stepsize   MALA: 1 / (2 M sqrt(d)),  ULA: 1 / (2 M)
  iterations ceil(20 sqrt(d) ln(1/delta)^3 M/m), at least 1,

where delta is the per-stage accuracy share. MALA costs one fused
log-density-and-score call per iteration plus one to start; ULA costs
one score call per iteration.

A problem is described either by a model object (anything understood by
models.log_density_and_score, which unlocks the batched block drivers
and the compiled backend) or by plain single-point oracles.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from slcreduce.kernels import Backend, PackedMixtureTarget, get_backend, try_pack
from slcreduce.models import as_rng, log_density_and_score

__all__ = [
    "SamplerConfig",
    "SlcProblem",
    "SamplerRun",
    "SamplerDivergenceError",
    "iterations_for",
    "stepsize_for",
    "mala_step",
    "run_chains",
    "run_sampler",
    "run_sampler_batch",
]


class SamplerDivergenceError(RuntimeError):
    """A chain left the admissible region; the stepsize is too large."""


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler settings; None selects the automatic choice.

    ``accuracy`` is the per-run accuracy share delta in (0, 1), used
    only when ``iterations`` is None. ``iterations=0`` is allowed and
    means "return the warm start untouched". ``trace_path``, when set,
    makes run_sampler write a per-iteration CSV trace
    (iteration, accepted, position norm); tracing advances the chain
    one step at a time, so its random stream matches block_size=1.
    """

    method: str = "mala"
    iterations: int | None = None
    stepsize: float | None = None
    accuracy: float = 0.5
    block_size: int = 32
    divergence_radius: float = 1e8
    warm_start: np.ndarray | None = None
    trace_path: str | None = None

    def __post_init__(self):
        if self.method not in ("mala", "ula"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.iterations is not None and self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.stepsize is not None and self.stepsize <= 0:
            raise ValueError("stepsize must be positive")
        if not (0.0 < self.accuracy < 1.0):
            raise ValueError("accuracy must lie in (0, 1)")
        if self.block_size < 1:
            raise ValueError("block_size must be at least 1")


@dataclass(frozen=True)
class SlcProblem:
    """A sampling target with certified curvature bounds 0 < m <= M.

    Exactly one description is needed: ``model``, or a ``score`` oracle
    (plus ``log_density`` for MALA). Oracles act on single points of
    shape (dim,).
    """

    m: float
    M: float
    dim: int
    score: Callable[[np.ndarray], np.ndarray] | None = None
    log_density: Callable[[np.ndarray], float] | None = None
    model: object | None = None

    def __post_init__(self):
        if not (0.0 < self.m <= self.M):
            raise ValueError("need 0 < m <= M")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.model is None and self.score is None:
            raise ValueError("need a model or a score oracle")

    @classmethod
    def from_model(cls, model, m: float, M: float) -> "SlcProblem":
        return cls(m=float(m), M=float(M), dim=model.dim, model=model)

    @property
    def kappa(self) -> float:
        return self.M / self.m


@dataclass(frozen=True)
class SamplerRun:
    samples: np.ndarray
    calls: int
    iterations: int
    accept_rate: float | None


class _OracleTarget:
    """Adapts single-point oracles to the fused batched evaluation."""

    def __init__(self, problem: SlcProblem):
        self._score = problem.score
        self._log_density = problem.log_density
        self.dim = problem.dim

    def log_density_and_score(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        score = np.stack([np.asarray(self._score(p), dtype=float) for p in pts])
        if self._log_density is None:
            logp = np.zeros(pts.shape[0])
        else:
            logp = np.array([float(self._log_density(p)) for p in pts])
        if np.ndim(x) == 1:
            return logp[0], score[0]
        return logp, score


def _problem_target(problem: SlcProblem):
    return problem.model if problem.model is not None else _OracleTarget(problem)


def _require_log_density(problem: SlcProblem) -> None:
    if problem.model is None and problem.log_density is None:
        raise ValueError("MALA needs a log-density oracle")


def iterations_for(accuracy: float, dim: int, kappa: float) -> int:
    """Automatic iteration count for accuracy share delta = ``accuracy``."""
    if not (0.0 < accuracy < 1.0):
        raise ValueError("accuracy must lie in (0, 1)")
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if kappa < 1.0:
        raise ValueError("kappa must be at least 1")
    return max(1, math.ceil(20.0 * math.sqrt(dim) * math.log(1.0 / accuracy) ** 3 * kappa))


def stepsize_for(method: str, M: float, dim: int) -> float:
    """Automatic stepsize for a target with curvature upper bound M."""
    if M <= 0:
        raise ValueError("M must be positive")
    if method == "mala":
        return 0.5 / (M * math.sqrt(dim))
    if method == "ula":
        return 0.5 / M
    raise ValueError(f"unknown method {method!r}")


def mala_step(state, problem: SlcProblem, h: float, seed_or_rng=0) -> np.ndarray:
    """One MALA proposal and accept/reject decision from ``state``.

    Consumes one d-vector of normals and one uniform; returns the next
    state. A proposal with non-finite log density is rejected.
    """
    if h <= 0:
        raise ValueError("stepsize must be positive")
    _require_log_density(problem)
    rng = as_rng(seed_or_rng)
    target = _problem_target(problem)
    x = np.asarray(state, dtype=float)
    lp_x, sc_x = log_density_and_score(target, x)
    y = x + h * sc_x + math.sqrt(2.0 * h) * rng.standard_normal(x.shape)
    lp_y, sc_y = log_density_and_score(target, y)
    fwd = y - x - h * sc_x
    bwd = x - y - h * sc_y
    log_alpha = lp_y - lp_x + (fwd @ fwd - bwd @ bwd) / (4.0 * h)
    if math.log(rng.random()) < log_alpha:
        return y
    return x.copy()


def run_chains(
    target,
    x0: np.ndarray,
    h: float,
    n_iters: int,
    method: str = "mala",
    seed_or_rng=0,
    backend: Backend | None = None,
    block_size: int = 32,
    divergence_radius: float = 1e8,
) -> tuple[np.ndarray, int, int]:
    """Advance n parallel chains; returns (points, oracle calls, accepts).

    ``target`` is either a PackedMixtureTarget (backend kernels) or any
    model with fused evaluation (numpy blocks). Randomness is drawn in
    blocks of ``block_size`` steps: normals first, then, for MALA, the
    log-uniform accept draws. The stream layout is backend-invariant
    but does depend on block_size, which is therefore part of the
    reproducibility contract along with the seed.
    """
    rng = as_rng(seed_or_rng)
    x = np.array(x0, dtype=float, order="C", copy=True)
    if x.ndim != 2:
        raise ValueError("x0 must have shape (n_chains, dim)")
    n, d = x.shape

    packed = isinstance(target, PackedMixtureTarget)
    if packed:
        if target.n_chains != n or target.dim != d:
            raise ValueError("packed target does not match x0 shape")
        if backend is None:
            backend = get_backend()
        eval_fn = backend.packed_eval(target)
    else:
        def eval_fn(pts):
            return log_density_and_score(target, pts)

    calls = 0
    accepted = 0
    mala = method == "mala"
    if mala:
        logp, score = eval_fn(x)
        logp = np.ascontiguousarray(logp)
        score = np.ascontiguousarray(score)
        calls += 1
        if not np.all(np.isfinite(logp)):
            raise SamplerDivergenceError("initial point has non-finite log density")
    elif method != "ula":
        raise ValueError(f"unknown method {method!r}")

    from slcreduce import _kernels_py

    done = 0
    while done < n_iters:
        steps = min(block_size, n_iters - done)
        normals = rng.standard_normal((steps, n, d))
        if mala:
            logu = np.log(rng.random((steps, n)))
            if packed:
                accepted += backend.mala_block(target, x, logp, score, h, normals, logu)
            else:
                accepted += _kernels_py.mala_block(eval_fn, x, logp, score, h, normals, logu)
        else:
            if packed:
                backend.ula_block(target, x, h, normals)
            else:
                _kernels_py.ula_block(eval_fn, x, h, normals)
        calls += steps
        done += steps
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > divergence_radius:
            raise SamplerDivergenceError(
                f"chain left |x| <= {divergence_radius:g} after {done} iterations; "
                "reduce the stepsize"
            )
    return x, calls, accepted


def run_sampler_batch(
    problem: SlcProblem,
    x0,
    config: SamplerConfig = SamplerConfig(),
    seed_or_rng=0,
    backend: Backend | None = None,
) -> SamplerRun:
    """Run independent chains from each row of ``x0`` (shape (n, d))."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 2 or x0.shape[1] != problem.dim:
        raise ValueError("x0 must have shape (n_chains, dim)")
    if config.method == "mala":
        _require_log_density(problem)

    n_iters = (
        config.iterations
        if config.iterations is not None
        else iterations_for(config.accuracy, problem.dim, problem.kappa)
    )
    if n_iters == 0:
        return SamplerRun(samples=x0.copy(), calls=0, iterations=0, accept_rate=None)
    h = config.stepsize or stepsize_for(config.method, problem.M, problem.dim)

    target = None
    if problem.model is not None:
        target = try_pack(problem.model, x0.shape[0])
        if target is None:
            target = problem.model
    else:
        target = _OracleTarget(problem)
    x, calls, accepted = run_chains(
        target,
        x0,
        h,
        n_iters,
        method=config.method,
        seed_or_rng=seed_or_rng,
        backend=backend,
        block_size=config.block_size,
        divergence_radius=config.divergence_radius,
    )
    rate = accepted / (n_iters * x.shape[0]) if config.method == "mala" else None
    return SamplerRun(samples=x, calls=calls, iterations=n_iters, accept_rate=rate)


def run_sampler(
    problem: SlcProblem,
    config: SamplerConfig = SamplerConfig(),
    seed_or_rng=0,
    backend: Backend | None = None,
) -> tuple[np.ndarray, int]:
    """One approximate draw from the problem's target.

    The chain starts at ``config.warm_start`` (origin when unset) and
    returns (sample, oracle calls). With iterations=0 the warm start
    comes back unchanged and calls is 0.
    """
    if config.warm_start is None:
        warm = np.zeros(problem.dim)
    else:
        warm = np.asarray(config.warm_start, dtype=float)
        if warm.shape != (problem.dim,):
            raise ValueError("warm start must have shape (dim,)")
    if config.method == "mala":
        _require_log_density(problem)
    n_iters = (
        config.iterations
        if config.iterations is not None
        else iterations_for(config.accuracy, problem.dim, problem.kappa)
    )
    if n_iters == 0:
        return warm.copy(), 0
    if config.trace_path is not None:
        return _run_traced(problem, warm, n_iters, config, seed_or_rng)
    run = run_sampler_batch(problem, warm[None, :], config, seed_or_rng, backend)
    return run.samples[0], run.calls


def _run_traced(
    problem: SlcProblem, warm: np.ndarray, n_iters: int, config: SamplerConfig, seed_or_rng
) -> tuple[np.ndarray, int]:
    """Single chain advanced one step at a time, dumping a CSV trace."""
    from slcreduce import _kernels_py

    rng = as_rng(seed_or_rng)
    target = _problem_target(problem)

    def eval_fn(pts):
        return log_density_and_score(target, pts)

    h = config.stepsize or stepsize_for(config.method, problem.M, problem.dim)
    x = warm[None, :].copy()
    d = warm.size
    calls = 0
    mala = config.method == "mala"
    if mala:
        logp, score = eval_fn(x)
        logp = np.ascontiguousarray(logp)
        score = np.ascontiguousarray(score)
        calls += 1
        if not np.all(np.isfinite(logp)):
            raise SamplerDivergenceError("initial point has non-finite log density")

    with open(config.trace_path, "w", encoding="utf-8") as fh:
        fh.write("iteration,accepted,norm\n")
        for t in range(1, n_iters + 1):
            normals = rng.standard_normal((1, 1, d))
            if mala:
                logu = np.log(rng.random((1, 1)))
                acc = _kernels_py.mala_block(eval_fn, x, logp, score, h, normals, logu)
            else:
                _kernels_py.ula_block(eval_fn, x, h, normals)
                acc = 1
            calls += 1
            fh.write(f"{t},{int(acc)},{float(np.linalg.norm(x[0])):.17g}\n")
            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > config.divergence_radius:
                raise SamplerDivergenceError(
                    f"chain left |x| <= {config.divergence_radius:g} after {t} iterations; "
                    "reduce the stepsize"
                )
    return x[0].copy(), calls
