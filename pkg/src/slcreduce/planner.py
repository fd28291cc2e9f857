"""Forward-trajectory planning: adaptive step factors and stage counts.

Both planners design a short variance-preserving noising chain

  Y_{k+1} = a_k Y_k + sqrt(1 - a_k^2) W_k,   W_k ~ N(0, I),

run forward just long enough that the terminal marginal and every
backward conditional are well-conditioned strongly log-concave targets.

Log-concave route
-----------------
After rescaling the target by sqrt(m) its curvature lies in [1, mu_0]
with mu_0 = M / m. Choosing a_k^2 = mu_k / (1 + mu_k) halves the excess
conditioning exactly at every step:

  mu_{k+1} = 1 + (mu_k - 1) / 2,

which is exact in floating point (the update is an average with a power
of two). The chain stops at the first mu_K <= 2, giving
K = ceil(log2(mu_0 - 1)) for mu_0 > 2 and K = 0 otherwise. The tether
weight added to stage k's backward conditional is
a_k^2 / (1 - a_k^2) = mu_k, so backward curvature lies in
[1 + mu_k, 2 mu_k]: condition number below 2 at every stage.

Multimodal route
----------------
The target is the sigma_tar-smoothed data law Z = X_data + sigma_tar W.
In rescaled units X = X_data / sigma_tar, the chain starts at
Y_1 = (X + W) / sqrt(2), so the signal coefficient of X in Y_k is
theta_{k-1} with theta_0^2 = 1/2 and theta_k = a_k theta_{k-1}. Stage
difficulty is measured by

  lambda_k = 4 B_k theta_{k-1}^2,
  B_k = sup_y || cov(X | Y_k = y) ||_op,

and the step factor a_k^2 = (2 lambda_k + 2) / (2 lambda_k + 3) keeps
every backward conditional inside the curvature window
[lambda_k + 2, 2 lambda_k + 4] (condition number exactly 2). The chain
stops at the first lambda_K <= 1/2, which caps the terminal marginal's
condition number at 4. B_k depends on theta_{k-1}, so planning
interleaves envelope estimation with the step recursion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from slcreduce.models import anneal, as_rng, posterior_moments

__all__ = [
    "SlcPlan",
    "MultiPlan",
    "plan_slc",
    "plan_multi",
    "slc_stepsize",
    "multi_stepsize",
    "worst_case_lambdas",
    "worst_case_K",
    "estimate_cov_envelope",
    "plan_to_dict",
    "plan_from_dict",
    "load_plan",
    "dump_plan",
]


def slc_stepsize(mu: float) -> float:
    """Squared step factor a^2 for a stage with conditioning mu."""
    if mu < 1.0:
        raise ValueError("conditioning ratio must be at least 1")
    return mu / (1.0 + mu)


def multi_stepsize(lam: float) -> float:
    """Squared step factor a^2 for a multimodal stage with difficulty lam."""
    if lam < 0.0:
        raise ValueError("stage difficulty must be nonnegative")
    return (2.0 * lam + 2.0) / (2.0 * lam + 3.0)


@dataclass(frozen=True)
class SlcPlan:
    """Noising schedule for a strongly log-concave target.

    ``mu[k]`` is the conditioning ratio of stage k's marginal (curvature
    in [1, mu[k]] after rescaling by sqrt(m)); ``a[k]`` drives the step
    from stage k to k + 1. ``mu`` has length K + 1 and ``a`` length K.
    """

    m: float
    M: float
    K: int
    mu: np.ndarray
    a: np.ndarray

    @property
    def kappa(self) -> float:
        return self.M / self.m

    @property
    def rescale(self) -> float:
        """Multiplier taking target samples to chain units, Y = rescale * X."""
        return math.sqrt(self.m)

    @property
    def b(self) -> np.ndarray:
        return np.sqrt(1.0 - self.a**2)

    def signal(self, k: int) -> float:
        """Cumulative signal coefficient of stage k: Y_k = signal * Y_0 + noise."""
        return float(np.prod(self.a[:k]))

    def tether(self, k: int) -> float:
        """Tether weight a_k^2 / (1 - a_k^2) of stage k's backward pull."""
        return float(self.mu[k])

    def forward_interval(self, k: int) -> tuple[float, float]:
        """Curvature window of the stage-k marginal, rescaled units."""
        return (1.0, float(self.mu[k]))

    def backward_interval(self, k: int) -> tuple[float, float]:
        """Curvature window of the stage-k backward conditional."""
        return (1.0 + float(self.mu[k]), 2.0 * float(self.mu[k]))

    def terminal_interval(self) -> tuple[float, float]:
        return (1.0, float(self.mu[self.K]))


@dataclass(frozen=True)
class MultiPlan:
    """Noising schedule for a multimodal target smoothed at sigma_tar.

    Stages are numbered 1..K: stage k is the marginal of Y_k, whose
    signal coefficient on the rescaled data X is theta_{k-1}, stored as
    ``theta2[k-1]``. ``a[k-1]`` drives the step Y_k -> Y_{k+1} (length
    K - 1), ``lam`` and ``B`` hold lambda_k and the envelope estimates
    B_k (length K). The implicit first mixing step has
    a_0^2 = theta2[0] = 1/2.
    """

    sigma_tar: float
    K: int
    theta2: np.ndarray
    a: np.ndarray
    lam: np.ndarray
    B: np.ndarray

    @property
    def b(self) -> np.ndarray:
        return np.sqrt(1.0 - self.a**2)

    def theta(self, k: int) -> float:
        """Signal coefficient theta_{k-1} of stage k (1-based)."""
        return math.sqrt(float(self.theta2[k - 1]))

    def noise(self, k: int) -> float:
        return math.sqrt(1.0 - float(self.theta2[k - 1]))

    def tether(self, k: int) -> float:
        """Tether weight of stage k's backward pull, 2 lambda_k + 2."""
        return 2.0 * float(self.lam[k - 1]) + 2.0

    def forward_interval(self, k: int) -> tuple[float, float]:
        return (1.0 - float(self.lam[k - 1]), 2.0)

    def backward_interval(self, k: int) -> tuple[float, float]:
        lam = float(self.lam[k - 1])
        return (lam + 2.0, 2.0 * lam + 4.0)

    def terminal_interval(self) -> tuple[float, float]:
        return (1.0 - float(self.lam[self.K - 1]), 2.0)


def plan_slc(m: float, M: float) -> SlcPlan:
    """Plan the noising chain for curvature bounds 0 < m <= M."""
    if not (m > 0.0 and math.isfinite(m)):
        raise ValueError("m must be positive and finite")
    if not (M >= m and math.isfinite(M)):
        raise ValueError("M must satisfy M >= m and be finite")
    mu = [M / m]
    a = []
    while mu[-1] > 2.0:
        a.append(math.sqrt(slc_stepsize(mu[-1])))
        mu.append(1.0 + (mu[-1] - 1.0) / 2.0)
    return SlcPlan(m=float(m), M=float(M), K=len(a), mu=np.array(mu), a=np.array(a))


def worst_case_lambdas(B_max: float) -> np.ndarray:
    """Difficulty sequence lambda_1, lambda_2, ... when every stage sees
    the envelope bound B_max. Starts at 2 B_max and descends through
    lambda' = lambda (2 lambda + 2) / (2 lambda + 3) until it passes 1/2;
    the returned array includes the first value <= 1/2."""
    if B_max < 0.0 or not math.isfinite(B_max):
        raise ValueError("B_max must be nonnegative and finite")
    lam = [2.0 * B_max]
    while lam[-1] > 0.5:
        lam.append(lam[-1] * multi_stepsize(lam[-1]))
    return np.array(lam)


def worst_case_K(B_max: float) -> int:
    """Stage count if every envelope estimate equals B_max."""
    return worst_case_lambdas(B_max).size


def estimate_cov_envelope(
    model,
    theta: float,
    n_candidates: int = 512,
    seed_or_rng: int | np.random.Generator = 0,
    refine_steps: int = 40,
) -> float:
    """Estimate sup_y ||cov(X | theta X + sqrt(1-theta^2) W = y)||_op.

    Candidates combine exact draws of Y with deterministic points where
    the posterior spread peaks for mixtures: images of component means
    and of pairwise mean midpoints. The best candidate is polished by a
    shrinking coordinate pattern search. The result is a lower bound on
    the true supremum; downstream curvature windows tolerate an
    underestimate of up to 1 / (4 theta^2).
    """
    if not (0.0 < theta < 1.0):
        raise ValueError("theta must lie in (0, 1)")
    rng = as_rng(seed_or_rng)
    noise = math.sqrt(1.0 - theta * theta)
    view = anneal(model, theta, noise)
    candidates = [view.exact_sample(n_candidates, rng)]
    if hasattr(model, "means"):
        means = np.asarray(model.means)
        candidates.append(theta * means)
        mids = 0.5 * (means[:, None, :] + means[None, :, :]).reshape(-1, model.dim)
        candidates.append(theta * mids)
    else:
        candidates.append(np.zeros((1, model.dim)))
    ys = np.concatenate(candidates, axis=0)

    def opnorms(points: np.ndarray) -> np.ndarray:
        _, covs = posterior_moments(model, theta, noise, points)
        return np.linalg.eigvalsh(covs)[..., -1]

    vals = opnorms(ys)
    best = ys[int(np.argmax(vals))]
    best_val = float(vals.max())
    step = 0.5
    for _ in range(refine_steps):
        probes = best + step * np.concatenate([np.eye(model.dim), -np.eye(model.dim)])
        pvals = opnorms(probes)
        i = int(np.argmax(pvals))
        if pvals[i] > best_val:
            best_val = float(pvals[i])
            best = probes[i]
        else:
            step *= 0.5
    return best_val


def plan_multi(
    model,
    sigma_tar: float,
    n_candidates: int = 512,
    seed_or_rng: int | np.random.Generator = 0,
    max_stages: int = 100_000,
) -> MultiPlan:
    """Plan the noising chain for a multimodal target smoothed at sigma_tar.

    ``model`` is the data law; all envelope estimation happens in
    rescaled units X = X_data / sigma_tar. Stage count is bounded by
    roughly 7 (1 + B_max), so max_stages only guards against a broken
    envelope estimator.
    """
    if sigma_tar <= 0.0 or not math.isfinite(sigma_tar):
        raise ValueError("sigma_tar must be positive and finite")
    rng = as_rng(seed_or_rng)
    base = model if sigma_tar == 1.0 else model.scaled(1.0 / sigma_tar)
    theta2 = [0.5]
    a = []
    lams = []
    Bs = []
    while True:
        theta = math.sqrt(theta2[-1])
        B = estimate_cov_envelope(base, theta, n_candidates, rng)
        lam = 4.0 * B * theta2[-1]
        Bs.append(B)
        lams.append(lam)
        if lam <= 0.5:
            break
        if len(lams) >= max_stages:
            raise ValueError("stage budget exhausted; envelope estimates not descending")
        a_sq = multi_stepsize(lam)
        a.append(math.sqrt(a_sq))
        theta2.append(a_sq * theta2[-1])
    return MultiPlan(
        sigma_tar=float(sigma_tar),
        K=len(lams),
        theta2=np.array(theta2),
        a=np.array(a),
        lam=np.array(lams),
        B=np.array(Bs),
    )


# -- serialization -------------------------------------------------------------


def plan_to_dict(plan) -> dict:
    if isinstance(plan, SlcPlan):
        return {
            "type": "slc_plan",
            "m": plan.m,
            "M": plan.M,
            "K": plan.K,
            "mu": plan.mu.tolist(),
            "a": plan.a.tolist(),
        }
    if isinstance(plan, MultiPlan):
        return {
            "type": "multi_plan",
            "sigma_tar": plan.sigma_tar,
            "K": plan.K,
            "theta2": plan.theta2.tolist(),
            "a": plan.a.tolist(),
            "lambda": plan.lam.tolist(),
            "B": plan.B.tolist(),
        }
    raise ValueError(f"cannot serialize plan of type {type(plan).__name__}")


def plan_from_dict(payload: dict):
    if not isinstance(payload, dict) or "type" not in payload:
        raise ValueError("plan payload must be an object with a 'type' field")
    kind = payload["type"]
    if kind == "slc_plan":
        missing = {"m", "M", "K", "mu", "a"} - set(payload)
        if missing:
            raise ValueError(f"slc_plan payload missing {sorted(missing)}")
        plan = SlcPlan(
            m=float(payload["m"]),
            M=float(payload["M"]),
            K=int(payload["K"]),
            mu=np.asarray(payload["mu"], dtype=float),
            a=np.asarray(payload["a"], dtype=float),
        )
        if plan.mu.shape != (plan.K + 1,) or plan.a.shape != (plan.K,):
            raise ValueError("slc_plan arrays inconsistent with stage count")
        return plan
    if kind == "multi_plan":
        missing = {"sigma_tar", "K", "theta2", "a", "lambda", "B"} - set(payload)
        if missing:
            raise ValueError(f"multi_plan payload missing {sorted(missing)}")
        plan = MultiPlan(
            sigma_tar=float(payload["sigma_tar"]),
            K=int(payload["K"]),
            theta2=np.asarray(payload["theta2"], dtype=float),
            a=np.asarray(payload["a"], dtype=float),
            lam=np.asarray(payload["lambda"], dtype=float),
            B=np.asarray(payload["B"], dtype=float),
        )
        if plan.theta2.shape != (plan.K,) or plan.a.shape != (plan.K - 1,):
            raise ValueError("multi_plan arrays inconsistent with stage count")
        if plan.lam.shape != (plan.K,) or plan.B.shape != (plan.K,):
            raise ValueError("multi_plan arrays inconsistent with stage count")
        return plan
    raise ValueError(f"unknown plan type {kind!r}")


def load_plan(path):
    with open(path, "r", encoding="utf-8") as fh:
        return plan_from_dict(json.load(fh))


def dump_plan(plan, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_dict(plan), fh, indent=2)
        fh.write("\n")
