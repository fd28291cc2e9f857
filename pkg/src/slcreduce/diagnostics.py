"""Numerical verifiers for the scheme's inequalities plus distance estimators.

Every check is deterministic given its inputs and seed and returns a
machine-readable CheckResult. Checks over Gaussian instances use closed
forms (the backward kernel maps Gaussians to Gaussians), so those
verdicts are exact up to roundoff rather than Monte Carlo noise.

Each inequality check exposes an injection parameter (a perturbed step
factor, an overstated curvature bound, a shrunken window, a withheld
error budget). Passing one flips the result's ``negative_control``
flag: the suite expects such results to FAIL, which guards against a
check passing vacuously. ``suite_passed`` encodes that convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from slcreduce.gauss import GaussianLaw, backward_pushforward
from slcreduce.gauss import kl_gaussian as _kl_gaussian
from slcreduce.gauss import w2_gaussian as _w2_gaussian
from slcreduce.models import (
    GaussianMixture,
    SlcQuadraticPlus,
    anneal,
    as_rng,
    bundled_bimodal_2d,
    exact_sample,
    hessian,
    model_cov,
    model_mean,
    posterior_moments,
)
from slcreduce.pipeline import stage_marginal
from slcreduce.planner import MultiPlan, SlcPlan, plan_multi, plan_slc

__all__ = [
    "CheckResult",
    "DistanceEstimate",
    "probe_points",
    "check_tweedie_second_order",
    "check_spectral_propagation",
    "check_forward_sandwich",
    "check_backward_sandwich",
    "check_brascamp_lieb",
    "check_wasserstein_contraction",
    "check_kl_chain",
    "w2_exact_1d",
    "w2_sliced",
    "w2_gaussian",
    "kl_gaussian",
    "default_suite",
    "suite_passed",
    "write_report",
]

_DISTANCE_KINDS = (
    "W2-exact-1D",
    "W2-sliced",
    "W2-gaussian-closed-form",
    "KL-gaussian-closed-form",
)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one numerical verification.

    ``passed`` means ``measured`` respects ``bound`` within
    ``tolerance`` in the stated ``direction``; a result flagged as
    ``negative_control`` is EXPECTED to fail.
    """

    name: str
    measured: float
    bound: float
    tolerance: float
    passed: bool
    direction: str
    negative_control: bool = False
    note: str = ""
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "direction": self.direction,
            "negative_control": self.negative_control,
            "note": self.note,
            "metadata": self.metadata,
        }


@dataclass(frozen=True)
class DistanceEstimate:
    """A distance value with its estimator kind and, for Monte Carlo
    estimators, a heuristic standard error (None for closed forms)."""

    kind: str
    value: float
    standard_error: float | None = None

    def __post_init__(self):
        if self.kind not in _DISTANCE_KINDS:
            raise ValueError(f"unknown distance kind {self.kind!r}")
        if self.value < 0.0:
            raise ValueError("distances are nonnegative")


def _result(
    name: str,
    measured: float,
    bound: float,
    tolerance: float,
    direction: str,
    negative_control: bool = False,
    note: str = "",
    **metadata,
) -> CheckResult:
    if direction == "<=":
        passed = measured <= bound + tolerance
    elif direction == ">=":
        passed = measured >= bound - tolerance
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return CheckResult(
        name=name,
        measured=float(measured),
        bound=float(bound),
        tolerance=float(tolerance),
        passed=bool(passed),
        direction=direction,
        negative_control=negative_control,
        note=note,
        metadata=metadata,
    )


def probe_points(model, n_bulk: int = 512, n_tail: int = 8, seed_or_rng=0) -> np.ndarray:
    """Bulk draws from the model plus deterministic tail probes.

    Tail probes sit at radius 5 sqrt(tr cov) from the mean, where the
    density is negligible but curvature sandwiches must still hold.
    """
    rng = as_rng(seed_or_rng)
    parts = []
    if n_bulk > 0:
        parts.append(exact_sample(model, n_bulk, rng))
    if n_tail > 0:
        d = model.dim
        center = np.asarray(model_mean(model), dtype=float)
        radius = 5.0 * math.sqrt(float(np.trace(model_cov(model))))
        if d == 1:
            dirs = np.array([[1.0 if j % 2 == 0 else -1.0] for j in range(n_tail)])
        elif d == 2:
            angles = 2.0 * np.pi * np.arange(n_tail) / n_tail
            dirs = np.column_stack([np.cos(angles), np.sin(angles)])
        else:
            dirs = np.zeros((n_tail, d))
            for j in range(n_tail):
                dirs[j, (j // 2) % d] = 1.0 if j % 2 == 0 else -1.0
        parts.append(center + radius * dirs)
    if not parts:
        raise ValueError("need at least one probe")
    return np.concatenate(parts, axis=0)


# -- inequality checks ----------------------------------------------------------


def check_tweedie_second_order(
    base,
    a: float,
    b: float,
    n_probes: int = 100,
    seed_or_rng=0,
    probes: np.ndarray | None = None,
    tolerance: float = 1e-6,
    a_perturb: float = 0.0,
) -> CheckResult:
    """Annealed-view Hessian against the posterior-covariance identity.

    The Hessian of log p_V for V = aU + bW must equal
    (I - (a^2/b^2) cov(U | V=v)) / b^2. The two sides travel separate
    code paths (mixture algebra vs posterior conditioning), so agreement
    is a real consistency check. ``a_perturb`` shifts the coefficient
    used on the posterior side only, turning the result into a negative
    control.
    """
    if not isinstance(base, GaussianMixture):
        raise ValueError("the second-order posterior identity check needs a mixture base")
    if not (b > 0.0):
        raise ValueError("b must be positive")
    view = anneal(base, a, b)
    if probes is None:
        probes = probe_points(view, n_probes, min(8, n_probes), seed_or_rng)
    lhs = hessian(view, probes)
    a_eff = a + a_perturb
    _, cov = posterior_moments(base, a_eff, b, probes)
    eye = np.eye(base.dim)
    rhs = (eye - (a_eff * a_eff / (b * b)) * cov) / (b * b)
    gap = float(np.max(np.abs(lhs - rhs)))
    control = a_perturb != 0.0
    return _result(
        "tweedie_second_order" + ("_perturbed" if control else ""),
        gap,
        0.0,
        tolerance,
        "<=",
        negative_control=control,
        n_probes=int(probes.shape[0]),
        a=float(a),
        b=float(b),
        a_perturb=float(a_perturb),
    )


def check_spectral_propagation(
    base,
    a: float,
    b: float,
    m: float | None = None,
    M: float | None = None,
    n_probes: int = 256,
    seed_or_rng=0,
    probes: np.ndarray | None = None,
    tolerance: float = 1e-8,
    window_shrink: float = 1.0,
) -> CheckResult:
    """Annealed curvature window [m/(m b^2 + a^2), M/(M b^2 + a^2)].

    ``m`` and ``M`` are certified curvature bounds of the base; at least
    one must be given. ``window_shrink`` < 1 tightens the window beyond
    what the bound claims, turning the result into a negative control.
    """
    if m is None and M is None:
        raise ValueError("need a certified curvature bound m or M")
    view = anneal(base, a, b)
    if probes is None:
        probes = probe_points(view, n_probes, 8, seed_or_rng)
    eigs = np.linalg.eigvalsh(hessian(view, probes))
    slacks = []
    lo = hi = None
    if m is not None:
        lo = m / (m * b * b + a * a) / window_shrink
        slacks.append(float(eigs.min() - lo))
    if M is not None:
        hi = M / (M * b * b + a * a) * window_shrink
        slacks.append(float(hi - eigs.max()))
    control = window_shrink != 1.0
    return _result(
        "spectral_propagation" + ("_shrunk" if control else ""),
        min(slacks),
        0.0,
        tolerance,
        ">=",
        negative_control=control,
        n_probes=int(probes.shape[0]),
        a=float(a),
        b=float(b),
        lower=lo,
        upper=hi,
    )


def _stage_step_factor(plan, k: int) -> float:
    if isinstance(plan, SlcPlan):
        return float(plan.a[k])
    if isinstance(plan, MultiPlan):
        return float(plan.a[k - 1])
    raise ValueError(f"unknown plan type {type(plan).__name__}")


def check_forward_sandwich(
    plan,
    model,
    k: int,
    n_probes: int = 512,
    n_tail: int = 8,
    seed_or_rng=0,
    tolerance: float = 1e-6,
) -> CheckResult:
    """Stage-k marginal Hessian eigenvalues within the plan's window."""
    law = stage_marginal(plan, model, k)
    probes = probe_points(law, n_probes, n_tail, seed_or_rng)
    eigs = np.linalg.eigvalsh(hessian(law, probes))
    lo, hi = plan.forward_interval(k)
    slack = min(float(eigs.min() - lo), float(hi - eigs.max()))
    return _result(
        f"forward_sandwich_stage_{k}",
        slack,
        0.0,
        tolerance,
        ">=",
        n_probes=int(probes.shape[0]),
        stage=int(k),
        lower=float(lo),
        upper=float(hi),
    )


def check_backward_sandwich(
    plan,
    model,
    k: int,
    n_probes: int = 512,
    n_tail: int = 8,
    seed_or_rng=0,
    tolerance: float = 1e-6,
    a_shift: float = 0.0,
) -> CheckResult:
    """Stage-k backward conditional Hessian within the plan's window.

    The conditional's Hessian is the marginal's plus the y-independent
    tether a^2/(1-a^2), so one scan covers every tether point.
    ``a_shift`` perturbs the step factor used for the tether while the
    window stays the plan's, turning the result into a negative control.
    """
    law = stage_marginal(plan, model, k)
    probes = probe_points(law, n_probes, n_tail, seed_or_rng)
    a = _stage_step_factor(plan, k) + a_shift
    if a == 1.0:
        raise ValueError("step factor shifted onto 1; tether undefined")
    tether = a * a / (1.0 - a * a)
    eigs = np.linalg.eigvalsh(hessian(law, probes)) + tether
    lo, hi = plan.backward_interval(k)
    slack = min(float(eigs.min() - lo), float(hi - eigs.max()))
    control = a_shift != 0.0
    return _result(
        f"backward_sandwich_stage_{k}" + ("_perturbed" if control else ""),
        slack,
        0.0,
        tolerance,
        ">=",
        negative_control=control,
        n_probes=int(probes.shape[0]),
        stage=int(k),
        lower=float(lo),
        upper=float(hi),
        a_shift=float(a_shift),
    )


def check_brascamp_lieb(
    model,
    m: float | None = None,
    n_samples: int = 4096,
    seed_or_rng=0,
    m_override: float | None = None,
) -> CheckResult:
    """Empirical covariance top eigenvalue against the 1/m envelope.

    A law with curvature at least m everywhere has covariance dominated
    by I/m. The tolerance is four heuristic standard errors of a
    variance-type estimate, se = top * sqrt(2/(n-1)). ``m_override``
    substitutes a deliberately overstated bound, turning the result
    into a negative control.
    """
    m_eff = m_override if m_override is not None else m
    if m_eff is None:
        m_eff = getattr(model, "m", None)
    if m_eff is None:
        raise ValueError("needs a curvature lower bound m")
    pts = exact_sample(model, n_samples, seed_or_rng)
    centered = pts - pts.mean(axis=0)
    emp = centered.T @ centered / (n_samples - 1)
    top = float(np.linalg.eigvalsh(emp)[-1])
    se = top * math.sqrt(2.0 / (n_samples - 1))
    control = m_override is not None
    return _result(
        "brascamp_lieb" + ("_overstated_m" if control else ""),
        top,
        1.0 / m_eff + 4.0 * se,
        0.0,
        "<=",
        negative_control=control,
        n_samples=int(n_samples),
        m=float(m_eff),
        standard_error=se,
    )


def check_wasserstein_contraction(
    pk_mean,
    pk_cov,
    a: float,
    pairs,
    claim: str = "generic",
    tolerance: float = 1e-10,
    negative_control: bool = False,
) -> CheckResult:
    """W2 expansion ratio of the backward kernel on Gaussian inputs.

    For each input pair (q, q~) the kernel's output laws are computed in
    closed form and the ratio W2(Bq, Bq~) / W2(q, q~) is compared with
    the claimed bound: "generic" uses beta/alpha from the kernel's own
    coefficients, "slc" claims a (valid when the stage marginal has unit
    curvature), "multi" claims 1/a (always valid). Identical inputs give
    a 0/0 ratio and are recorded as contractions by convention. Claiming
    "slc" for a kernel whose marginal is flatter than unit curvature is
    the intended negative control.
    """
    pk_mean = np.asarray(pk_mean, dtype=float)
    pk_cov = np.asarray(pk_cov, dtype=float)
    b2 = 1.0 - a * a
    beta = a / b2
    alpha = 1.0 / float(np.linalg.eigvalsh(pk_cov)[-1]) + a * a / b2
    if claim == "generic":
        bound = beta / alpha
    elif claim == "slc":
        bound = a
    elif claim == "multi":
        bound = 1.0 / a
    else:
        raise ValueError(f"unknown claim {claim!r}")

    ratios = []
    skipped = 0
    for q, q_alt in pairs:
        w_in = _w2_gaussian(q.mean, q.cov, q_alt.mean, q_alt.cov)
        if w_in < 1e-14:
            skipped += 1
            continue
        out = backward_pushforward(pk_mean, pk_cov, a, q)
        out_alt = backward_pushforward(pk_mean, pk_cov, a, q_alt)
        ratios.append(_w2_gaussian(out.mean, out.cov, out_alt.mean, out_alt.cov) / w_in)
    note = ""
    if skipped:
        note = f"{skipped} identical input pair(s) gave 0/0; counted as contractions"
    measured = max(ratios) if ratios else 0.0
    return _result(
        "wasserstein_contraction_" + claim,
        measured,
        bound,
        tolerance,
        "<=",
        negative_control=negative_control,
        note=note,
        a=float(a),
        n_pairs=len(ratios),
        skipped=skipped,
        generic_bound=float(beta / alpha),
    )


def check_kl_chain(
    pk_mean,
    pk_cov,
    a: float,
    q_next: GaussianLaw,
    p_next: GaussianLaw,
    noise_std: float = 0.0,
    tolerance: float = 1e-9,
    claimed_delta: float | None = None,
) -> CheckResult:
    """One-stage KL recursion KL(q_k || p_k) <= delta_k + KL(q_{k+1} || p_{k+1}).

    The approximate kernel is the exact backward kernel convolved with
    N(0, noise_std^2 I); its per-input KL defect is y-independent and
    closed-form, giving delta_k exactly. ``claimed_delta`` substitutes a
    smaller budget than the injected defect, turning the result into a
    negative control.
    """
    pk_mean = np.asarray(pk_mean, dtype=float)
    pk_cov = np.asarray(pk_cov, dtype=float)
    d = pk_mean.size
    s2 = noise_std * noise_std
    post_cov = np.linalg.inv(np.linalg.inv(pk_cov) + (a * a / (1.0 - a * a)) * np.eye(d))
    post_cov = 0.5 * (post_cov + post_cov.T)
    if s2 > 0.0:
        delta_true = _kl_gaussian(np.zeros(d), post_cov + s2 * np.eye(d), np.zeros(d), post_cov)
    else:
        delta_true = 0.0
    delta = delta_true if claimed_delta is None else claimed_delta

    q_out = backward_pushforward(pk_mean, pk_cov, a, q_next)
    p_out = backward_pushforward(pk_mean, pk_cov, a, p_next)
    lhs = _kl_gaussian(q_out.mean, q_out.cov + s2 * np.eye(d), p_out.mean, p_out.cov)
    rhs = delta + _kl_gaussian(q_next.mean, q_next.cov, p_next.mean, p_next.cov)
    control = claimed_delta is not None
    return _result(
        "kl_chain" + ("_withheld_budget" if control else ""),
        lhs,
        rhs,
        tolerance,
        "<=",
        negative_control=control,
        a=float(a),
        noise_std=float(noise_std),
        delta=float(delta),
        delta_true=float(delta_true),
    )


# -- distance estimators --------------------------------------------------------


def w2_exact_1d(samples_a, samples_b) -> DistanceEstimate:
    """Exact empirical W2 between equal-size 1-D samples.

    The optimal coupling of two 1-D empirical measures with n atoms each
    matches sorted order. The standard error is a delta-method heuristic
    from the spread of the squared sorted gaps.
    """
    xa = np.sort(np.ravel(np.asarray(samples_a, dtype=float)))
    xb = np.sort(np.ravel(np.asarray(samples_b, dtype=float)))
    if xa.size != xb.size or xa.size == 0:
        raise ValueError("need two nonempty samples of equal size")
    sq = (xa - xb) ** 2
    value = math.sqrt(float(sq.mean()))
    if value == 0.0 or sq.size < 2:
        se = 0.0
    else:
        se = float(sq.std(ddof=1)) / math.sqrt(sq.size) / (2.0 * value)
    return DistanceEstimate("W2-exact-1D", value, se)


def w2_sliced(samples_a, samples_b, n_proj: int = 128, seed_or_rng=0) -> DistanceEstimate:
    """Sliced W2: root-mean of squared exact 1-D W2 over random directions.

    Deterministic under the seed; in one dimension every unit direction
    is +-1, so the value coincides with w2_exact_1d.
    """
    xa = np.asarray(samples_a, dtype=float)
    xb = np.asarray(samples_b, dtype=float)
    if xa.ndim != 2 or xa.shape != xb.shape:
        raise ValueError("need two sample arrays of identical (n, d) shape")
    if n_proj < 1:
        raise ValueError("n_proj must be at least 1")
    rng = as_rng(seed_or_rng)
    dirs = rng.standard_normal((n_proj, xa.shape[1]))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    dirs /= norms
    proj_a = np.sort(xa @ dirs.T, axis=0)
    proj_b = np.sort(xb @ dirs.T, axis=0)
    per_proj = np.mean((proj_a - proj_b) ** 2, axis=0)
    value = math.sqrt(float(per_proj.mean()))
    if value == 0.0 or n_proj < 2:
        se = 0.0
    else:
        se = float(per_proj.std(ddof=1)) / math.sqrt(n_proj) / (2.0 * value)
    return DistanceEstimate("W2-sliced", value, se)


def w2_gaussian(mean_a, cov_a, mean_b, cov_b) -> DistanceEstimate:
    """Closed-form Gaussian W2 wrapped as a DistanceEstimate."""
    return DistanceEstimate(
        "W2-gaussian-closed-form", _w2_gaussian(mean_a, cov_a, mean_b, cov_b), None
    )


def kl_gaussian(mean_a, cov_a, mean_b, cov_b) -> DistanceEstimate:
    """Closed-form Gaussian KL wrapped as a DistanceEstimate."""
    return DistanceEstimate(
        "KL-gaussian-closed-form", _kl_gaussian(mean_a, cov_a, mean_b, cov_b), None
    )


# -- suites ---------------------------------------------------------------------


def default_suite(model=None, sigma_tar: float = 1.0, seed: int = 0) -> list[CheckResult]:
    """Positive checks for every verified inequality plus one negative
    control each. A healthy build passes every positive check while
    every control fails; ``suite_passed`` scores both expectations.
    """
    if model is None:
        model = bundled_bimodal_2d()
    results: list[CheckResult] = []

    results.append(check_tweedie_second_order(model, 0.8, 0.6, seed_or_rng=seed))

    narrow = GaussianMixture([1.0], [[0.0, 0.0]], [np.diag([1.0, 0.125])])
    results.append(
        check_spectral_propagation(narrow, 0.8, 0.6, m=1.0, M=8.0, seed_or_rng=seed)
    )
    quad = SlcQuadraticPlus(np.diag([1.3, 0.7]), 0.12, [2.0, 0.5])
    results.append(
        check_spectral_propagation(
            quad, 0.9, math.sqrt(1.0 - 0.81), m=quad.m, M=quad.M,
            n_probes=64, seed_or_rng=seed,
        )
    )

    multi_plan = plan_multi(model, sigma_tar, seed_or_rng=seed)
    for k in range(1, multi_plan.K + 1):
        results.append(
            check_forward_sandwich(multi_plan, model, k, n_probes=128, seed_or_rng=seed)
        )
        if k < multi_plan.K:
            results.append(
                check_backward_sandwich(multi_plan, model, k, n_probes=128, seed_or_rng=seed)
            )
    slc_plan = plan_slc(1.0, 8.0)
    for k in range(slc_plan.K + 1):
        results.append(
            check_forward_sandwich(slc_plan, narrow, k, n_probes=128, seed_or_rng=seed)
        )
        if k < slc_plan.K:
            results.append(
                check_backward_sandwich(slc_plan, narrow, k, n_probes=128, seed_or_rng=seed)
            )

    unit = GaussianMixture([1.0], [[0.0, 0.0]], [np.eye(2)])
    results.append(check_brascamp_lieb(quad, seed_or_rng=seed))
    results.append(check_brascamp_lieb(unit, m=1.0, seed_or_rng=seed))

    eye = np.eye(2)
    pairs = [
        (GaussianLaw([0.0, 0.0], eye), GaussianLaw([1.5, -0.5], eye)),
        (GaussianLaw([0.0, 0.0], eye), GaussianLaw([0.0, 0.0], 2.0 * eye)),
        (GaussianLaw([1.0, 1.0], eye), GaussianLaw([1.0, 1.0], eye)),
    ]
    results.append(
        check_wasserstein_contraction(np.zeros(2), eye, 0.9, pairs, claim="slc")
    )
    flat = 1e12 * eye
    results.append(
        check_wasserstein_contraction(np.zeros(2), flat, 0.9, pairs, claim="multi")
    )

    q_next = GaussianLaw([0.4, -0.3], 1.2 * eye)
    p_next = GaussianLaw([0.0, 0.0], eye)
    results.append(check_kl_chain(np.zeros(2), eye, 0.9, q_next, p_next))
    results.append(check_kl_chain(np.zeros(2), eye, 0.9, q_next, p_next, noise_std=0.3))

    # negative controls: one injected violation per inequality family
    results.append(
        check_tweedie_second_order(model, 0.8, 0.6, seed_or_rng=seed, a_perturb=0.05)
    )
    results.append(
        check_spectral_propagation(
            narrow, 0.8, 0.6, m=1.0, M=8.0, seed_or_rng=seed, window_shrink=0.9
        )
    )
    results.append(
        check_backward_sandwich(multi_plan, model, 1, n_probes=128, seed_or_rng=seed, a_shift=0.2)
    )
    results.append(check_brascamp_lieb(unit, m=1.0, seed_or_rng=seed, m_override=2.0))
    results.append(
        check_wasserstein_contraction(
            np.zeros(2), flat, 0.9, pairs, claim="slc", negative_control=True
        )
    )
    # q = p leaves no contraction slack to absorb the withheld defect
    results.append(
        check_kl_chain(
            np.zeros(2), eye, 0.9, p_next, p_next, noise_std=0.3, claimed_delta=0.0
        )
    )
    return results


def suite_passed(results) -> bool:
    """True when positives pass and negative controls fail."""
    return all(r.passed != r.negative_control for r in results)


def write_report(results, path) -> None:
    """JSON report: per-check records plus the suite verdict."""
    payload = {
        "passed": suite_passed(results),
        "n_checks": len(results),
        "checks": [r.to_dict() for r in results],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
