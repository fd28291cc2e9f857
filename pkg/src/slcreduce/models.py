"""Score models: analytic densities with exact scores and curvature.

Every model in this module exposes the same small surface:

  log_density(x)   log p(x), possibly up to an additive constant
  score(x)         grad log p(x)
  hessian(x)       -hess log p(x), the curvature of the negative log density
  exact_sample(n)  independent draws where an exact sampler exists

All evaluation methods are batched: ``x`` may have any leading shape as
long as the trailing axis has length ``dim``.

Noising convention
------------------
For a base variable U with density p_U, the annealed (noised) variable is

  V = a U + b W,   W ~ N(0, I),  a in (0, 1],  b >= 0.

For Gaussian mixture bases the annealed law is again a mixture with
component means ``a mu_i`` and covariances ``a^2 Sigma_i + b^2 I``, so all
its quantities are closed form. For separable perturbed-quadratic bases
the annealed score is recovered from the posterior mean through

  -grad log p_V(v) = (v - a E[U | V = v]) / b^2,

with the posterior mean evaluated by one-dimensional Gauss-Hermite
quadrature per coordinate.

A backward conditional tethers U to an observed v:

  log p(u | v) = log p_U(u) - ||a u - v||^2 / (2 b^2) + const,

so its score is ``score_U(u) - (a / b^2)(a u - v)`` and its curvature is
``hessian_U(u) + (a^2 / b^2) I``, with ``b^2 = 1 - a^2`` on the
variance-preserving trajectories used by the planner.
"""

from __future__ import annotations

import json
import math

import numpy as np

__all__ = [
    "GaussianMixture",
    "SlcQuadraticPlus",
    "AnnealedView",
    "BackwardConditional",
    "anneal",
    "backward_conditional",
    "posterior_moments",
    "log_density",
    "score",
    "hessian",
    "exact_sample",
    "log_density_and_score",
    "model_mean",
    "model_cov",
    "model_to_dict",
    "model_from_dict",
    "load_model",
    "dump_model",
    "bundled_bimodal_2d",
    "bundled_three_mode_2d",
    "as_rng",
]

_WEIGHT_TOL = 1e-12
_GH_ORDER = 64


def as_rng(seed_or_rng) -> np.random.Generator:
    """Return a Generator from a seed, a SeedSequence, or a Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    if isinstance(seed_or_rng, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed_or_rng))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_or_rng)))


def _logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def _check_batch(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != dim:
        raise ValueError(f"expected trailing axis of length {dim}, got shape {x.shape}")
    return x


class GaussianMixture:
    """Finite Gaussian mixture with closed-form score and curvature.

    Parameters
    ----------
    weights : array_like, shape (c,)
        Positive component weights summing to one (tolerance 1e-12).
    means : array_like, shape (c, d)
    covs : array_like, shape (c, d, d)
        Symmetric positive definite component covariances.
    """

    def __init__(self, weights, means, covs):
        weights = np.asarray(weights, dtype=float)
        means = np.asarray(means, dtype=float)
        covs = np.asarray(covs, dtype=float)
        if weights.ndim != 1 or weights.size == 0:
            raise ValueError("weights must be a non-empty 1-d array")
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1 within {_WEIGHT_TOL}")
        if means.ndim != 2 or means.shape[0] != weights.size:
            raise ValueError("means must have shape (n_components, dim)")
        d = means.shape[1]
        if covs.shape != (weights.size, d, d):
            raise ValueError("covs must have shape (n_components, dim, dim)")
        if not np.allclose(covs, np.swapaxes(covs, -1, -2), atol=1e-10):
            raise ValueError("covariances must be symmetric")
        try:
            chols = np.linalg.cholesky(covs)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariances must be positive definite") from exc

        self.weights = weights
        self.means = means
        self.covs = covs
        self.dim = d
        self.n_components = weights.size
        self._chols = chols
        self._precisions = np.linalg.inv(covs)
        # component log-normalizers: -d/2 log(2 pi) - sum log diag(chol)
        logdet_half = np.sum(np.log(np.diagonal(chols, axis1=-2, axis2=-1)), axis=-1)
        self._log_norm = -0.5 * d * math.log(2.0 * math.pi) - logdet_half
        self._log_weights = np.log(weights)

    # -- densities ---------------------------------------------------------

    def _component_log_density(self, x: np.ndarray) -> np.ndarray:
        diffs = x[..., None, :] - self.means  # (..., c, d)
        quad = np.einsum("...ci,cij,...cj->...c", diffs, self._precisions, diffs)
        return self._log_weights + self._log_norm - 0.5 * quad

    def log_density(self, x) -> np.ndarray:
        x = _check_batch(x, self.dim)
        return _logsumexp(self._component_log_density(x), axis=-1)

    def score(self, x) -> np.ndarray:
        x = _check_batch(x, self.dim)
        comp = self._component_log_density(x)
        resp = np.exp(comp - _logsumexp(comp, axis=-1)[..., None])
        diffs = x[..., None, :] - self.means
        comp_score = -np.einsum("cij,...cj->...ci", self._precisions, diffs)
        return np.einsum("...c,...ci->...i", resp, comp_score)

    def hessian(self, x) -> np.ndarray:
        """Curvature -hess log p. Mixtures are not log-concave, so the
        result is not positive definite in general."""
        x = _check_batch(x, self.dim)
        comp = self._component_log_density(x)
        resp = np.exp(comp - _logsumexp(comp, axis=-1)[..., None])
        diffs = x[..., None, :] - self.means
        comp_score = -np.einsum("cij,...cj->...ci", self._precisions, diffs)
        mean_score = np.einsum("...c,...ci->...i", resp, comp_score)
        avg_prec = np.einsum("...c,cij->...ij", resp, self._precisions)
        second = np.einsum("...c,...ci,...cj->...ij", resp, comp_score, comp_score)
        outer = mean_score[..., :, None] * mean_score[..., None, :]
        return avg_prec - second + outer

    def log_density_and_score(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Both quantities from one pass over the components."""
        x = _check_batch(x, self.dim)
        comp = self._component_log_density(x)
        logp = _logsumexp(comp, axis=-1)
        resp = np.exp(comp - logp[..., None])
        diffs = x[..., None, :] - self.means
        comp_score = -np.einsum("cij,...cj->...ci", self._precisions, diffs)
        return logp, np.einsum("...c,...ci->...i", resp, comp_score)

    # -- moments and sampling ----------------------------------------------

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def cov(self) -> np.ndarray:
        mu = self.mean()
        centered = self.means - mu
        between = np.einsum("c,ci,cj->ij", self.weights, centered, centered)
        within = np.einsum("c,cij->ij", self.weights, self.covs)
        return within + between

    def exact_sample(self, n: int, seed_or_rng=0) -> np.ndarray:
        rng = as_rng(seed_or_rng)
        idx = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[idx] + np.einsum("nij,nj->ni", self._chols[idx], z)

    # -- transforms ----------------------------------------------------------

    def scaled(self, c: float) -> "GaussianMixture":
        """Law of c X for X distributed as this mixture."""
        if c <= 0:
            raise ValueError("scale must be positive")
        return GaussianMixture(self.weights, c * self.means, c * c * self.covs)

    def annealed(self, a: float, b: float) -> "GaussianMixture":
        """Law of a X + b W with W ~ N(0, I)."""
        covs = a * a * self.covs + (b * b) * np.eye(self.dim)
        return GaussianMixture(self.weights, a * self.means, covs)

    def posterior_moments(self, a: float, b: float, v) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of U given a U + b W = v.

        Returns arrays of shape (..., d) and (..., d, d) for v of shape
        (..., d). The posterior is itself a mixture; its covariance
        includes the between-component spread of posterior means.
        """
        v = _check_batch(v, self.dim)
        if b == 0.0:
            mean = v / a
            cov = np.zeros(v.shape + (self.dim,))
            return mean, cov
        eye = np.eye(self.dim)
        view_covs = a * a * self.covs + b * b * eye  # (c, d, d)
        gains = a * np.linalg.solve(view_covs, self.covs).swapaxes(-1, -2)  # Sigma a S^-1
        post_covs = self.covs - a * np.einsum("cij,cjk->cik", gains, self.covs)
        # responsibilities under the annealed mixture
        view = GaussianMixture(self.weights, a * self.means, view_covs)
        comp = view._component_log_density(v)
        resp = np.exp(comp - _logsumexp(comp, axis=-1)[..., None])  # (..., c)
        innov = v[..., None, :] - a * self.means  # (..., c, d)
        post_means = self.means + np.einsum("cij,...cj->...ci", gains, innov)
        mean = np.einsum("...c,...ci->...i", resp, post_means)
        centered = post_means - mean[..., None, :]
        spread = np.einsum("...c,...ci,...cj->...ij", resp, centered, centered)
        within = np.einsum("...c,cij->...ij", resp, post_covs)
        return mean, within + spread


class SlcQuadraticPlus:
    """Quadratic log-density with a bounded cosine perturbation.

    log p(x) = -x' A x / 2 + amplitude * sum_i cos(frequency_i * x_i),
    up to an unknown normalizing constant. The curvature is sandwiched
    between ``m = lambda_min(A) - amplitude * max(frequency^2)`` (required
    positive) and ``M = lambda_max(A) + amplitude * max(frequency^2)``.
    """

    def __init__(self, precision, amplitude, frequency):
        precision = np.asarray(precision, dtype=float)
        frequency = np.asarray(frequency, dtype=float)
        amplitude = float(amplitude)
        if precision.ndim != 2 or precision.shape[0] != precision.shape[1]:
            raise ValueError("precision must be a square matrix")
        if not np.allclose(precision, precision.T, atol=1e-10):
            raise ValueError("precision must be symmetric")
        d = precision.shape[0]
        if frequency.shape != (d,):
            raise ValueError("frequency must be a vector matching the precision size")
        if amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        eigs = np.linalg.eigvalsh(precision)
        if eigs[0] <= 0:
            raise ValueError("precision must be positive definite")
        wobble = amplitude * float(np.max(frequency**2)) if d else 0.0
        m = float(eigs[0]) - wobble
        if m <= 0:
            raise ValueError(
                f"curvature lower bound {m} is not positive; "
                "reduce amplitude or frequency"
            )
        self.precision = precision
        self.amplitude = amplitude
        self.frequency = frequency
        self.dim = d
        self.m = m
        self.M = float(eigs[-1]) + wobble
        self._chol_prec = np.linalg.cholesky(precision)

    def is_diagonal(self) -> bool:
        off = self.precision - np.diag(np.diag(self.precision))
        return bool(np.all(off == 0.0))

    def log_density(self, x) -> np.ndarray:
        """Unnormalized: the cosine perturbation has no closed-form mass."""
        x = _check_batch(x, self.dim)
        quad = np.einsum("...i,ij,...j->...", x, self.precision, x)
        bump = self.amplitude * np.sum(np.cos(self.frequency * x), axis=-1)
        return -0.5 * quad + bump

    def score(self, x) -> np.ndarray:
        x = _check_batch(x, self.dim)
        return -x @ self.precision - self.amplitude * self.frequency * np.sin(
            self.frequency * x
        )

    def hessian(self, x) -> np.ndarray:
        x = _check_batch(x, self.dim)
        wobble = self.amplitude * self.frequency**2 * np.cos(self.frequency * x)
        out = np.broadcast_to(self.precision, x.shape[:-1] + (self.dim, self.dim)).copy()
        idx = np.arange(self.dim)
        out[..., idx, idx] += wobble
        return out

    def mean(self) -> np.ndarray:
        # the density is even (cosines are even), so the mean vanishes
        return np.zeros(self.dim)

    def exact_sample(self, n: int, seed_or_rng=0) -> np.ndarray:
        """Rejection sampling from the Gaussian N(0, A^-1) envelope.

        log p - log proposal = amplitude * sum cos(f x), bounded above by
        amplitude * d, so accepting with probability
        exp(amplitude * (sum cos(f x) - d)) is exact.
        """
        rng = as_rng(seed_or_rng)
        out = np.empty((n, self.dim))
        have = 0
        bound = self.amplitude * self.dim
        while have < n:
            want = max(n - have, 64)
            batch = int(want * 2.2) + 16
            z = rng.standard_normal((batch, self.dim))
            x = np.linalg.solve(self._chol_prec.T, z.T).T
            log_accept = self.amplitude * np.sum(np.cos(self.frequency * x), axis=-1) - bound
            keep = np.log(rng.uniform(size=batch)) < log_accept
            got = x[keep]
            take = min(n - have, got.shape[0])
            out[have : have + take] = got[:take]
            have += take
        return out

    def scaled(self, c: float) -> "SlcQuadraticPlus":
        """Law of c X: precision A / c^2, frequency f / c, same amplitude."""
        if c <= 0:
            raise ValueError("scale must be positive")
        return SlcQuadraticPlus(self.precision / (c * c), self.amplitude, self.frequency / c)


class AnnealedView(object):
    """Annealed law of a separable perturbed-quadratic base, V = a U + b W.

    Scores come from the posterior-mean identity and one-dimensional
    Gauss-Hermite quadrature (order 64) per coordinate; the curvature
    comes from the posterior-variance identity

      hessian(v) = (1/b^2) (I - (a^2/b^2) cov(U | V = v)),

    which is diagonal here because the base factorizes over coordinates.
    """

    def __init__(self, base: SlcQuadraticPlus, a: float, b: float):
        if not isinstance(base, SlcQuadraticPlus):
            raise ValueError("AnnealedView expects a SlcQuadraticPlus base")
        if not base.is_diagonal():
            raise ValueError(
                "annealing a perturbed quadratic requires a diagonal precision "
                "(the quadrature factorizes per coordinate)"
            )
        if not (0.0 < a <= 1.0):
            raise ValueError("a must lie in (0, 1]")
        if b <= 0.0:
            raise ValueError("AnnealedView requires b > 0; use anneal() for b = 0")
        self.base = base
        self.a = float(a)
        self.b = float(b)
        self.dim = base.dim
        nodes, weights = np.polynomial.hermite.hermgauss(_GH_ORDER)
        self._nodes = nodes
        self._log_gh_weights = np.log(weights)
        self._diag = np.diag(base.precision)

    def _coordinate_tables(self, v: np.ndarray):
        """Per-coordinate quadrature tables at v of shape (..., d).

        Returns (log_terms, u_nodes): log-integrand values and base-space
        nodes, both of shape (..., d, order).
        """
        w = v[..., None] + math.sqrt(2.0) * self.b * self._nodes  # (..., d, q)
        u = w / self.a
        g = -0.5 * self._diag[:, None] * u * u + self.base.amplitude * np.cos(
            self.base.frequency[:, None] * u
        )
        return self._log_gh_weights + g, u

    def log_density(self, v) -> np.ndarray:
        """Unnormalized, consistent in v (all v-dependence is exact)."""
        v = _check_batch(v, self.dim)
        log_terms, _ = self._coordinate_tables(v)
        return np.sum(_logsumexp(log_terms, axis=-1), axis=-1)

    def posterior_moments(self, v) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of U given V = v (covariance is diagonal)."""
        v = _check_batch(v, self.dim)
        log_terms, u = self._coordinate_tables(v)
        log_z = _logsumexp(log_terms, axis=-1)
        p = np.exp(log_terms - log_z[..., None])
        mean = np.sum(p * u, axis=-1)
        var = np.sum(p * (u - mean[..., None]) ** 2, axis=-1)
        cov = np.zeros(v.shape + (self.dim,))
        idx = np.arange(self.dim)
        cov[..., idx, idx] = var
        return mean, cov

    def score(self, v) -> np.ndarray:
        v = _check_batch(v, self.dim)
        mean, _ = self.posterior_moments(v)
        return -(v - self.a * mean) / (self.b * self.b)

    def hessian(self, v) -> np.ndarray:
        v = _check_batch(v, self.dim)
        _, cov = self.posterior_moments(v)
        b2 = self.b * self.b
        eye = np.eye(self.dim)
        return (eye - (self.a * self.a / b2) * cov) / b2

    def log_density_and_score(self, v) -> tuple[np.ndarray, np.ndarray]:
        """Both quantities from one pass over the quadrature tables."""
        v = _check_batch(v, self.dim)
        log_terms, u = self._coordinate_tables(v)
        log_z = _logsumexp(log_terms, axis=-1)
        p = np.exp(log_terms - log_z[..., None])
        mean = np.sum(p * u, axis=-1)
        logp = np.sum(log_z, axis=-1)
        return logp, -(v - self.a * mean) / (self.b * self.b)

    def mean(self) -> np.ndarray:
        return np.zeros(self.dim)

    def exact_sample(self, n: int, seed_or_rng=0) -> np.ndarray:
        rng = as_rng(seed_or_rng)
        u = self.base.exact_sample(n, rng)
        return self.a * u + self.b * rng.standard_normal((n, self.dim))


class BackwardConditional:
    """Conditional of U given a U + b W = y on a variance-preserving step.

    ``marginal`` is the law of U, ``a`` the step factor (0 < a < 1), and
    ``b^2 = 1 - a^2``. No exact sampler exists; this is what the chain
    samplers are for.
    """

    def __init__(self, marginal, a: float, y):
        if not (0.0 < a < 1.0):
            raise ValueError("backward conditional requires 0 < a < 1")
        y = np.asarray(y, dtype=float)
        if y.shape != (marginal.dim,):
            raise ValueError("y must be a vector matching the marginal dimension")
        self.marginal = marginal
        self.a = float(a)
        self.y = y
        self.dim = marginal.dim
        self._tether = a * a / (1.0 - a * a)

    def log_density(self, u) -> np.ndarray:
        u = _check_batch(u, self.dim)
        b2 = 1.0 - self.a * self.a
        resid = self.a * u - self.y
        return self.marginal.log_density(u) - 0.5 * np.sum(resid * resid, axis=-1) / b2

    def score(self, u) -> np.ndarray:
        u = _check_batch(u, self.dim)
        b2 = 1.0 - self.a * self.a
        return self.marginal.score(u) - (self.a / b2) * (self.a * u - self.y)

    def hessian(self, u) -> np.ndarray:
        u = _check_batch(u, self.dim)
        out = self.marginal.hessian(u).copy()
        idx = np.arange(self.dim)
        out[..., idx, idx] += self._tether
        return out

    def log_density_and_score(self, u) -> tuple[np.ndarray, np.ndarray]:
        u = _check_batch(u, self.dim)
        logp, sc = log_density_and_score(self.marginal, u)
        b2 = 1.0 - self.a * self.a
        resid = self.a * u - self.y
        logp = logp - 0.5 * np.sum(resid * resid, axis=-1) / b2
        return logp, sc - (self.a / b2) * resid

    def exact_sample(self, n: int, seed_or_rng=0):
        raise ValueError("backward conditionals have no exact sampler")


# -- module-level operations --------------------------------------------------


def log_density(model, x) -> np.ndarray:
    return model.log_density(x)


def score(model, x) -> np.ndarray:
    return model.score(x)


def hessian(model, x) -> np.ndarray:
    return model.hessian(x)


def log_density_and_score(model, x) -> tuple[np.ndarray, np.ndarray]:
    """Fused evaluation; one chain-sampler oracle call."""
    fused = getattr(model, "log_density_and_score", None)
    if fused is not None:
        return fused(x)
    return model.log_density(x), model.score(x)


def exact_sample(model, n: int, seed_or_rng=0) -> np.ndarray:
    return model.exact_sample(n, seed_or_rng)


def anneal(model, a: float, b: float):
    """Law of a X + b W for X distributed as ``model`` and W ~ N(0, I).

    Returns a closed-form mixture for mixture bases, a scaled base when
    b = 0, and a quadrature-backed view for perturbed-quadratic bases.
    Annealing an annealed view composes the coefficients exactly:
    anneal(anneal(p, a1, b1), a2, b2) equals
    anneal(p, a1 a2, sqrt(a2^2 b1^2 + b2^2)).
    """
    a = float(a)
    b = float(b)
    if not (0.0 < a <= 1.0):
        raise ValueError("a must lie in (0, 1]")
    if b < 0.0:
        raise ValueError("b must be nonnegative")
    if isinstance(model, GaussianMixture):
        return model.annealed(a, b) if b > 0.0 else (model if a == 1.0 else model.scaled(a))
    if isinstance(model, SlcQuadraticPlus):
        if b == 0.0:
            return model if a == 1.0 else model.scaled(a)
        return AnnealedView(model, a, b)
    if isinstance(model, AnnealedView):
        return anneal(model.base, model.a * a, math.hypot(a * model.b, b))
    raise ValueError(f"cannot anneal model of type {type(model).__name__}")


def backward_conditional(marginal, a: float, y) -> BackwardConditional:
    return BackwardConditional(marginal, a, y)


def posterior_moments(model, a: float, b: float, v) -> tuple[np.ndarray, np.ndarray]:
    """Moments of U given a U + b W = v under the base ``model``."""
    a = float(a)
    b = float(b)
    if not (0.0 < a <= 1.0):
        raise ValueError("a must lie in (0, 1]")
    if b < 0.0:
        raise ValueError("b must be nonnegative")
    if isinstance(model, GaussianMixture):
        return model.posterior_moments(a, b, v)
    if isinstance(model, SlcQuadraticPlus):
        if b == 0.0:
            v = _check_batch(v, model.dim)
            return v / a, np.zeros(v.shape + (model.dim,))
        return AnnealedView(model, a, b).posterior_moments(v)
    raise ValueError(f"posterior moments not available for {type(model).__name__}")


def model_mean(model) -> np.ndarray:
    return model.mean()


def model_cov(model, n: int = 512, seed_or_rng=0) -> np.ndarray:
    """Covariance of the model: closed form for mixtures, Monte Carlo else."""
    if isinstance(model, GaussianMixture):
        return model.cov()
    draws = model.exact_sample(n, seed_or_rng)
    return np.cov(draws.T).reshape(model.dim, model.dim)


# -- serialization -------------------------------------------------------------


def model_to_dict(model) -> dict:
    if isinstance(model, GaussianMixture):
        return {
            "type": "gaussian_mixture",
            "weights": model.weights.tolist(),
            "means": model.means.tolist(),
            "covs": model.covs.tolist(),
        }
    if isinstance(model, SlcQuadraticPlus):
        return {
            "type": "slc_quadratic_plus",
            "precision": model.precision.tolist(),
            "amplitude": model.amplitude,
            "frequency": model.frequency.tolist(),
        }
    raise ValueError(f"cannot serialize model of type {type(model).__name__}")


def model_from_dict(payload: dict):
    if not isinstance(payload, dict) or "type" not in payload:
        raise ValueError("model payload must be an object with a 'type' field")
    kind = payload["type"]
    if kind == "gaussian_mixture":
        missing = {"weights", "means", "covs"} - set(payload)
        if missing:
            raise ValueError(f"gaussian_mixture payload missing {sorted(missing)}")
        return GaussianMixture(payload["weights"], payload["means"], payload["covs"])
    if kind == "slc_quadratic_plus":
        missing = {"precision", "amplitude", "frequency"} - set(payload)
        if missing:
            raise ValueError(f"slc_quadratic_plus payload missing {sorted(missing)}")
        return SlcQuadraticPlus(payload["precision"], payload["amplitude"], payload["frequency"])
    raise ValueError(f"unknown model type {kind!r}")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def dump_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


# -- bundled test densities ----------------------------------------------------


def bundled_bimodal_2d() -> GaussianMixture:
    """Symmetric two-mode planar mixture used by the diagnostics suite."""
    eye = 0.25 * np.eye(2)
    return GaussianMixture(
        weights=[0.5, 0.5],
        means=[[-2.0, 0.0], [2.0, 0.0]],
        covs=[eye, eye],
    )


def bundled_three_mode_2d() -> GaussianMixture:
    """Asymmetric three-mode planar mixture used by the figure pipeline."""
    return GaussianMixture(
        weights=[0.45, 0.30, 0.25],
        means=[[-2.2, -1.2], [2.0, -1.0], [0.1, 2.1]],
        covs=[
            [[0.36, 0.10], [0.10, 0.24]],
            [[0.20, -0.06], [-0.06, 0.30]],
            [[0.28, 0.00], [0.00, 0.16]],
        ],
    )
