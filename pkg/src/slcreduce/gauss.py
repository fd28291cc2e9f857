"""Closed-form Gaussian arithmetic for exact chain bookkeeping.

On a Gaussian stage marginal the backward conditional is Gaussian with a
y-independent covariance, so pushing a Gaussian law through the backward
kernel stays Gaussian. That makes whole backward chains exactly
computable, which the error-propagation checks lean on.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "spd_sqrt",
    "w2_gaussian",
    "kl_gaussian",
    "GaussianLaw",
    "backward_pushforward",
]


def spd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root of a symmetric positive semidefinite matrix."""
    mat = np.asarray(mat, dtype=float)
    vals, vecs = np.linalg.eigh(mat)
    if vals[0] < -1e-10 * max(1.0, abs(vals[-1])):
        raise ValueError("matrix is not positive semidefinite")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


class GaussianLaw:
    """Mean and covariance pair with validation."""

    def __init__(self, mean, cov):
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must be a vector and cov a matching square matrix")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise ValueError("covariance must be symmetric")
        self.mean = mean
        self.cov = cov
        self.dim = mean.size


def w2_gaussian(mean1, cov1, mean2, cov2) -> float:
    """Quadratic Wasserstein distance between two Gaussians.

    W2^2 = ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S2^1/2 S1 S2^1/2)^1/2).
    """
    mean1 = np.asarray(mean1, dtype=float)
    mean2 = np.asarray(mean2, dtype=float)
    cov1 = np.asarray(cov1, dtype=float)
    cov2 = np.asarray(cov2, dtype=float)
    root2 = spd_sqrt(cov2)
    cross = spd_sqrt(root2 @ cov1 @ root2)
    gap = float(np.sum((mean1 - mean2) ** 2))
    gap += float(np.trace(cov1) + np.trace(cov2) - 2.0 * np.trace(cross))
    # roundoff can push a zero distance slightly negative
    return math.sqrt(max(gap, 0.0))


def kl_gaussian(mean1, cov1, mean2, cov2) -> float:
    """KL divergence KL(N(mean1, cov1) || N(mean2, cov2))."""
    mean1 = np.asarray(mean1, dtype=float)
    mean2 = np.asarray(mean2, dtype=float)
    cov1 = np.asarray(cov1, dtype=float)
    cov2 = np.asarray(cov2, dtype=float)
    d = mean1.size
    chol2 = np.linalg.cholesky(cov2)
    solved = np.linalg.solve(cov2, cov1)
    diff = mean2 - mean1
    maha = float(diff @ np.linalg.solve(cov2, diff))
    logdet2 = 2.0 * float(np.sum(np.log(np.diag(chol2))))
    sign1, logdet1 = np.linalg.slogdet(cov1)
    if sign1 <= 0:
        raise ValueError("cov1 must be positive definite")
    return 0.5 * (float(np.trace(solved)) + maha - d + logdet2 - float(logdet1))


def backward_pushforward(
    pk_mean, pk_cov, a: float, law: GaussianLaw
) -> GaussianLaw:
    """Law of the backward kernel output when the input is Gaussian.

    The stage marginal is N(pk_mean, pk_cov) and the step factor is a,
    with b^2 = 1 - a^2. The backward conditional given y is Gaussian
    with precision Lambda = pk_cov^-1 + (a^2 / b^2) I and mean affine in
    y, so feeding y ~ N(nu, S) through it yields

      mean = Lambda^-1 (pk_cov^-1 pk_mean + (a / b^2) nu)
      cov  = Lambda^-1 + C S C',   C = Lambda^-1 (a / b^2).
    """
    if not (0.0 < a < 1.0):
        raise ValueError("backward pushforward requires 0 < a < 1")
    pk_mean = np.asarray(pk_mean, dtype=float)
    pk_cov = np.asarray(pk_cov, dtype=float)
    d = pk_mean.size
    b2 = 1.0 - a * a
    prec = np.linalg.inv(pk_cov) + (a * a / b2) * np.eye(d)
    post_cov = np.linalg.inv(prec)
    post_cov = 0.5 * (post_cov + post_cov.T)
    gain = (a / b2) * post_cov
    mean = post_cov @ np.linalg.solve(pk_cov, pk_mean) + gain @ law.mean
    cov = post_cov + gain @ law.cov @ gain.T
    return GaussianLaw(mean, 0.5 * (cov + cov.T))
