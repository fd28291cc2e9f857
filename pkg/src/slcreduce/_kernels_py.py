"""Numpy implementations of the hot chain-update kernels.

Each block function advances n parallel chains through a block of steps
using pre-drawn randomness: ``normals`` of shape (steps, n, d) and, for
the accept step, ``logu`` of shape (steps, n). Pre-drawing fixes the
stream layout, so the compiled twin in _kernels_cy consumes identical
randomness and produces identical trajectories up to roundoff.

The packed target is a Gaussian mixture plus a per-chain quadratic
tether:

  log p_i(u) = logsumexp_c(log_const_c - (u - m_c)' P_c (u - m_c) / 2)
               - tau ||u||^2 / 2 + lin_i . u,

which covers every mixture-backed marginal and backward conditional in
the backward pass (the tether's y-dependent constant cancels from
accept ratios).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "packed_eval",
    "mala_block",
    "ula_block",
    "mala_block_packed",
    "ula_block_packed",
]


def packed_eval(means, precs, log_consts, tau, lin):
    """Fused log-density and score closure for the packed target."""

    def eval_fn(x: np.ndarray):
        diffs = x[:, None, :] - means  # (n, c, d)
        pd = np.einsum("cij,ncj->nci", precs, diffs)
        quad = np.einsum("nci,nci->nc", diffs, pd)
        comp = log_consts - 0.5 * quad  # (n, c)
        peak = comp.max(axis=1)
        # points past the floating-point range get logp = -inf, nan score
        safe = np.where(np.isfinite(peak), peak, 0.0)
        w = np.exp(comp - safe[:, None])
        z = w.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.log(z) + peak
            resp = w / z[:, None]
        score = -np.einsum("nc,nci->ni", resp, pd)
        if tau != 0.0:
            logp = logp - 0.5 * tau * np.einsum("ni,ni->n", x, x)
            score = score - tau * x
        if lin is not None:
            logp = logp + np.einsum("ni,ni->n", lin, x)
            score = score + lin
        return logp, score

    return eval_fn


def mala_block(eval_fn, x, logp, score, h, normals, logu) -> int:
    """Advance chains through one Metropolis-adjusted block, in place.

    ``logp`` and ``score`` must hold eval_fn(x) on entry and do on exit.
    Returns the number of accepted proposals. One eval per step.
    """
    root = math.sqrt(2.0 * h)
    inv4h = 1.0 / (4.0 * h)
    accepted = 0
    for t in range(normals.shape[0]):
        prop = x + h * score + root * normals[t]
        lp, sc = eval_fn(prop)
        fwd = prop - x - h * score
        bwd = x - prop - h * sc
        log_alpha = lp - logp + (
            np.einsum("ni,ni->n", fwd, fwd) - np.einsum("ni,ni->n", bwd, bwd)
        ) * inv4h
        acc = logu[t] < log_alpha
        x[acc] = prop[acc]
        logp[acc] = lp[acc]
        score[acc] = sc[acc]
        accepted += int(np.count_nonzero(acc))
    return accepted


def ula_block(eval_fn, x, h, normals) -> None:
    """Advance chains through one unadjusted block, in place.

    Evaluates the score at the current point each step (one eval per
    step); no accept decision, so no logu stream is consumed.
    """
    root = math.sqrt(2.0 * h)
    for t in range(normals.shape[0]):
        _, sc = eval_fn(x)
        x += h * sc + root * normals[t]


def mala_block_packed(
    means, precs, log_consts, tau, lin, x, logp, score, h, normals, logu
) -> int:
    return mala_block(
        packed_eval(means, precs, log_consts, tau, lin), x, logp, score, h, normals, logu
    )


def ula_block_packed(means, precs, log_consts, tau, lin, x, h, normals) -> None:
    ula_block(packed_eval(means, precs, log_consts, tau, lin), x, h, normals)
