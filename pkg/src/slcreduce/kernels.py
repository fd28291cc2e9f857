"""Backend selection for the hot chain-update kernels.

Two interchangeable implementations exist: a numpy one (_kernels_py)
and an optional compiled one (_kernels_cy). Both consume identical
pre-drawn randomness, so a fixed seed gives bit-identical results
within a backend and matching trajectories across backends up to
floating-point roundoff.

Selection order: explicit argument, then the SLCREDUCE_BACKEND
environment variable ("auto", "compiled", "python"), then "auto",
which prefers the compiled kernels when the extension imported.

The compiled path covers packed Gaussian-mixture targets, which is
every mixture-backed marginal and backward conditional. Other targets
(quadrature-backed views) always run through the numpy block functions
via a fused-evaluation closure.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from slcreduce import _kernels_py
from slcreduce.models import BackwardConditional, GaussianMixture

try:
    from slcreduce import _kernels_cy
except ImportError:
    _kernels_cy = None

__all__ = [
    "PackedMixtureTarget",
    "pack_mixture",
    "try_pack",
    "available_backends",
    "get_backend",
    "Backend",
]


@dataclass(frozen=True)
class PackedMixtureTarget:
    """Gaussian mixture plus per-chain quadratic tether, as flat arrays.

    log p_i(u) = mixture(u) - tau ||u||^2 / 2 + lin[i] . u  (+ const_i).
    ``lin`` has one row per chain; a zero row means no tether pull.
    """

    means: np.ndarray  # (c, d)
    precs: np.ndarray  # (c, d, d)
    log_consts: np.ndarray  # (c,)
    tau: float
    lin: np.ndarray  # (n, d)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_chains(self) -> int:
        return self.lin.shape[0]


def pack_mixture(
    mixture: GaussianMixture, n_chains: int, tau: float = 0.0, lin: np.ndarray | None = None
) -> PackedMixtureTarget:
    """Flatten a mixture (optionally tethered) for the block kernels."""
    chols = np.linalg.cholesky(mixture.covs)
    logdet_half = np.sum(np.log(np.diagonal(chols, axis1=-2, axis2=-1)), axis=-1)
    log_consts = (
        np.log(mixture.weights)
        - 0.5 * mixture.dim * math.log(2.0 * math.pi)
        - logdet_half
    )
    if lin is None:
        lin = np.zeros((n_chains, mixture.dim))
    else:
        lin = np.ascontiguousarray(lin, dtype=float)
        if lin.shape != (n_chains, mixture.dim):
            raise ValueError("lin must have shape (n_chains, dim)")
    return PackedMixtureTarget(
        means=np.ascontiguousarray(mixture.means),
        precs=np.ascontiguousarray(np.linalg.inv(mixture.covs)),
        log_consts=np.ascontiguousarray(log_consts),
        tau=float(tau),
        lin=lin,
    )


def try_pack(model, n_chains: int) -> PackedMixtureTarget | None:
    """Pack a model if the kernels support it, else None.

    Supported: plain mixtures and backward conditionals over mixtures.
    A backward conditional's single tether point is broadcast to all
    chains; the pipeline builds per-chain tethers itself.
    """
    if isinstance(model, GaussianMixture):
        return pack_mixture(model, n_chains)
    if isinstance(model, BackwardConditional) and isinstance(
        model.marginal, GaussianMixture
    ):
        b2 = 1.0 - model.a * model.a
        lin = np.broadcast_to(
            (model.a / b2) * model.y, (n_chains, model.dim)
        ).copy()
        return pack_mixture(model.marginal, n_chains, tau=model.a * model.a / b2, lin=lin)
    return None


@dataclass(frozen=True)
class Backend:
    """Block-kernel pair bound to one implementation."""

    name: str
    compiled: bool

    def mala_block(self, pack: PackedMixtureTarget, x, logp, score, h, normals, logu) -> int:
        impl = _kernels_cy if self.compiled else _kernels_py
        return impl.mala_block_packed(
            pack.means, pack.precs, pack.log_consts, pack.tau, pack.lin,
            x, logp, score, h, normals, logu,
        )

    def ula_block(self, pack: PackedMixtureTarget, x, h, normals) -> None:
        impl = _kernels_cy if self.compiled else _kernels_py
        impl.ula_block_packed(
            pack.means, pack.precs, pack.log_consts, pack.tau, pack.lin, x, h, normals
        )

    def packed_eval(self, pack: PackedMixtureTarget):
        return _kernels_py.packed_eval(
            pack.means, pack.precs, pack.log_consts, pack.tau, pack.lin
        )


def available_backends() -> list[str]:
    names = ["python"]
    if _kernels_cy is not None:
        names.insert(0, "compiled")
    return names


def get_backend(name: str | None = None) -> Backend:
    choice = name or os.environ.get("SLCREDUCE_BACKEND", "auto")
    if choice not in ("auto", "compiled", "python"):
        raise ValueError(f"unknown backend {choice!r}")
    if choice == "auto":
        choice = "compiled" if _kernels_cy is not None else "python"
    if choice == "compiled" and _kernels_cy is None:
        raise ValueError("compiled kernels are not available in this install")
    return Backend(name=choice, compiled=choice == "compiled")
