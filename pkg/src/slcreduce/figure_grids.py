"""CSV grid emission for the five-stage illustration of the scheme.

The stages anneal a 2-D base law along the fixed signal sequence
THETA_SEQUENCE; each stage contributes a log-density contour grid and a
score quiver grid, and three forward trajectory draws provide the
conditioning points for the backward-conditional grids between
consecutive stages. Everything is plain CSV so any plotting tool can
render it.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from slcreduce.models import (
    anneal,
    backward_conditional,
    exact_sample,
    log_density,
    model_cov,
    model_mean,
    score,
)

__all__ = [
    "THETA_SEQUENCE",
    "N_REALIZATIONS",
    "grid_axis",
    "stage_laws",
    "realization_trajectories",
    "write_figure_grids",
]

THETA_SEQUENCE = (1.0, 0.93, 0.85, 0.78, 0.60)
N_REALIZATIONS = 3


def grid_axis(model, resolution: int) -> np.ndarray:
    """Shared axis for every stage grid, exactly antisymmetric about 0.

    The extent covers the base law's spread (the annealed stages only
    shrink toward the standard normal, so the base is the widest). The
    antisymmetrization keeps grids of even densities even to roundoff.
    """
    if resolution < 8:
        raise ValueError("grid resolution must be at least 8")
    half = float(np.max(np.abs(model_mean(model)))) + 3.5 * math.sqrt(
        float(np.linalg.eigvalsh(model_cov(model))[-1])
    )
    xs = np.linspace(-half, half, resolution)
    return 0.5 * (xs - xs[::-1])


def _grid_points(xs: np.ndarray) -> np.ndarray:
    gx, gy = np.meshgrid(xs, xs)
    return np.column_stack([gx.ravel(), gy.ravel()])


def stage_laws(model) -> list:
    """The base law followed by its four annealed stages."""
    if model.dim != 2:
        raise ValueError("figure grids need a 2-D model")
    laws = [model]
    for theta in THETA_SEQUENCE[1:]:
        laws.append(anneal(model, theta, math.sqrt(1.0 - theta * theta)))
    return laws


def realization_trajectories(model, seed: int, n_realizations: int = N_REALIZATIONS):
    """Forward chain draws Y_{j+1} = a_j Y_j + b_j W_j, shape (stages, n, 2)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    traj = [exact_sample(model, n_realizations, rng)]
    for theta_from, theta_to in zip(THETA_SEQUENCE, THETA_SEQUENCE[1:]):
        a = theta_to / theta_from
        b = math.sqrt(1.0 - a * a)
        traj.append(a * traj[-1] + b * rng.standard_normal((n_realizations, 2)))
    return np.stack(traj)


def _write_csv(path: str, header: str, columns) -> None:
    np.savetxt(
        path,
        np.column_stack(columns),
        fmt="%.17g",
        delimiter=",",
        header=header,
        comments="",
    )


def write_figure_grids(model, out_dir, seed: int = 0, resolution: int = 61) -> dict:
    """Emit every stage grid under ``out_dir`` and return a manifest.

    Files: one log-density contour and one score quiver CSV per stage,
    plus one backward-conditional contour per (realization, step).
    """
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    xs = grid_axis(model, resolution)
    pts = _grid_points(xs)
    laws = stage_laws(model)
    files = []

    for j, law in enumerate(laws):
        path = os.path.join(out_dir, f"marginal_stage_{j}.csv")
        _write_csv(path, "x,y,value", [pts[:, 0], pts[:, 1], log_density(law, pts)])
        files.append(path)
        sc = score(law, pts)
        path = os.path.join(out_dir, f"score_stage_{j}.csv")
        _write_csv(path, "x,y,dx,dy", [pts[:, 0], pts[:, 1], sc[:, 0], sc[:, 1]])
        files.append(path)

    traj = realization_trajectories(model, seed)
    for r in range(traj.shape[1]):
        for j in range(len(laws) - 1):
            a = THETA_SEQUENCE[j + 1] / THETA_SEQUENCE[j]
            cond = backward_conditional(laws[j], a, traj[j + 1, r])
            path = os.path.join(out_dir, f"conditional_real{r}_step{j}.csv")
            _write_csv(path, "x,y,value", [pts[:, 0], pts[:, 1], log_density(cond, pts)])
            files.append(path)

    manifest = {
        "theta": list(THETA_SEQUENCE),
        "resolution": int(resolution),
        "seed": int(seed),
        "n_realizations": int(traj.shape[1]),
        "files": [os.path.basename(f) for f in files],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
