"""Command-line front end: plan, sample, verify, figure1.

Every command is a thin shell over the library: it loads one JSON
experiment config, applies the flag overrides, runs, and writes its
artifacts under the output directory. Reruns with the same config and
seed produce byte-identical outputs (summaries therefore omit wall
times). Exit codes: 0 success, 1 check failure, 2 config error,
3 sampler divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from slcreduce.diagnostics import (
    check_spectral_propagation,
    default_suite,
    suite_passed,
    write_report,
)
from slcreduce.figure_grids import write_figure_grids
from slcreduce.models import (
    GaussianMixture,
    bundled_bimodal_2d,
    bundled_three_mode_2d,
    model_from_dict,
)
from slcreduce.pipeline import (
    allocate_budget,
    dump_samples,
    run_summary,
    sample_multi_pipeline,
    sample_slc_pipeline,
)
from slcreduce.planner import plan_multi, plan_slc, plan_to_dict
from slcreduce.samplers import SamplerConfig, SamplerDivergenceError

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "main"]

_MODES = ("slc", "multi", "diagnostics", "figure1")
_SUITES = ("default", "injected-violation")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a model, a mode, and the run settings."""

    mode: str
    model: object | None
    epsilon: float
    distance: str
    sigma_tar: float | None
    n: int
    seed: int
    out_dir: str
    sampler: SamplerConfig
    m: float | None = None
    M: float | None = None
    checks: list | None = None
    suite: str = "default"
    grid_resolution: int = 61


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _sampler_from_overrides(raw: dict) -> SamplerConfig:
    allowed = {"method", "iterations", "stepsize", "block_size"}
    unknown = set(raw) - allowed
    _require(not unknown, f"unknown sampler override(s): {sorted(unknown)}")
    try:
        return SamplerConfig(**raw)
    except ValueError as exc:
        raise ConfigError(f"bad sampler override: {exc}") from exc


def _curvature_bounds(raw: dict, model) -> tuple[float, float]:
    """Curvature bounds for slc mode: explicit keys, model attributes,
    or the precision spectrum of a single-component Gaussian."""
    m = raw.get("m", getattr(model, "m", None))
    M = raw.get("M", getattr(model, "M", None))
    if (m is None or M is None) and isinstance(model, GaussianMixture):
        if model.weights.size == 1:
            eigs = np.linalg.eigvalsh(model.covs[0])
            m = 1.0 / float(eigs[-1]) if m is None else m
            M = 1.0 / float(eigs[0]) if M is None else M
    _require(
        m is not None and M is not None,
        "slc mode needs curvature bounds: give m and M, or a model that implies them",
    )
    m, M = float(m), float(M)
    _require(0.0 < m <= M, "curvature bounds need 0 < m <= M")
    return m, M


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate one experiment config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _require(isinstance(raw, dict), "config must be a JSON object")

    mode = raw.get("mode")
    _require(mode in _MODES, f"mode must be one of {_MODES}, got {mode!r}")

    model = None
    if raw.get("model") is not None:
        try:
            model = model_from_dict(raw["model"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad model spec: {exc}") from exc
    elif mode == "slc":
        raise ConfigError("slc mode requires a model")
    elif mode == "figure1":
        model = bundled_three_mode_2d()
    else:
        model = bundled_bimodal_2d()

    epsilon = raw.get("epsilon", 0.5)
    _require(
        isinstance(epsilon, (int, float)) and 0.0 < epsilon < 1.0,
        "epsilon must lie in (0, 1)",
    )
    distance = raw.get("distance", "kl" if mode == "slc" else "w2")
    _require(distance in ("kl", "w2"), "distance must be 'kl' or 'w2'")

    sigma_tar = raw.get("sigma_tar")
    if mode == "multi":
        _require(
            isinstance(sigma_tar, (int, float)) and sigma_tar > 0.0,
            "multi mode needs sigma_tar > 0",
        )
        _require(distance == "w2", "multi mode budgets are w2 only")

    n = raw.get("n", 1)
    _require(isinstance(n, int) and n >= 1, "n must be an integer >= 1")
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and 0 <= seed < 2**64, "seed must be a u64")

    sampler = _sampler_from_overrides(raw.get("sampler", {}))
    m = M = None
    if mode == "slc":
        m, M = _curvature_bounds(raw, model)

    checks = raw.get("checks")
    _require(
        checks is None or isinstance(checks, list),
        "checks must be a list of name prefixes",
    )
    suite = raw.get("suite", "default")
    _require(suite in _SUITES, f"suite must be one of {_SUITES}")

    grid_resolution = raw.get("grid_resolution", 61)
    _require(
        isinstance(grid_resolution, int) and grid_resolution >= 8,
        "grid_resolution must be an integer >= 8",
    )

    return ExperimentConfig(
        mode=mode,
        model=model,
        epsilon=float(epsilon),
        distance=distance,
        sigma_tar=None if sigma_tar is None else float(sigma_tar),
        n=n,
        seed=seed,
        out_dir=raw.get("out_dir", "out"),
        sampler=sampler,
        m=m,
        M=M,
        checks=checks,
        suite=suite,
        grid_resolution=grid_resolution,
    )


def _planning_rng(seed: int) -> np.random.Generator:
    """Child stream 0 of the run seed; the pipeline reserves it for
    plan construction so sampling streams never collide with it."""
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])


def _build_plan(config: ExperimentConfig):
    if config.mode == "slc":
        return plan_slc(config.m, config.M)
    if config.mode == "multi":
        return plan_multi(config.model, config.sigma_tar, seed_or_rng=_planning_rng(config.seed))
    raise ConfigError(f"mode {config.mode!r} does not define a plan")


def cmd_plan(config: ExperimentConfig) -> int:
    plan = _build_plan(config)
    payload = plan_to_dict(plan)
    text = json.dumps(payload, indent=2)
    print(text)
    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "plan.json"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    return 0


def cmd_sample(config: ExperimentConfig, threads: int) -> int:
    if config.mode not in ("slc", "multi"):
        raise ConfigError("sample needs an slc or multi mode config")
    plan = _build_plan(config)
    budget = allocate_budget(plan.K, config.epsilon, config.distance, plan)
    if config.mode == "slc":
        record = sample_slc_pipeline(
            config.model, plan, budget, config.n, seed=config.seed,
            config=config.sampler, threads=threads,
        )
    else:
        record = sample_multi_pipeline(
            config.model, config.sigma_tar, plan, budget, config.n, seed=config.seed,
            config=config.sampler, threads=threads,
        )
    os.makedirs(config.out_dir, exist_ok=True)
    dump_samples(record, os.path.join(config.out_dir, "samples.jsonl"))
    summary = run_summary(record)
    summary["mode"] = config.mode
    for stage in summary["stages"]:
        stage.pop("seconds", None)  # wall time would break byte-identical reruns
    with open(os.path.join(config.out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(
        f"wrote {config.n} sample(s), {summary['total_calls']} oracle calls, "
        f"{len(summary['stages'])} stages -> {config.out_dir}"
    )
    return 0


def _injected_violation(seed: int):
    """A deliberately violated check reported as a positive: the window
    is tightened beyond the lemma, so a healthy build must exit 1."""
    narrow = GaussianMixture([1.0], [[0.0, 0.0]], [np.diag([1.0, 0.125])])
    bad = check_spectral_propagation(
        narrow, 0.8, 0.6, m=1.0, M=8.0, seed_or_rng=seed, window_shrink=0.8
    )
    return dataclasses.replace(bad, name=bad.name + "_injected", negative_control=False)


def cmd_verify(config: ExperimentConfig) -> int:
    if config.mode != "diagnostics":
        raise ConfigError("verify needs a diagnostics mode config")
    results = default_suite(
        model=config.model, sigma_tar=config.sigma_tar or 1.0, seed=config.seed
    )
    if config.suite == "injected-violation":
        results = results + [_injected_violation(config.seed)]
    if config.checks is not None:
        results = [
            r for r in results if any(r.name.startswith(p) for p in config.checks)
        ]
    os.makedirs(config.out_dir, exist_ok=True)
    write_report(results, os.path.join(config.out_dir, "report.json"))
    ok = suite_passed(results)
    n_controls = sum(r.negative_control for r in results)
    print(
        f"{len(results)} check(s), {n_controls} negative control(s): "
        f"{'pass' if ok else 'FAIL'} -> {config.out_dir}/report.json"
    )
    return 0 if ok else 1


def cmd_figure1(config: ExperimentConfig) -> int:
    if config.mode != "figure1":
        raise ConfigError("figure1 needs a figure1 mode config")
    manifest = write_figure_grids(
        config.model, config.out_dir, seed=config.seed, resolution=config.grid_resolution
    )
    print(f"wrote {len(manifest['files'])} grid file(s) -> {config.out_dir}")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slcreduce",
        description="Plan, run, and verify staged strongly log-concave sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("plan", "print and save the noising plan for a config"),
        ("sample", "run the backward pipeline and save samples"),
        ("verify", "run the numerical check suite and save a report"),
        ("figure1", "emit contour/quiver CSV grids for the staged illustration"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument(
            "--threads", type=int, default=1, help="worker threads, 0 means auto"
        )
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.out is not None:
            config = dataclasses.replace(config, out_dir=args.out)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be a u64")
            config = dataclasses.replace(config, seed=args.seed)
        threads = os.cpu_count() or 1 if args.threads == 0 else args.threads
        if threads < 1:
            raise ConfigError("threads must be >= 0")

        if args.command == "plan":
            return cmd_plan(config)
        if args.command == "sample":
            return cmd_sample(config, threads)
        if args.command == "verify":
            return cmd_verify(config)
        return cmd_figure1(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SamplerDivergenceError as exc:
        print(f"sampler diverged: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
