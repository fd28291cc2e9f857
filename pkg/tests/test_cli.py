import json

import numpy as np
import pytest

from slcreduce.cli import ConfigError, load_config, main
from slcreduce.figure_grids import N_REALIZATIONS, THETA_SEQUENCE, write_figure_grids
from slcreduce.models import bundled_bimodal_2d

UNIT_GAUSSIAN = {
    "type": "gaussian_mixture",
    "weights": [1.0],
    "means": [[0.0, 0.0]],
    "covs": [[[1.0, 0.0], [0.0, 1.0]]],
}
NARROW_GAUSSIAN = {
    "type": "gaussian_mixture",
    "weights": [1.0],
    "means": [[0.5, -0.25]],
    "covs": [[[1.0, 0.0], [0.0, 0.125]]],
}


def write_config(tmp_path, name="config.json", **fields):
    path = tmp_path / name
    path.write_text(json.dumps(fields))
    return str(path)


def slc_config(tmp_path, **overrides):
    fields = {
        "mode": "slc",
        "model": NARROW_GAUSSIAN,
        "epsilon": 0.3,
        "n": 2,
        "seed": 11,
        "sampler": {"iterations": 8},
        "out_dir": str(tmp_path / "out"),
    }
    fields.update(overrides)
    return write_config(tmp_path, **fields)


# -- config loading --------------------------------------------------------------


def test_load_config_fills_defaults(tmp_path):
    cfg = load_config(slc_config(tmp_path))
    assert cfg.mode == "slc"
    assert cfg.distance == "kl"
    assert (cfg.m, cfg.M) == (1.0, 8.0)  # derived from the Gaussian's spectrum
    assert cfg.sampler.iterations == 8


@pytest.mark.parametrize(
    "fields, match",
    [
        ({"mode": "warp"}, "mode must be one of"),
        ({"mode": "slc"}, "requires a model"),
        ({"mode": "slc", "model": NARROW_GAUSSIAN, "epsilon": 0.0}, "epsilon"),
        ({"mode": "slc", "model": NARROW_GAUSSIAN, "epsilon": 1.0}, "epsilon"),
        ({"mode": "slc", "model": NARROW_GAUSSIAN, "n": 0}, "n must be"),
        ({"mode": "multi"}, "sigma_tar"),
        ({"mode": "multi", "sigma_tar": 1.0, "distance": "kl"}, "w2 only"),
        ({"mode": "diagnostics", "seed": -1}, "u64"),
        ({"mode": "diagnostics", "checks": "tweedie"}, "checks must be a list"),
        ({"mode": "diagnostics", "suite": "chaos"}, "suite must be"),
        ({"mode": "figure1", "grid_resolution": 4}, "grid_resolution"),
        ({"mode": "slc", "model": NARROW_GAUSSIAN, "sampler": {"mood": 1}}, "unknown sampler"),
        ({"mode": "slc", "model": {"type": "nope"}}, "bad model spec"),
    ],
)
def test_load_config_rejects(tmp_path, fields, match):
    with pytest.raises(ConfigError, match=match):
        load_config(write_config(tmp_path, **fields))


def test_load_config_rejects_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(path))


def test_missing_config_file_exits_two(tmp_path, capsys):
    assert main(["plan", "--config", str(tmp_path / "absent.json")]) == 2
    assert "config error" in capsys.readouterr().err


# -- plan ------------------------------------------------------------------------


def test_plan_kappa_eight_emits_three_stages(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["plan", "--config", slc_config(tmp_path), "--out", str(out)]) == 0
    printed = json.loads(capsys.readouterr().out)
    saved = json.loads((out / "plan.json").read_text())
    assert printed == saved
    assert saved["K"] == 3
    assert saved["mu"] == [8.0, 4.5, 2.75, 1.875]


def test_plan_kappa_one_is_terminal_only(tmp_path):
    out = tmp_path / "out"
    cfg = slc_config(tmp_path, model=UNIT_GAUSSIAN)
    assert main(["plan", "--config", cfg, "--out", str(out)]) == 0
    assert json.loads((out / "plan.json").read_text())["K"] == 0


def test_plan_multi_respects_worst_case_length(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, mode="multi", sigma_tar=1.0, seed=0)
    assert main(["plan", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads((out / "plan.json").read_text())
    assert payload["type"] == "multi_plan"
    assert payload["K"] <= 14.0 * max(1.0, max(payload["B"]))


def test_plan_rejects_modes_without_plans(tmp_path, capsys):
    cfg = write_config(tmp_path, mode="diagnostics")
    assert main(["plan", "--config", cfg]) == 2
    assert "does not define a plan" in capsys.readouterr().err


# -- sample ----------------------------------------------------------------------


def test_sample_single_trajectory_emits_one_line(tmp_path):
    out = tmp_path / "out"
    cfg = slc_config(tmp_path, n=1)
    assert main(["sample", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "samples.jsonl").read_text().splitlines()
    assert len(lines) == 1
    row = json.loads(lines[0])
    assert row["index"] == 0
    assert len(row["x"]) == 2


def test_sample_reruns_byte_identical(tmp_path):
    cfg = slc_config(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["sample", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["sample", "--config", cfg, "--out", str(out_b)]) == 0
    assert (out_a / "samples.jsonl").read_bytes() == (out_b / "samples.jsonl").read_bytes()
    assert (out_a / "summary.json").read_bytes() == (out_b / "summary.json").read_bytes()


def test_sample_seed_override_changes_output(tmp_path):
    cfg = slc_config(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["sample", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["sample", "--config", cfg, "--out", str(out_b), "--seed", "99"]) == 0
    assert (out_a / "samples.jsonl").read_bytes() != (out_b / "samples.jsonl").read_bytes()


def test_sample_thread_count_does_not_change_bytes(tmp_path):
    cfg = slc_config(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["sample", "--config", cfg, "--out", str(out_a), "--threads", "1"]) == 0
    assert main(["sample", "--config", cfg, "--out", str(out_b), "--threads", "2"]) == 0
    assert (out_a / "samples.jsonl").read_bytes() == (out_b / "samples.jsonl").read_bytes()


def test_sample_summary_total_matches_recount(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(
        tmp_path, mode="multi", sigma_tar=1.0, epsilon=0.5, n=2, seed=4,
        sampler={"iterations": 6},
    )
    assert main(["sample", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["total_calls"] == sum(s["calls"] for s in summary["stages"])
    assert summary["mode"] == "multi"
    assert all("seconds" not in s for s in summary["stages"])


def test_sample_requires_a_sampling_mode(tmp_path):
    cfg = write_config(tmp_path, mode="figure1")
    assert main(["sample", "--config", cfg]) == 2


def test_sample_divergence_exits_three(tmp_path, capsys):
    cfg = slc_config(tmp_path, sampler={"method": "ula", "stepsize": 1e8, "iterations": 60})
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "out")]) == 3
    assert "diverged" in capsys.readouterr().err


# -- verify ----------------------------------------------------------------------


def test_verify_default_suite_passes(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, mode="diagnostics", seed=0)
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] is True
    assert report["n_checks"] > 0


def test_verify_injected_violation_fails(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, mode="diagnostics", suite="injected-violation")
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 1
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] is False
    bad = [c for c in report["checks"] if c["name"].endswith("_injected")]
    assert len(bad) == 1
    assert not bad[0]["passed"] and not bad[0]["negative_control"]


def test_verify_empty_check_list_is_empty_pass(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, mode="diagnostics", checks=[])
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["n_checks"] == 0


def test_verify_check_prefix_filter(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, mode="diagnostics", checks=["brascamp_lieb"])
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["n_checks"] > 0
    assert all(c["name"].startswith("brascamp_lieb") for c in report["checks"])


def test_verify_requires_diagnostics_mode(tmp_path):
    assert main(["verify", "--config", slc_config(tmp_path)]) == 2


# -- figure1 ---------------------------------------------------------------------


def figure_config(tmp_path, **overrides):
    fields = {"mode": "figure1", "seed": 2, "grid_resolution": 16}
    fields.update(overrides)
    return write_config(tmp_path, **fields)


def test_theta_sequence_is_pinned():
    assert THETA_SEQUENCE == (1.0, 0.93, 0.85, 0.78, 0.60)


def test_figure1_emits_expected_grid_files(tmp_path):
    out = tmp_path / "out"
    assert main(["figure1", "--config", figure_config(tmp_path), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["theta"] == list(THETA_SEQUENCE)
    names = manifest["files"]
    assert len(names) == 22
    assert sum(n.startswith("marginal_stage_") for n in names) == 5
    assert sum(n.startswith("score_stage_") for n in names) == 5
    assert sum(n.startswith("conditional_") for n in names) == 4 * N_REALIZATIONS
    for name in names:
        assert (out / name).exists()


def test_figure1_resolution_respected(tmp_path):
    out = tmp_path / "out"
    cfg = figure_config(tmp_path, grid_resolution=12)
    assert main(["figure1", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "marginal_stage_0.csv").read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 1 + 12 * 12
    quiver = (out / "score_stage_2.csv").read_text().splitlines()
    assert quiver[0] == "x,y,dx,dy"
    assert len(quiver) == 1 + 12 * 12


def test_figure1_symmetric_model_grids_symmetric(tmp_path):
    # the bundled bimodal is invariant under x -> -x, so every marginal
    # grid must be even under point reflection; the grid axis is built
    # exactly antisymmetric to make reversal an exact negation
    manifest = write_figure_grids(bundled_bimodal_2d(), tmp_path / "g", seed=0, resolution=17)
    for j in range(5):
        rows = np.loadtxt(tmp_path / "g" / f"marginal_stage_{j}.csv", delimiter=",", skiprows=1)
        np.testing.assert_allclose(rows[:, 2], rows[::-1, 2], atol=1e-9)
        sc = np.loadtxt(tmp_path / "g" / f"score_stage_{j}.csv", delimiter=",", skiprows=1)
        np.testing.assert_allclose(sc[:, 2:], -sc[::-1, 2:], atol=1e-9)
    assert manifest["resolution"] == 17


def test_figure1_rejects_non_planar_models(tmp_path):
    model_1d = {
        "type": "gaussian_mixture",
        "weights": [1.0],
        "means": [[0.0]],
        "covs": [[[1.0]]],
    }
    cfg = figure_config(tmp_path, model=model_1d)
    assert main(["figure1", "--config", cfg, "--out", str(tmp_path / "out")]) == 2


def test_figure1_deterministic_given_seed(tmp_path):
    cfg = figure_config(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["figure1", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["figure1", "--config", cfg, "--out", str(out_b)]) == 0
    name = "conditional_real2_step3.csv"
    assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_figure1_conditional_tracks_realization(tmp_path):
    # the conditional's mode sits near y / a when the prior is flat
    # relative to the tether; at least confirm the grid peaks closer to
    # the conditioning point than the marginal's own origin-heavy peak
    from slcreduce.figure_grids import realization_trajectories

    out = tmp_path / "g"
    write_figure_grids(bundled_bimodal_2d(), out, seed=5, resolution=33)
    rows = np.loadtxt(out / "conditional_real0_step3.csv", delimiter=",", skiprows=1)
    peak = rows[np.argmax(rows[:, 2]), :2]
    traj = realization_trajectories(bundled_bimodal_2d(), 5)
    y = traj[4, 0]
    a = THETA_SEQUENCE[4] / THETA_SEQUENCE[3]
    assert np.linalg.norm(peak - y / a) <= 1.5
