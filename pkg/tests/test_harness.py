import csv
from pathlib import Path

import numpy as np
import pytest

from fransim.cli import main as cli_main
from fransim.config import ConfigError, SimConfig, load_config, save_config
from fransim.harness import Experiment, build_preset, execute, run_experiment

REPO = Path(__file__).resolve().parents[1]


def micro_cfg():
    return SimConfig(num_errh=1, num_sh=1, num_users=8, num_rrb=4,
                     num_segments=20, cache_cap_errh=5, cache_cap_sh=3,
                     learn_iters=25, tx_slots_per_frame=10)


def micro_experiment(**kw):
    args = dict(name="t", base=micro_cfg(),
                points=[{"scheme": "learned", "helper": "sh"},
                        {"scheme": "mpc", "helper": "none"}],
                runs_per_point=2, master_seed=5)
    args.update(kw)
    return Experiment(**args)


# -- config file handling --------------------------------------------------------

def test_paper_scale_config_is_valid():
    cfg = load_config(REPO / "configs" / "full_scale.yaml")
    assert cfg.num_segments == 10_000
    assert cfg.num_rrb == 50
    assert cfg.cache_cap_errh == 200
    assert cfg.p_errh_per_rrb == pytest.approx(0.007)
    assert cfg.validate() == []


def test_desk_config_is_valid():
    cfg = load_config(REPO / "configs" / "desk.yaml")
    assert cfg.validate() == []


def test_cache_cap_diagnostic(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("num_segments: 10\ncache_cap_sh: 11\n")
    with pytest.raises(ConfigError, match="cache_cap_sh"):
        load_config(path)


def test_popular_prob_diagnostic(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("popular_prob: 1.5\n")
    with pytest.raises(ConfigError, match="popular_prob"):
        load_config(path)


def test_unknown_key_diagnostic(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("zipf: 1.0\n")
    with pytest.raises(ConfigError, match="zipf"):
        load_config(path)


def test_parse_failure_diagnostic(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("num_users: [unclosed\n")
    with pytest.raises(ConfigError, match="parse failure"):
        load_config(path)


def test_config_roundtrip(tmp_path):
    cfg = micro_cfg().replace(zipf_gamma=0.7)
    save_config(cfg, tmp_path / "c.yaml")
    assert load_config(tmp_path / "c.yaml") == cfg


# -- experiment execution ---------------------------------------------------------

def test_summary_rows_match_grid(tmp_path):
    exp = micro_experiment()
    out = run_experiment(exp, tmp_path, jobs=1, plots=False)
    assert len(out["rows"]) == len(exp.points)
    with (tmp_path / "summary.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(exp.points)
    with (tmp_path / "runs.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(exp.points) * exp.runs_per_point


def test_reseeding_reproduces_single_point(tmp_path):
    exp = micro_experiment()
    full = execute(exp, jobs=1)
    solo = execute(Experiment(name="t", base=exp.base, points=[exp.points[1]],
                              runs_per_point=2, master_seed=5), jobs=1)
    # re-running a point in isolation gives different spawn keys on purpose?
    # no: keys are (point_index, run); the same point index must reproduce.
    exp_single = Experiment(name="t", base=exp.base,
                            points=[exp.points[0]], runs_per_point=2,
                            master_seed=5)
    again = execute(exp_single, jobs=1)
    assert full[0][0].summary == again[0][0].summary
    assert full[0][1].summary == again[0][1].summary


def test_parallel_and_serial_byte_identical(tmp_path):
    exp = micro_experiment()
    run_experiment(exp, tmp_path / "a", jobs=1, plots=False)
    run_experiment(exp, tmp_path / "b", jobs=2, plots=False)
    for name in ("runs.csv", "summary.csv", "learning_trace.csv"):
        a = (tmp_path / "a" / name)
        b = (tmp_path / "b" / name)
        assert a.exists() == b.exists()
        if a.exists():
            assert a.read_bytes() == b.read_bytes()


def test_preset_smoke_deterministic_csvs(tmp_path):
    base = micro_cfg()
    for sub in ("x", "y"):
        exp = build_preset("smoke-desk", base, master_seed=11)
        run_experiment(exp, tmp_path / sub, jobs=2, plots=False)
    for name in ("runs.csv", "summary.csv", "learning_trace.csv"):
        assert ((tmp_path / "x" / name).read_bytes()
                == (tmp_path / "y" / name).read_bytes())


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError):
        build_preset("fig99", micro_cfg())


def test_learning_trace_columns(tmp_path):
    exp = micro_experiment(collect_traces=True)
    run_experiment(exp, tmp_path, jobs=1, plots=False)
    with (tmp_path / "learning_trace.csv").open() as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    assert {"iteration", "mean_reward_errh", "mean_reward_helper",
            "mean_top_policy"} <= set(rows[0].keys())
    # only the learned point produces a trace, one row per iteration
    assert len(rows) == exp.base.learn_iters


def test_fig2_trace_layout(tmp_path):
    base = micro_cfg()
    points = [{"scheme": "learned", "helper": h, "zipf_gamma": g,
               "tx_slots_per_frame": 4}
              for g in (0.5, 1.0) for h in ("sh", "ce_relay")]
    exp = Experiment(name="fig2", base=base, points=points, runs_per_point=2,
                     master_seed=3, collect_traces=True, trace_layout="fig2")
    run_experiment(exp, tmp_path, jobs=1, plots=False)
    with (tmp_path / "learning_trace.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0].keys()) == {"gamma", "iteration", "mean_reward_sh",
                                   "mean_reward_relay"}
    gammas = {row["gamma"] for row in rows}
    assert gammas == {"0.5", "1.0"}
    assert len(rows) == 2 * base.learn_iters


def test_delivery_trace_files(tmp_path):
    exp = micro_experiment()
    run_experiment(exp, tmp_path, jobs=1, plots=False, collect_deliveries=True)
    trace = tmp_path / "trace_point0.csv"
    assert trace.exists()
    with trace.open() as fh:
        rows = list(csv.DictReader(fh))
    assert rows, "per-slot delivery rows expected"
    assert {"slot", "user", "node_type", "node_id", "rrb", "power_watts",
            "delay_seconds", "served_from"} == set(rows[0].keys())
    cache_trace = tmp_path / "cache_trace_point0.csv"
    with cache_trace.open() as fh:
        rows = list(csv.DictReader(fh))
    assert {"node_id", "slot", "cached_segments"} == set(rows[0].keys())


def test_invalid_output_dir_fails_loudly(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ConfigError):
        run_experiment(micro_experiment(), blocker / "sub", jobs=1, plots=False)


# -- CLI --------------------------------------------------------------------------

def test_cli_single_point(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.yaml"
    save_config(micro_cfg(), cfg_path)
    rc = cli_main(["--config", str(cfg_path), "--scheme", "mpc",
                   "--runs", "2", "--seed", "3", "--jobs", "1",
                   "--out", str(tmp_path / "out"), "--no-plots"])
    assert rc == 0
    assert (tmp_path / "out" / "runs.csv").exists()
    assert (tmp_path / "out" / "config_used.yaml").exists()
    assert "mpc" in capsys.readouterr().out


def test_cli_rejects_bad_config(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.yaml"
    cfg_path.write_text("popular_prob: 2.0\n")
    rc = cli_main(["--config", str(cfg_path), "--no-plots",
                   "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "popular_prob" in capsys.readouterr().err
