"""Experiment orchestration: presets, seeded parallel Monte Carlo runs, and
CSV/plot emission. A master seed fully determines every per-run stream, and
results are reduced in grid order so parallelism never changes output bytes."""
from __future__ import annotations

import csv
import dataclasses
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, rl
from .cache import CacheState
from .config import ConfigError, SimConfig, save_config
from .metrics import METRIC_FIELDS, aggregate_runs
from .topology import generate_topology
from .traffic import build_catalog

HELPER_KINDS = ("sh", "ce_relay", "none")

RUN_COLUMNS = ("point", "scheme", "helper", "num_errh", "num_sh", "zipf_gamma",
               "seed", "avg_delay_s", "fronthaul_bps", "hit_rate",
               "service_rate", "cache_refresh_bits")


def run_single(cfg: SimConfig, scheme: str, helper: str,
               rng: np.random.Generator, collect_trace: bool = False,
               collect_deliveries: bool = False) -> rl.FrameResult:
    """Execute one Monte Carlo run (one frame) and return its outcome."""
    if scheme not in baselines.SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    if helper not in HELPER_KINDS:
        raise ConfigError(f"unknown helper kind {helper!r}")
    if helper == "none":
        cfg = cfg.replace(num_sh=0)
    cfg.require_valid()
    topo = generate_topology(cfg, rng)
    catalog = build_catalog(cfg.num_segments, cfg.zipf_gamma)
    if scheme == "learned":
        bank = rl.AgentBank.initial(cfg)
        cache = CacheState.empty(cfg)
        engine = (baselines.RelaySlotEngine(topo, catalog, cfg)
                  if helper == "ce_relay" else rl.ShSlotEngine(topo, catalog, cfg))
        return rl.run_frame(bank, cache, topo, catalog, cfg, rng, engine=engine,
                            collect_trace=collect_trace,
                            collect_deliveries=collect_deliveries)
    return baselines.run_static_frame(scheme, topo, catalog, cfg, rng,
                                      helper_kind=helper,
                                      collect_deliveries=collect_deliveries)


@dataclass
class Experiment:
    """A sweep grid of (config overrides, scheme, helper) points."""

    name: str
    base: SimConfig
    points: list[dict]            # each holds "scheme", "helper", + overrides
    runs_per_point: int = 20
    master_seed: int = 0
    collect_traces: bool = False
    trace_layout: str = "generic"     # or "fig2": columns per helper kind

    def __post_init__(self):
        if not self.points:
            raise ConfigError("experiment needs at least one sweep point")
        if self.runs_per_point < 1:
            raise ConfigError("runs_per_point must be >= 1")

    def point_config(self, index: int) -> tuple[SimConfig, str, str]:
        point = dict(self.points[index])
        scheme = point.pop("scheme", "learned")
        helper = point.pop("helper", "sh")
        return self.base.replace(**point), scheme, helper


def _run_task(task) -> tuple[int, int, rl.FrameResult]:
    (cfg, scheme, helper, master_seed, point_idx, run_idx,
     collect_trace, collect_deliveries) = task
    rng = np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(point_idx, run_idx)))
    result = run_single(cfg, scheme, helper, rng,
                        collect_trace=collect_trace,
                        collect_deliveries=collect_deliveries and run_idx == 0)
    return point_idx, run_idx, result


def execute(exp: Experiment, jobs: int | None = None,
            collect_deliveries: bool = False) -> list[list[rl.FrameResult]]:
    """Run the whole grid; returns results[point][run] in deterministic order."""
    tasks = []
    for p in range(len(exp.points)):
        cfg, scheme, helper = exp.point_config(p)
        trace = exp.collect_traces and scheme == "learned"
        for r in range(exp.runs_per_point):
            tasks.append((cfg, scheme, helper, exp.master_seed, p, r,
                          trace, collect_deliveries))
    jobs = jobs or min(multiprocessing.cpu_count(), len(tasks))
    if jobs > 1 and len(tasks) > 1:
        with multiprocessing.Pool(jobs) as pool:
            outcomes = pool.map(_run_task, tasks, chunksize=1)
    else:
        outcomes = [_run_task(t) for t in tasks]
    results: list[list] = [[None] * exp.runs_per_point for _ in exp.points]
    for p, r, res in outcomes:
        results[p][r] = res
    return results


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


def write_runs_csv(exp: Experiment, results, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_COLUMNS)
        for p in range(len(exp.points)):
            cfg, scheme, helper = exp.point_config(p)
            for r, res in enumerate(results[p]):
                s = res.summary
                writer.writerow([p, scheme, helper, cfg.num_errh, cfg.num_sh,
                                 _fmt(cfg.zipf_gamma), r, _fmt(s.avg_delay_s),
                                 _fmt(s.fronthaul_bps), _fmt(s.hit_rate),
                                 _fmt(s.service_rate), _fmt(s.cache_refresh_bits)])


def summarize_points(exp: Experiment, results) -> list[dict]:
    rows = []
    for p in range(len(exp.points)):
        cfg, scheme, helper = exp.point_config(p)
        agg = aggregate_runs([r.summary for r in results[p]])
        row = {"point": p, "scheme": scheme, "helper": helper,
               "num_errh": cfg.num_errh, "num_sh": cfg.num_sh,
               "zipf_gamma": cfg.zipf_gamma, "runs": len(results[p])}
        for name in METRIC_FIELDS:
            mean, half = agg[name]
            row[f"{name}_mean"] = mean
            row[f"{name}_ci95"] = half
        rows.append(row)
    return rows


def write_summary_csv(rows: list[dict], path: Path) -> None:
    columns = list(rows[0].keys())
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def mean_trace(results_for_point) -> dict[str, np.ndarray] | None:
    traces = [r.trace for r in results_for_point if r.trace is not None]
    if not traces:
        return None
    return {key: np.mean([t[key] for t in traces], axis=0) for key in traces[0]}


def write_learning_trace_csv(exp: Experiment, results, path: Path) -> bool:
    """Averaged per-iteration learning traces. The fig2 layout pairs the
    helper and relay variants of each Zipf setting into one table."""
    point_traces = {p: mean_trace(results[p]) for p in range(len(exp.points))}
    if all(t is None for t in point_traces.values()):
        return False
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if exp.trace_layout == "fig2":
            by_key = {}
            for p, trace in point_traces.items():
                if trace is None:
                    continue
                cfg, _, helper = exp.point_config(p)
                by_key.setdefault(cfg.zipf_gamma, {})[helper] = trace
            writer.writerow(["gamma", "iteration", "mean_reward_sh",
                             "mean_reward_relay"])
            for gamma in sorted(by_key):
                sh = by_key[gamma].get("sh")
                relay = by_key[gamma].get("ce_relay")
                n = len(sh["mean_reward_helper"] if sh else relay["mean_reward_helper"])
                for i in range(n):
                    writer.writerow([
                        _fmt(gamma), i + 1,
                        _fmt(sh["mean_reward_helper"][i]) if sh else "",
                        _fmt(relay["mean_reward_helper"][i]) if relay else ""])
        else:
            writer.writerow(["point", "scheme", "helper", "num_sh", "zipf_gamma",
                             "iteration", "mean_reward_errh", "mean_reward_helper",
                             "mean_top_policy"])
            for p, trace in point_traces.items():
                if trace is None:
                    continue
                cfg, scheme, helper = exp.point_config(p)
                for i in range(len(trace["mean_reward_errh"])):
                    writer.writerow([
                        p, scheme, helper, cfg.num_sh, _fmt(cfg.zipf_gamma), i + 1,
                        _fmt(trace["mean_reward_errh"][i]),
                        _fmt(trace["mean_reward_helper"][i]),
                        _fmt(trace["mean_top_policy"][i])])
    return True


def write_delivery_trace(exp: Experiment, results, out: Path) -> None:
    for p in range(len(exp.points)):
        res = results[p][0]
        if not res.delivery_log:
            continue
        with (out / f"trace_point{p}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["slot", "user", "node_type", "node_id", "rrb",
                             "power_watts", "delay_seconds", "served_from"])
            for slot, d in res.delivery_log:
                writer.writerow([slot, d.user, d.node_kind, d.node, d.rrb,
                                 _fmt(d.power),
                                 _fmt(d.delay) if d.served else "unserved",
                                 d.served_from])
        with (out / f"cache_trace_point{p}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node_id", "slot", "cached_segments"])
            for node, slot, segments in res.cache_log:
                writer.writerow([node, slot, " ".join(map(str, segments))])


def make_plots(exp: Experiment, rows: list[dict], results, out: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    def grouped(xkey, ykey, fname, xlabel, ylabel):
        groups: dict[tuple, list[tuple]] = {}
        for row in rows:
            label = tuple((k, row[k]) for k in ("scheme", "helper", "num_errh",
                                                "num_sh", "zipf_gamma")
                          if k != xkey)
            groups.setdefault(label, []).append(
                (row[xkey], row[f"{ykey}_mean"], row[f"{ykey}_ci95"]))
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, pts in sorted(groups.items()):
            pts.sort()
            x, y, err = zip(*pts)
            name = ", ".join(f"{k}={v}" for k, v in label
                             if k in ("scheme", "helper", "num_sh", "zipf_gamma"))
            ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out / fname, dpi=120)
        plt.close(fig)

    h_values = {row["num_sh"] for row in rows}
    gammas = {row["zipf_gamma"] for row in rows}
    if len(h_values) > 1:
        grouped("num_sh", "avg_delay_s", "delay_vs_helpers.png",
                "number of helpers", "average delay [s]")
        grouped("num_sh", "fronthaul_bps", "load_vs_helpers.png",
                "number of helpers", "fronthaul load [bit/s]")
    if len(gammas) > 1:
        grouped("zipf_gamma", "hit_rate", "hitrate_vs_gamma.png",
                "Zipf gamma", "cache hit rate")
        grouped("zipf_gamma", "fronthaul_bps", "load_vs_gamma.png",
                "Zipf gamma", "fronthaul load [bit/s]")

    traced = [(p, mean_trace(results[p])) for p in range(len(exp.points))]
    traced = [(p, t) for p, t in traced if t is not None]
    if traced:
        fig, ax = plt.subplots(figsize=(6, 4))
        for p, trace in traced:
            cfg, scheme, helper = exp.point_config(p)
            series = trace["mean_reward_helper"]
            ax.plot(np.arange(1, len(series) + 1), series,
                    label=f"{helper}, gamma={cfg.zipf_gamma}")
        ax.set_xlabel("learning iteration")
        ax.set_ylabel("mean helper agent reward")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out / "reward_vs_iteration.png", dpi=120)
        plt.close(fig)


def run_experiment(exp: Experiment, out_dir: str | Path,
                   jobs: int | None = None, plots: bool = True,
                   collect_deliveries: bool = False) -> dict:
    """Execute an experiment and write every output artifact into out_dir."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    results = execute(exp, jobs=jobs, collect_deliveries=collect_deliveries)
    write_runs_csv(exp, results, out / "runs.csv")
    rows = summarize_points(exp, results)
    write_summary_csv(rows, out / "summary.csv")
    wrote_trace = write_learning_trace_csv(exp, results, out / "learning_trace.csv")
    if not wrote_trace:
        (out / "learning_trace.csv").unlink(missing_ok=True)
    if collect_deliveries:
        write_delivery_trace(exp, results, out)
    save_config(exp.base, out / "config_used.yaml")
    if plots:
        make_plots(exp, rows, results, out)
    return {"out": out, "rows": rows, "results": results}


# ---------------------------------------------------------------------------
# Presets: desk-scale versions of the reference scenarios, plus full scale
# ---------------------------------------------------------------------------

def _preset_smoke(base: SimConfig, runs: int | None, seed: int) -> Experiment:
    cfg = base.replace(num_errh=1, num_sh=1, num_users=10, num_rrb=6,
                       num_segments=30, cache_cap_errh=5, cache_cap_sh=3,
                       learn_iters=60, tx_slots_per_frame=30)
    return Experiment(name="smoke-desk", base=cfg,
                      points=[{"scheme": "learned", "helper": "sh"},
                              {"scheme": "mpc", "helper": "sh"}],
                      runs_per_point=runs or 2, master_seed=seed,
                      collect_traces=True)


def _preset_fig2(base: SimConfig, runs: int | None, seed: int) -> Experiment:
    points = [{"scheme": "learned", "helper": helper, "num_sh": 1,
               "zipf_gamma": gamma, "tx_slots_per_frame": 50}
              for gamma in (0.5, 1.0) for helper in ("sh", "ce_relay")]
    return Experiment(name="fig2-desk", base=base, points=points,
                      runs_per_point=runs or 5, master_seed=seed,
                      collect_traces=True, trace_layout="fig2")


def _preset_fig5(base: SimConfig, runs: int | None, seed: int) -> Experiment:
    points = [{"scheme": "learned", "helper": "sh", "num_sh": h, "zipf_gamma": g}
              for g in (0.0, 0.25, 0.5, 0.75, 1.0) for h in (0, 2, 4)]
    return Experiment(name="fig5-desk", base=base, points=points,
                      runs_per_point=runs or 20, master_seed=seed)


def _preset_fig6a(base: SimConfig, runs: int | None, seed: int) -> Experiment:
    points = [{"scheme": "learned", "helper": "sh", "num_sh": h}
              for h in (0, 2, 4)]
    return Experiment(name="fig6a-desk", base=base, points=points,
                      runs_per_point=runs or 100, master_seed=seed)


def _preset_fig6b(base: SimConfig, runs: int | None, seed: int) -> Experiment:
    points = [{"scheme": "learned", "helper": helper, "num_sh": h}
              for helper in ("sh", "ce_relay") for h in (2, 4)]
    return Experiment(name="fig6b-desk", base=base, points=points,
                      runs_per_point=runs or 100, master_seed=seed,
                      collect_traces=True)


def _preset_fig8(base: SimConfig, runs: int | None, seed: int) -> Experiment:
    points = [{"scheme": scheme, "helper": "sh", "zipf_gamma": g}
              for scheme in baselines.SCHEMES for g in (0.0, 0.5, 1.0)]
    return Experiment(name="fig8-desk", base=base, points=points,
                      runs_per_point=runs or 20, master_seed=seed)


def _full_base(base: SimConfig) -> SimConfig:
    return base.replace(num_errh=4, num_sh=4, num_users=300, num_rrb=50,
                        num_segments=10_000, cache_cap_errh=200,
                        cache_cap_sh=100, learn_iters=2000,
                        tx_slots_per_frame=500)


def _preset_fig6a_full(base: SimConfig, runs: int | None, seed: int) -> Experiment:
    points = [{"scheme": "learned", "helper": "sh", "num_sh": h}
              for h in (0, 1, 2, 3, 4)]
    return Experiment(name="fig6a-full", base=_full_base(base), points=points,
                      runs_per_point=runs or 2000, master_seed=seed)


def _preset_fig8_full(base: SimConfig, runs: int | None, seed: int) -> Experiment:
    points = [{"scheme": scheme, "helper": "sh", "zipf_gamma": g}
              for scheme in baselines.SCHEMES
              for g in (0.0, 0.25, 0.5, 0.75, 1.0)]
    return Experiment(name="fig8-full", base=_full_base(base), points=points,
                      runs_per_point=runs or 2000, master_seed=seed)


PRESETS = {
    "smoke-desk": _preset_smoke,
    "fig2-desk": _preset_fig2,
    "fig5-desk": _preset_fig5,
    "fig6a-desk": _preset_fig6a,
    "fig6b-desk": _preset_fig6b,
    "fig8-desk": _preset_fig8,
    "fig6a-full": _preset_fig6a_full,
    "fig8-full": _preset_fig8_full,
}


def build_preset(name: str, base: SimConfig, runs: int | None = None,
                 master_seed: int | None = None) -> Experiment:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    seed = base.rng_seed if master_seed is None else master_seed
    return PRESETS[name](base, runs, seed)
