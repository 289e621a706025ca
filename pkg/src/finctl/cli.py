"""Command line entry point: ``finctl <command> ...``."""
from __future__ import annotations

import argparse
import logging
import re
import sys
import time
from dataclasses import replace
from pathlib import Path

from .allocation import METHODS
from .harness.bench import alloc_bench
from .harness.episode import EpisodeConfig, run_episode
from .harness.io import ConfigFileError, load_config, read_episode_csv, write_episode_csv, write_json
from .harness.metrics import METRIC_NAMES, compute_metrics
from .harness.montecarlo import (DESK_DURATION, DESK_RUNS, FULL_DURATION, FULL_RUNS, run_montecarlo,
                                 summarize)
from .harness.tuning import GaParams, ga_tune

log = logging.getLogger("finctl")
RUN_CSV = re.compile(r"^(?P<method>[a-z]+)_run(?P<index>\d+)\.csv$")


def _methods(text: str) -> tuple:
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {','.join(METHODS)}")
    return methods


def _config(path) -> EpisodeConfig:
    return load_config(path) if path else EpisodeConfig()


def cmd_simulate(args) -> int:
    cfg = _config(args.config)
    changes = {"seed": args.seed}
    if args.duration is not None:
        changes["duration"] = args.duration
    if args.timing:
        changes["record_timing"] = True
    cfg = replace(cfg, **changes)
    rec = run_episode(cfg)
    out = Path(args.out)
    write_episode_csv(rec, out / "episode.csv")
    summary = {"method": cfg.method, "seed": cfg.seed, "duration": cfg.duration,
               "failed": rec.failed, "message": rec.message, "samples": len(rec),
               "metrics": compute_metrics(rec, cfg.geom).as_dict() if len(rec) else None}
    write_json(summary, out / "metrics.json")
    log.info("wrote %s", out)
    if rec.failed:
        log.warning("episode failed: %s", rec.message)
    return 0


def cmd_montecarlo(args) -> int:
    runs = args.runs if args.runs is not None else (FULL_RUNS if args.full_scale else DESK_RUNS)
    duration = args.duration or (FULL_DURATION if args.full_scale else DESK_DURATION)
    out = Path(args.out)
    started = time.perf_counter()

    def on_run(run, rec):
        if not args.no_csv:
            write_episode_csv(rec, out / f"{run.method}_run{run.run_index:04d}.csv")
        state = "FAILED " + run.message if run.failed else f"RMSE_lin={run.metrics.RMSE_lin:.3f} m"
        log.info("run %d %-4s %s/%s %s", run.run_index, run.method, run.trajectory.scenario,
                 run.trajectory.shape, state)

    result = run_montecarlo(runs, args.methods, args.seed, duration, on_run=on_run)
    summary = result.summary()
    summary["wall_time_s"] = round(time.perf_counter() - started, 1)
    write_json(summary, out / "campaign.json")
    for m, block in summary["methods"].items():
        if block["failures"]:
            log.warning("%s: %d failed run(s) excluded", m, block["failures"])
    log.info("wrote %s", out / "campaign.json")
    return 0


def cmd_alloc_bench(args) -> int:
    results = alloc_bench(args.methods, duration=args.duration)
    out = {m: r.summary() for m, r in results.items()}
    write_json(out, Path(args.out) / "alloc_bench.json")
    for r in results.values():
        log.info("%-4s MAE_lin=%.3f N MAE_ang=%.3f N m MCT=%.3f ms",
                 r.method, r.mae_lin, r.mae_ang, r.mct_ms)
    return 0


def cmd_tune(args) -> int:
    cfg = _config(args.config)
    params = GaParams(population=args.population, iterations=args.iterations)

    def progress(gen, res):
        log.info("generation %d best cost %.4f", gen + 1, res.best_cost)

    res = ga_tune(cfg.method, params, args.seed, args.duration, warm_start=args.warm_start,
                  on_generation=progress)
    kp, kd = res.gains
    summary = {"method": cfg.method, "seed": args.seed, "K_p": kp, "K_d": kd,
               "cost": res.best_cost, "history": res.history}
    if args.out:
        write_json(summary, Path(args.out) / "tuned_gains.json")
    print(f"K_p = {[round(v, 3) for v in kp]}  K_d = {[round(v, 3) for v in kd]}  "
          f"cost = {res.best_cost:.4f}")
    return 0


def cmd_report(args) -> int:
    src = Path(args.input)
    files = sorted(p for p in src.glob("*.csv") if RUN_CSV.match(p.name))
    if not files:
        raise FileNotFoundError(f"no <method>_run<index>.csv files in {src}")
    per_method: dict[str, list] = {}
    for path in files:
        method = RUN_CSV.match(path.name)["method"]
        rec = read_episode_csv(path, method)
        per_method.setdefault(method, []).append(compute_metrics(rec))
    summary = {"source": str(src), "methods": {}}
    for m, reports in sorted(per_method.items()):
        summary["methods"][m] = {
            "runs": len(reports),
            "metrics": {k: summarize([getattr(r, k) for r in reports]) for k in METRIC_NAMES},
        }
    target = Path(args.out) if args.out else src / "report.json"
    write_json(summary, target)
    log.info("wrote %s", target)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finctl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one closed-loop episode")
    s.add_argument("--config", help="YAML run configuration")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--duration", type=float, help="override the episode length [s]")
    s.add_argument("--timing", action="store_true",
                   help="record allocation wall time (makes the CSV non-reproducible)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("montecarlo", help="randomised campaign over all methods")
    s.add_argument("--runs", type=int)
    s.add_argument("--methods", type=_methods, default=METHODS)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--duration", type=float)
    s.add_argument("--full-scale", action="store_true",
                   help=f"{FULL_RUNS} runs of {FULL_DURATION:.0f} s instead of "
                        f"{DESK_RUNS} runs of {DESK_DURATION:.0f} s")
    s.add_argument("--no-csv", action="store_true", help="skip the per-run CSV files")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_montecarlo)

    s = sub.add_parser("alloc-bench", help="open-loop allocation benchmark")
    s.add_argument("--methods", type=_methods, default=METHODS)
    s.add_argument("--duration", type=float, default=40.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_alloc_bench)

    s = sub.add_parser("tune", help="genetic-algorithm gain tuning")
    s.add_argument("--config", help="YAML run configuration (method and plant)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--population", type=int, default=GaParams.population)
    s.add_argument("--iterations", type=int, default=GaParams.iterations)
    s.add_argument("--duration", type=float, default=100.0, help="length of each episode [s]")
    s.add_argument("--warm-start", action="store_true", help="seed the population with the preset")
    s.add_argument("--out")
    s.set_defaults(func=cmd_tune)

    s = sub.add_parser("report", help="re-aggregate campaign CSV files")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", help="JSON path (default <in>/report.json)")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ConfigFileError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
