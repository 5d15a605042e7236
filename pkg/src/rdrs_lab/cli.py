"""``rdrs-lab`` command line entry point."""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import RegionError, validate_boundary_property
from .config import ConfigError, parse_config, resolve_config_path
from .experiments import (
    BASELINES,
    ExperimentError,
    check_baseline,
    replication_paths,
    run_comparison,
    write_mtcd_csv,
    write_path_csv,
)
from .game import EXAMPLE_KINDS, UtilitySpec, validate_utility_conditions

DEFAULT_PRESET = {1: "example1_fig5", 2: "example2_fig7"}
DEFAULT_BASELINES = {1: ("constant", "2dqueue", "arbitrary"), 2: ("constant", "pooling")}
SEED_ENV = "RDRS_LAB_SEED"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdrs-lab", description="Game-based dynamic pricing policy comparisons "
                                "on the regime-switching workload diffusion.")
    p.add_argument("--config", help="INI file or bundled preset name")
    p.add_argument("--example", type=int, choices=(1, 2), help="use the default preset of this example")
    p.add_argument("--baseline", choices=BASELINES, help="run only this comparison")
    p.add_argument("--paths", type=int, help="number of replications")
    p.add_argument("--steps", type=int, help="number of grid steps")
    p.add_argument("--horizon", type=float, help="time horizon")
    p.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV}, then the config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for replications")
    p.add_argument("--out-dir", default="rdrs_out", help="output directory")
    p.add_argument("--validate-only", action="store_true", help="validate and report, no simulation")
    p.add_argument("--dump-traces", action="store_true", help="also write replication 0 grid traces")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _resolve(args):
    """Config, config path, seed and baselines, or raise ConfigError."""
    name = args.config if args.config else DEFAULT_PRESET[args.example or 1]
    path = resolve_config_path(name)
    cfg = parse_config(path)
    problems = []
    if args.example is not None and args.config and cfg.example != args.example:
        problems.append(f"--example {args.example} contradicts example = {cfg.example} in {path}")
    if args.seed is not None:
        seed = args.seed
    elif os.environ.get(SEED_ENV, "").strip():
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            problems.append(f"${SEED_ENV} is not an integer: {os.environ[SEED_ENV]!r}")
            seed = cfg.seed
    else:
        seed = cfg.seed
    if not 0 <= seed < 2 ** 64:
        problems.append("seed must be an unsigned 64-bit integer")
    if args.threads < 1:
        problems.append("--threads must be >= 1")
    over = {"seed": seed}
    for key in ("paths", "steps", "horizon"):
        if getattr(args, key) is not None:
            over[key] = getattr(args, key)
    if args.baseline:
        baselines = (args.baseline,)
    else:
        baselines = cfg.baselines or DEFAULT_BASELINES[cfg.example]
    over["baselines"] = tuple(baselines)
    for b in baselines:
        try:
            check_baseline(cfg.example, b)
        except ExperimentError as e:
            problems.append(str(e))
    if problems:
        raise ConfigError(problems)
    try:
        cfg = dataclasses.replace(cfg, **over)
    except ExperimentError as e:
        raise ConfigError(str(e).split("; ")) from None
    return cfg, path


def validation_report(cfg) -> tuple[str, bool]:
    """Human-readable check of the utility assumptions and the region faces."""
    lines = [f"config: example {cfg.example}, {cfg.num_users} users, {cfg.paths} paths, "
             f"horizon {cfg.horizon!r}, {cfg.steps} steps, seed {cfg.seed}"]
    kinds = EXAMPLE_KINDS[: cfg.num_users]
    rep = validate_utility_conditions(UtilitySpec(kinds), np.linspace(0.5, 50.0, 8),
                                      np.linspace(100.0, 1500.0, 8), cfg.region)
    for field in ("increasing", "concave", "marginal_increasing_in_pq", "zero_at_origin",
                  "radially_homogeneous"):
        lines.append(f"utility {field}: {'yes' if getattr(rep, field) else 'no'}")
    lines.extend(f"  note: {n}" for n in rep.notes[:10])
    ok = True
    rng = np.random.default_rng(cfg.seed)
    for j in range(1, cfg.num_users + 1):
        try:
            good, bad = validate_boundary_property(cfg.region, [j], 200, rng)
        except RegionError as e:
            good, bad = False, str(e)
        ok = ok and good
        lines.append(f"region face without user {j}: {'ok' if good else f'violated {bad}'}")
    return "\n".join(lines) + "\n", ok


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _summary(cfg, config_path, results) -> str:
    out = [f"example {cfg.example} ({cfg.name}), seed {cfg.seed}, paths {cfg.paths}, "
           f"horizon {cfg.horizon!r}, steps {cfg.steps}",
           "terminal values at t = T, mtcd is dynamic minus baseline, +/- one standard error"]
    for b, s in results:
        label = b
        if b == "2dqueue":
            label = "2dqueue (componentwise-reflected stand-in, not the one-dimensional model)"
        out.append(f"{label}: mtcd {float(s.mtcd[-1])!r} +/- {float(s.stderr[-1])!r}; mean cost dynamic "
                   f"{float(s.mean_cost_dynamic[-1])!r}, baseline {float(s.mean_cost_baseline[-1])!r}; "
                   f"fixed point fallbacks {s.nonconverged}")
    return "\n".join(out) + "\n"


def run(cfg, config_path, out_dir: Path, threads: int = 1, dump_traces: bool = False) -> list[Path]:
    t0 = time.perf_counter()
    results = [(b, run_comparison(cfg, b, threads=threads)) for b in cfg.baselines]
    traces = []
    if dump_traces:
        traces = [(b, replication_paths(cfg, b, 0)) for b in cfg.baselines]
    elapsed = time.perf_counter() - t0

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for b, s in results:
        path = out_dir / f"mtcd_example{cfg.example}_{b}.csv"
        write_mtcd_csv(s, path)
        written.append(path)
    for b, (dyn, base) in traces:
        for tag, p in (("dynamic", dyn), ("baseline", base)):
            path = out_dir / f"trace_example{cfg.example}_{b}_{tag}.csv"
            write_path_csv(p, path)
            written.append(path)
    summary = out_dir / "summary.txt"
    summary.write_text(_summary(cfg, config_path, results), encoding="utf-8", newline="\n")
    written.append(summary)

    lines = [f"config {config_path}", f"seed {cfg.seed}", f"out_dir {out_dir}",
             f"replications {cfg.paths} per comparison, {len(results)} comparisons",
             f"wall_clock_seconds {elapsed:.3f}"]
    lines += [f"sha256 {_sha256(p)}  {p.name}" for p in written]
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return written


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, path = _resolve(args)
    except ConfigError as e:
        for p in e.problems:
            print(f"rdrs-lab: error: {p}", file=sys.stderr)
        return 2
    if args.validate_only:
        text, ok = validation_report(cfg)
        sys.stdout.write(text)
        return 0 if ok else 1
    try:
        written = run(cfg, path, Path(args.out_dir), args.threads, args.dump_traces)
    except (ExperimentError, ValueError, RuntimeError) as e:
        print(f"rdrs-lab: error: {e}", file=sys.stderr)
        return 1
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
