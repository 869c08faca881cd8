"""``simulate`` command line entry point."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from lbapc.controller import CausalityViolation
from lbapc.harness import (
    AXES, POLICIES, ConfigError, load_config, run, sweep,
    trace_name, write_summary, write_trace,
)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate",
                                description="Run the LBAPC / greedy network simulator.")
    p.add_argument("--config", required=True, help="INI experiment config")
    p.add_argument("--policy", help=f"one of {', '.join(POLICIES)}, or a comma list")
    p.add_argument("--seed", type=int)
    p.add_argument("--slots", type=int)
    p.add_argument("--sweep", metavar="AXIS", help=f"one of {', '.join(AXES)}")
    p.add_argument("--values", help="comma-separated axis values (with --sweep)")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--trace", action="store_true", help="also write per-slot trace CSVs")
    p.add_argument("--replicates", type=int)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        policies = args.policy.split(",") if args.policy else [cfg.policy]
        overrides = {k: getattr(args, k) for k in ("seed", "slots", "replicates")
                     if getattr(args, k) is not None}
        if args.trace:
            overrides["trace"] = True
        cfg = cfg.replace(policy=policies[0], **overrides)
        for p in policies[1:]:
            cfg.replace(policy=p)  # raises on an unknown name before any run starts
        if (args.sweep is None) != (args.values is None):
            raise ConfigError("--sweep and --values must be given together")

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.sweep:
            if args.sweep not in AXES:
                raise ConfigError(f"unknown sweep axis {args.sweep!r}; choose from {', '.join(AXES)}")
            try:
                values = [float(v) for v in args.values.split(",")]
            except ValueError as exc:
                raise ConfigError(f"--values: {exc}") from exc
            rows = sweep(cfg.replace(trace=False), args.sweep, values, policies, args.jobs)
            triples = [(args.sweep, v, m) for v, m in rows]
            if cfg.trace:
                # traces are re-run individually so sweeps stay memory-light
                triples = []
                for v, m in rows:
                    point = cfg.with_axis(args.sweep, v).replace(policy=m.policy)
                    full = run(point, m.replicate, keep_trace=True)
                    write_trace(out / trace_name(full, args.sweep, v), full)
                    triples.append((args.sweep, v, full))
        else:
            triples = []
            for p in policies:
                for r in range(cfg.replicates):
                    m = run(cfg.replace(policy=p), r)
                    if cfg.trace:
                        write_trace(out / trace_name(m), m)
                    triples.append(("", None, m))
        write_summary(out / "summary.csv", triples)
    except (ConfigError, CausalityViolation, AssertionError) as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return 2
    for axis, value, m in triples:
        tag = f"{axis}={value} " if axis else ""
        print(f"{tag}{m.policy} seed={m.seed} r={m.replicate}: nsc={m.time_avg_nsc:.6g} "
              f"grid_W={m.grid_power_avg:.6g} drop={m.drop_ratio:.4g}")
    print(f"wrote {out / 'summary.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
