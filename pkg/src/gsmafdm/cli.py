"""Command-line front end: ber, bound, capacity and complexity sweeps.

Configuration comes from a flat key=value file; a handful of flags override
the common fields and --set covers the rest.  Exit code 2 signals a
configuration problem.
"""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigurationError, GsmAfdmError
from .sim import (SimConfig, complexity_table, emit_curve_csv, emit_plot_svg,
                  run_ber_sweep, run_bound_sweep, run_capacity_sweep)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--snr", help="comma-separated SNR list in dB")
    p.add_argument("--detector", help="detector name")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--plot", action="store_true", help="also write an SVG plot")
    p.add_argument("--workers", type=int, help="parallel workers")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field")


def _build_config(args) -> SimConfig:
    cfg = SimConfig.from_file(args.config) if args.config else SimConfig()
    d = cfg.to_dict()
    if args.snr:
        d["snr_db"] = args.snr
    if args.detector:
        d["detector"] = args.detector
    if args.seed is not None:
        d["master_seed"] = args.seed
    if args.workers is not None:
        d["workers"] = args.workers
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        d[key.strip()] = value.strip()
    cfg = SimConfig.from_dict(d)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gsm-afdm",
        description="Link-level sweeps for spatially modulated chirp-carrier MIMO")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("ber", "Monte-Carlo BER sweep"),
                      ("bound", "union-bound BER sweep"),
                      ("capacity", "discrete-input capacity sweep"),
                      ("complexity", "detector operation-count comparison")):
        sp = sub.add_parser(name, help=doc)
        _add_common(sp)
        if name == "capacity":
            sp.add_argument("--samples", type=int, help="Monte-Carlo samples")
        if name == "complexity":
            sp.add_argument("--frames", type=int, default=200,
                            help="fixed frame budget for the shared instance set")
            sp.add_argument("--detectors", default=None,
                            help="comma list like lmmse-mld,grcd:1,rscd:3")
    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args)
        out = args.out or f"{args.command}.csv"
        if args.command == "ber":
            curve = run_ber_sweep(cfg)
            emit_curve_csv(curve, out, kind="ber")
            for pt in curve.points:
                flag = " low-confidence" if curve.low_confidence(pt) else ""
                print(f"snr {pt.snr_db:6.2f} dB  ber {pt.ber:.4e}  "
                      f"errors {pt.errors}  bits {pt.bits}{flag}")
            if args.plot:
                emit_plot_svg(curve, out.rsplit(".", 1)[0] + ".svg", kind="ber")
        elif args.command == "bound":
            rows = run_bound_sweep(cfg)
            emit_curve_csv(rows, out, kind="bound", cfg=cfg)
            for row in rows:
                flag = f" {row['flag']}" if row["flag"] else ""
                print(f"snr {row['snr_db']:6.2f} dB  bound {row['value']:.4e}{flag}")
            if args.plot:
                emit_plot_svg(rows, out.rsplit(".", 1)[0] + ".svg", kind="bound")
        elif args.command == "capacity":
            if getattr(args, "samples", None):
                cfg = SimConfig.from_dict({**cfg.to_dict(),
                                           "capacity_samples": args.samples})
            rows = run_capacity_sweep(cfg)
            emit_curve_csv(rows, out, kind="capacity", cfg=cfg)
            for row in rows:
                print(f"snr {row['snr_db']:6.2f} dB  capacity {row['value']:.4f} "
                      f"+/- {row['stderr']:.4f}")
            if args.plot:
                emit_plot_svg(rows, out.rsplit(".", 1)[0] + ".svg", kind="capacity")
        elif args.command == "complexity":
            dets = _parse_detectors(args.detectors, cfg)
            budget = SimConfig.from_dict({**cfg.to_dict(),
                                          "max_frames": args.frames,
                                          "min_bit_errors": 10 ** 9})
            rows = complexity_table(budget, dets, cfg.snr_db[0])
            emit_curve_csv(rows, out, kind="complexity", cfg=cfg)
            base = rows[0]["model_ops"] or 1.0
            for row in rows:
                print(f"{row['detector']:28s} model_ops {row['model_ops']:.3e} "
                      f"(x{row['model_ops'] / base:.2f})")
        return 0
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GsmAfdmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _parse_detectors(spec: str | None, cfg: SimConfig) -> list:
    if not spec:
        return [("lmmse-mld", cfg.t1, cfg.t2), ("lmmse-llrd", cfg.t1, cfg.t2),
                ("lmmse-tc-llrd", cfg.t1, cfg.t2), ("grcd", 1, cfg.t2),
                ("rscd", cfg.t1, 1)]
    out = []
    for item in spec.split(","):
        if ":" in item:
            name, arg = item.split(":", 1)
            out.append((name, int(arg), int(arg)))
        else:
            out.append((item, cfg.t1, cfg.t2))
    return out


if __name__ == "__main__":
    raise SystemExit(main())
