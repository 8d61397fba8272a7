"""Command-line front end.

Subcommands::

    repeater-dp optimize --scheme ctsl --L 110 --F 0.976 --out proto.json
    repeater-dp baseline --scheme bdcz --L 330 --F 0.95 --m 2
    repeater-dp profile  --scheme bdcz --L 20:1280:20 --F 0.90:0.97:0.01 --out t.csv
    repeater-dp simulate proto.json --trials 10000 --seed 7 --out dist.json

Exit codes: 0 success, 1 usage error, 2 target infeasible, 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import baseline, protocol, simulate
from .config import RunConfig, load_config, with_overrides
from .noise import ErrorShape, HardwareParams
from .planner import ConfigError, DPTable, to_units

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _probability(text: str) -> float:
    v = float(text)
    if not 0.5 < v < 1.0:
        raise argparse.ArgumentTypeError(f"fidelity must lie in (0.5, 1), got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _values(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (inclusive stop)."""
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list {text!r}") from None


def _unit(text: str) -> float:
    table = {"10km": None, "1km": 1.0}
    if text not in table:
        raise argparse.ArgumentTypeError("unit must be 10km or 1km")
    return table[text]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="repeater-dp", description="Plan and check quantum-repeater protocols.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, ranges=False):
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--scheme", choices=("bdcz", "ctsl"))
        sp.add_argument("--out", help="output path (default: standard output)")
        if ranges:
            sp.add_argument("--L", type=_values, required=True, help="distances in km: list or start:stop:step")
            sp.add_argument("--F", type=_values, required=True, help="target fidelities: list or start:stop:step")
        else:
            sp.add_argument("--L", type=float, required=True, help="distance in km")
            sp.add_argument("--F", type=_probability, required=True, help="target fidelity")

    def planner_flags(sp):
        sp.add_argument("--window", type=_positive_int)
        sp.add_argument("--mmax", type=int)
        sp.add_argument("--no-multilevel", action="store_true")
        sp.add_argument("--no-nodeskip", action="store_true")
        sp.add_argument("--unit", type=_unit, default="10km", help="distance unit: 10km or 1km")

    opt = sub.add_parser("optimize", help="fastest protocol for (L, F)")
    common(opt)
    planner_flags(opt)

    base = sub.add_parser("baseline", help="fixed-pattern reference protocol")
    common(base)
    base.add_argument("--m", type=int, help="pumping steps per level (default: smallest that works)")

    prof = sub.add_parser("profile", help="optimized vs baseline times over a grid")
    common(prof, ranges=True)
    planner_flags(prof)
    prof.add_argument("--m", type=int, help="baseline pumping steps per level")

    simp = sub.add_parser("simulate", help="Monte Carlo completion times of a protocol file")
    simp.add_argument("protocol", help="protocol JSON written by optimize or baseline")
    simp.add_argument("--config")
    simp.add_argument("--trials", type=int)
    simp.add_argument("--seed", type=int)
    simp.add_argument("--out", help="summary JSON path (default: standard output)")
    simp.add_argument("--samples-csv", help="write raw samples here")
    return p


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    over = {"scheme": args.scheme}
    if hasattr(args, "window"):
        over.update(window=args.window, m_max=args.mmax)
        if args.no_multilevel:
            over["allow_multilevel"] = False
        if args.no_nodeskip:
            over["allow_node_skipping"] = False
        if args.unit is not None:
            over["unit_km"] = args.unit
    return with_overrides(cfg, **over)


def _summary(kind, scheme, L, F, result, extra=None) -> dict:
    doc = {"kind": kind, "scheme": scheme, "L_km": L, "F_target": F}
    if not result:
        doc.update(status="infeasible", reason=result.reason, best_fidelity=result.best_fidelity)
    else:
        doc.update(status="ok", avg_time_s=result.avg_time, fidelity=result.protocol.state.f1,
                   tree_nodes=result.protocol.tree_size())
    if extra:
        doc.update(extra)
    return doc


def _finish(args, cfg, kind, result, extra=None) -> int:
    scheme = cfg.planner.scheme
    summary = _summary(kind, scheme, args.L, args.F, result, extra)
    out = args.out or cfg.output.get("protocol")
    summary_path = cfg.output.get("summary")
    if result:
        unit = cfg.planner.unit_km or cfg.hardware.L0
        text = protocol.dumps(result.protocol, scheme=scheme, hp=cfg.hardware.resolved(scheme),
                              unit_km=unit, extra={"target": {"L_km": args.L, "F": args.F}})
        _emit(text, out)
    if summary_path:
        _emit(json.dumps(summary, indent=1), summary_path)
    if out is not None or not result:
        print(json.dumps(summary), file=sys.stderr if not result else sys.stdout)
    return EXIT_OK if result else EXIT_INFEASIBLE


def cmd_optimize(args) -> int:
    cfg = _config(args)
    table = DPTable(cfg.hardware, cfg.grid.build(), cfg.planner)
    result = table.query(args.L, args.F)
    return _finish(args, cfg, "optimized", result,
                   {"evaluations": table.total_evaluations()})


def cmd_baseline(args) -> int:
    cfg = _config(args)
    m = args.m if args.m is not None else cfg.baseline_m
    result = baseline.unoptimized(cfg.planner.scheme, args.L, args.F, cfg.hardware, m)
    return _finish(args, cfg, "baseline", result, {"m": result.m} if result else None)


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ("inf" if x > 0 else "nan")


def cmd_profile(args) -> int:
    cfg = _config(args)
    scheme = cfg.planner.scheme
    m = args.m if args.m is not None else cfg.baseline_m
    table = DPTable(cfg.hardware, cfg.grid.build(), cfg.planner)
    for L in args.L:
        to_units(L, table.unit_km)
    for F in args.F:
        if not 0.5 < F < 1.0:
            raise ConfigError(f"fidelity {F} outside (0.5, 1)")
    table.build(max(to_units(L, table.unit_km) for L in args.L))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "L_km", "F_target", "t_opt_s", "t_base_s", "ratio"])
    for L in args.L:
        for F in args.F:
            opt = table.query(L, F)
            base = baseline.unoptimized(scheme, L, F, cfg.hardware, m)
            t_opt = opt.avg_time if opt else math.inf
            t_base = base.avg_time if base else math.inf
            if math.isinf(t_opt):
                ratio = math.nan
            else:
                ratio = t_base / t_opt
            w.writerow([scheme, _fmt(L), _fmt(F), _fmt(t_opt), _fmt(t_base), _fmt(ratio)])
    _emit(buf.getvalue(), args.out or cfg.output.get("csv"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    trials = args.trials if args.trials is not None else cfg.trials
    seed = args.seed if args.seed is not None else cfg.seed
    if trials < 1:
        print("repeater-dp simulate: error: --trials must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        with open(args.protocol, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.protocol}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise protocol.ProtocolError(f"invalid JSON: {exc}") from None
    root, header = protocol.from_dict(doc)
    hw = dict(header.get("hardware") or {})
    if hw.get("gen_error_shape"):
        hw["gen_error_shape"] = ErrorShape(hw["gen_error_shape"])
    try:
        hp = HardwareParams(**hw)
    except (TypeError, ValueError) as exc:
        raise protocol.ProtocolError(f"bad hardware block: {exc}", "$.hardware") from None
    unit = float(header.get("unit_km", hp.L0))
    protocol.recompute(root, hp, unit)
    dist = simulate.run(root, hp, trials, seed, unit)
    extra = {"analytic_time_s": root.avg_time, "ratio": dist.mean / root.avg_time if root.avg_time else None,
             "fidelity": root.state.f1, "protocol": args.protocol}
    _emit(dist.to_json(extra), args.out or cfg.output.get("summary"))
    samples = args.samples_csv or cfg.output.get("samples_csv")
    if samples:
        _emit(dist.to_csv(), samples)
    return EXIT_OK


COMMANDS = {"optimize": cmd_optimize, "baseline": cmd_baseline, "profile": cmd_profile,
            "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except protocol.ProtocolError as exc:
        print(f"repeater-dp: invalid protocol: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"repeater-dp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
