"""
Command-line harness: gait generation, training, SSE curves, rule surfaces
and rule-count comparison.

    hflc gait        --out DIR [--frames N]
    hflc train       --out DIR [--size N] [--epochs E] [--parallel]
    hflc curve       --out DIR [--sizes 10,30,40,60,120]
    hflc surface     --out DIR --controller HFL1 --output gamma_L --free x0,beta_L
    hflc count-rules --n 7 --m 3

Every command takes ``--config PATH`` (a JSON run config), ``--seed N`` and
``--out DIR``; flags override config values. Exit codes: 0 success,
2 usage, 3 numeric failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace

from . import anfis, biped, controller, fuzzy, hierarchy
from .anfis import TrainingConfig
from .biped import BipedParams, GaitConfig
from .errors import (
    ArityError,
    CountOverflowError,
    DivergenceError,
    HflcError,
    PartitionError,
    ReachabilityError,
    SignalError,
    ZeroFiringError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

DEFAULT_SIZES = (10, 30, 40, 60, 120)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    gait: GaitConfig = field(default_factory=GaitConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    sizes: tuple = DEFAULT_SIZES
    out: str = "out"
    seed: int = 0

    def validate(self):
        if not self.sizes:
            raise UsageError("sizes must not be empty")
        for s in self.sizes:
            if not 1 <= s <= self.gait.frames:
                raise UsageError(f"size {s} outside [1, {self.gait.frames}] (frames per cycle)")
        return self

    def to_dict(self) -> dict:
        return {
            "gait": dict(self.gait.__dict__),
            "training": self.training.to_dict(),
            "sizes": list(self.sizes),
            "out": self.out,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        unknown = set(doc) - {"gait", "training", "sizes", "out", "seed"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(
                gait=GaitConfig(**doc.get("gait", {})),
                training=TrainingConfig(**doc.get("training", {})),
                sizes=tuple(int(s) for s in doc.get("sizes", DEFAULT_SIZES)),
                out=doc.get("out", "out"),
                seed=int(doc.get("seed", 0)),
            )
        except TypeError as exc:
            raise UsageError(f"bad config: {exc}") from None
        return cfg


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common(parser):
    g = parser.add_argument_group("run options")
    g.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="JSON run config")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS)
    g.add_argument("--parallel", action="store_true", default=argparse.SUPPRESS,
                   help="train sub-controllers concurrently (same results)")
    g.add_argument("--frames", type=int, default=argparse.SUPPRESS, help="frames per gait cycle")
    g.add_argument("--step-length", type=float, default=argparse.SUPPRESS)
    g.add_argument("--clearance", type=float, default=argparse.SUPPRESS)
    g.add_argument("--epochs", type=int, default=argparse.SUPPRESS)
    g.add_argument("--terms", type=int, default=argparse.SUPPRESS, help="terms per input")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hflc", description="Hierarchical fuzzy biped controller experiments")
    _common(p)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gait", help="write the reference gait CSV")
    _common(sp)

    sp = sub.add_parser("train", help="train the 8-controller assembly")
    _common(sp)
    sp.add_argument("--size", type=int, help="training set size (default: largest configured size)")

    sp = sub.add_parser("curve", help="held-out SSE against training size")
    _common(sp)
    sp.add_argument("--sizes", type=_int_list, help="comma-separated training sizes")

    sp = sub.add_parser("surface", help="rule surface of one trained unit")
    _common(sp)
    sp.add_argument("--assembly", metavar="PATH", help="trained bundle (default: OUT/assembly.json)")
    sp.add_argument("--controller", required=True)
    sp.add_argument("--output", required=True, help="output signal of the controller")
    sp.add_argument("--free", required=True, help="two comma-separated input signals")
    sp.add_argument("--fixed", action="append", default=[], metavar="SIGNAL=VALUE",
                    help="value of a non-free input (default: universe midpoint)")
    sp.add_argument("--resolution", type=int, default=31)

    sp = sub.add_parser("count-rules", help="flat against hierarchical rule counts")
    _common(sp)
    sp.add_argument("--n", type=int, default=7, help="number of inputs")
    sp.add_argument("--m", type=int, default=3, help="terms per input")
    return p


def resolve_config(args) -> RunConfig:
    opts = vars(args)
    if "config" in opts:
        try:
            with open(opts["config"]) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {opts['config']}: {exc}") from None
        cfg = RunConfig.from_dict(doc)
    else:
        cfg = RunConfig()
    gait_kw, train_kw = {}, {}
    if "frames" in opts:
        gait_kw["frames"] = opts["frames"]
    if "step_length" in opts:
        gait_kw["step_length"] = opts["step_length"]
    if "clearance" in opts:
        gait_kw["clearance"] = opts["clearance"]
    if "epochs" in opts:
        train_kw["epochs"] = opts["epochs"]
    if "terms" in opts:
        train_kw["m"] = opts["terms"]
    if "seed" in opts:
        cfg.seed = opts["seed"]
        gait_kw["seed"] = opts["seed"]
    # one seed drives the run; the training seed follows it
    train_kw["seed"] = cfg.seed
    cfg.gait = replace(cfg.gait, **gait_kw)
    cfg.training = replace(cfg.training, **train_kw)
    if "out" in opts:
        cfg.out = opts["out"]
    if opts.get("sizes"):
        cfg.sizes = opts["sizes"]
    return cfg


def _write(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _gait(cfg: RunConfig):
    return biped.generate_reference_gait(BipedParams(), cfg.gait)


def cmd_gait(cfg: RunConfig, args) -> int:
    gait = _gait(cfg)
    path = os.path.join(cfg.out, "gait.csv")
    _write(path, biped.gait_to_csv(gait))
    print(f"frames: {len(gait)}  step length: {gait.step_length:g} m  -> {path}")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    size = args.size if args.size is not None else max(cfg.validate().sizes)
    if not 1 <= size <= cfg.gait.frames:
        raise UsageError(f"size {size} outside [1, {cfg.gait.frames}]")
    gait = _gait(cfg)
    assembly, reports = controller.train_assembly(gait, size, cfg.training, parallel=getattr(args, "parallel", False))
    rep_dir = os.path.join(cfg.out, "reports")
    summary = {}
    for spec in assembly.specs:
        for out in spec.outputs:
            test = controller.held_out_set(gait, spec, out, size)
            rep = anfis.with_index(reports[(spec.id, out)], anfis.evaluate_sse(assembly.unit(spec.id, out), test))
            csv_text, _ = anfis.report_files(rep)
            _write(os.path.join(rep_dir, f"{spec.id}_{out.value}.csv"), csv_text)
            summary[f"{spec.id}/{out.value}"] = rep.summary()
    _write(os.path.join(rep_dir, "summary.json"), json.dumps(summary, indent=1, sort_keys=True))
    _write(os.path.join(cfg.out, "assembly.json"), controller.dump_assembly(assembly))
    print(f"trained {len(assembly)} units on {size} samples -> {cfg.out}")
    for key, s in summary.items():
        print(f"  {key:<16} train SSE {s['final_sse']:.3e}  held-out SSE {s['index']:.3e}")
    return EXIT_OK


def cmd_curve(cfg: RunConfig, args) -> int:
    cfg.validate()
    gait = _gait(cfg)
    rows = controller.sse_curve(gait, cfg.sizes, cfg.training, parallel=getattr(args, "parallel", False))
    path = os.path.join(cfg.out, "curve.csv")
    _write(path, controller.curve_to_csv(rows))
    for r in rows:
        print(f"{r.controller} {r.output:<9} size {r.size:>4}  SSE {r.sse:.3e}")
    print(f"-> {path}")
    return EXIT_OK


def _parse_fixed(items) -> dict:
    fixed = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--fixed expects SIGNAL=VALUE, got {item!r}")
        try:
            fixed[biped.signal_id(name.strip())] = float(value)
        except ValueError:
            raise UsageError(f"--fixed value for {name!r} is not a number") from None
    return fixed


def cmd_surface(cfg: RunConfig, args) -> int:
    path = args.assembly or os.path.join(cfg.out, "assembly.json")
    with open(path) as fh:
        assembly = controller.load_assembly(fh.read())
    if args.controller not in {s.id for s in assembly.specs}:
        raise UsageError(f"unknown controller {args.controller!r}")
    free = [s.strip() for s in args.free.split(",")]
    try:
        rows, fixed = controller.surface_grid(
            assembly, args.controller, args.output, free, _parse_fixed(args.fixed), args.resolution
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    stem = os.path.join(cfg.out, f"surface_{args.controller}_{biped.signal_id(args.output).value}")
    _write(stem + ".csv", controller.surface_to_csv(rows))
    sidecar = {
        "controller": args.controller,
        "output": biped.signal_id(args.output).value,
        "free": [biped.signal_id(s).value for s in free],
        "fixed": fixed,
        "resolution": args.resolution,
        "assembly": os.path.basename(path),
    }
    _write(stem + ".json", json.dumps(sidecar, indent=1, sort_keys=True))
    print(f"{len(rows)} grid points -> {stem}.csv")
    return EXIT_OK


def _plan(key: str, n: int):
    if key == "raju":
        return hierarchy.raju_plan(hierarchy.even_groups(n))
    if key == "jellali":
        return hierarchy.jellali_plan(n)
    return hierarchy.joo_plan(n, 2)


def rule_count_table(n: int, m: int) -> dict:
    """Flat and hierarchical totals; entries that overflow are None."""
    if n < 2 or m < 2:
        raise UsageError("count-rules needs n >= 2 and m >= 2")
    table = {}
    for key in ("flat", "raju", "jellali", "joo"):
        try:
            if key == "flat":
                table[key] = fuzzy.flat_rule_count(n, m)
            else:
                table[key] = hierarchy.rule_count_for_arities(hierarchy.plan_arities(_plan(key, n)), m)
        except CountOverflowError:
            table[key] = None
    return table


def cmd_count_rules(cfg: RunConfig, args) -> int:
    n, m = args.n, args.m
    table = rule_count_table(n, m)
    labels = {
        "flat": "flat grid, m^n",
        "raju": f"raju chain, groups {tuple(hierarchy.even_groups(n))}",
        "jellali": "jellali pairwise, (n-1) m^2",
        "joo": "joo, L=2",
    }
    print(f"rule counts for n={n}, m={m}")
    for key, value in table.items():
        print(f"{key}={'overflow' if value is None else value}  # {labels[key]}")
    if None in table.values():
        print("hflc: numeric failure: a rule count exceeds the 64-bit integer range", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {
    "gait": cmd_gait,
    "train": cmd_train,
    "curve": cmd_curve,
    "surface": cmd_surface,
    "count-rules": cmd_count_rules,
}

NUMERIC_ERRORS = (ZeroFiringError, DivergenceError, CountOverflowError, ReachabilityError, ArithmeticError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"hflc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"hflc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"hflc: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SignalError, ArityError, PartitionError) as exc:
        print(f"hflc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HflcError, ValueError) as exc:
        # invalid parameter values (gait or training config)
        print(f"hflc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
