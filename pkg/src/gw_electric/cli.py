"""``gw-electric`` command line.

Usage: ``gw-electric <subcommand> --config path [--seed u64] [--out dir]``.
Exit status is 0 on success, 2 for configuration errors and 3 when a
compute budget is exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import BudgetError, ConfigError, GWElectricError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

# subcommand -> (mode, overrides it accepts)
_MODES = {
    "constants": (None, set()),
    "simulate-tree": ("tree", {"seed", "depths", "trees"}),
    "pool": ("pool", {"seed", "N", "replicates", "n_max"}),
    "fit-expansion": ("pool", {"seed", "N", "replicates", "n_max"}),
    "lambda": ("lambda", {"seed", "N", "replicates", "n_max", "lam"}),
    "oracle-check": ("oracle", {"seed", "trials"}),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _depths(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            a, b = part.split(":")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("depths must be positive integers, e.g. 1:10 or 4,8,16")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gw-electric", description="Branching random electric networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="experiment config (JSON)")
        sp.add_argument("--out", help="output directory (default: config output.dir or ./out)")
        return sp

    c = common(sub.add_parser("constants", help="analytic constants of a law pair"))
    c.add_argument("--json", action="store_true", help="print JSON instead of a table")

    for name, help_ in (
        ("simulate-tree", "exact conductances of sampled trees"),
        ("pool", "pool moment trajectory"),
        ("fit-expansion", "pool trajectory with c0 estimate and log-correction fit"),
        ("lambda", "exponentially weighted pool and rescaled sequence"),
        ("oracle-check", "cross-check the engines against small-network oracles"),
    ):
        sp = common(sub.add_parser(name, help=help_), config_required=name != "oracle-check")
        sp.add_argument("--seed", type=_u64)
        sp.add_argument("--depths", type=_depths)
        sp.add_argument("--trees", type=int)
        sp.add_argument("--N", type=int, dest="N")
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--n-max", type=int, dest="n_max")
        sp.add_argument("--lambda", type=float, dest="lam")
        if name == "oracle-check":
            sp.add_argument("--network", help="edge-list file ('u v r' per line)")
            sp.add_argument("--trials", type=int)

    r = sub.add_parser("report", help="markdown, CSV and SVG summary of stored runs")
    r.add_argument("runs", nargs="+", help="run ids or run directories")
    r.add_argument("--runs-dir", default="out")
    r.add_argument("--out", default="report")
    return p


def _overrides(args, command: str) -> dict:
    allowed = _MODES[command][1]
    given = {
        k: getattr(args, k, None)
        for k in ("seed", "depths", "trees", "N", "replicates", "n_max", "lam", "trials")
        if getattr(args, k, None) is not None
    }
    bad = sorted(set(given) - allowed)
    if bad:
        flags = ", ".join("--" + b.replace("_", "-").replace("lam", "lambda") for b in bad)
        raise ConfigError(f"{flags} does not apply to '{command}'")
    return given


def _load_config(args, command):
    from .harness import ExperimentConfig

    mode = _MODES[command][0]
    ov = _overrides(args, command)
    dotted = {
        "mode": mode,
        "seed": ov.get("seed"),
        "tree.depths": ov.get("depths"),
        "tree.trees": ov.get("trees"),
        "pool.size": ov.get("N"),
        "pool.replicates": ov.get("replicates"),
        "pool.n_max": ov.get("n_max"),
        "pool.lambda": ov.get("lam"),
        "oracle.walk_trials": ov.get("trials"),
    }
    if mode is None:
        dotted.pop("mode")
    return ExperimentConfig.from_file(args.config, **dotted)


def _print_table(rows: dict, indent: str = "") -> None:
    width = max(len(k) for k in rows)
    for k, v in rows.items():
        if isinstance(v, dict):
            print(f"{indent}{k}:")
            _print_table(v, indent + "  ")
        else:
            print(f"{indent}{k.ljust(width)}  {v!r}" if isinstance(v, float) else f"{indent}{k.ljust(width)}  {v}")


def cmd_constants(args) -> int:
    import hashlib

    from .harness import constants_table, load_laws

    off, res = load_laws(args.config)
    table = constants_table(off, res)
    text = json.dumps(table, indent=1) + "\n"
    if args.json:
        sys.stdout.write(text)
    else:
        _print_table(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        key = hashlib.sha256(json.dumps([off.to_dict(), res.to_dict()], sort_keys=True).encode()).hexdigest()
        (out / f"constants-{key[:16]}.json").write_text(text)
    return EXIT_OK


def _summary(rec) -> dict:
    keys = ("fit", "c0", "pool", "lambda", "oracle", "theorem1", "theorem4", "resistance_limit", "inverse_w")
    return {k: rec.derived[k] for k in keys if k in rec.derived}


def cmd_run(args, command) -> int:
    from .harness import _plain, run_experiment, write_result

    cfg = _load_config(args, command)
    if command == "fit-expansion":
        p = cfg.section("pool")
        if not p.get("fit"):
            raise ConfigError("fit-expansion needs 'pool.fit' = [n_lo, n_hi] in the config")
    rec = run_experiment(cfg)
    path = write_result(rec, cfg, args.out)
    print(f"run {rec.run_id} ({rec.mode}) written to {path}")
    summary = _summary(rec)
    if summary:
        print(json.dumps(_plain(summary), indent=1))
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.network is None:
        return cmd_run(args, "oracle-check")
    from .oracles import (
        effective_resistance_laplacian,
        random_walk_conductance,
        read_edge_list,
        series_parallel_reduce,
    )
    from .errors import LeavesAtMixedDepth, NotATree

    if args.config is not None or any(
        getattr(args, k) is not None for k in ("depths", "trees", "N", "replicates", "n_max", "lam")
    ):
        raise ConfigError("--network cannot be combined with --config or tree/pool overrides")
    net = read_edge_list(args.network)
    out = {"vertices": net.n_vertices, "edges": int(len(net.edges)), "source": net.source, "sinks": list(net.sinks)}
    out["laplacian_resistance"] = effective_resistance_laplacian(net)
    try:
        out["series_parallel_resistance"] = series_parallel_reduce(net)
    except (NotATree, LeavesAtMixedDepth) as exc:
        out["series_parallel_resistance"] = None
        out["series_parallel_note"] = str(exc)
    trials = args.trials or 100_000
    w = random_walk_conductance(net, trials, args.seed or 0)
    out["walk_conductance"] = float(w.conductance)
    out["walk_se"] = float(w.se)
    out["walk_z"] = float((w.conductance - 1.0 / out["laplacian_resistance"]) / w.se) if w.se > 0 else 0.0
    print(json.dumps(out, indent=1))
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import resolve_run, write_report

    records = [resolve_run(r, args.runs_dir) for r in args.runs]
    for path in write_report(records, args.out):
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "constants":
            return cmd_constants(args)
        if args.command == "report":
            return cmd_report(args)
        if args.command == "oracle-check":
            return cmd_oracle(args)
        return cmd_run(args, args.command)
    except ConfigError as exc:
        print(f"gw-electric: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"gw-electric: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except GWElectricError as exc:
        print(f"gw-electric: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
