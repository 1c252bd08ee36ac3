"""Command-line entry point: ``randstir <command> [options]``.

Commands: ``returns-limit``, ``limit-sim``, ``couple``, ``stationarity``,
``exact-check``.  Each writes a results file (CSV or JSON) that embeds the
full configuration, plus a ``<out>.manifest.json`` sidecar.  Exit status is
0 when every enabled check passes, 1 when a check fails and 2 on a usage or
configuration error.

Options may also come from ``--config FILE`` holding ``key = value`` lines
keyed by flag name; explicit flags win over the file.
"""

import argparse
import configparser
import csv
import io
import json
import math
import secrets
import sys
from pathlib import Path

from . import __version__, _rng
from .coupling import TABLE_COLUMNS, convergence_experiment
from .limit import limit_experiment
from .stationary import EPS_TRUNC, stationarity_experiment
from .stirring import enumerate_exact, reduced_exact, returns_limit_experiment, total_variation

COMMANDS = ("returns-limit", "limit-sim", "couple", "stationarity", "exact-check")


class ConfigError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _n_list(text):
    try:
        values = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n list {text!r}") from None
    if not values or min(values) <= 0:
        raise argparse.ArgumentTypeError("n list must be nonempty and positive")
    return values


def _seed(text):
    if str(text) == "random":
        return "random"
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be nonnegative")
    return value


def _common(p, reps):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=_seed, default=_rng.DEFAULT_SEED,
                   help="master seed, or 'random'")
    p.add_argument("--reps", type=_positive_int, default=reps, help="replications")
    p.add_argument("--out", help="output path (default: <command>.<format>)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=_positive_int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="randstir", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"randstir {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("returns-limit", help="Poisson limit of the return counts")
    _common(p, 100_000)
    p.add_argument("--n", type=_positive_int, default=10_000)
    p.add_argument("--T", type=_positive_float, default=2.0)

    p = sub.add_parser("limit-sim", help="event logs of the limit process")
    _common(p, 1000)
    p.add_argument("--T", type=_positive_float, default=2.0)

    p = sub.add_parser("couple", help="distance between coupled processes")
    _common(p, 1000)
    p.add_argument("--n", type=_n_list, default=[100, 1000, 10_000, 100_000])
    p.add_argument("--T", type=_positive_float, default=2.0)
    p.add_argument("--check-rate", action="store_true",
                   help="fail unless the log-log slope lies in [-0.7, -0.3]")

    p = sub.add_parser("stationarity", help="invariance of mu under split-and-merge")
    _common(p, 100_000)
    p.add_argument("--chain-steps", type=int, default=1)
    p.add_argument("--eps-trunc", type=_positive_float, default=EPS_TRUNC)

    p = sub.add_parser("exact-check", help="direct model vs reduced chain, exactly")
    _common(p, 1)
    p.add_argument("--n", type=_positive_int, default=3)
    p.add_argument("--steps", type=int, default=2)
    return parser


def _read_config(path, subparser):
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    known = {a.dest: a for a in subparser._actions if a.option_strings}
    values = {}
    for key, raw in cp["config"].items():
        dest = key.lstrip("-").replace("-", "_")
        if dest in ("config", "help") or dest not in known:
            raise ConfigError(f"unknown config key {key!r}")
        action = known[dest]
        raw = raw.strip().strip('"').strip("'")
        if isinstance(action, argparse._StoreTrueAction):
            values[dest] = raw.lower() in ("1", "true", "yes", "on")
            continue
        try:
            values[dest] = action.type(raw) if action.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
        if action.choices and values[dest] not in action.choices:
            raise ConfigError(f"bad value for {key!r}: {raw!r}")
    return values


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        try:
            subparser.set_defaults(**_read_config(args.config, subparser))
        except (ConfigError, OSError) as exc:
            parser.error(str(exc))
        args = parser.parse_args(argv)
    if getattr(args, "chain_steps", 0) < 0 or getattr(args, "steps", 0) < 0:
        parser.error("step counts must be nonnegative")
    if args.seed == "random":
        args.seed = secrets.randbits(32)
    return args


def _config_echo(args):
    # thread count and destination do not affect results
    cfg = {k: v for k, v in vars(args).items() if k not in ("config", "threads", "out")}
    cfg["version"] = f"v{__version__}"
    return cfg


def _run_returns_limit(args):
    results = returns_limit_experiment(args.n, args.T, args.reps, args.seed, args.threads)
    rows = [r.as_dict() for r in results]
    return rows, {}, all(r.passed for r in results)


def _run_limit_sim(args):
    records, gof, bad = limit_experiment(args.T, args.reps, args.seed)
    rows = [{**r, "tail": " ".join(repr(m) for m in r["tail"])} for r in records]
    summary = {"invariant_violations": bad, "events": len(records)}
    ok = bad == 0
    if gof is not None:
        summary["jump_count_gof"] = gof.as_dict()
        ok = ok and gof.passed
    return rows, summary, ok


def _run_couple(args):
    result = convergence_experiment(args.n, args.T, args.reps, args.seed, args.threads)
    summary = result.summary()
    ok = True
    if args.check_rate:
        ok = -0.7 <= result.slope <= -0.3
        summary["rate_check"] = ok
    return result.rows, summary, ok


def _run_stationarity(args):
    report = stationarity_experiment(args.reps, args.chain_steps, args.seed, args.eps_trunc,
                                     args.threads)
    d = report.as_dict()
    rows = d.pop("statistics")
    return rows, d, report.passed


def _run_exact_check(args):
    direct = enumerate_exact(args.n, args.steps)
    reduced = reduced_exact(args.n, args.steps)
    tv = total_variation(direct, reduced)
    keys = sorted(set(direct) | set(reduced), key=lambda v: (-v.active, [-m for m in v.tail]))
    rows = [
        {
            "outcome": str(k),
            "direct": str(direct.get(k, 0)),
            "reduced": str(reduced.get(k, 0)),
            "probability": float(direct.get(k, 0)),
        }
        for k in keys
    ]
    return rows, {"total_variation": float(tv)}, tv <= 1e-12


RUNNERS = {
    "returns-limit": _run_returns_limit,
    "limit-sim": _run_limit_sim,
    "couple": _run_couple,
    "stationarity": _run_stationarity,
    "exact-check": _run_exact_check,
}


def _columns(command, rows):
    if command == "couple":
        return list(TABLE_COLUMNS)
    return list(rows[0]) if rows else []


def render(command, rows, summary, config, fmt):
    """Serialize one result set; output is a pure function of the inputs."""
    if fmt == "json":
        doc = {"manifest": config, "rows": rows, "summary": summary}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# randstir {command} v{__version__}\n")
    buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    writer = csv.DictWriter(buf, fieldnames=_columns(command, rows), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    buf.write("# summary: " + json.dumps(summary, sort_keys=True) + "\n")
    return buf.getvalue()


def run(args):
    """Execute a parsed configuration; return the exit status."""
    rows, summary, ok = RUNNERS[args.command](args)
    config = _config_echo(args)
    out = Path(args.out or f"{args.command}.{args.format}")
    out.write_text(render(args.command, rows, summary, config, args.format))
    manifest = {"config": config, "seed": args.seed, "version": f"v{__version__}",
                "output": out.name, "passed": bool(ok)}
    out.with_name(out.name + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    status = "PASS" if ok else "FAIL"
    print(f"{status} {args.command}: wrote {out}")
    if summary:
        print(json.dumps(summary, sort_keys=True))
    return 0 if ok else 1


def main(argv=None):
    args = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        return run(args)
    except ValueError as exc:
        print(f"randstir: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
