"""Command-line entry point.

Commands write their outputs plus a run manifest (``<out>.manifest.json``)
recording the arguments, input digests, seeds and output digests.
``replay <manifest>`` re-executes a run; with ``--verify`` the outputs go to
a scratch directory and their digests are checked against the manifest.

Exit codes: 0 ok, 2 usage or configuration error, 3 infeasible,
4 internal solver diagnostic.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from .baselines import average_rate_plan, instantaneous_rate_plan, periodic_sampling_plan
from .errors import Infeasible, IterationLimit, MonotonicityViolation, WhollyInfeasible
from .evaluator import REPORT_COLUMNS, monte_carlo_eval, report_row
from .graph import solve_p2
from .pareto import sweep_frontier
from .scenario import ConfigError, Scenario, ScenarioConfig, build_scenario

log = logging.getLogger("aoipareto")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4

# argument names holding output paths, per command
OUTPUT_ARGS = {
    "scenario": ("out",),
    "frontier": ("out", "json", "dump_graph"),
    "compare": ("out", "traces"),
}
INPUT_ARGS = {"scenario": ("config", "trajectory"), "frontier": ("scenario",), "compare": ("scenario",)}


class UsageError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} file {path} is not valid JSON: {exc}") from None


def _load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise UsageError(f"scenario file not found: {path}") from None
    try:
        return Scenario.from_json(text)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"scenario file {path} is malformed: {exc}") from None


# ---------------------------------------------------------------------------
# commands


def _config_fields():
    return [f for f in dataclasses.fields(ScenarioConfig) if f.name not in ("seed", "kappa_range")]


def cmd_scenario(args) -> list[str]:
    doc = _read_json(args.config, "config")
    if not isinstance(doc, dict):
        raise UsageError(f"config file {args.config} must hold a JSON object")
    doc = dict(doc)
    for f in _config_fields():
        v = getattr(args, f.name, None)
        if v is not None:
            doc[f.name] = v
    if args.kappa_range is not None:
        doc["kappa_range"] = list(args.kappa_range)
    doc["seed"] = args.seed
    cfg = ScenarioConfig.from_dict(doc)
    traj = None
    if args.trajectory:
        traj = _read_json(args.trajectory, "trajectory")
    sc = build_scenario(cfg, trajectory=traj)
    Path(args.out).write_text(sc.to_json())
    return [args.out]


def cmd_frontier(args) -> list[str]:
    sc = _load_scenario(args.scenario)
    fr = sweep_frontier(sc.stats, sc.config, workers=args.threads, dump_graph=args.dump_graph)
    fr.write_csv(args.out)
    outs = [args.out]
    if args.json:
        Path(args.json).write_text(json.dumps(fr.to_dict(), sort_keys=True))
        outs.append(args.json)
    if args.dump_graph:
        outs.append(args.dump_graph)
    return outs


SCHEME_BUILDERS = {
    "proposed": lambda st, cfg, th, w: solve_p2(st, th, cfg.tau_bar_slots, cfg.p_bar_w, cfg.v_bar_bits, workers=w),
    "periodic": lambda st, cfg, th, w: periodic_sampling_plan(st, cfg, th),
    "instantaneous": lambda st, cfg, th, w: instantaneous_rate_plan(st, cfg, th),
    "average": lambda st, cfg, th, w: average_rate_plan(st, cfg, th),
}


def cmd_compare(args) -> list[str]:
    sc = _load_scenario(args.scenario)
    st, cfg = sc.stats, sc.config
    thetas = args.thetas or list(range(1, st.K + 1))
    if any(t < 1 for t in thetas):
        raise UsageError("--thetas entries must be >= 1")
    rows = []
    traces = []
    for th in thetas:
        for scheme, build in SCHEME_BUILDERS.items():
            try:
                strat = build(st, cfg, th, args.threads)
            except Infeasible as exc:
                log.info("%s infeasible at theta=%d: %s", scheme, th, exc)
                rows.append(report_row(None, scheme, th, args.runs, args.seed))
                continue
            rep = monte_carlo_eval(strat, st, cfg, args.runs, args.seed, keep_traces=bool(args.traces))
            rows.append(report_row(rep))
            if args.traces:
                traces.append((scheme, th, rep))
    with open(args.out, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(REPORT_COLUMNS)
        wr.writerows(rows)
    outs = [args.out]
    if args.traces:
        with open(args.traces, "w") as fh:
            for scheme, th, rep in traces:
                for r, tr in enumerate(rep.per_run_traces):
                    fh.write(json.dumps({"scheme": scheme, "theta": th, "run": r, **tr}, sort_keys=True) + "\n")
        outs.append(args.traces)
    return outs


COMMANDS = {"scenario": cmd_scenario, "frontier": cmd_frontier, "compare": cmd_compare}


# ---------------------------------------------------------------------------
# manifests


def _manifest_path(args) -> Path:
    return Path(str(args.out) + ".manifest.json")


def _recorded_args(args) -> dict:
    skip = {"func", "log_level", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def write_manifest(args, outputs, started: float, elapsed: float) -> Path:
    cmd = args.command
    inputs = {}
    for name in INPUT_ARGS.get(cmd, ()):
        p = getattr(args, name, None)
        if p:
            inputs[name] = {"path": str(p), "sha256": _sha256(p)}
    recorded = _recorded_args(args)
    digest = hashlib.sha256(json.dumps({"command": cmd, "args": recorded, "inputs": inputs}, sort_keys=True).encode()).hexdigest()
    seeds = {k: recorded[k] for k in ("seed",) if k in recorded}
    doc = {
        "command": cmd,
        "args": recorded,
        "inputs": inputs,
        "config_digest": digest,
        "seeds": seeds,
        "tool_version": __version__,
        "started_unix": started,
        "wall_clock_s": elapsed,
        "outputs": {str(p): _sha256(p) for p in outputs},
    }
    path = _manifest_path(args)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2))
    return path


def _args_from_manifest(doc: dict, redirect: Path | None = None) -> argparse.Namespace:
    cmd = doc["command"]
    if cmd not in COMMANDS:
        raise UsageError(f"manifest names unknown command {cmd!r}")
    rec = dict(doc["args"])
    mapping = {}
    if redirect is not None:
        for name in OUTPUT_ARGS[cmd]:
            if rec.get(name):
                new = str(redirect / (name + "_" + Path(rec[name]).name))
                mapping[rec[name]] = new
                rec[name] = new
    ns = argparse.Namespace(command=cmd, func=COMMANDS[cmd], log_level="WARNING", **rec)
    ns._redirect = mapping
    return ns


def cmd_replay(args) -> int:
    doc = _read_json(args.manifest, "manifest")
    for name, info in doc.get("inputs", {}).items():
        if not os.path.exists(info["path"]):
            raise UsageError(f"manifest input {name} missing: {info['path']}")
        if _sha256(info["path"]) != info["sha256"]:
            raise UsageError(f"manifest input {name} changed since the recorded run: {info['path']}")
    if not args.verify:
        ns = _args_from_manifest(doc)
        return _run(ns)
    scratch = Path(tempfile.mkdtemp(prefix="aoipareto-replay-"))
    try:
        ns = _args_from_manifest(doc, redirect=scratch)
        outputs = ns.func(ns)
        back = {v: k for k, v in ns._redirect.items()}
        bad = []
        for p in outputs:
            orig = back.get(str(p), str(p))
            if doc["outputs"].get(orig) != _sha256(p):
                bad.append(orig)
        if bad:
            print(f"replay differs for: {', '.join(bad)}", file=sys.stderr)
            return EXIT_INTERNAL
        print(f"replay reproduced {len(outputs)} output(s) byte-identically")
        return EXIT_OK
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


# ---------------------------------------------------------------------------
# parser


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aoipareto", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=1, help="worker cap for edge-weight computation")
    ap.add_argument("--log-level", default="WARNING")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="generate a synthetic scenario")
    p.add_argument("--config", required=True, help="JSON file with ScenarioConfig fields")
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trajectory", help="JSON list of T [x, y, z] points replacing the circle")
    for f in _config_fields():
        kind = int if f.type in ("int", int) else float
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind, default=None)
    p.add_argument("--kappa-range", type=float, nargs=2, default=None, metavar=("KMIN", "KMAX"))
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("frontier", help="sweep the load cap and write the Pareto frontier")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="frontier CSV")
    p.add_argument("--json", help="frontier JSON including strategies")
    p.add_argument("--dump-graph", help="CSV of the timing graph at the largest frontier cap")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("compare", help="all schemes over a cap grid with Monte Carlo evaluation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--thetas", type=_int_list, default=None, help="comma-separated caps (default 1..K)")
    p.add_argument("--traces", help="per-run AoI traces as JSON lines")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("replay", help="re-run a recorded command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--verify", action="store_true", help="run in a scratch directory and compare output digests")
    p.set_defaults(func=None)
    return ap


def _run(args) -> int:
    started = time.time()
    t0 = time.perf_counter()
    outputs = args.func(args)
    write_manifest(args, outputs, started, time.perf_counter() - t0)
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.command == "replay":
            return cmd_replay(args)
        if getattr(args, "runs", 1) < 1:
            raise UsageError("--runs must be >= 1")
        return _run(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WhollyInfeasible, Infeasible) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (MonotonicityViolation, IterationLimit) as exc:
        print(f"solver diagnostic: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
