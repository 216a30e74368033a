"""Command-line front end: ``dira verify | bench | inspect | generate``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from .automata import AutomatonFormatError
from .checkpoint import MAGIC, ChecksumError, restore
from .lha import ModelError, generate_acc, parse_lha, write_lha
from .runtime import ConfigError, FaultPlan, RunConfig, RunResult, run_dira, run_ira
from .sim import TRACE_HEADER, seal_trace

EXIT_ERROR = 3


class UsageError(ValueError):
    pass


def _worker_fault(text: str) -> tuple[int, int]:
    j, sep, i = text.partition("@")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected j@i, got {text!r}")
    try:
        return int(j), int(i)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers in {text!r}") from None


def _master_fault(text: str) -> int:
    if not text.startswith("@"):
        raise argparse.ArgumentTypeError(f"expected @i, got {text!r}")
    try:
        return int(text[1:])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer in {text!r}") from None


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not sizes:
        raise argparse.ArgumentTypeError("empty size list")
    return sizes


def _add_run_options(p: argparse.ArgumentParser):
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--mode", choices=("sim", "parallel"), default="sim")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=64)
    p.add_argument("--select-timeout", type=float, default=5.0,
                   help="wall-clock budget for counterexample selection (parallel mode)")
    p.add_argument("--m0", type=int, default=None, help="initial candidate count (default 2N)")
    p.add_argument("--checkpoint-dir", action="append", default=[], metavar="DIR")
    p.add_argument("--format", choices=("text", "json"), default="text")


def config_from_args(args) -> RunConfig:
    faults = FaultPlan(frozenset(getattr(args, "fail_worker", None) or ()),
                       getattr(args, "fail_master", None))
    cfg = RunConfig(workers=args.workers, mode=args.mode, seed=args.seed, max_iterations=args.max_iter,
                    select_timeout=args.select_timeout, m0=args.m0,
                    checkpoint_dirs=tuple(args.checkpoint_dir), faults=faults, output=args.format)
    cfg.validate()
    return cfg


def _load_model(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read model {path}: {exc.strerror or exc}") from None
    return parse_lha(text)


# ---------------------------------------------------------------------------
# verify

def _report(result: RunResult, algorithm: str, deterministic: bool) -> dict:
    v = result.verdict
    out = {"algorithm": algorithm, "verdict": v.kind, "exit_code": v.exit_code}
    if v.witness is not None:
        out["witness"] = list(v.witness.word)
        out["locations"] = list(v.witness.ce.locations)
    if v.reason:
        out["reason"] = v.reason
    out["stats"] = result.stats.to_dict(with_times=not deterministic)
    return out


def _print_text(report: dict, out):
    print(f"verdict: {report['verdict'].upper()}", file=out)
    if "witness" in report:
        print("witness: " + (" ".join(report["witness"]) or "<empty word>"), file=out)
        print("locations: " + " -> ".join(report["locations"]), file=out)
    if "reason" in report:
        print(f"reason: {report['reason']}", file=out)
    st = report["stats"]
    print(f"algorithm: {report['algorithm']}", file=out)
    print(f"iterations: {len(st['iterations'])}  analyses: {st['analyses']}  "
          f"max relaxation dim: {st['max_relaxation_dim']}", file=out)
    if report["algorithm"] == "d-IRA":
        print(f"message bytes: {st['message_bytes']}  model bytes: {st['model_bytes']}  "
              f"restores: {st['restores']}", file=out)
    for it in st["iterations"]:
        assigned = " ".join("{" + ",".join(a) + "}" for a in it["assignments"])
        line = f"  iter {it['iteration']}: vars {assigned} global_states={it['global_states']} " \
               f"candidates={it['candidates']}"
        if it["missing"]:
            line += f" missing={it['missing']}"
        if "wall_time" in it:
            line += f" time={it['wall_time']:.3f}s"
        print(line, file=out)
    if "wall_time" in st:
        print(f"wall time: {st['wall_time']:.3f}s", file=out)


def cmd_verify(args, out=None) -> int:
    out = out or sys.stdout
    h = _load_model(args.model)
    cfg = config_from_args(args)
    if args.ira:
        result = run_ira(h, cfg)
        deterministic = False
        algorithm = "IRA"
    else:
        result = run_dira(h, cfg.workers, cfg)
        deterministic = cfg.mode == "sim"
        algorithm = "d-IRA"
    report = _report(result, algorithm, deterministic)
    if args.trace:
        if not result.trace:
            raise UsageError("--trace is only available for simulated d-IRA runs")
        Path(args.trace).write_text(seal_trace(result.trace))
    if cfg.output == "json":
        print(json.dumps(report, sort_keys=True), file=out)
    else:
        _print_text(report, out)
    return result.verdict.exit_code


# ---------------------------------------------------------------------------
# bench

BENCH_COLUMNS = ("example", "variables", "dira_time", "ira_time", "dira_iterations",
                 "ira_iterations", "max_relaxation_dim", "dira_verdict", "ira_verdict")


def bench_rows(sizes, cfg: RunConfig, unsafe: bool = False):
    for n in sizes:
        h = generate_acc(n, unsafe)
        t = time.perf_counter()
        d = run_dira(h, cfg.workers, cfg)
        dt = time.perf_counter() - t
        t = time.perf_counter()
        s = run_ira(h, cfg)
        st = time.perf_counter() - t
        yield {"example": f"ACC-{n}{'-unsafe' if unsafe else ''}", "variables": n,
               "dira_time": round(dt, 3), "ira_time": round(st, 3),
               "dira_iterations": len(d.stats.iterations), "ira_iterations": len(s.stats.iterations),
               "max_relaxation_dim": d.stats.max_relaxation_dim,
               "dira_verdict": d.verdict.kind, "ira_verdict": s.verdict.kind}


def cmd_bench(args, out=None) -> int:
    out = out or sys.stdout
    cfg = config_from_args(args)
    header = ("example", "vars", "d-IRA [s]", "IRA [s]", "d-IRA it", "IRA it", "max dim", "d-IRA", "IRA")
    widths = (16, 5, 10, 9, 9, 7, 8, 12, 12)
    if cfg.output == "text":
        print("".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(), file=out)
    for row in bench_rows(args.sizes, cfg, args.unsafe):
        if cfg.output == "json":
            print(json.dumps(row, sort_keys=True), file=out)
        else:
            cells = [str(row[c]) for c in BENCH_COLUMNS]
            print("".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip(), file=out)
        out.flush()
    return 0


# ---------------------------------------------------------------------------
# inspect

def read_trace(text: str) -> list[str]:
    """Verify a sealed trace and return its event lines."""
    lines = text.split("\n")
    if not lines or lines[0] != TRACE_HEADER:
        raise ChecksumError("checksum failure: missing trace header")
    if len(lines) < 3 or lines[-1] != "" or not lines[-2].startswith("# end sha256="):
        raise ChecksumError("checksum failure: trace truncated (no footer)")
    body = "\n".join(lines[:-2]) + "\n"
    if hashlib.sha256(body.encode()).hexdigest() != lines[-2][len("# end sha256="):]:
        raise ChecksumError("checksum failure: trace corrupted")
    return lines[1:-2]


def cmd_inspect(args, out=None) -> int:
    out = out or sys.stdout
    try:
        data = Path(args.artifact).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {args.artifact}: {exc.strerror or exc}") from None
    if data.startswith(MAGIC.encode()):
        st = restore(data)
        a = st.global_abstraction
        print("checkpoint", file=out)
        print(f"iteration: {st.iteration}", file=out)
        print(f"automaton: {a.num_states} states, {len(a.transitions)} transitions, "
              f"alphabet {{{', '.join(a.alphabet)}}}", file=out)
        print(f"workers: {len(st.assignments)}", file=out)
        for j, vars in enumerate(st.assignments):
            print(f"  worker {j}: {{{', '.join(sorted(vars))}}}", file=out)
        print(f"config: {json.dumps(st.config, sort_keys=True)}", file=out)
        return 0
    if data.startswith(TRACE_HEADER.encode()):
        try:
            text = data.decode()
        except UnicodeDecodeError:
            raise ChecksumError("checksum failure: trace is not valid UTF-8") from None
        events = read_trace(text)
        print(f"trace: {len(events)} events", file=out)
        for k, e in enumerate(events):
            print(f"{k:5d}  {e}", file=out)
        return 0
    raise UsageError(f"{args.artifact}: unknown artifact format")


def cmd_generate(args, out=None) -> int:
    out = out or sys.stdout
    text = write_lha(generate_acc(args.n, args.unsafe))
    if args.output:
        Path(args.output).write_text(text)
    else:
        out.write(text)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dira", description="Distributed iterative relaxation "
                                     "abstraction for linear hybrid automata.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check a model for bad-state reachability")
    p.add_argument("model")
    _add_run_options(p)
    p.add_argument("--fail-worker", type=_worker_fault, action="append", default=[], metavar="J@I",
                   help="kill worker J during iteration I (repeatable)")
    p.add_argument("--fail-master", type=_master_fault, default=None, metavar="@I",
                   help="crash the master at the end of iteration I")
    p.add_argument("--ira", action="store_true", help="run the sequential baseline instead")
    p.add_argument("--trace", metavar="FILE", help="write the sealed event trace (sim mode)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="compare d-IRA with IRA on generated ACC models")
    p.add_argument("sizes", type=_sizes, help="comma-separated vehicle counts, e.g. 4,8,16")
    p.add_argument("--unsafe", action="store_true")
    _add_run_options(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="dump a checkpoint or trace file")
    p.add_argument("artifact")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("generate", help="write an ACC benchmark model")
    p.add_argument("n", type=int)
    p.add_argument("--unsafe", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ModelError, ConfigError, ChecksumError, AutomatonFormatError, ValueError) as exc:
        print(f"dira: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
