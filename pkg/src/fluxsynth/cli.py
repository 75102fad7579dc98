"""Command-line driver: synth, simulate, check, report, balance.

Synthesis walks candidate encodings in tree order and hands each one to a
worker (decompose, mark, group, map).  Deterministic mode (the default)
accepts the success with the smallest encoding ordinal, so results are
byte-identical regardless of worker count; ``--fast`` returns the first
success observed, trading reproducibility for latency.  If every encoding
at the current width fails to map, the width is increased, up to one bit
per state.  A successful netlist is equivalence-checked against the source
machine before it is written; output files are written atomically.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from collections import deque
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from importlib.resources import files as _pkg_files

from .balance import BalanceError, balance_paths, insert_splitters, parse_comb
from .decompose import decompose, format_tables
from .encoding import (DEFAULT_ENUMERATION_CAP, EncodingError, StateEncoding,
                       build_encoding_tree, enumerate_encodings)
from .fsm import FiniteStateMachine, FsmError, parse_fsm
from .mapping import (MappingFailure, Netlist, emit_netlist, map_components,
                      read_netlist, report, write_netlist_file)
from .netsim import (EquivalenceVerdict, SimulationError, Simulator,
                     check_equivalence, write_vcd)
from .pdk import PDK, PdkError, load_pdk_file

__all__ = ["SynthConfig", "SynthResult", "SynthesisError", "synth", "main",
           "default_pdk_path"]

PDK_ENV_VAR = "FLUXSYNTH_PDK"


class SynthesisError(Exception):
    pass


@dataclass
class SynthConfig:
    fsm_path: str
    pdk_path: str | None = None
    out_path: str | None = None
    jobs: int = 1
    deterministic: bool = True
    max_encodings: int = DEFAULT_ENUMERATION_CAP
    check_depth: int = 5
    splitter_fanout: int | None = None  # None = splitter pass off
    dump_tables: bool = False
    fmt: str = "data"

    def __post_init__(self):
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.max_encodings < 1:
            raise ValueError("max encodings must be >= 1")


@dataclass
class SynthResult:
    netlist: Netlist
    encoding: StateEncoding
    ordinal: int
    width: int
    attempts: int
    failures: list[tuple[int, list[str]]] = field(default_factory=list)
    verdict: EquivalenceVerdict | None = None
    cost: object = None
    elapsed_s: float = 0.0


def default_pdk_path() -> str:
    env = os.environ.get(PDK_ENV_VAR)
    if env:
        return env
    return str(_pkg_files("fluxsynth") / "data" / "sample_pdk.json")


def _attempt(fsm: FiniteStateMachine, enc: StateEncoding, pdk: PDK):
    """One worker task: decompose and map a single encoding."""
    _itt, _ot, _opt, marking = decompose(fsm, enc)
    try:
        netlist = map_components(marking, pdk, name=fsm.name, inputs=fsm.inputs,
                                 outputs=fsm.outputs, encoding=enc)
        return True, netlist
    except MappingFailure as failure:
        return False, failure.unmapped


def synthesize(fsm: FiniteStateMachine, pdk: PDK,
               config: SynthConfig) -> SynthResult:
    """Search encodings width by width until one maps; verify and cost it."""
    started = time.perf_counter()
    base_width = max(0, math.ceil(math.log2(len(fsm.states))) if len(fsm.states) > 1 else 0)
    attempts = 0
    failures: list[tuple[int, list[str]]] = []
    failure_counts: dict[str, int] = {}
    winner: tuple[StateEncoding, Netlist] | None = None

    def note_failure(ordinal: int, messages: list[str]) -> None:
        if len(failures) < 25:
            failures.append((ordinal, messages))
        for msg in messages:
            failure_counts[msg] = failure_counts.get(msg, 0) + 1

    for width in range(base_width, max(base_width, len(fsm.states)) + 1):
        try:
            tree = build_encoding_tree(fsm, width)
        except EncodingError:
            continue
        supply = enumerate_encodings(tree, limit=config.max_encodings)
        window = max(2, config.jobs * 2)
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            queue: deque = deque()

            def refill() -> None:
                while len(queue) < window:
                    enc = next(supply, None)
                    if enc is None:
                        return
                    queue.append((enc, pool.submit(_attempt, fsm, enc, pdk)))

            refill()
            if config.deterministic:
                # accept the smallest-ordinal success: resolve in order
                while queue:
                    enc, fut = queue.popleft()
                    ok, payload = fut.result()
                    attempts += 1
                    if ok:
                        winner = (enc, payload)
                        break
                    note_failure(enc.ordinal, payload)
                    refill()
            else:
                while queue and winner is None:
                    wait([fut for _enc, fut in queue],
                         return_when=FIRST_COMPLETED)
                    still: deque = deque()
                    for enc, fut in queue:
                        if not fut.done():
                            still.append((enc, fut))
                            continue
                        ok, payload = fut.result()
                        attempts += 1
                        if ok and winner is None:
                            winner = (enc, payload)
                        elif not ok:
                            note_failure(enc.ordinal, payload)
                    queue = still
                    refill()
            for _enc, fut in queue:
                fut.cancel()
        if winner is not None:
            break

    if winner is None:
        top = sorted(failure_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
        detail = "; ".join(f"{msg} (x{n})" for msg, n in top) or "no encodings"
        raise SynthesisError(
            f"no mappable encoding for {fsm.name!r} at widths "
            f"{base_width}..{max(base_width, len(fsm.states))}; most common "
            f"unmapped signatures: {detail}")

    enc, netlist = winner
    if config.splitter_fanout is not None:
        netlist = insert_splitters(netlist, pdk, config.splitter_fanout)
    verdict = None
    if config.check_depth > 0:
        verdict = check_equivalence(fsm, netlist, pdk, config.check_depth)
        if not verdict.equivalent:
            raise SynthesisError(
                f"synthesized netlist disagrees with the source machine: "
                f"{verdict}")
    netlist.metadata["equivalence"] = (
        f"checked to depth {config.check_depth}" if verdict else "not checked")
    result = SynthResult(netlist=netlist, encoding=enc, ordinal=enc.ordinal,
                         width=enc.width, attempts=attempts, failures=failures,
                         verdict=verdict, cost=report(netlist, pdk),
                         elapsed_s=time.perf_counter() - started)
    return result


def synth(config: SynthConfig) -> SynthResult:
    """File-level wrapper used by the CLI: parse, synthesize, write."""
    with open(config.fsm_path, "r", encoding="utf-8") as handle:
        fsm = parse_fsm(handle.read())
    unreachable = fsm.unreachable_states()
    if unreachable:
        print(f"warning: unreachable states: {', '.join(unreachable)}",
              file=sys.stderr)
    pdk = load_pdk_file(config.pdk_path or default_pdk_path())
    result = synthesize(fsm, pdk, config)
    if config.dump_tables:
        itt, ot, opt, _marking = decompose(fsm, result.encoding)
        print(format_tables(fsm, result.encoding, itt, ot, opt))
    if config.out_path:
        write_netlist_file(result.netlist, config.out_path, config.fmt)
    return result


# ---------------------------------------------------------------------------
# subcommands


def _load_pdk_arg(path: str | None) -> PDK:
    return load_pdk_file(path or default_pdk_path())


def _read_stimulus(path: str) -> list[tuple[int, str]]:
    events = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise SimulationError(
                    f"{path}:{lineno}: expected '<tick> <signal>'")
            events.append((int(parts[0]), parts[1]))
    return events


def _cmd_synth(args) -> int:
    config = SynthConfig(
        fsm_path=args.fsm, pdk_path=args.pdk, out_path=args.out,
        jobs=args.jobs, deterministic=not args.fast,
        max_encodings=args.max_encodings, check_depth=args.check_depth,
        splitter_fanout=None if args.splitters == "off" else int(args.splitters),
        dump_tables=args.dump_tables, fmt=args.format)
    result = synth(config)
    meta = result.netlist.metadata
    print(f"synthesized {result.netlist.name}: {meta['gate_count']} gates "
          f"{meta['census']} (width {result.width}, encoding ordinal "
          f"{result.ordinal}, {result.attempts} attempt(s), "
          f"{result.elapsed_s:.3f}s)")
    if result.verdict:
        print(str(result.verdict))
    if meta.get("supergates"):
        print(f"supergates used: {meta['supergates']}")
    if not args.out:
        print(emit_netlist(result.netlist, args.format), end="")
    return 0


def _cmd_simulate(args) -> int:
    with open(args.netlist, "r", encoding="utf-8") as handle:
        netlist = read_netlist(handle.read())
    pdk = _load_pdk_arg(args.pdk)
    stimulus = _read_stimulus(args.stim)
    trace = Simulator(netlist, pdk).run(stimulus, horizon=args.horizon)
    for tick, out in trace.outputs:
        print(f"t={tick} {out}")
    if args.vcd:
        with open(args.vcd, "w", encoding="utf-8") as handle:
            handle.write(write_vcd(trace, netlist.inputs, netlist.outputs,
                                   module=netlist.name))
        print(f"wrote {args.vcd}", file=sys.stderr)
    return 0


def _cmd_check(args) -> int:
    with open(args.fsm, "r", encoding="utf-8") as handle:
        fsm = parse_fsm(handle.read())
    with open(args.netlist, "r", encoding="utf-8") as handle:
        netlist = read_netlist(handle.read())
    pdk = _load_pdk_arg(args.pdk)
    verdict = check_equivalence(fsm, netlist, pdk, args.depth)
    print(str(verdict))
    return 0 if verdict.equivalent else 1


def _cmd_report(args) -> int:
    from .mapping import CostReport

    pdk = _load_pdk_arg(args.pdk)
    print(CostReport.header())
    for path in args.netlist:
        with open(path, "r", encoding="utf-8") as handle:
            netlist = read_netlist(handle.read())
        cost = report(netlist, pdk)
        print(cost.row(netlist.name))
    print(f"(pre-layout estimates from PDK {pdk.name!r}; "
          f"junction/power figures are illustrative)")
    return 0


def _cmd_balance(args) -> int:
    with open(args.comb, "r", encoding="utf-8") as handle:
        comb = parse_comb(handle.read())
    pdk = _load_pdk_arg(args.pdk)
    netlist = balance_paths(comb, pdk)
    inserted = netlist.metadata["dff_inserted"]
    if args.splitters != "off":
        netlist = insert_splitters(netlist, pdk, int(args.splitters))
        print(f"inserted {netlist.metadata['splitters_inserted']} splitter(s)")
    print(f"inserted {inserted} DFF(s); pipeline depth "
          f"{netlist.metadata['pipeline_depth']}")
    if args.out:
        write_netlist_file(netlist, args.out, args.format)
    else:
        print(emit_netlist(netlist, args.format), end="")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluxsynth",
        description="RSFQ sequential circuit synthesis from FSM descriptions")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize an FSM into a gate netlist")
    p.add_argument("--fsm", required=True, help="FSM description file")
    p.add_argument("--pdk", help=f"PDK file (default: ${PDK_ENV_VAR} or bundled)")
    p.add_argument("--out", help="output netlist path (stdout if omitted)")
    p.add_argument("--jobs", type=int, default=1, help="worker count")
    p.add_argument("--fast", action="store_true",
                   help="first success wins (non-reproducible)")
    p.add_argument("--max-encodings", type=int, default=DEFAULT_ENUMERATION_CAP)
    p.add_argument("--check-depth", type=int, default=5,
                   help="equivalence check depth, 0 disables")
    p.add_argument("--splitters", default="off",
                   help="fanout limit for splitter insertion, or 'off'")
    p.add_argument("--dump-tables", action="store_true")
    p.add_argument("--format", choices=("data", "hdl"), default="data")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("simulate", help="pulse-level simulation of a netlist")
    p.add_argument("--netlist", required=True)
    p.add_argument("--pdk")
    p.add_argument("--stim", required=True, help="lines of '<tick> <signal>'")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--vcd", help="write a VCD waveform here")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("check", help="equivalence-check an FSM vs a netlist")
    p.add_argument("--fsm", required=True)
    p.add_argument("--netlist", required=True)
    p.add_argument("--pdk")
    p.add_argument("--depth", type=int, default=5)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("report", help="gate/junction/power/frequency summary")
    p.add_argument("--netlist", nargs="+", required=True)
    p.add_argument("--pdk")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("balance", help="clock and path-balance a Boolean netlist")
    p.add_argument("--comb", required=True, help="combinational netlist file")
    p.add_argument("--pdk")
    p.add_argument("--out")
    p.add_argument("--splitters", default="off")
    p.add_argument("--format", choices=("data", "hdl"), default="data")
    p.set_defaults(func=_cmd_balance)
    return parser


_USER_ERRORS = (FsmError, PdkError, MappingFailure, SynthesisError,
                SimulationError, BalanceError, EncodingError, OSError,
                ValueError)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
