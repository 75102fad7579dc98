"""Event-driven functional simulation of mapped netlists.

Every cell behaves as the little state machine its port effects imply:
set stores a flux quantum, clear removes it, toggle flips it, out emits a
pulse when a quantum is stored, nout when none is.  Within one port
reaction reads happen before writes (out, nout, clear, toggle, set), so a
destructive readout emits the old state.

Timing is zero-delay over integer ticks: a pulse propagates through any
chain of reactions within its tick, events ordered by the topological rank
of their net (ties by net name), so downstream gates always see pulses
produced upstream in the same tick.  Edges that close a cycle in the
data-edge graph deliver at the next tick instead, which makes circuits
with structural feedback well defined.  Coincident pulses on one net in
one tick coalesce into a single pulse (confluence semantics).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import product

from .fsm import FiniteStateMachine, PulseTrace, fsm_run
from .mapping import Netlist, feedback_edges, instance_ranks
from .pdk import PDK, Cell

__all__ = [
    "SimulationError", "Simulator", "simulate", "check_equivalence",
    "EquivalenceVerdict", "validate_supergate", "write_vcd",
]


class SimulationError(Exception):
    pass


@dataclass
class EquivalenceVerdict:
    equivalent: bool
    depth: int
    counterexample: tuple[str, ...] | None = None
    expected: tuple[tuple[int, str], ...] | None = None
    actual: tuple[tuple[int, str], ...] | None = None

    def __str__(self) -> str:
        if self.equivalent:
            return f"equivalent up to depth {self.depth}"
        seq = ", ".join(self.counterexample or ())
        return (f"mismatch on pulse sequence [{seq}]: reference emitted "
                f"{list(self.expected or ())}, netlist emitted "
                f"{list(self.actual or ())}")


def _react(cell: Cell, port_name: str, state: int) -> tuple[int, list[str]]:
    """Apply one pulse at one port: returns (new state, output port pulses)."""
    emitted: list[str] = []
    if cell.kind == "merge":
        return state, list(cell.outputs)
    if cell.kind == "split":
        return state, list(cell.outputs)
    if cell.kind == "and2":
        operands = [p.name for p in cell.ports if p.out is None]
        read = next(p for p in cell.ports if p.out is not None)
        if port_name == operands[0]:
            return state | 1, []
        if port_name == operands[1]:
            return state | 2, []
        if state == 3:
            emitted.append(read.out)
        return 0, emitted
    port = next(p for p in cell.ports if p.name == port_name)
    if "out" in port.effects and state == 1:
        emitted.append(port.out)
    if "nout" in port.effects and state == 0:
        emitted.append(port.nout)
    if "clear" in port.effects:
        state = 0
    if "toggle" in port.effects:
        state ^= 1
    if "set" in port.effects:
        state = 1
    return state, emitted


class Simulator:
    """Reusable simulation context for one (netlist, pdk) pair."""

    def __init__(self, netlist: Netlist, pdk: PDK):
        self.netlist = netlist
        self.pdk = pdk
        self.cells = {inst.name: pdk.cell(inst.cell) for inst in netlist.instances}
        self.inst_by_name = {inst.name: inst for inst in netlist.instances}
        self.driver: dict[str, str] = {}
        self.sinks: dict[str, list[tuple[str, str]]] = {}
        for inst in netlist.instances:
            cell = self.cells[inst.name]
            outs = set(cell.outputs)
            for pname, net in inst.ports.items():
                if pname in outs:
                    if net in self.driver and self.driver[net] != inst.name:
                        raise SimulationError(f"net {net!r} has two drivers")
                    self.driver[net] = inst.name
                else:
                    self.sinks.setdefault(net, []).append((inst.name, pname))
        for net in self.sinks:
            self.sinks[net].sort()
        self.po_of: dict[str, list[str]] = {}
        for out, net in netlist.po_nets.items():
            self.po_of.setdefault(net, []).append(out)
        for outs in self.po_of.values():
            outs.sort()
        self.feedback = set(feedback_edges(netlist, pdk))
        ranks = instance_ranks(netlist, pdk)
        self.net_rank = {net: 0 for net in netlist.inputs}
        for net, driver in self.driver.items():
            self.net_rank[net] = ranks[driver]
        self.inputs = set(netlist.inputs)

    def run(self, stimulus, horizon: int | None = None) -> PulseTrace:
        events = sorted(stimulus, key=lambda ev: (ev[0], ev[1]))
        for _, signal in events:
            if signal not in self.inputs:
                raise SimulationError(f"stimulus drives unknown input {signal!r}")
        if horizon is None:
            horizon = (events[-1][0] if events else 0) + 2
        by_tick: dict[int, list[str]] = {}
        for tick, signal in events:
            if tick > horizon:
                raise SimulationError(f"stimulus at tick {tick} is beyond the "
                                      f"horizon {horizon}")
            by_tick.setdefault(tick, []).append(signal)

        state = {name: 0 for name in self.cells}
        deferred: dict[int, list[tuple[str, str]]] = {}  # tick -> (inst, port)
        emitted: list[tuple[int, str]] = []
        recorded: set[tuple[int, str]] = set()

        tick = 0
        while tick <= horizon:
            if tick not in by_tick and tick not in deferred:
                nxt = [t for t in list(by_tick) + list(deferred) if t > tick]
                if not nxt:
                    break
                tick = min(nxt)
                continue
            pulsed: set[str] = set()
            heap: list[tuple[int, str]] = []

            def push(net: str):
                if net in pulsed:
                    return
                pulsed.add(net)
                heapq.heappush(heap, (self.net_rank.get(net, 0), net))

            for inst_name, pname in sorted(deferred.pop(tick, [])):
                new_state, outie = _react(self.cells[inst_name], pname,
                                          state[inst_name])
                state[inst_name] = new_state
                inst = self.inst_by_name[inst_name]
                for oport in outie:
                    push(inst.ports[oport])
            for signal in sorted(by_tick.pop(tick, [])):
                push(signal)

            guard = 0
            while heap:
                guard += 1
                if guard > 200_000:
                    raise SimulationError(
                        f"tick {tick}: runaway same-tick propagation (cycle?)")
                rank, net = heapq.heappop(heap)
                for out in self.po_of.get(net, []):
                    key = (tick, out)
                    if key not in recorded:
                        recorded.add(key)
                        emitted.append(key)
                driver = self.driver.get(net)
                for inst_name, pname in self.sinks.get(net, []):
                    if driver is not None and (driver, inst_name) in self.feedback:
                        deferred.setdefault(tick + 1, []).append((inst_name, pname))
                        continue
                    new_state, outie = _react(self.cells[inst_name], pname,
                                              state[inst_name])
                    state[inst_name] = new_state
                    inst = self.inst_by_name[inst_name]
                    for oport in outie:
                        target = inst.ports[oport]
                        if target in pulsed:
                            continue
                        if self.net_rank.get(target, rank + 1) <= rank:
                            raise SimulationError(
                                f"tick {tick}: pulse on {target!r} loops back "
                                f"within its own tick")
                        push(target)
            tick += 1
        return PulseTrace(inputs=tuple(events), outputs=tuple(sorted(emitted)))


def simulate(netlist: Netlist, pdk: PDK, stimulus, horizon: int | None = None) -> PulseTrace:
    """One-shot simulation run; see Simulator for the semantics."""
    return Simulator(netlist, pdk).run(stimulus, horizon)


def check_equivalence(fsm: FiniteStateMachine, netlist: Netlist, pdk: PDK,
                      max_len: int = 5) -> EquivalenceVerdict:
    """Exhaustively replay all pulse sequences up to ``max_len`` ticks.

    One pulse per tick, alphabet = declared inputs; the first sequence
    (ordered by length, then input declaration order) whose output trace
    differs between the reference semantics and the simulated netlist is
    returned as the counterexample.
    """
    if set(fsm.inputs) != set(netlist.inputs):
        raise SimulationError(
            f"input mismatch: FSM {sorted(fsm.inputs)} vs netlist "
            f"{sorted(netlist.inputs)}")
    if set(fsm.outputs) != set(netlist.outputs):
        raise SimulationError(
            f"output mismatch: FSM {sorted(fsm.outputs)} vs netlist "
            f"{sorted(netlist.outputs)}")
    sim = Simulator(netlist, pdk)
    for length in range(max_len + 1):
        for seq in product(fsm.inputs, repeat=length):
            stimulus = [(t, sig) for t, sig in enumerate(seq)]
            want = fsm_run(fsm, stimulus).outputs
            got = sim.run(stimulus, horizon=length + 2).outputs
            if set(want) != set(got):
                return EquivalenceVerdict(
                    equivalent=False, depth=max_len, counterexample=seq,
                    expected=tuple(sorted(want)), actual=tuple(sorted(got)))
    return EquivalenceVerdict(equivalent=True, depth=max_len)


# ---------------------------------------------------------------------------
# supergate validation


def _reference_trace(ports, seq) -> list[tuple[int, str]]:
    """Fold the 1-bit machine implied by a port list over a pulse sequence."""
    state = 0
    out: list[tuple[int, str]] = []
    by_name = {p.name: p for p in ports}
    for tick, pname in enumerate(seq):
        port = by_name[pname]
        if "out" in port.effects and state == 1:
            out.append((tick, port.out))
        if "nout" in port.effects and state == 0:
            out.append((tick, port.nout))
        if "clear" in port.effects:
            state = 0
        if "toggle" in port.effects:
            state ^= 1
        if "set" in port.effects:
            state = 1
    return out


def validate_supergate(pdk: PDK, sg, max_len: int = 4) -> str | None:
    """Compare a supergate body against its declared signature machine.

    Returns a description of the first mismatch, or None when the body
    faithfully implements the 2-state machine for all port-pulse sequences
    of length <= max_len.
    """
    body_netlist = Netlist(
        name=f"sg_{sg.name}",
        inputs=tuple(p.name for p in sg.ports),
        outputs=tuple(sg.outputs),
        instances=[_mk_instance(i, c, b) for (i, c, b) in sg.body],
        po_nets={o: o for o in sg.outputs},
    )
    try:
        sim = Simulator(body_netlist, pdk)
    except SimulationError as exc:
        return str(exc)
    port_names = [p.name for p in sg.ports]
    for length in range(1, max_len + 1):
        for seq in product(port_names, repeat=length):
            stimulus = [(t, p) for t, p in enumerate(seq)]
            want = set(_reference_trace(sg.ports, seq))
            try:
                got = set(sim.run(stimulus, horizon=length + 2).outputs)
            except SimulationError as exc:
                return f"sequence {seq}: {exc}"
            if want != got:
                return (f"sequence {seq}: expected {sorted(want)}, "
                        f"body produced {sorted(got)}")
    return None


def _mk_instance(name, cellname, bindings):
    from .mapping import Instance

    return Instance(name=name, cell=cellname, ports=dict(bindings))


# ---------------------------------------------------------------------------
# waveform output


def write_vcd(trace: PulseTrace, inputs, outputs, module: str = "fluxsynth") -> str:
    """Render a pulse trace as a value-change dump (pulses as 1-then-0)."""
    signals = list(inputs) + [o for o in outputs if o not in inputs]
    ids = {}
    for idx, sig in enumerate(signals):
        ids[sig] = chr(33 + idx) if idx < 94 else f"s{idx}"
    lines = ["$timescale 1ps $end", f"$scope module {module} $end"]
    for sig in signals:
        lines.append(f"$var wire 1 {ids[sig]} {sig} $end")
    lines.append("$upscope $end")
    lines.append("$enddefinitions $end")
    lines.append("#0")
    for sig in signals:
        lines.append(f"0{ids[sig]}")
    changes: dict[int, list[str]] = {}
    for tick, sig in list(trace.inputs) + list(trace.outputs):
        changes.setdefault(tick * 10, []).append(f"1{ids[sig]}")
        changes.setdefault(tick * 10 + 5, []).append(f"0{ids[sig]}")
    for time in sorted(changes):
        lines.append(f"#{time}")
        lines.extend(sorted(changes[time]))
    return "\n".join(lines) + "\n"
