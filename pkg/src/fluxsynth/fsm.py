"""Pulse-driven finite state machine model, text format, and reference semantics.

Machines are Mealy-style over SFQ pulses: inputs are pulse events (not
levels), a missing transition entry means the state holds, and an output
rule ``(state, signal, output)`` emits one output pulse whenever ``signal``
pulses while the machine sits in ``state``.

File format (line oriented, ``#`` starts a comment)::

    .name <id>
    .inputs <id> ...
    .outputs <id> ...          # optional when the machine has no outputs
    .states <id> ...
    .initial <id>
    .trans <from> <signal> <to>
    .out <state> <signal> <output>
    .end

Declarations must precede any ``.trans``/``.out`` line that uses them.
Parsing is byte-deterministic: the same bytes always produce the same
machine, and ``serialize_fsm`` emits a canonical form that reparses to an
equal machine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

__all__ = [
    "FiniteStateMachine",
    "PulseTrace",
    "FsmError",
    "FsmSyntaxError",
    "StimulusError",
    "parse_fsm",
    "serialize_fsm",
    "fsm_step",
    "fsm_run",
]

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class FsmError(Exception):
    """Invalid machine structure (bad references, duplicates, ...)."""


class FsmSyntaxError(FsmError):
    """Parse error carrying the 1-based source line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class StimulusError(FsmError):
    """Stimulus violates the single-pulse-per-tick reference semantics."""


@dataclass
class FiniteStateMachine:
    """A deterministic pulse FSM.

    ``transitions`` maps ``(state, signal)`` to the next state; pairs without
    an entry hold the current state.  ``output_rules`` is a set of
    ``(state, signal, output)`` triples.  Instances are treated as immutable
    after construction and are safe to share across worker threads.
    """

    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    states: tuple[str, ...]
    initial: str
    transitions: dict[tuple[str, str], str] = field(default_factory=dict)
    output_rules: frozenset[tuple[str, str, str]] = frozenset()

    def validate(self) -> None:
        """Check structural invariants, raising FsmError on the first failure."""
        for group, kind in ((self.inputs, "input"), (self.outputs, "output"),
                            (self.states, "state")):
            seen = set()
            for ident in group:
                if not _IDENT.match(ident):
                    raise FsmError(f"invalid {kind} identifier {ident!r}")
                if ident in seen:
                    raise FsmError(f"duplicate {kind} {ident!r}")
                seen.add(ident)
        if self.initial not in self.states:
            raise FsmError(f"initial state {self.initial!r} is not declared")
        states = set(self.states)
        signals = set(self.inputs)
        outs = set(self.outputs)
        for (state, signal), nxt in self.transitions.items():
            if state not in states:
                raise FsmError(f"transition from undeclared state {state!r}")
            if nxt not in states:
                raise FsmError(f"transition to undeclared state {nxt!r}")
            if signal not in signals:
                raise FsmError(f"transition on undeclared signal {signal!r}")
        for state, signal, output in self.output_rules:
            if state not in states:
                raise FsmError(f"output rule in undeclared state {state!r}")
            if signal not in signals:
                raise FsmError(f"output rule on undeclared signal {signal!r}")
            if output not in outs:
                raise FsmError(f"output rule for undeclared output {output!r}")

    def unreachable_states(self) -> tuple[str, ...]:
        """States not reachable from the initial state (a warning, not an error)."""
        reached = {self.initial}
        frontier = [self.initial]
        while frontier:
            state = frontier.pop()
            for signal in self.inputs:
                nxt = self.transitions.get((state, signal))
                if nxt is not None and nxt not in reached:
                    reached.add(nxt)
                    frontier.append(nxt)
        return tuple(s for s in self.states if s not in reached)


@dataclass(frozen=True)
class PulseTrace:
    """Input events consumed and output events emitted by one run.

    Both sequences hold ``(tick, name)`` pairs with non-decreasing ticks.
    Output events carry the tick of the input pulse that triggered them.
    """

    inputs: tuple[tuple[int, str], ...]
    outputs: tuple[tuple[int, str], ...]


def fsm_step(fsm: FiniteStateMachine, state: str, signal: str) -> tuple[str, frozenset[str]]:
    """Apply one input pulse: returns the next state and the emitted outputs."""
    if state not in fsm.states:
        raise FsmError(f"unknown state {state!r}")
    if signal not in fsm.inputs:
        raise FsmError(f"unknown signal {signal!r}")
    nxt = fsm.transitions.get((state, signal), state)
    emitted = frozenset(o for (s, f, o) in fsm.output_rules
                        if s == state and f == signal)
    return nxt, emitted


def fsm_run(fsm: FiniteStateMachine, stimulus) -> PulseTrace:
    """Fold fsm_step over a stimulus of ``(tick, signal)`` pulse events.

    Events are sorted by tick before folding; two events on the same tick
    are rejected because the pulse semantics defines no concurrent order.
    """
    events = sorted(stimulus, key=lambda ev: ev[0])
    seen_ticks = set()
    for tick, signal in events:
        if signal not in fsm.inputs:
            raise FsmError(f"stimulus references undeclared signal {signal!r}")
        if tick in seen_ticks:
            raise StimulusError(f"two input pulses at tick {tick}")
        seen_ticks.add(tick)
    state = fsm.initial
    out_events: list[tuple[int, str]] = []
    for tick, signal in events:
        state, emitted = fsm_step(fsm, state, signal)
        out_events.extend((tick, o) for o in sorted(emitted))
    return PulseTrace(inputs=tuple(events), outputs=tuple(out_events))


def parse_fsm(text: str) -> FiniteStateMachine:
    """Parse the FSM text format into a validated machine."""
    name = None
    initial = None
    inputs: list[str] = []
    outputs: list[str] = []
    states: list[str] = []
    transitions: dict[tuple[str, str], str] = {}
    rules: set[tuple[str, str, str]] = set()
    ended = False

    def declare(lineno, bucket, idents, kind):
        for ident in idents:
            if not _IDENT.match(ident):
                raise FsmSyntaxError(lineno, f"invalid {kind} identifier {ident!r}")
            if ident in bucket:
                raise FsmSyntaxError(lineno, f"duplicate {kind} {ident!r}")
            bucket.append(ident)

    def need_state(lineno, ident):
        if ident not in states:
            raise FsmSyntaxError(lineno, f"undeclared state {ident!r}")

    def need_signal(lineno, ident):
        if ident not in inputs:
            raise FsmSyntaxError(lineno, f"undeclared signal {ident!r}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ended:
            raise FsmSyntaxError(lineno, "content after .end")
        tokens = line.split()
        directive, args = tokens[0], tokens[1:]
        if directive == ".name":
            if len(args) != 1:
                raise FsmSyntaxError(lineno, ".name takes exactly one identifier")
            if name is not None:
                raise FsmSyntaxError(lineno, "second .name directive")
            name = args[0]
        elif directive == ".inputs":
            declare(lineno, inputs, args, "input")
        elif directive == ".outputs":
            declare(lineno, outputs, args, "output")
        elif directive == ".states":
            declare(lineno, states, args, "state")
        elif directive == ".initial":
            if len(args) != 1:
                raise FsmSyntaxError(lineno, ".initial takes exactly one state")
            if initial is not None:
                raise FsmSyntaxError(lineno, "second .initial directive")
            need_state(lineno, args[0])
            initial = args[0]
        elif directive == ".trans":
            if len(args) != 3:
                raise FsmSyntaxError(lineno, ".trans takes <from> <signal> <to>")
            src, signal, dst = args
            need_state(lineno, src)
            need_signal(lineno, signal)
            need_state(lineno, dst)
            if (src, signal) in transitions:
                raise FsmSyntaxError(
                    lineno, f"duplicate transition for ({src}, {signal})")
            transitions[(src, signal)] = dst
        elif directive == ".out":
            if len(args) != 3:
                raise FsmSyntaxError(lineno, ".out takes <state> <signal> <output>")
            state, signal, output = args
            need_state(lineno, state)
            need_signal(lineno, signal)
            if output not in outputs:
                raise FsmSyntaxError(lineno, f"undeclared output {output!r}")
            rules.add((state, signal, output))
        elif directive == ".end":
            if args:
                raise FsmSyntaxError(lineno, ".end takes no arguments")
            ended = True
        else:
            raise FsmSyntaxError(lineno, f"unknown directive {directive!r}")

    last = len(text.splitlines()) or 1
    if not ended:
        raise FsmSyntaxError(last, "missing .end")
    if name is None:
        raise FsmSyntaxError(last, "missing .name")
    if not states:
        raise FsmSyntaxError(last, "no states declared")
    if initial is None:
        raise FsmSyntaxError(last, "missing .initial")

    fsm = FiniteStateMachine(
        name=name,
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        states=tuple(states),
        initial=initial,
        transitions=transitions,
        output_rules=frozenset(rules),
    )
    fsm.validate()
    return fsm


def serialize_fsm(fsm: FiniteStateMachine) -> str:
    """Canonical text form; parse_fsm(serialize_fsm(m)) is structurally equal to m."""
    lines = [f".name {fsm.name}"]
    if fsm.inputs:
        lines.append(".inputs " + " ".join(fsm.inputs))
    if fsm.outputs:
        lines.append(".outputs " + " ".join(fsm.outputs))
    lines.append(".states " + " ".join(fsm.states))
    lines.append(f".initial {fsm.initial}")
    state_idx = {s: i for i, s in enumerate(fsm.states)}
    signal_idx = {f: i for i, f in enumerate(fsm.inputs)}
    for (src, signal), dst in sorted(
            fsm.transitions.items(),
            key=lambda item: (state_idx[item[0][0]], signal_idx[item[0][1]])):
        lines.append(f".trans {src} {signal} {dst}")
    out_idx = {o: i for i, o in enumerate(fsm.outputs)}
    for state, signal, output in sorted(
            fsm.output_rules,
            key=lambda r: (state_idx[r[0]], signal_idx[r[1]], out_idx[r[2]])):
        lines.append(f".out {state} {signal} {output}")
    lines.append(".end")
    return "\n".join(lines) + "\n"
