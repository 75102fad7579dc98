"""FSM decomposition: transition tables, per-bit expressions, effect marking.

For a chosen encoding each state bit becomes one sequential component.  The
next value of bit b under a pulse on signal F is a Boolean function of the
current state bits; its canonical ROBDD is classified against the pulse
effect patterns

    hold            next = Qb
    set             next = Qb | G         (guard G over other bits)
    clear           next = 0
    toggle          next = Qb ^ G
    clear + set     next = G              (destructive update, G arbitrary)

Guards and output conditions are minimized to SOP cubes.  A non-constant
cube is realized as a chain of read nets: the cube's lowest bit is read on
the triggering pulse, the next bit is read on the resulting net, and so on,
which is exactly the ripple structure of SFQ carry chains.  Reading a bit
adds an out (or nout) obligation to that bit's port for the triggering net.

Unused state codes are don't-cares during minimization; the tables only
constrain codes that are actually assigned to states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import boolexpr as bx
from .boolexpr import BddStore, Robdd
from .encoding import StateEncoding
from .fsm import FiniteStateMachine

__all__ = [
    "Net", "PrimaryNet", "ReadNet", "MergeNet",
    "InputTransitionTable", "OutputTable", "OptResultTable",
    "Port", "MarkedComponent", "AndGroup", "UnmappableEntry", "Marking",
    "extract_tables", "per_bit_expressions", "mark_effects",
    "recognize_groups", "decompose", "format_tables",
    "EFFECT_SET", "EFFECT_CLEAR", "EFFECT_TOGGLE", "EFFECT_OUT", "EFFECT_NOUT",
]

EFFECT_SET = "set"
EFFECT_CLEAR = "clear"
EFFECT_TOGGLE = "toggle"
EFFECT_OUT = "out"
EFFECT_NOUT = "nout"

EFFECT_RANK = {EFFECT_SET: 0, EFFECT_CLEAR: 1, EFFECT_TOGGLE: 2,
               EFFECT_OUT: 3, EFFECT_NOUT: 4}


def qvar(bit: int) -> str:
    return f"Q{bit}"


# ---------------------------------------------------------------------------
# nets


class Net:
    """Structural identity of a pulse net; names are assigned at map time."""

    @property
    def signal(self) -> str:
        raise NotImplementedError

    def expr_str(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class PrimaryNet(Net):
    name: str

    @property
    def signal(self) -> str:
        return self.name

    def expr_str(self) -> str:
        return self.name


@dataclass(frozen=True)
class ReadNet(Net):
    """Pulse emitted by reading one state bit on a trigger pulse."""

    bit: int
    positive: bool
    trigger: Net

    @property
    def signal(self) -> str:
        return self.trigger.signal

    @property
    def cube(self) -> tuple[tuple[int, bool], ...]:
        inner = self.trigger.cube if isinstance(self.trigger, ReadNet) else ()
        return inner + ((self.bit, self.positive),)

    def expr_str(self) -> str:
        lit = qvar(self.bit) if self.positive else "~" + qvar(self.bit)
        return f"{lit}&{self.trigger.expr_str()}"


@dataclass(frozen=True)
class MergeNet(Net):
    """Confluence of several term nets (pulse OR)."""

    terms: tuple[Net, ...]

    @property
    def signal(self) -> str:
        return self.terms[0].signal

    def expr_str(self) -> str:
        return " | ".join(t.expr_str() for t in self.terms)


def term_net(cube: dict[int, bool], signal: str) -> Net:
    """Net of one guard cube under one signal: a read chain rooted at the pulse.

    Bits are read in ascending index order, so the lowest bit is read on the
    primary pulse and each further bit on the previous read's net.
    """
    net: Net = PrimaryNet(signal)
    for bit in sorted(cube):
        net = ReadNet(bit=bit, positive=cube[bit], trigger=net)
    return net


def guard_net(cubes: list[dict[int, bool]], signal: str) -> Net:
    """Net for a whole guard SOP; multi-cube guards merge their term nets."""
    terms = [term_net(c, signal) for c in cubes]
    if len(terms) == 1:
        return terms[0]
    return MergeNet(tuple(sorted(terms, key=_net_key)))


def _net_key(net: Net) -> tuple:
    if isinstance(net, PrimaryNet):
        return (0, net.name)
    if isinstance(net, ReadNet):
        return (1, net.cube, net.signal)
    return (2, tuple(_net_key(t) for t in net.terms))


# ---------------------------------------------------------------------------
# tables


@dataclass
class InputTransitionTable:
    """Next-code map per (signal, current code), hold rows included."""

    width: int
    signals: tuple[str, ...]
    codes: tuple[int, ...]  # assigned codes in state declaration order
    next: dict[tuple[str, int], int]

    def next_code(self, signal: str, code: int) -> int:
        return self.next[(signal, code)]


@dataclass
class OutputTable:
    """For every output, the (code, signal) pairs that emit it."""

    outputs: tuple[str, ...]
    emits: dict[str, frozenset[tuple[int, str]]]


def extract_tables(fsm: FiniteStateMachine,
                   enc: StateEncoding) -> tuple[InputTransitionTable, OutputTable]:
    """Project the FSM onto codes; agrees with fsm_step on every entry."""
    code_of = enc.as_dict()
    codes = tuple(code_of[s] for s in fsm.states)
    nxt: dict[tuple[str, int], int] = {}
    for state in fsm.states:
        for signal in fsm.inputs:
            nxt[(signal, code_of[state])] = code_of[
                fsm.transitions.get((state, signal), state)]
    emits = {
        out: frozenset((code_of[s], f) for (s, f, o) in fsm.output_rules if o == out)
        for out in fsm.outputs
    }
    return (InputTransitionTable(width=enc.width, signals=fsm.inputs,
                                 codes=codes, next=nxt),
            OutputTable(outputs=fsm.outputs, emits=emits))


# ---------------------------------------------------------------------------
# per-bit expressions


@dataclass
class OptResultTable:
    """Canonical per-bit and per-output expressions for one encoding."""

    width: int
    signals: tuple[str, ...]
    outputs: tuple[str, ...]
    store: BddStore
    next_expr: dict[tuple[int, str], int]        # (bit, signal) -> BDD root
    pulse_fn: dict[tuple[int, str], int]         # cofactor at signal = 1
    output_expr: dict[str, int]                  # output -> BDD root
    output_cubes: dict[tuple[str, str], list[dict[int, bool]]]  # (output, signal)

    def robdd(self, bit: int, signal: str) -> Robdd:
        return Robdd(self.store, self.next_expr[(bit, signal)])

    def output_robdd(self, output: str) -> Robdd:
        return Robdd(self.store, self.output_expr[output])

    def sop_str(self, bit: int, signal: str) -> str:
        return str(bx.to_min_sop(self.robdd(bit, signal)))


def variable_order(width: int, signals) -> list[str]:
    """Fixed global order: state bits most significant first, then signals."""
    return [qvar(b) for b in range(width - 1, -1, -1)] + list(signals)


def _cube_keyed_by_bit(cube: dict[str, bool]) -> dict[int, bool]:
    return {int(name[1:]): val for name, val in cube.items()}


def per_bit_expressions(itt: InputTransitionTable, ot: OutputTable) -> OptResultTable:
    """Minimized next-state and output expressions for every bit and signal."""
    width = itt.width
    store = BddStore(variable_order(width, itt.signals))
    qnames = [qvar(b) for b in range(width)]
    assigned = sorted(set(itt.codes))
    dc = [c for c in range(2 ** width) if c not in set(assigned)]

    next_expr: dict[tuple[int, str], int] = {}
    pulse_fn: dict[tuple[int, str], int] = {}
    for signal in itt.signals:
        for bit in range(width):
            on = [c for c in assigned if (itt.next_code(signal, c) >> bit) & 1]
            cubes = bx.minimize_cubes(qnames, on, dc)
            f_root = store.from_expr(bx.cubes_to_expr(cubes, store.order))
            sig_root = store.var(signal)
            hold_root = store.var(qvar(bit))
            root = store.ite(sig_root, f_root, hold_root)
            next_expr[(bit, signal)] = root
            pulse_fn[(bit, signal)] = f_root

    output_expr: dict[str, int] = {}
    output_cubes: dict[tuple[str, str], list[dict[int, bool]]] = {}
    for out in ot.outputs:
        total = 0
        for signal in itt.signals:
            on = [c for c in assigned if (c, signal) in ot.emits[out]]
            if not on:
                continue
            cubes = bx.minimize_cubes(qnames, on, dc)
            output_cubes[(out, signal)] = [_cube_keyed_by_bit(c) for c in cubes]
            g_root = store.from_expr(bx.cubes_to_expr(cubes, store.order))
            total = store.apply_or(total, store.apply_and(g_root, store.var(signal)))
        output_expr[out] = total

    return OptResultTable(width=width, signals=itt.signals, outputs=ot.outputs,
                          store=store, next_expr=next_expr, pulse_fn=pulse_fn,
                          output_expr=output_expr, output_cubes=output_cubes)


# ---------------------------------------------------------------------------
# marking


@dataclass
class Port:
    """One input port of a sequential component.

    ``trigger`` is the net whose pulse drives the port; reads emit on
    ``out_net``/``nout_net``.  Within one port reads happen before writes.
    """

    trigger: Net
    effects: frozenset[str]
    out_net: Net | None = None
    nout_net: Net | None = None

    def effect_tuple(self) -> tuple[str, ...]:
        return tuple(sorted(self.effects, key=EFFECT_RANK.get))


# Table V port encoding; None means the effect set has no listed type id.
TABLE_V_IDS = {
    frozenset({EFFECT_SET}): 0,
    frozenset({EFFECT_CLEAR}): 1,
    frozenset({EFFECT_TOGGLE}): 2,
    frozenset({EFFECT_OUT}): 3,
    frozenset({EFFECT_OUT, EFFECT_CLEAR}): 4,
    frozenset({EFFECT_NOUT, EFFECT_CLEAR}): 5,
    frozenset({EFFECT_OUT, EFFECT_NOUT, EFFECT_CLEAR}): 6,
}


def signature_of(effect_sets) -> tuple[tuple[str, ...], ...]:
    """Order-insensitive mapping key: sorted tuple of sorted effect tuples."""
    return tuple(sorted(tuple(sorted(es, key=EFFECT_RANK.get)) for es in effect_sets))


def type_ids_of(effect_sets) -> tuple[int, ...] | None:
    """Sorted Table V ids, or None if any port falls outside the table."""
    ids = []
    for es in effect_sets:
        tid = TABLE_V_IDS.get(frozenset(es))
        if tid is None:
            return None
        ids.append(tid)
    return tuple(sorted(ids))


@dataclass
class MarkedComponent:
    """One state bit with its ports, set sources, and group annotations."""

    bit: int
    ports: dict[Net, Port] = field(default_factory=dict)
    kinds: dict[str, str] = field(default_factory=dict)   # signal -> pattern kind
    absorbed_by: tuple[int, int] | None = None            # AND-group membership

    def port(self, trigger: Net) -> Port:
        p = self.ports.get(trigger)
        if p is None:
            p = Port(trigger=trigger, effects=frozenset())
            self.ports[trigger] = p
        return p

    def add_effect(self, trigger: Net, effect: str,
                   out_net: Net | None = None, nout_net: Net | None = None) -> None:
        p = self.port(trigger)
        p.effects = p.effects | {effect}
        if out_net is not None:
            p.out_net = out_net
        if nout_net is not None:
            p.nout_net = nout_net

    def sorted_ports(self) -> list[Port]:
        return [self.ports[k] for k in sorted(self.ports, key=_net_key)]

    def signature(self) -> tuple[tuple[str, ...], ...]:
        return signature_of(p.effects for p in self.sorted_ports())

    def type_ids(self) -> tuple[int, ...] | None:
        return type_ids_of(p.effects for p in self.sorted_ports())

    def set_sources(self) -> list[Net]:
        return [p.trigger for p in self.sorted_ports() if EFFECT_SET in p.effects]

    def write_triggers(self, signal: str) -> list[Net]:
        return [p.trigger for p in self.sorted_ports()
                if p.trigger.signal == signal
                and p.effects & {EFFECT_SET, EFFECT_CLEAR, EFFECT_TOGGLE}]


@dataclass(frozen=True)
class AndGroup:
    """Two pure-storage bits whose joint read collapses into one AND cell."""

    low_bit: int
    high_bit: int
    signal: str
    low_set: Net
    high_set: Net
    out_net: Net


@dataclass(frozen=True)
class UnmappableEntry:
    """A (component, signal) whose expression fits no realizable pattern."""

    subject: str
    signal: str
    expression: str
    reason: str


@dataclass
class Marking:
    """Marked components plus the net-level structure feeding the mapper."""

    width: int
    signals: tuple[str, ...]
    outputs: tuple[str, ...]
    components: list[MarkedComponent]
    output_nets: dict[str, Net]
    pending_cubes: list[tuple[dict[int, bool], str]] = field(default_factory=list)
    and_groups: list[AndGroup] = field(default_factory=list)
    merge_nets: list[MergeNet] = field(default_factory=list)
    unmappable: list[UnmappableEntry] = field(default_factory=list)
    grouped: bool = False

    def __iter__(self):
        return iter(self.components)

    def component(self, bit: int) -> MarkedComponent:
        return self.components[bit]

    def generated_nets(self) -> list[Net]:
        """Every derived net, deterministically ordered."""
        nets: set[Net] = set()

        def note(net: Net | None):
            if net is None or isinstance(net, PrimaryNet):
                return
            nets.add(net)
            if isinstance(net, ReadNet):
                note(net.trigger)
            elif isinstance(net, MergeNet):
                for t in net.terms:
                    note(t)

        for comp in self.components:
            for p in comp.sorted_ports():
                note(p.trigger)
                note(p.out_net)
                note(p.nout_net)
        for net in self.output_nets.values():
            note(net)
        for g in self.and_groups:
            note(g.out_net)
        return sorted(nets, key=_net_key)


def _register_cube(marking: Marking, cube: dict[int, bool], signal: str) -> Net:
    """Create the net for one cube; defer multi-literal reads to grouping."""
    net = term_net(cube, signal)
    if len(cube) == 1:
        ((bit, positive),) = cube.items()
        comp = marking.component(bit)
        if positive:
            comp.add_effect(PrimaryNet(signal), EFFECT_OUT, out_net=net)
        else:
            comp.add_effect(PrimaryNet(signal), EFFECT_NOUT, nout_net=net)
    elif len(cube) >= 2:
        if (cube, signal) not in marking.pending_cubes:
            marking.pending_cubes.append((cube, signal))
    return net


def _register_guard(marking: Marking, cubes: list[dict[int, bool]],
                    signal: str) -> Net:
    if not cubes:
        raise ValueError("empty guard")
    if cubes == [{}]:
        return PrimaryNet(signal)
    for cube in cubes:
        _register_cube(marking, cube, signal)
    net = guard_net(cubes, signal)
    if isinstance(net, MergeNet) and net not in marking.merge_nets:
        marking.merge_nets.append(net)
    return net


def mark_effects(opt: OptResultTable) -> Marking:
    """Classify every (bit, signal) expression and build component ports."""
    marking = Marking(width=opt.width, signals=opt.signals, outputs=opt.outputs,
                      components=[MarkedComponent(bit=b) for b in range(opt.width)],
                      output_nets={})
    store = opt.store
    for bit in range(opt.width):
        comp = marking.components[bit]
        qb = store.var(qvar(bit))
        for signal in opt.signals:
            e1 = opt.pulse_fn[(bit, signal)]
            if e1 == qb:
                comp.kinds[signal] = "hold"
                continue
            a = store.restrict(e1, qvar(bit), True)
            b = store.restrict(e1, qvar(bit), False)
            if a == 1:
                comp.kinds[signal] = "set"
                guard = b
            elif e1 == 0:
                comp.kinds[signal] = "clear"
                comp.add_effect(PrimaryNet(signal), EFFECT_CLEAR)
                continue
            elif a == store.apply_not(b):
                comp.kinds[signal] = "toggle"
                guard = b
            else:
                comp.kinds[signal] = "clearset"
                comp.add_effect(PrimaryNet(signal), EFFECT_CLEAR)
                guard = e1
            cubes = [_cube_keyed_by_bit(c)
                     for c in bx.min_sop_cubes(Robdd(store, guard))]
            net = _register_guard(marking, cubes, signal)
            effect = EFFECT_TOGGLE if comp.kinds[signal] == "toggle" else EFFECT_SET
            comp.add_effect(net, effect)

    for out in opt.outputs:
        terms: list[Net] = []
        for signal in opt.signals:
            cubes = opt.output_cubes.get((out, signal))
            if not cubes:
                continue
            for cube in cubes:
                terms.append(_register_cube(marking, cube, signal))
        if not terms:
            continue
        if len(terms) == 1:
            marking.output_nets[out] = terms[0]
        else:
            net = MergeNet(tuple(sorted(terms, key=_net_key)))
            if net not in marking.merge_nets:
                marking.merge_nets.append(net)
            marking.output_nets[out] = net
    return marking


def _try_and_group(marking: Marking, cube: dict[int, bool], signal: str) -> bool:
    """AND-group applies when the joint read is the bits' only read, the
    triggering signal clears both, and each bit is otherwise pure set storage
    with a single set source."""
    if len(cube) != 2 or not all(cube.values()):
        return False
    lo, hi = sorted(cube)
    for bit in (lo, hi):
        comp = marking.component(bit)
        if comp.absorbed_by is not None:
            return False
        if comp.kinds.get(signal) not in ("clear", "clearset"):
            return False
        for sig, kind in comp.kinds.items():
            if sig == signal:
                continue
            if kind not in ("hold", "set"):
                return False
        if len(comp.set_sources()) != 1:
            return False
        for p in comp.sorted_ports():
            if p.effects & {EFFECT_OUT, EFFECT_NOUT}:
                return False
    # the pair must not be read under any other signal
    for other_cube, other_sig in marking.pending_cubes:
        if other_sig != signal and sorted(other_cube) == [lo, hi]:
            return False
    lo_comp, hi_comp = marking.component(lo), marking.component(hi)
    group = AndGroup(low_bit=lo, high_bit=hi, signal=signal,
                     low_set=lo_comp.set_sources()[0],
                     high_set=hi_comp.set_sources()[0],
                     out_net=term_net(cube, signal))
    lo_comp.absorbed_by = (lo, hi)
    hi_comp.absorbed_by = (lo, hi)
    marking.and_groups.append(group)
    return True


def _expand_chain(marking: Marking, cube: dict[int, bool], signal: str) -> None:
    """Realize a multi-literal cube as a read chain, checking write hazards."""
    trigger: Net = PrimaryNet(signal)
    for bit in sorted(cube):
        positive = cube[bit]
        comp = marking.component(bit)
        emitted = ReadNet(bit=bit, positive=positive, trigger=trigger)
        if not isinstance(trigger, PrimaryNet):
            writes = comp.write_triggers(signal)
            if any(w != trigger for w in writes):
                marking.unmappable.append(UnmappableEntry(
                    subject=qvar(bit), signal=signal,
                    expression=emitted.expr_str(),
                    reason="read through a derived net races a write on the "
                           "same pulse"))
                return
        if comp.absorbed_by is not None:
            marking.unmappable.append(UnmappableEntry(
                subject=qvar(bit), signal=signal,
                expression=emitted.expr_str(),
                reason="bit is absorbed into an AND group"))
            return
        if positive:
            comp.add_effect(trigger, EFFECT_OUT, out_net=emitted)
        else:
            comp.add_effect(trigger, EFFECT_NOUT, nout_net=emitted)
        trigger = emitted


def recognize_groups(marking: Marking) -> Marking:
    """Resolve pending multi-bit reads into AND groups or read chains."""
    if marking.grouped:
        return marking
    for cube, signal in list(marking.pending_cubes):
        if _try_and_group(marking, cube, signal):
            continue
        _expand_chain(marking, cube, signal)
    marking.grouped = True
    return marking


def decompose(fsm: FiniteStateMachine, enc: StateEncoding):
    """Full table -> expression -> marking pipeline for one encoding."""
    itt, ot = extract_tables(fsm, enc)
    opt = per_bit_expressions(itt, ot)
    marking = recognize_groups(mark_effects(opt))
    return itt, ot, opt, marking


# ---------------------------------------------------------------------------
# table dump (mirrors the shapes of the classic transition tables)


def format_tables(fsm: FiniteStateMachine, enc: StateEncoding,
                  itt: InputTransitionTable, ot: OutputTable,
                  opt: OptResultTable) -> str:
    width = itt.width
    lines = [f"input transition table for {fsm.name} "
             f"(rows: current code, columns: pulsed signal)"]
    emit_by_code: dict[tuple[int, str], list[str]] = {}
    for out, pairs in ot.emits.items():
        for code, signal in pairs:
            emit_by_code.setdefault((code, signal), []).append(out)
    head = "code".ljust(max(width, 4) + 2)
    head += "".join(s.ljust(width + 4) for s in itt.signals)
    lines.append(head)
    for state in fsm.states:
        code = enc.code(state)
        row = format(code, f"0{width}b").ljust(max(width, 4) + 2) if width else "-".ljust(6)
        for signal in itt.signals:
            cell = format(itt.next_code(signal, code), f"0{width}b") if width else "-"
            outs = emit_by_code.get((code, signal))
            if outs:
                cell += "/" + ",".join(sorted(outs))
            row += cell.ljust(width + 4)
        lines.append(row)
    lines.append("")
    lines.append("per-bit next-state expressions")
    for bit in range(width - 1, -1, -1):
        for signal in itt.signals:
            lines.append(f"  {qvar(bit)}* <{signal}> = {opt.sop_str(bit, signal)}")
    for out in ot.outputs:
        expr = bx.to_min_sop(Robdd(opt.store, opt.output_expr[out]))
        lines.append(f"  {out} = {expr}")
    return "\n".join(lines) + "\n"
