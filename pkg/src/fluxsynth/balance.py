"""Combinational post-treatment: clocking, path balancing, splitter trees.

RSFQ Boolean gates are clocked, so a plain Boolean netlist only computes
correctly once every gate input arrives at the same clocked stage depth.
``balance_paths`` replaces each Boolean gate with its clocked counterpart
from the PDK, feeds every gate a shared clock net, and pads any edge that
skips stages with a chain of D flip-flops.  Inputs count as depth 0 and
are assumed pulse-aligned.

The combinational input format is line oriented (``#`` comments)::

    .inputs a b c
    .outputs y
    n1 = AND(a, b)       # AND/OR/XOR take 2 arguments, NOT takes 1
    y  = OR(n1, c)
    .end

``insert_splitters`` is a separate pass legalizing fanout on any mapped
netlist; splitter trees are balanced to minimize added depth.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .mapping import Instance, Netlist
from .pdk import PDK

__all__ = [
    "BalanceError", "CombNetlist", "CombGate", "parse_comb",
    "compute_depths", "balance_paths", "insert_splitters",
    "evaluate_comb", "CLOCK_NET",
]

CLOCK_NET = "clk"
_GATE_ARITY = {"AND": 2, "OR": 2, "XOR": 2, "NOT": 1}
_GATE_LINE = re.compile(
    r"^(?P<out>\w+)\s*=\s*(?P<op>[A-Za-z]+)\s*\(\s*(?P<args>[\w\s,]*)\)$")


class BalanceError(Exception):
    pass


@dataclass
class CombGate:
    name: str      # also the output net name
    op: str
    fanin: tuple[str, ...]


@dataclass
class CombNetlist:
    """A DAG of Boolean gates; gate names double as their output nets."""

    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    gates: list[CombGate] = field(default_factory=list)

    def gate_map(self) -> dict[str, CombGate]:
        return {g.name: g for g in self.gates}


def parse_comb(text: str) -> CombNetlist:
    inputs: list[str] = []
    outputs: list[str] = []
    gates: list[CombGate] = []
    ended = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ended:
            raise BalanceError(f"line {lineno}: content after .end")
        if line.startswith(".inputs"):
            inputs.extend(line.split()[1:])
        elif line.startswith(".outputs"):
            outputs.extend(line.split()[1:])
        elif line == ".end":
            ended = True
        else:
            m = _GATE_LINE.match(line)
            if not m:
                raise BalanceError(f"line {lineno}: cannot parse {line!r}")
            op = m.group("op").upper()
            if op not in _GATE_ARITY:
                raise BalanceError(f"line {lineno}: unknown gate type {op!r}")
            args = tuple(a.strip() for a in m.group("args").split(",") if a.strip())
            if len(args) != _GATE_ARITY[op]:
                raise BalanceError(
                    f"line {lineno}: {op} takes {_GATE_ARITY[op]} inputs")
            gates.append(CombGate(name=m.group("out"), op=op, fanin=args))
    if not ended:
        raise BalanceError("missing .end")
    names = set(inputs)
    for gate in gates:
        if gate.name in names:
            raise BalanceError(f"net {gate.name!r} driven twice")
        names.add(gate.name)
    for gate in gates:
        for ref in gate.fanin:
            if ref not in names:
                raise BalanceError(f"gate {gate.name!r} reads undriven net {ref!r}")
    for out in outputs:
        if out not in {g.name for g in gates}:
            raise BalanceError(f"output {out!r} is not a gate output")
    net = CombNetlist(inputs=tuple(inputs), outputs=tuple(outputs), gates=gates)
    compute_depths(net)  # rejects cycles
    return net


def compute_depths(n: CombNetlist) -> dict[str, int]:
    """Longest-path logic depth per gate; primary inputs sit at depth 0."""
    depth: dict[str, int] = {i: 0 for i in n.inputs}
    gmap = n.gate_map()
    visiting: set[str] = set()

    def walk(name: str) -> int:
        if name in depth:
            return depth[name]
        if name in visiting:
            raise BalanceError(f"combinational cycle through {name!r}")
        visiting.add(name)
        gate = gmap[name]
        d = 1 + max(walk(f) for f in gate.fanin)
        visiting.discard(name)
        depth[name] = d
        return d

    for gate in n.gates:
        walk(gate.name)
    return {g.name: depth[g.name] for g in n.gates}


def _clocked_cells(pdk: PDK) -> dict[str, object]:
    """Locate the clocked counterparts of the Boolean gate types."""
    from .decompose import signature_of

    def sig(*effect_sets):
        return signature_of(frozenset(es) for es in effect_sets)

    wanted = {
        "AND": lambda: pdk.require_kind("and2", "clocked AND"),
        "OR": lambda: pdk.find_signature_cell(
            sig({"set"}, {"set"}, {"out", "clear"}), "clocked OR"),
        "XOR": lambda: pdk.find_signature_cell(
            sig({"toggle"}, {"toggle"}, {"out", "clear"}), "clocked XOR"),
        "NOT": lambda: pdk.find_signature_cell(
            sig({"set"}, {"nout", "clear"}), "clocked NOT"),
        "DFF": lambda: pdk.find_signature_cell(
            sig({"set"}, {"out", "clear"}), "path-balancing DFF"),
    }
    return {kind: find() for kind, find in wanted.items()}


def balance_paths(n: CombNetlist, pdk: PDK) -> Netlist:
    """Clock every gate and pad depth-skipping edges with DFF chains.

    An edge from a depth-d producer into a depth-d' consumer gets
    d' - d - 1 flip-flops, after which all fanins of every gate arrive at
    equal clocked depth.  The clock net is named ``clk`` and is added as a
    primary input; the name must not collide with an existing net.
    """
    if CLOCK_NET in n.inputs or any(g.name == CLOCK_NET for g in n.gates):
        raise BalanceError(f"net name {CLOCK_NET!r} is reserved for the clock")
    cells = _clocked_cells(pdk)
    depth = compute_depths(n)
    depth.update({i: 0 for i in n.inputs})
    out = Netlist(name="balanced", inputs=tuple(n.inputs) + (CLOCK_NET,),
                  outputs=tuple(n.outputs))
    dff = cells["DFF"]
    dff_count = 0

    def staged(net: str, upto: int) -> str:
        """Net delayed to effective depth ``upto`` via a DFF chain."""
        nonlocal dff_count
        have = depth[net]
        current = net
        for k in range(upto - have - 1):
            target = f"{net}_d{have + k + 1}"
            name = f"u_dff{dff_count}"
            dff_count += 1
            out.instances.append(Instance(
                name=name, cell=dff.name,
                ports={dff.ports[0].name: current, dff.ports[1].name: CLOCK_NET,
                       dff.ports[1].out: target}))
            current = target
        return current

    for gate in sorted(n.gates, key=lambda g: (depth[g.name], g.name)):
        cell = cells[gate.op]
        d = depth[gate.name]
        fanin_nets = [staged(f, d) for f in gate.fanin]
        if gate.op == "NOT":
            a_port, clk_port = cell.ports
            ports = {a_port.name: fanin_nets[0], clk_port.name: CLOCK_NET,
                     clk_port.nout: gate.name}
        elif gate.op == "AND":
            a_port, b_port = [p for p in cell.ports if p.out is None]
            clk_port = next(p for p in cell.ports if p.out is not None)
            ports = {a_port.name: fanin_nets[0], b_port.name: fanin_nets[1],
                     clk_port.name: CLOCK_NET, clk_port.out: gate.name}
        else:
            a_port, b_port, clk_port = cell.ports
            ports = {a_port.name: fanin_nets[0], b_port.name: fanin_nets[1],
                     clk_port.name: CLOCK_NET, clk_port.out: gate.name}
        out.instances.append(Instance(name=f"u_{gate.name}", cell=cell.name,
                                      ports=ports))
    for po in n.outputs:
        out.po_nets[po] = po
    out.metadata = {
        "source": "balance",
        "dff_inserted": dff_count,
        "pipeline_depth": max(depth.values(), default=0),
        "census": out.census(),
        "output_depths": {po: depth[po] for po in n.outputs},
    }
    return out


def evaluate_comb(n: CombNetlist, assignment: dict[str, bool]) -> dict[str, bool]:
    """Plain Boolean evaluation, the truth-table oracle for balancing."""
    value = dict(assignment)
    gmap = n.gate_map()

    def walk(name: str) -> bool:
        if name in value:
            return value[name]
        gate = gmap[name]
        vals = [walk(f) for f in gate.fanin]
        if gate.op == "AND":
            result = vals[0] and vals[1]
        elif gate.op == "OR":
            result = vals[0] or vals[1]
        elif gate.op == "XOR":
            result = vals[0] != vals[1]
        else:
            result = not vals[0]
        value[name] = result
        return result

    return {po: walk(po) for po in n.outputs}


def insert_splitters(netlist: Netlist, pdk: PDK, max_fanout: int = 2) -> Netlist:
    """Legalize fanout: any net driving more than ``max_fanout`` sinks gets a
    balanced splitter tree.  Connectivity is preserved; splitters are not
    counted as logic gates by the reporter."""
    if max_fanout < 2:
        raise BalanceError("max_fanout must be at least 2")
    split = pdk.require_kind("split", "needed for fanout legalization")
    out_names = list(split.outputs)
    in_port = split.ports[0].name

    result = Netlist(name=netlist.name, inputs=netlist.inputs,
                     outputs=netlist.outputs,
                     instances=[Instance(i.name, i.cell, dict(i.ports))
                                for i in netlist.instances],
                     po_nets=dict(netlist.po_nets),
                     metadata=dict(netlist.metadata))
    sinks: dict[str, list[tuple[int, str]]] = {}
    for idx, inst in enumerate(result.instances):
        cell = pdk.cell(inst.cell)
        outs = set(cell.outputs)
        for pname, net in inst.ports.items():
            if pname not in outs:
                sinks.setdefault(net, []).append((idx, pname))
    for out, net in sorted(result.po_nets.items()):
        sinks.setdefault(net, []).append((-1, out))  # output pads are sinks too

    split_count = 0
    for net in sorted(sinks):
        takers = sinks[net]
        if len(takers) <= max_fanout:
            continue
        # leaves of the tree are the original sink ports; build levels of
        # splitters until one root drives the whole group from `net`
        leaf_nets = []
        for k, (idx, pname) in enumerate(takers):
            leaf = f"{net}_f{k}"
            if idx < 0:
                result.po_nets[pname] = leaf
            else:
                result.instances[idx].ports[pname] = leaf
            leaf_nets.append(leaf)
        level = leaf_nets
        while len(level) > 1:
            nxt = []
            for i in range(0, len(level), len(out_names)):
                chunk = level[i:i + len(out_names)]
                if len(chunk) == 1:
                    nxt.append(chunk[0])
                    continue
                top = (net if len(level) <= len(out_names)
                       else f"{net}_s{split_count}")
                ports = {in_port: top}
                for oname, target in zip(out_names, chunk):
                    ports[oname] = target
                result.instances.append(Instance(
                    name=f"u_split{split_count}", cell=split.name, ports=ports))
                split_count += 1
                nxt.append(top)
            level = nxt
    result.metadata = dict(result.metadata)
    result.metadata["splitters_inserted"] = split_count
    return result
