"""Technology mapping: marked components to a gate-level netlist.

Each non-absorbed component's sorted port signature is looked up in the
cell hash table, then in the supergate table.  A miss retries both tables
allowing the library port to carry extra out/nout emissions (the spare
read dangles), which is how the top bit of a counter, whose carry is
unused, still maps onto the counter-bit supergate.  AND groups become the
PDK's two-bit AND primitive, absorbing both storage bits; merge nets
become confluence-buffer trees.  Supergate hits are inlined, so the final
netlist contains elementary cells only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .decompose import (EFFECT_NOUT, EFFECT_OUT, Marking, MergeNet, Net,
                        PrimaryNet, ReadNet, qvar)
from .encoding import StateEncoding
from .pdk import PDK, Cell, CellPort, PdkError, Supergate

__all__ = [
    "Instance", "Netlist", "CostReport", "MappingFailure",
    "map_components", "emit_netlist", "read_netlist", "report",
    "data_edges", "feedback_edges", "instance_ranks", "write_netlist_file",
]


class MappingFailure(Exception):
    """No cell or supergate covers one or more component signatures."""

    def __init__(self, unmapped: list[str]):
        super().__init__("unmapped signatures: " + "; ".join(unmapped))
        self.unmapped = list(unmapped)


@dataclass
class Instance:
    name: str
    cell: str
    ports: dict[str, str]  # port name -> net name, inputs and outputs alike


@dataclass
class Netlist:
    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    instances: list[Instance] = field(default_factory=list)
    po_nets: dict[str, str] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def nets(self) -> list[str]:
        seen = dict.fromkeys(self.inputs)
        for inst in self.instances:
            for net in inst.ports.values():
                seen.setdefault(net)
        for net in self.po_nets.values():
            seen.setdefault(net)
        return list(seen)

    def census(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for inst in self.instances:
            counts[inst.cell] = counts.get(inst.cell, 0) + 1
        return dict(sorted(counts.items()))


# ---------------------------------------------------------------------------
# port matching


def _match_ports(comp_ports, cell_ports: tuple[CellPort, ...], exact: bool):
    """Injective component-port -> cell-port assignment, or None.

    In relaxed mode a cell port may carry extra out/nout effects beyond the
    component's needs; the spare emissions dangle.  The first assignment in
    cell declaration order is chosen, which keeps mapping deterministic.
    """
    if len(comp_ports) != len(cell_ports):
        return None

    def compatible(cp, lp: CellPort) -> bool:
        if exact:
            return cp.effects == lp.effects
        return (cp.effects <= lp.effects
                and lp.effects - cp.effects <= {EFFECT_OUT, EFFECT_NOUT})

    assignment: list[CellPort] = []
    used: set[int] = set()

    def backtrack(i: int) -> bool:
        if i == len(comp_ports):
            return True
        for j, lp in enumerate(cell_ports):
            if j in used or not compatible(comp_ports[i], lp):
                continue
            used.add(j)
            assignment.append(lp)
            if backtrack(i + 1):
                return True
            used.discard(j)
            assignment.pop()
        return False

    if not backtrack(0):
        return None
    return list(zip(comp_ports, assignment))


def _lookup(ports, pdk: PDK):
    """Resolve a component port list to (cell | supergate, matching).

    Exact signature hits win; several cells sharing a signature are broken
    by minimal junction count, then name.  Relaxed (dangling-read) matches
    are tried only after both exact tables miss.
    """
    from .decompose import signature_of

    sig = signature_of(p.effects for p in ports)
    for cell in pdk.cells_with_signature(sig):
        match = _match_ports(ports, cell.ports, exact=True)
        if match is not None:
            return cell, match
    for sg in pdk.supergates_with_signature(sig):
        match = _match_ports(ports, sg.ports, exact=True)
        if match is not None:
            return sg, match
    state1 = sorted((c for c in pdk.cells if c.kind == "state1"),
                    key=lambda c: (c.jj, c.name))
    for cell in state1:
        match = _match_ports(ports, cell.ports, exact=False)
        if match is not None:
            return cell, match
    for sg in sorted(pdk.supergates, key=lambda s: s.name):
        match = _match_ports(ports, sg.ports, exact=False)
        if match is not None:
            return sg, match
    return None, None


# ---------------------------------------------------------------------------
# net naming


class _NetNamer:
    def __init__(self, marking: Marking, outputs):
        self._names: dict[Net, str] = {}
        self._by_output: dict[Net, list[str]] = {}
        for out, net in marking.output_nets.items():
            self._by_output.setdefault(net, []).append(out)
        for terms in self._by_output.values():
            terms.sort(key=list(outputs).index)

    def name(self, net: Net) -> str:
        if isinstance(net, PrimaryNet):
            return net.name
        cached = self._names.get(net)
        if cached is not None:
            return cached
        bound = self._by_output.get(net)
        if bound:
            name = bound[0]
        elif isinstance(net, ReadNet):
            lits = []
            for bit, positive in net.cube:
                lits.append(f"q{bit}" if positive else f"q{bit}n")
            name = "_".join(reversed(lits)) + "_" + net.signal.lower()
        else:
            name = f"merge{len([n for n in self._names.values() if n.startswith('merge')])}"
        self._names[net] = name
        return name


# ---------------------------------------------------------------------------
# mapping


def map_components(marking: Marking, pdk: PDK, *, name: str,
                   inputs, outputs, encoding: StateEncoding) -> Netlist:
    """Map one marked decomposition onto PDK cells.

    Raises MappingFailure listing every signature (and pattern problem) the
    PDK cannot cover, so the caller can move on to the next encoding.
    """
    failures = [f"{e.subject} under {e.signal}: {e.reason} ({e.expression})"
                for e in marking.unmappable]
    namer = _NetNamer(marking, outputs)
    netlist = Netlist(name=name, inputs=tuple(inputs), outputs=tuple(outputs))
    supergates_used: dict[str, int] = {}
    dangle_count = 0

    def dangling() -> str:
        nonlocal dangle_count
        dangle_count += 1
        return f"nc{dangle_count - 1}"

    plans = []
    for comp in marking.components:
        if comp.absorbed_by is not None or not comp.ports:
            continue
        ports = comp.sorted_ports()
        target, match = _lookup(ports, pdk)
        if target is None:
            failures.append(f"{qvar(comp.bit)}: signature {comp.signature()}")
            continue
        plans.append((comp, target, match))

    if failures:
        raise MappingFailure(failures)

    for comp, target, match in plans:
        bindings: dict[str, str] = {}
        for cport, lport in match:
            bindings[lport.name] = namer.name(cport.trigger)
            if lport.out is not None:
                bindings[lport.out] = (namer.name(cport.out_net)
                                       if cport.out_net is not None else dangling())
            if lport.nout is not None:
                bindings[lport.nout] = (namer.name(cport.nout_net)
                                        if cport.nout_net is not None else dangling())
        if isinstance(target, Supergate):
            supergates_used[target.name] = supergates_used.get(target.name, 0) + 1
            prefix = f"u_{qvar(comp.bit).lower()}"
            for inst_name, cell_name, inst_ports in target.body:
                resolved = {}
                for pname, ref in inst_ports.items():
                    resolved[pname] = bindings.get(ref, f"{prefix}_{ref}")
                netlist.instances.append(Instance(
                    name=f"{prefix}_{inst_name}", cell=cell_name, ports=resolved))
        else:
            netlist.instances.append(Instance(
                name=f"u_{qvar(comp.bit).lower()}", cell=target.name,
                ports=bindings))

    and_cell = None
    for group in marking.and_groups:
        if and_cell is None:
            and_cell = pdk.require_kind("and2", "needed to map an AND group")
        operand_a, operand_b = [p for p in and_cell.ports if p.out is None]
        clk_port = next(p for p in and_cell.ports if p.out is not None)
        netlist.instances.append(Instance(
            name=f"u_and_q{group.low_bit}q{group.high_bit}", cell=and_cell.name,
            ports={operand_a.name: namer.name(group.low_set),
                   operand_b.name: namer.name(group.high_set),
                   clk_port.name: group.signal,
                   clk_port.out: namer.name(group.out_net)}))

    merge_cell = None
    cb_index = 0
    for net in marking.merge_nets:
        if merge_cell is None:
            merge_cell = pdk.require_kind("merge", "needed for an OR merge")
        a_port, b_port = merge_cell.ports
        (out_port,) = merge_cell.outputs
        level = [namer.name(t) for t in net.terms]
        while len(level) > 1:
            nxt = []
            for i in range(0, len(level) - 1, 2):
                last_pair = len(level) <= 2
                target_net = (namer.name(net) if last_pair
                              else f"{namer.name(net)}_x{cb_index}")
                netlist.instances.append(Instance(
                    name=f"u_cb{cb_index}", cell=merge_cell.name,
                    ports={a_port.name: level[i], b_port.name: level[i + 1],
                           out_port: target_net}))
                cb_index += 1
                nxt.append(target_net)
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt

    for out in outputs:
        net = marking.output_nets.get(out)
        netlist.po_nets[out] = namer.name(net) if net is not None else out

    driven_or_used: set[str] = set()
    for inst in netlist.instances:
        driven_or_used.update(inst.ports.values())
    driven_or_used.update(netlist.po_nets.values())
    netlist.metadata = {
        "encoding": {state: encoding.code_str(state)
                     for state, _ in encoding.assignment},
        "encoding_ordinal": encoding.ordinal,
        "width": encoding.width,
        "census": netlist.census(),
        "gate_count": len(netlist.instances),
        "supergates": dict(sorted(supergates_used.items())),
        "unused_inputs": [i for i in inputs if i not in driven_or_used],
    }
    return netlist


# ---------------------------------------------------------------------------
# structural graph helpers (shared with the simulator and the reporter)


def _port_directions(netlist: Netlist, pdk: PDK):
    """Split every instance's bindings into input and output nets."""
    dirs = []
    for inst in netlist.instances:
        cell = pdk.cell(inst.cell)
        outs = set(cell.outputs)
        in_nets, out_nets = [], []
        for pname, net in inst.ports.items():
            (out_nets if pname in outs else in_nets).append(net)
        dirs.append((inst, in_nets, out_nets))
    return dirs


def data_edges(netlist: Netlist, pdk: PDK) -> list[tuple[str, str]]:
    """Directed instance-to-instance edges induced by shared nets."""
    dirs = _port_directions(netlist, pdk)
    sinks: dict[str, list[str]] = {}
    for inst, in_nets, _ in dirs:
        for net in in_nets:
            sinks.setdefault(net, []).append(inst.name)
    edges = []
    for inst, _, out_nets in dirs:
        for net in out_nets:
            for sink in sinks.get(net, []):
                edges.append((inst.name, sink))
    return sorted(set(edges))


def feedback_edges(netlist: Netlist, pdk: PDK) -> list[tuple[str, str]]:
    """Back edges of a deterministic DFS over the data-edge graph.

    These are the edges the simulator delays by one tick; an empty result
    means the netlist is acyclic.
    """
    adjacency: dict[str, list[str]] = {i.name: [] for i in netlist.instances}
    for src, dst in data_edges(netlist, pdk):
        adjacency[src].append(dst)
    for succs in adjacency.values():
        succs.sort()
    # roots: instances fed by primary inputs first, then the rest
    dirs = _port_directions(netlist, pdk)
    primary = set(netlist.inputs)
    fed = sorted(i.name for i, in_nets, _ in dirs if primary & set(in_nets))
    roots = fed + sorted(set(adjacency) - set(fed))
    color: dict[str, int] = {}
    back: list[tuple[str, str]] = []
    for root in roots:
        if color.get(root):
            continue
        stack = [(root, iter(adjacency[root]))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                state = color.get(nxt, 0)
                if state == 1:
                    back.append((node, nxt))
                elif state == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(adjacency[nxt])))
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()
    return sorted(set(back))


def instance_ranks(netlist: Netlist, pdk: PDK) -> dict[str, int]:
    """Longest-path depth of each instance ignoring feedback edges."""
    fb = set(feedback_edges(netlist, pdk))
    preds: dict[str, list[str]] = {i.name: [] for i in netlist.instances}
    succs: dict[str, list[str]] = {i.name: [] for i in netlist.instances}
    for src, dst in data_edges(netlist, pdk):
        if (src, dst) in fb:
            continue
        preds[dst].append(src)
        succs[src].append(dst)
    rank: dict[str, int] = {}
    pending = {name: len(ps) for name, ps in preds.items()}
    frontier = sorted(name for name, n in pending.items() if n == 0)
    order = []
    while frontier:
        name = frontier.pop(0)
        order.append(name)
        rank[name] = 1 + max((rank[p] for p in preds[name]), default=0)
        ready = []
        for nxt in succs[name]:
            pending[nxt] -= 1
            if pending[nxt] == 0:
                ready.append(nxt)
        frontier = sorted(set(frontier) | set(ready))
    if len(order) != len(preds):
        raise PdkError("internal: feedback removal left a cycle")
    return rank


# ---------------------------------------------------------------------------
# cost report


@dataclass
class CostReport:
    """Synthesis cost summary; timing and power are pre-layout estimates."""

    gates: int
    junctions: int
    power_uw: float
    critical_path_ps: float
    max_freq_ghz: float

    def row(self, circuit: str) -> str:
        freq = f"{self.max_freq_ghz:8.1f}" if self.max_freq_ghz else "       -"
        return (f"{circuit:<20} {self.junctions:>9} {self.gates:>6} "
                f"{freq} {self.power_uw:>9.1f}")

    @staticmethod
    def header() -> str:
        return (f"{'circuit':<20} {'junctions':>9} {'gates':>6} "
                f"{'GHz':>8} {'uW':>9}")


def report(netlist: Netlist, pdk: PDK) -> CostReport:
    """Gate census plus junction, power, and pre-layout frequency estimates.

    Splitters are excluded from the gate count (they are fanout repair, not
    logic) but contribute junctions and power.
    """
    gates = junctions = 0
    power = 0.0
    for inst in netlist.instances:
        cell = pdk.cell(inst.cell)
        junctions += cell.jj
        power += cell.power_uw
        if cell.kind != "split":
            gates += 1
    ranks = instance_ranks(netlist, pdk)
    fb = set(feedback_edges(netlist, pdk))
    preds: dict[str, list[str]] = {i.name: [] for i in netlist.instances}
    for src, dst in data_edges(netlist, pdk):
        if (src, dst) not in fb:
            preds[dst].append(src)
    cell_of = {i.name: pdk.cell(i.cell) for i in netlist.instances}
    delay: dict[str, float] = {}
    for name in sorted(ranks, key=lambda n: (ranks[n], n)):
        delay[name] = cell_of[name].delay_ps + max(
            (delay[p] for p in preds[name]), default=0.0)
    critical = max(delay.values(), default=0.0)
    freq = 1000.0 / critical if critical > 0 else 0.0
    return CostReport(gates=gates, junctions=junctions, power_uw=power,
                      critical_path_ps=critical, max_freq_ghz=freq)


# ---------------------------------------------------------------------------
# emission


def emit_netlist(netlist: Netlist, fmt: str = "data") -> str:
    """Serialize a netlist: ``data`` is JSON that round-trips, ``hdl`` is a
    structural text for human eyes.  Both are byte-deterministic."""
    if fmt == "data":
        doc = {
            "name": netlist.name,
            "inputs": list(netlist.inputs),
            "outputs": list(netlist.outputs),
            "instances": [
                {"name": i.name, "cell": i.cell,
                 "ports": {k: i.ports[k] for k in sorted(i.ports)}}
                for i in netlist.instances
            ],
            "po_nets": {k: netlist.po_nets[k] for k in sorted(netlist.po_nets)},
            "metadata": netlist.metadata,
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if fmt == "hdl":
        ports = ", ".join(list(netlist.inputs) + list(netlist.outputs))
        lines = [f"// netlist {netlist.name}", f"module {netlist.name} ({ports});"]
        if netlist.inputs:
            lines.append("  input " + ", ".join(netlist.inputs) + ";")
        if netlist.outputs:
            lines.append("  output " + ", ".join(netlist.outputs) + ";")
        internal = [n for n in netlist.nets()
                    if n not in netlist.inputs and n not in netlist.po_nets.values()]
        if internal:
            lines.append("  wire " + ", ".join(internal) + ";")
        for out, net in netlist.po_nets.items():
            if net != out:
                lines.append(f"  assign {out} = {net};")
        for inst in netlist.instances:
            binds = ", ".join(f".{p}({n})" for p, n in sorted(inst.ports.items()))
            lines.append(f"  {inst.cell} {inst.name} ({binds});")
        lines.append("endmodule")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown netlist format {fmt!r}")


def read_netlist(text: str) -> Netlist:
    """Read the ``data`` format back into a Netlist."""
    doc = json.loads(text)
    return Netlist(
        name=doc["name"],
        inputs=tuple(doc["inputs"]),
        outputs=tuple(doc["outputs"]),
        instances=[Instance(name=i["name"], cell=i["cell"], ports=dict(i["ports"]))
                   for i in doc["instances"]],
        po_nets=dict(doc.get("po_nets", {})),
        metadata=doc.get("metadata", {}),
    )


def write_netlist_file(netlist: Netlist, path: str, fmt: str = "data") -> None:
    """Atomic write: the file appears complete or not at all."""
    import os
    import tempfile

    text = emit_netlist(netlist, fmt)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fluxsynth_")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
