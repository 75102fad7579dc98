"""Up-counter generators: monolithic FSMs and the per-bit compositional build.

A monolithic N-bit counter FSM has 2**N states, so it is only usable for
small N.  Large counters are built compositionally: the 2-state single-bit
slice (toggle on the count pulse, emit a carry when wrapping 1 -> 0, clear
on reset, read on clock) is synthesized once through the normal pipeline
and then stamped N times with each carry feeding the next slice's count
input.  Both paths produce 3 gates per bit with the sample PDK.
"""

from __future__ import annotations

from .encoding import build_encoding_tree, enumerate_encodings
from .decompose import decompose
from .fsm import FiniteStateMachine, parse_fsm
from .mapping import Instance, Netlist, map_components
from .pdk import PDK

__all__ = ["make_counter_fsm", "counter_slice_fsm", "build_counter_netlist"]

MONOLITHIC_LIMIT = 6  # bits; 2**N states beyond this is not desk-feasible


def make_counter_fsm(bits: int) -> FiniteStateMachine:
    """Monolithic 2**bits-state up-counter FSM (small ``bits`` only)."""
    if not 1 <= bits <= MONOLITHIC_LIMIT:
        raise ValueError(f"monolithic counters support 1..{MONOLITHIC_LIMIT} bits")
    n = 2 ** bits
    lines = [f".name counter{bits}",
             ".inputs Din Rst Clk",
             ".outputs " + " ".join(f"Out{i + 1}" for i in range(bits)),
             ".states " + " ".join(f"S{k}" for k in range(n)),
             ".initial S0"]
    for k in range(n):
        lines.append(f".trans S{k} Din S{(k + 1) % n}")
        if k:
            lines.append(f".trans S{k} Rst S0")
        for i in range(bits):
            if (k >> i) & 1:
                lines.append(f".out S{k} Clk Out{i + 1}")
    lines.append(".end")
    return parse_fsm("\n".join(lines))


def counter_slice_fsm() -> FiniteStateMachine:
    """One counter bit: 2 states, carry emitted when the bit wraps to zero."""
    return parse_fsm("""
.name counter_slice
.inputs din rst clk
.outputs carry q
.states B0 B1
.initial B0
.trans B0 din B1
.trans B1 din B0
.trans B1 rst B0
.out B1 din carry
.out B1 clk q
.end
""")


def synthesize_slice(pdk: PDK) -> Netlist:
    """Synthesize the single-bit slice through the regular pipeline."""
    fsm = counter_slice_fsm()
    enc = next(enumerate_encodings(build_encoding_tree(fsm, 1)))
    _itt, _ot, _opt, marking = decompose(fsm, enc)
    return map_components(marking, pdk, name=fsm.name, inputs=fsm.inputs,
                          outputs=fsm.outputs, encoding=enc)


def build_counter_netlist(bits: int, pdk: PDK) -> Netlist:
    """Compose an N-bit ripple counter from N synthesized slices.

    Slice i's carry output becomes slice i+1's count input; Rst and Clk are
    shared.  The top carry is left dangling.  The result is acyclic.
    """
    if bits < 1:
        raise ValueError("bits must be positive")
    slice_nl = synthesize_slice(pdk)
    netlist = Netlist(
        name=f"counter{bits}",
        inputs=("Din", "Rst", "Clk"),
        outputs=tuple(f"Out{i + 1}" for i in range(bits)),
    )
    for i in range(bits):
        rename = {
            "din": "Din" if i == 0 else f"carry{i - 1}",
            "rst": "Rst",
            "clk": "Clk",
            slice_nl.po_nets["carry"]: f"carry{i}",
            slice_nl.po_nets["q"]: f"Out{i + 1}",
        }
        for inst in slice_nl.instances:
            ports = {p: rename.get(net, f"b{i}_{net}")
                     for p, net in inst.ports.items()}
            netlist.instances.append(Instance(
                name=f"b{i}_{inst.name}", cell=inst.cell, ports=ports))
        netlist.po_nets[f"Out{i + 1}"] = f"Out{i + 1}"
    netlist.metadata = {
        "census": netlist.census(),
        "gate_count": len(netlist.instances),
        "compositional": True,
        "bits": bits,
        "slice_census": slice_nl.census(),
    }
    return netlist
