"""Process design kit: cell library, port effect encodings, supergates.

A PDK file is a JSON document::

    {"name": "...",
     "cells": [{"name": "NDRO", "kind": "state1", "jj": 11,
                "delay_ps": 7.0, "power_uw": 1.4,
                "ports": [{"name": "set", "effects": ["set"]},
                          {"name": "rst", "effects": ["clear"]},
                          {"name": "clk", "effects": ["out"], "out": "q"}],
                "outputs": ["q"]}, ...],
     "supergates": [{"name": "...", "ports": [...], "outputs": [...],
                     "body": [{"name": "u1", "cell": "RTFF",
                               "ports": {"t": "t", ...}}, ...]}]}

``kind`` selects the simulation model: ``state1`` cells derive their
behavior entirely from port effect sets, ``and2`` is the two-bit AND
primitive
(both operands stored, conjunction read and cleared by the clock),
``merge`` is the confluence buffer, and ``split`` the pulse splitter.
Supergate bodies are validated at load time by simulating them against the
one-bit machine implied by their port signature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .decompose import (EFFECT_CLEAR, EFFECT_NOUT, EFFECT_OUT, EFFECT_SET,
                        EFFECT_TOGGLE, signature_of, type_ids_of)

__all__ = ["PdkError", "CellPort", "Cell", "Supergate", "PDK", "load_pdk",
           "load_pdk_file"]

_VALID_EFFECTS = {EFFECT_SET, EFFECT_CLEAR, EFFECT_TOGGLE, EFFECT_OUT, EFFECT_NOUT}
_VALID_KINDS = {"state1", "and2", "merge", "split"}


class PdkError(Exception):
    pass


@dataclass(frozen=True)
class CellPort:
    """One input port: its effect set and the output ports its reads feed."""

    name: str
    effects: frozenset[str] = frozenset()
    out: str | None = None
    nout: str | None = None


@dataclass
class Cell:
    name: str
    kind: str
    ports: tuple[CellPort, ...]
    outputs: tuple[str, ...]
    jj: int = 0
    delay_ps: float = 0.0
    power_uw: float = 0.0

    def signature(self):
        return signature_of(p.effects for p in self.ports)

    def type_ids(self):
        return type_ids_of(p.effects for p in self.ports)


@dataclass
class Supergate:
    """A stored mini-netlist behaving like one missing library cell."""

    name: str
    ports: tuple[CellPort, ...]
    outputs: tuple[str, ...]
    body: tuple[tuple[str, str, dict[str, str]], ...]  # (inst, cell, port->net)

    def signature(self):
        return signature_of(p.effects for p in self.ports)


@dataclass
class PDK:
    name: str
    cells: list[Cell]
    supergates: list[Supergate] = field(default_factory=list)
    note: str = ""

    def __post_init__(self):
        self.by_name = {c.name: c for c in self.cells}
        self._cells_by_sig: dict[tuple, list[Cell]] = {}
        for cell in self.cells:
            if cell.kind == "state1":
                self._cells_by_sig.setdefault(cell.signature(), []).append(cell)
        for sig in self._cells_by_sig:
            self._cells_by_sig[sig].sort(key=lambda c: (c.jj, c.name))
        self._sg_by_sig: dict[tuple, list[Supergate]] = {}
        for sg in self.supergates:
            self._sg_by_sig.setdefault(sg.signature(), []).append(sg)
        for sig in self._sg_by_sig:
            self._sg_by_sig[sig].sort(key=lambda s: s.name)

    def cell(self, name: str) -> Cell:
        try:
            return self.by_name[name]
        except KeyError:
            raise PdkError(f"unknown cell {name!r}") from None

    def cells_with_signature(self, sig) -> list[Cell]:
        return list(self._cells_by_sig.get(tuple(sig), []))

    def supergates_with_signature(self, sig) -> list[Supergate]:
        return list(self._sg_by_sig.get(tuple(sig), []))

    def find_kind(self, kind: str) -> Cell | None:
        best = [c for c in self.cells if c.kind == kind]
        best.sort(key=lambda c: (c.jj, c.name))
        return best[0] if best else None

    def require_kind(self, kind: str, why: str) -> Cell:
        cell = self.find_kind(kind)
        if cell is None:
            raise PdkError(f"PDK {self.name!r} has no {kind} cell ({why})")
        return cell

    def find_signature_cell(self, sig, why: str) -> Cell:
        cells = self.cells_with_signature(sig)
        if not cells:
            raise PdkError(f"PDK {self.name!r} has no cell with signature "
                           f"{sig} ({why})")
        return cells[0]


def _parse_port(raw: dict, cell_name: str) -> CellPort:
    effects = frozenset(raw.get("effects", []))
    bad = effects - _VALID_EFFECTS
    if bad:
        raise PdkError(f"cell {cell_name!r}: unknown effects {sorted(bad)}")
    return CellPort(name=raw["name"], effects=effects,
                    out=raw.get("out"), nout=raw.get("nout"))


def _check_ports(name: str, kind: str, ports: tuple[CellPort, ...],
                 outputs: tuple[str, ...]) -> None:
    if not ports:
        raise PdkError(f"cell {name!r} declares no ports")
    if len({p.name for p in ports}) != len(ports):
        raise PdkError(f"cell {name!r} has duplicate port names")
    if len(set(outputs)) != len(outputs):
        raise PdkError(f"cell {name!r} has duplicate output names")
    for p in ports:
        for target in (p.out, p.nout):
            if target is not None and target not in outputs:
                raise PdkError(f"cell {name!r} port {p.name!r} emits on "
                               f"undeclared output {target!r}")
        if kind == "state1":
            if not p.effects:
                raise PdkError(f"cell {name!r} port {p.name!r} has no effects")
            if EFFECT_OUT in p.effects and p.out is None:
                raise PdkError(f"cell {name!r} port {p.name!r} has an out "
                               f"effect but no output binding")
            if EFFECT_NOUT in p.effects and p.nout is None:
                raise PdkError(f"cell {name!r} port {p.name!r} has a nout "
                               f"effect but no output binding")
    if kind == "and2":
        plain = [p for p in ports if p.out is None]
        read = [p for p in ports if p.out is not None]
        if len(plain) != 2 or len(read) != 1:
            raise PdkError(f"and2 cell {name!r} needs two operand ports and "
                           f"one reading clock port")
    if kind == "merge" and (len(ports) != 2 or len(outputs) != 1):
        raise PdkError(f"merge cell {name!r} must be 2-input 1-output")
    if kind == "split" and (len(ports) != 1 or len(outputs) < 2):
        raise PdkError(f"split cell {name!r} must be 1-input multi-output")


def load_pdk(text: str, *, validate_supergates: bool = True) -> PDK:
    """Parse and validate a PDK document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PdkError(f"PDK is not valid JSON: {exc}") from None
    raw_cells = doc.get("cells", [])
    if not raw_cells:
        raise PdkError("PDK declares no cells")
    cells = []
    seen = set()
    for raw in raw_cells:
        name = raw.get("name")
        if not name:
            raise PdkError("cell without a name")
        if name in seen:
            raise PdkError(f"duplicate cell {name!r}")
        seen.add(name)
        kind = raw.get("kind", "state1")
        if kind not in _VALID_KINDS:
            raise PdkError(f"cell {name!r}: unknown kind {kind!r}")
        ports = tuple(_parse_port(p, name) for p in raw.get("ports", []))
        outputs = tuple(raw.get("outputs", []))
        _check_ports(name, kind, ports, outputs)
        cell = Cell(name=name, kind=kind, ports=ports, outputs=outputs,
                    jj=int(raw.get("jj", 0)),
                    delay_ps=float(raw.get("delay_ps", 0.0)),
                    power_uw=float(raw.get("power_uw", 0.0)))
        if "type_ids" in raw:
            declared = tuple(raw["type_ids"])
            derived = cell.type_ids()
            if declared != derived:
                raise PdkError(f"cell {name!r}: declared type ids {declared} "
                               f"do not match port effects {derived}")
        cells.append(cell)

    supergates = []
    for raw in doc.get("supergates", []):
        name = raw.get("name")
        if not name:
            raise PdkError("supergate without a name")
        if name in seen:
            raise PdkError(f"duplicate cell/supergate name {name!r}")
        seen.add(name)
        ports = tuple(_parse_port(p, name) for p in raw.get("ports", []))
        outputs = tuple(raw.get("outputs", []))
        _check_ports(name, "state1", ports, outputs)
        body = tuple((inst["name"], inst["cell"], dict(inst["ports"]))
                     for inst in raw.get("body", []))
        if not body:
            raise PdkError(f"supergate {name!r} has an empty body")
        supergates.append(Supergate(name=name, ports=ports, outputs=outputs,
                                    body=body))

    pdk = PDK(name=doc.get("name", "pdk"), cells=cells, supergates=supergates,
              note=doc.get("note", ""))
    for sg in supergates:
        for inst, cellname, _bindings in sg.body:
            if cellname not in pdk.by_name:
                raise PdkError(f"supergate {sg.name!r} instantiates unknown "
                               f"cell {cellname!r}")
    if validate_supergates:
        from .netsim import validate_supergate  # deferred: netsim imports pdk
        for sg in supergates:
            problem = validate_supergate(pdk, sg)
            if problem:
                raise PdkError(f"supergate {sg.name!r} does not implement its "
                               f"signature: {problem}")
    return pdk


def load_pdk_file(path, **kwargs) -> PDK:
    with open(path, "r", encoding="utf-8") as handle:
        return load_pdk(handle.read(), **kwargs)
