"""Heuristic state-encoding search tree and candidate enumeration.

The tree assigns bit codes to states in FSM depth-first discovery order.
The root pins the initial state to the all-zero code (an RSFQ chip powers
up with no stored flux anywhere).  Each tree level picks the code of the
next state; children are ordered by the sum of Hamming distances over the
transitions they newly constrain, ties broken by numeric code, so
encodings where a pulse flips few bits are enumerated first.

Per-signal effect hypotheses prune branches: once a signal is committed as
a pure SFQ set it can never flip a bit 1->0 on this path, a pure clear can
never flip 0->1, while a toggle commitment allows anything.  Every guess
set contains toggle, so pruning reorders the enumeration without ever
losing an injective all-zero-rooted assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as _iter_product

from .fsm import FiniteStateMachine

__all__ = [
    "StateEncoding",
    "EncodingTree",
    "SignalTypeHypothesis",
    "EncodingError",
    "guess_signal_type",
    "build_encoding_tree",
    "enumerate_encodings",
    "DEFAULT_ENUMERATION_CAP",
]

DEFAULT_ENUMERATION_CAP = 10_000

KIND_SET = "set"
KIND_CLEAR = "clear"
KIND_TOGGLE = "toggle"
KIND_HOLD = "hold"

# branch order when a signal's kind is still open
_KIND_RANK = {KIND_SET: 0, KIND_CLEAR: 1, KIND_TOGGLE: 2}


class EncodingError(Exception):
    pass


@dataclass(frozen=True)
class StateEncoding:
    """An injective state -> code map; codes are width-bit ints, Q0 is bit 0."""

    width: int
    assignment: tuple[tuple[str, int], ...]
    ordinal: int = -1

    def code(self, state: str) -> int:
        for s, c in self.assignment:
            if s == state:
                return c
        raise KeyError(state)

    def as_dict(self) -> dict[str, int]:
        return dict(self.assignment)

    def code_str(self, state: str) -> str:
        if self.width == 0:
            return ""
        return format(self.code(state), f"0{self.width}b")


@dataclass(frozen=True)
class SignalTypeHypothesis:
    """Per-signal effect kinds committed along one tree path."""

    kinds: tuple[tuple[str, str], ...] = ()

    def kind(self, signal: str) -> str | None:
        for s, k in self.kinds:
            if s == signal:
                return k
        return None

    def committed(self, signal: str, kind: str) -> "SignalTypeHypothesis":
        return SignalTypeHypothesis(self.kinds + ((signal, kind),))


def guess_signal_type(curr: str, nxt: str, visited) -> frozenset[str]:
    """Candidate effect kinds for a signal driving ``curr -> nxt``.

    A self-loop is a hold and commits nothing.  A transition into a state
    not yet discovered may be a set or a toggle; one returning to an
    already-visited state (notably the initial state) may be a clear or a
    toggle.
    """
    if curr == nxt:
        return frozenset({KIND_HOLD})
    if nxt in visited:
        return frozenset({KIND_CLEAR, KIND_TOGGLE})
    return frozenset({KIND_SET, KIND_TOGGLE})


def _pair_consistent(kind: str, code_from: int, code_to: int) -> bool:
    if code_from == code_to:
        return True
    if kind == KIND_SET:
        return code_from & ~code_to == 0
    if kind == KIND_CLEAR:
        return code_to & ~code_from == 0
    return True  # toggle can flip any subset of bits


@dataclass
class _Node:
    """A partial assignment plus kind commitments; children are built lazily."""

    assigned: dict[str, int]
    hypotheses: SignalTypeHypothesis
    depth: int
    key: tuple = ()


@dataclass
class EncodingTree:
    """Lazy search tree over state encodings for one FSM at one width."""

    fsm: FiniteStateMachine
    width: int
    dfs_order: tuple[str, ...]
    _transitions: tuple[tuple[str, str, str], ...] = field(repr=False, default=())

    def leaves(self):
        """Complete encodings in depth-first left-to-right order, deduplicated."""
        seen: set[tuple[tuple[str, int], ...]] = set()
        root = _Node(assigned={self.fsm.initial: 0},
                     hypotheses=SignalTypeHypothesis(), depth=0)
        stack = [root]
        while stack:
            node = stack.pop()
            if node.depth == len(self.dfs_order):
                assignment = tuple((s, node.assigned[s]) for s in self.fsm.states)
                if assignment not in seen:
                    seen.add(assignment)
                    yield assignment
                continue
            children = self._children(node)
            stack.extend(reversed(children))

    def _children(self, node: _Node) -> list[_Node]:
        state = self.dfs_order[node.depth]
        used = set(node.assigned.values())
        visited_before = set(node.assigned)
        # transitions newly constrained once `state` gets a code
        new_pairs = [(src, sig, dst) for (src, sig, dst) in self._transitions
                     if (state in (src, dst))
                     and (src == state or src in node.assigned)
                     and (dst == state or dst in node.assigned)]
        guesses: dict[str, frozenset[str]] = {}
        for src, sig, dst in new_pairs:
            if src == dst or node.hypotheses.kind(sig) is not None:
                continue
            guess = guess_signal_type(src, dst, visited_before) - {KIND_HOLD}
            guesses[sig] = guesses[sig] & guess if sig in guesses else guess
        open_signals = [(sig, tuple(sorted(kinds, key=_KIND_RANK.get)))
                        for sig, kinds in guesses.items() if kinds]
        combos = [()]
        if open_signals:
            combos = [tuple(zip((s for s, _ in open_signals), choice))
                      for choice in _iter_product(*(ks for _, ks in open_signals))]

        children = []
        for code in range(1, 2 ** self.width):
            if code in used:
                continue
            ham_sum = 0
            for src, sig, dst in new_pairs:
                cf = code if src == state else node.assigned[src]
                ct = code if dst == state else node.assigned[dst]
                ham_sum += bin(cf ^ ct).count("1")
            for combo_rank, combo in enumerate(combos):
                hyp = node.hypotheses
                for sig, kind in combo:
                    hyp = hyp.committed(sig, kind)
                ok = True
                for src, sig, dst in new_pairs:
                    if src == dst:
                        continue
                    kind = hyp.kind(sig)
                    if kind is None:
                        continue
                    cf = code if src == state else node.assigned[src]
                    ct = code if dst == state else node.assigned[dst]
                    if not _pair_consistent(kind, cf, ct):
                        ok = False
                        break
                if not ok:
                    continue
                assigned = dict(node.assigned)
                assigned[state] = code
                children.append(_Node(
                    assigned=assigned, hypotheses=hyp, depth=node.depth + 1,
                    key=(ham_sum, code, combo_rank)))
        children.sort(key=lambda c: c.key)
        return children


def _dfs_discovery_order(fsm: FiniteStateMachine) -> tuple[str, ...]:
    """States in DFS discovery order from the initial state; stragglers last.

    Neighbors are explored in input-signal declaration order, which makes
    the tree, and therefore the enumeration, deterministic.
    """
    order: list[str] = []
    visited = {fsm.initial}
    stack = [(fsm.initial, 0)]
    while stack:
        state, idx = stack.pop()
        if idx >= len(fsm.inputs):
            continue
        stack.append((state, idx + 1))
        nxt = fsm.transitions.get((state, fsm.inputs[idx]))
        if nxt is not None and nxt not in visited:
            visited.add(nxt)
            order.append(nxt)
            stack.append((nxt, 0))
    for state in fsm.states:  # unreachable states still need codes
        if state not in visited:
            visited.add(state)
            order.append(state)
    return tuple(order)


def build_encoding_tree(fsm: FiniteStateMachine, width: int) -> EncodingTree:
    """Search tree over all injective all-zero-rooted encodings at ``width``."""
    if 2 ** width < len(fsm.states):
        raise EncodingError(
            f"width {width} cannot encode {len(fsm.states)} states")
    transitions = tuple(
        (src, sig, dst)
        for (src, sig), dst in sorted(
            fsm.transitions.items(),
            key=lambda item: (fsm.states.index(item[0][0]),
                              fsm.inputs.index(item[0][1]))))
    return EncodingTree(fsm=fsm, width=width,
                        dfs_order=_dfs_discovery_order(fsm),
                        _transitions=transitions)


def enumerate_encodings(tree: EncodingTree, limit: int = DEFAULT_ENUMERATION_CAP):
    """Yield StateEncoding leaves left to right, tagged with their ordinal."""
    for ordinal, assignment in enumerate(tree.leaves()):
        if ordinal >= limit:
            return
        yield StateEncoding(width=tree.width, assignment=assignment,
                            ordinal=ordinal)
