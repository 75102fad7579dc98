"""Boolean expressions, reduced ordered BDDs, and two-level minimization.

The BDD store keeps a fixed global variable order per instance; equivalent
expressions built in the same store share the identical root node, so
equivalence of canonical forms is root identity.  Minimization is exact
(prime cover with Petrick-style selection) up to 8 variables and greedy
above that; decomposition expressions are per state bit and per input
signal, so they stay far below the exact threshold in practice.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

__all__ = [
    "Expr", "Var", "Const", "Not", "And", "Or", "Xor",
    "TRUE", "FALSE",
    "BddStore", "Robdd", "BddError",
    "build", "equivalent", "to_min_sop", "min_sop_cubes",
    "minimize_cubes", "cubes_to_expr", "evaluate", "to_dot",
]

EXACT_MINIMIZE_LIMIT = 8  # variables; beyond this the cover search is greedy


class BddError(Exception):
    pass


# ---------------------------------------------------------------------------
# expression trees


class Expr:
    """Base class for Boolean expression nodes.  Supports &, |, ^ and ~."""

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __xor__(self, other):
        return Xor(self, other)

    def __invert__(self):
        return Not(self)

    def variables(self) -> set[str]:
        out: set[str] = set()
        _collect_vars(self, out)
        return out


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const(Expr):
    value: bool

    def __str__(self):
        return "1" if self.value else "0"


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr

    def __str__(self):
        return f"~{_paren(self.arg)}"


@dataclass(frozen=True)
class And(Expr):
    args: tuple[Expr, ...]

    def __init__(self, *args: Expr):
        object.__setattr__(self, "args", tuple(args))

    def __str__(self):
        return " & ".join(_paren(a) for a in self.args) if self.args else "1"


@dataclass(frozen=True)
class Or(Expr):
    args: tuple[Expr, ...]

    def __init__(self, *args: Expr):
        object.__setattr__(self, "args", tuple(args))

    def __str__(self):
        return " | ".join(str(a) if isinstance(a, (Var, Const, Not, And)) else _paren(a)
                          for a in self.args) if self.args else "0"


@dataclass(frozen=True)
class Xor(Expr):
    a: Expr
    b: Expr

    def __str__(self):
        return f"{_paren(self.a)} ^ {_paren(self.b)}"


TRUE = Const(True)
FALSE = Const(False)


def _paren(e: Expr) -> str:
    if isinstance(e, (Var, Const, Not)):
        return str(e)
    return f"({e})"


def _collect_vars(e: Expr, out: set[str]) -> None:
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, Not):
        _collect_vars(e.arg, out)
    elif isinstance(e, (And, Or)):
        for a in e.args:
            _collect_vars(a, out)
    elif isinstance(e, Xor):
        _collect_vars(e.a, out)
        _collect_vars(e.b, out)


def evaluate(e: Expr, env: dict[str, bool]) -> bool:
    """Evaluate an expression under a full variable assignment."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return bool(env[e.name])
    if isinstance(e, Not):
        return not evaluate(e.arg, env)
    if isinstance(e, And):
        return all(evaluate(a, env) for a in e.args)
    if isinstance(e, Or):
        return any(evaluate(a, env) for a in e.args)
    if isinstance(e, Xor):
        return evaluate(e.a, env) != evaluate(e.b, env)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# reduced ordered BDDs


class BddStore:
    """A shared node store with a fixed variable order.

    Nodes are integers: 0 and 1 are the terminals, every other node is an
    index into ``self.nodes`` holding ``(level, low, high)``.  The store is
    confined to one worker; concurrent encoding workers each own their own.
    """

    def __init__(self, order):
        self.order: tuple[str, ...] = tuple(order)
        if len(set(self.order)) != len(self.order):
            raise BddError("duplicate variable in order")
        self.level: dict[str, int] = {v: i for i, v in enumerate(self.order)}
        self.nodes: list[tuple[int, int, int]] = [(-1, -1, -1), (-1, -1, -1)]
        self._unique: dict[tuple[int, int, int], int] = {}
        self._cache: dict[tuple, int] = {}
        self._vars: dict[str, int] = {}

    # node construction -----------------------------------------------------

    def _mk(self, level: int, low: int, high: int) -> int:
        if low == high:
            return low
        key = (level, low, high)
        node = self._unique.get(key)
        if node is None:
            node = len(self.nodes)
            self.nodes.append(key)
            self._unique[key] = node
        return node

    def var(self, name: str) -> int:
        node = self._vars.get(name)
        if node is None:
            if name not in self.level:
                raise BddError(f"unknown variable {name!r}")
            node = self._mk(self.level[name], 0, 1)
            self._vars[name] = node
        return node

    def node_level(self, u: int) -> int:
        return len(self.order) if u < 2 else self.nodes[u][0]

    # boolean operations ----------------------------------------------------

    def apply_not(self, u: int) -> int:
        if u < 2:
            return 1 - u
        key = ("not", u)
        res = self._cache.get(key)
        if res is None:
            level, low, high = self.nodes[u]
            res = self._mk(level, self.apply_not(low), self.apply_not(high))
            self._cache[key] = res
        return res

    def _apply(self, op: str, u: int, v: int) -> int:
        if op == "and":
            if u == 0 or v == 0:
                return 0
            if u == 1:
                return v
            if v == 1:
                return u
            if u == v:
                return u
        elif op == "or":
            if u == 1 or v == 1:
                return 1
            if u == 0:
                return v
            if v == 0:
                return u
            if u == v:
                return u
        elif op == "xor":
            if u == v:
                return 0
            if u == 0:
                return v
            if v == 0:
                return u
            if u == 1:
                return self.apply_not(v)
            if v == 1:
                return self.apply_not(u)
        key = (op, min(u, v), max(u, v))
        res = self._cache.get(key)
        if res is not None:
            return res
        lu, lv = self.node_level(u), self.node_level(v)
        level = min(lu, lv)
        u0, u1 = (self.nodes[u][1], self.nodes[u][2]) if lu == level else (u, u)
        v0, v1 = (self.nodes[v][1], self.nodes[v][2]) if lv == level else (v, v)
        res = self._mk(level, self._apply(op, u0, v0), self._apply(op, u1, v1))
        self._cache[key] = res
        return res

    def apply_and(self, u: int, v: int) -> int:
        return self._apply("and", u, v)

    def apply_or(self, u: int, v: int) -> int:
        return self._apply("or", u, v)

    def apply_xor(self, u: int, v: int) -> int:
        return self._apply("xor", u, v)

    def ite(self, cond: int, then: int, other: int) -> int:
        return self.apply_or(self.apply_and(cond, then),
                             self.apply_and(self.apply_not(cond), other))

    def restrict(self, u: int, name: str, value: bool) -> int:
        """Cofactor of u with variable ``name`` fixed to ``value``."""
        if name not in self.level:
            raise BddError(f"unknown variable {name!r}")
        target = self.level[name]
        key = ("restrict", u, target, value)
        res = self._cache.get(key)
        if res is not None:
            return res
        res = self._restrict(u, target, value)
        self._cache[key] = res
        return res

    def _restrict(self, u: int, target: int, value: bool) -> int:
        if u < 2:
            return u
        level, low, high = self.nodes[u]
        if level > target:
            return u
        if level == target:
            return high if value else low
        return self._mk(level, self._restrict(low, target, value),
                        self._restrict(high, target, value))

    def from_expr(self, e: Expr) -> int:
        if isinstance(e, Const):
            return 1 if e.value else 0
        if isinstance(e, Var):
            return self.var(e.name)
        if isinstance(e, Not):
            return self.apply_not(self.from_expr(e.arg))
        if isinstance(e, And):
            res = 1
            for a in e.args:
                res = self.apply_and(res, self.from_expr(a))
            return res
        if isinstance(e, Or):
            res = 0
            for a in e.args:
                res = self.apply_or(res, self.from_expr(a))
            return res
        if isinstance(e, Xor):
            return self.apply_xor(self.from_expr(e.a), self.from_expr(e.b))
        raise TypeError(f"not an expression: {e!r}")

    def evaluate(self, u: int, env: dict[str, bool]) -> bool:
        while u >= 2:
            level, low, high = self.nodes[u]
            u = high if env[self.order[level]] else low
        return bool(u)

    def node_count(self, u: int) -> int:
        """Number of distinct nodes reachable from u, terminals included."""
        seen = set()
        stack = [u]
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            if n >= 2:
                stack.extend(self.nodes[n][1:])
        return len(seen)


@dataclass(frozen=True)
class Robdd:
    """A handle to a canonical function: a root node inside one store."""

    store: BddStore
    root: int

    @property
    def order(self) -> tuple[str, ...]:
        return self.store.order

    def evaluate(self, env: dict[str, bool]) -> bool:
        return self.store.evaluate(self.root, env)

    def restrict(self, name: str, value: bool) -> "Robdd":
        return Robdd(self.store, self.store.restrict(self.root, name, value))

    def node_count(self) -> int:
        return self.store.node_count(self.root)

    def is_const(self, value: bool) -> bool:
        return self.root == (1 if value else 0)


def build(expr: Expr, order) -> Robdd:
    """Build the canonical ROBDD of ``expr`` under a fresh store with ``order``."""
    store = BddStore(order)
    missing = expr.variables() - set(store.order)
    if missing:
        raise BddError(f"variables not in order: {sorted(missing)}")
    return Robdd(store, store.from_expr(expr))


def equivalent(a: Robdd, b: Robdd) -> bool:
    """True iff a and b denote the same function.  Orders must match."""
    if a.order != b.order:
        raise BddError(f"variable order mismatch: {a.order} vs {b.order}")
    if a.store is b.store:
        return a.root == b.root
    return a.store.from_expr(_robdd_expr(b)) == a.root


def _robdd_expr(d: Robdd) -> Expr:
    """Expression form of a BDD (used to move functions across stores)."""
    cubes = _isop(d.store, d.root, d.root)
    return cubes_to_expr(cubes, d.order)


# ---------------------------------------------------------------------------
# two-level minimization
#
# Cubes are dicts {var: bool} meaning a conjunction of literals; the empty
# cube is the constant 1.


def _isop(store: BddStore, lower: int, upper: int) -> list[dict[str, bool]]:
    """Irredundant SOP between bounds (Minato-Morreale), greedy fallback."""
    if lower == 0:
        return []
    if upper == 1 and lower == 1:
        return [{}]
    level = min(store.node_level(lower), store.node_level(upper))
    name = store.order[level]
    l0, l1 = store.restrict(lower, name, False), store.restrict(lower, name, True)
    u0, u1 = store.restrict(upper, name, False), store.restrict(upper, name, True)
    # cubes that must use the negative / positive literal
    neg = _isop(store, store.apply_and(l0, store.apply_not(u1)), u0)
    pos = _isop(store, store.apply_and(l1, store.apply_not(u0)), u1)
    covered_neg = store.from_expr(cubes_to_expr(neg, store.order))
    covered_pos = store.from_expr(cubes_to_expr(pos, store.order))
    rest_l = store.apply_or(
        store.apply_and(l0, store.apply_not(covered_neg)),
        store.apply_and(l1, store.apply_not(covered_pos)))
    both = _isop(store, rest_l, store.apply_and(u0, u1))
    out = [dict(c, **{name: False}) for c in neg]
    out += [dict(c, **{name: True}) for c in pos]
    out += both
    return out


def minimize_cubes(variables, on_set, dc_set=frozenset()) -> list[dict[str, bool]]:
    """Minimal-cube-count SOP cover of ``on_set`` with optional don't-cares.

    ``variables`` is the ordered variable list; minterms are ints whose bit i
    is the value of ``variables[i]``.  Exact (Quine-McCluskey primes plus an
    exact cover search) up to EXACT_MINIMIZE_LIMIT variables, greedy beyond.
    The result is deterministic: cubes are sorted canonically.
    """
    variables = list(variables)
    n = len(variables)
    on = sorted(set(on_set))
    dc = sorted(set(dc_set) - set(on))
    if not on:
        return []
    if len(on) + len(dc) == 2 ** n:
        return [{}]
    primes = _qm_primes(n, on + dc)
    primes = [p for p in primes if any(_covers_int(p, m, n) for m in on)]
    primes.sort()
    if n <= EXACT_MINIMIZE_LIMIT:
        chosen = _exact_cover(primes, on, n)
    else:
        chosen = _greedy_cover(primes, on, n)
    cubes = []
    for mask, value in sorted(chosen):
        cubes.append({variables[i]: bool((value >> i) & 1)
                      for i in range(n) if (mask >> i) & 1})
    return cubes


def _qm_primes(n: int, terms: list[int]) -> list[tuple[int, int]]:
    """Prime implicants as (care-mask, value) pairs over n variables."""
    level = {(((1 << n) - 1), t) for t in terms}
    primes: set[tuple[int, int]] = set()
    while level:
        merged = set()
        nxt = set()
        cubes = sorted(level)
        by_mask: dict[int, list[int]] = {}
        for mask, value in cubes:
            by_mask.setdefault(mask, []).append(value)
        for mask, values in by_mask.items():
            vset = set(values)
            for value in values:
                for i in range(n):
                    bit = 1 << i
                    if not mask & bit:
                        continue
                    if value & bit:
                        continue
                    if (value | bit) in vset:
                        merged.add((mask, value))
                        merged.add((mask, value | bit))
                        nxt.add((mask & ~bit, value))
        primes |= level - merged
        level = nxt
    return sorted(primes)


def _covers_int(cube: tuple[int, int], minterm: int, n: int) -> bool:
    mask, value = cube
    return (minterm & mask) == value


def _exact_cover(primes, on, n):
    """Smallest subset of primes covering all ON minterms (branch and bound)."""
    cover = []
    for m in on:
        idxs = frozenset(i for i, p in enumerate(primes) if _covers_int(p, m, n))
        cover.append(idxs)
    # essential primes first
    chosen: set[int] = set()
    remaining = list(cover)
    changed = True
    while changed:
        changed = False
        for s in remaining:
            if len(s) == 1:
                i = next(iter(s))
                if i not in chosen:
                    chosen.add(i)
                    changed = True
        if changed:
            remaining = [s for s in remaining if not s & chosen]
    if not remaining:
        return [primes[i] for i in sorted(chosen)]
    candidates = sorted({i for s in remaining for i in s})
    for extra in range(1, len(candidates) + 1):
        for combo in combinations(candidates, extra):
            picked = set(combo)
            if all(s & picked for s in remaining):
                return [primes[i] for i in sorted(chosen | picked)]
    return [primes[i] for i in sorted(chosen | set(candidates))]


def _greedy_cover(primes, on, n):
    uncovered = set(on)
    chosen = []
    while uncovered:
        best = max(primes, key=lambda p: (sum(1 for m in uncovered if _covers_int(p, m, n)),
                                          -primes.index(p)))
        hit = {m for m in uncovered if _covers_int(best, m, n)}
        if not hit:
            raise BddError("cover search failed")
        chosen.append(best)
        uncovered -= hit
    return chosen


def cubes_to_expr(cubes: list[dict[str, bool]], order) -> Expr:
    """Sum-of-products expression from cube dicts, literals in order."""
    if not cubes:
        return FALSE
    rank = {v: i for i, v in enumerate(order)}
    terms = []
    for cube in cubes:
        if not cube:
            return TRUE
        lits = [Var(v) if val else Not(Var(v))
                for v, val in sorted(cube.items(), key=lambda kv: rank[kv[0]])]
        terms.append(lits[0] if len(lits) == 1 else And(*lits))
    if len(terms) == 1:
        return terms[0]
    return Or(*terms)


def min_sop_cubes(d: Robdd) -> list[dict[str, bool]]:
    """Cubes of a minimal SOP for the function of ``d``."""
    support = _support(d)
    n = len(support)
    if n <= EXACT_MINIMIZE_LIMIT:
        on = []
        for bits in range(2 ** n):
            env = {v: bool((bits >> i) & 1) for i, v in enumerate(support)}
            for v in d.order:
                env.setdefault(v, False)
            if d.evaluate(env):
                on.append(bits)
        return minimize_cubes(support, on)
    return _isop(d.store, d.root, d.root)


def to_min_sop(d: Robdd) -> Expr:
    """Sum-of-products form with minimal cube count (exact at small widths)."""
    if d.root == 0:
        return FALSE
    if d.root == 1:
        return TRUE
    return cubes_to_expr(min_sop_cubes(d), d.order)


def _support(d: Robdd) -> list[str]:
    """Variables the function actually depends on, in store order."""
    levels = set()
    stack = [d.root]
    seen = set()
    while stack:
        u = stack.pop()
        if u < 2 or u in seen:
            continue
        seen.add(u)
        level, low, high = d.store.nodes[u]
        levels.add(level)
        stack.append(low)
        stack.append(high)
    return [d.order[i] for i in sorted(levels)]


def to_dot(d: Robdd, name: str = "bdd") -> str:
    """GraphViz DOT dump: solid edges for the 1-branch, dashed for 0."""
    lines = [f"digraph {name} {{", "  rankdir=TB;"]
    seen = set()
    stack = [d.root]
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        if u < 2:
            lines.append(f'  n{u} [shape=box, label="{u}"];')
            continue
        level, low, high = d.store.nodes[u]
        lines.append(f'  n{u} [shape=circle, label="{d.order[level]}"];')
        lines.append(f"  n{u} -> n{low} [style=dashed];")
        lines.append(f"  n{u} -> n{high} [style=solid];")
        stack.extend((low, high))
    lines.append("}")
    return "\n".join(lines) + "\n"
