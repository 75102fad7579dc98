import random
from itertools import combinations, product

import pytest
from hypothesis import given, settings, strategies as st

from fluxsynth.boolexpr import (BddError, BddStore, Robdd, Var, build,
                                cubes_to_expr, equivalent, evaluate,
                                min_sop_cubes, minimize_cubes, to_dot,
                                to_min_sop)


def q(name):
    return Var(name)


# ---------------------------------------------------------------------------
# build


def test_two_variable_or_structure_is_forced():
    d = build(q("Q0") | q("Din"), ["Q0", "Din"])
    store = d.store
    level, low, high = store.nodes[d.root]
    assert store.order[level] == "Q0"
    assert high == 1                       # Q0 true -> function true
    lvl2, low2, high2 = store.nodes[low]   # else decide on Din
    assert store.order[lvl2] == "Din" and low2 == 0 and high2 == 1
    assert d.node_count() == 4             # 2 decision nodes + both terminals


def test_absorption_collapses_to_single_variable():
    st_ = BddStore(["Q0", "Rst"])
    a = st_.from_expr((q("Q0") & ~q("Rst")) | (q("Q0") & q("Rst")))
    assert a == st_.from_expr(q("Q0"))


def test_next_state_column_under_enable():
    # hold bit under a pulse: Q0* = Q0 & ~En
    st_ = BddStore(["Q0", "En"])
    column = st_.from_expr(q("Q0") & ~q("En"))
    assert st_.evaluate(column, {"Q0": True, "En": False})
    assert not st_.evaluate(column, {"Q0": True, "En": True})


def test_build_rejects_unknown_variable():
    with pytest.raises(BddError):
        build(q("zz"), ["Q0"])


def test_contradiction_reduces_to_terminal():
    d = build(q("x") & ~q("x"), ["x"])
    assert d.root == 0
    assert d.node_count() == 1


# ---------------------------------------------------------------------------
# equivalence


def test_xor_expansion_equivalent():
    order = ["Q", "F"]
    a = build(q("Q") ^ q("F"), order)
    b = build((q("Q") & ~q("F")) | (~q("Q") & q("F")), order)
    assert equivalent(a, b)


def test_negation_not_equivalent():
    order = ["Q"]
    assert not equivalent(build(q("Q"), order), build(~q("Q"), order))


def test_enable_column_two_forms_equivalent():
    order = ["Q1", "Q0", "En"]
    a = build((q("Q1") & ~q("En")) | (q("Q0") & q("En")), order)
    b = build((q("Q1") | (q("Q0") & q("En"))) & (~q("En") | q("Q0")), order)
    assert equivalent(a, b)


def test_equivalent_rejects_order_mismatch():
    with pytest.raises(BddError):
        equivalent(build(q("a"), ["a", "b"]), build(q("a"), ["b", "a"]))


def test_canonicity_same_store_root_identity():
    store = BddStore(["a", "b", "c"])
    r1 = store.from_expr((q("a") | q("b")) & q("c"))
    r2 = store.from_expr((q("a") & q("c")) | (q("b") & q("c")))
    assert r1 == r2


# ---------------------------------------------------------------------------
# minimal SOP


def test_min_sop_constant_one():
    d = build(q("a") | ~q("a"), ["a"])
    assert str(to_min_sop(d)) == "1"


def test_min_sop_two_cube_enable_column():
    order = ["Q1", "Q0", "En"]
    d = build((q("Q1") & ~q("En")) | (q("Q0") & q("En")), order)
    cubes = min_sop_cubes(d)
    assert len(cubes) == 2
    assert equivalent(build(to_min_sop(d), order), d)


def _truth_table_qm_oracle(n, on):
    """Independent exact minimizer: all primes by shrinking, smallest cover
    by exhaustive subset search."""
    minterms = set(on)
    if not minterms:
        return 0
    if len(minterms) == 2 ** n:
        return 1
    cubes = {(m, (1 << n) - 1) for m in minterms}  # (value, care-mask)

    def covered(cube):
        value, mask = cube
        free = [i for i in range(n) if not mask & (1 << i)]
        for bits in product((0, 1), repeat=len(free)):
            v = value
            for b, i in zip(bits, free):
                v = (v & ~(1 << i)) | (b << i)
            if v not in minterms:
                return False
        return True

    primes = set()
    frontier = set(cubes)
    seen = set()
    while frontier:
        cube = frontier.pop()
        if cube in seen:
            continue
        seen.add(cube)
        value, mask = cube
        grew = False
        for i in range(n):
            if mask & (1 << i):
                wider = (value & ~(1 << i), mask & ~(1 << i))
                if covered(wider):
                    grew = True
                    frontier.add(wider)
        if not grew:
            primes.add(cube)
    primes = sorted(primes)

    def cube_minterms(cube):
        value, mask = cube
        free = [i for i in range(n) if not mask & (1 << i)]
        out = set()
        for bits in product((0, 1), repeat=len(free)):
            v = value
            for b, i in zip(bits, free):
                v = (v & ~(1 << i)) | (b << i)
            out.add(v)
        return out

    for size in range(1, len(primes) + 1):
        for combo in combinations(range(len(primes)), size):
            hit = set()
            for idx in combo:
                hit |= cube_minterms(primes[idx])
            if minterms <= hit:
                return size
    return len(primes)


def test_min_sop_matches_quine_mccluskey_oracle():
    rng = random.Random(7)
    names = ["a", "b", "c", "d"]
    for _ in range(120):
        n = rng.randint(1, 4)
        order = names[:n]
        on = [m for m in range(2 ** n) if rng.random() < 0.5]
        cubes = minimize_cubes(order, on)
        want = _truth_table_qm_oracle(n, on)
        assert len(cubes) == want
        if on:
            got = build(cubes_to_expr(cubes, order), order)
            truth = {m: (m in set(on)) for m in range(2 ** n)}
            for m in range(2 ** n):
                env = {order[i]: bool((m >> i) & 1) for i in range(n)}
                assert got.evaluate(env) == truth[m]


def test_minimize_with_dont_cares_shrinks_cover():
    # ON {11}, DC {01, 10}: single cube "a" (or "b") suffices
    cubes = minimize_cubes(["a", "b"], [3], [1, 2])
    assert len(cubes) == 1


# ---------------------------------------------------------------------------
# properties

_expr = st.recursive(
    st.sampled_from([q(f"v{i}") for i in range(6)]),
    lambda kids: st.one_of(
        st.builds(lambda a: ~a, kids),
        st.builds(lambda a, b: a & b, kids, kids),
        st.builds(lambda a, b: a | b, kids, kids),
        st.builds(lambda a, b: a ^ b, kids, kids)),
    max_leaves=12)

_ORDER6 = [f"v{i}" for i in range(6)]


@given(a=_expr, b=_expr)
@settings(max_examples=100, deadline=None)
def test_equivalence_agrees_with_truth_tables(a, b):
    store = BddStore(_ORDER6)
    ra, rb = Robdd(store, store.from_expr(a)), Robdd(store, store.from_expr(b))
    same_truth = True
    for m in range(2 ** 6):
        env = {f"v{i}": bool((m >> i) & 1) for i in range(6)}
        if evaluate(a, env) != evaluate(b, env):
            same_truth = False
            break
    assert equivalent(ra, rb) == same_truth


@given(a=_expr)
@settings(max_examples=150, deadline=None)
def test_min_sop_preserves_semantics(a):
    d = build(a, _ORDER6)
    sop = to_min_sop(d)
    for m in range(2 ** 6):
        env = {f"v{i}": bool((m >> i) & 1) for i in range(6)}
        assert evaluate(sop, env) == d.evaluate(env)


def test_dot_dump_mentions_variables():
    dot = to_dot(build(q("a") & q("b"), ["a", "b"]))
    assert "digraph" in dot and '"a"' in dot and '"b"' in dot
