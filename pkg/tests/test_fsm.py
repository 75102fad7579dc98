import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_fsm
from fluxsynth.fsm import (FsmError, FsmSyntaxError, StimulusError, fsm_run,
                           fsm_step, parse_fsm, serialize_fsm)


def test_erdff_transition_map(erdff):
    assert erdff.transitions[("S1", "En")] == "S2"
    assert erdff.transitions[("S1", "Rst")] == "S0"
    assert erdff.transitions[("S0", "Din")] == "S1"
    assert ("S2", "Rst") not in erdff.transitions  # hold entry is implicit
    assert ("S2", "Clk", "Out") in erdff.output_rules


def test_single_state_machine_holds():
    fsm = parse_fsm("""
.name tiny
.inputs go
.states only
.initial only
.end
""")
    assert fsm_step(fsm, "only", "go") == ("only", frozenset())


def test_undeclared_state_is_an_error():
    with pytest.raises(FsmSyntaxError) as err:
        parse_fsm("""
.name bad
.inputs a
.states S0
.initial S0
.trans S0 a S9
.end
""")
    assert "S9" in str(err.value)
    assert err.value.line == 6


def test_duplicate_transition_rejected():
    with pytest.raises(FsmSyntaxError, match="duplicate transition"):
        parse_fsm("""
.name bad
.inputs a
.states S0 S1
.initial S0
.trans S0 a S1
.trans S0 a S0
.end
""")


def test_missing_end_reports_line():
    with pytest.raises(FsmSyntaxError, match=".end"):
        parse_fsm(".name x\n.states S0\n.initial S0\n")


def test_step_erdff_clk_reads_output(erdff):
    assert fsm_step(erdff, "S2", "Clk") == ("S2", frozenset({"Out"}))
    assert fsm_step(erdff, "S0", "Clk") == ("S0", frozenset())


def test_step_hold_default(erdff):
    nxt, outs = fsm_step(erdff, "S2", "Rst")
    assert (nxt, outs) == ("S2", frozenset())


def test_run_erdff_store_enable_read(erdff):
    trace = fsm_run(erdff, [(0, "Din"), (1, "En"), (2, "Clk")])
    assert trace.outputs == ((2, "Out"),)


def test_run_empty_stimulus(erdff):
    assert fsm_run(erdff, []).outputs == ()


def test_run_counter_counts_to_three(counter2):
    # hand fold: three Din pulses reach state 3, both outputs read on Clk
    stim = [(0, "Din"), (1, "Din"), (2, "Din"), (3, "Clk"), (4, "Clk")]
    trace = fsm_run(counter2, stim)
    assert set(trace.outputs) == {(3, "Out1"), (3, "Out2"),
                                  (4, "Out1"), (4, "Out2")}


def test_run_rejects_simultaneous_pulses(erdff):
    with pytest.raises(StimulusError):
        fsm_run(erdff, [(0, "Din"), (0, "Rst")])


def test_run_rejects_undeclared_signal(erdff):
    with pytest.raises(FsmError):
        fsm_run(erdff, [(0, "nope")])


def test_unreachable_states_reported():
    fsm = parse_fsm("""
.name island
.inputs a
.states S0 S1 S2
.initial S0
.trans S0 a S1
.end
""")
    assert fsm.unreachable_states() == ("S2",)


def test_serialize_round_trip_golden(erdff, feedback, counter2):
    for fsm in (erdff, feedback, counter2):
        again = parse_fsm(serialize_fsm(fsm))
        assert again == fsm
        # canonical form is a fixed point
        assert serialize_fsm(again) == serialize_fsm(fsm)


@given(seed=st.integers(min_value=0, max_value=10_000))
@settings(max_examples=60, deadline=None)
def test_serialize_round_trip_random(seed):
    fsm = random_fsm(random.Random(seed))
    assert parse_fsm(serialize_fsm(fsm)) == fsm


@given(seed=st.integers(min_value=0, max_value=10_000), data=st.data())
@settings(max_examples=60, deadline=None)
def test_hold_default_property(seed, data):
    fsm = random_fsm(random.Random(seed))
    state = data.draw(st.sampled_from(fsm.states))
    signal = data.draw(st.sampled_from(fsm.inputs))
    nxt, _ = fsm_step(fsm, state, signal)
    if (state, signal) not in fsm.transitions:
        assert nxt == state


@given(seed=st.integers(min_value=0, max_value=10_000))
@settings(max_examples=40, deadline=None)
def test_run_is_deterministic(seed):
    rng = random.Random(seed)
    fsm = random_fsm(rng)
    stim = [(t, rng.choice(fsm.inputs)) for t in range(rng.randint(0, 8))]
    assert fsm_run(fsm, stim) == fsm_run(fsm, stim)
