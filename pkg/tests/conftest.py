import random
from importlib.resources import files

import pytest

from fluxsynth.fsm import FiniteStateMachine, parse_fsm
from fluxsynth.pdk import load_pdk_file

DATA = files("fluxsynth") / "data"


@pytest.fixture(scope="session")
def pdk():
    return load_pdk_file(str(DATA / "sample_pdk.json"))


@pytest.fixture(scope="session")
def sample_pdk_path():
    return str(DATA / "sample_pdk.json")


@pytest.fixture(scope="session")
def erdff():
    return parse_fsm((DATA / "erdff.fsm").read_text())


@pytest.fixture(scope="session")
def feedback():
    return parse_fsm((DATA / "feedback.fsm").read_text())


@pytest.fixture(scope="session")
def counter2():
    return parse_fsm((DATA / "counter2.fsm").read_text())


@pytest.fixture(scope="session")
def erdff_path():
    return str(DATA / "erdff.fsm")


@pytest.fixture(scope="session")
def counter2_path():
    return str(DATA / "counter2.fsm")


@pytest.fixture(scope="session")
def feedback_path():
    return str(DATA / "feedback.fsm")


@pytest.fixture(scope="session")
def comb_demo_path():
    return str(DATA / "pipeline_demo.comb")


def random_fsm(rng: random.Random, max_states=4, max_inputs=3, max_outputs=2,
               trans_p=0.45, out_p=0.2, name="rand") -> FiniteStateMachine:
    """Small random pulse FSM; always valid, reachability not guaranteed."""
    n_states = rng.randint(1, max_states)
    n_inputs = rng.randint(1, max_inputs)
    n_outputs = rng.randint(0, max_outputs)
    states = tuple(f"S{i}" for i in range(n_states))
    inputs = tuple(f"in{i}" for i in range(n_inputs))
    outputs = tuple(f"out{i}" for i in range(n_outputs))
    transitions = {}
    rules = set()
    for s in states:
        for f in inputs:
            if rng.random() < trans_p:
                target = rng.choice(states)
                if target != s:
                    transitions[(s, f)] = target
            if outputs and rng.random() < out_p:
                rules.add((s, f, rng.choice(outputs)))
    fsm = FiniteStateMachine(name=name, inputs=inputs, outputs=outputs,
                             states=states, initial="S0",
                             transitions=transitions,
                             output_rules=frozenset(rules))
    fsm.validate()
    return fsm
