import itertools
from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from helpers import SWITCHES, world_prob
from liftex.ground import ONE, ZERO, GroundEngine, QueryError, ground_query
from liftex.program import CallGoal, load, map_populations, parse_query

VARS = [("r", 1), ("s", 1), ("r", 2), ("s", 3)]


def worlds():
    outs = [SWITCHES[s].outcomes for s, _ in VARS]
    for combo in itertools.product(*outs):
        yield dict(zip(VARS, combo))


def weight(world):
    p = 1.0
    for (s, _), o in world.items():
        sw = SWITCHES[s]
        p *= sw.probs[sw.outcomes.index(o)]
    return p


# random boolean formulas over msw atoms, evaluated directly
formulas = st.recursive(
    st.tuples(st.just("rv"), st.sampled_from(VARS), st.integers(0, 2)),
    lambda inner: st.tuples(st.sampled_from(["and", "or"]), inner, inner),
    max_leaves=8,
)


def truth(f, world):
    if f[0] == "rv":
        (s, z), i = f[1], f[2]
        outs = SWITCHES[s].outcomes
        return world[(s, z)] == outs[i % len(outs)]
    a, b = truth(f[1], world), truth(f[2], world)
    return a and b if f[0] == "and" else a or b


def compile_(f, e):
    if f[0] == "rv":
        (s, z), i = f[1], f[2]
        outs = SWITCHES[s].outcomes
        return e.rv(s, z, outs[i % len(outs)])
    a, b = compile_(f[1], e), compile_(f[2], e)
    return e.g_and(a, b) if f[0] == "and" else e.g_or(a, b)


@settings(max_examples=200, deadline=None)
@given(formulas)
def test_apply_matches_truth_table(f):
    e = GroundEngine(SWITCHES)
    u = compile_(f, e)
    for w in worlds():
        assert e.evaluate(u, w) == truth(f, w)


@settings(max_examples=200, deadline=None)
@given(formulas)
def test_probability_matches_world_sum(f):
    e = GroundEngine(SWITCHES)
    u = compile_(f, e)
    expected = sum(weight(w) for w in worlds() if truth(f, w))
    assert e.g_prob(u) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(formulas, formulas)
def test_canonical_ids(f, g):
    e = GroundEngine(SWITCHES)
    u, v = compile_(f, e), compile_(g, e)
    same = all(truth(f, w) == truth(g, w) for w in worlds())
    assert (u == v) == same


@settings(max_examples=100, deadline=None)
@given(formulas)
def test_explanations_are_exclusive_and_cover(f):
    e = GroundEngine(SWITCHES)
    u = compile_(f, e)
    expl = e.explanations(u)
    for w in worlds():
        hits = sum(all(w[(s, z)] == o for s, z, o in ex) for ex in expl)
        assert hits == (1 if truth(f, w) else 0)


def test_laws_on_leaves():
    e = GroundEngine(SWITCHES)
    a = e.rv("r", 1, "a")
    assert e.g_and(a, ONE) == a and e.g_and(a, ZERO) == ZERO
    assert e.g_or(a, ZERO) == a and e.g_or(a, ONE) == ONE
    assert e.g_or(a, e.rv("r", 1, "b")) == ONE
    assert e.g_and(a, e.rv("r", 1, "b")) == ZERO
    with pytest.raises(ValueError):
        e.rv("r", 1, "zz")


def test_node_reorders_children():
    e = GroundEngine(SWITCHES)
    # (r,2) above a child that tests (r,1), which comes first in the order
    child = e.rv("r", 1, "a")
    u = e.node("r", 2, [child, ZERO])
    assert u == e.g_and(e.rv("r", 2, "a"), child)
    assert e.label(u) == ("r", 1)


def test_mk_reduces_equal_children():
    e = GroundEngine(SWITCHES)
    a = e.rv("r", 3, "a")
    assert e.mk("s", 1, [a, a, a]) == a
    with pytest.raises(ValueError):
        e.mk("s", 1, [a, a])


def test_dot_output():
    e = GroundEngine(SWITCHES)
    u = e.g_and(e.rv("r", 1, "a"), e.rv("s", 2, "c"))
    dot = e.to_dot(u)
    assert dot.startswith("digraph G {")
    assert '"(r,1)"' in dot and '"(s,2)"' in dot
    assert '[label="c"]' in dot


def corpus(name):
    return load(resources.files("liftex").joinpath("corpus", name).read_text(), name)


@pytest.mark.parametrize("name, query, pop, ns", [
    ("twoheads.px", "twoheads", "coins", range(1, 7)),
    ("dice.px", "q", "dice", range(1, 4)),
    ("urn.px", "twosame", "draws", range(1, 5)),
])
def test_ground_query_matches_world_enumeration(name, query, pop, ns):
    tp = corpus(name)
    for n in ns:
        pm = map_populations(tp, {pop: n})
        e, u = ground_query(tp, pm, parse_query(query))
        assert e.g_prob(u) == pytest.approx(world_prob(tp, pm, parse_query(query)), abs=1e-12)


def test_twoheads_known_values():
    tp = corpus("twoheads.px")
    got = []
    for n in (2, 3, 4):
        e, u = ground_query(tp, map_populations(tp, {"coins": n}), CallGoal("twoheads"))
        got.append(e.g_prob(u))
    assert got == pytest.approx([0.25, 0.5, 0.6875], abs=1e-12)


def test_dice_two_dice():
    tp = corpus("dice.px")
    e, u = ground_query(tp, map_populations(tp, {"dice": 2}), CallGoal("q"))
    assert e.g_prob(u) == pytest.approx(2 / 36, abs=1e-12)


def test_query_with_unknown_constant():
    tp = corpus("urn.px")
    e, u = ground_query(tp, map_populations(tp), parse_query("pair(purple)"))
    assert u == ZERO
    with pytest.raises(QueryError):
        ground_query(tp, map_populations(tp), parse_query("nothing"))
