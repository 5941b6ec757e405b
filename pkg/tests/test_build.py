from importlib import resources

import pytest

from helpers import world_prob
from liftex import constraints as C
from liftex.algebra import answer_and, answer_quantify, l_or
from liftex.build import UnsupportedQuery, build_closed, build_query_graph
from liftex.ground import GroundEngine, ground_query
from liftex.lifted import (LEAF1, graph, ground, header, lifted_rv, node_count,
                           nodes)
from liftex.program import load, map_populations, parse_query


def corpus(name):
    return load(resources.files("liftex").joinpath("corpus", name).read_text(), name)


def dice_clause(tp, n, face):
    """Graph of ``X in dice, msw(roll,X,face), Y in dice, {X<Y}, msw(roll,Y,face)``."""
    dom = {"X": (1, n), "Y": (1, n)}
    sw = tp.switches
    A = answer_and([lifted_rv("roll", "X", face, C.unconstrained({"X": dom["X"]}), sw)],
                   [graph((), C.relate(C.unconstrained(dom), "X", "<", "Y"), LEAF1)])
    A = answer_and(A, [lifted_rv("roll", "Y", face, C.unconstrained({"Y": dom["Y"]}), sw)])
    return answer_quantify(answer_quantify(A, "X"), "Y")


@pytest.mark.parametrize("n", [3, 4, 10])
def test_dice_disjunction_shape(n):
    tp = corpus("dice.px")
    (a,), (b,) = dice_clause(tp, n, 1), dice_clause(tp, n, 2)
    (g,) = l_or(a, b)
    assert not g.free
    root = g.psi
    assert root.switch == "roll" and root.term not in ("X", "Y")
    kids = [c for c in root.children if not c.is_leaf]
    assert len(kids) == 2
    assert all(k.switch == "roll" for k in kids)
    y1, y2 = kids[0].term, kids[1].term
    assert y1 != y2
    assert set(C.faces(g.eta)) >= {(root.term, y1, -1), (root.term, y2, -1)}
    assert header(g) == f"∃{root.term}.∃{y1}.∃{y2}. {root.term}<{y1}, {root.term}<{y2}"
    assert node_count(g.psi) == 3


def test_dice_builder_names():
    tp = corpus("dice.px")
    g = build_closed(tp, map_populations(tp, {"dice": 4}), parse_query("q"))
    assert header(g) == "∃X''.∃Y.∃Y'. X''<Y, X''<Y'"
    labels = [(t.switch, t.term) for t in nodes(g.psi)]
    assert labels[0] == ("roll", "X''")
    assert set(labels[1:]) == {("roll", "Y"), ("roll", "Y'")}


def test_twoheads_graph_shape():
    tp = corpus("twoheads.px")
    g = build_closed(tp, map_populations(tp, {"coins": 10}), parse_query("twoheads"))
    assert header(g) == "∃X.∃Y. X<Y"
    assert [(t.switch, t.term) for t in nodes(g.psi)] == [("toss", "X"), ("toss", "Y")]


@pytest.mark.parametrize("name, query, pop, ns", [
    ("twoheads.px", "twoheads", "coins", range(1, 7)),
    ("dice.px", "q", "dice", range(1, 4)),
    ("urn.px", "twosame", "draws", range(1, 5)),
    ("urn.px", "pair(red)", "draws", range(1, 4)),
])
def test_grounding_matches_ground_query(name, query, pop, ns):
    tp = corpus(name)
    for n in ns:
        pm = map_populations(tp, {pop: n})
        g = build_closed(tp, pm, parse_query(query))
        e, u = ground_query(tp, pm, parse_query(query), GroundEngine(tp.switches))
        if g.is_false:
            assert u == 0
            continue
        assert ground(g, e) == u
        assert e.g_prob(u) == pytest.approx(world_prob(tp, pm, parse_query(query)), abs=1e-12)


def test_query_with_variable():
    tp = corpus("urn.px")
    A = build_query_graph(tp, map_populations(tp), parse_query("pair(C)"))
    assert len(A) == 1
    with pytest.raises(UnsupportedQuery):
        build_closed(tp, map_populations(tp), parse_query("pair(C)"))


def test_unknown_constant():
    tp = corpus("urn.px")
    g = build_closed(tp, map_populations(tp), parse_query("pair(purple)"))
    assert g.is_false


def test_disequality_program():
    text = (":- population(p, 4).\n:- set_sw(s, categorical([a:0.4, b:0.6])).\n"
            "q :- X in p, Y in p, {X \\= Y}, msw(s, X, a), msw(s, Y, b).\n")
    tp = load(text)
    for n in (2, 3, 4):
        pm = map_populations(tp, {"p": n})
        g = build_closed(tp, pm, parse_query("q"))
        e = GroundEngine(tp.switches)
        assert e.g_prob(ground(g, e)) == pytest.approx(world_prob(tp, pm, parse_query("q")), abs=1e-12)


def test_element_constants():
    text = (":- population(p, 5).\n:- element(boss, p).\n"
            ":- set_sw(s, categorical([a:0.5, b:0.5])).\n"
            "q :- X in p, {boss < X}, msw(s, boss, a), msw(s, X, a).\n")
    tp = load(text)
    pm = map_populations(tp)
    g = build_closed(tp, pm, parse_query("q"))
    e = GroundEngine(tp.switches)
    want = 0.5 * (1 - 0.5 ** 4)
    assert e.g_prob(ground(g, e)) == pytest.approx(want, abs=1e-12)
    assert world_prob(tp, pm, parse_query("q")) == pytest.approx(want, abs=1e-12)

