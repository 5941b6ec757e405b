import pytest

from helpers import (DOM, SWITCHES, assignments, engine, flat_ground, ground_at, random_graph,
                     rng)
from liftex import constraints as C
from liftex.constraints import atom
from liftex.lifted import (EQ, GT, INCOMPARABLE, LEAF0, LEAF1, LT, LiftedError, LiftedGraph,
                           check_well_structured, compare_nodes, expand, fresh_name, graph, header,
                           lifted_explanations, lifted_rv, mk, node_count, nodes, quantify,
                           rename_graph, standardize_apart, substitute, to_dot, validate)

SEEDS = range(200)


def eta(*atoms, vs=("X", "Y")):
    return C.from_atoms([atom(a) for a in atoms], {v: DOM for v in vs})


def test_mk_reduces_and_interns():
    a = mk("r", "X", [LEAF1, LEAF0])
    assert mk("r", "X", [LEAF1, LEAF0]) is a
    # equal children collapse unless the variable is used below
    b = mk("r", "Y", [LEAF1, LEAF0])
    assert mk("s", "X", [b, b, b]) is b
    kept = mk("r", "X", [a, a])
    assert kept is not a and kept.children == (a, a)


def test_nodes_are_topological():
    leafy = mk("s", "Y", [LEAF1, LEAF0, LEAF1])
    mid = mk("r", "Y", [leafy, LEAF0])
    root = mk("r", "X", [mid, leafy])
    order = nodes(root)
    pos = {t.id: i for i, t in enumerate(order)}
    for t in order:
        for ch in t.children:
            if not ch.is_leaf:
                assert pos[t.id] < pos[ch.id]
    assert node_count(root) == 3


def test_compare_nodes():
    e = eta("X<Y")
    a, b = mk("r", "X", [LEAF1, LEAF0]), mk("r", "Y", [LEAF1, LEAF0])
    assert compare_nodes(e, a, b) == LT
    assert compare_nodes(e, b, a) == GT
    s = mk("s", "X", [LEAF1, LEAF0, LEAF0])
    assert compare_nodes(e, a, s) == LT
    assert compare_nodes(e, a, a) == EQ
    assert compare_nodes(eta(), a, b) == INCOMPARABLE
    assert compare_nodes(eta("X<2"), a, mk("r", 2, [LEAF1, LEAF0])) == LT


def test_lifted_rv_and_header():
    e = eta("X<Y")
    g = quantify(quantify(lifted_rv("r", "X", "a", e, SWITCHES), "X"), "Y")
    assert header(g) == "∃X.∃Y. X<Y"
    assert g.free == frozenset()
    with pytest.raises(LiftedError):
        lifted_rv("r", "X", "zz", e, SWITCHES)
    with pytest.raises(LiftedError):
        lifted_rv("r", "W", "a", e, SWITCHES)


def test_dot_has_header_node():
    e = eta("X<Y")
    psi = mk("r", "X", [mk("r", "Y", [LEAF1, LEAF0]), LEAF0])
    g = graph({"X", "Y"}, e, psi)
    dot = to_dot(g, SWITCHES)
    assert dot.startswith("digraph L {")
    assert 'header [label="∃X.∃Y. X<Y", shape=box]' in dot
    assert '"(r,X)"' in dot and '"(r,Y)"' in dot
    assert "-> l0" not in dot


def test_well_structured_detects_missing_ancestor():
    e = eta(vs=("X", "Z"))
    x1 = mk("r", "X", [LEAF1, LEAF0])
    x2 = mk("s", "X", [LEAF1, LEAF0, LEAF0])
    # two X nodes under a Z root, neither an ancestor of the other
    root = mk("r", "Z", [x1, x2])
    g = LiftedGraph(frozenset({"X", "Z"}), e, root)
    assert not check_well_structured(g)
    assert check_well_structured(LiftedGraph(frozenset({"Z"}), e, root))


def test_validate_reports_order_violation():
    e = eta("X<Y")
    bad = mk("r", "Y", [mk("r", "X", [LEAF1, LEAF0]), LEAF0])
    probs = validate(graph({"X", "Y"}, e, bad), SWITCHES)
    assert any("not above" in p for p in probs)


def test_fresh_names_use_primes():
    assert fresh_name("X", {"X"}) == "X'"
    assert fresh_name("X'", {"X", "X'"}) == "X''"


def test_explanations_list_paths():
    psi = mk("r", "X", [mk("s", "Y", [LEAF1, LEAF0, LEAF1]), LEAF0])
    assert lifted_explanations(psi) == [(("r", "X", 0), ("s", "Y", 0)), (("r", "X", 0), ("s", "Y", 2))]


# ------------------------------------------------------------- properties

@pytest.mark.parametrize("seed", SEEDS)
def test_random_graphs_validate(seed):
    g = random_graph(rng(seed), ("Y", "W"))
    assert validate(g, SWITCHES) == []


@pytest.mark.parametrize("seed", SEEDS)
def test_recursive_grounding_matches_flat(seed):
    g = random_graph(rng(seed), ("Y", "W"))
    e = engine()
    for sigma in assignments(g.free):
        assert ground_at(g, e, sigma) == flat_ground(g, e, sigma)


@pytest.mark.parametrize("seed", SEEDS)
def test_substitution_commutes_with_grounding(seed):
    r = rng(seed)
    g = random_graph(r, ("Y",), free_names=("X", "Z"))
    if not g.free:
        return
    x = sorted(g.free)[0]
    e = engine()
    for sigma in assignments(g.free):
        h = substitute(g, sigma[x], x)
        rest = {v: k for v, k in sigma.items() if v != x}
        assert ground_at(h, e, rest) == flat_ground(g, e, sigma)
        # the substituted graph is still a proper graph
        assert validate(h, SWITCHES) == []


@pytest.mark.parametrize("seed", SEEDS)
def test_quantify_is_disjunction(seed):
    g = random_graph(rng(seed), ("Y",), free_names=("X", "Z"))
    if not g.free:
        return
    x = sorted(g.free)[0]
    q = quantify(g, x)
    e = engine()
    for sigma in assignments(q.free):
        expected = 0
        for k in range(DOM[0], DOM[1] + 1):
            expected = e.g_or(expected, flat_ground(g, e, {**sigma, x: k}))
        assert ground_at(q, e, sigma) == expected


@pytest.mark.parametrize("seed", SEEDS)
def test_standardize_apart_preserves_meaning(seed):
    r = rng(seed)
    a = random_graph(r, ("Y", "W"))
    b = random_graph(r, ("Y", "W"))
    a2, b2 = standardize_apart(a, b)
    assert not (a2.omega & set(b2.eta.vars))
    assert not (b2.omega & set(a2.eta.vars))
    assert a2.free == a.free and b2.free == b.free
    e = engine()
    for g, g2 in ((a, a2), (b, b2)):
        for sigma in assignments(g.free):
            assert ground_at(g, e, sigma) == ground_at(g2, e, sigma)


@pytest.mark.parametrize("seed", SEEDS[:50])
def test_rename_then_back(seed):
    g = random_graph(rng(seed), ("Y", "W"))
    m = {v: v + "_" for v in g.omega}
    back = rename_graph(rename_graph(g, m), {v: k for k, v in m.items()})
    assert back == g


@pytest.mark.parametrize("seed", SEEDS[:50])
def test_expand_covers_grounding(seed):
    g = random_graph(rng(seed), ("Y", "W"), free_names=())
    e = engine()
    r = 0
    for piece in expand(g):
        r = e.g_or(r, flat_ground(piece, e))
    assert r == ground_at(g, e, {})
