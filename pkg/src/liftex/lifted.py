"""Lifted explanation graphs ``(Omega : eta, psi)``.

``psi`` is a hash-consed decision tree (a DAG) whose internal nodes test a
switch at a term: a variable id or an integer instance. ``eta`` is a
constraint formula over the variables; ``Omega`` lists the existentially
bound ones and the rest are free. A graph stands for the disjunction, over
the solutions of ``eta`` for the bound variables, of the ground trees.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

from . import constraints as C
from .constraints import FALSE, Formula

Term = Union[str, int]


class LiftedError(ValueError):
    pass


class Tree:
    """Interned node or leaf. Build with :func:`mk` and the two leaves."""
    __slots__ = ("switch", "term", "children", "id", "vars", "__weakref__")

    def __init__(self, switch, term, children, id_, vars_):
        self.switch = switch
        self.term = term
        self.children = children
        self.id = id_
        self.vars = vars_

    @property
    def is_leaf(self):
        return self.switch is None

    @property
    def value(self):
        return self.term if self.is_leaf else None

    def __repr__(self):
        if self.is_leaf:
            return str(self.term)
        return f"({self.switch},{self.term})[{', '.join(map(repr, self.children))}]"

    def __hash__(self):
        return self.id

    def __eq__(self, other):
        return self is other

    def __reduce__(self):
        if self.is_leaf:
            return (_leaf, (self.term,))
        return (mk, (self.switch, self.term, self.children))


_table = {}
_counter = [2]

LEAF0 = Tree(None, 0, (), 0, frozenset())
LEAF1 = Tree(None, 1, (), 1, frozenset())


def _leaf(v):
    return LEAF1 if v else LEAF0


def leaf(v) -> Tree:
    return _leaf(v)


def mk(switch: str, term: Term, children) -> Tree:
    """Unique node ``(switch, term)[children]``.

    A node whose children are all the same tree is skipped, unless its
    variable occurs below it (removing it would break well-structuredness).
    """
    children = tuple(children)
    first = children[0]
    if all(c is first for c in children) and (isinstance(term, int) or term not in first.vars):
        return first
    key = (switch, term, tuple(c.id for c in children))
    t = _table.get(key)
    if t is None:
        vs = set()
        for c in children:
            vs |= c.vars
        if not isinstance(term, int):
            vs.add(term)
        t = Tree(switch, term, children, _counter[0], frozenset(vs))
        _counter[0] += 1
        _table[key] = t
    return t


def nodes(psi: Tree):
    """Internal nodes reachable from ``psi``, parents before children."""
    post, seen = [], set()
    stack = [(psi, False)]
    while stack:
        t, done = stack.pop()
        if done:
            post.append(t)
            continue
        if t.is_leaf or t.id in seen:
            continue
        seen.add(t.id)
        stack.append((t, True))
        for c in reversed(t.children):
            stack.append((c, False))
    post.reverse()
    return post


def node_count(psi: Tree) -> int:
    return len(nodes(psi))


def map_terms(psi: Tree, f, memo=None) -> Tree:
    """Rebuild ``psi`` with every node term replaced by ``f(term)``."""
    memo = {} if memo is None else memo

    def go(t):
        if t.is_leaf:
            return t
        r = memo.get(t.id)
        if r is None:
            r = mk(t.switch, f(t.term), [go(c) for c in t.children])
            memo[t.id] = r
        return r
    return go(psi)


def substitute_tree(psi: Tree, x: str, k: Term) -> Tree:
    if x not in psi.vars:
        return psi
    return map_terms(psi, lambda t: k if t == x else t)


def rename_tree(psi: Tree, mapping: Mapping[str, Term]) -> Tree:
    if not mapping or not (psi.vars & set(mapping)):
        return psi
    return map_terms(psi, lambda t: mapping.get(t, t) if isinstance(t, str) else t)


@dataclass(frozen=True)
class LiftedGraph:
    omega: frozenset
    eta: object
    psi: Tree

    @property
    def free(self):
        return frozenset(self.eta.vars) - self.omega

    @property
    def is_false(self):
        return self.eta is FALSE

    def __str__(self):
        return f"{header(self)} : {self.psi!r}"


FALSE_GRAPH = LiftedGraph(frozenset(), FALSE, LEAF0)


def graph(omega, eta: Formula, psi: Tree) -> LiftedGraph:
    if eta is FALSE:
        return FALSE_GRAPH
    return LiftedGraph(frozenset(omega), eta, psi)


def header(g: LiftedGraph) -> str:
    """Quantifier prefix and constraints, e.g. ``∃X.∃Y. X<Y``."""
    q = "".join(f"∃{v}." for v in sorted(g.omega))
    body = C.render(g.eta, bounds=False)
    return f"{q} {body}" if q else body


def lifted_rv(switch, term: Term, value, eta: Formula, switches: Mapping) -> LiftedGraph:
    """Graph of ``msw(switch, term, value)`` under ``eta``."""
    outs = switches[switch].outcomes
    if value not in outs:
        raise LiftedError(f"{value!r} is not an outcome of {switch}")
    if isinstance(term, str) and term not in eta.vars:
        raise LiftedError(f"no constraint on {term}")
    return graph((), eta, mk(switch, term, [LEAF1 if o == value else LEAF0 for o in outs]))


def constraint_graph(c, domains: Mapping[str, tuple]) -> LiftedGraph:
    """``(∅ : c, 1)`` for an atomic constraint or a list of them."""
    atoms = [c] if isinstance(c, C.AtomicConstraint) else list(c)
    eta = C.from_atoms(atoms, domains)
    return graph((), eta, LEAF1 if eta is not FALSE else LEAF0)


def true_graph() -> LiftedGraph:
    return LiftedGraph(frozenset(), C.TRUE, LEAF1)


def substitute(g: LiftedGraph, k: int, x: str) -> LiftedGraph:
    """``g[k/x]``."""
    if g.is_false:
        return g
    if x not in g.eta.vars:
        raise LiftedError(f"{x} is not a variable of the graph")
    eta = C.substitute(g.eta, x, k)
    if eta is FALSE:
        return FALSE_GRAPH
    return graph(g.omega - {x}, eta, substitute_tree(g.psi, x, k))


def substitute_all(g: LiftedGraph, sigma: Mapping[str, int]) -> LiftedGraph:
    for x, k in sigma.items():
        g = substitute(g, k, x)
        if g.is_false:
            break
    return g


def quantify(g: LiftedGraph, x: str) -> LiftedGraph:
    if g.is_false:
        return g
    if x not in g.eta.vars:
        raise LiftedError(f"cannot quantify {x}: not a variable of the graph")
    return LiftedGraph(g.omega | {x}, g.eta, g.psi)


LT, GT, EQ, INCOMPARABLE = "LT", "GT", "EQ", "INCOMPARABLE"


def compare_nodes(eta: Formula, a: Tree, b: Tree) -> str:
    """Order of two node labels as entailed by ``eta``."""
    s, t = a.switch, a.term
    s2, t2 = b.switch, b.term
    if C.entails_relation(eta, t, "<", t2):
        return LT
    if C.entails_relation(eta, t2, "<", t):
        return GT
    if C.entails_relation(eta, t, "=", t2):
        if s == s2:
            return EQ
        return LT if s < s2 else GT
    return INCOMPARABLE


_PRIMES = re.compile(r"'+$")


def base_name(v: str) -> str:
    return _PRIMES.sub("", v)


def fresh_name(v: str, used) -> str:
    """``v`` with the fewest extra primes that is not in ``used``."""
    b = base_name(v)
    k = 1
    while b + "'" * k in used:
        k += 1
    return b + "'" * k


def rename_graph(g: LiftedGraph, mapping: Mapping[str, str]) -> LiftedGraph:
    if g.is_false or not mapping:
        return g
    return LiftedGraph(frozenset(mapping.get(v, v) for v in g.omega),
                       C.rename(g.eta, mapping), rename_tree(g.psi, mapping))


def standardize_apart(a: LiftedGraph, b: LiftedGraph):
    """Rename bound variables of ``b`` (then ``a``) that clash with the other."""
    used = set(a.eta.vars) | set(b.eta.vars)
    m = {}
    for v in sorted(b.omega):
        if v in a.eta.vars:
            m[v] = fresh_name(v, used)
            used.add(m[v])
    b = rename_graph(b, m)
    m = {}
    for v in sorted(a.omega):
        if v in b.eta.vars:
            m[v] = fresh_name(v, used)
            used.add(m[v])
    return rename_graph(a, m), b


def check_well_structured(g: LiftedGraph) -> bool:
    """Every two nodes on the same bound variable share an ancestor on it."""
    if g.is_false:
        return True
    ns = nodes(g.psi)
    parents = {t.id: set() for t in ns}
    for t in ns:
        for c in t.children:
            if not c.is_leaf:
                parents[c.id].add(t.id)
    by_id = {t.id: t for t in ns}
    for x in g.omega:
        xs = [t.id for t in ns if t.term == x]
        if len(xs) < 2:
            continue
        anc = {}
        for v in xs:
            seen, stack = set(), [v]
            while stack:
                u = stack.pop()
                if u in seen:
                    continue
                seen.add(u)
                stack.extend(parents[u])
            anc[v] = {u for u in seen if by_id[u].term == x}
        for i, v in enumerate(xs):
            for w in xs[i + 1:]:
                if not anc[v] & anc[w]:
                    return False
    return True


def validate(g: LiftedGraph, switches: Mapping) -> list:
    """Structural problems of ``g`` (empty when it is a proper graph)."""
    problems = []
    if g.is_false:
        if g.omega or g.psi is not LEAF0:
            problems.append("false graph must be (∅ : false, 0)")
        return problems
    vs = set(g.eta.vars)
    if not g.omega <= vs:
        problems.append(f"bound variables {sorted(g.omega - vs)} are not constrained")
    if not g.psi.vars <= vs:
        problems.append(f"tree variables {sorted(g.psi.vars - vs)} are not constrained")
    for t in nodes(g.psi):
        if len(t.children) != len(switches[t.switch].outcomes):
            problems.append(f"node ({t.switch},{t.term}) has the wrong number of children")
        for c in t.children:
            if not c.is_leaf and compare_nodes(g.eta, t, c) != LT:
                problems.append(f"child ({c.switch},{c.term}) not above ({t.switch},{t.term})")
    if not check_well_structured(g):
        problems.append("not well-structured")
    return problems


def lifted_explanations(psi: Tree):
    """Root-to-1 paths as tuples of ``(switch, term, outcome_index)``."""
    memo = {}

    def go(t):
        if t.is_leaf:
            return [()] if t.term == 1 else []
        r = memo.get(t.id)
        if r is None:
            r = [((t.switch, t.term, i),) + e for i, c in enumerate(t.children) for e in go(c)]
            memo[t.id] = r
        return r
    return go(psi)


def ground(g: LiftedGraph, engine, memo=None) -> int:
    """Ground explanation graph of a closed lifted graph (in ``engine``)."""
    if g.free:
        raise LiftedError(f"cannot ground: free variables {sorted(g.free)}")
    memo = {} if memo is None else memo
    ZERO, ONE = 0, 1

    def gr(eta, psi):
        if eta is FALSE:
            return ZERO
        if psi.is_leaf:
            return ONE if psi.term == 1 else ZERO
        key = (psi.id, eta.key())
        r = memo.get(key)
        if r is not None:
            return r
        t = psi.term
        if isinstance(t, int):
            r = engine.node(psi.switch, t, [gr(eta, c) for c in psi.children])
        else:
            lo, hi = C.var_range(eta, t)
            r = ZERO
            for k in range(lo, hi + 1):
                e = C.substitute(eta, t, k)
                if e is FALSE:
                    continue
                kids = [gr(e, substitute_tree(c, t, k)) for c in psi.children]
                r = engine.g_or(r, engine.node(psi.switch, k, kids))
        memo[key] = r
        return r
    return gr(g.eta, g.psi)


def expand(g: LiftedGraph):
    """Pieces ``(∅ : eta tau, psi tau)`` for every value of the bound variables."""
    if g.is_false:
        return []
    bound = sorted(g.omega)
    out = []

    def go(i, eta, psi):
        if eta is FALSE:
            return
        if i == len(bound):
            out.append(LiftedGraph(frozenset(), eta, psi))
            return
        x = bound[i]
        lo, hi = C.var_range(eta, x)
        for k in range(lo, hi + 1):
            go(i + 1, C.substitute(eta, x, k), substitute_tree(psi, x, k))
    go(0, g.eta, g.psi)
    return out


def to_dot(g: LiftedGraph, switches: Mapping, name="L") -> str:
    """Graphviz text: a header box with the constraint, rounded boxes for
    nodes, circles for leaves and outcome labels on edges."""
    lines = [f"digraph {name} {{"]
    head = header(g).replace('"', '\\"')
    lines.append(f'  header [label="{head}", shape=box];')
    lines.append('  l0 [label="0", shape=circle];')
    lines.append('  l1 [label="1", shape=circle];')

    def nid(t):
        return f"l{t.term}" if t.is_leaf else f"n{t.id}"
    ns = nodes(g.psi)
    if ns:
        lines.append(f"  header -> {nid(g.psi)} [style=dotted, arrowhead=none];")
    for t in ns:
        lines.append(f'  {nid(t)} [label="({t.switch},{t.term})", shape=box, style=rounded];')
        for o, c in zip(switches[t.switch].outcomes, t.children):
            if not (c.is_leaf and c.term == 0):
                lines.append(f'  {nid(t)} -> {nid(c)} [label="{o}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
