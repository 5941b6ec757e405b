"""Conjunction and disjunction of lifted explanation graphs.

Results are *answer sets*: lists of graphs whose constraints are mutually
exclusive over the free variables, so that for any assignment of the free
variables at most one member applies.

Combination walks both trees in the node order. Nodes that cannot be
ordered under the current constraint are handled by splitting the
constraint:

* when neither term is a bound variable introduced below the current point,
  the split pieces become separate alternatives;
* otherwise the pieces cover the result only jointly, and they are merged
  back with a disjunction of standalone graphs.

Two bound roots on the same switch whose variables have the same range and
independent constraints are merged into one fresh variable instead (the
shape produced for the dice program).

Merging can recurse; when the recursion budget runs out the operands are
expanded into graphs without bound variables and combined that way, which
is always possible and exact, only less compact. ``STATS`` counts how often
each route was taken.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import constraints as C
from .constraints import FALSE
from .lifted import (EQ, FALSE_GRAPH, GT, LEAF0, LEAF1, LT, LiftedGraph, compare_nodes,
                     expand, fresh_name, graph, mk, quantify, rename_graph, rename_tree)

AND, OR = "and", "or"

MAX_MERGE_DEPTH = 3


class Unliftable(Exception):
    """Internal: the lifted combination would not terminate within budget."""


@dataclass
class AlgebraStats:
    lifted: int = 0
    fallback: int = 0

    def reset(self):
        self.lifted = self.fallback = 0


STATS = AlgebraStats()


class _Session:
    def __init__(self, graphs):
        self.used = set()
        for g in graphs:
            self.used.update(g.eta.vars)
        self.depth = 0
        self.memo = {}

    def fresh(self, v):
        n = fresh_name(v, self.used)
        self.used.add(n)
        return n

    def enter(self):
        self.depth += 1
        if self.depth > MAX_MERGE_DEPTH:
            self.depth -= 1
            raise Unliftable()

    def leave(self):
        self.depth -= 1


def _conj(a, b):
    if a is b:
        return a
    return C.conjoin(a, b)


def _free_q(g):
    return C.project_onto(g.eta, g.free)


def _apart(a, b, S):
    """Rename bound variables of ``b`` away from every name seen so far."""
    avars = set(a.eta.vars)
    m = {v: S.fresh(v) for v in sorted(b.omega) if v in avars}
    b = rename_graph(b, m)
    bvars = set(b.eta.vars)
    m = {v: S.fresh(v) for v in sorted(a.omega) if v in bvars}
    return rename_graph(a, m), b


def _kind(t, fixed):
    if isinstance(t, int):
        return "const"
    return "fixed" if t in fixed else "bound"


def _trichotomy(eta, t, t2):
    pieces = [C.relate(eta, t, "<", t2), C.relate(eta, t, "=", t2), C.relate(eta, t2, "<", t)]
    return [p for p in pieces if p is not FALSE]


def _leaf_case(op, eta, p, q):
    if op == OR:
        if p is LEAF0:
            return [(eta, q)]
        if q is LEAF0 or p is q:
            return [(eta, p)]
        if p is LEAF1 or q is LEAF1:
            return [(eta, LEAF1)]
    else:
        if p is LEAF0 or q is LEAF0:
            return [(eta, LEAF0)]
        if p is LEAF1:
            return [(eta, q)]
        if q is LEAF1 or p is q:
            return [(eta, p)]
    return None


def _dag(op, eta, p, q, fixed, S, top=False):
    """Alternatives ``[(eta_k, tree_k)]`` for ``p op q`` under ``eta``.

    The alternatives are mutually exclusive over ``fixed`` (free variables
    plus bound variables already assigned above this point) and together
    cover every assignment of ``fixed`` under which ``eta`` is satisfiable.
    """
    if eta is FALSE:
        return []
    r = _leaf_case(op, eta, p, q)
    if r is not None:
        return r
    key = (op, p.id, q.id, eta, fixed, top)
    r = S.memo.get(key)
    if r is not None:
        return r
    rel = compare_nodes(eta, p, q)
    if rel == LT:
        r = _node(op, eta, p.switch, p.term, [(c, q) for c in p.children], fixed, S, top)
    elif rel == GT:
        r = _node(op, eta, q.switch, q.term, [(p, c) for c in q.children], fixed, S, top)
    elif rel == EQ:
        r = _node(op, eta, p.switch, p.term, list(zip(p.children, q.children)), fixed, S, top)
    else:
        r = _incomparable(op, eta, p, q, fixed, S, top)
    S.memo[key] = r
    return r


def _node(op, eta, switch, term, pairs, fixed, S, top):
    introduced = isinstance(term, str) and term not in fixed
    sub_fixed = fixed | {term} if introduced else fixed
    kids = [_dag(op, eta, a, b, sub_fixed, S) for a, b in pairs]
    return _assemble(eta, switch, term, kids, fixed, introduced, S, top)


def _assemble(eta, switch, term, kids, fixed, introduced, S, top):
    if all(len(k) == 1 and k[0][0] is eta for k in kids):
        return [(eta, mk(switch, term, [k[0][1] for k in kids]))]
    out = []
    for combo in itertools.product(*kids):
        e = eta
        for ek, _ in combo:
            e = _conj(e, ek)
            if e is FALSE:
                break
        if e is FALSE:
            continue
        out.append((e, mk(switch, term, [c for _, c in combo])))
    if introduced and len(out) > 1 and not _exclusive(out, fixed):
        S.enter()
        try:
            out = _merge_pieces(out, fixed, S, rename=not top)
        finally:
            S.leave()
    return out


def _exclusive(pairs, fixed):
    qs = [C.project_onto(e, fixed) for e, _ in pairs]
    for i in range(len(qs)):
        for j in range(i + 1, len(qs)):
            if C.conjoin(qs[i], qs[j]) is not FALSE:
                return False
    return True


def _incomparable(op, eta, p, q, fixed, S, top):
    t, t2 = p.term, q.term
    k1, k2 = _kind(t, fixed), _kind(t2, fixed)
    if k1 != "bound" and k2 != "bound":
        out = []
        for piece in _trichotomy(eta, t, t2):
            out.extend(_dag(op, piece, p, q, fixed, S, top))
        return out
    both = k1 == "bound" and k2 == "bound"
    if op == OR and both and p.switch == q.switch:
        r = _try_merge(eta, p, q, fixed, S, top)
        if r is not None:
            return r
    pieces = _range_split(eta, p, q, fixed) if (op == OR and both) else None
    if pieces is None:
        pieces = _trichotomy(eta, t, t2)
    S.enter()
    try:
        results = []
        for piece in pieces:
            results.extend(_dag(op, piece, p, q, fixed, S))
        return _merge_pieces(results, fixed, S, rename=not top)
    finally:
        S.leave()


def _split_vars(eta, p, q, fixed):
    """Variables private to each side, and whether ``eta`` factors over them."""
    F = fixed & set(eta.vars)
    A = set(p.vars) - F
    B = set(q.vars) - F
    if A & B:
        return None
    eta0 = C.project_onto(eta, A | B | F)
    eta_a = C.project_onto(eta0, A | F)
    eta_b = C.project_onto(eta0, B | F)
    if C.conjoin(eta_a, eta_b) != eta0:
        return None
    return F, A, B, eta_a, eta_b


def _try_merge(eta, p, q, fixed, S, top):
    """Collapse two bound roots on one switch into a single fresh variable."""
    split = _split_vars(eta, p, q, fixed)
    if split is None:
        return None
    F, A, B, eta_a, eta_b = split
    t, t2 = p.term, q.term
    t3 = S.fresh(t)
    da = C.rename(C.project_onto(eta_a, F | {t}), {t: t3})
    db = C.rename(C.project_onto(eta_b, F | {t2}), {t2: t3})
    if da != db:
        return None
    ma, mb = {t: t3}, {t2: t3}
    if not top:
        ma.update({v: S.fresh(v) for v in sorted(A - {t})})
        mb.update({v: S.fresh(v) for v in sorted(B - {t2})})
    eta_m = C.conjoin(C.rename(eta_a, ma), C.rename(eta_b, mb))
    sub_fixed = fixed | {t3}
    kids = [_dag(OR, eta_m, rename_tree(a, ma), rename_tree(b, mb), sub_fixed, S)
            for a, b in zip(p.children, q.children)]
    return _assemble(eta_m, p.switch, t3, kids, fixed, True, S, top)


def _range_split(eta, p, q, fixed):
    """Covering pieces for a disjunction of two bound roots with different
    ranges; ``None`` when the ranges depend on fixed variables or the two
    sides share constraints."""
    split = _split_vars(eta, p, q, fixed)
    if split is None:
        return None
    F, A, B, eta_a, eta_b = split
    t, t2 = p.term, q.term
    for v, e in ((t, eta_a), (t2, eta_b)):
        if F:
            joint = C.project_onto(e, F | {v})
            if joint != C.conjoin(C.project_onto(e, {v}), C.project_onto(e, F)):
                return None
    (l1, u1), (l2, u2) = C.var_range(eta, t), C.var_range(eta, t2)
    if l1 > l2 or (l1 == l2 and u1 > u2):
        t, t2, l1, u1, l2, u2 = t2, t, l2, u2, l1, u1
    R = C.relate
    if l1 == l2 and u1 == u2:
        return None
    if l1 == l2:
        # u1 < u2
        pieces = [R(eta, t2, "<=", u1), R(eta, u1, "<", t2)]
    elif u1 == u2:
        pieces = [R(eta, t, "=", t2), R(eta, t, "<", l2)]
    elif u1 < u2:
        pieces = [R(eta, u1, "<", t2), R(R(eta, t, "<", l2), t2, "<=", u1), R(eta, t, "=", t2)]
    else:
        pieces = [R(eta, u2, "<", t), R(eta, t, "<", l2), R(eta, t, "=", t2)]
    return [x for x in pieces if x is not FALSE]


def _merge_pieces(pairs, fixed, S, rename):
    """Disjunction of standalone pieces, as alternatives exclusive over ``fixed``."""
    graphs = [LiftedGraph(frozenset(set(e.vars) - fixed), e, c) for e, c in pairs]
    acc = [graphs[0]]
    for g in graphs[1:]:
        acc = _or_sets(acc, [g], S, fixed=fixed)
    out = []
    for g in acc:
        e = C.project_onto(g.eta, set(g.psi.vars) | (fixed & set(g.eta.vars)))
        if rename:
            m = {v: S.fresh(v) for v in e.vars if v not in fixed}
            e = C.rename(e, m)
            out.append((e, rename_tree(g.psi, m)))
        else:
            out.append((e, g.psi))
    return out


def _pair(op, a, b, S, out, fixed=None):
    a, b = _apart(a, b, S)
    free = a.free | b.free
    eta = C.conjoin(a.eta, b.eta)
    if eta is FALSE:
        return
    top = S.depth == 0
    for e, c in _dag(op, eta, a.psi, b.psi, free, S, top):
        out.append(graph(set(e.vars) - free, e, c))


def _and_sets(A, B, S):
    out = []
    for a in A:
        for b in B:
            if C.conjoin(_free_q(a), _free_q(b)) is not FALSE:
                _pair(AND, a, b, S, out)
    return out


def _only(g, others):
    """Pieces of ``g`` outside the free-variable regions of ``others``."""
    pieces = [g.eta]
    for q in others:
        neg = C.negate(q)
        pieces = [x for p in pieces for n in neg for x in [C.conjoin(p, n)] if x is not FALSE]
        if not pieces:
            break
    return [graph(g.omega, p, g.psi) for p in pieces]


def _or_sets(A, B, S, fixed=None):
    qa = [_free_q(a) for a in A]
    qb = [_free_q(b) for b in B]
    out = []
    for a in A:
        out.extend(_only(a, qb))
    for b in B:
        out.extend(_only(b, qa))
    for a, x in zip(A, qa):
        for b, y in zip(B, qb):
            if C.conjoin(x, y) is not FALSE:
                _pair(OR, a, b, S, out)
    return out


def _finish(res):
    out = []
    for g in res:
        if g.is_false:
            continue
        keep = set(g.psi.vars) | g.free
        eta = C.project_onto(g.eta, keep)
        out.append(LiftedGraph(g.omega & set(eta.vars), eta, g.psi))
    return out or [FALSE_GRAPH]


def _fallback(op, A, B):
    pa = [x for a in A for x in expand(a)]
    pb = [x for b in B for x in expand(b)]
    S = _Session(pa + pb)
    acc = []

    def add(g):
        nonlocal acc
        acc = _or_sets(acc, [g], S) if acc else [g]
    if op == OR:
        for g in pa + pb:
            add(g)
    else:
        for a in pa:
            for b in pb:
                for g in _and_sets([a], [b], S):
                    add(g)
    return acc


def _run(op, A, B):
    A = [g for g in A if not g.is_false]
    B = [g for g in B if not g.is_false]
    if op == AND and (not A or not B):
        return [FALSE_GRAPH]
    if op == OR and (not A or not B):
        return _finish(A or B)
    S = _Session(A + B)
    try:
        res = _and_sets(A, B, S) if op == AND else _or_sets(A, B, S)
        STATS.lifted += 1
    except Unliftable:
        res = _fallback(op, A, B)
        STATS.fallback += 1
    return _finish(res)


def l_and(a: LiftedGraph, b: LiftedGraph) -> list:
    return _run(AND, [a], [b])


def l_or(a: LiftedGraph, b: LiftedGraph) -> list:
    return _run(OR, [a], [b])


def answer_and(A, B) -> list:
    return _run(AND, list(A), list(B))


def answer_or(A, B) -> list:
    return _run(OR, list(A), list(B))


def answer_quantify(A, x: str) -> list:
    """Quantify ``x`` in every member, then merge members that now overlap."""
    qs = [quantify(g, x) if x in g.eta.vars else g for g in A if not g.is_false]
    if not qs:
        return [FALSE_GRAPH]
    acc = [qs[0]]
    for g in qs[1:]:
        acc = answer_or(acc, [g])
    return acc


def select(A, sigma) -> LiftedGraph:
    """The member of an answer set that applies under ``sigma`` (free vars)."""
    for g in A:
        if g.is_false:
            continue
        q = _free_q(g)
        if C.satisfies(q, {v: sigma[v] for v in q.vars}):
            return g
    return FALSE_GRAPH
