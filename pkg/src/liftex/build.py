"""Build the lifted explanation graph of a query from a typed program.

Each clause body is conjoined left to right (switch atoms become one-node
graphs, constraints become constraint graphs) and the typed variables that
do not occur in the head are then quantified. Derivations of the same goal
are disjoined. Instance variables stay symbolic; only value variables of
switch atoms and unification with constants bind variables.
"""
from __future__ import annotations

from . import constraints as C
from .algebra import answer_and, answer_or, answer_quantify
from .constraints import FALSE
from .lifted import LEAF1, FALSE_GRAPH, LiftedError, fresh_name, graph, lifted_rv, true_graph
from .program import (CallGoal, ConstraintGoal, InGoal, MswGoal, PopulationMap, TypedProgram,
                      Var)


class UnsupportedQuery(ValueError):
    pass


def _walk(t, s):
    while isinstance(t, Var) and t in s:
        t = s[t]
    return t


def _unify(a, b, s):
    a, b = _walk(a, s), _walk(b, s)
    if a == b:
        return s
    if isinstance(a, Var):
        return {**s, a: b}
    if isinstance(b, Var):
        return {**s, b: a}
    return None


class _Builder:
    def __init__(self, tp: TypedProgram, popmap: PopulationMap):
        self.tp = tp
        self.popmap = popmap
        self.switches = tp.switches
        # population of each live variable name
        self.types = {}

    def instance(self, t):
        if isinstance(t, Var):
            return t.name
        if isinstance(t, int):
            return t
        try:
            return self.popmap.elements[t]
        except KeyError:
            raise UnsupportedQuery(f"{t} is not a population element") from None

    def domain_formula(self, name):
        return C.unconstrained({name: self.popmap.domain(self.types[name])})

    def rename_clause(self, ci, clause, live):
        """Rename clause variables that clash with names already in use."""
        m = {}
        for v in clause.variables():
            name = v.name
            if name in live:
                name = fresh_name(name, live)
            m[v] = Var(name)
            live.add(name)
            ty = self.tp.var_types[ci].get(v.name)
            if ty is not None:
                self.types[name] = ty

        def r(t):
            return m.get(t, t) if isinstance(t, Var) else t
        head = CallGoal(clause.head.pred, tuple(r(a) for a in clause.head.args), clause.head.pos)
        body = []
        for g in clause.body:
            if isinstance(g, CallGoal):
                body.append(CallGoal(g.pred, tuple(r(a) for a in g.args), g.pos))
            elif isinstance(g, InGoal):
                body.append(InGoal(r(g.term), g.pop, g.pos))
            elif isinstance(g, ConstraintGoal):
                body.append(ConstraintGoal(g.op, r(g.left), r(g.right), g.pos))
            else:
                body.append(MswGoal(g.switch, r(g.inst), r(g.value), g.pos))
        local = [m[v].name for v in clause.variables() if v not in clause.head.args
                 and self.tp.var_types[ci].get(v.name) is not None]
        return head, body, local

    def call(self, goal, s, live):
        """Yield ``(subst, answer_set)`` for each way of proving ``goal``."""
        key = goal.key
        clauses = [(ci, c) for ci, c in enumerate(self.tp.clauses) if c.head.key == key]
        if not clauses:
            raise UnsupportedQuery(f"undefined predicate {goal.pred}/{len(goal.args)}")
        for ci, c in clauses:
            # derivations are independent; names only need to be apart within one
            live_c = set(live)
            head, body, local = self.rename_clause(ci, c, live_c)
            s2 = s
            for x, y in zip(head.args, goal.args):
                s2 = _unify(x, y, s2)
                if s2 is None:
                    break
            if s2 is None:
                continue
            for s3, A in self.body(body, s2, [true_graph()], live_c):
                for v in local:
                    # a local variable bound to a constant is no longer a variable
                    if not isinstance(_walk(Var(v), s3), Var):
                        continue
                    if any(v in g.eta.vars for g in A):
                        A = answer_quantify(A, v)
                yield s3, A

    def body(self, goals, s, A, live):
        if all(g.is_false for g in A):
            return
        if not goals:
            yield s, A
            return
        g, rest = goals[0], goals[1:]
        if isinstance(g, InGoal):
            t = _walk(g.term, s)
            if isinstance(t, Var):
                A2 = answer_and(A, [graph((), self.domain_formula(t.name), LEAF1)])
                yield from self.body(rest, s, A2, live)
            else:
                lo, hi = self.popmap.domain(g.pop)
                if lo <= self.instance(t) <= hi:
                    yield from self.body(rest, s, A, live)
        elif isinstance(g, ConstraintGoal):
            a, b = self.instance(_walk(g.left, s)), self.instance(_walk(g.right, s))
            eta = C.TRUE
            for t in (a, b):
                if isinstance(t, str):
                    eta = C.conjoin(eta, self.domain_formula(t))
            if g.op == "\\=":
                pieces = [C.relate(eta, a, "<", b), C.relate(eta, b, "<", a)]
            else:
                pieces = [C.relate(eta, a, "<" if g.op == "<" else "=", b)]
            for p in pieces:
                if p is FALSE:
                    continue
                A2 = answer_and(A, [graph((), p, LEAF1)])
                yield from self.body(rest, s, A2, live)
        elif isinstance(g, MswGoal):
            z = self.instance(_walk(g.inst, s))
            eta = self.domain_formula(z) if isinstance(z, str) else C.TRUE
            v = _walk(g.value, s)
            outs = self.switches[g.switch].outcomes
            values = outs if isinstance(v, Var) else [v]
            for o in values:
                if o not in outs:
                    continue
                s2 = {**s, v: o} if isinstance(v, Var) else s
                A2 = answer_and(A, [lifted_rv(g.switch, z, o, eta, self.switches)])
                yield from self.body(rest, s2, A2, live)
        else:
            for s2, B in self.call(g, s, live):
                yield from self.body(rest, s2, answer_and(A, B), live)


def build_query_graph(tp: TypedProgram, popmap: PopulationMap, query: CallGoal) -> list:
    """Answer set (list of lifted graphs) for ``query``.

    For a query without variables the result is a single closed graph.
    """
    b = _Builder(tp, popmap)
    live = {v.name for v in _query_vars(query)}
    result = [FALSE_GRAPH]
    for _, A in b.call(query, {}, live):
        result = answer_or(result, A)
    return result


def _query_vars(q):
    return [a for a in q.args if isinstance(a, Var)]


def build_closed(tp, popmap, query):
    """The single closed graph of a ground query."""
    if _query_vars(query):
        raise UnsupportedQuery("the query must not contain variables")
    A = [g for g in build_query_graph(tp, popmap, query) if not g.is_false]
    if not A:
        return FALSE_GRAPH
    if len(A) != 1 or A[0].free:
        raise LiftedError("query did not produce a single closed graph")
    return A[0]
