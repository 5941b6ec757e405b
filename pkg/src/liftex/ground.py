"""Ground explanation graphs as reduced ordered multi-valued decision diagrams.

Nodes test one switch instance ``(s, z)`` and have one child per outcome of
``s``. The variable order is ``(z, s)``: instance first, switch name second.
Node ids 0 and 1 are the leaves. The engine owns the unique table and the
apply caches, so ids from one engine are canonical and can be compared.
"""
from __future__ import annotations

import itertools
import sys
from typing import Mapping

from .program import (CallGoal, ConstraintGoal, InGoal, MswGoal, PopulationMap,
                      TypedProgram, Var)

ZERO, ONE = 0, 1

# apply recurses once per level of the diagram
if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)


class GroundEngine:
    def __init__(self, switches: Mapping):
        self.switches = dict(switches)
        # per node: ((z, s), children); leaves carry None
        self._nodes = [None, None]
        self._unique = {}
        self._and = {}
        self._or = {}

    def __len__(self):
        return len(self._nodes)

    def label(self, u):
        """``(s, z)`` of an internal node."""
        (z, s), _ = self._nodes[u]
        return s, z

    def children(self, u):
        return self._nodes[u][1]

    def is_leaf(self, u):
        return u < 2

    def mk(self, s, z, children):
        """Unique node for ``(s, z)``; children must lie below it in the order."""
        children = tuple(children)
        if len(children) != len(self.switches[s].outcomes):
            raise ValueError(f"switch {s} needs {len(self.switches[s].outcomes)} children")
        if all(c == children[0] for c in children):
            return children[0]
        key = ((z, s), children)
        u = self._unique.get(key)
        if u is None:
            u = len(self._nodes)
            self._nodes.append(key)
            self._unique[key] = u
        return u

    def rv(self, s, z, v):
        """Graph of ``msw(s, z, v)``."""
        outs = self.switches[s].outcomes
        if v not in outs:
            raise ValueError(f"{v!r} is not an outcome of {s}")
        return self.mk(s, z, [ONE if o == v else ZERO for o in outs])

    def _top(self, u):
        return self._nodes[u][0]

    def _apply(self, a, b, is_and):
        if is_and:
            if a == ZERO or b == ZERO:
                return ZERO
            if a == ONE:
                return b
            if b == ONE or a == b:
                return a
            cache = self._and
        else:
            if a == ONE or b == ONE:
                return ONE
            if a == ZERO:
                return b
            if b == ZERO or a == b:
                return a
            cache = self._or
        if a > b:
            a, b = b, a
        r = cache.get((a, b))
        if r is not None:
            return r
        ka, ca = self._nodes[a]
        kb, cb = self._nodes[b]
        if ka == kb:
            kids = [self._apply(x, y, is_and) for x, y in zip(ca, cb)]
        elif ka < kb:
            kids = [self._apply(x, b, is_and) for x in ca]
        else:
            kids = [self._apply(a, y, is_and) for y in cb]
            ka = kb
        z, s = ka
        r = self.mk(s, z, kids)
        cache[(a, b)] = r
        return r

    def g_and(self, a, b):
        return self._apply(a, b, True)

    def g_or(self, a, b):
        return self._apply(a, b, False)

    def node(self, s, z, children):
        """``(s, z)[children]`` for children in any order (composes via rv)."""
        children = list(children)
        if all(c < 2 or self._top(c) > (z, s) for c in children):
            return self.mk(s, z, children)
        r = ZERO
        for o, c in zip(self.switches[s].outcomes, children):
            r = self.g_or(r, self.g_and(self.rv(s, z, o), c))
        return r

    def reachable(self, u):
        seen, stack = set(), [u]
        while stack:
            x = stack.pop()
            if x < 2 or x in seen:
                continue
            seen.add(x)
            stack.extend(self._nodes[x][1])
        return seen

    def size(self, u):
        """Number of internal nodes reachable from ``u``."""
        return len(self.reachable(u))

    def g_prob(self, u, dist=None):
        """Probability of ``u`` with independent switch instances.

        ``dist`` maps switch name to a probability tuple; it defaults to the
        declared distributions.
        """
        probs = {s: (dist or {}).get(s, sw.probs) for s, sw in self.switches.items()}
        val = {ZERO: 0.0, ONE: 1.0}
        # children always have smaller ids than their parents
        for x in sorted(self.reachable(u)):
            (z, s), kids = self._nodes[x]
            val[x] = sum(p * val[c] for p, c in zip(probs[s], kids))
        return val[u]

    def evaluate(self, u, world):
        """Truth value of ``u`` under ``world[(s, z)] = outcome``."""
        while u >= 2:
            (z, s), kids = self._nodes[u]
            u = kids[self.switches[s].outcomes.index(world[(s, z)])]
        return u == ONE

    def explanations(self, u):
        """All root-to-1 paths as tuples of ``(s, z, outcome)``."""
        if u == ONE:
            return [()]
        if u == ZERO:
            return []
        (z, s), kids = self._nodes[u]
        out = []
        for o, c in zip(self.switches[s].outcomes, kids):
            out.extend(((s, z, o),) + e for e in self.explanations(c))
        return out

    def to_dot(self, u, name="G"):
        lines = [f"digraph {name} {{"]
        lines.append('  n0 [label="0", shape=circle];')
        lines.append('  n1 [label="1", shape=circle];')
        for x in sorted(self.reachable(u)):
            (z, s), kids = self._nodes[x]
            lines.append(f'  n{x} [label="({s},{z})", shape=box, style=rounded];')
            for o, c in zip(self.switches[s].outcomes, kids):
                if c != ZERO:
                    lines.append(f'  n{x} -> n{c} [label="{o}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------- ground evaluator

class QueryError(ValueError):
    """The query cannot be evaluated (unknown predicate, unbound argument)."""


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


class _Renamer:
    def __init__(self):
        self.counter = itertools.count()

    def rename(self, clause):
        k = next(self.counter)
        m = {v: Var(f"{v.name}#{k}") for v in clause.variables()}

        def r(t):
            return m.get(t, t) if isinstance(t, Var) else t

        def rg(g):
            if isinstance(g, CallGoal):
                return CallGoal(g.pred, tuple(r(a) for a in g.args), g.pos)
            if isinstance(g, InGoal):
                return InGoal(r(g.term), g.pop, g.pos)
            if isinstance(g, ConstraintGoal):
                return ConstraintGoal(g.op, r(g.left), r(g.right), g.pos)
            return MswGoal(g.switch, r(g.inst), r(g.value), g.pos)
        return rg(clause.head), [rg(g) for g in clause.body]


def _instance(t, popmap):
    if isinstance(t, int):
        return t
    if t in popmap.elements:
        return popmap.elements[t]
    raise QueryError(f"{t} is not a population element")


def ground_query(tp: TypedProgram, popmap: PopulationMap, query: CallGoal,
                 engine: GroundEngine = None):
    """Ground explanation graph of ``query`` by exhaustive SLD resolution.

    Returns ``(engine, node)``.
    """
    engine = engine or GroundEngine(tp.switches)
    prog = tp.program
    renamer = _Renamer()

    def solve(goals, s, node):
        if node == ZERO:
            return
        if not goals:
            yield s, node
            return
        g, rest = goals[0], goals[1:]
        if isinstance(g, InGoal):
            lo, hi = popmap.domain(g.pop)
            t = _walk(g.term, s)
            if isinstance(t, Var):
                for k in range(lo, hi + 1):
                    yield from solve(rest, {**s, t: k}, node)
            elif lo <= _instance(t, popmap) <= hi:
                yield from solve(rest, s, node)
        elif isinstance(g, ConstraintGoal):
            a, b = _walk(g.left, s), _walk(g.right, s)
            if isinstance(a, Var) or isinstance(b, Var):
                raise QueryError(f"unbound variable in constraint {g}")
            a, b = _instance(a, popmap), _instance(b, popmap)
            ok = a < b if g.op == "<" else (a == b if g.op == "=" else a != b)
            if ok:
                yield from solve(rest, s, node)
        elif isinstance(g, MswGoal):
            z = _walk(g.inst, s)
            if isinstance(z, Var):
                raise QueryError(f"unbound switch instance in {g}")
            z = _instance(z, popmap)
            v = _walk(g.value, s)
            outs = engine.switches[g.switch].outcomes
            if isinstance(v, Var):
                for o in outs:
                    yield from solve(rest, {**s, v: o}, engine.g_and(node, engine.rv(g.switch, z, o)))
            elif v in outs:
                yield from solve(rest, s, engine.g_and(node, engine.rv(g.switch, z, v)))
        else:
            clauses = prog.clauses_for(g.key)
            if not clauses:
                raise QueryError(f"undefined predicate {g.pred}/{len(g.args)}")
            for c in clauses:
                head, body = renamer.rename(c)
                s2 = s
                for x, y in zip(head.args, g.args):
                    s2 = _unify(x, y, s2)
                    if s2 is None:
                        break
                if s2 is None:
                    continue
                for s3, n3 in solve(body, s2, node):
                    yield from solve(rest, s3, n3)

    result = ZERO
    for _, n in solve([query], {}, ONE):
        result = engine.g_or(result, n)
    return engine, result
