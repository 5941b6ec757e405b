"""Probability of closed lifted graphs without grounding them.

For a bound variable ``X`` whose topmost node is ``n_X`` the probability
over the values ``c`` of ``X`` is folded as

    h(c) = g(c) + (1 - P(hat)) * h(c + 1),   h(u) = g(u)

where ``g(c)`` is the weighted sum over the children of ``n_X`` with ``X=c``
and ``hat`` is ``n_X`` with its frontier (the maximal subtrees free of
``X``) replaced by 1. This is only sound when every frontier tree is
subsumed by the explanations of ``n_X`` shifted by one, which is checked
first.

Memo entries are keyed on the node and the constraint projected onto the
unassigned variables that occur below the node, so that values which only
differ on irrelevant variables share a cell.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import constraints as C
from .constraints import FALSE, INF
from .lifted import (LEAF1, LiftedGraph, Tree, check_well_structured, lifted_explanations, mk,
                     nodes)


class NotLiftable(ValueError):
    """The graph is outside the class handled by lifted inference."""

    def __init__(self, reason, verdicts=None):
        super().__init__(reason)
        self.reason = reason
        self.verdicts = verdicts or {}


# ----------------------------------------------------------------- frontier

def top_node(psi: Tree, x: str):
    """The first node on ``x`` met top-down (unique in well-structured graphs)."""
    for t in nodes(psi):
        if t.term == x:
            return t
    return None


def frontier(psi: Tree, x: str) -> list:
    """Maximal non-zero subtrees of ``psi`` without a node on ``x``."""
    out, seen = [], set()

    def go(t):
        if t.id in seen:
            return
        seen.add(t.id)
        if x not in t.vars:
            if not (t.is_leaf and t.term == 0):
                out.append(t)
            return
        for c in t.children:
            go(c)
    go(psi)
    return out


def hat(psi: Tree, x: str) -> Tree:
    """``psi`` with its frontier w.r.t. ``x`` replaced by 1."""
    memo = {}

    def go(t):
        if x not in t.vars:
            return t if t.is_leaf and t.term == 0 else LEAF1
        r = memo.get(t.id)
        if r is None:
            r = mk(t.switch, t.term, [go(c) for c in t.children])
            memo[t.id] = r
        return r
    return go(psi)


def path_prob(psi: Tree, switches) -> float:
    """Sum over root-to-1 paths of the product of edge probabilities."""
    memo = {}

    def go(t):
        if t.is_leaf:
            return float(t.term)
        r = memo.get(t.id)
        if r is None:
            r = sum(p * go(c) for p, c in zip(switches[t.switch].probs, t.children))
            memo[t.id] = r
        return r
    return go(psi)


def hat_prob(psi: Tree, x: str, switches) -> float:
    return path_prob(hat(psi, x), switches)


# -------------------------------------------------------------- subsumption

def _lit_term(t):
    return t if isinstance(t, int) else (t, 0)


def _apply(term, sub):
    if isinstance(term, int):
        return term
    v, k = term
    if v in sub:
        w, j = sub[v]
        return (w, j + k)
    return term


def _subst_expl(e, sub):
    return frozenset((s, _apply(_lit_term(t), sub), o) for s, t, o in e)


def shift_mappings(eta, x):
    """``sigma1`` (each ``Y`` with an explicit ``X+k<Y`` in ``eta`` maps to
    ``X+k+1``) and ``sigma2`` (``X`` maps to ``X+1``)."""
    sigma1 = {}
    for a, b, bound in C.faces(eta):
        # a - b <= bound  is  a + (-bound-1) < b
        if a == x and b is not None:
            sigma1[b] = (x, -bound)
    return sigma1, {x: (x, 1)}


def frontier_subsumption(g: LiftedGraph, x: str) -> bool:
    """Check the subsumption condition for bound variable ``x``."""
    root = top_node(g.psi, x)
    if root is None:
        return True
    s1, s2 = shift_mappings(g.eta, x)
    e2s = [_subst_expl(e, s2) for e in lifted_explanations(root)]
    for phi in frontier(root, x):
        e1s = [_subst_expl(e, s1) for e in lifted_explanations(phi)]
        for e2 in e2s:
            if not any(e1 <= e2 for e1 in e1s):
                return False
    return True


# ----------------------------------------------------------------- evaluator

@dataclass
class LiftedResult:
    probability: float
    cells: int
    verdicts: dict = field(default_factory=dict)
    seconds: float = 0.0


class LiftedEvaluator:
    """Memoised evaluation of the recurrences for one closed graph."""

    def __init__(self, g: LiftedGraph, switches, check=True):
        if g.free:
            raise NotLiftable(f"graph has free variables {sorted(g.free)}")
        self.g = g
        self.switches = switches
        self.verdicts = {x: frontier_subsumption(g, x) for x in sorted(g.omega)}
        if check:
            if not check_well_structured(g):
                raise NotLiftable("graph is not well-structured", self.verdicts)
            bad = [x for x, ok in self.verdicts.items() if not ok]
            if bad:
                raise NotLiftable(f"frontier subsumption fails for {', '.join(bad)}", self.verdicts)
        self.phat = {}
        for x in g.omega:
            root = top_node(g.psi, x)
            if root is not None:
                self.phat[x] = hat_prob(root, x, switches)
        self.memo = {}

    @property
    def cells(self):
        return len(self.memo)

    def probability(self) -> float:
        if self.g.is_false:
            return 0.0
        return self.f(self.g.psi, self.g.eta)

    def f(self, t: Tree, rho) -> float:
        if rho is FALSE:
            return 0.0
        if t.is_leaf:
            return float(t.term)
        p = C.project_onto(rho, t.vars)
        key = ("f", t.id, p)
        r = self.memo.get(key)
        if r is not None:
            return r
        x = t.term
        if isinstance(x, int) or x not in p.vars:
            r = self._children(t, p)
        else:
            lo, hi = C.var_range(p, x)
            r = self.h(t, p, x, lo, hi) if lo <= hi else 0.0
        self.memo[key] = r
        return r

    def _children(self, t, p):
        probs = self.switches[t.switch].probs
        return sum(pi * self.f(c, p) for pi, c in zip(probs, t.children)
                   if pi and not (c.is_leaf and c.term == 0))

    def g_value(self, t, p, x, c):
        pc = C.substitute(p, x, c)
        if pc is FALSE:
            return 0.0
        pc = C.project_onto(pc, t.vars)
        key = ("g", t.id, pc)
        r = self.memo.get(key)
        if r is None:
            r = self._children(t, pc)
            self.memo[key] = r
        return r

    def h(self, t, p, x, lo, hi):
        """``h(lo)``, filling the chain up to the first memoised value."""
        decay = 1.0 - self.phat[x]
        pending = []
        val = None
        c = lo
        while c <= hi:
            key = ("h", t.id, c, C.relate(p, c, "<=", x))
            r = self.memo.get(key)
            if r is not None:
                val = r
                break
            pending.append((c, key))
            c += 1
        for c, key in reversed(pending):
            gc = self.g_value(t, p, x, c)
            val = gc if val is None else gc + decay * val
            self.memo[key] = val
        return val


def lifted_prob(g: LiftedGraph, switches) -> float:
    return LiftedEvaluator(g, switches).probability()


def lifted_run(g: LiftedGraph, switches) -> LiftedResult:
    t0 = time.perf_counter()
    ev = LiftedEvaluator(g, switches)
    p = ev.probability()
    return LiftedResult(p, ev.cells, ev.verdicts, time.perf_counter() - t0)


# --------------------------------------------------------------- recurrences

@dataclass
class _Eq:
    index: int
    tree: Tree
    case4: bool
    var: object = None
    lower: list = field(default_factory=list)  # [(const)] + [(Y, k)] meaning Y + k
    upper: list = field(default_factory=list)
    phat: float = 0.0
    params: tuple = ()
    hparams: tuple = ()


class RecurrenceSystem:
    """Recurrences specialised to the nodes of one graph.

    Node ``k`` gets ``f_k``; nodes that bind a variable also get ``h_k``,
    ``g_k`` and ``fhat_k``. Ranges are written with the ancestor variables
    that constrain them, so the system can be evaluated on its own.
    """

    def __init__(self, g: LiftedGraph, switches):
        self.graph = g
        self.switches = switches
        self.eqs = []
        self.index = {}
        ns = nodes(g.psi)
        for i, t in enumerate(ns, start=1):
            self.index[t.id] = i
        assigned_above = {g.psi.id: frozenset()}
        for t in ns:
            above = assigned_above.get(t.id, frozenset())
            x = t.term
            case4 = isinstance(x, str) and x not in above
            eq = _Eq(self.index[t.id], t, case4, x if case4 else None)
            below = above | {x} if case4 else above
            for c in t.children:
                if not c.is_leaf:
                    # union over paths; a variable assigned on one path only
                    # stays out of the bounds at evaluation time
                    assigned_above[c.id] = assigned_above.get(c.id, frozenset()) | below
            if case4:
                eq.lower, eq.upper = self._bounds(x, above)
                eq.phat = hat_prob(t, x, switches)
            self.eqs.append(eq)
        self._params()
        self._memo = {}

    def _bounds(self, x, above):
        eta = self.graph.eta
        lo = [-eta.entry(None, x)]
        hi = [eta.entry(x, None)]
        dlo, dhi = eta.domain(x)
        for y in sorted(above):
            if y not in eta.vars:
                continue
            ylo, yhi = eta.domain(y)
            b = eta.entry(y, x)  # y - x <= b  =>  x >= y - b
            if b < INF and b < yhi - dlo:
                lo.append((y, -b))
            b = eta.entry(x, y)  # x - y <= b  =>  x <= y + b
            if b < INF and b < dhi - ylo:
                hi.append((y, b))
        # a constant bound implied by an ancestor term is dropped
        if any(-eta.entry(None, y) + k >= lo[0] for y, k in lo[1:]):
            lo[0] = -INF
        if any(eta.entry(y, None) + k <= hi[0] for y, k in hi[1:]):
            hi[0] = INF
        return lo, hi

    def _params(self):
        by_id = {eq.tree.id: eq for eq in self.eqs}
        for eq in reversed(self.eqs):
            ps = set()
            for c in eq.tree.children:
                if not c.is_leaf:
                    ps |= set(by_id[c.id].params)
            if eq.case4:
                ps |= {y for y, _ in eq.upper[1:]}
                ps.discard(eq.var)
                eq.hparams = tuple(sorted(ps))
                ps |= {y for y, _ in eq.lower[1:]}
            eq.params = tuple(sorted(ps))

    def node(self, k) -> Tree:
        return self.eqs[k - 1].tree

    def find(self, switch, term):
        """Index of the equation for the node labelled ``(switch, term)``."""
        for eq in self.eqs:
            if eq.tree.switch == switch and eq.tree.term == term:
                return eq.index
        raise KeyError((switch, term))

    @staticmethod
    def _eval_bound(parts, env, pick):
        vals = [parts[0]] if abs(parts[0]) < INF else []
        vals += [env[y] + k for y, k in parts[1:] if y in env]
        if not vals:
            # the dropped constant is implied by terms present on every path
            raise KeyError("bound depends on an unassigned variable")
        return pick(vals)

    def range(self, k, env):
        eq = self.eqs[k - 1]
        return (self._eval_bound(eq.lower, env, max), self._eval_bound(eq.upper, env, min))

    def _key(self, tag, k, env, extra=()):
        eq = self.eqs[k - 1]
        ps = eq.hparams if tag == "h" else eq.params
        return (tag, k) + tuple(extra) + tuple(env.get(y) for y in ps)

    def f(self, k, env=None) -> float:
        env = env or {}
        eq = self.eqs[k - 1]
        key = self._key("f", k, env)
        if key in self._memo:
            return self._memo[key]
        if eq.case4:
            lo, hi = self.range(k, env)
            r = self.h(k, lo, env) if lo <= hi else 0.0
        else:
            r = self._sum(eq, env)
        self._memo[key] = r
        return r

    def _child(self, c, env):
        if c.is_leaf:
            return float(c.term)
        return self.f(self.index[c.id], env)

    def _sum(self, eq, env):
        probs = self.switches[eq.tree.switch].probs
        return sum(p * self._child(c, env) for p, c in zip(probs, eq.tree.children))

    def g(self, k, c, env=None) -> float:
        eq = self.eqs[k - 1]
        return self._sum(eq, {**(env or {}), eq.var: c})

    def h(self, k, c, env=None) -> float:
        env = env or {}
        eq = self.eqs[k - 1]
        hi = self._eval_bound(eq.upper, env, min)
        key = self._key("h", k, env, (c,))
        if key in self._memo:
            return self._memo[key]
        # iterate from the top of the range down to c
        val = None
        for j in range(hi, c - 1, -1):
            kj = self._key("h", k, env, (j,))
            if kj in self._memo:
                val = self._memo[kj]
                continue
            gj = self.g(k, j, env)
            val = gj if val is None else gj + (1 - eq.phat) * val
            self._memo[kj] = val
        return val if val is not None else 0.0

    def probability(self) -> float:
        g = self.graph
        if g.is_false:
            return 0.0
        if g.psi.is_leaf:
            return float(g.psi.term)
        return self.f(1)

    # -- text

    def _fname(self, c, args):
        if c.is_leaf:
            return str(c.term)
        k = self.index[c.id]
        ps = self.eqs[k - 1].params
        return f"f{k}({', '.join(ps)})"

    @staticmethod
    def _bound_text(parts, name):
        terms = [str(parts[0])] if abs(parts[0]) < INF else []
        for y, k in parts[1:]:
            terms.append(y if k == 0 else f"{y}{'+' if k > 0 else '-'}{abs(k)}")
        if len(terms) == 1:
            return terms[0]
        return f"{name}({', '.join(terms)})"

    def render(self) -> str:
        lines = []
        for eq in self.eqs:
            k = eq.index
            ps = ", ".join(eq.params)
            probs = self.switches[eq.tree.switch].probs
            terms = [f"{p:g}*{self._fname(c, eq.params)}" for p, c in zip(probs, eq.tree.children)
                     if not (c.is_leaf and c.term == 0)]
            body = " + ".join(terms) if terms else "0"
            label = f"({eq.tree.switch},{eq.tree.term})"
            if not eq.case4:
                lines.append(f"f{k}({ps}) = {body}    % {label}")
                continue
            x = eq.var
            lo = self._bound_text(eq.lower, "max")
            hi = self._bound_text(eq.upper, "min")
            hargs = ", ".join((x,) + eq.hparams)
            hnext = ", ".join((f"{x}+1",) + eq.hparams)
            lines.append(f"f{k}({ps}) = h{k}({', '.join((lo,) + eq.hparams)}) if {lo} <= {hi} else 0"
                         f"    % {label}")
            lines.append(f"h{k}({hargs}) = g{k}({hargs}) + (1 - fhat{k}) * h{k}({hnext}) if {x} < {hi}")
            lines.append(f"h{k}({hargs}) = g{k}({hargs}) if {x} = {hi}")
            lines.append(f"g{k}({hargs}) = {body}")
            lines.append(f"fhat{k} = {eq.phat:.12g}")
        if not lines:
            lines.append(f"f = {self.probability():g}")
        return "\n".join(lines) + "\n"


def emit_recurrences(g: LiftedGraph, switches) -> RecurrenceSystem:
    return RecurrenceSystem(g, switches)
