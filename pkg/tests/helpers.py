"""Independent oracles and generators shared by the test modules."""
import itertools
import random

from liftex import constraints as C
from liftex.constraints import FALSE
from liftex.ground import GroundEngine
from liftex.lifted import (LEAF0, LEAF1, LT, LiftedGraph, check_well_structured,
                           compare_nodes, ground, mk, substitute_all)
from liftex.program import Switch

SWITCHES = {
    "r": Switch("r", ("a", "b"), (0.3, 0.7)),
    "s": Switch("s", ("a", "b", "c"), (0.2, 0.5, 0.3)),
}
DOM = (1, 3)


def flat_ground(g, engine, sigma=None):
    """Ground graph from the flat reading: OR over all solutions of the
    constraint of the tree with every variable replaced by its value."""
    sigma = dict(sigma or {})
    if g.is_false:
        return 0
    eta = g.eta
    for x in g.free:
        eta = C.substitute(eta, x, sigma[x]) if eta is not FALSE else FALSE
    if eta is FALSE:
        return 0
    result = 0
    for tau in C.enumerate_solutions(eta):
        env = {**sigma, **tau}
        result = engine.g_or(result, _tree(g.psi, env, engine, {}))
    return result


def _tree(t, env, engine, memo):
    if t.is_leaf:
        return t.term
    if t.id in memo:
        return memo[t.id]
    z = t.term if isinstance(t.term, int) else env[t.term]
    r = engine.node(t.switch, z, [_tree(c, env, engine, memo) for c in t.children])
    memo[t.id] = r
    return r


def assignments(vars_, dom=DOM):
    vars_ = sorted(vars_)
    for vals in itertools.product(range(dom[0], dom[1] + 1), repeat=len(vars_)):
        yield dict(zip(vars_, vals))


def ground_at(g, engine, sigma):
    """Recursive grounding of ``g`` after fixing its free variables."""
    h = substitute_all(g, {x: sigma[x] for x in g.free})
    if h.is_false:
        return 0
    return ground(h, engine)


def random_eta(rng, vars_, dom=DOM):
    atoms = []
    vs = sorted(vars_)
    for _ in range(rng.randint(0, 2)):
        x = rng.choice(vs)
        kind = rng.random()
        if kind < 0.45 and len(vs) > 1:
            y = rng.choice([v for v in vs if v != x])
            atoms.append(C.atom(f"{x}<{y}"))
        elif kind < 0.55 and len(vs) > 1:
            y = rng.choice([v for v in vs if v != x])
            atoms.append(C.atom(f"{x}={y}"))
        elif kind < 0.8:
            atoms.append(C.atom(f"{x}<{rng.randint(dom[0] + 1, dom[1])}"))
        else:
            atoms.append(C.atom(f"{rng.randint(dom[0], dom[1] - 1)}<{x}"))
    return C.from_atoms(atoms, {v: dom for v in vs})


def random_tree(rng, eta, terms, depth, parent=None):
    if depth == 0 or (parent is not None and rng.random() < 0.3):
        return LEAF1 if rng.random() < 0.5 else LEAF0
    labels = []
    for s in sorted(SWITCHES):
        for t in terms:
            cand = mk(s, t, [LEAF0] * len(SWITCHES[s].outcomes))
            if parent is None or compare_nodes(eta, parent, cand) == LT:
                labels.append((s, t))
    if not labels:
        return LEAF1 if rng.random() < 0.5 else LEAF0
    s, t = rng.choice(labels)
    probe = mk(s, t, [LEAF1] + [LEAF0] * (len(SWITCHES[s].outcomes) - 1))
    kids = [random_tree(rng, eta, terms, depth - 1, probe) for _ in SWITCHES[s].outcomes]
    return mk(s, t, kids)


def random_graph(rng, bound_names, free_names=("X", "Z"), depth=3, dom=DOM, consts=True):
    """A random well-structured, properly ordered lifted graph."""
    while True:
        free = [v for v in free_names if rng.random() < 0.5]
        bound = [v for v in bound_names if rng.random() < 0.6]
        vs = free + bound
        if not vs:
            continue
        eta = random_eta(rng, vs, dom)
        if eta is FALSE:
            continue
        terms = list(vs) + ([rng.randint(dom[0], dom[1])] if consts else [])
        psi = random_tree(rng, eta, terms, depth)
        g = LiftedGraph(frozenset(bound), eta, psi)
        if check_well_structured(g):
            return g


def engine():
    return GroundEngine(SWITCHES)


def rng(seed):
    return random.Random(seed)


# ----------------------------------------------------------- world oracle

def _prove(goals, s, world, tp, popmap, depth=0):
    from liftex.program import CallGoal, ConstraintGoal, InGoal, MswGoal, Var

    def walk(t):
        while isinstance(t, Var) and t in s:
            t = s[t]
        return t

    def inst(t):
        return popmap.instance(t)

    if not goals:
        return True
    g, rest = goals[0], goals[1:]
    if isinstance(g, InGoal):
        lo, hi = popmap.domain(g.pop)
        t = walk(g.term)
        if isinstance(t, Var):
            return any(_prove(rest, {**s, t: k}, world, tp, popmap, depth) for k in range(lo, hi + 1))
        return lo <= inst(t) <= hi and _prove(rest, s, world, tp, popmap, depth)
    if isinstance(g, ConstraintGoal):
        a, b = inst(walk(g.left)), inst(walk(g.right))
        ok = {"<": a < b, "=": a == b, "\\=": a != b}[g.op]
        return ok and _prove(rest, s, world, tp, popmap, depth)
    if isinstance(g, MswGoal):
        z = inst(walk(g.inst))
        got = world[(g.switch, z)]
        v = walk(g.value)
        if isinstance(v, Var):
            return _prove(rest, {**s, v: got}, world, tp, popmap, depth)
        return v == got and _prove(rest, s, world, tp, popmap, depth)
    for c in tp.program.clauses_for(g.key):
        m = {v: Var(f"{v.name}#{depth}") for v in c.variables()}

        def r(t):
            return m.get(t, t) if isinstance(t, Var) else t
        s2 = dict(s)
        ok = True
        for x, y in zip(c.head.args, g.args):
            x, y = walk(r(x)), walk(y)
            if x == y:
                continue
            if isinstance(x, Var):
                s2[x] = y
            elif isinstance(y, Var):
                s2[y] = x
            else:
                ok = False
                break
        if not ok:
            continue
        body = []
        for b in c.body:
            if isinstance(b, CallGoal):
                body.append(CallGoal(b.pred, tuple(r(a) for a in b.args)))
            elif isinstance(b, InGoal):
                body.append(InGoal(r(b.term), b.pop))
            elif isinstance(b, ConstraintGoal):
                body.append(ConstraintGoal(b.op, r(b.left), r(b.right)))
            else:
                body.append(MswGoal(b.switch, r(b.inst), r(b.value)))
        if _prove(body + list(rest), s2, world, tp, popmap, depth + 1):
            return True
    return False


def world_prob(tp, popmap, query):
    """Probability of ``query`` by summing over every joint outcome of all
    switch instances in range."""
    keys, choices = [], []
    for name, sw in sorted(tp.switches.items()):
        pop = tp.switch_types.get(name)
        lo, hi = popmap.domain(pop) if pop else (1, popmap.m)
        for z in range(lo, hi + 1):
            keys.append((name, z))
            choices.append(list(zip(sw.outcomes, sw.probs)))
    total = 0.0
    for combo in itertools.product(*choices):
        world = {k: o for k, (o, _) in zip(keys, combo)}
        if _prove([query], {}, world, tp, popmap):
            p = 1.0
            for _, q in combo:
                p *= q
            total += p
    return total
