"""Surface language: parsing, type inference and population mapping.

Programs are Prolog-like definite clauses extended with population
directives, typed instance variables and ``msw/3`` switch atoms::

    :- population(coins, 10).
    :- set_sw(toss, categorical([h:0.5, t:0.5])).
    twoheads :- X in coins, Y in coins, {X < Y}, msw(toss, X, h), msw(toss, Y, h).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product
from typing import Optional, Union


class PxError(Exception):
    """Error with a source position, rendered as ``file:line:col: message``."""

    def __init__(self, message, filename="<string>", line=0, col=0):
        super().__init__(message)
        self.message = message
        self.filename = filename
        self.line = line
        self.col = col

    def __str__(self):
        return f"{self.filename}:{self.line}:{self.col}: {self.message}"


class ParseError(PxError):
    pass


class TypeCheckError(PxError):
    pass


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


# constants are plain ``str`` (atoms) or ``int``
Term = Union[Var, str, int]


def _term_str(t):
    return str(t)


@dataclass(frozen=True)
class CallGoal:
    pred: str
    args: tuple = ()
    pos: tuple = field(default=(0, 0), compare=False)

    @property
    def key(self):
        return (self.pred, len(self.args))

    def __str__(self):
        if not self.args:
            return self.pred
        return f"{self.pred}({', '.join(map(_term_str, self.args))})"


@dataclass(frozen=True)
class InGoal:
    term: Term
    pop: str
    pos: tuple = field(default=(0, 0), compare=False)

    def __str__(self):
        return f"{self.term} in {self.pop}"


@dataclass(frozen=True)
class ConstraintGoal:
    op: str  # '<', '=', '\\='
    left: Term
    right: Term
    pos: tuple = field(default=(0, 0), compare=False)

    def __str__(self):
        return f"{{{self.left} {self.op} {self.right}}}"


@dataclass(frozen=True)
class MswGoal:
    switch: str
    inst: Term
    value: Term
    pos: tuple = field(default=(0, 0), compare=False)

    def __str__(self):
        return f"msw({self.switch}, {self.inst}, {self.value})"


Goal = Union[CallGoal, InGoal, ConstraintGoal, MswGoal]


@dataclass(frozen=True)
class Clause:
    head: CallGoal
    body: tuple = ()

    def __str__(self):
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(map(str, self.body))}."

    def variables(self):
        seen = []
        for g in (self.head,) + self.body:
            for t in goal_terms(g):
                if isinstance(t, Var) and t not in seen:
                    seen.append(t)
        return seen


@dataclass(frozen=True)
class Switch:
    name: str
    outcomes: tuple
    probs: tuple

    def prob(self, value):
        return self.probs[self.outcomes.index(value)]


@dataclass
class Program:
    clauses: list
    switches: dict
    populations: dict  # name -> cardinality, declaration order
    elements: list  # (constant, population) in declaration order
    filename: str = "<string>"

    def clauses_for(self, key):
        return [c for c in self.clauses if c.head.key == key]

    def predicates(self):
        keys = []
        for c in self.clauses:
            if c.head.key not in keys:
                keys.append(c.head.key)
        return keys


def goal_terms(g):
    if isinstance(g, CallGoal):
        return g.args
    if isinstance(g, InGoal):
        return (g.term,)
    if isinstance(g, ConstraintGoal):
        return (g.left, g.right)
    return (g.inst, g.value)


# ---------------------------------------------------------------- tokenizer

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<atom>[a-z][A-Za-z0-9_]*)
  | (?P<op>:-|\\=|=<|>=|[<>=])
  | (?P<punct>[()\[\]{},.:/])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text, filename="<string>"):
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", filename, line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(Token(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


# ------------------------------------------------------------------- parser

class _Parser:
    def __init__(self, text, filename):
        self.filename = filename
        self.toks = tokenize(text, filename)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, self.filename, tok.line, tok.col)

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise self.error(f"expected {text!r}, found {t.text or 'end of input'!r}", t)
        return t

    def at(self, text):
        return self.peek().text == text

    def program(self):
        prog = Program([], {}, {}, [], self.filename)
        while self.peek().kind != "eof":
            if self.at(":-"):
                self.directive(prog)
            else:
                prog.clauses.append(self.clause())
        return prog

    def directive(self, prog):
        self.next()
        t = self.next()
        if t.kind != "atom":
            raise self.error("expected a directive name", t)
        self.expect("(")
        if t.text == "population":
            name = self.name()
            self.expect(",")
            size = self.integer()
            if name in prog.populations:
                raise self.error(f"population {name} declared twice", t)
            prog.populations[name] = size
        elif t.text == "element":
            const = self.name()
            self.expect(",")
            pop = self.name()
            if any(c == const for c, _ in prog.elements):
                raise self.error(f"element {const} declared twice", t)
            prog.elements.append((const, pop))
        elif t.text == "set_sw":
            name = self.name()
            self.expect(",")
            kind = self.next()
            if kind.text != "categorical":
                raise self.error("only categorical([v:p, ...]) distributions are supported", kind)
            self.expect("(")
            self.expect("[")
            outs, probs = [], []
            while True:
                outs.append(self.constant())
                self.expect(":")
                probs.append(self.probability())
                if not self.at(","):
                    break
                self.next()
            self.expect("]")
            self.expect(")")
            if len(set(outs)) != len(outs):
                raise self.error(f"switch {name} repeats an outcome", t)
            if abs(sum(probs) - 1) > 1e-9:
                raise self.error(f"probabilities of switch {name} sum to {float(sum(probs))}", t)
            if any(p < 0 for p in probs):
                raise self.error(f"negative probability for switch {name}", t)
            if name in prog.switches:
                raise self.error(f"switch {name} declared twice", t)
            prog.switches[name] = Switch(name, tuple(outs), tuple(float(p) for p in probs))
        else:
            raise self.error(f"unknown directive {t.text}", t)
        self.expect(")")
        self.expect(".")

    def name(self):
        t = self.next()
        if t.kind != "atom":
            raise self.error(f"expected a name, found {t.text!r}", t)
        return t.text

    def integer(self):
        t = self.next()
        if t.kind != "num" or not t.text.isdigit():
            raise self.error(f"expected a non-negative integer, found {t.text!r}", t)
        return int(t.text)

    def probability(self):
        t = self.next()
        if t.kind != "num":
            raise self.error(f"expected a probability, found {t.text!r}", t)
        p = Fraction(t.text)
        if self.at("/"):
            self.next()
            q = self.next()
            if q.kind != "num" or Fraction(q.text) == 0:
                raise self.error("bad denominator", q)
            p /= Fraction(q.text)
        return p

    def constant(self):
        t = self.next()
        if t.kind == "atom":
            return t.text
        if t.kind == "num" and t.text.isdigit():
            return int(t.text)
        raise self.error(f"expected a constant, found {t.text!r}", t)

    def term(self):
        t = self.peek()
        if t.kind == "var":
            self.next()
            return Var(t.text)
        return self.constant()

    def clause(self):
        head = self.call()
        body = []
        if self.at(":-"):
            self.next()
            body.append(self.goal())
            while self.at(","):
                self.next()
                body.append(self.goal())
        self.expect(".")
        return Clause(head, tuple(body))

    def call(self):
        t = self.next()
        if t.kind != "atom":
            raise self.error(f"expected a predicate name, found {t.text or 'end of input'!r}", t)
        args = []
        if self.at("("):
            self.next()
            args.append(self.term())
            while self.at(","):
                self.next()
                args.append(self.term())
            self.expect(")")
        return CallGoal(t.text, tuple(args), (t.line, t.col))

    def goal(self):
        t = self.peek()
        pos = (t.line, t.col)
        if t.text == "{":
            self.next()
            left = self.term()
            op = self.next()
            if op.text not in ("<", "=", "\\=", ">"):
                raise self.error(f"unsupported constraint operator {op.text!r}", op)
            right = self.term()
            self.expect("}")
            if op.text == ">":
                return ConstraintGoal("<", right, left, pos)
            return ConstraintGoal(op.text, left, right, pos)
        if t.kind == "var" or (t.kind == "atom" and self.toks[self.i + 1].text == "in"):
            term = self.term()
            self.expect("in")
            return InGoal(term, self.name(), pos)
        if t.text == "msw" and self.toks[self.i + 1].text == "(":
            self.next()
            self.expect("(")
            sw = self.name()
            self.expect(",")
            inst = self.term()
            self.expect(",")
            value = self.term()
            self.expect(")")
            return MswGoal(sw, inst, value, pos)
        return self.call()


def parse_program(text: str, filename: str = "<string>") -> Program:
    return _Parser(text, filename).program()


def parse_query(text: str) -> CallGoal:
    p = _Parser(text.strip().rstrip(".") + " .", "<query>")
    q = p.call()
    p.expect(".")
    if p.peek().kind != "eof":
        raise p.error("trailing input after query")
    return q


def render_program(prog: Program) -> str:
    """Text that parses back to an equal program."""
    lines = [f":- population({n}, {k})." for n, k in prog.populations.items()]
    lines += [f":- element({c}, {p})." for c, p in prog.elements]
    for s in prog.switches.values():
        items = ", ".join(f"{o}:{float(p)!r}" for o, p in zip(s.outcomes, s.probs))
        lines.append(f":- set_sw({s.name}, categorical([{items}])).")
    lines += [str(c) for c in prog.clauses]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------- typing

class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


@dataclass
class TypedProgram:
    """A program whose instance variables all have a population."""
    program: Program
    var_types: list  # per clause: {var name: population}
    switch_types: dict  # switch -> population
    arg_types: dict  # (pred, arity) -> tuple of population or None

    @property
    def clauses(self):
        return self.program.clauses

    @property
    def switches(self):
        return self.program.switches


def _pos_error(prog, msg, pos):
    return TypeCheckError(msg, prog.filename, pos[0], pos[1])


def _check_recursion(prog):
    calls = {k: set() for k in prog.predicates()}
    for c in prog.clauses:
        for g in c.body:
            if isinstance(g, CallGoal):
                calls[c.head.key].add(g.key)
    state = {}

    def visit(k, stack):
        state[k] = 1
        for j in calls.get(k, ()):
            if state.get(j) == 1:
                cl = prog.clauses_for(k)[0]
                raise _pos_error(prog, f"recursive predicate {j[0]}/{j[1]} is not supported", cl.head.pos)
            if j not in state:
                visit(j, stack + [j])
        state[k] = 2

    for k in calls:
        if k not in state:
            visit(k, [k])


def check_well_typed(prog: Program) -> TypedProgram:
    """Infer populations for instance variables and reject untypable programs.

    Missing ``X in p`` goals are inserted in front of the first goal that
    mentions ``X``.
    """
    elements = dict(prog.elements)
    for c, p in prog.elements:
        if p not in prog.populations:
            raise TypeCheckError(f"element {c} belongs to undeclared population {p}", prog.filename, 1, 1)
    _check_recursion(prog)
    known = set(prog.predicates())
    uf = _UnionFind()
    pops = {}  # root -> (population, pos)
    inst_vars = [set() for _ in prog.clauses]
    value_vars = [set() for _ in prog.clauses]

    def node(ci, t):
        if isinstance(t, Var):
            return ("v", ci, t.name)
        if isinstance(t, str) and t in elements:
            return ("p", elements[t])
        return None

    def unify(a, b, pos):
        if a is None or b is None:
            return
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            return
        pa, pb = _pop_of(ra), _pop_of(rb)
        if pa and pb and pa != pb:
            raise _pos_error(prog, f"conflicting populations {pa} and {pb}", pos)
        uf.union(ra, rb)
        if pa or pb:
            pops[uf.find(ra)] = pa or pb

    def _pop_of(r):
        if r in pops:
            return pops[r]
        if r[0] == "p":
            return r[1]
        return None

    for p in prog.populations:
        pops[("p", p)] = p

    for ci, c in enumerate(prog.clauses):
        for i, a in enumerate(c.head.args):
            unify(node(ci, a), ("a", c.head.key, i), c.head.pos)
        for g in c.body:
            if isinstance(g, InGoal):
                if g.pop not in prog.populations:
                    raise _pos_error(prog, f"undeclared population {g.pop}", g.pos)
                n = node(ci, g.term)
                if n is None:
                    raise _pos_error(prog, f"{g.term} is not an instance of any population", g.pos)
                unify(n, ("p", g.pop), g.pos)
                if isinstance(g.term, Var):
                    inst_vars[ci].add(g.term.name)
            elif isinstance(g, ConstraintGoal):
                for t in (g.left, g.right):
                    if node(ci, t) is None:
                        raise _pos_error(prog, f"constraint argument {t} is not an instance", g.pos)
                    if isinstance(t, Var):
                        inst_vars[ci].add(t.name)
                unify(node(ci, g.left), node(ci, g.right), g.pos)
            elif isinstance(g, MswGoal):
                sw = prog.switches.get(g.switch)
                if sw is None:
                    raise _pos_error(prog, f"undeclared switch {g.switch}", g.pos)
                n = node(ci, g.inst)
                if n is None:
                    raise _pos_error(prog, f"switch instance {g.inst} is not a population element", g.pos)
                unify(n, ("s", g.switch), g.pos)
                if isinstance(g.inst, Var):
                    inst_vars[ci].add(g.inst.name)
                if isinstance(g.value, Var):
                    value_vars[ci].add(g.value.name)
                elif g.value not in sw.outcomes:
                    raise _pos_error(prog, f"{g.value} is not an outcome of switch {g.switch}", g.pos)
            else:
                if g.key not in known:
                    raise _pos_error(prog, f"undefined predicate {g.pred}/{len(g.args)}", g.pos)
                for i, a in enumerate(g.args):
                    unify(node(ci, a), ("a", g.key, i), g.pos)

    def pop_of_node(n):
        return _pop_of(uf.find(n)) if n is not None else None

    var_types = []
    new_clauses = []
    for ci, c in enumerate(prog.clauses):
        types = {}
        for v in c.variables():
            p = pop_of_node(("v", ci, v.name))
            if p is not None:
                types[v.name] = p
        for v in inst_vars[ci]:
            if v not in types:
                raise _pos_error(prog, f"cannot infer a population for {v}", c.head.pos)
        clash = value_vars[ci] & set(types)
        if clash:
            raise _pos_error(prog, f"{sorted(clash)[0]} is used both as an instance and as a value", c.head.pos)
        var_types.append(types)
        have = {g.term.name for g in c.body if isinstance(g, InGoal) and isinstance(g.term, Var)}
        body = []
        for g in c.body:
            for t in goal_terms(g):
                if isinstance(t, Var) and t.name in types and t.name not in have:
                    have.add(t.name)
                    body.append(InGoal(t, types[t.name], g.pos))
            body.append(g)
        for v in c.head.args:
            if isinstance(v, Var) and v.name in types and v.name not in have:
                have.add(v.name)
                body.insert(0, InGoal(v, types[v.name], c.head.pos))
        new_clauses.append(Clause(c.head, tuple(body)))
    switch_types = {}
    for s in prog.switches:
        p = pop_of_node(("s", s)) if ("s", s) in uf.parent else None
        if p is not None:
            switch_types[s] = p
    arg_types = {}
    for k in known:
        arg_types[k] = tuple(pop_of_node(("a", k, i)) if ("a", k, i) in uf.parent else None
                             for i in range(k[1]))
    typed = replace(prog, clauses=new_clauses)
    return TypedProgram(typed, var_types, switch_types, arg_types)


def eliminate_disequality(tp: TypedProgram) -> TypedProgram:
    """Replace each ``{X \\= Y}`` by two clauses using ``<`` in each direction."""
    clauses, types = [], []
    for c, ty in zip(tp.clauses, tp.var_types):
        neq = [i for i, g in enumerate(c.body) if isinstance(g, ConstraintGoal) and g.op == "\\="]
        if not neq:
            clauses.append(c)
            types.append(ty)
            continue
        for flips in product((False, True), repeat=len(neq)):
            body = list(c.body)
            for i, flip in zip(neq, flips):
                g = body[i]
                left, right = (g.right, g.left) if flip else (g.left, g.right)
                body[i] = ConstraintGoal("<", left, right, g.pos)
            clauses.append(Clause(c.head, tuple(body)))
            types.append(ty)
    prog = replace(tp.program, clauses=clauses)
    return TypedProgram(prog, types, tp.switch_types, tp.arg_types)


# -------------------------------------------------------------- populations

@dataclass(frozen=True)
class PopulationMap:
    """Contiguous integer ranges for populations; elements take the low end."""
    ranges: dict  # name -> (lo, hi); empty when hi < lo
    elements: dict  # constant -> int
    m: int

    def domain(self, pop):
        return self.ranges[pop]

    def instance(self, t):
        """Integer for an element constant (ints pass through)."""
        if isinstance(t, int):
            return t
        return self.elements[t]

    def population_of(self, k):
        for p, (lo, hi) in self.ranges.items():
            if lo <= k <= hi:
                return p
        raise KeyError(k)


def map_populations(prog, overrides: Optional[dict] = None) -> PopulationMap:
    if isinstance(prog, TypedProgram):
        prog = prog.program
    sizes = dict(prog.populations)
    for name, n in (overrides or {}).items():
        if name not in sizes:
            raise TypeCheckError(f"unknown population {name}", prog.filename, 0, 0)
        if n < 0:
            raise TypeCheckError(f"negative size for population {name}", prog.filename, 0, 0)
        sizes[name] = n
    ranges = {}
    start = 1
    for name, n in sizes.items():
        ranges[name] = (start, start + n - 1)
        start += n
    elements = {}
    used = {p: 0 for p in sizes}
    for c, p in prog.elements:
        if used[p] >= sizes[p]:
            raise TypeCheckError(f"population {p} has more elements than its size {sizes[p]}",
                                 prog.filename, 0, 0)
        elements[c] = ranges[p][0] + used[p]
        used[p] += 1
    return PopulationMap(ranges, elements, start - 1)


def load(text: str, filename: str = "<string>") -> TypedProgram:
    """Parse, type-check and remove disequalities."""
    return eliminate_disequality(check_well_typed(parse_program(text, filename)))
