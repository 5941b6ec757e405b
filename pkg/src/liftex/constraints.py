"""Conjunctive difference constraints over integer instance variables.

A formula is kept as a closed difference-bound matrix (DBM) whose row and
column 0 stand for the constant zero: ``d[i][j]`` bounds ``x_i - x_j`` from
above, so ``d[i][0]`` is the upper bound of ``x_i`` and ``-d[0][i]`` its lower
bound. Every variable carries a declared domain ``[lo, hi]`` which is the box
used by negation. The unsatisfiable formula is the singleton ``FALSE``.

Closure is exact over the integers, so satisfiability, entailment,
projection and ranges are all read off the closed matrix.
"""
from __future__ import annotations

import re
from array import array
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Union

from . import _kernels as K

INF = K.INF

Term = Union[str, int]


class ConstraintError(ValueError):
    """Raised on ill-formed constraints (unknown variable, bad offset, ...)."""


class DomainMismatch(ConstraintError):
    """A shared variable has different declared domains in two formulas."""


@dataclass(frozen=True)
class AtomicConstraint:
    """``lhs < rhs + offset`` or ``lhs = rhs + offset``.

    ``lhs``/``rhs`` are variable ids; ``None`` stands for the constant 0,
    which is how bounds against constants are written.
    """
    kind: str
    lhs: Optional[str]
    rhs: Optional[str]
    offset: int = 0

    def __post_init__(self):
        if self.kind not in ("lt", "eq"):
            raise ConstraintError(f"bad constraint kind {self.kind!r}")
        if self.lhs is None and self.rhs is None:
            raise ConstraintError("constraint mentions no variable")

    def bounds(self):
        """The difference bounds ``(x, y, b)`` meaning ``x - y <= b``."""
        if self.kind == "lt":
            return [(self.lhs, self.rhs, self.offset - 1)]
        return [(self.lhs, self.rhs, self.offset), (self.rhs, self.lhs, -self.offset)]

    def variables(self):
        return {v for v in (self.lhs, self.rhs) if v is not None}

    def __str__(self):
        op = "<" if self.kind == "lt" else "="
        if self.lhs is None:
            # 0 < rhs + k  reads as  -k < rhs
            return f"{-self.offset}{op}{self.rhs}"
        if self.rhs is None:
            return f"{self.lhs}{op}{self.offset}"
        if self.offset == 0:
            return f"{self.lhs}{op}{self.rhs}"
        sign = "+" if self.offset > 0 else "-"
        return f"{self.lhs}{op}{self.rhs}{sign}{abs(self.offset)}"


_ATOM_RE = re.compile(
    r"^\s*(?P<l>[A-Za-z_][\w']*|-?\d+)\s*(?P<op><|=)\s*"
    r"(?P<r>[A-Za-z_][\w']*|-?\d+)\s*(?:(?P<sign>[+-])\s*(?P<k>\d+))?\s*$"
)


def atom(text: str) -> AtomicConstraint:
    """Parse a small textual constraint such as ``X<Y+1``, ``X=3`` or ``2<X``."""
    m = _ATOM_RE.match(text)
    if not m:
        raise ConstraintError(f"cannot parse constraint {text!r}")
    kind = "lt" if m["op"] == "<" else "eq"
    k = int(m["k"] or 0) * (-1 if m["sign"] == "-" else 1)
    left, right = m["l"], m["r"]
    left_num = re.fullmatch(r"-?\d+", left) is not None
    right_num = re.fullmatch(r"-?\d+", right) is not None
    if left_num and right_num:
        raise ConstraintError("constraint mentions no variable")
    if right_num:
        return AtomicConstraint(kind, left, None, int(right) + k)
    if left_num:
        # c < Y + k   <=>   0 < Y + (k - c)
        return AtomicConstraint(kind, None, right, k - int(left))
    return AtomicConstraint(kind, left, right, k)


class _FalseFormula:
    """The unsatisfiable constraint formula."""
    __slots__ = ()
    vars = ()
    domains = ()

    def is_false(self):
        return True

    def __repr__(self):
        return "FALSE"

    def __reduce__(self):
        return "FALSE"

    def key(self):
        return None


FALSE = _FalseFormula()


class Constraint:
    """A satisfiable conjunction of difference constraints (closed DBM)."""
    __slots__ = ("vars", "domains", "_idx", "_d", "_hash", "_faces")

    def __init__(self, vars_, domains, d):
        self.vars = vars_
        self.domains = domains
        self._idx = {v: i + 1 for i, v in enumerate(vars_)}
        self._d = d
        self._hash = None
        self._faces = None

    def is_false(self):
        return False

    @property
    def size(self):
        return len(self.vars) + 1

    def key(self):
        return (self.vars, self.domains, self._d.tobytes())

    def __eq__(self, other):
        return isinstance(other, Constraint) and self.key() == other.key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __repr__(self):
        return f"Constraint({render(self)!r})"

    def __str__(self):
        return render(self)

    def entry(self, x: Optional[str], y: Optional[str]) -> int:
        """Upper bound on ``x - y`` (``None`` is zero); ``INF`` if unbounded."""
        n = self.size
        return self._d[self._index(x) * n + self._index(y)]

    def _index(self, v):
        if v is None:
            return 0
        try:
            return self._idx[v]
        except KeyError:
            raise ConstraintError(f"unknown variable {v!r}") from None

    def domain(self, v):
        return self.domains[self._index(v) - 1]


Formula = Union[Constraint, _FalseFormula]


def _box(vars_, domains):
    n = len(vars_) + 1
    d = array("q", [0]) * (n * n)
    his = [0] + [hi for _, hi in domains]
    los = [0] + [lo for lo, _ in domains]
    for i in range(n):
        ri = i * n
        for j in range(n):
            d[ri + j] = his[i] - los[j] if i != j else 0
    return d


def unconstrained(domains: Mapping[str, tuple]) -> Formula:
    """The formula asserting only ``lo <= X <= hi`` for each variable."""
    vars_ = tuple(sorted(domains))
    doms = tuple((int(domains[v][0]), int(domains[v][1])) for v in vars_)
    if any(lo > hi for lo, hi in doms):
        return FALSE
    return Constraint(vars_, doms, _box(vars_, doms))


TRUE = unconstrained({})


def _check_offset(c: AtomicConstraint, domains):
    m = max((abs(hi) for v, (lo, hi) in domains.items() if v in c.variables()), default=0)
    if abs(c.offset) > m + 1:
        raise ConstraintError(f"offset {c.offset} of {c} exceeds m+1 = {m + 1}")


def from_atoms(atoms, domains: Mapping[str, tuple]) -> Formula:
    """Conjunction of atomic constraints over variables with the given domains."""
    for c in atoms:
        missing = c.variables() - set(domains)
        if missing:
            raise ConstraintError(f"no domain for {sorted(missing)}")
        _check_offset(c, domains)
    f = unconstrained(domains)
    for c in atoms:
        for x, y, b in c.bounds():
            f = tighten(f, x, y, b)
    return f


def tighten(f: Formula, x: Optional[str], y: Optional[str], b: int) -> Formula:
    """Conjoin ``x - y <= b`` (``None`` is zero)."""
    if f is FALSE:
        return FALSE
    n = f.size
    i, j = f._index(x), f._index(y)
    if b >= f._d[i * n + j]:
        return f
    d = array("q", f._d)
    if not K.tighten(d, n, i, j, b):
        return FALSE
    return Constraint(f.vars, f.domains, d)


def conjoin_atomic(f: Formula, c: AtomicConstraint) -> Formula:
    if f is FALSE:
        return FALSE
    _check_offset(c, dict(zip(f.vars, f.domains)))
    for x, y, b in c.bounds():
        f = tighten(f, x, y, b)
    return f


def conjoin(a: Formula, b: Formula) -> Formula:
    """Closed conjunction; raises DomainMismatch on clashing declared domains."""
    if a is FALSE or b is FALSE:
        return FALSE
    if not b.vars:
        return a
    if not a.vars:
        return b
    doms = dict(zip(a.vars, a.domains))
    for v, dom in zip(b.vars, b.domains):
        if doms.setdefault(v, dom) != dom:
            raise DomainMismatch(f"variable {v} has domains {doms[v]} and {dom}")
    vars_ = tuple(sorted(doms))
    domains = tuple(doms[v] for v in vars_)
    n = len(vars_) + 1
    d = _box(vars_, domains)
    pos = {v: i + 1 for i, v in enumerate(vars_)}
    for f in (a, b):
        m = f.size
        where = [0] + [pos[v] for v in f.vars]
        fd = f._d
        for i in range(m):
            ri = where[i] * n
            for j in range(m):
                e = fd[i * m + j]
                if e < d[ri + where[j]]:
                    d[ri + where[j]] = e
    if not K.close(d, n):
        return FALSE
    return Constraint(vars_, domains, d)


def is_satisfiable(f: Formula) -> bool:
    return f is not FALSE


def entails(f: Formula, c: AtomicConstraint) -> bool:
    if f is FALSE:
        return True
    return all(f.entry(x, y) <= b for x, y, b in c.bounds())


def _submatrix(f: Constraint, keep):
    """Restrict a closed matrix to the variables ``keep`` (already sorted)."""
    n = f.size
    idx = [0] + [f._idx[v] for v in keep]
    m = len(idx)
    src = f._d
    d = array("q", [0]) * (m * m)
    for a, i in enumerate(idx):
        ri = i * n
        ra = a * m
        for b, j in enumerate(idx):
            d[ra + b] = src[ri + j]
    return Constraint(tuple(keep), tuple(f.domains[i - 1] for i in idx[1:]), d)


def project_out(f: Formula, x: str) -> Formula:
    """Existentially eliminate ``x`` (exact on closed matrices)."""
    if f is FALSE:
        return FALSE
    f._index(x)
    return _submatrix(f, [v for v in f.vars if v != x])


def project_onto(f: Formula, keep) -> Formula:
    """Keep only the variables in ``keep`` (others are eliminated)."""
    if f is FALSE:
        return FALSE
    ks = [v for v in f.vars if v in keep]
    if len(ks) == len(f.vars):
        return f
    return _submatrix(f, ks)


def var_range(f: Formula, x: str):
    """``(lo, hi)`` of ``x`` under ``f``; ``None`` for FALSE."""
    if f is FALSE:
        return None
    return -f.entry(None, x), f.entry(x, None)


def substitute(f: Formula, x: str, k: int) -> Formula:
    """``f[k/x]``: fix ``x`` to ``k`` and eliminate it."""
    if f is FALSE:
        return FALSE
    lo, hi = f.domain(x)
    if not lo <= k <= hi:
        raise ConstraintError(f"value {k} outside the domain [{lo}, {hi}] of {x}")
    g = tighten(tighten(f, x, None, k), None, x, -k)
    return project_out(g, x)


def add_domain(f: Formula, x: str, dom) -> Formula:
    """Conjoin an unconstrained variable ``x`` with domain ``dom``."""
    return conjoin(f, unconstrained({x: dom}))


def rename(f: Formula, mapping: Mapping[str, str]) -> Formula:
    """Rename variables; the mapping must not merge two variables."""
    if f is FALSE:
        return FALSE
    new = [mapping.get(v, v) for v in f.vars]
    if len(set(new)) != len(new):
        raise ConstraintError(f"renaming {dict(mapping)} merges variables")
    if new == list(f.vars):
        return f
    order = sorted(range(len(new)), key=lambda i: new[i])
    n = f.size
    perm = [0] + [i + 1 for i in order]
    d = array("q", [0]) * (n * n)
    for a, i in enumerate(perm):
        for b, j in enumerate(perm):
            d[a * n + b] = f._d[i * n + j]
    return Constraint(tuple(new[i] for i in order), tuple(f.domains[i] for i in order), d)


def _term_index(f, t):
    return None if isinstance(t, int) else t


def diff_bound(f: Formula, t1: Term, t2: Term) -> int:
    """Upper bound on ``t1 - t2`` where each term is a variable or an int."""
    c = (t1 if isinstance(t1, int) else 0) - (t2 if isinstance(t2, int) else 0)
    e = f.entry(_term_index(f, t1), _term_index(f, t2))
    return INF if e >= INF else e + c


def relate(f: Formula, t1: Term, rel: str, t2: Term) -> Formula:
    """Conjoin ``t1 < t2`` (rel ``'<'``), ``t1 = t2`` (``'='``) or ``t1 <= t2``."""
    if f is FALSE:
        return FALSE
    if isinstance(t1, int) and isinstance(t2, int):
        ok = {"<": t1 < t2, "=": t1 == t2, "<=": t1 <= t2}[rel]
        return f if ok else FALSE
    c = (t1 if isinstance(t1, int) else 0) - (t2 if isinstance(t2, int) else 0)
    x, y = _term_index(f, t1), _term_index(f, t2)
    # t1 - t2 = (x - y) + c
    if rel == "<":
        return tighten(f, x, y, -1 - c)
    if rel == "<=":
        return tighten(f, x, y, -c)
    if rel == "=":
        return tighten(tighten(f, x, y, -c), y, x, c)
    raise ConstraintError(f"bad relation {rel!r}")


def entails_relation(f: Formula, t1: Term, rel: str, t2: Term) -> bool:
    if f is FALSE:
        return True
    if rel == "<":
        return diff_bound(f, t1, t2) <= -1
    if rel == "<=":
        return diff_bound(f, t1, t2) <= 0
    return diff_bound(f, t1, t2) <= 0 and diff_bound(f, t2, t1) <= 0


def faces(f: Formula):
    """A non-redundant list of bounds ``(x, y, b)`` that, with the domain box,
    defines ``f``. Bounds already implied by the box are left out."""
    if f is FALSE:
        return []
    if f._faces is not None:
        return f._faces
    n = f.size
    box = _box(f.vars, f.domains)
    cand = [(i, j, f._d[i * n + j]) for i in range(n) for j in range(n)
            if i != j and f._d[i * n + j] < box[i * n + j]]
    kept = list(cand)
    for c in cand:
        rest = [e for e in kept if e is not c]
        d = array("q", box)
        for i, j, b in rest:
            if b < d[i * n + j]:
                d[i * n + j] = b
        K.close(d, n)
        if d[c[0] * n + c[1]] <= c[2]:
            kept = rest
    names = (None,) + f.vars
    f._faces = [(names[i], names[j], b) for i, j, b in kept]
    return f._faces


def negate(f: Formula) -> list:
    """Disjoint formulas whose union is the complement of ``f`` in its box."""
    if f is FALSE:
        return [TRUE]
    box = unconstrained(dict(zip(f.vars, f.domains)))
    out = []
    prefix = box
    for x, y, b in faces(f):
        if x is not None and y is not None:
            pieces = [tighten(tighten(prefix, x, y, b + 1), y, x, -b - 1),
                      tighten(prefix, y, x, -b - 2)]
        else:
            pieces = [tighten(prefix, y, x, -b - 1)]
        out.extend(p for p in pieces if p is not FALSE)
        prefix = tighten(prefix, x, y, b)
    return out


def disjoin(a: Formula, b: Formula) -> list:
    """Disjoint formulas covering exactly the solutions of ``a`` or ``b``."""
    out = []
    for p in negate(b):
        out.append(conjoin(a, p))
    for p in negate(a):
        out.append(conjoin(b, p))
    out.append(conjoin(a, b))
    return [p for p in out if p is not FALSE]


def enumerate_solutions(f: Formula) -> Iterator[dict]:
    """All integer solutions in lexicographic order of the sorted variables."""
    if f is FALSE:
        return
    if not f.vars:
        yield {}
        return
    x = f.vars[0]
    lo, hi = var_range(f, x)
    for k in range(lo, hi + 1):
        for rest in enumerate_solutions(substitute(f, x, k)):
            yield {x: k, **rest}


def satisfies(f: Formula, assignment: Mapping[str, int]) -> bool:
    """Check a total assignment directly against the matrix."""
    if f is FALSE:
        return False
    vals = [0] + [assignment[v] for v in f.vars]
    for (lo, hi), v in zip(f.domains, vals[1:]):
        if not lo <= v <= hi:
            return False
    n = f.size
    for i in range(n):
        for j in range(n):
            e = f._d[i * n + j]
            if e < INF and vals[i] - vals[j] > e:
                return False
    return True


def _render_face(x, y, b, eqs):
    if x is None:
        return f"{-b}<={y}"
    if y is None:
        return f"{x}<={b}"
    if (y, x, -b) in eqs:
        if b == 0:
            return f"{x}={y}"
        return f"{x}={y}{'+' if b > 0 else '-'}{abs(b)}"
    k = b + 1
    if k == 0:
        return f"{x}<{y}"
    return f"{x}<{y}{'+' if k > 0 else '-'}{abs(k)}"


def render(f: Formula, bounds: bool = True) -> str:
    """Debug text such as ``X<Y, Y<Z, 1<=X<=100``."""
    if f is FALSE:
        return "false"
    fs = faces(f)
    eqs = set(fs)
    parts = []
    done = set()
    for x, y, b in fs:
        if x is None or y is None:
            continue
        if (y, x, -b) in eqs:
            if (y, x, -b) in done:
                continue
            done.add((x, y, b))
        parts.append(_render_face(x, y, b, eqs))
    if bounds:
        for v in f.vars:
            lo, hi = var_range(f, v)
            parts.append(f"{lo}<={v}<={hi}" if lo != hi else f"{v}={lo}")
    else:
        for x, y, b in fs:
            if x is None or y is None:
                parts.append(_render_face(x, y, b, eqs))
    return ", ".join(parts) if parts else "true"
