"""First-order definite clauses, unification and depth-bounded SLD resolution.

Terms are immutable and hashable.  A substitution is a plain ``dict`` mapping
:class:`Var` to terms.  Inside the prover substitutions are kept triangular
(bindings may point at other bound variables) and only resolved when an answer
is reported; :func:`unify` returns the fully resolved, idempotent form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

DEFAULT_DEPTH = 100


class Var:
    """A logic variable.  ``tag`` distinguishes standardized-apart copies."""

    __slots__ = ("name", "tag", "_hash")

    def __init__(self, name: str, tag: int = 0):
        self.name = name
        self.tag = tag
        self._hash = hash(("var", name, tag))

    def __eq__(self, other):
        return isinstance(other, Var) and self.name == other.name and self.tag == other.tag

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return self.name if self.tag == 0 else f"{self.name}_{self.tag}"


class Const:
    __slots__ = ("value", "_hash")

    def __init__(self, value: Union[str, int]):
        self.value = value
        self._hash = hash(("const", value))

    def __eq__(self, other):
        return isinstance(other, Const) and self.value == other.value and type(self.value) is type(other.value)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return str(self.value)


class Compound:
    __slots__ = ("functor", "args", "_hash")

    def __init__(self, functor: str, args: Iterable["Term"]):
        args = tuple(args)
        if not args:
            raise ValueError(f"compound term {functor!r} needs at least one argument")
        self.functor = functor
        self.args = args
        self._hash = hash(("cmp", functor, args))

    @property
    def arity(self) -> int:
        return len(self.args)

    def __eq__(self, other):
        return (isinstance(other, Compound) and self._hash == other._hash
                and self.functor == other.functor and self.args == other.args)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{self.functor}({','.join(map(repr, self.args))})"


Term = Union[Var, Const, Compound]


class Atom:
    """``predicate(args...)``; predicate/arity identifies the relation."""

    __slots__ = ("predicate", "args", "_hash")

    def __init__(self, predicate: str, args: Iterable[Term] = ()):
        self.predicate = predicate
        self.args = tuple(args)
        self._hash = hash(("atom", predicate, self.args))

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def key(self) -> tuple[str, int]:
        return (self.predicate, len(self.args))

    def is_ground(self) -> bool:
        return all(is_ground(a) for a in self.args)

    def __eq__(self, other):
        return (isinstance(other, Atom) and self._hash == other._hash
                and self.predicate == other.predicate and self.args == other.args)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(map(repr, self.args))})"


class Clause:
    """A definite clause ``head :- body``; a fact when the body is empty."""

    __slots__ = ("head", "body", "_vars", "_hash")

    def __init__(self, head: Atom, body: Iterable[Atom] = ()):
        self.head = head
        self.body = tuple(body)
        seen: dict[Var, None] = {}
        for atom in (head, *self.body):
            for arg in atom.args:
                _collect_vars(arg, seen)
        self._vars = tuple(seen)
        self._hash = hash((head, self.body))

    @property
    def variables(self) -> tuple[Var, ...]:
        return self._vars

    def is_fact(self) -> bool:
        return not self.body

    def is_ground(self) -> bool:
        return not self._vars

    def rename(self, tag: int) -> "Clause":
        if not self._vars:
            return self
        mapping = {v: Var(repr(v), tag) for v in self._vars}
        return Clause(substitute(self.head, mapping), [substitute(b, mapping) for b in self.body])

    def __eq__(self, other):
        return isinstance(other, Clause) and self.head == other.head and self.body == other.body

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if not self.body:
            return f"{self.head!r}."
        return f"{self.head!r} :- {', '.join(map(repr, self.body))}."


Substitution = dict


@dataclass
class ExampleSet:
    positives: list[Atom] = field(default_factory=list)
    negatives: list[Atom] = field(default_factory=list)

    def __post_init__(self):
        for atom in (*self.positives, *self.negatives):
            if not atom.is_ground():
                raise ValueError(f"example {atom!r} is not ground")

    def is_consistent(self) -> bool:
        return not set(self.positives) & set(self.negatives)


@dataclass
class Hypothesis:
    """Learner output: induced clauses plus positives left uncovered."""

    clauses: list[Clause]
    uncovered: list[Atom] = field(default_factory=list)

    def __iter__(self):
        return iter(self.clauses)

    def __len__(self):
        return len(self.clauses)


class DepthBoundError(ValueError):
    pass


# --------------------------------------------------------------------------
# term utilities

def _collect_vars(t, acc: dict):
    if isinstance(t, Var):
        acc.setdefault(t, None)
    elif isinstance(t, Compound):
        for a in t.args:
            _collect_vars(a, acc)


def term_vars(t) -> list[Var]:
    """Variables of a term, atom or clause in first-occurrence order."""
    acc: dict[Var, None] = {}
    if isinstance(t, Atom):
        for a in t.args:
            _collect_vars(a, acc)
    elif isinstance(t, Clause):
        return list(t.variables)
    else:
        _collect_vars(t, acc)
    return list(acc)


def is_ground(t) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Compound):
        return all(is_ground(a) for a in t.args)
    if isinstance(t, Atom):
        return t.is_ground()
    return True


def substitute(t, mapping: dict):
    """One-pass replacement of variables (no chasing of chained bindings)."""
    if isinstance(t, Var):
        return mapping.get(t, t)
    if isinstance(t, Compound):
        return Compound(t.functor, [substitute(a, mapping) for a in t.args])
    if isinstance(t, Atom):
        return Atom(t.predicate, [substitute(a, mapping) for a in t.args])
    return t


def walk(t, s: dict):
    while isinstance(t, Var):
        nxt = s.get(t)
        if nxt is None:
            return t
        t = nxt
    return t


def apply(s: dict, t):
    """Apply a (possibly triangular) substitution to a term or atom."""
    if isinstance(t, Var):
        t = walk(t, s)
        if isinstance(t, Var):
            return t
    if isinstance(t, Compound):
        return Compound(t.functor, [apply(s, a) for a in t.args])
    if isinstance(t, Atom):
        return Atom(t.predicate, [apply(s, a) for a in t.args])
    if isinstance(t, Clause):
        return Clause(apply(s, t.head), [apply(s, b) for b in t.body])
    return t


def _occurs(v: Var, t, s: dict) -> bool:
    t = walk(t, s)
    if t == v:
        return True
    if isinstance(t, Compound):
        return any(_occurs(v, a, s) for a in t.args)
    return False


def unify_in(a, b, s: dict) -> Optional[dict]:
    """Extend triangular substitution ``s`` to unify ``a`` and ``b``.

    ``s`` is never mutated; a new dict is returned, or None on failure.
    """
    out = None
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = walk(x, s if out is None else out)
        y = walk(y, s if out is None else out)
        if x is y or x == y:
            continue
        cur = s if out is None else out
        if isinstance(x, Var):
            if _occurs(x, y, cur):
                return None
            if out is None:
                out = dict(s)
            out[x] = y
        elif isinstance(y, Var):
            if _occurs(y, x, cur):
                return None
            if out is None:
                out = dict(s)
            out[y] = x
        elif isinstance(x, Compound) and isinstance(y, Compound):
            if x.functor != y.functor or len(x.args) != len(y.args):
                return None
            stack.extend(zip(reversed(x.args), reversed(y.args)))
        elif isinstance(x, Atom) and isinstance(y, Atom):
            if x.predicate != y.predicate or len(x.args) != len(y.args):
                return None
            stack.extend(zip(reversed(x.args), reversed(y.args)))
        else:
            return None
    return s if out is None else out


def unify(a, b) -> Optional[dict]:
    """Most general unifier of two terms (or atoms), occurs check enabled.

    The result is idempotent: no bound variable occurs in any binding.
    """
    s = unify_in(a, b, {})
    if s is None:
        return None
    return {v: apply(s, v) for v in s}


def compose(s1: dict, s2: dict) -> dict:
    """Substitution equivalent to applying ``s1`` then ``s2``."""
    out = {v: apply(s2, t) for v, t in s1.items()}
    for v, t in s2.items():
        out.setdefault(v, t)
    return {v: t for v, t in out.items() if t != v}


def match(pattern, target, s: Optional[dict] = None) -> Optional[dict]:
    """One-way matching: bind variables of ``pattern`` only."""
    s = {} if s is None else dict(s)
    stack = [(pattern, target)]
    while stack:
        p, t = stack.pop()
        if isinstance(p, Var):
            bound = s.get(p)
            if bound is None:
                s[p] = t
            elif bound != t:
                return None
        elif isinstance(p, (Compound, Atom)):
            if type(p) is not type(t):
                return None
            name_p = p.functor if isinstance(p, Compound) else p.predicate
            name_t = t.functor if isinstance(t, Compound) else t.predicate
            if name_p != name_t or len(p.args) != len(t.args):
                return None
            stack.extend(zip(p.args, t.args))
        elif p != t:
            return None
    return s


def variant(a: Clause, b: Clause) -> bool:
    """True iff the clauses are equal up to consistent variable renaming."""
    if len(a.body) != len(b.body):
        return False
    ab = match(Atom("$c", (_as_term(a.head), *map(_as_term, a.body))),
               Atom("$c", (_as_term(b.head), *map(_as_term, b.body))))
    if ab is None:
        return False
    images = list(ab.values())
    return all(isinstance(t, Var) for t in images) and len(set(images)) == len(images)


def _as_term(atom: Atom):
    return Compound(atom.predicate, atom.args) if atom.args else Const(atom.predicate)


# --------------------------------------------------------------------------
# programs

class Program:
    """Ordered clauses with a first-argument index.

    A program may extend a ``parent``; the parent's clauses come first in
    program order.  Both are immutable after construction.
    """

    def __init__(self, clauses: Iterable[Clause] = (), parent: Optional["Program"] = None):
        self.parent = parent
        self.own = tuple(clauses)
        self._by_pred: dict[tuple, list[Clause]] = {}
        self._nonconst: dict[tuple, list[Clause]] = {}
        self._by_first: dict[tuple, list[Clause]] = {}
        self.fact_index: dict[tuple, list[Clause]] = {}
        for c in self.own:
            self._by_pred.setdefault(c.head.key, []).append(c)
        for key, cls in self._by_pred.items():
            consts = []
            for c in cls:
                first = c.head.args[0] if c.head.args else None
                if isinstance(first, Const):
                    if first not in consts:
                        consts.append(first)
                    if c.is_ground():
                        self.fact_index.setdefault((*key, first), []).append(c)
            self._nonconst[key] = [c for c in cls if c.head.args and not isinstance(c.head.args[0], Const)]
            for k in consts:
                self._by_first[(*key, k)] = [
                    c for c in cls if not isinstance(c.head.args[0], Const) or c.head.args[0] == k]

    @property
    def clauses(self) -> tuple[Clause, ...]:
        if self.parent is None:
            return self.own
        return self.parent.clauses + self.own

    def extend(self, clauses: Iterable[Clause]) -> "Program":
        clauses = tuple(clauses)
        if not clauses:
            return self
        return Program(clauses, parent=self)

    def facts(self) -> list[Clause]:
        return [c for c in self.clauses if c.is_fact() and c.is_ground()]

    def predicates(self) -> list[tuple[str, int]]:
        """predicate/arity pairs in order of first declaration."""
        seen: dict[tuple, None] = {}
        for c in self.clauses:
            seen.setdefault(c.head.key, None)
        return list(seen)

    def _own_candidates(self, key, first) -> list[Clause]:
        if isinstance(first, Const):
            hit = self._by_first.get((*key, first))
            if hit is not None:
                return hit
            return self._nonconst.get(key, ())
        return self._by_pred.get(key, ())

    def candidates(self, goal: Atom, s: Optional[dict] = None) -> list[Clause]:
        """Clauses whose head may unify with ``goal``, in program order."""
        first = None
        if goal.args:
            first = walk(goal.args[0], s) if s else goal.args[0]
        own = self._own_candidates(goal.key, first)
        if self.parent is None:
            return own
        inherited = self.parent.candidates(goal, s)
        if not inherited:
            return own
        if not own:
            return inherited
        return list(inherited) + list(own)

    def __len__(self):
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)

    def __repr__(self):
        return f"Program({len(self)} clauses)"


# --------------------------------------------------------------------------
# proof

def _max_tag(atoms) -> int:
    return max((v.tag for a in atoms for v in term_vars(a)), default=0)


def _canon(t, names: dict):
    if isinstance(t, Var):
        idx = names.get(t)
        if idx is None:
            idx = names[t] = len(names)
        return idx
    if isinstance(t, Compound):
        return (t.functor, *[_canon(a, names) for a in t.args])
    if isinstance(t, Atom):
        return (t.predicate, *[_canon(a, names) for a in t.args])
    return t


def prove(program: Program, goals: Iterable[Atom], depth_bound: int = DEFAULT_DEPTH) -> Iterator[dict]:
    """Lazily enumerate answer substitutions for a conjunction of goals.

    SLD resolution with left-to-right goal selection and program-order clause
    selection.  A derivation may use at most ``depth_bound`` resolution steps
    (facts included); branches over budget simply fail.  Answers are
    substitutions restricted to the query's variables.

    Resolvents that were exhaustively refuted are remembered (keyed by their
    variant class and remaining budget) so repeated failing sub-searches are
    pruned; this never changes the sequence of answers.
    """
    goals = tuple(goals)
    if depth_bound < 1:
        raise DepthBoundError(f"depth_bound must be >= 1, got {depth_bound}")
    qvars = tuple(v for a in goals for v in term_vars(a))
    qvars = tuple(dict.fromkeys(qvars))
    counter = [_max_tag(goals)]
    refuted: dict = {}

    def solve(pending: tuple, s: dict, budget: int):
        if not pending:
            yield s
            return
        if len(pending) > budget:
            return
        names: dict = {}
        key = (tuple(_canon(apply(s, v), names) for v in qvars),
               tuple(_canon(apply(s, g), names) for g in pending))
        if refuted.get(key, 0) >= budget:
            return
        found = False
        goal = pending[0]
        rest = pending[1:]
        goal_now = apply(s, goal)
        for clause in program.candidates(goal_now):
            if clause.variables:
                counter[0] += 1
                clause = clause.rename(counter[0])
            s1 = unify_in(goal_now, clause.head, s)
            if s1 is None:
                continue
            for ans in solve(clause.body + rest, s1, budget - 1):
                found = True
                yield ans
        if not found:
            refuted[key] = max(refuted.get(key, 0), budget)

    for s in solve(goals, {}, depth_bound):
        yield {v: apply(s, v) for v in qvars}


def entails(program: Program, goal: Atom, depth_bound: int = DEFAULT_DEPTH) -> bool:
    return next(prove(program, [goal], depth_bound), None) is not None


def covers(bk: Program, hypothesis: Iterable[Clause], example: Atom, depth_bound: int = DEFAULT_DEPTH) -> bool:
    """True iff ``bk`` plus ``hypothesis`` proves the ground ``example``."""
    if not example.is_ground():
        raise ValueError(f"example {example!r} is not ground")
    return entails(bk.extend(hypothesis), example, depth_bound)


def coverage(bk: Program, hypothesis: Iterable[Clause], examples: Iterable[Atom],
             depth_bound: int = DEFAULT_DEPTH) -> list[bool]:
    program = bk.extend(hypothesis)
    return [entails(program, e, depth_bound) for e in examples]
