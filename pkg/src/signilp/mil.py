"""Meta-interpretive learning.

The learner proves the positive examples with a meta-interpreter that may
abduce *metasubs*: instantiations of second-order clause templates
(metarules).  The abduced metasubs, projected into clauses, form the
hypothesis.  Iterative deepening on the number of clauses gives the smallest
hypothesis first; every candidate is rejected as soon as it covers a negative.

Termination: predicate symbols are totally ordered (background predicates
lowest, then invented symbols, the target highest) and every abduced clause
must call only symbols strictly below its head, except that a recursive
metarule may call its own head symbol.  The meta-level proof is additionally
bounded by ``MILConfig.depth_bound`` resolution steps.

Currying: a target of arity ``k`` may be learned with metarules whose head
has arity ``k + 1`` when ``MILConfig.curry`` maps the target to a constant.
The extra head argument is fixed to that constant and is dropped from the
projected clause, so ``P(x,y) :- Q(x,z), R(z,y)`` with ``y = stop`` yields
``stop_sign(A) :- has_word(A,B), closely_match(B,stop)``.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional

from .logic import (Atom, Clause, Const, ExampleSet, Hypothesis, Program, Var, apply, coverage,
                    prove, term_vars, unify_in)


class UnboundSecondOrderVariable(ValueError):
    pass


class LearningTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class MetaAtom:
    predicate: str
    args: tuple[str, ...]

    @property
    def is_variable(self) -> bool:
        return self.predicate[0].isupper()


@dataclass(frozen=True)
class Metarule:
    name: str
    head: MetaAtom
    body: tuple[MetaAtom, ...]
    order: tuple[tuple[str, str], ...] = ()

    @property
    def second_order_vars(self) -> tuple[str, ...]:
        out = []
        for a in (self.head, *self.body):
            if a.is_variable and a.predicate not in out:
                out.append(a.predicate)
        return tuple(out)

    @property
    def first_order_vars(self) -> tuple[str, ...]:
        out = []
        for a in (self.head, *self.body):
            for v in a.args:
                if v not in out:
                    out.append(v)
        return tuple(out)

    @property
    def recursive(self) -> bool:
        return any(b.predicate == self.head.predicate for b in self.body)

    def constraints(self) -> tuple[tuple[str, str], ...]:
        """(higher, lower) pairs; derived from the head when not given."""
        if self.order:
            return self.order
        hv = self.head.predicate
        return tuple((hv, v) for v in self.second_order_vars if v != hv)

    def curriable(self) -> bool:
        """Whether the last head argument can be fixed to a constant."""
        if not self.head.args:
            return False
        last = self.head.args[-1]
        return all(a.args and a.args[-1] == last
                   for a in (self.head, *self.body) if a.predicate == self.head.predicate)


@dataclass(frozen=True, order=True)
class MetaSub:
    metarule: str
    bindings: tuple[tuple[str, str], ...]
    curry: Optional[Const] = field(default=None, compare=False)
    curry_key: tuple = ()

    @classmethod
    def of(cls, metarule: str, bindings: Mapping[str, str], curry: Optional[Const] = None) -> "MetaSub":
        return cls(metarule, tuple(sorted(bindings.items())), curry,
                   () if curry is None else (type(curry.value).__name__, str(curry.value)))

    def symbol(self, var: str) -> Optional[str]:
        for k, v in self.bindings:
            if k == var:
                return v
        return None

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.bindings)
        if self.curry is not None:
            inner += f"; curry={self.curry!r}"
        return f"{self.metarule}[{inner}]"


@dataclass
class MILConfig:
    max_clauses: int = 2
    depth_bound: int = 100
    enable_invention: bool = True
    invented_prefix: Optional[str] = None
    curry: dict = field(default_factory=dict)
    timeout: Optional[float] = None

    def __post_init__(self):
        if self.max_clauses < 1:
            raise ValueError("max_clauses must be >= 1")


_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def project_one(ms: MetaSub, rule: Metarule) -> Clause:
    bound = dict(ms.bindings)
    for v in rule.second_order_vars:
        if v not in bound:
            raise UnboundSecondOrderVariable(f"{rule.name}: {v} unbound in {ms!r}")
    fo = {name: Var(_LETTERS[i]) for i, name in enumerate(rule.first_order_vars)}
    curried = None
    if ms.curry is not None:
        curried = rule.head.args[-1]
        fo[curried] = ms.curry
    hv = rule.head.predicate

    def lit(a: MetaAtom) -> Atom:
        args = [fo[x] for x in a.args]
        if curried is not None and a.predicate == hv:
            args = args[:-1]
        return Atom(bound.get(a.predicate, a.predicate), args)

    clause = Clause(lit(rule.head), [lit(b) for b in rule.body])
    # rename remaining variables A, B, C... in order of appearance
    names = {v: Var(_LETTERS[i]) for i, v in enumerate(clause.variables)}
    from .logic import substitute
    return Clause(substitute(clause.head, names), [substitute(b, names) for b in clause.body])


def project(metasubs: Iterable[MetaSub], metarules: Iterable[Metarule]) -> list[Clause]:
    """Clauses for a set of metasubs, ordered by metarule name then bindings."""
    by_name = {m.name: m for m in metarules}
    out = []
    for ms in sorted(set(metasubs), key=lambda m: (m.metarule, m.bindings, m.curry_key)):
        if ms.metarule not in by_name:
            raise KeyError(f"unknown metarule {ms.metarule!r}")
        out.append(project_one(ms, by_name[ms.metarule]))
    return out


class MetaInterpreter:
    """Abductive proof over background knowledge and a growing metasub store."""

    TARGET_RANK = 10_000

    def __init__(self, bk: Program, metarules: Iterable[Metarule], config: MILConfig,
                 targets: Iterable[tuple[str, int]]):
        self.bk = bk
        self.metarules = list(metarules)
        self.by_name = {m.name: m for m in self.metarules}
        self.config = config
        self.targets = list(dict.fromkeys(targets))
        target_names = {p for p, _ in self.targets}
        self.bk_preds = [k for k in bk.predicates() if k[0] not in target_names]
        self.bk_names = {p for p, _ in self.bk_preds}
        prefix = config.invented_prefix or (self.targets[0][0] if self.targets else "inv")
        self.invented = [f"{prefix}_{k}" for k in range(1, config.max_clauses + 1)]
        self.rank = {p: self.TARGET_RANK for p in target_names}
        for k, name in enumerate(self.invented, start=1):
            self.rank.setdefault(name, self.TARGET_RANK - k)
        self._projected: dict[MetaSub, Clause] = {}
        self._tags = itertools.count(1_000_000)
        self.deadline = None if config.timeout is None else time.monotonic() + config.timeout

    def _check_time(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise LearningTimeout("learning run exceeded its time budget")

    def rank_of(self, symbol: str) -> int:
        return self.rank.get(symbol, 0)

    def abducible(self, symbol: str) -> bool:
        return symbol in self.rank

    def clause_of(self, ms: MetaSub) -> Clause:
        c = self._projected.get(ms)
        if c is None:
            c = self._projected[ms] = project_one(ms, self.by_name[ms.metarule])
        return c

    # ----------------------------------------------------------------------

    def prove_goals(self, goals: tuple, s: dict, store: tuple, limit: int, depth: int):
        if not goals:
            yield s, store
            return
        for s1, st1 in self.prove_one(goals[0], s, store, limit, depth):
            yield from self.prove_goals(goals[1:], s1, st1, limit, depth)

    def prove_one(self, goal: Atom, s: dict, store: tuple, limit: int, depth: int):
        goal = apply(s, goal)
        if not self.abducible(goal.predicate):
            if goal.predicate not in self.bk_names:
                return
            gvars = term_vars(goal)
            for ans in prove(self.bk, [goal], self.config.depth_bound):
                s1 = dict(s)
                for v in gvars:
                    s1[v] = ans[v]
                yield s1, store
            return
        if depth <= 0:
            return
        self._check_time()
        # clauses already in the store cost nothing
        for ms in store:
            clause = self.clause_of(ms)
            if clause.head.key != goal.key:
                continue
            clause = clause.rename(next(self._tags))
            s1 = unify_in(goal, clause.head, s)
            if s1 is not None:
                yield from self.prove_goals(clause.body, s1, store, limit, depth - 1)
        if len(store) < limit:
            yield from self.abduce(goal, s, store, limit, depth - 1)

    def abduce(self, goal: Atom, s: dict, store: tuple, limit: int, depth: int):
        curry = self.config.curry.get(goal.predicate)
        for rule in self.metarules:
            head_arity = len(rule.head.args)
            args = list(goal.args)
            curried = None
            if head_arity == len(args) + 1 and curry is not None and rule.curriable():
                curried = curry if isinstance(curry, Const) else Const(curry)
                args.append(curried)
            elif head_arity != len(args):
                continue
            if rule.head.is_variable:
                so = {rule.head.predicate: goal.predicate}
            elif rule.head.predicate == goal.predicate:
                so = {}
            else:
                continue
            tag = next(self._tags)
            fo = {name: Var(name.upper(), tag) for name in rule.first_order_vars}
            s1 = s
            for x, t in zip(rule.head.args, args):
                s1 = unify_in(fo[x], t, s1)
                if s1 is None:
                    break
            if s1 is None:
                continue
            state = _Abduction(rule, so, fo, curried)
            yield from self._abduce_body(state, 0, s1, store, limit, depth, added=False)

    def _abduce_body(self, st: "_Abduction", i: int, s: dict, store: tuple, limit: int, depth: int,
                     added: bool):
        rule = st.rule
        if not added and st.complete():
            ms = st.metasub()
            if ms in store:
                return  # explored already through the store
            if len(store) >= limit:
                return  # nested abductions used up the budget
            store = store + (ms,)
            added = True
        if i == len(rule.body):
            yield s, store
            return
        lit = rule.body[i]
        if lit.is_variable and lit.predicate not in st.so:
            for sym in self.candidates(len(lit.args), st, store):
                st.so[lit.predicate] = sym
                if st.consistent(self):
                    yield from self._abduce_body(st, i, s, store, limit, depth, added)
                del st.so[lit.predicate]
            return
        atom = st.literal(lit)
        for s1, st1 in self.prove_one(atom, s, store, limit, depth):
            yield from self._abduce_body(st, i + 1, s1, st1, limit, depth, added)

    def candidates(self, arity: int, st: "_Abduction", store: tuple) -> list[str]:
        out = [p for p, a in self.bk_preds if a == arity]
        out += [p for p, a in self.targets if a == arity]
        if self.config.enable_invention:
            arities = {}
            for ms in store:
                c = self.clause_of(ms)
                for a in (c.head, *c.body):
                    arities.setdefault(a.predicate, a.arity)
            for var, sym in st.so.items():
                for a in (st.rule.head, *st.rule.body):
                    if a.predicate == var:
                        arities.setdefault(sym, len(a.args))
            for name in self.invented:
                if name not in arities:
                    out.append(name)
                    break
                if arities[name] == arity:
                    out.append(name)
        return out


class _Abduction:
    """Mutable state for one metarule instantiation in progress."""

    def __init__(self, rule: Metarule, so: dict, fo: dict, curried: Optional[Const]):
        self.rule = rule
        self.so = dict(so)
        self.fo = fo
        self.curried = curried

    def complete(self) -> bool:
        return all(v in self.so for v in self.rule.second_order_vars)

    def metasub(self) -> MetaSub:
        return MetaSub.of(self.rule.name, self.so, self.curried)

    def consistent(self, mi: MetaInterpreter) -> bool:
        for hi, lo in self.rule.constraints():
            if hi in self.so and lo in self.so:
                a, b = self.so[hi], self.so[lo]
                if self.rule.recursive and hi == self.rule.head.predicate and lo == hi:
                    continue
                if not mi.rank_of(a) > mi.rank_of(b):
                    return False
        return True

    def literal(self, a: MetaAtom) -> Atom:
        args = [self.fo[x] for x in a.args]
        if self.curried is not None and a.predicate == self.rule.head.predicate:
            args = args[:-1]
        return Atom(self.so.get(a.predicate, a.predicate), args)


def meta_prove(goal: Atom, bk: Program, metarules: Iterable[Metarule], store: Iterable[MetaSub] = (),
               remaining: int = 0, config: Optional[MILConfig] = None) -> Iterator[tuple[dict, frozenset]]:
    """Prove ``goal`` abducing at most ``remaining`` metasubs in total.

    Yields ``(substitution, store)`` pairs.
    """
    if remaining < 0:
        raise ValueError("remaining must be >= 0")
    config = config or MILConfig(max_clauses=max(1, remaining))
    targets = [] if goal.key in bk.predicates() else [goal.key]
    mi = MetaInterpreter(bk, metarules, config, targets)
    gvars = term_vars(goal)
    for s, st in mi.prove_goals((goal,), {}, tuple(store), remaining, config.depth_bound):
        yield {v: apply(s, v) for v in gvars}, frozenset(st)


def mil_learn(bk: Program, examples: ExampleSet, metarules: Iterable[Metarule],
              config: Optional[MILConfig] = None) -> Optional[Hypothesis]:
    """Smallest hypothesis (in clauses) proving every positive and no negative.

    Returns None when no such hypothesis exists within ``max_clauses``.
    """
    config = config or MILConfig()
    metarules = list(metarules)
    if not examples.is_consistent():
        return None
    if not examples.positives:
        return Hypothesis([])
    targets = [e.key for e in examples.positives]
    mi = MetaInterpreter(bk, metarules, config, targets)
    positives = tuple(examples.positives)

    def search(i: int, store: tuple, limit: int):
        if i == len(positives):
            yield store
            return
        for _, st in mi.prove_one(positives[i], {}, store, limit, config.depth_bound):
            if st != store and any(coverage(bk, [mi.clause_of(m) for m in st], examples.negatives,
                                            config.depth_bound)):
                continue
            yield from search(i + 1, st, limit)

    for size in range(1, config.max_clauses + 1):
        for store in search(0, (), size):
            return Hypothesis(project(store, metarules))
    return None
