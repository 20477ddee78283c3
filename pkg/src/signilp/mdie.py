"""Mode-directed inverse entailment.

A seed positive is saturated into a bottom clause under the mode
declarations; clauses built from chain-valid subsequences of the bottom body
are searched best-first with the compression score ``P - N - L``; the cover
loop repeats this until every positive is covered or no consistent clause
remains for any uncovered seed.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .logic import (Atom, Clause, ExampleSet, Hypothesis, Program, Var, coverage, prove)


class NoHeadMode(ValueError):
    pass


class SeedNotGround(ValueError):
    pass


class NoConsistentClause(RuntimeError):
    pass


@dataclass(frozen=True)
class Placemarker:
    polarity: str  # "+", "-" or "#"
    type_name: str

    def __post_init__(self):
        if self.polarity not in ("+", "-", "#"):
            raise ValueError(f"unknown placemarker polarity {self.polarity!r}")


@dataclass(frozen=True)
class ModeDecl:
    kind: str  # "head" or "body"
    recall: Optional[int]  # None is unbounded (*)
    predicate: str
    args: tuple[Placemarker, ...]

    def __post_init__(self):
        if self.kind not in ("head", "body"):
            raise ValueError(f"mode kind must be head or body, got {self.kind!r}")
        if self.recall is not None and self.recall < 1:
            raise ValueError("recall must be >= 1 or unbounded")

    @property
    def key(self) -> tuple[str, int]:
        return (self.predicate, len(self.args))


@dataclass
class SearchConfig:
    max_body_literals: int = 4
    noise: int = 0
    max_nodes: int = 5000
    variable_depth: int = 2
    depth_bound: int = 100
    max_bottom_literals: int = 64
    timeout: Optional[float] = None

    def __post_init__(self):
        for name in ("max_body_literals", "noise", "max_nodes", "variable_depth"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class BottomClause:
    head: Atom
    body: list[Atom]
    var_types: dict[Var, str]
    depth_of: dict[Var, int]
    grounding: dict[Var, object] = field(default_factory=dict)
    inputs: list[frozenset] = field(default_factory=list)
    outputs: list[frozenset] = field(default_factory=list)
    head_vars: frozenset = frozenset()

    def clause(self, indices=None) -> Clause:
        if indices is None:
            return Clause(self.head, self.body)
        return Clause(self.head, [self.body[i] for i in indices])

    def chain_valid(self, indices) -> bool:
        avail = set(self.head_vars)
        for i in indices:
            if not self.inputs[i] <= avail:
                return False
            avail |= self.outputs[i]
        return True


def _head_mode(seed: Atom, modes) -> ModeDecl:
    heads = [m for m in modes if m.kind == "head" and m.key == seed.key]
    if not heads:
        raise NoHeadMode(f"no modeh for {seed.predicate}/{seed.arity}")
    return heads[0]


def saturate(seed: Atom, bk: Program, modes, config: Optional[SearchConfig] = None) -> BottomClause:
    """Most specific clause for ``seed`` under ``modes``.

    Body literals appear in mode order within each variable-depth layer and,
    for one mode, in the order the background knowledge yields answers.
    """
    config = config or SearchConfig()
    if not seed.is_ground():
        raise SeedNotGround(f"seed {seed!r} is not ground")
    hmode = _head_mode(seed, modes)

    term_var: dict = {}
    types: dict = {}  # term -> set of type names
    var_types: dict = {}
    depth_of: dict = {}
    order: list = []  # terms in order of introduction

    def var_for(term, type_name, depth):
        v = term_var.get(term)
        if v is None:
            v = term_var[term] = Var(_var_name(len(term_var)))
            var_types[v] = type_name
            depth_of[v] = depth
            types[term] = set()
            order.append(term)
        types[term].add(type_name)
        return v

    head_args = []
    for term, pm in zip(seed.args, hmode.args):
        head_args.append(term if pm.polarity == "#" else var_for(term, pm.type_name, 0))
    head = Atom(seed.predicate, head_args)
    head_vars = frozenset(a for a, pm in zip(head_args, hmode.args) if pm.polarity == "+")

    body: list[Atom] = []
    inputs: list[frozenset] = []
    outputs: list[frozenset] = []
    seen = set()
    body_modes = [m for m in modes if m.kind == "body"]
    done = set()  # (mode index, input terms) already queried

    for layer in range(config.variable_depth):
        for mi, mode in enumerate(body_modes):
            in_pos = [i for i, pm in enumerate(mode.args) if pm.polarity == "+"]
            pools = []
            for i in in_pos:
                tname = mode.args[i].type_name
                pools.append([t for t in list(order)
                              if tname in types[t] and depth_of[term_var[t]] <= layer])
            if in_pos and not all(pools):
                continue
            for combo in itertools.product(*pools):
                if (mi, combo) in done:
                    continue
                done.add((mi, combo))
                if in_pos and max(depth_of[term_var[t]] for t in combo) != layer:
                    continue
                if not in_pos and layer > 0:
                    continue
                qargs = [Var(f"_Q{i}") for i in range(len(mode.args))]
                for i, t in zip(in_pos, combo):
                    qargs[i] = t
                goal = Atom(mode.predicate, qargs)
                answers = []
                for ans in prove(bk, [goal], config.depth_bound):
                    ground = tuple(ans.get(a, a) if isinstance(a, Var) else a for a in qargs)
                    if ground not in answers:
                        answers.append(ground)
                        if mode.recall is not None and len(answers) >= mode.recall:
                            break
                for ground in answers:
                    lit_args, ins, outs = [], set(), set()
                    for pm, t in zip(mode.args, ground):
                        if pm.polarity == "#":
                            lit_args.append(t)
                        elif pm.polarity == "+":
                            v = term_var[t]
                            lit_args.append(v)
                            ins.add(v)
                        else:
                            v = var_for(t, pm.type_name, layer + 1)
                            lit_args.append(v)
                            outs.add(v)
                    lit = Atom(mode.predicate, lit_args)
                    if lit in seen or len(body) >= config.max_bottom_literals:
                        continue
                    seen.add(lit)
                    body.append(lit)
                    inputs.append(frozenset(ins))
                    outputs.append(frozenset(outs - ins))

    grounding = {v: t for t, v in term_var.items()}
    return BottomClause(head, body, var_types, depth_of, grounding, inputs, outputs, head_vars)


def _var_name(i: int) -> str:
    s = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        s = chr(65 + r) + s
    return s


@dataclass
class ScoredClause:
    clause: Clause
    indices: tuple[int, ...]
    pos: int
    neg: int
    score: int

    @property
    def length(self) -> int:
        return len(self.indices)


def score_of(pos: int, neg: int, length: int) -> int:
    return pos - neg - length


def search_clause(bottom: BottomClause, bk: Program, examples: ExampleSet,
                  config: Optional[SearchConfig] = None, trace: Optional[Callable[[dict], None]] = None,
                  deadline: Optional[float] = None) -> ScoredClause:
    """Best-first search for the highest-scoring acceptable generalization.

    Candidates are chain-valid subsequences of the bottom body.  Acceptable
    clauses cover at least one positive and at most ``noise`` negatives.
    Ties go to fewer literals, then to the earlier generated clause.
    """
    config = config or SearchConfig()
    gen = itertools.count()
    best: Optional[ScoredClause] = None
    best_key = None
    nodes = 0

    def evaluate(indices):
        clause = bottom.clause(indices)
        program = bk.extend([clause])
        pos = sum(1 for e in examples.positives if _entails(program, e, config))
        neg = sum(1 for e in examples.negatives if _entails(program, e, config))
        sc = ScoredClause(clause, indices, pos, neg, score_of(pos, neg, len(indices)))
        if trace is not None:
            from .lptext import format_clause
            trace({"clause": format_clause(clause), "pos": pos, "neg": neg, "score": sc.score})
        return sc

    def promising(sc: ScoredClause) -> bool:
        if sc.pos == 0 or sc.neg == 0 or sc.length >= config.max_body_literals:
            return False
        if best is None:
            return True
        nxt = sc.length + 1
        if sc.pos - nxt > best.score:
            return True
        target_len = sc.pos - best.score
        return nxt <= target_len < best.length

    def consider(sc: ScoredClause, g: int):
        nonlocal best, best_key
        if sc.pos >= 1 and sc.neg <= config.noise:
            key = (-sc.score, sc.length, g)
            if best_key is None or key < best_key:
                best, best_key = sc, key

    root = evaluate(())
    nodes += 1
    g = next(gen)
    consider(root, g)
    frontier = [(-root.score, 0, g, root)]
    while frontier and nodes < config.max_nodes:
        if deadline is not None and time.monotonic() > deadline:
            from .mil import LearningTimeout
            raise LearningTimeout("clause search exceeded its time budget")
        _, _, _, node = heapq.heappop(frontier)
        if not promising(node):
            continue
        last = node.indices[-1] if node.indices else -1
        for j in range(last + 1, len(bottom.body)):
            child_idx = node.indices + (j,)
            if not bottom.chain_valid(child_idx):
                continue
            child = evaluate(child_idx)
            nodes += 1
            g = next(gen)
            consider(child, g)
            if promising(child):
                heapq.heappush(frontier, (-child.score, child.length, g, child))
            if nodes >= config.max_nodes:
                break
    if best is None:
        raise NoConsistentClause("every candidate clause covers too many negatives or no positive")
    return best


def _entails(program: Program, example: Atom, config: SearchConfig) -> bool:
    return next(prove(program, [example], config.depth_bound), None) is not None


def cover_loop(bk: Program, examples: ExampleSet, modes, config: Optional[SearchConfig] = None,
               trace: Optional[Callable[[dict], None]] = None) -> Hypothesis:
    """Greedy covering: one clause per uncovered seed until positives run out."""
    config = config or SearchConfig()
    deadline = None if config.timeout is None else time.monotonic() + config.timeout
    remaining = list(examples.positives)
    clauses: list[Clause] = []
    uncovered: list[Atom] = []
    while remaining:
        seed = remaining[0]
        try:
            bottom = saturate(seed, bk, modes, config)
            found = search_clause(bottom, bk, ExampleSet(remaining, list(examples.negatives)),
                                  config, trace, deadline)
        except NoConsistentClause:
            uncovered.append(remaining.pop(0))
            continue
        covered = coverage(bk, [found.clause], remaining, config.depth_bound)
        if not covered[0]:
            uncovered.append(remaining.pop(0))
            continue
        clauses.append(found.clause)
        remaining = [e for e, c in zip(remaining, covered) if not c]
    return Hypothesis(clauses, uncovered)
