"""Glue between extracted sign facts and the two learners.

Examples use the class form ``traffic_sign(Sign, stop_sign)``.  The
metarule learner works on the monadic form ``stop_sign(Sign)``: its dyadic
metarules are applied with the head's second argument fixed to the class
keyword (``stop``), and learned clauses are rewritten back into the class
form afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

from .logic import Atom, Clause, Const, ExampleSet, Hypothesis, Program, covers
from .lptext import parse_metarules, parse_modes
from .mdie import SearchConfig, cover_loop
from .mil import MILConfig, mil_learn

TARGET = "traffic_sign"
CLASS = "stop_sign"


def _data_text(name: str) -> str:
    return resources.files("signilp").joinpath(f"data/{name}").read_text()


def default_modes():
    return parse_modes(_data_text("signs.modes"))


def default_metarules():
    return parse_metarules(_data_text("signs.mrules"))


def keyword_for(class_name: str) -> str:
    """``stop_sign`` -> ``stop``: the legend word a class is recognised by."""
    return class_name[:-5] if class_name.endswith("_sign") else class_name


def build_bk(factsets: Iterable, lexicon: Iterable[str] = ()) -> Program:
    """All sign facts plus ``sign/1`` type facts and ``known_word/1`` facts."""
    clauses = []
    ids = []
    for fs in factsets:
        ids.append(fs.sign_id)
        clauses.extend(Clause(a) for a in fs.facts)
    clauses.extend(Clause(Atom("sign", [Const(i)])) for i in ids)
    clauses.extend(Clause(Atom("known_word", [Const(w)])) for w in lexicon)
    return Program(clauses)


def example(sign_id: str, class_name: str = CLASS) -> Atom:
    return Atom(TARGET, [Const(sign_id), Const(class_name)])


def examples_for(pos_ids, neg_ids, class_name: str = CLASS) -> ExampleSet:
    return ExampleSet([example(i, class_name) for i in pos_ids], [example(i, class_name) for i in neg_ids])


def to_monadic(examples: ExampleSet) -> ExampleSet:
    """traffic_sign(s, c) -> c(s)."""
    def conv(a: Atom) -> Atom:
        if a.predicate != TARGET or a.arity != 2 or not isinstance(a.args[1], Const):
            raise ValueError(f"{a!r} is not a {TARGET}/2 example")
        return Atom(str(a.args[1].value), [a.args[0]])
    return ExampleSet([conv(a) for a in examples.positives], [conv(a) for a in examples.negatives])


def to_class_form(clauses: Iterable[Clause], class_name: str = CLASS) -> list[Clause]:
    """Rewrite ``c(X) :- body`` as ``traffic_sign(X, c) :- body``."""
    out = []
    for c in clauses:
        if c.head.predicate == class_name and c.head.arity == 1:
            c = Clause(Atom(TARGET, [c.head.args[0], Const(class_name)]), c.body)
        out.append(c)
    return out


@dataclass
class LearnerSettings:
    depth_bound: int = 100
    timeout: Optional[float] = 10.0
    max_clauses: int = 2
    max_body_literals: int = 4
    max_nodes: int = 5000
    noise: int = 0
    metarules: list = field(default_factory=default_metarules)
    modes: list = field(default_factory=default_modes)


def learn(engine: str, bk: Program, examples: ExampleSet,
          settings: Optional[LearnerSettings] = None, trace=None) -> Hypothesis:
    """Learn class-form clauses for ``examples`` with ``mil`` or ``mdie``.

    Raises LearningTimeout when the run exceeds ``settings.timeout``; returns
    an empty hypothesis when the learner finds nothing.
    """
    settings = settings or LearnerSettings()
    if engine == "mil":
        mono = to_monadic(examples)
        classes = {a.predicate for a in mono.positives + mono.negatives}
        config = MILConfig(max_clauses=settings.max_clauses, depth_bound=settings.depth_bound,
                           enable_invention=False,
                           curry={c: Const(keyword_for(c)) for c in classes},
                           timeout=settings.timeout)
        hyp = mil_learn(bk, mono, settings.metarules, config)
        if hyp is None:
            return Hypothesis([])
        cls = next(iter(classes)) if len(classes) == 1 else CLASS
        return Hypothesis(to_class_form(hyp.clauses, cls))
    if engine == "mdie":
        config = SearchConfig(max_body_literals=settings.max_body_literals, noise=settings.noise,
                              max_nodes=settings.max_nodes, depth_bound=settings.depth_bound,
                              timeout=settings.timeout)
        return cover_loop(bk, examples, settings.modes, config, trace)
    raise ValueError(f"unknown engine {engine!r}")


def classify(bk: Program, clauses, sign_id: str, class_name: str = CLASS, depth_bound: int = 100) -> bool:
    """True when the hypothesis proves ``traffic_sign(sign_id, class_name)``."""
    return covers(bk, list(clauses), example(sign_id, class_name), depth_bound)

