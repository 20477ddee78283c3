import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import (constants_of, term_vars, ground_pool, ground_unifiers, herbrand_base, least_fixpoint,
                     min_proof_steps, random_program, random_term)
from signilp.logic import (Atom, Clause, Compound, Const, DepthBoundError, ExampleSet, Program, Var, apply,
                           compose, covers, entails, prove, unify, variant)
from signilp.lptext import parse_program

X, Y, Z = Var("X"), Var("Y"), Var("Z")
a, b = Const("a"), Const("b")


def f(*args):
    return Compound("f", args)


class TestUnify:
    def test_variable_constant(self):
        assert unify(X, Const("red")) == {X: Const("red")}

    def test_identical_atoms_give_empty_substitution(self):
        t = Atom("color", [Const("p1"), Const("red")])
        assert unify(t, t) == {}

    def test_forced_clash(self):
        assert unify(f(X, X), f(a, b)) is None

    def test_occurs_check(self):
        assert unify(X, f(X)) is None
        assert unify(f(X, Y), f(Y, f(X))) is None

    def test_arity_is_part_of_identity(self):
        assert unify(f(X), f(X, Y)) is None

    def test_integer_and_symbol_constants_differ(self):
        assert unify(Const(30), Const("30")) is None

    def test_compound_needs_arguments(self):
        with pytest.raises(ValueError):
            Compound("f", [])

    def test_chained_bindings_are_resolved(self):
        s = unify(f(X, Y, Z), f(Y, Z, a))
        assert s == {X: a, Y: a, Z: a}


def terms(depth=2):
    return st.integers(0, 2**32).map(lambda s: random_term(random.Random(s), depth))


@settings(max_examples=300, deadline=None)
@given(terms(), terms())
def test_unifier_makes_sides_equal_and_is_idempotent(s, t):
    mgu = unify(s, t)
    if mgu is None:
        return
    assert apply(mgu, s) == apply(mgu, t)
    bound = set(mgu)
    for v, term in mgu.items():
        assert not bound & set(term_vars(term))
        assert term != v
        assert apply(mgu, term) == term


@settings(max_examples=300, deadline=None)
@given(terms(), terms())
def test_unifiability_is_symmetric(s, t):
    assert (unify(s, t) is None) == (unify(t, s) is None)


POOL = ground_pool(depth=1)


@settings(max_examples=150, deadline=None)
@given(terms(1), terms(1))
def test_every_ground_unifier_factors_through_the_mgu(s, t):
    mgu = unify(s, t)
    found = list(ground_unifiers(s, t, POOL))
    if mgu is None:
        assert found == []
        return
    for env in found:
        # env is an instance of mgu iff env o mgu = env on every variable
        for v in env:
            assert apply(env, apply(mgu, v)) == env[v]


@settings(max_examples=200, deadline=None)
@given(terms(), terms(), terms())
def test_application_is_idempotent(s, t, u):
    mgu = unify(s, t)
    if mgu is None:
        return
    assert apply(mgu, apply(mgu, u)) == apply(mgu, u)


def test_compose_applies_left_then_right():
    s1 = {X: f(Y)}
    s2 = {Y: a}
    assert apply(compose(s1, s2), X) == apply(s2, apply(s1, X))


def test_variant_ignores_renaming():
    c1 = Clause(Atom("p", [X]), [Atom("q", [X, Y])])
    c2 = Clause(Atom("p", [Z]), [Atom("q", [Z, X])])
    assert variant(c1, c2)
    assert not variant(c1, Clause(Atom("p", [X]), [Atom("q", [X, X])]))


class TestProve:
    def test_worked_example_has_one_answer(self, bk_p1, stop_rule):
        prog = bk_p1.extend(stop_rule)
        goal = Atom("traffic_sign", [Const("p1"), Const("stop_sign")])
        assert len(list(prove(prog, [goal], 10))) == 1

    def test_empty_program_proves_nothing(self):
        assert list(prove(Program(), [Atom("color", [Const("p1"), Const("red")])], 10)) == []

    def test_depth_bound_must_be_positive(self):
        with pytest.raises(DepthBoundError):
            list(prove(Program(), [Atom("p", [])], 0))

    def test_depth_limits_resolution_steps(self):
        prog = parse_program("p(a). q(X) :- p(X). r(X) :- q(X).")
        goal = Atom("r", [a])
        assert not entails(prog, goal, 2)
        assert entails(prog, goal, 3)

    def test_answers_follow_clause_order(self):
        prog = parse_program("c(p1,red). c(p1,white). c(p2,blue).")
        answers = [s[X] for s in prove(prog, [Atom("c", [Const("p1"), X])])]
        assert answers == [Const("red"), Const("white")]

    def test_left_recursion_terminates(self):
        prog = parse_program("path(X,Y) :- path(X,Z), edge(Z,Y). path(X,Y) :- edge(X,Y). edge(a,b). edge(b,c).")
        assert entails(prog, Atom("path", [a, Const("c")]), 12)
        assert not entails(prog, Atom("path", [Const("c"), a]), 12)

    def test_runs_are_deterministic(self):
        prog = parse_program("e(a,b). e(b,c). e(a,c). p(X,Y) :- e(X,Y). p(X,Y) :- e(X,Z), p(Z,Y).")
        q = [Atom("p", [X, Y])]
        first = list(prove(prog, q, 20))
        assert first == list(prove(prog, q, 20))

    def test_fact_index_holds_exactly_ground_facts(self):
        prog = parse_program("c(p1,red). c(p1,white). c(X,black) :- d(X). d(p2).")
        indexed = {c for cl in prog.fact_index.values() for c in cl}
        assert indexed == set(prog.facts())


class TestCovers:
    def test_rule_covers_p1(self, bk_p1, stop_rule):
        assert covers(bk_p1, stop_rule, Atom("traffic_sign", [Const("p1"), Const("stop_sign")]), 10)

    def test_rule_rejects_n1(self, bk_n1, stop_rule):
        assert not covers(bk_n1, stop_rule, Atom("traffic_sign", [Const("n1"), Const("stop_sign")]), 10)

    def test_empty_hypothesis(self, bk_p1):
        assert not covers(bk_p1, [], Atom("traffic_sign", [Const("p1"), Const("stop_sign")]), 10)

    def test_example_must_be_ground(self, bk_p1):
        with pytest.raises(ValueError):
            covers(bk_p1, [], Atom("color", [X, Const("red")]))


def test_example_sets_must_be_ground():
    with pytest.raises(ValueError):
        ExampleSet([Atom("p", [X])], [])


def _closure_check(seed):
    sig, consts, clauses = random_program(random.Random(seed))
    consts = list(dict.fromkeys(consts + constants_of(clauses)))
    model = least_fixpoint(clauses, consts)
    steps = min_proof_steps(clauses, consts)
    depth = max([1] + list(steps.values()))
    prog = Program(clauses)
    got = {g for g in herbrand_base(sig, consts) if entails(prog, g, depth)}
    return got, model


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_provable_ground_atoms_equal_least_fixpoint(seed):
    got, model = _closure_check(seed)
    assert got == model


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_extra_depth_never_proves_atoms_outside_the_model(seed):
    sig, consts, clauses = random_program(random.Random(seed))
    consts = list(dict.fromkeys(consts + constants_of(clauses)))
    model = least_fixpoint(clauses, consts)
    depth = max([1] + list(min_proof_steps(clauses, consts).values())) + 3
    prog = Program(clauses)
    assert {g for g in herbrand_base(sig, consts) if entails(prog, g, depth)} <= model
