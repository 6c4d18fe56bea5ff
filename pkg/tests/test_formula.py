from __future__ import annotations

import random

import pytest

from tabrep.formula import (
    Alpha, And, Atom, Beta, Constant, Delta, Equality, Exists, Forall,
    FreshNames, Gamma, Implies, LiteralOrEquality, Not, Or, ParseError,
    Parameter, SkolemApp, SubstitutionError, Variable, classify,
    free_variables, ground_clauses, parse_formula, skolemize, substitute,
    substitute_terms,
)


def _p(text: str):
    return parse_formula(text)


def test_case_rules_for_bare_names():
    f = _p("supply(X, d1)")
    assert f == Atom("supply", (Variable("X"), Constant("d1")))


def test_predicates_may_be_capitalized():
    f = _p("Supply(C, D1)")
    assert f == Atom("Supply", (Variable("C"), Variable("D1")))


def test_quoted_and_numeric_constants():
    f = _p("salary('J.Page', 5000)")
    assert f == Atom("salary", (Constant("J.Page"), Constant("5000")))


def test_precedence_implication_binds_loosest():
    f = _p("p(a) & q(a) -> s(a) | t(a)")
    assert isinstance(f, Implies)
    assert isinstance(f.left, And)
    assert isinstance(f.right, Or)


def test_implication_is_right_associative():
    f = _p("p(a) -> q(a) -> s(a)")
    assert isinstance(f, Implies)
    assert isinstance(f.right, Implies)


def test_quantifier_takes_maximal_scope():
    f = _p("forall X. p(X) -> q(X)")
    assert isinstance(f, Forall)
    assert isinstance(f.body, Implies)


def test_quantifier_variable_list():
    f = _p("forall X, Y. r(X, Y)")
    assert f == Forall("X", Forall("Y", Atom("r", (Variable("X"),
                                                   Variable("Y")))))


def test_negated_quantifier_scopes_over_it():
    f = _p("~exists X. p(X)")
    assert isinstance(f, Not)
    assert isinstance(f.body, Exists)


def test_equality_parses_between_terms():
    f = _p("X = c")
    assert f == Equality(Variable("X"), Constant("c"))


def test_parenthesized_subformula():
    f = _p("(p(a) -> q(a)) -> s(a)")
    assert isinstance(f.left, Implies)


@pytest.mark.parametrize("bad, fragment", [
    ("p(a", "expected ')'"),
    ("p(a) q(b)", "trailing"),
    ("p(a) & ", "term"),
    ("c", "bare term"),
    ("forall x. p(x)", "uppercase"),
    ("forall X. forall X. p(X)", "already bound"),
    ("p(a) = b", "trailing"),
    ("'unfinished", "unterminated"),
    ("p()", "term"),
    ("", "empty"),
])
def test_parse_errors(bad, fragment):
    with pytest.raises(ParseError) as err:
        _p(bad)
    assert fragment in str(err.value)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as err:
        parse_formula("p(a) &\n& q(b)", source="ic.txt")
    assert err.value.line == 2
    assert err.value.column == 1
    assert str(err.value).startswith("ic.txt:2:1")


def test_arity_mismatch_within_one_formula():
    with pytest.raises(ParseError) as err:
        _p("p(a) & p(a, b)")
    assert "declared with 1" in str(err.value)


def test_arity_checked_against_supplied_schema():
    arities = {"p": 2}
    with pytest.raises(ParseError):
        parse_formula("p(a)", arities=arities)
    parse_formula("q(a)", arities=arities)
    assert arities["q"] == 1


def test_unknown_predicate_rejected_when_not_extending():
    with pytest.raises(ParseError) as err:
        parse_formula("mystery(a)", arities={"p": 1}, extend=False)
    assert "unknown predicate" in str(err.value)


# -- classification ----------------------------------------------------------

A = Atom("p", (Constant("a"),))
B = Atom("q", (Constant("b"),))


@pytest.mark.parametrize("f, expect", [
    (And(A, B), Alpha((A, B))),
    (Not(Or(A, B)), Alpha((Not(A), Not(B)))),
    (Not(Implies(A, B)), Alpha((A, Not(B)))),
    (Not(Not(A)), Alpha((A, A))),
    (Or(A, B), Beta((A, B))),
    (Implies(A, B), Beta((Not(A), B))),
    (Not(And(A, B)), Beta((Not(A), Not(B)))),
])
def test_classify_propositional(f, expect):
    assert classify(f) == expect


def test_classify_quantifiers():
    body = Atom("p", (Variable("X"),))
    assert classify(Forall("X", body)) == Gamma("X", body)
    assert classify(Not(Exists("X", body))) == Gamma("X", Not(body))
    assert classify(Exists("X", body)) == Delta("X", body)
    assert classify(Not(Forall("X", body))) == Delta("X", Not(body))


def test_classify_literals():
    assert classify(A) == LiteralOrEquality(A)
    assert classify(Not(A)) == LiteralOrEquality(Not(A))
    eq = Equality(Constant("a"), Constant("b"))
    assert classify(eq) == LiteralOrEquality(eq)
    assert classify(Not(eq)) == LiteralOrEquality(Not(eq))


# -- skolemization -----------------------------------------------------------

def test_skolemize_bare_existential_to_parameter():
    f = _p("exists X. p(X)")
    out = skolemize(f, FreshNames())
    assert out == Atom("p", (Parameter("p1"),))


def test_skolemize_under_universal_to_function():
    f = _p("forall X. p(X) -> exists Y. q(X, Y)")
    out = skolemize(f, FreshNames())
    assert out == Forall("X", Implies(
        Atom("p", (Variable("X"),)),
        Atom("q", (Variable("X"), SkolemApp("f1", (Variable("X"),))))))


def test_skolemize_negated_universal_gets_witness():
    f = _p("~forall X. p(X)")
    out = skolemize(f, FreshNames())
    assert out == Not(Atom("p", (Parameter("p1"),)))


def test_skolemize_negative_existential_stays_universal():
    f = _p("~exists X. p(X)")
    out = skolemize(f, FreshNames())
    assert out == f


def test_skolemize_is_idempotent():
    f = _p("forall X. (p(X) -> exists Y. q(X, Y)) & exists Z. s(Z)")
    fresh = FreshNames()
    once = skolemize(f, fresh)
    again = skolemize(once, FreshNames())
    assert once == again


def test_skolemize_names_skip_used_identifiers():
    f = _p("exists X. p(X, p1)")
    out = skolemize(f, FreshNames(used={"p1", "p2"}))
    assert out == Atom("p", (Parameter("p3"), Constant("p1")))


def test_skolem_witness_inside_negated_existential():
    # The inner universal sits negatively under the outer negation, so it
    # needs a witness depending on the still-quantified X.
    f = _p("~exists X. p(X) & forall Y. q(X, Y)")
    out = skolemize(f, FreshNames())
    assert out == Not(Exists("X", And(
        Atom("p", (Variable("X"),)),
        Atom("q", (Variable("X"), SkolemApp("f1", (Variable("X"),)))))))


def test_skolemize_double_negated_universal_is_kept():
    # ~exists X. ~forall Y. q(X,Y) has only universal force.
    f = _p("~exists X. ~forall Y. q(X, Y)")
    assert skolemize(f, FreshNames()) == f


# -- substitution ------------------------------------------------------------

def test_substitute_variable_and_parameter():
    f = And(Atom("p", (Variable("X"),)), Atom("q", (Parameter("p1"),)))
    out = substitute(f, {"X": Constant("a"), "p1": Constant("b")})
    assert out == And(Atom("p", (Constant("a"),)),
                      Atom("q", (Constant("b"),)))


def test_substitute_respects_binding():
    f = Forall("X", Atom("p", (Variable("X"), Variable("Y"))))
    out = substitute(f, {"X": Constant("a"), "Y": Constant("b")})
    assert out == Forall("X", Atom("p", (Variable("X"), Constant("b"))))


def test_substitute_refuses_capture():
    f = Forall("X", Atom("p", (Variable("X"), Variable("Y"))))
    with pytest.raises(SubstitutionError):
        substitute(f, {"Y": Variable("X")})


def test_substitute_terms_rewrites_ground_skolem_application():
    app = SkolemApp("f1", (Constant("a"),))
    f = Atom("q", (Constant("a"), app))
    out = substitute_terms(f, {app: Constant("d")})
    assert out == Atom("q", (Constant("a"), Constant("d")))


def test_substitute_into_skolem_arguments():
    f = Atom("q", (Variable("X"), SkolemApp("f1", (Variable("X"),))))
    out = substitute(f, {"X": Constant("c")})
    assert out == Atom("q", (Constant("c"), SkolemApp("f1", (Constant("c"),))))


def test_free_variables_in_first_occurrence_order():
    f = _p("r(Y, X) & forall Z. s(Z, X)")
    assert free_variables(f) == ("Y", "X")


# -- printing ----------------------------------------------------------------

@pytest.mark.parametrize("text", [
    "p(a)",
    "~p(a)",
    "p(a) & q(b) -> s(c)",
    "(p(a) -> q(b)) -> s(c)",
    "p(a) | q(b) & s(c)",
    "(p(a) | q(b)) & s(c)",
    "forall X, Y. supply(X, Y) -> X = c",
    "~(forall X. p(X)) & q(b)",
    "exists X. p(X) & ~q(X)",
    "salary('J.Page', 5000)",
])
def test_round_trip_examples(text):
    f = _p(text)
    assert _p(str(f)) == f


def _random_formula(rng: random.Random, depth: int, bound: list[str]):
    choices = ["atom", "atom", "not", "and", "or", "implies"]
    if depth > 0 and len(bound) < 4:
        choices += ["forall", "exists"]
    kind = rng.choice(choices) if depth > 0 else "atom"
    if kind == "atom":
        if bound and rng.random() < 0.7:
            arg: object = Variable(rng.choice(bound))
        else:
            arg = Constant(rng.choice("abc"))
        second = Constant(rng.choice("abc"))
        if rng.random() < 0.15:
            return Equality(arg, second)  # type: ignore[arg-type]
        return Atom(rng.choice(["p", "q"]), (arg, second))  # type: ignore
    if kind == "not":
        return Not(_random_formula(rng, depth - 1, bound))
    if kind in ("and", "or", "implies"):
        ctor = {"and": And, "or": Or, "implies": Implies}[kind]
        return ctor(_random_formula(rng, depth - 1, bound),
                    _random_formula(rng, depth - 1, bound))
    var = f"V{len(bound) + 1}"
    ctor = Forall if kind == "forall" else Exists
    inner = _random_formula(rng, depth - 1, bound + [var])
    return ctor(var, inner)


def test_round_trip_random_formulas():
    rng = random.Random(2024)
    for _ in range(300):
        f = _random_formula(rng, 4, [])
        assert _p(str(f)) == f


# -- grounding ---------------------------------------------------------------

def test_ground_clauses_universal_implication():
    table: dict[tuple[str, tuple[str, ...]], int] = {}

    def index(pred, args):
        return table.setdefault((pred, args), len(table) + 1)

    f = _p("forall X. p(X) -> q(X)")
    clauses = ground_clauses(f, ["a", "b"], index)
    pa = table[("p", ("a",))]
    qa = table[("q", ("a",))]
    pb = table[("p", ("b",))]
    qb = table[("q", ("b",))]
    assert set(clauses) == {frozenset({-pa, qa}), frozenset({-pb, qb})}


def test_ground_clauses_equality_evaluates_away():
    def index(pred, args):
        raise AssertionError("no atoms expected")

    f = _p("forall X. X = X")
    assert ground_clauses(f, ["a"], index) == []


def test_ground_clauses_tautologous_instance_drops_out():
    # X = Y turns the implication into ~q(a,a) | q(a,a); that instance
    # must vanish instead of collapsing the theory to falsity
    table: dict[tuple[str, tuple[str, ...]], int] = {}

    def index(pred, args):
        return table.setdefault((pred, args), len(table) + 1)

    f = _p("forall X, Y. q(X, Y) -> q(Y, X)")
    clauses = ground_clauses(f, ["a", "b"], index)
    ab = table[("q", ("a", "b"))]
    ba = table[("q", ("b", "a"))]
    assert set(clauses) == {frozenset({-ab, ba}), frozenset({-ba, ab})}


def test_ground_clauses_valid_sentence_is_empty():
    def index(pred, args):
        return {"p": 1}[pred]

    f = _p("forall X. p(X) | ~p(X)")
    assert ground_clauses(f, ["a"], index) == []


def test_ground_clauses_existential_distributes():
    table: dict[tuple[str, tuple[str, ...]], int] = {}

    def index(pred, args):
        return table.setdefault((pred, args), len(table) + 1)

    f = _p("exists X. p(X) & q(X)")
    clauses = ground_clauses(f, ["a", "b"], index)
    pa, qa = table[("p", ("a",))], table[("q", ("a",))]
    pb, qb = table[("p", ("b",))], table[("q", ("b",))]
    assert frozenset({pa, pb}) in clauses
    assert frozenset({qa, qb}) in clauses
    assert frozenset({pa, qb}) in clauses
    assert frozenset({qa, pb}) in clauses
