"""Acceptance gate for the whole package.

One test per numbered criterion from the project checklist; each prints
a single PASS line on success, so `pytest -v -s` reads as a report. The
helper functions take the pruning flags so criterion 9 can replay the
earlier criteria with pruning disabled.
"""

import itertools
import json
import time
from pathlib import Path

from tabrep.cqa import (
    OpenedTableau, answers_via_repair_intersection, consistent_answers,
    consistent_true, parse_query,
)
from tabrep.formula import parse_formula
from tabrep.instance import DomainPolicy, Instance, parse_facts, satisfies
from tabrep.oracle import enumerate_repairs_bruteforce, winslett_update_models
from tabrep.repair import grounded, openings, repairs, subsumption_prune
from tabrep.tableau import BuildOptions, build

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def _facts(name: str, filename: str = "facts") -> Instance:
    instance, _ = parse_facts((CORPUS / name / filename).read_text())
    return instance


def _ics(name: str) -> list:
    out = []
    for raw in (CORPUS / name / "ic").read_text().splitlines():
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            out.append(parse_formula(stripped.rstrip(".")))
    return out


def _fact_set(lines: list[str]) -> frozenset:
    instance, _ = parse_facts("\n".join(lines))
    return instance.facts


def _expected(name: str) -> dict:
    return json.loads((CORPUS / name / "expected.json").read_text())


def _report(n: int, label: str) -> None:
    print(f"criterion {n}: PASS  {label}")


# -- criterion bodies, reusable with pruning flags --------------------------------


def check_supply_reproduction(groundedness=True, subsumption=True):
    inst = _facts("ex1_supply")
    ics = _ics("ex1_supply")
    rs = repairs(inst, ics, groundedness=groundedness,
                 subsumption=subsumption)
    want = {_fact_set(lines) for lines in _expected("ex1_supply")["repairs"]}
    assert {r.facts for r in rs.instances} == want

    opened = OpenedTableau.develop(ics, inst, groundedness=groundedness,
                                   subsumption=subsumption)
    q = parse_query("supply(X, Y, Z)")
    got = consistent_answers(ics, inst, q, opened=opened)
    assert got.tuples == frozenset({("c", "d1", "it1")})


def check_closure_verdicts():
    # supply case: one branch closes on the equality of distinct constants
    t = build(_ics("ex1_supply"), _facts("ex1_supply"),
              options=BuildOptions(saturation="premise", suspend=False))
    assert t.closed
    assert any(b.reason.condition == "1" and "d = c" in str(b.reason)
               for b in t.branches)

    # referential case: no way to ground the required q atom
    t = build(_ics("ex4_referential"), _facts("ex4_referential"))
    assert t.closed
    reasons = [str(b.reason) for b in t.closed_branches()]
    assert "cond 2b: no σ for q(a,f1(a))" in reasons

    # a required p atom cannot be grounded either
    exists_p = [parse_formula("exists X. p(X)")]
    qq, _ = parse_facts("q(a).\nq(b).")
    t = build(exists_p, qq)
    assert t.closed
    assert [str(b.reason) for b in t.closed_branches()] == [
        "cond 2b: no σ for p(p1)"]

    # same constraint, instance already has p facts: stays open
    pp, _ = parse_facts("p(a).\np(b).")
    assert not build(exists_p, pp).closed

    # negative existential against a p fact: stays open
    pa, _ = parse_facts("p(a).")
    assert not build([parse_formula("exists X. ~p(X)")], pa).closed


def check_models_cases(groundedness=True, subsumption=True):
    ic = [parse_formula("forall X. p(X) -> q(X)")]
    consistent, _ = parse_facts("p(a).\nq(a).\nr(b).")
    rs = repairs(consistent, ic, groundedness=groundedness,
                 subsumption=subsumption)
    assert rs.consistent
    assert [r.facts for r in rs.instances] == [consistent.facts]

    inconsistent, _ = parse_facts("p(a).\nr(b).")
    rs = repairs(inconsistent, ic, groundedness=groundedness,
                 subsumption=subsumption)
    got = {r.facts for r in rs.instances}
    assert got == {_fact_set(["r(b)"]), _fact_set(["p(a)", "q(a)", "r(b)"])}
    for bad in (["p(a)", "q(b)", "r(b)"], ["q(b)", "r(b)"],
                ["p(a)", "q(a)", "q(b)", "r(b)"]):
        assert _fact_set(bad) not in got


def check_openings_pipeline(groundedness=True, subsumption=True):
    inst = _facts("ex1_supply")
    ics = _ics("ex1_supply")
    opts = BuildOptions(saturation="premise", suspend=False)
    t = build(ics, inst, options=opts)
    assert len(t.branches) == 9

    # branches closed only by the built-in equality cannot be reopened
    assert [b.is_data_closed() for b in t.branches] == [
        True, True, False, True, True, False, True, True, False]

    # subsumption keeps one branch per minimal conflict set
    kept = [b for b in subsumption_prune(t.branches) if b.is_data_closed()]
    kept_conflicts = {b.database_literals() for b in kept}
    assert kept_conflicts == {
        (parse_formula("~supply(d, d2, it2)"),),
        (parse_formula("~class(it2, t4)"),),
    }

    rs = repairs(inst, ics, options=opts, groundedness=groundedness,
                 subsumption=subsumption)
    changes = {(o.deletions, o.insertions) for o in rs.openings}
    assert changes == {
        (frozenset({("supply", ("d", "d2", "it2"))}), frozenset()),
        (frozenset({("class", ("it2", "t4"))}), frozenset()),
    }


def check_student_queries(groundedness=True, subsumption=True):
    inst = _facts("ex11_student")
    ics = _ics("ex11_student")
    opened = OpenedTableau.develop(ics, inst, groundedness=groundedness,
                                   subsumption=subsumption)

    yes1 = consistent_true(ics, inst, parse_query("course(s1, c2, g2)"),
                           opened=opened)
    yes2 = consistent_true(ics, inst,
                           parse_query("exists X. course(X, c2, g2)"),
                           opened=opened)
    no = consistent_true(ics, inst, parse_query("student(s1, n2, d1)"),
                         opened=opened)
    assert yes1.verdict is True
    assert yes2.verdict is True
    assert no.verdict is False

    full = consistent_answers(ics, inst, parse_query("course(X, Y, Z)"),
                              opened=opened)
    assert full.tuples == frozenset({("s1", "c1", "g1"),
                                     ("s1", "c2", "g2")})
    partial = consistent_answers(
        ics, inst, parse_query("exists Z. course(s1, Y, Z)"),
        opened=opened)
    assert partial.tuples == frozenset({("c1",), ("c2",)})


def check_answer_shrinkage(groundedness=True, subsumption=True):
    ics = _ics("ex14_employee")
    q = parse_query("employee(X, Y)")

    before = _facts("ex14_employee")
    opened = OpenedTableau.develop(ics, before, groundedness=groundedness,
                                   subsumption=subsumption)
    first = consistent_answers(ics, before, q, opened=opened)
    assert first.tuples == frozenset({("J.Page", "5000"),
                                      ("V.Smith", "3000"),
                                      ("M.Stowe", "7000")})

    after = _facts("ex14_employee", "facts_updated")
    opened = OpenedTableau.develop(ics, after, groundedness=groundedness,
                                   subsumption=subsumption)
    second = consistent_answers(ics, after, q, opened=opened)
    assert second.tuples == frozenset({("V.Smith", "3000"),
                                       ("M.Stowe", "7000")})
    assert second.tuples < first.tuples


def check_change_certification():
    inst, _ = parse_facts("p(a).\nr(b).")
    ic = [parse_formula("forall X. p(X) -> q(X)")]
    deletion = frozenset({("p", ("a",))})
    foreign = frozenset({("q", ("b",))})
    assert grounded(inst, ic, deletion, frozenset()) is True
    assert grounded(inst, ic, frozenset(), foreign) is False


# -- the sweep ---------------------------------------------------------------------


SWEEP_DOMAIN = ("a", "b", "c")
SWEEP_ATOMS = ([("p", (x,)) for x in SWEEP_DOMAIN]
               + [("q", (x, y)) for x in SWEEP_DOMAIN for y in SWEEP_DOMAIN])
SWEEP_ICS = [
    # functional dependencies
    "forall X, Y, Z. q(X, Y) & q(X, Z) -> Y = Z",
    "forall X, Y, Z. q(Y, X) & q(Z, X) -> Y = Z",
    # referential / inclusion
    "forall X. p(X) -> exists Y. q(X, Y)",
    "forall X. p(X) -> exists Y. q(Y, X)",
    "forall X, Y. q(X, Y) -> p(X)",
    "forall X, Y. q(X, Y) -> q(Y, X)",
    # denials
    "forall X. ~(p(X) & q(X, X))",
    "forall X, Y. ~(q(X, Y) & q(Y, X))",
    "forall X, Y. ~(p(X) & q(X, Y))",
    "forall X. ~q(X, X)",
    # positive existentials
    "exists X. p(X)",
    "exists X, Y. q(X, Y)",
    "exists X. q(X, X)",
]


def sweep_pairs():
    ics = [parse_formula(s) for s in SWEEP_ICS]
    for size in range(5):
        for combo in itertools.combinations(SWEEP_ATOMS, size):
            inst = Instance(frozenset(combo))
            for ic in ics:
                yield inst, ic


def check_sweep_pair(inst, ic, groundedness=True, subsumption=True):
    """All six sweep properties for one (instance, constraint) pair."""
    pol = DomainPolicy.derive(inst, [ic], fresh_size=1)
    rs = repairs(inst, [ic], policy=pol, groundedness=groundedness,
                 subsumption=subsumption)

    # (a) the tableau closes exactly on constraint violation
    assert rs.tableau.closed == (not satisfies(inst, ic, pol))

    # (b) three independent routes to the repair set agree
    brute = {r.facts for r in
             enumerate_repairs_bruteforce([ic], inst, policy=pol)}
    wins = {r.facts for r in winslett_update_models(inst, [ic], pol)}
    eng = {r.facts for r in rs.instances}
    assert eng == brute == wins, (sorted(inst.facts), str(ic))

    # (c) combined-tableau answers equal the repair intersection
    opened = OpenedTableau(ics=(ic,), instance=inst, policy=pol,
                           options=BuildOptions(), repair_set=rs)
    for text in ("p(X)", "q(X, Y)"):
        q = parse_query(text)
        a = consistent_answers([ic], inst, q, opened=opened)
        b = answers_via_repair_intersection([ic], inst, q, pol,
                                            repair_set=rs)
        assert a.tuples == b.tuples, (sorted(inst.facts), str(ic), text)

    # (d) each opening's change set is the symmetric difference it causes
    for o in rs.openings:
        assert (inst.facts ^ o.result.facts) == (o.deletions | o.insertions)

    # (e) closeness to the instance is deletion/insertion inclusion
    reps = sorted(brute)
    for r1 in reps:
        for r2 in reps:
            d1, d2 = inst.facts ^ r1, inst.facts ^ r2
            by_delta = d1 <= d2
            by_parts = (d1 & inst.facts <= d2 & inst.facts
                        and d1 - inst.facts <= d2 - inst.facts)
            assert by_delta == by_parts

    # (f) certification accepts exactly the true repairs
    if rs.tableau.closed:
        for o in openings(rs.tableau, subsumption=False):
            if not satisfies(o.result, ic, pol):
                continue
            certified = grounded(inst, [ic], o.deletions, o.insertions)
            assert certified == (o.result.facts in brute), (
                sorted(inst.facts), str(ic), sorted(o.delta))


# -- the numbered criteria ---------------------------------------------------------


def test_criterion_1_supply_reproduction():
    check_supply_reproduction()
    _report(1, "two supply repairs and the single consistent answer")


def test_criterion_2_closure_verdicts():
    check_closure_verdicts()
    _report(2, "closure conditions fire and stay quiet as stated")


def test_criterion_3_models_cases():
    check_models_cases()
    _report(3, "consistent case kept, two repairs found, nothing extra")


def test_criterion_4_openings_pipeline():
    check_openings_pipeline()
    _report(4, "nine branches, two minimal openings, built-ins excluded")


def test_criterion_5_student_queries():
    check_student_queries()
    _report(5, "yes/yes/no verdicts and both open answer sets")


def test_criterion_6_answer_shrinkage():
    check_answer_shrinkage()
    _report(6, "answer set shrinks from three tuples to two")


def test_criterion_7_change_certification():
    check_change_certification()
    _report(7, "deletion context certified, foreign insertion rejected")


def test_criterion_8_exhaustive_sweep():
    start = time.time()
    pairs = 0
    for inst, ic in sweep_pairs():
        check_sweep_pair(inst, ic)
        pairs += 1
    elapsed = time.time() - start
    assert pairs >= 10000, pairs
    assert elapsed < 300, elapsed
    _report(8, f"{pairs} pairs, six properties each, "
               f"{elapsed:.0f}s, zero counterexamples")


def test_criterion_9_pruning_neutrality():
    check_supply_reproduction(groundedness=False, subsumption=False)
    check_closure_verdicts()
    check_models_cases(groundedness=False, subsumption=False)
    check_openings_pipeline(groundedness=False, subsumption=False)
    check_student_queries(groundedness=False, subsumption=False)
    check_answer_shrinkage(groundedness=False, subsumption=False)
    check_change_certification()

    # the sweep again, pruning off, same pass condition
    start = time.time()
    pairs = 0
    for inst, ic in sweep_pairs():
        check_sweep_pair(inst, ic, groundedness=False, subsumption=False)
        pairs += 1
    assert pairs >= 10000, pairs
    assert time.time() - start < 300

    # pruning must save strictly some development work
    inst = _facts("ex1_supply")
    ics = _ics("ex1_supply")
    lean = build(ics, inst)
    full = build(ics, inst,
                 options=BuildOptions(saturation="premise", suspend=False))
    assert lean.nodes_developed < full.nodes_developed
    _report(9, "identical results with pruning off, fewer nodes with it on")
