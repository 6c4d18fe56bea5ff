"""Consistent query answering.

A sentence is consistently true when it holds in every repair. The
check grafts the negated query onto each minimally opened branch of the
constraint tableau and asks whether every graft closes; open queries
run the same test once per candidate tuple. A second path evaluates
the query directly on each repair and intersects, as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator

from .formula import (
    And, Atom, Constant, Exists, Forall, Formula, Implies, Not, Or,
    Variable, constants_of, free_variables, negate, parse_formula,
    substitute,
)
from .instance import DomainPolicy, Instance, satisfies
from .repair import RepairSet, repairs
from .tableau import BuildOptions, build


@dataclass(frozen=True)
class Query:
    """A formula together with the output order of its free variables."""

    formula: Formula
    free: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        declared = tuple(self.free)
        if len(set(declared)) != len(declared):
            raise ValueError("duplicate free variable in query")
        actual = free_variables(self.formula)
        if set(actual) != set(declared):
            raise ValueError(
                f"declared free variables {declared} do not match the "
                f"formula's {actual}")

    @property
    def is_sentence(self) -> bool:
        return not self.free


def parse_query(text: str) -> Query:
    """Parse a query; free variables are inferred in occurrence order."""
    f = parse_formula(text)
    return Query(f, free_variables(f))


@dataclass(frozen=True)
class AnswerSet:
    """Verdict for a sentence, or the tuple set for an open query.

    `provenance` lists, per repair, what closed the grafted tableau:
    for open queries each entry is prefixed with the answer tuple.
    """

    free: tuple[str, ...]
    verdict: bool | None = None
    tuples: frozenset[tuple[str, ...]] | None = None
    provenance: tuple[str, ...] = ()

    def rows(self) -> list[tuple[str, ...]]:
        return sorted(self.tuples or ())


# ---------------------------------------------------------------------------
# The repair-side tableau, computed once and reused across queries


@dataclass(frozen=True)
class OpenedTableau:
    """The constraint tableau with its minimal openings applied.

    Each kept branch stands for one repair; grafting a negated query
    onto it amounts to developing the query over the repaired instance,
    so that is what `closed_for` does, once per distinct repair.
    """

    ics: tuple[Formula, ...]
    instance: Instance
    policy: DomainPolicy
    options: BuildOptions
    repair_set: RepairSet

    @classmethod
    def develop(cls, ics, instance: Instance,
                policy: DomainPolicy | None = None,
                options: BuildOptions | None = None,
                **repair_kwargs) -> "OpenedTableau":
        ics = tuple(ics)
        policy = policy or DomainPolicy.derive(instance, ics)
        options = options or BuildOptions()
        rs = repairs(instance, list(ics), policy=policy, options=options,
                     **repair_kwargs)
        return cls(ics=ics, instance=instance, policy=policy,
                   options=options, repair_set=rs)

    def closed_for(self, sentence: Formula) -> tuple[bool, tuple[str, ...]]:
        """Does the combined tableau close on every kept branch?

        Returns the verdict plus one note per repair naming what closed
        its graft. Parameters introduced by the negated query are free
        to close differently from one repair to the next.
        """
        nq = negate(sentence)
        notes = []
        for k, rep in enumerate(self.repair_set.instances, start=1):
            t = build([nq], rep, options=self.options)
            if not t.closed:
                return False, ()
            closing = sorted({str(b.reason) for b in t.closed_branches()})
            notes.append(f"repair {k} closed by " + "; ".join(closing))
        return True, tuple(notes)


# ---------------------------------------------------------------------------
# Candidate tuples for open queries


def _variable_positions(f: Formula) -> dict[str, set[tuple[str, int]]]:
    """Argument slots (predicate, index) holding each free variable."""
    spots: dict[str, set[tuple[str, int]]] = {}

    def walk(g: Formula, bound: frozenset[str]) -> None:
        if isinstance(g, Atom):
            for i, t in enumerate(g.args):
                if isinstance(t, Variable) and t.name not in bound:
                    spots.setdefault(t.name, set()).add((g.pred, i))
        elif isinstance(g, Not):
            walk(g.body, bound)
        elif isinstance(g, (And, Or, Implies)):
            walk(g.left, bound)
            walk(g.right, bound)
        elif isinstance(g, (Forall, Exists)):
            walk(g.body, bound | {g.var})

    walk(f, frozenset())
    return spots


def _slot_values(pred: str, i: int, r: Instance, ics,
                 adom: frozenset[str]) -> set[str]:
    """Constants that can sit at the given argument slot in a repair.

    Facts of r contribute their own values. A constraint atom with a
    constant there pins insertions to it; one with a variable there lets
    any active-domain constant in, so the filter gives up for that slot.
    """
    vals = {args[i] for p, args in r.facts if p == pred}
    pending = list(ics)
    while pending:
        g = pending.pop()
        if isinstance(g, Atom):
            if g.pred == pred:
                t = g.args[i]
                if isinstance(t, Constant):
                    vals.add(t.name)
                else:
                    return set(adom)
        elif isinstance(g, Not):
            pending.append(g.body)
        elif isinstance(g, (And, Or, Implies)):
            pending.extend((g.left, g.right))
        elif isinstance(g, (Forall, Exists)):
            pending.append(g.body)
    return vals


def candidate_tuples(q: Query, r: Instance, ics) -> Iterator[tuple[str, ...]]:
    """Ground tuples worth testing: active domain plus query constants,
    narrowed per variable to the values its argument slots can hold."""
    adom = r.active_domain()
    qconsts = constants_of(q.formula)
    spots = _variable_positions(q.formula)
    columns = []
    for v in q.free:
        where = spots.get(v)
        if not where:
            vals = set(adom)
        else:
            vals = set()
            for pred, i in where:
                vals |= _slot_values(pred, i, r, ics, adom)
        columns.append(sorted(vals | qconsts))
    yield from product(*columns)


# ---------------------------------------------------------------------------
# The two answering paths


def consistent_true(ics, r: Instance, q: Formula | Query,
                    policy: DomainPolicy | None = None, *,
                    opened: OpenedTableau | None = None,
                    options: BuildOptions | None = None) -> AnswerSet:
    """Is the sentence true in every repair?"""
    f = q.formula if isinstance(q, Query) else q
    if free_variables(f):
        raise ValueError("open query: use consistent_answers")
    opened = opened or OpenedTableau.develop(ics, r, policy=policy,
                                             options=options)
    ok, notes = opened.closed_for(f)
    return AnswerSet(free=(), verdict=ok, provenance=notes)


def consistent_answers(ics, r: Instance, q: Query,
                       policy: DomainPolicy | None = None, *,
                       opened: OpenedTableau | None = None,
                       options: BuildOptions | None = None) -> AnswerSet:
    """Tuples whose substitution into the query is true in every repair."""
    if q.is_sentence:
        raise ValueError("sentence: use consistent_true")
    opened = opened or OpenedTableau.develop(ics, r, policy=policy,
                                             options=options)
    rows = set()
    notes: list[str] = []
    for tup in candidate_tuples(q, r, ics):
        ground = substitute(q.formula,
                            {v: Constant(c) for v, c in zip(q.free, tup)})
        ok, per_repair = opened.closed_for(ground)
        if ok:
            rows.add(tup)
            label = "(" + ", ".join(tup) + ")"
            notes.extend(f"{label} {n}" for n in per_repair)
    return AnswerSet(free=q.free, tuples=frozenset(rows),
                     provenance=tuple(notes))


def answers_via_repair_intersection(ics, r: Instance, q: Query,
                                    policy: DomainPolicy | None = None, *,
                                    repair_set: RepairSet | None = None,
                                    options: BuildOptions | None = None,
                                    ) -> AnswerSet:
    """The same answers by brute intersection over the repairs.

    No slot filtering here: every tuple over the active domain plus the
    query constants is evaluated on every repair, which makes this path
    a meaningful check of the combined-tableau one.
    """
    ics = list(ics)
    policy = policy or DomainPolicy.derive(r, ics, queries=[q.formula])
    rs = repair_set or repairs(r, ics, policy=policy, options=options)
    if q.is_sentence:
        ok = all(satisfies(rep, q.formula, policy) for rep in rs.instances)
        return AnswerSet(free=(), verdict=ok)
    pool = sorted(r.active_domain() | constants_of(q.formula))
    rows = set()
    for tup in product(pool, repeat=len(q.free)):
        ground = substitute(q.formula,
                            {v: Constant(c) for v, c in zip(q.free, tup)})
        if all(satisfies(rep, ground, policy) for rep in rs.instances):
            rows.add(tup)
    return AnswerSet(free=q.free, tuples=frozenset(rows))
