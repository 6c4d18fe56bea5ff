"""Relational instances, schemas, and closed-world evaluation.

Facts are stored as (predicate, argument-tuple) pairs over plain constant
names, which keeps set algebra over instances cheap. Conversion to and from
the formula layer happens at the edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .formula import (
    And, Atom, Constant, Equality, Exists, Forall, Formula, FormulaError,
    FreshNames, Implies, Not, Or, ParseError, Term, Variable, constants_of,
    parse_formula, predicates_of,
)

Fact = tuple[str, tuple[str, ...]]


class ResourceLimitError(RuntimeError):
    def __init__(self, kind: str, limit: int):
        super().__init__(f"{kind} limit of {limit} exceeded")
        self.kind = kind
        self.limit = limit


class Schema:
    """Predicate arities, grown as input is parsed and checked thereafter."""

    def __init__(self, arities: Mapping[str, int] | None = None):
        self.arities: dict[str, int] = dict(arities or {})

    def declare(self, pred: str, arity: int) -> None:
        known = self.arities.get(pred)
        if known is None:
            self.arities[pred] = arity
        elif known != arity:
            raise FormulaError(
                f"predicate {pred!r} used with {arity} arguments, "
                f"declared with {known}")

    def __contains__(self, pred: str) -> bool:
        return pred in self.arities

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Schema) and self.arities == other.arities

    def __repr__(self) -> str:
        return f"Schema({self.arities!r})"


@dataclass(frozen=True)
class Instance:
    """An immutable set of ground facts."""

    facts: frozenset[Fact]
    _by_pred: dict[str, set[tuple[str, ...]]] = field(
        init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        by_pred: dict[str, set[tuple[str, ...]]] = {}
        for pred, args in self.facts:
            by_pred.setdefault(pred, set()).add(args)
        object.__setattr__(self, "_by_pred", by_pred)

    @classmethod
    def of(cls, facts: Iterable[Fact]) -> "Instance":
        return cls(frozenset(facts))

    @classmethod
    def from_atoms(cls, atoms: Iterable[Atom]) -> "Instance":
        out = []
        for a in atoms:
            key = fact_of_atom(a)
            if key is None:
                raise FormulaError(f"not a ground fact: {a}")
            out.append(key)
        return cls(frozenset(out))

    def __contains__(self, fact: Fact) -> bool:
        return fact in self.facts

    def __iter__(self) -> Iterator[Fact]:
        return iter(sorted(self.facts))

    def __len__(self) -> int:
        return len(self.facts)

    def has(self, pred: str, args: tuple[str, ...]) -> bool:
        rows = self._by_pred.get(pred)
        return rows is not None and args in rows

    def rows(self, pred: str) -> frozenset[tuple[str, ...]]:
        return frozenset(self._by_pred.get(pred, ()))

    def active_domain(self) -> frozenset[str]:
        return frozenset(c for _, args in self.facts for c in args)

    def atoms(self) -> tuple[Atom, ...]:
        return tuple(atom_of_fact(f) for f in sorted(self.facts))


def fact_of_atom(a: Atom) -> Fact | None:
    """The fact key of a ground, constant-only atom, else None."""
    names = []
    for t in a.args:
        if not isinstance(t, Constant):
            return None
        names.append(t.name)
    return (a.pred, tuple(names))


def atom_of_fact(f: Fact) -> Atom:
    pred, args = f
    return Atom(pred, tuple(Constant(c) for c in args))


def symmetric_difference(a: Instance, b: Instance) -> frozenset[Fact]:
    return a.facts ^ b.facts


def closer_or_equal(base: Instance, first: Instance,
                    second: Instance) -> bool:
    """Whether `first` changes `base` by a subset of what `second` does."""
    return symmetric_difference(base, first) <= symmetric_difference(base,
                                                                     second)


# ---------------------------------------------------------------------------
# Quantifier domains


@dataclass(frozen=True)
class DomainPolicy:
    """Constants available for quantifier evaluation and instantiation.

    `extras` are constants mentioned by constraints or queries but absent
    from the instance; `fresh` is a reserve of names never used elsewhere,
    standing in for the infinitely many unnamed individuals; `term_depth`
    bounds how deep Skolem applications may be instantiated.
    """

    extras: tuple[str, ...] = ()
    fresh: tuple[str, ...] = ()
    term_depth: int = 1

    @classmethod
    def derive(cls, instance: Instance, ics: Iterable[Formula] = (),
               queries: Iterable[Formula] = (),
               fresh_size: int | None = None,
               term_depth: int = 1) -> "DomainPolicy":
        ics = tuple(ics)
        queries = tuple(queries)
        adom = instance.active_domain()
        extras: set[str] = set()
        for f in ics + queries:
            extras |= set(constants_of(f)) - adom
        if fresh_size is None:
            fresh_size = sum(_existential_count(f) for f in ics + queries)
        used = set(adom) | extras
        for f in ics + queries:
            used |= set(predicates_of(f))
        source = FreshNames(used)
        fresh = tuple(source.constant() for _ in range(fresh_size))
        return cls(extras=tuple(sorted(extras)), fresh=fresh,
                   term_depth=term_depth)

    def pool(self, instance: Instance) -> tuple[str, ...]:
        adom = instance.active_domain()
        seen = sorted(adom | set(self.extras))
        return tuple(seen) + tuple(c for c in self.fresh if c not in adom)


def _existential_count(f: Formula, positive: bool = True) -> int:
    if isinstance(f, Atom) or isinstance(f, Equality):
        return 0
    if isinstance(f, Not):
        return _existential_count(f.body, not positive)
    if isinstance(f, (And, Or)):
        return (_existential_count(f.left, positive)
                + _existential_count(f.right, positive))
    if isinstance(f, Implies):
        return (_existential_count(f.left, not positive)
                + _existential_count(f.right, positive))
    if isinstance(f, Forall):
        return _existential_count(f.body, positive) + (0 if positive else 1)
    if isinstance(f, Exists):
        return _existential_count(f.body, positive) + (1 if positive else 0)
    raise FormulaError(f"cannot inspect {f!r}")


# ---------------------------------------------------------------------------
# Evaluation


def cwa_truth(instance: Instance, literal: Formula) -> bool:
    """Truth of a ground literal under the closed-world assumption."""
    negated = False
    if isinstance(literal, Not):
        negated = True
        literal = literal.body
    if isinstance(literal, Atom):
        key = fact_of_atom(literal)
        if key is None:
            raise FormulaError(f"literal is not ground: {literal}")
        return (key in instance.facts) != negated
    if isinstance(literal, Equality):
        left, right = literal.left, literal.right
        if not isinstance(left, Constant) or not isinstance(right, Constant):
            raise FormulaError(f"equality is not ground: {literal}")
        return (left.name == right.name) != negated
    raise FormulaError(f"not a literal: {literal}")


def satisfies(instance: Instance, f: Formula,
              policy: DomainPolicy | None = None) -> bool:
    """Tarskian truth of a sentence in the instance.

    Quantifiers range over the active domain plus the policy's extra and
    fresh constants; the fresh reserve is what lets an existential find an
    unnamed witness and a universal fail on one, the way both would over an
    infinite domain.
    """
    policy = policy or DomainPolicy()
    pool = policy.pool(instance)

    def walk(g: Formula, env: dict[str, str]) -> bool:
        if isinstance(g, Atom):
            args = tuple(_resolve(t, env) for t in g.args)
            return instance.has(g.pred, args)
        if isinstance(g, Equality):
            return _resolve(g.left, env) == _resolve(g.right, env)
        if isinstance(g, Not):
            return not walk(g.body, env)
        if isinstance(g, And):
            return walk(g.left, env) and walk(g.right, env)
        if isinstance(g, Or):
            return walk(g.left, env) or walk(g.right, env)
        if isinstance(g, Implies):
            return not walk(g.left, env) or walk(g.right, env)
        if isinstance(g, Forall):
            return all(walk(g.body, {**env, g.var: c}) for c in pool)
        if isinstance(g, Exists):
            return any(walk(g.body, {**env, g.var: c}) for c in pool)
        raise FormulaError(f"cannot evaluate {g!r}")

    return walk(f, {})


def _resolve(t: Term, env: dict[str, str]) -> str:
    if isinstance(t, Constant):
        return t.name
    if isinstance(t, Variable):
        try:
            return env[t.name]
        except KeyError:
            raise FormulaError(f"free variable {t.name} in evaluation")
    raise FormulaError(f"cannot evaluate term {t}")


# ---------------------------------------------------------------------------
# Reading and writing fact files


def parse_facts(text: str, schema: Schema | None = None,
                source: str = "<facts>") -> tuple[Instance, Schema]:
    """Read one fact per line: `pred(c1, c2).` The trailing period is
    optional; `#` starts a comment. Arguments must be constants."""
    schema = schema or Schema()
    facts: list[Fact] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.endswith("."):
            stripped = stripped[:-1].rstrip()
        try:
            f = parse_formula(stripped, arities=schema.arities,
                              source=source)
        except ParseError as err:
            raise ParseError(err.message, line=lineno, column=err.column,
                             source=source) from None
        if not isinstance(f, Atom):
            raise ParseError("expected a fact like pred(c1, c2).",
                             line=lineno, column=1, source=source)
        key = fact_of_atom(f)
        if key is None:
            raise ParseError(
                "fact arguments must be constants "
                "(lowercase, numeric, or quoted)",
                line=lineno, column=1, source=source)
        facts.append(key)
    return Instance(frozenset(facts)), schema


def serialize_facts(instance: Instance) -> str:
    lines = []
    for pred, args in sorted(instance.facts):
        rendered = ",".join(str(Constant(c)) for c in args)
        lines.append(f"{pred}({rendered}).")
    return "\n".join(lines) + ("\n" if lines else "")
