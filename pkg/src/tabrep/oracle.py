"""Brute-force ground truth, kept deliberately naive.

Everything here answers the same questions as the tableau pipeline by
sheer enumeration: candidate change sets are swept in order of size with
subset pruning, and the possible-models update semantics is evaluated
over a propositional grounding. Nothing in this module touches the
tableau machinery, so agreement between the two sides is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

from .formula import (
    And, Atom, Constant, Equality, Exists, Forall, Formula, Implies, Not,
    Or, constants_of, ground_clauses, predicates_of, substitute,
)
from .instance import (
    DomainPolicy, Fact, Instance, ResourceLimitError, satisfies,
)


@dataclass(frozen=True)
class ChangeUniverse:
    """The finite space of deletions and insertions the sweep explores.

    Deletions range over the stored facts. Insertions range over ground
    atoms built from the constant pool, restricted to predicates with a
    positive occurrence in some constraint: inserting anywhere else can
    only grow the difference without fixing anything.
    """

    deletions: tuple[Fact, ...]
    insertions: tuple[Fact, ...]
    insertion_cap: int
    guard: int = 22

    @classmethod
    def derive(cls, r: Instance, ics: list[Formula],
               policy: DomainPolicy | None = None,
               insertion_cap: int | None = None,
               guard: int = 22) -> "ChangeUniverse":
        policy = policy or DomainPolicy.derive(r, ics)
        pool = policy.pool(r)
        arities: dict[str, int] = {}
        for f in ics:
            arities.update(predicates_of(f))
        positive = set()
        for f in ics:
            positive |= _polarity_preds(f, True)
        inserts = []
        for pred in sorted(positive):
            for args in product(pool, repeat=arities[pred]):
                fact = (pred, args)
                if fact not in r.facts:
                    inserts.append(fact)
        if insertion_cap is None:
            insertion_cap = len(r.facts) + len(ics)
        return cls(deletions=tuple(sorted(r.facts)),
                   insertions=tuple(inserts),
                   insertion_cap=insertion_cap, guard=guard)


def _polarity_preds(f: Formula, positive: bool) -> set[str]:
    if isinstance(f, Atom):
        return {f.pred} if positive else set()
    if isinstance(f, Equality):
        return set()
    if isinstance(f, Not):
        return _polarity_preds(f.body, not positive)
    if isinstance(f, (And, Or)):
        return (_polarity_preds(f.left, positive)
                | _polarity_preds(f.right, positive))
    if isinstance(f, Implies):
        return (_polarity_preds(f.left, not positive)
                | _polarity_preds(f.right, positive))
    if isinstance(f, (Forall, Exists)):
        return _polarity_preds(f.body, positive)
    raise TypeError(f"unexpected formula {f!r}")


def enumerate_repairs_bruteforce(ics: list[Formula], r: Instance,
                                 universe: ChangeUniverse | None = None,
                                 policy: DomainPolicy | None = None,
                                 *, max_combos: int = 500000,
                                 ) -> list[Instance]:
    """All subset-minimal consistent variants of r.

    Change sets are visited in order of size; once a change set is
    accepted, every superset is skipped, and the sweep stops at the
    first size where everything was skipped.
    """
    policy = policy or DomainPolicy.derive(r, ics)
    universe = universe or ChangeUniverse.derive(r, ics, policy)
    atoms = list(universe.deletions) + list(universe.insertions)
    n = len(atoms)
    if n > universe.guard:
        raise ResourceLimitError("universe", universe.guard)
    deletion_count = len(universe.deletions)

    accepted: list[int] = []
    results: list[Instance] = []
    tried = 0
    for size in range(n + 1):
        alive = False
        for combo in combinations(range(n), size):
            ins_used = sum(1 for i in combo if i >= deletion_count)
            if ins_used > universe.insertion_cap:
                continue
            mask = 0
            for i in combo:
                mask |= 1 << i
            if any(prev & mask == prev for prev in accepted):
                continue
            alive = True
            tried += 1
            if tried > max_combos:
                raise ResourceLimitError("combinations", max_combos)
            facts = set(r.facts)
            for i in combo:
                if i < deletion_count:
                    facts.discard(atoms[i])
                else:
                    facts.add(atoms[i])
            candidate = Instance.of(facts)
            if all(satisfies(candidate, f, policy) for f in ics):
                accepted.append(mask)
                results.append(candidate)
        if not alive and size > 0:
            break
    return sorted(results, key=lambda i: (len(i.facts), sorted(i.facts)))


# ---------------------------------------------------------------------------
# Possible-models update semantics


@dataclass(frozen=True)
class PropTheory:
    """Constraints ground over the constant pool, as clauses.

    `atoms` lists the ground atoms mentioned by the clauses; clause
    literals are 1-based signed indices into it.
    """

    atoms: tuple[Fact, ...]
    clauses: tuple[frozenset[int], ...]

    @classmethod
    def ground(cls, ics: list[Formula], pool: tuple[str, ...],
               *, max_atoms: int = 10000) -> "PropTheory":
        table: dict[Fact, int] = {}

        def index(pred: str, args: tuple[str, ...]) -> int:
            key = (pred, args)
            if key not in table:
                if len(table) >= max_atoms:
                    raise ResourceLimitError("grounding", max_atoms)
                table[key] = len(table) + 1
            return table[key]

        clauses: list[frozenset[int]] = []
        for f in ics:
            clauses.extend(ground_clauses(f, pool, index))
        ordered = sorted(table, key=table.get)
        return cls(atoms=tuple(ordered), clauses=tuple(clauses))


def winslett_update_models(r: Instance, ics: list[Formula],
                           policy: DomainPolicy | None = None,
                           *, max_combos: int = 500000) -> list[Instance]:
    """Models of updating r by the ground constraints, possible-models style.

    The world starts as the closed-world model of r; the update keeps
    exactly the models of the constraints whose symmetric difference
    from that world is minimal under inclusion. Only atoms mentioned by
    the ground constraints can flip. The search picks a violated clause
    and branches on each flip that would satisfy it; any minimal-change
    model extends one of those branches, so nothing minimal is missed,
    and non-minimal finds are filtered out at the end.
    """
    policy = policy or DomainPolicy.derive(r, ics)
    theory = PropTheory.ground(ics, policy.pool(r))
    m = len(theory.atoms)

    base = 0
    for i, fact in enumerate(theory.atoms):
        if fact in r.facts:
            base |= 1 << i

    pos_masks = []
    neg_masks = []
    for clause in theory.clauses:
        if not clause:
            return []
        pos = neg = 0
        for lit in clause:
            if lit > 0:
                pos |= 1 << (lit - 1)
            else:
                neg |= 1 << (-lit - 1)
        pos_masks.append(pos)
        neg_masks.append(neg)

    full = (1 << m) - 1
    found: set[int] = set()
    nodes = 0

    def search(assign: int, flip: int) -> None:
        nonlocal nodes
        nodes += 1
        if nodes > max_combos:
            raise ResourceLimitError("combinations", max_combos)
        if any(prev & flip == prev for prev in found):
            return
        for clause, p, n in zip(theory.clauses, pos_masks, neg_masks):
            if (assign & p) or (~assign & full & n):
                continue
            # every literal of this clause is false, so flipping any of
            # its atoms satisfies it; a smaller flip set cannot help
            for lit in clause:
                bit = 1 << (abs(lit) - 1)
                if flip & bit:
                    continue
                search(assign ^ bit, flip | bit)
            return
        found.add(flip)

    search(base, 0)

    minimal = [f for f in found
               if not any(o != f and o & f == o for o in found)]
    out = []
    for flip in minimal:
        facts = set(r.facts)
        for i in range(m):
            if flip & (1 << i):
                fact = theory.atoms[i]
                if base & (1 << i):
                    facts.discard(fact)
                else:
                    facts.add(fact)
        out.append(Instance.of(facts))
    return sorted(out, key=lambda i: (len(i.facts), sorted(i.facts)))


# ---------------------------------------------------------------------------
# Query answers by plain intersection


def consistent_true_bruteforce(ics: list[Formula], r: Instance,
                               q: Formula,
                               policy: DomainPolicy | None = None) -> bool:
    policy = policy or DomainPolicy.derive(r, ics, queries=[q])
    reps = enumerate_repairs_bruteforce(ics, r, policy=policy)
    return all(satisfies(rep, q, policy) for rep in reps)


def consistent_answers_bruteforce(ics: list[Formula], r: Instance,
                                  q: Formula, free: tuple[str, ...],
                                  policy: DomainPolicy | None = None,
                                  ) -> frozenset[tuple[str, ...]]:
    """Tuples true in every repair, by enumerating the repairs."""
    policy = policy or DomainPolicy.derive(r, ics, queries=[q])
    reps = enumerate_repairs_bruteforce(ics, r, policy=policy)
    candidates = sorted(frozenset(r.active_domain())
                        | frozenset(constants_of(q)))
    out = set()
    for values in product(candidates, repeat=len(free)):
        bound = substitute(q, {v: Constant(c)
                               for v, c in zip(free, values)})
        if all(satisfies(rep, bound, policy) for rep in reps):
            out.add(values)
    return frozenset(out)
