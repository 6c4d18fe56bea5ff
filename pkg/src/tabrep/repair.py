"""Turning a closed tableau into repaired instances.

A branch that closed purely on conflicts with the stored facts can be
reopened by editing those facts: delete the atoms the branch negates (L)
and insert the positive atoms the branch demands but the instance lacks
(K). Valuating the parameters of K over the constant pool gives one
candidate instance per valuation, (r \\ L) | K. Keeping the candidates
whose (L, K) pair is subset-minimal yields exactly the repairs.

The groundedness test is an independent certificate for a single change
set: encode the constraints over the repaired vocabulary together with
definitions of the difference predicates, close the world around the
original facts, and require every claimed change atom to be a classical
consequence. Entailment is decided propositionally by the small
refutation engine at the bottom of this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

from .formula import (
    Atom, Constant, Equality, Formula, Not, Parameter, SkolemApp, Term,
    constants_of, rename_predicates, ground_clauses, predicates_of,
)
from .instance import (
    DomainPolicy, Fact, Instance, ResourceLimitError, fact_of_atom,
    satisfies,
)
from .tableau import Branch, Tableau, build


@dataclass(frozen=True)
class Opening:
    """One way to reopen a data-closed branch.

    `deletions` are facts of the original instance whose negations sit on
    the branch; `pattern` lists the positive atoms that had no way into
    the instance; `valuation` records how parameters and Skolem terms in
    the pattern were turned into constants; `insertions` is the valuated
    pattern. `branches` keeps every branch uid that produced this same
    change set.
    """

    branches: tuple[int, ...]
    deletions: frozenset[Fact]
    insertions: frozenset[Fact]
    pattern: tuple[Atom, ...]
    valuation: tuple[tuple[str, str], ...]
    result: Instance

    @property
    def delta(self) -> frozenset[Fact]:
        return self.deletions | self.insertions

    def describe(self) -> str:
        parts = []
        if self.deletions:
            parts.append("delete " + ", ".join(
                str(Atom(p, tuple(Constant(a) for a in args)))
                for p, args in sorted(self.deletions)))
        if self.insertions:
            parts.append("insert " + ", ".join(
                str(Atom(p, tuple(Constant(a) for a in args)))
                for p, args in sorted(self.insertions)))
        return "; ".join(parts) if parts else "no change"


def data_closed(b: Branch) -> bool:
    if b.status == "open":
        raise ValueError(f"branch {b.uid} is not closed")
    return b.is_data_closed()


# ---------------------------------------------------------------------------
# Opening a single branch


def open_branch(b: Branch, r: Instance, policy: DomainPolicy,
                *, max_valuations: int = 100000) -> list[Opening]:
    """All admissible openings of one branch.

    A saturated open branch opens trivially to the instance itself. A
    data-closed branch yields one opening per valuation of the insertion
    pattern that leaves every closure obstruction of the branch
    discharged. Branches closed on built-in grounds yield nothing.
    """
    if b.status == "open":
        return [Opening(branches=(b.uid,), deletions=frozenset(),
                        insertions=frozenset(), pattern=(), valuation=(),
                        result=r)]
    if not b.is_data_closed():
        return []

    negatives: list[Fact] = []
    ground_demands: list[Fact] = []
    patterns: list[Atom] = []
    for f in b.literal_part():
        body = f.body if isinstance(f, Not) else f
        if isinstance(body, Equality):
            continue
        assert isinstance(body, Atom)
        fact = fact_of_atom(body)
        if isinstance(f, Not):
            if fact is not None:
                negatives.append(fact)
            continue
        if fact is not None:
            ground_demands.append(fact)
        else:
            patterns.append(body)

    deletions = frozenset(f for f in negatives if f in r.facts)
    # the insertion pattern: positive atoms with no way into r at all
    demand_pattern: list[Atom] = []
    for fact in ground_demands:
        if fact not in r.facts:
            atom = Atom(fact[0], tuple(Constant(a) for a in fact[1]))
            if atom not in demand_pattern:
                demand_pattern.append(atom)
    for atom in patterns:
        if not _matches_somewhere(atom, r) and atom not in demand_pattern:
            demand_pattern.append(atom)

    pool = policy.pool(r)
    out: list[Opening] = []
    seen: set[tuple[frozenset[Fact], frozenset[Fact]]] = set()
    for valuation, insertions in _valuations(demand_pattern, pool,
                                             max_valuations):
        if insertions & deletions:
            continue
        result = Instance.of((r.facts - deletions) | insertions)
        if not _branch_open_wrt(b, result, dict(valuation)):
            continue
        key = (deletions, insertions)
        if key in seen:
            continue
        seen.add(key)
        out.append(Opening(branches=(b.uid,), deletions=deletions,
                           insertions=insertions,
                           pattern=tuple(demand_pattern),
                           valuation=valuation, result=result))
    return out


def _matches_somewhere(atom: Atom, r: Instance) -> bool:
    """Whether some substitution maps the atom onto a stored fact."""
    return any(_unify_row(atom.args, row) is not None
               for row in r.rows(atom.pred))


def _unify_row(args: tuple[Term, ...], row: tuple[str, ...],
               binding: dict[str, str] | None = None,
               ) -> dict[str, str] | None:
    env = dict(binding or {})
    for t, v in zip(args, row):
        key = _slot_key(t, env)
        if key is None:
            if isinstance(t, Constant):
                if t.name != v:
                    return None
                continue
            return None
        if env.get(key, v) != v:
            return None
        env[key] = v
    return env


def _slot_key(t: Term, env: dict[str, str]) -> str | None:
    """A binding key for a parameter or Skolem application, if t is one."""
    if isinstance(t, Parameter):
        return t.name
    if isinstance(t, SkolemApp):
        names = []
        for a in t.args:
            if isinstance(a, Constant):
                names.append(a.name)
            elif isinstance(a, Parameter) and a.name in env:
                names.append(env[a.name])
            else:
                return f"{t.fn}({','.join(str(x) for x in t.args)})"
        return f"{t.fn}({','.join(names)})"
    return None


def _valuations(pattern: list[Atom], pool: tuple[str, ...],
                cap: int):
    """Yield (valuation, insertion set) pairs for the pattern.

    Parameters are valuated first, then any Skolem application left in
    the pattern; the pool is ordered with fresh constants last, so plain
    domain choices come out ahead of invented ones.
    """
    params: list[str] = []
    for atom in pattern:
        for t in atom.args:
            if isinstance(t, Parameter) and t.name not in params:
                params.append(t.name)
            elif isinstance(t, SkolemApp):
                for a in t.args:
                    if isinstance(a, Parameter) and a.name not in params:
                        params.append(a.name)

    count = 0
    for choice in product(pool, repeat=len(params)):
        env = dict(zip(params, choice))
        grounded_atoms = [_resolve_atom(a, env) for a in pattern]
        apps: list[str] = []
        for atom in grounded_atoms:
            for t in atom.args:
                if isinstance(t, SkolemApp):
                    key = _slot_key(t, env)
                    if key not in apps:
                        apps.append(key)
        for app_choice in product(pool, repeat=len(apps)):
            count += 1
            if count > cap:
                raise ResourceLimitError("valuations", cap)
            full = {**env, **dict(zip(apps, app_choice))}
            facts = []
            ok = True
            for atom in grounded_atoms:
                names = []
                for t in atom.args:
                    if isinstance(t, Constant):
                        names.append(t.name)
                    else:
                        key = _slot_key(t, env)
                        if key is None or key not in full:
                            ok = False
                            break
                        names.append(full[key])
                if not ok:
                    break
                facts.append((atom.pred, tuple(names)))
            if not ok:
                continue
            valuation = tuple(sorted(full.items()))
            yield valuation, frozenset(facts)


def _resolve_atom(atom: Atom, env: dict[str, str]) -> Atom:
    args: list[Term] = []
    for t in atom.args:
        if isinstance(t, Parameter) and t.name in env:
            args.append(Constant(env[t.name]))
        elif isinstance(t, SkolemApp):
            inner = tuple(
                Constant(env[a.name])
                if isinstance(a, Parameter) and a.name in env else a
                for a in t.args)
            args.append(SkolemApp(t.fn, inner))
        else:
            args.append(t)
    return Atom(atom.pred, tuple(args))


def _branch_open_wrt(b: Branch, candidate: Instance,
                     pre_binding: dict[str, str]) -> bool:
    """Would the branch's literal part stay open over the candidate?

    Re-runs the data-sensitive closure checks: negated ground atoms must
    be absent, positive ground atoms present, and the positive pattern
    atoms need one joint substitution into the candidate extending the
    chosen valuation.
    """
    patterns: list[Atom] = []
    for f in b.literal_part():
        body = f.body if isinstance(f, Not) else f
        if isinstance(body, Equality):
            continue
        assert isinstance(body, Atom)
        fact = fact_of_atom(body)
        if isinstance(f, Not):
            if fact is not None and fact in candidate.facts:
                return False
            continue
        if fact is not None:
            if fact not in candidate.facts:
                return False
        else:
            patterns.append(body)
    return _joint_match(patterns, candidate, pre_binding)


def _joint_match(patterns: list[Atom], inst: Instance,
                 binding: dict[str, str]) -> bool:
    if not patterns:
        return True
    ordered = sorted(patterns, key=lambda a: len(inst.rows(a.pred)))

    def assign(i: int, env: dict[str, str]) -> bool:
        if i == len(ordered):
            return _binding_consistent(ordered, env)
        atom = ordered[i]
        for row in inst.rows(atom.pred):
            nxt = _unify_row(atom.args, row, env)
            if nxt is not None and assign(i + 1, nxt):
                return True
        return False

    return assign(0, dict(binding))


def _binding_consistent(atoms: list[Atom], env: dict[str, str]) -> bool:
    """Skolem slots must agree once their parameter arguments resolve."""
    resolved: dict[str, str] = {}
    for atom in atoms:
        for t in atom.args:
            if not isinstance(t, SkolemApp):
                continue
            raw = _slot_key(t, {})
            final = _slot_key(t, env)
            value = env.get(raw, env.get(final))
            if value is None:
                return False
            if resolved.setdefault(final, value) != value:
                return False
    return True


# ---------------------------------------------------------------------------
# Tableau-level selection


def subsumption_prune(branches: list[Branch]) -> list[Branch]:
    """Drop data-closed branches that strictly contain another one.

    Containment is over the database-literal part; a branch demanding a
    superset of another branch's conflicts can only lead to larger
    change sets.
    """
    closed = [b for b in branches if b.status != "open"
              and b.is_data_closed()]
    parts = {b.uid: frozenset(b.database_literals()) for b in closed}
    keep = []
    for b in branches:
        if b.uid in parts and any(
                parts[o.uid] < parts[b.uid] for o in closed if o.uid != b.uid):
            continue
        keep.append(b)
    return keep


def openings(t: Tableau, *, subsumption: bool = True,
             max_valuations: int = 100000) -> list[Opening]:
    """Openings of every data-closed branch, deduplicated by change set."""
    if t.instance is None:
        raise ValueError("openings need a stored instance")
    if t.suspended_branches():
        raise ValueError("suspended branches carry unfinished change sets; "
                         "resume them before collecting openings")
    branches = t.branches
    if subsumption:
        branches = subsumption_prune(branches)
    merged: dict[tuple[frozenset[Fact], frozenset[Fact]], Opening] = {}
    order: list[tuple[frozenset[Fact], frozenset[Fact]]] = []
    for b in branches:
        if b.status == "open" or not b.is_data_closed():
            continue
        for o in open_branch(b, t.instance, t.policy,
                             max_valuations=max_valuations):
            key = (o.deletions, o.insertions)
            if key in merged:
                prev = merged[key]
                merged[key] = Opening(
                    branches=prev.branches + o.branches,
                    deletions=prev.deletions, insertions=prev.insertions,
                    pattern=prev.pattern, valuation=prev.valuation,
                    result=prev.result)
            else:
                merged[key] = o
                order.append(key)
    return [merged[k] for k in order]


def minimal_openings(candidates: list[Opening],
                     r: Instance | None = None) -> list[Opening]:
    """Keep the openings whose (L, K) pair is subset-minimal.

    The (L, K) ordering coincides with symmetric-difference closeness to
    the original instance, so survivors are exactly the repairs among the
    candidates.
    """
    keep = []
    for o in candidates:
        dominated = any(
            other.deletions <= o.deletions
            and other.insertions <= o.insertions
            and (other.deletions, other.insertions)
            != (o.deletions, o.insertions)
            for other in candidates)
        if not dominated:
            keep.append(o)
    return keep


# ---------------------------------------------------------------------------
# Groundedness


def grounded(instance: Instance, ics: list[Formula],
             deletions: frozenset[Fact], insertions: frozenset[Fact],
             *, max_atoms: int = 20000) -> bool:
    """Certify a change set: every changed atom must be forced.

    The constraints are restated over a repaired copy of each predicate,
    difference predicates record what was deleted and inserted, and the
    world is closed around the original facts and around every change
    atom not claimed. The change set is grounded when this theory is
    satisfiable and classically entails each claimed change atom.
    """
    arities: dict[str, int] = {}
    for pred, args in instance.facts:
        arities.setdefault(pred, len(args))
    for f in ics:
        arities.update(predicates_of(f))
    for pred, args in list(deletions) + list(insertions):
        arities.setdefault(pred, len(args))

    domain: set[str] = set(instance.active_domain())
    for f in ics:
        domain.update(constants_of(f))
    for _, args in list(deletions) + list(insertions):
        domain.update(args)
    dom = tuple(sorted(domain))

    base, table = _ground_base(tuple(ics), dom,
                               tuple(sorted(arities.items())), max_atoms)
    clauses = list(base)
    for p, arity in sorted(arities.items()):
        for args in product(dom, repeat=arity):
            fact = (p, args)
            orig = table[fact]
            clauses.append(frozenset((orig if fact in instance.facts
                                      else -orig,)))
            if fact not in deletions:
                clauses.append(frozenset((-table[(f"{p} del", args)],)))
            if fact not in insertions:
                clauses.append(frozenset((-table[(f"{p} ins", args)],)))

    if not _satisfiable(clauses):
        return False
    for p, args in sorted(deletions):
        claim = table[(f"{p} del", args)]
        if _satisfiable(clauses + [frozenset((-claim,))]):
            return False
    for p, args in sorted(insertions):
        claim = table[(f"{p} ins", args)]
        if _satisfiable(clauses + [frozenset((-claim,))]):
            return False
    return True


@lru_cache(maxsize=128)
def _ground_base(ics: tuple[Formula, ...], dom: tuple[str, ...],
                 arities: tuple[tuple[str, int], ...], max_atoms: int):
    """The change-independent half of the grounded theory.

    Covers the constraints restated over the repaired predicates plus
    the difference definitions; callers add the per-fact unit clauses.
    Cached because every opening of one instance grounds the same base.
    """
    table: dict[tuple[str, tuple[str, ...]], int] = {}

    def index(pred: str, args: tuple[str, ...]) -> int:
        key = (pred, args)
        if key not in table:
            if len(table) >= max_atoms:
                raise ResourceLimitError("grounding", max_atoms)
            table[key] = len(table) + 1
        return table[key]

    clauses: list[frozenset[int]] = []
    renaming = {p: f"{p} rep" for p, _ in arities}
    for f in ics:
        clauses.extend(ground_clauses(rename_predicates(f, renaming),
                                      dom, index))

    for p, arity in arities:
        for args in product(dom, repeat=arity):
            orig = index(p, args)
            repaired = index(f"{p} rep", args)
            deleted = index(f"{p} del", args)
            inserted = index(f"{p} ins", args)
            # deleted <-> orig & ~repaired
            clauses.append(frozenset((-deleted, orig)))
            clauses.append(frozenset((-deleted, -repaired)))
            clauses.append(frozenset((deleted, -orig, repaired)))
            # inserted <-> repaired & ~orig
            clauses.append(frozenset((-inserted, repaired)))
            clauses.append(frozenset((-inserted, -orig)))
            clauses.append(frozenset((inserted, orig, -repaired)))

    return tuple(clauses), table


def opening_grounded(o: Opening, ics: list[Formula], instance: Instance,
                     **kwargs) -> bool:
    return grounded(instance, ics, o.deletions, o.insertions, **kwargs)


# ---------------------------------------------------------------------------
# The repair pipeline


@dataclass(frozen=True)
class RepairSet:
    consistent: bool
    instances: tuple[Instance, ...]
    openings: tuple[Opening, ...]
    tableau: Tableau

    def facts_sets(self) -> list[frozenset[Fact]]:
        return [inst.facts for inst in self.instances]


def repairs(instance: Instance, ics: list[Formula],
            *, policy: DomainPolicy | None = None, options=None,
            groundedness: bool = True, subsumption: bool = True,
            max_valuations: int = 100000) -> RepairSet:
    """Repairs of the instance, via the tableau and its minimal openings.

    A tableau that stays open certifies consistency and the instance is
    its own single repair. Otherwise candidate openings are collected,
    screened against the constraints, reduced to subset-minimal change
    sets, and optionally certified by the groundedness test.
    """
    policy = policy or DomainPolicy.derive(instance, ics)
    t = build(ics, instance, policy=policy, options=options)
    if not t.closed:
        return RepairSet(consistent=True, instances=(instance,),
                         openings=(), tableau=t)

    t.resume_all()
    candidates = [
        o for o in openings(t, subsumption=subsumption,
                            max_valuations=max_valuations)
        if all(satisfies(o.result, f, policy) for f in ics)
    ]
    chosen = minimal_openings(candidates)
    if groundedness:
        chosen = [o for o in chosen
                  if grounded(instance, ics, o.deletions, o.insertions)]

    by_facts: dict[frozenset[Fact], Instance] = {}
    for o in chosen:
        by_facts.setdefault(o.result.facts, o.result)
    ordered = sorted(by_facts.values(),
                     key=lambda i: (len(i.facts), sorted(i.facts)))
    return RepairSet(consistent=False, instances=tuple(ordered),
                     openings=tuple(chosen), tableau=t)


# ---------------------------------------------------------------------------
# A small refutation engine for the groundedness entailment checks


def _satisfiable(clauses: list[frozenset[int]]) -> bool:
    """Davis-Putnam style search with batched unit propagation."""

    def solve(cls: list[tuple[int, ...]]) -> bool:
        while True:
            fixed: dict[int, bool] = {}
            for c in cls:
                if not c:
                    return False
                if len(c) == 1:
                    lit = c[0]
                    want = lit > 0
                    if fixed.setdefault(abs(lit), want) != want:
                        return False
            if not fixed:
                break
            cls = _assign_all(cls, fixed)
            if cls is None:
                return False
        if not cls:
            return True
        counts: dict[int, int] = {}
        for c in cls:
            for lit in c:
                counts[lit] = counts.get(lit, 0) + 1
        # pure literals are safe to fix straight away
        pure = {abs(lit): lit > 0 for lit in counts if -lit not in counts}
        if pure:
            cls = _assign_all(cls, pure)
            return cls is not None and solve(cls)
        pick = max(counts, key=lambda lit: (counts[lit], -abs(lit), lit))
        left = _assign_all(cls, {abs(pick): pick > 0})
        if left is not None and solve(left):
            return True
        right = _assign_all(cls, {abs(pick): pick < 0})
        return right is not None and solve(right)

    return solve([tuple(c) for c in clauses])


def _assign_all(cls: list[tuple[int, ...]],
                fixed: dict[int, bool]) -> list[tuple[int, ...]] | None:
    out = []
    for c in cls:
        keep = []
        satisfied = False
        for lit in c:
            want = fixed.get(abs(lit))
            if want is None:
                keep.append(lit)
            elif (lit > 0) == want:
                satisfied = True
                break
        if satisfied:
            continue
        if not keep:
            return None
        out.append(tuple(keep))
    return out
