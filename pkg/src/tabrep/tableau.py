"""Analytic tableaux whose closure rules consult a stored instance.

A tableau develops a set of constraints over an optional instance. Branches
grow by the usual expansion rules; a branch dies when what it asserts cannot
hold together with the stored facts. Closure is decided by six checks, in a
fixed order:

  1   an equality between two distinct constants (unique names)
  4   a formula and its negation on the same branch
  5   a negated self-identity
  3   a negated ground literal whose atom is stored
  2a  a ground atom that is not stored
  2b  a positive atom with parameters or Skolem terms that no joint
      substitution can map into the stored facts

Checks 2a, 2b, and 3 make a branch "data closed": the conflict involves the
instance, so editing the instance could reopen it. Checks 1, 4, and 5 hold
no matter what is stored.

Expansion can be throttled in two independent ways. Relevance-based
saturation skips universal instances that contain a disjunct which is bound
to stay true however the instance is repaired, so the skipped instance can
never drive a minimal change. The suspension heuristic parks a branch as
soon as it closes, resuming it only in the one situation where a parked
branch can still matter: some fully developed branch closed on a
complementary pair over an atom the instance does not store.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .formula import (
    Alpha, And, Atom, Beta, Constant, Delta, Equality, Exists, Forall,
    Formula, FormulaError, FreshNames, Gamma, Implies, Not, Or, Parameter,
    SkolemApp, Term, Variable, classify, free_variables, names_in_use,
    parameters_of, skolemize, substitute, substitute_terms,
)
from .instance import (
    DomainPolicy, Fact, Instance, ResourceLimitError, fact_of_atom,
)


class UnsafeConstraintError(FormulaError):
    """A universally quantified variable has no negative literal to guard
    it, so instantiation could not be kept finite."""


# ---------------------------------------------------------------------------
# Closure reasons


@dataclass(frozen=True)
class ClosureReason:
    condition: str = field(init=False, default="")

    def describe(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return f"cond {self.condition}: {self.describe()}"


@dataclass(frozen=True)
class UnaEquality(ClosureReason):
    left: Term = Constant("?")
    right: Term = Constant("?")
    condition: str = field(init=False, default="1")

    def describe(self) -> str:
        return f"{self.left} = {self.right} between distinct constants"


@dataclass(frozen=True)
class Complementary(ClosureReason):
    formula: Formula = None  # type: ignore[assignment]
    condition: str = field(init=False, default="4")

    def describe(self) -> str:
        return f"{self.formula} together with its negation"


@dataclass(frozen=True)
class SelfInequality(ClosureReason):
    term: Term = Constant("?")
    condition: str = field(init=False, default="5")

    def describe(self) -> str:
        return f"~{self.term} = {self.term}"


@dataclass(frozen=True)
class NegatedFact(ClosureReason):
    atom: Atom = None  # type: ignore[assignment]
    condition: str = field(init=False, default="3")

    def describe(self) -> str:
        return f"~{self.atom} against the stored fact"


@dataclass(frozen=True)
class MissingFact(ClosureReason):
    atom: Atom = None  # type: ignore[assignment]
    condition: str = field(init=False, default="2a")

    def describe(self) -> str:
        return f"{self.atom} is not among the stored facts"


@dataclass(frozen=True)
class NoSubstitution(ClosureReason):
    atom: Atom = None  # type: ignore[assignment]
    condition: str = field(init=False, default="2b")

    def describe(self) -> str:
        return f"no σ for {self.atom}"


DATA_CLOSED_CONDITIONS = frozenset({"2a", "2b", "3"})


# ---------------------------------------------------------------------------
# Branches


@dataclass
class Branch:
    uid: int
    instance: Instance | None
    parent: int | None = None
    formulas: list[Formula] = field(default_factory=list)
    present: set[Formula] = field(default_factory=set)
    queue: deque[Formula] = field(default_factory=deque)
    gamma_order: list[Formula] = field(default_factory=list)
    # per gamma formula: how many pool constants, branch parameters and
    # Skolem terms have been consumed; gamma_start skips fully served
    # formulas and falls back to zero whenever the pool grows
    gamma_next: dict[Formula, list[int]] = field(default_factory=dict)
    gamma_start: int = 0
    params: list[str] = field(default_factory=list)
    skolem_pool: list[SkolemApp] = field(default_factory=list)
    eq_units: list[Equality] = field(default_factory=list)
    neg_eq_units: list[Equality] = field(default_factory=list)
    pos_ground: list[Atom] = field(default_factory=list)
    neg_ground: list[Atom] = field(default_factory=list)
    pos_pattern: list[Atom] = field(default_factory=list)
    comp_pairs: list[Formula] = field(default_factory=list)
    rewrite_eqs: list[Equality] = field(default_factory=list)
    status: str = "open"
    reason: ClosureReason | None = None
    closing: bool = False
    children: list[int] = field(default_factory=list)
    events: list[tuple[str, object]] = field(default_factory=list)

    def literal_part(self) -> tuple[Formula, ...]:
        """Literals and equalities of the branch, in insertion order."""
        out = []
        for f in self.formulas:
            g = f.body if isinstance(f, Not) else f
            if isinstance(g, (Atom, Equality)):
                out.append(f)
        return tuple(out)

    def database_literals(self) -> tuple[Formula, ...]:
        """The literal part without built-in equalities."""
        out = []
        for f in self.literal_part():
            g = f.body if isinstance(f, Not) else f
            if isinstance(g, Atom):
                out.append(f)
        return tuple(out)

    def is_data_closed(self) -> bool:
        return (self.status in ("closed", "suspended")
                and self.reason is not None
                and self.reason.condition in DATA_CLOSED_CONDITIONS)

    def spawn(self, uid: int) -> "Branch":
        return Branch(
            uid=uid,
            instance=self.instance,
            parent=self.uid,
            formulas=list(self.formulas),
            present=set(self.present),
            queue=deque(self.queue),
            gamma_order=list(self.gamma_order),
            gamma_next={g: list(c) for g, c in self.gamma_next.items()},
            gamma_start=self.gamma_start,
            params=list(self.params),
            skolem_pool=list(self.skolem_pool),
            eq_units=list(self.eq_units),
            neg_eq_units=list(self.neg_eq_units),
            pos_ground=list(self.pos_ground),
            neg_ground=list(self.neg_ground),
            pos_pattern=list(self.pos_pattern),
            comp_pairs=list(self.comp_pairs),
            rewrite_eqs=list(self.rewrite_eqs),
            status=self.status,
            reason=self.reason,
            closing=self.closing,
        )


@dataclass(frozen=True)
class BuildOptions:
    """Knobs for tableau development.

    saturation: "relevant" also skips universal instances with a disjunct
    that stays true under any repair; "premise" skips only instances whose
    negative-literal disjunct can never become false, which reproduces
    textbook-style trees; "exhaustive" skips nothing.
    """

    saturation: str = "relevant"
    suspend: bool = True
    max_branches: int = 20000
    max_formulas: int = 10000

    def __post_init__(self) -> None:
        if self.saturation not in ("relevant", "premise", "exhaustive"):
            raise ValueError(f"unknown saturation mode {self.saturation!r}")


class Tableau:
    """A developed tableau. Use :func:`build` or :func:`combine`."""

    def __init__(self, instance: Instance | None, policy: DomainPolicy,
                 options: BuildOptions, fresh: FreshNames,
                 insertable: frozenset[str], deletable: frozenset[str]):
        self.instance = instance
        self.policy = policy
        self.options = options
        self.fresh = fresh
        self.insertable = insertable
        self.deletable = deletable
        self.roots: list[int] = []
        self.nodes: dict[int, Branch] = {}
        self.branches: list[Branch] = []
        self.nodes_developed = 0
        self.resumed = False
        self._next_uid = 0
        self._suspend_on = options.suspend
        self._const_pools: dict[frozenset[Fact] | None, tuple[Term, ...]] = {}

    # -- public views --------------------------------------------------

    @property
    def closed(self) -> bool:
        return all(b.status != "open" for b in self.branches)

    def open_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.status == "open"]

    def closed_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.status == "closed"]

    def suspended_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.status == "suspended"]

    # -- construction ---------------------------------------------------

    def _new_branch(self, instance: Instance | None,
                    parent: Branch | None = None) -> Branch:
        if len(self.nodes) >= self.options.max_branches:
            raise ResourceLimitError("branches", self.options.max_branches)
        uid = self._next_uid
        self._next_uid += 1
        branch = parent.spawn(uid) if parent else Branch(uid, instance)
        self.nodes[uid] = branch
        if parent:
            parent.children.append(uid)
        else:
            self.roots.append(uid)
        return branch

    def _const_pool(self, instance: Instance | None) -> tuple[Term, ...]:
        key = instance.facts if instance is not None else None
        pool = self._const_pools.get(key)
        if pool is None:
            names = set(self.policy.extras)
            if instance is not None:
                names |= instance.active_domain()
            pool = tuple(Constant(n) for n in sorted(names))
            self._const_pools[key] = pool
        return pool

    # -- adding formulas -------------------------------------------------

    def _add(self, b: Branch, f: Formula) -> bool:
        if f in b.present:
            return False
        if len(b.formulas) >= self.options.max_formulas:
            raise ResourceLimitError("formulas", self.options.max_formulas)
        b.formulas.append(f)
        b.present.add(f)
        b.events.append(("add", f))
        self.nodes_developed += 1
        for name in sorted(parameters_of(f)):
            if name not in b.params:
                b.params.append(name)
                b.gamma_start = 0
        self._register_skolems(b, f)
        if Not(f) in b.present:
            b.comp_pairs.append(f)
        elif isinstance(f, Not) and f.body in b.present:
            b.comp_pairs.append(f.body)
        if isinstance(f, (Atom, Equality)) or (
                isinstance(f, Not) and isinstance(f.body, (Atom, Equality))):
            self._register_literal(b, f)
        else:
            b.queue.append(f)
        if not b.closing:
            reason = self._closure_scan(b)
            if reason is not None:
                b.closing = True
                b.reason = reason
                b.events.append(("closure", reason))
        return True

    def _register_skolems(self, b: Branch, f: Formula) -> None:
        for t in sorted(_ground_skolem_apps(f), key=str):
            if t not in b.skolem_pool and _term_depth(t) <= \
                    self.policy.term_depth:
                b.skolem_pool.append(t)
                b.gamma_start = 0

    def _register_literal(self, b: Branch, f: Formula) -> None:
        positive = f
        negated = False
        if isinstance(f, Not):
            positive = f.body
            negated = True
        if isinstance(positive, Equality):
            if negated:
                b.neg_eq_units.append(positive)
            else:
                b.eq_units.append(positive)
                self._paramodulate(b, positive)
        else:
            assert isinstance(positive, Atom)
            ground = fact_of_atom(positive) is not None
            if negated:
                if ground:
                    b.neg_ground.append(positive)
            elif ground:
                b.pos_ground.append(positive)
            else:
                b.pos_pattern.append(positive)
            self._apply_rewrites(b, f)

    def _paramodulate(self, b: Branch, eq: Equality) -> None:
        """Ground rewriting from an equality with an unknown side.

        Occurrences of the parameter or Skolem side are replaced by the
        other side throughout the branch literals; constants are never
        rewritten away, so rewriting terminates.
        """
        src, dst = eq.left, eq.right
        if isinstance(src, Constant):
            src, dst = dst, src
        if isinstance(src, Constant) or src == dst:
            return
        if eq not in b.rewrite_eqs:
            b.rewrite_eqs.append(eq)
        for g in list(b.literal_part()):
            rewritten = substitute_terms(g, {src: dst})
            if rewritten != g:
                self._add(b, rewritten)

    def _apply_rewrites(self, b: Branch, f: Formula) -> None:
        for eq in list(b.rewrite_eqs):
            src, dst = eq.left, eq.right
            if isinstance(src, Constant):
                src, dst = dst, src
            rewritten = substitute_terms(f, {src: dst})
            if rewritten != f:
                self._add(b, rewritten)

    # -- closure -----------------------------------------------------------

    def _closure_scan(self, b: Branch) -> ClosureReason | None:
        for eq in b.eq_units:
            if (isinstance(eq.left, Constant) and isinstance(eq.right,
                                                             Constant)
                    and eq.left.name != eq.right.name):
                return UnaEquality(eq.left, eq.right)
        if b.comp_pairs:
            return Complementary(b.comp_pairs[0])
        for eq in b.neg_eq_units:
            if eq.left == eq.right:
                return SelfInequality(eq.left)
        if b.instance is not None:
            inst = b.instance
            for atom in b.neg_ground:
                key = fact_of_atom(atom)
                if key is not None and key in inst.facts:
                    return NegatedFact(atom)
            for atom in b.pos_ground:
                key = fact_of_atom(atom)
                if key is not None and key not in inst.facts:
                    return MissingFact(atom)
            if b.pos_pattern:
                culprit = _unmatchable_pattern(b.pos_pattern, inst)
                if culprit is not None:
                    return NoSubstitution(culprit)
        return None

    # -- gamma instantiation ------------------------------------------------

    def _next_gamma(self, b: Branch, commit: bool) -> bool:
        consts = self._const_pool(b.instance)
        segments = (consts, b.params, b.skolem_pool)
        while b.gamma_start < len(b.gamma_order):
            g = b.gamma_order[b.gamma_start]
            cursor = b.gamma_next[g]
            rule = classify(g)
            assert isinstance(rule, Gamma)
            while True:
                for s, seg in enumerate(segments):
                    if cursor[s] < len(seg):
                        t = seg[cursor[s]]
                        if s == 1:
                            t = Parameter(t)
                        break
                else:
                    break  # this formula is served for the current pool
                inst = self._instantiate(rule, t)
                if inst is None or inst in b.present:
                    cursor[s] += 1
                    continue
                if self._skippable(b, inst):
                    cursor[s] += 1
                    b.events.append(("skip", inst))
                    continue
                if commit:
                    cursor[s] += 1
                    self._add(b, inst)
                return True
            b.gamma_start += 1
        return False

    def _instantiate(self, rule: Gamma, t: Term) -> Formula | None:
        try:
            inst = substitute(rule.matrix, {rule.var: t})
        except FormulaError:
            return None
        if _max_skolem_depth(inst) > self.policy.term_depth:
            return None
        return inst

    def _skippable(self, b: Branch, inst: Formula) -> bool:
        """Will every branch extension through this instance be idle?

        Holds when some disjunct is already settled in the instance's
        favour. Quantifier prefixes are peeled first: a partially
        instantiated formula whose matrix carries a settled ground
        disjunct can only produce skippable completions, so the whole
        subtree is dropped at once. Disjuncts still holding variables
        are never judged.
        """
        mode = self.options.saturation
        if mode == "exhaustive" or b.instance is None:
            return False
        matrix = inst
        while True:
            rule = classify(matrix)
            if isinstance(rule, Gamma):
                matrix = rule.matrix
            else:
                break
        for d in _disjuncts(matrix):
            if self._irrevocably_true(b.instance, d, mode):
                return True
        return False

    def _irrevocably_true(self, inst: Instance, lit: Formula,
                          mode: str) -> bool:
        if isinstance(lit, Not) and isinstance(lit.body, Atom):
            key = fact_of_atom(lit.body)
            return (key is not None and key not in inst.facts
                    and lit.body.pred not in self.insertable)
        if mode != "relevant":
            return False
        if isinstance(lit, Atom):
            key = fact_of_atom(lit)
            return (key is not None and key in inst.facts
                    and lit.pred not in self.deletable)
        if isinstance(lit, Equality):
            return lit.left == lit.right
        if isinstance(lit, Not) and isinstance(lit.body, Equality):
            eq = lit.body
            return (isinstance(eq.left, Constant)
                    and isinstance(eq.right, Constant)
                    and eq.left.name != eq.right.name)
        return False

    # -- the development loop ------------------------------------------------

    def _develop(self, worklist: list[Branch]) -> None:
        stack = list(reversed(worklist))
        while stack:
            b = stack.pop()
            outcome = self._step(b)
            if outcome is None:
                self.branches.append(b)
            elif isinstance(outcome, Branch):
                stack.append(outcome)
            else:
                stack.extend(reversed(outcome))

    def _step(self, b: Branch) -> "Branch | list[Branch] | None":
        if b.closing and self._suspend_on and b.status == "open":
            if b.queue or self._next_gamma(b, commit=False):
                b.status = "suspended"
                b.events.append(("suspended", b.reason))
            else:
                b.reason = self._closure_scan(b)
                b.status = "closed"
                b.events.append(("closed", b.reason))
            return None
        if b.status in ("closed", "suspended"):
            return None
        if b.queue:
            f = b.queue.popleft()
            rule = classify(f)
            if isinstance(rule, Alpha):
                for part in rule.parts:
                    self._add(b, part)
                return b
            if isinstance(rule, Beta):
                return self._split(b, rule)
            if isinstance(rule, Gamma):
                if f not in b.gamma_next:
                    b.gamma_order.append(f)
                    b.gamma_next[f] = [0, 0, 0]
                return b
            if isinstance(rule, Delta):
                name = self.fresh.parameter()
                inst = substitute(rule.matrix, {rule.var: Parameter(name)})
                self._add(b, inst)
                return b
            raise AssertionError(f"unqueued literal {f}")
        if self._next_gamma(b, commit=True):
            return b
        # saturated
        if b.closing:
            b.reason = self._closure_scan(b)
            b.status = "closed"
            b.events.append(("closed", b.reason))
        return None

    def _split(self, b: Branch, rule: Beta) -> "Branch | list[Branch]":
        parts = []
        for part in rule.parts:
            if part in b.present:
                return b  # the disjunction already holds on this branch
            if part not in parts:
                parts.append(part)
        if len(parts) == 1:
            self._add(b, parts[0])
            return b
        children = []
        for part in parts:
            child = self._new_branch(b.instance, parent=b)
            self._add(child, part)
            children.append(child)
        return children

    # -- suspension follow-up -------------------------------------------------

    def _resume_if_needed(self) -> None:
        if not self.suspended_branches():
            return
        if not any(self._is_resume_trigger(b) for b in self.branches):
            return
        self.resume_all()

    def resume_all(self) -> None:
        """Saturate every suspended branch.

        A suspended branch carries a sound closure verdict but an
        unfinished formula set, so anything reading change sets off the
        branches (the openings pipeline) must saturate first. Further
        development never reopens a branch: the conflict that caused the
        suspension stays on every descendant.
        """
        suspended = self.suspended_branches()
        if not suspended:
            return
        self.resumed = True
        self._suspend_on = False
        self.branches = [b for b in self.branches if b.status != "suspended"]
        for b in suspended:
            b.status = "open"
            b.events.append(("resumed", None))
        self._develop(suspended)

    def _is_resume_trigger(self, b: Branch) -> bool:
        if b.status != "closed":
            return False
        for f in b.comp_pairs:
            if isinstance(f, Atom):
                key = fact_of_atom(f)
                if key is None or b.instance is None \
                        or key not in b.instance.facts:
                    return True
        return False


# ---------------------------------------------------------------------------
# Pattern matching for condition 2b


def _pattern_slots(atom: Atom) -> list[Term]:
    slots = []
    for t in atom.args:
        if isinstance(t, (Parameter, SkolemApp)) and t not in slots:
            slots.append(t)
    return slots


def _atom_candidates(atom: Atom,
                     inst: Instance) -> list[dict[Term, str]]:
    rows = inst.rows(atom.pred)
    out = []
    for row in sorted(rows):
        binding: dict[Term, str] = {}
        ok = True
        for t, value in zip(atom.args, row):
            if isinstance(t, Constant):
                if t.name != value:
                    ok = False
                    break
            else:
                if binding.get(t, value) != value:
                    ok = False
                    break
                binding[t] = value
        if ok:
            out.append(binding)
    return out


def _unmatchable_pattern(atoms: list[Atom], inst: Instance) -> Atom | None:
    """The first pattern atom no joint substitution can store, if any.

    Every parameter and Skolem occurrence is a slot of the joint
    assignment; a candidate assignment is rejected if two Skolem slots
    that become the same term under it disagree on their values.
    """
    candidates = [(_atom_candidates(a, inst), a) for a in atoms]
    for cands, atom in candidates:
        if not cands:
            return atom
    order = sorted(range(len(candidates)),
                   key=lambda i: (len(candidates[i][0]), i))

    def consistent(assign: dict[Term, str]) -> bool:
        params = {t: Constant(v) for t, v in assign.items()
                  if isinstance(t, Parameter)}
        merged: dict[SkolemApp, str] = {}
        for t, v in assign.items():
            if isinstance(t, SkolemApp):
                resolved = SkolemApp(t.fn, tuple(
                    params.get(a, a) for a in t.args))
                if merged.get(resolved, v) != v:
                    return False
                merged[resolved] = v
        return True

    def search(i: int, assign: dict[Term, str]) -> bool:
        if i == len(order):
            return consistent(assign)
        cands, _ = candidates[order[i]]
        for binding in cands:
            if any(assign.get(t, v) != v for t, v in binding.items()):
                continue
            if search(i + 1, {**assign, **binding}):
                return True
        return False

    if search(0, {}):
        return None
    return atoms[0]


# ---------------------------------------------------------------------------
# Helpers over formulas


def _disjuncts(f: Formula) -> list[Formula]:
    rule = classify(f)
    if isinstance(rule, Beta):
        out = []
        for part in rule.parts:
            out.extend(_disjuncts(part))
        return out
    return [f]


def _ground_skolem_apps(f: Formula) -> set[SkolemApp]:
    out = set()
    for atom_args in _literal_term_groups(f):
        for t in atom_args:
            if isinstance(t, SkolemApp) and not _term_vars_present(t):
                out.add(t)
    return out


def _literal_term_groups(f: Formula):
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Atom):
            yield g.args
        elif isinstance(g, Equality):
            yield (g.left, g.right)
        elif isinstance(g, Not):
            stack.append(g.body)
        elif isinstance(g, (And, Or, Implies)):
            stack.extend((g.left, g.right))
        elif isinstance(g, (Forall, Exists)):
            stack.append(g.body)


def _term_vars_present(t: Term) -> bool:
    if isinstance(t, Variable):
        return True
    if isinstance(t, SkolemApp):
        return any(_term_vars_present(a) for a in t.args)
    return False


def _term_depth(t: Term) -> int:
    if isinstance(t, SkolemApp):
        return 1 + max((_term_depth(a) for a in t.args), default=0)
    return 0


def _max_skolem_depth(f: Formula) -> int:
    depth = 0
    for group in _literal_term_groups(f):
        for t in group:
            depth = max(depth, _term_depth(t))
    return depth


def literal_polarities(f: Formula, positive: bool = True):
    """Yield (predicate, polarity) for every literal occurrence."""
    if isinstance(f, Atom):
        yield (f.pred, positive)
    elif isinstance(f, Equality):
        return
    elif isinstance(f, Not):
        yield from literal_polarities(f.body, not positive)
    elif isinstance(f, (And, Or)):
        yield from literal_polarities(f.left, positive)
        yield from literal_polarities(f.right, positive)
    elif isinstance(f, Implies):
        yield from literal_polarities(f.left, not positive)
        yield from literal_polarities(f.right, positive)
    elif isinstance(f, (Forall, Exists)):
        yield from literal_polarities(f.body, positive)


def occurrence_sets(ics) -> tuple[frozenset[str], frozenset[str]]:
    """Predicates occurring positively (insertable) and negatively
    (deletable) across the constraints."""
    insertable = set()
    deletable = set()
    for f in ics:
        for pred, positive in literal_polarities(f):
            (insertable if positive else deletable).add(pred)
    return frozenset(insertable), frozenset(deletable)


def check_safety(f: Formula) -> None:
    """Reject constraints whose universal variables lack a negative guard.

    Every variable with universal force must occur in at least one literal
    that is negative in negation normal form; otherwise no finite
    instantiation policy is faithful.
    """

    def neg_vars(g: Formula, positive: bool) -> set[str]:
        if isinstance(g, Atom):
            if positive:
                return set()
            out = set()
            for t in g.args:
                if isinstance(t, Variable):
                    out.add(t.name)
            return out
        if isinstance(g, Equality):
            return set()
        if isinstance(g, Not):
            return neg_vars(g.body, not positive)
        if isinstance(g, (And, Or)):
            return neg_vars(g.left, positive) | neg_vars(g.right, positive)
        if isinstance(g, Implies):
            return (neg_vars(g.left, not positive)
                    | neg_vars(g.right, positive))
        if isinstance(g, (Forall, Exists)):
            return neg_vars(g.body, positive)
        return set()

    def walk(g: Formula, positive: bool) -> None:
        if isinstance(g, Not):
            walk(g.body, not positive)
        elif isinstance(g, (And, Or)):
            walk(g.left, positive)
            walk(g.right, positive)
        elif isinstance(g, Implies):
            walk(g.left, not positive)
            walk(g.right, positive)
        elif isinstance(g, (Forall, Exists)):
            universal = positive if isinstance(g, Forall) else not positive
            if universal and g.var not in neg_vars(g.body, positive):
                raise UnsafeConstraintError(
                    f"variable {g.var} of {f} occurs in no negative "
                    "literal, so the constraint is unsafe")
            walk(g.body, positive)

    if free_variables(f):
        raise UnsafeConstraintError(
            f"constraint {f} has free variables "
            f"{', '.join(free_variables(f))}")
    walk(f, True)


# ---------------------------------------------------------------------------
# Entry points


def build(ics, instance: Instance | None = None,
          policy: DomainPolicy | None = None,
          options: BuildOptions | None = None, *,
          safety: bool = True,
          fresh: FreshNames | None = None) -> Tableau:
    """Develop the tableau for the given constraints over the instance.

    Constraints are Skolemized on entry; parameters already present (for
    example in a negated query) are kept as they are.
    """
    ics = list(ics)
    options = options or BuildOptions()
    if instance is None and policy is None:
        policy = DomainPolicy()
    elif policy is None:
        policy = DomainPolicy.derive(instance, ics)
    if safety:
        for f in ics:
            check_safety(f)
    if fresh is None:
        used = names_in_use(ics, extra=_policy_names(policy, instance))
        fresh = FreshNames(used)
    skolemized = [skolemize(f, fresh) for f in ics]
    insertable, deletable = occurrence_sets(ics)
    t = Tableau(instance, policy, options, fresh, insertable, deletable)
    root = t._new_branch(instance)
    for f in skolemized:
        t._add(root, f)
    t._develop([root])
    if options.suspend:
        t._resume_if_needed()
    return t


def _policy_names(policy: DomainPolicy, instance: Instance | None):
    names = set(policy.extras) | set(policy.fresh)
    if instance is not None:
        names |= instance.active_domain()
        names |= {pred for pred, _ in instance.facts}
    return names


def combine(left: Tableau, right: Tableau,
            options: BuildOptions | None = None) -> Tableau:
    """Graft two tableaux: every branch of one against every branch of the
    other, re-saturated over the merged material.

    At most one side of each pair may carry an instance; a formula-only
    side adopts the other side's instance.
    """
    options = options or left.options
    policy = _merge_policies(left.policy, right.policy)
    used = set()
    for t in (left, right):
        for b in t.branches:
            used |= names_in_use(b.formulas)
    used |= set(policy.extras) | set(policy.fresh)
    fresh = FreshNames(used)
    insertable = left.insertable | right.insertable
    deletable = left.deletable | right.deletable
    out = Tableau(left.instance if left.instance is not None
                  else right.instance, policy, options, fresh,
                  insertable, deletable)
    merged: list[Branch] = []
    for bl in left.branches:
        for br in right.branches:
            if bl.instance is not None and br.instance is not None \
                    and bl.instance != br.instance:
                raise ValueError("cannot combine branches with two "
                                 "different instances")
            inst = bl.instance if bl.instance is not None else br.instance
            nb = out._new_branch(inst)
            for f in bl.formulas + br.formulas:
                out._add(nb, f)
            merged.append(nb)
    out._develop(merged)
    if options.suspend:
        out._resume_if_needed()
    return out


def _merge_policies(a: DomainPolicy, b: DomainPolicy) -> DomainPolicy:
    extras = tuple(sorted(set(a.extras) | set(b.extras)))
    fresh = a.fresh + tuple(c for c in b.fresh if c not in a.fresh)
    return DomainPolicy(extras=extras, fresh=fresh,
                        term_depth=max(a.term_depth, b.term_depth))


# ---------------------------------------------------------------------------
# Rendering


def render_tree(t: Tableau) -> str:
    """A plain-text picture of the development, one line per event."""
    lines: list[str] = []

    def emit(uid: int, indent: str) -> None:
        b = t.nodes[uid]
        for kind, payload in b.events:
            if kind == "add":
                lines.append(f"{indent}{payload}")
            elif kind == "skip":
                lines.append(f"{indent}  (skipped {payload})")
            elif kind == "closure":
                pass
            elif kind == "closed":
                lines.append(f"{indent}  × [{payload}]")
            elif kind == "suspended":
                lines.append(f"{indent}  ⊣ suspended [{payload}]")
            elif kind == "resumed":
                lines.append(f"{indent}  (resumed)")
        if b.status == "open" and not b.children:
            lines.append(f"{indent}  ○ open")
        for child in b.children:
            lines.append(f"{indent}├─ branch {child}")
            emit(child, indent + "│  ")

    for root in t.roots:
        lines.append(f"branch {root}")
        emit(root, "")
    return "\n".join(lines) + "\n"
