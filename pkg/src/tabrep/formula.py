"""First-order formulas: terms, connectives, parsing, printing, Skolemization.

The term language has four kinds of leaves. Variables and constants come from
the input syntax; parameters and Skolem applications are introduced internally
when existential quantifiers are eliminated, and never appear in stored facts.

The concrete syntax accepted by :func:`parse_formula`:

    formula   := implies
    implies   := or ('->' implies)?              right associative
    or        := and ('|' and)*
    and       := unary ('&' unary)*
    unary     := '~' unary | quantified | primary
    quantified:= ('forall' | 'exists') vars '.' formula
    primary   := name '(' term (',' term)* ')'   predicate atom
               | term '=' term
               | '(' formula ')'
    term      := name | number | quoted

A name directly followed by '(' is a predicate, whatever its case. A bare
name is a variable when it starts with an uppercase letter and a constant
otherwise. Numbers and single-quoted strings are constants. A quantifier
takes the longest formula to its right, so `forall X. p(X) -> q(X)` binds X
in the whole implication.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping


class FormulaError(ValueError):
    """Problem with a formula, positioned when it came from source text."""

    def __init__(self, message: str, *, line: int | None = None,
                 column: int | None = None, source: str | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.source = source

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        where = self.source or "<input>"
        return f"{where}:{self.line}:{self.column}: {self.message}"


class ParseError(FormulaError):
    pass


class SubstitutionError(FormulaError):
    pass


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class Variable(Term):
    name: str

    def __str__(self) -> str:
        return self.name


_BARE_CONSTANT = re.compile(r"[a-z_][A-Za-z0-9_]*\Z|[0-9]+\Z")


@dataclass(frozen=True)
class Constant(Term):
    name: str

    def __str__(self) -> str:
        if _BARE_CONSTANT.match(self.name):
            return self.name
        return f"'{self.name}'"


@dataclass(frozen=True)
class Parameter(Term):
    """A Skolem constant standing for an unknown individual."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SkolemApp(Term):
    """A Skolem function applied to the universals it depends on.

    Arguments are variables until instantiation replaces them by constants
    or parameters. Nested Skolem applications are not representable; the
    expansion machinery refuses to build them.
    """

    fn: str
    args: tuple[Term, ...]

    def __post_init__(self) -> None:
        for a in self.args:
            if isinstance(a, SkolemApp):
                raise FormulaError(f"nested Skolem term under {self.fn}")

    def __str__(self) -> str:
        inner = ",".join(str(a) for a in self.args)
        return f"{self.fn}({inner})"


# ---------------------------------------------------------------------------
# Formulas


@dataclass(frozen=True)
class Formula:
    def __str__(self) -> str:
        return self._fmt(0)

    def _fmt(self, ctx: int) -> str:
        raise NotImplementedError


def _wrap(text: str, own: int, ctx: int) -> str:
    return f"({text})" if own < ctx else text


@dataclass(frozen=True)
class Atom(Formula):
    pred: str
    args: tuple[Term, ...]

    def _fmt(self, ctx: int) -> str:
        inner = ",".join(str(a) for a in self.args)
        return f"{self.pred}({inner})"


@dataclass(frozen=True)
class Equality(Formula):
    left: Term
    right: Term

    def _fmt(self, ctx: int) -> str:
        return f"{self.left} = {self.right}"


@dataclass(frozen=True)
class Not(Formula):
    body: Formula

    def _fmt(self, ctx: int) -> str:
        return _wrap("~" + self.body._fmt(4), 4, ctx)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def _fmt(self, ctx: int) -> str:
        return _wrap(self.left._fmt(3) + " & " + self.right._fmt(4), 3, ctx)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def _fmt(self, ctx: int) -> str:
        return _wrap(self.left._fmt(2) + " | " + self.right._fmt(3), 2, ctx)


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula

    def _fmt(self, ctx: int) -> str:
        return _wrap(self.left._fmt(2) + " -> " + self.right._fmt(1), 1, ctx)


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula

    def _fmt(self, ctx: int) -> str:
        return _quantifier_fmt(self, "forall", ctx)


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula

    def _fmt(self, ctx: int) -> str:
        return _quantifier_fmt(self, "exists", ctx)


def _quantifier_fmt(f: Forall | Exists, word: str, ctx: int) -> str:
    names = [f.var]
    body: Formula = f.body
    while isinstance(body, type(f)):
        names.append(body.var)
        body = body.body
    text = f"{word} {', '.join(names)}. {body._fmt(0)}"
    return _wrap(text, 1, ctx)


TRUE_SENTINEL = None  # the language has no 0-ary connectives on purpose


# ---------------------------------------------------------------------------
# Rule classification


@dataclass(frozen=True)
class Alpha:
    parts: tuple[Formula, Formula]


@dataclass(frozen=True)
class Beta:
    parts: tuple[Formula, Formula]


@dataclass(frozen=True)
class Gamma:
    var: str
    matrix: Formula


@dataclass(frozen=True)
class Delta:
    var: str
    matrix: Formula


@dataclass(frozen=True)
class LiteralOrEquality:
    formula: Formula


RuleClass = Alpha | Beta | Gamma | Delta | LiteralOrEquality


def classify(f: Formula) -> RuleClass:
    """Assign the expansion rule for a closed formula.

    Double negations count as conjunctive with both components equal, so a
    single pass strips them without a dedicated rule.
    """
    if isinstance(f, (Atom, Equality)):
        return LiteralOrEquality(f)
    if isinstance(f, And):
        return Alpha((f.left, f.right))
    if isinstance(f, Or):
        return Beta((f.left, f.right))
    if isinstance(f, Implies):
        return Beta((Not(f.left), f.right))
    if isinstance(f, Forall):
        return Gamma(f.var, f.body)
    if isinstance(f, Exists):
        return Delta(f.var, f.body)
    if isinstance(f, Not):
        g = f.body
        if isinstance(g, (Atom, Equality)):
            return LiteralOrEquality(f)
        if isinstance(g, Not):
            return Alpha((g.body, g.body))
        if isinstance(g, And):
            return Beta((Not(g.left), Not(g.right)))
        if isinstance(g, Or):
            return Alpha((Not(g.left), Not(g.right)))
        if isinstance(g, Implies):
            return Alpha((g.left, Not(g.right)))
        if isinstance(g, Forall):
            return Delta(g.var, Not(g.body))
        if isinstance(g, Exists):
            return Gamma(g.var, Not(g.body))
    raise FormulaError(f"cannot classify {f!r}")


def is_literal(f: Formula) -> bool:
    if isinstance(f, Not):
        f = f.body
    return isinstance(f, (Atom, Equality))


# ---------------------------------------------------------------------------
# Walks


def iter_terms(f: Formula) -> Iterator[Term]:
    """Every term occurrence, Skolem arguments included."""
    stack: list[Formula] = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Atom):
            for a in g.args:
                yield a
                if isinstance(a, SkolemApp):
                    yield from a.args
        elif isinstance(g, Equality):
            for a in (g.left, g.right):
                yield a
                if isinstance(a, SkolemApp):
                    yield from a.args
        elif isinstance(g, Not):
            stack.append(g.body)
        elif isinstance(g, (And, Or, Implies)):
            stack.append(g.left)
            stack.append(g.right)
        elif isinstance(g, (Forall, Exists)):
            stack.append(g.body)


def constants_of(f: Formula) -> frozenset[str]:
    return frozenset(t.name for t in iter_terms(f) if isinstance(t, Constant))


def parameters_of(f: Formula) -> frozenset[str]:
    return frozenset(t.name for t in iter_terms(f) if isinstance(t, Parameter))


def skolem_apps_of(f: Formula) -> frozenset[SkolemApp]:
    return frozenset(t for t in iter_terms(f) if isinstance(t, SkolemApp))


def predicates_of(f: Formula) -> dict[str, int]:
    out: dict[str, int] = {}
    stack: list[Formula] = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Atom):
            out[g.pred] = len(g.args)
        elif isinstance(g, Not):
            stack.append(g.body)
        elif isinstance(g, (And, Or, Implies)):
            stack.append(g.left)
            stack.append(g.right)
        elif isinstance(g, (Forall, Exists)):
            stack.append(g.body)
    return out


def free_variables(f: Formula) -> tuple[str, ...]:
    """Free variable names in first-occurrence order."""
    seen: list[str] = []

    def walk(g: Formula, bound: frozenset[str]) -> None:
        if isinstance(g, Atom):
            for t in g.args:
                _collect_vars(t, bound, seen)
        elif isinstance(g, Equality):
            _collect_vars(g.left, bound, seen)
            _collect_vars(g.right, bound, seen)
        elif isinstance(g, Not):
            walk(g.body, bound)
        elif isinstance(g, (And, Or, Implies)):
            walk(g.left, bound)
            walk(g.right, bound)
        elif isinstance(g, (Forall, Exists)):
            walk(g.body, bound | {g.var})

    walk(f, frozenset())
    return tuple(seen)


def _collect_vars(t: Term, bound: frozenset[str], seen: list[str]) -> None:
    if isinstance(t, Variable):
        if t.name not in bound and t.name not in seen:
            seen.append(t.name)
    elif isinstance(t, SkolemApp):
        for a in t.args:
            _collect_vars(a, bound, seen)


def is_sentence(f: Formula) -> bool:
    return not free_variables(f)


# ---------------------------------------------------------------------------
# Substitution


def _term_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Variable):
        return frozenset((t.name,))
    if isinstance(t, SkolemApp):
        out: frozenset[str] = frozenset()
        for a in t.args:
            out |= _term_vars(a)
        return out
    return frozenset()


def substitute_terms(f: Formula, tmap: Mapping[Term, Term]) -> Formula:
    """Replace term occurrences structurally.

    Keys may be variables, parameters, or ground Skolem applications. A
    replacement that would smuggle a variable under a quantifier binding the
    same name is rejected rather than silently captured.
    """

    def term(t: Term) -> Term:
        if t in tmap:
            return tmap[t]
        if isinstance(t, SkolemApp):
            new_args = tuple(term(a) for a in t.args)
            if new_args != t.args:
                return SkolemApp(t.fn, new_args)
        return t

    def walk(g: Formula, bound: frozenset[str]) -> Formula:
        if isinstance(g, Atom):
            return Atom(g.pred, tuple(term(a) for a in g.args))
        if isinstance(g, Equality):
            return Equality(term(g.left), term(g.right))
        if isinstance(g, Not):
            return Not(walk(g.body, bound))
        if isinstance(g, And):
            return And(walk(g.left, bound), walk(g.right, bound))
        if isinstance(g, Or):
            return Or(walk(g.left, bound), walk(g.right, bound))
        if isinstance(g, Implies):
            return Implies(walk(g.left, bound), walk(g.right, bound))
        if isinstance(g, (Forall, Exists)):
            inner = {k: v for k, v in tmap.items()
                     if not (isinstance(k, Variable) and k.name == g.var)}
            for k, v in inner.items():
                if g.var in _term_vars(v):
                    raise SubstitutionError(
                        f"substituting {k} by {v} would capture {g.var}")
            body = substitute_terms(g.body, inner)
            return type(g)(g.var, body)
        raise FormulaError(f"cannot substitute in {g!r}")

    return walk(f, frozenset())


def substitute(f: Formula, mapping: Mapping[str, Term]) -> Formula:
    """Replace free variables and parameters by name."""
    tmap: dict[Term, Term] = {}
    for name, repl in mapping.items():
        tmap[Variable(name)] = repl
        tmap[Parameter(name)] = repl
    return substitute_terms(f, tmap)


def negate(f: Formula) -> Formula:
    return Not(f)


def rename_predicates(f: Formula, mapping: Mapping[str, str]) -> Formula:
    if isinstance(f, Atom):
        return Atom(mapping.get(f.pred, f.pred), f.args)
    if isinstance(f, Equality):
        return f
    if isinstance(f, Not):
        return Not(rename_predicates(f.body, mapping))
    if isinstance(f, (And, Or, Implies)):
        return type(f)(rename_predicates(f.left, mapping),
                       rename_predicates(f.right, mapping))
    if isinstance(f, (Forall, Exists)):
        return type(f)(f.var, rename_predicates(f.body, mapping))
    raise FormulaError(f"cannot rename in {f!r}")


# ---------------------------------------------------------------------------
# Fresh names


class FreshNames:
    """Deterministic source of parameter, function, and constant names.

    Names are p1, p2, ... for parameters, f1, f2, ... for Skolem functions,
    and u1, u2, ... for fresh constants, always skipping anything already in
    use so displayed formulas stay unambiguous.
    """

    def __init__(self, used: Iterable[str] = ()):
        self._used = set(used)
        self._counters = {"p": 0, "f": 0, "u": 0}

    def claim(self, name: str) -> None:
        self._used.add(name)

    def _next(self, prefix: str) -> str:
        n = self._counters[prefix]
        while True:
            n += 1
            name = f"{prefix}{n}"
            if name not in self._used:
                self._counters[prefix] = n
                self._used.add(name)
                return name

    def parameter(self) -> str:
        return self._next("p")

    def function(self) -> str:
        return self._next("f")

    def constant(self) -> str:
        return self._next("u")


def names_in_use(formulas: Iterable[Formula],
                 extra: Iterable[str] = ()) -> set[str]:
    used: set[str] = set(extra)
    for f in formulas:
        used.update(predicates_of(f))
        for t in iter_terms(f):
            if isinstance(t, (Constant, Parameter, Variable)):
                used.add(t.name)
            elif isinstance(t, SkolemApp):
                used.add(t.fn)
    return used


# ---------------------------------------------------------------------------
# Skolemization


def skolemize(f: Formula, fresh: FreshNames) -> Formula:
    """Eliminate existential force in favour of parameters and Skolem terms.

    Positive existentials and negative universals get a witness: a parameter
    when no universal encloses them, otherwise a Skolem application of the
    enclosing universal variables. Universal force is left in place. Running
    the function on its own output changes nothing.
    """

    def walk(g: Formula, positive: bool, universals: tuple[str, ...],
             env: Mapping[str, Term]) -> Formula:
        if isinstance(g, (Atom, Equality)):
            return substitute(g, env) if env else g
        if isinstance(g, Not):
            return Not(walk(g.body, not positive, universals, env))
        if isinstance(g, And):
            return And(walk(g.left, positive, universals, env),
                       walk(g.right, positive, universals, env))
        if isinstance(g, Or):
            return Or(walk(g.left, positive, universals, env),
                      walk(g.right, positive, universals, env))
        if isinstance(g, Implies):
            return Implies(walk(g.left, not positive, universals, env),
                           walk(g.right, positive, universals, env))
        if isinstance(g, (Forall, Exists)):
            env = {k: v for k, v in env.items() if k != g.var}
            keeps = positive if isinstance(g, Forall) else not positive
            if keeps:
                body = walk(g.body, positive, universals + (g.var,), env)
                return type(g)(g.var, body)
            if universals:
                witness: Term = SkolemApp(
                    fresh.function(),
                    tuple(Variable(u) for u in universals))
            else:
                witness = Parameter(fresh.parameter())
            return walk(g.body, positive, universals,
                        {**env, g.var: witness})
        raise FormulaError(f"cannot skolemize {g!r}")

    return walk(f, True, (), {})


# ---------------------------------------------------------------------------
# Propositional grounding


def ground_clauses(f: Formula, domain: Iterable[str],
                   literal_index: Callable[[str, tuple[str, ...]], int],
                   ) -> list[frozenset[int]]:
    """Ground a sentence over a finite domain into CNF clauses.

    `literal_index` maps a ground atom to a positive integer; clauses are
    frozensets of signed indices. Equalities between constants evaluate
    away during grounding. An empty clause in the result marks plain
    falsity. Tautologous clauses are dropped.
    """
    dom = tuple(domain)
    TRUE: list[frozenset[int]] = []
    FALSE = [frozenset()]

    def conj(parts: list[list[frozenset[int]]]) -> list[frozenset[int]]:
        out: list[frozenset[int]] = []
        seen: set[frozenset[int]] = set()
        for cnf in parts:
            for cl in cnf:
                if not cl:
                    return FALSE
                if cl not in seen:
                    seen.add(cl)
                    out.append(cl)
        return out

    def disj(parts: list[list[frozenset[int]]]) -> list[frozenset[int]]:
        acc: list[frozenset[int]] = [frozenset()]
        for cnf in parts:
            if not cnf:
                return TRUE
            nxt: list[frozenset[int]] = []
            seen: set[frozenset[int]] = set()
            for old in acc:
                for cl in cnf:
                    merged = old | cl
                    if any(-x in merged for x in merged):
                        continue
                    if merged not in seen:
                        seen.add(merged)
                        nxt.append(merged)
            acc = nxt
            if not acc:
                # every distributed clause was tautologous, so the
                # disjunction holds outright
                return TRUE
        return acc

    def resolve(t: Term, env: Mapping[str, str]) -> str:
        if isinstance(t, Variable):
            return env[t.name]
        if isinstance(t, Constant):
            return t.name
        raise FormulaError(f"cannot ground term {t}")

    def walk(g: Formula, positive: bool,
             env: dict[str, str]) -> list[frozenset[int]]:
        if isinstance(g, Atom):
            idx = literal_index(g.pred, tuple(resolve(a, env) for a in g.args))
            return [frozenset((idx if positive else -idx,))]
        if isinstance(g, Equality):
            same = resolve(g.left, env) == resolve(g.right, env)
            return TRUE if same == positive else FALSE
        if isinstance(g, Not):
            return walk(g.body, not positive, env)
        if isinstance(g, (And, Or)):
            parts = [walk(g.left, positive, env),
                     walk(g.right, positive, env)]
            conjunctive = isinstance(g, And) == positive
            return conj(parts) if conjunctive else disj(parts)
        if isinstance(g, Implies):
            parts = [walk(g.left, not positive, env),
                     walk(g.right, positive, env)]
            return disj(parts) if positive else conj(parts)
        if isinstance(g, (Forall, Exists)):
            instances = []
            for c in dom:
                env[g.var] = c
                instances.append(walk(g.body, positive, dict(env)))
            env.pop(g.var, None)
            conjunctive = isinstance(g, Forall) == positive
            return conj(instances) if conjunctive else disj(instances)
        raise FormulaError(f"cannot ground {g!r}")

    return walk(f, True, {})


# ---------------------------------------------------------------------------
# Lexer


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    column: int


_SYMBOLS = ("->", "(", ")", ",", ".", "=", "~", "&", "|")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"[0-9]+")


def _tokenize(text: str, source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    col = 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "'":
            j = text.find("'", i + 1)
            if j < 0 or "\n" in text[i + 1:j]:
                raise ParseError("unterminated quoted constant",
                                 line=line, column=col, source=source)
            value = text[i + 1:j]
            if not value:
                raise ParseError("empty quoted constant",
                                 line=line, column=col, source=source)
            tokens.append(_Token("quoted", value, line, col))
            col += j - i + 1
            i = j + 1
            continue
        if ch == "-" and text.startswith("->", i):
            tokens.append(_Token("->", "->", line, col))
            i += 2
            col += 2
            continue
        if ch in "(),.=~&|":
            tokens.append(_Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            tokens.append(_Token("number", m.group(), line, col))
            col += len(m.group())
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(), line, col))
            col += len(m.group())
            i = m.end()
            continue
        raise ParseError(f"unexpected character {ch!r}",
                         line=line, column=col, source=source)
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list[_Token], source: str,
                 arities: dict[str, int] | None, extend: bool):
        self.tokens = tokens
        self.pos = 0
        self.source = source
        self.arities = arities if arities is not None else {}
        self.extend = extend or arities is None
        self.bound: list[str] = []

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.value or "end of input"
            self.fail(f"expected {kind!r}, found {shown!r}", tok)
        return self.take()

    def fail(self, message: str, tok: _Token | None = None) -> None:
        tok = tok or self.peek()
        raise ParseError(message, line=tok.line, column=tok.column,
                         source=self.source)

    # expression levels -----------------------------------------------------

    def formula(self) -> Formula:
        left = self.disjunction()
        if self.peek().kind == "->":
            self.take()
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek().kind == "|":
            self.take()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.peek().kind == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "~":
            self.take()
            return Not(self.unary())
        if tok.kind == "ident" and tok.value in ("forall", "exists"):
            return self.quantified()
        return self.primary()

    def quantified(self) -> Formula:
        word = self.take()
        names: list[_Token] = []
        while True:
            tok = self.expect("ident")
            if not tok.value[0].isupper():
                self.fail(f"quantified name {tok.value!r} must start "
                          "with an uppercase letter", tok)
            if tok.value in self.bound or any(t.value == tok.value
                                              for t in names):
                self.fail(f"variable {tok.value!r} is already bound", tok)
            names.append(tok)
            if self.peek().kind == ",":
                self.take()
                continue
            break
        self.expect(".")
        self.bound.extend(t.value for t in names)
        body = self.formula()
        del self.bound[len(self.bound) - len(names):]
        ctor = Forall if word.value == "forall" else Exists
        for tok in reversed(names):
            body = ctor(tok.value, body)
        return body

    def primary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "(":
            self.take()
            f = self.formula()
            self.expect(")")
            return f
        if tok.kind == "ident" and self.tokens[self.pos + 1].kind == "(":
            return self.atom()
        left = self.term()
        eq = self.peek()
        if eq.kind != "=":
            self.fail("a bare term is not a formula; expected '='", eq)
        self.take()
        right = self.term()
        return Equality(left, right)

    def atom(self) -> Formula:
        name = self.take()
        self.expect("(")
        args = [self.term()]
        while self.peek().kind == ",":
            self.take()
            args.append(self.term())
        self.expect(")")
        known = self.arities.get(name.value)
        if known is None:
            if not self.extend:
                self.fail(f"unknown predicate {name.value!r}", name)
            self.arities[name.value] = len(args)
        elif known != len(args):
            self.fail(f"predicate {name.value!r} used with {len(args)} "
                      f"arguments, declared with {known}", name)
        return Atom(name.value, tuple(args))

    def term(self) -> Term:
        tok = self.peek()
        if tok.kind == "ident":
            self.take()
            if tok.value in ("forall", "exists"):
                self.fail(f"{tok.value!r} is a reserved word", tok)
            if tok.value[0].isupper():
                return Variable(tok.value)
            return Constant(tok.value)
        if tok.kind == "number":
            self.take()
            return Constant(tok.value)
        if tok.kind == "quoted":
            self.take()
            return Constant(tok.value)
        shown = tok.value or "end of input"
        self.fail(f"expected a term, found {shown!r}", tok)
        raise AssertionError  # unreachable


def parse_formula(text: str, *, arities: dict[str, int] | None = None,
                  extend: bool = True, source: str = "<formula>") -> Formula:
    """Parse one formula. `arities` is consulted and, when `extend`,
    updated with newly seen predicates."""
    tokens = _tokenize(text, source)
    if tokens[0].kind == "eof":
        raise ParseError("empty formula", line=tokens[0].line,
                         column=tokens[0].column, source=source)
    p = _Parser(tokens, source, arities, extend)
    f = p.formula()
    tail = p.peek()
    if tail.kind != "eof":
        p.fail(f"unexpected trailing {tail.value!r}", tail)
    return f
