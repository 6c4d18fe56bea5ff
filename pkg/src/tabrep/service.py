"""HTTP front end for checking, repairing and querying instances.

Requests carry the facts and constraints as text in the same grammar the
files use, so the service holds no state and every call is reproducible.
Responses are plain JSON documents with a top-level schema marker.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .cqa import (
    OpenedTableau, answers_via_repair_intersection, consistent_answers,
    consistent_true, parse_query,
)
from .formula import Formula, FormulaError, ParseError, parse_formula
from .instance import (
    DomainPolicy, Instance, ResourceLimitError, parse_facts, satisfies,
    serialize_facts,
)
from .oracle import (
    consistent_answers_bruteforce, consistent_true_bruteforce,
    enumerate_repairs_bruteforce, winslett_update_models,
)
from .repair import repairs
from .tableau import (
    BuildOptions, UnsafeConstraintError, build, render_tree,
)

SCHEMA = 1

app = FastAPI(title="tabrep", version="0.1.0")


class EngineOptions(BaseModel):
    fresh_pool: int | None = Field(default=None, ge=0)
    term_depth: int = Field(default=1, ge=0)
    max_branches: int = Field(default=20000, ge=1)
    saturation: str = "relevant"
    suspend: bool = True
    groundedness: bool = True
    subsumption: bool = True
    verify: bool = False


class InstanceRequest(BaseModel):
    facts: str
    constraints: str
    options: EngineOptions = EngineOptions()


class QueryRequest(InstanceRequest):
    queries: list[str]


# ---------------------------------------------------------------------------
# Shared plumbing


def _parse(req: InstanceRequest):
    try:
        instance, _ = parse_facts(req.facts)
        ics = _parse_constraints(req.constraints)
    except ParseError as e:
        raise HTTPException(status_code=400, detail=str(e))
    policy = DomainPolicy.derive(instance, ics,
                                 fresh_size=req.options.fresh_pool,
                                 term_depth=req.options.term_depth)
    options = BuildOptions(saturation=req.options.saturation,
                           suspend=req.options.suspend,
                           max_branches=req.options.max_branches)
    return instance, ics, policy, options


def _parse_constraints(text: str) -> list[Formula]:
    out = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        out.append(parse_formula(stripped.rstrip(".")))
    return out


def _guard(fn):
    try:
        return fn()
    except HTTPException:
        raise
    except ResourceLimitError as e:
        raise HTTPException(status_code=503,
                            detail=f"resource cap: {e}")
    except (ParseError, UnsafeConstraintError, FormulaError, ValueError) \
            as e:
        raise HTTPException(status_code=400, detail=str(e))


def _fact_lines(instance: Instance) -> list[str]:
    return serialize_facts(instance).splitlines()


def _change(base: Instance, repaired: Instance) -> dict:
    return {
        "facts": _fact_lines(repaired),
        "delete": _fact_lines(Instance.of(base.facts - repaired.facts)),
        "insert": _fact_lines(Instance.of(repaired.facts - base.facts)),
    }


# ---------------------------------------------------------------------------
# Endpoints


@app.post("/v1/check")
def check(req: InstanceRequest) -> dict:
    def run():
        instance, ics, policy, options = _parse(req)
        t = build(ics, instance, policy=policy, options=options)
        body = {
            "schema": SCHEMA,
            "verdict": "inconsistent" if t.closed else "consistent",
            "branches": {
                "open": len(t.open_branches()),
                "closed": len(t.closed_branches()),
                "suspended": len(t.suspended_branches()),
            },
            "nodes": t.nodes_developed,
        }
        if req.options.verify:
            agrees = all(satisfies(instance, f, policy) for f in ics)
            body["verify"] = {"oracle_consistent": agrees,
                              "match": agrees != t.closed}
        return body
    return _guard(run)


@app.post("/v1/repairs")
def repair_endpoint(req: InstanceRequest) -> dict:
    def run():
        instance, ics, policy, options = _parse(req)
        rs = repairs(instance, ics, policy=policy, options=options,
                     groundedness=req.options.groundedness,
                     subsumption=req.options.subsumption)
        body = {
            "schema": SCHEMA,
            "consistent": rs.consistent,
            "repairs": [_change(instance, rep) for rep in rs.instances],
        }
        if req.options.verify:
            brute = enumerate_repairs_bruteforce(ics, instance,
                                                 policy=policy)
            winslett = winslett_update_models(instance, ics, policy)
            engine = {rep.facts for rep in rs.instances}
            body["verify"] = {
                "bruteforce": [_fact_lines(rep) for rep in brute],
                "match": (engine == {rep.facts for rep in brute}
                          == {rep.facts for rep in winslett}),
            }
        return body
    return _guard(run)


@app.post("/v1/cqa")
def cqa_endpoint(req: QueryRequest) -> dict:
    def run():
        instance, ics, policy, options = _parse(req)
        opened = OpenedTableau.develop(
            ics, instance, policy=policy, options=options,
            groundedness=req.options.groundedness,
            subsumption=req.options.subsumption)
        answers = []
        for text in req.queries:
            q = parse_query(text)
            if q.is_sentence:
                got = consistent_true(ics, instance, q, opened=opened)
                entry = {"query": text, "free": [],
                         "verdict": "yes" if got.verdict else "no",
                         "provenance": list(got.provenance)}
            else:
                got = consistent_answers(ics, instance, q, opened=opened)
                entry = {"query": text, "free": list(q.free),
                         "tuples": [list(t) for t in got.rows()],
                         "provenance": list(got.provenance)}
            if req.options.verify:
                other = answers_via_repair_intersection(
                    ics, instance, q, policy,
                    repair_set=opened.repair_set)
                if q.is_sentence:
                    entry["verify"] = {
                        "match": other.verdict == got.verdict}
                else:
                    entry["verify"] = {
                        "match": other.tuples == got.tuples}
            answers.append(entry)
        return {"schema": SCHEMA, "answers": answers}
    return _guard(run)


@app.post("/v1/explain")
def explain(req: InstanceRequest) -> dict:
    def run():
        instance, ics, policy, options = _parse(req)
        rs = repairs(instance, ics, policy=policy, options=options,
                     groundedness=req.options.groundedness,
                     subsumption=req.options.subsumption)
        return {
            "schema": SCHEMA,
            "verdict": "consistent" if rs.consistent else "inconsistent",
            "tree": render_tree(rs.tableau).splitlines(),
            "openings": [
                {"branches": list(o.branches), "change": o.describe()}
                for o in rs.openings
            ],
        }
    return _guard(run)


@app.post("/v1/oracle/repairs")
def oracle_repairs(req: InstanceRequest) -> dict:
    def run():
        instance, ics, policy, _ = _parse(req)
        brute = enumerate_repairs_bruteforce(ics, instance, policy=policy)
        winslett = winslett_update_models(instance, ics, policy)
        return {
            "schema": SCHEMA,
            "repairs": [_change(instance, rep) for rep in brute],
            "winslett_agrees": ({rep.facts for rep in brute}
                                == {rep.facts for rep in winslett}),
        }
    return _guard(run)


@app.post("/v1/oracle/cqa")
def oracle_cqa(req: QueryRequest) -> dict:
    def run():
        instance, ics, policy, _ = _parse(req)
        answers = []
        for text in req.queries:
            q = parse_query(text)
            if q.is_sentence:
                ok = consistent_true_bruteforce(ics, instance, q.formula,
                                                policy)
                answers.append({"query": text, "free": [],
                                "verdict": "yes" if ok else "no"})
            else:
                got = consistent_answers_bruteforce(ics, instance,
                                                    q.formula, q.free,
                                                    policy)
                answers.append({"query": text, "free": list(q.free),
                                "tuples": sorted([list(t) for t in got])})
        return {"schema": SCHEMA, "answers": answers}
    return _guard(run)


@app.post("/v1/diff")
def diff(req: QueryRequest) -> dict:
    def run():
        instance, ics, policy, options = _parse(req)
        notes: list[str] = []

        rs = repairs(instance, ics, policy=policy, options=options,
                     groundedness=req.options.groundedness,
                     subsumption=req.options.subsumption)
        engine = {rep.facts for rep in rs.instances}
        brute = {rep.facts for rep in
                 enumerate_repairs_bruteforce(ics, instance, policy=policy)}
        winslett = {rep.facts for rep in
                    winslett_update_models(instance, ics, policy)}
        if engine != brute:
            notes.append("repairs: tableau and enumeration disagree")
        if brute != winslett:
            notes.append("repairs: enumeration and update models disagree")

        opened = OpenedTableau.develop(
            ics, instance, policy=policy, options=options,
            groundedness=req.options.groundedness,
            subsumption=req.options.subsumption)
        for text in req.queries:
            q = parse_query(text)
            if q.is_sentence:
                a = consistent_true(ics, instance, q, opened=opened).verdict
                b = consistent_true_bruteforce(ics, instance, q.formula,
                                               policy)
                if a != b:
                    notes.append(f"cqa {text!r}: verdicts disagree")
            else:
                a = consistent_answers(ics, instance, q,
                                       opened=opened).tuples
                b = consistent_answers_bruteforce(ics, instance, q.formula,
                                                  q.free, policy)
                if a != b:
                    notes.append(f"cqa {text!r}: answer sets disagree")
        return {"schema": SCHEMA, "match": not notes,
                "discrepancies": notes}
    return _guard(run)
