"""Command line front end.

Every subcommand is a thin client: it reads the input files, posts one
request to the bundled HTTP service through an in-process connection,
and renders the JSON reply as text or passes it through. `serve` runs
the same service over a real socket.

Exit codes: 0 on success, 1 when the requested semantic verdict is
negative (an inconsistent instance under `check`, a discrepancy under
`diff` or `--verify`), 2 on usage or input errors, 3 on resource caps.
"""

from __future__ import annotations

import argparse
import json
import sys

from .service import app


def _common_flags(p: argparse.ArgumentParser, queries: bool = False) -> None:
    p.add_argument("--facts", required=True, help="facts file")
    p.add_argument("--ic", required=True, help="constraints file")
    if queries:
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--query", help="a single query")
        group.add_argument("--queries",
                           help="file with one query per line")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--fresh-pool", type=int, default=None, metavar="N",
                   help="number of reserve constants for insertions")
    p.add_argument("--term-depth", type=int, default=1, metavar="N")
    p.add_argument("--max-branches", type=int, default=20000, metavar="N")
    p.add_argument("--no-groundedness", action="store_true",
                   help="skip the change-set certification filter")
    p.add_argument("--no-subsumption", action="store_true",
                   help="keep subsumed branches when collecting openings")
    p.add_argument("--verify", action="store_true",
                   help="cross-check the result against the oracle")
    p.add_argument("--seed", type=int, default=0, metavar="N",
                   help="seed for randomized helpers (reserved)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabrep",
        description="Constraint checking, repair and consistent query "
                    "answering for relational instances.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, needs_queries in (
            ("check", False), ("repairs", False), ("cqa", True),
            ("explain", False), ("oracle-repairs", False),
            ("oracle-cqa", True), ("diff", False)):
        p = sub.add_parser(name)
        _common_flags(p, queries=needs_queries)
        if name == "diff":
            group = p.add_mutually_exclusive_group()
            group.add_argument("--query", help="a single query")
            group.add_argument("--queries",
                               help="file with one query per line")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        print(f"error: {path}: {e.strerror}", file=sys.stderr)
        raise SystemExit(2)


def _query_list(args: argparse.Namespace) -> list[str]:
    if getattr(args, "query", None):
        return [args.query]
    if getattr(args, "queries", None):
        lines = _read(args.queries).splitlines()
        return [ln.strip() for ln in lines
                if ln.strip() and not ln.strip().startswith("#")]
    return []


def _payload(args: argparse.Namespace) -> dict:
    body: dict = {
        "facts": _read(args.facts),
        "constraints": _read(args.ic),
        "options": {
            "fresh_pool": args.fresh_pool,
            "term_depth": args.term_depth,
            "max_branches": args.max_branches,
            "groundedness": not args.no_groundedness,
            "subsumption": not args.no_subsumption,
            "verify": args.verify,
        },
    }
    queries = _query_list(args)
    if queries or args.command in ("cqa", "oracle-cqa", "diff"):
        body["queries"] = queries
    return body


# ---------------------------------------------------------------------------
# Text renderings


def _render_check(doc: dict, out: list[str]) -> int:
    out.append(doc["verdict"])
    b = doc["branches"]
    out.append(f"branches: {b['closed']} closed, {b['open']} open, "
               f"{b['suspended']} suspended")
    code = 0 if doc["verdict"] == "consistent" else 1
    if "verify" in doc and not doc["verify"]["match"]:
        out.append("verify: MISMATCH against direct evaluation")
        return 1
    return code


def _render_repairs(doc: dict, out: list[str]) -> int:
    if doc["consistent"]:
        out.append("consistent: the instance is its own repair")
    for k, rep in enumerate(doc["repairs"], start=1):
        out.append(f"--- repair {k} ---")
        out.extend(rep["facts"])
        changes = [f"  delete {ln}" for ln in rep["delete"]]
        changes += [f"  insert {ln}" for ln in rep["insert"]]
        out.extend(changes)
    if "verify" in doc:
        ok = doc["verify"]["match"]
        out.append("verify: ok" if ok else "verify: MISMATCH")
        if not ok:
            return 1
    return 0


def _render_cqa(doc: dict, out: list[str]) -> int:
    code = 0
    for entry in doc["answers"]:
        out.append(f"query: {entry['query']}")
        if entry["free"]:
            if entry["tuples"]:
                for t in entry["tuples"]:
                    out.append("  (" + ", ".join(t) + ")")
            else:
                out.append("  no consistent answers")
        else:
            out.append(f"  {entry['verdict']}")
        if "verify" in entry and not entry["verify"]["match"]:
            out.append("  verify: MISMATCH")
            code = 1
    return code


def _render_explain(doc: dict, out: list[str]) -> int:
    out.append(doc["verdict"])
    out.extend(doc["tree"])
    for o in doc["openings"]:
        branches = ", ".join(str(b) for b in o["branches"])
        out.append(f"opening [branch {branches}]: {o['change']}")
    return 0


def _render_oracle_repairs(doc: dict, out: list[str]) -> int:
    for k, rep in enumerate(doc["repairs"], start=1):
        out.append(f"--- repair {k} ---")
        out.extend(rep["facts"])
    out.append("update models agree"
               if doc["winslett_agrees"] else "update models DISAGREE")
    return 0 if doc["winslett_agrees"] else 1


def _render_diff(doc: dict, out: list[str]) -> int:
    if doc["match"]:
        out.append("no discrepancies")
        return 0
    out.extend(doc["discrepancies"])
    return 1


# ---------------------------------------------------------------------------
# Entry point


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    from fastapi.testclient import TestClient

    path = {
        "check": "/v1/check",
        "repairs": "/v1/repairs",
        "cqa": "/v1/cqa",
        "explain": "/v1/explain",
        "oracle-repairs": "/v1/oracle/repairs",
        "oracle-cqa": "/v1/oracle/cqa",
        "diff": "/v1/diff",
    }[args.command]

    with TestClient(app, raise_server_exceptions=False) as client:
        resp = client.post(path, json=_payload(args))

    if resp.status_code == 503:
        print(f"error: {resp.json()['detail']}", file=sys.stderr)
        return 3
    if resp.status_code != 200:
        detail = resp.json().get("detail", resp.text)
        print(f"error: {detail}", file=sys.stderr)
        return 2

    doc = resp.json()
    renderer = {
        "check": _render_check,
        "repairs": _render_repairs,
        "cqa": _render_cqa,
        "explain": _render_explain,
        "oracle-repairs": _render_oracle_repairs,
        "oracle-cqa": _render_cqa,
        "diff": _render_diff,
    }[args.command]
    out: list[str] = []
    code = renderer(doc, out)
    if args.format == "json":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print("\n".join(out))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
