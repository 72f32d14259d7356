"""Command line front end.

Verbs: ``ingest`` (N-Triples -> TRQG snapshot), ``train`` (snapshot ->
TRQE embeddings), ``plan`` (show a query's subquery trees), ``query``
(ranked approximate solutions), ``ask``, ``stats``, and ``bench``
(fact-deletion benchmark from a manifest). Results go to stdout as TSV
or JSON; diagnostics go to stderr; the exit status is 0 exactly when no
errors occurred. Every option falls back to a ``TRQ_``-prefixed
environment variable (e.g. ``TRQ_STORE``, ``TRQ_MODEL``, ``TRQ_TOP_K``)
before its built-in default.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import embedding, evalkit, qgraph, sparql, store
from .recommend import RecommendRequest, recommend
from .sparql import Query, Var
from .terms import Term, Triple


def _env(name: str, cast, default):
    raw = os.environ.get("TRQ_" + name)
    if raw is None:
        return default
    if cast is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return cast(raw)


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _load_store(path: str | None) -> store.Graph:
    if not path:
        raise ValueError("no store given (use --store or TRQ_STORE)")
    return store.load_snapshot(path)


def _atom_str(atom) -> str:
    return "?" + atom.name if isinstance(atom, Var) else atom.term.nt()


def _pattern_str(pat) -> str:
    return f"{_atom_str(pat.s)} {_atom_str(pat.p)} {_atom_str(pat.o)} ."


# -- commands ----------------------------------------------------------


def cmd_ingest(args) -> int:
    errors: list = []
    raw = sys.stdin.buffer.read() if args.input == "-" else Path(args.input).read_bytes()
    g = store.parse_ntriples(raw, strict=not args.lax, error_sink=errors.append)
    store.save_snapshot(g, args.output)
    if errors:
        print(f"skipped {len(errors)} malformed line(s)", file=sys.stderr)
    print(f"{g.triple_count} triples, {g.term_count} terms -> {args.output}")
    return 0


def cmd_train(args) -> int:
    g = _load_store(args.store)
    cfg = embedding.EmbeddingConfig(
        model=args.model,
        dim=args.dim,
        rel_dim=args.rel_dim,
        margin=args.margin,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        negatives_per_positive=args.negatives,
        norm=args.norm,
        seed=args.seed,
        include_type_triples=args.include_type_triples,
    )
    started = time.perf_counter()
    emb = embedding.train(g, cfg)
    elapsed = time.perf_counter() - started
    if not args.quiet:
        step = max(1, cfg.epochs // 10)
        for i in range(0, cfg.epochs, step):
            print(f"epoch {i + 1}/{cfg.epochs} mean loss {emb.losses[i]:.6f}", file=sys.stderr)
        print(f"final mean loss {emb.losses[-1]:.6f} ({elapsed:.1f}s)", file=sys.stderr)
    embedding.save_embeddings(emb, args.output)
    print(
        f"{cfg.model} d={cfg.dim} entities={emb.entity_count} relations={emb.relation_count}"
        f" -> {args.output}"
    )
    return 0


def cmd_plan(args) -> int:
    q = sparql.parse_query(_read_text(args.query))
    trees = qgraph.enumerate_subquery_trees(q, max_edges=args.max_edges)
    print(f"{len(q.patterns)} patterns, {len(trees)} subquery tree(s)")
    for i, tree in enumerate(trees, start=1):
        dropped = sorted(tree.dropped_origins)
        print(f"tree {i}/{len(trees)}: covers {list(tree.covered_origins())}, drops {dropped}")
        for origin in tree.covered_origins():
            print(f"  {_pattern_str(q.patterns[origin])}")
    return 0


def _request_from_args(args, q: Query, emb: embedding.EmbeddingSet) -> RecommendRequest:
    return RecommendRequest(
        query=q,
        embeddings=emb,
        threshold=args.threshold,
        top_k=args.top_k,
        per_tree_limit=args.per_tree_limit,
        max_edges=args.max_edges,
    )


def cmd_query(args) -> int:
    g = _load_store(args.store)
    if not args.embeddings:
        raise ValueError("no embeddings given (use --embeddings or TRQ_EMBEDDINGS)")
    emb = embedding.load_embeddings(args.embeddings)
    emb.bind(g)

    text = _read_text(args.query)
    wall_start = time.perf_counter()
    parse_start = time.perf_counter()
    q = sparql.parse_query(text)
    parse_seconds = time.perf_counter() - parse_start
    rec = recommend(g, _request_from_args(args, q, emb), parse_seconds=parse_seconds)
    wall = time.perf_counter() - wall_start

    variables = sorted(q.variables())
    if args.format == "json":
        payload = {
            "schema_version": 1,
            "variables": variables,
            "top_k": args.top_k,
            "threshold": args.threshold,
            "trees_evaluated": rec.trees_evaluated,
            "candidates_seen": rec.candidates_seen,
            "truncated": rec.truncated,
            "timings": rec.timings,
            "wall": wall,
            "rows": [
                {
                    "rank": i,
                    "score": s.score,
                    "edit_distance": s.edit_distance,
                    "bindings": {v: g.term(s.mapping[v]).nt() for v in variables},
                    "edges": [
                        {
                            "pattern": e.pattern,
                            "weight": e.weight,
                            "f": e.f,
                            "in_graph": e.in_graph,
                            "fallback": e.fallback,
                        }
                        for e in s.per_edge
                    ],
                }
                for i, s in enumerate(rec.solutions, start=1)
            ],
        }
        print(json.dumps(payload, indent=2))
    else:
        header = ["rank", "score", "edit_distance"] + ["?" + v for v in variables]
        print("\t".join(header))
        for i, s in enumerate(rec.solutions, start=1):
            row = [str(i), f"{s.score:.10g}", str(s.edit_distance)]
            row += [g.term(s.mapping[v]).nt() for v in variables]
            print("\t".join(row))
        t = rec.timings
        print(
            "timings[s]: parse={parse:.6f} plan={plan:.6f} evaluate={evaluate:.6f} "
            "score={score:.6f} rank={rank:.6f} wall={wall:.6f}".format(**t, wall=wall),
            file=sys.stderr,
        )
        if rec.truncated:
            print("warning: candidate enumeration was truncated", file=sys.stderr)
    return 0


def cmd_ask(args) -> int:
    g = _load_store(args.store)
    q = sparql.parse_query(_read_text(args.query))
    print("true" if sparql.ask(g, q) else "false")
    return 0


def cmd_stats(args) -> int:
    g = _load_store(args.store)
    rel_ids = g.stats.relations()
    entities = {t.s for t in g.triples()} | {t.o for t in g.triples()}
    print(f"triples: {g.triple_count}")
    print(f"terms: {g.term_count}")
    print(f"entities: {len(entities)}")
    print(f"relations: {len(rel_ids)}")
    if args.relation:
        rid = g.id(Term.iri(args.relation))
        if rid is None:
            raise ValueError(f"relation not in graph: <{args.relation}>")
        print(f"<{args.relation}> freq={g.stats.freq(rid)} dom={g.stats.dom(rid)} ran={g.stats.ran(rid)}")
    else:
        by_freq = sorted(rel_ids, key=lambda r: (-g.stats.freq(r), g.term(r).lexical))
        for rid in by_freq[: args.top]:
            term = g.term(rid)
            print(f"  {term.nt()} freq={g.stats.freq(rid)} dom={g.stats.dom(rid)} ran={g.stats.ran(rid)}")
    return 0


def cmd_bench(args) -> int:
    g = _load_store(args.store)
    entries = evalkit.load_manifest(args.manifest)
    cases = []
    for entry in entries:
        q = sparql.parse_query(entry.query_path.read_text(encoding="utf-8"))
        del_graph = store.parse_ntriples(entry.deletions_path.read_bytes())
        deletions = []
        for tr in del_graph.triples():
            ids = [g.id(del_graph.term(x)) for x in (tr.s, tr.p, tr.o)]
            if None in ids:
                raise ValueError(
                    f"{entry.deletions_path}: deletion references a term not in the store"
                )
            deletions.append(Triple(*ids))
        truth = None
        if entry.truth_path is not None:
            truth = set()
            for line in entry.truth_path.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                truth.add(tuple(line.split("\t")))
        cases.append(evalkit.BenchCase(entry.name, q, deletions, truth))

    embeddings = None
    embed_config = None
    if args.embeddings:
        embeddings = embedding.load_embeddings(args.embeddings)
    else:
        embed_config = embedding.EmbeddingConfig(
            model=args.model,
            dim=args.dim,
            margin=args.margin,
            learning_rate=args.learning_rate,
            epochs=args.epochs,
            batch_size=args.batch_size,
            negatives_per_positive=args.negatives,
            norm=args.norm,
            seed=args.seed,
        )
    report = evalkit.run_benchmark(
        g,
        cases,
        embed_config=embed_config,
        embeddings=embeddings,
        threshold=args.threshold,
        top_k=None,
        per_tree_limit=args.per_tree_limit,
        uniform_f=args.uniform_f,
    )

    if args.format == "json":
        payload = {
            "schema_version": 1,
            "cases": [
                {
                    "name": r.name,
                    "rr": r.rr,
                    "mr": r.mr,
                    "candidates": r.candidates,
                    "truth_size": r.truth_size,
                    "elapsed_s": r.elapsed,
                    "error": r.error,
                }
                for r in report.rows
            ],
            "aggregate": {
                "mean_rr": report.mean_rr,
                "mean_mr": report.mean_mr,
                "failures": report.failures,
            },
        }
        print(json.dumps(payload, indent=2))
    else:
        print("case\trr\tmr\tcandidates\ttruth\telapsed_s\tstatus")
        for r in report.rows:
            rr = "" if r.rr is None else f"{r.rr:.6g}"
            mr = "" if r.mr is None else f"{r.mr:.6g}"
            status = "ok" if r.error is None else r.error
            print(f"{r.name}\t{rr}\t{mr}\t{r.candidates}\t{r.truth_size}\t{r.elapsed:.3f}\t{status}")
        if report.mean_rr is not None:
            print(
                f"# mean_rr={report.mean_rr:.6g} mean_mr={report.mean_mr:.6g} "
                f"failures={report.failures}",
                file=sys.stderr,
            )
    return 1 if report.failures else 0


# -- argument wiring ---------------------------------------------------


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default=_env("MODEL", str, "transe"), choices=embedding.MODELS)
    p.add_argument("--dim", type=int, default=_env("DIM", int, 50))
    p.add_argument("--rel-dim", type=int, default=_env("REL_DIM", int, None))
    p.add_argument("--margin", type=float, default=_env("MARGIN", float, 1.0))
    p.add_argument("--learning-rate", type=float, default=_env("LEARNING_RATE", float, 0.01))
    p.add_argument("--epochs", type=int, default=_env("EPOCHS", int, 200))
    p.add_argument("--batch-size", type=int, default=_env("BATCH_SIZE", int, 128))
    p.add_argument("--negatives", type=int, default=_env("NEGATIVES", int, 1))
    p.add_argument("--norm", default=_env("NORM", str, "l1"), choices=embedding.NORMS)
    p.add_argument("--seed", type=int, default=_env("SEED", int, 0))


def _add_query_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", "-t", type=int, default=_env("THRESHOLD", int, 2))
    p.add_argument("--per-tree-limit", type=int, default=_env("PER_TREE_LIMIT", int, 10_000))
    p.add_argument("--max-edges", type=int, default=_env("MAX_EDGES", int, qgraph.DEFAULT_MAX_EDGES))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trq",
        description="Approximate SPARQL basic-graph-pattern answering over RDF graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse N-Triples into a TRQG snapshot")
    p.add_argument("input", help="N-Triples file, or - for stdin")
    p.add_argument("-o", "--output", required=True, help="snapshot path to write")
    p.add_argument("--lax", action="store_true", help="skip malformed lines instead of failing")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train embeddings from a snapshot")
    p.add_argument("--store", default=_env("STORE", str, None), help="TRQG snapshot")
    p.add_argument("-o", "--output", required=True, help="TRQE file to write")
    _add_train_options(p)
    p.add_argument("--include-type-triples", action="store_true",
                   default=_env("INCLUDE_TYPE_TRIPLES", bool, False))
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("plan", help="show a query's subquery trees")
    p.add_argument("query", help="query file, or - for stdin")
    p.add_argument("--max-edges", type=int, default=_env("MAX_EDGES", int, qgraph.DEFAULT_MAX_EDGES))
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("query", help="rank approximate solutions for a query")
    p.add_argument("query", help="query file, or - for stdin")
    p.add_argument("--store", default=_env("STORE", str, None))
    p.add_argument("--embeddings", default=_env("EMBEDDINGS", str, None), help="TRQE file")
    p.add_argument("--top-k", "-k", type=int, default=_env("TOP_K", int, 10))
    _add_query_options(p)
    p.add_argument("--format", default=_env("FORMAT", str, "tsv"), choices=("tsv", "json"))
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("ask", help="evaluate an ASK query exactly")
    p.add_argument("query", help="query file, or - for stdin")
    p.add_argument("--store", default=_env("STORE", str, None))
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("stats", help="show store statistics")
    p.add_argument("--store", default=_env("STORE", str, None))
    p.add_argument("--relation", help="show counts for one relation IRI")
    p.add_argument("--top", type=int, default=10, help="relations to list")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="run fact-deletion benchmark cases")
    p.add_argument("manifest", help="manifest file: query deletions [truth] per line")
    p.add_argument("--store", default=_env("STORE", str, None))
    p.add_argument("--embeddings", default=_env("EMBEDDINGS", str, None),
                   help="reuse one TRQE file instead of retraining per case")
    _add_train_options(p)
    _add_query_options(p)
    p.add_argument("--uniform-f", type=float, default=None,
                   help="ablation: score every edge with this constant f")
    p.add_argument("--format", default=_env("FORMAT", str, "tsv"), choices=("tsv", "json"))
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, LookupError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
