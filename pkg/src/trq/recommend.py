"""End-to-end approximate solution recommendation.

Pipeline: enumerate the query's subquery trees, evaluate each tree
exactly, pool the mappings (deduplicated across trees), keep those whose
edit distance against the full query stays under the threshold, score
them, and return the top K under a stable ranking: score descending,
then edit distance ascending, then the lexicographic binding tuple.
Exact solutions, when they exist, are guaranteed the top ranks.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .embedding import EmbeddingSet
from .qgraph import DEFAULT_MAX_EDGES, SubqueryTree, enumerate_subquery_trees
from .scoring import ScoredSolution, edge_weights, edit_distance, score_solution
from .sparql import Query, QueryForm, Var, evaluate_bgp
from .store import Graph

DEFAULT_THRESHOLD = 2
DEFAULT_TOP_K = 10
DEFAULT_PER_TREE_LIMIT = 10_000


class QueryUnmatchableError(ValueError):
    """Every subquery tree is degenerate (no edges left to match)."""


class VariablePredicateError(ValueError):
    """Patterns with variable predicates cannot be scored."""


@dataclass
class RecommendRequest:
    query: Query
    embeddings: EmbeddingSet
    threshold: int = DEFAULT_THRESHOLD
    top_k: int = DEFAULT_TOP_K
    per_tree_limit: int = DEFAULT_PER_TREE_LIMIT
    max_edges: int = DEFAULT_MAX_EDGES
    uniform_f: float | None = None  # ablation hook: constant f for every edge

    def validate(self) -> None:
        if self.threshold < 1:
            raise ValueError("threshold must be at least 1")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.per_tree_limit < 1:
            raise ValueError("per_tree_limit must be at least 1")


@dataclass
class Recommendation:
    solutions: list[ScoredSolution]
    trees: list[SubqueryTree]
    candidates_seen: int
    trees_evaluated: int
    truncated: bool
    timings: dict[str, float] = field(default_factory=dict)


def rank(solutions: list[ScoredSolution], k: int) -> list[ScoredSolution]:
    """Stable top-k: score desc, edit distance asc, binding tuple asc."""
    ordered = sorted(solutions, key=lambda s: (-s.score, s.edit_distance, s.binding_key))
    return ordered[:k]


def recommend(g: Graph, req: RecommendRequest, parse_seconds: float = 0.0) -> Recommendation:
    """Run the full recommendation pipeline over one graph.

    ``parse_seconds`` is folded into the timing report so a caller that
    parsed the query text can account for every phase in one place.
    """
    req.validate()
    q = req.query
    for pat in q.patterns:
        if isinstance(pat.p, Var):
            raise VariablePredicateError(
                "query patterns with variable predicates cannot be scored; "
                "bind the predicate or drop the pattern"
            )

    t0 = time.perf_counter()
    trees = enumerate_subquery_trees(q, max_edges=req.max_edges)
    usable = [t for t in trees if t.graph.edges]
    t1 = time.perf_counter()
    if not usable:
        raise QueryUnmatchableError(
            "query reduces to a single node; no subquery tree has a matchable edge"
        )

    seen: dict[tuple, dict] = {}
    truncated = False
    for tree in usable:
        covered = tree.covered_origins()
        sub = Query(
            QueryForm.SELECT,
            tuple(q.patterns[i] for i in covered),
            tuple(sorted(tree.graph.variables())),
            True,
            q.prefixes,
        )
        result = evaluate_bgp(g, sub, limit=req.per_tree_limit)
        truncated = truncated or result.truncated
        for mapping in result.mappings:
            key = tuple(sorted(mapping.items()))
            if key not in seen:
                seen[key] = mapping
    candidates = list(seen.values())
    kept = [
        (m, ed)
        for m in candidates
        if (ed := edit_distance(g, q.patterns, m)) < req.threshold
    ]
    t2 = time.perf_counter()

    weights = edge_weights(g, q.patterns)
    scored = [
        score_solution(g, q.patterns, m, req.embeddings, weights=weights, uniform_f=req.uniform_f)
        for m, _ in kept
    ]
    t3 = time.perf_counter()
    top = rank(scored, req.top_k)
    t4 = time.perf_counter()

    return Recommendation(
        solutions=top,
        trees=usable,
        candidates_seen=len(candidates),
        trees_evaluated=len(usable),
        truncated=truncated,
        timings={
            "parse": parse_seconds,
            "plan": t1 - t0,
            "evaluate": t2 - t1,
            "score": t3 - t2,
            "rank": t4 - t3,
        },
    )
