"""Two-stage emotion-aware retrieval over an affect database.

Stage one keeps the records whose VA annotation lies strictly within
radius tau of the target; stage two returns the member of that pool most
similar to the source embedding under cosine similarity.  When the pool is
empty the engine falls back to the VA-nearest record and flags it, so the
operation is total and deterministic.

Scoring is a single linear scan over the database's contiguous embedding
matrix with precomputed norms; recall is exact by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EmbeddingVector, VaPoint, as_embedding
from .errors import ConfigError, DegenerateEmbeddingError, EmptyDatabaseError, ShapeMismatchError
from .ingest import AffectDatabase

DEFAULT_TAU = 0.3


@dataclass(frozen=True)
class RetrievalQuery:
    """A retrieval request: where to aim in VA space, and what to match.

    Exactly one of source_embedding / source_id must be given; ids are
    resolved against the database at query time.
    """

    target_va: VaPoint
    source_embedding: EmbeddingVector | None = None
    source_id: str | None = None
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not (isinstance(self.tau, (int, float)) and self.tau > 0.0 and math.isfinite(self.tau)):
            raise ConfigError(f"tau must be a positive finite number, got {self.tau!r}")
        if (self.source_embedding is None) == (self.source_id is None):
            raise ConfigError("provide exactly one of source_embedding or source_id")


@dataclass(frozen=True)
class RetrievalResult:
    record_id: str
    similarity: float
    pool_size: int
    fallback_used: bool
    va_distance: float


@dataclass(frozen=True)
class SweepGrid:
    """A grid of target VA values for systematic exploration."""

    v_values: tuple[float, ...]
    a_values: tuple[float, ...]
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        object.__setattr__(self, "v_values", tuple(float(v) for v in self.v_values))
        object.__setattr__(self, "a_values", tuple(float(a) for a in self.a_values))
        for name, vals in (("v_values", self.v_values), ("a_values", self.a_values)):
            if not vals:
                raise ConfigError(f"{name} must be nonempty")
            if any(not (-1.0 <= x <= 1.0) for x in vals):
                raise ConfigError(f"{name} must lie within [-1, 1]")
            if any(b < a for a, b in zip(vals, vals[1:])):
                raise ConfigError(f"{name} must be ascending")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise ConfigError(f"tau must be positive, got {self.tau!r}")


@dataclass(frozen=True)
class SweepResult:
    """Sweep output: rows ordered by arousal descending, columns by valence ascending."""

    v_values: tuple[float, ...]
    a_values_desc: tuple[float, ...]
    tau: float
    rows: tuple[tuple[RetrievalResult, ...], ...]


def _va_distances(db: AffectDatabase, target: VaPoint) -> np.ndarray:
    va = db.va_array
    # hypot matches core.va_distance including its underflow behavior
    return np.hypot(va[:, 0] - target.valence, va[:, 1] - target.arousal)


def candidate_pool(db: AffectDatabase, target: VaPoint, tau: float) -> set[str]:
    """Ids of records whose VA lies strictly within radius tau of the target."""
    if not (tau > 0.0 and math.isfinite(tau)):
        raise ConfigError(f"tau must be positive, got {tau!r}")
    mask = _va_distances(db, target) < tau
    return {db.records[i].id for i in np.flatnonzero(mask)}


def _resolve_source(db: AffectDatabase, query: RetrievalQuery) -> EmbeddingVector:
    if query.source_id is not None:
        emb = db.record(query.source_id).embedding
        if emb is None:
            raise ConfigError(f"record {query.source_id!r} carries no embedding")
        return emb
    return query.source_embedding


def _score_all(db: AffectDatabase, source: EmbeddingVector) -> np.ndarray:
    """Cosine similarity of every record against the source, -inf for zero-norm rows."""
    if db.embedding_dim == 0:
        raise ConfigError("database has no embeddings; retrieval needs them")
    if source.dim != db.embedding_dim:
        raise ShapeMismatchError(
            f"source embedding dim {source.dim} != database dim {db.embedding_dim}")
    if source.cached_norm == 0.0:
        raise DegenerateEmbeddingError("source embedding has zero norm")
    u = np.asarray(source.values, dtype=db.storage_dtype)
    dots = db.embedding_matrix @ u
    norms = db.embedding_norms
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = dots / (norms * source.cached_norm)
    scores = np.asarray(scores, dtype=np.float64)
    scores[norms == 0.0] = -np.inf
    return scores


def _result_at(db, idx: int, scores, dists, pool_size: int, fallback: bool) -> RetrievalResult:
    s = float(scores[idx])
    if math.isfinite(s):
        s = min(1.0, max(-1.0, s))
    else:
        s = math.nan  # zero-norm record reached only via fallback
    return RetrievalResult(
        record_id=db.records[idx].id,
        similarity=s,
        pool_size=pool_size,
        fallback_used=fallback,
        va_distance=float(dists[idx]),
    )


def retrieve(db: AffectDatabase, query: RetrievalQuery) -> RetrievalResult:
    """Pick the most source-similar record within the target's VA neighborhood.

    Ties on similarity break toward the earliest ingested record.  An empty
    pool falls back to the record VA-nearest to the target, flagged via
    ``fallback_used``.
    """
    return retrieve_top_k(db, query, k=1)[0]


def retrieve_top_k(db: AffectDatabase, query: RetrievalQuery, k: int = 1) -> list[RetrievalResult]:
    """Ranked top-k variant of retrieve (k=1 is the standard contract).

    Within the pool, records are ranked by similarity descending, ties by
    ingestion order.  The fallback path ranks by VA distance ascending.
    """
    if len(db) == 0:
        raise EmptyDatabaseError("cannot retrieve from an empty database")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    source = _resolve_source(db, query)
    scores = _score_all(db, source)
    dists = _va_distances(db, query.target_va)
    pool = np.flatnonzero(dists < query.tau)
    if pool.size > 0:
        order = pool[np.argsort(-scores[pool], kind="stable")]
        chosen = order[: min(k, order.size)]
        return [_result_at(db, int(i), scores, dists, int(pool.size), False) for i in chosen]
    order = np.argsort(dists, kind="stable")
    chosen = order[: min(k, order.size)]
    return [_result_at(db, int(i), scores, dists, 0, True) for i in chosen]


def sweep(db: AffectDatabase, source, grid: SweepGrid) -> SweepResult:
    """Run one retrieval per grid cell against a fixed source embedding.

    Output rows are ordered arousal descending top-to-bottom and columns
    valence ascending left-to-right; every cell equals an independent
    retrieve call (the similarity scan is shared across cells since the
    source never changes).
    """
    if len(db) == 0:
        raise EmptyDatabaseError("cannot sweep an empty database")
    source = as_embedding(source)
    scores = _score_all(db, source)
    rows = []
    a_desc = tuple(sorted(grid.a_values, reverse=True))
    for a in a_desc:
        row = []
        for v in grid.v_values:
            target = VaPoint(v, a)
            dists = _va_distances(db, target)
            pool = np.flatnonzero(dists < grid.tau)
            if pool.size > 0:
                best = int(pool[np.argmax(scores[pool])])
                row.append(_result_at(db, best, scores, dists, int(pool.size), False))
            else:
                best = int(np.argmin(dists))
                row.append(_result_at(db, best, scores, dists, 0, True))
        rows.append(tuple(row))
    return SweepResult(v_values=grid.v_values, a_values_desc=a_desc,
                       tau=grid.tau, rows=tuple(rows))
