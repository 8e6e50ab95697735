"""Read-only HTTP service over a loaded affect database.

The database is immutable for the process lifetime, so any number of
concurrent requests can be served without coordination.  Every response
body carries the engine version and the database content fingerprint;
identical requests against the same fingerprint produce byte-identical
bodies (wall-clock time appears only in HTTP headers).
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .core import EmbeddingVector, VaPoint
from .errors import AffectError, ConfigError
from .grounding import DEFAULT_GAMMA, mahalanobis_weight
from .ingest import AffectDatabase, GaussianTable, dataset_stats, load_gaussians, load_records
from .metrics import VaPredictor, evaluate_manifest, predict_va
from .retrieval import DEFAULT_TAU, RetrievalQuery, SweepGrid, retrieve, sweep

logger = logging.getLogger(__name__)


@dataclass
class ServiceConfig:
    """Startup configuration; declared paths must exist."""

    database_path: str
    database_format: str = "jsonl"
    host: str = "127.0.0.1"
    port: int = 8000
    gaussians_path: str | None = None
    attribute_embeddings_path: str | None = None
    checkpoint_path: str | None = None
    default_tau: float = DEFAULT_TAU
    request_log_path: str | None = None
    storage_dtype: str = "float64"

    def __post_init__(self):
        if not (self.default_tau > 0.0 and math.isfinite(self.default_tau)):
            raise ConfigError(f"default_tau must be positive, got {self.default_tau!r}")
        for name in ("database_path", "gaussians_path", "attribute_embeddings_path",
                     "checkpoint_path"):
            p = getattr(self, name)
            if p is not None and not os.path.exists(p):
                raise ConfigError(f"{name} does not exist: {p}")


class RetrieveRequest(BaseModel):
    source_id: str | None = None
    source_embedding: list[float] | None = None
    valence: float = Field(ge=-1.0, le=1.0)
    arousal: float = Field(ge=-1.0, le=1.0)
    tau: float | None = Field(default=None, gt=0.0)


class SweepRequest(BaseModel):
    source_id: str | None = None
    source_embedding: list[float] | None = None
    v_values: list[float] = Field(min_length=1)
    a_values: list[float] = Field(min_length=1)
    tau: float | None = Field(default=None, gt=0.0)


class PredictVaRequest(BaseModel):
    embedding: list[float] = Field(min_length=1)
    k: int = Field(default=5, ge=1)
    weighting: str = "uniform"


class EvalRequest(BaseModel):
    entries: list[dict]
    use_knn_predictor: bool = False
    k: int = Field(default=5, ge=1)
    weighting: str = "uniform"


def _json_safe(x: float | None) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return x


def _result_payload(db: AffectDatabase, res) -> dict:
    rec = db.record(res.record_id)
    return {
        "record_id": res.record_id,
        "similarity": _json_safe(res.similarity),
        "pool_size": res.pool_size,
        "fallback_used": res.fallback_used,
        "va_distance": res.va_distance,
        "valence": rec.va.valence,
        "arousal": rec.va.arousal,
        "attributes": sorted(rec.attributes),
        "image_path": rec.image_path,
    }


def create_app(db: AffectDatabase, *, gaussians: GaussianTable | None = None,
               default_tau: float = DEFAULT_TAU,
               request_log_path: str | None = None) -> FastAPI:
    """Assemble the service around an already-loaded database."""
    app = FastAPI(title="affectkit", version=__version__)
    # the API is read-only, so a permissive CORS policy lets the browser
    # explorer run from any origin (file://, dev server, ...)
    from fastapi.middleware.cors import CORSMiddleware
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    fingerprint = db.fingerprint()
    gaussians = gaussians if gaussians is not None else GaussianTable()

    def meta() -> dict:
        return {"engine_version": __version__, "fingerprint": fingerprint}

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = [str(x) for x in first.get("loc", []) if x != "body"]
        return JSONResponse(status_code=422, content={
            "code": "validation_error",
            "field": ".".join(loc) or None,
            "message": first.get("msg", "invalid request"),
        })

    @app.exception_handler(KeyError)
    async def on_key_error(request: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={
            "code": "not_found", "message": str(exc.args[0]) if exc.args else "not found"})

    @app.exception_handler(AffectError)
    async def on_engine_error(request: Request, exc: AffectError):
        return JSONResponse(status_code=400, content={
            "code": type(exc).__name__, "message": str(exc)})

    if request_log_path:
        @app.middleware("http")
        async def request_log(request: Request, call_next):
            t0 = time.perf_counter()
            response = await call_next(request)
            entry = {
                "ts": time.time(),
                "method": request.method,
                "path": request.url.path,
                "status": response.status_code,
                "duration_ms": round((time.perf_counter() - t0) * 1e3, 3),
            }
            with open(request_log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")
            return response

    def build_query(source_id, source_embedding, valence, arousal, tau) -> RetrievalQuery:
        emb = EmbeddingVector(source_embedding) if source_embedding is not None else None
        return RetrievalQuery(
            target_va=VaPoint(valence, arousal),
            source_embedding=emb,
            source_id=source_id,
            tau=default_tau if tau is None else tau,
        )

    @app.get("/health")
    async def health():
        return {"status": "ok", "records": len(db), "embedding_dim": db.embedding_dim,
                **meta()}

    @app.get("/stats")
    async def stats():
        rep = dataset_stats(db)
        return {"total": rep.total, "quadrants": rep.quadrants,
                "attributes": rep.attributes, **meta()}

    @app.post("/retrieve")
    async def retrieve_endpoint(req: RetrieveRequest):
        query = build_query(req.source_id, req.source_embedding, req.valence,
                            req.arousal, req.tau)
        res = retrieve(db, query)
        return {"result": _result_payload(db, res), "tau": query.tau, **meta()}

    @app.post("/sweep")
    async def sweep_endpoint(req: SweepRequest):
        if (req.source_id is None) == (req.source_embedding is None):
            raise ConfigError("provide exactly one of source_id or source_embedding")
        if req.source_id is not None:
            emb = db.record(req.source_id).embedding
            if emb is None:
                raise ConfigError(f"record {req.source_id!r} carries no embedding")
        else:
            emb = EmbeddingVector(req.source_embedding)
        grid = SweepGrid(v_values=tuple(req.v_values), a_values=tuple(req.a_values),
                         tau=default_tau if req.tau is None else req.tau)
        out = sweep(db, emb, grid)
        return {
            "v_values": list(out.v_values),
            "a_values_desc": list(out.a_values_desc),
            "tau": out.tau,
            "rows": [[_result_payload(db, cell) for cell in row] for row in out.rows],
            **meta(),
        }

    @app.get("/weights")
    async def weights(v: float = Query(ge=-1.0, le=1.0), a: float = Query(ge=-1.0, le=1.0),
                      gamma: float = Query(default=DEFAULT_GAMMA, gt=0.0)):
        point = VaPoint(v, a)
        rows = [{"attribute": g.attribute,
                 "weight": mahalanobis_weight(point, g, gamma)}
                for g in gaussians.gaussians.values()]
        return {"weights": rows, "gamma": gamma, **meta()}

    @app.post("/predict-va")
    async def predict_va_endpoint(req: PredictVaRequest):
        predictor = VaPredictor(k=req.k, weighting=req.weighting)
        point = predict_va(db, EmbeddingVector(req.embedding), predictor)
        return {"valence": point.valence, "arousal": point.arousal, **meta()}

    @app.post("/eval")
    async def eval_endpoint(req: EvalRequest):
        predictor = VaPredictor(k=req.k, weighting=req.weighting)
        report = evaluate_manifest(req.entries, db=db if req.use_knn_predictor else None,
                                   predictor=predictor)
        return {
            "pairs": [{k: _json_safe(v) if isinstance(v, float) else v
                       for k, v in vars(p).items()} for p in report.pairs],
            "aggregate": report.aggregate,
            "counts": report.counts,
            **meta(),
        }

    return app


def app_from_config(config: ServiceConfig) -> FastAPI:
    """Load every artifact named by the config and assemble the app."""
    dtype = np.float32 if config.storage_dtype == "float32" else np.float64
    db = load_records(config.database_path, format=config.database_format,
                      storage_dtype=dtype)
    gaussians = load_gaussians(config.gaussians_path) if config.gaussians_path else None
    logger.info("loaded database: %d records, dim %d, fingerprint %s",
                len(db), db.embedding_dim, db.fingerprint()[:12])
    return create_app(db, gaussians=gaussians, default_tau=config.default_tau,
                      request_log_path=config.request_log_path)


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted; startup failures are fatal."""
    import uvicorn

    app = app_from_config(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
