"""Affect database ingestion, statistics, Gaussian fitting, and annotation validation.

The canonical on-disk format is JSONL, one record per line:

    {"id": str, "valence": float, "arousal": float, "attributes": [str],
     "embedding": [float], "affect_feature": [float]?, "image_path": str?}

CSV is supported for tabular tooling, with embeddings (and optionally
affect features) carried in a framed binary sidecar (JSON header line
with {dim, count, ids} followed by raw little-endian float32 rows).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .core import EmbeddingVector, Quadrant, VaPoint
from .errors import (
    DuplicateIdError,
    EmptyDatabaseError,
    IngestError,
    MatrixError,
    ShapeMismatchError,
    UndefinedCorrelationError,
)
from .fileio import read_framed, write_framed

logger = logging.getLogger(__name__)

DEFAULT_MIN_COUNT = 30
DEFAULT_COV_EPS = 1e-4


@dataclass(frozen=True)
class AffectRecord:
    """One database entry: identity, VA annotation, tags, and vectors."""

    id: str
    va: VaPoint
    attributes: frozenset[str] = frozenset()
    embedding: EmbeddingVector | None = None
    affect_feature: np.ndarray | None = None
    image_path: str | None = None


@dataclass(frozen=True)
class RejectedRecord:
    """A record refused at ingestion, with its 1-based source line."""

    line: int
    record_id: str | None
    reason: str


class AffectDatabase:
    """An immutable, ordered collection of affect records.

    Record order is ingestion order and is the deterministic tie-break for
    retrieval.  Embeddings are kept in one contiguous matrix so queries can
    score every record with a single matrix-vector product.
    """

    def __init__(self, records, attribute_catalog=None, storage_dtype=np.float64,
                 load_rejects=()):
        records = list(records)
        ids = set()
        for rec in records:
            if rec.id in ids:
                raise DuplicateIdError(f"duplicate record id {rec.id!r}")
            ids.add(rec.id)

        dims = {rec.embedding.dim for rec in records if rec.embedding is not None}
        if len(dims) > 1:
            raise IngestError(f"mixed embedding dimensions: {sorted(dims)}")
        with_emb = sum(1 for rec in records if rec.embedding is not None)
        if 0 < with_emb < len(records):
            raise IngestError("either every record carries an embedding or none does")

        aff_dims = {rec.affect_feature.shape[0] for rec in records
                    if rec.affect_feature is not None}
        if len(aff_dims) > 1:
            raise IngestError(f"mixed affect-feature dimensions: {sorted(aff_dims)}")

        if attribute_catalog is None:
            attribute_catalog = sorted({a for rec in records for a in rec.attributes})
        else:
            attribute_catalog = list(attribute_catalog)
            known = set(attribute_catalog)
            for rec in records:
                extra = rec.attributes - known
                if extra:
                    raise IngestError(
                        f"record {rec.id!r} has attributes outside the catalog: {sorted(extra)}")

        self.records: list[AffectRecord] = records
        self.attribute_catalog: list[str] = attribute_catalog
        self.embedding_dim: int = dims.pop() if dims else 0
        self.storage_dtype = np.dtype(storage_dtype)
        self.load_rejects: tuple[RejectedRecord, ...] = tuple(load_rejects)

        self._id_index = {rec.id: i for i, rec in enumerate(records)}
        self._attr_index = {a: k for k, a in enumerate(attribute_catalog)}

        n = len(records)
        self._va = np.empty((n, 2), dtype=np.float64)
        for i, rec in enumerate(records):
            self._va[i, 0] = rec.va.valence
            self._va[i, 1] = rec.va.arousal
        self._va.setflags(write=False)

        if self.embedding_dim:
            mat = np.empty((n, self.embedding_dim), dtype=self.storage_dtype)
            for i, rec in enumerate(records):
                mat[i] = rec.embedding.values
            mat.setflags(write=False)
            self._matrix = mat
            self._norms = np.sqrt(np.einsum("ij,ij->i", mat, mat, dtype=np.float64))
            self._norms.setflags(write=False)
            # rebind record embeddings onto matrix rows so the per-record
            # copies can be collected (the matrix is the canonical store)
            self.records = [
                replace(rec, embedding=EmbeddingVector._from_validated(
                    mat[i], float(self._norms[i])))
                for i, rec in enumerate(records)
            ]
        else:
            self._matrix = None
            self._norms = None
        self._fingerprint: str | None = None

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_arrays(cls, ids, va, embeddings=None, attributes=None,
                    affect_features=None, image_paths=None,
                    attribute_catalog=None, storage_dtype=np.float64):
        """Fast constructor from parallel arrays (no per-entry copies).

        `va` is (N, 2); `embeddings` is (N, D) or None.  When `embeddings`
        is already contiguous in the storage dtype the database takes
        ownership of it (the array is marked read-only, no copy is made);
        record embeddings become views into the shared matrix.
        """
        ids = list(ids)
        n = len(ids)
        va = np.asarray(va, dtype=np.float64)
        if va.shape != (n, 2):
            raise ShapeMismatchError(f"va must have shape ({n}, 2), got {va.shape}")
        bad = ~(np.isfinite(va).all(axis=1) & (np.abs(va) <= 1.0).all(axis=1))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise IngestError(
                f"record {ids[i]!r} (index {i}) has invalid VA {tuple(va[i])}")

        matrix = None
        norms = None
        if embeddings is not None:
            matrix = np.ascontiguousarray(embeddings, dtype=np.dtype(storage_dtype))
            if matrix.shape[0] != n:
                raise ShapeMismatchError("embeddings row count does not match ids")
            if not np.all(np.isfinite(matrix)):
                raise IngestError("embeddings contain non-finite entries")
            matrix.setflags(write=False)
            norms = np.sqrt(np.einsum("ij,ij->i", matrix, matrix, dtype=np.float64))

        records = []
        for i, rid in enumerate(ids):
            emb = None
            if matrix is not None:
                emb = EmbeddingVector._from_validated(matrix[i], float(norms[i]))
            aff = None
            if affect_features is not None:
                aff = np.asarray(affect_features[i], dtype=np.float64)
                if not np.all(np.isfinite(aff)):
                    raise IngestError(f"record {rid!r}: non-finite affect_feature")
            records.append(AffectRecord(
                id=str(rid),
                va=VaPoint(float(va[i, 0]), float(va[i, 1])),
                attributes=frozenset(attributes[i]) if attributes is not None else frozenset(),
                embedding=emb,
                affect_feature=aff,
                image_path=image_paths[i] if image_paths is not None else None,
            ))

        # Splice the prebuilt matrix in directly so huge embedding blocks are
        # never copied a second time.
        db = cls.__new__(cls)
        db.records = records
        if attribute_catalog is None:
            attribute_catalog = sorted({a for rec in records for a in rec.attributes})
        else:
            attribute_catalog = list(attribute_catalog)
            known = set(attribute_catalog)
            for rec in records:
                extra = rec.attributes - known
                if extra:
                    raise IngestError(
                        f"record {rec.id!r} has attributes outside the catalog: {sorted(extra)}")
        db.attribute_catalog = attribute_catalog
        db.embedding_dim = int(matrix.shape[1]) if matrix is not None else 0
        db.storage_dtype = np.dtype(storage_dtype)
        db.load_rejects = ()
        db._id_index = {rec.id: i for i, rec in enumerate(records)}
        if len(db._id_index) != n:
            seen = set()
            for rec in records:
                if rec.id in seen:
                    raise DuplicateIdError(f"duplicate record id {rec.id!r}")
                seen.add(rec.id)
        db._attr_index = {a: k for k, a in enumerate(attribute_catalog)}
        db._va = va.copy()
        db._va.setflags(write=False)
        db._matrix = matrix
        if norms is not None:
            norms.setflags(write=False)
        db._norms = norms
        db._fingerprint = None
        return db

    # -- basic accessors ---------------------------------------------------

    def __len__(self) -> int:
        return len(self.records)

    def index_of(self, record_id: str) -> int:
        try:
            return self._id_index[record_id]
        except KeyError:
            raise KeyError(f"unknown record id {record_id!r}") from None

    def record(self, record_id: str) -> AffectRecord:
        return self.records[self.index_of(record_id)]

    @property
    def va_array(self) -> np.ndarray:
        """(N, 2) float64 view of all VA annotations, ingestion order."""
        return self._va

    @property
    def embedding_matrix(self) -> np.ndarray | None:
        """(N, D) contiguous embedding matrix, or None for label-only sets."""
        return self._matrix

    @property
    def embedding_norms(self) -> np.ndarray | None:
        return self._norms

    def multi_hot(self, rec: AffectRecord) -> np.ndarray:
        """Binary attribute vector in catalog order."""
        y = np.zeros(len(self.attribute_catalog), dtype=np.float64)
        for a in rec.attributes:
            y[self._attr_index[a]] = 1.0
        return y

    def fingerprint(self) -> str:
        """Content hash over ids, VA, tags, and vector blocks (cached)."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update(b"affectkit/db/v1\n")
            h.update(f"{len(self)}|{self.embedding_dim}|{self.storage_dtype.name}\n".encode())
            h.update(json.dumps(self.attribute_catalog).encode())
            for rec in self.records:
                h.update(rec.id.encode("utf-8") + b"\x00")
                h.update(json.dumps(sorted(rec.attributes)).encode())
                h.update((rec.image_path or "").encode("utf-8") + b"\x00")
            h.update(self._va.tobytes())
            if self._matrix is not None:
                h.update(self._matrix.tobytes())
            for rec in self.records:
                if rec.affect_feature is not None:
                    h.update(rec.affect_feature.tobytes())
            self._fingerprint = h.hexdigest()
        return self._fingerprint


# ---------------------------------------------------------------------------
# Loading and saving
# ---------------------------------------------------------------------------

_REQUIRED_FIELDS = ("id", "valence", "arousal")


def _parse_record(obj: dict, line: int) -> AffectRecord:
    for key in _REQUIRED_FIELDS:
        if key not in obj:
            raise IngestError(f"missing required field {key!r}", line=line)
    try:
        va = VaPoint(float(obj["valence"]), float(obj["arousal"]))
    except (TypeError, ValueError) as exc:
        raise IngestError(str(exc), line=line) from exc
    emb = None
    if obj.get("embedding") is not None:
        try:
            emb = EmbeddingVector(obj["embedding"])
        except (TypeError, ValueError) as exc:
            raise IngestError(f"bad embedding: {exc}", line=line) from exc
    aff = None
    if obj.get("affect_feature") is not None:
        aff = np.asarray(obj["affect_feature"], dtype=np.float64)
        if aff.ndim != 1 or not np.all(np.isfinite(aff)):
            raise IngestError("bad affect_feature: must be a finite 1-D vector", line=line)
    attrs = obj.get("attributes") or ()
    if isinstance(attrs, str):
        raise IngestError("attributes must be a list of names, not a string", line=line)
    return AffectRecord(
        id=str(obj["id"]),
        va=va,
        attributes=frozenset(str(a) for a in attrs),
        embedding=emb,
        affect_feature=aff,
        image_path=obj.get("image_path"),
    )


def load_records(path, format: str = "jsonl", *, on_invalid: str = "raise",
                 attribute_catalog=None, sidecar=None, affect_sidecar=None,
                 storage_dtype=np.float64) -> AffectDatabase:
    """Load an affect database from disk.

    Args:
        path: records file (JSONL or CSV).
        format: "jsonl" or "csv".
        on_invalid: "raise" aborts on the first invalid record, naming its
            line; "skip" drops invalid records and retains them in
            ``db.load_rejects``.  Duplicate ids and mixed embedding
            dimensions are hard errors in both modes.
        attribute_catalog: optional explicit catalog; records with tags
            outside it are invalid.
        sidecar / affect_sidecar: framed binary files with embeddings /
            affect features, keyed by record id (CSV only; for JSONL the
            vectors live inline).
        storage_dtype: dtype of the shared embedding matrix (float64
            default; float32 halves memory for large sets).
    """
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unknown format {format!r}")
    if on_invalid not in ("raise", "skip"):
        raise ValueError(f"on_invalid must be 'raise' or 'skip', got {on_invalid!r}")

    if format == "jsonl":
        raw_rows = _read_jsonl_rows(path)
    else:
        raw_rows = _read_csv_rows(path)

    catalog_set = set(attribute_catalog) if attribute_catalog is not None else None
    records: list[AffectRecord] = []
    rejects: list[RejectedRecord] = []
    seen_ids: set[str] = set()
    for line, obj in raw_rows:
        try:
            rec = _parse_record(obj, line)
            if catalog_set is not None:
                extra = rec.attributes - catalog_set
                if extra:
                    raise IngestError(
                        f"attributes outside the catalog: {sorted(extra)}", line=line)
        except IngestError as exc:
            if on_invalid == "raise":
                raise
            rejects.append(RejectedRecord(line=line, record_id=str(obj.get("id", "")) or None,
                                          reason=str(exc)))
            logger.warning("skipping record at %s", exc)
            continue
        if rec.id in seen_ids:
            raise DuplicateIdError(f"duplicate record id {rec.id!r}", line=line)
        seen_ids.add(rec.id)
        records.append(rec)

    if format == "csv":
        records = _attach_sidecars(records, path, sidecar, affect_sidecar)

    db = AffectDatabase(records, attribute_catalog=attribute_catalog,
                        storage_dtype=storage_dtype, load_rejects=rejects)
    return db


def _read_jsonl_rows(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"invalid JSON ({exc.msg})", line=line_no) from exc
            if not isinstance(obj, dict):
                raise IngestError("each line must be a JSON object", line=line_no)
            rows.append((line_no, obj))
    return rows


def _read_csv_rows(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames:
            raise IngestError(f"{path}: CSV must have a header row including 'id'")
        for line_no, row in enumerate(reader, start=2):
            obj = {
                "id": row.get("id"),
                "valence": row.get("valence"),
                "arousal": row.get("arousal"),
                "attributes": [a for a in (row.get("attributes") or "").split("|") if a],
                "image_path": row.get("image_path") or None,
            }
            rows.append((line_no, obj))
    return rows


def _attach_sidecars(records, csv_path, sidecar, affect_sidecar):
    base, _ = os.path.splitext(os.fspath(csv_path))
    if sidecar is None and os.path.exists(base + ".emb"):
        sidecar = base + ".emb"
    if affect_sidecar is None and os.path.exists(base + ".aff"):
        affect_sidecar = base + ".aff"

    def load_block(p):
        header, flat = read_framed(p)
        dim, count, ids = int(header["dim"]), int(header["count"]), header["ids"]
        if len(ids) != count or flat.size != dim * count:
            raise IngestError(f"{p}: header/count/block size disagree")
        return {rid: row for rid, row in zip(ids, flat.reshape(count, dim))}

    out = records
    if sidecar is not None:
        by_id = load_block(sidecar)
        missing = [r.id for r in records if r.id not in by_id]
        if missing:
            raise IngestError(f"embedding sidecar is missing ids: {missing[:5]}")
        out = [AffectRecord(r.id, r.va, r.attributes,
                            EmbeddingVector(np.asarray(by_id[r.id], dtype=np.float64)),
                            r.affect_feature, r.image_path) for r in out]
    if affect_sidecar is not None:
        by_id = load_block(affect_sidecar)
        missing = [r.id for r in out if r.id not in by_id]
        if missing:
            raise IngestError(f"affect sidecar is missing ids: {missing[:5]}")
        out = [AffectRecord(r.id, r.va, r.attributes, r.embedding,
                            np.asarray(by_id[r.id], dtype=np.float64), r.image_path)
               for r in out]
    return out


def save_records(db: AffectDatabase, path, format: str = "jsonl") -> None:
    """Persist a database; load_records(save_records(db)) is an identity."""
    if format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for rec in db.records:
                obj = {
                    "id": rec.id,
                    "valence": rec.va.valence,
                    "arousal": rec.va.arousal,
                    "attributes": sorted(rec.attributes),
                }
                if rec.embedding is not None:
                    obj["embedding"] = [float(x) for x in rec.embedding.values]
                if rec.affect_feature is not None:
                    obj["affect_feature"] = [float(x) for x in rec.affect_feature]
                if rec.image_path is not None:
                    obj["image_path"] = rec.image_path
                fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
        return
    if format == "csv":
        base, _ = os.path.splitext(os.fspath(path))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "valence", "arousal", "attributes", "image_path"])
            for rec in db.records:
                writer.writerow([rec.id, repr(rec.va.valence), repr(rec.va.arousal),
                                 "|".join(sorted(rec.attributes)), rec.image_path or ""])
        if db.embedding_dim:
            write_embedding_sidecar(base + ".emb",
                                    [r.id for r in db.records], db.embedding_matrix)
        feats = [r.affect_feature for r in db.records]
        if any(f is not None for f in feats):
            block = np.stack([np.asarray(f, dtype=np.float64) for f in feats])
            write_embedding_sidecar(base + ".aff", [r.id for r in db.records], block)
        return
    raise ValueError(f"unknown format {format!r}")


def write_embedding_sidecar(path, ids, block: np.ndarray) -> None:
    block = np.asarray(block)
    header = {"dim": int(block.shape[1]), "count": int(block.shape[0]), "ids": list(ids)}
    write_framed(path, header, block)


# ---------------------------------------------------------------------------
# Dataset statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StatsReport:
    """Quadrant and attribute tallies for a database."""

    total: int
    quadrants: dict[str, int]
    attributes: dict[str, int]


def dataset_stats(db: AffectDatabase) -> StatsReport:
    """Tally records per VA quadrant and per attribute.

    Quadrant counts always sum to the record total (each point gets exactly
    one label under the >= 0 boundary rule).
    """
    if len(db) == 0:
        raise EmptyDatabaseError("cannot compute statistics of an empty database")
    va = db.va_array
    vpos = va[:, 0] >= 0.0
    apos = va[:, 1] >= 0.0
    quad_counts = {
        Quadrant.POS_POS.label: int(np.count_nonzero(vpos & apos)),
        Quadrant.POS_NEG.label: int(np.count_nonzero(vpos & ~apos)),
        Quadrant.NEG_POS.label: int(np.count_nonzero(~vpos & apos)),
        Quadrant.NEG_NEG.label: int(np.count_nonzero(~vpos & ~apos)),
    }
    attr_counts = {a: 0 for a in db.attribute_catalog}
    for rec in db.records:
        for a in rec.attributes:
            attr_counts[a] += 1
    return StatsReport(total=len(db), quadrants=quad_counts, attributes=attr_counts)


# ---------------------------------------------------------------------------
# Per-attribute VA Gaussians
# ---------------------------------------------------------------------------

class AttributeGaussian:
    """Mean and regularized covariance of one attribute's VA distribution.

    The inverse is cached at construction and checked against the
    covariance (product within 1e-8 of identity).
    """

    __slots__ = ("attribute", "mean", "covariance", "inverse", "sample_count")

    def __init__(self, attribute: str, mean, covariance, sample_count: int):
        mean = np.asarray(mean, dtype=np.float64).reshape(2)
        cov = np.asarray(covariance, dtype=np.float64).reshape(2, 2)
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise MatrixError(f"attribute {attribute!r}: non-finite Gaussian parameters")
        if abs(cov[0, 1] - cov[1, 0]) > 1e-9 * max(1.0, float(np.abs(cov).max())):
            raise MatrixError(f"attribute {attribute!r}: covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        eigvals = np.linalg.eigvalsh(cov)
        if eigvals.min() <= 0.0:
            raise MatrixError(
                f"attribute {attribute!r}: covariance is not positive definite "
                f"(eigenvalues {eigvals.tolist()})")
        inv = np.linalg.inv(cov)
        if np.abs(inv @ cov - np.eye(2)).max() > 1e-8:
            raise MatrixError(f"attribute {attribute!r}: covariance too ill-conditioned to invert")
        mean.setflags(write=False)
        cov.setflags(write=False)
        inv.setflags(write=False)
        self.attribute = attribute
        self.mean = mean
        self.covariance = cov
        self.inverse = inv
        self.sample_count = int(sample_count)

    def __repr__(self) -> str:
        return (f"AttributeGaussian({self.attribute!r}, mean={self.mean.tolist()}, "
                f"n={self.sample_count})")


@dataclass
class GaussianTable:
    """Fitted per-attribute Gaussians plus the attributes that were skipped."""

    gaussians: dict[str, AttributeGaussian] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def __contains__(self, attribute: str) -> bool:
        return attribute in self.gaussians

    def __getitem__(self, attribute: str) -> AttributeGaussian:
        return self.gaussians[attribute]

    def __len__(self) -> int:
        return len(self.gaussians)


def fit_attribute_gaussians(db: AffectDatabase, min_count: int = DEFAULT_MIN_COUNT,
                            eps: float = DEFAULT_COV_EPS) -> GaussianTable:
    """Fit a VA-space Gaussian per attribute with more than `min_count` members.

    The mean is the sample mean; the covariance is the unbiased (n-1)
    sample covariance plus eps*I, which keeps the inverse well defined even
    for degenerate attributes.  Attributes at or below the threshold are
    omitted and listed in ``table.skipped``.
    """
    if len(db) == 0:
        raise EmptyDatabaseError("cannot fit Gaussians on an empty database")
    members: dict[str, list[int]] = {a: [] for a in db.attribute_catalog}
    for i, rec in enumerate(db.records):
        for a in rec.attributes:
            members[a].append(i)

    table = GaussianTable()
    va = db.va_array
    for attr in db.attribute_catalog:
        idx = members[attr]
        n = len(idx)
        if n <= min_count:
            table.skipped.append(attr)
            continue
        pts = va[idx]
        mean = pts.mean(axis=0)
        if n >= 2:
            cov = np.cov(pts, rowvar=False, ddof=1)
        else:
            cov = np.zeros((2, 2))
        cov = cov + eps * np.eye(2)
        table.gaussians[attr] = AttributeGaussian(attr, mean, cov, n)
    return table


def save_gaussians(table: GaussianTable, path) -> None:
    """Write the Gaussian table as a JSON array of {attribute, mean, cov, count}."""
    rows = [{
        "attribute": g.attribute,
        "mean": g.mean.tolist(),
        "cov": g.covariance.tolist(),
        "count": g.sample_count,
    } for g in table.gaussians.values()]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")


def load_gaussians(path) -> GaussianTable:
    with open(path, "r", encoding="utf-8") as fh:
        rows = json.load(fh)
    table = GaussianTable()
    for row in rows:
        g = AttributeGaussian(row["attribute"], row["mean"], row["cov"], row["count"])
        table.gaussians[g.attribute] = g
    return table


# ---------------------------------------------------------------------------
# Annotation validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DimensionAgreement:
    pearson_r: float
    ccc: float
    mae: float


@dataclass(frozen=True)
class ValidationReport:
    """Model-vs-human agreement per VA dimension."""

    valence: DimensionAgreement
    arousal: DimensionAgreement


def _agreement(x: np.ndarray, y: np.ndarray, dimension: str) -> DimensionAgreement:
    mae = float(np.mean(np.abs(x - y)))
    mx, my = float(x.mean()), float(y.mean())
    # Population moments (divisor n), the common concordance convention.
    vx = float(np.mean((x - mx) ** 2))
    vy = float(np.mean((y - my) ** 2))
    cxy = float(np.mean((x - mx) * (y - my)))
    if vx == 0.0 or vy == 0.0:
        raise UndefinedCorrelationError(
            f"{dimension}: correlation undefined for a zero-variance series", mae=mae)
    r = cxy / math.sqrt(vx * vy)
    ccc = 2.0 * cxy / (vx + vy + (mx - my) ** 2)
    return DimensionAgreement(pearson_r=r, ccc=ccc, mae=mae)


def validate_annotations(model_va, human_va) -> ValidationReport:
    """Pearson r, Lin's concordance, and MAE between two VA annotation series.

    Raises ShapeMismatchError on length mismatch or fewer than two pairs,
    and UndefinedCorrelationError (MAE attached) when a series has zero
    variance.
    """
    if len(model_va) != len(human_va):
        raise ShapeMismatchError(
            f"series lengths differ: {len(model_va)} vs {len(human_va)}")
    if len(model_va) < 2:
        raise ShapeMismatchError("need at least two pairs to measure agreement")
    mv = np.array([[p.valence, p.arousal] for p in model_va], dtype=np.float64)
    hv = np.array([[p.valence, p.arousal] for p in human_va], dtype=np.float64)
    return ValidationReport(
        valence=_agreement(mv[:, 0], hv[:, 0], "valence"),
        arousal=_agreement(mv[:, 1], hv[:, 1], "arousal"),
    )
