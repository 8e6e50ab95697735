"""Evaluation suite: pixel fidelity, structural similarity, semantic
consistency, affective controllability, and throughput normalization.

Neural encoders never run in-engine: embedding-based metrics consume
externally computed vectors, and perceptual distances (LPIPS) are
report-only pass-through columns.  The VA predictor behind V-Err/A-Err is
a documented k-NN stand-in over the reference database; externally
predicted VA values are accepted wherever it would be used.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .core import EmbeddingVector, VaPoint, as_embedding, cosine_similarity
from .errors import ConfigError, EmptyDatabaseError, ShapeMismatchError
from .ingest import AffectDatabase

PSNR_AGGREGATE_CAP_DB = 100.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class ImageBuffer:
    """A decoded image: row-major pixels with a declared value range.

    ``value_range`` is "8bit" (values in [0, 255]) or "unit" ([0, 1]);
    pixels are stored as float64 with shape (height, width, channels).
    """

    width: int
    height: int
    channels: int
    pixels: np.ndarray
    value_range: str = "8bit"

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.value_range not in ("8bit", "unit"):
            raise ValueError(f"value_range must be '8bit' or 'unit', got {self.value_range!r}")
        px = np.asarray(self.pixels, dtype=np.float64).reshape(
            self.height, self.width, self.channels)
        if not np.all(np.isfinite(px)):
            raise ValueError("pixels contain non-finite values")
        if px.min() < 0.0 or px.max() > self.range_max:
            raise ValueError(
                f"pixels outside declared range [0, {self.range_max}]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def range_max(self) -> float:
        return 255.0 if self.value_range == "8bit" else 1.0

    @classmethod
    def from_array(cls, array, value_range: str = "8bit") -> "ImageBuffer":
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, pixels=arr, value_range=value_range)

    @classmethod
    def from_png(cls, path) -> "ImageBuffer":
        from PIL import Image
        with Image.open(path) as img:
            if img.mode == "L":
                arr = np.asarray(img, dtype=np.float64)[:, :, None]
            else:
                arr = np.asarray(img.convert("RGB"), dtype=np.float64)
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, pixels=arr, value_range="8bit")


def _check_pair(a: ImageBuffer, b: ImageBuffer) -> None:
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels):
        raise ShapeMismatchError(
            f"image shapes differ: {(a.height, a.width, a.channels)} vs "
            f"{(b.height, b.width, b.channels)}")
    if a.value_range != b.value_range:
        raise ShapeMismatchError("images declare different value ranges")


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images.

    The +inf sentinel is preserved for single pairs and capped at 100 dB
    only inside corpus averages.
    """
    _check_pair(a, b)
    mse = float(np.mean((a.pixels - b.pixels) ** 2))
    if mse == 0.0:
        return math.inf
    peak = a.range_max
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    # Separable correlation, then crop to the fully-supported interior.
    r = (g.size - 1) // 2
    out = correlate1d(img, g, axis=0, mode="constant")
    out = correlate1d(out, g, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean local structural similarity (11x11 Gaussian window, sigma 1.5).

    Stabilization constants C1 = (K1*L)^2, C2 = (K2*L)^2 use the declared
    range maximum L; channels are averaged.  Images must be at least the
    window size in each dimension.
    """
    _check_pair(a, b)
    if min(a.width, a.height) < SSIM_WINDOW:
        raise ShapeMismatchError(
            f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = _gaussian_window()
    peak = a.range_max
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    per_channel = []
    for ch in range(a.channels):
        x = a.pixels[:, :, ch]
        y = b.pixels[:, :, ch]
        mu_x = _filter_valid(x, g)
        mu_y = _filter_valid(y, g)
        var_x = _filter_valid(x * x, g) - mu_x * mu_x
        var_y = _filter_valid(y * y, g) - mu_y * mu_y
        cov = _filter_valid(x * y, g) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        per_channel.append(float(np.mean(num / den)))
    return float(np.mean(per_channel))


def clip_i(edited, reference) -> float:
    """Cosine similarity between edited and reference embeddings."""
    return cosine_similarity(edited, reference)


def clip_i_corpus(pairs) -> float:
    """Arithmetic mean of clip_i over (edited, reference) embedding pairs."""
    vals = [cosine_similarity(e, r) for e, r in pairs]
    if not vals:
        raise EmptyDatabaseError("clip_i_corpus needs at least one pair")
    return float(np.mean(vals))


@dataclass(frozen=True)
class VaPredictor:
    """Built-in k-NN VA estimator over the reference database.

    Cosine distance (1 - cosine similarity) ranks neighbors; weighting is
    "uniform" or "inverse-distance".  An exact embedding match
    short-circuits to the matched records' VA (their inverse-distance
    weight would diverge).
    """

    strategy: str = "knn"
    k: int = 5
    weighting: str = "uniform"

    def __post_init__(self):
        if self.strategy != "knn":
            raise ConfigError(f"unknown predictor strategy {self.strategy!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.weighting not in ("uniform", "inverse-distance"):
            raise ConfigError(f"unknown weighting {self.weighting!r}")


EXACT_MATCH_DISTANCE = 1e-12


def predict_va(db: AffectDatabase, embedding, predictor: VaPredictor = VaPredictor()) -> VaPoint:
    """Estimate the VA of an embedding from its nearest database records."""
    if len(db) == 0:
        raise EmptyDatabaseError("cannot predict VA against an empty database")
    if predictor.k > len(db):
        raise ConfigError(f"k={predictor.k} exceeds database size {len(db)}")
    emb = as_embedding(embedding)
    if db.embedding_dim == 0:
        raise ConfigError("database has no embeddings")
    if emb.dim != db.embedding_dim:
        raise ShapeMismatchError(f"embedding dim {emb.dim} != database dim {db.embedding_dim}")
    if emb.cached_norm == 0.0:
        raise ConfigError("query embedding has zero norm")
    u = np.asarray(emb.values, dtype=db.storage_dtype)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = (db.embedding_matrix @ u) / (db.embedding_norms * emb.cached_norm)
    cos = np.asarray(cos, dtype=np.float64)
    cos[db.embedding_norms == 0.0] = -1.0
    dist = 1.0 - np.clip(cos, -1.0, 1.0)

    nearest = np.argsort(dist, kind="stable")[: predictor.k]
    exact = nearest[dist[nearest] <= EXACT_MATCH_DISTANCE]
    if exact.size > 0:
        pts = db.va_array[exact]
        mean = pts.mean(axis=0)
    elif predictor.weighting == "uniform":
        mean = db.va_array[nearest].mean(axis=0)
    else:
        w = 1.0 / dist[nearest]
        w = w / w.sum()
        mean = (db.va_array[nearest] * w[:, None]).sum(axis=0)
    v = min(1.0, max(-1.0, float(mean[0])))
    a = min(1.0, max(-1.0, float(mean[1])))
    return VaPoint(v, a)


def va_error(predicted: VaPoint, target: VaPoint) -> tuple[float, float]:
    """Per-dimension L1 errors (|v_hat - v_t|, |a_hat - a_t|)."""
    return abs(predicted.valence - target.valence), abs(predicted.arousal - target.arousal)


def va_error_corpus(pairs) -> tuple[float, float]:
    """Mean V-Err and A-Err over (predicted, target) pairs."""
    errs = [va_error(p, t) for p, t in pairs]
    if not errs:
        raise EmptyDatabaseError("va_error_corpus needs at least one pair")
    arr = np.asarray(errs, dtype=np.float64)
    return float(arr[:, 0].mean()), float(arr[:, 1].mean())


def time_per_megapixel(elapsed_seconds: float, width: int, height: int) -> float:
    """Seconds normalized per million output pixels."""
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    if elapsed_seconds < 0:
        raise ValueError("elapsed time must be nonnegative")
    return elapsed_seconds / (width * height / 1e6)


# ---------------------------------------------------------------------------
# Manifest-driven corpus evaluation
# ---------------------------------------------------------------------------

@dataclass
class PairReport:
    pair_id: str
    psnr: float | None = None
    ssim: float | None = None
    clip_i: float | None = None
    v_err: float | None = None
    a_err: float | None = None
    lpips: float | None = None
    predicted_valence: float | None = None
    predicted_arousal: float | None = None


@dataclass
class EvalReport:
    pairs: list[PairReport]
    aggregate: dict[str, float]
    counts: dict[str, int]


def load_manifest(path) -> list[dict]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "pair_id" not in obj:
                raise ValueError(f"line {line_no}: manifest entry needs a pair_id")
            entries.append(obj)
    return entries


def evaluate_manifest(entries, db: AffectDatabase | None = None,
                      predictor: VaPredictor = VaPredictor(),
                      base_dir=None) -> EvalReport:
    """Compute every metric each manifest entry has inputs for.

    PSNR/SSIM need both image paths; CLIP-I needs both embeddings; V-Err
    and A-Err use the entry's predicted VA when given, otherwise the k-NN
    predictor against ``db``.  LPIPS is pass-through only.
    """
    import os

    def resolve(p):
        if base_dir is not None and not os.path.isabs(p):
            return os.path.join(base_dir, p)
        return p

    pairs = []
    for entry in entries:
        row = PairReport(pair_id=str(entry["pair_id"]))
        target = VaPoint(float(entry["target_valence"]), float(entry["target_arousal"]))

        if entry.get("source_image") and entry.get("edited_image"):
            src = ImageBuffer.from_png(resolve(entry["source_image"]))
            edt = ImageBuffer.from_png(resolve(entry["edited_image"]))
            row.psnr = psnr(edt, src)
            row.ssim = ssim(edt, src)

        if entry.get("edited_embedding") is not None and \
                entry.get("reference_embedding") is not None:
            row.clip_i = clip_i(EmbeddingVector(entry["edited_embedding"]),
                                EmbeddingVector(entry["reference_embedding"]))

        predicted = None
        if entry.get("predicted_valence") is not None and \
                entry.get("predicted_arousal") is not None:
            predicted = VaPoint(float(entry["predicted_valence"]),
                                float(entry["predicted_arousal"]))
        elif db is not None and entry.get("edited_embedding") is not None:
            predicted = predict_va(db, EmbeddingVector(entry["edited_embedding"]), predictor)
        if predicted is not None:
            row.predicted_valence = predicted.valence
            row.predicted_arousal = predicted.arousal
            row.v_err, row.a_err = va_error(predicted, target)

        if entry.get("lpips") is not None:
            row.lpips = float(entry["lpips"])
        pairs.append(row)

    aggregate: dict[str, float] = {}
    counts: dict[str, int] = {}
    for key in ("psnr", "ssim", "clip_i", "v_err", "a_err", "lpips"):
        vals = [getattr(p, key) for p in pairs if getattr(p, key) is not None]
        counts[key] = len(vals)
        if vals:
            if key == "psnr":
                vals = [min(v, PSNR_AGGREGATE_CAP_DB) for v in vals]
            aggregate[key] = float(np.mean(vals))
    return EvalReport(pairs=pairs, aggregate=aggregate, counts=counts)


def report_table(report: EvalReport) -> str:
    """Aligned text table of per-pair metrics plus the aggregate row."""
    cols = ["pair_id", "psnr", "ssim", "clip_i", "v_err", "a_err", "lpips"]

    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return "inf" if math.isinf(v) else f"{v:.4f}"
        return str(v)

    rows = [[fmt(getattr(p, c)) for c in cols] for p in report.pairs]
    agg = ["mean"] + [fmt(report.aggregate.get(c)) for c in cols[1:]]
    rows.append(agg)
    widths = [max(len(cols[i]), max(len(r[i]) for r in rows)) for i in range(len(cols))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)),
             "  ".join("-" * w for w in widths)]
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)
