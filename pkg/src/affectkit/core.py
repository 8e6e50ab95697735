"""Valence-arousal space primitives and vector math used by every module.

Conventions: valence and arousal both live in [-1, 1]; all arithmetic is
double precision (single precision is only a storage option for
embeddings, see ingest).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEmbeddingError, ShapeMismatchError


@dataclass(frozen=True)
class VaPoint:
    """A continuous emotion coordinate (valence, arousal) in [-1, 1]^2.

    Out-of-range or non-finite coordinates are rejected outright, never
    clamped, so bad data surfaces at construction time.
    """

    valence: float
    arousal: float

    def __post_init__(self):
        v, a = float(self.valence), float(self.arousal)
        if not (math.isfinite(v) and math.isfinite(a)):
            raise ValueError(f"VA coordinates must be finite, got ({v}, {a})")
        if not (-1.0 <= v <= 1.0 and -1.0 <= a <= 1.0):
            raise ValueError(f"VA coordinates must lie in [-1, 1], got ({v}, {a})")
        object.__setattr__(self, "valence", v)
        object.__setattr__(self, "arousal", a)

    def as_array(self) -> np.ndarray:
        return np.array([self.valence, self.arousal], dtype=np.float64)


class Quadrant(enum.Enum):
    """The four sign quadrants of VA space.

    Coordinates exactly 0 count as positive, so every point gets exactly
    one label and counts stay reproducible.
    """

    POS_POS = "V+A+"
    POS_NEG = "V+A-"
    NEG_POS = "V-A+"
    NEG_NEG = "V-A-"

    @property
    def label(self) -> str:
        return self.value


def quadrant(p: VaPoint) -> Quadrant:
    """Classify a VA point by coordinate signs (0 counts as positive)."""
    if p.valence >= 0.0:
        return Quadrant.POS_POS if p.arousal >= 0.0 else Quadrant.POS_NEG
    return Quadrant.NEG_POS if p.arousal >= 0.0 else Quadrant.NEG_NEG


def va_distance(p: VaPoint, q: VaPoint) -> float:
    """Euclidean distance between two VA points.

    hypot rather than sqrt(dv^2 + da^2): squaring underflows for
    differences below ~1e-162, which would break "zero iff equal".
    """
    return math.hypot(p.valence - q.valence, p.arousal - q.arousal)


class EmbeddingVector:
    """An opaque dense embedding with its Euclidean norm cached.

    Values are stored read-only; the dimension is data-driven (encoders
    are external, vectors arrive as plain arrays).
    """

    __slots__ = ("values", "cached_norm")

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ShapeMismatchError(f"embedding must be a nonempty 1-D vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding contains non-finite entries")
        arr.setflags(write=False)
        self.values = arr
        self.cached_norm = float(np.linalg.norm(arr))

    @classmethod
    def _from_validated(cls, view: np.ndarray, norm: float) -> "EmbeddingVector":
        # fast path for database rows: already finite, norm precomputed
        vec = cls.__new__(cls)
        vec.values = view
        vec.cached_norm = norm
        return vec

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim}, norm={self.cached_norm:.6g})"


def as_embedding(vec) -> EmbeddingVector:
    """Coerce an array-like or EmbeddingVector into an EmbeddingVector."""
    if isinstance(vec, EmbeddingVector):
        return vec
    return EmbeddingVector(vec)


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between two embeddings, in [-1, 1].

    Raises ShapeMismatchError on dimension mismatch and
    DegenerateEmbeddingError when either vector has zero norm.  The result
    is clamped to [-1, 1] to absorb last-ulp rounding.
    """
    u, v = as_embedding(u), as_embedding(v)
    if u.dim != v.dim:
        raise ShapeMismatchError(f"dimension mismatch: {u.dim} vs {v.dim}")
    if u.cached_norm == 0.0 or v.cached_norm == 0.0:
        raise DegenerateEmbeddingError("cosine similarity is undefined for zero-norm embeddings")
    s = float(np.dot(u.values, v.values)) / (u.cached_norm * v.cached_norm)
    return min(1.0, max(-1.0, s))
