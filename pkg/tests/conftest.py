import numpy as np
import pytest

from affectkit import AffectDatabase, VaPoint


@pytest.fixture
def fixture_db():
    """The canonical 3-record database used across retrieval examples.

    A sits at the (0.7, 0.3) target; B and C are 0.6325 and 1.2042 away.
    Embeddings are orthogonal unit vectors so cosine rankings are obvious.
    """
    return AffectDatabase.from_arrays(
        ids=["A", "B", "C"],
        va=[[0.7, 0.3], [0.1, 0.1], [-0.5, 0.2]],
        embeddings=np.eye(3),
        attributes=[{"sunset"}, {"forest"}, {"storm"}],
    )


@pytest.fixture
def quad_db():
    """Four records, one per VA quadrant."""
    return AffectDatabase.from_arrays(
        ids=["pp", "pn", "np", "nn"],
        va=[[0.5, 0.5], [0.5, -0.5], [-0.5, 0.5], [-0.5, -0.5]],
        embeddings=np.eye(4),
    )


def random_database(rng, n, dim, *, duplicate_fraction=0.0, attributes=False):
    """Synthetic database with optional exact-duplicate embeddings and VA."""
    emb = rng.standard_normal((n, dim))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    va = rng.uniform(-1.0, 1.0, size=(n, 2))
    if duplicate_fraction > 0.0 and n >= 2:
        k = max(1, int(n * duplicate_fraction))
        src = rng.integers(0, n, size=k)
        dst = rng.integers(0, n, size=k)
        emb[dst] = emb[src]
        va[dst] = va[src]
    attrs = None
    if attributes:
        names = ["fire", "water", "tree", "sky"]
        attrs = [{names[i] for i in rng.choice(4, size=rng.integers(0, 3), replace=False)}
                 for _ in range(n)]
    return AffectDatabase.from_arrays(
        ids=[f"r{i}" for i in range(n)], va=va, embeddings=emb, attributes=attrs)


def db_entries(db):
    """(id, v, a, embedding) tuples for the brute-force oracles."""
    return [(rec.id, rec.va.valence, rec.va.arousal, np.array(rec.embedding.values))
            for rec in db.records]


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def make_va(v, a):
    return VaPoint(v, a)
