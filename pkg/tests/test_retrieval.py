"""Two-stage retrieval: pools, selection, fallback, sweeps."""

import numpy as np
import pytest

from affectkit import (
    AffectDatabase,
    ConfigError,
    DegenerateEmbeddingError,
    EmbeddingVector,
    EmptyDatabaseError,
    RetrievalQuery,
    ShapeMismatchError,
    SweepGrid,
    VaPoint,
    candidate_pool,
    retrieve,
    retrieve_top_k,
    sweep,
)
from affectkit.retrieval import DEFAULT_TAU
from conftest import db_entries, random_database
from oracles import brute_force_pool, brute_force_retrieve


def q(v, a, emb=None, sid=None, tau=DEFAULT_TAU):
    return RetrievalQuery(
        target_va=VaPoint(v, a),
        source_embedding=EmbeddingVector(emb) if emb is not None else None,
        source_id=sid,
        tau=tau,
    )


class TestCandidatePool:
    def test_hand_case(self, fixture_db):
        # B is 0.6325 away, C 1.2042; only A is inside tau = 0.3
        assert candidate_pool(fixture_db, VaPoint(0.7, 0.3), 0.3) == {"A"}

    def test_diameter_bound(self, fixture_db):
        assert candidate_pool(fixture_db, VaPoint(0.0, 0.0), 2.9) == {"A", "B", "C"}

    def test_boundary_is_strict(self):
        # record exactly at distance tau (0.25 is exactly representable)
        db = AffectDatabase.from_arrays(ids=["x"], va=[[0.0, 0.25]],
                                        embeddings=[[1.0]])
        assert candidate_pool(db, VaPoint(0.0, 0.0), 0.25) == set()
        assert candidate_pool(db, VaPoint(0.0, 0.0), 0.2500001) == {"x"}

    def test_matches_oracle(self, rng):
        for _ in range(30):
            db = random_database(rng, int(rng.integers(1, 60)), 4)
            target = VaPoint(*rng.uniform(-1, 1, size=2))
            tau = float(rng.uniform(0.05, 2.0))
            assert candidate_pool(db, target, tau) == \
                brute_force_pool(db_entries(db), target.valence, target.arousal, tau)

    def test_monotone_in_tau(self, rng):
        db = random_database(rng, 80, 4)
        target = VaPoint(0.1, -0.2)
        pools = [candidate_pool(db, target, t) for t in np.arange(0.05, 1.05, 0.05)]
        for small, large in zip(pools, pools[1:]):
            assert small <= large

    def test_bad_tau(self, fixture_db):
        with pytest.raises(ConfigError):
            candidate_pool(fixture_db, VaPoint(0, 0), 0.0)


class TestRetrieve:
    def test_hand_case(self, fixture_db):
        res = retrieve(fixture_db, q(0.7, 0.3, emb=[1.0, 0.0, 0.0]))
        assert res.record_id == "A"
        assert res.pool_size == 1
        assert not res.fallback_used
        assert res.va_distance == 0.0

    def test_self_similarity_wins(self, rng):
        db = random_database(rng, 20, 6)
        rec = db.records[7]
        res = retrieve(db, q(rec.va.valence, rec.va.arousal, sid=rec.id, tau=0.5))
        assert res.record_id == rec.id
        assert res.similarity == pytest.approx(1.0, abs=1e-12)

    def test_fallback(self, fixture_db):
        res = retrieve(fixture_db, q(0.9, -0.9, emb=[0, 1, 0], tau=0.05))
        assert res.fallback_used
        assert res.pool_size == 0
        # nearest by VA: A at hypot(0.2, 1.2), B at hypot(0.8, 1.0), C at hypot(1.4, 1.1)
        assert res.record_id == "A"

    def test_fallback_flag_iff_empty_pool(self, rng):
        for _ in range(40):
            db = random_database(rng, 30, 3)
            tau = float(rng.uniform(0.01, 0.8))
            res = retrieve(db, q(*rng.uniform(-1, 1, size=2),
                                 emb=rng.standard_normal(3), tau=tau))
            assert res.fallback_used == (res.pool_size == 0)

    def test_tie_breaks_to_earliest(self):
        emb = np.array([[0.6, 0.8], [0.6, 0.8], [0.6, 0.8]])
        db = AffectDatabase.from_arrays(
            ids=["first", "second", "third"],
            va=[[0.0, 0.0], [0.0, 0.1], [0.1, 0.0]], embeddings=emb)
        res = retrieve(db, q(0.0, 0.0, emb=[0.6, 0.8], tau=1.0))
        assert res.record_id == "first"

    def test_scale_invariance(self, rng):
        db = random_database(rng, 50, 5)
        base = rng.standard_normal(5)
        target = VaPoint(0.2, 0.2)
        ref = retrieve(db, q(target.valence, target.arousal, emb=base, tau=0.6))
        for c in (1e-6, 0.5, 3.0, 1e6):
            res = retrieve(db, q(target.valence, target.arousal, emb=c * base, tau=0.6))
            assert res.record_id == ref.record_id

    def test_determinism(self, rng):
        db = random_database(rng, 40, 4)
        query = q(0.3, -0.1, emb=[1.0, 0.2, -0.3, 0.5], tau=0.4)
        first = retrieve(db, query)
        for _ in range(5):
            assert retrieve(db, query) == first

    def test_matches_oracle_randomized(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 120))
            db = random_database(rng, n, 8, duplicate_fraction=0.2)
            entries = db_entries(db)
            u = rng.standard_normal(8)
            v, a = rng.uniform(-1, 1, size=2)
            tau = float(rng.uniform(0.02, 1.5))
            got = retrieve(db, q(v, a, emb=u, tau=tau))
            want_id, want_pool, want_fb = brute_force_retrieve(entries, u, v, a, tau)
            assert (got.record_id, got.pool_size, got.fallback_used) == \
                (want_id, want_pool, want_fb)

    def test_empty_database(self):
        db = AffectDatabase([])
        with pytest.raises(EmptyDatabaseError):
            retrieve(db, q(0, 0, emb=[1.0]))

    def test_zero_norm_source(self, fixture_db):
        with pytest.raises(DegenerateEmbeddingError):
            retrieve(fixture_db, q(0, 0, emb=[0.0, 0.0, 0.0]))

    def test_dim_mismatch(self, fixture_db):
        with pytest.raises(ShapeMismatchError):
            retrieve(fixture_db, q(0, 0, emb=[1.0, 0.0]))

    def test_unknown_source_id(self, fixture_db):
        with pytest.raises(KeyError):
            retrieve(fixture_db, q(0, 0, sid="nope"))

    def test_query_validation(self):
        with pytest.raises(ConfigError):
            RetrievalQuery(target_va=VaPoint(0, 0), tau=0.3)  # no source
        with pytest.raises(ConfigError):
            RetrievalQuery(target_va=VaPoint(0, 0),
                           source_embedding=EmbeddingVector([1.0]), tau=-1.0)

    def test_default_tau(self):
        query = RetrievalQuery(target_va=VaPoint(0, 0),
                               source_embedding=EmbeddingVector([1.0]))
        assert query.tau == DEFAULT_TAU == 0.3


class TestTopK:
    def test_top1_equals_retrieve(self, rng):
        db = random_database(rng, 30, 4)
        query = q(0.0, 0.0, emb=rng.standard_normal(4), tau=0.9)
        assert retrieve_top_k(db, query, k=1)[0] == retrieve(db, query)

    def test_ranked_descending(self, rng):
        db = random_database(rng, 30, 4)
        query = q(0.0, 0.0, emb=rng.standard_normal(4), tau=2.9)
        top = retrieve_top_k(db, query, k=5)
        sims = [r.similarity for r in top]
        assert sims == sorted(sims, reverse=True)

    def test_k_capped_at_pool(self, fixture_db):
        top = retrieve_top_k(fixture_db, q(0.7, 0.3, emb=[1, 0, 0], tau=0.3), k=10)
        assert len(top) == 1 and top[0].record_id == "A"


class TestSweep:
    def test_single_cell_equals_retrieve(self, fixture_db):
        grid = SweepGrid(v_values=(0.7,), a_values=(0.3,), tau=0.3)
        out = sweep(fixture_db, EmbeddingVector([1.0, 0.0, 0.0]), grid)
        single = retrieve(fixture_db, q(0.7, 0.3, emb=[1, 0, 0], tau=0.3))
        assert out.rows[0][0] == single

    def test_matches_independent_retrievals(self, rng):
        db = random_database(rng, 12, 5)
        u = rng.standard_normal(5)
        vs = (-1.0, 0.0, 1.0)
        avs = (-1.0, 0.0, 1.0)
        out = sweep(db, EmbeddingVector(u), SweepGrid(v_values=vs, a_values=avs, tau=0.8))
        assert out.a_values_desc == (1.0, 0.0, -1.0)
        for i, a in enumerate(out.a_values_desc):
            for j, v in enumerate(vs):
                want = retrieve(db, q(v, a, emb=u, tau=0.8))
                assert out.rows[i][j] == want

    def test_duplicate_coordinates_identical(self, rng):
        db = random_database(rng, 15, 3)
        u = rng.standard_normal(3)
        out = sweep(db, EmbeddingVector(u),
                    SweepGrid(v_values=(0.2, 0.2), a_values=(0.5,), tau=0.5))
        assert out.rows[0][0] == out.rows[0][1]

    def test_row_orientation(self, rng):
        db = random_database(rng, 15, 3)
        out = sweep(db, EmbeddingVector(rng.standard_normal(3)),
                    SweepGrid(v_values=(-0.5, 0.5), a_values=(-0.5, 0.5), tau=3.0))
        # top row must be the high-arousal row
        assert out.a_values_desc[0] == 0.5

    def test_grid_validation(self):
        with pytest.raises(ConfigError):
            SweepGrid(v_values=(), a_values=(0.0,))
        with pytest.raises(ConfigError):
            SweepGrid(v_values=(0.5, -0.5), a_values=(0.0,))  # descending
        with pytest.raises(ConfigError):
            SweepGrid(v_values=(0.0,), a_values=(1.5,))  # out of range
