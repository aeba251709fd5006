"""Pool pruning bound, candidate generation, support counting, and scoring."""

import numpy as np
import pytest

from iterkg.axioms import (
    Axiom, AxiomType, PoolConfig, PooledAxiom, count_support_and_head, generate_pool,
    induce_axioms, min_sample_size, normalize_scores, sample_size_grid_sup, score_axiom_raw,
)
from iterkg.blocks import BlockDiagMatrix
from iterkg.embedding import TrainConfig, init_model
from iterkg.kg import KnowledgeGraph, Triple, Vocabulary

from oracles import dense_block_matrix, enumerate_supports, random_graph


def graph(triples, n_ent=None, n_rel=None):
    n_ent = n_ent or (max(max(t[0], t[2]) for t in triples) + 1)
    n_rel = n_rel or (max(t[1] for t in triples) + 1)
    ents = Vocabulary(f"e{i}" for i in range(n_ent))
    rels = Vocabulary(f"r{i}" for i in range(n_rel))
    return KnowledgeGraph([Triple(*t) for t in triples], ents, rels)


class TestSampleSizeBound:
    def test_paper_operating_point(self):
        assert min_sample_size(0.5, 0.95) == 6

    def test_certain_axioms_need_three(self):
        assert min_sample_size(1.0, 0.95) == 3

    def test_tighter_coverage_needs_ten(self):
        assert min_sample_size(0.5, 0.99) == 10

    def test_grid_sup_agrees_with_closed_form(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = float(rng.uniform(0.05, 1.0))
            t = float(rng.uniform(0.5, 0.999))
            closed = -np.log(1 - t) / p
            sup = sample_size_grid_sup(p, t)
            assert sup <= closed + 1e-9
            assert int(np.ceil(sup)) == min_sample_size(p, t)

    def test_grid_resolution_stable(self):
        for pts in (10**3, 10**4, 10**5):
            a = sample_size_grid_sup(0.5, 0.95, grid_points=pts)
            b = sample_size_grid_sup(0.5, 0.95, grid_points=10**6)
            assert int(np.ceil(a)) == int(np.ceil(b)) == 6

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            min_sample_size(0.0, 0.95)
        with pytest.raises(ValueError):
            min_sample_size(0.5, 1.0)


class TestAxiomType:
    def test_arities(self):
        arities = {t: t.arity for t in AxiomType}
        assert list(arities.values()) == [1, 1, 1, 2, 2, 2, 3]

    def test_self_equivalence_rejected(self):
        with pytest.raises(ValueError):
            Axiom(AxiomType.EQUIVALENT, (1, 1))

    def test_arity_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Axiom(AxiomType.INVERSE, (1,))


class TestSupportCounting:
    def test_reflexive(self):
        kg = graph([(0, 0, 0)])
        assert count_support_and_head(kg, Axiom(AxiomType.REFLEXIVE, (0,))) == (1, 1)

    def test_chain_single_grounding(self):
        kg = graph([(0, 0, 1), (1, 1, 2), (0, 2, 2)])
        ax = Axiom(AxiomType.SUB_PROPERTY_CHAIN, (0, 1, 2))
        assert count_support_and_head(kg, ax) == (1, 1)

    def test_symmetric_counts_ordered(self):
        kg = graph([(0, 0, 1), (1, 0, 0), (2, 0, 0)])
        assert count_support_and_head(kg, Axiom(AxiomType.SYMMETRIC, (0,))) == (2, 3)

    def test_all_types_match_exhaustive_enumeration(self):
        rng = np.random.default_rng(1)
        for _ in range(15):
            n_ent = int(rng.integers(8, 24))
            triples = random_graph(rng, n_ent, 5, int(rng.integers(40, 140)))
            kg = graph(triples, n_ent, 5)
            axioms = [Axiom(t, (0,)) for t in
                      (AxiomType.REFLEXIVE, AxiomType.SYMMETRIC, AxiomType.TRANSITIVE)]
            axioms += [Axiom(AxiomType.EQUIVALENT, (1, 2)), Axiom(AxiomType.SUB_PROPERTY, (3, 4)),
                       Axiom(AxiomType.INVERSE, (2, 3)),
                       Axiom(AxiomType.SUB_PROPERTY_CHAIN, (0, 1, 2))]
            for ax in axioms:
                assert count_support_and_head(kg, ax) == enumerate_supports(kg.triples, ax, n_ent), ax


class TestGeneratePool:
    def test_mutual_pair_gives_symmetric(self):
        kg = graph([(0, 0, 1), (1, 0, 0)])
        pool = generate_pool(kg, PoolConfig(), np.random.default_rng(0))
        sym = [pa for pa in pool if pa.axiom == Axiom(AxiomType.SYMMETRIC, (0,))]
        assert len(sym) == 1 and sym[0].support == 2

    def test_support_one_excluded(self):
        kg = graph([(0, 0, 1), (0, 1, 1)])
        pool = generate_pool(kg, PoolConfig(), np.random.default_rng(0))
        assert not any(pa.axiom.type is AxiomType.EQUIVALENT for pa in pool)

    def test_planted_inverse_found_with_full_support(self):
        pairs = [(i, 25 + i) for i in range(25)]
        triples = [(a, 0, b) for a, b in pairs] + [(b, 1, a) for a, b in pairs]
        kg = graph(triples)
        pool = generate_pool(kg, PoolConfig(), np.random.default_rng(3))
        entry = [pa for pa in pool if pa.axiom == Axiom(AxiomType.INVERSE, (1, 0))]
        assert entry and entry[0].support == 25 and entry[0].head_size == 25

    def test_admission_rule_holds_for_every_entry(self):
        rng = np.random.default_rng(4)
        triples = random_graph(rng, 20, 4, 150)
        kg = graph(triples, 20, 4)
        pool = generate_pool(kg, PoolConfig(), rng)
        for pa in pool:
            n, head_n = count_support_and_head(kg, pa.axiom)
            assert pa.support == n and pa.head_size == head_n
            assert n >= 2

    def test_deterministic_and_order_independent(self):
        rng_triples = np.random.default_rng(5)
        triples = random_graph(rng_triples, 15, 3, 80)
        kg1 = graph(triples, 15, 3)
        kg2 = graph(triples[::-1], 15, 3)
        p1 = generate_pool(kg1, PoolConfig(), np.random.default_rng(42))
        p2 = generate_pool(kg2, PoolConfig(), np.random.default_rng(42))
        assert p1 == p2


def identity_like(model):
    return BlockDiagMatrix.identity(model.n_scalars, model.n_blocks)


class TestRawScores:
    def model(self, seed=0, dim=8):
        return init_model(4, 6, TrainConfig(dim=dim, seed=seed))

    def test_reflexive_identity_scores_zero(self):
        m = self.model()
        m.rel_scalars[0] = 1.0
        m.rel_rot[0, :, 0] = 1.0
        m.rel_rot[0, :, 1] = 0.0
        assert score_axiom_raw(m, Axiom(AxiomType.REFLEXIVE, (0,))) == 0.0

    def test_inverse_of_reciprocal_scores_zero(self):
        m = self.model()
        m.rel_scalars[0] = 2.0
        m.rel_rot[0, :, 0] = 0.6
        m.rel_rot[0, :, 1] = 0.8
        # conjugate over modulus inverts a rotation-scale block
        m.rel_scalars[1] = 0.5
        mod2 = 0.6**2 + 0.8**2
        m.rel_rot[1, :, 0] = 0.6 / mod2
        m.rel_rot[1, :, 1] = -0.8 / mod2
        assert score_axiom_raw(m, Axiom(AxiomType.INVERSE, (0, 1))) == pytest.approx(0.0, abs=1e-12)

    def test_matches_dense_oracle_all_types(self):
        m = self.model(seed=3)
        ident = np.eye(m.dim)

        def dense(r):
            return dense_block_matrix(m.rel_scalars[r], m.rel_rot[r])

        cases = [
            (Axiom(AxiomType.REFLEXIVE, (0,)), dense(0) - ident),
            (Axiom(AxiomType.SYMMETRIC, (1,)), dense(1) @ dense(1) - ident),
            (Axiom(AxiomType.TRANSITIVE, (2,)), dense(2) @ dense(2) - dense(2)),
            (Axiom(AxiomType.EQUIVALENT, (0, 1)), dense(0) - dense(1)),
            (Axiom(AxiomType.SUB_PROPERTY, (2, 3)), dense(2) - dense(3)),
            (Axiom(AxiomType.INVERSE, (4, 5)), dense(4) @ dense(5) - ident),
            (Axiom(AxiomType.SUB_PROPERTY_CHAIN, (0, 1, 2)), dense(0) @ dense(1) - dense(2)),
        ]
        for ax, diff in cases:
            assert score_axiom_raw(m, ax) == pytest.approx(np.linalg.norm(diff), abs=1e-10), ax

    def test_scalar_slot_permutation_invariance(self):
        m = self.model(seed=5)
        ax = Axiom(AxiomType.SUB_PROPERTY_CHAIN, (0, 1, 2))
        before = score_axiom_raw(m, ax)
        perm = np.random.default_rng(0).permutation(m.n_scalars)
        m.rel_scalars = m.rel_scalars[:, perm]
        assert score_axiom_raw(m, ax) == pytest.approx(before, abs=1e-12)


def pooled(ax, support=2, head=10):
    return PooledAxiom(ax, support, head)


class TestNormalization:
    def test_three_raws_map_to_unit_interval_ends(self):
        entries = [(pooled(Axiom(AxiomType.REFLEXIVE, (r,))), raw) for r, raw in enumerate((2.0, 4.0, 6.0))]
        scored = normalize_scores(entries)
        assert [sa.score for sa in scored] == [1.0, 0.5, 0.0]

    def test_single_axiom_gets_half(self):
        scored = normalize_scores([(pooled(Axiom(AxiomType.SYMMETRIC, (0,))), 3.3)])
        assert scored[0].score == 0.5

    def test_types_normalized_independently(self):
        ref = [(pooled(Axiom(AxiomType.REFLEXIVE, (r,))), raw) for r, raw in enumerate((1.0, 3.0))]
        inv = [(pooled(Axiom(AxiomType.INVERSE, (0, 1))), 10.0),
               (pooled(Axiom(AxiomType.INVERSE, (1, 0))), 30.0)]
        a = normalize_scores(ref + inv)
        b = normalize_scores(ref + inv[::-1])
        ref_scores_a = [sa.score for sa in a if sa.axiom.type is AxiomType.REFLEXIVE]
        ref_scores_b = [sa.score for sa in b if sa.axiom.type is AxiomType.REFLEXIVE]
        assert ref_scores_a == ref_scores_b == [1.0, 0.0]


class TestInduce:
    def test_one_axiom_per_type_all_half(self):
        m = init_model(4, 6, TrainConfig(dim=8, seed=1))
        pool = [pooled(Axiom(AxiomType.REFLEXIVE, (0,))), pooled(Axiom(AxiomType.INVERSE, (0, 1))),
                pooled(Axiom(AxiomType.SUB_PROPERTY_CHAIN, (0, 1, 2)))]
        assert all(sa.score == 0.5 for sa in induce_axioms(m, pool))

    def test_planted_matrix_ranks_first_in_type(self):
        m = init_model(4, 6, TrainConfig(dim=8, seed=2))
        m.rel_scalars[3] = 1.0
        m.rel_rot[3, :, 0] = 1.0
        m.rel_rot[3, :, 1] = 0.0
        pool = [pooled(Axiom(AxiomType.REFLEXIVE, (r,))) for r in range(6)]
        best = induce_axioms(m, pool)[0]
        assert best.axiom == Axiom(AxiomType.REFLEXIVE, (3,))
        assert best.score == 1.0

    def test_rerun_is_identical(self):
        m = init_model(4, 6, TrainConfig(dim=8, seed=3))
        pool = [pooled(Axiom(AxiomType.EQUIVALENT, (a, b))) for a in range(3) for b in range(3) if a != b]
        assert induce_axioms(m, pool) == induce_axioms(m, pool)
