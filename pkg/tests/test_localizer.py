import numpy as np
import pytest

from conftest import path_graph, random_connected_graph, star_graph
from sourceloc.diffusion import DiffusionConfig, estimate_tau, simulate, snapshot_of
from sourceloc.graph import bfs_distances, generate_small_world, top_degree_nodes
from sourceloc.localizer import (
    BosoulConfig,
    _derive_seeds,
    _netsleuth_scores,
    _round_robin_quota,
    bosoul_localize,
    jordan_localize,
    n_candidates,
    netsleuth_localize,
)
from sourceloc.spectral import build_basis
from sourceloc import surrogate


@pytest.fixture(scope="module")
def case():
    g = generate_small_world(80, 6, 0.1, seed=7)
    d = DiffusionConfig("SIR", 0.2, 0.1)
    o = snapshot_of(simulate(g, [3, 40], d, 4, np.random.default_rng(1)))
    return g, d, o


def small_cfg(d, **kw):
    base = dict(n_sources=2, pool_size=10, clusters=5, budget=15, rounds=20, diffusion=d, seed=0)
    base.update(kw)
    return BosoulConfig(**base)


class TestConfig:
    def test_defaults(self):
        c = BosoulConfig()
        assert (c.n_sources, c.pool_size, c.clusters, c.budget, c.rounds) == (3, 50, 20, 70, 100)
        assert n_candidates(c) == 19600

    @pytest.mark.parametrize(
        "kw",
        [{"budget": 10, "clusters": 20}, {"n_sources": 60}, {"rounds": 0}, {"sampling": "x"},
         {"cluster_space": "x"}, {"noise": "x"}],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            BosoulConfig(**kw)


class TestBosoul:
    def test_budget_exact_and_unique(self, case):
        g, d, o = case
        r = bosoul_localize(g, o, small_cfg(d))
        ids = [i for i, _ in r.evaluations]
        assert len(ids) == 15 and len(set(ids)) == 15
        assert len(r.trace) == 15 - 5
        assert len(r.sources) == 2

    def test_initial_design_covers_clusters(self, case):
        g, d, o = case
        r = bosoul_localize(g, o, small_cfg(d))
        first = [i for i, _ in r.evaluations[:5]]
        assert sorted(r.pool.assignment[first].tolist()) == list(range(5))

    def test_answer_is_posterior_argmax(self, case):
        g, d, o = case
        r = bosoul_localize(g, o, small_cfg(d))
        ids, taus = zip(*r.evaluations)
        model = surrogate.fit(r.pool.pool_indicators(list(ids)), list(taus))
        mean, _ = surrogate.posterior(model, r.pool.pool_indicators())
        assert r.pool.find(r.sources.members) == int(np.argmax(mean))
        assert r.predicted_tau == pytest.approx(mean.max())

    def test_evaluations_use_common_seed(self, case):
        g, d, o = case
        cfg = small_cfg(d)
        r = bosoul_localize(g, o, cfg)
        seed = _derive_seeds(cfg.seed)[2]
        for set_id, tau in r.evaluations[:3]:
            assert tau == estimate_tau(g, r.pool.members[set_id], o, d, cfg.rounds, seed).mean

    def test_reproducible(self, case):
        g, d, o = case
        a = bosoul_localize(g, o, small_cfg(d, seed=4))
        b = bosoul_localize(g, o, small_cfg(d, seed=4))
        assert a.evaluations == b.evaluations and a.sources == b.sources

    def test_exhaustive_budget_finds_best_tau(self, case):
        g, d, o = case
        cfg = small_cfg(d, pool_size=6, budget=15, clusters=3)
        r = bosoul_localize(g, o, cfg)
        taus = dict(r.evaluations)
        assert len(taus) == 15
        assert taus[r.pool.find(r.sources.members)] == max(taus.values())

    @pytest.mark.parametrize("kw", [{"sampling": "random"}, {"cluster_space": "indicator"},
                                    {"noise": "propagated"}, {"filter_adjacent": True}])
    def test_variants_run(self, case, kw):
        g, d, o = case
        r = bosoul_localize(g, o, small_cfg(d, **kw))
        assert len(r.evaluations) == 15

    def test_beta_zero_recovers_sources(self):
        g = generate_small_world(40, 4, 0.1, seed=2)
        pool = sorted(top_degree_nodes(g, 8))
        truth = [pool[1], pool[5]]
        o = np.zeros(40, dtype=np.int8)
        o[truth] = 1
        d = DiffusionConfig("SI", 0.0)
        r = bosoul_localize(g, o, small_cfg(d, pool_size=8, budget=28, clusters=4, rounds=3))
        assert list(r.sources.members) == truth

    def test_budget_over_candidates(self, case):
        g, d, o = case
        with pytest.raises(ValueError):
            bosoul_localize(g, o, small_cfg(d, pool_size=4, budget=7))

    def test_empty_snapshot(self, case):
        g, d, _ = case
        with pytest.raises(ValueError):
            bosoul_localize(g, np.zeros(g.n_nodes), small_cfg(d))

    def test_precomputed_basis(self, case):
        g, d, o = case
        a = bosoul_localize(g, o, small_cfg(d), basis=build_basis(g))
        b = bosoul_localize(g, o, small_cfg(d))
        assert a.sources == b.sources


def power_iteration_smallest(L, iters=20000):
    """Smallest-eigenvalue eigenvector of L via power iteration on cI - L."""
    c = np.abs(L).sum(1).max()
    M = c * np.eye(len(L)) - L
    v = np.ones(len(L)) / np.sqrt(len(L))
    for _ in range(iters):
        v = M @ v
        v /= np.linalg.norm(v)
    return np.abs(v)


class TestBaselines:
    def test_jordan_path_center(self):
        g = path_graph(7)
        assert list(jordan_localize(g, np.ones(7), 1).members) == [3]

    def test_jordan_tie_smallest_id(self):
        g = path_graph(4)
        assert list(jordan_localize(g, np.ones(4), 1).members) == [1]

    def test_jordan_two_components(self):
        g = path_graph(11)
        o = np.zeros(11)
        o[[0, 1, 2, 7, 8, 9, 10]] = 1
        # larger component {7..10} first: centre 8; then {0,1,2}: centre 1
        assert list(jordan_localize(g, o, 2).members) == [1, 8]

    def test_jordan_star(self):
        assert list(jordan_localize(star_graph(6), np.ones(7), 1).members) == [0]

    def test_padding(self):
        g = star_graph(4)
        o = np.zeros(5)
        o[0] = 1
        out = jordan_localize(g, o, 3)
        assert 0 in out and len(out) == 3
        assert list(netsleuth_localize(g, o, 3).members) == list(out.members)

    def test_round_robin(self):
        assert _round_robin_quota([5, 1, 3], 4) == [2, 1, 1]
        assert _round_robin_quota([1, 1], 5) == [1, 1]

    def test_netsleuth_scores_match_power_iteration(self, rng):
        g = random_connected_graph(40, 0.1, rng)
        nodes = np.flatnonzero(bfs_distances(g, 0) <= 2)
        sub = g.sparse_adjacency[nodes][:, nodes].toarray()
        L = np.diag(g.degrees[nodes]) - sub
        ref = power_iteration_smallest(L)
        np.testing.assert_allclose(_netsleuth_scores(g, nodes), ref, atol=1e-6)

    def test_netsleuth_path_prefers_interior(self):
        # Infected {1..5} of P7: the submatrix is tridiag(-1, 2, -1), whose
        # lowest mode sin(k pi / 6) peaks at the middle node.
        g = path_graph(7)
        o = np.array([0, 1, 1, 1, 1, 1, 0])
        assert list(netsleuth_localize(g, o, 1).members) == [3]
        np.testing.assert_allclose(
            _netsleuth_scores(g, np.arange(1, 6)), np.sin(np.arange(1, 6) * np.pi / 6) / np.sqrt(3), atol=1e-12
        )

    def test_netsleuth_distinct_picks(self, rng):
        g = random_connected_graph(60, 0.06, rng)
        o = snapshot_of(simulate(g, [0, 30], DiffusionConfig("SI", 0.5), 3, np.random.default_rng(0)))
        out = netsleuth_localize(g, o, 3)
        assert len(set(out.members)) == 3

    def test_si_path_single_source(self):
        g = path_graph(9)
        o = snapshot_of(simulate(g, [4], DiffusionConfig("SI", 1.0), 2, np.random.default_rng(0)))
        assert list(jordan_localize(g, o, 1).members) == [4]
