import itertools
from fractions import Fraction

import numpy as np
import pytest

from conftest import cycle_graph, path_graph, random_connected_graph, star_graph
from sourceloc.diffusion import (
    INFECTED,
    RECOVERED,
    DiffusionConfig,
    estimate_tau,
    initial_state,
    is_absorbing,
    read_snapshot,
    similarity,
    simulate,
    snapshot_of,
    step,
    write_snapshot,
)
from sourceloc.graph import bfs_distances


def exact_tau_si(g, sources, o_star, beta, patience, max_steps):
    """Exact expected peak similarity for SI by enumerating every trajectory.

    The chain state is (infected set, best so far, stale count); probabilities
    are kept as exact fractions.
    """
    n = g.n_nodes
    beta = Fraction(beta)
    nbrs = [set(g.neighbors(v)) for v in range(n)]

    def sim(inf):
        return sum((v in inf) == bool(o_star[v]) for v in range(n))

    start = frozenset(sources)
    frontier = {(start, sim(start), 0): Fraction(1)}
    expected = Fraction(0)
    for _ in range(max_steps):
        nxt = {}
        for (inf, best, stale), p in frontier.items():
            at_risk = [v for v in range(n) if v not in inf and nbrs[v] & inf]
            probs = [1 - (1 - beta) ** len(nbrs[v] & inf) for v in at_risk]
            for hits in itertools.product((0, 1), repeat=len(at_risk)):
                q = p
                for h, pv in zip(hits, probs):
                    q *= pv if h else 1 - pv
                if q == 0:
                    continue
                new = inf | {v for v, h in zip(at_risk, hits) if h}
                s = sim(new)
                if s > best:
                    key = (frozenset(new), s, 0)
                elif stale + 1 >= patience:
                    expected += q * best
                    continue
                else:
                    key = (frozenset(new), best, stale + 1)
                nxt[key] = nxt.get(key, 0) + q
        frontier = nxt
    expected += sum(p * best for (_, best, _), p in frontier.items())
    return expected


# Frozen result of exact_tau_si on C4, sources {0}, o* = (1,1,0,0), beta 0.5,
# patience 5, max_steps 50.
C4_EXACT_TAU = 3.3330078125


class TestConfig:
    def test_defaults(self):
        c = DiffusionConfig()
        assert (c.model, c.infection_rate, c.recovery_rate, c.max_steps, c.patience) == ("SIR", 0.1, 0.1, 50, 5)

    def test_model_case_insensitive(self):
        assert DiffusionConfig(model="si").model == "SI"

    @pytest.mark.parametrize(
        "kwargs",
        [{"model": "SEIR"}, {"infection_rate": 1.5}, {"recovery_rate": -0.1}, {"max_steps": 0}, {"patience": 0}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            DiffusionConfig(**kwargs)


class TestDeterministicFronts:
    def test_si_beta_one_on_path(self):
        g = path_graph(7)
        cfg = DiffusionConfig("SI", 1.0, 0.0)
        rng = np.random.default_rng(0)
        state = initial_state(7, [3])
        for t in range(1, 4):
            state = step(state, g, cfg, rng)
            expected = (np.abs(np.arange(7) - 3) <= t).astype(np.int8)
            assert np.array_equal(snapshot_of(state), expected)

    def test_si_beta_one_matches_bfs_ball(self, rng):
        g = random_connected_graph(60, 0.06, rng)
        cfg = DiffusionConfig("SI", 1.0, 0.0)
        dist = np.minimum(bfs_distances(g, 4), bfs_distances(g, 30))
        for t in range(5):
            out = snapshot_of(simulate(g, [4, 30], cfg, t, np.random.default_rng(t)))
            assert np.array_equal(out, (dist <= t).astype(np.int8))

    def test_ic_beta_one_is_bfs_ball(self, rng):
        g = random_connected_graph(40, 0.08, rng)
        cfg = DiffusionConfig("IC", 1.0)
        dist = bfs_distances(g, 0)
        for t in range(4):
            assert np.array_equal(
                snapshot_of(simulate(g, [0], cfg, t, np.random.default_rng(1))), (dist <= t).astype(np.int8)
            )

    def test_sir_gamma_one_star(self):
        g = star_graph(5)
        cfg = DiffusionConfig("SIR", 1.0, 1.0)
        state = step(initial_state(6, [0]), g, cfg, np.random.default_rng(0))
        assert state.status[0] == RECOVERED
        assert (state.status[1:] == INFECTED).all()
        state = step(state, g, cfg, np.random.default_rng(0))
        assert (state.status[1:] == RECOVERED).all()
        assert is_absorbing(state, cfg)

    @pytest.mark.parametrize("model", ["SI", "SIR", "SIS", "IC"])
    def test_beta_zero_stays_at_sources(self, model):
        g = cycle_graph(8)
        cfg = DiffusionConfig(model, 0.0, 0.0)
        out = snapshot_of(simulate(g, [2, 5], cfg, 10, np.random.default_rng(9)))
        assert np.flatnonzero(out).tolist() == [2, 5]

    def test_sis_returns_to_susceptible(self):
        g = path_graph(2)
        cfg = DiffusionConfig("SIS", 0.0, 1.0)
        state = step(initial_state(2, [0]), g, cfg, np.random.default_rng(0))
        assert state.status.tolist() == [0, 0]
        assert is_absorbing(state, cfg)


class TestStochastic:
    def test_sir_gamma_zero_equals_si(self, rng):
        g = random_connected_graph(80, 0.05, rng)
        si = DiffusionConfig("SI", 0.3)
        sir = DiffusionConfig("SIR", 0.3, 0.0)
        for seed in range(10):
            a = simulate(g, [0, 1], si, 8, np.random.default_rng(seed))
            b = simulate(g, [0, 1], sir, 8, np.random.default_rng(seed))
            assert np.array_equal(a.status, b.status)

    def test_si_monotone(self, rng):
        g = random_connected_graph(50, 0.08, rng)
        cfg = DiffusionConfig("SI", 0.2)
        gen = np.random.default_rng(5)
        state = initial_state(50, [7])
        for _ in range(15):
            nxt = step(state, g, cfg, gen)
            assert (snapshot_of(nxt) >= snapshot_of(state)).all()
            state = nxt

    def test_single_edge_infection_rate(self):
        g = path_graph(2)
        cfg = DiffusionConfig("SI", 0.3)
        hits = sum(
            simulate(g, [0], cfg, 1, np.random.default_rng(s)).status[1] == INFECTED for s in range(20000)
        )
        p = hits / 20000
        assert abs(p - 0.3) < 3 * np.sqrt(0.3 * 0.7 / 20000) + 1e-9

    def test_two_infected_neighbours_aggregate(self):
        # Node 1 sits between two infected nodes: 1 - (1 - 0.3)^2 = 0.51.
        g = path_graph(3)
        cfg = DiffusionConfig("SI", 0.3)
        hits = sum(
            simulate(g, [0, 2], cfg, 1, np.random.default_rng(s)).status[1] == INFECTED for s in range(20000)
        )
        assert abs(hits / 20000 - 0.51) < 3 * np.sqrt(0.51 * 0.49 / 20000)


class TestTau:
    def test_similarity(self):
        assert similarity([1, 0, 1, 1], [1, 1, 0, 1]) == 2
        with pytest.raises(ValueError):
            similarity([1, 0], [1, 0, 0])

    def test_exact_match_beta_zero(self):
        g = cycle_graph(6)
        o = np.array([0, 1, 0, 0, 1, 0])
        est = estimate_tau(g, [1, 4], o, DiffusionConfig("SI", 0.0), 20, seed=1)
        assert est.mean == 6.0
        assert est.variance == 0.0
        assert est.rounds == 20

    def test_deterministic_front_peak(self):
        # P5 from node 0 with beta 1: the infected prefix grows by one node a
        # step, so the peak similarity against o* = (1,1,1,0,0) is exactly 5.
        g = path_graph(5)
        est = estimate_tau(g, [0], np.array([1, 1, 1, 0, 0]), DiffusionConfig("SI", 1.0), 3, seed=0)
        assert est.mean == 5.0

    def test_oracle_enumeration_value(self):
        exact = exact_tau_si(cycle_graph(4), [0], [1, 1, 0, 0], 0.5, 5, 50)
        assert float(exact) == C4_EXACT_TAU

    def test_monte_carlo_matches_exact(self):
        est = estimate_tau(
            cycle_graph(4), [0], np.array([1, 1, 0, 0]), DiffusionConfig("SI", 0.5), 10000, seed=2024
        )
        se = np.sqrt(est.variance / est.rounds)
        assert abs(est.mean - C4_EXACT_TAU) < 3 * se

    def test_reproducible_and_seed_sensitive(self, rng):
        g = random_connected_graph(60, 0.06, rng)
        o = snapshot_of(simulate(g, [0, 1], DiffusionConfig(), 6, np.random.default_rng(3)))
        a = estimate_tau(g, [0, 1], o, DiffusionConfig(), 30, seed=11)
        b = estimate_tau(g, [0, 1], o, DiffusionConfig(), 30, seed=11)
        c = estimate_tau(g, [0, 1], o, DiffusionConfig(), 30, seed=12)
        assert np.array_equal(a.maxima, b.maxima)
        assert not np.array_equal(a.maxima, c.maxima)

    def test_workers_do_not_change_result(self, rng):
        g = random_connected_graph(60, 0.06, rng)
        o = snapshot_of(simulate(g, [3], DiffusionConfig(), 6, np.random.default_rng(3)))
        a = estimate_tau(g, [3], o, DiffusionConfig(), 40, seed=5, workers=1)
        b = estimate_tau(g, [3], o, DiffusionConfig(), 40, seed=5, workers=4)
        assert np.array_equal(a.maxima, b.maxima)

    def test_prefix_rounds_agree(self, rng):
        # Round r depends only on (seed, r), so fewer rounds give a prefix.
        g = random_connected_graph(40, 0.1, rng)
        o = np.zeros(40, dtype=np.int8)
        o[:5] = 1
        a = estimate_tau(g, [0], o, DiffusionConfig(), 10, seed=3)
        b = estimate_tau(g, [0], o, DiffusionConfig(), 25, seed=3)
        assert np.array_equal(a.maxima, b.maxima[:10])

    @pytest.mark.parametrize("kwargs", [{"sources": []}, {"rounds": 0}, {"o_star": np.zeros(3)}])
    def test_invalid_arguments(self, kwargs):
        args = {"sources": [0], "rounds": 5, "o_star": np.zeros(4)}
        args.update(kwargs)
        with pytest.raises(ValueError):
            estimate_tau(path_graph(4), args["sources"], args["o_star"], DiffusionConfig(), args["rounds"], 0)


class TestSnapshotIO:
    def test_roundtrip(self, tmp_path):
        o = np.array([0, 1, 1, 0, 1], dtype=np.int8)
        write_snapshot(tmp_path / "s.csv", o)
        assert (tmp_path / "s.csv").read_text().splitlines()[:2] == ["node_id,state", "0,0"]
        assert np.array_equal(read_snapshot(tmp_path / "s.csv", 5), o)

    def test_missing_nodes_default_zero(self, tmp_path):
        (tmp_path / "s.csv").write_text("node_id,state\n3,1\n")
        assert read_snapshot(tmp_path / "s.csv", 5).tolist() == [0, 0, 0, 1, 0]

    @pytest.mark.parametrize("body", ["id,state\n0,1\n", "node_id,state\n9,1\n", "node_id,state\n0,2\n"])
    def test_bad_files(self, tmp_path, body):
        (tmp_path / "s.csv").write_text(body)
        with pytest.raises(ValueError):
            read_snapshot(tmp_path / "s.csv", 5)


class TestOperationExamples:
    def test_si_p3_front(self):
        g = path_graph(3)
        cfg = DiffusionConfig("SI", 1.0)
        gen = np.random.default_rng(0)
        s1 = step(initial_state(3, [0]), g, cfg, gen)
        assert np.flatnonzero(snapshot_of(s1)).tolist() == [0, 1]
        assert np.flatnonzero(snapshot_of(step(s1, g, cfg, gen))).tolist() == [0, 1, 2]

    def test_sir_source_recovers(self):
        g = path_graph(3)
        cfg = DiffusionConfig("SIR", 0.0, 1.0)
        s1 = step(initial_state(3, [0]), g, cfg, np.random.default_rng(0))
        assert s1.status[0] == RECOVERED
        assert not snapshot_of(s1).any()

    def test_snapshot_maps_recovered_to_zero(self):
        from sourceloc.diffusion import DiffusionState
        status = np.array([RECOVERED, 0, INFECTED], dtype=np.int8)
        assert snapshot_of(DiffusionState(status, np.zeros(3, bool))).tolist() == [0, 0, 1]
        assert not snapshot_of(initial_state(3, [])).any()

    def test_ic_keeps_activation_history(self):
        g = path_graph(4)
        cfg = DiffusionConfig("IC", 1.0)
        s = step(initial_state(4, [0]), g, cfg, np.random.default_rng(0))
        assert snapshot_of(s).tolist() == [1, 1, 0, 0]
        assert s.frontier.tolist() == [False, True, False, False]

    def test_similarity_examples(self):
        o = np.array([1, 0, 1, 1, 0, 0, 1, 0, 1, 1])
        assert similarity(o, o) == 10
        assert similarity(o, 1 - o) == 0
        assert similarity([1, 1, 0, 0], [1, 0, 1, 0]) == 2

    def test_p4_front_peak(self):
        est = estimate_tau(path_graph(4), [0], np.array([1, 1, 0, 0]), DiffusionConfig("SI", 1.0), 7, seed=3)
        assert est.mean == 4.0 and est.variance == 0.0
