import numpy as np
import pytest

from monosig import abm
from monosig.systems import InvalidParameterError, LinkSpace, with_committed


class TestPopulation:
    def test_macrostate(self):
        pop = abm.AgentPopulation(np.array([0, 0, 1, 2]))
        assert np.allclose(pop.macrostate(3), [0.5, 0.25, 0.25])

    def test_too_small(self):
        with pytest.raises(InvalidParameterError):
            abm.AgentPopulation(np.array([0]))

    def test_bad_edges(self):
        with pytest.raises(InvalidParameterError):
            abm.AgentPopulation(np.array([0, 1]), edges=np.array([[0, 0]]))
        with pytest.raises(InvalidParameterError):
            abm.AgentPopulation(np.array([0, 1]),
                                edges=np.array([[0, 1], [1, 0]]))

    def test_link_macrostate_complete_matches_explicit(self):
        spins = np.array([0, 0, 1, 2, 2])
        complete = abm.AgentPopulation(spins)
        edges = np.array([(i, j) for i in range(5) for j in range(i + 1, 5)])
        explicit = abm.AgentPopulation(spins, edges)
        assert np.allclose(complete.link_macrostate(3),
                           explicit.link_macrostate(3))
        assert abs(complete.link_macrostate(3).sum() - 1.0) < 1e-12


class TestStep:
    def test_at_most_one_agent_changes(self, long_sys, rng):
        pop = abm.AgentPopulation(rng.integers(3, size=50), rng_seed=0)
        for _ in range(200):
            new = abm.step(pop, long_sys, rng)
            assert (new.spins != pop.spins).sum() <= 1
            assert new.N == pop.N
            pop = new

    def test_consensus_absorbing(self, long_sys, rng):
        pop = abm.AgentPopulation(np.zeros(20, dtype=int))
        for _ in range(100):
            pop = abm.step(pop, long_sys, rng)
        assert (pop.spins == 0).all()

    def test_committed_never_changes(self, committed_sys, rng):
        c = committed_sys.spins.index("C_A")
        spins = np.array([2] * 10 + [c] * 5)
        pop = abm.AgentPopulation(spins)
        for _ in range(2000):
            pop = abm.step(pop, committed_sys, rng)
        assert (pop.spins[10:] == c).all()

    def test_unknown_selection(self, long_sys, rng):
        pop = abm.AgentPopulation(np.array([0, 1]))
        with pytest.raises(InvalidParameterError):
            abm.step(pop, long_sys, rng, selection="nearest")


class TestRun:
    def test_zero_sweeps(self, long_sys):
        pop = abm.AgentPopulation(np.array([0, 1, 2, 2]))
        traj = abm.run(pop, long_sys, sweeps=0)
        assert traj.times.tolist() == [0.0]
        assert np.allclose(traj.states[0], [0.25, 0.25, 0.5])

    def test_reproducible(self, long_sys):
        pop = abm.AgentPopulation(np.tile([0, 1, 2], 20), rng_seed=42)
        t1 = abm.run(pop, long_sys, 5.0, record_every=1.0)
        t2 = abm.run(pop, long_sys, 5.0, record_every=1.0)
        assert np.array_equal(t1.states, t2.states)
        assert np.array_equal(t1.times, t2.times)

    def test_record_grid(self, long_sys):
        pop = abm.AgentPopulation(np.tile([0, 2], 25), rng_seed=1)
        traj = abm.run(pop, long_sys, 3.0, record_every=1.0)
        assert np.allclose(traj.times, [0.0, 1.0, 2.0, 3.0])

    def test_zero_degree_frozen(self, long_sys):
        edges = abm.make_er_graph(50, 0.0, seed=0)
        assert edges.shape == (0, 2)
        pop = abm.AgentPopulation(np.tile([0, 2], 25), edges, rng_seed=1)
        traj = abm.run(pop, long_sys, 5.0, record_every=1.0)
        assert np.abs(traj.states - traj.states[0]).max() == 0.0

    def test_selection_modes_run_on_er(self, long_sys):
        with pytest.warns(UserWarning, match="disconnected"):
            edges = abm.make_er_graph(100, 6.0, seed=3)
        spins = abm.spins_from_fractions([0.5, 0.0, 0.5], 100,
                                         np.random.default_rng(0))
        for sel in abm.SELECTIONS:
            pop = abm.AgentPopulation(spins, edges, rng_seed=5)
            traj = abm.run(pop, long_sys, 2.0, record_every=1.0, selection=sel)
            assert np.abs(traj.states.sum(axis=1) - 1.0).max() < 1e-12

    def test_record_links(self, long_sys):
        pop = abm.AgentPopulation(np.tile([0, 1, 2], 10), rng_seed=9)
        node, link = abm.run(pop, long_sys, 2.0, record_every=1.0,
                             record_links=True)
        ls = LinkSpace(3)
        assert link.states.shape[1] == ls.L
        assert np.abs(link.states.sum(axis=1) - 1.0).max() < 1e-12

    def test_small_system_reaches_majority_consensus(self, long_sys):
        spins = abm.spins_from_fractions([0.6, 0.0, 0.4], 1000)
        pop = abm.AgentPopulation(spins, rng_seed=11)
        traj = abm.run(pop, long_sys, 30.0, record_every=5.0)
        assert traj.terminal[0] > 0.9


class TestHelpers:
    def test_spins_from_fractions_exact(self):
        spins = abm.spins_from_fractions([0.6, 0.0, 0.4], 10)
        assert np.bincount(spins, minlength=3).tolist() == [6, 0, 4]

    def test_spins_from_fractions_rounding(self):
        spins = abm.spins_from_fractions([1 / 3, 1 / 3, 1 / 3], 100)
        assert spins.size == 100
        counts = np.bincount(spins, minlength=3)
        assert counts.sum() == 100 and counts.max() - counts.min() <= 1

    def test_er_graph_degree(self):
        edges = abm.make_er_graph(2000, 10.0, seed=0)
        mean_deg = 2 * len(edges) / 2000
        assert abs(mean_deg - 10.0) < 1.0

    def test_er_graph_validation(self):
        with pytest.raises(InvalidParameterError):
            abm.make_er_graph(10, 20.0, seed=0)


class TestEnsemble:
    def test_shapes_and_determinism(self, long_sys, monkeypatch):
        monkeypatch.setenv("MONOSIG_THREADS", "1")
        s1 = abm.ensemble(long_sys, [0.6, 0.0, 0.4], 200, 2.0, 1.0,
                          runs=4, seed=7)
        s2 = abm.ensemble(long_sys, [0.6, 0.0, 0.4], 200, 2.0, 1.0,
                          runs=4, seed=7)
        assert s1.mean.shape == (3, 3)
        assert np.array_equal(s1.mean, s2.mean)
        assert np.array_equal(s1.stderr, s2.stderr)

    def test_independent_of_worker_count(self, long_sys, monkeypatch):
        monkeypatch.setenv("MONOSIG_THREADS", "1")
        serial = abm.ensemble(long_sys, [0.5, 0.0, 0.5], 100, 1.0, 1.0,
                              runs=3, seed=5)
        monkeypatch.setenv("MONOSIG_THREADS", "3")
        parallel = abm.ensemble(long_sys, [0.5, 0.0, 0.5], 100, 1.0, 1.0,
                                runs=3, seed=5)
        assert np.array_equal(serial.mean, parallel.mean)

    def test_compare_report(self, long_sys, monkeypatch):
        from monosig.meanfield import integrate

        monkeypatch.setenv("MONOSIG_THREADS", "1")
        stats = abm.ensemble(long_sys, [0.6, 0.0, 0.4], 500, 3.0, 1.0,
                             runs=5, seed=1)
        mf = integrate(long_sys, [0.6, 0.0, 0.4], 3.0, dt=1e-2,
                       record_every=1.0)
        rep = abm.compare(stats, mf)
        assert rep.sup_deviation < 0.2
        assert 0.0 <= rep.worst_time <= 3.0
