"""Agent-based Monte Carlo ground truth for signalling systems.

Exact microstate dynamics: per step one speaker-listener pair interacts
and only the listener may change spin.  Runs are reproducible bit-for-bit
from (seed, configuration); ensemble streams are spawned per run index.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .meanfield import Trajectory
from .systems import InvalidParameterError, LinkSpace, SignallingSystem

RNG_ALGORITHM = "numpy-PCG64"

SELECTIONS = ("edge_first", "speaker_first")


@dataclass
class AgentPopulation:
    spins: np.ndarray                  # length-N spin indices
    edges: np.ndarray = None           # (M, 2) int array; None = complete graph
    rng_seed: int = 0

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int64)
        if self.spins.size < 2:
            raise InvalidParameterError("need at least 2 agents")
        if self.edges is not None:
            e = np.asarray(self.edges, dtype=np.int64)
            if e.size and (np.any(e[:, 0] == e[:, 1])
                           or len({tuple(sorted(p)) for p in e.tolist()}) != len(e)):
                raise InvalidParameterError("edge list has self-loops or duplicates")
            self.edges = e

    @property
    def N(self):
        return self.spins.size

    def macrostate(self, K):
        return np.bincount(self.spins, minlength=K) / self.N

    def link_macrostate(self, K):
        """Fraction of edges per unordered endpoint-spin pair."""
        ls = LinkSpace(K)
        l = np.zeros(ls.L)
        if self.edges is None:
            c = np.bincount(self.spins, minlength=K).astype(float)
            total = self.N * (self.N - 1) / 2.0
            for a, (i, j) in enumerate(ls.pairs):
                l[a] = (c[i] * (c[i] - 1) / 2.0 if i == j else c[i] * c[j]) / total
        else:
            if len(self.edges) == 0:
                return l
            si = self.spins[self.edges[:, 0]]
            sj = self.spins[self.edges[:, 1]]
            idx = np.array([ls.index(int(a), int(b)) for a, b in zip(si, sj)])
            l = np.bincount(idx, minlength=ls.L) / len(self.edges)
        return l


def _pick_pair(pop, rng, selection):
    """Returns (speaker, listener) or None when no interaction happens."""
    if pop.edges is None:
        s = int(rng.integers(pop.N))
        t = int(rng.integers(pop.N - 1))
        if t >= s:
            t += 1
        return (s, t)
    if selection == "edge_first":
        if len(pop.edges) == 0:
            return None
        i, j = pop.edges[int(rng.integers(len(pop.edges)))]
        return (int(i), int(j)) if rng.random() < 0.5 else (int(j), int(i))
    # speaker_first: uniform speaker, uniform neighbor listener
    adj = _adjacency(pop)
    s = int(rng.integers(pop.N))
    nbrs = adj[s]
    if len(nbrs) == 0:
        return None
    return (s, int(nbrs[int(rng.integers(len(nbrs)))]))


def _adjacency(pop):
    if getattr(pop, "_adj", None) is None:
        adj = [[] for _ in range(pop.N)]
        for i, j in pop.edges:
            adj[int(i)].append(int(j))
            adj[int(j)].append(int(i))
        pop._adj = [np.array(a, dtype=np.int64) for a in adj]
    return pop._adj


def step(pop: AgentPopulation, system: SignallingSystem, rng,
         selection="edge_first") -> AgentPopulation:
    """One interaction; returns a new population (at most one spin changes)."""
    if selection not in SELECTIONS:
        raise InvalidParameterError(f"unknown selection mode {selection!r}")
    pair = _pick_pair(pop, rng, selection)
    spins = pop.spins.copy()
    if pair is not None:
        s, t = pair
        g = system.gA if rng.random() < system.alpha[spins[s]] else system.gB
        spins[t] = int(np.searchsorted(np.cumsum(g[:, spins[t]]), rng.random(),
                                       side="right"))
    return replace(pop, spins=spins)


def run(pop: AgentPopulation, system: SignallingSystem, sweeps,
        record_every=1.0, selection="edge_first", record_links=False):
    """Simulate `sweeps` time units (N steps each), recording the macrostate
    every record_every time units.  Deterministic given pop.rng_seed.

    Returns a node Trajectory, or (node, link) trajectories with
    record_links.
    """
    if sweeps < 0:
        raise InvalidParameterError("sweeps must be >= 0")
    if selection not in SELECTIONS:
        raise InvalidParameterError(f"unknown selection mode {selection!r}")
    rng = np.random.default_rng(pop.rng_seed)
    K = system.K
    spins = pop.spins.copy()
    work = AgentPopulation(spins, pop.edges, pop.rng_seed)
    N = pop.N
    total_steps = int(round(sweeps * N))
    rec_steps = max(1, int(round(record_every * N)))
    cumA = np.cumsum(system.gA, axis=0)
    cumB = np.cumsum(system.gB, axis=0)
    alpha = system.alpha
    times = [0.0]
    states = [work.macrostate(K)]
    link_states = [work.link_macrostate(K)] if record_links else None

    complete = pop.edges is None
    edges = pop.edges
    M = 0 if complete or edges is None else len(edges)
    adj = None if complete or selection == "edge_first" else _adjacency(work)

    BLOCK = 16384
    done = 0
    while done < total_steps:
        nb = min(BLOCK, total_steps - done)
        if complete:
            sp = rng.integers(N, size=nb)
            li = rng.integers(N - 1, size=nb)
            li = np.where(li >= sp, li + 1, li)
        elif selection == "edge_first":
            if M == 0:
                sp = li = None
            else:
                ei = rng.integers(M, size=nb)
                flip = rng.random(nb) < 0.5
                sp = np.where(flip, edges[ei, 1], edges[ei, 0])
                li = np.where(flip, edges[ei, 0], edges[ei, 1])
        else:
            sp = rng.integers(N, size=nb)
            li = None  # resolved per step from adjacency
        u_msg = rng.random(nb)
        u_tr = rng.random(nb)
        u_nb = rng.random(nb) if (not complete and selection == "speaker_first") else None
        for i in range(nb):
            if sp is not None:
                s = int(sp[i])
                if li is None:
                    nbrs = adj[s]
                    if len(nbrs):
                        t = int(nbrs[int(u_nb[i] * len(nbrs))])
                    else:
                        t = None
                else:
                    t = int(li[i])
                if t is not None:
                    st = spins[t]
                    col = cumA[:, st] if u_msg[i] < alpha[spins[s]] else cumB[:, st]
                    new = int(np.searchsorted(col, u_tr[i], side="right"))
                    if new != st:
                        spins[t] = new
            done_i = done + i + 1
            if done_i % rec_steps == 0 or done_i == total_steps:
                times.append(done_i / N)
                states.append(np.bincount(spins, minlength=K) / N)
                if record_links:
                    link_states.append(work.link_macrostate(K))
        done += nb

    node = Trajectory(np.array(times), np.array(states), system.labels)
    if record_links:
        ls = LinkSpace(K)
        return node, Trajectory(np.array(times), np.array(link_states),
                                ls.labels(system.spins))
    return node


def make_er_graph(N, mean_degree, seed):
    """Erdos-Renyi G(N, p) edge list with p = mean_degree / (N - 1).

    Isolated vertices are kept; a disconnected graph only warns.
    """
    import networkx as nx

    if not (0 <= mean_degree < N - 1):
        raise InvalidParameterError("need 0 <= mean_degree < N - 1")
    p = mean_degree / (N - 1)
    g = nx.fast_gnp_random_graph(N, p, seed=int(seed))
    if mean_degree > 0 and not nx.is_connected(g):
        warnings.warn("generated Erdos-Renyi graph is disconnected", stacklevel=2)
    edges = np.array(sorted(g.edges()), dtype=np.int64).reshape(-1, 2)
    return edges


def spins_from_fractions(n0, N, rng=None):
    """Deterministic largest-remainder assignment of N agents to fractions,
    optionally shuffled (needed on non-complete graphs)."""
    n0 = np.asarray(n0, dtype=float)
    counts = np.floor(n0 * N).astype(int)
    rem = n0 * N - counts
    for k in np.argsort(-rem)[: N - counts.sum()]:
        counts[k] += 1
    spins = np.repeat(np.arange(len(n0)), counts)
    if rng is not None:
        rng.shuffle(spins)
    return spins


@dataclass(frozen=True)
class EnsembleStats:
    times: np.ndarray
    mean: np.ndarray     # (T, K)
    stderr: np.ndarray   # (T, K)
    runs: int
    seed: int
    rng_algorithm: str = RNG_ALGORITHM

    def to_json_dict(self):
        return {"runs": self.runs, "seed": self.seed, "rng": self.rng_algorithm,
                "times": self.times.tolist(), "mean": self.mean.tolist(),
                "stderr": self.stderr.tolist()}


def _one_run(args):
    system, n0, N, edges, sweeps, record_every, selection, run_seed = args
    rng = np.random.default_rng(run_seed)
    spins = spins_from_fractions(n0, N, rng if edges is not None else None)
    pop = AgentPopulation(spins, edges, run_seed)
    return run(pop, system, sweeps, record_every, selection)


def worker_count():
    cap = os.environ.get("MONOSIG_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def ensemble(system: SignallingSystem, n0, N, sweeps, record_every, runs,
             seed, edges=None, selection="edge_first") -> EnsembleStats:
    """Average `runs` independent trajectories on a shared record grid.

    Per-run streams are spawned from the master seed by run index, so the
    result does not depend on scheduling; aggregation is by run index.
    """
    if runs < 1:
        raise InvalidParameterError("runs must be >= 1")
    run_seeds = np.random.SeedSequence(seed).generate_state(runs)
    jobs = [(system, n0, N, edges, sweeps, record_every, selection, int(s))
            for s in run_seeds]
    nproc = min(worker_count(), runs)
    if nproc > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=nproc) as ex:
            trajs = list(ex.map(_one_run, jobs))
    else:
        trajs = [_one_run(j) for j in jobs]
    states = np.array([t.states for t in trajs])  # (runs, T, K)
    mean = states.mean(axis=0)
    stderr = (states.std(axis=0, ddof=1) / np.sqrt(runs)) if runs > 1 else np.zeros_like(mean)
    return EnsembleStats(trajs[0].times, mean, stderr, runs, seed)


@dataclass(frozen=True)
class ComparisonReport:
    sup_deviation: float
    worst_time: float
    worst_component: int

    def to_json_dict(self):
        return {"supDeviation": self.sup_deviation, "worstTime": self.worst_time,
                "worstComponent": self.worst_component}


def compare(stats: EnsembleStats, meanfield_traj: Trajectory) -> ComparisonReport:
    """Sup-norm deviation of the ensemble mean from a mean-field trajectory,
    interpolated onto the ensemble's record grid."""
    K = stats.mean.shape[1]
    mf = np.column_stack([
        np.interp(stats.times, meanfield_traj.times, meanfield_traj.states[:, k])
        for k in range(K)])
    dev = np.abs(stats.mean - mf)
    flat = int(np.argmax(dev))
    ti, k = divmod(flat, K)
    return ComparisonReport(float(dev.max()), float(stats.times[ti]), k)
