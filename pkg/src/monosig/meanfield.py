"""Complete-network mean-field ODE for signalling systems.

The macrostate n of population fractions evolves by
    dn/dt = [p gA + (1-p) gB - I] n,    p = alpha . n,
a quadratic drift on the simplex.  Everything here is deterministic:
fixed-step RK4, Newton equilibrium refinement on the sum-zero tangent
space, bisection sweeps, and an empirical order-preservation harness.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .orders import Cone, PartialOrder
from .systems import InvalidParameterError, SignallingSystem, validate_macrostate

DRIFT_MASS_TOL = 1e-12
STEP_NEG_TOL = 1e-9
EQUILIBRIUM_TOL = 1e-10
MARGINAL_EIG_TOL = 1e-8


class IntegrationError(RuntimeError):
    """The integrator left the simplex beyond tolerance; reduce dt."""


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (T, K)
    labels: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        t.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def terminal(self):
        return self.states[-1]

    def write_csv(self, fh):
        w = csv.writer(fh)
        w.writerow(["t"] + list(self.labels))
        for t, row in zip(self.times, self.states):
            w.writerow([f"{t:.12g}"] + [f"{x:.12g}" for x in row])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)


def message_prob(system: SignallingSystem, n) -> float:
    """Overall probability that an emitted message is A."""
    n = validate_macrostate(n, system.K)
    return float(system.alpha @ n)


def drift(system: SignallingSystem, n):
    """Mean-field drift f(n); components sum to zero."""
    n = np.asarray(n, dtype=float)
    p = float(system.alpha @ n)
    return p * (system.gA @ n) + (1.0 - p) * (system.gB @ n) - n


def drift_batch(system: SignallingSystem, Y):
    """Drift applied columnwise to a (K, B) batch of macrostates."""
    P = system.alpha @ Y
    return P * (system.gA @ Y) + (1.0 - P) * (system.gB @ Y) - Y


def jacobian(system: SignallingSystem, n):
    """d drift / dn = (p gA + (1-p) gB - I) + ((gA-gB) n) alpha^T."""
    n = np.asarray(n, dtype=float)
    p = float(system.alpha @ n)
    base = p * system.gA + (1.0 - p) * system.gB - np.eye(system.K)
    return base + np.outer((system.gA - system.gB) @ n, system.alpha)


def _project_step(Y, sum_tol=STEP_NEG_TOL, neg_tol=STEP_NEG_TOL):
    """Renormalize a stepped batch onto the simplex; error beyond tolerance."""
    mn = Y.min()
    if mn < -neg_tol:
        raise IntegrationError(
            f"state component {mn} below -{neg_tol}; reduce dt")
    sums = Y.sum(axis=0)
    if np.abs(sums - 1.0).max() > sum_tol:
        raise IntegrationError(
            f"simplex residual {np.abs(sums - 1.0).max()} exceeds {sum_tol}; reduce dt")
    np.clip(Y, 0.0, None, out=Y)
    Y /= Y.sum(axis=0)
    return Y


def integrate_core(drift_fn, N0, t_end, dt, record_times=None,
                   settle_tol=None):
    """Fixed-step RK4 over a (B, dim) batch for any simplex-valued drift.

    Returns (times, states) with states of shape (T, B, dim).  With
    settle_tol set, integration stops once every drift is below it and the
    remaining records repeat the settled states.
    """
    if t_end <= 0 or dt <= 0:
        raise InvalidParameterError("t_end and dt must be positive")
    N0 = np.atleast_2d(np.asarray(N0, dtype=float))
    Y = N0.T.copy()  # (dim, B)
    nsteps = int(round(t_end / dt))
    if record_times is None:
        record_times = np.arange(nsteps + 1) * dt
    record_times = np.asarray(record_times, dtype=float)
    record_steps = np.rint(record_times / dt).astype(int)
    out = np.empty((len(record_times), Y.shape[1], Y.shape[0]))
    ptr = 0
    while ptr < len(record_steps) and record_steps[ptr] <= 0:
        out[ptr] = Y.T
        ptr += 1
    for step in range(1, nsteps + 1):
        k1 = drift_fn(Y)
        k2 = drift_fn(Y + 0.5 * dt * k1)
        k3 = drift_fn(Y + 0.5 * dt * k2)
        k4 = drift_fn(Y + dt * k3)
        Y = _project_step(Y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
        while ptr < len(record_steps) and record_steps[ptr] == step:
            out[ptr] = Y.T
            ptr += 1
        if settle_tol is not None and step % 200 == 0:
            if np.abs(drift_fn(Y)).max() < settle_tol:
                break
    while ptr < len(record_times):  # settled early: state is stationary
        out[ptr] = Y.T
        ptr += 1
    return record_steps * dt, out


def integrate_batch(system, N0, t_end, dt=1e-3, record_times=None,
                    settle_tol=None):
    """Integrate a (B, K) batch of initial macrostates; see integrate_core."""
    return integrate_core(lambda Y: drift_batch(system, Y), N0, t_end, dt,
                          record_times, settle_tol)


def integrate(system: SignallingSystem, n0, t_end, dt=1e-3, method="rk4",
              record_every=None) -> Trajectory:
    """Integrate one initial macrostate; records every record_every time
    units (default: every step)."""
    if method != "rk4":
        raise InvalidParameterError(f"unknown method {method!r}")
    n0 = validate_macrostate(n0, system.K)
    nsteps = int(round(t_end / dt))
    if record_every is None:
        rec = np.arange(nsteps + 1) * dt
    else:
        every = max(1, int(round(record_every / dt)))
        idx = np.arange(0, nsteps + 1, every)
        if idx[-1] != nsteps:
            idx = np.append(idx, nsteps)
        rec = idx * dt
    times, states = integrate_batch(system, n0[None, :], t_end, dt, rec)
    return Trajectory(times, states[:, 0, :], system.labels)


_RK4_FAST = None


def _rk4_fast():
    """Compiled fixed-step RK4 window kernel; None when numba is absent."""
    global _RK4_FAST
    if _RK4_FAST is None:
        try:
            from numba import njit
        except ImportError:
            _RK4_FAST = False
            return None

        @njit(cache=True)
        def run(alpha, gA, gB, Y, dt, nsteps):
            K, B = Y.shape
            worst_neg = 0.0
            for _ in range(nsteps):
                P1 = np.dot(alpha, Y)
                K1 = np.dot(gA, Y) * P1 + np.dot(gB, Y) * (1.0 - P1) - Y
                Y2 = Y + 0.5 * dt * K1
                P2 = np.dot(alpha, Y2)
                K2 = np.dot(gA, Y2) * P2 + np.dot(gB, Y2) * (1.0 - P2) - Y2
                Y3 = Y + 0.5 * dt * K2
                P3 = np.dot(alpha, Y3)
                K3 = np.dot(gA, Y3) * P3 + np.dot(gB, Y3) * (1.0 - P3) - Y3
                Y4 = Y + dt * K3
                P4 = np.dot(alpha, Y4)
                K4 = np.dot(gA, Y4) * P4 + np.dot(gB, Y4) * (1.0 - P4) - Y4
                Y = Y + (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
                for b in range(B):
                    s = 0.0
                    for k in range(K):
                        v = Y[k, b]
                        if v < 0.0:
                            if v < worst_neg:
                                worst_neg = v
                            Y[k, b] = 0.0
                        s += Y[k, b]
                    for k in range(K):
                        Y[k, b] /= s
            return Y, worst_neg

        _RK4_FAST = run
    return _RK4_FAST or None


def settle_terminal_batch(system, N0, t_end, dt=1e-3, window=10.0,
                          settle_tol=1e-13):
    """Terminal states of a (B, K) batch, dropping members from the batch
    once their drift settles; the remainder integrate the full horizon."""
    N0 = np.atleast_2d(np.asarray(N0, dtype=float))
    out = N0.copy()
    active = np.arange(len(N0))
    fast = _rk4_fast()
    t = 0.0
    while t < t_end - 1e-12 and active.size:
        span = min(window, t_end - t)
        if fast is not None:
            Y, worst_neg = fast(system.alpha, system.gA, system.gB,
                                np.ascontiguousarray(out[active].T), dt,
                                int(round(span / dt)))
            if worst_neg < -STEP_NEG_TOL:
                raise IntegrationError(
                    f"state component {worst_neg} below -{STEP_NEG_TOL}; reduce dt")
            out[active] = Y.T
        else:
            _, states = integrate_batch(system, out[active], span, dt,
                                        record_times=np.array([span]))
            out[active] = states[-1]
        t += span
        still = np.abs(drift_batch(system, out[active].T)).max(axis=0) >= settle_tol
        active = active[still]
    return out


def terminal_state(system, n0, t_end, dt=1e-3):
    """Terminal macrostate only, with early exit once the drift settles."""
    _, states = integrate_batch(system, np.atleast_2d(n0), t_end, dt,
                                record_times=np.array([float(t_end)]),
                                settle_tol=1e-13)
    return states[-1][0] if states.shape[1] == 1 else states[-1]


# ---------------------------------------------------------------------------
# equilibria

@dataclass(frozen=True)
class Equilibrium:
    state: np.ndarray
    residual: float
    classification: str  # Stable | Unstable | Saddle | Marginal
    eigenvalues: tuple   # tangent-space spectrum

    @property
    def stable(self):
        return self.classification == "Stable"


def tangent_basis(K):
    """Orthonormal basis of the sum-zero subspace, fixed deterministically."""
    return null_space(np.ones((1, K)))


def classify_point(system, n, eig_tol=MARGINAL_EIG_TOL):
    """Tangent-space spectrum and stability label at a drift zero."""
    V = tangent_basis(system.K)
    Jt = V.T @ jacobian(system, n) @ V
    eigs = np.linalg.eigvals(Jt)
    re = eigs.real
    if np.any(np.abs(re) <= eig_tol):
        label = "Marginal"
    elif np.all(re < 0):
        label = "Stable"
    elif np.all(re > 0):
        label = "Unstable"
    else:
        label = "Saddle"
    return label, tuple(sorted(eigs, key=lambda z: (z.real, z.imag)))


def _simplex_grid(K, density):
    """All compositions of `density` into K parts, as simplex points."""
    pts = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            pts.append(prefix + [remaining])
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, slots - 1)

    rec([], density, K)
    return np.array(pts, dtype=float) / density


def find_equilibria(system: SignallingSystem, grid_density=8,
                    residual_tol=EQUILIBRIUM_TOL, dedupe_tol=1e-6,
                    max_iter=80):
    """Newton refinement (restricted to the tangent space) from a simplex
    grid of seeds; converged points on the simplex are deduplicated and
    classified.  Returns (equilibria, dropped_seed_count)."""
    if grid_density < 2:
        raise InvalidParameterError("grid_density must be >= 2")
    V = tangent_basis(system.K)
    found = []
    dropped = 0
    for seed in _simplex_grid(system.K, grid_density):
        n = seed.copy()
        ok = False
        for _ in range(max_iter):
            f = drift(system, n)
            if np.abs(f).max() <= min(residual_tol, 1e-12):
                ok = True
                break
            A = V.T @ jacobian(system, n) @ V
            try:
                delta = np.linalg.solve(A, -(V.T @ f))
            except np.linalg.LinAlgError:
                break
            if np.abs(delta).max() > 10.0:
                break
            n = n + V @ delta
        if not ok or np.abs(drift(system, n)).max() > residual_tol:
            dropped += 1
            continue
        if n.min() < -1e-8 or abs(n.sum() - 1.0) > 1e-8:
            dropped += 1
            continue
        n = np.clip(n, 0.0, None)
        n /= n.sum()
        if any(np.abs(n - e).max() < dedupe_tol for e in found):
            continue
        found.append(n)
    eqs = []
    for n in sorted(found, key=lambda x: tuple(-x)):
        label, eigs = classify_point(system, n)
        eqs.append(Equilibrium(n, float(np.abs(drift(system, n)).max()), label, eigs))
    return eqs, dropped


# ---------------------------------------------------------------------------
# committed-fraction sweep

class NoTransitionError(RuntimeError):
    """Both sweep endpoints classify identically; widen the q range."""


@dataclass(frozen=True)
class SweepResult:
    qc: float
    bracket: tuple
    classifications: tuple  # ((q, dominated), ...) in evaluation order

    def to_json_dict(self):
        return {"qc": self.qc, "bracket": list(self.bracket),
                "classifications": [[q, bool(c)] for q, c in self.classifications]}


def sweep_committed(system: SignallingSystem, committed, q_low, q_high,
                    tol=1e-4, dt=1e-2, t_end=200.0, threshold=0.9,
                    target=None, opposing=None, sections=8) -> SweepResult:
    """Bisect the committed fraction between no-takeover and takeover.

    Each probe integrates from the all-opposing consensus with fraction q
    moved to the committed state, then classifies the terminal state by
    whether committed-opinion mass (target + committed) exceeds threshold.
    Each bisection round probes the interior points of a uniform partition
    in one batched integration, shrinking the bracket by `sections`.
    """
    if not (0.0 <= q_low < q_high <= 1.0):
        raise InvalidParameterError("need 0 <= q_low < q_high <= 1")
    ci = system.spins.index(committed)
    if ci not in system.committed:
        raise InvalidParameterError(f"{committed!r} is not a committed state")
    if target is None:
        if ci not in system.committed_base:
            raise InvalidParameterError("no recorded base opinion; pass target=")
        ti = system.committed_base[ci]
    else:
        ti = system.spins.index(target)
    if opposing is None:
        free = [k for k in range(system.K) if k not in system.committed]
        oi = max(free, key=lambda k: abs(system.alpha[k] - system.alpha[ci]))
    else:
        oi = system.spins.index(opposing)

    def dominated(qs):
        N0 = np.zeros((len(qs), system.K))
        N0[:, oi] = 1.0 - np.asarray(qs)
        N0[:, ci] = qs
        term = settle_terminal_batch(system, N0, t_end, dt)
        return (term[:, ti] + term[:, ci]) > threshold

    lo, hi = q_low, q_high
    c_lo, c_hi = dominated([lo, hi])
    probes = [(lo, bool(c_lo)), (hi, bool(c_hi))]
    if c_lo == c_hi:
        raise NoTransitionError(
            f"both endpoints classify as dominated={bool(c_lo)}; widen [q_low, q_high]")
    while hi - lo > tol:
        grid = np.linspace(lo, hi, sections + 1)
        cs = np.concatenate([[c_lo], dominated(grid[1:-1]), [c_hi]])
        probes += [(float(q), bool(c)) for q, c in zip(grid[1:-1], cs[1:-1])]
        flip = int(np.argmax(cs != c_lo))  # first classification change
        lo, hi = float(grid[flip - 1]), float(grid[flip])
        c_lo, c_hi = bool(cs[flip - 1]), bool(cs[flip])
    return SweepResult(0.5 * (lo + hi), (lo, hi), tuple(probes))


# ---------------------------------------------------------------------------
# order-preservation harness

@dataclass(frozen=True)
class HarnessViolation:
    pair: int
    time: float
    residual: float


def sample_ordered_pairs(E, pair_count, K, rng, min_component=1e-3):
    """Ordered pairs (n, n2) with n2 - n a nonnegative generator mix,
    scaled to keep n2 on the simplex."""
    pairs = []
    for _ in range(pair_count):
        n = rng.dirichlet(np.ones(K))
        n = np.maximum(n, min_component)
        n /= n.sum()
        if E.shape[1] == 0:
            pairs.append((n, n.copy()))
            continue
        lam = rng.uniform(size=E.shape[1])
        d = E @ lam
        neg = d < 0
        scale = 0.5 * (n[neg] / -d[neg]).min() if neg.any() else 1.0
        pairs.append((n, n + scale * d))
    return pairs


def order_harness(system: SignallingSystem, order: PartialOrder, pair_count,
                  t_end, checkpoints, seed, dt=1e-2, tol=None):
    """Integrate sampled ordered pairs and test cone membership of their
    difference at each checkpoint.  Empty list iff the order is preserved."""
    cone = Cone.from_order(order) if tol is None else Cone.from_order(order, tol)
    E = cone.E
    rng = np.random.default_rng(seed)
    pairs = sample_ordered_pairs(E, pair_count, system.K, rng)
    N0 = np.array([p for pair in pairs for p in pair])
    times = np.linspace(t_end / checkpoints, t_end, checkpoints)
    _, states = integrate_batch(system, N0, t_end, dt, record_times=times)
    violations = []
    for ci, t in enumerate(times):
        lo = states[ci, 0::2, :]
        hi = states[ci, 1::2, :]
        for pi in range(pair_count):
            d = hi[pi] - lo[pi]
            ok, _ = cone.contains(d, check_tangent=False)
            if not ok:
                lam_res = _membership_residual(E, d)
                violations.append(HarnessViolation(pi, float(t), lam_res))
    return violations


def _membership_residual(E, d):
    from scipy.optimize import nnls
    if E.shape[1] == 0:
        return float(np.abs(d).max())
    lam, _ = nnls(E, d)
    return float(np.abs(E @ lam - d).max())
