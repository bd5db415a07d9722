"""Pairwise-approximation link ODE on sparse random networks.

The macrostate is the vector l of link-type fractions over unordered spin
pairs.  Per interaction the selected link changes directly (constant
operator D) and the listener's other links change through the listener's
spin transition (state-dependent operator R, realized through the pair
matrix M(l') and the spin kernel W(l)).  Both operators are kept in
generator form (stochastic part minus identity) so consensus states are
equilibria of
    dl/dt = 2 [ D~/<k> + (<k>-1)/<k> R~(l) ] l.

The kernel W(l) is the listener transition conditioned on the listener's
spin: column j mixes gA and gB with the probability q_j that the message
is A given a neighbour drawn from the pair distribution of l.  This is the
unique choice whose product-measure restriction reproduces the
complete-network transition, so the node marginal recovers the complete
graph ODE as the mean degree grows.

Two related-change variants exist: "one_sided" applies the kernel to one
endpoint of each related link, symmetrized, (W M + M W^T)/2; "two_sided"
conjugates, W M W^T.  Only one endpoint of a related link is the listener,
and only one_sided matches the complete-graph time scale in the dense
limit, so it is the default; two_sided is kept for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .meanfield import HarnessViolation, Trajectory, _membership_residual, integrate_core
from .orders import Cone, PartialOrder, induced_link_order
from .systems import InvalidParameterError, LinkSpace, SignallingSystem

VARIANTS = ("one_sided", "two_sided")
DEFAULT_VARIANT = "one_sided"

_EMPTY_SPIN = 1e-15  # below this node mass the kernel column stays identity


@dataclass(frozen=True)
class DirectGenerator:
    d_tilde: np.ndarray  # L x L, column sums zero
    linkspace: LinkSpace

    @property
    def stochastic(self):
        """The underlying per-step transition matrix D = D~ + I."""
        return self.d_tilde + np.eye(self.d_tilde.shape[0])


def _listener_combos(i, j):
    """(listener, speaker, weight) choices for a link with endpoint spins i, j."""
    if i == j:
        return [(i, j, 1.0)]
    return [(i, j, 0.5), (j, i, 0.5)]


def build_direct(system: SignallingSystem) -> DirectGenerator:
    """Constant direct-change operator from the single-step link expansion."""
    ls = LinkSpace(system.K)
    D = np.zeros((ls.L, ls.L))
    for col, (a, b) in enumerate(ls.pairs):
        for listener, speaker, w in _listener_combos(a, b):
            p = float(system.alpha[speaker])
            mix = p * system.gA[:, listener] + (1.0 - p) * system.gB[:, listener]
            for i in range(system.K):
                if mix[i]:
                    D[ls.index(i, speaker), col] += w * mix[i]
    return DirectGenerator(D - np.eye(ls.L), ls)


def message_prob_by_listener(system: SignallingSystem, l):
    """q_j: probability the incoming message is A given the listener has
    spin j, with the speaker drawn from the pair distribution of l."""
    ls = LinkSpace(system.K)
    M = ls.to_matrix(l)
    n = M.sum(axis=1)
    q = np.zeros(system.K)
    mask = n > _EMPTY_SPIN
    q[mask] = (M @ system.alpha)[mask] / n[mask]
    return q, mask


def related_kernel(system: SignallingSystem, l):
    """Spin transition kernel W(l); columns sum to one for valid l.

    Column j is q_j gA[:, j] + (1 - q_j) gB[:, j]; spins absent from l keep
    identity columns (they are never a listener).
    """
    q, mask = message_prob_by_listener(system, l)
    W = system.gA * q + system.gB * (1.0 - q)
    W[:, ~mask] = np.eye(system.K)[:, ~mask]
    return W


def related_apply(system: SignallingSystem, l, l_prime, variant=DEFAULT_VARIANT):
    """Image of l' under the related-change transition at macrostate l."""
    if variant not in VARIANTS:
        raise InvalidParameterError(f"unknown related variant {variant!r}")
    ls = LinkSpace(system.K)
    W = related_kernel(system, l)
    M = ls.to_matrix(l_prime)
    if variant == "two_sided":
        M2 = W @ M @ W.T
    else:
        M2 = 0.5 * (W @ M + M @ W.T)
    return ls.from_matrix(M2)


def decompose(m):
    """Unique split m = u + v with u the product measure of the row sums
    and v symmetric with zero row and column sums."""
    m = np.asarray(m, dtype=float)
    n = m.sum(axis=1)
    u = np.outer(n, n)
    return u, m - u


def _pair_tensors(ls: LinkSpace):
    """Linear maps between link vectors and pair matrices, as tensors."""
    K, L = ls.K, ls.L
    T = np.zeros((K, K, L))   # l -> M
    F = np.zeros((L, K, K))   # M -> l
    for a, (i, j) in enumerate(ls.pairs):
        if i == j:
            T[i, i, a] = 1.0
            F[a, i, i] = 1.0
        else:
            T[i, j, a] = T[j, i, a] = 0.5
            F[a, i, j] = F[a, j, i] = 1.0
    return T, F


class SparseDrift:
    """Precomputed operators for the link ODE of one system."""

    def __init__(self, system: SignallingSystem, mean_degree, variant=DEFAULT_VARIANT):
        if mean_degree <= 1:
            raise InvalidParameterError("mean_degree must exceed 1")
        if variant not in VARIANTS:
            raise InvalidParameterError(f"unknown related variant {variant!r}")
        self.system = system
        self.mean_degree = float(mean_degree)
        self.variant = variant
        self.linkspace = LinkSpace(system.K)
        self.d_tilde = build_direct(system).d_tilde
        self.T, self.F = _pair_tensors(self.linkspace)

    def kernel_batch(self, Y):
        """W(l) for a (L, B) batch; returns (K, K, B)."""
        gA, gB, alpha = self.system.gA, self.system.gB, self.system.alpha
        M = np.einsum("ijk,kb->ijb", self.T, Y)
        n = M.sum(axis=1)                       # (K, B)
        ma = np.einsum("ijb,j->ib", M, alpha)   # (K, B)
        mask = n > _EMPTY_SPIN
        q = np.where(mask, ma, 0.0) / np.where(mask, n, 1.0)
        W = gA[:, :, None] * q[None, :, :] + gB[:, :, None] * (1.0 - q)[None, :, :]
        eye = np.eye(self.system.K)
        idle = ~mask  # (K, B)
        if idle.any():
            j_idx, b_idx = np.where(idle)
            W[:, j_idx, b_idx] = eye[:, j_idx]
        return W, M

    def __call__(self, Y):
        """Drift for a (L, B) batch of link macrostates."""
        Y = np.asarray(Y, dtype=float)
        squeeze = Y.ndim == 1
        if squeeze:
            Y = Y[:, None]
        W, M = self.kernel_batch(Y)
        if self.variant == "two_sided":
            M2 = np.einsum("imb,mnb,jnb->ijb", W, M, W)
        else:
            M2 = 0.5 * (np.einsum("imb,mjb->ijb", W, M)
                        + np.einsum("imb,jmb->ijb", M, W))
        r_tilde = np.einsum("aij,ijb->ab", self.F, M2) - Y
        k = self.mean_degree
        out = 2.0 * (self.d_tilde @ Y / k + ((k - 1.0) / k) * r_tilde)
        return out[:, 0] if squeeze else out


def drift_sparse(system: SignallingSystem, mean_degree, l, variant=DEFAULT_VARIANT):
    """Link-macrostate drift; components sum to zero."""
    return SparseDrift(system, mean_degree, variant)(np.asarray(l, dtype=float))


def integrate_sparse(system: SignallingSystem, mean_degree, l0, t_end,
                     dt=1e-3, record_every=None, variant=DEFAULT_VARIANT) -> Trajectory:
    """Fixed-step RK4 on the link simplex; same guards as the node ODE."""
    model = SparseDrift(system, mean_degree, variant)
    l0 = np.asarray(l0, dtype=float)
    nsteps = int(round(t_end / dt))
    if record_every is None:
        rec = np.arange(nsteps + 1) * dt
    else:
        every = max(1, int(round(record_every / dt)))
        idx = np.arange(0, nsteps + 1, every)
        if idx[-1] != nsteps:
            idx = np.append(idx, nsteps)
        rec = idx * dt
    times, states = integrate_core(model, l0[None, :], t_end, dt, rec)
    return Trajectory(times, states[:, 0, :], model.linkspace.labels(system.spins))


def node_trajectory(system: SignallingSystem, link_traj: Trajectory) -> Trajectory:
    """Node-marginal trajectory of a link trajectory."""
    ls = LinkSpace(system.K)
    states = np.array([ls.node_marginal(ls.to_matrix(l)) for l in link_traj.states])
    return Trajectory(link_traj.times, states, system.labels)


def order_harness_sparse(system: SignallingSystem, order: PartialOrder,
                         mean_degree, pair_count, t_end, checkpoints, seed,
                         dt=1e-2, variant=DEFAULT_VARIANT, tol=None):
    """Order-preservation harness on the induced link order.

    Samples ordered link pairs via the link Hasse generators, integrates
    both, and tests link-cone membership at each checkpoint.
    """
    model = SparseDrift(system, mean_degree, variant)
    link_order = induced_link_order(order, model.linkspace)
    cone = Cone.from_order(link_order) if tol is None else Cone.from_order(link_order, tol)
    E = cone.E
    rng = np.random.default_rng(seed)
    L = model.linkspace.L
    pairs = []
    for _ in range(pair_count):
        l = rng.dirichlet(np.ones(L))
        l = np.maximum(l, 1e-3)
        l /= l.sum()
        lam = rng.uniform(size=E.shape[1])
        d = E @ lam
        neg = d < 0
        scale = 0.5 * (l[neg] / -d[neg]).min() if neg.any() else 1.0
        pairs.append((l, l + scale * d))
    L0 = np.array([x for pair in pairs for x in pair])
    times = np.linspace(t_end / checkpoints, t_end, checkpoints)
    _, states = integrate_core(model, L0, t_end, dt, record_times=times)
    violations = []
    for ci, t in enumerate(times):
        lo = states[ci, 0::2, :]
        hi = states[ci, 1::2, :]
        for pi in range(pair_count):
            d = hi[pi] - lo[pi]
            ok, _ = cone.contains(d, check_tangent=False)
            if not ok:
                violations.append(HarnessViolation(pi, float(t), _membership_residual(E, d)))
    return violations
