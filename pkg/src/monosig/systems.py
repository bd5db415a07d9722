"""Binary-signalling systems, macrostates and canonical example builders.

A signalling system is described by K spin states, a vector ``alpha`` of
probabilities for a speaker in each state to send message A, and two
column-stochastic transition matrices ``gA``/``gB`` giving the listener's
state change on hearing A or B.  Matrices are column-oriented: entry (i, j)
is the probability that a listener in state j moves to state i.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

STOCH_TOL = 1e-12   # constructed data (column sums, kernels)
SIMPLEX_TOL = 1e-10  # integrated data, drift accumulates


class InvalidParameterError(ValueError):
    """A builder or operation was called with out-of-contract arguments."""


def _readonly(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpinSpace:
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if len(self.labels) < 1:
            raise InvalidParameterError("need at least one spin state")
        if len(set(self.labels)) != len(self.labels) or any(not s for s in self.labels):
            raise InvalidParameterError("spin labels must be unique and nonempty")

    @property
    def K(self):
        return len(self.labels)

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidParameterError(f"unknown spin state {label!r}") from None


@dataclass(frozen=True)
class SignallingSystem:
    spins: SpinSpace
    alpha: np.ndarray
    gA: np.ndarray
    gB: np.ndarray
    committed: frozenset = frozenset()
    # committed index -> index of the opinion the committed agents push;
    # populated by with_committed, used as sweep defaults.
    committed_base: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", _readonly(self.alpha))
        object.__setattr__(self, "gA", _readonly(self.gA))
        object.__setattr__(self, "gB", _readonly(self.gB))
        object.__setattr__(self, "committed", frozenset(self.committed))

    @property
    def K(self):
        return self.spins.K

    @property
    def labels(self):
        return self.spins.labels

    def sigma(self, state):
        """Pure macrostate (simplex vertex) for a spin label or index."""
        k = state if isinstance(state, (int, np.integer)) else self.spins.index(state)
        v = np.zeros(self.K)
        v[k] = 1.0
        return v

    def to_json_dict(self):
        return {
            "labels": list(self.labels),
            "alpha": self.alpha.tolist(),
            "gA": self.gA.T.tolist(),  # columns as inner arrays
            "gB": self.gB.T.tolist(),
            "committed": [self.labels[i] for i in sorted(self.committed)],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_json_dict(), **kw)

    @classmethod
    def from_json_dict(cls, doc):
        spins = SpinSpace(tuple(doc["labels"]))
        gA = np.array(doc["gA"], dtype=float).T
        gB = np.array(doc["gB"], dtype=float).T
        committed = frozenset(spins.index(s) for s in doc.get("committed", []))
        return cls(spins, np.array(doc["alpha"], dtype=float), gA, gB, committed)

    @classmethod
    def from_json(cls, text):
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class Violation:
    field: str
    index: object
    residual: float
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def ok(self):
        return not self.violations

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(f"{v.field}[{v.index}]: {v.message} (residual {v.residual:.3g})"
                         for v in self.violations)


def validate(system: SignallingSystem) -> ValidationReport:
    """Check every stochasticity/probability invariant; report all violations."""
    out = []
    K = system.K
    for k in range(K):
        a = system.alpha[k]
        if not (0.0 <= a <= 1.0):
            out.append(Violation("alpha", k, abs(a - np.clip(a, 0, 1)),
                                 f"alpha[{k}]={a} outside [0,1]"))
    for name, g in (("gA", system.gA), ("gB", system.gB)):
        if g.shape != (K, K):
            out.append(Violation(name, None, 0.0, f"{name} has shape {g.shape}, want {(K, K)}"))
            continue
        for j in range(K):
            s = g[:, j].sum()
            if abs(s - 1.0) > STOCH_TOL:
                out.append(Violation(name, j, abs(s - 1.0),
                                     f"column {j} sums to {s!r}"))
            bad = np.where((g[:, j] < -STOCH_TOL) | (g[:, j] > 1 + STOCH_TOL))[0]
            for i in bad:
                out.append(Violation(name, (int(i), j), float(abs(g[i, j] - np.clip(g[i, j], 0, 1))),
                                     f"entry ({i},{j})={g[i, j]} outside [0,1]"))
    for j in sorted(system.committed):
        unit = np.zeros(K)
        unit[j] = 1.0
        for name, g in (("gA", system.gA), ("gB", system.gB)):
            r = float(np.abs(g[:, j] - unit).max())
            if r > STOCH_TOL:
                out.append(Violation(name, j, r, f"committed column {j} is not the identity"))
    if system.alpha.shape != (K,):
        out.append(Violation("alpha", None, 0.0, f"alpha has shape {system.alpha.shape}"))
    return ValidationReport(tuple(out))


def validate_macrostate(n, K=None, tol=SIMPLEX_TOL):
    """Return n as a float array after checking simplex membership."""
    n = np.asarray(n, dtype=float)
    if K is not None and n.shape != (K,):
        raise InvalidParameterError(f"macrostate has shape {n.shape}, want ({K},)")
    if n.min() < -tol:
        raise InvalidParameterError(f"macrostate has negative entry {n.min()}")
    if abs(n.sum() - 1.0) > tol:
        raise InvalidParameterError(f"macrostate sums to {n.sum()!r}")
    return n


# ---------------------------------------------------------------------------
# canonical builders

def make_long() -> SignallingSystem:
    """Listener-only Naming Game on states (A, AB, B)."""
    spins = SpinSpace(("A", "AB", "B"))
    alpha = np.array([1.0, 0.5, 0.0])
    gA = np.array([[1.0, 1.0, 0.0],
                   [0.0, 0.0, 1.0],
                   [0.0, 0.0, 0.0]])
    gB = np.array([[0.0, 0.0, 0.0],
                   [1.0, 0.0, 0.0],
                   [0.0, 1.0, 1.0]])
    return SignallingSystem(spins, alpha, gA, gB)


def make_kng(K: int) -> SignallingSystem:
    """K-step Naming Game on states 0..K; message A pushes up, B pushes down."""
    if K < 1:
        raise InvalidParameterError("K must be >= 1")
    spins = SpinSpace(tuple(str(k) for k in range(K + 1)))
    alpha = np.arange(K + 1) / K
    gA = np.zeros((K + 1, K + 1))
    gB = np.zeros((K + 1, K + 1))
    for k in range(K + 1):
        gA[min(k + 1, K), k] = 1.0
        gB[max(k - 1, 0), k] = 1.0
    return SignallingSystem(spins, alpha, gA, gB)


def make_counterexample() -> SignallingSystem:
    """Same as make_long() except gB: A->B, AB->AB, B->B.  Not monotone."""
    base = make_long()
    gB = np.array([[0.0, 0.0, 0.0],
                   [0.0, 1.0, 0.0],
                   [1.0, 0.0, 1.0]])
    return SignallingSystem(base.spins, base.alpha, base.gA, gB)


def with_committed(system: SignallingSystem, spec) -> SignallingSystem:
    """Append one never-changing spin state per (base_label, alpha) entry."""
    if not spec:
        return system
    K = system.K
    m = len(spec)
    labels = list(system.labels)
    base_idx = []
    for base, _a in spec:
        base_idx.append(system.spins.index(base))
        name = f"C_{base}"
        while name in labels:
            name += "'"
        labels.append(name)
    alpha = np.concatenate([system.alpha, [a for _b, a in spec]])
    gA = np.eye(K + m)
    gB = np.eye(K + m)
    gA[:K, :K] = system.gA
    gB[:K, :K] = system.gB
    committed = frozenset(system.committed) | frozenset(range(K, K + m))
    committed_base = dict(system.committed_base)
    committed_base.update({K + i: base_idx[i] for i in range(m)})
    return SignallingSystem(SpinSpace(tuple(labels)), alpha, gA, gB,
                            committed, committed_base)


BUILDERS = {
    "long": make_long,
    "counterexample": make_counterexample,
}


def build(name: str) -> SignallingSystem:
    """Resolve a builder spec: 'long', 'counterexample', 'kng:K',
    optionally suffixed '+committed:BASE=ALPHA[,BASE=ALPHA...]'."""
    name, _, committed = name.partition("+committed:")
    if name in BUILDERS:
        system = BUILDERS[name]()
    elif name.startswith("kng:"):
        system = make_kng(int(name.split(":", 1)[1]))
    else:
        raise InvalidParameterError(f"unknown builder {name!r}")
    if committed:
        spec = []
        for part in committed.split(","):
            base, _, a = part.partition("=")
            spec.append((base, float(a)))
        system = with_committed(system, spec)
    return system


# ---------------------------------------------------------------------------
# link macrostates

class LinkSpace:
    """Canonical ordering of the K(K+1)/2 unordered spin pairs (i <= j)."""

    def __init__(self, K):
        self.K = K
        self.pairs = [(i, j) for i in range(K) for j in range(i, K)]
        self.L = len(self.pairs)
        self._index = {p: a for a, p in enumerate(self.pairs)}

    def index(self, i, j):
        return self._index[(i, j) if i <= j else (j, i)]

    def labels(self, spins: SpinSpace):
        return [f"{spins.labels[i]}-{spins.labels[j]}" for i, j in self.pairs]

    def sigma(self, i, j):
        v = np.zeros(self.L)
        v[self.index(i, j)] = 1.0
        return v

    def to_matrix(self, l):
        """Symmetric pair matrix: diagonal gets l, off-diagonal l/2 per side."""
        l = np.asarray(l, dtype=float)
        m = np.zeros((self.K, self.K))
        for a, (i, j) in enumerate(self.pairs):
            if i == j:
                m[i, i] = l[a]
            else:
                m[i, j] = m[j, i] = l[a] / 2.0
        return m

    def from_matrix(self, m):
        m = np.asarray(m, dtype=float)
        l = np.empty(self.L)
        for a, (i, j) in enumerate(self.pairs):
            l[a] = m[i, i] if i == j else m[i, j] + m[j, i]
        return l

    def node_marginal(self, m):
        """Row sums of a pair matrix; a valid node macrostate."""
        return np.asarray(m, dtype=float).sum(axis=1)

    def from_node(self, n):
        """Product-measure link state with node marginal n."""
        return self.from_matrix(np.outer(n, n))


def validate_link_macrostate(l, linkspace: LinkSpace, tol=SIMPLEX_TOL):
    l = np.asarray(l, dtype=float)
    if l.shape != (linkspace.L,):
        raise InvalidParameterError(f"link macrostate has shape {l.shape}, want ({linkspace.L},)")
    if l.min() < -tol:
        raise InvalidParameterError(f"link macrostate has negative entry {l.min()}")
    if abs(l.sum() - 1.0) > tol:
        raise InvalidParameterError(f"link macrostate sums to {l.sum()!r}")
    return l
