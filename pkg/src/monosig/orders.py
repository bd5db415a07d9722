"""Partial orders on spin states, generator cones and membership certificates.

A partial order on spin states induces an order on macrostates: n < n' iff
n' - n lies in the cone nonnegatively generated by the covering-pair
difference vectors (the Hasse edges, each sigma(greater) - sigma(less)).
Membership is decided as a nonnegative least-squares feasibility problem,
never by inversion: the generator set may be larger than the tangent
dimension.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import nnls

from .systems import InvalidParameterError, LinkSpace, SignallingSystem

CONE_TOL = 1e-9      # LP feasibility slack
EQ_TOL = 1e-10       # per-component equality in compare


class CapacityError(ValueError):
    """Enumeration over all candidate orders is too large; supply an order."""


def _closure(mat):
    """Boolean transitive closure (Warshall by repeated squaring)."""
    c = mat.copy()
    for _ in range(max(1, int(np.ceil(np.log2(max(2, c.shape[0])))))):
        c = c | (c @ c)
    return c


@dataclass(frozen=True)
class PartialOrder:
    """Strict order relation stored as its own transitive closure."""

    size: int
    relation: frozenset  # ordered pairs (less, greater), transitively closed

    @classmethod
    def from_edges(cls, size, edges):
        mat = np.zeros((size, size), dtype=bool)
        for a, b in edges:
            if a == b:
                raise InvalidParameterError("self-edges are not allowed")
            mat[a, b] = True
        c = _closure(mat)
        if np.any(c & c.T):
            raise InvalidParameterError("relation has a cycle (antisymmetry violated)")
        rel = frozenset((int(i), int(j)) for i, j in zip(*np.where(c)))
        return cls(size, rel)

    @classmethod
    def chain(cls, size, sequence=None):
        """Total order along `sequence` (default: index order)."""
        seq = list(sequence) if sequence is not None else list(range(size))
        return cls.from_edges(size, list(zip(seq[:-1], seq[1:])))

    @classmethod
    def empty(cls, size):
        return cls(size, frozenset())

    def less(self, a, b):
        return (a, b) in self.relation

    def leq(self, a, b):
        return a == b or (a, b) in self.relation

    @property
    def nontrivial(self):
        return bool(self.relation)

    def hasse_edges(self):
        """Covering pairs: the transitive reduction of the strict relation."""
        out = []
        for a, b in sorted(self.relation):
            if not any((a, c) in self.relation and (c, b) in self.relation
                       for c in range(self.size)):
                out.append((a, b))
        return out

    def generators(self):
        """Generator matrix E, one column sigma(greater)-sigma(less) per Hasse edge."""
        edges = self.hasse_edges()
        E = np.zeros((self.size, len(edges)))
        for k, (a, b) in enumerate(edges):
            E[b, k] = 1.0
            E[a, k] = -1.0
        return E, edges

    def to_json_dict(self, labels):
        return {"edges": [[labels[a], labels[b]] for a, b in self.hasse_edges()]}

    @classmethod
    def from_json_dict(cls, doc, labels):
        idx = {s: i for i, s in enumerate(labels)}
        try:
            edges = [(idx[a], idx[b]) for a, b in doc["edges"]]
        except KeyError as e:
            raise InvalidParameterError(f"unknown spin state {e.args[0]!r} in order") from None
        return cls.from_edges(len(labels), edges)

    @classmethod
    def from_json(cls, text, labels):
        return cls.from_json_dict(json.loads(text), labels)


@dataclass(frozen=True)
class Cone:
    """Cone spanned by nonnegative combinations of the generator columns."""

    E: np.ndarray
    tol: float = CONE_TOL

    def __post_init__(self):
        E = np.asarray(self.E, dtype=float)
        E.setflags(write=False)
        object.__setattr__(self, "E", E)

    @classmethod
    def from_order(cls, order: PartialOrder, tol=CONE_TOL):
        E, _ = order.generators()
        return cls(E, tol)

    def contains(self, d, check_tangent=True):
        """Decide d in cone; returns (bool, lambda-or-None).

        A returned certificate satisfies ||E @ lam - d||_inf <= tol, lam >= 0.
        """
        d = np.asarray(d, dtype=float)
        if check_tangent and abs(d.sum()) > max(self.tol, 1e-9):
            raise InvalidParameterError(f"vector sums to {d.sum()!r}, not a tangent vector")
        if self.E.shape[1] == 0:
            ok = float(np.abs(d).max(initial=0.0)) <= self.tol
            return ok, (np.zeros(0) if ok else None)
        lam, _rnorm = nnls(self.E, d)
        if float(np.abs(self.E @ lam - d).max()) <= self.tol:
            return True, lam
        return False, None


class Comparison(Enum):
    LESS = "Less"
    GREATER = "Greater"
    EQUAL = "Equal"
    INCOMPARABLE = "Incomparable"


def cone_contains(cone: Cone, d):
    return cone.contains(d)


def compare(order: PartialOrder, n, n2, tol=CONE_TOL):
    """Compare two macrostates under the cone order."""
    n = np.asarray(n, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    if np.abs(n - n2).max() <= EQ_TOL:
        return Comparison.EQUAL
    cone = Cone.from_order(order, tol)
    fwd, _ = cone.contains(n2 - n)
    bwd, _ = cone.contains(n - n2)
    if fwd and bwd:
        return Comparison.EQUAL
    if fwd:
        return Comparison.LESS
    if bwd:
        return Comparison.GREATER
    return Comparison.INCOMPARABLE


def induced_link_order(order: PartialOrder, linkspace: LinkSpace = None) -> PartialOrder:
    """Order on unordered link types: {a,b} < {c,d} iff endpoints can be
    matched so both are <= with at least one strict."""
    ls = linkspace or LinkSpace(order.size)
    edges = []
    for x, (a, b) in enumerate(ls.pairs):
        for y, (c, d) in enumerate(ls.pairs):
            if x == y:
                continue
            if (order.leq(a, c) and order.leq(b, d)) or (order.leq(a, d) and order.leq(b, c)):
                edges.append((x, y))
    return PartialOrder.from_edges(ls.L, edges)


def alpha_candidate_edges(system: SignallingSystem):
    """Ordered pairs (i, j) allowed by the strict speaking-probability order."""
    K = system.K
    return [(i, j) for i in range(K) for j in range(K)
            if i != j and system.alpha[i] < system.alpha[j]]


def enumerate_orders(system: SignallingSystem, maxK: int = 6):
    """All partial orders compatible with the strict alpha inequality,
    emitted deduplicated in increasing relation size."""
    K = system.K
    if K > maxK:
        raise CapacityError(
            f"{K} spin states exceeds the enumeration cap {maxK}; "
            "supply an explicit order instead")
    cand = alpha_candidate_edges(system)
    seen = set()
    orders = []
    for r in range(len(cand) + 1):
        for subset in itertools.combinations(cand, r):
            mat = np.zeros((K, K), dtype=bool)
            for a, b in subset:
                mat[a, b] = True
            c = _closure(mat)
            rel = frozenset((int(i), int(j)) for i, j in zip(*np.where(c)))
            if rel in seen:
                continue
            seen.add(rel)
            orders.append(PartialOrder(K, rel))
    orders.sort(key=lambda o: (len(o.relation), sorted(o.relation)))
    return orders
