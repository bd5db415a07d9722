"""Monotonicity certification for signalling systems.

A sufficient certificate for order-preservation of the complete-network
mean-field flow consists of three conditions on the governing elements:
(a) the A-message moves every listener state up relative to the B-message,
(b) speaking probability is strictly increasing along the order,
(c) both transition matrices preserve the order.
Certification is sufficient only; refutation of a certificate search does
not prove non-monotonicity.  A sampled directional-derivative falsifier
(the Kamke-type representation test) is provided as an independent check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import nnls

from .orders import Cone, PartialOrder, enumerate_orders
from .systems import SignallingSystem

SUFFICIENCY_NOTE = ("certificate conditions are sufficient, not necessary; "
                    "a failed search refutes only certifiability over "
                    "alpha-consistent orders")


class Verdict(Enum):
    CERTIFIED_MONOTONE = "CertifiedMonotone"
    NOT_CERTIFIED = "NotCertified"
    NO_ORDER_EXISTS = "NoOrderExists"


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    witness: object    # spin label or (less, greater) labels of the worst case
    margin: float      # >0 passes; for cone checks, tol minus residual

    def to_json_dict(self):
        return {"name": self.name, "pass": self.passed,
                "witness": self.witness, "margin": self.margin}


@dataclass(frozen=True)
class MonotonicityReport:
    verdict: Verdict
    order: PartialOrder
    conditions: tuple
    note: str = SUFFICIENCY_NOTE

    def to_json_dict(self, labels):
        return {
            "verdict": self.verdict.value,
            "order": self.order.to_json_dict(labels) if self.order is not None else None,
            "conditions": [c.to_json_dict() for c in self.conditions],
            "note": self.note,
        }

    def to_json(self, labels, **kw):
        return json.dumps(self.to_json_dict(labels), **kw)


def _cone_margin(cone: Cone, d):
    """tol - membership residual; positive iff d is in the cone."""
    ok, lam = cone.contains(d)
    if ok:
        return cone.tol - float(np.abs(cone.E @ lam - d).max()) if lam.size else cone.tol
    if cone.E.shape[1] == 0:
        return cone.tol - float(np.abs(d).max())
    lam, _ = nnls(cone.E, np.asarray(d, dtype=float))
    return cone.tol - float(np.abs(cone.E @ lam - d).max())


def check_condition_a(system: SignallingSystem, order: PartialOrder) -> ConditionResult:
    """For every spin: gB.sigma < gA.sigma under the cone order."""
    cone = Cone.from_order(order)
    worst = (None, np.inf)
    for k in range(system.K):
        m = _cone_margin(cone, system.gA[:, k] - system.gB[:, k])
        if m < worst[1]:
            worst = (system.labels[k], m)
    return ConditionResult("a", worst[1] > 0, worst[0], worst[1])


def check_condition_b(system: SignallingSystem, order: PartialOrder) -> ConditionResult:
    """Strict alpha increase along every covering pair."""
    worst = (None, np.inf)
    for a, b in order.hasse_edges():
        m = float(system.alpha[b] - system.alpha[a])
        if m < worst[1]:
            worst = ((system.labels[a], system.labels[b]), m)
    if worst[0] is None:
        return ConditionResult("b", True, None, np.inf)
    return ConditionResult("b", worst[1] > 0, worst[0], worst[1])


def check_condition_c(system: SignallingSystem, order: PartialOrder) -> ConditionResult:
    """Both transition matrices map covering pairs to cone-ordered pairs."""
    cone = Cone.from_order(order)
    worst = (None, np.inf)
    for a, b in order.hasse_edges():
        for name, g in (("gA", system.gA), ("gB", system.gB)):
            m = _cone_margin(cone, g[:, b] - g[:, a])
            if m < worst[1]:
                worst = ((name, system.labels[a], system.labels[b]), m)
    if worst[0] is None:
        return ConditionResult("c", True, None, np.inf)
    return ConditionResult("c", worst[1] > 0, worst[0], worst[1])


def certify(system: SignallingSystem, order: PartialOrder) -> MonotonicityReport:
    """Run all three conditions; certified iff every one passes.

    Checks run on covering pairs only: passing extends to all comparable
    pairs because cone membership is closed under addition.
    """
    conds = (check_condition_a(system, order),
             check_condition_b(system, order),
             check_condition_c(system, order))
    ok = all(c.passed for c in conds)
    return MonotonicityReport(
        Verdict.CERTIFIED_MONOTONE if ok else Verdict.NOT_CERTIFIED, order, conds)


def find_order(system: SignallingSystem, maxK: int = 6) -> MonotonicityReport:
    """Search alpha-consistent orders for a certificate; smallest first.

    NoOrderExists means no certificate exists within that family, not that
    the system is proven non-monotone.
    """
    for order in enumerate_orders(system, maxK=maxK):
        if not order.nontrivial:
            continue
        report = certify(system, order)
        if report.verdict is Verdict.CERTIFIED_MONOTONE:
            return report
    return MonotonicityReport(Verdict.NO_ORDER_EXISTS, None, ())


@dataclass(frozen=True)
class TypeCResult:
    passed: bool
    witness_state: np.ndarray = None
    witness_generator: int = None
    residual: float = 0.0

    @property
    def counterexample(self):
        return None if self.passed else (self.witness_state, self.witness_generator)


def type_c_sampled(system: SignallingSystem, order: PartialOrder,
                   sample_count: int, seed: int,
                   min_component: float = 1e-3, tol=None) -> TypeCResult:
    """Sampled Kamke-type falsifier on the complete-network drift.

    At interior macrostates n and each generator e_k, the directional
    derivative of the drift must admit a representation sum_i b_i e_i with
    b_i >= 0 for every i != k (b_k unconstrained).  Feasibility is decided
    by nonnegative least squares with the k-th coefficient split in sign.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    E, _ = order.generators()
    K, nB = E.shape
    tol = Cone.from_order(order).tol if tol is None else tol
    rng = np.random.default_rng(seed)
    gA, gB, alpha = system.gA, system.gB, system.alpha
    for _ in range(sample_count):
        n = rng.dirichlet(np.ones(K))
        n = np.maximum(n, min_component)
        n /= n.sum()
        p = float(alpha @ n)
        base = p * gA + (1 - p) * gB - np.eye(K)
        gdn = (gA - gB) @ n
        for k in range(nB):
            d = base @ E[:, k] + float(alpha @ E[:, k]) * gdn
            A = np.concatenate([E, -E[:, k:k + 1]], axis=1)
            lam, _ = nnls(A, d)
            res = float(np.abs(A @ lam - d).max())
            if res > tol:
                return TypeCResult(False, n, k, res)
    return TypeCResult(True)
