import numpy as np
import pytest

from monosig.monotone import (Verdict, certify, check_condition_a,
                              check_condition_b, check_condition_c, find_order,
                              type_c_sampled)
from monosig.orders import PartialOrder, enumerate_orders
from monosig.systems import make_kng, with_committed

A, AB, B = 0, 1, 2


class TestConditionA:
    def test_long_chain_passes(self, long_sys, long_chain):
        res = check_condition_a(long_sys, long_chain)
        assert res.passed and res.margin > 0

    def test_counterexample_single_edge_fails(self, counter_sys):
        order = PartialOrder.from_edges(3, [(AB, A)])
        assert not check_condition_a(counter_sys, order).passed

    def test_committed_zero_difference_passes(self, committed_sys):
        # committed columns are identical in gA and gB; the zero vector is in
        # every cone, so adding committed states cannot break condition (a)
        order = PartialOrder.from_edges(4, [(B, AB), (AB, A)])
        assert check_condition_a(committed_sys, order).passed

    def test_witness_reported_on_failure(self, counter_sys):
        res = check_condition_a(counter_sys, PartialOrder.from_edges(3, [(AB, A)]))
        assert not res.passed
        assert res.witness in ("A", "AB", "B")
        assert res.margin <= 0


class TestConditionB:
    def test_long_chain_margins(self, long_sys, long_chain):
        res = check_condition_b(long_sys, long_chain)
        assert res.passed
        assert res.margin == pytest.approx(0.5)

    def test_kng4_margins(self):
        res = check_condition_b(make_kng(4), PartialOrder.chain(5))
        assert res.passed
        assert res.margin == pytest.approx(0.25)

    def test_flat_alpha_fails(self, long_sys):
        # an order edge between equal-alpha states has zero margin
        sys2 = with_committed(long_sys, [("A", 1.0)])
        order = PartialOrder.from_edges(4, [(0, 3)])  # A < C_A, both alpha=1
        res = check_condition_b(sys2, order)
        assert not res.passed and res.margin == 0.0

    def test_empty_order_vacuous(self, long_sys):
        assert check_condition_b(long_sys, PartialOrder.empty(3)).passed


class TestConditionC:
    def test_long_chain_passes(self, long_sys, long_chain):
        assert check_condition_c(long_sys, long_chain).passed

    def test_kng_chain_passes(self):
        for K in (2, 3, 5):
            assert check_condition_c(make_kng(K), PartialOrder.chain(K + 1)).passed

    def test_counterexample_edge_fails(self, counter_sys):
        # gB maps the covering pair (AB, A) to sigma(AB), sigma(B): reversed
        order = PartialOrder.from_edges(3, [(AB, A)])
        res = check_condition_c(counter_sys, order)
        assert not res.passed
        assert res.witness[0] == "gB"


class TestCertify:
    def test_long_chain_certified(self, long_sys, long_chain):
        report = certify(long_sys, long_chain)
        assert report.verdict is Verdict.CERTIFIED_MONOTONE
        assert all(c.passed for c in report.conditions)

    def test_committed_extension_certified(self, committed_sys):
        order = PartialOrder.from_edges(4, [(B, AB), (AB, A)])
        assert certify(committed_sys, order).verdict is Verdict.CERTIFIED_MONOTONE

    def test_counterexample_never_certified(self, counter_sys):
        for order in enumerate_orders(counter_sys):
            if not order.nontrivial:
                continue
            assert certify(counter_sys, order).verdict is Verdict.NOT_CERTIFIED

    def test_report_json(self, long_sys, long_chain):
        doc = certify(long_sys, long_chain).to_json_dict(long_sys.labels)
        assert doc["verdict"] == "CertifiedMonotone"
        assert len(doc["conditions"]) == 3
        assert "sufficient" in doc["note"]


class TestFindOrder:
    def test_long_finds_chain(self, long_sys, long_chain):
        report = find_order(long_sys)
        assert report.verdict is Verdict.CERTIFIED_MONOTONE
        assert report.order == long_chain

    def test_counterexample_no_order(self, counter_sys):
        report = find_order(counter_sys)
        assert report.verdict is Verdict.NO_ORDER_EXISTS
        assert report.order is None

    def test_kng5_full_chain(self):
        report = find_order(make_kng(5))
        assert report.verdict is Verdict.CERTIFIED_MONOTONE
        assert report.order == PartialOrder.chain(6)


class TestTypeC:
    def test_long_chain_passes(self, long_sys, long_chain):
        res = type_c_sampled(long_sys, long_chain, 1000, seed=0)
        assert res.passed and res.counterexample is None

    def test_counterexample_found(self, counter_sys, long_chain):
        res = type_c_sampled(counter_sys, long_chain, 1000, seed=0)
        assert not res.passed
        n, k = res.counterexample
        assert n.min() > 0 and abs(n.sum() - 1.0) < 1e-12
        assert res.residual > 0

    def test_deterministic_in_seed(self, counter_sys, long_chain):
        r1 = type_c_sampled(counter_sys, long_chain, 200, seed=7)
        r2 = type_c_sampled(counter_sys, long_chain, 200, seed=7)
        assert np.array_equal(r1.witness_state, r2.witness_state)
        assert r1.witness_generator == r2.witness_generator

    def test_rejects_bad_count(self, long_sys, long_chain):
        with pytest.raises(ValueError):
            type_c_sampled(long_sys, long_chain, 0, seed=0)
