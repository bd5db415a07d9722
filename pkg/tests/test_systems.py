import json

import numpy as np
import pytest

from monosig.systems import (InvalidParameterError, LinkSpace, SignallingSystem,
                             SpinSpace, build, make_counterexample, make_kng,
                             make_long, validate, validate_link_macrostate,
                             validate_macrostate, with_committed)


def unit(K, k):
    v = np.zeros(K)
    v[k] = 1.0
    return v


class TestBuilders:
    def test_long_is_valid(self, long_sys):
        assert validate(long_sys).ok

    def test_long_alpha(self, long_sys):
        assert np.array_equal(long_sys.alpha, [1.0, 0.5, 0.0])

    def test_long_gA_column_AB_is_A(self, long_sys):
        assert np.array_equal(long_sys.gA[:, 1], unit(3, 0))

    def test_long_gB_column_A_is_AB(self, long_sys):
        assert np.array_equal(long_sys.gB[:, 0], unit(3, 1))

    def test_kng2_isomorphic_to_long(self, long_sys):
        kng = make_kng(2)
        r = [2, 1, 0]  # kng counts from the B end; reverse to match long
        assert np.array_equal(kng.alpha[r], long_sys.alpha)
        assert np.array_equal(kng.gA[np.ix_(r, r)], long_sys.gA)
        assert np.array_equal(kng.gB[np.ix_(r, r)], long_sys.gB)

    def test_kng3_alpha(self):
        assert np.allclose(make_kng(3).alpha, [0, 1 / 3, 2 / 3, 1])

    def test_kng_valid(self):
        for K in range(1, 7):
            assert validate(make_kng(K)).ok

    def test_kng_rejects_zero(self):
        with pytest.raises(InvalidParameterError):
            make_kng(0)

    def test_counterexample_gB_columns(self, counter_sys):
        assert np.array_equal(counter_sys.gB[:, 0], unit(3, 2))  # A -> B
        assert np.array_equal(counter_sys.gB[:, 1], unit(3, 1))  # AB -> AB

    def test_counterexample_gA_matches_long(self, counter_sys, long_sys):
        assert np.array_equal(counter_sys.gA, long_sys.gA)

    def test_with_committed_alpha(self, long_sys):
        sys2 = with_committed(long_sys, [("A", 1.0), ("B", 0.0)])
        assert np.array_equal(sys2.alpha, [1.0, 0.5, 0.0, 1.0, 0.0])
        assert sys2.labels == ("A", "AB", "B", "C_A", "C_B")

    def test_committed_columns_are_identity(self, committed_sys):
        k = committed_sys.spins.index("C_A")
        assert np.array_equal(committed_sys.gA[:, k], unit(4, k))
        assert np.array_equal(committed_sys.gB[:, k], unit(4, k))
        assert validate(committed_sys).ok

    def test_committed_base_records_target(self, committed_sys):
        k = committed_sys.spins.index("C_A")
        assert committed_sys.committed_base[k] == committed_sys.spins.index("A")


class TestBuildParsing:
    def test_build_long(self, long_sys):
        assert np.array_equal(build("long").alpha, long_sys.alpha)

    def test_build_kng(self):
        assert build("kng:3").K == 4

    def test_build_committed_suffix(self):
        sys2 = build("long+committed:A=1,B=0")
        assert sys2.labels == ("A", "AB", "B", "C_A", "C_B")
        assert len(sys2.committed) == 2

    def test_build_unknown_raises(self):
        with pytest.raises(InvalidParameterError):
            build("nope")


class TestValidation:
    def test_bad_column_sum_reported(self, long_sys):
        gA = long_sys.gA.copy()
        gA[0, 0] = 0.5
        bad = SignallingSystem(long_sys.spins, long_sys.alpha, gA, long_sys.gB)
        report = validate(bad)
        assert not report.ok
        assert any(v.field == "gA" for v in report.violations)

    def test_alpha_out_of_range_reported(self, long_sys):
        bad = SignallingSystem(long_sys.spins, np.array([1.5, 0.5, 0.0]),
                               long_sys.gA, long_sys.gB)
        assert any(v.field == "alpha" for v in validate(bad).violations)

    def test_non_identity_committed_column_reported(self, long_sys):
        bad = SignallingSystem(long_sys.spins, long_sys.alpha, long_sys.gA,
                               long_sys.gB, committed=frozenset({0}))
        report = validate(bad)
        assert any("committed" in v.message for v in report.violations)

    def test_duplicate_labels_rejected(self):
        with pytest.raises(InvalidParameterError):
            SpinSpace(("A", "A"))

    def test_macrostate_shape_and_simplex(self):
        with pytest.raises(InvalidParameterError):
            validate_macrostate([0.5, 0.5], K=3)
        with pytest.raises(InvalidParameterError):
            validate_macrostate([0.7, 0.4, 0.0], K=3)
        with pytest.raises(InvalidParameterError):
            validate_macrostate([-0.1, 1.1, 0.0], K=3)
        out = validate_macrostate([0.2, 0.3, 0.5], K=3)
        assert out.dtype == float


class TestJson:
    def test_system_round_trip(self, committed_sys):
        doc = json.loads(committed_sys.to_json())
        back = SignallingSystem.from_json_dict(doc)
        assert back.labels == committed_sys.labels
        assert np.array_equal(back.alpha, committed_sys.alpha)
        assert np.array_equal(back.gA, committed_sys.gA)
        assert np.array_equal(back.gB, committed_sys.gB)
        assert back.committed == committed_sys.committed

    def test_columns_serialized_as_inner_arrays(self, long_sys):
        doc = long_sys.to_json_dict()
        # inner array j must be column j, i.e. the image of sigma(j)
        assert doc["gB"][0] == [0.0, 1.0, 0.0]  # A -> AB


class TestLinkSpace:
    def test_pair_count(self):
        assert LinkSpace(3).L == 6
        assert LinkSpace(4).L == 10

    def test_matrix_round_trip_random(self, rng):
        ls = LinkSpace(3)
        for _ in range(100):
            l = rng.dirichlet(np.ones(ls.L))
            assert np.allclose(ls.from_matrix(ls.to_matrix(l)), l, atol=1e-14)

    def test_matrix_symmetric_unit_trace(self, rng):
        ls = LinkSpace(3)
        l = rng.dirichlet(np.ones(ls.L))
        m = ls.to_matrix(l)
        assert np.allclose(m, m.T)
        assert abs(m.sum() - 1.0) < 1e-14

    def test_from_node_marginal(self, rng):
        ls = LinkSpace(3)
        n = rng.dirichlet(np.ones(3))
        l = ls.from_node(n)
        assert np.allclose(ls.node_marginal(ls.to_matrix(l)), n, atol=1e-14)

    def test_validate_link_macrostate(self):
        ls = LinkSpace(3)
        with pytest.raises(InvalidParameterError):
            validate_link_macrostate(np.ones(5) / 5, ls)
        validate_link_macrostate(np.ones(6) / 6, ls)
