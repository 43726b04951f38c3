"""Scenario construction, non-signaling checks, correlators, marginals."""

import numpy as np
import pytest

from netcausal import (
    BadIndex,
    EmptySource,
    Mismatch,
    NonBinary,
    build_scenario,
    check_nonsignaling,
    correlator,
    CorrelationTensor,
    deterministic_box,
    independent_agents,
    marginalize,
    mix,
    uniform_box,
)


def bilocal():
    return build_scenario(3, 2, [{1}, {1, 2}, {2}])


def bell_pair():
    return build_scenario(2, 1, [{1}, {1}])


def pr_box():
    scn = bell_pair()
    arr = np.zeros((2, 2, 2, 2))
    for a, b, x, y in np.ndindex(2, 2, 2, 2):
        if (a ^ b) == (x & y):
            arr[a, b, x, y] = 0.5
    return CorrelationTensor(scn, arr)


def b16_box():
    """1/4 * delta(a1+a2+a3 = x1*(x2+x3)) on the tripartite binary scenario."""
    scn = bilocal()
    arr = np.zeros((2, 2, 2, 2, 2, 2))
    for a1, a2, a3, x1, x2, x3 in np.ndindex(2, 2, 2, 2, 2, 2):
        if (a1 ^ a2 ^ a3) == (x1 & (x2 ^ x3)):
            arr[a1, a2, a3, x1, x2, x3] = 0.25
    return CorrelationTensor(scn, arr)


class TestBuildScenario:
    def test_bilocal_dimension(self):
        scn = bilocal()
        assert scn.dimension == 64

    def test_bell_dimension(self):
        assert bell_pair().dimension == 16

    def test_sharing_coverage(self):
        # agent 3 sharing nothing is fine as long as every source is covered
        scn = build_scenario(3, 2, [{1}, {1, 2}, set()])
        assert scn.sharing[2] == frozenset()

    def test_unshared_source_rejected(self):
        with pytest.raises(EmptySource):
            build_scenario(3, 2, [{1}, {1}, {1}])

    def test_bad_source_index_rejected(self):
        with pytest.raises(BadIndex):
            build_scenario(3, 2, [{1}, {1, 3}, {2}])

    def test_independent_agents_bilocal(self):
        assert independent_agents(bilocal()) == (1, 3)

    def test_independent_agents_bell(self):
        assert independent_agents(bell_pair()) == (1,)


class TestNonsignaling:
    def test_pr_box_passes(self):
        rep = check_nonsignaling(pr_box())
        assert rep.passed
        assert rep.max_violation == 0.0

    def test_signaling_box_flags_party_one(self):
        scn = bell_pair()
        arr = np.zeros((2, 2, 2, 2))
        for a, b, x, y in np.ndindex(2, 2, 2, 2):
            if a == y:
                arr[a, b, x, y] = 0.5
        rep = check_nonsignaling(CorrelationTensor(scn, arr))
        assert not rep.passed
        assert rep.violating_party == 1

    def test_b16_box_passes(self):
        rep = check_nonsignaling(b16_box())
        assert rep.passed

    def test_uniform_passes(self):
        assert check_nonsignaling(uniform_box(bilocal())).passed


class TestCorrelator:
    def test_uniform_vanishes(self):
        P = uniform_box(bilocal())
        for x in P.scenario.joint_inputs():
            assert correlator(P, x) == pytest.approx(0.0)

    def test_all_zero_outputs(self):
        scn = bilocal()
        P = deterministic_box(scn, {0: (0, 0), 1: (0, 0), 2: (0, 0)})
        assert correlator(P, (0, 0, 0)) == pytest.approx(1.0)

    def test_b16_at_101(self):
        # parity bit x1*(x2^x3) = 1, so every supported outcome has odd parity
        assert correlator(b16_box(), (1, 0, 1)) == pytest.approx(-1.0)

    def test_nonbinary_rejected(self):
        scn = build_scenario(1, 1, [{1}], [2], [3])
        P = uniform_box(scn)
        with pytest.raises(NonBinary):
            correlator(P, (0,))

    def test_mixture_linearity(self):
        rng = np.random.default_rng(7)
        scn = bell_pair()
        for _ in range(20):
            t = rng.uniform()
            raw = rng.dirichlet(np.ones(4), size=4)  # one simplex per input
            arr = np.zeros((2, 2, 2, 2))
            for ix, (x, y) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
                arr[:, :, x, y] = raw[ix].reshape(2, 2)
            P = CorrelationTensor(scn, arr)
            U = uniform_box(scn)
            M = mix([P, U], [t, 1.0 - t])
            for x in scn.joint_inputs():
                assert correlator(M, x) == pytest.approx(t * correlator(P, x), abs=1e-12)


class TestMarginalize:
    def test_normalization_preserved(self):
        rng = np.random.default_rng(3)
        scn = bilocal()
        arr = np.zeros((2,) * 6)
        for x in scn.joint_inputs():
            arr[(Ellipsis,) + x] = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
        P = CorrelationTensor(scn, arr)
        sub = marginalize(P, [1, 2], {3: 1})
        sums = sub.table.sum(axis=(0, 1))
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)

    def test_pr_keep_first_is_uniform(self):
        sub = marginalize(pr_box(), [1], {2: 0})
        np.testing.assert_allclose(sub.table, 0.5, atol=1e-12)

    def test_deterministic_product_marginal(self):
        scn = bilocal()
        P = deterministic_box(scn, {0: (0, 1), 1: (1, 0), 2: (1, 1)})
        sub = marginalize(P, [2], {1: 0, 3: 1})
        assert sub.prob((1,), (0,)) == pytest.approx(1.0)
        assert sub.prob((0,), (1,)) == pytest.approx(1.0)

    def test_nonsignaling_marginal_independent_of_fixed(self):
        P = b16_box()
        a = marginalize(P, [1, 2], {3: 0})
        b = marginalize(P, [1, 2], {3: 1})
        np.testing.assert_allclose(a.table, b.table, atol=1e-12)

    def test_missing_fixed_input_rejected(self):
        with pytest.raises(BadIndex):
            marginalize(pr_box(), [1], {})


class TestCorrelationTensor:
    def test_flat_round_trip(self):
        P = b16_box()
        Q = CorrelationTensor.from_flat(P.scenario, P.flat())
        np.testing.assert_array_equal(P.table, Q.table)

    def test_flat_order_outputs_fastest(self):
        # cell (a=(1,0), x=(0,0)) sits at flat index 1 for a 2x2 scenario
        scn = bell_pair()
        arr = np.zeros((2, 2, 2, 2))
        arr[1, 0, :, :] = 1.0  # deterministic a=1, b=0 for every input
        P = CorrelationTensor(scn, arr)
        flat = P.flat()
        assert flat[1] == 1.0 and flat[0] == 0.0

    def test_bad_normalization_rejected(self):
        scn = bell_pair()
        with pytest.raises(Mismatch):
            CorrelationTensor(scn, np.full((2, 2, 2, 2), 0.3))

    def test_table_immutable(self):
        P = pr_box()
        with pytest.raises(ValueError):
            P.table[0, 0, 0, 0] = 1.0
