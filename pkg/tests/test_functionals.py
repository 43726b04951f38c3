"""Bell functional evaluations against brute-force oracles and known bounds."""

import itertools
import math

import numpy as np
import pytest

from netcausal import (
    CorrelationTensor,
    IndependentSet,
    Mismatch,
    NonBinary,
    OutOfRange,
    WrongArity,
    build_scenario,
    chained_bell,
    chsh_quantity,
    deterministic_box,
    eval_cca,
    eval_cyclic,
    eval_IJ,
    eval_Rk,
    eval_svetlichny,
    i2_from_chsh,
    mix,
    uniform_box,
    variational_distance,
)

SQRT2 = math.sqrt(2.0)


def tripartite():
    return build_scenario(3, 2, [{1}, {1, 2}, {2}])


def parity_box(scn, parity_fn):
    """Uniform box supported on outcomes with sum(a) = parity_fn(x) mod 2."""
    n = scn.n_agents
    arr = np.zeros((2,) * (2 * n))
    for cell in np.ndindex(*((2,) * (2 * n))):
        a, x = cell[:n], cell[n:]
        if (sum(a) % 2) == parity_fn(*x):
            arr[cell] = 2.0 ** -(n - 1)
    return CorrelationTensor(scn, arr)


def b16_box():
    return parity_box(tripartite(), lambda x1, x2, x3: x1 & (x2 ^ x3))


def and_parity_box():
    return parity_box(tripartite(), lambda x1, x2, x3: x1 & x2 & x3)


def brute_force_ij(P, indices, i_fixed=0, j_fixed=1):
    """Direct cell-by-cell evaluation, independent of the library path."""
    scn = P.scenario
    n = scn.n_agents
    rest = [i for i in range(1, n + 1) if i not in indices]
    k = len(indices)
    total_i = total_j = 0.0
    for bits in itertools.product((0, 1), repeat=k):
        x_i = [0] * n
        x_j = [0] * n
        for agent, b in zip(indices, bits):
            x_i[agent - 1] = b
            x_j[agent - 1] = b
        for r in rest:
            x_i[r - 1] = i_fixed
            x_j[r - 1] = j_fixed
        e_i = e_j = 0.0
        for a in itertools.product((0, 1), repeat=n):
            sign = (-1.0) ** sum(a)
            e_i += sign * P.prob(a, x_i)
            e_j += sign * P.prob(a, x_j)
        total_i += e_i
        total_j += (-1.0) ** sum(bits) * e_j
    return total_i / 2**k, total_j / 2**k


class TestEvalIJ:
    def test_uniform_vanishes(self):
        P = uniform_box(tripartite())
        i, j = eval_IJ(P, IndependentSet((1, 3)))
        assert i == pytest.approx(0.0) and j == pytest.approx(0.0)

    def test_b16_matches_brute_force(self):
        P = b16_box()
        ind = IndependentSet((1, 3))
        i, j = eval_IJ(P, ind)
        bi, bj = brute_force_ij(P, (1, 3))
        assert (i, j) == pytest.approx((bi, bj), abs=1e-12)
        assert (i, j) == pytest.approx((0.5, 0.5), abs=1e-12)

    def test_ghz_type_plugin(self):
        # E = +1 whenever the non-independent input is 0, E = 0 otherwise
        scn = tripartite()
        arr = np.zeros((2,) * 6)
        for x in scn.joint_inputs():
            block = np.zeros((2, 2, 2))
            if x[1] == 0:
                block[0, 0, 0] = 0.5
                block[1, 0, 1] = 0.25
                block[0, 0, 1] = 0.0
                block[1, 1, 0] = 0.0
                # even-parity support only: (0,0,0), (1,1,0), (1,0,1), (0,1,1)
                block[:] = 0.0
                for a in itertools.product((0, 1), repeat=3):
                    if sum(a) % 2 == 0:
                        block[a] = 0.25
            else:
                block[:] = 0.125
            arr[(Ellipsis,) + x] = block
        P = CorrelationTensor(scn, arr)
        i, j = eval_IJ(P, IndependentSet((1, 3)))
        assert i == pytest.approx(1.0, abs=1e-12)
        assert j == pytest.approx(0.0, abs=1e-12)

    def test_linearity_in_mixtures(self):
        rng = np.random.default_rng(11)
        scn = tripartite()
        U = uniform_box(scn)
        for _ in range(10):
            arr = np.zeros((2,) * 6)
            for x in scn.joint_inputs():
                arr[(Ellipsis,) + x] = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
            P = CorrelationTensor(scn, arr)
            t = rng.uniform()
            M = mix([P, U], [t, 1 - t])
            i0, j0 = eval_IJ(P, IndependentSet((1, 3)))
            it, jt = eval_IJ(M, IndependentSet((1, 3)))
            assert it == pytest.approx(t * i0, abs=1e-12)
            assert jt == pytest.approx(t * j0, abs=1e-12)


class TestEvalRk:
    def test_b16_reaches_quantum_bound(self):
        rep = eval_Rk(b16_box(), IndependentSet((1, 3)))
        assert rep.r_value == pytest.approx(SQRT2, abs=1e-12)
        assert rep.violated["classical"]
        assert not rep.violated["quantum"]
        assert rep.classification == "quantum"

    def test_uniform_no_violation(self):
        rep = eval_Rk(uniform_box(tripartite()), IndependentSet((1, 3)))
        assert rep.r_value == pytest.approx(0.0)
        assert not any(rep.violated.values())

    def test_report_recomputable(self):
        rep = eval_Rk(b16_box(), IndependentSet((1, 3)))
        assert rep.recompute_r() == pytest.approx(rep.r_value, abs=1e-12)

    def test_scaling_under_uniform_mixing(self):
        # R_k(tP + (1-t)U) = t^(1/k) R_k(P)
        rng = np.random.default_rng(5)
        P = b16_box()
        U = uniform_box(P.scenario)
        for _ in range(5):
            t = rng.uniform(0.1, 1.0)
            M = mix([P, U], [t, 1 - t])
            rep = eval_Rk(M, IndependentSet((1, 3)))
            assert rep.r_value == pytest.approx(math.sqrt(t) * SQRT2, abs=1e-10)


class TestCyclic:
    def test_uniform(self):
        assert eval_cyclic(uniform_box(tripartite()), IndependentSet((1, 3))) == 0.0

    def test_b16(self):
        assert eval_cyclic(b16_box(), IndependentSet((1, 3))) == pytest.approx(1.0)

    def test_algebraic_max_single_agent(self):
        # PR correlations attain |I| + |J| = 2 for k = 1
        scn = build_scenario(2, 1, [{1}, {1}])
        arr = np.zeros((2, 2, 2, 2))
        for a, b, x, y in np.ndindex(2, 2, 2, 2):
            if (a ^ b) == (x & y):
                arr[a, b, x, y] = 0.5
        P = CorrelationTensor(scn, arr)
        assert eval_cyclic(P, IndependentSet((1,))) == pytest.approx(2.0)


class TestSvetlichnyAndCca:
    def test_all_zero_box(self):
        scn = tripartite()
        P = deterministic_box(scn, {0: (0, 0), 1: (0, 0), 2: (0, 0)})
        assert eval_svetlichny(P) == pytest.approx(4.0)
        assert eval_cca(P) == pytest.approx(6.0)

    def test_uniform(self):
        U = uniform_box(tripartite())
        assert eval_svetlichny(U) == pytest.approx(0.0)
        assert eval_cca(U) == pytest.approx(0.0)

    def test_b16_values(self):
        # brute-force over the 64 entries: Svetlichny 0; the all-plus
        # combination evaluates to 2, far below its algebraic maximum
        P = b16_box()
        assert eval_svetlichny(P) == pytest.approx(0.0)
        assert eval_cca(P) == pytest.approx(2.0)

    def test_and_parity_box_attains_algebraic_max(self):
        P = and_parity_box()
        assert eval_cca(P) == pytest.approx(8.0)

    def test_local_deterministic_exhaustion(self):
        # all 64 product-deterministic boxes: max Svetlichny 4, max CCA 6
        scn = tripartite()
        best_sv = best_cca = -np.inf
        for maps in itertools.product(itertools.product((0, 1), repeat=2), repeat=3):
            P = deterministic_box(scn, dict(enumerate(maps)))
            best_sv = max(best_sv, eval_svetlichny(P))
            best_cca = max(best_cca, eval_cca(P))
        assert best_sv == pytest.approx(4.0)
        assert best_cca == pytest.approx(6.0)

    def test_wrong_arity(self):
        scn = build_scenario(2, 1, [{1}, {1}])
        with pytest.raises(WrongArity):
            eval_svetlichny(uniform_box(scn))


class TestChsh:
    def pr_box(self):
        scn = build_scenario(2, 1, [{1}, {1}])
        arr = np.zeros((2, 2, 2, 2))
        for a, b, x, y in np.ndindex(2, 2, 2, 2):
            if (a ^ b) == (x & y):
                arr[a, b, x, y] = 0.5
        return CorrelationTensor(scn, arr)

    def test_deterministic(self):
        scn = build_scenario(2, 1, [{1}, {1}])
        P = deterministic_box(scn, {0: (0, 0), 1: (0, 0)})
        assert chsh_quantity(P) == pytest.approx(2.0)

    def test_pr(self):
        assert chsh_quantity(self.pr_box()) == pytest.approx(4.0)


class TestChained:
    def corr_box(self, E):
        """Bipartite box with the given 2x2 correlator matrix, zero marginals."""
        scn = build_scenario(2, 1, [{1}, {1}])
        arr = np.zeros((2, 2, 2, 2))
        for x, y in np.ndindex(2, 2):
            for a, b in np.ndindex(2, 2):
                arr[a, b, x, y] = 0.25 * (1.0 + (-1.0) ** (a + b) * E[x][y])
        return CorrelationTensor(scn, arr)

    def test_chain_satisfied_box(self):
        # correlated on the chain links, anti-correlated on the closing pair
        P = self.corr_box([[1.0, -1.0], [1.0, 1.0]])
        assert chained_bell(P, 2) == pytest.approx(0.0)

    def test_uniform(self):
        scn = build_scenario(2, 1, [{1}, {1}])
        assert chained_bell(uniform_box(scn), 2) == pytest.approx(2.0)

    def test_deterministic_floor(self):
        rng = np.random.default_rng(13)
        scn = build_scenario(2, 1, [{1}, {1}])
        for _ in range(50):
            maps = {0: tuple(rng.integers(0, 2, 2)), 1: tuple(rng.integers(0, 2, 2))}
            P = deterministic_box(scn, maps)
            assert chained_bell(P, 2) >= 1.0 - 1e-12

    def test_chsh_relation_on_canonical_boxes(self):
        # identity I2 = 2 - C2/2 whenever E00+E10 >= 0 and E11 >= E01
        rng = np.random.default_rng(17)
        found = 0
        while found < 25:
            E = rng.uniform(-1, 1, size=(2, 2))
            if E[0][0] + E[1][0] < 0 or E[1][1] < E[0][1]:
                continue
            found += 1
            P = self.corr_box(E.tolist())
            assert chained_bell(P, 2) == pytest.approx(
                i2_from_chsh(chsh_quantity(P)), abs=1e-10
            )

    def test_quantum_optimum_via_relation(self):
        c = 1.0 / SQRT2
        P = self.corr_box([[c, -c], [c, c]])
        assert chsh_quantity(P) == pytest.approx(2 * SQRT2, abs=1e-12)
        assert chained_bell(P, 2) == pytest.approx(2.0 - SQRT2, abs=1e-12)
        assert chained_bell(P, 2) == pytest.approx(
            i2_from_chsh(chsh_quantity(P)), abs=1e-12
        )


class TestI2FromChsh:
    def test_values(self):
        assert i2_from_chsh(4.0) == pytest.approx(0.0)
        assert i2_from_chsh(2.0) == pytest.approx(1.0)
        assert i2_from_chsh(2 * SQRT2) == pytest.approx(2.0 - SQRT2)

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            i2_from_chsh(4.5)


class TestVariationalDistance:
    def test_identical(self):
        assert variational_distance([0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_disjoint_point_masses(self):
        assert variational_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_half(self):
        assert variational_distance([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)

    def test_mismatched_support(self):
        with pytest.raises(Mismatch):
            variational_distance([1.0], [0.5, 0.5])
