from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from merwlab.errors import ConvergenceError, MissingInvariantMeasure, ResidualTooLarge, StructuralError
from merwlab.graph import (
    Eigenpair,
    MarkovKernel,
    WeightedGraph,
    cycle_graph,
    dense_perron,
    entropy_rate,
    grw_kernel,
    halfline_graph,
    merw_kernel,
    nonuniqueness_demo,
    path_graph,
    path_probability,
    power_iterate,
    truncation_sensitivity,
    verify_ground_state,
    weighted_entropy_rate,
    z_with_loops,
)


def random_connected(n: int, rng: np.random.Generator, p: float = 0.4) -> WeightedGraph:
    """Unit-weight undirected graph: a random spanning tree plus extra edges."""
    A = np.zeros((n, n))
    order = rng.permutation(n)
    for i in range(1, n):
        j = order[rng.integers(0, i)]
        A[order[i], j] = A[j, order[i]] = 1
    extra = np.triu(rng.random((n, n)) < p, 1)
    A = np.maximum(A, extra + extra.T)
    return WeightedGraph.from_adjacency(A, directed=False)


class TestPowerIterate:
    def test_three_path(self):
        eig = power_iterate(path_graph(3))
        assert eig.rho == pytest.approx(math.sqrt(2), abs=1e-12)
        expected = np.array([1, math.sqrt(2), 1]) / 2
        np.testing.assert_allclose(eig.psi, expected, atol=1e-11)
        assert np.linalg.norm(eig.psi) == pytest.approx(1.0)
        assert eig.residual <= 1e-12

    def test_single_loop(self):
        g = WeightedGraph(1, ((0, 0, 0.7),))
        eig = power_iterate(g)
        assert eig.rho == pytest.approx(0.7)
        np.testing.assert_allclose(eig.psi, [1.0])

    def test_z_with_loops_approaches_three(self):
        rhos = [power_iterate(z_with_loops(N)).rho for N in (10, 40, 160)]
        assert all(r < 3 for r in rhos)
        assert rhos[0] < rhos[1] < rhos[2]
        assert 3 - rhos[2] < 1e-3

    def test_against_dense_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            g = random_connected(int(rng.integers(2, 11)), rng)
            eig = power_iterate(g)
            rho, psi = dense_perron(g)
            assert eig.rho == pytest.approx(rho, rel=1e-11)
            np.testing.assert_allclose(eig.psi, psi, atol=1e-9)

    def test_reducible_graph_refused(self):
        g = WeightedGraph(3, ((0, 1, 1.0),))
        with pytest.raises(StructuralError):
            power_iterate(g)

    def test_directed_reducible_refused(self):
        g = WeightedGraph(2, ((0, 1, 1.0),), directed=True)
        with pytest.raises(StructuralError):
            power_iterate(g)

    def test_no_edges_refused(self):
        with pytest.raises(StructuralError):
            power_iterate(WeightedGraph(2, ()))

    def test_non_convergence_carries_residual(self):
        with pytest.raises(ConvergenceError) as info:
            power_iterate(path_graph(50), max_iter=16)
        assert info.value.residual > 1e-12
        assert info.value.iterations == 16

    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        g = random_connected(7, rng)
        base = power_iterate(g)
        big = power_iterate(g.scaled(3.5))
        assert big.rho == pytest.approx(3.5 * base.rho, rel=1e-11)
        P1 = merw_kernel(g, base).matrix
        P2 = merw_kernel(g.scaled(3.5), big).matrix
        np.testing.assert_allclose(P1, P2, atol=1e-10)

    def test_truncation_sensitivity_report(self):
        rep = truncation_sensitivity(z_with_loops, 20)
        assert rep["rho_2N"] > rep["rho_N"]
        assert 0 < rep["change"] < 0.05


class TestKernels:
    def test_merw_three_path(self):
        g = path_graph(3)
        k = merw_kernel(g, power_iterate(g))
        assert k.matrix[0, 1] == pytest.approx(1.0, abs=1e-12)
        assert k.matrix[1, 0] == pytest.approx(0.5, abs=1e-12)
        assert k.matrix[1, 2] == pytest.approx(0.5, abs=1e-12)
        np.testing.assert_allclose(k.invariant_measure, [0.25, 0.5, 0.25], atol=1e-12)
        assert k.invariance_residual() < 1e-12

    def test_regular_graph_merw_equals_grw(self):
        g = cycle_graph(4)
        m = merw_kernel(g, power_iterate(g)).matrix
        np.testing.assert_allclose(m, grw_kernel(g).matrix, atol=1e-12)
        np.testing.assert_allclose(m[m > 0], 0.5, atol=1e-12)

    def test_halfline_truncation_interior_row(self):
        g = halfline_graph(0, 400)
        k = merw_kernel(g, power_iterate(g, tol=1e-12))
        # interior sites far from the wall match (1/2)(2+n)/(1+n) loosely;
        # the finite wall lowers rho below 2, so the agreement is approximate
        for n in (1, 2, 5):
            assert k.matrix[n, n + 1] == pytest.approx(0.5 * (2 + n) / (1 + n), rel=1e-3)

    def test_residual_too_large_refused(self):
        g = path_graph(3)
        bad = Eigenpair.from_vector(g, 1.5, [1, 1, 1])
        with pytest.raises(ResidualTooLarge):
            merw_kernel(g, bad)

    def test_row_sum_deviation_reported_not_hidden(self):
        g = path_graph(3)
        eig = power_iterate(g)
        sloppy = Eigenpair(eig.rho * (1 + 1e-6), eig.psi, 0.0)
        k = merw_kernel(g, sloppy)
        assert k.row_sum_deviation == pytest.approx(1e-6, rel=1e-3)

    def test_grw_examples(self):
        np.testing.assert_allclose(grw_kernel(path_graph(3)).matrix[1], [0.5, 0, 0.5])
        np.testing.assert_allclose(grw_kernel(path_graph(3)).matrix[0], [0, 1, 0])
        c3 = grw_kernel(cycle_graph(3)).matrix
        np.testing.assert_allclose(c3[c3 > 0], 0.5)
        star = WeightedGraph(3, ((0, 1, 2.0), (0, 2, 1.0)))
        np.testing.assert_allclose(grw_kernel(star).matrix[0], [0, 2 / 3, 1 / 3])

    def test_grw_zero_out_weight(self):
        g = WeightedGraph(2, ((0, 1, 1.0),), directed=True)
        with pytest.raises(StructuralError):
            grw_kernel(g)

    def test_kernel_validation(self):
        with pytest.raises(StructuralError):
            MarkovKernel(np.array([[1.5, -0.5], [0, 1]]))


class TestEntropy:
    def test_merw_three_path(self):
        g = path_graph(3)
        eig = power_iterate(g)
        assert entropy_rate(merw_kernel(g, eig)) == pytest.approx(math.log(math.sqrt(2)), abs=1e-12)

    def test_grw_regular(self):
        for k in (2, 3, 4):
            # complete graph K_{k+1} is k-regular
            A = np.ones((k + 1, k + 1)) - np.eye(k + 1)
            g = WeightedGraph.from_adjacency(A)
            assert entropy_rate(grw_kernel(g)) == pytest.approx(math.log(k), abs=1e-12)

    def test_deterministic_cycle(self):
        P = np.roll(np.eye(4), 1, axis=1)
        k = MarkovKernel(P, np.full(4, 0.25))
        assert entropy_rate(k) == 0.0

    def test_missing_measure(self):
        with pytest.raises(MissingInvariantMeasure, match="with_invariant_measure"):
            entropy_rate(MarkovKernel(np.eye(2)))

    def test_weighted_graph_relative_rate(self):
        g = halfline_graph(2.0, 60)
        eig = power_iterate(g)
        k = merw_kernel(g, eig)
        assert weighted_entropy_rate(k, g) == pytest.approx(math.log(eig.rho), abs=1e-9)
        assert entropy_rate(k) < math.log(eig.rho) - 0.1

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 10), st.integers(0, 2**32 - 1))
    def test_merw_rate_is_log_rho(self, n, seed):
        g = random_connected(n, np.random.default_rng(seed))
        eig = power_iterate(g)
        k = merw_kernel(g, eig)
        assert entropy_rate(k) == pytest.approx(math.log(eig.rho), abs=1e-9)
        assert k.invariance_residual() < 1e-10
        assert k.row_sum_deviation < 1e-12


class TestPaths:
    def test_three_path_example(self):
        g = path_graph(3)
        eig = power_iterate(g)
        k = merw_kernel(g, eig)
        r = path_probability(k, eig, [1, 0, 1])
        assert r.probability == pytest.approx(0.5, abs=1e-12)
        assert r.uniform_value == pytest.approx(0.5, abs=1e-12)

    def test_length_zero(self):
        g = path_graph(3)
        eig = power_iterate(g)
        assert path_probability(merw_kernel(g, eig), eig, [2]).probability == 1.0

    def test_non_adjacent_flagged(self):
        g = path_graph(3)
        eig = power_iterate(g)
        r = path_probability(merw_kernel(g, eig), eig, [0, 2])
        assert r.probability == 0.0 and not r.adjacent

    @pytest.mark.parametrize("seed", range(3))
    def test_all_paths_equal(self, seed):
        rng = np.random.default_rng(seed)
        g = random_connected(5, rng)
        eig = power_iterate(g)
        k = merw_kernel(g, eig)
        A = g.dense()
        n = 6
        for steps in itertools.product(range(5), repeat=n):
            path = (0,) + steps
            if all(A[a, b] > 0 for a, b in zip(path, path[1:])):
                r = path_probability(k, eig, path)
                assert r.probability == pytest.approx(r.uniform_value, abs=1e-10)


class TestGroundState:
    def test_three_path(self):
        g = path_graph(3)
        assert verify_ground_state(g, power_iterate(g)).max_residual < 1e-10

    def test_perturbation_shows(self):
        g = path_graph(3)
        eig = power_iterate(g)
        bumped = Eigenpair(eig.rho, eig.psi + np.array([1e-4, 0, 0]), 0.0)
        r = verify_ground_state(g, bumped).max_residual
        assert 1e-5 < r < 1e-3

    def test_z_loops_psi_plus(self):
        N = 15
        g = z_with_loops(N)
        psi = np.array([1.0 + max(x, 0) for x in range(-N, N + 1)])
        rep = verify_ground_state(g, Eigenpair(3.0, psi, 0.0))
        interior = [rep.at(x) for x in range(-N + 1, N)]
        assert max(abs(v) for v in interior) == 0
        assert rep.at(N) != 0


class TestNonuniqueness:
    def test_residuals_and_kernels(self):
        rep = nonuniqueness_demo(N=12)
        assert all(v == 0 for v in rep.interior_residuals.values())
        assert rep.psi_plus[1] == 2
        assert rep.psi_plus[0] + rep.psi_plus[2] + rep.psi_plus[1] == 3 * rep.psi_plus[1]
        for kernel in (rep.kernel_plus, rep.kernel_minus, rep.kernel_mix):
            for row in kernel.values():
                assert sum(p for _, p in row) == 1
        assert rep.kernel_plus != rep.kernel_minus

    def test_extreme_mixtures(self):
        one = nonuniqueness_demo(N=6, mix=1)
        zero = nonuniqueness_demo(N=6, mix=0)
        assert one.kernel_mix == one.kernel_plus
        assert zero.kernel_mix == zero.kernel_minus
        assert one.kernel_plus[3] == [(2, Fraction(3, 12)), (3, Fraction(4, 12)), (4, Fraction(5, 12))]
