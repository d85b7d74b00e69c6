from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from merwlab import halfline as hl
from merwlab.errors import DomainError
from merwlab.graph import halfline_graph, merw_kernel, power_iterate

RATIONALS = ["0", "1/4", "1/2", "3/4", "1", "3/2", "2", "5"]


class TestModel:
    def test_phase_transition(self):
        assert hl.build_model("1/2").rho == 2
        assert hl.build_model(2).rho == Fraction(5, 2)
        m = hl.build_model(1)
        assert m.rho == 2 and m.gamma + 1 / m.gamma == 2
        assert m.regime is hl.Regime.CRITICAL
        assert hl.build_model(0).regime is hl.Regime.SUBCRITICAL
        assert hl.build_model(5).regime is hl.Regime.SUPERCRITICAL

    def test_negative_gamma(self):
        with pytest.raises(DomainError):
            hl.build_model(-0.1)

    def test_scaling_form(self):
        m = hl.build_model(lambda_scaling=1, n_scale=10**4)
        assert m.gamma == Fraction(101, 100)
        assert m.lambda_scaling == 1 and m.n_scale == 10**4
        assert hl.build_model(lambda_scaling=1.0, n_scale=3).gamma == pytest.approx(1 + 1 / math.sqrt(3))

    def test_float_gamma_kept_float(self):
        m = hl.build_model(0.3)
        assert isinstance(m.gamma, float) and m.rho == 2


class TestClosedForms:
    def test_eigenfunction_examples(self):
        assert hl.eigenfunction(hl.build_model(0), 3) == 4
        assert hl.eigenfunction(hl.build_model(2), 2) == Fraction(1, 4)
        for g in RATIONALS:
            assert hl.eigenfunction(hl.build_model(g), 0) == 1

    def test_kernel_examples(self):
        row = dict(hl.kernel_row(hl.build_model("1/2"), 2))
        assert row == {3: Fraction(5, 8), 1: Fraction(3, 8)}
        row = dict(hl.kernel_row(hl.build_model(2), 5))
        assert row == {6: Fraction(1, 5), 4: Fraction(4, 5)}
        for n in (1, 7, 100):
            assert dict(hl.kernel_row(hl.build_model(1), n)) == {n + 1: Fraction(1, 2), n - 1: Fraction(1, 2)}

    def test_origin_row_is_self_loop(self):
        assert hl.kernel_row(hl.build_model("1/2"), 0) == [(0, Fraction(1, 4)), (1, Fraction(3, 4))]
        assert hl.kernel_row(hl.build_model(2), 0) == [(0, Fraction(4, 5)), (1, Fraction(1, 5))]
        assert hl.kernel_row(hl.build_model(0), 0) == [(0, 0), (1, 1)]

    def test_invariant_examples(self):
        assert hl.invariant_measure(hl.build_model(2), 0) == Fraction(3, 4)
        assert hl.invariant_measure(hl.build_model(1), 9) == 1
        assert hl.invariant_measure(hl.build_model(0), 3) == 16
        assert hl.build_model(2).invariant_is_probability
        assert not hl.build_model("1/2").invariant_is_probability

    @pytest.mark.parametrize("g", RATIONALS)
    def test_eigen_identity_exact(self, g):
        m = hl.build_model(g)
        for n in range(0, 60):
            psi = lambda k: hl.eigenfunction(m, k)  # noqa: E731
            a_psi = (m.gamma * psi(0) if n == 0 else psi(n - 1)) + psi(n + 1)
            assert a_psi == m.rho * psi(n)
            for t, p in hl.kernel_row(m, n):
                w = m.gamma if t == n == 0 else 1
                assert p == w * psi(t) / (m.rho * psi(n))

    @pytest.mark.parametrize("g", RATIONALS)
    def test_invariance_exact(self, g):
        m = hl.build_model(g)
        pi = [hl.invariant_measure(m, n) for n in range(103)]
        for n in range(101):
            inflow = sum(pi[k] * hl.transition_probability(m, k, n) for k in (n - 1, n, n + 1) if k >= 0)
            assert inflow == pi[n]

    def test_geometric_sums_to_one(self):
        m = hl.build_model(2)
        total = sum(hl.invariant_measure(m, n) for n in range(200))
        assert 1 - total < Fraction(1, 10**100)

    def test_against_truncated_graph(self):
        g = halfline_graph(2.0, 80)
        k = merw_kernel(g, power_iterate(g))
        m = hl.build_model(2)
        for n in (0, 1, 10):
            assert k.matrix[n, n + 1] == pytest.approx(float(1 - hl.lower_probability(m, n)), abs=1e-9)

    def test_drift_formulas(self):
        m = hl.build_model("1/2")
        for n in range(1, 20):
            c = Fraction(1, 2)
            assert hl.square_drift(m, n) == 2 * c * n / (1 + c * n) + 1
            assert 0 <= hl.square_drift(m, n) <= 3
        assert hl.drift(hl.build_model(1), 5) == 0

    @settings(max_examples=50, deadline=None)
    @given(st.fractions(min_value=0, max_value=6, max_denominator=50), st.integers(0, 500))
    def test_rows_are_stochastic(self, g, n):
        row = hl.kernel_row(hl.build_model(g), n)
        assert sum(p for _, p in row) == 1
        assert all(0 <= p <= 1 for _, p in row)

    def test_vectorized_matches_exact(self):
        for g in RATIONALS:
            n = np.arange(50)
            exact = [float(hl.lower_probability(hl.build_model(g), k)) for k in n]
            np.testing.assert_allclose(hl.lower_probability_array(float(Fraction(g)), n), exact, rtol=1e-15)


class TestCatalan:
    def test_small(self):
        assert [hl.catalan(n) for n in range(6)] == [1, 1, 2, 5, 14, 42]

    def test_ratio(self):
        r = Fraction(hl.catalan(20), hl.catalan(19))
        assert r == Fraction(2 * 39, 21)
        assert abs(float(r) - 4) < 0.3
        assert hl.catalan(200) / hl.catalan_asymptotic(200) == pytest.approx(1, abs=0.01)

    def test_cap(self):
        with pytest.raises(DomainError):
            hl.catalan(10**4 + 1)


class TestReturnCoefficients:
    def test_gamma_zero_is_catalan(self):
        t = hl.return_coefficients(0, 400)
        assert t.exact
        assert all(t.coefficients[2 * n] == hl.catalan(n) for n in range(201))
        assert all(t.coefficients[2 * n + 1] == 0 for n in range(200))

    @pytest.mark.parametrize("g", ["0", "1/2", "1", "3/2"])
    def test_matrix_power_crosscheck(self, g):
        t = hl.return_coefficients(g, 64)
        assert t.coefficients == hl.matrix_power_returns(g, 64)

    def test_float_mode_matches_exact(self):
        e = hl.return_coefficients("1/2", 300)
        f = hl.return_coefficients(0.5, 300, exact=False)
        np.testing.assert_allclose(f.log_coefficients()[1:], e.log_coefficients()[1:], rtol=1e-12)

    def test_radius_supercritical(self):
        t = hl.return_coefficients(2, 10**4)
        assert t.radius_estimate == pytest.approx(1 / 2.5, rel=0.05)

    def test_g_half_subcritical(self):
        for g in ("0", "1/2"):
            t = hl.return_coefficients(g, 2000)
            s = t.partial_sums(0.5)
            target = hl.g_half_limit(g)
            assert np.all(np.diff(s) >= 0) and s[-1] < target
            assert hl.richardson_limit(s, 2000) == pytest.approx(target, abs=1e-6)

    def test_g_half_critical_diverges(self):
        t = hl.return_coefficients(1, 4000)
        s = t.partial_sums(0.5)
        assert s[4000] > 50
        assert s[4000] > 1.9 * s[1000]

    def test_csv_exact_decimals(self, tmp_path):
        t = hl.return_coefficients("1/2", 6)
        t.to_csv(tmp_path / "a.csv")
        rows = (tmp_path / "a.csv").read_text().splitlines()
        assert rows[0] == "n,a_n"
        assert rows[2] == "1,0.5"
        assert rows[3] == f"2,{hl._exact_decimal(t.coefficients[2])}"
        assert Fraction(rows[3].split(",")[1]) == t.coefficients[2] == Fraction(5, 4)

    def test_cap_enforced(self):
        with pytest.raises(DomainError):
            hl.return_coefficients(0, 10**4 + 1)


class TestConditionedWalk:
    def test_small_cases(self):
        assert hl.conditioned_srw_hitting(0, 1) == Fraction(1, 2)
        assert hl.conditioned_srw_hitting(0, 3) == Fraction(1, 8)
        assert hl.conditioned_srw_hitting(0, 2) == 0

    def test_enumeration_oracle(self):
        import itertools

        for x in range(3):
            for n in range(1, 11):
                hits = 0
                for steps in itertools.product((-1, 1), repeat=n):
                    pos = x
                    first = None
                    for i, s in enumerate(steps, 1):
                        pos += s
                        if pos == -1:
                            first = i
                            break
                    hits += first == n
                assert hl.conditioned_srw_hitting(x, n) == Fraction(hits, 2**n)

    def test_tail_forms_agree(self):
        for x in (0, 1, 3):
            for n in (10, 101, 500):
                assert hl.hitting_tail(x, n) == hl.hitting_tail_reflection(x, n)
        assert hl.hitting_tail(1, 20000) == pytest.approx(hl.hitting_tail_reflection(1, 20000), rel=1e-9)

    def test_log_space_matches_exact(self):
        exact = hl.conditioned_srw_hitting(2, 999)
        logspace = (3 / 1001) * hl.srw_point_probability(1001, 3)
        assert float(exact) == pytest.approx(hl.conditioned_srw_hitting(2, 999))
        assert hl.conditioned_srw_hitting(2, 1001) == pytest.approx(logspace, rel=1e-12)

    def test_tail_asymptotic(self):
        n = 10**6
        ratio = hl.hitting_tail_reflection(1, n) / hl.hitting_tail_asymptotic(1, n)
        assert ratio == pytest.approx(1, abs=1e-5)
        # the reference rate 2(x+1)/sqrt(pi n) is larger by sqrt(2)
        ratio = hl.hitting_tail_reflection(1, n) / hl.hitting_tail_reference_rate(1, n)
        assert ratio == pytest.approx(1 / math.sqrt(2), abs=1e-5)

    @pytest.mark.parametrize("x", [0, 1, 3])
    def test_total_mass_with_tail(self, x):
        assert hl.hitting_sum_with_tail(x, 10**4) == pytest.approx(1, abs=1e-9)

    def test_kernel_limit(self):
        assert hl.conditioned_kernel_limit(1, 2) == Fraction(3, 4)
        assert hl.conditioned_kernel_limit(0, 1) == 1
        assert hl.conditioned_kernel_limit(3, 2) == Fraction(3, 8)
        with pytest.raises(DomainError):
            hl.conditioned_kernel_limit(1, 3)
        m = hl.build_model(0)
        for x in range(50):
            for y in (x - 1, x + 1):
                if y >= 0:
                    assert hl.conditioned_kernel_limit(x, y) == hl.transition_probability(m, x, y)

    def test_prefix_law_limit_equals_merw(self):
        for x in (0, 1, 4):
            assert hl.conditioned_prefix_law(x, 4) == hl.merw_path_law(hl.build_model(0), x, 4)

    def test_finite_horizon_prefix_law(self):
        law = hl.conditioned_prefix_law(1, 3, horizon=200)
        assert sum(law.values()) == 1
        limit = hl.conditioned_prefix_law(1, 3)
        tv = sum(abs(law[k] - limit[k]) for k in limit) / 2
        assert 0 < tv < 0.02


class TestGenerators:
    def test_constant_is_annihilated(self):
        m = hl.build_model(lambda_scaling=1, n_scale=10**4)
        x = hl.linear_grid(10**4, np.arange(0, 300))
        np.testing.assert_allclose(hl.discrete_generator(m, lambda y: np.ones_like(y), 10**4, x), 0, atol=1e-9)

    def test_off_grid_refused(self):
        with pytest.raises(DomainError):
            hl.discrete_generator(hl.build_model(0), np.sin, 100, [0.015])

    SQUARED_SUPPORTS = [(1.0, 400.0), (5.0, 1000.0), (20.0, 3000.0)]
    LINEAR_SUPPORTS = [(0.5, 20.0), (1.0, 30.0), (0.2, 40.0)]

    @staticmethod
    def errors(model_for, grid, support):
        f, df, d2f = hl.bump(*support)
        errs = []
        for n in (10**2, 10**4, 10**6):
            m = model_for(n)
            x = grid(n, support[1])
            errs.append(np.max(np.abs(hl.discrete_generator(m, f, n, x) - hl.limit_generator(m, f, df, d2f, x))))
        return errs

    @pytest.mark.parametrize("gamma", [0, "1/2"])
    @pytest.mark.parametrize("support", SQUARED_SUPPORTS)
    def test_squared_rate(self, gamma, support):
        grid = lambda n, hi: hl.squared_grid(n, np.arange(0, int(math.sqrt((hi + 1) * n))))  # noqa: E731
        e = self.errors(lambda n: hl.build_model(gamma), grid, support)
        assert 8 <= e[0] / e[1] <= 12
        assert 8 <= e[1] / e[2] <= 12

    @pytest.mark.parametrize("support", LINEAR_SUPPORTS)
    def test_supercritical_rate(self, support):
        grid = lambda n, hi: hl.linear_grid(n, np.arange(0, int((hi + 1) * math.sqrt(n))))  # noqa: E731
        e = self.errors(lambda n: hl.build_model(lambda_scaling=1, n_scale=n), grid, support)
        assert 8 <= e[0] / e[1] <= 12
        assert 8 <= e[1] / e[2] <= 12

    def test_square_drift_via_generator(self):
        m = hl.build_model("1/2")
        n = 1
        x = hl.squared_grid(n, np.arange(1, 30))
        out = hl.discrete_generator(m, lambda y: y, n, x)
        k = np.arange(1, 30)
        np.testing.assert_allclose(out, 2 * 0.5 * k / (1 + 0.5 * k) + 1, rtol=1e-12)
