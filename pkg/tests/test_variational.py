from __future__ import annotations

import json
import math

import numpy as np
import pytest

from merwlab import variational as vr
from merwlab.errors import DomainError


class TestDirichlet:
    def test_converges_to_pi_over_L_squared(self):
        errs = [vr.minimize_dirichlet(1.0, m).h - math.pi**2 for m in (257, 513, 1025)]
        assert abs(errs[-1]) < 1e-4
        assert 3.5 <= errs[0] / errs[1] <= 4.5
        assert 3.5 <= errs[1] / errs[2] <= 4.5

    def test_profile_is_sine(self):
        r = vr.minimize_dirichlet(2.0, 513)
        exact = lambda x: math.sqrt(2 / 2.0) * np.sin(np.pi * x / 2.0)  # noqa: E731
        assert vr.relative_l2(r.profile, exact) < 1e-5
        assert r.normalization_residual < 1e-12

    def test_scaling_in_L(self):
        a = vr.minimize_dirichlet(1.0, 300).h
        b = vr.minimize_dirichlet(3.0, 300).h
        assert b == pytest.approx(a / 9, rel=1e-12)

    def test_small_mesh_refused(self):
        with pytest.raises(DomainError):
            vr.minimize_dirichlet(1.0, 10)

    def test_sine_is_optimal_against_perturbations(self):
        base = vr.minimize_dirichlet(1.0, 257)
        x = base.profile.grid
        rng = np.random.default_rng(0)
        for _ in range(20):
            bump = rng.normal(size=5) @ np.sin(np.outer(np.arange(2, 7), np.pi * x))
            trial = np.abs(base.profile.values + 0.05 * bump)
            trial[-1] = 0.0
            prof = vr.DensityProfile.normalized(x, trial, dirichlet=True)
            assert vr._energy(prof.values, prof.dx) >= base.h


class TestMeanConstrained:
    @pytest.mark.parametrize("lam", [1.0, 2.0])
    def test_constraints_hold(self, lam):
        r = vr.minimize_mean_constrained(lam, 12 / lam, 1024)
        assert r.normalization_residual < 1e-10
        assert r.mean_residual < 1e-10

    def test_free_origin_minimizer_frozen(self):
        # ground state of a linear potential: h / lam^2 and beta / lam^3 are constant
        for lam in (1.0, 2.0):
            r = vr.minimize_mean_constrained(lam, 12 / lam, 2048)
            assert r.h / lam**2 == pytest.approx(0.62662, abs=2e-4)
            assert r.beta / lam**3 == pytest.approx(2.5066, abs=2e-3)
            assert r.h < lam**2

    def test_exponential_is_feasible_but_not_optimal(self):
        lam = 1.0
        r = vr.minimize_mean_constrained(lam, 12.0, 2048)
        expo = vr.exponential_profile(lam, 12.0, 2048)
        assert expo.mean() == pytest.approx(1 / (2 * lam), abs=1e-4)
        assert vr.kl_rate(expo) == pytest.approx(lam**2, abs=1e-2)
        assert r.h < vr.kl_rate(expo)

    @pytest.mark.parametrize("lam", [1.0, 2.0])
    def test_pinned_origin_recovers_exponential(self, lam):
        r = vr.minimize_mean_constrained(lam, 12 / lam, 4096, origin_value=math.sqrt(2 * lam))
        assert r.h == pytest.approx(lam**2, rel=1e-3)
        exact = lambda x: math.sqrt(2 * lam) * np.exp(-lam * x)  # noqa: E731
        assert vr.relative_l2(r.profile, exact) < 1e-2
        assert r.drift_error(upto=3 / lam) < 1e-2 * lam

    def test_first_order_feasible_perturbations(self):
        # directions orthogonal to phi and x phi keep both constraints to first order
        r = vr.minimize_mean_constrained(1.0, 12.0, 1024)
        x, phi = r.profile.grid, r.profile.values
        w = vr._trap_weights(x.size, r.profile.dx)
        basis = np.array([phi, x * phi])
        rng = np.random.default_rng(1)
        for _ in range(10):
            d = rng.normal(size=6) @ np.sin(np.outer(np.arange(1, 7), np.pi * x / 12.0))
            coef = np.linalg.solve((basis * w) @ basis.T, (basis * w) @ d)
            d = d - coef @ basis
            slopes = []
            for eps in (1e-2, 1e-3):
                trial = phi + eps * d
                mass = w @ trial**2
                energy = vr._energy(trial, r.profile.dx)
                # the Lagrangian quotient is minimized by the ground state
                assert (energy + r.beta * (w @ (x * trial**2))) / mass >= r.mu - 1e-9
                slopes.append(abs(energy / mass - r.h) / eps)
            # no first-order change in the energy
            assert slopes[1] < 0.2 * slopes[0] + 1e-6

    def test_domain(self):
        with pytest.raises(DomainError):
            vr.minimize_mean_constrained(1.0, 5.0, 1024)
        with pytest.raises(DomainError):
            vr.minimize_mean_constrained(1.0, 12.0, 100)
        with pytest.raises(DomainError):
            vr.minimize_mean_constrained(0.0, 12.0, 1024)

    def test_json(self):
        r = vr.minimize_mean_constrained(1.0, 12.0, 1024)
        obj = json.loads(r.to_json())
        assert obj["lam"] == 1.0 and "profile" not in obj


class TestProfiles:
    def test_kl_rate_examples(self):
        assert vr.kl_rate(vr.sine_profile(1.0, 4001)) == pytest.approx(math.pi**2, rel=1e-3)
        assert vr.kl_rate(vr.exponential_profile(2.0, 6.0, 8001)) == pytest.approx(4.0, rel=1e-3)

    def test_normalization_enforced(self):
        x = np.linspace(0, 1, 11)
        with pytest.raises(DomainError):
            vr.DensityProfile(x, np.ones(11) * 2)
        with pytest.raises(DomainError):
            vr.DensityProfile.normalized(x, np.ones(11), dirichlet=True)

    def test_csv(self, tmp_path):
        p = vr.sine_profile(1.0, 101)
        p.to_csv(tmp_path / "p.csv")
        back = np.loadtxt(tmp_path / "p.csv", delimiter=",", skiprows=1)
        np.testing.assert_array_equal(back[:, 1], p.values)


class TestPathwise:
    def test_rate_is_lambda_squared(self):
        est = vr.pathwise_kl_estimate(1.5, 1.0, 1e-3, 2000, seed=3)
        assert est.rate == pytest.approx(2.25, abs=1e-9)
        assert est.stationarity_ks < 0.05

    def test_domain(self):
        with pytest.raises(DomainError):
            vr.pathwise_kl_estimate(0.0, 1.0, 1e-3, 10, seed=0)
        with pytest.raises(DomainError):
            vr.pathwise_kl_estimate(1.0, 1.0, 0.1, 10, seed=0)
