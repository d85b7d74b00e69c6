"""
Entropy-rate minimizers and two particles with exclusion
========================================================

For a tilted reflected diffusion with profile phi the relative entropy rate
is int (phi')^2.  With Dirichlet walls the minimizer is a sine.  Under a mean
constraint, with the origin left free, the minimizer is an Airy ground state.
Pinning phi(0) = sqrt(2 lam) gives back the exponential profile.

The second part is the pair MERW: two particles on Z that may not overlap.
Their gap is itself a MERW, with a 1/g repulsion.
"""

import math

import numpy as np

from merwlab import exclusion as ex
from merwlab import variational as vr

for mesh in (257, 513, 1025):
    r = vr.minimize_dirichlet(1.0, mesh)
    print(f"Dirichlet mesh {mesh:>4}: h = {r.h:.8f}, error {r.h - math.pi**2:+.2e}")

for lam in (1.0, 2.0):
    free = vr.minimize_mean_constrained(lam, 12 / lam, 4096)
    pinned = vr.minimize_mean_constrained(lam, 12 / lam, 4096, origin_value=math.sqrt(2 * lam))
    expo = lambda x, lam=lam: math.sqrt(2 * lam) * np.exp(-lam * x)  # noqa: E731
    print(f"lam={lam}: free h = {free.h:.5f} (beta {free.beta:.3f}, L2 to exp "
          f"{vr.relative_l2(free.profile, expo):.3f}); pinned h = {pinned.h:.5f} "
          f"(L2 {vr.relative_l2(pinned.profile, expo):.1e}); lam^2 = {lam**2}")

est = vr.pathwise_kl_estimate(1.0, 1.0, 1e-3, 2000, seed=1)
print(f"pathwise KL rate for the exponential profile: {est.rate:.6f}")

print("pair kernel at gap 1, 2, 10:")
for g in (1, 2, 10):
    print("  ", g, {mv: str(p) for mv, p in ex.pair_kernel(g).items()})
print("A Psi - 4 Psi vanishes up to g = 1e6:", not ex.eigen_residual(10**6).any())
print("6-step gap law equals the gamma = 0 half-line MERW:", ex.gap_law_enumeration(2, 6).equal)

ens = ex.simulate_pair(ex.PairState(0, 5), 2000, 5000, seed=3)
fit = ex.drift_regression(ens, 5, 50)
print(f"E[dg | g] regressed on 1/g for g in [5, 50]: slope {fit.slope:.4f} from {fit.visits} visits")
