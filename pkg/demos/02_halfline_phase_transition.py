"""
The half-line with a weighted loop at the origin
================================================

Sites 0, 1, 2, ... with nearest-neighbour edges and a loop of weight gamma at
0.  Below gamma = 1 the spectral radius stays at 2 and the walk is pushed away
from the wall; above it the loop wins, rho = gamma + 1/gamma and the walk
settles in a geometric law near the origin.
"""

from fractions import Fraction

from merwlab import halfline as hl

for g in ("0", "1/2", "1", "3/2", "2", "5"):
    m = hl.build_model(g)
    row = hl.kernel_row(m, 3)
    print(f"gamma={g:>4}  {m.regime.value:>13}  rho={str(m.rho):>5}  "
          f"psi_3={hl.eigenfunction(m, 3)}  row at 3: {[(t, str(p)) for t, p in row]}")

# with gamma = 0 the returns to the origin are counted by Catalan numbers
tab = hl.return_coefficients(0, 20)
print("a_2n for gamma=0:", [int(a) for a in tab.coefficients[0:21:2]])
print("Catalan         :", [hl.catalan(n) for n in range(11)])

# the radius of convergence of the return generating function is 1/rho
for g in ("1/2", "2"):
    est = hl.return_coefficients(g, 10**4).radius_estimate
    print(f"gamma={g}: radius estimate {est:.6f}, 1/rho = {float(1 / hl.build_model(g).rho):.6f}")

# G(1/2) = 2/(1 - gamma) below the transition; partial sums converge slowly
# (like N^-1/2), so extrapolate in half-integer powers
s = hl.return_coefficients("1/2", 10**4).partial_sums(0.5)
print(f"G(1/2) partial sum {s[-1]:.6f}, extrapolated {hl.richardson_limit(s, 10**4):.9f}, exact 4")

# square drift of the subcritical walk tends to 3: the squared Bessel-3 generator
m = hl.build_model(0)
print("(P - I)x^2 at n = 1, 10, 100:", [str(hl.square_drift(m, n)) for n in (1, 10, 100)])
print("exact rational:", hl.square_drift(m, 10) == Fraction(3) - Fraction(2, 11))
