"""
Maximal entropy random walk on a small graph
============================================

The MERW kernel reweights each edge by the Perron eigenvector, so every path
of a given length between two fixed vertices gets the same probability.  The
generic random walk (GRW) picks a neighbour uniformly and has a lower entropy
rate.
"""

import itertools

import numpy as np

from merwlab import graph as gr

# a path with a triangle hanging off its end
g = gr.WeightedGraph(5, ((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (2, 4, 1.0)))
eig = gr.power_iterate(g)
print(f"rho = {eig.rho:.12f}  (residual {eig.residual:.1e}, {eig.iterations} iterations)")
print("psi =", np.round(eig.psi, 6))

# both kernels; MERW gets its invariant measure psi**2 for free
merw = gr.merw_kernel(g, eig)
grw = gr.grw_kernel(g).with_invariant_measure()
print("MERW stationary law:", np.round(merw.invariant_measure, 4))
print("GRW  stationary law:", np.round(grw.invariant_measure, 4))

# entropy rates: MERW attains ln(rho)
print(f"h(MERW) = {gr.entropy_rate(merw):.12f}, ln rho = {np.log(eig.rho):.12f}")
print(f"h(GRW)  = {gr.entropy_rate(grw):.12f}")

# every length-3 walk from 2 to 4 has the same probability under MERW
A = g.dense()
for mid in itertools.product(range(5), repeat=2):
    path = [2, *mid, 4]
    if all(A[a, b] > 0 for a, b in zip(path, path[1:])):
        r = gr.path_probability(merw, eig, path)
        print(path, f"P = {r.probability:.12f}", f"psi(y)/(rho^n psi(x)) = {r.uniform_value:.12f}")

# the combinatorial spectral radius of Z with a self-loop at every site is 3,
# but truncations approach it from below
for N in (10, 40, 160):
    print(f"Z with loops, N={N}: rho = {gr.power_iterate(gr.z_with_loops(N)).rho:.6f}")
