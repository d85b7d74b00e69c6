"""Two particles on Z with exclusion, driven by the MERW of the pair lattice.

The state is ``(x, y)`` with ``x < y`` and each step moves one particle by one
site.  The positive eigenfunction is ``Psi = g = y - x`` with ``rho = 4``
(``rho = 2`` for the totally asymmetric variant where both particles only move
right), so the gap minus one is exactly the half-line MERW with ``gamma = 0``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numba as nb
import numpy as np

from . import rng
from .defaults import step_budget
from .errors import BudgetExceeded, DomainError, ExclusionViolation
from .halfline import build_model, merw_path_law

MOVES = ("x-1", "x+1", "y-1", "y+1")
_DELTA = {"x-1": (-1, 0), "x+1": (1, 0), "y-1": (0, -1), "y+1": (0, 1)}


@dataclass(frozen=True)
class PairState:
    x: int
    y: int

    def __post_init__(self):
        if not self.x < self.y:
            raise ExclusionViolation(f"need x < y, got ({self.x}, {self.y})")

    @property
    def gap(self) -> int:
        return self.y - self.x

    def moved(self, move: str) -> "PairState":
        dx, dy = _DELTA[move]
        return PairState(self.x + dx, self.y + dy)


def eigenfunction(g: int) -> int:
    return g


def spectral_radius(asymmetric: bool = False) -> int:
    return 2 if asymmetric else 4


def pair_kernel(g: int, asymmetric: bool = False) -> dict[str, Fraction]:
    """Move probabilities ``A Psi(next) / (rho Psi(now))`` at gap g."""
    if g <= 0:
        raise ExclusionViolation(f"gap must be at least 1, got {g}")
    rho = spectral_radius(asymmetric)
    shrink = Fraction(g - 1, rho * g)
    grow = Fraction(g + 1, rho * g)
    if asymmetric:
        return {"x-1": Fraction(0), "x+1": shrink, "y-1": Fraction(0), "y+1": grow}
    return {"x-1": grow, "x+1": shrink, "y-1": shrink, "y+1": grow}


def eigen_residual(g_max: int, asymmetric: bool = False, psi=None) -> np.ndarray:
    """``(A Psi - rho Psi)(g)`` for ``g = 1..g_max`` in integer arithmetic.

    ``psi`` maps an integer array of gaps to integer values; the default is
    ``Psi(g) = g``.  Passing ``lambda g: 1 + g`` shows the boundary defect of
    the shifted reading.
    """
    if g_max < 1:
        raise DomainError("g_max must be at least 1")
    psi = psi or (lambda g: g)
    g = np.arange(1, g_max + 1, dtype=np.int64)
    up = psi(g + 1)
    down = np.where(g >= 2, psi(np.maximum(g - 1, 1)), 0)
    mult = 1 if asymmetric else 2
    return mult * (up + down) - spectral_radius(asymmetric) * psi(g)


@dataclass(frozen=True)
class GapLawComparison:
    start_gap: int
    k: int
    pair_law: dict
    merw_law: dict
    equal: bool


def gap_law_enumeration(start_gap: int, k: int) -> GapLawComparison:
    """Exact law of ``(g_1 - 1, ..., g_k - 1)`` by summing over all ``4**k``
    move sequences, compared with the gamma = 0 half-line MERW from
    ``start_gap - 1``."""
    if k > 8:
        raise DomainError("enumeration is limited to k <= 8")
    law: dict[tuple, Fraction] = {}
    for seq in itertools.product(MOVES, repeat=k):
        p = Fraction(1)
        s = PairState(0, start_gap)
        path = []
        for mv in seq:
            q = pair_kernel(s.gap)[mv]
            if q == 0:
                p = Fraction(0)
                break
            p *= q
            s = s.moved(mv)
            path.append(s.gap - 1)
        if p:
            key = tuple(path)
            law[key] = law.get(key, 0) + p
    merw = merw_path_law(build_model(0), start_gap - 1, k)
    return GapLawComparison(start_gap, k, law, merw, law == merw)


# --- simulation ---------------------------------------------------------------


@nb.njit(nogil=True, cache=True)
def _pair_kernel(x0, y0, steps, seed, ids, asym, gmax, keep, gaps_out, sums_out, gpath, spath, visits, dg_sum):
    """Moves are ordered (x+1, y-1, x-1, y+1) so that the gap shrinks iff
    u < (g-1)/(2g), the gamma = 0 lower probability at n = g-1."""
    bad = 0
    for i in range(ids.shape[0]):
        key = rng.replica_key(seed, ids[i])
        x = x0
        y = y0
        if keep:
            gpath[i, 0] = y - x
            spath[i, 0] = x + y
        for k in range(steps):
            g = y - x
            u = rng.uniform(key, k)
            if asym:
                if u < (g - 1) / (2.0 * g):
                    x += 1
                else:
                    y += 1
            else:
                a = (g - 1) / (4.0 * g)
                b = (g + 1) / (4.0 * g)
                if u < a:
                    x += 1
                elif u < 2 * a:
                    y -= 1
                elif u < 2 * a + b:
                    x -= 1
                else:
                    y += 1
            ng = y - x
            if ng < 1:
                bad += 1
            if g <= gmax:
                visits[g] += 1
                dg_sum[g] += ng - g
            if keep:
                gpath[i, k + 1] = ng
                spath[i, k + 1] = x + y
        gaps_out[i] = y - x
        sums_out[i] = x + y
    return bad


@dataclass(frozen=True)
class PairEnsemble:
    start: PairState
    steps: int
    replicas: int
    seed: int
    asymmetric: bool
    gaps: np.ndarray = field(repr=False)
    doubled_centers: np.ndarray = field(repr=False)
    gap_paths: np.ndarray | None = field(default=None, repr=False)
    doubled_center_paths: np.ndarray | None = field(default=None, repr=False)
    visits: np.ndarray = field(default=None, repr=False)
    gap_increments: np.ndarray = field(default=None, repr=False)

    @property
    def centers(self) -> np.ndarray:
        return self.doubled_centers / 2.0

    def scaled_gap(self) -> np.ndarray:
        return self.gaps / math.sqrt(self.steps)

    def drift(self, g_lo: int, g_hi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gaps with visits in ``[g_lo, g_hi]``, mean increments and visit counts."""
        g = np.arange(g_lo, g_hi + 1)
        v = self.visits[g]
        m = v > 0
        return g[m], self.gap_increments[g][m] / v[m], v[m]

    def to_csv(self, path) -> None:
        ids = np.arange(self.replicas)
        np.savetxt(path, np.column_stack([ids, self.gaps, self.centers]), delimiter=",",
                   header="replica,gap,center", comments="", fmt=["%d", "%d", "%.1f"])


def simulate_pair(
    start: PairState,
    steps: int,
    replicas: int,
    seed: int,
    asymmetric: bool = False,
    keep_paths: bool = False,
    stats_max_gap: int = 200,
    budget: int | None = None,
) -> PairEnsemble:
    """Simulate the pair MERW.  Replica r consumes the same keyed uniforms as
    replica r of :func:`merwlab.simulate.run`, so its gap minus one matches the
    gamma = 0 half-line path from ``start.gap - 1`` step for step."""
    if steps < 0 or replicas <= 0:
        raise DomainError("steps must be non-negative and replicas positive")
    budget = step_budget() if budget is None else int(budget)
    if steps * replicas > budget:
        raise BudgetExceeded(steps * replicas, budget)
    ids = np.arange(replicas, dtype=np.int64)
    gaps = np.empty(replicas, dtype=np.int64)
    sums = np.empty(replicas, dtype=np.int64)
    shape = (replicas, steps + 1) if keep_paths else (1, 1)
    gpath = np.empty(shape, dtype=np.int64)
    spath = np.empty(shape, dtype=np.int64)
    visits = np.zeros(stats_max_gap + 1, dtype=np.int64)
    dg = np.zeros(stats_max_gap + 1, dtype=np.int64)
    bad = _pair_kernel(start.x, start.y, steps, rng.seed_u64(seed), ids, asymmetric,
                       stats_max_gap, keep_paths, gaps, sums, gpath, spath, visits, dg)
    if bad:
        raise ExclusionViolation(f"{bad} steps violated exclusion")
    return PairEnsemble(start, steps, replicas, seed, asymmetric, gaps, sums,
                        gpath if keep_paths else None, spath if keep_paths else None, visits, dg)


@dataclass(frozen=True)
class DriftFit:
    slope: float
    g_lo: int
    g_hi: int
    visits: int

    @property
    def relative_error(self) -> float:
        return abs(self.slope - 1.0)


def drift_regression(ens: PairEnsemble, g_lo: int = 5, g_hi: int = 50) -> DriftFit:
    """Visit-weighted least-squares slope of ``E[dg | g]`` on ``1/g`` through
    the origin (exactly 1 for the kernel)."""
    g, m, v = ens.drift(g_lo, g_hi)
    if g.size == 0:
        raise DomainError("no visits in the requested gap range")
    z = 1.0 / g
    slope = float(np.sum(v * m * z) / np.sum(v * z * z))
    return DriftFit(slope, g_lo, g_hi, int(v.sum()))


def kernel_table_json(g_max: int, asymmetric: bool = False) -> str:
    table = {
        str(g): {mv: str(p) for mv, p in pair_kernel(g, asymmetric).items()}
        for g in range(1, g_max + 1)
    }
    return json.dumps({"rho": spectral_radius(asymmetric), "psi": "g", "kernel": table}, sort_keys=True)
