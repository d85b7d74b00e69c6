"""Discrete minimization of the relative entropy rate ``int (phi')**2``.

Profiles live on a uniform mesh of ``[0, L]`` and are normalized by
``int phi**2 = 1`` (trapezoid).  The energy is the forward-difference sum
``sum (phi[i+1] - phi[i])**2 / dx``.  Both problems are solved as
(generalized) tridiagonal eigenproblems: LAPACK's Sturm-sequence bisection
gives the lowest eigenvalue and inverse iteration its vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import linalg, optimize

from . import rng
from .defaults import DEFAULTS
from .diffusion import exponential_law, ks_test
from .errors import ConvergenceError, DomainError


def _trap_weights(n: int, dx: float) -> np.ndarray:
    w = np.full(n, dx)
    w[0] = w[-1] = dx / 2
    return w


@dataclass(frozen=True)
class DensityProfile:
    grid: np.ndarray
    values: np.ndarray
    dirichlet: bool = False

    def __post_init__(self):
        x = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.shape != v.shape or x.ndim != 1 or x.size < 3:
            raise DomainError("grid and values must be matching 1-d arrays")
        if np.any(v < -1e-14):
            raise DomainError("profile must be non-negative")
        v = np.clip(v, 0.0, None)
        norm = np.trapezoid(v * v, x) if hasattr(np, "trapezoid") else np.trapz(v * v, x)
        if abs(norm - 1.0) > 1e-10:
            raise DomainError(f"profile is not normalized (int phi^2 = {norm!r})")
        if self.dirichlet and v[-1] != 0:
            raise DomainError("Dirichlet profile must vanish at L")
        object.__setattr__(self, "grid", x)
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, grid, values, dirichlet: bool = False) -> "DensityProfile":
        grid = np.asarray(grid, dtype=float)
        v = np.abs(np.asarray(values, dtype=float))
        w = _trap_weights(grid.size, grid[1] - grid[0])
        return cls(grid, v / math.sqrt(float(w @ (v * v))), dirichlet)

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def L(self) -> float:
        return float(self.grid[-1])

    def mean(self) -> float:
        w = _trap_weights(self.grid.size, self.dx)
        return float(w @ (self.grid * self.values**2))

    def drift_ratio(self) -> np.ndarray:
        """``phi'/phi`` by centred differences (NaN where phi = 0)."""
        d = np.gradient(self.values, self.dx)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.values > 0, d / self.values, np.nan)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.grid, self.values]), delimiter=",",
                   header="x,phi", comments="", fmt="%.17g")


@dataclass(frozen=True)
class VariationalResult:
    h: float
    profile: DensityProfile = field(repr=False)
    normalization_residual: float
    mean_residual: float | None = None
    beta: float | None = None
    mu: float | None = None
    mesh: int = 0
    L: float = 0.0
    lam: float | None = None
    tail_mass: float | None = None

    def drift_error(self, upto: float | None = None) -> float:
        """``max |phi'/phi + lam|`` over ``x <= upto`` (default L/2)."""
        if self.lam is None:
            raise DomainError("drift error is defined for the mean-constrained problem")
        upto = self.L / 2 if upto is None else upto
        r = self.profile.drift_ratio()
        m = self.profile.grid <= upto
        return float(np.nanmax(np.abs(r[m] + self.lam)))

    def to_json(self) -> str:
        d = {k: v for k, v in self.__dict__.items() if k != "profile"}
        return json.dumps(d, sort_keys=True)


def _energy(phi: np.ndarray, dx: float) -> float:
    return float(np.sum(np.diff(phi) ** 2) / dx)


def minimize_dirichlet(L: float, mesh: int) -> VariationalResult:
    """Minimize ``int (phi')**2`` over normalized profiles with ``phi(0) = phi(L) = 0``.

    ``mesh`` counts grid points including both ends.  The continuum answer is
    ``(pi/L)**2`` with the profile ``sqrt(2/L) sin(pi x / L)``.
    """
    if L <= 0:
        raise DomainError("L must be positive")
    if mesh < DEFAULTS["min_dirichlet_mesh"]:
        raise DomainError(f"mesh must have at least {DEFAULTS['min_dirichlet_mesh']} points")
    dx = L / (mesh - 1)
    m = mesh - 2
    d = np.full(m, 2.0 / dx**2)
    e = np.full(m - 1, -1.0 / dx**2)
    w, v = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, 0), lapack_driver="stebz")
    phi = np.zeros(mesh)
    phi[1:-1] = np.abs(v[:, 0])
    grid = np.linspace(0.0, L, mesh)
    prof = DensityProfile.normalized(grid, phi, dirichlet=True)
    h = _energy(prof.values, dx)
    norm = float(_trap_weights(mesh, dx) @ prof.values**2)
    if abs(h - w[0]) > 1e-8 * max(1.0, w[0]):
        raise ConvergenceError("eigenvector does not reproduce its eigenvalue", abs(h - w[0]))
    return VariationalResult(h, prof, abs(norm - 1), mesh=mesh, L=L)


def _stiffness(mesh: int, dx: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the energy matrix, free at 0, Dirichlet at L
    (the last point is dropped)."""
    n = mesh - 1
    d = np.full(n, 2.0 / dx)
    d[0] = 1.0 / dx
    return d, np.full(n - 1, -1.0 / dx)


def _ground_state(beta: float, x: np.ndarray, w: np.ndarray, d: np.ndarray, e: np.ndarray):
    """Lowest pair of ``(K + beta X W) phi = mu W phi`` (W diagonal)."""
    s = 1.0 / np.sqrt(w)
    dd = d * s * s + beta * x
    ee = e * s[:-1] * s[1:]
    mu, v = linalg.eigh_tridiagonal(dd, ee, select="i", select_range=(0, 0), lapack_driver="stebz")
    phi = np.abs(v[:, 0]) * s
    return float(mu[0]), phi


def minimize_mean_constrained(lam: float, L: float, mesh: int, origin_value: float | None = None) -> VariationalResult:
    """Minimize ``int (phi')**2`` subject to ``int phi**2 = 1`` and
    ``int x phi**2 = 1/(2 lam)`` on ``[0, L]`` with ``phi(L) = 0``.

    The Euler-Lagrange equation is ``-phi'' + beta x phi = mu phi`` with
    multipliers ``beta`` (mean) and ``mu`` (normalization).  With ``phi(0)``
    free the natural boundary condition ``phi'(0) = 0`` holds and the problem
    is the ground state of a linear potential; ``beta`` is found by root
    bracketing on the mean.  ``origin_value`` pins ``phi(0)`` instead, and
    ``(mu, beta)`` are then solved from the two constraints.
    """
    if lam <= 0:
        raise DomainError("lam must be positive")
    if L < 10 / lam:
        raise DomainError(f"L must be at least 10/lam = {10 / lam:g}")
    if mesh < DEFAULTS["min_constrained_mesh"]:
        raise DomainError(f"mesh must have at least {DEFAULTS['min_constrained_mesh']} points")
    grid = np.linspace(0.0, L, mesh)
    dx = grid[1] - grid[0]
    x = grid[:-1]
    w = _trap_weights(mesh, dx)[:-1]
    d, e = _stiffness(mesh, dx)
    target = 1.0 / (2 * lam)
    if origin_value is None:
        beta, mu, phi = _free_origin(x, w, d, e, target)
    else:
        beta, mu, phi = _pinned_origin(x, w, d, e, target, float(origin_value), lam)
    prof = DensityProfile.normalized(grid, np.append(phi, 0.0))
    norm = float(w @ (phi * phi))
    return VariationalResult(
        h=_energy(prof.values, dx),
        profile=prof,
        normalization_residual=abs(norm - 1.0),
        mean_residual=abs(prof.mean() - target),
        beta=beta,
        mu=mu,
        mesh=mesh,
        L=L,
        lam=lam,
        tail_mass=math.exp(-2 * lam * L),
    )


def _free_origin(x, w, d, e, target):
    def mean_gap(beta):
        _, phi = _ground_state(beta, x, w, d, e)
        phi = phi / math.sqrt(w @ (phi * phi))
        return float(w @ (x * phi * phi)) - target

    lo, hi = 0.0, 1.0
    if mean_gap(lo) < 0:
        # the box ground state already has a smaller mean; push outwards
        lo = -1.0
        while mean_gap(lo) < 0:
            lo *= 2
            if lo < -1e8:
                raise ConvergenceError("cannot bracket the mean multiplier", mean_gap(lo))
    while mean_gap(hi) > 0:
        hi *= 2
        if hi > 1e12:
            raise ConvergenceError("cannot bracket the mean multiplier", mean_gap(hi))
    beta = optimize.brentq(mean_gap, lo, hi, xtol=1e-14, rtol=1e-13, maxiter=500)
    mu, phi = _ground_state(beta, x, w, d, e)
    return beta, mu, phi / math.sqrt(w @ (phi * phi))


def _pinned_origin(x, w, d, e, target, c, lam):
    n = x.size
    ab_base = np.zeros((3, n - 1))

    def solve(mu, beta):
        # interior unknowns phi[1:], with phi[0] = c moved to the right side
        diag = d[1:] + (beta * x[1:] - mu) * w[1:]
        ab = ab_base.copy()
        ab[0, 1:] = e[1:]
        ab[1] = diag
        ab[2, :-1] = e[1:]
        rhs = np.zeros(n - 1)
        rhs[0] = -e[0] * c
        return np.concatenate([[c], linalg.solve_banded((1, 1), ab, rhs)])

    def resid(p):
        phi = solve(*p)
        return [w @ (phi * phi) - 1.0, w @ (x * phi * phi) - target]

    sol = optimize.root(resid, [-lam * lam, 0.0], method="hybr", tol=1e-13)
    # hybr can report "no progress" once it sits at machine precision, so judge the residual
    if max(abs(r) for r in sol.fun) > 1e-9:
        raise ConvergenceError("pinned-origin multipliers did not converge", float(np.max(np.abs(sol.fun))))
    mu, beta = sol.x
    return float(beta), float(mu), solve(mu, beta)


def kl_rate(profile: DensityProfile) -> float:
    """Trapezoid value of ``int (phi')**2`` with ``np.gradient`` derivatives
    (second order inside, one-sided first order at the two ends)."""
    d = np.gradient(profile.values, profile.dx)
    w = _trap_weights(profile.grid.size, profile.dx)
    return float(w @ (d * d))


def sine_profile(L: float, mesh: int) -> DensityProfile:
    x = np.linspace(0.0, L, mesh)
    v = math.sqrt(2 / L) * np.sin(np.pi * x / L)
    v[-1] = 0.0
    return DensityProfile.normalized(x, v, dirichlet=True)


def exponential_profile(lam: float, L: float, mesh: int) -> DensityProfile:
    x = np.linspace(0.0, L, mesh)
    return DensityProfile.normalized(x, math.sqrt(2 * lam) * np.exp(-lam * x))


def relative_l2(profile: DensityProfile, exact) -> float:
    ref = exact(profile.grid)
    w = _trap_weights(profile.grid.size, profile.dx)
    return float(math.sqrt(w @ (profile.values - ref) ** 2) / math.sqrt(w @ ref**2))


# --- pathwise KL rate ---------------------------------------------------------


@nb.njit(nogil=True, cache=True)
def _tilted_kl(lam, x0, dt, steps, seed, out_int, out_end):
    sdt = math.sqrt(dt)
    for i in range(x0.shape[0]):
        key = rng.replica_key(seed, i)
        z = x0[i]
        acc = 0.0
        for k in range(steps):
            # phi'/phi = -lam everywhere on [0, inf) for the exponential profile
            r = -lam
            acc += r * r * dt
            z = abs(z + sdt * rng.normal(key, k) + r * dt)
        out_int[i] = acc
        out_end[i] = z


@dataclass(frozen=True)
class PathwiseKL:
    rate: float
    standard_error: float
    t: float
    replicas: int
    stationarity_ks: float
    seed: int


def pathwise_kl_estimate(lam: float, t: float, dt: float, replicas: int, seed: int) -> PathwiseKL:
    """``(1/t) E[int_0^t (phi'/phi)(W_s)**2 ds]`` along the tilted reflected
    diffusion of the exponential profile, started from its stationary law
    Exp(2 lam).  Only the exponential profile is supported."""
    if lam <= 0:
        raise DomainError("lam must be positive (Exp(2 lam) has no meaning at lam = 0)")
    if t <= 0 or dt <= 0 or dt > 1e-3 * max(1.0, t):
        raise DomainError("need t > 0 and 0 < dt <= 1e-3 max(1, t)")
    steps = int(round(t / dt))
    x0 = np.random.default_rng(seed).exponential(1 / (2 * lam), replicas)
    integ = np.empty(replicas)
    end = np.empty(replicas)
    _tilted_kl(lam, x0, dt, steps, rng.seed_u64(seed), integ, end)
    rates = integ / (steps * dt)
    se = float(rates.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
    ks = math.nan
    if replicas >= DEFAULTS["min_ks_sample"]:
        ks = ks_test(np.sort(end), exponential_law(2 * lam)).ks_statistic
    return PathwiseKL(float(rates.mean()), se, t, replicas, ks, seed)
