"""Seeded Monte Carlo engine for half-line MERWs and finite Markov kernels.

Each step of replica ``r`` consumes ``uniform(key(seed, r), step)``; the walk
moves to the lower neighbour (the self-loop at 0) iff that uniform is below
the lower probability.  Results therefore do not depend on the worker count,
and two chains fed the same seed are monotonically coupled.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import integrate
from scipy.special import ndtr

from . import rng
from .defaults import DEFAULTS, step_budget
from .diffusion import EmpiricalCDF
from .errors import (
    AcceptanceStarvation,
    BudgetExceeded,
    ConvergenceError,
    CorruptedEnsemble,
    DomainError,
)
from .graph import MarkovKernel
from .halfline import HalfLineModel, build_model, lower_probability_array


class Record(str, enum.Enum):
    ENDPOINT = "endpoint"
    FULL_PATH = "full_path"
    OCCUPATION = "occupation"


# --- numba kernels ------------------------------------------------------------


@nb.njit(inline="always", cache=True)
def _goes_low(gamma, k, u):
    """``u < p_low(k)`` with the division cleared (it sits on the critical path)."""
    if gamma <= 1.0:
        c = (1.0 - gamma) * k
        return 2.0 * u * (1.0 + c) < gamma + c
    return u * (1.0 + gamma * gamma) < gamma * gamma


@nb.njit(nogil=True, cache=True)
def _halfline_kernel(gamma, start, steps, seed, ids, mode, threshold, out, paths):
    """mode 0: endpoint, 1: full path, 2: count of k < steps with X_k <= threshold."""
    for i in range(ids.shape[0]):
        key = rng.replica_key(seed, ids[i])
        x = start
        count = 0
        if mode == 1:
            paths[i, 0] = x
        for k in range(steps):
            if mode == 2 and x <= threshold:
                count += 1
            # branch-free: the comparison depends on x, so a branch would stall
            x = max(x + 1 - 2 * np.int64(_goes_low(gamma, x, rng.uniform(key, k))), 0)
            if mode == 1:
                paths[i, k + 1] = x
        out[i] = count if mode == 2 else x


@nb.njit(nogil=True, cache=True)
def _coupled_occupation(gamma_low, gamma_high, steps, seed, ids, threshold, out_low, out_high):
    """Occupation counts of two chains from 0 driven by the same uniforms."""
    for i in range(ids.shape[0]):
        key = rng.replica_key(seed, ids[i])
        x = 0
        z = 0
        cx = 0
        cz = 0
        for k in range(steps):
            if x <= threshold:
                cx += 1
            if z <= threshold:
                cz += 1
            u = rng.uniform(key, k)
            x = max(x + 1 - 2 * np.int64(_goes_low(gamma_low, x, u)), 0)
            z = max(z + 1 - 2 * np.int64(_goes_low(gamma_high, z, u)), 0)
        out_low[i] = cx
        out_high[i] = cz


@nb.njit(nogil=True, cache=True)
def _finite_kernel(cum, start, steps, seed, ids, mode, out, paths):
    m = cum.shape[1]
    for i in range(ids.shape[0]):
        key = rng.replica_key(seed, ids[i])
        x = start
        if mode == 1:
            paths[i, 0] = x
        for k in range(steps):
            u = rng.uniform(key, k)
            j = 0
            while j < m - 1 and u >= cum[x, j]:
                j += 1
            x = j
            if mode == 1:
                paths[i, k + 1] = x
        out[i] = x


@nb.njit(nogil=True, cache=True)
def _srw_attempts(x0, horizon, k, seed, ids, accepted, prefix):
    """Simple random walk from x0, stopped on hitting -1; accepted iff it
    survives ``horizon`` steps."""
    for i in range(ids.shape[0]):
        key = rng.replica_key(seed, ids[i])
        x = x0
        ok = True
        for s in range(horizon):
            x += 1 if rng.uniform(key, s) >= 0.5 else -1
            if s < k:
                prefix[i, s] = x
            if x < 0:
                ok = False
                break
        accepted[i] = ok


def _chunks(n: int, workers: int) -> list[np.ndarray]:
    return [c for c in np.array_split(np.arange(n), max(1, workers)) if c.size]


def _parallel(job, n: int, workers: int) -> None:
    parts = _chunks(n, workers)
    if len(parts) <= 1:
        for c in parts:
            job(c)
        return
    with ThreadPoolExecutor(len(parts)) as pool:
        list(pool.map(job, parts))


# --- specification and ensemble -----------------------------------------------


@dataclass(frozen=True)
class SimulationSpec:
    """What to simulate.

    ``scale`` is the n of the rescaling ``X / sqrt(n)`` used for histograms;
    it defaults to ``steps``.  ``threshold`` is the occupation level in
    lattice units (``record="occupation"`` only).
    """

    model: HalfLineModel | MarkovKernel
    start: int
    steps: int
    replicas: int
    master_seed: int
    record: Record = Record.ENDPOINT
    threshold: float | None = None
    scale: int | None = None
    budget: int | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "record", Record(self.record))
        if self.steps < 0:
            raise DomainError("steps must be non-negative")
        if self.replicas <= 0:
            raise DomainError("replicas must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if isinstance(self.model, HalfLineModel):
            if self.start < 0:
                raise DomainError("half-line start must be non-negative")
        elif isinstance(self.model, MarkovKernel):
            if not 0 <= self.start < self.model.size:
                raise DomainError("start is not a state of the kernel")
            if self.record is Record.OCCUPATION:
                raise DomainError("occupation records need a half-line model")
        else:
            raise DomainError("model must be a HalfLineModel or MarkovKernel")
        if self.record is Record.OCCUPATION and self.threshold is None:
            raise DomainError("occupation records need a threshold")

    @property
    def required_steps(self) -> int:
        return self.steps * self.replicas

    @property
    def effective_budget(self) -> int:
        return int(self.budget) if self.budget is not None else step_budget()

    @property
    def effective_scale(self) -> int:
        return self.scale or max(self.steps, 1)

    def describe(self) -> dict:
        if isinstance(self.model, HalfLineModel):
            model = {"gamma": str(self.model.gamma), "rho": str(self.model.rho)}
        else:
            model = {"kernel_states": self.model.size}
        return {
            "model": model,
            "start": self.start,
            "steps": self.steps,
            "replicas": self.replicas,
            "master_seed": self.master_seed,
            "record": self.record.value,
            "threshold": self.threshold,
            "scale": self.effective_scale,
            "required_steps": self.required_steps,
            "budget": self.effective_budget,
        }


def histogram(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mass on the standard grid ``[0, max)`` with width ``histogram_width``,
    plus one overflow bin; masses sum to 1."""
    w, top = DEFAULTS["histogram_width"], DEFAULTS["histogram_max"]
    nb_ = int(round(top / w))
    edges = np.linspace(0.0, top, nb_ + 1)
    idx = np.clip(np.floor(np.asarray(values) / w).astype(np.int64), 0, nb_)
    counts = np.bincount(idx, minlength=nb_ + 1)
    return edges, counts / counts.sum()


@dataclass(frozen=True)
class PathEnsemble:
    """Immutable result of :func:`run`.

    ``records`` holds endpoints, full paths (``replicas x (steps + 1)``) or
    occupation counts depending on ``spec.record``.
    """

    spec: SimulationSpec
    records: np.ndarray = field(repr=False)

    @property
    def endpoints(self) -> np.ndarray:
        if self.spec.record is Record.FULL_PATH:
            return self.records[:, -1]
        if self.spec.record is Record.OCCUPATION:
            raise DomainError("occupation ensembles do not keep endpoints")
        return self.records

    @property
    def scaled(self) -> np.ndarray:
        return self.endpoints / math.sqrt(self.spec.effective_scale)

    def histogram(self):
        return histogram(self.scaled)

    def mean(self) -> float:
        return float(self.scaled.mean())

    def variance(self) -> float:
        return float(self.scaled.var(ddof=1)) if self.scaled.size > 1 else 0.0

    def summary(self) -> dict:
        out = {"spec": self.spec.describe(), "defaults_version": DEFAULTS["version"]}
        if self.spec.record is Record.OCCUPATION:
            frac = self.records / self.spec.effective_scale
            out["occupation_mean"] = float(frac.mean())
        else:
            out.update(mean=self.mean(), variance=self.variance())
        return out

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)

    def to_csv(self, path) -> None:
        ids = np.arange(self.spec.replicas)
        if self.spec.record is Record.FULL_PATH:
            cols = ",".join(f"x{k}" for k in range(self.records.shape[1]))
            np.savetxt(path, np.column_stack([ids, self.records]), delimiter=",",
                       header="replica," + cols, comments="", fmt="%d")
        else:
            name = "occupation" if self.spec.record is Record.OCCUPATION else "endpoint"
            np.savetxt(path, np.column_stack([ids, self.records]), delimiter=",",
                       header=f"replica,{name}", comments="", fmt="%d")


def _check_budget(required: int, budget: int) -> None:
    if required > budget:
        raise BudgetExceeded(required, budget)


def run(spec: SimulationSpec) -> PathEnsemble:
    """Simulate ``spec.replicas`` independent paths of ``spec.steps`` steps."""
    _check_budget(spec.required_steps, spec.effective_budget)
    R, n = spec.replicas, spec.steps
    ids = np.arange(R, dtype=np.int64)
    seed = rng.seed_u64(spec.master_seed)
    mode = {Record.ENDPOINT: 0, Record.FULL_PATH: 1, Record.OCCUPATION: 2}[spec.record]
    out = np.empty(R, dtype=np.int64)
    paths = np.empty((R, n + 1) if mode == 1 else (1, 1), dtype=np.int64)

    if isinstance(spec.model, HalfLineModel):
        gamma = float(spec.model.gamma)
        thr = int(math.floor(spec.threshold)) if mode == 2 else 0

        def job(c):
            buf = np.empty(c.size, dtype=np.int64)
            pbuf = np.empty((c.size, n + 1) if mode == 1 else (1, 1), dtype=np.int64)
            _halfline_kernel(gamma, spec.start, n, seed, ids[c], mode, thr, buf, pbuf)
            out[c] = buf
            if mode == 1:
                paths[c] = pbuf
    else:
        cum = np.cumsum(spec.model.matrix, axis=1)

        def job(c):
            buf = np.empty(c.size, dtype=np.int64)
            pbuf = np.empty((c.size, n + 1) if mode == 1 else (1, 1), dtype=np.int64)
            _finite_kernel(cum, spec.start, n, seed, ids[c], mode, buf, pbuf)
            out[c] = buf
            if mode == 1:
                paths[c] = pbuf

    _parallel(job, R, spec.workers)
    records = paths if mode == 1 else out
    records.setflags(write=False)
    return PathEnsemble(spec, records)


# --- entropy ------------------------------------------------------------------


def _log_steps(model, paths: np.ndarray, relative_to_weights: bool) -> np.ndarray:
    a, b = paths[:, :-1], paths[:, 1:]
    if isinstance(model, HalfLineModel):
        g = float(model.gamma)
        low = lower_probability_array(g, a)
        down = (b < a) | ((a == 0) & (b == 0))
        up = b == a + 1
        if not np.all(down | up):
            raise CorruptedEnsemble("path contains a non-nearest-neighbour step")
        p = np.where(down, low, 1.0 - low)
        w = np.where((a == 0) & (b == 0), g, 1.0)
    else:
        p = model.matrix[a, b]
        w = np.ones_like(p)
    if np.any(p <= 0):
        r, s = np.argwhere(p <= 0)[0]
        raise CorruptedEnsemble(f"replica {r} step {s}: transition {a[r, s]}->{b[r, s]} has probability 0")
    out = np.log(p)
    if relative_to_weights:
        out = out - np.log(w)
    return out


def empirical_entropy_rate(ensemble: PathEnsemble, kernel=None, relative_to_weights: bool = False) -> float:
    """Mean over replicas of ``-(1/n) sum_k ln p(X_k, X_{k+1})``.

    ``kernel`` defaults to the ensemble's own model.  With
    ``relative_to_weights`` each term is ``ln(p / A)``, whose ergodic limit is
    ``ln(rho)`` on weighted graphs as well.
    """
    if ensemble.spec.record is not Record.FULL_PATH:
        raise DomainError("empirical_entropy_rate needs full_path records")
    n = ensemble.spec.steps
    if n == 0:
        raise DomainError("need at least one step")
    model = ensemble.spec.model if kernel is None else kernel
    logs = _log_steps(model, ensemble.records, relative_to_weights)
    return float(np.mean(-logs.sum(axis=1) / n))


def transition_counts(ensemble: PathEnsemble, state: int) -> dict[int, int]:
    """How often each target followed a visit to ``state`` in full paths."""
    if ensemble.spec.record is not Record.FULL_PATH:
        raise DomainError("transition_counts needs full_path records")
    a, b = ensemble.records[:, :-1].ravel(), ensemble.records[:, 1:].ravel()
    t, c = np.unique(b[a == state], return_counts=True)
    return dict(zip(t.tolist(), c.tolist()))


# --- conditioned simple random walk -------------------------------------------


@dataclass(frozen=True)
class ConditionedSample:
    x: int
    horizon: int
    k: int
    accepted: int
    attempts: int
    prefixes: np.ndarray = field(repr=False)
    seed: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts

    def law(self) -> dict[tuple, float]:
        keys, counts = np.unique(self.prefixes, axis=0, return_counts=True)
        return {tuple(int(v) for v in kk): c / self.accepted for kk, c in zip(keys, counts)}

    def first_step_up(self) -> tuple[float, float]:
        """Fraction of accepted paths whose first step goes up, with its s.e."""
        p = float(np.mean(self.prefixes[:, 0] == self.x + 1))
        return p, math.sqrt(max(p * (1 - p), 1e-300) / self.accepted)


def conditioned_srw_sample(
    x: int,
    horizon: int,
    k: int,
    replicas: int,
    seed: int,
    max_attempts: int | None = None,
    batch: int | None = None,
    workers: int = 1,
) -> ConditionedSample:
    """Rejection sample of the first k positions of a simple random walk from
    x conditioned on not hitting -1 within ``horizon`` steps.

    Attempts are indexed 0, 1, 2, ...; the sample is the first ``replicas``
    accepted attempts in index order, so it is independent of batching and of
    the worker count.
    """
    if x < 0 or horizon <= 0 or not 0 < k <= horizon or replicas <= 0:
        raise DomainError("need x >= 0, 0 < k <= horizon, replicas > 0")
    rate = min(1.0, (x + 1) * math.sqrt(2 / (math.pi * horizon)))
    if max_attempts is None:
        max_attempts = int(20 * replicas / rate) + 1000
    if batch is None:
        batch = int(min(max(1.2 * replicas / rate, 1000), 2_000_000))
    s = rng.seed_u64(seed)
    kept: list[np.ndarray] = []
    got = 0
    done = 0
    while got < replicas:
        if done >= max_attempts:
            raise AcceptanceStarvation(got, done, replicas)
        m = min(batch, max_attempts - done)
        ids = np.arange(done, done + m, dtype=np.int64)
        acc = np.zeros(m, dtype=np.bool_)
        pre = np.zeros((m, k), dtype=np.int64)

        def job(c):
            a = np.zeros(c.size, dtype=np.bool_)
            p = np.zeros((c.size, k), dtype=np.int64)
            _srw_attempts(x, horizon, k, s, ids[c], a, p)
            acc[c] = a
            pre[c] = p

        _parallel(job, m, workers)
        hit = np.nonzero(acc)[0]
        need = replicas - got
        if hit.size >= need:
            hit = hit[:need]
            done += int(hit[-1]) + 1
        else:
            done += m
        kept.append(pre[hit])
        got += hit.size
    return ConditionedSample(x, horizon, k, got, done, np.concatenate(kept), seed)


def tv_distance(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(float(p.get(s, 0)) - float(q.get(s, 0))) for s in keys)


# --- occupation bound ---------------------------------------------------------


@dataclass(frozen=True)
class OccupationConstant:
    value: float
    abserr: float


def occupation_constant(v: float, lam: float) -> OccupationConstant:
    """``C = P(U + V/(2 lam sqrt v) + 2 lam sqrt v <= 0)`` for U standard
    normal and V standard exponential, as ``int_0^inf e^-s Phi(-a - s/a) ds``
    with ``a = 2 lam sqrt v``."""
    if v <= 0 or lam <= 0:
        raise DomainError("v and lam must be positive")
    a = 2 * lam * math.sqrt(v)
    val, err = integrate.quad(lambda s: math.exp(-s) * ndtr(-a - s / a), 0, math.inf,
                              epsabs=1e-14, epsrel=1e-12, limit=200)
    if err > DEFAULTS["quad_tol"] * max(1.0, abs(val)):
        raise ConvergenceError("occupation-constant quadrature did not converge", err)
    return OccupationConstant(val, err)


def occupation_constant_mc(v: float, lam: float, samples: int = 10**7, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of the same probability and its standard error."""
    a = 2 * lam * math.sqrt(v)
    gen = np.random.default_rng(seed)
    hits = 0
    left = samples
    while left:
        m = min(left, 10**6)
        u = gen.standard_normal(m)
        e = gen.standard_exponential(m)
        hits += int(np.count_nonzero(u + e / a + a <= 0))
        left -= m
    p = hits / samples
    return p, math.sqrt(p * (1 - p) / samples)


@dataclass(frozen=True)
class OccupationReport:
    n: int
    u: float
    v: float
    eta: float
    lam: float
    gamma: float
    empirical_lhs: float
    bound_rhs: float
    constant: float
    constant_error: float
    bootstrap_fraction: float
    passed: bool
    coupled_lhs: float | None = None
    replicas: int = 0
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


def occupation_check(
    n: int,
    u: float,
    v: float,
    eta: float,
    lam: float,
    replicas: int,
    seed: int,
    gamma=None,
    budget: int | None = None,
    workers: int = 1,
    resamples: int = DEFAULTS["bootstrap_resamples"],
) -> OccupationReport:
    """Empirical ``E_0 card{k < nu : X_k <= eta sqrt n} / n`` against
    ``2 lam (u + v)(1 - exp(-2 lam eta)) / C``.

    The default chain is ``gamma = 1 + lam/sqrt(n)``.  A ``gamma <= 1`` is run
    together with that chain on the same uniforms; the coupling keeps it above
    the supercritical chain, and ``coupled_lhs`` reports the latter.
    """
    if min(n, u, v, eta, lam) <= 0:
        raise DomainError("n, u, v, eta, lam must be positive")
    steps = int(math.floor(n * u))
    _check_budget(steps * replicas * (1 if gamma is None else 2),
                  int(budget) if budget is not None else step_budget())
    C = occupation_constant(v, lam)
    rhs = 2 * lam * (u + v) * (1 - math.exp(-2 * lam * eta)) / C.value
    thr = int(math.floor(eta * math.sqrt(n)))
    high = float(build_model(lambda_scaling=lam, n_scale=n).gamma)
    ids = np.arange(replicas, dtype=np.int64)
    s = rng.seed_u64(seed)
    counts = np.empty(replicas, dtype=np.int64)
    coupled = None
    if gamma is None:
        g = high

        def job(c):
            buf = np.empty(c.size, dtype=np.int64)
            _halfline_kernel(high, 0, steps, s, ids[c], 2, thr, buf, np.empty((1, 1), dtype=np.int64))
            counts[c] = buf
    else:
        g = float(gamma)
        if g > 1:
            raise DomainError("the coupled run needs gamma <= 1")
        other = np.empty(replicas, dtype=np.int64)

        def job(c):
            lo = np.empty(c.size, dtype=np.int64)
            hi = np.empty(c.size, dtype=np.int64)
            _coupled_occupation(g, high, steps, s, ids[c], thr, lo, hi)
            counts[c] = lo
            other[c] = hi

    _parallel(job, replicas, workers)
    frac = counts / n
    if gamma is not None:
        coupled = float(other.mean() / n)
    boot = np.random.default_rng(seed).integers(0, replicas, size=(resamples, replicas))
    means = frac[boot].mean(axis=1)
    share = float(np.mean(means <= rhs))
    return OccupationReport(
        n, u, v, eta, lam, g, float(frac.mean()), rhs, C.value, C.abserr,
        share, share >= 0.95, coupled, replicas, seed,
    )


# --- scaled marginals ---------------------------------------------------------


@dataclass(frozen=True)
class ScaledMarginal:
    t: float
    n: int
    ecdf: EmpiricalCDF
    edges: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    ensemble: PathEnsemble | None = field(default=None, repr=False)


def scaled_marginal(spec: SimulationSpec, t: float) -> ScaledMarginal:
    """Law of ``X_{floor(n t)} / sqrt(n)`` where ``n = spec.scale``.

    ``spec.steps`` is ignored and replaced by ``floor(n t)``.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    if spec.record is not Record.ENDPOINT:
        raise DomainError("scaled_marginal needs endpoint records")
    n = spec.effective_scale if spec.scale else spec.steps
    if not n:
        raise DomainError("give the scale n")
    steps = int(math.floor(n * t))
    sub = SimulationSpec(spec.model, spec.start, steps, spec.replicas, spec.master_seed,
                         Record.ENDPOINT, None, n, spec.budget, spec.workers)
    ens = run(sub)
    y = ens.scaled
    edges, mass = histogram(y)
    return ScaledMarginal(t, n, EmpiricalCDF.from_sample(y), edges, mass, ens)


def geometric_rescaled_tv(gamma, n: int, lam: float) -> float:
    """TV distance on the standard grid between the geometric law of
    ``X/sqrt(n)`` (``P(X >= k) = gamma**(-2k)``) and Exp(2 lam)."""
    g = float(gamma)
    w, top = DEFAULTS["histogram_width"], DEFAULTS["histogram_max"]
    edges = np.linspace(0.0, top, int(round(top / w)) + 1)
    # P(X/sqrt(n) < y) = 1 - gamma^(-2 ceil(y sqrt n))
    def geo_cdf(y):
        return 1.0 - g ** (-2.0 * np.ceil(y * math.sqrt(n) - 1e-9))

    geo = np.diff(np.append(geo_cdf(edges), 1.0))
    ex = np.diff(np.append(1.0 - np.exp(-2 * lam * edges), 1.0))
    return 0.5 * float(np.abs(geo - ex).sum())

