"""Reference laws for the three scaling limits and a KS goodness-of-fit check.

Closed forms: the 3-d Bessel process (from 0 and from x0 > 0 via the Doob
transform of killed Brownian motion), reflected Brownian motion ``|x0 + B_t|``
and the exponential stationary law of reflected drifted Brownian motion.
Simulated laws come from Euler-Maruyama with absolute-value reflection.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numba as nb
import numpy as np
from scipy import stats
from scipy.special import ndtr

from . import rng
from .defaults import DEFAULTS
from .errors import DataError, DomainError


class LawKind(str, enum.Enum):
    BESSEL3 = "bessel3"
    FOLDED_NORMAL = "folded_normal"
    REFLECTED_DRIFTED = "reflected_drifted"
    EXPONENTIAL = "exponential"


def _phi(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


def _check(t, y):
    if np.any(np.asarray(t) <= 0):
        raise DomainError("t must be positive")
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("y must be non-negative")
    return y


def bessel3_cdf(x0: float, t: float, y):
    """CDF at time t of the 3-d Bessel process started at ``x0 >= 0``.

    From 0 the law is ``sqrt(t)`` times a chi(3) variable.  From ``x0 > 0`` the
    density is ``(y/x0) [phi_t(y - x0) - phi_t(y + x0)]``, integrated in closed
    form.
    """
    if x0 < 0:
        raise DomainError("x0 must be non-negative")
    y = _check(t, y)
    s = math.sqrt(t)
    if x0 == 0:
        z = y / s
        return ndtr(z) - ndtr(-z) - 2.0 * z * _phi(z)
    a, b = (y - x0) / s, (y + x0) / s
    return ndtr(a) + ndtr(b) - 1.0 - (s / x0) * (_phi(a) - _phi(b))


def bessel3_pdf(x0: float, t: float, y):
    y = _check(t, y)
    s = math.sqrt(t)
    if x0 == 0:
        return math.sqrt(2 / math.pi) * t**-1.5 * y * y * np.exp(-y * y / (2 * t))
    return (y / x0) * (_phi((y - x0) / s) - _phi((y + x0) / s)) / s


def folded_normal_cdf(x0: float, t: float, y):
    """CDF of ``|x0 + B_t|``."""
    y = _check(t, y)
    s = math.sqrt(t)
    return ndtr((y - x0) / s) - ndtr((-y - x0) / s)


def folded_normal_pdf(x0: float, t: float, y):
    y = _check(t, y)
    s = math.sqrt(t)
    return (_phi((y - x0) / s) + _phi((y + x0) / s)) / s


def exponential_cdf(rate: float, y):
    if rate <= 0:
        raise DomainError("rate must be positive")
    y = np.asarray(y, dtype=float)
    return np.where(y < 0, 0.0, -np.expm1(-rate * np.clip(y, 0, None)))


@dataclass(frozen=True)
class EmpiricalCDF:
    """Sorted sample with its right-continuous empirical CDF."""

    sample: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.sample, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise DataError("sample must be a non-empty 1-d array")
        if np.isnan(x).any():
            raise DataError("sample contains NaN")
        if np.any(np.diff(x) < 0):
            raise DataError("sample is not sorted; use EmpiricalCDF.from_sample")
        object.__setattr__(self, "sample", x)

    @classmethod
    def from_sample(cls, x) -> "EmpiricalCDF":
        x = np.asarray(x, dtype=float)
        if np.isnan(x).any():
            raise DataError("sample contains NaN")
        return cls(np.sort(x))

    @property
    def size(self) -> int:
        return self.sample.size

    def __call__(self, y):
        return np.searchsorted(self.sample, y, side="right") / self.size

    def mean(self) -> float:
        return float(self.sample.mean())


@dataclass(frozen=True)
class ReferenceLaw:
    """A law on ``[0, inf)`` with a CDF handle.

    Simulated laws carry their sample and two error estimates on the CDF
    scale: a Monte Carlo term (95% DKW band) and a discretization term from a
    coupled half-step run.
    """

    kind: LawKind
    params: dict
    cdf: Callable = field(repr=False)
    provenance: str = "closed_form"
    sample: np.ndarray | None = field(default=None, repr=False)
    mc_error: float = 0.0
    discretization_error: float = 0.0
    seed: int | None = None
    scheme: str | None = None
    steps: int | None = None

    @property
    def error(self) -> float:
        return self.mc_error + self.discretization_error

    def table(self, grid=None) -> np.ndarray:
        if grid is None:
            grid = np.arange(0, DEFAULTS["histogram_max"] + 1e-12, DEFAULTS["histogram_width"])
        return np.column_stack([grid, self.cdf(grid)])

    def to_csv(self, path, grid=None) -> None:
        np.savetxt(path, self.table(grid), delimiter=",", header="y,cdf", comments="", fmt="%.17g")


def bessel3_law(x0: float, t: float) -> ReferenceLaw:
    return ReferenceLaw(LawKind.BESSEL3, {"x0": x0, "t": t}, lambda y: bessel3_cdf(x0, t, y))


def folded_normal_law(x0: float, t: float) -> ReferenceLaw:
    return ReferenceLaw(LawKind.FOLDED_NORMAL, {"x0": x0, "t": t}, lambda y: folded_normal_cdf(x0, t, y))


def exponential_law(rate: float) -> ReferenceLaw:
    return ReferenceLaw(LawKind.EXPONENTIAL, {"rate": rate}, lambda y: exponential_cdf(rate, y))


# --- Euler-Maruyama -----------------------------------------------------------


@nb.njit(nogil=True, cache=True)
def _reflected_drifted(lam, x0, dt, steps, seed, replicas, fine, out):
    """Z <- |Z + dB - lam dt|.  With ``fine`` the step is halved and each
    coarse increment is the sum of two fine ones (same Brownian path)."""
    sdt = math.sqrt(dt)
    for i in range(replicas.shape[0]):
        key = rng.replica_key(seed, replicas[i])
        z = x0[i]
        for k in range(steps):
            if fine:
                h = 0.5 * dt
                sh = math.sqrt(h)
                z = abs(z + sh * rng.normal(key, 2 * k) - lam * h)
                z = abs(z + sh * rng.normal(key, 2 * k + 1) - lam * h)
            else:
                g = (rng.normal(key, 2 * k) + rng.normal(key, 2 * k + 1)) / math.sqrt(2.0)
                z = abs(z + sdt * g - lam * dt)
        out[i] = z


@nb.njit(nogil=True, cache=True)
def _bessel3_euler(x0, dt, steps, seed, replicas, out):
    sdt = math.sqrt(dt)
    for i in range(replicas.shape[0]):
        key = rng.replica_key(seed, replicas[i])
        if x0 > 0:
            y = x0
            first = 0
        else:
            # one exact step out of the origin: |3-d Gaussian|
            a = rng.normal(key, 0)
            b = rng.normal(key, 1)
            c = rng.normal(key, 2)
            y = sdt * math.sqrt(a * a + b * b + c * c)
            first = 1
        for k in range(first, steps):
            y = abs(y + sdt * rng.normal(key, k + 3) + dt / y)
        out[i] = y


def _fan_out(kernel, replicas: int, workers: int, *args) -> np.ndarray:
    ids = np.arange(replicas, dtype=np.int64)
    out = np.empty(replicas)
    if workers <= 1:
        kernel(*args, ids, out)
        return out
    chunks = np.array_split(np.arange(replicas), workers)

    def job(c):
        buf = np.empty(c.size)
        kernel(*args, ids[c], buf)
        out[c] = buf

    with ThreadPoolExecutor(workers) as pool:
        list(pool.map(job, chunks))
    return out


def _dkw(n: int, alpha: float = 0.05) -> float:
    return math.sqrt(math.log(2 / alpha) / (2 * n))


def reflected_drifted_euler(
    lam: float,
    x0,
    t: float,
    dt: float,
    replicas: int,
    seed: int,
    richardson: bool = True,
    workers: int = 1,
) -> ReferenceLaw:
    """Law of reflected drifted Brownian motion at time t by Euler-Maruyama.

    ``x0`` may be a scalar or one start per replica.  With ``richardson`` a
    half-step run on the same Brownian path is made and the KS distance
    between the two empirical laws is reported as ``discretization_error``.
    """
    if lam <= 0:
        raise DomainError("lam must be positive")
    if t < 0:
        raise DomainError("t must be non-negative")
    if dt <= 0 or dt > 1e-3 * max(1.0, t):
        raise DomainError(f"dt={dt} is too coarse; need dt <= {1e-3 * max(1.0, t):g}")
    starts = np.broadcast_to(np.asarray(x0, dtype=float), (replicas,)).copy()
    if np.any(starts < 0):
        raise DomainError("x0 must be non-negative")
    steps = int(round(t / dt))
    s = rng.seed_u64(seed)
    coarse = _run_reflected(lam, starts, dt, steps, s, False, workers)
    disc = 0.0
    if richardson:
        fine = _run_reflected(lam, starts, dt, steps, s, True, workers)
        disc = float(stats.ks_2samp(coarse, fine).statistic)
    sample = np.sort(coarse)
    ecdf = EmpiricalCDF(sample)
    return ReferenceLaw(
        LawKind.REFLECTED_DRIFTED,
        {"lam": lam, "x0": float(np.mean(starts)), "t": t, "dt": dt},
        ecdf,
        provenance="simulated",
        sample=sample,
        mc_error=_dkw(replicas),
        discretization_error=disc,
        seed=seed,
        scheme="euler-abs-reflection",
        steps=steps,
    )


def _run_reflected(lam, starts, dt, steps, seed, fine, workers) -> np.ndarray:
    replicas = starts.size
    ids = np.arange(replicas, dtype=np.int64)
    out = np.empty(replicas)
    chunks = np.array_split(np.arange(replicas), max(1, workers))

    def job(c):
        buf = np.empty(c.size)
        _reflected_drifted(lam, starts[c], dt, steps, seed, ids[c], fine, buf)
        out[c] = buf

    if workers <= 1:
        job(np.arange(replicas))
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(job, chunks))
    return out


def bessel3_euler(x0: float, t: float, dt: float, replicas: int, seed: int, workers: int = 1) -> ReferenceLaw:
    """Euler-Maruyama law of ``dY = dB + dt / Y`` at time t (validation oracle)."""
    if x0 < 0 or t <= 0 or dt <= 0:
        raise DomainError("need x0 >= 0, t > 0, dt > 0")
    steps = max(1, int(round(t / dt)))
    out = _fan_out(
        lambda ids, buf: _bessel3_euler(float(x0), dt, steps, rng.seed_u64(seed), ids, buf),
        replicas,
        workers,
    )
    sample = np.sort(out)
    return ReferenceLaw(
        LawKind.BESSEL3,
        {"x0": x0, "t": t, "dt": dt},
        EmpiricalCDF(sample),
        provenance="simulated",
        sample=sample,
        mc_error=_dkw(replicas),
        seed=seed,
        scheme="euler-abs-reflection",
        steps=steps,
    )


# --- goodness of fit ----------------------------------------------------------


@dataclass(frozen=True)
class GoFReport:
    ks_statistic: float
    sample_size: int
    null_threshold: float
    passed: bool
    alpha: float = DEFAULTS["ks_alpha"]
    reference: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "ks_statistic": self.ks_statistic,
                "sample_size": self.sample_size,
                "null_threshold": self.null_threshold,
                "alpha": self.alpha,
                "pass": self.passed,
                "reference": self.reference,
            },
            sort_keys=True,
        )


def ks_test(empirical, reference: ReferenceLaw, alpha: float = DEFAULTS["ks_alpha"]) -> GoFReport:
    """Two-sided KS test of a sample against a reference law.

    ``empirical`` is an :class:`EmpiricalCDF` or an already sorted array.  The
    threshold is the asymptotic Kolmogorov quantile at level ``alpha``; for a
    simulated reference it uses the two-sample scaling and adds the
    reference's discretization error.
    """
    if not isinstance(empirical, EmpiricalCDF):
        empirical = EmpiricalCDF(np.asarray(empirical, dtype=float))
    n = empirical.size
    if n < DEFAULTS["min_ks_sample"]:
        raise DataError(f"need at least {DEFAULTS['min_ks_sample']} samples, got {n}")
    c = stats.kstwobign.isf(alpha)
    if reference.provenance == "simulated":
        m = reference.sample.size
        d = float(stats.ks_2samp(empirical.sample, reference.sample).statistic)
        thr = c * math.sqrt((n + m) / (n * m)) + reference.discretization_error
    else:
        d = float(stats.ks_1samp(empirical.sample, reference.cdf, method="asymp").statistic)
        thr = c / math.sqrt(n)
    return GoFReport(d, n, float(thr), bool(d <= thr), alpha, reference.kind.value)


def ks_distance(cdf_a: Callable, cdf_b: Callable, grid) -> float:
    """Sup distance between two CDFs on a grid."""
    return float(np.max(np.abs(cdf_a(grid) - cdf_b(grid))))
