"""Closed forms for the half-line ``N_0`` with a loop of weight gamma at 0.

The adjacency is ``A(0,0) = gamma``, ``A(n, n +- 1) = 1``.  Rational gamma
(int, Fraction or a decimal string) is kept exact throughout; kernels,
eigenfunctions and invariant measures then come back as ``Fraction``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable

import numpy as np
from scipy.special import gammaln, zeta

from .defaults import DEFAULTS
from .errors import DomainError

Number = Fraction | float


class Regime(str, enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


def _as_number(gamma) -> Number:
    if isinstance(gamma, (Rational, str)):
        return Fraction(gamma)
    g = float(gamma)
    if g.is_integer():
        return Fraction(int(g))
    return g


@dataclass(frozen=True)
class HalfLineModel:
    gamma: Number
    regime: Regime
    rho: Number
    lambda_scaling: float | None = None
    n_scale: int | None = None

    @property
    def is_exact(self) -> bool:
        return isinstance(self.gamma, Fraction)

    @property
    def invariant_is_probability(self) -> bool:
        return self.regime is Regime.SUPERCRITICAL


def build_model(gamma=None, lambda_scaling=None, n_scale=None) -> HalfLineModel:
    """Model with its regime and combinatorial spectral radius.

    Either give ``gamma`` directly or the supercritical scaling
    ``gamma = 1 + lambda_scaling / sqrt(n_scale)``; the latter is exact when
    ``n_scale`` is a perfect square and ``lambda_scaling`` rational.
    """
    if gamma is None:
        if lambda_scaling is None or n_scale is None:
            raise DomainError("give gamma or both lambda_scaling and n_scale")
        if lambda_scaling <= 0 or n_scale <= 0:
            raise DomainError("lambda_scaling and n_scale must be positive")
        root = math.isqrt(int(n_scale))
        lam = _as_number(lambda_scaling)
        if root * root == n_scale and isinstance(lam, Fraction):
            gamma = 1 + lam / root
        else:
            gamma = 1.0 + float(lambda_scaling) / math.sqrt(n_scale)
    g = _as_number(gamma)
    if g < 0:
        raise DomainError(f"gamma must be non-negative, got {gamma}")
    if g < 1:
        regime, rho = Regime.SUBCRITICAL, _as_number(2)
    elif g == 1:
        regime, rho = Regime.CRITICAL, _as_number(2)
    else:
        regime, rho = Regime.SUPERCRITICAL, g + 1 / g
    return HalfLineModel(g, regime, rho, lambda_scaling, n_scale)


def eigenfunction(model: HalfLineModel, n: int) -> Number:
    """Positive eigenfunction normalized by ``psi_0 = 1``."""
    if n < 0:
        raise DomainError("n must be non-negative")
    g = model.gamma
    if g <= 1:
        return 1 + (1 - g) * n
    return g ** (-n) if isinstance(g, Fraction) else g ** (-float(n))


def kernel_row(model: HalfLineModel, n: int) -> list[tuple[int, Number]]:
    """Transition probabilities out of ``n`` as ``[(target, p), ...]``.

    The lower move from the origin is the self-loop ``(0, p)``.
    """
    if n < 0:
        raise DomainError("n must be non-negative")
    low = lower_probability(model, n)
    up = 1 - low
    if n == 0:
        return [(0, low), (1, up)]
    return [(n - 1, low), (n + 1, up)]


def lower_probability(model: HalfLineModel, n: int) -> Number:
    """Probability of stepping down (or staying, at the origin)."""
    g = model.gamma
    if g <= 1:
        half = Fraction(1, 2) if isinstance(g, Fraction) else 0.5
        return half * (g + (1 - g) * n) / (1 + (1 - g) * n)
    return g * g / (1 + g * g)


def lower_probability_array(gamma: float, n: np.ndarray) -> np.ndarray:
    """Vectorized float version of :func:`lower_probability`."""
    n = np.asarray(n, dtype=float)
    if gamma <= 1:
        return 0.5 * (gamma + (1 - gamma) * n) / (1 + (1 - gamma) * n)
    return np.full_like(n, gamma * gamma / (1 + gamma * gamma))


def transition_probability(model: HalfLineModel, x: int, y: int) -> Number:
    for target, p in kernel_row(model, x):
        if target == y:
            return p
    return 0


def invariant_measure(model: HalfLineModel, n: int) -> Number:
    """``psi_n**2``; a probability (geometric law) only when supercritical."""
    if n < 0:
        raise DomainError("n must be non-negative")
    g = model.gamma
    if g <= 1:
        return (1 + (1 - g) * n) ** 2
    inv2 = 1 / (g * g)
    return inv2**n * (1 - inv2)


def drift(model: HalfLineModel, n: int) -> Number:
    """``E[X_{k+1} - X_k | X_k = n]``."""
    row = kernel_row(model, n)
    return sum(p * (t - n) for t, p in row)


def square_drift(model: HalfLineModel, n: int) -> Number:
    """``(P - I) g (n)`` for ``g(x) = x**2``."""
    return sum(p * (t * t - n * n) for t, p in kernel_row(model, n))


# --- Catalan numbers and return generating function ---------------------------


def catalan(n: int, cap: int = DEFAULTS["catalan_cap"]) -> int:
    if n < 0:
        raise DomainError("n must be non-negative")
    if n > cap:
        raise DomainError(f"n={n} exceeds the configured cap {cap}")
    return math.comb(2 * n, n) // (n + 1)


def catalan_asymptotic(n: int) -> float:
    return 4.0**n / (math.sqrt(math.pi) * n**1.5)


@dataclass(frozen=True)
class GeneratingFunctionTable:
    """Return counts ``a_n = A^n(0, 0)`` for ``n = 0 .. N``.

    In exact mode ``coefficients`` holds ``Fraction``/``int`` values.  In
    float mode it holds ``a_n * scale**n`` so that nothing overflows; use
    :meth:`log_coefficients` or :meth:`weighted` to get at the values.
    """

    gamma: Number
    coefficients: list | np.ndarray
    radius_estimate: float
    exact: bool
    scale: float = 1.0

    @property
    def N(self) -> int:
        return len(self.coefficients) - 1

    def log_coefficients(self) -> np.ndarray:
        if self.exact:
            return np.array([_log_fraction(Fraction(a)) for a in self.coefficients])
        b = np.asarray(self.coefficients, dtype=float)
        n = np.arange(b.size)
        with np.errstate(divide="ignore"):
            return np.log(b) - n * math.log(self.scale)

    def weighted(self, z: float) -> np.ndarray:
        """``a_n z**n`` as floats."""
        if self.exact:
            zf = Fraction(z)
            return np.array([float(Fraction(a) * zf**k) for k, a in enumerate(self.coefficients)])
        b = np.asarray(self.coefficients, dtype=float)
        n = np.arange(b.size)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(b > 0, np.exp(np.log(b) + n * math.log(z / self.scale)), 0.0)

    def partial_sums(self, z: float) -> np.ndarray:
        return np.cumsum(self.weighted(z))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("n,a_n\n")
            for n, a in enumerate(self.coefficients):
                fh.write(f"{n},{self._format(n, a)}\n")

    def _format(self, n, a) -> str:
        if self.exact:
            return _exact_decimal(Fraction(a))
        return repr(float(np.exp(self.log_coefficients()[n]))) if a > 0 else "0"


def _log_fraction(q: Fraction) -> float:
    if q == 0:
        return -math.inf
    return _log_int(q.numerator) - _log_int(q.denominator)


def _log_int(k: int) -> float:
    bits = k.bit_length()
    if bits < 1000:
        return math.log(k)
    shift = bits - 60
    return math.log(k >> shift) + shift * math.log(2)


def _exact_decimal(q: Fraction) -> str:
    """Exact decimal string if the denominator is ``2**a 5**b``, else ``p/q``."""
    if q.denominator == 1:
        return str(q.numerator)
    d = q.denominator
    a = b = 0
    while d % 2 == 0:
        d //= 2
        a += 1
    while d % 5 == 0:
        d //= 5
        b += 1
    if d != 1:
        return f"{q.numerator}/{q.denominator}"
    digits = max(a, b)
    scaled = q * 10**digits
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    sign = "-" if q < 0 else ""
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def _exact_coefficients(gamma: Fraction, N: int) -> list[Fraction]:
    """Convolution recurrence ``a_n = g a_{n-1} + sum_j C_j a_{n-2-2j}``.

    Runs on integers ``q**n a_n`` where ``gamma = p/q``.
    """
    p, q = gamma.numerator, gamma.denominator
    cw = []  # C_j q^(2j+2)
    q2 = q * q
    qpow = q2
    for j in range(N // 2 + 1):
        cw.append(catalan(j, cap=max(N, 1)) * qpow)
        qpow *= q2
    t = [1]
    for n in range(1, N + 1):
        if p == 0 and n % 2:
            t.append(0)
            continue
        s = p * t[n - 1]
        for j in range((n - 2) // 2 + 1 if n >= 2 else 0):
            s += cw[j] * t[n - 2 - 2 * j]
        t.append(s)
    return [Fraction(t[n], q**n) for n in range(N + 1)]


def _scaled_coefficients(gamma: float, N: int, z: float) -> np.ndarray:
    """Same recurrence on ``b_n = a_n z**n`` in floating point."""
    m = N // 2 + 1
    cw = np.empty(m)
    cj = 1.0
    z2 = z * z
    for j in range(m):
        cw[j] = cj * z2
        cj *= 2.0 * (2 * j + 1) / (j + 2) * z2  # C_{j+1} z^{2j+2} from C_j z^{2j}
    b = np.zeros(N + 1)
    b[0] = 1.0
    gz = gamma * z
    for n in range(1, N + 1):
        s = gz * b[n - 1]
        if n >= 2:
            idx = np.arange(n - 2, -1, -2)
            s += cw[: idx.size] @ b[idx]
        b[n] = s
    return b


def _aitken(seq: np.ndarray) -> float:
    s0, s1, s2 = seq[-3], seq[-2], seq[-1]
    den = s2 - 2 * s1 + s0
    if den == 0 or not np.isfinite(den):
        return float(s2)
    acc = s2 - (s2 - s1) ** 2 / den
    # Aitken on a monotone but not geometric tail can overshoot; keep the
    # accelerated value only when it stays in the direction of travel.
    if (s2 - s1) * (acc - s2) < 0 or not np.isfinite(acc):
        return float(s2)
    return float(acc)


def _radius_from_log(loga: np.ndarray) -> float:
    """Radius of convergence from even-coefficient ratios ``a_{2n+2}/a_{2n}``."""
    even = loga[::2]
    ratios = np.exp(np.diff(even))
    ratios = ratios[np.isfinite(ratios)]
    if ratios.size < 3:
        return math.nan
    r = _aitken(ratios[-3:])
    return 1.0 / math.sqrt(r)


def return_coefficients(gamma, N: int, exact: bool | None = None) -> GeneratingFunctionTable:
    """Coefficients of ``G(z) = sum_n A^n(0,0) z^n`` up to ``z**N``.

    ``exact=None`` chooses exact integer arithmetic for rational gamma when
    ``N <= 4000`` and scaled floating point otherwise.
    """
    if N < 1 or N > DEFAULTS["coefficient_cap"]:
        raise DomainError(f"N must be in [1, {DEFAULTS['coefficient_cap']}]")
    g = _as_number(gamma)
    if g < 0:
        raise DomainError("gamma must be non-negative")
    if exact is None:
        exact = isinstance(g, Fraction) and N <= 4000
    if exact:
        if not isinstance(g, Fraction):
            raise DomainError("exact coefficients need a rational gamma")
        coeffs = _exact_coefficients(g, N)
        radius = _radius_from_log(np.array([_log_fraction(a) for a in coeffs]))
        return GeneratingFunctionTable(g, coeffs, radius, True, 1.0)
    gf = float(g)
    # Row sums bound the growth rate, so 1/max(V) keeps a short pilot run
    # finite; the pilot's growth estimate then sets the main run's scale.
    z0 = 1.0 / max(gf + 1.0, 2.0)
    pilot_n = min(N, 256)
    pilot = _scaled_coefficients(gf, pilot_n, z0)
    with np.errstate(divide="ignore"):
        pilot_log = np.log(pilot) - np.arange(pilot_n + 1) * math.log(z0)
    pilot_radius = _radius_from_log(pilot_log)
    z = pilot_radius if np.isfinite(pilot_radius) else z0
    b = _scaled_coefficients(gf, N, z)
    with np.errstate(divide="ignore"):
        loga = np.log(b) - np.arange(N + 1) * math.log(z)
    return GeneratingFunctionTable(g, b, _radius_from_log(loga), False, z)


def matrix_power_returns(gamma, n_max: int) -> list[Fraction]:
    """``A^n(0,0)`` for ``n <= n_max`` by exact matrix powers (test oracle).

    The lattice is truncated at ``n_max // 2 + 1``, beyond which no closed
    walk of length ``n_max`` from 0 can reach.
    """
    g = Fraction(gamma)
    size = n_max // 2 + 2
    A = [[Fraction(0)] * size for _ in range(size)]
    A[0][0] = g
    for i in range(size - 1):
        A[i][i + 1] = A[i + 1][i] = Fraction(1)
    vec = [Fraction(0)] * size
    vec[0] = Fraction(1)
    out = [Fraction(1)]
    for _ in range(n_max):
        vec = [sum(A[i][j] * vec[j] for j in range(size) if A[i][j]) for i in range(size)]
        out.append(vec[0])
    return out


def richardson_limit(partial: np.ndarray, N: int, terms: int = 4) -> float:
    """Extrapolate ``S_N = S - c1 N^-1/2 - c2 N^-3/2 - ...`` to ``S``.

    Uses the partial sums at ``N, N/2, .., N/2**(terms-1)`` (even indices).
    The half-integer powers are those of a square-root singularity on the
    circle of convergence, which is the situation for ``z = 1/2``, gamma < 1.
    """
    Ns = [(N >> k) & ~1 for k in range(terms)][::-1]
    M = np.array([[1.0] + [n ** -(0.5 + j) for j in range(terms - 1)] for n in Ns])
    y = np.array([partial[n] for n in Ns])
    return float(np.linalg.solve(M, y)[0])


def g_half_limit(gamma) -> float:
    """``G(1/2) = 2 / (1 - gamma)`` for gamma < 1, infinite otherwise."""
    g = float(_as_number(gamma))
    return 2.0 / (1.0 - g) if g < 1 else math.inf


# --- simple random walk conditioned to stay non-negative -----------------------


def _binom_half(n: int, k: int) -> Number:
    """``C(n, k) / 2**n``, exact below n = 1000, log-space above."""
    if k < 0 or k > n:
        return Fraction(0) if n <= 1000 else 0.0
    if n <= 1000:
        return Fraction(math.comb(n, k), 2**n)
    return float(np.exp(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) - n * math.log(2)))


def srw_point_probability(n: int, y: int) -> Number:
    """``P_0(S_n = y)`` for the simple symmetric walk."""
    if (n + y) % 2 or abs(y) > n:
        return Fraction(0) if n <= 1000 else 0.0
    return _binom_half(n, (n + y) // 2)


def conditioned_srw_hitting(x: int, n: int) -> Number:
    """``P_x(tau = n)`` for ``tau`` the hitting time of -1.

    Equals ``(x + 1)/n * P_0(S_n = x + 1)`` by the reflection principle.
    """
    if x < 0 or n < 1:
        raise DomainError("need x >= 0 and n >= 1")
    p = srw_point_probability(n, x + 1)
    return Fraction(x + 1, n) * p if isinstance(p, Fraction) else (x + 1) / n * p


def hitting_tail(x: int, n: int) -> Number:
    """``P_x(tau > n) = 1 - sum_{m <= n} P_x(tau = m)`` by summation."""
    if n <= 1000:
        return 1 - sum((conditioned_srw_hitting(x, m) for m in range(1, n + 1)), Fraction(0))
    m = np.arange(x + 1, n + 1)
    m = m[(m + x + 1) % 2 == 0]
    k = (m + x + 1) // 2
    logs = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1) - m * math.log(2)
    terms = (x + 1) / m * np.exp(logs)
    return float(1.0 - math.fsum(terms))


def hitting_tail_reflection(x: int, n: int) -> Number:
    """``P_x(tau > n) = P_0(-x <= S_n <= x + 1)``: closed-form oracle."""
    return sum((srw_point_probability(n, y) for y in range(-x, x + 2)), Fraction(0) if n <= 1000 else 0.0)


def hitting_tail_asymptotic(x: int, n: int) -> float:
    """Leading-order tail ``(x + 1) sqrt(2 / (pi n))``."""
    return (x + 1) * math.sqrt(2.0 / (math.pi * n))


def hitting_tail_reference_rate(x: int, n: int) -> float:
    """``2 (x + 1) / sqrt(pi n)``, larger than the true tail by sqrt(2)."""
    return 2.0 * (x + 1) / math.sqrt(math.pi * n)


def hitting_sum_with_tail(x: int, N: int) -> float:
    """``sum_{m<=N} P_x(tau=m)`` plus an asymptotic tail correction.

    The correction sums the two-term expansion of the hitting probabilities
    beyond N with Hurwitz zeta functions, so the total is 1 to O(N^-7/2).
    """
    m = np.arange(x + 1, N + 1)
    m = m[(m + x + 1) % 2 == 0]
    k = (m + x + 1) // 2
    logs = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1) - m * math.log(2)
    head = math.fsum((x + 1) / m * np.exp(logs))
    # On the admissible parity P_x(tau = m) = a sqrt(2/pi) m^-3/2 (1 - c/m + d/m^2)
    # with a = x + 1, c = 1/4 + a^2/2, d = a^4/8 + 5a^2/8 + 1/32 (Stirling).
    a = x + 1
    c = 0.25 + a * a / 2.0
    d = a**4 / 8.0 + 5.0 * a * a / 8.0 + 1.0 / 32.0
    first = (m[-1] + 2) if m.size else a
    # sum over m = first, first+2, ... of m^-s equals 2^-s zeta(s, first/2)
    lead = a * math.sqrt(2.0 / math.pi)
    tail = lead * (
        2.0**-1.5 * zeta(1.5, first / 2.0)
        - c * 2.0**-2.5 * zeta(2.5, first / 2.0)
        + d * 2.0**-3.5 * zeta(3.5, first / 2.0)
    )
    return head + tail


def conditioned_kernel_limit(x: int, y: int) -> Fraction:
    """Limit one-step probability ``(1/2)(y + 1)/(x + 1)`` of the walk
    conditioned to avoid -1 forever."""
    if abs(y - x) != 1 or y < 0 or x < 0:
        raise DomainError(f"({x}, {y}) is not a nearest-neighbour step in N_0")
    return Fraction(y + 1, 2 * (x + 1))


def conditioned_prefix_law(x: int, k: int, horizon: int | None = None) -> dict[tuple, Number]:
    """Law of the first k positions of the walk conditioned on ``tau > horizon``.

    ``horizon=None`` gives the ``horizon -> infinity`` limit
    ``2**-k (y + 1)/(x + 1)``; a finite horizon uses the exact reflection
    tails ``P_y(tau > horizon - k) / P_x(tau > horizon)``.
    """
    out = {}
    denom = None if horizon is None else hitting_tail_reflection(x, horizon)
    for steps in range(2**k):
        path = [x]
        for i in range(k):
            path.append(path[-1] + (1 if (steps >> i) & 1 else -1))
            if path[-1] < 0:
                break
        if len(path) != k + 1 or path[-1] < 0:
            continue
        y = path[-1]
        if horizon is None:
            out[tuple(path[1:])] = Fraction(y + 1, (x + 1) * 2**k)
        else:
            num = hitting_tail_reflection(y, horizon - k)
            out[tuple(path[1:])] = num / denom / 2**k
    return out


def merw_path_law(model: HalfLineModel, x: int, k: int) -> dict[tuple, Number]:
    """Exact law of the first k positions (after x) of the half-line MERW."""
    law = {(): Fraction(1) if model.is_exact else 1.0}
    for _ in range(k):
        nxt = {}
        for path, p in law.items():
            here = path[-1] if path else x
            for t, q in kernel_row(model, here):
                if q:
                    nxt[path + (t,)] = nxt.get(path + (t,), 0) + p * q
        law = nxt
    return law


# --- discrete generators ------------------------------------------------------


def squared_grid(n: int, k: np.ndarray) -> np.ndarray:
    return np.asarray(k, dtype=float) ** 2 / n


def linear_grid(n: int, k: np.ndarray) -> np.ndarray:
    return np.asarray(k, dtype=float) / math.sqrt(n)


def _on_grid(x: np.ndarray, n: int, squared: bool) -> np.ndarray:
    k = np.sqrt(x * n) if squared else x * math.sqrt(n)
    kr = np.rint(k)
    if np.any(np.abs(k - kr) > 1e-6 * np.maximum(1.0, kr)) or np.any(kr < 0):
        raise DomainError("x is not a point of the rescaled lattice")
    return kr


def discrete_generator(model: HalfLineModel, f: Callable, n: int, x) -> np.ndarray:
    """``n (P - I)(f o rescale)`` evaluated on the rescaled lattice.

    Subcritical/critical models use the squared process: ``x = k**2 / n`` and
    ``L_n f(x) = n (P - I) g_n(k)`` with ``g_n(k) = f(k**2 / n)``.
    Supercritical models use ``x = k / sqrt(n)`` and ``g_n(k) = f(k/sqrt(n))``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    squared = model.gamma < 1
    k = _on_grid(x, n, squared)
    low = lower_probability_array(float(model.gamma), k)
    up = 1.0 - low
    down_site = np.maximum(k - 1, 0)
    if squared:
        g = lambda j: f(j * j / n)  # noqa: E731
    else:
        g = lambda j: f(j / math.sqrt(n))  # noqa: E731
    return n * (up * g(k + 1) + low * g(down_site) - g(k))


def limit_generator(model: HalfLineModel, f, df, d2f, x) -> np.ndarray:
    """``L_{Y^2} f = 2x f'' + 3 f'`` (gamma < 1) or ``L_Z f = f''/2 - lam f'``.

    The critical model (gamma = 1, lam = 0) gets ``L_W f = f''/2``.
    """
    x = np.asarray(x, dtype=float)
    if model.gamma < 1:
        return 2.0 * x * d2f(x) + 3.0 * df(x)
    lam = model.lambda_scaling or 0.0
    return 0.5 * d2f(x) - lam * df(x)


def bump(lo: float, hi: float, c: float = 5.0) -> tuple[Callable, Callable, Callable]:
    """Smooth test function ``exp(-c / (1 - u**2))`` on ``(lo, hi)`` with two derivatives.

    ``u`` maps ``(lo, hi)`` onto ``(-1, 1)``. Wide supports and ``c`` near 5 keep the
    higher-order lattice corrections small at coarse scales.
    """
    a, b = (lo + hi) / 2.0, (hi - lo) / 2.0

    def parts(x):
        x = np.asarray(x, dtype=float)
        u = (x - a) / b
        inside = np.abs(u) < 1
        q = np.where(inside, 1.0 - u * u, 1.0)
        f = np.where(inside, np.exp(-c / q), 0.0)
        s = -2.0 * c * u / (b * q * q)
        ds = -2.0 * c / (b * b) * (1.0 / q**2 + 4.0 * u * u / q**3)
        return f, s, ds

    def f(x):
        return parts(x)[0]

    def df(x):
        v, s, _ = parts(x)
        return v * s

    def d2f(x):
        v, s, ds = parts(x)
        return v * (s * s + ds)

    return f, df, d2f
