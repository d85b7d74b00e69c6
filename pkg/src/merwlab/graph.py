"""MERW and GRW construction on finite weighted graphs.

A graph is stored as a sparse non-negative adjacency matrix.  The Perron
eigenpair is found by shifted power iteration; the MERW kernel is the Doob
transform ``p(x, y) = A(x, y) psi(y) / (rho psi(x))`` of the adjacency by its
Perron eigenvector.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np
import scipy.sparse as sp

from .defaults import DEFAULTS
from .errors import (
    ConvergenceError,
    MissingInvariantMeasure,
    ResidualTooLarge,
    StructuralError,
)


@dataclass(frozen=True)
class WeightedGraph:
    """Finite weighted graph on vertices ``0 .. vertex_count - 1``.

    Undirected edges contribute ``A[u, v] = A[v, u] = w``; a self-loop
    ``(u, u, w)`` contributes ``A[u, u] = w`` once.  Repeated edges add up.
    ``labels`` optionally names vertices (e.g. lattice sites ``-N .. N``).
    """

    vertex_count: int
    edges: tuple[tuple[int, int, float], ...]
    directed: bool = False
    labels: tuple[Hashable, ...] | None = None
    _adj: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.vertex_count)
        if n <= 0:
            raise StructuralError("vertex_count must be positive")
        edges = tuple((int(u), int(v), float(w)) for u, v, w in self.edges)
        object.__setattr__(self, "edges", edges)
        rows, cols, vals = [], [], []
        for u, v, w in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise StructuralError(f"edge ({u}, {v}) references a missing vertex")
            if not math.isfinite(w) or w < 0:
                raise StructuralError(f"edge ({u}, {v}) has invalid weight {w}")
            rows.append(u)
            cols.append(v)
            vals.append(w)
            if not self.directed and u != v:
                rows.append(v)
                cols.append(u)
                vals.append(w)
        adj = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=float)
        adj.sum_duplicates()
        adj.eliminate_zeros()
        object.__setattr__(self, "_adj", adj)
        if self.labels is not None:
            if len(self.labels) != n:
                raise StructuralError("labels must name every vertex")
            object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_adjacency(cls, A, directed: bool | None = None, labels=None) -> "WeightedGraph":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise StructuralError("adjacency must be square")
        if directed is None:
            directed = not np.array_equal(A, A.T)
        if directed:
            edges = [(int(u), int(v), A[u, v]) for u, v in zip(*np.nonzero(A))]
        else:
            edges = [(int(u), int(v), A[u, v]) for u, v in zip(*np.nonzero(np.triu(A)))]
        return cls(A.shape[0], tuple(edges), directed=directed, labels=labels)

    @property
    def adjacency(self) -> sp.csr_matrix:
        return self._adj

    def dense(self) -> np.ndarray:
        return self._adj.toarray()

    def out_weight(self) -> np.ndarray:
        """Row sums ``V(x) = sum_y A(x, y)``."""
        return np.asarray(self._adj.sum(axis=1)).ravel()

    def label(self, i: int):
        return i if self.labels is None else self.labels[i]

    def index(self, label) -> int:
        if self.labels is None:
            return int(label)
        return self.labels.index(label)

    def is_irreducible(self) -> bool:
        """Strong connectivity of the positive-weight support (BFS both ways)."""
        n = self.vertex_count
        if n == 1:
            return self._adj.nnz > 0
        fwd = _reachable(self._adj, 0)
        bwd = _reachable(self._adj.T.tocsr(), 0)
        return bool(fwd.all() and bwd.all())

    def scaled(self, c: float) -> "WeightedGraph":
        return WeightedGraph(
            self.vertex_count,
            tuple((u, v, c * w) for u, v, w in self.edges),
            self.directed,
            self.labels,
        )

    def reversed(self) -> "WeightedGraph":
        return WeightedGraph(
            self.vertex_count,
            tuple((v, u, w) for u, v, w in self.edges),
            self.directed,
            self.labels,
        )


def _reachable(adj: sp.csr_matrix, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    indptr, indices = adj.indptr, adj.indices
    while queue:
        u = queue.popleft()
        for v in indices[indptr[u] : indptr[u + 1]]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return seen


# --- standard graphs ---------------------------------------------------------


def path_graph(n: int, weight: float = 1.0) -> WeightedGraph:
    return WeightedGraph(n, tuple((i, i + 1, weight) for i in range(n - 1)))


def cycle_graph(n: int) -> WeightedGraph:
    return WeightedGraph(n, tuple((i, (i + 1) % n, 1.0) for i in range(n)))


def z_with_loops(N: int) -> WeightedGraph:
    """``Z`` truncated to ``[-N, N]`` with unit loops everywhere except at 0.

    The hard wall drops every edge leaving the window.
    """
    labels = tuple(range(-N, N + 1))
    edges = [(i, i + 1, 1.0) for i in range(2 * N)]
    edges += [(i, i, 1.0) for i, x in enumerate(labels) if x != 0]
    return WeightedGraph(2 * N + 1, tuple(edges), labels=labels)


def halfline_graph(gamma: float, N: int) -> WeightedGraph:
    """The origin-perturbed half-line truncated to ``{0, .., N}``."""
    edges = [(i, i + 1, 1.0) for i in range(N)]
    if gamma > 0:
        edges.append((0, 0, float(gamma)))
    return WeightedGraph(N + 1, tuple(edges), labels=tuple(range(N + 1)))


# --- eigenpairs --------------------------------------------------------------


@dataclass(frozen=True)
class Eigenpair:
    rho: float
    psi: np.ndarray
    residual: float
    iterations: int = 0

    @classmethod
    def from_vector(cls, graph: WeightedGraph, rho: float, psi) -> "Eigenpair":
        """Wrap a user-supplied ``(rho, psi)`` and compute its residual."""
        psi = np.asarray(psi, dtype=float)
        return cls(float(rho), psi, relative_residual(graph, rho, psi))


def relative_residual(graph: WeightedGraph, rho: float, psi: np.ndarray) -> float:
    r = graph.adjacency @ psi - rho * psi
    return float(np.max(np.abs(r)) / (abs(rho) * np.max(np.abs(psi))))


def power_iterate(
    graph: WeightedGraph,
    tol: float = DEFAULTS["eigen_tol"],
    max_iter: int = DEFAULTS["eigen_max_iter"],
    shift: float = DEFAULTS["power_shift"],
) -> Eigenpair:
    """Perron eigenpair of an irreducible graph by shifted power iteration.

    Iterates ``A + shift*I`` so that periodic graphs (bipartite paths, even
    cycles) still converge; ``rho`` is the Rayleigh quotient of ``A`` itself.
    ``psi`` is positive and normalized to unit 2-norm.

    Raises
    ------
    StructuralError
        If the graph has no edge or is not strongly connected.
    ConvergenceError
        If the relative residual is still above ``tol`` after ``max_iter``.
    """
    A = graph.adjacency
    if A.nnz == 0:
        raise StructuralError("graph has no positive-weight edge")
    if not graph.is_irreducible():
        raise StructuralError("graph is reducible; the Perron eigenvector is not positive")
    n = graph.vertex_count
    psi = np.full(n, 1.0 / math.sqrt(n))
    residual = math.inf
    check_every = 16
    for it in range(1, max_iter + 1):
        Apsi = A @ psi
        nxt = Apsi + shift * psi
        nxt /= np.linalg.norm(nxt)
        if it % check_every == 0 or it == max_iter:
            Anxt = A @ nxt
            rho = float(nxt @ Anxt)
            residual = float(np.max(np.abs(Anxt - rho * nxt)) / (rho * np.max(nxt)))
            if residual <= tol:
                return _polish(A, shift, nxt, rho, residual, it, tol)
        psi = nxt
    raise ConvergenceError("power iteration did not converge", residual, max_iter)


def _polish(A, shift, psi, rho, residual, it, tol) -> Eigenpair:
    """Iterate on past ``tol`` (to ``tol/100`` or until it stalls) so that the
    MERW rows, whose error is the residual divided by ``min psi``, still sum
    to 1 within ``tol`` on graphs with uneven eigenvectors."""
    best = Eigenpair(rho, psi, residual, it)
    for _ in range(64):
        for _ in range(16):
            psi = A @ psi + shift * psi
            psi /= np.linalg.norm(psi)
            it += 1
        Apsi = A @ psi
        rho = float(psi @ Apsi)
        residual = float(np.max(np.abs(Apsi - rho * psi)) / (rho * np.max(psi)))
        if residual >= best.residual:
            break
        best = Eigenpair(rho, psi, residual, it)
        if residual <= tol * 1e-2:
            break
    return best


def dense_perron(graph: WeightedGraph) -> tuple[float, np.ndarray]:
    """Dense-eigensolver Perron pair; an independent oracle for tests."""
    A = graph.dense()
    w, V = np.linalg.eig(A)
    i = int(np.argmax(w.real))
    v = np.abs(V[:, i].real)
    return float(w[i].real), v / np.linalg.norm(v)


def truncation_sensitivity(builder: Callable[[int], WeightedGraph], N: int, **kw) -> dict:
    """Compare the spectral radius of the ``N`` and ``2N`` finite sections."""
    a = power_iterate(builder(N), **kw)
    b = power_iterate(builder(2 * N), **kw)
    return {"N": N, "rho_N": a.rho, "rho_2N": b.rho, "change": b.rho - a.rho}


# --- kernels -----------------------------------------------------------------


@dataclass(frozen=True)
class MarkovKernel:
    """Row-stochastic transition matrix over a finite vertex set.

    ``row_sum_deviation`` is the max-norm distance of the row sums from 1;
    rows are never renormalized to hide it.
    """

    matrix: np.ndarray
    invariant_measure: np.ndarray | None = None
    labels: tuple | None = None
    row_sum_deviation: float = 0.0

    def __post_init__(self):
        P = np.asarray(self.matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise StructuralError("kernel matrix must be square")
        if (P < 0).any() or (P > 1 + 1e-12).any():
            raise StructuralError("kernel probabilities must lie in [0, 1]")
        object.__setattr__(self, "matrix", P)
        object.__setattr__(
            self, "row_sum_deviation", float(np.max(np.abs(P.sum(axis=1) - 1.0)))
        )

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def rows(self) -> dict:
        """Sparse view ``{vertex: [(target, probability), ...]}``."""
        lab = self.labels or tuple(range(self.size))
        out = {}
        for i in range(self.size):
            nz = np.nonzero(self.matrix[i])[0]
            out[lab[i]] = [(lab[j], float(self.matrix[i, j])) for j in nz]
        return out

    def with_invariant_measure(self, pi=None) -> "MarkovKernel":
        """Attach ``pi``, solving ``pi P = pi`` when not given."""
        if pi is None:
            pi = stationary_distribution(self.matrix)
        pi = np.asarray(pi, dtype=float)
        return MarkovKernel(self.matrix, pi / pi.sum(), self.labels)

    def invariance_residual(self) -> float:
        if self.invariant_measure is None:
            raise MissingInvariantMeasure("kernel has no invariant measure")
        pi = self.invariant_measure
        return float(np.max(np.abs(pi @ self.matrix - pi)))


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Solve ``pi P = pi, sum(pi) = 1`` for an irreducible finite kernel."""
    n = P.shape[0]
    M = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(M, b, rcond=None)
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def merw_kernel(
    graph: WeightedGraph, eig: Eigenpair, tol: float = DEFAULTS["eigen_tol"]
) -> MarkovKernel:
    """MERW kernel ``A(x,y) psi(y) / (rho psi(x))`` with invariant measure.

    For undirected graphs the invariant measure is ``psi**2`` normalized; for
    directed graphs it is the product of left and right Perron vectors.
    """
    if eig.residual > tol:
        raise ResidualTooLarge(eig.residual, tol)
    psi = np.asarray(eig.psi, dtype=float)
    if (psi <= 0).any():
        raise StructuralError("eigenfunction must be positive")
    A = graph.dense()
    P = A * psi[None, :] / (eig.rho * psi[:, None])
    if graph.directed:
        left = power_iterate(graph.reversed(), tol=tol).psi
        pi = left * psi
    else:
        pi = psi**2
    return MarkovKernel(P, pi / pi.sum(), graph.labels)


def grw_kernel(graph: WeightedGraph) -> MarkovKernel:
    """Generic random walk ``A(x,y) / V(x)``.

    Undirected graphs get the degree-proportional invariant measure; directed
    ones are left without one (see ``MarkovKernel.with_invariant_measure``).
    """
    V = graph.out_weight()
    if (V <= 0).any():
        bad = int(np.argmin(V))
        raise StructuralError(f"vertex {graph.label(bad)} has zero out-weight")
    P = graph.dense() / V[:, None]
    pi = None if graph.directed else V / V.sum()
    return MarkovKernel(P, pi, graph.labels)


def entropy_rate(kernel: MarkovKernel) -> float:
    """Shannon entropy rate ``-sum_x,y pi(x) p(x,y) ln p(x,y)`` in nats."""
    if kernel.invariant_measure is None:
        raise MissingInvariantMeasure(
            "entropy_rate needs an invariant probability; call "
            "kernel.with_invariant_measure() first"
        )
    P = kernel.matrix
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(P > 0, P * np.log(P), 0.0)
    return float(-(kernel.invariant_measure @ plogp.sum(axis=1)))


def weighted_entropy_rate(kernel: MarkovKernel, graph: WeightedGraph) -> float:
    """Entropy rate relative to the edge weights, ``-sum pi p ln(p / A)``.

    Equal to ``ln(rho)`` for the MERW of any weighted graph; coincides with
    :func:`entropy_rate` when all weights are 0 or 1.
    """
    if kernel.invariant_measure is None:
        raise MissingInvariantMeasure("call kernel.with_invariant_measure() first")
    P = kernel.matrix
    A = graph.dense()
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(P / A), 0.0)
    return float(-(kernel.invariant_measure @ terms.sum(axis=1)))


@dataclass(frozen=True)
class PathProbability:
    probability: float
    uniform_value: float
    adjacent: bool


def path_probability(kernel: MarkovKernel, eig: Eigenpair, path: Sequence[int]) -> PathProbability:
    """Probability of a vertex path under ``kernel``.

    ``uniform_value`` is ``psi(y) / (rho**n psi(x))``, the common probability
    of every n-step path from x to y on a unit-weight graph.  A step with zero
    kernel probability yields probability 0 and ``adjacent=False``.
    """
    path = [int(v) for v in path]
    n = len(path) - 1
    prob = 1.0
    adjacent = True
    for a, b in zip(path, path[1:]):
        p = kernel.matrix[a, b]
        if p == 0:
            adjacent = False
            prob = 0.0
            break
        prob *= p
    x, y = path[0], path[-1]
    uniform = float(eig.psi[y] / (eig.rho**n * eig.psi[x]))
    return PathProbability(prob, uniform, adjacent)


@dataclass(frozen=True)
class GroundStateReport:
    residual: np.ndarray
    max_residual: float
    labels: tuple | None

    def at(self, label) -> float:
        i = label if self.labels is None else self.labels.index(label)
        return float(self.residual[i])


def verify_ground_state(graph: WeightedGraph, eig: Eigenpair) -> GroundStateReport:
    """Residual of ``-Lap psi + V psi + rho psi`` with ``V = -degree``.

    ``Lap psi(x) = sum_y A(x,y) psi(y) - deg(x) psi(x)``.  Algebraically the
    same as ``A psi - rho psi`` up to sign; the point is to pin the sign and
    degree conventions of the Schrodinger form.
    """
    psi = np.asarray(eig.psi, dtype=float)
    deg = graph.out_weight()
    lap = graph.adjacency @ psi - deg * psi
    potential = -deg
    r = -lap + potential * psi + eig.rho * psi
    return GroundStateReport(r, float(np.max(np.abs(r))), graph.labels)


# --- non-uniqueness on Z with loops -------------------------------------------


@dataclass(frozen=True)
class NonuniquenessReport:
    N: int
    mix: Fraction
    psi_plus: dict
    psi_minus: dict
    psi_mix: dict
    interior_residuals: dict
    kernel_plus: dict
    kernel_minus: dict
    kernel_mix: dict


def _exact_kernel(psi: dict, rho: int, N: int) -> dict:
    rows = {}
    for x in range(-N + 1, N):
        row = [(x - 1, Fraction(psi[x - 1], rho * psi[x]))]
        if x != 0:
            row.append((x, Fraction(psi[x], rho * psi[x])))
        row.append((x + 1, Fraction(psi[x + 1], rho * psi[x])))
        rows[x] = row
    return rows


def nonuniqueness_demo(N: int = 20, mix=Fraction(1, 2)) -> NonuniquenessReport:
    """Two extremal Perron eigenfunctions of ``Z`` with loops off the origin.

    ``psi_plus(x) = 1 + x 1{x >= 0}``, ``psi_minus(x) = psi_plus(-x)`` and the
    convex mixture all satisfy ``A psi = 3 psi`` at every interior site of
    ``[-N, N]``; their kernels are exact rationals on the interior.
    """
    mix = Fraction(mix)
    if not 0 <= mix <= 1:
        raise ValueError("mix must lie in [0, 1]")
    xs = range(-N, N + 1)
    plus = {x: Fraction(1 + max(x, 0)) for x in xs}
    minus = {x: plus[-x] for x in xs}
    mixed = {x: mix * plus[x] + (1 - mix) * minus[x] for x in xs}

    def interior_residual(psi):
        worst = Fraction(0)
        for x in range(-N + 1, N):
            loop = 0 if x == 0 else psi[x]
            worst = max(worst, abs(psi[x - 1] + loop + psi[x + 1] - 3 * psi[x]))
        return worst

    return NonuniquenessReport(
        N=N,
        mix=mix,
        psi_plus=plus,
        psi_minus=minus,
        psi_mix=mixed,
        interior_residuals={
            "plus": interior_residual(plus),
            "minus": interior_residual(minus),
            "mix": interior_residual(mixed),
        },
        kernel_plus=_exact_kernel(plus, 3, N),
        kernel_minus=_exact_kernel(minus, 3, N),
        kernel_mix=_exact_kernel(mixed, 3, N),
    )
