"""Graph, eigenpair, kernel and model (de)serialization."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .graph import Eigenpair, MarkovKernel, WeightedGraph
from .halfline import HalfLineModel, build_model


def _label(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def _assemble(triples, directed: bool) -> WeightedGraph:
    labels: list = []
    index: dict = {}
    edges = []
    for a, b, w in triples:
        for v in (a, b):
            if v not in index:
                index[v] = len(labels)
                labels.append(v)
        edges.append((index[a], index[b], float(w)))
    if not labels:
        raise DataError("graph has no edges")
    if all(isinstance(v, int) for v in labels):
        order = sorted(range(len(labels)), key=lambda i: labels[i])
        remap = {old: new for new, old in enumerate(order)}
        labels = [labels[i] for i in order]
        edges = [(remap[a], remap[b], w) for a, b, w in edges]
    return WeightedGraph(len(labels), tuple(edges), directed, tuple(labels))


def parse_edge_list(text: str, directed: bool = False) -> WeightedGraph:
    """``from to weight`` per line; ``#`` starts a comment; weight defaults to 1.

    Undirected input lists each edge once.
    """
    triples = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise DataError(f"line {lineno}: expected 'from to [weight]'")
        w = float(parts[2]) if len(parts) == 3 else 1.0
        if not np.isfinite(w) or w < 0:
            raise DataError(f"line {lineno}: weight must be finite and non-negative")
        triples.append((_label(parts[0]), _label(parts[1]), w))
    return _assemble(triples, directed)


def read_graph(path) -> WeightedGraph:
    """Edge list (any suffix) or JSON (``.json``)."""
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".json":
        return graph_from_json(text)
    return parse_edge_list(text)


def graph_from_json(text: str) -> WeightedGraph:
    """``{"directed": bool, "edges": [[from, to, weight], ...]}``."""
    try:
        obj = json.loads(text)
        edges = [(a, b, w) for a, b, w in obj["edges"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"malformed graph JSON: {exc}") from exc
    unknown = set(obj) - {"directed", "edges", "vertex_count"}
    if unknown:
        raise DataError(f"unknown graph fields: {sorted(unknown)}")
    if any(w < 0 for _, _, w in edges):
        raise DataError("weights must be non-negative")
    return _assemble(edges, bool(obj.get("directed", False)))


def graph_to_json(graph: WeightedGraph) -> str:
    lab = graph.labels or tuple(range(graph.vertex_count))
    edges = [[lab[a], lab[b], w] for a, b, w in graph.edges]
    return json.dumps({"directed": graph.directed, "vertex_count": graph.vertex_count, "edges": edges})


def write_edge_list(graph: WeightedGraph, path) -> None:
    lab = graph.labels or tuple(range(graph.vertex_count))
    lines = [f"{lab[a]} {lab[b]} {w!r}" for a, b, w in graph.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def eigenpair_to_json(eig: Eigenpair, graph: WeightedGraph | None = None) -> str:
    lab = (graph.labels if graph is not None else None) or tuple(range(len(eig.psi)))
    return json.dumps(
        {
            "rho": eig.rho,
            "psi": {str(k): float(v) for k, v in zip(lab, eig.psi)},
            "residual": eig.residual,
            "iterations": eig.iterations,
        }
    )


def kernel_to_json(kernel: MarkovKernel) -> str:
    pi = kernel.invariant_measure
    lab = kernel.labels or tuple(range(kernel.size))
    return json.dumps(
        {
            "rows": {str(k): [[t, p] for t, p in row] for k, row in kernel.rows().items()},
            "invariant_measure": None if pi is None else {str(k): float(v) for k, v in zip(lab, pi)},
            "row_sum_deviation": kernel.row_sum_deviation,
        }
    )


MODEL_FIELDS = {"gamma", "lambda_scaling", "n_scale"}


def model_from_dict(obj: dict) -> HalfLineModel:
    unknown = set(obj) - MODEL_FIELDS
    if unknown:
        raise DataError(f"unknown model fields: {sorted(unknown)}")
    return build_model(obj.get("gamma"), obj.get("lambda_scaling"), obj.get("n_scale"))


def model_from_json(text: str) -> HalfLineModel:
    return model_from_dict(json.loads(text))


def model_to_json(model: HalfLineModel) -> str:
    return json.dumps(
        {
            "gamma": str(model.gamma),
            "lambda_scaling": model.lambda_scaling,
            "n_scale": model.n_scale,
            "rho": str(model.rho),
            "regime": model.regime.value,
        }
    )
