"""Problem graphs, cut evaluation and the brute-force MaxCut oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ResourceError

MAX_QUBITS = 16


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    Edges are stored canonically: ``u < v``, sorted, duplicate free.
    """

    id: str
    n: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"graph needs at least one node, got n={self.n}")
        canon = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise DomainError(f"self-loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise DomainError(f"edge ({u}, {v}) out of range for n={self.n}")
            canon.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def to_json(self) -> dict:
        return {"id": self.id, "n": self.n, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, obj: dict) -> "Graph":
        return cls(str(obj["id"]), int(obj["n"]), tuple(tuple(e) for e in obj["edges"]))


@dataclass(frozen=True)
class CutTable:
    """Cut size of every assignment; the diagonal of the cost Hamiltonian."""

    values: np.ndarray = field(repr=False)
    max_cut: int

    @property
    def n(self) -> int:
        return self.values.shape[0].bit_length() - 1


def erdos_renyi(n: int, edge_prob: float, seed: int) -> Graph:
    """G(n, p) random graph.

    Candidate pairs are visited in lexicographic ``(u, v)`` order and each is
    kept when a uniform draw from ``numpy.random.default_rng(seed)`` falls
    below ``edge_prob``.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not (0.0 <= edge_prob <= 1.0) or np.isnan(edge_prob):
        raise DomainError(f"edge probability must lie in [0, 1], got {edge_prob}")
    rng = np.random.default_rng(seed)
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < edge_prob:
                edges.append((u, v))
    return Graph(f"er{n}_s{seed}", n, tuple(edges))


def generate_graphs(n: int, count: int, edge_prob: float, seed: int) -> list[Graph]:
    """``count`` Erdos-Renyi graphs with at least one edge each.

    Graph ``k`` is drawn from the next unused seed starting at ``seed``;
    edgeless draws are skipped.
    """
    if edge_prob == 0.0 or n < 2:
        raise DomainError("these settings can never produce a graph with edges")
    graphs = []
    s = seed
    while len(graphs) < count:
        g = erdos_renyi(n, edge_prob, s)
        s += 1
        if g.num_edges == 0:
            continue
        graphs.append(Graph(f"g{len(graphs):04d}", g.n, g.edges))
    return graphs


def _as_bits(assignment, n: int) -> np.ndarray:
    if isinstance(assignment, str):
        bits = [int(c) for c in assignment]
    else:
        bits = [int(b) for b in assignment]
    if len(bits) != n:
        raise DomainError(f"assignment has {len(bits)} bits, graph has {n} nodes")
    if any(b not in (0, 1) for b in bits):
        raise DomainError("assignment bits must be 0 or 1")
    return np.asarray(bits, dtype=np.int64)


def cut_value(graph: Graph, assignment: str | Sequence[int]) -> int:
    """Number of edges whose endpoints differ in ``assignment``.

    Character/element ``i`` of the assignment is the side of node ``i``.
    """
    bits = _as_bits(assignment, graph.n)
    return sum(1 for u, v in graph.edges if bits[u] != bits[v])


def index_to_bitstring(z: int, n: int) -> str:
    """Basis index to assignment string (character ``i`` is bit ``i`` of ``z``)."""
    return "".join(str((z >> i) & 1) for i in range(n))


def cut_table(graph: Graph, max_qubits: int = MAX_QUBITS) -> CutTable:
    if graph.n > max_qubits:
        raise ResourceError(f"{graph.n} nodes exceeds the {max_qubits}-qubit limit")
    z = np.arange(1 << graph.n, dtype=np.int64)
    values = np.zeros_like(z)
    for u, v in graph.edges:
        values += ((z >> u) ^ (z >> v)) & 1
    values.flags.writeable = False
    return CutTable(values, int(values.max()))


def max_cut(graph: Graph, max_qubits: int = MAX_QUBITS) -> tuple[int, str]:
    """Exact MaxCut by enumeration; the witness is the lowest-index optimum."""
    table = cut_table(graph, max_qubits)
    z = int(np.argmax(table.values))
    return table.max_cut, index_to_bitstring(z, graph.n)


# ---------------------------------------------------------------------------
# JSON Lines persistence


def write_graphs(graphs: Iterable[Graph], path: str | Path) -> None:
    with open(path, "w") as fh:
        for g in graphs:
            fh.write(json.dumps(g.to_json()) + "\n")


def read_graphs(path: str | Path) -> list[Graph]:
    graphs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                graphs.append(Graph.from_json(json.loads(line)))
    return graphs
