"""Edge-colored weighted multigraphs and the post-selected states they produce.

A vertex is a photon path ending in a detector, an edge is a photon-pair
source feeding two paths, and the edge colors are the internal modes the two
photons are emitted in.  Conditioning on one photon per detector keeps only
the perfect matchings of the graph; every matching contributes the product of
its edge weights to the ket that lists the color each vertex receives.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

#: Amplitudes below this magnitude are treated as exact cancellations.
ZERO_TOL = 1e-12

Ket = tuple[int, ...]
EdgeKey = tuple[int, int, int, int]


class GraphError(ValueError):
    """Raised for graphs that cannot describe a post-selected experiment."""


class Edge(NamedTuple):
    u: int
    v: int
    color_u: int
    color_v: int
    weight: complex = 1.0

    @classmethod
    def make(cls, u, v, color_u, color_v, weight=1.0) -> "Edge":
        """Build an edge with ``u < v``, swapping colors along with endpoints."""
        u, v, color_u, color_v = int(u), int(v), int(color_u), int(color_v)
        if u > v:
            u, v, color_u, color_v = v, u, color_v, color_u
        return cls(u, v, color_u, color_v, weight)

    @property
    def key(self) -> EdgeKey:
        return (self.u, self.v, self.color_u, self.color_v)


@dataclass(frozen=True)
class Graph:
    """Immutable experiment blueprint.

    Edges are canonicalized (``u < v``) and kept sorted by their
    ``(u, v, color_u, color_v)`` key.  Construction never raises on semantic
    problems; use :func:`validate_graph` for diagnostics.
    """

    n_vertices: int
    dims: tuple[int, ...]
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        dims = self.dims
        if isinstance(dims, int):
            dims = (dims,) * self.n_vertices
        object.__setattr__(self, "dims", tuple(int(d) for d in dims))
        canon = [e if isinstance(e, Edge) and e.u <= e.v else Edge.make(*e) for e in self.edges]
        canon.sort(key=lambda e: e.key)
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def keys(self) -> tuple[EdgeKey, ...]:
        return tuple(e.key for e in self.edges)

    @property
    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.edges], dtype=complex)

    def with_weights(self, weights: Sequence[complex]) -> "Graph":
        if len(weights) != len(self.edges):
            raise ValueError(f"expected {len(self.edges)} weights, got {len(weights)}")
        edges = tuple(e._replace(weight=_clean_number(w)) for e, w in zip(self.edges, weights))
        return Graph(self.n_vertices, self.dims, edges)

    def without(self, key: EdgeKey) -> "Graph":
        return Graph(self.n_vertices, self.dims, tuple(e for e in self.edges if e.key != key))

    def __len__(self):
        return len(self.edges)


def _clean_number(w) -> complex | float:
    w = complex(w)
    return w.real if w.imag == 0.0 else w


@dataclass(frozen=True)
class StateVector:
    """Sparse, possibly unnormalized, state over ``len(dims)`` vertices."""

    dims: tuple[int, ...]
    amplitudes: Mapping[Ket, complex] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        amps = {tuple(int(m) for m in k): complex(a) for k, a in self.amplitudes.items()}
        for ket in amps:
            if len(ket) != len(self.dims) or any(m < 0 or m >= d for m, d in zip(ket, self.dims)):
                raise ValueError(f"ket {ket} does not fit dims {self.dims}")
        object.__setattr__(self, "amplitudes", dict(sorted(amps.items())))

    @property
    def n_vertices(self) -> int:
        return len(self.dims)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalized(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise GraphError("cannot normalize a zero state")
        return StateVector(self.dims, {k: a / nrm for k, a in self.amplitudes.items()})

    def pruned(self, tol: float = ZERO_TOL) -> "StateVector":
        return StateVector(self.dims, {k: a for k, a in self.amplitudes.items() if abs(a) >= tol})

    def __len__(self):
        return len(self.amplitudes)


def validate_graph(graph: Graph) -> list[str]:
    """Return human-readable violations; an empty list means the graph is valid."""
    problems = []
    n = graph.n_vertices
    if n <= 0:
        problems.append(f"vertex count must be positive, got {n}")
    elif n % 2:
        problems.append(f"odd vertex count {n}: no perfect matching exists")
    if len(graph.dims) != n:
        problems.append(f"dims has {len(graph.dims)} entries for {n} vertices")
    for i, d in enumerate(graph.dims):
        if d < 2:
            problems.append(f"vertex {i}: dimension {d} < 2")
    seen = set()
    for e in graph.edges:
        if e.u == e.v:
            problems.append(f"self-loop at vertex {e.u}")
            continue
        if not (0 <= e.u < n and 0 <= e.v < n):
            problems.append(f"edge {e.key}: endpoint out of range [0, {n})")
            continue
        for vertex, color in ((e.u, e.color_u), (e.v, e.color_v)):
            if vertex < len(graph.dims) and not 0 <= color < graph.dims[vertex]:
                problems.append(
                    f"edge {e.key}: color out of range, {color} not in [0, {graph.dims[vertex]})"
                )
        if e.key in seen:
            problems.append(f"duplicate edge {e.key}")
        seen.add(e.key)
    return problems


def _vertex_pairings(vertices: tuple[int, ...], allowed) -> Iterable[list[tuple[int, int]]]:
    """Yield pairings of ``vertices`` (sorted) using only allowed pairs, in lexicographic order."""
    if not vertices:
        yield []
        return
    first, rest = vertices[0], vertices[1:]
    for i, partner in enumerate(rest):
        if (first, partner) not in allowed:
            continue
        remaining = rest[:i] + rest[i + 1:]
        for tail in _vertex_pairings(remaining, allowed):
            yield [(first, partner)] + tail


class Topology:
    """Perfect matchings of a fixed colored topology, stored as index arrays.

    Enumeration depends only on the edge keys and dims, so one instance serves
    every weight assignment during optimization.

    Attributes
    ----------
    keys : tuple of EdgeKey
        Sorted edge keys; weight vectors are indexed in this order.
    matchings : ndarray, shape (n_matchings, n_vertices // 2), int
        Edge indices of every perfect matching, lexicographically ordered.
    kets : ndarray, shape (n_kets, n_vertices), int
        Distinct kets reached by at least one matching, sorted.
    ket_of : ndarray, shape (n_matchings,), int
        Row of ``kets`` produced by each matching.
    """

    def __init__(self, keys: Sequence[EdgeKey], n_vertices: int, dims: Sequence[int]):
        self.keys = tuple(sorted(tuple(int(x) for x in k) for k in keys))
        self.n_vertices = int(n_vertices)
        self.dims = tuple(int(d) for d in dims)
        if self.n_vertices % 2:
            raise GraphError(f"odd vertex count {self.n_vertices}: no perfect matchings possible")
        self.index = {k: i for i, k in enumerate(self.keys)}

        by_pair: dict[tuple[int, int], list[int]] = {}
        for i, (u, v, _, _) in enumerate(self.keys):
            by_pair.setdefault((u, v), []).append(i)
        pair_edges = {p: np.array(ix, dtype=np.int32) for p, ix in by_pair.items()}

        half = self.n_vertices // 2
        blocks = []
        for pairing in _vertex_pairings(tuple(range(self.n_vertices)), pair_edges):
            choices = [pair_edges[p] for p in pairing]
            grid = np.meshgrid(*choices, indexing="ij")
            blocks.append(np.stack([g.ravel() for g in grid], axis=1))
        if blocks:
            self.matchings = np.concatenate(blocks).astype(np.int32)
        else:
            self.matchings = np.zeros((0, half), dtype=np.int32)

        arr = np.array(self.keys, dtype=np.int32).reshape(-1, 4)
        n_m = len(self.matchings)
        kets = np.zeros((n_m, self.n_vertices), dtype=np.int32)
        if n_m:
            rows = np.repeat(np.arange(n_m), half)
            flat = self.matchings.ravel()
            kets[rows, arr[flat, 0]] = arr[flat, 2]
            kets[rows, arr[flat, 1]] = arr[flat, 3]
            self.kets, self.ket_of = np.unique(kets, axis=0, return_inverse=True)
            self.ket_of = self.ket_of.ravel()
        else:
            self.kets = kets
            self.ket_of = np.zeros(0, dtype=np.int64)

    @property
    def n_matchings(self) -> int:
        return len(self.matchings)

    @property
    def n_kets(self) -> int:
        return len(self.kets)

    def amplitudes(self, weights: np.ndarray) -> np.ndarray:
        """Coherent sum over matchings, one amplitude per row of ``kets``."""
        terms = np.prod(np.asarray(weights)[self.matchings], axis=1)
        if np.iscomplexobj(terms):
            return (np.bincount(self.ket_of, terms.real, self.n_kets)
                    + 1j * np.bincount(self.ket_of, terms.imag, self.n_kets))
        return np.bincount(self.ket_of, terms, self.n_kets)

    def leave_one_out(self, weights: np.ndarray) -> np.ndarray:
        """Product of all other edge weights in each matching, per matching slot.

        Uses prefix/suffix products so zero weights are handled exactly.
        """
        w = np.asarray(weights)[self.matchings]
        n_m, k = w.shape
        out = np.ones_like(w)
        prefix = np.ones(n_m, dtype=w.dtype)
        for j in range(k):
            out[:, j] = prefix
            prefix = prefix * w[:, j]
        suffix = np.ones(n_m, dtype=w.dtype)
        for j in range(k - 1, -1, -1):
            out[:, j] *= suffix
            suffix = suffix * w[:, j]
        return out

    def pullback(self, coeffs: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Return ``sum_k coeffs[k] * d amplitude_k / d weight_e`` for every edge ``e``.

        Amplitudes are holomorphic in the weights, so this is the complex
        derivative contracted with ``coeffs``.
        """
        loo = self.leave_one_out(weights)
        contrib = np.asarray(coeffs)[self.ket_of][:, None] * loo
        flat_idx = self.matchings.ravel()
        n_e = len(self.keys)
        if np.iscomplexobj(contrib):
            return (np.bincount(flat_idx, contrib.real.ravel(), n_e)
                    + 1j * np.bincount(flat_idx, contrib.imag.ravel(), n_e))
        return np.bincount(flat_idx, contrib.ravel(), n_e)

    def ket_tuples(self) -> list[Ket]:
        return [tuple(int(m) for m in row) for row in self.kets]


@functools.lru_cache(maxsize=128)
def _cached_topology(keys: tuple[EdgeKey, ...], n_vertices: int, dims: tuple[int, ...]) -> Topology:
    return Topology(keys, n_vertices, dims)


def compile_topology(graph: Graph) -> Topology:
    """Cached :class:`Topology` for the edge keys of ``graph`` (weights ignored)."""
    return _cached_topology(graph.keys, graph.n_vertices, graph.dims)


def enumerate_matchings(graph: Graph) -> list[tuple[Edge, ...]]:
    """All perfect matchings of ``graph``, each as a tuple of edges sorted by key.

    Parallel edges between the same vertex pair are distinct branch choices.
    An odd vertex count yields an empty list.
    """
    if graph.n_vertices % 2:
        return []
    topo = Topology(graph.keys, graph.n_vertices, graph.dims)
    return [tuple(graph.edges[i] for i in row) for row in topo.matchings]


def count_colored_matchings(n_vertices: int, pair_multiplicity) -> int:
    """Number of perfect matchings without enumerating them.

    ``pair_multiplicity(u, v)`` gives how many parallel edges join ``u < v``.
    Memoized over the set of still-uncovered vertices.
    """
    if n_vertices % 2:
        return 0

    @functools.lru_cache(maxsize=None)
    def count(mask: int) -> int:
        if mask == 0:
            return 1
        first = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << first)
        total = 0
        v = rest
        while v:
            low = v & -v
            partner = low.bit_length() - 1
            mult = pair_multiplicity(first, partner)
            if mult:
                total += mult * count(rest & ~low)
            v &= ~low
        return total

    return count((1 << n_vertices) - 1)


def state_from_graph(graph: Graph) -> StateVector:
    """Post-selected (unnormalized) state of ``graph``.

    Raises
    ------
    GraphError
        If the vertex count is odd.
    """
    if graph.n_vertices % 2:
        raise GraphError(f"odd vertex count {graph.n_vertices}: no perfect matchings possible")
    topo = compile_topology(graph)
    amps = topo.amplitudes(graph.weights)
    return StateVector(
        graph.dims,
        {ket: complex(a) for ket, a in zip(topo.ket_tuples(), amps) if abs(a) >= ZERO_TOL},
    )
