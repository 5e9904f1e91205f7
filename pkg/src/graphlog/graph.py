"""Finite weighted graphs with vertex measure and potentials.

Vertices are dense integers ``0..n-1``; the ids found in an input file are
kept in :attr:`GraphInstance.ids` so reports can name the original vertex.
Edges are unweighted and undirected.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, UnknownVertex, ValidationError

__all__ = [
    "GraphInstance",
    "HypothesisReport",
    "load_graph",
    "save_graph",
    "graph_to_dict",
    "graph_from_dict",
    "ball",
    "distances",
    "check_hypotheses",
    "path_graph",
    "ring_graph",
    "complete_graph",
    "random_connected_graph",
]


def _frozen_array(values, n, name):
    arr = np.array(np.broadcast_to(np.asarray(values, dtype=float), (n,)))
    arr.setflags(write=False)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValidationError(f"{name} is not finite at vertex {bad}")
    return arr


@dataclass(frozen=True, eq=False)
class GraphInstance:
    """Immutable connected simple graph with per-vertex ``mu``, ``a``, ``b``."""

    adjacency: tuple[tuple[int, ...], ...]
    mu: np.ndarray
    a: np.ndarray
    b: np.ndarray
    ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        n = len(self.adjacency)
        if n == 0:
            raise ValidationError("graph has no vertices")
        adjacency = tuple(tuple(sorted(int(y) for y in nbrs)) for nbrs in self.adjacency)
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "mu", _frozen_array(self.mu, n, "mu"))
        object.__setattr__(self, "a", _frozen_array(self.a, n, "a"))
        object.__setattr__(self, "b", _frozen_array(self.b, n, "b"))
        ids = tuple(int(i) for i in self.ids) if self.ids else tuple(range(n))
        if len(ids) != n or len(set(ids)) != n:
            raise ValidationError("ids must be distinct and one per vertex")
        object.__setattr__(self, "ids", ids)
        self._validate()

    def _validate(self):
        n = self.n
        for x, nbrs in enumerate(self.adjacency):
            if len(set(nbrs)) != len(nbrs):
                raise ValidationError(f"duplicate edge at vertex {self.ids[x]}")
            for y in nbrs:
                if not 0 <= y < n:
                    raise ValidationError(f"vertex {self.ids[x]} has unknown neighbor {y}")
                if y == x:
                    raise ValidationError(f"self-loop at vertex {self.ids[x]}")
                if x not in self.adjacency[y]:
                    raise ValidationError(
                        f"asymmetric adjacency: edge ({self.ids[x]}, {self.ids[y]}) "
                        f"has no reverse"
                    )
        bad = np.flatnonzero(self.mu <= 0)
        if bad.size:
            raise ValidationError(f"mu must be positive; vertex {self.ids[bad[0]]} has mu={self.mu[bad[0]]}")
        reached = distances(self, 0) >= 0
        if not reached.all():
            x = int(np.flatnonzero(~reached)[0])
            raise ValidationError(f"graph is disconnected: vertex {self.ids[x]} unreachable from {self.ids[0]}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], mu=1.0, a=1.0, b=1.0, ids=()):
        """Build from ``n`` dense vertices and an undirected edge list."""
        nbrs: list[list[int]] = [[] for _ in range(n)]
        seen = set()
        for e in edges:
            x, y = int(e[0]), int(e[1])
            if x == y:
                raise ValidationError(f"self-loop at vertex {ids[x] if ids else x}")
            if not (0 <= x < n and 0 <= y < n):
                raise ValidationError(f"edge ({x}, {y}) references an unknown vertex")
            key = (min(x, y), max(x, y))
            if key in seen:
                raise ValidationError(f"duplicate edge {key}")
            seen.add(key)
            nbrs[x].append(y)
            nbrs[y].append(x)
        return cls(tuple(tuple(s) for s in nbrs), mu, a, b, ids)

    def replace(self, **kw) -> "GraphInstance":
        """Copy with some of ``mu``, ``a``, ``b`` swapped out."""
        args = dict(adjacency=self.adjacency, mu=self.mu, a=self.a, b=self.b, ids=self.ids)
        args.update(kw)
        return GraphInstance(**args)

    @property
    def n(self) -> int:
        return len(self.adjacency)

    @property
    def vertices(self) -> range:
        return range(self.n)

    @cached_property
    def degree(self) -> np.ndarray:
        return np.array([len(s) for s in self.adjacency], dtype=int)

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint arrays ``(i, j)`` with ``i < j``, one entry per edge."""
        pairs = [(x, y) for x, nbrs in enumerate(self.adjacency) for y in nbrs if x < y]
        arr = np.array(pairs, dtype=np.intp).reshape(-1, 2)
        return arr[:, 0].copy(), arr[:, 1].copy()

    @property
    def mu_min(self) -> float:
        return float(self.mu.min())

    def index(self, original_id: int) -> int:
        try:
            return self.ids.index(int(original_id))
        except ValueError:
            raise UnknownVertex(f"unknown vertex id {original_id}") from None

    def check_vertex(self, x) -> int:
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, (int, np.integer)) or not 0 <= x < self.n:
            raise UnknownVertex(f"unknown vertex {x!r}")
        return int(x)

    def mask(self, vertex_set) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        for x in vertex_set:
            m[self.check_vertex(x)] = True
        return m

    def boundary(self, vertex_set) -> frozenset[int]:
        """Vertices outside ``vertex_set`` adjacent to it."""
        inside = self.mask(vertex_set)
        return frozenset(
            y for x in np.flatnonzero(inside) for y in self.adjacency[x] if not inside[y]
        )

    def __eq__(self, other):
        if not isinstance(other, GraphInstance):
            return NotImplemented
        return (
            self.adjacency == other.adjacency
            and self.ids == other.ids
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
        )

    __hash__ = object.__hash__

    def __repr__(self):
        return f"GraphInstance(n={self.n}, edges={len(self.edges[0])})"


# --------------------------------------------------------------------------
# serialization

def graph_to_dict(g: GraphInstance) -> dict:
    ei, ej = g.edges
    return {
        "vertices": [
            {"id": g.ids[x], "mu": float(g.mu[x]), "a": float(g.a[x]), "b": float(g.b[x])}
            for x in g.vertices
        ],
        "edges": [[g.ids[i], g.ids[j]] for i, j in zip(ei.tolist(), ej.tolist())],
    }


def graph_from_dict(data) -> GraphInstance:
    if not isinstance(data, dict) or "vertices" not in data:
        raise ParseError("graph JSON must be an object with a 'vertices' list")
    try:
        records = [
            (int(v["id"]), float(v["mu"]), float(v.get("a", 1.0)), float(v.get("b", 1.0)))
            for v in data["vertices"]
        ]
        raw_edges = [(int(e[0]), int(e[1])) for e in data.get("edges", [])]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"malformed graph record: {exc}") from exc
    records.sort(key=lambda r: r[0])
    ids = [r[0] for r in records]
    if any(i < 0 for i in ids):
        raise ValidationError("vertex ids must be nonnegative")
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise ValidationError(f"duplicate vertex id {dup}")
    pos = {vid: k for k, vid in enumerate(ids)}
    edges = []
    for x, y in raw_edges:
        if x == y:
            raise ValidationError(f"self-loop at vertex {x}")
        if x not in pos or y not in pos:
            raise ValidationError(f"edge ({x}, {y}) references an unknown vertex")
        edges.append((pos[x], pos[y]))
    nbrs: list[list[int]] = [[] for _ in ids]
    seen = set()
    for (x, y), (ox, oy) in zip(edges, raw_edges):
        key = (min(x, y), max(x, y))
        if key in seen:
            raise ValidationError(f"duplicate edge ({ox}, {oy})")
        seen.add(key)
        nbrs[x].append(y)
        nbrs[y].append(x)
    return GraphInstance(
        tuple(tuple(s) for s in nbrs),
        mu=[r[1] for r in records],
        a=[r[2] for r in records],
        b=[r[3] for r in records],
        ids=ids,
    )


def load_graph(path) -> GraphInstance:
    """Read and validate a graph JSON file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return graph_from_dict(data)


def save_graph(g: GraphInstance, path) -> None:
    # json writes floats with repr(), the shortest exact round-trip form
    Path(path).write_text(json.dumps(graph_to_dict(g)), encoding="utf-8")


# --------------------------------------------------------------------------
# metric

def distances(g: GraphInstance, source: int) -> np.ndarray:
    """Breadth-first path distance from ``source``; -1 marks unreachable."""
    dist = np.full(g.n, -1, dtype=int)
    dist[source] = 0
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for y in g.adjacency[x]:
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def ball(g: GraphInstance, center: int, r: int) -> frozenset[int]:
    """Closed ball ``{x : d(center, x) <= r}``."""
    center = g.check_vertex(center)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    dist = distances(g, center)
    return frozenset(np.flatnonzero((dist >= 0) & (dist <= r)).tolist())


# --------------------------------------------------------------------------
# potential-well hypotheses

@dataclass(frozen=True)
class HypothesisReport:
    v0: float
    a1_holds: bool
    sublevel_volumes: dict
    inverse_potential_tails: tuple[float, float]
    omega_a: frozenset
    omega_b: frozenset


def _sublevel_volume(g, pot, m):
    return math.fsum(g.mu[pot <= m].tolist())


def _inverse_tail(g, pot, m0):
    sel = pot > m0
    return math.fsum((g.mu[sel] / pot[sel]).tolist())


def check_hypotheses(g: GraphInstance, m_values=(), m0: float = 1.0) -> HypothesisReport:
    """Numeric quantities behind the coercivity hypotheses on ``a`` and ``b``.

    On a finite graph every sublevel set has finite volume, so the report
    only surfaces the numbers; ``a1_holds`` is the one genuine check.
    """
    v0 = float(min(g.a.min(), g.b.min()))
    volumes = {
        float(m): (_sublevel_volume(g, g.a, m), _sublevel_volume(g, g.b, m)) for m in m_values
    }
    return HypothesisReport(
        v0=v0,
        a1_holds=v0 > 0,
        sublevel_volumes=volumes,
        inverse_potential_tails=(_inverse_tail(g, g.a, m0), _inverse_tail(g, g.b, m0)),
        omega_a=frozenset(np.flatnonzero(g.a == 0).tolist()),
        omega_b=frozenset(np.flatnonzero(g.b == 0).tolist()),
    )


# --------------------------------------------------------------------------
# generators

def path_graph(n: int, **kw) -> GraphInstance:
    return GraphInstance.from_edges(n, [(k, k + 1) for k in range(n - 1)], **kw)


def ring_graph(n: int, **kw) -> GraphInstance:
    if n < 3:
        raise ValidationError("a ring needs at least 3 vertices")
    return GraphInstance.from_edges(n, [(k, (k + 1) % n) for k in range(n)], **kw)


def complete_graph(n: int, **kw) -> GraphInstance:
    return GraphInstance.from_edges(n, [(x, y) for x in range(n) for y in range(x + 1, n)], **kw)


def random_connected_graph(
    n: int,
    rng: np.random.Generator,
    extra_edge_prob: float = 0.3,
    mu_range=(0.5, 2.0),
    a_range=(0.5, 3.0),
    b_range=(0.5, 3.0),
) -> GraphInstance:
    """Random spanning tree plus independent extra edges, uniform potentials."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        edges.add((min(order[k], parent), max(order[k], parent)))
    for x in range(n):
        for y in range(x + 1, n):
            if (x, y) not in edges and rng.random() < extra_edge_prob:
                edges.add((x, y))
    return GraphInstance.from_edges(
        n,
        sorted(edges),
        mu=rng.uniform(*mu_range, size=n),
        a=rng.uniform(*a_range, size=n),
        b=rng.uniform(*b_range, size=n),
    )
