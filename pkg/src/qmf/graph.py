"""Rooted trees and the finite-region combinatorics used by the rest of the package.

Vertices of a rooted tree are coordinate paths: the root is ``()`` and the
``i``-th successor of ``x`` is ``x + (i,)``.  The canonical vertex order is
``(level, path)`` and is the tensor-leg order used throughout :mod:`qmf.algebra`.

:class:`Graph` is a plain undirected graph, kept only so that non-tree inputs
(e.g. a 4-cycle) can be fed to the same checks and shown to fail.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Hashable, Iterable, Sequence

Vertex = tuple
ROOT: Vertex = ()


class GraphError(ValueError):
    """Invalid graph construction or query."""


class TruncationError(GraphError):
    """A query needs vertices beyond the stored depth of a truncated tree."""


class NotATreeError(GraphError):
    """Raised when a boundary vertex has more than one neighbour in a region."""


def canonical_key(v: Hashable):
    if isinstance(v, tuple):
        return (len(v), v)
    return (0, (v,))


def canonical_order(vertices: Iterable[Hashable]) -> tuple:
    return tuple(sorted(set(vertices), key=canonical_key))


@dataclass(frozen=True)
class Graph:
    """Finite undirected graph with an optional set of truncated vertices.

    ``frontier`` holds vertices that have neighbours which are not stored; any
    boundary computation touching them raises :class:`TruncationError`.
    """

    vertices: tuple
    edges: frozenset
    frontier: frozenset = frozenset()
    _adj: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        adj = {v: set() for v in self.vertices}
        for e in self.edges:
            u, v = tuple(e)
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "_adj", {v: frozenset(n) for v, n in adj.items()})

    @classmethod
    def from_edges(cls, edges: Iterable[Sequence[Hashable]], vertices=None) -> "Graph":
        es = set()
        vs = set(vertices or ())
        for u, v in edges:
            if u == v:
                raise GraphError(f"self-loop at {u!r}")
            es.add(frozenset((u, v)))
            vs.update((u, v))
        return cls(canonical_order(vs), frozenset(es))

    def neighbors(self, x) -> frozenset:
        try:
            return self._adj[x]
        except KeyError:
            raise GraphError(f"unknown vertex {x!r}") from None

    def adjacent(self, x, y) -> bool:
        return y in self.neighbors(x)

    def internal_edges(self, region: Iterable) -> list[tuple]:
        """Edges with both ends in ``region``, each as a canonically ordered pair."""
        r = set(region)
        out = []
        for e in self.edges:
            u, v = sorted(e, key=canonical_key)
            if u in r and v in r:
                out.append((u, v))
        return sorted(out, key=lambda p: (canonical_key(p[0]), canonical_key(p[1])))

    def _check_region(self, region) -> set:
        r = set(region)
        missing = r.difference(self._adj)
        if missing:
            raise GraphError(f"vertices not in graph: {sorted(missing, key=canonical_key)}")
        return r

    def boundary(self, region: Iterable) -> tuple:
        r = self._check_region(region)
        cut = r & self.frontier
        if cut:
            raise TruncationError(
                f"boundary of region reaches past the stored depth at {canonical_order(cut)}"
            )
        out = set()
        for x in r:
            out |= self._adj[x]
        return canonical_order(out - r)

    def closure(self, region: Iterable) -> tuple:
        r = self._check_region(region)
        return canonical_order(r | set(self.boundary(r)))

    def is_connected(self, region: Iterable) -> bool:
        r = self._check_region(region)
        if not r:
            return False
        start = next(iter(r))
        seen = {start}
        todo = [start]
        while todo:
            x = todo.pop()
            for y in self._adj[x]:
                if y in r and y not in seen:
                    seen.add(y)
                    todo.append(y)
        return seen == r

    def dist(self, x, y) -> int:
        self.neighbors(x)
        self.neighbors(y)
        seen = {x: 0}
        q = deque([x])
        while q:
            u = q.popleft()
            if u == y:
                return seen[u]
            for w in self._adj[u]:
                if w not in seen:
                    seen[w] = seen[u] + 1
                    q.append(w)
        raise GraphError(f"{x!r} and {y!r} are not connected")

    def check_tree_property(self, region: Iterable) -> dict:
        """Map each external boundary vertex to its unique neighbour inside ``region``."""
        r = self._check_region(region)
        if not self.is_connected(r):
            raise GraphError("region must be non-empty and connected")
        out = {}
        for x in self.boundary(r):
            inside = [y for y in self._adj[x] if y in r]
            if len(inside) != 1:
                raise NotATreeError(
                    f"boundary vertex {x!r} has {len(inside)} neighbours in the region"
                )
            out[x] = inside[0]
        return out


@dataclass(frozen=True)
class Tree(Graph):
    """Rooted tree with coordinate-path vertices, stored up to ``depth``.

    ``k`` is the order for Cayley trees and ``None`` for trees built from edges.
    """

    k: int | None = None
    depth: int = 0
    labels: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        super().__post_init__()
        if len(self.edges) != len(self.vertices) - 1 or not self.is_connected(self.vertices):
            raise NotATreeError("edge list does not describe a tree")

    @property
    def root(self) -> Vertex:
        return ROOT

    def level(self, x: Vertex) -> int:
        self.neighbors(x)
        return len(x)

    def parent(self, x: Vertex) -> Vertex:
        if x == ROOT:
            raise GraphError("the root has no parent")
        return x[:-1]

    def successors(self, x: Vertex) -> tuple:
        if x in self.frontier:
            raise TruncationError(f"successors of {x!r} lie beyond the stored depth")
        return tuple(y for y in canonical_order(self.neighbors(x)) if len(y) == len(x) + 1)

    def levels(self, n: int) -> tuple[tuple, tuple]:
        """Return ``(W_n, Lambda_n)``: the sphere and the ball of radius ``n`` about the root."""
        if n < 0:
            raise GraphError("level must be non-negative")
        if n > self.depth:
            raise TruncationError(f"level {n} exceeds stored depth {self.depth}")
        sphere = tuple(v for v in self.vertices if len(v) == n)
        ball = tuple(v for v in self.vertices if len(v) <= n)
        return sphere, ball

    def sphere(self, n: int) -> tuple:
        return self.levels(n)[0]

    def ball(self, n: int) -> tuple:
        return self.levels(n)[1]

    def dist(self, x, y) -> int:
        self.neighbors(x)
        self.neighbors(y)
        m = 0
        while m < min(len(x), len(y)) and x[m] == y[m]:
            m += 1
        return len(x) + len(y) - 2 * m

    def connected_hull(self, region: Iterable) -> tuple:
        """Smallest connected vertex set containing ``region`` (union of tree paths)."""
        r = self._check_region(region)
        if not r:
            raise GraphError("empty region")
        # all paths pass through the longest common prefix of the region
        top = min(r, key=len)
        for v in r:
            m = 0
            while m < min(len(top), len(v)) and top[m] == v[m]:
                m += 1
            top = top[:m]
        hull = set()
        for v in r:
            while len(v) >= len(top):
                hull.add(v)
                if len(v) == len(top):
                    break
                v = v[:-1]
        return canonical_order(hull)

    def subtree(self, x: Vertex, depth: int) -> tuple:
        """Descendants of ``x`` (inclusive) at most ``depth`` levels below it."""
        if len(x) + depth > self.depth:
            raise TruncationError("subtree extends beyond stored depth")
        return tuple(v for v in self.vertices if v[: len(x)] == x and len(v) - len(x) <= depth)


def build_cayley(k: int, depth: int) -> Tree:
    """Semi-infinite Cayley tree of order ``k`` truncated at ``depth``."""
    if not isinstance(k, int) or k < 1:
        raise GraphError(f"order k must be a positive integer, got {k!r}")
    if not isinstance(depth, int) or depth < 0:
        raise GraphError(f"depth must be a non-negative integer, got {depth!r}")
    vertices = [ROOT]
    for n in range(1, depth + 1):
        vertices.extend(product(range(1, k + 1), repeat=n))
    edges = frozenset(frozenset((v[:-1], v)) for v in vertices if v)
    frontier = frozenset(v for v in vertices if len(v) == depth)
    return Tree(canonical_order(vertices), edges, frontier, k=k, depth=depth)


def path_tree(n_vertices: int) -> Tree:
    """Finite path ``v0 - v1 - ... `` rooted at ``v0`` (no truncation frontier)."""
    if n_vertices < 1:
        raise GraphError("a path needs at least one vertex")
    vertices = [(1,) * m for m in range(n_vertices)]
    edges = frozenset(frozenset((v[:-1], v)) for v in vertices if v)
    return Tree(canonical_order(vertices), edges, frozenset(), k=None, depth=n_vertices - 1)


def tree_from_edges(edges: Iterable[Sequence[Hashable]], root: Hashable) -> Tree:
    """Root an explicit edge list at ``root`` and relabel vertices by BFS coordinates.

    Children of each vertex are numbered ``1..m`` in canonical order of their
    original labels. The original label of each vertex is kept in ``labels``.
    """
    g = Graph.from_edges(edges, vertices=[root])
    if len(g.edges) != len(g.vertices) - 1 or not g.is_connected(g.vertices):
        raise NotATreeError("edge list does not describe a tree")
    labels = {ROOT: root}
    new = {root: ROOT}
    q = deque([root])
    while q:
        u = q.popleft()
        kids = [w for w in canonical_order(g.neighbors(u)) if w not in new]
        for i, w in enumerate(kids, start=1):
            new[w] = new[u] + (i,)
            labels[new[w]] = w
            q.append(w)
    vertices = canonical_order(new.values())
    tedges = frozenset(frozenset((v[:-1], v)) for v in vertices if v)
    depth = max(len(v) for v in vertices)
    return Tree(vertices, tedges, frozenset(), k=None, depth=depth, labels=labels)


def shift_vertex(i: int, x: Vertex, k: int | None = None) -> Vertex:
    """Shift ``x`` into the ``i``-th subtree: ``(i1, ..., in) -> (i, i1, ..., in)``."""
    if not isinstance(i, int) or i < 1 or (k is not None and i > k):
        raise GraphError(f"shift index {i!r} out of range")
    return (i,) + tuple(x)


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges([(j, (j + 1) % n) for j in range(n)])


def connected_subsets(graph: Graph, max_size: int) -> list[tuple]:
    """All connected vertex subsets of size ``1..max_size`` (brute-force enumeration)."""
    found = set()
    frontier = {frozenset([v]) for v in graph.vertices}
    found |= frontier
    for _ in range(max_size - 1):
        nxt = set()
        for s in frontier:
            for x in s:
                for y in graph.neighbors(x):
                    if y not in s:
                        nxt.add(s | {y})
        nxt -= found
        found |= nxt
        frontier = nxt
    return sorted((canonical_order(s) for s in found), key=lambda s: (len(s), [canonical_key(v) for v in s]))
