"""Directed Green-node networks: generators, edge-list ingestion, adjacency."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .rng import SeedTree


class GraphError(ValueError):
    pass


class InvalidParams(GraphError):
    def __init__(self, param: str, reason: str):
        self.param = param
        super().__init__(f"invalid generator parameter {param!r}: {reason}")


class EdgeListError(GraphError):
    kind = "edge list error"

    def __init__(self, line: int, detail: str = ""):
        self.line = line
        msg = f"{self.kind} at line {line}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class ParseError(EdgeListError):
    kind = "parse error"


class SelfLoop(EdgeListError):
    kind = "self-loop"


class IdOutOfRange(EdgeListError):
    kind = "node id out of range"


class GraphKind(str, Enum):
    COMPLETE = "complete"
    ERDOS_RENYI = "erdos_renyi"
    BARABASI_ALBERT = "barabasi_albert"
    WATTS_STROGATZ = "watts_strogatz"


@dataclass(frozen=True)
class OpinionNetwork:
    """Immutable directed graph on nodes 0..n-1.

    An edge (u, v) means u influences v. Edges are kept sorted by
    (source, target), which fixes every iteration order downstream.
    ``labels`` holds the original node names when ids were remapped at load.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    labels: tuple[str, ...] | None = None
    _out: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("network needs at least one node")
        canon = tuple(sorted(set(self.edges)))
        if len(canon) != len(self.edges):
            raise GraphError("duplicate directed edges")
        out: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in canon:
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) outside 0..{self.n - 1}")
            out[u].append(v)
        if self.labels is not None and len(self.labels) != self.n:
            raise GraphError("labels must name every node")
        object.__setattr__(self, "edges", canon)
        object.__setattr__(self, "_out", tuple(tuple(t) for t in out))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def out_neighbors(self, i: int) -> tuple[int, ...]:
        return self._out[i]

    def component_count(self) -> int:
        """Weakly connected components."""
        parent = list(range(self.n))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for u, v in self.edges:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
        return sum(1 for i in range(self.n) if find(i) == i)

    def to_edge_list(self) -> str:
        return "".join(f"{u},{v}\n" for u, v in self.edges)


def out_neighbors(net: OpinionNetwork, i: int) -> tuple[int, ...]:
    return net.out_neighbors(i)


def _reciprocal(n: int, pairs) -> OpinionNetwork:
    edges = set()
    for a, b in pairs:
        edges.add((a, b))
        edges.add((b, a))
    return OpinionNetwork(n, tuple(edges))


_PARAMS = {
    GraphKind.COMPLETE: set(),
    GraphKind.ERDOS_RENYI: {"p"},
    GraphKind.BARABASI_ALBERT: {"m"},
    GraphKind.WATTS_STROGATZ: {"k", "beta"},
}


def generate_graph(kind: GraphKind | str, n: int, seed: int = 0, **params) -> OpinionNetwork:
    """Build a network with reciprocal edge pairs from an undirected random model.

    Parameters per kind: erdos_renyi ``p``; barabasi_albert ``m``;
    watts_strogatz ``k`` (even) and ``beta``. Draws come from the substream
    ``graph.<kind>`` of ``seed``.
    """
    try:
        kind = GraphKind(kind)
    except ValueError:
        raise InvalidParams("kind", f"unknown graph kind {kind!r}") from None
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise InvalidParams("n", f"need an integer >= 2, got {n!r}")
    unknown = set(params) - _PARAMS[kind]
    if unknown:
        raise InvalidParams(sorted(unknown)[0], f"not a parameter of {kind.value}")
    missing = _PARAMS[kind] - set(params)
    if missing:
        raise InvalidParams(sorted(missing)[0], f"required by {kind.value}")

    stream = SeedTree(seed).stream(f"graph.{kind.value}")

    if kind is GraphKind.COMPLETE:
        return _reciprocal(n, ((i, j) for i in range(n) for j in range(i + 1, n)))

    if kind is GraphKind.ERDOS_RENYI:
        p = _real_param("p", params["p"], 0.0, 1.0)
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        draws = stream.random_block(len(pairs))
        return _reciprocal(n, (pr for pr, u in zip(pairs, draws) if u < p))

    if kind is GraphKind.BARABASI_ALBERT:
        m = params["m"]
        if not isinstance(m, int) or isinstance(m, bool) or not 1 <= m <= n - 1:
            raise InvalidParams("m", f"need an integer in [1, {n - 1}], got {m!r}")
        return _reciprocal(n, _barabasi_albert_pairs(n, m, stream))

    k = params["k"]
    if not isinstance(k, int) or isinstance(k, bool) or k < 0 or k % 2 or k >= n:
        raise InvalidParams("k", f"need an even integer in [0, {n - 1}], got {k!r}")
    beta = _real_param("beta", params["beta"], 0.0, 1.0)
    return _reciprocal(n, _watts_strogatz_pairs(n, k, beta, stream))


def _real_param(name: str, value, lo: float, hi: float) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidParams(name, f"need a number, got {value!r}")
    value = float(value)
    if not (math.isfinite(value) and lo <= value <= hi):
        raise InvalidParams(name, f"need a value in [{lo}, {hi}], got {value}")
    return value


def _barabasi_albert_pairs(n: int, m: int, stream):
    # seed clique on m+1 nodes, then each newcomer attaches to m distinct
    # existing nodes drawn proportionally to degree
    pairs = [(i, j) for i in range(m + 1) for j in range(i + 1, m + 1)]
    ends = [v for pr in pairs for v in pr]
    for new in range(m + 1, n):
        chosen: list[int] = []
        while len(chosen) < m:
            t = ends[stream.below(len(ends))]
            if t not in chosen:
                chosen.append(t)
        for t in chosen:
            pairs.append((t, new))
            ends.extend((t, new))
    return pairs


def _watts_strogatz_pairs(n: int, k: int, beta: float, stream):
    adj = [set() for _ in range(n)]
    for i in range(n):
        for j in range(1, k // 2 + 1):
            t = (i + j) % n
            adj[i].add(t)
            adj[t].add(i)
    # rewire the far end of each lattice edge (i, i+j) with probability beta
    for j in range(1, k // 2 + 1):
        for i in range(n):
            t = (i + j) % n
            if stream.random() >= beta or t not in adj[i]:
                continue
            if len(adj[i]) >= n - 1:
                continue
            w = stream.below(n)
            while w == i or w in adj[i]:
                w = stream.below(n)
            adj[i].discard(t)
            adj[t].discard(i)
            adj[i].add(w)
            adj[w].add(i)
    return [(i, j) for i in range(n) for j in adj[i] if i < j]


def load_edge_list(
    text: str, n: int | None = None, remap: bool = False
) -> tuple[OpinionNetwork, int]:
    """Parse ``source,target`` lines into a network.

    Returns the network and the number of duplicate lines that were dropped.
    With ``remap`` the endpoints may be arbitrary labels; they get dense ids in
    order of first appearance and the labels are kept on the network.
    """
    ids: dict[str, int] = {}
    seen: set[tuple[int, int]] = set()
    duplicates = 0
    max_id = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 or not all(parts):
            raise ParseError(lineno, f"expected 'source,target', got {raw!r}")
        if remap:
            u, v = (ids.setdefault(p, len(ids)) for p in parts)
        else:
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(lineno, f"non-integer node id in {raw!r}") from None
            if u < 0 or v < 0:
                raise ParseError(lineno, f"negative node id in {raw!r}")
        if u == v:
            raise SelfLoop(lineno, f"node {parts[0]}")
        if n is not None and not remap and max(u, v) >= n:
            raise IdOutOfRange(lineno, f"{max(u, v)} >= n={n}")
        if (u, v) in seen:
            duplicates += 1
            continue
        seen.add((u, v))
        max_id = max(max_id, u, v)

    labels = None
    if remap:
        labels = tuple(ids)
        size = len(ids)
        if n is not None:
            if size > n:
                raise IdOutOfRange(0, f"{size} distinct labels exceed n={n}")
            labels = labels + tuple(f"_unlabelled{i}" for i in range(size, n))
            size = n
    else:
        size = n if n is not None else max_id + 1
    if size < 1:
        raise GraphError("edge list is empty and no node count was given")
    return OpinionNetwork(size, tuple(seen), labels), duplicates
