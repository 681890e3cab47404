"""Balanced r-partite graphs: data model, generators, sparsification, file I/O.

Vertices carry global 0-based ids and part i of an r-partite graph with part
size n occupies the contiguous id range [i*n, (i+1)*n). Adjacency is stored as
one int bitmask per vertex, so neighbourhood intersections — the hot path of
clique search — are single big-int AND operations.
"""

from __future__ import annotations

import math
from itertools import combinations
from pathlib import Path
from typing import NamedTuple

from ._num import fceil
from .errors import FileFormatError
from .rng import RandomSeed, as_seed


class PartiteGraph:
    """A balanced r-partite graph on r*n vertices. Immutable once built."""

    __slots__ = ("r", "n", "adj", "_part_masks")

    def __init__(self, r: int, n: int, edges=()):
        if r < 2:
            raise ValueError("need at least two parts")
        if n < 1:
            raise ValueError("part size must be positive")
        self.r = int(r)
        self.n = int(n)
        self._part_masks = tuple(((1 << n) - 1) << (i * n) for i in range(self.r))
        masks = [0] * (self.r * self.n)
        for e in edges:
            u, v = e
            self._check_edge(u, v)
            masks[u] |= 1 << v
            masks[v] |= 1 << u
        self.adj = tuple(masks)

    def _check_edge(self, u: int, v: int):
        total = self.r * self.n
        if not (0 <= u < total and 0 <= v < total):
            raise ValueError(f"edge ({u}, {v}): vertex id out of range")
        if u // self.n == v // self.n:
            raise ValueError(f"edge ({u}, {v}): endpoints in the same part")

    @classmethod
    def from_masks(cls, r: int, n: int, masks) -> "PartiteGraph":
        """Adopt prebuilt adjacency masks (caller guarantees symmetry/partiteness)."""
        g = cls.__new__(cls)
        g.r = int(r)
        g.n = int(n)
        g.adj = tuple(masks)
        g._part_masks = tuple(((1 << n) - 1) << (i * n) for i in range(r))
        return g

    @classmethod
    def complete(cls, r: int, n: int) -> "PartiteGraph":
        """The complete balanced r-partite graph (every cross-part pair joined)."""
        if r < 2 or n < 1:
            raise ValueError("need r >= 2 and n >= 1")
        universe = (1 << (r * n)) - 1
        pm = [((1 << n) - 1) << (i * n) for i in range(r)]
        masks = [universe ^ pm[v // n] for v in range(r * n)]
        return cls.from_masks(r, n, masks)

    @property
    def vertex_count(self) -> int:
        return self.r * self.n

    def part_of(self, v: int) -> int:
        return v // self.n

    def part_range(self, i: int) -> range:
        return range(i * self.n, (i + 1) * self.n)

    def part_mask(self, i: int) -> int:
        return self._part_masks[i]

    def has_edge(self, u: int, v: int) -> bool:
        return (self.adj[u] >> v) & 1 == 1

    def degree(self, v: int, part: int | None = None) -> int:
        m = self.adj[v]
        if part is not None:
            m &= self._part_masks[part]
        return m.bit_count()

    def edges(self):
        """Yield edges (u, v) with u < v in lexicographic order."""
        for u in range(self.vertex_count - 1):
            rest = self.adj[u] >> (u + 1)
            v = u + 1
            while rest:
                low = rest & -rest
                yield (u, v + low.bit_length() - 1)
                rest ^= low
        # note: shifting keeps only neighbours above u, so each edge appears once

    def edge_count(self) -> int:
        return sum(m.bit_count() for m in self.adj) // 2

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PartiteGraph)
            and self.r == other.r
            and self.n == other.n
            and self.adj == other.adj
        )

    def __repr__(self) -> str:
        return f"PartiteGraph(r={self.r}, n={self.n}, edges={self.edge_count()})"


def min_star_degree(g: PartiteGraph) -> int:
    """Minimum, over ordered part pairs (i, j) and v in part i, of deg(v -> part j)."""
    best = g.n
    for j in range(g.r):
        pm = g.part_mask(j)
        for v in range(g.vertex_count):
            if v // g.n == j:
                continue
            d = (g.adj[v] & pm).bit_count()
            if d < best:
                if d == 0:
                    return 0
                best = d
    return best


def sparsify(g: PartiteGraph, p: float, seed: RandomSeed | int) -> PartiteGraph:
    """Keep every edge independently with probability p; vertices are untouched."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p == 1.0:
        return PartiteGraph.from_masks(g.r, g.n, g.adj)
    masks = [0] * g.vertex_count
    if p > 0.0:
        gen = as_seed(seed).generator()
        coins = gen.random(g.edge_count()) < p
        for keep, (u, v) in zip(coins, g.edges()):
            if keep:
                masks[u] |= 1 << v
                masks[v] |= 1 << u
    return PartiteGraph.from_masks(g.r, g.n, masks)


def split_rounds(p: float, rounds: int) -> float:
    """Per-round probability p' with union of `rounds` independent p'-copies ~ one p-copy.

    Solves 1 - (1-p')**rounds = p.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if not isinstance(rounds, int) or rounds < 1:
        raise ValueError("rounds must be a positive integer")
    if rounds == 1:
        return float(p)
    return 1.0 - (1.0 - p) ** (1.0 / rounds)


class ThresholdParams(NamedTuple):
    r: int
    n: int
    C: float


class ThresholdResult(NamedTuple):
    p: float
    clamped: bool


def threshold_p(params: ThresholdParams) -> ThresholdResult:
    """Sparsification probability C * n^(-2/r) * (log n)^(1/C(r,2)), clamped to 1."""
    r, n, c = params.r, params.n, params.C
    if r < 2:
        raise ValueError("need r >= 2")
    if n < 1:
        raise ValueError("need n >= 1")
    if c < 0:
        raise ValueError("C must be nonnegative")
    raw = c * n ** (-2.0 / r) * math.log(n) ** (1.0 / math.comb(r, 2))
    if raw > 1.0:
        return ThresholdResult(1.0, True)
    return ThresholdResult(raw, False)


def gen_min_degree_instance(
    r: int, n: int, gamma: float, edge_keep: float, seed: RandomSeed | int
) -> PartiteGraph:
    """Random instance with every cross-part degree >= ceil((1 - 1/r + gamma) * n).

    Starts complete and removes a uniformly random sequence of edges, skipping
    any removal that would push an endpoint below the degree floor, until
    roughly a (1 - edge_keep) fraction of each pair's edges is gone or the
    floor binds. Skips are permanent-safe: degrees only decrease, so an edge
    blocked once stays blocked.
    """
    if r < 2 or n < 1:
        raise ValueError("need r >= 2 and n >= 1")
    if not 0.0 < edge_keep <= 1.0:
        raise ValueError("edge_keep must lie in (0, 1]")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    floor = fceil((1.0 - 1.0 / r + gamma) * n)
    if floor > n:
        raise ValueError(f"gamma={gamma} infeasible: degree floor {floor} exceeds part size {n}")
    base = as_seed(seed)
    universe = (1 << (r * n)) - 1
    pm = [((1 << n) - 1) << (i * n) for i in range(r)]
    masks = [universe ^ pm[v // n] for v in range(r * n)]
    deg = [[n] * r for _ in range(r * n)]
    for rank, (i, j) in enumerate(combinations(range(r), 2)):
        total = n * n
        remove_target = total - round(edge_keep * total)
        if remove_target <= 0:
            continue
        gen = base.substream(rank).generator()
        removed = 0
        for t in gen.permutation(total):
            if removed >= remove_target:
                break
            t = int(t)
            u = i * n + t // n
            v = j * n + t % n
            if deg[u][j] <= floor or deg[v][i] <= floor:
                continue
            masks[u] &= ~(1 << v)
            masks[v] &= ~(1 << u)
            deg[u][j] -= 1
            deg[v][i] -= 1
            removed += 1
    g = PartiteGraph.from_masks(r, n, masks)
    assert min_star_degree(g) >= floor
    return g


class WitnessInstance(NamedTuple):
    graph: "PartiteGraph"
    vertex: int
    missing_part: int


def gen_no_factor_witness(r: int, n: int, seed: RandomSeed | int) -> WitnessInstance:
    """Complete graph minus one vertex's attachment to one foreign part.

    The named vertex sits in no transversal clique, so no factor exists while
    the rest of the graph stays as dense as possible.
    """
    if r < 2 or n < 1:
        raise ValueError("need r >= 2 and n >= 1")
    gen = as_seed(seed).generator()
    v = int(gen.integers(0, r * n))
    foreign = [j for j in range(r) if j != v // n]
    j = foreign[int(gen.integers(0, len(foreign)))]
    g = PartiteGraph.complete(r, n)
    masks = list(g.adj)
    masks[v] &= ~g.part_mask(j)
    for u in g.part_range(j):
        masks[u] &= ~(1 << v)
    return WitnessInstance(PartiteGraph.from_masks(r, n, masks), v, j)


def random_balanced_partition(
    vertex_count: int, r: int, seed: RandomSeed | int
) -> tuple[tuple[int, ...], ...]:
    """Uniformly random partition of range(vertex_count) into r equal classes."""
    if r < 1:
        raise ValueError("need r >= 1")
    if vertex_count % r != 0:
        raise ValueError(f"vertex count {vertex_count} not divisible by r={r}")
    gen = as_seed(seed).generator()
    perm = gen.permutation(vertex_count)
    size = vertex_count // r
    return tuple(
        tuple(sorted(int(x) for x in perm[c * size : (c + 1) * size])) for c in range(r)
    )


def write_graph_file(g: PartiteGraph, path):
    """Plain-text graph: header line 'r n', then one 'u v' edge per line."""
    lines = [f"{g.r} {g.n}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph_file(path) -> PartiteGraph:
    """Parse a graph file written by write_graph_file; '#' lines are comments."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    header = None
    edges = []
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise FileFormatError(f"{path}, line {num}: expected two integers")
        try:
            a, b = int(fields[0]), int(fields[1])
        except ValueError as exc:
            raise FileFormatError(f"{path}, line {num}: {exc}") from exc
        if header is None:
            header = (a, b)
        else:
            edges.append((a, b))
    if header is None:
        raise FileFormatError(f"{path}: empty graph file")
    try:
        return PartiteGraph(header[0], header[1], edges)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
