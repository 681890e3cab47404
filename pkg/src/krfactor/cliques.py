"""Transversal clique enumeration on partite graphs.

A transversal clique picks one vertex per part, pairwise adjacent. Cliques are
reported as ascending id tuples, which (parts being contiguous ascending
ranges) is the same as ascending part order, and enumeration order is
lexicographic.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from ._num import bit_indices
from .errors import BudgetExceededError
from .graphs import PartiteGraph


def _clique_stream(g: PartiteGraph, allowed):
    """Yield transversal cliques lexicographically; allowed[i] restricts part i."""
    r = g.r
    adj = g.adj
    members = [0] * r

    def rec(depth: int, common: int):
        cand = common & allowed[depth]
        if depth == r - 1:
            for v in bit_indices(cand):
                members[depth] = v
                yield tuple(members)
            return
        for v in bit_indices(cand):
            members[depth] = v
            yield from rec(depth + 1, common & adj[v])

    return rec(0, (1 << g.vertex_count) - 1)


@dataclass(frozen=True)
class CliqueFamily:
    """An ordered, duplicate-free collection of transversal cliques of `host`."""

    host: PartiteGraph
    cliques: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "cliques", tuple(tuple(K) for K in self.cliques))
        g = self.host
        seen = set()
        for K in self.cliques:
            if len(K) != g.r:
                raise ValueError(f"clique {K}: expected {g.r} vertices")
            for slot, v in enumerate(K):
                if not 0 <= v < g.vertex_count:
                    raise ValueError(f"clique {K}: vertex {v} out of range")
                if g.part_of(v) != slot:
                    raise ValueError(f"clique {K}: not one vertex per part in order")
            for a, b in combinations(K, 2):
                if not g.has_edge(a, b):
                    raise ValueError(f"clique {K}: missing edge ({a}, {b})")
            if K in seen:
                raise ValueError(f"duplicate clique {K}")
            seen.add(K)

    def __len__(self) -> int:
        return len(self.cliques)

    def __iter__(self):
        return iter(self.cliques)

    def __getitem__(self, idx):
        return self.cliques[idx]


def enumerate_kr(g: PartiteGraph, *, max_cliques: int | None = None) -> CliqueFamily:
    """All transversal cliques of g, lexicographically ordered."""
    out = []
    for K in _clique_stream(g, [g.part_mask(i) for i in range(g.r)]):
        out.append(K)
        if max_cliques is not None and len(out) > max_cliques:
            raise BudgetExceededError(
                f"more than {max_cliques} cliques; raise max_cliques or use sampling"
            )
    return CliqueFamily(g, tuple(out))


def rooted_cliques(g: PartiteGraph, v: int, *, max_cliques: int | None = None) -> CliqueFamily:
    """The transversal cliques through vertex v, in enumeration order."""
    if not 0 <= v < g.vertex_count:
        raise ValueError(f"vertex {v} out of range")
    allowed = [g.part_mask(i) for i in range(g.r)]
    allowed[g.part_of(v)] = 1 << v
    out = []
    for K in _clique_stream(g, allowed):
        out.append(K)
        if max_cliques is not None and len(out) > max_cliques:
            raise BudgetExceededError(
                f"more than {max_cliques} rooted cliques; raise max_cliques"
            )
    return CliqueFamily(g, tuple(out))


def count_kr_induced(g: PartiteGraph, subsets) -> int:
    """Number of transversal cliques with the part-i vertex drawn from subsets[i]."""
    subsets = list(subsets)
    if len(subsets) != g.r:
        raise ValueError(f"expected {g.r} subsets, got {len(subsets)}")
    allowed = []
    for i, xs in enumerate(subsets):
        m = 0
        for v in xs:
            v = int(v)
            if not 0 <= v < g.vertex_count:
                raise ValueError(f"subset {i}: vertex {v} out of range")
            if g.part_of(v) != i:
                raise ValueError(f"subset {i}: vertex {v} belongs to part {g.part_of(v)}")
            m |= 1 << v
        allowed.append(m)
    return sum(1 for _ in _clique_stream(g, allowed))
