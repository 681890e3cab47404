"""Exact clique-factor search: decision, counting, optimization, sampling.

A factor is a set of vertex-disjoint transversal cliques covering every
vertex. Decision/counting reduce to exact cover over the vertex set with one
row per clique; "no factor" answers always come from the exhaustive search.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

from ._num import bit_indices
from .cliques import _clique_stream
from .errors import BudgetExceededError, FileFormatError
from .exact_cover import ExactCover
from .graphs import PartiteGraph
from .rng import RandomSeed, as_seed, randbelow

DEFAULT_ROW_BUDGET = 5_000_000


def _validate_clique(g: PartiteGraph, K):
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


def _clique_mask(K) -> int:
    m = 0
    for v in K:
        m |= 1 << v
    return m


@dataclass(frozen=True)
class Tiling:
    """Pairwise vertex-disjoint transversal cliques of `host`."""

    host: PartiteGraph
    cliques: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "cliques", tuple(tuple(K) for K in self.cliques))
        covered = 0
        for K in self.cliques:
            _validate_clique(self.host, K)
            m = _clique_mask(K)
            if covered & m:
                raise ValueError(f"clique {K} overlaps another clique")
            covered |= m
        object.__setattr__(self, "covered_mask", covered)

    def __len__(self) -> int:
        return len(self.cliques)


@dataclass(frozen=True)
class Factor(Tiling):
    """A tiling covering every vertex of the host."""

    def __post_init__(self):
        super().__post_init__()
        if self.covered_mask != (1 << self.host.vertex_count) - 1:
            missing = next(
                v
                for v in range(self.host.vertex_count)
                if not (self.covered_mask >> v) & 1
            )
            raise ValueError(f"not a factor: vertex {missing} uncovered")


def _full_allowed(g: PartiteGraph):
    return [g.part_mask(i) for i in range(g.r)]


def _first_clique_at(g: PartiteGraph, v: int, allowed):
    pinned = list(allowed)
    pinned[g.part_of(v)] = 1 << v
    for K in _clique_stream(g, pinned):
        return K
    return None


def _greedy_cover(g: PartiteGraph, allowed):
    """Cover the union of `allowed` greedily; None on the first dead end."""
    free = list(allowed)
    total = 0
    for m in free:
        total |= m
    out = []
    while total:
        v = (total & -total).bit_length() - 1
        K = _first_clique_at(g, v, free)
        if K is None:
            return None
        out.append(K)
        for u in K:
            free[g.part_of(u)] &= ~(1 << u)
            total &= ~(1 << u)
    return out


def _clique_rows(g: PartiteGraph, allowed, max_rows: int):
    rows = []
    for K in _clique_stream(g, allowed):
        rows.append(K)
        if len(rows) > max_rows:
            raise BudgetExceededError(
                f"clique row budget exceeded ({max_rows}); raise max_rows "
                "or switch to sampled estimates"
            )
    return rows


def _build_cover(g: PartiteGraph, allowed, max_rows: int):
    """Exact-cover instance over the vertices in `allowed`; None if hopeless."""
    rows = _clique_rows(g, allowed, max_rows)
    target = 0
    for m in allowed:
        target |= m
    covered = 0
    for K in rows:
        covered |= _clique_mask(K)
    if covered != target:
        return None
    col_of = {v: idx for idx, v in enumerate(bit_indices(target))}
    # near-uniform instances branch better when scarce rows come first
    rows.sort(key=lambda K: (sum(g.degree(v) for v in K), K))
    dlx = ExactCover(len(col_of))
    for idx, K in enumerate(rows):
        dlx.add_row(idx, [col_of[v] for v in K])
    return dlx, rows


def find_factor(g: PartiteGraph, *, max_rows: int = DEFAULT_ROW_BUDGET):
    """First clique factor of g, or None if none exists.

    A cheap greedy cover is tried first; when it dead-ends, the exhaustive
    exact-cover search (branching on the most constrained vertex) decides,
    so a None answer is certified by complete search.
    """
    greedy = _greedy_cover(g, _full_allowed(g))
    if greedy is not None:
        return Factor(g, tuple(sorted(greedy)))
    built = _build_cover(g, _full_allowed(g), max_rows)
    if built is None:
        return None
    dlx, rows = built
    sol = dlx.first_solution()
    if sol is None:
        return None
    return Factor(g, tuple(sorted(rows[i] for i in sol)))


def solve_restricted(g: PartiteGraph, allowed, *, max_rows: int = DEFAULT_ROW_BUDGET):
    """Exact cover of exactly the vertices in `allowed` (one mask per part).

    Returns a tuple of cliques or None. Same guarantees as find_factor.
    """
    if len(allowed) != g.r:
        raise ValueError(f"expected {g.r} masks")
    for i, m in enumerate(allowed):
        if m & ~g.part_mask(i):
            raise ValueError(f"allowed[{i}] leaves part {i}")
    if all(m == 0 for m in allowed):
        return ()
    greedy = _greedy_cover(g, allowed)
    if greedy is not None:
        return tuple(sorted(greedy))
    built = _build_cover(g, list(allowed), max_rows)
    if built is None:
        return None
    dlx, rows = built
    sol = dlx.first_solution()
    if sol is None:
        return None
    return tuple(sorted(rows[i] for i in sol))


def count_factors(g: PartiteGraph, *, max_rows: int = DEFAULT_ROW_BUDGET) -> int:
    """Exact number of clique factors of g."""
    built = _build_cover(g, _full_allowed(g), max_rows)
    if built is None:
        return 0
    dlx, _ = built
    return dlx.count_solutions()


def max_tiling(g: PartiteGraph, *, max_rows: int = DEFAULT_ROW_BUDGET) -> Tiling:
    """A maximum-size tiling, by branch and bound over the clique rows.

    Branches on the lowest uncovered vertex (cover it with each candidate
    clique, or leave it uncovered) and prunes with the per-part count bound.
    """
    rows = _clique_rows(g, _full_allowed(g), max_rows)
    universe = (1 << g.vertex_count) - 1
    masks = [_clique_mask(K) for K in rows]
    by_vertex: list[list[int]] = [[] for _ in range(g.vertex_count)]
    for idx, K in enumerate(rows):
        for v in K:
            by_vertex[v].append(idx)

    best: list[int] = []
    free0 = universe
    for idx, m in enumerate(masks):  # greedy seed keeps the bound tight early
        if m & free0 == m:
            best.append(idx)
            free0 &= ~m

    pmasks = [g.part_mask(i) for i in range(g.r)]

    def search(free: int, chosen: list[int]):
        nonlocal best
        if len(chosen) > len(best):
            best = list(chosen)
        if not free:
            return
        bound = min((free & pm).bit_count() for pm in pmasks)
        if len(chosen) + bound <= len(best):
            return
        v = (free & -free).bit_length() - 1
        for idx in by_vertex[v]:
            m = masks[idx]
            if m & free == m:
                chosen.append(idx)
                search(free & ~m, chosen)
                chosen.pop()
        search(free & ~(1 << v), chosen)

    search(universe, [])
    return Tiling(g, tuple(sorted(rows[i] for i in best)))


def sample_factor_uniform(
    g: PartiteGraph, seed: RandomSeed | int, *, max_rows: int = DEFAULT_ROW_BUDGET
):
    """An exactly uniform random factor of g.

    Memoizes the factor count of every reachable residual vertex set and walks
    down proportionally to the counts. Meant for small hosts; the clique row
    budget is the guard. Raises ValueError when no factor exists.
    """
    rows = _clique_rows(g, _full_allowed(g), max_rows)
    by_vertex: list[list[tuple[int, tuple[int, ...]]]] = [[] for _ in range(g.vertex_count)]
    for K in rows:
        m = _clique_mask(K)
        for v in K:
            by_vertex[v].append((m, K))
    memo = {0: 1}

    def count_ext(free: int) -> int:
        val = memo.get(free)
        if val is not None:
            return val
        v = (free & -free).bit_length() - 1
        total = 0
        for m, _ in by_vertex[v]:
            if m & free == m:
                total += count_ext(free & ~m)
        memo[free] = total
        return total

    universe = (1 << g.vertex_count) - 1
    total = count_ext(universe)
    if total == 0:
        raise ValueError("graph has no factor to sample")
    gen = as_seed(seed).generator()
    out = []
    free = universe
    while free:
        v = (free & -free).bit_length() - 1
        x = randbelow(gen, count_ext(free))
        for m, K in by_vertex[v]:
            if m & free == m:
                c = count_ext(free & ~m)
                if x < c:
                    out.append(K)
                    free &= ~m
                    break
                x -= c
        else:
            raise RuntimeError("internal: counting walk left the support")
    return Factor(g, tuple(sorted(out)))


@dataclass(frozen=True)
class SpreadEstimate:
    """Worst-case q-spread profile of the uniform distribution over factors.

    values[s] = (max over clique s-subsets S of Pr[S ⊆ random factor]) ** (1/s).
    """

    mode: str
    values: dict[int, float]
    sample_count: int


def estimate_spread(
    g: PartiteGraph,
    max_subset: int,
    mode: str = "exact",
    seed: RandomSeed | int = 0,
    *,
    samples: int = 2000,
    max_rows: int = DEFAULT_ROW_BUDGET,
    max_factors: int = 200_000,
) -> SpreadEstimate:
    """Spread profile of the uniform factor distribution, exact or sampled."""
    if max_subset < 1:
        raise ValueError("max_subset must be at least 1")
    if mode == "exact":
        built = _build_cover(g, _full_allowed(g), max_rows)
        if built is None:
            raise ValueError("graph has no factor")
        dlx, rows = built
        factor_sets = []
        for sol in dlx.solutions():
            factor_sets.append(tuple(sorted(rows[i] for i in sol)))
            if len(factor_sets) > max_factors:
                raise BudgetExceededError(
                    f"more than {max_factors} factors; use mode='sampled'"
                )
        if not factor_sets:
            raise ValueError("graph has no factor")
    elif mode == "sampled":
        if samples < 1:
            raise ValueError("samples must be positive")
        base = as_seed(seed)
        factor_sets = [
            sample_factor_uniform(g, base.substream(t), max_rows=max_rows).cliques
            for t in range(samples)
        ]
    else:
        raise ValueError("mode must be 'exact' or 'sampled'")
    total = len(factor_sets)
    values: dict[int, float] = {}
    for s in range(1, min(max_subset, g.n) + 1):
        counter: Counter = Counter()
        for F in factor_sets:
            for S in combinations(F, s):
                counter[S] += 1
        values[s] = (max(counter.values()) / total) ** (1.0 / s)
    return SpreadEstimate(mode, values, total)


def verify_factor(g: PartiteGraph, cliques) -> tuple[bool, str]:
    """Independent factor check; returns (ok, reason), reason empty on success."""
    seen = set()
    for K in cliques:
        K = tuple(int(v) for v in K)
        if len(K) != g.r:
            return False, f"clique {K}: expected {g.r} vertices"
        parts = []
        for v in K:
            if not 0 <= v < g.vertex_count:
                return False, f"clique {K}: vertex {v} out of range"
            parts.append(g.part_of(v))
        if parts != list(range(g.r)):
            return False, f"clique {K}: not one vertex per part"
        for a, b in combinations(K, 2):
            if not g.has_edge(a, b):
                return False, f"clique {K}: missing edge ({a}, {b})"
        for v in K:
            if v in seen:
                return False, f"vertex {v} covered twice"
            seen.add(v)
    if len(seen) != g.vertex_count:
        missing = next(v for v in range(g.vertex_count) if v not in seen)
        return False, f"vertex {missing} not covered"
    return True, ""


def write_factor_certificate(cliques, path):
    """One clique per line, vertex ids space-separated, cliques sorted."""
    lines = [" ".join(str(v) for v in K) for K in sorted(tuple(K) for K in cliques)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_factor_certificate(path) -> tuple[tuple[int, ...], ...]:
    """Parse a factor certificate; structural checks happen in verify_factor."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    out = []
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(tuple(int(x) for x in line.split()))
        except ValueError as exc:
            raise FileFormatError(f"{path}, line {num}: {exc}") from exc
    return tuple(out)
