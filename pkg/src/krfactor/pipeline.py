"""Three-round clique-factor pipeline on partitioned instances.

Round 1 covers the exceptional vertices with cliques revealed at the
per-round probability inside the exceptional-plus-reserve pool. Round 2
computes integer clique weights on the reduced cluster graph and extracts
that many disjoint cliques per cluster tuple from a fresh sparsification,
drawing replacements from the reserve, so every cluster shrinks to a common
residue target. Round 3 finishes each cluster tuple with an exact factor
search on a third sparsification. The union is verified against the host.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from itertools import combinations

from ._num import bit_indices, ffloor
from .cliques import _clique_stream
from .errors import BalanceError, BalanceTuplesError, BudgetExceededError, CoverError
from .graphs import PartiteGraph, min_star_degree, split_rounds, sparsify
from .regularity import PartitionedInstance, build_reduced_graph, residual_instance
from .rng import as_seed, randbelow
from .solver import (
    DEFAULT_ROW_BUDGET,
    Tiling,
    find_factor,
    solve_restricted,
    verify_factor,
)


class _EdgeReveal:
    """Per-edge Bernoulli survival coins, drawn on first inspection, memoized."""

    def __init__(self, p: float, seed):
        self.p = float(p)
        self._gen = as_seed(seed).generator()
        self._memo: dict[tuple[int, int], bool] = {}

    def edge_alive(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        hit = self._memo.get((u, v))
        if hit is None:
            if self.p >= 1.0:
                hit = True
            elif self.p <= 0.0:
                hit = False
            else:
                hit = float(self._gen.random()) < self.p
            self._memo[(u, v)] = hit
        return hit

    def clique_alive(self, K) -> bool:
        return all(self.edge_alive(a, b) for a, b in combinations(K, 2))


def _mask_of(ids) -> int:
    m = 0
    for v in ids:
        m |= 1 << v
    return m


@dataclass(frozen=True)
class CoverResult:
    tiling: Tiling
    quota_usage: tuple[int, ...]
    warnings: tuple[str, ...]


def cover_exceptional(
    g: PartiteGraph,
    roots,
    mu: float,
    quotas,
    seed,
    *,
    p: float = 1.0,
    allowed: int | None = None,
):
    """Place one surviving clique on each root, respecting quota sets.

    Candidates for a root are the lexicographically first floor(mu * N^(r-1))
    transversal cliques through it inside `allowed` (N = |allowed|), chosen
    before any reveal. Candidates touching already-used vertices, later
    roots, or saturated quota sets are discarded; the first remaining
    candidate whose edges all survive the p-reveal is taken. A quota set
    saturates once its usage exceeds 4*r*mu*|X_s| - 1 (slightly stricter than
    the exact threshold when it is fractional), which caps final usage at
    4*r*mu*|X_s| + r - 2.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    roots = [int(v) for v in roots]
    if len(set(roots)) != len(roots):
        raise ValueError("roots must be distinct")
    for v in roots:
        if not 0 <= v < g.vertex_count:
            raise ValueError(f"root {v} out of range")
    universe = (1 << g.vertex_count) - 1
    allowed = universe if allowed is None else int(allowed)
    for v in roots:
        if not (allowed >> v) & 1:
            raise ValueError(f"root {v} outside the allowed set")
    qmasks = []
    qsizes = []
    taken = 0
    root_mask = _mask_of(roots)
    for s, xs in enumerate(quotas):
        m = _mask_of(int(v) for v in xs)
        if m & root_mask:
            raise ValueError(f"quota set {s} contains a root")
        if m & taken:
            raise ValueError(f"quota set {s} overlaps another quota set")
        taken |= m
        qmasks.append(m)
        qsizes.append(m.bit_count())
    bigN = allowed.bit_count()
    warnings: list[str] = []
    cap = ffloor(mu * bigN ** (g.r - 1))
    if cap < 1:
        warnings.append(f"candidate cap {cap} < 1; clamped to 1")
        cap = 1
    if len(roots) > mu * mu * bigN + 1e-9:
        warnings.append(
            f"{len(roots)} roots exceeds mu^2 * N = {mu * mu * bigN:.3f}"
        )
    thresholds = [4 * g.r * mu * sz for sz in qsizes]
    usage = [0] * len(qmasks)
    saturated = 0
    for s, thr in enumerate(thresholds):
        if 0 > thr - 1:
            saturated |= qmasks[s]
    suffix = [0] * (len(roots) + 1)
    for idx in range(len(roots) - 1, -1, -1):
        suffix[idx] = suffix[idx + 1] | (1 << roots[idx])
    reveal = _EdgeReveal(p, seed)
    used = 0
    chosen = []
    for idx, v in enumerate(roots):
        part_allowed = [allowed & g.part_mask(i) for i in range(g.r)]
        part_allowed[g.part_of(v)] = 1 << v
        cand = []
        for K in _clique_stream(g, part_allowed):
            cand.append(K)
            if len(cand) >= cap:
                break
        if len(cand) < cap:
            warnings.append(f"root {v}: only {len(cand)} candidates (cap {cap})")
        blocked = used | suffix[idx + 1] | saturated
        survivors = [K for K in cand if not _mask_of(K) & blocked]
        pick = None
        for K in survivors:
            if reveal.clique_alive(K):
                pick = K
                break
        if pick is None:
            raise CoverError(v, len(survivors))
        chosen.append(pick)
        km = _mask_of(pick)
        used |= km
        for s, qm in enumerate(qmasks):
            inc = (km & qm).bit_count()
            if inc:
                usage[s] += inc
                if usage[s] > thresholds[s] - 1:
                    saturated |= qm
    for s, u in enumerate(usage):
        if u > thresholds[s] + g.r - 2 + 1e-9:
            raise RuntimeError(f"internal: quota set {s} over budget ({u})")
    return CoverResult(Tiling(g, tuple(sorted(chosen))), tuple(usage), tuple(warnings))


@dataclass(frozen=True)
class WeightAssignment:
    """Integer clique weights omega with sum_{K ∋ v} omega(K) = lam(v)."""

    reduced: PartiteGraph
    lam: tuple[int, ...]
    omega: dict
    checks: dict

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(int(x) for x in self.lam))
        if len(self.lam) != self.reduced.vertex_count:
            raise ValueError("lam must assign every reduced-graph vertex")
        implied = [0] * self.reduced.vertex_count
        for K, w in self.omega.items():
            if w < 0:
                raise ValueError(f"omega[{K}] negative")
            for slot, v in enumerate(K):
                if self.reduced.part_of(v) != slot:
                    raise ValueError(f"omega key {K} is not in part order")
            for a, b in combinations(K, 2):
                if not self.reduced.has_edge(a, b):
                    raise ValueError(f"omega key {K}: missing edge ({a}, {b})")
            for v in K:
                implied[v] += w
        if list(self.lam) != implied:
            raise ValueError("omega does not realize lam")


def balance_weights(
    reduced: PartiteGraph,
    lam,
    gamma: float,
    *,
    max_rows: int = DEFAULT_ROW_BUDGET,
) -> WeightAssignment:
    """Clique weights on the reduced graph meeting per-vertex totals `lam`.

    Builds the blow-up with lam(v) copies of each vertex and projects one of
    its factors down. Hypothesis diagnostics (lambda within (1 ± gamma/4) of
    the mean, reduced min star degree) are recorded in `checks` and included
    in the failure message, but only structural impossibilities and a failed
    blow-up search raise.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    lam = [int(x) for x in lam]
    if len(lam) != reduced.vertex_count:
        raise ValueError(
            f"lam must list {reduced.vertex_count} values, got {len(lam)}"
        )
    if any(x < 0 for x in lam):
        raise ValueError("lam values must be nonnegative")
    k = reduced.n
    part_sums = [sum(lam[i * k : (i + 1) * k]) for i in range(reduced.r)]
    mean = sum(lam) / len(lam)
    checks = {
        "part_sums_equal": len(set(part_sums)) == 1,
        "lambda_in_range": all(
            (1 - gamma / 4) * mean - 1e-9 <= x <= (1 + gamma / 4) * mean + 1e-9
            for x in lam
        ),
        "min_star_degree_ok": min_star_degree(reduced)
        >= (1 - 1 / reduced.r + gamma / 2) * k - 1e-9,
    }
    if not checks["part_sums_equal"]:
        raise BalanceError(f"lambda part sums differ: {part_sums}", checks)
    big_n = part_sums[0]
    if big_n == 0:
        return WeightAssignment(reduced, tuple(lam), {}, checks)
    # blow-up: lam(v) fresh copies of v, blocks joined iff the originals are
    starts = [0] * reduced.vertex_count
    owner = [0] * (reduced.r * big_n)
    pos = 0
    for i in range(reduced.r):
        pos = i * big_n
        for v in range(i * k, (i + 1) * k):
            starts[v] = pos
            for _ in range(lam[v]):
                owner[pos] = v
                pos += 1
    block_mask = [((1 << lam[v]) - 1) << starts[v] for v in range(reduced.vertex_count)]
    nbr_mask = [0] * reduced.vertex_count
    for v in range(reduced.vertex_count):
        m = 0
        for u in bit_indices(reduced.adj[v]):
            m |= block_mask[u]
        nbr_mask[v] = m
    masks = [nbr_mask[owner[u]] for u in range(reduced.r * big_n)]
    blowup = PartiteGraph.from_masks(reduced.r, big_n, masks)
    factor = find_factor(blowup, max_rows=max_rows)
    if factor is None:
        raise BalanceError("the weight blow-up has no factor", checks)
    omega: dict[tuple[int, ...], int] = {}
    for K in factor.cliques:
        key = tuple(owner[u] for u in K)
        omega[key] = omega.get(key, 0) + 1
    return WeightAssignment(reduced, tuple(lam), omega, checks)


def balance_tuples(
    g_round: PartiteGraph,
    instance: PartitionedInstance,
    omega,
    target: int,
    seed,
    *,
    max_rows: int = DEFAULT_ROW_BUDGET,
) -> Tiling:
    """Extract omega(K) disjoint present cliques per cluster tuple K.

    Picks only reserve-pool vertices, so after removal every cluster holds
    exactly `target` vertices. Each copy is a uniformly random choice among
    the currently available present cliques; if the random greedy pass
    strands a tuple, an exhaustive disjoint-set search over its candidates
    decides before failing.
    """
    if target < 0:
        raise ValueError("target must be nonnegative")
    if instance.reserved is None:
        raise ValueError("instance has no reserved pool to draw from")
    k = instance.params.k
    r = g_round.r
    implied = {}
    for K, w in sorted(omega.items()):
        w = int(w)
        if w < 0:
            raise ValueError(f"omega[{K}] negative")
        if len(K) != r:
            raise ValueError(f"omega key {K}: expected {r} clusters")
        for slot, rv in enumerate(K):
            if not slot * k <= rv < (slot + 1) * k:
                raise ValueError(f"omega key {K}: entry {rv} not a part-{slot} cluster")
            implied[rv] = implied.get(rv, 0) + w
    rmask = instance.reserved_mask()
    avail = {}
    for i in range(r):
        for c in range(k):
            rv = i * k + c
            cl = instance.clusters[i][c]
            need = implied.get(rv, 0)
            if len(cl) - need != target:
                raise BalanceTuplesError(
                    f"cluster ({i},{c}): {len(cl)} vertices minus {need} picks "
                    f"leaves {len(cl) - need}, not the target {target}"
                )
            pool = _mask_of(cl) & rmask
            if pool.bit_count() < need:
                raise BalanceTuplesError(
                    f"cluster ({i},{c}): reserve pool {pool.bit_count()} "
                    f"smaller than required picks {need}"
                )
            avail[rv] = pool
    gen = as_seed(seed).generator()
    used = 0
    chosen: list[tuple[int, ...]] = []

    def candidates(K, blocked):
        masks = [avail[K[i]] & ~blocked for i in range(r)]
        out = []
        for cl in _clique_stream(g_round, masks):
            out.append(cl)
            if len(out) > max_rows:
                raise BudgetExceededError(
                    f"tuple {K}: more than {max_rows} candidate cliques"
                )
        return out

    def exact_pick(cand, need):
        cmasks = [_mask_of(cl) for cl in cand]

        def bt(start, left, blocked):
            if left == 0:
                return []
            for idx in range(start, len(cand) - left + 1):
                if cmasks[idx] & blocked:
                    continue
                sub = bt(idx + 1, left - 1, blocked | cmasks[idx])
                if sub is not None:
                    return [cand[idx]] + sub
            return None

        return bt(0, need, 0)

    for K in sorted(omega):
        need = int(omega[K])
        if need == 0:
            continue
        used_before = used
        picks = []
        for _ in range(need):
            cand = candidates(K, used)
            if not cand:
                picks = None
                break
            cl = cand[randbelow(gen, len(cand))]
            picks.append(cl)
            used |= _mask_of(cl)
        if picks is None:
            used = used_before
            fallback = exact_pick(candidates(K, used), need)
            if fallback is None:
                raise BalanceTuplesError(
                    f"could not extract {need} disjoint present cliques for tuple {K}",
                    tuple_key=K,
                )
            picks = fallback
            for cl in picks:
                used |= _mask_of(cl)
        chosen.extend(picks)
    for rv, need in implied.items():
        got = (used & avail[rv]).bit_count()
        if got != need:
            raise RuntimeError(f"internal: cluster {rv} lost {got} vertices, wanted {need}")
    return Tiling(g_round, tuple(sorted(chosen)))


def _reserve_conditions(
    inst: PartitionedInstance, wmask: int, alpha: float
) -> tuple[bool, dict]:
    """Gate + diagnostics for a candidate reserve pool W.

    Gates: per-cluster |W ∩ cluster| within (1/2 ± alpha) * n/k, and every
    exceptional vertex keeps cross-part degree into W ∩ part at least
    (1 - 1/r + gamma/4) of that slice. The per-vertex (1/2 ± 1/4) cluster-
    degree split is tallied as a diagnostic only.
    """
    g = inst.host
    r, n, k = g.r, g.n, inst.params.k
    gamma = inst.params.gamma
    nominal = n / k
    counts = []
    counts_ok = True
    for i in range(r):
        for c in range(k):
            cnt = (inst.cluster_mask(i, c) & wmask).bit_count()
            counts.append(cnt)
            if not (0.5 - alpha) * nominal - 1e-9 <= cnt <= (0.5 + alpha) * nominal + 1e-9:
                counts_ok = False
    degrees_ok = True
    floor_frac = 1 - 1 / r + gamma / 4
    for v in inst.exceptional:
        for i in range(r):
            if i == g.part_of(v):
                continue
            slice_mask = g.part_mask(i) & wmask
            sz = slice_mask.bit_count()
            if (g.adj[v] & slice_mask).bit_count() + 1e-9 < floor_frac * sz:
                degrees_ok = False
                break
        if not degrees_ok:
            break
    split_checked = 0
    split_violations = 0
    eps = inst.params.epsilon
    for v in range(g.vertex_count):
        for i in range(r):
            if i == g.part_of(v):
                continue
            for c in range(k):
                cm = inst.cluster_mask(i, c)
                d_full = (g.adj[v] & cm).bit_count()
                if d_full < eps * cm.bit_count():
                    continue
                split_checked += 1
                d_w = (g.adj[v] & cm & wmask).bit_count()
                if not 0.25 * d_full <= d_w <= 0.75 * d_full:
                    split_violations += 1
    diag = {
        "cluster_counts": counts,
        "cluster_counts_ok": counts_ok,
        "exceptional_degrees_ok": degrees_ok,
        "split_checked": split_checked,
        "split_violations": split_violations,
    }
    return counts_ok and degrees_ok, diag


@dataclass
class PipelineReport:
    success: bool
    failure_stage: str | None
    error: str | None
    params: dict
    stages: dict
    factor: tuple | None = None
    verified: bool = False

    def to_json(self) -> str:
        payload = {
            "format": "pipeline-report",
            "success": self.success,
            "failure_stage": self.failure_stage,
            "error": self.error,
            "params": self.params,
            "stages": self.stages,
            "factor": [list(K) for K in self.factor] if self.factor is not None else None,
            "verified": self.verified,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def run_pipeline(
    instance: PartitionedInstance,
    p: float,
    seed,
    *,
    alpha: float = 0.25,
    mu: float = 0.05,
    w_retries: int = 100,
    samples: int = 300,
    max_rows: int = DEFAULT_ROW_BUDGET,
) -> PipelineReport:
    """Run the three-round construction; never raises on stage failure.

    The returned report carries per-stage diagnostics, the failing stage (if
    any), and on success the verified factor of the host graph.
    """
    g = instance.host
    r, n, k = g.r, g.n, instance.params.k
    gamma = instance.params.gamma
    base = as_seed(seed)
    p_round = split_rounds(p, 3)
    params = {
        "p": p,
        "p_round": p_round,
        "alpha": alpha,
        "mu": mu,
        "r": r,
        "n": n,
        "k": k,
        "gamma": gamma,
        "seed": [base.seed, base.stream],
    }
    stages: dict = {}

    def fail(stage: str, error) -> PipelineReport:
        return PipelineReport(False, stage, str(error), params, stages)

    bmask = instance.exceptional_mask()
    # --- reserve selection ------------------------------------------------
    if instance.reserved is not None:
        wmask = instance.reserved_mask()
        _, diag = _reserve_conditions(instance, wmask, alpha)
        stages["reserve"] = {"size": wmask.bit_count(), "attempts": 0, "conditions": diag}
        inst_w = instance
    else:
        eligible = [
            v for v in range(g.vertex_count) if not (bmask >> v) & 1
        ]
        wmask = None
        last_diag = None
        for attempt in range(w_retries):
            gen = base.substream(0).substream(attempt).generator()
            coins = gen.random(len(eligible)) < 0.5
            m = 0
            for keep, v in zip(coins, eligible):
                if keep:
                    m |= 1 << v
            ok, diag = _reserve_conditions(instance, m, alpha)
            last_diag = diag
            if ok:
                wmask = m
                stages["reserve"] = {
                    "size": m.bit_count(),
                    "attempts": attempt + 1,
                    "conditions": diag,
                }
                break
        if wmask is None:
            stages["reserve"] = {"attempts": w_retries, "conditions": last_diag}
            return fail(
                "reserve_selection",
                f"retry budget exhausted after {w_retries} reserve draws",
            )
        inst_w = replace(
            instance,
            reserved=tuple(v for v in eligible if (wmask >> v) & 1),
        )
    # --- round 1: cover the exceptional set --------------------------------
    roots = sorted(instance.exceptional)
    quotas = [instance.clusters[i][c] for i in range(r) for c in range(k)]
    try:
        cover = cover_exceptional(
            g, roots, mu, quotas, base.substream(1), p=p_round, allowed=bmask | wmask
        )
    except (CoverError, ValueError) as exc:
        stages["cover"] = {"error": str(exc)}
        return fail("cover_exceptional", exc)
    k1 = cover.tiling
    stages["cover"] = {
        "cliques": len(k1),
        "quota_usage": list(cover.quota_usage),
        "warnings": list(cover.warnings),
    }
    used1 = k1.covered_mask
    if bmask & ~used1:
        return fail("cover_exceptional", "internal: an exceptional vertex was left uncovered")
    # --- round 2: weights on the reduced graph, then extraction ------------
    target = ffloor(9 * n / (10 * k))
    lam = []
    for i in range(r):
        for c in range(k):
            residual = (instance.cluster_mask(i, c) & ~used1).bit_count()
            lam.append(residual - target)
    if any(x < 0 for x in lam):
        return fail(
            "balance_weights",
            f"some cluster fell below the residue target {target}: lambdas {lam}",
        )
    reduced, reg_reports = build_reduced_graph(
        instance, seed=base.substream(2), samples=samples
    )
    stages["reduced"] = {
        "edges": reduced.edge_count(),
        "pairs_checked": len(reg_reports),
        "pairs_regular": sum(1 for rep in reg_reports.values() if rep.regular),
    }
    try:
        wa = balance_weights(reduced, lam, gamma, max_rows=max_rows)
    except (BalanceError, BudgetExceededError) as exc:
        stages["weights"] = {
            "lambda": lam,
            "checks": getattr(exc, "checks", None),
            "error": str(exc),
        }
        return fail("balance_weights", exc)
    stages["weights"] = {
        "lambda": lam,
        "checks": wa.checks,
        "tuples": sum(1 for w in wa.omega.values() if w > 0),
    }
    inst2 = residual_instance(inst_w, used1)
    g2 = sparsify(g, p_round, base.substream(3))
    try:
        k2 = balance_tuples(
            g2, inst2, wa.omega, target, base.substream(4), max_rows=max_rows
        )
    except (BalanceTuplesError, BudgetExceededError) as exc:
        stages["residue"] = {"target": target, "error": str(exc)}
        return fail("balance_tuples", exc)
    stages["residue"] = {"target": target, "cliques": len(k2)}
    # --- round 3: finish each cluster tuple --------------------------------
    used2 = used1 | k2.covered_mask
    g3 = sparsify(g, p_round, base.substream(5))
    k3: list[tuple[int, ...]] = []
    tuple_sizes = []
    for c in range(k):
        masks = [instance.cluster_mask(i, c) & ~used2 for i in range(r)]
        sizes = [m.bit_count() for m in masks]
        if sizes != [target] * r:
            return fail(
                "round3", f"internal: tuple {c} residues {sizes} != target {target}"
            )
        if target == 0:
            tuple_sizes.append(0)
            continue
        try:
            sol = solve_restricted(g3, masks, max_rows=max_rows)
        except BudgetExceededError as exc:
            stages["round3"] = {"error": str(exc)}
            return fail("round3", exc)
        if sol is None:
            stages["round3"] = {"failed_tuple": c, "tuple_sizes": tuple_sizes}
            return fail("round3", f"no factor found on cluster tuple {c}")
        k3.extend(sol)
        tuple_sizes.append(len(sol))
    stages["round3"] = {"tuples": k, "cliques": len(k3), "per_tuple": tuple_sizes}
    # --- union and independent verification --------------------------------
    cliques = tuple(sorted(k1.cliques + k2.cliques + tuple(k3)))
    ok, reason = verify_factor(g, cliques)
    if not ok:
        return fail("verify", f"internal: assembled factor rejected: {reason}")
    return PipelineReport(True, None, None, params, stages, cliques, True)
