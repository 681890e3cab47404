import json
import math

import pytest

from krfactor import (
    BalanceError,
    BalanceTuplesError,
    BudgetExceededError,
    CoverError,
    PartiteGraph,
    PartitionedInstance,
    RegularityParams,
    balance_tuples,
    balance_weights,
    cover_exceptional,
    gen_super_regular_instance,
    run_pipeline,
    split_rounds,
    verify_factor,
)
from krfactor.pipeline import WeightAssignment


def _full_part_instance(r, n, *, epsilon=0.1, d=0.5, gamma=0.5, reserved=None):
    """k=1 instance whose single clusters are the full parts of a complete host."""
    g = PartiteGraph.complete(r, n)
    clusters = tuple((tuple(g.part_range(i)),) for i in range(r))
    params = RegularityParams(epsilon=epsilon, d=d, gamma=gamma, k=1)
    if reserved is None:
        reserved = tuple(range(g.vertex_count))
    return PartitionedInstance(g, clusters, (), params, reserved=tuple(reserved))


class TestCoverExceptional:
    def test_empty_roots(self):
        g = PartiteGraph.complete(3, 4)
        res = cover_exceptional(g, [], 0.5, [], 0)
        assert res.tiling.cliques == ()
        assert res.quota_usage == ()
        assert res.warnings == ()

    def test_single_root_takes_first_candidate(self):
        g = PartiteGraph.complete(3, 4)
        quotas = [(1, 2, 3), tuple(range(4, 8)), tuple(range(8, 12))]
        res = cover_exceptional(g, [0], 0.5, quotas, 3)
        assert res.tiling.cliques == ((0, 4, 8),)
        assert res.quota_usage == (0, 1, 1)
        again = cover_exceptional(g, [0], 0.5, quotas, 3)
        assert again.tiling == res.tiling

    def test_dead_reveal_raises_cover_error(self):
        g = PartiteGraph.complete(3, 4)
        with pytest.raises(CoverError) as exc:
            cover_exceptional(g, [0], 0.5, [], 3, p=0.0)
        assert exc.value.root == 0
        assert exc.value.survivors == 16  # every clique through 0 survived the filter

    def test_saturated_quotas_block_roots(self):
        # singleton quotas with tiny mu saturate before any use
        g = PartiteGraph.complete(3, 4)
        quotas = [(v,) for v in range(4, 12)]
        with pytest.raises(CoverError) as exc:
            cover_exceptional(g, [0], 0.05, quotas, 5)
        assert exc.value.survivors == 0

    def test_cap_clamp_warning(self):
        g = PartiteGraph.complete(2, 2)
        res = cover_exceptional(g, [0], 0.1, [(2, 3)], 7)
        assert any("clamped" in w for w in res.warnings)
        assert any("exceeds" in w for w in res.warnings)

    def test_short_candidate_warning(self):
        g = PartiteGraph.complete(2, 2)
        res = cover_exceptional(g, [0], 0.9, [(2, 3)], 11)
        assert any("only 2 candidates" in w for w in res.warnings)

    def test_quota_accounting_matches_tiling(self):
        for seed in range(30):
            r = 3 + seed % 2
            n = 8 + seed % 3
            g = PartiteGraph.complete(r, n)
            roots = [0, n, 2 * n][: 1 + seed % 3]
            quotas = [
                tuple(range(i * n + n // 2, (i + 1) * n)) for i in range(r)
            ]
            res = cover_exceptional(g, roots, 0.12, quotas, seed, p=0.9)
            covered = res.tiling.covered_mask
            for v in roots:
                assert (covered >> v) & 1
            recount = [0] * len(quotas)
            for K in res.tiling.cliques:
                for v in K:
                    owners = [s for s, q in enumerate(quotas) if v in q]
                    assert len(owners) <= 1
                    if owners:
                        recount[owners[0]] += 1
            assert tuple(recount) == res.quota_usage
            for s, usage in enumerate(res.quota_usage):
                assert usage <= 4 * r * 0.12 * len(quotas[s]) + r - 2 + 1e-9

    def test_validation(self):
        g = PartiteGraph.complete(3, 4)
        with pytest.raises(ValueError, match="distinct"):
            cover_exceptional(g, [0, 0], 0.5, [], 0)
        with pytest.raises(ValueError, match="out of range"):
            cover_exceptional(g, [99], 0.5, [], 0)
        with pytest.raises(ValueError, match="contains a root"):
            cover_exceptional(g, [4], 0.5, [(4, 5)], 0)
        with pytest.raises(ValueError, match="overlaps"):
            cover_exceptional(g, [0], 0.5, [(4, 5), (5, 6)], 0)
        with pytest.raises(ValueError, match="mu"):
            cover_exceptional(g, [0], 0.0, [], 0)
        with pytest.raises(ValueError, match="p must"):
            cover_exceptional(g, [0], 0.5, [], 0, p=1.5)
        with pytest.raises(ValueError, match="allowed"):
            cover_exceptional(
                g, [0], 0.5, [], 0, allowed=g.part_mask(1) | g.part_mask(2)
            )


class TestBalanceWeights:
    def test_single_triangle(self):
        reduced = PartiteGraph.complete(3, 1)
        res = balance_weights(reduced, [5, 5, 5], 0.6)
        assert res.omega == {(0, 1, 2): 5}
        assert res.checks == {
            "part_sums_equal": True,
            "lambda_in_range": True,
            "min_star_degree_ok": True,
        }

    def test_skewed_weights_flag_lambda_range(self):
        reduced = PartiteGraph.complete(2, 2)
        res = balance_weights(reduced, [5, 0, 0, 5], 1.0)
        assert res.omega == {(0, 3): 5}
        assert res.checks["part_sums_equal"] is True
        assert res.checks["lambda_in_range"] is False

    def test_identity_property_on_random_targets(self):
        import random

        rng = random.Random(4)
        for _ in range(25):
            r = rng.choice([2, 3])
            k = rng.randint(1, 3)
            gamma = {2: 1.0, 3: 0.6}[r]
            total = rng.randint(k, 6 * k)
            lam = []
            for _ in range(r):
                cuts = sorted(rng.randint(0, total) for _ in range(k - 1))
                parts = [b - a for a, b in zip([0] + cuts, cuts + [total])]
                lam.extend(parts)
            reduced = PartiteGraph.complete(r, k)
            res = balance_weights(reduced, lam, gamma)
            for v in range(r * k):
                assert sum(w for K, w in res.omega.items() if v in K) == lam[v]
            assert all(w > 0 for w in res.omega.values())

    def test_unequal_part_sums(self):
        reduced = PartiteGraph.complete(2, 1)
        with pytest.raises(BalanceError) as exc:
            balance_weights(reduced, [2, 3], 1.0)
        assert exc.value.checks["part_sums_equal"] is False

    def test_no_cliques_available(self):
        reduced = PartiteGraph(2, 1)
        with pytest.raises(BalanceError, match="no factor"):
            balance_weights(reduced, [1, 1], 1.0)

    def test_all_zero_targets(self):
        reduced = PartiteGraph.complete(2, 2)
        res = balance_weights(reduced, [0, 0, 0, 0], 1.0)
        assert res.omega == {}

    def test_validation(self):
        reduced = PartiteGraph.complete(2, 1)
        with pytest.raises(ValueError):
            balance_weights(reduced, [1], 1.0)
        with pytest.raises(ValueError):
            balance_weights(reduced, [1, -1], 1.0)
        with pytest.raises(ValueError):
            balance_weights(reduced, [1, 1], 0.0)


class TestWeightAssignment:
    def test_rejects_broken_accounting(self):
        reduced = PartiteGraph.complete(2, 1)
        with pytest.raises(ValueError, match="realize"):
            WeightAssignment(reduced, (1, 1), {(0, 1): 2}, {})
        with pytest.raises(ValueError, match="part order"):
            WeightAssignment(reduced, (1, 1), {(1, 0): 1}, {})
        with pytest.raises(ValueError, match="missing edge"):
            WeightAssignment(PartiteGraph(2, 1), (1, 1), {(0, 1): 1}, {})


class TestBalanceTuples:
    def test_single_pick(self):
        inst = _full_part_instance(3, 4)
        res = balance_tuples(inst.host, inst, {(0, 1, 2): 1}, 3, 0)
        assert len(res.cliques) == 1
        K = res.cliques[0]
        assert [inst.host.part_of(v) for v in K] == [0, 1, 2]
        assert all(v in inst.reserved for v in K)

    def test_zero_omega(self):
        inst = _full_part_instance(3, 4)
        res = balance_tuples(inst.host, inst, {}, 4, 0)
        assert res.cliques == ()

    def test_target_precheck_errors(self):
        inst = _full_part_instance(3, 4)
        with pytest.raises(BalanceTuplesError, match="not the target"):
            balance_tuples(inst.host, inst, {(0, 1, 2): 2}, 3, 0)
        short = _full_part_instance(3, 4, reserved=range(4, 12))
        with pytest.raises(BalanceTuplesError, match="smaller than required"):
            balance_tuples(short.host, short, {(0, 1, 2): 1}, 3, 0)

    def test_sparse_round_fails_with_tuple_key(self):
        inst = _full_part_instance(3, 4)
        empty = PartiteGraph(3, 4)
        with pytest.raises(BalanceTuplesError) as exc:
            balance_tuples(empty, inst, {(0, 1, 2): 1}, 3, 0)
        assert exc.value.tuple_key == (0, 1, 2)

    def test_exhaustive_fallback_completes(self):
        # only disjoint pair is T1=(0,4,8), T2=(1,5,9); decoy (0,5,9) can strand
        # the random pass, forcing the backtracking fallback
        edges = [(0, 4), (4, 8), (0, 8), (1, 5), (5, 9), (1, 9), (0, 5), (0, 9)]
        g = PartiteGraph(3, 4, edges)
        clusters = tuple((tuple(g.part_range(i)),) for i in range(3))
        params = RegularityParams(epsilon=0.1, d=0.2, gamma=0.5, k=1)
        inst = PartitionedInstance(g, clusters, (), params, reserved=tuple(range(12)))
        for seed in range(10):
            res = balance_tuples(g, inst, {(0, 1, 2): 2}, 2, seed)
            assert set(res.cliques) == {(0, 4, 8), (1, 5, 9)}

    def test_omega_key_validation(self):
        inst = _full_part_instance(3, 4)
        with pytest.raises(ValueError, match="negative"):
            balance_tuples(inst.host, inst, {(0, 1, 2): -1}, 4, 0)
        with pytest.raises(ValueError, match="expected 3"):
            balance_tuples(inst.host, inst, {(0, 1): 1}, 3, 0)
        with pytest.raises(ValueError, match="not a part-0 cluster"):
            balance_tuples(inst.host, inst, {(1, 1, 2): 1}, 3, 0)

    def test_budget(self):
        inst = _full_part_instance(3, 4)
        with pytest.raises(BudgetExceededError):
            balance_tuples(inst.host, inst, {(0, 1, 2): 1}, 3, 0, max_rows=0)


class TestRunPipeline:
    def test_dense_no_exceptional(self):
        inst = _full_part_instance(3, 10, gamma=0.6, d=0.8)
        rep = run_pipeline(inst, 1.0, 3)
        assert rep.success
        assert rep.failure_stage is None
        assert rep.stages["cover"]["cliques"] == 0
        assert rep.stages["residue"]["target"] == 9
        assert rep.stages["residue"]["cliques"] == 1
        assert rep.stages["round3"]["cliques"] == 9
        assert rep.stages["round3"]["per_tuple"] == [9]
        assert verify_factor(inst.host, rep.factor) == (True, "")

    def test_generated_instance_end_to_end(self):
        inst = gen_super_regular_instance(3, 2, 30, 0.6, 3, 42)
        rep = run_pipeline(inst, 1.0, 7)
        assert rep.success, rep.error
        assert verify_factor(inst.host, rep.factor) == (True, "")
        assert rep.stages["cover"]["cliques"] == 3

    def test_sparse_failure_is_staged(self):
        inst = _full_part_instance(3, 10, gamma=0.6, d=0.8)
        rep = run_pipeline(inst, 0.0, 3)
        assert not rep.success
        assert rep.factor is None
        assert rep.failure_stage == "balance_tuples"
        assert "error" in rep.stages["residue"]

    def test_sparse_failure_hits_cover_first_with_exceptional(self):
        inst = gen_super_regular_instance(3, 1, 12, 0.8, 3, 0)
        rep = run_pipeline(inst, 0.0, 0)
        assert not rep.success
        assert rep.failure_stage == "cover_exceptional"
        assert "error" in rep.stages["cover"]

    def test_reserve_exhaustion(self):
        # alpha so tight no integer cluster count can land in the band
        inst = gen_super_regular_instance(3, 1, 13, 0.9, 0, 2)
        rep = run_pipeline(inst, 1.0, 0, alpha=0.0001, w_retries=5)
        assert not rep.success
        assert rep.failure_stage == "reserve_selection"
        assert rep.stages["reserve"]["attempts"] == 5

    def test_round_split_matches_success_rate(self):
        # single-edge host: success iff the one edge survives the round-2 reveal
        g = PartiteGraph.complete(2, 1)
        params = RegularityParams(epsilon=0.1, d=0.5, gamma=1.0, k=1)
        inst = PartitionedInstance(g, (((0,),), ((1,),)), (), params, reserved=(0, 1))
        p_round = split_rounds(0.4, 3)
        hits = 0
        trials = 3000
        for seed in range(trials):
            rep = run_pipeline(inst, 0.4, seed)
            if rep.success:
                hits += 1
            else:
                assert rep.failure_stage == "balance_tuples"
        rate = hits / trials
        sigma = math.sqrt(p_round * (1 - p_round) / trials)
        assert abs(rate - p_round) <= 3 * sigma

    def test_report_json_is_stable(self):
        inst = _full_part_instance(3, 6, gamma=0.6, d=0.8)
        a = run_pipeline(inst, 1.0, 5).to_json()
        b = run_pipeline(inst, 1.0, 5).to_json()
        assert a == b
        payload = json.loads(a)
        assert payload["success"] is True
        assert payload["verified"] is True
        assert set(payload["stages"]) == {
            "reserve",
            "cover",
            "reduced",
            "weights",
            "residue",
            "round3",
        }

    def test_bad_probability(self):
        inst = _full_part_instance(3, 6)
        with pytest.raises(ValueError):
            run_pipeline(inst, 1.5, 0)
