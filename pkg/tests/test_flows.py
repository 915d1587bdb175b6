"""Flow regions, the Lawler gadget network, piercing, and the matching
scheduler.

Max-flow values are checked against an exhaustive min-cut oracle, and
the canonical cut sides are checked for invariance under reshuffled
augmentation order; the scheduler's determinism rests on that
invariance. Worked piercing traces were derived by hand on paper.
"""

from fractions import Fraction

import numpy as np
import pytest

from detpart import flows
from detpart.flows import (
    FlowRegion,
    FlowsConfig,
    LawlerNetwork,
    _next_matching,
    build_region,
    incremental_bipartition,
    quotient_pairs,
    schedule_kway,
    select_piercing_vertex,
)
from detpart.hypergraph import Hypergraph, PartitionState
from detpart.parallel import WorkerPool

from instances import random_region
from oracles import min_cut_bipartition_bruteforce

EDGES = [[0, 1, 2], [2, 3]]


def make_state(assignment, k=2, edges=EDGES, n=None, ew=None, vw=None,
               epsilon=Fraction(1, 2)):
    hg = Hypergraph.from_edges(edges, n or len(assignment), vw, ew)
    return PartitionState(hg, k, epsilon, np.asarray(assignment))


def make_region(edge_pins, edge_weights, elig_side, elig_weights=None,
                s_weight=1, t_weight=1, bound=None, l_max=None,
                elig_ids=None):
    """Region straight from node-id pins (0 source, 1 sink, 2+i elig)."""
    n = len(elig_side)
    ew = np.asarray(
        elig_weights if elig_weights is not None else [1] * n, np.int64
    )
    total = s_weight + t_weight + int(ew.sum())
    return FlowRegion(
        block_i=0,
        block_j=1,
        elig=np.asarray(
            elig_ids if elig_ids is not None else range(100, 100 + n),
            np.int32,
        ),
        elig_side=np.asarray(elig_side, np.int8),
        elig_weights=ew,
        s_weight=s_weight,
        t_weight=t_weight,
        edge_weights=list(edge_weights),
        edge_pins=[sorted(p) for p in edge_pins],
        bound=bound if bound is not None else sum(edge_weights) + 1,
        total=total,
        l_max=l_max if l_max is not None else total,
    )


def maxflow_oracle(region):
    """Exhaustive min source-sink cut of a region, by node ids."""
    n_nodes = 2 + len(region.elig)
    best, _ = min_cut_bipartition_bruteforce(
        region.edge_pins, region.edge_weights, [1] * n_nodes,
        [0], [1], range(2, n_nodes), 10 ** 9, 10 ** 9,
    )
    return best


class TestBuildRegion:
    def test_running_example(self):
        state = make_state([0, 0, 1, 1])
        region = build_region(state, 0, 1)
        assert region.elig.tolist() == [0, 2]
        assert region.elig_side.tolist() == [0, 1]
        assert region.bound == 1
        assert region.s_weight == 1 and region.t_weight == 1
        assert region.edge_pins == [[0, 2, 3], [1, 3]]
        assert region.edge_weights == [1, 1]
        assert region.total == 4 and region.l_max == 3

    def test_no_cut_edge_is_skip(self):
        state = make_state([0, 0, 0, 0])
        assert build_region(state, 0, 1) is None

    def test_pair_without_shared_edge_is_skip(self):
        # blocks 0 and 2 never share an edge
        state = make_state([0, 0, 1, 2], k=3, epsilon=Fraction(2))
        assert build_region(state, 0, 2) is None

    def test_budget_one_keeps_exactly_the_boundary_layer(self):
        edges = [[0, 1], [1, 2], [2, 3], [3, 4], [4, 5]]
        state = make_state([0, 0, 0, 1, 1, 1], edges=edges,
                           epsilon=Fraction(1, 3))
        assert state.max_block == 4  # budget 1 per side
        region = build_region(state, 0, 1)
        assert region.elig.tolist() == [2, 3]
        assert region.elig_side.tolist() == [0, 1]

    def test_whole_side_fits_farthest_vertex_stays_terminal(self):
        state = make_state([0, 0, 1], edges=[[0, 1], [1, 2]],
                           epsilon=Fraction(10))
        region = build_region(state, 0, 1)
        # side 0 is visited fully as {1, 0}: v0 is withheld
        assert region.elig.tolist() == [1]
        assert region.s_weight == 1
        # side 1 is a single vertex: nothing eligible, all terminal
        assert region.t_weight == 1

    def test_region_ignores_other_blocks(self):
        edges = [[0, 1], [1, 2], [2, 3]]
        state = make_state([0, 1, 1, 2], k=3, edges=edges,
                           epsilon=Fraction(2))
        region = build_region(state, 0, 1)
        # the [2,3] edge has no pins in blocks {0,1} besides v2; after
        # contraction it collapses to one node and is dropped
        assert region is not None
        for pins in region.edge_pins:
            assert len(pins) >= 2


class TestLawlerNetwork:
    def test_path_max_flow(self):
        region = make_region([[0, 2], [2, 3], [3, 1]], [1, 1, 1], [0, 1])
        net = LawlerNetwork(region)
        net.augment_to_max()
        assert net.flow_value == 1

    def test_parallel_paths_add_up(self):
        region = make_region([[0, 2], [2, 1], [0, 3], [3, 1]],
                             [2, 3, 4, 1], [0, 1])
        net = LawlerNetwork(region)
        net.augment_to_max()
        assert net.flow_value == 2 + 1

    def test_terminal_only_edge_must_be_paid(self):
        region = make_region([[0, 1, 2]], [5], [0])
        net = LawlerNetwork(region)
        net.augment_to_max()
        assert net.flow_value == 5

    def test_limit_stops_early(self):
        region = make_region([[0, 2], [2, 1]], [10, 10], [0])
        net = LawlerNetwork(region)
        net.augment_to_max(limit=3)
        assert 3 < net.flow_value <= 10

    def test_flow_equals_bruteforce_min_cut(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            region = random_region(rng)
            net = LawlerNetwork(region, seed=1)
            net.augment_to_max()
            assert net.flow_value == maxflow_oracle(region)

    def test_cut_sides_invariant_under_augmentation_order(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            region = random_region(rng)
            sides = []
            for seed in (1, 2):
                net = LawlerNetwork(region, seed=seed)
                net.augment_to_max()
                sides.append((net.flow_value,
                              net.reachable_forward().tolist(),
                              net.reachable_backward().tolist()))
            assert sides[0] == sides[1]

    def test_node_excess_zero_after_conservative_flow(self):
        region = make_region([[0, 2], [2, 3], [3, 1]], [2, 2, 2], [0, 1])
        net = LawlerNetwork(region)
        net.augment_to_max()
        for node in range(2, net.n_vertex_nodes):
            assert net.node_excess(node) == 0

    def _force_flow(self, net, u, v, amount):
        # push `amount` over the arc u -> v by editing its capacities
        for a in range(0, len(net.to), 2):
            if int(net.to[a]) == v and int(net.to[a ^ 1]) == u:
                net.cap[a] -= amount
                net.cap[a ^ 1] += amount
                return
        raise AssertionError("no such arc")

    def test_synthetic_excess_and_pierce_rule(self):
        # e0 feeds node 2, nothing drains it: a stranded preflow push
        region = make_region([[0, 2], [2, 1]], [3, 2], [0])
        net = LawlerNetwork(region)
        e0_out = net.n_vertex_nodes + 1
        self._force_flow(net, e0_out, 2, 3)
        assert net.node_excess(2) == 3
        net.flow_value = 0
        net.pierce_sink(2)
        assert net.flow_value == 3 and net.is_snk[2]

    def test_synthetic_outflow_surplus_on_source_pierce(self):
        region = make_region([[0, 2], [2, 1]], [3, 2], [0])
        net = LawlerNetwork(region)
        e1_in = net.n_vertex_nodes + 2
        self._force_flow(net, 2, e1_in, 2)
        assert net.node_excess(2) == -2
        net.flow_value = 0
        net.pierce_source(2)
        assert net.flow_value == 2 and net.is_src[2]


class TestSelectPiercingVertex:
    def test_single_candidate(self):
        assert select_piercing_vertex([5], [True], [1], 0, 10) == 0

    def test_id_order_among_avoiding(self):
        idx = select_piercing_vertex([7, 3], [True, True], [1, 1], 0, 10)
        assert idx == 1  # vertex 3

    def test_prefers_not_reachable_from_opposite_terminal(self):
        idx = select_piercing_vertex([3, 7], [False, True], [1, 1], 0, 10)
        assert idx == 1  # vertex 7

    def test_budget_violators_skipped(self):
        idx = select_piercing_vertex([3, 7], [True, True], [9, 1], 5, 10)
        assert idx == 1
        assert select_piercing_vertex([3], [True], [9], 5, 10) is None


class TestIncrementalBipartition:
    CFG = FlowsConfig(enabled=True)

    def test_path_region_returns_min_cut(self):
        region = make_region([[0, 2], [2, 3], [3, 1]], [1, 1, 1],
                             [0, 1], bound=2, elig_ids=[10, 11])
        res = incremental_bipartition(region, 1, self.CFG)
        assert res is not None
        assert res.cut == 1 == maxflow_oracle(region)
        assert res.vertices.tolist() == [10]
        assert res.targets.tolist() == [1]

    def test_min_cut_at_bound_terminates_without_piercing(self, monkeypatch):
        def boom(*args):
            raise AssertionError("pierced")

        monkeypatch.setattr(flows, "select_piercing_vertex", boom)
        state = make_state([0, 0, 1, 1])
        region = build_region(state, 0, 1)
        assert incremental_bipartition(region, 1, self.CFG) is None

    def test_equal_cut_smaller_imbalance_accepted(self):
        # both min cuts cost 1; only the sink-side one evens the sides
        region = make_region([[0, 2], [2, 3], [3, 1]], [1, 1, 2],
                             [0, 0], bound=1, l_max=3, elig_ids=[10, 11])
        res = incremental_bipartition(region, 1, self.CFG)
        assert res is not None
        assert res.cut == 1 and res.max_side == 2
        assert res.vertices.tolist() == [11]
        assert res.targets.tolist() == [1]

    def test_equal_cut_equal_imbalance_rejected(self):
        region = make_region([[0, 2], [2, 3], [3, 1]], [1, 2, 1],
                             [0, 0], bound=1, l_max=3)
        assert incremental_bipartition(region, 1, self.CFG) is None

    def test_piercing_walks_to_a_balanced_cut(self, monkeypatch):
        pierces = []
        orig = flows.select_piercing_vertex

        def spy(*args):
            out = orig(*args)
            pierces.append(out)
            return out

        monkeypatch.setattr(flows, "select_piercing_vertex", spy)
        # chain s-a-b-c-d-e-t, heavy edge c-d is the incumbent pair cut
        region = make_region(
            [[0, 2], [2, 3], [3, 4], [4, 5], [5, 6], [6, 1]],
            [1, 1, 1, 3, 1, 1],
            [0, 0, 0, 1, 1], bound=3, l_max=4,
            elig_ids=[20, 21, 22, 23, 24],
        )
        res = incremental_bipartition(region, 1, self.CFG)
        assert res is not None
        assert res.cut == 1
        assert res.vertices.tolist() == [22]
        assert res.targets.tolist() == [1]
        assert len(pierces) == 3

    def test_no_piercing_candidate_is_no_improvement(self):
        # l_max 4 forbids every bipartition of total 10: the first sink
        # candidate is over budget, the source side has none left
        region = make_region([[0, 2], [2, 3], [3, 1]], [3, 3, 3],
                             [0, 1], s_weight=4, t_weight=4,
                             bound=10, l_max=4)
        assert incremental_bipartition(region, 1, self.CFG) is None

    def test_piercing_cap_bounds_the_loop(self, monkeypatch):
        calls = []
        orig = flows.select_piercing_vertex

        def spy(*args):
            calls.append(args)
            return orig(*args)

        monkeypatch.setattr(flows, "select_piercing_vertex", spy)
        region = make_region(
            [[0, 2], [2, 3], [3, 4], [4, 5], [5, 1]],
            [3, 3, 3, 3, 3],
            [0, 0, 1, 1], s_weight=5, t_weight=5, bound=20, l_max=6,
        )
        res = incremental_bipartition(region, 1, FlowsConfig(
            enabled=True, max_piercing_factor=1))
        assert res is None
        assert len(calls) <= 2 * 4

    def test_seed_does_not_change_outcome(self):
        rng = np.random.default_rng(23)
        for _ in range(40):
            region = random_region(rng)
            region.bound = max(region.edge_weights)
            outs = []
            for seed in (3, 4):
                res = incremental_bipartition(region, seed, self.CFG)
                outs.append(
                    None if res is None else (
                        res.vertices.tolist(), res.targets.tolist(),
                        res.cut, res.max_side,
                    )
                )
            assert outs[0] == outs[1]

    def test_accepted_results_are_balanced_improvements(self):
        rng = np.random.default_rng(31)
        accepted = 0
        for _ in range(80):
            region = random_region(rng)
            total = region.total
            region.l_max = max((total * 2 + 2) // 3, 1)
            region.bound = max(region.edge_weights)
            old_max = max(
                region.s_weight
                + int(region.elig_weights[region.elig_side == 0].sum()),
                region.t_weight
                + int(region.elig_weights[region.elig_side == 1].sum()),
            )
            res = incremental_bipartition(region, 5, self.CFG)
            if res is None:
                continue
            accepted += 1
            assert res.max_side <= region.l_max
            assert (res.cut, res.max_side) < (region.bound, old_max)
            # moved vertices all come from the eligible set
            assert set(res.vertices.tolist()) <= set(region.elig.tolist())
        assert accepted > 0


class TestQuotientAndMatching:
    def test_quotient_pairs(self):
        state = make_state([0, 0, 1, 2], k=3,
                           edges=[[0, 1], [1, 2], [2, 3], [0, 3]],
                           epsilon=Fraction(2))
        assert quotient_pairs(state) == [(0, 1), (0, 2), (1, 2)]

    def test_quotient_pairs_multiblock_edge(self):
        state = make_state([0, 1, 2], k=3, edges=[[0, 1, 2]],
                           epsilon=Fraction(2))
        assert quotient_pairs(state) == [(0, 1), (0, 2), (1, 2)]

    def test_complete_k4_first_matching(self):
        pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        assert _next_matching(pairs) == [(0, 1), (2, 3)]

    def test_matching_prefers_high_degree_endpoints(self):
        pairs = [(0, 1), (0, 2), (0, 3), (2, 3)]
        assert _next_matching(pairs) == [(0, 1), (2, 3)]

    def test_matchings_cover_all_pairs(self):
        pairs = [(i, j) for i in range(5) for j in range(i + 1, 5)]
        seen = []
        remaining = list(pairs)
        while remaining:
            m = _next_matching(remaining)
            assert m
            blocks = [b for p in m for b in p]
            assert len(blocks) == len(set(blocks))
            seen.extend(m)
            remaining = [p for p in remaining if p not in m]
        assert sorted(seen) == pairs


class TestScheduleKway:
    CFG = FlowsConfig(enabled=True)

    def test_k1_is_noop(self):
        state = make_state([0, 0, 0, 0], k=1)
        assert schedule_kway(state, self.CFG) is False

    def test_chain_improvement(self):
        state = make_state([0, 0, 1, 1],
                           edges=[[0, 1], [1, 2], [2, 3]],
                           ew=[1, 5, 1])
        assert state.metric() == 5
        improved = schedule_kway(state, self.CFG, seed=3)
        assert improved is True
        assert state.metric() == 1
        assert state.assignment.tolist() == [0, 1, 1, 1]
        assert state.is_balanced()

    def test_no_improvement_leaves_state_alone(self):
        state = make_state([0, 0, 1, 1])
        before = state.assignment.tolist()
        assert schedule_kway(state, self.CFG, seed=3) is False
        assert state.assignment.tolist() == before

    def test_k2_single_pair_single_refinement(self, monkeypatch):
        calls = []
        orig = flows.build_region

        def spy(state, i, j):
            calls.append((i, j))
            return orig(state, i, j)

        monkeypatch.setattr(flows, "build_region", spy)
        state = make_state([0, 0, 1, 1])
        schedule_kway(state, self.CFG, seed=3)
        assert calls == [(0, 1)]

    def test_never_worsens_and_keeps_balance(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            n = int(rng.integers(4, 13))
            m = int(rng.integers(2, 9))
            edges = []
            for _ in range(m):
                size = int(rng.integers(2, min(4, n) + 1))
                edges.append(sorted(
                    int(p) for p in rng.choice(n, size, replace=False)))
            k = int(rng.integers(2, 5))
            assignment = rng.integers(0, k, size=n).astype(np.int32)
            state = make_state(assignment, k=k, edges=edges, n=n,
                               epsilon=Fraction(1, 2))
            balanced_before = state.is_balanced()
            before = state.metric()
            schedule_kway(state, self.CFG, seed=int(rng.integers(1000)))
            assert state.metric() <= before
            if balanced_before:
                assert state.is_balanced()
            state.validate()

    def test_thread_count_does_not_change_result(self):
        rng = np.random.default_rng(41)
        n, m, k = 60, 90, 6
        edges = []
        for _ in range(m):
            size = int(rng.integers(2, 6))
            edges.append(sorted(
                int(p) for p in rng.choice(n, size, replace=False)))
        assignment = rng.integers(0, k, size=n).astype(np.int32)
        outs = []
        for threads in (1, 2, 4, 8):
            state = make_state(assignment.copy(), k=k, edges=edges, n=n,
                               epsilon=Fraction(1, 2))
            trace = []
            with WorkerPool(threads) as pool:
                schedule_kway(state, self.CFG, seed=9, pool=pool,
                              trace=trace, tag="L0/")
            outs.append((state.assignment_hash(), trace))
        assert all(o == outs[0] for o in outs[1:])
        assert outs[0][1][0][0] == "L0/flow_r0"

    def test_expired_deadline_returns_unimproved(self):
        state = make_state([0, 0, 1, 1],
                           edges=[[0, 1], [1, 2], [2, 3]],
                           ew=[1, 5, 1])
        improved = schedule_kway(state, self.CFG, seed=3, deadline=0.0)
        assert improved is False
        assert state.metric() == 5


class TestFlowsConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            FlowsConfig(time_budget_s=0)
        with pytest.raises(ValueError):
            FlowsConfig(max_piercing_factor=0)
