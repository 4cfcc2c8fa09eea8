import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_components, brute_prune, golden_mean_graph, random_graph
from relent.codes import degree
from relent.errors import (BlockExplosion, DuplicateEdge, EmptyAfterPruning, NotIrreducible,
                           TrivialComponent, UnknownSymbol)
from relent.measures import entropy_rate
from relent.shift import (build_sft, cycle, full_shift, higher_block, is_irreducible,
                          parry_measure, perron, restrict_to_component,
                          strongly_connected_components, topological_entropy)

GOLDEN = (1 + math.sqrt(5)) / 2


def two_disjoint_cycles():
    return build_sft("abcd", [("a", "b"), ("b", "a"), ("c", "d"), ("d", "c")])


class TestBuild:
    def test_golden_mean_kept(self):
        sft = golden_mean_graph()
        assert sft.symbols == (0, 1)
        assert sft.n_edges == 3
        assert sft.pruned == ()

    def test_no_cycle(self):
        with pytest.raises(EmptyAfterPruning):
            build_sft((0, 1), [(0, 1)])

    def test_full_two_shift(self):
        sft = full_shift(2)
        assert (sft.n_symbols, sft.n_edges) == (2, 4)

    def test_duplicate_edge(self):
        with pytest.raises(DuplicateEdge):
            build_sft((0, 1), [(0, 1), (1, 0), (0, 1)])

    def test_unknown_symbol(self):
        with pytest.raises(UnknownSymbol):
            build_sft((0, 1), [(0, 2)])

    def test_pruning_reports_removed(self):
        # 2 feeds the cycle but has no predecessor, 3 is a sink
        sft = build_sft((0, 1, 2, 3), [(0, 1), (1, 0), (2, 0), (1, 3)])
        assert sft.symbols == (0, 1)
        assert set(sft.pruned) == {2, 3}

    def test_edges_sorted_by_symbol_order(self):
        sft = build_sft(("b", "a"), [("a", "a"), ("a", "b"), ("b", "a")])
        assert sft.edges == (("b", "a"), ("a", "b"), ("a", "a"))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 8), st.floats(0.05, 0.6), st.integers(0, 10_000))
    def test_pruning_matches_brute_force(self, n, density, seed):
        syms, edges = random_graph(np.random.default_rng(seed), n, density)
        keep = brute_prune(syms, edges)
        if not keep:
            with pytest.raises(EmptyAfterPruning):
                build_sft(syms, edges)
            return
        sft = build_sft(syms, edges)
        assert set(sft.symbols) == keep
        assert set(sft.edges) == {e for e in edges if e[0] in keep and e[1] in keep}


class TestComponents:
    def test_golden_one_component(self):
        comps = strongly_connected_components(golden_mean_graph())
        assert len(comps) == 1 and comps.nontrivial == (True,)

    def test_two_cycles(self):
        comps = strongly_connected_components(two_disjoint_cycles())
        assert comps.members == (("a", "b"), ("c", "d"))

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 8), st.floats(0.1, 0.5), st.integers(0, 10_000))
    def test_matches_reachability(self, n, density, seed):
        syms, edges = random_graph(np.random.default_rng(seed), n, density)
        try:
            sft = build_sft(syms, edges)
        except EmptyAfterPruning:
            return
        comps = strongly_connected_components(sft)
        got = [{sft.index[s] for s in m} for m, nt in zip(comps.members, comps.nontrivial) if nt]
        want = brute_components(sft.adjacency)
        assert sorted(map(sorted, got)) == sorted(map(sorted, want))
        # numbering follows the least symbol
        firsts = [sft.index[m[0]] for m in comps.members]
        assert firsts == sorted(firsts)

    def test_restrict_golden_is_identity(self):
        sft = golden_mean_graph()
        assert restrict_to_component(sft, 0) == sft

    def test_restrict_second_cycle(self):
        sub = restrict_to_component(two_disjoint_cycles(), 1)
        assert sub.symbols == ("c", "d") and set(sub.edges) == {("c", "d"), ("d", "c")}

    def test_wandering_symbols_removed(self):
        # 0 <-> 1 flows into 2 <-> 3; 1 -> 2 is a one-way bridge
        sft = build_sft(range(4), [(0, 1), (1, 0), (1, 2), (2, 3), (3, 2)])
        comps = strongly_connected_components(sft)
        assert len(comps) == 2
        assert (0, 1) in comps.dag
        sub = restrict_to_component(sft, 1, comps)
        assert sub.symbols == (2, 3) and is_irreducible(sub)

    def test_trivial_component(self):
        sft = build_sft(range(5), [(0, 1), (1, 0), (1, 2), (2, 3), (3, 4), (4, 3)])
        comps = strongly_connected_components(sft)
        cid = comps.component_of(sft, 2)
        assert not comps.nontrivial[cid]
        with pytest.raises(TrivialComponent):
            restrict_to_component(sft, cid, comps)


class TestPerron:
    def test_full_two_shift(self):
        pd = perron(full_shift(2))
        assert abs(pd.value - 2) < 1e-12 and abs(pd.entropy - math.log(2)) < 1e-12

    def test_golden_mean(self):
        pd = perron(golden_mean_graph())
        assert abs(pd.value - GOLDEN) < 1e-10
        assert abs(pd.value ** 2 - pd.value - 1) < 1e-10

    def test_three_cycle(self):
        pd = perron(cycle(3))
        assert abs(pd.value - 1) < 1e-12 and abs(pd.entropy) < 1e-12

    def test_not_irreducible(self):
        with pytest.raises(NotIrreducible):
            perron(two_disjoint_cycles())

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 7), st.integers(0, 10_000))
    def test_against_eigvals(self, n, seed):
        syms, edges = random_graph(np.random.default_rng(seed), n, 0.45)
        try:
            sft = build_sft(syms, edges)
        except EmptyAfterPruning:
            return
        if not is_irreducible(sft):
            return
        pd = perron(sft)
        lam = max(abs(np.linalg.eigvals(sft.matrix())))
        assert abs(pd.value - lam) < 1e-9
        assert abs(pd.left @ pd.right - 1) < 1e-12
        assert (pd.left > 0).all() and (pd.right > 0).all()
        assert pd.residual <= 1e-9

    def test_topological_entropy_takes_largest_piece(self):
        sft = build_sft(range(4), [(0, 0), (0, 1), (1, 0), (1, 2), (2, 2), (2, 3), (3, 2), (3, 3)])
        assert abs(topological_entropy(sft) - math.log(2)) < 1e-10


class TestParry:
    def test_full_two_shift_uniform(self):
        mu = parry_measure(full_shift(2))
        assert np.allclose(mu.edge_freq, 0.25, atol=1e-13)

    def test_three_cycle(self):
        mu = parry_measure(cycle(3))
        assert np.allclose(mu.edge_freq, 1 / 3, atol=1e-13)

    def test_golden_mean_against_eigenvectors(self):
        sft = golden_mean_graph()
        mu = parry_measure(sft)
        w, vr = np.linalg.eig(sft.matrix())
        r = np.abs(vr[:, np.argmax(w.real)].real)
        w, vl = np.linalg.eig(sft.matrix().T)
        l = np.abs(vl[:, np.argmax(w.real)].real)
        q = np.array([l[a] * r[b] for a, b in sft.edge_array])
        assert np.allclose(mu.edge_freq, q / q.sum(), atol=1e-12)
        assert mu.stationarity_residual <= 1e-12
        assert abs(entropy_rate(mu) - math.log(GOLDEN)) < 1e-9

    @pytest.mark.parametrize("seed", range(10))
    def test_maximizes_entropy(self, seed):
        syms, edges = random_graph(np.random.default_rng(seed), 6, 0.5)
        sft = build_sft(syms, edges)
        comps = strongly_connected_components(sft)
        cid = max(range(len(comps)), key=lambda c: len(comps.members[c]) * comps.nontrivial[c])
        sub = restrict_to_component(sft, cid, comps)
        mu = parry_measure(sub)
        assert mu.stationarity_residual <= 1e-12
        assert abs(entropy_rate(mu) - perron(sub).entropy) < 1e-9


class TestHigherBlock:
    def test_order_one(self):
        sft = golden_mean_graph()
        bp = higher_block(sft, 1)
        assert bp.block_sft is sft

    def test_golden_two_blocks(self):
        bp = higher_block(golden_mean_graph(), 2)
        assert set(bp.block_sft.symbols) == {(0, 0), (0, 1), (1, 0)}

    def test_full_two_shift_three_blocks(self):
        bp = higher_block(full_shift(2), 3)
        assert (bp.block_sft.n_symbols, bp.block_sft.n_edges) == (8, 16)

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_entropy_preserved(self, m):
        for sft in (golden_mean_graph(), full_shift(3), cycle(4),
                    build_sft(range(3), [(0, 1), (1, 2), (2, 0), (0, 0), (2, 1)])):
            assert abs(perron(higher_block(sft, m).block_sft).entropy - perron(sft).entropy) < 1e-9

    def test_code_is_conjugacy(self):
        bp = higher_block(golden_mean_graph(), 3)
        code = bp.code()
        assert code.surjective
        assert degree(code) == 1

    def test_cap(self):
        with pytest.raises(BlockExplosion):
            higher_block(full_shift(4), 6, cap=1000)

    def test_edges_are_overlaps(self):
        sft = build_sft(range(3), [(0, 1), (1, 2), (2, 0), (0, 0), (2, 1)])
        block = higher_block(sft, 3).block_sft
        for a, b in block.edges:
            assert a[1:] == b[:-1] and sft.is_admissible(a + b[-1:])
        words4 = set(sft.words(4))
        assert {a + b[-1:] for a, b in block.edges} == words4
