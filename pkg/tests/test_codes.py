import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_components, golden_mean_graph, random_graph
from relent.codes import (build_product_coding_graph, degree, fiber_product, find_diamond,
                          identity_code, irreducible_core, is_finite_to_one, projection_code,
                          truncate_alphabet, truncation_scheme, validate_code)
from relent.errors import (BadLevel, EdgeNotPreserved, EmptyAfterPruning, EmptyProduct,
                           NotFiniteToOne, NotIrreducible, TrivialComponent, UnknownSymbol)
from relent.io import Loader
from relent.measures import entropy_rate, hidden_entropy_bounds
from relent.shift import build_sft, full_shift, higher_block, is_irreducible

DATA = Path(__file__).resolve().parents[1] / "configs" / "data"


def four_to_two():
    two = build_sft("ab", [(x, y) for x in "ab" for y in "ab"])
    return validate_code(full_shift(4), two, {0: "a", 1: "a", 2: "b", 3: "b"})


def two_copies_code():
    """Two disjoint copies of the full 2-shift mapped onto one copy."""
    syms = [(c, s) for c in "uv" for s in (0, 1)]
    edges = [((c, s), (c, t)) for c in "uv" for s in (0, 1) for t in (0, 1)]
    return validate_code(build_sft(syms, edges), full_shift(2), {x: x[1] for x in syms})


def preimage_paths(code, word):
    """All source paths over ``word``, by extension one symbol at a time."""
    src = code.source
    paths = [(s,) for s in code.preimage(word[0])]
    for y in word[1:]:
        paths = [p + (s,) for p in paths for s in code.preimage(y) if (p[-1], s) in src.edge_index]
    return paths


def brute_degree(code, max_len):
    """Least number of distinct source symbols at one position over one target word."""
    best = None
    for n in range(1, max_len + 1):
        for w in code.target.words(n):
            paths = preimage_paths(code, w)
            if not paths:
                continue
            k = min(len({p[i] for p in paths}) for i in range(n))
            best = k if best is None else min(best, k)
    return best


def brute_image_words(code, n):
    return {tuple(code(p)) for p in code.source.words(n)}


class TestValidate:
    def test_identity(self):
        code = identity_code(full_shift(3))
        assert code.surjective and code.uncovered_edges == ()

    def test_four_to_two(self):
        code = four_to_two()
        assert code.surjective
        assert code((0, 3, 1)) == ["a", "b", "a"]

    def test_golden_into_full(self):
        code = validate_code(golden_mean_graph(), full_shift(2), {0: 0, 1: 1})
        assert code.surjective is False
        assert code.uncovered_edges == ((1, 1),)
        assert code.missing_word == (1, 1)

    def test_edge_not_preserved(self):
        with pytest.raises(EdgeNotPreserved) as info:
            validate_code(full_shift(2), golden_mean_graph(), {0: 0, 1: 1})
        assert info.value.details["edge"] == (1, 1)

    def test_partial_map(self):
        with pytest.raises(UnknownSymbol):
            validate_code(full_shift(2), full_shift(2), {0: 0})

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 3), st.integers(0, 10_000))
    def test_surjectivity_matches_word_images(self, n, seed):
        rng = np.random.default_rng(seed)
        syms, edges = random_graph(rng, n, 0.55)
        try:
            src = build_sft(syms, edges)
        except EmptyAfterPruning:
            return
        label = {s: int(rng.integers(2)) for s in src.symbols}
        tgt_edges = {(label[a], label[b]) for a, b in src.edges}
        tgt_edges |= {(0, 0)} if rng.random() < 0.5 else set()
        try:
            tgt = build_sft((0, 1), sorted(tgt_edges))
        except EmptyAfterPruning:
            return
        if any(label[s] not in tgt.index for s in src.symbols):
            return
        code = validate_code(src, tgt, label)
        # image is a sofic subshift; a missing word shows up by length 2**n + 1
        depth = 2 ** src.n_symbols + 1
        full = all(brute_image_words(code, m) == set(tgt.words(m)) for m in range(1, depth + 1))
        assert code.surjective == full
        if not full:
            w = code.missing_word
            assert tgt.is_admissible(w) and not preimage_paths(code, w)

    def test_commutes_with_shift(self):
        code = four_to_two()
        rng = np.random.default_rng(0)
        for _ in range(50):
            w = tuple(rng.integers(0, 4, 10).tolist())
            assert code(w[1:]) == code(w)[1:]


class TestFiniteToOne:
    def test_identity(self):
        assert is_finite_to_one(identity_code(full_shift(3))) == (True, None)

    def test_four_to_two_diamond(self):
        ok, witness = is_finite_to_one(four_to_two())
        assert not ok
        assert witness.first == (0, 0, 0) and witness.second == (0, 1, 0)
        assert witness.image == ("a", "a", "a")

    def test_higher_block(self):
        assert is_finite_to_one(higher_block(golden_mean_graph(), 3).code())[0]

    def test_reducible_source(self):
        with pytest.raises(NotIrreducible):
            is_finite_to_one(two_copies_code())

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 5), st.integers(0, 10_000))
    def test_witness_is_genuine(self, n, seed):
        rng = np.random.default_rng(seed)
        syms, edges = random_graph(rng, n, 0.5)
        try:
            src = build_sft(syms, edges)
        except EmptyAfterPruning:
            return
        label = {s: int(rng.integers(2)) for s in src.symbols}
        tgt = build_sft((0, 1), [(a, b) for a in (0, 1) for b in (0, 1)])
        code = validate_code(src, tgt, label)
        d = find_diamond(code)
        # brute force: two distinct paths, same ends, same image, length <= 9
        found = False
        for m in range(3, min(n * n + 3, 10)):
            by_key = {}
            for p in src.words(m):
                key = (p[0], p[-1], tuple(code(p)))
                by_key.setdefault(key, set()).add(p)
            if any(len(v) > 1 for v in by_key.values()):
                found = True
                break
        assert (d is not None) == found
        if d is not None:
            assert d.first != d.second
            assert d.first[0] == d.second[0] and d.first[-1] == d.second[-1]
            assert code(d.first) == code(d.second) == list(d.image)
            assert src.is_admissible(d.first) and src.is_admissible(d.second)


class TestDegree:
    def test_identity(self):
        assert degree(identity_code(golden_mean_graph())) == 1

    def test_two_block_presentation(self):
        code = higher_block(golden_mean_graph(), 2).code()
        assert degree(code) == 1 == brute_degree(code, 8)

    def test_two_copies(self):
        assert degree(two_copies_code()) == 2

    def test_diamond_raises(self):
        with pytest.raises(NotFiniteToOne):
            degree(four_to_two())

    def test_nontrivial_right_resolving(self):
        # a 2-to-1 code with a synchronizing word: degree 1 yet some points have 2 preimages
        src = build_sft("pqr", [("p", "q"), ("q", "p"), ("q", "r"), ("r", "p"), ("p", "p")])
        code = validate_code(src, full_shift(2), {"p": 0, "q": 1, "r": 1})
        assert is_finite_to_one(code)[0]
        assert degree(code) == brute_degree(code, 7)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 4), st.integers(0, 10_000))
    def test_matches_brute_force(self, n, seed):
        rng = np.random.default_rng(seed)
        syms, edges = random_graph(rng, n, 0.5)
        try:
            src = build_sft(syms, edges)
        except EmptyAfterPruning:
            return
        if not is_irreducible(src):
            return
        label = {s: int(rng.integers(2)) for s in src.symbols}
        tgt = build_sft((0, 1), [(a, b) for a in (0, 1) for b in (0, 1)])
        code = validate_code(src, tgt, label)
        if not is_finite_to_one(code)[0]:
            return
        # magic words of these tiny codes are short; length 9 is ample
        assert degree(code) == brute_degree(code, 9)


class TestFiberProduct:
    def test_identity_diagonal(self):
        sft = golden_mean_graph()
        fp = fiber_product(identity_code(sft))
        assert set(fp.sft.symbols) == fp.diagonal == {(0, 0), (1, 1)}
        assert set(fp.sft.edges) == {((a, a), (b, b)) for a, b in sft.edges}

    def test_four_to_two(self):
        fp = fiber_product(four_to_two())
        assert fp.sft.n_symbols == 8
        assert len(fp.diagonal) == 4

    def test_coordinates_are_codes(self):
        fp = fiber_product(four_to_two())
        for s in fp.sft.symbols:
            assert fp.left.mapping[s] == s[0] and fp.right.mapping[s] == s[1]


def toy_pcg_inputs():
    base = build_sft("AB", [("A", "A"), ("A", "B"), ("B", "A")])
    fiber = build_sft("rst", [("r", "s"), ("s", "t"), ("t", "r"), ("s", "s"), ("r", "r")])
    overlap = {("A", "r"), ("A", "s"), ("B", "s"), ("B", "t"), ("A", "t")}
    return base, fiber, overlap


class TestProductCodingGraph:
    def test_matches_enumeration(self):
        base, fiber, overlap = toy_pcg_inputs()
        pcg = build_product_coding_graph(base, fiber, overlap)
        want_v = {(p, r) for p in "AB" for r in "rst" if (p, r) in overlap}
        want_e = {(a, b) for a in want_v for b in want_v
                  if (a[0], b[0]) in base.edge_index and (a[1], b[1]) in fiber.edge_index}
        assert set(pcg.vertices) == want_v
        assert set(pcg.edges) == want_e
        assert set(pcg.product.edges) <= want_e

    def test_predicate_and_pairs_agree(self):
        base, fiber, overlap = toy_pcg_inputs()
        a = build_product_coding_graph(base, fiber, overlap)
        b = build_product_coding_graph(base, fiber, lambda p, r: (p, r) in overlap)
        assert a.product == b.product

    def test_full_overlap(self):
        base, fiber, _ = toy_pcg_inputs()
        pcg = build_product_coding_graph(base, fiber, lambda p, r: True)
        assert len(pcg.vertices) == base.n_symbols * fiber.n_symbols

    def test_empty(self):
        base, fiber, _ = toy_pcg_inputs()
        with pytest.raises(EmptyProduct):
            build_product_coding_graph(base, fiber, lambda p, r: False)

    def test_projections_admissible(self):
        base, fiber, overlap = toy_pcg_inputs()
        pcg = build_product_coding_graph(base, fiber, overlap)
        for n in range(1, 7):
            for w in pcg.product.words(n):
                assert base.is_admissible(pcg.proj_base(w))
                assert fiber.is_admissible(pcg.proj_fiber(w))

    def test_edge_veto(self):
        base, fiber, overlap = toy_pcg_inputs()
        pcg = build_product_coding_graph(base, fiber, overlap,
                                         fiber_edge_ok=lambda a, b: a[1] != b[1])
        assert all(a[1] != b[1] for a, b in pcg.edges)

    def test_core_matches_brute_scc(self):
        base, fiber, overlap = toy_pcg_inputs()
        pcg = build_product_coding_graph(base, fiber, overlap)
        prod = pcg.product
        comps = brute_components(prod.adjacency)
        seed = ("A", "r")
        want = next(c for c in comps if prod.index[seed] in c)
        core = irreducible_core(pcg, seed)
        assert set(core.product.symbols) == {prod.symbols[i] for i in want}
        assert set(core.product.edges) == {(a, b) for a, b in prod.edges
                                           if prod.index[a] in want and prod.index[b] in want}
        assert is_irreducible(core.product)
        image = {s[1] for s in core.product.symbols}
        assert (core.proj_fiber.uncovered_symbols == ()) == (image == set(fiber.symbols))

    def test_core_two_components(self):
        base = full_shift(2)
        fiber = build_sft("xy", [("x", "x"), ("y", "y")])
        pcg = build_product_coding_graph(base, fiber, lambda p, r: True)
        core = irreducible_core(pcg, (0, "y"))
        assert {s[1] for s in core.product.symbols} == {"y"}
        assert core.proj_fiber.surjective is False

    def test_core_trivial_seed(self):
        base = full_shift(1)
        fiber = build_sft("xyz", [("x", "x"), ("x", "y"), ("y", "z"), ("z", "z")])
        pcg = build_product_coding_graph(base, fiber, lambda p, r: True)
        with pytest.raises(TrivialComponent):
            irreducible_core(pcg, (0, "y"))
        with pytest.raises(UnknownSymbol):
            irreducible_core(pcg, (0, "w"))


class TestTruncation:
    def six(self):
        loader = Loader()
        return loader.code(str(DATA / "six_to_two.yaml")), loader.measure(str(DATA / "six_measure.yaml"))

    def test_full_level_is_conjugate(self):
        code, _ = self.six()
        xn, proj, _ = truncate_alphabet(code, 6)
        assert xn.n_symbols == 6 and xn.n_edges == code.source.n_edges
        assert degree(proj) == 1

    def test_level_zero(self):
        code, _ = self.six()
        xn, _, pin = truncate_alphabet(code, 0)
        assert xn.n_symbols == 2
        assert set(pin.mapping.values()) == {"0", "1"}

    def test_level_two_atoms(self):
        code, _ = self.six()
        xn, proj, _ = truncate_alphabet(code, 2)
        scheme = truncation_scheme(code, 2)
        assert scheme.atoms == (("a",), ("b",), ("c",), ("d", "e", "f"))
        want = {(scheme.atom_of[a], scheme.atom_of[b]) for a, b in code.source.edges}
        assert set(xn.edges) == want

    def test_bad_level(self):
        code, _ = self.six()
        with pytest.raises(BadLevel):
            truncate_alphabet(code, 7)
        with pytest.raises(BadLevel):
            truncate_alphabet(code, -1)

    def test_refinement(self):
        code, _ = self.six()
        for n in range(6):
            fine = truncation_scheme(code, n + 1)
            coarse = truncation_scheme(code, n)
            for atom in fine.atoms:
                assert len({coarse.atom_of[s] for s in atom}) == 1

    def test_factorization_exact(self):
        code, _ = self.six()
        for n in range(7):
            _, proj, pin = truncate_alphabet(code, n)
            for s in code.source.symbols:
                assert pin.mapping[proj.mapping[s]] == code.mapping[s]

    def test_entropies_monotone(self):
        code, mu = self.six()
        bounds = [hidden_entropy_bounds(mu, truncate_alphabet(code, n)[1], 6) for n in range(7)]
        for (lo, hi), (lo2, hi2) in zip(bounds, bounds[1:]):
            assert lo2 >= lo - 1e-9 and hi2 >= hi - 1e-9
        assert abs(bounds[-1][0] - entropy_rate(mu)) < 1e-9
        assert abs(bounds[-1][1] - entropy_rate(mu)) < 1e-9
