"""1-block factor codes between vertex shifts.

Covers validation and image analysis, diamonds and degree for finite-to-one
codes, fiber products, the product coding graph built from a base graph, a
fiber graph and an overlap relation, and the alphabet truncation ladder
``alpha_n``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import (BadLevel, EdgeNotPreserved, EmptyAfterPruning, EmptyProduct,
                     Inconclusive, NotFiniteToOne, NotIrreducible, TrivialComponent,
                     UnknownSymbol)
from .shift import (Sft, build_sft, is_irreducible, restrict_to_component,
                    strongly_connected_components)

SUBSET_CAP = 200_000


@dataclass(frozen=True, eq=False)
class OneBlockCode:
    """Symbol map ``source -> target`` that sends every edge to an edge.

    ``surjective`` is decided on the level of languages (every admissible
    target word has a preimage path); it is ``None`` if the subset search hit
    its cap.
    """

    source: Sft
    target: Sft
    mapping: dict
    index_map: np.ndarray = field(repr=False)
    surjective: bool | None
    uncovered_symbols: tuple = ()
    uncovered_edges: tuple = ()
    missing_word: tuple | None = None

    def __call__(self, word) -> list:
        return [self.mapping[s] for s in word]

    def apply_indices(self, path) -> np.ndarray:
        return self.index_map[np.asarray(path)]

    def edge_image_index(self) -> np.ndarray:
        """Index in ``target.edges`` of the image of each source edge."""
        ea = self.source.edge_array
        img = self.index_map[ea]
        lookup = np.full((self.target.n_symbols, self.target.n_symbols), -1, dtype=np.int64)
        tea = self.target.edge_array
        lookup[tea[:, 0], tea[:, 1]] = np.arange(self.target.n_edges)
        return lookup[img[:, 0], img[:, 1]]

    def preimage(self, target_symbol) -> list:
        return [s for s in self.source.symbols if self.mapping[s] == target_symbol]

    def compose(self, after: "OneBlockCode") -> "OneBlockCode":
        """``after`` applied to the output of this code."""
        return validate_code(self.source, after.target,
                             {s: after.mapping[self.mapping[s]] for s in self.source.symbols})


def _language_surjective(source: Sft, target: Sft, lab: np.ndarray, cap: int = SUBSET_CAP):
    """Subset construction over target words; returns (flag, missing word)."""
    pre = [frozenset(np.flatnonzero(lab == y).tolist()) for y in range(target.n_symbols)]
    succ = [frozenset(np.flatnonzero(row).tolist()) for row in source.adjacency]
    tsucc = [np.flatnonzero(row).tolist() for row in target.adjacency]
    for y in range(target.n_symbols):
        if not pre[y]:
            return False, (target.symbols[y],)
    seen = {}
    queue = deque()
    for y in range(target.n_symbols):
        state = (y, pre[y])
        seen[state] = None
        queue.append(state)
    while queue:
        y, s = queue.popleft()
        reach = frozenset().union(*(succ[x] for x in s))
        for y2 in tsucc[y]:
            s2 = reach & pre[y2]
            if not s2:
                word = [target.symbols[y2]]
                state = (y, s)
                while state is not None:
                    word.append(target.symbols[state[0]])
                    state = seen[state]
                return False, tuple(reversed(word))
            nxt = (y2, s2)
            if nxt not in seen:
                seen[nxt] = (y, s)
                if len(seen) > cap:
                    return None, None
                queue.append(nxt)
    return True, None


def validate_code(source: Sft, target: Sft, symbol_map) -> OneBlockCode:
    """Check that ``symbol_map`` induces a 1-block code and describe its image."""
    mapping = dict(symbol_map.items() if isinstance(symbol_map, Mapping) else symbol_map)
    missing = [s for s in source.symbols if s not in mapping]
    if missing:
        raise UnknownSymbol(f"map undefined on {missing!r}")
    for s in source.symbols:
        if mapping[s] not in target.index:
            raise UnknownSymbol(f"{s!r} maps to {mapping[s]!r}, not a target symbol")
    mapping = {s: mapping[s] for s in source.symbols}
    lab = np.array([target.index[mapping[s]] for s in source.symbols], dtype=np.int64)
    lab.setflags(write=False)
    for a, b in source.edges:
        if (mapping[a], mapping[b]) not in target.edge_index:
            raise EdgeNotPreserved(f"edge {(a, b)!r} maps to non-edge {(mapping[a], mapping[b])!r}",
                                   edge=(a, b))
    img_syms = set(mapping.values())
    img_edges = {(mapping[a], mapping[b]) for a, b in source.edges}
    surj, word = _language_surjective(source, target, lab)
    return OneBlockCode(source, target, mapping, lab, surj,
                        tuple(s for s in target.symbols if s not in img_syms),
                        tuple(e for e in target.edges if e not in img_edges), word)


def identity_code(sft: Sft) -> OneBlockCode:
    return validate_code(sft, sft, {s: s for s in sft.symbols})


def projection_code(product: Sft, base: Sft, coordinate: int = 0) -> OneBlockCode:
    """Coordinate projection from a shift whose symbols are tuples."""
    return validate_code(product, base, {s: s[coordinate] for s in product.symbols})


# -- finite-to-one analysis ---------------------------------------------------

@dataclass(frozen=True)
class Diamond:
    """Two distinct source paths with equal endpoints and equal images."""

    first: tuple
    second: tuple
    image: tuple


def find_diamond(code: OneBlockCode) -> Diamond | None:
    """Shortest diamond from the least possible diagonal start, or ``None``."""
    src = code.source
    lab = code.index_map
    adj = src.adjacency
    n = src.n_symbols
    succ = [np.flatnonzero(row).tolist() for row in adj]

    def pair_succ(i, j):
        for a in succ[i]:
            for b in succ[j]:
                if lab[a] == lab[b]:
                    yield a, b

    for d in range(n):
        parent = {}
        queue = deque()
        for a, b in pair_succ(d, d):
            if a != b and (a, b) not in parent:
                parent[(a, b)] = None
                queue.append((a, b))
        hit = None
        while queue and hit is None:
            cur = queue.popleft()
            for nxt in pair_succ(*cur):
                if nxt[0] == nxt[1]:
                    hit = (cur, nxt)
                    break
                if nxt not in parent:
                    parent[nxt] = cur
                    queue.append(nxt)
        if hit is None:
            continue
        chain = [hit[1]]
        node = hit[0]
        while node is not None:
            chain.append(node)
            node = parent[node]
        chain.append((d, d))
        chain.reverse()
        sym = src.symbols
        first = tuple(sym[a] for a, _ in chain)
        second = tuple(sym[b] for _, b in chain)
        return Diamond(first, second, tuple(code.mapping[s] for s in first))
    return None


def is_finite_to_one(code: OneBlockCode, require_irreducible: bool = True) -> tuple:
    """``(True, None)`` if the code has no diamond, else ``(False, witness)``."""
    if require_irreducible and not is_irreducible(code.source):
        raise NotIrreducible("diamond criterion stated for irreducible sources")
    witness = find_diamond(code)
    return witness is None, witness


def _reachable_subsets(start: list, step: Callable, tsucc: list, cap_depth: int):
    """Breadth-first closure of (target symbol, subset) states up to ``cap_depth``."""
    seen = {(y, s) for y, s in enumerate(start) if s}
    frontier = list(seen)
    depth = 1
    while frontier:
        if depth >= cap_depth:
            raise Inconclusive(f"subset search still growing at word length {depth}")
        nxt = []
        for y, s in frontier:
            for y2 in tsucc[y]:
                s2 = step(s, y2)
                if s2 and (y2, s2) not in seen:
                    seen.add((y2, s2))
                    nxt.append((y2, s2))
        frontier = nxt
        depth += 1
    return seen


def degree(code: OneBlockCode, max_word_length: int | None = None) -> int:
    """Degree of a finite-to-one code.

    The minimum over target words ``w`` and positions ``i`` of the number of
    distinct source symbols seen at ``i`` across preimage paths of ``w``.
    Forward and backward subset automata enumerate every achievable pair of
    prefix/suffix symbol sets, so the minimum is exact once both closures
    terminate within ``max_word_length`` (default ``2 |symbols|**2``).
    """
    ok, witness = is_finite_to_one(code, require_irreducible=False)
    if not ok:
        raise NotFiniteToOne("code has a diamond", witness=witness)
    src, tgt, lab = code.source, code.target, code.index_map
    cap = max_word_length or 2 * src.n_symbols ** 2
    pre = [frozenset(np.flatnonzero(lab == y).tolist()) for y in range(tgt.n_symbols)]
    succ = [frozenset(np.flatnonzero(r).tolist()) for r in src.adjacency]
    pred = [frozenset(np.flatnonzero(c).tolist()) for c in src.adjacency.T]
    tsucc = [np.flatnonzero(r).tolist() for r in tgt.adjacency]
    tpred = [np.flatnonzero(c).tolist() for c in tgt.adjacency.T]
    fwd = _reachable_subsets(pre, lambda s, y: frozenset().union(*(succ[x] for x in s)) & pre[y],
                             tsucc, cap)
    bwd = _reachable_subsets(pre, lambda s, y: frozenset().union(*(pred[x] for x in s)) & pre[y],
                             tpred, cap)
    by_symbol = {}
    for y, s in bwd:
        by_symbol.setdefault(y, []).append(s)
    best = None
    for y, f in fwd:
        for b in by_symbol.get(y, ()):
            k = len(f & b)
            if k and (best is None or k < best):
                best = k
    if best is None:
        raise Inconclusive("no target word has a preimage")
    return best


# -- fiber product -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FiberProduct:
    sft: Sft
    left: OneBlockCode
    right: OneBlockCode
    diagonal: frozenset


def fiber_product(code: OneBlockCode) -> FiberProduct:
    """Pairs of source symbols with equal image, moving coordinatewise."""
    src = code.source
    syms = [(u, v) for u in src.symbols for v in src.symbols if code.mapping[u] == code.mapping[v]]
    edges = [((u, v), (u2, v2)) for u, u2 in src.edges for v, v2 in src.edges
             if code.mapping[u] == code.mapping[v] and code.mapping[u2] == code.mapping[v2]]
    sft = build_sft(syms, edges)
    left = validate_code(sft, src, {s: s[0] for s in sft.symbols})
    right = validate_code(sft, src, {s: s[1] for s in sft.symbols})
    return FiberProduct(sft, left, right, frozenset(s for s in sft.symbols if s[0] == s[1]))


# -- product coding graph --------------------------------------------------------

class _Memo:
    """Write-once cache around an overlap predicate or an explicit pair list."""

    def __init__(self, relation):
        if callable(relation):
            self._fn = relation
            self._cache = {}
        else:
            pairs = {tuple(p) for p in relation}
            self._fn = None
            self._cache = {p: True for p in pairs}

    def __call__(self, *key):
        if self._fn is None:
            return self._cache.get(key, False)
        if key not in self._cache:
            self._cache[key] = bool(self._fn(*key))
        return self._cache[key]


@dataclass(frozen=True, eq=False)
class ProductCodingGraph:
    """Product of a base graph and a fiber graph restricted to overlapping pairs.

    ``vertices``/``edges`` are the raw sets before pruning; ``product`` is the
    essential shift they present.
    """

    base: Sft
    fiber: Sft
    overlap: Callable
    vertices: tuple
    edges: tuple
    product: Sft
    proj_base: OneBlockCode
    proj_fiber: OneBlockCode

    def report(self) -> dict:
        return {
            "base_symbols": self.base.n_symbols,
            "fiber_symbols": self.fiber.n_symbols,
            "raw_vertices": len(self.vertices),
            "raw_edges": len(self.edges),
            "vertices": self.product.n_symbols,
            "edges": self.product.n_edges,
            "pruned": [list(s) for s in self.product.pruned],
            "proj_base_surjective": self.proj_base.surjective,
            "proj_fiber_surjective": self.proj_fiber.surjective,
            "fiber_uncovered_symbols": list(self.proj_fiber.uncovered_symbols),
        }


def build_product_coding_graph(base: Sft, fiber: Sft, overlap, fiber_edge_ok=None) -> ProductCodingGraph:
    """Vertices ``(P, R)`` with ``overlap(P, R)``; edges when both coordinates step.

    ``overlap`` is a predicate ``(P, R) -> bool`` or an iterable of pairs.
    ``fiber_edge_ok``, if given, is an extra predicate on product edges
    ``((P, R), (P2, R2))`` that can veto transitions the fiber graph allows.
    """
    ov = _Memo(overlap)
    verts = tuple((p, r) for p in base.symbols for r in fiber.symbols if ov(p, r))
    vset = set(verts)
    edges = []
    for p, p2 in base.edges:
        for r, r2 in fiber.edges:
            a, b = (p, r), (p2, r2)
            if a in vset and b in vset and (fiber_edge_ok is None or fiber_edge_ok(a, b)):
                edges.append((a, b))
    if not verts:
        raise EmptyProduct("no overlapping pair")
    try:
        product = build_sft(verts, edges)
    except EmptyAfterPruning as exc:
        raise EmptyProduct("no overlapping pair survives pruning") from exc
    return ProductCodingGraph(base, fiber, ov, verts, tuple(edges), product,
                              validate_code(product, base, {s: s[0] for s in product.symbols}),
                              validate_code(product, fiber, {s: s[1] for s in product.symbols}))


def irreducible_core(pcg: ProductCodingGraph, seed_symbol) -> ProductCodingGraph:
    """Maximal irreducible component of the product through ``seed_symbol``."""
    seed_symbol = tuple(seed_symbol)
    if seed_symbol not in pcg.product.index:
        raise UnknownSymbol(f"{seed_symbol!r} is not a product symbol")
    comps = strongly_connected_components(pcg.product)
    cid = comps.component_of(pcg.product, seed_symbol)
    if not comps.nontrivial[cid]:
        raise TrivialComponent(f"{seed_symbol!r} lies on no cycle")
    core = restrict_to_component(pcg.product, cid, comps)
    return ProductCodingGraph(pcg.base, pcg.fiber, pcg.overlap, pcg.vertices, pcg.edges, core,
                              validate_code(core, pcg.base, {s: s[0] for s in core.symbols}),
                              validate_code(core, pcg.fiber, {s: s[1] for s in core.symbols}))


# -- alphabet truncation ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TruncationScheme:
    """Level-``n`` partition of the source alphabet.

    Atoms are tuples of source symbols: the first ``n`` symbols of the
    enumeration as singletons, then the remaining symbols grouped by their
    image label, in target order.
    """

    enumeration: tuple
    labels: dict
    level: int
    atoms: tuple
    atom_of: dict
    atom_label: dict


def truncation_scheme(code: OneBlockCode, n: int) -> TruncationScheme:
    src = code.source
    if not 0 <= n <= src.n_symbols:
        raise BadLevel(f"level {n} outside 0..{src.n_symbols}")
    enum = src.symbols
    atoms = [(s,) for s in enum[:n]]
    rest = enum[n:]
    for y in code.target.symbols:
        group = tuple(s for s in rest if code.mapping[s] == y)
        if group:
            atoms.append(group)
    atom_of = {s: a for a in atoms for s in a}
    label = {a: code.mapping[a[0]] for a in atoms}
    return TruncationScheme(enum, dict(code.mapping), n, tuple(atoms), atom_of, label)


def truncate_alphabet(code: OneBlockCode, n: int) -> tuple:
    """``(X_n, proj_n, pi_n)`` with ``code == pi_n . proj_n`` symbolwise."""
    scheme = truncation_scheme(code, n)
    src = code.source
    edges = sorted({(scheme.atom_of[a], scheme.atom_of[b]) for a, b in src.edges},
                   key=lambda e: (scheme.atoms.index(e[0]), scheme.atoms.index(e[1])))
    xn = build_sft(scheme.atoms, edges)
    proj = validate_code(src, xn, scheme.atom_of)
    pin = validate_code(xn, code.target, scheme.atom_label)
    return xn, proj, pin
