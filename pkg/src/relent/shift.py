"""Finite directed graphs and the subshifts of finite type they present.

A vertex shift is described by an ordered alphabet and a set of allowed
transitions ``a -> b``.  Every constructor prunes to the essential subgraph so
that each surviving symbol lies on a bi-infinite admissible sequence.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (BlockExplosion, DuplicateEdge, EmptyAfterPruning,
                     NoConvergence, NotIrreducible, TrivialComponent,
                     UnknownSymbol)

log = logging.getLogger(__name__)

Symbol = Hashable

DEFAULT_BLOCK_CAP = 10**6


@dataclass(frozen=True)
class Sft:
    """Essential vertex shift on a finite ordered alphabet.

    Use :func:`build_sft` rather than the constructor; it prunes and orders
    the edge list.  ``edges`` is sorted by (source index, target index) and is
    the canonical order for every per-edge array in the package.
    """

    symbols: tuple
    edges: tuple
    pruned: tuple = ()
    index: dict = field(init=False, repr=False, compare=False, hash=False)
    edge_index: dict = field(init=False, repr=False, compare=False, hash=False)
    edge_array: np.ndarray = field(init=False, repr=False, compare=False, hash=False)
    adjacency: np.ndarray = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        index = {s: i for i, s in enumerate(self.symbols)}
        ea = np.array([(index[a], index[b]) for a, b in self.edges], dtype=np.int64).reshape(-1, 2)
        adj = np.zeros((len(self.symbols), len(self.symbols)), dtype=bool)
        adj[ea[:, 0], ea[:, 1]] = True
        ea.setflags(write=False)
        adj.setflags(write=False)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "edge_index", {e: i for i, e in enumerate(self.edges)})
        object.__setattr__(self, "edge_array", ea)
        object.__setattr__(self, "adjacency", adj)

    @property
    def n_symbols(self) -> int:
        return len(self.symbols)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def essential(self) -> bool:
        return True

    def matrix(self) -> np.ndarray:
        """0/1 transition matrix as floats."""
        return self.adjacency.astype(float)

    def is_admissible(self, word: Sequence) -> bool:
        """True if consecutive symbols of ``word`` are joined by edges."""
        try:
            idx = [self.index[s] for s in word]
        except KeyError:
            return False
        return all(self.adjacency[a, b] for a, b in zip(idx, idx[1:]))

    def is_admissible_indices(self, path: np.ndarray) -> bool:
        path = np.asarray(path)
        if path.size < 2:
            return True
        return bool(self.adjacency[path[:-1], path[1:]].all())

    def words(self, length: int) -> list:
        """All admissible words of ``length`` symbols, in lexicographic index order."""
        if length <= 0:
            return [()]
        succ = [np.flatnonzero(row) for row in self.adjacency]
        out = [(i,) for i in range(self.n_symbols)]
        for _ in range(length - 1):
            out = [w + (j,) for w in out for j in succ[w[-1]]]
        return [tuple(self.symbols[i] for i in w) for w in out]


def build_sft(symbols: Iterable, edges: Iterable) -> Sft:
    """Build the essential shift on ``symbols`` with allowed transitions ``edges``.

    Symbols with no predecessor or no successor are removed repeatedly; the
    removed ones are recorded in ``Sft.pruned`` and logged.
    """
    symbols = tuple(symbols)
    if not symbols:
        raise EmptyAfterPruning("no symbols given")
    if len(set(symbols)) != len(symbols):
        raise DuplicateEdge("duplicate symbol in alphabet")
    known = set(symbols)
    edge_list = [tuple(e) for e in edges]
    seen = set()
    for e in edge_list:
        if len(e) != 2:
            raise UnknownSymbol(f"edge {e!r} is not a pair")
        if e[0] not in known or e[1] not in known:
            raise UnknownSymbol(f"edge {e!r} references an undeclared symbol", edge=e)
        if e in seen:
            raise DuplicateEdge(f"edge {e!r} listed twice", edge=e)
        seen.add(e)

    alive = set(symbols)
    while True:
        outs = {a for a, b in seen if a in alive and b in alive}
        ins = {b for a, b in seen if a in alive and b in alive}
        keep = alive & outs & ins
        if keep == alive:
            break
        alive = keep
    kept = tuple(s for s in symbols if s in alive)
    if not kept:
        raise EmptyAfterPruning("no symbol lies on a bi-infinite path")
    removed = tuple(s for s in symbols if s not in alive)
    if removed:
        log.info("pruned %d inessential symbols: %r", len(removed), removed)
    pos = {s: i for i, s in enumerate(kept)}
    kept_edges = sorted((e for e in seen if e[0] in alive and e[1] in alive),
                        key=lambda e: (pos[e[0]], pos[e[1]]))
    return Sft(kept, tuple(kept_edges), removed)


def full_shift(n: int) -> Sft:
    syms = tuple(range(n))
    return build_sft(syms, itertools.product(syms, syms))


def golden_mean() -> Sft:
    return build_sft((0, 1), [(0, 0), (0, 1), (1, 0)])


def cycle(n: int) -> Sft:
    syms = tuple(range(n))
    return build_sft(syms, [(i, (i + 1) % n) for i in range(n)])


def product_sft(first: Sft, second: Sft) -> Sft:
    """Direct product; symbols are pairs ``(a, b)`` and edges move both coordinates."""
    syms = [(a, b) for a in first.symbols for b in second.symbols]
    edges = [((a, b), (a2, b2)) for a, a2 in first.edges for b, b2 in second.edges]
    return build_sft(syms, edges)


# -- irreducible structure ----------------------------------------------------

@dataclass(frozen=True)
class Components:
    """Strongly connected components indexed by their least symbol.

    ``labels[i]`` is the component of symbol ``i``; ``dag`` holds pairs
    ``(c, d)`` with an edge from component ``c`` to a different component ``d``.
    """

    members: tuple
    labels: tuple
    nontrivial: tuple
    dag: frozenset

    def __len__(self):
        return len(self.members)

    def component_of(self, sft: Sft, symbol) -> int:
        return self.labels[sft.index[symbol]]


def strongly_connected_components(sft: Sft) -> Components:
    n = sft.n_symbols
    graph = csr_matrix(sft.adjacency.astype(np.int8))
    _, raw = connected_components(graph, directed=True, connection="strong")
    # relabel so component numbering follows the least contained symbol
    order = {}
    for i in range(n):
        order.setdefault(raw[i], len(order))
    labels = tuple(order[raw[i]] for i in range(n))
    members = [[] for _ in order]
    for i, c in enumerate(labels):
        members[c].append(sft.symbols[i])
    nontrivial = []
    for c, mem in enumerate(members):
        if len(mem) > 1:
            nontrivial.append(True)
        else:
            i = sft.index[mem[0]]
            nontrivial.append(bool(sft.adjacency[i, i]))
    dag = frozenset((labels[a], labels[b]) for a, b in sft.edge_array.tolist()
                    if labels[a] != labels[b])
    return Components(tuple(tuple(m) for m in members), labels, tuple(nontrivial), dag)


def is_irreducible(sft: Sft) -> bool:
    comps = strongly_connected_components(sft)
    return len(comps) == 1 and comps.nontrivial[0]


def restrict_to_component(sft: Sft, component: int, components: Components | None = None) -> Sft:
    """Induced subshift on one strongly connected component."""
    comps = components or strongly_connected_components(sft)
    if not 0 <= component < len(comps):
        raise TrivialComponent(f"no component {component}")
    if not comps.nontrivial[component]:
        raise TrivialComponent(f"component {component} carries no cycle")
    keep = set(comps.members[component])
    return build_sft([s for s in sft.symbols if s in keep],
                     [e for e in sft.edges if e[0] in keep and e[1] in keep])


def restrict_to_symbols(sft: Sft, keep: Iterable) -> Sft:
    keep = set(keep)
    return build_sft([s for s in sft.symbols if s in keep],
                     [e for e in sft.edges if e[0] in keep and e[1] in keep])


# -- Perron data ----------------------------------------------------------------

@dataclass(frozen=True)
class PerronData:
    value: float
    left: np.ndarray
    right: np.ndarray
    entropy: float
    residual: float
    iterations: int


def _power(mat: np.ndarray, tol: float, max_iter: int):
    # iterate with (A + I)/2: same Perron vector, no periodic oscillation
    n = mat.shape[0]
    lazy = 0.5 * (mat + np.eye(n))
    v = np.full(n, 1.0 / n)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = lazy @ v
        v = w / w.max()
        lam = 2.0 * (lazy @ v).max() - 1.0
        resid = np.abs(mat @ v - lam * v).max()
        if resid <= tol:
            return lam, v, resid, it
    raise NoConvergence(f"power iteration stalled at residual {resid:.3e}", residual=resid)


def perron(sft: Sft, tol: float = 1e-12, max_iter: int = 100_000) -> PerronData:
    """Spectral radius and Perron vectors of an irreducible shift.

    The returned vectors are strictly positive, ``left @ right == 1`` and
    ``entropy == log(value)`` in nats.
    """
    if not is_irreducible(sft):
        raise NotIrreducible("Perron data needs an irreducible graph")
    a = sft.matrix()
    lam_r, r, res_r, it_r = _power(a, tol, max_iter)
    lam_l, l, res_l, it_l = _power(a.T, tol, max_iter)
    lam = 0.5 * (lam_r + lam_l)
    l = l / (l @ r)
    resid = max(np.abs(a @ r - lam * r).max() / r.max(), np.abs(l @ a - lam * l).max() / l.max())
    return PerronData(float(lam), l, r, float(np.log(lam)), float(resid), max(it_r, it_l))


def topological_entropy(sft: Sft) -> float:
    """Largest Perron entropy over the nontrivial components."""
    comps = strongly_connected_components(sft)
    return max(perron(restrict_to_component(sft, c, comps)).entropy
               for c in range(len(comps)) if comps.nontrivial[c])


def parry_measure(sft: Sft):
    """Measure of maximal entropy of an irreducible shift, as a Markov measure."""
    from .measures import MarkovMeasure

    pd = perron(sft)
    ea = sft.edge_array
    q = pd.left[ea[:, 0]] * pd.right[ea[:, 1]] / pd.value
    return MarkovMeasure(sft, q / q.sum())


# -- higher block presentations ----------------------------------------------

@dataclass(frozen=True)
class BlockPresentation:
    order: int
    base: Sft
    block_sft: Sft
    symbol_map: dict = field(compare=False, hash=False)

    def code(self):
        """The conjugacy from the block shift back onto the base, as a 1-block code."""
        from .codes import validate_code
        return validate_code(self.block_sft, self.base, self.symbol_map)


def higher_block(sft: Sft, m: int, cap: int = DEFAULT_BLOCK_CAP) -> BlockPresentation:
    """Order-``m`` block presentation; ``m == 1`` returns the shift itself."""
    if m < 1:
        raise ValueError("block order must be >= 1")
    if m == 1:
        return BlockPresentation(1, sft, sft, {s: s for s in sft.symbols})
    succ = [np.flatnonzero(row).tolist() for row in sft.adjacency]
    words = [(i,) for i in range(sft.n_symbols)]
    for _ in range(m - 1):
        words = [w + (j,) for w in words for j in succ[w[-1]]]
        if len(words) > cap:
            raise BlockExplosion(f"more than {cap} admissible {m}-words", cap=cap)
    prefix = {}
    for w in words:
        prefix.setdefault(w[:-1], []).append(w)
    edges = [(w, w2) for w in words for w2 in prefix.get(w[1:], [])]
    label = lambda w: tuple(sft.symbols[i] for i in w)  # noqa: E731
    block = build_sft([label(w) for w in words], [(label(a), label(b)) for a, b in edges])
    return BlockPresentation(m, sft, block, {w: w[0] for w in block.symbols})
