"""Stationary Markov measures on vertex shifts and their entropies.

A measure is stored as its edge-frequency vector ``q`` aligned with
``Sft.edges``; the symbol distribution is the outbound mass ``m(v)``.  All
entropies are in nats, with ``psi(t) = -t log t`` and ``psi(0) = 0``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numba
import numpy as np

from . import rng
from .errors import (BlockExplosion, CodeMismatch, InvalidMeasure, NotALift, NotErgodic,
                     PathTooShortWarning, ReducibleAmbiguity,
                     UnsupportedEdgeWeight)
from .shift import Sft, build_sft, full_shift, product_sft, strongly_connected_components

LIFT_TOL = 1e-9


def psi(t):
    """``-t log t`` elementwise with the continuous extension ``psi(0) = 0``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = -t[pos] * np.log(t[pos])
    return out


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    """Shift-invariant Markov measure given by edge frequencies on ``host``.

    Construction checks nonnegativity, unit mass and flow balance (inbound
    mass equals outbound mass at each symbol) to within ``tol``.
    """

    host: Sft
    edge_freq: np.ndarray
    tol: float = field(default=LIFT_TOL, repr=False)

    def __post_init__(self):
        q = np.array(self.edge_freq, dtype=float).reshape(-1)
        if q.size != self.host.n_edges:
            raise InvalidMeasure(f"{q.size} frequencies for {self.host.n_edges} edges")
        if (q < -self.tol).any():
            raise InvalidMeasure("negative edge frequency", worst=float(q.min()))
        q = np.clip(q, 0.0, None)
        if abs(q.sum() - 1.0) > self.tol:
            raise InvalidMeasure(f"total mass {q.sum():.12g} != 1")
        q.setflags(write=False)
        object.__setattr__(self, "edge_freq", q)
        resid = self.stationarity_residual
        if resid > self.tol:
            raise InvalidMeasure(f"flow imbalance {resid:.3e}", residual=resid)

    @property
    def symbol_mass(self) -> np.ndarray:
        """Outbound mass per symbol (the one-dimensional marginal)."""
        return np.bincount(self.host.edge_array[:, 0], weights=self.edge_freq,
                           minlength=self.host.n_symbols)

    @property
    def inbound_mass(self) -> np.ndarray:
        return np.bincount(self.host.edge_array[:, 1], weights=self.edge_freq,
                           minlength=self.host.n_symbols)

    @property
    def stationarity_residual(self) -> float:
        return float(np.abs(self.symbol_mass - self.inbound_mass).max())

    def transition_matrix(self) -> np.ndarray:
        """Row-stochastic matrix on symbols; rows of massless symbols are zero."""
        n = self.host.n_symbols
        p = np.zeros((n, n))
        ea = self.host.edge_array
        p[ea[:, 0], ea[:, 1]] = self.edge_freq
        mass = p.sum(axis=1)
        nz = mass > 0
        p[nz] /= mass[nz, None]
        return p

    def edge_dict(self) -> dict:
        return dict(zip(self.host.edges, self.edge_freq.tolist()))

    def support_components(self) -> list:
        """Symbol sets of the irreducible pieces the measure charges."""
        live = self.edge_freq > 0
        ea = self.host.edge_array[live]
        if len(ea) == 0:
            return []
        sub = build_sft([self.host.symbols[i] for i in np.unique(ea)],
                        [(self.host.symbols[a], self.host.symbols[b]) for a, b in ea])
        comps = strongly_connected_components(sub)
        return [set(m) for m, nt in zip(comps.members, comps.nontrivial) if nt]

    @property
    def is_ergodic(self) -> bool:
        return len(self.support_components()) == 1


def entropy_rate(mu: MarkovMeasure) -> float:
    """Entropy of the edge distribution minus entropy of the symbol distribution."""
    return float(psi(mu.edge_freq).sum() - psi(mu.symbol_mass).sum())


def stationary_from_transition(sft: Sft, weights, component=None, tol: float = 1e-12) -> MarkovMeasure:
    """Stationary Markov measure for a row-stochastic choice of edge weights.

    ``weights`` is a ``(n, n)`` array or a mapping ``{(a, b): p}``.  When the
    weights have more than one closed class, ``component`` must name a symbol
    of the class to use.
    """
    n = sft.n_symbols
    if isinstance(weights, Mapping):
        p = np.zeros((n, n))
        for (a, b), w in weights.items():
            if a not in sft.index or b not in sft.index:
                raise UnsupportedEdgeWeight(f"weight on unknown edge {(a, b)!r}")
            p[sft.index[a], sft.index[b]] = w
    else:
        p = np.array(weights, dtype=float)
        if p.shape != (n, n):
            raise UnsupportedEdgeWeight(f"weights shape {p.shape} != {(n, n)}")
    if (p < 0).any():
        raise UnsupportedEdgeWeight("negative transition weight")
    off = (p > 0) & ~sft.adjacency
    if off.any():
        a, b = np.argwhere(off)[0]
        raise UnsupportedEdgeWeight(f"weight on non-edge {(sft.symbols[a], sft.symbols[b])!r}")
    rows = p.sum(axis=1)
    bad = np.abs(rows - 1.0) > tol
    if bad.any():
        raise UnsupportedEdgeWeight(f"row {sft.symbols[np.argmax(bad)]!r} sums to {rows[bad][0]!r}")

    # closed classes of the weighted graph carry the stationary laws
    supp = p > 0
    support_sft = Sft(sft.symbols, tuple((sft.symbols[a], sft.symbols[b]) for a, b in np.argwhere(supp)))
    comps = strongly_connected_components(support_sft)
    closed = [c for c in range(len(comps)) if not any(d[0] == c for d in comps.dag)]
    if component is None:
        if len(closed) > 1:
            raise ReducibleAmbiguity(f"{len(closed)} closed classes; pass component=",
                                     classes=[comps.members[c] for c in closed])
        target = closed[0]
    else:
        target = comps.component_of(sft, component)
        if target not in closed:
            raise ReducibleAmbiguity(f"symbol {component!r} is not in a closed class")
    members = [sft.index[s] for s in comps.members[target]]
    sub = p[np.ix_(members, members)]
    k = len(members)
    # pi (P - I) = 0 with sum(pi) = 1
    a = np.vstack([(sub - np.eye(k)).T, np.ones(k)])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    pi_sub = np.linalg.lstsq(a, rhs, rcond=None)[0]
    pi_sub = np.clip(pi_sub, 0.0, None)
    pi_sub /= pi_sub.sum()
    for _ in range(3):
        # a few power steps polish the residual to machine level
        pi_sub = pi_sub @ sub
        pi_sub /= pi_sub.sum()
    pi = np.zeros(n)
    pi[members] = pi_sub
    ea = sft.edge_array
    q = pi[ea[:, 0]] * p[ea[:, 0], ea[:, 1]]
    return MarkovMeasure(sft, q / q.sum())


def bernoulli(probs) -> MarkovMeasure:
    """I.i.d. measure on the full shift over ``range(len(probs))``."""
    probs = np.asarray(probs, dtype=float)
    sft = full_shift(len(probs))
    ea = sft.edge_array
    return MarkovMeasure(sft, probs[ea[:, 0]] * probs[ea[:, 1]])


def product_measure(first: MarkovMeasure, second: MarkovMeasure) -> MarkovMeasure:
    """Independent coupling on :func:`~relent.shift.product_sft`."""
    host = product_sft(first.host, second.host)
    qa, qb = first.edge_dict(), second.edge_dict()
    q = [qa[(a, a2)] * qb[(b, b2)] for (a, b), (a2, b2) in host.edges]
    return MarkovMeasure(host, q)


# -- images under 1-block codes ---------------------------------------------

@dataclass(frozen=True, eq=False)
class HiddenMarkovMeasure:
    """Image of a Markov measure under a 1-block code.

    ``marginal`` is the exact two-block law of the image, presented as a
    Markov measure on the target; the image process itself is Markov only in
    special cases.
    """

    upstream: MarkovMeasure
    code: object
    marginal: MarkovMeasure


def _image_edge_freq(mu: MarkovMeasure, code) -> np.ndarray:
    img = code.edge_image_index()
    return np.bincount(img, weights=mu.edge_freq, minlength=code.target.n_edges)


def pushforward(mu: MarkovMeasure, code) -> HiddenMarkovMeasure:
    if code.source != mu.host:
        raise CodeMismatch("code source differs from the measure's host")
    q = _image_edge_freq(mu, code)
    return HiddenMarkovMeasure(mu, code, MarkovMeasure(code.target, q, tol=max(mu.tol, 1e-9)))


def lift_residual(mu: MarkovMeasure, nu: MarkovMeasure, code) -> tuple:
    """Worst per-edge gap between the image of ``mu`` and ``nu``, and that edge."""
    if code.source != mu.host:
        raise CodeMismatch("code source differs from the lift's host")
    if code.target != nu.host:
        raise CodeMismatch("code target differs from the base measure's host")
    gap = np.abs(_image_edge_freq(mu, code) - nu.edge_freq)
    worst = int(np.argmax(gap))
    return float(gap[worst]), nu.host.edges[worst]


def relative_entropy(mu: MarkovMeasure, nu: MarkovMeasure, code, tol: float = LIFT_TOL) -> float:
    """``h(mu) - h(nu)`` for a lift ``mu`` of ``nu`` through ``code``."""
    resid, edge = lift_residual(mu, nu, code)
    if resid > tol:
        raise NotALift(f"image misses nu by {resid:.3e} on edge {edge!r}", residual=resid, edge=edge)
    return entropy_rate(mu) - entropy_rate(nu)


def hidden_entropy_bounds(mu: MarkovMeasure, code, block_length: int, max_words: int = 2_000_000) -> tuple:
    """Two-sided bounds on the entropy of the image of ``mu`` under ``code``.

    Returns ``(lower, upper)`` with upper = H(Y0 | Y-l..Y-1) and
    lower = H(Y0 | Y-l..Y-1, X-l-1); both converge to the image entropy as
    the block length grows.
    """
    if code.source != mu.host:
        raise CodeMismatch("code source differs from the measure's host")
    p = mu.transition_matrix()
    pi = mu.symbol_mass
    lab = code.index_map
    n_y = code.target.n_symbols
    masks = np.array([(lab == y).astype(float) for y in range(n_y)])

    def block_entropies(alpha, steps):
        ent = [float(psi(alpha.sum(axis=1)).sum())]
        for _ in range(steps):
            nxt = alpha @ p
            alpha = (nxt[:, None, :] * masks[None, :, :]).reshape(-1, len(pi))
            alpha = alpha[alpha.sum(axis=1) > 0]
            if len(alpha) > max_words:
                raise BlockExplosion(f"more than {max_words} image words", cap=max_words)
            ent.append(float(psi(alpha.sum(axis=1)).sum()))
        return ent

    start = masks * pi[None, :]
    up = block_entropies(start[start.sum(axis=1) > 0], block_length)
    upper = up[-1] - up[-2] if block_length >= 1 else up[0]
    seed = np.diag(pi)[pi > 0]
    lo = block_entropies(seed, block_length + 1)
    lower = lo[-1] - lo[-2]
    return float(lower), float(upper)


# -- sampling ------------------------------------------------------------------

@numba.njit(cache=True)
def _walk(cum, init_cum, u):
    n = u.shape[0]
    out = np.empty(n, dtype=np.int64)
    k = init_cum.shape[0]
    x = 0
    while x < k - 1 and u[0] > init_cum[x]:
        x += 1
    out[0] = x
    for t in range(1, n):
        row = cum[x]
        j = 0
        while j < k - 1 and u[t] > row[j]:
            j += 1
        x = j
        out[t] = x
    return out


def _cumulative(p):
    cum = np.cumsum(p, axis=-1)
    cum[..., -1] = np.where(cum[..., -1] > 0, 1.0, 0.0)
    return cum


def walk(mu: MarkovMeasure, u: np.ndarray) -> np.ndarray:
    """Markov path driven by the uniforms ``u`` (first draw picks the start)."""
    p = mu.transition_matrix()
    init = _cumulative(mu.symbol_mass / mu.symbol_mass.sum())
    # massless symbols are never entered; give them a dummy row
    return _walk(_cumulative(p), init, np.ascontiguousarray(u, dtype=float))


def sample_path(mu: MarkovMeasure, length: int, seed: int) -> np.ndarray:
    """Stationary path of ``length`` symbol indices into ``mu.host.symbols``."""
    if not mu.is_ergodic:
        raise NotErgodic("sampling needs a measure supported on one irreducible piece")
    return walk(mu, rng.uniforms(seed, rng.STREAM_PATH, 0, length))


def path_to_symbols(mu_or_sft, path) -> list:
    sft = getattr(mu_or_sft, "host", mu_or_sft)
    return [sft.symbols[i] for i in np.asarray(path)]


# -- empirical entropy -------------------------------------------------------

@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    std_error: float
    block_length: int
    path_length: int


def _block_codes(path: np.ndarray, k: int, base: int) -> np.ndarray:
    n = len(path) - k + 1
    codes = np.zeros(n, dtype=np.int64)
    for i in range(k):
        codes = codes * base + path[i:i + n]
    return codes


def _plugin(codes: np.ndarray, n_codes: int | None, miller_madow: bool) -> float:
    if len(codes) == 0:
        return 0.0
    if n_codes is not None:
        counts = np.bincount(codes, minlength=0)
        counts = counts[counts > 0]
    else:
        counts = np.unique(codes, return_counts=True)[1]
    total = counts.sum()
    h = float(psi(counts / total).sum())
    if miller_madow:
        h += (len(counts) - 1) / (2.0 * total)
    return h


def empirical_entropy(path, block_length: int, alphabet_size: int | None = None,
                      miller_madow: bool = True, n_boot: int = 32,
                      boot_block: int = 1000, seed: int = 0) -> EntropyEstimate:
    """Conditional block entropy ``H(l) - H(l-1)`` of an observed path.

    The standard error comes from a moving-block bootstrap: ``n_boot``
    resamples assembled from segments of ``boot_block`` symbols, with blocks
    counted only inside segments.
    """
    path = np.asarray(path, dtype=np.int64)
    ell = int(block_length)
    if ell < 1:
        raise ValueError("block length must be >= 1")
    n = len(path)
    if n <= ell:
        raise ValueError("path shorter than one block")
    base = int(alphabet_size if alphabet_size is not None else path.max() + 1)
    dense = base ** ell <= 1 << 22
    key = base ** ell if dense else None
    cur = _block_codes(path, ell, base)
    prev = _block_codes(path, ell - 1, base) if ell > 1 else None

    def estimate(idx_cur, idx_prev):
        h = _plugin(cur[idx_cur], key, miller_madow)
        if prev is not None:
            h -= _plugin(prev[idx_prev], key, miller_madow)
        return h

    value = estimate(slice(None), slice(None))

    seg = min(boot_block, max(ell + 1, n // 8))
    n_seg = max(1, math.ceil(n / seg))
    starts_all = rng.uniforms(seed, rng.STREAM_BOOTSTRAP, 0, n_boot * n_seg).reshape(n_boot, n_seg)
    off_cur = np.arange(seg - ell + 1)
    off_prev = np.arange(seg - ell + 2)
    reps = []
    for b in range(n_boot):
        starts = (starts_all[b] * (n - seg + 1)).astype(np.int64)
        ic = (starts[:, None] + off_cur[None, :]).reshape(-1)
        ip = (starts[:, None] + off_prev[None, :]).reshape(-1) if prev is not None else None
        reps.append(estimate(ic, ip))
    std = float(np.std(reps, ddof=1)) if n_boot > 1 else 0.0

    needed = 100 * base ** ell
    if n < needed:
        warnings.warn(f"path of {n} symbols is short for block length {ell} "
                      f"(recommended {needed})", PathTooShortWarning, stacklevel=2)
        std *= math.sqrt(needed / n)
    return EntropyEstimate(float(value), std, ell, n)
