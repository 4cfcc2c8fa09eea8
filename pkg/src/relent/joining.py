"""Relatively independent joinings and the switching construction.

Two lifts ``mu1``, ``mu2`` of a common factor measure are coupled by drawing
one factor path and sampling each lift conditionally on it.  Paths from the
coupling are spliced at coincidence times under fair coin flips; the entropy
gain of the spliced process is compared with the integral of ``Xi``, the
Jensen gap of the two one-step conditionals on the set where the paths agree
at time ``-1``.

Window conventions: a window has ``2w + 1`` positions and time ``0`` is the
centre, index ``w``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import rng
from .codes import OneBlockCode, projection_code
from .errors import (CodeMismatch, EmptyS, InadmissibleWindow, NoPreimage,
                     NotALift, WindowMismatch)
from .measures import (LIFT_TOL, MarkovMeasure, empirical_entropy, entropy_rate,
                       lift_residual, product_measure, psi, pushforward, walk)

DEFAULT_WINDOW = 64


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    n: int


def product_lift(nu: MarkovMeasure, fiber: MarkovMeasure) -> tuple:
    """``(nu x fiber, projection onto nu's shift)``."""
    mu = product_measure(nu, fiber)
    return mu, projection_code(mu.host, nu.host, 0)


def _inverse_cdf(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(weights, axis=1)
    return np.minimum((cum < (u * cum[:, -1])[:, None]).sum(axis=1), weights.shape[1] - 1)


class ConditionalFilter:
    """Conditional law of a Markov measure given its image on a finite window."""

    def __init__(self, measure: MarkovMeasure, code: OneBlockCode, w: int = DEFAULT_WINDOW):
        if code.source != measure.host:
            raise CodeMismatch("code source differs from the measure's host")
        self.measure = measure
        self.code = code
        self.w = int(w)
        self.p = measure.transition_matrix()
        self.pi = measure.symbol_mass
        lab = code.index_map
        self.masks = np.array([(lab == y).astype(float) for y in range(code.target.n_symbols)])

    @property
    def width(self) -> int:
        return 2 * self.w + 1

    def forward(self, y: np.ndarray) -> np.ndarray:
        """Normalized filtering weights ``alpha[n, t, x]`` for image windows ``y``."""
        n, t_len = y.shape
        alpha = np.empty((n, t_len, len(self.pi)))
        a = self.pi[None, :] * self.masks[y[:, 0]]
        for t in range(t_len):
            if t:
                a = (a @ self.p) * self.masks[y[:, t]]
            s = a.sum(axis=1)
            if (s <= 0).any():
                raise InadmissibleWindow("image window has no preimage path",
                                         sample=int(np.argmin(s)), position=t)
            a = a / s[:, None]
            alpha[:, t] = a
        return alpha

    def sample(self, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Backward sampling from the filtering weights; ``u`` has ``y``'s shape."""
        alpha = self.forward(y)
        n, t_len = y.shape
        x = np.empty((n, t_len), dtype=np.int64)
        x[:, -1] = _inverse_cdf(alpha[:, -1], u[:, -1])
        for t in range(t_len - 2, -1, -1):
            x[:, t] = _inverse_cdf(alpha[:, t] * self.p[:, x[:, t + 1]].T, u[:, t])
        return x

    def one_step(self, prev: np.ndarray, y_future: np.ndarray) -> np.ndarray:
        """``P(x_0 = j | x_-1 = prev, y_0..y_T)`` for each row, shape ``(n, S)``."""
        n, t_len = y_future.shape
        beta = np.ones((n, len(self.pi)))
        for t in range(t_len - 1, 0, -1):
            beta = (beta * self.masks[y_future[:, t]]) @ self.p.T
            beta /= beta.max(axis=1, keepdims=True)
        a = self.p[prev] * self.masks[y_future[:, 0]] * beta
        s = a.sum(axis=1, keepdims=True)
        if (s <= 0).any():
            raise InadmissibleWindow("conditioning event has probability zero")
        return a / s


def _check_window(flt: ConditionalFilter, y_window) -> np.ndarray:
    tgt = flt.code.target
    if len(y_window) != flt.width:
        raise WindowMismatch(f"window of {len(y_window)} symbols, expected {flt.width}")
    try:
        y = np.array([tgt.index[s] for s in y_window], dtype=np.int64)
    except KeyError as exc:
        raise InadmissibleWindow(f"unknown image symbol {exc.args[0]!r}") from None
    empty = [tgt.symbols[i] for i in np.unique(y) if flt.masks[i].sum() == 0]
    if empty:
        raise NoPreimage(f"image symbols without preimage: {empty!r}")
    if not tgt.is_admissible_indices(y):
        raise InadmissibleWindow("image window is not admissible")
    return y


def conditional_sample(flt: ConditionalFilter, y_window, seed: int) -> list:
    """One preimage window drawn from the exact conditional law."""
    y = _check_window(flt, y_window)[None, :]
    u = rng.uniform_rows(seed, rng.STREAM_FIRST, 0, 1, flt.width)
    x = flt.sample(y, u)[0]
    return [flt.measure.host.symbols[i] for i in x]


# -- joinings -------------------------------------------------------------------

@dataclass(frozen=True)
class JoinedWindows:
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray


class JoiningSampler:
    """Seeded sampler of the relatively independent joining over ``code``.

    Sample ``i`` depends only on ``(seed, i)``.  The first coordinate is a
    stationary ``mu1`` window, its image is the factor window, and the
    second coordinate is drawn from ``mu2`` conditioned on that image.
    """

    def __init__(self, mu1: MarkovMeasure, mu2: MarkovMeasure, code: OneBlockCode,
                 w: int = DEFAULT_WINDOW, seed: int = 0, nu: MarkovMeasure | None = None,
                 tol: float = LIFT_TOL):
        if nu is None:
            nu = pushforward(mu1, code).marginal
        for name, mu in (("mu1", mu1), ("mu2", mu2)):
            resid, edge = lift_residual(mu, nu, code)
            if resid > tol:
                raise NotALift(f"{name} misses the factor measure by {resid:.3e} on {edge!r}",
                               residual=resid, edge=edge)
        self.mu1, self.mu2, self.nu, self.code = mu1, mu2, nu, code
        self.w = int(w)
        self.seed = int(seed)
        self.first = ConditionalFilter(mu1, code, w)
        self.second = ConditionalFilter(mu2, code, w)
        self._cum = np.cumsum(mu1.transition_matrix(), axis=1)
        self._cum0 = np.cumsum(mu1.symbol_mass)

    @property
    def width(self) -> int:
        return 2 * self.w + 1

    def _first_path(self, start: int, count: int) -> np.ndarray:
        u = rng.uniform_rows(self.seed, rng.STREAM_FACTOR, start, count, self.width)
        s = len(self._cum0)
        x = np.empty((count, self.width), dtype=np.int64)
        x[:, 0] = np.minimum(np.searchsorted(self._cum0, u[:, 0] * self._cum0[-1]), s - 1)
        for t in range(1, self.width):
            rows = self._cum[x[:, t - 1]]
            x[:, t] = np.minimum((rows < u[:, t:t + 1]).sum(axis=1), s - 1)
        return x

    def draw(self, count: int, start: int = 0) -> JoinedWindows:
        """Samples ``start .. start+count-1`` of the joining."""
        # a mu1 window and its image already have the joint law of (u, y)
        u = self._first_path(start, count)
        y = self.code.index_map[u]
        v = self.second.sample(y, rng.uniform_rows(self.seed, rng.STREAM_SECOND, start, count, self.width))
        return JoinedWindows(y, u, v)

    def batches(self, n_samples: int, batch: int = 4096):
        for start in range(0, n_samples, batch):
            yield self.draw(min(batch, n_samples - start), start)


def joining_sample(sampler: JoiningSampler, index: int = 0) -> tuple:
    """Window pair ``(u, v)`` of sample ``index`` as symbol lists."""
    jw = sampler.draw(1, index)
    sym = sampler.mu1.host.symbols
    return [sym[i] for i in jw.u[0]], [sym[i] for i in jw.v[0]]


def coincidence_probability(sampler: JoiningSampler, n_samples: int) -> Estimate:
    """Frequency of ``u_0 == v_0`` with its binomial standard error."""
    hits = 0
    c = sampler.w
    for jw in sampler.batches(n_samples):
        hits += int((jw.u[:, c] == jw.v[:, c]).sum())
    p = hits / n_samples
    return Estimate(p, float(np.sqrt(p * (1 - p) / n_samples)), n_samples)


@dataclass(frozen=True)
class XiEstimate:
    """Integral of ``Xi`` over the coincidence set at time ``-1``.

    ``integral`` averages ``Xi * 1_S`` over all samples; ``mean_on_s`` is the
    average over samples that land in ``S``.
    """

    integral: float
    std_error: float
    mean_on_s: float
    s_mass: float
    n_in_s: int
    n: int
    min_xi: float


def _one_step_pairs(sampler: JoiningSampler, jw: JoinedWindows):
    c = sampler.w
    fut = jw.y[:, c:]
    a = sampler.first.one_step(jw.u[:, c - 1], fut)
    b = sampler.second.one_step(jw.v[:, c - 1], fut)
    in_s = jw.u[:, c - 1] == jw.v[:, c - 1]
    return a, b, in_s


def xi_values(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Jensen gap ``sum psi((a+b)/2) - (sum psi(a) + sum psi(b))/2`` per row."""
    return psi(0.5 * (a + b)).sum(axis=1) - 0.5 * psi(a).sum(axis=1) - 0.5 * psi(b).sum(axis=1)


def xi_estimate(sampler: JoiningSampler, n_samples: int) -> XiEstimate:
    if sampler.w < 8:
        raise WindowMismatch("the Xi estimate needs a window half-width of at least 8")
    vals = []
    flags = []
    for jw in sampler.batches(n_samples):
        a, b, in_s = _one_step_pairs(sampler, jw)
        vals.append(xi_values(a, b))
        flags.append(in_s)
    xi = np.concatenate(vals)
    s = np.concatenate(flags)
    if not s.any():
        raise EmptyS("no sample agrees at time -1", s_mass=0.0)
    masked = np.where(s, xi, 0.0)
    return XiEstimate(float(masked.mean()), float(masked.std(ddof=1) / np.sqrt(n_samples)),
                      float(xi[s].mean()), float(s.mean()), int(s.sum()), n_samples, float(xi.min()))


@dataclass(frozen=True)
class GapReport:
    """Largest one-step conditional gap ``max_j |A^j - B^j|`` on ``u_-1 == v_-1``.

    ``per_symbol`` averages ``|A^j - B^j|`` over the samples where symbol ``j``
    is compatible with the observed factor symbol.  Fields are NaN when no
    sample lands in the set.
    """

    max_gap: float
    mean_gap: float
    std_error: float
    worst_symbol: object
    per_symbol: dict
    n_in_s: int
    n: int


def conditional_equality_gap(sampler: JoiningSampler, n_samples: int) -> GapReport:
    gaps, diffs, allowed = [], [], []
    lab = sampler.code.index_map
    c = sampler.w
    for jw in sampler.batches(n_samples):
        a, b, in_s = _one_step_pairs(sampler, jw)
        d = np.abs(a - b)[in_s]
        gaps.append(d.max(axis=1) if len(d) else np.zeros(0))
        diffs.append(d)
        allowed.append(lab[None, :] == jw.y[in_s, c][:, None])
    g = np.concatenate(gaps)
    syms = sampler.mu1.host.symbols
    if len(g) == 0:
        nan = float("nan")
        return GapReport(nan, nan, nan, None, {}, 0, n_samples)
    d = np.concatenate(diffs)
    ok = np.concatenate(allowed)
    cnt = ok.sum(axis=0)
    per = {syms[j]: float(d[ok[:, j], j].mean()) for j in range(len(syms)) if cnt[j]}
    colmax = d.max(axis=0)
    # ties go to the least symbol
    worst = syms[int(np.flatnonzero(colmax >= colmax.max() - 1e-12)[0])]
    std = float(g.std(ddof=1) / np.sqrt(len(g))) if len(g) > 1 else 0.0
    return GapReport(float(g.max()), float(g.mean()), std, worst, per, len(g), n_samples)


# -- switching -------------------------------------------------------------------

def pqs_switch(u, v, r_bits, r_neg_inf: int, code: OneBlockCode | None = None) -> np.ndarray:
    """Splice ``u`` and ``v`` at their coincidence times.

    Position ``k`` copies ``u_k`` when the coin at the last coincidence
    strictly before ``k`` shows 0 and ``v_k`` when it shows 1; before the
    first coincidence the coin ``r_neg_inf`` decides.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    r = np.asarray(r_bits)
    if u.shape != v.shape or r.shape != u.shape or u.ndim != 1:
        raise WindowMismatch(f"shapes {u.shape}, {v.shape}, {r.shape} differ")
    if code is not None and not np.array_equal(code.index_map[u], code.index_map[v]):
        raise WindowMismatch("u and v have different images")
    idx = np.arange(len(u))
    last = np.maximum.accumulate(np.where(u == v, idx, -1))
    n_k = np.concatenate([[-1], last[:-1]])
    choice = np.where(n_k >= 0, r[np.maximum(n_k, 0)], int(r_neg_inf))
    return np.where(choice == 1, v, u)


class SwitchSampler:
    """Joining sampler plus the fair coins of the switching construction."""

    def __init__(self, joining: JoiningSampler, seed: int | None = None):
        self.joining = joining
        self.seed = joining.seed if seed is None else int(seed)


@numba.njit(cache=True)
def _backward_messages(p, masks, y):
    n = y.shape[0]
    s = p.shape[0]
    beta = np.empty((n, s))
    beta[n - 1, :] = 1.0
    for t in range(n - 2, -1, -1):
        m = 0.0
        for i in range(s):
            acc = 0.0
            for j in range(s):
                acc += p[i, j] * masks[y[t + 1], j] * beta[t + 1, j]
            beta[t, i] = acc
            if acc > m:
                m = acc
        if m <= 0.0:
            return beta, t
        for i in range(s):
            beta[t, i] /= m
    return beta, -1


@numba.njit(cache=True)
def _forward_sample(p, pi, masks, y, beta, u):
    n = y.shape[0]
    s = p.shape[0]
    x = np.empty(n, dtype=np.int64)
    wts = np.empty(s)
    for t in range(n):
        tot = 0.0
        for j in range(s):
            base = pi[j] if t == 0 else p[x[t - 1], j]
            wts[j] = base * masks[y[t], j] * beta[t, j]
            tot += wts[j]
        if tot <= 0.0:
            return x, t
        target = u[t] * tot
        acc = 0.0
        pick = s - 1
        for j in range(s):
            acc += wts[j]
            if target < acc and wts[j] > 0.0:
                pick = j
                break
        while wts[pick] <= 0.0:
            pick -= 1
        x[t] = pick
    return x, -1


def conditional_path(flt: ConditionalFilter, y: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Exact draw of a whole preimage path given the whole image path ``y``."""
    y = np.ascontiguousarray(y, dtype=np.int64)
    beta, bad = _backward_messages(flt.p, flt.masks, y)
    if bad >= 0:
        raise InadmissibleWindow("image path has no preimage", position=int(bad))
    x, bad = _forward_sample(flt.p, flt.pi, flt.masks, y, beta, np.ascontiguousarray(u))
    if bad >= 0:
        raise InadmissibleWindow("image path has no preimage", position=int(bad))
    return x


@dataclass(frozen=True)
class SwitchedPath:
    """Central part of a spliced path and the two joined paths it came from."""

    w: np.ndarray
    u: np.ndarray
    v: np.ndarray
    y: np.ndarray
    violations: int


def pqs_measure_path(switch: SwitchSampler, length: int, seed: int | None = None) -> SwitchedPath:
    """Path of the spliced measure.

    One factor path of ``length + 2 w`` symbols is drawn, both lifts are
    sampled conditionally on the whole of it, the results are spliced and
    ``w`` symbols are discarded at each end.
    """
    js = switch.joining
    seed = switch.seed if seed is None else int(seed)
    margin = js.w
    total = int(length) + 2 * margin
    base = walk(js.mu1, rng.uniforms(seed, rng.STREAM_PATH, 0, total))
    y = js.code.index_map[base]
    u = conditional_path(js.first, y, rng.uniforms(seed, rng.STREAM_FIRST, 0, total))
    v = conditional_path(js.second, y, rng.uniforms(seed, rng.STREAM_SECOND, 0, total))
    coins = rng.uniforms(seed, rng.STREAM_SWITCH, 0, total + 1) < 0.5
    w = pqs_switch(u, v, coins[1:].astype(np.int64), int(coins[0]))
    host = js.mu1.host
    viol = int((~host.adjacency[w[:-1], w[1:]]).sum())
    sl = slice(margin, margin + int(length))
    return SwitchedPath(w[sl], u[sl], v[sl], y[sl], viol)


@dataclass(frozen=True)
class EntropyGain:
    h1: float
    h2: float
    switched: object
    xi: XiEstimate
    margin: float
    combined_std: float
    violations: int


def pqs_entropy_gain(switch: SwitchSampler, length: int, block_length: int,
                     n_xi: int, seed: int | None = None) -> EntropyGain:
    """Empirical entropy of the spliced path against the mean of the two lifts.

    ``margin`` is the excess over the average entropy; the construction
    predicts it is at least ``xi.integral``.
    """
    js = switch.joining
    path = pqs_measure_path(switch, length, seed)
    est = empirical_entropy(path.w, block_length, alphabet_size=js.mu1.host.n_symbols)
    xi = xi_estimate(js, n_xi)
    h1, h2 = entropy_rate(js.mu1), entropy_rate(js.mu2)
    margin = est.value - 0.5 * (h1 + h2)
    return EntropyGain(h1, h2, est, xi, margin,
                       float(np.hypot(est.std_error, xi.std_error)), path.violations)
