"""Random standard map driven by the cat map.

``Theta_k(omega, x) = (A omega, T_omega x)`` with ``A = [[2, 1], [1, 1]]`` and
``T_omega(x1, x2) = (2 x1 - x2 + k cos(2 pi x1) + f(omega), x1) mod 1``.

On two vertical strips ``S_i = J_i x S^1`` the horizontal derivative
``|2 - 2 pi k sin(2 pi x1)|`` is at least 9.  Graphs with slope below 1 over
one strip are mapped across both strips with slope at most 1/8, which yields
a shadowing orbit for every itinerary in ``{1, 2}`` and the bound
``h_top(Theta_k | P) >= log 2``.

Base orbits are iterated exactly on the lattice ``2**-53 Z^2``.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import (BranchSelectionAmbiguous, DegenerateOrbit, EmptyIntersection,
                     MonotonicityViolated, NoStrip, ValidationError)

TWO_PI = 2.0 * math.pi
STRIP_LENGTH = 1.0 / 3.0
DERIVATIVE_FLOOR = 9.0
SLOPE_CAP = 1.0 / 8.0
CAT = np.array([[2, 1], [1, 1]])
_LATTICE = 1 << 53
F_CHOICES = ("zero", "omega1", "eps_sin", "mixed")


@dataclass(frozen=True)
class SkewStandardSystem:
    """Parameters of ``Theta_k``; ``f_choice`` picks the kick ``f(omega)``.

    ``omega1``: ``omega_1``; ``eps_sin``: ``eps sin(2 pi omega_1)``;
    ``mixed``: ``2 omega_1 + eps sin(2 pi omega_2)``; ``zero``: no kick.
    """

    k: float
    f_choice: str = "omega1"
    eps: float = 0.0
    base_matrix: tuple = ((2, 1), (1, 1))

    def __post_init__(self):
        if not self.k >= 0:
            raise ValidationError(f"k must be nonnegative, got {self.k!r}")
        if self.f_choice not in F_CHOICES:
            raise ValidationError(f"f_choice must be one of {F_CHOICES}")
        (a, b), (c, d) = self.base_matrix
        if a * d - b * c != 1:
            raise ValidationError("base matrix must have determinant 1")

    def kick(self, omega) -> np.ndarray:
        om = np.asarray(omega, dtype=float)
        w1, w2 = om[..., 0], om[..., 1]
        if self.f_choice == "zero":
            f = np.zeros_like(w1)
        elif self.f_choice == "omega1":
            f = w1
        elif self.f_choice == "eps_sin":
            f = self.eps * np.sin(TWO_PI * w1)
        else:
            f = 2.0 * w1 + self.eps * np.sin(TWO_PI * w2)
        return np.mod(f, 1.0)


def evaluate(system: SkewStandardSystem, omega, x) -> np.ndarray:
    """``T_omega(x)`` reduced to ``[0, 1)^2``."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    new = 2.0 * x1 - x2 + system.k * np.cos(TWO_PI * x1) + system.kick(omega)
    return np.mod(np.stack([new, x1], axis=-1), 1.0)


def fiber_jacobian(system: SkewStandardSystem, omega, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = 2.0 - TWO_PI * system.k * np.sin(TWO_PI * x[..., 0])
    out = np.zeros(x.shape[:-1] + (2, 2))
    out[..., 0, 0] = d
    out[..., 0, 1] = -1.0
    out[..., 1, 0] = 1.0
    return out


def base_step(system: SkewStandardSystem, omega) -> np.ndarray:
    return base_orbit(system, omega, 2)[1]


def base_orbit(system: SkewStandardSystem, omega, n: int) -> np.ndarray:
    """``omega, A omega, ..., A^(n-1) omega`` computed exactly on ``2**-53 Z^2``."""
    (a, b), (c, d) = system.base_matrix
    p = int(round(float(omega[0]) * _LATTICE)) % _LATTICE
    q = int(round(float(omega[1]) * _LATTICE)) % _LATTICE
    out = np.empty((n, 2))
    for i in range(n):
        out[i] = (p / _LATTICE, q / _LATTICE)
        p, q = (a * p + b * q) % _LATTICE, (c * p + d * q) % _LATTICE
    return out


# -- strips -------------------------------------------------------------------

@dataclass(frozen=True)
class Strip:
    """Closed interval ``[lo, hi]`` of the circle, length 1/3, not wrapping."""

    lo: float
    hi: float
    index: int
    margin: float = field(default=0.0, compare=False)

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x) -> np.ndarray:
        return (np.asarray(x) >= self.lo) & (np.asarray(x) <= self.hi)


def horizontal_derivative(k: float, x1) -> np.ndarray:
    return np.abs(2.0 - TWO_PI * k * np.sin(TWO_PI * np.asarray(x1, dtype=float)))


def certify_strip(k: float, strip: Strip, grid: int = 10_000) -> float:
    """Smallest value of ``|2 - 2 pi k sin(2 pi x)| - 9`` on the strip.

    Each strip lies in a half-circle where ``sin(2 pi x)`` is concave (strip 1)
    or convex (strip 2), so the extremum over the interval sits at an
    endpoint.  A grid pass adds a Lipschitz check with constant
    ``4 pi^2 k``; either failing raises :class:`NoStrip`.
    """
    ends = horizontal_derivative(k, [strip.lo, strip.hi]) - DERIVATIVE_FLOOR
    xs = np.linspace(strip.lo, strip.hi, grid)
    vals = horizontal_derivative(k, xs) - DERIVATIVE_FLOOR
    spacing = (strip.hi - strip.lo) / (grid - 1)
    lip = 2.0 * TWO_PI ** 2 * k / 2.0
    margin = float(min(ends.min(), vals.min()))
    if margin < 0 or vals.min() < spacing * lip:
        raise NoStrip(f"strip {strip.index} fails the derivative bound (margin {margin:.3e})",
                      margin=margin)
    return margin


def maximal_intervals(k: float) -> tuple:
    """Largest intervals where ``2 pi k sin >= 11`` and ``2 pi k sin <= -7``."""
    c1 = 11.0 / (TWO_PI * k) if k > 0 else math.inf
    c2 = 7.0 / (TWO_PI * k) if k > 0 else math.inf
    first = second = None
    if c1 <= 1:
        off = math.asin(c1) / TWO_PI
        first = (off, 0.5 - off)
    if c2 <= 1:
        off = math.asin(c2) / TWO_PI
        second = (0.5 + off, 1.0 - off)
    return first, second


def find_strips(k: float) -> tuple:
    """Strips ``J_1``, ``J_2`` of length 1/3 centred in the maximal intervals."""
    first, second = maximal_intervals(k)
    lengths = [0.0 if iv is None else iv[1] - iv[0] for iv in (first, second)]
    if min(lengths) < STRIP_LENGTH:
        raise NoStrip(f"for k={k} the available lengths are {lengths[0]:.4f} and {lengths[1]:.4f}",
                      available=min(lengths))
    strips = []
    for idx, (a, b) in enumerate((first, second), start=1):
        c = 0.5 * (a + b)
        s = Strip(c - STRIP_LENGTH / 2, c + STRIP_LENGTH / 2, idx)
        strips.append(Strip(s.lo, s.hi, idx, certify_strip(k, s)))
    return tuple(strips)


# -- graph transform --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GraphBand:
    """Sampled graph ``t -> (t, g(t))`` over strip ``strip``; ``g`` as real lifts."""

    strip: int
    nodes: np.ndarray
    values: np.ndarray
    slope: float

    def __call__(self, t):
        return np.interp(t, self.nodes, self.values)


def divided_slope(nodes, values) -> float:
    return float(np.max(np.abs(np.diff(values) / np.diff(nodes))))


def flat_band(strips: tuple, i: int, height: float = 0.0, n_nodes: int = 256) -> GraphBand:
    s = strips[i - 1]
    nodes = np.linspace(s.lo, s.hi, n_nodes + 1)
    return GraphBand(i, nodes, np.full_like(nodes, height), 0.0)


def _bisect(fn, lo, hi, target, increasing, tol=0.0, max_iter=200):
    """Vectorized root of ``fn(t) = target`` on ``[lo, hi]`` for monotone ``fn``."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi) & (hi - lo > tol)
        if not active.any():
            break
        below = fn(mid) < target
        go_right = below if increasing else ~below
        lo = np.where(active & go_right, mid, lo)
        hi = np.where(active & ~go_right, mid, hi)
    return lo, hi


def _branch_shift(fmin, fmax, a, b, increasing):
    """Integer ``n`` with ``[a, b] + n`` inside ``[fmin, fmax]``, leftmost preimage."""
    low = np.ceil(fmin - a)
    high = np.floor(fmax - b)
    if np.any(low > high):
        return None
    return low if increasing else high


def graph_transform(system: SkewStandardSystem, omega, band: GraphBand, target: int,
                    strips: tuple | None = None) -> GraphBand:
    """Graph over strip ``target`` contained in the image of ``band``.

    Each target node ``s`` is pulled back to the unique ``t`` in the source
    strip with ``2 t - g(t) + k cos(2 pi t) + f(omega) = s`` on the chosen
    branch, by bisection to ``1e-13``.
    """
    if isinstance(target, (list, tuple, set)):
        raise BranchSelectionAmbiguous("transform one target strip at a time")
    if target not in (1, 2):
        raise ValidationError(f"strip index must be 1 or 2, got {target!r}")
    strips = strips or find_strips(system.k)
    if len(band.nodes) < 257:
        raise ValidationError("a band needs at least 256 intervals")
    if band.slope > 1.0:
        raise MonotonicityViolated(f"input band slope {band.slope} exceeds 1")
    src = strips[band.strip - 1]
    dst = strips[target - 1]
    kick = float(system.kick(omega))

    def lifted(t):
        return 2.0 * t - band(t) + system.k * np.cos(TWO_PI * t) + kick

    increasing = band.strip == 2
    ends = lifted(np.array([src.lo, src.hi]))
    shift = _branch_shift(ends.min(), ends.max(), dst.lo, dst.hi, increasing)
    if shift is None:
        raise MonotonicityViolated("image of the band does not cover the target strip")
    nodes = np.linspace(dst.lo, dst.hi, len(band.nodes))
    lo, hi = _bisect(lifted, np.full_like(nodes, src.lo), np.full_like(nodes, src.hi),
                     nodes + shift, increasing, tol=1e-13)
    vals = 0.5 * (lo + hi)
    slope = divided_slope(nodes, vals)
    if slope > SLOPE_CAP:
        raise MonotonicityViolated(f"transformed slope {slope:.6f} exceeds 1/8", slope=slope)
    return GraphBand(target, nodes, vals, slope)


# -- shadowing -------------------------------------------------------------------

@dataclass(frozen=True)
class ShadowResult:
    """Start parameter realizing an itinerary up to ``horizon`` steps."""

    t0: float
    width: float
    horizon: int
    itinerary: tuple
    widths: tuple
    forward_ok: bool
    orbit: tuple = ()


def _phi(system, kicks, t, steps):
    """Lifted first coordinate after ``steps`` maps from ``(t, 0)``."""
    x1 = t
    x2 = np.zeros_like(t)
    for j in range(steps):
        new = 2.0 * x1 - x2 + system.k * np.cos(TWO_PI * x1) + kicks[j]
        x2 = x1
        x1 = new if j == steps - 1 else np.mod(new, 1.0)
    return x1


def shadow_many(system: SkewStandardSystem, omega, itineraries, strips: tuple | None = None) -> dict:
    """Nested parameter intervals for a batch of itineraries of equal length.

    ``itineraries`` is an ``(M, L+1)`` array over ``{1, 2}``.  Returns the final
    intervals, the width after each step and the forward re-check of the
    interval midpoints.
    """
    strips = strips or find_strips(system.k)
    r = np.atleast_2d(np.asarray(itineraries, dtype=np.int64))
    if r.size == 0 or not np.isin(r, (1, 2)).all():
        raise ValidationError("itineraries must be nonempty sequences over {1, 2}")
    m, length = r.shape
    lo_s = np.array([s.lo for s in strips])
    hi_s = np.array([s.hi for s in strips])
    lo = lo_s[r[:, 0] - 1].copy()
    hi = hi_s[r[:, 0] - 1].copy()
    kicks = system.kick(base_orbit(system, omega, max(length, 1)))
    widths = [hi - lo]
    for ell in range(1, length):
        fn = lambda t, ell=ell: _phi(system, kicks, t, ell)  # noqa: E731
        f_lo, f_hi = fn(lo), fn(hi)
        increasing = f_hi > f_lo
        a = lo_s[r[:, ell] - 1]
        b = hi_s[r[:, ell] - 1]
        fmin, fmax = np.minimum(f_lo, f_hi), np.maximum(f_lo, f_hi)
        low, high = np.ceil(fmin - a), np.floor(fmax - b)
        if np.any(low > high):
            bad = int(np.argmax(low > high))
            raise EmptyIntersection(f"itinerary {r[bad].tolist()} lost at step {ell}",
                                    step=ell, itinerary=r[bad].tolist())
        shift = np.where(increasing, low, high)
        # solve fn = a + shift and fn = b + shift inside [lo, hi]
        lo2 = np.concatenate([lo, lo])
        hi2 = np.concatenate([hi, hi])
        tgt = np.concatenate([a + shift, b + shift])
        inc2 = np.concatenate([increasing, increasing])

        def signed(t):
            return np.where(inc2, fn(t), -fn(t))

        left, right = _bisect(signed, lo2, hi2, np.where(inc2, tgt, -tgt), True)
        ends_a = 0.5 * (left[:m] + right[:m])
        ends_b = 0.5 * (left[m:] + right[m:])
        lo, hi = np.minimum(ends_a, ends_b), np.maximum(ends_a, ends_b)
        widths.append(hi - lo)
    t0 = 0.5 * (lo + hi)
    # independent forward check of the midpoints
    x = np.stack([t0, np.zeros_like(t0)], axis=-1)
    om = base_orbit(system, omega, length)
    ok = np.ones(m, dtype=bool)
    for ell in range(length):
        if ell:
            x = evaluate(system, om[ell - 1], x)
        ok &= (x[:, 0] >= lo_s[r[:, ell] - 1]) & (x[:, 0] <= hi_s[r[:, ell] - 1])
    return {"lo": lo, "hi": hi, "t0": t0, "widths": np.array(widths).T, "forward_ok": ok}


# float64 pullbacks lose about log2(27) bits per step; past this depth the
# nested intervals are tracked in multiprecision instead
FLOAT_DEPTH = 12


def _mp_kicks(system, omega, n, mp):
    (a, b), (c, d) = system.base_matrix
    p = int(round(float(omega[0]) * _LATTICE)) % _LATTICE
    q = int(round(float(omega[1]) * _LATTICE)) % _LATTICE
    out = []
    for _ in range(n):
        w1, w2 = mp.mpf(p) / _LATTICE, mp.mpf(q) / _LATTICE
        if system.f_choice == "zero":
            f = mp.mpf(0)
        elif system.f_choice == "omega1":
            f = w1
        elif system.f_choice == "eps_sin":
            f = system.eps * mp.sin(2 * mp.pi * w1)
        else:
            f = 2 * w1 + system.eps * mp.sin(2 * mp.pi * w2)
        out.append(f - mp.floor(f))
        p, q = (a * p + b * q) % _LATTICE, (c * p + d * q) % _LATTICE
    return out


def _shadow_mp(system, omega, r, strips):
    """Nested intervals and forward check at ``5 L + 64`` bits of precision."""
    import mpmath

    mp = mpmath.mp.clone()
    mp.prec = 5 * len(r) + 64
    kicks = _mp_kicks(system, omega, len(r), mp)
    k = mp.mpf(system.k)
    two_pi = 2 * mp.pi

    def phi(t, steps):
        x1, x2 = t, mp.mpf(0)
        for j in range(steps):
            new = 2 * x1 - x2 + k * mp.cos(two_pi * x1) + kicks[j]
            x2 = x1
            x1 = new if j == steps - 1 else new - mp.floor(new)
        return x1

    def solve(steps, lo, hi, target, increasing, tol):
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if (phi(mid, steps) < target) == increasing:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2

    s0 = strips[r[0] - 1]
    lo, hi = mp.mpf(s0.lo), mp.mpf(s0.hi)
    widths = [hi - lo]
    for ell in range(1, len(r)):
        f_lo, f_hi = phi(lo, ell), phi(hi, ell)
        increasing = f_hi > f_lo
        st = strips[r[ell] - 1]
        a, b = mp.mpf(st.lo), mp.mpf(st.hi)
        fmin, fmax = min(f_lo, f_hi), max(f_lo, f_hi)
        low, high = mp.ceil(fmin - a), mp.floor(fmax - b)
        if low > high:
            raise EmptyIntersection(f"itinerary {list(r)} lost at step {ell}", step=ell,
                                    itinerary=list(r))
        shift = low if increasing else high
        tol = (hi - lo) * mp.mpf(2) ** -60
        ea = solve(ell, lo, hi, a + shift, increasing, tol)
        eb = solve(ell, lo, hi, b + shift, increasing, tol)
        lo, hi = min(ea, eb), max(ea, eb)
        widths.append(hi - lo)
    t0 = (lo + hi) / 2
    x1, x2 = t0, mp.mpf(0)
    orbit = []
    ok = True
    for ell in range(len(r)):
        if ell:
            new = 2 * x1 - x2 + k * mp.cos(two_pi * x1) + kicks[ell - 1]
            x1, x2 = new - mp.floor(new), x1
        st = strips[r[ell] - 1]
        ok &= st.lo <= x1 <= st.hi
        orbit.append((float(x1), float(x2)))
    return float(t0), tuple(float(w) for w in widths), bool(ok), tuple(orbit)


def shadow(system: SkewStandardSystem, omega, itinerary, strips: tuple | None = None) -> ShadowResult:
    """Shadow one itinerary ``r_0 .. r_L``; the verified horizon is ``L``.

    Returns the midpoint of the last nested interval, its width and the
    forward orbit of ``(t0, 0)``, re-simulated at the same precision as the
    pullback.
    """
    strips = strips or find_strips(system.k)
    r = tuple(int(i) for i in itinerary)
    if not r or any(i not in (1, 2) for i in r):
        raise ValidationError("itinerary must be a nonempty sequence over {1, 2}")
    if len(r) <= FLOAT_DEPTH + 1:
        res = shadow_many(system, omega, [list(r)], strips)
        widths = tuple(float(w) for w in res["widths"][0])
        t0, ok = float(res["t0"][0]), bool(res["forward_ok"][0])
        om = base_orbit(system, omega, len(r))
        x = np.array([t0, 0.0])
        orbit = []
        for ell in range(len(r)):
            if ell:
                x = evaluate(system, om[ell - 1], x)
            orbit.append((float(x[0]), float(x[1])))
        orbit = tuple(orbit)
    else:
        t0, widths, ok, orbit = _shadow_mp(system, omega, r, strips)
    if not ok:
        raise EmptyIntersection("forward orbit of the midpoint leaves the strips")
    return ShadowResult(t0, widths[-1], len(widths) - 1, r, widths, True, orbit)


@dataclass(frozen=True)
class Certificate:
    """Outcome of shadowing every itinerary of a given length at sampled ``omega``."""

    k: float
    f_choice: str
    depth: int
    omegas: tuple
    sequences_per_omega: int
    max_final_width: float
    width_bound: float
    max_contraction: float
    valid: bool
    bound: float
    transcript: tuple
    per_omega: tuple = ()

    def to_dict(self) -> dict:
        return {
            "k": self.k, "f_choice": self.f_choice, "depth": self.depth,
            "omegas": [list(o) for o in self.omegas],
            "sequences_per_omega": self.sequences_per_omega,
            "max_final_width": self.max_final_width, "width_bound": self.width_bound,
            "max_contraction": self.max_contraction, "valid": self.valid,
            "bound_nats": self.bound if self.valid else None,
            "scope": "finite depth, sampled omega only",
            "transcript": list(self.transcript),
        }


def certify_relative_entropy(system: SkewStandardSystem, depth: int, omega=(0.0, 0.0),
                             n_random_omega: int = 8, seed: int = 0, threads: int = 1) -> Certificate:
    """Shadow all ``2**depth`` itineraries at ``omega`` and at random base points.

    A valid certificate records the bound ``h_top(Theta_k | P) >= log 2``;
    any lost itinerary or failed forward re-check voids it.
    """
    strips = find_strips(system.k)
    seqs = np.array(list(itertools.product((1, 2), repeat=depth)), dtype=np.int64)
    extra = rng.uniforms(seed, rng.STREAM_OMEGA, 0, 2 * n_random_omega).reshape(-1, 2)
    omegas = [tuple(float(c) for c in omega)] + [tuple(map(float, o)) for o in extra]
    lines = [f"k={system.k} f={system.f_choice} eps={system.eps}",
             f"J1=[{strips[0].lo:.12f}, {strips[0].hi:.12f}] margin={strips[0].margin:.6f}",
             f"J2=[{strips[1].lo:.12f}, {strips[1].hi:.12f}] margin={strips[1].margin:.6f}"]
    bound = STRIP_LENGTH * 8.0 ** -(depth - 1) if depth >= 1 else STRIP_LENGTH

    def run(om):
        try:
            return om, shadow_many(system, om, seqs, strips), None
        except EmptyIntersection as exc:
            return om, None, exc

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, omegas))
    valid = True
    worst = 0.0
    contraction = 0.0
    rows = []
    for om, res, err in results:
        if err is not None:
            valid = False
            rows.append((om[0], om[1], math.nan, math.nan, False))
            lines.append(f"omega={om}: lost itinerary ({err})")
            continue
        final = res["widths"][:, -1]
        ok = bool(res["forward_ok"].all())
        w = res["widths"]
        ratio = float((w[:, 1:] / w[:, :-1]).max()) if w.shape[1] > 1 else 0.0
        contraction = max(contraction, ratio)
        worst = max(worst, float(final.max()))
        valid &= ok and float(final.max()) <= bound and ratio <= SLOPE_CAP
        rows.append((om[0], om[1], float(final.max()), ratio, ok))
        lines.append(f"omega=({om[0]:.12f}, {om[1]:.12f}): {len(seqs)} itineraries, "
                     f"forward check {'ok' if ok else 'FAILED'}, max width {final.max():.3e}, "
                     f"max contraction {ratio:.4f}")
    lines.append(f"bound h_top(Theta|P) >= log 2 = {math.log(2):.6f} nats: "
                 f"{'issued' if valid else 'void'}")
    return Certificate(system.k, system.f_choice, depth, tuple(omegas), len(seqs), worst, bound,
                       contraction, bool(valid), math.log(2), tuple(lines), tuple(rows))


# -- horseshoe orbits and Lyapunov exponents ------------------------------------

def horseshoe_orbit(system: SkewStandardSystem, omega, itinerary, strips: tuple | None = None,
                    max_sweeps: int = 200) -> np.ndarray:
    """Points ``x^(0..L)`` of an orbit through ``(t0, 0)`` following ``itinerary``.

    The first coordinates solve ``F(x_l) = x_(l+1) + x_(l-1) - f_l (mod 1)``
    with ``F(x) = 2x + k cos(2 pi x)`` on the prescribed strips.  Inverting
    ``F`` there contracts by 1/9, so the sweep ``x_l <- F^-1(...)`` converges
    geometrically.  The end condition ``x_(L+1)`` is the centre of strip 1.
    """
    strips = strips or find_strips(system.k)
    r = np.asarray(itinerary, dtype=np.int64)
    n = len(r)
    kicks = system.kick(base_orbit(system, omega, n))
    lo = np.array([strips[i - 1].lo for i in r])
    hi = np.array([strips[i - 1].hi for i in r])
    inc = r == 2
    x = 0.5 * (lo + hi)

    def big_f(t):
        return 2.0 * t + system.k * np.cos(TWO_PI * t)

    f_lo, f_hi = big_f(lo), big_f(hi)
    fmin, fmax = np.minimum(f_lo, f_hi), np.maximum(f_lo, f_hi)
    tgt = 0.5 * (fmin + fmax)
    sign = np.where(inc, 1.0, -1.0)
    delta = math.inf
    for _ in range(max_sweeps):
        prev = np.concatenate([[0.0], x[:-1]])
        nxt = np.concatenate([x[1:], [strips[0].center]])
        rhs = nxt + prev - kicks
        # follow the lift chosen on the previous sweep so the branch stays put
        tgt = rhs + np.round(tgt - rhs)
        if np.any(tgt < fmin) or np.any(tgt > fmax):
            raise DegenerateOrbit("itinerary target left the strip image")
        a, b = _bisect(lambda t: sign * big_f(t), lo, hi, sign * tgt, True)
        new = 0.5 * (a + b)
        delta = float(np.abs(new - x).max())
        x = new
        if delta < 1e-14:
            break
    if delta >= 1e-14:
        raise DegenerateOrbit(f"orbit sweep stalled at change {delta:.3e}")
    prev = np.concatenate([[0.0], x[:-1]])
    return np.stack([x, prev], axis=-1)


@dataclass(frozen=True)
class LyapunovResult:
    plus: float
    minus: float
    steps: int


def cocycle_exponents(jacobians: np.ndarray, every: int = 1) -> LyapunovResult:
    """Exponents of a 2x2 matrix cocycle by QR re-orthonormalization."""
    q = np.eye(2)
    acc = np.zeros(2)
    block = np.eye(2)
    n = len(jacobians)
    for i, jac in enumerate(jacobians, start=1):
        block = jac @ block
        if i % every == 0 or i == n:
            q, rmat = np.linalg.qr(block @ q)
            diag = np.abs(np.diag(rmat))
            if np.any(diag == 0) or not np.all(np.isfinite(diag)):
                raise DegenerateOrbit("re-orthonormalization underflow")
            sgn = np.sign(np.diag(rmat))
            q = q * sgn
            acc += np.log(diag)
            block = np.eye(2)
    return LyapunovResult(float(acc[0] / n), float(acc[1] / n), n)


def fiber_lyapunov(system: SkewStandardSystem, omega, x, steps: int, every: int = 1) -> LyapunovResult:
    """Fiber exponents along the forward orbit of ``(omega, x)``."""
    if steps < 1000:
        raise ValidationError("use at least 1000 steps")
    om = base_orbit(system, omega, steps)
    pts = np.empty((steps, 2))
    cur = np.mod(np.asarray(x, dtype=float), 1.0)
    for i in range(steps):
        pts[i] = cur
        cur = evaluate(system, om[i], cur)
    return cocycle_exponents(fiber_jacobian(system, om, pts), every)


def horseshoe_lyapunov(system: SkewStandardSystem, omega, itinerary, every: int = 1) -> LyapunovResult:
    """Fiber exponents along the shadowing orbit of ``itinerary``."""
    pts = horseshoe_orbit(system, omega, itinerary)
    om = base_orbit(system, omega, len(pts))
    return cocycle_exponents(fiber_jacobian(system, om, pts), every)


def base_lyapunov(system: SkewStandardSystem) -> tuple:
    """``(+log lambda, -log lambda)`` for the expanding eigenvalue of the base matrix."""
    ev = np.linalg.eigvals(np.array(system.base_matrix, dtype=float))
    lam = float(np.max(np.abs(ev)))
    return math.log(lam), -math.log(lam)


def hyperbolicity_verdict(fiber: LyapunovResult, base: tuple, chi: float) -> dict:
    """Both signs present and every exponent at least ``chi`` in size."""
    exps = [fiber.plus, fiber.minus, base[0], base[1]]
    return {
        "exponents": exps,
        "min_abs": min(abs(e) for e in exps),
        "has_positive": any(e > 0 for e in exps),
        "has_negative": any(e < 0 for e in exps),
        "hyperbolic": min(abs(e) for e in exps) >= chi and any(e > 0 for e in exps)
        and any(e < 0 for e in exps),
    }
