import math

import numpy as np
import pytest

from conftest import golden_mean_graph, random_graph
from relent.codes import identity_code, validate_code
from relent.errors import EmptyAfterPruning, InfeasibleSupport
from relent.measures import (MarkovMeasure, bernoulli, pushforward,
                             relative_entropy, stationary_from_transition)
from relent.mmre import build_lift_constraints, entropy_of_frequencies, order_sweep, solve_mmre
from relent.shift import build_sft, full_shift, is_irreducible, perron


def four_to_two():
    return validate_code(full_shift(4), full_shift(2), {0: 0, 1: 0, 2: 1, 3: 1})


def product_lift(code, nu, weights):
    """Edge law nu(y -> y') r(x|y) r(x'|y'), a lift whenever every such edge exists."""
    src = code.source
    r = np.asarray(weights, float)
    lab = code.index_map
    for y in range(code.target.n_symbols):
        fib = lab == y
        r[fib] /= r[fib].sum()
    nu_e = {tuple(e): q for e, q in zip(code.target.edge_array.tolist(), nu.edge_freq)}
    q = np.array([nu_e.get((lab[a], lab[b]), 0.0) * r[a] * r[b] for a, b in src.edge_array])
    return MarkovMeasure(src, q)


def random_instance(seed):
    """Irreducible source on 4 or 5 symbols labelled onto the full 2-shift."""
    rng = np.random.default_rng(seed)
    while True:
        n = int(rng.integers(4, 6))
        syms, edges = random_graph(rng, n, 0.55)
        try:
            src = build_sft(syms, edges)
        except EmptyAfterPruning:
            continue
        if not is_irreducible(src):
            continue
        label = {s: int(rng.integers(2)) for s in src.symbols}
        if len(set(label.values())) < 2:
            continue
        code = validate_code(src, full_shift(2), label)
        p = src.matrix() * rng.uniform(0.2, 1.0, (src.n_symbols, src.n_symbols))
        mu = stationary_from_transition(src, p / p.sum(axis=1, keepdims=True))
        nu_img = pushforward(mu, code).marginal
        # the image measure is a hidden Markov law; use its 2-block Markov approximation
        nu = MarkovMeasure(full_shift(2), nu_img.edge_freq)
        try:
            build_lift_constraints(code, nu, 1)
        except InfeasibleSupport:
            continue
        return code, nu


class TestConstraints:
    def test_four_to_two_shape(self):
        poly = build_lift_constraints(four_to_two(), bernoulli([0.3, 0.7]), 1)
        assert poly.n_variables == 16
        assert poly.n_rows == 4 + 1 + 4

    def test_identity_unique_point(self):
        nu = bernoulli([0.3, 0.7])
        sol = solve_mmre(build_lift_constraints(identity_code(nu.host), nu, 1))
        assert np.allclose(sol.measure.edge_freq, nu.edge_freq, atol=1e-10)
        assert abs(sol.h_rel) <= 1e-10

    def test_uncovered_edge(self):
        code = validate_code(golden_mean_graph(), full_shift(2), {0: 0, 1: 1})
        with pytest.raises(InfeasibleSupport):
            build_lift_constraints(code, bernoulli([0.5, 0.5]), 1)

    def test_uncovered_but_uncharged(self):
        code = validate_code(golden_mean_graph(), full_shift(2), {0: 0, 1: 1})
        nu = MarkovMeasure(full_shift(2), [0.4, 0.3, 0.3, 0.0])
        sol = solve_mmre(build_lift_constraints(code, nu, 1))
        assert abs(sol.h_rel) < 1e-9

    def test_higher_order_rows(self):
        poly = build_lift_constraints(four_to_two(), bernoulli([0.3, 0.7]), 2)
        assert poly.n_variables == 64 and poly.n_rows == 16 + 1 + 4


class TestSolver:
    def test_four_to_two(self):
        nu = bernoulli([0.3, 0.7])
        sol = solve_mmre(build_lift_constraints(four_to_two(), nu, 1))
        assert abs(sol.h_rel - math.log(2)) < 1e-6
        want = bernoulli([0.15, 0.15, 0.35, 0.35]).edge_freq
        assert np.abs(sol.measure.edge_freq - want).max() < 1e-4
        assert sol.converged and sol.feasibility_residual <= 1e-8

    def test_lift_property_checked_independently(self):
        nu = bernoulli([0.3, 0.7])
        code = four_to_two()
        sol = solve_mmre(build_lift_constraints(code, nu, 1))
        img = np.zeros(code.target.n_edges)
        np.add.at(img, code.edge_image_index(), sol.measure.edge_freq)
        assert np.abs(img - nu.edge_freq).max() <= 1e-8
        assert abs(relative_entropy(sol.measure, nu, code) - sol.h_rel) < 1e-9

    def test_bounds(self):
        for seed in range(5):
            code, nu = random_instance(seed)
            sol = solve_mmre(build_lift_constraints(code, nu, 1))
            assert sol.h_rel >= -1e-8
            assert sol.objective <= perron(code.source).entropy + 1e-8
            assert sol.h_rel <= sol.upper_bound + 1e-8

    def test_deterministic(self):
        code, nu = random_instance(3)
        a = solve_mmre(build_lift_constraints(code, nu, 1))
        b = solve_mmre(build_lift_constraints(code, nu, 1))
        assert np.array_equal(a.measure.edge_freq, b.measure.edge_freq)

    @pytest.mark.parametrize("seed", range(6))
    def test_beats_product_challenger(self, seed):
        rng = np.random.default_rng(seed)
        nu = stationary_from_transition(full_shift(2), rng.dirichlet([1, 1], size=2))
        code = validate_code(full_shift(5), full_shift(2), {0: 0, 1: 0, 2: 1, 3: 1, 4: 1})
        sol = solve_mmre(build_lift_constraints(code, nu, 1))
        challenger = product_lift(code, nu, rng.uniform(0.1, 1, 5))
        assert relative_entropy(challenger, nu, code) <= sol.h_rel + 2e-8
        # the uniform-in-fiber product lift is the optimum for full-shift fibers
        best = product_lift(code, nu, np.ones(5))
        assert abs(relative_entropy(best, nu, code) - sol.h_rel) < 1e-7

    def test_concavity_surrogate(self):
        rng = np.random.default_rng(0)
        code = validate_code(full_shift(5), full_shift(2), {0: 0, 1: 0, 2: 1, 3: 1, 4: 1})
        tails = code.source.edge_array[:, 0]
        for _ in range(20):
            nu = stationary_from_transition(full_shift(2), rng.dirichlet([1, 1], size=2))
            q = product_lift(code, nu, rng.uniform(0.05, 1, 5)).edge_freq
            q2 = product_lift(code, nu, rng.uniform(0.05, 1, 5)).edge_freq
            h = lambda x: entropy_of_frequencies(x, tails, 5)
            for lam in (0.25, 0.5, 0.75):
                assert h(lam * q + (1 - lam) * q2) >= lam * h(q) + (1 - lam) * h(q2) - 1e-10


class TestSweep:
    def test_identity_zeros(self):
        nu = bernoulli([0.3, 0.7])
        assert all(abs(h) <= 1e-10 for _, h in order_sweep(identity_code(nu.host), nu, 3))

    def test_uniform_fiber_constant(self):
        ladder = order_sweep(four_to_two(), bernoulli([0.3, 0.7]), 2)
        assert all(abs(h - math.log(2)) < 1e-6 for _, h in ladder)

    def test_nonuniform_fiber_flat(self):
        # Markovizing the 2-block marginal of any higher-order lift keeps it a lift
        # and cannot lower entropy, so the order-1 value is already the optimum of
        # every order when the constraints only see 2-blocks of the image.
        src = build_sft("pqr", [("p", "p"), ("p", "q"), ("q", "p"), ("q", "r"), ("r", "p"),
                                ("r", "r")])
        code = validate_code(src, full_shift(2), {"p": 0, "q": 1, "r": 1})
        nu = stationary_from_transition(full_shift(2), [[0.6, 0.4], [0.5, 0.5]])
        ladder = order_sweep(code, nu, 3)
        assert ladder[0][1] > 0
        assert max(h for _, h in ladder) - min(h for _, h in ladder) < 1e-7

    def test_random_instances_nondecreasing(self):
        for seed in range(20):
            code, nu = random_instance(100 + seed)
            ladder = order_sweep(code, nu, 2)
            assert ladder[1][1] >= ladder[0][1] - 2e-8
