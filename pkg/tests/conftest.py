import itertools
import math

import numpy as np
import pytest

from relent.measures import bernoulli, product_measure
from relent.shift import build_sft

ACCEPTANCE_LINES = []


def binary_entropy(p):
    return -sum(t * math.log(t) for t in (p, 1 - p) if t > 0)


def reachability(adj):
    """Transitive closure by repeated squaring (independent of scipy)."""
    n = len(adj)
    r = np.array(adj, dtype=bool)
    for _ in range(max(1, n.bit_length() + 1)):
        r = r | ((r.astype(int) @ r.astype(int)) > 0)
    return r


def brute_components(adj):
    """Symbol index sets of strongly connected components with a cycle."""
    r = reachability(adj)
    n = len(adj)
    seen, comps = set(), []
    for i in range(n):
        if i in seen:
            continue
        comp = {j for j in range(n) if j == i or (r[i, j] and r[j, i])}
        seen |= comp
        if len(comp) > 1 or adj[i][i]:
            comps.append(comp)
    return comps


def brute_prune(symbols, edges):
    alive = set(symbols)
    while True:
        keep = {s for s in alive
                if any(a == s and b in alive for a, b in edges)
                and any(b == s and a in alive for a, b in edges)}
        if keep == alive:
            return keep
        alive = keep


def random_graph(rng, n, density):
    syms = list(range(n))
    edges = [(a, b) for a in syms for b in syms if rng.random() < density]
    return syms, edges


@pytest.fixture
def product_instance():
    """Base Ber(1/2) with independent fibers Ber(0.9) and Ber(0.2) (fiber-0 probability)."""
    nu = bernoulli([0.5, 0.5])
    mu1 = product_measure(nu, bernoulli([0.9, 0.1]))
    mu2 = product_measure(nu, bernoulli([0.2, 0.8]))
    from relent.codes import projection_code
    code = projection_code(mu1.host, nu.host, 0)
    return nu, mu1, mu2, code


def golden_mean_graph():
    return build_sft((0, 1), [(0, 0), (0, 1), (1, 0)])


def words_over(sft, length):
    return sft.words(length)


def all_sequences(alphabet, length):
    return itertools.product(alphabet, repeat=length)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
