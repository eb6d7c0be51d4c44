"""Independent brute-force references used by the tests.

Nothing here touches the matrix-based fast paths of the package; every
function works directly from ``leq``, ``join`` and ``delta`` calls, or from
plain enumeration.
"""

import itertools

import numpy as np

from lattice_agreement.approx import BOT, ONE, ZERO, CrashMode, Sampling


def lattice_axioms_ok(lat):
    els = lat.elements
    leq, join = lat.leq, lat.join
    for a in els:
        if not leq(a, a) or join(a, a) != a:
            return False
    for a, b in itertools.product(els, repeat=2):
        if a != b and leq(a, b) and leq(b, a):
            return False
        j = join(a, b)
        if j != join(b, a) or j not in lat:
            return False
        if not (leq(a, j) and leq(b, j)):
            return False
        if any(leq(a, c) and leq(b, c) and not leq(j, c) for c in els):
            return False
    for a, b, c in itertools.product(els, repeat=3):
        if leq(a, b) and leq(b, c) and not leq(a, c):
            return False
        if join(join(a, b), c) != join(a, join(b, c)):
            return False
    return True


def quasi_metric_ok(qm):
    els, leq, d = qm.lattice.elements, qm.lattice.leq, qm.delta
    for a, b in itertools.product(els, repeat=2):
        if (d(a, b) is not None) != leq(a, b):
            return False
        if d(a, b) is not None and (d(a, b) == 0) != (a == b):
            return False
    for a, b, c in itertools.product(els, repeat=3):
        if leq(a, b) and leq(b, c) and d(a, c) > d(a, b) + d(b, c):
            return False
    return True


def normal_ok(qm):
    els, leq, d = qm.lattice.elements, qm.lattice.leq, qm.delta
    for a, b, c in itertools.product(els, repeat=3):
        if leq(a, b) and leq(b, c) and (d(a, b) > d(a, c) or d(b, c) > d(a, c)):
            return False
    return True


def gamma(Y, qm):
    """Max of delta over every ordered pair (i, j) where it is defined."""
    vals = [qm.delta(a, b) for a in Y for b in Y]
    return max(v for v in vals if v is not None)


def D(I, qm):
    lat = qm.lattice
    top = I[0]
    for x in I[1:]:
        top = lat.join(top, x)
    inside = [s for s in lat.elements if any(lat.leq(x, s) for x in I) and lat.leq(s, top)]
    return max(qm.delta(a, b) for a in inside for b in inside if lat.leq(a, b))


def M(qm):
    lat = qm.lattice
    vals = [qm.delta(a, b) for a in lat.elements for b in lat.elements
            if a != b and lat.leq(a, b)]
    return min(vals) if vals else float("inf")


def literal_round(cells, x, n, f, p_f, rng, sampling=Sampling.WITHOUT_REPLACEMENT,
                  crash_mode=CrashMode.TRANSIENT):
    """One outer-loop iteration written cell by cell, drawing actual cells."""
    S = list(cells)
    A = list(S)
    for i in range(n):
        if x < f and rng.random() < p_f:
            if crash_mode is CrashMode.TRANSIENT:
                S[i] = BOT
            else:
                if S[i] == BOT:
                    continue
                A[i] = BOT
            x += 1
            continue
        if S[i] != ZERO:
            continue
        replace = sampling is Sampling.WITH_REPLACEMENT
        picks = rng.choice(n, size=n - f, replace=replace)
        A[i] = max([S[j] for j in picks] + [S[i]])
    return A, x


def exact_flip_probability(cells, f, i):
    """Probability that zero-cell ``i`` sees a 1 among ``n - f`` distinct cells."""
    n = len(cells)
    subsets = list(itertools.combinations(range(n), n - f))
    hits = sum(any(cells[j] == ONE for j in s) for s in subsets)
    return hits / len(subsets)


def cells(text):
    return np.array([{"0": ZERO, "1": ONE, "_": BOT}[c] for c in text], dtype=np.int8)
