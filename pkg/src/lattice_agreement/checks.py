"""Exhaustive axiom checkers and the distance bounds of an agreement instance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .lattice import (
    ELEMENT_LIMIT,
    Distance,
    Element,
    FiniteLattice,
    IncomparableError,
    LatticeError,
    QuasiMetric,
    dist_max,
)

MAX_WITNESSES = 10


@dataclass(frozen=True)
class Violation:
    axiom: str
    witness: tuple

    def __str__(self) -> str:
        return f"{self.axiom} {self.witness!r}"


def _report(out: list, axiom: str, idx: np.ndarray, els: tuple, limit: int) -> None:
    for row in idx[:limit]:
        out.append(Violation(axiom, tuple(els[int(i)] for i in np.atleast_1d(row))))


def verify_lattice(lat: FiniteLattice, limit: int = ELEMENT_LIMIT) -> list[Violation]:
    """Check the partial order and join axioms over every element pair/triple.

    Returns an empty list when ``lat`` is a join-semilattice. At most
    ``MAX_WITNESSES`` violations are listed per axiom.
    """
    lat.check_size(limit)
    els = lat.elements
    n = len(els)
    L = lat.leq_matrix
    out: list[Violation] = []

    _report(out, "reflexivity", np.flatnonzero(~np.diag(L)), els, MAX_WITNESSES)

    anti = np.argwhere(np.triu(L & L.T, k=1))
    _report(out, "antisymmetry", anti, els, MAX_WITNESSES)

    Lf = L.astype(np.float64)
    trans = np.argwhere(((Lf @ Lf) > 0) & ~L)
    for a, c in trans[:MAX_WITNESSES]:
        b = int(np.flatnonzero(L[a] & L[:, c])[0])
        out.append(Violation("transitivity", (els[a], els[b], els[c])))

    J = lat.join_table
    closure = np.argwhere(J < 0)
    _report(out, "closure", closure, els, MAX_WITNESSES)
    if len(closure):
        return out

    ar = np.arange(n)
    _report(out, "idempotence", np.flatnonzero(J[ar, ar] != ar), els, MAX_WITNESSES)
    _report(out, "commutativity", np.argwhere(np.triu(J != J.T, k=1)), els, MAX_WITNESSES)

    upper = np.argwhere(~(L[ar[:, None], J] & L[ar[None, :], J]))
    _report(out, "upper-bound", upper, els, MAX_WITNESSES)

    least = []
    for i in range(n):
        # common[j, c]: c is an upper bound of both e_i and e_j
        common = L[i][None, :] & L
        bad = common & ~L[J[i]]
        for j in np.flatnonzero(bad.any(axis=1)):
            c = int(np.flatnonzero(bad[j])[0])
            least.append((i, int(j), c))
            if len(least) >= MAX_WITNESSES:
                break
        if len(least) >= MAX_WITNESSES:
            break
    _report(out, "least-upper-bound", np.array(least).reshape(-1, 3), els, MAX_WITNESSES)

    assoc = []
    for i in range(n):
        # (e_i v e_j) v e_k  versus  e_i v (e_j v e_k)
        bad = J[J[i]][:, :] != J[i][J]
        if bad.any():
            for j, k in np.argwhere(bad)[: MAX_WITNESSES - len(assoc)]:
                assoc.append((i, int(j), int(k)))
            if len(assoc) >= MAX_WITNESSES:
                break
    _report(out, "associativity", np.array(assoc).reshape(-1, 3), els, MAX_WITNESSES)

    if lat.bottom is not None:
        if lat.bottom not in lat:
            out.append(Violation("bottom", (lat.bottom,)))
        else:
            b = lat.index(lat.bottom)
            _report(out, "bottom", np.flatnonzero(~L[b]), els, MAX_WITNESSES)
    return out


def _chain_slices(qm: QuasiMetric):
    """Yield (b, A, C) with A the elements below b and C those above it."""
    L = qm.lattice.leq_matrix
    for b in range(len(qm.lattice.elements)):
        yield b, np.flatnonzero(L[:, b]), np.flatnonzero(L[b])


def verify_quasi_metric(qm: QuasiMetric, limit: int = ELEMENT_LIMIT) -> list[Violation]:
    """Check nonnegativity and axioms (i)-(iii) on every pair and chain triple."""
    lat = qm.lattice
    lat.check_size(limit)
    els = lat.elements
    n = len(els)
    L = lat.leq_matrix
    V, Def = qm.distance_matrix
    tol = qm.tolerance
    out: list[Violation] = []

    neg = np.argwhere(Def & (np.nan_to_num(V, nan=0.0) < 0))
    _report(out, "nonnegativity", neg, els, MAX_WITNESSES)

    zero = Def & (V == 0)
    eye = np.eye(n, dtype=bool)
    _report(out, "(i)", np.argwhere(zero != eye), els, MAX_WITNESSES)
    _report(out, "(ii)", np.argwhere(Def != L), els, MAX_WITNESSES)

    found = 0
    for b, A, C in _chain_slices(qm):
        if found >= MAX_WITNESSES:
            break
        ok = Def[np.ix_(A, C)] & Def[A, b][:, None] & Def[b, C][None, :]
        with np.errstate(invalid="ignore"):
            bad = ok & ~(V[np.ix_(A, C)] <= V[A, b][:, None] + V[b, C][None, :] + tol)
        for ai, ci in np.argwhere(bad)[: MAX_WITNESSES - found]:
            out.append(Violation("(iii)", (els[A[ai]], els[b], els[C[ci]])))
            found += 1
    return out


def check_normality(qm: QuasiMetric) -> tuple[bool, tuple | None]:
    """Return ``(True, None)`` if the metric is height-normal, otherwise
    ``(False, (a, b, c))`` for the first chain ``a <= b <= c`` with
    ``delta(a, b) > delta(a, c)`` or ``delta(b, c) > delta(a, c)``."""
    els = qm.lattice.elements
    V, _ = qm.distance_matrix
    tol = qm.tolerance
    for b, A, C in _chain_slices(qm):
        outer = V[np.ix_(A, C)]
        bad = (V[A, b][:, None] > outer + tol) | (V[b, C][None, :] > outer + tol)
        hits = np.argwhere(bad)
        if len(hits):
            ai, ci = hits[0]
            return False, (els[A[ai]], els[b], els[C[ci]])
    return True, None


def bowtie(y: Element, S: Iterable[Element], lat: FiniteLattice) -> bool:
    """True iff some ``s`` in ``S`` has ``s <= y <= join(S)``."""
    S = list(S)
    if not S:
        raise LatticeError("bowtie needs a nonempty set")
    return any(lat.leq(s, y) for s in S) and lat.leq(y, lat.join_all(S))


def compute_gamma(Y: Sequence[Element], qm: QuasiMetric) -> Distance:
    """Largest distance over ordered output pairs ``y_i <= y_j``."""
    lat = qm.lattice
    distinct = list(dict.fromkeys(Y))
    best: Distance = 0
    for i, a in enumerate(distinct):
        for b in distinct[i + 1 :]:
            if lat.leq(a, b):
                d = qm.delta(a, b)
            elif lat.leq(b, a):
                d = qm.delta(b, a)
            else:
                raise IncomparableError(f"outputs {a!r} and {b!r} are incomparable")
            if d > best:
                best = d
    return best


def gamma_normal_fastpath(Y: Sequence[Element], qm: QuasiMetric) -> Distance:
    """``delta(min Y, max Y)``; only valid for height-normal metrics."""
    if not qm.is_normal:
        raise LatticeError("fast path needs a height-normal quasi-metric")
    lat = qm.lattice
    return qm.delta(lat.min(Y), lat.max(Y))


def _native(qm: QuasiMetric, i: int, j: int) -> Distance:
    els = qm.lattice.elements
    return qm.delta(els[i], els[j])


def compute_D(I: Sequence[Element], qm: QuasiMetric, limit: int = ELEMENT_LIMIT) -> Distance:
    """Largest distance between two elements lying between the inputs and
    their join."""
    lat = qm.lattice
    lat.check_size(limit)
    L = lat.leq_matrix
    V, Def = qm.distance_matrix
    ins = [lat.index(x) for x in I]
    if not ins:
        raise LatticeError("no inputs")
    top = lat.index(lat.join_all(I))
    inside = np.flatnonzero(L[ins].any(axis=0) & L[:, top])
    sub = np.where(Def[np.ix_(inside, inside)], V[np.ix_(inside, inside)], -np.inf)
    a, b = np.unravel_index(int(np.argmax(sub)), sub.shape)
    return _native(qm, int(inside[a]), int(inside[b]))


def compute_Dprime(I: Sequence[Element], qm: QuasiMetric) -> Distance:
    """Largest distance from an input to the join of all inputs."""
    top = qm.lattice.join_all(I)
    return dist_max(qm.delta(x, top) for x in I)


def compute_M(qm: QuasiMetric) -> Distance:
    """Smallest distance over strictly ordered pairs ``x < y``; infinite if none."""
    V, Def = qm.distance_matrix
    strict = Def & ~np.eye(len(qm.lattice.elements), dtype=bool)
    if not strict.any():
        return math.inf
    sub = np.where(strict, V, np.inf)
    i, j = np.unravel_index(int(np.argmin(sub)), sub.shape)
    return _native(qm, int(i), int(j))
