"""Finite join-semilattices and quasi-metrics defined over them.

Distances are plain Python numbers (``int``, ``float`` or ``Fraction``),
``math.inf`` for an infinite distance, and ``None`` when the distance is
undefined (the two elements are not ordered).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Any, Callable, Hashable, Iterable, Sequence

import numpy as np

Element = Hashable
Distance = Any  # int | float | Fraction | math.inf | None

UNDEFINED = None
ELEMENT_LIMIT = 4096
FLOAT_TOL = 1e-9


class LatticeError(ValueError):
    pass


class IncomparableError(LatticeError):
    """Raised when an operation needs a chain but got incomparable values."""


class LatticeTooLarge(LatticeError):
    pass


def is_exact(d: Distance) -> bool:
    return not isinstance(d, (float, np.floating)) or d == math.inf


def dist_le(a: Distance, b: Distance) -> bool:
    """``a <= b`` for defined distances; absolute tolerance only for floats."""
    if a is None or b is None:
        raise LatticeError("cannot order an undefined distance")
    if is_exact(a) and is_exact(b):
        return a <= b
    return a <= b + FLOAT_TOL


def dist_max(ds: Iterable[Distance]) -> Distance:
    best = 0
    for d in ds:
        if d is None:
            raise LatticeError("undefined distance in maximum")
        if d > best:
            best = d
    return best


@dataclass(frozen=True, eq=False)
class FiniteLattice:
    """An enumerable join-semilattice.

    ``elements`` is listed in a linear extension of ``leq`` (every element
    appears after everything below it).
    """

    elements: tuple
    leq: Callable[[Element, Element], bool]
    join: Callable[[Element, Element], Element]
    bottom: Element | None = None
    encode: Callable[[Element], Any] = field(default=lambda e: e)
    decode: Callable[[Any], Element] = field(default=lambda o: o)

    def __len__(self) -> int:
        return len(self.elements)

    @cached_property
    def _position(self) -> dict:
        return {e: i for i, e in enumerate(self.elements)}

    def index(self, e: Element) -> int:
        try:
            return self._position[e]
        except KeyError:
            raise LatticeError(f"{e!r} is not an element of this lattice") from None

    def __contains__(self, e: Element) -> bool:
        return e in self._position

    def comparable(self, a: Element, b: Element) -> bool:
        return self.leq(a, b) or self.leq(b, a)

    def join_all(self, values: Iterable[Element]) -> Element:
        values = list(values)
        if not values:
            raise LatticeError("join of an empty set is undefined")
        return reduce(self.join, values)

    def max(self, values: Iterable[Element]) -> Element:
        """Largest value of a chain; raises IncomparableError otherwise."""
        values = list(values)
        if not values:
            raise LatticeError("max of an empty set")
        top = values[0]
        for v in values[1:]:
            if self.leq(top, v):
                top = v
            elif not self.leq(v, top):
                raise IncomparableError(f"{top!r} and {v!r} are incomparable")
        return top

    def min(self, values: Iterable[Element]) -> Element:
        values = list(values)
        if not values:
            raise LatticeError("min of an empty set")
        low = values[0]
        for v in values[1:]:
            if self.leq(v, low):
                low = v
            elif not self.leq(low, v):
                raise IncomparableError(f"{low!r} and {v!r} are incomparable")
        return low

    def check_size(self, limit: int = ELEMENT_LIMIT) -> None:
        if len(self.elements) > limit:
            raise LatticeTooLarge(
                f"lattice has {len(self.elements)} elements, limit is {limit}"
            )

    @cached_property
    def leq_matrix(self) -> np.ndarray:
        self.check_size()
        els = self.elements
        return np.array([[self.leq(a, b) for b in els] for a in els], dtype=bool)

    @cached_property
    def join_table(self) -> np.ndarray:
        """``join_table[i, j]`` is the index of ``join(e_i, e_j)``, or -1
        when the join falls outside the carrier."""
        self.check_size()
        els = self.elements
        pos = self._position
        return np.array(
            [[pos.get(self.join(a, b), -1) for b in els] for a in els], dtype=np.int64
        )


@dataclass(frozen=True, eq=False)
class QuasiMetric:
    """A partial distance on a finite lattice, defined on ordered pairs.

    ``family`` and ``params`` describe how the space was built so it can be
    written back out as a document.
    """

    lattice: FiniteLattice
    delta: Callable[[Element, Element], Distance]
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, a: Element, b: Element) -> Distance:
        return self.delta(a, b)

    @cached_property
    def distance_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """(values, defined) arrays over all element pairs.

        Undefined entries hold NaN in ``values`` and False in ``defined``.
        """
        els = self.lattice.elements
        self.lattice.check_size()
        n = len(els)
        values = np.full((n, n), np.nan)
        defined = np.zeros((n, n), dtype=bool)
        for i, a in enumerate(els):
            for j, b in enumerate(els):
                d = self.delta(a, b)
                if d is not None:
                    values[i, j] = float(d)
                    defined[i, j] = True
        return values, defined

    @cached_property
    def exact(self) -> bool:
        """True when every defined distance is integral (compare without tolerance)."""
        values, defined = self.distance_matrix
        v = values[defined]
        v = v[np.isfinite(v)]
        return bool(np.all(v == np.round(v))) and bool(np.all(np.abs(v) < 2**52))

    @property
    def tolerance(self) -> float:
        return 0.0 if self.exact else FLOAT_TOL

    @cached_property
    def is_normal(self) -> bool:
        from .checks import check_normality

        return check_normality(self)[0]


# ---------------------------------------------------------------------------
# Shipped families


def chain_space(m: int) -> QuasiMetric:
    """Integers ``0..m`` ordered as usual, distance ``b - a``."""
    if m < 0:
        raise LatticeError("chain length must be nonnegative")
    lat = FiniteLattice(
        elements=tuple(range(m + 1)),
        leq=lambda a, b: a <= b,
        join=max,
        bottom=0,
        decode=int,
    )
    return QuasiMetric(
        lat, lambda a, b: b - a if a <= b else None, "chain", {"m": m}
    )


def table_chain_space(m: int, table: dict[tuple[int, int], Distance]) -> QuasiMetric:
    """Chain ``0..m`` with distances read from an explicit table.

    ``table`` maps ``(a, b)`` with ``a < b`` to a distance. Used for
    non-normal and deliberately broken metrics.
    """
    lat = FiniteLattice(
        elements=tuple(range(m + 1)),
        leq=lambda a, b: a <= b,
        join=max,
        bottom=0,
        decode=int,
    )
    table = dict(table)

    def delta(a, b):
        if a > b:
            return None
        if a == b:
            return table.get((a, b), 0)
        return table[(a, b)]

    rows = sorted([a, b, d] for (a, b), d in table.items())
    return QuasiMetric(lat, delta, "table_chain", {"m": m, "table": rows})


def nonnormal_chain_space() -> QuasiMetric:
    """3-chain with delta(0,1)=5, delta(1,2)=5, delta(0,2)=4."""
    return table_chain_space(2, {(0, 1): 5, (1, 2): 5, (0, 2): 4})


def powerset_space(weights: dict[str, Distance] | Sequence[str]) -> QuasiMetric:
    """Subsets of a finite universe under inclusion.

    The distance from ``A`` to a superset ``B`` is the total weight of
    ``B - A``. A plain sequence of names gives unit weights.
    """
    if not isinstance(weights, dict):
        weights = {str(u): 1 for u in weights}
    for u, w in weights.items():
        if not w > 0:
            raise LatticeError(f"weight of {u!r} must be positive, got {w!r}")
    universe = sorted(weights)
    elements = tuple(
        frozenset(c)
        for r in range(len(universe) + 1)
        for c in itertools.combinations(universe, r)
    )
    lat = FiniteLattice(
        elements=elements,
        leq=lambda a, b: a <= b,
        join=lambda a, b: a | b,
        bottom=frozenset(),
        encode=lambda e: sorted(e),
        decode=lambda o: frozenset(str(u) for u in o),
    )

    def delta(a, b):
        if not a <= b:
            return None
        return sum((weights[u] for u in b - a), 0)

    return QuasiMetric(lat, delta, "powerset", {"weights": dict(sorted(weights.items()))})


def vector_clock_space(dim: int, cap: int) -> QuasiMetric:
    """Vectors in ``[0, cap]^dim`` ordered componentwise.

    Join is the componentwise max; distance is the difference of coordinate
    sums.
    """
    if dim < 1 or cap < 0:
        raise LatticeError("vector clocks need dim >= 1 and cap >= 0")
    elements = tuple(
        sorted(itertools.product(range(cap + 1), repeat=dim), key=lambda v: (sum(v), v))
    )

    def leq(a, b):
        return all(x <= y for x, y in zip(a, b))

    lat = FiniteLattice(
        elements=elements,
        leq=leq,
        join=lambda a, b: tuple(max(x, y) for x, y in zip(a, b)),
        bottom=(0,) * dim,
        encode=list,
        decode=lambda o: tuple(int(x) for x in o),
    )
    return QuasiMetric(
        lat,
        lambda a, b: sum(b) - sum(a) if leq(a, b) else None,
        "vector_clock",
        {"dim": dim, "cap": cap},
    )


FAMILIES: dict[str, Callable[..., QuasiMetric]] = {
    "chain": chain_space,
    "powerset": powerset_space,
    "vector_clock": vector_clock_space,
}


def build_space(family: str, params: dict | None = None) -> QuasiMetric:
    params = dict(params or {})
    if family == "table_chain":
        table = {(int(a), int(b)): d for a, b, d in params["table"]}
        return table_chain_space(int(params["m"]), table)
    try:
        factory = FAMILIES[family]
    except KeyError:
        raise LatticeError(f"unknown lattice family {family!r}") from None
    return factory(**params)
