"""Reconciliation state machines and the bounded lattice agreement driver.

Reconciliation starts from outputs that already satisfy downward-validity,
upward-validity and comparability and tries to pull them closer together.
Two reconcilers are provided:

* synchronous flooding for ``f + 1`` rounds, after which every correct
  process decides the largest value it has seen;
* ``DR(k)``: ``k`` asynchronous rounds where each process broadcasts its
  value, waits for ``n - f`` values of the same round and keeps the max.

The base lattice agreement step is replaced by :func:`generate_valid_instance`,
which builds valid outputs directly from the inputs.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, Sequence

from .agreement import AgreementInstance
from .lattice import Element, FiniteLattice, QuasiMetric


class Tag(str, enum.Enum):
    SYNC = "SYNC"
    DR = "DR"


class Reconciler(str, enum.Enum):
    SYNC = "sync"
    DR = "dr"


@dataclass(frozen=True)
class Message:
    sender: int
    round: int
    payload: Any  # frozenset of values for SYNC, one value for DR
    tag: Tag

    def __post_init__(self):
        if self.round < 1:
            raise ValueError("rounds start at 1")


# ---------------------------------------------------------------------------
# Synchronous flooding


@dataclass(frozen=True)
class SyncState:
    pid: int
    values: frozenset
    round: int = 0  # completed rounds
    sent_before: frozenset = frozenset()
    decided: Element | None = None

    @classmethod
    def initial(cls, pid: int, y: Element) -> "SyncState":
        return cls(pid, frozenset([y]))

    @property
    def done(self) -> bool:
        return self.decided is not None


def sync_outgoing(state: SyncState) -> tuple[SyncState, frozenset]:
    """Values not sent before; marks them as sent."""
    out = state.values - state.sent_before
    return replace(state, sent_before=state.sent_before | out), out


def sync_on_round(
    state: SyncState,
    received: Iterable[frozenset],
    lattice: FiniteLattice,
    f: int,
) -> tuple[SyncState, frozenset]:
    """Merge one round of received sets.

    Returns the new state and the set to send next round. After round
    ``f + 1`` the state decides ``max(V)`` and nothing more is sent.
    """
    if state.done or state.round >= f + 1:
        raise ValueError(f"process {state.pid} already ran all {f + 1} rounds")
    values = state.values.union(*received)
    state = replace(state, values=values, round=state.round + 1)
    if state.round == f + 1:
        # IncomparableError here means the outputs were not a chain
        return replace(state, decided=lattice.max(sorted(values, key=lattice.index))), frozenset()
    return sync_outgoing(state)


# ---------------------------------------------------------------------------
# DR(k)


@dataclass(frozen=True)
class DRState:
    """``history[r - 1]`` is the value entering round ``r``; ``views[r - 1]``
    is the multiset of values received in round ``r``."""

    pid: int
    y: Element
    round: int = 1
    history: tuple = ()
    views: tuple = ()

    def __post_init__(self):
        if not self.history:
            object.__setattr__(self, "history", (self.y,))


def dr_on_round(
    state: DRState,
    received: Sequence[Element],
    lattice: FiniteLattice,
    quorum: int | None = None,
) -> DRState:
    if quorum is not None and len(received) != quorum:
        raise ValueError(f"expected {quorum} values, got {len(received)}")
    y = lattice.max([state.y, *received])
    return replace(
        state,
        y=y,
        round=state.round + 1,
        history=state.history + (y,),
        views=state.views + (tuple(received),),
    )


# ---------------------------------------------------------------------------
# Valid-instance generator


def outputs_from_schedule(
    lattice: FiniteLattice,
    inputs: Sequence[Element],
    order: Sequence[int],
    stops: Sequence[int],
) -> tuple:
    """Outputs built from prefix joins of the inputs.

    With ``J[t]`` the join of the inputs of ``order[0..t]``, process
    ``order[t]`` outputs ``J[stops[t]]``; every ``stops[t]`` must be at least
    ``t``. The result is always a valid lattice agreement output.
    """
    n = len(inputs)
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the process indices")
    prefix = []
    acc = None
    for p in order:
        acc = inputs[p] if acc is None else lattice.join(acc, inputs[p])
        prefix.append(acc)
    ys: list = [None] * n
    for t, p in enumerate(order):
        s = stops[t]
        if not t <= s < n:
            raise ValueError(f"stop {s} at position {t} is out of range")
        ys[p] = prefix[s]
    return tuple(ys)


def generate_valid_instance(
    lattice: FiniteLattice,
    n: int,
    seed: int | str | random.Random = 0,
    input_sampler: Callable[[random.Random], Element] | None = None,
    inputs: Sequence[Element] | None = None,
) -> AgreementInstance:
    """A random instance whose outputs satisfy DV, UV and comparability.

    Inputs come from ``input_sampler`` (uniform over the carrier by
    default) unless given explicitly.
    """
    if n < 1:
        raise ValueError("need at least one process")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    if inputs is None:
        sampler = input_sampler or (lambda r: r.choice(lattice.elements))
        inputs = [sampler(rng) for _ in range(n)]
    elif len(inputs) != n:
        raise ValueError("need one input per process")
    order = list(range(n))
    rng.shuffle(order)
    stops = [rng.randint(t, n - 1) for t in range(n)]
    return AgreementInstance(inputs, outputs_from_schedule(lattice, inputs, order, stops))


def compose_bounded_la(
    qm: QuasiMetric,
    inputs: Sequence[Element],
    reconciler: Reconciler | str,
    world,
    crash=None,
    k: int | None = None,
) -> AgreementInstance:
    """Base agreement (by generator) followed by a simulated reconciliation.

    ``world`` is a :class:`~lattice_agreement.netsim.NetworkConfig`; its seed
    drives both the generator and the scheduler. Returns the full instance
    with reconciled outputs; processes that crashed keep their base output
    in ``reconciled`` and are listed in ``crashed``.
    """
    from . import netsim

    reconciler = Reconciler(reconciler)
    base = generate_valid_instance(
        qm.lattice, world.n, random.Random(f"{world.seed}:instance"), inputs=inputs
    )
    crash = crash or netsim.CrashSchedule()
    if reconciler is Reconciler.SYNC:
        outcome = netsim.run_sync(world, crash, base.outputs, qm)
    else:
        if k is None:
            raise ValueError("DR needs a round count k")
        outcome = netsim.run_async_dr(world, crash, k, base.outputs, qm)
    final = tuple(outcome.decisions.get(i, base.outputs[i]) for i in range(world.n))
    return AgreementInstance(base.inputs, base.outputs, final, frozenset(outcome.crash_rounds))
