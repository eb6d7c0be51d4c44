"""Deterministic message-passing worlds for the reconciliation protocols.

Two modes:

``SYNC_ROUNDS``
    Lock-step rounds. A process that crashes in round ``r`` delivers its
    round-``r`` message only to the recipients named in its crash point
    and takes no further steps.

``ASYNC``
    Point-to-point FIFO channels; a scheduler picks which channel delivers
    next. Broadcasts are atomic: a process crashing at round ``r`` has sent
    every message of rounds ``< r`` and none of round ``r``.

Runs are reproducible from (config, crash schedule, initial values) and
are recorded as a line-delimited JSON trace that :func:`replay` can
re-execute.
"""

from __future__ import annotations

import enum
import json
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .documents import space_from_doc, space_to_doc
from .lattice import Element, QuasiMetric
from .protocols import (
    DRState,
    SyncState,
    dr_on_round,
    sync_on_round,
    sync_outgoing,
)

TRACE_VERSION = 1


class BudgetError(ValueError):
    """Fault budget violated (``f >= n`` or too many crashes)."""


class SchedulerDeadlock(RuntimeError):
    pass


class TraceError(ValueError):
    pass


class Mode(str, enum.Enum):
    SYNC_ROUNDS = "sync_rounds"
    ASYNC = "async"


class Scheduling(str, enum.Enum):
    DELIVER_ALL = "deliver_all"
    UNIFORM_RANDOM = "uniform_random"
    DELAY_SET = "delay_set"


@dataclass(frozen=True)
class SchedulerPolicy:
    """How the asynchronous world orders deliveries.

    ``DELIVER_ALL`` delivers in global send order. ``UNIFORM_RANDOM`` picks
    a uniformly random nonempty channel. ``DELAY_SET`` does the same but
    only touches channels from ``delayed`` senders when nothing else is
    pending.
    """

    kind: Scheduling = Scheduling.DELIVER_ALL
    delayed: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "kind", Scheduling(self.kind))
        object.__setattr__(self, "delayed", frozenset(self.delayed))
        if self.delayed and self.kind is not Scheduling.DELAY_SET:
            raise ValueError("only DELAY_SET takes a delayed sender set")

    @classmethod
    def delay(cls, *pids: int) -> "SchedulerPolicy":
        return cls(Scheduling.DELAY_SET, frozenset(pids))

    def to_doc(self) -> dict:
        return {"kind": self.kind.value, "delayed": sorted(self.delayed)}


@dataclass(frozen=True)
class NetworkConfig:
    n: int
    f: int
    mode: Mode = Mode.ASYNC
    scheduler: SchedulerPolicy = field(default_factory=SchedulerPolicy)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.n < 1 or not 0 <= self.f < self.n:
            raise BudgetError(f"need 0 <= f < n, got n={self.n} f={self.f}")
        if len(self.scheduler.delayed) > self.f:
            raise BudgetError("cannot delay more senders than the fault budget")
        if any(not 0 <= p < self.n for p in self.scheduler.delayed):
            raise ValueError("delayed sender out of range")

    @property
    def quorum(self) -> int:
        return self.n - self.f

    def to_doc(self) -> dict:
        return {
            "n": self.n,
            "f": self.f,
            "mode": self.mode.value,
            "scheduler": self.scheduler.to_doc(),
            "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "NetworkConfig":
        sched = doc.get("scheduler", {})
        return cls(
            n=int(doc["n"]),
            f=int(doc["f"]),
            mode=Mode(doc.get("mode", "async")),
            scheduler=SchedulerPolicy(
                Scheduling(sched.get("kind", "deliver_all")),
                frozenset(int(p) for p in sched.get("delayed", [])),
            ),
            seed=int(doc.get("seed", 0)),
        )


@dataclass(frozen=True)
class CrashPoint:
    """Crash of one process at the start of ``round``.

    In synchronous mode ``recipients`` lists who still receives the
    crash-round message (empty means nobody). Asynchronous broadcasts are
    atomic, so ``recipients`` must be None there.
    """

    round: int
    recipients: frozenset | None = None

    def __post_init__(self):
        if self.recipients is not None:
            object.__setattr__(self, "recipients", frozenset(self.recipients))


@dataclass(frozen=True)
class CrashSchedule:
    points: Mapping[int, CrashPoint] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "points", dict(sorted(self.points.items())))

    def __len__(self) -> int:
        return len(self.points)

    def get(self, pid: int) -> CrashPoint | None:
        return self.points.get(pid)

    def validate(self, world: NetworkConfig, rounds: int) -> None:
        if len(self.points) > world.f:
            raise BudgetError(f"{len(self.points)} crashes exceed the budget f={world.f}")
        for pid, cp in self.points.items():
            if not 0 <= pid < world.n:
                raise ValueError(f"crashing process {pid} out of range")
            if not 1 <= cp.round <= rounds:
                raise ValueError(f"crash round {cp.round} outside 1..{rounds}")
            if world.mode is Mode.ASYNC and cp.recipients is not None:
                raise ValueError("asynchronous broadcasts are atomic; no recipient subsets")
            if cp.recipients is not None and any(not 0 <= q < world.n for q in cp.recipients):
                raise ValueError("crash recipient out of range")

    def to_doc(self) -> dict:
        return {
            str(pid): {
                "round": cp.round,
                "recipients": None if cp.recipients is None else sorted(cp.recipients),
            }
            for pid, cp in self.points.items()
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "CrashSchedule":
        points = {}
        for pid, cp in doc.items():
            rec = cp.get("recipients")
            points[int(pid)] = CrashPoint(
                int(cp["round"]), None if rec is None else frozenset(int(q) for q in rec)
            )
        return cls(points)


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    kind: str  # SEND, DELIVER, CRASH, DECIDE
    process: int
    round: int
    peer: int | None = None
    payload: Any = None

    def to_doc(self) -> dict:
        return {
            "seq": self.seq,
            "kind": self.kind,
            "process": self.process,
            "round": self.round,
            "peer": self.peer,
            "payload": self.payload,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "TraceEvent":
        return cls(doc["seq"], doc["kind"], doc["process"], doc["round"], doc["peer"], doc["payload"])


@dataclass
class ProtocolOutcome:
    """Result of one simulated run.

    ``snapshots[r - 1]`` maps each process still taking part in round
    ``r`` to its value entering that round (DR), or to its value set after
    ``r - 1`` rounds (synchronous). The last snapshot holds final values.
    """

    protocol: str
    world: NetworkConfig
    crash: CrashSchedule
    qm: QuasiMetric
    initial: tuple
    k: int | None
    decisions: dict[int, Element]
    crash_rounds: dict[int, int]
    snapshots: list[dict[int, Any]]
    events: list[TraceEvent]

    def value_sets(self) -> list[set]:
        """``A_r`` as sets of values (DR runs)."""
        return [set(s.values()) for s in self.snapshots]

    def header(self) -> dict:
        enc = self.qm.lattice.encode
        return {
            "kind": "HEADER",
            "version": TRACE_VERSION,
            "protocol": self.protocol,
            "k": self.k,
            "config": self.world.to_doc(),
            "crash": self.crash.to_doc(),
            "lattice": space_to_doc(self.qm),
            "initial": [enc(v) for v in self.initial],
        }

    def trace_lines(self) -> list[str]:
        lines = [self.header()]
        lines += [e.to_doc() for e in self.events]
        lines.append({"kind": "END", "events": len(self.events)})
        return [json.dumps(d, sort_keys=True, separators=(",", ":")) for d in lines]

    def to_trace(self) -> str:
        return "\n".join(self.trace_lines()) + "\n"


class _Recorder:
    def __init__(self, qm: QuasiMetric):
        self.events: list[TraceEvent] = []
        self.lat = qm.lattice

    def payload(self, value) -> Any:
        return self.lat.encode(value)

    def payload_set(self, values: frozenset) -> list:
        return [self.lat.encode(v) for v in sorted(values, key=self.lat.index)]

    def emit(self, kind, process, rnd, peer=None, payload=None) -> None:
        self.events.append(TraceEvent(len(self.events), kind, process, rnd, peer, payload))


# ---------------------------------------------------------------------------
# Synchronous rounds


def run_sync(
    world: NetworkConfig,
    crash: CrashSchedule,
    processes: Sequence[SyncState | Element],
    qm: QuasiMetric,
) -> ProtocolOutcome:
    """Run synchronous flooding for ``f + 1`` lock-step rounds."""
    if world.mode is not Mode.SYNC_ROUNDS:
        raise ValueError("run_sync needs a SYNC_ROUNDS world")
    n, f = world.n, world.f
    if len(processes) != n:
        raise ValueError(f"expected {n} processes, got {len(processes)}")
    rounds = f + 1
    crash.validate(world, rounds)
    lat = qm.lattice
    rec = _Recorder(qm)

    states: dict[int, SyncState] = {}
    outgoing: dict[int, frozenset] = {}
    for i, p in enumerate(processes):
        st = p if isinstance(p, SyncState) else SyncState.initial(i, p)
        states[i], outgoing[i] = sync_outgoing(st)
    initial = tuple(lat.max(sorted(s.values, key=lat.index)) for s in states.values())
    alive = set(range(n))
    crash_rounds: dict[int, int] = {}
    snapshots = [{i: states[i].values for i in range(n)}]

    for r in range(1, rounds + 1):
        sent = []
        for i in sorted(alive):
            cp = crash.get(i)
            crashing = cp is not None and cp.round == r
            targets = sorted(cp.recipients or ()) if crashing else range(n)
            if outgoing[i]:
                for j in targets:
                    rec.emit("SEND", i, r, j, rec.payload_set(outgoing[i]))
                    sent.append((i, j, outgoing[i]))
            if crashing:
                rec.emit("CRASH", i, r)
                crash_rounds[i] = r
        alive -= set(crash_rounds)
        inbox = defaultdict(list)
        for i, j, payload in sent:
            if j in alive:
                rec.emit("DELIVER", j, r, i, rec.payload_set(payload))
                inbox[j].append(payload)
        for j in sorted(alive):
            states[j], outgoing[j] = sync_on_round(states[j], inbox[j], lat, f)
        snapshots.append({j: states[j].values for j in sorted(alive)})

    decisions = {}
    for j in sorted(alive):
        decisions[j] = states[j].decided
        rec.emit("DECIDE", j, rounds, None, rec.payload(states[j].decided))
    return ProtocolOutcome(
        "sync", world, crash, qm, initial, None, decisions, crash_rounds, snapshots, rec.events
    )


# ---------------------------------------------------------------------------
# Asynchronous DR(k)


class _KeyPool:
    """Set with O(1) insert, delete and uniform choice; iteration order is a
    deterministic function of the operation history."""

    def __init__(self):
        self.items: list = []
        self.pos: dict = {}

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, key) -> bool:
        return key in self.pos

    def add(self, key) -> None:
        if key not in self.pos:
            self.pos[key] = len(self.items)
            self.items.append(key)

    def discard(self, key) -> None:
        i = self.pos.pop(key, None)
        if i is None:
            return
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i

    def choice(self, rng: random.Random):
        return self.items[rng.randrange(len(self.items))]


class _Network:
    """FIFO channels keyed by (sender, receiver) plus the delivery policy."""

    def __init__(self, world: NetworkConfig, script: Iterable[tuple[int, int]] | None = None):
        self.policy = world.scheduler
        self.rng = random.Random(f"{world.seed}:scheduler")
        self.channels: dict[tuple[int, int], deque] = defaultdict(deque)
        self.normal = _KeyPool()
        self.held = _KeyPool()
        self.fifo: deque = deque()
        self.script = None if script is None else iter(script)

    def _pool(self, key) -> _KeyPool:
        return self.held if key[0] in self.policy.delayed else self.normal

    def send(self, sender: int, receiver: int, msg) -> None:
        key = (sender, receiver)
        self.channels[key].append(msg)
        self._pool(key).add(key)
        self.fifo.append(key)

    def drop_receiver(self, receiver: int, n: int) -> None:
        for s in range(n):
            key = (s, receiver)
            if key in self.channels:
                self.channels[key].clear()
                self._pool(key).discard(key)

    def pending(self) -> bool:
        return bool(len(self.normal) or len(self.held))

    def next(self):
        if self.script is not None:
            try:
                key = next(self.script)
            except StopIteration:
                raise TraceError("trace ended before the run completed") from None
            if not self.channels.get(key):
                raise TraceError(f"recorded delivery on empty channel {key}")
        elif self.policy.kind is Scheduling.DELIVER_ALL:
            while True:
                key = self.fifo.popleft()
                if self.channels.get(key):
                    break
        elif len(self.normal):
            key = self.normal.choice(self.rng)
        else:
            key = self.held.choice(self.rng)
        chan = self.channels[key]
        msg = chan.popleft()
        if not chan:
            self._pool(key).discard(key)
        return key, msg


def run_async_dr(
    world: NetworkConfig,
    crash: CrashSchedule,
    k: int,
    processes: Sequence[DRState | Element],
    qm: QuasiMetric,
    *,
    _script: Iterable[tuple[int, int]] | None = None,
) -> ProtocolOutcome:
    """Run ``DR(k)``: each round waits for ``n - f`` same-round values.

    Extra values for a round that arrive after the quorum are discarded,
    as are values from rounds a process has already finished. Values from
    later rounds are held until the process gets there.
    """
    if world.mode is not Mode.ASYNC:
        raise ValueError("run_async_dr needs an ASYNC world")
    if k < 1:
        raise ValueError("k must be at least 1")
    n, quorum = world.n, world.quorum
    if len(processes) != n:
        raise ValueError(f"expected {n} processes, got {len(processes)}")
    crash.validate(world, k)
    lat = qm.lattice
    rec = _Recorder(qm)
    net = _Network(world, _script)

    states = {
        i: p if isinstance(p, DRState) else DRState(i, p) for i, p in enumerate(processes)
    }
    initial = tuple(states[i].y for i in range(n))
    buffers: dict[int, dict[int, list]] = {i: defaultdict(list) for i in range(n)}
    crashed: dict[int, int] = {}
    decisions: dict[int, Element] = {}
    snapshots: list[dict[int, Any]] = [dict() for _ in range(k + 1)]

    def start_round(i: int, r: int) -> None:
        cp = crash.get(i)
        if cp is not None and cp.round == r:
            rec.emit("CRASH", i, r)
            crashed[i] = r
            net.drop_receiver(i, n)
            buffers[i].clear()
            return
        snapshots[r - 1][i] = states[i].y
        payload = rec.payload(states[i].y)
        for j in range(n):
            rec.emit("SEND", i, r, j, payload)
            if j not in crashed:
                net.send(i, j, (r, states[i].y))

    def advance(i: int) -> None:
        while i not in crashed and i not in decisions:
            r = states[i].round
            if len(buffers[i].get(r, ())) < quorum:
                return
            states[i] = dr_on_round(states[i], buffers[i].pop(r), lat, quorum)
            if states[i].round > k:
                decisions[i] = states[i].y
                snapshots[k][i] = states[i].y
                rec.emit("DECIDE", i, k, None, rec.payload(states[i].y))
                return
            start_round(i, states[i].round)

    for i in range(n):
        start_round(i, 1)

    while net.pending():
        (sender, receiver), (r, value) = net.next()
        rec.emit("DELIVER", receiver, r, sender, rec.payload(value))
        if receiver in decisions or r < states[receiver].round:
            continue
        buf = buffers[receiver][r]
        if len(buf) < quorum:
            buf.append(value)
        advance(receiver)

    stuck = [i for i in range(n) if i not in crashed and i not in decisions]
    if stuck:
        raise SchedulerDeadlock(f"processes {stuck} could not collect {quorum} messages")
    return ProtocolOutcome(
        "dr", world, crash, qm, initial, k, decisions, crashed, snapshots, rec.events
    )


# ---------------------------------------------------------------------------
# Trace replay


def parse_trace(text: str) -> tuple[dict, list[TraceEvent]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceError("empty trace")
    try:
        docs = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise TraceError(f"malformed trace line: {exc}") from None
    header, body = docs[0], docs[1:]
    if header.get("kind") != "HEADER":
        raise TraceError("trace has no header")
    if header.get("version") != TRACE_VERSION:
        raise TraceError(f"trace version {header.get('version')!r} != {TRACE_VERSION}")
    if not body or body[-1].get("kind") != "END":
        raise TraceError("trace is truncated (no END record)")
    events = [TraceEvent.from_doc(d) for d in body[:-1]]
    if body[-1].get("events") != len(events):
        raise TraceError("trace is truncated (event count mismatch)")
    return header, events


def replay(trace: str) -> ProtocolOutcome:
    """Re-execute a recorded run and check it reproduces the same events."""
    header, events = parse_trace(trace)
    world = NetworkConfig.from_doc(header["config"])
    crash = CrashSchedule.from_doc(header["crash"])
    qm = space_from_doc(header["lattice"])
    initial = [qm.lattice.decode(v) for v in header["initial"]]
    if header["protocol"] == "sync":
        outcome = run_sync(world, crash, initial, qm)
    elif header["protocol"] == "dr":
        script = [(e.peer, e.process) for e in events if e.kind == "DELIVER"]
        outcome = run_async_dr(world, crash, header["k"], initial, qm, _script=script)
    else:
        raise TraceError(f"unknown protocol {header['protocol']!r}")
    if outcome.events != events:
        first = next(
            (a.seq for a, b in zip(outcome.events, events) if a != b),
            min(len(outcome.events), len(events)),
        )
        raise TraceError(f"replay diverged from the recorded trace at event {first}")
    return outcome
