"""Monte Carlo simulation of the {0, 1, BOT} abstraction of DR(k).

A cell is 0 while the process still holds the minimum output, 1 once it
holds something larger, and BOT once it has crashed; ``BOT < 0 < 1``. Each
round every live 0-cell looks at ``n - f`` randomly chosen cells and becomes
1 if it saw a 1. A run succeeds when the final state has no 0s or no 1s.

Crash handling comes in two flavours:

``TRANSIENT`` (default)
    The crash marks the cell BOT in the working state only for the rest of
    the round: later cells of the same round may draw the BOT, but the
    round's result is written from the copy taken at the start of the
    round, so the crashed cell keeps its old value (a crashed 0 stays 0).
    Every crash consumes fault budget.

``PERSISTENT``
    The crash is written into the next state and the cell stays BOT for
    good. Cells that are already BOT cannot crash again.

Cell values inside a round are drawn in one vectorised pass. Crash
decisions keep the index order of a sequential sweep (only the first
``f - x`` candidates crash), and a 0-cell's draw only depends on how many
1s it can see, so the number of 1s among ``n - f`` draws is sampled
directly from the hypergeometric (without replacement) or binomial (with
replacement) law.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

BOT, ZERO, ONE = -1, 0, 1
_SYMBOLS = {BOT: "_", ZERO: "0", ONE: "1"}


class Sampling(str, enum.Enum):
    WITHOUT_REPLACEMENT = "without"
    WITH_REPLACEMENT = "with"


class CrashMode(str, enum.Enum):
    TRANSIENT = "transient"
    PERSISTENT = "persistent"


class Initial(str, enum.Enum):
    RANDOM_UNIFORM_01 = "random"
    WORST_CASE = "worst"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class ModelState:
    cells: np.ndarray
    crashed: int = 0

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int8)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def n(self) -> int:
        return len(self.cells)

    def count(self, v: int) -> int:
        return int(np.count_nonzero(self.cells == v))

    def __str__(self) -> str:
        return "<" + ",".join(_SYMBOLS[int(c)] for c in self.cells) + ">"


@dataclass(frozen=True)
class ModelConfig:
    n: int
    f: int
    p_f: float
    k: int
    sampling: Sampling = Sampling.WITHOUT_REPLACEMENT
    initial: Initial = Initial.RANDOM_UNIFORM_01
    runs: int = 1000
    seed: int = 0
    crash_mode: CrashMode = CrashMode.TRANSIENT
    explicit: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "sampling", Sampling(self.sampling))
        object.__setattr__(self, "initial", Initial(self.initial))
        object.__setattr__(self, "crash_mode", CrashMode(self.crash_mode))
        if not 0 <= self.f < self.n:
            raise ValueError(f"need 0 <= f < n, got n={self.n} f={self.f}")
        if not 0.0 <= self.p_f <= 1.0:
            raise ValueError(f"p_f must be a probability, got {self.p_f}")
        if self.k < 1 or self.runs < 1:
            raise ValueError("k and runs must be positive")
        if self.initial is Initial.EXPLICIT:
            if self.explicit is None or len(self.explicit) != self.n:
                raise ValueError("EXPLICIT initial state needs a length-n vector")
            object.__setattr__(self, "explicit", tuple(int(c) for c in self.explicit))


def is_in_state_space(v: Sequence[int], f: int) -> bool:
    v = np.asarray(v)
    return int(np.count_nonzero(v == BOT)) <= f and bool(np.any(v == ONE))


def is_reachable(S: Sequence[int], S2: Sequence[int]) -> bool:
    """BOT cells stay BOT and 1-cells never fall back to 0."""
    S, S2 = np.asarray(S), np.asarray(S2)
    if S.shape != S2.shape:
        raise ValueError("states have different lengths")
    return bool(np.all(S2[S == BOT] == BOT) and np.all(S2[S == ONE] != ZERO))


def is_improved(S: Sequence[int]) -> bool:
    S = np.asarray(S)
    return not np.any(S == ZERO) or not np.any(S == ONE)


def parse_state(text: str) -> tuple[int, ...]:
    """``"1,0,_"`` or ``"10_"`` to a cell tuple; ``_`` (or ``b``) is BOT."""
    table = {"0": ZERO, "1": ONE, "_": BOT, "b": BOT, "B": BOT}
    chars = [c for c in text.replace(",", "").replace(" ", "")]
    try:
        return tuple(table[c] for c in chars)
    except KeyError as exc:
        raise ValueError(f"bad cell {exc.args[0]!r} in state {text!r}") from None


def _ones_seen(ones: int | np.ndarray, cfg: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    """Number of 1s among ``n - f`` draws from ``n`` cells holding ``ones`` 1s."""
    n, draws = cfg.n, cfg.n - cfg.f
    ones = np.asarray(ones, dtype=np.int64)
    if cfg.sampling is Sampling.WITHOUT_REPLACEMENT:
        return rng.hypergeometric(ones, n - ones, draws)
    return rng.binomial(draws, ones / n)


def model_round(S: ModelState, cfg: ModelConfig, rng: np.random.Generator) -> ModelState:
    """One pass of the outer loop: crashes, then every live 0 samples."""
    cells = S.cells
    n, x = len(cells), S.crashed
    if n != cfg.n:
        raise ValueError(f"state has {n} cells, config says n={cfg.n}")
    if x > cfg.f:
        raise ValueError("crash count already exceeds f")
    persistent = cfg.crash_mode is CrashMode.PERSISTENT

    candidates = rng.random(n) < cfg.p_f
    if persistent:
        candidates &= cells != BOT
    crash = np.zeros(n, dtype=bool)
    budget = cfg.f - x
    if budget > 0:
        idx = np.flatnonzero(candidates)[:budget]
        crash[idx] = True

    zeros = np.flatnonzero((cells == ZERO) & ~crash)
    ones_before = int(np.count_nonzero(cells == ONE))
    if persistent:
        visible = np.full(len(zeros), ones_before)
    else:
        # 1-cells that already crashed earlier in this sweep show as BOT
        crashed_ones = np.cumsum(crash & (cells == ONE))
        prior = np.where(zeros > 0, crashed_ones[np.maximum(zeros - 1, 0)], 0)
        visible = ones_before - prior

    out = cells.copy()
    if len(zeros):
        hit = _ones_seen(visible, cfg, rng) > 0
        out[zeros[hit]] = ONE
    if persistent:
        out[crash] = BOT
    return ModelState(out, x + int(crash.sum()))


def initial_state(cfg: ModelConfig, rng: np.random.Generator) -> ModelState:
    n = cfg.n
    if cfg.initial is Initial.EXPLICIT:
        return ModelState(np.array(cfg.explicit, dtype=np.int8))
    if cfg.initial is Initial.WORST_CASE:
        cells = np.zeros(n, dtype=np.int8)
        cells[rng.integers(n)] = ONE
        return ModelState(cells)
    while True:
        cells = rng.integers(0, 2, n, dtype=np.int8)
        if cells.any():
            return ModelState(cells)


def run_rng(seed: int, run: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, run]))


def trajectory(cfg: ModelConfig, run: int) -> list[ModelState]:
    """States ``S_0 .. S_k`` of one run; its RNG stream depends only on
    (seed, run), so extending ``k`` extends rather than resamples the run."""
    rng = run_rng(cfg.seed, run)
    states = [initial_state(cfg, rng)]
    for _ in range(cfg.k):
        states.append(model_round(states[-1], cfg, rng))
    return states


@dataclass(frozen=True)
class SweepRow:
    n: int
    f: int
    p_f: float
    k: int
    initial: str
    sampling: str
    crash_mode: str
    runs: int
    successes: int
    left_state_space: int = 0  # runs whose final state is outside the state space

    @property
    def rate(self) -> float:
        return self.successes / self.runs

    @property
    def ci95(self) -> float:
        p = self.rate
        return 1.96 * math.sqrt(p * (1 - p) / self.runs)

    def key(self) -> tuple:
        return (self.initial, self.f, self.p_f, self.k, self.sampling, self.crash_mode)


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    seed: int = 0

    def get(self, **match) -> SweepRow:
        hits = [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {match}")
        return hits[0]


def run_model_ks(cfg: ModelConfig, ks: Iterable[int]) -> list[SweepRow]:
    """Success counts at every requested ``k``, from one set of trajectories
    run to ``max(ks)`` rounds."""
    ks = sorted(set(ks))
    cfg = replace(cfg, k=ks[-1])
    wins = dict.fromkeys(ks, 0)
    outside = dict.fromkeys(ks, 0)
    for run in range(cfg.runs):
        states = trajectory(cfg, run)
        for k in ks:
            cells = states[k].cells
            if is_improved(cells):
                wins[k] += 1
            if not is_in_state_space(cells, cfg.f):
                outside[k] += 1
    return [
        SweepRow(
            cfg.n, cfg.f, cfg.p_f, k, cfg.initial.value, cfg.sampling.value,
            cfg.crash_mode.value, cfg.runs, wins[k], outside[k],
        )
        for k in ks
    ]


def run_model(cfg: ModelConfig) -> SweepRow:
    return run_model_ks(cfg, [cfg.k])[0]


def sweep(
    base: ModelConfig,
    *,
    fs: Sequence[int] | None = None,
    pfs: Sequence[float] | None = None,
    ks: Sequence[int] | None = None,
    initials: Sequence[Initial | str] | None = None,
    samplings: Sequence[Sampling | str] | None = None,
    crash_modes: Sequence[CrashMode | str] | None = None,
) -> SweepResult:
    """Grid over the given axes; ``k`` is swept with common random numbers."""
    fs = fs or [base.f]
    pfs = pfs or [base.p_f]
    ks = ks or [base.k]
    initials = initials or [base.initial]
    samplings = samplings or [base.sampling]
    crash_modes = crash_modes or [base.crash_mode]
    result = SweepResult(seed=base.seed)
    for init in initials:
        for samp in samplings:
            for mode in crash_modes:
                for f in fs:
                    for pf in pfs:
                        cfg = replace(
                            base, f=f, p_f=pf, k=max(ks), initial=Initial(init),
                            sampling=Sampling(samp), crash_mode=CrashMode(mode),
                        )
                        result.rows.extend(run_model_ks(cfg, ks))
    return result


# Success rates (percent) printed for n=1000, p_f=0.06, 1000 runs, keyed by
# (initial, f, k); the p_f in {0.5..0.8}, f=800 runs are all 0% at k=2 and
# 100% at k=3.
PUBLISHED_RATES: dict[tuple[str, int, int], float] = {
    ("random", 200, 2): 17.1,
    ("random", 200, 3): 90.3,
    ("random", 200, 4): 99.9,
    ("random", 800, 2): 16.8,
    ("random", 800, 3): 89.6,
    ("random", 800, 4): 99.3,
    ("worst", 200, 2): 0.0,
    ("worst", 200, 3): 41.3,
    ("worst", 200, 4): 97.6,
    ("worst", 200, 5): 100.0,
    ("worst", 800, 2): 0.0,
    ("worst", 800, 3): 5.4,
    ("worst", 800, 4): 84.0,
    ("worst", 800, 5): 98.9,
}
PUBLISHED_PF_SWEEP: dict[int, float] = {2: 0.0, 3: 100.0}


def published_rate(row: SweepRow) -> float | None:
    if row.n != 1000:
        return None
    if math.isclose(row.p_f, 0.06):
        return PUBLISHED_RATES.get((row.initial, row.f, row.k))
    if row.f == 800 and 0.5 - 1e-9 <= row.p_f <= 0.8 + 1e-9:
        return PUBLISHED_PF_SWEEP.get(row.k)
    return None


@dataclass(frozen=True)
class Discrepancy:
    row: SweepRow
    published: float

    @property
    def gap(self) -> float:
        return 100 * self.row.rate - self.published

    def __str__(self) -> str:
        r = self.row
        return (
            f"{r.initial} f={r.f} p_f={r.p_f:g} k={r.k} sampling={r.sampling} "
            f"crash={r.crash_mode}: measured {100 * r.rate:.1f}% vs published "
            f"{self.published:.1f}% ({self.gap:+.1f} pp)"
        )


def discrepancies(result: SweepResult, tolerance_pp: float = 5.0) -> list[Discrepancy]:
    out = []
    for row in result.rows:
        pub = published_rate(row)
        if pub is not None and abs(100 * row.rate - pub) > tolerance_pp:
            out.append(Discrepancy(row, pub))
    return out
