import collections

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lattice_agreement.approx import (
    BOT,
    ONE,
    ZERO,
    CrashMode,
    Initial,
    ModelConfig,
    ModelState,
    Sampling,
    SweepRow,
    discrepancies,
    initial_state,
    is_improved,
    is_in_state_space,
    is_reachable,
    model_round,
    parse_state,
    published_rate,
    run_model,
    run_model_ks,
    run_rng,
    sweep,
    trajectory,
)

import oracles
from oracles import cells


def cfg(n, f, p_f=0.0, k=1, **kw):
    return ModelConfig(n, f, p_f, k, **kw)


class TestPredicates:
    def test_state_space(self):
        assert is_in_state_space(cells("01_"), 1)
        assert not is_in_state_space(cells("00_"), 1)
        assert not is_in_state_space(cells("1__"), 1)

    def test_reachable(self):
        assert is_reachable(cells("01_"), cells("11_"))
        assert is_reachable(cells("010"), cells("_10"))
        assert not is_reachable(cells("01_"), cells("010"))
        assert not is_reachable(cells("010"), cells("000"))

    def test_improved(self):
        assert is_improved(cells("11_"))
        assert is_improved(cells("00_"))
        assert not is_improved(cells("01_"))

    def test_parse(self):
        assert parse_state("1,0,_") == (ONE, ZERO, BOT)
        assert parse_state("10b") == (ONE, ZERO, BOT)
        with pytest.raises(ValueError):
            parse_state("102")

    def test_state_str(self):
        assert str(ModelState(cells("0_1"))) == "<0,_,1>"


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(n=3, f=3, p_f=0.1, k=1),
        dict(n=3, f=1, p_f=1.5, k=1),
        dict(n=3, f=1, p_f=0.1, k=0),
        dict(n=3, f=1, p_f=0.1, k=1, initial="explicit"),
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ModelConfig(**kw)


class TestRound:
    def test_no_crash_without_replacement_flips_all(self):
        # n - f = 4 draws out of 5 cells cannot avoid both ones
        c = cfg(5, 1)
        S = ModelState(cells("00011"))
        out = model_round(S, c, np.random.default_rng(0))
        assert out.count(ONE) == 5 and out.crashed == 0

    def test_all_ones_absorbing(self):
        S = ModelState(cells("111"))
        out = model_round(S, cfg(3, 1, p_f=0.5), np.random.default_rng(1))
        assert out.count(ZERO) == 0

    def test_n2_worst_case_forced(self):
        for seed in range(20):
            row = run_model(cfg(2, 0, k=1, initial="worst", runs=5, seed=seed))
            assert row.rate == 1.0

    def test_crash_budget(self):
        c = cfg(10, 3, p_f=1.0, crash_mode="persistent")
        out = model_round(ModelState(cells("0100000000")), c, np.random.default_rng(0))
        assert out.crashed == 3 and out.count(BOT) == 3
        out2 = model_round(out, c, np.random.default_rng(1))
        assert out2.crashed == 3 and out2.count(BOT) == 3

    def test_transient_crash_keeps_cell(self):
        c = cfg(4, 2, p_f=1.0)
        out = model_round(ModelState(cells("0001")), c, np.random.default_rng(0))
        # cells 0 and 1 crash and keep their value; cells 2 and 3 run normally
        assert out.crashed == 2
        assert list(out.cells[:2]) == [ZERO, ZERO]

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            model_round(ModelState(cells("01")), cfg(3, 1), np.random.default_rng(0))


class TestExactLaw:
    @pytest.mark.parametrize("sampling", list(Sampling))
    def test_two_thirds(self, sampling):
        S = ModelState(cells("001"))
        c = cfg(3, 1, sampling=sampling)
        p = oracles.exact_flip_probability(S.cells, 1, 0)
        if sampling is Sampling.WITH_REPLACEMENT:
            p = 1 - (2 / 3) ** 2
        else:
            assert p == pytest.approx(2 / 3)
        rng = np.random.default_rng(123)
        runs = 10000
        flips = np.zeros(2)
        joint = 0
        for _ in range(runs):
            out = model_round(S, c, rng).cells
            flips += out[:2] == ONE
            joint += bool(out[0] == ONE and out[1] == ONE)
        sigma = np.sqrt(p * (1 - p) / runs)
        assert np.all(np.abs(flips / runs - p) < 3 * sigma)
        # independence of the two zeros
        assert abs(joint / runs - p * p) < 3 * np.sqrt(p * p * (1 - p * p) / runs)


def _dist(sample, runs):
    counts = collections.Counter(sample(i) for i in range(runs))
    return counts


@pytest.mark.parametrize("mode,start", [
    (CrashMode.TRANSIENT, "0100100"),
    (CrashMode.PERSISTENT, "01_0010"),
])
@pytest.mark.parametrize("sampling", list(Sampling))
def test_matches_literal_algorithm(mode, start, sampling):
    scipy_stats = pytest.importorskip("scipy.stats")
    n, f, p_f, x0 = 7, 3, 0.25, start.count("_")
    c = cfg(n, f, p_f, sampling=sampling, crash_mode=mode)
    S = ModelState(cells(start), x0)
    rng_a, rng_b = np.random.default_rng(1), np.random.default_rng(2)
    runs = 6000

    def vec(_):
        out = model_round(S, c, rng_a)
        return str(out), out.crashed

    def lit(_):
        A, x = oracles.literal_round(S.cells, x0, n, f, p_f, rng_b, sampling, mode)
        return str(ModelState(A)), x

    a, b = _dist(vec, runs), _dist(lit, runs)
    keys = sorted(set(a) | set(b))
    table = np.array([[a[k] for k in keys], [b[k] for k in keys]])
    table = table[:, table.sum(axis=0) >= 10]
    _, p, _, _ = scipy_stats.chi2_contingency(table)
    assert p > 0.001


class TestInitial:
    def test_worst_case(self):
        c = cfg(50, 10, initial="worst")
        S = initial_state(c, run_rng(0, 0))
        assert S.count(ONE) == 1 and S.count(ZERO) == 49

    def test_random_has_a_one(self):
        c = cfg(2, 0)
        for run in range(50):
            assert initial_state(c, run_rng(0, run)).count(ONE) >= 1

    def test_explicit(self):
        c = cfg(3, 1, initial="explicit", explicit=(0, 0, 1))
        assert list(initial_state(c, run_rng(0, 0)).cells) == [0, 0, 1]


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 40),
    fr=st.floats(0, 0.9),
    p_f=st.floats(0, 1),
    seed=st.integers(0, 1000),
    mode=st.sampled_from(list(CrashMode)),
    sampling=st.sampled_from(list(Sampling)),
    initial=st.sampled_from(["random", "worst"]),
)
def test_trajectory_invariants(n, fr, p_f, seed, mode, sampling, initial):
    f = min(int(fr * n), n - 1)
    c = cfg(n, f, p_f, k=6, seed=seed, crash_mode=mode, sampling=sampling, initial=initial)
    states = trajectory(c, 0)
    improved_at = None
    for t, (a, b) in enumerate(zip(states, states[1:])):
        assert is_reachable(a.cells, b.cells)
        assert b.crashed <= f and b.count(BOT) <= f
        assert b.crashed >= a.crashed
        if is_improved(a.cells) and improved_at is None:
            improved_at = t
    if improved_at is not None:
        first = states[improved_at].cells
        for s in states[improved_at:]:
            assert is_improved(s.cells)
            if not np.any(first == ZERO):
                assert s.count(ZERO) == 0
            if not np.any(first == ONE):
                assert s.count(ONE) == 0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), f=st.sampled_from([5, 20, 40]), initial=st.sampled_from(["random", "worst"]))
def test_success_monotone_in_k(seed, f, initial):
    rows = run_model_ks(cfg(50, f, 0.1, runs=40, seed=seed, initial=initial), [1, 2, 3, 4, 5])
    succ = [r.successes for r in rows]
    assert succ == sorted(succ)


def test_common_random_numbers_extend():
    base = cfg(30, 5, 0.1, k=5, runs=1, seed=3)
    long = trajectory(base, 0)
    from dataclasses import replace
    short = trajectory(replace(base, k=2), 0)
    assert all(str(a) == str(b) for a, b in zip(short, long))


def test_single_grid_point_equals_run_model():
    base = cfg(100, 20, 0.06, k=3, runs=50, seed=4, initial="worst")
    assert sweep(base).rows == [run_model(base)]


def test_persistent_can_leave_state_space():
    c = cfg(10, 9, p_f=1.0, k=1, runs=20, initial="worst", crash_mode="persistent")
    row = run_model(c)
    assert row.left_state_space > 0


def test_sweep_get_and_published():
    base = cfg(1000, 200, 0.06, k=2, runs=5)
    res = sweep(base, fs=[200], ks=[2, 3], initials=["worst"])
    row = res.get(k=3)
    assert published_rate(row) == 41.3
    assert published_rate(SweepRow(10, 2, 0.06, 2, "worst", "without", "transient", 5, 0)) is None
    assert all(d.published in (0.0, 41.3) for d in discrepancies(res))
    with pytest.raises(KeyError):
        res.get(f=999)


def test_ci95_zero_at_extremes():
    row = SweepRow(10, 2, 0.1, 2, "random", "without", "transient", 100, 100)
    assert row.rate == 1.0 and row.ci95 == 0.0


def test_initial_enum_values():
    assert Initial("random") is Initial.RANDOM_UNIFORM_01
    assert Initial("worst") is Initial.WORST_CASE
