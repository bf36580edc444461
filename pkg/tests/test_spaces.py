import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sharpdavis.spaces import (AdaptedProcess, FilteredSpace, SpaceError, build_tree, comb_space,
                               conditional_expectation, doob_process, dumps_space, loads_space,
                               path_statistics, random_martingale, random_space, random_weights,
                               validate_martingale)
from sharpdavis.sharpness import CounterexampleConfig, build_sharpness_example


def absnorm(a):
    return np.linalg.norm(a, axis=-1)


def test_dyadic_tree():
    sp = build_tree([2, 2])
    assert sp.n_points == 4
    assert np.allclose(sp.masses, 0.25)
    assert sp.atoms.tolist() == [[0, 0, 0, 0], [0, 0, 1, 1], [0, 1, 2, 3]]


def test_degenerate_tree():
    sp = build_tree([1])
    assert sp.n_points == 1 and sp.masses[0] == 1.0


def test_space_validation():
    with pytest.raises(SpaceError):
        FilteredSpace([0.5, 0.6], [[0, 0], [0, 1]])
    with pytest.raises(SpaceError):
        FilteredSpace([0.5, 0.5], [[0, 1], [0, 0]])  # coarsening, not refining
    with pytest.raises(SpaceError):
        FilteredSpace([0.5, 0.5], [[0, 0], [0, 2]])
    with pytest.raises(SpaceError):
        FilteredSpace([1.0, 0.0], [[0, 0], [0, 1]])


def test_comb_space_masses():
    k, N = 3.0, 4
    sp, f, w = build_sharpness_example(CounterexampleConfig(k, N))
    expected = [k * (k + 1) ** -om for om in range(1, N + 1)] + [(k + 1) ** -N]
    assert np.allclose(sp.masses, expected, rtol=1e-15)
    assert sp.horizon == N
    # time n reveals the singletons {1}, .., {n}
    assert list(sp.n_atoms) == [n + 1 for n in range(N + 1)]


def test_constant_terminal():
    sp = build_tree([3, 2])
    for n in range(3):
        assert np.allclose(conditional_expectation(sp, np.full(6, 2.5), n), 2.5)


def test_sharpness_weight_is_doob():
    k, N = 2.0, 3
    sp, f, w = build_sharpness_example(CounterexampleConfig(k, N))
    wd = doob_process(sp, w.on_points(sp)[-1])
    for n in range(N + 1):
        expected = np.append(np.zeros(n), (k + 1) ** n)
        assert np.allclose(wd.values[n], expected, rtol=1e-14)


def test_conditional_expectation_bruteforce():
    sp = build_tree([2, 2, 2], masses=np.random.default_rng(1).dirichlet(np.ones(8)))
    x = np.random.default_rng(2).normal(size=8)
    for n in range(4):
        ce = conditional_expectation(sp, x, n)
        for a in range(sp.n_atoms[n]):
            desc = sp.atoms[n] == a
            assert ce[a] == pytest.approx(np.sum(sp.masses[desc] * x[desc]) / sp.masses[desc].sum(), rel=1e-13)


def test_validate_sharpness_processes():
    sp, f, w = build_sharpness_example(CounterexampleConfig(2, 3))
    assert validate_martingale(sp, f).passed
    assert validate_martingale(sp, w).passed
    const = AdaptedProcess(tuple(np.full(k, 1.5) for k in sp.n_atoms))
    assert validate_martingale(sp, const).passed


def test_perturbation_detected_at_atom_one():
    N = 3
    sp, f, w = build_sharpness_example(CounterexampleConfig(2, N))
    vals = [v.copy() for v in f.values]
    vals[N][0] += 1e-3
    rep = validate_martingale(sp, AdaptedProcess(tuple(vals)))
    assert not rep.passed
    assert (rep.worst_time, rep.worst_atom) == (N - 1, 0)


def test_path_statistics_sharpness_maxima():
    k, N = 2.0, 4
    sp, f, w = build_sharpness_example(CounterexampleConfig(k, N))
    st = path_statistics(sp, f, w, absnorm)
    for n in range(N + 1):
        for i in range(N + 1):
            om = i + 1  # point i is omega = i + 1; the last point is the tail
            revealed = i < N and om <= n
            assert st.fstar[n, i] == pytest.approx((k + 2) / k if revealed else 1.0, rel=1e-15)
            wexp = (k + 1) ** (min(n, om - 1) if i < N else n)
            assert st.wstar[n, i] == pytest.approx(wexp, rel=1e-15)


def test_path_statistics_constant():
    sp = build_tree([2, 3])
    f = AdaptedProcess(tuple(np.full((k, 2), [3.0, 4.0]) for k in sp.n_atoms))
    st = path_statistics(sp, f, None, absnorm)
    assert np.all(st.df == 0)
    assert np.allclose(st.fstar, 5.0)


def test_path_statistics_prefix_max():
    sp = random_space(5)
    f = random_martingale(sp, 2, 5)
    st = path_statistics(sp, f, None, absnorm)
    pts = f.on_points(sp)
    for i in range(sp.n_points):
        for n in range(sp.horizon + 1):
            assert st.fstar[n, i] == absnorm(pts[:n + 1, i]).max()


def test_random_reproducible():
    sp = random_space(11)
    a = random_martingale(sp, 3, 11)
    b = random_martingale(random_space(11), 3, 11)
    for u, v in zip(a.values, b.values):
        assert np.array_equal(u, v)


def test_random_weights_positive_adapted():
    sp = build_tree([2, 2, 2])
    w = random_weights(sp, 4)
    w.check_fits(sp)
    assert all(np.all(v > 0) for v in w.values)


def test_from_points_rejects_non_adapted():
    sp = build_tree([2])
    with pytest.raises(SpaceError):
        AdaptedProcess.from_points(sp, np.array([[0.0, 1.0], [1.0, 2.0]]))


def test_json_roundtrip():
    sp = random_space(3)
    f = random_martingale(sp, 2, 3)
    sp2, procs = loads_space(dumps_space(sp, {"f": f}))
    assert np.array_equal(sp2.masses, sp.masses)
    assert np.array_equal(sp2.atoms, sp.atoms)
    for u, v in zip(procs["f"].values, f.values):
        assert np.array_equal(u, v)
    doc = json.loads(dumps_space(sp))
    assert set(doc) == {"horizon", "points", "processes"}


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), d=st.integers(1, 4))
def test_random_martingales_validate(seed, d):
    sp = random_space(seed)
    assert validate_martingale(sp, random_martingale(sp, d, seed)).passed


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_tower_property(seed):
    sp = random_space(seed)
    x = np.random.default_rng(seed).normal(size=sp.n_points)
    for n, m in itertools.combinations(range(sp.horizon + 1), 2):
        inner = conditional_expectation(sp, x, m)[sp.atoms[m]]
        lhs = conditional_expectation(sp, inner, n)
        rhs = conditional_expectation(sp, x, n)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.abs(x).max())
