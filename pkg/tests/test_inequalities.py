import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sharpdavis.bellman import gamma_general
from sharpdavis.inequalities import (HILBERT, InequalityReport, a1_characteristic, check_cotype, check_davis,
                                     check_extrapolation, check_lp_unweighted, check_one_weight_a1,
                                     check_pathwise, check_s_w, check_sf_holder, check_sqrt3_refinement,
                                     davis_lhs, davis_rhs, davis_terms, maximal_function, square_function,
                                     stats_for)
from sharpdavis.norms import Kind, NormedSpaceModel
from sharpdavis.sharpness import CounterexampleConfig, build_sharpness_example
from sharpdavis.spaces import (AdaptedProcess, build_tree, doob_process, random_martingale, random_space,
                               random_terminal_weight, random_weights)
from sharpdavis.suite import centered


def constant(sp, value):
    return AdaptedProcess(tuple(np.full(k, value) for k in sp.n_atoms))


def coin():
    sp = build_tree([2])
    return sp, AdaptedProcess((np.array([0.0]), np.array([1.0, -1.0])))


def test_report_margin():
    r = InequalityReport("x", 1.0, 2.0)
    assert r.margin == 1.0 and r.passed
    assert not InequalityReport("x", 2.0, 1.0).passed
    assert InequalityReport("x", 1e10 + 1, 1e10).passed  # within 1e-9 of scale
    assert set(r.to_dict()) == {"name", "lhs", "rhs", "margin", "pass", "seed", "witness"}


def test_square_function():
    sp, f = coin()
    s, es = square_function(stats_for(sp, f, None))
    assert np.all(s == 1.0) and es == 1.0
    sp = build_tree([2, 2])
    s, es = square_function(stats_for(sp, constant(sp, 2.0), None))
    assert np.all(s == 0) and es == 0


def test_square_function_sharpness_bruteforce():
    sp, f, w = build_sharpness_example(CounterexampleConfig(1, 2))
    s, _ = square_function(stats_for(sp, f, w))
    pts = f.on_points(sp)
    assert np.allclose(s, np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=0)), rtol=1e-15)


def test_davis_sides_sharpness():
    for k, N in ((1, 1), (2, 3), (10, 50)):
        sp, f, w = build_sharpness_example(CounterexampleConfig(k, N))
        stt = stats_for(sp, f, w)
        lhs = davis_lhs(stt, HILBERT, 4.0)
        assert lhs.sum_part == pytest.approx(4 * N, rel=1e-12)
        assert lhs.gamma_part == pytest.approx(4.0, rel=1e-15)
        assert davis_rhs(stt, 4.0) == pytest.approx(4 * (N * (k + 2) / (k + 1) + 1), rel=1e-12)
        rep = check_davis(sp, f, w, HILBERT, 4.0)
        assert rep.passed
        assert rep.margin == pytest.approx(4 * (N * (k + 2) / (k + 1) + 1) - 4 - 4 * N, rel=1e-9)


def test_davis_constant_martingale():
    sp = build_tree([2, 3])
    stt = stats_for(sp, constant(sp, -1.5), None)
    assert davis_lhs(stt, HILBERT, 4.0).total == pytest.approx(6.0)
    stt = stats_for(sp, constant(sp, 2.0), constant(sp, 3.0))
    assert davis_rhs(stt, 4.0) == pytest.approx(4 * 2 * 3)


def test_davis_single_point():
    sp = build_tree([1])
    rep = check_davis(sp, constant(sp, 2.0), constant(sp, 0.5), HILBERT, 4.0)
    assert rep.lhs == rep.rhs == 4.0 and rep.margin == 0.0


def test_davis_lhs_bruteforce():
    sp = random_space(8)
    f = random_martingale(sp, 3, 8)
    w = random_weights(sp, 8)
    stt = stats_for(sp, f, w)
    pf, pw = f.on_points(sp), w.on_points(sp)
    total = 0.0
    for i in range(sp.n_points):
        acc = 4 * np.linalg.norm(pf[0, i]) * pw[0, i]
        fs = np.linalg.norm(pf[0, i])
        for n in range(1, sp.horizon + 1):
            fs = max(fs, np.linalg.norm(pf[n, i]))
            acc += np.sum((pf[n, i] - pf[n - 1, i]) ** 2) / fs * pw[n, i]
        total += sp.masses[i] * acc
    assert davis_lhs(stt, HILBERT, 4.0).total == pytest.approx(total, rel=1e-12)
    rhs = sum(sp.masses[i] * max(np.linalg.norm(pf[:, i], axis=1)) * max(pw[:, i]) for i in range(sp.n_points))
    assert davis_rhs(stt, 1.0) == pytest.approx(rhs, rel=1e-12)


def test_davis_rejects_bad_weights():
    sp = build_tree([2])
    f = AdaptedProcess((np.array([0.0]), np.array([1.0, -1.0])))
    with pytest.raises(ValueError):
        davis_lhs(stats_for(sp, f, AdaptedProcess((np.array([-1.0]), np.array([1.0, 1.0])))), HILBERT, 4)


def test_pathwise_constant():
    sp = build_tree([2, 2])
    rep = check_pathwise(sp, constant(sp, 1.0), None, HILBERT, 3.0)
    assert rep.passed and rep.min_relative_margin == 0.0


def test_sqrt3_refinement_coin():
    sp, f = coin()
    assert check_sqrt3_refinement(sp, f).passed
    with pytest.raises(ValueError):
        check_sqrt3_refinement(sp, constant(sp, 1.0))


def test_a1_characteristic():
    sp = build_tree([2, 2])
    assert a1_characteristic(sp, np.ones(4)) == 1.0
    sp = build_tree([2])
    w = np.array([2.0, 2 / 3])  # mean 4/3
    assert a1_characteristic(sp, w) == pytest.approx(max(max(4 / 3, 2) / 2, max(4 / 3, 2 / 3) / (2 / 3)))
    wd = doob_process(sp, w).on_points(sp)
    brute = max(max(wd[:n + 1, i].max() / wd[n, i] for n in range(2)) for i in range(2))
    assert a1_characteristic(sp, w, uniform_in_time=True) == pytest.approx(brute)


def test_a1_sharpness_weight_diverges():
    sp, f, w = build_sharpness_example(CounterexampleConfig(2, 3))
    assert a1_characteristic(sp, w.on_points(sp)[-1]) == np.inf


def test_maximal_function():
    sp = build_tree([2, 2])
    h = np.array([4.0, 0.0, -2.0, -2.0])
    assert np.allclose(maximal_function(sp, h), [4.0, 2.0, 2.0, 2.0])


def test_chains_zero():
    sp = build_tree([2, 2])
    zero = constant(sp, 0.0)
    reps = check_extrapolation(sp, zero, np.ones(4)) + check_lp_unweighted(sp, zero, 2.0)
    assert all(r.passed and r.lhs == 0 for r in reps)


def test_s_w_r2_direct():
    sp = build_tree([2, 2, 2])
    f = random_martingale(sp, 1, 4, start_at_zero=True)
    w = random_terminal_weight(sp, 4)
    reps = {r.name: r for r in check_s_w(sp, f, w, 2.0)}
    stt = stats_for(sp, f, doob_process(sp, w))
    s, _ = square_function(stt)
    assert reps["s_w[r=2].chain"].lhs == pytest.approx(stt.expect(s ** 2 * w))
    assert reps["s_w[r=2].chain"].rhs == pytest.approx(4 * stt.expect(stt.fstar[-1] ** 2 * stt.wstar[-1]))


def test_sqrt3_unweighted_crosscheck():
    sp = random_space(12)
    f = random_martingale(sp, 1, 12, start_at_zero=True)
    reps = {r.name: r for r in check_sf_holder(sp, f)}
    stt = stats_for(sp, f, None)
    assert reps["sf_holder.sqrt3"].rhs == pytest.approx(np.sqrt(3) * stt.expect(stt.fstar[-1]))
    assert all(r.passed for r in reps.values())


def test_lp_p2_orthogonality():
    sp = random_space(21)
    f = random_martingale(sp, 2, 21, start_at_zero=True)
    reps = {r.name: r for r in check_lp_unweighted(sp, f, 2.0)}
    stt = stats_for(sp, f, None)
    assert reps["lp[p=2].final"].lhs == pytest.approx(np.sqrt(stt.expect(stt.fnorm[-1] ** 2)), rel=1e-12)
    assert all(r.passed for r in reps.values())


def test_lp_sharpness_scalarized():
    sp, f, w = build_sharpness_example(CounterexampleConfig(2, 3))
    assert all(r.passed for r in check_lp_unweighted(sp, centered(sp, f), 2.0))


def test_chains_need_zero_start():
    sp = build_tree([2])
    f = AdaptedProcess((np.array([1.0]), np.array([2.0, 0.0])))
    with pytest.raises(ValueError):
        check_sf_holder(sp, f)


def test_cotype():
    sp = build_tree([3])
    reps = check_cotype(sp, constant(sp, 2.0), HILBERT, 4.0)
    assert all(r.passed for r in reps)
    sp = random_space(3)
    assert all(r.passed for r in check_cotype(sp, random_martingale(sp, 2, 3), HILBERT, 4.0))
    m = NormedSpaceModel(Kind.LQ, 4, 3, 0.333)
    assert all(r.passed for r in check_cotype(sp, random_martingale(sp, 3, 3), m, gamma_general(4, 0.333)))


def test_one_weight_a1_witness():
    sp = random_space(2)
    f = random_martingale(sp, 1, 2, start_at_zero=True)
    r = check_one_weight_a1(sp, f, random_terminal_weight(sp, 2))
    assert r.passed and r.witness["a1"] >= 1


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), d=st.integers(1, 4))
def test_davis_random(seed, d):
    sp = random_space(seed)
    f = random_martingale(sp, d, seed, start_at_zero=seed % 2 == 0)
    w = random_weights(sp, seed)
    assert check_davis(sp, f, w, HILBERT, 4.0).passed
    assert check_davis(sp, f, None, HILBERT, 3.0).passed
    assert check_pathwise(sp, f, w, HILBERT, 4.0).passed
    assert check_pathwise(sp, f, None, HILBERT, 3.0).passed


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_chains_random(seed):
    sp = random_space(seed)
    f = random_martingale(sp, 2, seed, start_at_zero=True)
    reps = check_extrapolation(sp, f, random_terminal_weight(sp, seed), seed=seed)
    reps += check_lp_unweighted(sp, f, 3.0)
    assert all(r.passed for r in reps), [r.to_dict() for r in reps if not r.passed]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), scale=st.floats(1e-3, 1e3))
def test_davis_homogeneous(seed, scale):
    sp = random_space(seed)
    f = random_martingale(sp, 2, seed)
    w = random_weights(sp, seed)
    a = check_davis(sp, f, w, HILBERT, 4.0)
    b = check_davis(sp, f.scaled(scale), w, HILBERT, 4.0)
    assert b.lhs == pytest.approx(scale * a.lhs, rel=1e-10)
    assert b.rhs == pytest.approx(scale * a.rhs, rel=1e-10)


def test_davis_terms_zero_fstar():
    sp = build_tree([2, 2])
    f = AdaptedProcess((np.array([0.0]), np.array([0.0, 0.0]), np.array([1.0, -1.0, 2.0, -2.0])))
    t = davis_terms(stats_for(sp, f, None), 2)
    assert np.all(t[:2] == 0)
    assert np.allclose(t[2], [1.0, 1.0, 2.0, 2.0])
