"""Both sides of the weighted Davis inequalities and their consequences on a
concrete finite instance, reported as signed margins."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .norms import Kind, NormedSpaceModel, norm, phi, phi_prime
from .spaces import (AdaptedProcess, FilteredSpace, PathStatistics, conditional_expectation,
                     doob_process, path_statistics)

FAIL_TOL = 1e-9
HILBERT = NormedSpaceModel(Kind.HILBERT, 2, 1)

# The weighted L^p bound with general weights needs the exact norm of the
# maximal operator on L^{p'}(w~); a sampled lower bound would make it unsound.
S_LP_W_STATUS = "not-checkable"


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    witness: dict | None = None
    seed: int | None = None
    margin: float = field(init=False)
    scale: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        self.margin = self.rhs - self.lhs
        self.scale = max(abs(self.lhs), abs(self.rhs), 1.0)
        self.passed = bool(self.margin >= -FAIL_TOL * self.scale)

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin,
                "pass": self.passed, "seed": self.seed, "witness": self.witness}


def _equality(name: str, a: float, b: float, **kw) -> InequalityReport:
    # an identity a = b is reported as the one-sided check |a - b| <= 0 at scale max(|a|, |b|)
    rep = InequalityReport(name, abs(a - b), 0.0, **kw)
    rep.scale = max(abs(a), abs(b), 1.0)
    rep.passed = bool(rep.margin >= -FAIL_TOL * rep.scale)
    return rep


@dataclass(frozen=True)
class ExtrapolationParams:
    r: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if not 1 <= self.r <= 2:
            raise ValueError(f"r must lie in [1, 2], got {self.r}")
        if not 1 < self.p < np.inf:
            raise ValueError(f"p must lie in (1, inf), got {self.p}")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1)


def stats_for(space: FilteredSpace, f: AdaptedProcess, w: AdaptedProcess | None,
              model: NormedSpaceModel = HILBERT) -> PathStatistics:
    return path_statistics(space, f, w, lambda a: norm(model, a))


def _safe_div(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def square_function(stats: PathStatistics) -> tuple[np.ndarray, float]:
    """Per-point S_N f = (sum_n |df_n|^2)^(1/2) and its expectation."""
    s = np.sqrt(np.sum(stats.dfnorm[1:] ** 2, axis=0))
    return s, stats.expect(s)


def davis_terms(stats: PathStatistics, q: float) -> np.ndarray:
    """|df_n|^q / (f*_n)^(q-1) * w_n per (n, point); zero where f*_n = 0 and for n = 0."""
    t = _safe_div(stats.dfnorm ** q * stats.w, stats.fstar ** (q - 1))
    t[0] = 0.0
    return t


@dataclass(frozen=True)
class DavisLHS:
    gamma_part: float
    sum_part: float
    total: float


def davis_lhs(stats: PathStatistics, model: NormedSpaceModel, gamma: float) -> DavisLHS:
    """E(gamma |f_0| w_0 + dt sum_n |df_n|^q / (f*_n)^(q-1) w_n), split into parts.

    ``sum_part`` is the expectation of the raw sum (without dt).
    """
    if np.any(~np.isfinite(stats.f)) or np.any(~np.isfinite(stats.w)):
        raise ValueError("non-finite inputs")
    if np.any(stats.w < 0):
        raise ValueError("weights must be nonnegative")
    g_part = gamma * stats.expect(stats.fnorm[0] * stats.w[0])
    s_part = stats.expect(davis_terms(stats, model.q).sum(axis=0))
    return DavisLHS(g_part, s_part, g_part + model.delta_tilde * s_part)


def davis_rhs(stats: PathStatistics, gamma: float) -> float:
    """gamma E(f*_N w*_N)."""
    return gamma * stats.expect(stats.fstar[-1] * stats.wstar[-1])


def check_davis(space: FilteredSpace, f: AdaptedProcess, w: AdaptedProcess | None,
                model: NormedSpaceModel, gamma: float, name: str = "davis",
                seed: int | None = None) -> InequalityReport:
    """E(gamma|f_0|w_0 + dt sum |df_n|^q w_n / (f*_n)^(q-1)) <= gamma E(f*_N w*_N).

    ``w=None`` means w = 1.  With q = 2, dt = 1 this is the Hilbert estimate
    with constant 1/gamma (gamma = 4 weighted, gamma = 3 unweighted).
    """
    st = stats_for(space, f, w, model)
    lhs = davis_lhs(st, model, gamma)
    return InequalityReport(name, lhs.total, davis_rhs(st, gamma), seed=seed,
                            witness={"gammaPart": lhs.gamma_part, "sumPart": lhs.sum_part})


@dataclass
class PathwiseReport:
    passed: bool
    min_relative_margin: float
    worst_point: int
    conditional_min: float
    refinement: InequalityReport | None = None

    def reports(self, prefix: str = "pathwise", seed=None) -> list[InequalityReport]:
        out = [_relative_report(f"{prefix}.points", self.min_relative_margin, seed,
                                {"worstPoint": self.worst_point})]
        out.append(_relative_report(f"{prefix}.conditional", self.conditional_min, seed, None))
        if self.refinement is not None:
            out.append(self.refinement)
        return out


def _relative_report(name, rel_margin, seed, witness) -> InequalityReport:
    # a relative margin m is reported as lhs = -m, rhs = 0 on unit scale
    return InequalityReport(name, -rel_margin, 0.0, seed=seed, witness=witness)


def pathwise_sides(stats: PathStatistics, model: NormedSpaceModel, gamma: float):
    """Per-point sides of the pathwise inequality

    gamma|f_0|w_0 + dt sum_{n=1..N} |df_n|^q w_n/(f*_n)^(q-1)
        <= gamma f*_N w*_N - sum_{n=0..N-1} phi'(f_n) df_(n+1) w*_n / (f*_n)^(q-1)

    returned as (lhs, rhs, lin) where lin holds the phi' terms per (n, point).
    """
    q = model.q
    lhs = gamma * stats.fnorm[0] * stats.w[0] + model.delta_tilde * davis_terms(stats, q).sum(axis=0)
    lin = _safe_div(phi_prime(model, stats.f[:-1], stats.df[1:]) * stats.wstar[:-1],
                    stats.fstar[:-1] ** (q - 1))
    rhs = gamma * stats.fstar[-1] * stats.wstar[-1] - lin.sum(axis=0)
    return lhs, rhs, lin


def check_sqrt3_refinement(space: FilteredSpace, f: AdaptedProcess, seed=None) -> InequalityReport:
    """Pathwise S_N f <= sqrt3 f*_N - sum_n <f_n, df_(n+1)> / (sqrt3 f*_n) for f_0 = 0, Hilbert values."""
    st = stats_for(space, f, None, HILBERT)
    if np.any(st.fnorm[0] > 0):
        raise ValueError("the refinement needs f_0 = 0")
    s, _ = square_function(st)
    inner = np.sum(st.f[:-1] * st.df[1:], axis=-1)
    corr = _safe_div(inner, np.sqrt(3.0) * st.fstar[:-1]).sum(axis=0)
    rhs = np.sqrt(3.0) * st.fstar[-1] - corr
    scale = np.maximum.reduce([s, np.abs(rhs), np.sqrt(3.0) * st.fstar[-1], np.abs(corr)])
    rel = _safe_div(rhs - s, scale)
    rel = np.where(scale > 0, rel, 0.0)
    i = int(np.argmin(rel))
    return _relative_report("pathwise.sqrt3", float(rel[i]), seed, {"worstPoint": i})


def check_pathwise(space: FilteredSpace, f: AdaptedProcess, w: AdaptedProcess | None,
                   model: NormedSpaceModel, gamma: float, seed=None) -> PathwiseReport:
    """The pathwise form of the Davis inequality on every sample point.

    Also checks E(phi'(f_n) df_(n+1) | F_n) >= 0 on every atom, and, for
    Hilbert q = 2 with w = 1 and f_0 = 0, the square-root refinement.
    Margins are relative to the sum of magnitudes of the terms on each path.
    """
    st = stats_for(space, f, w, model)
    lhs, rhs, lin = pathwise_sides(st, model, gamma)
    scale = np.abs(lhs) + gamma * st.fstar[-1] * st.wstar[-1] + np.abs(lin).sum(axis=0)
    rel = np.where(scale > 0, _safe_div(rhs - lhs, scale), 0.0)
    i = int(np.argmin(rel))
    cond = np.inf
    for n in range(st.horizon):
        pos = phi_prime(model, st.f[n], st.df[n + 1])
        m = space.atom_average(pos, n)
        s = space.atom_average(np.abs(pos), n)
        cond = min(cond, float(np.min(m / np.maximum(s, 1.0))))
    if st.horizon == 0:
        cond = 0.0
    refinement = None
    if (w is None and model.kind is Kind.HILBERT and model.q == 2
            and model.delta_tilde == 1 and not np.any(st.fnorm[0] > 0)):
        refinement = check_sqrt3_refinement(space, f, seed)
    passed = rel[i] >= -FAIL_TOL and cond >= -FAIL_TOL and (refinement is None or refinement.passed)
    return PathwiseReport(bool(passed), float(rel[i]), i, cond, refinement)


def a1_characteristic(space: FilteredSpace, w_terminal, uniform_in_time: bool = False) -> float:
    """Smallest C with w* <= C w for the Doob sequence w_n = E(w | F_n).

    By default w is the terminal weight and w* = max_n w_n.  With
    ``uniform_in_time`` the larger quantity max_n w*_n / w_n is returned.
    """
    w_terminal = np.asarray(w_terminal, dtype=float)
    if np.any(w_terminal < 0) or not np.any(w_terminal > 0):
        raise ValueError("A1 characteristic needs a nonnegative, nonzero weight")
    wp = doob_process(space, w_terminal).on_points(space)
    wstar = np.maximum.accumulate(wp, axis=0)
    # a weight vanishing where its running maximum does not has infinite characteristic
    if uniform_in_time:
        return float(np.max(_ratio_inf(wstar, wp)))
    return float(np.max(_ratio_inf(wstar[-1], w_terminal)))


def _ratio_inf(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)


def _require_zero_start(st: PathStatistics):
    if np.any(st.fnorm[0] > 1e-12 * max(1.0, float(st.fstar[-1].max()))):
        raise ValueError("these chains assume f_0 = 0")


def check_sf_holder(space: FilteredSpace, f: AdaptedProcess, seed=None) -> list[InequalityReport]:
    """E Sf <= E((f*)^(1/2) (sum |df_n|^2/f*_n)^(1/2)) <= (E f*)^(1/2) (E sum |df_n|^2/f*_n)^(1/2),
    and the combination with the unweighted Hilbert estimate, E Sf <= sqrt3 E f*."""
    st = stats_for(space, f, None)
    _require_zero_start(st)
    s, es = square_function(st)
    ssum = davis_terms(st, 2).sum(axis=0)
    mid = st.expect(np.sqrt(st.fstar[-1] * ssum))
    efs = st.expect(st.fstar[-1])
    right = np.sqrt(efs * st.expect(ssum))
    return [
        InequalityReport("sf_holder.step1", es, mid, seed=seed),
        InequalityReport("sf_holder.step2", mid, right, seed=seed),
        InequalityReport("sf_holder.sqrt3", es, np.sqrt(3.0) * efs, seed=seed),
    ]


def check_s_w(space: FilteredSpace, f: AdaptedProcess, w_terminal, r: float,
              seed=None) -> list[InequalityReport]:
    """The four-step chain bounding E((Sf)^r w) by
    2^r (E (f*)^r w)^(1-r/2) (E (f*)^r w*)^(r/2), with w_n = E(w | F_n)."""
    ExtrapolationParams(r=r)
    w_terminal = np.asarray(w_terminal, dtype=float)
    wproc = doob_process(space, w_terminal)
    st = stats_for(space, f, wproc)
    _require_zero_start(st)
    fs = st.fstar[-1]
    s, _ = square_function(st)
    # sum_n |df_n|^2 / f*_n (f*_n)^(r-1), with and without the Doob weight
    base = _safe_div(st.dfnorm ** 2, st.fstar) * st.fstar ** (r - 1)
    base[0] = 0.0
    inner = base.sum(axis=0)
    a = st.expect(s ** r * w_terminal)
    b = st.expect(fs ** ((2 - r) * r / 2) * inner ** (r / 2) * w_terminal)
    e_fr_w = st.expect(fs ** r * w_terminal)
    c = e_fr_w ** (1 - r / 2) * st.expect(inner * w_terminal) ** (r / 2)
    d = e_fr_w ** (1 - r / 2) * st.expect((base * st.w).sum(axis=0)) ** (r / 2)
    e = 2 ** r * e_fr_w ** (1 - r / 2) * st.expect(fs ** r * st.wstar[-1]) ** (r / 2)
    tag = f"s_w[r={r:g}]"
    return [
        InequalityReport(f"{tag}.step1", a, b, seed=seed),
        InequalityReport(f"{tag}.step2", b, c, seed=seed),
        _equality(f"{tag}.step3", c, d, seed=seed),
        InequalityReport(f"{tag}.step4", d, e, seed=seed),
        InequalityReport(f"{tag}.chain", a, e, seed=seed),
    ]


def check_one_weight_a1(space: FilteredSpace, f: AdaptedProcess, w_terminal,
                        seed=None) -> InequalityReport:
    """E(Sf w) <= 2 [w]_A1^(1/2) E(f* w)."""
    w_terminal = np.asarray(w_terminal, dtype=float)
    st = stats_for(space, f, None)
    _require_zero_start(st)
    s, _ = square_function(st)
    a1 = a1_characteristic(space, w_terminal)
    return InequalityReport("one_weight_a1", st.expect(s * w_terminal),
                            2 * np.sqrt(a1) * st.expect(st.fstar[-1] * w_terminal),
                            seed=seed, witness={"a1": a1})


def maximal_function(space: FilteredSpace, h) -> np.ndarray:
    """M h = max_n |E(h | F_n)| per point (finite horizon)."""
    h = np.asarray(h, dtype=float)
    vals = np.stack([np.abs(conditional_expectation(space, h, n))[space.atoms[n]]
                     for n in range(space.horizon + 1)])
    return vals.max(axis=0)


def check_sf_u_w(space: FilteredSpace, f: AdaptedProcess, w_terminal, u, p: float,
                 seed=None) -> list[InequalityReport]:
    """E(Sf u w) <= 2 E(Mf M(uw))^(1/2) E(Mf uw)^(1/2)
                 <= 2 (E (Mf)^p w)^(1/p) (E M(uw)^p' w^(-p'/p))^(1/(2p')) (E u^p' w)^(1/(2p'))."""
    pp = ExtrapolationParams(p=p).p_conj
    w_terminal = np.asarray(w_terminal, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("u must be nonnegative")
    st = stats_for(space, f, None)
    _require_zero_start(st)
    s, _ = square_function(st)
    mf = st.fstar[-1]
    uw = u * w_terminal
    muw = maximal_function(space, uw)
    lhs = st.expect(s * uw)
    mid = 2 * np.sqrt(st.expect(mf * muw)) * np.sqrt(st.expect(mf * uw))
    right = (2 * st.expect(mf ** p * w_terminal) ** (1 / p)
             * st.expect(muw ** pp * w_terminal ** (-pp / p)) ** (1 / (2 * pp))
             * st.expect(u ** pp * w_terminal) ** (1 / (2 * pp)))
    tag = f"sf_u_w[p={p:g}]"
    return [
        InequalityReport(f"{tag}.step1", lhs, mid, seed=seed),
        InequalityReport(f"{tag}.step2", mid, right, seed=seed),
    ]


def check_extrapolation(space: FilteredSpace, f: AdaptedProcess, w_terminal,
                        r_values=(1.0, 1.5, 2.0), p_values=(1.5, 2.0, 3.0), u=None,
                        seed: int | None = None) -> list[InequalityReport]:
    """All consequences of the weighted estimate for a martingale with f_0 = 0.

    ``w_terminal`` is a positive terminal weight (its Doob sequence is used);
    ``u`` defaults to a seeded random nonnegative function.
    """
    if u is None:
        rng = np.random.default_rng([23, 0 if seed is None else int(seed)])
        u = rng.exponential(size=space.n_points)
    out = check_sf_holder(space, f, seed)
    for r in r_values:
        out += check_s_w(space, f, w_terminal, r, seed)
    out.append(check_one_weight_a1(space, f, w_terminal, seed))
    for p in p_values:
        out += check_sf_u_w(space, f, w_terminal, u, p, seed)
    return out


def check_lp_unweighted(space: FilteredSpace, f: AdaptedProcess, p: float,
                        seed=None) -> list[InequalityReport]:
    """||Sf||_p <= 2 sqrt(p) ||f*||_p and Doob ||f*||_p <= p' ||f_N||_p, hence
    ||Sf||_p <= 2 sqrt(p) p' ||f||_p."""
    pp = ExtrapolationParams(p=p).p_conj
    st = stats_for(space, f, None)
    _require_zero_start(st)
    s, _ = square_function(st)
    sp = st.expect(s ** p) ** (1 / p)
    fsp = st.expect(st.fstar[-1] ** p) ** (1 / p)
    fp = max(st.expect(st.fnorm[n] ** p) for n in range(st.horizon + 1)) ** (1 / p)
    tag = f"lp[p={p:g}]"
    return [
        InequalityReport(f"{tag}.sf_fstar", sp, 2 * np.sqrt(p) * fsp, seed=seed),
        InequalityReport(f"{tag}.doob", fsp, pp * fp, seed=seed),
        InequalityReport(f"{tag}.final", sp, 2 * np.sqrt(p) * pp * fp, seed=seed),
    ]


def check_cotype(space: FilteredSpace, f: AdaptedProcess, model: NormedSpaceModel,
                 gamma: float, seed=None) -> list[InequalityReport]:
    """E(gamma|f_0|^q + dt sum |df_n|^q) <= gamma E(f*)^q <= (q')^q gamma sup_n E|f_n|^q.

    The first step is the Davis inequality with the adapted weights (f*_n)^(q-1).
    """
    q = model.q
    st0 = stats_for(space, f, None, model)
    wproc = AdaptedProcess.from_points(space, st0.fstar ** (q - 1))
    st = stats_for(space, f, wproc, model)
    lhs = davis_lhs(st, model, gamma).total
    mid = davis_rhs(st, gamma)
    sup_fq = max(st.expect(st.fnorm[n] ** q) for n in range(st.horizon + 1))
    qc = model.conjugate
    direct = gamma * st.expect(st.fnorm[0] ** q) + model.delta_tilde * st.expect(
        (st.dfnorm[1:] ** q).sum(axis=0))
    return [
        _equality("cotype.weights", lhs, direct, seed=seed),
        InequalityReport("cotype.davis", lhs, mid, seed=seed),
        InequalityReport("cotype.doob", mid, qc ** q * gamma * sup_fq, seed=seed),
    ]
