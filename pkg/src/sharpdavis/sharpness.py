"""The explicit example showing the weighted constant 1/4 cannot be improved,
and a small adversarial search over martingale trees."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .inequalities import HILBERT, davis_lhs, davis_rhs, square_function, stats_for
from .spaces import AdaptedProcess, FilteredSpace, build_tree, comb_space, space_to_dict

# exp(700) is still a finite double; beyond that (k+1)^N or its inverse mass is not representable
MAX_LOG = 700.0

OBJECTIVE_BOUNDS = {
    "davisA1-ratio": 4.0,
    "davisL1-ratio": 3.0,
    "sqrt3-ratio": math.sqrt(3.0),
}


class InternalConsistencyError(RuntimeError):
    """A search produced a ratio above a proven constant."""


@dataclass(frozen=True)
class CounterexampleConfig:
    k: float
    N: int

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError(f"k must be a positive real, got {self.k}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def overflow_safe(self) -> bool:
        return self.N * math.log1p(self.k) <= MAX_LOG


def sharpness_masses(cfg: CounterexampleConfig) -> np.ndarray:
    """mu({w}) = k (k+1)^(-w) for w = 1..N, then the tail mass (k+1)^(-N)."""
    k, N = cfg.k, cfg.N
    omega = np.arange(1, N + 1)
    return np.append(k * (k + 1.0) ** -omega, (k + 1.0) ** -N)


def build_sharpness_example(cfg: CounterexampleConfig):
    """(space, f, w) on the atoms {1}, .., {N}, {>N}.

    f_n = (-1)^(w+1) (k+2)/k on revealed atoms {w}, w <= n, and (-1)^n on the
    tail; w_n = 0 on revealed atoms and (k+1)^n on the tail.  Both are
    martingales.  Raises OverflowError when (k+1)^N leaves double range.
    """
    if not cfg.overflow_safe:
        raise OverflowError(f"(k+1)^N = exp({cfg.N * math.log1p(cfg.k):.1f}) is outside double "
                            f"range; use sharpness_numeric for this configuration")
    k, N = cfg.k, cfg.N
    space = comb_space(sharpness_masses(cfg))
    fv, wv = [], []
    for n in range(N + 1):
        omega = np.arange(1, n + 1)
        fv.append(np.append((-1.0) ** (omega + 1) * (k + 2) / k, (-1.0) ** n))
        wv.append(np.append(np.zeros(n), (k + 1.0) ** n))
    return space, AdaptedProcess(tuple(fv)), AdaptedProcess(tuple(wv))


def sharpness_closed_form(cfg: CounterexampleConfig) -> tuple[float, float]:
    """(E sum |df_n|^2 w_n / f*_n, E f*_N w*_N) = (4N, N(k+2)/(k+1) + 1)."""
    return 4.0 * cfg.N, cfg.N * (cfg.k + 2) / (cfg.k + 1) + 1.0


@dataclass(frozen=True)
class SharpnessNumbers:
    sum_part: float
    fw_star: float
    gamma_part_unit: float


def sharpness_numeric(cfg: CounterexampleConfig) -> SharpnessNumbers:
    """Evaluate both sides on the explicit example with mass x weight products in log space.

    The per-point paths, increments and running maxima are computed exactly as
    in the generic path statistics; only the products mu(w) * w_n(w), whose
    factors may individually overflow, are formed as exp(log mu + log w).
    """
    k, N = cfg.k, cfg.N
    lk = math.log1p(k)
    omega = np.arange(1, N + 2)  # the last point stands for the tail {> N}
    n = np.arange(N + 1)[:, None]
    revealed = omega[None, :] <= n
    revealed[:, -1] = False
    f = np.where(revealed, (-1.0) ** (omega + 1) * (k + 2) / k, (-1.0) ** n)
    log_w = np.where(revealed, -np.inf, n * lk)
    log_mass = np.append(math.log(k) - omega[:-1] * lk, -N * lk)
    fnorm = np.abs(f)
    fstar = np.maximum.accumulate(fnorm, axis=0)
    log_wstar = np.maximum.accumulate(log_w, axis=0)
    df = np.zeros_like(f)
    df[1:] = f[1:] - f[:-1]
    with np.errstate(divide="ignore"):
        coef = np.exp(log_mass[None, :] + log_w)
    sum_part = float(np.sum(coef[1:] * df[1:] ** 2 / fstar[1:]))
    fw = float(np.sum(np.exp(log_mass + log_wstar[-1]) * fstar[-1]))
    g_unit = float(np.sum(np.exp(log_mass + log_w[0]) * fnorm[0]))
    return SharpnessNumbers(sum_part, fw, g_unit)


@dataclass
class SharpnessReport:
    k: float
    N: int
    closed_sum: float
    closed_rhs: float
    numeric_sum: float
    numeric_rhs: float
    direct_sum: float | None
    direct_rhs: float | None
    rel_error: float
    ratio: float
    passed: bool

    def to_dict(self) -> dict:
        return {"k": self.k, "N": self.N, "closedForm": {"lhsSum": self.closed_sum, "rhs": self.closed_rhs},
                "numeric": {"lhsSum": self.numeric_sum, "rhs": self.numeric_rhs},
                "direct": None if self.direct_sum is None else
                {"lhsSum": self.direct_sum, "rhs": self.direct_rhs},
                "relError": self.rel_error, "ratio": self.ratio, "pass": self.passed}


def sharpness_crosscheck(cfg: CounterexampleConfig, tol: float = 1e-9) -> SharpnessReport:
    """Numeric sides against the closed forms; also through the generic Davis
    functionals when the example fits in double range."""
    cs, cr = sharpness_closed_form(cfg)
    num = sharpness_numeric(cfg)
    errs = [abs(num.sum_part - cs) / cs, abs(num.fw_star - cr) / cr]
    ds = dr = None
    if cfg.overflow_safe:
        space, f, w = build_sharpness_example(cfg)
        st = stats_for(space, f, w)
        ds = davis_lhs(st, HILBERT, 4.0).sum_part
        dr = davis_rhs(st, 1.0)
        errs += [abs(ds - cs) / cs, abs(dr - cr) / cr]
    err = max(errs)
    return SharpnessReport(cfg.k, cfg.N, cs, cr, num.sum_part, num.fw_star, ds, dr, err,
                           num.sum_part / num.fw_star, bool(err <= tol))


# -- extremal search ----------------------------------------------------------

@dataclass
class ExtremalResult:
    objective: str
    best_ratio: float
    configuration: dict
    trace: list = field(default_factory=list)
    evaluations: int = 0
    exhausted: bool = False
    seed: int = 0

    def to_dict(self) -> dict:
        return {"objective": self.objective, "bestRatio": self.best_ratio, "evaluations": self.evaluations,
                "budgetExhausted": self.exhausted, "seed": self.seed, "trace": self.trace,
                "configuration": self.configuration}


class _Evaluator:
    """Fast ratio evaluation on a fixed filtration (no per-call validation)."""

    def __init__(self, objective: str, atoms: np.ndarray):
        self.objective = objective
        self.atoms = atoms
        self.n_atoms = [int(a.max()) + 1 for a in atoms]

    def processes(self, theta, z, logw):
        masses = np.exp(theta - theta.max())
        masses /= masses.sum()
        f = np.empty((len(self.atoms), z.size))
        for n, a in enumerate(self.atoms):
            am = np.bincount(a, weights=masses, minlength=self.n_atoms[n])
            f[n] = (np.bincount(a, weights=masses * z, minlength=self.n_atoms[n]) / am)[a]
        w = None if logw is None else np.stack([np.exp(lw)[a] for lw, a in zip(logw, self.atoms)])
        return masses, f, w

    def __call__(self, theta, z, logw) -> float:
        masses, f, w = self.processes(theta, z, logw)
        fnorm = np.abs(f)
        fstar = np.maximum.accumulate(fnorm, axis=0)
        df2 = np.diff(f, axis=0) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(fstar[1:] > 0, df2 / np.where(fstar[1:] > 0, fstar[1:], 1.0), 0.0)
        if self.objective == "davisA1-ratio":
            wstar = np.maximum.accumulate(w, axis=0)
            num = masses @ (q * w[1:]).sum(axis=0)
            den = masses @ (fstar[-1] * wstar[-1])
        elif self.objective == "davisL1-ratio":
            num = masses @ q.sum(axis=0)
            den = masses @ fstar[-1]
        else:
            num = masses @ np.sqrt(df2.sum(axis=0))
            den = masses @ fstar[-1]
        if not den > 0:
            return 0.0
        return float(num / den)


def _configuration(ev: _Evaluator, theta, z, logw) -> dict:
    masses, f, w = ev.processes(theta, z, logw)
    masses = masses / masses.sum()
    space = FilteredSpace(masses, ev.atoms)
    procs = {"f": AdaptedProcess.from_points(space, f)}
    if w is not None:
        procs["w"] = AdaptedProcess.from_points(space, w)
    return space_to_dict(space, procs)


def replay_ratio(objective: str, space: FilteredSpace, f: AdaptedProcess,
                 w: AdaptedProcess | None) -> float:
    """The search objective evaluated through the generic inequality functionals."""
    if objective == "davisA1-ratio":
        st = stats_for(space, f, w)
        return davis_lhs(st, HILBERT, 4.0).sum_part / davis_rhs(st, 1.0)
    st = stats_for(space, f, None)
    if objective == "davisL1-ratio":
        return davis_lhs(st, HILBERT, 3.0).sum_part / davis_rhs(st, 1.0)
    return square_function(st)[1] / davis_rhs(st, 1.0)


def extremal_search(objective: str, depth: int = 3, branching: int = 2, budget: int = 20_000,
                    seed: int = 0, start: tuple | None = None, min_step: float = 1e-6) -> ExtremalResult:
    """Maximize a Davis-type ratio over scalar martingales on a fixed tree.

    Free parameters are terminal values, log-masses and (for the weighted
    objective) log-weights per atom; inner martingale values come from
    conditional expectations.  Coordinate ascent takes the first improving
    +/- step in a fixed scan order and halves the step after a sweep without
    improvement; random restarts use the remaining budget.  ``start`` seeds the
    first restart with a ``(space, f, w)`` triple, which also fixes the tree.
    """
    if objective not in OBJECTIVE_BOUNDS:
        raise ValueError(f"unknown objective {objective!r}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    weighted = objective == "davisA1-ratio"
    if start is not None:
        space, f0, w0 = start
        atoms = space.atoms
    else:
        if not (1 <= depth <= 8 and 1 <= branching <= 4):
            raise ValueError("search is limited to depth <= 8 and branching <= 4")
        atoms = build_tree([branching] * depth).atoms
    ev = _Evaluator(objective, atoms)
    rng = np.random.default_rng([29, int(seed)])
    n_points = atoms.shape[1]
    bound = OBJECTIVE_BOUNDS[objective]
    evals = 0
    best = (-np.inf, None)
    trace = []

    def evaluate(theta, z, logw):
        nonlocal evals
        evals += 1
        r = ev(theta, z, logw)
        if r > bound + 1e-6:
            raise InternalConsistencyError(f"{objective} reached {r!r} > proven bound {bound}")
        return r

    restart = 0
    while evals < budget:
        if restart == 0 and start is not None:
            theta = np.log(space.masses)
            z = f0.on_points(space)[-1].reshape(n_points, -1)[:, 0].copy()
            logw = None
            if weighted:
                with np.errstate(divide="ignore"):
                    logw = [np.log(v) for v in w0.values]
        else:
            theta = rng.normal(0, 1, n_points)
            z = rng.normal(0, 1, n_points)
            if rng.uniform() < 0.5:
                z -= z @ np.exp(theta) / np.exp(theta).sum()  # start the martingale at 0
            logw = [rng.normal(0, 1, k) for k in ev.n_atoms] if weighted else None
        cur = evaluate(theta, z, logw)
        step = 0.5
        while evals < budget and step >= min_step:
            improved = False
            blocks = [("theta", i) for i in range(n_points)] + [("z", i) for i in range(n_points)]
            if weighted:
                blocks += [("w", (n, a)) for n in range(len(logw)) for a in range(len(logw[n]))
                           if np.isfinite(logw[n][a])]
            for kind, i in blocks:
                if evals >= budget:
                    break
                for sgn in (1.0, -1.0):
                    if evals >= budget:
                        break
                    if kind == "theta":
                        old = theta[i]
                        theta[i] = old + sgn * step
                        theta[i] = max(theta[i], theta.max() - MAX_LOG + 50)
                        r = evaluate(theta, z, logw)
                        if r > cur:
                            cur, improved = r, True
                            break
                        theta[i] = old
                    elif kind == "z":
                        old = z[i]
                        z[i] = old + sgn * step * max(1.0, abs(old))
                        r = evaluate(theta, z, logw)
                        if r > cur:
                            cur, improved = r, True
                            break
                        z[i] = old
                    else:
                        n, a = i
                        old = logw[n][a]
                        logw[n][a] = old + sgn * step
                        r = evaluate(theta, z, logw)
                        if r > cur:
                            cur, improved = r, True
                            break
                        logw[n][a] = old
            trace.append({"restart": restart, "evaluations": evals, "ratio": cur, "step": step})
            if not improved:
                step /= 2
        if cur > best[0]:
            best = (cur, (theta.copy(), z.copy(), None if logw is None else [v.copy() for v in logw]))
        restart += 1
    theta, z, logw = best[1]
    return ExtremalResult(objective, best[0], _configuration(ev, theta, z, logw), trace, evals,
                          exhausted=evals >= budget, seed=seed)
