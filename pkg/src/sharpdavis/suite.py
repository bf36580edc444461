"""Seeded randomized verification: instance generation, per-instance checks
and the aggregated SuiteReport."""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bellman import BellmanParams, gamma_general, pathwise_induction_check
from .inequalities import (InequalityReport, _relative_report, check_cotype, check_davis,
                           check_extrapolation, check_lp_unweighted, check_pathwise)
from .norms import Kind, NormedSpaceModel
from .sharpness import CounterexampleConfig, build_sharpness_example
from .spaces import (AdaptedProcess, FilteredSpace, random_martingale, random_space,
                     random_terminal_weight, random_weights, space_to_dict)

WORKERS_ENV = "SHARPDAVIS_WORKERS"
# always part of a Hilbert verify run; at gamma < 4(k+1)/(k+2) the weighted check fails on them
SHARPNESS_SUITE = ((1, 1), (2, 3), (10, 5), (100, 10))
MAX_SERIALIZED_FAILURES = 20


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def instance_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def jsonable(obj):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def config_hash(config: dict) -> str:
    text = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class Instance:
    label: str
    seed: int | None
    space: FilteredSpace
    f: AdaptedProcess
    w: AdaptedProcess
    w_terminal: np.ndarray | None

    def to_dict(self) -> dict:
        return space_to_dict(self.space, {"f": self.f, "w": self.w})


def make_instance(seed: int, d: int, max_depth: int = 6, max_branching: int = 3) -> Instance:
    """Random tree, an R^d-valued martingale (started at 0 for even seeds),
    lognormal adapted weights and a positive terminal weight."""
    space = random_space(seed, max_depth=max_depth, max_branching=max_branching)
    f = random_martingale(space, d, seed, start_at_zero=seed % 2 == 0)
    return Instance(f"random[{seed}]", seed, space, f, random_weights(space, seed),
                    random_terminal_weight(space, seed))


def sharpness_instance(k: float, N: int) -> Instance:
    space, f, w = build_sharpness_example(CounterexampleConfig(k, N))
    return Instance(f"sharpness[k={k},N={N}]", None, space, f, w, None)


def centered(space: FilteredSpace, f: AdaptedProcess) -> AdaptedProcess:
    """f - f_0, a martingale started at zero."""
    pv = f.on_points(space)
    return AdaptedProcess.from_points(space, pv - pv[0][None])


@dataclass(frozen=True)
class VerifyConfig:
    model: NormedSpaceModel
    trials: int = 1000
    seed: int = 0
    gamma: float | None = None
    r_values: tuple = (1.0, 1.5, 2.0)
    p_values: tuple = (1.5, 2.0, 3.0)
    max_depth: int = 6
    max_branching: int = 3
    sharpness: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.gamma is not None and not self.gamma >= 1:
            raise ValueError("gamma must be >= 1")
        for r in self.r_values:
            if not 1 <= r <= 2:
                raise ValueError(f"r must lie in [1, 2], got {r}")
        for p in self.p_values:
            if not 1 < p < math.inf:
                raise ValueError(f"p must lie in (1, inf), got {p}")
        if not (1 <= self.max_depth <= 12 and 1 <= self.max_branching <= 6):
            raise ValueError("depth must lie in [1, 12] and branching in [1, 6]")

    @property
    def is_hilbert2(self) -> bool:
        return self.model.kind is Kind.HILBERT and self.model.q == 2

    def gammas(self) -> tuple[float, float]:
        """(weighted, unweighted) constants to test."""
        if self.gamma is not None:
            return self.gamma, self.gamma
        if self.is_hilbert2 and self.model.delta_tilde == 1:
            return 4.0, 3.0
        g = gamma_general(self.model.q, self.model.delta_tilde)
        return g, g

    def to_dict(self) -> dict:
        return {"model": self.model.descriptor, "deltaTilde": self.model.delta_tilde, "trials": self.trials,
                "seed": self.seed, "gamma": self.gamma, "r": list(self.r_values), "p": list(self.p_values),
                "depth": self.max_depth, "branching": self.max_branching, "sharpness": self.sharpness}


def _induction_reports(inst: Instance, w, model, gamma, prefix, seed) -> list[InequalityReport]:
    rep = pathwise_induction_check(inst.space, inst.f, w, model,
                                   BellmanParams(model.q, model.delta_tilde, gamma))
    scale = max(abs(rep.expected_u_initial), abs(rep.expected_u_terminal), 1.0)
    return [
        _relative_report(f"{prefix}.step", rep.step_min_relative_gap, seed, rep.witness),
        _relative_report(f"{prefix}.conditional", rep.conditional_min, seed, None),
        InequalityReport(f"{prefix}.telescoping", rep.expected_u_terminal, rep.expected_u_initial, seed=seed,
                         witness={"scale": scale}),
    ]


def check_instance(inst: Instance, cfg: VerifyConfig) -> list[InequalityReport]:
    """Every inequality check applicable to one instance."""
    model, seed = cfg.model, inst.seed
    gw, gu = cfg.gammas()
    out = [check_davis(inst.space, inst.f, inst.w, model, gw, "davis.weighted", seed),
           check_davis(inst.space, inst.f, None, model, gu, "davis.unweighted", seed)]
    out += check_pathwise(inst.space, inst.f, inst.w, model, gw, seed).reports("pathwise.weighted", seed)
    out += check_pathwise(inst.space, inst.f, None, model, gu, seed).reports("pathwise.unweighted", seed)
    out += _induction_reports(inst, inst.w, model, gw, "induction.weighted", seed)
    out += _induction_reports(inst, None, model, gu, "induction.unweighted", seed)
    if inst.w_terminal is not None:
        f0 = centered(inst.space, inst.f)
        if cfg.is_hilbert2:
            out += check_extrapolation(inst.space, f0, inst.w_terminal, cfg.r_values, cfg.p_values, seed=seed)
            for p in cfg.p_values:
                out += check_lp_unweighted(inst.space, f0, p, seed)
        out += check_cotype(inst.space, inst.f, model, gw, seed)
    return out


@dataclass
class SuiteReport:
    command: str
    config: dict
    reports: list = field(default_factory=list)
    failing_instances: list = field(default_factory=list)
    wall_time: float = 0.0
    truncated: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def failures(self) -> int:
        return sum(not r.passed for r in self.reports)

    def aggregate(self) -> dict:
        by = {}
        worst = None
        for r in self.reports:
            rel = r.margin / r.scale
            b = by.setdefault(r.name, {"total": 0, "failures": 0, "worstRelativeMargin": math.inf})
            b["total"] += 1
            b["failures"] += int(not r.passed)
            b["worstRelativeMargin"] = min(b["worstRelativeMargin"], rel)
            if worst is None or rel < worst[0]:
                worst = (rel, r)
        return {"total": len(self.reports), "failures": self.failures,
                "worstMargin": None if worst is None else worst[1].margin,
                "worstRelativeMargin": None if worst is None else worst[0],
                "worstCheck": None if worst is None else worst[1].name,
                "byCheck": dict(sorted(by.items()))}

    def to_dict(self, all_reports: bool = False) -> dict:
        shown = self.reports if all_reports else [r for r in self.reports if not r.passed]
        return jsonable({
            "command": self.command,
            "config": self.config,
            "provenance": {"seed": self.config.get("seed"), "version": __version__,
                           "configHash": config_hash(self.config)},
            "aggregate": self.aggregate(),
            "reports": [r.to_dict() for r in shown],
            "failingInstances": self.failing_instances,
            "truncated": self.truncated,
            "wallTime": self.wall_time,
            **self.extra,
        })


def _run_chunk(args):
    cfg, indices = args
    out = []
    for i in indices:
        s = instance_seed(cfg.seed, i)
        inst = make_instance(s, cfg.model.d, cfg.max_depth, cfg.max_branching)
        reps = check_instance(inst, cfg)
        failed = not all(r.passed for r in reps)
        out.append((reps, {"index": i, "seed": s, "label": inst.label, **inst.to_dict()} if failed else None))
    return out


def run_verify(cfg: VerifyConfig, workers: int | None = None, chunk: int = 50) -> SuiteReport:
    """Randomized sweep; results are ordered by instance index whatever the worker count."""
    t0 = time.perf_counter()
    report = SuiteReport("verify", cfg.to_dict())
    workers = default_workers() if workers is None else max(1, workers)

    def absorb(results):
        for reps, failing in results:
            report.reports.extend(reps)
            if failing is not None and len(report.failing_instances) < MAX_SERIALIZED_FAILURES:
                report.failing_instances.append(failing)

    try:
        if cfg.sharpness and cfg.is_hilbert2:
            for k, N in SHARPNESS_SUITE:
                inst = sharpness_instance(k, N)
                reps = check_instance(inst, cfg)
                absorb([(reps, None if all(r.passed for r in reps) else
                         {"label": inst.label, **inst.to_dict()})])
        jobs = [(cfg, range(a, min(a + chunk, cfg.trials))) for a in range(0, cfg.trials, chunk)]
        if workers == 1:
            for job in jobs:
                absorb(_run_chunk(job))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for res in pool.map(_run_chunk, jobs):
                    absorb(res)
    except KeyboardInterrupt:
        report.truncated = True
    report.wall_time = time.perf_counter() - t0
    return report

