"""Command-line entry point: ``sharpdavis <command> [options]``.

Exit codes: 0 success / no violation, 1 mathematical failure or witness found,
2 usage or configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

from . import __version__
from .bellman import (BellmanParams, gamma_general, gamma_lower_bound, t0_root, unweighted_q2_gamma,
                      violation_search, WV_RATIOS)
from .norms import (NormedSpaceModel, check_phi_prime_bounds, estimate_delta, estimate_delta_tilde,
                    production_delta_tilde)
from .sharpness import (OBJECTIVE_BOUNDS, CounterexampleConfig, InternalConsistencyError,
                        build_sharpness_example, extremal_search, sharpness_crosscheck)
from .suite import VerifyConfig, config_hash, jsonable, run_verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
MAX_SHARPNESS_N = 20_000


class UsageError(ValueError):
    pass


def _envelope(command: str, config: dict, body: dict, wall: float) -> dict:
    return jsonable({"command": command, "config": config,
                     "provenance": {"seed": config.get("seed"), "version": __version__,
                                    "configHash": config_hash(config)},
                     **body, "wallTime": wall})


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    keys = list(rows[0])
    writer = csv.DictWriter(buf, fieldnames=keys, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: r.get(k) for k in keys})
    return buf.getvalue()


# -- commands -----------------------------------------------------------------

def cmd_gamma(args) -> tuple[dict, list, int]:
    """t0, the K-relaxed bound, the grid supremum and gamma_general per q."""
    dt = 1.0 if args.delta_tilde is None else args.delta_tilde
    qs = args.q or [2.0]
    for q in qs:
        if not 2 <= q < math.inf:
            raise UsageError(f"q must lie in [2, inf), got {q}")
    if not 0 < dt <= 1:
        raise UsageError("delta-tilde must lie in (0, 1]")
    config = {"q": qs, "deltaTilde": dt, "unweighted": args.unweighted}
    rows = []
    if args.unweighted:
        if qs != [2.0] or dt != 1.0:
            raise UsageError("the unweighted optimization is available for q = 2, delta-tilde = 1 only")
        rows.append({"q": 2.0, "deltaTilde": 1.0, "gammaUnweighted": unweighted_q2_gamma()})
        return {"config": config, "rows": rows}, rows, EXIT_OK
    for q in qs:
        t0 = t0_root(q)
        main, kr = gamma_lower_bound(q, dt)
        rows.append({"q": q, "deltaTilde": dt, "t0": t0, "t0Residual": t0 ** q - 1 - q * (t0 + 1),
                     "kRelaxed": kr.value, "kRelaxedArgmax": kr.t,
                     "gridSup": main.value, "gridSupArgmax": main.t, "gridSupAtBoundary": main.at_boundary,
                     "gammaGeneral": gamma_general(q, dt)})
    return {"config": config, "rows": rows}, rows, EXIT_OK


def _model_from(args, q_default: float | None = None) -> NormedSpaceModel:
    desc = args.model
    if desc is None:
        q = q_default if q_default is not None else 2.0
        desc = "hilbert:2:2" if q == 2 else f"lq:{q:g}:2"
    try:
        return NormedSpaceModel.parse(desc, args.delta_tilde)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_verify(args):
    model = _model_from(args)
    try:
        cfg = VerifyConfig(model, trials=args.trials, seed=args.seed, gamma=args.gamma,
                           r_values=tuple(args.r or (1.0, 1.5, 2.0)), p_values=tuple(args.p or (1.5, 2.0, 3.0)),
                           max_depth=args.depth, max_branching=args.branching, sharpness=not args.no_sharpness)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rep = run_verify(cfg, workers=args.workers)
    doc = rep.to_dict(all_reports=args.all_reports)
    rows = [{"check": name, **v} for name, v in doc["aggregate"]["byCheck"].items()]
    return doc, rows, EXIT_FAIL if rep.failures or rep.truncated else EXIT_OK


def _parse_grid(spec: str) -> tuple:
    try:
        parts = [int(p) for p in spec.lower().split("x")]
    except ValueError as exc:
        raise UsageError(f"malformed grid spec {spec!r}; expected e.g. 400x400x7") from exc
    if len(parts) not in (2, 3) or any(p < 0 for p in parts) or (len(parts) == 3 and parts[2] < 1):
        raise UsageError(f"malformed grid spec {spec!r}; expected e.g. 400x400x7")
    return (parts[0], parts[1], parts[2] if len(parts) == 3 else len(WV_RATIOS))


def cmd_bellman_scan(args):
    q = args.q[0] if args.q else 2.0
    if args.q and len(args.q) > 1:
        raise UsageError("bellman-scan takes a single q")
    model = _model_from(args, q)
    if model.q != q and args.q:
        raise UsageError("--q disagrees with --model")
    gamma = args.gamma if args.gamma is not None else (4.0 if q == 2 and model.delta_tilde == 1 else
                                                       gamma_general(q, model.delta_tilde))
    if args.unweighted and args.gamma is None and q == 2:
        gamma = 3.0
    try:
        params = BellmanParams(model.q, model.delta_tilde, gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    grid = _parse_grid(args.grid)
    if args.trials < 0:
        raise UsageError("trials must be >= 0")
    res = violation_search(params, model, budget=args.trials, seed=args.seed,
                           weighted=not args.unweighted, grid=grid)
    config = {"model": model.descriptor, "q": model.q, "deltaTilde": model.delta_tilde, "gamma": gamma,
              "grid": list(grid), "trials": args.trials, "seed": args.seed, "weighted": not args.unweighted}
    body = {"kind": "witness" if res.violated else "certificate", "evaluations": res.evaluations,
            "minGap": res.min_gap, "minRelativeGap": res.min_relative_gap, "witnesses": res.witnesses,
            "note": None if res.violated else "no violation found on the scanned states; this is not a proof"}
    rows = res.witnesses or [{"minGap": res.min_gap, "minRelativeGap": res.min_relative_gap,
                              "evaluations": res.evaluations}]
    return {"config": config, **body}, rows, EXIT_FAIL if res.violated else EXIT_OK


def cmd_sharpness(args):
    ks = args.k or [1000.0]
    ns = args.n or [1000]
    for k in ks:
        if not (k > 0 and math.isfinite(k)):
            raise UsageError(f"k must be a positive real, got {k}")
    for n in ns:
        if not 1 <= n <= MAX_SHARPNESS_N:
            raise UsageError(f"N must lie in [1, {MAX_SHARPNESS_N}], got {n}")
    rows = []
    for k in ks:
        for n in ns:
            cfg = CounterexampleConfig(k, n)
            rep = sharpness_crosscheck(cfg)
            row = rep.to_dict()
            row["overflowSafe"] = cfg.overflow_safe
            rows.append(row)
    flat = [{"k": r["k"], "N": r["N"], "lhsSumClosed": r["closedForm"]["lhsSum"], "rhsClosed": r["closedForm"]["rhs"],
             "lhsSum": r["numeric"]["lhsSum"], "rhs": r["numeric"]["rhs"], "relError": r["relError"],
             "ratio": r["ratio"], "pass": r["pass"]} for r in rows]
    ok = all(r["pass"] for r in rows)
    return {"config": {"k": ks, "N": ns}, "rows": rows}, flat, EXIT_OK if ok else EXIT_FAIL


def cmd_search(args):
    if args.objective not in OBJECTIVE_BOUNDS:
        raise UsageError(f"objective must be one of {sorted(OBJECTIVE_BOUNDS)}")
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    start = None
    if args.k is not None or args.n is not None:
        if not (args.k and args.n and len(args.k) == 1 and len(args.n) == 1):
            raise UsageError("seeding from the explicit example needs one --k and one --n")
        try:
            start = build_sharpness_example(CounterexampleConfig(args.k[0], args.n[0]))
        except (ValueError, OverflowError) as exc:
            raise UsageError(str(exc)) from exc
    try:
        res = extremal_search(args.objective, depth=args.depth, branching=args.branching,
                              budget=args.trials, seed=args.seed, start=start)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    config = {"objective": args.objective, "depth": args.depth, "branching": args.branching,
              "trials": args.trials, "seed": args.seed,
              "seedInstance": None if start is None else {"k": args.k[0], "N": args.n[0]}}
    return {"config": config, "bound": OBJECTIVE_BOUNDS[args.objective], **res.to_dict()}, res.trace, EXIT_OK


def cmd_constants(args):
    descs = args.models or ["hilbert:2:2", "lq:2:2", "lq:3:2", "lq:4:2"]
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    rows = []
    ok = True
    for desc in descs:
        try:
            model = NormedSpaceModel.parse(desc, 1.0)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        dt = estimate_delta_tilde(model, args.trials, args.seed)
        de = estimate_delta(model, args.trials, args.seed)
        pp = check_phi_prime_bounds(model, min(args.trials, 100_000), args.seed)
        q = model.q
        rel = {"lower": de.value / (2 ** (q - 1) - 1) <= dt.value + 1e-6,
               "upper": dt.value <= de.value + 1e-6, "atMostOne": dt.value <= 1 + 1e-9}
        passed = all(rel.values()) and pp.passed
        ok &= passed
        rows.append({"model": model.descriptor, "deltaHat": de.value, "deltaTildeHat": dt.value,
                     "productionDeltaTilde": production_delta_tilde(dt.value), "samples": dt.n_samples,
                     "relations": rel, "phiPrimeBounds": pp.passed, "pass": passed,
                     "witness": {"x": dt.witness_x, "y": dt.witness_y}})
    flat = [{k: r[k] for k in ("model", "deltaHat", "deltaTildeHat", "productionDeltaTilde", "samples", "pass")}
            for r in rows]
    return ({"config": {"models": descs, "trials": args.trials, "seed": args.seed}, "rows": rows},
            flat, EXIT_OK if ok else EXIT_FAIL)


COMMANDS = {"gamma": cmd_gamma, "verify": cmd_verify, "bellman-scan": cmd_bellman_scan,
            "sharpness": cmd_sharpness, "search": cmd_search, "constants": cmd_constants}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sharpdavis", description="Certify weighted Davis inequalities numerically.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, fmt=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output file (default stdout)")
        if fmt:
            sp.add_argument("--format", choices=("json", "csv"), default="json")

    g = sub.add_parser("gamma", help="constant calculus: t0, K-relaxed bound, grid supremum, gamma_general")
    g.add_argument("--q", type=float, nargs="+")
    g.add_argument("--delta-tilde", type=float)
    g.add_argument("--unweighted", action="store_true", help="the q = 2 unweighted optimization")
    common(g, seed=False)

    v = sub.add_parser("verify", help="randomized sweep over all inequality checks")
    v.add_argument("--model", help="kind:q:d, e.g. hilbert:2:2 or lq:3:2 (default hilbert:2:2)")
    v.add_argument("--delta-tilde", type=float)
    v.add_argument("--gamma", type=float, help="override the tested constant")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--depth", type=int, default=6, help="maximum tree depth")
    v.add_argument("--branching", type=int, default=3, help="maximum branching")
    v.add_argument("--r", type=float, nargs="+")
    v.add_argument("--p", type=float, nargs="+")
    v.add_argument("--workers", type=int, help="worker processes (default from SHARPDAVIS_WORKERS or 1)")
    v.add_argument("--all-reports", action="store_true", help="list every report, not only failures")
    v.add_argument("--no-sharpness", action="store_true", help="skip the explicit extremal instances")
    common(v)

    b = sub.add_parser("bellman-scan", help="search for violations of the one-step inequality")
    b.add_argument("--q", type=float, nargs="+")
    b.add_argument("--model")
    b.add_argument("--delta-tilde", type=float)
    b.add_argument("--gamma", type=float)
    b.add_argument("--grid", default="400x400x7", help="n_t x n_tt x n_ratios")
    b.add_argument("--trials", type=int, default=1_000_000, help="random states after the grid")
    b.add_argument("--unweighted", action="store_true", help="w = v = 1 regime")
    common(b)

    s = sub.add_parser("sharpness", help="the explicit example: closed forms against numerics")
    s.add_argument("--k", type=float, nargs="+")
    s.add_argument("--n", type=int, nargs="+")
    common(s, seed=False)

    e = sub.add_parser("search", help="adversarial search for large Davis ratios")
    e.add_argument("objective", choices=sorted(OBJECTIVE_BOUNDS))
    e.add_argument("--depth", type=int, default=4)
    e.add_argument("--branching", type=int, default=2)
    e.add_argument("--trials", type=int, default=20_000, help="evaluation budget")
    e.add_argument("--k", type=float, nargs="+", help="seed from the explicit example with this k")
    e.add_argument("--n", type=int, nargs="+", help="and this N")
    common(e)

    c = sub.add_parser("constants", help="estimate uniform convexity moduli")
    c.add_argument("--model", dest="models", nargs="+")
    c.add_argument("--trials", type=int, default=100_000)
    common(c)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        body, rows, code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sharpdavis {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InternalConsistencyError as exc:
        print(f"sharpdavis {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    wall = time.perf_counter() - t0
    if "provenance" in body:
        doc = body
    else:
        config = body.pop("config", None) or {}
        doc = _envelope(args.command, config, body, wall)
    fmt = getattr(args, "format", "json")
    text = _csv(jsonable(rows)) if fmt == "csv" else json.dumps(doc, indent=2, sort_keys=True) + "\n"
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"sharpdavis {args.command}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
