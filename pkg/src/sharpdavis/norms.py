"""Normed-space models: norms, phi(x) = |x|^q, its directional derivative, and
empirical estimates of the uniform convexity constants delta and delta_tilde."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Sample coordinates are snapped to this dyadic grid.  Products and sums of
# such numbers are exact in double precision for the sizes used here, so the
# Hilbert identities (parallelogram law, |x+h|^2 - |x|^2 - 2<x,h> = |h|^2)
# hold without rounding on sampled points.
GRID = 2.0 ** -20
QUOTIENT_STEPS = tuple(10.0 ** -k for k in range(2, 9))


class Kind(str, Enum):
    HILBERT = "hilbert"
    LQ = "lq"


@dataclass(frozen=True)
class NormedSpaceModel:
    kind: Kind
    q: float
    d: int
    delta_tilde: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not 2 <= self.q < np.inf:
            raise ValueError(f"q must lie in [2, inf), got {self.q}")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if not 0 < self.delta_tilde <= 1:
            raise ValueError("delta_tilde must lie in (0, 1]")

    @classmethod
    def parse(cls, descriptor: str, delta_tilde: float | None = None) -> "NormedSpaceModel":
        """Parse ``kind:q:d`` such as ``hilbert:2:4`` or ``lq:4:3``."""
        try:
            kind, q, d = descriptor.split(":")
            kind, q, d = Kind(kind.lower()), float(q), int(d)
        except ValueError as exc:
            raise ValueError(f"bad model descriptor {descriptor!r}; expected kind:q:d") from exc
        if delta_tilde is None:
            delta_tilde = 1.0 if (kind is Kind.HILBERT and q == 2) or d == 1 and q == 2 else None
        if delta_tilde is None:
            delta_tilde = KNOWN_DELTA_TILDE.get((kind, q))
        if delta_tilde is None:
            raise ValueError(f"no default delta_tilde for {descriptor}; pass one explicitly")
        return cls(kind, q, d, delta_tilde)

    @property
    def descriptor(self) -> str:
        q = int(self.q) if float(self.q).is_integer() else self.q
        return f"{self.kind.value}:{q}:{self.d}"

    @property
    def conjugate(self) -> float:
        return self.q / (self.q - 1)

    def with_delta_tilde(self, delta_tilde: float) -> "NormedSpaceModel":
        return NormedSpaceModel(self.kind, self.q, self.d, delta_tilde)


def norm(model: NormedSpaceModel, x) -> np.ndarray:
    """Norm over the last axis."""
    x = np.asarray(x, dtype=float)
    if model.kind is Kind.HILBERT:
        return np.sqrt(np.sum(x * x, axis=-1))
    return np.sum(np.abs(x) ** model.q, axis=-1) ** (1.0 / model.q)


def phi(model: NormedSpaceModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if model.kind is Kind.LQ:
        return np.sum(np.abs(x) ** model.q, axis=-1)
    if model.q == 2:
        return np.sum(x * x, axis=-1)
    return norm(model, x) ** model.q


def phi_prime(model: NormedSpaceModel, x, h) -> np.ndarray:
    """Closed-form phi'(x)h.  phi is C^1 for q >= 2 in both model kinds."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    q = model.q
    if model.kind is Kind.LQ:
        return q * np.sum(np.abs(x) ** (q - 2) * x * h, axis=-1)
    inner = np.sum(x * h, axis=-1)
    if q == 2:
        return 2.0 * inner
    return q * norm(model, x) ** (q - 2) * inner


@dataclass(frozen=True)
class DirectionalDerivativeResult:
    value: float
    method: str
    quotient_at_t: float
    quotients: tuple = field(default=())
    monotone: bool = True


def dir_derivative(model: NormedSpaceModel, x, h, method: str = "auto") -> DirectionalDerivativeResult:
    """phi'(x)h for single vectors x, h.

    ``method="quotient"`` evaluates the one-sided difference quotients at
    t = 1e-2 .. 1e-8.  By convexity they decrease towards the limit, so the
    smallest-step quotient is an upper estimate.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if x.shape != (model.d,) or h.shape != (model.d,):
        raise ValueError(f"expected vectors of dimension {model.d}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(h))):
        raise ValueError("non-finite input")
    if method == "auto":
        val = float(phi_prime(model, x, h))
        return DirectionalDerivativeResult(val, "closed-form", val)
    if method != "quotient":
        raise ValueError(f"unknown method {method!r}")
    base = phi(model, x)
    quots = tuple(float((phi(model, x + t * h) - base) / t) for t in QUOTIENT_STEPS)
    scale = max(model.q * float(norm(model, x)) ** (model.q - 1) * float(norm(model, h)), 1.0)
    # rounding in phi(x + t h) - phi(x) contributes about eps |phi(x)| / t
    noise = [8 * np.finfo(float).eps * max(float(base), 1.0) / t for t in QUOTIENT_STEPS]
    monotone = all(b <= a + 1e-9 * scale + e for a, b, e in zip(quots, quots[1:], noise[1:]))
    return DirectionalDerivativeResult(quots[-1], "one-sided-quotient", quots[-1], quots, monotone)


# -- sampling ---------------------------------------------------------------

def _unit(model: NormedSpaceModel, rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.standard_normal((n, model.d))
    nrm = norm(model, u)
    nrm[nrm == 0] = 1.0
    return u / nrm[:, None]


def _snap(a: np.ndarray) -> np.ndarray:
    return np.round(a / GRID) * GRID


def sample_pairs(model: NormedSpaceModel, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Pairs (x, h) with |x|, |h| in [0, 2] in random directions.

    A quarter of the pairs are targeted: h nearly parallel or antiparallel to x,
    h = -2x type antipodal moves, and sign flips of single coordinates, where
    the convexity moduli are extremal.
    """
    rng = np.random.default_rng([11, int(seed)])
    x = _unit(model, rng, n) * rng.uniform(0, 2, (n, 1))
    h = _unit(model, rng, n) * rng.uniform(0, 2, (n, 1))
    k = n // 4
    if k:
        sel = rng.choice(n, size=k, replace=False)
        kind = rng.integers(0, 4, size=k)
        jitter = 10.0 ** rng.uniform(-6, -1, (k, 1)) * rng.standard_normal((k, model.d))
        c = rng.uniform(-3, 1, (k, 1))
        xs = x[sel]
        hs = h[sel].copy()
        par = kind == 0
        hs[par] = c[par] * xs[par] + jitter[par]
        anti = kind == 1
        hs[anti] = -2 * xs[anti] + jitter[anti]
        coord = kind == 2
        flip = xs[coord].copy()
        j = rng.integers(0, model.d, size=flip.shape[0])
        flip[np.arange(flip.shape[0]), j] *= -1
        hs[coord] = c[coord] * (flip - xs[coord])
        axis = kind == 3
        e = np.zeros((axis.sum(), model.d))
        e[np.arange(e.shape[0]), rng.integers(0, model.d, size=e.shape[0])] = 1.0
        xs[axis] = e * rng.uniform(-2, 2, (e.shape[0], 1))
        hs[axis] = e * rng.uniform(-2, 2, (e.shape[0], 1))
        x[sel] = xs
        h[sel] = hs
    return _snap(x), _snap(h)


# -- constant estimation ----------------------------------------------------

@dataclass(frozen=True)
class ConstantEstimate:
    value: float
    n_samples: int
    witness_x: tuple
    witness_y: tuple


def _well_conditioned(terms_abs: np.ndarray, denom: np.ndarray) -> np.ndarray:
    # rounding in the numerator must stay far below the ratio resolution
    return 64 * np.finfo(float).eps * terms_abs <= 1e-9 * denom


def _infimum(ratio: np.ndarray, a: np.ndarray, b: np.ndarray, n_used: int) -> ConstantEstimate:
    i = int(np.argmin(ratio))
    return ConstantEstimate(float(ratio[i]), n_used, tuple(a[i]), tuple(b[i]))


def estimate_delta_tilde(model: NormedSpaceModel, trials: int, seed: int = 0,
                         chunk: int = 250_000) -> ConstantEstimate:
    """Sample infimum of (phi(x+h) - phi(x) - phi'(x)h) / |h|^q over h != 0.

    An infimum over samples bounds the true constant from above.  Samples whose
    numerator would lose more than ~1e-9 relative accuracy to cancellation are
    skipped; for q > 2 the ratio blows up there anyway.
    """
    best = None
    used = 0
    for start in range(0, trials, chunk):
        n = min(chunk, trials - start)
        x, h = sample_pairs(model, n, seed * 1_000_003 + start)
        a, b, c, hq = phi(model, x + h), phi(model, x), phi_prime(model, x, h), phi(model, h)
        keep = (hq > 0) & _well_conditioned(a + b + np.abs(c), hq)
        x, h, hq = x[keep], h[keep], hq[keep]
        num = a[keep] - b[keep] - c[keep]
        est = _infimum(num / hq, x, h, keep.sum())
        used += int(keep.sum())
        if best is None or est.value < best.value:
            best = est
    return ConstantEstimate(best.value, used, best.witness_x, best.witness_y)


def estimate_delta(model: NormedSpaceModel, trials: int, seed: int = 0,
                   chunk: int = 250_000) -> ConstantEstimate:
    """Sample infimum of ((|x|^q + |y|^q)/2 - |(x+y)/2|^q) / |(x-y)/2|^q over x != y.

    Pairs are drawn as (x, y) = (x, x + h) from the same sampler.
    """
    best = None
    used = 0
    for start in range(0, trials, chunk):
        n = min(chunk, trials - start)
        x, h = sample_pairs(model, n, seed * 1_000_003 + start + 7)
        y = x + h
        a, b, c = phi(model, x), phi(model, y), phi(model, (x + y) / 2)
        half_diff = phi(model, (x - y) / 2)
        keep = (half_diff > 0) & _well_conditioned(a + b + c, half_diff)
        x, y, half_diff = x[keep], y[keep], half_diff[keep]
        num = ((a + b) / 2 - c)[keep]
        est = _infimum(num / half_diff, x, y, keep.sum())
        used += int(keep.sum())
        if best is None or est.value < best.value:
            best = est
    return ConstantEstimate(best.value, used, best.witness_x, best.witness_y)


def production_delta_tilde(estimate: float) -> float:
    """Empirical delta_tilde rounded down to 3 decimals (undervaluing keeps checks sound)."""
    return float(np.floor(min(estimate, 1.0) * 1000.0) / 1000.0)


@dataclass(frozen=True)
class PhiPrimeReport:
    passed: bool
    trials: int
    worst_bound_margin: float
    worst_convexity_margin: float
    witness: tuple | None


def check_phi_prime_bounds(model: NormedSpaceModel, trials: int, seed: int = 0) -> PhiPrimeReport:
    """|phi'(x)h| <= q|x|^(q-1)|h| and convexity of h -> phi'(x)h on sampled points.

    Margins are relative to q|x|^(q-1)|h| (floored at 1); negative below -1e-9
    counts as a violation.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x, h1 = sample_pairs(model, trials, seed)
    _, h2 = sample_pairs(model, trials, seed + 1)
    rng = np.random.default_rng([13, int(seed)])
    lam = rng.uniform(0, 1, trials)
    q = model.q
    dp1 = phi_prime(model, x, h1)
    bound = q * norm(model, x) ** (q - 1) * norm(model, h1)
    scale = np.maximum(bound, 1.0)
    bound_margin = (bound - np.abs(dp1)) / scale
    dp2 = phi_prime(model, x, h2)
    mix = phi_prime(model, x, lam[:, None] * h1 + (1 - lam[:, None]) * h2)
    cscale = np.maximum(np.abs(dp1) + np.abs(dp2), 1.0)
    conv_margin = (lam * dp1 + (1 - lam) * dp2 - mix) / cscale
    worst = np.minimum(bound_margin, conv_margin)
    i = int(np.argmin(worst))
    passed = bool(worst[i] >= -1e-9)
    return PhiPrimeReport(passed, trials, float(bound_margin.min()), float(conv_margin.min()),
                          None if passed else (tuple(x[i]), tuple(h1[i]), tuple(h2[i]), float(lam[i])))


# Production delta_tilde values for the l^q models, obtained from
# estimate_delta_tilde with 10^6 samples and rounded down to 3 decimals.
# They are empirical, not proven.
KNOWN_DELTA_TILDE = {
    (Kind.LQ, 2.0): 1.0,
    (Kind.LQ, 3.0): 0.585,
    (Kind.LQ, 4.0): 0.333,
}
