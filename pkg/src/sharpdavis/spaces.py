"""Finite filtered probability spaces and processes on them.

A space is a finite set of sample points with positive masses together with a
refining sequence of partitions ``atoms[n]`` (one integer atom id per point,
ids contiguous from 0 within each time slice).  Processes are stored per atom:
``values[n]`` has shape ``(n_atoms[n],)`` for scalar processes and
``(n_atoms[n], d)`` for vector processes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

MASS_TOL = 1e-12
MARTINGALE_TOL = 1e-9


class SpaceError(ValueError):
    """Raised for malformed spaces or processes that do not fit a space."""


@dataclass(frozen=True, eq=False)
class FilteredSpace:
    masses: np.ndarray
    atoms: np.ndarray

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        atoms = np.asarray(self.atoms, dtype=np.int64)
        if masses.ndim != 1 or masses.size == 0:
            raise SpaceError("masses must be a non-empty 1-d array")
        if atoms.ndim != 2 or atoms.shape[1] != masses.size:
            raise SpaceError("atoms must have shape (horizon + 1, n_points)")
        if not np.all(np.isfinite(masses)) or np.any(masses <= 0):
            raise SpaceError("masses must be finite and strictly positive")
        if abs(masses.sum() - 1.0) > MASS_TOL:
            raise SpaceError(f"masses sum to {masses.sum()!r}, not 1")
        for n, row in enumerate(atoms):
            ids = np.unique(row)
            if ids[0] != 0 or ids[-1] != ids.size - 1:
                raise SpaceError(f"atom ids at time {n} are not contiguous from 0")
        for n in range(atoms.shape[0] - 1):
            # refinement: the child atom determines the parent atom
            parent = np.full(atoms[n + 1].max() + 1, -1)
            parent[atoms[n + 1]] = atoms[n]
            if np.any(parent[atoms[n + 1]] != atoms[n]):
                raise SpaceError(f"partition at time {n + 1} does not refine time {n}")
        masses.setflags(write=False)
        atoms.setflags(write=False)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "atoms", atoms)

    @property
    def horizon(self) -> int:
        return self.atoms.shape[0] - 1

    @property
    def n_points(self) -> int:
        return self.masses.size

    @cached_property
    def n_atoms(self) -> tuple[int, ...]:
        return tuple(int(row.max()) + 1 for row in self.atoms)

    @cached_property
    def atom_masses(self) -> tuple[np.ndarray, ...]:
        return tuple(np.bincount(row, weights=self.masses, minlength=k)
                     for row, k in zip(self.atoms, self.n_atoms))

    @cached_property
    def parents(self) -> tuple[np.ndarray, ...]:
        """``parents[n][a]`` is the time-n atom containing time-(n+1) atom ``a``."""
        out = []
        for n in range(self.horizon):
            p = np.empty(self.n_atoms[n + 1], dtype=np.int64)
            p[self.atoms[n + 1]] = self.atoms[n]
            out.append(p)
        return tuple(out)

    def atom_average(self, point_values, n: int) -> np.ndarray:
        """Mass-weighted average of per-point values over each time-n atom."""
        vals = np.asarray(point_values, dtype=float)
        k = self.n_atoms[n]
        wv = vals * self.masses.reshape((-1,) + (1,) * (vals.ndim - 1))
        sums = np.zeros((k,) + vals.shape[1:])
        np.add.at(sums, self.atoms[n], wv)
        return sums / self.atom_masses[n].reshape((-1,) + (1,) * (vals.ndim - 1))

    def expectation(self, point_values) -> float | np.ndarray:
        vals = np.asarray(point_values, dtype=float)
        return np.tensordot(self.masses, vals, axes=(0, 0))


@dataclass(frozen=True, eq=False)
class AdaptedProcess:
    """Per-atom values of an adapted process; ``values[n]`` is indexed by atom id."""

    values: tuple

    def __post_init__(self):
        vals = tuple(np.asarray(v, dtype=float) for v in self.values)
        for v in vals:
            v.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def is_vector(self) -> bool:
        return self.values[0].ndim == 2

    @property
    def dim(self) -> int:
        return self.values[0].shape[1] if self.is_vector else 1

    def check_fits(self, space: FilteredSpace) -> None:
        if len(self.values) != space.horizon + 1:
            raise SpaceError(f"process has {len(self.values)} time slices, "
                             f"space has {space.horizon + 1}")
        for n, v in enumerate(self.values):
            if v.ndim not in (1, 2) or v.shape[0] != space.n_atoms[n]:
                raise SpaceError(f"process slice {n} has shape {v.shape}, "
                                 f"expected ({space.n_atoms[n]}, ...)")

    def on_points(self, space: FilteredSpace) -> np.ndarray:
        """Values along every path: shape ``(N + 1, P)`` or ``(N + 1, P, d)``."""
        self.check_fits(space)
        return np.stack([v[a] for v, a in zip(self.values, space.atoms)])

    @classmethod
    def from_points(cls, space: FilteredSpace, point_values) -> "AdaptedProcess":
        """Build from per-point values, checking that each slice is constant on atoms."""
        pv = np.asarray(point_values, dtype=float)
        out = []
        for n, a in enumerate(space.atoms):
            slab = np.zeros((space.n_atoms[n],) + pv.shape[2:])
            slab[a] = pv[n]
            if not np.array_equal(slab[a], pv[n]):
                raise SpaceError(f"values at time {n} are not constant on atoms")
            out.append(slab)
        return cls(tuple(out))

    def scaled(self, c: float) -> "AdaptedProcess":
        return AdaptedProcess(tuple(c * v for v in self.values))


# A martingale is an adapted process with the conditional-mean property; the
# type is kept as an alias and the property is checked by validate_martingale.
Martingale = AdaptedProcess


@dataclass(frozen=True)
class MartingaleReport:
    passed: bool
    worst_error: float
    worst_time: int
    worst_atom: int
    tol: float


@dataclass(frozen=True, eq=False)
class PathStatistics:
    """Per-path increments and running maxima; arrays are indexed ``[n, point]``.

    ``df[0]`` is zero by convention so that ``df[n] = f[n] - f[n - 1]`` for n >= 1.
    """

    masses: np.ndarray
    f: np.ndarray
    df: np.ndarray
    fnorm: np.ndarray
    dfnorm: np.ndarray
    fstar: np.ndarray
    w: np.ndarray
    wstar: np.ndarray

    @property
    def horizon(self) -> int:
        return self.f.shape[0] - 1

    def expect(self, point_values) -> float:
        return float(np.dot(self.masses, point_values))


# -- construction ----------------------------------------------------------

def build_tree(branching: Sequence[int], masses=None, initial: int = 1) -> FilteredSpace:
    """Regular tree space: ``initial`` atoms at time 0, then ``branching[n]`` children each step.

    Points are enumerated lexicographically by their branch path.  Default masses
    are uniform within every split.
    """
    branching = [int(b) for b in branching]
    if initial < 1 or any(b < 1 for b in branching):
        raise SpaceError("branching factors must be >= 1")
    sizes = [initial] + branching
    n_points = int(np.prod(sizes))
    atoms = np.empty((len(branching) + 1, n_points), dtype=np.int64)
    idx = np.arange(n_points)
    for n in range(len(branching) + 1):
        atoms[n] = idx // int(np.prod(sizes[n + 1:]))
    if masses is None:
        masses = np.full(n_points, 1.0 / n_points)
    else:
        masses = np.asarray(masses, dtype=float)
        if masses.shape != (n_points,):
            raise SpaceError(f"expected {n_points} masses, got {masses.shape}")
    return FilteredSpace(masses, atoms)


def comb_space(masses) -> FilteredSpace:
    """Space on points 1..N+1 where time n reveals the singletons {1},..,{n}.

    The last point plays the role of the tail event; this is the filtration of
    the sharpness construction.
    """
    masses = np.asarray(masses, dtype=float)
    horizon = masses.size - 1
    omega = np.arange(masses.size)
    atoms = np.stack([np.minimum(omega, n) for n in range(horizon + 1)])
    return FilteredSpace(masses, atoms)


# -- conditional expectation and martingales --------------------------------

def conditional_expectation(space: FilteredSpace, terminal, n: int) -> np.ndarray:
    """E(terminal | F_n) as per-atom values at time n."""
    terminal = np.asarray(terminal, dtype=float)
    if terminal.shape[0] != space.n_points:
        raise SpaceError(f"terminal values have {terminal.shape[0]} points, "
                         f"space has {space.n_points}")
    if not 0 <= n <= space.horizon:
        raise SpaceError(f"time {n} outside 0..{space.horizon}")
    return space.atom_average(terminal, n)


def doob_process(space: FilteredSpace, terminal) -> AdaptedProcess:
    """The martingale n -> E(terminal | F_n)."""
    return AdaptedProcess(tuple(conditional_expectation(space, terminal, n)
                                for n in range(space.horizon + 1)))


def validate_martingale(space: FilteredSpace, f: AdaptedProcess,
                        tol: float = MARTINGALE_TOL) -> MartingaleReport:
    """Check value(A) = mass-weighted mean over the children of A, for all atoms A.

    The error at an atom is measured relative to the largest magnitude among the
    atom and its children.
    """
    f.check_fits(space)
    worst = (0.0, -1, -1)
    for n in range(space.horizon):
        child = f.values[n + 1]
        cm = space.atom_masses[n + 1]
        k = space.n_atoms[n]
        shape = (-1,) + (1,) * (child.ndim - 1)
        sums = np.zeros((k,) + child.shape[1:])
        np.add.at(sums, space.parents[n], child * cm.reshape(shape))
        mean = sums / space.atom_masses[n].reshape(shape)
        parent_val = f.values[n]
        err = np.abs(mean - parent_val)
        mag = np.abs(child)
        child_mag = np.zeros((k,) + child.shape[1:])
        np.maximum.at(child_mag, space.parents[n], mag)
        scale = np.maximum(np.abs(parent_val), child_mag)
        if err.ndim == 2:
            err = err.max(axis=1)
            scale = scale.max(axis=1)
        rel = err / np.maximum(scale, np.finfo(float).tiny)
        rel[err == 0] = 0.0
        a = int(np.argmax(rel))
        if rel[a] > worst[0]:
            worst = (float(rel[a]), n, a)
    return MartingaleReport(worst[0] <= tol, worst[0], worst[1], worst[2], tol)


def path_statistics(space: FilteredSpace, f: AdaptedProcess, w: AdaptedProcess | None,
                    norm: Callable[[np.ndarray], np.ndarray]) -> PathStatistics:
    """Increments and running maxima of ``|f|`` and ``w`` along every path.

    ``norm`` maps an array ``(..., d)`` to its norms (scalar processes are
    treated as d = 1).  ``w=None`` means ``w = 1``.
    """
    fp = f.on_points(space)
    if fp.ndim == 2:
        fp = fp[..., None]
    df = np.zeros_like(fp)
    df[1:] = fp[1:] - fp[:-1]
    fnorm = norm(fp)
    dfnorm = norm(df)
    if w is None:
        wp = np.ones(fnorm.shape)
    else:
        wp = w.on_points(space)
        if wp.ndim != 2:
            raise SpaceError("weights must be scalar")
    return PathStatistics(
        masses=space.masses, f=fp, df=df, fnorm=fnorm, dfnorm=dfnorm,
        fstar=np.maximum.accumulate(fnorm, axis=0), w=wp,
        wstar=np.maximum.accumulate(wp, axis=0),
    )


# -- random generation -----------------------------------------------------

def _rng(seed, tag: int) -> np.random.Generator:
    return np.random.default_rng([tag, int(seed)])


def random_martingale(space: FilteredSpace, d: int, seed: int, scale: float = 1.0,
                      start_at_zero: bool = False) -> AdaptedProcess:
    """Sample terminal vectors and back-propagate conditional expectations.

    The martingale property therefore holds by construction.  With
    ``start_at_zero`` the F_0-measurable start is subtracted, giving f_0 = 0.
    """
    if d < 1:
        raise SpaceError("dimension must be >= 1")
    rng = _rng(seed, 1)
    terminal = rng.standard_normal((space.n_points, d))
    # heavy-tailed magnitudes so that running maxima change often along paths
    terminal *= scale * np.exp(rng.standard_normal((space.n_points, 1)))
    f = doob_process(space, terminal)
    if start_at_zero:
        pts = f.on_points(space)
        f = AdaptedProcess.from_points(space, pts - pts[0])
    return f


def random_weights(space: FilteredSpace, seed: int, scale: float = 1.0) -> AdaptedProcess:
    """I.i.d. log-normal weights per (time, atom): adapted, positive, not a martingale."""
    rng = _rng(seed, 2)
    return AdaptedProcess(tuple(np.exp(scale * rng.standard_normal(k))
                                for k in space.n_atoms))


def random_terminal_weight(space: FilteredSpace, seed: int, scale: float = 1.0) -> np.ndarray:
    rng = _rng(seed, 3)
    return np.exp(scale * rng.standard_normal(space.n_points))


def random_space(seed: int, max_depth: int = 6, max_branching: int = 3,
                 max_initial: int = 2) -> FilteredSpace:
    """Tree with random depth, per-level branching and Dirichlet masses."""
    rng = _rng(seed, 0)
    depth = int(rng.integers(1, max_depth + 1))
    branching = rng.integers(1, max_branching + 1, size=depth)
    initial = int(rng.integers(1, max_initial + 1))
    n_points = initial * int(np.prod(branching))
    masses = rng.dirichlet(np.full(n_points, 1.0))
    masses = masses / masses.sum()
    return build_tree(branching, masses=masses, initial=initial)


# -- serialization -----------------------------------------------------------

def space_to_dict(space: FilteredSpace, processes: Mapping[str, AdaptedProcess] | None = None) -> dict:
    doc = {
        "horizon": space.horizon,
        "points": [{"mass": float(m), "atomIds": [int(a) for a in space.atoms[:, i]]}
                   for i, m in enumerate(space.masses)],
        "processes": {},
    }
    for name, proc in (processes or {}).items():
        proc.check_fits(space)
        doc["processes"][name] = [v.tolist() for v in proc.values]
    return doc


def space_from_dict(doc: Mapping) -> tuple[FilteredSpace, dict[str, AdaptedProcess]]:
    pts = doc["points"]
    masses = np.array([p["mass"] for p in pts], dtype=float)
    atoms = np.array([p["atomIds"] for p in pts], dtype=np.int64).T
    if atoms.shape[0] != doc["horizon"] + 1:
        raise SpaceError("atomIds length does not match horizon")
    space = FilteredSpace(masses, atoms)
    procs = {}
    for name, vals in doc.get("processes", {}).items():
        proc = AdaptedProcess(tuple(np.asarray(v, dtype=float) for v in vals))
        proc.check_fits(space)
        procs[name] = proc
    return space, procs


def dumps_space(space: FilteredSpace, processes=None) -> str:
    return json.dumps(space_to_dict(space, processes), indent=1)


def loads_space(text: str):
    return space_from_dict(json.loads(text))
