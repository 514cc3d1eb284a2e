"""Zero sets of atom transforms and sample-set construction.

For a target atom ``r`` the usable sample points are the common zeros of all
other atoms' transforms at which the target's transform stays away from zero.
Sampling there reduces the joint reconstruction problem to one system per
atom.  The catalog's zero sets are exact lattices (1D) or unions of line
families (2D), so the intersections are computed arithmetically and then
verified numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyDecouplingSetError,
    InsufficientPointsError,
    NoBracketError,
    NoProgressionError,
)
from .signal_model import SignalAtom, atom_ft

DEFAULT_ZERO_TOL = 1e-9
DEFAULT_NONZERO_TOL = 1e-6
DEFAULT_WINDOW_EDGE = 20.0 * np.pi


@dataclass(frozen=True)
class Lattice1D:
    """Points ``offset + m*step`` for integer m, optionally excluding 0."""

    step: float
    offset: float = 0.0
    exclude_zero: bool = False

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("lattice step must be > 0")

    def contains(self, s: float, tol: float = 1e-9) -> bool:
        m = round((s - self.offset) / self.step)
        if self.exclude_zero and abs(self.offset + m * self.step) <= tol:
            return False
        return abs(self.offset + m * self.step - s) <= tol

    def points_in(self, lo: float, hi: float) -> np.ndarray:
        m_lo = math.ceil((lo - self.offset) / self.step - 1e-12)
        m_hi = math.floor((hi - self.offset) / self.step + 1e-12)
        pts = self.offset + self.step * np.arange(m_lo, m_hi + 1)
        if self.exclude_zero:
            pts = pts[np.abs(pts) > 1e-12]
        return pts


@dataclass(frozen=True)
class LineFamily2D:
    """Lines ``normal . s = offset + m*step`` for integer m."""

    normal: tuple
    step: float
    offset: float = 0.0
    exclude_zero: bool = False

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(float(c) for c in self.normal))
        if self.step <= 0:
            raise ValueError("line family step must be > 0")

    def offsets_in(self, window: "Window") -> np.ndarray:
        lo, hi = window.bounds()
        n = np.asarray(self.normal)
        cmin = float(np.minimum(n * lo, n * hi).sum())
        cmax = float(np.maximum(n * lo, n * hi).sum())
        lat = Lattice1D(self.step, self.offset, self.exclude_zero)
        return lat.points_in(cmin, cmax)


@dataclass(frozen=True)
class ZeroSetDesc:
    """Exact description of where an atom's transform vanishes.

    ``variant`` is one of ``lattice1d``, ``lines2d`` or ``empty``.
    """

    variant: str
    lattice: Lattice1D | None = None
    families: tuple = ()

    @property
    def is_empty(self) -> bool:
        return self.variant == "empty"


def zero_set(atom: SignalAtom) -> ZeroSetDesc:
    """Exact zero-set description for a catalog atom."""
    if atom.kind == "box1d":
        (b,) = atom.params
        return ZeroSetDesc("lattice1d", lattice=Lattice1D(np.pi / b, 0.0, True))
    if atom.kind == "delta_pair":
        (c,) = atom.params
        return ZeroSetDesc(
            "lattice1d", lattice=Lattice1D(np.pi / c, np.pi / (2.0 * c), False)
        )
    if atom.kind in ("dirac", "gaussian"):
        return ZeroSetDesc("empty")
    if atom.kind == "box2d":
        b1, b2 = atom.params
        return ZeroSetDesc(
            "lines2d",
            families=(
                LineFamily2D((1.0, 0.0), np.pi / b1, 0.0, True),
                LineFamily2D((0.0, 1.0), np.pi / b2, 0.0, True),
            ),
        )
    # rotated_square: zeros on the two diagonal line families
    (d,) = atom.params
    step = 2.0 * np.sqrt(2.0) * np.pi / d
    return ZeroSetDesc(
        "lines2d",
        families=(
            LineFamily2D((1.0, 1.0), step, 0.0, True),
            LineFamily2D((1.0, -1.0), step, 0.0, True),
        ),
    )


@dataclass(frozen=True)
class Window:
    """Axis-aligned cube: ``center`` plus/minus ``edge/2`` per coordinate."""

    center: tuple
    edge: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.edge <= 0:
            raise ValueError("window edge must be > 0")

    @property
    def dimension(self) -> int:
        return len(self.center)

    def bounds(self):
        c = np.asarray(self.center)
        h = 0.5 * self.edge
        return c - h, c + h

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = self.bounds()
        return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)


def default_window(dimension: int, edge: float = DEFAULT_WINDOW_EDGE) -> Window:
    return Window((0.0,) * dimension, edge)


@dataclass(frozen=True)
class DecouplingSet:
    """Verified sample points for one target atom inside a window."""

    target_index: int
    points: np.ndarray  # (m, n), lexicographically sorted
    window: Window
    provenance: str = "exact"
    zero_tol: float = DEFAULT_ZERO_TOL
    nonzero_tol: float = DEFAULT_NONZERO_TOL

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class SampleSet:
    """Ordered, pairwise distinct frequency vectors."""

    frequencies: np.ndarray  # (m, n)
    source: str = "manual"

    def __post_init__(self):
        arr = np.asarray(self.frequencies, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        object.__setattr__(self, "frequencies", arr)
        if len(arr) > 1:
            uniq = {tuple(np.round(p, 12)) for p in arr}
            if len(uniq) != len(arr):
                raise ValueError("sample frequencies must be pairwise distinct")

    def __len__(self) -> int:
        return len(self.frequencies)


def _lex_sort(points: np.ndarray) -> np.ndarray:
    if len(points) == 0:
        return points
    order = np.lexsort(points.T[::-1])
    return points[order]


def _verify_points(atoms, target_index, points, zero_tol, nonzero_tol):
    """Keep points passing the numeric membership inequalities."""
    if len(points) == 0:
        return points
    keep = np.ones(len(points), dtype=bool)
    coords = points if atoms[target_index].dimension > 1 else points[:, 0]
    for ell, atom in enumerate(atoms):
        vals = np.abs(atom_ft(atom, coords))
        if ell == target_index:
            keep &= vals > nonzero_tol
        else:
            keep &= vals < zero_tol
    return points[keep]


def _decoupling_1d(atoms, target_index, window, zero_tol, nonzero_tol):
    lattices = []
    for ell, atom in enumerate(atoms):
        if ell == target_index:
            continue
        desc = zero_set(atom)
        if desc.is_empty:
            raise EmptyDecouplingSetError(
                f"atom {ell} ({atom.label()}) has no transform zeros"
            )
        lattices.append(desc.lattice)
    lo, hi = window.bounds()
    # enumerate the sparsest lattice, then intersect with the others
    lattices.sort(key=lambda lat: -lat.step)
    candidates = lattices[0].points_in(float(lo[0]), float(hi[0]))
    for lat in lattices[1:]:
        candidates = np.array(
            [s for s in candidates if lat.contains(s, tol=1e-9)], dtype=float
        )
    pts = candidates[:, None]
    pts = _verify_points(atoms, target_index, pts, zero_tol, nonzero_tol)
    return pts


def _decoupling_2d(atoms, target_index, window, zero_tol, nonzero_tol):
    families = []
    for ell, atom in enumerate(atoms):
        if ell == target_index:
            continue
        desc = zero_set(atom)
        if desc.is_empty:
            raise EmptyDecouplingSetError(
                f"atom {ell} ({atom.label()}) has no transform zeros"
            )
        families.extend(desc.families)
    # candidates: all transversal intersections among off-target zero lines
    chunks = []
    for i in range(len(families)):
        for j in range(i + 1, len(families)):
            f1, f2 = families[i], families[j]
            a = np.array([f1.normal, f2.normal], dtype=float)
            if abs(np.linalg.det(a)) < 1e-12:
                continue  # parallel families: no isolated intersection points
            inv = np.linalg.inv(a)
            c1 = f1.offsets_in(window)
            c2 = f2.offsets_in(window)
            if len(c1) == 0 or len(c2) == 0:
                continue
            g1, g2 = np.meshgrid(c1, c2, indexing="ij")
            rhs = np.stack([g1.ravel(), g2.ravel()], axis=1)
            chunks.append(rhs @ inv.T)
    if not chunks:
        raise EmptyDecouplingSetError("off-target zero lines have no crossings")
    pts = np.concatenate(chunks, axis=0)
    pts = pts[window.contains(pts)]
    if len(pts):
        # deduplicate on a fine grid
        keys = np.round(pts / 1e-9).astype(np.int64)
        _, idx = np.unique(keys, axis=0, return_index=True)
        pts = pts[np.sort(idx)]
    pts = _verify_points(atoms, target_index, pts, zero_tol, nonzero_tol)
    return pts


def decoupling_set(
    atoms,
    target_index: int,
    window: Window | None = None,
    zero_tol: float = DEFAULT_ZERO_TOL,
    nonzero_tol: float = DEFAULT_NONZERO_TOL,
) -> DecouplingSet:
    """Finite verified sample set for ``target_index`` inside ``window``.

    Every returned point ``s`` satisfies ``|FT(f_ell)(s)| < zero_tol`` for all
    off-target atoms and ``|FT(f_r)(s)| > nonzero_tol`` for the target (the
    assembled sample ratios divide by the latter value).

    Raises :class:`EmptyDecouplingSetError` when no point survives, e.g. when
    an off-target atom has a zero-free transform.
    """
    atoms = list(atoms)
    if not 0 <= target_index < len(atoms):
        raise IndexError(f"target_index {target_index} out of range")
    dims = {a.dimension for a in atoms}
    if len(dims) != 1:
        raise DimensionMismatchError(f"atoms mix dimensions {sorted(dims)}")
    n = dims.pop()
    if window is None:
        window = default_window(n)
    if window.dimension != n:
        raise DimensionMismatchError(
            f"window dimension {window.dimension} does not match atoms ({n})"
        )
    if n == 1:
        pts = _decoupling_1d(atoms, target_index, window, zero_tol, nonzero_tol)
    else:
        pts = _decoupling_2d(atoms, target_index, window, zero_tol, nonzero_tol)
    if len(pts) == 0:
        raise EmptyDecouplingSetError(
            f"no verified sample points for atom {target_index} in the window"
        )
    return DecouplingSet(
        target_index=target_index,
        points=_lex_sort(pts),
        window=window,
        provenance="exact",
        zero_tol=zero_tol,
        nonzero_tol=nonzero_tol,
    )


@dataclass(frozen=True)
class TargetFeasibility:
    target_index: int
    status: str  # feasible | infeasible_empty_zero_set | infeasible_in_general
    detail: str = ""


@dataclass(frozen=True)
class FeasibilityReport:
    num_atoms: int
    dimension: int
    entries: tuple = field(default_factory=tuple)

    @property
    def all_feasible(self) -> bool:
        return all(e.status == "feasible" for e in self.entries)


def feasibility(atoms, dimension: int | None = None) -> FeasibilityReport:
    """Check which targets admit sample points, before any enumeration.

    With transversal zero hypersurfaces the (k-1)-fold intersection is empty
    once ``k > n + 1``, so those targets are flagged infeasible in general.
    A zero-free off-target transform blocks a target outright.
    """
    atoms = list(atoms)
    k = len(atoms)
    n = atoms[0].dimension if atoms else (dimension or 1)
    if dimension is not None and dimension != n:
        raise DimensionMismatchError(
            f"stated dimension {dimension} does not match atoms ({n})"
        )
    entries = []
    for r in range(k):
        blockers = [
            ell
            for ell, atom in enumerate(atoms)
            if ell != r and zero_set(atom).is_empty
        ]
        if blockers:
            entries.append(
                TargetFeasibility(
                    r,
                    "infeasible_empty_zero_set",
                    f"off-target atom(s) {blockers} have zero-free transforms",
                )
            )
        elif k > n + 1:
            entries.append(
                TargetFeasibility(
                    r,
                    "infeasible_in_general",
                    f"k={k} exceeds n+1={n + 1}: transversal zero sets have "
                    "empty common intersection",
                )
            )
        else:
            entries.append(TargetFeasibility(r, "feasible"))
    return FeasibilityReport(num_atoms=k, dimension=n, entries=tuple(entries))


def refine_zero(
    atom: SignalAtom,
    approx,
    tol: float = 1e-12,
    search_radius: float | None = None,
    direction=None,
):
    """Bisection refinement of a transform zero near ``approx``.

    For 1D atoms ``approx`` is a scalar; for 2D atoms the search runs along
    ``direction`` from ``approx``.  The transform of every catalog atom is
    real-valued, so a bracketing sign change pins the zero.  Raises
    :class:`NoBracketError` when no sign change exists within the radius.
    """
    if atom.dimension == 1:
        origin = float(np.asarray(approx).reshape(()))

        def f(t):
            return float(np.real(atom_ft(atom, origin + t)))

        if search_radius is None:
            desc = zero_set(atom)
            search_radius = 0.6 * desc.lattice.step if desc.lattice else 1.0
    else:
        if direction is None:
            raise ValueError("2D refinement needs a search direction")
        origin = np.asarray(approx, dtype=float)
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)

        def f(t):
            return float(np.real(atom_ft(atom, origin + t * d)))

        if search_radius is None:
            search_radius = 1.0

    probes = np.linspace(-search_radius, search_radius, 129)
    vals = [f(t) for t in probes]
    bracket = None
    best = None
    for i in range(len(probes) - 1):
        if vals[i] == 0.0:
            bracket = (probes[i], probes[i])
            break
        if vals[i] * vals[i + 1] < 0:
            cand = (probes[i], probes[i + 1])
            mid = 0.5 * (cand[0] + cand[1])
            if best is None or abs(mid) < abs(best):
                bracket, best = cand, mid
    if bracket is None:
        raise NoBracketError(
            f"no sign change of the {atom.label()} transform within "
            f"radius {search_radius:g} of the initial guess"
        )
    a, b = bracket
    fa = f(a)
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if abs(fm) < tol or (b - a) < 1e-16 * (1.0 + abs(mid)):
            break
        if fa * fm <= 0:
            b = mid
        else:
            a, fa = mid, fm
    mid = 0.5 * (a + b)
    if atom.dimension == 1:
        result = origin + mid
        if abs(atom_ft(atom, result)) >= tol:
            raise NoBracketError("bisection did not reach the requested tolerance")
        return float(result)
    result = origin + mid * d
    if abs(atom_ft(atom, result)) >= tol:
        raise NoBracketError("bisection did not reach the requested tolerance")
    return result


def _find_progression(points: np.ndarray, m: int, tol: float = 1e-9):
    """Smallest-step arithmetic progression of length m, preferring small
    bases near the origin; None if there is none."""
    npts = len(points)
    keys = {tuple(np.round(p / tol).astype(np.int64)): i for i, p in enumerate(points)}

    def member(p):
        return tuple(np.round(p / tol).astype(np.int64)) in keys

    best = None
    for i in range(npts):
        for j in range(npts):
            if i == j:
                continue
            h = points[j] - points[i]
            hn = np.linalg.norm(h)
            if hn < tol:
                continue
            run = [points[i]]
            p = points[i] + h
            while member(p) and len(run) < m:
                run.append(p)
                p = p + h
            if len(run) < m:
                continue
            base = run[0]
            key = (round(hn / tol), round(np.linalg.norm(base) / tol), tuple(base))
            if best is None or key < best[0]:
                best = (key, np.asarray(run[:m]))
    return None if best is None else best[1]


def choose_samples(decoupling: DecouplingSet, m: int | None, strategy: str) -> SampleSet:
    """Select sample frequencies from a decoupling set.

    Strategies: ``closest_to_origin`` (m smallest-norm points, ties broken
    lexicographically), ``consecutive_progression`` (an m-term arithmetic
    progression within the set, smallest step then closest to the origin) and
    ``all``.
    """
    pts = decoupling.points
    src = f"decoupling_set[{decoupling.target_index}]"
    if strategy == "all":
        return SampleSet(_lex_sort(pts), source=src)
    if m is None:
        raise ValueError(f"strategy {strategy!r} needs a point count")
    if strategy == "closest_to_origin":
        if len(pts) < m:
            raise InsufficientPointsError(
                f"asked for {m} points but the set has {len(pts)}"
            )
        norms = np.linalg.norm(pts, axis=1)
        order = np.lexsort(tuple(pts.T[::-1]) + (np.round(norms / 1e-12),))
        chosen = pts[order][:m]
        return SampleSet(_lex_sort(chosen), source=src)
    if strategy == "consecutive_progression":
        if len(pts) < m:
            raise InsufficientPointsError(
                f"asked for {m} points but the set has {len(pts)}"
            )
        run = _find_progression(pts, m)
        if run is None:
            raise NoProgressionError(
                f"no {m}-term arithmetic progression inside the set"
            )
        return SampleSet(run, source=src)
    raise ValueError(f"unknown strategy {strategy!r}")


def points_to_rows(points: np.ndarray):
    """CSV-ready rows, one per sample point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return [list(map(float, p)) for p in pts]


def decoupling_to_json_dict(ds: DecouplingSet) -> dict:
    return {
        "target_index": ds.target_index,
        "provenance": ds.provenance,
        "zero_tol": ds.zero_tol,
        "nonzero_tol": ds.nonzero_tol,
        "window": {"center": list(ds.window.center), "edge": ds.window.edge},
        "points": points_to_rows(ds.points),
    }
