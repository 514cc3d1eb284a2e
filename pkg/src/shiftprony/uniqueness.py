"""Machine-checkable uniqueness evidence for exponential-sum recovery.

Three certificate families:

* a 1D shortest-window criterion: the tightest interval holding exactly 2N
  sample points bounds the shift range on which two distinct solutions would
  need more zeros than an order-2N exponential polynomial can have there;
* a covering-number criterion: a sample set whose covering number at some
  resolution exceeds a configured zero-set entropy bound admits at most one
  solution with positive real nodes;
* a grid-perturbation corollary of the covering criterion for near-regular
  sample sets.

The constant in the entropy bound is configuration, not code: certificates
are relative to the configured value (default 1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientPointsError, NotANetError
from .prony import StandardPronySystem, solve_standard_prony


@dataclass(frozen=True)
class CoveringEstimate:
    """Bounds on the minimal number of closed epsilon-balls covering a set."""

    epsilon: float
    lower: int
    upper: int
    exact: bool


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


def covering_number(points, epsilon: float) -> CoveringEstimate:
    """Covering number of a finite set by closed epsilon-balls.

    In 1D the sorted greedy interval cover is provably minimal, so the result
    is exact.  In higher dimensions a greedy 2-epsilon-separated subset gives
    the lower bound and a greedy cover with balls centered on set points gives
    the upper bound.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    pts = _as_points(points)
    m = len(pts)
    if m == 0:
        return CoveringEstimate(float(epsilon), 0, 0, True)
    if pts.shape[1] == 1:
        xs = np.sort(pts[:, 0])
        count = 0
        i = 0
        while i < m:
            reach = xs[i] + 2.0 * epsilon
            count += 1
            while i < m and xs[i] <= reach + 1e-15 * max(1.0, abs(reach)):
                i += 1
        return CoveringEstimate(float(epsilon), count, count, True)
    order = np.lexsort(pts.T[::-1])
    spts = pts[order]
    kept = []
    for p in spts:
        if all(np.linalg.norm(p - q) > 2.0 * epsilon for q in kept):
            kept.append(p)
    lower = len(kept)
    uncovered = np.ones(m, dtype=bool)
    upper = 0
    while np.any(uncovered):
        best_idx, best_cover = -1, None
        for i in range(m):
            if not uncovered[i]:
                continue
            cover = uncovered & (np.linalg.norm(spts - spts[i], axis=1) <= epsilon)
            if best_cover is None or cover.sum() > best_cover.sum():
                best_idx, best_cover = i, cover
        uncovered &= ~best_cover
        upper += 1
    return CoveringEstimate(float(epsilon), lower, upper, lower == upper)


def epsilon_entropy(points, epsilon: float):
    """Binary log of the covering-number bounds."""
    est = covering_number(points, epsilon)
    lo = float(np.log2(est.lower)) if est.lower > 0 else float("-inf")
    hi = float(np.log2(est.upper)) if est.upper > 0 else float("-inf")
    return lo, hi


@dataclass(frozen=True)
class KhovanskiConstant:
    """Configured constant for the zero-set entropy bound.

    The exact fewnomial-theoretic value is not computed here; certificates are
    relative to the configured table (keyed by order and dimension) with a
    fallback default.  All values must be >= 1.
    """

    default: float = 1.0
    table: tuple = ()  # ((d, n, value), ...)

    def __post_init__(self):
        entries = tuple((int(d), int(n), float(v)) for d, n, v in self.table)
        object.__setattr__(self, "table", entries)
        if self.default < 1 or any(v < 1 for _, _, v in entries):
            raise ValueError("constant values must be >= 1")

    def value(self, d: int, n: int) -> float:
        for dd, nn, v in self.table:
            if dd == d and nn == n:
                return v
        return self.default


def entropy_bound(d: int, n: int, edge: float, epsilon: float, constant=None) -> float:
    """Upper bound C(d, n) * (edge/epsilon)**(n-1) on the covering number of
    an order-d exponential polynomial's zero set inside a cube."""
    if not 0 < epsilon < edge:
        raise ValueError("need 0 < epsilon < edge")
    constant = constant or KhovanskiConstant()
    return constant.value(d, n) * (edge / epsilon) ** (n - 1)


@dataclass(frozen=True)
class SpanCertificate:
    """Verdict of the covering-number uniqueness test.

    ``certified_unique`` means some resolution separated the sample set's
    covering number from the configured entropy bound; the guarantee covers
    solutions whose nodes have all coordinates positive and real.
    """

    verdict: str
    epsilon_star: float | None
    covering_lower: int
    threshold: float
    edge: float
    order: int
    dimension: int
    constant_value: float
    scope: str = "positive real nodes only"


def _epsilon_candidates(pts: np.ndarray, edge: float, max_quantiles: int = 32) -> list:
    cands = {edge / 2.0**j for j in range(1, 21)}
    m = len(pts)
    if m >= 2:
        gram = pts @ pts.T
        sq = np.diag(gram)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * gram, 0.0)
        dists = np.sqrt(d2[np.triu_indices(m, k=1)])
        dists = np.unique(dists[dists > 0])
        if len(dists) > max_quantiles:
            idx = np.unique(
                np.round(np.linspace(0, len(dists) - 1, max_quantiles)).astype(int)
            )
            quantiles = dists[idx]
        else:
            quantiles = dists
        # always keep the extreme gaps; nudge halves below packing breakpoints
        quantiles = np.union1d(quantiles, [dists[0], dists[-1]])
        for d in quantiles:
            cands.add(float(d))
            cands.add(0.5 * float(d))
            cands.add(0.5 * float(d) * (1.0 - 1e-9))
    return sorted(c for c in cands if 0 < c < edge)


def span_certificate(
    points, edge: float, order: int, dimension: int, constant=None
) -> SpanCertificate:
    """Search resolutions for one at which the set out-covers the bound.

    Candidate epsilons are the pairwise distances of the set (and halves,
    nudged below the packing breakpoints) plus dyadic fractions of the cube
    edge; the covering number of a finite set only changes at such
    combinatorial breakpoints.
    """
    constant = constant or KhovanskiConstant()
    pts = _as_points(points)
    cval = constant.value(2 * order, dimension)
    best = None
    for eps in _epsilon_candidates(pts, edge) if len(pts) else []:
        est = covering_number(pts, eps)
        bound = entropy_bound(2 * order, dimension, edge, eps, constant)
        margin = est.lower - bound
        if best is None or margin > best[0]:
            best = (margin, eps, est.lower, bound)
    if best is not None and best[0] > 0:
        _, eps, lower, bound = best
        return SpanCertificate(
            "certified_unique", float(eps), int(lower), float(bound),
            float(edge), int(order), int(dimension), float(cval),
        )
    if best is None:
        return SpanCertificate(
            "not_certified", None, 0, float("inf"),
            float(edge), int(order), int(dimension), float(cval),
        )
    _, eps, lower, bound = best
    return SpanCertificate(
        "not_certified", float(eps), int(lower), float(bound),
        float(edge), int(order), int(dimension), float(cval),
    )


@dataclass(frozen=True)
class NetParams:
    """Two-sided grid matching parameters: slack fraction and grid step."""

    alpha: float
    h: float
    anchor: tuple = (0.0,)

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        if self.h <= 0:
            raise ValueError("h must be > 0")
        object.__setattr__(self, "anchor", tuple(float(c) for c in self.anchor))


@dataclass(frozen=True)
class NetCertificate:
    verdict: str
    threshold: float  # minimal cube edge for the certificate to apply
    edge: float
    alpha: float
    h: float
    order: int
    dimension: int
    constant_value: float


def _grid_points_in_window(params: NetParams, window) -> np.ndarray:
    lo, hi = window.bounds()
    anchor = np.asarray(params.anchor, dtype=float)
    axes = []
    for d in range(len(anchor)):
        k_lo = int(np.ceil((lo[d] - anchor[d]) / params.h - 1e-12))
        k_hi = int(np.floor((hi[d] - anchor[d]) / params.h + 1e-12))
        axes.append(anchor[d] + params.h * np.arange(k_lo, k_hi + 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def net_certificate(
    points, params: NetParams, order: int, constant=None, window=None
) -> NetCertificate:
    """Check the two-sided grid matching property and the edge threshold.

    Every set point must sit within ``alpha*h`` of a grid point and every grid
    point inside the window must have a set point within ``alpha*h``.  Any
    violation raises :class:`NotANetError` carrying the offending point.  The
    certificate holds when the window edge exceeds
    ``C(2N, n) * h * (1 - 2*alpha)**(1-n)``.
    """
    constant = constant or KhovanskiConstant()
    pts = _as_points(points)
    n = pts.shape[1]
    anchor = np.asarray(params.anchor, dtype=float)
    if len(anchor) != n:
        raise ValueError("anchor dimension must match the points")
    slack = params.alpha * params.h
    for p in pts:
        nearest = anchor + params.h * np.round((p - anchor) / params.h)
        if np.linalg.norm(p - nearest) > slack + 1e-12:
            raise NotANetError(
                f"set point {p} is {np.linalg.norm(p - nearest):.6g} from the "
                f"nearest grid point (allowed {slack:.6g})",
                grid_point=nearest,
                set_point=p,
            )
    if window is not None:
        for g in _grid_points_in_window(params, window):
            dist = float(np.min(np.linalg.norm(pts - g, axis=1)))
            if dist > slack + 1e-12:
                raise NotANetError(
                    f"grid point {g} has no set point within {slack:.6g} "
                    f"(nearest is {dist:.6g} away)",
                    grid_point=g,
                )
    cval = constant.value(2 * order, n)
    threshold = cval * params.h * (1.0 - 2.0 * params.alpha) ** (1 - n)
    edge = float(window.edge) if window is not None else float("nan")
    verdict = (
        "certified_unique"
        if window is not None and edge > threshold
        else "not_certified"
    )
    return NetCertificate(
        verdict=verdict,
        threshold=float(threshold),
        edge=edge,
        alpha=params.alpha,
        h=params.h,
        order=int(order),
        dimension=n,
        constant_value=float(cval),
    )


@dataclass(frozen=True)
class WindowCertificate1D:
    """Shortest interval holding exactly 2N sample points.

    Shifts confined to ``[0, rho)`` with ``rho = 1/length`` are uniquely
    determined by the samples inside the reported window: the difference of
    two distinct solutions is an exponential polynomial of order at most 2N,
    which cannot vanish 2N times on an interval that short.
    """

    order: int
    length: float
    rho: float
    lo: float
    hi: float
    points: np.ndarray  # the 2N samples inside the window

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))


def one_d_window(points, order: int) -> WindowCertificate1D:
    """Sliding minimum of ``w[i+2N-1] - w[i]`` over the sorted samples."""
    pts = np.sort(np.asarray(points, dtype=float).ravel())
    need = 2 * order
    if len(pts) < need:
        raise InsufficientPointsError(
            f"need at least {need} points, got {len(pts)}"
        )
    spans = pts[need - 1 :] - pts[: len(pts) - need + 1]
    i = int(np.argmin(spans))
    length = float(spans[i])
    return WindowCertificate1D(
        order=int(order),
        length=length,
        rho=1.0 / length,
        lo=float(pts[i]),
        hi=float(pts[i + need - 1]),
        points=pts[i : i + need],
    )


def langer_zero_bound(order: int, rho: float, length: float) -> float:
    """Zero-count bound ``(order - 1) + rho*length/(2*pi)`` for an
    exponential polynomial of the given order, max exponent modulus ``rho``,
    on an interval of the given length."""
    if rho < 0 or length <= 0:
        raise ValueError("need rho >= 0 and length > 0")
    return (order - 1) + rho * length / (2.0 * np.pi)


@dataclass(frozen=True)
class SkolemResult:
    """Moment table of the signed pair (+1 at 1, -1 at -1) and the even-grid
    degeneracy it demonstrates."""

    moments: tuple  # integers m_k for k = 0..K
    even_moments_zero: bool
    even_grid_flags: tuple
    verdict: str

    def rows(self):
        return [(k, m) for k, m in enumerate(self.moments)]


def skolem_demo(k_max: int) -> SkolemResult:
    """Integer moment table showing the even grid is not a uniqueness set.

    The signed node pair (1, 1) and (-1, -1) produces ``m_k = 1 - (-1)**k``,
    which vanishes on every even index, exactly as the all-zero solution
    does.  The even-grid classical solve accordingly reports a rank-deficient
    system.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    moments = tuple(1 - (-1) ** k for k in range(k_max + 1))
    even_zero = all(moments[k] == 0 for k in range(0, k_max + 1, 2))
    even_moments = np.array(moments[0 : k_max + 1 : 2], dtype=complex)
    sol = solve_standard_prony(
        StandardPronySystem(base=[0.0], step=[2.0], moments=even_moments), order=2
    )
    verdict = (
        "even grid is a non-uniqueness sample set for signed solutions"
        if even_zero and "rank_deficient" in sol.flags
        else "unexpected: even-grid data did not degenerate"
    )
    return SkolemResult(
        moments=moments,
        even_moments_zero=even_zero,
        even_grid_flags=sol.flags,
        verdict=verdict,
    )


def brute_force_covering_1d(points, epsilon: float) -> int:
    """Reference minimal 1D cover by exhaustive set-cover enumeration.

    Candidate intervals are anchored at set points (canonical for interval
    covering); subsets of increasing size are tried until one covers.
    Exponential in the set size; intended for small verification sets.
    """
    xs = np.sort(np.asarray(points, dtype=float).ravel())
    m = len(xs)
    if m == 0:
        return 0
    intervals = [(x, x + 2.0 * epsilon) for x in xs]
    for k in range(1, m + 1):
        for combo in itertools.combinations(range(m), k):
            if all(
                any(
                    intervals[c][0] - 1e-15 <= x <= intervals[c][1] + 1e-15
                    for c in combo
                )
                for x in xs
            ):
                return k
    return m
