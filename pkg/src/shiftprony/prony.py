"""Assembly and solution of decoupled exponential-sum systems.

A decoupled system relates the target atom's unknowns through

    sum_q  a_q * y_q ** s_ell  =  m_ell,

where each node ``y_q`` encodes one shift componentwise as ``exp(-i x)``.
When the exponents form an arithmetic progression the system reduces to the
classical moment form and is solved by a Hankel least-squares step, a
simultaneous root iteration and a Vandermonde least-squares step.  Arbitrary
exponent sets go through a variable-projection Gauss-Newton solver with
multistart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    DivisionNearZeroError,
    NotAProgressionError,
    RootFindingFailureError,
    UnderdeterminedSystemError,
)
from .sampling import DEFAULT_NONZERO_TOL
from .signal_model import atom_ft

RANK_TOL = 1e-10
ROOT_TOL = 1e-13
ROOT_MAX_ITER = 500
ROOT_RESTARTS = 8
MULTISTART_DEFAULT = 16
LM_INITIAL = 1e-3


@dataclass(frozen=True)
class GeneralizedPronySystem:
    """Exponent vectors, sample ratios and the expected number of terms."""

    exponents: np.ndarray  # (m, n)
    rhs: np.ndarray  # (m,) complex
    order: int
    dimension: int

    def __post_init__(self):
        exps = np.asarray(self.exponents, dtype=float)
        if exps.ndim == 1:
            exps = exps[:, None]
        rhs = np.asarray(self.rhs, dtype=complex).ravel()
        if len(rhs) != len(exps):
            raise ValueError("rhs length must match the number of exponents")
        if exps.shape[1] != self.dimension:
            raise ValueError("exponent width must match the stated dimension")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "rhs", rhs)

    def __len__(self) -> int:
        return len(self.rhs)


@dataclass(frozen=True)
class StandardPronySystem:
    """Moments on the progression ``base + ell*step``; classical form."""

    base: np.ndarray  # (n,)
    step: np.ndarray  # (n,)
    moments: np.ndarray  # (m,) complex

    def __post_init__(self):
        object.__setattr__(self, "base", np.atleast_1d(np.asarray(self.base, float)))
        object.__setattr__(self, "step", np.atleast_1d(np.asarray(self.step, float)))
        object.__setattr__(
            self, "moments", np.asarray(self.moments, dtype=complex).ravel()
        )
        if np.linalg.norm(self.step) == 0:
            raise ValueError("progression step must be nonzero")


@dataclass(frozen=True)
class PronySolution:
    """Recovered (amplitude, node) pairs plus solve diagnostics.

    ``nodes`` has shape (N,) for single-direction systems and (N, n) for
    full n-dimensional nodes.  ``flags`` may contain ``rank_deficient``,
    ``non_convergence`` or ``degenerate``.
    """

    amplitudes: np.ndarray
    nodes: np.ndarray
    residual: float
    condition_estimate: float
    flags: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self, "amplitudes", np.asarray(self.amplitudes, dtype=complex).ravel()
        )
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=complex))

    def pairs(self):
        return list(zip(self.amplitudes, self.nodes))


@dataclass(frozen=True)
class ShiftEstimate:
    """One recovered term, with the ambiguity left by the sampling lattice.

    Adding the c-th column of ``alias_basis`` to the shift and multiplying
    the amplitude by ``alias_amp_factors[c]`` leaves every sample unchanged;
    the data cannot distinguish members of that orbit.
    """

    amplitude: complex
    shift: np.ndarray  # (n,)
    alias_period: np.ndarray  # (n,) representative period per coordinate
    alias_basis: np.ndarray | None  # (n, n) lattice of indistinguishable shifts
    alias_note: str
    node_modulus_deviation: float
    alias_amp_factors: np.ndarray | None = None  # per alias-basis column

    def __post_init__(self):
        object.__setattr__(self, "shift", np.atleast_1d(np.asarray(self.shift, float)))
        object.__setattr__(
            self, "alias_period", np.atleast_1d(np.asarray(self.alias_period, float))
        )
        if self.alias_basis is not None:
            object.__setattr__(
                self, "alias_basis", np.asarray(self.alias_basis, float)
            )
        if self.alias_amp_factors is not None:
            object.__setattr__(
                self,
                "alias_amp_factors",
                np.asarray(self.alias_amp_factors, dtype=complex),
            )


@dataclass(frozen=True)
class Progression:
    base: np.ndarray
    step: np.ndarray
    indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "base", np.atleast_1d(np.asarray(self.base, float)))
        object.__setattr__(self, "step", np.atleast_1d(np.asarray(self.step, float)))
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    def __len__(self) -> int:
        return len(self.indices)


def assemble_decoupled(
    atoms,
    target_index: int,
    measurements,
    order: int,
    nonzero_tol: float = DEFAULT_NONZERO_TOL,
) -> GeneralizedPronySystem:
    """Divide each measurement by the target transform value.

    The frequencies are assumed to come from a verified decoupling set for
    ``target_index``; on such points the off-target contributions vanish and
    the ratio depends on the target atom's terms only.
    """
    atom = atoms[target_index]
    n = atom.dimension
    freqs = measurements.frequencies
    values = measurements.values
    coords = freqs if n > 1 else freqs[:, 0]
    denom = atom_ft(atom, coords)
    small = np.abs(denom) <= nonzero_tol
    if np.any(small):
        bad = freqs[np.argmax(small)]
        raise DivisionNearZeroError(
            f"target transform magnitude <= {nonzero_tol:g} at sample {bad}"
        )
    return GeneralizedPronySystem(
        exponents=freqs, rhs=values / denom, order=order, dimension=n
    )


def _point_keys(points: np.ndarray, tol: float):
    return [tuple(np.round(p / tol).astype(np.int64)) for p in points]


def detect_progressions(sample_set, tol: float = 1e-9):
    """Maximal arithmetic progressions of length >= 4 within a sample set.

    Returns :class:`Progression` records sorted by decreasing length, then
    increasing step norm, then base.  Random scattered sets return an empty
    list because no difference repeats often enough.
    """
    pts = getattr(sample_set, "frequencies", sample_set)
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = len(pts)
    if m < 4:
        return []
    keys = _point_keys(pts, tol)
    index = {k: i for i, k in enumerate(keys)}

    # candidate steps: difference vectors repeated by at least 3 point pairs
    diffs = (pts[None, :, :] - pts[:, None, :]).reshape(-1, pts.shape[1])
    keep = np.any(np.abs(diffs) > tol, axis=1)
    diffs = diffs[keep]
    lead = diffs[np.arange(len(diffs)), np.argmax(np.abs(diffs) > tol, axis=1)]
    diffs = np.where(lead[:, None] < 0, -diffs, diffs)
    keys = np.round(diffs / tol).astype(np.int64)
    uniq, first, counts = np.unique(
        keys, axis=0, return_index=True, return_counts=True
    )
    # each unordered pair was counted twice, so >= 3 pairs means count >= 6
    steps = [diffs[i] for i, c in zip(first, counts) if c >= 6]

    found = []
    for h in steps:
        starts = [
            i
            for i in range(m)
            if tuple(np.round((pts[i] - h) / tol).astype(np.int64)) not in index
        ]
        for i in starts:
            chain = [i]
            p = pts[i] + h
            k = tuple(np.round(p / tol).astype(np.int64))
            while k in index:
                chain.append(index[k])
                p = pts[index[k]] + h  # snap to the set point to stop drift
                k = tuple(np.round(p / tol).astype(np.int64))
            if len(chain) >= 4:
                found.append(Progression(pts[i], h, tuple(chain)))
    found.sort(
        key=lambda pr: (
            -len(pr),
            np.linalg.norm(pr.step),
            tuple(pr.base),
        )
    )
    return found


def reduce_to_standard(
    system: GeneralizedPronySystem, base, step, tol: float = 1e-9
) -> StandardPronySystem:
    """Rewrite a progression-sampled system in classical moment form.

    With exponents ``base + ell*step`` the substitution introduces the
    per-term unknowns ``alpha = a * y**base`` and ``xi = y**step``; the
    moments are the right-hand sides unchanged.
    """
    base = np.atleast_1d(np.asarray(base, dtype=float))
    step = np.atleast_1d(np.asarray(step, dtype=float))
    expected = base[None, :] + np.arange(len(system))[:, None] * step[None, :]
    if not np.allclose(system.exponents, expected, atol=tol, rtol=0.0):
        raise NotAProgressionError(
            "system exponents do not run through base + ell*step in order"
        )
    return StandardPronySystem(base=base, step=step, moments=system.rhs)


def _durand_kerner(coeffs: np.ndarray, seed: int = 0) -> np.ndarray:
    """All roots of the monic polynomial with ascending ``coeffs``.

    Simultaneous (Weierstrass) iteration with randomized restarts on
    stagnation; raises :class:`RootFindingFailureError` if every restart
    fails to converge.
    """
    coeffs = np.asarray(coeffs, dtype=complex).ravel()
    deg = len(coeffs)
    if deg == 0:
        return np.array([], dtype=complex)
    if deg == 1:
        return np.array([-coeffs[0]])
    poly_desc = np.concatenate([[1.0 + 0j], coeffs[::-1]])
    radius = 1.0 + float(np.max(np.abs(coeffs)))
    rng = np.random.default_rng(seed)
    z0 = radius * (0.4 + 0.9j) ** np.arange(1, deg + 1)
    z = z0.copy()
    for attempt in range(ROOT_RESTARTS + 1):
        ok = True
        for _ in range(ROOT_MAX_ITER):
            p = np.polyval(poly_desc, z)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            denom = diff.prod(axis=1)
            if not np.all(np.isfinite(denom)) or np.any(np.abs(denom) < 1e-300):
                ok = False
                break
            delta = p / denom
            z = z - delta
            if not np.all(np.isfinite(z)):
                ok = False
                break
            if np.max(np.abs(delta)) < ROOT_TOL * (1.0 + np.max(np.abs(z))):
                return z
        if ok and np.max(np.abs(np.polyval(poly_desc, z))) < 1e-10 * (1.0 + radius):
            return z
        scale = 1.0 + 0.2 * (attempt + 1)
        jitter = rng.standard_normal(deg) + 1j * rng.standard_normal(deg)
        z = z0 * scale + 0.1 * radius * jitter
    raise RootFindingFailureError(
        f"root iteration did not converge after {ROOT_RESTARTS} restarts"
    )


def _merge_close(nodes: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    kept = []
    for z in nodes:
        if all(abs(z - w) > tol * max(1.0, abs(w)) for w in kept):
            kept.append(z)
    return np.asarray(kept, dtype=complex)


def _vandermonde(nodes: np.ndarray, m: int) -> np.ndarray:
    return nodes[None, :] ** np.arange(m)[:, None]


def _sorted_pairs(amplitudes, nodes):
    nodes = np.asarray(nodes, dtype=complex)
    flat = nodes if nodes.ndim == 1 else nodes[:, 0]
    order = np.lexsort((flat.imag, flat.real))
    return np.asarray(amplitudes, dtype=complex)[order], nodes[order]


def solve_standard_prony(
    system: StandardPronySystem,
    order: int,
    rank_tol: float = RANK_TOL,
    seed: int = 0,
) -> PronySolution:
    """Classical moment solve: Hankel system, node roots, amplitude fit.

    The Hankel step is least squares when more than ``2*order`` moments are
    given.  A singular-value ratio below ``rank_tol`` downgrades the order and
    flags the solution ``rank_deficient`` instead of guessing nodes.
    """
    moments = system.moments
    m = len(moments)
    if order < 0:
        raise ValueError("order must be nonnegative")
    if m < 2 * order:
        raise UnderdeterminedSystemError(
            f"{m} moments cannot determine {order} terms (need {2 * order})"
        )
    flags = []
    n_eff = order
    nodes = np.array([], dtype=complex)
    while n_eff > 0:
        hank = np.stack([moments[i : i + n_eff] for i in range(m - n_eff)])
        svals = np.linalg.svd(hank, compute_uv=False)
        rank = int(np.sum(svals > rank_tol * svals[0])) if svals[0] > 0 else 0
        if rank < n_eff:
            flags = ["rank_deficient"]
            n_eff = rank
            continue
        coeffs, *_ = np.linalg.lstsq(hank, -moments[n_eff:m], rcond=None)
        roots = _durand_kerner(coeffs, seed=seed)
        merged = _merge_close(roots)
        if len(merged) < n_eff:
            flags = ["rank_deficient"]
            n_eff = len(merged)
            continue
        nodes = merged
        break
    if n_eff == 0:
        if np.max(np.abs(moments), initial=0.0) == 0.0:
            flags.append("degenerate")
        return PronySolution(
            amplitudes=np.array([], dtype=complex),
            nodes=np.array([], dtype=complex),
            residual=float(np.max(np.abs(moments), initial=0.0)),
            condition_estimate=0.0,
            flags=tuple(dict.fromkeys(flags)),
        )
    vand = _vandermonde(nodes, m)
    amps, *_ = np.linalg.lstsq(vand, moments, rcond=None)
    svals = np.linalg.svd(vand, compute_uv=False)
    cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else float("inf")
    residual = float(np.max(np.abs(vand @ amps - moments)))
    amps, nodes = _sorted_pairs(amps, nodes)
    return PronySolution(
        amplitudes=amps,
        nodes=nodes,
        residual=residual,
        condition_estimate=cond,
        flags=tuple(dict.fromkeys(flags)),
    )


def _rational_cycle(ratio: float, max_den: int = 24, tol: float = 1e-9) -> int:
    """Denominator q when ratio is p/q within tol, else 1."""
    frac = Fraction(ratio).limit_denominator(max_den)
    if abs(float(frac) - ratio) < tol:
        return frac.denominator
    return 1


def recover_shifts(
    solution: PronySolution,
    base,
    step,
    realness_policy: str = "prefer_real",
) -> list:
    """Map standard-system pairs back to shifts along the progression.

    Each node determines the shift component along the step direction only
    modulo ``2*pi/|step|``.  Under ``prefer_real``, when ``base/|step|`` is a
    small rational p/q, the q alias representatives carry amplitudes that
    differ by phase factors; the one with the smallest imaginary residue is
    reported (ties resolved toward the smaller shift) and the alias period
    grows to q times the base period.
    """
    base = np.atleast_1d(np.asarray(base, dtype=float))
    step = np.atleast_1d(np.asarray(step, dtype=float))
    hnorm = float(np.linalg.norm(step))
    direction = step / hnorm
    period = 2.0 * np.pi / hnorm
    s0_par = float(base @ direction)
    cycle = 1
    if realness_policy == "prefer_real" and abs(s0_par) > 1e-15:
        cycle = _rational_cycle(s0_par / hnorm)
    estimates = []
    n = len(base)
    for alpha, xi in solution.pairs():
        if xi == 0:
            raise ValueError("cannot invert a zero node")
        deviation = abs(abs(xi) - 1.0)
        x_par = (-np.angle(xi)) / hnorm
        x_par %= period
        candidates = []
        for j in range(cycle):
            cand = x_par + j * period
            amp = alpha * np.exp(1j * s0_par * cand)
            candidates.append((abs(amp.imag), cand, amp))
        # residues within 10% of the best are ties (opposite-sign classes
        # carry identical residues up to rounding); ties resolve toward the
        # smaller shift
        im_min = min(c[0] for c in candidates)
        admissible = [c for c in candidates if c[0] <= 1.1 * im_min + 1e-15]
        _, x_sel, amp_sel = min(admissible, key=lambda c: c[1])
        notes = [f"shift known modulo {period:.6g} along the step direction"]
        if cycle > 1:
            notes.append(
                f"amplitude phase cycles through {cycle} alias classes; "
                "smallest imaginary residue selected"
            )
        if n > 1:
            notes.append("components orthogonal to the step are undetermined")
        basis = np.zeros((n, n))
        basis[:, 0] = direction * period
        estimates.append(
            ShiftEstimate(
                amplitude=complex(amp_sel),
                shift=direction * x_sel,
                alias_period=np.abs(direction) * period,
                alias_basis=basis if n == 1 else None,
                alias_note="; ".join(notes),
                node_modulus_deviation=float(deviation),
                alias_amp_factors=np.array([np.exp(1j * s0_par * period)])
                if n == 1
                else None,
            )
        )
    return estimates


def _design_matrix(exponents: np.ndarray, log_nodes: np.ndarray) -> np.ndarray:
    expo = exponents @ log_nodes.T
    return np.exp(np.clip(expo.real, -700, 700) + 1j * expo.imag)


def eval_generalized(system: GeneralizedPronySystem, amplitudes, nodes) -> np.ndarray:
    """Forward values sum_q a_q y_q**s_ell using principal-branch powers."""
    nodes = np.asarray(nodes, dtype=complex)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    if nodes.size == 0:
        return np.zeros(len(system), dtype=complex)
    log_nodes = np.log(nodes)
    design = _design_matrix(system.exponents, log_nodes)
    return design @ np.asarray(amplitudes, dtype=complex)


def residual(system: GeneralizedPronySystem, solution: PronySolution) -> float:
    """Sup-norm misfit of a candidate solution over all equations."""
    if len(system) == 0:
        return 0.0
    values = eval_generalized(system, solution.amplitudes, solution.nodes)
    return float(np.max(np.abs(values - system.rhs)))


def _solve_amplitudes(design: np.ndarray, rhs: np.ndarray, positive: bool):
    if positive:
        amps, *_ = np.linalg.lstsq(design.real, rhs.real, rcond=None)
        amps = amps.astype(complex)
    else:
        amps, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    return amps


def _varpro_gauss_newton(
    exponents: np.ndarray,
    rhs: np.ndarray,
    log_nodes0: np.ndarray,
    positive: bool,
    max_iter: int = 120,
):
    """Damped Gauss-Newton over log-node parameters.

    Amplitudes are eliminated by linear least squares at each iterate.  The
    step linearizes in amplitudes and log nodes jointly (the amplitude block
    keeps the step well-posed when node clusters flatten the projected
    gradient) and is computed by damped least squares on the Jacobian rather
    than normal equations.  Returns the final log nodes, amplitudes, sup
    residual and a convergence flag.
    """
    order, n = log_nodes0.shape
    lam = log_nodes0.copy() if positive else log_nodes0.astype(complex).copy()
    mu = LM_INITIAL

    def assemble(lam_):
        design = _design_matrix(exponents, lam_.astype(complex))
        amps = _solve_amplitudes(design, rhs, positive)
        res = design @ amps - rhs
        return design, amps, res

    design, amps, res = assemble(lam)
    cost = float(np.vdot(res, res).real)
    converged = False
    n_params = order + order * n  # amplitude block plus log-node block
    for _ in range(max_iter):
        cols = [design[:, q] for q in range(order)]
        for q in range(order):
            for d in range(n):
                cols.append(amps[q] * exponents[:, d] * design[:, q])
        jac = np.stack(cols, axis=1)
        if positive:
            jac_r = np.vstack([jac.real, jac.imag])
            res_r = np.concatenate([res.real, res.imag])
        accepted = False
        for _ in range(40):
            if positive:
                lhs = np.vstack([jac_r, np.sqrt(mu) * np.eye(n_params)])
                rhs_vec = np.concatenate([-res_r, np.zeros(n_params)])
            else:
                lhs = np.vstack([jac, np.sqrt(mu) * np.eye(n_params)])
                rhs_vec = np.concatenate([-res, np.zeros(n_params)])
            delta, *_ = np.linalg.lstsq(lhs, rhs_vec, rcond=None)
            d_lam = delta[order:].reshape(order, n)
            if positive:
                trial = np.clip(lam + d_lam.real, -60.0, 60.0)
            else:
                trial = lam + d_lam
                trial = np.clip(trial.real, -60.0, 60.0) + 1j * trial.imag
            t_design, t_amps, t_res = assemble(trial)
            t_cost = float(np.vdot(t_res, t_res).real)
            if np.isfinite(t_cost) and t_cost <= cost:
                improvement = cost - t_cost
                lam, design, amps, res, cost = trial, t_design, t_amps, t_res, t_cost
                mu = max(mu * 0.5, 1e-14)
                accepted = True
                if improvement <= 1e-4 * cost or np.max(
                    np.abs(d_lam)
                ) < 1e-15 * (1.0 + np.max(np.abs(lam))):
                    converged = True
                break
            mu *= 2.0
            if mu > 1e12:
                break
        if not accepted or converged:
            if not accepted:
                converged = cost <= 1e-24 * (1.0 + float(np.vdot(rhs, rhs).real))
            break
    sup = float(np.max(np.abs(res))) if len(res) else 0.0
    return lam, amps, sup, converged


def _node_key(nodes: np.ndarray):
    flat = np.asarray(nodes, dtype=complex).ravel()
    return tuple(np.round(np.concatenate([flat.real, flat.imag]), 6))


def solve_generalized(
    system: GeneralizedPronySystem,
    init: PronySolution | None = None,
    n_starts: int = MULTISTART_DEFAULT,
    seed: int = 0,
    positive_nodes: bool = False,
    return_all: bool = False,
):
    """Variable-projection Gauss-Newton solve over arbitrary exponents.

    Without ``init`` the solver runs ``n_starts`` seeded starts and keeps the
    best sup-residual solution; candidates are merged deterministically by
    (residual, node order).  ``positive_nodes`` restricts the search to nodes
    on the positive real axis with real amplitudes.  ``return_all`` yields the
    deduplicated list of local solutions instead of the best one.
    """
    order, n = system.order, system.dimension
    m = len(system)
    if m < 2 * order:
        raise UnderdeterminedSystemError(
            f"{m} equations cannot determine {order} terms (need {2 * order})"
        )
    if np.max(np.abs(system.rhs), initial=0.0) == 0.0:
        sol = PronySolution(
            amplitudes=np.zeros(order, dtype=complex),
            nodes=np.ones((order, n) if n > 1 else order, dtype=complex),
            residual=0.0,
            condition_estimate=0.0,
            flags=("degenerate",),
        )
        return [sol] if return_all else sol

    rng = np.random.default_rng(seed)
    starts = []
    if init is not None:
        nodes0 = np.asarray(init.nodes, dtype=complex)
        if nodes0.ndim == 1:
            nodes0 = nodes0[:, None]
        lam0 = np.log(nodes0)
        starts.append(lam0.real if positive_nodes else lam0)
    else:
        for _ in range(n_starts):
            if positive_nodes:
                starts.append(rng.uniform(-1.5, 1.5, size=(order, n)))
            else:
                starts.append(
                    rng.normal(0.0, 0.05, size=(order, n))
                    + 1j * rng.uniform(-np.pi, np.pi, size=(order, n))
                )

    candidates = []
    for lam0 in starts:
        lam, amps, sup, converged = _varpro_gauss_newton(
            system.exponents, system.rhs, np.asarray(lam0), positive_nodes
        )
        nodes = np.exp(lam.astype(complex))
        amps, nodes = _sorted_pairs(amps, nodes)
        design = _design_matrix(system.exponents, np.log(nodes))
        svals = np.linalg.svd(design, compute_uv=False)
        cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else float("inf")
        flags = () if converged else ("non_convergence",)
        candidates.append(
            PronySolution(
                amplitudes=amps,
                nodes=nodes if n > 1 else nodes.ravel(),
                residual=sup,
                condition_estimate=cond,
                flags=flags,
            )
        )
    candidates.sort(key=lambda s: (s.residual, _node_key(s.nodes)))
    unique = []
    seen = set()
    for cand in candidates:
        key = _node_key(cand.nodes)
        if key not in seen:
            seen.add(key)
            unique.append(cand)
    return unique if return_all else unique[0]


@dataclass(frozen=True)
class GridInfo:
    """A complete rectangular sub-grid of a 2D sample cloud."""

    base: np.ndarray  # (2,)
    steps: np.ndarray  # (2, 2), rows are the two step vectors
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, float))
        object.__setattr__(self, "steps", np.asarray(self.steps, float))
        object.__setattr__(self, "shape", tuple(int(v) for v in self.shape))

    def points(self) -> np.ndarray:
        l1, l2 = self.shape
        ii, jj = np.meshgrid(np.arange(l1), np.arange(l2), indexing="ij")
        pts = (
            self.base[None, :]
            + ii.ravel()[:, None] * self.steps[0][None, :]
            + jj.ravel()[:, None] * self.steps[1][None, :]
        )
        return pts


def detect_grid(points, shape_min, tol: float = 1e-9, max_extent: int | None = None):
    """Find a complete ``shape_min`` rectangle inside a 2D point cloud.

    Candidate steps are the most frequent small difference vectors; corners
    are tried by increasing distance from the origin.  The rectangle is grown
    beyond ``shape_min`` while it stays complete, up to ``max_extent`` per
    side.  Returns ``None`` when no such grid exists.
    """
    pts = np.asarray(getattr(points, "points", points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("grid detection expects a (m, 2) point array")
    need1, need2 = shape_min
    if max_extent is None:
        max_extent = 2 * max(need1, need2)
    keys = set(_point_keys(pts, tol))

    def member(p):
        return tuple(np.round(p / tol).astype(np.int64)) in keys

    m = len(pts)
    counts = {}
    reps = {}
    order = np.argsort(np.linalg.norm(pts, axis=1), kind="stable")
    pts_sorted = pts[order]
    neighbor_cap = min(m, 24)
    for i in range(m):
        d2 = np.linalg.norm(pts - pts[i], axis=1)
        near = np.argsort(d2, kind="stable")[1 : neighbor_cap + 1]
        for j in near:
            d = pts[j] - pts[i]
            lead = next((c for c in d if abs(c) > tol), 0.0)
            if lead < 0:
                d = -d
            key = tuple(np.round(d / tol).astype(np.int64))
            counts[key] = counts.get(key, 0) + 1
            reps.setdefault(key, d)
    cands = sorted(
        (reps[k] for k, c in counts.items() if c >= min(need1, need2)),
        key=lambda v: (np.linalg.norm(v), tuple(v)),
    )[:16]
    corners = pts_sorted[:400]

    for a in range(len(cands)):
        for b in range(a + 1, len(cands)):
            h1, h2 = cands[a], cands[b]
            if abs(h1[0] * h2[1] - h1[1] * h2[0]) < tol:
                continue
            for corner in corners:
                def complete(l1, l2):
                    for i in range(l1):
                        for j in range(l2):
                            if not member(corner + i * h1 + j * h2):
                                return False
                    return True

                if not complete(need1, need2):
                    continue
                l1, l2 = need1, need2
                while l1 < max_extent and complete(l1 + 1, l2):
                    l1 += 1
                while l2 < max_extent and complete(l1, l2 + 1):
                    l2 += 1
                return GridInfo(base=corner, steps=np.stack([h1, h2]), shape=(l1, l2))
    return None


def solve_grid(
    system: GeneralizedPronySystem, grid: GridInfo, seed: int = 0
) -> PronySolution:
    """Cascaded solve of a system sampled on a complete 2D grid.

    One classical solve per grid column fixes the first-direction nodes; a
    joint least-squares fit against the best column's nodes produces per-node
    amplitude sequences whose one-term fits give the second direction.  The
    combined estimate is polished on the full system by the generalized
    solver.
    """
    l1, l2 = grid.shape
    order = system.order
    moments = system.rhs.reshape(l1, l2)
    column_solutions = []
    for j in range(l2):
        sub = StandardPronySystem(
            base=grid.base + j * grid.steps[1], step=grid.steps[0], moments=moments[:, j]
        )
        try:
            column_solutions.append(solve_standard_prony(sub, order, seed=seed))
        except (UnderdeterminedSystemError, RootFindingFailureError):
            continue
    full = [s for s in column_solutions if len(s.nodes) == order]
    if not full:
        raise RootFindingFailureError("no grid column produced a full-order solve")
    ref = min(full, key=lambda s: s.residual)
    xi1 = ref.nodes
    vand1 = _vandermonde(xi1, l1)
    amp_seq, *_ = np.linalg.lstsq(vand1, moments, rcond=None)  # (order, l2)

    log_nodes = np.zeros((order, 2), dtype=complex)
    amplitudes = np.zeros(order, dtype=complex)
    steps = grid.steps
    for q in range(order):
        seq = amp_seq[q]
        head, tail = seq[:-1], seq[1:]
        denom = np.vdot(head, head)
        xi2 = (np.vdot(head, tail) / denom) if abs(denom) > 0 else 1.0 + 0j
        powers = xi2 ** np.arange(l2)
        scale = np.vdot(powers, powers)
        c_q = np.vdot(powers, seq) / scale if abs(scale) > 0 else 0.0
        log_xi = np.array([np.log(xi1[q]), np.log(complex(xi2))])
        lam = np.linalg.solve(steps.astype(complex), log_xi)
        log_nodes[q] = lam
        amplitudes[q] = c_q * np.exp(-complex(grid.base @ lam))
    init = PronySolution(
        amplitudes=amplitudes,
        nodes=np.exp(log_nodes),
        residual=float("nan"),
        condition_estimate=float("nan"),
    )
    polished = solve_generalized(system, init=init, seed=seed)
    extra = tuple(f for f in ref.flags if f not in polished.flags)
    if extra:
        polished = PronySolution(
            amplitudes=polished.amplitudes,
            nodes=polished.nodes,
            residual=polished.residual,
            condition_estimate=polished.condition_estimate,
            flags=polished.flags + extra,
        )
    return polished


def recover_shifts_nodes(solution: PronySolution) -> list:
    """Shifts straight from full nodes, one coordinate per node component.

    Each unit-modulus node component encodes ``exp(-i x_d)``, so every
    coordinate is known modulo ``2*pi``.
    """
    nodes = solution.nodes
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    n = nodes.shape[1]
    estimates = []
    for amp, node in zip(solution.amplitudes, nodes):
        x = (-np.angle(node)) % (2.0 * np.pi)
        deviation = float(np.max(np.abs(np.abs(node) - 1.0)))
        estimates.append(
            ShiftEstimate(
                amplitude=complex(amp),
                shift=x,
                alias_period=np.full(n, 2.0 * np.pi),
                alias_basis=2.0 * np.pi * np.eye(n),
                alias_note="each coordinate known modulo 2*pi",
                node_modulus_deviation=deviation,
                alias_amp_factors=np.ones(n, dtype=complex),
            )
        )
    return estimates


def recover_shifts_lattice(solution: PronySolution, base, steps) -> list:
    """Shifts from full 2D nodes, reduced to the sampling lattice's cell.

    ``base`` and ``steps`` describe the sampling grid.  Shifts are reported
    inside the fundamental parallelepiped spanned by the ``alias_basis``
    columns; hopping one column multiplies the amplitude by the matching
    entry of ``alias_amp_factors`` (the grid sees only that combination).
    """
    base = np.asarray(base, dtype=float)
    steps = np.asarray(steps, dtype=float)
    inv_steps = np.linalg.inv(steps)
    basis = 2.0 * np.pi * inv_steps
    factors = np.exp(1j * (base @ basis))
    estimates = []
    nodes = solution.nodes
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    for amp, node in zip(solution.amplitudes, nodes):
        lam = np.log(node.astype(complex))
        theta = np.array(
            [(-np.imag(steps[d] @ lam)) % (2.0 * np.pi) for d in range(len(steps))]
        )
        x = inv_steps @ theta
        deviation = float(np.max(np.abs(np.abs(node) - 1.0)))
        estimates.append(
            ShiftEstimate(
                amplitude=complex(amp),
                shift=x,
                alias_period=np.linalg.norm(basis, axis=0),
                alias_basis=basis,
                alias_note=(
                    "shift known modulo integer combinations of the alias basis columns"
                ),
                node_modulus_deviation=deviation,
                alias_amp_factors=factors,
            )
        )
    return estimates
