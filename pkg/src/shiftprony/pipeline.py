"""End-to-end experiment driver: config, reconstruction, scoring, reports.

A run walks every atom independently: build the verified sample points,
choose samples, synthesize or ingest measurements, assemble the decoupled
system, solve along the structure the samples expose (progression, grid, or
free exponents), recover shifts, and attach the requested uniqueness
certificates.  Failures stay per-atom so partial results remain usable.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from json import encoder as _json_encoder
from pathlib import Path

import numpy as np

from . import prony, sampling, signal_model, uniqueness
from .errors import (
    ConfigError,
    DivisionNearZeroError,
    EmptyDecouplingSetError,
    InsufficientPointsError,
    MeasurementMismatchError,
    NoProgressionError,
    NotANetError,
    RootFindingFailureError,
    ShiftPronyError,
    UnderdeterminedSystemError,
)
from .signal_model import ShiftModel, ShiftTerm, SignalAtom
from .svgplot import render_zero_plot

SCHEMA_VERSION = 1
FREQ_MATCH_TOL = 1e-9

_PER_ATOM_ERRORS = (
    EmptyDecouplingSetError,
    InsufficientPointsError,
    NoProgressionError,
    DivisionNearZeroError,
    RootFindingFailureError,
    UnderdeterminedSystemError,
)


# ---------------------------------------------------------------------------
# JSON helpers: floats carry 17 significant digits for exact round-trips
# ---------------------------------------------------------------------------

def _floatstr(value, _inf=float("inf")):
    if value != value:
        return "NaN"
    if value == _inf:
        return "Infinity"
    if value == -_inf:
        return "-Infinity"
    return format(value, ".17g")


class ReportEncoder(json.JSONEncoder):
    """JSON encoder that prints floats with 17 significant digits."""

    def iterencode(self, o, _one_shot=False):
        markers = {} if self.check_circular else None
        indent = self.indent
        if isinstance(indent, int):
            indent = " " * indent
        return _json_encoder._make_iterencode(
            markers,
            self.default,
            _json_encoder.encode_basestring_ascii,
            indent,
            _floatstr,
            self.key_separator,
            self.item_separator,
            self.sort_keys,
            self.skipkeys,
            False,
        )(o, 0)


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, cls=ReportEncoder, indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def _cplx(z) -> dict:
    z = complex(z)
    return {"re": float(z.real), "im": float(z.imag)}


def _vec(v) -> list:
    return [float(c) for c in np.atleast_1d(np.asarray(v, dtype=float))]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplingSpec:
    strategy: str = "auto"
    count: int | None = None


@dataclass(frozen=True)
class CertificateToggles:
    window: bool = True
    span: bool = False
    net: bool = False
    net_alpha: float = 0.25


@dataclass(frozen=True)
class ExperimentConfig:
    atoms: tuple
    truth: ShiftModel | None
    measurements_csv: str | None
    orders: tuple
    window: sampling.Window
    sampling_specs: tuple
    noise_level: float = 0.0
    seed: int = 0
    certificates: CertificateToggles = field(default_factory=CertificateToggles)
    constant: uniqueness.KhovanskiConstant = field(
        default_factory=uniqueness.KhovanskiConstant
    )
    output_dir: str | None = None

    @property
    def dimension(self) -> int:
        return self.atoms[0].dimension

    def to_json_dict(self) -> dict:
        truth = None
        if self.truth is not None:
            truth = [
                [
                    {"amplitude": float(t.amplitude), "shift": _vec(t.shift)}
                    for t in terms
                ]
                for terms in self.truth.terms
            ]
        return {
            "schema_version": SCHEMA_VERSION,
            "dimension": self.dimension,
            "atoms": [
                {"kind": a.kind, "params": list(a.params)} for a in self.atoms
            ],
            "truth": truth,
            "measurements_csv": self.measurements_csv,
            "orders": list(self.orders),
            "window": {
                "center": _vec(self.window.center),
                "edge": float(self.window.edge),
            },
            "sampling": [
                {"strategy": s.strategy, "count": s.count} for s in self.sampling_specs
            ],
            "noise_level": float(self.noise_level),
            "seed": int(self.seed),
            "certificates": {
                "window": self.certificates.window,
                "span": self.certificates.span,
                "net": self.certificates.net,
                "net_alpha": self.certificates.net_alpha,
            },
            "khovanski": {
                "default": self.constant.default,
                "table": [list(row) for row in self.constant.table],
            },
            "output_dir": self.output_dir,
        }


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a JSON config dict and build the typed configuration."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    try:
        atoms = tuple(
            SignalAtom(a["kind"], tuple(a.get("params", ()))) for a in raw["atoms"]
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad atom spec: {exc}") from exc
    if len(atoms) < 2:
        raise ConfigError("at least two atoms are required")
    dims = {a.dimension for a in atoms}
    if len(dims) != 1:
        raise ConfigError("atoms mix dimensions")
    n = dims.pop()

    truth_raw = raw.get("truth")
    measurements_csv = raw.get("measurements_csv")
    if (truth_raw is None) == (measurements_csv is None):
        raise ConfigError(
            "exactly one of 'truth' and 'measurements_csv' must be present"
        )
    truth = None
    if truth_raw is not None:
        if len(truth_raw) != len(atoms):
            raise ConfigError("truth must list one term group per atom")
        try:
            terms = tuple(
                tuple(
                    ShiftTerm(float(t["amplitude"]), tuple(t["shift"]))
                    for t in group
                )
                for group in truth_raw
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad truth term: {exc}") from exc
        truth = ShiftModel(atoms, terms)
        report = signal_model.validate_model(truth)
        if not report.ok:
            raise ConfigError("invalid truth model: " + "; ".join(report.violations))
        orders = truth.orders()
    else:
        if "orders" not in raw:
            raise ConfigError("'orders' is required with external measurements")
        orders = tuple(int(v) for v in raw["orders"])
        if len(orders) != len(atoms) or any(o < 1 for o in orders):
            raise ConfigError("orders must list a positive count per atom")

    win_raw = raw.get("window")
    if win_raw is None:
        window = sampling.default_window(n)
    else:
        try:
            window = sampling.Window(tuple(win_raw["center"]), float(win_raw["edge"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad window: {exc}") from exc
        if window.dimension != n:
            raise ConfigError("window dimension does not match the atoms")

    samp_raw = raw.get("sampling")
    if samp_raw is None:
        specs = tuple(SamplingSpec() for _ in atoms)
    else:
        if len(samp_raw) != len(atoms):
            raise ConfigError("sampling must list one spec per atom")
        specs = tuple(
            SamplingSpec(
                strategy=s.get("strategy", "auto"),
                count=None if s.get("count") is None else int(s["count"]),
            )
            for s in samp_raw
        )

    cert_raw = raw.get("certificates", {})
    toggles = CertificateToggles(
        window=bool(cert_raw.get("window", True)),
        span=bool(cert_raw.get("span", False)),
        net=bool(cert_raw.get("net", False)),
        net_alpha=float(cert_raw.get("net_alpha", 0.25)),
    )
    kh_raw = raw.get("khovanski", {})
    try:
        constant = uniqueness.KhovanskiConstant(
            default=float(kh_raw.get("default", 1.0)),
            table=tuple(tuple(row) for row in kh_raw.get("table", ())),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad khovanski table: {exc}") from exc

    noise = float(raw.get("noise_level", 0.0))
    if noise < 0:
        raise ConfigError("noise_level must be nonnegative")
    return ExperimentConfig(
        atoms=atoms,
        truth=truth,
        measurements_csv=measurements_csv,
        orders=orders,
        window=window,
        sampling_specs=specs,
        noise_level=noise,
        seed=int(raw.get("seed", 0)),
        certificates=toggles,
        constant=constant,
        output_dir=raw.get("output_dir"),
    )


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)


# ---------------------------------------------------------------------------
# Demo configurations
# ---------------------------------------------------------------------------

def demo_1d_config(seed: int = 0, noise_level: float = 0.0, order: int = 3) -> dict:
    """Box plus impulse pair on the line; shifts confined to the certified
    unique range for the default window."""
    rng = np.random.default_rng(seed)
    rho = 1.0 / ((2 * order - 1) * np.pi)
    truth = []
    for _ in range(2):
        amps = rng.uniform(0.5, 2.0, size=order)
        shifts = rng.uniform(0.0, rho, size=order)
        truth.append(
            [{"amplitude": float(a), "shift": [float(x)]} for a, x in zip(amps, shifts)]
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "dimension": 1,
        "atoms": [
            {"kind": "box1d", "params": [1.0]},
            {"kind": "delta_pair", "params": [1.0]},
        ],
        "truth": truth,
        "window": {"center": [0.0], "edge": 20.0 * np.pi},
        "noise_level": noise_level,
        "seed": seed,
        "certificates": {"window": True, "span": True, "net": False},
    }


def demo_2d_config(seed: int = 0, noise_level: float = 0.0, order: int = 2) -> dict:
    """Two axis-aligned squares plus a rotated square in the plane."""
    rng = np.random.default_rng(seed)
    truth = []
    for _ in range(3):
        amps = rng.uniform(0.5, 2.0, size=order)
        shifts = rng.uniform(0.0, 0.25, size=(order, 2))
        truth.append(
            [
                {"amplitude": float(a), "shift": [float(x[0]), float(x[1])]}
                for a, x in zip(amps, shifts)
            ]
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "dimension": 2,
        "atoms": [
            {"kind": "box2d", "params": [3.0, 3.0]},
            {"kind": "box2d", "params": [5.0, 5.0]},
            {"kind": "rotated_square", "params": [float(np.sqrt(2.0))]},
        ],
        "truth": truth,
        "window": {"center": [0.0, 0.0], "edge": 20.0 * np.pi},
        "noise_level": noise_level,
        "seed": seed,
        "certificates": {"window": False, "span": True, "net": False},
    }


# ---------------------------------------------------------------------------
# Measurement ingestion
# ---------------------------------------------------------------------------

def load_measurement_csv(path, dimension: int):
    """Rows of (s_1..s_n, re, im) as parallel frequency/value arrays."""
    freqs, values = [], []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for row in reader:
                if not row or row[0].strip().startswith("s"):
                    continue  # header or blank
                cells = [float(c) for c in row]
                if len(cells) != dimension + 2:
                    raise MeasurementMismatchError(
                        f"expected {dimension + 2} columns, got {len(cells)}"
                    )
                freqs.append(cells[:dimension])
                values.append(complex(cells[dimension], cells[dimension + 1]))
    except OSError as exc:
        raise ConfigError(f"cannot read measurements: {exc}") from exc
    except ValueError as exc:
        raise MeasurementMismatchError(f"bad measurement row: {exc}") from exc
    return np.asarray(freqs, dtype=float), np.asarray(values, dtype=complex)


def _measurements_from_file(freqs_needed, file_freqs, file_values, noise, seed):
    values = np.empty(len(freqs_needed), dtype=complex)
    for i, f in enumerate(freqs_needed):
        dists = np.max(np.abs(file_freqs - f[None, :]), axis=1)
        j = int(np.argmin(dists))
        if dists[j] > FREQ_MATCH_TOL:
            raise MeasurementMismatchError(
                f"no measurement within {FREQ_MATCH_TOL:g} of computed sample {f}"
            )
        values[i] = file_values[j]
    samples = tuple(
        signal_model.FourierSample(tuple(f), v) for f, v in zip(freqs_needed, values)
    )
    return signal_model.MeasurementSet(samples, noise_level=noise, seed=seed)


# ---------------------------------------------------------------------------
# Sample selection
# ---------------------------------------------------------------------------

MAX_AUTO_SAMPLES = 64


@dataclass(frozen=True)
class SamplePlan:
    """Chosen samples plus the structure the solver can exploit.

    For the progression path, ``indices`` locate the progression inside the
    sample array; the classical solve runs on that subset and the refit uses
    every sample.
    """

    samples: sampling.SampleSet
    path: str  # progression | grid | generalized
    base: np.ndarray | None = None
    step: np.ndarray | None = None
    indices: tuple | None = None
    grid: prony.GridInfo | None = None


def _cap_closest(points: np.ndarray, cap: int) -> np.ndarray:
    if len(points) <= cap:
        return points
    norms = np.linalg.norm(points, axis=1)
    order = np.lexsort(tuple(points.T[::-1]) + (np.round(norms / 1e-12),))
    kept = points[order][:cap]
    return kept[np.lexsort(kept.T[::-1])]


def select_samples(
    decoupling: sampling.DecouplingSet, spec: SamplingSpec, order: int
) -> SamplePlan:
    """Pick sample frequencies and record any progression/grid structure."""
    n = decoupling.points.shape[1]
    strategy = spec.strategy
    if strategy == "auto":
        if n == 1:
            cap = spec.count if spec.count is not None else MAX_AUTO_SAMPLES
            pts = _cap_closest(decoupling.points, cap)
            progs = prony.detect_progressions(pts)
            progs = [p for p in progs if len(p) >= 2 * order]
            if progs:
                prog = progs[0]
                return SamplePlan(
                    sampling.SampleSet(pts, source="auto_full"),
                    "progression",
                    base=prog.base,
                    step=prog.step,
                    indices=prog.indices,
                )
            strategy = "closest_to_origin"
        else:
            grid = prony.detect_grid(decoupling.points, (2 * order, 2 * order))
            if grid is not None:
                return SamplePlan(
                    sampling.SampleSet(grid.points(), source="auto_grid"),
                    "grid",
                    grid=grid,
                )
            strategy = "closest_to_origin"
    count = spec.count if spec.count is not None else 4 * order
    if strategy == "all":
        samples = sampling.choose_samples(decoupling, None, "all")
    else:
        count = min(count, len(decoupling.points)) if strategy == "closest_to_origin" else count
        count = max(count, 2 * order)
        samples = sampling.choose_samples(decoupling, count, strategy)
    pts = samples.frequencies
    if strategy == "consecutive_progression":
        return SamplePlan(
            samples,
            "progression",
            base=pts[0],
            step=pts[1] - pts[0],
            indices=tuple(range(len(pts))),
        )
    progs = prony.detect_progressions(pts)
    full = [p for p in progs if len(p) >= max(4, 2 * order)]
    if full:
        prog = full[0]
        return SamplePlan(
            samples,
            "progression",
            base=prog.base,
            step=prog.step,
            indices=prog.indices,
        )
    return SamplePlan(samples, "generalized")


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AtomEntry:
    atom_index: int
    atom: SignalAtom
    error: str | None = None
    decoupling: sampling.DecouplingSet | None = None
    plan: SamplePlan | None = None
    system: prony.GeneralizedPronySystem | None = None
    solution: prony.PronySolution | None = None
    estimates: tuple = ()
    certificates: dict = field(default_factory=dict)
    warnings: tuple = ()


@dataclass(frozen=True)
class ReconstructionReport:
    config: ExperimentConfig
    entries: tuple
    match: "MatchScore | None"
    status: str
    timing: dict

    def to_json_dict(self, include_timing: bool = True) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "status": self.status,
            "config": self.config.to_json_dict(),
            "entries": [_entry_to_json(e) for e in self.entries],
            "match": None if self.match is None else _match_to_json(self.match),
        }
        if include_timing:
            out["timing"] = self.timing
        return out


def _entry_to_json(entry: AtomEntry) -> dict:
    out = {
        "atom_index": entry.atom_index,
        "atom": entry.atom.label(),
        "error": entry.error,
        "warnings": list(entry.warnings),
        "certificates": entry.certificates,
    }
    if entry.decoupling is not None:
        out["decoupling"] = sampling.decoupling_to_json_dict(entry.decoupling)
    if entry.plan is not None:
        out["samples"] = {
            "path": entry.plan.path,
            "frequencies": sampling.points_to_rows(entry.plan.samples.frequencies),
            "base": None if entry.plan.base is None else _vec(entry.plan.base),
            "step": None if entry.plan.step is None else _vec(entry.plan.step),
        }
    if entry.system is not None:
        out["system"] = {
            "order": entry.system.order,
            "exponents": sampling.points_to_rows(entry.system.exponents),
            "rhs": [_cplx(v) for v in entry.system.rhs],
        }
    if entry.solution is not None:
        nodes = entry.solution.nodes
        nodes = nodes[:, None] if nodes.ndim == 1 else nodes
        out["solution"] = {
            "amplitudes": [_cplx(a) for a in entry.solution.amplitudes],
            "nodes": [[_cplx(c) for c in row] for row in nodes],
            "residual": entry.solution.residual,
            "condition_estimate": entry.solution.condition_estimate,
            "flags": list(entry.solution.flags),
        }
    out["estimates"] = [
        {
            "amplitude": _cplx(e.amplitude),
            "shift": _vec(e.shift),
            "alias_period": _vec(e.alias_period),
            "alias_basis": None
            if e.alias_basis is None
            else [[float(v) for v in row] for row in e.alias_basis],
            "alias_amp_factors": None
            if e.alias_amp_factors is None
            else [_cplx(v) for v in e.alias_amp_factors],
            "alias_note": e.alias_note,
            "node_modulus_deviation": e.node_modulus_deviation,
        }
        for e in entry.estimates
    ]
    return out


def _standard_from_polished(polished, base, step):
    """Convert generalized (a, y) pairs back to progression unknowns."""
    nodes = polished.nodes
    nodes = nodes[:, None] if nodes.ndim == 1 else nodes
    lam = np.log(nodes.astype(complex))
    xi = np.exp(lam @ np.asarray(step, dtype=float))
    alpha = polished.amplitudes * np.exp(lam @ np.asarray(base, dtype=float))
    return prony.PronySolution(
        amplitudes=alpha,
        nodes=xi,
        residual=polished.residual,
        condition_estimate=polished.condition_estimate,
        flags=polished.flags,
    )


def _solve_entry(system, plan, seed):
    """Solve along the detected structure; returns (solution, estimates).

    Progression path: classical solve on the progression subset, then a
    refit against every sample (the classical steps amplify rounding for
    clustered nodes, the damped refit does not).  The reported solution
    carries full nodes so its residual is recomputable against the system.
    """
    if plan.path == "progression":
        idx = list(plan.indices)
        sub = prony.GeneralizedPronySystem(
            system.exponents[idx], system.rhs[idx], system.order, system.dimension
        )
        std = prony.reduce_to_standard(sub, plan.base, plan.step)
        rough = prony.solve_standard_prony(std, system.order, seed=seed)
        if system.dimension != 1 or len(rough.nodes) != system.order:
            estimates = prony.recover_shifts(rough, plan.base, plan.step)
            return rough, estimates
        step = float(np.asarray(plan.step).ravel()[0])
        base = float(np.asarray(plan.base).ravel()[0])
        init_nodes = np.exp(np.log(rough.nodes) / step)
        init = prony.PronySolution(
            amplitudes=rough.amplitudes * np.power(init_nodes, -base),
            nodes=init_nodes,
            residual=prony.residual(
                system,
                prony.PronySolution(
                    rough.amplitudes * np.power(init_nodes, -base), init_nodes, 0.0, 0.0
                ),
            ),
            condition_estimate=rough.condition_estimate,
        )
        polished = prony.solve_generalized(system, init=init, seed=seed)
        final = polished if polished.residual <= init.residual else init
        estimates = prony.recover_shifts(
            _standard_from_polished(final, plan.base, plan.step),
            plan.base,
            plan.step,
        )
        return final, estimates
    if plan.path == "grid":
        solution = prony.solve_grid(system, plan.grid, seed=seed)
        return solution, prony.recover_shifts_lattice(
            solution, plan.grid.base, plan.grid.steps
        )
    solution = prony.solve_generalized(system, seed=seed)
    return solution, prony.recover_shifts_nodes(solution)


def _attach_certificates(entry_certs, config, decoupling, plan, order):
    n = decoupling.points.shape[1]
    toggles = config.certificates
    if toggles.window and n == 1:
        try:
            cert = uniqueness.one_d_window(decoupling.points[:, 0], order)
            entry_certs["window"] = {
                "order": cert.order,
                "length": cert.length,
                "rho": cert.rho,
                "lo": cert.lo,
                "hi": cert.hi,
                "points": _vec(cert.points),
            }
        except InsufficientPointsError as exc:
            entry_certs["window"] = {"error": str(exc)}
    if toggles.span:
        cert = uniqueness.span_certificate(
            plan.samples.frequencies, config.window.edge, order, n, config.constant
        )
        entry_certs["span"] = {
            "verdict": cert.verdict,
            "epsilon_star": cert.epsilon_star,
            "covering_lower": cert.covering_lower,
            "threshold": cert.threshold,
            "constant_value": cert.constant_value,
            "scope": cert.scope,
        }
    if toggles.net and plan.step is not None and n == 1:
        h = float(np.linalg.norm(plan.step))
        params = uniqueness.NetParams(
            alpha=toggles.net_alpha,
            h=h,
            anchor=tuple(np.asarray(plan.base).ravel()),
        )
        # the grid side of the net check runs over the samples' own span
        freqs = plan.samples.frequencies[:, 0]
        span_window = sampling.Window(
            ((float(freqs.min()) + float(freqs.max())) / 2.0,),
            float(freqs.max() - freqs.min()) + h,
        )
        try:
            cert = uniqueness.net_certificate(
                plan.samples.frequencies, params, order, config.constant,
                window=span_window,
            )
            entry_certs["net"] = {
                "verdict": cert.verdict,
                "threshold": cert.threshold,
                "alpha": cert.alpha,
                "h": cert.h,
                "edge": cert.edge,
            }
        except NotANetError as exc:
            entry_certs["net"] = {"error": str(exc)}


def run_reconstruction(config: ExperimentConfig, base_dir=None) -> ReconstructionReport:
    """Run the full per-atom pipeline; deterministic given the config."""
    t0 = time.perf_counter()
    atoms = list(config.atoms)
    file_freqs = file_values = None
    if config.measurements_csv is not None:
        path = Path(config.measurements_csv)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        file_freqs, file_values = load_measurement_csv(path, config.dimension)
    entries = []
    per_atom_time = {}
    for r, atom in enumerate(atoms):
        t_atom = time.perf_counter()
        order = config.orders[r]
        try:
            decoupling = sampling.decoupling_set(atoms, r, config.window)
            plan = select_samples(decoupling, config.sampling_specs[r], order)
            if file_freqs is not None:
                measurements = _measurements_from_file(
                    plan.samples.frequencies,
                    file_freqs,
                    file_values,
                    config.noise_level,
                    config.seed,
                )
            else:
                measurements = signal_model.synthesize_measurements(
                    config.truth,
                    plan.samples,
                    noise_level=config.noise_level,
                    seed=config.seed + r,
                )
            system = prony.assemble_decoupled(
                atoms, r, measurements, order, nonzero_tol=decoupling.nonzero_tol
            )
            solution, estimates = _solve_entry(system, plan, config.seed)
            warnings = []
            for flag in solution.flags:
                warnings.append(f"solver flag: {flag}")
            worst_dev = max(
                (e.node_modulus_deviation for e in estimates), default=0.0
            )
            if worst_dev > 1e-6:
                warnings.append(
                    f"node modulus deviates from 1 by {worst_dev:.3g}"
                )
            certs = {}
            _attach_certificates(certs, config, decoupling, plan, order)
            entries.append(
                AtomEntry(
                    atom_index=r,
                    atom=atom,
                    decoupling=decoupling,
                    plan=plan,
                    system=system,
                    solution=solution,
                    estimates=tuple(estimates),
                    certificates=certs,
                    warnings=tuple(warnings),
                )
            )
        except _PER_ATOM_ERRORS as exc:
            entries.append(
                AtomEntry(
                    atom_index=r,
                    atom=atom,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
        per_atom_time[str(r)] = time.perf_counter() - t_atom
    match = None
    if config.truth is not None:
        match = match_and_score(
            config.truth, [list(e.estimates) for e in entries]
        )
    status = "partial" if any(e.error for e in entries) else "ok"
    timing = {"total_seconds": time.perf_counter() - t0, "per_atom_seconds": per_atom_time}
    return ReconstructionReport(
        config=config, entries=tuple(entries), match=match, status=status,
        timing=timing,
    )


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TermMatch:
    truth_index: int
    estimate_index: int
    shift_error: float
    amplitude_rel_error: float


@dataclass(frozen=True)
class AtomScore:
    atom_index: int
    matches: tuple
    unmatched_truth: int
    unmatched_estimates: int

    @property
    def max_shift_error(self) -> float:
        return max((m.shift_error for m in self.matches), default=float("nan"))

    @property
    def max_amplitude_error(self) -> float:
        return max((m.amplitude_rel_error for m in self.matches), default=float("nan"))


@dataclass(frozen=True)
class MatchScore:
    atoms: tuple

    @property
    def max_shift_error(self) -> float:
        vals = [a.max_shift_error for a in self.atoms if a.matches]
        return max(vals) if vals else float("nan")

    @property
    def max_amplitude_error(self) -> float:
        vals = [a.max_amplitude_error for a in self.atoms if a.matches]
        return max(vals) if vals else float("nan")


def modular_shift_distance(delta, alias_basis=None, search: int = 3):
    """Distance after removing the closest alias-lattice vector.

    Returns (distance, k) where ``k`` is the integer combination of alias
    basis columns that realizes it (None without a basis).
    """
    d = np.atleast_1d(np.asarray(delta, dtype=float))
    if alias_basis is None:
        return float(np.linalg.norm(d)), None
    basis = np.asarray(alias_basis, dtype=float)
    n = len(d)
    approx = np.linalg.solve(basis, d) if n > 1 else d / basis[0, 0]
    approx = np.atleast_1d(approx)
    best = None
    ranges = [
        range(int(np.floor(a)) - search, int(np.ceil(a)) + search + 1) for a in approx
    ]
    grids = np.meshgrid(*ranges, indexing="ij")
    ks = np.stack([g.ravel() for g in grids], axis=1)
    for k in ks:
        val = float(np.linalg.norm(d - basis @ k))
        if best is None or val < best[0]:
            best = (val, k)
    return best


def _assignment(cost: np.ndarray):
    """Minimal-total-cost bijection on min(rows, cols) pairs.

    Exhaustive for small sizes, greedy beyond.
    """
    import itertools

    nt, ne = cost.shape
    k = min(nt, ne)
    if k == 0:
        return []
    if max(nt, ne) <= 6:
        best = None
        rows = range(nt)
        for rsel in itertools.combinations(rows, k):
            for perm in itertools.permutations(range(ne), k):
                total = sum(cost[i, j] for i, j in zip(rsel, perm))
                if best is None or total < best[0]:
                    best = (total, list(zip(rsel, perm)))
        return best[1]
    pairs = []
    used_r, used_c = set(), set()
    order = np.argsort(cost, axis=None, kind="stable")
    for flat in order:
        i, j = divmod(int(flat), ne)
        if i in used_r or j in used_c:
            continue
        pairs.append((i, j))
        used_r.add(i)
        used_c.add(j)
        if len(pairs) == k:
            break
    return pairs


def _aliased_amplitude(est, k):
    """Amplitude of the alias representative k basis hops from the estimate."""
    if k is None or est.alias_amp_factors is None:
        return est.amplitude
    return est.amplitude * np.prod(est.alias_amp_factors.astype(complex) ** k)


def match_and_score(truth: ShiftModel, estimates_per_atom) -> MatchScore:
    """Optimal truth-to-estimate assignment per atom, modular in the alias
    lattice carried by each estimate.

    The amplitude is compared at the alias representative closest to the
    truth shift, with the documented per-hop amplitude factor applied.
    """
    scores = []
    for r, (terms, estimates) in enumerate(zip(truth.terms, estimates_per_atom)):
        nt, ne = len(terms), len(estimates)
        cost = np.zeros((nt, ne))
        hops = {}
        for i, term in enumerate(terms):
            for j, est in enumerate(estimates):
                delta = np.asarray(term.shift) - est.shift
                cost[i, j], hops[i, j] = modular_shift_distance(delta, est.alias_basis)
        pairs = _assignment(cost)
        matches = []
        for i, j in pairs:
            term, est = terms[i], estimates[j]
            amp = _aliased_amplitude(est, hops[i, j])
            amp_err = abs(amp - term.amplitude) / abs(term.amplitude)
            matches.append(
                TermMatch(
                    truth_index=i,
                    estimate_index=j,
                    shift_error=float(cost[i, j]),
                    amplitude_rel_error=float(amp_err),
                )
            )
        scores.append(
            AtomScore(
                atom_index=r,
                matches=tuple(matches),
                unmatched_truth=nt - len(pairs),
                unmatched_estimates=ne - len(pairs),
            )
        )
    return MatchScore(atoms=tuple(scores))


def _match_to_json(match: MatchScore) -> dict:
    return {
        "atoms": [
            {
                "atom_index": a.atom_index,
                "matches": [
                    {
                        "truth_index": m.truth_index,
                        "estimate_index": m.estimate_index,
                        "shift_error": m.shift_error,
                        "amplitude_rel_error": m.amplitude_rel_error,
                    }
                    for m in a.matches
                ],
                "unmatched_truth": a.unmatched_truth,
                "unmatched_estimates": a.unmatched_estimates,
            }
            for a in match.atoms
        ],
    }


# ---------------------------------------------------------------------------
# Artifact writers
# ---------------------------------------------------------------------------

def write_moments_csv(report: ReconstructionReport, path):
    """One row per assembled equation: atom, index, Re and Im of the ratio."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["atom_index", "ell", "re", "im"])
        for entry in report.entries:
            if entry.system is None:
                continue
            for ell, value in enumerate(entry.system.rhs):
                writer.writerow(
                    [entry.atom_index, ell, repr(float(value.real)), repr(float(value.imag))]
                )


def write_report_artifacts(report: ReconstructionReport, out_dir) -> dict:
    """Write report.json, moments.csv and zeros.svg; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    dump_json(report.to_json_dict(), report_path)
    moments_path = out / "moments.csv"
    write_moments_csv(report, moments_path)
    svg_path = out / "zeros.svg"
    sample_sets = [
        None if e.plan is None else e.plan.samples.frequencies for e in report.entries
    ]
    svg_path.write_text(
        render_zero_plot(list(report.config.atoms), report.config.window, sample_sets)
    )
    return {
        "report": str(report_path),
        "moments": str(moments_path),
        "zeros": str(svg_path),
    }
