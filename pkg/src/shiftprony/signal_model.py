"""Shift-combination signal models and closed-form Fourier evaluation.

The measured signal is a linear combination of shifted copies of known base
atoms,

    F(x) = sum_j sum_q  a[j,q] * f_j(x - x[j,q]),

with unknown real amplitudes a and shift vectors x.  All transforms use the
non-unitary convention

    FT(f)(s) = integral exp(-i s.x) f(x) dx,

so shifting an atom by x multiplies its transform by exp(-i s.x).  Constant
prefactors cancel in the sample ratios consumed downstream, hence the
convention is observationally neutral for reconstruction; it is chosen so the
catalog zero sets sit at clean multiples of pi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError

SQRT2 = float(np.sqrt(2.0))

# kind -> (dimension, number of size parameters)
_KINDS = {
    "box1d": (1, 1),
    "delta_pair": (1, 1),
    "dirac": (1, 0),
    "gaussian": (1, 1),
    "box2d": (2, 2),
    "rotated_square": (2, 1),
}


@dataclass(frozen=True)
class SignalAtom:
    """One known base signal, identified by kind and size parameters.

    Catalog kinds (size parameters strictly positive):

    * ``box1d(b)``       indicator of ``[-b, b]``
    * ``delta_pair(c)``  two unit impulses at ``+-c``
    * ``dirac``          unit impulse at the origin
    * ``gaussian(sigma)`` ``exp(-x^2 / (2 sigma^2))``
    * ``box2d(b1, b2)``  indicator of ``[-b1, b1] x [-b2, b2]``
    * ``rotated_square(d)`` square rotated by pi/4; ``d = sqrt(2)`` gives the
      transform ``8 sinc((w+r)/2) sinc((w-r)/2)`` exactly
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown atom kind {self.kind!r}")
        dim, nparams = _KINDS[self.kind]
        params = tuple(float(p) for p in self.params)
        if len(params) != nparams:
            raise ValueError(
                f"{self.kind} takes {nparams} size parameter(s), got {len(params)}"
            )
        if any(p <= 0 or not np.isfinite(p) for p in params):
            raise ValueError(f"{self.kind} size parameters must be finite and > 0")
        object.__setattr__(self, "params", params)

    @property
    def dimension(self) -> int:
        return _KINDS[self.kind][0]

    def label(self) -> str:
        if self.params:
            inner = ", ".join(f"{p:g}" for p in self.params)
            return f"{self.kind}({inner})"
        return self.kind


def box1d(halfwidth: float) -> SignalAtom:
    return SignalAtom("box1d", (halfwidth,))


def delta_pair(offset: float) -> SignalAtom:
    return SignalAtom("delta_pair", (offset,))


def dirac() -> SignalAtom:
    return SignalAtom("dirac", ())


def gaussian(width: float) -> SignalAtom:
    return SignalAtom("gaussian", (width,))


def box2d(halfwidth1: float, halfwidth2: float) -> SignalAtom:
    return SignalAtom("box2d", (halfwidth1, halfwidth2))


def rotated_square(half_diagonal: float = SQRT2) -> SignalAtom:
    return SignalAtom("rotated_square", (half_diagonal,))


def _sinc(t):
    """sin(t)/t with the removable singularity filled in."""
    return np.sinc(np.asarray(t) / np.pi)


def _split_1d(s):
    arr = np.asarray(s, dtype=float)
    if arr.ndim and arr.shape[-1] == 1:
        arr = arr[..., 0]
    return arr


def _split_2d(s):
    arr = np.asarray(s, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise DimensionMismatchError(
            f"expected frequency vectors of length 2, got shape {arr.shape}"
        )
    return arr[..., 0], arr[..., 1]


def atom_ft(atom: SignalAtom, s):
    """Closed-form transform of one atom at frequency ``s``.

    ``s`` is a scalar or array of frequencies for 1D atoms, and an array whose
    last axis has length 2 for 2D atoms.  Returns complex values of the
    matching shape.
    """
    if atom.dimension == 1:
        sv = _split_1d(s)
        if atom.kind == "box1d":
            (b,) = atom.params
            out = 2.0 * b * _sinc(b * sv)
        elif atom.kind == "delta_pair":
            (c,) = atom.params
            out = 2.0 * np.cos(c * sv)
        elif atom.kind == "dirac":
            out = np.ones_like(sv)
        else:  # gaussian
            (sigma,) = atom.params
            out = np.sqrt(2.0 * np.pi) * sigma * np.exp(-0.5 * (sigma * sv) ** 2)
    else:
        w, r = _split_2d(s)
        if atom.kind == "box2d":
            b1, b2 = atom.params
            out = 4.0 * b1 * b2 * _sinc(b1 * w) * _sinc(b2 * r)
        else:  # rotated_square
            (d,) = atom.params
            scale = d / (2.0 * SQRT2)
            out = 8.0 * _sinc(scale * (w + r)) * _sinc(scale * (w - r))
    out = np.asarray(out, dtype=complex)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class ShiftTerm:
    """One (amplitude, shift) pair of the combination model."""

    amplitude: float
    shift: tuple

    def __post_init__(self):
        object.__setattr__(self, "shift", tuple(float(c) for c in self.shift))

    @property
    def dimension(self) -> int:
        return len(self.shift)


@dataclass(frozen=True)
class ShiftModel:
    """Atoms plus per-atom shift terms; the full parametric signal.

    Construction is permissive so that invalid models can be built and then
    inspected with :func:`validate_model`.
    """

    atoms: tuple
    terms: tuple  # one tuple of ShiftTerm per atom

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "terms", tuple(tuple(t) for t in self.terms))

    @property
    def dimension(self) -> int:
        return self.atoms[0].dimension if self.atoms else 0

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    def orders(self) -> tuple:
        return tuple(len(t) for t in self.terms)


@dataclass(frozen=True)
class FourierSample:
    frequency: tuple
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "frequency", tuple(float(c) for c in self.frequency))
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class MeasurementSet:
    """Fourier samples with the noise level and seed that produced them."""

    samples: tuple
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([s.frequency for s in self.samples], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples], dtype=complex)


def _as_freq_array(sample_set, dimension: int) -> np.ndarray:
    freqs = getattr(sample_set, "frequencies", sample_set)
    arr = np.asarray(freqs, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[1] != dimension:
        raise DimensionMismatchError(
            f"frequencies have dimension {arr.shape[1]}, model has {dimension}"
        )
    return arr


def model_ft(model: ShiftModel, s):
    """Exact transform of the full model at ``s`` via the shift identity.

    No numerical integration: each term contributes
    ``a * exp(-i s.x) * atom_ft(f, s)``.
    """
    n = model.dimension
    arr = np.asarray(s, dtype=float)
    if n == 1:
        sv = _split_1d(arr)
        out = np.zeros(np.shape(sv), dtype=complex)
        for atom, terms in zip(model.atoms, model.terms):
            base = atom_ft(atom, sv)
            for term in terms:
                out = out + term.amplitude * np.exp(-1j * sv * term.shift[0]) * base
        return out[()] if np.ndim(out) == 0 else out
    single = arr.ndim == 1
    pts = arr[None, :] if single else arr.reshape(-1, n)
    out = np.zeros(pts.shape[0], dtype=complex)
    for atom, terms in zip(model.atoms, model.terms):
        base = atom_ft(atom, pts)
        for term in terms:
            phase = np.exp(-1j * pts @ np.asarray(term.shift))
            out = out + term.amplitude * phase * base
    if single:
        return out[0]
    return out.reshape(arr.shape[:-1])


def synthesize_measurements(
    model: ShiftModel, sample_set, noise_level: float = 0.0, seed: int = 0
) -> MeasurementSet:
    """Forward-simulate measurements at the given frequencies.

    Noise is additive complex Gaussian with independent real and imaginary
    parts of standard deviation ``noise_level``, drawn deterministically from
    ``seed``.  With ``noise_level == 0`` the values equal ``model_ft`` exactly.
    """
    if noise_level < 0:
        raise ValueError("noise_level must be nonnegative")
    freqs = _as_freq_array(sample_set, model.dimension)
    values = model_ft(model, freqs if model.dimension > 1 else freqs[:, 0])
    values = np.atleast_1d(np.asarray(values, dtype=complex))
    if noise_level > 0:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(len(values)) + 1j * rng.standard_normal(len(values))
        values = values + noise_level * noise
    samples = tuple(
        FourierSample(tuple(freqs[i]), values[i]) for i in range(len(values))
    )
    return MeasurementSet(samples, noise_level=float(noise_level), seed=int(seed))


@dataclass(frozen=True)
class ModelValidationReport:
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_model(model: ShiftModel) -> ModelValidationReport:
    """List violations of the model invariants; an empty report means valid."""
    problems = []
    if model.num_atoms < 2:
        problems.append("k >= 2 required: the model must combine at least two atoms")
    if len(model.terms) != model.num_atoms:
        problems.append(
            f"term list count {len(model.terms)} does not match atom count {model.num_atoms}"
        )
    dims = {atom.dimension for atom in model.atoms}
    if len(dims) > 1:
        problems.append(f"atoms mix dimensions {sorted(dims)}")
    n = model.dimension
    for j, terms in enumerate(model.terms):
        if len(terms) == 0:
            problems.append(f"atom {j} has an empty term list (q_j >= 1 required)")
        for q, term in enumerate(terms):
            if term.dimension != n:
                problems.append(
                    f"term {q} of atom {j} has shift dimension {term.dimension}, expected {n}"
                )
            if term.amplitude == 0 or not np.isfinite(term.amplitude):
                problems.append(f"term {q} of atom {j} has amplitude {term.amplitude}")
            if not all(np.isfinite(c) for c in term.shift):
                problems.append(f"term {q} of atom {j} has a non-finite shift")
    return ModelValidationReport(tuple(problems))
