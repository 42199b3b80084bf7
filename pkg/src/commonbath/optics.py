"""State-vector model of a paraxial beam carrying polarization and first-order HG mode.

Each propagation path holds a 4-vector over ``(Hh, Hv, Vh, Vv)``; polarization
is the outer factor.  A :class:`BeamState` is a list of mutually incoherent
branches over the same path set.  Branch 0 is the coherent beam and further
branches hold light scattered to the wrong port of an imperfect-visibility
parity sorter.  Intensities add across branches, amplitudes never do.

Sign conventions (see ``docs/physics.md``):

* half-wave plate at ``theta``: ``V -> cos2t V + sin2t H``, ``H -> sin2t V - cos2t H``
* Dove prism at ``theta``:     ``h -> cos2t h + sin2t v``, ``v -> sin2t h - cos2t v``
* mirror: reflection parity, ``-1`` on ``V`` and on ``v`` (``Hh, Vv`` even; ``Hv, Vh`` odd)
* 50/50 beam splitter: ``(1/sqrt2) [[1, i], [i, 1]]``
* PBS cube: first input's ``H`` and second input's ``V`` leave the transmit port
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import AngleFoldWarning, DomainError, UnsupportedInputError, WiringError

COMPONENTS = ("Hh", "Hv", "Vh", "Vv")
_H = np.array([1.0, 1.0, 0.0, 0.0])
_V = np.array([0.0, 0.0, 1.0, 1.0])
_I2 = np.eye(2)

MIRROR = np.diag([1.0, -1.0, -1.0, 1.0]).astype(complex)
EVEN = 0.5 * (np.eye(4) + MIRROR)
ODD = 0.5 * (np.eye(4) - MIRROR)

# BS -> {two-mirror arm, one-mirror arm + phase} -> BS sorts parity at this arm phase
MZIM_SORT_PHASE = 0.0

_ZERO_TOL = 1e-12


def component_index(label: str) -> int:
    try:
        return COMPONENTS.index(label)
    except ValueError:
        raise DomainError(f"unknown component {label!r}; expected one of {COMPONENTS}") from None


def component_vector(label: str, amplitude: complex = 1.0) -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[component_index(label)] = amplitude
    return v


def _check_angle(theta: float) -> float:
    theta = float(theta)
    if not math.isfinite(theta):
        raise DomainError(f"angle must be finite, got {theta!r}")
    if abs(theta) > 45.0:
        # matrices are 180-degree periodic, so the raw angle is its own exact fold
        warnings.warn(f"angle {theta} deg lies outside [-45, 45]", AngleFoldWarning, stacklevel=3)
    return theta


def hwp_matrix(theta: float) -> np.ndarray:
    """Half-wave plate on polarization, basis ``(H, V)``, ``theta`` in degrees."""
    t = math.radians(2.0 * _check_angle(theta))
    c, s = math.cos(t), math.sin(t)
    return np.array([[-c, s], [s, c]], dtype=complex)


def dove_matrix(theta: float) -> np.ndarray:
    """Dove prism on transverse mode, basis ``(h, v)``, ``theta`` in degrees."""
    t = math.radians(2.0 * _check_angle(theta))
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s], [s, -c]], dtype=complex)


def polarization_op(m: np.ndarray) -> np.ndarray:
    return np.kron(m, _I2)


def mode_op(m: np.ndarray) -> np.ndarray:
    return np.kron(_I2, m)


class BeamState:
    """Immutable collection of incoherent branches, each a ``path -> 4-vector`` map."""

    __slots__ = ("_branches",)

    def __init__(self, branches: Iterable[Mapping[str, np.ndarray]]):
        frozen = []
        for br in branches:
            d = {}
            for path, vec in br.items():
                arr = np.array(vec, dtype=complex)
                if arr.shape != (4,):
                    raise DomainError(f"path {path!r}: expected 4 components, got shape {arr.shape}")
                arr.setflags(write=False)
                d[path] = arr
            frozen.append(d)
        if not frozen:
            raise DomainError("a beam state needs at least one branch")
        keys = list(frozen[0])
        if any(list(b) != keys for b in frozen[1:]):
            raise DomainError("all branches must share the same path set")
        self._branches = tuple(frozen)

    @classmethod
    def single(cls, path: str, component: str = "Vh", amplitude: complex = 1.0) -> "BeamState":
        return cls([{path: component_vector(component, amplitude)}])

    @classmethod
    def from_amplitudes(cls, amplitudes: Mapping[str, Sequence[complex]]) -> "BeamState":
        return cls([dict(amplitudes)])

    @property
    def branches(self) -> tuple[dict[str, np.ndarray], ...]:
        return self._branches

    @property
    def paths(self) -> tuple[str, ...]:
        return tuple(self._branches[0])

    def has_path(self, path: str) -> bool:
        return path in self._branches[0]

    def amplitudes(self, path: str) -> np.ndarray:
        """Coherent amplitudes on ``path``; leakage branches are not included."""
        self._require(path)
        return self._branches[0][path]

    def amplitude(self, path: str, component: str) -> complex:
        return complex(self.amplitudes(path)[component_index(component)])

    def intensity(self, path: str) -> float:
        if not self.has_path(path):
            return 0.0
        return float(sum(np.vdot(b[path], b[path]).real for b in self._branches))

    def intensity_component(self, path: str, component: str) -> float:
        if not self.has_path(path):
            return 0.0
        k = component_index(component)
        return float(sum(abs(b[path][k]) ** 2 for b in self._branches))

    def total_intensity(self) -> float:
        return float(sum(np.vdot(v, v).real for b in self._branches for v in b.values()))

    def _require(self, *paths: str) -> None:
        for p in paths:
            if not self.has_path(p):
                raise WiringError(f"path {p!r} does not exist (live paths: {', '.join(self.paths)})")

    def __repr__(self) -> str:
        parts = []
        for path in self.paths:
            amp = self._branches[0][path]
            terms = [f"{a:.4g}|{c}>" for a, c in zip(amp, COMPONENTS) if abs(a) > _ZERO_TOL]
            parts.append(f"{path}: " + (" + ".join(terms) or "0"))
        extra = f", +{len(self._branches) - 1} incoherent" if len(self._branches) > 1 else ""
        return f"BeamState({'; '.join(parts)}{extra})"


def intensity(state: BeamState, path: str) -> float:
    return state.intensity(path)


def intensity_component(state: BeamState, path: str, component: str) -> float:
    return state.intensity_component(path, component)


# --------------------------------------------------------------------------
# local (single-path) elements


def _local(state: BeamState, path: str, op: np.ndarray) -> BeamState:
    state._require(path)
    out = []
    for br in state.branches:
        nb = dict(br)
        nb[path] = op @ br[path]
        out.append(nb)
    return BeamState(out)


def apply_half_wave_plate(state: BeamState, path: str, theta: float) -> BeamState:
    return _local(state, path, polarization_op(hwp_matrix(theta)))


def apply_dove_prism(state: BeamState, path: str, theta: float) -> BeamState:
    return _local(state, path, mode_op(dove_matrix(theta)))


def apply_mirror(state: BeamState, path: str) -> BeamState:
    return _local(state, path, MIRROR)


def apply_phase(state: BeamState, path: str, phi: float) -> BeamState:
    phi = float(phi)
    if not math.isfinite(phi):
        raise DomainError(f"phase must be finite, got {phi!r}")
    return _local(state, path, np.exp(1j * phi) * np.eye(4))


def apply_swave_plate(state: BeamState, path: str) -> BeamState:
    """S-wave plate acting on a ``|Vh>`` beam: ``|Vh> -> (|Vh> + |Hv>)/sqrt2``."""
    state._require(path)
    k_vh, k_hv = COMPONENTS.index("Vh"), COMPONENTS.index("Hv")
    op = np.zeros((4, 4), dtype=complex)
    op[k_vh, k_vh] = op[k_hv, k_vh] = 1.0 / math.sqrt(2.0)
    for br in state.branches:
        v = br[path].copy()
        v[k_vh] = 0.0
        if np.max(np.abs(v)) > _ZERO_TOL:
            raise UnsupportedInputError("S-wave plate is only modeled for a |Vh> input")
    return _local(state, path, op)


_SELECTORS = {
    "all": np.ones(4),
    "H": _H,
    "V": _V,
    "h": np.array([1.0, 0.0, 1.0, 0.0]),
    "v": np.array([0.0, 1.0, 0.0, 1.0]),
}


def blocker_mask(select: str) -> np.ndarray:
    if select in _SELECTORS:
        return _SELECTORS[select]
    if select in COMPONENTS:
        return np.eye(4)[COMPONENTS.index(select)]
    raise DomainError(f"unknown blocker selector {select!r}")


def apply_blocker(state: BeamState, path: str, select: str = "all") -> BeamState:
    """Absorb the selected components on ``path``; the result is sub-normalized."""
    return _local(state, path, np.diag(1.0 - blocker_mask(select)).astype(complex))


# --------------------------------------------------------------------------
# path-routing elements


def _as_paths(paths: Union[str, Sequence[str]]) -> tuple[str, ...]:
    return (paths,) if isinstance(paths, str) else tuple(paths)


def _check_ports(state: BeamState, inputs: tuple[str, ...], outputs: tuple[str, ...], max_in: int = 2) -> None:
    if not 1 <= len(inputs) <= max_in:
        raise WiringError(f"expected 1..{max_in} input paths, got {len(inputs)}")
    if len(set(inputs)) != len(inputs):
        raise WiringError(f"repeated input path in {inputs}")
    if len(set(outputs)) != len(outputs):
        raise WiringError(f"repeated output path in {outputs}")
    state._require(*inputs)
    for out in outputs:
        if out not in inputs and state.has_path(out):
            raise WiringError(f"output path {out!r} collides with a live path")


def _route(state: BeamState, inputs: tuple[str, ...], fn) -> BeamState:
    out = []
    for br in state.branches:
        vecs = [br[p] for p in inputs]
        nb = {k: v for k, v in br.items() if k not in inputs}
        nb.update(fn(*vecs))
        out.append(nb)
    return BeamState(out)


def apply_pbs(state: BeamState, in_paths, out_transmit: str, out_reflect: str) -> BeamState:
    """Polarizing beam splitter: transmits ``H``, reflects ``V``.

    With two inputs the cube merges the first input's ``H`` with the second
    input's ``V`` on ``out_transmit`` (and the complementary pair on
    ``out_reflect``), so it stays unitary.
    """
    inputs = _as_paths(in_paths)
    _check_ports(state, inputs, (out_transmit, out_reflect))

    def fn(a, b=None):
        if b is None:
            b = np.zeros(4, dtype=complex)
        return {out_transmit: _H * a + _V * b, out_reflect: _V * a + _H * b}

    return _route(state, inputs, fn)


def apply_bs(state: BeamState, in_paths, out_paths) -> BeamState:
    """Symmetric 50/50 beam splitter with ``i`` on reflection."""
    inputs = _as_paths(in_paths)
    outputs = _as_paths(out_paths)
    if len(outputs) != 2:
        raise WiringError("a beam splitter has exactly two output paths")
    _check_ports(state, inputs, outputs)
    r = 1.0 / math.sqrt(2.0)

    def fn(a, b=None):
        if b is None:
            b = np.zeros(4, dtype=complex)
        return {outputs[0]: r * (a + 1j * b), outputs[1]: r * (1j * a + b)}

    return _route(state, inputs, fn)


def _check_visibility(nu: float) -> float:
    nu = float(nu)
    if not (0.0 <= nu <= 1.0):
        raise DomainError(f"visibility must lie in [0, 1], got {nu!r}")
    return nu


def mzim_parity_sort(
    state: BeamState, in_path: str, out_even: str, out_odd: str, visibility: float = 1.0
) -> BeamState:
    """Reflection-parity sorter: ``Hh, Vv`` to ``out_even``, ``Hv, Vh`` to ``out_odd``.

    Below unit visibility a fraction ``(1 - nu)/2`` of each parity component's
    intensity lands on the wrong port, carried in a new incoherent branch.
    """
    nu = _check_visibility(visibility)
    _check_ports(state, (in_path,), (out_even, out_odd), max_in=1)
    good = math.sqrt(0.5 * (1.0 + nu))
    bad = math.sqrt(0.5 * (1.0 - nu))
    kept, leaked = [], []
    for br in state.branches:
        v = br[in_path]
        even, odd = EVEN @ v, ODD @ v
        nb = {k: x for k, x in br.items() if k != in_path}
        nb[out_even] = good * even
        nb[out_odd] = good * odd
        kept.append(nb)
        if bad > 0.0 and np.max(np.abs(v)) > 0.0:
            lb = {k: np.zeros(4, dtype=complex) for k in nb}
            lb[out_even] = bad * odd
            lb[out_odd] = bad * even
            leaked.append(lb)
    return BeamState(kept + leaked)


def dmzim_parity_sort(state: BeamState, in_paths, out_even, out_odd, visibility: float = 1.0) -> BeamState:
    """Double-input sorter: two beams sorted by the same interferometer."""
    ins, evens, odds = _as_paths(in_paths), _as_paths(out_even), _as_paths(out_odd)
    if not (len(ins) == len(evens) == len(odds) == 2):
        raise WiringError("DMZIM takes two inputs and two even/odd output pairs")
    for i, e, o in zip(ins, evens, odds):
        state = mzim_parity_sort(state, i, e, o, visibility)
    return state


def mzim_explicit(
    state: BeamState, in_path: str, out_even: str, out_odd: str, phase: float = MZIM_SORT_PHASE
) -> BeamState:
    """MZIM built from primitives: BS, a two-mirror arm, a one-mirror arm with phase, BS.

    At ``MZIM_SORT_PHASE`` the odd part leaves ``out_odd`` unchanged and the even
    part leaves ``out_even`` times ``i``.
    """
    arm_a, arm_b = f"{in_path}~armA", f"{in_path}~armB"
    state = apply_bs(state, in_path, (arm_a, arm_b))
    state = apply_mirror(apply_mirror(state, arm_a), arm_a)
    state = apply_phase(apply_mirror(state, arm_b), arm_b, phase)
    return apply_bs(state, (arm_a, arm_b), (out_odd, out_even))


def cnot_gate(state: BeamState, path: str, phi: float = 0.0) -> BeamState:
    """Polarization-controlled NOT on the transverse mode (flips when ``H``).

    PBS split, Dove prism at 45 degrees and phase ``phi`` on the ``H`` arm, PBS
    recombination.  At ``phi = 0``: ``Hh <-> Hv``, ``Vh, Vv`` unchanged.
    """
    arm_h, arm_v, dump = f"{path}~H", f"{path}~V", f"{path}~dump"
    state = apply_pbs(state, path, arm_h, arm_v)
    state = apply_phase(apply_dove_prism(state, arm_h, 45.0), arm_h, phi)
    state = apply_pbs(state, (arm_h, arm_v), path, dump)
    # arm_h holds only H and arm_v only V, so the dump port is identically zero
    return BeamState([{k: v for k, v in br.items() if k != dump} for br in state.branches])


# --------------------------------------------------------------------------
# element values


@dataclass(frozen=True)
class HalfWavePlate:
    path: str
    theta: float

    def apply(self, state: BeamState) -> BeamState:
        return apply_half_wave_plate(state, self.path, self.theta)


@dataclass(frozen=True)
class DovePrism:
    path: str
    theta: float

    def apply(self, state: BeamState) -> BeamState:
        return apply_dove_prism(state, self.path, self.theta)


@dataclass(frozen=True)
class PolarizingBeamSplitter:
    in_paths: tuple[str, ...]
    out_transmit: str
    out_reflect: str

    def apply(self, state: BeamState) -> BeamState:
        return apply_pbs(state, self.in_paths, self.out_transmit, self.out_reflect)


@dataclass(frozen=True)
class BeamSplitter:
    in_paths: tuple[str, ...]
    out_paths: tuple[str, str]

    def apply(self, state: BeamState) -> BeamState:
        return apply_bs(state, self.in_paths, self.out_paths)


@dataclass(frozen=True)
class Mirror:
    path: str

    def apply(self, state: BeamState) -> BeamState:
        return apply_mirror(state, self.path)


@dataclass(frozen=True)
class PhaseShifter:
    path: str
    phi: float

    def apply(self, state: BeamState) -> BeamState:
        return apply_phase(state, self.path, self.phi)


@dataclass(frozen=True)
class SWavePlate:
    path: str

    def apply(self, state: BeamState) -> BeamState:
        return apply_swave_plate(state, self.path)


@dataclass(frozen=True)
class Blocker:
    path: str
    select: str = "all"

    def apply(self, state: BeamState) -> BeamState:
        return apply_blocker(state, self.path, self.select)


@dataclass(frozen=True)
class ParitySorter:
    in_path: str
    out_even: str
    out_odd: str
    visibility: float = 1.0

    def apply(self, state: BeamState) -> BeamState:
        return mzim_parity_sort(state, self.in_path, self.out_even, self.out_odd, self.visibility)


@dataclass(frozen=True)
class DoubleParitySorter:
    in_paths: tuple[str, str]
    out_even: tuple[str, str]
    out_odd: tuple[str, str]
    visibility: float = 1.0

    def apply(self, state: BeamState) -> BeamState:
        return dmzim_parity_sort(state, self.in_paths, self.out_even, self.out_odd, self.visibility)


@dataclass(frozen=True)
class CnotGate:
    path: str
    phi: float = 0.0

    def apply(self, state: BeamState) -> BeamState:
        return cnot_gate(state, self.path, self.phi)


OpticalElement = Union[
    HalfWavePlate,
    DovePrism,
    PolarizingBeamSplitter,
    BeamSplitter,
    Mirror,
    PhaseShifter,
    SWavePlate,
    Blocker,
    ParitySorter,
    DoubleParitySorter,
    CnotGate,
]


def run_elements(state: BeamState, elements: Iterable[OpticalElement]) -> BeamState:
    for el in elements:
        state = el.apply(state)
    return state
