"""The all-optical bench: preparation and measurement circuits, populations, witness.

The preparation circuit encodes the ``|eg>`` line of the common-bath map on a
``|Vh>`` beam, with environment state ``|0>`` on path ``E0`` and ``|1>`` on
``E1``.  The measurement circuit sorts both paths by parity and reads eight
output ports ``O1..O8``.  Circuits are plain element lists so a bench file can
be checked against them element by element.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from . import optics as op
from .errors import DegenerateInputError, DomainError, WiringError
from .opensys import INV_SQRT2, SQRT2

# three mirrors on the E0' arm give a reflection-parity sign on |Vh>; pi undoes it
PREP_PHASE = math.pi
# CNOT arm phase that makes CNOT + HWP@22.5 + PBS send psi+ to the H port and psi- to the V port
CNOT_PHASE = math.pi
HADAMARD_ANGLE = 22.5

PORTS = ("O1", "O2", "O3", "O4", "O5", "O6", "O7", "O8")
# which population each port feeds
PORT_POPULATION = ("gg", "ee", "ee", "gg", "psi_plus", "psi_minus", "psi_minus", "psi_plus")
WITNESS_WEIGHTS = {
    "psi_plus": INV_SQRT2,
    "psi_minus": -INV_SQRT2,
    "ee": 1.0 + INV_SQRT2,
    "gg": 1.0 - INV_SQRT2,
}

LAB_NU_PREP = 0.97
LAB_NU_DMZIM = 0.93


@dataclass(frozen=True)
class AngleSetting:
    """HWP1 angle ``theta1`` (counterclockwise, >= 0) and DP1 angle ``theta2`` (clockwise, <= 0), degrees."""

    theta1: float
    theta2: float

    def __post_init__(self):
        if not (0.0 <= self.theta1 <= 45.0):
            raise DomainError(f"theta1 must lie in [0, 45] degrees, got {self.theta1!r}")
        if not (-45.0 <= self.theta2 <= 0.0):
            raise DomainError(f"theta2 must lie in [-45, 0] degrees, got {self.theta2!r}")

    def coefficients(self) -> tuple[float, float, float]:
        """``(D, E, F)`` realized by these angles."""
        t1, t2 = math.radians(2 * self.theta1), math.radians(2 * self.theta2)
        return math.cos(t1), math.sin(t1) * math.sin(t2), math.sin(t1) * math.cos(t2)

    def implied_p(self) -> float:
        return 2.0 - 2.0 * math.cos(math.radians(2 * self.theta1))


@dataclass(frozen=True)
class NoiseModel:
    nu_prep: float = 1.0
    nu_dmzim: float = 1.0

    def __post_init__(self):
        for name in ("nu_prep", "nu_dmzim"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"{name} must lie in [0, 1], got {v!r}")

    @classmethod
    def lab(cls) -> "NoiseModel":
        return cls(LAB_NU_PREP, LAB_NU_DMZIM)

    @property
    def ideal(self) -> bool:
        return self.nu_prep == 1.0 and self.nu_dmzim == 1.0


@dataclass(frozen=True)
class OutputIntensities:
    i1: float
    i2: float
    i3: float
    i4: float
    i5: float
    i6: float
    i7: float
    i8: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "OutputIntensities":
        if len(values) != 8:
            raise DomainError(f"expected 8 port intensities, got {len(values)}")
        return cls(*(float(v) for v in values))

    @property
    def values(self) -> tuple[float, ...]:
        return (self.i1, self.i2, self.i3, self.i4, self.i5, self.i6, self.i7, self.i8)

    @property
    def total(self) -> float:
        return sum(self.values)


@dataclass(frozen=True)
class Populations:
    psi_plus: float
    psi_minus: float
    ee: float
    gg: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.psi_plus, self.psi_minus, self.ee, self.gg)


@dataclass(frozen=True)
class ExperimentRecord:
    p: float
    gt: float
    angles: AngleSetting
    intensities: OutputIntensities
    populations: Populations
    witness: float
    lam: float
    calibrated: bool = True
    lambda_err: Optional[float] = None


# --------------------------------------------------------------------------
# angles


def angles_for_p(p: float) -> AngleSetting:
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    e = -0.5 * p
    f = math.sqrt(0.5 * p * (2.0 - p))
    # sin^2(theta1) = p/4; the asin form stays accurate near p = 0
    theta1 = math.degrees(math.asin(0.5 * math.sqrt(p)))
    theta2 = 0.0 if e == 0.0 and f == 0.0 else 0.5 * math.degrees(math.atan2(e, f))
    return AngleSetting(theta1, theta2)


def rounded_angles(p: float) -> AngleSetting:
    """Exact angles rounded to whole degrees, as set on the lab mounts (30, -18 at p = 1)."""
    a = angles_for_p(p)
    return AngleSetting(float(round(a.theta1)), float(round(a.theta2)))


def p_and_gt(angles: AngleSetting) -> tuple[float, float]:
    p = angles.implied_p()
    if abs(p) < 1e-15:
        p = 0.0
    if p < 1.0:
        return p, -math.log1p(-p)
    return p, (math.inf if p == 1.0 else math.nan)


# --------------------------------------------------------------------------
# circuits


def source() -> op.BeamState:
    """``|Vh>`` on ``E0`` after the S-plate, PBS1 and spatial filter."""
    return op.BeamState.single("E0", "Vh")


def preparation_elements(angles: AngleSetting, dphi: float = PREP_PHASE, nu: float = 1.0) -> list:
    return [
        op.HalfWavePlate("E0", angles.theta1),
        op.PolarizingBeamSplitter(("E0",), "E1", "E0p"),
        op.Mirror("E0p"),
        op.Mirror("E0p"),
        op.Mirror("E0p"),
        op.PhaseShifter("E0p", dphi),
        op.DovePrism("E1", angles.theta2),
        op.ParitySorter("E1", "E1", "E0pp", nu),
        op.PolarizingBeamSplitter(("E0pp", "E0p"), "E0", "D3"),
    ]


def measurement_elements(nu: float = 1.0, dphi_cnot: float = CNOT_PHASE) -> list:
    return [
        op.DoubleParitySorter(("E0", "E1"), ("E0e", "E1e"), ("E0o", "E1o"), nu),
        op.PolarizingBeamSplitter(("E1e",), "O1", "O2"),
        op.PolarizingBeamSplitter(("E0e",), "O3", "O4"),
        op.CnotGate("E1o", dphi_cnot),
        op.CnotGate("E0o", dphi_cnot),
        op.HalfWavePlate("E1o", HADAMARD_ANGLE),
        op.HalfWavePlate("E0o", HADAMARD_ANGLE),
        op.PolarizingBeamSplitter(("E0o",), "O5", "O6"),
        op.PolarizingBeamSplitter(("E1o",), "O8", "O7"),
    ]


def bench_elements(
    angles: AngleSetting,
    noise: NoiseModel = NoiseModel(),
    dphi_prep: float = PREP_PHASE,
    dphi_cnot: float = CNOT_PHASE,
) -> list:
    return preparation_elements(angles, dphi_prep, noise.nu_prep) + measurement_elements(
        noise.nu_dmzim, dphi_cnot
    )


def prepare(angles: AngleSetting, dphi: float = PREP_PHASE, nu: float = 1.0) -> op.BeamState:
    return op.run_elements(source(), preparation_elements(angles, dphi, nu))


def read_ports(state: op.BeamState, ports: Sequence[str] = PORTS) -> OutputIntensities:
    return OutputIntensities.from_values([state.intensity(p) for p in ports])


def measure(
    state: op.BeamState, noise: NoiseModel = NoiseModel(), dphi_cnot: float = CNOT_PHASE
) -> OutputIntensities:
    for path in ("E0", "E1"):
        if not state.has_path(path):
            raise WiringError(f"measurement circuit expects path {path!r}")
    return read_ports(op.run_elements(state, measurement_elements(noise.nu_dmzim, dphi_cnot)))


# --------------------------------------------------------------------------
# analysis


def populations(i: OutputIntensities) -> Populations:
    total = i.total
    if not total > 0.0:
        raise DegenerateInputError("total output intensity is zero")
    v = i.values
    return Populations(
        psi_plus=(v[4] + v[7]) / total,
        psi_minus=(v[5] + v[6]) / total,
        ee=(v[1] + v[2]) / total,
        gg=(v[0] + v[3]) / total,
    )


def witness_trace(pop: Populations) -> float:
    return (
        (1.0 + INV_SQRT2) * pop.ee
        + INV_SQRT2 * pop.psi_plus
        - INV_SQRT2 * pop.psi_minus
        + (1.0 - INV_SQRT2) * pop.gg
    )


def lambda_of_run(i: OutputIntensities) -> float:
    return witness_trace(populations(i)) / (1.0 - SQRT2)


def _propagate(weights: Sequence[float], shares: Sequence[float], rel_error: float) -> float:
    total = sum(shares)
    if not total > 0.0:
        raise DegenerateInputError("total output intensity is zero")
    tr = sum(w * s for w, s in zip(weights, shares)) / total
    # d Lambda / d I_j = (w_j - Tr W rho) / (I_T (1 - sqrt2)), errors independent, sigma_j = rel * I_j
    var = sum(((w - tr) / total * rel_error * s) ** 2 for w, s in zip(weights, shares))
    return math.sqrt(var) / (SQRT2 - 1.0)


def lambda_uncertainty(i: OutputIntensities, rel_error: float = 0.02) -> float:
    """First-order Lambda error from independent relative errors on each port intensity."""
    return _propagate([WITNESS_WEIGHTS[k] for k in PORT_POPULATION], i.values, rel_error)


def lambda_uncertainty_from_populations(pop: Populations, rel_error: float = 0.02) -> float:
    """As :func:`lambda_uncertainty`, treating each population as one lumped intensity."""
    keys = ("psi_plus", "psi_minus", "ee", "gg")
    return _propagate([WITNESS_WEIGHTS[k] for k in keys], pop.as_tuple(), rel_error)


def make_record(
    angles: AngleSetting,
    intensities: OutputIntensities,
    *,
    calibrated: bool = True,
    ccd_error: Optional[float] = None,
    p: Optional[float] = None,
) -> ExperimentRecord:
    if p is None:
        p, gt = p_and_gt(angles)
    else:
        gt = math.inf if p == 1.0 else -math.log1p(-p)
    pop = populations(intensities)
    w = witness_trace(pop)
    err = None if ccd_error is None else lambda_uncertainty(intensities, ccd_error)
    return ExperimentRecord(
        p=p,
        gt=gt,
        angles=angles,
        intensities=intensities,
        populations=pop,
        witness=w,
        lam=w / (1.0 - SQRT2),
        calibrated=calibrated,
        lambda_err=err,
    )


def run_angles(
    angles: AngleSetting,
    noise: NoiseModel = NoiseModel(),
    dphi_prep: float = PREP_PHASE,
    dphi_cnot: float = CNOT_PHASE,
) -> OutputIntensities:
    state = op.run_elements(source(), bench_elements(angles, noise, dphi_prep, dphi_cnot))
    return read_ports(state)


def run_point(
    p: float,
    noise: NoiseModel = NoiseModel(),
    dphi_prep: float = PREP_PHASE,
    *,
    dphi_cnot: float = CNOT_PHASE,
    rounded: bool = False,
    ccd_error: Optional[float] = None,
) -> ExperimentRecord:
    angles = rounded_angles(p) if rounded else angles_for_p(p)
    intensities = run_angles(angles, noise, dphi_prep, dphi_cnot)
    calibrated = dphi_prep == PREP_PHASE and dphi_cnot == CNOT_PHASE
    return make_record(
        angles,
        intensities,
        calibrated=calibrated,
        ccd_error=ccd_error,
        p=None if rounded else float(p),
    )


def sweep(
    p_values: Sequence[float],
    noise: NoiseModel = NoiseModel(),
    dphi: float = PREP_PHASE,
    *,
    workers: Optional[int] = None,
    **kwargs,
) -> list[ExperimentRecord]:
    """One record per ``p``, in input order; ``workers > 1`` evaluates points concurrently."""
    p_values = list(p_values)
    for p in p_values:
        if not (0.0 <= float(p) <= 1.0):
            raise DomainError(f"p must lie in [0, 1], got {p!r}")

    def one(p):
        return run_point(p, noise, dphi, **kwargs)

    if workers and workers > 1 and len(p_values) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, p_values))
    return [one(p) for p in p_values]
