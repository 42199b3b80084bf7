"""Cross-checks between the independent routes to the same numbers.

Each check returns a :class:`CheckResult`; ``status`` is ``pass``, ``fail`` or
``skip``.  Checks that compare circuit populations against the closed-form
state only make sense for an ideal bench and are skipped under noise; the
unitarity check still runs, since leakage moves intensity but never loses it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bench as bf
from . import experiment as ex
from . import opensys as osys
from . import optics as op

P_GRID = tuple(np.linspace(0.0, 1.0, 11))
GT_GRID = (0.0, 0.1, 0.5, 1.0, 2.0, 5.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str

    @property
    def ok(self) -> bool:
        return self.status != "fail"


def _verdict(name: str, worst: float, tol: float) -> CheckResult:
    status = "pass" if worst <= tol else "fail"
    return CheckResult(name, status, f"max deviation {worst:.3g} (tol {tol:g})")


def check_normalization() -> CheckResult:
    worst = 0.0
    for gt in np.linspace(0.0, 20.0, 401):
        k = osys.map_coefficients(gt)
        worst = max(worst, abs(k.a**2 + 2 * k.b**2 + k.c**2 - 1), abs(k.d**2 + k.e**2 + k.f**2 - 1))
    return _verdict("map_normalization", worst, 1e-12)


def check_map_vs_master() -> CheckResult:
    worst = 0.0
    rho0 = osys.projector("eg")
    for gt in GT_GRID:
        steps = max(1, int(round(gt / 0.001)))
        rho = osys.integrate_master(rho0, 1.0, gt, steps)
        worst = max(worst, osys.trace_distance(rho, osys.reduced_state_eg(gt)))
    return _verdict("map_vs_master_equation", worst, 1e-8)


def check_witness_identity() -> CheckResult:
    worst = 0.0
    for gt in np.linspace(0.0, 5.0, 51):
        rho = osys.reduced_state_eg(gt)
        worst = max(worst, abs(osys.lambda_from_witness(rho) - osys.lambda_value(rho)))
    return _verdict("witness_identity", worst, 1e-10)


def check_concurrence_anchors() -> CheckResult:
    got = (
        osys.concurrence(osys.projector("psi-")),
        osys.concurrence(osys.projector("eg")),
        osys.concurrence(osys.asymptotic_state()),
    )
    worst = max(abs(g - w) for g, w in zip(got, (1.0, 0.0, 0.5)))
    return _verdict("concurrence_anchors", worst, 1e-10)


def check_preparation(noise: ex.NoiseModel, dphi_prep: float) -> CheckResult:
    """Prepared amplitudes against the map's D, E, F line for |eg>."""
    name = "preparation_amplitudes"
    if noise.nu_prep < 1.0:
        return CheckResult(name, "skip", "population oracle skipped by design: nu_prep < 1")
    worst = 0.0
    for p in P_GRID:
        k = osys.coefficients_for_p(p)
        s = ex.prepare(ex.angles_for_p(p), dphi_prep)
        want = {"E0": op.component_vector("Vh", k.d) + op.component_vector("Hv", k.e), "E1": op.component_vector("Hh", k.f)}
        for path, vec in want.items():
            got = s.amplitudes(path) if s.has_path(path) else np.zeros(4)
            worst = max(worst, float(np.max(np.abs(got - vec))))
    return _verdict(name, worst, 1e-12)


def check_measurement_chain(dphi_cnot: float) -> CheckResult:
    """CNOT + HWP@22.5 + PBS routes psi+ and psi- to complementary ports."""
    worst = 0.0
    r = 1.0 / math.sqrt(2.0)
    for sign, bright, dark in ((1, "T", "R"), (-1, "R", "T")):
        s = op.BeamState.from_amplitudes({"A": op.component_vector("Vh", r) + op.component_vector("Hv", sign * r)})
        chain = [op.CnotGate("A", dphi_cnot), op.HalfWavePlate("A", ex.HADAMARD_ANGLE), op.PolarizingBeamSplitter(("A",), "T", "R")]
        out = op.run_elements(s, chain)
        worst = max(worst, out.intensity(dark), abs(1.0 - out.intensity(bright)))
    return _verdict("measurement_chain", worst, 1e-12)


def check_unitarity(noise: ex.NoiseModel, dphi_prep: float, dphi_cnot: float) -> CheckResult:
    worst = 0.0
    for p in P_GRID:
        i = ex.run_angles(ex.angles_for_p(p), noise, dphi_prep, dphi_cnot)
        worst = max(worst, abs(i.total - 1.0))
    return _verdict("intensity_conservation", worst, 1e-12)


def check_population_oracle(noise: ex.NoiseModel, dphi_prep: float, dphi_cnot: float) -> CheckResult:
    name = "population_oracle"
    if not noise.ideal:
        return CheckResult(name, "skip", "population oracle skipped by design: visibility < 1")
    worst = 0.0
    for p in P_GRID:
        rec = ex.run_point(p, noise, dphi_prep, dphi_cnot=dphi_cnot)
        rho = osys.reduced_state_for_p(p)
        want = [float((osys.ket(k) @ rho @ osys.ket(k)).real) for k in ("psi+", "psi-", "ee", "gg")]
        worst = max(worst, float(np.max(np.abs(np.subtract(rec.populations.as_tuple(), want)))))
        worst = max(worst, abs(rec.lam - osys.lambda_value(rho)))
    return _verdict(name, worst, 1e-9)


def check_fig1_bench(noise: ex.NoiseModel, dphi_prep: float, dphi_cnot: float) -> CheckResult:
    spec = bf.load_bench("fig1.bench")
    worst = 0.0
    for p in (0.0, 0.5, 1.0):
        a = ex.angles_for_p(p)
        ov = {
            "theta1": a.theta1,
            "theta2": a.theta2,
            "nu_prep": noise.nu_prep,
            "nu_dmzim": noise.nu_dmzim,
            "dphi_prep": dphi_prep,
            "dphi_cnot": dphi_cnot,
        }
        got = list(bf.elaborate_and_run(spec, ov).values())
        worst = max(worst, float(np.max(np.abs(np.subtract(got, ex.run_angles(a, noise, dphi_prep, dphi_cnot).values)))))
    return _verdict("fig1_bench_equivalence", worst, 1e-12)


def run_checks(
    noise: ex.NoiseModel = ex.NoiseModel(),
    dphi_prep: float = ex.PREP_PHASE,
    dphi_cnot: float = ex.CNOT_PHASE,
) -> list[CheckResult]:
    checks: list[Callable[[], CheckResult]] = [
        check_normalization,
        check_map_vs_master,
        check_witness_identity,
        check_concurrence_anchors,
        lambda: check_preparation(noise, dphi_prep),
        lambda: check_measurement_chain(dphi_cnot),
        lambda: check_unitarity(noise, dphi_prep, dphi_cnot),
        lambda: check_population_oracle(noise, dphi_prep, dphi_cnot),
        lambda: check_fig1_bench(noise, dphi_prep, dphi_cnot),
    ]
    return [c() for c in checks]
