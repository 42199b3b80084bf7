"""Two qubits decaying into a common zero-temperature reservoir.

Exact reference dynamics: the system+environment unitary map, its environment
trace, a fixed-step RK4 integrator for the collective master equation, the
Wootters concurrence and the optimal witness for the ``|eg>`` family.

Two-qubit basis order is ``(ee, eg, ge, gg)`` throughout; single-qubit order is
``(e, g)``.  Only the product ``gt = Gamma * t`` enters the map.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, StepSizeWarning

BASIS = ("ee", "eg", "ge", "gg")
ENV_BASIS = ("0", "1ee", "1eg", "2")

SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2

_SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]])  # |e><g| in (e, g) order
_SIGMA_Y = np.array([[0.0, -1j], [1j, 0.0]])
_YY = np.kron(_SIGMA_Y, _SIGMA_Y)


@dataclass(frozen=True)
class MapCoefficients:
    """Amplitudes A..F of the common-bath unitary map at a given ``gt``."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    gt: float

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)


@dataclass(frozen=True)
class CollectiveOperators:
    splus: np.ndarray
    sminus: np.ndarray


@dataclass(frozen=True)
class JointPureState:
    """System (x) environment amplitudes, shape ``(4, 4)`` indexed ``[system, env]``."""

    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, system: str, env: str) -> complex:
        return complex(self.amplitudes[BASIS.index(system), ENV_BASIS.index(env)])


@dataclass(frozen=True)
class WitnessOperator:
    matrix: np.ndarray
    eigenbasis: tuple[str, ...]
    eigenvalues: tuple[float, ...]

    def expectation(self, rho: np.ndarray) -> float:
        return float(np.trace(self.matrix @ rho).real)


# --------------------------------------------------------------------------
# states


def ket(label: str) -> np.ndarray:
    """Two-qubit basis or Bell ket: ``ee, eg, ge, gg, psi+, psi-``."""
    if label in BASIS:
        v = np.zeros(4, dtype=complex)
        v[BASIS.index(label)] = 1.0
        return v
    if label in ("psi+", "psi-", "psi-plus", "psi-minus"):
        sign = 1.0 if label in ("psi+", "psi-plus") else -1.0
        return (ket("eg") + sign * ket("ge")) * INV_SQRT2
    raise DomainError(f"unknown two-qubit state label {label!r}")


def projector(label: str) -> np.ndarray:
    v = ket(label)
    return np.outer(v, v.conj())


def asymptotic_state() -> np.ndarray:
    """Long-time limit of the ``|eg>`` evolution: half ``psi-``, half ``gg``."""
    return 0.5 * projector("psi-") + 0.5 * projector("gg")


def check_density_matrix(rho, *, atol: float = 1e-12, eig_floor: float = -1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DomainError(f"expected a 4x4 density matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise DomainError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise DomainError(f"density matrix trace is {np.trace(rho).real!r}, not 1")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < eig_floor:
        raise DomainError("density matrix has a negative eigenvalue")
    return rho


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = np.asarray(rho) - np.asarray(sigma)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


# --------------------------------------------------------------------------
# unitary map


def _check_gt(gt: float) -> float:
    gt = float(gt)
    if not math.isfinite(gt) or gt < 0:
        raise DomainError(f"gt must be finite and >= 0, got {gt!r}")
    return gt


def _coefficients(gt: float) -> MapCoefficients:
    if math.isinf(gt):
        return MapCoefficients(0.0, 0.0, 1.0, 0.5, -0.5, INV_SQRT2, gt)
    q = math.exp(-gt)
    one_minus_q2 = -math.expm1(-2.0 * gt)
    c2 = one_minus_q2 - 2.0 * gt * q * q
    return MapCoefficients(
        a=q,
        b=math.sqrt(gt) * q,
        c=math.sqrt(max(c2, 0.0)),
        d=0.5 * (q + 1.0),
        e=0.5 * (q - 1.0),
        f=math.sqrt(0.5 * one_minus_q2),
        gt=gt,
    )


def map_coefficients(gt: float) -> MapCoefficients:
    return _coefficients(_check_gt(gt))


def gt_from_p(p: float) -> float:
    """``p = 1 - exp(-gt)``; ``p = 1`` maps to ``inf``."""
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    if p == 1.0:
        return math.inf
    return -math.log1p(-p)


def p_from_gt(gt: float) -> float:
    return -math.expm1(-gt)


def coefficients_for_p(p: float) -> MapCoefficients:
    """Like :func:`map_coefficients` but parameterized by ``p``; ``p = 1`` gives the limit."""
    return _coefficients(gt_from_p(p))


def collective_operators() -> CollectiveOperators:
    eye = np.eye(2)
    splus = np.kron(_SIGMA_PLUS, eye) + np.kron(eye, _SIGMA_PLUS)
    return CollectiveOperators(splus=splus.astype(complex), sminus=splus.T.conj().astype(complex))


def _joint_from_coefficients(initial: str, k: MapCoefficients) -> JointPureState:
    amp = np.zeros((4, 4), dtype=complex)
    s = BASIS.index
    env = ENV_BASIS.index
    if initial == "ee":
        amp[s("ee"), env("0")] = k.a
        amp[s("eg"), env("1ee")] = k.b
        amp[s("ge"), env("1ee")] = k.b
        amp[s("gg"), env("2")] = k.c
    elif initial in ("eg", "ge"):
        other = "ge" if initial == "eg" else "eg"
        amp[s(initial), env("0")] = k.d
        amp[s(other), env("0")] = k.e
        amp[s("gg"), env("1eg")] = k.f
    elif initial == "gg":
        amp[s("gg"), env("0")] = 1.0
    else:
        raise DomainError(f"unknown basis label {initial!r}; expected one of {BASIS}")
    return JointPureState(amp)


def apply_map(initial: str, gt: float) -> JointPureState:
    """Evolve ``|initial>|0>_E`` by the common-bath unitary for dimensionless time ``gt``."""
    if initial not in BASIS:
        raise DomainError(f"unknown basis label {initial!r}; expected one of {BASIS}")
    return _joint_from_coefficients(initial, map_coefficients(gt))


def partial_trace_env(state: JointPureState) -> np.ndarray:
    amp = np.asarray(state.amplitudes)
    if abs(np.linalg.norm(amp) - 1.0) > 1e-12:
        raise DomainError("joint state is not normalized")
    # sum_k <k|Psi><Psi|k>
    return amp @ amp.conj().T


def _reduced_state_from_decay(x: float) -> np.ndarray:
    rho = np.zeros((4, 4), dtype=complex)
    eg, ge, gg = 1, 2, 3
    rho[eg, eg] = ((x + 1.0) / 2.0) ** 2
    rho[ge, ge] = ((x - 1.0) / 2.0) ** 2
    rho[eg, ge] = rho[ge, eg] = (x * x - 1.0) / 4.0
    rho[gg, gg] = (1.0 - x * x) / 2.0
    return rho


def reduced_state_eg(gt: float) -> np.ndarray:
    """Closed-form system state after starting in ``|eg>``."""
    return _reduced_state_from_decay(math.exp(-_check_gt(gt)))


def reduced_state_for_p(p: float) -> np.ndarray:
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    return _reduced_state_from_decay(1.0 - p)


# --------------------------------------------------------------------------
# master equation


def _dissipator(rho: np.ndarray, gamma: float) -> np.ndarray:
    ops = collective_operators()
    sp, sm = ops.splus, ops.sminus
    spsm = sp @ sm
    return 0.5 * gamma * (2.0 * sm @ rho @ sp - rho @ spsm - spsm @ rho)


def lindblad_rhs(rho: np.ndarray, gamma: float) -> np.ndarray:
    """Time derivative of ``rho`` under collective decay at rate ``gamma``."""
    rho = check_density_matrix(rho)
    return _dissipator(rho, _check_gamma(gamma))


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not math.isfinite(gamma) or gamma <= 0:
        raise DomainError(f"decay rate must be finite and > 0, got {gamma!r}")
    return gamma


@lru_cache(maxsize=None)
def _generator(gamma: float) -> np.ndarray:
    # superoperator acting on row-major vec(rho), assembled from the dissipator itself
    cols = []
    for k in range(16):
        basis = np.zeros(16, dtype=complex)
        basis[k] = 1.0
        cols.append(_dissipator(basis.reshape(4, 4), gamma).reshape(16))
    gen = np.array(cols).T
    gen.setflags(write=False)
    return gen


def rk4_step_matrix(gamma: float, dt: float) -> np.ndarray:
    """One classical RK4 step for the (linear) master equation, as a 16x16 matrix.

    For ``dy/dt = L y`` the four RK4 stages collapse exactly to the degree-4
    Taylor polynomial of ``exp(L dt)``.
    """
    hl = dt * _generator(_check_gamma(gamma))
    term = np.eye(16, dtype=complex)
    step = term.copy()
    for k in range(1, 5):
        term = term @ hl / k
        step = step + term
    return step


def _integration_setup(rho0, gamma, t, steps):
    rho0 = check_density_matrix(rho0)
    gamma = _check_gamma(gamma)
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise DomainError(f"t must be finite and >= 0, got {t!r}")
    if int(steps) != steps or steps < 1:
        raise DomainError(f"steps must be a positive integer, got {steps!r}")
    steps = int(steps)
    dt = t / steps
    if gamma * dt > 0.1:
        warnings.warn(
            f"gamma*dt = {gamma * dt:.3g} exceeds 0.1; integration is inaccurate",
            StepSizeWarning,
            stacklevel=3,
        )
    return rho0, gamma, dt, steps


def integrate_master(rho0: np.ndarray, gamma: float, t: float, steps: int) -> np.ndarray:
    """Fixed-step RK4 solution of the master equation at time ``t``."""
    rho0, gamma, dt, steps = _integration_setup(rho0, gamma, t, steps)
    prop = np.linalg.matrix_power(rk4_step_matrix(gamma, dt), steps)
    return (prop @ rho0.reshape(16)).reshape(4, 4)


def master_trajectory(rho0: np.ndarray, gamma: float, t: float, steps: int, every: int = 1):
    """Step-by-step RK4 trajectory; returns ``(times, states)`` sampled every ``every`` steps.

    The final time is always included.
    """
    rho0, gamma, dt, steps = _integration_setup(rho0, gamma, t, steps)
    if every < 1:
        raise DomainError("every must be >= 1")
    step = rk4_step_matrix(gamma, dt)
    y = rho0.reshape(16)
    times, states = [0.0], [rho0.copy()]
    for n in range(1, steps + 1):
        y = step @ y
        if n % every == 0 or n == steps:
            times.append(n * dt)
            states.append(y.reshape(4, 4).copy())
    return np.array(times), states


# --------------------------------------------------------------------------
# entanglement


_SUPPORT_FLOOR = 1e-13


def _wootters_roots(rho: np.ndarray) -> np.ndarray:
    """Square roots of the eigenvalues of ``rho (YY) rho* (YY)``, descending.

    Computed as singular values of ``X^T (YY) X`` with ``rho = X X^dag``; this
    avoids square-rooting eigenvalues that are zero up to rounding.
    """
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    keep = w > _SUPPORT_FLOOR
    x = v[:, keep] * np.sqrt(w[keep])
    roots = np.zeros(4)
    if x.shape[1]:
        s = np.linalg.svd(x.T @ _YY @ x, compute_uv=False)
        roots[: len(s)] = s
    return np.sort(roots)[::-1]


def lambda_value(rho: np.ndarray) -> float:
    """``sqrt(l1) - sqrt(l2) - sqrt(l3) - sqrt(l4)`` before the ``max(0, .)`` clamp."""
    r = _wootters_roots(check_density_matrix(rho))
    return float(r[0] - r[1] - r[2] - r[3])


def concurrence(rho: np.ndarray) -> float:
    return max(0.0, lambda_value(rho))


@lru_cache(maxsize=None)
def witness_operator() -> WitnessOperator:
    eigenbasis = ("psi+", "ee", "psi-", "gg")
    eigenvalues = (INV_SQRT2, 1.0 + INV_SQRT2, -INV_SQRT2, 1.0 - INV_SQRT2)
    w = sum(val * projector(lbl) for lbl, val in zip(eigenbasis, eigenvalues))
    for lbl, val in zip(eigenbasis, eigenvalues):
        v = ket(lbl)
        if np.max(np.abs(w @ v - val * v)) > 1e-12:
            raise AssertionError(f"witness eigenpair for {lbl} is off")
    w.setflags(write=False)
    return WitnessOperator(matrix=w, eigenbasis=eigenbasis, eigenvalues=eigenvalues)


def lambda_from_witness(rho: np.ndarray) -> float:
    rho = check_density_matrix(rho)
    return witness_operator().expectation(rho) / (1.0 - SQRT2)
