import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commonbath import opensys as osys
from commonbath.errors import DomainError, StepSizeWarning

LN2 = math.log(2.0)


def mp_coefficients(gt, dps=50):
    """Arbitrary-precision evaluation of A..F, independent of the float path."""
    with mpmath.workdps(dps):
        g = mpmath.mpf(gt)
        x = mpmath.e ** (-g)
        return tuple(
            float(v)
            for v in (
                x,
                mpmath.sqrt(g * x**2),
                mpmath.sqrt(1 - x**2 - 2 * g * x**2),
                (x + 1) / 2,
                (x - 1) / 2,
                mpmath.sqrt((1 - x**2) / 2),
            )
        )


def wootters_direct(rho):
    """Textbook route: non-Hermitian eigenproblem of rho (YY) rho* (YY)."""
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    lam = np.linalg.eigvals(rho @ yy @ rho.conj() @ yy).real
    lam = np.sqrt(np.clip(np.sort(lam)[::-1], 0, None))
    return lam[0] - lam[1] - lam[2] - lam[3]


def rk4_generic(rho, gamma, t, steps):
    h = t / steps
    f = lambda r: osys._dissipator(r, gamma)
    for _ in range(steps):
        k1 = f(rho)
        k2 = f(rho + 0.5 * h * k1)
        k3 = f(rho + 0.5 * h * k2)
        k4 = f(rho + h * k3)
        rho = rho + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


# ---------------------------------------------------------------- coefficients


def test_coefficients_at_zero():
    assert osys.map_coefficients(0.0).as_tuple() == (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)


def test_coefficients_limit():
    k = osys.map_coefficients(60.0)
    np.testing.assert_allclose(k.as_tuple(), (0, 0, 1, 0.5, -0.5, 1 / math.sqrt(2)), atol=1e-12)
    assert osys.coefficients_for_p(1.0).as_tuple() == (0.0, 0.0, 1.0, 0.5, -0.5, 1 / math.sqrt(2))


def test_coefficients_ln2_against_mpmath():
    k = osys.map_coefficients(LN2)
    np.testing.assert_allclose(k.as_tuple(), mp_coefficients(LN2), rtol=0, atol=1e-15)
    assert k.d == pytest.approx(0.75, abs=1e-15)
    assert k.e == pytest.approx(-0.25, abs=1e-15)
    assert k.f == pytest.approx(0.612372435695794, abs=1e-14)
    assert k.a == pytest.approx(0.5, abs=1e-15)
    assert k.b == pytest.approx(math.sqrt(LN2 / 4), abs=1e-15)


@pytest.mark.parametrize("gt", [1e-9, 1e-4, 0.3, 1.0, 2.5, 7.0, 30.0])
def test_coefficients_match_mpmath(gt):
    np.testing.assert_allclose(osys.map_coefficients(gt).as_tuple(), mp_coefficients(gt), atol=1e-12)


@given(st.floats(min_value=0, max_value=200, allow_nan=False))
def test_normalizations_and_signs(gt):
    k = osys.map_coefficients(gt)
    assert abs(k.a**2 + 2 * k.b**2 + k.c**2 - 1) <= 1e-12
    assert abs(k.d**2 + k.e**2 + k.f**2 - 1) <= 1e-12
    assert min(k.a, k.b, k.c, k.d, k.f) >= 0
    assert k.e <= 0


@pytest.mark.parametrize("bad", [-1e-3, math.nan, math.inf])
def test_coefficients_domain(bad):
    with pytest.raises(DomainError):
        osys.map_coefficients(bad)


def test_p_gt_round_trip():
    for p in [0.0, 0.1, 0.5, 0.99]:
        assert osys.p_from_gt(osys.gt_from_p(p)) == pytest.approx(p, abs=1e-15)
    assert osys.gt_from_p(1.0) == math.inf
    with pytest.raises(DomainError):
        osys.gt_from_p(1.5)


# ---------------------------------------------------------------- map


def test_collective_operators():
    ops = osys.collective_operators()
    np.testing.assert_array_equal(ops.sminus, ops.splus.conj().T)
    assert np.allclose(ops.sminus @ osys.ket("gg"), 0)
    assert np.allclose(ops.splus @ osys.ket("ee"), 0)


def test_map_gg_is_frozen():
    for gt in (0.0, 0.7, 4.0):
        j = osys.apply_map("gg", gt)
        assert j.amplitude("gg", "0") == 1
        assert j.norm() == 1


def test_map_identity_at_zero():
    j = osys.apply_map("eg", 0.0)
    assert j.amplitude("eg", "0") == 1
    assert j.norm() == 1


def test_map_ee_ln2():
    j = osys.apply_map("ee", LN2)
    a, b, c, *_ = mp_coefficients(LN2)
    assert j.amplitude("ee", "0") == pytest.approx(a, abs=1e-15)
    assert j.amplitude("eg", "1ee") == pytest.approx(b, abs=1e-15)
    assert j.amplitude("ge", "1ee") == pytest.approx(b, abs=1e-15)
    assert j.amplitude("gg", "2") == pytest.approx(c, abs=1e-15)
    assert j.norm() == pytest.approx(1, abs=1e-12)


def test_map_unknown_label():
    with pytest.raises(DomainError):
        osys.apply_map("xx", 1.0)


def test_partial_trace_product():
    rho = osys.partial_trace_env(osys.apply_map("eg", 0.0))
    np.testing.assert_array_equal(rho, osys.projector("eg"))


def test_partial_trace_rejects_unnormalized():
    j = osys.apply_map("eg", 0.5)
    with pytest.raises(DomainError):
        osys.partial_trace_env(osys.JointPureState(2 * j.amplitudes))


@pytest.mark.parametrize("gt", [0.0, 0.2, LN2, 1.0, 3.0, 9.0])
def test_partial_trace_eg_matches_closed_form(gt):
    rho = osys.partial_trace_env(osys.apply_map("eg", gt))
    np.testing.assert_allclose(rho, osys.reduced_state_eg(gt), atol=1e-12)
    osys.check_density_matrix(rho)


def test_partial_trace_ee_ln2():
    a, b, c, *_ = mp_coefficients(LN2)
    rho = osys.partial_trace_env(osys.apply_map("ee", LN2))
    expected = np.diag([a**2, b**2, b**2, c**2]).astype(complex)
    expected[1, 2] = expected[2, 1] = b**2
    np.testing.assert_allclose(rho, expected, atol=1e-15)


def test_reduced_state_eg_values():
    np.testing.assert_array_equal(osys.reduced_state_eg(0.0), osys.projector("eg"))
    np.testing.assert_allclose(osys.reduced_state_eg(50.0), osys.asymptotic_state(), atol=1e-15)
    rho = osys.reduced_state_eg(LN2)
    assert rho[1, 1].real == pytest.approx(9 / 16, abs=1e-15)
    assert rho[2, 2].real == pytest.approx(1 / 16, abs=1e-15)
    assert rho[1, 2].real == pytest.approx(-3 / 16, abs=1e-15)
    assert rho[3, 3].real == pytest.approx(3 / 8, abs=1e-15)
    np.testing.assert_allclose(osys.reduced_state_for_p(1.0), osys.asymptotic_state(), atol=0)


@given(st.floats(min_value=0, max_value=40))
def test_decoherence_free_component(gt):
    psi = osys.ket("psi-")
    assert abs(psi.conj() @ osys.reduced_state_eg(gt) @ psi - 0.5) <= 1e-12


# ---------------------------------------------------------------- master equation


def test_rhs_stationary_states():
    for lbl in ("gg", "psi-"):
        np.testing.assert_allclose(osys.lindblad_rhs(osys.projector(lbl), 1.3), 0, atol=1e-15)


def test_rhs_psi_plus():
    gamma = 0.7
    rhs = osys.lindblad_rhs(osys.projector("psi+"), gamma)
    np.testing.assert_allclose(rhs, 2 * gamma * (osys.projector("gg") - osys.projector("psi+")), atol=1e-15)


def test_rhs_traceless():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        assert abs(np.trace(osys.lindblad_rhs(rho, 1.0))) <= 1e-12


def test_step_matrix_equals_staged_rk4():
    rho = osys.projector("ee")
    staged = rk4_generic(rho, 1.0, 0.5, 50)
    fast = osys.integrate_master(rho, 1.0, 0.5, 50)
    np.testing.assert_allclose(fast, staged, atol=1e-14)


def test_integrate_eg_matches_closed_form():
    rho = osys.integrate_master(osys.projector("eg"), 1.0, 1.0, 1000)
    np.testing.assert_allclose(rho, osys.reduced_state_eg(1.0), atol=1e-9)


def test_integrate_ground_state_unchanged():
    rho = osys.integrate_master(osys.projector("gg"), 2.0, 3.0, 100)
    np.testing.assert_allclose(rho, osys.projector("gg"), atol=1e-15)


def test_integrate_ee_matches_map():
    rho = osys.integrate_master(osys.projector("ee"), 1.0, LN2, 1000)
    ref = osys.partial_trace_env(osys.apply_map("ee", LN2))
    np.testing.assert_allclose(rho, ref, atol=1e-9)


def test_only_product_gt_matters():
    a = osys.integrate_master(osys.projector("ee"), 2.0, 0.5, 1000)
    b = osys.integrate_master(osys.projector("ee"), 0.5, 2.0, 1000)
    np.testing.assert_allclose(a, b, atol=1e-13)


@pytest.mark.parametrize("initial", osys.BASIS)
@pytest.mark.parametrize("gt", [0.0, 0.4, 1.7, 5.0])
def test_map_vs_lindblad(initial, gt):
    steps = max(1, round(gt / 0.001))
    rho = osys.integrate_master(osys.projector(initial), 1.0, gt, steps)
    ref = osys.partial_trace_env(osys.apply_map(initial, gt))
    assert osys.trace_distance(rho, ref) <= 1e-8


def test_integrator_result_is_a_state():
    rho = osys.integrate_master(osys.projector("ee"), 1.0, 2.0, 200)  # gamma dt = 0.01
    osys.check_density_matrix(rho, atol=1e-8)


def test_coarse_step_warns():
    with pytest.warns(StepSizeWarning):
        osys.integrate_master(osys.projector("eg"), 1.0, 1.0, 5)


@pytest.mark.parametrize(
    "args", [(1.0, math.nan, 10), (1.0, -1.0, 10), (1.0, 1.0, 0), (0.0, 1.0, 10), (math.inf, 1.0, 10)]
)
def test_integrate_domain_errors(args):
    with pytest.raises(DomainError):
        osys.integrate_master(osys.projector("eg"), *args)


def test_trajectory_samples_and_endpoint():
    t, states = osys.master_trajectory(osys.projector("eg"), 1.0, 1.0, 100, every=30)
    np.testing.assert_allclose(t, [0, 0.3, 0.6, 0.9, 1.0])
    np.testing.assert_allclose(states[-1], osys.integrate_master(osys.projector("eg"), 1.0, 1.0, 100), atol=1e-14)


# ---------------------------------------------------------------- concurrence & witness


def test_concurrence_anchors():
    assert osys.concurrence(osys.projector("psi-")) == pytest.approx(1, abs=1e-10)
    assert osys.concurrence(osys.projector("eg")) == pytest.approx(0, abs=1e-10)
    assert osys.concurrence(osys.asymptotic_state()) == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("gt", [0.0, 0.5, 1.0, 2.0])
def test_lambda_closed_form(gt):
    assert osys.lambda_value(osys.reduced_state_eg(gt)) == pytest.approx(0.5 * (1 - math.exp(-2 * gt)), abs=1e-10)


def test_lambda_separable_pure_state():
    # Wootters: product pure state has tilde-overlap zero, so Lambda = 0 (<= 0 allowed)
    lam = osys.lambda_value(osys.projector("gg"))
    assert -1 <= lam <= 1e-10


def test_lambda_maximally_mixed():
    assert osys.lambda_value(np.eye(4) / 4) == pytest.approx(-0.5, abs=1e-12)


def test_lambda_matches_textbook_route():
    rng = np.random.default_rng(11)
    for _ in range(50):
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = m @ m.conj().T
        rho /= np.trace(rho).real
        rho = 0.5 * (rho + rho.conj().T)
        assert osys.lambda_value(rho) == pytest.approx(wootters_direct(rho), abs=1e-9)


def test_concurrence_rejects_bad_input():
    with pytest.raises(DomainError):
        osys.concurrence(2 * osys.projector("eg"))
    with pytest.raises(DomainError):
        osys.concurrence(np.diag([1.2, -0.2, 0, 0]))


def test_witness_spectrum():
    w = osys.witness_operator()
    np.testing.assert_allclose(w.matrix, w.matrix.conj().T, atol=0)
    np.testing.assert_allclose(
        np.sort(np.linalg.eigvalsh(w.matrix)), np.sort(w.eigenvalues), atol=1e-12
    )


def test_witness_examples():
    w = osys.witness_operator().matrix
    psi_m = osys.ket("psi-")
    assert (psi_m.conj() @ w @ psi_m).real == pytest.approx(-1 / math.sqrt(2), abs=1e-15)
    eg = osys.ket("eg")
    assert (eg.conj() @ w @ eg).real == pytest.approx(0, abs=1e-15)
    assert np.trace(w @ np.eye(4) / 4).real == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("gt", [0.0, 0.3, 1.0, 3.0])
def test_witness_identity(gt):
    rho = osys.reduced_state_eg(gt)
    assert osys.lambda_from_witness(rho) == pytest.approx(osys.lambda_value(rho), abs=1e-10)


def test_lambda_from_witness_anchors():
    assert osys.lambda_from_witness(osys.asymptotic_state()) == pytest.approx(0.5, abs=1e-12)
    assert osys.lambda_from_witness(osys.projector("gg")) == pytest.approx(-1 / math.sqrt(2), abs=1e-12)


@settings(max_examples=200)
@given(st.floats(min_value=0, max_value=60))
def test_witness_concurrence_identity_property(gt):
    rho = osys.reduced_state_eg(gt)
    lw, lv = osys.lambda_from_witness(rho), osys.lambda_value(rho)
    assert abs(lw - lv) <= 1e-10
    assert abs(lw - 0.5 * -math.expm1(-2 * gt)) <= 1e-10


def test_lambda_monotone():
    grid = np.linspace(0, 10, 201)
    lam = [osys.lambda_value(osys.reduced_state_eg(g)) for g in grid]
    assert np.all(np.diff(lam) > 0)
    assert lam[-1] == pytest.approx(0.5, abs=1e-8)


def test_witness_nonnegative_on_product_states():
    rng = np.random.default_rng(2024)
    n = 20000
    a = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    b = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    psi = np.einsum("ni,nj->nij", a, b).reshape(n, 4)
    w = osys.witness_operator().matrix
    vals = np.einsum("ni,ij,nj->n", psi.conj(), w, psi).real
    assert vals.min() >= -1e-10
