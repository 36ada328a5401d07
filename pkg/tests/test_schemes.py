import math

import numpy as np
import pytest

from confined_langevin import (
    Annulus,
    Ball,
    Box,
    ConfigurationError,
    ConstantPotential,
    GeneralDrift,
    HalfLine,
    InvertedQuadratic,
    NumericError,
    PhaseState,
    PotentialLangevin,
    QuadraticWell,
    SchemeId,
    SingularConfigurationError,
    UnstableOU,
    a_c_step,
    b_step,
    noise_law,
    o_step,
    obabo_jacobian_1d,
    p_step,
    step,
)
from confined_langevin.schemes import noise_slots, o_coefficients, step_batch, Gaussian


def harmonic_1d(gamma=1.0, beta=1.0):
    return PotentialLangevin(QuadraticWell(1.0, 1), gamma, beta)


# ---------------------------------------------------------------------------
# free flight with reflections


def test_ac_mirror_flight_on_halfline():
    out = a_c_step(HalfLine(0.0), PhaseState([0.5], [-1.0]), 1.0)
    assert out.state.q[0] == pytest.approx(0.5, abs=1e-14)
    assert out.state.p[0] == 1.0
    assert out.collisions == 1
    assert not out.rejected
    assert out.first_collision_time == pytest.approx(0.5, abs=1e-14)


def test_ac_interior_step_is_free_flight():
    out = a_c_step(Ball(2.0), PhaseState([1.0, 1.0], [0.01, 0.01]), 0.1)
    assert np.allclose(out.state.q, [1.001, 1.001], atol=1e-15)
    assert np.allclose(out.state.p, [0.01, 0.01])
    assert out.collisions == 0
    assert out.first_collision_time is None


def test_ac_annulus_inner_reflection():
    out = a_c_step(Annulus(1.0, 2.0), PhaseState([1.5, 0.0], [-1.0, 0.0]), 1.0)
    assert out.first_collision_time == pytest.approx(0.5, abs=1e-13)
    assert np.allclose(out.state.p, [1.0, 0.0], atol=1e-13)
    assert np.allclose(out.state.q, [1.5, 0.0], atol=1e-12)
    assert out.collisions == 1


def test_ac_momentum_norm_conserved_across_many_reflections():
    # near-tangential chord in a disc: hundreds of reflections in one step
    state = PhaseState([0.99, 0.0], [0.0, 100.0])
    out = a_c_step(Ball(1.0), state, 1.0, max_collisions=2000)
    assert out.collisions > 100
    assert not out.rejected
    assert abs(np.linalg.norm(out.state.p) - 100.0) < 1e-12 * 100.0
    assert np.linalg.norm(out.state.q) <= 1.0 + 1e-12


def test_ac_rejection_restores_entry_state():
    state = PhaseState([0.99, 0.0], [0.0, 100.0])
    out = a_c_step(Ball(1.0), state, 1.0, max_collisions=16)
    assert out.rejected
    assert out.collisions > 16
    assert np.allclose(out.state.q, [0.99, 0.0])
    assert np.allclose(out.state.p, [0.0, 100.0])


def test_ac_truncate_policy_keeps_boundary_state():
    state = PhaseState([0.99, 0.0], [0.0, 100.0])
    out = a_c_step(Ball(1.0), state, 1.0, max_collisions=16, policy="truncate")
    assert not out.rejected
    assert abs(np.linalg.norm(out.state.q) - 1.0) < 1e-9


# ---------------------------------------------------------------------------
# elementary momentum updates


def test_b_step_harmonic_kick():
    out = b_step(PhaseState([1.0], [0.0]), 0.5, QuadraticWell(1.0, 1).grad)
    assert out.p[0] == -0.5
    assert out.q[0] == 1.0


def test_b_step_zero_gradient_is_identity():
    out = b_step(PhaseState([1.0, 2.0], [3.0, 4.0]), 0.5,
                 ConstantPotential(2).grad)
    assert np.array_equal(out.p, [3.0, 4.0])


def test_b_step_inverted_quadratic_pushes_outward():
    out = b_step(PhaseState([1.0, 1.0], [0.0, 0.0]), 0.1,
                 InvertedQuadratic(1.0, 2).grad)
    assert np.allclose(out.p, [0.2, 0.2], atol=1e-15)


def test_b_step_non_finite_gradient_raises():
    def bad_grad(Q):
        return np.full_like(Q, np.nan)

    with pytest.raises(NumericError) as err:
        b_step(PhaseState([1.0], [0.0]), 0.5, bad_grad)
    assert err.value.location is not None


def test_o_step_noiseless_decay():
    assert o_step(2.0, 0.3, -1.5, 1.0, 0.0) == pytest.approx(
        2.0 * math.exp(-0.45), rel=1e-15)


def test_o_step_brownian_limit():
    # a -> 0 continues as additive noise of variance sigma^2 h
    val = o_step(1.0, 0.25, 0.0, 1.0, 1.0)
    assert val == pytest.approx(1.0 + math.sqrt(0.25), rel=1e-12)


def test_o_step_exact_ou_moments_monte_carlo():
    # exact marginal of dp = a p dt + sigma dW over 1e7 draws, 4 SE gate
    rng = np.random.default_rng(2024)
    n = 10_000_000
    p0, h, gamma, sigma = 1.0, 0.1, 1.0, math.sqrt(2.0)
    vals = o_step(p0, h, -gamma, sigma, rng.standard_normal(n))
    mean_target = p0 * math.exp(-gamma * h)
    var_target = 1.0 - math.exp(-2.0 * gamma * h)
    se_mean = math.sqrt(var_target / n)
    assert abs(vals.mean() - mean_target) < 4 * se_mean
    se_var = var_target * math.sqrt(2.0 / (n - 1))
    assert abs(vals.var() - var_target) < 4 * se_var


def test_o_step_anti_damped_rate():
    # positive rate grows the mean, matching exp(alpha h)
    assert o_step(1.0, 0.2, 0.25, 0.5, 0.0) == pytest.approx(
        math.exp(0.05), rel=1e-15)


def test_p_step_identity_without_drift_and_noise():
    out = p_step(PhaseState([1.0], [2.0]), 0.1,
                 lambda Q, P: np.zeros_like(P), 0.0, 0.0)
    assert out.p[0] == 2.0


def test_p_step_linear_drag():
    out = p_step(PhaseState([0.0], [2.0]), 0.1, lambda Q, P: -P, 0.0, 0.0)
    assert out.p[0] == pytest.approx(1.8, abs=1e-15)


def test_p_step_shifted_inverse_drift_arithmetic():
    def drift(Q, P):
        return 1.0 / Q + P

    out = p_step(PhaseState([1.0], [1.0]), 0.1, drift, 1.0, 1.0)
    assert out.p[0] == pytest.approx(1.0 + 0.1 * 2.0 + math.sqrt(0.1), rel=1e-12)


# ---------------------------------------------------------------------------
# noise laws


def test_two_point_law_moments():
    rng = np.random.default_rng(3)
    draws = noise_law("two_point").sample(rng, 200_000)
    assert set(np.unique(draws)) == {-1.0, 1.0}
    assert abs(draws.mean()) < 4.0 / math.sqrt(len(draws))
    assert draws.var() == pytest.approx(1.0, abs=1e-2)


def test_three_point_law_moments():
    rng = np.random.default_rng(4)
    draws = noise_law("three_point").sample(rng, 400_000)
    root3 = math.sqrt(3.0)
    assert set(np.unique(draws)) <= {-root3, 0.0, root3}
    assert np.mean(draws == 0.0) == pytest.approx(2.0 / 3.0, abs=5e-3)
    # matches the Gaussian through the fifth moment
    assert abs(draws.mean()) < 5e-3
    assert np.mean(draws ** 2) == pytest.approx(1.0, abs=5e-3)
    assert abs(np.mean(draws ** 3)) < 2e-2
    assert np.mean(draws ** 4) == pytest.approx(3.0, abs=5e-2)
    assert abs(np.mean(draws ** 5)) < 2e-1


def test_unknown_noise_law():
    with pytest.raises(ConfigurationError):
        noise_law("levy")


# ---------------------------------------------------------------------------
# composed steps


def test_pac_no_motion_without_momentum_or_drift():
    dyn = GeneralDrift(lambda Q, P: np.zeros_like(P), 0.0, 1)
    out = step(SchemeId.PAc, HalfLine(0.0), dyn,
               PhaseState([0.5], [0.0]), 1.0, np.random.default_rng(0))
    assert out.state.q[0] == 0.5
    assert out.state.p[0] == 0.0
    assert out.collisions == 0


def test_obabo_hand_composition_oracle():
    # worked one step by hand: O(h/2) leaves p=0, kick gives -0.1, flight
    # 2 -> 1.99, second kick -0.1 - 0.05*1.99 = -0.1995, O(h/2) decays it
    out = step(SchemeId.OBAcBO, HalfLine(0.0), harmonic_1d(),
               PhaseState([2.0], [0.0]), 0.1, rng=None,
               noise_override=[np.zeros(1), np.zeros(1)])
    assert out.state.q[0] == pytest.approx(1.99, abs=1e-15)
    assert out.state.p[0] == pytest.approx(-0.1995 * math.exp(-0.05), rel=1e-12)


def test_obabo_without_noise_equals_deterministic_bab_bitwise():
    dyn0 = PotentialLangevin(QuadraticWell(1.0, 2), gamma=0.0, beta=1.0)
    domain = Box((0.0, 0.0), (1.0, 1.0))
    state = PhaseState([0.1, 0.5], [1.5, 1.5])
    a = state.copy()
    b = state.copy()
    for _ in range(25):
        a = step(SchemeId.OBAcBO, domain, dyn0, a, 0.05, rng=None,
                 noise_override=[np.zeros(2), np.zeros(2)]).state
        b = step(SchemeId.BAcB_deterministic, domain, dyn0, b, 0.05,
                 rng=None).state
    assert np.array_equal(a.q, b.q)
    assert np.array_equal(a.p, b.p)


def test_deterministic_core_is_time_reversible():
    dyn0 = PotentialLangevin(QuadraticWell(1.0, 2), gamma=0.0, beta=1.0)
    domain = Box((0.0, 0.0), (1.0, 1.0))
    start = PhaseState([0.1, 0.5], [1.5, 1.5])
    fwd = start.copy()
    for _ in range(40):
        fwd = step(SchemeId.OBAcBO, domain, dyn0, fwd, 0.05, rng=None,
                   noise_override=[np.zeros(2), np.zeros(2)]).state
    back = PhaseState(fwd.q.copy(), -fwd.p)
    for _ in range(40):
        back = step(SchemeId.OBAcBO, domain, dyn0, back, 0.05, rng=None,
                    noise_override=[np.zeros(2), np.zeros(2)]).state
    assert np.max(np.abs(back.q - start.q)) < 1e-10
    assert np.max(np.abs(back.p + start.p)) < 1e-10


def test_first_collision_time_offsets_by_sub_step():
    # constant potential, gamma=0: flight only; collision happens in the
    # second half flight of BAcOAcB, so tau lands in (h/2, h)
    dyn0 = PotentialLangevin(ConstantPotential(1), gamma=0.0, beta=1.0)
    out = step(SchemeId.BAcOAcB, HalfLine(0.0), dyn0,
               PhaseState([0.7], [-1.0]), 1.0, rng=None,
               noise_override=[np.zeros(1)])
    assert out.collisions == 1
    assert out.first_collision_time == pytest.approx(0.7, abs=1e-14)


def test_noise_slot_counts():
    assert noise_slots(SchemeId.OBAcBO) == 2
    assert noise_slots(SchemeId.BAcOAcB) == 1
    assert noise_slots(SchemeId.PAc) == 1
    assert noise_slots(SchemeId.BAcB_deterministic) == 0


def test_splitting_rejects_general_drift():
    dyn = GeneralDrift(lambda Q, P: -P, 1.0, 1)
    with pytest.raises(ConfigurationError):
        step(SchemeId.OBAcBO, HalfLine(0.0), dyn,
             PhaseState([0.5], [0.0]), 0.1, np.random.default_rng(0))


def test_pla_is_not_a_phase_space_scheme():
    with pytest.raises(ConfigurationError):
        step(SchemeId.PLA, HalfLine(0.0), harmonic_1d(),
             PhaseState([0.5], [0.0]), 0.1, np.random.default_rng(0))


def test_bab_requires_zero_friction():
    with pytest.raises(ConfigurationError):
        step(SchemeId.BAcB_deterministic, HalfLine(0.0), harmonic_1d(),
             PhaseState([0.5], [0.1]), 0.1, np.random.default_rng(0))


SCHEMES_AND_DYNAMICS = [
    (SchemeId.PAc, "langevin"),
    (SchemeId.AcP, "langevin"),
    (SchemeId.OBAcBO, "langevin"),
    (SchemeId.BAcOAcB, "langevin"),
    (SchemeId.OAcBAcO, "langevin"),
    (SchemeId.BOAcOB, "langevin"),
    (SchemeId.AcBOBAc, "langevin"),
    (SchemeId.AcOBOAc, "langevin"),
    (SchemeId.OBAcBO, "anti"),
]


@pytest.mark.parametrize("scheme,kind", SCHEMES_AND_DYNAMICS,
                         ids=lambda v: getattr(v, "name", v))
def test_confinement_random_batches(scheme, kind):
    domains = [HalfLine(0.0), Ball(2.0), Annulus(1.0, 2.0),
               Box((0.0, 0.0), (1.0, 1.0))]
    rng = np.random.default_rng(317)
    for domain in domains:
        d = domain.dim
        if kind == "langevin":
            dyn = PotentialLangevin(QuadraticWell(1.0, d), 1.0, 1.0)
        else:
            dyn = UnstableOU(InvertedQuadratic(1.0, d), 0.25, math.sqrt(0.5))
        n = 4000
        Q = np.empty((n, d))
        filled = 0
        while filled < n:
            cand = rng.uniform(-2.0, 2.0, size=(n, d)) if d > 1 else \
                rng.uniform(0.0, 4.0, size=(n, 1))
            keep = domain.contains_batch(cand)
            take = min(int(keep.sum()), n - filled)
            Q[filled:filled + take] = cand[keep][:take]
            filled += take
        P = rng.standard_normal((n, d)) * 2.0
        for _ in range(5):
            step_batch(scheme, domain, dyn, Q, P, 0.1, rng, Gaussian(),
                       64, "reject")
        assert domain.closure_contains_batch(Q, atol=1e-9).all()


# ---------------------------------------------------------------------------
# one-step map determinant


def test_jacobian_matches_analytic_determinant():
    dyn = harmonic_1d()
    domain = HalfLine(0.0)
    h = 0.1
    gamma_sq = o_coefficients(h / 2.0, -1.0, dyn.sigma)[1] ** 2
    rng = np.random.default_rng(5)
    for _ in range(25):
        q = rng.uniform(0.2, 2.0)
        p = rng.standard_normal()
        z1 = rng.standard_normal()
        z2 = rng.standard_normal()
        det = obabo_jacobian_1d(dyn, domain, q, p, h, z1, z2)
        assert abs(abs(det) - h * gamma_sq) < 1e-5 * h * gamma_sq


def _switching_z1(dyn, q, p, h):
    # z1 at which the pre-reflection endpoint sits exactly on the boundary
    gamma_half = o_coefficients(h / 2.0, dyn.o_rate, dyn.sigma)
    decay, std = gamma_half
    u_prime = q  # harmonic gradient at q
    return (-q / h - decay * p + (h / 2.0) * u_prime) / std


def test_jacobian_sign_flips_across_switching_point():
    dyn = harmonic_1d()
    domain = HalfLine(0.0)
    q, p, h, z2 = 0.5, 0.2, 0.1, 0.3
    z_star = _switching_z1(dyn, q, p, h)
    det_lo = obabo_jacobian_1d(dyn, domain, q, p, h, z_star - 0.05, z2)
    det_hi = obabo_jacobian_1d(dyn, domain, q, p, h, z_star + 0.05, z2)
    assert det_lo * det_hi < 0.0


def test_jacobian_raises_at_switching_configuration():
    dyn = harmonic_1d()
    domain = HalfLine(0.0)
    q, p, h, z2 = 0.5, 0.2, 0.1, 0.3
    z_star = _switching_z1(dyn, q, p, h)
    with pytest.raises(SingularConfigurationError):
        obabo_jacobian_1d(dyn, domain, q, p, h, z_star, z2)


def test_jacobian_gamma_definition_matches_o_half_step():
    # the analytic determinant uses exactly the O half-step noise scale
    dyn = harmonic_1d(gamma=2.0, beta=0.5)
    h = 0.08
    _, std = o_coefficients(h / 2.0, -2.0, dyn.sigma)
    det = obabo_jacobian_1d(dyn, HalfLine(0.0), 1.0, 0.1, h, 0.2, -0.4)
    assert abs(det) == pytest.approx(h * std * std, rel=1e-5)
