import math

import numpy as np
import pytest

from confined_langevin import (
    Ball,
    Box,
    ConfigurationError,
    ConstantPotential,
    EmptyStatisticsError,
    EstimationFailureError,
    HalfLine,
    ObservableSpec,
    PotentialLangevin,
    QuadraticWell,
    SchemeId,
    SimulationConfig,
    UnderpoweredStudyError,
    convergence_study,
    energy_drift_study,
    fit_loglog_slope,
    run_ergodic,
    run_finite_time,
    run_time_average,
    tau_statistics,
)
from confined_langevin.models import half_square_norm_observable


def _position_fn(Q, P):
    return Q[:, 0]


def _const_pair(Q, P):
    out = np.empty((len(Q), 2))
    out[:, 0] = 3.0
    out[:, 1] = 1.5
    return out


position_observable = ObservableSpec("position", _position_fn)
pair_observable = ObservableSpec("const_pair", _const_pair)


def exp2_config(**overrides):
    base = dict(
        scheme=SchemeId.BAcOAcB,
        domain=HalfLine(1.0),
        dynamics=PotentialLangevin(QuadraticWell(1.0, 1), 1.0, 1.0),
        T=20.0, h=0.1, M=4000, seed=2024,
        q0=(2.0,), p0=(-0.1,), threads=1)
    base.update(overrides)
    return SimulationConfig(**base)


# ---------------------------------------------------------------------------
# configuration contracts


def test_non_integer_step_count_rejected():
    with pytest.raises(ConfigurationError):
        exp2_config(T=1.0, h=0.3)


def test_missing_initial_momentum_rejected():
    with pytest.raises(ConfigurationError):
        exp2_config(p0=None, p0_law=None)


def test_burn_in_must_be_shorter_than_run():
    cfg = exp2_config(burn_in=20.0)
    with pytest.raises(ConfigurationError):
        run_time_average(cfg, position_observable)


def test_ergodic_requires_damped_dynamics():
    from confined_langevin import InvertedQuadratic, UnstableOU

    cfg = exp2_config(
        domain=Ball(2.0),
        dynamics=UnstableOU(InvertedQuadratic(1.0, 2), 0.25, math.sqrt(0.5)),
        scheme=SchemeId.OBAcBO, q0=(1.0, 1.0), p0=(-0.1, -0.1), T=4.0, h=0.1)
    with pytest.raises(ConfigurationError):
        run_ergodic(cfg, position_observable, 1.0)


# ---------------------------------------------------------------------------
# estimator behaviour


def test_deterministic_free_flight_is_exact():
    # gamma = 0, constant potential, no boundary in reach: q_N = q0 + T p0
    cfg = SimulationConfig(
        scheme=SchemeId.BAcB_deterministic,
        domain=HalfLine(0.0),
        dynamics=PotentialLangevin(ConstantPotential(1), 0.0, 1.0),
        T=1.0, h=0.25, M=3, seed=0, q0=(5.0,), p0=(1.5,), threads=1)
    rep = run_finite_time(cfg, position_observable, oracle_value=6.5)
    assert rep.error == pytest.approx(0.0, abs=1e-14)
    assert rep.half_width == 0.0
    assert rep.mean_collisions == 0.0


def test_constant_observable_has_zero_error():
    cfg = exp2_config(M=500, T=2.0)
    rep = run_ergodic(cfg, ObservableSpec("one", lambda Q, P: np.ones(len(Q))),
                      target=1.0)
    assert rep.error == 0.0
    assert rep.variance == 0.0


def test_estimation_failure_when_all_rejected():
    # grazing chord in a disc with a cap of one collision rejects everyone
    cfg = SimulationConfig(
        scheme=SchemeId.BAcB_deterministic,
        domain=Ball(1.0),
        dynamics=PotentialLangevin(ConstantPotential(2), 0.0, 1.0),
        T=1.0, h=1.0, M=4, seed=0, q0=(0.99, 0.0), p0=(0.0, 100.0),
        max_collisions=1, threads=1)
    with pytest.raises(EstimationFailureError):
        run_finite_time(cfg, position_observable, oracle_value=0.0)


def test_half_width_scales_like_inverse_root_m():
    reports = {m: run_ergodic(exp2_config(M=m, T=4.0),
                              half_square_norm_observable(), 1.2626)
               for m in (4000, 16000, 64000)}
    r1 = reports[4000].half_width / reports[16000].half_width
    r2 = reports[16000].half_width / reports[64000].half_width
    assert r1 == pytest.approx(2.0, rel=0.1)
    assert r2 == pytest.approx(2.0, rel=0.1)


def test_reports_identical_across_worker_counts():
    cfg1 = exp2_config(M=6000, T=4.0, chunk_size=1000, threads=1)
    cfg2 = exp2_config(M=6000, T=4.0, chunk_size=1000, threads=2)
    a = run_ergodic(cfg1, half_square_norm_observable(), 1.2626)
    b = run_ergodic(cfg2, half_square_norm_observable(), 1.2626)
    assert a.mean == b.mean
    assert a.variance == b.variance
    assert a.half_width == b.half_width
    assert a.mean_collisions == b.mean_collisions
    assert a.error == b.error


def test_noise_laws_weakly_equivalent():
    target = 1.2625676380804907
    rep_g = run_ergodic(exp2_config(M=100_000, noise="gaussian"),
                        half_square_norm_observable(), target)
    rep_3 = run_ergodic(exp2_config(M=100_000, noise="three_point"),
                        half_square_norm_observable(), target)
    assert abs(rep_g.mean - rep_3.mean) < rep_g.half_width + rep_3.half_width


# ---------------------------------------------------------------------------
# time averaging


def test_time_average_of_constant_is_exact():
    cfg = exp2_config(M=2, T=2.0, burn_in=1.0)
    rep = run_time_average(cfg, ObservableSpec(
        "one", lambda Q, P: np.ones(len(Q))))
    assert rep.mean == 1.0
    assert rep.variance == 0.0


def test_time_average_ratio_of_sums_on_constant_pair():
    cfg = exp2_config(M=2, T=2.0, burn_in=0.5)
    rep = run_time_average(cfg, pair_observable)
    assert rep.extras["ratio_of_sums"] == pytest.approx(2.0, rel=1e-14)


def test_time_average_tracks_ensemble_average():
    cfg = exp2_config(M=4, T=400.0, h=0.05, burn_in=20.0)
    rep = run_time_average(cfg, half_square_norm_observable())
    assert abs(rep.mean - 1.2626) < 0.02


# ---------------------------------------------------------------------------
# convergence fitting


def test_fit_loglog_slope_recovers_exact_power():
    h = np.array([0.4, 0.2, 0.1, 0.05])
    slope, ci = fit_loglog_slope(h, 3.0 * h ** 2)
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert ci < 1e-10


def test_convergence_study_needs_three_step_sizes():
    with pytest.raises(ConfigurationError):
        convergence_study(exp2_config(), [0.1, 0.05],
                          half_square_norm_observable(), 1.2626)


def test_convergence_study_rejects_pure_noise():
    # the exact stationary draw has no h-dependent bias: every row sits
    # below its Monte Carlo half width and the fit must refuse
    cfg = exp2_config(M=400, T=4.0)
    with pytest.raises(UnderpoweredStudyError):
        convergence_study(cfg, [0.4, 0.2, 0.1],
                          ObservableSpec("one", lambda Q, P: np.ones(len(Q))),
                          target_constant := 1.0)


def test_convergence_study_fits_second_order_scheme():
    cfg = exp2_config(scheme=SchemeId.OBAcBO, M=150_000)
    report = convergence_study(cfg, [0.5, 0.4, 0.2, 0.1],
                               half_square_norm_observable(),
                               1.2625676380804907)
    assert [r.h for r in report.rows] == [0.5, 0.4, 0.2, 0.1]
    used = [r for r in report.rows if r.used_in_fit]
    assert len(used) >= 3
    assert 1.5 < report.slope < 2.5


# ---------------------------------------------------------------------------
# collision-time statistics


def test_tau_statistics_basic():
    cfg = SimulationConfig(
        scheme=SchemeId.OBAcBO,
        domain=HalfLine(0.0),
        dynamics=PotentialLangevin(QuadraticWell(1.0, 1), 1.0, 1.0),
        T=50.0, h=0.01, M=2000, seed=7, q0=(1.0,), p0=None,
        p0_law="gaussian", threads=1)
    stats = tau_statistics(cfg)
    assert stats.count == 2000          # every walker eventually collides
    assert 0.0 < stats.lambda1 + cfg.h / 2.0 < cfg.h
    assert stats.lambda2 == pytest.approx(1.0 / 3.0, abs=0.05)
    assert stats.hist_counts.sum() == stats.count


def test_tau_statistics_empty_when_boundary_unreachable():
    cfg = SimulationConfig(
        scheme=SchemeId.OBAcBO,
        domain=HalfLine(-1000.0),
        dynamics=PotentialLangevin(QuadraticWell(1.0, 1), 1.0, 1.0),
        T=1.0, h=0.1, M=50, seed=7, q0=(1.0,), p0=(-0.1,), threads=1)
    with pytest.raises(EmptyStatisticsError):
        tau_statistics(cfg)


# ---------------------------------------------------------------------------
# energy drift


def test_energy_drift_free_space_second_order():
    rep = energy_drift_study(
        QuadraticWell(1.0, 2), None, None,
        h_list=[0.2, 0.1, 0.05, 0.025], T=5.0,
        q0=(0.1, 0.5), p0=(1.5, 1.5), threads=1)
    assert rep.slope == pytest.approx(2.0, abs=0.1)


def test_energy_drift_requires_momentum_for_fixed_runs():
    with pytest.raises(ConfigurationError):
        energy_drift_study(QuadraticWell(1.0, 2), None, None,
                           h_list=[0.2, 0.1, 0.05], T=1.0, q0=(0.1, 0.5))
