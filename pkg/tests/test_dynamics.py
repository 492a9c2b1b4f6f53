"""Integrator tests: analytic oracles, invariants, convergence, guards."""

import math
from dataclasses import replace

import numpy as np
import pytest

from combcool import (
    DecoherenceRates,
    DensityMatrix,
    IntegratorConfig,
    LevelSystem,
    Modulation,
    PulseTrainConfig,
    TraceDrift,
    Trajectory,
    free_evolution,
    lvn_rhs,
    propagate,
    quantum_yield,
    steady_state_yield,
)
from combcool.dynamics import omega_max, resolve_step

from helpers import quiet_propagate, random_density_matrix, random_setup

MIXED_RHO0 = DensityMatrix.from_matrix(
    np.array(
        [
            [0.6, 0.2 + 0.1j, -0.05j],
            [0.2 - 0.1j, 0.3, 0.1],
            [0.05j, 0.1, 0.1],
        ]
    )
)


# --- zero field reduces to free evolution ------------------------------------


def test_zero_field_matches_free_evolution_pointwise():
    sys_ = LevelSystem.from_transitions(3.0, 4.5)
    cfg = PulseTrainConfig(rabi_peak=0.0, omega_L=4.5, tau=0.3, T=20.0, N=2)
    rates = DecoherenceRates(gamma21=0.004, gamma23=0.002, Gamma21=0.003, Gamma31=0.001, Gamma23=0.004)
    traj = propagate(MIXED_RHO0, cfg, sys_, rates, IntegratorConfig())
    t0 = traj.times[0]
    picks = np.linspace(0, traj.n_samples - 1, 20).astype(int)
    for i in picks:
        expected = free_evolution(MIXED_RHO0, traj.times[i] - t0, rates)
        np.testing.assert_allclose(
            traj.data[i], expected.to_vector(), atol=1e-9, rtol=0.0
        )


# --- free evolution map -------------------------------------------------------


def test_free_evolution_composition_is_exact():
    rates = DecoherenceRates(gamma21=0.03, gamma23=0.01, Gamma21=0.02, Gamma31=0.005, Gamma23=0.025)
    one = free_evolution(free_evolution(MIXED_RHO0, 1.3, rates), 2.4, rates)
    two = free_evolution(MIXED_RHO0, 3.7, rates)
    np.testing.assert_allclose(one.to_vector(), two.to_vector(), atol=1e-14)


def test_free_evolution_population_bookkeeping():
    rates = DecoherenceRates(gamma21=0.03, gamma23=0.01)
    dt = 5.0
    out = free_evolution(MIXED_RHO0, dt, rates)
    total = rates.gamma2_total
    # excited state empties exponentially at the total rate
    assert out.rho22 == pytest.approx(MIXED_RHO0.rho22 * math.exp(-total * dt))
    # and the loss lands in 1 and 3 with branching gamma21 : gamma23
    gain1 = out.rho11 - MIXED_RHO0.rho11
    gain3 = out.rho33 - MIXED_RHO0.rho33
    assert gain1 / gain3 == pytest.approx(rates.gamma21 / rates.gamma23, rel=1e-12)
    assert gain1 + gain3 == pytest.approx(
        MIXED_RHO0.rho22 * (1.0 - math.exp(-total * dt)), rel=1e-12
    )
    # trace preserved exactly
    assert sum(out.populations) == pytest.approx(1.0, abs=1e-15)


def test_free_evolution_decays_coherences_monotonically():
    rates = DecoherenceRates(gamma21=0.02, gamma23=0.02, Gamma21=0.01, Gamma31=0.01, Gamma23=0.02)
    mags = []
    for dt in (0.0, 1.0, 2.0, 4.0):
        out = free_evolution(MIXED_RHO0, dt, rates)
        mags.append((abs(out.rho12), abs(out.rho13), abs(out.rho23)))
    for a, b in zip(mags, mags[1:]):
        assert all(x >= y for x, y in zip(a, b))
    with pytest.raises(ValueError):
        free_evolution(MIXED_RHO0, -1.0, rates)


def test_free_evolution_identity_without_rates():
    out = free_evolution(MIXED_RHO0, 7.0, DecoherenceRates.none())
    np.testing.assert_allclose(out.to_vector(), MIXED_RHO0.to_vector(), atol=0.0)


# --- resonant two-level transfer against the pulse-area law -------------------


def test_resonant_pulse_area_law():
    """A weak resonant pulse on 1<->2 transfers sin^2(area) of the population.

    Level 3 is detuned by 5 frequency units, far outside the pulse bandwidth,
    so the system is effectively two-level and the rotating-wave area law
    sin^2(rabi_peak * tau * sqrt(2*pi)) holds to much better than 2%.
    """
    sys_ = LevelSystem.from_transitions(30.0, 35.0)
    for rabi, tau in ((0.1, 2.0), (0.2, 2.0)):
        cfg = PulseTrainConfig(rabi_peak=rabi, omega_L=30.0, tau=tau, T=20.0 * tau, N=1)
        traj = propagate(
            DensityMatrix.pure(1), cfg, sys_, DecoherenceRates.none(), IntegratorConfig()
        )
        area = rabi * tau * math.sqrt(2.0 * math.pi)
        oracle = math.sin(area) ** 2
        assert traj.rho22[-1] == pytest.approx(oracle, rel=0.02)
        assert abs(traj.rho33[-1]) < 1e-6  # detuned level stays empty


# --- invariants over random configurations ------------------------------------


def test_trace_preserved_for_random_configurations():
    rng = np.random.default_rng(20260815)
    for _ in range(25):
        sys_, cfg, rates, rho0, icfg = random_setup(rng)
        traj = quiet_propagate(rho0, cfg, sys_, rates, icfg)
        assert traj.metadata["diagnostics"]["trace_max_drift"] <= 1e-6
        assert np.all(traj.populations >= -1e-9)


def test_populations_stay_in_unit_interval():
    rng = np.random.default_rng(99)
    for _ in range(5):
        sys_, cfg, rates, rho0, icfg = random_setup(rng)
        traj = quiet_propagate(rho0, cfg, sys_, rates, icfg)
        assert np.all(traj.populations <= 1.0 + 1e-9)


# --- interpulse phase handling -------------------------------------------------


def test_time_reference_modes_agree_when_period_is_commensurate():
    """If omega21*T, omega31*T, omega32*T are all multiples of 2*pi, the
    per-period coherence rotation is the identity and both time references
    give the same dynamics."""
    sys_ = LevelSystem.from_transitions(1.0, 2.0)
    cfg = PulseTrainConfig(rabi_peak=0.7, omega_L=2.0, tau=0.4, T=8.0 * math.pi, N=3)
    a = propagate(MIXED_RHO0, cfg, sys_, DecoherenceRates.none(), IntegratorConfig())
    b = propagate(
        MIXED_RHO0,
        cfg,
        sys_,
        DecoherenceRates.none(),
        IntegratorConfig(interpulse_phases=True),
    )
    np.testing.assert_allclose(a.data[-1], b.data[-1], atol=1e-12)


def test_time_reference_changes_offresonant_accumulation():
    """With an incommensurate period the two references must differ: the
    global-time reference rotates coherences between pulses, changing how
    amplitude accumulates over the train."""
    sys_ = LevelSystem.from_transitions(1.3, 2.3)
    cfg = PulseTrainConfig(rabi_peak=0.5, omega_L=2.3, tau=0.4, T=21.7, N=6)
    a = propagate(DensityMatrix.pure(1), cfg, sys_, DecoherenceRates.none(), IntegratorConfig())
    b = propagate(
        DensityMatrix.pure(1),
        cfg,
        sys_,
        DecoherenceRates.none(),
        IntegratorConfig(interpulse_phases=True),
    )
    assert np.max(np.abs(a.data[-1] - b.data[-1])) > 1e-3


# --- integrator bookkeeping -----------------------------------------------------


def test_pulse_map_reuse_matches_direct_integration():
    sys_ = LevelSystem.from_transitions(3.0, 4.0)
    cfg = PulseTrainConfig(rabi_peak=0.8, omega_L=4.0, tau=0.3, T=25.0, N=4)
    rates = DecoherenceRates(gamma21=0.001, gamma23=0.001, Gamma21=0.001, Gamma31=0.0, Gamma23=0.001)
    a = propagate(MIXED_RHO0, cfg, sys_, rates, IntegratorConfig(reuse_pulse_map=True))
    b = propagate(MIXED_RHO0, cfg, sys_, rates, IntegratorConfig(reuse_pulse_map=False))
    np.testing.assert_allclose(a.data[-1], b.data[-1], atol=1e-10)


def test_early_stop_halts_converged_runs():
    sys_ = LevelSystem.from_transitions(3.0, 4.0)
    # no drive, strong decay: the state converges almost immediately
    cfg = PulseTrainConfig(rabi_peak=0.0, omega_L=4.0, tau=0.3, T=20.0, N=60)
    rates = DecoherenceRates(gamma21=0.5, gamma23=0.5, Gamma21=0.5, Gamma31=0.5, Gamma23=1.0)
    traj = propagate(
        DensityMatrix.pure(2),
        cfg,
        sys_,
        rates,
        IntegratorConfig(early_stop_pulses=5, early_stop_tol=1e-9),
    )
    diag = traj.metadata["diagnostics"]
    assert diag["early_stopped"]
    assert diag["pulses_run"] < 60


def test_trace_drift_guard_raises():
    sys_ = LevelSystem.from_transitions(4.0, 5.0)
    cfg = PulseTrainConfig(rabi_peak=1.0, omega_L=5.0, tau=0.3, T=16.0, N=2)
    with pytest.warns(UserWarning):
        cfg = PulseTrainConfig(rabi_peak=1.0, omega_L=5.0, tau=0.3, T=12.0, N=2)
    with pytest.raises(TraceDrift):
        propagate(
            DensityMatrix.pure(1),
            cfg,
            sys_,
            DecoherenceRates.none(),
            IntegratorConfig(trace_tol=1e-16),
        )


def test_resolve_step_tracks_fastest_frequency():
    sys_ = LevelSystem.from_transitions(3.0, 7.0)
    cfg = PulseTrainConfig(rabi_peak=1.0, omega_L=9.0, tau=0.3, T=20.0, N=1)
    assert omega_max(cfg, sys_) == pytest.approx(16.0)
    assert resolve_step(IntegratorConfig(), cfg, sys_) == pytest.approx(0.02 / 16.0)
    explicit = IntegratorConfig(step_in_pulse=1e-3)
    assert resolve_step(explicit, cfg, sys_) == pytest.approx(1e-3)


def test_rate_relation_gate_on_propagate():
    from combcool import RateRelationViolation

    sys_ = LevelSystem.from_transitions(3.0, 4.0)
    cfg = PulseTrainConfig(rabi_peak=0.1, omega_L=4.0, tau=0.3, T=20.0, N=1)
    bad = DecoherenceRates(Gamma21=0.001, Gamma31=0.001, Gamma23=0.001)
    with pytest.raises(RateRelationViolation):
        propagate(DensityMatrix.pure(1), cfg, sys_, bad, IntegratorConfig())
    # explicit waiver lets the run proceed
    traj = propagate(
        DensityMatrix.pure(1), cfg, sys_, bad, IntegratorConfig(), allow_unconstrained_rates=True
    )
    assert traj.n_samples > 0


# --- equation of motion sanity ---------------------------------------------------


def test_lvn_rhs_conserves_total_population():
    rng = np.random.default_rng(3)
    sys_ = LevelSystem.from_transitions(2.0, 3.1)
    cfg = PulseTrainConfig(
        rabi_peak=1.2, omega_L=3.1, tau=0.4, T=20.0, N=1, modulation=Modulation.sine(2.0, 1.0)
    )
    rates = DecoherenceRates(gamma21=0.01, gamma23=0.02, Gamma21=0.005, Gamma31=0.0, Gamma23=0.005)
    for _ in range(10):
        rho = random_density_matrix(rng)
        t = rng.uniform(-1.0, 1.0)
        drho = lvn_rhs(rho, t, 0, cfg, sys_, rates)
        assert abs(drho.rho11 + drho.rho22 + drho.rho33) < 1e-13


def test_lvn_rhs_agrees_with_vectorized_generator():
    """The scalar reference equations and the 9x9 generator the integrator
    actually uses must produce the same derivative."""
    from combcool.dynamics import _generator_matrices

    rng = np.random.default_rng(11)
    sys_ = LevelSystem.from_transitions(2.0, 3.1)
    cfg = PulseTrainConfig(
        rabi_peak=1.2, omega_L=3.1, tau=0.4, T=20.0, N=1, modulation=Modulation.cosine(1.5, 0.8)
    )
    rates = DecoherenceRates(gamma21=0.01, gamma23=0.02, Gamma21=0.005, Gamma31=0.0, Gamma23=0.005)
    # pulse-local time equals absolute time for pulse k = 0
    ts = rng.uniform(-1.0, 1.0, size=6)
    gens = _generator_matrices(ts, cfg, sys_, rates)
    for t, L in zip(ts, gens):
        rho = random_density_matrix(rng)
        reference = lvn_rhs(rho, float(t), 0, cfg, sys_, rates)
        np.testing.assert_allclose(
            L @ rho.to_vector(), reference.to_vector(), atol=1e-13
        )


# --- convergence -------------------------------------------------------------------


def _short_strong_train():
    sys_ = LevelSystem.from_transitions(340.7 / 70.0, 410.7 / 70.0)
    cfg = PulseTrainConfig(
        rabi_peak=1.0,
        omega_L=410.7 / 70.0,
        tau=0.198,
        T=14005.253930,
        N=5,
        modulation=Modulation.sine(4.0, 340.7 / 70.0),
    )
    return sys_, cfg


def test_step_halving_is_converged():
    sys_, cfg = _short_strong_train()
    icfg = IntegratorConfig(interpulse_phases=True)
    base_step = resolve_step(icfg, cfg, sys_)
    a = propagate(DensityMatrix.pure(1), cfg, sys_, DecoherenceRates.none(), icfg)
    b = propagate(
        DensityMatrix.pure(1),
        cfg,
        sys_,
        DecoherenceRates.none(),
        replace(icfg, step_in_pulse=base_step / 2.0),
    )
    assert np.max(np.abs(a.data[-1] - b.data[-1])) < 1e-6


def test_window_extension_is_converged():
    sys_, cfg = _short_strong_train()
    icfg = IntegratorConfig(interpulse_phases=True)
    a = propagate(DensityMatrix.pure(1), cfg, sys_, DecoherenceRates.none(), icfg)
    b = propagate(
        DensityMatrix.pure(1),
        cfg,
        sys_,
        DecoherenceRates.none(),
        replace(icfg, window_sigmas=8.0),
    )
    assert np.max(np.abs(a.data[-1] - b.data[-1])) < 1e-6


# --- yield helpers -----------------------------------------------------------------


def test_yield_functions():
    times = np.linspace(0.0, 9.0, 10)
    data = np.zeros((10, 9))
    data[:, 2] = np.linspace(0.0, 0.9, 10)
    data[:, 0] = 1.0 - data[:, 2]
    traj = Trajectory(times=times, data=data, pulse_end_indices=np.array([9]), metadata={})
    assert quantum_yield(traj) == pytest.approx(0.9)
    # trailing mean over the last 5% of samples (here: the last sample)
    assert steady_state_yield(traj) == pytest.approx(0.9)
    assert steady_state_yield(traj, trailing_fraction=0.5) == pytest.approx(
        np.mean(data[5:, 2])
    )
