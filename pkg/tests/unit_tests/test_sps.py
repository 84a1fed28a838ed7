"""Tests for the cavity figures of merit and the two-time correlation grid."""
from dataclasses import replace

import numpy as np
import pytest

from app.drive import PulseSpec
from app.dynamics import ModelSpec
from app.errors import NoEmissionError
from app.sps import (
    CavitySpec,
    CorrelationGrid,
    CorrelationSettings,
    FomReport,
    background_loss,
    cavity_emission,
    exponential_tail,
    fit_decay_rate,
    indistinguishability,
    purcell_rate,
    qrt_correlations,
    run_resonant_reference,
    source_figures_of_merit,
    upper_bounds,
)

FAST_CAVITY = CavitySpec(g=0.5, kappa=5.0, gamma_b=0.02, gamma_d=0.0, gamma_coll=1.0, n_max=2)
FAST_SETTINGS = CorrelationSettings(emission_t_max=80.0, tail_fit_window=10.0, s_max=4.0, ds=0.02)


def excited_model(cavity=FAST_CAVITY):
    return ModelSpec(pulse=PulseSpec.off(), backend="unitary", initial_state="excited", cavity=cavity)


def slow_population_rate(cavity):
    """Decay rate of ⟨σ†σ⟩ from the slow eigenvalue of the one-excitation amplitudes."""
    mean = (cavity.kappa + cavity.gamma_b) / 4.0
    split = np.sqrt(((cavity.kappa - cavity.gamma_b) / 4.0) ** 2 - cavity.g ** 2)
    return 2.0 * (mean - split)


@pytest.fixture(scope="module")
def excited_run():
    model = excited_model()
    return qrt_correlations(model, FAST_SETTINGS.solver_config(model))


@pytest.fixture(scope="module")
def excited_report():
    return source_figures_of_merit(excited_model(), FAST_SETTINGS)


class TestCavitySpec:
    def test_defaults(self):
        cavity = CavitySpec()
        assert cavity.g == 0.041 and cavity.kappa == 0.46 and cavity.n_max == 2

    @pytest.mark.parametrize("kwargs", [dict(g=-0.1), dict(gamma_coll=1.5), dict(n_max=1)])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            CavitySpec(**kwargs)

    def test_with_collection(self):
        assert CavitySpec().with_collection(0.5).gamma_coll == 0.5

    def test_purcell_rate(self):
        assert purcell_rate(FAST_CAVITY) == pytest.approx(0.2)


class TestCorrelationSettings:
    def test_rejects_invalid(self):
        with pytest.raises(ValueError):
            CorrelationSettings(outer_step=0.0)

    def test_solver_config_is_aligned(self):
        config = FAST_SETTINGS.solver_config(excited_model())
        assert config.record_stride * config.dt == pytest.approx(FAST_SETTINGS.outer_step)
        assert config.stop_threshold == FAST_SETTINGS.emission_threshold
        assert config.t_end >= FAST_SETTINGS.emission_t_max


class TestSingleTime:
    def test_emission_stops_early(self, excited_run):
        _, traj = excited_run
        assert traj.stopped_early
        assert traj.t_end < FAST_SETTINGS.emission_t_max

    def test_photon_budget_closes(self, excited_run):
        _, traj = excited_run
        total = cavity_emission(traj, fit_window=10.0) + background_loss(traj, fit_window=10.0)
        assert total == pytest.approx(1.0, abs=2e-3)

    def test_background_loss_follows_branching_ratio(self, excited_run):
        _, traj = excited_run
        rate = slow_population_rate(FAST_CAVITY)
        assert background_loss(traj, fit_window=10.0) == pytest.approx(FAST_CAVITY.gamma_b / rate, abs=0.01)

    def test_decay_rate(self, excited_run):
        _, traj = excited_run
        assert fit_decay_rate(traj) == pytest.approx(slow_population_rate(FAST_CAVITY), rel=1e-2)

    def test_no_cavity(self):
        model = ModelSpec(pulse=PulseSpec.off(), backend="unitary", initial_state="excited")
        with pytest.raises(ValueError):
            qrt_correlations(model, FAST_SETTINGS.solver_config(model))


class TestExponentialTail:
    def test_recovers_exponential_integral(self):
        t = np.linspace(0.0, 50.0, 501)
        values = np.exp(-0.5 * t)
        assert exponential_tail(t, values, 10.0) == pytest.approx(np.exp(-25.0) / 0.5, rel=1e-6)

    def test_growing_signal_has_no_tail(self):
        t = np.linspace(0.0, 10.0, 101)
        assert exponential_tail(t, np.exp(0.1 * t), 5.0) == 0.0

    def test_too_few_samples(self):
        assert exponential_tail(np.array([0.0, 1.0]), np.array([1.0, 0.5])) == 0.0


class TestCorrelationGrid:
    def test_zero_delay_identities(self, excited_run):
        corr, _ = excited_run
        np.testing.assert_allclose(corr.g1[:, 0].real, corr.n_cav, atol=1e-12)
        np.testing.assert_allclose(corr.g1[:, 0].imag, 0.0, atol=1e-12)
        np.testing.assert_allclose(corr.G2_pop[:, 0], corr.n_cav ** 2, atol=1e-14)

    def test_single_excitation_has_no_coincidences(self, excited_run):
        corr, _ = excited_run
        assert np.max(np.abs(corr.g2)) < 1e-10

    def test_grid_shape(self, excited_run):
        corr, traj = excited_run
        n = len(corr.t_grid)
        assert corr.g1.shape == (n, n)
        assert corr.step == pytest.approx(FAST_SETTINGS.outer_step)
        assert len(traj.states) == n

    def test_subsample(self, excited_run):
        corr, _ = excited_run
        coarse = corr.subsample(2)
        assert len(coarse.t_grid) == (len(corr.t_grid) + 1) // 2
        assert coarse.step == pytest.approx(2 * corr.step)
        np.testing.assert_allclose(coarse.g1[1, 1], corr.g1[2, 2])

    def test_to_frame_keeps_valid_cells(self, excited_run):
        corr, _ = excited_run
        frame = corr.to_frame()
        n = len(corr.t_grid)
        assert len(frame) == n * (n + 1) // 2
        assert list(frame.columns) == ["t", "s", "re_g1", "im_g1", "g2", "G2_pop"]

    def test_empty_grid_has_no_emission(self):
        n = 6
        zeros = np.zeros((n, n))
        corr = CorrelationGrid(
            t_grid=np.arange(n) * 0.5, s_grid=np.arange(n) * 0.5, g1=zeros.astype(complex),
            g2=zeros, G2_pop=zeros, mean_a=np.zeros(n, dtype=complex), n_cav=np.zeros(n),
        )
        with pytest.raises(NoEmissionError):
            indistinguishability(corr)

    def test_single_outer_time(self):
        one = np.zeros((1, 1))
        corr = CorrelationGrid(
            t_grid=np.zeros(1), s_grid=np.zeros(1), g1=one.astype(complex), g2=one, G2_pop=one,
            mean_a=np.zeros(1, dtype=complex), n_cav=np.zeros(1),
        )
        with pytest.raises(NoEmissionError):
            indistinguishability(corr)


class TestFiguresOfMerit:
    def test_pure_emitter_is_indistinguishable(self, excited_report):
        assert excited_report.I > 0.99
        assert excited_report.I_coarse == pytest.approx(excited_report.I, abs=0.01)

    def test_budget(self, excited_report):
        assert excited_report.P_X_final == 1.0
        assert abs(excited_report.budget_residual) < 2e-3
        assert excited_report.N + excited_report.N_b == pytest.approx(1.0, abs=2e-3)

    def test_dephasing_lowers_indistinguishability(self, excited_report):
        dephased = source_figures_of_merit(excited_model(replace(FAST_CAVITY, gamma_d=0.1)), FAST_SETTINGS)
        assert dephased.I < excited_report.I - 0.01

    def test_collection_efficiency_scales_N(self, excited_report):
        half = source_figures_of_merit(excited_model(FAST_CAVITY.with_collection(0.5)), FAST_SETTINGS)
        assert half.N == pytest.approx(0.5 * excited_report.N, rel=1e-9)
        assert half.I == pytest.approx(excited_report.I, rel=1e-9)

    def test_record(self, excited_report):
        record = excited_report.as_record()
        assert record["N"] == excited_report.N
        assert record["backend"] == "unitary"
        assert record["kappa"] == FAST_CAVITY.kappa
        assert record["outer_step"] == pytest.approx(0.5)

    def test_needs_cavity(self):
        with pytest.raises(ValueError):
            source_figures_of_merit(ModelSpec(pulse=PulseSpec.off(), backend="unitary"), FAST_SETTINGS)

    def test_report_defaults(self):
        report = FomReport(N=0.9, N_b=0.05, I=0.97, P_X_final=0.99, budget_residual=0.0)
        assert report.as_record()["I_coarse"] is None


class TestUpperBounds:
    def test_bounds_of_excited_emitter(self):
        bounds = upper_bounds(FAST_CAVITY, settings=FAST_SETTINGS, backend="unitary")
        expected_beta = 1.0 - FAST_CAVITY.gamma_b / slow_population_rate(FAST_CAVITY)
        assert bounds.beta == pytest.approx(expected_beta, abs=0.01)
        assert bounds.I_ub > 0.99

    def test_resonant_reference_uses_filtered_collection(self):
        report = run_resonant_reference(1.0, FAST_CAVITY, settings=FAST_SETTINGS, backend="unitary")
        assert report.settings["gamma_coll"] == 0.5
        assert report.settings["delta"] == 0.0
        assert 0.0 < report.N <= 0.5
