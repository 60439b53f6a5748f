import math

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from ifscreen.exceptions import ConfigError, GraphError
from ifscreen.graph.exposure import compute_exposure
from ifscreen.panel import generate_allocation
from ifscreen.settings import (ExposureSpec, NetworkConfig, OutcomeModelConfig, SweepConfig, TestConfig,
                               sweep_config_from_dict)
from ifscreen.simulator import (SweepSettings, gen_covariates, gen_errors, gen_network, nonlinear_term,
                                run_power_sweep, simulate_outcomes, write_power_csv)
from ifscreen.simulator import sweep as sweep_module
from ifscreen.simulator.sweep import POWER_COLUMNS

PI = (0.1, 0.25, 0.5)


class TestCovariatesAndErrors:
    def test_covariate_moments(self):
        X = gen_covariates(10 ** 5, seed=0)

        assert abs(X[:, 0].mean() - 0.5) < 0.013
        assert abs(X[:, 1].var(ddof=1) - 3) < 0.1
        assert (X[:, 1] == np.round(X[:, 1])).all()

    def test_covariates_reproducible(self):
        assert_array_equal(gen_covariates(50, seed=4), gen_covariates(50, seed=4))

    def test_common_variance(self):
        errors = gen_errors(10 ** 5, 3, 0.8, seed=1)
        covariance = np.cov(errors, rowvar=False)

        assert_allclose(np.diag(covariance), 1, atol=0.02)
        assert_allclose(covariance[np.triu_indices(3, k=1)], 0.8, atol=0.02)

    def test_independent_columns(self):
        covariance = np.cov(gen_errors(10 ** 5, 2, 0.0, seed=2), rowvar=False)

        assert abs(covariance[0, 1]) < 0.02

    @pytest.mark.parametrize('rho', [-0.1, 1.0])
    def test_rho_range(self, rho):
        with pytest.raises(ConfigError):
            gen_errors(10, 2, rho, seed=0)


class TestOutcomes:
    def test_nonlinear_term(self):
        assert nonlinear_term(20) == pytest.approx(1 + 5 * math.exp(0.4))
        assert nonlinear_term(20) == pytest.approx(8.459, abs=1e-3)

    def test_nonlinear_term_saturates(self):
        assert nonlinear_term(100) - nonlinear_term(20) == pytest.approx(80 / 20)

    def test_null_linear_model(self, simulated_graph):
        n = simulated_graph.n
        X = gen_covariates(n, seed=3)
        W = generate_allocation(n, PI, seed=3)
        Y = simulate_outcomes(simulated_graph, W, X, OutcomeModelConfig('linear_general', 0.0, 0.0), seed=3)

        assert_allclose(Y - (2 * W + X[:, :1] + X[:, 1:]), gen_errors(n, 3, 0.0, seed=3))

    @pytest.mark.parametrize('family, scale', [('linear_general', lambda W: 1), ('linear_tfe', lambda W: 2 * W + 1)])
    def test_signal_enters_through_the_share_of_treated_friends(self, simulated_graph, family, scale):
        n = simulated_graph.n
        X = gen_covariates(n, seed=5)
        W = generate_allocation(n, PI, seed=5)

        null = simulate_outcomes(simulated_graph, W, X, OutcomeModelConfig(family, 0.0, 0.5), seed=5)
        signal = simulate_outcomes(simulated_graph, W, X, OutcomeModelConfig(family, 2.0, 0.5), seed=5)
        H = np.column_stack([compute_exposure(simulated_graph, W[:, k], ExposureSpec('fracFrds'))
                             for k in range(3)])

        assert_allclose(signal - null, 2.0 * scale(W) * H, atol=1e-12)

    def test_nonlinear_tfe_baseline(self, simulated_graph):
        n = simulated_graph.n
        X = gen_covariates(n, seed=6)
        W = np.zeros((n, 3), dtype=np.uint8)
        Y = simulate_outcomes(simulated_graph, W, X, OutcomeModelConfig('nonlinear_tfe', 1.0, 0.0), seed=6)

        # nobody is treated: exposure 0 contributes 5 exp(0) = 5
        baseline = X[:, :1] * X[:, 1:] + ((X[:, :1] > 0.5) & (X[:, 1:] > 3.5)) + 5.0
        assert_allclose(Y - baseline, gen_errors(n, 3, 0.0, seed=6))

    def test_time_effects(self, simulated_graph):
        n = simulated_graph.n
        X = gen_covariates(n, seed=7)
        W = generate_allocation(n, PI, seed=7)
        plain = simulate_outcomes(simulated_graph, W, X, OutcomeModelConfig(), seed=7)
        shifted = simulate_outcomes(simulated_graph, W, X, OutcomeModelConfig(time_effects=(0, 5, -3)), seed=7)

        assert_allclose(shifted - plain, np.tile([0.0, 5.0, -3.0], (n, 1)), atol=1e-12)

        with pytest.raises(ConfigError):
            simulate_outcomes(simulated_graph, W, X, OutcomeModelConfig(time_effects=(1, 2)), seed=7)

    def test_graph_required(self):
        with pytest.raises(GraphError):
            simulate_outcomes(None, np.zeros((3, 1)), np.zeros((3, 2)), OutcomeModelConfig(), seed=0)


class TestNetworks:
    def test_watts_strogatz_is_reproducible(self):
        config = NetworkConfig(kind='watts_strogatz', n=200, k=6, beta=0.1)
        first, second = gen_network(config, seed=1), gen_network(config, seed=1)

        assert_array_equal(first.indptr, second.indptr)
        assert_array_equal(first.indices, second.indices)

    def test_complete_erdos_renyi(self):
        graph = gen_network(NetworkConfig(kind='erdos_renyi', n=10, p=1.0), seed=0)

        assert (graph.n, graph.m) == (10, 45)

    def test_file_keeps_the_largest_component(self, tmp_path, caplog):
        path = tmp_path / 'network.txt'
        path.write_text('% an edge list\n1 2\n2 3\n3 1\n3 4\n7 8\n')
        graph = gen_network(NetworkConfig(kind='file', path=str(path)), seed=0)

        assert (graph.n, graph.m) == (4, 4)
        assert 'largest connected component keeps 4 of 6' in caplog.text

    def test_bad_parameters(self):
        with pytest.raises(ConfigError):
            gen_network(NetworkConfig(kind='watts_strogatz', n=10, k=20), seed=0)


def small_sweep(**overrides):
    raw = {
        'signal_grid': [0.0, 10.0],
        'variance_fractions': [0.5],
        'replications': 3,
        'network': {'kind': 'watts_strogatz', 'n': 40, 'k': 4, 'beta': 0.1},
        'tests': [{'algorithm': 'vertical', 'B': 19, 'label': 'vertical'}],
    }
    raw.update(overrides)

    return sweep_config_from_dict(raw)


class TestSweep:
    def test_power_table(self):
        table = run_power_sweep(small_sweep(), seed=0)

        assert list(table.columns) == POWER_COLUMNS + ['failed']
        assert len(table) == 2
        assert (table['replications'] + table['failed'] == 3).all()
        assert table['test'].tolist() == ['vertical', 'vertical']

    def test_reproducible_for_any_worker_count(self):
        serial = run_power_sweep(small_sweep(), seed=2, settings=SweepSettings(workers=1))
        pooled = run_power_sweep(small_sweep(), seed=2, settings=SweepSettings(workers=2))

        pd.testing.assert_frame_equal(serial, pooled)

    def test_numerical_failures_leave_incomplete_cells(self, monkeypatch, caplog):
        run_test = sweep_module.run_test

        def singular_for_broken(panel, graph, config, *args, **kwargs):
            if config.label == 'broken':
                raise np.linalg.LinAlgError('Singular matrix')

            return run_test(panel, graph, config, *args, **kwargs)

        monkeypatch.setattr(sweep_module, 'run_test', singular_for_broken)
        tests = [{'algorithm': 'vertical', 'B': 19, 'label': 'vertical'},
                 {'algorithm': 'vertical', 'B': 19, 'label': 'broken'}]
        table = run_power_sweep(small_sweep(tests=tests), seed=0, settings=SweepSettings(workers=1))

        broken = table[table['test'] == 'broken']
        assert (broken['failed'] == 3).all()
        assert (broken['replications'] == 0).all()
        assert 'broken failed at signal=0.0' in caplog.text
        assert 'LinAlgError' in caplog.text

    def test_csv_layout(self, tmp_path):
        path = tmp_path / 'power.csv'
        write_power_csv(run_power_sweep(small_sweep(replications=1), seed=0), path)

        assert path.read_text().splitlines()[0] == 'test,statistic,signal,rho,power,se,replications'

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            small_sweep(variance_fractions=[1.0])

        with pytest.raises(ConfigError):
            small_sweep(tests=[])

        with pytest.raises(ConfigError):
            SweepConfig(tests=[TestConfig()], alpha=1.5)


@pytest.mark.slow
def test_power_grows_with_the_signal():
    sweep = small_sweep(replications=100, signal_grid=[0.0, 2.0, 10.0])
    table = run_power_sweep(sweep, seed=1, settings=SweepSettings(workers=None))
    power, se = table['power'].to_numpy(), table['se'].to_numpy()

    assert (np.diff(power) >= -2 * np.maximum(se[1:], se[:-1])).all()


def desk_scale_sweep(family, signal_grid, tests, replications, time_effects=None):
    raw = {
        'family': family,
        'signal_grid': signal_grid,
        'variance_fractions': [0.8],
        'replications': replications,
        'time_effects': time_effects,
        'B': 99,
        'network': {'kind': 'watts_strogatz', 'n': 800, 'k': 20, 'beta': 0.1},
        'tests': tests,
    }

    return run_power_sweep(sweep_config_from_dict(raw), seed=0, settings=SweepSettings(workers=None))


def power_of(table, label):
    rows = table[table['test'] == label].sort_values('signal')

    return rows['power'].to_numpy(), rows['se'].to_numpy()


# 0.05 + 2 * sqrt(0.05 * 0.95 / 400)
NULL_REJECTION_BOUND = 0.0718


@pytest.mark.slow
class TestNullRejection:
    def test_general_model(self):
        tests = [{'algorithm': 'single_vertical', 'label': 'single_vertical'},
                 {'algorithm': 'vertical', 'label': 'vertical'}]
        table = desk_scale_sweep('linear_general', [0.0], tests, replications=400)

        assert (table['failed'] == 0).all()
        assert (table['power'] <= NULL_REJECTION_BOUND).all()

    def test_time_effects_cancel_within_pairs(self):
        tests = [{'algorithm': 'horizontal', 'label': 'horizontal'}]
        table = desk_scale_sweep('linear_tfe', [0.0], tests, replications=400, time_effects=[0.0, 5.0, -3.0])

        assert (table['failed'] == 0).all()
        assert (table['power'] <= NULL_REJECTION_BOUND).all()


@pytest.mark.slow
class TestPowerOrdering:
    def test_more_experiments_more_power(self):
        tests = [{'algorithm': 'single_vertical', 'label': 'single'},
                 {'algorithm': 'vertical', 'label': 'vertical'}]
        table = desk_scale_sweep('linear_general', [0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0], tests,
                                 replications=200)
        single, _ = power_of(table, 'single')
        vertical, _ = power_of(table, 'vertical')

        informative = np.flatnonzero((single >= 0.2) & (single <= 0.6))
        assert informative.size, f'no signal puts the one-experiment power in [0.2, 0.6]: {single}'

        # the informative signal with one-experiment power closest to 0.4
        cell = informative[np.argmin(np.abs(single[informative] - 0.4))]
        assert vertical[cell] >= single[cell] + 0.10

    def test_time_effect_model_favours_horizontal(self):
        tests = [{'algorithm': 'horizontal', 'label': 'horizontal'},
                 {'algorithm': 'vertical', 'label': 'vertical'}]
        table = desk_scale_sweep('linear_tfe', [0.25, 0.5, 1.0], tests, replications=200,
                                 time_effects=[0.0, 5.0, -3.0])
        horizontal, horizontal_se = power_of(table, 'horizontal')
        vertical, vertical_se = power_of(table, 'vertical')

        assert (horizontal >= vertical - 2 * np.hypot(horizontal_se, vertical_se)).all()

    def test_covariate_matching_beats_random_pairs(self):
        tests = [{'algorithm': 'horizontal', 'matching': 'mahalanobis', 'label': 'mahalanobis'},
                 {'algorithm': 'horizontal', 'matching': 'random', 'label': 'random'}]
        table = desk_scale_sweep('nonlinear_tfe', [0.25, 0.5, 1.0], tests, replications=200)
        matched, matched_se = power_of(table, 'mahalanobis')
        random, random_se = power_of(table, 'random')

        assert (matched >= random - 2 * np.hypot(matched_se, random_se)).all()
