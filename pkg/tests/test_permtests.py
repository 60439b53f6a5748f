import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from ifscreen.exceptions import ConfigError, GraphError, InfeasibleTestError, ValidationError
from ifscreen.graph.interference import from_edges
from ifscreen.panel import make_panel
from ifscreen.permtests import (EngineSettings, aggregate_pvalues, exact_pvalue, get_test, pvalue,
                                repeat_test, run_test)
from ifscreen.settings import ExposureSpec, StatisticSpec, TestConfig
from ifscreen.statistics import get_statistic

from .conftest import ring_with_chords, simulated


class TestPValues:
    def test_ties_count_against_the_observation(self):
        assert pvalue(2.0, [1.0, 3.0, 2.0]) == pytest.approx(0.75)

    def test_largest_observation(self):
        assert pvalue(5.0, np.zeros(200)) == pytest.approx(1 / 201)

    def test_smallest_observation(self):
        assert pvalue(0.0, [0.0, 1.0, 2.0]) == 1.0

    def test_exact(self):
        assert exact_pvalue(2.0, [1.0, 2.0, 3.0, 0.5]) == pytest.approx(0.5)
        assert exact_pvalue(2.0, [1.0, 3.0], weights=[0.75, 0.25]) == pytest.approx(0.25)

    def test_aggregation(self):
        assert aggregate_pvalues([0.01, 0.03]) == pytest.approx(0.04)
        assert aggregate_pvalues([1.0, 1.0]) == 1.0
        assert aggregate_pvalues([0.3]) == pytest.approx(0.6)
        assert aggregate_pvalues([0.6]) == 1.0

    @pytest.mark.parametrize('ps', [[], [0.0], [1.5], [float('nan')]])
    def test_aggregation_rejects(self, ps):
        with pytest.raises(ValidationError):
            aggregate_pvalues(ps)


class TestVertical:
    def test_result_shape(self, null_panel, simulated_graph):
        result = run_test(null_panel, simulated_graph, TestConfig(algorithm='vertical', B=40, seed=3))

        assert result.algorithm == 'vertical'
        assert result.statistic_kind == 'reg_coef'
        assert result.exposure_kind == 'fracFrds'
        assert result.B == 40
        assert result.t_replicates.shape == (40,)
        assert 1 / 41 <= result.p_value <= 1
        assert result.metadata['experiments'] == 3

    def test_same_seed_same_result(self, null_panel, simulated_graph):
        config = TestConfig(algorithm='vertical', B=30, seed=11)
        first = run_test(null_panel, simulated_graph, config)
        second = run_test(null_panel, simulated_graph, config)

        assert first.t_observed == second.t_observed
        assert_array_equal(first.t_replicates, second.t_replicates)

    def test_workers_do_not_change_the_result(self, null_panel, simulated_graph):
        config = TestConfig(algorithm='vertical', B=24, seed=5)
        serial = run_test(null_panel, simulated_graph, config, EngineSettings(workers=1))
        pooled = run_test(null_panel, simulated_graph, config, EngineSettings(workers=2))

        assert_allclose(serial.t_replicates, pooled.t_replicates, rtol=1e-12)
        assert serial.p_value == pytest.approx(pooled.p_value)

    def test_identity_permutation_reproduces_the_observation(self, null_panel, simulated_graph):
        config = TestConfig(algorithm='vertical', B=10, seed=2)
        test = get_test(config)
        replicator = test.prepare(null_panel, [simulated_graph], get_statistic(config.statistic)).replicator

        identity = np.arange(replicator.auxiliary.size)
        assert replicator.statistic_of(replicator.permuted(identity)) == replicator.observed()

    def test_duplicated_graph_doubles_the_statistic(self, null_panel, simulated_graph):
        config = TestConfig(algorithm='vertical', B=30, seed=8)
        single = run_test(null_panel, simulated_graph, config)
        double = run_test(null_panel, [simulated_graph, simulated_graph], config)

        assert double.t_observed == pytest.approx(2 * single.t_observed)
        assert double.p_value == single.p_value

    def test_exposure_blind_statistic_gives_one(self, null_panel):
        empty = from_edges(null_panel.n, [], [])
        config = TestConfig(algorithm='vertical', B=20, exposure=ExposureSpec('numFrds'))
        result = run_test(null_panel, empty, config)

        assert result.t_observed == 0
        assert result.p_value == 1.0
        assert result.warnings

    def test_graph_required(self, null_panel):
        with pytest.raises(GraphError, match='graph required for exposure kind'):
            run_test(null_panel, None, TestConfig(algorithm='vertical'))

    def test_graph_size_must_match(self, null_panel):
        with pytest.raises(GraphError):
            run_test(null_panel, from_edges(3, [0], [1]), TestConfig(algorithm='vertical'))

    def test_no_constant_units(self):
        panel = make_panel([[0, 1]] * 6, np.zeros((6, 2)), pi=(0.2, 0.8))

        with pytest.raises(InfeasibleTestError):
            run_test(panel, from_edges(6, [0], [1]), TestConfig(algorithm='vertical'))

    def test_statistic_must_fit_the_family(self, null_panel, simulated_graph):
        with pytest.raises(ConfigError):
            run_test(null_panel, simulated_graph,
                     TestConfig(algorithm='vertical', statistic=StatisticSpec(kind='anova_f')))

    def test_experiment_selection(self, null_panel, simulated_graph):
        config = TestConfig(algorithm='vertical', B=10, experiments=(2, 3), statistic=StatisticSpec('corr_diff'))

        assert run_test(null_panel, simulated_graph, config).metadata['experiments'] == 2

        with pytest.raises(ConfigError):
            run_test(null_panel, simulated_graph, TestConfig(algorithm='vertical', experiments=(4,)))

    def test_pairwise_corr_sum(self, null_panel, simulated_graph):
        config = TestConfig(algorithm='vertical', B=20, statistic=StatisticSpec('pairwise_corr_sum'))
        result = run_test(null_panel, simulated_graph, config)

        assert 0 <= result.t_observed <= 6

    def test_interference_is_detected(self, simulated_graph):
        panel = simulated(simulated_graph, signal=20.0, rho=0.8)
        result = run_test(panel, simulated_graph, TestConfig(algorithm='vertical', B=99, seed=1))

        assert result.p_value <= 0.05


class TestExhaustive:
    @pytest.fixture
    def small_panel(self):
        rng = np.random.default_rng(3)
        W = np.array([[0, 0]] * 4 + [[1, 1]] * 2 + [[0, 1]] * 4)
        Y = rng.normal(size=(10, 2)) + W

        return make_panel(W, Y, pi=(0.2, 0.6))

    def test_whole_group_enumerated(self, small_panel):
        graph = ring_with_chords(10, [(0, 5)])
        config = TestConfig(algorithm='vertical', focal_target=4, exhaustive=True,
                            statistic=StatisticSpec('corr_diff'))
        result = run_test(small_panel, graph, config)

        assert result.exhaustive
        assert result.metadata['group_size'] == 720
        assert result.B == 720
        assert result.p_value >= 1 / 720

    def test_agrees_with_monte_carlo(self, small_panel):
        graph = ring_with_chords(10, [(0, 5)])
        config = TestConfig(algorithm='vertical', focal_target=4, exhaustive=True, seed=4,
                            statistic=StatisticSpec('corr_diff'))
        exact = run_test(small_panel, graph, config)
        sampled = run_test(small_panel, graph, TestConfig(algorithm='vertical', focal_target=4, B=4000, seed=4,
                                                          statistic=StatisticSpec('corr_diff')))

        assert sampled.p_value == pytest.approx(exact.p_value, abs=0.05)

    @pytest.mark.slow
    @pytest.mark.parametrize('algorithm, kind', [('vertical', 'corr_diff'), ('vertical', 'reg_coef'),
                                                 ('single_vertical', 'reg_coef')])
    def test_agrees_with_long_monte_carlo(self, small_panel, algorithm, kind):
        graph = ring_with_chords(10, [(0, 5), (3, 8)])
        statistic = StatisticSpec(kind, use_neighbor_count=False)
        exact = run_test(small_panel, graph, TestConfig(algorithm=algorithm, focal_target=4, exhaustive=True,
                                                        seed=6, statistic=statistic))
        sampled = run_test(small_panel, graph, TestConfig(algorithm=algorithm, focal_target=4, B=10000,
                                                          seed=6, statistic=statistic))

        assert exact.exhaustive
        assert sampled.p_value == pytest.approx(exact.p_value, abs=0.02)

    def test_weighted_regeneration(self):
        rng = np.random.default_rng(9)
        W = (rng.random((10, 1)) < 0.5).astype(int)
        panel = make_panel(W, rng.normal(size=(10, 1)), pi=(0.5,))
        config = TestConfig(algorithm='single_vertical', focal_target=5, exhaustive=True,
                            statistic=StatisticSpec('reg_coef', use_neighbor_count=False))
        result = run_test(panel, ring_with_chords(10, [(2, 7)]), config)

        assert result.exhaustive
        assert result.metadata['group_size'] == 32
        assert 0 < result.p_value <= 1

    def test_large_group_falls_back(self, null_panel, simulated_graph):
        result = run_test(null_panel, simulated_graph, TestConfig(algorithm='vertical', B=15, exhaustive=True))

        assert not result.exhaustive
        assert result.B == 15
        assert any('falling back' in warning for warning in result.warnings)


class TestSingleVertical:
    def test_defaults_to_the_last_experiment(self, null_panel, simulated_graph):
        result = run_test(null_panel, simulated_graph, TestConfig(algorithm='single_vertical', B=25))

        assert result.metadata['pi'] == pytest.approx(0.5)
        assert result.B == 25

    def test_only_regression(self, null_panel, simulated_graph):
        with pytest.raises(ConfigError):
            run_test(null_panel, simulated_graph,
                     TestConfig(algorithm='single_vertical', statistic=StatisticSpec('corr_diff')))


class TestHorizontal:
    def test_matched_pairs(self, null_panel, simulated_graph):
        result = run_test(null_panel, simulated_graph, TestConfig(algorithm='horizontal', B=30, seed=7))

        assert result.statistic_kind == 'anova_f'
        assert result.matching is not None
        assert result.metadata['pairs'] == len(result.matching)
        assert not np.intersect1d(result.matching.treated, result.matching.control).size
        assert 1 / 31 <= result.p_value <= 1

    @pytest.mark.parametrize('kind', ['did', 'corr_diff', 'reg_coef'])
    def test_other_statistics(self, null_panel, simulated_graph, kind):
        config = TestConfig(algorithm='horizontal', B=20, matching='random', statistic=StatisticSpec(kind))
        result = run_test(null_panel, simulated_graph, config)

        assert result.matching.method == 'random'
        assert np.isfinite(result.t_observed)

    def test_did_runs_without_a_graph(self, null_panel):
        config = TestConfig(algorithm='horizontal', B=20, statistic=StatisticSpec('did'))
        result = run_test(null_panel, None, config)

        assert result.exposure_kind is None

    def test_time_effects_cancel(self, null_panel, simulated_graph):
        shifted = null_panel.with_outcomes(null_panel.Y + np.array([0.0, 5.0, -3.0]))
        config = TestConfig(algorithm='horizontal', B=30, seed=2)

        plain = run_test(null_panel, simulated_graph, config)
        moved = run_test(shifted, simulated_graph, config)

        assert moved.t_observed == pytest.approx(plain.t_observed, rel=1e-8)
        assert_allclose(moved.t_replicates, plain.t_replicates, rtol=1e-8)

    def test_same_seed_same_matching(self, null_panel, simulated_graph):
        config = TestConfig(algorithm='horizontal', B=10, seed=3, matching='random')

        assert run_test(null_panel, simulated_graph, config).matching.pairs == \
            run_test(null_panel, simulated_graph, config).matching.pairs

    def test_needs_both_sides(self):
        panel = make_panel([[0, 0]] * 5, np.zeros((5, 2)), pi=(0.2, 0.4))

        with pytest.raises(InfeasibleTestError):
            run_test(panel, None, TestConfig(algorithm='horizontal', statistic=StatisticSpec('did')))


class TestRepeat:
    def test_aggregated_p(self, null_panel, simulated_graph):
        repeated = repeat_test(null_panel, simulated_graph, TestConfig(algorithm='vertical', B=15), repeats=3)

        assert len(repeated.results) == 3
        assert len({result.seed for result in repeated.results}) == 3
        assert repeated.p_value == pytest.approx(min(1.0, 2 * np.mean([r.p_value for r in repeated.results])))

    def test_needs_one_repeat(self, null_panel, simulated_graph):
        with pytest.raises(ConfigError):
            repeat_test(null_panel, simulated_graph, TestConfig(algorithm='vertical'), repeats=0)


@pytest.mark.slow
class TestCalibration:
    def test_null_rejection_rate(self, simulated_graph):
        rejections = [
            run_test(simulated(simulated_graph, 0.0, seed=seed, rho=0.8), simulated_graph,
                     TestConfig(algorithm='vertical', B=99, seed=seed)).p_value <= 0.05
            for seed in range(200)
        ]

        assert np.mean(rejections) <= 0.05 + 3 * np.sqrt(0.05 * 0.95 / 200)
