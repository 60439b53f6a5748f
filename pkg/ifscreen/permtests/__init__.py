from dataclasses import replace
from typing import Dict, Optional, Type

from .base import EngineSettings, Graphs, PermutationTest
from .horizontal import HorizontalTest
from .pvalues import aggregate_pvalues, exact_pvalue, pvalue
from .vertical import SingleVerticalTest, VerticalTest
from ..entities import PanelDataset, PermutationTestResult, RepeatedTestResult
from ..exceptions import ConfigError
from ..settings import TestConfig
from ..utils.rng import derive_seed

TESTS: Dict[str, Type[PermutationTest]] = {
    test.algorithm: test for test in (SingleVerticalTest, VerticalTest, HorizontalTest)
}


def get_test(config: TestConfig, settings: Optional[EngineSettings] = None) -> PermutationTest:
    if config.algorithm not in TESTS:
        raise ConfigError(f'unknown algorithm {config.algorithm!r}')

    return TESTS[config.algorithm](config, settings)


def run_test(panel: PanelDataset,
             graphs: Graphs,
             config: TestConfig,
             settings: Optional[EngineSettings] = None) -> PermutationTestResult:
    return get_test(config, settings).run(panel, graphs)


def repeat_test(panel: PanelDataset,
                graphs: Graphs,
                config: TestConfig,
                repeats: int,
                settings: Optional[EngineSettings] = None) -> RepeatedTestResult:
    """
    Runs the test under `repeats` independent split / matching / replicate
    seeds and combines the p-values with aggregate_pvalues()
    """

    if repeats < 1:
        raise ConfigError(f'repeats must be at least 1, got {repeats}')

    results = tuple(
        run_test(panel, graphs, replace(config, seed=derive_seed(config.seed, 'repeat', repeat)), settings)
        for repeat in range(repeats)
    )

    return RepeatedTestResult(results=results, p_value=aggregate_pvalues([result.p_value for result in results]))
