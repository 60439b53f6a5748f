"""
Declarative configuration: what to test (TestConfig and the exposure /
statistic specs it carries) and what to simulate (OutcomeModelConfig,
NetworkConfig, SweepConfig). Files are TOML or JSON with the same keys as
the dataclass fields
"""

import tomllib
from pathlib import Path
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple, Union

from .exceptions import ConfigError
from .typehints import ConfigDict
from .utils.jsonutils import load_json

ALGORITHMS = ('single_vertical', 'vertical', 'horizontal')
EXPOSURE_KINDS = ('numFrds', 'fracFrds', 'num2Frds', 'wAvgCpt', 'numCpt')
STATISTIC_KINDS = ('reg_coef', 'corr_diff', 'did', 'pairwise_corr_sum', 'anova_f')
MATCHING_METHODS = ('random', 'mahalanobis')
OUTCOME_FAMILIES = ('linear_general', 'nonlinear_general', 'linear_tfe', 'nonlinear_tfe')
NETWORK_KINDS = ('watts_strogatz', 'erdos_renyi', 'file')

DEFAULT_B = 200
FAST_B = 99


@dataclass
class ExposureSpec:
    kind: str = field(default='fracFrds')
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPOSURE_KINDS:
            raise ConfigError(f'unknown exposure kind {self.kind!r}, expected one of {EXPOSURE_KINDS}')


@dataclass
class StatisticSpec:
    kind: str = field(default='reg_coef')
    use_covariates: bool = field(default=True)
    use_neighbor_count: bool = field(default=True)
    # only the one-experiment regression has a non-constant W among focal units
    use_treatment: bool = field(default=True)

    def __post_init__(self):
        if self.kind not in STATISTIC_KINDS:
            raise ConfigError(f'unknown statistic kind {self.kind!r}, expected one of {STATISTIC_KINDS}')


def default_statistic(algorithm: str) -> StatisticSpec:
    if algorithm == 'horizontal':
        return StatisticSpec(kind='anova_f')

    return StatisticSpec(kind='reg_coef')


@dataclass
class TestConfig:
    __test__ = False  # keeps pytest from collecting this class

    algorithm: str = field(default='vertical')
    B: int = field(default=DEFAULT_B)
    exposure: ExposureSpec = field(default_factory=ExposureSpec)
    statistic: Optional[StatisticSpec] = field(default=None)
    matching: str = field(default='mahalanobis')
    caliper: bool = field(default=False)
    focal_target: Optional[int] = field(default=None)
    seed: int = field(default=0)
    exhaustive: bool = field(default=False)
    # 1-based experiment numbers; None means every experiment (the last one
    # for single_vertical)
    experiments: Optional[Tuple[int, ...]] = field(default=None)
    label: Optional[str] = field(default=None)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f'unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}')

        if self.B < 1:
            raise ConfigError(f'B must be at least 1, got {self.B}')

        if self.seed < 0:
            raise ConfigError(f'seed must be non-negative, got {self.seed}')

        if self.matching not in MATCHING_METHODS:
            raise ConfigError(f'unknown matching method {self.matching!r}, '
                              f'expected one of {MATCHING_METHODS}')

        if self.focal_target is not None and self.focal_target < 1:
            raise ConfigError(f'focal_target must be at least 1, got {self.focal_target}')

        if self.statistic is None:
            self.statistic = default_statistic(self.algorithm)

        if self.experiments is not None:
            self.experiments = tuple(int(experiment) for experiment in self.experiments)

            if not self.experiments or min(self.experiments) < 1:
                raise ConfigError(f'experiments are 1-based and non-empty, got {self.experiments}')

    @property
    def name(self) -> str:
        return self.label or self.algorithm


@dataclass
class OutcomeModelConfig:
    family: str = field(default='linear_general')
    signal_strength: float = field(default=0.0)
    common_variance_fraction: float = field(default=0.0)
    time_effects: Optional[Tuple[float, ...]] = field(default=None)

    def __post_init__(self):
        if self.family not in OUTCOME_FAMILIES:
            raise ConfigError(f'unknown outcome family {self.family!r}, expected one of {OUTCOME_FAMILIES}')

        if not 0 <= self.common_variance_fraction < 1:
            raise ConfigError('common_variance_fraction must lie in [0, 1), '
                              f'got {self.common_variance_fraction}')

        if self.time_effects is not None:
            self.time_effects = tuple(float(effect) for effect in self.time_effects)


@dataclass
class NetworkConfig:
    kind: str = field(default='watts_strogatz')
    n: int = field(default=800)
    # watts_strogatz: mean degree and rewiring probability
    k: int = field(default=20)
    beta: float = field(default=0.1)
    # erdos_renyi: edge probability
    p: float = field(default=0.05)
    path: Optional[str] = field(default=None)

    def __post_init__(self):
        if self.kind not in NETWORK_KINDS:
            raise ConfigError(f'unknown network kind {self.kind!r}, expected one of {NETWORK_KINDS}')

        if self.kind == 'file' and not self.path:
            raise ConfigError('network kind "file" needs a path')

        if self.kind != 'file' and self.n < 2:
            raise ConfigError(f'network size must be at least 2, got {self.n}')


@dataclass
class SweepConfig:
    signal_grid: Tuple[float, ...] = field(default=(0.0, 0.5, 1.0))
    variance_fractions: Tuple[float, ...] = field(default=(0.0, 0.8))
    replications: int = field(default=200)
    alpha: float = field(default=0.05)
    tests: List[TestConfig] = field(default_factory=list)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    pi: Tuple[float, ...] = field(default=(0.1, 0.25, 0.5))
    family: str = field(default='linear_general')
    time_effects: Optional[Tuple[float, ...]] = field(default=None)
    B: Optional[int] = field(default=None)

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError(f'replications must be at least 1, got {self.replications}')

        if not 0 < self.alpha < 1:
            raise ConfigError(f'alpha must lie in (0, 1), got {self.alpha}')

        if not self.tests:
            raise ConfigError('a sweep needs at least one test')

        if self.B is not None and self.B < 1:
            raise ConfigError(f'B must be at least 1, got {self.B}')

        self.signal_grid = tuple(float(signal) for signal in self.signal_grid)
        self.variance_fractions = tuple(float(rho) for rho in self.variance_fractions)
        self.pi = tuple(float(value) for value in self.pi)

        # validates family and every rho up front rather than mid-sweep
        for rho in self.variance_fractions:
            self.outcome_model(0.0, rho)

    def outcome_model(self, signal: float, rho: float) -> OutcomeModelConfig:
        return OutcomeModelConfig(
            family=self.family,
            signal_strength=signal,
            common_variance_fraction=rho,
            time_effects=self.time_effects
        )

    def test_configs(self) -> List[TestConfig]:
        if self.B is None:
            return list(self.tests)

        return [replace(test, B=self.B) for test in self.tests]


def load_config_file(path: Union[str, Path]) -> ConfigDict:
    path = Path(path)

    try:
        if path.suffix == '.toml':
            with open(path, 'rb') as toml_fd:
                return tomllib.load(toml_fd)

        return load_json(path)
    except (OSError, ValueError) as exc:
        # simdjson and tomllib both raise ValueError subclasses on bad input
        raise ConfigError(f'failed to read config {path}: {exc}', path=str(path))


def _build(cls, raw: ConfigDict, section: str):
    if not isinstance(raw, dict):
        raise ConfigError(f'{section} must be a table/object, got {type(raw).__name__}')

    known = {config_field.name for config_field in fields(cls)}
    unknown = set(raw) - known

    if unknown:
        raise ConfigError(f'unknown keys in {section}: {sorted(unknown)}')

    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f'malformed {section}: {exc}')


def exposure_from_dict(raw: Union[str, ConfigDict]) -> ExposureSpec:
    if isinstance(raw, str):
        return ExposureSpec(kind=raw)

    raw = dict(raw)
    kind = raw.pop('kind', 'fracFrds')

    return ExposureSpec(kind=kind, options=raw)


def statistic_from_dict(raw: Union[str, ConfigDict]) -> StatisticSpec:
    if isinstance(raw, str):
        return StatisticSpec(kind=raw)

    return _build(StatisticSpec, raw, 'statistic')


def test_config_from_dict(raw: ConfigDict, **overrides: Any) -> TestConfig:
    raw = dict(raw)

    if 'exposure' in raw:
        raw['exposure'] = exposure_from_dict(raw['exposure'])

    if 'statistic' in raw:
        raw['statistic'] = statistic_from_dict(raw['statistic'])

    # pi belongs to the panel, repeats to the runner
    raw.pop('pi', None)
    raw.pop('repeats', None)

    raw.update({key: value for key, value in overrides.items() if value is not None})

    return _build(TestConfig, raw, 'test config')


def sweep_config_from_dict(raw: ConfigDict, **overrides: Any) -> SweepConfig:
    raw = dict(raw)
    raw['tests'] = [test_config_from_dict(test) for test in raw.get('tests', [])]

    if 'network' in raw:
        raw['network'] = _build(NetworkConfig, raw['network'], 'network')

    raw.update({key: value for key, value in overrides.items() if value is not None})

    return _build(SweepConfig, raw, 'sweep config')
