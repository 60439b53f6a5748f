"""
Runner executes the batch commands: it reads the inputs, drives the tests or
the sweep, and writes the primary output plus a manifest next to it. The
primary outputs are canonical (sorted JSON keys, fixed float formats) so a
rerun with the same inputs, seed and version reproduces them byte for byte
"""

import logging
from pathlib import Path
from datetime import datetime, timezone
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

from . import __version__
from .entities import Matching, PanelDataset, RunManifest
from .exceptions import ConfigError, GraphError, ValidationError
from .graph.interference import InterferenceGraph, build_similarity_graph, graph_stats, read_edges_csv
from .panel import read_panel_csv, read_panel_files
from .permtests import EngineSettings, aggregate_pvalues, repeat_test, run_test
from .settings import load_config_file, sweep_config_from_dict, test_config_from_dict
from .simulator.sweep import SweepSettings, run_power_sweep, write_power_csv
from .typehints import ConfigDict, Logger
from .utils.digests import file_digest, text_digest
from .utils.jsonutils import dumps_json, load_json, write_json

PathLike = Union[str, Path]


@dataclass
class RunnerSettings:
    # None falls back to IFS_THREADS, 0 means every cpu
    threads: Optional[int] = field(default=None)
    emit_replicates: bool = field(default=False)
    emit_matching: bool = field(default=False)

    logger: Logger = field(default_factory=logging.getLogger)


@dataclass
class PanelInputs:
    panel: Optional[PathLike] = field(default=None)
    treatments: Optional[PathLike] = field(default=None)
    outcomes: Optional[PathLike] = field(default=None)
    covariates: Optional[PathLike] = field(default=None)

    def paths(self) -> Dict[str, PathLike]:
        named = {
            'panel': self.panel,
            'treatments': self.treatments,
            'outcomes': self.outcomes,
            'covariates': self.covariates,
        }

        return {name: path for name, path in named.items() if path is not None}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def manifest_path(output: PathLike) -> Path:
    output = Path(output)

    return output.with_name(output.name + '.manifest.json')


def effective_config_digest(effective: Dict[str, Any]) -> str:
    """
    Digest of the configuration a run actually used, after config-file
    values, flag overrides and defaults were merged
    """

    return text_digest(dumps_json(effective))


class Runner:
    def __init__(self, settings: RunnerSettings = None):
        self.settings = settings or RunnerSettings()
        self.logger = self.settings.logger

    # inputs

    def read_panel(self, inputs: PanelInputs, pi: Optional[Sequence[float]]) -> PanelDataset:
        if inputs.panel is not None:
            return read_panel_csv(inputs.panel, pi=pi, logger=self.logger)

        if inputs.treatments is None or inputs.outcomes is None:
            raise ValidationError('either --panel or both --treatments and --outcomes are required')

        return read_panel_files(inputs.treatments, inputs.outcomes, inputs.covariates, pi=pi, logger=self.logger)

    def read_graphs(self, edges: Sequence[PathLike], panel: PanelDataset,
                    similarity: Optional[ConfigDict]) -> List[InterferenceGraph]:
        graphs = [read_edges_csv(path, panel.unit_ids, logger=self.logger) for path in edges]

        if similarity is not None:
            if not isinstance(similarity, dict):
                raise ConfigError('similarity_graph must be a table/object')

            unknown = set(similarity) - {'similarity', 'epsilon'}

            if unknown:
                raise ConfigError(f'unknown keys in similarity_graph: {sorted(unknown)}')

            graphs.append(build_similarity_graph(panel.X, **similarity))

        return graphs

    def write_manifest(self, output: PathLike, command: str, config_digest: Optional[str],
                       inputs: Dict[str, PathLike], seed: Optional[int], started: str) -> None:
        manifest = RunManifest(
            command=command,
            config_digest=config_digest,
            input_digests={name: file_digest(path) for name, path in inputs.items()},
            master_seed=seed,
            tool_version=__version__,
            started=started,
            finished=_now()
        )
        write_json(manifest_path(output), manifest.to_dict())

    # commands

    def test(self,
             inputs: PanelInputs,
             output: PathLike,
             config_path: Optional[PathLike] = None,
             edges: Sequence[PathLike] = (),
             overrides: Optional[Dict[str, Any]] = None,
             repeats: Optional[int] = None,
             pi: Optional[Sequence[float]] = None,
             matching_output: Optional[PathLike] = None) -> Dict[str, Any]:
        started = _now()
        raw: ConfigDict = dict(load_config_file(config_path)) if config_path else {}
        pi = pi if pi is not None else raw.get('pi')
        repeats = repeats if repeats is not None else raw.get('repeats', 1)
        similarity = raw.pop('similarity_graph', None)
        config = test_config_from_dict(raw, **(overrides or {}))

        panel = self.read_panel(inputs, pi)
        graphs = self.read_graphs(edges, panel, similarity)
        engine = EngineSettings(workers=self.settings.threads, logger=self.logger)
        self.logger.info(f'running {config.name} on {panel.n} units with seed {config.seed}')

        if repeats == 1:
            result = run_test(panel, graphs, config, engine)
            rendered = result.to_dict(self.settings.emit_replicates)
            results = [result]
        else:
            repeated = repeat_test(panel, graphs, config, repeats, engine)
            rendered = repeated.to_dict(self.settings.emit_replicates)
            rendered.update(algorithm=config.algorithm, seed=config.seed)
            results = list(repeated.results)

        write_json(output, rendered)

        input_paths: Dict[str, PathLike] = dict(inputs.paths())

        if config_path:
            input_paths['config'] = config_path

        input_paths.update({f'edges[{index}]': path for index, path in enumerate(edges)})

        if self.settings.emit_matching:
            matching = results[0].matching

            if matching is None:
                self.logger.warning(f'{config.algorithm} test has no matching to emit')
            else:
                write_matching_csv(matching, panel, matching_output or Path(output).with_suffix('.matching.csv'))

        effective = {
            'test': asdict(config),
            'pi': panel.pi,
            'repeats': repeats,
            'similarity_graph': similarity,
        }
        self.write_manifest(output, 'test', effective_config_digest(effective), input_paths, config.seed, started)

        return rendered

    def simulate(self,
                 config_path: PathLike,
                 output_dir: PathLike,
                 seed: int = 0,
                 overrides: Optional[Dict[str, Any]] = None) -> pd.DataFrame:
        started = _now()
        sweep = sweep_config_from_dict(load_config_file(config_path), **(overrides or {}))
        table = run_power_sweep(sweep, seed, SweepSettings(workers=self.settings.threads, logger=self.logger))

        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        output = output_dir / 'power.csv'
        write_power_csv(table, output)

        inputs = {'config': config_path}

        if sweep.network.path is not None:
            inputs['network'] = sweep.network.path

        self.write_manifest(output, 'simulate', effective_config_digest(asdict(sweep)), inputs, seed, started)

        return table

    def aggregate(self, results: Sequence[PathLike], output: PathLike) -> Dict[str, Any]:
        started = _now()

        if not results:
            raise ValidationError('aggregate needs at least one result file')

        entries = [read_result_file(path) for path in results]
        algorithms = sorted({entry['algorithm'] for entry in entries})
        rendered = {
            'p_value': aggregate_pvalues([entry['p_value'] for entry in entries]),
            'inputs': entries,
            'algorithms': algorithms,
            'mixed_algorithms': len(algorithms) > 1,
        }

        write_json(output, rendered)
        self.write_manifest(output, 'aggregate', None,
                            {f'results[{index}]': path for index, path in enumerate(results)}, None, started)

        return rendered

    def graph_stats(self, edges: PathLike, output: Optional[PathLike] = None,
                    inputs: Optional[PanelInputs] = None, distances: bool = False) -> Dict[str, Any]:
        started = _now()

        if inputs is not None and inputs.paths():
            unit_ids = self.read_panel(inputs, None).unit_ids
        else:
            try:
                frame = pd.read_csv(edges, dtype={'src': str, 'dst': str}, usecols=['src', 'dst'])
            except (OSError, ValueError) as exc:
                raise GraphError(f'failed to read edges {edges}: {exc}', path=str(edges))

            unit_ids = sorted(set(frame['src']) | set(frame['dst']))

        rendered = graph_stats(read_edges_csv(edges, unit_ids, logger=self.logger), distances=distances)

        if output is not None:
            write_json(output, rendered)
            self.write_manifest(output, 'graph-stats', None, {'edges': edges}, None, started)

        return rendered


def read_result_file(path: PathLike) -> Dict[str, Any]:
    try:
        raw = load_json(path)
    except (OSError, ValueError) as exc:
        raise ValidationError(f'failed to read result {path}: {exc}', path=str(path))

    if not isinstance(raw, dict):
        raise ValidationError(f'{path}: a result must be a JSON object', path=str(path))

    p_value = raw.get('p_value')

    if isinstance(p_value, bool) or not isinstance(p_value, (int, float)) or not 0 < p_value <= 1:
        raise ValidationError(f'{path}: p_value must be a number in (0, 1], got {p_value!r}', path=str(path))

    return {
        'path': str(path),
        'digest': file_digest(path),
        'algorithm': str(raw.get('algorithm', 'unknown')),
        'p_value': float(p_value),
    }


def write_matching_csv(matching: Matching, panel: PanelDataset, path: PathLike) -> None:
    costs = [None] * len(matching) if matching.costs is None else matching.costs.tolist()
    frame = pd.DataFrame({
        'treated_id': [panel.unit_ids[index] for index in matching.treated],
        'control_id': [panel.unit_ids[index] for index in matching.control],
        'cost': costs,
    })
    frame.to_csv(path, index=False, float_format='%.10g', lineterminator='\n')
