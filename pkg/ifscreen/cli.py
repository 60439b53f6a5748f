"""
Command-line entry point.

    ifscreen test --panel panel.csv --edges edges.csv --config run.toml --output result.json
    ifscreen simulate --config repro/figure_vertical.toml --output-dir out/
    ifscreen aggregate result1.json result2.json --output aggregate.json
    ifscreen graph-stats --edges edges.csv [--distances]

Exit codes: 0 success, 2 invalid input, 3 infeasible test, 4 internal error.
Failures are reported as a JSON object on stderr
"""

import sys
import logging
import argparse
from typing import Any, Dict, List, Optional

from . import __version__
from .exceptions import IfscreenError
from .runner import PanelInputs, Runner, RunnerSettings
from .settings import (ALGORITHMS, EXPOSURE_KINDS, FAST_B, STATISTIC_KINDS, exposure_from_dict,
                       statistic_from_dict)
from .utils.jsonutils import dumps_json

EXIT_OK = 0
EXIT_INTERNAL = IfscreenError.exit_code


def _add_panel_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--panel', help='panel.csv with unit_id,w1..wK,y1..yK,x1..xd')
    parser.add_argument('--treatments', help='treatments.csv (unit_id,w1..wK)')
    parser.add_argument('--outcomes', help='outcomes.csv (unit_id,y1..yK)')
    parser.add_argument('--covariates', help='covariates.csv (unit_id,x1..xd)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='ifscreen', description='interference screening for '
                                                                  'sequences of randomized experiments')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--log-level', default='WARNING',
                        choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))
    parser.add_argument('--threads', type=int, default=None,
                        help='worker processes, 0 for every cpu (default: $IFS_THREADS or every cpu)')
    commands = parser.add_subparsers(dest='command', required=True)

    test = commands.add_parser('test', help='run a permutation test on a panel')
    _add_panel_arguments(test)
    test.add_argument('--edges', action='append', default=[],
                      help='edges.csv (src,dst[,weight]); repeat for several graphs')
    test.add_argument('--config', help='run config (TOML or JSON)')
    test.add_argument('--algorithm', choices=ALGORITHMS)
    test.add_argument('--statistic', choices=STATISTIC_KINDS)
    test.add_argument('--exposure', choices=EXPOSURE_KINDS)
    test.add_argument('--seed', type=int)
    test.add_argument('--b', type=int, dest='B', help='replicate count')
    test.add_argument('--fast', action='store_true', help=f'use B = {FAST_B} unless --b is given')
    test.add_argument('--pi', type=float, nargs='+', help='marginal treatment probabilities')
    test.add_argument('--repeats', type=int, help='rerun with independent seeds and aggregate')
    test.add_argument('--exhaustive', action='store_true', default=None,
                      help='enumerate the whole permutation group when it is small')
    test.add_argument('--emit-replicates', action='store_true')
    test.add_argument('--emit-matching', action='store_true')
    test.add_argument('--matching-output', help='matching CSV path (default: <output>.matching.csv)')
    test.add_argument('--output', default='result.json')

    simulate = commands.add_parser('simulate', help='run a power sweep')
    simulate.add_argument('--config', required=True, help='sweep config (TOML or JSON)')
    simulate.add_argument('--seed', type=int, default=0)
    simulate.add_argument('--b', type=int, dest='B')
    simulate.add_argument('--fast', action='store_true', help=f'use B = {FAST_B} unless --b is given')
    simulate.add_argument('--alpha', type=float)
    simulate.add_argument('--replications', type=int)
    simulate.add_argument('--output-dir', default='.')

    aggregate = commands.add_parser('aggregate', help='combine p-values of several results')
    aggregate.add_argument('results', nargs='+')
    aggregate.add_argument('--output', default='aggregate.json')

    stats = commands.add_parser('graph-stats', help='summarize an interference graph')
    _add_panel_arguments(stats)
    stats.add_argument('--edges', required=True)
    stats.add_argument('--distances', action='store_true', help='also report diameter and mean distance')
    stats.add_argument('--output')

    return parser


def replicate_count(args: argparse.Namespace) -> Optional[int]:
    if args.B is None and args.fast:
        return FAST_B

    return args.B


def _test_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        'algorithm': args.algorithm,
        'seed': args.seed,
        'B': replicate_count(args),
        'exhaustive': args.exhaustive,
    }

    if args.statistic is not None:
        overrides['statistic'] = statistic_from_dict(args.statistic)

    if args.exposure is not None:
        overrides['exposure'] = exposure_from_dict(args.exposure)

    return overrides


def _dispatch(args: argparse.Namespace, runner: Runner) -> None:
    if args.command == 'test':
        runner.test(
            inputs=PanelInputs(args.panel, args.treatments, args.outcomes, args.covariates),
            output=args.output,
            config_path=args.config,
            edges=args.edges,
            overrides=_test_overrides(args),
            repeats=args.repeats,
            pi=args.pi,
            matching_output=args.matching_output
        )
    elif args.command == 'simulate':
        runner.simulate(
            config_path=args.config,
            output_dir=args.output_dir,
            seed=args.seed,
            overrides={'B': replicate_count(args), 'alpha': args.alpha, 'replications': args.replications}
        )
    elif args.command == 'aggregate':
        runner.aggregate(args.results, args.output)
    else:
        rendered = runner.graph_stats(
            edges=args.edges,
            output=args.output,
            inputs=PanelInputs(args.panel, args.treatments, args.outcomes, args.covariates),
            distances=args.distances
        )

        if args.output is None:
            sys.stdout.write(dumps_json(rendered))


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    logger = logging.getLogger('ifscreen')

    settings = RunnerSettings(
        threads=args.threads,
        emit_replicates=getattr(args, 'emit_replicates', False),
        emit_matching=getattr(args, 'emit_matching', False),
        logger=logger
    )

    try:
        _dispatch(args, Runner(settings))
    except IfscreenError as exc:
        logger.debug(f'{args.command} failed: {exc.msg}')
        sys.stderr.write(dumps_json(exc.to_dict()))
        return exc.exit_code
    except Exception as exc:
        logger.exception(f'internal error in {args.command}')
        sys.stderr.write(dumps_json({
            'error': type(exc).__name__,
            'description': IfscreenError.description,
            'message': str(exc),
            'details': {},
        }))
        return EXIT_INTERNAL

    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
