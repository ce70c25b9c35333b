#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# Fibrosis-Risk-Toolkit
# Copyright (C) 2026  Fibrosis-Risk-Toolkit contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""Create the command line."""
import argparse
import logging
import sys

from core import __version__
from core.config import load_config
from core.errors import FibrosisError, UsageError
from ui.commands import COMMANDS

log = logging.getLogger(__name__)


class Parser(argparse.ArgumentParser):
    """ArgumentParser raising UsageError instead of exiting."""

    def error(self, message):
        """Report a usage error."""
        raise UsageError(message)


def build_parser():
    """Global flags plus one subparser per command."""
    parser = Parser(prog='fibrosis-risk',
                    description='Radiomics and CNN fibrosis prediction on synthetic phantoms')
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('--config', help='YAML run configuration')
    parser.add_argument('--seed', type=int, help='master seed')
    parser.add_argument('--out', help='run directory')
    parser.add_argument('--jobs', type=int, help='worker processes')
    parser.add_argument('--resume', action='store_true', help='keep finished work')
    parser.add_argument('--force', action='store_true', help='overwrite existing output')
    parser.add_argument('--log-level', default='INFO',
                        choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))
    sub = parser.add_subparsers(dest='command', parser_class=Parser)
    sub.required = True

    phantom = sub.add_parser('phantom', help='generate the phantom cohort')
    phantom.add_argument('--n', type=int, help='number of cases')
    phantom.add_argument('--prevalence', type=float, help='fraction of positive cases')

    extract = sub.add_parser('extract', help='extract radiomic features')
    extract.add_argument('--manifest', help='cohort manifest (default <out>/cohort)')

    radiomics = sub.add_parser('train-radiomics', help='train the classical models')
    radiomics.add_argument('--features', help='feature CSV (default <out>/features.csv)')

    cnn = sub.add_parser('train-cnn', help='train the network presets')
    cnn.add_argument('--manifest', help='cohort manifest (default <out>/cohort)')
    cnn.add_argument('--presets', nargs='+', help='presets to train')
    cnn.add_argument('--cv', action='store_true', help='also run k-fold cross-validation')

    cam = sub.add_parser('gradcam', help='Grad-CAM heatmaps of one case')
    cam.add_argument('--checkpoint', required=True, help='checkpoint file')
    cam.add_argument('--case', required=True, help='case id')
    cam.add_argument('--manifest', help='cohort manifest (default <out>/cohort)')

    sub.add_parser('evaluate', help='summarise the reports of a run')
    return parser


def overrides(args):
    """Config values given on the command line."""
    values = {key: getattr(args, key) for key in ('seed', 'out', 'jobs')
              if getattr(args, key) is not None}
    phantom = {key: getattr(args, key) for key in ('n', 'prevalence')
               if getattr(args, key, None) is not None}
    if phantom:
        values['phantom'] = phantom
    if getattr(args, 'presets', None):
        values['cnn'] = {'presets': list(args.presets)}
    return values


def main(argv=None):
    """Run one subcommand and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=args.log_level,
                            format='%(asctime)s %(levelname)s %(name)s: %(message)s')
        config = load_config(args.config, overrides(args))
        log.debug('Running %s', args.command)
        return COMMANDS[args.command](config, args)
    except FibrosisError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return exc.exit_code


if __name__ == '__main__':
    sys.exit(main())
