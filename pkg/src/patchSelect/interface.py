# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Command line front-end.

Parses arguments, hands the work to :mod:`patchSelect.service`, prints
summaries and maps errors to exit codes: 0 success, 1 unexpected failure,
2 usage, 3 configuration, 4 file format, 5 filesystem, 6 pipeline.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Callable, Sequence

from . import logHandler
from .errors import PatchSelectError
from .evaluation import EXPERIMENTS
from .logHandler import log
from .service import ExperimentService, load_config, report

EXIT_OK = 0
EXIT_UNEXPECTED = 1


def _service(args: argparse.Namespace) -> ExperimentService:
	config = load_config(
		args.config,
		out=args.out,
		seed=getattr(args, "seed", None),
		jobs=getattr(args, "jobs", None),
	)
	return ExperimentService(config)


def cmd_generate(args: argparse.Namespace) -> int:
	summary = _service(args).generate(force=args.force)
	print(f"generated {summary.scans} scans with {summary.targets} buried targets for seeds {summary.seeds}")
	return EXIT_OK


def cmd_prescreen(args: argparse.Namespace) -> int:
	counts = _service(args).prescreen(force=args.force)
	for seed, (targets, nonTargets) in counts.items():
		print(f"seed {seed}: {targets} target and {nonTargets} non-target alarms")
	return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
	summary = _service(args).run(args.experiment, svg=args.svg, force=args.force)
	print(f"{summary.experiment}: {summary.rows} rows, config_hash {summary.configHash}")
	for path in summary.paths:
		print(f"  {path}")
	return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
	result = report(args.results, svg=args.svg)
	print(result.text())
	return EXIT_OK


def _addConfigArgs(parser: argparse.ArgumentParser, seeds: bool = True) -> None:
	parser.add_argument(
		"--config", help="experiment configuration file (INI); built-in defaults when omitted"
	)
	parser.add_argument("--out", help="output directory, overrides [output] dir")
	parser.add_argument("--force", action="store_true", help="overwrite existing outputs")
	if seeds:
		parser.add_argument("--seed", type=int, help="run a single benchmark seed instead of [eval] seeds")
		parser.add_argument("--jobs", type=int, help="worker processes, overrides [output] jobs")


def build_parser() -> argparse.ArgumentParser:
	parser = argparse.ArgumentParser(
		prog="patchSelect",
		description="Keypoint utilization strategies for GPR buried threat detection.",
	)
	subparsers = parser.add_subparsers(dest="command", required=True)

	generate = subparsers.add_parser("generate", help="write synthetic B-scans and truth manifests")
	_addConfigArgs(generate)
	generate.set_defaults(func=cmd_generate)

	prescreen = subparsers.add_parser("prescreen", help="write labeled alarm lists for stored scenes")
	_addConfigArgs(prescreen, seeds=False)
	prescreen.set_defaults(func=cmd_prescreen)

	run = subparsers.add_parser("run", help="run an experiment and write its result tables")
	_addConfigArgs(run)
	run.add_argument("--experiment", required=True, choices=sorted(EXPERIMENTS))
	run.add_argument("--svg", action="store_true", help="also draw an SVG chart")
	run.set_defaults(func=cmd_run)

	rep = subparsers.add_parser("report", help="rank the strategies of a results file")
	rep.add_argument("results", help="results.csv written by run")
	rep.add_argument("--svg", action="store_true", help="also draw the average ranks as SVG")
	rep.set_defaults(func=cmd_report)
	return parser


def main(argv: Sequence[str] | None = None) -> int:
	"""Run one subcommand and return its exit code.

	Argument errors exit through argparse with code 2.
	"""
	logHandler.initialize()
	args = build_parser().parse_args(argv)
	func: Callable[[argparse.Namespace], int] = args.func
	try:
		return func(args)
	except PatchSelectError as e:
		log.debug(f"{args.command} failed", exc_info=True)
		print(f"error: {e}", file=sys.stderr)
		return e.exitCode
	except Exception:
		log.error(f"{args.command} failed unexpectedly", exc_info=True)
		return EXIT_UNEXPECTED
