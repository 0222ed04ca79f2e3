# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Exception hierarchy shared by every stage of the pipeline.

Each error class carries the process exit code the command line front-end
reports when the error escapes a subcommand.
"""

from __future__ import annotations


class PatchSelectError(Exception):
	"""Base class for all domain errors."""

	exitCode: int = 6


class ConfigError(PatchSelectError):
	"""A configuration value violates its documented invariant."""

	exitCode = 3


class FormatError(PatchSelectError):
	"""A file does not follow the documented binary or CSV layout."""

	exitCode = 4


class IoError(PatchSelectError):
	"""Filesystem failure while reading or writing an artifact."""

	exitCode = 5


class OutputExistsError(IoError):
	"""Refusing to overwrite existing outputs without ``--force``."""


class MarginViolation(PatchSelectError):
	"""A patch window would extend beyond the B-scan grid."""


class RangeError(PatchSelectError):
	"""A sampler cannot produce the requested number of indices."""


class DegenerateData(PatchSelectError):
	"""Training data lacks one of the two classes."""


class EmptyClass(DegenerateData):
	"""A training policy produced no patches for one class."""


class DegenerateLabels(PatchSelectError):
	"""ROC computation needs both targets and non-targets."""


class KindMismatch(PatchSelectError):
	"""Feature kind does not match what the model was trained on."""


class EmptyInput(PatchSelectError):
	"""An aggregation or scoring step received nothing to work on."""
