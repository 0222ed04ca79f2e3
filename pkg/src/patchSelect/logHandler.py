# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Package logger.

Modules use ``from .logHandler import log``. Verbosity is taken from the
``PATCHSELECT_LOG`` environment variable unless given explicitly.
"""

from __future__ import annotations

import logging
import os
import sys

ENV_VAR = "PATCHSELECT_LOG"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s.%(module)s: %(message)s"

log = logging.getLogger("patchSelect")

_LEVEL_NAMES = {
	"debug": logging.DEBUG,
	"info": logging.INFO,
	"warning": logging.WARNING,
	"error": logging.ERROR,
}


def _resolveLevel(level: str | int | None) -> int:
	if level is None:
		level = os.environ.get(ENV_VAR, "warning")
	if isinstance(level, int):
		return level
	text = level.strip().lower()
	if text.isdigit():
		return int(text)
	return _LEVEL_NAMES.get(text, logging.WARNING)


def initialize(level: str | int | None = None) -> None:
	"""Attach a stderr handler to the package logger.

	Calling this more than once only updates the level.

	:param level: Level name or number; falls back to ``PATCHSELECT_LOG``.
	"""
	log.setLevel(_resolveLevel(level))
	if any(getattr(h, "_patchSelect", False) for h in log.handlers):
		return
	handler = logging.StreamHandler(sys.stderr)
	handler.setFormatter(logging.Formatter(LOG_FORMAT))
	setattr(handler, "_patchSelect", True)
	log.addHandler(handler)
