# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

from __future__ import annotations

from .interface import main

if __name__ == "__main__":
	raise SystemExit(main())
