# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Row layouts of the CSV files the package reads and writes."""

from __future__ import annotations

from typing import TypedDict


class TruthRow(TypedDict):
	object_id: int
	lane_id: int
	downtrack_position_m: float
	depth_time_index: int
	amplitude: float


class AlarmRow(TypedDict):
	lane_id: int
	run_id: int
	downtrack_index: int
	downtrack_position_m: float
	label: str
	truth_object_id: int | None
	confidence: float | None
	cluster_id: int | None


class SceneRow(TypedDict):
	seed: int
	lane_id: int
	run_id: int
	bscan_file: str
	truth_file: str
	alarms_file: str
	lane_area_m2: float
	n_targets: int
	config_hash: str


class ResultRow(TypedDict):
	"""One cell of an experiment table.

	Columns that do not apply to an experiment hold an empty string.
	"""

	experiment: str
	strategy: int | str
	strategy_name: str
	strategy_text: str
	feature: str
	classifier: str
	nontarget_sampler: str
	ordering: str
	top_l: int | str
	target_k: int | str
	far2: float
	pauc_mean: float
	pauc_min: float
	pauc_max: float
	pauc_fold_mean: float
	n_seeds: int
	seeds: str
	config_hash: str


RESULT_COLUMNS: tuple[str, ...] = tuple(ResultRow.__annotations__)
