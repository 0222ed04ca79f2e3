# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Keypoint utilization strategies for GPR buried threat detection.

Synthetic B-scans and an energy prescreener produce alarms; keypoints chosen
on each alarm's A-scan yield patches for training and testing a patch
classifier; a utilization strategy turns the patch decisions into one
confidence per alarm, scored by spatially clustered cross-validation.
"""

from __future__ import annotations

from .classifiers import ClassifierConfig, ClassifierName, predict, train_classifier
from .core import Alarm, BScan, Dataset, GroundTruth, Label, Patch
from .errors import PatchSelectError
from .evaluation import EXPERIMENTS, cluster_and_fold, pauc, roc, run_cv
from .features import get_featurizer
from .keypoints import MsekParams, msek
from .strategy import StrategySpec, registry
from .synth import BenchmarkConfig, SceneConfig, build_benchmark, generate_scene

__all__ = [
	"EXPERIMENTS",
	"Alarm",
	"BScan",
	"BenchmarkConfig",
	"ClassifierConfig",
	"ClassifierName",
	"Dataset",
	"GroundTruth",
	"Label",
	"MsekParams",
	"Patch",
	"PatchSelectError",
	"SceneConfig",
	"StrategySpec",
	"build_benchmark",
	"cluster_and_fold",
	"generate_scene",
	"get_featurizer",
	"msek",
	"pauc",
	"predict",
	"registry",
	"roc",
	"run_cv",
	"train_classifier",
]
