# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Experiment configuration, the on-disk scene store and the experiment service.

This module holds the business logic behind the command line. It reads and
validates configuration files, keeps generated scenes on disk, and writes
result tables. It prints nothing; :mod:`patchSelect.interface` does that.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import pandas as pd
from configobj import ConfigObj, ConfigObjError, flatten_errors, get_extra_values
from joblib import Parallel, delayed
from validate import Validator

from .classifiers import ClassifierConfig, ClassifierName, save_model
from .core import (
	BScan,
	Dataset,
	GroundTruth,
	atomic_write,
	load_alarms,
	load_bscan,
	load_truth,
	save_alarms,
	save_bscan,
	save_truth,
)
from .errors import ConfigError, FormatError, IoError, OutputExistsError
from .evaluation import EXPERIMENTS, EvalSettings, ExperimentResult, sign_counts
from .keypoints import MsekParams
from .logHandler import log
from .strategy import PATCH_SELECT, parse_strategy
from .synth import (
	BenchmarkConfig,
	PrescreenerParams,
	SceneConfig,
	generate_benchmark_scenes,
	prescreen_dataset,
)
from .typings import SceneRow

CONFIG_SPEC = """
[scene]
time_samples = integer(min=50, default=342)
downtrack_samples = integer(min=18, default=800)
downtrack_spacing_m = float(min=0, default=0.05)
n_targets = integer(min=0, default=13)
n_clutter = integer(min=0, default=12)
noise_sigma = float(min=0, default=1.0)
attenuation_alpha = float(min=0, default=0.008)
hyperbola_spread = float(min=0, default=0.25)
wavelet_width = integer(min=1, default=12)
ground_bounce_time = integer(min=0, default=12)
ground_bounce_amplitude = float(default=20.0)
target_amplitude = float_list(min=2, max=2, default=list(6.0, 10.0))
clutter_amplitude = float_list(min=2, max=2, default=list(2.0, 6.0))
clutter_spread = float_list(min=2, max=2, default=list(0.1, 1.0))
depth_range = int_list(min=2, max=2, default=list(60, 280))
limb_taper = float(min=0, default=10.0)
edge_margin_m = float(min=0, default=2.0)

[prescreener]
threshold = float(default=4.0)
background_window = integer(min=1, default=60)
guard = integer(min=0, default=15)
min_separation_m = float(min=0, default=1.0)

[benchmark]
n_lanes = integer(min=1, default=8)
n_runs = integer(min=1, default=3)
halo_radius_m = float(min=0, default=0.25)

[msek]
smooth_window = integer(min=1, default=9)
max_keypoints = integer(min=1, default=4)
margin = integer(min=0, default=9)

[strategies]
use = string_list(min=1, default=list("1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11"))

[features]
use = string_list(min=1, default=list("raw", "hog", "ehd"))

[classifiers]
use = string_list(min=1, default=list("svm", "rf"))
	[[svm]]
	# 0 picks gamma from the training data
	gamma = float(min=0, default=0)
	c = float(min=0, default=1.0)
	tol = float(min=0, default=0.001)
	[[rf]]
	seed = integer(min=0, default=0)

[eval]
far2 = float(min=0, default=0.005)
far2_list = float_list(min=1, default=list(0.001, 0.0025, 0.005, 0.0075, 0.01))
cluster_distance_m = float(min=0, default=1.0)
n_folds = integer(min=2, default=4)
fold_seed = integer(min=0, default=0)
seeds = int_list(min=1, default=list(0, 1, 2, 3, 4, 5, 6, 7, 8, 9))
ds_stride = integer(min=1, default=4)
sweep_l = int_list(min=1, default=list(1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12))
sweep_k = int_list(min=1, default=list(1, 2, 3, 4))
sweep_feature = option("raw", "hog", "ehd", default="hog")
sweep_classifier = option("svm", "rf", default="rf")

[output]
dir = string(default="out")
jobs = integer(min=-1, default=1)
"""

# sections whose values decide what the scenes look like
SCENE_SECTIONS = ("scene", "prescreener", "benchmark")
# sections left out of the configuration hash
UNHASHED_SECTIONS = ("output",)

SCENES_DIR = "scenes"
SCENES_INDEX = "scenes.csv"
SCENE_COLUMNS: tuple[str, ...] = tuple(SceneRow.__annotations__)
RESULTS_FILE = "results.csv"
PER_SEED_FILE = "per_seed.csv"
RANKING_FILE = "ranking.csv"
SIGNS_FILE = "signs.csv"
SNAPSHOT_FILE = "config.ini"
MODELS_DIR = "models"


def _hash(values: Mapping[str, Any]) -> str:
	canonical = json.dumps(values, sort_keys=True, separators=(",", ":"))
	return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _plain(section: Mapping[str, Any]) -> dict[str, Any]:
	return {key: _plain(value) if isinstance(value, Mapping) else value for key, value in section.items()}


@dataclass(frozen=True)
class ExperimentConfig:
	"""A validated experiment configuration.

	:ivar values: Plain nested dictionary of every section, flags applied.
	:ivar source: File the configuration came from, empty for built-in defaults.
	"""

	values: Mapping[str, Any]
	source: str = ""

	def section(self, name: str) -> Mapping[str, Any]:
		return self.values[name]

	@property
	def configHash(self) -> str:
		"""Hash of every section except the output location and worker count."""
		return _hash({k: v for k, v in self.values.items() if k not in UNHASHED_SECTIONS})

	@property
	def sceneHash(self) -> str:
		return _hash({k: self.values[k] for k in SCENE_SECTIONS})

	@property
	def seeds(self) -> list[int]:
		return list(self.section("eval")["seeds"])

	@property
	def outputDir(self) -> str:
		return str(self.section("output")["dir"])

	@property
	def jobs(self) -> int:
		return int(self.section("output")["jobs"])

	@property
	def benchmark(self) -> BenchmarkConfig:
		scene = self.section("scene")
		pre = self.section("prescreener")
		bench = self.section("benchmark")
		return BenchmarkConfig(
			nLanes=bench["n_lanes"],
			nRuns=bench["n_runs"],
			haloRadius=bench["halo_radius_m"],
			scene=SceneConfig(
				timeSamples=scene["time_samples"],
				downtrackSamples=scene["downtrack_samples"],
				downtrackSpacing=scene["downtrack_spacing_m"],
				nTargets=scene["n_targets"],
				nClutter=scene["n_clutter"],
				noiseSigma=scene["noise_sigma"],
				attenuationAlpha=scene["attenuation_alpha"],
				hyperbolaSpread=scene["hyperbola_spread"],
				waveletWidth=scene["wavelet_width"],
				groundBounceTime=scene["ground_bounce_time"],
				groundBounceAmplitude=scene["ground_bounce_amplitude"],
				targetAmplitude=tuple(scene["target_amplitude"]),
				clutterAmplitude=tuple(scene["clutter_amplitude"]),
				clutterSpread=tuple(scene["clutter_spread"]),
				depthRange=tuple(scene["depth_range"]),
				limbTaper=scene["limb_taper"],
				edgeMargin=scene["edge_margin_m"],
			),
			prescreener=PrescreenerParams(
				threshold=pre["threshold"],
				backgroundWindow=pre["background_window"],
				guard=pre["guard"],
				minSeparation=pre["min_separation_m"],
			),
		)

	def _classifier(self, name: str) -> ClassifierConfig:
		section = self.section("classifiers")
		try:
			kind = ClassifierName(name.strip().lower())
		except ValueError:
			raise ConfigError(f"unknown classifier {name!r}") from None
		if kind is ClassifierName.SVM:
			svm = section["svm"]
			return ClassifierConfig(kind, gamma=svm["gamma"] or None, C=svm["c"], tol=svm["tol"])
		return ClassifierConfig(kind, seed=section["rf"]["seed"])

	def settings(self) -> EvalSettings:
		"""Evaluation settings with the configuration hash attached.

		:raises ConfigError: If a strategy, feature or classifier entry is invalid.
		"""
		ev = self.section("eval")
		msek = self.section("msek")
		settings = EvalSettings(
			msek=MsekParams(
				smoothWindow=msek["smooth_window"],
				maxKeypoints=msek["max_keypoints"],
				margin=msek["margin"],
			),
			clusterDistance=ev["cluster_distance_m"],
			nFolds=ev["n_folds"],
			foldSeed=ev["fold_seed"],
			far2=ev["far2"],
			far2List=tuple(ev["far2_list"]),
			features=tuple(name.strip().lower() for name in self.section("features")["use"]),
			classifiers=tuple(self._classifier(name) for name in self.section("classifiers")["use"]),
			strategies=tuple(parse_strategy(text) for text in self.section("strategies")["use"]),
			sweepL=tuple(ev["sweep_l"]),
			sweepK=tuple(ev["sweep_k"]),
			sweepFeature=ev["sweep_feature"],
			sweepClassifier=self._classifier(ev["sweep_classifier"]),
			dsStride=ev["ds_stride"],
			jobs=self.jobs,
			configHash=self.configHash,
		)
		settings.validate()
		return settings

	def to_ini(self) -> bytes:
		"""The configuration as an INI file that :func:`load_config` reads back."""
		out = ConfigObj()
		for name, section in self.values.items():
			out[name] = section
		out.initial_comment = [f"config_hash: {self.configHash}"]
		return ("\n".join(out.write()) + "\n").encode("utf-8")


def _validated(raw: ConfigObj, source: str) -> dict[str, Any]:
	result = raw.validate(Validator(), preserve_errors=True, copy=True)
	if result is not True:
		problems: list[str] = []
		for sections, key, error in flatten_errors(raw, result):
			where = ".".join([*sections, key or ""]).rstrip(".")
			problems.append(f"{where}: {error or 'missing'}")
		raise ConfigError(f"{source}: invalid configuration: {'; '.join(problems)}")
	extras = get_extra_values(raw)
	if extras:
		names = ", ".join(".".join([*sections, name]) for sections, name in extras)
		raise ConfigError(f"{source}: unknown configuration keys: {names}")
	return _plain(raw)


def load_config(
	path: str | os.PathLike[str] | None = None,
	out: str | None = None,
	seed: int | None = None,
	jobs: int | None = None,
) -> ExperimentConfig:
	"""Read and validate a configuration file, then apply command line overrides.

	:param path: INI file; ``None`` uses the built-in defaults.
	:param out: Replaces ``[output] dir``.
	:param seed: Replaces ``[eval] seeds`` with this one seed.
	:param jobs: Replaces ``[output] jobs``.
	:raises ConfigError: On a syntax error, an invalid value or an unknown key.
	:raises IoError: If the file cannot be read.
	"""
	source = os.fspath(path) if path is not None else "<defaults>"
	try:
		raw = ConfigObj(
			source if path is not None else [],
			configspec=CONFIG_SPEC.splitlines(),
			file_error=True,
			encoding="utf-8",
		)
	except ConfigObjError as e:
		raise ConfigError(f"{source}: {e}") from e
	except OSError as e:
		raise IoError(f"cannot read {source}: {e}") from e
	values = _validated(raw, source)
	if out is not None:
		values["output"]["dir"] = out
	if seed is not None:
		values["eval"]["seeds"] = [seed]
	if jobs is not None:
		values["output"]["jobs"] = jobs
	if values["output"]["jobs"] == 0:
		raise ConfigError(f"{source}: output.jobs must be positive, or negative to count back from all cores")
	config = ExperimentConfig(values=values, source=source)
	config.benchmark.validate()
	log.debug(f"loaded configuration {source} with hash {config.configHash}")
	return config


class SceneStore:
	"""Generated scenes, truth manifests and alarm lists under ``<out>/scenes``.

	Files of seed ``s`` live in ``seed_<s>/``: ``lane<l>_run<r>.gprb``,
	``lane<l>_truth.csv`` and ``lane<l>_run<r>_alarms.csv``. The index
	``scenes.csv`` lists every scan with the scene hash it was generated under.
	"""

	def __init__(self, outputDir: str | os.PathLike[str]) -> None:
		self.root = os.path.join(os.fspath(outputDir), SCENES_DIR)

	@property
	def indexPath(self) -> str:
		return os.path.join(self.root, SCENES_INDEX)

	def seedDir(self, seed: int) -> str:
		return os.path.join(self.root, f"seed_{seed}")

	def exists(self) -> bool:
		return os.path.exists(self.indexPath)

	def _makeDirs(self, path: str) -> None:
		try:
			os.makedirs(path, exist_ok=True)
		except OSError as e:
			raise IoError(f"cannot create {path}: {e}") from e

	def writeScenes(
		self,
		seed: int,
		scans: Mapping[tuple[int, int], BScan],
		truths: Mapping[int, GroundTruth],
		sceneHash: str,
	) -> list[SceneRow]:
		"""Write one seed's scans and truth manifests.

		:return: The index rows of the written scans.
		"""
		seedDir = self.seedDir(seed)
		self._makeDirs(seedDir)
		for laneId, truth in sorted(truths.items()):
			save_truth(truth, os.path.join(seedDir, f"lane{laneId}_truth.csv"))
		rows: list[SceneRow] = []
		for (laneId, runId), bscan in sorted(scans.items()):
			bscanFile = f"lane{laneId}_run{runId}.gprb"
			save_bscan(bscan, os.path.join(seedDir, bscanFile))
			rows.append(
				{
					"seed": seed,
					"lane_id": laneId,
					"run_id": runId,
					"bscan_file": f"seed_{seed}/{bscanFile}",
					"truth_file": f"seed_{seed}/lane{laneId}_truth.csv",
					"alarms_file": f"seed_{seed}/lane{laneId}_run{runId}_alarms.csv",
					"lane_area_m2": bscan.laneArea,
					"n_targets": len(truths[laneId].objects),
					"config_hash": sceneHash,
				}
			)
		return rows

	def writeIndex(self, rows: Sequence[SceneRow]) -> None:
		frame = pd.DataFrame(list(rows), columns=list(SCENE_COLUMNS))
		atomic_write(self.indexPath, frame.to_csv(index=False, lineterminator="\n").encode("utf-8"))

	def loadIndex(self) -> list[SceneRow]:
		"""Rows of ``scenes.csv``.

		:raises FormatError: If the index is missing columns or empty.
		:raises IoError: If it cannot be read.
		"""
		frame = _readFrame(self.indexPath, SCENE_COLUMNS)
		return frame.to_dict(orient="records")  # pyright: ignore[reportReturnType]

	def sceneHash(self) -> str:
		hashes = {str(row["config_hash"]) for row in self.loadIndex()}
		if len(hashes) != 1:
			raise FormatError(f"{self.indexPath}: scenes come from {len(hashes)} configurations")
		return hashes.pop()

	def writeAlarms(self, dataset: Dataset) -> int:
		"""Write the labeled alarms of every scan of a dataset; returns the alarm count."""
		rows = [row for row in self.loadIndex() if int(row["seed"]) == dataset.seed]
		for row in rows:
			key = (int(row["lane_id"]), int(row["run_id"]))
			alarms = [a for a in dataset.alarms if (a.laneId, a.runId) == key]
			save_alarms(alarms, os.path.join(self.root, str(row["alarms_file"])))
		return len(dataset.alarms)

	def loadScenes(self, seed: int) -> tuple[dict[tuple[int, int], BScan], dict[int, GroundTruth]]:
		rows = [row for row in self.loadIndex() if int(row["seed"]) == seed]
		if not rows:
			raise FormatError(f"{self.indexPath}: no scenes for seed {seed}")
		scans: dict[tuple[int, int], BScan] = {}
		truths: dict[int, GroundTruth] = {}
		for row in rows:
			laneId, runId = int(row["lane_id"]), int(row["run_id"])
			scans[(laneId, runId)] = load_bscan(os.path.join(self.root, str(row["bscan_file"])))
			if laneId not in truths:
				truths[laneId] = load_truth(os.path.join(self.root, str(row["truth_file"])))
		return scans, truths

	def loadDataset(self, seed: int, bench: BenchmarkConfig) -> Dataset:
		"""A stored seed as a dataset, prescreening scans whose alarm list is missing."""
		scans, truths = self.loadScenes(seed)
		rows = [row for row in self.loadIndex() if int(row["seed"]) == seed]
		alarmPaths = [os.path.join(self.root, str(row["alarms_file"])) for row in rows]
		if not all(os.path.exists(p) for p in alarmPaths):
			log.info(f"seed {seed}: alarm lists missing, prescreening stored scans")
			return prescreen_dataset(scans, truths, bench, seed)
		alarms = [alarm for p in alarmPaths for alarm in load_alarms(p)]
		alarms.sort(key=lambda a: (a.laneId, a.runId, a.downtrackIndex))
		try:
			return Dataset(scans=scans, truths=truths, alarms=tuple(alarms), seed=seed)
		except ValueError as e:
			raise FormatError(f"seed {seed}: stored alarms do not fit the stored scans: {e}") from e


def _readFrame(path: str | os.PathLike[str], required: Sequence[str]) -> pd.DataFrame:
	try:
		frame = pd.read_csv(path, comment="#")
	except OSError as e:
		raise IoError(f"cannot read {path}: {e}") from e
	except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
		raise FormatError(f"{path}: {e}") from e
	missing = [c for c in required if c not in frame.columns]
	if missing:
		raise FormatError(f"{path}: missing columns {', '.join(missing)}")
	if frame.empty:
		raise FormatError(f"{path}: no data rows")
	return frame


def _frameBytes(frame: pd.DataFrame) -> bytes:
	return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")


@dataclass
class GenerateSummary:
	seeds: list[int]
	scans: int
	targets: int


@dataclass
class RunSummary:
	experiment: str
	rows: int
	configHash: str
	paths: list[str] = field(default_factory=list)


@dataclass
class Report:
	"""Strategy rankings of one results file.

	:ivar rankings: One row per strategy and group with its ``rank`` (1 is best, ties share the lowest rank).
	:ivar averageRanks: Mean rank per strategy over the groups, best first.
	:ivar signs: Wins, ties and losses of the reference strategy per seed, when per-seed values are available.
	"""

	rankings: pd.DataFrame
	averageRanks: pd.Series
	configHash: str
	signs: pd.DataFrame | None = None
	paths: list[str] = field(default_factory=list)

	def text(self) -> str:
		lines = [f"config_hash {self.configHash}", ""]
		groupCols = [c for c in ("feature", "classifier", "far2") if c in self.rankings.columns]
		if groupCols:
			for key, group in self.rankings.groupby(groupCols, sort=True):
				label = "+".join(str(k) for k in (key if isinstance(key, tuple) else (key,)))
				lines.append(f"{label}:")
				for _, row in group.sort_values(["rank", "strategy"], kind="stable").iterrows():
					lines.append(f"  {int(row['rank']):>3}  {row['strategy']!s:<12} {row['pauc_mean']:.4f}")
		lines.append("")
		lines.append("average rank:")
		for strategy, value in self.averageRanks.items():
			lines.append(f"  {strategy!s:<12} {value:.2f}")
		if self.signs is not None and not self.signs.empty:
			lines.append("")
			lines.append("reference strategy per seed (wins/ties/losses):")
			for _, row in self.signs.iterrows():
				lines.append(
					f"  vs {row['strategy']!s:<6} {row['feature']}+{row['classifier']}: "
					f"{row['wins']}/{row['ties']}/{row['losses']}"
				)
		return "\n".join(lines)


REPORT_COLUMNS = ("strategy", "feature", "classifier", "pauc_mean", "config_hash")


def rank_results(table: pd.DataFrame) -> tuple[pd.DataFrame, pd.Series]:
	"""Rank strategies by mean pAUC within each feature, classifier and far2 group.

	Higher pAUC ranks better; equal values share the smallest rank.
	"""
	groupCols = [c for c in ("feature", "classifier", "far2") if c in table.columns]
	ranked = table.copy()
	ranked["rank"] = ranked.groupby(groupCols, sort=True)["pauc_mean"].rank(method="min", ascending=False)
	averageRanks = ranked.groupby("strategy", sort=True)["rank"].mean().sort_values(kind="stable")
	return ranked, averageRanks


class ExperimentService:
	"""Runs the command line operations for one configuration."""

	def __init__(self, config: ExperimentConfig) -> None:
		self.config = config
		self.store = SceneStore(config.outputDir)

	def _checkFree(self, paths: Sequence[str], force: bool) -> None:
		if force:
			return
		taken = [p for p in paths if os.path.exists(p)]
		if taken:
			raise OutputExistsError(f"{taken[0]} already exists; use --force to overwrite")

	def generate(self, force: bool = False) -> GenerateSummary:
		"""Write every configured seed's scans and truth manifests.

		:raises OutputExistsError: If scenes exist and ``force`` is not set.
		"""
		self._checkFree([self.store.indexPath], force)
		bench = self.config.benchmark
		seeds = self.config.seeds
		generated: list[tuple[dict[tuple[int, int], BScan], dict[int, GroundTruth]]] = Parallel(
			n_jobs=self.config.jobs
		)(delayed(generate_benchmark_scenes)(bench, seed) for seed in seeds)
		rows: list[SceneRow] = []
		targets = 0
		for seed, (scans, truths) in zip(seeds, generated):
			rows.extend(self.store.writeScenes(seed, scans, truths, self.config.sceneHash))
			targets += sum(len(t.objects) for t in truths.values())
		self.store.writeIndex(rows)
		log.info(f"generated {len(rows)} scans for seeds {seeds} under {self.store.root}")
		return GenerateSummary(seeds=seeds, scans=len(rows), targets=targets)

	def _checkSceneHash(self) -> None:
		stored = self.store.sceneHash()
		if stored != self.config.sceneHash:
			raise ConfigError(
				f"scenes in {self.store.root} were generated under hash {stored}, "
				f"the configuration has {self.config.sceneHash}; rerun generate with --force"
			)

	def prescreen(self, force: bool = False) -> dict[int, tuple[int, int]]:
		"""Prescreen and label stored scenes, writing alarm lists beside them.

		:return: Target and non-target alarm counts per seed.
		"""
		self._checkSceneHash()
		index = self.store.loadIndex()
		self._checkFree([os.path.join(self.store.root, str(row["alarms_file"])) for row in index], force)
		bench = self.config.benchmark
		counts: dict[int, tuple[int, int]] = {}
		for seed in sorted({int(row["seed"]) for row in index}):
			scans, truths = self.store.loadScenes(seed)
			dataset = prescreen_dataset(scans, truths, bench, seed)
			self.store.writeAlarms(dataset)
			counts[seed] = (dataset.nTargets, dataset.nNonTargets)
		return counts

	def datasets(self) -> list[Dataset] | None:
		"""Stored datasets of the configured seeds, or ``None`` when no scenes are stored."""
		if not self.store.exists():
			return None
		self._checkSceneHash()
		bench = self.config.benchmark
		datasets = [self.store.loadDataset(seed, bench) for seed in self.config.seeds]
		for dataset in datasets:
			_ = dataset.normalizedScans
		return datasets

	def run(self, experiment: str, svg: bool = False, force: bool = False) -> RunSummary:
		"""Run an experiment and write its tables under ``<out>/<experiment>/``.

		:raises ConfigError: If the experiment name is unknown.
		:raises OutputExistsError: If results exist and ``force`` is not set.
		"""
		if experiment not in EXPERIMENTS:
			raise ConfigError(f"unknown experiment {experiment!r}")
		settings = self.config.settings()
		expDir = os.path.join(self.config.outputDir, experiment)
		resultsPath = os.path.join(expDir, RESULTS_FILE)
		self._checkFree([resultsPath], force)
		datasets = self.datasets()
		if datasets is None:
			log.info("no stored scenes, generating the benchmark in memory")
		result: ExperimentResult = EXPERIMENTS[experiment](
			self.config.benchmark, self.config.seeds, settings=settings, datasets=datasets
		)
		try:
			os.makedirs(expDir, exist_ok=True)
		except OSError as e:
			raise IoError(f"cannot create {expDir}: {e}") from e
		paths = [resultsPath, os.path.join(expDir, PER_SEED_FILE), os.path.join(expDir, SNAPSHOT_FILE)]
		atomic_write(paths[0], _frameBytes(result.table))
		atomic_write(paths[1], _frameBytes(result.perSeed.assign(config_hash=self.config.configHash)))
		atomic_write(paths[2], self.config.to_ini())
		paths.extend(self._writeSingle(result, expDir))
		if svg:
			from .charts import render_experiment

			chartPath = os.path.join(expDir, f"{experiment}.svg")
			render_experiment(experiment, result.table, chartPath, self.config.configHash)
			paths.append(chartPath)
		log.info(f"{experiment} finished: {len(result.table)} rows in {resultsPath}")
		return RunSummary(
			experiment=experiment, rows=len(result.table), configHash=self.config.configHash, paths=paths
		)

	def _writeSingle(self, result: ExperimentResult, expDir: str) -> list[str]:
		paths: list[str] = []
		if result.models:
			modelsDir = os.path.join(self.config.outputDir, MODELS_DIR)
			try:
				os.makedirs(modelsDir, exist_ok=True)
			except OSError as e:
				raise IoError(f"cannot create {modelsDir}: {e}") from e
			for (seed, fold), model in sorted(result.models.items()):
				path = os.path.join(modelsDir, f"seed{seed}_fold{fold}.gprm")
				save_model(model, path)
				paths.append(path)
		for seed, alarms in sorted(result.scored.items()):
			path = os.path.join(expDir, f"alarms_seed{seed}.csv")
			save_alarms(alarms, path)
			paths.append(path)
		return paths


def report(resultsPath: str | os.PathLike[str], svg: bool = False) -> Report:
	"""Rank the strategies of a results file and write the ranking beside it.

	Per-seed values found next to the results add sign counts of the
	reference strategy (the PatchSelect strategy when present) against every
	other strategy.

	:raises FormatError: If the file is empty, lacks a required column or mixes configuration hashes.
	:raises IoError: If a file cannot be read or written.
	"""
	table = _readFrame(resultsPath, REPORT_COLUMNS)
	hashes = sorted({str(h) for h in table["config_hash"]})
	if len(hashes) != 1:
		raise FormatError(f"{resultsPath}: rows come from {len(hashes)} configurations ({', '.join(hashes)})")
	configHash = hashes[0]
	rankings, averageRanks = rank_results(table)
	outDir = os.path.dirname(os.fspath(resultsPath)) or "."
	paths = [os.path.join(outDir, RANKING_FILE)]
	atomic_write(paths[0], _frameBytes(rankings))

	signs: pd.DataFrame | None = None
	perSeedPath = os.path.join(outDir, PER_SEED_FILE)
	if os.path.exists(perSeedPath):
		perSeed = _readFrame(perSeedPath, ("config_hash",))
		if {str(h) for h in perSeed["config_hash"]} != {configHash}:
			raise FormatError(f"{perSeedPath}: configuration hash differs from {resultsPath}")
		reference = _referenceStrategy(table)
		hasColumns = {"strategy", "feature", "classifier", "seed", "pauc"} <= set(perSeed.columns)
		if reference is not None and hasColumns and perSeed["strategy"].nunique() > 1:
			signs = sign_counts(perSeed, reference).assign(config_hash=configHash)
			paths.append(os.path.join(outDir, SIGNS_FILE))
			atomic_write(paths[-1], _frameBytes(signs))
	if svg:
		from .charts import rank_chart

		paths.append(os.path.join(outDir, "ranking.svg"))
		rank_chart(averageRanks, paths[-1], configHash)
	return Report(
		rankings=rankings, averageRanks=averageRanks, configHash=configHash, signs=signs, paths=paths
	)


def _referenceStrategy(table: pd.DataFrame) -> int | None:
	if "strategy_name" in table.columns:
		matches = table.loc[table["strategy_name"] == PATCH_SELECT, "strategy"]
		if not matches.empty:
			return int(matches.iloc[0])
	return None
