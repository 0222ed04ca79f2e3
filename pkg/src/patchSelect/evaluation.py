# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Spatially clustered cross-validation, ROC/pAUC and the experiment sweeps.

Work units (one dataset seed, one training policy, one feature and one
classifier) run through a joblib pool; results come back in submission
order so tables are assembled deterministically.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .classifiers import ClassifierConfig, ClassifierName, Model, train_classifier
from .core import Alarm, Dataset, Label, derive_seed
from .errors import ConfigError, DegenerateLabels
from .features import get_featurizer
from .keypoints import MsekParams
from .logHandler import log
from .strategy import (
	AlarmStatistics,
	DownDepth,
	Ordering,
	Regular,
	Sampler,
	StrategySpec,
	TestPolicy,
	TopEnergy,
	TopL,
	TrainPolicy,
	alarm_statistics_batch,
	build_training_set,
	registry,
	score_statistics,
)
from .synth import BenchmarkConfig, build_benchmark
from .typings import RESULT_COLUMNS, ResultRow

DEFAULT_CLUSTER_DISTANCE_M = 1.0
DEFAULT_FAR2 = 0.005
DEFAULT_FAR2_LIST: tuple[float, ...] = (0.001, 0.0025, 0.005, 0.0075, 0.01)


@dataclass(frozen=True)
class FoldPlan:
	"""Cluster and fold assignment of every alarm.

	:ivar clusterOf: Cluster id per alarm id.
	:ivar foldOf: Fold per cluster id.
	"""

	clusterOf: Mapping[str, int]
	foldOf: Mapping[int, int]
	clusterDistance: float
	nFolds: int

	def foldOfAlarm(self, alarm: Alarm) -> int:
		return self.foldOf[self.clusterOf[alarm.alarmId]]


def cluster_and_fold(
	alarms: Iterable[Alarm],
	clusterDistance: float = DEFAULT_CLUSTER_DISTANCE_M,
	nFolds: int = 4,
	seed: int = 0,
) -> FoldPlan:
	"""Group nearby alarms and deal the groups out to folds.

	Alarms of one lane (any run) closer than ``clusterDistance`` meters are
	linked, transitively. Clusters are then visited largest first, ties in a
	seed-shuffled order, and each goes to the fold holding the fewest alarms
	so far (lowest fold on ties).

	:raises ConfigError: If the distance is not positive or fewer than two folds are asked for.
	"""
	if not clusterDistance > 0:
		raise ConfigError("cluster distance must be positive")
	if nFolds < 2:
		raise ConfigError("cross-validation needs at least two folds")
	byLane: dict[int, list[Alarm]] = {}
	for alarm in alarms:
		byLane.setdefault(alarm.laneId, []).append(alarm)

	clusterOf: dict[str, int] = {}
	sizes: list[int] = []
	for laneId in sorted(byLane):
		# in sorted order, linking neighbours is the same as linking every close pair
		ordered = sorted(byLane[laneId], key=lambda a: (a.downtrackPosition, a.runId, a.downtrackIndex))
		previous: float | None = None
		for alarm in ordered:
			if previous is None or alarm.downtrackPosition - previous > clusterDistance:
				sizes.append(0)
			clusterOf[alarm.alarmId] = len(sizes) - 1
			sizes[-1] += 1
			previous = alarm.downtrackPosition

	rng = np.random.default_rng(seed)
	shuffled = [int(c) for c in rng.permutation(len(sizes))]
	shuffled.sort(key=lambda c: -sizes[c])
	load = [0] * nFolds
	foldOf: dict[int, int] = {}
	for clusterId in shuffled:
		fold = min(range(nFolds), key=lambda f: (load[f], f))
		foldOf[clusterId] = fold
		load[fold] += sizes[clusterId]
	log.debug(f"{len(sizes)} clusters dealt into folds of sizes {load}")
	return FoldPlan(clusterOf=clusterOf, foldOf=foldOf, clusterDistance=clusterDistance, nFolds=nFolds)


@dataclass(frozen=True)
class RocCurve:
	"""Operating points ``(far per m², pd)``, one per distinct confidence."""

	points: tuple[tuple[float, float], ...]
	totalArea: float
	nTargets: int
	nNonTargets: int


def _isTarget(label: Label | bool | int) -> bool:
	if isinstance(label, Label):
		return label is Label.TARGET
	return bool(label > 0) if not isinstance(label, bool) else label


def roc(
	confidences: Sequence[float],
	labels: Sequence[Label | bool | int],
	totalArea: float,
) -> RocCurve:
	"""ROC with the false alarm rate expressed per square meter.

	The threshold steps through the distinct confidences from high to low;
	a group of equal confidences is crossed at once.

	:param labels: Target-ness per alarm, as labels, booleans or +1/-1.
	:raises DegenerateLabels: If either class is absent.
	"""
	if len(confidences) != len(labels):
		raise ValueError("confidences and labels must have equal lengths")
	if not totalArea > 0:
		raise ValueError("total area must be positive")
	scores = np.asarray(confidences, dtype=np.float64)
	isTarget = np.asarray([_isTarget(label) for label in labels], dtype=bool)
	nTargets = int(isTarget.sum())
	nNonTargets = int(isTarget.size - nTargets)
	if nTargets == 0 or nNonTargets == 0:
		raise DegenerateLabels("ROC needs both target and non-target alarms")
	order = np.argsort(-scores, kind="stable")
	sortedScores = scores[order]
	hits = np.cumsum(isTarget[order])
	falseAlarms = np.cumsum(~isTarget[order])
	# last index of each tie group
	groupEnds = np.nonzero(np.append(sortedScores[1:] != sortedScores[:-1], True))[0]
	points = tuple(
		(float(falseAlarms[i]) / totalArea, float(hits[i]) / nTargets) for i in groupEnds
	)
	return RocCurve(points=points, totalArea=totalArea, nTargets=nTargets, nNonTargets=nNonTargets)


def pauc(curve: RocCurve, far2: float) -> float:
	"""Area under the ROC over ``[0, far2]``, divided by ``far2``.

	Operating points are joined by straight lines starting from the origin,
	and the curve is held at its final detection rate beyond the last point.
	"""
	if not far2 > 0:
		raise ValueError("far2 must be positive")
	xs = [0.0] + [p[0] for p in curve.points]
	ys = [0.0] + [p[1] for p in curve.points]
	pieces: list[float] = []
	for x0, y0, x1, y1 in zip(xs, ys, xs[1:], ys[1:]):
		if x0 >= far2:
			break
		if x1 == x0:
			continue
		end = min(x1, far2)
		yEnd = y0 + (y1 - y0) * (end - x0) / (x1 - x0)
		pieces.append((end - x0) * (y0 + yEnd) / 2.0)
	if xs[-1] < far2:
		pieces.append((far2 - xs[-1]) * ys[-1])
	return math.fsum(pieces) / far2


@dataclass(frozen=True)
class EvalSettings:
	"""Everything an experiment needs beyond the benchmark itself."""

	msek: MsekParams = field(default_factory=MsekParams)
	clusterDistance: float = DEFAULT_CLUSTER_DISTANCE_M
	nFolds: int = 4
	foldSeed: int = 0
	far2: float = DEFAULT_FAR2
	far2List: tuple[float, ...] = DEFAULT_FAR2_LIST
	features: tuple[str, ...] = ("raw", "hog", "ehd")
	classifiers: tuple[ClassifierConfig, ...] = (
		ClassifierConfig(ClassifierName.SVM),
		ClassifierConfig(ClassifierName.RF),
	)
	strategies: tuple[StrategySpec, ...] = field(default_factory=lambda: tuple(registry()))
	sweepL: tuple[int, ...] = tuple(range(1, 13))
	sweepK: tuple[int, ...] = (1, 2, 3, 4)
	sweepFeature: str = "hog"
	sweepClassifier: ClassifierConfig = field(default_factory=lambda: ClassifierConfig(ClassifierName.RF))
	dsStride: int = 4
	jobs: int = 1
	configHash: str = ""

	def validate(self) -> None:
		if not self.strategies or not self.features or not self.classifiers:
			raise ConfigError("strategies, features and classifiers must be non-empty")
		if not self.far2 > 0 or any(not f > 0 for f in self.far2List):
			raise ConfigError("far2 values must be positive")
		if not self.sweepL or min(self.sweepL) < 1 or not self.sweepK or min(self.sweepK) < 1:
			raise ConfigError("sweep values of L and K must be at least 1")
		for name in (*self.features, self.sweepFeature):
			get_featurizer(name)


@dataclass(frozen=True, eq=False)
class CvStatistics:
	"""Out-of-fold decision statistics of every alarm of a dataset."""

	dataset: Dataset
	plan: FoldPlan
	statistics: tuple[AlarmStatistics, ...]
	folds: tuple[int, ...]

	def confidences(self, test: TestPolicy) -> list[float]:
		return [score_statistics(s, test) for s in self.statistics]


def _foldClassifier(cfg: ClassifierConfig, dataset: Dataset, fold: int) -> ClassifierConfig:
	return replace(cfg, seed=derive_seed(cfg.seed, dataset.seed, fold))


def cv_statistics(
	dataset: Dataset,
	train: TrainPolicy,
	featurizerName: str,
	classifierCfg: ClassifierConfig,
	plan: FoldPlan,
	msekParams: MsekParams,
	dsStride: int | None = 4,
	energyKeypoints: int | None = None,
	onModel: Callable[[int, Model], None] | None = None,
) -> CvStatistics:
	"""Train on every fold but one and score the held-out fold, for each fold.

	:param onModel: Called with each fold's trained model.
	:raises EmptyClass: If a training fold lacks targets or non-targets.
	"""
	featurizer = get_featurizer(featurizerName)
	scans = dataset.normalizedScans
	folds = [plan.foldOfAlarm(a) for a in dataset.alarms]
	byAlarm: dict[str, AlarmStatistics] = {}
	for fold in range(plan.nFolds):
		testAlarms = [a for a, f in zip(dataset.alarms, folds) if f == fold]
		if not testAlarms:
			continue
		trainAlarms = [a for a, f in zip(dataset.alarms, folds) if f != fold]
		ts = build_training_set(train, trainAlarms, scans, featurizer, msekParams, seed=dataset.seed)
		model = train_classifier(_foldClassifier(classifierCfg, dataset, fold), ts)
		if onModel is not None:
			onModel(fold, model)
		batch = alarm_statistics_batch(
			model, featurizer, scans, testAlarms, msekParams, dsStride, energyKeypoints
		)
		for stats in batch:
			byAlarm[stats.alarm.alarmId] = stats
		log.debug(
			f"seed {dataset.seed} fold {fold}: trained on {len(ts)} patches, scored {len(testAlarms)} alarms"
		)
	return CvStatistics(
		dataset=dataset,
		plan=plan,
		statistics=tuple(byAlarm[a.alarmId] for a in dataset.alarms),
		folds=tuple(folds),
	)


def _testNeeds(tests: Iterable[TestPolicy]) -> tuple[int | None, int | None]:
	dsStride: int | None = None
	energy = 0
	for test in tests:
		if test.ordering is Ordering.EN:
			assert isinstance(test.selector, TopL)
			energy = max(energy, test.selector.count)
		else:
			if dsStride is not None and dsStride != test.dsStride:
				raise ConfigError("test policies sharing a training run must share one stride")
			dsStride = test.dsStride
	return dsStride, (energy or None)


def run_cv(
	dataset: Dataset,
	spec: StrategySpec,
	featurizerName: str,
	classifierCfg: ClassifierConfig,
	plan: FoldPlan,
	msekParams: MsekParams | None = None,
	onModel: Callable[[int, Model], None] | None = None,
) -> list[Alarm]:
	"""Out-of-fold confidence for every alarm of a dataset under one strategy.

	:return: The dataset's alarms in order, with ``confidence`` and ``clusterId`` filled in.
	"""
	msekParams = msekParams or MsekParams()
	dsStride, energy = _testNeeds([spec.test])
	cv = cv_statistics(
		dataset, spec.train, featurizerName, classifierCfg, plan, msekParams, dsStride, energy, onModel
	)
	return [
		replace(alarm, confidence=confidence, clusterId=plan.clusterOf[alarm.alarmId])
		for alarm, confidence in zip(dataset.alarms, cv.confidences(spec.test))
	]


def curve_for(dataset: Dataset, confidences: Sequence[float]) -> RocCurve:
	return roc(confidences, [a.label for a in dataset.alarms], dataset.totalArea)


def fold_mean_pauc(cv: CvStatistics, confidences: Sequence[float], far2: float) -> float:
	"""Mean of per-fold pAUCs, each fold credited with an equal share of the area."""
	foldArea = cv.dataset.totalArea / cv.plan.nFolds
	values: list[float] = []
	for fold in range(cv.plan.nFolds):
		members = [i for i, f in enumerate(cv.folds) if f == fold]
		labels = [cv.dataset.alarms[i].label for i in members]
		if Label.TARGET not in labels or Label.NON_TARGET not in labels:
			continue
		values.append(pauc(roc([confidences[i] for i in members], labels, foldArea), far2))
	return float(np.mean(values)) if values else float("nan")


@dataclass(frozen=True)
class UnitResult:
	"""pAUCs of one work unit, keyed by test policy text then far2."""

	seed: int
	feature: str
	classifier: str
	trainKey: str
	pooled: dict[str, dict[float, float]]
	foldMean: dict[str, dict[float, float]]


def fold_plan(dataset: Dataset, settings: EvalSettings) -> FoldPlan:
	"""The fold plan every experiment uses for a dataset."""
	return cluster_and_fold(
		dataset.alarms,
		settings.clusterDistance,
		settings.nFolds,
		derive_seed(settings.foldSeed, dataset.seed),
	)


def _runUnit(
	dataset: Dataset,
	train: TrainPolicy,
	tests: Sequence[TestPolicy],
	featurizerName: str,
	classifierCfg: ClassifierConfig,
	settings: EvalSettings,
	far2s: Sequence[float],
	trainKey: str,
) -> UnitResult:
	plan = fold_plan(dataset, settings)
	dsStride, energy = _testNeeds(tests)
	cv = cv_statistics(dataset, train, featurizerName, classifierCfg, plan, settings.msek, dsStride, energy)
	pooled: dict[str, dict[float, float]] = {}
	foldMean: dict[str, dict[float, float]] = {}
	for test in tests:
		confidences = cv.confidences(test)
		curve = curve_for(dataset, confidences)
		pooled[test.text] = {far2: pauc(curve, far2) for far2 in far2s}
		foldMean[test.text] = {far2: fold_mean_pauc(cv, confidences, far2) for far2 in far2s}
	log.info(f"unit done: seed {dataset.seed} {trainKey} {featurizerName}+{classifierCfg.label}")
	return UnitResult(
		seed=dataset.seed,
		feature=featurizerName,
		classifier=classifierCfg.label,
		trainKey=trainKey,
		pooled=pooled,
		foldMean=foldMean,
	)


def build_datasets(bench: BenchmarkConfig, seeds: Sequence[int], jobs: int = 1) -> list[Dataset]:
	datasets: list[Dataset] = Parallel(n_jobs=jobs)(delayed(build_benchmark)(bench, seed) for seed in seeds)
	for dataset in datasets:
		# computed once here so workers receive it with the dataset
		_ = dataset.normalizedScans
	return datasets


def _trainKey(train: TrainPolicy) -> str:
	return f"tgt={train.effectiveTargetSampler.text} nt={train.nontargetSampler.text}"


@dataclass(frozen=True, eq=False)
class ExperimentResult:
	"""A result table plus the per-seed values it summarizes.

	Only the single-configuration run fills ``scored`` (alarms with
	out-of-fold confidences per seed) and ``models`` (keyed by seed and fold).
	"""

	table: pd.DataFrame
	perSeed: pd.DataFrame
	scored: Mapping[int, list[Alarm]] = field(default_factory=dict)
	models: Mapping[tuple[int, int], Model] = field(default_factory=dict)


def _row(**values: object) -> ResultRow:
	row = {column: "" for column in RESULT_COLUMNS}
	row.update(values)
	return row  # pyright: ignore[reportReturnType]


def _seedText(seeds: Sequence[int]) -> str:
	return ";".join(str(s) for s in seeds)


def _topL(spec: StrategySpec) -> int | str:
	selector = spec.test.selector
	return selector.count if isinstance(selector, TopL) else selector.text


def _nanMean(values: Iterable[float]) -> float:
	finite = [v for v in values if not math.isnan(v)]
	return float(np.mean(finite)) if finite else float("nan")


def _strategyUnits(
	datasets: Sequence[Dataset],
	settings: EvalSettings,
	far2s: Sequence[float],
) -> list[UnitResult]:
	"""Run every strategy under every feature and classifier.

	Strategies sharing a training policy share one training run per fold.
	"""
	groups: dict[str, tuple[TrainPolicy, list[TestPolicy]]] = {}
	for spec in settings.strategies:
		key = _trainKey(spec.train)
		train, tests = groups.setdefault(key, (spec.train, []))
		if spec.test not in tests:
			tests.append(spec.test)
	jobs = [
		delayed(_runUnit)(dataset, train, tests, feature, cfg, settings, far2s, key)
		for dataset in datasets
		for key, (train, tests) in groups.items()
		for feature in settings.features
		for cfg in settings.classifiers
	]
	return Parallel(n_jobs=settings.jobs)(jobs)


def _index(units: Sequence[UnitResult]) -> dict[tuple[int, str, str, str], UnitResult]:
	return {(u.seed, u.trainKey, u.feature, u.classifier): u for u in units}


def experiment_fig4(
	bench: BenchmarkConfig,
	seeds: Sequence[int],
	settings: EvalSettings | None = None,
	datasets: Sequence[Dataset] | None = None,
) -> ExperimentResult:
	"""Mean pAUC of every strategy under every feature and classifier.

	:return: One table row per (strategy, feature, classifier) cell.
	"""
	settings = settings or EvalSettings()
	settings.validate()
	datasets = list(datasets) if datasets is not None else build_datasets(bench, seeds, settings.jobs)
	units = _index(_strategyUnits(datasets, settings, [settings.far2]))
	rows: list[ResultRow] = []
	perSeed: list[dict[str, object]] = []
	seedList = [d.seed for d in datasets]
	for spec in settings.strategies:
		key = _trainKey(spec.train)
		for feature in settings.features:
			for cfg in settings.classifiers:
				cells = [units[(s, key, feature, cfg.label)] for s in seedList]
				pooled = [unit.pooled[spec.test.text][settings.far2] for unit in cells]
				foldMeans = [unit.foldMean[spec.test.text][settings.far2] for unit in cells]
				for s, value, foldValue in zip(seedList, pooled, foldMeans):
					perSeed.append(
						{
							"experiment": "fig4",
							"strategy": spec.index,
							"feature": feature,
							"classifier": cfg.label,
							"seed": s,
							"pauc": value,
							"pauc_fold_mean": foldValue,
						}
					)
				rows.append(
					_row(
						experiment="fig4",
						strategy=spec.index,
						strategy_name=spec.name,
						strategy_text=spec.text,
						feature=feature,
						classifier=cfg.label,
						nontarget_sampler=spec.train.nontargetSampler.text,
						ordering=spec.test.ordering.value,
						top_l=_topL(spec),
						target_k=spec.train.targetKeypoints,
						far2=settings.far2,
						pauc_mean=float(np.mean(pooled)),
						pauc_min=float(np.min(pooled)),
						pauc_max=float(np.max(pooled)),
						pauc_fold_mean=_nanMean(foldMeans),
						n_seeds=len(seedList),
						seeds=_seedText(seedList),
						config_hash=settings.configHash,
					)
				)
	return ExperimentResult(
		table=pd.DataFrame(rows, columns=list(RESULT_COLUMNS)), perSeed=pd.DataFrame(perSeed)
	)


def experiment_fig5(
	bench: BenchmarkConfig,
	seeds: Sequence[int],
	settings: EvalSettings | None = None,
	datasets: Sequence[Dataset] | None = None,
) -> ExperimentResult:
	"""Mean pAUC per strategy for each far2, averaged over feature and classifier pairs."""
	settings = settings or EvalSettings()
	settings.validate()
	datasets = list(datasets) if datasets is not None else build_datasets(bench, seeds, settings.jobs)
	far2s = sorted(settings.far2List)
	units = _index(_strategyUnits(datasets, settings, far2s))
	seedList = [d.seed for d in datasets]
	combos = [(f, c.label) for f in settings.features for c in settings.classifiers]
	rows: list[ResultRow] = []
	perSeed: list[dict[str, object]] = []
	for spec in settings.strategies:
		key = _trainKey(spec.train)
		for far2 in far2s:
			seedMeans = [
				float(np.mean([units[(s, key, f, c)].pooled[spec.test.text][far2] for f, c in combos]))
				for s in seedList
			]
			foldMeans = [
				_nanMean([units[(s, key, f, c)].foldMean[spec.test.text][far2] for f, c in combos])
				for s in seedList
			]
			for s, value in zip(seedList, seedMeans):
				perSeed.append(
					{"experiment": "fig5", "strategy": spec.index, "far2": far2, "seed": s, "pauc": value}
				)
			rows.append(
				_row(
					experiment="fig5",
					strategy=spec.index,
					strategy_name=spec.name,
					strategy_text=spec.text,
					feature="all",
					classifier="all",
					nontarget_sampler=spec.train.nontargetSampler.text,
					ordering=spec.test.ordering.value,
					target_k=spec.train.targetKeypoints,
					far2=far2,
					pauc_mean=float(np.mean(seedMeans)),
					pauc_min=float(np.min(seedMeans)),
					pauc_max=float(np.max(seedMeans)),
					pauc_fold_mean=_nanMean(foldMeans),
					n_seeds=len(seedList),
					seeds=_seedText(seedList),
					config_hash=settings.configHash,
				)
			)
	return ExperimentResult(
		table=pd.DataFrame(rows, columns=list(RESULT_COLUMNS)), perSeed=pd.DataFrame(perSeed)
	)


def sweep_samplers(k: int, names: Iterable[str]) -> list[Sampler]:
	"""Non-target samplers of the sweeps: ``energy`` follows K, the others are fixed."""
	choices: dict[str, Sampler] = {"energy": TopEnergy(k), "reg": Regular(5), "depth": DownDepth(4)}
	return [choices[name] for name in names]


def _samplerLabel(sampler: Sampler) -> str:
	return "energy" if isinstance(sampler, TopEnergy) else sampler.text


def sweep_frame(
	datasets: Sequence[Dataset],
	settings: EvalSettings,
	samplers: Sequence[str],
	orderings: Sequence[Ordering],
) -> pd.DataFrame:
	"""Per-seed pAUC over target K, non-target sampler, ordering and L.

	Each training policy is trained once per fold; every (ordering, L) test
	policy is scored from the same decision statistics.
	"""
	tests = [TestPolicy(o, TopL(L), settings.dsStride) for o in orderings for L in settings.sweepL]
	jobs = []
	for dataset in datasets:
		for k in settings.sweepK:
			for sampler in sweep_samplers(k, samplers):
				train = TrainPolicy(k, sampler)
				jobs.append(
					delayed(_runUnit)(
						dataset,
						train,
						tests,
						settings.sweepFeature,
						settings.sweepClassifier,
						settings,
						[settings.far2],
						f"{k}|{_samplerLabel(sampler)}",
					)
				)
	units: list[UnitResult] = Parallel(n_jobs=settings.jobs)(jobs)
	records: list[dict[str, object]] = []
	for unit in units:
		kText, samplerName = unit.trainKey.split("|")
		for test in tests:
			assert isinstance(test.selector, TopL)
			records.append(
				{
					"seed": unit.seed,
					"target_k": int(kText),
					"nontarget_sampler": samplerName,
					"ordering": test.ordering.value,
					"top_l": test.selector.count,
					"pauc": unit.pooled[test.text][settings.far2],
					"pauc_fold_mean": unit.foldMean[test.text][settings.far2],
				}
			)
	return pd.DataFrame(records)


def _sweepRows(
	experiment: str,
	frame: pd.DataFrame,
	groupBy: list[str],
	settings: EvalSettings,
	seedList: Sequence[int],
	spreadOverK: bool,
) -> list[ResultRow]:
	rows: list[ResultRow] = []
	# spread over K: average seeds within each K first, then take the range across K
	keys = [*groupBy, "target_k"] if spreadOverK else groupBy
	base = frame
	if spreadOverK:
		base = frame.groupby(keys, sort=True)[["pauc", "pauc_fold_mean"]].mean().reset_index()
	summary = base.groupby(groupBy, sort=True).agg(
		pauc_mean=("pauc", "mean"),
		pauc_min=("pauc", "min"),
		pauc_max=("pauc", "max"),
		pauc_fold_mean=("pauc_fold_mean", "mean"),
	)
	kText = "-".join(str(k) for k in settings.sweepK)
	for key, values in summary.iterrows():
		cell = dict(zip(groupBy, key if isinstance(key, tuple) else (key,)))
		rows.append(
			_row(
				experiment=experiment,
				strategy="sweep",
				feature=settings.sweepFeature,
				classifier=settings.sweepClassifier.label,
				nontarget_sampler=cell.get("nontarget_sampler", "depth4"),
				ordering=cell.get("ordering", Ordering.DS.value),
				top_l=int(cell["top_l"]),
				target_k=int(cell["target_k"]) if "target_k" in cell else kText,
				far2=settings.far2,
				pauc_mean=float(values["pauc_mean"]),
				pauc_min=float(values["pauc_min"]),
				pauc_max=float(values["pauc_max"]),
				pauc_fold_mean=float(values["pauc_fold_mean"]),
				n_seeds=len(seedList),
				seeds=_seedText(seedList),
				config_hash=settings.configHash,
			)
		)
	return rows


def _sweepExperiment(
	experiment: str,
	bench: BenchmarkConfig,
	seeds: Sequence[int],
	settings: EvalSettings | None,
	datasets: Sequence[Dataset] | None,
	samplers: Sequence[str],
	orderings: Sequence[Ordering],
	groupBy: list[str],
	spreadOverK: bool,
) -> ExperimentResult:
	settings = settings or EvalSettings()
	settings.validate()
	datasets = list(datasets) if datasets is not None else build_datasets(bench, seeds, settings.jobs)
	frame = sweep_frame(datasets, settings, samplers, orderings)
	seedList = [d.seed for d in datasets]
	rows = _sweepRows(experiment, frame, groupBy, settings, seedList, spreadOverK)
	perSeed = frame.assign(experiment=experiment)
	return ExperimentResult(table=pd.DataFrame(rows, columns=list(RESULT_COLUMNS)), perSeed=perSeed)


def experiment_fig6(
	bench: BenchmarkConfig,
	seeds: Sequence[int],
	settings: EvalSettings | None = None,
	datasets: Sequence[Dataset] | None = None,
) -> ExperimentResult:
	"""Energy versus decision-statistic ordering for each L.

	One panel per non-target training sampler: the top-K energy locations
	and 5 regularly spaced patches. Error bars span target K.
	"""
	return _sweepExperiment(
		"fig6",
		bench,
		seeds,
		settings,
		datasets,
		["energy", "reg"],
		[Ordering.EN, Ordering.DS],
		["nontarget_sampler", "ordering", "top_l"],
		True,
	)


def experiment_fig7(
	bench: BenchmarkConfig,
	seeds: Sequence[int],
	settings: EvalSettings | None = None,
	datasets: Sequence[Dataset] | None = None,
) -> ExperimentResult:
	"""Non-target training samplers compared for each L under DS ordering; error bars span target K."""
	return _sweepExperiment(
		"fig7",
		bench,
		seeds,
		settings,
		datasets,
		["energy", "reg", "depth"],
		[Ordering.DS],
		["nontarget_sampler", "top_l"],
		True,
	)


def experiment_fig8(
	bench: BenchmarkConfig,
	seeds: Sequence[int],
	settings: EvalSettings | None = None,
	datasets: Sequence[Dataset] | None = None,
) -> ExperimentResult:
	"""Target keypoint count K for each L, down-depth non-targets and DS ordering; spread over seeds."""
	return _sweepExperiment(
		"fig8", bench, seeds, settings, datasets, ["depth"], [Ordering.DS], ["target_k", "top_l"], False
	)


def _singleUnit(
	dataset: Dataset,
	spec: StrategySpec,
	featurizerName: str,
	classifierCfg: ClassifierConfig,
	settings: EvalSettings,
) -> tuple[list[Alarm], dict[int, Model], float, float]:
	plan = fold_plan(dataset, settings)
	models: dict[int, Model] = {}
	dsStride, energy = _testNeeds([spec.test])
	cv = cv_statistics(
		dataset,
		spec.train,
		featurizerName,
		classifierCfg,
		plan,
		settings.msek,
		dsStride,
		energy,
		models.__setitem__,
	)
	confidences = cv.confidences(spec.test)
	scored = [
		replace(alarm, confidence=confidence, clusterId=plan.clusterOf[alarm.alarmId])
		for alarm, confidence in zip(dataset.alarms, confidences)
	]
	pooled = pauc(curve_for(dataset, confidences), settings.far2)
	return scored, models, pooled, fold_mean_pauc(cv, confidences, settings.far2)


def experiment_single(
	bench: BenchmarkConfig,
	seeds: Sequence[int],
	settings: EvalSettings | None = None,
	datasets: Sequence[Dataset] | None = None,
) -> ExperimentResult:
	"""Cross-validate one configuration and keep its scored alarms and fold models.

	The configuration is the first configured strategy, feature and classifier.
	"""
	settings = settings or EvalSettings()
	settings.validate()
	datasets = list(datasets) if datasets is not None else build_datasets(bench, seeds, settings.jobs)
	spec, feature, cfg = settings.strategies[0], settings.features[0], settings.classifiers[0]
	outcomes: list[tuple[list[Alarm], dict[int, Model], float, float]] = Parallel(n_jobs=settings.jobs)(
		delayed(_singleUnit)(dataset, spec, feature, cfg, settings) for dataset in datasets
	)
	seedList = [d.seed for d in datasets]
	pooled = [outcome[2] for outcome in outcomes]
	foldMeans = [outcome[3] for outcome in outcomes]
	perSeed = [
		{
			"experiment": "single",
			"strategy": spec.index,
			"feature": feature,
			"classifier": cfg.label,
			"seed": s,
			"pauc": value,
			"pauc_fold_mean": foldValue,
		}
		for s, value, foldValue in zip(seedList, pooled, foldMeans)
	]
	row = _row(
		experiment="single",
		strategy=spec.index,
		strategy_name=spec.name,
		strategy_text=spec.text,
		feature=feature,
		classifier=cfg.label,
		nontarget_sampler=spec.train.nontargetSampler.text,
		ordering=spec.test.ordering.value,
		target_k=spec.train.targetKeypoints,
		far2=settings.far2,
		pauc_mean=float(np.mean(pooled)),
		pauc_min=float(np.min(pooled)),
		pauc_max=float(np.max(pooled)),
		pauc_fold_mean=_nanMean(foldMeans),
		n_seeds=len(seedList),
		seeds=_seedText(seedList),
		config_hash=settings.configHash,
	)
	log.info(f"single run of {spec.text} with {feature}+{cfg.label}: mean pAUC {row['pauc_mean']:.4f}")
	return ExperimentResult(
		table=pd.DataFrame([row], columns=list(RESULT_COLUMNS)),
		perSeed=pd.DataFrame(perSeed),
		scored={s: outcome[0] for s, outcome in zip(seedList, outcomes)},
		models={
			(s, fold): model for s, outcome in zip(seedList, outcomes) for fold, model in outcome[1].items()
		},
	)


def sign_counts(perSeed: pd.DataFrame, reference: int) -> pd.DataFrame:
	"""Per feature and classifier, how many seeds the reference strategy wins, ties and loses.

	:param perSeed: The per-seed frame of a fig4 result.
	:param reference: Strategy index compared against every other strategy.
	"""
	ref = perSeed[perSeed["strategy"] == reference].set_index(["feature", "classifier", "seed"])["pauc"]
	others = perSeed[perSeed["strategy"] != reference]
	records: list[dict[str, object]] = []
	groups = others.groupby(["strategy", "feature", "classifier"], sort=True)
	for (strategy, feature, classifier), group in groups:
		refValues = ref.loc[[(feature, classifier, s) for s in group["seed"]]].to_numpy()
		diff = refValues - group["pauc"].to_numpy()
		records.append(
			{
				"strategy": strategy,
				"feature": feature,
				"classifier": classifier,
				"wins": int(np.sum(diff > 0)),
				"ties": int(np.sum(diff == 0)),
				"losses": int(np.sum(diff < 0)),
			}
		)
	return pd.DataFrame(records, columns=["strategy", "feature", "classifier", "wins", "ties", "losses"])


EXPERIMENTS: dict[str, Callable[..., ExperimentResult]] = {
	"fig4": experiment_fig4,
	"fig5": experiment_fig5,
	"fig6": experiment_fig6,
	"fig7": experiment_fig7,
	"fig8": experiment_fig8,
	"single": experiment_single,
}
