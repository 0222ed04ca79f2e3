# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from patchSelect.classifiers import ClassifierConfig, ClassifierName, Model, predict, train_classifier
from patchSelect.core import Alarm, Dataset, Keypoint, extract_patch
from patchSelect.errors import ConfigError, EmptyClass, EmptyInput, KindMismatch
from patchSelect.evaluation import roc
from patchSelect.features import get_featurizer
from patchSelect.keypoints import MsekParams, msek, sample_down_depth
from patchSelect.strategy import (
	AlarmStatistics,
	AllStatistics,
	DownDepth,
	Ordering,
	Random,
	Regular,
	SlidingSum,
	StrategySpec,
	TestPolicy,
	TopEnergy,
	TopL,
	TrainPolicy,
	aggregate,
	build_training_set,
	parse_sampler,
	parse_strategy,
	registry,
	score_alarm,
	score_statistics,
	sliding_sum,
	strategy_by_index,
)

DS, EN = Ordering.DS, Ordering.EN

REGISTRY_ROWS = [
	(1, TrainPolicy(3, TopEnergy(3)), TestPolicy(DS, TopL(3))),
	(2, TrainPolicy(2, TopEnergy(2)), TestPolicy(EN, TopL(2))),
	(3, TrainPolicy(1, Regular(5)), TestPolicy(DS, TopL(3))),
	(4, TrainPolicy(1, Random(5)), TestPolicy(DS, AllStatistics())),
	(5, TrainPolicy(1, TopEnergy(1)), TestPolicy(DS, TopL(12))),
	(6, TrainPolicy(1, TopEnergy(1)), TestPolicy(DS, TopL(1))),
	(7, TrainPolicy(5, Random(5), targetSampler=Regular(5)), TestPolicy(DS, AllStatistics())),
	(8, TrainPolicy(3, TopEnergy(3)), TestPolicy(EN, TopL(1))),
	(9, TrainPolicy(1, TopEnergy(1)), TestPolicy(DS, SlidingSum(7))),
	(10, TrainPolicy(1, TopEnergy(1)), TestPolicy(EN, TopL(1))),
	(11, TrainPolicy(4, DownDepth(4)), TestPolicy(DS, TopL(12))),
]


@pytest.mark.parametrize(("index", "train", "test"), REGISTRY_ROWS)
def test_registry_rows(index: int, train: TrainPolicy, test: TestPolicy):
	spec = strategy_by_index(index)
	assert spec.index == index
	assert spec.train == train
	assert spec.test == test


def test_registry_has_one_patch_select():
	specs = registry()
	assert [s.index for s in specs] == list(range(1, 12))
	assert [s.index for s in specs if s.isPatchSelect] == [11]
	assert specs[6].train.effectiveTargetSampler == Regular(5)


@pytest.mark.parametrize("spec", registry(), ids=lambda s: s.name)
def test_strategy_text_round_trip(spec: StrategySpec):
	assert parse_strategy(spec.text) == spec


def test_parse_errors():
	with pytest.raises(ConfigError):
		parse_strategy("banana")
	with pytest.raises(ConfigError):
		strategy_by_index(12)
	with pytest.raises(ConfigError):
		parse_sampler("energy")
	assert parse_sampler("rand5~3") == Random(5, 3)
	assert parse_strategy(" 6 ") == strategy_by_index(6)


def test_energy_ordering_needs_top_l():
	with pytest.raises(ConfigError):
		TestPolicy(EN, AllStatistics())
	with pytest.raises(ConfigError):
		TestPolicy(DS, TopL(0))
	with pytest.raises(ConfigError):
		TrainPolicy(1, DownDepth(0))


@pytest.mark.parametrize(("L", "expected"), [(1, 0.9), (2, 1.4), (3, 1.6), (10, 1.6)])
def test_aggregate_examples(L: int, expected: float):
	assert aggregate([0.2, 0.9, 0.5], L) == pytest.approx(expected)


def test_aggregate_rejects_empty_and_bad_l():
	with pytest.raises(EmptyInput):
		aggregate([], 1)
	with pytest.raises(ValueError):
		aggregate([0.1], 0)


RANDOM_STATISTIC_SETS = 10_000


def test_aggregate_properties(rng: np.random.Generator):
	lengths = rng.integers(1, 30, size=RANDOM_STATISTIC_SETS)
	values = rng.normal(size=int(lengths.sum()))
	statistics = np.split(values, np.cumsum(lengths)[:-1])
	labels = rng.integers(0, 2, size=RANDOM_STATISTIC_SETS).astype(bool)
	summed: list[float] = []
	averaged: list[float] = []
	rocLabels: list[bool] = []
	for row, isTarget in zip(statistics, labels):
		D = [float(v) for v in row]
		assert aggregate(D, 1) == max(D)
		assert aggregate(D, len(D)) == math.fsum(D)
		assert aggregate(D, len(D) + 5) == aggregate(D, len(D))
		L = int(rng.integers(1, len(D) + 1))
		assert aggregate(D[::-1], L) == aggregate(D, L)
		if len(D) >= 3:
			top3 = aggregate(D, 3)
			summed.append(top3)
			averaged.append(top3 / 3)
			rocLabels.append(bool(isTarget))
	assert len(statistics) == RANDOM_STATISTIC_SETS
	assert roc(summed, rocLabels, 100.0).points == roc(averaged, rocLabels, 100.0).points


def test_aggregate_adds_statistics_in_descending_order(rng: np.random.Generator):
	for _ in range(100):
		D = list(rng.normal(size=int(rng.integers(1, 30))))
		ordered = sorted(D, reverse=True)
		for L in range(2, len(D) + 1):
			assert aggregate(D, L) - aggregate(D, L - 1) == pytest.approx(ordered[L - 1])


def test_sliding_sum_example():
	assert sliding_sum([0, 0, 1, 1, 1, 1, 1, 1, 1, 0, 0], 7) == 7
	assert sliding_sum([0.5, 0.25], 7) == 0.75
	with pytest.raises(EmptyInput):
		sliding_sum([], 3)


def test_sliding_sum_brute_force(rng: np.random.Generator):
	for _ in range(50):
		D = list(rng.normal(size=int(rng.integers(8, 40))))
		window = int(rng.integers(1, 8))
		best = max(sum(D[i : i + window]) for i in range(len(D) - window + 1))
		assert sliding_sum(D, window) == pytest.approx(best)


def test_score_statistics_per_selector():
	alarm = Alarm(laneId=0, runId=0, downtrackIndex=20, downtrackPosition=1.0)
	stats = AlarmStatistics(
		alarm=alarm,
		depthOrdered=np.array([0.1, 0.7, 0.2, 0.9, 0.0]),
		energyOrdered=np.array([0.3, 0.8]),
	)
	assert score_statistics(stats, TestPolicy(EN, TopL(1))) == 0.3
	assert score_statistics(stats, TestPolicy(EN, TopL(2))) == 0.8
	assert score_statistics(stats, TestPolicy(DS, TopL(2))) == pytest.approx(1.6)
	assert score_statistics(stats, TestPolicy(DS, TopL(12))) == pytest.approx(1.9)
	assert score_statistics(stats, TestPolicy(DS, AllStatistics())) == pytest.approx(1.9)
	assert score_statistics(stats, TestPolicy(DS, SlidingSum(2))) == pytest.approx(1.1)
	empty = AlarmStatistics(alarm=alarm, depthOrdered=np.zeros(0), energyOrdered=np.zeros(0))
	with pytest.raises(EmptyInput):
		score_statistics(empty, TestPolicy(EN, TopL(1)))


def _pick(dataset: Dataset, target: bool) -> Alarm:
	return next(a for a in dataset.alarms if a.isTarget == target)


def test_patch_select_takes_82_non_target_patches(plantedDataset: Dataset):
	scans = plantedDataset.normalizedScans
	assert next(iter(scans.values())).timeSamples == 342
	alarms = [_pick(plantedDataset, True), _pick(plantedDataset, False)]
	ts = build_training_set(strategy_by_index(11), alarms, scans, get_featurizer("hog"), MsekParams())
	assert int(np.sum(ts.labels == -1)) == 82
	assert 1 <= int(np.sum(ts.labels == 1)) <= 4
	assert set(ts.provenance) == {a.alarmId for a in alarms}
	assert ts.features.shape[1] == 81


def test_single_keypoint_policy_takes_one_patch_per_alarm(plantedDataset: Dataset):
	alarms = list(plantedDataset.alarms)
	ts = build_training_set(
		strategy_by_index(6), alarms, plantedDataset.normalizedScans, get_featurizer("ehd"), MsekParams()
	)
	assert len(ts) == len(alarms)
	assert sorted(ts.provenance) == sorted(a.alarmId for a in alarms)


def test_regular_policy_takes_top_one_target_patch(plantedDataset: Dataset):
	target = _pick(plantedDataset, True)
	alarms = [target, _pick(plantedDataset, False)]
	ts = build_training_set(
		strategy_by_index(3), alarms, plantedDataset.normalizedScans, get_featurizer("raw"), MsekParams()
	)
	assert int(np.sum(ts.labels == 1)) == 1
	assert int(np.sum(ts.labels == -1)) == 5


def test_random_policy_depends_on_seed(plantedDataset: Dataset):
	alarms = [_pick(plantedDataset, True), _pick(plantedDataset, False)]
	featurizer = get_featurizer("raw")
	args = (strategy_by_index(4), alarms, plantedDataset.normalizedScans, featurizer, MsekParams())
	first = build_training_set(*args, seed=1)
	assert np.array_equal(first.features, build_training_set(*args, seed=1).features)
	assert not np.array_equal(first.features, build_training_set(*args, seed=2).features)


def test_training_needs_both_classes(plantedDataset: Dataset):
	nonTargets = [a for a in plantedDataset.alarms if not a.isTarget]
	with pytest.raises(EmptyClass):
		build_training_set(
			strategy_by_index(6),
			nonTargets,
			plantedDataset.normalizedScans,
			get_featurizer("hog"),
			MsekParams(),
		)


@pytest.fixture(scope="module")
def forest(plantedDataset: Dataset) -> Model:
	ts = build_training_set(
		strategy_by_index(6),
		plantedDataset.alarms,
		plantedDataset.normalizedScans,
		get_featurizer("hog"),
		MsekParams(),
	)
	return train_classifier(ClassifierConfig(name=ClassifierName.RF, seed=0), ts)


def test_energy_top_one_scores_the_msek_maximum(plantedDataset: Dataset, forest: Model):
	featurizer = get_featurizer("hog")
	alarm = plantedDataset.alarms[0]
	bscanDn = plantedDataset.normalizedScans[alarm.scanKey]
	(kp,) = msek(bscanDn, alarm.downtrackIndex, MsekParams(maxKeypoints=1))
	expected = predict(forest, featurizer(extract_patch(bscanDn, kp)))
	value = score_alarm(strategy_by_index(10), forest, featurizer, bscanDn, alarm, MsekParams())
	assert value == pytest.approx(expected)


def test_all_statistics_sum_the_down_depth_grid(plantedDataset: Dataset, forest: Model):
	featurizer = get_featurizer("hog")
	alarm = plantedDataset.alarms[-1]
	bscanDn = plantedDataset.normalizedScans[alarm.scanKey]
	statistics = [
		predict(forest, featurizer(extract_patch(bscanDn, Keypoint(alarm.downtrackIndex, t, 0.0))))
		for t in sample_down_depth(bscanDn.timeSamples, 4)
	]
	assert len(statistics) == 82
	total = score_alarm(strategy_by_index(4), forest, featurizer, bscanDn, alarm, MsekParams())
	assert total == pytest.approx(sum(statistics))
	best12 = score_alarm(strategy_by_index(11), forest, featurizer, bscanDn, alarm, MsekParams())
	assert best12 == pytest.approx(sum(sorted(statistics, reverse=True)[:12]))


def test_scoring_checks_feature_kind(plantedDataset: Dataset, forest: Model):
	alarm = plantedDataset.alarms[0]
	with pytest.raises(KindMismatch):
		score_alarm(
			strategy_by_index(5),
			forest,
			get_featurizer("ehd"),
			plantedDataset.normalizedScans[alarm.scanKey],
			alarm,
			MsekParams(),
		)


def test_every_registry_strategy_scores_an_alarm(plantedDataset: Dataset, forest: Model):
	featurizer = get_featurizer("hog")
	for spec, alarm in itertools.product(registry(), plantedDataset.alarms[:3]):
		bscanDn = plantedDataset.normalizedScans[alarm.scanKey]
		value = score_alarm(spec, forest, featurizer, bscanDn, alarm, MsekParams())
		assert np.isfinite(value)
