# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

from __future__ import annotations

import itertools
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from patchSelect.classifiers import ClassifierConfig, ClassifierName
from patchSelect.core import Alarm, Dataset
from patchSelect.errors import ConfigError, DegenerateLabels
from patchSelect.evaluation import (
	EXPERIMENTS,
	EvalSettings,
	RocCurve,
	cluster_and_fold,
	experiment_fig4,
	experiment_fig5,
	experiment_fig6,
	experiment_fig7,
	experiment_fig8,
	experiment_single,
	fold_plan,
	pauc,
	roc,
	run_cv,
	sign_counts,
)
from patchSelect.strategy import strategy_by_index
from patchSelect.synth import BenchmarkConfig
from patchSelect.typings import RESULT_COLUMNS

RF = ClassifierConfig(ClassifierName.RF, seed=0)


def _alarm(position: float, runId: int = 0, laneId: int = 0) -> Alarm:
	return Alarm(
		laneId=laneId, runId=runId, downtrackIndex=round(position / 0.05), downtrackPosition=position
	)


def _curve(points: list[tuple[float, float]]) -> RocCurve:
	return RocCurve(points=tuple(points), totalArea=1.0, nTargets=1, nNonTargets=1)


def test_alarms_of_two_runs_share_a_cluster():
	a, b = _alarm(10.0, runId=1), _alarm(10.3, runId=2)
	plan = cluster_and_fold([a, b], clusterDistance=1.0)
	assert plan.clusterOf[a.alarmId] == plan.clusterOf[b.alarmId]
	assert plan.foldOfAlarm(a) == plan.foldOfAlarm(b)


def test_clusters_chain_transitively():
	alarms = [_alarm(0.0), _alarm(0.9), _alarm(1.8), _alarm(5.0)]
	plan = cluster_and_fold(alarms, clusterDistance=1.0)
	clusters = [plan.clusterOf[a.alarmId] for a in alarms]
	assert clusters[0] == clusters[1] == clusters[2] != clusters[3]


def test_lanes_never_share_clusters():
	plan = cluster_and_fold([_alarm(3.0, laneId=0), _alarm(3.0, laneId=1)])
	assert len(set(plan.clusterOf.values())) == 2


def test_no_close_pair_spans_folds(rng: np.random.Generator):
	alarms = [
		Alarm(laneId=int(lane), runId=int(run), downtrackIndex=i, downtrackPosition=float(pos))
		for i, (lane, run, pos) in enumerate(
			zip(rng.integers(0, 4, 1000), rng.integers(0, 3, 1000), rng.uniform(0, 200, 1000))
		)
	]
	plan = cluster_and_fold(alarms, clusterDistance=1.0, seed=3)
	assert set(plan.foldOf.values()) == {0, 1, 2, 3}
	byLane: dict[int, list[Alarm]] = {}
	for alarm in alarms:
		byLane.setdefault(alarm.laneId, []).append(alarm)
	for laneAlarms in byLane.values():
		for a, b in itertools.combinations(laneAlarms, 2):
			if abs(a.downtrackPosition - b.downtrackPosition) <= 1.0:
				assert plan.foldOfAlarm(a) == plan.foldOfAlarm(b)


def test_folds_are_balanced_and_seeded(rng: np.random.Generator):
	alarms = [_alarm(float(p)) for p in np.arange(0, 400, 2.5)]
	plan = cluster_and_fold(alarms, seed=1)
	sizes = np.bincount([plan.foldOfAlarm(a) for a in alarms], minlength=4)
	assert sizes.max() - sizes.min() <= 1
	assert cluster_and_fold(alarms, seed=1) == plan


def test_cluster_and_fold_validation():
	with pytest.raises(ConfigError):
		cluster_and_fold([_alarm(1.0)], clusterDistance=0.0)
	with pytest.raises(ConfigError):
		cluster_and_fold([_alarm(1.0)], nFolds=1)


def test_roc_two_alarms():
	curve = roc([0.9, 0.1], [True, False], 100.0)
	assert curve.points == ((0.0, 1.0), (0.01, 1.0))


def test_roc_single_tie_group():
	curve = roc([0.5] * 5, [1, -1, -1, 1, -1], 10.0)
	assert curve.points == ((0.3, 1.0),)


def test_roc_validation():
	with pytest.raises(DegenerateLabels):
		roc([0.1, 0.2], [True, True], 10.0)
	with pytest.raises(ValueError):
		roc([0.1], [True, False], 10.0)
	with pytest.raises(ValueError):
		roc([0.1, 0.2], [True, False], 0.0)


def test_roc_matches_threshold_recount(rng: np.random.Generator):
	scores = np.round(rng.uniform(size=50), 1)
	labels = rng.integers(0, 2, 50).astype(bool)
	labels[:2] = (True, False)
	curve = roc(list(scores), list(labels), 25.0)
	expected = []
	for threshold in sorted(set(scores), reverse=True):
		hits = sum(1 for s, t in zip(scores, labels) if s >= threshold and t)
		falseAlarms = sum(1 for s, t in zip(scores, labels) if s >= threshold and not t)
		expected.append((falseAlarms / 25.0, hits / labels.sum()))
	np.testing.assert_allclose(np.array(curve.points), np.array(expected))


def test_pauc_of_a_perfect_curve():
	curve = roc([0.9, 0.8, 0.1, 0.05], [1, 1, -1, -1], 100.0)
	for far2 in (0.001, 0.005, 0.1):
		assert pauc(curve, far2) == pytest.approx(1.0, abs=1e-12)


def test_pauc_of_the_diagonal():
	assert pauc(_curve([(0.01, 1.0)]), 0.01) == pytest.approx(0.5)
	assert pauc(_curve([(0.005, 0.5), (0.01, 1.0)]), 0.01) == pytest.approx(0.5)
	with pytest.raises(ValueError):
		pauc(_curve([(0.01, 1.0)]), 0.0)


def _denseArea(points: list[tuple[float, float]], far2: float, n: int = 1_000_001) -> float:
	xs = np.linspace(0.0, far2, n)
	px = np.array([0.0] + [p[0] for p in points])
	py = np.array([0.0] + [p[1] for p in points])
	ys = np.interp(xs, px, py, right=py[-1])
	return float(np.sum((ys[1:] + ys[:-1]) * np.diff(xs)) / 2 / far2)


def test_pauc_matches_dense_integration(rng: np.random.Generator):
	for _ in range(100):
		far2 = float(rng.uniform(0.002, 0.02))
		n = int(rng.integers(1, 30))
		fars = np.cumsum(rng.uniform(0.5, 1.5, size=n)) * far2 / 15
		pds = np.sort(rng.uniform(size=n))
		points = [(float(x), float(y)) for x, y in zip(fars, pds)]
		assert pauc(_curve(points), far2) == pytest.approx(_denseArea(points, far2), abs=1e-9)


def test_pauc_ignores_monotone_transforms(rng: np.random.Generator):
	scores = rng.normal(size=80)
	labels = list(rng.integers(0, 2, 80) * 2 - 1)
	base = pauc(roc(list(scores), labels, 500.0), 0.05)
	for transform in (np.exp, lambda s: 3 * s + 1, np.arctan):
		assert pauc(roc(list(transform(scores)), labels, 500.0), 0.05) == pytest.approx(base, abs=1e-12)


def test_random_confidences_sit_near_the_chance_curve(rng: np.random.Generator):
	labels = [1] * 50 + [-1] * 50
	values = [pauc(roc(list(rng.uniform(size=100)), labels, 50.0), 1.0) for _ in range(200)]
	assert np.mean(values) == pytest.approx(0.5, abs=0.03)


def test_run_cv_scores_every_alarm_once(plantedDataset: Dataset):
	settings = EvalSettings()
	plan = fold_plan(plantedDataset, settings)
	scored = run_cv(plantedDataset, strategy_by_index(6), "hog", RF, plan)
	assert [a.alarmId for a in scored] == [a.alarmId for a in plantedDataset.alarms]
	assert all(a.confidence is not None and 0.0 <= a.confidence <= 1.0 for a in scored)
	assert all(a.clusterId == plan.clusterOf[a.alarmId] for a in scored)
	again = run_cv(plantedDataset, strategy_by_index(6), "hog", RF, plan)
	assert [a.confidence for a in again] == [a.confidence for a in scored]


def test_run_cv_trains_without_the_held_out_fold(plantedDataset: Dataset):
	plan = fold_plan(plantedDataset, EvalSettings())
	models: dict[int, object] = {}
	run_cv(plantedDataset, strategy_by_index(5), "ehd", RF, plan, onModel=models.__setitem__)
	assert sorted(models) == sorted(set(plan.foldOf.values()))


@pytest.fixture(scope="module")
def tinySettings() -> EvalSettings:
	return EvalSettings(
		features=("hog",),
		classifiers=(RF,),
		strategies=(strategy_by_index(5), strategy_by_index(6), strategy_by_index(10)),
		sweepL=(1, 3),
		sweepK=(1, 2),
	)


def test_fig4_table_shape(smallBench: BenchmarkConfig, plantedDataset: Dataset, tinySettings: EvalSettings):
	result = experiment_fig4(smallBench, [0], tinySettings, datasets=[plantedDataset])
	table = result.table
	assert list(table.columns) == list(RESULT_COLUMNS)
	assert len(table) == 3
	assert list(table["strategy"]) == [5, 6, 10]
	assert table["pauc_mean"].between(0, 1).all()
	assert (table["far2"] == 0.005).all()
	assert len(result.perSeed) == 3
	again = experiment_fig4(smallBench, [0], tinySettings, datasets=[plantedDataset])
	pd.testing.assert_frame_equal(again.table, table)


def test_fig5_averages_over_far2(
	smallBench: BenchmarkConfig, plantedDataset: Dataset, tinySettings: EvalSettings
):
	settings = replace(tinySettings, far2List=(0.005, 0.0025))
	result = experiment_fig5(smallBench, [0], settings, datasets=[plantedDataset])
	table = result.table
	assert list(zip(table["strategy"], table["far2"])) == [
		(5, 0.0025),
		(5, 0.005),
		(6, 0.0025),
		(6, 0.005),
		(10, 0.0025),
		(10, 0.005),
	]
	assert (table["feature"] == "all").all()
	assert len(result.perSeed) == 6
	# one feature and classifier pair: the average is the fig4 cell itself
	fig4 = experiment_fig4(smallBench, [0], tinySettings, datasets=[plantedDataset]).table
	at005 = table[table["far2"] == 0.005]
	assert list(at005["pauc_mean"]) == pytest.approx(list(fig4["pauc_mean"]))


def test_fig6_compares_orderings_per_sampler(
	smallBench: BenchmarkConfig, plantedDataset: Dataset, tinySettings: EvalSettings
):
	result = experiment_fig6(smallBench, [0], tinySettings, datasets=[plantedDataset])
	table = result.table
	cells = sorted(zip(table["nontarget_sampler"], table["ordering"], table["top_l"]))
	assert cells == [
		(sampler, ordering, L) for sampler in ("energy", "reg5") for ordering in ("DS", "En") for L in (1, 3)
	]
	assert (table["target_k"] == "1-2").all()
	assert (table["pauc_min"] <= table["pauc_mean"]).all()
	assert (table["pauc_mean"] <= table["pauc_max"]).all()
	assert len(result.perSeed) == 16
	assert set(result.perSeed["nontarget_sampler"]) == {"energy", "reg5"}


def test_fig7_compares_nontarget_samplers(
	smallBench: BenchmarkConfig, plantedDataset: Dataset, tinySettings: EvalSettings
):
	result = experiment_fig7(smallBench, [0], tinySettings, datasets=[plantedDataset])
	table = result.table
	assert sorted(set(table["nontarget_sampler"])) == ["depth4", "energy", "reg5"]
	assert len(table) == 6
	assert (table["ordering"] == "DS").all()


def test_fig8_sweeps_k_and_l(
	smallBench: BenchmarkConfig, plantedDataset: Dataset, tinySettings: EvalSettings
):
	result = experiment_fig8(smallBench, [0], tinySettings, datasets=[plantedDataset])
	assert sorted(zip(result.table["target_k"], result.table["top_l"])) == [(1, 1), (1, 3), (2, 1), (2, 3)]
	assert (result.table["pauc_min"] <= result.table["pauc_max"]).all()


def test_single_keeps_models_and_scores(
	smallBench: BenchmarkConfig, plantedDataset: Dataset, tinySettings: EvalSettings
):
	result = experiment_single(smallBench, [0], tinySettings, datasets=[plantedDataset])
	assert len(result.table) == 1
	assert result.table.loc[0, "strategy"] == 5
	assert len(result.scored[0]) == len(plantedDataset.alarms)
	assert {fold for _, fold in result.models} <= {0, 1, 2, 3}


def test_experiment_names():
	assert sorted(EXPERIMENTS) == ["fig4", "fig5", "fig6", "fig7", "fig8", "single"]


def test_sign_counts():
	perSeed = pd.DataFrame(
		{
			"strategy": [11, 11, 11, 3, 3, 3],
			"feature": ["hog"] * 6,
			"classifier": ["rf"] * 6,
			"seed": [0, 1, 2, 0, 1, 2],
			"pauc": [0.5, 0.6, 0.4, 0.4, 0.6, 0.45],
		}
	)
	signs = sign_counts(perSeed, reference=11)
	assert signs.to_dict("records") == [
		{"strategy": 3, "feature": "hog", "classifier": "rf", "wins": 1, "ties": 1, "losses": 1}
	]
