# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from patchSelect.core import BScan, derive_seed
from patchSelect.errors import ConfigError
from patchSelect.synth import (
	BenchmarkConfig,
	PrescreenerParams,
	SceneConfig,
	build_benchmark,
	generate_benchmark_scenes,
	generate_scene,
	pick_alarm_peaks,
	prescreen,
	ricker,
)

from .conftest import SMALL_SCENE


def test_same_seed_same_scene():
	cfg = replace(SMALL_SCENE, seed=11)
	first, truth1 = generate_scene(cfg)
	second, truth2 = generate_scene(cfg)
	assert np.array_equal(first.samples, second.samples)
	assert truth1 == truth2
	other, _ = generate_scene(replace(cfg, seed=12))
	assert not np.array_equal(first.samples, other.samples)


def test_noiseless_scene_is_ground_bounce_only():
	cfg = SceneConfig(downtrackSamples=100, nTargets=0, nClutter=0, noiseSigma=1e-9)
	bscan, truth = generate_scene(cfg)
	assert truth.objects == ()
	t = np.arange(cfg.timeSamples, dtype=np.float64)
	wavelet = ricker(t - cfg.groundBounceTime, cfg.waveletWidth)
	column = np.exp(-cfg.attenuationAlpha * t) * cfg.groundBounceAmplitude * wavelet
	np.testing.assert_allclose(bscan.samples, np.repeat(column[:, None], 100, axis=1), atol=1e-5)


def test_target_column_peaks_at_its_depth():
	cfg = SceneConfig(downtrackSamples=400, nTargets=1, nClutter=0, noiseSigma=0.01, seed=5)
	bscan, truth = generate_scene(cfg)
	(obj,) = truth.objects
	x0 = round(obj.downtrackPosition / cfg.downtrackSpacing)
	postBounce = cfg.groundBounceTime + 3 * cfg.waveletWidth
	column = np.abs(bscan.ascan(x0)[postBounce:])
	peak = postBounce + int(np.argmax(column))
	assert abs(peak - obj.depthTimeIndex) <= cfg.waveletWidth


def test_truth_lies_inside_lane():
	bscan, truth = generate_scene(SMALL_SCENE)
	assert len(truth.objects) == SMALL_SCENE.nTargets
	assert truth.laneArea == pytest.approx(bscan.laneArea)
	for obj in truth.objects:
		upper = SMALL_SCENE.laneLength - SMALL_SCENE.edgeMargin
		assert SMALL_SCENE.edgeMargin <= obj.downtrackPosition <= upper
		assert SMALL_SCENE.depthRange[0] <= obj.depthTimeIndex <= SMALL_SCENE.depthRange[1]


@pytest.mark.parametrize(
	"cfg",
	[
		SceneConfig(noiseSigma=0.0),
		SceneConfig(timeSamples=40),
		SceneConfig(depthRange=(100, 400)),
		SceneConfig(downtrackSamples=60, edgeMargin=2.0),
		SceneConfig(nTargets=-1),
	],
)
def test_invalid_scene_config(cfg: SceneConfig):
	with pytest.raises(ConfigError):
		generate_scene(cfg)


def test_pure_noise_raises_no_alarms():
	cfg = SceneConfig(nTargets=0, nClutter=0)
	p = PrescreenerParams(threshold=6.0)
	for seed in range(20):
		bscan, _ = generate_scene(replace(cfg, seed=seed))
		assert prescreen(bscan, p) == []


def test_single_target_gives_one_alarm_in_halo():
	cfg = SceneConfig(
		downtrackSamples=400, nTargets=1, nClutter=0, noiseSigma=0.5, targetAmplitude=(10.0, 10.0), seed=3
	)
	bscan, truth = generate_scene(cfg)
	(obj,) = truth.objects
	alarms = prescreen(bscan, PrescreenerParams())
	near = [a for a in alarms if abs(a.downtrackPosition - obj.downtrackPosition) <= 0.25]
	assert len(near) == 1


def test_peak_ties_keep_lower_index():
	scores = np.zeros(60)
	scores[20] = 9.0
	scores[26] = 9.0
	assert pick_alarm_peaks(scores, 0.05, PrescreenerParams(minSeparation=0.5)) == [20]
	assert pick_alarm_peaks(scores, 0.05, PrescreenerParams(minSeparation=0.2)) == [20, 26]


def test_peaks_skip_scan_ends():
	scores = np.zeros(60)
	scores[3] = 9.0
	scores[55] = 9.0
	assert pick_alarm_peaks(scores, 0.05, PrescreenerParams()) == []


def test_prescreen_needs_long_enough_scan(rng: np.random.Generator):
	bscan = BScan(samples=rng.normal(size=(60, 70)), downtrackSpacing=0.05, laneId=0, runId=0)
	with pytest.raises(ConfigError):
		prescreen(bscan, PrescreenerParams(backgroundWindow=60, guard=15))
	with pytest.raises(ConfigError):
		prescreen(bscan, PrescreenerParams(backgroundWindow=10, guard=10))


def test_runs_share_lane_layout(smallBench: BenchmarkConfig):
	scans, truths = generate_benchmark_scenes(smallBench, seed=4)
	assert sorted(scans) == [(lane, run) for lane in range(3) for run in range(2)]
	assert sorted(truths) == [0, 1, 2]
	assert not np.array_equal(scans[(0, 0)].samples, scans[(0, 1)].samples)
	runScenes = [
		replace(smallBench.scene, seed=derive_seed(4, 0, run), layoutSeed=derive_seed(4, 0), runId=run)
		for run in range(2)
	]
	layouts = [generate_scene(scene)[1] for scene in runScenes]
	assert layouts[0] == layouts[1] == truths[0]


def test_build_benchmark_labels_alarms(smallBench: BenchmarkConfig):
	dataset = build_benchmark(smallBench, seed=1)
	again = build_benchmark(smallBench, seed=1)
	assert dataset.alarms == again.alarms
	assert dataset.totalArea == pytest.approx(6 * 20.0)
	objectIds = {lane: {o.objectId for o in t.objects} for lane, t in dataset.truths.items()}
	for alarm in dataset.alarms:
		if alarm.isTarget:
			assert alarm.truthObjectId in objectIds[alarm.laneId]
	seen = [(a.laneId, a.runId, a.truthObjectId) for a in dataset.alarms if a.isTarget]
	assert len(seen) == len(set(seen))
	assert dataset.nTargets > 0
