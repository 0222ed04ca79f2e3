# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

from __future__ import annotations

import numpy as np
import pytest

from patchSelect.core import Alarm, BScan, Dataset, label_alarms
from patchSelect.synth import BenchmarkConfig, SceneConfig, generate_benchmark_scenes

SMALL_SCENE = SceneConfig(downtrackSamples=400, nTargets=6, nClutter=6)


@pytest.fixture
def rng() -> np.random.Generator:
	return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def smallBench() -> BenchmarkConfig:
	return BenchmarkConfig(nLanes=3, nRuns=2, scene=SMALL_SCENE)


def planted_dataset(bench: BenchmarkConfig, seed: int) -> Dataset:
	"""Scenes of a benchmark with alarms placed on every object and halfway between neighbours.

	Alarm placement does not depend on the prescreener, so both classes are
	always present in known numbers.
	"""
	scans, truths = generate_benchmark_scenes(bench, seed)
	alarms: list[Alarm] = []
	for (laneId, runId), bscan in sorted(scans.items()):
		positions = sorted(obj.downtrackPosition for obj in truths[laneId].objects)
		columns = [round(p / bscan.downtrackSpacing) for p in positions]
		columns += [round((a + b) / 2 / bscan.downtrackSpacing) for a, b in zip(positions, positions[1:])]
		for x in sorted(set(columns)):
			position = x * bscan.downtrackSpacing
			alarms.append(Alarm(laneId=laneId, runId=runId, downtrackIndex=x, downtrackPosition=position))
	labeled: list[Alarm] = []
	for laneId, truth in truths.items():
		labeled.extend(label_alarms([a for a in alarms if a.laneId == laneId], truth, bench.haloRadius))
	labeled.sort(key=lambda a: (a.laneId, a.runId, a.downtrackIndex))
	return Dataset(scans=scans, truths=truths, alarms=tuple(labeled), seed=seed)


@pytest.fixture(scope="session")
def plantedDataset(smallBench: BenchmarkConfig) -> Dataset:
	return planted_dataset(smallBench, seed=0)


def random_bscan(
	rng: np.random.Generator, nTime: int = 60, nDowntrack: int = 40, laneId: int = 0, runId: int = 0
) -> BScan:
	return BScan(
		samples=rng.normal(size=(nTime, nDowntrack)).astype(np.float32),
		downtrackSpacing=0.05,
		laneId=laneId,
		runId=runId,
	)
