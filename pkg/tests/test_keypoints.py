# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from patchSelect.core import BScan
from patchSelect.errors import ConfigError, RangeError
from patchSelect.keypoints import (
	MsekParams,
	depth_normalize,
	msek,
	sample_down_depth,
	sample_random,
	sample_regular,
)


def _columnScan(ascan: np.ndarray, nDowntrack: int = 20, column: int = 10) -> BScan:
	samples = np.zeros((ascan.shape[0], nDowntrack))
	samples[:, column] = ascan
	return BScan(samples=samples, downtrackSpacing=0.05, laneId=0, runId=0)


def _triangle(n: int, center: int, halfWidth: int, height: float) -> np.ndarray:
	t = np.arange(n)
	return np.clip(height * (1 - np.abs(t - center) / halfWidth), 0, None)


def _bruteForce(ascan: np.ndarray, window: int, k: int, margin: int) -> list[int]:
	n = len(ascan)
	half = window // 2
	smoothed = []
	for i in range(n):
		part = [ascan[j] ** 2 for j in range(max(0, i - half), min(n, i + half + 1))]
		smoothed.append(sum(part) / len(part))
	peaks = []
	for i in range(n):
		left = smoothed[i - 1] if i > 0 else -np.inf
		right = smoothed[i + 1] if i < n - 1 else -np.inf
		if smoothed[i] > left and smoothed[i] > right and margin <= i <= n - margin:
			peaks.append(i)
	peaks.sort(key=lambda i: (-smoothed[i], i))
	return peaks[:k]


def test_msek_params_validation():
	with pytest.raises(ConfigError):
		MsekParams(smoothWindow=4)
	with pytest.raises(ConfigError):
		MsekParams(maxKeypoints=0)


def test_depth_normalize_moments(rng: np.random.Generator):
	samples = rng.normal(loc=3.0, scale=5.0, size=(60, 50))
	samples[7, :] = 2.5
	out = depth_normalize(BScan(samples=samples, downtrackSpacing=0.05, laneId=0, runId=0)).samples
	assert np.all(out[7] == 0.0)
	rows = np.delete(out, 7, axis=0)
	np.testing.assert_allclose(rows.mean(axis=1), 0.0, atol=1e-9)
	np.testing.assert_allclose(rows.std(axis=1), 1.0, atol=1e-6)


def test_depth_normalize_equalizes_decay(rng: np.random.Generator):
	decay = np.logspace(0, -2, 80)
	samples = rng.normal(size=(80, 200)) * decay[:, None]
	out = depth_normalize(BScan(samples=samples, downtrackSpacing=0.05, laneId=0, runId=0)).samples
	rms = np.sqrt(np.mean(out**2, axis=1))
	assert 0.99 <= rms[0] / rms[-1] <= 1.01


def test_msek_single_pulse():
	scan = _columnScan(_triangle(300, 100, 6, 1.0))
	keypoints = msek(scan, 10, MsekParams(maxKeypoints=3))
	assert [kp.timeIndex for kp in keypoints] == [100]
	assert keypoints[0].downtrackIndex == 10


def test_msek_dominant_pulse_first():
	ascan = np.zeros(300)
	ascan[50] = 2.0
	ascan[200] = 1.0
	keypoints = msek(_columnScan(ascan), 10, MsekParams(smoothWindow=1, maxKeypoints=1))
	assert [(kp.timeIndex, kp.score) for kp in keypoints] == [(50, 4.0)]


def test_msek_respects_margin():
	ascan = np.zeros(100)
	ascan[3] = 5.0
	ascan[95] = 5.0
	ascan[40] = 1.0
	keypoints = msek(_columnScan(ascan), 10, MsekParams(smoothWindow=1, maxKeypoints=4, margin=9))
	assert [kp.timeIndex for kp in keypoints] == [40]


def test_msek_matches_brute_force(rng: np.random.Generator):
	for _ in range(200):
		n = int(rng.integers(30, 120))
		ascan = rng.normal(size=n)
		window = int(rng.choice([1, 3, 5, 9]))
		k = int(rng.integers(1, 6))
		keypoints = msek(_columnScan(ascan), 10, MsekParams(smoothWindow=window, maxKeypoints=k))
		assert [kp.timeIndex for kp in keypoints] == _bruteForce(ascan, window, k, 9)


@pytest.mark.parametrize("scale", [-3.0, 0.1, 10.0])
def test_msek_scale_invariant(rng: np.random.Generator, scale: float):
	samples = rng.normal(size=(120, 30))
	p = MsekParams()
	bscan = BScan(samples=samples, downtrackSpacing=0.05, laneId=0, runId=0)
	base = [kp.timeIndex for kp in msek(bscan, 15, p)]
	scaled = BScan(samples=samples * scale, downtrackSpacing=0.05, laneId=0, runId=0)
	assert [kp.timeIndex for kp in msek(scaled, 15, p)] == base


def test_sample_regular_five():
	assert sample_regular(342, 5, margin=9) == [9, 90, 171, 252, 333]


def test_sample_regular_midpoint():
	assert sample_regular(342, 1) == [171]
	assert sample_regular(101, 1) == [50]


def test_sample_regular_too_short():
	with pytest.raises(RangeError):
		sample_regular(20, 5, margin=9)


@pytest.mark.parametrize("n", [2, 3, 7, 40])
def test_sample_regular_strictly_increasing(n: int):
	indices = sample_regular(342, n)
	assert len(indices) == n
	assert all(a < b for a, b in zip(indices, indices[1:]))
	assert indices[0] == 9 and indices[-1] == 333


def test_sample_random_deterministic():
	assert sample_random(342, 5, seed=7) == sample_random(342, 5, seed=7)
	assert sample_random(342, 5, seed=7) != sample_random(342, 5, seed=8)


def test_sample_random_exhaustion():
	assert sample_random(40, 40 - 18 + 1, margin=9, seed=3) == list(range(9, 32))
	with pytest.raises(RangeError):
		sample_random(40, 24, margin=9)


def test_sample_random_uniform():
	draws = Counter(sample_random(100, 1, margin=10, seed=s)[0] for s in range(20000))
	assert set(draws) == set(range(10, 91))
	expected = 20000 / 81
	sigma = np.sqrt(expected * (1 - 1 / 81))
	assert all(abs(c - expected) < 5 * sigma for c in draws.values())


def test_sample_down_depth_counts():
	assert len(sample_down_depth(342, stride=4, margin=9)) == 82
	assert sample_down_depth(60, stride=1, margin=9) == list(range(9, 52))
	assert sample_down_depth(50, stride=100, margin=9) == [9]
	with pytest.raises(RangeError):
		sample_down_depth(50, stride=0)
