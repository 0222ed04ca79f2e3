# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Temporal keypoint identification.

Max-smoothed-energy keypoints (MSEK) for energy-driven policies, plus the
regular, random and down-depth samplers the energy-free policies use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PATCH_HALF, BScan, FloatArray, Keypoint
from .errors import ConfigError, RangeError

NORMALIZE_EPS = 1e-12


@dataclass(frozen=True)
class MsekParams:
	"""MSEK settings.

	:ivar smoothWindow: Odd moving-average length in samples.
	:ivar maxKeypoints: Number of maxima kept (K).
	:ivar margin: Closest a keypoint may come to either end of the A-scan.
	"""

	smoothWindow: int = 9
	maxKeypoints: int = 4
	margin: int = PATCH_HALF

	def __post_init__(self) -> None:
		if self.smoothWindow < 1 or self.smoothWindow % 2 == 0:
			raise ConfigError("smoothWindow must be odd and at least 1")
		if self.maxKeypoints < 1:
			raise ConfigError("maxKeypoints must be at least 1")
		if self.margin < 0:
			raise ConfigError("margin must be non-negative")


def depth_normalize(bscan: BScan) -> BScan:
	"""Z-score every time row across the downtrack axis of the run.

	Rows with no variation become zeros.
	"""
	if bscan.downtrackSamples < 2:
		raise ValueError("depth normalization needs at least two A-scans")
	samples = np.asarray(bscan.samples, dtype=np.float64)
	mean = samples.mean(axis=1, keepdims=True)
	std = samples.std(axis=1, keepdims=True)
	normalized = (samples - mean) / (std + NORMALIZE_EPS)
	constant = np.ptp(samples, axis=1) == 0
	normalized[constant, :] = 0.0
	return BScan(
		samples=normalized,
		downtrackSpacing=bscan.downtrackSpacing,
		laneId=bscan.laneId,
		runId=bscan.runId,
	)


def smoothed_energy(ascan: FloatArray, window: int) -> FloatArray:
	"""Moving average of the squared A-scan, truncated at both ends."""
	energy = np.square(np.asarray(ascan, dtype=np.float64))
	half = window // 2
	n = energy.shape[0]
	csum = np.concatenate(([0.0], np.cumsum(energy)))
	idx = np.arange(n)
	lo = np.maximum(idx - half, 0)
	hi = np.minimum(idx + half + 1, n)
	return (csum[hi] - csum[lo]) / (hi - lo)


def local_maxima(signal: FloatArray) -> list[int]:
	"""Indices of strict local maxima; a flat-topped peak reports its leftmost index.

	Ends of the signal count as lower than any value.
	"""
	n = signal.shape[0]
	peaks: list[int] = []
	i = 0
	while i < n:
		j = i
		while j + 1 < n and signal[j + 1] == signal[i]:
			j += 1
		leftOk = i == 0 or signal[i - 1] < signal[i]
		rightOk = j == n - 1 or signal[j + 1] < signal[j]
		if leftOk and rightOk and n > 1:
			peaks.append(i)
		i = j + 1
	return peaks


def msek(bscanDn: BScan, downtrackIndex: int, p: MsekParams) -> list[Keypoint]:
	"""Top-K maxima of the smoothed energy of one depth-normalized A-scan.

	:param bscanDn: Depth-normalized scan.
	:param downtrackIndex: Column holding the central A-scan.
	:param p: Smoothing window, K and margin.
	:return: Up to K keypoints, highest score first, ties by smaller time index.
	"""
	if not 0 <= downtrackIndex < bscanDn.downtrackSamples:
		raise IndexError(f"downtrack index {downtrackIndex} outside scan")
	energy = smoothed_energy(bscanDn.ascan(downtrackIndex), p.smoothWindow)
	last = bscanDn.timeSamples - p.margin
	candidates = [t for t in local_maxima(energy) if p.margin <= t <= last]
	candidates.sort(key=lambda t: (-energy[t], t))
	return [
		Keypoint(downtrackIndex=downtrackIndex, timeIndex=t, score=float(energy[t]))
		for t in candidates[: p.maxKeypoints]
	]


def _spanCount(nTime: int, margin: int) -> int:
	return nTime - 2 * margin + 1


def sample_regular(nTime: int, n: int, margin: int = PATCH_HALF) -> list[int]:
	"""``n`` time indices evenly spaced over ``[margin, nTime - margin]``.

	Index i is ``margin + i * (nTime - 2 * margin) / (n - 1)`` rounded half up;
	a single index sits at the middle of the A-scan.

	:raises RangeError: If the range holds fewer than ``n`` indices.
	"""
	if n < 1 or n > _spanCount(nTime, margin):
		raise RangeError(f"cannot place {n} regular indices in [{margin}, {nTime - margin}]")
	if n == 1:
		return [int(math.floor((nTime - 1) / 2 + 0.5))]
	step = (nTime - 2 * margin) / (n - 1)
	indices = sorted({int(math.floor(margin + i * step + 0.5)) for i in range(n)})
	return indices


def sample_random(nTime: int, n: int, margin: int = PATCH_HALF, seed: int = 0) -> list[int]:
	"""``n`` distinct indices drawn uniformly from ``[margin, nTime - margin]``, sorted.

	:raises RangeError: If the range holds fewer than ``n`` indices.
	"""
	count = _spanCount(nTime, margin)
	if n < 1 or n > count:
		raise RangeError(f"cannot draw {n} distinct indices from [{margin}, {nTime - margin}]")
	rng = np.random.default_rng(seed)
	drawn = rng.choice(count, size=n, replace=False)
	return sorted(int(margin + d) for d in drawn)


def sample_down_depth(nTime: int, stride: int = 4, margin: int = PATCH_HALF) -> list[int]:
	"""Every ``stride``-th index from ``margin`` up to ``nTime - margin``."""
	if stride < 1:
		raise RangeError("stride must be at least 1")
	return list(range(margin, nTime - margin + 1, stride))
