# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Synthetic B-scans and the energy-anomaly prescreener.

Scenes reproduce the geometry seen in downward-looking GPR data: a bright
ground bounce near the top, depth-dependent attenuation, and a hyperbolic
response per buried object. All randomness comes from numpy's PCG64
generator seeded explicitly, so a configuration always yields the same scene.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
	DEFAULT_HALO_RADIUS_M,
	LANE_WIDTH_M,
	PATCH_HALF,
	Alarm,
	BScan,
	Dataset,
	FloatArray,
	GroundTruth,
	TruthObject,
	derive_seed,
	label_alarms,
)
from .errors import ConfigError
from .keypoints import depth_normalize, local_maxima
from .logHandler import log


@dataclass(frozen=True)
class SceneConfig:
	"""Parameters of one synthetic lane run.

	Amplitudes are in units of the noise standard deviation before
	attenuation. ``hyperbolaSpread`` is downtrack columns per time sample of
	hyperbola growth; ``limbTaper`` is the Gaussian half-width, in columns, of
	the amplitude falloff along the limbs.
	"""

	timeSamples: int = 342
	downtrackSamples: int = 800
	downtrackSpacing: float = 0.05
	nTargets: int = 13
	nClutter: int = 12
	noiseSigma: float = 1.0
	attenuationAlpha: float = 0.008
	hyperbolaSpread: float = 0.25
	waveletWidth: int = 12
	seed: int = 0
	layoutSeed: int | None = None
	laneId: int = 0
	runId: int = 0
	groundBounceTime: int = 12
	groundBounceAmplitude: float = 20.0
	targetAmplitude: tuple[float, float] = (6.0, 10.0)
	clutterAmplitude: tuple[float, float] = (2.0, 6.0)
	clutterSpread: tuple[float, float] = (0.1, 1.0)
	depthRange: tuple[int, int] = (60, 280)
	limbTaper: float = 10.0
	edgeMargin: float = 2.0

	def validate(self) -> None:
		"""Check the configuration invariants.

		:raises ConfigError: Naming the first violated invariant.
		"""
		problems: list[str] = []
		if self.timeSamples < 50:
			problems.append("timeSamples must be at least 50")
		if self.downtrackSamples < 2 * PATCH_HALF:
			problems.append(f"downtrackSamples must be at least {2 * PATCH_HALF}")
		if self.nTargets < 0 or self.nClutter < 0:
			problems.append("object counts must be non-negative")
		if not self.noiseSigma > 0:
			problems.append("noiseSigma must be positive")
		if not self.downtrackSpacing > 0:
			problems.append("downtrackSpacing must be positive")
		if self.attenuationAlpha < 0:
			problems.append("attenuationAlpha must be non-negative")
		if not self.hyperbolaSpread > 0 or not self.limbTaper > 0:
			problems.append("hyperbolaSpread and limbTaper must be positive")
		if self.waveletWidth < 1:
			problems.append("waveletWidth must be at least 1")
		lo, hi = self.depthRange
		if not 0 <= lo <= hi < self.timeSamples:
			problems.append("depthRange must lie inside the A-scan")
		if self.clutterSpread[0] <= 0 or self.clutterSpread[0] > self.clutterSpread[1]:
			problems.append("clutterSpread must be a positive increasing range")
		if 2 * self.edgeMargin >= self.laneLength:
			problems.append("edgeMargin leaves no room for objects")
		if problems:
			raise ConfigError("; ".join(problems))

	@property
	def laneLength(self) -> float:
		return self.downtrackSamples * self.downtrackSpacing


@dataclass(frozen=True)
class PrescreenerParams:
	"""Energy-anomaly prescreener settings.

	:ivar threshold: Standardized energy an alarm must exceed.
	:ivar backgroundWindow: Columns in the trailing background estimate.
	:ivar guard: Columns skipped between the test column and its background.
	:ivar minSeparation: Meters within which a weaker peak is suppressed.
	"""

	threshold: float = 4.0
	backgroundWindow: int = 60
	guard: int = 15
	minSeparation: float = 1.0

	def validate(self) -> None:
		if not self.backgroundWindow > self.guard >= 0:
			raise ConfigError("prescreener needs backgroundWindow > guard >= 0")
		if not self.minSeparation > 0:
			raise ConfigError("prescreener minSeparation must be positive")


@dataclass(frozen=True)
class BenchmarkConfig:
	"""Lanes and runs making up one benchmark dataset."""

	nLanes: int = 8
	nRuns: int = 3
	scene: SceneConfig = field(default_factory=SceneConfig)
	prescreener: PrescreenerParams = field(default_factory=PrescreenerParams)
	haloRadius: float = DEFAULT_HALO_RADIUS_M

	def validate(self) -> None:
		if self.nLanes < 1 or self.nRuns < 1:
			raise ConfigError("benchmark needs at least one lane and one run")
		if not self.haloRadius > 0:
			raise ConfigError("haloRadius must be positive")
		self.scene.validate()
		self.prescreener.validate()


def ricker(tau: FloatArray, width: float) -> FloatArray:
	"""Ricker wavelet with unit peak; the main lobe spans about ``width`` samples."""
	a = 2.0 * tau / width
	a2 = a * a
	return (1.0 - 2.0 * a2) * np.exp(-a2)


def _addHyperbola(
	clean: FloatArray,
	x0: float,
	t0: float,
	amplitude: float,
	spread: float,
	cfg: SceneConfig,
) -> None:
	nTime, nDowntrack = clean.shape
	reach = 4.0 * cfg.limbTaper
	first = max(0, int(math.floor(x0 - reach)))
	last = min(nDowntrack - 1, int(math.ceil(x0 + reach)))
	cols = np.arange(first, last + 1)
	dx = cols - x0
	arrival = np.sqrt(t0 * t0 + (dx / spread) ** 2)
	taper = np.exp(-0.5 * (dx / cfg.limbTaper) ** 2)
	t = np.arange(nTime, dtype=np.float64)[:, None]
	clean[:, first : last + 1] += amplitude * taper[None, :] * ricker(t - arrival[None, :], cfg.waveletWidth)


def _targetPositions(rng: np.random.Generator, cfg: SceneConfig) -> list[float]:
	# one object per equal-width slot keeps targets apart
	if cfg.nTargets == 0:
		return []
	start = cfg.edgeMargin
	slot = (cfg.laneLength - 2 * cfg.edgeMargin) / cfg.nTargets
	inset = 0.15 * slot
	return [float(start + i * slot + rng.uniform(inset, slot - inset)) for i in range(cfg.nTargets)]


def generate_scene(cfg: SceneConfig) -> tuple[BScan, GroundTruth]:
	"""Render one lane run and its ground truth.

	Object placement, depths and amplitudes are drawn from ``layoutSeed``
	(``seed`` when unset) so that several runs of a lane share their objects;
	noise is drawn from ``seed``.

	:param cfg: Scene parameters.
	:return: The scan and the target objects it contains.
	:raises ConfigError: If ``cfg`` is invalid.
	"""
	cfg.validate()
	layoutRng = np.random.default_rng(cfg.seed if cfg.layoutSeed is None else cfg.layoutSeed)
	noiseRng = np.random.default_rng(derive_seed(cfg.seed, 1))
	nTime, nDowntrack = cfg.timeSamples, cfg.downtrackSamples
	t = np.arange(nTime, dtype=np.float64)

	clean = np.zeros((nTime, nDowntrack), dtype=np.float64)
	clean += (cfg.groundBounceAmplitude * ricker(t - cfg.groundBounceTime, cfg.waveletWidth))[:, None]

	depthLo, depthHi = cfg.depthRange
	objects: list[TruthObject] = []
	for objectId, position in enumerate(_targetPositions(layoutRng, cfg)):
		depth = int(layoutRng.integers(depthLo, depthHi + 1))
		amplitude = float(layoutRng.uniform(*cfg.targetAmplitude))
		x0 = position / cfg.downtrackSpacing
		_addHyperbola(clean, x0, float(depth), amplitude, cfg.hyperbolaSpread, cfg)
		objects.append(
			TruthObject(
				objectId=objectId,
				laneId=cfg.laneId,
				downtrackPosition=x0 * cfg.downtrackSpacing,
				depthTimeIndex=depth,
				amplitude=amplitude,
			)
		)
	for _ in range(cfg.nClutter):
		position = float(layoutRng.uniform(cfg.edgeMargin, cfg.laneLength - cfg.edgeMargin))
		depth = int(layoutRng.integers(depthLo, depthHi + 1))
		amplitude = float(layoutRng.uniform(*cfg.clutterAmplitude))
		spread = float(layoutRng.uniform(*cfg.clutterSpread))
		_addHyperbola(clean, position / cfg.downtrackSpacing, float(depth), amplitude, spread, cfg)

	noise = noiseRng.normal(0.0, cfg.noiseSigma, size=(nTime, nDowntrack))
	envelope = np.exp(-cfg.attenuationAlpha * t)[:, None]
	samples = (envelope * (clean + noise)).astype(np.float32)
	bscan = BScan(samples=samples, downtrackSpacing=cfg.downtrackSpacing, laneId=cfg.laneId, runId=cfg.runId)
	truth = GroundTruth(objects=tuple(objects), laneArea=cfg.laneLength * LANE_WIDTH_M)
	return bscan, truth


def standardized_energy(energy: FloatArray, backgroundWindow: int, guard: int) -> FloatArray:
	"""Standardize each column energy against its trailing background.

	Columns too close to the start of the run use the window the same
	distance ahead of them instead.
	"""
	n = energy.shape[0]
	csum = np.concatenate(([0.0], np.cumsum(energy)))
	csq = np.concatenate(([0.0], np.cumsum(energy * energy)))
	idx = np.arange(n)
	lo = idx - guard - backgroundWindow
	hi = idx - guard
	ahead = lo < 0
	lo = np.where(ahead, idx + guard + 1, lo)
	hi = np.where(ahead, idx + guard + 1 + backgroundWindow, hi)
	lo = np.clip(lo, 0, n)
	hi = np.clip(hi, 0, n)
	count = (hi - lo).astype(np.float64)
	safe = np.maximum(count, 1.0)
	mean = (csum[hi] - csum[lo]) / safe
	var = np.maximum((csq[hi] - csq[lo]) / safe - mean * mean, 0.0)
	std = np.sqrt(var)
	score = np.zeros(n, dtype=np.float64)
	valid = (count > 1) & (std > 0)
	score[valid] = (energy[valid] - mean[valid]) / std[valid]
	return score


def pick_alarm_peaks(scores: FloatArray, downtrackSpacing: float, p: PrescreenerParams) -> list[int]:
	"""Downtrack indices of the alarms a score profile yields.

	Local maxima above the threshold are visited strongest first (smaller
	index on ties); a maximum within ``minSeparation`` meters of an accepted
	one is suppressed. Columns too close to either end for a patch are
	never alarms.
	"""
	n = scores.shape[0]
	candidates = [
		x for x in local_maxima(scores) if scores[x] > p.threshold and PATCH_HALF <= x <= n - PATCH_HALF
	]
	candidates.sort(key=lambda x: (-scores[x], x))
	accepted: list[int] = []
	for x in candidates:
		if all(abs(x - other) * downtrackSpacing > p.minSeparation for other in accepted):
			accepted.append(x)
	return sorted(accepted)


def prescreen(bscan: BScan, p: PrescreenerParams) -> list[Alarm]:
	"""Flag downtrack locations whose energy stands out from the background.

	:param bscan: Raw scan of one run.
	:param p: Prescreener settings.
	:return: Unlabeled alarms ordered by downtrack index.
	:raises ConfigError: If the settings are invalid or the scan is too short.
	"""
	p.validate()
	if bscan.downtrackSamples <= p.backgroundWindow + p.guard:
		raise ConfigError("scan is shorter than the prescreener background window plus guard")
	normalized = depth_normalize(bscan)
	energy = np.square(np.asarray(normalized.samples, dtype=np.float64)).sum(axis=0)
	scores = standardized_energy(energy, p.backgroundWindow, p.guard)
	return [
		Alarm(
			laneId=bscan.laneId,
			runId=bscan.runId,
			downtrackIndex=x,
			downtrackPosition=x * bscan.downtrackSpacing,
		)
		for x in pick_alarm_peaks(scores, bscan.downtrackSpacing, p)
	]


def generate_benchmark_scenes(
	cfg: BenchmarkConfig, seed: int
) -> tuple[dict[tuple[int, int], BScan], dict[int, GroundTruth]]:
	"""Render every lane run of one benchmark seed.

	Runs of the same lane share their object layout and differ in noise.
	"""
	cfg.validate()
	scans: dict[tuple[int, int], BScan] = {}
	truths: dict[int, GroundTruth] = {}
	for laneId in range(cfg.nLanes):
		layoutSeed = derive_seed(seed, laneId)
		for runId in range(cfg.nRuns):
			sceneCfg = replace(
				cfg.scene,
				seed=derive_seed(seed, laneId, runId),
				layoutSeed=layoutSeed,
				laneId=laneId,
				runId=runId,
			)
			bscan, truth = generate_scene(sceneCfg)
			scans[(laneId, runId)] = bscan
			truths.setdefault(laneId, truth)
	return scans, truths


def prescreen_dataset(
	scans: Mapping[tuple[int, int], BScan],
	truths: Mapping[int, GroundTruth],
	cfg: BenchmarkConfig,
	seed: int,
) -> Dataset:
	"""Prescreen and label every scan, yielding a dataset."""
	alarms: list[Alarm] = []
	for key in sorted(scans):
		bscan = scans[key]
		alarms.extend(label_alarms(prescreen(bscan, cfg.prescreener), truths[bscan.laneId], cfg.haloRadius))
	dataset = Dataset(scans=dict(scans), truths=dict(truths), alarms=tuple(alarms), seed=seed)
	log.info(
		f"benchmark seed {seed}: {len(scans)} scans, {dataset.nTargets} target and "
		f"{dataset.nNonTargets} non-target alarms"
	)
	return dataset


def build_benchmark(cfg: BenchmarkConfig, seed: int) -> Dataset:
	"""Generate, prescreen and label every lane run of one benchmark seed."""
	scans, truths = generate_benchmark_scenes(cfg, seed)
	return prescreen_dataset(scans, truths, cfg, seed)
