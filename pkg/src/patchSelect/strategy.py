# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Keypoint utilization strategies.

A strategy pairs a training policy (which patches of target and non-target
alarms feed the classifier) with a testing policy (which decision statistics
of an alarm are combined into its confidence, and how). The eleven built-in
strategies are returned by :func:`registry`; index 11 is PatchSelect.
"""

from __future__ import annotations

import enum
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace

import numpy as np

from .classifiers import Model, TrainingSet, predict_batch
from .core import Alarm, BScan, FloatArray, derive_seed, patch_stack
from .errors import ConfigError, EmptyClass, EmptyInput, KindMismatch
from .features import Featurizer
from .keypoints import MsekParams, msek, sample_down_depth, sample_random, sample_regular
from .logHandler import log

DEFAULT_DS_STRIDE = 4
DEFAULT_SLIDING_WINDOW = 7


@dataclass(frozen=True)
class TopEnergy:
	count: int

	@property
	def text(self) -> str:
		return f"energy{self.count}"

	def timeIndices(self, bscanDn: BScan, alarm: Alarm, p: MsekParams, seed: int) -> list[int]:
		params = replace(p, maxKeypoints=self.count)
		return [kp.timeIndex for kp in msek(bscanDn, alarm.downtrackIndex, params)]


@dataclass(frozen=True)
class Regular:
	count: int

	@property
	def text(self) -> str:
		return f"reg{self.count}"

	def timeIndices(self, bscanDn: BScan, alarm: Alarm, p: MsekParams, seed: int) -> list[int]:
		return sample_regular(bscanDn.timeSamples, self.count, p.margin)


@dataclass(frozen=True)
class Random:
	"""``count`` random depths per alarm, drawn independently for every alarm."""

	count: int
	seed: int = 0

	@property
	def text(self) -> str:
		return f"rand{self.count}" if self.seed == 0 else f"rand{self.count}~{self.seed}"

	def timeIndices(self, bscanDn: BScan, alarm: Alarm, p: MsekParams, seed: int) -> list[int]:
		alarmSeed = derive_seed(seed, self.seed, alarm.laneId, alarm.runId, alarm.downtrackIndex)
		return sample_random(bscanDn.timeSamples, self.count, p.margin, seed=alarmSeed)


@dataclass(frozen=True)
class EveryPoint:
	@property
	def text(self) -> str:
		return "every"

	def timeIndices(self, bscanDn: BScan, alarm: Alarm, p: MsekParams, seed: int) -> list[int]:
		return sample_down_depth(bscanDn.timeSamples, 1, p.margin)


@dataclass(frozen=True)
class DownDepth:
	stride: int = DEFAULT_DS_STRIDE

	@property
	def text(self) -> str:
		return f"depth{self.stride}"

	def timeIndices(self, bscanDn: BScan, alarm: Alarm, p: MsekParams, seed: int) -> list[int]:
		return sample_down_depth(bscanDn.timeSamples, self.stride, p.margin)


Sampler = TopEnergy | Regular | Random | EveryPoint | DownDepth


class Ordering(enum.Enum):
	EN = "En"
	DS = "DS"


@dataclass(frozen=True)
class TopL:
	count: int

	@property
	def text(self) -> str:
		return f"top{self.count}"


@dataclass(frozen=True)
class AllStatistics:
	@property
	def text(self) -> str:
		return "all"


@dataclass(frozen=True)
class SlidingSum:
	window: int = DEFAULT_SLIDING_WINDOW

	@property
	def text(self) -> str:
		return f"slide{self.window}"


Selector = TopL | AllStatistics | SlidingSum


def _checkSampler(sampler: Sampler) -> None:
	if isinstance(sampler, TopEnergy | Regular | Random) and sampler.count < 1:
		raise ConfigError(f"sampler {sampler.text} needs a count of at least 1")
	if isinstance(sampler, DownDepth) and sampler.stride < 1:
		raise ConfigError("down-depth stride must be at least 1")


@dataclass(frozen=True)
class TrainPolicy:
	"""Which patches of each alarm feed training.

	:ivar targetKeypoints: Top-K MSEK keypoints taken from every target alarm.
	:ivar nontargetSampler: Depth sampler for non-target alarms.
	:ivar targetSampler: Replaces the MSEK choice for targets when set.
	"""

	targetKeypoints: int
	nontargetSampler: Sampler
	targetSampler: Sampler | None = None

	def __post_init__(self) -> None:
		if self.targetKeypoints < 1:
			raise ConfigError("target keypoint count must be at least 1")
		_checkSampler(self.nontargetSampler)
		if self.targetSampler is not None:
			_checkSampler(self.targetSampler)

	@property
	def effectiveTargetSampler(self) -> Sampler:
		return self.targetSampler if self.targetSampler is not None else TopEnergy(self.targetKeypoints)


@dataclass(frozen=True)
class TestPolicy:
	"""How an alarm's decision statistics become one confidence."""

	__test__ = False

	ordering: Ordering
	selector: Selector
	dsStride: int = DEFAULT_DS_STRIDE

	def __post_init__(self) -> None:
		if self.ordering is Ordering.EN and not isinstance(self.selector, TopL):
			raise ConfigError("energy ordering needs a top-L selector")
		if isinstance(self.selector, TopL) and self.selector.count < 1:
			raise ConfigError("L must be at least 1")
		if isinstance(self.selector, SlidingSum) and self.selector.window < 1:
			raise ConfigError("sliding window must be at least 1")
		if self.dsStride < 1:
			raise ConfigError("decision-statistic stride must be at least 1")

	@property
	def text(self) -> str:
		return f"{self.ordering.value}/{self.selector.text}"


@dataclass(frozen=True)
class StrategySpec:
	index: int
	name: str
	train: TrainPolicy
	test: TestPolicy

	@property
	def text(self) -> str:
		"""Canonical one-line form, read back by :func:`parse_strategy`."""
		target = self.train.effectiveTargetSampler.text
		return (
			f"{self.index}:{self.name} tgt={target} nt={self.train.nontargetSampler.text} "
			f"test={self.test.text} stride={self.test.dsStride}"
		)

	@property
	def isPatchSelect(self) -> bool:
		return self.name == PATCH_SELECT


PATCH_SELECT = "PatchSelect"


def registry() -> list[StrategySpec]:
	"""The eleven built-in strategies, indexed 1 to 11."""
	ds, en = Ordering.DS, Ordering.EN
	rows: list[tuple[str, TrainPolicy, TestPolicy]] = [
		("S1", TrainPolicy(3, TopEnergy(3)), TestPolicy(ds, TopL(3))),
		("S2", TrainPolicy(2, TopEnergy(2)), TestPolicy(en, TopL(2))),
		("S3", TrainPolicy(1, Regular(5)), TestPolicy(ds, TopL(3))),
		("S4", TrainPolicy(1, Random(5)), TestPolicy(ds, AllStatistics())),
		("S5", TrainPolicy(1, TopEnergy(1)), TestPolicy(ds, TopL(12))),
		("S6", TrainPolicy(1, TopEnergy(1)), TestPolicy(ds, TopL(1))),
		("S7", TrainPolicy(5, Random(5), targetSampler=Regular(5)), TestPolicy(ds, AllStatistics())),
		("S8", TrainPolicy(3, TopEnergy(3)), TestPolicy(en, TopL(1))),
		("S9", TrainPolicy(1, TopEnergy(1)), TestPolicy(ds, SlidingSum(7))),
		("S10", TrainPolicy(1, TopEnergy(1)), TestPolicy(en, TopL(1))),
		(PATCH_SELECT, TrainPolicy(4, DownDepth(4)), TestPolicy(ds, TopL(12))),
	]
	return [
		StrategySpec(index=i, name=name, train=train, test=test)
		for i, (name, train, test) in enumerate(rows, 1)
	]


def strategy_by_index(index: int) -> StrategySpec:
	specs = registry()
	if not 1 <= index <= len(specs):
		raise ConfigError(f"no built-in strategy {index}; expected 1..{len(specs)}")
	return specs[index - 1]


_SAMPLER_PATTERN = re.compile(r"^(energy|reg|rand|depth|every)(\d*)(?:~(\d+))?$")
_SELECTOR_PATTERN = re.compile(r"^(top|all|slide)(\d*)$")
_STRATEGY_PATTERN = re.compile(
	r"^(?P<index>\d+):(?P<name>\S+)\s+tgt=(?P<tgt>\S+)\s+nt=(?P<nt>\S+)\s+"
	r"test=(?P<ordering>En|DS)/(?P<selector>\S+)\s+stride=(?P<stride>\d+)$"
)


def parse_sampler(text: str) -> Sampler:
	match = _SAMPLER_PATTERN.match(text.strip())
	if match is None:
		raise ConfigError(f"unknown sampler {text!r}")
	kind, number, seed = match.groups()
	if kind == "every":
		return EveryPoint()
	if not number:
		raise ConfigError(f"sampler {text!r} needs a number")
	value = int(number)
	if kind == "energy":
		return TopEnergy(value)
	if kind == "reg":
		return Regular(value)
	if kind == "rand":
		return Random(value, int(seed) if seed else 0)
	return DownDepth(value)


def parse_selector(text: str) -> Selector:
	match = _SELECTOR_PATTERN.match(text.strip())
	if match is None:
		raise ConfigError(f"unknown selector {text!r}")
	kind, number = match.groups()
	if kind == "all":
		return AllStatistics()
	if not number:
		raise ConfigError(f"selector {text!r} needs a number")
	return TopL(int(number)) if kind == "top" else SlidingSum(int(number))


def parse_strategy(text: str) -> StrategySpec:
	"""Inverse of :attr:`StrategySpec.text`.

	A bare integer selects the built-in strategy with that index.

	:raises ConfigError: If the text is malformed.
	"""
	stripped = text.strip()
	if stripped.isdigit():
		return strategy_by_index(int(stripped))
	match = _STRATEGY_PATTERN.match(stripped)
	if match is None:
		raise ConfigError(f"cannot parse strategy {text!r}")
	target = parse_sampler(match["tgt"])
	nontarget = parse_sampler(match["nt"])
	if isinstance(target, TopEnergy):
		train = TrainPolicy(target.count, nontarget)
	else:
		count = target.count if isinstance(target, Regular | Random) else 1
		train = TrainPolicy(count, nontarget, targetSampler=target)
	test = TestPolicy(Ordering(match["ordering"]), parse_selector(match["selector"]), int(match["stride"]))
	return StrategySpec(index=int(match["index"]), name=match["name"], train=train, test=test)


def aggregate(D: Iterable[float], L: int) -> float:
	"""Sum of the ``L`` largest decision statistics.

	``L`` beyond the number of statistics saturates at all of them.

	:raises EmptyInput: If ``D`` is empty.
	"""
	values = sorted((float(d) for d in D), reverse=True)
	if not values:
		raise EmptyInput("no decision statistics to aggregate")
	if L < 1:
		raise ValueError("L must be at least 1")
	return math.fsum(values[:L])


def sliding_sum(D: Sequence[float], window: int) -> float:
	"""Largest sum of ``window`` consecutive statistics in depth order.

	A sequence shorter than the window sums to its total.
	"""
	if len(D) == 0:
		raise EmptyInput("no decision statistics to aggregate")
	if window < 1:
		raise ValueError("window must be at least 1")
	values = [float(d) for d in D]
	if len(values) <= window:
		return math.fsum(values)
	return max(math.fsum(values[i : i + window]) for i in range(len(values) - window + 1))


@dataclass(frozen=True, eq=False)
class AlarmStatistics:
	"""Decision statistics of one alarm under both orderings.

	:ivar depthOrdered: Statistics on the down-depth grid, shallow to deep.
	:ivar energyOrdered: Statistics at MSEK keypoints, highest energy first.
	"""

	alarm: Alarm
	depthOrdered: FloatArray
	energyOrdered: FloatArray


def score_statistics(stats: AlarmStatistics, test: TestPolicy) -> float:
	"""Confidence of an alarm under a testing policy.

	:raises EmptyInput: If the policy has no statistic to use.
	"""
	selector = test.selector
	if test.ordering is Ordering.EN:
		assert isinstance(selector, TopL)
		chosen = stats.energyOrdered[: selector.count]
		if chosen.size == 0:
			raise EmptyInput(f"alarm {stats.alarm.alarmId} has no energy keypoint")
		return float(np.max(chosen))
	if stats.depthOrdered.size == 0:
		raise EmptyInput(f"alarm {stats.alarm.alarmId} has no evaluation location")
	if isinstance(selector, TopL):
		return aggregate(stats.depthOrdered, selector.count)
	if isinstance(selector, AllStatistics):
		return aggregate(stats.depthOrdered, stats.depthOrdered.size)
	return sliding_sum(list(stats.depthOrdered), selector.window)


def alarm_statistics_batch(
	model: Model,
	featurizer: Featurizer,
	scans: Mapping[tuple[int, int], BScan],
	alarms: Sequence[Alarm],
	msekParams: MsekParams,
	dsStride: int | None = DEFAULT_DS_STRIDE,
	energyKeypoints: int | None = None,
) -> list[AlarmStatistics]:
	"""Score every alarm's patches once so several test policies can share them.

	:param scans: Depth-normalized scans keyed by ``(laneId, runId)``.
	:param dsStride: Down-depth grid stride, or ``None`` to skip that ordering.
	:param energyKeypoints: MSEK keypoints scored per alarm, or ``None`` to skip.
	:raises KindMismatch: If the model was trained on another feature kind.
	"""
	if model.featureKind is not featurizer.kind:
		raise KindMismatch(f"model trained on {model.featureKind.value}, featurizer is {featurizer.name}")
	stacks: list[FloatArray] = []
	spans: list[tuple[int, int]] = []
	for alarm in alarms:
		bscanDn = scans[alarm.scanKey]
		depthTimes = sample_down_depth(bscanDn.timeSamples, dsStride, msekParams.margin) if dsStride else []
		energyTimes: list[int] = []
		if energyKeypoints:
			params = replace(msekParams, maxKeypoints=energyKeypoints)
			energyTimes = [kp.timeIndex for kp in msek(bscanDn, alarm.downtrackIndex, params)]
		stacks.append(patch_stack(bscanDn, alarm.downtrackIndex, depthTimes + energyTimes))
		spans.append((len(depthTimes), len(energyTimes)))
	if not stacks:
		return []
	allStats = predict_batch(model, featurizer.batch(np.concatenate(stacks)))
	result: list[AlarmStatistics] = []
	offset = 0
	for alarm, (nDepth, nEnergy) in zip(alarms, spans):
		result.append(
			AlarmStatistics(
				alarm=alarm,
				depthOrdered=allStats[offset : offset + nDepth],
				energyOrdered=allStats[offset + nDepth : offset + nDepth + nEnergy],
			)
		)
		offset += nDepth + nEnergy
	return result


def alarm_statistics(
	model: Model,
	featurizer: Featurizer,
	bscanDn: BScan,
	alarm: Alarm,
	msekParams: MsekParams,
	dsStride: int | None = DEFAULT_DS_STRIDE,
	energyKeypoints: int | None = None,
) -> AlarmStatistics:
	return alarm_statistics_batch(
		model, featurizer, {alarm.scanKey: bscanDn}, [alarm], msekParams, dsStride, energyKeypoints
	)[0]


def score_alarm(
	spec: StrategySpec,
	model: Model,
	featurizer: Featurizer,
	bscan: BScan,
	alarm: Alarm,
	msekParams: MsekParams,
) -> float:
	"""Confidence of one alarm under a strategy's testing policy.

	En ordering takes the largest statistic among the top-L MSEK keypoints
	of the central A-scan. DS ordering scores the down-depth grid and
	combines it with the policy's selector.

	:param bscan: Depth-normalized scan holding the alarm.
	:raises KindMismatch: If model and featurizer disagree on the feature kind.
	:raises EmptyInput: If no location can be scored.
	"""
	test = spec.test
	if test.ordering is Ordering.EN:
		assert isinstance(test.selector, TopL)
		stats = alarm_statistics(model, featurizer, bscan, alarm, msekParams, None, test.selector.count)
	else:
		stats = alarm_statistics(model, featurizer, bscan, alarm, msekParams, test.dsStride, None)
	return score_statistics(stats, test)


def build_training_set(
	spec: StrategySpec | TrainPolicy,
	alarms: Iterable[Alarm],
	bscans: Mapping[tuple[int, int], BScan],
	featurizer: Featurizer,
	msekParams: MsekParams,
	seed: int = 0,
) -> TrainingSet:
	"""Patches of labeled alarms under a training policy.

	Target alarms contribute their top-K MSEK keypoints (or the policy's
	target sampler) labeled +1; non-target alarms contribute the depths of
	the non-target sampler labeled -1.

	:param bscans: Depth-normalized scans keyed by ``(laneId, runId)``.
	:param seed: Mixed into random depth draws.
	:raises EmptyClass: If either class yields no patch.
	"""
	policy = spec.train if isinstance(spec, StrategySpec) else spec
	targetSampler = policy.effectiveTargetSampler
	stacks: list[FloatArray] = []
	labels: list[int] = []
	provenance: list[str] = []
	for alarm in alarms:
		bscanDn = bscans[alarm.scanKey]
		sampler = targetSampler if alarm.isTarget else policy.nontargetSampler
		times = sampler.timeIndices(bscanDn, alarm, msekParams, seed)
		if not times:
			if alarm.isTarget:
				log.warning(f"target alarm {alarm.alarmId} has no energy maximum; skipped for training")
			continue
		stacks.append(patch_stack(bscanDn, alarm.downtrackIndex, times))
		labels.extend([1 if alarm.isTarget else -1] * len(times))
		provenance.extend([alarm.alarmId] * len(times))
	nTarget = sum(1 for label in labels if label == 1)
	if nTarget == 0 or nTarget == len(labels):
		missing = "target" if nTarget == 0 else "non-target"
		raise EmptyClass(f"training policy produced no {missing} patches")
	features = featurizer.batch(np.concatenate(stacks))
	return TrainingSet(
		features=features,
		labels=np.asarray(labels, dtype=np.int64),
		provenance=tuple(provenance),
		kind=featurizer.kind,
	)
