# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Domain data model shared by every stage.

Holds the B-scan, alarm, keypoint, patch and ground-truth types, patch
extraction, truth labeling of alarms, and the on-disk formats for scans,
truth manifests and alarm lists.
"""

from __future__ import annotations

import csv
import enum
import io
import os
import struct
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import numpy.typing as npt

from .errors import FormatError, IoError, MarginViolation
from .logHandler import log
from .typings import AlarmRow, TruthRow

PATCH_SIZE = 18
PATCH_HALF = 9
LANE_WIDTH_M = 1.0
DEFAULT_HALO_RADIUS_M = 0.25

BSCAN_MAGIC = b"GPRB"
BSCAN_VERSION = 1
# magic, version, T, X, downtrack spacing, lane id, run id
_BSCAN_HEADER = struct.Struct("<4sHIIdII")

FloatArray = npt.NDArray[np.float64]


class Label(enum.Enum):
	TARGET = "target"
	NON_TARGET = "nontarget"


@dataclass(frozen=True, eq=False)
class BScan:
	"""Time by downtrack amplitude grid of one run over one lane.

	``samples[t, x]`` is the amplitude at time sample ``t`` of the A-scan
	recorded at downtrack index ``x``.
	"""

	samples: npt.NDArray[np.floating]
	downtrackSpacing: float
	laneId: int
	runId: int

	def __post_init__(self) -> None:
		samples = np.array(self.samples, copy=True)
		if samples.dtype not in (np.float32, np.float64):
			samples = samples.astype(np.float64)
		if samples.ndim != 2:
			raise ValueError(f"B-scan samples must be 2D, got shape {samples.shape}")
		if samples.shape[0] < PATCH_SIZE or samples.shape[1] < PATCH_SIZE:
			raise ValueError(f"B-scan must be at least {PATCH_SIZE}x{PATCH_SIZE}, got {samples.shape}")
		if not np.all(np.isfinite(samples)):
			raise ValueError("B-scan samples must be finite")
		if not self.downtrackSpacing > 0:
			raise ValueError("downtrack spacing must be positive")
		samples.flags.writeable = False
		object.__setattr__(self, "samples", samples)

	@property
	def timeSamples(self) -> int:
		return int(self.samples.shape[0])

	@property
	def downtrackSamples(self) -> int:
		return int(self.samples.shape[1])

	@property
	def laneArea(self) -> float:
		"""Scanned area in square meters, for a lane of fixed width."""
		return self.downtrackSamples * self.downtrackSpacing * LANE_WIDTH_M

	def ascan(self, downtrackIndex: int) -> FloatArray:
		return np.asarray(self.samples[:, downtrackIndex], dtype=np.float64)


@dataclass(frozen=True)
class Alarm:
	"""A downtrack location flagged by the prescreener."""

	laneId: int
	runId: int
	downtrackIndex: int
	downtrackPosition: float
	label: Label = Label.NON_TARGET
	truthObjectId: int | None = None
	confidence: float | None = None
	clusterId: int | None = None

	def __post_init__(self) -> None:
		if (self.label is Label.TARGET) != (self.truthObjectId is not None):
			raise ValueError("an alarm is a target exactly when it is linked to a truth object")
		if self.downtrackIndex < 0:
			raise ValueError("downtrack index must be non-negative")

	@property
	def alarmId(self) -> str:
		return f"{self.laneId}-{self.runId}-{self.downtrackIndex}"

	@property
	def isTarget(self) -> bool:
		return self.label is Label.TARGET

	@property
	def scanKey(self) -> tuple[int, int]:
		return (self.laneId, self.runId)


@dataclass(frozen=True)
class Keypoint:
	downtrackIndex: int
	timeIndex: int
	score: float


@dataclass(frozen=True, eq=False)
class Patch:
	values: FloatArray
	sourceAlarm: str
	sourceKeypoint: Keypoint


@dataclass(frozen=True)
class TruthObject:
	objectId: int
	laneId: int
	downtrackPosition: float
	depthTimeIndex: int
	amplitude: float


@dataclass(frozen=True)
class GroundTruth:
	"""Buried objects of one lane and the area the lane covers."""

	objects: tuple[TruthObject, ...]
	laneArea: float

	def __post_init__(self) -> None:
		if not self.laneArea > 0:
			raise ValueError("lane area must be positive")
		laneLength = self.laneArea / LANE_WIDTH_M
		for obj in self.objects:
			if not 0.0 <= obj.downtrackPosition <= laneLength:
				raise ValueError(f"object {obj.objectId} lies outside the lane extent")


@dataclass(frozen=True, eq=False)
class Dataset:
	"""Everything one benchmark seed produced.

	:ivar scans: Raw B-scans keyed by ``(laneId, runId)``.
	:ivar truths: Ground truth per lane id.
	:ivar alarms: Labeled prescreener alarms over all scans.
	:ivar seed: Seed the dataset was generated from.
	"""

	scans: Mapping[tuple[int, int], BScan]
	truths: Mapping[int, GroundTruth]
	alarms: tuple[Alarm, ...]
	seed: int = 0

	def __post_init__(self) -> None:
		for alarm in self.alarms:
			scan = self.scans.get(alarm.scanKey)
			if scan is None:
				raise ValueError(f"alarm {alarm.alarmId} refers to a scan that is not in the dataset")
			if alarm.downtrackIndex >= scan.downtrackSamples:
				raise ValueError(
					f"alarm {alarm.alarmId} lies beyond the {scan.downtrackSamples} columns of its scan"
				)

	@property
	def totalArea(self) -> float:
		"""Scanned area summed over every run, the per-m² false alarm denominator."""
		return float(sum(scan.laneArea for scan in self.scans.values()))

	@cached_property
	def normalizedScans(self) -> dict[tuple[int, int], BScan]:
		from .keypoints import depth_normalize

		return {key: depth_normalize(scan) for key, scan in self.scans.items()}

	@property
	def nTargets(self) -> int:
		return sum(1 for a in self.alarms if a.isTarget)

	@property
	def nNonTargets(self) -> int:
		return len(self.alarms) - self.nTargets


def derive_seed(*entropy: int) -> int:
	"""Mix integers into a 63-bit seed, stable across platforms."""
	state = np.random.SeedSequence([int(e) for e in entropy]).generate_state(1, dtype=np.uint64)
	return int(state[0]) >> 1


def extract_patch(bscan: BScan, kp: Keypoint, alarmId: str = "") -> Patch:
	"""Cut the 18x18 window centered on a keypoint and rescale it to [-1, 1].

	Rows ``timeIndex-9 .. timeIndex+8`` and the analogous columns are taken.
	A constant window maps to all zeros.

	:param bscan: Source scan, normally depth-normalized.
	:param kp: Window center.
	:param alarmId: Provenance recorded on the patch.
	:raises MarginViolation: If the window leaves the grid.
	"""
	t0 = kp.timeIndex - PATCH_HALF
	x0 = kp.downtrackIndex - PATCH_HALF
	if t0 < 0 or x0 < 0 or t0 + PATCH_SIZE > bscan.timeSamples or x0 + PATCH_SIZE > bscan.downtrackSamples:
		raise MarginViolation(
			f"patch at (t={kp.timeIndex}, x={kp.downtrackIndex}) exceeds grid "
			f"{bscan.timeSamples}x{bscan.downtrackSamples}"
		)
	window = np.asarray(bscan.samples[t0 : t0 + PATCH_SIZE, x0 : x0 + PATCH_SIZE], dtype=np.float64)
	return Patch(values=rescale_window(window), sourceAlarm=alarmId, sourceKeypoint=kp)


def rescale_window(window: FloatArray) -> FloatArray:
	lo = float(window.min())
	hi = float(window.max())
	if hi == lo:
		return np.zeros_like(window)
	return 2.0 * (window - lo) / (hi - lo) - 1.0


def patch_stack(bscan: BScan, downtrackIndex: int, timeIndices: Sequence[int]) -> FloatArray:
	"""Rescaled windows at several depths of one A-scan, shaped ``(n, 18, 18)``.

	Each window equals ``extract_patch(...).values`` for the same keypoint.

	:raises MarginViolation: If any window leaves the grid.
	"""
	times = np.asarray(timeIndices, dtype=np.int64)
	if times.size == 0:
		return np.zeros((0, PATCH_SIZE, PATCH_SIZE), dtype=np.float64)
	x0 = downtrackIndex - PATCH_HALF
	if (
		x0 < 0
		or x0 + PATCH_SIZE > bscan.downtrackSamples
		or int(times.min()) - PATCH_HALF < 0
		or int(times.max()) - PATCH_HALF + PATCH_SIZE > bscan.timeSamples
	):
		raise MarginViolation(
			f"patches at x={downtrackIndex}, t in [{int(times.min())}, {int(times.max())}] exceed grid "
			f"{bscan.timeSamples}x{bscan.downtrackSamples}"
		)
	slab = np.asarray(bscan.samples[:, x0 : x0 + PATCH_SIZE], dtype=np.float64)
	rows = times[:, None] + np.arange(-PATCH_HALF, PATCH_SIZE - PATCH_HALF)[None, :]
	windows = slab[rows]
	lo = windows.min(axis=(1, 2), keepdims=True)
	hi = windows.max(axis=(1, 2), keepdims=True)
	span = hi - lo
	constant = span == 0
	scaled = 2.0 * (windows - lo) / np.where(constant, 1.0, span) - 1.0
	return np.where(constant, 0.0, scaled)


def label_alarms(
	alarms: Iterable[Alarm],
	truth: GroundTruth | Iterable[TruthObject],
	haloRadius: float = DEFAULT_HALO_RADIUS_M,
) -> list[Alarm]:
	"""Credit alarms to buried objects.

	An alarm within ``haloRadius`` meters downtrack of an object in its lane is
	linked to the nearest such object. Per run, each object keeps only its
	nearest alarm; the other alarms linked to it are dropped as duplicates.
	The result is sorted by lane, run and downtrack index.

	:param alarms: Alarms of any labels; existing labels are ignored.
	:param truth: Ground truth, or a plain collection of objects from several lanes.
	:param haloRadius: Matching radius in meters.
	"""
	if not haloRadius > 0:
		raise ValueError("halo radius must be positive")
	objects = truth.objects if isinstance(truth, GroundTruth) else tuple(truth)
	byLane: dict[int, list[TruthObject]] = {}
	for obj in objects:
		byLane.setdefault(obj.laneId, []).append(obj)

	# (alarm, linked object, distance)
	linked: list[tuple[Alarm, TruthObject | None, float]] = []
	for alarm in alarms:
		best: TruthObject | None = None
		bestDistance = float("inf")
		for obj in byLane.get(alarm.laneId, ()):
			distance = abs(alarm.downtrackPosition - obj.downtrackPosition)
			if distance > haloRadius:
				continue
			if distance < bestDistance or (
				distance == bestDistance and best is not None and obj.objectId < best.objectId
			):
				best = obj
				bestDistance = distance
		linked.append((alarm, best, bestDistance))

	winners: dict[tuple[int, int], tuple[float, int]] = {}
	for alarm, obj, distance in linked:
		if obj is None:
			continue
		key = (alarm.runId, obj.objectId)
		candidate = (distance, alarm.downtrackIndex)
		if key not in winners or candidate < winners[key]:
			winners[key] = candidate

	result: list[Alarm] = []
	for alarm, obj, distance in linked:
		if obj is None:
			result.append(replace(alarm, label=Label.NON_TARGET, truthObjectId=None))
			continue
		if winners[(alarm.runId, obj.objectId)] != (distance, alarm.downtrackIndex):
			log.debug(f"dropping duplicate alarm {alarm.alarmId} of object {obj.objectId}")
			continue
		result.append(replace(alarm, label=Label.TARGET, truthObjectId=obj.objectId))
	result.sort(key=lambda a: (a.laneId, a.runId, a.downtrackIndex))
	return result


def atomic_write(path: str | os.PathLike[str], payload: bytes) -> None:
	tmpPath = os.fspath(path) + ".tmp"
	try:
		with open(tmpPath, "wb") as f:
			f.write(payload)
		os.replace(tmpPath, path)
	except OSError as e:
		log.error(f"Failed to write {path}", exc_info=True)
		if os.path.exists(tmpPath):
			try:
				os.remove(tmpPath)
			except OSError:
				pass
		raise IoError(f"cannot write {path}: {e}") from e


def read_bytes(path: str | os.PathLike[str]) -> bytes:
	try:
		with open(path, "rb") as f:
			return f.read()
	except OSError as e:
		raise IoError(f"cannot read {path}: {e}") from e


def save_bscan(bscan: BScan, path: str | os.PathLike[str]) -> None:
	"""Write a scan in the little-endian ``GPRB`` format.

	Samples are stored as float32, time-major. Float64 scans are rounded to
	float32 on the way out, so :func:`load_bscan` returns the rounded values.
	"""
	header = _BSCAN_HEADER.pack(
		BSCAN_MAGIC,
		BSCAN_VERSION,
		bscan.timeSamples,
		bscan.downtrackSamples,
		float(bscan.downtrackSpacing),
		bscan.laneId,
		bscan.runId,
	)
	payload = np.ascontiguousarray(bscan.samples, dtype="<f4").tobytes()
	atomic_write(path, header + payload)


def load_bscan(path: str | os.PathLike[str]) -> BScan:
	"""Read a scan written by :func:`save_bscan`.

	:raises FormatError: On bad magic, unknown version or a short payload.
	:raises IoError: If the file cannot be read.
	"""
	data = read_bytes(path)
	if len(data) < _BSCAN_HEADER.size:
		raise FormatError(f"{path}: truncated header")
	magic, version, nTime, nDowntrack, spacing, laneId, runId = _BSCAN_HEADER.unpack_from(data)
	if magic != BSCAN_MAGIC:
		raise FormatError(f"{path}: bad magic {magic!r}")
	if version != BSCAN_VERSION:
		raise FormatError(f"{path}: unsupported version {version}")
	expected = nTime * nDowntrack * 4
	payload = data[_BSCAN_HEADER.size :]
	if len(payload) != expected:
		raise FormatError(
			f"{path}: header declares {nTime}x{nDowntrack} samples, payload has {len(payload)} bytes"
		)
	samples = np.frombuffer(payload, dtype="<f4").reshape(nTime, nDowntrack).astype(np.float32)
	try:
		return BScan(samples=samples, downtrackSpacing=spacing, laneId=laneId, runId=runId)
	except ValueError as e:
		raise FormatError(f"{path}: {e}") from e


TRUTH_COLUMNS: tuple[str, ...] = tuple(TruthRow.__annotations__)
ALARM_COLUMNS: tuple[str, ...] = tuple(AlarmRow.__annotations__)


def _csvText(rows: Sequence[Mapping[str, object]], columns: Sequence[str], preamble: str = "") -> bytes:
	buffer = io.StringIO()
	if preamble:
		buffer.write(preamble + "\n")
	writer = csv.DictWriter(buffer, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
	writer.writeheader()
	for row in rows:
		writer.writerow({c: "" if row[c] is None else row[c] for c in columns})
	return buffer.getvalue().encode("utf-8")


def _readCsv(path: str | os.PathLike[str], columns: Sequence[str]) -> tuple[list[str], list[dict[str, str]]]:
	text = read_bytes(path).decode("utf-8")
	lines = text.splitlines()
	comments = [line for line in lines if line.startswith("#")]
	body = [line for line in lines if line and not line.startswith("#")]
	if not body:
		raise FormatError(f"{path}: missing header row")
	reader = csv.DictReader(body)
	if tuple(reader.fieldnames or ()) != tuple(columns):
		raise FormatError(f"{path}: expected columns {','.join(columns)}")
	return comments, list(reader)


def save_truth(truth: GroundTruth, path: str | os.PathLike[str]) -> None:
	"""Write a truth manifest: ``# lane_area_m2=<area>`` then a header row."""
	rows: list[TruthRow] = [
		{
			"object_id": obj.objectId,
			"lane_id": obj.laneId,
			"downtrack_position_m": obj.downtrackPosition,
			"depth_time_index": obj.depthTimeIndex,
			"amplitude": obj.amplitude,
		}
		for obj in truth.objects
	]
	atomic_write(path, _csvText(rows, TRUTH_COLUMNS, preamble=f"# lane_area_m2={truth.laneArea!r}"))


def load_truth(path: str | os.PathLike[str]) -> GroundTruth:
	comments, rows = _readCsv(path, TRUTH_COLUMNS)
	area: float | None = None
	for line in comments:
		key, _, value = line.lstrip("#").strip().partition("=")
		if key.strip() == "lane_area_m2":
			area = float(value)
	if area is None:
		raise FormatError(f"{path}: missing lane_area_m2 preamble")
	try:
		objects = tuple(
			TruthObject(
				objectId=int(row["object_id"]),
				laneId=int(row["lane_id"]),
				downtrackPosition=float(row["downtrack_position_m"]),
				depthTimeIndex=int(row["depth_time_index"]),
				amplitude=float(row["amplitude"]),
			)
			for row in rows
		)
		return GroundTruth(objects=objects, laneArea=area)
	except (KeyError, TypeError, ValueError) as e:
		raise FormatError(f"{path}: {e}") from e


def save_alarms(alarms: Sequence[Alarm], path: str | os.PathLike[str]) -> None:
	rows: list[AlarmRow] = [
		{
			"lane_id": a.laneId,
			"run_id": a.runId,
			"downtrack_index": a.downtrackIndex,
			"downtrack_position_m": a.downtrackPosition,
			"label": a.label.value,
			"truth_object_id": a.truthObjectId,
			"confidence": a.confidence,
			"cluster_id": a.clusterId,
		}
		for a in alarms
	]
	atomic_write(path, _csvText(rows, ALARM_COLUMNS))


def _optional(value: str, kind: type[int] | type[float]) -> int | float | None:
	return None if value == "" else kind(value)


def load_alarms(path: str | os.PathLike[str]) -> list[Alarm]:
	_, rows = _readCsv(path, ALARM_COLUMNS)
	try:
		alarms: list[Alarm] = []
		for row in rows:
			truthId = _optional(row["truth_object_id"], int)
			clusterId = _optional(row["cluster_id"], int)
			confidence = _optional(row["confidence"], float)
			alarms.append(
				Alarm(
					laneId=int(row["lane_id"]),
					runId=int(row["run_id"]),
					downtrackIndex=int(row["downtrack_index"]),
					downtrackPosition=float(row["downtrack_position_m"]),
					label=Label(row["label"]),
					truthObjectId=None if truthId is None else int(truthId),
					confidence=confidence,
					clusterId=None if clusterId is None else int(clusterId),
				)
			)
		return alarms
	except (KeyError, TypeError, ValueError) as e:
		raise FormatError(f"{path}: {e}") from e
