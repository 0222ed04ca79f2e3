# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""Patch descriptors: rasterized raw values, HOG and the MPEG-7 edge histogram.

Every extractor works on a stack of patches shaped ``(n, 18, 18)``; the
single-patch functions are thin wrappers used by the scoring code and tests.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .core import PATCH_SIZE, FloatArray, Patch
from .errors import ConfigError

CELL_SIZE = 6
CELLS_PER_SIDE = PATCH_SIZE // CELL_SIZE
HOG_BINS = 9
HOG_EPS = 1e-6
HOG_CLIP = 0.2
EHD_THRESHOLD = 0.15
EHD_BLOCK = 2
BLOCKS_PER_CELL = (CELL_SIZE // EHD_BLOCK) ** 2

_SQRT2 = math.sqrt(2.0)
# vertical, horizontal, 45 degree, 135 degree, non-directional
EHD_FILTERS = np.array(
	[
		[[1.0, -1.0], [1.0, -1.0]],
		[[1.0, 1.0], [-1.0, -1.0]],
		[[_SQRT2, 0.0], [0.0, -_SQRT2]],
		[[0.0, _SQRT2], [-_SQRT2, 0.0]],
		[[2.0, -2.0], [-2.0, 2.0]],
	]
)


class FeatureKind(enum.Enum):
	RAW = "raw"
	HOG = "hog"
	EHD = "ehd"

	@property
	def length(self) -> int:
		return _LENGTHS[self]


_LENGTHS = {
	FeatureKind.RAW: PATCH_SIZE * PATCH_SIZE,
	FeatureKind.HOG: CELLS_PER_SIDE * CELLS_PER_SIDE * HOG_BINS,
	FeatureKind.EHD: CELLS_PER_SIDE * CELLS_PER_SIDE * len(EHD_FILTERS),
}


@dataclass(frozen=True, eq=False)
class FeatureVector:
	values: FloatArray
	kind: FeatureKind

	def __post_init__(self) -> None:
		values = np.asarray(self.values, dtype=np.float64).reshape(-1)
		if values.shape[0] != self.kind.length:
			raise ValueError(
				f"{self.kind.value} features have length {self.kind.length}, got {values.shape[0]}"
			)
		if not np.all(np.isfinite(values)):
			raise ValueError("feature values must be finite")
		object.__setattr__(self, "values", values)


def _asStack(values: FloatArray) -> FloatArray:
	stack = np.asarray(values, dtype=np.float64)
	if stack.ndim == 2:
		stack = stack[None, :, :]
	if stack.shape[1:] != (PATCH_SIZE, PATCH_SIZE):
		raise ValueError(f"expected {PATCH_SIZE}x{PATCH_SIZE} patches, got {stack.shape[1:]}")
	return stack


def _cellView(stack: FloatArray) -> FloatArray:
	"""Reshape ``(n, 18, 18)`` into ``(n, cellRow, cellCol, 6, 6)``."""
	n = stack.shape[0]
	return stack.reshape(n, CELLS_PER_SIDE, CELL_SIZE, CELLS_PER_SIDE, CELL_SIZE).transpose(0, 1, 3, 2, 4)


def raw_stack(stack: FloatArray) -> FloatArray:
	stack = _asStack(stack)
	return stack.reshape(stack.shape[0], -1).copy()


def hog_stack(stack: FloatArray) -> FloatArray:
	"""HOG descriptors of a patch stack.

	Central-difference gradients with replicated edges, unsigned orientation,
	magnitude-weighted bilinear votes into 9 bins per 6x6 cell, and one block
	over all 3x3 cells normalized with L2-Hys.

	:param stack: Patches shaped ``(n, 18, 18)``.
	:return: Descriptors shaped ``(n, 81)``, cell-major then bin.
	"""
	stack = _asStack(stack)
	n = stack.shape[0]
	padded = np.pad(stack, ((0, 0), (1, 1), (1, 1)), mode="edge")
	gx = padded[:, 1:-1, 2:] - padded[:, 1:-1, :-2]
	gy = padded[:, 2:, 1:-1] - padded[:, :-2, 1:-1]
	magnitude = np.hypot(gx, gy)
	angle = np.degrees(np.arctan2(gy, gx)) % 180.0

	binWidth = 180.0 / HOG_BINS
	position = angle / binWidth - 0.5
	lower = np.floor(position)
	upperShare = position - lower
	lowerBin = lower.astype(np.int64) % HOG_BINS
	upperBin = (lowerBin + 1) % HOG_BINS

	rows = np.arange(PATCH_SIZE) // CELL_SIZE
	cellIndex = rows[:, None] * CELLS_PER_SIDE + rows[None, :]
	base = (np.arange(n)[:, None, None] * CELLS_PER_SIDE**2 + cellIndex[None, :, :]) * HOG_BINS
	hist = np.zeros(n * CELLS_PER_SIDE**2 * HOG_BINS, dtype=np.float64)
	np.add.at(hist, (base + lowerBin).ravel(), (magnitude * (1.0 - upperShare)).ravel())
	np.add.at(hist, (base + upperBin).ravel(), (magnitude * upperShare).ravel())
	block = hist.reshape(n, -1)

	block = block / np.sqrt(np.sum(block * block, axis=1, keepdims=True) + HOG_EPS**2)
	block = np.minimum(block, HOG_CLIP)
	block = block / np.sqrt(np.sum(block * block, axis=1, keepdims=True) + HOG_EPS**2)
	return block


def ehd_stack(stack: FloatArray) -> FloatArray:
	"""Edge histogram descriptors of a patch stack.

	Each 6x6 cell is split into nine 2x2 blocks. A block votes for the edge
	filter with the largest absolute response when that response reaches
	0.15; counts are divided by the nine blocks of the cell.

	:param stack: Patches shaped ``(n, 18, 18)``.
	:return: Descriptors shaped ``(n, 45)``, cell-major then edge type.
	"""
	stack = _asStack(stack)
	n = stack.shape[0]
	perSide = PATCH_SIZE // EHD_BLOCK
	blocks = stack.reshape(n, perSide, EHD_BLOCK, perSide, EHD_BLOCK).transpose(0, 1, 3, 2, 4)
	responses = np.abs(np.einsum("nijab,fab->nijf", blocks, EHD_FILTERS))
	strongest = responses.argmax(axis=-1)
	counted = responses.max(axis=-1) >= EHD_THRESHOLD
	votes = np.zeros((n, perSide, perSide, len(EHD_FILTERS)), dtype=np.float64)
	np.put_along_axis(votes, strongest[..., None], counted[..., None].astype(np.float64), axis=-1)
	blocksPerCellSide = CELL_SIZE // EHD_BLOCK
	cells = votes.reshape(n, CELLS_PER_SIDE, blocksPerCellSide, CELLS_PER_SIDE, blocksPerCellSide, -1)
	return cells.sum(axis=(2, 4)).reshape(n, -1) / BLOCKS_PER_CELL


def feat_raw(patch: Patch) -> FeatureVector:
	"""Row-major rasterization: ``values[18 * r + c] == patch[r, c]``."""
	return FeatureVector(values=raw_stack(patch.values)[0], kind=FeatureKind.RAW)


def feat_hog(patch: Patch) -> FeatureVector:
	return FeatureVector(values=hog_stack(patch.values)[0], kind=FeatureKind.HOG)


def feat_ehd(patch: Patch) -> FeatureVector:
	return FeatureVector(values=ehd_stack(patch.values)[0], kind=FeatureKind.EHD)


@dataclass(frozen=True)
class Featurizer:
	"""A feature kind together with its stack extractor."""

	kind: FeatureKind
	stackFn: Callable[[FloatArray], FloatArray]

	def __call__(self, patch: Patch) -> FeatureVector:
		return FeatureVector(values=self.stackFn(patch.values)[0], kind=self.kind)

	def batch(self, patches: Sequence[Patch] | FloatArray) -> FloatArray:
		"""Feature matrix with one row per patch."""
		if isinstance(patches, np.ndarray):
			stack = patches
		else:
			if not patches:
				return np.zeros((0, self.kind.length), dtype=np.float64)
			stack = np.stack([p.values for p in patches])
		if stack.shape[0] == 0:
			return np.zeros((0, self.kind.length), dtype=np.float64)
		return self.stackFn(stack)

	@property
	def name(self) -> str:
		return self.kind.value


_FEATURIZERS = {
	FeatureKind.RAW: Featurizer(FeatureKind.RAW, raw_stack),
	FeatureKind.HOG: Featurizer(FeatureKind.HOG, hog_stack),
	FeatureKind.EHD: Featurizer(FeatureKind.EHD, ehd_stack),
}


def get_featurizer(name: str | FeatureKind) -> Featurizer:
	"""Look up ``raw``, ``hog`` or ``ehd``.

	:raises ConfigError: For an unknown name.
	"""
	try:
		kind = name if isinstance(name, FeatureKind) else FeatureKind(name.strip().lower())
	except ValueError:
		raise ConfigError(f"unknown feature {name!r}; expected raw, hog or ehd") from None
	return _FEATURIZERS[kind]
