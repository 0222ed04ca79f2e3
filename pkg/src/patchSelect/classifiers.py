# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""RBF support vector machine and random forest, trained from scratch.

Both models map a feature row to a real decision statistic where larger
means more target-like. Models are immutable and can be shared between
worker processes or cached on disk in the ``GPRM`` format.
"""

from __future__ import annotations

import enum
import os
import struct
from collections import OrderedDict
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .core import FloatArray, atomic_write, derive_seed, read_bytes
from .errors import ConfigError, DegenerateData, FormatError, KindMismatch
from .features import FeatureKind, FeatureVector
from .logHandler import log

N_TREES = 100
MTRY = 2
QUAD_FLOOR = 1e-12
KERNEL_CACHE_BYTES = 256 * 1024 * 1024

MODEL_MAGIC = b"GPRM"
MODEL_VERSION = 1
# magic, version, model type, feature kind
_MODEL_HEADER = struct.Struct("<4sHBB")
_SVM_HEADER = struct.Struct("<IIddd")
_FOREST_HEADER = struct.Struct("<II")
_TREE_HEADER = struct.Struct("<I")

IntArray = npt.NDArray[np.int64]


class ClassifierName(enum.Enum):
	SVM = "svm"
	RF = "rf"


_KIND_CODES = {FeatureKind.RAW: 1, FeatureKind.HOG: 2, FeatureKind.EHD: 3}
_MODEL_CODES = {ClassifierName.SVM: 1, ClassifierName.RF: 2}


@dataclass(frozen=True, eq=False)
class TrainingSet:
	"""Feature rows with +1/-1 labels and the alarm each row came from."""

	features: FloatArray
	labels: IntArray
	provenance: tuple[str, ...]
	kind: FeatureKind

	def __post_init__(self) -> None:
		features = np.asarray(self.features, dtype=np.float64)
		labels = np.asarray(self.labels, dtype=np.int64)
		if features.ndim != 2 or features.shape[1] != self.kind.length:
			raise ValueError(
				f"expected rows of {self.kind.length} {self.kind.value} features, got {features.shape}"
			)
		if not features.shape[0] == labels.shape[0] == len(self.provenance):
			raise ValueError("features, labels and provenance must have equal lengths")
		if not np.all(np.isin(labels, (-1, 1))):
			raise ValueError("labels must be +1 or -1")
		if not (np.any(labels == 1) and np.any(labels == -1)):
			raise DegenerateData("training set needs both target and non-target rows")
		object.__setattr__(self, "features", features)
		object.__setattr__(self, "labels", labels)

	@classmethod
	def fromVectors(
		cls,
		vectors: Sequence[FeatureVector],
		labels: Sequence[int],
		provenance: Sequence[str] | None = None,
	) -> TrainingSet:
		if not vectors:
			raise DegenerateData("training set is empty")
		kinds = {v.kind for v in vectors}
		if len(kinds) != 1:
			raise KindMismatch("training set mixes feature kinds")
		return cls(
			features=np.stack([v.values for v in vectors]),
			labels=np.asarray(labels, dtype=np.int64),
			provenance=tuple(provenance) if provenance is not None else tuple("" for _ in vectors),
			kind=vectors[0].kind,
		)

	def __len__(self) -> int:
		return int(self.labels.shape[0])


@dataclass(frozen=True, eq=False)
class SvmModel:
	"""Support vectors with their multipliers ``0 <= alpha <= C``."""

	supportVectors: FloatArray
	alpha: FloatArray
	svLabels: IntArray
	bias: float
	gamma: float
	C: float
	featureKind: FeatureKind

	@property
	def dualCoef(self) -> FloatArray:
		return self.alpha * self.svLabels

	def decision(self, X: FloatArray) -> FloatArray:
		if self.supportVectors.shape[0] == 0:
			return np.full(X.shape[0], self.bias)
		return rbf_kernel(X, self.supportVectors, self.gamma) @ self.dualCoef + self.bias


@dataclass(frozen=True, eq=False)
class Tree:
	"""Flat binary tree; ``feature == -1`` marks a leaf holding its vote in ``value``."""

	feature: npt.NDArray[np.int32]
	threshold: FloatArray
	left: npt.NDArray[np.int32]
	right: npt.NDArray[np.int32]
	value: FloatArray

	def apply(self, X: FloatArray) -> FloatArray:
		node = np.zeros(X.shape[0], dtype=np.int64)
		rows = np.arange(X.shape[0])
		active = self.feature[node] >= 0
		while np.any(active):
			idx = rows[active]
			current = node[idx]
			goLeft = X[idx, self.feature[current]] <= self.threshold[current]
			node[idx] = np.where(goLeft, self.left[current], self.right[current])
			active = self.feature[node] >= 0
		return self.value[node]

	@property
	def nodeCount(self) -> int:
		return int(self.feature.shape[0])


@dataclass(frozen=True, eq=False)
class ForestModel:
	trees: tuple[Tree, ...]
	nFeatures: int
	featureKind: FeatureKind

	def decision(self, X: FloatArray) -> FloatArray:
		votes = np.zeros(X.shape[0], dtype=np.float64)
		for tree in self.trees:
			votes += tree.apply(X)
		return votes / len(self.trees)


Model = SvmModel | ForestModel


@dataclass(frozen=True)
class ClassifierConfig:
	"""Which classifier to train and its hyperparameters.

	:ivar gamma: RBF width; ``None`` picks ``1 / (dim * mean feature variance)``.
	:ivar C: Soft-margin penalty.
	:ivar tol: KKT tolerance of the SVM solver.
	:ivar seed: Forest seed; bootstrap and feature draws derive from it.
	"""

	name: ClassifierName = ClassifierName.SVM
	gamma: float | None = None
	C: float = 1.0
	tol: float = 1e-3
	seed: int = 0

	def __post_init__(self) -> None:
		if self.gamma is not None and not self.gamma > 0:
			raise ConfigError("svm gamma must be positive")
		if not self.C > 0 or not self.tol > 0:
			raise ConfigError("svm C and tol must be positive")

	@property
	def label(self) -> str:
		return self.name.value


def rbf_kernel(X: FloatArray, Z: FloatArray, gamma: float) -> FloatArray:
	"""``exp(-gamma * |x - z|^2)`` for every row pair."""
	sq = np.sum(X * X, axis=1)[:, None] + np.sum(Z * Z, axis=1)[None, :] - 2.0 * (X @ Z.T)
	np.maximum(sq, 0.0, out=sq)
	return np.exp(-gamma * sq)


def default_gamma(features: FloatArray) -> float:
	variance = float(np.mean(np.var(features, axis=0)))
	if variance <= 0:
		return 1.0
	return 1.0 / (features.shape[1] * variance)


class _KernelRows:
	"""Kernel matrix rows computed on demand and kept in an LRU cache."""

	def __init__(self, X: FloatArray, gamma: float) -> None:
		self._X = X
		self._sq = np.sum(X * X, axis=1)
		self._gamma = gamma
		self._rows: OrderedDict[int, FloatArray] = OrderedDict()
		self._capacity = max(2, KERNEL_CACHE_BYTES // max(1, 8 * X.shape[0]))

	def __getitem__(self, i: int) -> FloatArray:
		row = self._rows.get(i)
		if row is not None:
			self._rows.move_to_end(i)
			return row
		sq = self._sq + self._sq[i] - 2.0 * (self._X @ self._X[i])
		row = np.exp(-self._gamma * np.maximum(sq, 0.0))
		row[i] = 1.0
		self._rows[i] = row
		if len(self._rows) > self._capacity:
			self._rows.popitem(last=False)
		return row


def train_svm(ts: TrainingSet, gamma: float | None = None, C: float = 1.0, tol: float = 1e-3) -> SvmModel:
	"""Solve the soft-margin RBF dual by sequential pairwise optimization.

	The working pair is the maximal violating pair, ties resolved by the
	smaller index. Iteration stops once the largest KKT violation drops
	below ``tol``.

	:param ts: Training rows.
	:param gamma: RBF width, or ``None`` for the variance-based default.
	:param C: Box constraint.
	:param tol: KKT tolerance.
	:raises DegenerateData: If either class is missing.
	"""
	if gamma is None:
		gamma = default_gamma(ts.features)
	if not gamma > 0 or not C > 0:
		raise ConfigError("svm gamma and C must be positive")
	y = ts.labels.astype(np.float64)
	n = len(ts)
	# signed multipliers a = y * alpha live in [lower, upper]
	lower = np.minimum(0.0, C * y)
	upper = np.maximum(0.0, C * y)
	a = np.zeros(n, dtype=np.float64)
	g = y.copy()
	kernel = _KernelRows(ts.features, gamma)
	maxIterations = max(10_000_000, 100 * n)

	iteration = 0
	while True:
		upMask = a < upper
		lowMask = a > lower
		if not upMask.any() or not lowMask.any():
			break
		i = int(np.argmax(np.where(upMask, g, -np.inf)))
		j = int(np.argmin(np.where(lowMask, g, np.inf)))
		gap = g[i] - g[j]
		if gap < tol:
			break
		if iteration >= maxIterations:
			log.warning(f"SMO stopped after {iteration} iterations with KKT gap {gap:.3g}")
			break
		rowI = kernel[i]
		rowJ = kernel[j]
		quad = max(rowI[i] + rowJ[j] - 2.0 * rowI[j], QUAD_FLOOR)
		step = min(upper[i] - a[i], a[j] - lower[j], gap / quad)
		a[i] += step
		a[j] -= step
		g -= step * (rowI - rowJ)
		iteration += 1

	free = (a > lower) & (a < upper)
	if free.any():
		bias = float(np.mean(g[free]))
	else:
		upG = g[a < upper]
		lowG = g[a > lower]
		top = float(upG.max()) if upG.size else 0.0
		bottom = float(lowG.min()) if lowG.size else 0.0
		bias = 0.5 * (top + bottom)

	support = a != 0.0
	log.debug(f"SMO converged in {iteration} iterations with {int(support.sum())} support vectors")
	return SvmModel(
		supportVectors=ts.features[support].copy(),
		alpha=np.abs(a[support]),
		svLabels=ts.labels[support].copy(),
		bias=bias,
		gamma=float(gamma),
		C=float(C),
		featureKind=ts.kind,
	)


def _bestSplit(values: FloatArray, labels: FloatArray) -> tuple[float, float] | None:
	"""Gini-optimal threshold on one feature as ``(weighted impurity, threshold)``."""
	order = np.argsort(values, kind="stable")
	v = values[order]
	positives = np.cumsum(labels[order])
	n = v.shape[0]
	valid = np.nonzero(v[1:] > v[:-1])[0]
	if valid.size == 0:
		return None
	nLeft = (valid + 1).astype(np.float64)
	nRight = n - nLeft
	posLeft = positives[valid]
	posRight = positives[-1] - posLeft
	pLeft = posLeft / nLeft
	pRight = posRight / nRight
	impurity = (nLeft * 2.0 * pLeft * (1.0 - pLeft) + nRight * 2.0 * pRight * (1.0 - pRight)) / n
	best = int(np.argmin(impurity))
	k = int(valid[best])
	threshold = 0.5 * (v[k] + v[k + 1])
	if threshold >= v[k + 1]:
		threshold = float(v[k])
	return float(impurity[best]), float(threshold)


def _growTree(X: FloatArray, targets: FloatArray, rng: np.random.Generator) -> Tree:
	feature: list[int] = []
	threshold: list[float] = []
	left: list[int] = []
	right: list[int] = []
	value: list[float] = []

	def newNode() -> int:
		feature.append(-1)
		threshold.append(0.0)
		left.append(-1)
		right.append(-1)
		value.append(0.0)
		return len(feature) - 1

	nFeatures = X.shape[1]
	stack = [(newNode(), np.arange(X.shape[0]))]
	while stack:
		node, rows = stack.pop()
		nodeTargets = targets[rows]
		positives = float(nodeTargets.sum())
		# pure leaves vote 0 or 1; a leaf that cannot split keeps its target fraction
		value[node] = positives / rows.shape[0]
		if rows.shape[0] < 2 or positives == 0 or positives == rows.shape[0]:
			continue
		candidates = rng.permutation(nFeatures)
		best: tuple[float, float, int] | None = None
		tried = 0
		for f in candidates:
			split = _bestSplit(X[rows, f], nodeTargets)
			if split is None:
				continue
			tried += 1
			if best is None or split[0] < best[0]:
				best = (split[0], split[1], int(f))
			if tried == MTRY:
				break
		if best is None:
			continue
		_, cut, f = best
		goLeft = X[rows, f] <= cut
		feature[node] = f
		threshold[node] = cut
		leftNode = newNode()
		rightNode = newNode()
		left[node] = leftNode
		right[node] = rightNode
		stack.append((rightNode, rows[~goLeft]))
		stack.append((leftNode, rows[goLeft]))

	return Tree(
		feature=np.asarray(feature, dtype=np.int32),
		threshold=np.asarray(threshold, dtype=np.float64),
		left=np.asarray(left, dtype=np.int32),
		right=np.asarray(right, dtype=np.int32),
		value=np.asarray(value, dtype=np.float64),
	)


def train_rf(ts: TrainingSet, seed: int = 0) -> ForestModel:
	"""Grow 100 unpruned trees on bootstrap resamples.

	Each node draws two features that can still split its rows and keeps the
	axis-aligned Gini-optimal cut; growth stops at pure nodes or single rows.
	A pure leaf votes for its class. A leaf whose rows share identical
	features but not labels votes its target fraction.

	:param ts: Training rows.
	:param seed: Determines every bootstrap and feature draw.
	"""
	targets = (ts.labels == 1).astype(np.float64)
	n = len(ts)
	trees: list[Tree] = []
	for treeIndex in range(N_TREES):
		rng = np.random.default_rng(derive_seed(seed, treeIndex))
		rows = rng.integers(0, n, size=n)
		trees.append(_growTree(ts.features[rows], targets[rows], rng))
	log.debug(f"forest grown with {sum(t.nodeCount for t in trees)} nodes over {n} rows")
	return ForestModel(trees=tuple(trees), nFeatures=ts.features.shape[1], featureKind=ts.kind)


def train_classifier(cfg: ClassifierConfig, ts: TrainingSet) -> Model:
	if cfg.name is ClassifierName.SVM:
		return train_svm(ts, gamma=cfg.gamma, C=cfg.C, tol=cfg.tol)
	return train_rf(ts, seed=cfg.seed)


def _checkRows(model: Model, X: FloatArray) -> FloatArray:
	X = np.asarray(X, dtype=np.float64)
	if X.ndim == 1:
		X = X[None, :]
	if X.shape[1] != model.featureKind.length:
		raise KindMismatch(
			f"model expects {model.featureKind.value} rows of length {model.featureKind.length}"
		)
	return X


def predict_batch(model: Model, X: FloatArray) -> FloatArray:
	"""Decision statistics for a feature matrix with one row per patch."""
	X = _checkRows(model, X)
	if X.shape[0] == 0:
		return np.zeros(0, dtype=np.float64)
	return model.decision(X)


def predict(model: Model, x: FeatureVector) -> float:
	"""Signed margin for an SVM, fraction of trees voting target for a forest.

	:raises KindMismatch: If ``x`` is not the kind the model was trained on.
	"""
	if x.kind is not model.featureKind:
		raise KindMismatch(f"model trained on {model.featureKind.value}, got {x.kind.value}")
	return float(predict_batch(model, x.values)[0])


def _arrayBytes(values: npt.NDArray[np.generic], dtype: str) -> bytes:
	return np.ascontiguousarray(values, dtype=dtype).tobytes()


def save_model(model: Model, path: str | os.PathLike[str]) -> None:
	"""Write a model as a little-endian ``GPRM`` blob."""
	if isinstance(model, SvmModel):
		nSv, dim = model.supportVectors.shape
		parts = [
			_MODEL_HEADER.pack(
				MODEL_MAGIC, MODEL_VERSION, _MODEL_CODES[ClassifierName.SVM], _KIND_CODES[model.featureKind]
			),
			_SVM_HEADER.pack(nSv, dim, model.gamma, model.bias, model.C),
			_arrayBytes(model.alpha, "<f8"),
			_arrayBytes(model.svLabels, "<i1"),
			_arrayBytes(model.supportVectors, "<f8"),
		]
	else:
		parts = [
			_MODEL_HEADER.pack(
				MODEL_MAGIC, MODEL_VERSION, _MODEL_CODES[ClassifierName.RF], _KIND_CODES[model.featureKind]
			),
			_FOREST_HEADER.pack(len(model.trees), model.nFeatures),
		]
		for tree in model.trees:
			parts.append(_TREE_HEADER.pack(tree.nodeCount))
			parts.append(_arrayBytes(tree.feature, "<i4"))
			parts.append(_arrayBytes(tree.threshold, "<f8"))
			parts.append(_arrayBytes(tree.left, "<i4"))
			parts.append(_arrayBytes(tree.right, "<i4"))
			parts.append(_arrayBytes(tree.value, "<f8"))
	atomic_write(path, b"".join(parts))


class _Reader:
	def __init__(self, data: bytes, path: str) -> None:
		self._data = data
		self._offset = 0
		self._path = path

	def unpack(self, fmt: struct.Struct) -> tuple[object, ...]:
		if self._offset + fmt.size > len(self._data):
			raise FormatError(f"{self._path}: truncated model")
		values = fmt.unpack_from(self._data, self._offset)
		self._offset += fmt.size
		return values

	def array(self, dtype: str, count: int) -> npt.NDArray[np.generic]:
		size = np.dtype(dtype).itemsize * count
		if self._offset + size > len(self._data):
			raise FormatError(f"{self._path}: truncated model")
		values = np.frombuffer(self._data, dtype=dtype, count=count, offset=self._offset).copy()
		self._offset += size
		return values

	def finish(self) -> None:
		if self._offset != len(self._data):
			raise FormatError(f"{self._path}: trailing bytes after model")


def load_model(path: str | os.PathLike[str]) -> Model:
	"""Read a model written by :func:`save_model`.

	:raises FormatError: On bad magic, unknown version or codes, or truncation.
	"""
	reader = _Reader(read_bytes(path), os.fspath(path))
	magic, version, modelCode, kindCode = reader.unpack(_MODEL_HEADER)
	if magic != MODEL_MAGIC:
		raise FormatError(f"{path}: bad magic {magic!r}")
	if version != MODEL_VERSION:
		raise FormatError(f"{path}: unsupported version {version}")
	kinds = {code: kind for kind, code in _KIND_CODES.items()}
	if kindCode not in kinds:
		raise FormatError(f"{path}: unknown feature kind code {kindCode}")
	kind = kinds[int(kindCode)]  # pyright: ignore[reportArgumentType]
	if modelCode == _MODEL_CODES[ClassifierName.SVM]:
		nSv, dim, gamma, bias, C = reader.unpack(_SVM_HEADER)
		nSv = int(nSv)  # pyright: ignore[reportArgumentType]
		dim = int(dim)  # pyright: ignore[reportArgumentType]
		alpha = reader.array("<f8", nSv).astype(np.float64)
		labels = reader.array("<i1", nSv).astype(np.int64)
		vectors = reader.array("<f8", nSv * dim).astype(np.float64).reshape(nSv, dim)
		reader.finish()
		return SvmModel(
			supportVectors=vectors,
			alpha=alpha,
			svLabels=labels,
			bias=float(bias),  # pyright: ignore[reportArgumentType]
			gamma=float(gamma),  # pyright: ignore[reportArgumentType]
			C=float(C),  # pyright: ignore[reportArgumentType]
			featureKind=kind,
		)
	if modelCode == _MODEL_CODES[ClassifierName.RF]:
		nTrees, nFeatures = reader.unpack(_FOREST_HEADER)
		trees: list[Tree] = []
		for _ in range(int(nTrees)):  # pyright: ignore[reportArgumentType]
			(nNodes,) = reader.unpack(_TREE_HEADER)
			count = int(nNodes)  # pyright: ignore[reportArgumentType]
			trees.append(
				Tree(
					feature=reader.array("<i4", count).astype(np.int32),
					threshold=reader.array("<f8", count).astype(np.float64),
					left=reader.array("<i4", count).astype(np.int32),
					right=reader.array("<i4", count).astype(np.int32),
					value=reader.array("<f8", count).astype(np.float64),
				)
			)
		reader.finish()
		return ForestModel(
			trees=tuple(trees),
			nFeatures=int(nFeatures),
			featureKind=kind,  # pyright: ignore[reportArgumentType]
		)
	raise FormatError(f"{path}: unknown model type code {modelCode}")
