# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

from __future__ import annotations

import numpy as np
import pytest

from patchSelect.core import Keypoint, Patch, rescale_window
from patchSelect.errors import ConfigError
from patchSelect.features import (
	FeatureKind,
	FeatureVector,
	feat_ehd,
	feat_hog,
	feat_raw,
	get_featurizer,
	hog_stack,
)


def _patch(values: np.ndarray) -> Patch:
	return Patch(values=values, sourceAlarm="0-0-0", sourceKeypoint=Keypoint(0, 0, 0.0))


def test_feature_lengths():
	assert [kind.length for kind in FeatureKind] == [324, 81, 45]
	with pytest.raises(ValueError):
		FeatureVector(values=np.zeros(80), kind=FeatureKind.HOG)


def test_raw_is_row_major(rng: np.random.Generator):
	values = rng.uniform(-1, 1, size=(18, 18))
	vector = feat_raw(_patch(values)).values
	assert vector.shape == (324,)
	for r, c in [(0, 0), (0, 17), (5, 3), (17, 0), (17, 17)]:
		assert vector[18 * r + c] == values[r, c]
	assert np.array_equal(vector.reshape(18, 18), values)
	assert np.all(feat_raw(_patch(np.zeros((18, 18)))).values == 0)


def test_hog_constant_patch_is_zero():
	vector = feat_hog(_patch(np.full((18, 18), 0.4))).values
	assert vector.shape == (81,)
	assert np.all(vector == 0.0)


def test_hog_vertical_ramp_votes_for_ninety_degrees():
	ramp = rescale_window(np.repeat(np.arange(18.0)[:, None], 18, axis=1))
	cells = feat_hog(_patch(ramp)).values.reshape(9, 9)
	# bin 4 is centered on 90 degrees
	assert np.all(cells[:, 4] > 0)
	np.testing.assert_allclose(np.delete(cells, 4, axis=1), 0.0, atol=1e-9)


def test_hog_horizontal_ramp_votes_for_zero_degrees():
	ramp = rescale_window(np.repeat(np.arange(18.0)[None, :], 18, axis=0))
	cells = feat_hog(_patch(ramp)).values.reshape(9, 9)
	# 0 degrees sits on the border of the first and last bins
	np.testing.assert_allclose(cells[:, 0], cells[:, 8])
	np.testing.assert_allclose(cells[:, 1:8], 0.0, atol=1e-9)


def test_hog_normalized_and_offset_invariant(rng: np.random.Generator):
	stack = rng.uniform(-1, 1, size=(20, 18, 18))
	vectors = hog_stack(stack)
	assert np.all(vectors >= 0)
	assert np.all(np.linalg.norm(vectors, axis=1) <= 1 + 1e-6)
	np.testing.assert_allclose(hog_stack(stack + 0.3), vectors, atol=1e-12)


def test_ehd_constant_patch_is_zero():
	vector = feat_ehd(_patch(np.full((18, 18), -0.2))).values
	assert vector.shape == (45,)
	assert np.all(vector == 0.0)


def test_ehd_step_marks_vertical_edges():
	step = np.where(np.arange(18) < 9, -1.0, 1.0)[None, :].repeat(18, axis=0)
	cells = feat_ehd(_patch(step)).values.reshape(3, 3, 5)
	expected = np.zeros((3, 3, 5))
	# the step lies inside block column 4, the middle cell column
	expected[:, 1, 0] = 3 / 9
	np.testing.assert_allclose(cells, expected)


def test_ehd_values_are_block_fractions(rng: np.random.Generator):
	vector = feat_ehd(_patch(rng.uniform(-1, 1, size=(18, 18)))).values
	assert np.all((vector >= 0) & (vector <= 1))
	np.testing.assert_allclose(vector * 9, np.round(vector * 9), atol=1e-12)
	assert vector.reshape(9, 5).sum(axis=1).max() <= 1 + 1e-12


def test_batch_matches_single(rng: np.random.Generator):
	patches = [_patch(rng.uniform(-1, 1, size=(18, 18))) for _ in range(5)]
	for name in ("raw", "hog", "ehd"):
		featurizer = get_featurizer(name)
		matrix = featurizer.batch(patches)
		assert matrix.shape == (5, featurizer.kind.length)
		for row, patch in zip(matrix, patches):
			np.testing.assert_allclose(row, featurizer(patch).values)
		assert featurizer.batch([]).shape == (0, featurizer.kind.length)


def test_get_featurizer():
	assert get_featurizer(" HOG ").kind is FeatureKind.HOG
	assert get_featurizer(FeatureKind.EHD).name == "ehd"
	with pytest.raises(ConfigError):
		get_featurizer("sift")
