# A part of patchSelect
# Copyright (C) 2025 patchSelect contributors
# This file is covered by the GNU General Public License.
# See the file COPYING for more details.

"""SVG charts of experiment tables.

CSV stays the canonical output; charts are advisory. Every chart carries
the configuration hash as an XML comment right after the declaration, and
rendering is deterministic for a given table and hash.
"""

from __future__ import annotations

import io
import os
from collections.abc import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .core import atomic_write  # noqa: E402
from .errors import ConfigError  # noqa: E402
from .logHandler import log  # noqa: E402

# experiment -> (x column, series columns)
LINE_LAYOUTS: dict[str, tuple[str, tuple[str, ...]]] = {
	"fig5": ("far2", ("strategy",)),
	"fig6": ("top_l", ("nontarget_sampler", "ordering")),
	"fig7": ("top_l", ("nontarget_sampler",)),
	"fig8": ("top_l", ("target_k",)),
}


def _svgBytes(fig: Figure, configHash: str) -> bytes:
	buffer = io.BytesIO()
	with plt.rc_context({"svg.hashsalt": configHash or "patchSelect", "svg.fonttype": "none"}):
		fig.savefig(buffer, format="svg", metadata={"Date": None}, bbox_inches="tight")
	plt.close(fig)
	text = buffer.getvalue().decode("utf-8")
	comment = f"<!-- config_hash: {configHash} -->\n"
	head, sep, rest = text.partition("?>\n")
	if sep:
		return (head + sep + comment + rest).encode("utf-8")
	return (comment + text).encode("utf-8")


def bar_chart(table: pd.DataFrame, path: str | os.PathLike[str], configHash: str, title: str = "") -> None:
	"""Grouped bars of mean pAUC: one group per strategy, one bar per feature and classifier.

	:param table: Rows with ``strategy``, ``feature``, ``classifier`` and ``pauc_mean``.
	"""
	pivot = table.pivot_table(
		index="strategy", columns=["feature", "classifier"], values="pauc_mean", sort=True
	)
	fig, ax = plt.subplots(figsize=(10, 4))
	nSeries = max(len(pivot.columns), 1)
	width = 0.8 / nSeries
	x = np.arange(len(pivot.index))
	for i, column in enumerate(pivot.columns):
		label = "+".join(str(part) for part in column) if isinstance(column, tuple) else str(column)
		ax.bar(x + (i - (nSeries - 1) / 2) * width, pivot[column].to_numpy(), width, label=label)
	ax.set_xticks(x, [str(s) for s in pivot.index])
	ax.set_xlabel("strategy")
	ax.set_ylabel("normalized pAUC")
	ax.set_title(title)
	ax.legend(fontsize="small", ncols=3)
	atomic_write(path, _svgBytes(fig, configHash))
	log.info(f"wrote chart {path}")


def line_chart(
	table: pd.DataFrame,
	path: str | os.PathLike[str],
	configHash: str,
	x: str,
	series: Sequence[str],
	title: str = "",
) -> None:
	"""One line per combination of ``series`` values over ``x``.

	Error bars run from ``pauc_min`` to ``pauc_max``.
	"""
	fig, ax = plt.subplots(figsize=(7, 4))
	for name, group in table.groupby(list(series), sort=True):
		parts = name if isinstance(name, tuple) else (name,)
		label = "/".join(str(part) for part in parts)
		group = group.sort_values(x)
		xs = group[x].astype(float).to_numpy()
		mean = group["pauc_mean"].astype(float).to_numpy()
		lower = mean - group["pauc_min"].astype(float).to_numpy()
		upper = group["pauc_max"].astype(float).to_numpy() - mean
		ax.errorbar(
			xs, mean, yerr=np.vstack([lower, upper]), label=label, capsize=3, marker="o", markersize=3
		)
	ax.set_xlabel(x)
	ax.set_ylabel("normalized pAUC")
	ax.set_title(title)
	ax.legend(fontsize="small")
	atomic_write(path, _svgBytes(fig, configHash))
	log.info(f"wrote chart {path}")


def rank_chart(averageRanks: pd.Series, path: str | os.PathLike[str], configHash: str) -> None:
	"""Horizontal bars of average rank per strategy, best at the top."""
	ordered = averageRanks.sort_values(ascending=False, kind="stable")
	fig, ax = plt.subplots(figsize=(6, 0.35 * len(ordered) + 1))
	ax.barh([str(s) for s in ordered.index], ordered.to_numpy())
	ax.set_xlabel("average rank")
	atomic_write(path, _svgBytes(fig, configHash))
	log.info(f"wrote chart {path}")


def render_experiment(
	experiment: str, table: pd.DataFrame, path: str | os.PathLike[str], configHash: str
) -> None:
	"""Draw the chart layout that belongs to an experiment table.

	:raises ConfigError: If the experiment has no chart layout.
	"""
	if experiment in ("fig4", "single"):
		bar_chart(table, path, configHash, title=experiment)
		return
	if experiment not in LINE_LAYOUTS:
		raise ConfigError(f"no chart layout for experiment {experiment!r}")
	x, series = LINE_LAYOUTS[experiment]
	line_chart(table, path, configHash, x, series, title=experiment)
