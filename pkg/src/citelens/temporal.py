"""Descriptive temporal statistics of a citation graph.

Series are returned as :class:`BinnedSeries`. Raw series use one bin per
integer value (month or count); :func:`rebin_log2` folds them into base-2
logarithmic bins for heavy-tailed displays. Missing values (a zero
denominator under normalization, or an empty bin in a mean) are NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import CitationGraph, Document
from .errors import AnalysisError, EmptyResultError

NORMALIZATIONS = ("raw_count", "probability", "per_total_citations", "mean")


@dataclass
class BinnedSeries:
    bin_edges: np.ndarray
    values: np.ndarray
    normalization: str = "raw_count"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.bin_edges) != len(self.values) + 1:
            raise ValueError("bin_edges must have exactly one more entry than values")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin_edges must be strictly increasing")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def bin_lo(self) -> np.ndarray:
        return self.bin_edges[:-1]

    @property
    def bin_hi(self) -> np.ndarray:
        return self.bin_edges[1:]

    def __len__(self) -> int:
        return len(self.values)

    def scaled(self, factor: float) -> "BinnedSeries":
        return BinnedSeries(self.bin_edges, self.values * factor, self.normalization, dict(self.meta))


@dataclass(frozen=True)
class TailFit:
    exponent: float
    intercept: float
    fit_range: tuple[float, float]
    r_squared: float
    n_points: int


def _integer_histogram(samples: Sequence[int], lo: int | None = None) -> BinnedSeries:
    samples = np.asarray(samples, dtype=np.int64)
    if lo is None:
        lo = int(samples.min()) if len(samples) else 0
    hi = int(samples.max()) + 1 if len(samples) else lo + 1
    counts = np.bincount(samples - lo, minlength=hi - lo) if len(samples) else np.zeros(1)
    return BinnedSeries(np.arange(lo, hi + 1), counts)


def _normalize(series: BinnedSeries, normalization: str) -> BinnedSeries:
    if normalization == "raw_count":
        return series
    if normalization != "probability":
        raise ValueError(f"unsupported normalization {normalization!r}")
    total = series.values.sum()
    if total <= 0:
        raise EmptyResultError("cannot normalize an empty distribution")
    return BinnedSeries(series.bin_edges, series.values / total, "probability", series.meta)


def rebin_log2(series: BinnedSeries, density: bool = False) -> BinnedSeries:
    """Sum a raw integer-binned series into bins [0,1), [1,2), [2,4), [4,8), ...

    Requires nonnegative bin edges. With ``density`` each sum is divided by
    the bin width so a power law stays a straight line on log-log axes.
    """
    lo = series.bin_lo
    if len(lo) and lo.min() < 0:
        raise ValueError("log2 rebinning needs nonnegative bins")
    top = series.bin_hi.max() if len(lo) else 1
    edges = [0.0, 1.0]
    while edges[-1] < top:
        edges.append(edges[-1] * 2)
    edges = np.array(edges)
    which = np.searchsorted(edges, lo, side="right") - 1
    vals = np.nan_to_num(series.values)
    sums = np.bincount(which, weights=vals, minlength=len(edges) - 1)
    if density:
        sums = sums / np.diff(edges)
    return BinnedSeries(edges, sums, series.normalization, dict(series.meta, log2=True, density=density))


def activity_series(graph: CitationGraph, bin_width_months: int = 1) -> tuple[BinnedSeries, BinnedSeries]:
    """New documents and new citation edges per time bin (edges dated by the citing document)."""
    if graph.n_documents == 0:
        raise EmptyResultError("graph has no documents")
    if bin_width_months <= 0:
        raise ValueError("bin_width_months must be positive")
    months = np.array(graph.months(), dtype=np.int64)
    start = int(months.min())
    nbins = (int(months.max()) - start) // bin_width_months + 1
    which = (months - start) // bin_width_months
    out_deg = np.array([len(graph.refs(i)) for i in range(graph.n_documents)])
    nodes = np.bincount(which, minlength=nbins)
    edges = np.bincount(which, weights=out_deg, minlength=nbins)
    bin_edges = start + bin_width_months * np.arange(nbins + 1)
    meta = {"unit": "month", "bin_width_months": bin_width_months}
    return BinnedSeries(bin_edges, nodes, meta=dict(meta)), BinnedSeries(bin_edges, edges, meta=dict(meta))


def citation_count_distribution(
    graph: CitationGraph,
    cohort_filter: Callable[[Document], bool] | None = None,
    normalization: str = "raw_count",
) -> BinnedSeries:
    """Histogram of total in-degree over the selected documents.

    ``meta["fraction_below_10"]`` is the share of documents cited fewer than ten times.
    """
    idx = graph.select(cohort_filter)
    if not idx:
        raise EmptyResultError("cohort filter matched no documents")
    deg = np.array([len(graph.cited_by(i)) for i in idx])
    series = _integer_histogram(deg, lo=0)
    series.meta.update(
        unit="citations",
        n_documents=len(idx),
        fraction_below_10=float(np.mean(deg < 10)),
    )
    return _normalize(series, normalization)


def citations_vs_references(graph: CitationGraph) -> BinnedSeries:
    """Mean in-degree for each out-degree value; empty out-degree bins are missing."""
    if graph.n_documents == 0:
        raise EmptyResultError("graph has no documents")
    n = graph.n_documents
    out_deg = np.array([len(graph.refs(i)) for i in range(n)])
    in_deg = np.array([len(graph.cited_by(i)) for i in range(n)], dtype=float)
    lo = int(out_deg.min())
    size = int(out_deg.max()) - lo + 1
    counts = np.bincount(out_deg - lo, minlength=size)
    sums = np.bincount(out_deg - lo, weights=in_deg, minlength=size)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return BinnedSeries(
        np.arange(lo, lo + size + 1), means, "mean", {"unit": "references", "n_per_bin": counts.tolist()}
    )


def time_to_first_citation(
    graph: CitationGraph,
    cohort_filter: Callable[[Document], bool] | None = None,
    normalization: str = "raw_count",
) -> BinnedSeries:
    """Distribution of months from publication to first citation.

    Only documents cited at least once are binned; the rest are counted in
    ``meta["uncited"]``.
    """
    idx = graph.select(cohort_filter)
    if not idx:
        raise EmptyResultError("cohort filter matched no documents")
    deltas = []
    uncited = 0
    for i in idx:
        cm = graph.cited_by_months(i)
        if cm:
            deltas.append(cm[0] - graph.month_at(i))
        else:
            uncited += 1
    if deltas:
        series = _integer_histogram(deltas, lo=min(0, min(deltas)))
    else:
        series = BinnedSeries([0, 1], [0])
    series.meta.update(unit="month", uncited=uncited, n_documents=len(idx))
    return _normalize(series, normalization) if deltas else series


def citation_age_curve(
    graph: CitationGraph,
    cohort_month: int,
    normalize: bool = False,
    max_age: int | None = None,
) -> BinnedSeries:
    """Citations received at age dt by documents published in ``cohort_month``.

    With ``normalize`` each value is divided by all citations made in month
    ``cohort_month + dt``; months with no citations at all are missing.
    """
    cohort = [i for i in range(graph.n_documents) if graph.month_at(i) == cohort_month]
    if not cohort:
        raise EmptyResultError(f"no documents published in month {cohort_month}")
    last = graph.horizon - 1 if max_age is None else cohort_month + max_age
    size = max(last - cohort_month + 1, 1)
    raw = np.zeros(size)
    for i in cohort:
        for m in graph.cited_by_months(i):
            dt = m - cohort_month
            if 0 <= dt < size:
                raw[dt] += 1
    meta = {"unit": "month", "cohort_month": cohort_month, "cohort_size": len(cohort)}
    edges = np.arange(size + 1)
    if not normalize:
        return BinnedSeries(edges, raw, "raw_count", meta)
    totals = np.zeros(size)
    for i in range(graph.n_documents):
        dt = graph.month_at(i) - cohort_month
        if 0 <= dt < size:
            totals[dt] += len(graph.refs(i))
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(totals > 0, raw / np.maximum(totals, 1), np.nan)
    return BinnedSeries(edges, values, "per_total_citations", meta)


def last_citation_stats(
    graph: CitationGraph, horizon_month: int | None = None
) -> tuple[BinnedSeries, BinnedSeries]:
    """Age at last citation and time since last citation (from ``horizon_month``).

    ``horizon_month`` defaults to the last publication month in the graph.
    Documents never cited are excluded from both series.
    """
    if graph.n_documents == 0:
        raise EmptyResultError("graph has no documents")
    horizon_month = graph.last_month if horizon_month is None else horizon_month
    if horizon_month < graph.last_month:
        raise ValueError("horizon_month precedes the last publication month")
    ages, since = [], []
    for i in range(graph.n_documents):
        cm = graph.cited_by_months(i)
        if cm:
            ages.append(cm[-1] - graph.month_at(i))
            since.append(horizon_month - cm[-1])
    if not ages:
        empty = {"unit": "month", "n_cited": 0}
        return BinnedSeries([0, 1], [0], meta=dict(empty)), BinnedSeries([0, 1], [0], meta=dict(empty))
    a = _integer_histogram(ages, lo=min(0, min(ages)))
    s = _integer_histogram(since, lo=0)
    for series in (a, s):
        series.meta.update(unit="month", n_cited=len(ages), horizon_month=horizon_month)
    return a, s


def fit_tail(series: BinnedSeries, fit_range: tuple[float, float] | None = None) -> TailFit:
    """Least-squares line through (log x, log value) with x = bin lower edge.

    Bins with x <= 0, zero or missing values, or x outside the inclusive
    ``fit_range`` are skipped; the slope is the tail exponent.
    """
    x = series.bin_lo
    y = series.values
    lo, hi = fit_range if fit_range is not None else (-math.inf, math.inf)
    ok = (x > 0) & (x >= lo) & (x <= hi) & np.isfinite(y) & (y > 0)
    if ok.sum() < 3:
        raise AnalysisError(f"need at least 3 usable points in fit range, got {int(ok.sum())}")
    lx, ly = np.log(x[ok]), np.log(y[ok])
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return TailFit(float(slope), float(intercept), (float(x[ok].min()), float(x[ok].max())), r2, int(ok.sum()))
