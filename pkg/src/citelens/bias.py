"""Bias analyses over cascade-count tables.

Five analyses: visibility (correlation and regression of infections on
initial citations and exposures), novelty (median infection rate vs
latency), popularity (exposure response split by initial-citation class
plus an MI/CMI/II row), halo (infections vs initial citations within
exposure classes) and divided attention (exposure response split by mean
distractions).

Response curves bin their x variable with ``floor(log2(x + 1))`` and
report the mean of y per nonempty bin together with the bin count and
standard error. Empty bins are omitted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import infotheory
from .cascade import CascadeTable, CascadeWindows, compute_all, infection_rates
from .corpus import CitationGraph, Document
from .errors import AnalysisError, DegenerateBinningError, EmptyResultError, ZeroVarianceError

CLASS_VARIABLES = ("IC", "E_C", "D_mean", "total_citations")


@dataclass(frozen=True)
class ClassSpec:
    """Classes ``[b[0], b[1]), [b[1], b[2]), ..., [b[-1], inf)`` over one variable.

    Values below the first boundary belong to no class.
    """

    variable: str
    boundaries: tuple[float, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.variable not in CLASS_VARIABLES:
            raise ValueError(f"class variable must be one of {CLASS_VARIABLES}")
        b = tuple(float(v) for v in self.boundaries)
        if not b:
            raise ValueError("need at least one boundary")
        if any(hi <= lo for lo, hi in zip(b, b[1:])):
            raise ValueError("boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", b)
        labels = tuple(self.labels) or tuple(self._default_labels(b))
        if len(labels) != len(b):
            raise ValueError("need one label per class")
        object.__setattr__(self, "labels", labels)

    @staticmethod
    def _default_labels(b):
        out = []
        for k, lo in enumerate(b):
            hi = b[k + 1] if k + 1 < len(b) else math.inf
            out.append(f"[{lo:g},{hi:g})")
        return out

    def assign(self, values) -> np.ndarray:
        """Class index per value; -1 for values below the first boundary or NaN."""
        v = np.asarray(values, dtype=float)
        idx = np.searchsorted(np.array(self.boundaries), v, side="right") - 1
        idx[np.isnan(v)] = -1
        return idx

    @classmethod
    def quantiles(cls, values, variable: str, n_classes: int = 3, labels=()) -> "ClassSpec":
        """Boundaries at empirical quantiles, so classes hold similar counts where ties allow."""
        v = np.asarray(values, dtype=float)
        v = v[~np.isnan(v)]
        if not len(v):
            raise AnalysisError("no values to derive class boundaries from")
        qs = np.quantile(v, np.linspace(0, 1, n_classes + 1)[:-1], method="lower")
        bounds = sorted(set(float(q) for q in qs))
        bounds[0] = min(bounds[0], float(v.min()))
        return cls(variable, tuple(bounds), tuple(labels)[: len(bounds)])


DEFAULT_IC_CLASSES = ClassSpec("IC", (1, 3, 11), ("low", "medium", "high"))
DEFAULT_DISTRACTION_CLASSES = ClassSpec("D_mean", (0, 10, 30), ("low", "medium", "high"))
DEFAULT_QUALITY_CLASSES = ClassSpec("total_citations", (0, 10, 100), ("low", "medium", "high"))


@dataclass
class ResponseCurve:
    x_variable: str
    y_variable: str
    x_bins: np.ndarray
    mean_y: np.ndarray
    n_per_bin: np.ndarray
    sem_y: np.ndarray
    class_label: str | None = None
    x_scheme: str = "log2_bins"

    @property
    def x_lo(self) -> np.ndarray:
        if self.x_scheme == "identity":
            return self.x_bins.astype(float)
        return np.exp2(self.x_bins) - 1

    @property
    def x_hi(self) -> np.ndarray:
        """Exclusive upper edge of each bin."""
        if self.x_scheme == "identity":
            return self.x_bins + 1.0
        return np.exp2(self.x_bins + 1) - 1

    @property
    def x_center(self) -> np.ndarray:
        return (self.x_lo + self.x_hi - 1) / 2

    def __len__(self) -> int:
        return len(self.x_bins)

    def at(self, b: int) -> tuple[float, int] | None:
        hit = np.nonzero(self.x_bins == b)[0]
        if not len(hit):
            return None
        k = hit[0]
        return float(self.mean_y[k]), int(self.n_per_bin[k])


def response_curve(
    x, y, x_variable="x", y_variable="y", label=None, x_scheme: str = "log2_bins"
) -> ResponseCurve:
    """Mean of ``y`` per bin of ``x``; ``identity`` bins need integer-valued x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = ~np.isnan(x)
    x, y = x[ok], y[ok]
    if x_scheme == "identity":
        if np.any(x != np.floor(x)):
            raise ValueError("identity binning needs integer-valued x")
        bins = x.astype(np.int64)
    else:
        bins = infotheory.discretize(x, x_scheme)
    levels, inv = np.unique(bins, return_inverse=True)
    n = np.bincount(inv, minlength=len(levels))
    sums = np.bincount(inv, weights=y, minlength=len(levels))
    means = sums / n
    sq = np.bincount(inv, weights=(y - means[inv]) ** 2, minlength=len(levels))
    with np.errstate(invalid="ignore", divide="ignore"):
        sem = np.where(n > 1, np.sqrt(sq / np.maximum(n - 1, 1) / n), np.nan)
    return ResponseCurve(x_variable, y_variable, levels, means, n, sem, label, x_scheme)


def _classed_curves(
    table: CascadeTable,
    x_variable: str,
    y_variable: str,
    class_spec: ClassSpec | None,
    x_scheme: str = "log2_bins",
) -> list[ResponseCurve]:
    x = table.column(x_variable)
    y = table.column(y_variable)
    if class_spec is None:
        return [response_curve(x, y, x_variable, y_variable, x_scheme=x_scheme)]
    cls = class_spec.assign(table.column(class_spec.variable))
    curves = []
    for k, label in enumerate(class_spec.labels):
        mask = (cls == k) & ~np.isnan(np.asarray(x, dtype=float))
        if not mask.any():
            warnings.warn(f"class {label!r} of {class_spec.variable} has no members; omitted", stacklevel=3)
            continue
        curves.append(response_curve(x[mask], y[mask], x_variable, y_variable, label, x_scheme))
    return curves


def exposure_response(
    table: CascadeTable,
    x_variable: str = "E_C",
    class_spec: ClassSpec | None = None,
    y_variable: str = "I",
    x_scheme: str = "log2_bins",
) -> list[ResponseCurve]:
    """Mean infections per bin of ``x_variable``, one curve per class."""
    if len(table) == 0:
        raise EmptyResultError("empty cascade table")
    return _classed_curves(table, x_variable, y_variable, class_spec, x_scheme)


# -- visibility -------------------------------------------------------------


@dataclass(frozen=True)
class VisibilityStats:
    r_ic: float
    r_ec: float
    r_combined: float
    a: float
    b: float
    c: float
    n: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx, dy = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0:
        raise AnalysisError("Pearson correlation undefined for a constant variable")
    return float(np.clip((dx @ dy) / denom, -1.0, 1.0))


def visibility_stats(table: CascadeTable) -> VisibilityStats:
    """Correlations of I with IC and E_C, and the OLS fit I ~ a*IC + b*E_C + c."""
    n = len(table)
    if n < 3:
        raise AnalysisError(f"visibility analysis needs at least 3 rows, got {n}")
    ic = np.asarray(table.IC, dtype=float)
    ec = np.asarray(table.E_C, dtype=float)
    inf = np.asarray(table.I, dtype=float)
    for name, col in (("IC", ic), ("E_C", ec), ("I", inf)):
        if np.ptp(col) == 0:
            raise ZeroVarianceError(name)
    design = np.column_stack([ic, ec, np.ones(n)])
    coef, *_ = np.linalg.lstsq(design, inf, rcond=None)
    fitted = design @ coef
    r_comb = pearson(fitted, inf) if np.ptp(fitted) > 0 else 0.0
    return VisibilityStats(
        pearson(ic, inf), pearson(ec, inf), r_comb, float(coef[0]), float(coef[1]), float(coef[2]), n
    )


# -- novelty ----------------------------------------------------------------


def novelty_curve(
    graph: CitationGraph,
    latencies: Sequence[int],
    exposure_months: int = 12,
    infection_months: int = 24,
    cohort_filter: Callable[[Document], bool] | None = None,
    horizon: int | None = None,
    threads: int = 1,
) -> list[tuple[int, float, int]]:
    """``(latency, median infection rate, n documents)`` for each latency."""
    out = []
    for lat in latencies:
        windows = CascadeWindows(int(lat), exposure_months, infection_months)
        try:
            table = compute_all(graph, windows, cohort_filter, horizon=horizon, threads=threads)
        except EmptyResultError as exc:
            raise EmptyResultError(f"latency {lat}: {exc}") from None
        out.append((int(lat), float(np.median(infection_rates(table))), len(table)))
    return out


# -- popularity, halo, divided attention ------------------------------------


def _binned_triple(x, y, z, scheme: str, miller_madow: bool) -> dict:
    bx, by, bz = (infotheory.discretize(v, scheme) for v in (x, y, z))
    row = infotheory.mi_triple(bx, by, bz, miller_madow)
    row["binning"] = scheme
    return row


@dataclass
class PopularityResult:
    curves: list[ResponseCurve]
    mi_row: dict
    excluded: int


def popularity_analysis(
    table: CascadeTable,
    class_spec: ClassSpec = DEFAULT_IC_CLASSES,
    scheme: str = "log2_bins",
    miller_madow: bool = False,
) -> PopularityResult:
    """Exposure response split by initial-citation class, plus MI(E_C;I), CMI(E_C;I|IC), II.

    Curves use rows with IC >= 1; the MI row uses every row.
    """
    if len(table) == 0:
        raise EmptyResultError("empty cascade table")
    for name in ("E_C", "I", "IC"):
        if len(np.unique(infotheory.discretize(table.column(name), scheme))) < 2:
            raise DegenerateBinningError(f"{name} falls into a single bin")
    keep = np.asarray(table.IC) >= 1
    sub = table.subset(keep)
    curves = _classed_curves(sub, "E_C", "I", class_spec)
    if len(curves) < 2:
        raise AnalysisError("popularity analysis needs at least two nonempty classes")
    row = _binned_triple(table.E_C, table.I, table.IC, scheme, miller_madow)
    return PopularityResult(curves, row, int((~keep).sum()))


@dataclass
class HaloResult:
    curves: list[ResponseCurve]
    class_spec: ClassSpec
    trends: dict[str, str]
    excluded: int
    # highest exposure class with at least two bins of min_n samples
    top_class: str | None = None


def halo_analysis(
    table: CascadeTable,
    class_spec: ClassSpec | None = None,
    min_n: int = 20,
    z: float = 3.0,
    x_scheme: str = "log2_bins",
) -> HaloResult:
    """Mean infections vs initial citations within exposure classes.

    Without ``class_spec`` the exposure classes are E_C terciles of the
    IC >= 1 rows. ``trends`` maps class label to :func:`curve_trend`.
    Initial citations are small integers, so ``x_scheme="identity"`` keeps
    IC = 1 and IC = 2 apart where log2 bins would merge them.
    """
    keep = np.asarray(table.IC) >= 1
    sub = table.subset(keep)
    if len(sub) == 0:
        raise EmptyResultError("no rows with IC >= 1")
    if class_spec is None:
        class_spec = ClassSpec.quantiles(sub.E_C, "E_C", 3, ("low", "medium", "high"))
    if class_spec.variable != "E_C":
        raise ValueError("halo classes must be defined over E_C")
    curves = _classed_curves(sub, "IC", "I", class_spec, x_scheme)
    if len(curves) < 2:
        raise AnalysisError("halo analysis needs at least two nonempty exposure classes")
    trends = {c.class_label: curve_trend(c, min_n, z) for c in curves}
    top = None
    for c in curves:
        if len(_eligible(c, min_n)[0]) >= 2:
            top = c.class_label
    return HaloResult(curves, class_spec, trends, int((~keep).sum()), top)


@dataclass
class DividedAttentionResult:
    curves_by_distraction: list[ResponseCurve]
    curves_by_quality: list[ResponseCurve]
    mi_row: dict
    excluded: int = 0
    meta: dict = field(default_factory=dict)


def divided_attention_analysis(
    table: CascadeTable,
    distraction_class_spec: ClassSpec = DEFAULT_DISTRACTION_CLASSES,
    quality_class_spec: ClassSpec = DEFAULT_QUALITY_CLASSES,
    scheme: str = "log2_bins",
    miller_madow: bool = False,
) -> DividedAttentionResult:
    """Exposure response by distraction class, infections vs D_mean by quality
    class, and MI(E_C;I), CMI(E_C;I|D_mean), II over rows with IC >= 1."""
    keep = np.asarray(table.IC) >= 1
    if not keep.any():
        raise EmptyResultError("every row has IC = 0; distractions undefined")
    sub = table.subset(keep)
    by_d = _classed_curves(sub, "E_C", "I", distraction_class_spec)
    by_q = _classed_curves(sub, "D_mean", "I", quality_class_spec)
    row = _binned_triple(sub.E_C, sub.I, sub.D_mean, scheme, miller_madow)
    return DividedAttentionResult(by_d, by_q, row, int((~keep).sum()))


# -- detectors ----------------------------------------------------------------


def _eligible(curve: ResponseCurve, min_n: int):
    ok = (curve.n_per_bin >= max(min_n, 2)) & np.isfinite(curve.sem_y)
    return curve.mean_y[ok], curve.sem_y[ok]


def curve_trend(curve: ResponseCurve, min_n: int = 20, z: float = 3.0) -> str:
    """Classify a curve as increasing, decreasing, flat or mixed.

    Only bins with at least ``min_n`` samples count. A step between
    neighbouring bins is significant when it exceeds ``z`` standard errors.
    ``decreasing`` means at least one significant drop, no significant rise,
    and the last bin significantly below the first; ``increasing`` mirrors it.
    """
    m, s = _eligible(curve, min_n)
    if len(m) < 2:
        return "flat"
    step = np.diff(m)
    se = np.sqrt(s[1:] ** 2 + s[:-1] ** 2)
    up = step > z * se
    down = step < -z * se
    total = m[-1] - m[0]
    total_se = math.hypot(s[0], s[-1])
    if down.any() and not up.any() and total < -z * total_se:
        return "decreasing"
    if up.any() and not down.any() and total > z * total_se:
        return "increasing"
    if not up.any() and not down.any():
        return "flat"
    return "mixed"


def is_nondecreasing(curve: ResponseCurve, min_n: int = 20, z: float = 3.0) -> bool:
    """True when no step between neighbouring eligible bins is a significant drop."""
    m, s = _eligible(curve, min_n)
    if len(m) < 2:
        return True
    step = np.diff(m)
    se = np.sqrt(s[1:] ** 2 + s[:-1] ** 2)
    return bool(np.all(step >= -z * se))


def matched_bin_ratio(a: ResponseCurve, b: ResponseCurve, min_n: int = 1) -> tuple[float, list[tuple[int, float]]]:
    """Pooled ratio of mean y of ``a`` over ``b`` across the x bins both share.

    Each shared bin is weighted by the smaller of its two counts. Returns the
    pooled ratio and the per-bin ``(bin, ratio)`` list.
    """
    num = den = 0.0
    per_bin = []
    for k, xb in enumerate(a.x_bins):
        hit = np.nonzero(b.x_bins == xb)[0]
        if not len(hit):
            continue
        j = hit[0]
        if a.n_per_bin[k] < min_n or b.n_per_bin[j] < min_n:
            continue
        w = min(a.n_per_bin[k], b.n_per_bin[j])
        num += w * a.mean_y[k]
        den += w * b.mean_y[j]
        per_bin.append((int(xb), float(a.mean_y[k] / b.mean_y[j]) if b.mean_y[j] else math.inf))
    if not per_bin:
        raise AnalysisError("curves share no exposure bins")
    return (num / den if den else math.inf), per_bin
