"""Per-document cascade counts: references, initial citations, exposures,
distractions and infections.

For an original document published at ``t1`` the windows are

    latency   [t1, t2)   t2 = t1 + latency_months
    exposure  [t2, t3)   t3 = t2 + exposure_months
    infection [t2, t4)   t4 = t2 + infection_months

Initial citations (the red set) are documents citing the original during
the latency window. An exposure is one edge from a document published in
the exposure window to a red document. Infections are citations of the
original during the infection window by documents outside the red set.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import CitationGraph, Document
from .errors import CensoredError, EmptyResultError

COLUMNS = ("R", "IC", "E_C", "D_total", "D_mean", "I", "total_citations")


@dataclass(frozen=True)
class CascadeWindows:
    latency_months: int = 24
    exposure_months: int = 12
    infection_months: int = 24

    def __post_init__(self):
        for name in ("latency_months", "exposure_months", "infection_months"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.infection_months < self.exposure_months:
            raise ValueError("infection_months must be >= exposure_months")

    def bounds(self, t1: int) -> tuple[int, int, int, int]:
        t2 = t1 + self.latency_months
        return t1, t2, t2 + self.exposure_months, t2 + self.infection_months

    @property
    def span(self) -> int:
        """Months from publication to the end of the infection window."""
        return self.latency_months + self.infection_months


@dataclass(frozen=True)
class CascadeCounts:
    doc: str
    t1: int
    R: int
    IC: int
    E_C: int
    D_total: int
    D_mean: float | None
    I: int
    total_citations: int = 0


def _counts_at(g: CitationGraph, i: int, w: CascadeWindows, distinct: bool) -> tuple:
    t1, t2, t3, t4 = w.bounds(g.month_at(i))
    citers = g.cited_by(i)
    a, b = g.window_bounds(i, t1, t2)
    red = citers[a:b]
    ec = 0
    greens: set[int] = set()
    d_total = 0
    for r in red:
        lo, hi = g.window_bounds(r, t2, t3)
        if distinct:
            greens.update(g.cited_by(r)[lo:hi])
        else:
            ec += hi - lo
        d_total += len(g.refs(r)) - 1
    if distinct:
        ec = len(greens)
    lo, hi = g.window_bounds(i, t2, t4)
    red_set = set(red)
    infections = sum(1 for d in citers[lo:hi] if d not in red_set)
    ic = len(red)
    d_mean = d_total / ic if ic else None
    return (t1, len(g.refs(i)), ic, ec, d_total, d_mean, infections, len(citers))


def compute_cascade(
    graph: CitationGraph,
    doc: str,
    windows: CascadeWindows = CascadeWindows(),
    horizon: int | None = None,
    distinct_exposures: bool = False,
) -> CascadeCounts:
    """Cascade counts for one document.

    Raises CensoredError when the infection window ends after ``horizon``
    (default: the graph's horizon).
    """
    i = graph.index_of(doc)
    horizon = graph.horizon if horizon is None else horizon
    t4 = graph.month_at(i) + windows.span
    if t4 > horizon:
        raise CensoredError(
            f"document {doc!r}: infection window ends at month {t4}, after horizon {horizon}"
        )
    return CascadeCounts(doc, *_counts_at(graph, i, windows, distinct_exposures))


@dataclass
class CascadeTable:
    """Column-oriented table of cascade counts, one row per document.

    ``D_mean`` is NaN where ``IC == 0``.
    """

    doc: list[str]
    t1: np.ndarray
    R: np.ndarray
    IC: np.ndarray
    E_C: np.ndarray
    D_total: np.ndarray
    D_mean: np.ndarray
    I: np.ndarray
    total_citations: np.ndarray
    windows: CascadeWindows | None = None
    censored: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.doc)

    @classmethod
    def from_counts(cls, rows: Sequence[CascadeCounts], **kw) -> "CascadeTable":
        def col(name, dtype=np.int64):
            return np.array([getattr(r, name) for r in rows], dtype=dtype)

        d_mean = np.array(
            [math.nan if r.D_mean is None else r.D_mean for r in rows], dtype=float
        )
        return cls(
            doc=[r.doc for r in rows],
            t1=col("t1"),
            R=col("R"),
            IC=col("IC"),
            E_C=col("E_C"),
            D_total=col("D_total"),
            D_mean=d_mean,
            I=col("I"),
            total_citations=col("total_citations"),
            **kw,
        )

    @classmethod
    def from_columns(cls, **columns) -> "CascadeTable":
        """Build a table from arrays; missing columns are zero-filled.

        Useful for planted tables that never went through a graph.
        """
        n = len(next(iter(columns.values())))
        cols = {}
        for name in ("t1", "R", "IC", "E_C", "D_total", "I", "total_citations"):
            cols[name] = np.asarray(columns.pop(name, np.zeros(n, dtype=np.int64)))
        ic = cols["IC"]
        if "D_mean" in columns:
            d_mean = np.asarray(columns.pop("D_mean"), dtype=float)
        else:
            safe = np.where(ic > 0, ic, 1)
            d_mean = np.where(ic > 0, cols["D_total"] / safe, np.nan)
        doc = list(columns.pop("doc", [f"row{i}" for i in range(n)]))
        if columns:
            raise TypeError(f"unknown columns: {sorted(columns)}")
        return cls(doc=doc, D_mean=d_mean, **cols)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS and name != "t1":
            raise KeyError(f"unknown column {name!r}")
        return getattr(self, name)

    def subset(self, mask: np.ndarray) -> "CascadeTable":
        mask = np.asarray(mask, dtype=bool)
        return CascadeTable(
            doc=[d for d, keep in zip(self.doc, mask) if keep],
            t1=self.t1[mask],
            R=self.R[mask],
            IC=self.IC[mask],
            E_C=self.E_C[mask],
            D_total=self.D_total[mask],
            D_mean=self.D_mean[mask],
            I=self.I[mask],
            total_citations=self.total_citations[mask],
            windows=self.windows,
            censored=self.censored,
            meta=dict(self.meta),
        )

    def rows(self) -> Iterable[CascadeCounts]:
        for k, doc in enumerate(self.doc):
            d_mean = float(self.D_mean[k])
            yield CascadeCounts(
                doc=doc,
                t1=int(self.t1[k]),
                R=int(self.R[k]),
                IC=int(self.IC[k]),
                E_C=int(self.E_C[k]),
                D_total=int(self.D_total[k]),
                D_mean=None if math.isnan(d_mean) else d_mean,
                I=int(self.I[k]),
                total_citations=int(self.total_citations[k]),
            )


def compute_all(
    graph: CitationGraph,
    windows: CascadeWindows = CascadeWindows(),
    cohort_filter: Callable[[Document], bool] | None = None,
    horizon: int | None = None,
    distinct_exposures: bool = False,
    threads: int = 1,
) -> CascadeTable:
    """Cascade counts for every non-censored document passing ``cohort_filter``.

    Rows come out in canonical (pub_month, id) order whatever ``threads`` is.
    """
    horizon = graph.horizon if horizon is None else horizon
    selected = graph.select(cohort_filter)
    keep = [i for i in selected if graph.month_at(i) + windows.span <= horizon]
    censored = len(selected) - len(keep)
    if not keep:
        raise EmptyResultError(
            f"no documents left after censoring ({censored} censored at horizon {horizon})"
        )

    def work(chunk: list[int]) -> list[tuple]:
        return [_counts_at(graph, i, windows, distinct_exposures) for i in chunk]

    if threads > 1 and len(keep) > 1:
        size = -(-len(keep) // threads)
        chunks = [keep[k : k + size] for k in range(0, len(keep), size)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
        results = [row for part in parts for row in part]
    else:
        results = work(keep)

    docs = graph.documents
    rows = [CascadeCounts(docs[i].id, *res) for i, res in zip(keep, results)]
    table = CascadeTable.from_counts(rows, windows=windows, censored=censored)
    table.meta.update(horizon=horizon, distinct_exposures=distinct_exposures)
    return table


def infection_rate(counts: CascadeCounts) -> float:
    """Infections per exposure, with one added to exposures to avoid division by zero."""
    return counts.I / (counts.E_C + 1)


def infection_rates(table: CascadeTable) -> np.ndarray:
    return table.I / (table.E_C + 1.0)
