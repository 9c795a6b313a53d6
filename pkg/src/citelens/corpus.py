"""Timestamped citation graph: ingestion, validation and window queries.

Time is measured in integer months since 1800-01 (month 0). Edges run from
the citing document to the cited one and carry the citing document's
publication month.
"""

from __future__ import annotations

import csv
import io
import logging
import re
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence, TextIO

from .errors import (
    AnomalyError,
    DuplicateDocumentError,
    MalformedRowError,
    UnknownDocumentError,
)

log = logging.getLogger(__name__)

EPOCH_YEAR = 1800
POLICIES = ("drop", "keep", "fail")

_DATE_RE = re.compile(r"^(-?\d{1,4})-(\d{2})(?:-(\d{2}))?$")


def month_index(year: int, month: int) -> int:
    return (year - EPOCH_YEAR) * 12 + (month - 1)


def parse_month(text: str, allow_index: bool = False) -> int:
    """Parse ``YYYY-MM`` or ``YYYY-MM-DD`` (day dropped) into a month index.

    With ``allow_index`` a bare integer is taken as a month index already.
    """
    text = text.strip()
    if allow_index and re.fullmatch(r"-?\d+", text):
        return int(text)
    m = _DATE_RE.match(text)
    if not m:
        raise ValueError(f"unparseable date {text!r}")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range in {text!r}")
    if m.group(3) is not None and not 1 <= int(m.group(3)) <= 31:
        raise ValueError(f"day out of range in {text!r}")
    return month_index(year, month)


def format_month(index: int) -> str:
    year, month0 = divmod(index, 12)
    return f"{EPOCH_YEAR + year:04d}-{month0 + 1:02d}"


@dataclass(frozen=True, order=True)
class Document:
    pub_month: int
    id: str
    kind: str | None = None

    def __post_init__(self):
        if not isinstance(self.pub_month, int) or isinstance(self.pub_month, bool):
            raise TypeError(f"pub_month of {self.id!r} must be an int month index")
        if not self.id:
            raise ValueError("document id must be non-empty")


@dataclass
class IngestReport:
    """What ingestion removed or tolerated, for auditing."""

    n_documents: int = 0
    n_edges: int = 0
    unknown_id_edges: list[tuple[str, str]] = field(default_factory=list)
    dropped_anomalies: list[tuple[str, str]] = field(default_factory=list)
    kept_anomalies: list[tuple[str, str]] = field(default_factory=list)
    self_citations: list[tuple[str, str]] = field(default_factory=list)
    duplicate_edges: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_documents": self.n_documents,
            "n_edges": self.n_edges,
            "unknown_id_edges": len(self.unknown_id_edges),
            "dropped_anomalies": len(self.dropped_anomalies),
            "kept_anomalies": len(self.kept_anomalies),
            "self_citations": len(self.self_citations),
            "duplicate_edges": len(self.duplicate_edges),
        }


class CitationGraph:
    """Immutable directed citation graph.

    Documents are stored in canonical order, ascending by ``(pub_month, id)``;
    internal integer indices follow that order, so sorting citers by index
    sorts them by month with ids breaking ties.
    """

    __slots__ = (
        "_docs",
        "_index",
        "_months",
        "_out",
        "_in",
        "_in_months",
        "_anomaly_count",
        "_horizon",
        "report",
    )

    def __init__(
        self,
        documents: Sequence[Document],
        out_edges: Sequence[Sequence[int]],
        anomaly_count: int = 0,
        horizon: int | None = None,
        report: IngestReport | None = None,
    ):
        # Trusted constructor: documents already canonical, edges validated.
        self._docs = tuple(documents)
        self._index = {d.id: i for i, d in enumerate(self._docs)}
        self._months = tuple(d.pub_month for d in self._docs)
        self._out = tuple(tuple(refs) for refs in out_edges)
        incoming: list[list[int]] = [[] for _ in self._docs]
        for citing, refs in enumerate(self._out):
            for cited in refs:
                incoming[cited].append(citing)
        # citing indices are appended in increasing order already
        self._in = tuple(tuple(c) for c in incoming)
        self._in_months = tuple(tuple(self._months[c] for c in cs) for cs in self._in)
        self._anomaly_count = anomaly_count
        if horizon is None:
            horizon = (self._months[-1] + 1) if self._docs else 0
        self._horizon = horizon
        self.report = report or IngestReport(len(self._docs), self.n_edges)

    @classmethod
    def from_records(
        cls,
        documents: Iterable[Document],
        citations: Iterable[tuple[str, str]],
        policy: str = "drop",
        horizon: int | None = None,
    ) -> "CitationGraph":
        """Validate raw records and build a finalized graph.

        Unknown-id edges are dropped into the report (an error under
        ``policy="fail"``); forward-in-time edges follow ``policy``.
        """
        if policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {policy!r}")
        docs: dict[str, Document] = {}
        for d in documents:
            if d.id in docs:
                raise DuplicateDocumentError(f"duplicate document id {d.id!r}")
            docs[d.id] = d
        ordered = sorted(docs.values(), key=lambda d: (d.pub_month, d.id))
        index = {d.id: i for i, d in enumerate(ordered)}
        report = IngestReport(n_documents=len(ordered))
        out: list[list[int]] = [[] for _ in ordered]
        seen: set[tuple[int, int]] = set()
        anomalies = 0
        for citing, cited in citations:
            edge = (citing, cited)
            if citing not in index or cited not in index:
                if policy == "fail":
                    missing = citing if citing not in index else cited
                    raise AnomalyError(citing, cited, f"unknown document id {missing!r}")
                report.unknown_id_edges.append(edge)
                continue
            if citing == cited:
                report.self_citations.append(edge)
                continue
            ci, di = index[citing], index[cited]
            if (ci, di) in seen:
                report.duplicate_edges.append(edge)
                continue
            if docs[citing].pub_month < docs[cited].pub_month:
                if policy == "fail":
                    raise AnomalyError(
                        citing,
                        cited,
                        f"cites a later document ({format_month(docs[citing].pub_month)}"
                        f" < {format_month(docs[cited].pub_month)})",
                    )
                if policy == "drop":
                    report.dropped_anomalies.append(edge)
                    continue
                report.kept_anomalies.append(edge)
                anomalies += 1
            seen.add((ci, di))
            out[ci].append(di)
        report.n_edges = len(seen)
        if report.unknown_id_edges or report.dropped_anomalies:
            log.info(
                "ingest dropped %d unknown-id edges and %d forward-in-time edges",
                len(report.unknown_id_edges),
                len(report.dropped_anomalies),
            )
        return cls(ordered, out, anomaly_count=anomalies, horizon=horizon, report=report)

    # -- basic accessors -------------------------------------------------

    @property
    def documents(self) -> tuple[Document, ...]:
        return self._docs

    @property
    def n_documents(self) -> int:
        return len(self._docs)

    @property
    def n_edges(self) -> int:
        return sum(len(r) for r in self._out)

    @property
    def anomaly_count(self) -> int:
        return self._anomaly_count

    @property
    def horizon(self) -> int:
        """Exclusive end of the observed period, as a month index."""
        return self._horizon

    @property
    def first_month(self) -> int:
        return self._months[0]

    @property
    def last_month(self) -> int:
        return self._months[-1]

    def with_horizon(self, horizon: int) -> "CitationGraph":
        g = object.__new__(CitationGraph)
        for name in self.__slots__:
            object.__setattr__(g, name, getattr(self, name))
        g._horizon = horizon
        return g

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CitationGraph):
            return NotImplemented
        return (
            self._docs == other._docs
            and self._out == other._out
            and self._anomaly_count == other._anomaly_count
            and self._horizon == other._horizon
        )

    def __repr__(self) -> str:
        return f"CitationGraph(documents={self.n_documents}, edges={self.n_edges})"

    def document(self, doc_id: str) -> Document:
        return self._docs[self.index_of(doc_id)]

    def index_of(self, doc_id: str) -> int:
        try:
            return self._index[doc_id]
        except KeyError:
            raise UnknownDocumentError(f"unknown document id {doc_id!r}") from None

    def edges(self) -> Iterator[tuple[str, str]]:
        """All edges, citing documents in canonical order, references in input order."""
        for ci, refs in enumerate(self._out):
            cid = self._docs[ci].id
            for di in refs:
                yield cid, self._docs[di].id

    # -- queries -----------------------------------------------------------

    def citations_in_window(self, doc_id: str, from_month: int, to_month: int) -> list[str]:
        """Citing documents published in ``[from_month, to_month)``, ordered by (month, id)."""
        if from_month > to_month:
            raise ValueError("from_month must not exceed to_month")
        i = self.index_of(doc_id)
        lo, hi = self.window_bounds(i, from_month, to_month)
        return [self._docs[c].id for c in self._in[i][lo:hi]]

    def references_of(self, doc_id: str) -> list[str]:
        return [self._docs[d].id for d in self._out[self.index_of(doc_id)]]

    def in_degree(self, doc_id: str) -> int:
        return len(self._in[self.index_of(doc_id)])

    def out_degree(self, doc_id: str) -> int:
        return len(self._out[self.index_of(doc_id)])

    # -- index-level access used by the analysis modules -------------------

    def month_at(self, i: int) -> int:
        return self._months[i]

    def months(self) -> tuple[int, ...]:
        return self._months

    def cited_by(self, i: int) -> tuple[int, ...]:
        return self._in[i]

    def cited_by_months(self, i: int) -> tuple[int, ...]:
        return self._in_months[i]

    def refs(self, i: int) -> tuple[int, ...]:
        return self._out[i]

    def window_bounds(self, i: int, from_month: int, to_month: int) -> tuple[int, int]:
        months = self._in_months[i]
        return bisect_left(months, from_month), bisect_left(months, to_month)

    def select(self, cohort_filter: Callable[[Document], bool] | None = None) -> list[int]:
        if cohort_filter is None:
            return list(range(len(self._docs)))
        return [i for i, d in enumerate(self._docs) if cohort_filter(d)]


def cohort(
    kind: str | None = None, start: int | None = None, stop: int | None = None
) -> Callable[[Document], bool]:
    """Predicate selecting documents by kind and publication month ``[start, stop)``."""

    def accept(doc: Document) -> bool:
        if kind is not None and doc.kind != kind:
            return False
        if start is not None and doc.pub_month < start:
            return False
        if stop is not None and doc.pub_month >= stop:
            return False
        return True

    return accept


# -- CSV interface ----------------------------------------------------------


def _rows(source: TextIO | Iterable[str], name: str, required: Sequence[str], optional=()):
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRowError(name, 1, "missing header") from None
    header = [h.strip() for h in header]
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    allowed = list(required) + list(optional)
    if header[: len(required)] != list(required) or header != allowed[: len(header)]:
        raise MalformedRowError(
            name, reader.line_num, f"expected header {','.join(required)}, got {','.join(header)}"
        )
    width = len(header)
    for row in reader:
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != width:
            raise MalformedRowError(name, reader.line_num, f"expected {width} fields, got {len(row)}")
        yield reader.line_num, [v.strip() for v in row]


def read_documents(source: TextIO | Iterable[str], name: str = "documents.csv") -> list[Document]:
    docs = []
    seen: set[str] = set()
    for line, row in _rows(source, name, ("doc_id", "pub_date"), ("kind",)):
        doc_id = row[0]
        if not doc_id:
            raise MalformedRowError(name, line, "empty doc_id")
        try:
            month = parse_month(row[1])
        except ValueError as exc:
            raise MalformedRowError(name, line, str(exc)) from None
        if doc_id in seen:
            raise DuplicateDocumentError(f"{name}:{line}: duplicate document id {doc_id!r}")
        seen.add(doc_id)
        kind = row[2] if len(row) > 2 and row[2] else None
        docs.append(Document(month, doc_id, kind))
    return docs


def read_citations(
    source: TextIO | Iterable[str], name: str = "citations.csv"
) -> list[tuple[str, str]]:
    edges = []
    for line, row in _rows(source, name, ("citing_id", "cited_id")):
        if not row[0] or not row[1]:
            raise MalformedRowError(name, line, "empty document id")
        edges.append((row[0], row[1]))
    return edges


def ingest(
    documents_source: TextIO | Iterable[str],
    citations_source: TextIO | Iterable[str],
    policy: str = "drop",
    horizon: int | None = None,
    documents_name: str = "documents.csv",
    citations_name: str = "citations.csv",
) -> CitationGraph:
    """Read the documents/citations CSV pair into a finalized graph.

    The ingest report is available as ``graph.report``.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}, got {policy!r}")
    docs = read_documents(documents_source, documents_name)
    edges = read_citations(citations_source, citations_name)
    return CitationGraph.from_records(docs, edges, policy=policy, horizon=horizon)


def ingest_files(documents_path, citations_path, policy: str = "drop", horizon=None) -> CitationGraph:
    with open(documents_path, newline="", encoding="utf-8") as dfh, open(
        citations_path, newline="", encoding="utf-8"
    ) as cfh:
        return ingest(
            dfh,
            cfh,
            policy=policy,
            horizon=horizon,
            documents_name=str(documents_path),
            citations_name=str(citations_path),
        )


def write_documents(graph: CitationGraph, fh: TextIO) -> None:
    with_kind = any(d.kind is not None for d in graph.documents)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["doc_id", "pub_date", "kind"] if with_kind else ["doc_id", "pub_date"])
    for d in graph.documents:
        row = [d.id, format_month(d.pub_month)]
        if with_kind:
            row.append(d.kind or "")
        writer.writerow(row)


def write_citations(graph: CitationGraph, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["citing_id", "cited_id"])
    writer.writerows(graph.edges())


def canonical_csv(graph: CitationGraph) -> tuple[str, str]:
    """Canonical (documents, citations) CSV text for ``graph``."""
    d, c = io.StringIO(), io.StringIO()
    write_documents(graph, d)
    write_citations(graph, c)
    return d.getvalue(), c.getvalue()

