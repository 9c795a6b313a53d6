"""Seeded generative citation-network models with planted citing heuristics.

Every month a batch of new documents is published. Each draws its
bibliography from documents of earlier months only, so all edges point
backward in time and documents within a month are independent given the
past. A reference is either copied (probability ``copy_prob``) from the
bibliography of a reference the new document already picked, or sampled
with weight

    fitness * (in_degree + 1) ** attachment_exponent
            * (now - pub_month + 1) ** -recency_exponent

Randomness comes from one ``SeedSequence`` per document keyed by
``(seed, month, position)``, so output does not depend on thread count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .corpus import CitationGraph, Document

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneratorConfig:
    months: int = 120
    docs_per_month: int = 50
    refs_per_doc: int = 5
    recency_exponent: float = 0.0
    attachment_exponent: float = 0.0
    copy_prob: float = 0.0
    fitness_spread: float = 0.0
    seed: int = 0
    # lognormal sigma of bibliography length around refs_per_doc; 0 = fixed length
    refs_spread: float = 0.0
    # month index (months since 1800-01) of the first generated month
    start_month: int = 1800

    def __post_init__(self):
        if self.months < 2:
            raise ValueError("months must be >= 2")
        if self.docs_per_month < 1:
            raise ValueError("docs_per_month must be >= 1")
        if self.refs_per_doc < 0:
            raise ValueError("refs_per_doc must be >= 0")
        for name in ("recency_exponent", "attachment_exponent", "fitness_spread", "refs_spread"):
            if getattr(self, name) < 0 or not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be a finite nonnegative number")
        if not 0.0 <= self.copy_prob <= 1.0:
            raise ValueError("copy_prob must lie in [0, 1]")

    @property
    def n_documents(self) -> int:
        return self.months * self.docs_per_month

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: dict) -> "GeneratorConfig":
        """Build a config from string or typed values (e.g. a key=value file)."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise ValueError(f"unknown generator setting {key!r}")
            conv = int if types[key] in (int, "int") else float
            if conv is int and isinstance(raw, str) and not raw.strip().lstrip("-").isdigit():
                raise ValueError(f"{key} must be an integer, got {raw!r}")
            kwargs[key] = conv(raw)
        return cls(**kwargs)


def _doc_rng(seed: int, month: int, position: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(month, position))))


def _draw_bibliography(
    rng: np.random.Generator,
    k: int,
    cdf: np.ndarray,
    weights: np.ndarray,
    out: list[list[int]],
    copy_prob: float,
) -> list[int]:
    pool = len(cdf)
    total = cdf[-1]
    if k * 2 > pool:
        # dense draw: rejection would stall, sample without replacement directly
        return [int(v) for v in rng.choice(pool, size=k, replace=False, p=weights / total)]
    chosen: list[int] = []
    taken: set[int] = set()
    batch = np.empty(0, dtype=np.int64)
    pos = 0
    while len(chosen) < k:
        if chosen and copy_prob > 0 and rng.random() < copy_prob:
            src = chosen[int(rng.integers(len(chosen)))]
            bib = out[src]
            if bib:
                cand = bib[int(rng.integers(len(bib)))]
                if cand not in taken:
                    chosen.append(cand)
                    taken.add(cand)
                    continue
        # fall back to (or start with) a kernel draw
        while True:
            if pos == len(batch):
                batch = np.searchsorted(cdf, rng.random(2 * k + 4) * total, side="right")
                np.minimum(batch, pool - 1, out=batch)
                pos = 0
            cand = int(batch[pos])
            pos += 1
            if cand not in taken:
                chosen.append(cand)
                taken.add(cand)
                break
    return chosen


def _generate(config: GeneratorConfig, halo_weight: float, threads: int) -> CitationGraph:
    c = config
    n_total = c.n_documents
    pub = np.repeat(np.arange(c.months), c.docs_per_month)
    fitness = np.ones(n_total)
    indeg = np.zeros(n_total, dtype=np.int64)
    out: list[list[int]] = [[] for _ in range(n_total)]
    src_edges: list[np.ndarray] = []
    dst_edges: list[np.ndarray] = []
    clamped = 0

    for month in range(c.months):
        first = month * c.docs_per_month
        rngs = [_doc_rng(c.seed, month, j) for j in range(c.docs_per_month)]
        # per-document draws made before any reference so streams stay aligned
        fit_draw = np.array([r.standard_normal() for r in rngs])
        len_draw = np.array([r.standard_normal() for r in rngs])
        fitness[first : first + c.docs_per_month] = np.exp(c.fitness_spread * fit_draw)
        if c.refs_spread > 0:
            ks = np.maximum(1, np.rint(c.refs_per_doc * np.exp(c.refs_spread * len_draw))).astype(int)
        else:
            ks = np.full(c.docs_per_month, c.refs_per_doc)
        pool = first
        if pool == 0:
            clamped += int((ks > 0).sum())
            continue
        over = ks > pool
        clamped += int(over.sum())
        ks = np.minimum(ks, pool)

        w = fitness[:pool].copy()
        if c.attachment_exponent:
            w *= (indeg[:pool] + 1.0) ** c.attachment_exponent
        if c.recency_exponent:
            w *= (month - pub[:pool] + 1.0) ** (-c.recency_exponent)
        if halo_weight and src_edges:
            src = np.concatenate(src_edges)
            dst = np.concatenate(dst_edges)
            best = np.zeros(pool, dtype=np.int64)
            np.maximum.at(best, dst, indeg[src])
            w *= 1.0 + halo_weight * best
        cdf = np.cumsum(w)

        def draw(j: int) -> list[int]:
            return _draw_bibliography(rngs[j], int(ks[j]), cdf, w, out, c.copy_prob)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                bibs = list(ex.map(draw, range(c.docs_per_month)))
        else:
            bibs = [draw(j) for j in range(c.docs_per_month)]

        for j, bib in enumerate(bibs):
            out[first + j] = bib
        new_src = np.repeat(np.arange(first, first + c.docs_per_month), [len(b) for b in bibs])
        new_dst = np.fromiter((d for b in bibs for d in b), dtype=np.int64, count=len(new_src))
        np.add.at(indeg, new_dst, 1)
        src_edges.append(new_src)
        dst_edges.append(new_dst)

    if clamped:
        log.warning("clamped bibliography length for %d documents to the available pool", clamped)
    width = max(7, len(str(n_total - 1)))
    docs = [Document(int(c.start_month + pub[i]), f"S{i:0{width}d}") for i in range(n_total)]
    return CitationGraph(docs, out)


def generate(config: GeneratorConfig, threads: int = 1) -> CitationGraph:
    """Generate a citation graph from ``config``; deterministic for a fixed config."""
    return _generate(config, 0.0, threads)


def generate_with_halo(config: GeneratorConfig, halo_weight: float, threads: int = 1) -> CitationGraph:
    """Like :func:`generate`, with each document's weight multiplied by
    ``1 + halo_weight * (largest in-degree among its current citers)``.
    """
    if halo_weight < 0 or not math.isfinite(halo_weight):
        raise ValueError("halo_weight must be a finite nonnegative number")
    return _generate(config, float(halo_weight), threads)
