"""Scored-corpus ingestion and percentile ranking.

A corpus is a list of documents, each carrying a raw score per registered
rater. Raw scores live on arbitrary, rater-specific scales; the only
assumption made downstream is that each rater's scale orders documents by
quality, with the direction given by the rater's polarity.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    """Malformed corpus input or inconsistent score data."""


@dataclass(frozen=True)
class RaterSpec:
    """A registered rater: column name plus score polarity."""

    rater_id: str
    higher_is_better: bool = True


@dataclass(frozen=True)
class Document:
    """One corpus entry with its raw per-rater scores."""

    doc_id: str
    text: str
    scores: Mapping[str, float]


@dataclass
class ScoreColumn:
    """One rater's raw scores over the corpus, plus quality percentiles.

    ``percentiles[i]`` is the percentile rank of document i where 0 marks
    the highest-quality end of the scale regardless of polarity.
    """

    rater_id: str
    values: np.ndarray
    higher_is_better: bool = True
    percentiles: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise CorpusError(f"score column {self.rater_id!r} must be 1-d")
        if self.values.size == 0:
            raise CorpusError(f"score column {self.rater_id!r} is empty")
        if not np.all(np.isfinite(self.values)):
            raise CorpusError(f"score column {self.rater_id!r} has non-finite values")
        if self.percentiles is None:
            self.percentiles = percentile_rank(self)


def percentile_rank(column: ScoreColumn) -> np.ndarray:
    """Tie-averaged percentile ranks with 0 at the highest-quality end.

    The percentile of a document is 100 * (r - 0.5) / N where r is its
    1-based rank after sorting best-first under the column polarity, ties
    sharing the mean of their ranks. A single document lands at 50.0.
    """
    values = column.values
    n = values.size
    quality = values if column.higher_is_better else -values
    order = np.argsort(-quality, kind="stable")
    best_first = quality[order]
    group_start = np.empty(n, dtype=bool)
    group_start[0] = True
    group_start[1:] = best_first[1:] != best_first[:-1]
    starts = np.flatnonzero(group_start)
    counts = np.diff(np.append(starts, n))
    # mean 1-based rank of a tie group starting at 0-based position s
    mean_rank = starts + (counts + 1) / 2.0
    ranks_sorted = np.repeat(mean_rank, counts)
    percentiles = np.empty(n, dtype=float)
    percentiles[order] = 100.0 * (ranks_sorted - 0.5) / n
    return percentiles


def _normalize_raters(raters: Iterable[RaterSpec | str]) -> list[RaterSpec]:
    specs = [r if isinstance(r, RaterSpec) else RaterSpec(r) for r in raters]
    if not specs:
        raise CorpusError("at least one rater must be registered")
    seen = set()
    for spec in specs:
        if spec.rater_id in seen:
            raise CorpusError(f"rater {spec.rater_id!r} registered twice")
        seen.add(spec.rater_id)
    return specs


class Corpus:
    """Immutable scored corpus with columnar per-rater access."""

    def __init__(self, documents: Sequence[Document], raters: Iterable[RaterSpec | str]):
        self._raters = _normalize_raters(raters)
        self._documents = list(documents)
        if not self._documents:
            raise CorpusError("corpus is empty")
        self._index: dict[str, int] = {}
        for pos, doc in enumerate(self._documents):
            if doc.doc_id in self._index:
                raise CorpusError(f"duplicate document id {doc.doc_id!r}")
            self._index[doc.doc_id] = pos
        self._columns: dict[str, ScoreColumn] = {}
        for spec in self._raters:
            values = np.empty(len(self._documents), dtype=float)
            for pos, doc in enumerate(self._documents):
                try:
                    values[pos] = float(doc.scores[spec.rater_id])
                except KeyError:
                    raise CorpusError(
                        f"document {doc.doc_id!r} has no score for rater {spec.rater_id!r}"
                    ) from None
            self._columns[spec.rater_id] = ScoreColumn(
                rater_id=spec.rater_id,
                values=values,
                higher_is_better=spec.higher_is_better,
            )

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self):
        return iter(self._documents)

    @property
    def raters(self) -> tuple[RaterSpec, ...]:
        return tuple(self._raters)

    @property
    def rater_ids(self) -> tuple[str, ...]:
        return tuple(spec.rater_id for spec in self._raters)

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(doc.doc_id for doc in self._documents)

    def document(self, doc_id: str) -> Document:
        try:
            return self._documents[self._index[doc_id]]
        except KeyError:
            raise CorpusError(f"unknown document id {doc_id!r}") from None

    def position(self, doc_id: str) -> int:
        try:
            return self._index[doc_id]
        except KeyError:
            raise CorpusError(f"unknown document id {doc_id!r}") from None

    def column(self, rater_id: str) -> ScoreColumn:
        try:
            return self._columns[rater_id]
        except KeyError:
            raise CorpusError(f"unknown rater {rater_id!r}") from None

    def quality_matrix(self) -> np.ndarray:
        """Raw scores as an (N, n_raters) matrix, sign-flipped so that
        larger always means better."""
        cols = []
        for spec in self._raters:
            col = self._columns[spec.rater_id]
            cols.append(col.values if spec.higher_is_better else -col.values)
        return np.stack(cols, axis=1)

    def percentile_matrix(self) -> np.ndarray:
        """Quality percentiles as an (N, n_raters) matrix, 0 = best."""
        return np.stack(
            [self._columns[s.rater_id].percentiles for s in self._raters], axis=1
        )

    def content_hash(self) -> str:
        """Stable hash over ids, texts, and scores, for cache validation."""
        digest = hashlib.sha256()
        for doc in self._documents:
            digest.update(doc.doc_id.encode("utf-8"))
            digest.update(b"\x1f")
            digest.update(doc.text.encode("utf-8"))
            digest.update(b"\x1f")
            digest.update(json.dumps(dict(doc.scores), sort_keys=True).encode("utf-8"))
            digest.update(b"\x1e")
        return digest.hexdigest()

    def export(self, path: str | Path) -> None:
        """Write the corpus back out as JSON lines."""
        with open(path, "w", encoding="utf-8") as handle:
            for doc in self._documents:
                record = {"id": doc.doc_id, "text": doc.text, "scores": dict(doc.scores)}
                handle.write(json.dumps(record, sort_keys=True) + "\n")


def ingest(path: str | Path, raters: Iterable[RaterSpec | str]) -> Corpus:
    """Load a JSONL corpus of records {"id", "text", "scores"}.

    Every registered rater must have a score in every record. Blank lines
    are skipped; anything else malformed raises CorpusError with the line
    number.
    """
    specs = _normalize_raters(raters)
    documents: list[Document] = []
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{path}: line {lineno}: record is not an object")
            try:
                doc_id = record["id"]
                text = record["text"]
                scores = record["scores"]
            except KeyError as exc:
                raise CorpusError(f"{path}: line {lineno}: missing field {exc.args[0]!r}") from None
            if not isinstance(doc_id, str) or not isinstance(text, str):
                raise CorpusError(f"{path}: line {lineno}: id and text must be strings")
            if not isinstance(scores, dict):
                raise CorpusError(f"{path}: line {lineno}: scores must be an object")
            documents.append(Document(doc_id=doc_id, text=text, scores=scores))
    logger.info("ingested %d documents from %s", len(documents), path)
    return Corpus(documents, specs)
