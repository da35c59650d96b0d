"""Pairwise quality judges: a seeded synthetic judge and an endpoint client.

Both judges answer one question: of two documents, which is the better
pretraining data? The synthetic judge compares latent quality values under
additive Gaussian noise and is fully deterministic given a seed. The
endpoint judge renders the comparison prompt, posts it to a JSON-over-HTTP
service, and caches every verdict on disk so a repeated run issues no new
network calls.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import Document
from .seeding import derive_seed

logger = logging.getLogger(__name__)

COMPARE_QUALITY_TEMPLATE = (
    "Compare two text excerpts and choose the text which contain more informative"
    " signal for pretraining a large-language model.\n"
    "\n"
    "An informative datapoint should be well-formatted, contain some usable knowledge"
    " of the world, and strictly NOT have any harmful, racist, sexist, etc. content."
    " Aspects that should NOT influence your judgement:\n"
    "1. The length of the text\n"
    "2. The order in which the texts are presented\n"
    "\n"
    "Note that the texts are cut off, so you have to infer their contexts. The texts"
    " might have similar quality, but you should still make a relative judgement and"
    " choose the label of the preferred text. \n"
    "\n"
    "[Option A]\n"
    "... {text a} ...\n"
    "[Option B]\n"
    "... {text b} ...\n"
    "\n"
    "Now you have to choose between either A or B. Respond only with a single word."
)

DIMENSION_CHECK_TEMPLATE = (
    "You are a data annotation expert. You should judge that {condition}\n"
    "\n"
    "Aspects that should NOT influence your judgement: \n"
    "1. Which language the text is written in \n"
    "2. The length of the text \n"
    "3. The order in which the texts are presented \n"
    "\n"
    "Note that the texts are cut off, so you have to infer their contexts.\n"
    "Here is the text:\n"
    "[TEXT BEGIN]\n"
    "{text}\n"
    "[TEXT END]\n"
    "\n"
    "Please follow the question order to respond. For answer, only respond yes or no.\n"
    "Return the results for each question in the following json format:\n"
    "[{\n"
    '"quesion": "Is this text has a polished and beautiful writing style ?",\n'
    '"reason": "Fill in the reason for the judgment here",\n'
    '"answer": "yes/no"\n'
    "},\n"
    "...]"
)

PROMPT_TEMPLATES = {
    "compare_quality": COMPARE_QUALITY_TEMPLATE,
    "dimension_check": DIMENSION_CHECK_TEMPLATE,
}


class JudgeError(Exception):
    """Judge misconfiguration or an endpoint failure that survived retries."""


def _fill(template: str, mapping: Mapping[str, str]) -> str:
    # single pass so substituted text can never be re-expanded
    pattern = re.compile("|".join(re.escape(token) for token in mapping))
    return pattern.sub(lambda match: mapping[match.group(0)], template)


def render_prompt(
    template: str,
    a: Document | None = None,
    b: Document | None = None,
    *,
    text: str | None = None,
    condition: str | None = None,
) -> str:
    """Render a judge prompt, leaving every non-placeholder byte untouched.

    ``compare_quality`` takes documents a and b; ``dimension_check`` takes
    a text (or document a) and the condition sentence to judge.
    """
    if template == "compare_quality":
        if a is None or b is None:
            raise JudgeError("compare_quality needs two documents")
        if not a.text or not b.text:
            raise JudgeError("cannot compare empty texts")
        return _fill(COMPARE_QUALITY_TEMPLATE, {"{text a}": a.text, "{text b}": b.text})
    if template == "dimension_check":
        body = text if text is not None else (a.text if a is not None else None)
        if not body:
            raise JudgeError("dimension_check needs a nonempty text")
        if not condition:
            raise JudgeError("dimension_check needs a condition")
        return _fill(DIMENSION_CHECK_TEMPLATE, {"{condition}": condition, "{text}": body})
    raise JudgeError(f"unknown prompt template {template!r}")


@dataclass(frozen=True)
class ComparisonOutcome:
    """Result of one pairwise comparison; winner A means the first argument."""

    winner: str
    judge_id: str
    repeats: int = 1


def _check_repeats(repeats: int) -> None:
    if repeats < 1 or repeats % 2 == 0:
        raise JudgeError(f"repeats must be a positive odd count, got {repeats}")


class Judge:
    """Interface: compare(a, b, seed) -> ComparisonOutcome."""

    judge_id: str = "judge"

    def compare(self, a: Document, b: Document, seed: int, repeats: int = 1) -> ComparisonOutcome:
        raise NotImplementedError


class SyntheticJudge(Judge):
    """Compares latent quality values under seeded Gaussian noise.

    Noise is drawn per (seed, document, vote), not per pair, so swapping
    the arguments flips the verdict exactly rather than only in
    expectation.
    """

    def __init__(self, latents: Mapping[str, float], sigma: float = 0.0,
                 judge_id: str = "synthetic"):
        if sigma < 0:
            raise JudgeError("noise sigma must be nonnegative")
        self._latents = latents
        self._sigma = float(sigma)
        self.judge_id = judge_id

    @classmethod
    def from_file(cls, path: str | Path, sigma: float = 0.0) -> "SyntheticJudge":
        """Load latent qualities from JSONL records {"id", "quality"}."""
        latents: dict[str, float] = {}
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    latents[record["id"]] = float(record["quality"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise JudgeError(f"{path}: line {lineno}: bad latent record") from exc
        return cls(latents, sigma=sigma)

    def _quality(self, doc: Document, seed: int, vote: int) -> float:
        try:
            latent = float(self._latents[doc.doc_id])
        except KeyError:
            raise JudgeError(f"no latent quality for document {doc.doc_id!r}") from None
        if self._sigma == 0.0:
            return latent
        rng = np.random.default_rng(derive_seed(seed, "noise", doc.doc_id, vote))
        return latent + self._sigma * rng.standard_normal()

    def compare(self, a: Document, b: Document, seed: int, repeats: int = 1) -> ComparisonOutcome:
        _check_repeats(repeats)
        votes_a = 0
        for vote in range(repeats):
            quality_a = self._quality(a, seed, vote)
            quality_b = self._quality(b, seed, vote)
            if quality_a > quality_b:
                votes_a += 1
            elif quality_a == quality_b:
                rng = np.random.default_rng(derive_seed(seed, "tie", a.doc_id, b.doc_id, vote))
                votes_a += rng.random() < 0.5
        winner = "A" if 2 * votes_a > repeats else "B"
        return ComparisonOutcome(winner=winner, judge_id=self.judge_id, repeats=repeats)


@dataclass(frozen=True)
class JudgeCacheEntry:
    """One cached verdict, keyed by template, pair, and presentation order."""

    key: str
    winner: str
    judge_id: str


class JudgeCache:
    """Append-only JSONL verdict cache; last write wins on replayed keys."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._entries: dict[str, JudgeCacheEntry] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            self._load()

    def _load(self) -> None:
        with open(self._path, "r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                entry = JudgeCacheEntry(
                    key=record["key"], winner=record["winner"], judge_id=record["judge_id"]
                )
                self._entries[entry.key] = entry
        logger.info("loaded %d cached verdicts from %s", len(self._entries), self._path)

    @staticmethod
    def make_key(template: str, a_id: str, b_id: str, presentation: str) -> str:
        digest = hashlib.sha256()
        digest.update("\x1f".join((template, a_id, b_id, presentation)).encode("utf-8"))
        return digest.hexdigest()

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> JudgeCacheEntry | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, entry: JudgeCacheEntry) -> None:
        with self._lock:
            known = self._entries.get(entry.key)
            self._entries[entry.key] = entry
            if known == entry:
                return
            if self._path is not None:
                record = {"key": entry.key, "winner": entry.winner, "judge_id": entry.judge_id}
                with open(self._path, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record) + "\n")


class EndpointJudge(Judge):
    """Client for a JSON-over-HTTP comparison service.

    Protocol: POST {"prompt": string}, response {"answer": "A"|"B"} where
    the label refers to the presented options. Presentation order is
    randomized per pair and seed; the cached and returned winner is always
    relative to the argument order.
    """

    def __init__(
        self,
        url: str,
        *,
        model: str = "",
        cache: JudgeCache | None = None,
        max_in_flight: int = 4,
        retries: int = 2,
        timeout: float = 30.0,
    ):
        if max_in_flight < 1:
            raise JudgeError("max_in_flight must be at least 1")
        if retries < 0:
            raise JudgeError("retries must be nonnegative")
        self._url = url
        self._cache = cache if cache is not None else JudgeCache()
        self._retries = retries
        self._timeout = timeout
        self._semaphore = threading.Semaphore(max_in_flight)
        self.judge_id = f"endpoint:{model}" if model else f"endpoint:{url}"

    def _request(self, prompt: str) -> str:
        payload = json.dumps({"prompt": prompt}).encode("utf-8")
        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            if attempt:
                time.sleep(0.05 * 2 ** (attempt - 1))
            with self._semaphore:
                try:
                    request = urllib.request.Request(
                        self._url, data=payload, headers={"Content-Type": "application/json"}
                    )
                    with urllib.request.urlopen(request, timeout=self._timeout) as response:
                        body = json.loads(response.read().decode("utf-8"))
                    answer = body["answer"]
                    if answer not in ("A", "B"):
                        raise JudgeError(f"endpoint returned invalid answer {answer!r}")
                    return answer
                except Exception as exc:  # noqa: BLE001; every failure is retryable
                    last_error = exc
                    logger.warning("judge endpoint attempt %d failed: %s", attempt + 1, exc)
        raise JudgeError(
            f"endpoint {self._url} failed after {self._retries + 1} attempts"
        ) from last_error

    def compare(self, a: Document, b: Document, seed: int, repeats: int = 1) -> ComparisonOutcome:
        _check_repeats(repeats)
        votes_a = 0
        for vote in range(repeats):
            rng = np.random.default_rng(derive_seed(seed, "order", a.doc_id, b.doc_id, vote))
            a_first = rng.random() < 0.5
            presentation = "AB" if a_first else "BA"
            key = JudgeCache.make_key("compare_quality", a.doc_id, b.doc_id, presentation)
            entry = self._cache.get(key)
            if entry is None:
                first, second = (a, b) if a_first else (b, a)
                answer = self._request(render_prompt("compare_quality", first, second))
                first_won = answer == "A"
                winner = "A" if (first_won == a_first) else "B"
                entry = JudgeCacheEntry(key=key, winner=winner, judge_id=self.judge_id)
                self._cache.put(entry)
            votes_a += entry.winner == "A"
        winner = "A" if 2 * votes_a > repeats else "B"
        return ComparisonOutcome(winner=winner, judge_id=self.judge_id, repeats=repeats)


def compare(judge: Judge, a: Document, b: Document, seed: int, repeats: int = 1) -> ComparisonOutcome:
    """Functional form of Judge.compare."""
    return judge.compare(a, b, seed, repeats=repeats)
