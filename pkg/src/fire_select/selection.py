"""Subset selection: top-k, temperature sampling, and progressive refinement.

Progressive selection interleaves rating refinement with corpus
reduction: the working set shrinks to its top eta percent each round
while the orthogonality weights are recomputed within ever-finer quality
parts, on the observation that rater correlations differ across quality
strata.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .alignment import RaterProfile, align_corpus
from .corpus import Corpus
from .integration import (
    IntegrationError,
    IntegrationModel,
    IntegrationParams,
    build_graph,
    build_model,
    power_iterate,
)

logger = logging.getLogger(__name__)

MODES = ("top_k", "sampled", "progressive")
BASELINE_METHODS = ("average", "max_criteria", "mix_criteria")

DEFAULT_ETA = 60.0
DEFAULT_N_INIT = 2
DEFAULT_BETA = 20.0
DEFAULT_N_MAX = 64


class SelectionError(Exception):
    """Invalid selection plan or inputs."""


@dataclass(frozen=True)
class SelectionPlan:
    """How to pick the subset."""

    mode: str = "top_k"
    k: int = 1
    tau: float = 1.0
    eta: float = DEFAULT_ETA
    n_init: int = DEFAULT_N_INIT
    beta: float = DEFAULT_BETA
    n_max: int = DEFAULT_N_MAX
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise SelectionError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.k < 1:
            raise SelectionError("k must be at least 1")
        if self.mode == "sampled" and self.tau <= 0:
            raise SelectionError("temperature tau must be positive")
        if self.mode == "progressive":
            if not 0.0 < self.eta < 100.0:
                raise SelectionError("eta must lie in (0, 100) for the loop to terminate")
            if self.n_init < 1 or self.n_max < 1:
                raise SelectionError("part counts must be at least 1")
            if self.beta < 1.0:
                raise SelectionError("beta must be at least 1")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "k": self.k,
            "tau": self.tau,
            "eta": self.eta,
            "n_init": self.n_init,
            "beta": self.beta,
            "n_max": self.n_max,
            "seed": self.seed,
        }


@dataclass
class SelectionManifest:
    """Selected document ids, their final ratings, and provenance."""

    doc_ids: list[str]
    ratings: list[float]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.doc_ids) != len(self.ratings):
            raise SelectionError("doc_ids and ratings must have equal length")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise SelectionError("manifest contains duplicate document ids")

    def __len__(self) -> int:
        return len(self.doc_ids)

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for doc_id, rating in zip(self.doc_ids, self.ratings):
                handle.write(json.dumps({"id": doc_id, "integrated_rating": rating}) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "SelectionManifest":
        doc_ids: list[str] = []
        ratings: list[float] = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                doc_ids.append(record["id"])
                ratings.append(float(record["integrated_rating"]))
        return cls(doc_ids=doc_ids, ratings=ratings)


def _check_inputs(doc_ids: Sequence[str], ratings: np.ndarray, k: int) -> np.ndarray:
    ratings = np.asarray(ratings, dtype=float)
    if ratings.ndim != 1 or len(doc_ids) != ratings.size:
        raise SelectionError("doc_ids and ratings must be 1-d and of equal length")
    if not np.all(np.isfinite(ratings)):
        raise SelectionError("ratings must be finite")
    if k < 1 or k > ratings.size:
        raise SelectionError(f"k={k} outside [1, {ratings.size}]")
    return ratings


def _ranked(doc_ids: np.ndarray, ratings: np.ndarray) -> np.ndarray:
    """Positions sorted by rating descending, doc_id ascending on ties."""
    return np.lexsort((doc_ids, -ratings))


def select_top_k(
    doc_ids: Sequence[str],
    ratings: np.ndarray,
    k: int,
    provenance: dict | None = None,
) -> SelectionManifest:
    """The k highest-rated documents, ties broken by ascending doc_id."""
    ratings = _check_inputs(doc_ids, ratings, k)
    ids = np.asarray(doc_ids, dtype=object)
    top = _ranked(ids, ratings)[:k]
    return SelectionManifest(
        doc_ids=[str(ids[pos]) for pos in top],
        ratings=[float(ratings[pos]) for pos in top],
        provenance=provenance or {"mode": "top_k", "k": k},
    )


def sample_with_temperature(
    doc_ids: Sequence[str],
    ratings: np.ndarray,
    k: int,
    tau: float,
    seed: int,
    provenance: dict | None = None,
) -> SelectionManifest:
    """k softmax draws without replacement, renormalized after each draw.

    Selection probability of a remaining document is proportional to
    exp(rating / tau); the max is subtracted before exponentiation for
    stability. If the remaining probability mass underflows to zero, the
    highest-rated remaining document is taken, matching the tau -> 0
    limit.
    """
    ratings = _check_inputs(doc_ids, ratings, k)
    if tau <= 0:
        raise SelectionError("temperature tau must be positive")
    ids = np.asarray(doc_ids, dtype=object)
    logits = ratings / tau
    weights = np.exp(logits - logits.max())
    rng = np.random.default_rng(seed)
    remaining = np.arange(ratings.size)
    picks: list[int] = []
    for _ in range(k):
        mass = weights[remaining]
        total = mass.sum()
        if total > 0.0:
            chosen = rng.choice(remaining.size, p=mass / total)
        else:
            # all remaining weights underflowed; fall back to the argmax
            chosen = int(_ranked(ids[remaining], ratings[remaining])[0])
        picks.append(int(remaining[chosen]))
        remaining = np.delete(remaining, chosen)
    return SelectionManifest(
        doc_ids=[str(ids[pos]) for pos in picks],
        ratings=[float(ratings[pos]) for pos in picks],
        provenance=provenance or {"mode": "sampled", "k": k, "tau": tau, "seed": seed},
    )


def iteration_bound(n_docs: int, k: int, eta: float) -> int:
    """Upper bound on progressive refinement passes: ceil(log_{eta%}(k/N)) + 1."""
    if k >= n_docs:
        return 1
    return math.ceil(math.log(k / n_docs) / math.log(eta / 100.0)) + 1


def _model_digest(model: IntegrationModel) -> str:
    return hashlib.sha256(model.to_json().encode("utf-8")).hexdigest()


def progressive_select(
    corpus: Corpus,
    profiles: Sequence[RaterProfile],
    plan: SelectionPlan,
    params: IntegrationParams = IntegrationParams(),
    model: IntegrationModel | None = None,
    seed: int | None = None,
) -> SelectionManifest:
    """Progressive selection: reduce to the top eta percent each round while
    re-deriving orthogonality within quality parts.

    Flow: global integrated ratings and sort; pre-loop reduction to eta
    percent (never below k); then, while more than k documents remain,
    split the working set into n equal-population parts by current
    rating, rebuild the orthogonality graph and o inside each part (gamma
    stays global), re-rate, sort globally, reduce to eta percent again,
    and grow n by beta up to n_max. A single part leaves ratings
    unchanged (the part-local computation is the global one), as does a
    degenerate part (too few rows or a constant column).
    """
    if plan.mode != "progressive":
        raise SelectionError(f"plan mode is {plan.mode!r}, expected 'progressive'")
    if plan.k > len(corpus):
        raise SelectionError(f"k={plan.k} exceeds corpus size {len(corpus)}")
    if model is None:
        model = build_model(
            corpus, profiles, params, seed=plan.seed if seed is None else seed
        )
    by_id = {p.rater_id: p for p in profiles}
    surviving = [by_id[rid] for rid in model.rater_ids]
    aligned = align_corpus(corpus, surviving)
    ids = np.asarray(corpus.doc_ids, dtype=object)
    ratings = aligned @ model.weights()

    def reduce_target(size: int) -> int:
        return max(int(math.floor(size * plan.eta / 100.0)), plan.k)

    working = _ranked(ids, ratings)[: reduce_target(ids.size)]
    n_parts = min(plan.n_init, plan.n_max)
    iterations = 0
    while working.size > plan.k:
        if n_parts > 1:
            size = working.size
            bounds = [int(np.ceil(j * size / n_parts)) for j in range(n_parts + 1)]
            for j in range(n_parts):
                part = working[bounds[j]:bounds[j + 1]]
                rows = aligned[part]
                try:
                    graph = build_graph(rows, kernel=model.kernel, rater_ids=model.rater_ids)
                    o_part = power_iterate(graph, alpha=model.alpha, damping=model.damping)
                except IntegrationError as exc:
                    logger.debug("part %d/%d keeps previous weights: %s", j + 1, n_parts, exc)
                    continue
                ratings[part] = rows @ (o_part * model.gamma)
        iterations += 1
        ranked = _ranked(ids[working], ratings[working])
        working = working[ranked][: reduce_target(working.size)]
        n_parts = min(int(n_parts * plan.beta), plan.n_max)
    final = working[_ranked(ids[working], ratings[working])][: plan.k]
    provenance = {
        "mode": "progressive",
        "plan": plan.to_dict(),
        "iterations": iterations,
        "model_digest": _model_digest(model),
    }
    return SelectionManifest(
        doc_ids=[str(ids[pos]) for pos in final],
        ratings=[float(ratings[pos]) for pos in final],
        provenance=provenance,
    )


def _minmax_normalize(matrix: np.ndarray) -> np.ndarray:
    lo = matrix.min(axis=0)
    hi = matrix.max(axis=0)
    span = hi - lo
    out = np.zeros_like(matrix, dtype=float)
    nonconstant = span > 0
    out[:, nonconstant] = (matrix[:, nonconstant] - lo[nonconstant]) / span[nonconstant]
    return out


def baseline_integrations(
    doc_ids: Sequence[str],
    matrix: np.ndarray,
    method: str,
    k: int,
    seed: int = 0,
) -> SelectionManifest:
    """Reference integration strategies that skip the orthogonality model.

    average: mean of min-max-normalized columns, then top-k (pass raw
    scores). max_criteria: per-document maximum column, then top-k (pass
    aligned ratings). mix_criteria: union of per-rater top-k lists,
    deduplicated, then a seeded uniform sample of k.
    """
    if method not in BASELINE_METHODS:
        raise SelectionError(f"unknown baseline {method!r}; expected one of {BASELINE_METHODS}")
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != len(doc_ids):
        raise SelectionError("matrix rows must match doc_ids")
    provenance = {"mode": f"baseline:{method}", "k": k, "seed": seed}
    if method == "average":
        scores = _minmax_normalize(matrix).mean(axis=1)
        return select_top_k(doc_ids, scores, k, provenance=provenance)
    if method == "max_criteria":
        return select_top_k(doc_ids, matrix.max(axis=1), k, provenance=provenance)
    ids = np.asarray(doc_ids, dtype=object)
    union: set[int] = set()
    for col in range(matrix.shape[1]):
        union.update(_ranked(ids, matrix[:, col])[:k].tolist())
    if len(union) < k:
        raise SelectionError(
            f"mix_criteria union has {len(union)} documents, cannot sample {k}"
        )
    pool = np.array(sorted(union, key=lambda pos: str(ids[pos])))
    rng = np.random.default_rng(seed)
    picks = pool[rng.choice(pool.size, size=k, replace=False)]
    row_best = matrix.max(axis=1)
    return SelectionManifest(
        doc_ids=[str(ids[pos]) for pos in picks],
        ratings=[float(row_best[pos]) for pos in picks],
        provenance=provenance,
    )


def select(
    corpus: Corpus,
    profiles: Sequence[RaterProfile],
    plan: SelectionPlan,
    params: IntegrationParams = IntegrationParams(),
    model: IntegrationModel | None = None,
    seed: int | None = None,
) -> SelectionManifest:
    """Dispatch a SelectionPlan against a corpus and rater profiles."""
    if plan.mode == "progressive":
        return progressive_select(corpus, profiles, plan, params, model=model, seed=seed)
    if model is None:
        model = build_model(
            corpus, profiles, params, seed=plan.seed if seed is None else seed
        )
    by_id = {p.rater_id: p for p in profiles}
    surviving = [by_id[rid] for rid in model.rater_ids]
    ratings = align_corpus(corpus, surviving) @ model.weights()
    provenance = {
        "mode": plan.mode,
        "plan": plan.to_dict(),
        "model_digest": _model_digest(model),
    }
    if plan.mode == "top_k":
        return select_top_k(corpus.doc_ids, ratings, plan.k, provenance=provenance)
    return sample_with_temperature(
        corpus.doc_ids, ratings, plan.k, plan.tau, plan.seed, provenance=provenance
    )
