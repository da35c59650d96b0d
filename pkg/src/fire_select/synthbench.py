"""Synthetic ground-truth benchmark for integration quality.

Documents carry latent quality dimensions; each synthetic rater sees a
noisy linear mix of them through a monotone distortion, and the true
quality is the unweighted mean of the dimensions. Because the truth is
known exactly, selection variants can be scored by how much of the true
top slice they recover, which stands in for downstream training quality.

The default scenario is built to exercise each integration ingredient:
two clean raters duplicate one dimension (orthogonality weighting must
discount the pair), a third clean rater covers the other dimension, and a
fourth rater measures that same dimension through heavy noise
(reliability weighting must discount it; plain orthogonality cannot,
since noise looks uncorrelated). The distortions differ per rater, which
is what rating alignment neutralizes.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .alignment import RaterProfile, align_corpus, build_profiles
from .corpus import Corpus, Document
from .integration import IntegrationParams, build_graph, build_model, power_iterate
from .judge import SyntheticJudge
from .seeding import derive_seed
from .selection import SelectionManifest, baseline_integrations, select_top_k

logger = logging.getLogger(__name__)

VARIANTS = ("full", "no_align", "no_orth", "no_rel", "average", "max_criteria", "mix_criteria")

_DISTORTIONS = {
    "identity": lambda x: x,
    "cube": lambda x: x ** 3,
    "exp": np.exp,
    "logistic": lambda x: 1.0 / (1.0 + np.exp(-x)),
}


class SynthBenchError(Exception):
    """Invalid scenario or evaluation inputs."""


@dataclass(frozen=True)
class SyntheticRater:
    """One simulated rater: a noisy monotone view of the latent space."""

    rater_id: str
    weights: tuple[float, ...]
    noise: float = 0.0
    distortion: str = "identity"

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if any(w < 0 for w in self.weights):
            raise SynthBenchError(f"rater {self.rater_id!r} has negative mixing weights")
        if not any(self.weights):
            raise SynthBenchError(f"rater {self.rater_id!r} has all-zero mixing weights")
        if self.noise < 0:
            raise SynthBenchError(f"rater {self.rater_id!r} has negative noise")
        if self.distortion not in _DISTORTIONS:
            raise SynthBenchError(
                f"unknown distortion {self.distortion!r}; expected one of "
                f"{tuple(_DISTORTIONS)}"
            )


@dataclass(frozen=True)
class LatentSpec:
    """Generative scenario: corpus size, latent dimensions, raters, seeds."""

    n_docs: int
    n_dims: int
    raters: tuple[SyntheticRater, ...]
    seed: int = 0
    judge_sigma: float = 0.35

    def __post_init__(self) -> None:
        object.__setattr__(self, "raters", tuple(self.raters))
        if self.n_docs < 1:
            raise SynthBenchError("n_docs must be positive")
        if self.n_dims < 1:
            raise SynthBenchError("n_dims must be positive")
        if not self.raters:
            raise SynthBenchError("need at least one rater")
        if self.judge_sigma < 0:
            raise SynthBenchError("judge_sigma must be nonnegative")
        seen = set()
        for rater in self.raters:
            if len(rater.weights) != self.n_dims:
                raise SynthBenchError(
                    f"rater {rater.rater_id!r} has {len(rater.weights)} weights, "
                    f"expected {self.n_dims}"
                )
            if rater.rater_id in seen:
                raise SynthBenchError(f"duplicate rater id {rater.rater_id!r}")
            seen.add(rater.rater_id)

    def to_dict(self) -> dict:
        return {
            "n_docs": self.n_docs,
            "n_dims": self.n_dims,
            "seed": self.seed,
            "judge_sigma": self.judge_sigma,
            "raters": [
                {
                    "rater_id": r.rater_id,
                    "weights": list(r.weights),
                    "noise": r.noise,
                    "distortion": r.distortion,
                }
                for r in self.raters
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LatentSpec":
        try:
            raters = tuple(
                SyntheticRater(
                    rater_id=r["rater_id"],
                    weights=tuple(r["weights"]),
                    noise=float(r.get("noise", 0.0)),
                    distortion=r.get("distortion", "identity"),
                )
                for r in payload["raters"]
            )
            return cls(
                n_docs=int(payload["n_docs"]),
                n_dims=int(payload["n_dims"]),
                raters=raters,
                seed=int(payload.get("seed", 0)),
                judge_sigma=float(payload.get("judge_sigma", 0.35)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SynthBenchError(f"malformed scenario: {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "LatentSpec":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SynthBenchError(f"{path}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(payload)


def default_scenario(n_docs: int = 100_000, seed: int = 0) -> LatentSpec:
    """The shipped 4-rater scenario; see the module docstring for why each
    rater is shaped the way it is."""
    return LatentSpec(
        n_docs=n_docs,
        n_dims=2,
        seed=seed,
        judge_sigma=0.35,
        raters=(
            SyntheticRater("fluency", weights=(1.0, 0.0), noise=0.25, distortion="exp"),
            SyntheticRater("coherence", weights=(1.0, 0.0), noise=0.25, distortion="identity"),
            SyntheticRater("informativeness", weights=(0.0, 1.0), noise=0.25, distortion="cube"),
            SyntheticRater("novelty", weights=(0.0, 1.0), noise=2.2, distortion="logistic"),
        ),
    )


def generate(spec: LatentSpec) -> tuple[Corpus, np.ndarray]:
    """Materialize the scenario: a scored corpus plus its true qualities."""
    rng = np.random.default_rng(derive_seed(spec.seed, "latent"))
    latent = rng.standard_normal((spec.n_docs, spec.n_dims))
    truth = latent.mean(axis=1)
    width = max(6, len(str(spec.n_docs - 1)))
    raw = {}
    for rater in spec.raters:
        noise_rng = np.random.default_rng(derive_seed(spec.seed, "noise", rater.rater_id))
        signal = latent @ np.asarray(rater.weights)
        if rater.noise > 0:
            signal = signal + rater.noise * noise_rng.standard_normal(spec.n_docs)
        raw[rater.rater_id] = _DISTORTIONS[rater.distortion](signal)
    documents = [
        Document(
            doc_id=f"d{i:0{width}d}",
            text=f"synthetic document {i}",
            scores={rid: float(col[i]) for rid, col in raw.items()},
        )
        for i in range(spec.n_docs)
    ]
    corpus = Corpus(documents, [r.rater_id for r in spec.raters])
    return corpus, truth


def write_scenario(spec: LatentSpec, corpus_path: str | Path, latents_path: str | Path) -> None:
    """Write the generated corpus and the judge's latent qualities to disk."""
    corpus, truth = generate(spec)
    corpus.export(corpus_path)
    with open(latents_path, "w", encoding="utf-8") as handle:
        for doc_id, quality in zip(corpus.doc_ids, truth):
            handle.write(json.dumps({"id": doc_id, "quality": float(quality)}) + "\n")


def evaluate(
    manifest: SelectionManifest,
    truth: np.ndarray,
    doc_ids: Sequence[str],
    k_frac: float = 0.1,
) -> dict:
    """Score a manifest against the ground truth.

    precision_at_frac is the fraction of selected documents that belong
    to the true top k_frac slice; mean_true_quality averages the truth
    over the selection.
    """
    truth = np.asarray(truth, dtype=float)
    if truth.size != len(doc_ids):
        raise SynthBenchError("truth vector and doc_ids disagree in length")
    if not 0.0 < k_frac <= 1.0:
        raise SynthBenchError("k_frac must lie in (0, 1]")
    position = {doc_id: pos for pos, doc_id in enumerate(doc_ids)}
    try:
        picked = np.array([position[doc_id] for doc_id in manifest.doc_ids])
    except KeyError as exc:
        raise SynthBenchError(f"manifest id {exc.args[0]!r} not in corpus") from None
    top_size = max(1, int(k_frac * truth.size))
    ids_arr = np.asarray(doc_ids, dtype=object)
    true_top = set(np.lexsort((ids_arr, -truth))[:top_size].tolist())
    hits = sum(1 for pos in picked if int(pos) in true_top)
    return {
        "precision_at_frac": hits / len(manifest),
        "mean_true_quality": float(truth[picked].mean()),
    }


def _variant_ratings(
    variant: str,
    corpus: Corpus,
    profiles: Sequence[RaterProfile],
    params: IntegrationParams,
    seed: int,
) -> np.ndarray:
    by_id = {p.rater_id: p for p in profiles}
    model = build_model(corpus, profiles, params, seed=seed)
    survivors = [by_id[rid] for rid in model.rater_ids]
    if variant == "full":
        return align_corpus(corpus, survivors) @ (model.o * model.gamma)
    if variant == "no_rel":
        return align_corpus(corpus, survivors) @ model.o
    if variant == "no_orth":
        uniform = np.ones(len(model.rater_ids)) / math.sqrt(len(model.rater_ids))
        return align_corpus(corpus, survivors) @ (uniform * model.gamma)
    if variant == "no_align":
        raw = _minmax(corpus.quality_matrix())
        if raw.shape[1] >= 2:
            graph = build_graph(raw, kernel=params.kernel, rater_ids=corpus.rater_ids)
            o = power_iterate(graph, alpha=params.alpha, damping=params.damping)
        else:
            o = np.ones(1)
        gamma = np.array([by_id[rid].gamma for rid in corpus.rater_ids])
        return raw @ (o * gamma)
    raise SynthBenchError(f"unknown variant {variant!r}")


def _minmax(matrix: np.ndarray) -> np.ndarray:
    lo = matrix.min(axis=0)
    span = matrix.max(axis=0) - lo
    span[span == 0] = 1.0
    return (matrix - lo) / span


def run_ablation(
    spec: LatentSpec,
    variants: Sequence[str] = VARIANTS,
    *,
    seed: int = 0,
    k: int | None = None,
    k_frac: float = 0.1,
    intervals: int = 10,
    per_interval: int = 2000,
    params: IntegrationParams = IntegrationParams(),
    include_single_raters: bool = True,
) -> dict:
    """Generate the scenario, align once, and score every variant.

    Returns {"scenario", "k", "k_frac", "seed", "rows"} where each row is
    {"variant", "precision_at_frac", "mean_true_quality"}. Single raters
    are reported as extra rows named "rater:<id>".
    """
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise SynthBenchError(f"unknown variants {unknown}; expected subset of {VARIANTS}")
    corpus, truth = generate(spec)
    doc_ids = corpus.doc_ids
    if k is None:
        k = max(1, int(k_frac * len(corpus)))
    judge = SyntheticJudge(
        dict(zip(doc_ids, truth.tolist())), sigma=spec.judge_sigma
    )
    profiles = build_profiles(
        corpus,
        judge,
        intervals=intervals,
        per_interval=per_interval,
        seed=derive_seed(seed, "align"),
    )
    rows = []

    def add_row(variant: str, manifest: SelectionManifest) -> None:
        metrics = evaluate(manifest, truth, doc_ids, k_frac=k_frac)
        rows.append({"variant": variant, **metrics})

    integrate_seed = derive_seed(seed, "integrate")
    for variant in variants:
        if variant in ("full", "no_align", "no_orth", "no_rel"):
            ratings = _variant_ratings(variant, corpus, profiles, params, integrate_seed)
            manifest = select_top_k(doc_ids, ratings, k)
        elif variant == "average":
            manifest = baseline_integrations(doc_ids, corpus.quality_matrix(), "average", k)
        elif variant == "max_criteria":
            manifest = baseline_integrations(
                doc_ids, align_corpus(corpus, profiles), "max_criteria", k
            )
        else:
            manifest = baseline_integrations(
                doc_ids, corpus.quality_matrix(), "mix_criteria", k,
                seed=derive_seed(seed, "mix"),
            )
        add_row(variant, manifest)
    if include_single_raters:
        quality = corpus.quality_matrix()
        for col, rater_id in enumerate(corpus.rater_ids):
            add_row(f"rater:{rater_id}", select_top_k(doc_ids, quality[:, col], k))
    return {
        "scenario": spec.to_dict(),
        "k": k,
        "k_frac": k_frac,
        "seed": seed,
        "rows": rows,
    }


def format_report(report: dict) -> str:
    """Aligned text table of an ablation report."""
    header = f"{'variant':<24} {'precision@frac':>14} {'mean_true_quality':>18}"
    lines = [
        f"k={report['k']} (k_frac={report['k_frac']}), scenario seed "
        f"{report['scenario']['seed']}, run seed {report['seed']}",
        header,
        "-" * len(header),
    ]
    for row in report["rows"]:
        lines.append(
            f"{row['variant']:<24} {row['precision_at_frac']:>14.4f} "
            f"{row['mean_true_quality']:>18.4f}"
        )
    return "\n".join(lines)
