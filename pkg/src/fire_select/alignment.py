"""Rating alignment: map raw rater scores into a shared win-rate space.

For each rater, documents are sorted by quality percentile and split into
k equal-population intervals. A per-interval win rate against a common
uniform reference sample is estimated with a pairwise judge, a natural
cubic spline is fit through (interval midpoint percentile, win rate), and
every document's aligned rating is the spline evaluated at its percentile.
The first (best) interval's win rate doubles as the rater's intrinsic
reliability gamma.

Alignment is rank-based: any strictly increasing transform of a rater's
raw scores leaves its profile and aligned ratings bit-identical. All
sampling seeds are derived from the stage seed and interval index only,
never from rater identity, so identically ranking raters produce
identical profiles.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, ScoreColumn
from .judge import Judge
from .seeding import derive_seed
from .spline import NaturalCubicSpline

logger = logging.getLogger(__name__)

DEFAULT_INTERVALS = 10
DEFAULT_PER_INTERVAL = 1000


class AlignmentError(Exception):
    """Invalid alignment inputs or a judge failure during estimation."""


@dataclass(frozen=True)
class WinRatePoint:
    """One curve knot: interval midpoint percentile and its win rate."""

    percentile: float
    win_rate: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.percentile <= 100.0:
            raise AlignmentError(f"percentile {self.percentile} outside [0, 100]")
        if not 0.0 <= self.win_rate <= 1.0:
            raise AlignmentError(f"win rate {self.win_rate} outside [0, 1]")


class WinRateCurve:
    """Win-rate-percentile function: spline through per-interval knots."""

    def __init__(self, knots: Sequence[WinRatePoint], rater_id: str = ""):
        if not knots:
            raise AlignmentError("curve needs at least one knot")
        percentiles = np.array([k.percentile for k in knots], dtype=float)
        if np.any(np.diff(percentiles) <= 0):
            raise AlignmentError("knot percentiles must be strictly increasing")
        self.rater_id = rater_id
        self.knots = tuple(knots)
        self._win_rates = np.array([k.win_rate for k in knots], dtype=float)
        self._spline = (
            NaturalCubicSpline(percentiles, self._win_rates) if len(knots) > 1 else None
        )

    def __call__(self, percentile):
        """Evaluate at scalar or array percentiles; clamps beyond the ends."""
        if self._spline is None:
            q = np.asarray(percentile, dtype=float)
            constant = float(self._win_rates[0])
            return constant if q.ndim == 0 else np.full(q.shape, constant)
        return self._spline(percentile)


@dataclass(frozen=True)
class RaterProfile:
    """A rater's identity, win-rate curve, and intrinsic reliability."""

    rater_id: str
    curve: WinRateCurve
    gamma: float | None = None

    def __post_init__(self) -> None:
        first = float(self.curve.knots[0].win_rate)
        if self.gamma is None:
            object.__setattr__(self, "gamma", first)
        elif self.gamma != first:
            raise AlignmentError(
                f"gamma {self.gamma} must equal the first-interval win rate {first}"
            )


def sample_reference(corpus: Corpus, size: int, seed: int) -> list[str]:
    """Uniform sample of document ids without replacement."""
    if size < 1:
        raise AlignmentError("reference size must be positive")
    if size > len(corpus):
        raise AlignmentError(f"reference size {size} exceeds corpus size {len(corpus)}")
    rng = np.random.default_rng(seed)
    positions = rng.choice(len(corpus), size=size, replace=False)
    ids = corpus.doc_ids
    return [ids[pos] for pos in positions]


def partition_intervals(
    column: ScoreColumn, k: int, *, doc_ids: Sequence[str]
) -> list[list[str]]:
    """Split documents into k contiguous quality intervals, best first.

    Sizes differ by at most one; when N is not divisible by k the earlier
    (higher-quality) intervals take the extra document.
    """
    n = column.values.size
    if k < 2:
        raise AlignmentError("need at least 2 intervals")
    if k > n:
        raise AlignmentError(f"cannot split {n} documents into {k} intervals")
    if len(doc_ids) != n:
        raise AlignmentError("doc_ids length does not match the column")
    order = np.argsort(column.percentiles, kind="stable")
    bounds = [int(np.ceil(j * n / k)) for j in range(k + 1)]
    return [[doc_ids[pos] for pos in order[bounds[j]:bounds[j + 1]]] for j in range(k)]


def estimate_win_rate(
    corpus: Corpus,
    interval_sample: Sequence[str],
    reference: Sequence[str],
    judge: Judge,
    seed: int,
) -> float:
    """Fraction of interval docs preferred over their paired reference doc.

    Each interval doc is paired with exactly one reference doc via a
    seeded permutation, so the estimate costs |interval_sample| judge
    calls.
    """
    if len(interval_sample) != len(reference):
        raise AlignmentError(
            f"interval sample ({len(interval_sample)}) and reference "
            f"({len(reference)}) must have equal size"
        )
    if not interval_sample:
        raise AlignmentError("cannot estimate a win rate from an empty sample")
    rng = np.random.default_rng(derive_seed(seed, "pairing"))
    assignment = rng.permutation(len(reference))
    wins = 0
    for sample_id, ref_pos in zip(interval_sample, assignment):
        reference_id = reference[ref_pos]
        pair_seed = derive_seed(seed, "pair", sample_id, reference_id)
        try:
            outcome = judge.compare(
                corpus.document(sample_id), corpus.document(reference_id), pair_seed
            )
        except Exception as exc:
            raise AlignmentError(
                f"judge failed on pair ({sample_id!r}, {reference_id!r}): {exc}"
            ) from exc
        wins += outcome.winner == "A"
    return wins / len(interval_sample)


def fit_win_rate_curve(points: Sequence[WinRatePoint], rater_id: str = "") -> WinRateCurve:
    """Natural cubic spline through the win-rate knots."""
    if len(points) < 2:
        raise AlignmentError("need at least 2 points to fit a curve")
    return WinRateCurve(points, rater_id=rater_id)


def intrinsic_reliability(curve: WinRateCurve) -> float:
    """Win rate of the best interval: how trustworthy the rater's top is."""
    return float(curve.knots[0].win_rate)


def align_corpus(corpus: Corpus, profiles: Sequence[RaterProfile]) -> np.ndarray:
    """Aligned-rating matrix A, one row per document, one column per profile."""
    if not profiles:
        raise AlignmentError("no profiles to align against")
    matrix = np.empty((len(corpus), len(profiles)), dtype=float)
    for col, profile in enumerate(profiles):
        try:
            percentiles = corpus.column(profile.rater_id).percentiles
        except Exception as exc:
            raise AlignmentError(
                f"corpus has no percentile column for rater {profile.rater_id!r}"
            ) from exc
        matrix[:, col] = profile.curve(percentiles)
    return matrix


def build_profiles(
    corpus: Corpus,
    judge: Judge,
    *,
    rater_ids: Iterable[str] | None = None,
    intervals: int = DEFAULT_INTERVALS,
    per_interval: int = DEFAULT_PER_INTERVAL,
    seed: int = 0,
) -> list[RaterProfile]:
    """Run the full alignment stage for every rater.

    One reference sample and one per-interval subsample are drawn for the
    whole stage and reused across raters; the per-pair judge seeds depend
    on the document ids, so two raters that rank the corpus identically
    get bit-identical profiles.
    """
    ids = list(rater_ids) if rater_ids is not None else list(corpus.rater_ids)
    if not ids:
        raise AlignmentError("no raters to align")
    if per_interval < 1:
        raise AlignmentError("per_interval must be positive")
    smallest_interval = len(corpus) // intervals
    if smallest_interval < 1:
        raise AlignmentError(f"cannot split {len(corpus)} documents into {intervals} intervals")
    effective = min(per_interval, smallest_interval)
    if effective < per_interval:
        logger.info(
            "per-interval sample clamped from %d to %d by interval population",
            per_interval, effective,
        )
    reference = sample_reference(corpus, effective, derive_seed(seed, "reference"))
    doc_ids = corpus.doc_ids
    # one position subsample per interval, shared by every rater
    subsample_positions = []
    for j in range(intervals):
        rng = np.random.default_rng(derive_seed(seed, "interval", j))
        interval_size = _interval_size(len(corpus), intervals, j)
        subsample_positions.append(rng.choice(interval_size, size=effective, replace=False))
    profiles = []
    for rater_id in ids:
        column = corpus.column(rater_id)
        interval_lists = partition_intervals(column, intervals, doc_ids=doc_ids)
        points = []
        for j, interval in enumerate(interval_lists):
            sample = [interval[pos] for pos in subsample_positions[j]]
            win_rate = estimate_win_rate(
                corpus, sample, reference, judge, derive_seed(seed, "winrate", j)
            )
            midpoint = 100.0 * (j + 0.5) / intervals
            points.append(WinRatePoint(percentile=midpoint, win_rate=win_rate))
        curve = fit_win_rate_curve(points, rater_id=rater_id)
        profiles.append(RaterProfile(rater_id=rater_id, curve=curve))
        logger.info("aligned rater %s: gamma=%.4f", rater_id, profiles[-1].gamma)
    return profiles


def _interval_size(n: int, k: int, j: int) -> int:
    lo = int(np.ceil(j * n / k))
    hi = int(np.ceil((j + 1) * n / k))
    return hi - lo


def profile_from_knots(
    rater_id: str, percentiles: Sequence[float], win_rates: Sequence[float]
) -> RaterProfile:
    """Build a profile directly from (percentile, win rate) rows."""
    points = [
        WinRatePoint(percentile=float(p), win_rate=float(w))
        for p, w in zip(percentiles, win_rates, strict=True)
    ]
    curve = fit_win_rate_curve(points, rater_id=rater_id)
    return RaterProfile(rater_id=rater_id, curve=curve)


def profiles_to_json(profiles: Sequence[RaterProfile], path: str | Path | None = None) -> str:
    """Serialize profiles to the {rater_id, knots, gamma} JSON schema."""
    payload = [
        {
            "rater_id": p.rater_id,
            "knots": [[k.percentile, k.win_rate] for k in p.curve.knots],
            "gamma": p.gamma,
        }
        for p in profiles
    ]
    text = json.dumps(payload, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def profiles_from_json(path: str | Path) -> list[RaterProfile]:
    """Load profiles written by profiles_to_json."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AlignmentError(f"invalid profiles JSON: {exc.msg}") from exc
    profiles = []
    for record in payload:
        try:
            points = [
                WinRatePoint(percentile=float(p), win_rate=float(w))
                for p, w in record["knots"]
            ]
            curve = WinRateCurve(points, rater_id=record["rater_id"])
            profiles.append(
                RaterProfile(
                    rater_id=record["rater_id"], curve=curve, gamma=record["gamma"]
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise AlignmentError(f"malformed profile record: {record!r}") from exc
    return profiles


def reference_winrate_table() -> dict:
    """Packaged per-decile win-rate table for two judges on one corpus."""
    with resources.files("fire_select.fixtures").joinpath("winrate_reference.json").open(
        "r", encoding="utf-8"
    ) as handle:
        return json.load(handle)
