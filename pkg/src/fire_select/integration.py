"""Rater integration: orthogonality graph, centrality, and combined ratings.

Raters are vertices of a complete graph whose edge weights measure how
much independent information two raters carry: 0.5 for uncorrelated
raters, 0 for fully correlated ones. Power iteration on the graph yields
each rater's overall orthogonality o, and a document's integrated rating
is the aligned-rating row weighted by o and by intrinsic reliability
gamma.

Fully correlated raters carry no independent signal and make the graph
degenerate, so they are merged into one representative before the graph
is built.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .alignment import RaterProfile, align_corpus
from .corpus import Corpus
from .seeding import derive_seed

logger = logging.getLogger(__name__)

KERNELS = ("linear", "gaussian", "sym_gaussian")
DEFAULT_KERNEL = "sym_gaussian"
DEFAULT_ALPHA = 50
DEFAULT_DAMPING = 1.0
DEFAULT_COLLAPSE_THRESHOLD = 0.999
DEFAULT_CORRELATION_SAMPLE = 100_000

# gaussian kernel scale fixed by the boundary conditions O(0)=0.5, O(1)=0:
# exp(-r^2 / (2 c^2)) with c^2 = 1/(2 ln 2) is exactly 2^(-r^2)
GAUSSIAN_C_SQUARED = 1.0 / (2.0 * math.log(2.0))


class IntegrationError(Exception):
    """Invalid integration inputs."""


class DegenerateCorrelationError(IntegrationError):
    """A score column is constant, so Pearson correlation is undefined."""


class DegenerateOrthogonalityError(IntegrationError):
    """The orthogonality graph carries no weight (fully correlated raters)."""


class AllRatersCollapsedError(DegenerateOrthogonalityError):
    """Every rater merged into one; integration reduces to that rater."""

    def __init__(self, survivor: str):
        super().__init__(
            f"all raters collapsed into {survivor!r}; integration degenerates "
            "to the single surviving rater"
        )
        self.survivor = survivor


def pearson(xs: np.ndarray, ys: np.ndarray) -> float:
    """Pearson correlation coefficient of two equal-length vectors."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or ys.ndim != 1 or xs.size != ys.size:
        raise IntegrationError("pearson needs two 1-d vectors of equal length")
    if xs.size < 2:
        raise IntegrationError("pearson needs at least 2 observations")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    vx = float(dx @ dx)
    vy = float(dy @ dy)
    if vx == 0.0 or vy == 0.0:
        raise DegenerateCorrelationError("constant vector has no correlation")
    r = float(dx @ dy) / math.sqrt(vx * vy)
    return min(1.0, max(-1.0, r))


def orthogonality(r, kernel: str = DEFAULT_KERNEL):
    """Map a correlation to an orthogonality weight in [0, 0.5].

    All kernels hit 0.5 at r=0 and 0 at |r|=1 and decrease strictly in
    |r| between. Accepts scalars or arrays.
    """
    if kernel not in KERNELS:
        raise IntegrationError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    arr = np.asarray(r, dtype=float)
    if np.any(np.abs(arr) > 1.0):
        raise IntegrationError("correlation outside [-1, 1]")
    if kernel == "linear":
        out = 0.5 * (1.0 - np.abs(arr))
    elif kernel == "gaussian":
        out = np.exp2(-arr * arr) - 0.5
    else:
        out = (1.5 - np.abs(arr)) - np.exp2(-arr * arr)
    return float(out) if arr.ndim == 0 else out


@dataclass(frozen=True)
class OrthogonalityGraph:
    """Complete rater graph; edge weights are pairwise orthogonalities."""

    rater_ids: tuple[str, ...]
    weights: np.ndarray
    kernel: str = DEFAULT_KERNEL

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", weights)
        n = len(self.rater_ids)
        if weights.shape != (n, n):
            raise IntegrationError(f"weight matrix shape {weights.shape} != ({n}, {n})")
        if n < 2:
            raise IntegrationError("graph needs at least 2 raters")
        if not np.allclose(weights, weights.T, atol=1e-12):
            raise IntegrationError("weight matrix must be symmetric")
        if np.any(np.diagonal(weights) != 0.0):
            raise IntegrationError("diagonal must be zero")
        if np.any(weights < -1e-12) or np.any(weights > 0.5 + 1e-12):
            raise IntegrationError("edge weights must lie in [0, 0.5]")

    @property
    def size(self) -> int:
        return len(self.rater_ids)


def _correlation_matrix(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise IntegrationError("expected a 2-d (rows, raters) matrix")
    if matrix.shape[0] < 2:
        raise IntegrationError("need at least 2 rows to correlate raters")
    if matrix.shape[1] < 2:
        raise IntegrationError("need at least 2 raters")
    # max == min is exact; std == 0.0 can miss a constant column because
    # the mean subtraction leaves rounding residue of order 1e-17
    constant = np.flatnonzero(matrix.max(axis=0) == matrix.min(axis=0))
    if constant.size:
        raise DegenerateCorrelationError(
            f"rater column(s) {constant.tolist()} are constant"
        )
    # pair by pair on contiguous copies so every entry depends only on its
    # own two columns; dropping a duplicate rater then leaves the surviving
    # entries bit-identical, which the collapse path relies on
    columns = [np.ascontiguousarray(matrix[:, j]) for j in range(matrix.shape[1])]
    out = np.eye(matrix.shape[1])
    for i in range(len(columns)):
        for j in range(i + 1, len(columns)):
            out[i, j] = out[j, i] = pearson(columns[i], columns[j])
    return out


def build_graph(
    matrix: np.ndarray,
    kernel: str = DEFAULT_KERNEL,
    rater_ids: Sequence[str] | None = None,
) -> OrthogonalityGraph:
    """Orthogonality graph from a (rows, raters) rating matrix."""
    matrix = np.asarray(matrix, dtype=float)
    correlations = _correlation_matrix(matrix)
    weights = orthogonality(correlations, kernel)
    np.fill_diagonal(weights, 0.0)
    if rater_ids is None:
        rater_ids = tuple(f"rater_{i}" for i in range(matrix.shape[1]))
    return OrthogonalityGraph(rater_ids=tuple(rater_ids), weights=weights, kernel=kernel)


def collapse_correlated(
    graph: OrthogonalityGraph,
    matrix: np.ndarray,
    r_threshold: float = DEFAULT_COLLAPSE_THRESHOLD,
) -> tuple[OrthogonalityGraph, dict[str, str]]:
    """Merge raters whose pairwise |r| reaches the threshold.

    Groups of (near-)fully correlated raters add no independent
    information and zero out their graph edges, so each group keeps only
    its first member. Returns the rebuilt graph over survivors and a map
    {dropped rater -> representative}. Raises AllRatersCollapsedError if
    a single rater survives.
    """
    if not 0.99 < r_threshold <= 1.0:
        raise IntegrationError(
            f"collapse threshold {r_threshold} outside (0.99, 1]"
        )
    matrix = np.asarray(matrix, dtype=float)
    n = graph.size
    if matrix.ndim != 2 or matrix.shape[1] != n:
        raise IntegrationError("matrix columns do not match graph raters")
    correlations = _correlation_matrix(matrix)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(correlations[i, j]) >= r_threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    roots = [find(i) for i in range(n)]
    survivors = sorted(set(roots))
    merged = {
        graph.rater_ids[i]: graph.rater_ids[root]
        for i, root in enumerate(roots)
        if i != root
    }
    if merged:
        logger.info("collapsed fully correlated raters: %s", merged)
    if len(survivors) == 1:
        raise AllRatersCollapsedError(graph.rater_ids[survivors[0]])
    if not merged:
        return graph, {}
    kept_ids = tuple(graph.rater_ids[i] for i in survivors)
    rebuilt = build_graph(matrix[:, survivors], kernel=graph.kernel, rater_ids=kept_ids)
    return rebuilt, merged


def degree_centrality(graph: OrthogonalityGraph) -> np.ndarray:
    """Total edge weight at each vertex."""
    return graph.weights.sum(axis=1)


def _as_weight_matrix(graph: "OrthogonalityGraph | np.ndarray") -> np.ndarray:
    """Accept a graph or any symmetric nonnegative matrix."""
    if isinstance(graph, OrthogonalityGraph):
        return graph.weights
    weights = np.asarray(graph, dtype=float)
    if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
        raise IntegrationError(f"weight matrix must be square, got shape {weights.shape}")
    if not np.all(np.isfinite(weights)):
        raise IntegrationError("weight matrix contains non-finite entries")
    if not np.allclose(weights, weights.T, atol=1e-12, rtol=0.0):
        raise IntegrationError("weight matrix must be symmetric")
    if np.any(weights < 0.0):
        raise IntegrationError("weight matrix must be nonnegative")
    return weights


def power_iterate(
    graph: "OrthogonalityGraph | np.ndarray",
    alpha: int = DEFAULT_ALPHA,
    damping: float = DEFAULT_DAMPING,
) -> np.ndarray:
    """Overall orthogonality: alpha power-iteration steps from the degree
    centrality, returned with unit Euclidean norm.

    Accepts an orthogonality graph or any symmetric nonnegative matrix.
    With damping 1 each step multiplies by the weight matrix and
    renormalizes (the direction matches the un-normalized power sequence;
    renormalizing avoids overflow). With damping d < 1 the update is
    o <- d * M o + (1 - d) * 1, normalized once at the end.
    """
    weights = _as_weight_matrix(graph)
    if alpha < 0:
        raise IntegrationError("alpha must be nonnegative")
    if not 0.0 < damping <= 1.0:
        raise IntegrationError(f"damping {damping} outside (0, 1]")
    if np.all(weights == 0.0):
        raise DegenerateOrthogonalityError(
            "orthogonality graph has no weight; raters are fully correlated "
            "and should be collapsed first"
        )
    vector = weights.sum(axis=1)
    if damping == 1.0:
        vector = vector / np.linalg.norm(vector)
        for _ in range(alpha):
            vector = weights @ vector
            norm = np.linalg.norm(vector)
            if norm == 0.0:
                raise DegenerateOrthogonalityError("power iteration collapsed to zero")
            vector = vector / norm
        return vector
    ones = np.ones(weights.shape[0])
    for _ in range(alpha):
        vector = damping * (weights @ vector) + (1.0 - damping) * ones
    return vector / np.linalg.norm(vector)


@dataclass(frozen=True)
class IntegrationModel:
    """Everything needed to turn an aligned-rating row into one number."""

    rater_ids: tuple[str, ...]
    o: np.ndarray
    gamma: np.ndarray
    alpha: int = DEFAULT_ALPHA
    damping: float = DEFAULT_DAMPING
    kernel: str = DEFAULT_KERNEL
    correlation_basis: str = "aligned"
    merged: dict[str, str] = field(default_factory=dict)
    graph: OrthogonalityGraph | None = None

    def __post_init__(self) -> None:
        o = np.asarray(self.o, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        object.__setattr__(self, "o", o)
        object.__setattr__(self, "gamma", gamma)
        n = len(self.rater_ids)
        if o.shape != (n,) or gamma.shape != (n,):
            raise IntegrationError("o and gamma must have one entry per rater")
        if abs(float(np.linalg.norm(o)) - 1.0) > 1e-12:
            raise IntegrationError("o must have unit Euclidean norm")

    def weights(self) -> np.ndarray:
        return self.o * self.gamma

    def to_json(self, path: str | Path | None = None) -> str:
        payload = {
            "rater_ids": list(self.rater_ids),
            "o": self.o.tolist(),
            "gamma": self.gamma.tolist(),
            "alpha": self.alpha,
            "damping": self.damping,
            "kernel": self.kernel,
            "correlation_basis": self.correlation_basis,
            "merged": dict(self.merged),
            "orthogonality": self.graph.weights.tolist() if self.graph is not None else None,
        }
        text = json.dumps(payload, indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, path: str | Path) -> "IntegrationModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            rater_ids = tuple(payload["rater_ids"])
            graph = None
            if payload.get("orthogonality") is not None and len(rater_ids) >= 2:
                graph = OrthogonalityGraph(
                    rater_ids=rater_ids,
                    weights=np.asarray(payload["orthogonality"], dtype=float),
                    kernel=payload["kernel"],
                )
            return cls(
                rater_ids=rater_ids,
                o=np.asarray(payload["o"], dtype=float),
                gamma=np.asarray(payload["gamma"], dtype=float),
                alpha=int(payload["alpha"]),
                damping=float(payload["damping"]),
                kernel=payload["kernel"],
                correlation_basis=payload["correlation_basis"],
                merged=dict(payload.get("merged", {})),
                graph=graph,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise IntegrationError(f"malformed model JSON at {path}") from exc


def integrated_rating(aligned_row: np.ndarray, model: IntegrationModel) -> float:
    """I(x) = sum_j A_j(x) * o_j * gamma_j."""
    row = np.asarray(aligned_row, dtype=float)
    if row.shape != (len(model.rater_ids),):
        raise IntegrationError(
            f"aligned row has {row.shape} entries, model expects {len(model.rater_ids)}"
        )
    return float(row @ model.weights())


def integrated_ratings(aligned: np.ndarray, model: IntegrationModel) -> np.ndarray:
    """Vectorized integrated_rating over an aligned matrix."""
    aligned = np.asarray(aligned, dtype=float)
    if aligned.ndim != 2 or aligned.shape[1] != len(model.rater_ids):
        raise IntegrationError(
            f"aligned matrix shape {aligned.shape} does not match model raters"
        )
    return aligned @ model.weights()


@dataclass(frozen=True)
class IntegrationParams:
    """Config knobs for building an IntegrationModel."""

    kernel: str = DEFAULT_KERNEL
    alpha: int = DEFAULT_ALPHA
    damping: float = DEFAULT_DAMPING
    correlation_basis: str = "aligned"
    correlation_sample: int = DEFAULT_CORRELATION_SAMPLE
    collapse_threshold: float = DEFAULT_COLLAPSE_THRESHOLD
    collapse: bool = True

    def __post_init__(self) -> None:
        if self.kernel not in KERNELS:
            raise IntegrationError(f"unknown kernel {self.kernel!r}")
        if self.alpha < 0:
            raise IntegrationError("alpha must be nonnegative")
        if not 0.0 < self.damping <= 1.0:
            raise IntegrationError(f"damping {self.damping} outside (0, 1]")
        if self.correlation_basis not in ("aligned", "raw"):
            raise IntegrationError(
                f"correlation_basis must be 'aligned' or 'raw', got {self.correlation_basis!r}"
            )
        if self.correlation_sample < 2:
            raise IntegrationError("correlation_sample must be at least 2")


def _correlation_rows(n_rows: int, sample: int, seed: int) -> np.ndarray | slice:
    if n_rows <= sample:
        return slice(None)
    rng = np.random.default_rng(derive_seed(seed, "correlation"))
    return np.sort(rng.choice(n_rows, size=sample, replace=False))


def build_model(
    corpus: Corpus,
    profiles: Sequence[RaterProfile],
    params: IntegrationParams = IntegrationParams(),
    seed: int = 0,
) -> IntegrationModel:
    """Build the integration model: collapse, graph, power iteration.

    Correlations are computed over the configured basis (aligned ratings
    by default, polarity-adjusted raw scores otherwise) on a seeded row
    subsample when the corpus exceeds params.correlation_sample.
    """
    if not profiles:
        raise IntegrationError("no profiles to integrate")
    gamma_by_id = {p.rater_id: p.gamma for p in profiles}
    rater_ids = tuple(p.rater_id for p in profiles)
    if len(profiles) == 1:
        logger.warning("single rater %s: overall orthogonality is trivially [1]", rater_ids[0])
        return IntegrationModel(
            rater_ids=rater_ids,
            o=np.array([1.0]),
            gamma=np.array([profiles[0].gamma]),
            alpha=params.alpha,
            damping=params.damping,
            kernel=params.kernel,
            correlation_basis=params.correlation_basis,
        )
    if params.correlation_basis == "aligned":
        basis = align_corpus(corpus, profiles)
    else:
        basis = corpus.quality_matrix()
        order = {rid: pos for pos, rid in enumerate(corpus.rater_ids)}
        basis = basis[:, [order[rid] for rid in rater_ids]]
    rows = _correlation_rows(basis.shape[0], params.correlation_sample, seed)
    basis = basis[rows]
    graph = build_graph(basis, kernel=params.kernel, rater_ids=rater_ids)
    merged: dict[str, str] = {}
    if params.collapse:
        try:
            graph, merged = collapse_correlated(graph, basis, params.collapse_threshold)
        except AllRatersCollapsedError as exc:
            logger.warning("%s", exc)
            return IntegrationModel(
                rater_ids=(exc.survivor,),
                o=np.array([1.0]),
                gamma=np.array([gamma_by_id[exc.survivor]]),
                alpha=params.alpha,
                damping=params.damping,
                kernel=params.kernel,
                correlation_basis=params.correlation_basis,
                merged={rid: exc.survivor for rid in rater_ids if rid != exc.survivor},
            )
    o = power_iterate(graph, alpha=params.alpha, damping=params.damping)
    gamma = np.array([gamma_by_id[rid] for rid in graph.rater_ids])
    return IntegrationModel(
        rater_ids=graph.rater_ids,
        o=o,
        gamma=gamma,
        alpha=params.alpha,
        damping=params.damping,
        kernel=params.kernel,
        correlation_basis=params.correlation_basis,
        merged=merged,
        graph=graph,
    )
