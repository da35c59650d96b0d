"""Shared corpus builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from fire_select import Corpus, Document, RaterSpec, SyntheticJudge


def build_corpus(
    n_docs: int,
    rater_ids=("alpha", "beta", "gamma_r"),
    seed: int = 0,
    noise: float = 0.3,
    lower_is_better=(),
):
    """Corpus whose raters are noisy views of one latent quality."""
    rng = np.random.default_rng(seed)
    latent = rng.normal(size=n_docs)
    columns = {
        rid: latent + noise * (i + 1) * rng.normal(size=n_docs)
        for i, rid in enumerate(rater_ids)
    }
    documents = []
    for row in range(n_docs):
        scores = {}
        for rid in rater_ids:
            value = columns[rid][row]
            scores[rid] = -value if rid in lower_is_better else value
        documents.append(
            Document(doc_id=f"doc{row:05d}", text=f"sample text {row}", scores=scores)
        )
    raters = [
        RaterSpec(rater_id=rid, higher_is_better=rid not in lower_is_better)
        for rid in rater_ids
    ]
    return Corpus(documents=documents, raters=raters), latent


@pytest.fixture
def small_corpus():
    corpus, _ = build_corpus(120, seed=1)
    return corpus


@pytest.fixture
def judged_corpus():
    """Corpus plus a noiseless judge that knows the latent truth."""
    corpus, latent = build_corpus(300, seed=2)
    truth = dict(zip(corpus.doc_ids, latent.tolist()))
    return corpus, SyntheticJudge(truth, sigma=0.0)
