"""Top-k, temperature sampling, progressive refinement, and baselines."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fire_select import (
    IntegrationParams,
    SelectionError,
    SelectionManifest,
    SelectionPlan,
    SyntheticJudge,
    align_corpus,
    baseline_integrations,
    build_model,
    build_profiles,
    iteration_bound,
    progressive_select,
    sample_with_temperature,
    select,
    select_top_k,
)

from conftest import build_corpus


class TestPlanValidation:
    def test_unknown_mode(self):
        with pytest.raises(SelectionError):
            SelectionPlan(mode="best_effort", k=5)

    def test_bad_k(self):
        with pytest.raises(SelectionError):
            SelectionPlan(mode="top_k", k=0)

    def test_sampled_needs_positive_tau(self):
        with pytest.raises(SelectionError):
            SelectionPlan(mode="sampled", k=5, tau=0.0)

    def test_progressive_eta_range(self):
        with pytest.raises(SelectionError):
            SelectionPlan(mode="progressive", k=5, eta=100.0)
        with pytest.raises(SelectionError):
            SelectionPlan(mode="progressive", k=5, eta=0.0)

    def test_progressive_beta(self):
        with pytest.raises(SelectionError):
            SelectionPlan(mode="progressive", k=5, beta=0.5)


class TestTopK:
    def test_hand_case(self):
        manifest = select_top_k(["a", "b", "c", "d"], np.array([0.1, 0.9, 0.5, 0.7]), 2)
        assert manifest.doc_ids == ["b", "d"]
        assert manifest.ratings == [0.9, 0.7]

    def test_ties_broken_by_doc_id(self):
        manifest = select_top_k(["zz", "aa", "mm"], np.array([1.0, 1.0, 1.0]), 2)
        assert manifest.doc_ids == ["aa", "mm"]

    def test_k_equals_n(self):
        manifest = select_top_k(["a", "b"], np.array([0.2, 0.8]), 2)
        assert manifest.doc_ids == ["b", "a"]

    def test_k_out_of_range(self):
        with pytest.raises(SelectionError):
            select_top_k(["a"], np.array([1.0]), 2)
        with pytest.raises(SelectionError):
            select_top_k(["a"], np.array([1.0]), 0)

    def test_nonfinite_rejected(self):
        with pytest.raises(SelectionError):
            select_top_k(["a", "b"], np.array([1.0, float("nan")]), 1)


class TestTemperatureSampling:
    def test_two_doc_closed_form(self):
        # P(pick the rating-2 doc) = e / (1 + e)
        ids = ["lo", "hi"]
        ratings = np.array([1.0, 2.0])
        wins = sum(
            sample_with_temperature(ids, ratings, k=1, tau=1.0, seed=s).doc_ids[0] == "hi"
            for s in range(20_000)
        )
        expected = math.e / (1 + math.e)
        assert wins / 20_000 == pytest.approx(expected, abs=0.01)

    def test_tiny_tau_reproduces_top_k(self):
        ids = [f"d{i}" for i in range(6)]
        ratings = np.array([0.3, 0.9, 0.1, 0.7, 0.5, 0.2])
        expected = select_top_k(ids, ratings, 3).doc_ids
        for seed in range(20):
            drawn = sample_with_temperature(ids, ratings, k=3, tau=1e-9, seed=seed).doc_ids
            assert drawn == expected

    def test_underflow_fallback_orders_by_rating(self):
        # after the top doc is drawn every remaining weight is exactly zero
        ids = ["a", "b", "c"]
        ratings = np.array([1.0, 2.0, 3.0])
        manifest = sample_with_temperature(ids, ratings, k=3, tau=1e-12, seed=0)
        assert manifest.doc_ids == ["c", "b", "a"]

    def test_without_replacement(self):
        ids = [f"d{i}" for i in range(10)]
        ratings = np.linspace(0, 1, 10)
        for seed in range(10):
            manifest = sample_with_temperature(ids, ratings, k=10, tau=5.0, seed=seed)
            assert sorted(manifest.doc_ids) == sorted(ids)

    def test_deterministic_per_seed(self):
        ids = [f"d{i}" for i in range(8)]
        ratings = np.random.default_rng(0).uniform(size=8)
        a = sample_with_temperature(ids, ratings, k=4, tau=0.7, seed=3).doc_ids
        b = sample_with_temperature(ids, ratings, k=4, tau=0.7, seed=3).doc_ids
        assert a == b

    def test_tau_validation(self):
        with pytest.raises(SelectionError):
            sample_with_temperature(["a", "b"], np.array([1.0, 2.0]), k=1, tau=-1.0, seed=0)


class TestIterationBound:
    def test_hand_values(self):
        assert iteration_bound(50_000, 1_000, 60.0) == 9
        assert iteration_bound(100, 100, 60.0) == 1
        assert iteration_bound(100, 200, 60.0) == 1
        assert iteration_bound(1_000, 10, 50.0) == math.ceil(math.log(0.01) / math.log(0.5)) + 1


def oracle_progressive(doc_ids, aligned, o, gamma, plan):
    """Straight-line re-implementation of the progressive loop."""
    ids = list(doc_ids)
    n = len(ids)
    base = aligned @ (o * gamma)  # same matrix-vector product shape as the package
    ratings = {i: float(base[i]) for i in range(n)}

    def ranked(positions):
        return sorted(positions, key=lambda i: (-ratings[i], ids[i]))

    def reduce_to(positions):
        keep = max(int(math.floor(len(positions) * plan.eta / 100.0)), plan.k)
        return ranked(positions)[:keep]

    def refine(part):
        rows = aligned[part]
        if rows.shape[0] < 2:
            return
        if np.any(rows.max(axis=0) == rows.min(axis=0)):
            return  # constant column: correlation undefined, keep ratings
        r = np.corrcoef(rows, rowvar=False)
        r = np.clip(r, -1.0, 1.0)
        weights = (1.5 - np.abs(r)) - np.exp2(-(r**2))
        np.fill_diagonal(weights, 0.0)
        if np.all(weights == 0.0):
            return
        vector = weights.sum(axis=1)
        vector = vector / np.linalg.norm(vector)
        for _ in range(50):
            vector = weights @ vector
            vector = vector / np.linalg.norm(vector)
        part_ratings = rows @ (vector * gamma)
        for pos, value in zip(part, part_ratings):
            ratings[pos] = float(value)

    working = reduce_to(range(n))
    n_parts = min(plan.n_init, plan.n_max)
    iterations = 0
    while len(working) > plan.k:
        if n_parts > 1:
            size = len(working)
            bounds = [math.ceil(j * size / n_parts) for j in range(n_parts + 1)]
            for j in range(n_parts):
                refine(working[bounds[j]:bounds[j + 1]])
        iterations += 1
        working = reduce_to(working)
        n_parts = min(int(n_parts * plan.beta), plan.n_max)
    final = ranked(working)[: plan.k]
    return [ids[i] for i in final], iterations


def fit_stack(n_docs, seed, rater_ids=("alpha", "beta", "gamma_r")):
    corpus, latent = build_corpus(n_docs, rater_ids=rater_ids, seed=seed)
    judge = SyntheticJudge(dict(zip(corpus.doc_ids, latent.tolist())), sigma=0.3)
    profiles = build_profiles(corpus, judge, intervals=5, per_interval=30, seed=seed)
    model = build_model(corpus, profiles, IntegrationParams(), seed=seed)
    return corpus, profiles, model


class TestProgressive:
    def test_single_part_equals_top_k(self):
        corpus, profiles, model = fit_stack(300, seed=20)
        plan = SelectionPlan(mode="progressive", k=40, n_init=1, n_max=1, seed=0)
        progressive = progressive_select(corpus, profiles, plan, model=model)
        flat = select(corpus, profiles, SelectionPlan(mode="top_k", k=40), model=model)
        assert progressive.doc_ids == flat.doc_ids
        assert progressive.ratings == flat.ratings

    def test_matches_reference_implementation(self):
        for seed in (21, 22, 23):
            corpus, profiles, model = fit_stack(400, seed=seed)
            plan = SelectionPlan(
                mode="progressive", k=30, eta=60.0, n_init=2, beta=4.0, n_max=16, seed=0
            )
            manifest = progressive_select(corpus, profiles, plan, model=model)
            aligned = align_corpus(corpus, profiles)
            expected_ids, expected_iterations = oracle_progressive(
                corpus.doc_ids, aligned, model.o, model.gamma, plan
            )
            assert manifest.doc_ids == expected_ids
            assert manifest.provenance["iterations"] == expected_iterations

    def test_iterations_within_bound(self):
        corpus, profiles, model = fit_stack(2_000, seed=24)
        plan = SelectionPlan(mode="progressive", k=50, eta=60.0, seed=0)
        manifest = progressive_select(corpus, profiles, plan, model=model)
        assert len(manifest) == 50
        assert manifest.provenance["iterations"] <= iteration_bound(2_000, 50, 60.0)

    def test_k_larger_than_corpus(self):
        corpus, profiles, model = fit_stack(100, seed=25)
        plan = SelectionPlan(mode="progressive", k=101, seed=0)
        with pytest.raises(SelectionError):
            progressive_select(corpus, profiles, plan, model=model)

    def test_wrong_mode_rejected(self):
        corpus, profiles, model = fit_stack(100, seed=26)
        with pytest.raises(SelectionError):
            progressive_select(
                corpus, profiles, SelectionPlan(mode="top_k", k=10), model=model
            )


class TestBaselines:
    def setup_matrix(self, seed=27):
        rng = np.random.default_rng(seed)
        matrix = rng.uniform(size=(60, 3))
        ids = [f"d{i:02d}" for i in range(60)]
        return ids, matrix

    def test_average_is_minmax_mean(self):
        ids, matrix = self.setup_matrix()
        manifest = baseline_integrations(ids, matrix, "average", k=10)
        lo, hi = matrix.min(axis=0), matrix.max(axis=0)
        scores = ((matrix - lo) / (hi - lo)).mean(axis=1)
        expected = select_top_k(ids, scores, 10)
        assert manifest.doc_ids == expected.doc_ids

    def test_max_criteria_is_row_max(self):
        ids, matrix = self.setup_matrix()
        manifest = baseline_integrations(ids, matrix, "max_criteria", k=10)
        expected = select_top_k(ids, matrix.max(axis=1), 10)
        assert manifest.doc_ids == expected.doc_ids

    def test_mix_criteria_samples_from_union(self):
        ids, matrix = self.setup_matrix()
        union = set()
        for col in range(matrix.shape[1]):
            union.update(select_top_k(ids, matrix[:, col], 10).doc_ids)
        manifest = baseline_integrations(ids, matrix, "mix_criteria", k=10, seed=5)
        assert len(manifest) == 10
        assert set(manifest.doc_ids) <= union
        repeat = baseline_integrations(ids, matrix, "mix_criteria", k=10, seed=5)
        assert manifest.doc_ids == repeat.doc_ids
        different = baseline_integrations(ids, matrix, "mix_criteria", k=10, seed=6)
        assert manifest.doc_ids != different.doc_ids

    def test_unknown_method(self):
        ids, matrix = self.setup_matrix()
        with pytest.raises(SelectionError):
            baseline_integrations(ids, matrix, "median", k=5)


class TestSelectDispatcher:
    def test_top_k_mode(self):
        corpus, profiles, model = fit_stack(200, seed=28)
        manifest = select(corpus, profiles, SelectionPlan(mode="top_k", k=25), model=model)
        aligned = align_corpus(corpus, profiles)
        expected = select_top_k(corpus.doc_ids, aligned @ model.weights(), 25)
        assert manifest.doc_ids == expected.doc_ids

    def test_sampled_mode_uses_plan_seed(self):
        corpus, profiles, model = fit_stack(200, seed=29)
        plan = SelectionPlan(mode="sampled", k=25, tau=0.5, seed=77)
        first = select(corpus, profiles, plan, model=model)
        second = select(corpus, profiles, plan, model=model)
        assert first.doc_ids == second.doc_ids

    def test_progressive_mode_dispatches(self):
        corpus, profiles, model = fit_stack(200, seed=30)
        plan = SelectionPlan(mode="progressive", k=25, seed=0)
        manifest = select(corpus, profiles, plan, model=model)
        assert manifest.provenance["mode"] == "progressive"
        assert len(manifest) == 25


class TestManifest:
    def test_write_read_round_trip(self, tmp_path):
        manifest = SelectionManifest(
            doc_ids=["a", "b"], ratings=[0.9, 0.1], provenance={"mode": "top_k"}
        )
        path = tmp_path / "manifest.jsonl"
        manifest.write(path)
        loaded = SelectionManifest.read(path)
        assert loaded.doc_ids == manifest.doc_ids
        assert loaded.ratings == manifest.ratings

    def test_duplicate_ids_rejected(self):
        with pytest.raises(SelectionError):
            SelectionManifest(doc_ids=["a", "a"], ratings=[1.0, 2.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(SelectionError):
            SelectionManifest(doc_ids=["a"], ratings=[1.0, 2.0])
