"""Tests for the synthetic benchmark scenarios and ablation harness."""

import json

import numpy as np
import pytest

from fire_select.corpus import ingest
from fire_select.judge import SyntheticJudge
from fire_select.selection import SelectionManifest
from fire_select.synthbench import (
    VARIANTS,
    LatentSpec,
    SynthBenchError,
    SyntheticRater,
    default_scenario,
    evaluate,
    format_report,
    generate,
    run_ablation,
    write_scenario,
)


def two_rater_spec(n_docs=500, seed=3):
    return LatentSpec(
        n_docs=n_docs,
        n_dims=1,
        seed=seed,
        raters=(
            SyntheticRater("plain", weights=(1.0,)),
            SyntheticRater("cubed", weights=(1.0,), distortion="cube"),
        ),
    )


class TestSyntheticRater:
    def test_negative_weight_rejected(self):
        with pytest.raises(SynthBenchError, match="negative mixing weights"):
            SyntheticRater("bad", weights=(1.0, -0.5))

    def test_all_zero_weights_rejected(self):
        with pytest.raises(SynthBenchError, match="all-zero"):
            SyntheticRater("bad", weights=(0.0, 0.0))

    def test_negative_noise_rejected(self):
        with pytest.raises(SynthBenchError, match="negative noise"):
            SyntheticRater("bad", weights=(1.0,), noise=-0.1)

    def test_unknown_distortion_rejected(self):
        with pytest.raises(SynthBenchError, match="unknown distortion"):
            SyntheticRater("bad", weights=(1.0,), distortion="sqrt")

    def test_weights_coerced_to_floats(self):
        rater = SyntheticRater("ok", weights=(1, 2))
        assert rater.weights == (1.0, 2.0)


class TestLatentSpec:
    def test_weight_length_must_match_dims(self):
        with pytest.raises(SynthBenchError, match="expected 2"):
            LatentSpec(n_docs=10, n_dims=2, raters=(SyntheticRater("a", weights=(1.0,)),))

    def test_duplicate_rater_ids_rejected(self):
        raters = (
            SyntheticRater("a", weights=(1.0,)),
            SyntheticRater("a", weights=(1.0,)),
        )
        with pytest.raises(SynthBenchError, match="duplicate rater id"):
            LatentSpec(n_docs=10, n_dims=1, raters=raters)

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"n_docs": 0}, "n_docs"),
            ({"n_dims": 0}, "n_dims"),
            ({"raters": ()}, "at least one rater"),
            ({"judge_sigma": -1.0}, "judge_sigma"),
        ],
    )
    def test_field_validation(self, kwargs, message):
        base = dict(
            n_docs=10, n_dims=1, raters=(SyntheticRater("a", weights=(1.0,)),)
        )
        base.update(kwargs)
        with pytest.raises(SynthBenchError, match=message):
            LatentSpec(**base)

    def test_dict_round_trip(self):
        spec = default_scenario(n_docs=100, seed=7)
        assert LatentSpec.from_dict(spec.to_dict()) == spec

    def test_from_file(self, tmp_path):
        spec = two_rater_spec(n_docs=50)
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(spec.to_dict()), encoding="utf-8")
        assert LatentSpec.from_file(path) == spec

    def test_from_file_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(SynthBenchError, match="invalid JSON"):
            LatentSpec.from_file(path)

    def test_from_dict_missing_field(self):
        with pytest.raises(SynthBenchError, match="malformed scenario"):
            LatentSpec.from_dict({"n_docs": 10, "n_dims": 1})


class TestDefaultScenario:
    def test_shape(self):
        spec = default_scenario(n_docs=1000, seed=5)
        assert spec.n_docs == 1000
        assert spec.n_dims == 2
        assert spec.seed == 5
        assert spec.judge_sigma == 0.35
        assert [r.rater_id for r in spec.raters] == [
            "fluency", "coherence", "informativeness", "novelty",
        ]

    def test_covers_both_latent_dimensions(self):
        spec = default_scenario()
        stacked = np.array([r.weights for r in spec.raters])
        assert (stacked.sum(axis=0) > 0).all()

    def test_one_rater_is_much_noisier(self):
        spec = default_scenario()
        noises = sorted(r.noise for r in spec.raters)
        assert noises[-1] > 5 * noises[-2]


class TestGenerate:
    def test_deterministic(self):
        spec = two_rater_spec()
        first_corpus, first_truth = generate(spec)
        second_corpus, second_truth = generate(spec)
        np.testing.assert_array_equal(first_truth, second_truth)
        np.testing.assert_array_equal(
            first_corpus.quality_matrix(), second_corpus.quality_matrix()
        )
        assert first_corpus.doc_ids == second_corpus.doc_ids

    def test_seed_changes_output(self):
        base, _ = generate(two_rater_spec(seed=3))
        other, _ = generate(two_rater_spec(seed=4))
        assert not np.array_equal(base.quality_matrix(), other.quality_matrix())

    def test_doc_ids_padded(self):
        corpus, _ = generate(two_rater_spec(n_docs=12))
        assert corpus.doc_ids[0] == "d000000"
        assert corpus.doc_ids[-1] == "d000011"

    def test_noiseless_columns_are_distortions_of_the_same_signal(self):
        corpus, truth = generate(two_rater_spec())
        matrix = corpus.quality_matrix()
        plain = matrix[:, corpus.rater_ids.index("plain")]
        cubed = matrix[:, corpus.rater_ids.index("cubed")]
        np.testing.assert_allclose(cubed, plain ** 3, atol=1e-12)
        # one latent dimension, so the truth is that signal itself
        np.testing.assert_allclose(plain, truth, atol=1e-12)

    def test_noise_is_per_rater(self):
        spec = LatentSpec(
            n_docs=200,
            n_dims=1,
            seed=0,
            raters=(
                SyntheticRater("a", weights=(1.0,), noise=0.5),
                SyntheticRater("b", weights=(1.0,), noise=0.5),
            ),
        )
        matrix = generate(spec)[0].quality_matrix()
        assert not np.array_equal(matrix[:, 0], matrix[:, 1])


class TestEvaluate:
    def test_hand_case(self):
        truth = np.array([0.9, 0.5, 0.1, 0.8])
        doc_ids = ["a", "b", "c", "d"]
        manifest = SelectionManifest(doc_ids=("a", "c"), ratings=(1.0, 0.5))
        metrics = evaluate(manifest, truth, doc_ids, k_frac=0.5)
        # true top half is {a, d}; the manifest hits one of the two
        assert metrics["precision_at_frac"] == 0.5
        assert metrics["mean_true_quality"] == pytest.approx(0.5)

    def test_true_top_ties_break_by_doc_id(self):
        truth = np.array([1.0, 1.0, 0.0])
        manifest = SelectionManifest(doc_ids=("a",), ratings=(1.0,))
        metrics = evaluate(manifest, truth, ["a", "b", "c"], k_frac=1 / 3)
        assert metrics["precision_at_frac"] == 1.0

    def test_perfect_selection(self):
        rng = np.random.default_rng(9)
        truth = rng.normal(size=40)
        doc_ids = [f"doc{i}" for i in range(40)]
        top = [doc_ids[i] for i in np.argsort(-truth)[:4]]
        manifest = SelectionManifest(
            doc_ids=tuple(top), ratings=tuple(range(4, 0, -1))
        )
        metrics = evaluate(manifest, truth, doc_ids, k_frac=0.1)
        assert metrics["precision_at_frac"] == 1.0

    def test_length_mismatch_rejected(self):
        manifest = SelectionManifest(doc_ids=("a",), ratings=(1.0,))
        with pytest.raises(SynthBenchError, match="disagree in length"):
            evaluate(manifest, np.ones(3), ["a", "b"])

    def test_unknown_manifest_id_rejected(self):
        manifest = SelectionManifest(doc_ids=("zz",), ratings=(1.0,))
        with pytest.raises(SynthBenchError, match="'zz' not in corpus"):
            evaluate(manifest, np.ones(2), ["a", "b"])

    @pytest.mark.parametrize("k_frac", [0.0, -0.5, 1.5])
    def test_k_frac_range(self, k_frac):
        manifest = SelectionManifest(doc_ids=("a",), ratings=(1.0,))
        with pytest.raises(SynthBenchError, match="k_frac"):
            evaluate(manifest, np.ones(2), ["a", "b"], k_frac=k_frac)


class TestWriteScenario:
    def test_files_round_trip(self, tmp_path):
        spec = two_rater_spec(n_docs=80)
        corpus_path = tmp_path / "corpus.jsonl"
        latents_path = tmp_path / "latents.jsonl"
        write_scenario(spec, corpus_path, latents_path)

        corpus = ingest(corpus_path, ["plain", "cubed"])
        expected_corpus, truth = generate(spec)
        assert corpus.doc_ids == expected_corpus.doc_ids
        np.testing.assert_array_equal(
            corpus.quality_matrix(), expected_corpus.quality_matrix()
        )

        judge = SyntheticJudge.from_file(latents_path)
        best = corpus.document(corpus.doc_ids[int(np.argmax(truth))])
        worst = corpus.document(corpus.doc_ids[int(np.argmin(truth))])
        assert judge.compare(best, worst, seed=0).winner == "A"


@pytest.fixture(scope="module")
def report():
    return run_ablation(default_scenario(n_docs=2000, seed=11), seed=11)


class TestRunAblation:

    def test_row_names(self, report):
        names = [row["variant"] for row in report["rows"]]
        assert names[: len(VARIANTS)] == list(VARIANTS)
        assert names[len(VARIANTS):] == [
            "rater:fluency", "rater:coherence", "rater:informativeness", "rater:novelty",
        ]

    def test_metrics_in_range(self, report):
        for row in report["rows"]:
            assert 0.0 <= row["precision_at_frac"] <= 1.0
            assert np.isfinite(row["mean_true_quality"])

    def test_k_defaults_to_fraction(self, report):
        assert report["k"] == 200
        assert report["k_frac"] == 0.1

    def test_scenario_echoed(self, report):
        assert LatentSpec.from_dict(report["scenario"]) == default_scenario(
            n_docs=2000, seed=11
        )

    def test_deterministic(self, report):
        again = run_ablation(default_scenario(n_docs=2000, seed=11), seed=11)
        assert again["rows"] == report["rows"]

    def test_unknown_variant_rejected(self):
        with pytest.raises(SynthBenchError, match="unknown variants"):
            run_ablation(two_rater_spec(n_docs=50), variants=("full", "bogus"))

    def test_single_raters_optional(self):
        report = run_ablation(
            two_rater_spec(n_docs=300),
            variants=("full",),
            include_single_raters=False,
            per_interval=200,
        )
        assert [row["variant"] for row in report["rows"]] == ["full"]

    def test_explicit_k(self):
        report = run_ablation(
            two_rater_spec(n_docs=300),
            variants=("full",),
            k=25,
            include_single_raters=False,
            per_interval=200,
        )
        assert report["k"] == 25


class TestFormatReport:
    def test_contains_all_rows(self):
        report = run_ablation(
            two_rater_spec(n_docs=300),
            variants=("full", "average"),
            per_interval=200,
        )
        text = format_report(report)
        lines = text.splitlines()
        assert "precision@frac" in lines[1]
        for row in report["rows"]:
            assert any(line.startswith(row["variant"]) for line in lines)
        assert f"k={report['k']}" in lines[0]
