"""End-to-end pipeline: configuration, staged execution, artifact files.

A run owns one root seed and derives per-stage seeds by labeled hashing,
so the same config file always produces byte-identical profiles, model,
and manifest artifacts. Every artifact is written to a temporary file and
renamed into place; a failing stage leaves no partial artifact at a final
path.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .alignment import (
    AlignmentError,
    RaterProfile,
    build_profiles,
    profiles_from_json,
    profiles_to_json,
)
from .corpus import Corpus, CorpusError, RaterSpec, ingest
from .integration import IntegrationError, IntegrationModel, IntegrationParams, build_model
from .judge import EndpointJudge, Judge, JudgeCache, JudgeError, SyntheticJudge
from .seeding import derive_seed
from .selection import SelectionError, SelectionPlan, select

logger = logging.getLogger(__name__)

ENV_PREFIX = "FIRE_"

STAGES = ("config", "align", "integrate", "select", "bench", "inspect")


class ConfigError(Exception):
    """Invalid pipeline configuration."""


class StageError(Exception):
    """A pipeline stage failed; .stage names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def parse_rater_token(token: str | Mapping) -> RaterSpec:
    """Accept "name", "name:lower", "name:higher", or {"id", "polarity"}."""
    if isinstance(token, Mapping):
        try:
            rater_id = token["id"]
        except KeyError:
            raise ConfigError(f"rater entry {token!r} has no 'id'") from None
        polarity = token.get("polarity", "higher")
    else:
        rater_id, _, polarity = str(token).partition(":")
        polarity = polarity or "higher"
    if polarity not in ("higher", "lower"):
        raise ConfigError(f"rater {rater_id!r}: polarity must be 'higher' or 'lower'")
    if not rater_id:
        raise ConfigError(f"empty rater id in {token!r}")
    return RaterSpec(rater_id=rater_id, higher_is_better=polarity == "higher")


@dataclass
class PipelineConfig:
    """Everything `fire run` needs, parsed and validated."""

    corpus_path: Path
    raters: list[RaterSpec]
    judge: dict = field(default_factory=lambda: {"mode": "synthetic", "sigma": 0.0})
    intervals: int = 10
    per_interval: int = 1000
    integration: IntegrationParams = field(default_factory=IntegrationParams)
    plan: SelectionPlan = field(default_factory=SelectionPlan)
    plan_seed_explicit: bool = False
    seed: int = 0
    out_dir: Path = Path("fire-out")

    @classmethod
    def from_file(cls, path: str | Path, env: Mapping[str, str] | None = None) -> "PipelineConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
        if not isinstance(payload, dict):
            raise ConfigError("config root must be a JSON object")
        payload = _apply_env_overrides(payload, env if env is not None else os.environ)
        return cls.from_dict(payload)

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        corpus_section = payload.get("corpus", {})
        if "path" not in corpus_section:
            raise ConfigError("config needs corpus.path")
        raters_section = payload.get("raters", [])
        if not raters_section:
            raise ConfigError("config needs a nonempty raters list")
        raters = [parse_rater_token(token) for token in raters_section]
        judge_section = dict(payload.get("judge", {"mode": "synthetic", "sigma": 0.0}))
        mode = judge_section.get("mode", "synthetic")
        if mode not in ("synthetic", "endpoint"):
            raise ConfigError(f"judge.mode must be 'synthetic' or 'endpoint', got {mode!r}")
        if mode == "endpoint" and "url" not in judge_section:
            raise ConfigError("endpoint judge needs judge.url")
        if mode == "synthetic" and "latents" not in judge_section:
            raise ConfigError("synthetic judge needs judge.latents (JSONL of id/quality)")
        alignment_section = payload.get("alignment", {})
        integration_section = payload.get("integration", {})
        selection_section = dict(payload.get("selection", {}))
        run_section = payload.get("run", {})
        try:
            integration = IntegrationParams(**integration_section)
        except (IntegrationError, TypeError) as exc:
            raise ConfigError(f"bad integration section: {exc}") from exc
        plan_seed_explicit = "seed" in selection_section
        try:
            plan = SelectionPlan(**selection_section)
        except (SelectionError, TypeError) as exc:
            raise ConfigError(f"bad selection section: {exc}") from exc
        try:
            return cls(
                corpus_path=Path(corpus_section["path"]),
                raters=raters,
                judge=judge_section,
                intervals=int(alignment_section.get("intervals", 10)),
                per_interval=int(alignment_section.get("per_interval", 1000)),
                integration=integration,
                plan=plan,
                plan_seed_explicit=plan_seed_explicit,
                seed=int(run_section.get("seed", 0)),
                out_dir=Path(run_section.get("out_dir", "fire-out")),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc


def _apply_env_overrides(payload: dict, env: Mapping[str, str]) -> dict:
    """Overlay FIRE_<SECTION>_<KEY> environment values onto the config.

    Values are parsed as JSON when possible, otherwise taken as strings:
    FIRE_SELECTION_K=500, FIRE_RUN_OUT_DIR=out, FIRE_RATERS='["a","b"]'.
    """
    sections = ("corpus", "judge", "alignment", "integration", "selection", "run")
    out = json.loads(json.dumps(payload))  # deep copy
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if rest == "raters":
            out["raters"] = value if isinstance(value, list) else [v for v in str(value).split(",") if v]
            continue
        section = next((s for s in sections if rest.startswith(s + "_")), None)
        if section is None:
            logger.warning("ignoring unrecognized override %s", name)
            continue
        key = rest[len(section) + 1:]
        out.setdefault(section, {})[key] = value
    return out


def make_judge(judge_config: Mapping, cache: JudgeCache | None = None) -> Judge:
    """Build the configured judge."""
    mode = judge_config.get("mode", "synthetic")
    if mode == "synthetic":
        return SyntheticJudge.from_file(
            judge_config["latents"], sigma=float(judge_config.get("sigma", 0.0))
        )
    if cache is None and judge_config.get("cache"):
        cache = JudgeCache(judge_config["cache"])
    return EndpointJudge(
        judge_config["url"],
        model=judge_config.get("model", ""),
        cache=cache,
        max_in_flight=int(judge_config.get("max_in_flight", 4)),
        retries=int(judge_config.get("retries", 2)),
        timeout=float(judge_config.get("timeout", 30.0)),
    )


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp = path.with_name(path.name + ".tmp")
    temp.write_text(text, encoding="utf-8")
    os.replace(temp, path)


def _file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def run_pipeline(config: PipelineConfig) -> dict:
    """align -> integrate -> select; returns artifact paths and the report.

    Per-stage seeds derive from run.seed by stage label; identical
    configs therefore yield byte-identical profiles.json, model.json, and
    manifest.jsonl across runs.
    """
    out_dir = config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "profiles": out_dir / "profiles.json",
        "model": out_dir / "model.json",
        "manifest": out_dir / "manifest.jsonl",
        "report": out_dir / "report.json",
    }
    timings: dict[str, float] = {}

    started = time.perf_counter()
    try:
        corpus = ingest(config.corpus_path, config.raters)
        judge = make_judge(config.judge)
    except (CorpusError, JudgeError, OSError, KeyError) as exc:
        raise StageError("config", str(exc)) from exc
    timings["load"] = time.perf_counter() - started

    started = time.perf_counter()
    try:
        profiles = build_profiles(
            corpus,
            judge,
            intervals=config.intervals,
            per_interval=config.per_interval,
            seed=derive_seed(config.seed, "align"),
        )
        profiles_json = profiles_to_json(profiles)
    except (AlignmentError, JudgeError) as exc:
        raise StageError("align", str(exc)) from exc
    timings["align"] = time.perf_counter() - started

    started = time.perf_counter()
    try:
        model = build_model(
            corpus, profiles, config.integration, seed=derive_seed(config.seed, "integrate")
        )
        model_json = model.to_json()
    except IntegrationError as exc:
        raise StageError("integrate", str(exc)) from exc
    timings["integrate"] = time.perf_counter() - started

    started = time.perf_counter()
    try:
        plan = config.plan
        if not config.plan_seed_explicit:
            plan = SelectionPlan(**{**plan.to_dict(), "seed": derive_seed(config.seed, "select")})
        manifest = select(corpus, profiles, plan, config.integration, model=model)
    except (SelectionError, IntegrationError, AlignmentError) as exc:
        raise StageError("select", str(exc)) from exc
    timings["select"] = time.perf_counter() - started

    atomic_write_text(paths["profiles"], profiles_json)
    atomic_write_text(paths["model"], model_json)
    manifest_lines = [
        json.dumps({"id": doc_id, "integrated_rating": rating})
        for doc_id, rating in zip(manifest.doc_ids, manifest.ratings)
    ]
    atomic_write_text(paths["manifest"], "\n".join(manifest_lines) + "\n")

    report = {
        "seeds": {
            "root": config.seed,
            "align": derive_seed(config.seed, "align"),
            "integrate": derive_seed(config.seed, "integrate"),
            "select": plan.seed,
        },
        "rater_ids": list(model.rater_ids),
        "o": model.o.tolist(),
        "gamma": model.gamma.tolist(),
        "merged": dict(model.merged),
        "selection": manifest.provenance,
        "artifacts": {
            name: _file_sha256(paths[name]) for name in ("profiles", "model", "manifest")
        },
        "timings_s": {name: round(value, 6) for name, value in timings.items()},
        "config": {
            "corpus": str(config.corpus_path),
            "raters": [
                {"id": spec.rater_id, "polarity": "higher" if spec.higher_is_better else "lower"}
                for spec in config.raters
            ],
            "judge": {k: v for k, v in config.judge.items()},
            "alignment": {"intervals": config.intervals, "per_interval": config.per_interval},
            "integration": {
                "kernel": config.integration.kernel,
                "alpha": config.integration.alpha,
                "damping": config.integration.damping,
                "correlation_basis": config.integration.correlation_basis,
                "correlation_sample": config.integration.correlation_sample,
                "collapse_threshold": config.integration.collapse_threshold,
                "collapse": config.integration.collapse,
            },
            "selection": plan.to_dict(),
        },
    }
    atomic_write_text(paths["report"], json.dumps(report, indent=2) + "\n")
    logger.info("pipeline complete: %d documents selected", len(manifest))
    return {"paths": {name: str(p) for name, p in paths.items()}, "report": report}


class InspectError(Exception):
    """Artifact could not be parsed."""


def _detect_artifact(path: Path):
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if not stripped:
        raise InspectError(f"{path} is empty")
    if stripped[0] == "[":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InspectError(f"{path}: invalid JSON ({exc.msg})") from exc
        if payload and isinstance(payload[0], dict) and "knots" in payload[0]:
            return "profiles", payload
        raise InspectError(f"{path}: unrecognized JSON array artifact")
    if stripped[0] == "{":
        try:
            payload = json.loads(text)
            if isinstance(payload, dict):
                # reports echo model fields, so test for them first
                if "artifacts" in payload:
                    return "report", payload
                if "o" in payload and "rater_ids" in payload:
                    return "model", payload
                if "raters" in payload and "n_docs" in payload:
                    return "scenario", payload
                if "integrated_rating" in payload:
                    return "manifest", [payload]
                raise InspectError(f"{path}: unrecognized JSON object artifact")
        except json.JSONDecodeError:
            pass  # maybe JSONL
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InspectError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
        if records and "integrated_rating" in records[0]:
            return "manifest", records
        raise InspectError(f"{path}: unrecognized JSONL artifact")
    raise InspectError(f"{path}: unrecognized artifact format")


def inspect_artifact(path: str | Path, curve_csv: str | Path | None = None) -> str:
    """Human-readable artifact summary; optionally dump curve knots as CSV."""
    path = Path(path)
    if not path.exists():
        raise InspectError(f"{path} does not exist")
    kind, payload = _detect_artifact(path)
    lines = [f"{path} ({kind})"]
    if kind == "profiles":
        lines.append(f"{'rater':<24} {'gamma':>8}  knots (percentile: win_rate)")
        for record in payload:
            knots = " ".join(f"{p:g}:{w:g}" for p, w in record["knots"])
            lines.append(f"{record['rater_id']:<24} {record['gamma']:>8.4f}  {knots}")
        if curve_csv is not None:
            rows = ["rater_id,percentile,win_rate"]
            for record in payload:
                rows.extend(f"{record['rater_id']},{p},{w}" for p, w in record["knots"])
            atomic_write_text(curve_csv, "\n".join(rows) + "\n")
            lines.append(f"curve data written to {curve_csv}")
    elif kind == "model":
        lines.append(f"raters: {', '.join(payload['rater_ids'])}")
        lines.append("o:      " + " ".join(f"{v:.6f}" for v in payload["o"]))
        lines.append("gamma:  " + " ".join(f"{v:.6f}" for v in payload["gamma"]))
        lines.append(
            f"kernel={payload['kernel']} alpha={payload['alpha']} "
            f"damping={payload['damping']} basis={payload['correlation_basis']}"
        )
        if payload.get("merged"):
            lines.append(f"merged: {payload['merged']}")
        if payload.get("orthogonality") is not None:
            lines.append("orthogonality graph:")
            for row in payload["orthogonality"]:
                lines.append("  " + " ".join(f"{v:.4f}" for v in row))
    elif kind == "manifest":
        ratings = [record["integrated_rating"] for record in payload]
        lines.append(f"{len(payload)} documents")
        lines.append(f"rating range: [{min(ratings):.6f}, {max(ratings):.6f}]")
        for record in payload[:5]:
            lines.append(f"  {record['id']}  {record['integrated_rating']:.6f}")
        if len(payload) > 5:
            lines.append(f"  ... {len(payload) - 5} more")
    elif kind == "scenario":
        lines.append(
            f"{payload['n_docs']} docs, {payload['n_dims']} latent dims, "
            f"{len(payload['raters'])} raters, seed {payload.get('seed', 0)}"
        )
        for rater in payload["raters"]:
            lines.append(
                f"  {rater['rater_id']}: weights={rater['weights']} "
                f"noise={rater.get('noise', 0.0)} distortion={rater.get('distortion', 'identity')}"
            )
    else:
        lines.append(json.dumps(payload, indent=2))
    return "\n".join(lines)
