"""Command line entry points.

Subcommands map one-to-one onto pipeline stages, and exit statuses are
stage-distinct so shell callers can tell a judge outage from a bad plan:

    0  success
    1  usage or configuration error
    2  alignment failure
    3  integration failure
    4  selection failure
    5  benchmark failure
    6  inspection failure
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .alignment import AlignmentError, build_profiles, profiles_from_json, profiles_to_json
from .corpus import CorpusError, ingest
from .integration import (
    DEFAULT_ALPHA,
    DEFAULT_COLLAPSE_THRESHOLD,
    DEFAULT_CORRELATION_SAMPLE,
    DEFAULT_DAMPING,
    DEFAULT_KERNEL,
    IntegrationError,
    IntegrationModel,
    IntegrationParams,
    build_model,
)
from .judge import JudgeError
from .pipeline import (
    ConfigError,
    InspectError,
    PipelineConfig,
    StageError,
    atomic_write_text,
    inspect_artifact,
    make_judge,
    parse_rater_token,
    run_pipeline,
)
from .selection import (
    DEFAULT_BETA,
    DEFAULT_ETA,
    DEFAULT_N_INIT,
    DEFAULT_N_MAX,
    SelectionError,
    SelectionPlan,
    select,
)
from .synthbench import (
    VARIANTS,
    LatentSpec,
    SynthBenchError,
    default_scenario,
    format_report,
    run_ablation,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ALIGN = 2
EXIT_INTEGRATE = 3
EXIT_SELECT = 4
EXIT_BENCH = 5
EXIT_INSPECT = 6

STAGE_EXIT = {
    "config": EXIT_CONFIG,
    "align": EXIT_ALIGN,
    "integrate": EXIT_INTEGRATE,
    "select": EXIT_SELECT,
    "bench": EXIT_BENCH,
    "inspect": EXIT_INSPECT,
}


def _add_corpus_args(parser: argparse.ArgumentParser, raters_required: bool) -> None:
    parser.add_argument("--corpus", required=True, help="corpus JSONL path")
    parser.add_argument(
        "--raters",
        required=raters_required,
        default=None,
        help="comma list of rater ids; append :lower for scores where lower is better "
        "(default for integrate/select: ids from the profiles file, all :higher)",
    )


def _add_judge_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--judge", choices=("synthetic", "endpoint"), default="synthetic",
        help="pairwise judge backend (default: %(default)s)",
    )
    parser.add_argument(
        "--latents", default=None,
        help="synthetic judge: JSONL of {id, quality} ground truth",
    )
    parser.add_argument(
        "--sigma", type=float, default=0.0,
        help="synthetic judge noise stddev (default: %(default)s)",
    )
    parser.add_argument("--endpoint-url", default=None, help="endpoint judge: POST url")
    parser.add_argument("--model", default="", help="endpoint judge: model name")
    parser.add_argument("--cache", default=None, help="endpoint judge: verdict cache JSONL")
    parser.add_argument(
        "--max-in-flight", type=int, default=4,
        help="endpoint judge: concurrent request cap (default: %(default)s)",
    )
    parser.add_argument(
        "--retries", type=int, default=2,
        help="endpoint judge: retry count (default: %(default)s)",
    )
    parser.add_argument(
        "--timeout", type=float, default=30.0,
        help="endpoint judge: per-request timeout seconds (default: %(default)s)",
    )


def _add_integration_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--kernel", choices=("linear", "gaussian", "sym_gaussian"), default=DEFAULT_KERNEL,
        help="orthogonality kernel (default: %(default)s)",
    )
    parser.add_argument(
        "--alpha", type=int, default=DEFAULT_ALPHA,
        help="power iteration steps (default: %(default)s)",
    )
    parser.add_argument(
        "--damping", type=float, default=DEFAULT_DAMPING,
        help="damping factor d in (0, 1] (default: %(default)s)",
    )
    parser.add_argument(
        "--basis", choices=("aligned", "raw"), default="aligned",
        help="score basis for correlations (default: %(default)s)",
    )
    parser.add_argument(
        "--correlation-sample", type=int, default=DEFAULT_CORRELATION_SAMPLE,
        help="max documents used to estimate correlations (default: %(default)s)",
    )
    parser.add_argument(
        "--collapse-threshold", type=float, default=DEFAULT_COLLAPSE_THRESHOLD,
        help="|r| at or above which raters merge (default: %(default)s)",
    )
    parser.add_argument(
        "--no-collapse", action="store_true",
        help="keep fully correlated raters instead of merging them",
    )


def _integration_params(args: argparse.Namespace) -> IntegrationParams:
    return IntegrationParams(
        kernel=args.kernel,
        alpha=args.alpha,
        damping=args.damping,
        correlation_basis=args.basis,
        correlation_sample=args.correlation_sample,
        collapse_threshold=args.collapse_threshold,
        collapse=not args.no_collapse,
    )


def _load_corpus(args: argparse.Namespace, profiles=None):
    if args.raters is not None:
        tokens = [t for t in args.raters.split(",") if t]
        specs = [parse_rater_token(t) for t in tokens]
    elif profiles is not None:
        specs = [parse_rater_token(p.rater_id) for p in profiles]
    else:
        raise ConfigError("--raters is required")
    return ingest(args.corpus, specs)


def _judge_config(args: argparse.Namespace) -> dict:
    if args.judge == "synthetic":
        if args.latents is None:
            raise ConfigError("synthetic judge needs --latents")
        return {"mode": "synthetic", "latents": args.latents, "sigma": args.sigma}
    if args.endpoint_url is None:
        raise ConfigError("endpoint judge needs --endpoint-url")
    return {
        "mode": "endpoint",
        "url": args.endpoint_url,
        "model": args.model,
        "cache": args.cache,
        "max_in_flight": args.max_in_flight,
        "retries": args.retries,
        "timeout": args.timeout,
    }


def cmd_align(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args)
    judge = make_judge(_judge_config(args))
    try:
        profiles = build_profiles(
            corpus,
            judge,
            intervals=args.intervals,
            per_interval=args.per_interval,
            seed=args.seed,
        )
    except (AlignmentError, JudgeError) as exc:
        logger.error("alignment failed: %s", exc)
        return EXIT_ALIGN
    atomic_write_text(args.out, profiles_to_json(profiles))
    print(f"wrote {len(profiles)} rater profiles to {args.out}")
    return EXIT_OK


def cmd_integrate(args: argparse.Namespace) -> int:
    profiles = profiles_from_json(args.profiles)
    corpus = _load_corpus(args, profiles)
    try:
        model = build_model(corpus, profiles, _integration_params(args), seed=args.seed)
    except IntegrationError as exc:
        logger.error("integration failed: %s", exc)
        return EXIT_INTEGRATE
    atomic_write_text(args.out, model.to_json())
    print(f"wrote integration model ({len(model.rater_ids)} raters) to {args.out}")
    return EXIT_OK


def cmd_select(args: argparse.Namespace) -> int:
    profiles = profiles_from_json(args.profiles)
    corpus = _load_corpus(args, profiles)
    mode = args.mode.replace("-", "_")
    plan = SelectionPlan(
        mode=mode,
        k=args.k,
        tau=args.tau,
        eta=args.eta,
        n_init=args.n_init,
        beta=args.beta,
        n_max=args.n_max,
        seed=args.seed,
    )
    model = IntegrationModel.from_json(args.model) if args.model else None
    try:
        manifest = select(corpus, profiles, plan, _integration_params(args), model=model)
    except (SelectionError, IntegrationError, AlignmentError) as exc:
        logger.error("selection failed: %s", exc)
        return EXIT_SELECT
    manifest.write(args.out)
    print(f"selected {len(manifest)} of {len(corpus)} documents -> {args.out}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    if args.scenario == "default":
        spec = default_scenario(n_docs=args.docs, seed=args.scenario_seed)
    else:
        spec = LatentSpec.from_file(args.scenario)
    variants = tuple(v for v in args.variants.split(",") if v) if args.variants else VARIANTS
    try:
        report = run_ablation(
            spec,
            variants,
            seed=args.seed,
            k_frac=args.k_frac,
            intervals=args.intervals,
            per_interval=args.per_interval,
        )
    except (SynthBenchError, AlignmentError, IntegrationError, SelectionError) as exc:
        logger.error("benchmark failed: %s", exc)
        return EXIT_BENCH
    print(format_report(report))
    if args.out:
        atomic_write_text(args.out, json.dumps(report, indent=2) + "\n")
        print(f"report written to {args.out}")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        print(inspect_artifact(args.path, curve_csv=args.curve_csv))
    except InspectError as exc:
        logger.error("inspect failed: %s", exc)
        return EXIT_INSPECT
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = PipelineConfig.from_file(args.config)
    result = run_pipeline(config)
    for name, path in result["paths"].items():
        print(f"{name}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fire",
        description="Rating alignment, orthogonality-weighted integration, and "
        "subset selection for multi-rater data curation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="fit per-rater win rate curves against a pairwise judge")
    _add_corpus_args(p, raters_required=True)
    _add_judge_args(p)
    p.add_argument("--intervals", type=int, default=10,
                   help="quantile intervals per rater (default: %(default)s)")
    p.add_argument("--per-interval", type=int, default=1000,
                   help="judged pairs per interval cap (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="stage seed (default: %(default)s)")
    p.add_argument("--out", required=True, help="output profiles.json path")
    p.set_defaults(handler=cmd_align, stage="align")

    p = sub.add_parser("integrate", help="build orthogonality and reliability weights")
    _add_corpus_args(p, raters_required=False)
    p.add_argument("--profiles", required=True, help="profiles.json from `fire align`")
    _add_integration_args(p)
    p.add_argument("--seed", type=int, default=0, help="stage seed (default: %(default)s)")
    p.add_argument("--out", required=True, help="output model.json path")
    p.set_defaults(handler=cmd_integrate, stage="integrate")

    p = sub.add_parser("select", help="choose a subset by integrated rating")
    _add_corpus_args(p, raters_required=False)
    p.add_argument("--profiles", required=True, help="profiles.json from `fire align`")
    p.add_argument("--model", default=None,
                   help="model.json from `fire integrate` (default: rebuild in process)")
    _add_integration_args(p)
    p.add_argument("--mode", choices=("top-k", "sampled", "progressive"), default="top-k",
                   help="selection mode (default: %(default)s)")
    p.add_argument("--k", type=int, required=True, help="subset size")
    p.add_argument("--tau", type=float, default=1.0,
                   help="sampled mode temperature (default: %(default)s)")
    p.add_argument("--eta", type=float, default=DEFAULT_ETA,
                   help="progressive retention percentage (default: %(default)s)")
    p.add_argument("--n-init", type=int, default=DEFAULT_N_INIT,
                   help="progressive initial part count (default: %(default)s)")
    p.add_argument("--beta", type=float, default=DEFAULT_BETA,
                   help="progressive part growth factor (default: %(default)s)")
    p.add_argument("--n-max", type=int, default=DEFAULT_N_MAX,
                   help="progressive part count cap (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="stage seed (default: %(default)s)")
    p.add_argument("--out", required=True, help="output manifest.jsonl path")
    p.set_defaults(handler=cmd_select, stage="select")

    p = sub.add_parser("bench", help="synthetic ablation benchmark")
    p.add_argument("--scenario", default="default",
                   help="scenario JSON path, or 'default' (default: %(default)s)")
    p.add_argument("--docs", type=int, default=100_000,
                   help="document count for the default scenario (default: %(default)s)")
    p.add_argument("--scenario-seed", type=int, default=0,
                   help="latent generation seed for the default scenario (default: %(default)s)")
    p.add_argument("--variants", default=None,
                   help=f"comma list from {','.join(VARIANTS)} (default: all)")
    p.add_argument("--seed", type=int, default=0,
                   help="judging and sampling seed (default: %(default)s)")
    p.add_argument("--k-frac", type=float, default=0.1,
                   help="selected fraction (default: %(default)s)")
    p.add_argument("--intervals", type=int, default=10,
                   help="alignment intervals (default: %(default)s)")
    p.add_argument("--per-interval", type=int, default=2000,
                   help="judged pairs per interval cap (default: %(default)s)")
    p.add_argument("--out", default=None, help="also write the report JSON here")
    p.set_defaults(handler=cmd_bench, stage="bench")

    p = sub.add_parser("inspect", help="summarize a pipeline artifact")
    p.add_argument("path", help="profiles.json, model.json, manifest.jsonl, or report.json")
    p.add_argument("--curve-csv", default=None,
                   help="for profiles: write rater_id,percentile,win_rate rows here")
    p.set_defaults(handler=cmd_inspect, stage="inspect")

    p = sub.add_parser("run", help="align, integrate, and select from one config file")
    p.add_argument("--config", required=True,
                   help="JSON config; FIRE_<SECTION>_<KEY> env vars override fields")
    p.set_defaults(handler=cmd_run, stage="config")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which would collide with the
        # alignment stage code; 0 (from --help) passes through unchanged
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except StageError as exc:
        logger.error("%s", exc)
        return STAGE_EXIT.get(exc.stage, EXIT_CONFIG)
    except (ConfigError, CorpusError, JudgeError, OSError, json.JSONDecodeError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except (AlignmentError, IntegrationError, SelectionError, SynthBenchError, InspectError) as exc:
        # stage-specific failures that escaped a handler's own mapping
        logger.error("%s", exc)
        return STAGE_EXIT.get(getattr(args, "stage", "config"), EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
