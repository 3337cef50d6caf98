"""Command-line front end: staged pipeline runs and the corpus generator."""

from __future__ import annotations

import argparse
import sys

from .ghap import ClusteringNumericsError
from .pipeline import (
    EXIT_BAD_CONFIG,
    EXIT_MISSING_ARTIFACT,
    EXIT_NUMERICAL,
    EXIT_OK,
    STAGES,
    ConfigError,
    MissingArtifactError,
    load_config,
    run_stage,
)
from .pu import CalibrationError
from .svm import TrainingError
from .synth import SynthSpec, write_stopwords, write_synthetic_corpus


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxoforge",
        description="Build a business taxonomy from an annotated corpus, stage by stage",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for stage in STAGES + ("all",):
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry, e.g. --set pu.threshold=0.4",
        )
        p.add_argument("--threads", type=int, default=1, help="worker thread cap")

    synth = sub.add_parser("synth", help="generate a synthetic planted-block corpus")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--classes", type=int, default=3)
    synth.add_argument("--docs-per-class", type=int, default=20)
    synth.add_argument("--terms-per-class", type=int, default=6)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "synth":
        from pathlib import Path

        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        spec = SynthSpec(
            n_classes=args.classes,
            docs_per_class=args.docs_per_class,
            terms_per_class=args.terms_per_class,
        )
        write_synthetic_corpus(spec, args.seed, outdir / "corpus.jsonl")
        write_stopwords(outdir / "stopwords.txt")
        print(f"wrote {outdir / 'corpus.jsonl'} and {outdir / 'stopwords.txt'}")
        return EXIT_OK

    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    try:
        run_stage(args.command, cfg, threads=max(1, args.threads))
    except MissingArtifactError as exc:
        print(f"missing upstream artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except (TrainingError, CalibrationError, ClusteringNumericsError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
