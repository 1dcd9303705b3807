"""Command line entry points.

Subcommands: validate, agree, features, sample, convert, serve.
Exit codes are stable: 0 success, 1 findings present (or a data-level
refusal such as a rank-deficient projection), 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

from . import agreement, features, ingest, validation
from .model import DEFAULT_RELATIONS

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _print_report(report: validation.ValidationReport, fmt: str) -> None:
    if fmt == "json":
        print(report.to_json())
    else:
        print(report.to_text())


def cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.path)
    reports: list[validation.ValidationReport] = []
    if path.is_dir():
        try:
            manifest = ingest.read_manifest(path)
        except ingest.ManifestNotFound as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        diagrams, load_report = ingest.load_corpus(manifest)
        reports, summary = validation.validate_corpus(diagrams)
        for failure in load_report.failures:
            reports.append(validation.ValidationReport(
                failure.diagram_id,
                [validation.Finding(
                    "error", "PARSE_FAILURE", failure.path, failure.error, "cross",
                )],
            ))
            summary["PARSE_FAILURE"] = summary.get("PARSE_FAILURE", 0) + 1
        if args.format == "json":
            print(json.dumps(
                {"reports": [r.to_dict() for r in reports], "summary": summary},
                ensure_ascii=False, indent=1, sort_keys=True,
            ))
        else:
            for report in reports:
                _print_report(report, args.format)
            if summary:
                print("summary:", json.dumps(summary, sort_keys=True))
    elif path.is_file():
        if not args.ai2d:
            print("error: validating a single annotation file needs --ai2d "
                  "(the layout it annotates)", file=sys.stderr)
            return EXIT_USAGE
        try:
            payload = path.read_bytes()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        try:
            layout = ingest.parse_ai2d(Path(args.ai2d).read_bytes())
            diagram = ingest.parse_ai2drst(payload, layout)
        except ingest.SchemaViolation as exc:
            report = validation.ValidationReport(
                str(path),
                [validation.Finding("error", exc.code, exc.path, str(exc), "cross")],
            )
            _print_report(report, args.format)
            return EXIT_FINDINGS
        except ingest.IngestError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        reports = [validation.validate_diagram(diagram)]
        _print_report(reports[0], args.format)
    else:
        print(f"error: no such file or directory: {path}", file=sys.stderr)
        return EXIT_IO
    has_errors = any(not r.ok for r in reports)
    return EXIT_FINDINGS if has_errors else EXIT_OK


def _format_stat(x: float) -> str:
    if math.isnan(x):
        return "undefined"
    return f"{x:.4f}"


def _format_p(p: float) -> str:
    if math.isnan(p):
        return "undefined"
    if p < 0.001:
        return f"{p:.3g} (<0.001)"
    return f"{p:.4f}"


def cmd_agree(args: argparse.Namespace) -> int:
    try:
        matrix = agreement.read_annotation_csv(args.csv)
    except (agreement.MalformedCsv, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if not isinstance(exc, OSError) else EXIT_IO
    marginal = agreement.fleiss_kappa(matrix)
    uniform = agreement.randolph_kappa(matrix)
    out: dict = {
        "items": matrix.n_items,
        "annotators": matrix.n_annotators,
        "categories": matrix.n_categories,
        "marginalKappa": marginal.kappa,
        "marginalZ": marginal.z,
        "marginalP": marginal.p,
        "uniformKappa": uniform.kappa,
        "uniformZ": uniform.z,
        "uniformP": uniform.p,
    }
    classwise = agreement.classwise_kappa(matrix)
    if args.format == "text":
        print(f"items={matrix.n_items} annotators={matrix.n_annotators} "
              f"categories={matrix.n_categories}")
        print(f"marginal kappa: {_format_stat(marginal.kappa)}  "
              f"z={_format_stat(marginal.z)}  p={_format_p(marginal.p)}")
        print(f"uniform kappa:  {_format_stat(uniform.kappa)}  "
              f"z={_format_stat(uniform.z)}  p={_format_p(uniform.p)}")
        print("class-wise marginal kappa:")
        for category, r in sorted(
            classwise.items(), key=lambda kv: -(kv[1].kappa if not kv[1].undefined
                                                else float("-inf"))
        ):
            if r.undefined:
                print(f"  {category:24s} undefined (category unused)")
            else:
                print(f"  {category:24s} kappa={r.kappa:8.4f}  z={r.z:8.3f}  "
                      f"p={_format_p(r.p)}")
    else:
        out["classwise"] = {
            c: None if r.undefined else {"kappa": r.kappa, "z": r.z, "p": r.p}
            for c, r in classwise.items()
        }

    if args.by_hop:
        try:
            strata = agreement.kappa_by_hop(matrix)
        except (agreement.MissingDepth, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        if args.format == "text":
            print("agreement by hop depth:")
            for hop, stat in strata.items():
                if stat.insufficient:
                    print(f"  hop {hop}: {stat.count} item(s), insufficient")
                else:
                    print(f"  hop {hop}: n={stat.count}  "
                          f"marginal={_format_stat(stat.marginal.kappa)}  "
                          f"uniform={_format_stat(stat.uniform.kappa)}")
        else:
            out["byHop"] = {
                str(hop): (
                    None if stat.insufficient else {
                        "count": stat.count,
                        "marginalKappa": stat.marginal.kappa,
                        "uniformKappa": stat.uniform.kappa,
                    }
                )
                for hop, stat in strata.items()
            }

    if args.mace:
        if args.seed is None:
            print("error: --mace requires --seed", file=sys.stderr)
            return EXIT_USAGE
        result = agreement.mace(matrix, agreement.MaceConfig(seed=args.seed))
        if args.format == "text":
            print(f"competence estimates (seed={args.seed}, "
                  f"restarts={result.config.restarts}):")
            for annotator, theta in result.competence.items():
                print(f"  {annotator:16s} {theta:.4f}")
        else:
            out["mace"] = {
                "competence": result.competence,
                "seed": args.seed,
                "logLikelihood": result.log_likelihood,
            }
    if args.format == "json":
        print(json.dumps(out, indent=1, sort_keys=True))
    return EXIT_OK


def cmd_features(args: argparse.Namespace) -> int:
    try:
        manifest = ingest.read_manifest(args.corpus)
    except ingest.ManifestNotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    diagrams, load_report = ingest.load_corpus(manifest)
    for failure in load_report.failures:
        print(f"warning: skipped {failure.diagram_id}: {failure.error}",
              file=sys.stderr)
    if not diagrams:
        print("error: corpus is empty", file=sys.stderr)
        return EXIT_IO
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_IO

    schema = features.FeatureSchema.default()
    matrix, ids = features.feature_matrix(diagrams, schema)
    features.write_feature_csv(out_dir / "features_raw.csv", matrix, ids, schema)
    if len(diagrams) >= 2:
        normalized = features.zscore_normalize(matrix)
        features.write_feature_csv(
            out_dir / "features_normalized.csv", normalized, ids, schema
        )
    else:
        normalized = None
        print("warning: fewer than 2 diagrams, skipping normalization",
              file=sys.stderr)
    tables = features.corpus_frequencies(diagrams)
    for name, table in tables.items():
        features.write_frequency_csv(out_dir / f"freq_{name}.csv", table)
    if args.embed:
        if args.embed == "external" and not args.sidecar:
            print("error: --embed external requires --sidecar", file=sys.stderr)
            return EXIT_USAGE
        if normalized is None:
            print("error: embedding needs at least 2 diagrams", file=sys.stderr)
            return EXIT_FINDINGS
        try:
            coords = features.project_2d(
                normalized, method=args.embed, diagram_ids=ids, sidecar=args.sidecar
            )
        except features.RankDeficient as exc:
            print(f"error: RankDeficient: {exc}", file=sys.stderr)
            return EXIT_FINDINGS
        except features.FeatureError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        features.write_embedding_csv(out_dir / "embedding.csv", coords, ids)
    print(f"wrote feature tables for {len(diagrams)} diagram(s) to {out_dir}")
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    try:
        manifest = ingest.read_manifest(args.corpus)
    except ingest.ManifestNotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    diagrams, _ = ingest.load_corpus(manifest)
    try:
        tasks = agreement.sample_agreement_tasks(
            diagrams, args.layer, args.fraction, args.seed
        )
    except (agreement.EmptyPopulation, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    payload = json.dumps([asdict(t) for t in tasks], indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(payload + "\n", "utf-8")
        print(f"wrote {len(tasks)} task(s) to {args.out}")
    else:
        print(payload)
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    src = Path(args.src)
    out_root = Path(args.out)
    if not src.is_dir():
        print(f"error: not a directory: {src}", file=sys.stderr)
        return EXIT_IO
    ai2d_files = sorted(src.glob("*.json"))
    if not ai2d_files:
        print(f"error: no .json layout files under {src}", file=sys.stderr)
        return EXIT_IO
    (out_root / "ai2d").mkdir(parents=True, exist_ok=True)
    (out_root / "annotations").mkdir(parents=True, exist_ok=True)
    entries = []
    for ai2d_path in ai2d_files:
        stem = ai2d_path.stem
        try:
            layout = ingest.parse_ai2d(ai2d_path.read_bytes(), diagram_id=stem)
        except ingest.IngestError as exc:
            print(f"warning: skipped {ai2d_path.name}: {exc}", file=sys.stderr)
            continue
        skeleton = ingest.skeleton_diagram(layout, diagram_id=layout.diagram_id or stem)
        copied = out_root / "ai2d" / ai2d_path.name
        copied.write_bytes(ai2d_path.read_bytes())
        annotation = out_root / "annotations" / f"{skeleton.diagram_id}.json"
        annotation.write_bytes(ingest.serialize(skeleton))
        image_rel = None
        for suffix in (".png", ".jpg"):
            candidate = src / f"{stem}{suffix}"
            if candidate.is_file():
                (out_root / "images").mkdir(exist_ok=True)
                target = out_root / "images" / candidate.name
                target.write_bytes(candidate.read_bytes())
                image_rel = f"images/{candidate.name}"
                break
        entries.append(ingest.ManifestEntry(
            diagram_id=skeleton.diagram_id,
            ai2d_path=f"ai2d/{ai2d_path.name}",
            annotation_path=f"annotations/{skeleton.diagram_id}.json",
            image_path=image_rel,
        ))
    if not entries:
        print("error: nothing converted", file=sys.stderr)
        return EXIT_IO
    ingest.write_manifest(ingest.CorpusManifest(out_root, tuple(entries)))
    print(f"converted {len(entries)} diagram(s) into {out_root}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    corpus = args.corpus or ingest.default_corpus_root()
    if not corpus:
        print("error: no corpus given (use --corpus or DIAGRAPH_CORPUS_ROOT)",
              file=sys.stderr)
        return EXIT_USAGE
    app = create_app(corpus)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diagraph",
        description="Multi-layer diagram annotation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a diagram file or corpus")
    p.add_argument("path")
    p.add_argument("--ai2d", help="layout file for a standalone annotation document")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("agree", help="reliability statistics over a raw-annotation CSV")
    p.add_argument("csv")
    p.add_argument("--mace", action="store_true", help="competence estimates")
    p.add_argument("--seed", type=int, help="seed for --mace")
    p.add_argument("--by-hop", action="store_true", dest="by_hop",
                   help="stratify by hop depth")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("features", help="extract corpus feature tables")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--embed", choices=("pca", "external"))
    p.add_argument("--sidecar", help="diagram,x,y CSV for --embed external")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("sample", help="sample agreement-task units")
    p.add_argument("corpus")
    p.add_argument("--layer", required=True, choices=agreement.LAYERS)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("convert", help="layout files to a skeleton corpus")
    p.add_argument("src", help="directory of layout .json files")
    p.add_argument("--out", required=True, help="corpus root to create")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("serve", help="start the annotation server")
    p.add_argument("--corpus", help="corpus root (or DIAGRAPH_CORPUS_ROOT)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8181)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
