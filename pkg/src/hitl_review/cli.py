"""Campaign lifecycle driver.

Every stage reads and writes files under the campaign's output directory,
so stages compose through the filesystem alone and rerunning a stage with
the same config and seed reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import allocation, corpus as corpus_mod, reporting
from .agreement import analyze_agreement, format_agreement_text
from .config import CampaignConfig, ConfigError
from .error_analysis import error_report
from .grammar import CodeList, conformance_cases
from .store import ReviewStore, export_reviews, export_timings, read_export


class StageError(RuntimeError):
    """A stage cannot run; the message names what is missing or wrong."""


def _load_config(args) -> CampaignConfig:
    config = CampaignConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        config = CampaignConfig(**{**config.__dict__, "seed": args.seed})
    return config


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise StageError(f"missing {path.name}: run `hitl-review {produced_by}` first")
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_campaign_inputs(config: CampaignConfig):
    corpus = corpus_mod.ingest_corpus(config.manifest)
    codes = CodeList.from_files(config.official_codes, config.training_codes)
    return corpus, codes


# -- stages -------------------------------------------------------------------


def cmd_triage(args) -> int:
    config = _load_config(args)
    corpus, codes = _load_campaign_inputs(config)
    threshold = config.confidence_threshold if args.threshold is None else args.threshold
    result = corpus_mod.triage(corpus, codes, threshold)
    counts = {
        reason.value: count for reason, count in result.counts_by_reason().items()
    }
    payload = {
        "threshold": threshold,
        "corpus_images": len(corpus),
        "selected_total": result.total_selected,
        "counts_by_reason": counts,
    }
    _write_json(config.triage_counts_path, payload)
    config.selected_images_path.parent.mkdir(parents=True, exist_ok=True)
    config.selected_images_path.write_text(
        "".join(f"{image_id}\n" for image_id in result.selected), encoding="utf-8"
    )
    if result.total_selected == 0:
        print("warning: nothing selected for review", file=sys.stderr)
    print(
        f"selected {result.total_selected} of {len(corpus)} images "
        + " ".join(f"{k}={v}" for k, v in counts.items())
    )
    return 0


def cmd_allocate(args) -> int:
    config = _load_config(args)
    if not config.reviewers:
        raise StageError("config has no [reviewers]; allocation needs reviewer ids")
    corpus, _ = _load_campaign_inputs(config)
    selected_path = _require(config.selected_images_path, "triage")
    selected = [
        line.strip()
        for line in selected_path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    plan = allocation.allocate(
        selected,
        list(config.reviewers),
        config.overlap_fraction,
        config.selfdup_fraction,
        config.seed,
    )
    pages = allocation.paginate(plan, corpus, config.page_size)
    config.plan_path.parent.mkdir(parents=True, exist_ok=True)
    allocation.write_plan_jsonl(pages, config.plan_path)
    per_reviewer = {}
    for page in pages:
        per_reviewer.setdefault(page.reviewer_id, [0, 0])
        per_reviewer[page.reviewer_id][0] += 1
        per_reviewer[page.reviewer_id][1] += len(page)
    for reviewer, (n_pages, n_images) in sorted(per_reviewer.items()):
        print(f"{reviewer}: {n_images} images across {n_pages} pages")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import CampaignRuntime, create_app

    config = _load_config(args)
    corpus, _ = _load_campaign_inputs(config)
    plan_path = _require(config.plan_path, "allocate")
    pages = allocation.read_plan_jsonl(plan_path, corpus)
    images_root = Path(args.images_root) if args.images_root else config.images_root
    ui_dist = Path(args.ui_dist) if args.ui_dist else None
    if ui_dist is None:
        default_dist = Path(args.config).parent / "frontend" / "dist"
        ui_dist = default_dist if default_dist.is_dir() else None
    config.store_path.parent.mkdir(parents=True, exist_ok=True)
    store = ReviewStore(config.store_path)
    runtime = CampaignRuntime(
        corpus=corpus,
        pages=pages,
        store=store,
        tokens=config.reviewers,
        images_root=images_root,
        ui_dist=ui_dist,
    )
    host, _, port = args.bind.rpartition(":")
    uvicorn.run(create_app(runtime), host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_export(args) -> int:
    config = _load_config(args)
    _require(config.store_path, "serve")
    config.reviews_export_path.parent.mkdir(parents=True, exist_ok=True)
    with ReviewStore(config.store_path) as store:
        n_reviews = export_reviews(store, config.reviews_export_path)
        n_timings = export_timings(store, config.timings_export_path)
    print(f"exported {n_reviews} reviews, {n_timings} timings")
    return 0


def cmd_analyze(args) -> int:
    config = _load_config(args)
    export_path = _require(config.reviews_export_path, "export")
    records = read_export(export_path)
    if args.what == "agreement":
        report = analyze_agreement(records)
        _write_json(config.agreement_json_path, report.as_dict())
        config.agreement_text_path.write_text(
            format_agreement_text(report), encoding="utf-8"
        )
        print(config.agreement_json_path)
    else:
        report = error_report(records, spline_knots=args.knots, top_k=args.top_k)
        _write_json(config.errors_json_path, report)
        analysis_dir = config.errors_json_path.parent
        reporting.write_error_csvs(report, analysis_dir)
        figures = analysis_dir / "figures"
        reporting.figure_error_by_class(report, figures / "error_by_class.svg")
        reporting.figure_top_misclassified(report, figures / "top_misclassified.svg")
        reporting.figure_confusion_flows(report, figures / "confusion_flows.svg")
        print(config.errors_json_path)
    return 0


def cmd_report(args) -> int:
    config = _load_config(args)
    agreement = json.loads(
        _require(config.agreement_json_path, "analyze agreement").read_text()
    )
    errors = json.loads(
        _require(config.errors_json_path, "analyze errors").read_text()
    )
    timings_path = _require(config.timings_export_path, "export")

    from .store import TimingRecord
    import csv as csv_mod

    with open(timings_path, newline="", encoding="utf-8") as fh:
        timings = [
            TimingRecord(
                row["reviewer_id"],
                row["page_id"],
                float(row["duration_s"]),
                float(row["recorded_at"]),
            )
            for row in csv_mod.DictReader(fh)
        ]

    report_dir = config.report_dir
    report_dir.mkdir(parents=True, exist_ok=True)
    timing = reporting.timing_summary(timings, config.break_threshold_s)
    reporting.write_timing_csv(timing, report_dir / "timing_summary.csv")

    figure_names = {}
    figure_names["error_by_class"] = "error_by_class.svg"
    reporting.figure_error_by_class(errors, report_dir / "error_by_class.svg")
    figure_names["top_misclassified"] = "top_misclassified.svg"
    reporting.figure_top_misclassified(errors, report_dir / "top_misclassified.svg")
    figure_names["confusion_flows"] = "confusion_flows.svg"
    reporting.figure_confusion_flows(errors, report_dir / "confusion_flows.svg")
    if timings:
        figure_names["time_usage"] = "time_usage.svg"
        reporting.figure_time_usage(
            timings, config.break_threshold_s, report_dir / "time_usage.svg"
        )

    markdown = reporting.render_report_markdown(agreement, errors, timing, figure_names)
    (report_dir / "report.md").write_text(markdown, encoding="utf-8")
    print(report_dir / "report.md")
    return 0


def cmd_grammar_fixture(args) -> int:
    payload = {"cases": conformance_cases()}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(out)
    return 0


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hitl-review",
        description="Campaign driver: triage, allocate, serve, export, analyze, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="campaign TOML file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("triage", help="select the images that need manual review")
    add_common(p)
    p.add_argument("--threshold", type=float, default=None, help="override confidence threshold")
    p.set_defaults(func=cmd_triage)

    p = sub.add_parser("allocate", help="split the review set among reviewers and paginate")
    add_common(p)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("serve", help="run the review service for the browser UI")
    p.add_argument("--config", "--campaign", dest="config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--bind", default="127.0.0.1:8000", help="host:port to listen on")
    p.add_argument("--images-root", default=None, help="override the images directory")
    p.add_argument("--ui-dist", default=None, help="static UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export", help="dump reviews and timings to CSV")
    add_common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("analyze", help="run an analysis over the export")
    add_common(p)
    p.add_argument("what", choices=["agreement", "errors"])
    p.add_argument("--knots", type=int, default=6, help="spline knots for the error trend")
    p.add_argument("--top-k", type=int, default=10, help="codes in the misclassification ranking")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="merge the analyses into one Markdown report")
    add_common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser(
        "grammar-fixture", help="export the shared grammar conformance fixture as JSON"
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grammar_fixture)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, StageError, corpus_mod.ManifestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, corpus_mod.ManifestError):
            for diagnostic in exc.diagnostics[:20]:
                print(f"  {diagnostic}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
