import csv
import json
import random

import pytest

from hitl_review.allocation import read_plan_jsonl
from hitl_review.cli import main
from hitl_review.config import CampaignConfig
from hitl_review.corpus import ingest_corpus
from hitl_review.store import ReviewStore

CODES = [f"{n:03d}" for n in range(100, 140)]
OFFICIAL = CODES + ["bbb", "ttt"]
TRAINING = CODES[:30] + ["bbb", "ttt"]


def build_campaign(root, n_images=200, overlap=0.10, selfdup=0.05, seed=75):
    rng = random.Random(seed)
    (root / "codes").mkdir(parents=True)
    (root / "images").mkdir()
    (root / "codes" / "official.txt").write_text(
        "".join(f"{c}\n" for c in OFFICIAL)
    )
    (root / "codes" / "training.txt").write_text(
        "".join(f"{c}\n" for c in TRAINING)
    )
    with open(root / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "image_ref", "model_label", "model_confidence"])
        for i in range(n_images):
            roll = rng.random()
            if roll < 0.05:
                label = "t4b"  # nonsensical
            elif roll < 0.10:
                label = "990"  # parses, not in the official list
            elif roll < 0.20:
                label = rng.choice(CODES[30:])  # official but untrained
            else:
                label = rng.choice(TRAINING)
            conf = rng.uniform(0.2, 1.0)
            writer.writerow([f"img-{i:04d}", f"images/{i}.png", label, f"{conf:.4f}"])
    (root / "campaign.toml").write_text(
        f"""
[campaign]
manifest = "manifest.csv"
official_codes = "codes/official.txt"
training_codes = "codes/training.txt"
images_root = "images"
output_dir = "out"
seed = 20260101
confidence_threshold = 0.65
overlap_fraction = {overlap}
selfdup_fraction = {selfdup}
page_size = 12
break_threshold_s = 1800.0

[reviewers]
ada = "token-ada"
bea = "token-bea"
cyd = "token-cyd"
"""
    )
    return root / "campaign.toml"


def simulate_reviews(config_path):
    """Drive the store directly, as the service would, with seeded behavior."""
    config = CampaignConfig.load(config_path)
    corpus = ingest_corpus(config.manifest)
    pages = read_plan_jsonl(config.plan_path, corpus)
    rng = random.Random(31)
    config.store_path.parent.mkdir(parents=True, exist_ok=True)
    with ReviewStore(config.store_path) as store:
        for page in pages:
            labels = {}
            for entry in page.entries:
                roll = rng.random()
                if roll < 0.55:
                    pass  # agree with the model: leave the box empty
                elif roll < 0.85:
                    labels[entry.image_id] = rng.choice(CODES)
                elif roll < 0.92:
                    labels[entry.image_id] = rng.choice(["531@533", "1??8", "??"])
                elif roll < 0.95:
                    labels[entry.image_id] = "5bb"
                else:
                    labels[entry.image_id] = rng.choice(["bbb", "ttt"])
            store.submit_page(
                page.reviewer_id,
                page,
                labels,
                duration=rng.uniform(20, 90) if rng.random() > 0.03 else 4000.0,
                submitted_at=1_700_000_000 + rng.uniform(0, 1e6),
            )


@pytest.fixture
def campaign(tmp_path):
    return build_campaign(tmp_path)


def run(args):
    return main([str(a) for a in args])


def test_full_pipeline(campaign):
    config = CampaignConfig.load(campaign)
    assert run(["triage", "--config", campaign]) == 0
    counts = json.loads(config.triage_counts_path.read_text())
    assert counts["selected_total"] == sum(counts["counts_by_reason"].values())
    assert counts["selected_total"] > 0

    assert run(["allocate", "--config", campaign]) == 0
    assert config.plan_path.exists()

    simulate_reviews(campaign)
    assert run(["export", "--config", campaign]) == 0
    assert config.reviews_export_path.exists()
    assert config.timings_export_path.exists()

    assert run(["analyze", "--config", campaign, "agreement"]) == 0
    agreement = json.loads(config.agreement_json_path.read_text())
    fr = agreement["single_review"]["fractions"]
    assert abs(sum(fr.values()) - 1.0) < 1e-9
    assert agreement["overlap"]["counts"]["total"] > 0
    assert "Certain:" in config.agreement_text_path.read_text()

    assert run(["analyze", "--config", campaign, "errors"]) == 0
    errors = json.loads(config.errors_json_path.read_text())
    assert errors["classes"] > 0
    analysis_dir = config.errors_json_path.parent
    for name in ("error_by_class.csv", "top_misclassified.csv", "confusion_flows.csv"):
        assert (analysis_dir / name).exists()
    for name in ("error_by_class.svg", "top_misclassified.svg", "confusion_flows.svg"):
        assert (analysis_dir / "figures" / name).exists()

    assert run(["report", "--config", campaign]) == 0
    report = (config.report_dir / "report.md").read_text()
    for heading in (
        "## Corrected labels",
        "## Verification and correction quality",
        "## Labeling consistency",
        "## Model classification error analysis",
        "## Time usage",
    ):
        assert heading in report
    assert "threshold 1800s" in report
    assert (config.report_dir / "time_usage.svg").exists()


def test_pipeline_outputs_deterministic(campaign):
    config = CampaignConfig.load(campaign)
    run(["triage", "--config", campaign])
    run(["allocate", "--config", campaign])
    first_plan = config.plan_path.read_bytes()
    first_counts = config.triage_counts_path.read_bytes()

    run(["triage", "--config", campaign])
    run(["allocate", "--config", campaign])
    assert config.plan_path.read_bytes() == first_plan
    assert config.triage_counts_path.read_bytes() == first_counts

    simulate_reviews(campaign)
    run(["export", "--config", campaign])
    run(["analyze", "--config", campaign, "agreement"])
    run(["analyze", "--config", campaign, "errors"])
    run(["report", "--config", campaign])
    snapshots = {
        path: path.read_bytes()
        for path in [
            config.agreement_json_path,
            config.errors_json_path,
            config.report_dir / "report.md",
            config.report_dir / "error_by_class.svg",
        ]
    }
    run(["analyze", "--config", campaign, "agreement"])
    run(["analyze", "--config", campaign, "errors"])
    run(["report", "--config", campaign])
    for path, payload in snapshots.items():
        assert path.read_bytes() == payload, path


def test_no_overlap_campaign_notes_missing_data(tmp_path):
    config_path = build_campaign(tmp_path, n_images=60, overlap=0.0, selfdup=0.0)
    config = CampaignConfig.load(config_path)
    run(["triage", "--config", config_path])
    run(["allocate", "--config", config_path])
    simulate_reviews(config_path)
    run(["export", "--config", config_path])
    assert run(["analyze", "--config", config_path, "agreement"]) == 0
    assert "no overlap data" in config.agreement_text_path.read_text()
    agreement = json.loads(config.agreement_json_path.read_text())
    assert agreement["overlap"] is None


def test_missing_prerequisite_names_stage(campaign, capsys):
    assert run(["allocate", "--config", campaign]) == 2
    err = capsys.readouterr().err
    assert "triage" in err

    assert run(["report", "--config", campaign]) == 2
    err = capsys.readouterr().err
    assert "analyze" in err


def test_malformed_manifest_diagnostics(tmp_path, capsys):
    config_path = build_campaign(tmp_path, n_images=5)
    manifest = tmp_path / "manifest.csv"
    rows = manifest.read_text().splitlines()
    rows[2] = rows[2].rsplit(",", 1)[0] + ",2.5"
    manifest.write_text("\n".join(rows) + "\n")
    assert run(["triage", "--config", config_path]) == 2
    err = capsys.readouterr().err
    assert "row 3" in err


def test_threshold_zero_only_label_reasons(campaign):
    config = CampaignConfig.load(campaign)
    assert run(["triage", "--config", campaign, "--threshold", "0"]) == 0
    counts = json.loads(config.triage_counts_path.read_text())
    assert counts["counts_by_reason"]["below_threshold"] == 0
    assert counts["selected_total"] > 0


def test_empty_manifest_warns(tmp_path, capsys):
    config_path = build_campaign(tmp_path, n_images=0)
    assert run(["triage", "--config", config_path]) == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err
    config = CampaignConfig.load(config_path)
    counts = json.loads(config.triage_counts_path.read_text())
    assert counts["selected_total"] == 0


def test_seed_override_changes_plan(campaign):
    config = CampaignConfig.load(campaign)
    run(["triage", "--config", campaign])
    run(["allocate", "--config", campaign])
    baseline = config.plan_path.read_bytes()
    run(["allocate", "--config", campaign, "--seed", "999"])
    assert config.plan_path.read_bytes() != baseline


def test_grammar_fixture_export(tmp_path):
    out = tmp_path / "fixture.json"
    assert run(["grammar-fixture", "--out", out]) == 0
    payload = json.loads(out.read_text())
    verdicts = {case["raw"]: case["verdict"] for case in payload["cases"]}
    assert verdicts["531"] == "ok"
    assert verdicts["5bb"] == "invalid"
    assert verdicts["??"] == "ok"


def test_checked_in_grammar_fixture_in_sync():
    # the UI lint pins itself to this file; it must match the live grammar
    from pathlib import Path

    from hitl_review.grammar import conformance_cases

    fixture = Path(__file__).parent.parent / "frontend" / "tests" / "fixtures" / "grammar_conformance.json"
    if not fixture.exists():
        pytest.skip("frontend fixture not present")
    checked_in = json.loads(fixture.read_text())
    assert checked_in == {"cases": conformance_cases()}
