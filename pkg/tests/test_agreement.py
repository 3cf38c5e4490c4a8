import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hitl_review.agreement import (
    MismatchKind,
    PairCategory,
    analyze_agreement,
    categorize_pair,
    classify_mismatch,
    format_agreement_text,
    materialize,
    overlap_summary,
    self_consistency,
    single_review_summary,
)

from planted import generate_overlap, generate_single_review

# Reference rows for paired-review categorization: reviewer 1, reviewer 2,
# model label (ignored by the categorizer), expected category.
REFERENCE_PAIRS = [
    ("531", "531", "531", PairCategory.CERTAIN),
    ("531", "531", "999", PairCategory.CERTAIN),
    ("531", "999", "888", PairCategory.UNKNOWN),
    ("531", "888", "888", PairCategory.UNKNOWN),
    ("531", "182??", "141", PairCategory.UNCERTAIN),
    ("531@533", "531", "181", PairCategory.UNCERTAIN),
    ("??", "531", "555", PairCategory.UNCERTAIN),
    ("1??8", "531", "188", PairCategory.UNCERTAIN),
]


@pytest.mark.parametrize("a,b,model,expected", REFERENCE_PAIRS)
def test_categorize_reference_rows(a, b, model, expected):
    assert categorize_pair(a, b) is expected
    assert categorize_pair(b, a) is expected  # symmetry


def test_categorize_rejects_invalid():
    with pytest.raises(ValueError):
        categorize_pair("5bb", "531")


def test_uncertainty_takes_precedence_over_equality():
    # identical candidate sets still categorize as Uncertain when hedged
    assert categorize_pair("531@533", "531@533") is PairCategory.UNCERTAIN


label_pool = st.sampled_from(
    ["531", "533", "999", "531@533", "??", "1??8", "bbb", "182??"]
)


@given(label_pool, label_pool)
@settings(max_examples=200)
def test_categorize_symmetry_property(a, b):
    assert categorize_pair(a, b) is categorize_pair(b, a)


def test_materialize():
    assert materialize("", "531") == "531"
    assert materialize("  ", "531") == "531"
    assert materialize("999", "531") == "999"


def test_single_review_direct_count():
    rows = generate_single_review(6, 3, 1, 0, 0, seed=1)
    summary = single_review_summary(rows)
    assert (summary.corrected, summary.model_agreed, summary.unlabelable) == (6, 3, 1)
    fr = summary.fractions()
    assert fr["corrected"] == 0.6
    assert fr["model_agreed"] == 0.3
    assert fr["unlabelable"] == 0.1
    assert abs(sum(fr.values()) - 1.0) < 1e-9


def test_single_review_planted_recovery():
    planted = dict(corrected=628, model_agreed=319, unlabelable=2, uncertain=48, invalid=3)
    rows = generate_single_review(**planted, seed=42)
    summary = single_review_summary(rows)
    assert summary.corrected == planted["corrected"]
    assert summary.model_agreed == planted["model_agreed"]
    assert summary.unlabelable == planted["unlabelable"]
    assert summary.uncertain == planted["uncertain"]
    assert summary.invalid == planted["invalid"]


def test_single_review_empty_errors():
    with pytest.raises(ValueError, match="no primary"):
        single_review_summary([])


def test_single_review_agreement_with_junk_model_is_invalid():
    rows = [
        {
            "reviewer_id": "r1",
            "image_id": "x",
            "assignment_kind": "primary",
            "model_label": "5bb",
            "raw_label": "",
        }
    ]
    assert single_review_summary(rows).invalid == 1


def test_overlap_summary_small():
    rows = generate_overlap(
        certain_model=1, certain_other=1, unknown_one_model=1,
        unknown_no_model=0, uncertain=1, seed=2,
    )
    summary = overlap_summary(rows)
    assert (summary.certain, summary.unknown, summary.uncertain) == (2, 1, 1)
    fr = summary.fractions()
    assert fr == {"certain": 0.5, "unknown": 0.25, "uncertain": 0.25}
    assert summary.certain_model_agree == 1  # half of the Certain pairs
    assert summary.unknown_one_model == 1


def test_overlap_summary_planted_recovery():
    rows = generate_overlap(338, 526, 40, 49, 47, seed=3)
    summary = overlap_summary(rows)
    assert summary.certain == 338 + 526
    assert summary.unknown == 40 + 49
    assert summary.uncertain == 47
    assert summary.certain_model_agree == 338
    assert summary.unknown_one_model == 40
    assert summary.any_model == 338 + 40
    assert abs(sum(summary.fractions().values()) - 1.0) < 1e-9


def test_overlap_missing_partner_diagnostics():
    rows = generate_overlap(1, 0, 0, 0, 0, seed=1)
    rows.append(
        {
            "reviewer_id": "r2",
            "image_id": "lonely",
            "assignment_kind": "overlap_second",
            "model_label": "531",
            "raw_label": "531",
        }
    )
    summary = overlap_summary(rows)
    assert summary.missing_partner == 1
    assert summary.total == 1


def test_overlap_invalid_pairs_excluded():
    rows = generate_overlap(2, 0, 0, 0, 0, seed=1)
    rows += [
        {
            "reviewer_id": "r1",
            "image_id": "bad",
            "assignment_kind": "primary",
            "model_label": "531",
            "raw_label": "5bb",
        },
        {
            "reviewer_id": "r2",
            "image_id": "bad",
            "assignment_kind": "overlap_second",
            "model_label": "531",
            "raw_label": "531",
        },
    ]
    summary = overlap_summary(rows)
    assert summary.invalid_excluded == 1
    assert summary.total == 2


def test_overlap_empty_fragment():
    summary = overlap_summary([])
    assert summary.total == 0
    assert summary.as_dict()["counts"]["total"] == 0


def consistency_rows(reviewer, image, first, second, model="531"):
    return [
        {
            "reviewer_id": reviewer,
            "image_id": image,
            "assignment_kind": "primary",
            "model_label": model,
            "raw_label": first,
        },
        {
            "reviewer_id": reviewer,
            "image_id": image,
            "assignment_kind": "self_duplicate",
            "model_label": model,
            "raw_label": second,
        },
    ]


def test_self_consistency_tags():
    rows = (
        consistency_rows("r1", "i1", "555", "55")
        + consistency_rows("r1", "i2", "861", "168")
        + consistency_rows("r1", "i3", "531", "531")
        + consistency_rows("r1", "i4", "531", "999")
    )
    report = self_consistency(rows)
    assert len(report.reviewers) == 1
    r = report.reviewers[0]
    assert r.duplicates == 4
    assert r.exact_matches == 1
    kinds = {m.image_id: m.kind for m in r.mismatches}
    assert kinds == {
        "i1": MismatchKind.TRUNCATION,
        "i2": MismatchKind.TRANSPOSITION,
        "i4": MismatchKind.OTHER,
    }
    assert r.exact_matches + len(r.mismatches) == r.duplicates


def test_self_consistency_agreement_via_empty_boxes():
    # both boxes left empty: both materialize to the model label, exact match
    rows = consistency_rows("r2", "i1", "", "")
    report = self_consistency(rows)
    assert report.reviewers[0].exact_matches == 1


def test_classify_mismatch_examples():
    assert classify_mismatch("555", "55") is MismatchKind.TRUNCATION
    assert classify_mismatch("861", "168") is MismatchKind.TRANSPOSITION
    assert classify_mismatch("531", "999") is MismatchKind.OTHER


def test_analyze_agreement_end_to_end():
    rows = generate_single_review(10, 5, 1, 2, 1, seed=5)
    rows += generate_overlap(3, 2, 1, 1, 1, seed=6)
    rows += consistency_rows("r1", "dup-1", "555", "55")
    report = analyze_agreement(rows)
    assert report.single.total == 19 + 8 + 1
    assert report.overlap is not None and report.overlap.total == 8
    text = format_agreement_text(report)
    assert "Certain:" in text
    assert "Consistency r1: 0/1 exact" in text


def test_analyze_agreement_without_overlap():
    rows = generate_single_review(3, 1, 0, 0, 0, seed=7)
    report = analyze_agreement(rows)
    assert report.overlap is None
    assert report.notes["overlap"] == "no overlap data"
    assert "no overlap data" in format_agreement_text(report)


@given(
    st.integers(0, 30), st.integers(0, 30), st.integers(0, 10),
    st.integers(0, 10), st.integers(0, 10), st.integers(0, 1000),
)
@settings(max_examples=60)
def test_property_generator_round_trip(cm, co, uo, un, uc, seed):
    rows = generate_overlap(cm, co, uo, un, uc, seed=seed)
    if not rows:
        return
    summary = overlap_summary(rows)
    assert summary.certain == cm + co
    assert summary.unknown == uo + un
    assert summary.uncertain == uc
    assert summary.certain_model_agree == cm
    assert summary.unknown_one_model == uo
