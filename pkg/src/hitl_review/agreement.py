"""Agreement, correction, and self-consistency analysis of review exports.

All functions consume export rows (mappings with reviewer_id, image_id,
assignment_kind, model_label, raw_label) and are deterministic batch
computations. An empty raw_label means the reviewer agreed with the model,
so it is materialized to the model label before any comparison; when the
model label itself does not parse, that agreement is counted as invalid.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .grammar import (
    LabelClass,
    LabelParseError,
    classify_raw,
    normalize,
    parse_label,
)

PRIMARY = "primary"
OVERLAP_SECOND = "overlap_second"
SELF_DUPLICATE = "self_duplicate"


class PairCategory(Enum):
    CERTAIN = "certain"      # both reviewers agree on one code
    UNKNOWN = "unknown"      # reviewers disagree
    UNCERTAIN = "uncertain"  # at least one reviewer signaled doubt


def materialize(raw_label: str, model_label: str) -> str:
    """Resolve the agreement convention: empty box means the model label."""
    return raw_label if raw_label.strip() else model_label


def categorize_pair(a: str, b: str) -> PairCategory:
    """Categorize two (already materialized) reviews of one image.

    The model label plays no role here. Inputs must be non-Invalid; feed
    Invalid rows to the separate invalid bucket upstream.
    """
    try:
        pa, pb = parse_label(a), parse_label(b)
    except LabelParseError as exc:
        raise ValueError(f"categorize_pair on invalid label: {exc}") from exc
    if pa.uncertain or pb.uncertain or pa.is_unknown or pb.is_unknown:
        return PairCategory.UNCERTAIN
    if normalize(pa).candidates == normalize(pb).candidates:
        return PairCategory.CERTAIN
    return PairCategory.UNKNOWN


def _certain_code(raw: str) -> str | None:
    try:
        return parse_label(raw).certain_code()
    except LabelParseError:
        return None


@dataclass(frozen=True)
class SingleReviewSummary:
    """Fractions of the single-review outcome classes; counts back them."""

    corrected: int
    model_agreed: int
    unlabelable: int
    uncertain: int
    invalid: int

    @property
    def total(self) -> int:
        return self.corrected + self.model_agreed + self.unlabelable + self.uncertain + self.invalid

    def fractions(self) -> dict[str, float]:
        n = self.total
        return {
            "corrected": self.corrected / n,
            "model_agreed": self.model_agreed / n,
            "unlabelable": self.unlabelable / n,
            "uncertain": self.uncertain / n,
            "invalid": self.invalid / n,
        }

    def as_dict(self) -> dict:
        return {
            "counts": {
                "corrected": self.corrected,
                "model_agreed": self.model_agreed,
                "unlabelable": self.unlabelable,
                "uncertain": self.uncertain,
                "invalid": self.invalid,
                "total": self.total,
            },
            "fractions": self.fractions(),
        }


def single_review_summary(records: Iterable[Mapping[str, str]]) -> SingleReviewSummary:
    """Classify every primary-reviewed image into exactly one outcome class.

    corrected     — a clean code differing from the model's
    model_agreed  — empty box, or a clean code equal to the model's
    unlabelable   — the fully-unknown form
    uncertain     — any other uncertainty form
    invalid       — unparseable input, or agreement with an unparseable
                    model label
    """
    primaries = [r for r in records if r["assignment_kind"] == PRIMARY]
    if not primaries:
        raise ValueError("no primary review records")
    seen: set[str] = set()
    counts = Counter()
    for row in primaries:
        image_id = row["image_id"]
        if image_id in seen:
            continue
        seen.add(image_id)
        effective = materialize(row["raw_label"], row["model_label"])
        cls = classify_raw(effective)
        if cls is LabelClass.INVALID:
            counts["invalid"] += 1
        elif cls is LabelClass.UNLABELABLE:
            counts["unlabelable"] += 1
        elif cls is LabelClass.UNCERTAIN:
            counts["uncertain"] += 1
        else:
            code = parse_label(effective).certain_code()
            if code == _certain_code(row["model_label"]):
                counts["model_agreed"] += 1
            else:
                counts["corrected"] += 1
    return SingleReviewSummary(
        corrected=counts["corrected"],
        model_agreed=counts["model_agreed"],
        unlabelable=counts["unlabelable"],
        uncertain=counts["uncertain"],
        invalid=counts["invalid"],
    )


@dataclass(frozen=True)
class OverlapSummary:
    certain: int
    unknown: int
    uncertain: int
    certain_model_agree: int   # Certain pairs whose shared code is the model's
    unknown_one_model: int     # Unknown pairs where exactly one side is the model's
    any_model: int             # pairs with at least one side equal to the model's
    invalid_excluded: int
    missing_partner: int

    @property
    def total(self) -> int:
        return self.certain + self.unknown + self.uncertain

    def fractions(self) -> dict[str, float]:
        n = self.total
        return {
            "certain": self.certain / n,
            "unknown": self.unknown / n,
            "uncertain": self.uncertain / n,
        }

    def as_dict(self) -> dict:
        out = {
            "counts": {
                "certain": self.certain,
                "unknown": self.unknown,
                "uncertain": self.uncertain,
                "total": self.total,
                "certain_model_agree": self.certain_model_agree,
                "unknown_one_model": self.unknown_one_model,
                "any_model": self.any_model,
            },
            "diagnostics": {
                "invalid_excluded": self.invalid_excluded,
                "missing_partner": self.missing_partner,
            },
        }
        if self.total:
            out["fractions"] = self.fractions()
            out["rates"] = {
                "both_agree_with_model": self.certain_model_agree / self.total,
                "one_agrees_within_unknown": (
                    self.unknown_one_model / self.unknown if self.unknown else None
                ),
                "at_least_one_agrees_with_model": self.any_model / self.total,
            }
        return out


def overlap_summary(records: Iterable[Mapping[str, str]]) -> OverlapSummary:
    """Categorize the double-reviewed images.

    Images lacking one of the two reviews, or carrying an Invalid label,
    are excluded from the category fractions and reported in diagnostics.
    """
    primary: dict[str, Mapping[str, str]] = {}
    second: dict[str, Mapping[str, str]] = {}
    for row in records:
        if row["assignment_kind"] == PRIMARY:
            primary[row["image_id"]] = row
        elif row["assignment_kind"] == OVERLAP_SECOND:
            second[row["image_id"]] = row

    counts = Counter()
    certain_model = unknown_one = any_model = 0
    missing = len(set(primary) ^ set(second))
    invalid_excluded = 0
    for image_id in sorted(set(primary) & set(second)):
        row_a, row_b = primary[image_id], second[image_id]
        a = materialize(row_a["raw_label"], row_a["model_label"])
        b = materialize(row_b["raw_label"], row_b["model_label"])
        if classify_raw(a) is LabelClass.INVALID or classify_raw(b) is LabelClass.INVALID:
            invalid_excluded += 1
            continue
        category = categorize_pair(a, b)
        counts[category] += 1
        model = _certain_code(row_a["model_label"])
        sides_match = [
            code is not None and code == model
            for code in (_certain_code(a), _certain_code(b))
        ]
        if model is not None and any(sides_match):
            any_model += 1
            if category is PairCategory.CERTAIN:
                certain_model += 1
            elif category is PairCategory.UNKNOWN:
                unknown_one += 1
    return OverlapSummary(
        certain=counts[PairCategory.CERTAIN],
        unknown=counts[PairCategory.UNKNOWN],
        uncertain=counts[PairCategory.UNCERTAIN],
        certain_model_agree=certain_model,
        unknown_one_model=unknown_one,
        any_model=any_model,
        invalid_excluded=invalid_excluded,
        missing_partner=missing,
    )


class MismatchKind(Enum):
    TRUNCATION = "truncation"        # one raw is a proper prefix of the other
    TRANSPOSITION = "transposition"  # same digit multiset, different order
    OTHER = "other"


@dataclass(frozen=True)
class Mismatch:
    image_id: str
    first: str
    second: str
    kind: MismatchKind


@dataclass(frozen=True)
class ReviewerConsistency:
    reviewer_id: str
    duplicates: int
    exact_matches: int
    mismatches: tuple[Mismatch, ...]


@dataclass(frozen=True)
class ConsistencyReport:
    reviewers: tuple[ReviewerConsistency, ...]
    unpaired: int = 0

    def as_dict(self) -> dict:
        return {
            "reviewers": [
                {
                    "reviewer_id": r.reviewer_id,
                    "duplicates": r.duplicates,
                    "exact_matches": r.exact_matches,
                    "mismatches": [
                        {
                            "image_id": m.image_id,
                            "first": m.first,
                            "second": m.second,
                            "kind": m.kind.value,
                        }
                        for m in r.mismatches
                    ],
                }
                for r in self.reviewers
            ],
            "unpaired": self.unpaired,
        }


def classify_mismatch(first: str, second: str) -> MismatchKind:
    a, b = first.strip(), second.strip()
    if a != b and (a.startswith(b) or b.startswith(a)):
        return MismatchKind.TRUNCATION
    if a != b and Counter(a) == Counter(b):
        return MismatchKind.TRANSPOSITION
    return MismatchKind.OTHER


def _labels_equivalent(a: str, b: str) -> bool:
    """Normalized-label equality; falls back to raw equality for junk."""
    try:
        return normalize(parse_label(a)) == normalize(parse_label(b))
    except LabelParseError:
        return a.strip() == b.strip()


def self_consistency(records: Iterable[Mapping[str, str]]) -> ConsistencyReport:
    """Compare each reviewer's duplicate labels against their originals.

    A match is normalized-label equality, so '555' vs '55' counts as a
    mismatch (tagged truncation) even though the reviewer meant the same
    image.
    """
    primary: dict[tuple[str, str], Mapping[str, str]] = {}
    duplicates: dict[str, list[Mapping[str, str]]] = defaultdict(list)
    for row in records:
        key = (row["reviewer_id"], row["image_id"])
        if row["assignment_kind"] == PRIMARY:
            primary[key] = row
        elif row["assignment_kind"] == SELF_DUPLICATE:
            duplicates[row["reviewer_id"]].append(row)

    reviewers = []
    unpaired = 0
    for reviewer_id in sorted(duplicates):
        exact = 0
        mismatches = []
        n = 0
        for dup_row in sorted(duplicates[reviewer_id], key=lambda r: r["image_id"]):
            orig_row = primary.get((reviewer_id, dup_row["image_id"]))
            if orig_row is None:
                unpaired += 1
                continue
            n += 1
            first = materialize(orig_row["raw_label"], orig_row["model_label"])
            second = materialize(dup_row["raw_label"], dup_row["model_label"])
            if _labels_equivalent(first, second):
                exact += 1
            else:
                mismatches.append(
                    Mismatch(
                        image_id=dup_row["image_id"],
                        first=first,
                        second=second,
                        kind=classify_mismatch(first, second),
                    )
                )
        reviewers.append(
            ReviewerConsistency(
                reviewer_id=reviewer_id,
                duplicates=n,
                exact_matches=exact,
                mismatches=tuple(mismatches),
            )
        )
    return ConsistencyReport(reviewers=tuple(reviewers), unpaired=unpaired)


@dataclass(frozen=True)
class AgreementReport:
    """Everything the agreement stage knows, JSON-ready."""

    single: SingleReviewSummary
    overlap: OverlapSummary | None
    consistency: ConsistencyReport
    notes: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "single_review": self.single.as_dict(),
            "overlap": self.overlap.as_dict() if self.overlap else None,
            "consistency": self.consistency.as_dict(),
            "notes": self.notes,
        }


def analyze_agreement(records: list[Mapping[str, str]]) -> AgreementReport:
    """Run all three agreement analyses over one export."""
    overlap_images = {
        r["image_id"] for r in records if r["assignment_kind"] == OVERLAP_SECOND
    }
    overlap_rows = [r for r in records if r["image_id"] in overlap_images]
    overlap = overlap_summary(overlap_rows) if overlap_images else None
    return AgreementReport(
        single=single_review_summary(records),
        overlap=overlap,
        consistency=self_consistency(records),
        notes={} if overlap_images else {"overlap": "no overlap data"},
    )


def format_agreement_text(report: AgreementReport) -> str:
    """Human-readable summary whose lines mirror the report fractions."""
    lines = []
    single = report.single
    fr = single.fractions()
    lines.append(f"Reviewed images: {single.total}")
    lines.append(f"Corrected: {fr['corrected']:.1%}")
    lines.append(f"Agreed with model: {fr['model_agreed']:.1%}")
    lines.append(f"Unlabelable: {fr['unlabelable']:.1%}")
    lines.append(f"Uncertain: {fr['uncertain']:.1%}")
    lines.append(f"Invalid: {fr['invalid']:.1%}")
    lines.append("")
    if report.overlap and report.overlap.total:
        o = report.overlap
        ofr = o.fractions()
        lines.append(f"Double-reviewed images: {o.total}")
        lines.append(f"Certain: {ofr['certain']:.1%}")
        lines.append(f"Unknown: {ofr['unknown']:.1%}")
        lines.append(f"Uncertain: {ofr['uncertain']:.1%}")
        lines.append(f"Both agree with model: {o.certain_model_agree / o.total:.2%}")
        if o.unknown:
            lines.append(
                f"One agrees with model, within Unknown: {o.unknown_one_model / o.unknown:.2%}"
            )
        lines.append(
            f"At least one agrees with model: {o.any_model / o.total:.2%}"
        )
    else:
        lines.append("Double-reviewed images: no overlap data")
    lines.append("")
    for r in report.consistency.reviewers:
        lines.append(
            f"Consistency {r.reviewer_id}: {r.exact_matches}/{r.duplicates} exact"
            + (
                ", mismatches: "
                + ", ".join(
                    f"{m.first!r} vs {m.second!r} ({m.kind.value})"
                    for m in r.mismatches
                )
                if r.mismatches
                else ""
            )
        )
    return "\n".join(lines) + "\n"
