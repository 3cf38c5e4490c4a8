"""Corpus ingestion and triage of machine-labeled code images.

A corpus is loaded from a CSV manifest (`image_id,image_ref,model_label,
model_confidence`, RFC-4180). Triage selects the subset that needs human
review: low model confidence, labels that do not parse, labels outside the
official code list, and labels missing from the training set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .grammar import CodeList, LabelParseError, parse_label

MANIFEST_FIELDS = ("image_id", "image_ref", "model_label", "model_confidence")


class ManifestError(ValueError):
    """Ingestion failure with per-row diagnostics."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        preview = "; ".join(self.diagnostics[:5])
        more = f" (+{len(self.diagnostics) - 5} more)" if len(self.diagnostics) > 5 else ""
        super().__init__(f"manifest rejected: {preview}{more}")


@dataclass(frozen=True)
class CodeImage:
    image_id: str
    image_ref: str
    model_label: str
    model_confidence: float


class Corpus:
    """Immutable set of code images keyed by image_id."""

    def __init__(self, images: tuple[CodeImage, ...]):
        self._images = tuple(images)
        self._by_id = {img.image_id: img for img in self._images}
        if len(self._by_id) != len(self._images):
            raise ValueError("duplicate image_ids in corpus")

    @property
    def images(self) -> tuple[CodeImage, ...]:
        return self._images

    def __len__(self) -> int:
        return len(self._images)

    def __iter__(self):
        return iter(self._images)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id

    def __getitem__(self, image_id: str) -> CodeImage:
        return self._by_id[image_id]

    def get(self, image_id: str) -> CodeImage | None:
        return self._by_id.get(image_id)


def ingest_corpus(source: str | Path) -> Corpus:
    """Load a manifest CSV into a Corpus.

    All problems are collected into a ManifestError carrying row-numbered
    diagnostics; duplicate ids and malformed confidences are hard failures.
    """
    diagnostics: list[str] = []
    images: list[CodeImage] = []
    seen: set[str] = set()
    with open(source, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_FIELDS:
            raise ManifestError(
                [f"row 1: header must be {','.join(MANIFEST_FIELDS)}, got {reader.fieldnames}"]
            )
        for rownum, row in enumerate(reader, start=2):
            image_id = (row.get("image_id") or "").strip()
            image_ref = (row.get("image_ref") or "").strip()
            raw_conf = (row.get("model_confidence") or "").strip()
            model_label = row.get("model_label")
            if model_label is None:
                diagnostics.append(f"row {rownum}: missing model_label field")
                continue
            if not image_id:
                diagnostics.append(f"row {rownum}: empty image_id")
                continue
            if image_id in seen:
                diagnostics.append(f"row {rownum}: duplicate image_id {image_id!r}")
                continue
            try:
                confidence = float(raw_conf)
            except ValueError:
                diagnostics.append(f"row {rownum}: malformed confidence {raw_conf!r}")
                continue
            if not 0.0 <= confidence <= 1.0:
                diagnostics.append(f"row {rownum}: confidence {confidence} outside [0,1]")
                continue
            seen.add(image_id)
            images.append(CodeImage(image_id, image_ref, model_label, confidence))
    if diagnostics:
        raise ManifestError(diagnostics)
    return Corpus(tuple(images))


class TriageReason(Enum):
    """Why an image needs review, in single-reason reporting priority."""

    NONSENSICAL_LABEL = "nonsensical_label"
    NOT_IN_OFFICIAL_LIST = "not_in_official_list"
    NOT_IN_TRAINING_SET = "not_in_training_set"
    BELOW_THRESHOLD = "below_threshold"


_PRIORITY = tuple(TriageReason)


@dataclass(frozen=True)
class TriageResult:
    """Per-image reason sets plus the derived selection."""

    reasons: dict[str, frozenset[TriageReason]]
    selected: tuple[str, ...]
    threshold: float

    def primary_reason(self, image_id: str) -> TriageReason | None:
        hits = self.reasons.get(image_id, frozenset())
        for reason in _PRIORITY:
            if reason in hits:
                return reason
        return None

    def counts_by_reason(self) -> dict[TriageReason, int]:
        """Each selected image counted once, under its highest-priority reason."""
        counts = {reason: 0 for reason in _PRIORITY}
        for image_id in self.selected:
            counts[self.primary_reason(image_id)] += 1
        return counts

    @property
    def total_selected(self) -> int:
        return len(self.selected)


def model_code(model_label: str) -> str | None:
    """The model label as a single certain code, or None when nonsensical."""
    try:
        return parse_label(model_label).certain_code()
    except LabelParseError:
        return None


def triage(corpus: Corpus, codes: CodeList, threshold: float) -> TriageResult:
    """Select the review subset; deterministic and order-independent."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0,1]")
    reasons: dict[str, frozenset[TriageReason]] = {}
    selected: list[str] = []
    for img in corpus:
        hits = set()
        code = model_code(img.model_label)
        if code is None:
            hits.add(TriageReason.NONSENSICAL_LABEL)
        elif code not in codes.official:
            hits.add(TriageReason.NOT_IN_OFFICIAL_LIST)
        elif code not in codes.training:
            hits.add(TriageReason.NOT_IN_TRAINING_SET)
        if img.model_confidence < threshold:
            hits.add(TriageReason.BELOW_THRESHOLD)
        if hits:
            reasons[img.image_id] = frozenset(hits)
            selected.append(img.image_id)
    return TriageResult(reasons=reasons, selected=tuple(selected), threshold=threshold)
