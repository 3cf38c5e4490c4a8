"""Deterministic reviewer assignment and pagination.

The plan is a pure function of (image set, reviewer set, fractions, seed):
inputs are canonicalized by sorting before any seeded draw, so callers may
pass ids in any order. Three assignment kinds exist:

* primary        — every selected image gets exactly one
* overlap_second — an independent second review by a different reviewer
* self_duplicate — the same image re-inserted into its own reviewer's
                   stream, never overlapping with overlap_second images

Pagination groups each reviewer's work by the model's predicted label and
chunks groups into pages. Self-duplicates are interleaved at seeded
positions and never share a page with their original entry.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .corpus import Corpus

DEFAULT_PAGE_SIZE = 60


class AssignmentKind(Enum):
    PRIMARY = "primary"
    OVERLAP_SECOND = "overlap_second"
    SELF_DUPLICATE = "self_duplicate"


@dataclass(frozen=True)
class Assignment:
    image_id: str
    reviewer_id: str
    kind: AssignmentKind


@dataclass(frozen=True)
class AllocationPlan:
    assignments: tuple[Assignment, ...]
    seed: int
    overlap_frac: float
    selfdup_frac: float

    def by_kind(self, kind: AssignmentKind) -> tuple[Assignment, ...]:
        return tuple(a for a in self.assignments if a.kind is kind)

    def primary_reviewer(self) -> dict[str, str]:
        return {
            a.image_id: a.reviewer_id
            for a in self.assignments
            if a.kind is AssignmentKind.PRIMARY
        }

    def reviewer_counts(self, kind: AssignmentKind) -> dict[str, int]:
        counts: dict[str, int] = {}
        for a in self.assignments:
            if a.kind is kind:
                counts[a.reviewer_id] = counts.get(a.reviewer_id, 0) + 1
        return counts


@dataclass(frozen=True)
class PageEntry:
    image_id: str
    kind: AssignmentKind


@dataclass(frozen=True)
class Page:
    page_id: str
    reviewer_id: str
    model_label: str
    entries: tuple[PageEntry, ...]

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(e.image_id for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def _rng(seed: int, *tags: str) -> random.Random:
    # string seeding is stable across platforms and CPython versions
    return random.Random(":".join([str(seed), *tags]))


def allocate(
    images,
    reviewers,
    overlap_frac: float,
    selfdup_frac: float,
    seed: int,
) -> AllocationPlan:
    """Build the full assignment plan.

    Primary assignments split the images as evenly as possible (counts
    differ by at most one). round(overlap_frac * N) images additionally go
    to a uniformly chosen different reviewer. Per reviewer,
    round(selfdup_frac * |their non-overlap primaries|) primaries are
    re-assigned back to themselves; the overlap and self-duplicate pools
    are disjoint by construction.
    """
    image_ids = sorted(images)
    reviewer_ids = sorted(reviewers)
    if len(set(image_ids)) != len(image_ids):
        raise ValueError("duplicate image ids")
    if not reviewer_ids:
        raise ValueError("at least one reviewer required")
    if len(set(reviewer_ids)) != len(reviewer_ids):
        raise ValueError("duplicate reviewer ids")
    for name, frac in (("overlap_frac", overlap_frac), ("selfdup_frac", selfdup_frac)):
        if not 0.0 <= frac < 1.0:
            raise ValueError(f"{name} must be in [0,1), got {frac}")
    if overlap_frac > 0 and len(reviewer_ids) < 2:
        raise ValueError("overlap requires at least two reviewers")

    shuffled = list(image_ids)
    _rng(seed, "primary").shuffle(shuffled)
    primary_of: dict[str, str] = {}
    assignments: list[Assignment] = []
    for i, reviewer in enumerate(reviewer_ids):
        for image_id in shuffled[i :: len(reviewer_ids)]:
            primary_of[image_id] = reviewer
    # emit primaries in deal order so the plan is reproducible byte-for-byte
    for image_id in shuffled:
        assignments.append(
            Assignment(image_id, primary_of[image_id], AssignmentKind.PRIMARY)
        )

    overlap_rng = _rng(seed, "overlap")
    n_overlap = round(overlap_frac * len(image_ids))
    overlap_images = sorted(overlap_rng.sample(image_ids, n_overlap))
    overlap_set = set(overlap_images)
    for image_id in overlap_images:
        partners = [r for r in reviewer_ids if r != primary_of[image_id]]
        assignments.append(
            Assignment(image_id, overlap_rng.choice(partners), AssignmentKind.OVERLAP_SECOND)
        )

    for reviewer in reviewer_ids:
        pool = [
            img for img in shuffled
            if primary_of[img] == reviewer and img not in overlap_set
        ]
        n_dups = round(selfdup_frac * len(pool))
        if n_dups > len(pool):
            raise ValueError("self-duplicate pool exhausted by overlap selection")
        dup_rng = _rng(seed, "selfdup", reviewer)
        for image_id in sorted(dup_rng.sample(pool, n_dups)):
            assignments.append(
                Assignment(image_id, reviewer, AssignmentKind.SELF_DUPLICATE)
            )

    return AllocationPlan(
        assignments=tuple(assignments),
        seed=seed,
        overlap_frac=overlap_frac,
        selfdup_frac=selfdup_frac,
    )


def _chunk(entries: list[PageEntry], size: int) -> list[list[PageEntry]]:
    return [entries[i : i + size] for i in range(0, len(entries), size)]


def _place_duplicate(
    pages: list[list[PageEntry]],
    labels: list[str],
    entry: PageEntry,
    label: str,
    origin_page: list[PageEntry],
    page_size: int,
    rng: random.Random,
) -> None:
    """Insert a self-duplicate at a seeded position away from its original.

    Preference order: an existing page of the same label at least two page
    positions away from the original, else a fresh page inserted at a
    position at least two away, else appended at the stream end. The
    duplicate never lands on the page holding its original.
    """
    origin_idx = next(i for i, p in enumerate(pages) if p is origin_page)
    candidates = [
        i
        for i, p in enumerate(pages)
        if labels[i] == label
        and p is not origin_page
        and len(p) < page_size
        and abs(i - origin_idx) >= 2
    ]
    if candidates:
        target = pages[rng.choice(candidates)]
        target.insert(rng.randrange(len(target) + 1), entry)
        return
    # fresh page: inserting at k puts the new page at index k and shifts the
    # original to origin_idx + 1 when k <= origin_idx
    positions = [
        k
        for k in range(len(pages) + 1)
        if abs(k - (origin_idx + 1 if k <= origin_idx else origin_idx)) >= 2
    ]
    k = rng.choice(positions) if positions else len(pages)
    pages.insert(k, [entry])
    labels.insert(k, label)


def paginate(
    plan: AllocationPlan,
    corpus: Corpus,
    page_size: int = DEFAULT_PAGE_SIZE,
) -> list[Page]:
    """Chunk every reviewer's assignments into prediction-grouped pages.

    Group order and in-group order are seeded from the plan seed, so the
    same plan always paginates identically.
    """
    if page_size < 1:
        raise ValueError("page_size must be >= 1")
    for a in plan.assignments:
        if a.image_id not in corpus:
            raise ValueError(f"assignment references unknown image {a.image_id!r}")

    reviewers = sorted({a.reviewer_id for a in plan.assignments})
    all_pages: list[Page] = []
    for reviewer in reviewers:
        base = [
            a for a in plan.assignments
            if a.reviewer_id == reviewer and a.kind is not AssignmentKind.SELF_DUPLICATE
        ]
        groups: dict[str, list[PageEntry]] = {}
        for a in base:
            label = corpus[a.image_id].model_label
            groups.setdefault(label, []).append(PageEntry(a.image_id, a.kind))

        ordered_labels = sorted(groups)
        _rng(plan.seed, "pages", reviewer).shuffle(ordered_labels)

        pages: list[list[PageEntry]] = []
        labels: list[str] = []
        origin_page_of: dict[str, list[PageEntry]] = {}
        for label in ordered_labels:
            entries = sorted(groups[label], key=lambda e: e.image_id)
            _rng(plan.seed, "group", reviewer, label).shuffle(entries)
            for chunk in _chunk(entries, page_size):
                pages.append(chunk)
                labels.append(label)
                for entry in chunk:
                    if entry.kind is AssignmentKind.PRIMARY:
                        origin_page_of[entry.image_id] = chunk

        dup_rng = _rng(plan.seed, "dup-placement", reviewer)
        dups = [
            a for a in plan.assignments
            if a.reviewer_id == reviewer and a.kind is AssignmentKind.SELF_DUPLICATE
        ]
        for a in sorted(dups, key=lambda x: x.image_id):
            label = corpus[a.image_id].model_label
            _place_duplicate(
                pages,
                labels,
                PageEntry(a.image_id, a.kind),
                label,
                origin_page_of[a.image_id],
                page_size,
                dup_rng,
            )

        for idx, (entries, label) in enumerate(zip(pages, labels), start=1):
            all_pages.append(
                Page(
                    page_id=f"{reviewer}-{idx:05d}",
                    reviewer_id=reviewer,
                    model_label=label,
                    entries=tuple(entries),
                )
            )
    return all_pages


def write_plan_jsonl(pages: list[Page], path: str | Path) -> None:
    """Export the paginated plan, one assignment per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for page in pages:
            for slot, entry in enumerate(page.entries):
                fh.write(
                    json.dumps(
                        {
                            "image_id": entry.image_id,
                            "reviewer_id": page.reviewer_id,
                            "kind": entry.kind.value,
                            "page_id": page.page_id,
                            "slot": slot,
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )


def read_plan_jsonl(path: str | Path, corpus: Corpus) -> list[Page]:
    """Rebuild pages from a JSONL export, validating label homogeneity."""
    rows_by_page: dict[str, list[dict]] = {}
    page_order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            page_id = row["page_id"]
            if page_id not in rows_by_page:
                rows_by_page[page_id] = []
                page_order.append(page_id)
            rows_by_page[page_id].append(row | {"_line": lineno})

    pages: list[Page] = []
    for page_id in page_order:
        rows = sorted(rows_by_page[page_id], key=lambda r: r["slot"])
        reviewers = {r["reviewer_id"] for r in rows}
        if len(reviewers) != 1:
            raise ValueError(f"page {page_id}: multiple reviewers {sorted(reviewers)}")
        labels = set()
        entries = []
        for row in rows:
            image = corpus.get(row["image_id"])
            if image is None:
                raise ValueError(
                    f"line {row['_line']}: unknown image {row['image_id']!r}"
                )
            labels.add(image.model_label)
            entries.append(PageEntry(row["image_id"], AssignmentKind(row["kind"])))
        if len(labels) != 1:
            raise ValueError(f"page {page_id}: mixed model labels {sorted(labels)}")
        pages.append(
            Page(
                page_id=page_id,
                reviewer_id=next(iter(reviewers)),
                model_label=next(iter(labels)),
                entries=tuple(entries),
            )
        )
    return pages
