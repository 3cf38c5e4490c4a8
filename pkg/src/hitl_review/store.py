"""SQLite-backed persistence for review campaigns.

One file per campaign. Page submission is the atomic unit: either every
label on the page commits together with its timing record, or nothing
does. History is append-only; resubmissions bump a per-page version and
exports read the latest version per (reviewer, image, kind).
"""

from __future__ import annotations

import csv
import sqlite3
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .allocation import Page

_SCHEMA = """
CREATE TABLE IF NOT EXISTS page_submissions (
    id INTEGER PRIMARY KEY,
    reviewer_id TEXT NOT NULL,
    page_id TEXT NOT NULL,
    version INTEGER NOT NULL,
    duration_s REAL NOT NULL CHECK (duration_s > 0),
    submitted_at REAL NOT NULL,
    UNIQUE (reviewer_id, page_id, version)
);
CREATE TABLE IF NOT EXISTS reviews (
    id INTEGER PRIMARY KEY,
    reviewer_id TEXT NOT NULL,
    image_id TEXT NOT NULL,
    assignment_kind TEXT NOT NULL,
    raw_label TEXT NOT NULL,
    model_label TEXT NOT NULL,
    page_id TEXT NOT NULL,
    version INTEGER NOT NULL,
    submitted_at REAL NOT NULL,
    UNIQUE (reviewer_id, image_id, assignment_kind, version)
);
CREATE INDEX IF NOT EXISTS idx_reviews_page ON reviews (reviewer_id, page_id, version);
"""


class VersionConflict(Exception):
    """Optimistic-concurrency failure: the page moved under the writer."""


class SubmissionError(ValueError):
    """Invalid page submission (wrong reviewer, stray image, bad duration)."""


@dataclass(frozen=True)
class ReviewRecord:
    reviewer_id: str
    image_id: str
    assignment_kind: str
    raw_label: str      # empty string means "agreed with the model"
    model_label: str
    page_id: str
    version: int
    submitted_at: float


@dataclass(frozen=True)
class TimingRecord:
    reviewer_id: str
    page_id: str
    duration: float
    recorded_at: float


class ReviewStore:
    """Campaign database. Writes are serialized; reads see committed state."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.isolation_level = None  # explicit transactions only
        with self._lock:
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        self._conn.close()

    def __enter__(self) -> "ReviewStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- writes ----------------------------------------------------------

    def submit_page(
        self,
        reviewer_id: str,
        page: Page,
        labels: Mapping[str, str],
        duration: float,
        submitted_at: float | None = None,
        expected_version: int | None = None,
    ) -> int:
        """Commit one full page atomically; returns the new version.

        An absent or empty textbox means the reviewer agreed with the model
        label, stored as raw_label = "". With ``expected_version`` set, the
        write fails with VersionConflict unless the page is still at that
        version.
        """
        if reviewer_id != page.reviewer_id:
            raise SubmissionError(f"page {page.page_id} belongs to {page.reviewer_id}")
        if not duration > 0:
            raise SubmissionError("duration must be positive")
        page_images = set(page.image_ids)
        stray = set(labels) - page_images
        if stray:
            raise SubmissionError(f"labels for images not on page: {sorted(stray)}")
        when = time.time() if submitted_at is None else submitted_at

        with self._lock:
            cur = self._conn.cursor()
            cur.execute("BEGIN IMMEDIATE")
            try:
                current = self._page_version(cur, reviewer_id, page.page_id)
                if expected_version is not None and expected_version != current:
                    raise VersionConflict(
                        f"page {page.page_id} is at version {current}, not {expected_version}"
                    )
                version = current + 1
                cur.execute(
                    "INSERT INTO page_submissions"
                    " (reviewer_id, page_id, version, duration_s, submitted_at)"
                    " VALUES (?, ?, ?, ?, ?)",
                    (reviewer_id, page.page_id, version, duration, when),
                )
                for entry in page.entries:
                    self._insert_review(
                        cur,
                        ReviewRecord(
                            reviewer_id=reviewer_id,
                            image_id=entry.image_id,
                            assignment_kind=entry.kind.value,
                            raw_label=labels.get(entry.image_id, ""),
                            model_label=page.model_label,
                            page_id=page.page_id,
                            version=version,
                            submitted_at=when,
                        ),
                    )
                cur.execute("COMMIT")
            except BaseException:
                cur.execute("ROLLBACK")
                raise
        return version

    def _insert_review(self, cur: sqlite3.Cursor, record: ReviewRecord) -> None:
        cur.execute(
            "INSERT INTO reviews (reviewer_id, image_id, assignment_kind,"
            " raw_label, model_label, page_id, version, submitted_at)"
            " VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
            (
                record.reviewer_id,
                record.image_id,
                record.assignment_kind,
                record.raw_label,
                record.model_label,
                record.page_id,
                record.version,
                record.submitted_at,
            ),
        )

    # -- reads -----------------------------------------------------------

    @staticmethod
    def _page_version(cur: sqlite3.Cursor, reviewer_id: str, page_id: str) -> int:
        row = cur.execute(
            "SELECT COALESCE(MAX(version), 0) FROM page_submissions"
            " WHERE reviewer_id = ? AND page_id = ?",
            (reviewer_id, page_id),
        ).fetchone()
        return int(row[0])

    def page_version(self, reviewer_id: str, page_id: str) -> int:
        """0 when the page was never submitted."""
        return self._page_version(self._conn.cursor(), reviewer_id, page_id)

    def completed_pages(self, reviewer_id: str) -> set[str]:
        rows = self._conn.execute(
            "SELECT DISTINCT page_id FROM page_submissions WHERE reviewer_id = ?",
            (reviewer_id,),
        ).fetchall()
        return {r[0] for r in rows}

    def latest_page_labels(self, reviewer_id: str, page_id: str) -> dict[str, str]:
        """image_id -> raw label at the latest submitted version (may be {})."""
        rows = self._conn.execute(
            "SELECT image_id, raw_label FROM reviews"
            " WHERE reviewer_id = ? AND page_id = ?"
            " AND version = (SELECT COALESCE(MAX(version), 0) FROM page_submissions"
            "                WHERE reviewer_id = ? AND page_id = ?)",
            (reviewer_id, page_id, reviewer_id, page_id),
        ).fetchall()
        return {image_id: raw for image_id, raw in rows}

    def review_history(
        self, reviewer_id: str, image_id: str, assignment_kind: str
    ) -> list[ReviewRecord]:
        rows = self._conn.execute(
            "SELECT reviewer_id, image_id, assignment_kind, raw_label, model_label,"
            " page_id, version, submitted_at FROM reviews"
            " WHERE reviewer_id = ? AND image_id = ? AND assignment_kind = ?"
            " ORDER BY version",
            (reviewer_id, image_id, assignment_kind),
        ).fetchall()
        return [ReviewRecord(*row) for row in rows]

    def latest_reviews(self) -> list[ReviewRecord]:
        """Latest version per (reviewer, image, kind), stably ordered."""
        rows = self._conn.execute(
            "SELECT r.reviewer_id, r.image_id, r.assignment_kind, r.raw_label,"
            " r.model_label, r.page_id, r.version, r.submitted_at"
            " FROM reviews r"
            " WHERE r.version = (SELECT MAX(version) FROM reviews r2"
            "   WHERE r2.reviewer_id = r.reviewer_id AND r2.image_id = r.image_id"
            "   AND r2.assignment_kind = r.assignment_kind)"
            " ORDER BY r.reviewer_id, r.page_id, r.image_id, r.assignment_kind",
        ).fetchall()
        return [ReviewRecord(*row) for row in rows]

    def timings(self) -> list[TimingRecord]:
        rows = self._conn.execute(
            "SELECT reviewer_id, page_id, duration_s, submitted_at"
            " FROM page_submissions ORDER BY reviewer_id, page_id, version",
        ).fetchall()
        return [TimingRecord(*row) for row in rows]

    def submission_durations(self) -> dict[tuple[str, str, int], float]:
        """(reviewer_id, page_id, version) -> page duration in seconds."""
        rows = self._conn.execute(
            "SELECT reviewer_id, page_id, version, duration_s FROM page_submissions",
        ).fetchall()
        return {(r, p, v): d for r, p, v, d in rows}


def filter_timings(
    records: Iterable[TimingRecord], break_threshold: float
) -> tuple[list[TimingRecord], list[TimingRecord]]:
    """Partition timing records into (kept, removed-as-breaks).

    A record longer than ``break_threshold`` seconds is taken as the
    reviewer having walked away mid-page and is excluded from effort
    analysis. kept + removed is always the full input.
    """
    if not break_threshold > 0:
        raise ValueError("break_threshold must be positive")
    kept, removed = [], []
    for record in records:
        (removed if record.duration > break_threshold else kept).append(record)
    return kept, removed


EXPORT_FIELDS = (
    "reviewer_id",
    "image_id",
    "assignment_kind",
    "model_label",
    "raw_label",
    "page_id",
    "duration_context",
)


def export_reviews(store: ReviewStore, path: str | Path) -> int:
    """Write the latest reviews to CSV; returns the row count.

    duration_context is the page-submission duration that produced the row.
    """
    durations = store.submission_durations()
    rows = store.latest_reviews()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXPORT_FIELDS)
        for r in rows:
            writer.writerow(
                [
                    r.reviewer_id,
                    r.image_id,
                    r.assignment_kind,
                    r.model_label,
                    r.raw_label,
                    r.page_id,
                    durations.get((r.reviewer_id, r.page_id, r.version), ""),
                ]
            )
    return len(rows)


def export_timings(store: ReviewStore, path: str | Path) -> int:
    """Write all timing records (one per completed page visit) to CSV."""
    records = store.timings()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["reviewer_id", "page_id", "duration_s", "recorded_at"])
        for t in records:
            writer.writerow([t.reviewer_id, t.page_id, t.duration, t.recorded_at])
    return len(records)


def read_export(path: str | Path) -> list[dict[str, str]]:
    """Load an export CSV back into dict rows (analysis input)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EXPORT_FIELDS:
            raise ValueError(f"unexpected export header: {reader.fieldnames}")
        return list(reader)
