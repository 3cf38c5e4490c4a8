"""Campaign configuration: one declarative TOML file drives every stage.

All paths in the file are resolved relative to the file's own directory,
so a campaign folder can be moved or checked in wholesale.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CampaignConfig:
    manifest: Path
    official_codes: Path
    training_codes: Path
    images_root: Path
    output_dir: Path
    seed: int
    confidence_threshold: float
    overlap_fraction: float
    selfdup_fraction: float
    page_size: int
    break_threshold_s: float
    reviewers: dict[str, str]  # reviewer_id -> pre-shared token

    @classmethod
    def load(cls, path: str | Path) -> "CampaignConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}")

        campaign = data.get("campaign")
        if not isinstance(campaign, dict):
            raise ConfigError(f"{path}: missing [campaign] table")
        base = path.parent

        def need(key):
            if key not in campaign:
                raise ConfigError(f"{path}: [campaign] missing {key!r}")
            return campaign[key]

        def rel(key):
            return (base / str(need(key))).resolve()

        seed = need("seed")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError(f"{path}: seed must be an integer (no implicit randomness)")

        config = cls(
            manifest=rel("manifest"),
            official_codes=rel("official_codes"),
            training_codes=rel("training_codes"),
            images_root=rel("images_root"),
            output_dir=rel("output_dir"),
            seed=seed,
            confidence_threshold=float(need("confidence_threshold")),
            overlap_fraction=float(campaign.get("overlap_fraction", 0.10)),
            selfdup_fraction=float(campaign.get("selfdup_fraction", 0.014)),
            page_size=int(campaign.get("page_size", 60)),
            break_threshold_s=float(campaign.get("break_threshold_s", 1800.0)),
            reviewers=dict(data.get("reviewers", {})),
        )
        config.validate()
        return config

    def validate(self) -> None:
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ConfigError("confidence_threshold must be in [0,1]")
        for name in ("overlap_fraction", "selfdup_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"{name} must be in [0,1)")
        if self.page_size < 1:
            raise ConfigError("page_size must be >= 1")
        if self.break_threshold_s <= 0:
            raise ConfigError("break_threshold_s must be positive")
        for reviewer, token in self.reviewers.items():
            if not isinstance(token, str) or not token:
                raise ConfigError(f"reviewer {reviewer!r} needs a non-empty token")

    # canonical output locations, shared by the CLI stages
    @property
    def triage_counts_path(self) -> Path:
        return self.output_dir / "triage_counts.json"

    @property
    def selected_images_path(self) -> Path:
        return self.output_dir / "selected_images.txt"

    @property
    def plan_path(self) -> Path:
        return self.output_dir / "plan.jsonl"

    @property
    def store_path(self) -> Path:
        return self.output_dir / "reviews.db"

    @property
    def reviews_export_path(self) -> Path:
        return self.output_dir / "exports" / "reviews.csv"

    @property
    def timings_export_path(self) -> Path:
        return self.output_dir / "exports" / "timings.csv"

    @property
    def agreement_json_path(self) -> Path:
        return self.output_dir / "analysis" / "agreement.json"

    @property
    def agreement_text_path(self) -> Path:
        return self.output_dir / "analysis" / "agreement.txt"

    @property
    def errors_json_path(self) -> Path:
        return self.output_dir / "analysis" / "errors.json"

    @property
    def report_dir(self) -> Path:
        return self.output_dir / "report"
