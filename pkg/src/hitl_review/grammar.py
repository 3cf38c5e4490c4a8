"""Parsing, validation, and comparison of reviewer label strings.

Reviewers write occupation codes using a small symbol grammar taken from the
Histform transcription guidelines:

* ``531``        a plain code (1-4 digits, or the sentinels ``bbb``/``ttt``)
* ``531@533``    alternative readings the reviewer hesitates between
* ``??``         the image could not be labeled at all
* ``1??8``       each ``??`` masks one character the reviewer could not read
* ``531 %53%``   new label, with the crossed-out original kept in ``%...%``

The full grammar is documented in GRAMMAR.md. Everything here is a pure
function over strings; no state is shared.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

SENTINELS = ("bbb", "ttt")
MAX_CODE_LEN = 4
MASK_CHAR = "?"
UNKNOWN_TOKEN = "??"
ALT_SEPARATOR = "@"


class LabelParseError(ValueError):
    """Raised when a raw string does not conform to the label grammar.

    Carries the character position and a reason so callers can surface
    row-level diagnostics. Callers that need totality catch this and
    classify the input as Invalid.
    """

    def __init__(self, reason: str, position: int):
        super().__init__(f"at {position}: {reason}")
        self.reason = reason
        self.position = position


class LabelClass(Enum):
    CLEAN_CODE = "clean_code"
    UNCERTAIN = "uncertain"
    UNLABELABLE = "unlabelable"
    INVALID = "invalid"


@dataclass(frozen=True)
class ParsedLabel:
    """Structured form of one reviewer label.

    ``candidates`` holds the alternative readings in written order; a masked
    character appears as ``?``. Empty candidates mean the fully-unknown form
    (``??`` on its own). ``raw`` is the verbatim input, kept for provenance
    but excluded from equality so that cosmetic respellings compare equal.
    """

    candidates: tuple[str, ...]
    uncertain: bool
    replaced_old: str | None
    raw: str = field(compare=False)

    @property
    def is_unknown(self) -> bool:
        return not self.candidates

    @property
    def partial_mask(self) -> tuple[tuple[int, ...], ...] | None:
        """Masked character positions per candidate; None when fully known."""
        if not any(MASK_CHAR in c for c in self.candidates):
            return None
        return tuple(
            tuple(i for i, ch in enumerate(c) if ch == MASK_CHAR)
            for c in self.candidates
        )

    def certain_code(self) -> str | None:
        """The single fully-known code, or None if the label carries doubt."""
        if not self.uncertain and len(self.candidates) == 1:
            return self.candidates[0]
        return None


@dataclass(frozen=True)
class CodeList:
    """The configured authority lists a campaign validates against."""

    official: frozenset[str]
    training: frozenset[str]

    @classmethod
    def from_files(cls, official_path: str | Path, training_path: str | Path) -> "CodeList":
        return cls(
            official=load_code_file(official_path),
            training=load_code_file(training_path),
        )


def load_code_file(path: str | Path) -> frozenset[str]:
    """Load a code list: one code per line, UTF-8, '#' starts a comment."""
    codes = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                parsed = parse_label(text)
            except LabelParseError as exc:
                raise ValueError(f"{path}:{lineno}: not a valid code: {exc}") from exc
            code = parsed.certain_code()
            if code is None:
                raise ValueError(f"{path}:{lineno}: {text!r} is not a single plain code")
            codes.add(code)
    return frozenset(codes)


def _parse_token(token: str, offset: int) -> str:
    """Parse one '@'-separated token into a candidate code.

    Returns the normalized candidate text with '?' at masked positions.
    """
    lowered = token.lower()
    if lowered in SENTINELS:
        return lowered
    out = []
    digits = 0
    i = 0
    while i < len(token):
        ch = token[i]
        if ch.isdigit() and ch.isascii():
            out.append(ch)
            digits += 1
            i += 1
        elif ch == MASK_CHAR:
            if i + 1 >= len(token) or token[i + 1] != MASK_CHAR:
                raise LabelParseError("lone '?' (the unknown mark is '??')", offset + i)
            out.append(MASK_CHAR)
            i += 2
        else:
            raise LabelParseError(
                f"invalid character {ch!r} (codes are digits, 'bbb', or 'ttt')",
                offset + i,
            )
    if digits == 0:
        raise LabelParseError("code has no readable digits", offset)
    if len(out) > MAX_CODE_LEN:
        raise LabelParseError(
            f"code longer than {MAX_CODE_LEN} characters", offset
        )
    return "".join(out)


def _split_replacement(stripped: str, base: int) -> tuple[str, str | None]:
    """Split off a trailing '%old%' span; returns (label part, old text)."""
    if "%" not in stripped:
        return stripped, None
    if stripped.count("%") != 2:
        raise LabelParseError("unbalanced '%'", base + stripped.index("%"))
    open_idx = stripped.index("%")
    if not stripped.endswith("%") or open_idx == len(stripped) - 1:
        raise LabelParseError(
            "crossed-out text must close the label: '<new> %<old>%'",
            base + open_idx,
        )
    old = stripped[open_idx + 1 : -1]
    for bad in (ALT_SEPARATOR, MASK_CHAR):
        if bad in old:
            raise LabelParseError(
                f"{bad!r} not allowed inside crossed-out text",
                base + open_idx + 1 + old.index(bad),
            )
    body = stripped[:open_idx].strip()
    if not body:
        raise LabelParseError("missing label before crossed-out text", base)
    return body, old


def parse_label(raw: str) -> ParsedLabel:
    """Parse a raw reviewer string into a ParsedLabel.

    Raises LabelParseError (with position and reason) on anything outside
    the grammar, including whitespace-separated double codes.
    """
    if not isinstance(raw, str):
        raise LabelParseError("label must be text", 0)
    stripped = raw.strip()
    if not stripped:
        raise LabelParseError("empty label", 0)
    base = raw.index(stripped[0])
    body, old = _split_replacement(stripped, base)

    if body == UNKNOWN_TOKEN:
        return ParsedLabel(candidates=(), uncertain=True, replaced_old=old, raw=raw)

    if any(ch.isspace() for ch in body):
        ws = next(i for i, ch in enumerate(body) if ch.isspace())
        raise LabelParseError("whitespace inside label (one code per box)", base + ws)

    candidates = []
    offset = base
    for token in body.split(ALT_SEPARATOR):
        if not token:
            raise LabelParseError("empty alternative around '@'", offset)
        candidates.append(_parse_token(token, offset))
        offset += len(token) + 1

    uncertain = len(candidates) > 1 or any(MASK_CHAR in c for c in candidates)
    return ParsedLabel(
        candidates=tuple(candidates),
        uncertain=uncertain,
        replaced_old=old,
        raw=raw,
    )


def format_label(label: ParsedLabel) -> str:
    """Re-emit a parsed label in canonical text form.

    parse(format_label(parse(raw))) == parse(raw) for every parseable raw.
    """
    if label.is_unknown:
        body = UNKNOWN_TOKEN
    else:
        body = ALT_SEPARATOR.join(
            c.replace(MASK_CHAR, UNKNOWN_TOKEN) for c in label.candidates
        )
    if label.replaced_old is not None:
        return f"{body} %{label.replaced_old}%"
    return body


def normalize(label: ParsedLabel) -> ParsedLabel:
    """Canonical form: sorted, deduplicated alternatives. Idempotent.

    Deduplication may collapse the candidate list to a single code, but the
    uncertainty flag is kept: a reviewer who wrote '531@531' signaled doubt.
    """
    seen = []
    for c in sorted(label.candidates):
        if c not in seen:
            seen.append(c)
    return replace(label, candidates=tuple(seen))


def classify_raw(raw: str, codes: CodeList | None = None, strict: bool = False) -> LabelClass:
    """Total classification of any raw string into one of four classes.

    With ``strict`` on, a clean code must be in the official list (the
    sentinels are always admitted). Default is off: reviewers are not
    constrained to the list.
    """
    try:
        label = parse_label(raw)
    except LabelParseError:
        return LabelClass.INVALID
    if label.is_unknown:
        return LabelClass.UNLABELABLE
    if label.uncertain:
        return LabelClass.UNCERTAIN
    if strict:
        if codes is None:
            raise ValueError("strict classification requires a CodeList")
        code = label.candidates[0]
        if code not in SENTINELS and code not in codes.official:
            return LabelClass.INVALID
    return LabelClass.CLEAN_CODE


def resolve_pair(a: ParsedLabel, b: ParsedLabel) -> str | None:
    """Resolve two reviews of one image to a single code when safe.

    A certain single code on one side that appears among the other side's
    candidates wins; everything else stays unresolved. Symmetric.
    """
    for first, second in ((a, b), (b, a)):
        code = first.certain_code()
        if code is not None and code in second.candidates:
            return code
    return None


def conformance_cases() -> list[dict[str, str]]:
    """Shared grammar fixture for client-side lint conformance.

    Each entry pairs a raw input with the verdict a linter must reproduce:
    'invalid' for strings classify_raw rejects, 'ok' for everything else.
    """
    samples = [
        "531", "5", "0000", "bbb", "ttt", "TTT", "Bbb", "  531  ",
        "531@533", "531@537", "533@531", "531@531", "182??", "1??8",
        "??8", "??", " ?? ", "??1??", "12??", "9??9",
        "531 %537%", "531@533 %5%", "?? %537%", "123 %b%",
        "5bb", "t4b", "", " ", "?", "531?", "???", "????",
        "12345", "123???", "531@", "@531", "531@@533", "5 31", "531 537",
        "53a", "-531", "531%", "%537%", "531 %53%7", "531 %5?7%",
        "531 %5@7%", "bbb@ttt", "bb", "tttt",
    ]
    return [
        {
            "raw": raw,
            "verdict": "invalid" if classify_raw(raw) is LabelClass.INVALID else "ok",
        }
        for raw in samples
    ]
