"""Model-error analyses over corrected review exports.

The human truth for an image is the resolved review outcome: when two
independent reviews exist they must resolve to one code, otherwise the
single review must be a clean code; anything carrying uncertainty symbols
is dropped. The remaining labels are assumed correct.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .grammar import LabelParseError, parse_label, resolve_pair, SENTINELS
from .agreement import PRIMARY, OVERLAP_SECOND, materialize


def _certain_code(raw: str) -> str | None:
    try:
        return parse_label(raw).certain_code()
    except LabelParseError:
        return None


def resolve_truth(records: Iterable[Mapping[str, str]]) -> dict[str, str]:
    """image_id -> human truth code, for images where one can be trusted."""
    primary: dict[str, Mapping[str, str]] = {}
    second: dict[str, Mapping[str, str]] = {}
    for row in records:
        if row["assignment_kind"] == PRIMARY:
            primary[row["image_id"]] = row
        elif row["assignment_kind"] == OVERLAP_SECOND:
            second[row["image_id"]] = row

    truth: dict[str, str] = {}
    for image_id, row in primary.items():
        a = materialize(row["raw_label"], row["model_label"])
        partner = second.get(image_id)
        if partner is None:
            code = _certain_code(a)
        else:
            b = materialize(partner["raw_label"], partner["model_label"])
            try:
                code = resolve_pair(parse_label(a), parse_label(b))
            except LabelParseError:
                code = None
        if code is not None:
            truth[image_id] = code
    return truth


@dataclass(frozen=True)
class ClassErrorPoint:
    code: str
    class_size: int
    misclassified: int

    @property
    def error_rate(self) -> float:
        return self.misclassified / self.class_size


def _model_codes(records: Iterable[Mapping[str, str]]) -> dict[str, str | None]:
    return {
        row["image_id"]: _certain_code(row["model_label"])
        for row in records
        if row["assignment_kind"] == PRIMARY
    }


def per_class_error(records: Sequence[Mapping[str, str]]) -> list[ClassErrorPoint]:
    """Class size and misclassification rate per human-truth code.

    An unparseable model label always counts as misclassified. Sentinel
    classes (bbb, ttt) are included like any other code.
    """
    truth = resolve_truth(records)
    model = _model_codes(records)
    sizes: Counter[str] = Counter()
    wrong: Counter[str] = Counter()
    for image_id, code in truth.items():
        sizes[code] += 1
        if model.get(image_id) != code:
            wrong[code] += 1
    return [
        ClassErrorPoint(code=code, class_size=sizes[code], misclassified=wrong[code])
        for code in sorted(sizes)
    ]


def top_misclassified(
    records: Sequence[Mapping[str, str]], k: int
) -> list[tuple[str, int]]:
    """Truth codes ranked by misclassification count, ties by code."""
    if k < 1:
        raise ValueError("k must be >= 1")
    points = per_class_error(records)
    ranked = sorted(points, key=lambda p: (-p.misclassified, p.code))
    return [(p.code, p.misclassified) for p in ranked[:k] if p.misclassified > 0]


@dataclass(frozen=True)
class ConfusionFlow:
    predicted: str
    sources: tuple[tuple[str, int], ...]  # (true code, count), descending

    @property
    def total(self) -> int:
        return sum(c for _, c in self.sources)


def confusion_into(records: Sequence[Mapping[str, str]], predicted: str) -> ConfusionFlow:
    """Where the images the model called ``predicted`` actually belong."""
    truth = resolve_truth(records)
    model = _model_codes(records)
    counts: Counter[str] = Counter()
    for image_id, code in truth.items():
        if model.get(image_id) == predicted and code != predicted:
            counts[code] += 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ConfusionFlow(predicted=predicted, sources=tuple(ordered))


# -- similarity profiling -------------------------------------------------


@dataclass(frozen=True)
class SimilarityProfile:
    truth: str
    predicted: str
    numeric: bool
    hamming: int | None          # None for sentinel codes or unequal lengths
    levenshtein: int | None
    digit_anagram: bool | None   # same digit multiset, different order
    shared_digits: int | None    # multiset intersection size


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def similarity_profile(truth: str, predicted: str) -> SimilarityProfile:
    """How a misread relates to the truth: position flips, digit reuse."""
    codes = []
    for raw in (truth, predicted):
        code = _certain_code(raw)
        if code is None:
            raise ValueError(f"{raw!r} is not a single code")
        codes.append(code)
    t, p = codes
    if t in SENTINELS or p in SENTINELS:
        return SimilarityProfile(t, p, False, None, None, None, None)
    hamming = (
        sum(x != y for x, y in zip(t, p)) if len(t) == len(p) else None
    )
    counter_t, counter_p = Counter(t), Counter(p)
    return SimilarityProfile(
        truth=t,
        predicted=p,
        numeric=True,
        hamming=hamming,
        levenshtein=levenshtein(t, p),
        digit_anagram=(counter_t == counter_p and t != p),
        shared_digits=sum((counter_t & counter_p).values()),
    )


# -- natural-spline trend --------------------------------------------------


class RankDeficientDesign(ValueError):
    """The spline design matrix lost rank; names the collinear columns."""

    def __init__(self, columns: list[int]):
        self.columns = columns
        super().__init__(
            "rank-deficient spline design; dependent columns: "
            + ", ".join(map(str, columns))
        )


def natural_spline_basis(x: np.ndarray, knots: Sequence[float]) -> np.ndarray:
    """Natural cubic spline basis (linear beyond the boundary knots).

    Columns: intercept, x, then one truncated-cubic combination per
    interior knot; K knots give K columns.
    """
    x = np.asarray(x, dtype=float)
    kn = np.asarray(knots, dtype=float)
    K = len(kn)

    def d(i: int) -> np.ndarray:
        num = np.clip(x - kn[i], 0, None) ** 3 - np.clip(x - kn[-1], 0, None) ** 3
        return num / (kn[-1] - kn[i])

    last = d(K - 2)
    columns = [np.ones_like(x), x]
    columns.extend(d(i) - last for i in range(K - 2))
    return np.column_stack(columns)


@dataclass(frozen=True)
class SplineFit:
    knots: tuple[float, ...]
    coefficients: tuple[float, ...]
    fitted: tuple[float, ...]
    residual_norm: float

    def predict(self, xs) -> np.ndarray:
        design = natural_spline_basis(np.asarray(xs, dtype=float), self.knots)
        return design @ np.asarray(self.coefficients)


def spline_trend(points: Sequence[tuple[float, float]], knots: int = 6) -> SplineFit:
    """Least-squares natural cubic spline through (x, y) points.

    Knots sit at equally spaced quantiles of x. Requires at least
    knots + 2 distinct x values so the fit is determined.
    """
    if knots < 2:
        raise ValueError("need at least 2 knots")
    if not points:
        raise ValueError("no points to fit")
    x = np.asarray([p[0] for p in points], dtype=float)
    y = np.asarray([p[1] for p in points], dtype=float)
    distinct = np.unique(x)
    if len(distinct) < knots + 2:
        raise ValueError(
            f"need at least {knots + 2} distinct x values, got {len(distinct)}"
        )
    knot_locations = np.quantile(x, np.linspace(0.0, 1.0, knots))
    if len(np.unique(knot_locations)) != knots:
        raise ValueError(
            "x values too concentrated: quantile knots collapse "
            f"({knot_locations.tolist()})"
        )
    design = natural_spline_basis(x, knot_locations)
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        # QR with column pivoting: the trailing pivots are the dependents
        _, _, pivots = _pivoted_qr(design)
        raise RankDeficientDesign(sorted(int(c) for c in pivots[rank:]))
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ beta
    return SplineFit(
        knots=tuple(float(k) for k in knot_locations),
        coefficients=tuple(float(b) for b in beta),
        fitted=tuple(float(v) for v in fitted),
        residual_norm=float(np.linalg.norm(y - fitted)),
    )


def _pivoted_qr(a: np.ndarray):
    from scipy.linalg import qr

    return qr(a, pivoting=True)


# -- confidence-threshold trade-off -----------------------------------------


@dataclass(frozen=True)
class ThresholdPoint:
    threshold: float
    manual_volume: int           # images sent to review (confidence < t)
    auto_accuracy: float | None  # accuracy over the retained set; None if empty


def threshold_tradeoff(
    confidences: Sequence[tuple[float, bool]], grid: Sequence[float]
) -> list[ThresholdPoint]:
    """Manual volume vs automatic accuracy across confidence cutoffs."""
    if not confidences:
        raise ValueError("no confidence data")
    if list(grid) != sorted(grid):
        raise ValueError("threshold grid must be sorted ascending")
    conf = np.asarray([c for c, _ in confidences], dtype=float)
    correct = np.asarray([bool(ok) for _, ok in confidences])
    order = np.argsort(conf, kind="stable")
    conf_sorted = conf[order]
    correct_sorted = correct[order]
    # suffix sums: correct predictions among everything at or above an index
    suffix_correct = np.concatenate([np.cumsum(correct_sorted[::-1])[::-1], [0]])
    n = len(conf_sorted)
    points = []
    for t in grid:
        cut = int(np.searchsorted(conf_sorted, t, side="left"))
        retained = n - cut
        accuracy = float(suffix_correct[cut]) / retained if retained else None
        points.append(ThresholdPoint(float(t), cut, accuracy))
    return points


# -- JSON assembly ----------------------------------------------------------


def error_report(
    records: Sequence[Mapping[str, str]],
    spline_knots: int = 6,
    top_k: int = 10,
    flow_codes: Sequence[str] | None = None,
) -> dict:
    """Assemble the full error-analysis report as a JSON-ready dict.

    The spline regresses error rate on log10(class size); the transform is
    recorded in the output so readers can reproduce the curve.
    """
    points = per_class_error(records)
    report: dict = {
        "truth_images": sum(p.class_size for p in points),
        "classes": len(points),
        "per_class_error": [
            {
                "code": p.code,
                "class_size": p.class_size,
                "misclassified": p.misclassified,
                "error_rate": p.error_rate,
            }
            for p in points
        ],
        "top_misclassified": [
            {"code": code, "misclassified": count}
            for code, count in top_misclassified(records, top_k)
        ],
    }
    xy = [(float(np.log10(p.class_size)), p.error_rate) for p in points]
    distinct_x = len({x for x, _ in xy})
    if distinct_x >= spline_knots + 2:
        fit = spline_trend(xy, knots=spline_knots)
        report["trend"] = {
            "x_transform": "log10(class_size)",
            "knots": list(fit.knots),
            "coefficients": list(fit.coefficients),
            "residual_norm": fit.residual_norm,
        }
    else:
        report["trend"] = {
            "x_transform": "log10(class_size)",
            "skipped": f"needs {spline_knots + 2} distinct class sizes, have {distinct_x}",
        }
    if flow_codes is None:
        # default: the four codes the model most often predicts incorrectly
        model = _model_codes(records)
        truth = resolve_truth(records)
        into: Counter[str] = Counter()
        for image_id, code in truth.items():
            predicted = model.get(image_id)
            if predicted is not None and predicted != code:
                into[predicted] += 1
        flow_codes = [
            c for c, _ in sorted(into.items(), key=lambda kv: (-kv[1], kv[0]))[:4]
        ]
    report["confusion_flows"] = [
        {
            "predicted": flow.predicted,
            "sources": [{"true_code": c, "count": n} for c, n in flow.sources],
        }
        for flow in (confusion_into(records, code) for code in flow_codes)
    ]
    return report
