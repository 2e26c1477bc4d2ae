"""Retrieval effectiveness metrics over review orderings and rankings.

All effectiveness numbers are computed against a gold standard; assessor
labels recorded during a run never enter these functions. Review effort k
means the first k documents of an ordering. When k exceeds the ordering's
length the ordering is simply exhausted, so the value at its terminal
effort applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import AbstractSet, Mapping, Sequence


class _IndeterminateType:
    """Marker for an F1 with no positives anywhere (tp=fp=fn=0)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INDETERMINATE"

    def __bool__(self) -> bool:
        raise TypeError("INDETERMINATE has no truth value; test identity instead")


INDETERMINATE = _IndeterminateType()


class RecallNotAchievedError(ValueError):
    """The ordering never reaches the recall target within its length."""

    def __init__(self, target: float, terminal_recall: float, length: int):
        super().__init__(
            f"recall target {target:g} not achieved; "
            f"terminal recall {terminal_recall:.6f} after {length} reviews"
        )
        self.target = target
        self.terminal_recall = terminal_recall
        self.length = length


def _check_relevant(relevant: AbstractSet[str]) -> None:
    if not relevant:
        raise ValueError("gold standard has no relevant documents")


def recall_at(ordering: Sequence[str], k: int, relevant: AbstractSet[str]) -> float:
    """Fraction of all relevant documents found in the first k reviews."""
    _check_relevant(relevant)
    if k < 0:
        raise ValueError("k must be >= 0")
    found = sum(1 for d in ordering[:k] if d in relevant)
    return found / len(relevant)


def relative_precision(
    ordering: Sequence[str], k: int, relevant: AbstractSet[str]
) -> float:
    """Relevant found in first k reviews over min(k, total relevant)."""
    _check_relevant(relevant)
    if k <= 0:
        raise ValueError("k must be >= 1")
    k_eff = min(k, len(ordering))
    if k_eff == 0:
        return 0.0
    found = sum(1 for d in ordering[:k_eff] if d in relevant)
    return found / min(k, len(relevant))


@dataclass(frozen=True)
class GainCurve:
    points: tuple[tuple[int, float], ...]
    n_relevant: int
    n_reviewed: int

    def recall_at_effort(self, k: int) -> float:
        k = min(k, self.n_reviewed)
        return self.points[k][1]

    def first_effort_at(self, target: float) -> int | None:
        """Smallest effort whose recall meets the target, None if never."""
        needed = math.ceil(target * self.n_relevant - 1e-9)
        if needed <= 0:
            return 0
        for k, recall in self.points:
            # recall * n_relevant is the found count up to rounding noise.
            if int(round(recall * self.n_relevant)) >= needed:
                return k
        return None


def gain_curve(ordering: Sequence[str], relevant: AbstractSet[str]) -> GainCurve:
    """Recall as a function of review effort, one point per review."""
    _check_relevant(relevant)
    total = len(relevant)
    points = [(0, 0.0)]
    found = 0
    for k, doc in enumerate(ordering, start=1):
        if doc in relevant:
            found += 1
        points.append((k, found / total))
    return GainCurve(tuple(points), total, len(ordering))


def recall_effort(
    ordering: Sequence[str], relevant: AbstractSet[str], target: float
) -> int:
    """Smallest effort whose recall meets the target."""
    _check_relevant(relevant)
    if not 0.0 < target <= 1.0:
        raise ValueError("target must be in (0, 1]")
    needed = math.ceil(target * len(relevant) - 1e-9)
    found = 0
    for k, doc in enumerate(ordering, start=1):
        if doc in relevant:
            found += 1
            if found >= needed:
                return k
    raise RecallNotAchievedError(
        target, found / len(relevant), len(ordering)
    )


def f1_score(tp: int, fp: int, fn: int):
    """F1 from counts; INDETERMINATE when tp, fp, and fn are all zero."""
    for name, v in (("tp", tp), ("fp", fp), ("fn", fn)):
        if v < 0:
            raise ValueError(f"{name} must be >= 0")
    denom = 2 * tp + fp + fn
    if denom == 0:
        return INDETERMINATE
    return 2.0 * tp / denom


@dataclass(frozen=True)
class MacroF1:
    value: float
    n_classes: int
    n_excluded: int


def macro_f1(counts: Sequence[tuple[int, int, int]]) -> MacroF1:
    """Mean per-class F1, excluding and counting INDETERMINATE classes."""
    scores = []
    excluded = 0
    for tp, fp, fn in counts:
        f1 = f1_score(tp, fp, fn)
        if f1 is INDETERMINATE:
            excluded += 1
        else:
            scores.append(f1)
    if not scores:
        raise ValueError("every class is INDETERMINATE")
    return MacroF1(sum(scores) / len(scores), len(counts), excluded)


def average_precision(
    ranking: Sequence[str], relevant: AbstractSet[str]
) -> float:
    """Mean over relevant documents of precision at their rank.

    Relevant documents absent from the ranking contribute zero.
    """
    _check_relevant(relevant)
    seen = set()
    found = 0
    acc = 0.0
    for k, doc in enumerate(ranking, start=1):
        if doc in seen:
            raise ValueError(f"duplicate document in ranking: {doc!r}")
        seen.add(doc)
        if doc in relevant:
            found += 1
            acc += found / k
    return acc / len(relevant)


def mean_average_precision(
    rankings: Mapping[str, Sequence[str]],
    relevant_by_topic: Mapping[str, AbstractSet[str]],
) -> float:
    if not rankings:
        raise ValueError("no topics")
    total = 0.0
    for topic in rankings:
        total += average_precision(rankings[topic], relevant_by_topic[topic])
    return total / len(rankings)


def _count_inversions(seq: list[int]) -> int:
    n = len(seq)
    if n < 2:
        return 0
    mid = n // 2
    left, right = seq[:mid], seq[mid:]
    inv = _count_inversions(left) + _count_inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            inv += len(left) - i
            merged.append(right[j])
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    seq[:] = merged
    return inv


def kendall_tau(a: Sequence, b: Sequence) -> float:
    """Pair-count correlation between two orderings of the same items.

    tau = (concordant - discordant) / (n choose 2), with both orderings
    strict (no ties representable).
    """
    if len(a) != len(b):
        raise ValueError("orderings must have equal length")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two items")
    if len(set(a)) != n or set(a) != set(b):
        raise ValueError("orderings must be permutations of the same items")
    pos_b = {item: i for i, item in enumerate(b)}
    seq = [pos_b[item] for item in a]
    discordant = _count_inversions(seq)
    pairs = n * (n - 1) // 2
    return 1.0 - 2.0 * discordant / pairs


@dataclass(frozen=True)
class DifferentialPoint:
    effort: int
    baseline_recall: float
    subject_recall: float

    @property
    def delta(self) -> float:
        return self.subject_recall - self.baseline_recall


def differential_points(
    baseline: Sequence[str],
    subject: Sequence[str],
    relevant: AbstractSet[str],
    efforts: Sequence[int],
) -> list[DifferentialPoint]:
    """Paired recall of two orderings at the given integer efforts.

    Efforts are exact review counts, so no interpolation is involved; an
    ordering shorter than an effort contributes its terminal recall.
    """
    _check_relevant(relevant)
    if not efforts:
        raise ValueError("efforts grid is empty")
    if sorted(efforts) != list(efforts):
        raise ValueError("efforts grid must be sorted ascending")
    base_curve = gain_curve(baseline, relevant)
    subj_curve = gain_curve(subject, relevant)
    out = []
    for k in efforts:
        if k < 0:
            raise ValueError("efforts must be >= 0")
        out.append(
            DifferentialPoint(
                k, base_curve.recall_at_effort(k), subj_curve.recall_at_effort(k)
            )
        )
    return out


def default_effort_grid(n_collection: int, *curves: GainCurve) -> list[int]:
    """Efforts at multiples of n/1000 plus each curve's decile crossings.

    The step is max(1, n_collection // 1000). The grid runs to the longest
    curve (to the collection size when no curves are given) and always
    contains that terminal effort, so comparisons keep their endpoints.
    """
    if n_collection < 1:
        raise ValueError("n_collection must be >= 1")
    step = max(1, n_collection // 1000)
    cap = max((c.n_reviewed for c in curves), default=n_collection)
    cap = max(cap, 1)
    grid = set(range(step, cap + 1, step))
    grid.add(cap)
    for curve in curves:
        for decile in range(1, 10):
            k = curve.first_effort_at(decile / 10)
            if k:
                grid.add(k)
    return sorted(grid)


@dataclass(frozen=True)
class SignTestSummary:
    wins: int
    losses: int
    ties: int
    p_value: float


def sign_test(deltas: Sequence[float]) -> SignTestSummary:
    """Two-sided exact binomial sign test on paired differences."""
    wins = sum(1 for d in deltas if d > 0)
    losses = sum(1 for d in deltas if d < 0)
    ties = len(deltas) - wins - losses
    n = wins + losses
    if n == 0:
        return SignTestSummary(wins, losses, ties, 1.0)
    k = max(wins, losses)
    # Two-sided tail probability under Binomial(n, 1/2).
    tail = sum(math.comb(n, i) for i in range(k, n + 1)) / 2.0**n
    return SignTestSummary(wins, losses, ties, min(1.0, 2.0 * tail))


@dataclass(frozen=True)
class RankCorrelation:
    tau: float
    tied: bool
    ranking_a: tuple[str, ...]
    ranking_b: tuple[str, ...]
    map_a: Mapping[str, float]
    map_b: Mapping[str, float]


def qrels_rank_correlation(
    relevant_a: Mapping[str, AbstractSet[str]],
    relevant_b: Mapping[str, AbstractSet[str]],
    runs: Mapping[str, Mapping[str, Sequence[str]]],
) -> RankCorrelation:
    """Correlation of system orderings induced by two gold standards.

    Systems are ranked by MAP under each standard; ties in MAP are broken
    by system id and reported through the tied flag because they make the
    induced ordering partly arbitrary.
    """
    if len(runs) < 2:
        raise ValueError("need at least two systems to rank")
    topics = sorted(set(relevant_a) & set(relevant_b))
    if not topics:
        raise ValueError("the two gold standards share no topics")
    for system, per_topic in runs.items():
        missing = [t for t in topics if t not in per_topic]
        if missing:
            raise ValueError(f"system {system!r} lacks topics: {missing}")
    map_a = {}
    map_b = {}
    for system, per_topic in runs.items():
        map_a[system] = sum(
            average_precision(per_topic[t], relevant_a[t]) for t in topics
        ) / len(topics)
        map_b[system] = sum(
            average_precision(per_topic[t], relevant_b[t]) for t in topics
        ) / len(topics)
    ranking_a = tuple(sorted(runs, key=lambda s: (-map_a[s], s)))
    ranking_b = tuple(sorted(runs, key=lambda s: (-map_b[s], s)))
    tied = len(set(map_a.values())) < len(map_a) or len(set(map_b.values())) < len(
        map_b
    )
    tau = kendall_tau(ranking_a, ranking_b)
    return RankCorrelation(tau, tied, ranking_a, ranking_b, map_a, map_b)
