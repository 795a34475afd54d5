"""
Checking trees against pairwise counts and against a reference tree.

A rooted tree that groups A with B to the exclusion of C predicts that A is
closer to B than to C, and that B is closer to A than to C.  Each such claim
is tested against the shared-cognate counts.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

from .dataio import SimilarityMatrix
from .trees import PhyloTree, TaxonMismatchError, clades_of, rf_distance, splits_of

__all__ = [
    "Prediction",
    "PredictionReport",
    "closeness_predictions",
    "TreeComparison",
    "compare_trees_report",
]


@dataclass(frozen=True)
class Prediction:
    """``focus`` should share more with ``closer`` than with ``farther``."""

    focus: str
    closer: str
    farther: str
    s_closer: float
    s_farther: float

    @property
    def triple(self) -> tuple:
        return (self.focus, self.closer, self.farther)

    @property
    def claim(self) -> str:
        return f"{self.focus} closer to {self.closer} than to {self.farther}"

    @property
    def verdict(self) -> str:
        if self.s_closer > self.s_farther:
            return "correct"
        if self.s_closer == self.s_farther:
            return "tie"
        return "failed"

    def record(self) -> str:
        return "\t".join(
            [
                self.focus,
                self.closer,
                self.farther,
                self.claim,
                _num(self.s_closer),
                _num(self.s_farther),
                self.verdict,
            ]
        )


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


@dataclass
class PredictionReport:
    """
    Outcome of a closeness audit.

    A tie does not contradict its claim, so with ``ties_count_as_correct``
    (the default) tied predictions are included in ``correct``; they are
    always listed in ``ties`` as well.
    """

    predictions: list = field(default_factory=list)
    ties_count_as_correct: bool = True

    @property
    def total(self) -> int:
        return len(self.predictions)

    @property
    def correct(self) -> int:
        ok = ("correct", "tie") if self.ties_count_as_correct else ("correct",)
        return sum(p.verdict in ok for p in self.predictions)

    @property
    def failures(self) -> list:
        return [p for p in self.predictions if p.verdict == "failed"]

    @property
    def ties(self) -> list:
        return [p for p in self.predictions if p.verdict == "tie"]

    def summary(self) -> str:
        line = f"{self.total} predictions, {self.correct} correct, {len(self.failures)} failed"
        if self.ties and not self.ties_count_as_correct:
            line += f", {len(self.ties)} tied"
        return line

    def to_text(self) -> str:
        lines = [self.summary()]
        for p in self.failures:
            lines.append(f"  FAILED: {p.claim} ({_num(p.s_closer)} vs {_num(p.s_farther)})")
        for p in self.ties:
            counted = " (counted as correct)" if self.ties_count_as_correct else ""
            lines.append(f"  TIE{counted}: {p.claim} ({_num(p.s_closer)} vs {_num(p.s_farther)})")
        return "\n".join(lines) + "\n"

    def records(self) -> list:
        return [p.record() for p in self.predictions]


def closeness_predictions(tree: PhyloTree, s: SimilarityMatrix, ties_count_as_correct: bool = True) -> PredictionReport:
    """
    Audit every triple the rooted ``tree`` resolves against the counts in
    ``s``.  Unresolved triples (under a multifurcation) are skipped.
    """
    if set(tree.taxa) != set(s.taxa):
        raise TaxonMismatchError("tree and matrix have different taxa")
    clades = sorted(clades_of(tree, trivial=True), key=len)
    report = PredictionReport(ties_count_as_correct=ties_count_as_correct)
    for trio in itertools.combinations(sorted(tree.taxa), 3):
        trio_set = set(trio)
        pair = None
        for c in clades:
            inside = trio_set & c
            if len(inside) == 2:
                pair = tuple(sorted(inside))
                break
            if len(inside) == 3:
                break
        if pair is None:
            continue
        a, b = pair
        (c,) = trio_set - set(pair)
        report.predictions.append(Prediction(a, b, c, s(a, b), s(a, c)))
        report.predictions.append(Prediction(b, a, c, s(a, b), s(b, c)))
    return report


@dataclass
class TreeComparison:
    rf_rooted: int
    rf_unrooted: int
    shared_clades: list
    candidate_only_clades: list
    reference_only_clades: list
    shared_splits: list
    candidate_only_splits: list
    reference_only_splits: list

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        def fmt(groups):
            return "; ".join("{" + ",".join(g) + "}" for g in groups) or "-"

        return "\n".join(
            [
                f"RF (rooted)   : {self.rf_rooted}",
                f"RF (unrooted) : {self.rf_unrooted}",
                f"clades only in candidate : {fmt(self.candidate_only_clades)}",
                f"clades only in reference : {fmt(self.reference_only_clades)}",
                f"splits only in candidate : {fmt(self.candidate_only_splits)}",
                f"splits only in reference : {fmt(self.reference_only_splits)}",
            ]
        ) + "\n"

    def records(self) -> list:
        out = [f"rf_rooted\t{self.rf_rooted}", f"rf_unrooted\t{self.rf_unrooted}"]
        for tag, groups in [
            ("shared_clade", self.shared_clades),
            ("candidate_clade", self.candidate_only_clades),
            ("reference_clade", self.reference_only_clades),
            ("shared_split", self.shared_splits),
            ("candidate_split", self.candidate_only_splits),
            ("reference_split", self.reference_only_splits),
        ]:
            out.extend(f"{tag}\t{','.join(g)}" for g in groups)
        return out


def _ordered(groups) -> list:
    return sorted((sorted(g) for g in groups), key=lambda g: (len(g), g))


def compare_trees_report(candidate: PhyloTree, reference: PhyloTree) -> TreeComparison:
    """Rooted and unrooted RF distances plus the clades and splits that differ."""
    ca, cb = clades_of(candidate), clades_of(reference)
    sa, sb = splits_of(candidate), splits_of(reference)
    return TreeComparison(
        rf_rooted=rf_distance(candidate, reference, "rooted"),
        rf_unrooted=rf_distance(candidate, reference, "unrooted"),
        shared_clades=_ordered(ca & cb),
        candidate_only_clades=_ordered(ca - cb),
        reference_only_clades=_ordered(cb - ca),
        shared_splits=_ordered(sa & sb),
        candidate_only_splits=_ordered(sa - sb),
        reference_only_splits=_ordered(sb - sa),
    )
