"""
Parsimony scoring of binary characters on trees, and exhaustive search.

Every scorer works on all characters at once: leaf state sets are held as a
pair of boolean arrays (state 0 allowed, state 1 allowed) and the tree is
walked once in postorder.
"""

from __future__ import annotations

import enum
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataio import CharacterMatrix
from .trees import (
    MAX_ENUMERATION_TAXA,
    PhyloTree,
    TaxonMismatchError,
    _shape_to_node,
    enumerate_shapes,
    parse_newick,
    tree_count,
    unroot,
    write_newick,
)

__all__ = [
    "ParsimonyKind",
    "SearchResult",
    "wagner_score",
    "camin_sokal_score",
    "dollo_score",
    "compatibility_score",
    "krishnamurti_score",
    "character_scores",
    "score_tree",
    "exhaustive_search",
    "max_compatibility_search",
    "rank_trees",
    "default_workers",
]

_INF = 1 << 30


class ParsimonyKind(enum.Enum):
    WAGNER = "wagner"
    CAMIN_SOKAL = "camin-sokal"
    DOLLO = "dollo"
    COMPATIBILITY = "compat"

    @classmethod
    def parse(cls, value) -> "ParsimonyKind":
        if isinstance(value, cls):
            return value
        value = str(value).lower().replace("_", "-")
        aliases = {"compatibility": "compat", "caminsokal": "camin-sokal", "krishnamurti": "camin-sokal"}
        return cls(aliases.get(value, value))

    @property
    def maximize(self) -> bool:
        return self is ParsimonyKind.COMPATIBILITY


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("LINGPHYLO_THREADS", "1")))
    except ValueError:
        return 1


class _Encoded:
    """Leaf state sets of a binary matrix as boolean arrays."""

    def __init__(self, m: CharacterMatrix):
        if not m.is_binary():
            raise ValueError("parsimony scoring needs a binary character matrix")
        self.taxa = m.taxa
        self.index = {t: i for i, t in enumerate(m.taxa)}
        shape = (m.n_taxa, m.n_characters)
        self.allow0 = np.zeros(shape, dtype=bool)
        self.allow1 = np.zeros(shape, dtype=bool)
        self.poly = np.zeros(shape, dtype=bool)
        for i, row in enumerate(m.cells):
            for j, cell in enumerate(row):
                if cell is None:
                    self.allow0[i, j] = self.allow1[i, j] = True
                else:
                    self.allow0[i, j] = 0 in cell
                    self.allow1[i, j] = 1 in cell
                    self.poly[i, j] = len(cell) > 1

    def check(self, tree: PhyloTree, rooted: bool = False) -> None:
        if set(tree.taxa) != set(self.taxa):
            raise TaxonMismatchError("tree leaves do not match matrix taxa")
        if rooted:
            if not tree.rooted:
                raise ValueError("this parsimony needs a rooted tree")
            if self.poly.any():
                raise ValueError("polymorphic cells are not supported by irreversible parsimonies")


_ENCODED_CACHE: dict = {}


def _encode(m: CharacterMatrix) -> _Encoded:
    enc = _ENCODED_CACHE.get(id(m))
    if enc is None or enc[0] is not m:
        enc = (m, _Encoded(m))
        if len(_ENCODED_CACHE) > 32:
            _ENCODED_CACHE.clear()
        _ENCODED_CACHE[id(m)] = enc
    return enc[1]


# ---------------------------------------------------------------------------
# Per-character scorers
# ---------------------------------------------------------------------------


def _wagner(tree: PhyloTree, enc: _Encoded) -> np.ndarray:
    sets = {}
    cost = np.zeros(enc.allow0.shape[1], dtype=np.int64)
    for node in tree.root.postorder():
        if not node.children:
            i = enc.index[node.name]
            sets[id(node)] = (enc.allow0[i], enc.allow1[i])
            continue
        c0 = sum(sets[id(c)][0].astype(np.int64) for c in node.children)
        c1 = sum(sets[id(c)][1].astype(np.int64) for c in node.children)
        best = np.maximum(c0, c1)
        cost += len(node.children) - best
        sets[id(node)] = (c0 == best, c1 == best)
    return cost


def _camin_sokal(tree: PhyloTree, enc: _Encoded) -> np.ndarray:
    # cost0/cost1: fewest gains below a node labelled 0/1; ancestor above root is 0.
    dp = {}
    for node in tree.root.postorder():
        if not node.children:
            i = enc.index[node.name]
            dp[id(node)] = (np.where(enc.allow0[i], 0, _INF), np.where(enc.allow1[i], 0, _INF))
            continue
        c0 = sum(np.minimum(dp[id(c)][0], dp[id(c)][1] + 1) for c in node.children)
        c1 = np.minimum(sum(dp[id(c)][1] for c in node.children), _INF)
        dp[id(node)] = (c0, c1)
    c0, c1 = dp[id(tree.root)]
    return np.minimum(c0, c1 + 1).astype(np.int64)


def _dollo(tree: PhyloTree, enc: _Encoded) -> np.ndarray:
    sure1 = enc.allow1 & ~enc.allow0
    total = sure1.sum(axis=0)
    n_chars = total.shape[0]
    score = np.zeros(n_chars, dtype=np.int64)
    done = total == 0
    dp = {}
    for node in tree.root.postorder():
        if not node.children:
            i = enc.index[node.name]
            count = sure1[i].astype(np.int64)
            loss1 = np.where(enc.allow1[i], 0, _INF)
            zero_ok = np.where(enc.allow0[i], 0, _INF)
        else:
            kids = [dp[id(c)] for c in node.children]
            count = sum(k[0] for k in kids)
            loss1 = sum(np.minimum(k[1], k[2] + 1) for k in kids)
            zero_ok = np.minimum(sum(k[2] for k in kids), _INF)
        dp[id(node)] = (count, loss1, zero_ok)
        hit = ~done & (count == total)
        score = np.where(hit, 1 + loss1, score)
        done |= hit
    return score


def character_scores(kind, tree: PhyloTree, m: CharacterMatrix) -> np.ndarray:
    """Per-character scores (changes, or 1/0 compatibility flags)."""
    kind = ParsimonyKind.parse(kind)
    enc = _encode(m)
    if kind is ParsimonyKind.WAGNER:
        enc.check(tree)
        return _wagner(tree, enc)
    if kind is ParsimonyKind.COMPATIBILITY:
        enc.check(tree)
        return (_wagner(tree, enc) <= 1).astype(np.int64)
    enc.check(tree, rooted=True)
    if kind is ParsimonyKind.CAMIN_SOKAL:
        return _camin_sokal(tree, enc)
    return _dollo(tree, enc)


def score_tree(kind, tree: PhyloTree, m: CharacterMatrix) -> int:
    return int(character_scores(kind, tree, m).sum())


def wagner_score(tree: PhyloTree, m: CharacterMatrix) -> int:
    """Fitch minimum number of reversible changes; ``?`` is a wildcard."""
    return score_tree(ParsimonyKind.WAGNER, tree, m)


def camin_sokal_score(tree: PhyloTree, m: CharacterMatrix) -> int:
    """Minimum number of irreversible 0->1 changes from an all-0 ancestor."""
    return score_tree(ParsimonyKind.CAMIN_SOKAL, tree, m)


def dollo_score(tree: PhyloTree, m: CharacterMatrix) -> int:
    """
    One gain at the common ancestor of the 1-leaves plus the fewest losses
    below it; all-0 characters cost nothing.
    """
    return score_tree(ParsimonyKind.DOLLO, tree, m)


def compatibility_score(tree: PhyloTree, m: CharacterMatrix) -> int:
    """Number of characters that fit the tree with at most one change."""
    return score_tree(ParsimonyKind.COMPATIBILITY, tree, m)


def krishnamurti_score(tree: PhyloTree, m: CharacterMatrix) -> int:
    """Krishnamurti's change count; currently identical to Camin-Sokal."""
    return camin_sokal_score(tree, m)


# ---------------------------------------------------------------------------
# Exhaustive search
# ---------------------------------------------------------------------------


@dataclass
class SearchResult:
    kind: ParsimonyKind
    best_score: int
    optimal_trees: list
    optimal_unrooted: list
    n_trees: int
    per_character: dict = field(default_factory=dict)
    table: Optional[list] = None

    def __post_init__(self):
        if not self.optimal_trees:
            raise ValueError("a search result needs at least one optimal tree")


def _score_range(kind: ParsimonyKind, m: CharacterMatrix, taxa, start: int, stop: int):
    enc = _encode(m)
    scorer = {
        ParsimonyKind.WAGNER: _wagner,
        ParsimonyKind.CAMIN_SOKAL: _camin_sokal,
        ParsimonyKind.DOLLO: _dollo,
        ParsimonyKind.COMPATIBILITY: lambda t, e: (_wagner(t, e) <= 1).astype(np.int64),
    }[kind]
    out = []
    for shape in itertools.islice(enumerate_shapes(taxa), start, stop):
        tree = PhyloTree(_shape_to_node(shape), rooted=True)
        per = scorer(tree, enc)
        out.append((write_newick(tree), int(per.sum()), per))
    return out


def _score_all(kind: ParsimonyKind, m: CharacterMatrix, workers: int):
    taxa = list(m.taxa)
    total = tree_count(len(taxa))
    if workers <= 1 or total < 2000:
        return _score_range(kind, m, taxa, 0, total)
    step = -(-total // workers)
    bounds = [(a, min(a + step, total)) for a in range(0, total, step)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_score_range, *zip(*[(kind, m, taxa, a, b) for a, b in bounds]))
        return [row for part in parts for row in part]


def _check_search_input(kind: ParsimonyKind, m: CharacterMatrix) -> None:
    if not 2 <= m.n_taxa <= MAX_ENUMERATION_TAXA:
        raise ValueError(f"exhaustive search supports 2..{MAX_ENUMERATION_TAXA} taxa, got {m.n_taxa}")
    enc = _encode(m)
    if kind in (ParsimonyKind.CAMIN_SOKAL, ParsimonyKind.DOLLO) and enc.poly.any():
        raise ValueError("exhaustive search needs a matrix without polymorphic cells")


def exhaustive_search(kind, m: CharacterMatrix, keep_table: bool = False, workers: Optional[int] = None) -> SearchResult:
    """
    Score every rooted binary topology and collect all optima.

    For Wagner and compatibility, which ignore the root, ``optimal_unrooted``
    lists the distinct unrooted optima; ``optimal_trees`` always lists every
    optimal rooted tree.  Results do not depend on ``workers``.
    """
    kind = ParsimonyKind.parse(kind)
    _check_search_input(kind, m)
    rows = _score_all(kind, m, workers if workers is not None else default_workers())
    scores = [s for _, s, _ in rows]
    best = max(scores) if kind.maximize else min(scores)
    optimal = sorted((nwk, per) for nwk, s, per in rows if s == best)
    optimal_trees = [nwk for nwk, _ in optimal]
    unrooted = sorted({write_newick(unroot(parse_newick(nwk, rooted=True))) for nwk in optimal_trees}) if m.n_taxa >= 3 else list(optimal_trees)
    table = sorted(((nwk, s) for nwk, s, _ in rows), key=lambda r: (-r[1] if kind.maximize else r[1], r[0])) if keep_table else None
    return SearchResult(
        kind=kind,
        best_score=best,
        optimal_trees=optimal_trees,
        optimal_unrooted=unrooted,
        n_trees=len(rows),
        per_character={nwk: [int(x) for x in per] for nwk, per in optimal},
        table=table,
    )


def max_compatibility_search(m: CharacterMatrix, **kw) -> SearchResult:
    """Trees on which the largest number of characters are compatible."""
    return exhaustive_search(ParsimonyKind.COMPATIBILITY, m, **kw)


def rank_trees(kind, m: CharacterMatrix, top_k: Optional[int] = None, workers: Optional[int] = None) -> list:
    """
    All rooted topologies ordered best-first as ``(newick, score)`` pairs.

    Ties keep canonical Newick order.
    """
    result = exhaustive_search(kind, m, keep_table=True, workers=workers)
    return result.table if top_k is None else result.table[:top_k]
