"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pytest

from lingphylo.dataio import CharacterMatrix, DistanceMatrix
from lingphylo.trees import Node, PhyloTree

DATA = Path(__file__).parent / "data"


def random_binary_tree(rng: np.random.Generator, taxa, lengths=(0.05, 2.0)) -> PhyloTree:
    """Rooted binary tree made by joining random pairs of subtrees."""
    pool = [Node(name=t) for t in taxa]
    while len(pool) > 1:
        i, j = sorted(rng.choice(len(pool), size=2, replace=False))
        b, a = pool.pop(j), pool.pop(i)
        if lengths is not None:
            a.length = float(rng.uniform(*lengths))
            b.length = float(rng.uniform(*lengths))
        pool.append(Node(children=[a, b]))
    return PhyloTree(pool[0], rooted=True)


def path_distances(tree: PhyloTree) -> DistanceMatrix:
    """Leaf-to-leaf path lengths, via root depths and the deepest shared ancestor."""
    depth = {}
    ancestors = {}

    def walk(node, d, chain):
        depth[id(node)] = d
        chain = chain + [node]
        if not node.children:
            ancestors[node.name] = chain
        for c in node.children:
            walk(c, d + (c.length or 0.0), chain)

    walk(tree.root, 0.0, [])
    taxa = tree.taxa
    n = len(taxa)
    d = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        a, b = ancestors[taxa[i]], ancestors[taxa[j]]
        k = 0
        while k < min(len(a), len(b)) and a[k] is b[k]:
            k += 1
        lca = a[k - 1]
        d[i, j] = d[j, i] = depth[id(a[-1])] + depth[id(b[-1])] - 2 * depth[id(lca)]
    return DistanceMatrix(taxa, d)


# ---------------------------------------------------------------------------
# Brute-force parsimony: minimise over every 0/1 labelling of internal nodes.
# ---------------------------------------------------------------------------


def _edges(tree: PhyloTree):
    out = []
    for node in tree.root.preorder():
        for c in node.children:
            out.append((node, c))
    return out


def brute_force_score(kind: str, tree: PhyloTree, column: dict) -> int:
    """
    Minimum number of changes for one binary column, by enumeration.

    ``column`` maps taxon -> 0, 1 or None (missing).  Wagner allows any
    labelling.  Camin-Sokal and Dollo start from state 0 above the root;
    Camin-Sokal forbids 1->0 and Dollo allows at most one 0->1 edge.
    Compatibility is 1 when the Wagner minimum is at most one change.
    """
    internal = [n for n in tree.root.preorder() if n.children]
    leaves = [n for n in tree.root.preorder() if not n.children]
    missing = [n for n in leaves if column[n.name] is None]
    edges = _edges(tree)
    best = None
    for lab in itertools.product((0, 1), repeat=len(internal) + len(missing)):
        state = {id(n): s for n, s in zip(internal + missing, lab)}
        for n in leaves:
            if column[n.name] is not None:
                state[id(n)] = column[n.name]
        changes = [(state[id(p)], state[id(c)]) for p, c in edges]
        if kind in ("camin-sokal", "dollo"):
            changes.append((0, state[id(tree.root)]))
        gains = sum(1 for a, b in changes if (a, b) == (0, 1))
        losses = sum(1 for a, b in changes if (a, b) == (1, 0))
        if kind == "camin-sokal" and losses:
            continue
        if kind == "dollo" and gains > 1:
            continue
        cost = gains + losses
        best = cost if best is None else min(best, cost)
    if kind == "compat":
        return int(brute_force_score("wagner", tree, column) <= 1)
    return best


def column_matrix(taxa, column: dict) -> CharacterMatrix:
    return CharacterMatrix.from_columns(tuple(taxa), [column])


@pytest.fixture
def innovations_path() -> Path:
    return DATA / "fig3_innovations.chars"
