"""Distance-based tree building: UPGMA and neighbour joining."""

from __future__ import annotations

import numpy as np

from .dataio import DistanceMatrix
from .trees import Node, PhyloTree

__all__ = ["upgma", "neighbor_joining"]

# Relative slack for treating two criterion values as tied.
_TIE_EPS = 1e-12


def _pick(candidates):
    """Smallest score; near-ties resolved by the (sorted) name-pair key."""
    best = min(score for score, _, _ in candidates)
    tol = _TIE_EPS * max(1.0, abs(best))
    tied = [(key, payload) for score, key, payload in candidates if score <= best + tol]
    return min(tied, key=lambda kp: kp[0])[1]


def upgma(d: DistanceMatrix) -> PhyloTree:
    """
    UPGMA clustering.

    Clusters are merged closest-first using the unweighted mean of all
    cross-pair distances; a merge sits at height ``distance / 2`` and each
    branch length is parent height minus child height.  Ties go to the pair
    whose smallest taxon names sort first.
    """
    n = len(d.taxa)
    if n < 2:
        raise ValueError("UPGMA needs at least two taxa")
    # cluster id -> (node, height, size, smallest taxon)
    clusters = {i: (Node(name=t), 0.0, 1, t) for i, t in enumerate(d.taxa)}
    dist = {(i, j): float(d.values[i, j]) for i in range(n) for j in range(i + 1, n)}
    next_id = n
    while len(clusters) > 1:
        candidates = []
        for (i, j), dij in dist.items():
            key = tuple(sorted((clusters[i][3], clusters[j][3])))
            candidates.append((dij, key, (i, j)))
        i, j = _pick(candidates)
        ni, hi, si, mi = clusters.pop(i)
        nj, hj, sj, mj = clusters.pop(j)
        h = dist[(i, j)] / 2.0
        ni.length = h - hi
        nj.length = h - hj
        merged = Node(children=[ni, nj])
        new = {}
        for k in clusters:
            dik = dist[(min(i, k), max(i, k))]
            djk = dist[(min(j, k), max(j, k))]
            new[(k, next_id)] = (si * dik + sj * djk) / (si + sj)
        dist = {p: v for p, v in dist.items() if i not in p and j not in p}
        dist.update(new)
        clusters[next_id] = (merged, h, si + sj, min(mi, mj))
        next_id += 1
    (root, _, _, _), = clusters.values()
    return PhyloTree(root, rooted=True)


def neighbor_joining(d: DistanceMatrix) -> PhyloTree:
    """
    Saitou-Nei neighbour joining.

    Returns an unrooted tree whose top node joins the last three clusters.
    Negative branch lengths are kept as computed.
    """
    n = len(d.taxa)
    if n < 3:
        raise ValueError("neighbour joining needs at least three taxa")
    nodes = [Node(name=t) for t in d.taxa]
    keys = list(d.taxa)
    D = np.array(d.values, dtype=float)
    while len(nodes) > 3:
        r = len(nodes)
        R = D.sum(axis=1)
        candidates = []
        for i in range(r):
            for j in range(i + 1, r):
                q = (r - 2) * D[i, j] - R[i] - R[j]
                candidates.append((q, tuple(sorted((keys[i], keys[j]))), (i, j)))
        i, j = _pick(candidates)
        li = D[i, j] / 2.0 + (R[i] - R[j]) / (2.0 * (r - 2))
        lj = D[i, j] - li
        nodes[i].length = li
        nodes[j].length = lj
        u = Node(children=[nodes[i], nodes[j]])
        du = (D[i] + D[j] - D[i, j]) / 2.0
        keep = [k for k in range(r) if k not in (i, j)]
        newD = np.zeros((r - 1, r - 1))
        newD[: r - 2, : r - 2] = D[np.ix_(keep, keep)]
        newD[r - 2, : r - 2] = du[keep]
        newD[: r - 2, r - 2] = du[keep]
        u_key = min(keys[i], keys[j])
        nodes = [nodes[k] for k in keep] + [u]
        keys = [keys[k] for k in keep] + [u_key]
        D = newD
    a, b, c = nodes
    a.length = (D[0, 1] + D[0, 2] - D[1, 2]) / 2.0
    b.length = (D[0, 1] + D[1, 2] - D[0, 2]) / 2.0
    c.length = (D[0, 2] + D[1, 2] - D[0, 1]) / 2.0
    return PhyloTree(Node(children=[a, b, c]), rooted=False)
