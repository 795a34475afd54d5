"""
Tree representation, Newick I/O, splits and clades, Robinson-Foulds
comparison and exhaustive enumeration of rooted binary topologies.

A :class:`PhyloTree` is always stored with a designated top node.  For a
rooted tree that node is the root; for an unrooted tree it is an arbitrary
internal node (normally of degree >= 3) and the ``rooted`` flag is False.
Trees are treated as values: every operation returns a fresh tree and never
mutates its argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

__all__ = [
    "Node",
    "PhyloTree",
    "NewickError",
    "TaxonMismatchError",
    "parse_newick",
    "write_newick",
    "splits_of",
    "clades_of",
    "rf_distance",
    "unroot",
    "root_at_outgroup",
    "enumerate_rooted_trees",
    "tree_count",
    "render_ascii",
    "MAX_ENUMERATION_TAXA",
    "validate_taxon_name",
]

MAX_ENUMERATION_TAXA = 9
_FORBIDDEN = set("(),:;[]")


class NewickError(ValueError):
    """Malformed Newick text.  ``position`` is the 0-based offset, if known."""

    def __init__(self, message: str, position: Optional[int] = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class TaxonMismatchError(ValueError):
    """Two objects that must share a taxon set do not."""


def validate_taxon_name(name: str) -> str:
    if not name:
        raise ValueError("taxon names must be non-empty")
    bad = [c for c in name if c in _FORBIDDEN or c.isspace()]
    if bad:
        raise ValueError(f"taxon name {name!r} contains forbidden character {bad[0]!r}")
    return name


@dataclass
class Node:
    """One tree node.  ``length`` is the length of the edge to the parent."""

    name: Optional[str] = None
    length: Optional[float] = None
    children: list["Node"] = field(default_factory=list)
    support: Optional[float] = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def postorder(self) -> Iterator["Node"]:
        stack = [(self, False)]
        while stack:
            node, seen = stack.pop()
            if seen or not node.children:
                yield node
            else:
                stack.append((node, True))
                for child in reversed(node.children):
                    stack.append((child, False))

    def preorder(self) -> Iterator["Node"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> Iterator["Node"]:
        return (n for n in self.preorder() if not n.children)

    def leaf_names(self) -> frozenset:
        return frozenset(n.name for n in self.leaves())

    def copy(self) -> "Node":
        return Node(self.name, self.length, [c.copy() for c in self.children], self.support)


class PhyloTree:
    """
    Leaf-labelled tree with optional branch lengths.

    Parameters
    ----------
    root : Node
        Top node.  Ownership passes to the tree; callers must not mutate it
        afterwards.
    rooted : bool
        Whether the top node is a biological root.
    """

    def __init__(self, root: Node, rooted: bool = True):
        self.root = root
        self.rooted = rooted
        names = [leaf.name for leaf in root.leaves()]
        for name in names:
            if name is None:
                raise ValueError("every leaf needs a taxon label")
            validate_taxon_name(name)
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate leaf label(s): {', '.join(dup)}")
        for node in root.preorder():
            if node.length is not None and not math.isfinite(node.length):
                raise ValueError("branch lengths must be finite")
        self._taxa = tuple(sorted(names))

    @property
    def taxa(self) -> tuple:
        """Sorted tuple of leaf labels."""
        return self._taxa

    @property
    def n_taxa(self) -> int:
        return len(self._taxa)

    def nodes(self) -> list[Node]:
        return list(self.root.preorder())

    def internal_nodes(self) -> list[Node]:
        return [n for n in self.root.preorder() if n.children]

    def leaf(self, name: str) -> Node:
        for node in self.root.leaves():
            if node.name == name:
                return node
        raise KeyError(name)

    def parents(self) -> dict:
        """Map ``id(node) -> parent node``; the top node is absent."""
        out = {}
        for node in self.root.preorder():
            for child in node.children:
                out[id(child)] = node
        return out

    def has_lengths(self) -> bool:
        return any(n.length is not None for n in self.root.preorder() if n is not self.root)

    def has_negative_lengths(self) -> bool:
        return any(n.length is not None and n.length < 0 for n in self.root.preorder())

    def is_binary(self) -> bool:
        top = len(self.root.children)
        if self.rooted and top != 2 and self.n_taxa > 1:
            return False
        if not self.rooted and self.n_taxa >= 3 and top != 3:
            return False
        return all(len(n.children) == 2 for n in self.root.preorder() if n.children and n is not self.root)

    def copy(self) -> "PhyloTree":
        return PhyloTree(self.root.copy(), self.rooted)

    def newick(self, with_lengths: bool = True) -> str:
        return write_newick(self, with_lengths)

    def __repr__(self) -> str:
        kind = "rooted" if self.rooted else "unrooted"
        return f"PhyloTree({kind}, {write_newick(self)!r})"


# ---------------------------------------------------------------------------
# Newick
# ---------------------------------------------------------------------------


class _NewickParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        t = self.text
        while self.pos < len(t):
            if t[self.pos].isspace():
                self.pos += 1
            elif t[self.pos] == "[":
                end = t.find("]", self.pos)
                if end < 0:
                    raise NewickError("unterminated comment", self.pos)
                self.pos = end + 1
            else:
                break

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def label(self) -> str:
        self.skip_ws()
        t = self.text
        if self.pos < len(t) and t[self.pos] == "'":
            end = t.find("'", self.pos + 1)
            if end < 0:
                raise NewickError("unterminated quoted label", self.pos)
            out = t[self.pos + 1 : end]
            self.pos = end + 1
            return out
        start = self.pos
        while self.pos < len(t) and t[self.pos] not in "(),:;[" and not t[self.pos].isspace():
            self.pos += 1
        return t[start : self.pos]

    def number(self) -> float:
        self.skip_ws()
        start = self.pos
        raw = self.label()
        try:
            return float(raw)
        except ValueError:
            raise NewickError(f"invalid branch length {raw!r}", start) from None

    def subtree(self) -> Node:
        node = Node()
        if self.peek() == "(":
            self.pos += 1
            while True:
                node.children.append(self.subtree())
                c = self.peek()
                if c == ",":
                    self.pos += 1
                elif c == ")":
                    self.pos += 1
                    break
                else:
                    raise NewickError("expected ',' or ')'", self.pos)
        name = self.label()
        if name:
            if node.children:
                try:
                    node.support = float(name)
                except ValueError:
                    node.name = name
            else:
                node.name = name
        if self.peek() == ":":
            self.pos += 1
            node.length = self.number()
        if not node.children and not node.name:
            raise NewickError("leaf without a label", self.pos)
        return node


def parse_newick(text: str, rooted: Optional[bool] = None) -> PhyloTree:
    """
    Parse a Newick string.

    Parameters
    ----------
    text : str
        Newick text; the trailing ``;`` is optional and ``[...]`` comments
        are skipped.  ``[&U]`` / ``[&R]`` prefixes set rootedness.
    rooted : bool, optional
        Force rootedness.  By default a top node with two children is a root
        and a top node with three or more children denotes an unrooted tree.
    """
    if text is None or not text.strip():
        raise NewickError("empty Newick input")
    stripped = text.strip()
    upper = stripped[:4].upper()
    if rooted is None and upper.startswith("[&U]"):
        rooted = False
    elif rooted is None and upper.startswith("[&R]"):
        rooted = True
    parser = _NewickParser(stripped)
    root = parser.subtree()
    if parser.peek() == ";":
        parser.pos += 1
    if parser.peek():
        raise NewickError("unexpected trailing text", parser.pos)
    if rooted is None:
        rooted = len(root.children) <= 2
    try:
        return PhyloTree(root, rooted)
    except ValueError as exc:
        raise NewickError(str(exc)) from None


def _fmt_length(x: float) -> str:
    return repr(float(x))


def _canonical_top(tree: PhyloTree) -> Node:
    """For unrooted trees, re-hang at the neighbour of the smallest taxon."""
    if tree.rooted or tree.n_taxa < 3:
        return tree.root
    top = unroot(tree)
    smallest = top.taxa[0]
    adj, names, root_id = _to_graph(top)
    leaf_id = next(i for i, nm in names.items() if nm == smallest)
    anchor = adj[leaf_id][0][0]
    return _from_graph(adj, names, anchor)


def write_newick(tree: PhyloTree, with_lengths: bool = True, support: bool = False) -> str:
    """
    Canonical Newick text.

    Children are ordered by their smallest contained taxon name; unrooted
    trees are written from the internal node adjacent to the smallest taxon,
    so equal topologies give equal strings.
    """
    top = _canonical_top(tree)
    keys: dict = {}
    for node in top.postorder():
        keys[id(node)] = node.name if not node.children else min(keys[id(c)] for c in node.children)

    def rec(node: Node) -> str:
        if node.children:
            kids = sorted(node.children, key=lambda c: keys[id(c)])
            s = "(" + ",".join(rec(c) for c in kids) + ")"
            if support and node.support is not None:
                s += f"{node.support:.2f}"
        else:
            s = node.name
        if with_lengths and node.length is not None and node is not top:
            s += ":" + _fmt_length(node.length)
        return s

    return rec(top) + ";"


# ---------------------------------------------------------------------------
# Graph helpers (unrooted view)
# ---------------------------------------------------------------------------


def _to_graph(tree: PhyloTree):
    """
    Undirected adjacency ``{id: [(nbr, length, support), ...]}`` plus leaf
    names.  Support describes the split an edge induces, so it lives on edges.
    """
    ids: dict = {}
    names: dict = {}
    adj: dict = {}
    for node in tree.root.preorder():
        i = ids.setdefault(id(node), len(ids))
        adj.setdefault(i, [])
        if not node.children:
            names[i] = node.name
        for child in node.children:
            j = ids.setdefault(id(child), len(ids))
            adj.setdefault(j, [])
            adj[i].append((j, child.length, child.support))
            adj[j].append((i, child.length, child.support))
    return adj, names, ids[id(tree.root)]


def _from_graph(adj: dict, names: dict, top: int) -> Node:
    def build(i: int, parent: Optional[int], length: Optional[float], support: Optional[float]) -> Node:
        node = Node(name=names.get(i), length=length, support=support if i not in names else None)
        for j, ln, sup in adj[i]:
            if j != parent:
                node.children.append(build(j, i, ln, sup))
        return node

    return build(top, None, None, None)


def _add_lengths(a: Optional[float], b: Optional[float]) -> Optional[float]:
    if a is None and b is None:
        return None
    return (a or 0.0) + (b or 0.0)


def unroot(tree: PhyloTree) -> PhyloTree:
    """
    Unrooted copy: a degree-2 top node is suppressed and its two edges merged.
    """
    root = tree.root.copy()
    if len(root.children) == 2 and tree.n_taxa >= 3:
        a, b = root.children
        inner, other = (a, b) if a.children else (b, a)
        other.length = _add_lengths(a.length, b.length)
        if other.children and other.support is None:
            other.support = inner.support
        inner.length = None
        inner.support = None
        inner.children.append(other)
        root = inner
    root.length = None
    return PhyloTree(root, rooted=False)


def root_at_outgroup(tree: PhyloTree, outgroup: str) -> PhyloTree:
    """
    Root the tree on the pendant edge of ``outgroup``.

    The pendant length is split evenly over the two root edges.  A rooted
    tree whose root already has ``outgroup`` as a child is returned as is.
    """
    if outgroup not in tree.taxa:
        raise KeyError(f"outgroup {outgroup!r} not in tree")
    if tree.rooted and any(c.name == outgroup for c in tree.root.children):
        return tree.copy()
    if tree.n_taxa < 2:
        raise ValueError("rooting needs at least two taxa")
    base = unroot(tree)
    adj, names, _ = _to_graph(base)
    leaf_id = next(i for i, nm in names.items() if nm == outgroup)
    (anchor, length, _), = adj[leaf_id]
    half = None if length is None else length / 2.0
    rest = _from_graph(
        {k: [e for e in v if e[0] != leaf_id] for k, v in adj.items()}, names, anchor
    )
    rest.length = half
    root = Node(children=[Node(name=outgroup, length=half), rest])
    return PhyloTree(root, rooted=True)


# ---------------------------------------------------------------------------
# Splits and clades
# ---------------------------------------------------------------------------


def clades_of(tree: PhyloTree, trivial: bool = False) -> set:
    """
    Leaf sets below each non-top node, as frozensets.

    With ``trivial=False`` single leaves and the full taxon set are dropped.
    """
    n = tree.n_taxa
    out = set()
    below: dict = {}
    for node in tree.root.postorder():
        if node.children:
            s = frozenset().union(*(below[id(c)] for c in node.children))
        else:
            s = frozenset([node.name])
        below[id(node)] = s
        if node is tree.root:
            continue
        if trivial or 1 < len(s) < n:
            out.add(s)
    return out


def canonical_split(block, taxa) -> frozenset:
    """Return the side of the bipartition that excludes the smallest taxon."""
    block = frozenset(block)
    smallest = min(taxa)
    if smallest in block:
        return frozenset(taxa) - block
    return block


def splits_of(tree: PhyloTree, trivial: bool = False) -> set:
    """
    Bipartitions induced by the edges of the unrooted tree.

    Each split is the frozenset block that excludes the lexicographically
    smallest taxon.  Non-trivial splits only unless ``trivial=True``.
    """
    taxa = frozenset(tree.taxa)
    n = len(taxa)
    out = set()
    for clade in clades_of(tree, trivial=True):
        if len(clade) == n:
            continue
        split = canonical_split(clade, taxa)
        if trivial or 1 < len(split) < n - 1:
            out.add(split)
    return out


def rf_distance(a: PhyloTree, b: PhyloTree, mode: str = "unrooted") -> int:
    """Robinson-Foulds distance: symmetric difference of splits or clades."""
    if set(a.taxa) != set(b.taxa):
        raise TaxonMismatchError("trees have different taxon sets")
    if mode == "unrooted":
        return len(splits_of(a) ^ splits_of(b))
    if mode == "rooted":
        return len(clades_of(a) ^ clades_of(b))
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def tree_count(n: int) -> int:
    """Number of rooted binary leaf-labelled trees on ``n`` taxa."""
    if n < 2:
        raise ValueError("tree_count needs n >= 2")
    return math.factorial(2 * n - 3) // (2 ** (n - 2) * math.factorial(n - 2))


def _insertions(shape, leaf):
    yield (shape, leaf)
    if isinstance(shape, tuple):
        left, right = shape
        for x in _insertions(left, leaf):
            yield (x, right)
        for x in _insertions(right, leaf):
            yield (left, x)


def _enumerate_shapes(taxa: Sequence[str]):
    if len(taxa) == 2:
        yield (taxa[0], taxa[1])
        return
    for shape in _enumerate_shapes(taxa[:-1]):
        yield from _insertions(shape, taxa[-1])


def _shape_to_node(shape) -> Node:
    if isinstance(shape, tuple):
        return Node(children=[_shape_to_node(s) for s in shape])
    return Node(name=shape)


def enumerate_shapes(taxa: Sequence[str]):
    """Like :func:`enumerate_rooted_trees` but yields nested 2-tuples."""
    taxa = list(taxa)
    if not 2 <= len(taxa) <= MAX_ENUMERATION_TAXA:
        raise ValueError(f"enumeration supports 2..{MAX_ENUMERATION_TAXA} taxa, got {len(taxa)}")
    if len(set(taxa)) != len(taxa):
        raise ValueError("duplicate taxon names")
    for name in taxa:
        validate_taxon_name(name)
    return _enumerate_shapes(taxa)


def enumerate_rooted_trees(taxa: Sequence[str]) -> Iterator[PhyloTree]:
    """
    Every rooted binary topology on ``taxa``, each exactly once.

    Trees are built by stepwise addition: taxon k is attached to each of the
    2k-3 edges of every tree on the first k-1 taxa, or above its root.  The
    order is deterministic for a given taxon order.
    """
    for shape in enumerate_shapes(taxa):
        yield PhyloTree(_shape_to_node(shape), rooted=True)


# ---------------------------------------------------------------------------
# ASCII rendering
# ---------------------------------------------------------------------------


def _length_tag(length: Optional[float]) -> str:
    if length is None:
        return ""
    return f"{max(length, 0.0):.4g}"


def render_ascii(tree: PhyloTree) -> str:
    """
    Monospace cladogram, one leaf per line.

    Branch lengths, when present, are printed on each connector; negative
    lengths are shown as 0.
    """
    keys: dict = {}
    for node in tree.root.postorder():
        keys[id(node)] = node.name if not node.children else min(keys[id(c)] for c in node.children)

    def block(node: Node):
        if not node.children:
            return [node.name], 0
        kids = sorted(node.children, key=lambda c: keys[id(c)])
        lines: list[str] = []
        anchors = []
        for k, child in enumerate(kids):
            sub, anchor = block(child)
            tag = _length_tag(child.length)
            arm = "--" + (f"[{tag}]--" if tag else "")
            first, last = k == 0, k == len(kids) - 1
            for r, text in enumerate(sub):
                if r < anchor:
                    lead = " " if first else "|"
                    pad = " " * len(arm)
                elif r == anchor:
                    lead = "/" if first else ("\\" if last else "+")
                    pad = arm
                else:
                    lead = " " if last else "|"
                    pad = " " * len(arm)
                if r == anchor:
                    anchors.append(len(lines))
                lines.append(lead + pad + text)
            if not last:
                lines.append("|")
        mid = (anchors[0] + anchors[-1]) // 2
        if lines[mid][0] == "|":
            lines[mid] = "+" + lines[mid][1:]
        return lines, mid

    lines, anchor = block(tree.root)
    if tree.root.children:
        lines = [("-" if r == anchor else " ") + ln for r, ln in enumerate(lines)]
    return "\n".join(ln.rstrip() for ln in lines) + "\n"
