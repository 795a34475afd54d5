"""
Data containers and file formats.

Similarity / distance files hold a lower triangle::

    # comment
    3
    A
    B 5
    C 4 7

Character files hold one row per taxon after an ``n m`` header.  A cell is
a single digit, ``?`` (missing), ``{..}`` for a polymorphic cell, or
``(..)`` for a state >= 10; e.g. ``German 1{56}9(12)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .trees import validate_taxon_name

__all__ = [
    "FormatError",
    "SimilarityMatrix",
    "DistanceMatrix",
    "CharacterMatrix",
    "GlottoParams",
    "load_similarity",
    "load_distance",
    "parse_triangle",
    "format_triangle",
    "save_similarity",
    "similarity_to_distance",
    "SIMILARITY_TRANSFORMS",
    "load_characters",
    "parse_characters",
    "format_characters",
    "save_characters",
    "binarize_characters",
    "glotto_divergence_time",
    "builtin_similarity",
    "builtin_similarity_text",
    "SCD_TAXA",
    "FIG3_NEWICK",
]

SCD_TAXA = ("Gondi", "Konda", "Kui", "Kuvi", "Pengo", "Manda")
FIG3_NEWICK = "(Gondi,(Konda,((Kui,Kuvi),(Pengo,Manda))));"
DEFAULT_RETENTION = 0.806


class FormatError(ValueError):
    """Input file does not follow the expected layout."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _check_taxa(taxa: Sequence[str]) -> tuple:
    taxa = tuple(taxa)
    for name in taxa:
        validate_taxon_name(name)
    if len(set(taxa)) != len(taxa):
        raise ValueError("duplicate taxon names")
    return taxa


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise shared-cognate counts.  The diagonal is ignored."""

    taxa: tuple
    values: np.ndarray

    def __post_init__(self):
        taxa = _check_taxa(self.taxa)
        v = np.array(self.values, dtype=float)
        n = len(taxa)
        if n < 2:
            raise ValueError("a similarity matrix needs at least two taxa")
        if v.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got {v.shape}")
        off = ~np.eye(n, dtype=bool)
        if not np.array_equal(v[off], v.T[off]):
            raise ValueError("similarity matrix is not symmetric")
        if np.any(v[off] < 0):
            raise ValueError("similarities must be non-negative")
        np.fill_diagonal(v, 0.0)
        v.flags.writeable = False
        object.__setattr__(self, "taxa", taxa)
        object.__setattr__(self, "values", v)

    def index(self, taxon: str) -> int:
        return self.taxa.index(taxon)

    def __call__(self, a: str, b: str) -> float:
        return float(self.values[self.index(a), self.index(b)])

    def __eq__(self, other):
        return (
            isinstance(other, SimilarityMatrix)
            and self.taxa == other.taxa
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric, finite, non-negative dissimilarities with zero diagonal."""

    taxa: tuple
    values: np.ndarray

    def __post_init__(self):
        taxa = _check_taxa(self.taxa)
        v = np.array(self.values, dtype=float)
        n = len(taxa)
        if v.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("distances must be finite")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise ValueError("distance matrix is not symmetric")
        if np.any(np.diag(v) != 0):
            raise ValueError("distance matrix diagonal must be zero")
        if np.any(v < 0):
            raise ValueError("distances must be non-negative")
        v = (v + v.T) / 2.0
        v.flags.writeable = False
        object.__setattr__(self, "taxa", taxa)
        object.__setattr__(self, "values", v)

    def __call__(self, a: str, b: str) -> float:
        return float(self.values[self.taxa.index(a), self.taxa.index(b)])

    def __eq__(self, other):
        return (
            isinstance(other, DistanceMatrix)
            and self.taxa == other.taxa
            and np.array_equal(self.values, other.values)
        )

    def reorder(self, taxa: Sequence[str]) -> "DistanceMatrix":
        idx = [self.taxa.index(t) for t in taxa]
        return DistanceMatrix(tuple(taxa), self.values[np.ix_(idx, idx)])


@dataclass(frozen=True)
class CharacterMatrix:
    """
    Taxa x characters.  Each cell is a frozenset of integer states, or
    ``None`` for missing data.
    """

    taxa: tuple
    cells: tuple
    characters: Optional[tuple] = None

    def __post_init__(self):
        taxa = _check_taxa(self.taxa)
        rows = tuple(tuple(None if c is None else frozenset(c) for c in row) for row in self.cells)
        if len(rows) != len(taxa):
            raise ValueError("one row per taxon required")
        if not taxa:
            raise ValueError("empty character matrix")
        m = len(rows[0])
        if m < 1:
            raise ValueError("at least one character required")
        for name, row in zip(taxa, rows):
            if len(row) != m:
                raise ValueError(f"row for {name} has {len(row)} cells, expected {m}")
            for cell in row:
                if cell is not None and not cell:
                    raise ValueError(f"empty state set in row {name}")
        chars = self.characters
        if chars is None:
            chars = tuple(f"c{i + 1}" for i in range(m))
        elif len(chars) != m:
            raise ValueError("character label count mismatch")
        object.__setattr__(self, "taxa", taxa)
        object.__setattr__(self, "cells", rows)
        object.__setattr__(self, "characters", tuple(chars))

    @property
    def n_taxa(self) -> int:
        return len(self.taxa)

    @property
    def n_characters(self) -> int:
        return len(self.cells[0])

    def is_binary(self) -> bool:
        return all(c is None or c <= {0, 1} for row in self.cells for c in row)

    def row(self, taxon: str) -> tuple:
        return self.cells[self.taxa.index(taxon)]

    def column(self, j: int) -> dict:
        return {t: row[j] for t, row in zip(self.taxa, self.cells)}

    def select(self, columns: Sequence[int]) -> "CharacterMatrix":
        return CharacterMatrix(
            self.taxa,
            tuple(tuple(row[j] for j in columns) for row in self.cells),
            tuple(self.characters[j] for j in columns),
        )

    @classmethod
    def from_binary(cls, taxa: Sequence[str], rows: Sequence[Sequence]) -> "CharacterMatrix":
        """Build from rows of ``0``/``1``/``None`` (or ``'?'``)."""
        cells = [
            tuple(None if (v is None or v == "?") else frozenset([int(v)]) for v in row) for row in rows
        ]
        return cls(tuple(taxa), tuple(cells))

    @classmethod
    def from_columns(cls, taxa: Sequence[str], columns: Sequence[dict]) -> "CharacterMatrix":
        """Build from per-character ``{taxon: state}`` maps."""
        rows = [[col[t] for col in columns] for t in taxa]
        return cls.from_binary(taxa, rows)


@dataclass(frozen=True)
class GlottoParams:
    """Shared-cognate proportion ``c`` and retention constant ``r``."""

    c: float
    r: float = DEFAULT_RETENTION

    def __post_init__(self):
        if not (0.0 < self.c <= 1.0):
            raise ValueError(f"c must lie in (0, 1], got {self.c}")
        if not (0.0 < self.r < 1.0):
            raise ValueError(f"r must lie in (0, 1), got {self.r}")


# ---------------------------------------------------------------------------
# Triangle format
# ---------------------------------------------------------------------------


def _content_lines(text: str):
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield i, line


def parse_triangle(text: str, integer: bool = True):
    """Parse lower-triangle text into ``(taxa, full symmetric array)``."""
    lines = list(_content_lines(text))
    if not lines:
        raise FormatError("empty input")
    first_no, first = lines[0]
    try:
        n = int(first)
    except ValueError:
        raise FormatError(f"expected taxon count, got {first!r}", first_no) from None
    if n < 1:
        raise FormatError("taxon count must be positive", first_no)
    body = lines[1:]
    if len(body) != n:
        where = body[n][0] if len(body) > n else (body[-1][0] if body else first_no)
        raise FormatError(f"expected {n} taxon rows, found {len(body)}", where)
    taxa: list[str] = []
    values = np.zeros((n, n))
    for i, (line_no, line) in enumerate(body):
        parts = line.split()
        name, cells = parts[0], parts[1:]
        if len(cells) != i:
            raise FormatError(f"row for {name} has {len(cells)} values, expected {i}", line_no)
        if name in taxa:
            raise FormatError(f"duplicate taxon {name}", line_no)
        try:
            validate_taxon_name(name)
        except ValueError as exc:
            raise FormatError(str(exc), line_no) from None
        taxa.append(name)
        for j, cell in enumerate(cells):
            try:
                x = int(cell) if integer else float(cell)
            except ValueError:
                kind = "integer" if integer else "number"
                raise FormatError(f"non-{kind} cell {cell!r}", line_no) from None
            values[i, j] = values[j, i] = x
    return tuple(taxa), values


def format_triangle(taxa: Sequence[str], values: np.ndarray, integer: bool = True) -> str:
    out = [str(len(taxa))]
    for i, name in enumerate(taxa):
        cells = [str(int(values[i, j])) if integer else repr(float(values[i, j])) for j in range(i)]
        out.append(" ".join([name, *cells]))
    return "\n".join(out) + "\n"


def load_similarity(path) -> SimilarityMatrix:
    """Read a lower-triangular similarity file."""
    taxa, values = parse_triangle(Path(path).read_text(encoding="utf-8"), integer=True)
    if len(taxa) < 2:
        raise FormatError("a similarity matrix needs at least two taxa")
    return SimilarityMatrix(taxa, values)


def load_distance(path) -> DistanceMatrix:
    """Read a lower-triangular distance file (real-valued cells)."""
    taxa, values = parse_triangle(Path(path).read_text(encoding="utf-8"), integer=False)
    try:
        return DistanceMatrix(taxa, values)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def save_similarity(s: SimilarityMatrix, path) -> None:
    Path(path).write_text(format_triangle(s.taxa, s.values, integer=True), encoding="utf-8")


def save_distance(d: DistanceMatrix, path) -> None:
    Path(path).write_text(format_triangle(d.taxa, d.values, integer=False), encoding="utf-8")


SIMILARITY_TRANSFORMS = ("reciprocal", "linear")


def similarity_to_distance(s: SimilarityMatrix, transform: str = "reciprocal") -> DistanceMatrix:
    """
    Convert shared-cognate counts to distances.

    ``"reciprocal"`` gives ``d = 1 / s``; ``"linear"`` gives ``d = max(s) - s``
    over the off-diagonal entries.
    """
    n = len(s.taxa)
    d = np.zeros((n, n))
    if transform == "linear":
        top = max(s.values[i, j] for i in range(n) for j in range(i))
        for i in range(n):
            for j in range(i):
                d[i, j] = d[j, i] = top - s.values[i, j]
        return DistanceMatrix(s.taxa, d)
    if transform != "reciprocal":
        raise ValueError(f"unknown transform {transform!r}")
    for i in range(n):
        for j in range(i):
            sij = s.values[i, j]
            if sij <= 0:
                raise ValueError(f"zero similarity between {s.taxa[j]} and {s.taxa[i]}")
            d[i, j] = d[j, i] = 1.0 / sij
    return DistanceMatrix(s.taxa, d)


# ---------------------------------------------------------------------------
# Character format
# ---------------------------------------------------------------------------

_CELL = re.compile(r"\?|\d|\{[^{}]*\}|\(\d+\)")
_INNER = re.compile(r"\d|\(\d+\)")


def _parse_cells(text: str, line_no: int) -> list:
    cells = []
    pos = 0
    text = "".join(text.split())
    while pos < len(text):
        m = _CELL.match(text, pos)
        if not m:
            raise FormatError(f"invalid state symbol {text[pos]!r}", line_no)
        tok = m.group()
        pos = m.end()
        if tok == "?":
            cells.append(None)
        elif tok.startswith("{"):
            inner = tok[1:-1]
            states = []
            ipos = 0
            while ipos < len(inner):
                im = _INNER.match(inner, ipos)
                if not im:
                    raise FormatError(f"invalid polymorphic cell {tok!r}", line_no)
                states.append(int(im.group().strip("()")))
                ipos = im.end()
            if not states:
                raise FormatError("empty polymorphic cell", line_no)
            cells.append(frozenset(states))
        else:
            cells.append(frozenset([int(tok.strip("()"))]))
    return cells


def parse_characters(text: str) -> CharacterMatrix:
    lines = list(_content_lines(text))
    if not lines:
        raise FormatError("empty input")
    head_no, head = lines[0]
    try:
        n, m = (int(x) for x in head.split())
    except ValueError:
        raise FormatError(f"expected 'n m' header, got {head!r}", head_no) from None
    body = lines[1:]
    if len(body) != n:
        raise FormatError(f"expected {n} taxon rows, found {len(body)}", head_no)
    taxa, rows = [], []
    for line_no, line in body:
        parts = line.split(None, 1)
        name = parts[0]
        if name in taxa:
            raise FormatError(f"duplicate taxon {name}", line_no)
        cells = _parse_cells(parts[1] if len(parts) > 1 else "", line_no)
        if len(cells) != m:
            raise FormatError(f"row for {name} has {len(cells)} cells, expected {m}", line_no)
        taxa.append(name)
        rows.append(tuple(cells))
    try:
        return CharacterMatrix(tuple(taxa), tuple(rows))
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def load_characters(path) -> CharacterMatrix:
    """Read a character-matrix file."""
    return parse_characters(Path(path).read_text(encoding="utf-8"))


def _format_state(x: int) -> str:
    return str(x) if 0 <= x <= 9 else f"({x})"


def format_characters(m: CharacterMatrix) -> str:
    out = [f"{m.n_taxa} {m.n_characters}"]
    for name, row in zip(m.taxa, m.cells):
        toks = []
        for cell in row:
            if cell is None:
                toks.append("?")
            elif len(cell) == 1:
                toks.append(_format_state(next(iter(cell))))
            else:
                toks.append("{" + "".join(_format_state(s) for s in sorted(cell)) + "}")
        out.append(f"{name} {''.join(toks)}")
    return "\n".join(out) + "\n"


def save_characters(m: CharacterMatrix, path) -> None:
    Path(path).write_text(format_characters(m), encoding="utf-8")


def binarize_characters(m: CharacterMatrix) -> CharacterMatrix:
    """
    Expand multistate characters into presence/absence columns.

    One column per (character, observed state), ordered by character then
    state.  Missing cells stay missing in every column of their character.
    """
    columns = []
    labels = []
    for j, label in enumerate(m.characters):
        observed = sorted(set().union(*(row[j] for row in m.cells if row[j] is not None)))
        for state in observed:
            columns.append((j, state))
            labels.append(f"{label}:{state}")
    rows = []
    for row in m.cells:
        rows.append(
            tuple(None if row[j] is None else frozenset([int(state in row[j])]) for j, state in columns)
        )
    return CharacterMatrix(m.taxa, tuple(rows), tuple(labels))


def glotto_divergence_time(p: GlottoParams) -> float:
    """Divergence time in millennia from shared-cognate proportion."""
    if not isinstance(p, GlottoParams):
        p = GlottoParams(*p)
    t = math.log(p.c) / (2.0 * math.log(p.r))
    return t + 0.0


# ---------------------------------------------------------------------------
# Bundled data
# ---------------------------------------------------------------------------


SCD_SIM = """\
# Shared cognates-with-change, six South-Central Dravidian languages
# (Krishnamurti, Moses & Danforth 1983)
6
Gondi
Konda 16
Kui 18 18
Kuvi 22 20 88
Pengo 11 19 48 49
Manda 10 9 40 42 57
"""


def builtin_similarity_text() -> str:
    return SCD_SIM


def shipped_similarity_text() -> str:
    """Contents of the ``scd.sim`` file installed with the package."""
    return resources.files("lingphylo.data").joinpath("scd.sim").read_text(encoding="utf-8")


def builtin_similarity(name: str = "scd") -> SimilarityMatrix:
    """Bundled shared cognates-with-change counts for six South-Central Dravidian languages."""
    if name != "scd":
        raise KeyError(f"unknown builtin dataset {name!r}")
    taxa, values = parse_triangle(builtin_similarity_text())
    return SimilarityMatrix(taxa, values)
