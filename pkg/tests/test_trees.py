import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_binary_tree
from lingphylo.dataio import FIG3_NEWICK
from lingphylo.trees import (
    MAX_ENUMERATION_TAXA,
    NewickError,
    TaxonMismatchError,
    clades_of,
    enumerate_rooted_trees,
    parse_newick,
    render_ascii,
    rf_distance,
    root_at_outgroup,
    splits_of,
    tree_count,
    unroot,
    write_newick,
)

UPGMA_NWK = "((Gondi,Konda),((Kui,Kuvi),(Manda,Pengo)));"


def taxa_names(n):
    return [f"T{i:02d}" for i in range(n)]


# -- parsing and writing ------------------------------------------------------


def test_cherry_is_rooted():
    t = parse_newick("(A,B);")
    assert t.rooted and t.taxa == ("A", "B")
    assert write_newick(t) == "(A,B);"


def test_fig3_parses_and_canonicalises():
    t = parse_newick("(Gondi,(Konda,((Kui,Kuvi),(Pengo,Manda))));")
    assert t.n_taxa == 6 and t.is_binary() and t.rooted
    assert write_newick(t) == FIG3_NEWICK.replace("(Pengo,Manda)", "(Manda,Pengo)")


def test_internal_length_read_back():
    t = parse_newick("(A,(B,C):0.5);")
    inner = next(c for c in t.root.children if c.children)
    assert inner.length == 0.5
    assert write_newick(t) == "(A,(B,C):0.5);"


def test_children_sorted_by_smallest_taxon():
    assert write_newick(parse_newick("((D,C),(B,A));")) == "((A,B),(C,D));"


def test_whitespace_comments_and_missing_semicolon():
    t = parse_newick("  ( A , [note] B ) ")
    assert write_newick(t) == "(A,B);"


def test_rooting_hints():
    assert not parse_newick("(A,B,C);").rooted
    assert not parse_newick("[&U]((A,B),C);").rooted
    assert parse_newick("[&R](A,B,C);").rooted


@pytest.mark.parametrize(
    "text",
    ["", "   ", "(A,B", "(A,B));", "(A,,B);", "(A,B):x;", "(A,B)C)D;"],
)
def test_malformed_newick_raises(text):
    with pytest.raises(NewickError):
        parse_newick(text)


def test_error_reports_position():
    with pytest.raises(NewickError) as info:
        parse_newick("(A,B));")
    assert info.value.position == 5


def test_duplicate_leaf_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        parse_newick("(A,(B,A));")


def test_non_finite_length_rejected():
    with pytest.raises(ValueError):
        parse_newick("(A:inf,B:1);")


def test_negative_lengths_kept_and_flagged():
    t = parse_newick("(A:-0.5,B:1);")
    assert t.has_negative_lengths()
    assert "-0.5" in write_newick(t)


def test_unrooted_writing_is_root_invariant():
    a = parse_newick("((A,B),(C,D),E);")
    b = parse_newick("(A,B,((C,D),E));")
    assert write_newick(a) == write_newick(b)


# -- splits, clades, RF -----------------------------------------------------------


def test_fig3_splits():
    # read off by hand from the topology
    expected = {
        frozenset({"Kui", "Kuvi"}),
        frozenset({"Manda", "Pengo"}),
        frozenset({"Kui", "Kuvi", "Manda", "Pengo"}),
    }
    got = splits_of(parse_newick(FIG3_NEWICK))
    # canonical blocks exclude the smallest taxon (Gondi), so compare both sides
    taxa = frozenset(parse_newick(FIG3_NEWICK).taxa)
    assert {s if "Gondi" not in s else taxa - s for s in got} == expected


def test_star_has_no_splits():
    assert splits_of(parse_newick("(A,B,C,D);")) == set()


def test_cherry_pair_single_split():
    assert splits_of(parse_newick("((A,B),(C,D));")) == {frozenset({"C", "D"})}


def test_rf_identity_and_upgma_vs_fig3():
    fig3 = parse_newick(FIG3_NEWICK)
    up = parse_newick(UPGMA_NWK)
    assert rf_distance(fig3, fig3, "rooted") == 0
    assert rf_distance(up, fig3, "unrooted") == 0
    assert rf_distance(up, fig3, "rooted") == 2
    assert clades_of(up) ^ clades_of(fig3) == {
        frozenset({"Gondi", "Konda"}),
        frozenset({"Konda", "Kui", "Kuvi", "Manda", "Pengo"}),
    }


def test_rf_taxon_mismatch():
    with pytest.raises(TaxonMismatchError):
        rf_distance(parse_newick("((A,B),C);"), parse_newick("((A,B),D);"))


def test_rf_bad_mode():
    t = parse_newick("((A,B),C);")
    with pytest.raises(ValueError):
        rf_distance(t, t, "sideways")


# -- rooting ---------------------------------------------------------------------


def test_root_three_star():
    t = root_at_outgroup(parse_newick("(A,B,C);"), "A")
    assert t.rooted and write_newick(t) == "(A,(B,C));"


def test_root_splits_pendant_length_evenly():
    t = root_at_outgroup(parse_newick("(A:0.4,B:1,(C:1,D:1):2);"), "A")
    a = next(c for c in t.root.children if c.name == "A")
    rest = next(c for c in t.root.children if c.name != "A")
    assert a.length == pytest.approx(0.2) and rest.length == pytest.approx(0.2)


def test_reroot_at_existing_root_child_is_identity():
    t = parse_newick(FIG3_NEWICK)
    assert write_newick(root_at_outgroup(t, "Gondi")) == write_newick(t)


def test_root_unknown_outgroup():
    with pytest.raises(KeyError):
        root_at_outgroup(parse_newick("(A,B,C);"), "Z")


def test_unroot_merges_root_edges():
    t = unroot(parse_newick("((A:1,B:1):2,C:3);"))
    assert not t.rooted
    assert sorted(c.length for c in t.root.children) == [1.0, 1.0, 5.0]


def test_support_survives_rerooting():
    t = parse_newick("(A,B,((C,D)0.9,E)0.7);")
    r = root_at_outgroup(t, "A")
    assert write_newick(r, support=True) == "(A,(B,((C,D)0.90,E)0.70));"


# -- enumeration -----------------------------------------------------------------


def double_factorial_count(n):
    """(2n-3)!! by direct product; an independent route to the tree count."""
    return math.prod(range(1, 2 * n - 2, 2))


@pytest.mark.parametrize("n,expected", [(2, 1), (3, 3), (4, 15), (6, 945)])
def test_tree_count_values(n, expected):
    assert tree_count(n) == expected == double_factorial_count(n)


def test_tree_count_rejects_small_n():
    with pytest.raises(ValueError):
        tree_count(1)


@pytest.mark.parametrize("n", range(2, 8))
def test_enumeration_complete_and_distinct(n):
    names = [write_newick(t) for t in enumerate_rooted_trees(taxa_names(n))]
    assert len(names) == len(set(names)) == tree_count(n)
    assert all(parse_newick(s).is_binary() for s in names)


def test_three_taxa_trees_by_hand():
    got = sorted(write_newick(t) for t in enumerate_rooted_trees(["A", "B", "C"]))
    assert got == ["((A,B),C);", "((A,C),B);", "(A,(B,C));"]


def test_enumeration_cap():
    with pytest.raises(ValueError):
        list(enumerate_rooted_trees(taxa_names(MAX_ENUMERATION_TAXA + 1)))
    with pytest.raises(ValueError):
        list(enumerate_rooted_trees(["A"]))


def test_enumeration_is_deterministic():
    a = [write_newick(t) for t in enumerate_rooted_trees(taxa_names(5))]
    b = [write_newick(t) for t in enumerate_rooted_trees(taxa_names(5))]
    assert a == b


# -- ASCII -------------------------------------------------------------------------


def test_ascii_cherry():
    art = render_ascii(parse_newick("(A,B);"))
    lines = art.splitlines()
    assert len([ln for ln in lines if ln.rstrip().endswith(("A", "B"))]) == 2
    assert lines[0].endswith("A") and lines[-1].endswith("B")


def test_ascii_fig3_structure_and_stability():
    t = parse_newick(FIG3_NEWICK)
    art = render_ascii(t)
    assert art == render_ascii(parse_newick(FIG3_NEWICK))
    leaf_lines = [ln for ln in art.splitlines() if ln.rstrip()[-1:].isalpha()]
    assert [ln.split("--")[-1] for ln in leaf_lines] == ["Gondi", "Konda", "Kui", "Kuvi", "Manda", "Pengo"]
    # Gondi hangs directly off the root
    assert leaf_lines[0].strip().startswith("/--Gondi")


def test_ascii_clamps_negative_lengths():
    art = render_ascii(parse_newick("(A:-0.5,B:1);"))
    assert "[0]" in art and "-0.5" not in art


# -- properties --------------------------------------------------------------------

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(min_value=2, max_value=12), rooted=st.booleans())
def test_roundtrip_preserves_topology_and_lengths(seed, n, rooted):
    rng = np.random.default_rng(seed)
    t = random_binary_tree(rng, taxa_names(n))
    if not rooted and n >= 3:
        t = unroot(t)
    back = parse_newick(write_newick(t))
    assert back.rooted == t.rooted
    assert rf_distance(t, back, "unrooted") == 0
    assert write_newick(back) == write_newick(t)
    if not t.rooted:
        return
    assert rf_distance(t, back, "rooted") == 0
    # branch lengths per clade agree
    def lengths(tree):
        out = {}
        for node in tree.root.postorder():
            if node is not tree.root:
                out[node.leaf_names()] = node.length
        return out

    la, lb = lengths(t), lengths(back)
    assert la.keys() == lb.keys()
    for k in la:
        assert la[k] == pytest.approx(lb[k], abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(min_value=3, max_value=12))
def test_split_and_clade_counts(seed, n):
    t = random_binary_tree(np.random.default_rng(seed), taxa_names(n), lengths=None)
    assert len(clades_of(t)) == n - 2
    assert len(splits_of(unroot(t))) == n - 3


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(min_value=4, max_value=10))
def test_rf_is_a_pseudometric(seed, n):
    rng = np.random.default_rng(seed)
    a, b, c = (random_binary_tree(rng, taxa_names(n), lengths=None) for _ in range(3))
    for mode in ("rooted", "unrooted"):
        assert rf_distance(a, a, mode) == 0
        assert rf_distance(a, b, mode) == rf_distance(b, a, mode)
        assert rf_distance(a, c, mode) <= rf_distance(a, b, mode) + rf_distance(b, c, mode)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(min_value=3, max_value=10), k=st.integers(min_value=0, max_value=9))
def test_rooting_then_unrooting_keeps_splits(seed, n, k):
    names = taxa_names(n)
    t = unroot(random_binary_tree(np.random.default_rng(seed), names))
    r = root_at_outgroup(t, names[k % n])
    assert r.rooted and any(c.name == names[k % n] for c in r.root.children)
    assert rf_distance(unroot(r), t, "unrooted") == 0


def test_enumeration_index_partition_matches_sequential():
    from lingphylo.trees import enumerate_shapes

    shapes = list(enumerate_shapes(taxa_names(6)))
    parts = [list(itertools.islice(enumerate_shapes(taxa_names(6)), a, a + 200)) for a in range(0, 945, 200)]
    assert [s for p in parts for s in p] == shapes
