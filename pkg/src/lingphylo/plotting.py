"""Figure output for the command-line reports (written to files, never shown)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .trees import PhyloTree  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.spines.left": False,
    "savefig.dpi": 150,
}


def _layout(tree: PhyloTree, use_lengths: bool):
    """x (depth) and y (row) for every node; leaves on consecutive rows."""
    keys = {}
    for node in tree.root.postorder():
        keys[id(node)] = node.name if not node.children else min(keys[id(c)] for c in node.children)
    pos = {}
    row = [0]

    def place(node, x):
        kids = sorted(node.children, key=lambda c: keys[id(c)])
        for c in kids:
            step = max(c.length, 0.0) if (use_lengths and c.length is not None) else 1.0
            place(c, x + step)
        if kids:
            y = (pos[id(kids[0])][1] + pos[id(kids[-1])][1]) / 2.0
        else:
            y = row[0]
            row[0] += 1
        pos[id(node)] = (x, y)
        node_kids[id(node)] = kids

    node_kids = {}
    place(tree.root, 0.0)
    if not use_lengths:
        # cladogram: align leaves at the deepest level
        depth = max(x for x, _ in pos.values())
        for node in tree.root.leaves():
            pos[id(node)] = (depth, pos[id(node)][1])
    return pos, node_kids


def plot_tree(tree: PhyloTree, path, title: str = "", support: bool = True):
    """Rectangular tree drawing saved to ``path``; format follows the suffix."""
    use_lengths = tree.has_lengths()
    pos, kids = _layout(tree, use_lengths)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 0.45 * tree.n_taxa + 1.2))
        for node in tree.root.preorder():
            x, y = pos[id(node)]
            if kids[id(node)]:
                ys = [pos[id(c)][1] for c in kids[id(node)]]
                ax.plot([x, x], [min(ys), max(ys)], color="k", lw=1.2)
                for c in kids[id(node)]:
                    cx, cy = pos[id(c)]
                    ax.plot([x, cx], [cy, cy], color="k", lw=1.2)
                if support and node.support is not None:
                    ax.annotate(f"{node.support:.2f}", (x, y), xytext=(-3, 3), textcoords="offset points",
                                ha="right", fontsize=8, color="0.35")
            else:
                ax.annotate(node.name, (x, y), xytext=(4, 0), textcoords="offset points", va="center")
        ax.set_yticks([])
        ax.invert_yaxis()
        ax.set_xlabel("branch length" if use_lengths else "")
        if not use_lengths:
            ax.set_xticks([])
            ax.spines["bottom"].set_visible(False)
        xmax = max(x for x, _ in pos.values())
        ax.set_xlim(-0.02 * (xmax or 1), xmax * 1.35 if xmax else 1)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_trace(result, path, title: str = "MC3 run"):
    """Cold-chain log posterior of both analyses and the split-deviation trace."""
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5.5))
        for k, sample in enumerate(result.samples, start=1):
            gens = [r.generation for r in sample.records]
            lps = [r.log_posterior for r in sample.records]
            ax1.plot(gens, lps, lw=0.7, label=f"analysis {k}")
        ax1.set_ylabel("log posterior")
        ax1.legend(frameon=False)
        if result.asdsf_trace:
            g, v = zip(*result.asdsf_trace)
            ax2.plot(g, v, marker=".", color="k", lw=1)
            if min(v) > 0:
                ax2.set_yscale("log")
        ax2.set_xlabel("generation")
        ax2.set_ylabel("split-frequency deviation")
        ax1.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_score_histogram(table, path, title: str = ""):
    """Distribution of parsimony scores over all scored topologies."""
    scores = [s for _, s in table]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        lo, hi = min(scores), max(scores)
        ax.hist(scores, bins=range(int(lo), int(hi) + 2), color="0.6", edgecolor="k", align="left")
        ax.set_xlabel("score")
        ax.set_ylabel("trees")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
