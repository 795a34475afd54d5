"""
Bayesian tree inference for binary characters with Metropolis-coupled MCMC.

Model: two-state symmetric continuous-time Markov process with stationary
distribution (1/2, 1/2), optional discrete-gamma rate variation across
characters, uniform prior over unrooted topologies, Exponential(10) prior on
branch lengths and, when sampled, a Uniform prior on the gamma shape.

The sampler state is an unrooted binary tree.  Each independent analysis
runs ``n_chains`` chains, chain ``i`` (1-based) raised to the power
``1 / (1 + T (i - 1))``; samples come from the cold chain only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import special, stats

from .dataio import CharacterMatrix
from .trees import Node, PhyloTree, _to_graph, clades_of, parse_newick, splits_of, unroot, write_newick

__all__ = [
    "McmcConfig",
    "ChainState",
    "SampleRecord",
    "PosteriorSample",
    "McmcResult",
    "transition_probability",
    "gamma_rates",
    "log_likelihood",
    "log_prior",
    "log_posterior",
    "chain_beta",
    "swap_probability",
    "mc3_run",
    "run_chain",
    "split_frequencies",
    "asdsf",
    "consensus_tree",
]

MULTIPLIER_TUNING = 2.0 * math.log(1.7)


@dataclass(frozen=True)
class McmcConfig:
    """
    Run parameters.

    ``rate_mode`` is ``"off"`` (one rate), ``"fixed"`` (gamma with shape
    ``gamma_shape``) or ``"uniform"`` (shape sampled under a Uniform prior on
    ``shape_bounds``).
    """

    n_chains: int = 4
    temperature: float = 0.2
    max_generations: int = 200_000
    sample_interval: int = 10
    burnin_fraction: float = 0.25
    threshold: float = 0.01
    seed: int = 1
    rate_mode: str = "off"
    gamma_shape: float = 1.0
    shape_bounds: tuple = (0.1, 10.0)
    n_categories: int = 4
    branch_prior_rate: float = 10.0
    initial_length: float = 0.1
    topology_move_prob: float = 0.5
    freeze_branch_lengths: bool = False
    check_interval: int = 1000
    min_generations: int = 5000
    asdsf_min_freq: float = 0.1

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if not 0 <= self.burnin_fraction < 1:
            raise ValueError("burn-in fraction must lie in [0, 1)")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if self.rate_mode not in ("off", "fixed", "uniform"):
            raise ValueError(f"unknown rate mode {self.rate_mode!r}")
        if self.sample_interval < 1 or self.max_generations < 1:
            raise ValueError("sample interval and generation cap must be positive")
        lo, hi = self.shape_bounds
        if not 0 < lo < hi:
            raise ValueError("invalid shape bounds")
        if self.rate_mode != "off" and self.n_categories < 1:
            raise ValueError("need at least one rate category")


# ---------------------------------------------------------------------------
# Likelihood
# ---------------------------------------------------------------------------


def transition_probability(t: float, rate: float = 1.0) -> float:
    """Probability that the state is unchanged after branch length ``t``."""
    return 0.5 + 0.5 * math.exp(-2.0 * rate * t)


def gamma_rates(shape: float, n_categories: int) -> np.ndarray:
    """Mean rates of equal-probability discrete gamma categories (mean 1)."""
    if n_categories == 1:
        return np.ones(1)
    cuts = stats.gamma.ppf(np.arange(1, n_categories) / n_categories, a=shape, scale=1.0 / shape)
    upper = np.concatenate([special.gammainc(shape + 1, cuts * shape), [1.0]])
    lower = np.concatenate([[0.0], upper[:-1]])
    return (upper - lower) * n_categories


def _leaf_partials(m: CharacterMatrix) -> np.ndarray:
    """Array ``(n_taxa, n_chars, 2)``; missing and polymorphic cells allow several states."""
    if not m.is_binary():
        raise ValueError("likelihood needs a binary character matrix")
    out = np.zeros((m.n_taxa, m.n_characters, 2))
    for i, row in enumerate(m.cells):
        for j, cell in enumerate(row):
            if cell is None:
                out[i, j, :] = 1.0
            else:
                for s in cell:
                    out[i, j, s] = 1.0
    return out


def _leaf_map(leaves: np.ndarray) -> dict:
    # columns shaped (n_chars, 1) so they broadcast against rate categories
    return {("leaf", i): (leaves[i, :, 0:1].copy(), leaves[i, :, 1:2].copy()) for i in range(leaves.shape[0])}


def _prune(postorder, leaf_partials, rates: np.ndarray) -> float:
    """
    Felsenstein pruning over ``postorder``: a list of ``(node, children)``
    where ``children`` are ``(child, length)`` pairs and leaves map to
    ``(p0, p1)`` arrays in ``leaf_partials``.  Returns the summed log
    likelihood.
    """
    partial = {}
    log_scale = 0.0
    top = None
    depth = 0
    for node, children in postorder:
        top = node
        if not children:
            partial[node] = leaf_partials[node]
            continue
        acc0 = acc1 = None
        for child, length in children:
            l0, l1 = partial.pop(child)
            e = np.exp(-2.0 * rates * length)
            a = 0.5 * (l0 + l1)
            b = (0.5 * e) * (l0 - l1)
            if acc0 is None:
                acc0, acc1 = a + b, a - b
            else:
                acc0 = acc0 * (a + b)
                acc1 = acc1 * (a - b)
        depth += 1
        if depth % 8 == 0:
            scale = np.maximum(acc0, acc1).max(axis=1, keepdims=True)
            scale[scale <= 0] = 1.0
            acc0 = acc0 / scale
            acc1 = acc1 / scale
            log_scale = log_scale + np.log(scale[:, 0])
        partial[node] = (acc0, acc1)
    p0, p1 = partial[top]
    k = rates.shape[0]
    site = 0.5 * np.broadcast_to(p0 + p1, (p0.shape[0], k)).mean(axis=1)
    return float(np.sum(np.log(site) + log_scale))


def log_likelihood(tree: PhyloTree, m: CharacterMatrix, rates: Optional[Sequence[float]] = None) -> float:
    """
    Log likelihood of ``m`` on ``tree`` under the symmetric two-state model.

    ``rates`` are per-category rate multipliers with equal weights
    (e.g. from :func:`gamma_rates`); ``None`` means a single rate of 1.
    """
    if m.n_characters < 1:
        raise ValueError("empty character matrix")
    if set(tree.taxa) != set(m.taxa):
        raise ValueError("tree leaves do not match matrix taxa")
    rates = np.ones(1) if rates is None else np.asarray(rates, dtype=float)
    index = {t: i for i, t in enumerate(m.taxa)}
    leaves = _leaf_partials(m)
    ids = {}
    post = []
    for node in tree.root.postorder():
        nid = ids.setdefault(id(node), len(ids))
        if not node.children:
            post.append((("leaf", index[node.name]), []))
            ids[id(node)] = ("leaf", index[node.name])
            continue
        kids = []
        for c in node.children:
            if c.length is None or not c.length > 0:
                raise ValueError("branch lengths must be positive")
            kids.append((ids[id(c)], c.length))
        post.append((nid, kids))
    return _prune(post, _leaf_map(leaves), rates)


def _log_topology_prior(n_taxa: int) -> float:
    # uniform over (2n-5)!! unrooted binary topologies
    count = 1
    for k in range(3, 2 * n_taxa - 4, 2):
        count *= k
    return -math.log(count) if n_taxa > 3 else 0.0


def log_prior(lengths: Iterable[float], n_taxa: int, cfg: McmcConfig, shape: Optional[float] = None) -> float:
    lam = cfg.branch_prior_rate
    lengths = list(lengths)
    if any(t <= 0 for t in lengths):
        return -math.inf
    lp = _log_topology_prior(n_taxa) + sum(math.log(lam) - lam * t for t in lengths)
    if cfg.rate_mode == "uniform":
        lo, hi = cfg.shape_bounds
        if shape is None or not lo <= shape <= hi:
            return -math.inf
        lp -= math.log(hi - lo)
    return lp


# ---------------------------------------------------------------------------
# Unrooted working tree
# ---------------------------------------------------------------------------


class _UTree:
    """
    Unrooted binary tree: leaves ``0..n-1`` (matrix taxon order), internal
    nodes ``n..2n-3``.  ``nbr`` holds adjacency lists and ``length`` maps
    ``(min, max)`` edge keys to lengths.
    """

    __slots__ = ("n", "nbr", "length")

    def __init__(self, n: int, nbr: list, length: dict):
        self.n = n
        self.nbr = nbr
        self.length = length

    def copy(self) -> "_UTree":
        return _UTree(self.n, [list(x) for x in self.nbr], dict(self.length))

    @staticmethod
    def edge(a: int, b: int) -> tuple:
        return (a, b) if a < b else (b, a)

    def internal_edges(self) -> list:
        return [e for e in self.length if e[0] >= self.n and e[1] >= self.n]

    def postorder(self):
        top = self.n
        out = []
        stack = [(top, -1, False)]
        while stack:
            node, parent, seen = stack.pop()
            kids = [c for c in self.nbr[node] if c != parent]
            if seen or not kids:
                out.append((node if node >= self.n else ("leaf", node),
                            [(c if c >= self.n else ("leaf", c), self.length[self.edge(node, c)]) for c in kids]))
            else:
                stack.append((node, parent, True))
                for c in reversed(kids):
                    stack.append((c, node, False))
        return out

    def to_tree(self, taxa: Sequence[str]) -> PhyloTree:
        def build(node: int, parent: int) -> Node:
            if node < self.n:
                return Node(name=taxa[node], length=self.length[self.edge(node, parent)])
            nd = Node(children=[build(c, node) for c in self.nbr[node] if c != parent])
            if parent >= 0:
                nd.length = self.length[self.edge(node, parent)]
            return nd

        return PhyloTree(build(self.n, -1), rooted=False)

    def split_masks(self) -> list:
        """Bitmasks of the side away from leaf 0, one per internal edge."""
        below = {}
        order = []
        stack = [(0, -1)]
        while stack:
            node, parent = stack.pop()
            order.append((node, parent))
            for c in self.nbr[node]:
                if c != parent:
                    stack.append((c, node))
        masks = []
        for node, parent in reversed(order):
            mask = 1 << node if node < self.n else 0
            for c in self.nbr[node]:
                if c != parent:
                    mask |= below[c]
            below[node] = mask
            if node >= self.n and parent >= self.n:
                masks.append(mask)
        return masks

    @classmethod
    def from_tree(cls, tree: PhyloTree, taxa: Sequence[str], default_length: float) -> "_UTree":
        base = unroot(tree) if tree.rooted else tree
        adj, names, _ = _to_graph(base)
        n = len(taxa)
        index = {t: i for i, t in enumerate(taxa)}
        remap = {}
        nxt = n
        for gid in sorted(adj):
            if gid in names:
                remap[gid] = index[names[gid]]
            else:
                remap[gid] = nxt
                nxt += 1
        if nxt != 2 * n - 2:
            raise ValueError("MCMC needs a binary tree")
        nbr = [[] for _ in range(2 * n - 2)]
        length = {}
        for gid, lst in adj.items():
            for other, ln, _ in lst:
                a, b = remap[gid], remap[other]
                nbr[a].append(b)
                length[cls.edge(a, b)] = default_length if ln is None or ln <= 0 else ln
        ut = cls(n, nbr, length)
        if any(len(nbr[v]) != 3 for v in range(n, 2 * n - 2)):
            raise ValueError("MCMC needs a binary tree")
        return ut

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, length: float) -> "_UTree":
        nbr = [[] for _ in range(2 * n - 2)]
        edges = {}
        hub = n
        for leaf in (0, 1, 2):
            nbr[hub].append(leaf)
            nbr[leaf].append(hub)
            edges[cls.edge(hub, leaf)] = length
        nxt = n + 1
        for leaf in range(3, n):
            keys = sorted(edges)
            a, b = keys[int(rng.integers(len(keys)))]
            mid = nxt
            nxt += 1
            del edges[(a, b)]
            nbr[a][nbr[a].index(b)] = mid
            nbr[b][nbr[b].index(a)] = mid
            nbr[mid] = [a, b, leaf]
            nbr[leaf].append(mid)
            for x in (a, b, leaf):
                edges[cls.edge(mid, x)] = length
        return cls(n, nbr, edges)


# ---------------------------------------------------------------------------
# Chains
# ---------------------------------------------------------------------------


def chain_beta(i: int, temperature: float) -> float:
    """Power applied to the posterior by chain ``i`` (1-based)."""
    if i < 1:
        raise ValueError("chain index starts at 1")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    return 1.0 / (1.0 + temperature * (i - 1))


def swap_probability(beta_i: float, beta_j: float, logpost_i: float, logpost_j: float) -> float:
    """Acceptance probability for exchanging the states of two chains."""
    x = (beta_i - beta_j) * (logpost_j - logpost_i)
    if x >= 0:
        return 1.0
    return math.exp(x)


@dataclass
class ChainState:
    """A chain's current tree, gamma shape, cached log posterior and heat index."""

    tree: PhyloTree
    log_posterior: float
    heat_index: int = 1
    temperature: float = 0.2
    gamma_shape: Optional[float] = None

    @property
    def beta(self) -> float:
        return chain_beta(self.heat_index, self.temperature)


def _category_rates(cfg: McmcConfig, shape: Optional[float]) -> np.ndarray:
    if cfg.rate_mode == "off":
        return np.ones(1)
    return gamma_rates(shape if shape is not None else cfg.gamma_shape, cfg.n_categories)


def log_posterior(state: ChainState, m: CharacterMatrix, cfg: McmcConfig = McmcConfig()) -> float:
    """Unnormalised log posterior of a chain state."""
    tree = state.tree
    lengths = [n.length for n in tree.root.preorder() if n is not tree.root]
    if any(t is None for t in lengths):
        raise ValueError("posterior needs branch lengths")
    shape = state.gamma_shape if state.gamma_shape is not None else cfg.gamma_shape
    lp = log_prior(lengths, tree.n_taxa, cfg, shape)
    if lp == -math.inf:
        return lp
    return lp + log_likelihood(tree, m, _category_rates(cfg, shape))


class _Model:
    def __init__(self, m: CharacterMatrix, cfg: McmcConfig):
        if m.n_taxa < 3:
            raise ValueError("MCMC needs at least three taxa")
        self.m = m
        self.cfg = cfg
        self.taxa = m.taxa
        self.leaf_map = _leaf_map(_leaf_partials(m))
        self._rates_cache: dict = {}

    def rates(self, shape: Optional[float]) -> np.ndarray:
        key = None if self.cfg.rate_mode == "off" else shape
        r = self._rates_cache.get(key)
        if r is None:
            r = _category_rates(self.cfg, shape)
            if len(self._rates_cache) > 256:
                self._rates_cache.clear()
            self._rates_cache[key] = r
        return r

    def log_posterior(self, ut: _UTree, shape: Optional[float]) -> float:
        lp = log_prior(ut.length.values(), ut.n, self.cfg, shape)
        if lp == -math.inf:
            return lp
        return lp + _prune(ut.postorder(), self.leaf_map, self.rates(shape))


class _Chain:
    def __init__(self, model: _Model, tree: _UTree, shape: Optional[float], rng: np.random.Generator):
        self.model = model
        self.tree = tree
        self.shape = shape
        self.rng = rng
        self.logp = model.log_posterior(tree, shape)
        self.proposed = {"nni": 0, "multiplier": 0, "shape": 0}
        self.accepted = {"nni": 0, "multiplier": 0, "shape": 0}

    def _accept(self, move: str, new_tree, new_shape, log_hastings: float, beta: float) -> None:
        self.proposed[move] += 1
        new_logp = self.model.log_posterior(new_tree, new_shape)
        if new_logp == -math.inf:
            return
        log_r = beta * (new_logp - self.logp) + log_hastings
        if log_r >= 0 or self.rng.random() < math.exp(log_r):
            self.tree, self.shape, self.logp = new_tree, new_shape, new_logp
            self.accepted[move] += 1

    def step(self, beta: float) -> None:
        cfg = self.model.cfg
        rng = self.rng
        internal = self.tree.internal_edges()
        topo = cfg.freeze_branch_lengths or rng.random() < cfg.topology_move_prob
        if topo and internal:
            new = self.tree.copy()
            u, v = internal[int(rng.integers(len(internal)))]
            a_opts = [x for x in new.nbr[u] if x != v]
            b_opts = [x for x in new.nbr[v] if x != u]
            a = a_opts[int(rng.integers(len(a_opts)))]
            b = b_opts[int(rng.integers(len(b_opts)))]
            la = new.length.pop(new.edge(u, a))
            lb = new.length.pop(new.edge(v, b))
            new.nbr[u][new.nbr[u].index(a)] = b
            new.nbr[v][new.nbr[v].index(b)] = a
            new.nbr[a][new.nbr[a].index(u)] = v
            new.nbr[b][new.nbr[b].index(v)] = u
            new.length[new.edge(v, a)] = la
            new.length[new.edge(u, b)] = lb
            self._accept("nni", new, self.shape, 0.0, beta)
        elif not cfg.freeze_branch_lengths:
            new = self.tree.copy()
            keys = sorted(new.length)
            e = keys[int(rng.integers(len(keys)))]
            mult = math.exp(MULTIPLIER_TUNING * (rng.random() - 0.5))
            new.length[e] *= mult
            self._accept("multiplier", new, self.shape, math.log(mult), beta)
        if cfg.rate_mode == "uniform":
            mult = math.exp(MULTIPLIER_TUNING * (rng.random() - 0.5))
            self._accept("shape", self.tree, self.shape * mult, math.log(mult), beta)


# ---------------------------------------------------------------------------
# Samples and summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleRecord:
    generation: int
    log_posterior: float
    newick: str
    splits: frozenset


@dataclass
class PosteriorSample:
    """Cold-chain samples of one analysis, in generation order."""

    taxa: tuple
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: SampleRecord) -> None:
        if self.records and record.generation <= self.records[-1].generation:
            raise ValueError("sample generations must increase")
        self.records.append(record)

    def after_burnin(self, fraction: float) -> "PosteriorSample":
        """Copy without the first ``fraction`` of the records."""
        cut = int(math.floor(len(self.records) * fraction))
        return PosteriorSample(self.taxa, self.records[cut:])

    def trees(self) -> list:
        return [parse_newick(r.newick) for r in self.records]

    def log_lines(self) -> list:
        return [f"{r.generation}\t{r.log_posterior:.6f}\t{r.newick}" for r in self.records]

    @classmethod
    def from_trees(cls, trees: Sequence[PhyloTree], start: int = 1) -> "PosteriorSample":
        """Sample built from given trees (log posterior recorded as 0)."""
        if not trees:
            raise ValueError("empty sample")
        taxa = trees[0].taxa
        out = cls(taxa)
        for g, t in enumerate(trees, start=start):
            out.append(SampleRecord(g, 0.0, write_newick(t), frozenset(splits_of(t))))
        return out


@dataclass
class McmcResult:
    samples: tuple
    generations: int
    asdsf: float
    converged: bool
    acceptance: dict
    asdsf_trace: list = field(default_factory=list)
    swaps_proposed: int = 0
    swaps_accepted: int = 0

    def combined(self, burnin_fraction: float) -> PosteriorSample:
        a, b = (s.after_burnin(burnin_fraction) for s in self.samples)
        return PosteriorSample(a.taxa, a.records + b.records)

    def diagnostics_lines(self) -> list:
        lines = [
            f"generations\t{self.generations}",
            f"asdsf\t{self.asdsf:.6f}",
            f"converged\t{str(self.converged).lower()}",
        ]
        for move, rate in sorted(self.acceptance.items()):
            lines.append(f"acceptance_{move}\t{rate:.4f}")
        if self.swaps_proposed:
            lines.append(f"acceptance_swap\t{self.swaps_accepted / self.swaps_proposed:.4f}")
        return lines


def split_frequencies(sample: PosteriorSample) -> dict:
    """Fraction of sampled trees containing each non-trivial split."""
    if not len(sample):
        raise ValueError("empty sample")
    counts: dict = {}
    for r in sample.records:
        for s in r.splits:
            counts[s] = counts.get(s, 0) + 1
    n = len(sample.records)
    return {s: c / n for s, c in counts.items()}


def asdsf(a: PosteriorSample, b: PosteriorSample, min_freq: float = 0.1) -> float:
    """
    Mean absolute difference of split frequencies between two samples,
    over splits reaching ``min_freq`` in at least one of them.
    """
    fa, fb = split_frequencies(a), split_frequencies(b)
    keys = [s for s in set(fa) | set(fb) if max(fa.get(s, 0.0), fb.get(s, 0.0)) >= min_freq]
    if not keys:
        return 0.0
    return float(np.mean([abs(fa.get(s, 0.0) - fb.get(s, 0.0)) for s in keys]))


def _build_hierarchy(taxa: Sequence[str], groups: list) -> Node:
    """Nest pairwise compatible taxon groups under one top node."""
    groups = sorted(groups, key=lambda g: (len(g[0]), sorted(g[0])))
    owner = {t: Node(name=t) for t in taxa}
    for members, freq in groups:
        node = Node(support=freq)
        seen = set()
        for t in sorted(members):
            top = owner[t]
            if id(top) not in seen:
                seen.add(id(top))
                node.children.append(top)
        for t in members:
            owner[t] = node
    root = Node()
    seen = set()
    for t in sorted(taxa):
        top = owner[t]
        if id(top) not in seen:
            seen.add(id(top))
            root.children.append(top)
    return root


def _compatible(a: frozenset, b: frozenset) -> bool:
    return a <= b or b <= a or not (a & b)


def consensus_tree(sample: PosteriorSample, threshold: float = 0.5, rooted: bool = False) -> PhyloTree:
    """
    Majority-rule consensus.

    Groups (splits, or clades when ``rooted``) with frequency above
    ``threshold`` are kept, best-supported first, skipping any that conflict
    with those already kept; internal nodes carry their frequency in
    ``support``.  The result may be multifurcating.
    """
    if not len(sample):
        raise ValueError("empty sample")
    n = len(sample.records)
    if rooted:
        counts: dict = {}
        for t in sample.trees():
            for c in clades_of(t):
                counts[c] = counts.get(c, 0) + 1
        freqs = {c: k / n for c, k in counts.items()}
    else:
        freqs = split_frequencies(sample)
    kept = []
    for group, f in sorted(freqs.items(), key=lambda kv: (-kv[1], len(kv[0]), sorted(kv[0]))):
        if f > threshold and all(_compatible(group, g) for g, _ in kept):
            kept.append((group, f))
    root = _build_hierarchy(sample.taxa, kept)
    return PhyloTree(root, rooted=rooted)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def _record(ut: _UTree, gen: int, logp: float, taxa: Sequence[str], smallest_bit: int) -> SampleRecord:
    tree = ut.to_tree(taxa)
    full = (1 << ut.n) - 1
    splits = set()
    for mask in ut.split_masks():
        if mask & smallest_bit:
            mask = full ^ mask
        splits.add(frozenset(taxa[i] for i in range(ut.n) if mask >> i & 1))
    return SampleRecord(gen, logp, write_newick(tree), frozenset(splits))


class _Analysis:
    def __init__(self, model: _Model, cfg: McmcConfig, seed_seq: np.random.SeedSequence, initial: Optional[PhyloTree]):
        streams = seed_seq.spawn(cfg.n_chains + 1)
        self.swap_rng = np.random.Generator(np.random.PCG64(streams[-1]))
        self.chains = []
        shape = cfg.gamma_shape if cfg.rate_mode != "off" else None
        for k in range(cfg.n_chains):
            rng = np.random.Generator(np.random.PCG64(streams[k]))
            if initial is not None:
                ut = _UTree.from_tree(initial, model.taxa, cfg.initial_length)
            else:
                ut = _UTree.random(model.m.n_taxa, rng, cfg.initial_length)
            self.chains.append(_Chain(model, ut, shape, rng))
        self.betas = [chain_beta(i + 1, cfg.temperature) for i in range(cfg.n_chains)]
        self.sample = PosteriorSample(model.taxa)
        self.swaps_proposed = 0
        self.swaps_accepted = 0

    def generation(self) -> None:
        for chain, beta in zip(self.chains, self.betas):
            chain.step(beta)
        if len(self.chains) > 1:
            i, j = sorted(int(x) for x in self.swap_rng.choice(len(self.chains), size=2, replace=False))
            ci, cj = self.chains[i], self.chains[j]
            p = swap_probability(self.betas[i], self.betas[j], ci.logp, cj.logp)
            self.swaps_proposed += 1
            if p >= 1.0 or self.swap_rng.random() < p:
                ci.tree, cj.tree = cj.tree, ci.tree
                ci.shape, cj.shape = cj.shape, ci.shape
                ci.logp, cj.logp = cj.logp, ci.logp
                self.swaps_accepted += 1


def _smallest_bit(taxa: Sequence[str]) -> int:
    return 1 << list(taxa).index(min(taxa))


def run_chain(
    m: CharacterMatrix,
    cfg: McmcConfig,
    generations: int,
    beta: float = 1.0,
    initial: Optional[PhyloTree] = None,
    seed: Optional[int] = None,
) -> PosteriorSample:
    """Single Metropolis chain targeting ``posterior ** beta``; no coupling."""
    model = _Model(m, cfg)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    ut = _UTree.from_tree(initial, m.taxa, cfg.initial_length) if initial is not None else _UTree.random(m.n_taxa, rng, cfg.initial_length)
    shape = cfg.gamma_shape if cfg.rate_mode != "off" else None
    chain = _Chain(model, ut, shape, rng)
    out = PosteriorSample(m.taxa)
    bit = _smallest_bit(m.taxa)
    for g in range(1, generations + 1):
        chain.step(beta)
        if g % cfg.sample_interval == 0:
            out.append(_record(chain.tree, g, chain.logp, m.taxa, bit))
    return out


def mc3_run(m: CharacterMatrix, cfg: McmcConfig = McmcConfig(), initial: Optional[PhyloTree] = None) -> McmcResult:
    """
    Two independent Metropolis-coupled analyses run until the split-frequency
    deviation between them (after burn-in) drops below ``cfg.threshold`` or
    the generation cap is hit.  Deterministic for a given configuration.
    """
    model = _Model(m, cfg)
    root_seq = np.random.SeedSequence(cfg.seed)
    analyses = [_Analysis(model, cfg, s, initial) for s in root_seq.spawn(2)]
    bit = _smallest_bit(m.taxa)
    gen = 0
    current = math.inf
    converged = False
    trace = []
    while gen < cfg.max_generations:
        gen += 1
        for an in analyses:
            an.generation()
            if gen % cfg.sample_interval == 0:
                cold = an.chains[0]
                an.sample.append(_record(cold.tree, gen, cold.logp, m.taxa, bit))
        if gen % cfg.check_interval == 0 or gen == cfg.max_generations:
            a, b = (an.sample.after_burnin(cfg.burnin_fraction) for an in analyses)
            if len(a) and len(b):
                current = asdsf(a, b, cfg.asdsf_min_freq)
                trace.append((gen, current))
                if gen >= cfg.min_generations and current < cfg.threshold:
                    converged = True
                    break
    proposed: dict = {}
    accepted: dict = {}
    for an in analyses:
        for ch in an.chains:
            for k, v in ch.proposed.items():
                proposed[k] = proposed.get(k, 0) + v
                accepted[k] = accepted.get(k, 0) + ch.accepted[k]
    rates = {k: accepted[k] / proposed[k] for k in proposed if proposed[k]}
    return McmcResult(
        samples=tuple(an.sample for an in analyses),
        generations=gen,
        asdsf=current,
        converged=converged,
        acceptance=rates,
        asdsf_trace=trace,
        swaps_proposed=sum(an.swaps_proposed for an in analyses),
        swaps_accepted=sum(an.swaps_accepted for an in analyses),
    )
