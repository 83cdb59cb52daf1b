"""Model-based tree growth, pruning, prediction, and L1 refitting.

The grower fits a ridge main-effects model at every node and searches for
the best binary split by sweeping candidate thresholds with cumulative
per-bin gram statistics: each (node, feature) pair costs exactly one pass
over the node's raw rows to bin-aggregate, after which every candidate
partition is scored from the small aggregated systems.  Candidate
thresholds are global quantile edges of the root training data, reused at
every node, so bin membership per record is computed once.

Split scoring is vectorized across candidates (stacked standardize /
eigendecompose / solve); the winning candidate is then re-fitted through
the scalar :mod:`splinetree.gram` path so the retained models and gains
come from the reference implementation.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import basis
from .errors import DataError, NumericalError
from .gram import (
    NULL_SPACE_RTOL,
    GramStats,
    NodeModel,
    fit_node,
    gcv_loss,
    gram_accumulate,
    gram_merge,
    gram_subtract,
    zero_gram,
)

_CONSTANT_COLUMN_RTOL = 1e-12

# Above this cardinality, categorical split search falls back from
# exhaustive subset enumeration to the ordered-by-node-mean scan.
EXHAUSTIVE_CATEGORY_LIMIT = 12


@dataclass(frozen=True)
class SplitCandidate:
    """A binary split rule.

    Continuous: go left iff ``x <= threshold``.  Categorical: go left iff
    the value is in ``categories`` (a proper, nonempty subset canonicalized
    to contain the first level); unseen values also route left.
    """

    feature: str
    threshold: float | None = None
    categories: tuple | None = None


@dataclass
class TreeNode:
    id: int
    depth: int
    count: int
    model: NodeModel
    split: SplitCandidate | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    dsse: float = 0.0
    effect_means: np.ndarray | None = None
    flags: tuple[str, ...] = ()

    @property
    def r2(self) -> float:
        return self.model.r2

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    def nodes(self) -> Iterator["TreeNode"]:
        """All nodes in breadth-first (id) order."""
        queue = deque([self])
        while queue:
            node = queue.popleft()
            yield node
            if node.left is not None:
                queue.append(node.left)
            if node.right is not None:
                queue.append(node.right)

    def leaves(self) -> Iterator["TreeNode"]:
        return (node for node in self.nodes() if node.is_leaf)

    def node_by_id(self, node_id: int) -> "TreeNode":
        for node in self.nodes():
            if node.id == node_id:
                return node
        raise KeyError(f"no node with id {node_id}")


@dataclass(frozen=True)
class GrowConfig:
    """Stopping rules and fitting parameters for tree growth.

    ``lam`` is the ridge weight; a sequence is treated as a small grid
    selected per fit by GCV (one eigendecomposition is reused across the
    grid).  ``loss`` selects the split-search metric: "gcv" compares
    degrees-of-freedom-penalized SSE, "sse" plain SSE.
    """

    max_depth: int = 5
    min_samples_leaf: int | None = None
    lam: float | tuple = 1e-3
    num_bins: int = 50
    loss: str = "gcv"
    min_gain: float = 0.0
    threads: int = 1

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.num_bins < 2:
            raise ValueError("num_bins must be >= 2")
        if self.min_gain < 0:
            raise ValueError("min_gain must be >= 0")
        if self.loss not in ("gcv", "sse"):
            raise ValueError("loss must be 'gcv' or 'sse'")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def lam_values(self) -> tuple[float, ...]:
        if np.isscalar(self.lam):
            return (float(self.lam),)
        return tuple(float(v) for v in self.lam)


@dataclass
class SplitSearchEvent:
    """One bin-aggregation pass recorded during split search."""

    node_id: int
    feature: str
    rows_accumulated: int
    node_count: int
    num_bins: int


class SplitInstrumentation:
    """Tallies raw-row gram passes, used to verify the one-pass guarantee."""

    def __init__(self):
        self.events: list[SplitSearchEvent] = []

    def record(self, node_id, feature, rows_accumulated, node_count, num_bins):
        self.events.append(
            SplitSearchEvent(node_id, feature, rows_accumulated, node_count, num_bins)
        )


def candidate_edges(values, num_bins: int) -> np.ndarray:
    """Global candidate thresholds for one continuous feature.

    Deduplicated midpoint quantile edges of the root training values at
    levels ``1/B .. (B-1)/B``.  Edges that would send every row to one side
    are dropped, and edges inducing the same partition collapse to the
    largest of the run.  A constant feature yields an empty list.
    """
    if num_bins < 2:
        raise ValueError("num_bins must be >= 2")
    x = np.asarray(values, dtype=np.float64)
    levels = np.arange(1, num_bins) / num_bins
    edges = np.unique(np.quantile(x, levels, method="midpoint"))
    xs = np.sort(x)
    left_counts = np.searchsorted(xs, edges, side="right")
    keep = (left_counts > 0) & (left_counts < x.size)
    if edges.size > 1:
        # same left count as the next edge => same partition; keep the run's last
        keep[:-1] &= left_counts[:-1] != left_counts[1:]
    return edges[keep]


def bin_values(values, edges) -> np.ndarray:
    """Bin index per value given candidate edges (len(edges) + 1 bins).

    Threshold ``edges[j]`` sends bins ``0..j`` left, matching the routing
    rule ``x <= edges[j]``.
    """
    return np.searchsorted(edges, np.asarray(values, dtype=np.float64), side="left")


def bin_grams(
    rows,
    responses,
    bin_ids,
    num_bins: int,
    *,
    instrumentation: SplitInstrumentation | None = None,
    node_id: int = -1,
    feature: str = "",
) -> list[GramStats]:
    """Per-bin gram statistics over the full design, in one pass.

    Rows are grouped by bin id and aggregated group by group; the total
    number of rows fed to the accumulator equals the number of input rows
    (disjoint cover), which is the property the instrumentation records.
    Empty bins yield zero statistics.
    """
    x = np.asarray(rows, dtype=np.float64)
    y = np.asarray(responses, dtype=np.float64)
    b = np.asarray(bin_ids)
    order = np.argsort(b, kind="stable")
    xs, ys, bs = x[order], y[order], b[order]
    edges_idx = np.searchsorted(bs, np.arange(num_bins + 1), side="left")
    grams = []
    for k in range(num_bins):
        lo, hi = edges_idx[k], edges_idx[k + 1]
        if lo == hi:
            grams.append(zero_gram(x.shape[1]))
            continue
        xk, yk = xs[lo:hi], ys[lo:hi]
        grams.append(
            GramStats(xtx=xk.T @ xk, xty=xk.T @ yk, yty=float(yk @ yk), count=hi - lo)
        )
    if instrumentation is not None:
        instrumentation.record(
            node_id, feature, rows_accumulated=x.shape[0],
            node_count=x.shape[0], num_bins=num_bins,
        )
    return grams


@dataclass
class FeatureBins:
    """Node-restricted per-bin statistics for one feature's sweep."""

    feature: str
    index: int  # position in schema order; first tie-break key
    kind: str  # "continuous" | "categorical"
    grams: list[GramStats]
    edges: np.ndarray | None = None  # continuous: threshold per bin boundary
    levels: tuple | None = None  # categorical: full training level list


@dataclass(frozen=True)
class BestSplit:
    candidate: SplitCandidate
    left_model: NodeModel
    right_model: NodeModel
    gain: float
    left_gram: GramStats
    right_gram: GramStats


@dataclass(frozen=True)
class _FeatureBest:
    """Per-feature sweep winner, scored by the batched path."""

    gain: float
    feature_index: int
    bins: FeatureBins
    left_bin_indices: tuple[int, ...]
    candidate: SplitCandidate


def _node_split_loss(model: NodeModel, loss: str) -> float:
    """Per-node loss used in split comparison, in SSE units.

    For "gcv" this is count * gcv_loss = sse / (1 - df/n)**2, so losses of
    sibling nodes stay additive and comparable with the parent's.
    """
    if loss == "sse":
        return model.sse
    return model.count * gcv_loss(model.sse, model.count, model.effective_df)


def _batch_child_losses(xtx, xty, yty, counts, lam_values, loss):
    """Losses of stacked candidate child systems.

    Mirrors gram.ridge_solve arithmetic (standardize, eigendecompose,
    shrink, back-transform, SSE from statistics) across a leading candidate
    axis.  Returns the per-candidate loss minimized over the lambda grid;
    saturated candidates (effective df >= count) come back infinite.
    """
    n = counts.astype(np.float64)
    mean = xtx[:, 0, 1:] / n[:, None]
    ex2 = np.diagonal(xtx, axis1=1, axis2=2)[:, 1:] / n[:, None]
    var = np.maximum(ex2 - mean**2, 0.0)
    degenerate = var <= _CONSTANT_COLUMN_RTOL * np.maximum(ex2, 1.0)
    scale = np.sqrt(np.where(degenerate, 1.0, var))
    centered = xtx[:, 1:, 1:] - n[:, None, None] * mean[:, :, None] * mean[:, None, :]
    block = centered / (scale[:, :, None] * scale[:, None, :])
    b = (xty[:, 1:] - mean * xty[:, 0][:, None]) / scale
    try:
        w, v = np.linalg.eigh(block)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("batched eigendecomposition failed") from exc
    d = np.maximum(w, 0.0)
    top = np.maximum(w[:, -1], 0.0)
    null = (w < NULL_SPACE_RTOL * top[:, None]) | (top <= 0.0)[:, None]
    proj = np.einsum("cij,ci->cj", v, b)
    ybar = xty[:, 0] / n

    best = np.full(counts.shape[0], np.inf)
    for lam in lam_values:
        if lam == 0.0:
            recip = np.where(
                null, 0.0, np.divide(1.0, d, out=np.ones_like(d), where=d > 0)
            )
        else:
            recip = 1.0 / (d + lam)
        gamma = np.einsum("cij,cj->ci", v, recip * proj)
        beta1 = gamma / scale
        beta0 = ybar - np.einsum("ci,ci->c", beta1, mean)
        beta = np.concatenate([beta0[:, None], beta1], axis=1)
        sse = yty - 2.0 * np.einsum("ci,ci->c", beta, xty) + np.einsum(
            "ci,cij,cj->c", beta, xtx, beta
        )
        sse = np.maximum(sse, 0.0)
        if loss == "sse":
            value = sse
        else:
            shrink = np.divide(d, d + lam, out=np.zeros_like(d), where=(d + lam) > 0)
            edf = 1.0 + np.sum(np.where(null, 0.0, shrink), axis=1)
            ok = edf < n
            value = np.where(ok, sse / np.where(ok, (1.0 - edf / n) ** 2, 1.0), np.inf)
        best = np.minimum(best, value)
    return best


def _stack(grams: Sequence[GramStats]):
    xtx = np.stack([g.xtx for g in grams])
    xty = np.stack([g.xty for g in grams])
    yty = np.array([g.yty for g in grams])
    counts = np.array([g.count for g in grams])
    return xtx, xty, yty, counts


def _right_stats(node: GramStats, xtx_l, xty_l, yty_l, cnt_l):
    xtx_r = node.xtx[None, :, :] - xtx_l
    diag = np.einsum("cii->ci", xtx_r)
    np.maximum(diag, 0.0, out=diag)
    xty_r = node.xty[None, :] - xty_l
    yty_r = np.maximum(node.yty - yty_l, 0.0)
    cnt_r = node.count - cnt_l
    return xtx_r, xty_r, yty_r, cnt_r


def _sweep_continuous(fb, node_gram, parent_loss, config, min_leaf):
    edges = fb.edges
    if edges is None or edges.size == 0:
        return None
    xtx, xty, yty, counts = _stack(fb.grams)
    cum_xtx = np.cumsum(xtx, axis=0)
    cum_xty = np.cumsum(xty, axis=0)
    cum_yty = np.cumsum(yty)
    cum_cnt = np.cumsum(counts)
    j_all = np.arange(edges.size)
    cnt_l = cum_cnt[j_all]
    feasible = (cnt_l >= min_leaf) & (node_gram.count - cnt_l >= min_leaf)
    # empty bins duplicate the previous partition; keep only distinct cuts
    distinct = np.ones(edges.size, dtype=bool)
    distinct[1:] = counts[1 : edges.size] > 0
    sel = np.nonzero(feasible & distinct)[0]
    if sel.size == 0:
        return None
    xtx_l, xty_l = cum_xtx[sel], cum_xty[sel]
    yty_l, c_l = cum_yty[sel], cum_cnt[sel]
    xtx_r, xty_r, yty_r, c_r = _right_stats(node_gram, xtx_l, xty_l, yty_l, c_l)
    loss_l = _batch_child_losses(xtx_l, xty_l, yty_l, c_l, config.lam_values, config.loss)
    loss_r = _batch_child_losses(xtx_r, xty_r, yty_r, c_r, config.lam_values, config.loss)
    gains = parent_loss - (loss_l + loss_r)
    best = int(np.argmax(gains))
    if not np.isfinite(gains[best]):
        return None
    j = int(sel[best])
    return _FeatureBest(
        gain=float(gains[best]),
        feature_index=fb.index,
        bins=fb,
        left_bin_indices=tuple(range(j + 1)),
        candidate=SplitCandidate(feature=fb.feature, threshold=float(edges[j])),
    )


def _canonical_subsets(n_levels: int):
    """All proper nonempty left subsets containing level 0, in canonical
    (lexicographic tuple) order."""
    subsets = []
    for mask in range(2 ** (n_levels - 1) - 1):
        left = (0,) + tuple(
            i + 1 for i in range(n_levels - 1) if mask >> i & 1
        )
        subsets.append(left)
    subsets.sort()
    return subsets


def _sweep_categorical(fb, node_gram, parent_loss, config, min_leaf):
    levels = fb.levels
    c = len(levels)
    counts = np.array([g.count for g in fb.grams])
    if c <= EXHAUSTIVE_CATEGORY_LIMIT:
        subsets = _canonical_subsets(c)
    else:
        # order nonempty levels by node-mean response, scan the c-1 cuts,
        # and canonicalize each prefix to the side containing level 0
        nonempty = [k for k in range(c) if counts[k] > 0]
        means = [fb.grams[k].xty[0] / counts[k] for k in nonempty]
        ordered = [k for _, k in sorted(zip(means, nonempty), key=lambda t: (t[0], t[1]))]
        subsets = []
        for cut in range(1, len(ordered)):
            prefix = set(ordered[:cut])
            if 0 not in prefix:
                prefix = set(range(c)) - prefix
            if 0 < len(prefix) < c:
                subsets.append(tuple(sorted(prefix)))
        subsets = sorted(set(subsets))
    if not subsets:
        return None

    membership = np.zeros((len(subsets), c))
    for i, subset in enumerate(subsets):
        membership[i, list(subset)] = 1.0
    cnt_l = (membership @ counts).astype(np.int64)
    feasible = (cnt_l >= min_leaf) & (node_gram.count - cnt_l >= min_leaf)
    sel = np.nonzero(feasible)[0]
    if sel.size == 0:
        return None

    xtx, xty, yty, _ = _stack(fb.grams)
    best_gain, best_subset = -np.inf, None
    chunk = max(1, (1 << 22) // max(node_gram.dim**2, 1))
    for lo in range(0, sel.size, chunk):
        part = sel[lo : lo + chunk]
        S = membership[part]
        xtx_l = np.tensordot(S, xtx, axes=1)
        xty_l = S @ xty
        yty_l = S @ yty
        c_l = cnt_l[part]
        xtx_r, xty_r, yty_r, c_r = _right_stats(node_gram, xtx_l, xty_l, yty_l, c_l)
        loss_l = _batch_child_losses(xtx_l, xty_l, yty_l, c_l, config.lam_values, config.loss)
        loss_r = _batch_child_losses(xtx_r, xty_r, yty_r, c_r, config.lam_values, config.loss)
        gains = parent_loss - (loss_l + loss_r)
        i = int(np.argmax(gains))
        if np.isfinite(gains[i]) and gains[i] > best_gain:
            best_gain = float(gains[i])
            best_subset = subsets[part[i]]
    if best_subset is None:
        return None
    return _FeatureBest(
        gain=best_gain,
        feature_index=fb.index,
        bins=fb,
        left_bin_indices=best_subset,
        candidate=SplitCandidate(
            feature=fb.feature,
            categories=tuple(levels[k] for k in best_subset),
        ),
    )


def _sweep_feature(fb, node_gram, parent_loss, config, min_leaf):
    if fb.kind == "continuous":
        return _sweep_continuous(fb, node_gram, parent_loss, config, min_leaf)
    return _sweep_categorical(fb, node_gram, parent_loss, config, min_leaf)


def best_split(
    node_gram: GramStats,
    node_model: NodeModel,
    feature_bins: Iterable[FeatureBins],
    config: GrowConfig,
    min_samples_leaf: int,
) -> BestSplit | None:
    """Best feasible split of a node, or None.

    Sweeps every feature's candidate partitions from cumulative bin
    statistics; ties break to the lower feature index, then the lower
    threshold, then the canonically smaller left category subset.  The
    winner's children are re-fitted through the scalar solver and the
    returned gain is recomputed from those fits.
    """
    parent_loss = _node_split_loss(node_model, config.loss)

    if config.threads > 1:
        bins_list = list(feature_bins)
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(
                pool.map(
                    lambda fb: _sweep_feature(fb, node_gram, parent_loss, config, min_samples_leaf),
                    bins_list,
                )
            )
    else:
        results = [
            _sweep_feature(fb, node_gram, parent_loss, config, min_samples_leaf)
            for fb in feature_bins
        ]

    best = None
    for res in results:
        if res is None:
            continue
        if best is None or res.gain > best.gain or (
            res.gain == best.gain and res.feature_index < best.feature_index
        ):
            best = res
    if best is None:
        return None

    left_gram = best.bins.grams[best.left_bin_indices[0]]
    for k in best.left_bin_indices[1:]:
        left_gram = gram_merge(left_gram, best.bins.grams[k])
    right_gram = gram_subtract(node_gram, left_gram)
    left_model = fit_node(left_gram, config.lam)
    right_model = fit_node(right_gram, config.lam)
    gain = parent_loss - (
        _node_split_loss(left_model, config.loss)
        + _node_split_loss(right_model, config.loss)
    )
    return BestSplit(
        candidate=best.candidate,
        left_model=left_model,
        right_model=right_model,
        gain=gain,
        left_gram=left_gram,
        right_gram=right_gram,
    )


@dataclass
class _RootBinning:
    """Per-feature candidate sets and per-record bin ids, fixed at the root."""

    kinds: dict
    edges: dict
    bin_ids: dict
    levels: dict
    order: list  # feature names in schema order, excluded features dropped


def _prepare_binning(dataset, spec, config) -> _RootBinning:
    kinds, edges, bin_ids, levels, order = {}, {}, {}, {}, []
    for feat in dataset.features:
        if feat.name in spec.excluded:
            continue
        values = dataset.columns[feat.name]
        if feat.kind == basis.CONTINUOUS:
            e = candidate_edges(values, config.num_bins)
            if e.size == 0:
                continue
            kinds[feat.name] = "continuous"
            edges[feat.name] = e
            bin_ids[feat.name] = bin_values(values, e)
        else:
            levs = spec.levels.get(feat.name)
            if levs is None or len(levs) < 2:
                continue
            kinds[feat.name] = "categorical"
            levels[feat.name] = levs
            index = {lev: k for k, lev in enumerate(levs)}
            bin_ids[feat.name] = np.array([index[v] for v in values])
        order.append(feat.name)
    return _RootBinning(kinds, edges, bin_ids, levels, order)


def _node_feature_bins(binning, X_node, y_node, rows, node_id, instrumentation):
    """Lazily yield per-feature bin statistics for one node."""
    for idx, name in enumerate(binning.order):
        if binning.kinds[name] == "continuous":
            n_bins = binning.edges[name].size + 1
        else:
            n_bins = len(binning.levels[name])
        grams = bin_grams(
            X_node,
            y_node,
            binning.bin_ids[name][rows],
            n_bins,
            instrumentation=instrumentation,
            node_id=node_id,
            feature=name,
        )
        yield FeatureBins(
            feature=name,
            index=idx,
            kind=binning.kinds[name],
            grams=grams,
            edges=binning.edges.get(name),
            levels=binning.levels.get(name),
        )


def _effect_means(X_node, spec, coefficients) -> np.ndarray:
    out = np.empty(len(spec.blocks))
    for i, block in enumerate(spec.blocks):
        out[i] = float(np.mean(X_node[:, block.columns] @ coefficients[block.columns]))
    return out


def split_mask(dataset, spec, candidate: SplitCandidate, rows=None) -> np.ndarray:
    """Boolean routing mask (True = left) for the given records."""
    col = dataset.columns[candidate.feature]
    if rows is not None:
        col = col[rows]
    if candidate.threshold is not None:
        return col <= candidate.threshold
    in_left = np.isin(col, candidate.categories)
    known = np.isin(col, spec.levels[candidate.feature])
    return in_left | ~known


def grow(
    dataset,
    spec: basis.DesignSpec,
    config: GrowConfig,
    *,
    instrumentation: SplitInstrumentation | None = None,
) -> TreeNode:
    """Grow a tree on the dataset's surrogate response.

    Nodes are created breadth-first and numbered from 0 in creation order
    (root, then its children left-to-right, level by level).  Growth stops
    at ``max_depth``, when no candidate is feasible, or when the best gain
    does not exceed ``min_gain``.
    """
    if dataset.n == 0:
        raise DataError("dataset is empty")
    m = spec.total_columns
    if m > dataset.n:
        raise DataError(f"design width {m} exceeds row count {dataset.n}")
    min_leaf = config.min_samples_leaf
    if min_leaf is None:
        min_leaf = max(2 * m, 30)
    elif min_leaf < m:
        raise ValueError(
            f"min_samples_leaf {min_leaf} is below the design width {m}"
        )

    X = basis.design_matrix(dataset, spec)
    y = np.asarray(dataset.response, dtype=np.float64)
    binning = _prepare_binning(dataset, spec, config)

    rows = np.arange(dataset.n)
    root_gram = gram_accumulate(X, y)
    root_model = fit_node(root_gram, config.lam)
    root = TreeNode(
        id=0, depth=0, count=dataset.n, model=root_model,
        effect_means=_effect_means(X, spec, root_model.coefficients),
    )
    next_id = 1
    queue: deque = deque([(root, rows, root_gram)])
    while queue:
        node, node_rows, node_gram = queue.popleft()
        if node.depth >= config.max_depth or node.count < 2 * min_leaf:
            continue
        X_node = X[node_rows]
        y_node = y[node_rows]
        bins = _node_feature_bins(
            binning, X_node, y_node, node_rows, node.id, instrumentation
        )
        found = best_split(node_gram, node.model, bins, config, min_leaf)
        if found is None or found.gain <= config.min_gain:
            continue
        mask = split_mask(dataset, spec, found.candidate, rows=node_rows)
        left_rows = node_rows[mask]
        right_rows = node_rows[~mask]
        if left_rows.size != found.left_gram.count:
            raise NumericalError(
                "routing mask disagrees with bin counts for "
                f"{found.candidate.feature!r} at node {node.id}"
            )
        node.split = found.candidate
        node.dsse = found.gain
        left = TreeNode(
            id=next_id, depth=node.depth + 1, count=left_rows.size,
            model=found.left_model,
            effect_means=_effect_means(X[left_rows], spec, found.left_model.coefficients),
        )
        right = TreeNode(
            id=next_id + 1, depth=node.depth + 1, count=right_rows.size,
            model=found.right_model,
            effect_means=_effect_means(X[right_rows], spec, found.right_model.coefficients),
        )
        next_id += 2
        node.left, node.right = left, right
        queue.append((left, left_rows, found.left_gram))
        queue.append((right, right_rows, found.right_gram))
    return root


def prune(root: TreeNode, r2_threshold: float, dsse_fraction: float) -> TreeNode:
    """Collapse well-fitted or low-gain subtrees; returns a new tree.

    An internal node becomes a leaf when its model's R^2 reaches
    ``r2_threshold`` or its split's loss reduction is below
    ``dsse_fraction`` times the root node's (pre-split) SSE.  Node ids are
    preserved; the input tree is left untouched.
    """
    if not (0.0 <= r2_threshold <= 1.0 and 0.0 <= dsse_fraction <= 1.0):
        raise ValueError("prune thresholds must lie in [0, 1]")
    floor = dsse_fraction * root.model.sse

    def rebuild(node: TreeNode) -> TreeNode:
        if node.is_leaf:
            return replace(node)
        if node.model.r2 >= r2_threshold or node.dsse < floor:
            return replace(node, split=None, left=None, right=None, dsse=0.0)
        return replace(node, left=rebuild(node.left), right=rebuild(node.right))

    return rebuild(root)


def route(root: TreeNode, spec, dataset, rows=None) -> dict[int, np.ndarray]:
    """Row indices reaching each node, keyed by node id."""
    if rows is None:
        rows = np.arange(dataset.n)
    out = {}

    def walk(node, idx):
        out[node.id] = idx
        if node.is_leaf:
            return
        mask = split_mask(dataset, spec, node.split, rows=idx)
        walk(node.left, idx[mask])
        walk(node.right, idx[~mask])

    walk(root, rows)
    return out


def predict(root: TreeNode, spec, dataset) -> np.ndarray:
    """Predictions for every record: route to a leaf, evaluate its model."""
    X = basis.design_matrix(dataset, spec)
    out = np.empty(dataset.n)

    def walk(node, idx):
        if node.is_leaf:
            out[idx] = X[idx] @ node.model.coefficients
            return
        mask = split_mask(dataset, spec, node.split, rows=idx)
        walk(node.left, idx[mask])
        walk(node.right, idx[~mask])

    walk(root, np.arange(dataset.n))
    return out


def predict_record(root: TreeNode, spec, record) -> float:
    """Prediction for a single record given as a feature -> value mapping."""
    node = root
    while not node.is_leaf:
        cand = node.split
        value = record[cand.feature]
        if cand.threshold is not None:
            go_left = value <= cand.threshold
        else:
            go_left = value in cand.categories or value not in spec.levels[cand.feature]
        node = node.left if go_left else node.right
    row = np.empty(spec.total_columns)
    row[0] = 1.0
    for block in spec.blocks:
        row[block.columns] = basis.block_rows(
            np.asarray([record[block.feature]]), spec, block
        )[0]
    return float(row @ node.model.coefficients)


def _soft_threshold(value: float, bound: float) -> float:
    if value > bound:
        return value - bound
    if value < -bound:
        return value + bound
    return 0.0


def _lasso_cd(X, y, lambda1, gamma0, max_passes, tol=1e-7):
    """Cyclic coordinate descent for (1/2n)||y - b0 - Z g||^2 + lambda1 |g|_1
    on the standardized design.  Returns (coefficients, converged)."""
    n = y.shape[0]
    mean = X[:, 1:].mean(axis=0)
    var = X[:, 1:].var(axis=0)
    degenerate = var <= _CONSTANT_COLUMN_RTOL * np.maximum((X[:, 1:] ** 2).mean(axis=0), 1.0)
    scale = np.sqrt(np.where(degenerate, 1.0, var))
    Z = (X[:, 1:] - mean) / scale
    ybar = float(y.mean())
    yc = y - ybar
    A = Z.T @ Z
    c = Z.T @ yc
    diag = np.diagonal(A).copy()
    active = np.nonzero(~degenerate & (diag > 0))[0]

    gamma = np.where(degenerate, 0.0, gamma0 * scale)
    u = A @ gamma
    converged = False
    for _ in range(max_passes):
        delta = 0.0
        for j in active:
            old = gamma[j]
            rho = (c[j] - u[j] + diag[j] * old) / n
            new = _soft_threshold(rho, lambda1) / (diag[j] / n)
            if new != old:
                u += A[:, j] * (new - old)
                gamma[j] = new
                delta = max(delta, abs(new - old))
        if delta < tol:
            converged = True
            break

    coef = np.empty(X.shape[1])
    coef[1:] = gamma / scale
    coef[0] = ybar - coef[1:] @ mean
    return coef, converged


def refit_l1(root: TreeNode, dataset, spec, lambda1: float) -> TreeNode:
    """Replace leaf coefficients with lasso fits; structure is unchanged.

    Coordinate descent runs on the standardized design with the intercept
    unpenalized, warm-started at the current leaf coefficients, until the
    largest coefficient change in a pass is below 1e-7 or the pass budget
    (1000 per design column) is exhausted.  Non-converged leaves keep their
    ridge coefficients and are flagged.  With ``lambda1 = 0`` the problem
    is plain least squares and is solved directly.  The tree is modified in
    place and returned.
    """
    if lambda1 < 0:
        raise ValueError("lambda1 must be nonnegative")
    X = basis.design_matrix(dataset, spec)
    y = np.asarray(dataset.response, dtype=np.float64)
    m = spec.total_columns
    max_passes = 10 * m * 100
    members = route(root, spec, dataset)
    for leaf in root.leaves():
        idx = members[leaf.id]
        if idx.size == 0:
            continue
        Xl, yl = X[idx], y[idx]
        if lambda1 == 0.0:
            coef = fit_node(gram_accumulate(Xl, yl), 0.0).coefficients
            converged = True
        else:
            # warm start from the current fit, on the standardized scale
            coef, converged = _lasso_cd(
                Xl, yl, lambda1, leaf.model.coefficients[1:].copy(), max_passes
            )
        if not converged:
            leaf.flags = leaf.flags + ("l1_nonconverged",)
            continue
        resid = yl - Xl @ coef
        sse = float(resid @ resid)
        tss = float(np.sum((yl - yl.mean()) ** 2))
        r2 = 1.0 if tss <= 0 else min(max(1.0 - sse / tss, 0.0), 1.0)
        leaf.model = NodeModel(
            coefficients=coef,
            sse=sse,
            r2=r2,
            effective_df=1.0 + int(np.count_nonzero(coef[1:])),
            lam=0.0,
            count=idx.size,
        )
        leaf.effect_means = _effect_means(Xl, spec, coef)
    return root
