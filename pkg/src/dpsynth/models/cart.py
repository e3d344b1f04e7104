"""Binary classification trees grown on Gini impurity.

Impurity is count-weighted: a node with ``n`` rows, ``p`` of them positive,
has impurity ``2·p·(n-p)/n``. A split is kept only if it lowers the total
impurity by strictly more than ``cp`` times the root impurity, which is also
what ``pruned(cp)`` applies to an already grown tree.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..privacy import as_generator

DEFAULT_MIN_LEAF = 20
DEFAULT_CP_GRID = (0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05)


def impurity(n, pos):
    n = np.asarray(n, dtype=float)
    pos = np.asarray(pos, dtype=float)
    return np.divide(2.0 * pos * (n - pos), n, out=np.zeros_like(n), where=n > 0)


@dataclass
class Node:
    n: int
    pos: int
    feature: int = -1
    threshold: float = float("nan")
    left_levels: frozenset = frozenset()
    seen_levels: frozenset = frozenset()
    left: int = -1
    right: int = -1
    decrease: float = 0.0

    @property
    def value(self) -> float:
        return self.pos / self.n

    @property
    def is_leaf(self) -> bool:
        return self.left < 0


@dataclass
class CartTree:
    nodes: list[Node]
    cp: float
    min_leaf: int
    categorical: np.ndarray
    unseen_levels: int = field(default=0, compare=False)

    @property
    def root_impurity(self) -> float:
        root = self.nodes[0]
        return float(impurity(root.n, root.pos))

    def _stops(self, node: Node, cp: float) -> bool:
        return node.is_leaf or not node.decrease > cp * self.root_impurity

    def predict(self, X, cp: float | None = None) -> np.ndarray:
        """Leaf means for each row. ``cp`` above the fitted one prunes on the fly."""
        X = np.asarray(X, dtype=float)
        cp = self.cp if cp is None else cp
        out = np.empty(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            nid, idx = stack.pop()
            node = self.nodes[nid]
            if self._stops(node, cp) or idx.size == 0:
                out[idx] = node.value
                continue
            x = X[idx, node.feature]
            if self.categorical[node.feature]:
                lv = x.astype(np.int64)
                go_left = np.isin(lv, list(node.left_levels))
                unseen = ~np.isin(lv, list(node.seen_levels))
                if unseen.any():
                    self.unseen_levels += int(unseen.sum())
                    majority_left = self.nodes[node.left].n >= self.nodes[node.right].n
                    go_left = np.where(unseen, majority_left, go_left)
            else:
                go_left = x <= node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out

    def pruned(self, cp: float) -> "CartTree":
        keep: list[Node] = []

        def copy(nid: int) -> int:
            node = self.nodes[nid]
            new_id = len(keep)
            keep.append(Node(node.n, node.pos, node.feature, node.threshold,
                             node.left_levels, node.seen_levels, decrease=node.decrease))
            if not self._stops(node, cp):
                left = copy(node.left)
                right = copy(node.right)
                keep[new_id].left, keep[new_id].right = left, right
            return new_id

        copy(0)
        return CartTree(keep, max(cp, self.cp), self.min_leaf, self.categorical)

    def internal_nodes(self, cp: float | None = None) -> list[Node]:
        cp = self.cp if cp is None else cp
        out, stack = [], [0]
        while stack:
            node = self.nodes[stack.pop()]
            if not self._stops(node, cp):
                out.append(node)
                stack.extend((node.left, node.right))
        return out

    def n_leaves(self, cp: float | None = None) -> int:
        return len(self.internal_nodes(cp)) + 1


@dataclass
class Split:
    feature: int
    decrease: float
    threshold: float = float("nan")
    left_levels: frozenset = frozenset()
    seen_levels: frozenset = frozenset()


def _scan(cum_n, cum_p, n, P, min_leaf, allowed=None):
    """Best prefix split given cumulative counts over an ordering."""
    nL = cum_n[:-1].astype(float)
    pL = cum_p[:-1].astype(float)
    nR = n - nL
    pR = P - pL
    ok = (nL >= min_leaf) & (nR >= min_leaf)
    if allowed is not None:
        ok &= allowed
    if not ok.any():
        return None, -np.inf
    dec = impurity(n, P) - impurity(nL, pL) - impurity(nR, pR)
    dec = np.where(ok, dec, -np.inf)
    i = int(np.argmax(dec))
    return i, float(dec[i])


def best_split(X: np.ndarray, y: np.ndarray, categorical: np.ndarray, min_leaf: int) -> Split | None:
    n = y.size
    P = int(y.sum())
    best: Split | None = None
    for f in range(X.shape[1]):
        x = X[:, f]
        if categorical[f]:
            lv = x.astype(np.int64)
            cnt = np.bincount(lv)
            pos = np.bincount(lv, weights=y).astype(np.int64)
            present = np.flatnonzero(cnt)
            if present.size < 2:
                continue
            order = present[np.lexsort((present, pos[present] / cnt[present]))]
            i, dec = _scan(np.cumsum(cnt[order]), np.cumsum(pos[order]), n, P, min_leaf)
            if i is None:
                continue
            if best is None or dec > best.decrease:
                best = Split(f, dec, left_levels=frozenset(order[: i + 1].tolist()),
                             seen_levels=frozenset(present.tolist()))
        else:
            order = np.argsort(x, kind="stable")
            xs = x[order]
            distinct = xs[:-1] < xs[1:]
            if not distinct.any():
                continue
            cum_n = np.arange(1, n + 1)
            i, dec = _scan(cum_n, np.cumsum(y[order]), n, P, min_leaf, allowed=distinct)
            if i is None:
                continue
            if best is None or dec > best.decrease:
                thr = (xs[i] + xs[i + 1]) / 2
                if not xs[i] <= thr < xs[i + 1]:
                    thr = xs[i]
                best = Split(f, dec, threshold=float(thr))
    return best


def fit_cart(
    X,
    y,
    cp: float = 0.01,
    min_leaf: int = DEFAULT_MIN_LEAF,
    categorical=None,
) -> CartTree:
    """Grow a tree greedily on Gini impurity decrease.

    Categorical features are split by ordering their levels by positive rate
    and scanning prefix sets, which finds the best binary partition for a
    binary target. Ties keep the earliest feature and the earliest
    threshold.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int64)
    if X.shape[0] != y.size:
        raise ValueError("X and y differ in length")
    if set(np.unique(y)) - {0, 1}:
        raise ValueError("labels must be 0/1")
    categorical = (
        np.zeros(X.shape[1], dtype=bool) if categorical is None else np.asarray(categorical, dtype=bool)
    )
    nodes = [Node(int(y.size), int(y.sum()))]
    root_imp = float(impurity(y.size, y.sum()))
    stack = [(0, np.arange(y.size))]
    while stack:
        nid, idx = stack.pop()
        node = nodes[nid]
        if idx.size < 2 * min_leaf or node.pos in (0, node.n) or root_imp == 0:
            continue
        split = best_split(X[idx], y[idx], categorical, min_leaf)
        if split is None or not split.decrease > cp * root_imp:
            continue
        x = X[idx, split.feature]
        if categorical[split.feature]:
            go_left = np.isin(x.astype(np.int64), list(split.left_levels))
        else:
            go_left = x <= split.threshold
        li, ri = idx[go_left], idx[~go_left]
        node.feature = split.feature
        node.threshold = split.threshold
        node.left_levels = split.left_levels
        node.seen_levels = split.seen_levels
        node.decrease = split.decrease
        node.left = len(nodes)
        nodes.append(Node(int(li.size), int(y[li].sum())))
        node.right = len(nodes)
        nodes.append(Node(int(ri.size), int(y[ri].sum())))
        stack.append((node.right, ri))
        stack.append((node.left, li))
    return CartTree(nodes, cp, min_leaf, categorical)


def cv_select_cp(
    X,
    y,
    cp_grid=DEFAULT_CP_GRID,
    folds: int = 10,
    rng=None,
    min_leaf: int = DEFAULT_MIN_LEAF,
    categorical=None,
) -> float:
    """Grid ``cp`` with the lowest held-out Brier score; ties go to the larger cp."""
    grid = sorted(set(float(c) for c in cp_grid), reverse=True)
    if not grid:
        raise ValueError("cp grid is empty")
    if len(grid) == 1:
        return grid[0]
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int64)
    gen = as_generator(rng) if rng is not None else np.random.default_rng(0)
    assignment = gen.permutation(y.size) % folds
    sq_err = np.zeros(len(grid))
    for f in range(folds):
        test = assignment == f
        if not test.any():
            continue
        tree = fit_cart(X[~test], y[~test], cp=grid[-1], min_leaf=min_leaf, categorical=categorical)
        for i, cp in enumerate(grid):
            sq_err[i] += np.sum((tree.predict(X[test], cp=cp) - y[test]) ** 2)
    brier = sq_err / y.size
    best = 0
    for i in range(1, len(grid)):
        if brier[i] < brier[best]:
            best = i
    return grid[best]
