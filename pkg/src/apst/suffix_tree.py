"""Suffix-closed scored trie with Hamming-budget traversal.

The child of node ``s`` under symbol ``a`` spells ``a s``: walking down from
the root consumes the history backwards, most recent symbol first.
"""

from __future__ import annotations

import gc
import json
import sys
import weakref
from contextlib import contextmanager
from typing import NamedTuple, Sequence


class Node:
    # the parent link is weak so a discarded tree has no reference cycles and
    # is freed by reference counting alone
    __slots__ = ("g", "depth", "symbol", "_parent", "children", "kids", "__weakref__")

    def __init__(self, symbol=None, parent=None, depth=0):
        self.g = 0.0
        self.depth = depth
        self.symbol = symbol
        self._parent = weakref.ref(parent) if parent is not None else None
        self.children = None  # list of length K once the first child is added
        self.kids = ()  # (symbol, child) pairs of existing children, symbol order

    @property
    def parent(self):
        return self._parent() if self._parent is not None else None

    def spell(self) -> tuple[int, ...]:
        """The string this node stands for, oldest symbol first."""
        out = []
        node = self
        while node.depth:
            out.append(node.symbol)
            node = node.parent
            if node is None:
                raise RuntimeError("the tree owning this node has been discarded")
        return tuple(out)

    def path(self) -> tuple[int, ...]:
        """Edge labels from the root down to this node (most recent symbol first)."""
        return tuple(reversed(self.spell()))

    def __repr__(self):
        return f"Node({self.spell()!r}, g={self.g!r})"


class Match(NamedTuple):
    node: Node
    i: int
    k: int


class ApproxSuffixTree:
    def __init__(self, n_symbols: int = 2):
        if n_symbols < 2:
            raise ValueError("need at least two symbols")
        self.n_symbols = n_symbols
        self.root = Node()
        self.node_count = 0
        self.max_depth = 0

    def __len__(self):
        return self.node_count

    def add_child(self, node: Node, symbol: int) -> Node:
        children = node.children
        if children is None:
            children = node.children = [None] * self.n_symbols
        child = children[symbol]
        if child is None:
            child = children[symbol] = Node(symbol, node, node.depth + 1)
            kids = node.kids
            if not kids or kids[-1][0] < symbol:
                node.kids = kids + ((symbol, child),)
            else:
                # symbols are unique per node, so the sort never compares nodes
                node.kids = tuple(sorted(kids + ((symbol, child),)))
            self.node_count += 1
            if child.depth > self.max_depth:
                self.max_depth = child.depth
        return child

    def upsert_path(self, suffix: Sequence[int], create_missing: bool = True):
        """Find (or build) the node spelling ``suffix`` (oldest symbol first).

        Missing ancestors are created with score 0 so the tree stays
        suffix-closed.  Returns ``None`` for an absent node in lookup mode.
        """
        if not suffix:
            raise ValueError("suffix must be non-empty")
        node = self.root
        for sym in reversed(suffix):
            if not 0 <= sym < self.n_symbols:
                raise ValueError(f"symbol {sym} out of range")
            children = node.children
            child = children[sym] if children is not None else None
            if child is None:
                if not create_missing:
                    return None
                child = self.add_child(node, sym)
            node = child
        return node

    def find(self, suffix: Sequence[int]):
        return self.upsert_path(suffix, create_missing=False)

    def nodes(self):
        """All non-root nodes, depth-first in symbol order."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.children is not None:
                stack.extend(c for c in reversed(node.children) if c is not None)
            if node.depth:
                yield node

    def squared_norm(self) -> float:
        return sum(n.g * n.g for n in self.nodes())

    def copy(self) -> "ApproxSuffixTree":
        with paused_gc():
            return self._copy()

    def _copy(self) -> "ApproxSuffixTree":
        clone = ApproxSuffixTree(self.n_symbols)
        clone.node_count = self.node_count
        clone.max_depth = self.max_depth
        clone.root.g = self.root.g
        stack = [(self.root, clone.root)]
        while stack:
            src, dst = stack.pop()
            if src.children is None:
                continue
            children = [None] * self.n_symbols
            kids = []
            for sym, child in src.kids:
                new = Node(sym, dst, child.depth)
                new.g = child.g
                children[sym] = new
                kids.append((sym, new))
                stack.append((child, new))
            dst.children = children
            dst.kids = tuple(kids)
        return clone

    def is_suffix_closed(self) -> bool:
        for node in self.nodes():
            if node.depth != node.parent.depth + 1:
                return False
            if node.parent.children[node.symbol] is not node:
                return False
        return True

    def to_json(self, **kw) -> str:
        with _nesting_allowance(self.max_depth):
            return json.dumps(tree_to_dict(self), **kw)

    @classmethod
    def from_json(cls, text: str) -> "ApproxSuffixTree":
        # nesting depth is unknown before parsing; a chain uses two levels per node
        with _nesting_allowance(text.count("[")):
            return tree_from_dict(json.loads(text))


@contextmanager
def _nesting_allowance(depth: int):
    # json recurses once per nesting level (object + children list per node)
    old = sys.getrecursionlimit()
    need = 4 * depth + 1000
    if need > old:
        sys.setrecursionlimit(need)
    try:
        yield
    finally:
        sys.setrecursionlimit(old)


@contextmanager
def paused_gc():
    """Suspend the cyclic collector while a tree grows.

    Every node is a tracked container, so full collections rescan the whole
    tree and dominate the runtime of long streams.  Nothing here relies on
    cycle collection; dropped trees are reclaimed once the collector resumes.
    """
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


def max_depth(tree: ApproxSuffixTree) -> int:
    return tree.max_depth


def node_count(tree: ApproxSuffixTree) -> int:
    return tree.node_count


def hamming(a: Sequence[int], b: Sequence[int]) -> int:
    if len(a) != len(b):
        raise ValueError("Hamming distance needs equal-length strings")
    return sum(x != y for x, y in zip(a, b))


def collect_matches(tree: ApproxSuffixTree, history: Sequence[int], t: int,
                    epsilon: int, max_depth: int | None = None) -> list[Match]:
    """Every node within ``epsilon`` mismatches of an equal-length history suffix.

    ``history[j]`` holds ``y_{j+1}``; suffixes end at ``y_{t-1}``.  Matches come
    out ordered by length, then distance, then root-to-node edge labels.
    """
    limit = t - 1 if max_depth is None else min(t - 1, max_depth)
    triples = match_triples(tree.root, history, t, epsilon, limit)
    return [Match(*m) for m in sorted(triples, key=_by_length_distance)]


def match_triples(root: Node, history: Sequence[int], t: int, epsilon: int,
                  limit: int) -> list[tuple[Node, int, int]]:
    """Budgeted breadth-first descent; ``(node, i, k)`` in edge-label order per level."""
    out = []
    if epsilon == 0:
        node = root
        for i in range(1, limit + 1):
            children = node.children
            if children is None:
                break
            node = children[history[t - 1 - i]]
            if node is None:
                break
            out.append((node, i, 0))
        return out
    frontier = [(root, 0)]
    emit = out.append
    for i in range(1, limit + 1):
        sym = history[t - 1 - i]
        level = []
        push = level.append
        for node, k in frontier:
            children = node.children
            if children is None:
                continue
            if k < epsilon:
                for s, child in node.kids:
                    kk = k if s == sym else k + 1
                    push((child, kk))
                    emit((child, i, kk))
            else:
                child = children[sym]
                if child is not None:
                    push((child, k))
                    emit((child, i, k))
        if not level:
            break
        frontier = level
    return out


def score_matches(root: Node, history: Sequence[int], t: int, epsilon: int, limit: int,
                  rows: Sequence[Sequence[float]]):
    """``match_triples`` fused with scoring.

    Returns ``(sum of w(i,k) g, sum of w(i,k)^2, triples)`` where
    ``rows[i][k]`` holds the weight of a length-i match at distance k.
    """
    out = []
    emit = out.append
    h = 0.0
    mass = 0.0
    if epsilon == 0:
        node = root
        for i in range(1, limit + 1):
            children = node.children
            if children is None:
                break
            node = children[history[t - 1 - i]]
            if node is None:
                break
            wgt = rows[i][0]
            h += wgt * node.g
            mass += wgt * wgt
            emit((node, i, 0))
        return h, mass, out
    frontier = [(root, 0)]
    for i in range(1, limit + 1):
        sym = history[t - 1 - i]
        row = rows[i]
        level = []
        push = level.append
        for node, k in frontier:
            children = node.children
            if children is None:
                continue
            if k < epsilon:
                for s, child in node.kids:
                    kk = k if s == sym else k + 1
                    wgt = row[kk]
                    h += wgt * child.g
                    mass += wgt * wgt
                    push((child, kk))
                    emit((child, i, kk))
            else:
                child = children[sym]
                if child is not None:
                    wgt = row[k]
                    h += wgt * child.g
                    mass += wgt * wgt
                    push((child, k))
                    emit((child, i, k))
        if not level:
            break
        frontier = level
    return h, mass, out


def score_only(root: Node, history: Sequence[int], t: int, epsilon: int, limit: int,
               rows: Sequence[Sequence[float]]) -> tuple[float, float]:
    """``score_matches`` without materialising the match list."""
    h = 0.0
    mass = 0.0
    if epsilon == 0:
        node = root
        for i in range(1, limit + 1):
            children = node.children
            if children is None:
                break
            node = children[history[t - 1 - i]]
            if node is None:
                break
            wgt = rows[i][0]
            h += wgt * node.g
            mass += wgt * wgt
        return h, mass
    frontier = [(root, 0)]
    for i in range(1, limit + 1):
        sym = history[t - 1 - i]
        row = rows[i]
        level = []
        push = level.append
        for node, k in frontier:
            children = node.children
            if children is None:
                continue
            if k < epsilon:
                for s, child in node.kids:
                    kk = k if s == sym else k + 1
                    wgt = row[kk]
                    h += wgt * child.g
                    mass += wgt * wgt
                    push((child, kk))
            else:
                child = children[sym]
                if child is not None:
                    wgt = row[k]
                    h += wgt * child.g
                    mass += wgt * wgt
                    push((child, k))
        if not level:
            break
        frontier = level
    return h, mass


def _by_length_distance(item):
    return item[1], item[2]


def tree_to_dict(tree: ApproxSuffixTree) -> dict:
    """Nested ``{symbol, g, children}`` objects, root first."""
    root = {"symbol": None, "g": tree.root.g, "children": []}
    stack = [(tree.root, root)]
    while stack:
        node, doc = stack.pop()
        if node.children is None:
            continue
        for child in node.children:
            if child is not None:
                sub = {"symbol": child.symbol, "g": child.g, "children": []}
                doc["children"].append(sub)
                stack.append((child, sub))
    return {"n_symbols": tree.n_symbols, "root": root}


def tree_from_dict(doc: dict) -> ApproxSuffixTree:
    tree = ApproxSuffixTree(doc["n_symbols"])
    stack = [(tree.root, doc["root"])]
    while stack:
        node, spec = stack.pop()
        node.g = float(spec["g"])
        for child_spec in spec["children"]:
            child = tree.add_child(node, int(child_spec["symbol"]))
            stack.append((child, child_spec))
    return tree
