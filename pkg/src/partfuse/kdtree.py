"""Deterministic kd-tree for nearest-neighbour and radius queries.

Median split on the cycling axis, points stored in leaves of at most 16
entries.  All distance ties are broken by the lower point index, so query
results are fully determined by the input order; this is what makes the
label-projection and clustering stages reproducible across runs and
ports.
"""

from __future__ import annotations

import heapq

import numpy as np

from .errors import ValidationError

LEAF_SIZE = 16


class _Leaf:
    __slots__ = ("indices", "points")

    def __init__(self, indices: np.ndarray, points: np.ndarray):
        self.indices = indices
        self.points = points


class _Split:
    __slots__ = ("axis", "value", "left", "right")

    def __init__(self, axis: int, value: float, left, right):
        self.axis = axis
        self.value = value
        self.left = left
        self.right = right


class KdTree:
    """Static kd-tree over an (N, d) float array."""

    def __init__(self, points: np.ndarray, leaf_size: int = LEAF_SIZE):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValidationError("kd-tree points must be a 2-D array (N, d)")
        if leaf_size < 1:
            raise ValidationError("leaf_size must be >= 1")
        self.points = pts
        self.n, self.dim = pts.shape
        self._leaf_size = leaf_size
        if self.n:
            self._root = self._build(np.arange(self.n), 0)
        else:
            self._root = None

    def _build(self, idx: np.ndarray, depth: int):
        if idx.size <= self._leaf_size:
            return _Leaf(idx, self.points[idx])
        axis = depth % self.dim
        values = self.points[idx, axis]
        mid = idx.size // 2
        part = np.argpartition(values, mid)
        idx = idx[part]
        split_value = float(self.points[idx[mid], axis])
        return _Split(
            axis,
            split_value,
            self._build(idx[:mid], depth + 1),
            self._build(idx[mid:], depth + 1),
        )

    def nearest(self, query, k: int = 1) -> list[tuple[float, int]]:
        """The k nearest points to ``query`` as (distance, index) pairs,
        sorted by (distance, index); fewer if the tree is smaller."""
        if k < 1:
            raise ValidationError("k must be >= 1")
        if self._root is None:
            return []
        q = np.asarray(query, dtype=np.float64)
        # max-heap of the current k best, keyed so heap[0] is the worst
        heap: list[tuple[float, int]] = []  # (-d2, -index)

        def visit(node):
            if isinstance(node, _Leaf):
                diff = node.points - q
                d2s = np.einsum("ij,ij->i", diff, diff)
                for d2, i in zip(d2s.tolist(), node.indices.tolist()):
                    if len(heap) < k:
                        heapq.heappush(heap, (-d2, -i))
                    else:
                        worst_d2, worst_i = -heap[0][0], -heap[0][1]
                        if (d2, i) < (worst_d2, worst_i):
                            heapq.heapreplace(heap, (-d2, -i))
                return
            delta = q[node.axis] - node.value
            near, far = (
                (node.left, node.right) if delta < 0 else (node.right, node.left)
            )
            visit(near)
            if len(heap) < k or delta * delta <= -heap[0][0]:
                visit(far)

        visit(self._root)
        best = sorted((-d2, -i) for d2, i in heap)
        return [(float(np.sqrt(d2)), i) for d2, i in best]

    def within(self, query, radius: float) -> list[int]:
        """Indices of all points at distance <= radius, ascending."""
        if radius < 0:
            raise ValidationError("radius must be >= 0")
        if self._root is None:
            return []
        q = np.asarray(query, dtype=np.float64)
        r2 = radius * radius
        hits: list[int] = []

        def visit(node):
            if isinstance(node, _Leaf):
                diff = node.points - q
                d2s = np.einsum("ij,ij->i", diff, diff)
                hits.extend(node.indices[d2s <= r2].tolist())
                return
            delta = q[node.axis] - node.value
            if delta < 0:
                visit(node.left)
                if delta * delta <= r2:
                    visit(node.right)
            else:
                visit(node.right)
                if delta * delta <= r2:
                    visit(node.left)

        visit(self._root)
        hits.sort()
        return hits
