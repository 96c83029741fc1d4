"""Truncated recursive dyadic partition of an interval and per-node counts.

Nodes are stored in heap order: node ``(level, index)`` has flat position
``2**level - 1 + index``, so the children of flat node ``i`` are ``2i + 1``
and ``2i + 2``. Cells are closed on the right, ``(lo, hi]``; a point sitting
exactly on a split belongs to the left child. The lower domain end is
accepted and assigned to the leftmost leaf.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, order=True)
class NodeId:
    level: int
    index: int

    def __post_init__(self):
        if self.level < 0 or not 0 <= self.index < 2 ** self.level:
            raise ValueError(f"invalid node ({self.level}, {self.index})")

    @property
    def flat(self):
        return 2 ** self.level - 1 + self.index

    @classmethod
    def from_flat(cls, i):
        level = int(np.floor(np.log2(i + 1)))
        return cls(level, i - (2 ** level - 1))

    def children(self):
        return NodeId(self.level + 1, 2 * self.index), NodeId(self.level + 1, 2 * self.index + 1)

    def parent(self):
        if self.level == 0:
            raise ValueError("the root has no parent")
        return NodeId(self.level - 1, self.index // 2)


ROOT = NodeId(0, 0)


@dataclass(frozen=True, eq=False)
class PartitionTree:
    """Dyadic partition of ``(a, b]`` truncated at ``depth`` levels of splits.

    ``theta0[i]`` is the base-measure fraction of internal node ``i`` that
    goes to its left child. Leaves (level ``depth``) carry no split.
    """

    depth: int
    domain: tuple
    theta0: np.ndarray
    edges: np.ndarray = field(repr=False)

    @property
    def n_nodes(self):
        return 2 ** (self.depth + 1) - 1

    @property
    def n_internal(self):
        return 2 ** self.depth - 1

    @property
    def n_leaves(self):
        return 2 ** self.depth

    @property
    def width(self):
        return self.domain[1] - self.domain[0]

    @property
    def leaf_width(self):
        return self.width / self.n_leaves

    @property
    def is_uniform(self):
        return bool(np.all(self.theta0 == 0.5))

    def span(self, node):
        """Interval ``(lo, hi]`` covered by ``node``."""
        step = 2 ** (self.depth - node.level)
        return float(self.edges[node.index * step]), float(self.edges[(node.index + 1) * step])

    def internal_nodes(self):
        return [NodeId.from_flat(i) for i in range(self.n_internal)]

    def level_slice(self, level):
        return slice(2 ** level - 1, 2 ** (level + 1) - 1)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= self.domain[0]) & (x <= self.domain[1])

    def leaf_index(self, x):
        """Leaf index (0 .. 2**depth - 1) for each point of ``x``."""
        x = np.asarray(x, dtype=float)
        if not np.all(self.contains(x)):
            bad = np.atleast_1d(x)[~np.atleast_1d(self.contains(x))][0]
            raise ValueError(f"point {bad!r} outside domain {self.domain}")
        idx = np.searchsorted(self.edges, x, side="left") - 1
        return np.clip(idx, 0, self.n_leaves - 1)

    def leaf_mass_base(self):
        """Base-measure mass of every leaf, from the path products of theta0."""
        mass = np.ones(1)
        for level in range(self.depth):
            t0 = self.theta0[self.level_slice(level)]
            mass = np.stack([mass * t0, mass * (1.0 - t0)], axis=1).ravel()
        return mass


def build_tree(depth, domain=(0.0, 1.0), base="uniform"):
    """Build a depth-``depth`` dyadic partition of ``domain``.

    ``base`` is ``"uniform"`` or a sequence of ``2**depth - 1`` left-split
    fractions in (0, 1), one per internal node in heap order.
    """
    depth = int(depth)
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    a, b = float(domain[0]), float(domain[1])
    if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
        raise ValueError(f"degenerate domain ({a}, {b}]")
    n_internal = 2 ** depth - 1
    if isinstance(base, str):
        if base != "uniform":
            raise ValueError(f"unknown base measure {base!r}")
        theta0 = np.full(n_internal, 0.5)
    else:
        theta0 = np.asarray(base, dtype=float)
        if theta0.shape != (n_internal,):
            raise ValueError(f"expected {n_internal} theta0 values, got {theta0.shape}")
        if np.any((theta0 <= 0) | (theta0 >= 1)):
            raise ValueError("theta0 values must lie strictly inside (0, 1)")
    edges = a + (b - a) * np.arange(2 ** depth + 1) / 2 ** depth
    edges[-1] = b
    theta0.setflags(write=False)
    edges.setflags(write=False)
    return PartitionTree(depth, (a, b), theta0, edges)


@dataclass(frozen=True, eq=False)
class CountTable:
    """Observation counts of every sample in every node.

    ``node_counts[i, j]`` is the number of points of sample ``i`` in flat
    node ``j`` (internal nodes and leaves).
    """

    node_counts: np.ndarray

    @property
    def k(self):
        return self.node_counts.shape[0]

    @property
    def depth(self):
        return int(np.log2(self.node_counts.shape[1] + 1)) - 1

    def left(self, flat):
        return self.node_counts[:, 2 * flat + 1]

    def right(self, flat):
        return self.node_counts[:, 2 * flat + 2]

    def split_counts(self, flat):
        """``(k, 2)`` array of left/right child counts at internal node ``flat``."""
        return self.node_counts[:, [2 * flat + 1, 2 * flat + 2]]

    def total(self, flat=0):
        return self.node_counts[:, flat].sum()

    def leaf_counts(self):
        n_leaves = (self.node_counts.shape[1] + 1) // 2
        return self.node_counts[:, n_leaves - 1:]

    def subset(self, indices):
        return CountTable(self.node_counts[list(indices)])


def counts_from_leaves(leaf_counts):
    """Sum leaf counts ``(k, 2**L)`` up the tree into a :class:`CountTable`."""
    leaf_counts = np.asarray(leaf_counts, dtype=np.int64)
    levels = [leaf_counts]
    while levels[-1].shape[1] > 1:
        c = levels[-1]
        levels.append(c[:, 0::2] + c[:, 1::2])
    node_counts = np.concatenate(levels[::-1], axis=1)
    node_counts.setflags(write=False)
    return CountTable(node_counts)


def bin_data(tree, samples):
    """Count the observations of every sample in every node of ``tree``."""
    samples = list(samples)
    if not samples:
        raise ValueError("at least one sample is required")
    leaf_counts = np.zeros((len(samples), tree.n_leaves), dtype=np.int64)
    for i, xs in enumerate(samples):
        xs = np.asarray(xs, dtype=float).ravel()
        inside = tree.contains(xs)
        if not np.all(inside):
            raise ValueError(
                f"sample {i}: observation {xs[~inside][0]!r} outside domain {tree.domain}"
            )
        leaf_counts[i] = np.bincount(tree.leaf_index(xs), minlength=tree.n_leaves)
    return counts_from_leaves(leaf_counts)


def leaf_uniform_density(tree, x):
    """Base-conditional density of the leaf containing ``x`` (1 / leaf width)."""
    tree.leaf_index(x)
    return np.broadcast_to(1.0 / tree.leaf_width, np.shape(x)).astype(float)
