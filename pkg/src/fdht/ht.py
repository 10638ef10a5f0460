"""Hierarchical Tucker decomposed weights.

A weight matrix of shape (g * prod(m)) x prod(n) is stored as one small
factor per node of a balanced binary tree over the d tensorization modes:
3-way frames ``(rank, m_k, n_k)`` at the leaves and 3-way transfer tensors
``(rank, left_rank, right_rank)`` at internal nodes. The root rank ``g``
becomes the leading mode of the output, one slice per LSTM gate when the
weight backs a recurrent cell.

The fast matrix-vector kernel (:func:`htl_forward`) contracts the
tensorized input into the leaf frames and combines children up the tree,
never materializing the dense matrix. :func:`reconstruct_dense` assembles
the dense matrix explicitly and serves as the testing oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import contract, tensorize, vectorize


class OracleSizeError(RuntimeError):
    """Dense reconstruction would exceed the element cap."""


@dataclass
class DimNode:
    """Tree node covering the contiguous mode range [lo, hi) with its rank."""

    lo: int
    hi: int
    rank: int
    left: int | None = None   # child indices into DimTree.nodes
    right: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.hi - self.lo == 1

    @property
    def modes(self) -> range:
        return range(self.lo, self.hi)


@dataclass
class DimTree:
    """Balanced binary dimension tree; ``nodes[0]`` is the root, children
    follow in preorder."""

    d: int
    nodes: list[DimNode]

    @property
    def root(self) -> DimNode:
        return self.nodes[0]

    def leaf_index(self, k: int) -> int:
        for i, node in enumerate(self.nodes):
            if node.is_leaf and node.lo == k:
                return i
        raise IndexError(f"no leaf for mode {k}")

    def internal_indices(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if not n.is_leaf]

    def leaf_indices(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.is_leaf]


def build_dim_tree(d: int, leaf_rank: int, internal_rank: int, root_rank: int) -> DimTree:
    """Build the balanced tree over d modes: each node splits so that the
    left child takes the ceiling half of its range. Leaves get leaf_rank,
    the root gets root_rank, remaining internal nodes get internal_rank.
    """
    if d < 2:
        raise ValueError(f"dimension tree needs d >= 2, got {d}")
    if min(leaf_rank, internal_rank, root_rank) < 1:
        raise ValueError("all ranks must be >= 1")
    nodes: list[DimNode] = []

    def build(lo, hi, is_root):
        idx = len(nodes)
        if hi - lo == 1:
            nodes.append(DimNode(lo, hi, leaf_rank))
            return idx
        nodes.append(DimNode(lo, hi, root_rank if is_root else internal_rank))
        mid = lo + (hi - lo + 1) // 2
        nodes[idx].left = build(lo, mid, False)
        nodes[idx].right = build(mid, hi, False)
        return idx

    build(0, d, True)
    return DimTree(d, nodes)


@dataclass(eq=False)
class HTWeight:
    """HT-format weight: tree plus one factor array per node (preorder).

    Leaf factors have shape ``(rank, m_k, n_k)``; internal factors have
    shape ``(rank, left_rank, right_rank)``. The implied dense matrix has
    ``root_rank * prod(m_shape)`` rows and ``prod(n_shape)`` columns.
    """

    tree: DimTree
    m_shape: tuple[int, ...]
    n_shape: tuple[int, ...]
    factors: list[np.ndarray]
    _plan: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.m_shape = tuple(int(m) for m in self.m_shape)
        self.n_shape = tuple(int(n) for n in self.n_shape)
        validate_weight(self)

    def __repr__(self):
        ranks = [n.rank for n in self.tree.nodes]
        return (f"HTWeight(d={self.tree.d}, g={self.root_rank}, "
                f"m_shape={self.m_shape}, n_shape={self.n_shape}, "
                f"ranks={ranks})")

    @property
    def root_rank(self) -> int:
        return self.tree.root.rank

    @property
    def out_size(self) -> int:
        return self.root_rank * int(np.prod(self.m_shape))

    @property
    def in_size(self) -> int:
        return int(np.prod(self.n_shape))


def validate_weight(w: HTWeight):
    tree = w.tree
    if len(w.m_shape) != tree.d or len(w.n_shape) != tree.d:
        raise ValueError(
            f"m/n shapes must have length d={tree.d}, got "
            f"{len(w.m_shape)} and {len(w.n_shape)}"
        )
    if len(w.factors) != len(tree.nodes):
        raise ValueError(
            f"expected {len(tree.nodes)} factors, got {len(w.factors)}"
        )
    for i, node in enumerate(tree.nodes):
        got = w.factors[i].shape
        if node.is_leaf:
            k = node.lo
            want = (node.rank, w.m_shape[k], w.n_shape[k])
        else:
            want = (node.rank, tree.nodes[node.left].rank, tree.nodes[node.right].rank)
        if got != want:
            raise ValueError(
                f"factor for node {i} (modes {node.lo}..{node.hi - 1}) has "
                f"shape {got}, expected {want}"
            )


def init_ht_weight(m_shape, n_shape, leaf_rank, internal_rank, root_rank, seed) -> HTWeight:
    """Random Gaussian initialization, deterministic in the seed.

    Leaf frames use std 1/sqrt(n_k); transfer tensors use
    std 1/sqrt(left_rank * right_rank). Factors are drawn in preorder.
    """
    m_shape = tuple(int(m) for m in m_shape)
    n_shape = tuple(int(n) for n in n_shape)
    if len(m_shape) == 0 or len(m_shape) != len(n_shape):
        raise ValueError("m_shape and n_shape must be non-empty and equal length")
    tree = build_dim_tree(len(m_shape), leaf_rank, internal_rank, root_rank)
    rng = np.random.default_rng(seed)
    factors = []
    for node in tree.nodes:
        if node.is_leaf:
            k = node.lo
            std = (1.0 / n_shape[k]) ** 0.5
            factors.append(rng.normal(0.0, std, size=(node.rank, m_shape[k], n_shape[k])))
        else:
            rl = tree.nodes[node.left].rank
            rr = tree.nodes[node.right].rank
            std = (1.0 / (rl * rr)) ** 0.5
            factors.append(rng.normal(0.0, std, size=(node.rank, rl, rr)))
    return HTWeight(tree, m_shape, n_shape, factors)


def param_count(w: HTWeight) -> int:
    """Total factor entries: leaves r_k*m_k*n_k plus internal r*r_l*r_r.
    Biases live in the cell and are not counted."""
    return sum(f.size for f in w.factors)


def param_count_config(m_shape, n_shape, leaf_rank, internal_rank, root_rank) -> int:
    """Parameter count from the configuration alone, without materializing
    factor arrays."""
    tree = build_dim_tree(len(m_shape), leaf_rank, internal_rank, root_rank)
    total = 0
    for node in tree.nodes:
        if node.is_leaf:
            total += node.rank * m_shape[node.lo] * n_shape[node.lo]
        else:
            total += node.rank * tree.nodes[node.left].rank * tree.nodes[node.right].rank
    return total


# ---------------------------------------------------------------------------
# Dense reconstruction (oracle path)

def _node_frame(w: HTWeight, idx: int) -> np.ndarray:
    """Frame of node idx with axes (rank, m_lo..m_hi-1, n_lo..n_hi-1)."""
    node = w.tree.nodes[idx]
    if node.is_leaf:
        return w.factors[idx]
    f1 = _node_frame(w, node.left)
    f2 = _node_frame(w, node.right)
    # (r, r2, i1..., j1...) then (r, i1..., j1..., i2..., j2...)
    t = contract(w.factors[idx], f1, [1], [0])
    t = contract(t, f2, [1], [0])
    n1 = w.tree.nodes[node.left].hi - w.tree.nodes[node.left].lo
    n2 = w.tree.nodes[node.right].hi - w.tree.nodes[node.right].lo
    perm = (
        [0]
        + list(range(1, 1 + n1))                      # i of left child
        + list(range(1 + 2 * n1, 1 + 2 * n1 + n2))    # i of right child
        + list(range(1 + n1, 1 + 2 * n1))             # j of left child
        + list(range(1 + 2 * n1 + n2, 1 + 2 * (n1 + n2)))
    )
    return t.transpose(perm)


def reconstruct_dense(w: HTWeight, element_cap: int = 10**8) -> np.ndarray:
    """Assemble the full dense matrix, rows (g, i_1..i_d) lexicographic,
    columns (j_1..j_d). Intended for small shapes; guarded by element_cap."""
    entries = w.out_size * w.in_size
    if entries > element_cap:
        raise OracleSizeError(
            f"oracle too large: dense matrix has {entries} entries "
            f"(cap {element_cap})"
        )
    full = _node_frame(w, 0)  # (g, m_1..m_d, n_1..n_d)
    return full.reshape(w.out_size, w.in_size)


# ---------------------------------------------------------------------------
# Fast forward kernel

# A plan is a list of contraction steps over value slots. Slots:
#   ("x",)       the tensorized input
#   ("f", i)     factor of node i
#   ("t", k)     output of step k
# Each step contracts slot a with slot b over the given axis lists. The
# last step's output carries the modes (m_1..m_d interleaved with the root
# rank axis); out_perm moves the root rank axis to the front.


@dataclass(frozen=True)
class PlanStep:
    a: tuple
    b: tuple
    a_axes: tuple
    b_axes: tuple


def build_plan(w: HTWeight):
    """Leaves-to-root contraction schedule.

    The carried tensor starts as the tensorized input. Leaf frames are
    contracted in mode order; a transfer tensor is folded in as soon as
    both child ranks are present. When a node's right child is a leaf the
    transfer tensor is pre-contracted with that leaf frame so the carried
    tensor never holds two sibling rank/output mode groups at once, which
    keeps intermediates small.
    """
    tree = w.tree
    steps: list[PlanStep] = []
    carry = ("x",)
    # modes of the carried tensor, as labels ("n", k) / ("r", node) / ("m", k)
    modes: list[tuple] = [("n", k) for k in range(tree.d)]

    def contract_carry(b_slot, a_axes, b_axes, b_free_modes):
        nonlocal carry, modes
        steps.append(PlanStep(carry, b_slot, tuple(a_axes), tuple(b_axes)))
        carry = ("t", len(steps) - 1)
        modes = [m for ax, m in enumerate(modes) if ax not in a_axes] + b_free_modes

    def process(idx):
        node = tree.nodes[idx]
        if node.is_leaf:
            k = node.lo
            contract_carry(("f", idx), [modes.index(("n", k))], [2],
                           [("r", idx), ("m", k)])
            return
        process(node.left)
        right = tree.nodes[node.right]
        if right.is_leaf:
            k = right.lo
            # fused pre-contraction: (r_s, r_left, m_k, n_k)
            steps.append(PlanStep(("f", idx), ("f", node.right), (2,), (0,)))
            fused = ("t", len(steps) - 1)
            contract_carry(
                fused,
                [modes.index(("n", k)), modes.index(("r", node.left))],
                [3, 1],
                [("r", idx), ("m", k)],
            )
        else:
            process(node.right)
            contract_carry(
                ("f", idx),
                [modes.index(("r", node.left)), modes.index(("r", node.right))],
                [1, 2],
                [("r", idx)],
            )

    process(0)
    # final modes: m_1..m_d in order with ("r", root) somewhere among them
    rank_axis = modes.index(("r", 0))
    out_perm = [rank_axis] + [ax for ax in range(len(modes)) if ax != rank_axis]
    return steps, tuple(out_perm)


def _get_plan(w: HTWeight):
    if w._plan is None:
        w._plan = build_plan(w)
    return w._plan


def run_plan(w: HTWeight, x_tensor: np.ndarray) -> dict:
    """Execute the schedule; returns the slot dict of every intermediate
    (the tape reused by the backward pass)."""
    steps, _ = _get_plan(w)
    values = {("x",): x_tensor}
    for k, s in enumerate(steps):
        a = values[s.a] if s.a[0] != "f" else w.factors[s.a[1]]
        b = values[s.b] if s.b[0] != "f" else w.factors[s.b[1]]
        values[("t", k)] = np.tensordot(a, b, axes=(list(s.a_axes), list(s.b_axes)))
    return values


def output_from_tape(w: HTWeight, values: dict) -> np.ndarray:
    """The (g, m_1..m_d) output tensor of an executed schedule."""
    steps, out_perm = _get_plan(w)
    return values[("t", len(steps) - 1)].transpose(out_perm)


def htl_forward(w: HTWeight, x) -> np.ndarray:
    """Matrix-vector product reconstruct_dense(w) @ x computed in HT form.

    The input is tensorized to n_shape, swept through the leaves-to-root
    schedule, and the resulting (g, m_1..m_d) tensor is vectorized with
    the gate (root rank) index slowest.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != w.in_size:
        raise ValueError(f"input has length {x.size}, expected {w.in_size}")
    values = run_plan(w, tensorize(x, w.n_shape))
    return vectorize(output_from_tape(w, values))
