"""Decode-tree classification into Fast-SSC constituent nodes."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np


class NodeClass(enum.Enum):
    RATE0 = "rate0"
    RATE1 = "rate1"
    REP = "rep"
    SPC = "spc"
    GENERIC = "generic"


@dataclass(frozen=True)
class Caps:
    """Largest node size handled by each specialized class.

    ``None`` means unlimited, ``0`` disables the class.  Size-1 nodes are
    always leaves (rate-0 or rate-1) whatever the caps say.
    """

    rate0_max: Optional[int] = None
    rate1_max: Optional[int] = None
    rep_max: Optional[int] = None
    spc_max: Optional[int] = None

    def allows(self, cap, size):
        return cap is None or size <= cap


SC_CAPS = Caps()
# list nodes are enumerated exhaustively, so rate-1 and SPC stay small
LIST_CAPS = Caps(rate1_max=4, spc_max=4)
UNPRUNED_CAPS = Caps(rate0_max=1, rate1_max=1, rep_max=0, spc_max=0)


@dataclass(frozen=True, eq=False)
class Node:
    kind: NodeClass
    start: int
    size: int
    depth: int
    left: Optional["Node"] = None
    right: Optional["Node"] = None

    @property
    def is_leaf(self):
        return self.kind is not NodeClass.GENERIC


def _node_kind(frozen, caps):
    size = frozen.size
    n_frozen = int(np.count_nonzero(frozen))
    if n_frozen == size:
        return NodeClass.RATE0 if size == 1 or caps.allows(caps.rate0_max, size) else None
    if n_frozen == 0:
        return NodeClass.RATE1 if size == 1 or caps.allows(caps.rate1_max, size) else None
    if n_frozen == size - 1 and not frozen[-1] and caps.rep_max != 0 \
            and caps.allows(caps.rep_max, size):
        return NodeClass.REP
    if n_frozen == 1 and frozen[0] and caps.spc_max != 0 \
            and caps.allows(caps.spc_max, size):
        return NodeClass.SPC
    return None


class TreePlan:
    """Maximally pruned decomposition of a frozen set."""

    def __init__(self, frozen, caps):
        self.frozen = np.asarray(frozen, dtype=bool)
        n = self.frozen.size
        if n < 1 or n & (n - 1):
            raise ValueError(f"frozen set length must be a power of two, got {n}")
        self.n = n
        self.caps = caps
        self.root = self._build(0, n, 0)

    def _build(self, start, size, depth):
        kind = _node_kind(self.frozen[start:start + size], self.caps)
        if kind is not None:
            return Node(kind, start, size, depth)
        h = size // 2
        return Node(NodeClass.GENERIC, start, size, depth,
                    self._build(start, h, depth + 1),
                    self._build(start + h, h, depth + 1))

    def nodes(self):
        """Pre-order traversal."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if node.kind is NodeClass.GENERIC:
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self):
        return [nd for nd in self.nodes() if nd.is_leaf]

    def counts(self):
        out = {k: 0 for k in NodeClass}
        for nd in self.nodes():
            out[nd.kind] += 1
        return out

    def is_unpruned(self):
        return all(nd.size == 1 for nd in self.leaves())


def classify_tree(frozen_set, caps=SC_CAPS):
    frozen = getattr(frozen_set, "frozen", frozen_set)
    return TreePlan(frozen, caps)


@lru_cache(maxsize=None)
def _node_words(pattern):
    frozen = np.array(pattern, dtype=bool)
    size = frozen.size
    info = np.flatnonzero(~frozen)
    k = info.size
    words = np.zeros((1 << k, size), dtype=np.uint8)
    for c in range(1 << k):
        u = np.zeros(size, dtype=np.uint8)
        for j, pos in enumerate(info):
            # first information leaf is the most significant bit of c
            u[pos] = (c >> (k - 1 - j)) & 1
        h = 1
        while h < size:
            for base in range(0, size, 2 * h):
                u[base:base + h] ^= u[base + h:base + 2 * h]
            h *= 2
        words[c] = u
    words.setflags(write=False)
    return words


def node_codewords(frozen_slice):
    """All codewords of a constituent node, ordered by source word.

    Row ``c`` is the codeword of the source word whose information leaves,
    read first to last, spell ``c`` in binary.  This matches the order in
    which bit-by-bit list decoding creates the same candidates.
    """
    return _node_words(tuple(bool(x) for x in frozen_slice))


def leaf_pattern(kind, size):
    frozen = np.zeros(size, dtype=bool)
    if kind is NodeClass.RATE0:
        frozen[:] = True
    elif kind is NodeClass.REP:
        frozen[:-1] = True
    elif kind is NodeClass.SPC:
        frozen[0] = True
    elif kind is not NodeClass.RATE1:
        raise ValueError(f"{kind} is not a leaf class")
    return frozen
