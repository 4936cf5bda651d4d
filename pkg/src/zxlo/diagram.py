"""Typed term-tree IR for diagrams.

A diagram is a leaf generator, a sequential composite, or a parallel
composite. Signatures (domain/codomain wire-kind tuples) are computed
once at construction and cached; Seq construction checks that the
junction types align. The total order on classical commands is the
left-to-right, bottom-up traversal order, which is invariant under
re-association of Seq and Par.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

from .errors import NoAdjoint, NotPure, TypeMismatch
from .generators import (
    DRMerge,
    DRSplit,
    Discard,
    Generator,
    Id,
    Swap,
    Triangle,
)
from .wires import DUALRAIL, MODE, WireKind

Sig = Tuple[WireKind, ...]


@dataclass(frozen=True)
class Diagram:
    """Base class; use Leaf/Seq/Par or the helpers below."""

    def dom(self) -> Sig:
        raise NotImplementedError

    def cod(self) -> Sig:
        raise NotImplementedError

    def leaves(self) -> Iterator[Generator]:
        """Left-to-right bottom-up traversal of generator leaves."""
        raise NotImplementedError

    # composition sugar
    def then(self, other: "Diagram") -> "Diagram":
        return Seq(self, other)

    def __rshift__(self, other: "Diagram") -> "Diagram":
        return Seq(self, other)

    def __matmul__(self, other: "Diagram") -> "Diagram":
        return Par(self, other)

    @property
    def is_pure(self) -> bool:
        return all(g.is_pure for g in self.leaves())

    def substitute(self, env: dict) -> "Diagram":
        raise NotImplementedError

    def dagger(self) -> "Diagram":
        raise NotImplementedError


@dataclass(frozen=True)
class Leaf(Diagram):
    gen: Generator

    def dom(self):
        return self.gen.dom()

    def cod(self):
        return self.gen.cod()

    def leaves(self):
        yield self.gen

    def substitute(self, env):
        return Leaf(self.gen.substitute(env))

    def dagger(self):
        return Leaf(self.gen.dagger())


class Seq(Diagram):
    first: Diagram
    second: Diagram

    def __init__(self, first: Diagram, second: Diagram):
        if first.cod() != second.dom():
            raise TypeMismatch("seq junction", first.cod(), second.dom())
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)

    def __eq__(self, other):
        return (
            isinstance(other, Seq)
            and self.first == other.first
            and self.second == other.second
        )

    def __hash__(self):
        return hash(("seq", self.first, self.second))

    def __repr__(self):
        return f"Seq({self.first!r}, {self.second!r})"

    def dom(self):
        return self.first.dom()

    def cod(self):
        return self.second.cod()

    def leaves(self):
        yield from self.first.leaves()
        yield from self.second.leaves()

    def substitute(self, env):
        return Seq(self.first.substitute(env), self.second.substitute(env))

    def dagger(self):
        return Seq(self.second.dagger(), self.first.dagger())


@dataclass(frozen=True)
class Par(Diagram):
    left: Diagram
    right: Diagram

    def dom(self):
        return self.left.dom() + self.right.dom()

    def cod(self):
        return self.left.cod() + self.right.cod()

    def leaves(self):
        yield from self.left.leaves()
        yield from self.right.leaves()

    def substitute(self, env):
        return Par(self.left.substitute(env), self.right.substitute(env))

    def dagger(self):
        return Par(self.left.dagger(), self.right.dagger())


def gen(g: Generator) -> Diagram:
    return Leaf(g)


def identity(wires: Sequence[WireKind]) -> Diagram:
    """Identity diagram on a wire list (empty scalar for no wires)."""
    wires = tuple(wires)
    if not wires:
        from .generators import Scalar

        return Leaf(Scalar(1.0))
    d = Leaf(Id(wires[0]))
    for w in wires[1:]:
        d = Par(d, Leaf(Id(w)))
    return d


def seq_all(*parts: Diagram) -> Diagram:
    d = parts[0]
    for p in parts[1:]:
        d = Seq(d, p)
    return d


def par_all(*parts: Diagram) -> Diagram:
    d = parts[0]
    for p in parts[1:]:
        d = Par(d, p)
    return d


def validate(d: Diagram) -> Tuple[Sig, Sig]:
    """Walk the tree re-checking every Seq junction; return (dom, cod)."""

    def walk(node: Diagram) -> Tuple[Sig, Sig]:
        if isinstance(node, Leaf):
            return node.dom(), node.cod()
        if isinstance(node, Seq):
            d1, c1 = walk(node.first)
            d2, c2 = walk(node.second)
            if c1 != d2:
                raise TypeMismatch("seq junction", c1, d2)
            return d1, c2
        if isinstance(node, Par):
            d1, c1 = walk(node.left)
            d2, c2 = walk(node.right)
            return d1 + d2, c1 + c2
        raise TypeError(f"not a diagram node: {node!r}")

    return walk(d)


def compose(d1: Diagram, d2: Diagram, mode: str = "seq") -> Diagram:
    if mode == "seq":
        return Seq(d1, d2)
    if mode == "par":
        return Par(d1, d2)
    raise ValueError("mode must be 'seq' or 'par'")


def dagger(d: Diagram) -> Diagram:
    """Adjoint of a pure diagram (reverses Seq, daggers leaves)."""
    for g in d.leaves():
        if isinstance(g, Triangle):
            raise NoAdjoint("triangle appears in the diagram")
        if not g.is_pure:
            raise NotPure(f"channel command {g!r} present")
    return d.dagger()


def command_order(d: Diagram) -> List[Generator]:
    """Classical commands (non-pure leaves) in traversal order."""
    return [g for g in d.leaves() if not g.is_pure]


def permutation_diagram(wires: Sequence[WireKind], perm: Sequence[int]) -> Diagram:
    """Diagram permuting wires so output slot j carries input wire perm[j].

    Built from adjacent Swap generators (bubble placement), so it stays
    inside the generator set.
    """
    wires = list(wires)
    perm = list(perm)
    n = len(wires)
    assert sorted(perm) == list(range(n))
    # current[i] = which input wire currently sits at position i
    current = list(range(n))
    stages: List[Tuple[int, WireKind, WireKind]] = []
    for target_pos in range(n):
        src = current.index(perm[target_pos])
        while src > target_pos:
            a, b = current[src - 1], current[src]
            stages.append((src - 1, wires[a], wires[b]))
            current[src - 1], current[src] = b, a
            src -= 1
    if not stages:
        return identity(wires)
    # realize stages as Seq of (Id ... Swap ... Id) layers
    kind_at = list(wires)
    result = None
    kinds = list(wires)
    # replay to track kinds at positions
    kinds_positions = list(range(n))
    layer_kinds = list(wires)
    current = list(range(n))
    for pos, ka, kb in stages:
        parts: List[Diagram] = []
        for i in range(n):
            if i == pos:
                parts.append(Leaf(Swap(layer_kinds[pos], layer_kinds[pos + 1])))
            elif i == pos + 1:
                continue
            else:
                parts.append(Leaf(Id(layer_kinds[i])))
        layer = par_all(*parts)
        layer_kinds[pos], layer_kinds[pos + 1] = layer_kinds[pos + 1], layer_kinds[pos]
        result = layer if result is None else Seq(result, layer)
    return result


def lower_dual_rail(d: Diagram) -> Diagram:
    """Replace every DualRail wire by Mode x Mode.

    Leaves with DualRail wires are wrapped in DRSplit/DRMerge so the
    interpretation is unchanged; the result contains no DualRail wires.
    """

    def lower_sig(sig: Sig) -> Sig:
        out: List[WireKind] = []
        for w in sig:
            out.extend((MODE, MODE) if w is DUALRAIL else (w,))
        return tuple(out)

    def merge_layer(sig: Sig) -> Diagram:
        """Mode,Mode -> DualRail on each lowered slot (lowered sig -> sig)."""
        parts = []
        for w in sig:
            parts.append(Leaf(DRMerge()) if w is DUALRAIL else identity((w,)))
        return par_all(*parts)

    def split_layer(sig: Sig) -> Diagram:
        parts = []
        for w in sig:
            parts.append(Leaf(DRSplit()) if w is DUALRAIL else identity((w,)))
        return par_all(*parts)

    def walk(node: Diagram) -> Diagram:
        if isinstance(node, Seq):
            return Seq(walk(node.first), walk(node.second))
        if isinstance(node, Par):
            return Par(walk(node.left), walk(node.right))
        g = node.gen
        if isinstance(g, (DRSplit, DRMerge)):
            # DRSplit lowers to identity on Mode,Mode; likewise DRMerge
            return identity((MODE, MODE))
        if isinstance(g, Id) and g.kind is DUALRAIL:
            return identity((MODE, MODE))
        if isinstance(g, Discard) and g.kind is DUALRAIL:
            return Par(Leaf(Discard(MODE)), Leaf(Discard(MODE)))
        if isinstance(g, Swap) and (g.kind_a is DUALRAIL or g.kind_b is DUALRAIL):
            lowered_dom = lower_sig(g.dom())
            n = len(lowered_dom)
            a_width = 2 if g.kind_a is DUALRAIL else 1
            b_width = n - a_width
            perm = list(range(a_width, n)) + list(range(a_width))
            return permutation_diagram(lowered_dom, perm)
        dom, cod = g.dom(), g.cod()
        if DUALRAIL not in dom and DUALRAIL not in cod:
            return node
        # generic: re-merge around the original generator
        pre = merge_layer(dom) if DUALRAIL in dom else identity(dom)
        post = split_layer(cod) if DUALRAIL in cod else identity(cod)
        mid: Diagram = node
        if DUALRAIL in dom:
            mid = Seq(pre, mid)
        if DUALRAIL in cod:
            mid = Seq(mid, post)
        return mid

    return walk(d)
