"""Qubit-level composite diagrams built from the base generators."""

from __future__ import annotations

import math
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from . import exprs
from .diagram import (
    Diagram,
    Leaf,
    Par,
    Seq,
    identity,
    par_all,
    permutation_diagram,
    seq_all,
)
from .generators import (
    CtrlX,
    CtrlZ,
    Hadamard,
    Id,
    QubitMeasure,
    QubitPrep,
    Scalar,
    XSpider,
    ZSpider,
)
from .wires import Phase, QUBIT, WireKind, ZERO_PHASE


def z_rot(alpha: Union[Phase, float]) -> Diagram:
    return Leaf(ZSpider(1, 1, Phase.coerce(alpha)))


def x_rot(alpha: Union[Phase, float]) -> Diagram:
    return Leaf(XSpider(1, 1, Phase.coerce(alpha)))


def hadamard() -> Diagram:
    return Leaf(Hadamard())


def s_gate(dagger: bool = False) -> Diagram:
    return z_rot(Phase.of_pi(-1 if dagger else 1, 2))


def cz_diagram() -> Diagram:
    """CZ on two qubits, from spiders and a scalar."""
    spiders = Par(Leaf(ZSpider(1, 2)), Leaf(ZSpider(1, 2)))  # [q1,a,q2,b]
    reorder = permutation_diagram((QUBIT,) * 4, (0, 2, 1, 3))  # -> [q1,q2,a,b]
    cap = Par(
        identity((QUBIT, QUBIT)),
        Seq(Par(hadamard(), identity((QUBIT,))), Leaf(ZSpider(2, 0))),
    )
    return Par(seq_all(spiders, reorder, cap), Leaf(Scalar(math.sqrt(2))))


def cnot_diagram() -> Diagram:
    """CNOT (first wire control), from spiders and a scalar."""
    top = Par(Leaf(ZSpider(1, 2)), identity((QUBIT,)))  # [c,a,t]
    bottom = Par(identity((QUBIT,)), Leaf(XSpider(2, 1)))  # [c,t]
    return Par(Seq(top, bottom), Leaf(Scalar(math.sqrt(2))))


def on_wires(d: Diagram, wires: Sequence[int], total: int) -> Diagram:
    """Apply a qubit diagram to the given wire indices of a register.

    The diagram must map k qubits to k qubits; remaining wires are
    untouched. Realized by permuting the chosen wires to the front.
    """
    wires = list(wires)
    k = len(d.dom())
    assert len(wires) == k and len(d.cod()) == k
    rest = [i for i in range(total) if i not in wires]
    perm_in = wires + rest  # front slots take the chosen wires
    before = permutation_diagram((QUBIT,) * total, tuple(perm_in))
    mid = Par(d, identity((QUBIT,) * (total - k))) if total > k else d
    # inverse permutation
    inv = [0] * total
    for slot, src in enumerate(perm_in):
        inv[src] = slot
    after = permutation_diagram((QUBIT,) * total, tuple(inv))
    return seq_all(before, mid, after)


def plus_states(n: int) -> Diagram:
    return par_all(*(Leaf(QubitPrep("+")) for _ in range(n)))


def graph_state_diagram(n: int, edges: Iterable[Tuple[int, int]]) -> Diagram:
    """|+>^n with CZ along the edges: 0 -> n qubits."""
    d = plus_states(n)
    for u, v in edges:
        d = Seq(d, on_wires(cz_diagram(), (u, v), n))
    return d


def entangler(n: int, edges: Iterable[Tuple[int, int]]) -> Diagram:
    """E_G: CZ along the edges on an existing n-qubit register."""
    d = identity((QUBIT,) * n)
    for u, v in edges:
        d = Seq(d, on_wires(cz_diagram(), (u, v), n))
    return d


def measure_in_plane(
    plane: str, alpha: Union[Phase, float], outcome: Union[int, str]
) -> Diagram:
    """One-qubit destructive measurement effect <+/-_{plane,alpha}|.

    Matches the effect convention of the fusion command and target maps:
    XY: (<0| +/- e^{ia}<1|)/sqrt2, YZ: (<+| +/- e^{ia}<-|)/sqrt2,
    XZ: (<i| +/- e^{ia}<-i|)/sqrt2; X/Y/Z are the Pauli specials.
    """
    alpha = Phase.coerce(alpha)
    m = Leaf(QubitMeasure("X", outcome))
    if plane == "Z":
        return Leaf(QubitMeasure("Z", outcome))
    if plane == "X":
        return m
    if plane == "Y":
        return Seq(z_rot(Phase.of_pi(1, 2)), m)
    if plane == "XY":
        return Seq(z_rot(alpha), m)
    if plane == "YZ":
        return seq_all(hadamard(), z_rot(alpha), m)
    if plane == "XZ":
        return seq_all(z_rot(Phase.of_pi(-1, 2)), hadamard(), z_rot(alpha), m)
    raise ValueError(f"unknown plane {plane!r}")


def correction_x(control: exprs.Expr) -> Diagram:
    return Leaf(CtrlX(control))


def correction_z(control: exprs.Expr) -> Diagram:
    return Leaf(CtrlZ(control))


def bell_pair() -> Diagram:
    """0 -> 2 qubits, (|00> + |11>)/sqrt2."""
    return graph_state_diagram(2, [(0, 1)]) >> Par(
        identity((QUBIT,)), hadamard()
    )
