"""Stream-level building blocks: lattices, routers, measurement and
correction modules, and resource-state generators.

Lattice streams grow a cylinder (duocylinder for the interleaved
two-layer lattice) one layer per time step: each slice prepares the
next layer of ``|+>`` qubits, entangles it with the layer held in
memory, and emits the completed previous layer on the output wires so
a downstream module can measure it.  Entangling edges are applied as
CZ gates indexed around the ring, so at circumference 2 a doubled ring
edge cancels (CZ^2 = id); the adjacency helpers below use the same
mod-2 convention.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from . import exprs
from .channel import Annotation, ChannelDiagram, coarse
from .diagram import Diagram, Leaf, Par, Seq, identity, par_all, permutation_diagram, seq_all
from .errors import BadPermutation, Unsupported
from .fusion import dual_rail_gate
from .generators import (
    CtrlModeSwap,
    CtrlPhaseFlip,
    Discard,
    PhotonDetect,
    PhotonPrep,
    QubitPrep,
    ZSpider,
)
from .interp import _plane_effect, interpret
from .qubits import entangler, graph_state_diagram, measure_in_plane, plus_states
from .streams import ObjectSeq, StreamSpec, compose_seq, memoryless
from .wires import MODE, QUBIT, Phase, WireKind

Kinds = Tuple[WireKind, ...]

LATTICE_SHAPES = ("triangular", "rectangular", "honeycomb", "raussendorf")


# ---------------------------------------------------------------------------
# Abstract lattice adjacency (mod-2 edge toggling, matching CZ semantics)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeGraph:
    """Vertex/edge data of a finite lattice patch."""

    vertices: Tuple[Tuple, ...]
    edges: frozenset

    def degree(self, v) -> int:
        return sum(1 for e in self.edges if v in e)


def _toggle(edges: Set[frozenset], u, v) -> None:
    if u == v:
        return
    e = frozenset((u, v))
    if e in edges:
        edges.remove(e)
    else:
        edges.add(e)


def lattice_graph(shape: str, d: int, n: int) -> LatticeGraph:
    """Adjacency of the patch produced by ``unroll_n(make_lattice(shape, d))``.

    Vertices are labelled ``(t, i)`` (layer, ring position); the
    two-layer interleaved shapes use ``(t, family, i, j)``.
    """
    if d < 2:
        raise Unsupported("lattice circumference must be at least 2")
    edges: Set[frozenset] = set()
    verts: List[Tuple] = []
    if shape in ("triangular", "rectangular"):
        for t in range(n + 1):
            for i in range(d):
                verts.append((t, i))
        for t in range(n + 1):
            for i in range(d):
                _toggle(edges, (t, i), (t, (i + 1) % d))
            if t < n:
                for i in range(d):
                    _toggle(edges, (t, i), (t + 1, i))
                    if shape == "triangular":
                        _toggle(edges, (t, i), (t + 1, (i + 1) % d))
    elif shape == "honeycomb":
        # bipartition: "a" vertices carry the logical lattice, each "b"
        # vertex sits on a face and joins (t,i), (t,i+1), (t+1,i+1).
        for t in range(n + 1):
            for i in range(d):
                verts.append((t, "a", i))
        for t in range(n):
            for i in range(d):
                verts.append((t, "b", i))
                _toggle(edges, (t, "b", i), (t, "a", i))
                _toggle(edges, (t, "b", i), (t, "a", (i + 1) % d))
                _toggle(edges, (t, "b", i), (t + 1, "a", (i + 1) % d))
    elif shape == "raussendorf":
        # Alternating layers of a foliated two-layer cell on a d x d
        # torus.  Even layers hold transverse faces and the two families
        # of in-layer edges; odd layers hold longitudinal edges and the
        # two families of longitudinal faces.
        for t in range(n + 1):
            fams = ("xy", "xe", "ye") if t % 2 == 0 else ("ze", "xz", "yz")
            for f in fams:
                for i in range(d):
                    for j in range(d):
                        verts.append((t, f, i, j))
        for t in range(n + 1):
            for i in range(d):
                for j in range(d):
                    if t % 2 == 0:
                        _toggle(edges, (t, "xy", i, j), (t, "xe", i, j))
                        _toggle(edges, (t, "xy", i, j), (t, "xe", i, (j + 1) % d))
                        _toggle(edges, (t, "xy", i, j), (t, "ye", i, j))
                        _toggle(edges, (t, "xy", i, j), (t, "ye", (i + 1) % d, j))
                        if t < n:
                            _toggle(edges, (t, "xe", i, j), (t + 1, "xz", i, j))
                            _toggle(edges, (t, "ye", i, j), (t + 1, "yz", i, j))
                    else:
                        _toggle(edges, (t, "ze", i, j), (t, "xz", i, j))
                        _toggle(edges, (t, "ze", i, j), (t, "xz", (i - 1) % d, j))
                        _toggle(edges, (t, "ze", i, j), (t, "yz", i, j))
                        _toggle(edges, (t, "ze", i, j), (t, "yz", i, (j - 1) % d))
                        if t < n:
                            _toggle(edges, (t, "xz", i, j), (t + 1, "xe", i, j))
                            _toggle(edges, (t, "yz", i, j), (t + 1, "ye", i, j))
    else:
        raise Unsupported(f"unknown lattice shape {shape!r}")
    return LatticeGraph(tuple(verts), frozenset(edges))


# ---------------------------------------------------------------------------
# Lattice streams
# ---------------------------------------------------------------------------


def _graph_slice(
    n_mem: int, n_new: int, cz_edges: Sequence[Tuple[int, int]],
    mem_out: Sequence[int], emit: Sequence[int],
) -> ChannelDiagram:
    """Memory block (wires 0..n_mem-1) plus freshly prepared |+> block;
    CZ along ``cz_edges``; outputs reordered to [next memory, emitted]."""
    total = n_mem + n_new
    if n_mem and n_new:
        d: Diagram = Par(identity((QUBIT,) * n_mem), plus_states(n_new))
    elif n_new:
        d = plus_states(n_new)
    else:
        d = identity((QUBIT,) * n_mem)
    if cz_edges:
        d = Seq(d, entangler(total, cz_edges))
    perm = list(mem_out) + list(emit)
    if perm != list(range(total)):
        d = Seq(d, permutation_diagram((QUBIT,) * total, perm))
    return ChannelDiagram.of(d)


def make_lattice(shape: str, d: int) -> StreamSpec:
    """Constant generating stream of the named lattice on a cylinder.

    Memory carries the most recent layer; at every step the completed
    previous layer leaves on the output wires, unmeasured, so callers
    attach their own plane/angle labels downstream.
    """
    if shape not in LATTICE_SHAPES:
        raise Unsupported(f"unknown lattice shape {shape!r}")
    if d < 2:
        raise Unsupported("lattice circumference must be at least 2")
    ring = [(i, (i + 1) % d) for i in range(d)]

    if shape in ("triangular", "rectangular"):
        col = (QUBIT,) * d

        def cross(base: int) -> List[Tuple[int, int]]:
            edges = [(base + i, base + d + i) for i in range(d)]
            if shape == "triangular":
                edges += [(base + i, base + d + (i + 1) % d) for i in range(d)]
            return edges

        def slices(t: int) -> ChannelDiagram:
            if t == 0:
                edges = [(a, b) for a, b in ring]
                edges += [(d + a, d + b) for a, b in ring]
                edges += cross(0)
                return _graph_slice(0, 2 * d, edges, list(range(d, 2 * d)), list(range(d)))
            edges = cross(0) + [(d + a, d + b) for a, b in ring]
            return _graph_slice(d, d, edges, list(range(d, 2 * d)), list(range(d)))

        return StreamSpec(
            memory=ObjectSeq.of([()], [col]),
            inputs=ObjectSeq.constant(()),
            outputs=ObjectSeq.constant(col),
            slices=slices,
        )

    if shape == "honeycomb":
        col = (QUBIT,) * d

        def hex_edges() -> List[Tuple[int, int]]:
            # wires: 0..d-1 "a" layer t; d..2d-1 "b" layer t; 2d.. "a" layer t+1
            edges = []
            for i in range(d):
                b = d + i
                edges += [(b, i), (b, (i + 1) % d), (b, 2 * d + (i + 1) % d)]
            return edges

        def slices(t: int) -> ChannelDiagram:
            if t == 0:
                return _graph_slice(
                    0, 3 * d, hex_edges(),
                    list(range(2 * d, 3 * d)), list(range(2 * d)),
                )
            return _graph_slice(
                d, 2 * d, hex_edges(),
                list(range(2 * d, 3 * d)),
                list(range(2 * d)),
            )

        return StreamSpec(
            memory=ObjectSeq.of([()], [col]),
            inputs=ObjectSeq.constant(()),
            outputs=ObjectSeq.constant((QUBIT,) * (2 * d)),
            slices=slices,
        )

    # raussendorf: alternating layer families on a d x d torus
    m = d * d
    layer = (QUBIT,) * (3 * m)

    def idx(block: int, i: int, j: int) -> int:
        return block * m + (i % d) * d + (j % d)

    def intra_edges(parity: int, off: int) -> List[Tuple[int, int]]:
        edges: List[Tuple[int, int]] = []
        for i in range(d):
            for j in range(d):
                hub = off + idx(0, i, j)
                if parity == 0:
                    # transverse face joined to the four in-layer edges
                    edges += [
                        (hub, off + idx(1, i, j)),
                        (hub, off + idx(1, i, (j + 1) % d)),
                        (hub, off + idx(2, i, j)),
                        (hub, off + idx(2, (i + 1) % d, j)),
                    ]
                else:
                    # longitudinal edge joined to the adjacent faces
                    edges += [
                        (hub, off + idx(1, i, j)),
                        (hub, off + idx(1, (i - 1) % d, j)),
                        (hub, off + idx(2, i, j)),
                        (hub, off + idx(2, i, (j - 1) % d)),
                    ]
        return edges

    def inter_edges(off: int) -> List[Tuple[int, int]]:
        return [
            (idx(b, i, j), off + idx(b, i, j))
            for b in (1, 2)
            for i in range(d)
            for j in range(d)
        ]

    def slices(t: int) -> ChannelDiagram:
        if t == 0:
            edges = intra_edges(0, 0) + intra_edges(1, 3 * m) + inter_edges(3 * m)
            return _graph_slice(
                0, 6 * m, edges, list(range(3 * m, 6 * m)), list(range(3 * m))
            )
        edges = intra_edges((t + 1) % 2, 3 * m) + inter_edges(3 * m)
        return _graph_slice(
            3 * m, 3 * m, edges,
            list(range(3 * m, 6 * m)), list(range(3 * m)),
        )

    return StreamSpec(
        memory=ObjectSeq.of([()], [layer]),
        inputs=ObjectSeq.constant(()),
        outputs=ObjectSeq.constant(layer),
        slices=slices,
    )


LabelFn = Callable[[int, int], Tuple[str, Union[Phase, float]]]


def measure_layers(spec: StreamSpec, label: LabelFn, horizon: int = 64) -> StreamSpec:
    """Compose a lattice stream with postselected plane measurements.

    ``label(t, i)`` gives the plane and angle of output qubit ``i`` at
    step ``t``; every outcome is postselected to the reference branch,
    so the result is a stream of pure slices suitable for comparing
    linear maps up to scalar.
    """

    def mslice(t: int) -> ChannelDiagram:
        kinds = spec.outputs.at(t)
        if not kinds:
            return ChannelDiagram.of(identity(()))
        effs = []
        for i, k in enumerate(kinds):
            if k is not QUBIT:
                raise Unsupported("measure_layers expects qubit outputs")
            plane, alpha = label(t, i)
            effs.append(measure_in_plane(plane, alpha, 0))
        return ChannelDiagram.of(par_all(*effs))

    meas = StreamSpec(
        memory=ObjectSeq.constant(()),
        inputs=spec.outputs,
        outputs=ObjectSeq.constant(()),
        slices=mslice,
        horizon=horizon,
    )
    return compose_seq(meas, spec)


# ---------------------------------------------------------------------------
# Routers
# ---------------------------------------------------------------------------


def _vac() -> Diagram:
    return Leaf(PhotonPrep(0))


def router_binary() -> StreamSpec:
    """One optical mode in, two out; alternates the exit slot with t."""

    def slices(t: int) -> ChannelDiagram:
        if t % 2 == 0:
            d = Par(identity((MODE,)), _vac())
        else:
            d = Par(_vac(), identity((MODE,)))
        return ChannelDiagram.of(d)

    return memoryless(slices, ObjectSeq.constant((MODE,)), ObjectSeq.constant((MODE, MODE)))


def router_2to1() -> StreamSpec:
    """Two optical modes in, one out; keeps the slot selected by t."""

    def slices(t: int) -> ChannelDiagram:
        keep_first = t % 2 == 0
        if keep_first:
            d = Par(identity((MODE,)), Leaf(Discard(MODE)))
        else:
            d: Diagram = Seq(
                permutation_diagram((MODE, MODE), [1, 0]),
                Par(identity((MODE,)), Leaf(Discard(MODE))),
            )
        return ChannelDiagram.of(d)

    return memoryless(slices, ObjectSeq.constant((MODE, MODE)), ObjectSeq.constant((MODE,)))


def permutation_router(sigma: Sequence[int], d: int) -> StreamSpec:
    """Route photon time-bins through a 2d-slot delay bank so that the
    block of arrivals (t mod d) leaves in the order fixed by ``sigma``.

    The photon entering at step t is written ``d + sigma(t mod d)``
    slots ahead; the front slot leaves at every step.
    """
    sigma = list(sigma)
    if sorted(sigma) != list(range(d)):
        raise BadPermutation(f"{sigma} is not a permutation of range({d})")
    n = 2 * d
    bank = (MODE,) * n

    def slices(t: int) -> ChannelDiagram:
        delta = d + sigma[t % d]
        # wires: [bank 0..n-1, input]; outputs [next bank, exit]
        perm = []
        for j in range(n):
            if j == delta - 1:
                perm.append(n)  # the fresh photon parks here
            elif j == n - 1:
                perm.append(delta)  # displaced (empty) slot recirculates
            else:
                perm.append(j + 1)
        perm.append(0)  # front slot exits
        route = permutation_diagram(bank + (MODE,), perm)
        if t == 0:
            prep = par_all(*([_vac()] * n + [identity((MODE,))]))
            return ChannelDiagram.of(Seq(prep, route))
        return ChannelDiagram.of(route)

    return StreamSpec(
        memory=ObjectSeq.of([()], [bank]),
        inputs=ObjectSeq.constant((MODE,)),
        outputs=ObjectSeq.constant((MODE,)),
        slices=slices,
    )


# ---------------------------------------------------------------------------
# Measurement and correction modules (dual-rail optics on mode pairs)
# ---------------------------------------------------------------------------


def euler_zxz(u: np.ndarray, tol: float = 1e-9) -> Tuple[float, float, float]:
    """Angles (a, b, g) with Z(g) X(b) Z(a) = u up to global phase."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise Unsupported("euler decomposition expects a 2x2 matrix")
    b = 2.0 * math.acos(min(1.0, max(0.0, abs(u[0, 0]))))
    cos_half = math.cos(b / 2.0)
    sin_half = math.sin(b / 2.0)
    if cos_half > tol:
        phi = cmath.phase(u[0, 0] / cos_half)
        base = cmath.exp(1j * phi)
        a = cmath.phase((2.0 * u[0, 1]) / ((1 - cmath.exp(1j * b)) * base)) if sin_half > tol else 0.0
        g = cmath.phase((2.0 * u[1, 0]) / ((1 - cmath.exp(1j * b)) * base)) if sin_half > tol else cmath.phase(u[1, 1] / (cos_half * base * cmath.exp(1j * a)))
    else:
        # pure X-type rotation: u00 = 0, b = pi
        base = u[0, 1] / 1.0
        a = 0.0
        g = cmath.phase(u[1, 0] / base)
    # verify, fixing the X(b) phase convention numerically
    za = np.diag([1.0, cmath.exp(1j * a)])
    zg = np.diag([1.0, cmath.exp(1j * g)])
    xb = 0.5 * np.array(
        [[1 + cmath.exp(1j * b), 1 - cmath.exp(1j * b)],
         [1 - cmath.exp(1j * b), 1 + cmath.exp(1j * b)]]
    )
    m = zg @ xb @ za
    num = np.vdot(m.reshape(-1), u.reshape(-1))
    if abs(num) < tol:
        raise Unsupported("euler decomposition failed")
    z = num / abs(num)
    if np.max(np.abs(m * np.conj(z) * 0 + m - z * u)) > 1e-7:
        raise Unsupported("euler decomposition residual too large")
    return (a, b, g)


def _plane_basis_gate(plane: str, alpha: Union[Phase, float]) -> Diagram:
    """Dual-rail circuit rotating the (plane, alpha) basis to the rails."""
    rad = alpha.radians if isinstance(alpha, Phase) else float(alpha)
    u = np.array([_plane_effect(plane, rad, 0), _plane_effect(plane, rad, 1)])
    return dual_rail_gate(euler_zxz(u))


def measurement_module(
    plane_fn: Callable[[int], str],
    alpha_fn: Callable[[int], Union[Phase, float]],
    var: str = "m",
) -> StreamSpec:
    """Plane measurement of one dual-rail photon (a pair of rails) per
    step: rotate the requested basis onto the rails, then count both
    detectors.  The coarse outcome ``m`` is 1 when the photon lands in
    the first rail."""

    def slices(t: int) -> ChannelDiagram:
        gate = _plane_basis_gate(plane_fn(t), alpha_fn(t))
        det = Par(Leaf(PhotonDetect("_r0")), Leaf(PhotonDetect("_r1")))
        ann = [coarse(var, ("mod", ("add", "_r0", ("mul", 0, "_r1")), 2))]
        return ChannelDiagram.of(Seq(gate, det), ann)

    return memoryless(slices, ObjectSeq.constant((MODE, MODE)), ObjectSeq.constant(()))


def correction_module(
    x_fn: Callable[[int], exprs.Expr],
    z_fn: Callable[[int], exprs.Expr],
) -> StreamSpec:
    """Classically switched Pauli correction on one dual-rail photon:
    a controlled rail swap (X) followed by a controlled sign flip on
    the occupied-is-one rail (Z)."""

    def slices(t: int) -> ChannelDiagram:
        d = seq_all(
            Leaf(CtrlModeSwap(x_fn(t))),
            Par(Leaf(CtrlPhaseFlip(z_fn(t))), identity((MODE,))),
        )
        return ChannelDiagram.of(d)

    return memoryless(slices, ObjectSeq.constant((MODE, MODE)), ObjectSeq.constant((MODE, MODE)))


# ---------------------------------------------------------------------------
# Resource-state generators
# ---------------------------------------------------------------------------


def rsg_constant(n: int, edges: Sequence[Tuple[int, int]]) -> StreamSpec:
    """Emit the same n-qubit graph state at every step."""
    g = graph_state_diagram(n, edges)
    return memoryless(
        lambda t: ChannelDiagram.of(g),
        ObjectSeq.constant(()),
        ObjectSeq.constant((QUBIT,) * n),
    )


def emitter(u_fn: Optional[Callable[[int], Optional[Diagram]]] = None) -> StreamSpec:
    """Single matter qubit emitting one entangled photon per step.

    Each slice applies the internal one-qubit box ``u_fn(t)`` (identity
    when absent) and then copies the matter qubit onto a fresh photonic
    qubit; with the identity box the unrolling is a GHZ state of the
    atom and all emitted photons."""

    def slices(t: int) -> ChannelDiagram:
        d: Diagram = Leaf(ZSpider(1, 2))
        u = u_fn(t) if u_fn is not None else None
        if u is not None:
            d = Seq(u, d)
        return ChannelDiagram.of(d)

    return StreamSpec(
        memory=ObjectSeq.constant((QUBIT,)),
        inputs=ObjectSeq.constant(()),
        outputs=ObjectSeq.constant((QUBIT,)),
        slices=slices,
    )


def matter_qpu(
    n: int,
    u_fn: Callable[[int], Optional[Diagram]],
    emit: int = 0,
) -> StreamSpec:
    """An n-qubit matter register applying a programmed box per step.

    When ``emit`` > 0, the slice prepares that many fresh |0> qubits,
    lets the box act on register + fresh qubits, and emits the fresh
    ones."""

    def slices(t: int) -> ChannelDiagram:
        total = n + emit
        d: Diagram = identity((QUBIT,) * n)
        if emit:
            d = Par(d, par_all(*(Leaf(QubitPrep("0")) for _ in range(emit))))
        u = u_fn(t)
        if u is not None:
            d = Seq(d, u)
        return ChannelDiagram.of(d)

    return StreamSpec(
        memory=ObjectSeq.constant((QUBIT,) * n),
        inputs=ObjectSeq.constant(()),
        outputs=ObjectSeq.constant((QUBIT,) * emit),
        slices=slices,
    )


_MODULES = {
    "router_binary": router_binary,
    "router_2to1": router_2to1,
    "permutation_router": permutation_router,
    "measurement_module": measurement_module,
    "correction_module": correction_module,
    "rsg_constant": rsg_constant,
    "emitter": emitter,
    "matter_qpu": matter_qpu,
}


def make_module(kind: str, *args, **kwargs) -> StreamSpec:
    if kind not in _MODULES:
        raise Unsupported(f"unknown module kind {kind!r}")
    return _MODULES[kind](*args, **kwargs)


# ---------------------------------------------------------------------------
# Honeycomb simulation of the XZ-measured triangular lattice
# ---------------------------------------------------------------------------


def honeycomb_simulation(
    d: int, alpha_fn: Callable[[int, int], Union[Phase, float]]
) -> Tuple[StreamSpec, StreamSpec, Diagram]:
    """Dressed honeycomb stream simulating the XZ-measured triangular one.

    Measuring every hub vertex in the Y basis complements its three
    neighbours into a triangle and deposits an S^-1 on each, so bulk
    vertices (three measured hubs) see their XZ(a) label turn into
    YZ(-a), the first layer (two hubs) into XZ(-a), and each final
    memory qubit keeps a single pending S^-1.  Returns the dressed
    honeycomb stream, the reference triangular stream, and the local
    dressing to apply on the honeycomb memory before comparing; the
    two unrollings then agree up to a scalar of modulus 2^-n.
    """

    def coerced(t: int, i: int) -> float:
        v = alpha_fn(t, i)
        return v.radians if isinstance(v, Phase) else float(v)

    tri = measure_layers(
        make_lattice("triangular", d), lambda t, i: ("XZ", coerced(t, i))
    )

    def label(t: int, i: int) -> Tuple[str, float]:
        if i < d:
            if t == 0:
                return ("XZ", -coerced(0, i))
            return ("YZ", -coerced(t, i))
        return ("Y", 0.0)

    hc = measure_layers(make_lattice("honeycomb", d), label)
    from .qubits import z_rot

    dressing = par_all(*(z_rot(Phase.of_pi(1, 2)) for _ in range(d)))
    return hc, tri, dressing
