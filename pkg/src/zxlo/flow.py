"""Pauli flow on labelled open graphs and static flow on fusion networks.

A labelled open graph assigns to each non-output vertex a measurement
label (a plane XY/XZ/YZ with an angle, or a Pauli axis X/Y/Z).  A flow
certificate is a correction function ``p`` together with a layered
partial order; :func:`verify_flow` checks the nine flow conditions and
:func:`find_pauli_flow` searches for a certificate by layered GF(2)
solving.  Fusion networks extend open graphs with two-qubit fusion
measurements; their target graph, static flow and deterministic
measurement patterns are built here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

import numpy as np

from . import exprs, qubits
from .diagram import Diagram, Leaf, Par, Seq, identity, seq_all
from .errors import BadPermutation, SearchExhausted, TypeMismatch, Unsupported
from .generators import FusionCmd, QubitPrep
from .interp import _plane_effect
from .wires import QUBIT, Phase

Vertex = Union[int, str]

PLANES = ("XY", "XZ", "YZ")
PAULIS = ("X", "Y", "Z")
ALL_LABELS = PLANES + PAULIS


def _norm_edge(e: Sequence[Vertex]) -> Tuple[Vertex, Vertex]:
    u, v = e
    if u == v:
        raise ValueError(f"self-loop at {u!r}")
    return (u, v) if str(u) <= str(v) else (v, u)


@dataclass(frozen=True)
class LabelledOpenGraph:
    """Open graph with measurement labels on non-output vertices."""

    vertices: Tuple[Vertex, ...]
    edges: FrozenSet[Tuple[Vertex, Vertex]]
    inputs: Tuple[Vertex, ...]
    outputs: Tuple[Vertex, ...]
    labels: Mapping[Vertex, str] = field(default_factory=dict)
    alphas: Mapping[Vertex, float] = field(default_factory=dict)
    # residual quarter-turn gates on output wires (S^t per output)
    output_twists: Mapping[Vertex, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise ValueError("duplicate vertices")
        for e in self.edges:
            if not set(e) <= vs:
                raise ValueError(f"edge {e} uses unknown vertex")
        for v in itertools.chain(self.inputs, self.outputs):
            if v not in vs:
                raise ValueError(f"boundary vertex {v!r} unknown")
        for v in self.non_outputs:
            lab = self.labels.get(v)
            if lab not in ALL_LABELS:
                raise ValueError(f"vertex {v!r} needs a measurement label")
            if lab in PAULIS and v in self.alphas:
                a = float(self.alphas[v]) / (math.pi / 2)
                if abs(a - round(a)) > 1e-9:
                    raise ValueError(
                        f"Pauli vertex {v!r} needs a quarter-turn angle"
                    )

    @staticmethod
    def make(
        vertices: Iterable[Vertex],
        edges: Iterable[Sequence[Vertex]],
        inputs: Iterable[Vertex] = (),
        outputs: Iterable[Vertex] = (),
        labels: Optional[Mapping[Vertex, str]] = None,
        alphas: Optional[Mapping[Vertex, float]] = None,
        output_twists: Optional[Mapping[Vertex, int]] = None,
    ) -> "LabelledOpenGraph":
        return LabelledOpenGraph(
            tuple(vertices),
            frozenset(_norm_edge(e) for e in edges),
            tuple(inputs),
            tuple(outputs),
            dict(labels or {}),
            dict(alphas or {}),
            {v: c % 4 for v, c in (output_twists or {}).items() if c % 4},
        )

    @property
    def non_outputs(self) -> Tuple[Vertex, ...]:
        out = set(self.outputs)
        return tuple(v for v in self.vertices if v not in out)

    def neighbours(self, v: Vertex) -> FrozenSet[Vertex]:
        return frozenset(
            w for e in self.edges if v in e for w in e if w != v
        )

    def has_edge(self, u: Vertex, v: Vertex) -> bool:
        return _norm_edge((u, v)) in self.edges

    def alpha(self, v: Vertex) -> float:
        """Measurement angle; X/Y labels may carry a quarter-turn offset."""
        lab = self.labels.get(v)
        if v in self.alphas:
            return float(self.alphas[v])
        if lab == "Y":
            return math.pi / 2
        return 0.0

    def effect_plane(self, v: Vertex) -> str:
        """Plane to use when evaluating the measurement effect."""
        lab = self.labels[v]
        return "XY" if lab in ("X", "Y") else lab


def odd_neighbourhood(
    g: LabelledOpenGraph, s: Iterable[Vertex]
) -> FrozenSet[Vertex]:
    """Vertices adjacent to an odd number of members of ``s``."""
    count: Dict[Vertex, int] = {}
    ss = set(s)
    for u, v in g.edges:
        if v in ss:
            count[u] = count.get(u, 0) + 1
        if u in ss:
            count[v] = count.get(v, 0) + 1
    return frozenset(v for v, c in count.items() if c % 2 == 1)


@dataclass(frozen=True)
class FlowCertificate:
    """Correction sets plus a layered measurement order.

    ``layers[0]`` is measured first; vertices within a layer are
    incomparable; outputs are implicitly after every layer.
    """

    p: Mapping[Vertex, FrozenSet[Vertex]]
    layers: Tuple[FrozenSet[Vertex], ...]

    def depth(self, v: Vertex) -> float:
        for i, layer in enumerate(self.layers):
            if v in layer:
                return i
        return math.inf

    def before(self, v: Vertex, w: Vertex) -> bool:
        """Strictly before: v < w in the layered partial order."""
        return self.depth(v) < self.depth(w)

    def measurement_order(self) -> Tuple[Vertex, ...]:
        return tuple(
            v
            for layer in self.layers
            for v in sorted(layer, key=str)
        )


@dataclass(frozen=True)
class FlowReport:
    ok: bool
    violations: Tuple[Tuple[Vertex, int, str], ...]


def verify_flow(g: LabelledOpenGraph, cert: FlowCertificate) -> FlowReport:
    """Check the nine flow conditions against a certificate."""
    bad: List[Tuple[Vertex, int, str]] = []
    inputs = set(g.inputs)
    non_out = set(g.non_outputs)
    layered = set().union(*cert.layers) if cert.layers else set()
    if layered != non_out:
        missing = non_out - layered
        extra = layered - non_out
        bad.append(
            (
                next(iter(missing | extra)),
                0,
                f"layers must partition non-outputs (missing={sorted(map(str, missing))},"
                f" extra={sorted(map(str, extra))})",
            )
        )
        return FlowReport(False, tuple(bad))

    def lab(w: Vertex) -> Optional[str]:
        return g.labels.get(w)

    for v in g.non_outputs:
        pv = frozenset(cert.p.get(v, frozenset()))
        if pv & inputs:
            bad.append((v, 0, "correction set meets the inputs"))
        odd = odd_neighbourhood(g, pv)
        for w in pv:
            if w != v and lab(w) not in ("X", "Y") and not cert.before(v, w):
                bad.append((v, 1, f"{w!r} in p({v!r}) is not measured later"))
        for w in odd:
            if w != v and lab(w) not in ("Y", "Z") and not cert.before(v, w):
                bad.append((v, 2, f"{w!r} in Odd(p({v!r})) is not measured later"))
        for w in g.vertices:
            if w != v and lab(w) == "Y" and not cert.before(v, w):
                if (w in pv) != (w in odd):
                    bad.append(
                        (v, 3, f"Y vertex {w!r} must be in both or neither of p/Odd")
                    )
        lv = lab(v)
        in_p, in_odd = v in pv, v in odd
        if lv == "XY" and not (not in_p and in_odd):
            bad.append((v, 4, "XY needs v outside p(v) and inside Odd(p(v))"))
        if lv == "XZ" and not (in_p and in_odd):
            bad.append((v, 5, "XZ needs v in p(v) and in Odd(p(v))"))
        if lv == "YZ" and not (in_p and not in_odd):
            bad.append((v, 6, "YZ needs v in p(v) and outside Odd(p(v))"))
        if lv == "X" and not in_odd:
            bad.append((v, 7, "X needs v in Odd(p(v))"))
        if lv == "Z" and not in_p:
            bad.append((v, 8, "Z needs v in p(v)"))
        if lv == "Y" and not (in_p != in_odd):
            bad.append((v, 9, "Y needs v in exactly one of p(v), Odd(p(v))"))
    return FlowReport(not bad, tuple(bad))


# ---------------------------------------------------------------------------
# GF(2) search


def _solve_gf2(rows: List[Tuple[int, int]], ncols: int) -> Optional[int]:
    """Solve A x = b over GF(2); rows are (bitmask, rhs) pairs.

    Returns one solution as a bitmask (free variables set to 0), or
    None when the system is inconsistent.
    """
    pivots: Dict[int, Tuple[int, int]] = {}  # pivot_col -> (mask, rhs)
    for mask, rhs in rows:
        for col, (pmask, prhs) in pivots.items():
            if mask >> col & 1:
                mask ^= pmask
                rhs ^= prhs
        if mask == 0:
            if rhs:
                return None
            continue
        col = mask.bit_length() - 1
        for c2, (pmask, prhs) in list(pivots.items()):
            if pmask >> col & 1:
                pivots[c2] = (pmask ^ mask, prhs ^ rhs)
        pivots[col] = (mask, rhs)
    # fully reduced rows: with free variables at 0, x_col = rhs
    x = 0
    for col, (_, rhs) in pivots.items():
        if rhs:
            x |= 1 << col
    return x


def _solve_correction(
    g: LabelledOpenGraph,
    v: Vertex,
    after: Set[Vertex],
    remaining: Set[Vertex],
    forbidden_odd: FrozenSet[Vertex],
    forbidden_p: FrozenSet[Vertex],
    match_y: FrozenSet[Vertex] = frozenset(),
) -> Optional[FrozenSet[Vertex]]:
    """Find p(v) with everything in ``after`` measured strictly later."""
    inputs = set(g.inputs)
    lab = g.labels
    cols: List[Vertex] = []
    for u in g.vertices:
        if u in inputs:
            continue
        if u != v and u in forbidden_p:
            continue
        if u == v or u in after or lab.get(u) in ("X", "Y"):
            cols.append(u)
    idx = {u: i for i, u in enumerate(cols)}
    nbr = {u: g.neighbours(u) for u in g.vertices}

    def nrow(u: Vertex) -> int:
        m = 0
        for w in nbr[u]:
            j = idx.get(w)
            if j is not None:
                m |= 1 << j
        return m

    def prow(u: Vertex) -> int:
        j = idx.get(u)
        return 0 if j is None else 1 << j

    rows: List[Tuple[int, int]] = []
    for u in g.vertices:
        allowed = u == v or u in after or lab.get(u) in ("Y", "Z")
        if u != v and u in forbidden_odd:
            allowed = False
        if not allowed and u != v:
            rows.append((nrow(u), 0))
    for u in set(remaining) | set(match_y):
        if u != v and lab.get(u) == "Y":
            rows.append((nrow(u) ^ prow(u), 0))
    nv, pv = nrow(v), prow(v)
    lv = lab.get(v)
    if lv == "XY":
        rows += [(pv, 0), (nv, 1)]
    elif lv == "XZ":
        rows += [(pv, 1), (nv, 1)]
    elif lv == "YZ":
        rows += [(pv, 1), (nv, 0)]
    elif lv == "X":
        rows.append((nv, 1))
    elif lv == "Z":
        rows.append((pv, 1))
    elif lv == "Y":
        rows.append((pv ^ nv, 1))
    else:
        raise Unsupported(f"vertex {v!r} has no measurement label")
    x = _solve_gf2(rows, len(cols))
    if x is None:
        return None
    return frozenset(u for j, u in enumerate(cols) if x >> j & 1)


def find_pauli_flow(
    g: LabelledOpenGraph,
    forbidden_odd: Iterable[Vertex] = (),
    forbidden_p: Iterable[Vertex] = (),
    match_y: Iterable[Vertex] = (),
) -> Optional[FlowCertificate]:
    """Layered backward search for a flow certificate.

    ``forbidden_odd`` lists vertices that may never lie in
    Odd(p(v)) for v other than themselves; ``forbidden_p`` lists
    vertices that may never lie in p(v) for v other than themselves;
    ``match_y`` lists Y vertices whose p/Odd membership must agree for
    every other vertex, so they only ever receive sign-free combined
    corrections.
    """
    f_odd = frozenset(forbidden_odd)
    f_p = frozenset(forbidden_p)
    m_y = frozenset(match_y)
    remaining = set(g.non_outputs)
    after: Set[Vertex] = set(g.outputs)
    layers_rev: List[FrozenSet[Vertex]] = []
    p: Dict[Vertex, FrozenSet[Vertex]] = {}
    while remaining:
        found: Dict[Vertex, FrozenSet[Vertex]] = {}
        for v in sorted(remaining, key=str):
            sol = _solve_correction(g, v, after, remaining, f_odd, f_p, m_y)
            if sol is not None:
                found[v] = sol
        if not found:
            return _find_flow_exhaustive(g, f_odd, f_p, m_y)
        layers_rev.append(frozenset(found))
        p.update(found)
        after |= set(found)
        remaining -= set(found)
    return FlowCertificate(p, tuple(reversed(layers_rev)))


def _find_flow_exhaustive(
    g: LabelledOpenGraph,
    f_odd: FrozenSet[Vertex],
    f_p: FrozenSet[Vertex],
    m_y: FrozenSet[Vertex] = frozenset(),
) -> Optional[FlowCertificate]:
    """Recursive total-order search for small graphs."""
    non_out = tuple(g.non_outputs)
    if len(non_out) > 12:
        return None
    all_after = set(g.outputs)
    dead: Set[FrozenSet[Vertex]] = set()

    def go(
        remaining: FrozenSet[Vertex],
    ) -> Optional[List[Tuple[Vertex, FrozenSet[Vertex]]]]:
        if not remaining:
            return []
        if remaining in dead:
            return None
        after = all_after | (set(non_out) - remaining)
        for v in sorted(remaining, key=str):
            sol = _solve_correction(g, v, after, set(remaining), f_odd, f_p, m_y)
            if sol is None:
                continue
            rest = go(remaining - {v})
            if rest is not None:
                return rest + [(v, sol)]
        dead.add(remaining)
        return None

    seq = go(frozenset(non_out))
    if seq is None:
        return None
    p = {v: s for v, s in seq}
    layers = tuple(frozenset({v}) for v, _ in reversed(seq))
    return FlowCertificate(p, layers)


# ---------------------------------------------------------------------------
# Target linear maps


def target_map(g: LabelledOpenGraph) -> np.ndarray:
    """Matrix (2^|O| x 2^|I|) of the graph with all outcomes 0.

    Prepares non-inputs in |+>, entangles along the edges with CZ and
    contracts the outcome-0 measurement effect on every non-output.
    """
    order = list(g.vertices)
    pos = {v: i for i, v in enumerate(order)}
    n = len(order)
    factors = []
    for v in order:
        if v in g.inputs:
            factors.append(np.eye(2, dtype=complex))
        else:
            factors.append(np.full((2, 1), 1 / math.sqrt(2), dtype=complex))
    state = np.array([[1.0 + 0j]])
    for f in factors:
        state = np.kron(state, f)
    # reorder columns from vertex order to the declared input order
    in_by_vertex = [v for v in order if v in set(g.inputs)]
    k = len(in_by_vertex)
    if k and tuple(in_by_vertex) != tuple(g.inputs):
        perm = [in_by_vertex.index(v) for v in g.inputs]
        cols = np.arange(2**k)
        bits = [(cols >> (k - 1 - j)) & 1 for j in range(k)]
        new = np.zeros(2**k, dtype=int)
        for j, src in enumerate(perm):
            new |= bits[src] << (k - 1 - j)
        state = state[:, np.argsort(new)]
    t = state.reshape((2,) * n + (state.shape[1],))
    for u, w in g.edges:
        sl = [slice(None)] * (n + 1)
        sl[pos[u]] = 1
        sl[pos[w]] = 1
        t[tuple(sl)] *= -1.0
    axes = order[:]
    for v in g.non_outputs:
        e = _plane_effect(g.effect_plane(v), g.alpha(v), 0)
        ax = axes.index(v)
        t = np.tensordot(e, t, axes=([0], [ax]))
        axes.pop(ax)
    for v, c in g.output_twists.items():
        ax = axes.index(v)
        sl = [slice(None)] * (len(axes) + 1)
        sl[ax] = 1
        t[tuple(sl)] *= 1j ** (c % 4)
    # remaining axes: outputs in vertex order, then the input axis
    out_axes = [axes.index(v) for v in g.outputs]
    t = np.transpose(t, out_axes + [len(axes)])
    return t.reshape(2 ** len(g.outputs), -1)


# ---------------------------------------------------------------------------
# Fusion networks


@dataclass(frozen=True)
class Fusion:
    pair: Tuple[Vertex, Vertex]
    plane: str = "X"
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.plane not in ("XY", "XZ", "YZ", "X", "Y"):
            raise ValueError(f"bad fusion plane {self.plane!r}")


@dataclass(frozen=True)
class FusionNetwork:
    """Resource open graph plus two-qubit fusions and Clifford shifts.

    ``labels`` maps measured resource vertices to a plane or Pauli and
    unmeasured ones to "*"; ``cliffords`` holds the integer parameter c
    that twists each vertex's measurement by c quarter-turns.
    """

    vertices: Tuple[Vertex, ...]
    edges: FrozenSet[Tuple[Vertex, Vertex]]
    inputs: Tuple[Vertex, ...]
    outputs: Tuple[Vertex, ...]
    fusions: Tuple[Fusion, ...]
    labels: Mapping[Vertex, str] = field(default_factory=dict)
    alphas: Mapping[Vertex, float] = field(default_factory=dict)
    cliffords: Mapping[Vertex, int] = field(default_factory=dict)

    @staticmethod
    def make(
        vertices: Iterable[Vertex],
        edges: Iterable[Sequence[Vertex]],
        inputs: Iterable[Vertex] = (),
        outputs: Iterable[Vertex] = (),
        fusions: Iterable[Fusion] = (),
        labels: Optional[Mapping[Vertex, str]] = None,
        alphas: Optional[Mapping[Vertex, float]] = None,
        cliffords: Optional[Mapping[Vertex, int]] = None,
    ) -> "FusionNetwork":
        return FusionNetwork(
            tuple(vertices),
            frozenset(_norm_edge(e) for e in edges),
            tuple(inputs),
            tuple(outputs),
            tuple(fusions),
            dict(labels or {}),
            dict(alphas or {}),
            dict(cliffords or {}),
        )

    @property
    def non_outputs(self) -> Tuple[Vertex, ...]:
        out = set(self.outputs)
        return tuple(v for v in self.vertices if v not in out)

    def fusion_vertex(self, i: int) -> str:
        return f"fuse{i}"

    def is_xy_network(self) -> bool:
        return all(f.plane in ("X", "Y") for f in self.fusions)


def _twisted_label(lab: str, c: int) -> str:
    c = c % 4
    if lab in ("*", "X"):
        return "Y" if c % 2 else "X"
    if lab == "Y":
        return "X" if c % 2 else "Y"
    if lab == "XZ" and c % 2:
        return "YZ"
    if lab == "YZ" and c % 2:
        return "XZ"
    return lab


def _twisted_alpha(lab: str, alpha: float, c: int) -> float:
    """Angle after c quarter-turn twists; X/Y axes pick up quarter turns."""
    c = c % 4
    if lab in ("*", "X"):
        return (c * math.pi / 2) % (2 * math.pi)
    if lab == "Y":
        return ((c + 1) * math.pi / 2) % (2 * math.pi)
    if lab == "XY":
        return (alpha + c * math.pi / 2) % (2 * math.pi)
    if lab == "XZ":
        return (-1) ** math.ceil(c / 2) * alpha
    if lab == "YZ":
        return (-1) ** (c // 2) * alpha
    return 0.0


def build_target_open_graph(fn: FusionNetwork) -> LabelledOpenGraph:
    """Open graph whose flow governs the network's success branches.

    Each fusion becomes a fresh vertex joined to the fused pair and
    measured in the fusion's plane; Clifford parameters twist the
    single-qubit labels and angles of the resource vertices.
    """
    verts = list(fn.vertices)
    edges = set(fn.edges)
    labels: Dict[Vertex, str] = {}
    alphas: Dict[Vertex, float] = {}
    out = set(fn.outputs)
    for v in fn.vertices:
        if v in out:
            continue
        lab = fn.labels.get(v, "*")
        c = fn.cliffords.get(v, 0)
        labels[v] = _twisted_label(lab, c)
        alphas[v] = _twisted_alpha(lab, float(fn.alphas.get(v, 0.0)), c)
    for i, f in enumerate(fn.fusions):
        vf = fn.fusion_vertex(i)
        if vf in set(verts):
            raise ValueError(f"vertex name {vf!r} collides with a fusion vertex")
        verts.append(vf)
        a, b = f.pair
        edges.add(_norm_edge((vf, a)))
        edges.add(_norm_edge((vf, b)))
        labels[vf] = f.plane
        if f.plane == "Y":
            alphas[vf] = math.pi / 2
        elif f.plane == "X":
            alphas[vf] = 0.0
        else:
            alphas[vf] = float(f.alpha)
    twists = {
        v: fn.cliffords.get(v, 0) % 4
        for v in fn.outputs
        if fn.cliffords.get(v, 0) % 4
    }
    return LabelledOpenGraph(
        tuple(verts),
        frozenset(edges),
        fn.inputs,
        fn.outputs,
        labels,
        alphas,
        twists,
    )


def _static_constraints(
    fn: FusionNetwork,
) -> Tuple[FrozenSet[Vertex], FrozenSet[Vertex], FrozenSet[Vertex]]:
    f_odd: Set[Vertex] = set()
    f_p: Set[Vertex] = set()
    m_y: Set[Vertex] = set()
    out = set(fn.outputs)
    for v in fn.vertices:
        if v not in out and fn.labels.get(v, "*") == "*":
            f_odd.add(v)
    for i, f in enumerate(fn.fusions):
        vf = fn.fusion_vertex(i)
        if f.plane == "X":
            f_odd.add(vf)
        elif f.plane == "Y":
            m_y.add(vf)
        elif f.plane in PLANES:
            f_odd.add(vf)
            f_p.add(vf)
    return frozenset(f_odd), frozenset(f_p), frozenset(m_y)


def verify_static_flow(fn: FusionNetwork, cert: FlowCertificate) -> FlowReport:
    """Flow check plus the no-corrections-on-fused-hardware rules."""
    g = build_target_open_graph(fn)
    rep = verify_flow(g, cert)
    bad = list(rep.violations)
    f_odd, f_p, m_y = _static_constraints(fn)
    for v in g.non_outputs:
        pv = frozenset(cert.p.get(v, frozenset()))
        odd = odd_neighbourhood(g, pv)
        for u in odd & f_odd - {v}:
            bad.append((v, 10, f"{u!r} cannot receive a Z correction"))
        for u in pv & f_p - {v}:
            bad.append((v, 11, f"{u!r} cannot receive an X correction"))
        for u in m_y - {v}:
            if (u in pv) != (u in odd):
                bad.append(
                    (v, 12, f"Y fusion node {u!r} needs matching p/Odd membership")
                )
    return FlowReport(not bad, tuple(bad))


def find_static_flow(fn: FusionNetwork) -> Optional[FlowCertificate]:
    g = build_target_open_graph(fn)
    f_odd, f_p, m_y = _static_constraints(fn)
    return find_pauli_flow(g, forbidden_odd=f_odd, forbidden_p=f_p, match_y=m_y)


def simplify_target_graph(fn: FusionNetwork) -> LabelledOpenGraph:
    """Absorb X and Y fusions into the resource graph.

    A Y fusion between a and b toggles the edge {a, b} and undoes one
    Clifford quarter-turn on each endpoint; an X fusion contracts its
    endpoints into a single vertex, toggling shared edges.  Fusions in
    the three planes have no graph-level simplification.
    """
    verts = list(fn.vertices)
    edges = set(fn.edges)
    labels = dict(fn.labels)
    alphas = {v: float(a) for v, a in fn.alphas.items()}
    cliff = {v: int(c) for v, c in fn.cliffords.items()}
    inputs = list(fn.inputs)
    outputs = list(fn.outputs)
    alias: Dict[Vertex, Vertex] = {}

    def root(v: Vertex) -> Vertex:
        while v in alias:
            v = alias[v]
        return v

    def toggle(u: Vertex, w: Vertex) -> None:
        if u == w:
            return
        e = _norm_edge((u, w))
        if e in edges:
            edges.discard(e)
        else:
            edges.add(e)

    for f in fn.fusions:
        a, b = root(f.pair[0]), root(f.pair[1])
        if f.plane == "Y":
            toggle(a, b)
            cliff[a] = cliff.get(a, 0) - 1
            cliff[b] = cliff.get(b, 0) - 1
        elif f.plane == "X":
            if a == b:
                raise Unsupported("X fusion on an already-merged pair")
            la, lb = labels.get(a, "*"), labels.get(b, "*")
            if lb != "*" and la == "*":
                a, b = b, a
                la, lb = lb, la
            if lb != "*":
                raise Unsupported(
                    "X fusion needs at least one unmeasured endpoint"
                )
            for w in [x for e in list(edges) if b in e for x in e if x != b]:
                toggle(b, w)
                toggle(a, w)
            alias[b] = a
            verts.remove(b)
            cliff[a] = cliff.get(a, 0) + cliff.pop(b, 0)
            labels.pop(b, None)
            alphas.pop(b, None)
            if b in inputs:
                inputs[inputs.index(b)] = a
            if b in outputs:
                outputs[outputs.index(b)] = a
        else:
            raise Unsupported(
                f"no graph simplification for a {f.plane} fusion"
            )
    reduced = FusionNetwork.make(
        verts, edges, inputs, outputs, (), labels, alphas, cliff
    )
    return build_target_open_graph(reduced)


# ---------------------------------------------------------------------------
# Pattern synthesis


class _PatternBuilder:
    """Accumulates commands on a register of named qubit wires."""

    def __init__(self, wires: Sequence[Vertex]):
        self.wires: List[Vertex] = list(wires)
        self.d: Diagram = identity((QUBIT,) * len(wires))

    def prep(self, v: Vertex) -> None:
        self.d = Seq(self.d, Par(identity((QUBIT,) * len(self.wires)),
                                 Leaf(QubitPrep("+"))))
        self.wires.append(v)

    def apply(self, piece: Diagram, on: Sequence[Vertex]) -> None:
        pos = [self.wires.index(v) for v in on]
        self.d = Seq(self.d, qubits.on_wires(piece, pos, len(self.wires)))

    def measure(self, v: Vertex, piece: Diagram) -> None:
        pos = self.wires.index(v)
        rest = len(self.wires) - pos - 1
        self.d = Seq(
            self.d,
            Par(Par(identity((QUBIT,) * pos), piece),
                identity((QUBIT,) * rest)),
        )
        self.wires.pop(pos)

    def permute_to(self, order: Sequence[Vertex]) -> None:
        if sorted(map(str, order)) != sorted(map(str, self.wires)):
            raise BadPermutation("output order must list the live wires")
        from .diagram import permutation_diagram

        perm = [self.wires.index(v) for v in order]
        self.d = Seq(
            self.d,
            permutation_diagram((QUBIT,) * len(self.wires), perm),
        )
        self.wires = list(order)


def _svar(v: Vertex) -> str:
    return f"s_{v}"


def synthesize_pattern(g: LabelledOpenGraph, cert: FlowCertificate):
    """Measurement pattern with feedforward corrections from a flow.

    Implements N_inputs-complement preparation, CZ entangling, then the
    layered measurements; each outcome drives X corrections on the
    still-live part of its correction set and Z corrections on the
    still-live part of its odd neighbourhood.
    """
    from .channel import ChannelDiagram

    b = _PatternBuilder(g.inputs)
    in_set = set(g.inputs)
    for v in g.vertices:
        if v not in in_set:
            b.prep(v)
    for u, w in sorted(g.edges, key=lambda e: (str(e[0]), str(e[1]))):
        b.apply(qubits.cz_diagram(), (u, w))
    _emit_measurements(b, g, cert, fusion_depth=None)
    _emit_output_twists(b, g)
    b.permute_to(g.outputs)
    return ChannelDiagram.of(b.d)


def _emit_measurements(
    b: "_PatternBuilder",
    g: LabelledOpenGraph,
    cert: FlowCertificate,
    fusion_depth: Optional[Mapping[Vertex, int]],
    skip: Iterable[Vertex] = (),
) -> None:
    skip_set = set(skip)
    live = set(b.wires)

    def later(v: Vertex) -> Set[Vertex]:
        dv = cert.depth(v)
        return {w for w in g.vertices if cert.depth(w) > dv and w in live}

    for layer in cert.layers:
        for v in sorted(layer, key=str):
            if v in skip_set:
                continue
            var = _svar(v)
            b.measure(v, qubits.measure_in_plane(g.effect_plane(v), g.alpha(v), var))
            live.discard(v)
            tail = later(v)
            pv = frozenset(cert.p.get(v, frozenset()))
            for w in sorted(pv & tail, key=str):
                b.apply(qubits.correction_x(var), (w,))
            for w in sorted(odd_neighbourhood(g, pv) & tail, key=str):
                b.apply(qubits.correction_z(var), (w,))


def _emit_output_twists(b: "_PatternBuilder", g: LabelledOpenGraph) -> None:
    for v, c in sorted(g.output_twists.items(), key=lambda kv: str(kv[0])):
        b.apply(qubits.z_rot(Phase.of_pi(c % 4, 2)), (v,))


def synthesize_fusion_pattern(fn: FusionNetwork, cert: FlowCertificate):
    """Fusions first, then flow-ordered measurements with corrections.

    Returns a channel diagram whose fusion success flags are named
    ``ok_<i>`` and whose measurement outcomes are ``s_<vertex>``; on
    all-success branches it implements the network's target map.
    """
    from .channel import ChannelDiagram

    g = build_target_open_graph(fn)
    rep = verify_static_flow(fn, cert)
    if not rep.ok:
        raise Unsupported(f"certificate is not a static flow: {rep.violations[:3]}")
    b = _PatternBuilder(fn.inputs)
    in_set = set(fn.inputs)
    for v in fn.vertices:
        if v not in in_set:
            b.prep(v)
    for u, w in sorted(fn.edges, key=lambda e: (str(e[0]), str(e[1]))):
        b.apply(qubits.cz_diagram(), (u, w))
    live = set(b.wires) | set(
        v for v in g.vertices if cert.depth(v) == math.inf
    )
    fused: Set[Vertex] = set()
    for i, f in enumerate(fn.fusions):
        vf = fn.fusion_vertex(i)
        fused.add(vf)
        cmd = FusionCmd(
            plane=f.plane,
            alpha=Phase.coerce(f.alpha),
            c=0,
            s=f"ok_{i}",
            k=_svar(vf),
        )
        b.apply(Leaf(cmd), f.pair)
    # corrections come after every fusion: all virtual entangling edges
    # must be in place before a Pauli lands on a fused qubit
    tail = set(b.wires)
    for i in range(len(fn.fusions)):
        vf = fn.fusion_vertex(i)
        var = _svar(vf)
        pvf = frozenset(cert.p.get(vf, frozenset()))
        for w in sorted(pvf & tail, key=str):
            b.apply(qubits.correction_x(var), (w,))
        for w in sorted(odd_neighbourhood(g, pvf) & tail, key=str):
            b.apply(qubits.correction_z(var), (w,))
    _emit_measurements(b, g, cert, fusion_depth=None, skip=fused)
    _emit_output_twists(b, g)
    b.permute_to(fn.outputs)
    return ChannelDiagram.of(b.d)


# ---------------------------------------------------------------------------
# Hamiltonian-path decomposition into linear XY networks


def _hamiltonian_path(
    g: LabelledOpenGraph, limit: int = 200000
) -> Optional[Tuple[Vertex, ...]]:
    verts = sorted(g.vertices, key=str)
    n = len(verts)
    budget = [limit]

    def extend(path: List[Vertex], used: Set[Vertex]) -> Optional[List[Vertex]]:
        if budget[0] <= 0:
            raise SearchExhausted("Hamiltonian path search budget exceeded")
        budget[0] -= 1
        if len(path) == n:
            return path
        for w in sorted(g.neighbours(path[-1]), key=str):
            if w not in used:
                got = extend(path + [w], used | {w})
                if got is not None:
                    return got
        return None

    for start in verts:
        got = extend([start], {start})
        if got is not None:
            return tuple(got)
    return None


def decompose_linear_xy(g: LabelledOpenGraph) -> FusionNetwork:
    """Rebuild a labelled open graph as a linear XY fusion network.

    The resource is a single line following a Hamiltonian path of the
    graph (padded with Z-measured vertices across non-adjacent
    consecutive pairs); every off-path edge becomes a Y fusion whose
    Clifford twists on the endpoints cancel the fusion's local
    S-corrections.
    """
    path = _hamiltonian_path(g)
    if path is None:
        # fall back to an arbitrary vertex order with Z padding
        path = tuple(sorted(g.vertices, key=str))
    verts: List[Vertex] = []
    edges: List[Tuple[Vertex, Vertex]] = []
    labels: Dict[Vertex, str] = {}
    alphas: Dict[Vertex, float] = {}
    cliff: Dict[Vertex, int] = {}
    pad = 0
    for v in g.non_outputs:
        labels[v] = g.labels[v]
        alphas[v] = g.alpha(v)
    for v in g.vertices:
        labels.setdefault(v, "*")
    prev: Optional[Vertex] = None
    for v in path:
        if prev is not None and not g.has_edge(prev, v):
            z = f"pad{pad}"
            pad += 1
            verts.append(z)
            labels[z] = "Z"
            alphas[z] = 0.0
            edges.append((prev, z))
            edges.append((z, v))
        verts.append(v)
        if prev is not None and g.has_edge(prev, v):
            edges.append((prev, v))
        prev = v
    path_edges = {
        _norm_edge((path[i], path[i + 1]))
        for i in range(len(path) - 1)
        if g.has_edge(path[i], path[i + 1])
    }
    fusions: List[Fusion] = []
    for e in sorted(g.edges - path_edges, key=lambda e: (str(e[0]), str(e[1]))):
        u, w = e
        fusions.append(Fusion((u, w), "Y"))
        cliff[u] = cliff.get(u, 0) + 1
        cliff[w] = cliff.get(w, 0) + 1
    out_labels = {v: lab for v, lab in labels.items() if v not in set(g.outputs)}
    return FusionNetwork.make(
        verts,
        edges,
        g.inputs,
        g.outputs,
        fusions,
        out_labels,
        alphas,
        cliff,
    )


# ---------------------------------------------------------------------------
# JSON


def graph_to_json(g: LabelledOpenGraph) -> dict:
    labels = {}
    for v in g.non_outputs:
        labels[str(v)] = {
            "plane": g.labels[v],
            "alpha": g.alpha(v),
            "c": 0,
        }
    out = {
        "vertices": list(g.vertices),
        "edges": [list(e) for e in sorted(g.edges, key=lambda e: (str(e[0]), str(e[1])))],
        "inputs": list(g.inputs),
        "outputs": list(g.outputs),
        "labels": labels,
    }
    if g.output_twists:
        out["output_twists"] = {str(v): int(c) for v, c in g.output_twists.items()}
    return out


def graph_from_json(obj: Mapping) -> LabelledOpenGraph:
    labels = {}
    alphas = {}
    raw = obj.get("labels", {})
    verts = list(obj["vertices"])
    byname = {str(v): v for v in verts}
    for k, spec in raw.items():
        v = byname.get(str(k), k)
        labels[v] = spec["plane"]
        alphas[v] = float(spec.get("alpha", 0.0))
    twists = {
        byname.get(str(k), k): int(c)
        for k, c in obj.get("output_twists", {}).items()
    }
    return LabelledOpenGraph.make(
        verts,
        [tuple(e) for e in obj.get("edges", [])],
        obj.get("inputs", []),
        obj.get("outputs", []),
        labels,
        alphas,
        twists,
    )


def network_to_json(fn: FusionNetwork) -> dict:
    labels = {}
    for v in fn.non_outputs:
        labels[str(v)] = {
            "plane": fn.labels.get(v, "*"),
            "alpha": float(fn.alphas.get(v, 0.0)),
            "c": int(fn.cliffords.get(v, 0)),
        }
    return {
        "vertices": list(fn.vertices),
        "edges": [list(e) for e in sorted(fn.edges, key=lambda e: (str(e[0]), str(e[1])))],
        "inputs": list(fn.inputs),
        "outputs": list(fn.outputs),
        "labels": labels,
        "fusions": [
            {"pair": list(f.pair), "plane": f.plane, "alpha": float(f.alpha)}
            for f in fn.fusions
        ],
    }


def network_from_json(obj: Mapping) -> FusionNetwork:
    verts = list(obj["vertices"])
    byname = {str(v): v for v in verts}
    labels = {}
    alphas = {}
    cliff = {}
    for k, spec in obj.get("labels", {}).items():
        v = byname.get(str(k), k)
        labels[v] = spec.get("plane", "*")
        alphas[v] = float(spec.get("alpha", 0.0))
        cliff[v] = int(spec.get("c", 0))
    fusions = [
        Fusion(tuple(f["pair"]), f.get("plane", "X"), float(f.get("alpha", 0.0)))
        for f in obj.get("fusions", [])
    ]
    return FusionNetwork.make(
        verts,
        [tuple(e) for e in obj.get("edges", [])],
        obj.get("inputs", []),
        obj.get("outputs", []),
        fusions,
        labels,
        alphas,
        cliff,
    )
