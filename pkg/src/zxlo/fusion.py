"""Entangling measurements on dual-rail qubits built from linear optics.

The module constructs the optical circuit of a two-photon fusion
measurement (a rail-swapping splitter followed by a detection beam
splitter), extracts its Kraus branches through the channel layer, and
classifies arbitrary single-qubit-dressed variants: whether failure
preserves graph connectivity, whether measurement errors pull out as
Pauli bytes, swap symmetry, stabilizerness, and the normal form
(plane, angle, Clifford bit) of the correctable families.  A
three-qubit generalisation of the destructive fusion is provided as
``ghz_analyser``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .channel import (
    Branch,
    ChannelDiagram,
    CQState,
    coarse,
    enumerate_branches,
    outcome_probability,
)
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
from .errors import Unsupported
from .generators import (
    BeamSplitter,
    DRMerge,
    DRSplit,
    Id,
    PhaseShift,
    PhotonDetect,
    Triangle,
)
from .interp import _plane_effect, fock_lift
from .spaces import DenseOperator, Space, equal_up_to_scalar
from .wires import DUALRAIL, MODE, QUBIT, Phase

PhaseLike = Union[Phase, int, float]
EulerTriple = Tuple[Phase, Phase, Phase]

_SQRT2 = math.sqrt(2.0)
_H2 = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / _SQRT2
_SWAP_BASIS = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def _coerce_triple(triple: Sequence[PhaseLike]) -> EulerTriple:
    vals = tuple(Phase.coerce(x) for x in triple)
    if len(vals) != 3:
        raise ValueError("an Euler triple needs exactly three phases")
    return vals


@dataclass(frozen=True)
class GreenFusionParams:
    """Phases of the three shifters in the connectivity-preserving fusion."""

    theta1: Phase
    theta2: Phase
    theta3: Phase

    @staticmethod
    def make(
        theta1: PhaseLike, theta2: PhaseLike, theta3: PhaseLike = 0
    ) -> "GreenFusionParams":
        return GreenFusionParams(
            Phase.coerce(theta1), Phase.coerce(theta2), Phase.coerce(theta3)
        )


@dataclass(frozen=True)
class FusionSpec:
    """Single-qubit dressings of the fusion core, as Z-X-Z Euler triples.

    ``u1`` and ``u2`` act on the two input dual-rail qubits before the
    fusion, ``u3`` on the surviving pair of rails before it is detected.
    A triple ``(a, b, g)`` denotes the unitary Z(g) X(b) Z(a).
    """

    u1: EulerTriple
    u2: EulerTriple
    u3: EulerTriple

    @staticmethod
    def make(
        u1: Sequence[PhaseLike],
        u2: Sequence[PhaseLike],
        u3: Sequence[PhaseLike],
    ) -> "FusionSpec":
        return FusionSpec(_coerce_triple(u1), _coerce_triple(u2), _coerce_triple(u3))

    def all_phases(self) -> Tuple[Phase, ...]:
        return self.u1 + self.u2 + self.u3


@dataclass(frozen=True)
class FusionClassification:
    green_failure: bool
    pauli_error: bool
    symmetric: bool
    stabilizer: bool
    plane: Optional[str] = None
    pauli_class: Optional[str] = None
    alpha: Optional[float] = None
    c: Optional[int] = None
    residual: Optional[float] = None

    def __post_init__(self):
        if self.plane is not None and not (self.green_failure and self.pauli_error):
            raise ValueError("a plane label requires green failure and Pauli error")
        if self.pauli_class is not None and not (
            self.stabilizer and self.green_failure and self.pauli_error
        ):
            raise ValueError("a Pauli class requires a stabilizer green fusion")


# ---------------------------------------------------------------------------
# transfer matrices
#
# A dual-rail qubit occupies two adjacent modes; a photon in the first
# rail encodes |1>, in the second rail |0>.  A two-mode transfer matrix
# u therefore acts on the qubit basis as SWAP . u . SWAP.
# ---------------------------------------------------------------------------


def euler_rail_matrix(triple: Sequence[PhaseLike]) -> np.ndarray:
    """2x2 rail transfer matrix realizing Z(g) X(b) Z(a) on the qubit."""
    a, b, g = (Phase.coerce(x).radians for x in triple)
    first = np.diag([np.exp(1j * a), 1.0]).astype(complex)
    middle = np.diag([1.0, np.exp(1j * b)]).astype(complex)
    last = np.diag([np.exp(1j * g), 1.0]).astype(complex)
    return last @ _H2 @ middle @ _H2 @ first


def euler_qubit_matrix(triple: Sequence[PhaseLike]) -> np.ndarray:
    """The same unitary expressed in the computational qubit basis."""
    return _SWAP_BASIS @ euler_rail_matrix(triple) @ _SWAP_BASIS


def _core_transfer() -> np.ndarray:
    """Rail swap between the qubits, then the detection beam splitter.

    Modes 0,1 carry the surviving pair, modes 2,3 end in the fusion
    detectors.
    """
    pbs = np.eye(4, dtype=complex)[:, [2, 1, 0, 3]]
    bs = np.eye(4, dtype=complex)
    bs[2:, 2:] = _H2
    return bs @ pbs


def fusion_transfer(spec: FusionSpec) -> np.ndarray:
    """4x4 mode transfer matrix of the dressed destructive fusion."""
    u1 = euler_rail_matrix(spec.u1)
    u2 = euler_rail_matrix(spec.u2)
    u3 = euler_rail_matrix(spec.u3)
    pre = np.zeros((4, 4), dtype=complex)
    pre[:2, :2] = u1
    pre[2:, 2:] = u2
    post = np.eye(4, dtype=complex)
    post[:2, :2] = u3
    return post @ _core_transfer() @ pre


# ---------------------------------------------------------------------------
# branch effects of the destructive fusion
# ---------------------------------------------------------------------------

# computational 2-qubit basis |b1 b2> as mode occupations
_DR_OCCS = tuple(
    (b1, 1 - b1, b2, 1 - b2) for b1 in (0, 1) for b2 in (0, 1)
)


def branch_effects(
    spec: FusionSpec, tol: float = 1e-12
) -> Tuple[List[Tuple[Tuple[int, ...], np.ndarray]], List[Tuple[Tuple[int, ...], np.ndarray]]]:
    """Success and failure effects of every detector pattern.

    Each entry is ``(pattern, row)`` where ``pattern`` is the photon
    count quadruple seen by the four detectors (surviving pair first)
    and ``row`` the 1x4 effect on the two input qubits.  Success means
    the fusion detector pair saw exactly one photon.
    """
    lift = fock_lift(fusion_transfer(spec), 2)
    space = lift.dom
    in_idx = [space.basis_index((), occ) for occ in _DR_OCCS]
    success: List[Tuple[Tuple[int, ...], np.ndarray]] = []
    failure: List[Tuple[Tuple[int, ...], np.ndarray]] = []
    for _, occ in space.basis:
        if sum(occ) != 2:
            continue
        row = lift.mat[space.basis_index((), occ), in_idx]
        if np.max(np.abs(row)) <= tol:
            continue
        if occ[2] + occ[3] == 1:
            success.append((occ, row))
        else:
            failure.append((occ, row))
    return success, failure


def _is_flat(vec: np.ndarray, tol: float) -> bool:
    mags = np.abs(vec)
    return abs(mags[0] - mags[1]) <= tol * max(np.max(mags), 1e-30)


def _is_green_effect(row: np.ndarray, tol: float) -> bool:
    """Product of two equatorial single-qubit effects, up to scalar."""
    mat = row.reshape(2, 2)
    u, s, vh = np.linalg.svd(mat)
    if s[1] > tol * s[0]:
        return False
    return _is_flat(u[:, 0], tol) and _is_flat(vh[0, :], tol)


_PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def _pauli_related(e1: np.ndarray, e2: np.ndarray, tol: float) -> bool:
    """e1 ~ z . e2 (P x Q) with |z| = 1 for some Paulis P, Q."""
    for p in _PAULIS.values():
        for q in _PAULIS.values():
            z = equal_up_to_scalar(e1, e2 @ np.kron(p, q), tol)
            if z is not None and abs(abs(z) - 1.0) <= tol:
                return True
    return False


_B_PLUS = np.array([1.0, 1.0, 1.0, 1.0], dtype=complex) / 2.0
_B_MINUS = np.array([1.0, -1.0, -1.0, 1.0], dtype=complex) / 2.0
_SWAP4 = (0, 2, 1, 3)


def _twist(c: int) -> np.ndarray:
    s = np.diag([1.0, 1j ** (c % 4)]).astype(complex)
    return np.kron(s, s)


def _canonical_effect(plane: str, alpha: float, c: int, t: int) -> np.ndarray:
    e = _plane_effect(plane, alpha, t)
    return (e[0] * _B_PLUS + e[1] * _B_MINUS) @ _twist(c)


def _plane_parameter(plane: str, u0: complex, u1: complex) -> Optional[complex]:
    """Unimodular parameter w = (+/-)e^{i alpha} of the effect family."""
    eps = 1e-12
    if plane == "XY":
        if abs(u0) < eps:
            return None
        return u1 / u0
    if plane == "YZ":
        denom = u0 + u1
        if abs(denom) < eps:
            return None
        return (u0 - u1) / denom
    if plane == "XZ":
        if abs(u0) < eps:
            return None
        r = u1 / u0
        denom = 1j - r
        if abs(denom) < eps:
            return None
        return (r + 1j) / denom
    raise ValueError(f"unknown plane {plane!r}")


def _fit_normal_form(
    rows: List[np.ndarray], tol: float
) -> Optional[Tuple[str, float, int, float]]:
    """Best (plane, alpha, c) fit of the success effects, with residual."""
    best: Optional[Tuple[float, str, float, int]] = None
    ref_i = int(np.argmax([np.linalg.norm(r) for r in rows]))
    for c in (0, 1):
        inv = np.conj(_twist(c))
        frames = [r @ inv for r in rows]
        coords = [
            (f @ _B_PLUS.conj(), f @ _B_MINUS.conj()) for f in frames
        ]
        span_resid = max(
            np.linalg.norm(f - u0 * _B_PLUS - u1 * _B_MINUS) / np.linalg.norm(f)
            for f, (u0, u1) in zip(frames, coords)
        )
        if span_resid > tol:
            continue
        for plane in ("XY", "XZ", "YZ"):
            ws = [_plane_parameter(plane, u0, u1) for u0, u1 in coords]
            if any(w is None or abs(abs(w) - 1.0) > 1e-7 for w in ws):
                continue
            # the outcome bits flip the sign of the parameter and of the
            # angle itself, so fold alpha into [0, pi/2]
            alpha = cmath.phase(ws[ref_i]) % math.pi
            alpha = min(alpha, math.pi - alpha)
            resid = 0.0
            for row in rows:
                row_best = math.inf
                for t in (0, 1):
                    for signed in (alpha, -alpha):
                        cand = _canonical_effect(plane, signed, c, t)
                        z = (row @ cand.conj()) / (np.linalg.norm(cand) ** 2)
                        row_best = min(
                            row_best,
                            float(np.linalg.norm(row - z * cand))
                            / float(np.linalg.norm(row)),
                        )
                resid = max(resid, row_best)
            if resid <= tol and (best is None or resid < best[0] - 1e-14):
                best = (resid, plane, alpha, c)
    if best is None:
        return None
    resid, plane, alpha, c = best
    return plane, alpha, c, resid


_STABILIZER_CLASS = {
    ("XY", 0): "X",
    ("XY", 1): "Y",
    ("XZ", 0): "Z",
    ("XZ", 1): "X",
    ("YZ", 0): "Z",
    ("YZ", 1): "Y",
}


def classify_fusion(spec: FusionSpec, tol: float = 1e-8) -> FusionClassification:
    success, failure = branch_effects(spec)
    succ_rows = [row for _, row in success]
    fail_rows = [row for _, row in failure]

    green = all(_is_green_effect(row, tol) for row in fail_rows)

    norms = [np.linalg.norm(r) for r in succ_rows]
    ref = succ_rows[int(np.argmax(norms))]
    pauli = all(
        abs(n - np.linalg.norm(ref)) <= tol for n in norms
    ) and all(_pauli_related(row, ref, tol) for row in succ_rows)

    symmetric = True
    for row in succ_rows:
        z = equal_up_to_scalar(row, row[list(_SWAP4)], tol)
        if z is None or abs(abs(z) - 1.0) > tol:
            symmetric = False
            break

    stabilizer = all(p.is_multiple_of_half_pi() for p in spec.all_phases())

    plane = pauli_class = None
    alpha = c_bit = residual = None
    if green and pauli and symmetric:
        fit = _fit_normal_form(succ_rows, tol)
        if fit is not None:
            plane, alpha, c_bit, residual = fit
            if stabilizer:
                a = round(alpha / (math.pi / 2))
                if abs(alpha - a * math.pi / 2) <= 1e-7:
                    pauli_class = _STABILIZER_CLASS[(plane, a % 2)]
    return FusionClassification(
        green_failure=green,
        pauli_error=pauli,
        symmetric=symmetric,
        stabilizer=stabilizer,
        plane=plane,
        pauli_class=pauli_class,
        alpha=alpha,
        c=c_bit,
        residual=residual,
    )


# ---------------------------------------------------------------------------
# normal-form constructors and presets
# ---------------------------------------------------------------------------


def make_planar_spec(plane: str, alpha: PhaseLike, c: int = 0) -> FusionSpec:
    """Fusion spec whose classification is (plane, alpha, c).

    The input dressings are Hadamards (which turn the Z-basis failure
    of the bare fusion into an equator-preserving one) composed with
    the quarter-turn twist S^c; the output dressing selects the
    measurement plane of the surviving pair.
    """
    alpha = Phase.coerce(alpha)
    half = Phase.of_pi(1, 2)
    u12 = (half + Phase.of_pi(c % 4, 2), half, half)
    if plane == "XY":
        u3 = (alpha + half, half, half)
    elif plane == "YZ":
        u3 = (Phase.of_pi(0), alpha, Phase.of_pi(0))
    elif plane == "XZ":
        u3 = (Phase.of_pi(-1, 2), alpha, Phase.of_pi(0))
    else:
        raise ValueError(f"unknown plane {plane!r}")
    return FusionSpec(u12, u12, u3)


def type_ii_spec() -> FusionSpec:
    """Destructive fusion measuring both qubits in rotated rails."""
    return make_planar_spec("XY", 0, 0)


def cz_fusion_spec() -> FusionSpec:
    """The fusion that implements a CZ edge on success."""
    return make_planar_spec("XY", Phase.of_pi(1, 2), 1)


def phase_gadget_spec(alpha: PhaseLike = Phase.of_pi(1, 4)) -> FusionSpec:
    """Two-qubit Z phase gadget as an entangling measurement."""
    return make_planar_spec("YZ", alpha, 0)


# ---------------------------------------------------------------------------
# optical channel diagrams
# ---------------------------------------------------------------------------


def _encode_qubits(n: int) -> Diagram:
    enc = par_all(*(Leaf(Triangle()) for _ in range(n)))
    split = par_all(*(Leaf(DRSplit()) for _ in range(n)))
    return Seq(enc, split)


def _id_modes(n: int) -> Diagram:
    return identity((MODE,) * n)


def _core_diagram(n_modes: int = 4) -> Diagram:
    """Rail swap plus detection beam splitter on modes 2 and 3."""
    perm = list(range(n_modes))
    perm[0], perm[2] = perm[2], perm[0]
    pbs = permutation_diagram((MODE,) * n_modes, perm)
    bs = par_all(_id_modes(2), Leaf(BeamSplitter()), _id_modes(n_modes - 4))
    return Seq(pbs, bs)


def dual_rail_gate(triple: Sequence[PhaseLike]) -> Diagram:
    """Two-mode circuit realizing Z(g) X(b) Z(a) on a dual-rail qubit."""
    a, b, g = (Phase.coerce(x) for x in triple)
    return seq_all(
        Par(Leaf(PhaseShift(a)), _id_modes(1)),
        Leaf(BeamSplitter()),
        Par(_id_modes(1), Leaf(PhaseShift(b))),
        Leaf(BeamSplitter()),
        Par(Leaf(PhaseShift(g)), _id_modes(1)),
    )


_FUSION_COARSE = (
    coarse("s", ("mod", ("add", "a", "b"), 2)),
    coarse(
        "k",
        (
            "cond",
            ("mod", ("add", "a", "b"), 2),
            "b",
            ("eq", ("add", "a", "b"), 0),
        ),
    ),
)


def type_i_fusion_channel() -> ChannelDiagram:
    """Partial fusion: two dual-rail qubits in, one dual-rail pair out.

    Outcomes: ``s`` flags success, ``k`` the heralded error bit.
    """
    d = seq_all(
        _encode_qubits(2),
        _core_diagram(),
        par_all(
            Leaf(DRMerge()),
            Leaf(PhotonDetect("a")),
            Leaf(PhotonDetect("b")),
        ),
    )
    return ChannelDiagram.of(d, _FUSION_COARSE)


def green_fusion_channel(params: GreenFusionParams) -> ChannelDiagram:
    """Fusion with connectivity-preserving failure, three phase knobs.

    Each input qubit passes a phase shifter on its second rail and a
    beam splitter; the surviving pair picks up the third phase.
    """
    d = seq_all(
        _encode_qubits(2),
        par_all(
            _id_modes(1),
            Leaf(PhaseShift(params.theta1)),
            _id_modes(1),
            Leaf(PhaseShift(params.theta2)),
        ),
        par_all(Leaf(BeamSplitter()), Leaf(BeamSplitter())),
        _core_diagram(),
        par_all(Leaf(PhaseShift(params.theta3)), _id_modes(3)),
        par_all(
            Leaf(DRMerge()),
            Leaf(PhotonDetect("a")),
            Leaf(PhotonDetect("b")),
        ),
    )
    return ChannelDiagram.of(d, _FUSION_COARSE)


def general_fusion_channel(spec: FusionSpec) -> ChannelDiagram:
    """Destructive dressed fusion; outcomes s, k and the final bit j."""
    d = seq_all(
        _encode_qubits(2),
        Par(dual_rail_gate(spec.u1), dual_rail_gate(spec.u2)),
        _core_diagram(),
        Par(dual_rail_gate(spec.u3), _id_modes(2)),
        par_all(
            Leaf(PhotonDetect("c")),
            Leaf(PhotonDetect("d")),
            Leaf(PhotonDetect("a")),
            Leaf(PhotonDetect("b")),
        ),
    )
    ann = _FUSION_COARSE + (coarse("j", ("mod", "c", 2)),)
    return ChannelDiagram.of(d, ann)


@dataclass(frozen=True)
class FusionBranches:
    """Coarse-grained Kraus families of a fusion measurement."""

    params: GreenFusionParams
    channel: ChannelDiagram
    success: Dict[int, DenseOperator]
    failure: Dict[int, DenseOperator]
    fine: Tuple[Branch, ...]

    def all_operators(self) -> List[DenseOperator]:
        return list(self.success.values()) + list(self.failure.values())


def fusion_kraus_branches(
    params: GreenFusionParams, tol: float = 1e-12
) -> FusionBranches:
    """Two-outcome Kraus family of the phase-dressed fusion.

    Detector outcomes are grouped by the success bit ``s`` and error
    bit ``k``; outcome classes whose members agree up to a global
    phase are represented by a single operator carrying the combined
    weight.
    """
    ch = green_fusion_channel(params)
    groups: Dict[Tuple[int, int], List[Branch]] = {}
    fine: List[Branch] = []
    for br in enumerate_branches(ch, cutoff=2):
        if br.kraus.max_abs() <= tol:
            continue
        fine.append(br)
        key = (br.assignment["s"], br.assignment["k"])
        groups.setdefault(key, []).append(br)
    success: Dict[int, DenseOperator] = {}
    failure: Dict[int, DenseOperator] = {}
    for (s, k), brs in groups.items():
        rep = brs[0].kraus
        for other in brs[1:]:
            z = equal_up_to_scalar(other.kraus.mat, rep.mat)
            if z is None or abs(abs(z) - 1.0) > 1e-9:
                raise Unsupported(
                    "outcome class (s=%d, k=%d) mixes inequivalent branches"
                    % (s, k)
                )
        op = DenseOperator(rep.dom, rep.cod, rep.mat * math.sqrt(len(brs)))
        (success if s == 1 else failure)[k] = op
    return FusionBranches(params, ch, success, failure, tuple(fine))


def fusion_success_probability(
    params: GreenFusionParams,
    state: CQState,
    qubits: Tuple[int, int] = (0, 1),
) -> float:
    """Probability that the fusion heralds success on ``state``.

    The state may live on extra qubit wires acting as a purifying
    reference; the fusion consumes the two wires named by ``qubits``.
    """
    wires = state.space.wires
    if any(w is not QUBIT for w in wires):
        raise Unsupported("success probabilities expect an all-qubit register")
    n = len(wires)
    i, j = qubits
    rest = [x for x in range(n) if x not in (i, j)]
    perm = [i, j] + rest
    route = permutation_diagram(wires, perm)
    fusion = green_fusion_channel(params)
    d = Seq(route, Par(fusion.underlying, identity((QUBIT,) * len(rest))))
    ch = ChannelDiagram(d, fusion.annotations, fusion.var_domains)
    return outcome_probability(ch, state, lambda env: env["s"] == 1)


# ---------------------------------------------------------------------------
# three-qubit analyser
# ---------------------------------------------------------------------------


def ghz_analyser(n: int) -> ChannelDiagram:
    """Destructive three-qubit generalisation of the fusion circuit.

    Rail swaps chain the three dual-rail qubits, a beam splitter sits
    before each detector pair, and the six counts are coarse-grained
    into the success flags ``s``, ``sp``, the byproduct ``j`` and the
    error bit ``k``.
    """
    if n != 3:
        raise Unsupported("only the three-qubit analyser is implemented")
    kinds = (MODE,) * 6
    swap1 = permutation_diagram(kinds, [2, 1, 0, 3, 4, 5])
    swap2 = permutation_diagram(kinds, [0, 1, 4, 3, 2, 5])
    d = seq_all(
        _encode_qubits(3),
        swap1,
        swap2,
        par_all(
            Leaf(BeamSplitter()), Leaf(BeamSplitter()), Leaf(BeamSplitter())
        ),
        par_all(*(Leaf(PhotonDetect(f"r{i}")) for i in range(1, 7))),
    )
    ann = (
        coarse("s", ("mod", ("add", "r1", "r2"), 2)),
        coarse("sp", ("mod", ("add", "r3", "r4"), 2)),
        coarse("j", ("mod", ("add", "r2", ("add", "r4", "r6")), 2)),
        coarse(
            "k",
            (
                "cond",
                ("mod", ("add", "r1", "r2"), 2),
                ("eq", ("add", "r3", "r4"), 0),
                ("eq", ("add", "r1", "r2"), 0),
            ),
        ),
    )
    return ChannelDiagram.of(d, ann)
