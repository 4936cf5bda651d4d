"""Fock-space interpretation of pure diagrams.

Everything is evaluated at a single global photon cutoff; by the
soundness identity (interpretation commutes with the total-photon
projector up to the number of creations) a cutoff of at least
photon_budget(d, input_max) makes the truncation exact.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np

from .diagram import Diagram, Leaf, Par, Seq
from .errors import CutoffTooSmall, NotPassiveLO, NotPure
from .generators import (
    BeamSplitter,
    CtrlModeSwap,
    CtrlPhaseFlip,
    CtrlSwap,
    CtrlX,
    CtrlZ,
    DRMerge,
    DRSplit,
    EndoPhase,
    FusionCmd,
    Generator,
    Hadamard,
    Id,
    PhaseShift,
    PhotonDetect,
    PhotonPrep,
    QubitMeasure,
    QubitPrep,
    Scalar,
    Swap,
    Triangle,
    WDagger,
    WNode,
    XSpider,
    KrausMap,
    ZSpider,
)
from .spaces import DenseOperator, Space, occupations
from .wires import DUALRAIL, MODE, QUBIT, WireKind

_H2 = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def photon_budget(d: Diagram, input_max: int = 0) -> int:
    """Cutoff guaranteeing exact interpretation: inputs + all creations."""
    total = input_max
    for g in d.leaves():
        if isinstance(g, PhotonPrep):
            total += g.max_photons()
        elif isinstance(g, Triangle):
            total += 1
    return total


def interpret(d: Diagram, cutoff: int, check_budget: bool = True) -> DenseOperator:
    """Dense matrix of a pure diagram at the given total-photon cutoff."""
    if check_budget and cutoff < photon_budget(d, 0):
        raise CutoffTooSmall(
            f"cutoff {cutoff} below photon budget {photon_budget(d, 0)}"
        )
    return _interp(d, cutoff)


def _interp(d: Diagram, cutoff: int) -> DenseOperator:
    if isinstance(d, Leaf):
        return generator_matrix(d.gen, cutoff)
    if isinstance(d, Seq):
        return _interp(d.first, cutoff).then(_interp(d.second, cutoff))
    if isinstance(d, Par):
        return _interp(d.left, cutoff).tensor(_interp(d.right, cutoff))
    raise TypeError(f"not a diagram: {d!r}")


def _qubit_space(n: int, cutoff: int) -> Space:
    return Space((QUBIT,) * n, cutoff)


def _mode_space(n: int, cutoff: int) -> Space:
    return Space((MODE,) * n, cutoff)


@lru_cache(maxsize=None)
def _fock_poly_lift(u_key, m: int, cutoff: int) -> np.ndarray:
    """Lift an m x m transfer matrix to the <=cutoff Fock sector.

    Uses creation-operator polynomial algebra (a_j+ -> sum_i U_ij a_i+),
    deliberately not the permanent formula, which serves as the
    independent oracle.
    """
    u = np.array(u_key, dtype=complex)
    occs = occupations(m, cutoff)
    index = {o: i for i, o in enumerate(occs)}
    mat = np.zeros((len(occs), len(occs)), dtype=complex)
    for col, occ_in in enumerate(occs):
        # polynomial over creation monomials, as dict occ -> coeff
        poly: Dict[Tuple[int, ...], complex] = {(0,) * m: 1.0 + 0j}
        for j, nj in enumerate(occ_in):
            for _ in range(nj):
                new: Dict[Tuple[int, ...], complex] = {}
                for mono, coeff in poly.items():
                    for i in range(m):
                        if abs(u[i, j]) < 1e-300:
                            continue
                        lifted = list(mono)
                        lifted[i] += 1
                        key = tuple(lifted)
                        new[key] = new.get(key, 0j) + coeff * u[i, j]
                poly = new
        norm_in = math.sqrt(math.prod(math.factorial(n) for n in occ_in))
        for mono, coeff in poly.items():
            if sum(mono) > cutoff:
                continue
            amp = coeff * math.sqrt(
                math.prod(math.factorial(n) for n in mono)
            ) / norm_in
            mat[index[mono], col] = amp
    return mat


def fock_lift(u: np.ndarray, cutoff: int) -> DenseOperator:
    u = np.asarray(u, dtype=complex)
    m = u.shape[0]
    key = tuple(tuple(complex(x) for x in row) for row in u)
    mat = _fock_poly_lift(key, m, cutoff)
    sp = _mode_space(m, cutoff)
    return DenseOperator(sp, sp, mat)


def _spider_matrix(n_out: int, m_in: int, phase: float, hadamard: bool) -> np.ndarray:
    mat = np.zeros((2**n_out, 2**m_in), dtype=complex)
    mat[0, 0] += 1.0
    mat[-1, -1] += np.exp(1j * phase)
    if hadamard:
        hn = _kron_pow(_H2, n_out)
        hm = _kron_pow(_H2, m_in)
        mat = hn @ mat @ hm
    return mat


@lru_cache(maxsize=None)
def _kron_pow_cached(n: int) -> np.ndarray:
    if n == 0:
        return np.array([[1.0 + 0j]])
    return np.kron(_kron_pow_cached(n - 1), _H2)


def _kron_pow(_mat: np.ndarray, n: int) -> np.ndarray:
    return _kron_pow_cached(n)


def _qubit_state(state) -> np.ndarray:
    if isinstance(state, tuple):
        return np.array([state[0], state[1]], dtype=complex)
    table = {
        "0": [1, 0],
        "1": [0, 1],
        "+": [1 / math.sqrt(2), 1 / math.sqrt(2)],
        "-": [1 / math.sqrt(2), -1 / math.sqrt(2)],
    }
    return np.array(table[state], dtype=complex)


def _plane_effect(plane: str, alpha: float, k: int) -> np.ndarray:
    """Row vector of the <+_{plane,alpha}| effect, sign flipped by k."""
    s = (-1) ** (k & 1)
    r2 = math.sqrt(2)
    if plane in ("XY", "X", "Y"):
        if plane == "X":
            alpha = 0.0
        elif plane == "Y":
            alpha = math.pi / 2
        return np.array([1.0, s * np.exp(1j * alpha)]) / r2
    if plane == "YZ":
        plus = np.array([1.0, 1.0]) / r2
        minus = np.array([1.0, -1.0]) / r2
        return (plus + s * np.exp(1j * alpha) * minus) / r2
    if plane in ("XZ", "Z"):
        if plane == "Z":
            # <0| or <1|
            return np.array([1.0, 0.0]) if k == 0 else np.array([0.0, 1.0])
        keti = np.array([1.0, -1j]) / r2  # <i|
        ketmi = np.array([1.0, 1j]) / r2  # <-i|
        return (keti + s * np.exp(1j * alpha) * ketmi) / r2
    raise ValueError(f"unknown plane {plane!r}")


def _fusion_matrix(g: FusionCmd) -> np.ndarray:
    """4x4 branch operator of the fusion command, computational basis."""
    eye4 = np.eye(4, dtype=complex)
    zz = np.diag([1.0, -1.0, -1.0, 1.0]).astype(complex)
    if g.s == 1:
        e = _plane_effect(g.plane, g.alpha.radians, g.k)
        r2 = math.sqrt(2)
        w0 = e[0] / r2  # <e|0> <0|+>
        w1 = e[1] / r2
        a = w0 * eye4 + w1 * zz
        sc = np.diag([1.0, 1j ** (g.c % 4)]).astype(complex)
        return a @ np.kron(sc, sc)
    # failure: junk re-preparation after opposite-sign X-basis effects
    r2 = math.sqrt(2)
    plus = np.array([1.0, 1.0]) / r2
    minus = np.array([1.0, -1.0]) / r2
    e1, e2 = (minus, plus) if g.k == 1 else (plus, minus)
    effect = np.kron(e1, e2).reshape(1, 4)
    junk = np.zeros((4, 1), dtype=complex)
    junk[0, 0] = 1.0
    return (junk @ effect) / r2


def generator_matrix(g: Generator, cutoff: int) -> DenseOperator:
    if not g.is_pure:
        raise NotPure(f"cannot interpret channel command {g!r}")
    if isinstance(g, ZSpider):
        mat = _spider_matrix(g.n_out, g.m_in, g.phase.radians, hadamard=False)
        return DenseOperator(
            _qubit_space(g.m_in, cutoff), _qubit_space(g.n_out, cutoff), mat
        )
    if isinstance(g, XSpider):
        mat = _spider_matrix(g.n_out, g.m_in, g.phase.radians, hadamard=True)
        return DenseOperator(
            _qubit_space(g.m_in, cutoff), _qubit_space(g.n_out, cutoff), mat
        )
    if isinstance(g, Hadamard):
        sp = _qubit_space(1, cutoff)
        return DenseOperator(sp, sp, _H2.copy())
    if isinstance(g, Scalar):
        sp = Space((), cutoff)
        return DenseOperator(sp, sp, np.array([[g.value]], dtype=complex))
    if isinstance(g, BeamSplitter):
        return fock_lift(_H2, cutoff)
    if isinstance(g, PhaseShift):
        return _endo_operator(np.exp(1j * g.phase.radians), cutoff)
    if isinstance(g, EndoPhase):
        return _endo_operator(complex(g.c), cutoff)
    if isinstance(g, PhotonPrep):
        if g.n > cutoff:
            raise CutoffTooSmall(f"PhotonPrep({g.n}) needs cutoff >= {g.n}")
        dom = Space((), cutoff)
        cod = _mode_space(1, cutoff)
        mat = np.zeros((cod.dim, 1), dtype=complex)
        mat[cod.basis_index((), (g.n,)), 0] = 1.0
        return DenseOperator(dom, cod, mat)
    if isinstance(g, PhotonDetect):
        if g.outcome > cutoff:
            raise CutoffTooSmall(f"PhotonDetect({g.outcome}) needs larger cutoff")
        dom = _mode_space(1, cutoff)
        cod = Space((), cutoff)
        mat = np.zeros((1, dom.dim), dtype=complex)
        mat[0, dom.basis_index((), (g.outcome,))] = 1.0
        return DenseOperator(dom, cod, mat)
    if isinstance(g, WNode):
        dom = _mode_space(1, cutoff)
        cod = _mode_space(2, cutoff)
        mat = np.zeros((cod.dim, dom.dim), dtype=complex)
        for n in range(cutoff + 1):
            col = dom.basis_index((), (n,))
            for k in range(n + 1):
                mat[cod.basis_index((), (k, n - k)), col] = math.sqrt(
                    math.comb(n, k)
                )
        return DenseOperator(dom, cod, mat)
    if isinstance(g, WDagger):
        w = generator_matrix(WNode(), cutoff)
        return w.dagger()
    if isinstance(g, Triangle):
        if cutoff < 1:
            raise CutoffTooSmall("triangle needs cutoff >= 1")
        dom = _qubit_space(1, cutoff)
        cod = Space((DUALRAIL,), cutoff)
        mat = np.zeros((cod.dim, 2), dtype=complex)
        mat[cod.basis_index((), (0, 1)), 0] = 1.0  # |0> -> photon in rail 2
        mat[cod.basis_index((), (1, 0)), 1] = 1.0  # |1> -> photon in rail 1
        return DenseOperator(dom, cod, mat)
    if isinstance(g, DRSplit):
        dom = Space((DUALRAIL,), cutoff)
        cod = _mode_space(2, cutoff)
        return DenseOperator(dom, cod, np.eye(dom.dim, dtype=complex))
    if isinstance(g, DRMerge):
        dom = _mode_space(2, cutoff)
        cod = Space((DUALRAIL,), cutoff)
        return DenseOperator(dom, cod, np.eye(dom.dim, dtype=complex))
    if isinstance(g, Swap):
        dom = Space((g.kind_a, g.kind_b), cutoff)
        cod, idx = dom.select((1, 0))
        mat = np.zeros((cod.dim, dom.dim), dtype=complex)
        mat[idx, np.arange(dom.dim)] = 1.0
        return DenseOperator(dom, cod, mat)
    if isinstance(g, Id):
        sp = Space((g.kind,), cutoff)
        return DenseOperator(sp, sp, np.eye(sp.dim, dtype=complex))
    if isinstance(g, QubitPrep):
        vec = (
            _qubit_state(("0", "1")[g.control & 1])
            if g.control is not None
            else _qubit_state(g.state)
        )
        dom = Space((), cutoff)
        cod = _qubit_space(1, cutoff)
        return DenseOperator(dom, cod, vec.reshape(2, 1))
    if isinstance(g, QubitMeasure):
        k = g.outcome & 1
        if g.basis == "Z":
            row = np.array([[1.0, 0.0]] if k == 0 else [[0.0, 1.0]], dtype=complex)
        else:
            row = np.array(
                [[1.0, 1.0]] if k == 0 else [[1.0, -1.0]], dtype=complex
            ) / math.sqrt(2)
        return DenseOperator(_qubit_space(1, cutoff), Space((), cutoff), row)
    if isinstance(g, CtrlPhaseFlip):
        return _endo_operator(-1.0 + 0j if (g.control & 1) else 1.0 + 0j, cutoff)
    if isinstance(g, CtrlX):
        sp = _qubit_space(1, cutoff)
        mat = np.array([[0, 1], [1, 0]], dtype=complex) if g.control & 1 else np.eye(2)
        return DenseOperator(sp, sp, mat)
    if isinstance(g, CtrlZ):
        sp = _qubit_space(1, cutoff)
        mat = np.diag([1.0, -1.0]).astype(complex) if g.control & 1 else np.eye(2)
        return DenseOperator(sp, sp, mat)
    if isinstance(g, FusionCmd):
        sp = _qubit_space(2, cutoff)
        return DenseOperator(sp, sp, _fusion_matrix(g))
    if isinstance(g, CtrlSwap):
        sp = _qubit_space(2, cutoff)
        mat = np.eye(4, dtype=complex)
        if g.control & 1:
            mat = mat[[0, 2, 1, 3]]
        return DenseOperator(sp, sp, mat)
    if isinstance(g, CtrlModeSwap):
        u = np.array([[0, 1], [1, 0]], dtype=complex) if g.control & 1 else np.eye(2)
        return fock_lift(u, cutoff)
    if isinstance(g, KrausMap):
        return DenseOperator(
            _qubit_space(g.n_dom, cutoff),
            _qubit_space(g.n_cod, cutoff),
            np.array(g.matrix(), dtype=complex),
        )
    raise TypeError(f"no interpretation for generator {g!r}")


def _endo_operator(c: complex, cutoff: int) -> DenseOperator:
    sp = _mode_space(1, cutoff)
    diag = np.array([c ** occ[0] for _, occ in sp.basis], dtype=complex)
    return DenseOperator(sp, sp, np.diag(diag))


def lo_transfer_matrix(d: Diagram) -> np.ndarray:
    """m x m transfer matrix of a passive linear-optical diagram."""

    def walk(node: Diagram) -> np.ndarray:
        if isinstance(node, Seq):
            u1 = walk(node.first)
            u2 = walk(node.second)
            return u2 @ u1
        if isinstance(node, Par):
            u1 = walk(node.left)
            u2 = walk(node.right)
            out = np.zeros(
                (u1.shape[0] + u2.shape[0], u1.shape[1] + u2.shape[1]), dtype=complex
            )
            out[: u1.shape[0], : u1.shape[1]] = u1
            out[u1.shape[0] :, u1.shape[1] :] = u2
            return out
        g = node.gen
        if isinstance(g, BeamSplitter):
            return _H2.copy()
        if isinstance(g, PhaseShift):
            return np.array([[np.exp(1j * g.phase.radians)]])
        if isinstance(g, Swap) and g.kind_a is MODE and g.kind_b is MODE:
            return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        if isinstance(g, Id) and g.kind is MODE:
            return np.eye(1, dtype=complex)
        raise NotPassiveLO(f"{g!r} is not a passive linear-optical generator")

    return walk(d)


def operator_to_json(op: DenseOperator, threshold: float = 1e-14) -> dict:
    entries = []
    for (r, c), v in np.ndenumerate(op.mat):
        if abs(v) > threshold:
            entries.append([int(r), int(c), float(v.real), float(v.imag)])
    return {
        "dom": [w.value for w in op.dom.wires],
        "cod": [w.value for w in op.cod.wires],
        "cutoff": op.dom.cutoff,
        "entries": entries,
    }
