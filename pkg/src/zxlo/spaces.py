"""Truncated state spaces and dense operators.

A space descriptor is a wire-kind list plus a total-photon cutoff N.
Its basis is {qubit bit-strings} x {occupation vectors with total <= N},
qubit bits lexicographic and major, occupations ordered by total photon
number then colexicographically. DualRail wires contribute two
occupation slots (Fock space of a 2-level system = two modes).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import ShapeMismatch
from .wires import WireKind

Bits = Tuple[int, ...]
Occ = Tuple[int, ...]
BasisState = Tuple[Bits, Occ]


@lru_cache(maxsize=None)
def occupations(num_slots: int, cutoff: int) -> Tuple[Occ, ...]:
    """All occupation vectors with total <= cutoff, by (total, colex)."""
    if num_slots == 0:
        return ((),)
    out: List[Occ] = []
    for total in range(cutoff + 1):
        out.extend(_compositions_colex(num_slots, total))
    return tuple(out)


def _compositions_colex(num_slots: int, total: int) -> List[Occ]:
    occs = []
    for occ in itertools.product(range(total + 1), repeat=num_slots):
        if sum(occ) == total:
            occs.append(occ)
    occs.sort(key=lambda o: tuple(reversed(o)))
    return occs


@dataclass(frozen=True)
class Space:
    wires: Tuple[WireKind, ...]
    cutoff: int

    @property
    def num_qubits(self) -> int:
        return sum(w.qubit_slots for w in self.wires)

    @property
    def num_slots(self) -> int:
        return sum(w.mode_slots for w in self.wires)

    @property
    def basis(self) -> Tuple[BasisState, ...]:
        return _basis(self.wires, self.cutoff)

    @property
    def index(self) -> Dict[BasisState, int]:
        return _index(self.wires, self.cutoff)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def basis_index(self, bits: Sequence[int], occ: Sequence[int]) -> int:
        return self.index[(tuple(bits), tuple(occ))]

    def split(self, left_wires: int):
        """Split into (left space, right space, row indices into each).

        Returns (sl, sr, il, ir) where for combined basis position i the
        left part is sl.basis[il[i]] and the right part sr.basis[ir[i]].
        """
        return _split(self.wires, self.cutoff, left_wires)

    def select(self, positions: Sequence[int]):
        """Reorder/sub-select wires; returns (new space, index map).

        ``positions`` lists wire indices of self; the new space has those
        wires in that order. Only valid when positions is a permutation
        of all wires (otherwise basis totals would not be preserved).
        """
        return _select(self.wires, self.cutoff, tuple(positions))


def _offsets(wires: Sequence[WireKind]):
    qoff, soff = {}, {}
    q = s = 0
    for i, w in enumerate(wires):
        qoff[i] = q
        soff[i] = s
        q += w.qubit_slots
        s += w.mode_slots
    return qoff, soff


@lru_cache(maxsize=None)
def _select(wires: Tuple[WireKind, ...], cutoff: int, perm: Tuple[int, ...]):
    space = Space(wires, cutoff)
    new = Space(tuple(wires[p] for p in perm), cutoff)
    qoff, soff = _offsets(wires)
    idx = np.empty(space.dim, dtype=np.int64)
    nindex = new.index
    for i, (bits, occ) in enumerate(space.basis):
        nbits: List[int] = []
        nocc: List[int] = []
        for p in perm:
            w = wires[p]
            if w.qubit_slots:
                nbits.append(bits[qoff[p]])
            for s in range(w.mode_slots):
                nocc.append(occ[soff[p] + s])
        idx[i] = nindex[(tuple(nbits), tuple(nocc))]
    return new, idx


@lru_cache(maxsize=None)
def _split(wires: Tuple[WireKind, ...], cutoff: int, left_wires: int):
    space = Space(wires, cutoff)
    wl = wires[:left_wires]
    wr = wires[left_wires:]
    sl = Space(wl, cutoff)
    sr = Space(wr, cutoff)
    nq = sum(w.qubit_slots for w in wl)
    ns = sum(w.mode_slots for w in wl)
    il = np.empty(space.dim, dtype=np.int64)
    ir = np.empty(space.dim, dtype=np.int64)
    li, ri = sl.index, sr.index
    for i, (bits, occ) in enumerate(space.basis):
        il[i] = li[(bits[:nq], occ[:ns])]
        ir[i] = ri[(bits[nq:], occ[ns:])]
    return sl, sr, il, ir


@lru_cache(maxsize=None)
def _basis(wires: Tuple[WireKind, ...], cutoff: int) -> Tuple[BasisState, ...]:
    nq = sum(w.qubit_slots for w in wires)
    ns = sum(w.mode_slots for w in wires)
    occs = occupations(ns, cutoff)
    out = []
    for bits in itertools.product((0, 1), repeat=nq):
        for occ in occs:
            out.append((bits, occ))
    return tuple(out)


@lru_cache(maxsize=None)
def _index(wires: Tuple[WireKind, ...], cutoff: int) -> Dict[BasisState, int]:
    return {state: i for i, state in enumerate(_basis(wires, cutoff))}


@dataclass
class DenseOperator:
    """Complex matrix tagged with input/output space descriptors."""

    dom: Space
    cod: Space
    mat: np.ndarray

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=complex)
        if self.mat.shape != (self.cod.dim, self.dom.dim):
            raise ShapeMismatch(
                f"matrix shape {self.mat.shape} vs spaces {(self.cod.dim, self.dom.dim)}"
            )

    def then(self, other: "DenseOperator") -> "DenseOperator":
        """self followed by other."""
        if other.dom.wires != self.cod.wires or other.dom.cutoff != self.cod.cutoff:
            raise ShapeMismatch(
                f"cannot compose: {self.cod.wires} -> {other.dom.wires}"
            )
        return DenseOperator(self.dom, other.cod, other.mat @ self.mat)

    def tensor(self, other: "DenseOperator") -> "DenseOperator":
        """Truncation-aware tensor product (cutoffs must agree)."""
        if self.dom.cutoff != other.dom.cutoff:
            raise ShapeMismatch("cutoff mismatch in tensor")
        dom = Space(self.dom.wires + other.dom.wires, self.dom.cutoff)
        cod = Space(self.cod.wires + other.cod.wires, self.cod.cutoff)
        _, _, dl, dr = dom.split(len(self.dom.wires))
        _, _, cl, cr = cod.split(len(self.cod.wires))
        mat = self.mat[np.ix_(cl, dl)] * other.mat[np.ix_(cr, dr)]
        return DenseOperator(dom, cod, mat)

    def dagger(self) -> "DenseOperator":
        return DenseOperator(self.cod, self.dom, self.mat.conj().T)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.mat @ vec

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.mat))) if self.mat.size else 0.0


def equal_up_to_scalar(a, b, tol: float = 1e-9):
    """Return z with a = z*b (residual < tol after max-normalization), else None.

    Accepts DenseOperator or plain arrays of equal shape.
    """
    am = a.mat if isinstance(a, DenseOperator) else np.asarray(a, dtype=complex)
    bm = b.mat if isinstance(b, DenseOperator) else np.asarray(b, dtype=complex)
    if am.shape != bm.shape:
        raise ShapeMismatch(f"{am.shape} vs {bm.shape}")
    ma = float(np.max(np.abs(am))) if am.size else 0.0
    mb = float(np.max(np.abs(bm))) if bm.size else 0.0
    if mb < 1e-300:
        return 1.0 + 0j if ma < tol else None
    if ma < 1e-300:
        return None
    flat = np.argmax(np.abs(bm))
    z = am.flat[flat] / bm.flat[flat]
    residual = float(np.max(np.abs(am - z * bm))) / max(ma, abs(z) * mb)
    return z if residual < tol else None


def basis_vector(space: Space, bits: Sequence[int], occ: Sequence[int]) -> np.ndarray:
    v = np.zeros(space.dim, dtype=complex)
    v[space.basis_index(bits, occ)] = 1.0
    return v
