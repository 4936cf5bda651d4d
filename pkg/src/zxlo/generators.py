"""Generators of the base diagram language.

Each generator has a fixed wire signature (dom, cod). Generators whose
parameters mention unresolved classical variables (measurement outcomes,
controls) are channel commands; substituting concrete values for those
variables turns them into pure generators that the Fock interpreter
accepts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

from . import exprs
from .errors import NoAdjoint, NotPure, UnboundedPrep
from .wires import DUALRAIL, MODE, QUBIT, Phase, WireKind, ZERO_PHASE

Sig = Tuple[WireKind, ...]


def _is_resolved(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


@dataclass(frozen=True)
class Generator:
    def dom(self) -> Sig:
        raise NotImplementedError

    def cod(self) -> Sig:
        raise NotImplementedError

    @property
    def is_pure(self) -> bool:
        return True

    def outcome_vars(self) -> Tuple[str, ...]:
        """Names of outcome variables this command binds."""
        return ()

    def control_exprs(self) -> Tuple[exprs.Expr, ...]:
        return ()

    def substitute(self, env: dict) -> "Generator":
        return self

    def dagger(self) -> "Generator":
        raise NotPure(f"{self} has no dagger")


@dataclass(frozen=True)
class ZSpider(Generator):
    m_in: int
    n_out: int
    phase: Phase = ZERO_PHASE

    def dom(self):
        return (QUBIT,) * self.m_in

    def cod(self):
        return (QUBIT,) * self.n_out

    def dagger(self):
        return ZSpider(self.n_out, self.m_in, -self.phase)


@dataclass(frozen=True)
class XSpider(Generator):
    m_in: int
    n_out: int
    phase: Phase = ZERO_PHASE

    def dom(self):
        return (QUBIT,) * self.m_in

    def cod(self):
        return (QUBIT,) * self.n_out

    def dagger(self):
        return XSpider(self.n_out, self.m_in, -self.phase)


@dataclass(frozen=True)
class Hadamard(Generator):
    def dom(self):
        return (QUBIT,)

    def cod(self):
        return (QUBIT,)

    def dagger(self):
        return self


@dataclass(frozen=True)
class Scalar(Generator):
    value: complex

    def dom(self):
        return ()

    def cod(self):
        return ()

    def dagger(self):
        return Scalar(complex(self.value).conjugate())


def star() -> Scalar:
    """The star scalar, 1/sqrt(2)."""
    return Scalar(1 / math.sqrt(2))


@dataclass(frozen=True)
class BeamSplitter(Generator):
    """Balanced beam splitter; transfer matrix is the Hadamard matrix."""

    def dom(self):
        return (MODE, MODE)

    def cod(self):
        return (MODE, MODE)

    def dagger(self):
        return self


@dataclass(frozen=True)
class PhaseShift(Generator):
    phase: Phase

    def dom(self):
        return (MODE,)

    def cod(self):
        return (MODE,)

    def dagger(self):
        return PhaseShift(-self.phase)


@dataclass(frozen=True)
class PhotonPrep(Generator):
    """Prepare |n> on a fresh mode; n may be a control expression."""

    n: Union[int, exprs.Expr]
    values: Optional[Tuple[int, ...]] = None  # declared range when controlled

    def dom(self):
        return ()

    def cod(self):
        return (MODE,)

    @property
    def is_pure(self):
        return _is_resolved(self.n)

    def control_exprs(self):
        return () if self.is_pure else (self.n,)

    def max_photons(self) -> int:
        if self.is_pure:
            return self.n
        if self.values is None:
            raise UnboundedPrep(f"controlled PhotonPrep({self.n!r}) lacks a value range")
        return max(self.values)

    def substitute(self, env):
        if self.is_pure:
            return self
        return PhotonPrep(exprs.evaluate(self.n, env), self.values)

    def dagger(self):
        if not self.is_pure:
            raise NotPure("cannot dagger a controlled preparation")
        return PhotonDetect(self.n)


@dataclass(frozen=True)
class PhotonDetect(Generator):
    """Detect a mode; outcome is a variable name or a fixed count."""

    outcome: Union[int, str]

    def dom(self):
        return (MODE,)

    def cod(self):
        return ()

    @property
    def is_pure(self):
        return _is_resolved(self.outcome)

    def outcome_vars(self):
        return () if self.is_pure else (self.outcome,)

    def substitute(self, env):
        if self.is_pure or self.outcome not in env:
            return self
        return PhotonDetect(int(env[self.outcome]))

    def dagger(self):
        if not self.is_pure:
            raise NotPure("cannot dagger a detection with unresolved outcome")
        return PhotonPrep(self.outcome)


@dataclass(frozen=True)
class WNode(Generator):
    """Binomial splitter |n> -> sum_k binom(n,k)^(1/2) |k, n-k>."""

    def dom(self):
        return (MODE,)

    def cod(self):
        return (MODE, MODE)

    def dagger(self):
        return WDagger()


@dataclass(frozen=True)
class WDagger(Generator):
    def dom(self):
        return (MODE, MODE)

    def cod(self):
        return (MODE,)

    def dagger(self):
        return WNode()


@dataclass(frozen=True)
class EndoPhase(Generator):
    """|n> -> c^n |n>."""

    c: complex

    def dom(self):
        return (MODE,)

    def cod(self):
        return (MODE,)

    def dagger(self):
        return EndoPhase(complex(self.c).conjugate())


@dataclass(frozen=True)
class Triangle(Generator):
    """Dual-rail encoder: |0> -> photon in the second rail, |1> -> first rail."""

    def dom(self):
        return (QUBIT,)

    def cod(self):
        return (DUALRAIL,)

    def dagger(self):
        raise NoAdjoint("the dual-rail triangle has no adjoint in this calculus")


@dataclass(frozen=True)
class DRSplit(Generator):
    def dom(self):
        return (DUALRAIL,)

    def cod(self):
        return (MODE, MODE)

    def dagger(self):
        return DRMerge()


@dataclass(frozen=True)
class DRMerge(Generator):
    def dom(self):
        return (MODE, MODE)

    def cod(self):
        return (DUALRAIL,)

    def dagger(self):
        return DRSplit()


@dataclass(frozen=True)
class Swap(Generator):
    kind_a: WireKind
    kind_b: WireKind

    def dom(self):
        return (self.kind_a, self.kind_b)

    def cod(self):
        return (self.kind_b, self.kind_a)

    def dagger(self):
        return Swap(self.kind_b, self.kind_a)


@dataclass(frozen=True)
class Id(Generator):
    kind: WireKind

    def dom(self):
        return (self.kind,)

    def cod(self):
        return (self.kind,)

    def dagger(self):
        return self


@dataclass(frozen=True)
class Discard(Generator):
    kind: WireKind

    def dom(self):
        return (self.kind,)

    def cod(self):
        return ()

    @property
    def is_pure(self):
        return False

    def dagger(self):
        raise NotPure("discard has no dagger")


@dataclass(frozen=True)
class QubitPrep(Generator):
    """Prepare a qubit.

    ``state`` is one of "0", "1", "+", "-" or a pair of complex
    amplitudes; ``control`` optionally selects |control> in the
    computational basis (overriding state) once evaluated.
    """

    state: Union[str, Tuple[complex, complex]] = "0"
    control: Optional[exprs.Expr] = None

    def dom(self):
        return ()

    def cod(self):
        return (QUBIT,)

    @property
    def is_pure(self):
        return self.control is None or _is_resolved(self.control)

    def control_exprs(self):
        return () if self.is_pure else (self.control,)

    def substitute(self, env):
        if self.control is None or _is_resolved(self.control):
            return self
        return QubitPrep(self.state, exprs.evaluate(self.control, env))

    def dagger(self):
        raise NotPure("preparation commands have no dagger")


@dataclass(frozen=True)
class QubitMeasure(Generator):
    basis: str  # "X" or "Z"
    outcome: Union[int, str] = "k"

    def __post_init__(self):
        if self.basis not in ("X", "Z"):
            raise ValueError("measurement basis must be X or Z")

    def dom(self):
        return (QUBIT,)

    def cod(self):
        return ()

    @property
    def is_pure(self):
        return _is_resolved(self.outcome)

    def outcome_vars(self):
        return () if self.is_pure else (self.outcome,)

    def substitute(self, env):
        if self.is_pure or self.outcome not in env:
            return self
        return QubitMeasure(self.basis, int(env[self.outcome]))

    def dagger(self):
        raise NotPure("measurement commands have no dagger")


@dataclass(frozen=True)
class CtrlPhaseFlip(Generator):
    """(-1)^x phase on every photon in a mode, controlled classically."""

    control: exprs.Expr

    def dom(self):
        return (MODE,)

    def cod(self):
        return (MODE,)

    @property
    def is_pure(self):
        return _is_resolved(self.control)

    def control_exprs(self):
        return () if self.is_pure else (self.control,)

    def substitute(self, env):
        if self.is_pure:
            return self
        return CtrlPhaseFlip(exprs.evaluate(self.control, env) & 1)

    def dagger(self):
        if not self.is_pure:
            raise NotPure("unresolved control")
        return self


@dataclass(frozen=True)
class CtrlX(Generator):
    control: exprs.Expr

    def dom(self):
        return (QUBIT,)

    def cod(self):
        return (QUBIT,)

    @property
    def is_pure(self):
        return _is_resolved(self.control)

    def control_exprs(self):
        return () if self.is_pure else (self.control,)

    def substitute(self, env):
        if self.is_pure:
            return self
        return CtrlX(exprs.evaluate(self.control, env) & 1)

    def dagger(self):
        if not self.is_pure:
            raise NotPure("unresolved control")
        return self


@dataclass(frozen=True)
class CtrlZ(Generator):
    control: exprs.Expr

    def dom(self):
        return (QUBIT,)

    def cod(self):
        return (QUBIT,)

    @property
    def is_pure(self):
        return _is_resolved(self.control)

    def control_exprs(self):
        return () if self.is_pure else (self.control,)

    def substitute(self, env):
        if self.is_pure:
            return self
        return CtrlZ(exprs.evaluate(self.control, env) & 1)

    def dagger(self):
        if not self.is_pure:
            raise NotPure("unresolved control")
        return self


@dataclass(frozen=True)
class FusionCmd(Generator):
    """Two-qubit fusion command F^{lambda,alpha}_{ij} with outcomes (s, k).

    The success branch acts as the two-qubit operator obtained by
    coupling both qubits to a virtual ancilla measured in plane
    ``plane`` at angle ``alpha``; the failure branch acts as a pair of
    single-qubit phase effects. Outcomes may be fixed ints (pure) or
    variable names (channel command).
    """

    plane: str  # one of "XY", "XZ", "YZ", "X", "Y"
    alpha: Phase = ZERO_PHASE
    c: int = 0
    s: Union[int, str] = "s"
    k: Union[int, str] = "k"

    def dom(self):
        return (QUBIT, QUBIT)

    def cod(self):
        return (QUBIT, QUBIT)

    @property
    def is_pure(self):
        return _is_resolved(self.s) and _is_resolved(self.k)

    def outcome_vars(self):
        out = []
        if not _is_resolved(self.s):
            out.append(self.s)
        if not _is_resolved(self.k):
            out.append(self.k)
        return tuple(out)

    def substitute(self, env):
        s = self.s if _is_resolved(self.s) else int(env.get(self.s, self.s))
        k = self.k if _is_resolved(self.k) else int(env.get(self.k, self.k))
        return FusionCmd(self.plane, self.alpha, self.c, s, k)

    def dagger(self):
        raise NotPure("fusion commands have no dagger")


@dataclass(frozen=True)
class CtrlSwap(Generator):
    """Classically controlled swap of two qubit wires."""

    control: exprs.Expr

    def dom(self):
        return (QUBIT, QUBIT)

    def cod(self):
        return (QUBIT, QUBIT)

    @property
    def is_pure(self):
        return _is_resolved(self.control)

    def control_exprs(self):
        return () if self.is_pure else (self.control,)

    def substitute(self, env):
        if self.is_pure:
            return self
        return CtrlSwap(exprs.evaluate(self.control, env) & 1)

    def dagger(self):
        if not self.is_pure:
            raise NotPure("unresolved control")
        return self


@dataclass(frozen=True)
class CtrlModeSwap(Generator):
    """Classically controlled swap of two optical modes."""

    control: exprs.Expr

    def dom(self):
        return (MODE, MODE)

    def cod(self):
        return (MODE, MODE)

    @property
    def is_pure(self):
        return _is_resolved(self.control)

    def control_exprs(self):
        return () if self.is_pure else (self.control,)

    def substitute(self, env):
        if self.is_pure:
            return self
        return CtrlModeSwap(exprs.evaluate(self.control, env) & 1)

    def dagger(self):
        if not self.is_pure:
            raise NotPure("unresolved control")
        return self


def _freeze_matrix(mat) -> Tuple[Tuple[complex, ...], ...]:
    return tuple(tuple(complex(x) for x in row) for row in mat)


@dataclass(frozen=True)
class KrausMap(Generator):
    """Finite family of explicit Kraus operators on qubit wires.

    ``outcomes`` binds the branch index bits; ``table`` maps each
    assignment of those bits to a dense matrix (rows x cols =
    2^cod x 2^dom in the computational basis).  Used for derived
    measurement primitives whose branch operators are computed
    numerically rather than built from the graphical generators.
    """

    label: str
    n_dom: int
    n_cod: int
    outcomes: Tuple[Union[int, str], ...]
    table: Tuple[Tuple[Tuple[int, ...], Tuple[Tuple[complex, ...], ...]], ...]

    def dom(self):
        return (QUBIT,) * self.n_dom

    def cod(self):
        return (QUBIT,) * self.n_cod

    @property
    def is_pure(self):
        return all(_is_resolved(o) for o in self.outcomes)

    def outcome_vars(self):
        return tuple(o for o in self.outcomes if not _is_resolved(o))

    def substitute(self, env):
        outs = tuple(
            o if _is_resolved(o) else int(env.get(o, o)) if o in env else o
            for o in self.outcomes
        )
        return KrausMap(self.label, self.n_dom, self.n_cod, outs, self.table)

    def matrix(self):
        if not self.is_pure:
            raise NotPure("unresolved fusion outcomes")
        key = tuple(int(o) & 1 for o in self.outcomes)
        for k, mat in self.table:
            if k == key:
                return mat
        raise KeyError(f"no Kraus entry for outcomes {key} of {self.label}")

    def dagger(self):
        raise NotPure("measurement commands have no dagger")
