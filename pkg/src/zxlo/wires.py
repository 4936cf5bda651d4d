"""Wire kinds and phases for the diagram IR.

A wire is a qubit, a single bosonic mode, or a dual-rail pair (the Fock
space of a two-level system, isomorphic to two modes). Phases are stored
exactly as rational multiples of pi whenever possible, with a float
fallback for generic angles; exactness is what makes stabilizer
detection reliable later on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Union


class WireKind(Enum):
    QUBIT = "Qubit"
    MODE = "Mode"
    DUALRAIL = "DualRail"

    @property
    def mode_slots(self) -> int:
        """Number of occupation-number slots this wire contributes."""
        if self is WireKind.MODE:
            return 1
        if self is WireKind.DUALRAIL:
            return 2
        return 0

    @property
    def qubit_slots(self) -> int:
        return 1 if self is WireKind.QUBIT else 0

    def __repr__(self):
        return self.value


QUBIT = WireKind.QUBIT
MODE = WireKind.MODE
DUALRAIL = WireKind.DUALRAIL


@dataclass(frozen=True)
class Phase:
    """An angle, reduced modulo 2*pi.

    ``exact`` holds the angle as a Fraction multiple of pi when known
    exactly; ``approx`` always holds the float value in radians.
    """

    exact: Optional[Fraction]
    approx: float

    @staticmethod
    def of_pi(num: int, den: int = 1) -> "Phase":
        frac = Fraction(num, den) % 2
        return Phase(frac, float(frac) * math.pi)

    @staticmethod
    def of_float(radians: float) -> "Phase":
        return Phase(None, radians % (2 * math.pi))

    @staticmethod
    def coerce(value: Union["Phase", Fraction, int, float]) -> "Phase":
        if isinstance(value, Phase):
            return value
        if isinstance(value, Fraction):
            return Phase.of_pi(value.numerator, value.denominator)
        if isinstance(value, int):
            return Phase.of_pi(value)
        return Phase.of_float(float(value))

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    @property
    def radians(self) -> float:
        return self.approx

    def __neg__(self) -> "Phase":
        if self.exact is not None:
            return Phase.of_pi(-self.exact.numerator, self.exact.denominator)
        return Phase.of_float(-self.approx)

    def __add__(self, other: "Phase") -> "Phase":
        if self.exact is not None and other.exact is not None:
            s = self.exact + other.exact
            return Phase.of_pi(s.numerator, s.denominator)
        return Phase.of_float(self.approx + other.approx)

    def is_multiple_of_half_pi(self) -> bool:
        """True only for exactly-represented multiples of pi/2."""
        return self.exact is not None and (self.exact * 2).denominator == 1

    def __repr__(self):
        if self.exact is not None:
            return f"Phase({self.exact}*pi)"
        return f"Phase({self.approx:.6g}rad)"


ZERO_PHASE = Phase.of_pi(0)
PI = Phase.of_pi(1)
HALF_PI = Phase.of_pi(1, 2)
