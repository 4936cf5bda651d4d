"""Permanent-based amplitude oracle for passive linear optics.

Independent of the Fock interpreter: amplitudes are computed from the
m x m transfer matrix by Ryser's formula on the row/column-repeated
submatrix, divided by sqrt of the occupation factorials.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import PhotonNumberMismatch, SizeLimit


def ryser_permanent(a: np.ndarray) -> complex:
    """Permanent of a square matrix by Ryser's formula with Gray-code updates."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0j
    if n > 16:
        raise SizeLimit("permanent limited to n <= 16")
    total = 0j
    row_sums = np.zeros(n, dtype=complex)
    prev_gray = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        changed = gray ^ prev_gray
        j = changed.bit_length() - 1
        if gray & changed:
            row_sums += a[:, j]
        else:
            row_sums -= a[:, j]
        prev_gray = gray
        sign = -1 if (bin(gray).count("1") % 2) != (n % 2) else 1
        total += sign * np.prod(row_sums)
    return complex(total)


def permanent_amplitude(
    u: np.ndarray, in_occ: Sequence[int], out_occ: Sequence[int]
) -> complex:
    """<out_occ| U_Fock |in_occ> for a passive transfer matrix U."""
    u = np.asarray(u, dtype=complex)
    if sum(in_occ) != sum(out_occ):
        raise PhotonNumberMismatch(f"{sum(in_occ)} photons in, {sum(out_occ)} out")
    cols = [j for j, n in enumerate(in_occ) for _ in range(n)]
    rows = [i for i, n in enumerate(out_occ) for _ in range(n)]
    sub = u[np.ix_(rows, cols)]
    norm = math.sqrt(
        math.prod(math.factorial(n) for n in in_occ)
        * math.prod(math.factorial(n) for n in out_occ)
    )
    return ryser_permanent(sub) / norm
