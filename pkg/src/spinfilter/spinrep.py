"""Total-spin representation bookkeeping for ensembles of spin-1/2 particles.

The Hilbert space of N spin-1/2 particles decomposes into irreducible
angular-momentum multiplets with total spin J running from N/2 down to 0
(integer N) or 1/2 (odd N).  Each J occurs with a combinatorial degeneracy
d_N^J, and the identity

    sum_J (2J + 1) * d_N^J = 2**N

counts the full product-space dimension.  This module enumerates the
multiplets, computes their degeneracies in exact integer arithmetic, and
builds the standard angular-momentum matrices restricted to a single
multiplet.

All J and M quantum numbers are handled as *doubled* integers (``j2 = 2J``,
``m2 = 2M``) so that half-integer spin is exact.  Basis ordering inside a
multiplet is M descending, everywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, sqrt

import numpy as np

# Layout construction is cheap, but dense block states cost O(N^3) memory
# (about 40k complex entries at N = 60, 620k at N = 150), so the cap is a
# sanity bound rather than a promise that every N below it is practical.
MAX_SPINS = 4096


class CapacityError(ValueError):
    """Requested system size exceeds a documented implementation cap."""


def _check_n_spins(n_spins: int) -> None:
    if not isinstance(n_spins, (int, np.integer)) or n_spins < 1:
        raise ValueError(f"n_spins must be a positive integer, got {n_spins!r}")
    if n_spins > MAX_SPINS:
        raise CapacityError(f"n_spins={n_spins} exceeds the cap of {MAX_SPINS}")


def _check_j2(n_spins: int, j2: int) -> None:
    if not isinstance(j2, (int, np.integer)):
        raise ValueError(f"j2 must be an integer (doubled spin), got {j2!r}")
    if j2 < 0 or j2 > n_spins or (n_spins - j2) % 2 != 0:
        raise ValueError(
            f"invalid total spin 2J={j2} for N={n_spins}: need 0 <= 2J <= N "
            f"with 2J = N (mod 2)"
        )


def degeneracy(n_spins: int, j2: int) -> int:
    """Number of total-spin-J multiplets for N spin-1/2 particles.

    Evaluates d_N^J = N! (2J+1) / ((N/2-J)! (N/2+J+1)!) in exact integer
    arithmetic.  ``j2`` is the doubled spin 2J.
    """
    _check_n_spins(n_spins)
    _check_j2(n_spins, j2)
    k = (n_spins - j2) // 2          # N/2 - J
    m = (n_spins + j2) // 2 + 1      # N/2 + J + 1
    num = comb(n_spins, k) * (j2 + 1)
    d, rem = divmod(num, m)
    assert rem == 0, "degeneracy formula must divide exactly"
    return d


def alpha(n_spins: int, m2: int) -> int:
    """Cumulative degeneracy sum over all multiplets with J >= |M|.

    ``m2`` is the doubled projection 2M; the absolute value is used, so
    opposite projections share the same count.
    """
    _check_n_spins(n_spins)
    if not isinstance(m2, (int, np.integer)):
        raise ValueError(f"m2 must be an integer (doubled projection), got {m2!r}")
    if abs(m2) > n_spins or (n_spins - m2) % 2 != 0:
        raise ValueError(
            f"invalid projection 2M={m2} for N={n_spins}: need |2M| <= N "
            f"with 2M = N (mod 2)"
        )
    return sum(degeneracy(n_spins, j2) for j2 in range(abs(m2), n_spins + 1, 2))


@dataclass(frozen=True)
class Irrep:
    """One total-spin multiplet in a :class:`BlockLayout`.

    ``offset`` indexes into the flattened per-block element storage used
    throughout the package: blocks are stored back to back as row-major
    (2J+1) x (2J+1) matrices, J descending.
    """

    j2: int
    degeneracy: int
    dim: int
    offset: int


@dataclass(frozen=True)
class BlockLayout:
    """The multiplet decomposition for N spin-1/2 particles.

    ``irreps`` is ordered by J descending from N/2; ``total_elements`` is the
    summed size of all (2J+1)^2 blocks.
    """

    n_spins: int
    irreps: tuple[Irrep, ...]
    total_elements: int

    def index_of(self, j2: int) -> int:
        """Position of the multiplet with doubled spin ``j2`` in ``irreps``."""
        pos = (self.n_spins - j2) // 2
        if pos < 0 or pos >= len(self.irreps) or self.irreps[pos].j2 != j2:
            raise ValueError(f"no multiplet with 2J={j2} in layout for N={self.n_spins}")
        return pos

    def m_index(self, j2: int, m2: int) -> int:
        """Row/column of projection ``m2`` inside block ``j2`` (M descending)."""
        if abs(m2) > j2 or (j2 - m2) % 2 != 0:
            raise ValueError(f"invalid 2M={m2} for 2J={j2}")
        return (j2 - m2) // 2


@lru_cache(maxsize=None)
def block_layout(n_spins: int) -> BlockLayout:
    """Enumerate all total-spin multiplets of N spin-1/2 particles."""
    _check_n_spins(n_spins)
    irreps = []
    offset = 0
    for j2 in range(n_spins, -1, -2):
        dim = j2 + 1
        irreps.append(Irrep(j2=j2, degeneracy=degeneracy(n_spins, j2), dim=dim, offset=offset))
        offset += dim * dim
    layout = BlockLayout(n_spins=n_spins, irreps=tuple(irreps), total_elements=offset)
    dim_sum = sum(ir.dim * ir.degeneracy for ir in layout.irreps)
    assert dim_sum == 2**n_spins, "multiplet dimensions must tile the product space"
    return layout


@dataclass(frozen=True)
class IrrepOperators:
    """Dense angular-momentum matrices restricted to one multiplet.

    Matrices act on the (2J+1)-dimensional |J, M> ladder with M descending.
    jz is diagonal with entries M; jplus/jminus are the usual raising and
    lowering matrices; jx = (jplus + jminus)/2 and jy = (jplus - jminus)/2i.
    """

    j2: int
    jz: np.ndarray
    jplus: np.ndarray
    jminus: np.ndarray
    jx: np.ndarray
    jy: np.ndarray


@lru_cache(maxsize=None)
def irrep_operators(j2: int) -> IrrepOperators:
    """Build the spin matrices for a single multiplet of doubled spin ``j2``.

    Results are cached and returned with read-only buffers; copy before
    modifying.
    """
    if not isinstance(j2, (int, np.integer)) or j2 < 0:
        raise ValueError(f"j2 must be a non-negative integer, got {j2!r}")
    dim = j2 + 1
    m2 = j2 - 2 * np.arange(dim)                     # doubled M, descending
    jz = np.diag(m2 / 2.0).astype(complex)
    jplus = np.zeros((dim, dim), dtype=complex)
    for col in range(1, dim):
        m2c = j2 - 2 * col
        # J(J+1) - M(M+1) in doubled variables: (j2(j2+2) - m2(m2+2)) / 4
        jplus[col - 1, col] = sqrt((j2 * (j2 + 2) - m2c * (m2c + 2)) / 4.0)
    jminus = jplus.T.copy()
    jx = (jplus + jminus) / 2.0
    jy = (jplus - jminus) / 2.0j
    ops = IrrepOperators(j2=int(j2), jz=jz, jplus=jplus, jminus=jminus, jx=jx, jy=jy)
    for arr in (ops.jz, ops.jplus, ops.jminus, ops.jx, ops.jy):
        arr.setflags(write=False)
    return ops
