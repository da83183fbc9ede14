"""Independent reference computations shared by the test modules.

Everything here is deliberately naive (dynamic programming, dense Dicke
matrices built from scratch, explicit tensor products) so it cannot share a
bug with the library paths it checks.
"""

from functools import lru_cache
from math import sqrt

import numpy as np


@lru_cache(maxsize=None)
def branching_degeneracy(n_spins: int, j2: int) -> int:
    """Count multiplets by walking the spin-coupling branching diagram."""
    if j2 < 0 or j2 > n_spins or (n_spins - j2) % 2 != 0:
        return 0
    if n_spins == 1:
        return 1 if j2 == 1 else 0
    return branching_degeneracy(n_spins - 1, j2 - 1) + branching_degeneracy(n_spins - 1, j2 + 1)


def dicke_jz(n: int) -> np.ndarray:
    """Jz on the maximal multiplet J = n/2, M descending."""
    return np.diag(n / 2 - np.arange(n + 1)).astype(complex)


def dicke_jp(n: int) -> np.ndarray:
    j = n / 2
    m = j - np.arange(1, n + 1)  # M of the column being raised
    return np.diag(np.sqrt(j * (j + 1) - m * (m + 1)), 1).astype(complex)


def dicke_jx(n: int) -> np.ndarray:
    jp = dicke_jp(n)
    return (jp + jp.conj().T) / 2


def dicke_jy(n: int) -> np.ndarray:
    jp = dicke_jp(n)
    return (jp - jp.conj().T) / 2j


def dicke_css_x(n: int) -> np.ndarray:
    """+x coherent state vector in the maximal multiplet (M descending)."""
    from math import comb

    amps = np.array([sqrt(comb(n, k)) for k in range(n, -1, -1)]) * 2.0 ** (-n / 2)
    return amps.astype(complex)


def kron_chain(ops: list[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def site_operator(n: int, site: int, op: np.ndarray) -> np.ndarray:
    """op acting on one site of an n-spin product space (site 0 leftmost)."""
    mats = [np.eye(2, dtype=complex)] * n
    mats[site] = op
    return kron_chain(mats)


SZ = np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex)


def heisenberg_dissipator(sites_ops: list[np.ndarray], x: np.ndarray) -> np.ndarray:
    """sum_a (A x A - (A^2 x + x A^2)/2) applied literally."""
    out = np.zeros_like(x)
    for a in sites_ops:
        a2 = a @ a
        out += a @ x @ a - 0.5 * (a2 @ x + x @ a2)
    return out
