"""Block-diagonal conditional states of a measured spin ensemble.

States that are uniform over the degenerate copies of each total-spin
multiplet are fully described by one dense (2J+1) x (2J+1) matrix per J.
This module stores such states in *degeneracy-aggregated* form: block entry
(M, M') holds the sum of the identical per-copy elements, so block traces
read directly as multiplet populations and the physical per-copy matrix is
the block divided by d_N^J.

Besides the data model, the module provides the standard constructors
(x-polarized coherent state, measurement steady states labeled by M) and
observable extraction: collective means and variances, the squeezing
parameter, purity, per-multiplet traces and transverse variances.
Observables that are undefined for a given state (empty multiplet,
vanishing squeezing denominator) are reported as ``None``, never as NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import lgamma, log, exp, sqrt
from typing import Optional

import numpy as np

from .spinrep import BlockLayout, alpha, block_layout, degeneracy, irrep_operators

#: observables accepted by :func:`expectation`
OBSERVABLES = ("jx", "jy", "jz", "jx2", "jy2", "jz2")

#: squeezing parameter is undefined when <Jx>^2 + <Jy>^2 falls below this
XI2_DENOM_CUTOFF = 1e-12

#: a multiplet with less population than this has undefined internal moments
EMPTY_BLOCK_CUTOFF = 1e-12


@dataclass
class GcsState:
    """Degeneracy-aggregated block-diagonal density matrix.

    ``blocks[k]`` is the complex (2J+1) x (2J+1) matrix for ``layout.irreps[k]``,
    rows and columns ordered by M descending.
    """

    layout: BlockLayout
    blocks: list[np.ndarray]

    def copy(self) -> "GcsState":
        return GcsState(self.layout, [b.copy() for b in self.blocks])

    def block(self, j2: int) -> np.ndarray:
        return self.blocks[self.layout.index_of(j2)]


def zero_state(layout: BlockLayout) -> GcsState:
    """All-zero blocks (not a density matrix; a container for derivatives)."""
    return GcsState(layout, [np.zeros((ir.dim, ir.dim), dtype=complex) for ir in layout.irreps])


def coherent_x(n_spins: int) -> GcsState:
    """Spin-coherent state with every particle polarized along +x.

    Lives entirely in the maximal multiplet J = N/2; the amplitudes in the
    M basis are 2^(-N/2) sqrt(C(N, N/2+M)), evaluated through log-gamma to
    stay finite at large N.
    """
    layout = block_layout(n_spins)
    state = zero_state(layout)
    n = n_spins
    # amplitude at row r (M descending, k = N - r spins up): exp of half log C(N,k) - N/2 log 2
    amps = np.array(
        [
            exp(0.5 * (lgamma(n + 1) - lgamma(k + 1) - lgamma(n - k + 1)) - 0.5 * n * log(2.0))
            for k in range(n, -1, -1)
        ]
    )
    state.blocks[0][:, :] = np.outer(amps, amps)
    return state


def steady_state(n_spins: int, m2: int) -> GcsState:
    """Long-time conditional state of the multi-mode measurement at outcome M.

    Each multiplet with J >= |M| carries weight d_N^J / alpha_N^M at its
    (M, M) entry; all other entries vanish.  ``m2`` is the doubled
    projection 2M.
    """
    layout = block_layout(n_spins)
    a = alpha(n_spins, m2)  # validates m2 range/parity
    state = zero_state(layout)
    for k, ir in enumerate(layout.irreps):
        if ir.j2 < abs(m2):
            continue
        idx = layout.m_index(ir.j2, m2)
        state.blocks[k][idx, idx] = ir.degeneracy / a
    return state


@lru_cache(maxsize=None)
def _block_observable(j2: int, name: str) -> np.ndarray:
    ops = irrep_operators(j2)
    table = {
        "jx": lambda: ops.jx,
        "jy": lambda: ops.jy,
        "jz": lambda: ops.jz,
        "jx2": lambda: ops.jx @ ops.jx,
        "jy2": lambda: ops.jy @ ops.jy,
        "jz2": lambda: ops.jz @ ops.jz,
    }
    if name not in table:
        raise ValueError(f"unknown observable {name!r}; expected one of {OBSERVABLES}")
    mat = np.ascontiguousarray(table[name]())
    mat.setflags(write=False)
    return mat


def expectation(state: GcsState, observable: str) -> float:
    """Collective expectation sum_J tr[X_J rho^J] for X in OBSERVABLES."""
    total = 0.0
    for ir, rho in zip(state.layout.irreps, state.blocks):
        x = _block_observable(ir.j2, observable)
        total += np.einsum("ab,ba->", x, rho).real
    return float(total)


def variance(state: GcsState, observable: str) -> float:
    """Collective variance <X^2> - <X>^2 for X in {jx, jy, jz}."""
    if observable not in ("jx", "jy", "jz"):
        raise ValueError(f"variance expects jx, jy or jz, got {observable!r}")
    return expectation(state, observable + "2") - expectation(state, observable) ** 2


def squeezing_parameter(state: GcsState) -> Optional[float]:
    """N Var[Jz] / (<Jx>^2 + <Jy>^2), or None when the denominator vanishes."""
    ex = expectation(state, "jx")
    ey = expectation(state, "jy")
    denom = ex * ex + ey * ey
    if denom <= XI2_DENOM_CUTOFF:
        return None
    return state.layout.n_spins * variance(state, "jz") / denom


def purity(state: GcsState) -> float:
    """tr[rho^2] of the physical state: sum_J ||rho^J||_F^2 / d_N^J.

    The 1/d weights undo the degeneracy aggregation (each multiplet copy
    carries rho^J / d_N^J).
    """
    total = 0.0
    for ir, rho in zip(state.layout.irreps, state.blocks):
        total += (np.abs(rho) ** 2).sum() / ir.degeneracy
    return float(total)


def block_traces(state: GcsState) -> np.ndarray:
    """Population of each multiplet, J descending."""
    return np.array([np.trace(rho).real for rho in state.blocks])


def per_block_jy_variance(state: GcsState) -> list[Optional[float]]:
    """Normalized transverse variance tr[(Jy - <Jy>_J)^2 rho^J] / tr[rho^J] per multiplet.

    Entries are None for multiplets holding negligible population.
    """
    out: list[Optional[float]] = []
    for ir, rho in zip(state.layout.irreps, state.blocks):
        tr = np.trace(rho).real
        if tr <= EMPTY_BLOCK_CUTOFF:
            out.append(None)
            continue
        jy = _block_observable(ir.j2, "jy")
        jy2 = _block_observable(ir.j2, "jy2")
        mean = np.einsum("ab,ba->", jy, rho).real / tr
        second = np.einsum("ab,ba->", jy2, rho).real / tr
        out.append(float(second - mean * mean))
    return out


def total_trace(state: GcsState) -> float:
    return float(sum(np.trace(rho).real for rho in state.blocks))


def validate_state(state: GcsState, hermiticity_tol: float = 1e-12,
                   trace_tol: float = 1e-10) -> None:
    """Raise if the state violates Hermiticity or normalization tolerances."""
    for ir, rho in zip(state.layout.irreps, state.blocks):
        dev = np.abs(rho - rho.conj().T).max() if rho.size else 0.0
        if dev >= hermiticity_tol:
            raise ValueError(f"block 2J={ir.j2} deviates from Hermiticity by {dev:.3e}")
    tr = total_trace(state)
    if abs(tr - 1.0) >= trace_tol:
        raise ValueError(f"total trace {tr!r} deviates from 1 beyond {trace_tol}")


def min_block_eigenvalue(state: GcsState) -> float:
    """Smallest eigenvalue across all blocks (positivity diagnostic)."""
    lo = np.inf
    for rho in state.blocks:
        if rho.size:
            lo = min(lo, float(np.linalg.eigvalsh((rho + rho.conj().T) / 2.0).min()))
    return lo


def random_state(layout: BlockLayout, rng: np.random.Generator, psd: bool = True) -> GcsState:
    """Random normalized state with support on every multiplet.

    With ``psd=True`` blocks are positive semidefinite (a physical state);
    otherwise they are merely Hermitian (useful for testing linear maps).
    """
    blocks = []
    for ir in layout.irreps:
        g = rng.standard_normal((ir.dim, ir.dim)) + 1j * rng.standard_normal((ir.dim, ir.dim))
        b = g @ g.conj().T if psd else (g + g.conj().T) / 2.0
        blocks.append(b)
    state = GcsState(layout, blocks)
    weights = rng.random(len(layout.irreps)) + 0.1
    weights /= weights.sum()
    for k, rho in enumerate(state.blocks):
        tr = np.trace(rho).real
        state.blocks[k] = rho * (weights[k] / tr)
    return state


# ---------------------------------------------------------------------------
# per-step observable record

@dataclass(frozen=True)
class ObservableRecord:
    """One recorded point of a trajectory.

    ``t`` is physical time (kappa carries units of 1/time), ``kappa_t`` the
    dimensionless product.  ``dY`` is the measurement increment accumulated
    since the previous record.  ``xi_squared`` is None when undefined;
    ``block_jy_vars`` is populated only when per-multiplet recording is
    switched on, with None marking empty multiplets.
    """

    t: float
    kappa_t: float
    dY: float
    mean_jx: float
    mean_jy: float
    mean_jz: float
    var_jz: float
    var_jy: float
    xi_squared: Optional[float]
    purity: float
    block_traces: tuple[float, ...]
    block_jy_vars: Optional[tuple[Optional[float], ...]] = None


# ---------------------------------------------------------------------------
# snapshot serialization (format "spinfilter-gcs v1")
#
# Line-oriented text:
#   spinfilter-gcs v1
#   n_spins <N>
#   block 2j <2J>
#   <re> <im> ... (2J+1 pairs per line, rows in M-descending order)
#   ...
# Floats are written with repr-level precision, so save/load round-trips
# bit-exactly.

SNAPSHOT_HEADER = "spinfilter-gcs v1"


def save_snapshot(state: GcsState, path) -> None:
    """Write a checkpoint of the state to ``path`` (text, versioned)."""
    lines = [SNAPSHOT_HEADER, f"n_spins {state.layout.n_spins}"]
    for ir, rho in zip(state.layout.irreps, state.blocks):
        lines.append(f"block 2j {ir.j2}")
        for row in rho:
            lines.append(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_snapshot(path) -> GcsState:
    """Read a checkpoint written by :func:`save_snapshot`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != SNAPSHOT_HEADER:
        raise ValueError(f"{path}: not a {SNAPSHOT_HEADER!r} snapshot")
    if len(lines) < 2 or not lines[1].startswith("n_spins "):
        raise ValueError(f"{path}: missing n_spins line")
    n_spins = int(lines[1].split()[1])
    layout = block_layout(n_spins)
    state = zero_state(layout)
    pos = 2
    for k, ir in enumerate(layout.irreps):
        if pos >= len(lines) or lines[pos] != f"block 2j {ir.j2}":
            raise ValueError(f"{path}: expected 'block 2j {ir.j2}' at line {pos + 1}")
        pos += 1
        for r in range(ir.dim):
            vals = lines[pos].split()
            if len(vals) != 2 * ir.dim:
                raise ValueError(f"{path}: block 2J={ir.j2} row {r} has wrong length")
            row = np.array([float(v) for v in vals], dtype=float).reshape(ir.dim, 2)
            state.blocks[k][r, :] = row[:, 0] + 1j * row[:, 1]
            pos += 1
    return state
