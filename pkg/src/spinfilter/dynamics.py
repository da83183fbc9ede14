"""Stochastic filter dynamics for the two continuous-measurement models.

Two conditional master equations are integrated on the block-diagonal state
representation of :mod:`spinfilter.gcs`:

* COLLECTIVE (single-mode): drift kappa * (Jz rho Jz - {Jz^2, rho}/2) and
  measurement backaction sqrt(kappa) * (Jz rho + rho Jz - 2<Jz> rho) dW,
  with record increment dY = 2 sqrt(kappa) <Jz> dt + dW.  Everything is
  block-diagonal, so multiplet populations are conserved.

* SYMMETRIC (multi-mode): drift kappa * sum_n (jz_n rho jz_n - {jz_n^2, rho}/2)
  built from per-particle spins.  On degeneracy-aggregated blocks this is a
  three-band map coupling each multiplet to its neighbours J-1, J, J+1; the
  couplings reduce to closed-form tables (built here in exact rational
  arithmetic) because every operator involved is diagonal in M.  The
  measurement strength carries an extra 1/sqrt(N):
  dY = 2 sqrt(kappa/N) <Jz> dt + dW.

The integrator is Euler-Maruyama with per-step Hermitization and trace
renormalization; every coefficient in the symmetric tables is validated
against the brute-force engine of :mod:`spinfilter.oracle` in the test
suite before large-N results are trusted.

Since Jz and each jz_n are diagonal in the M basis, *both* generators and
the measurement term act elementwise on the flattened vector of block
entries; a trajectory step is a handful of vectorized array operations
regardless of N.

Noise: each trajectory draws its Wiener increments as
``Generator(Philox(key=seed)).standard_normal() * sqrt(dt)`` (counter-based,
so streams are reproducible); ensembles derive the key for trajectory i as
``seed XOR i``.
"""

from __future__ import annotations

import logging
import warnings
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from math import comb, sqrt
from typing import Optional, Union

import numpy as np

from .gcs import (
    EMPTY_BLOCK_CUTOFF,
    XI2_DENOM_CUTOFF,
    GcsState,
    ObservableRecord,
    coherent_x,
    load_snapshot,
    steady_state,
)
from .spinrep import BlockLayout, block_layout, degeneracy, irrep_operators

logger = logging.getLogger("spinfilter.dynamics")

#: hard ceiling on kappa*dt; above this the Euler step is not trusted at all
MAX_KAPPA_DT = 0.01
#: soft ceiling; larger values trigger a warning
WARN_KAPPA_DT = 1e-3
#: one-step pre-normalization trace drift beyond this aborts the run
MAX_TRACE_DRIFT = 1e-3

_MASK64 = (1 << 64) - 1


class StepSizeError(RuntimeError):
    """A single integrator step drifted too far; reduce dt."""


class ModelKind(Enum):
    COLLECTIVE = "collective"
    SYMMETRIC = "symmetric"


class EngineKind(Enum):
    BLOCK = "block"
    FULL_ORACLE = "full_oracle"


@dataclass
class TrajectoryConfig:
    """Everything needed to reproduce one trajectory.

    ``initial`` is either a :class:`GcsState` or one of the strings
    ``"coherent_x"``, ``"steady_state:<M>"`` (M as integer, decimal or
    fraction, e.g. ``0.5`` or ``1/2``) and ``"snapshot:<path>"``.

    ``stop_var_jz`` enables the steady-state stopping rule: the run ends at
    the first *record* whose Var[Jz] falls below the threshold (the outcome
    label is then M = round(2<Jz>)/2).  With ``pad_to_horizon`` the record
    grid is kept full length by repeating the frozen observables (the
    stopped state is a filter fixed point, so this is the exact
    continuation; padded records carry dY = 0).

    ``eig_log_every`` controls how often (in records) the smallest block
    eigenvalue is computed and logged; values below -1e-6 raise a warning
    in the log.  0 disables the diagnostic except at the final record.
    """

    n_spins: int
    kappa: float
    dt: float
    t_final: float
    seed: int
    model: ModelKind
    engine: EngineKind = EngineKind.BLOCK
    initial: Union[str, GcsState] = "coherent_x"
    record_every: int = 1
    stop_var_jz: Optional[float] = None
    record_block_jy_variance: bool = False
    eig_log_every: int = 50
    pad_to_horizon: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.model, str):
            self.model = ModelKind(self.model)
        if isinstance(self.engine, str):
            self.engine = EngineKind(self.engine)
        if self.n_spins < 1:
            raise ValueError("n_spins must be >= 1")
        if self.kappa <= 0 or self.dt <= 0 or self.t_final <= 0:
            raise ValueError("kappa, dt and t_final must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        kdt = self.kappa * self.dt
        if kdt > MAX_KAPPA_DT * (1 + 1e-12):
            raise ValueError(
                f"kappa*dt = {kdt:.3g} exceeds the hard limit {MAX_KAPPA_DT}; reduce dt"
            )
        if kdt > WARN_KAPPA_DT * (1 + 1e-9):
            warnings.warn(
                f"kappa*dt = {kdt:.3g} is above {WARN_KAPPA_DT}; integrator bias may be visible",
                stacklevel=2,
            )
        # explicit Euler handles the multiplicative measurement noise only
        # while its per-step amplitude sqrt(k_eff dt) * 2Jmax stays small;
        # beyond ~0.75 far-corner coherences blow up
        keff = self.kappa if self.model is ModelKind.COLLECTIVE else self.kappa / self.n_spins
        noise_scale = sqrt(keff * self.dt) * self.n_spins
        if noise_scale > 0.75:
            warnings.warn(
                f"per-step measurement noise amplitude {noise_scale:.2f} is large; "
                f"the explicit integrator is likely unstable at this N -- reduce dt",
                stacklevel=2,
            )

    @property
    def n_steps(self) -> int:
        return max(1, int(np.ceil(self.t_final / self.dt - 1e-9)))


def resolve_initial(config: TrajectoryConfig) -> GcsState:
    """Materialize the configured initial state."""
    init = config.initial
    if isinstance(init, GcsState):
        if init.layout.n_spins != config.n_spins:
            raise ValueError(
                f"initial state has N={init.layout.n_spins}, config has N={config.n_spins}"
            )
        return init.copy()
    if init == "coherent_x":
        return coherent_x(config.n_spins)
    if init.startswith("steady_state:"):
        m = Fraction(init.split(":", 1)[1])
        m2 = 2 * m
        if m2.denominator != 1:
            raise ValueError(f"steady-state M must be integer or half-integer, got {m}")
        return steady_state(config.n_spins, int(m2))
    if init.startswith("snapshot:"):
        state = load_snapshot(init.split(":", 1)[1])
        if state.layout.n_spins != config.n_spins:
            raise ValueError(
                f"snapshot has N={state.layout.n_spins}, config has N={config.n_spins}"
            )
        return state
    raise ValueError(f"unrecognized initial state spec {init!r}")


# ---------------------------------------------------------------------------
# symmetric-model coupling tables

@dataclass(frozen=True)
class SymmetricCoefficients:
    """Per-element coupling tables of the symmetric generator on flat storage.

    The generator acts on the flattened block vector as

        out = stay * rho
        out[down_tgt] += down_coef * rho[down_src]    # flow J -> J-1
        out[up_tgt]   += up_coef   * rho[up_src]      # flow J -> J+1

    ``stay`` already includes the uniform -N/4 loss term.  The down/up
    coefficients are nonnegative; ``stay`` is signed (its M M' factor
    changes sign on coherences).  Rational prefactors are evaluated
    exactly per multiplet before the square-root factors are applied.
    """

    n_spins: int
    stay: np.ndarray
    down_tgt: np.ndarray
    down_src: np.ndarray
    down_coef: np.ndarray
    up_tgt: np.ndarray
    up_src: np.ndarray
    up_coef: np.ndarray


def _deg_or_zero(n_spins: int, j2: int) -> int:
    """d_n^J extended by zero outside the valid range (and d_0^0 = 1)."""
    if j2 < 0 or j2 > n_spins or (n_spins - j2) % 2 != 0:
        return 0
    if n_spins == 0:
        return 1
    return degeneracy(n_spins, j2)


def build_symmetric_coefficients(layout: BlockLayout) -> SymmetricCoefficients:
    """Assemble the three-band coupling tables for N spins.

    For a target element (J, M, M') fed by source multiplets J' = J-1, J, J+1
    the couplings are, with d' = d_{N-1} branching degeneracies,

        stay:  N M M' [ d'_{J-1/2} / (4J^2) + d'_{J+1/2} / (4(J+1)^2) ] / d_N^J - N/4
        from J-1:  N d'_{J-1/2} sqrt((J^2-M^2)(J^2-M'^2)) / (4J^2 d_N^{J-1})
        from J+1:  N d'_{J+1/2} sqrt(((J+1)^2-M^2)((J+1)^2-M'^2)) / (4(J+1)^2 d_N^{J+1})

    Terms with J = 0 in a denominator are dropped; their numerators vanish
    identically (asserted).  Columns of the assembled map sum to zero, so
    the trace is conserved exactly.
    """
    n = layout.n_spins
    total = layout.total_elements
    stay = np.zeros(total)
    down_tgt, down_src, down_coef = [], [], []
    up_tgt, up_src, up_coef = [], [], []

    for k, ir in enumerate(layout.irreps):
        j2, dim, off = ir.j2, ir.dim, ir.offset
        m2 = j2 - 2 * np.arange(dim)
        mm = np.multiply.outer(m2, m2).astype(float)  # m2 * m2' per element
        d_dn = _deg_or_zero(n - 1, j2 - 1)
        d_up = _deg_or_zero(n - 1, j2 + 1)

        c_stay = Fraction(0)
        if j2 > 0:
            c_stay += Fraction(n * d_dn, 4 * j2 * j2 * ir.degeneracy)
        else:
            assert np.all(mm == 0.0), "J=0 multiplet must have M=0 only"
        c_stay += Fraction(n * d_up, 4 * (j2 + 2) ** 2 * ir.degeneracy)
        stay[off:off + dim * dim] = (float(c_stay) * mm - n / 4.0).ravel()

        # inflow from the larger multiplet J+1 (population flowing down)
        if k > 0:
            src = layout.irreps[k - 1]
            amp = np.sqrt(((j2 + 2) ** 2 - m2 * m2).astype(float))
            c_in = float(Fraction(n * _deg_or_zero(n - 1, j2 + 1),
                                  4 * (j2 + 2) ** 2 * src.degeneracy))
            coef = c_in * np.multiply.outer(amp, amp)
            rows = np.arange(dim)
            tgt = off + (rows[:, None] * dim + rows[None, :])
            s_idx = src.offset + ((rows + 1)[:, None] * src.dim + (rows + 1)[None, :])
            down_tgt.append(tgt.ravel())
            down_src.append(s_idx.ravel())
            down_coef.append(coef.ravel())

        # inflow from the smaller multiplet J-1 (population flowing up)
        if k + 1 < len(layout.irreps):
            src = layout.irreps[k + 1]
            inner = np.arange(1, dim - 1)  # target rows with |M| <= J - 1
            if inner.size:
                amp = np.sqrt((j2 * j2 - m2[inner] * m2[inner]).astype(float))
                c_in = float(Fraction(n * _deg_or_zero(n - 1, j2 - 1),
                                      4 * j2 * j2 * src.degeneracy))
                coef = c_in * np.multiply.outer(amp, amp)
                tgt = off + (inner[:, None] * dim + inner[None, :])
                s_idx = src.offset + ((inner - 1)[:, None] * src.dim + (inner - 1)[None, :])
                up_tgt.append(tgt.ravel())
                up_src.append(s_idx.ravel())
                up_coef.append(coef.ravel())

    def cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.empty(0, dtype=dtype)

    return SymmetricCoefficients(
        n_spins=n,
        stay=stay,
        down_tgt=cat(down_tgt, np.int64),
        down_src=cat(down_src, np.int64),
        down_coef=cat(down_coef, float),
        up_tgt=cat(up_tgt, np.int64),
        up_src=cat(up_src, np.int64),
        up_coef=cat(up_coef, float),
    )


@lru_cache(maxsize=32)
def _cached_coefficients(n_spins: int) -> SymmetricCoefficients:
    return build_symmetric_coefficients(block_layout(n_spins))


# ---------------------------------------------------------------------------
# flattened block engine

class _BlockEngine:
    """Precomputed index maps and observable vectors for one layout.

    The state lives in a single complex vector holding all blocks row-major
    back to back; every operation the filter needs is elementwise in that
    representation (plus two gathers for the symmetric band coupling).
    """

    def __init__(self, layout: BlockLayout):
        self.layout = layout
        self.n_spins = layout.n_spins
        self.size = layout.total_elements
        self.slices = [slice(ir.offset, ir.offset + ir.dim * ir.dim) for ir in layout.irreps]

        m2r = np.empty(self.size, dtype=np.int64)
        m2c = np.empty(self.size, dtype=np.int64)
        tperm = np.empty(self.size, dtype=np.int64)
        inv_deg = np.empty(self.size)
        diag_idx, diag_m, starts = [], [], []
        jxT = np.empty(self.size, dtype=complex)
        jyT = np.empty(self.size, dtype=complex)
        jx2T = np.empty(self.size, dtype=complex)
        jy2T = np.empty(self.size, dtype=complex)

        count_diag = 0
        for ir in layout.irreps:
            dim, off = ir.dim, ir.offset
            m2 = ir.j2 - 2 * np.arange(dim)
            rows = np.repeat(m2, dim)
            cols = np.tile(m2, dim)
            sl = slice(off, off + dim * dim)
            m2r[sl] = rows
            m2c[sl] = cols
            rr, cc = np.divmod(np.arange(dim * dim), dim)
            tperm[sl] = off + cc * dim + rr
            inv_deg[sl] = 1.0 / ir.degeneracy
            starts.append(count_diag)
            diag_idx.append(off + np.arange(dim) * (dim + 1))
            diag_m.append(m2 / 2.0)
            count_diag += dim
            ops = irrep_operators(ir.j2)
            jxT[sl] = ops.jx.T.ravel()
            jyT[sl] = ops.jy.T.ravel()
            jx2T[sl] = (ops.jx @ ops.jx).T.ravel()
            jy2T[sl] = (ops.jy @ ops.jy).T.ravel()

        self.m2r, self.m2c, self.tperm, self.inv_deg = m2r, m2c, tperm, inv_deg
        self.diag_idx = np.concatenate(diag_idx)
        self.diag_m = np.concatenate(diag_m)
        self.diag_m2 = self.diag_m**2
        self.diag_starts = np.array(starts, dtype=np.int64)
        self.jxT, self.jyT, self.jx2T, self.jy2T = jxT, jyT, jx2T, jy2T
        self.coll = -((m2r - m2c).astype(float) ** 2) / 8.0
        self.msum = (m2r + m2c) / 2.0

    # -- conversions ------------------------------------------------------
    def flatten(self, state: GcsState) -> np.ndarray:
        flat = np.empty(self.size, dtype=complex)
        for sl, rho in zip(self.slices, state.blocks):
            flat[sl] = rho.ravel()
        return flat

    def unflatten(self, flat: np.ndarray) -> GcsState:
        blocks = [
            flat[sl].reshape(ir.dim, ir.dim).copy()
            for sl, ir in zip(self.slices, self.layout.irreps)
        ]
        return GcsState(self.layout, blocks)

    # -- generators -------------------------------------------------------
    def apply_collective(self, rho: np.ndarray) -> np.ndarray:
        return self.coll * rho

    def apply_symmetric(self, rho: np.ndarray, coeffs: SymmetricCoefficients) -> np.ndarray:
        out = coeffs.stay * rho
        out[coeffs.down_tgt] += coeffs.down_coef * rho[coeffs.down_src]
        out[coeffs.up_tgt] += coeffs.up_coef * rho[coeffs.up_src]
        return out

    # -- observables ------------------------------------------------------
    def expect_jz(self, rho: np.ndarray) -> float:
        return float(self.diag_m @ rho[self.diag_idx].real)

    def record(self, rho: np.ndarray, t: float, kappa: float, dy: float,
               want_block_jy: bool) -> ObservableRecord:
        diag = rho[self.diag_idx].real
        ez = float(self.diag_m @ diag)
        ez2 = float(self.diag_m2 @ diag)
        ex = float(np.dot(self.jxT, rho).real)
        ey = float(np.dot(self.jyT, rho).real)
        ey2 = float(np.dot(self.jy2T, rho).real)
        var_jz = ez2 - ez * ez
        var_jy = ey2 - ey * ey
        denom = ex * ex + ey * ey
        xi2 = None if denom <= XI2_DENOM_CUTOFF else self.n_spins * var_jz / denom
        pur = float(self.inv_deg @ (rho.real**2 + rho.imag**2))
        traces = np.add.reduceat(diag, self.diag_starts)
        block_jy = None
        if want_block_jy:
            vals: list[Optional[float]] = []
            for sl, tr in zip(self.slices, traces):
                if tr <= EMPTY_BLOCK_CUTOFF:
                    vals.append(None)
                    continue
                mean = float(np.dot(self.jyT[sl], rho[sl]).real) / tr
                second = float(np.dot(self.jy2T[sl], rho[sl]).real) / tr
                vals.append(second - mean * mean)
            block_jy = tuple(vals)
        return ObservableRecord(
            t=t, kappa_t=kappa * t, dY=dy,
            mean_jx=ex, mean_jy=ey, mean_jz=ez,
            var_jz=var_jz, var_jy=var_jy, xi_squared=xi2, purity=pur,
            block_traces=tuple(float(x) for x in traces),
            block_jy_vars=block_jy,
        )

    def min_eigenvalue(self, rho: np.ndarray) -> float:
        lo = np.inf
        for sl, ir in zip(self.slices, self.layout.irreps):
            b = rho[sl].reshape(ir.dim, ir.dim)
            lo = min(lo, float(np.linalg.eigvalsh((b + b.conj().T) / 2.0).min()))
        return lo

    # -- one Euler-Maruyama step -----------------------------------------
    def step(self, rho: np.ndarray, model: ModelKind,
             coeffs: Optional[SymmetricCoefficients], kappa: float,
             sqrt_keff: float, dt: float, dw: float) -> tuple[np.ndarray, float, float]:
        ez = self.expect_jz(rho)
        if model is ModelKind.COLLECTIVE:
            drift = self.apply_collective(rho)
        else:
            drift = self.apply_symmetric(rho, coeffs)
        new = rho + (kappa * dt) * drift + (sqrt_keff * dw) * ((self.msum - 2.0 * ez) * rho)
        new += np.conj(new[self.tperm])
        new *= 0.5
        tr = float(new[self.diag_idx].real.sum())
        drift_diag = tr - 1.0
        if abs(drift_diag) > MAX_TRACE_DRIFT:
            raise StepSizeError(
                f"one-step trace drift {drift_diag:.3e} exceeds {MAX_TRACE_DRIFT}; reduce dt"
            )
        new /= tr
        dy = 2.0 * sqrt_keff * ez * dt + dw
        return new, dy, drift_diag


@lru_cache(maxsize=32)
def _cached_engine(n_spins: int) -> _BlockEngine:
    return _BlockEngine(block_layout(n_spins))


def _sqrt_keff(model: ModelKind, kappa: float, n_spins: int) -> float:
    # the multi-mode record dilutes the per-particle signal by 1/sqrt(N)
    return sqrt(kappa) if model is ModelKind.COLLECTIVE else sqrt(kappa / n_spins)


# ---------------------------------------------------------------------------
# public single-step / generator API

def lindblad_collective(state: GcsState) -> GcsState:
    """Collective dephasing generator Jz rho Jz - {Jz^2, rho}/2 (no kappa)."""
    eng = _cached_engine(state.layout.n_spins)
    return eng.unflatten(eng.apply_collective(eng.flatten(state)))


def lindblad_symmetric(state: GcsState, coeffs: SymmetricCoefficients) -> GcsState:
    """Per-particle dephasing generator on aggregated blocks (no kappa)."""
    if coeffs.n_spins != state.layout.n_spins:
        raise ValueError(
            f"coefficients built for N={coeffs.n_spins}, state has N={state.layout.n_spins}"
        )
    eng = _cached_engine(state.layout.n_spins)
    return eng.unflatten(eng.apply_symmetric(eng.flatten(state), coeffs))


def filter_step(state: GcsState, model: ModelKind,
                coeffs: Optional[SymmetricCoefficients], kappa: float,
                dt: float, noise_increment: float) -> tuple[GcsState, float, float]:
    """One Euler-Maruyama update of the conditional state.

    ``noise_increment`` is the Wiener increment dW ~ Normal(0, dt) drawn by
    the caller.  Returns (new state, record increment dY, pre-normalization
    trace drift).  The update is Hermitized and renormalized; a trace drift
    beyond ``MAX_TRACE_DRIFT`` raises :class:`StepSizeError`.
    """
    model = ModelKind(model)
    n = state.layout.n_spins
    if model is ModelKind.SYMMETRIC:
        if coeffs is None:
            coeffs = _cached_coefficients(n)
        elif coeffs.n_spins != n:
            raise ValueError(f"coefficients built for N={coeffs.n_spins}, state has N={n}")
    eng = _cached_engine(n)
    flat, dy, drift = eng.step(
        eng.flatten(state), model, coeffs, kappa, _sqrt_keff(model, kappa, n), dt,
        noise_increment,
    )
    return eng.unflatten(flat), dy, drift


# ---------------------------------------------------------------------------
# trajectories

class TrajectoryResult(Sequence):
    """Sequence of :class:`ObservableRecord` plus run metadata."""

    def __init__(self, records: list[ObservableRecord], final_state: GcsState,
                 stopped_early: bool, n_steps: int, config: TrajectoryConfig):
        self.records = records
        self.final_state = final_state
        self.stopped_early = stopped_early
        self.n_steps = n_steps
        self.config = config

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def final_m2(self) -> int:
        """Measurement outcome label 2M = round(2 <Jz>) of the last record."""
        return int(round(2.0 * self.records[-1].mean_jz))


def _record_steps(n_steps: int, record_every: int) -> list[int]:
    steps = list(range(0, n_steps + 1, record_every))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return steps


_NOISE_CHUNK = 8192


def run_trajectory(config: TrajectoryConfig) -> TrajectoryResult:
    """Integrate one trajectory; deterministic given (config, seed)."""
    if config.engine is EngineKind.FULL_ORACLE:
        from . import oracle  # deferred: oracle imports this module

        return oracle.run_trajectory_full(config)

    eng = _cached_engine(config.n_spins)
    coeffs = _cached_coefficients(config.n_spins) if config.model is ModelKind.SYMMETRIC else None
    rho = eng.flatten(resolve_initial(config))
    skeff = _sqrt_keff(config.model, config.kappa, config.n_spins)
    kappa, dt = config.kappa, config.dt
    sqdt = sqrt(dt)
    n_steps = config.n_steps
    rec_steps = _record_steps(n_steps, config.record_every)

    rng = np.random.Generator(np.random.Philox(key=config.seed & _MASK64))
    records = [eng.record(rho, 0.0, kappa, 0.0, config.record_block_jy_variance)]
    stopped = False
    max_drift = 0.0
    dy_acc = 0.0
    next_rec = 1  # index into rec_steps
    noise = np.empty(0)
    noise_pos = 0

    k = 0
    while k < n_steps:
        if noise_pos >= noise.size:
            noise = rng.standard_normal(min(_NOISE_CHUNK, n_steps - k)) * sqdt
            noise_pos = 0
        try:
            rho, dy, drift = eng.step(rho, config.model, coeffs, kappa, skeff, dt, noise[noise_pos])
        except StepSizeError as exc:
            raise StepSizeError(f"{exc} (at t={k * dt:.6g}, step {k})") from exc
        noise_pos += 1
        dy_acc += dy
        max_drift = max(max_drift, abs(drift))
        k += 1
        if k == rec_steps[next_rec]:
            rec = eng.record(rho, k * dt, kappa, dy_acc, config.record_block_jy_variance)
            records.append(rec)
            dy_acc = 0.0
            rec_i = next_rec
            next_rec += 1
            if config.eig_log_every and rec_i % config.eig_log_every == 0:
                _log_min_eig(eng, rho, k * dt)
            if config.stop_var_jz is not None and rec.var_jz < config.stop_var_jz:
                stopped = True
                break

    _log_min_eig(eng, rho, k * dt)
    logger.debug("trajectory done: n=%d model=%s steps=%d max_trace_drift=%.3e",
                 config.n_spins, config.model.value, k, max_drift)

    if stopped and config.pad_to_horizon:
        frozen = records[-1]
        for step in rec_steps[next_rec:]:
            records.append(replace(frozen, t=step * dt, kappa_t=kappa * step * dt, dY=0.0))

    return TrajectoryResult(records, eng.unflatten(rho), stopped, k, config)


def _log_min_eig(eng: _BlockEngine, rho: np.ndarray, t: float) -> None:
    lo = eng.min_eigenvalue(rho)
    if lo < -1e-6:
        logger.warning("min_block_eigenvalue=%.3e t=%.6g (negative beyond tolerance)", lo, t)
    else:
        logger.debug("min_block_eigenvalue=%.3e t=%.6g", lo, t)


# ---------------------------------------------------------------------------
# ensembles

@dataclass
class EnsembleSummary:
    """Cross-trajectory statistics on the common record grid."""

    t: np.ndarray
    kappa_t: np.ndarray
    means: dict[str, np.ndarray]
    stderrs: dict[str, np.ndarray]
    final_m2: np.ndarray
    final_purity: np.ndarray
    martingale_max_sigma: float
    n_traj: int

    def final_m_histogram(self) -> dict[int, int]:
        """Counts of the terminal outcome label, keyed by 2M."""
        vals, counts = np.unique(self.final_m2, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}


_ENSEMBLE_FIELDS = ("mean_jx", "mean_jy", "mean_jz", "var_jz", "var_jy", "purity")


def _run_one(config: TrajectoryConfig) -> TrajectoryResult:
    return run_trajectory(config)


def ensemble_run(config: TrajectoryConfig, n_traj: int,
                 n_workers: int = 1) -> EnsembleSummary:
    """Monte Carlo ensemble of independent trajectories.

    Trajectory i runs with Philox key ``config.seed XOR i``; trajectories
    are therefore independent of worker count and schedule.  If a stopping
    rule is configured, stopped trajectories are padded to the full record
    grid (see :class:`TrajectoryConfig`).
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    configs = [
        replace(config, seed=(config.seed ^ i) & _MASK64, pad_to_horizon=True)
        for i in range(n_traj)
    ]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_run_one, configs))
    else:
        results = [_run_one(c) for c in configs]

    n_times = len(results[0].records)
    for r in results:
        assert len(r.records) == n_times, "trajectories must share the record grid"
    t = np.array([rec.t for rec in results[0].records])
    kappa_t = np.array([rec.kappa_t for rec in results[0].records])

    series = {
        name: np.array([[getattr(rec, name) for rec in r.records] for r in results])
        for name in _ENSEMBLE_FIELDS
    }
    means = {k: v.mean(axis=0) for k, v in series.items()}
    if n_traj > 1:
        stderrs = {k: v.std(axis=0, ddof=1) / sqrt(n_traj) for k, v in series.items()}
    else:
        stderrs = {k: np.zeros(n_times) for k in series}

    mz = means["mean_jz"]
    se = stderrs["mean_jz"]
    usable = se > 1e-15
    mart = float(np.max(np.abs(mz[usable] - mz[0]) / se[usable])) if usable.any() else 0.0

    return EnsembleSummary(
        t=t,
        kappa_t=kappa_t,
        means=means,
        stderrs=stderrs,
        final_m2=np.array([r.final_m2 for r in results], dtype=np.int64),
        final_purity=np.array([r.records[-1].purity for r in results]),
        martingale_max_sigma=mart,
        n_traj=n_traj,
    )


def binomial_final_m_probabilities(n_spins: int) -> dict[int, float]:
    """Outcome distribution of 2M for a measurement starting from coherent_x."""
    return {m2: comb(n_spins, (n_spins + m2) // 2) / 2.0**n_spins
            for m2 in range(-n_spins, n_spins + 1, 2)}
