"""Brute-force full-Hilbert-space engine and equivalence gates.

Everything here works on dense 2^N x 2^N matrices in the spin product basis
(first particle = most significant bit, bit 0 = spin up).  The module
provides

* a degeneracy-resolved coupled basis |J, M, i> built by coupling one spin
  at a time (Condon-Shortley phases), so the copy label i is deterministic
  and projection onto degeneracy-uniform block states is well defined;
* literal per-site implementations of both dissipators and a full-space
  mirror of the block trajectory integrator;
* the equivalence gates: generator-level comparison on random block states
  and lockstep common-noise trajectories, reported as structured text with
  a pass/fail flag.  The fast block engine is only trusted at large N
  because these gates pass at small N.

Caps: basis and states up to N = 12 (dimension 4096); lockstep trajectory
gates are intended for N <= 6.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from math import sqrt
from typing import Optional

import numpy as np

from .gcs import (
    XI2_DENOM_CUTOFF,
    GcsState,
    ObservableRecord,
    zero_state,
)
from .spinrep import CapacityError, block_layout
from .dynamics import (
    ModelKind,
    StepSizeError,
    TrajectoryConfig,
    TrajectoryResult,
    MAX_TRACE_DRIFT,
    _MASK64,
    _cached_coefficients,
    _cached_engine,
    _record_steps,
    _sqrt_keff,
    resolve_initial,
)

MAX_ORACLE_SPINS = 12
MAX_LOCKSTEP_SPINS = 6

#: default gate thresholds
GENERATOR_GATE_TOL = 1e-10
LOCKSTEP_GATE_TOL = 1e-8


@dataclass(frozen=True)
class CoupledBasis:
    """Unitary change of basis from the spin product basis to |J, M, i>.

    Columns are grouped by multiplet (J descending), then by degeneracy copy
    i in construction order, then by M descending; ``labels[c]`` is the
    (2J, 2M, i) triple of column c and ``col_offsets[k]`` the first column
    of the k-th multiplet group (matching ``block_layout`` ordering).
    """

    n_spins: int
    transform: np.ndarray
    labels: tuple[tuple[int, int, int], ...]
    col_offsets: tuple[int, ...]


@lru_cache(maxsize=8)
def coupled_basis(n_spins: int) -> CoupledBasis:
    """Couple N spin-1/2 particles one at a time into labeled multiplets."""
    if n_spins < 1:
        raise ValueError("n_spins must be >= 1")
    if n_spins > MAX_ORACLE_SPINS:
        raise CapacityError(
            f"coupled_basis supports N <= {MAX_ORACLE_SPINS}, got {n_spins}"
        )
    # entries: (j2, vecs) with vecs of shape (2^k, j2+1), columns M descending
    entries: list[tuple[int, np.ndarray]] = [(1, np.eye(2, dtype=complex))]
    for _ in range(n_spins - 1):
        next_entries: list[tuple[int, np.ndarray]] = []
        for j2, vecs in entries:
            dim_parent, rows = j2 + 1, vecs.shape[0]
            for j2c in (j2 + 1, j2 - 1):
                if j2c < 0:
                    continue
                dim_child = j2c + 1
                child = np.zeros((2 * rows, dim_child), dtype=complex)
                for col in range(dim_child):
                    m2c = j2c - 2 * col
                    # parent column with M = Mc -/+ 1/2 feeding spin up/down
                    up_num = j2 + m2c + 1
                    dn_num = j2 - m2c + 1
                    if j2c == j2 + 1:
                        c_up = sqrt(up_num / (2.0 * (j2 + 1)))
                        c_dn = sqrt(dn_num / (2.0 * (j2 + 1)))
                    else:
                        c_up = -sqrt(dn_num / (2.0 * (j2 + 1)))
                        c_dn = sqrt(up_num / (2.0 * (j2 + 1)))
                    p_up = (j2 - (m2c - 1)) // 2
                    p_dn = (j2 - (m2c + 1)) // 2
                    if 0 <= p_up <= j2:
                        child[0::2, col] += c_up * vecs[:, p_up]
                    if 0 <= p_dn <= j2:
                        child[1::2, col] += c_dn * vecs[:, p_dn]
                next_entries.append((j2c, child))
        entries = next_entries

    # group by J descending, copies in construction order
    layout = block_layout(n_spins)
    dim_total = 2**n_spins
    transform = np.empty((dim_total, dim_total), dtype=complex)
    labels: list[tuple[int, int, int]] = []
    col_offsets: list[int] = []
    col = 0
    for ir in layout.irreps:
        col_offsets.append(col)
        copy = 0
        for j2, vecs in entries:
            if j2 != ir.j2:
                continue
            transform[:, col:col + ir.dim] = vecs
            labels.extend((ir.j2, ir.j2 - 2 * m, copy) for m in range(ir.dim))
            col += ir.dim
            copy += 1
        assert copy == ir.degeneracy, "copy count must match the multiplet degeneracy"
    assert col == dim_total
    return CoupledBasis(
        n_spins=n_spins,
        transform=transform,
        labels=tuple(labels),
        col_offsets=tuple(col_offsets),
    )


# ---------------------------------------------------------------------------
# product-basis operators

def _site_z_diag(n_spins: int, site: int) -> np.ndarray:
    """Diagonal of jz for one site: +1/2 when its bit is 0 (up)."""
    b = np.arange(2**n_spins)
    return 0.5 - ((b >> (n_spins - 1 - site)) & 1).astype(float)


@lru_cache(maxsize=8)
def _site_z_diags(n_spins: int) -> np.ndarray:
    return np.stack([_site_z_diag(n_spins, s) for s in range(n_spins)])


@lru_cache(maxsize=8)
def full_collective_operator(n_spins: int, axis: str) -> np.ndarray:
    """Dense collective J_axis = sum_n sigma_axis^(n)/2 in the product basis."""
    if n_spins > MAX_ORACLE_SPINS:
        raise CapacityError(f"full operators support N <= {MAX_ORACLE_SPINS}")
    paulis = {
        "x": np.array([[0, 1], [1, 0]], dtype=complex),
        "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    sig = paulis[axis] / 2.0
    total = np.zeros((2**n_spins, 2**n_spins), dtype=complex)
    for site in range(n_spins):
        total += np.kron(
            np.eye(2**site), np.kron(sig, np.eye(2 ** (n_spins - 1 - site)))
        )
    return total


def coherent_x_full(n_spins: int) -> np.ndarray:
    """Density matrix of the +x polarized product state."""
    psi = np.full(2**n_spins, 2.0 ** (-n_spins / 2.0), dtype=complex)
    return np.outer(psi, psi.conj())


def full_lindblad(model: ModelKind, rho: np.ndarray) -> np.ndarray:
    """Exact dissipator in the product basis (no kappa factor).

    COLLECTIVE: Jz rho Jz - {Jz^2, rho}/2 with the full collective Jz.
    SYMMETRIC: the per-site sum over jz_n rho jz_n - {jz_n^2, rho}/2,
    applied site by site.
    """
    model = ModelKind(model)
    n_spins = rho.shape[0].bit_length() - 1
    assert 2**n_spins == rho.shape[0], "state dimension must be a power of two"
    if model is ModelKind.COLLECTIVE:
        z = _site_z_diags(n_spins).sum(axis=0)
        z2 = z * z
        return z[:, None] * rho * z[None, :] - 0.5 * (z2[:, None] * rho + rho * z2[None, :])
    out = np.zeros_like(rho)
    for site in range(n_spins):
        d = _site_z_diag(n_spins, site)
        d2 = d * d
        out += d[:, None] * rho * d[None, :]
        out -= 0.5 * (d2[:, None] * rho + rho * d2[None, :])
    return out


def random_product_state(n_spins: int, rng: np.random.Generator) -> np.ndarray:
    """Pure product state of independently random single-spin states."""
    psi = np.ones(1, dtype=complex)
    for _ in range(n_spins):
        amp = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        amp /= np.linalg.norm(amp)
        psi = np.kron(psi, amp)
    return np.outer(psi, psi.conj())


# ---------------------------------------------------------------------------
# projection between representations

def project_to_gcs(rho: np.ndarray, basis: CoupledBasis) -> tuple[GcsState, float]:
    """Aggregate a full density matrix onto block storage.

    Returns the block state with entries sum_i <J,M,i|rho|J,M',i> and the
    Frobenius norm of the component of rho lying outside the
    degeneracy-uniform family (cross-multiplet terms, copy off-diagonals,
    and copy dependence).
    """
    layout = block_layout(basis.n_spins)
    rho_c = basis.transform.conj().T @ rho @ basis.transform
    state = zero_state(layout)
    # accumulate the residual from its components (no norm cancellation):
    # cross-multiplet rectangles plus the within-multiplet deviation from
    # the copy-uniform projection delta_ii' * agg / d
    off_block = rho_c.copy()
    residual_sq = 0.0
    for k, ir in enumerate(layout.irreps):
        off = basis.col_offsets[k]
        span = ir.degeneracy * ir.dim
        sub = rho_c[off:off + span, off:off + span]
        four = sub.reshape(ir.degeneracy, ir.dim, ir.degeneracy, ir.dim)
        agg = np.einsum("imin->mn", four)
        state.blocks[k][:, :] = agg
        diff = four.copy()
        uniform = agg / ir.degeneracy
        for i in range(ir.degeneracy):
            diff[i, :, i, :] -= uniform
        residual_sq += float((np.abs(diff) ** 2).sum())
        off_block[off:off + span, off:off + span] = 0.0
    residual_sq += float((np.abs(off_block) ** 2).sum())
    return state, sqrt(residual_sq)


def to_full(state: GcsState, basis: CoupledBasis) -> np.ndarray:
    """Embed an aggregated block state as a full product-basis matrix."""
    if state.layout.n_spins != basis.n_spins:
        raise ValueError("state and basis have different particle numbers")
    dim = 2**basis.n_spins
    rho_c = np.zeros((dim, dim), dtype=complex)
    for k, ir in enumerate(state.layout.irreps):
        off = basis.col_offsets[k]
        span = ir.degeneracy * ir.dim
        rho_c[off:off + span, off:off + span] = np.kron(
            np.eye(ir.degeneracy), state.blocks[k] / ir.degeneracy
        )
    return basis.transform @ rho_c @ basis.transform.conj().T


# ---------------------------------------------------------------------------
# full-space trajectory engine (mirror of the block integrator)

class _FullEngine:
    def __init__(self, n_spins: int):
        if n_spins > MAX_ORACLE_SPINS:
            raise CapacityError(f"full engine supports N <= {MAX_ORACLE_SPINS}")
        self.n_spins = n_spins
        self.basis = coupled_basis(n_spins)
        self.z = _site_z_diags(n_spins).sum(axis=0)
        self.jx = full_collective_operator(n_spins, "x")
        self.jy = full_collective_operator(n_spins, "y")
        self.jy2 = self.jy @ self.jy

    def step(self, rho: np.ndarray, model: ModelKind, kappa: float,
             sqrt_keff: float, dt: float, dw: float) -> tuple[np.ndarray, float, float]:
        z = self.z
        ez = float((z * rho.diagonal().real).sum())
        drift = full_lindblad(model, rho)
        meas = z[:, None] * rho + rho * z[None, :] - 2.0 * ez * rho
        new = rho + (kappa * dt) * drift + (sqrt_keff * dw) * meas
        new = 0.5 * (new + new.conj().T)
        tr = float(new.diagonal().real.sum())
        drift_diag = tr - 1.0
        if abs(drift_diag) > MAX_TRACE_DRIFT:
            raise StepSizeError(
                f"one-step trace drift {drift_diag:.3e} exceeds {MAX_TRACE_DRIFT}; reduce dt"
            )
        new /= tr
        return new, 2.0 * sqrt_keff * ez * dt + dw, drift_diag

    def record(self, rho: np.ndarray, t: float, kappa: float, dy: float,
               want_block_jy: bool) -> tuple[ObservableRecord, float]:
        z = self.z
        diag = rho.diagonal().real
        ez = float((z * diag).sum())
        ez2 = float((z * z * diag).sum())
        ex = float(np.vdot(self.jx, rho).real)
        ey = float(np.vdot(self.jy, rho).real)
        ey2 = float(np.vdot(self.jy2, rho).real)
        var_jz = ez2 - ez * ez
        var_jy = ey2 - ey * ey
        denom = ex * ex + ey * ey
        xi2 = None if denom <= XI2_DENOM_CUTOFF else self.n_spins * var_jz / denom
        blocks, residual = project_to_gcs(rho, self.basis)
        traces = tuple(float(np.trace(b).real) for b in blocks.blocks)
        block_jy = None
        if want_block_jy:
            from .gcs import per_block_jy_variance

            block_jy = tuple(per_block_jy_variance(blocks))
        rec = ObservableRecord(
            t=t, kappa_t=kappa * t, dY=dy,
            mean_jx=ex, mean_jy=ey, mean_jz=ez,
            var_jz=var_jz, var_jy=var_jy, xi_squared=xi2,
            purity=float((np.abs(rho) ** 2).sum()),
            block_traces=traces, block_jy_vars=block_jy,
        )
        return rec, residual


def run_trajectory_full(config: TrajectoryConfig) -> TrajectoryResult:
    """Full-space mirror of :func:`spinfilter.dynamics.run_trajectory`.

    Identical seed and config (apart from the engine flag) reproduce the
    same Wiener increments as the block engine, so the two integrators can
    be compared record by record.
    """
    eng = _FullEngine(config.n_spins)
    rho = to_full(resolve_initial(config), eng.basis)
    skeff = _sqrt_keff(config.model, config.kappa, config.n_spins)
    kappa, dt = config.kappa, config.dt
    sqdt = sqrt(dt)
    n_steps = config.n_steps
    rec_steps = _record_steps(n_steps, config.record_every)
    rng = np.random.Generator(np.random.Philox(key=config.seed & _MASK64))

    rec, _ = eng.record(rho, 0.0, kappa, 0.0, config.record_block_jy_variance)
    records = [rec]
    stopped = False
    dy_acc = 0.0
    next_rec = 1
    k = 0
    noise = np.empty(0)
    noise_pos = 0
    while k < n_steps:
        if noise_pos >= noise.size:
            noise = rng.standard_normal(min(8192, n_steps - k)) * sqdt
            noise_pos = 0
        rho, dy, _ = eng.step(rho, config.model, kappa, skeff, dt, noise[noise_pos])
        noise_pos += 1
        dy_acc += dy
        k += 1
        if k == rec_steps[next_rec]:
            rec, _ = eng.record(rho, k * dt, kappa, dy_acc, config.record_block_jy_variance)
            records.append(rec)
            dy_acc = 0.0
            next_rec += 1
            if config.stop_var_jz is not None and rec.var_jz < config.stop_var_jz:
                stopped = True
                break

    if stopped and config.pad_to_horizon:
        frozen = records[-1]
        for step in rec_steps[next_rec:]:
            records.append(replace(frozen, t=step * dt, kappa_t=kappa * step * dt, dY=0.0))

    final_state, _ = project_to_gcs(rho, eng.basis)
    return TrajectoryResult(records, final_state, stopped, k, config)


# ---------------------------------------------------------------------------
# equivalence gates

@dataclass
class GateReport:
    """Outcome of one block-vs-full comparison."""

    name: str
    n_spins: int
    model: str
    deviations: dict[str, float]
    threshold: float
    passed: bool

    def lines(self) -> list[str]:
        status = "PASS" if self.passed else "FAIL"
        worst = max(self.deviations.values()) if self.deviations else 0.0
        out = [
            f"gate {self.name} n={self.n_spins} model={self.model} "
            f"max_dev={worst:.3e} threshold={self.threshold:.1e} {status}"
        ]
        out.extend(
            f"  {key}: {val:.3e}" for key, val in sorted(self.deviations.items())
        )
        return out


def generator_gate(n_spins: int, model: ModelKind, n_states: int = 50,
                   seed: int = 2024, tol: float = GENERATOR_GATE_TOL) -> GateReport:
    """Compare the block generator with the literal per-site dissipator.

    Draws random degeneracy-uniform states, applies the full dissipator to
    their embeddings, projects back, and takes the max element deviation
    from the block generator output.  Also tracks the uniformity residual
    of the full output (the block family must be dynamically closed).
    """
    from .gcs import random_state
    from .dynamics import lindblad_collective, lindblad_symmetric

    model = ModelKind(model)
    basis = coupled_basis(n_spins)
    layout = block_layout(n_spins)
    coeffs = _cached_coefficients(n_spins) if model is ModelKind.SYMMETRIC else None
    rng = np.random.Generator(np.random.Philox(key=seed & _MASK64))
    max_dev = 0.0
    max_resid = 0.0
    for _ in range(n_states):
        state = random_state(layout, rng)
        full_out = full_lindblad(model, to_full(state, basis))
        projected, resid = project_to_gcs(full_out, basis)
        if model is ModelKind.SYMMETRIC:
            block_out = lindblad_symmetric(state, coeffs)
        else:
            block_out = lindblad_collective(state)
        dev = max(
            float(np.abs(a - b).max())
            for a, b in zip(projected.blocks, block_out.blocks)
        )
        max_dev = max(max_dev, dev)
        max_resid = max(max_resid, resid)
    passed = max_dev < tol and max_resid < tol
    return GateReport(
        name="generator",
        n_spins=n_spins,
        model=model.value,
        deviations={"generator_max_element": max_dev, "uniformity_residual": max_resid},
        threshold=tol,
        passed=passed,
    )


def equivalence_check(n_spins: int, model: ModelKind, steps: int = 1000,
                      seed: int = 2024, kappa: float = 1.0,
                      dt: Optional[float] = None,
                      initial: str = "coherent_x",
                      tol: float = LOCKSTEP_GATE_TOL) -> GateReport:
    """Run block and full engines in lockstep with a common noise stream.

    Reports the maximum over time of the deviation in every observable and
    in the projected blocks.
    """
    model = ModelKind(model)
    if n_spins > MAX_LOCKSTEP_SPINS:
        raise CapacityError(
            f"lockstep gate supports N <= {MAX_LOCKSTEP_SPINS}, got {n_spins}"
        )
    if dt is None:
        dt = 1e-3 / kappa
    beng = _cached_engine(n_spins)
    coeffs = _cached_coefficients(n_spins) if model is ModelKind.SYMMETRIC else None
    feng = _FullEngine(n_spins)
    cfg = TrajectoryConfig(
        n_spins=n_spins, kappa=kappa, dt=dt, t_final=steps * dt, seed=seed, model=model,
    )
    init = resolve_initial(cfg)
    rho_b = beng.flatten(init)
    rho_f = to_full(init, feng.basis)
    skeff = _sqrt_keff(model, kappa, n_spins)
    rng = np.random.Generator(np.random.Philox(key=seed & _MASK64))
    noise = rng.standard_normal(steps) * sqrt(dt)

    tracked = ("mean_jx", "mean_jy", "mean_jz", "var_jz", "var_jy", "purity", "dY")
    devs = {key: 0.0 for key in tracked}
    devs["block_traces"] = 0.0
    devs["projected_blocks"] = 0.0
    devs["uniformity_residual"] = 0.0
    for k in range(steps):
        dw = noise[k]
        rho_b, dy_b, _ = beng.step(rho_b, model, coeffs, kappa, skeff, dt, dw)
        rho_f, dy_f, _ = feng.step(rho_f, model, kappa, skeff, dt, dw)
        rb = beng.record(rho_b, (k + 1) * dt, kappa, dy_b, False)
        rf, resid = feng.record(rho_f, (k + 1) * dt, kappa, dy_f, False)
        for key in tracked:
            devs[key] = max(devs[key], abs(getattr(rb, key) - getattr(rf, key)))
        devs["block_traces"] = max(
            devs["block_traces"],
            max(abs(a - b) for a, b in zip(rb.block_traces, rf.block_traces)),
        )
        projected, _ = project_to_gcs(rho_f, feng.basis)
        block_state = beng.unflatten(rho_b)
        devs["projected_blocks"] = max(
            devs["projected_blocks"],
            max(
                float(np.abs(a - b).max())
                for a, b in zip(projected.blocks, block_state.blocks)
            ),
        )
        devs["uniformity_residual"] = max(devs["uniformity_residual"], resid)

    passed = all(v < tol for v in devs.values())
    return GateReport(
        name="lockstep",
        n_spins=n_spins,
        model=model.value,
        deviations=devs,
        threshold=tol,
        passed=passed,
    )


def validate_suite(max_spins: int = MAX_LOCKSTEP_SPINS, steps: int = 1000,
                   n_states: int = 50, seed: int = 2024) -> tuple[list[GateReport], bool]:
    """All oracle gates for N = 2..max_spins, both models."""
    reports = []
    for n in range(2, max_spins + 1):
        for model in (ModelKind.COLLECTIVE, ModelKind.SYMMETRIC):
            reports.append(generator_gate(n, model, n_states=n_states, seed=seed))
            reports.append(equivalence_check(n, model, steps=steps, seed=seed))
    return reports, all(r.passed for r in reports)
