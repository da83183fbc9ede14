#!/usr/bin/env python3
"""Mixed steady states of the multi-mode measurement at N=4, kappa=25.

Scans seeds until one trajectory per outcome class |M| = 2, 1, 0 is found,
then plots purity vs time. Each curve converges to 1/alpha_4^M, i.e.
{1, 1/4, 1/6}: only the stretched outcome M = +-2 ends pure.
"""

from dataclasses import replace
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from spinfilter import ModelKind, TrajectoryConfig, alpha, run_trajectory

N, KAPPA, BASE_SEED = 4, 25.0, 404
OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

base = TrajectoryConfig(
    n_spins=N, kappa=KAPPA, dt=1e-3 / KAPPA, t_final=10.0, seed=BASE_SEED,
    model=ModelKind.SYMMETRIC, record_every=25, stop_var_jz=1e-6,
)

found = {}
for i in range(64):
    res = run_trajectory(replace(base, seed=BASE_SEED ^ i))
    cls = abs(res.final_m2) // 2
    if cls not in found:
        found[cls] = res
        print(f"seed {BASE_SEED ^ i}: |M| = {cls}, terminal purity "
              f"{res.records[-1].purity:.4f} (target {1 / alpha(N, 2 * cls):.4f})")
    if len(found) == 3:
        break

fig, ax = plt.subplots(figsize=(6, 4))
for cls in sorted(found, reverse=True):
    res = found[cls]
    kt = [r.kappa_t for r in res.records]
    ax.plot(kt, [r.purity for r in res.records], label=f"|M| = {cls}")
    ax.axhline(1 / alpha(N, 2 * cls), color="k", ls=":", lw=0.8)
ax.set_xlabel(r"$\kappa t$")
ax.set_ylabel(r"purity tr $\rho^2$")
ax.set_ylim(0, 1.05)
ax.legend()
ax.set_title(f"N={N}, kappa={KAPPA:g}: steady-state purities 1, 1/4, 1/6")
fig.tight_layout()
fig.savefig(OUT / "steady_state_purity.png", dpi=150)
print(f"wrote {OUT / 'steady_state_purity.png'}")
