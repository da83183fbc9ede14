"""Command-line front end: trajectory runs, ensembles, figure presets, gates.

Subcommands
-----------
run       one trajectory -> time-series CSV (or JSON lines) plus a manifest
ensemble  Monte Carlo ensemble -> mean/stderr series, final-M histogram
figure    presets fig2 / fig3 / fig4 reproducing the reference experiments
validate  oracle gate suite; nonzero exit on any failed gate

Configuration is a flat ``key value`` text file (one pair per line, ``#``
comments); command-line flags mirror the TrajectoryConfig field names and
override file values.  Every run writes a manifest alongside its outputs
holding the fully resolved configuration; re-running with ``--config
<manifest>`` reproduces the outputs byte for byte.

Exit codes: 0 ok, 1 usage error, 2 numerical gate failure, 3 I/O error.
CSV output uses '.' decimals, no locale, '\\n' newlines; undefined values
(e.g. the squeezing parameter at collapsed states) are written as the
token ``undefined``, never as NaN.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .dynamics import (
    EngineKind,
    EnsembleSummary,
    ModelKind,
    StepSizeError,
    TrajectoryConfig,
    binomial_final_m_probabilities,
    ensemble_run,
    run_trajectory,
)
from .gcs import ObservableRecord, save_snapshot
from .oracle import validate_suite
from .spinrep import block_layout

UNDEFINED = "undefined"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_GATE = 2
EXIT_IO = 3


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 1."""


# ---------------------------------------------------------------------------
# flat config files

CONFIG_KEYS = {
    "n_spins": int,
    "kappa": float,
    "dt": float,
    "t_final": float,
    "seed": int,
    "model": str,
    "engine": str,
    "initial": str,
    "record_every": int,
    "stop_var_jz": float,
    "record_block_jy_variance": bool,
}

# manifest-only keys are recognized (and ignored) when a manifest is reused
# as a config file
MANIFEST_KEYS = {
    "format_version", "code_version", "subcommand", "output_format",
    "gate_status", "columns", "outputs", "n_traj",
}

DEFAULTS = {
    "engine": "block",
    "initial": "coherent_x",
    "record_every": 1,
    "stop_var_jz": None,
    "record_block_jy_variance": False,
}


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


def load_config_file(path: str) -> dict:
    """Parse a flat key-value config (or manifest) file."""
    values: dict = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise UsageError(f"{path}:{lineno}: expected 'key value', got {raw!r}")
        key, text = parts
        if key in MANIFEST_KEYS:
            continue
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        kind = CONFIG_KEYS[key]
        try:
            if kind is bool:
                values[key] = _parse_bool(text)
            elif key == "stop_var_jz" and text.lower() == "none":
                values[key] = None
            else:
                values[key] = kind(text)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def build_trajectory_config(values: dict) -> TrajectoryConfig:
    missing = [k for k in ("n_spins", "kappa", "dt", "t_final", "model") if values.get(k) is None]
    if missing:
        raise UsageError(f"missing required settings: {', '.join(missing)}")
    if values.get("seed") is None:
        # no seed given: draw one from OS entropy and record it
        values["seed"] = int.from_bytes(os.urandom(8), "little") >> 1
    merged = dict(DEFAULTS)
    merged.update({k: v for k, v in values.items() if v is not None or k == "stop_var_jz"})
    try:
        return TrajectoryConfig(
            n_spins=merged["n_spins"],
            kappa=merged["kappa"],
            dt=merged["dt"],
            t_final=merged["t_final"],
            seed=merged["seed"],
            model=ModelKind(merged["model"]),
            engine=EngineKind(merged["engine"]),
            initial=merged["initial"],
            record_every=merged["record_every"],
            stop_var_jz=merged.get("stop_var_jz"),
            record_block_jy_variance=merged["record_block_jy_variance"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output writers

def _fmt(value) -> str:
    if value is None:
        return UNDEFINED
    return repr(float(value))


def _j_label(j2: int) -> str:
    return str(j2 // 2) if j2 % 2 == 0 else f"{j2 / 2:.1f}"


def csv_columns(n_spins: int) -> list[str]:
    cols = ["t", "kappa_t", "dY", "mean_jx", "mean_jy", "mean_jz",
            "var_jz", "var_jy", "xi2", "purity"]
    cols += [f"trace_J{_j_label(ir.j2)}" for ir in block_layout(n_spins).irreps]
    return cols


def _record_row(rec: ObservableRecord) -> list:
    return [rec.t, rec.kappa_t, rec.dY, rec.mean_jx, rec.mean_jy, rec.mean_jz,
            rec.var_jz, rec.var_jy, rec.xi_squared, rec.purity, *rec.block_traces]


def write_records_csv(path: Path, n_spins: int, records: Sequence[ObservableRecord]) -> None:
    cols = csv_columns(n_spins)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for rec in records:
            fh.write(",".join(_fmt(v) for v in _record_row(rec)) + "\n")


def write_records_jsonl(path: Path, n_spins: int, records: Sequence[ObservableRecord]) -> None:
    cols = csv_columns(n_spins)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            row = {k: v for k, v in zip(cols, _record_row(rec))}
            row["xi2"] = None if rec.xi_squared is None else rec.xi_squared
            fh.write(json.dumps(row) + "\n")


def write_block_jy_csv(path: Path, n_spins: int, records: Sequence[ObservableRecord]) -> None:
    labels = [f"varjy_J{_j_label(ir.j2)}" for ir in block_layout(n_spins).irreps]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["t", "kappa_t", *labels]) + "\n")
        for rec in records:
            vals = rec.block_jy_vars or (None,) * len(labels)
            fh.write(",".join(_fmt(v) for v in (rec.t, rec.kappa_t, *vals)) + "\n")


def write_manifest(path: Path, config: TrajectoryConfig, subcommand: str,
                   output_format: str, outputs: list[str],
                   gate_status: str = "not_run", extra: Optional[dict] = None) -> None:
    lines = [
        "# spinfilter run manifest; reusable as --config",
        "format_version 1",
        f"code_version {__version__}",
        f"subcommand {subcommand}",
        f"output_format {output_format}",
        f"gate_status {gate_status}",
        f"outputs {','.join(outputs)}",
        f"columns {','.join(csv_columns(config.n_spins))}",
        f"n_spins {config.n_spins}",
        f"kappa {config.kappa!r}",
        f"dt {config.dt!r}",
        f"t_final {config.t_final!r}",
        f"seed {config.seed}",
        f"model {config.model.value}",
        f"engine {config.engine.value}",
        f"initial {config.initial}",
        f"record_every {config.record_every}",
        f"stop_var_jz {'none' if config.stop_var_jz is None else repr(config.stop_var_jz)}",
        f"record_block_jy_variance {config.record_block_jy_variance}",
    ]
    if extra:
        lines += [f"{k} {v}" for k, v in extra.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(config: TrajectoryConfig, outdir: Path, output_format: str,
            tag: str = "run", snapshot: bool = False) -> list[str]:
    result = run_trajectory(config)
    outputs = []
    name = f"{tag}_{config.model.value}.{ 'jsonl' if output_format == 'json-lines' else 'csv'}"
    path = outdir / name
    if output_format == "json-lines":
        write_records_jsonl(path, config.n_spins, result.records)
    else:
        write_records_csv(path, config.n_spins, result.records)
    outputs.append(name)
    if config.record_block_jy_variance:
        jy_name = f"{tag}_{config.model.value}_block_jy.csv"
        write_block_jy_csv(outdir / jy_name, config.n_spins, result.records)
        outputs.append(jy_name)
    if snapshot:
        snap_name = f"{tag}_{config.model.value}_final_state.txt"
        save_snapshot(result.final_state, outdir / snap_name)
        outputs.append(snap_name)
    write_manifest(outdir / f"{tag}_{config.model.value}_manifest.txt", config,
                   "run", output_format, outputs)
    return outputs


def write_ensemble_csv(path: Path, summary: EnsembleSummary) -> None:
    names = sorted(summary.means)
    cols = ["t", "kappa_t"]
    for n in names:
        cols += [f"mean_{n}", f"stderr_{n}"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(summary.t)):
            row = [summary.t[i], summary.kappa_t[i]]
            for n in names:
                row += [summary.means[n][i], summary.stderrs[n][i]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_histogram_csv(path: Path, summary: EnsembleSummary, n_spins: int) -> None:
    hist = summary.final_m_histogram()
    probs = binomial_final_m_probabilities(n_spins)
    # off-parity labels appear when trajectories have not collapsed yet;
    # list them too so counts always total n_traj
    keys = sorted(set(probs) | set(hist), reverse=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("M,count,expected_binomial\n")
        for m2 in keys:
            fh.write(
                f"{_fmt(m2 / 2.0)},{hist.get(m2, 0)},"
                f"{_fmt(summary.n_traj * probs.get(m2, 0.0))}\n"
            )


def cmd_ensemble(config: TrajectoryConfig, n_traj: int, outdir: Path,
                 n_workers: int = 1) -> list[str]:
    summary = ensemble_run(config, n_traj, n_workers=n_workers)
    outputs = [f"ensemble_{config.model.value}.csv",
               f"ensemble_{config.model.value}_final_m.csv"]
    write_ensemble_csv(outdir / outputs[0], summary)
    write_histogram_csv(outdir / outputs[1], summary, config.n_spins)
    write_manifest(outdir / f"ensemble_{config.model.value}_manifest.txt", config,
                   "ensemble", "csv", outputs, extra={"n_traj": n_traj})
    print(f"ensemble: {n_traj} trajectories, martingale max "
          f"{summary.martingale_max_sigma:.2f} sigma")
    return outputs


# figure presets (parameters of the reference experiments)

FIG2 = dict(n_spins=60, kappa=6.0, kappa_t_final=10.0)
FIG3 = dict(n_spins=10, kappa=10.0, kappa_t_final=10.0)
FIG4 = dict(n_spins=4, kappa=25.0, kappa_t_final=250.0)

# explicit Euler-Maruyama needs sqrt(kappa_eff * dt) * N small; see README
FIG2_COLLECTIVE_KAPPA_DT = 1e-4
FIG2_SYMMETRIC_KAPPA_DT = 1e-3


def cmd_figure(name: str, outdir: Path, seed: int) -> list[str]:
    outputs: list[str] = []
    if name == "fig2":
        for model, kdt in ((ModelKind.COLLECTIVE, FIG2_COLLECTIVE_KAPPA_DT),
                           (ModelKind.SYMMETRIC, FIG2_SYMMETRIC_KAPPA_DT)):
            kappa = FIG2["kappa"]
            cfg = TrajectoryConfig(
                n_spins=FIG2["n_spins"], kappa=kappa, dt=kdt / kappa,
                t_final=FIG2["kappa_t_final"] / kappa, seed=seed, model=model,
                record_every=max(1, int(round(0.01 / kdt))),
            )
            outputs += cmd_run(cfg, outdir, "csv", tag="fig2")
    elif name == "fig3":
        kappa = FIG3["kappa"]
        cfg = TrajectoryConfig(
            n_spins=FIG3["n_spins"], kappa=kappa, dt=1e-3 / kappa,
            t_final=FIG3["kappa_t_final"] / kappa, seed=seed,
            model=ModelKind.SYMMETRIC, record_every=10,
            record_block_jy_variance=True,
        )
        outputs += cmd_run(cfg, outdir, "csv", tag="fig3")
    elif name == "fig4":
        outputs += _figure4(outdir, seed)
    else:
        raise UsageError(f"unknown figure {name!r}; expected fig2, fig3 or fig4")
    return outputs


def _figure4(outdir: Path, seed: int, max_seeds: int = 64) -> list[str]:
    """One steady-state trajectory per outcome class |M| = 2, 1, 0."""
    kappa = FIG4["kappa"]
    wanted = {4, 2, 0}
    outputs: list[str] = []
    rows = []
    for i in range(max_seeds):
        cfg = TrajectoryConfig(
            n_spins=FIG4["n_spins"], kappa=kappa, dt=1e-3 / kappa,
            t_final=FIG4["kappa_t_final"] / kappa, seed=seed ^ i,
            model=ModelKind.SYMMETRIC, record_every=25, stop_var_jz=1e-6,
        )
        result = run_trajectory(cfg)
        m2 = abs(result.final_m2)
        rows.append((i, cfg.seed, result.final_m2, result.records[-1].purity,
                     result.records[-1].block_traces))
        if m2 in wanted:
            wanted.discard(m2)
            name = f"fig4_M{_j_label(m2)}.csv"
            write_records_csv(outdir / name, cfg.n_spins, result.records)
            write_manifest(outdir / f"fig4_M{_j_label(m2)}_manifest.txt", cfg,
                           "figure", "csv", [name])
            outputs.append(name)
        if not wanted:
            break
    summary = outdir / "fig4_summary.csv"
    with open(summary, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("trajectory,seed,final_M,terminal_purity,"
                 + ",".join(f"trace_J{_j_label(ir.j2)}"
                            for ir in block_layout(FIG4["n_spins"]).irreps) + "\n")
        for i, sd, m2, pur, traces in rows:
            fh.write(",".join([str(i), str(sd), _fmt(m2 / 2.0), _fmt(pur),
                               *(_fmt(x) for x in traces)]) + "\n")
    outputs.append("fig4_summary.csv")
    if wanted:
        print(f"warning: outcome classes |2M| in {sorted(wanted)} not observed "
              f"within {max_seeds} seeds", file=sys.stderr)
    return outputs


def cmd_validate(max_spins: int, steps: int, n_states: int, seed: int) -> int:
    reports, passed = validate_suite(max_spins=max_spins, steps=steps,
                                     n_states=n_states, seed=seed)
    for rep in reports:
        print(rep.lines()[0])
    print("validate:", "PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_GATE


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key-value config file (or a manifest)")
    p.add_argument("--n_spins", type=int, help="number of spin-1/2 particles")
    p.add_argument("--kappa", type=float, help="measurement strength (1/time)")
    p.add_argument("--dt", type=float, help="integrator step (time)")
    p.add_argument("--t_final", type=float, help="horizon (time)")
    p.add_argument("--seed", type=int, help="64-bit seed (default: OS entropy, recorded)")
    p.add_argument("--model", choices=["collective", "symmetric"],
                   help="measurement model")
    p.add_argument("--engine", choices=["block", "full_oracle"],
                   help="state engine (default block)")
    p.add_argument("--initial",
                   help="coherent_x | steady_state:<M> | snapshot:<path> (default coherent_x)")
    p.add_argument("--record_every", type=int, help="steps between records (default 1)")
    p.add_argument("--stop_var_jz", type=float,
                   help="stop at the first record with Var[Jz] below this")
    p.add_argument("--record_block_jy_variance", action="store_true", default=None,
                   help="also record per-multiplet Jy variances")
    p.add_argument("--output_dir", default=".", help="directory for outputs (default .)")


def build_parser() -> _Parser:
    parser = _Parser(prog="spinfilter", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_run = sub.add_parser("run", help="integrate one trajectory")
    _add_config_flags(p_run)
    p_run.add_argument("--format", choices=["csv", "json-lines"], default="csv",
                       help="output format (default csv)")
    p_run.add_argument("--snapshot", action="store_true",
                       help="also write the final state as a snapshot file")

    p_ens = sub.add_parser("ensemble", help="Monte Carlo trajectory ensemble")
    _add_config_flags(p_ens)
    p_ens.add_argument("--n_traj", type=int, required=True, help="number of trajectories")
    p_ens.add_argument("--n_workers", type=int, default=1, help="parallel workers (default 1)")

    p_fig = sub.add_parser("figure", help="run a reference-experiment preset")
    p_fig.add_argument("name", choices=["fig2", "fig3", "fig4"])
    p_fig.add_argument("--seed", type=int, help="base seed (default: OS entropy)")
    p_fig.add_argument("--output_dir", default=".", help="directory for outputs")

    p_val = sub.add_parser("validate", help="run the oracle gate suite")
    p_val.add_argument("--max_spins", type=int, default=6, help="largest N gated (default 6)")
    p_val.add_argument("--steps", type=int, default=1000,
                       help="lockstep trajectory length (default 1000)")
    p_val.add_argument("--n_states", type=int, default=50,
                       help="random states per generator gate (default 50)")
    p_val.add_argument("--seed", type=int, default=2024, help="gate seed (default 2024)")
    return parser


def _gather_config(args: argparse.Namespace) -> TrajectoryConfig:
    values: dict = {}
    if args.config:
        values.update(load_config_file(args.config))
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return build_trajectory_config(values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.subcommand == "validate":
            return cmd_validate(args.max_spins, args.steps, args.n_states, args.seed)
        if args.subcommand == "figure":
            outdir = Path(args.output_dir)
            outdir.mkdir(parents=True, exist_ok=True)
            seed = args.seed
            if seed is None:
                seed = int.from_bytes(os.urandom(8), "little") >> 1
                print(f"seed {seed} (drawn from OS entropy)")
            outputs = cmd_figure(args.name, outdir, seed)
            print("wrote:", ", ".join(outputs))
            return EXIT_OK
        config = _gather_config(args)
        outdir = Path(args.output_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.subcommand == "run":
            outputs = cmd_run(config, outdir, args.format, snapshot=args.snapshot)
        else:
            if args.n_traj < 1:
                raise UsageError("--n_traj must be >= 1")
            outputs = cmd_ensemble(config, args.n_traj, outdir, n_workers=args.n_workers)
        print("wrote:", ", ".join(outputs))
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StepSizeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_GATE
    except OSError as exc:
        target = getattr(exc, "filename", None)
        print(f"i/o error{f' ({target})' if target else ''}: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
