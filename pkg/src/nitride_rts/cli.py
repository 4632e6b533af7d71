"""Command line: ``solve``, ``scan`` and ``profile``.

Exit status is 0 on success, 1 for configuration errors, 2 for usage errors
and 3 when the self-consistent iteration did not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .observables import (
    InsufficientStatesError,
    TransitionTable,
    condition_intervals,
    design_criteria,
    detection_energy,
    geometry_scan,
    scan_csv,
)
from .polarization import stack_fields
from .potential import PotentialComponents
from .scf import SCFResult, run_scf

log = logging.getLogger("nitride_rts")

EXIT_OK, EXIT_CONFIG, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2, 3

#: margin into the claddings for the wave-function export, nm
EXPORT_MARGIN = 2.0


def _clean(value):
    """Make values JSON-safe and stable: floats rounded, inf/nan as strings."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.12g}")
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dump_json(data) -> str:
    return json.dumps(_clean(data), sort_keys=True, indent=2) + "\n"


def wavefunction_csv(result: SCFResult, step: float = 0.01) -> str:
    zN = result.stack.total_thickness
    n = int(round((zN + 2 * EXPORT_MARGIN) / step))
    z = np.round(-EXPORT_MARGIN + step * np.arange(n + 1), 10)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["z_nm"] + [f"psi_{i + 1}_nm^-0.5" for i in range(len(result.states))])
    cols = [z] + [s.psi(z) for s in result.states]
    for row in zip(*cols):
        writer.writerow([f"{v:.10g}" for v in row])
    return buf.getvalue()


def result_summary(result: SCFResult, cfg: RunConfig) -> dict:
    table = TransitionTable.from_states(result.states)
    try:
        omega13 = detection_energy(table) * 1e3
    except InsufficientStatesError:
        omega13 = None
    c325, c326 = design_criteria(table)
    ef = result.fermi_level
    return {
        "config": cfg.resolved(),
        "n_states": table.n_states,
        "energies_meV": [e * 1e3 for e in table.energies],
        "omega13_meV": omega13,
        "oscillator_strengths": table.f.tolist(),
        "f1n": table.f[0, 1:].tolist() if table.n_states > 1 else [],
        "cond_325": c325,
        "cond_326": c326,
        "fermi_level_meV": None if ef is None else ef * 1e3,
        "sheet_density_cm2": result.sheet_density * 1e14,
        "converged": result.converged,
        "iterations": result.iterations_used,
        "delta_history": list(result.delta_history),
        "localization": [s.localization.tolist() for s in result.states],
        "units": {"energy": "meV", "length": "nm", "density": "cm^-2"},
    }


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def cmd_solve(cfg: RunConfig) -> int:
    table = cfg.table()
    stack = cfg.stack(table)
    result = run_scf(stack, cfg.charge_model(), cfg.scf_config())
    out = Path(cfg.output_dir)
    summary = result_summary(result, cfg)
    _write(out / "results.json", dump_json(summary))
    _write(out / "potential.csv", result.potential.to_csv())
    _write(out / "wavefunctions.csv", wavefunction_csv(result))
    _write(out / "delta.csv", result.delta_csv())
    energies = ", ".join(f"{e:.2f}" for e in summary["energies_meV"])
    print(f"E_n (meV): {energies}")
    if summary["omega13_meV"] is not None:
        print(f"Omega_13 = {summary['omega13_meV']:.2f} meV")
    print(f"converged: {result.converged} after {result.iterations_used} iteration(s)")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_scan(cfg: RunConfig, d_min: float, d_max: float, d_step: float, jobs: int) -> int:
    table = cfg.table()
    rows = geometry_scan(d_min, d_max, d_step, cfg.scf_config(), cfg.charge_model(), table, jobs)
    out = Path(cfg.output_dir)
    _write(out / "scan.csv", scan_csv(rows))
    meta = {
        "config": cfg.resolved(),
        "d_min_nm": d_min,
        "d_max_nm": d_max,
        "d_step_nm": d_step,
        "both_conditions_nm": [list(iv) for iv in condition_intervals(rows, "both")],
        "cond_325_nm": [list(iv) for iv in condition_intervals(rows, "cond_325")],
        "failed_rows": [r.d for r in rows if r.error],
        "unconverged_rows": [r.d for r in rows if not r.converged],
    }
    _write(out / "scan.json", dump_json(meta))
    print(f"{len(rows)} rows; both conditions on {meta['both_conditions_nm']}")
    return EXIT_OK if not meta["unconverged_rows"] else EXIT_NOT_CONVERGED


def cmd_profile(cfg: RunConfig) -> int:
    table = cfg.table()
    stack = cfg.stack(table)
    scf = cfg.scf_config()
    fields = stack_fields(stack, scf.substrate, scf.polarization_overrides)
    comps = PotentialComponents.initial(
        stack, fields, cfg.temperature, scf.samples_per_layer, cfg.method, scf.field_mode
    )
    out = Path(cfg.output_dir)
    _write(out / "potential.csv", comps.to_csv())
    meta = {
        "config": cfg.resolved(),
        "fields_V_per_nm": fields.fields.tolist(),
        "polarizations_C_per_m2": fields.polarizations.tolist(),
        "sheet_charges_C_per_m2": fields.sheet_charges.tolist(),
        "boundaries_nm": stack.boundaries.tolist(),
        "cladding_potential_meV": comps.cladding_potential * 1e3,
    }
    _write(out / "profile.json", dump_json(meta))
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("config", nargs="?", help="YAML run configuration")
    p.add_argument("--method", choices=["full", "no_xc", "field_only"])
    p.add_argument("--temperature", type=float, help="K")
    p.add_argument("--d", type=float, help="input-well width of the reference cascade, nm")
    p.add_argument("--n-d", type=float, help="donor density, nm^-3")
    p.add_argument("--fermi-level", type=float, help="fixed Fermi level, eV")
    p.add_argument("--donor-level", type=float, help="fixed donor level, eV")
    p.add_argument("--mixing", type=float)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--partitions", type=int, help="sub-segments per layer")
    p.add_argument("--materials", help="materials YAML (overrides the environment variable)")
    p.add_argument("-o", "--output-dir")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nitride-rts", description="Schrodinger-Poisson solver for nitride cascades"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("solve", help="self-consistent solve of one structure"))
    scan = sub.add_parser("scan", help="scan the input-well width")
    _add_common(scan)
    scan.add_argument("--d-min", type=float, default=0.6)
    scan.add_argument("--d-max", type=float, default=1.8)
    scan.add_argument("--d-step", type=float, default=0.01)
    scan.add_argument("--jobs", type=int, default=1)
    _add_common(sub.add_parser("profile", help="potential components only, no eigen-solve"))
    return parser


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.override(
        method=args.method,
        temperature=args.temperature,
        d=args.d,
        materials=args.materials,
        output_dir=args.output_dir,
        **{
            "charge.n_d": args.n_d,
            "charge.fermi_level": args.fermi_level,
            "charge.donor_level": args.donor_level,
            "scf.mixing": args.mixing,
            "scf.tolerance": args.tolerance,
            "scf.max_iterations": args.max_iterations,
            "scf.n_partitions": args.partitions,
        },
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
    )
    if args.command == "scan":
        if args.d_step <= 0:
            parser.error("--d-step must be positive")
        if args.d_max < args.d_min:
            parser.error("empty scan range: --d-max is below --d-min")
        if args.jobs < 1:
            parser.error("--jobs must be at least 1")
    try:
        cfg = _resolve(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "scan":
            return cmd_scan(cfg, args.d_min, args.d_max, args.d_step, args.jobs)
        return cmd_profile(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
