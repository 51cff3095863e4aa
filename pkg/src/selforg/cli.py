"""Command-line entry point: ``selforg <command> [config.yaml] [options]``.

Commands: simulate, potential, spectrum, sweep, ensemble, zpm-table.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 non-convergence (only with ``--require-converged``).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np
import yaml

from . import output
from .analysis import (
    band_structure,
    classify_chain,
    default_k_grid,
    dimer_strength,
    edge_cell,
    effective_hamiltonian,
    periodic_reference,
    spectrum_ipr,
    zak_phase,
    zpm_table,
)
from .config import ConfigError, build_config, read_config_data
from .dynamics import NumericalError, OutcomeKind, integrate
from .ensemble import derive_seed, observe, run_ensemble, sweep
from .greens import SeparationError
from .model import GeometryKind, apply_disorder, ring_radius
from .potentials import local_minima, ring_curve, two_atom_curve
from .presets import PRESETS

COMMANDS = ("simulate", "potential", "spectrum", "sweep", "ensemble", "zpm-table")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_UNCONVERGED = 0, 2, 3, 4


class NotConverged(RuntimeError):
    pass


@dataclass
class Flags:
    out: str | None = None
    jobs: int = 1
    require_converged: bool = False
    from_summary: str | None = None


def _outdir(cfg, flags):
    return flags.out or cfg.output["directory"]


def _wants(cfg, fmt):
    return fmt in cfg.output["formats"]


def cmd_simulate(cfg, flags, manifest):
    scenario = cfg.scenario()
    seed = derive_seed(cfg.ensemble["base_seed"], 0)
    config = apply_disorder(scenario.configuration(), float(cfg.ensemble["disorder_amplitude"]), seed)
    traj = integrate(config, scenario.system_params(), scenario.mode, scenario.stop)
    obs, label = observe(scenario, config, traj)
    final = traj.final
    summary = {
        "outcome": traj.outcome.kind.value,
        "time": traj.outcome.time,
        "pair": traj.outcome.pair,
        "steps": traj.steps,
        "seed": seed,
        "geometry": config.geometry.value,
        "dipole": [[c.real, c.imag] for c in config.dipole],
        "spacing": config.spacing,
        "trap_centers": config.trap_centers,
        "final_positions": final.positions,
        "final_momenta": final.momenta,
        "displacement": float(np.max(np.linalg.norm(final.positions - config.trap_centers, axis=1))),
        "max_population": traj.max_population,
        "label": label,
        **{k: v for k, v in obs.items() if k != "max_population"},
    }
    if config.geometry is GeometryKind.RING:
        summary["R_final"] = obs["R_final/R0"] * ring_radius(config.n, config.spacing)
    if _wants(cfg, "csv"):
        header, rows = output.trajectory_rows(traj)
        output.write_csv(manifest.file("trajectory.csv"), header, rows)
    output.write_json(manifest.file("summary.json"), summary)
    if flags.require_converged and traj.outcome.kind is not OutcomeKind.CONVERGED:
        raise NotConverged(f"run ended with outcome {traj.outcome.kind.value}")
    return summary


def cmd_potential(cfg, flags, manifest):
    params = cfg.system_params()
    pot = cfg.potential
    grid = None
    if pot["grid_min"] is not None or pot["grid_max"] is not None:
        if pot["grid_min"] is None or pot["grid_max"] is None:
            raise ConfigError("give both grid_min and grid_max", "potential.grid_min")
        lo, hi = float(pot["grid_min"]), float(pot["grid_max"])
        grid = np.linspace(lo, hi, int((hi - lo) * int(pot["points_per_lambda"])) + 1)
    if cfg.kind is GeometryKind.RING:
        curves = [(None, ring_curve(cfg.n, params, cfg.a0, grid, int(pot["points_per_lambda"])))]
    elif cfg.n == 2:
        thetas = pot["thetas"] if pot["thetas"] is not None else [None]
        curves = [(t, two_atom_curve(params, cfg.a0, grid, t, int(pot["points_per_lambda"]))) for t in thetas]
    else:
        raise ConfigError("potential needs a two-atom chain or a ring", "geometry.n")
    rows, minima = [], []
    for theta, curve in curves:
        interior = local_minima(curve)
        minima.append({"theta": theta, "minima": interior, "boundary_minima": curve.boundary_minima})
        for x, v in zip(curve.coordinate, curve.value):
            rows.append([x, v] if theta is None else [theta, x, v])
    header = ["coordinate", "V"] if curves[0][0] is None else ["theta", "coordinate", "V"]
    output.write_csv(manifest.file("curve.csv"), header, rows)
    result = {"coordinate": "R" if cfg.kind is GeometryKind.RING else "a", "units": "hbar k0 Gamma0 lambda0",
              "curves": minima}
    output.write_json(manifest.file("minima.json"), result)
    return result


def _spectrum_positions(cfg, flags, manifest):
    if flags.from_summary:
        with open(flags.from_summary) as fh:
            summary = json.load(fh)
        dipole = np.array([complex(*c) for c in summary["dipole"]])
        return np.asarray(summary["final_positions"], dtype=float), dipole, summary
    summary = cmd_simulate(cfg, Flags(require_converged=True), manifest)
    return np.asarray(summary["final_positions"], dtype=float), cfg.dipole(), summary


def cmd_spectrum(cfg, flags, manifest):
    positions, d, summary = _spectrum_positions(cfg, flags, manifest)
    x = np.sort(positions[:, 0])
    report = spectrum_ipr(effective_hamiltonian(x, d))
    cls = classify_chain(x, d)
    a1, a2 = edge_cell(x)
    spec = cfg.spectrum
    cutoff = int(spec["cutoff_cells"])
    k = default_k_grid(a1, a2, int(spec["k_points"]))
    bands = band_structure(a1, a2, d, k, cutoff_cells=cutoff)
    dh = effective_hamiltonian(x, d) - effective_hamiltonian(periodic_reference(x), d)
    pair = report.midgap_pair or ()
    rows = [
        [i, w.real, w.imag, p, report.edge_weight(i), int(i in pair)]
        for i, (w, p) in enumerate(zip(report.eigenvalues, report.ipr))
    ]
    output.write_csv(manifest.file("eigen.csv"), ["index", "re", "im", "ipr", "edge_weight", "midgap"], rows)
    output.write_csv(
        manifest.file("bands.csv"),
        ["k", "re_lower", "im_lower", "re_upper", "im_upper", "converged"],
        [[kk, b[0].real, b[0].imag, b[1].real, b[1].imag, int(c)]
         for kk, b, c in zip(bands.k, bands.bands, bands.converged)],
    )
    result = {
        "a1": a1,
        "a2": a2,
        "classification": cls.kind.value,
        "alternating_gap_std": float(max(np.std(cls.gaps[0::2]), np.std(cls.gaps[1::2]))),
        "dimer_strength": dimer_strength(x, d),
        "gap": bands.gap,
        "gap_k": bands.gap_k,
        "zak_phase": zak_phase(a1, a2, d, k, cutoff_cells=cutoff),
        "zak_phase_right": zak_phase(a1, a2, d, k, cutoff_cells=cutoff, biorthogonal=False),
        "midgap_pair": list(pair),
        "median_ipr": float(np.median(report.ipr)),
        "max_delta_h": float(np.max(np.abs(dh))),
        "source_outcome": summary.get("outcome"),
    }
    output.write_json(manifest.file("zak.json"), result)
    return result


def _outcome_text(counts):
    return ";".join(f"{k}={counts[k]}" for k in sorted(counts))


def _sweep_rows(axis, value, result, extra):
    rows = []
    counts = _outcome_text(result.outcome_counts)
    flagged = int(result.converged == 0)
    for name, st in result.stats.items():
        rows.append([axis, value, name, st.mean, st.std, st.n, counts, flagged])
    for label, count in sorted(result.label_counts.items()):
        rows.append([axis, value, f"fraction:{label}", count / result.n_realizations, 0.0,
                     result.n_realizations, counts, flagged])
    for name, v in extra.items():
        if isinstance(v, str):
            continue
        rows.append([axis, value, name, v, 0.0, 1, extra.get("radial_outcome", ""), flagged])
    return rows


def _realization_rows(axis, value, result):
    rows = []
    for r in result.realizations:
        for i, (x, y) in enumerate(r.final_positions):
            rows.append([axis, value, r.index, r.seed, r.outcome.value, r.label or "", i, x, y])
    return rows


SWEEP_HEADER = ["axis", "value", "observable", "mean", "std", "n", "outcomes", "flagged"]
REALIZATION_HEADER = ["axis", "value", "realization", "seed", "outcome", "label", "atom", "x", "y"]


def _ensemble_settings(cfg):
    e = cfg.ensemble
    return int(e["n_realizations"]), float(e["disorder_amplitude"]), int(e["base_seed"])


def cmd_sweep(cfg, flags, manifest):
    axis = cfg.sweep["axis"]
    values = cfg.sweep_values()
    n, amp, seed = _ensemble_settings(cfg)
    scenario = cfg.scenario()
    try:
        scenario.with_value(axis, values[0])
    except ValueError as exc:
        raise ConfigError(str(exc), "sweep.axis") from exc
    res = sweep(scenario, axis, values, n, amp, seed, flags.jobs)
    rows, real = [], []
    for v, point, extra in zip(res.values, res.points, res.extras):
        rows += _sweep_rows(axis, v, point, extra)
        real += _realization_rows(axis, v, point)
    output.write_csv(manifest.file("sweep.csv"), SWEEP_HEADER, rows)
    output.write_csv(manifest.file("realizations.csv"), REALIZATION_HEADER, real)
    flagged = [float(v) for v, f in zip(res.values, res.flagged) if f]
    if flags.require_converged and flagged:
        raise NotConverged(f"no converged realization at {axis} = {flagged}")
    return {"axis": axis, "points": len(values), "flagged": flagged}


def cmd_ensemble(cfg, flags, manifest):
    n, amp, seed = _ensemble_settings(cfg)
    res = run_ensemble(cfg.scenario(), n, amp, seed, flags.jobs)
    rows = _sweep_rows("a0", cfg.a0, res, {})
    output.write_csv(manifest.file("ensemble.csv"), SWEEP_HEADER, rows)
    output.write_csv(manifest.file("realizations.csv"), REALIZATION_HEADER, _realization_rows("a0", cfg.a0, res))
    if flags.require_converged and res.converged < res.n_realizations:
        raise NotConverged(f"{res.n_realizations - res.converged} realizations did not converge")
    return {"outcomes": res.outcome_counts}


def cmd_zpm(cfg, flags, manifest):
    rows = zpm_table()
    header = ["species", "a=1.5", "a=1", "a=0.5"]
    output.write_csv(manifest.file("zpm.csv"), header, [[r["name"], *(r[h] for h in header[1:])] for r in rows])
    return {"rows": len(rows)}


HANDLERS = {
    "simulate": cmd_simulate,
    "potential": cmd_potential,
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "ensemble": cmd_ensemble,
    "zpm-table": cmd_zpm,
}


def execute(command, cfg, flags=None):
    """Run ``command`` and write its artifacts; returns ``(exit_code, result)``.

    Failures leave ``error.json`` and a manifest with status ``failed``.
    """
    flags = flags or Flags()
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    outdir = flags.out or (cfg.output["directory"] if cfg is not None else "out")
    manifest = output.Manifest(outdir, command, None if cfg is None else cfg.as_dict())
    failure = None
    try:
        result = HANDLERS[command](cfg, flags, manifest)
    except ConfigError as exc:
        failure = EXIT_CONFIG, "config", exc
    except (NumericalError, SeparationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        failure = EXIT_NUMERICAL, "numerical", exc
    except NotConverged as exc:
        failure = EXIT_UNCONVERGED, "not_converged", exc
    if failure is None:
        manifest.finish("complete")
        return EXIT_OK, result
    code, kind, exc = failure
    error = {"error": kind, "message": str(exc), "key": getattr(exc, "key", None), "exit_code": code}
    output.write_json(manifest.file("error.json"), error)
    manifest.finish("failed", error=error)
    return code, error


def _parse_set(items):
    layers = []
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"--set key must be section.name, got {key!r}", key)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse value for {key!r}", key) from exc
        layers.append({parts[0]: {parts[1]: value}})
    return layers


def build_parser():
    p = argparse.ArgumentParser(prog="selforg", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("config", nargs="?", help="YAML scenario file")
    p.add_argument("--figure", choices=sorted(PRESETS), help="start from a figure preset")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config value")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for ensembles")
    p.add_argument("--require-converged", action="store_true", help="exit 4 if any run fails to converge")
    p.add_argument("--from-summary", help="spectrum: analyse final positions from a summary.json")
    return p


def _fail(code, kind, message, key=None):
    print(json.dumps({"error": kind, "message": message, "key": key, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    flags = Flags(args.out, max(1, args.jobs), args.require_converged, args.from_summary)
    try:
        layers = []
        if args.figure:
            preset_command, preset = PRESETS[args.figure]
            if preset_command != args.command:
                raise ConfigError(f"preset {args.figure} belongs to the {preset_command!r} command")
            layers.append(preset)
        if args.config:
            layers.append(read_config_data(args.config))
        layers += _parse_set(args.set)
        if args.command == "zpm-table":
            cfg = None
        elif args.command == "spectrum" and args.from_summary:
            with open(args.from_summary) as fh:
                n = len(json.load(fh)["final_positions"])
            cfg = build_config({"geometry": {"n": n}}, *layers)
        else:
            cfg = build_config({}, *layers)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.key)
    except FileNotFoundError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    code, result = execute(args.command, cfg, flags)
    if code == EXIT_OK:
        print(json.dumps(output._jsonable(result)))
    else:
        print(json.dumps(output._jsonable(result)), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
