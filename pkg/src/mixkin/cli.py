"""Command line front end: ``mixkin run <config> [--out DIR] [--quiet] [--check]``.

Exit status 0 on success; otherwise the ``exit_code`` of the error category
(2 configuration, 3 invalid state, 4 non-convergence, 5 constraint
violation, 6 step size / positivity / admissibility, 7 output).
The last lines on standard output start with ``AUDIT:``.
"""
from __future__ import annotations

import argparse
import os
import sys

from .config import RunConfig, parse_config
from .errors import ConfigurationError, MixkinError
from .output import SnapshotWriter, check_writable, write_table

__all__ = ["main", "run", "configure_threads"]


def configure_threads(value: str | None) -> int:
    """Apply MIXKIN_THREADS (0 or unset = numba's default)."""
    import numba

    if value is None or value.strip() == "":
        return numba.get_num_threads()
    try:
        n = int(value)
    except ValueError:
        raise ConfigurationError(f"MIXKIN_THREADS must be an integer, got {value!r}") from None
    if n < 0:
        raise ConfigurationError(f"MIXKIN_THREADS must be >= 0, got {n}")
    if n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()


def _say(quiet: bool, msg: str) -> None:
    if not quiet:
        print(msg, flush=True)


def _boundary_note(config: RunConfig) -> list[str]:
    if config.space.boundary == "copy" and config.space.cells > 1:
        return ["boundary=copy (open ends: drifts include boundary fluxes)"]
    return []


def _audit(lines) -> None:
    for line in lines:
        print(f"AUDIT: {line}", flush=True)


def _run_kinetic(config: RunConfig, out, quiet: bool) -> list[str]:
    from .scenarios import build_kinetic
    from .solver import integrate

    setup = build_kinetic(config)
    names = [s.name for s in config.species]
    writer = SnapshotWriter(out, names, config.output.fields, setup.state.grids,
                            config.output.include_distributions)
    homogeneous = config.scenario == "space_homogeneous"
    try:
        result = integrate(setup.state, setup.selector, setup.spec, setup.controls, transport=not homogeneous,
                           output_times=setup.output_times, with_distributions=setup.with_distributions,
                           entropy=setup.entropy, on_snapshot=writer, record_every_step=homogeneous)
    except BaseException:
        writer.abort()
        raise
    writer.close()
    if setup.entropy and result.h:
        write_table(out / "entropy.csv", ["time", "H", "max_production"],
                    [[float(t), float(h), float(p)] for t, h, p in zip(result.times, result.h, result.production)])
    _say(quiet, f"{config.scenario}: {result.audit.steps} steps to t = {result.state.time:.6g}")
    lines = result.audit.lines() + _boundary_note(config)
    if result.truncated:
        lines.append("truncated=true (wall-clock limit reached; output is partial)")
    if setup.controls.equilibrium_tolerance > 0:
        lines.append(f"converged={str(result.converged).lower()}")
    return lines


def _run_hydro(config: RunConfig, out, quiet: bool) -> list[str]:
    from .scenarios import run_hydro

    names = [s.name for s in config.species]
    writer = SnapshotWriter(out, names, config.output.fields)
    try:
        run = run_hydro(config, on_snapshot=writer)
    except BaseException:
        writer.abort()
        raise
    writer.close()
    _say(quiet, f"{config.scenario}: {run.audit.steps} steps to t = {run.snapshots[-1].time:.6g}")
    lines = run.audit.lines() + _boundary_note(config)
    if run.truncated:
        lines.append("truncated=true (wall-clock limit reached; output is partial)")
    return lines


def _run_study(config: RunConfig, out, quiet: bool) -> list[str]:
    from .scenarios import run_epsilon_study

    rows, _ = run_epsilon_study(config)
    keys = list(rows[0].distances)
    header = ["epsilon"] + [f"L1_{k}" for k in keys] + ["L1_max"]
    table = [[r.epsilon] + [r.distances[k] for k in keys] + [r.distance] for r in rows]
    write_table(out / "epsilon_study.csv", header, table)
    _say(quiet, f"L1 distance to {config.study.reference} vs epsilon")
    _say(quiet, "  ".join(f"{h:>12s}" for h in header))
    for row in table:
        _say(quiet, "  ".join(f"{v:12.4e}" for v in row))
    worst = lambda attr: max(getattr(r.audit, attr) for r in rows)
    return [
        f"species_mass_drift={worst('mass_drift'):.3e}",
        f"momentum_drift={worst('momentum_drift'):.3e}",
        f"energy_drift={worst('energy_drift'):.3e}",
        f"max_conservation_drift={max(worst('mass_drift'), worst('momentum_drift'), worst('energy_drift')):.3e}",
        "epsilon_study " + " ".join(f"eps={r.epsilon:.3g}:L1={r.distance:.3e}" for r in rows),
    ] + _boundary_note(config)


def run(config: RunConfig, out_dir=None, quiet: bool = False) -> list[str]:
    """Run ``config`` and return the audit lines (without the prefix)."""
    out = check_writable(out_dir if out_dir is not None else config.output.directory)
    if config.scenario in ("space_homogeneous", "transport_1d"):
        return _run_kinetic(config, out, quiet)
    if config.scenario in ("euler_st", "euler_mt", "kinetic_fluid"):
        return _run_hydro(config, out, quiet)
    return _run_study(config, out, quiet)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixkin", description="Hybrid Boltzmann/BGK gas-mixture simulator")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario from a configuration file")
    r.add_argument("config", help="configuration file (TOML)")
    r.add_argument("--out", help="output directory (overrides output.directory)")
    r.add_argument("--quiet", action="store_true", help="only print AUDIT lines")
    r.add_argument("--check", action="store_true", help="validate the configuration and exit")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    scenario = "?"
    try:
        configure_threads(os.environ.get("MIXKIN_THREADS"))
        config = parse_config(args.config)
        scenario = config.scenario
        if args.check:
            _say(args.quiet, f"{args.config}: valid {config.scenario} configuration "
                             f"({config.n_species} species, {config.space.cells} cells)")
            return 0
        lines = run(config, args.out, args.quiet)
    except MixkinError as exc:
        print(f"mixkin: error in scenario '{scenario}': {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    _audit(lines)
    return 0


if __name__ == "__main__":
    sys.exit(main())
