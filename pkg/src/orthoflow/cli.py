"""Command-line front end: run scenarios, print parameter tables, check snapshots.

Subcommands:

    orthoflow run --config PATH [--out DIR] [--snapshot-every K] [--threads N]
    orthoflow tables
    orthoflow check SNAPSHOT

Configs are flat key = value text (# comments); see the README for the
schema.  Exit codes: run 0 converged / 2 hit max_iters / 1 bad config;
tables 0 all entries match / 3 mismatches; check 0 valid / 1 malformed.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .cpm_surface import BandSpec, SurfaceDiffuser, band_width, build_band, spectral_grid
from .errors import ConfigurationError, SnapshotFormatError, UnderResolvedError
from .field import (GridSpec, interface_cells, plus_region_stats, plus_volume,
                    read_snapshot, winding_pair, write_snapshot)
from .mbo import MboConfig, lyapunov_energy, mbo_run
from .scenarios import SCENARIO_NAMES, ScenarioSpec, build_initial, builtin_surface
from .torus_heat import TorusDiffuser

__all__ = ["main", "cmd_run", "cmd_tables", "cmd_check",
           "REFERENCE_BAND_WIDTHS", "REFERENCE_MODE_COUNTS",
           "TABLE_TAUS", "TABLE_EPSS"]

TABLE_TAUS = (1e-1, 1e-2, 1e-3, 1e-4)
TABLE_EPSS = (1e-3, 1e-6, 1e-9, 1e-12)

# reference values: band widths to 4 significant digits, mode counts exact
REFERENCE_BAND_WIDTHS = (
    (1.796, 0.5683, 0.1796, 0.05683),
    (2.474, 0.7823, 0.2474, 0.07823),
    (2.993, 0.9465, 0.2993, 0.09465),
    (3.432, 1.085, 0.3432, 0.1085),
)
REFERENCE_MODE_COUNTS = (
    (8, 21, 55, 136),
    (11, 34, 100, 296),
    (14, 43, 130, 396),
    (17, 50, 154, 475),
)


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def parse_config(path) -> dict:
    """Flat key = value file with # comments and dotted section keys."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key or not value:
                raise ConfigurationError(f"{path}:{lineno}: empty key or value")
            out[key] = value
    return out


def _get(cfg, key, cast, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigurationError(f"missing config key {key!r}")
        return default
    try:
        return cast(cfg[key])
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key!r}: {cfg[key]!r}") from exc


def _build_run(cfg: dict):
    """Construct (initial field, MboConfig, summary dict) from a parsed config."""
    name = _get(cfg, "scenario.name", str, required=True)
    if name not in SCENARIO_NAMES:
        raise ConfigurationError(
            f"unknown scenario {name!r}; known: {', '.join(SCENARIO_NAMES)}")
    max_iters = _get(cfg, "run.max_iters", int, 10_000)
    stop_tol = _get(cfg, "run.stop_tol", float, 1e-8)
    snapshot_every = _get(cfg, "output.snapshot_every", int, 10)

    if name.startswith("torus"):
        size = _get(cfg, "grid.size", int, 256)
        grid = GridSpec((size, size))
        tau = _get(cfg, "run.tau", float, 8.0 * grid.dx)
        spec = ScenarioSpec(
            name, grid=grid,
            disk_radius=_get(cfg, "scenario.disk_radius", float, 0.3),
            winding_index=_get(cfg, "scenario.winding_index", int, 1))
        backend = TorusDiffuser(grid, tau)
    else:
        surf_name = _get(cfg, "surface.name", str,
                         "sphere" if name.startswith("sphere") else "peanut")
        surface = builtin_surface(surf_name)
        tau = _get(cfg, "run.tau", float, 0.01)
        dx = _get(cfg, "surface.dx", float, 0.05)
        p = _get(cfg, "surface.p", int, 3)
        eps = _get(cfg, "surface.eps", float, 1e-6)
        w_b = _get(cfg, "surface.w_b", float, band_width(tau, eps))
        band = build_band(surface, BandSpec(dx=dx, w_b=w_b, p=p, eps=eps))
        spec = ScenarioSpec(name, band=band)
        backend = SurfaceDiffuser(band, tau, eps)

    initial = build_initial(spec)
    volume_target = None
    raw_v = cfg.get("run.volume_target")
    if raw_v is not None:
        volume_target = (plus_volume(initial) if raw_v.strip() == "initial"
                         else _get(cfg, "run.volume_target", float))
    mbo_cfg = MboConfig(backend=backend, max_iters=max_iters, stop_tol=stop_tol,
                        volume_target=volume_target, snapshot_every=snapshot_every)
    return initial, mbo_cfg


def cmd_run(config_path, out_dir=None, snapshot_every=None) -> int:
    try:
        cfg = parse_config(config_path)
        if out_dir is not None:
            cfg["output.dir"] = str(out_dir)
        if snapshot_every is not None:
            cfg["output.snapshot_every"] = str(snapshot_every)
        initial, mbo_cfg = _build_run(cfg)
        out = Path(cfg.get("output.dir", "."))
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    result = mbo_run(initial, mbo_cfg)
    result.log.write_csv(out / "energy_log.csv")
    for iteration, snap in result.snapshots:
        write_snapshot(snap, out / f"snapshot_{iteration:06d}.mbof")
    write_snapshot(result.final, out / "final.mbof")

    final_energy = lyapunov_energy(result.final, mbo_cfg.backend)
    final_pv = plus_volume(result.final)
    dev = result.final.max_deviation_from_mean()
    status = "converged" if result.converged else "max_iters"
    print(f"{status} iterations={result.iterations} "
          f"final_energy={final_energy:.6e} final_plus_volume={final_pv:.6f} "
          f"max_dev_from_mean={dev:.3e} "
          f"max_frobenius={result.max_frobenius:.12f} "
          f"max_abs_det={result.max_abs_det:.12f} "
          f"singular_points={result.singular_total}")
    return 0 if result.converged else 2


# ---------------------------------------------------------------------------
# Parameter tables
# ---------------------------------------------------------------------------

def _fourth_digit_unit(value: float) -> float:
    """One unit in the fourth significant digit of value."""
    return 10.0 ** (np.floor(np.log10(abs(value))) - 3)


def cmd_tables(out=None) -> int:
    out = out or sys.stdout
    mismatches = []

    print("Band widths w_b (rows eps, cols tau):", file=out)
    header = "  eps \\ tau " + "".join(f"{t:>12.0e}" for t in TABLE_TAUS)
    print(header, file=out)
    for i, eps in enumerate(TABLE_EPSS):
        row = []
        for j, tau in enumerate(TABLE_TAUS):
            got = band_width(tau, eps)
            want = REFERENCE_BAND_WIDTHS[i][j]
            if abs(got - want) > _fourth_digit_unit(want):
                mismatches.append(
                    f"band_width(tau={tau:g}, eps={eps:g}) = {got:.6g}, want {want:g}")
            row.append(got)
        print(f"  {eps:>9.0e} " + "".join(f"{v:>12.4g}" for v in row), file=out)

    print("Fourier mode counts M (rows eps, cols tau, R = pi):", file=out)
    print(header, file=out)
    for i, eps in enumerate(TABLE_EPSS):
        row = []
        for j, tau in enumerate(TABLE_TAUS):
            got = spectral_grid(tau, eps, np.pi).m_half
            want = REFERENCE_MODE_COUNTS[i][j]
            if got != want:
                mismatches.append(
                    f"mode_count(tau={tau:g}, eps={eps:g}) = {got}, want {want}")
            row.append(got)
        print(f"  {eps:>9.0e} " + "".join(f"{v:>12d}" for v in row), file=out)

    if mismatches:
        print("mismatched entries:", file=out)
        for m in mismatches:
            print(f"  {m}", file=out)
        return 3
    print("all 32 entries match the reference values", file=out)
    return 0


# ---------------------------------------------------------------------------
# Snapshot check
# ---------------------------------------------------------------------------

def cmd_check(snapshot_path, out=None) -> int:
    out = out or sys.stdout
    try:
        f = read_snapshot(snapshot_path)
        f.require_orthogonal()
    except (SnapshotFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    kind = "grid" if f.is_grid else "cloud"
    print(f"flavor={kind} n={f.n} points={f.npoints}", file=out)
    print(f"plus_volume={plus_volume(f):.6f} of total {f.total_measure:.6f}",
          file=out)
    if f.is_grid and f.grid.d == 2:
        cells = interface_cells(f)
        print(f"interface_cells={len(cells)}", file=out)
        stats = plus_region_stats(f)
        ratio = "undefined" if stats.isoperimetric_ratio is None \
            else f"{stats.isoperimetric_ratio:.4f}"
        print(f"area={stats.area:.6f} perimeter={stats.perimeter_estimate:.6f} "
              f"isoperimetric_ratio={ratio}", file=out)
        if f.n == 2:
            try:
                ix, iy = winding_pair(f)
                print(f"winding=({ix},{iy})", file=out)
            except UnderResolvedError as exc:
                print(f"winding=under-resolved ({exc})", file=out)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="orthoflow",
        description="MBO-type diffusion-generated motion for orthogonal "
                    "matrix-valued fields")
    parser.add_argument(
        "--threads", type=int,
        default=int(os.environ.get("MBO_THREADS", "1")),
        help="worker hint, accepted for interface compatibility; results "
             "are deterministic and identical for any value")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario from a config file")
    p_run.add_argument("--config", required=True, help="path to key=value config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--snapshot-every", type=int, default=None,
                       help="snapshot cadence override")

    sub.add_parser("tables", help="print and verify the parameter tables")

    p_check = sub.add_parser("check", help="validate a snapshot file")
    p_check.add_argument("snapshot", help="path to an .mbof snapshot")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.snapshot_every)
    if args.command == "tables":
        return cmd_tables()
    if args.command == "check":
        return cmd_check(args.snapshot)
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
