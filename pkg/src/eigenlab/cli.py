"""Command-line interface.

Commands: eval, norms, sweep, nodal, scar, report. Global flags
--threads / --seed / --out / --grid-cap apply before the subcommand;
EIGENLAB_THREADS is the --threads fallback. Exit codes: 0 success,
2 usage or config error, 3 failed check or non-convergence, 4 resource
cap exceeded. stderr carries diagnostics; `eval` prints only the value
on stdout.
"""

from __future__ import annotations

import dataclasses
import math
import os
import re
import sys

import click
import numpy as np

from . import __version__
from .config import load_config, config_hash
from .eigenfunctions import (
    HIGHEST_WEIGHT,
    RANDOM_HARMONIC,
    TORUS_RANDOM,
    ZONAL,
    highest_weight,
    random_harmonic,
    torus_eigenfunction,
    zonal,
)
from .errors import (
    CheckFailure,
    ConvergenceError,
    EigenlabError,
    ResourceLimitError,
    UsageError,
)
from .geometry import SPHERE
from .nodal import nodal_length
from .norms import kn_norm, lp_norm, sup_ball_mass, sup_restriction_norm
from .plots import loglog_svg
from .reports import (
    atomic_write,
    check_record,
    fit_record,
    manifest,
    read_csv,
    write_csv,
    write_json,
)
from .scaling import (
    check_inequality,
    fit_exponent,
    reference_exponent,
    run_sweep,
    scar_witness,
    _fmt_param,
)

_FAMILY_ALIASES = {
    "zonal": ZONAL,
    "highest-weight": HIGHEST_WEIGHT,
    "highest_weight": HIGHEST_WEIGHT,
    "random": RANDOM_HARMONIC,
    "random-harmonic": RANDOM_HARMONIC,
    "random_harmonic": RANDOM_HARMONIC,
    "torus": TORUS_RANDOM,
}


def _resolve_family(name: str) -> str:
    key = name.strip().lower()
    if key not in _FAMILY_ALIASES:
        raise UsageError(f"unknown family {name!r}; choose from "
                         + ", ".join(sorted(set(_FAMILY_ALIASES))))
    return _FAMILY_ALIASES[key]


def _build(family: str, k: int | None, n_value: int | None, seed: int):
    fam = _resolve_family(family)
    if fam == TORUS_RANDOM:
        if n_value is None:
            raise UsageError("torus family needs --N (the eigenvalue)")
        return torus_eigenfunction(n_value, seed=seed)
    if k is None:
        raise UsageError(f"family {family!r} needs --k (the degree)")
    if fam == ZONAL:
        return zonal(k)
    if fam == HIGHEST_WEIGHT:
        return highest_weight(k)
    return random_harmonic(k, seed=seed)


def _parse_point(text: str, manifold: str) -> np.ndarray:
    try:
        coords = [float(part) for part in text.split(",")]
    except ValueError:
        raise UsageError(f"bad --point {text!r}; expected comma-separated numbers")
    if manifold == SPHERE:
        if len(coords) != 3:
            raise UsageError("sphere points need 3 coordinates x,y,z")
        v = np.asarray(coords)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise UsageError("sphere point must be nonzero")
        return v / norm
    if len(coords) != 2:
        raise UsageError("torus points need 2 coordinates u,v")
    return np.asarray(coords)


def _parse_p_list(text: str) -> list[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if part.lower() in ("inf", "infinity"):
            out.append(math.inf)
        else:
            try:
                out.append(float(part))
            except ValueError:
                raise UsageError(f"bad p value {part!r}")
    if not out:
        raise UsageError("empty p list")
    return out


@click.group()
@click.version_option(version=__version__, prog_name="eigenlab")
@click.option("--threads", type=int, default=None,
              help="Worker threads for sweeps (default: EIGENLAB_THREADS or 1).")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for the random families.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Default output directory for sweep/report.")
@click.option("--grid-cap", type=int, default=None,
              help="Hard cap on quadrature grid nodes.")
@click.pass_context
def cli(ctx, threads, seed, out_dir, grid_cap):
    """Desk-scale laboratory for eigenfunction concentration."""
    ctx.obj = {"threads": threads, "seed": seed, "out": out_dir,
               "grid_cap": grid_cap}


@cli.command("eval")
@click.option("--family", required=True, help="zonal | highest-weight | random | torus")
@click.option("--k", type=int, default=None, help="Spherical-harmonic degree.")
@click.option("--N", "n_value", type=int, default=None, help="Torus eigenvalue.")
@click.option("--point", required=True, help="x,y,z on the sphere; u,v on the torus.")
@click.pass_context
def cmd_eval(ctx, family, k, n_value, point):
    """Print the eigenfunction value at one point (12 significant digits)."""
    e = _build(family, k, n_value, ctx.obj["seed"])
    x = _parse_point(point, e.manifold)
    click.echo(f"{e.evaluate(x):.12g}")


@cli.command("norms")
@click.option("--family", required=True)
@click.option("--k", type=int, default=None)
@click.option("--N", "n_value", type=int, default=None)
@click.option("--p", "p_list", default="2", show_default=True,
              help="Comma-separated L^p exponents (inf allowed).")
@click.option("--kn", "want_kn", is_flag=True, help="Kakeya-Nikodym tube norm.")
@click.option("--restriction", is_flag=True, help="Sup of geodesic restriction norms.")
@click.option("--ball", type=float, default=None, help="Sup ball L2 norm at this radius.")
@click.option("--rtol", type=float, default=1e-3, show_default=True)
@click.pass_context
def cmd_norms(ctx, family, k, n_value, p_list, want_kn, restriction, ball, rtol):
    """Print the requested concentration norms, one per line."""
    e = _build(family, k, n_value, ctx.obj["seed"])
    for p in _parse_p_list(p_list):
        rep = lp_norm(e, p, rtol=rtol)
        click.echo(f"L{_fmt_param(p)} = {rep.value:.12g}")
    if want_kn:
        res = kn_norm(e)
        click.echo(f"kn = {res.value:.12g}")
    if restriction:
        res = sup_restriction_norm(e)
        click.echo(f"sup_restriction = {res.value:.12g}")
    if ball is not None:
        res = sup_ball_mass(e, ball)
        click.echo(f"ball[{ball:g}] = {math.sqrt(max(res.value, 0.0)):.12g}")


@cli.command("nodal")
@click.option("--family", required=True)
@click.option("--k", type=int, default=None)
@click.option("--N", "n_value", type=int, default=None)
@click.option("--rtol", type=float, default=0.01, show_default=True)
@click.pass_context
def cmd_nodal(ctx, family, k, n_value, rtol):
    """Measure the nodal-set length."""
    e = _build(family, k, n_value, ctx.obj["seed"])
    est = nodal_length(e, rtol=rtol)
    click.echo(f"nodal_length = {est.length:.12g}")
    click.echo(f"grid_h = {est.h:.6g}  crossings = {est.crossings}")


@cli.command("scar")
@click.option("--family", required=True)
@click.option("--k", type=int, default=None)
@click.option("--N", "n_value", type=int, default=None)
@click.option("--c0", type=float, required=True,
              help="Premise constant: L1 norm must be <= c0 * lam^{-1/4}.")
@click.option("--density-factor", type=float, default=1.0, show_default=True)
@click.pass_context
def cmd_scar(ctx, family, k, n_value, c0, density_factor):
    """Search for the tube + level-band witness of L1 concentration."""
    e = _build(family, k, n_value, ctx.obj["seed"])
    w = scar_witness(e, c0, density_factor=density_factor)
    if not w.premise_holds:
        click.echo(f"premise violated: L1 = {w.l1_norm:.6g} exceeds "
                   f"c0 * lam^(-1/4) = {w.meta['premise_bound']:.6g}")
        return 0
    g = w.tube.geodesic
    if g.manifold == SPHERE:
        where = (f"axis = ({g.axis[0]:.6g}, {g.axis[1]:.6g}, {g.axis[2]:.6g}), "
                 f"phase = {g.phase:.6g}, length = {g.length:.6g}")
    else:
        where = (f"base = ({g.base[0]:.6g}, {g.base[1]:.6g}), direction = "
                 f"({g.direction[0]:.6g}, {g.direction[1]:.6g}), length = {g.length:.6g}")
    click.echo("witness found" if w.verdict == "witness_found"
               else "witness not found")
    click.echo(f"tube: {where}, half_width = {w.tube.half_width:.6g}")
    click.echo(f"tube_mass c1 = {w.tube_mass:.6g}, c2 = {w.c2:.6g}, "
               f"c3 = {w.c3:.6g}")
    click.echo(f"band = [{w.band[0]:.6g}, {w.band[1]:.6g}], "
               f"band_volume = {w.band_volume:.6g}, delta = {w.delta:.6g}, "
               f"target = {w.meta['band_volume_target']:.6g}")
    return 0 if w.verdict == "witness_found" else 3


@cli.command("sweep")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=False), help="Sweep config file (text or JSON).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: global --out or 'out').")
@click.option("--threads", type=int, default=None)
@click.pass_context
def cmd_sweep(ctx, config_path, out_dir, threads):
    """Run configured sweeps; write sweep.csv, fits.json, manifest.json."""
    plans = load_config(config_path)
    digest = config_hash(plans)
    out = out_dir or ctx.obj["out"] or "out"
    threads = threads if threads is not None else ctx.obj["threads"]
    grid_cap = ctx.obj["grid_cap"]

    all_rows = []
    payload_sweeps = []
    failures = 0
    resource_hit = False
    for plan in plans:
        sweep_cfg = plan.sweep
        if grid_cap is not None:
            sweep_cfg = dataclasses.replace(sweep_cfg, node_cap=grid_cap)
        table = run_sweep(sweep_cfg, threads=threads)
        all_rows.extend(table.rows)
        for row in table.rows:
            if row.error is not None:
                click.echo(f"[{plan.name}] cell k={row.degree} "
                           f"{row.functional}:{row.parameter} failed: {row.error}",
                           err=True)
                if row.error.startswith("ResourceLimitError"):
                    resource_hit = True
        fits = []
        if plan.fit:
            seen = []
            for row in table.rows:
                cell = (row.functional, row.parameter)
                if cell not in seen:
                    seen.append(cell)
            for functional, parameter in seen:
                label = functional if parameter == "" else f"{functional}:{parameter}"
                try:
                    ref = reference_exponent(sweep_cfg.family, functional,
                                             parameter)
                    fit = fit_exponent(table.series(functional, parameter),
                                       reference=ref, functional=label)
                except UsageError as exc:
                    fits.append({"kind": "scaling_fit_error",
                                 "functional": label, "error": str(exc)})
                    failures += 1
                    click.echo(f"[{plan.name}] fit {label} failed: {exc}",
                               err=True)
                    continue
                fits.append(fit_record(fit))
                status = fit.verdict
                if fit.verdict == "inconsistent":
                    failures += 1
                click.echo(f"[{plan.name}] fit {label}: exponent "
                           f"{fit.exponent:+.4f} (reference "
                           f"{'none' if fit.reference is None else format(fit.reference, '+.4f')})"
                           f" -> {status}")
        checks = []
        for req in plan.checks:
            check = check_inequality(req.name, table, p=req.p)
            checks.append(check_record(check))
            if not check.holds:
                failures += 1
            click.echo(f"[{plan.name}] check {req.name}: constant "
                       f"{check.constant:.4g} -> "
                       f"{'holds' if check.holds else 'FAILS'}")
        payload_sweeps.append({"name": plan.name, "family": sweep_cfg.family,
                               "fits": fits, "checks": checks})

    csv_path = os.path.join(out, "sweep.csv")
    fits_path = os.path.join(out, "fits.json")
    manifest_path = os.path.join(out, "manifest.json")
    write_csv(csv_path, all_rows)
    write_json(fits_path, {"config_hash": digest, "sweeps": payload_sweeps})
    write_json(manifest_path,
               manifest(digest, "sweep", ["sweep.csv", "fits.json",
                                          "manifest.json"]))
    click.echo(f"wrote {csv_path}, {fits_path}, {manifest_path}")
    if resource_hit:
        return 4
    return 0 if failures == 0 else 3


_SAFE = re.compile(r"[^A-Za-z0-9._-]+")


@cli.command("report")
@click.option("--in", "in_path", required=True, type=click.Path(exists=False),
              help="A sweep.csv produced by the sweep command.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.pass_context
def cmd_report(ctx, in_path, out_dir):
    """Render one log-log SVG per functional series in a sweep CSV."""
    rows = read_csv(in_path)
    out = out_dir or ctx.obj["out"] or "plots"
    series = {}
    for row in rows:
        series.setdefault((row.family, row.functional, row.parameter),
                          []).append((row.lam, row.value))
    written = []
    for (family, functional, parameter), pts in sorted(series.items()):
        label = functional if parameter == "" else f"{functional}:{parameter}"
        title = f"{family} {label}"
        clean = [(l, v) for l, v in pts if v > 0 and math.isfinite(v)]
        slope = None
        if len(clean) >= 4:
            slope = fit_exponent(clean).exponent
        try:
            ref = reference_exponent(family, functional, parameter)
        except UsageError:
            ref = None
        svg = loglog_svg(pts, title, fitted_exponent=slope, reference=ref)
        stem = _SAFE.sub("-", f"{family}_{functional}"
                         + (f"_{parameter}" if parameter else ""))
        path = os.path.join(out, stem + ".svg")
        atomic_write(path, svg)
        written.append(path)
    click.echo(f"wrote {len(written)} plots to {out}")


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 130
    except click.ClickException as exc:
        exc.show()
        return 2 if isinstance(exc, click.UsageError) else exc.exit_code
    except ResourceLimitError as exc:
        click.echo(f"error: {exc}", err=True)
        return 4
    except (CheckFailure, ConvergenceError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except UsageError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except EigenlabError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
