"""Command line interface."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import click

from . import config as config_mod
from . import engine, lp as lp_mod, mtr_space, selection, targets
from .moments import MomentError, MomentTable, moments_from_microdata

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return format(float(v), ".17g")


def _load(config_path: str, moments_path: str):
    cfg = config_mod.RunConfig.from_json(Path(config_path).read_text())
    table = MomentTable.from_json(Path(moments_path).read_text())
    errs = config_mod.validate(cfg, table)
    if errs:
        for e in errs:
            click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    return cfg, table


def emit_results(result: engine.SweepResult, outdir: Path, config_text: str,
                 problem: engine.Problem) -> None:
    """Write results.json (full records) and points.csv (flat table); output
    bytes depend only on the result and config."""
    outdir.mkdir(parents=True, exist_ok=True)
    counts = {}
    for r in result.records:
        counts[r.status] = counts.get(r.status, 0) + 1
    doc = {
        "schema_version": 1,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "tolerances": {"eps_feas": _fmt(problem.eps_feas),
                       "merge_tol": _fmt(problem.merge_tol)},
        "identified_set": ([[_fmt(a), _fmt(b)] for a, b in result.intervals]
                           if result.intervals else "empty"),
        "all_rejected": result.all_rejected,
        "status_counts": {k: counts[k] for k in sorted(counts)},
        "points": [
            {"index": r.index, "lambda": r.lam, "status": r.status,
             "lb": _fmt(r.lb), "ub": _fmt(r.ub),
             "diagnostics": {k: (_fmt(v) if isinstance(v, float) else v)
                             for k, v in sorted(r.diagnostics.items())}}
            for r in result.records
        ],
    }
    (outdir / "results.json").write_text(
        json.dumps(doc, indent=1, sort_keys=True) + "\n")
    lines = ["index,family,rho,anchor,status,lb,ub"]
    for r in result.records:
        lam = r.lam
        rho = _fmt(lam["rho"]) if "rho" in lam else ""
        anchor = _fmt(lam["anchor"]) if "anchor" in lam else ""
        lines.append(f'{r.index},{lam["family"]},{rho},{anchor},'
                     f'{r.status},{_fmt(r.lb)},{_fmt(r.ub)}')
    (outdir / "points.csv").write_text("\n".join(lines) + "\n")


@click.group()
@click.option("--workers", default=1, show_default=True, help="Parallel grid points.")
@click.option("--seed", default=0, show_default=True,
              help="Seed for sampling helpers (no effect on bounds).")
@click.option("--log-level", default="warning", show_default=True,
              type=click.Choice(["debug", "info", "warning", "error"]))
@click.pass_context
def main(ctx, workers, seed, log_level):
    """Bounds on treatment-effect parameters in multiple-treatment models
    with discrete instruments."""
    logging.basicConfig(level=getattr(logging, log_level.upper()))
    ctx.ensure_object(dict)
    ctx.obj["workers"] = workers
    ctx.obj["seed"] = seed


@main.command()
@click.argument("microdata", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
def moments(microdata, output):
    """Compute a moment table from microdata CSV (columns y, d, z[, z2], x)."""
    try:
        table = moments_from_microdata(microdata)
    except MomentError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    Path(output).write_text(table.to_json())
    click.echo(f"wrote {output}")


@main.command()
@click.option("-c", "--config", "config_path", required=True,
              type=click.Path(exists=True))
@click.option("-m", "--moments", "moments_path", required=True,
              type=click.Path(exists=True))
def validate(config_path, moments_path):
    """Check a config and moment table for consistency."""
    try:
        cfg = config_mod.RunConfig.from_json(Path(config_path).read_text())
        table = MomentTable.from_json(Path(moments_path).read_text())
    except (MomentError, config_mod.ConfigError, json.JSONDecodeError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    errs = config_mod.validate(cfg, table)
    if errs:
        for e in errs:
            click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    click.echo("ok")


@main.command()
@click.option("-c", "--config", "config_path", required=True,
              type=click.Path(exists=True))
@click.option("-m", "--moments", "moments_path", required=True,
              type=click.Path(exists=True))
@click.option("--lambda", "lam_index", default=0, show_default=True,
              help="Index into the dependence-parameter grid.")
def identify(config_path, moments_path, lam_index):
    """Print the identified thresholds (or the rejection) at one grid point."""
    cfg, table = _load(config_path, moments_path)
    model = cfg.build_model(table)
    grid = cfg.build_grid()
    if not 0 <= lam_index < len(grid.points):
        click.echo(f"error: grid has {len(grid.points)} points", err=True)
        sys.exit(EXIT_VALIDATION)
    lam = grid.points[lam_index]
    dist = engine.make_distribution(lam, model.dim)
    try:
        thr = selection.identify_thresholds(model, dist, table.P,
                                            eps_feas=cfg.tolerances.get("eps_feas", 1e-8),
                                            anchor=lam.anchor)
    except selection.IdentificationFailure as e:
        click.echo(f"numerical failure: {e}", err=True)
        sys.exit(EXIT_NUMERICAL)
    click.echo(json.dumps({"lambda": lam.describe()}, sort_keys=True))
    if isinstance(thr, selection.Rejected):
        click.echo(f"rejected: max residual {_fmt(thr.max_residual)} "
                   f"at {thr.offending} ({thr.detail})")
        return
    for (j, z, x) in sorted(thr.g, key=str):
        click.echo(f"g[j={j}, z={z}, x={x}] = {_fmt(thr.g[(j, z, x)])}")


@main.command()
@click.option("-c", "--config", "config_path", required=True,
              type=click.Path(exists=True))
@click.option("-m", "--moments", "moments_path", required=True,
              type=click.Path(exists=True))
@click.option("-o", "--outdir", required=True, type=click.Path())
@click.pass_context
def bounds(ctx, config_path, moments_path, outdir):
    """Run the full sweep and write the identified set."""
    cfg, table = _load(config_path, moments_path)
    problem = cfg.build_problem(table)
    grid = cfg.build_grid()
    result = engine.run_sweep(problem, grid, workers=ctx.obj["workers"])
    emit_results(result, Path(outdir), Path(config_path).read_text(), problem)
    if result.intervals:
        parts = ", ".join(f"[{_fmt(a)}, {_fmt(b)}]" for a, b in result.intervals)
        click.echo(f"identified set: {parts}")
    else:
        click.echo("identified set: empty"
                   + (" (model rejected at every grid point)"
                      if result.all_rejected else ""))
    if any(r.status == engine.ST_FAILURE for r in result.records):
        sys.exit(EXIT_NUMERICAL)


@main.command("export-lp")
@click.option("-c", "--config", "config_path", required=True,
              type=click.Path(exists=True))
@click.option("-m", "--moments", "moments_path", required=True,
              type=click.Path(exists=True))
@click.option("--lambda", "lam_index", default=0, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path())
def export_lp(config_path, moments_path, lam_index, output):
    """Write the minimization program at one grid point as an LP text file."""
    cfg, table = _load(config_path, moments_path)
    problem = cfg.build_problem(table)
    grid = cfg.build_grid()
    if not 0 <= lam_index < len(grid.points):
        click.echo(f"error: grid has {len(grid.points)} points", err=True)
        sys.exit(EXIT_VALIDATION)
    lam = grid.points[lam_index]
    model = problem.model
    dist = engine.make_distribution(lam, model.dim)
    thr = selection.identify_thresholds(model, dist, problem.P,
                                        eps_feas=problem.eps_feas, anchor=lam.anchor)
    if isinstance(thr, selection.Rejected):
        click.echo(f"rejected at this point (residual {_fmt(thr.max_residual)})",
                   err=True)
        sys.exit(EXIT_VALIDATION)
    try:
        terms = targets.compile_target(problem.target, model, thr, dist,
                                       problem.p_x, problem.p_xz)
    except targets.TargetUndefined as e:
        click.echo(f"target undefined at this point: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    regions = {}
    for x in model.covariates:
        for z in model.instruments:
            for d, r in selection.regions(model, thr, z, x).items():
                regions[(d, z, x)] = r
    generators = list(regions.values()) + [s for (_, _, _, _, s) in terms.terms]
    from .geometry import build_partition
    if problem.basis_kind == mtr_space.PIECEWISE:
        basis = mtr_space.Basis(mtr_space.PIECEWISE,
                                partition=build_partition(generators, model.dim))
    else:
        basis = mtr_space.Basis(mtr_space.BERNSTEIN,
                                degrees=problem.degrees or (3,) * model.dim,
                                grid_res=problem.grid_res)
    sysm = mtr_space.make_system(basis, model.treatments, model.covariates,
                                 problem.restrictions)
    mtr_space.compile_data_constraints(sysm, basis, dist, regions, problem.E)
    mtr_space.compile_shape_constraints(sysm, basis, dist, problem.restrictions,
                                        model.treatments, model.covariates)
    c = mtr_space.objective_terms(sysm, basis, dist, terms.terms)
    prog = mtr_space.to_linear_program(sysm, c, problem.restrictions)
    Path(output).write_text(lp_mod.export_lp_text(prog, "min"))
    click.echo(f"wrote {output}")


if __name__ == "__main__":
    main()
