"""Two-step pipeline: per dependence-parameter point, identify thresholds
and solve the min/max coefficient programs; sweep the grid and union the
resulting intervals into the identified set.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import lp as lp_mod
from . import mtr_space, selection, targets
from .distributions import (GaussianCopula2, GaussianMixtureCopula2,
                            Independence, MultinomialLatent, UDistribution)
from .geometry import build_partition, refine_breakpoints
from .selection import Rejected, SelectionModel
from .targets import TargetSpec, TargetUndefined

log = logging.getLogger("mtbounds")

MERGE_TOL = 1e-9

ST_BOUNDED = "bounded"
ST_REJECTED = "rejected"
ST_UNDEFINED = "target-undefined"
ST_INFEASIBLE = "infeasible-outcome-moments"
ST_FAILURE = "numerical-failure"


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class LambdaPoint:
    """One grid point: a copula family with parameters, plus (double hurdle
    only) an anchor value for the known first threshold."""

    family: str
    rho: float | None = None
    weights: tuple[float, ...] = ()
    rhos: tuple[float, ...] = ()
    anchor: float | None = None
    index: int = 0

    def describe(self) -> dict:
        out = {"family": self.family}
        if self.rho is not None:
            out["rho"] = self.rho
        if self.weights:
            out["weights"] = list(self.weights)
            out["rhos"] = list(self.rhos)
        if self.anchor is not None:
            out["anchor"] = self.anchor
        return out


@dataclass(frozen=True)
class LambdaGrid:
    points: tuple[LambdaPoint, ...]

    def __post_init__(self):
        if not self.points:
            raise EngineError("empty dependence-parameter grid")

    @classmethod
    def gaussian(cls, rhos, anchors=(None,)) -> "LambdaGrid":
        pts = []
        for a in anchors:
            for r in rhos:
                pts.append(LambdaPoint("gaussian", rho=float(r), anchor=a,
                                       index=len(pts)))
        return cls(tuple(pts))

    @classmethod
    def single(cls, point: LambdaPoint) -> "LambdaGrid":
        return cls((replace(point, index=0),))


def make_distribution(lam: LambdaPoint, dim: int) -> UDistribution:
    if lam.family == "independence":
        return Independence(dim)
    if lam.family == "gaussian":
        if dim != 2:
            raise EngineError("gaussian copula needs a two-dimensional model")
        return GaussianCopula2(lam.rho)
    if lam.family == "gaussian_mixture":
        if dim != 2:
            raise EngineError("gaussian mixture copula needs a two-dimensional model")
        return GaussianMixtureCopula2(lam.weights, lam.rhos)
    if lam.family == "multinomial_latent":
        if dim != 3:
            raise EngineError("latent-utility law needs a three-dimensional model")
        if lam.weights:
            return MultinomialLatent(lam.weights, lam.rhos)
        return MultinomialLatent.probit(lam.rho)
    raise EngineError(f"unknown family {lam.family!r}")


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything a single point solve needs besides the grid point."""

    model: SelectionModel
    target: TargetSpec
    restrictions: mtr_space.ShapeRestrictionSet
    P: dict   # (d, z, x) -> choice probability
    E: dict   # (d, z, x) -> E[Y 1{D=d} | Z=z, X=x]
    p_x: dict
    p_xz: dict
    basis_kind: str = mtr_space.PIECEWISE
    degrees: tuple[int, ...] | None = None
    grid_res: int = 11
    eps_feas: float = 1e-8
    merge_tol: float = MERGE_TOL


@dataclass(frozen=True)
class PointRecord:
    index: int
    lam: dict
    status: str
    lb: float = np.nan
    ub: float = np.nan
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SweepResult:
    records: tuple[PointRecord, ...]
    intervals: tuple[tuple[float, float], ...]
    all_rejected: bool


def union_intervals(intervals, merge_tol: float = MERGE_TOL):
    """Sweep-line merge of closed intervals; gaps below merge_tol close."""
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    for a, b in ivs:
        if a > b:
            raise EngineError(f"interval [{a}, {b}] inverted")
    out = []
    for a, b in ivs:
        if out and a <= out[-1][1] + merge_tol:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


def run_point(problem: Problem, lam: LambdaPoint, refine: int = 0) -> PointRecord:
    """Identify thresholds, compile the coefficient program, solve both
    directions.  Never raises for per-point outcomes; numerical failures are
    reported in the record."""
    model = problem.model
    dist = make_distribution(lam, model.dim)
    diag = {}
    try:
        thr = selection.identify_thresholds(model, dist, problem.P,
                                            eps_feas=problem.eps_feas,
                                            anchor=lam.anchor)
        if isinstance(thr, Rejected):
            diag["max_residual"] = thr.max_residual
            diag["detail"] = thr.detail
            return PointRecord(lam.index, lam.describe(), ST_REJECTED, diagnostics=diag)

        terms = targets.compile_target(problem.target, model, thr, dist,
                                       problem.p_x, problem.p_xz)
        if terms.is_constant:
            v = terms.constant
            return PointRecord(lam.index, lam.describe(), ST_BOUNDED, v, v,
                               {"constant": True, **terms.denominators})

        regions = {}
        for x in model.covariates:
            for z in model.instruments:
                for d, r in selection.regions(model, thr, z, x).items():
                    regions[(d, z, x)] = r
        generators = list(regions.values()) + [s for (_, _, _, _, s) in terms.terms]

        if problem.basis_kind == mtr_space.PIECEWISE:
            part = build_partition(generators, model.dim)
            for _ in range(refine):
                part = refine_breakpoints(part)
            basis = mtr_space.Basis(mtr_space.PIECEWISE, partition=part)
            diag["n_cells"] = part.n_cells
        else:
            degrees = problem.degrees or (3,) * model.dim
            basis = mtr_space.Basis(mtr_space.BERNSTEIN, degrees=degrees,
                                    grid_res=problem.grid_res)

        sys = mtr_space.make_system(basis, model.treatments, model.covariates,
                                    problem.restrictions)
        mtr_space.compile_data_constraints(sys, basis, dist, regions, problem.E)
        if sys.infeasible_reason is not None:
            diag["detail"] = sys.infeasible_reason
            return PointRecord(lam.index, lam.describe(), ST_INFEASIBLE,
                               diagnostics=diag)
        mtr_space.compile_shape_constraints(sys, basis, dist, problem.restrictions,
                                            model.treatments, model.covariates)
        c = mtr_space.objective_terms(sys, basis, dist, terms.terms)
        prog = mtr_space.to_linear_program(sys, c, problem.restrictions)

        lo_out = lp_mod.solve_lp(prog)
        neg = lp_mod.LinearProgram(-prog.c, prog.A_eq, prog.b_eq, prog.A_ub,
                                   prog.b_ub, prog.lo, prog.hi, prog.names)
        hi_out = lp_mod.solve_lp(neg)
        diag["iterations"] = lo_out.iterations + hi_out.iterations
        diag.update(terms.denominators)
        for out in (lo_out, hi_out):
            if out.status == lp_mod.STATUS_ITER_LIMIT:
                diag["detail"] = "simplex iteration limit"
                return PointRecord(lam.index, lam.describe(), ST_FAILURE,
                                   diagnostics=diag)
        if lp_mod.STATUS_INFEASIBLE in (lo_out.status, hi_out.status):
            return PointRecord(lam.index, lam.describe(), ST_INFEASIBLE,
                               diagnostics=diag)
        lb = -np.inf if lo_out.status == lp_mod.STATUS_UNBOUNDED \
            else lo_out.value + terms.constant
        ub = np.inf if hi_out.status == lp_mod.STATUS_UNBOUNDED \
            else -hi_out.value + terms.constant
        return PointRecord(lam.index, lam.describe(), ST_BOUNDED, lb, ub, diag)

    except TargetUndefined as e:
        diag["mass"] = e.mass
        return PointRecord(lam.index, lam.describe(), ST_UNDEFINED, diagnostics=diag)
    except selection.IdentificationFailure as e:
        diag["detail"] = str(e)
        return PointRecord(lam.index, lam.describe(), ST_FAILURE, diagnostics=diag)


def run_sweep(problem: Problem, grid: LambdaGrid, workers: int = 1,
              refine: int = 0) -> SweepResult:
    """Solve every grid point (optionally in a thread pool) and union the
    bounded intervals.  Output is sorted by grid index, so results do not
    depend on scheduling."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(lambda p: run_point(problem, p, refine),
                                  grid.points))
    else:
        records = [run_point(problem, p, refine) for p in grid.points]
    records.sort(key=lambda r: r.index)
    for r in records:
        if r.status != ST_BOUNDED:
            log.info("point %d: %s %s", r.index, r.status, r.diagnostics)
    ivs = [(r.lb, r.ub) for r in records if r.status == ST_BOUNDED]
    all_rejected = bool(records) and all(r.status == ST_REJECTED for r in records)
    return SweepResult(tuple(records), union_intervals(ivs, problem.merge_tol),
                       all_rejected)
