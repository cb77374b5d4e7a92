"""Linear coefficient spaces for treatment response functions.

Two basis modes: indicator functions on a grid partition (each coefficient
is the function's conditional mean on one cell) and tensor-product Bernstein
polynomials evaluated over a point grid.  Data moments, shape restrictions
and objective weights all compile to linear systems in the coefficients.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .distributions import DegenerateConditioning, UDistribution
from .geometry import Partition, Rect, RectUnion, cells_within
from .lp import LinearProgram

PIECEWISE = "piecewise"
BERNSTEIN = "bernstein"

# coefficients on cells below this measure constrain nothing
ZERO_MEASURE_TOL = 1e-12


class MtrError(ValueError):
    pass


class SharpnessWarning(UserWarning):
    """Requested restrictions keep the bounds valid but possibly not sharp."""


@dataclass(frozen=True)
class Basis:
    kind: str
    partition: Partition | None = None
    degrees: tuple[int, ...] | None = None
    grid_res: int = 11

    def __post_init__(self):
        if self.kind == PIECEWISE:
            if self.partition is None:
                raise MtrError("piecewise basis needs a partition")
        elif self.kind == BERNSTEIN:
            if self.degrees is None:
                raise MtrError("polynomial basis needs per-dimension degrees")
            if self.grid_res < 2:
                raise MtrError("grid resolution must be at least 2")
        else:
            raise MtrError(f"unknown basis kind {self.kind!r}")

    @property
    def dim(self) -> int:
        if self.kind == PIECEWISE:
            return self.partition.dim
        return len(self.degrees)

    @property
    def n_funcs(self) -> int:
        if self.kind == PIECEWISE:
            return self.partition.n_cells
        n = 1
        for dg in self.degrees:
            n *= dg + 1
        return n

    def grid_axes(self):
        return [np.linspace(0.0, 1.0, self.grid_res) for _ in range(self.dim)]


def _bernstein_1d(n: int, t: np.ndarray) -> np.ndarray:
    """(len(t), n+1) matrix of Bernstein polynomials of degree n."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty((t.shape[0], n + 1))
    for k in range(n + 1):
        out[:, k] = math.comb(n, k) * t**k * (1.0 - t) ** (n - k)
    return out


def basis_eval(basis: Basis, points: np.ndarray) -> np.ndarray:
    """(npoints, n_funcs) matrix of basis values; row-major function order."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, basis.dim)
    if basis.kind == BERNSTEIN:
        mats = [_bernstein_1d(dg, points[:, j]) for j, dg in enumerate(basis.degrees)]
        out = mats[0]
        for m in mats[1:]:
            out = (out[:, :, None] * m[:, None, :]).reshape(points.shape[0], -1)
        return out
    p = basis.partition
    out = np.zeros((points.shape[0], p.n_cells))
    for i, u in enumerate(points):
        mi = []
        for j, bp in enumerate(p.breakpoints):
            # right-closed assignment keeps interior points unambiguous
            idx = int(np.searchsorted(bp, u[j], side="left")) - 1
            mi.append(min(max(idx, 0), len(bp) - 2))
        out[i, p.flat_index(tuple(mi))] = 1.0
    return out


def basis_region_integrals(basis: Basis, dist: UDistribution,
                           region: RectUnion) -> np.ndarray:
    """Vector of integrals of each basis function over the region under the
    law: used for data constraints and objective weights."""
    out = np.zeros(basis.n_funcs)
    if basis.kind == PIECEWISE:
        for k in cells_within(basis.partition, region):
            out[k] = dist.rect_measure(basis.partition.cell(k))
        return out
    for r in region.rects:
        pts, w = dist.quad_points(r)
        if pts.shape[0]:
            out += w @ basis_eval(basis, pts)
    return out


# ---------------------------------------------------------------------------
# variable registry and constraint system


@dataclass(eq=False)
class System:
    """Linear system over the coefficient variables.

    Rows are stored as sparse dicts {var index: coef}; order of insertion is
    the output order, so identical inputs give identical systems.
    """

    names: list[str] = field(default_factory=list)
    index: dict = field(default_factory=dict)
    lo: list[float] = field(default_factory=list)
    hi: list[float] = field(default_factory=list)
    eq_rows: list[tuple[dict, float]] = field(default_factory=list)
    ub_rows: list[tuple[dict, float]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    infeasible_reason: str | None = None

    def var(self, key, name: str) -> int:
        if key in self.index:
            return self.index[key]
        i = len(self.names)
        self.index[key] = i
        self.names.append(name)
        self.lo.append(-np.inf)
        self.hi.append(np.inf)
        return i

    @property
    def n(self) -> int:
        return len(self.names)

    def add_eq(self, row: dict, rhs: float):
        self.eq_rows.append((row, rhs))

    def add_ge(self, row: dict, rhs: float):
        # stored as -row <= -rhs
        self.ub_rows.append(({i: -c for i, c in row.items()}, -rhs))

    def add_le(self, row: dict, rhs: float):
        self.ub_rows.append((row, rhs))


@dataclass(frozen=True)
class ShapeRestrictionSet:
    """bounds: (lower, upper) on all response values; md: dominance pairs
    (d_hi, d_lo); cm/um: {dim: +1 increasing | -1 decreasing} cellwise /
    conditional-mean monotonicity; cs: additive covariate separability;
    us: dims with separable conditional means."""

    bounds: tuple[float, float] | None = None
    md: tuple[tuple[int, int], ...] = ()
    cm: dict = field(default_factory=dict)
    um: dict = field(default_factory=dict)
    cs: bool = False
    us: tuple[int, ...] = ()

    def __post_init__(self):
        if self.bounds is not None and self.bounds[0] > self.bounds[1]:
            raise MtrError("lower bound above upper bound")
        for dct in (self.cm, self.um):
            for j, sgn in dct.items():
                if sgn not in (1, -1):
                    raise MtrError("monotonicity direction must be +1 or -1")


def make_system(basis: Basis, treatments, covariates,
                restrictions: ShapeRestrictionSet | None = None) -> System:
    """Register primary variables (one per basis function, treatment and
    covariate cell) plus any auxiliaries the restrictions need, in a fixed
    order."""
    sys = System()
    for d in treatments:
        for xi, x in enumerate(covariates):
            for k in range(basis.n_funcs):
                sys.var(("a", k, d, x), f"a_k{k}_d{d}_x{xi}")
    r = restrictions or ShapeRestrictionSet()
    if r.cs and basis.kind == PIECEWISE:
        for d in treatments:
            for k in range(basis.n_funcs):
                sys.var(("csU", k, d), f"csU_k{k}_d{d}")
            for xi, x in enumerate(covariates):
                sys.var(("csX", d, x), f"csX_d{d}_x{xi}")
    if basis.kind == PIECEWISE:
        for j in r.us:
            nslabs = len(basis.partition.breakpoints[j]) - 1
            for d in treatments:
                for i in range(nslabs):
                    sys.var(("usU", j, i, d), f"usU_j{j}_s{i}_d{d}")
                for xi, x in enumerate(covariates):
                    sys.var(("usX", j, d, x), f"usX_j{j}_d{d}_x{xi}")
    return sys


def _dist_for(dist, x) -> UDistribution:
    return dist[x] if isinstance(dist, dict) else dist


def compile_data_constraints(sys: System, basis: Basis, dist,
                             regions: dict, E: dict) -> None:
    """One equality per (d, z, x): the basis integral over the selection
    region equals the observed outcome moment E[Y 1{D=d} | Z=z, X=x]."""
    for (d, z, x), region in regions.items():
        dx = _dist_for(dist, x)
        coefs = basis_region_integrals(basis, dx, region)
        row = {sys.index[("a", k, d, x)]: c
               for k, c in enumerate(coefs) if abs(c) > ZERO_MEASURE_TOL}
        rhs = E[(d, z, x)]
        if not row:
            if abs(rhs) > 1e-8:
                sys.infeasible_reason = (
                    f"moment E[{d}|{z},{x}] = {rhs} on a zero-measure region")
            else:
                sys.notes.append(f"dropped 0 = 0 moment for (d={d}, z={z}, x={x})")
            continue
        sys.add_eq(row, rhs)


def _slab_rows(sys: System, basis: Basis, dx: UDistribution, j: int, i: int,
               d, x) -> dict | None:
    """Row of conditional-mean weights over cells in slab i of dimension j,
    or None when the slab has zero probability."""
    p = basis.partition
    lo, hi = p.slab_interval(j, i)
    row = {}
    try:
        for mi in itertools.product(*[range(s) if jj != j else (i,)
                                      for jj, s in enumerate(p.shape)]):
            cell = p.cell_mi(mi)
            w = dx.cond_prob(cell, j, (lo, hi))
            if abs(w) > ZERO_MEASURE_TOL:
                row[sys.index[("a", p.flat_index(mi), d, x)]] = w
    except DegenerateConditioning:
        return None
    if not row:
        return None
    return row


def _cond_mean_coefs(basis: Basis, dx: UDistribution, j: int, u_j: float) -> np.ndarray:
    pts, w = dx.cond_quad_points(j, u_j)
    return w @ basis_eval(basis, pts)


def compile_shape_constraints(sys: System, basis: Basis, dist,
                              restrictions: ShapeRestrictionSet,
                              treatments, covariates) -> None:
    r = restrictions
    piecewise = basis.kind == PIECEWISE
    if piecewise and r.cm:
        warnings.warn("cellwise monotonicity on an indicator basis gives valid "
                      "but possibly non-sharp bounds", SharpnessWarning)
    if piecewise and r.cs:
        warnings.warn("covariate separability on an indicator basis gives valid "
                      "but possibly non-sharp bounds", SharpnessWarning)

    grid_pts = None
    if not piecewise:
        axes = basis.grid_axes()
        grid_pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        grid_eval = basis_eval(basis, grid_pts)

    # B: value bounds
    if r.bounds is not None:
        m_lo, m_hi = r.bounds
        if piecewise:
            for d in treatments:
                for x in covariates:
                    for k in range(basis.n_funcs):
                        i = sys.index[("a", k, d, x)]
                        sys.lo[i] = max(sys.lo[i], m_lo)
                        sys.hi[i] = min(sys.hi[i], m_hi)
        else:
            for d in treatments:
                for x in covariates:
                    for row_ev in grid_eval:
                        row = {sys.index[("a", k, d, x)]: c
                               for k, c in enumerate(row_ev) if abs(c) > ZERO_MEASURE_TOL}
                        sys.add_ge(row, m_lo)
                        sys.add_le(row, m_hi)

    # MD: treatment dominance
    for d_hi, d_lo in r.md:
        for x in covariates:
            if piecewise:
                for k in range(basis.n_funcs):
                    sys.add_ge({sys.index[("a", k, d_hi, x)]: 1.0,
                                sys.index[("a", k, d_lo, x)]: -1.0}, 0.0)
            else:
                for row_ev in grid_eval:
                    row = {}
                    for k, c in enumerate(row_ev):
                        if abs(c) > ZERO_MEASURE_TOL:
                            row[sys.index[("a", k, d_hi, x)]] = c
                            row[sys.index[("a", k, d_lo, x)]] = -c
                    sys.add_ge(row, 0.0)

    # CM: cellwise / pointwise monotonicity along one dimension
    for j, sgn in sorted(r.cm.items()):
        for d in treatments:
            for x in covariates:
                if piecewise:
                    p = basis.partition
                    for mi in itertools.product(*[range(s) for s in p.shape]):
                        if mi[j] + 1 >= p.shape[j]:
                            continue
                        mi_up = tuple(v + 1 if jj == j else v for jj, v in enumerate(mi))
                        sys.add_ge({sys.index[("a", p.flat_index(mi_up), d, x)]: float(sgn),
                                    sys.index[("a", p.flat_index(mi), d, x)]: -float(sgn)}, 0.0)
                else:
                    res = basis.grid_res
                    shape = (res,) * basis.dim
                    for mi in itertools.product(*[range(s) for s in shape]):
                        if mi[j] + 1 >= res:
                            continue
                        flat = np.ravel_multi_index(mi, shape)
                        mi_up = tuple(v + 1 if jj == j else v for jj, v in enumerate(mi))
                        flat_up = np.ravel_multi_index(mi_up, shape)
                        diff = grid_eval[flat_up] - grid_eval[flat]
                        row = {sys.index[("a", k, d, x)]: float(sgn) * c
                               for k, c in enumerate(diff) if abs(c) > ZERO_MEASURE_TOL}
                        if row:
                            sys.add_ge(row, 0.0)

    # UM: monotone conditional means along one dimension
    for j, sgn in sorted(r.um.items()):
        for d in treatments:
            for x in covariates:
                dx = _dist_for(dist, x)
                if piecewise:
                    p = basis.partition
                    prev = None
                    for i in range(p.shape[j]):
                        cur = _slab_rows(sys, basis, dx, j, i, d, x)
                        if cur is None:
                            sys.notes.append(
                                f"dropped zero-mass slab {i} of dim {j} for (d={d}, x={x})")
                            continue
                        if prev is not None:
                            row = dict(cur) if sgn == 1 else {k: -v for k, v in cur.items()}
                            for k, v in prev.items():
                                row[k] = row.get(k, 0.0) - float(sgn) * v
                            sys.add_ge(row, 0.0)
                        prev = cur
                else:
                    us = np.linspace(0.0, 1.0, basis.grid_res)
                    prev = None
                    for u_j in us:
                        cur = _cond_mean_coefs(basis, dx, j, u_j)
                        if prev is not None:
                            diff = float(sgn) * (cur - prev)
                            row = {sys.index[("a", k, d, x)]: c
                                   for k, c in enumerate(diff) if abs(c) > ZERO_MEASURE_TOL}
                            if row:
                                sys.add_ge(row, 0.0)
                        prev = cur

    # CS: additive separability in covariates
    if r.cs:
        if piecewise:
            for d in treatments:
                for x in covariates:
                    for k in range(basis.n_funcs):
                        sys.add_eq({sys.index[("a", k, d, x)]: 1.0,
                                    sys.index[("csU", k, d)]: -1.0,
                                    sys.index[("csX", d, x)]: -1.0}, 0.0)
        else:
            for d in treatments:
                for x1, x2 in zip(covariates, covariates[1:]):
                    for p1, p2 in zip(range(len(grid_eval) - 1), range(1, len(grid_eval))):
                        diff = grid_eval[p1] - grid_eval[p2]
                        row = {}
                        for k, c in enumerate(diff):
                            if abs(c) > ZERO_MEASURE_TOL:
                                row[sys.index[("a", k, d, x1)]] = c
                                row[sys.index[("a", k, d, x2)]] = -c
                        if row:
                            sys.add_eq(row, 0.0)

    # US: separable conditional means along one dimension
    for j in r.us:
        for d in treatments:
            if piecewise:
                p = basis.partition
                for i in range(p.shape[j]):
                    for x in covariates:
                        dx = _dist_for(dist, x)
                        cur = _slab_rows(sys, basis, dx, j, i, d, x)
                        if cur is None:
                            sys.notes.append(
                                f"dropped zero-mass slab {i} of dim {j} for (d={d}, x={x})")
                            continue
                        row = dict(cur)
                        row[sys.index[("usU", j, i, d)]] = -1.0
                        row[sys.index[("usX", j, d, x)]] = -1.0
                        sys.add_eq(row, 0.0)
            else:
                us = np.linspace(0.0, 1.0, basis.grid_res)
                for x1, x2 in zip(covariates, covariates[1:]):
                    d1 = _dist_for(dist, x1)
                    d2 = _dist_for(dist, x2)
                    prev = None
                    for u_j in us:
                        cur = (_cond_mean_coefs(basis, d1, j, u_j),
                               _cond_mean_coefs(basis, d2, j, u_j))
                        if prev is not None:
                            row = {}
                            for k in range(basis.n_funcs):
                                c1 = cur[0][k] - prev[0][k]
                                c2 = cur[1][k] - prev[1][k]
                                if abs(c1) > ZERO_MEASURE_TOL:
                                    row[sys.index[("a", k, d, x1)]] = c1
                                if abs(c2) > ZERO_MEASURE_TOL:
                                    row[sys.index[("a", k, d, x2)]] = \
                                        row.get(sys.index[("a", k, d, x2)], 0.0) - c2
                            if row:
                                sys.add_eq(row, 0.0)
                        prev = cur


def objective_terms(sys: System, basis: Basis, dist, terms) -> np.ndarray:
    """Objective vector: coefficient of each primary variable is the
    weighted basis integral over its target sets.

    `terms` is a list of (x, l, d, weight, RectUnion)."""
    c = np.zeros(sys.n)
    for (x, l, d, w, region) in terms:
        if w == 0.0 or region.is_empty():
            continue
        dx = _dist_for(dist, x)
        coefs = basis_region_integrals(basis, dx, region)
        for k, v in enumerate(coefs):
            if abs(v) > ZERO_MEASURE_TOL:
                c[sys.index[("a", k, d, x)]] += w * v
    return c


def to_linear_program(sys: System, c: np.ndarray,
                      restrictions: ShapeRestrictionSet | None = None) -> LinearProgram:
    """Assemble the LP, fixing or pinning variables that no constraint row
    and no objective entry references (they would otherwise make the LP
    spuriously unbounded)."""
    n = sys.n
    touched = np.zeros(n, dtype=bool)
    touched |= np.abs(c) > 0
    for row, _ in sys.eq_rows:
        for i in row:
            touched[i] = True
    for row, _ in sys.ub_rows:
        for i in row:
            touched[i] = True
    lo = np.array(sys.lo)
    hi = np.array(sys.hi)
    for i in range(n):
        if not touched[i]:
            if restrictions is not None and restrictions.bounds is not None:
                mid = 0.5 * (restrictions.bounds[0] + restrictions.bounds[1])
            else:
                mid = 0.0
            lo[i] = hi[i] = mid
    A_eq = np.zeros((len(sys.eq_rows), n))
    b_eq = np.zeros(len(sys.eq_rows))
    for ri, (row, rhs) in enumerate(sys.eq_rows):
        for i, v in row.items():
            A_eq[ri, i] = v
        b_eq[ri] = rhs
    A_ub = np.zeros((len(sys.ub_rows), n))
    b_ub = np.zeros(len(sys.ub_rows))
    for ri, (row, rhs) in enumerate(sys.ub_rows):
        for i, v in row.items():
            A_ub[ri, i] = v
        b_ub[ri] = rhs
    return LinearProgram(c, A_eq, b_eq, A_ub, b_ub, lo, hi, tuple(sys.names))
