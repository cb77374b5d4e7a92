import warnings

import numpy as np
import pytest

from mtbounds import mtr_space as M
from mtbounds.distributions import GaussianCopula2, Independence
from mtbounds.geometry import (Rect, RectUnion, build_partition,
                               refine_breakpoints)

X = ((),)


def simple_partition():
    gens = [RectUnion.of(Rect((0.0, 0.0), (0.5, 1.0))),
            RectUnion.of(Rect((0.0, 0.0), (0.5, 0.4)))]
    return build_partition(gens, 2), gens


def test_basis_validation():
    with pytest.raises(M.MtrError):
        M.Basis(M.PIECEWISE)
    with pytest.raises(M.MtrError):
        M.Basis(M.BERNSTEIN)
    with pytest.raises(M.MtrError):
        M.Basis("fourier", degrees=(2,))


def test_bernstein_partition_of_unity():
    b = M.Basis(M.BERNSTEIN, degrees=(3, 2))
    rng = np.random.default_rng(1)
    pts = rng.random((50, 2))
    vals = M.basis_eval(b, pts)
    assert vals.shape == (50, 12)
    assert np.all(vals >= 0)
    np.testing.assert_allclose(vals.sum(axis=1), 1.0, atol=1e-12)


def test_piecewise_eval_is_indicator():
    p, _ = simple_partition()
    b = M.Basis(M.PIECEWISE, partition=p)
    vals = M.basis_eval(b, np.array([[0.25, 0.2], [0.75, 0.9]]))
    assert np.all(vals.sum(axis=1) == 1.0)
    assert np.count_nonzero(vals) == 2


def test_data_constraint_transcription():
    # one-dimensional split at 0.5 under the uniform law: each treated /
    # untreated moment pins one coefficient times the cell mass 0.5
    part = build_partition([RectUnion.of(Rect((0.0,), (0.5,)))], 1)
    basis = M.Basis(M.PIECEWISE, partition=part)
    sys = M.make_system(basis, (0, 1), X)
    regions = {(1, 0, ()): RectUnion.of(Rect((0.0,), (0.5,))),
               (0, 0, ()): RectUnion.of(Rect((0.5,), (1.0,)))}
    E = {(1, 0, ()): 0.2, (0, 0, ()): 0.1}
    M.compile_data_constraints(sys, basis, Independence(1), regions, E)
    assert len(sys.eq_rows) == 2
    (row1, rhs1), (row2, rhs2) = sys.eq_rows
    assert row1 == {sys.index[("a", 0, 1, ())]: pytest.approx(0.5)}
    assert rhs1 == 0.2
    assert row2 == {sys.index[("a", 1, 0, ())]: pytest.approx(0.5)}


def test_zero_measure_region_handling():
    part = build_partition([RectUnion.of(Rect((0.0,), (0.5,)))], 1)
    basis = M.Basis(M.PIECEWISE, partition=part)
    empty = RectUnion.of(Rect((0.5,), (0.5,)))
    sys = M.make_system(basis, (0,), X)
    M.compile_data_constraints(sys, basis, Independence(1), {(0, 0, ()): empty},
                               {(0, 0, ()): 0.0})
    assert not sys.eq_rows and sys.infeasible_reason is None
    assert sys.notes
    sys = M.make_system(basis, (0,), X)
    M.compile_data_constraints(sys, basis, Independence(1), {(0, 0, ()): empty},
                               {(0, 0, ()): 0.3})
    assert sys.infeasible_reason is not None


def test_bounds_and_md_piecewise():
    p, _ = simple_partition()
    basis = M.Basis(M.PIECEWISE, partition=p)
    r = M.ShapeRestrictionSet(bounds=(0.0, 1.0), md=((1, 0),))
    sys = M.make_system(basis, (0, 1), X, r)
    M.compile_shape_constraints(sys, basis, Independence(2), r, (0, 1), X)
    assert all(lo == 0.0 and hi == 1.0 for lo, hi in zip(sys.lo, sys.hi))
    # one dominance inequality per cell
    assert len(sys.ub_rows) == p.n_cells


def test_um_single_cell_per_slab():
    # 2x1 split: the monotone conditional-mean constraint reduces to a
    # difference of the two cell coefficients with unit weights
    part = build_partition([RectUnion.of(Rect((0.0, 0.0), (0.5, 1.0)))], 2)
    basis = M.Basis(M.PIECEWISE, partition=part)
    r = M.ShapeRestrictionSet(um={0: 1})
    sys = M.make_system(basis, (0,), X, r)
    M.compile_shape_constraints(sys, basis, Independence(2), r, (0,), X)
    assert len(sys.ub_rows) == 1
    row, rhs = sys.ub_rows[0]
    assert rhs == 0.0
    a0 = sys.index[("a", 0, 0, ())]
    a1 = sys.index[("a", 1, 0, ())]
    assert row[a0] == pytest.approx(1.0) and row[a1] == pytest.approx(-1.0)


def test_us_auxiliary_structure():
    p, _ = simple_partition()
    basis = M.Basis(M.PIECEWISE, partition=p)
    covs = ("a", "b")
    r = M.ShapeRestrictionSet(us=(0,))
    sys = M.make_system(basis, (0,), covs, r)
    M.compile_shape_constraints(sys, basis, Independence(2), r, (0,), covs)
    nslabs = len(p.breakpoints[0]) - 1
    assert len(sys.eq_rows) == nslabs * len(covs)
    for row, rhs in sys.eq_rows:
        assert rhs == 0.0
        aux = [i for i in row if sys.names[i].startswith(("usU", "usX"))]
        assert len(aux) == 2


def test_sharpness_warnings():
    p, _ = simple_partition()
    basis = M.Basis(M.PIECEWISE, partition=p)
    for r in (M.ShapeRestrictionSet(cm={0: 1}), M.ShapeRestrictionSet(cs=True)):
        sys = M.make_system(basis, (0,), X, r)
        with pytest.warns(M.SharpnessWarning):
            M.compile_shape_constraints(sys, basis, Independence(2), r, (0,), X)


def test_objective_single_cell():
    p, _ = simple_partition()
    basis = M.Basis(M.PIECEWISE, partition=p)
    sys = M.make_system(basis, (0, 1), X)
    cell0 = RectUnion.of(p.cell(0))
    c = M.objective_terms(sys, basis, Independence(2), [((), 0, 1, 1.0, cell0)])
    nz = np.nonzero(c)[0]
    assert len(nz) == 1
    assert c[nz[0]] == pytest.approx(p.cell(0).volume())
    assert sys.names[nz[0]].endswith("_d1_x0")


def test_untouched_variables_pinned():
    p, _ = simple_partition()
    basis = M.Basis(M.PIECEWISE, partition=p)
    r = M.ShapeRestrictionSet(bounds=(0.0, 2.0))
    sys = M.make_system(basis, (0,), X, r)
    prog = M.to_linear_program(sys, np.zeros(sys.n), r)
    # nothing references any variable: all pinned to the midpoint
    assert np.all(prog.lo == 1.0) and np.all(prog.hi == 1.0)


def _monotone_md_mtr(rng, shape):
    """Piecewise values on a grid, increasing along dim 0, in [0,1], with
    treatment 1 dominating treatment 0."""
    other = shape[1]
    v0 = np.sort(rng.random((shape[0], other)), axis=0)
    v1 = np.maximum(np.sort(rng.random((shape[0], other)), axis=0), v0)
    return v0, v1


def test_appendix_construction_feasibility():
    # cell averages of any response function satisfying B, MD and UM on a
    # refinement satisfy every compiled constraint on the coarse partition
    rng = np.random.default_rng(7)
    dist = GaussianCopula2(0.3)
    gens = [RectUnion.of(Rect((0.0, 0.0), (0.6, 1.0))),
            RectUnion.of(Rect((0.0, 0.3), (0.6, 1.0)))]
    coarse = build_partition(gens, 2)
    fine = refine_breakpoints(coarse, 3)
    for _ in range(5):
        v0, v1 = _monotone_md_mtr(rng, fine.shape)
        vals = {0: v0, 1: v1}

        def integral(region, d):
            tot = 0.0
            for k, cell in fine.cells():
                mi = fine.multi_index(k)
                inner = RectUnion.of(cell)
                from mtbounds.geometry import intersect
                for r in region.rects:
                    c = cell.intersect(r)
                    if c is not None and c.volume() > 0:
                        tot += vals[d][mi] * dist.rect_measure(c)
            return tot

        basis = M.Basis(M.PIECEWISE, partition=coarse)
        r = M.ShapeRestrictionSet(bounds=(0.0, 1.0), md=((1, 0),), um={0: 1})
        sys = M.make_system(basis, (0, 1), X, r)
        regions = {(1, 0, ()): gens[0],
                   (0, 0, ()): RectUnion.of(Rect((0.6, 0.0), (1.0, 1.0)))}
        E = {(1, 0, ()): integral(gens[0], 1),
             (0, 0, ()): integral(regions[(0, 0, ())], 0)}
        M.compile_data_constraints(sys, basis, dist, regions, E)
        M.compile_shape_constraints(sys, basis, dist, r, (0, 1), X)

        # construct the cell-averaged coefficients
        alpha = np.zeros(sys.n)
        for d in (0, 1):
            for k, cell in coarse.cells():
                mass = dist.rect_measure(cell)
                if mass < 1e-12:
                    alpha[sys.index[("a", k, d, ())]] = 0.5
                    continue
                alpha[sys.index[("a", k, d, ())]] = \
                    integral(RectUnion.of(cell), d) / mass
        for row, rhs in sys.eq_rows:
            lhs = sum(alpha[i] * v for i, v in row.items())
            assert lhs == pytest.approx(rhs, abs=1e-8)
        for row, rhs in sys.ub_rows:
            lhs = sum(alpha[i] * v for i, v in row.items())
            assert lhs <= rhs + 1e-8
        assert np.all(alpha >= -1e-12) and np.all(alpha <= 1 + 1e-12)
