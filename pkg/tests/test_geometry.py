import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtbounds import geometry as G


def rect2(a1, b1, a2, b2):
    return G.Rect((a1, a2), (b1, b2))


def test_rect_validation():
    with pytest.raises(G.GeometryError):
        G.Rect((0.5,), (0.4,))
    with pytest.raises(G.GeometryError):
        G.Rect((-0.1,), (0.5,))
    with pytest.raises(G.GeometryError):
        G.Rect((0.0, 0.0), (1.0,))


def test_rect_ops():
    r = rect2(0.0, 0.5, 0.2, 0.8)
    assert r.volume() == pytest.approx(0.3)
    assert r.contains_point((0.25, 0.5))
    assert not r.contains_point((0.6, 0.5))
    s = rect2(0.4, 1.0, 0.0, 0.3)
    i = r.intersect(s)
    assert i.lo == (0.4, 0.2) and i.hi == (0.5, 0.3)
    assert r.intersect(rect2(0.6, 1.0, 0.0, 1.0)) is None


def test_union_and_complement():
    u = G.RectUnion.of(rect2(0.0, 0.5, 0.0, 1.0), rect2(0.5, 1.0, 0.0, 0.5))
    assert u.volume() == pytest.approx(0.75)
    c = G.complement(u)
    assert c.volume() == pytest.approx(0.25)
    # complement pieces are interior-disjoint from the original
    inter = G.intersect(u, c)
    assert inter.volume() == pytest.approx(0.0, abs=1e-15)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1),
                          st.floats(0, 1), st.floats(0, 1)),
                min_size=0, max_size=4))
@settings(max_examples=100, deadline=None)
def test_complement_volume_property(coords):
    rects = []
    for a1, b1, a2, b2 in coords:
        lo = (min(a1, b1), min(a2, b2))
        hi = (max(a1, b1), max(a2, b2))
        rects.append(G.Rect(lo, hi))
    # build an interior-disjoint union by subtracting earlier rects
    pieces = []
    for r in rects:
        new = [r]
        for p in pieces:
            new = G._subtract_rect(new, p)
        pieces.extend(n for n in new if n.volume() > 0)
    u = G.RectUnion(tuple(pieces), 2)
    assert G.complement(u).volume() == pytest.approx(1.0 - u.volume(), abs=1e-12)


def test_partition_indexing_round_trip():
    p = G.Partition(((0.0, 0.3, 1.0), (0.0, 0.5, 0.7, 1.0)))
    assert p.shape == (2, 3)
    assert p.n_cells == 6
    for k in range(p.n_cells):
        assert p.flat_index(p.multi_index(k)) == k
    # row-major: last dimension varies fastest
    assert p.multi_index(1) == (0, 1)
    assert p.cell(0).lo == (0.0, 0.0) and p.cell(0).hi == (0.3, 0.5)


def test_build_partition_and_validate():
    gens = [G.RectUnion.of(rect2(0.0, 0.4, 0.0, 0.6)),
            G.RectUnion.of(rect2(0.4, 1.0, 0.0, 1.0), rect2(0.0, 0.4, 0.6, 1.0))]
    p = G.build_partition(gens, 2)
    assert p.breakpoints == ((0.0, 0.4, 1.0), (0.0, 0.6, 1.0))
    G.validate_partition(p)
    ks = G.cells_within(p, gens[0])
    assert sum(p.cell(k).volume() for k in ks) == pytest.approx(0.24)


def test_cells_within_straddle():
    p = G.build_partition([G.RectUnion.of(rect2(0.0, 0.5, 0.0, 1.0))], 2)
    with pytest.raises(G.StraddlingCellError):
        G.cells_within(p, G.RectUnion.of(rect2(0.0, 0.25, 0.0, 1.0)))


def test_partition_cell_cap():
    gens = [G.RectUnion.of(G.Rect((i / 200.0,), ((i + 1) / 200.0,)))
            for i in range(199)]
    with pytest.raises(G.GeometryError):
        G.build_partition(gens, 1, max_cells=100)


def test_breakpoint_dedupe():
    a = G.RectUnion.of(G.Rect((0.3,), (1.0,)))
    b = G.RectUnion.of(G.Rect((0.3 + 1e-14,), (1.0,)))
    p = G.build_partition([a, b], 1)
    assert len(p.breakpoints[0]) == 3  # 0, 0.3, 1


def test_refine_breakpoints():
    gens = [G.RectUnion.of(rect2(0.0, 0.5, 0.0, 0.5))]
    p = G.build_partition(gens, 2)
    r = G.refine_breakpoints(p, 2)
    assert r.shape == (4, 4)
    G.validate_partition(r)
    # the generator still tiles exactly in the refined partition
    ks = G.cells_within(r, gens[0])
    assert sum(r.cell(k).volume() for k in ks) == pytest.approx(0.25)


@given(st.integers(1, 3), st.data())
@settings(max_examples=60, deadline=None)
def test_random_partitions_validate(dim, data):
    n = data.draw(st.integers(0, 3))
    gens = []
    for _ in range(n):
        lo = [data.draw(st.floats(0, 1)) for _ in range(dim)]
        hi = [data.draw(st.floats(0, 1)) for _ in range(dim)]
        r = G.Rect(tuple(min(a, b) for a, b in zip(lo, hi)),
                   tuple(max(a, b) for a, b in zip(lo, hi)))
        gens.append(G.RectUnion.of(r))
    p = G.build_partition(gens, dim)
    G.validate_partition(p)
