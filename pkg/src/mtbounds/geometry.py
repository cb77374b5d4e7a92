"""Axis-aligned rectangle algebra on [0,1]^J and grid partitions.

Rectangles are closed; overlaps on measure-zero boundaries are allowed
throughout because the heterogeneity distribution is continuous, which keeps
the bookkeeping free of half-open intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

BREAKPOINT_TOL = 1e-12


class GeometryError(ValueError):
    pass


class StraddlingCellError(GeometryError):
    """A partition cell lies partly inside and partly outside the query set,
    i.e. the set is not in the closure of the registered generators."""


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle in [0,1]^J."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise GeometryError("lo/hi dimension mismatch")
        for a, b in zip(self.lo, self.hi):
            if not (0.0 <= a <= b <= 1.0):
                raise GeometryError(f"invalid interval [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def volume(self) -> float:
        v = 1.0
        for a, b in zip(self.lo, self.hi):
            v *= b - a
        return v

    def intersect(self, other: "Rect") -> "Rect | None":
        """Intersection, or None if empty.  Measure-zero slivers (touching
        faces) are kept."""
        if self.dim != other.dim:
            raise GeometryError("dimension mismatch")
        lo = tuple(max(a, c) for a, c in zip(self.lo, other.lo))
        hi = tuple(min(b, d) for b, d in zip(self.hi, other.hi))
        if any(a > b for a, b in zip(lo, hi)):
            return None
        return Rect(lo, hi)

    def contains_point(self, u) -> bool:
        return all(a <= t <= b for a, b, t in zip(self.lo, self.hi, u))

    def center(self) -> tuple[float, ...]:
        return tuple(0.5 * (a + b) for a, b in zip(self.lo, self.hi))


def unit_rect(dim: int) -> Rect:
    return Rect((0.0,) * dim, (1.0,) * dim)


@dataclass(frozen=True)
class RectUnion:
    """Finite union of equal-dimension rectangles with pairwise-disjoint
    interiors."""

    rects: tuple[Rect, ...]
    dim: int

    def __post_init__(self):
        for r in self.rects:
            if r.dim != self.dim:
                raise GeometryError("mixed dimensions in union")

    @classmethod
    def of(cls, *rects: Rect, dim: int | None = None) -> "RectUnion":
        if not rects:
            if dim is None:
                raise GeometryError("empty union needs an explicit dimension")
            return cls((), dim)
        return cls(tuple(rects), rects[0].dim)

    @classmethod
    def empty(cls, dim: int) -> "RectUnion":
        return cls((), dim)

    @classmethod
    def full(cls, dim: int) -> "RectUnion":
        return cls((unit_rect(dim),), dim)

    def is_empty(self) -> bool:
        return not self.rects

    def volume(self) -> float:
        # member interiors are disjoint, so volumes add
        return sum(r.volume() for r in self.rects)

    def contains_point(self, u) -> bool:
        return any(r.contains_point(u) for r in self.rects)


def intersect(a: RectUnion, b: RectUnion) -> RectUnion:
    """Set intersection via pairwise rectangle intersections."""
    if a.dim != b.dim:
        raise GeometryError("dimension mismatch")
    out = []
    for ra in a.rects:
        for rb in b.rects:
            r = ra.intersect(rb)
            if r is not None:
                out.append(r)
    return RectUnion(tuple(out), a.dim)


def _subtract_rect(pieces: list[Rect], cut: Rect) -> list[Rect]:
    """Subtract `cut` from every rectangle in `pieces`, splitting axis by
    axis; the returned rectangles have disjoint interiors."""
    out = []
    for r in pieces:
        inter = r.intersect(cut)
        if inter is None or inter.volume() == 0.0:
            out.append(r)
            continue
        lo = list(r.lo)
        hi = list(r.hi)
        for j in range(r.dim):
            if cut.lo[j] > lo[j]:
                out.append(Rect(tuple(lo), tuple(hi[:j] + [cut.lo[j]] + hi[j + 1:])))
                lo[j] = cut.lo[j]
            if cut.hi[j] < hi[j]:
                out.append(Rect(tuple(lo[:j] + [cut.hi[j]] + lo[j + 1:]), tuple(hi)))
                hi[j] = cut.hi[j]
        # remaining core lies inside `cut` and is discarded
    return out


def complement(a: RectUnion) -> RectUnion:
    """[0,1]^J minus the union."""
    pieces = [unit_rect(a.dim)]
    for cut in a.rects:
        pieces = _subtract_rect(pieces, cut)
    return RectUnion(tuple(p for p in pieces if p.volume() > 0.0) or (), a.dim)


@dataclass(frozen=True)
class Partition:
    """Rectangular grid partition of [0,1]^J.

    Cells are the Cartesian products of adjacent-breakpoint intervals, stored
    in row-major multi-index order so LP variable indexing is deterministic.
    """

    breakpoints: tuple[tuple[float, ...], ...]
    generators: tuple[RectUnion, ...] = field(default=())

    @property
    def dim(self) -> int:
        return len(self.breakpoints)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(b) - 1 for b in self.breakpoints)

    @property
    def n_cells(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n

    def cell(self, k: int) -> Rect:
        return self.cell_mi(self.multi_index(k))

    def cell_mi(self, mi: tuple[int, ...]) -> Rect:
        lo = tuple(self.breakpoints[j][i] for j, i in enumerate(mi))
        hi = tuple(self.breakpoints[j][i + 1] for j, i in enumerate(mi))
        return Rect(lo, hi)

    def multi_index(self, k: int) -> tuple[int, ...]:
        mi = []
        for s in reversed(self.shape):
            mi.append(k % s)
            k //= s
        return tuple(reversed(mi))

    def flat_index(self, mi) -> int:
        k = 0
        for i, s in zip(mi, self.shape):
            k = k * s + i
        return k

    def cells(self):
        for k in range(self.n_cells):
            yield k, self.cell(k)

    def slab_interval(self, j: int, i: int) -> tuple[float, float]:
        return self.breakpoints[j][i], self.breakpoints[j][i + 1]


def _dedupe(vals, tol=BREAKPOINT_TOL):
    vals = sorted(vals)
    out = [vals[0]]
    for v in vals[1:]:
        if v - out[-1] > tol:
            out.append(v)
    # the unit-interval endpoints must survive exactly, whichever cluster
    # member came first
    if abs(out[0]) <= tol:
        out[0] = 0.0
    if abs(out[-1] - 1.0) <= tol:
        out[-1] = 1.0
    return out


def build_partition(generators, dim: int, max_cells: int = 10**6) -> Partition:
    """Grid partition whose per-dimension breakpoints are the endpoints of
    every generator rectangle (plus 0 and 1), deduplicated to BREAKPOINT_TOL.

    Every generator is then an exact union of cells and the per-dimension
    cell projections are identical or interior-disjoint.
    """
    pts = [[0.0, 1.0] for _ in range(dim)]
    for g in generators:
        if g.dim != dim:
            raise GeometryError("generator dimension mismatch")
        for r in g.rects:
            for j in range(dim):
                pts[j].append(r.lo[j])
                pts[j].append(r.hi[j])
    breakpoints = tuple(tuple(_dedupe(p)) for p in pts)
    n_cells = 1
    for b in breakpoints:
        n_cells *= len(b) - 1
    if n_cells > max_cells:
        raise GeometryError(
            f"partition would have {n_cells} cells, above the cap of {max_cells}; "
            "reduce the number of distinct thresholds or raise max_cells")
    return Partition(breakpoints, tuple(generators))


def cells_within(p: Partition, s: RectUnion) -> list[int]:
    """Indices of the cells tiling `s` exactly.

    Raises StraddlingCellError if some cell interior intersects both `s` and
    its complement, which means `s` is not in the generator closure.
    """
    if s.dim != p.dim:
        raise GeometryError("dimension mismatch")
    out = []
    for k, cell in p.cells():
        vol = cell.volume()
        inner = intersect(RectUnion.of(cell), s).volume()
        if vol == 0.0:
            # boundary sliver: classify by center point
            if s.contains_point(cell.center()):
                out.append(k)
            continue
        if inner >= vol * (1.0 - 1e-9):
            out.append(k)
        elif inner > vol * 1e-9:
            raise StraddlingCellError(
                f"cell {k} ({cell.lo}..{cell.hi}) straddles the query set")
    return out


def validate_partition(p: Partition, tol: float = 1e-12) -> None:
    """Assert the grid-partition invariants: exact coverage, pairwise
    interior disjointness, projection equal-or-disjoint, and exact tiling of
    every registered generator.  Raises GeometryError on violation."""
    total = math.fsum(cell.volume() for _, cell in p.cells())
    if abs(total - 1.0) > tol:
        raise GeometryError(f"cells cover volume {total}, expected 1")
    for j, bp in enumerate(p.breakpoints):
        if bp[0] != 0.0 or bp[-1] != 1.0:
            raise GeometryError(f"breakpoints of dim {j} must span [0,1]")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise GeometryError(f"breakpoints of dim {j} not strictly sorted")
    # grid construction guarantees interior disjointness and the projection
    # property; check generators tile exactly
    for g in p.generators:
        ks = cells_within(p, g)
        vol = sum(p.cell(k).volume() for k in ks)
        if abs(vol - g.volume()) > 1e-9:
            raise GeometryError(
                f"generator of volume {g.volume()} tiled by cells of volume {vol}")


def refine_breakpoints(p: Partition, splits: int = 2) -> Partition:
    """Partition with each breakpoint interval split into `splits` equal
    parts; used for refinement-invariance checks."""
    new = []
    for bp in p.breakpoints:
        pts = list(bp)
        for a, b in zip(bp, bp[1:]):
            for i in range(1, splits):
                pts.append(a + (b - a) * i / splits)
        new.append(tuple(sorted(pts)))
    return Partition(tuple(new), p.generators)
