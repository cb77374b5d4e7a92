"""Target parameters as weighted sums of response-function integrals.

Each target compiles to a list of terms (x, l, d, weight, set) plus an
optional constant; the sets are finite unions of rectangles whose endpoints
come from the identified thresholds (possibly shifted by a policy) and the
corners 0 and 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import selection
from .geometry import RectUnion, intersect
from .selection import PolicyShift, SelectionModel, Thresholds

MASS_FLOOR = 1e-10

ATE = "ate"
ATT = "att"
LATE = "late"
LATE_GROUP_PROB = "late_group_prob"
PRTE = "prte"
PRTE_SUBGROUP_PROB = "prte_subgroup_prob"
PRTE_COND = "prte_cond"
PRTE_COND_PROB = "prte_cond_prob"
CUSTOM = "custom"


class TargetError(ValueError):
    pass


class TargetUndefined(Exception):
    """Conditioning mass below the floor at this dependence parameter."""

    def __init__(self, mass: float, detail: str = ""):
        super().__init__(detail or f"conditioning mass {mass} below floor")
        self.mass = mass


@dataclass(frozen=True)
class TargetSpec:
    kind: str
    d1: int | None = None
    d2: int | None = None
    dz: tuple = ()  # LATE response pattern: ((z, d_z), ...)
    delta1: PolicyShift | None = None
    delta2: PolicyShift | None = None
    custom_terms: tuple = ()

    def __post_init__(self):
        if self.kind not in (ATE, ATT, LATE, LATE_GROUP_PROB, PRTE,
                             PRTE_SUBGROUP_PROB, PRTE_COND, PRTE_COND_PROB, CUSTOM):
            raise TargetError(f"unknown target kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class TargetTerms:
    """terms: list of (x, l, d, weight, RectUnion); constant adds directly
    to the parameter (used by pure-probability targets).  denominators keeps
    the conditioning masses that went into the weights."""

    terms: tuple
    constant: float = 0.0
    denominators: dict = field(default_factory=dict)

    @property
    def is_constant(self) -> bool:
        return not self.terms


def _dist_for(dist, x):
    return dist[x] if isinstance(dist, dict) else dist


def _check_pair(model, d1, d2):
    if d1 not in model.treatments or d2 not in model.treatments:
        raise TargetError(f"treatments ({d1},{d2}) outside the model")


def _p_treated(model, dist, g, p_xz, d) -> float:
    total = 0.0
    for x in model.covariates:
        dx = _dist_for(dist, x)
        for z in model.instruments:
            total += p_xz[(x, z)] * dx.measure(selection.regions(model, g, z, x)[d])
    return total


def _shifted(model, g, delta):
    if delta is None:
        return g
    return selection.shift(model, g, delta)


def compile_target(spec: TargetSpec, model: SelectionModel, g: Thresholds,
                   dist, p_x: dict, p_xz: dict) -> TargetTerms:
    """Build the term list for one target at identified thresholds g.

    p_x maps x to P(X=x); p_xz maps (x,z) to P(X=x,Z=z).  Raises
    TargetUndefined when a conditioning mass falls below the floor.
    """
    J = model.dim

    if spec.kind == ATE:
        _check_pair(model, spec.d1, spec.d2)
        terms = []
        for x in model.covariates:
            full = RectUnion.full(J)
            terms.append((x, 0, spec.d1, p_x[x], full))
            terms.append((x, 0, spec.d2, -p_x[x], full))
        return TargetTerms(tuple(terms))

    if spec.kind == ATT:
        _check_pair(model, spec.d1, spec.d2)
        p_d = _p_treated(model, dist, g, p_xz, spec.d1)
        if p_d < MASS_FLOOR:
            raise TargetUndefined(p_d, f"P(D={spec.d1}) = {p_d}")
        terms = []
        for x in model.covariates:
            for z in model.instruments:
                region = selection.regions(model, g, z, x)[spec.d1]
                w = p_xz[(x, z)] / p_d
                terms.append((x, z, spec.d1, w, region))
                terms.append((x, z, spec.d2, -w, region))
        return TargetTerms(tuple(terms), denominators={"p_d": p_d})

    if spec.kind in (LATE, LATE_GROUP_PROB):
        dz = dict(spec.dz)
        if not dz:
            raise TargetError("LATE needs a response pattern over instruments")
        groups = {}
        for x in model.covariates:
            s = RectUnion.full(J)
            for z, d_z in spec.dz:
                s = intersect(s, selection.regions(model, g, z, x)[d_z])
            groups[x] = s
        mass = sum(p_x[x] * _dist_for(dist, x).measure(groups[x])
                   for x in model.covariates)
        if spec.kind == LATE_GROUP_PROB:
            return TargetTerms((), constant=mass, denominators={"group_mass": mass})
        _check_pair(model, spec.d1, spec.d2)
        if mass < MASS_FLOOR:
            raise TargetUndefined(mass, f"response-group mass {mass}")
        terms = []
        for x in model.covariates:
            w = p_x[x] / mass
            terms.append((x, 0, spec.d1, w, groups[x]))
            terms.append((x, 0, spec.d2, -w, groups[x]))
        return TargetTerms(tuple(terms), denominators={"group_mass": mass})

    if spec.kind in (PRTE, PRTE_SUBGROUP_PROB):
        g1 = _shifted(model, g, spec.delta1)
        g2 = _shifted(model, g, spec.delta2)
        # mass of those unaffected: same treatment under both policies
        stay = 0.0
        for x in model.covariates:
            dx = _dist_for(dist, x)
            for z in model.instruments:
                r1 = selection.regions(model, g1, z, x)
                r2 = selection.regions(model, g2, z, x)
                for d in model.treatments:
                    stay += p_xz[(x, z)] * dx.measure(intersect(r1[d], r2[d]))
        moved = 1.0 - stay
        if spec.kind == PRTE_SUBGROUP_PROB:
            moved = max(moved, 0.0)
            return TargetTerms((), constant=moved, denominators={"moved_mass": moved})
        if moved < MASS_FLOOR:
            raise TargetUndefined(moved, f"affected-subgroup mass {moved}")
        terms = []
        for x in model.covariates:
            for z in model.instruments:
                r1 = selection.regions(model, g1, z, x)
                r2 = selection.regions(model, g2, z, x)
                for d in model.treatments:
                    terms.append((x, (z, 1), d, p_xz[(x, z)] / moved, r1[d]))
                    terms.append((x, (z, 2), d, -p_xz[(x, z)] / moved, r2[d]))
        return TargetTerms(tuple(terms), denominators={"moved_mass": moved})

    if spec.kind in (PRTE_COND, PRTE_COND_PROB):
        _check_pair(model, spec.d1, spec.d2)
        g1 = _shifted(model, g, spec.delta1)
        g2 = _shifted(model, g, spec.delta2)
        sets = {}
        mass = 0.0
        for x in model.covariates:
            dx = _dist_for(dist, x)
            for z in model.instruments:
                s = intersect(selection.regions(model, g1, z, x)[spec.d1],
                              selection.regions(model, g2, z, x)[spec.d2])
                sets[(x, z)] = s
                mass += p_xz[(x, z)] * dx.measure(s)
        if spec.kind == PRTE_COND_PROB:
            return TargetTerms((), constant=mass, denominators={"group_mass": mass})
        if mass < MASS_FLOOR:
            raise TargetUndefined(mass, f"policy-response-group mass {mass}")
        terms = []
        for x in model.covariates:
            for z in model.instruments:
                w = p_xz[(x, z)] / mass
                terms.append((x, z, spec.d1, w, sets[(x, z)]))
                terms.append((x, z, spec.d2, -w, sets[(x, z)]))
        return TargetTerms(tuple(terms), denominators={"group_mass": mass})

    # custom: explicit term list, endpoints must come from thresholds or 0/1
    allowed = {0.0, 1.0} | {round(v, 15) for v in g.g.values()}
    for (x, l, d, w, s) in spec.custom_terms:
        if d not in model.treatments:
            raise TargetError(f"custom term references treatment {d}")
        for r in s.rects:
            for v in (*r.lo, *r.hi):
                if not any(abs(v - a) <= 1e-9 for a in allowed):
                    raise TargetError(
                        f"custom set endpoint {v} is not a threshold value or 0/1")
    return TargetTerms(tuple(spec.custom_terms))
