"""Threshold-crossing selection models: region encodings, policy shifts,
and point identification of thresholds from choice moments for a given
dependence parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import kernels
from .distributions import MultinomialLatent, UDistribution
from .geometry import Rect, RectUnion

BINARY = "binary"
SEQUENTIAL = "sequential"
DOUBLE_HURDLE = "double_hurdle"
MULTINOMIAL = "multinomial"

_MODEL_DIMS = {BINARY: 1, SEQUENTIAL: 2, DOUBLE_HURDLE: 2, MULTINOMIAL: 3}
_MODEL_TREATMENTS = {BINARY: (0, 1), SEQUENTIAL: (0, 1, 2),
                     DOUBLE_HURDLE: (0, 1), MULTINOMIAL: (0, 1, 2)}


class SelectionError(ValueError):
    pass


class ShiftError(SelectionError):
    """Policy shift pushes a normalized threshold outside [0,1], or its
    scale does not match the model."""


class IdentificationFailure(RuntimeError):
    """Numerical non-convergence in threshold identification (distinct from
    a data-rejected model)."""


@dataclass(frozen=True)
class SelectionModel:
    kind: str
    instruments: tuple
    covariates: tuple = ((),)
    anchor_z1: object = None  # double hurdle: the Z1 point with known first threshold

    def __post_init__(self):
        if self.kind not in _MODEL_DIMS:
            raise SelectionError(f"unknown model kind {self.kind!r}")
        if self.kind == DOUBLE_HURDLE:
            for z in self.instruments:
                if not (isinstance(z, tuple) and len(z) == 2):
                    raise SelectionError("double hurdle instruments must be (z1, z2) pairs")
            if self.anchor_z1 is None:
                raise SelectionError("double hurdle needs an anchor Z1 point")
            if self.anchor_z1 not in {z[0] for z in self.instruments}:
                raise SelectionError("anchor Z1 point not in the instrument support")

    @property
    def dim(self) -> int:
        return _MODEL_DIMS[self.kind]

    @property
    def treatments(self) -> tuple:
        return _MODEL_TREATMENTS[self.kind]

    @property
    def z1_support(self):
        return tuple(dict.fromkeys(z[0] for z in self.instruments))

    @property
    def z2_support(self):
        return tuple(dict.fromkeys(z[1] for z in self.instruments))


@dataclass(frozen=True, eq=False)
class Thresholds:
    """Normalized thresholds g[(j, z, x)] in [0,1]; for the multinomial
    model also the latent-scale pair per (z, x) together with the latent law
    needed to recompute the third threshold after a shift."""

    g: dict
    tilde: dict = field(default_factory=dict)
    latent: MultinomialLatent | None = None

    def __getitem__(self, key):
        return self.g[key]


@dataclass(frozen=True)
class Rejected:
    """The (model, dependence-parameter) pair is inconsistent with the
    observed choice moments.  A regular outcome, not an error."""

    max_residual: float
    offending: tuple | None = None
    detail: str = ""


@dataclass(frozen=True, eq=False)
class PolicyShift:
    delta: dict  # (j, z, x) -> shift
    scale: str = "normalized"  # "normalized" or "tilde"

    def value(self, j, z, x):
        return self.delta.get((j, z, x), 0.0)


def _dist_for(dist, x) -> UDistribution:
    return dist[x] if isinstance(dist, dict) else dist


def regions(model: SelectionModel, g: Thresholds, z, x) -> dict:
    """Treatment -> region of [0,1]^J, exactly as each model's threshold
    encoding prescribes."""
    if model.kind == BINARY:
        g1 = g[(1, z, x)]
        return {
            1: RectUnion.of(Rect((0.0,), (g1,))),
            0: RectUnion.of(Rect((g1,), (1.0,))),
        }
    if model.kind == SEQUENTIAL:
        g1, g2 = g[(1, z, x)], g[(2, z, x)]
        return {
            0: RectUnion.of(Rect((g1, 0.0), (1.0, 1.0))),
            1: RectUnion.of(Rect((0.0, g2), (g1, 1.0))),
            2: RectUnion.of(Rect((0.0, 0.0), (g1, g2))),
        }
    if model.kind == DOUBLE_HURDLE:
        g1, g2 = g[(1, z, x)], g[(2, z, x)]
        return {
            1: RectUnion.of(Rect((0.0, 0.0), (g1, g2))),
            0: RectUnion.of(Rect((g1, 0.0), (1.0, 1.0)),
                            Rect((0.0, g2), (g1, 1.0))),
        }
    g1, g2, g3 = g[(1, z, x)], g[(2, z, x)], g[(3, z, x)]
    return {
        0: RectUnion.of(Rect((g1, g2, 0.0), (1.0, 1.0, 1.0))),
        1: RectUnion.of(Rect((0.0, 0.0, 0.0), (g1, 1.0, g3))),
        2: RectUnion.of(Rect((0.0, 0.0, g3), (1.0, g2, 1.0))),
    }


def choice_moments(model: SelectionModel, dist, g: Thresholds) -> dict:
    """Forward map: (d, z, x) -> P(D=d | Z=z, X=x) via region measures."""
    out = {}
    for x in model.covariates:
        dx = _dist_for(dist, x)
        for z in model.instruments:
            for d, region in regions(model, g, z, x).items():
                out[(d, z, x)] = dx.measure(region)
    return out


def _copula_cdf(dist: UDistribution, u1: float, u2: float) -> float:
    return dist.rect_measure(Rect((0.0, 0.0), (min(u1, 1.0), min(u2, 1.0))))


def _bisect(f, lo, hi, arg_tol=1e-12):
    """Root of increasing f on [lo, hi] by bisection."""
    flo, fhi = f(lo), f(hi)
    if flo > 0.0 or fhi < 0.0:
        return None
    while hi - lo > arg_tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _check_forward(model, dist, thr, P, eps_feas):
    worst, arg = 0.0, None
    fwd = choice_moments(model, dist, thr)
    for key, p in fwd.items():
        resid = abs(p - P[key])
        if resid > worst:
            worst, arg = resid, key
    if worst > eps_feas:
        return Rejected(worst, arg, "forward choice moments do not match the data")
    return None


def identify_thresholds(model: SelectionModel, dist, P: dict,
                        eps_feas: float = 1e-8, anchor=None):
    """Point-identify thresholds at the given dependence parameter.

    P maps (d, z, x) to choice probabilities.  Returns Thresholds, or
    Rejected when no thresholds reproduce the moments.  Raises
    IdentificationFailure on numerical non-convergence.
    """
    g = {}
    if model.kind == BINARY:
        for x in model.covariates:
            for z in model.instruments:
                g[(1, z, x)] = P[(1, z, x)]
        thr = Thresholds(g)

    elif model.kind == SEQUENTIAL:
        for x in model.covariates:
            dx = _dist_for(dist, x)
            for z in model.instruments:
                g1 = 1.0 - P[(0, z, x)]
                p1 = P[(1, z, x)]
                # F_x(g1, g2) = g1 - p1; LHS runs from 0 (g2=0) to g1 (g2=1)
                target = g1 - p1
                if target < -eps_feas or target > g1 + eps_feas:
                    return Rejected(abs(min(target, g1 - target)), (1, z, x),
                                    "sequential second-stage moment out of range")
                g2 = _bisect(lambda v: _copula_cdf(dx, g1, v) - target, 0.0, 1.0)
                if g2 is None:
                    return Rejected(abs(target), (1, z, x), "no bracketing root")
                g[(1, z, x)] = g1
                g[(2, z, x)] = g2
        thr = Thresholds(g)

    elif model.kind == DOUBLE_HURDLE:
        if anchor is None:
            raise SelectionError("double hurdle identification needs the anchor value")
        z1p = model.anchor_z1
        for x in model.covariates:
            dx = _dist_for(dist, x)
            a = anchor[x] if isinstance(anchor, dict) else anchor
            g1x = {z1p: a}
            g2x = {}
            for z2 in model.z2_support:
                p1 = P[(1, (z1p, z2), x)]
                if p1 > a + eps_feas:
                    return Rejected(p1 - a, (1, (z1p, z2), x),
                                    "treated share exceeds the anchor threshold")
                g2 = _bisect(lambda v: _copula_cdf(dx, a, v) - p1, 0.0, 1.0)
                if g2 is None:
                    return Rejected(p1, (1, (z1p, z2), x), "no bracketing root")
                g2x[z2] = g2
            z2p = model.z2_support[0]
            for z1 in model.z1_support:
                if z1 == z1p:
                    continue
                p1 = P[(1, (z1, z2p), x)]
                if p1 > g2x[z2p] + eps_feas:
                    return Rejected(p1 - g2x[z2p], (1, (z1, z2p), x),
                                    "treated share exceeds the second threshold")
                g1 = _bisect(lambda v: _copula_cdf(dx, v, g2x[z2p]) - p1, 0.0, 1.0)
                if g1 is None:
                    return Rejected(p1, (1, (z1, z2p), x), "no bracketing root")
                g1x[z1] = g1
            for z in model.instruments:
                g[(1, z, x)] = g1x[z[0]]
                g[(2, z, x)] = g2x[z[1]]
        thr = Thresholds(g)

    elif model.kind == MULTINOMIAL:
        if not isinstance(dist, MultinomialLatent) and not isinstance(dist, dict):
            raise SelectionError("multinomial model needs a MultinomialLatent law")
        tilde = {}
        for x in model.covariates:
            dx = _dist_for(dist, x)
            for z in model.instruments:
                sol = _solve_latent_pair(dx, P[(0, z, x)], P[(1, z, x)])
                if sol is None:
                    return Rejected(1.0, (0, z, x), "latent system has no solution")
                tilde[(z, x)] = sol
        latent = _dist_for(dist, model.covariates[0])
        for x in model.covariates:
            dx = _dist_for(dist, x)
            for z in model.instruments:
                g1t, g2t = tilde[(z, x)]
                g[(1, z, x)] = kernels.norm_cdf(g1t)
                g[(2, z, x)] = kernels.norm_cdf(g2t)
                g[(3, z, x)] = dx.diff_cdf(g1t - g2t)
        thr = Thresholds(g, tilde, latent)

    else:  # pragma: no cover
        raise SelectionError(model.kind)

    rej = _check_forward(model, dist, thr, P, eps_feas)
    return rej if rej is not None else thr


_LATENT_BOX = 40.0


def _solve_latent_pair(dx: MultinomialLatent, p0: float, p1: float,
                       tol: float = 1e-10, max_iter: int = 200):
    """Solve p_choose0(a,b) = p0, p_choose1(a,b) = p1 for the latent pair by
    damped Newton with a finite-difference Jacobian; falls back on nested
    bisection exploiting that p_choose0 is decreasing in both arguments and
    p_choose1 is increasing along the p0-level curve."""
    p2 = 1.0 - p0 - p1
    if min(p0, p1, p2) < -1e-9:
        return None
    start = kernels.norm_ppf(min(max(1.0 - math.sqrt(max(p0, 1e-12)), 1e-12), 1 - 1e-12))
    a, b = start, start

    def res(a, b):
        return dx.p_choose0(a, b) - p0, dx.p_choose1(a, b) - p1

    r1, r2 = res(a, b)
    for _ in range(max_iter):
        nrm = math.hypot(r1, r2)
        if nrm < tol:
            return a, b
        h = 1e-6
        j11 = (dx.p_choose0(a + h, b) - dx.p_choose0(a - h, b)) / (2 * h)
        j12 = (dx.p_choose0(a, b + h) - dx.p_choose0(a, b - h)) / (2 * h)
        j21 = (dx.p_choose1(a + h, b) - dx.p_choose1(a - h, b)) / (2 * h)
        j22 = (dx.p_choose1(a, b + h) - dx.p_choose1(a, b - h)) / (2 * h)
        det = j11 * j22 - j12 * j21
        if abs(det) < 1e-16:
            break
        da = -(j22 * r1 - j12 * r2) / det
        db = -(-j21 * r1 + j11 * r2) / det
        step = 1.0
        improved = False
        while step > 1e-6:
            na = min(max(a + step * da, -_LATENT_BOX), _LATENT_BOX)
            nb = min(max(b + step * db, -_LATENT_BOX), _LATENT_BOX)
            n1, n2 = res(na, nb)
            if math.hypot(n1, n2) < nrm:
                a, b, r1, r2 = na, nb, n1, n2
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    if math.hypot(*res(a, b)) < tol:
        return a, b

    # fallback: nested bisection
    def b_of_a(a):
        # p_choose0 is strictly decreasing in b
        out = _bisect(lambda v: -(dx.p_choose0(a, v) - p0), -_LATENT_BOX, _LATENT_BOX)
        return out

    def outer(a):
        bb = b_of_a(a)
        if bb is None:
            # no b matches p0 at this a: decide which side of the root we
            # are on from the direction of the miss (p_choose0 decreases
            # in both arguments, so large a undershoots p0 everywhere)
            if dx.p_choose0(a, -_LATENT_BOX) - p0 < 0.0:
                return math.inf
            if dx.p_choose0(a, _LATENT_BOX) - p0 > 0.0:
                return -math.inf
            return None
        return dx.p_choose1(a, bb) - p1

    lo, hi = -_LATENT_BOX, _LATENT_BOX
    flo, fhi = outer(lo), outer(hi)
    if flo is None or fhi is None or flo > 0.0 or fhi < 0.0:
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = outer(mid)
        if fm is None:
            return None
        if fm < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-11:
            break
    a = 0.5 * (lo + hi)
    b = b_of_a(a)
    if b is None or math.hypot(*res(a, b)) > 100 * tol:
        raise IdentificationFailure(
            f"latent pair solve did not converge (residual {math.hypot(*res(a, b)) if b is not None else 'n/a'})")
    return a, b


def shift(model: SelectionModel, g: Thresholds, delta: PolicyShift) -> Thresholds:
    """Apply a policy shift to the thresholds.

    The multinomial model only admits latent-scale shifts: a free shift of
    the third normalized threshold would break its deterministic relation to
    the first two, so normalized-scale shifts are refused there.
    """
    if model.kind == MULTINOMIAL:
        if delta.scale != "tilde":
            raise ShiftError("multinomial shifts must be on the latent (tilde) scale")
        tilde = {}
        g_new = {}
        for x in model.covariates:
            for z in model.instruments:
                g1t, g2t = g.tilde[(z, x)]
                g1t += delta.value(1, z, x)
                g2t += delta.value(2, z, x)
                tilde[(z, x)] = (g1t, g2t)
                g_new[(1, z, x)] = kernels.norm_cdf(g1t)
                g_new[(2, z, x)] = kernels.norm_cdf(g2t)
                g_new[(3, z, x)] = g.latent.diff_cdf(g1t - g2t)
        return Thresholds(g_new, tilde, g.latent)
    if delta.scale != "normalized":
        raise ShiftError(f"{model.kind} shifts must be on the normalized scale")
    g_new = {}
    for (j, z, x), v in g.g.items():
        nv = v + delta.value(j, z, x)
        if not 0.0 <= nv <= 1.0 + 1e-12:
            raise ShiftError(f"shifted threshold g[{j},{z},{x}] = {nv} outside [0,1]")
        g_new[(j, z, x)] = min(nv, 1.0)
    return Thresholds(g_new)
