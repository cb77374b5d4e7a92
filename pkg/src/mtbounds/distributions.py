"""Joint laws of the selection unobservables U on [0,1]^J.

Every family has uniform marginals.  The families are the independence
copula, the bivariate Gaussian copula and finite mixtures of it, and the
singular three-dimensional law induced by a latent additive-utility pair
(U_3 is a deterministic function of the first two coordinates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._jit import maybe_jit
from .geometry import Rect, RectUnion

NORM_INF = kernels.NORM_INF


class DistributionError(ValueError):
    pass


class DegenerateConditioning(DistributionError):
    """Conditioning interval has zero length; the caller should drop the
    constraint."""


@maybe_jit
def _norm_cdf_arr(x):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = kernels.norm_cdf(x[i])
    return out


def norm_cdf_arr(x):
    return _norm_cdf_arr(np.ascontiguousarray(x, dtype=np.float64))


def _ppf_clip(u, scale=1.0):
    """Normal quantile with infinities clipped to +-NORM_INF*scale."""
    if u <= 0.0:
        return -NORM_INF * scale
    if u >= 1.0:
        return NORM_INF * scale
    return kernels.norm_ppf(u)


def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


_GL_X, _GL_W = _gauss_legendre(12)


def _panel_nodes(a, b, n_panels=4):
    """Gauss-Legendre nodes/weights over [a,b] split into equal panels."""
    if b <= a:
        return np.empty(0), np.empty(0)
    edges = np.linspace(a, b, n_panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        xs.append(mid + half * _GL_X)
        ws.append(half * _GL_W)
    return np.concatenate(xs), np.concatenate(ws)


class UDistribution:
    """Base class: rectangle measures, conditional measures, quadrature."""

    dim: int

    def rect_measure(self, r: Rect) -> float:
        raise NotImplementedError

    def measure(self, s: RectUnion | Rect) -> float:
        if isinstance(s, Rect):
            return self.rect_measure(s)
        if s.dim != self.dim:
            raise DistributionError("dimension mismatch")
        return float(sum(self.rect_measure(r) for r in s.rects))

    def cond_prob(self, r: Rect, j: int, interval) -> float:
        """P(U in r | U_j in interval); marginals are uniform so the
        conditioning event has probability equal to the interval length."""
        lo, hi = interval
        if hi - lo <= 0.0:
            raise DegenerateConditioning(f"interval {interval} in dim {j}")
        slab_lo = list((0.0,) * self.dim)
        slab_hi = list((1.0,) * self.dim)
        slab_lo[j], slab_hi[j] = lo, hi
        clipped = r.intersect(Rect(tuple(slab_lo), tuple(slab_hi)))
        if clipped is None:
            return 0.0
        return self.rect_measure(clipped) / (hi - lo)

    def quad_points(self, r: Rect):
        """Points/weights approximating integrals of smooth f over r under
        this law: sum(w * f(points)) ~ int_r f dF."""
        raise NotImplementedError

    def cond_quad_points(self, j: int, u_j: float):
        """Points/weights for E[f(U) | U_j = u_j]; weights sum to ~1."""
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Independence(UDistribution):
    dim: int = 2

    def rect_measure(self, r: Rect) -> float:
        return r.volume()

    def quad_points(self, r: Rect):
        axes = [_panel_nodes(a, b, 1) for a, b in zip(r.lo, r.hi)]
        pts = np.stack([g.ravel() for g in np.meshgrid(*[x for x, _ in axes], indexing="ij")], axis=1)
        w = np.ones(1)
        for _, wj in axes:
            w = np.multiply.outer(w, wj).ravel()
        return pts, w

    def cond_quad_points(self, j: int, u_j: float):
        axes = []
        for i in range(self.dim):
            if i == j:
                axes.append((np.array([u_j]), np.array([1.0])))
            else:
                axes.append(_panel_nodes(0.0, 1.0, 1))
        pts = np.stack([g.ravel() for g in np.meshgrid(*[x for x, _ in axes], indexing="ij")], axis=1)
        w = np.ones(1)
        for _, wj in axes:
            w = np.multiply.outer(w, wj).ravel()
        return pts, w

    def sample(self, n, rng):
        return rng.random((n, self.dim))


@dataclass(frozen=True)
class GaussianCopula2(UDistribution):
    """Bivariate Gaussian copula; rho = +-1 degenerates to the comonotone /
    countermonotone copulas and is handled analytically."""

    rho: float
    dim: int = 2

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise DistributionError(f"rho={self.rho} outside [-1,1]")

    def cdf(self, u: float, v: float) -> float:
        u = min(max(u, 0.0), 1.0)
        v = min(max(v, 0.0), 1.0)
        if u == 0.0 or v == 0.0:
            return 0.0
        if self.rho >= 1.0:
            return min(u, v)
        if self.rho <= -1.0:
            return max(u + v - 1.0, 0.0)
        if u == 1.0:
            return v
        if v == 1.0:
            return u
        return kernels.bvn_cdf(kernels.norm_ppf(u), kernels.norm_ppf(v), self.rho)

    def rect_measure(self, r: Rect) -> float:
        (a1, a2), (b1, b2) = r.lo, r.hi
        m = (self.cdf(b1, b2) - self.cdf(a1, b2) - self.cdf(b1, a2) + self.cdf(a1, a2))
        return min(max(m, 0.0), 1.0)

    def quad_points(self, r: Rect):
        if abs(self.rho) >= 1.0:
            raise DistributionError("quadrature undefined at rho = +-1")
        rho = self.rho
        s = math.sqrt(1.0 - rho * rho)
        x_nodes, x_w = _panel_nodes(_ppf_clip(r.lo[0]), _ppf_clip(r.hi[0]), 6)
        ylo, yhi = _ppf_clip(r.lo[1]), _ppf_clip(r.hi[1])
        pts, ws = [], []
        for x, wx in zip(x_nodes, x_w):
            lo = max(ylo, rho * x - 8.5 * s)
            hi = min(yhi, rho * x + 8.5 * s)
            if hi <= lo:
                continue
            y_nodes, y_w = _panel_nodes(lo, hi, 4)
            wy = y_w * np.exp(-0.5 * ((y_nodes - rho * x) / s) ** 2) / (s * math.sqrt(2 * math.pi))
            u = norm_cdf_arr(y_nodes)
            pts.append(np.column_stack([np.full_like(u, kernels.norm_cdf(x)), u]))
            ws.append(wx * kernels.norm_pdf(x) * wy)
        if not pts:
            return np.empty((0, 2)), np.empty(0)
        return np.concatenate(pts), np.concatenate(ws)

    def cond_quad_points(self, j: int, u_j: float):
        if abs(self.rho) >= 1.0:
            raise DistributionError("conditioning undefined at rho = +-1")
        rho = self.rho
        s = math.sqrt(1.0 - rho * rho)
        x = kernels.norm_ppf(min(max(u_j, 1e-15), 1 - 1e-15))
        y_nodes, y_w = _panel_nodes(rho * x - 8.5 * s, rho * x + 8.5 * s, 6)
        w = y_w * np.exp(-0.5 * ((y_nodes - rho * x) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        u_other = norm_cdf_arr(y_nodes)
        pts = np.empty((u_other.size, 2))
        pts[:, j] = u_j
        pts[:, 1 - j] = u_other
        return pts, w

    def sample(self, n, rng):
        if self.rho >= 1.0:
            u = rng.random(n)
            return np.column_stack([u, u])
        if self.rho <= -1.0:
            u = rng.random(n)
            return np.column_stack([u, 1.0 - u])
        z1 = rng.standard_normal(n)
        z2 = self.rho * z1 + math.sqrt(1 - self.rho ** 2) * rng.standard_normal(n)
        return np.column_stack([norm_cdf_arr(z1), norm_cdf_arr(z2)])


@dataclass(frozen=True)
class GaussianMixtureCopula2(UDistribution):
    """Finite mixture of bivariate Gaussian copulas (still uniform
    marginals); each component correlation must lie strictly inside (-1,1)."""

    weights: tuple[float, ...]
    rhos: tuple[float, ...]
    dim: int = 2

    def __post_init__(self):
        if len(self.weights) != len(self.rhos) or not self.weights:
            raise DistributionError("weights/rhos length mismatch")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
            raise DistributionError("weights must be nonnegative and sum to 1")
        if any(not -1.0 < r < 1.0 for r in self.rhos):
            raise DistributionError("component rho must be in (-1,1)")

    def _components(self):
        return [GaussianCopula2(r) for r in self.rhos]

    def rect_measure(self, r: Rect) -> float:
        return float(sum(w * c.rect_measure(r) for w, c in zip(self.weights, self._components())))

    def quad_points(self, r: Rect):
        pts, ws = [], []
        for w, c in zip(self.weights, self._components()):
            p, q = c.quad_points(r)
            pts.append(p)
            ws.append(w * q)
        return np.concatenate(pts), np.concatenate(ws)

    def cond_quad_points(self, j, u_j):
        # component marginals are uniform, so mixture weights are unchanged
        # by conditioning on U_j
        pts, ws = [], []
        for w, c in zip(self.weights, self._components()):
            p, q = c.cond_quad_points(j, u_j)
            pts.append(p)
            ws.append(w * q)
        return np.concatenate(pts), np.concatenate(ws)

    def sample(self, n, rng):
        idx = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        out = np.empty((n, 2))
        for m, c in enumerate(self._components()):
            mask = idx == m
            if mask.any():
                out[mask] = c.sample(int(mask.sum()), rng)
        return out


@dataclass(frozen=True)
class MultinomialLatent(UDistribution):
    """Singular law on [0,1]^3 from a latent pair (T1, T2) distributed as a
    mixture of standard bivariate normals with correlations rhos:

        U_1 = Phi(T1),  U_2 = Phi(T2),  U_3 = F_diff(T1 - T2),

    where F_diff is the CDF of T1 - T2 (a mixture of N(0, 2-2*rho_m))."""

    weights: tuple[float, ...]
    rhos: tuple[float, ...]
    dim: int = 3

    def __post_init__(self):
        if len(self.weights) != len(self.rhos) or not self.weights:
            raise DistributionError("weights/rhos length mismatch")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
            raise DistributionError("weights must be nonnegative and sum to 1")
        if any(not -1.0 < r < 1.0 for r in self.rhos):
            raise DistributionError("component rho must be in (-1,1)")

    @classmethod
    def probit(cls, rho: float) -> "MultinomialLatent":
        return cls((1.0,), (rho,))

    def _diff_sds(self):
        return [math.sqrt(2.0 - 2.0 * r) for r in self.rhos]

    def diff_cdf(self, t: float) -> float:
        return float(sum(w * kernels.norm_cdf(t / s)
                         for w, s in zip(self.weights, self._diff_sds())))

    def diff_cdf_arr(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros_like(t)
        for w, s in zip(self.weights, self._diff_sds()):
            out += w * norm_cdf_arr(t / s)
        return out

    def diff_ppf(self, q: float) -> float:
        """Inverse of diff_cdf by bisection to 1e-12 (argument scale)."""
        if q <= 0.0:
            return -2.0 * NORM_INF
        if q >= 1.0:
            return 2.0 * NORM_INF
        lo, hi = -2.0 * NORM_INF, 2.0 * NORM_INF
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if self.diff_cdf(mid) < q:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def rect_measure(self, r: Rect) -> float:
        (a1, a2, a3), (b1, b2, b3) = r.lo, r.hi
        t_lo, t_hi = _ppf_clip(a1), _ppf_clip(b1)
        y_lo, y_hi = _ppf_clip(a2), _ppf_clip(b2)
        q_lo, q_hi = self.diff_ppf(a3), self.diff_ppf(b3)
        tol = 1e-9 / len(self.weights)
        total = 0.0
        for w, rho in zip(self.weights, self.rhos):
            total += w * kernels.latent_component_measure(
                t_lo, t_hi, rho, y_lo, y_hi, q_lo, q_hi, tol)
        return min(max(total, 0.0), 1.0)

    # -- latent choice probabilities used for threshold identification -----

    def p_choose0(self, g1t: float, g2t: float) -> float:
        """P(T1 > g1t, T2 > g2t)."""
        total = 0.0
        for w, rho in zip(self.weights, self.rhos):
            total += w * (1.0 - kernels.norm_cdf(g1t) - kernels.norm_cdf(g2t)
                          + kernels.bvn_cdf(g1t, g2t, rho))
        return total

    def p_choose1(self, g1t: float, g2t: float) -> float:
        """P(T1 <= g1t, T2 - T1 > g2t - g1t), in closed form via the joint
        normality of (T1, T2 - T1) within each component."""
        total = 0.0
        for w, rho in zip(self.weights, self.rhos):
            sd = math.sqrt(2.0 - 2.0 * rho)
            if sd < 1e-12:
                total += w * (kernels.norm_cdf(g1t) if g1t > g2t else 0.0)
                continue
            corr = -math.sqrt((1.0 - rho) / 2.0)
            total += w * (kernels.norm_cdf(g1t)
                          - kernels.bvn_cdf(g1t, (g2t - g1t) / sd, corr))
        return total

    def quad_points(self, r: Rect):
        (a1, a2, a3), (b1, b2, b3) = r.lo, r.hi
        t_lo, t_hi = max(_ppf_clip(a1), -8.5), min(_ppf_clip(b1), 8.5)
        y_lo, y_hi = _ppf_clip(a2), _ppf_clip(b2)
        q_lo, q_hi = self.diff_ppf(a3), self.diff_ppf(b3)
        pts, ws = [], []
        kink = sorted({t_lo, t_hi} | {v for v in (y_hi + q_lo, y_lo + q_hi,
                                                  y_lo + q_lo, y_hi + q_hi)
                                      if t_lo < v < t_hi})
        for w, rho in zip(self.weights, self.rhos):
            s = math.sqrt(1.0 - rho * rho)
            for seg_lo, seg_hi in zip(kink[:-1], kink[1:]):
                t_nodes, t_w = _panel_nodes(seg_lo, seg_hi, 4)
                for t, wt in zip(t_nodes, t_w):
                    lo = max(y_lo, t - q_hi, rho * t - 8.5 * s)
                    hi = min(y_hi, t - q_lo, rho * t + 8.5 * s)
                    if hi <= lo:
                        continue
                    y_nodes, y_w = _panel_nodes(lo, hi, 3)
                    wy = y_w * np.exp(-0.5 * ((y_nodes - rho * t) / s) ** 2) / (s * math.sqrt(2 * math.pi))
                    u2 = norm_cdf_arr(y_nodes)
                    u3 = self.diff_cdf_arr(t - y_nodes)
                    pts.append(np.column_stack([np.full_like(u2, kernels.norm_cdf(t)), u2, u3]))
                    ws.append(w * wt * kernels.norm_pdf(t) * wy)
        if not pts:
            return np.empty((0, 3)), np.empty(0)
        return np.concatenate(pts), np.concatenate(ws)

    def cond_quad_points(self, j: int, u_j: float):
        if j in (0, 1):
            t = kernels.norm_ppf(min(max(u_j, 1e-15), 1 - 1e-15))
            pts, ws = [], []
            for w, rho in zip(self.weights, self.rhos):
                s = math.sqrt(1.0 - rho * rho)
                y_nodes, y_w = _panel_nodes(rho * t - 8.5 * s, rho * t + 8.5 * s, 6)
                wy = w * y_w * np.exp(-0.5 * ((y_nodes - rho * t) / s) ** 2) / (s * math.sqrt(2 * math.pi))
                u_other = norm_cdf_arr(y_nodes)
                if j == 0:
                    u3 = self.diff_cdf_arr(t - y_nodes)
                    pts.append(np.column_stack([np.full_like(u_other, u_j), u_other, u3]))
                else:
                    u3 = self.diff_cdf_arr(y_nodes - t)
                    pts.append(np.column_stack([u_other, np.full_like(u_other, u_j), u3]))
                ws.append(wy)
            return np.concatenate(pts), np.concatenate(ws)
        # conditioning on the difference coordinate: T1 - T2 = c fixed;
        # within component m, T1 | diff=c ~ N(c/2, (1+rho)/2) and component
        # weights reweight by the component density of the difference at c
        c = self.diff_ppf(min(max(u_j, 1e-15), 1 - 1e-15))
        dens = np.array([w * kernels.norm_pdf(c / s) / s
                         for w, s in zip(self.weights, self._diff_sds())])
        if dens.sum() <= 0.0:
            dens = np.asarray(self.weights, dtype=float)
        dens = dens / dens.sum()
        pts, ws = [], []
        for wm, rho in zip(dens, self.rhos):
            sd = math.sqrt((1.0 + rho) / 2.0)
            y_nodes, y_w = _panel_nodes(0.5 * c - 8.5 * sd, 0.5 * c + 8.5 * sd, 6)
            wy = wm * y_w * np.exp(-0.5 * ((y_nodes - 0.5 * c) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
            u1 = norm_cdf_arr(y_nodes)
            u2 = norm_cdf_arr(y_nodes - c)
            pts.append(np.column_stack([u1, u2, np.full_like(u1, u_j)]))
            ws.append(wy)
        return np.concatenate(pts), np.concatenate(ws)

    def sample(self, n, rng):
        idx = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        t1 = rng.standard_normal(n)
        t2 = np.empty(n)
        for m, rho in enumerate(self.rhos):
            mask = idx == m
            t2[mask] = rho * t1[mask] + math.sqrt(1 - rho ** 2) * rng.standard_normal(int(mask.sum()))
        return np.column_stack([norm_cdf_arr(t1), norm_cdf_arr(t2), self.diff_cdf_arr(t1 - t2)])
