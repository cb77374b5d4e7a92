"""Scalar numeric kernels: normal CDF/quantile, bivariate normal CDF, and
adaptive quadrature for the latent multinomial law.

Everything here is plain math/numpy so it can be compiled with numba or run
as-is when the fallback path is selected (see :mod:`mtbounds._jit`).
"""

import math

import numpy as np

from ._jit import maybe_jit

INV_SQRT2 = 1.0 / math.sqrt(2.0)
TWO_PI = 2.0 * math.pi

# Effective infinity on the standard-normal scale: Phi(-40) underflows to 0
# in double precision, so integration limits are clipped here.
NORM_INF = 40.0


@maybe_jit
def norm_cdf(x):
    return 0.5 * math.erfc(-x * INV_SQRT2)


@maybe_jit
def norm_pdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(TWO_PI)


@maybe_jit
def norm_ppf(p):
    """Inverse standard normal CDF (Acklam's rational approximation plus one
    Halley refinement step; relative error well below 1e-14)."""
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
              + 4.374664141464968e+00) * q + 2.938163982698783e+00) / \
            ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
               + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = (((((-3.969683028665376e+01 * r + 2.209460984245205e+02) * r
                - 2.759285104469687e+02) * r + 1.383577518672690e+02) * r
              - 3.066479806614716e+01) * r + 2.506628277459239e+00) * q / \
            (((((-5.447609879822406e+01 * r + 1.615858368580409e+02) * r
                - 1.556989798598866e+02) * r + 6.680131188771972e+01) * r
              - 1.328068155288572e+01) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                 - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
               + 4.374664141464968e+00) * q + 2.938163982698783e+00) / \
            ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
               + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)
    # Halley refinement against the erfc-based CDF
    e = norm_cdf(x) - p
    u = e * math.sqrt(TWO_PI) * math.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    return x


# Gauss-Legendre abscissae/weights on (0, 1] halves, as used by Genz's
# bivariate normal routine (orders 6, 12 and 20).
_GL6_W = np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904])
_GL6_X = np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970])
_GL12_W = np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                    0.2031674267230659, 0.2334925365383547, 0.2491470458134029])
_GL12_X = np.array([0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                    0.5873179542866171, 0.3678314989981802, 0.1252334085114692])
_GL20_W = np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                    0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                    0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                    0.1527533871307259])
_GL20_X = np.array([0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                    0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                    0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                    0.07652652113349733])


@maybe_jit
def _bvn_upper(dh, dk, r):
    """P(X > dh, Y > dk) for standard bivariate normal with correlation r.

    Port of Alan Genz's ``bvnl``/``bvnu`` routine (Drezner-Wesolowsky 1989
    quadrature with the high-correlation transformation); absolute accuracy
    around 5e-16.
    """
    if dh == np.inf or dk == np.inf:
        return 0.0
    if dh == -np.inf:
        if dk == -np.inf:
            return 1.0
        return norm_cdf(-dk)
    if dk == -np.inf:
        return norm_cdf(-dh)
    if r == 0.0:
        return norm_cdf(-dh) * norm_cdf(-dk)

    h = dh
    k = dk
    hk = h * k
    bvn = 0.0

    if abs(r) < 0.3:
        wg = _GL6_W
        xg = _GL6_X
    elif abs(r) < 0.75:
        wg = _GL12_W
        xg = _GL12_X
    else:
        wg = _GL20_W
        xg = _GL20_X
    ng = wg.shape[0]

    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * math.asin(r)
        for i in range(ng):
            for sgn in (-1.0, 1.0):
                sn = math.sin(asr * (1.0 + sgn * xg[i]))
                bvn += wg[i] * math.exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / TWO_PI + norm_cdf(-h) * norm_cdf(-k)
    else:
        if r < 0.0:
            k = -k
            hk = -hk
        if abs(r) < 1.0:
            ass = (1.0 - r) * (1.0 + r)
            a = math.sqrt(ass)
            bs = (h - k) * (h - k)
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 16.0
            asr = -0.5 * (bs / ass + hk)
            if asr > -100.0:
                bvn = a * math.exp(asr) * (1.0 - c * (bs - ass) * (1.0 - d * bs / 5.0) / 3.0
                                           + c * d * ass * ass / 5.0)
            if hk > -100.0:
                b = math.sqrt(bs)
                sp = math.sqrt(TWO_PI) * norm_cdf(-b / a)
                bvn -= math.exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            a = 0.5 * a
            for i in range(ng):
                for sgn in (-1.0, 1.0):
                    x = a * (1.0 + sgn * xg[i])
                    xs = x * x
                    rs = math.sqrt(1.0 - xs)
                    asr = -0.5 * (bs / xs + hk)
                    if asr > -100.0:
                        sp = 1.0 + c * xs * (1.0 + d * xs)
                        ep = math.exp(-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))) / rs
                        bvn += a * math.exp(asr) * (ep - sp) * wg[i]
            bvn = -bvn / TWO_PI
        if r > 0.0:
            bvn += norm_cdf(-max(h, k))
        else:
            bvn = -bvn
            if k > h:
                bvn += norm_cdf(k) - norm_cdf(h)
    if bvn < 0.0:
        bvn = 0.0
    if bvn > 1.0:
        bvn = 1.0
    return bvn


@maybe_jit
def bvn_cdf(a, b, rho):
    """P(X <= a, Y <= b) for standard bivariate normal with correlation rho."""
    if rho >= 1.0:
        return norm_cdf(min(a, b))
    if rho <= -1.0:
        p = norm_cdf(a) + norm_cdf(b) - 1.0
        return p if p > 0.0 else 0.0
    p = _bvn_upper(-a, -b, rho)
    if p < 0.0:
        p = 0.0
    if p > 1.0:
        p = 1.0
    return p


@maybe_jit
def bvn_rect(xlo, xhi, ylo, yhi, rho):
    """P(xlo <= X <= xhi, ylo <= Y <= yhi) via inclusion-exclusion."""
    p = (bvn_cdf(xhi, yhi, rho) - bvn_cdf(xlo, yhi, rho)
         - bvn_cdf(xhi, ylo, rho) + bvn_cdf(xlo, ylo, rho))
    if p < 0.0:
        p = 0.0
    if p > 1.0:
        p = 1.0
    return p


@maybe_jit
def _latent_band(t, rho, s, y_lo, y_hi, q_lo, q_hi):
    """phi(t) * P(Y in admissible band | T = t) for one normal component,
    where Y | T=t ~ N(rho*t, s^2) and the band is the intersection of
    [y_lo, y_hi] with [t - q_hi, t - q_lo]."""
    lo = y_lo
    if t - q_hi > lo:
        lo = t - q_hi
    hi = y_hi
    if t - q_lo < hi:
        hi = t - q_lo
    if hi <= lo:
        return 0.0
    return norm_pdf(t) * (norm_cdf((hi - rho * t) / s) - norm_cdf((lo - rho * t) / s))


@maybe_jit
def _latent_panel(t0, t1, rho, s, y_lo, y_hi, q_lo, q_hi):
    # 20-point Gauss-Legendre on [t0, t1]
    mid = 0.5 * (t0 + t1)
    half = 0.5 * (t1 - t0)
    acc = 0.0
    for i in range(10):
        for sgn in (-1.0, 1.0):
            t = mid + sgn * half * _GL20_X[i]
            acc += _GL20_W[i] * _latent_band(t, rho, s, y_lo, y_hi, q_lo, q_hi)
    return acc * half


@maybe_jit
def latent_component_measure(t_lo, t_hi, rho, y_lo, y_hi, q_lo, q_hi, tol):
    """Integral over t in [t_lo, t_hi] of _latent_band, by adaptive panel
    bisection with presplits at the band kink locations."""
    if t_hi <= t_lo:
        return 0.0
    s = math.sqrt((1.0 - rho) * (1.0 + rho))
    # candidate kinks: where the min/max in the band switches or it empties
    kinks = np.empty(6, dtype=np.float64)
    kinks[0] = t_lo
    kinks[1] = t_hi
    kinks[2] = y_hi + q_lo
    kinks[3] = y_lo + q_hi
    kinks[4] = y_lo + q_lo
    kinks[5] = y_hi + q_hi
    pts = np.empty(6, dtype=np.float64)
    npts = 0
    for i in range(6):
        v = kinks[i]
        if t_lo <= v <= t_hi and np.isfinite(v):
            pts[npts] = v
            npts += 1
    pts = np.sort(pts[:npts])

    total = 0.0
    # fixed-size stack for adaptive bisection
    stack_lo = np.empty(256, dtype=np.float64)
    stack_hi = np.empty(256, dtype=np.float64)
    stack_est = np.empty(256, dtype=np.float64)
    for p in range(npts - 1):
        a = pts[p]
        b = pts[p + 1]
        if b - a < 1e-14:
            continue
        top = 0
        stack_lo[0] = a
        stack_hi[0] = b
        stack_est[0] = _latent_panel(a, b, rho, s, y_lo, y_hi, q_lo, q_hi)
        while top >= 0:
            a0 = stack_lo[top]
            b0 = stack_hi[top]
            est = stack_est[top]
            top -= 1
            m = 0.5 * (a0 + b0)
            left = _latent_panel(a0, m, rho, s, y_lo, y_hi, q_lo, q_hi)
            right = _latent_panel(m, b0, rho, s, y_lo, y_hi, q_lo, q_hi)
            if abs(left + right - est) < tol or b0 - a0 < 1e-12 or top >= 252:
                total += left + right
            else:
                top += 1
                stack_lo[top] = a0
                stack_hi[top] = m
                stack_est[top] = left
                top += 1
                stack_lo[top] = m
                stack_hi[top] = b0
                stack_est[top] = right
    return total
