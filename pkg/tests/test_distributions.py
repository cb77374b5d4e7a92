import math

import numpy as np
import pytest

from mtbounds import distributions as D
from mtbounds.geometry import Rect, RectUnion

FAMILIES = {
    "independence": D.Independence(2),
    "gaussian": D.GaussianCopula2(0.5),
    "mixture": D.GaussianMixtureCopula2((0.3, 0.7), (-0.4, 0.6)),
    "latent": D.MultinomialLatent((0.5, 0.5), (0.2, -0.3)),
}


def rand_rect(rng, dim):
    lo = rng.random(dim)
    hi = rng.random(dim)
    return Rect(tuple(np.minimum(lo, hi)), tuple(np.maximum(lo, hi)))


def test_independence_product():
    d = D.Independence(2)
    assert d.rect_measure(Rect((0.1, 0.2), (0.5, 0.9))) == pytest.approx(0.28)


def test_gaussian_copula_arcsine():
    d = D.GaussianCopula2(0.5)
    assert d.cdf(0.5, 0.5) == pytest.approx(0.25 + math.asin(0.5) / (2 * math.pi),
                                            abs=1e-13)


def test_gaussian_degenerate_rhos():
    co = D.GaussianCopula2(1.0)
    assert co.cdf(0.3, 0.7) == pytest.approx(0.3)
    counter = D.GaussianCopula2(-1.0)
    assert counter.cdf(0.3, 0.7) == pytest.approx(0.0)
    assert counter.cdf(0.6, 0.7) == pytest.approx(0.3)
    assert co.rect_measure(Rect((0.2, 0.4), (0.5, 0.9))) == pytest.approx(0.1)


@pytest.mark.parametrize("name", list(FAMILIES))
def test_uniform_marginals(name):
    d = FAMILIES[name]
    for j in range(d.dim):
        for a, b in [(0.0, 0.37), (0.2, 0.8), (0.55, 1.0)]:
            lo = [0.0] * d.dim
            hi = [1.0] * d.dim
            lo[j], hi[j] = a, b
            assert d.rect_measure(Rect(tuple(lo), tuple(hi))) == pytest.approx(
                b - a, abs=1e-7), (name, j)


@pytest.mark.parametrize("name", list(FAMILIES))
def test_rect_additivity(name):
    d = FAMILIES[name]
    rng = np.random.default_rng(11)
    for _ in range(5):
        r = rand_rect(rng, d.dim)
        j = int(rng.integers(d.dim))
        mid = 0.5 * (r.lo[j] + r.hi[j])
        hi1 = list(r.hi)
        hi1[j] = mid
        lo2 = list(r.lo)
        lo2[j] = mid
        left = d.rect_measure(Rect(r.lo, tuple(hi1)))
        right = d.rect_measure(Rect(tuple(lo2), r.hi))
        assert left + right == pytest.approx(d.rect_measure(r), abs=1e-7)


def test_rho_monotone_in_lower_orthant():
    # the Gaussian copula is ordered in rho on lower orthants
    vals = [D.GaussianCopula2(r).cdf(0.4, 0.6) for r in (-0.8, -0.3, 0.0, 0.3, 0.8)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("name", list(FAMILIES))
def test_quad_points_reproduce_measure(name):
    d = FAMILIES[name]
    if name == "independence":
        return
    rng = np.random.default_rng(5)
    for _ in range(3):
        r = rand_rect(rng, d.dim)
        pts, w = d.quad_points(r)
        assert w.sum() == pytest.approx(d.rect_measure(r), abs=1e-7)
        if pts.shape[0]:
            assert pts.min() >= -1e-12 and pts.max() <= 1 + 1e-12


@pytest.mark.parametrize("name", list(FAMILIES))
def test_cond_quad_weights_sum_to_one(name):
    d = FAMILIES[name]
    for j in range(d.dim):
        pts, w = d.cond_quad_points(j, 0.35)
        assert w.sum() == pytest.approx(1.0, abs=1e-7), (name, j)
        assert np.allclose(pts[:, j], 0.35)


def test_cond_prob_degenerate_interval():
    d = D.Independence(2)
    with pytest.raises(D.DegenerateConditioning):
        d.cond_prob(Rect((0, 0), (1, 1)), 0, (0.5, 0.5))


def test_mixture_validation():
    with pytest.raises(D.DistributionError):
        D.GaussianMixtureCopula2((0.5, 0.6), (0.1, 0.2))
    with pytest.raises(D.DistributionError):
        D.GaussianMixtureCopula2((1.0,), (1.0,))


def test_latent_diff_cdf_ppf():
    d = FAMILIES["latent"]
    for q in (0.05, 0.3, 0.5, 0.77):
        assert d.diff_cdf(d.diff_ppf(q)) == pytest.approx(q, abs=1e-10)
    assert d.diff_cdf(0.0) == pytest.approx(0.5)


def test_latent_singular_support():
    # U3 is a deterministic function of (U1, U2): the region where the
    # function value disagrees with the U3 coordinate has measure zero
    d = D.MultinomialLatent.probit(0.3)
    rng = np.random.default_rng(9)
    u = d.sample(2000, rng)
    t1 = np.array([D.kernels.norm_ppf(v) for v in u[:, 0]])
    t2 = np.array([D.kernels.norm_ppf(v) for v in u[:, 1]])
    assert np.allclose(d.diff_cdf_arr(t1 - t2), u[:, 2], atol=1e-9)


def test_latent_choice_probs_match_regions():
    d = FAMILIES["latent"]
    a, b = 0.4, -0.2
    g1, g2 = D.kernels.norm_cdf(a), D.kernels.norm_cdf(b)
    g3 = d.diff_cdf(a - b)
    p0 = d.rect_measure(Rect((g1, g2, 0.0), (1.0, 1.0, 1.0)))
    p1 = d.rect_measure(Rect((0.0, 0.0, 0.0), (g1, 1.0, g3)))
    p2 = d.rect_measure(Rect((0.0, 0.0, g3), (1.0, g2, 1.0)))
    assert p0 == pytest.approx(d.p_choose0(a, b), abs=1e-8)
    assert p1 == pytest.approx(d.p_choose1(a, b), abs=1e-8)
    assert p0 + p1 + p2 == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("name", list(FAMILIES))
def test_sampling_agrees_with_measure(name):
    d = FAMILIES[name]
    rng = np.random.default_rng(17)
    u = d.sample(200_000, rng)
    r = Rect((0.1,) * d.dim, (0.6,) * d.dim)
    freq = np.mean(np.all((u >= r.lo) & (u <= r.hi), axis=1))
    assert freq == pytest.approx(d.rect_measure(r), abs=5e-3)
