import numpy as np
import pytest

from skewmix import (
    CmsnParams,
    DataMatrix,
    MissPattern,
    MsnParams,
    cmsn_logpdf,
    conditional_normal,
    conditional_sn,
    marginal_observed,
    mills_ratio,
    msn_logpdf,
    mvn_logpdf,
    sample_cmsn,
    scan_patterns,
    tn_moments,
)
from skewmix.errors import DataError
from skewmix.partition import PartitionedParams

from .conftest import random_cmsn, random_pd


def law_logpdf(law, x_m):
    """Density of a conditional skew-normal law (scale kappa * sigma_c,
    threshold kappa^{-1/2} lambda0_c)."""
    params = MsnParams(mu=law.mu_c, sigma=law.kappa * law.sigma_c,
                       lam=law.lambda_c, lam0=law.lambda0_c / np.sqrt(law.kappa))
    return msn_logpdf(x_m, params)


class TestScanPatterns:
    def test_complete_matrix_single_group(self, rng):
        data = DataMatrix.from_values(rng.normal(size=(10, 3)))
        groups = scan_patterns(data)
        assert len(groups) == 1
        pattern, rows = groups[0]
        assert pattern.missing_idx == ()
        assert rows.size == 10

    def test_two_masks_two_groups(self):
        vals = np.array([[1.0, 2.0], [np.nan, 3.0], [np.nan, 4.0]])
        groups = scan_patterns(DataMatrix.from_values(vals))
        sizes = sorted(rows.size for _, rows in groups)
        assert sizes == [1, 2]

    def test_random_masks_recount(self, rng):
        n, p = 200, 4
        vals = rng.normal(size=(n, p))
        drop = rng.random((n, p)) < 0.3
        drop[drop.all(axis=1), 0] = False  # keep one cell per row
        vals[drop] = np.nan
        groups = scan_patterns(DataMatrix.from_values(vals))
        seen = np.concatenate([rows for _, rows in groups])
        assert sorted(seen.tolist()) == list(range(n))
        for pattern, rows in groups:
            want = ~np.isnan(vals[rows])
            assert all(tuple(np.where(w)[0]) == pattern.observed_idx for w in want)

    def test_fully_missing_row_rejected(self):
        with pytest.raises(DataError, match="row 1"):
            DataMatrix.from_values(np.array([[1.0, 2.0], [np.nan, np.nan]]))


class TestMarginalObserved:
    def test_identity_partition_returns_lambda_exactly(self, rng):
        comp = random_cmsn(rng, 3)
        pattern = MissPattern(observed_idx=(0, 1, 2), missing_idx=(), p=3)
        marg = marginal_observed(comp, pattern)
        np.testing.assert_array_equal(marg.lam_dot_o, comp.lam)

    def test_zero_skew_stays_zero(self, rng):
        comp = CmsnParams.make(rng.normal(size=3), random_pd(rng, 3),
                               np.zeros(3), 0.8, 5.0)
        pattern = MissPattern(observed_idx=(0, 2), missing_idx=(1,), p=3)
        marg = marginal_observed(comp, pattern)
        np.testing.assert_allclose(marg.lam_dot_o, 0.0, atol=1e-14)

    def test_marginal_density_matches_monte_carlo(self, rng):
        comp = random_cmsn(rng, 2, alpha=0.85, beta=6.0)
        pattern = MissPattern(observed_idx=(0,), missing_idx=(1,), p=2)
        marg = marginal_observed(comp, pattern)
        marg_params = CmsnParams.make(marg.mu_o, marg.sigma_oo, marg.lam_dot_o,
                                      marg.alpha, marg.beta)
        draws, _ = sample_cmsn(comp, 1_000_000, 99)
        kept = draws[:, 0]
        lo, hi = np.quantile(kept, [0.001, 0.999])
        bins = np.linspace(lo, hi, 41)
        hist, _ = np.histogram(kept, bins=bins, density=True)
        centers = 0.5 * (bins[:-1] + bins[1:])
        dens = np.exp(cmsn_logpdf(centers[:, None], marg_params))
        width = bins[1] - bins[0]
        se = np.sqrt(np.maximum(dens, 1e-12) / (kept.size * width))
        assert np.all(np.abs(hist - dens) < 5 * se + 0.002)


def _rejection_sample(comp, pattern, x_o, v, n_draws, window, seed):
    draws, good = sample_cmsn(comp, n_draws, seed)
    keep = good == bool(v)
    for pos, coord in enumerate(pattern.observed_idx):
        keep &= np.abs(draws[:, coord] - x_o[pos]) < window / 2
    return draws[np.ix_(keep, pattern.missing_idx)]


class TestConditionalSn:
    def test_independent_blocks_decouple(self, rng):
        sigma = np.diag([2.0, 3.0])
        comp = CmsnParams.make([1.0, -1.0], sigma, np.zeros(2), 0.9, 4.0)
        pattern = MissPattern(observed_idx=(0,), missing_idx=(1,), p=2)
        law = conditional_sn(comp, pattern, np.array([2.5]), v=1)
        assert law.mu_c[0] == pytest.approx(-1.0)
        assert law.lambda0_c == pytest.approx(0.0)
        np.testing.assert_allclose(law.lambda_c, 0.0, atol=1e-14)

    def test_gaussian_reduction_is_schur_conditioning(self, rng):
        comp = CmsnParams.make(rng.normal(size=3), random_pd(rng, 3),
                               np.zeros(3), 0.8, 5.0)
        pattern = MissPattern(observed_idx=(0, 2), missing_idx=(1,), p=3)
        x_o = rng.normal(size=2)
        law = conditional_sn(comp, pattern, x_o, v=1)
        sig = comp.sigma
        obs = [0, 2]
        mis = [1]
        s_oo = sig[np.ix_(obs, obs)]
        s_mo = sig[np.ix_(mis, obs)]
        mu_c = comp.mu[mis] + s_mo @ np.linalg.solve(s_oo, x_o - comp.mu[obs])
        s_c = sig[np.ix_(mis, mis)] - s_mo @ np.linalg.solve(s_oo, s_mo.T)
        np.testing.assert_allclose(law.mu_c, mu_c, rtol=1e-12)
        np.testing.assert_allclose(law.sigma_c, s_c, rtol=1e-12)
        np.testing.assert_allclose(law.lambda_c, 0.0, atol=1e-12)
        assert law.lambda0_c == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("v", [0, 1])
    def test_moments_match_rejection_sampling(self, rng, v):
        comp = random_cmsn(rng, 2, alpha=0.8, beta=5.0)
        pattern = MissPattern(observed_idx=(0,), missing_idx=(1,), p=2)
        x_o = np.array([comp.mu[0] + 0.5])
        law = conditional_sn(comp, pattern, x_o, v=v)
        samples = _rejection_sample(comp, pattern, x_o, v, 800_000, 0.05, 12)
        assert samples.size > 500
        # law moments through the truncated-normal composition
        kappa = law.kappa
        blocks = PartitionedParams(comp, pattern)
        mu_t = float(blocks.mu_tilde(x_o)[0])
        st = blocks.sigma_t
        e_t, e_t2 = tn_moments(mu_t / np.sqrt(kappa), st)
        mean = blocks.m_cond(x_o)[0] + np.sqrt(kappa) * e_t * blocks.gamma_c
        var = (kappa * blocks.omega_c
               + kappa * (e_t2 - e_t**2) * np.outer(blocks.gamma_c, blocks.gamma_c))
        se = np.sqrt(var[0, 0] / samples.shape[0])
        assert abs(samples.mean() - mean[0]) < 4 * se
        assert abs(samples.var() - var[0, 0]) < 5 * var[0, 0] / np.sqrt(samples.shape[0]) + 4 * se**2

    @pytest.mark.parametrize("v", [0, 1])
    def test_density_normalizes_and_matches_factorization(self, rng, v):
        # f(x) = f(x_obs marginal) * f(x_miss | x_obs) for the same indicator
        comp = random_cmsn(rng, 3)
        pattern = MissPattern(observed_idx=(0, 2), missing_idx=(1,), p=3)
        x_o = rng.normal(size=2) + comp.mu[[0, 2]]
        law = conditional_sn(comp, pattern, x_o, v=v)
        kappa = law.kappa
        marg = marginal_observed(comp, pattern)
        x_m = rng.normal(size=1) + law.mu_c
        full = np.empty(3)
        full[[0, 2]] = x_o
        full[1] = x_m[0]
        joint = msn_logpdf(full, MsnParams(comp.mu, kappa * comp.sigma, comp.lam))
        marg_lp = msn_logpdf(x_o, MsnParams(marg.mu_o, kappa * marg.sigma_oo,
                                            marg.lam_dot_o))
        assert joint == pytest.approx(marg_lp + law_logpdf(law, x_m), rel=1e-10)
        # and the conditional density integrates to one
        grid = np.linspace(law.mu_c[0] - 30, law.mu_c[0] + 30, 4001)
        dens = np.exp(law_logpdf(law, grid[:, None]))
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)


class TestConditionalNormal:
    def test_zero_skew_reduces_to_gaussian_conditioning(self, rng):
        comp = CmsnParams.make(rng.normal(size=3), random_pd(rng, 3),
                               np.zeros(3), 0.9, 3.0)
        pattern = MissPattern(observed_idx=(1,), missing_idx=(0, 2), p=3)
        x_o = rng.normal(size=1)
        law = conditional_normal(comp, pattern, x_o)
        np.testing.assert_allclose(law.gamma_c, 0.0, atol=1e-14)
        sig = comp.sigma
        mis = [0, 2]
        s_mo = sig[np.ix_(mis, [1])]
        mu_c = comp.mu[mis] + (s_mo / sig[1, 1]) @ (x_o - comp.mu[[1]])
        np.testing.assert_allclose(law.m_c, mu_c, rtol=1e-12)

    def test_complete_pattern_returns_empty_law(self, rng):
        comp = random_cmsn(rng, 2)
        pattern = MissPattern(observed_idx=(0, 1), missing_idx=(), p=2)
        law = conditional_normal(comp, pattern, rng.normal(size=2))
        assert law.m_c.size == 0 and law.omega_c.shape == (0, 0)

    def test_mean_composition_matches_rejection_sampling(self, rng):
        comp = random_cmsn(rng, 3, alpha=0.9, beta=4.0)
        pattern = MissPattern(observed_idx=(0,), missing_idx=(1, 2), p=3)
        x_o = np.array([comp.mu[0] + 0.3])
        law = conditional_normal(comp, pattern, x_o)
        blocks = PartitionedParams(comp, pattern)
        mu_t = float(blocks.mu_tilde(x_o)[0])
        st = blocks.sigma_t
        for v in (0, 1):
            kappa = 1.0 if v else comp.beta
            e_t, _ = tn_moments(mu_t / np.sqrt(kappa), st)
            mean = law.m_c + np.sqrt(kappa) * e_t * law.gamma_c
            n_draws = 700_000 if v else 3_000_000
            samples = _rejection_sample(comp, pattern, x_o, v, n_draws, 0.08, 21 + v)
            assert samples.shape[0] > 400
            se = samples.std(axis=0) / np.sqrt(samples.shape[0])
            np.testing.assert_array_less(np.abs(samples.mean(axis=0) - mean), 4 * se)


class TestStructuralInvariants:
    def test_two_theorems_agree_on_first_moment(self, rng):
        # mixing the normal law over the truncated-normal draw reproduces
        # the skew-normal conditional mean
        for _ in range(10):
            comp = random_cmsn(rng, 3)
            pattern = MissPattern(observed_idx=(0, 1), missing_idx=(2,), p=3)
            x_o = comp.mu[[0, 1]] + rng.normal(size=2)
            blocks = PartitionedParams(comp, pattern)
            mu_t = float(blocks.mu_tilde(x_o)[0])
            a = float(blocks.skew_arg(x_o)[0])
            st = blocks.sigma_t
            for v in (0, 1):
                kappa = 1.0 if v else comp.beta
                law_n = conditional_normal(comp, pattern, x_o)
                e_t, _ = tn_moments(mu_t / np.sqrt(kappa), st)
                mean_n = law_n.m_c + np.sqrt(kappa) * e_t * law_n.gamma_c
                law_s = conditional_sn(comp, pattern, x_o, v=v)
                tilt = mills_ratio(a / np.sqrt(kappa))
                mean_s = law_s.mu_c + np.sqrt(kappa) * tilt * blocks.delta_c
                np.testing.assert_allclose(mean_n, mean_s, rtol=1e-8, atol=1e-10)

    def test_permutation_equivariance(self, rng):
        comp = random_cmsn(rng, 4)
        perm = rng.permutation(4)  # new coordinate j holds old coordinate perm[j]
        inv = np.argsort(perm)
        comp_p = CmsnParams.make(comp.mu[perm], comp.sigma[np.ix_(perm, perm)],
                                 comp.lam[perm], comp.alpha, comp.beta)
        pattern = MissPattern(observed_idx=(0, 2), missing_idx=(1, 3), p=4)
        x_o = comp.mu[[0, 2]] + rng.normal(size=2)

        obs_pairs = sorted((int(inv[c]), pos) for pos, c in enumerate(pattern.observed_idx))
        mis_pairs = sorted((int(inv[c]), pos) for pos, c in enumerate(pattern.missing_idx))
        pattern_p = MissPattern(observed_idx=tuple(j for j, _ in obs_pairs),
                                missing_idx=tuple(j for j, _ in mis_pairs), p=4)
        x_o_p = x_o[[pos for _, pos in obs_pairs]]

        law = conditional_sn(comp, pattern, x_o, v=1)
        law_p = conditional_sn(comp_p, pattern_p, x_o_p, v=1)
        back = np.empty_like(law.mu_c)
        for k, (_, pos) in enumerate(mis_pairs):
            back[pos] = law_p.mu_c[k]
        np.testing.assert_allclose(back, law.mu_c, rtol=1e-10)
        assert law_p.lambda0_c == pytest.approx(law.lambda0_c, rel=1e-10)
        # scalar summaries of the law are permutation-invariant too
        assert np.linalg.det(law_p.sigma_c) == pytest.approx(
            np.linalg.det(law.sigma_c), rel=1e-10)
        assert law_p.lambda_c @ law_p.lambda_c == pytest.approx(
            law.lambda_c @ law.lambda_c, rel=1e-8)

    def test_schur_blocks_stay_pd(self, rng):
        for _ in range(1000):
            p = int(rng.integers(2, 5))
            comp = random_cmsn(rng, p)
            n_miss = int(rng.integers(1, p))
            mis = tuple(sorted(rng.choice(p, size=n_miss, replace=False).tolist()))
            obs = tuple(j for j in range(p) if j not in mis)
            blocks = PartitionedParams(comp, MissPattern(obs, mis, p))
            assert np.linalg.eigvalsh(blocks.sigma_c)[0] > 0
            assert np.linalg.eigvalsh(blocks.omega_c)[0] > 0
