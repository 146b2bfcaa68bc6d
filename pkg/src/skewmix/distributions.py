"""Numerical kernel: skew-normal / contaminated skew-normal densities,
sampling, matrix square roots, Mills ratio and truncated-normal moments.

All density evaluation happens in log space; the normal-CDF factors go
through ``scipy.special.log_ndtr`` so arguments of either sign up to several
hundred stay finite. Everything here is stateless and safe to call from any
number of threads; sampling takes an explicit seed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.special import log_ndtr

from .errors import CanonicalValidityError, FactorizationError

_LOG_2PI = np.log(2.0 * np.pi)

# relative floor applied to eigenvalues inside the symmetric square root
_EIG_FLOOR = 1e-12
# eigenvalues below -tol * max(|eig|) are treated as a genuine PD failure
_EIG_NEG_TOL = 1e-8


# ---------------------------------------------------------------------------
# parameter bundles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MsnParams:
    """Multivariate skew-normal parameters (location, scale, skewness, threshold).

    ``sigma`` must be symmetric positive definite. ``lam0`` shifts the
    normal-CDF tilt; model fitting keeps it at 0 but conditional laws under
    missingness need nonzero values, so it is carried as a full parameter.
    """

    mu: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    lam0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)))
        object.__setattr__(self, "sigma", np.atleast_2d(np.asarray(self.sigma, dtype=float)))
        object.__setattr__(self, "lam", np.atleast_1d(np.asarray(self.lam, dtype=float)))
        object.__setattr__(self, "lam0", float(self.lam0))
        p = self.mu.shape[0]
        if self.sigma.shape != (p, p) or self.lam.shape != (p,):
            raise ValueError("msn parameter shapes disagree")
        if not np.isfinite(self.lam0):
            raise ValueError("lam0 must be finite")

    @property
    def p(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class CmsnParams:
    """Contaminated skew-normal parameters.

    ``alpha`` is the proportion of typical ("good") points in (0, 1];
    ``beta`` inflates the scale matrix of the atypical component and must
    stay strictly above 1 (a floor slightly above 1 is used during fitting).
    """

    msn: MsnParams
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.beta >= 1.0:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if self.msn.lam0 != 0.0:
            raise ValueError("contaminated model requires lam0 = 0")

    @classmethod
    def make(cls, mu, sigma, lam, alpha, beta) -> "CmsnParams":
        return cls(msn=MsnParams(mu=mu, sigma=sigma, lam=lam), alpha=float(alpha), beta=float(beta))

    @property
    def mu(self) -> np.ndarray:
        return self.msn.mu

    @property
    def sigma(self) -> np.ndarray:
        return self.msn.sigma

    @property
    def lam(self) -> np.ndarray:
        return self.msn.lam

    @property
    def p(self) -> int:
        return self.msn.p


@dataclass(frozen=True)
class CanonicalParams:
    """Canonical (mu, delta, omega) parameterization used by the M-step.

    ``omega = sigma - delta delta^T`` must be positive definite, and the
    implied ``delta^T sigma^{-1} delta`` must stay below 1 for the skewness
    vector to be recoverable.
    """

    mu: np.ndarray
    delta: np.ndarray
    omega: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return self.omega + np.outer(self.delta, self.delta)


# ---------------------------------------------------------------------------
# linear algebra helpers
# ---------------------------------------------------------------------------

def chol_lower(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, re-raising PD failures with the minor index."""
    try:
        return cholesky(sigma, lower=True)
    except LinAlgError as exc:
        m = re.search(r"(\d+)-th leading minor", str(exc))
        minor = int(m.group(1)) if m else None
        raise FactorizationError(str(exc), minor=minor) from exc


def psd_sqrt(sigma: np.ndarray) -> np.ndarray:
    """Symmetric positive-definite square root via eigendecomposition.

    Eigenvalues below ``1e-12 * max`` are clipped to that floor so that
    near-singular scale matrices arising late in the fit remain usable;
    eigenvalues negative beyond tolerance raise.
    """
    sigma = np.asarray(sigma, dtype=float)
    w, vecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
    top = float(w[-1])
    if top <= 0.0:
        raise FactorizationError("matrix has no positive eigenvalue")
    if w[0] < -_EIG_NEG_TOL * top:
        raise FactorizationError(
            f"negative eigenvalue {w[0]:.3e} beyond tolerance (largest {top:.3e})"
        )
    w = np.clip(w, _EIG_FLOOR * top, None)
    root = (vecs * np.sqrt(w)) @ vecs.T
    return 0.5 * (root + root.T)


def mvn_logpdf(x, mu, sigma):
    """Log density of N(mu, sigma) at ``x`` (a point or an (n, p) batch).

    Uses a triangular factorization; never forms an explicit inverse.
    """
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    xs = np.atleast_2d(x)
    p = mu.shape[0]
    low = chol_lower(np.asarray(sigma, dtype=float))
    diff = xs - mu
    z = solve_triangular(low, diff.T, lower=True).T
    logdet = 2.0 * np.sum(np.log(np.diag(low)))
    out = -0.5 * (p * _LOG_2PI + logdet + np.einsum("ij,ij->i", z, z))
    return float(out[0]) if squeeze else out


def mills_ratio(t):
    """Mills-type ratio phi(t) / Phi(t), stable over the whole real line.

    Computed as exp(log phi - log Phi); ``log_ndtr`` switches to an
    asymptotic expansion in the deep left tail, so there is no overflow or
    0/0 down to t ~ -700.
    """
    t = np.asarray(t, dtype=float)
    out = np.exp(-0.5 * t * t - 0.5 * _LOG_2PI - log_ndtr(t))
    return float(out) if out.ndim == 0 else out


def tn_moments(mu_t: float, sigma_t: float):
    """First and second moments of N(mu_t, sigma_t^2) truncated to (0, inf)."""
    if sigma_t <= 0:
        raise ValueError("sigma_t must be positive")
    w = mills_ratio(mu_t / sigma_t)
    mean = mu_t + sigma_t * w
    second = mu_t * mu_t + sigma_t * sigma_t + mu_t * sigma_t * w
    return mean, second


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def msn_logpdf(x, params: MsnParams):
    """Log density of the multivariate skew-normal distribution.

    The density is the normal log density plus a log-CDF tilt
    ``log Phi(lam0 + lam' sigma^{-1/2} (x - mu))`` minus the normalizing
    ``log Phi(lam0 / sqrt(1 + lam'lam))``. Accepts a point or an (n, p)
    batch.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    xs = np.atleast_2d(x)
    base = mvn_logpdf(xs, params.mu, params.sigma)
    if np.any(params.lam) or params.lam0 != 0.0:
        root = psd_sqrt(params.sigma)
        coeff = np.linalg.solve(root, params.lam)
        arg = params.lam0 + (xs - params.mu) @ coeff
        norm_arg = params.lam0 / np.sqrt(1.0 + params.lam @ params.lam)
        out = base + log_ndtr(arg) - log_ndtr(norm_arg)
    else:
        # lam = 0, lam0 = 0: the two CDF factors cancel exactly
        out = base
    return float(out[0]) if squeeze else out


def cmsn_logpdf(x, params: CmsnParams):
    """Log density of the contaminated skew-normal distribution.

    Stable log-sum-exp of the good component and the scale-inflated bad
    component; collapses exactly to the skew-normal density at alpha = 1
    or beta = 1.
    """
    good = msn_logpdf(x, params.msn)
    if params.alpha == 1.0:
        return good
    bad = msn_logpdf(x, MsnParams(params.mu, params.beta * params.sigma, params.lam))
    return np.logaddexp(np.log(params.alpha) + good, np.log1p(-params.alpha) + bad)


# ---------------------------------------------------------------------------
# parameterization maps
# ---------------------------------------------------------------------------

def delta_from_lambda(sigma: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Skew direction delta = sigma^{1/2} lam / sqrt(1 + lam'lam)."""
    lam = np.asarray(lam, dtype=float)
    return psd_sqrt(sigma) @ lam / np.sqrt(1.0 + lam @ lam)


def lambda_from_delta(omega: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Invert the canonical map: recover lam from (delta, omega).

    With sigma = omega + delta delta^T, requires delta' sigma^{-1} delta < 1;
    otherwise the canonical point is invalid and no finite lam exists.
    """
    delta = np.asarray(delta, dtype=float)
    sigma = np.asarray(omega, dtype=float) + np.outer(delta, delta)
    low = chol_lower(sigma)
    si_delta = cho_solve((low, True), delta)
    ratio = float(delta @ si_delta)
    if ratio >= 1.0:
        raise CanonicalValidityError(
            f"delta' sigma^-1 delta = {ratio:.6f} >= 1; no finite skewness vector"
        )
    return np.linalg.solve(psd_sqrt(sigma), delta) / np.sqrt(1.0 - ratio)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_cmsn(params: CmsnParams, n: int, rng_seed):
    """Draw ``n`` rows from the contaminated skew-normal distribution.

    Uses the stochastic representation
    ``mu + sqrt(K) T delta_dir + sqrt(K) sigma^{1/2} (I - dd')^{1/2} Y`` with
    half-normal T, standard normal Y and K = V + (1 - V) beta for a
    Bernoulli(alpha) good-point indicator V. Returns (draws, good_flags).
    Deterministic given the seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    p = params.p
    lam = params.lam
    dvec = lam / np.sqrt(1.0 + lam @ lam)
    big_delta = delta_from_lambda(params.sigma, lam)
    mixing = psd_sqrt(np.eye(p) - np.outer(dvec, dvec)) @ psd_sqrt(params.sigma)

    good = rng.random(n) < params.alpha
    k = np.where(good, 1.0, params.beta)
    t = np.abs(rng.standard_normal(n))
    y = rng.standard_normal((n, p))
    x = params.mu + np.sqrt(k)[:, None] * (t[:, None] * big_delta + y @ mixing)
    return x, good
