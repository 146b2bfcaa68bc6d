"""Missingness bookkeeping: per-row observed/missing index sets, block
partitioning of the parameters, and the closed-form marginal / conditional
laws of a contaminated skew-normal vector given its observed coordinates.

Blocks are extracted by gather indices (never permutation matrices), so the
original coordinate order is preserved throughout. One ``PartitionedParams``
per (component, pattern) caches every factorization the E-step needs; it is
immutable once built and safe to share across rows and threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve

from .data import DataMatrix
from .distributions import CmsnParams, chol_lower, psd_sqrt
from .errors import CanonicalValidityError, DataError


@dataclass(frozen=True)
class MissPattern:
    """Ordered observed / missing coordinate index sets of one row shape."""

    observed_idx: tuple
    missing_idx: tuple
    p: int

    def __post_init__(self):
        if len(self.observed_idx) == 0:
            raise DataError("pattern with no observed coordinates")
        if sorted(self.observed_idx + self.missing_idx) != list(range(self.p)):
            raise DataError("observed and missing sets must partition 0..p-1")

    @classmethod
    def from_mask_row(cls, mask_row) -> "MissPattern":
        mask_row = np.asarray(mask_row, dtype=bool)
        obs = tuple(int(i) for i in np.where(mask_row)[0])
        mis = tuple(int(i) for i in np.where(~mask_row)[0])
        return cls(observed_idx=obs, missing_idx=mis, p=mask_row.size)

    @property
    def n_obs(self) -> int:
        return len(self.observed_idx)

    @property
    def n_miss(self) -> int:
        return len(self.missing_idx)

    @property
    def complete(self) -> bool:
        return self.n_miss == 0


def scan_patterns(data: DataMatrix):
    """Group rows by identical missingness pattern.

    Returns a list of (MissPattern, row-index array) pairs covering every row
    exactly once, so block factorizations are computed once per pattern.
    """
    empty = np.where(~data.mask.any(axis=1))[0]
    if empty.size:
        raise DataError(f"row {empty[0]} has no observed cells")
    _, inverse = np.unique(data.mask, axis=0, return_inverse=True)
    groups = []
    for gid in range(inverse.max() + 1):
        rows = np.where(inverse == gid)[0]
        groups.append((MissPattern.from_mask_row(data.mask[rows[0]]), rows))
    return groups


@dataclass(frozen=True)
class MarginalObserved:
    """Observed-block contaminated skew-normal marginal of one component."""

    mu_o: np.ndarray
    sigma_oo: np.ndarray
    lam_dot_o: np.ndarray
    alpha: float
    beta: float


@dataclass(frozen=True)
class ConditionalSnLaw:
    """Skew-normal law of the missing block given observed values and the
    good/bad indicator; the scale is ``kappa * sigma_c`` with kappa in
    {1, beta} and the CDF threshold is ``kappa^{-1/2} * lambda0_c``."""

    mu_c: np.ndarray
    sigma_c: np.ndarray
    lambda_c: np.ndarray
    lambda0_c: float
    kappa: float


@dataclass(frozen=True)
class ConditionalNormalLaw:
    """Normal law of the missing block given observed values, the latent
    half-normal draw t and the indicator: mean ``m_c + kappa^{1/2} t gamma_c``
    and covariance ``kappa * omega_c``."""

    m_c: np.ndarray
    gamma_c: np.ndarray
    omega_c: np.ndarray


class PartitionedParams:
    """Blocks and cached factorizations of one component under one pattern.

    Heavy quantities (Cholesky factors, Schur complements, the conditional
    skew direction) are computed lazily and cached; per-row quantities are
    exposed as vectorized methods over an (n_rows, p_obs) block of observed
    values.
    """

    def __init__(self, comp: CmsnParams, pattern: MissPattern, delta=None, omega=None):
        from .distributions import delta_from_lambda

        self.comp = comp
        self.pattern = pattern
        self.obs = np.array(pattern.observed_idx, dtype=int)
        self.mis = np.array(pattern.missing_idx, dtype=int)
        self.delta = delta_from_lambda(comp.sigma, comp.lam) if delta is None else np.asarray(delta, float)
        self.omega = (comp.sigma - np.outer(self.delta, self.delta)) if omega is None else np.asarray(omega, float)

        sig = comp.sigma
        self.mu_o = comp.mu[self.obs]
        self.mu_m = comp.mu[self.mis]
        self.sigma_oo = sig[np.ix_(self.obs, self.obs)]
        self.sigma_om = sig[np.ix_(self.obs, self.mis)]
        self.sigma_mo = sig[np.ix_(self.mis, self.obs)]
        self.sigma_mm = sig[np.ix_(self.mis, self.mis)]
        self.omega_oo = self.omega[np.ix_(self.obs, self.obs)]
        self.omega_om = self.omega[np.ix_(self.obs, self.mis)]
        self.omega_mo = self.omega[np.ix_(self.mis, self.obs)]
        self.omega_mm = self.omega[np.ix_(self.mis, self.mis)]
        self.delta_o = self.delta[self.obs]
        self.delta_m = self.delta[self.mis]

    # -- observed-block quantities -------------------------------------

    @cached_property
    def chol_sigma_oo(self):
        return chol_lower(self.sigma_oo)

    @cached_property
    def logdet_sigma_oo(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol_sigma_oo))))

    @cached_property
    def _sigma_oo_inv_delta_o(self):
        return cho_solve((self.chol_sigma_oo, True), self.delta_o)

    @cached_property
    def d_obs(self) -> float:
        """delta_o' sigma_oo^{-1} delta_o; must stay below 1."""
        val = float(self.delta_o @ self._sigma_oo_inv_delta_o)
        if val >= 1.0:
            raise CanonicalValidityError(
                f"observed-block skew mass {val:.6f} >= 1; invalid canonical point"
            )
        return val

    @cached_property
    def sigma_t(self) -> float:
        """Posterior scale of the latent half-normal, sqrt(1 - d_obs)."""
        return float(np.sqrt(1.0 - self.d_obs))

    @cached_property
    def lam_dot_o(self):
        """Observed-block marginal skewness vector."""
        if self.pattern.complete:
            return self.comp.lam
        return np.linalg.solve(psd_sqrt(self.sigma_oo), self.delta_o) / self.sigma_t

    @cached_property
    def tilt_coeff(self):
        """Coefficient c with lam_dot' sigma_oo^{-1/2} (x - mu_o) = c'(x - mu_o)."""
        return self._sigma_oo_inv_delta_o / self.sigma_t

    def skew_arg(self, x_obs):
        """Tilt argument A^o per row of an (k, p_obs) observed block."""
        return (np.atleast_2d(x_obs) - self.mu_o) @ self.tilt_coeff

    def mu_tilde(self, x_obs):
        """Posterior location of the latent half-normal draw, per row."""
        return self.sigma_t * self.skew_arg(x_obs)

    def mahal_obs(self, x_obs):
        """Quadratic form (x - mu_o)' sigma_oo^{-1} (x - mu_o) per row."""
        from scipy.linalg import solve_triangular

        diff = (np.atleast_2d(x_obs) - self.mu_o).T
        z = solve_triangular(self.chol_sigma_oo, diff, lower=True)
        return np.einsum("ij,ij->j", z, z)

    # -- missing-block (conditional) quantities --------------------------

    @cached_property
    def chol_omega_oo(self):
        return chol_lower(self.omega_oo)

    @cached_property
    def reg_sigma(self):
        """sigma_mo sigma_oo^{-1} (regression of missing on observed)."""
        return cho_solve((self.chol_sigma_oo, True), self.sigma_om).T

    @cached_property
    def reg_omega(self):
        """omega_mo omega_oo^{-1}."""
        return cho_solve((self.chol_omega_oo, True), self.omega_om).T

    @cached_property
    def sigma_c(self):
        return self.sigma_mm - self.reg_sigma @ self.sigma_om

    @cached_property
    def omega_c(self):
        return self.omega_mm - self.reg_omega @ self.omega_om

    @cached_property
    def gamma_c(self):
        return self.delta_m - self.reg_omega @ self.delta_o

    @cached_property
    def delta_c(self):
        """Skew direction of the conditional law; equals sigma_t * gamma_c."""
        return self.sigma_t * self.gamma_c

    @cached_property
    def d_full(self) -> float:
        """delta' sigma^{-1} delta over the full vector."""
        low = chol_lower(self.comp.sigma)
        return float(self.delta @ cho_solve((low, True), self.delta))

    @cached_property
    def lam_c(self):
        w = self.delta_m - self.reg_sigma @ self.delta_o
        return np.linalg.solve(psd_sqrt(self.sigma_c), w) / np.sqrt(1.0 - self.d_full)

    def mu_cond(self, x_obs):
        """Conditional location mu_c per row, shape (k, p_miss)."""
        return self.mu_m + (np.atleast_2d(x_obs) - self.mu_o) @ self.reg_sigma.T

    def m_cond(self, x_obs):
        """Normal-law location m_c per row, shape (k, p_miss)."""
        return self.mu_m + (np.atleast_2d(x_obs) - self.mu_o) @ self.reg_omega.T

    def lam0_cond(self, x_obs):
        """Conditional CDF threshold per row (before the kappa^{-1/2} scaling)."""
        return self.mu_tilde(x_obs) / np.sqrt(1.0 - self.d_full)


def marginal_observed(comp: CmsnParams, pattern: MissPattern) -> MarginalObserved:
    """Observed-block marginal: same contamination weights, observed blocks
    of location/scale, and the rescaled skewness ``lam_dot_o``."""
    blocks = PartitionedParams(comp, pattern)
    return MarginalObserved(
        mu_o=blocks.mu_o,
        sigma_oo=blocks.sigma_oo,
        lam_dot_o=np.asarray(blocks.lam_dot_o, dtype=float),
        alpha=comp.alpha,
        beta=comp.beta,
    )


def conditional_sn(comp: CmsnParams, pattern: MissPattern, x_o, v: int) -> ConditionalSnLaw:
    """Skew-normal conditional law of the missing block given ``x_o`` and the
    good/bad indicator ``v`` (1 = good)."""
    blocks = PartitionedParams(comp, pattern)
    kappa = 1.0 if v else comp.beta
    if pattern.complete:
        z = np.zeros(0)
        return ConditionalSnLaw(z, np.zeros((0, 0)), z, 0.0, kappa)
    x_o = np.asarray(x_o, dtype=float)
    return ConditionalSnLaw(
        mu_c=blocks.mu_cond(x_o)[0],
        sigma_c=blocks.sigma_c,
        lambda_c=blocks.lam_c,
        lambda0_c=float(blocks.lam0_cond(x_o)[0]),
        kappa=kappa,
    )


def conditional_normal(comp: CmsnParams, pattern: MissPattern, x_o) -> ConditionalNormalLaw:
    """Normal conditional law of the missing block given ``x_o`` and the
    latent half-normal draw (mean ``m_c + kappa^{1/2} t gamma_c``)."""
    blocks = PartitionedParams(comp, pattern)
    if pattern.complete:
        z = np.zeros(0)
        return ConditionalNormalLaw(z, z, np.zeros((0, 0)))
    x_o = np.asarray(x_o, dtype=float)
    return ConditionalNormalLaw(
        m_c=blocks.m_cond(x_o)[0],
        gamma_c=blocks.gamma_c,
        omega_c=blocks.omega_c,
    )
