"""Mixture-model containers and the fit configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import CmsnParams, delta_from_lambda, lambda_from_delta


@dataclass(frozen=True)
class ComponentParams:
    """One cluster: weight, contaminated skew-normal parameters, and the
    canonical (delta, omega) pair the conditional-maximization steps use."""

    pi: float
    mu: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    alpha: float
    beta: float
    delta: np.ndarray
    omega: np.ndarray

    @classmethod
    def from_primary(cls, pi, mu, sigma, lam, alpha, beta) -> "ComponentParams":
        mu = np.asarray(mu, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        lam = np.asarray(lam, dtype=float)
        delta = delta_from_lambda(sigma, lam)
        return cls(pi=float(pi), mu=mu, sigma=sigma, lam=lam, alpha=float(alpha),
                   beta=float(beta), delta=delta, omega=sigma - np.outer(delta, delta))

    @classmethod
    def from_canonical(cls, pi, mu, delta, omega, alpha, beta) -> "ComponentParams":
        mu = np.asarray(mu, dtype=float)
        delta = np.asarray(delta, dtype=float)
        omega = np.asarray(omega, dtype=float)
        sigma = omega + np.outer(delta, delta)
        lam = lambda_from_delta(omega, delta)
        return cls(pi=float(pi), mu=mu, sigma=sigma, lam=lam, alpha=float(alpha),
                   beta=float(beta), delta=delta, omega=omega)

    def to_cmsn(self) -> CmsnParams:
        return CmsnParams.make(self.mu, self.sigma, self.lam, self.alpha, self.beta)

    @property
    def p(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class MixtureModel:
    """A fitted or candidate mixture: G components over dimension p."""

    components: tuple
    p: int
    no_skew: bool = False
    no_contamination: bool = False

    @property
    def g(self) -> int:
        return len(self.components)

    @property
    def pis(self) -> np.ndarray:
        return np.array([c.pi for c in self.components])

    def permuted(self, order) -> "MixtureModel":
        """Relabel clusters; weights and parameters travel with their index."""
        comps = tuple(self.components[j] for j in order)
        return MixtureModel(components=comps, p=self.p,
                            no_skew=self.no_skew, no_contamination=self.no_contamination)


@dataclass(frozen=True)
class FitConfig:
    """Everything the fit needs beyond the data itself.

    ``no_skew`` pins every skewness vector at zero (contaminated-normal
    mixture); ``no_contamination`` pins alpha at 1 and beta at the floor
    (plain skew-normal mixture). ``alpha_min`` optionally clamps the good
    proportion from below.
    """

    n_clusters: int
    tol: float = 1e-5
    max_iter: int = 1000
    n_starts: int = 5
    seed: int = 0
    beta_floor: float = 1.001
    no_skew: bool = False
    no_contamination: bool = False
    alpha_min: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("need at least one cluster")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.beta_floor <= 1.0:
            raise ValueError("beta_floor must exceed 1")


def parameter_count(g: int, p: int, no_skew: bool = False, no_contamination: bool = False) -> int:
    """Free parameters: (G-1) weights plus per cluster p for the location,
    p(p+1)/2 for the scale, p for the skewness and 2 for contamination;
    constrained fits drop the corresponding blocks."""
    per = p + p * (p + 1) // 2 + p + 2
    if no_skew:
        per -= p
    if no_contamination:
        per -= 2
    return (g - 1) + g * per
