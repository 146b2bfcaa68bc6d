"""User-facing model lifecycle: fit, classify, flag outliers, impute, score.

``fit`` runs the ECM engine from several independent initializations and
keeps the start with the best observed log-likelihood; everything returned
is an immutable snapshot safe for concurrent queries.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import DataMatrix
from .em import EcmRun, PartitionedParams, e_step, initialize, run_ecm
from .errors import (
    CanonicalValidityError,
    DegenerateClusterError,
    FactorizationError,
    FitFailureError,
    SingularSystemError,
)
from .mixture import FitConfig, MixtureModel, parameter_count
from .partition import scan_patterns


@dataclass(frozen=True)
class FitResult:
    """Fitted mixture plus everything derived from the final posteriors."""

    model: MixtureModel
    labels: np.ndarray
    outlier_flags: np.ndarray
    z_matrix: np.ndarray
    v_matrix: np.ndarray
    loglik_trace: list
    loglik: float
    aic: float
    bic: float
    n_params: int
    converged: bool
    n_iters: int
    start_id: int
    start_diagnostics: list = field(default_factory=list)


def classify(result_or_z) -> np.ndarray:
    """Row-wise argmax labels; ties go to the lowest cluster index.

    Accepts a fit result or a raw responsibility matrix.
    """
    z = getattr(result_or_z, "z_matrix", result_or_z)
    return np.argmax(np.asarray(z), axis=1)


def detect_outliers(result_or_z, v_matrix=None) -> np.ndarray:
    """Flag a row when the good-point posterior of its own (maximum a
    posteriori) cluster falls below one half.

    Accepts a fit result or a (z, v) matrix pair.
    """
    if v_matrix is None:
        v_matrix = result_or_z.v_matrix
    labels = classify(result_or_z)
    v_map = np.asarray(v_matrix)[np.arange(len(labels)), labels]
    return v_map < 0.5


_RECOVERABLE = (DegenerateClusterError, SingularSystemError,
                CanonicalValidityError, FactorizationError)


def _one_start(data, config, groups, start_seed, start_idx):
    # start 0 trusts the sample skew orientation; the next two force the
    # all-positive and all-negative orientations (cluster overlap routinely
    # flips the measured sign of the smaller cluster's skewness); further
    # starts draw random orientations
    signs = None
    if not config.no_skew and start_idx > 0:
        if start_idx == 1:
            signs = [np.ones(data.p) for _ in range(config.n_clusters)]
        elif start_idx == 2:
            signs = [-np.ones(data.p) for _ in range(config.n_clusters)]
        else:
            sign_rng = np.random.default_rng(start_seed)
            signs = [np.where(sign_rng.random(data.p) < 0.5, -1.0, 1.0)
                     for _ in range(config.n_clusters)]
    model0 = initialize(data, config.n_clusters, start_seed, config, lam_signs=signs)
    return run_ecm(data, model0, config, groups)


def fit(data: DataMatrix, config: FitConfig) -> FitResult:
    """Best-of-starts ECM fit of the contaminated skew-normal mixture.

    Starts that collapse (degenerate cluster, singular update system) are
    recorded and skipped; if every start collapses a ``FitFailureError``
    carrying the per-start diagnostics is raised. Deterministic given
    (seed, workers=1); with more workers the reduction order is still fixed.
    """
    n, p = data.values.shape
    if n <= config.n_clusters * (p + 1):
        raise DegenerateClusterError(
            f"need n > G(p+1) = {config.n_clusters * (p + 1)} rows, got {n}")
    groups = scan_patterns(data)
    start_seeds = [int(s) for s in np.random.SeedSequence(config.seed).generate_state(config.n_starts)]

    runs: list[EcmRun | None] = [None] * config.n_starts
    diagnostics = []

    def attempt(idx):
        try:
            return idx, _one_start(data, config, groups, start_seeds[idx], idx), None
        except _RECOVERABLE as exc:
            return idx, None, f"start {idx}: {type(exc).__name__}: {exc}"

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(attempt, range(config.n_starts)))
    else:
        outcomes = [attempt(i) for i in range(config.n_starts)]

    for idx, run, err in outcomes:
        runs[idx] = run
        if err is not None:
            diagnostics.append(err)

    best_id, best = -1, None
    for idx, run in enumerate(runs):
        if run is None:
            continue
        if best is None or run.loglik > best.loglik:
            best_id, best = idx, run
    if best is None:
        raise FitFailureError("every start aborted", diagnostics=diagnostics)

    cache = best.cache
    labels = classify(cache.z)
    flags = detect_outliers(cache.z, cache.v)
    k = parameter_count(config.n_clusters, p, config.no_skew, config.no_contamination)
    ll = best.loglik
    return FitResult(
        model=best.model,
        labels=labels,
        outlier_flags=flags,
        z_matrix=cache.z,
        v_matrix=cache.v,
        loglik_trace=list(best.convergence.loglik_trace),
        loglik=ll,
        aic=2.0 * k - 2.0 * ll,
        bic=k * np.log(n) - 2.0 * ll,
        n_params=k,
        converged=best.convergence.converged,
        n_iters=best.n_iters,
        start_id=best_id,
        start_diagnostics=diagnostics,
    )


def conditional_mean_matrix(model: MixtureModel, data: DataMatrix, z_matrix: np.ndarray) -> np.ndarray:
    """Fill missing cells with the posterior-weighted conditional means
    E[X_miss | x_obs] = mu_c + (eta + sqrt(beta) eta_b) * delta_c, averaged
    over clusters with weights z. Observed cells pass through untouched."""
    from .distributions import mills_ratio

    out = data.values.copy()
    for pattern, rows in scan_patterns(data):
        if pattern.complete:
            continue
        x_obs = data.values[np.ix_(rows, pattern.observed_idx)]
        fill = np.zeros((rows.size, pattern.n_miss))
        for g, comp in enumerate(model.components):
            blocks = PartitionedParams(comp.to_cmsn(), pattern,
                                       delta=comp.delta, omega=comp.omega)
            a = blocks.skew_arg(x_obs)
            if comp.alpha >= 1.0:
                tilt = mills_ratio(a)
            else:
                from .em import _log_cmsn_and_v

                _, v, _ = _log_cmsn_and_v(blocks, x_obs)
                rb = np.sqrt(comp.beta)
                tilt = v * mills_ratio(a) + rb * (1.0 - v) * mills_ratio(a / rb)
            mean_g = blocks.mu_cond(x_obs) + tilt[:, None] * blocks.delta_c
            fill += z_matrix[rows, g][:, None] * mean_g
        out[np.ix_(rows, pattern.missing_idx)] = fill
    return out


def impute(result: FitResult, data: DataMatrix) -> np.ndarray:
    """Single deterministic completion of ``data`` under the fitted model."""
    if data.values.shape != result.z_matrix.shape[:1] + (result.model.p,):
        raise ValueError("data shape does not match the fitted result")
    return conditional_mean_matrix(result.model, data, result.z_matrix)


def refreshed_posteriors(model: MixtureModel, data: DataMatrix):
    """Recompute (z, v, loglik) for ``data`` under a stored model."""
    cache = e_step(data, model)
    return cache.z, cache.v, cache.loglik
