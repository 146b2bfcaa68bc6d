"""ECM machinery: posterior expectations, conditional-maximization updates,
initialization and the Aitken-acceleration stopping rule.

The E-step is vectorized over rows sharing a missingness pattern; block
factorizations are computed once per (cluster, pattern) and parameters are
immutable snapshots during a sweep. Some published closed forms for these
posterior moments contain misprints; every expression implemented here is
the one that agrees with direct numerical integration of the latent-variable
joint density (the test suite re-derives them by quadrature).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import log_ndtr, logsumexp

from .data import DataMatrix
from .distributions import mills_ratio
from .errors import (
    DegenerateClusterError,
    FactorizationError,
    SingularSystemError,
    SkewmixError,
)
from .mixture import ComponentParams, FitConfig, MixtureModel
from .partition import MissPattern, PartitionedParams, scan_patterns

_LOG_2PI = np.log(2.0 * np.pi)
_LOG_2 = np.log(2.0)


# ---------------------------------------------------------------------------
# posterior moments for one (row, cluster)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TMoments:
    """Posterior moments of the latent half-normal draw, split by the
    good/bad indicator: vt = E[V T], t_minus_vt = E[(1-V) T],
    vt2 = E[V T^2], t2_bad = E[(1-V) T^2]."""

    vt: np.ndarray
    t_minus_vt: np.ndarray
    vt2: np.ndarray
    t2_bad: np.ndarray

    @property
    def t2(self) -> np.ndarray:
        return self.vt2 + self.t2_bad


@dataclass(frozen=True)
class CrossMoments:
    """Conditional cross-moments of the missing block, good-weighted (e_*)
    and bad-weighted (et_*)."""

    e_vx: np.ndarray
    et_vx: np.ndarray
    e_vxx: np.ndarray
    et_vxx: np.ndarray
    e_vtx: np.ndarray
    et_vtx: np.ndarray


@dataclass(frozen=True)
class RowMoments:
    """Full-length assembled expectations for one row: observed cells carry
    their plug-in weights, missing cells the conditional expectations."""

    v: float
    tm: TMoments
    h: np.ndarray
    u: np.ndarray
    h_c: np.ndarray
    u_c: np.ndarray
    H: np.ndarray
    H_c: np.ndarray


def _t_moments_batch(blocks: PartitionedParams, x_obs, v):
    """Vectorized T-moments for all rows of one pattern group."""
    beta = blocks.comp.beta
    rb = np.sqrt(beta)
    a = blocks.skew_arg(x_obs)
    st = blocks.sigma_t
    mu_t = st * a
    w_good = mills_ratio(a)
    w_bad = mills_ratio(a / rb)
    vt = v * (mu_t + st * w_good)
    t_minus_vt = (1.0 - v) * (mu_t / rb + st * w_bad)
    # E[T^2] of a truncated normal is mu^2 + s^2 + mu*s*W(mu/s); clamp tiny
    # negative round-off since these are expectations of T^2 >= 0
    vt2 = np.maximum(v * (mu_t**2 + st**2 + mu_t * st * w_good), 0.0)
    t2_bad = np.maximum((1.0 - v) * (mu_t**2 / beta + st**2 + mu_t * st * w_bad / rb), 0.0)
    return TMoments(vt=vt, t_minus_vt=t_minus_vt, vt2=vt2, t2_bad=t2_bad), a, w_good, w_bad


def t_moments(x_o, pattern: MissPattern, comp, v_post: float) -> TMoments:
    """Posterior T-moments for a single observed vector.

    Builds the truncated-normal posterior of the latent draw (location
    ``sigma_t^2 * delta_o' omega_oo^{-1} (x - mu_o)``, scale ``sigma_t``) and
    weights its moments by the good/bad posterior ``v_post``.
    """
    blocks = PartitionedParams(comp, pattern)
    tm, _, _, _ = _t_moments_batch(blocks, np.atleast_2d(x_o), np.asarray([v_post], float))
    return TMoments(vt=float(tm.vt[0]), t_minus_vt=float(tm.t_minus_vt[0]),
                    vt2=float(tm.vt2[0]), t2_bad=float(tm.t2_bad[0]))


def _cross_moments_batch(blocks: PartitionedParams, x_obs, v, tm: TMoments, a):
    """Vectorized conditional cross-moments for one pattern group.

    ``a`` is the skew argument per row; it enters the rank-one term of the
    second moment (the conditional law's effective CDF threshold).
    """
    comp = blocks.comp
    beta = comp.beta
    rb = np.sqrt(beta)
    w_good = mills_ratio(a)
    w_bad = mills_ratio(a / rb)
    eta = v * w_good
    eta_b = (1.0 - v) * w_bad

    mu_c = blocks.mu_cond(x_obs)
    m_c = blocks.m_cond(x_obs)
    dc = blocks.delta_c
    gc = blocks.gamma_c
    sigma_c = blocks.sigma_c

    e_vx = v[:, None] * mu_c + eta[:, None] * dc
    et_vx = (1.0 - v)[:, None] * mu_c + (rb * eta_b)[:, None] * dc
    e_vtx = tm.vt[:, None] * m_c + tm.vt2[:, None] * gc
    et_vtx = tm.t_minus_vt[:, None] * m_c + (rb * tm.t2_bad)[:, None] * gc

    mm = np.einsum("ki,kj->kij", mu_c, mu_c)
    md = np.einsum("ki,j->kij", mu_c, dc)
    dd = np.outer(dc, dc)
    xi = md + md.transpose(0, 2, 1) - a[:, None, None] * dd
    e_vxx = v[:, None, None] * (sigma_c[None, :, :] + mm) + eta[:, None, None] * xi
    et_vxx = ((1.0 - v)[:, None, None] * (beta * sigma_c[None, :, :] + mm)
              + (rb * eta_b)[:, None, None] * xi)
    return CrossMoments(e_vx=e_vx, et_vx=et_vx, e_vxx=e_vxx, et_vxx=et_vxx,
                        e_vtx=e_vtx, et_vtx=et_vtx)


def cross_moments(x_o, pattern: MissPattern, comp, v_post: float, tm: TMoments) -> CrossMoments:
    """Conditional cross-moments of the missing block for a single row."""
    if pattern.complete:
        z0 = np.zeros(0)
        z00 = np.zeros((0, 0))
        return CrossMoments(z0, z0, z00, z00, z0, z0)
    blocks = PartitionedParams(comp, pattern)
    x2 = np.atleast_2d(np.asarray(x_o, dtype=float))
    a = blocks.skew_arg(x2)
    tmb = TMoments(vt=np.asarray([tm.vt]), t_minus_vt=np.asarray([tm.t_minus_vt]),
                   vt2=np.asarray([tm.vt2]), t2_bad=np.asarray([tm.t2_bad]))
    cm = _cross_moments_batch(blocks, x2, np.asarray([v_post]), tmb, a)
    return CrossMoments(e_vx=cm.e_vx[0], et_vx=cm.et_vx[0], e_vxx=cm.e_vxx[0],
                        et_vxx=cm.et_vxx[0], e_vtx=cm.e_vtx[0], et_vtx=cm.et_vtx[0])


def row_moments(x_o, pattern: MissPattern, comp, v_post: float) -> RowMoments:
    """Assembled full-length moment vectors/matrices for one row.

    Observed positions carry v*x, vt*x (and complements); missing positions
    carry the conditional expectations. With nothing missing these collapse
    to the plug-in forms h = v x, u = vt x, H = v x x'.
    """
    p = pattern.p
    obs = np.array(pattern.observed_idx)
    mis = np.array(pattern.missing_idx)
    x_o = np.asarray(x_o, dtype=float)
    tm = t_moments(x_o, pattern, comp, v_post)
    cm = cross_moments(x_o, pattern, comp, v_post, tm)

    h = np.zeros(p)
    u = np.zeros(p)
    h_c = np.zeros(p)
    u_c = np.zeros(p)
    big = np.zeros((p, p))
    big_c = np.zeros((p, p))
    h[obs] = v_post * x_o
    u[obs] = tm.vt * x_o
    h_c[obs] = (1.0 - v_post) * x_o
    u_c[obs] = tm.t_minus_vt * x_o
    big[np.ix_(obs, obs)] = v_post * np.outer(x_o, x_o)
    big_c[np.ix_(obs, obs)] = (1.0 - v_post) * np.outer(x_o, x_o)
    if mis.size:
        h[mis] = cm.e_vx
        u[mis] = cm.e_vtx
        h_c[mis] = cm.et_vx
        u_c[mis] = cm.et_vtx
        big[np.ix_(obs, mis)] = np.outer(x_o, cm.e_vx)
        big[np.ix_(mis, obs)] = np.outer(cm.e_vx, x_o)
        big[np.ix_(mis, mis)] = cm.e_vxx
        big_c[np.ix_(obs, mis)] = np.outer(x_o, cm.et_vx)
        big_c[np.ix_(mis, obs)] = np.outer(cm.et_vx, x_o)
        big_c[np.ix_(mis, mis)] = cm.et_vxx
    return RowMoments(v=v_post, tm=tm, h=h, u=u, h_c=h_c, u_c=u_c, H=big, H_c=big_c)


# ---------------------------------------------------------------------------
# responsibilities and observed-data likelihood
# ---------------------------------------------------------------------------

def _observed_log_parts(blocks: PartitionedParams, x_obs):
    """Per-row log densities of the good and bad observed-block marginals,
    plus the skew argument (reused by the T-moments)."""
    po = blocks.obs.size
    beta = blocks.comp.beta
    quad = blocks.mahal_obs(x_obs)
    a = blocks.skew_arg(x_obs)
    base = -0.5 * (po * _LOG_2PI + blocks.logdet_sigma_oo)
    lg = _LOG_2 + base - 0.5 * quad + log_ndtr(a)
    lb = (_LOG_2 + base - 0.5 * po * np.log(beta) - 0.5 * quad / beta
          + log_ndtr(a / np.sqrt(beta)))
    return lg, lb, a


def _log_cmsn_and_v(blocks: PartitionedParams, x_obs):
    """Observed-block contaminated log density and good-point posterior."""
    lg, lb, a = _observed_log_parts(blocks, x_obs)
    alpha = blocks.comp.alpha
    if alpha >= 1.0:
        return lg, np.ones_like(lg), a
    num = np.log(alpha) + lg
    lc = np.logaddexp(num, np.log1p(-alpha) + lb)
    return lc, np.exp(num - lc), a


def responsibilities(x_o, pattern: MissPattern, model: MixtureModel):
    """Cluster responsibilities z and good-point posteriors v for one row."""
    x2 = np.atleast_2d(np.asarray(x_o, dtype=float))
    logs = np.empty((1, model.g))
    vs = np.empty((1, model.g))
    for g, comp in enumerate(model.components):
        blocks = PartitionedParams(comp.to_cmsn(), pattern, delta=comp.delta, omega=comp.omega)
        lc, v, _ = _log_cmsn_and_v(blocks, x2)
        logs[:, g] = np.log(comp.pi) + lc
        vs[:, g] = v
    total = logsumexp(logs, axis=1)
    if not np.isfinite(total[0]):
        raise SkewmixError("row has zero density under every component")
    z = np.exp(logs - total[:, None])
    return z[0], vs[0]


def observed_loglik(data: DataMatrix, model: MixtureModel) -> float:
    """Observed-data log-likelihood, each row on its own observed marginal."""
    total = 0.0
    log_pi = np.log(model.pis)
    for pattern, rows in scan_patterns(data):
        x_obs = data.values[np.ix_(rows, pattern.observed_idx)]
        logs = np.empty((rows.size, model.g))
        for g, comp in enumerate(model.components):
            blocks = PartitionedParams(comp.to_cmsn(), pattern, delta=comp.delta, omega=comp.omega)
            lc, _, _ = _log_cmsn_and_v(blocks, x_obs)
            logs[:, g] = log_pi[g] + lc
        lse = logsumexp(logs, axis=1)
        if not np.all(np.isfinite(lse)):
            bad = rows[~np.isfinite(lse)][0]
            raise SkewmixError(f"row {bad} has zero density under every component")
        total += float(lse.sum())
    return total


# ---------------------------------------------------------------------------
# E-step over the whole dataset
# ---------------------------------------------------------------------------

@dataclass
class ClusterStats:
    """Sufficient statistics of one cluster, reduced over rows.

    s1/s2/s3 are the beta-discounted good+bad sums driving the location,
    skew-direction and scale updates; the *_bad sums feed the inflation
    update.
    """

    n_g: float = 0.0
    sum_zv: float = 0.0
    a_coef: float = 0.0
    b_coef: float = 0.0
    c_coef: float = 0.0
    s1: np.ndarray = None
    s2: np.ndarray = None
    s3: np.ndarray = None
    s_h_bad: np.ndarray = None
    s_u_bad: np.ndarray = None
    s_hh_bad: np.ndarray = None
    sum_z_bad: float = 0.0
    sum_z_tmv: float = 0.0
    sum_z_t2bad: float = 0.0

    @classmethod
    def zeros(cls, p: int) -> "ClusterStats":
        return cls(s1=np.zeros(p), s2=np.zeros(p), s3=np.zeros((p, p)),
                   s_h_bad=np.zeros(p), s_u_bad=np.zeros(p), s_hh_bad=np.zeros((p, p)))


@dataclass
class EStepCache:
    """Per-(row, cluster) posteriors plus reduced sufficient statistics."""

    loglik: float
    z: np.ndarray
    v: np.ndarray
    vt: np.ndarray
    t_minus_vt: np.ndarray
    vt2: np.ndarray
    t2_bad: np.ndarray
    stats: list

    @property
    def t2(self) -> np.ndarray:
        return self.vt2 + self.t2_bad


def _accumulate_group(st: ClusterStats, blocks, x_obs, z, v, tm, cm):
    """Fold one pattern group's rows (weights z) into a cluster's statistics."""
    comp = blocks.comp
    beta = comp.beta
    rb = np.sqrt(beta)
    obs = blocks.obs
    mis = blocks.mis

    w_h = v + (1.0 - v) / beta
    w_u = tm.vt + tm.t_minus_vt / rb
    st.n_g += float(z.sum())
    st.sum_zv += float((z * v).sum())
    st.a_coef += float((z * w_u).sum())
    st.b_coef += float((z * w_h).sum())
    st.c_coef += float((z * (tm.vt2 + tm.t2_bad)).sum())
    st.sum_z_bad += float((z * (1.0 - v)).sum())
    st.sum_z_tmv += float((z * tm.t_minus_vt).sum())
    st.sum_z_t2bad += float((z * tm.t2_bad).sum())

    st.s1[obs] += np.einsum("k,ki->i", z * w_h, x_obs)
    st.s2[obs] += np.einsum("k,ki->i", z * w_u, x_obs)
    st.s3[np.ix_(obs, obs)] += np.einsum("k,ki,kj->ij", z * w_h, x_obs, x_obs)
    st.s_h_bad[obs] += np.einsum("k,ki->i", z * (1.0 - v), x_obs)
    st.s_u_bad[obs] += np.einsum("k,ki->i", z * tm.t_minus_vt, x_obs)
    st.s_hh_bad[np.ix_(obs, obs)] += np.einsum("k,ki,kj->ij", z * (1.0 - v), x_obs, x_obs)

    if mis.size:
        hb = cm.e_vx + cm.et_vx / beta
        ub = cm.e_vtx + cm.et_vtx / rb
        st.s1[mis] += np.einsum("k,ki->i", z, hb)
        st.s2[mis] += np.einsum("k,ki->i", z, ub)
        st.s3[np.ix_(obs, mis)] += np.einsum("k,ki,kj->ij", z, x_obs, hb)
        st.s3[np.ix_(mis, obs)] += np.einsum("k,ki,kj->ij", z, hb, x_obs)
        st.s3[np.ix_(mis, mis)] += np.einsum("k,kij->ij", z, cm.e_vxx + cm.et_vxx / beta)
        st.s_h_bad[mis] += np.einsum("k,ki->i", z, cm.et_vx)
        st.s_u_bad[mis] += np.einsum("k,ki->i", z, cm.et_vtx)
        st.s_hh_bad[np.ix_(obs, mis)] += np.einsum("k,ki,kj->ij", z, x_obs, cm.et_vx)
        st.s_hh_bad[np.ix_(mis, obs)] += np.einsum("k,ki,kj->ij", z, cm.et_vx, x_obs)
        st.s_hh_bad[np.ix_(mis, mis)] += np.einsum("k,kij->ij", z, cm.et_vxx)


def e_step(data: DataMatrix, model: MixtureModel, groups=None) -> EStepCache:
    """One expectation sweep: responsibilities, posterior moments, reduced
    statistics, and the observed-data log-likelihood of the current model."""
    if groups is None:
        groups = scan_patterns(data)
    n, p = data.values.shape
    gsize = model.g
    z_all = np.zeros((n, gsize))
    v_all = np.zeros((n, gsize))
    vt_all = np.zeros((n, gsize))
    tmv_all = np.zeros((n, gsize))
    vt2_all = np.zeros((n, gsize))
    t2b_all = np.zeros((n, gsize))
    stats = [ClusterStats.zeros(p) for _ in range(gsize)]
    log_pi = np.log(model.pis)
    loglik = 0.0

    for pattern, rows in groups:
        x_obs = data.values[np.ix_(rows, pattern.observed_idx)]
        k = rows.size
        blocks_g = []
        logs = np.empty((k, gsize))
        vs = np.empty((k, gsize))
        args = np.empty((k, gsize))
        for g, comp in enumerate(model.components):
            blocks = PartitionedParams(comp.to_cmsn(), pattern, delta=comp.delta, omega=comp.omega)
            lc, v, a = _log_cmsn_and_v(blocks, x_obs)
            blocks_g.append(blocks)
            logs[:, g] = log_pi[g] + lc
            vs[:, g] = v
            args[:, g] = a
        lse = logsumexp(logs, axis=1)
        if not np.all(np.isfinite(lse)):
            bad = rows[~np.isfinite(lse)][0]
            raise SkewmixError(f"row {bad} has zero density under every component")
        loglik += float(lse.sum())
        z = np.exp(logs - lse[:, None])

        for g in range(gsize):
            blocks = blocks_g[g]
            v = vs[:, g]
            tm, a, _, _ = _t_moments_batch(blocks, x_obs, v)
            cm = None
            if not pattern.complete:
                cm = _cross_moments_batch(blocks, x_obs, v, tm, a)
            _accumulate_group(stats[g], blocks, x_obs, z[:, g], v, tm, cm)
            z_all[rows, g] = z[:, g]
            v_all[rows, g] = v
            vt_all[rows, g] = tm.vt
            tmv_all[rows, g] = tm.t_minus_vt
            vt2_all[rows, g] = tm.vt2
            t2b_all[rows, g] = tm.t2_bad

    return EStepCache(loglik=loglik, z=z_all, v=v_all, vt=vt_all, t_minus_vt=tmv_all,
                      vt2=vt2_all, t2_bad=t2b_all, stats=stats)


# ---------------------------------------------------------------------------
# conditional-maximization steps
# ---------------------------------------------------------------------------

def _repair_psd(omega: np.ndarray) -> np.ndarray:
    """Symmetrize and floor eigenvalues at 1e-10 * trace / p."""
    omega = 0.5 * (omega + omega.T)
    p = omega.shape[0]
    floor = 1e-10 * max(np.trace(omega), 1e-30) / p
    w, vecs = np.linalg.eigh(omega)
    if w[0] >= floor:
        return omega
    w = np.clip(w, floor, None)
    rep = (vecs * w) @ vecs.T
    return 0.5 * (rep + rep.T)


def cm_step1(cache: EStepCache, data: DataMatrix, model: MixtureModel, config: FitConfig):
    """First conditional maximization: weights, good proportions, locations,
    skew directions and scale matrices, all in closed form."""
    n, p = data.values.shape
    out = []
    for g, st in enumerate(cache.stats):
        if st.n_g <= p:
            raise DegenerateClusterError(
                f"cluster {g} effective size {st.n_g:.2f} <= dimension {p}")
        pi = st.n_g / n
        if config.no_contamination:
            alpha = 1.0
        else:
            alpha = min(st.sum_zv / st.n_g, 1.0)
            if config.alpha_min is not None:
                alpha = max(alpha, config.alpha_min)
        if config.no_skew:
            mu = st.s1 / st.b_coef
            delta = np.zeros(p)
        else:
            det = st.b_coef * st.c_coef - st.a_coef**2
            if det <= 0.0:
                raise SingularSystemError(
                    f"cluster {g} location/skew system has determinant {det:.3e}")
            mu = (st.c_coef * st.s1 - st.a_coef * st.s2) / det
            delta = (st.b_coef * st.s2 - st.a_coef * st.s1) / det
        omega = (st.s3
                 - np.outer(mu, st.s1) - np.outer(st.s1, mu)
                 + st.b_coef * np.outer(mu, mu)
                 - np.outer(delta, st.s2) - np.outer(st.s2, delta)
                 + st.a_coef * (np.outer(mu, delta) + np.outer(delta, mu))
                 + st.c_coef * np.outer(delta, delta)) / st.n_g
        omega = _repair_psd(omega)
        out.append((pi, alpha, mu, delta, omega))
    return out


def _beta_objective_terms(st: ClusterStats, mu, delta, omega, p):
    """Coefficients of the inflation profile objective
    q(b) = -(p N /2) log b - quad/(2b) + cross/sqrt(b)."""
    oi = np.linalg.inv(omega)  # p is small; the explicit inverse feeds traces
    n_bad = st.sum_z_bad
    quad = float(np.trace(oi @ (st.s_hh_bad
                                - np.outer(mu, st.s_h_bad) - np.outer(st.s_h_bad, mu)
                                + n_bad * np.outer(mu, mu))))
    cross = float((st.s_u_bad - st.sum_z_tmv * mu) @ oi @ delta)
    return n_bad, quad, cross


def cm_step2(cache: EStepCache, data: DataMatrix, model_updates, config: FitConfig, p: int):
    """Second conditional maximization: the scale-inflation factor per
    cluster, floored at ``config.beta_floor``.

    The stationarity condition of the profile objective in sqrt(beta) is the
    quadratic p*N*s^2 + cross*s - quad = 0, giving
    s = d/2 + sqrt((d/2)^2 + e) with d = (sum_z (t-vt) mu - s_u_bad)'
    omega^{-1} delta / (p N) and e = quad / (p N); a bounded 1-d search
    backs the formula up whenever the discriminant degenerates.
    """
    betas = []
    for g, st in enumerate(cache.stats):
        if config.no_contamination:
            betas.append(config.beta_floor)
            continue
        pi, alpha, mu, delta, omega = model_updates[g]
        n_bad, quad, cross = _beta_objective_terms(st, mu, delta, omega, p)
        if n_bad <= 1e-12:
            betas.append(config.beta_floor)
            continue
        d_half = -cross / (2.0 * p * n_bad)
        e_term = quad / (p * n_bad)
        disc = d_half * d_half + e_term
        if disc < 0.0:
            def neg_q(b):
                return (0.5 * p * n_bad * np.log(b) + 0.5 * quad / b
                        - cross / np.sqrt(b))
            res = minimize_scalar(neg_q, bounds=(config.beta_floor, 1e4),
                                  method="bounded", options={"xatol": 1e-10})
            betas.append(max(config.beta_floor, float(res.x)))
            continue
        root = d_half + np.sqrt(disc)
        betas.append(max(config.beta_floor, float(root * root)))
    return betas


def apply_updates(model: MixtureModel, updates, betas) -> MixtureModel:
    comps = tuple(
        ComponentParams.from_canonical(pi, mu, delta, omega, alpha, beta)
        for (pi, alpha, mu, delta, omega), beta in zip(updates, betas)
    )
    return MixtureModel(components=comps, p=model.p,
                        no_skew=model.no_skew, no_contamination=model.no_contamination)


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceState:
    """Trace and verdict of the Aitken-accelerated stopping rule."""

    loglik_trace: list = field(default_factory=list)
    epsilon: float = 1e-5
    max_iter: int = 1000
    converged: bool = False
    aitken_a: float = float("nan")


def aitken_check(trace3, epsilon: float):
    """Geometric extrapolation of the last three log-likelihoods.

    Returns (converged, acceleration a, asymptotic estimate l_inf). When the
    underlying step is flat or the acceleration reaches 1, falls back to the
    plain increment criterion.
    """
    l0, l1, l2 = (float(t) for t in trace3)
    d10 = l1 - l0
    d21 = l2 - l1
    if abs(d10) < 1e-14:
        return abs(d21) < epsilon, float("nan"), l2
    a = d21 / d10
    if a >= 1.0:
        return abs(d21) < epsilon, a, l2
    l_inf = l1 + d21 / (1.0 - a)
    gap = l_inf - l1
    return bool(0.0 <= gap < epsilon), a, l_inf

# ---------------------------------------------------------------------------
# initialization and the full ECM loop
# ---------------------------------------------------------------------------

def _column_mean_impute(data: DataMatrix) -> np.ndarray:
    filled = data.values.copy()
    for j in range(data.p):
        col = data.mask[:, j]
        mean_j = filled[col, j].mean() if col.any() else 0.0
        filled[~col, j] = mean_j
    return filled


def _sample_skewness(x: np.ndarray) -> np.ndarray:
    centered = x - x.mean(axis=0)
    s2 = np.mean(centered**2, axis=0)
    s3 = np.mean(centered**3, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        g1 = np.where(s2 > 0, s3 / np.maximum(s2, 1e-300) ** 1.5, 0.0)
    return g1


def initialize(data: DataMatrix, g: int, seed, config: FitConfig,
               lam_signs=None) -> MixtureModel:
    """Mean-impute, k-means (k-means++ seeding, 25 restarts), then per-cluster
    method of moments.

    The skewness vector starts at the per-coordinate sample skewness (sign
    kept, clipped to |lam_j| <= 2); the location and scale then solve the
    skew-normal moment equations mean = mu + sqrt(2/pi) delta and
    cov = sigma - (2/pi) delta delta'. alpha starts at 0.95 and beta at 1.5
    so the contamination is nearly off. Deterministic given the seed.
    ``lam_signs`` (per-cluster sign vectors) lets the multi-start driver
    explore skew orientations beyond the sample one.
    """
    from sklearn.cluster import KMeans

    n, p = data.values.shape
    if n <= g * (p + 1):
        raise DegenerateClusterError(f"need n > G(p+1) = {g * (p + 1)} rows, got {n}")
    filled = _column_mean_impute(data)
    ss = np.random.SeedSequence(seed)

    labels = None
    for attempt in range(10):
        state = int(ss.generate_state(1 + attempt)[-1] % (2**31 - 1))
        km = KMeans(n_clusters=g, n_init=25, random_state=state)
        cand = km.fit_predict(filled)
        sizes = np.bincount(cand, minlength=g)
        if (sizes > p).all():
            labels = cand
            break
    if labels is None:
        raise DegenerateClusterError("k-means produced an empty or tiny cluster 10 times")

    comps = []
    for j in range(g):
        block = filled[labels == j]
        mean = block.mean(axis=0)
        cov = np.atleast_2d(np.cov(block, rowvar=False, bias=True))
        if config.no_skew:
            lam = np.zeros(p)
        else:
            lam = np.clip(_sample_skewness(block), -2.0, 2.0)
            if lam_signs is not None:
                lam = np.abs(lam) * lam_signs[j]
        # invert the first two moment equations at the initial skewness
        b2 = 2.0 / np.pi
        dvec = lam / np.sqrt(1.0 + lam @ lam)
        scale_guess = np.sqrt(np.clip(np.diag(cov), 1e-12, None) / np.clip(1 - b2 * dvec**2, 0.5, 1.0))
        delta0 = scale_guess * dvec
        sigma = cov + b2 * np.outer(delta0, delta0)
        sigma = _repair_psd(sigma + 1e-8 * np.trace(sigma) / p * np.eye(p))
        mu = mean - np.sqrt(b2) * delta0
        alpha = 1.0 if config.no_contamination else 0.95
        beta = config.beta_floor if config.no_contamination else 1.5
        comps.append(ComponentParams.from_primary(
            pi=block.shape[0] / n, mu=mu, sigma=sigma, lam=lam, alpha=alpha, beta=beta))
    return MixtureModel(components=tuple(comps), p=p,
                        no_skew=config.no_skew, no_contamination=config.no_contamination)


@dataclass
class EcmRun:
    """Outcome of one start of the ECM loop."""

    model: MixtureModel
    cache: EStepCache
    convergence: ConvergenceState
    n_iters: int

    @property
    def loglik(self) -> float:
        return self.convergence.loglik_trace[-1]


def run_ecm(data: DataMatrix, model0: MixtureModel, config: FitConfig, groups=None) -> EcmRun:
    """Iterate E / CM-1 / CM-2 from ``model0`` until the Aitken criterion or
    the iteration cap. The returned cache and trace tail belong to the final
    parameters."""
    if groups is None:
        groups = scan_patterns(data)
    p = data.p
    state = ConvergenceState(epsilon=config.tol, max_iter=config.max_iter)
    model = model0
    cache = None
    n_updates = 0
    for _ in range(config.max_iter):
        cache = e_step(data, model, groups)
        state.loglik_trace.append(cache.loglik)
        if len(state.loglik_trace) >= 3:
            conv, a, _ = aitken_check(state.loglik_trace[-3:], config.tol)
            state.aitken_a = a
            if conv:
                state.converged = True
                break
        updates = cm_step1(cache, data, model, config)
        betas = cm_step2(cache, data, updates, config, p)
        model = apply_updates(model, updates, betas)
        n_updates += 1
    else:
        # cap reached after an update: refresh posteriors for the final model
        cache = e_step(data, model, groups)
        state.loglik_trace.append(cache.loglik)
    return EcmRun(model=model, cache=cache, convergence=state, n_iters=n_updates)
