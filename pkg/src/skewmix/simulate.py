"""Synthetic-data generators, the missing-at-random injector, and the
desk-scale experiment grid.

Part A draws bivariate two-cluster samples under five noise regimes; Part B
draws a single ten-dimensional cluster with skewness concentrated on the
last coordinate. Replaced-noise counts are exact, all generators are
bit-reproducible given their seed, and rows replaced by noise are marked bad
regardless of the cluster they came from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataMatrix
from .distributions import CmsnParams, sample_cmsn
from .errors import DataError, SkewmixError
from .metrics import ari, confusion_rates
from .mixture import FitConfig

# fixed two-cluster design shared by every Part A case
PART_A_PI = np.array([0.3, 0.7])
PART_A_MU2 = np.array([0.0, 3.0])
PART_A_SIGMA = (np.array([[2.0, -1.0], [-1.0, 2.0]]),
                np.array([[2.0, 1.0], [1.0, 2.0]]))
PART_A_LAM = (np.array([3.0, 5.0]), np.array([4.0, 2.0]))
PART_A_MU1 = {"close": np.array([0.0, -1.0]), "far": np.array([0.0, -3.0])}
PART_A_NU = (4.0, 10.0)
PART_A_ALPHA = (0.9, 0.8)
PART_A_BETA = (20.0, 30.0)

PART_A_CASES = ("a", "b", "c", "d", "e", "msn")
PART_B_CASES = ("a", "b")


@dataclass(frozen=True)
class ScenarioSpec:
    """One experiment cell family: which generator, its size, its grid."""

    part: str
    case_id: str
    n: int
    proximity: str = "far"
    missing_fractions: tuple = (0.0,)
    replicates: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.part not in ("A", "B"):
            raise ValueError("part must be 'A' or 'B'")
        cases = PART_A_CASES if self.part == "A" else PART_B_CASES
        if self.case_id not in cases:
            raise ValueError(f"case {self.case_id!r} unknown for part {self.part}")
        if self.part == "A" and self.proximity not in ("close", "far"):
            raise ValueError("proximity must be 'close' or 'far'")
        if self.n < 50:
            raise ValueError("n must be at least 50")
        for f in self.missing_fractions:
            if not 0.0 <= f <= 0.95:
                raise ValueError("missing fractions must lie in [0, 0.95]")


@dataclass(frozen=True)
class GroundTruth:
    """True cluster labels, good/bad flags, and the injected mask."""

    labels: np.ndarray
    good_flags: np.ndarray
    mask: np.ndarray | None = None


def _part_a_components(proximity):
    mus = (PART_A_MU1[proximity], PART_A_MU2)
    return [
        (mus[g], PART_A_SIGMA[g], PART_A_LAM[g]) for g in range(2)
    ]


def _draw_two_cluster_msn(n, proximity, rng, alphas=(1.0, 1.0), betas=(1.001, 1.001)):
    comps = _part_a_components(proximity)
    labels = rng.choice(2, size=n, p=PART_A_PI)
    x = np.empty((n, 2))
    good = np.ones(n, dtype=bool)
    for g in range(2):
        rows = np.where(labels == g)[0]
        if rows.size == 0:
            continue
        params = CmsnParams.make(*comps[g], alpha=alphas[g], beta=betas[g])
        draws, flags = sample_cmsn(params, rows.size, rng)
        x[rows] = draws
        good[rows] = flags
    return x, labels, good


def generate_part_a(case_id: str, n: int, proximity: str, seed):
    """Bivariate two-cluster sample under one of the Part A regimes.

    Cases: (a) skew-t clusters (skew-normal draw over a chi-square mixing
    divisor, df 4 and 10); (b) contaminated clusters with alpha (0.9, 0.8)
    and beta (20, 30); (c) 1% of rows replaced by (0, U(10, 15)); (d)/(e)
    5%/20% of rows replaced by uniform noise on (0, 10)^2; 'msn' is the
    plain skew-normal base with no replacement. Replaced rows keep their
    source-cluster label but are marked bad.
    """
    if case_id not in PART_A_CASES:
        raise ValueError(f"unknown Part A case {case_id!r}")
    rng = np.random.default_rng(seed)

    if case_id == "b":
        x, labels, good = _draw_two_cluster_msn(
            n, proximity, rng, alphas=PART_A_ALPHA, betas=PART_A_BETA)
        return DataMatrix.from_values(x), GroundTruth(labels=labels, good_flags=good)

    x, labels, good = _draw_two_cluster_msn(n, proximity, rng)

    if case_id == "a":
        # heavy tails per cluster: divide centred draws by sqrt(chi2_nu / nu)
        comps = _part_a_components(proximity)
        for g in range(2):
            rows = np.where(labels == g)[0]
            scale = np.sqrt(rng.chisquare(PART_A_NU[g], size=rows.size) / PART_A_NU[g])
            mu = comps[g][0]
            x[rows] = mu + (x[rows] - mu) / scale[:, None]
        return DataMatrix.from_values(x), GroundTruth(labels=labels, good_flags=good)

    if case_id in ("c", "d", "e"):
        frac = {"c": 0.01, "d": 0.05, "e": 0.20}[case_id]
        n_noise = int(round(frac * n))
        chosen = rng.choice(n, size=n_noise, replace=False)
        if case_id == "c":
            x[chosen, 0] = 0.0
            x[chosen, 1] = rng.uniform(10.0, 15.0, size=n_noise)
        else:
            x[chosen] = rng.uniform(0.0, 10.0, size=(n_noise, 2))
        good[chosen] = False
    return DataMatrix.from_values(x), GroundTruth(labels=labels, good_flags=good)


def generate_part_b(case_id: str, n: int, seed):
    """Single ten-dimensional cluster, standard scale, skewness 10 on the
    last coordinate only.

    Case (a): 1% of rows altered, half zeroed and half replaced by U(10, 15)
    coordinates (needs at least ten altered rows to split). Case (b): 5% of
    rows replaced by noise whose first nine coordinates share one U(-5, 5)
    draw while the last coordinate gets its own.
    """
    if case_id not in PART_B_CASES:
        raise ValueError(f"unknown Part B case {case_id!r}")
    rng = np.random.default_rng(seed)
    p = 10
    lam = np.zeros(p)
    lam[-1] = 10.0
    params = CmsnParams.make(np.zeros(p), np.eye(p), lam, alpha=1.0, beta=1.001)
    x, _ = sample_cmsn(params, n, rng)
    labels = np.zeros(n, dtype=int)
    good = np.ones(n, dtype=bool)

    if case_id == "a":
        n_alt = int(round(0.01 * n))
        if n_alt < 10:
            raise DataError("case (a) needs n*0.01 >= 10 to split the altered rows")
        chosen = rng.choice(n, size=n_alt, replace=False)
        half = n_alt // 2 + n_alt % 2
        x[chosen[:half]] = 0.0
        x[chosen[half:]] = rng.uniform(10.0, 15.0, size=(n_alt - half, p))
        good[chosen] = False
    else:
        n_noise = int(round(0.05 * n))
        chosen = rng.choice(n, size=n_noise, replace=False)
        shared = rng.uniform(-5.0, 5.0, size=n_noise)
        last = rng.uniform(-5.0, 5.0, size=n_noise)
        x[chosen, :-1] = shared[:, None]
        x[chosen, -1] = last
        good[chosen] = False
    return DataMatrix.from_values(x), GroundTruth(labels=labels, good_flags=good)


def inject_mar(data: DataMatrix, row_fraction: float, seed):
    """Mask cells in exactly round(fraction * n) rows, missing at random.

    Row selection is weighted by a logistic transform of the standardized
    first column, which stays observed in every masked row, so missingness
    depends on observed values only (never on what gets masked). Within a
    chosen row a nonempty subset of the remaining coordinates is masked.
    """
    if not 0.0 <= row_fraction <= 0.95:
        raise ValueError("row_fraction must lie in [0, 0.95]")
    if data.p == 1:
        raise DataError("cannot mask p=1 data without losing whole rows")
    rng = np.random.default_rng(seed)
    n, p = data.values.shape
    n_rows = int(round(row_fraction * n))
    mask = data.mask.copy()
    if n_rows == 0:
        return DataMatrix(values=data.values.copy(), mask=mask,
                          column_names=data.column_names), mask

    anchor = data.values[:, 0]
    filled = np.where(np.isfinite(anchor), anchor, np.nanmean(anchor))
    sd = filled.std()
    standardized = (filled - filled.mean()) / (sd if sd > 0 else 1.0)
    weights = 1.0 / (1.0 + np.exp(-1.5 * standardized))
    weights = weights / weights.sum()
    chosen = rng.choice(n, size=n_rows, replace=False, p=weights)

    for i in chosen:
        k = int(rng.integers(1, p))  # how many of coordinates 1..p-1 to hide
        cols = rng.choice(np.arange(1, p), size=k, replace=False)
        mask[i, cols] = False
    values = data.values.copy()
    values[~mask] = np.nan
    return DataMatrix(values=values, mask=mask, column_names=data.column_names), mask


# ---------------------------------------------------------------------------
# the experiment grid
# ---------------------------------------------------------------------------

def _generate(spec: ScenarioSpec, seed):
    if spec.part == "A":
        return generate_part_a(spec.case_id, spec.n, spec.proximity, seed)
    return generate_part_b(spec.case_id, spec.n, seed)


def run_grid(spec: ScenarioSpec, fit_configs: dict):
    """Fit every config on every (replicate, missing-fraction) cell.

    ``fit_configs`` maps a config name to a FitConfig template whose
    ``n_clusters`` should match the generator (2 for Part A, 1 for Part B).
    Returns (run_rows, mean_rows): one dict per run plus per-cell means with
    an explicit count of excluded (failed) runs. Deterministic given the
    spec seed; each run gets its own child seed.
    """
    from .model import fit as fit_model

    runs = []
    for rep in range(spec.replicates):
        for ci, fraction in enumerate(spec.missing_fractions):
            child = np.random.SeedSequence((spec.seed, rep, ci))
            gen_seed, mar_seed, fit_seed = [int(s) for s in child.generate_state(3)]
            data, truth = _generate(spec, gen_seed)
            mask = None
            if fraction > 0:
                data, mask = inject_mar(data, fraction, mar_seed)
            for name, template in fit_configs.items():
                row = {
                    "part": spec.part, "case": spec.case_id, "n": spec.n,
                    "proximity": spec.proximity if spec.part == "A" else "",
                    "missing_fraction": fraction, "replicate": rep,
                    "config": name, "seed": fit_seed,
                    "ari": "", "accuracy": "", "tpr": "", "fpr": "",
                    "loglik": "", "aic": "", "converged": "", "error": "",
                }
                try:
                    cfg = FitConfig(
                        n_clusters=template.n_clusters, tol=template.tol,
                        max_iter=template.max_iter, n_starts=template.n_starts,
                        seed=fit_seed, beta_floor=template.beta_floor,
                        no_skew=template.no_skew,
                        no_contamination=template.no_contamination,
                        alpha_min=template.alpha_min, workers=template.workers)
                    res = fit_model(data, cfg)
                except SkewmixError as exc:
                    row["error"] = f"{type(exc).__name__}"
                else:
                    row["ari"] = ari(truth.labels, res.labels)
                    acc, tpr, fpr = confusion_rates(res.outlier_flags, ~truth.good_flags)
                    row["accuracy"] = acc
                    row["tpr"] = "" if tpr is None else tpr
                    row["fpr"] = fpr
                    row["loglik"] = res.loglik
                    row["aic"] = res.aic
                    row["converged"] = res.converged
                runs.append(row)
    means = _cell_means(runs)
    return runs, means


def _cell_means(runs):
    cells = {}
    for row in runs:
        key = (row["part"], row["case"], row["n"], row["proximity"],
               row["missing_fraction"], row["config"])
        cells.setdefault(key, []).append(row)
    means = []
    for key in sorted(cells, key=str):
        rows = cells[key]
        ok = [r for r in rows if r["error"] == ""]
        entry = {
            "part": key[0], "case": key[1], "n": key[2], "proximity": key[3],
            "missing_fraction": key[4], "config": key[5],
            "n_runs": len(rows), "n_excluded": len(rows) - len(ok),
        }
        for metric in ("ari", "accuracy", "tpr", "fpr"):
            vals = [r[metric] for r in ok if r[metric] != ""]
            entry[f"mean_{metric}"] = float(np.mean(vals)) if vals else ""
        means.append(entry)
    return means
