"""Inverse-probability-weighted estimation of separable-effect risks.

The estimand is the risk under channel pair (z_a, z_y): the adherence
channel held at z_a, the outcome channel at z_y. Two weighting variants
target it:

* ``weights_y``: evaluated on arm z_a; transports the outcome density
  from arm z_y via per-interval outcome-density ratios times a pair of
  randomization-probability ratios.
* ``weights_a``: evaluated on arm z_y; transports the adherence density
  from arm z_a, with its own probability-ratio pair.

Simplified variants drop the probability-ratio pair; that is only valid
when the corresponding covariate block is absent from the panel layout,
and is refused otherwise.

Weighted hazards divide weighted events by weighted risk-set mass per
interval; cumulative incidence follows by the product formula.
Percentile bootstrap confidence bands resample individuals, refitting
every nuisance model inside each replicate.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (BootstrapError, ConfigError, DomainError, FitError,
                     NumericalError, PositivityError, WeightError)
from .models import ModelSet, feature_columns
from .panel import resample_individuals
from .risk import (PrevalenceCurve, RiskCurve, empirical_cumulative_incidence,
                   hazards_from_counts)

_VARIANTS = ("w_y", "w_a")


@dataclass
class WeightSeries:
    """Per-record interval factors and within-individual cumulative
    weights, over the records of one arm of a panel."""

    variant: str
    z_a: int
    z_y: int
    arm: int
    rows: np.ndarray        # absolute row indices into the source panel
    ks: np.ndarray          # interval of each selected record
    factors: np.ndarray
    cumulative: np.ndarray

    def __len__(self):
        return self.rows.shape[0]

    def diagnostics(self):
        """Per-interval weight summary: min, max, mean and effective
        sample size of the cumulative weights."""
        out = []
        for k in range(1, int(self.ks.max(initial=0)) + 1):
            sel = self.ks == k
            w = self.cumulative[sel]
            if w.shape[0] == 0:
                continue
            ssq = float((w ** 2).sum())
            ess = float(w.sum()) ** 2 / ssq if ssq > 0 else 0.0
            out.append({"k": k, "n": int(w.shape[0]),
                        "min": float(w.min()), "max": float(w.max()),
                        "mean": float(w.mean()), "ess": ess})
        return out


def _cumulate(ks, factors):
    """Per-individual running products. Selected rows are ordered by
    (id, k) with contiguous intervals from 1, so each row with k > 1 has
    its predecessor immediately before it."""
    cum = factors.astype(np.float64).copy()
    if cum.shape[0] == 0:
        return cum
    for k in range(2, int(ks.max()) + 1):
        sel = np.flatnonzero(ks == k)
        cum[sel] = cum[sel - 1] * factors[sel]
    return cum


def _arm_rows_by_id(panel, arm):
    """Rows of one arm ordered by (id, k)."""
    rows = np.flatnonzero(panel.column("z") == arm)
    if rows.shape[0] == 0:
        raise DomainError(f"no records in arm {arm}")
    ids = panel.column("id")[rows]
    ks = panel.column("k")[rows]
    order = np.lexsort((ks, ids))
    rows = rows[order]
    return rows, ks[order]


def _subset_features(panel, names, rows, **overrides):
    return feature_columns(panel, names, rows=rows, **overrides)


def _ratio(num, den, rows, ks, panel, what):
    """Elementwise num/den with a named error on zero denominators."""
    bad = den == 0.0
    if bad.any():
        i = int(np.argmax(bad))
        raise WeightError(
            f"zero denominator probability in the {what} factor at "
            f"id={int(panel.column('id')[rows[i]])}, k={int(ks[i])}")
    return num / den


def _density_ratio(model, panel, rows, ks, realized, z_num, z_den, what):
    """f(value | features, z=z_num) / f(value | features, z=z_den) with
    zero predicted densities treated as errors, not weights."""
    names = model.spec.conditioning
    num = model.prob_of(_subset_features(panel, names, rows, z=z_num),
                        realized)
    den = model.prob_of(_subset_features(panel, names, rows, z=z_den),
                        realized)
    zero = num == 0.0
    if zero.any():
        i = int(np.argmax(zero))
        raise WeightError(
            f"zero predicted density in the {what} factor numerator at "
            f"id={int(panel.column('id')[rows[i]])}, k={int(ks[i])}; the "
            f"target channel assigns this record no mass")
    return _ratio(num, den, rows, ks, panel, what)


def _arm_prob_ratio(model, panel, rows, ks, z_num, z_den, what):
    """P(Z=z_num | features) / P(Z=z_den | features)."""
    feats = _subset_features(panel, model.spec.conditioning, rows)
    num = model.prob_of(feats, np.full(rows.shape[0], z_num, dtype=np.int64))
    den = model.prob_of(feats, np.full(rows.shape[0], z_den, dtype=np.int64))
    zero = num == 0.0
    if zero.any():
        i = int(np.argmax(zero))
        raise WeightError(
            f"zero predicted probability in the {what} factor numerator "
            f"at id={int(panel.column('id')[rows[i]])}, k={int(ks[i])}")
    return _ratio(num, den, rows, ks, panel, what)


def _check_channels(z_a, z_y):
    for name, v in (("z_a", z_a), ("z_y", z_y)):
        if v not in (0, 1):
            raise ConfigError(f"{name} must be 0 or 1, got {v!r}")


def weights_y(panel, models, z_a, z_y, simplified=False):
    """Outcome-transport weights, evaluated on arm z_a records.

    The full form multiplies three factors per interval: the outcome-
    density ratio (target channel over factual), the arm-probability
    ratio given history through the current outcome-side covariate, and
    the inverse arm-probability ratio given history through the current
    adherence-side covariate. The simplified form keeps only the density
    ratio, which is valid only when no outcome-side covariate is in the
    panel layout.
    """
    _check_channels(z_a, z_y)
    if simplified and "l_y" in panel.covariate_layout:
        raise ConfigError(
            "simplified outcome-transport weights are not valid for a "
            "panel with an outcome-side covariate; use the full form")
    rows, ks = _arm_rows_by_id(panel, z_a)
    realized = panel.column("y")[rows]
    factors = _density_ratio(models["outcome"], panel, rows, ks, realized,
                             z_y, z_a, "outcome density")
    if not simplified:
        factors = factors * _arm_prob_ratio(
            models["arm_full"], panel, rows, ks, z_y, z_a,
            "arm probability (full history)")
        factors = factors * _arm_prob_ratio(
            models["arm_mid"], panel, rows, ks, z_a, z_y,
            "arm probability (pre-outcome-covariate history)")
    return WeightSeries(
        variant="w_y_simplified" if simplified else "w_y",
        z_a=z_a, z_y=z_y, arm=z_a, rows=rows, ks=ks, factors=factors,
        cumulative=_cumulate(ks, factors))


def weights_a(panel, models, z_a, z_y, simplified=False):
    """Adherence-transport weights, evaluated on arm z_y records.

    The full form multiplies the adherence-density ratio (adherence
    channel over factual) by an arm-probability ratio pair around the
    current adherence-side covariate. The simplified form keeps only
    the density ratio, valid only when no adherence-side covariate is
    in the panel layout.
    """
    _check_channels(z_a, z_y)
    if simplified and "l_a" in panel.covariate_layout:
        raise ConfigError(
            "simplified adherence-transport weights are not valid for a "
            "panel with an adherence-side covariate; use the full form")
    rows, ks = _arm_rows_by_id(panel, z_y)
    realized = panel.column("a")[rows]
    factors = _density_ratio(models["adherence"], panel, rows, ks, realized,
                             z_a, z_y, "adherence density")
    if not simplified:
        factors = factors * _arm_prob_ratio(
            models["arm_mid"], panel, rows, ks, z_a, z_y,
            "arm probability (post-adherence-covariate history)")
        factors = factors * _arm_prob_ratio(
            models["arm_base"], panel, rows, ks, z_y, z_a,
            "arm probability (previous-interval history)")
    return WeightSeries(
        variant="w_a_simplified" if simplified else "w_a",
        z_a=z_a, z_y=z_y, arm=z_y, rows=rows, ks=ks, factors=factors,
        cumulative=_cumulate(ks, factors))


def crossover_weights(panel, models, arm, z_a=None, z_y=None):
    """Censoring weights for treatment switching: indicator of staying
    on the assigned arm over the fitted probability of doing so, per
    interval, on the records of ``arm``. Records that switch get factor
    zero and stay in the panel as weight-zero terminal rows."""
    if not panel.has_crossover:
        raise DomainError(
            "panel has no crossover column; nothing to reweight")
    rows, ks = _arm_rows_by_id(panel, arm)
    c = panel.column("c")[rows]
    model = models["crossover"]
    feats = _subset_features(panel, model.spec.conditioning, rows)
    p_stay = model.prob_of(feats, np.zeros(rows.shape[0], dtype=np.int64))
    stay = (c == 0)
    bad = stay & (p_stay == 0.0)
    if bad.any():
        i = int(np.argmax(bad))
        raise WeightError(
            f"zero fitted continuation probability for a record that did "
            f"stay, at id={int(panel.column('id')[rows[i]])}, k={int(ks[i])}")
    factors = np.zeros(rows.shape[0], dtype=np.float64)
    factors[stay] = 1.0 / p_stay[stay]
    return WeightSeries(
        variant="crossover", z_a=z_a if z_a is not None else arm,
        z_y=z_y if z_y is not None else arm, arm=arm, rows=rows, ks=ks,
        factors=factors, cumulative=_cumulate(ks, factors))


def compose_weights(base, other):
    """Pointwise product of two weight series over the same records."""
    if base.arm != other.arm or base.rows.shape != other.rows.shape or \
            not np.array_equal(base.rows, other.rows):
        raise DomainError(
            "weight series cover different records and cannot be composed")
    return WeightSeries(
        variant=f"{base.variant}*{other.variant}", z_a=base.z_a,
        z_y=base.z_y, arm=base.arm, rows=base.rows, ks=base.ks,
        factors=base.factors * other.factors,
        cumulative=base.cumulative * other.cumulative)


def weighted_risk(panel, weights, label=""):
    """Weighted hazards and cumulative incidence from a weight series."""
    y = panel.column("y")[weights.rows].astype(np.float64)
    w = weights.cumulative
    horizon = panel.horizon
    den = np.bincount(weights.ks, weights=w, minlength=horizon + 1)[1:]
    num = np.bincount(weights.ks, weights=w * y, minlength=horizon + 1)[1:]
    if not (np.isfinite(den).all() and np.isfinite(num).all()):
        raise NumericalError("non-finite weighted sums in hazard")
    return hazards_from_counts(num, den, horizon,
                               label=label or weights.variant)


def weighted_marginal(panel, weights, variable, label=""):
    """Weighted per-interval prevalence of one binary panel variable
    among the weighted risk set."""
    if variable not in ("a", "l_a", "l_y", "y", "c"):
        raise ConfigError(f"unknown panel variable {variable!r}")
    vals = panel.column(variable)[weights.rows].astype(np.float64)
    w = weights.cumulative
    horizon = panel.horizon
    den = np.bincount(weights.ks, weights=w, minlength=horizon + 1)[1:]
    num = np.bincount(weights.ks, weights=w * vals, minlength=horizon + 1)[1:]
    truncated_at = None
    usable = horizon
    empty = np.flatnonzero(den <= 0)
    if empty.shape[0]:
        truncated_at = int(empty[0]) + 1
        usable = truncated_at - 1
        warnings.warn(
            f"empty weighted risk set at interval {truncated_at}; "
            f"prevalence truncated ({variable})", stacklevel=2)
    value = np.zeros(usable, dtype=np.float64)
    nz = den[:usable] > 0
    value[nz] = num[:usable][nz] / den[:usable][nz]
    return PrevalenceCurve(
        variable=variable, ks=np.arange(1, usable + 1, dtype=np.int64),
        value=value, atrisk_mass=den[:usable], label=label,
        truncated_at=truncated_at)


def _point_estimate(panel, z_a, z_y, variant, simplified, crossover, specs):
    models = ModelSet.fit(panel, specs)
    if variant == "w_y":
        w = weights_y(panel, models, z_a, z_y, simplified=simplified)
    else:
        w = weights_a(panel, models, z_a, z_y, simplified=simplified)
    if crossover:
        w = compose_weights(
            w, crossover_weights(panel, models, w.arm, z_a=z_a, z_y=z_y))
    curve = weighted_risk(panel, w,
                          label=f"separable (z_a={z_a}, z_y={z_y})")
    return models, w, curve


@dataclass
class BootstrapSummary:
    replicates: int
    successes: int
    failures: int
    level: float
    seed: int


@dataclass
class EstimateReport:
    """Everything produced by one estimation run."""

    z_a: int
    z_y: int
    variant: str
    curve: RiskCurve
    comparator: RiskCurve
    weights: WeightSeries
    models: ModelSet
    diagnostics: list = field(default_factory=list)
    bootstrap: BootstrapSummary | None = None

    def render(self):
        lines = [f"separable risk (z_a={self.z_a}, z_y={self.z_y}) "
                 f"via {self.variant}"]
        for i, k in enumerate(self.curve.ks):
            band = ""
            if self.curve.lo is not None:
                band = (f" [{self.curve.lo[i]:.6g}, "
                        f"{self.curve.hi[i]:.6g}]")
            lines.append(f"  k={int(k)}: risk={self.curve.risk[i]:.6g}"
                         f"{band}")
        lines.append(f"comparator (arm {self.z_a} as treated): final risk "
                     f"{self.comparator.final_risk:.6g}")
        return "\n".join(lines) + "\n"


_BOOT_RECOVERABLE = (FitError, PositivityError, WeightError,
                     NumericalError, DomainError)


def bootstrap_risk(panel, estimator, replicates, seed, level=0.95,
                   min_success=0.8, threads=None, horizon=None):
    """Percentile bootstrap over individuals.

    ``estimator`` maps a panel to a per-interval risk array. Each
    replicate resamples individuals with replacement from its own
    deterministic substream, refits everything, and records the risks;
    replicates that fail for numerical reasons are counted and skipped.
    If fewer than ``min_success`` of them succeed the whole bootstrap
    fails. Returns (lo, hi, summary).
    """
    if replicates < 1:
        raise ConfigError(f"replicates must be >= 1, got {replicates}")
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must be in (0, 1), got {level}")
    horizon = horizon if horizon is not None else panel.horizon

    def one(r):
        rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
        sample = resample_individuals(panel, rng)
        try:
            risks = np.asarray(estimator(sample), dtype=np.float64)
        except _BOOT_RECOVERABLE:
            return None
        padded = np.full(horizon, np.nan)
        padded[:min(risks.shape[0], horizon)] = risks[:horizon]
        return padded

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(replicates)))
    else:
        results = [one(r) for r in range(replicates)]

    kept = [r for r in results if r is not None]
    failures = replicates - len(kept)
    if len(kept) < min_success * replicates:
        raise BootstrapError(
            f"only {len(kept)} of {replicates} bootstrap replicates "
            f"succeeded (need at least {min_success:.0%})")
    stack = np.vstack(kept)
    alpha = (1.0 - level) / 2.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lo = np.nanpercentile(stack, 100.0 * alpha, axis=0)
        hi = np.nanpercentile(stack, 100.0 * (1.0 - alpha), axis=0)
    summary = BootstrapSummary(replicates=replicates, successes=len(kept),
                               failures=failures, level=level, seed=seed)
    return lo, hi, summary


def estimate_separable(panel, z_a, z_y, variant="w_y", simplified=False,
                       crossover=False, specs=None, bootstrap=None,
                       seed=0, level=0.95, threads=None):
    """Full estimation pipeline: fit nuisance models, build weights,
    compute the weighted risk curve and the intention-to-treat
    comparator for arm z_a, optionally with bootstrap bands.

    ``bootstrap`` is the number of replicates (None or 0 disables).
    """
    _check_channels(z_a, z_y)
    if variant not in _VARIANTS:
        raise ConfigError(f"unknown weighting variant {variant!r}; "
                          f"expected one of {_VARIANTS}")
    if crossover and not panel.has_crossover:
        raise ConfigError(
            "crossover weighting requested but the panel has no "
            "crossover column")
    models, w, curve = _point_estimate(panel, z_a, z_y, variant,
                                       simplified, crossover, specs)
    comparator = empirical_cumulative_incidence(panel, z_a)
    summary = None
    if bootstrap:
        def replicate_risks(sample):
            _, _, c = _point_estimate(sample, z_a, z_y, variant,
                                      simplified, crossover, specs)
            return c.risk
        lo, hi, summary = bootstrap_risk(
            panel, replicate_risks, bootstrap, seed, level=level,
            threads=threads, horizon=len(curve))
        curve = curve.with_band(lo[:len(curve)], hi[:len(curve)], level)
    return EstimateReport(z_a=z_a, z_y=z_y, variant=w.variant, curve=curve,
                          comparator=comparator, weights=w, models=models,
                          diagnostics=w.diagnostics(), bootstrap=summary)
