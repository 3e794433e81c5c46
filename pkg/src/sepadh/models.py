"""Nuisance models over person-period records.

Two families:

* ``saturated``: one cell per joint configuration of the conditioning
  variables (pooled over intervals unless ``k`` is listed explicitly),
  fitted by exact cell frequencies. Predicting in a cell never seen
  during fitting is a positivity error.
* ``pooled-logistic``: a single logistic regression over all person-
  periods, fitted by iteratively reweighted least squares.

Feature names resolve against a panel: current-interval columns by name
(``a``, ``l_a``, ``l_y``, ``z``, ``c``), one-interval lags with a
``_prev`` suffix (zero before the first interval), ``k`` for the
interval index itself, and products of binary features spelled with
``*`` (for example ``z*a_prev``).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, FitError, PositivityError

_LAG_SUFFIX = "_prev"
_TARGETS = ("y", "a", "z", "c")
_FAMILIES = ("saturated", "pooled-logistic")

# The standard batch: an outcome model and an adherence model for the
# density ratios, three nested arm models for the randomization-
# probability ratios, and a switching model for crossover weights.
DEFAULT_SPECS = {
    "outcome": ("y", ("a", "l_a", "l_y", "z"), "saturated"),
    "adherence": ("a", ("a_prev", "l_a", "l_y", "z"), "saturated"),
    "arm_full": ("z", ("a_prev", "l_a", "l_y"), "saturated"),
    "arm_mid": ("z", ("a_prev", "l_a"), "saturated"),
    "arm_base": ("z", ("a_prev",), "saturated"),
    "crossover": ("c", ("a", "l_a", "l_y", "z"), "saturated"),
}


@dataclass(frozen=True)
class ModelSpec:
    """What to regress on what, and how."""

    target: str
    conditioning: tuple
    family: str = "saturated"

    def __post_init__(self):
        object.__setattr__(self, "conditioning", tuple(self.conditioning))
        if self.target not in _TARGETS:
            raise ConfigError(f"unknown model target {self.target!r}")
        if self.family not in _FAMILIES:
            raise ConfigError(
                f"unknown model family {self.family!r}; expected one of "
                f"{_FAMILIES}")
        seen = set()
        for name in self.conditioning:
            for part in name.split("*"):
                base = part[:-len(_LAG_SUFFIX)] \
                    if part.endswith(_LAG_SUFFIX) else part
                if base not in ("a", "l_a", "l_y", "z", "c", "k"):
                    raise ConfigError(f"unknown feature {name!r}")
                if "*" in name and part == "k":
                    raise ConfigError(
                        f"feature {name!r}: products must be of binary "
                        f"features")
            if name in seen:
                raise ConfigError(f"duplicate feature {name!r}")
            seen.add(name)
        if self.target in self.conditioning:
            raise ConfigError(
                f"target {self.target!r} cannot also be a feature")


def default_specs():
    return {name: ModelSpec(t, cond, fam)
            for name, (t, cond, fam) in DEFAULT_SPECS.items()}


def _atom_column(panel, part):
    if part == "k":
        return panel.column("k").astype(np.int64)
    if part.endswith(_LAG_SUFFIX):
        return panel.lagged(part[:-len(_LAG_SUFFIX)]).astype(np.int64)
    return panel.column(part).astype(np.int64)


def feature_columns(panel, names, rows=None, **overrides):
    """Resolve feature names to aligned int arrays over panel rows.

    ``rows`` restricts to the given row indices; scalar ``overrides``
    replace a column everywhere it appears, including inside product
    features (the counterfactual evaluation hook: ``z=1`` evaluates
    every z-dependent feature at z=1).
    """
    def atom(part):
        if part in overrides:
            n = rows.shape[0] if rows is not None else len(panel)
            return np.full(n, int(overrides[part]), dtype=np.int64)
        col = _atom_column(panel, part)
        return col[rows] if rows is not None else col

    out = {}
    for name in names:
        if name in overrides:
            n = rows.shape[0] if rows is not None else len(panel)
            out[name] = np.full(n, int(overrides[name]), dtype=np.int64)
            continue
        col = atom(name.split("*")[0])
        for part in name.split("*")[1:]:
            col = col * atom(part)
        out[name] = col
    return out


def _cell_cards(spec, horizon):
    """Cardinality of each feature dimension in a saturated table."""
    return tuple((horizon + 1) if n == "k" else 2 for n in spec.conditioning)


def _encode_cells(spec, feats, cards):
    code = np.zeros(feats[spec.conditioning[0]].shape[0] if spec.conditioning
                    else 0, dtype=np.int64)
    for name, card in zip(spec.conditioning, cards):
        vals = feats[name]
        if name != "k" and ((vals < 0) | (vals > 1)).any():
            raise DataError(f"feature {name!r} is not binary")
        code = code * card + vals
    return code


def _decode_cell(spec, cards, code):
    parts = []
    for name, card in zip(reversed(spec.conditioning), reversed(cards)):
        parts.append((name, int(code % card)))
        code //= card
    return ", ".join(f"{n}={v}" for n, v in reversed(parts))


def _sigmoid(eta):
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_likelihood(y, eta):
    # log sigma(eta) for y=1, log(1-sigma(eta)) for y=0, computed stably
    # as -log(1+exp(-s*eta)) with s = 2y-1.
    s = 2.0 * y - 1.0
    return -np.sum(np.logaddexp(0.0, -s * eta))


@dataclass
class FittedModel:
    """A fitted conditional probability of a binary panel variable."""

    spec: ModelSpec
    horizon: int
    n_obs: int
    # saturated family
    table: np.ndarray | None = None
    counts: np.ndarray | None = None
    cards: tuple = ()
    # pooled-logistic family
    beta: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def prob_one(self, feats):
        """P(target = 1 | features), vectorized over aligned arrays."""
        n = feats[self.spec.conditioning[0]].shape[0] \
            if self.spec.conditioning else None
        if self.spec.family == "saturated":
            code = _encode_cells(self.spec, feats, self.cards)
            if n is None:
                code = np.zeros(1, dtype=np.int64)
            bad = (code < 0) | (code >= self.table.shape[0])
            if bad.any():
                raise DataError(
                    f"feature value outside the fitted range for "
                    f"{self.spec.target!r} model")
            empty = self.counts[code] == 0
            if empty.any():
                cell = _decode_cell(self.spec, self.cards,
                                    int(code[np.argmax(empty)]))
                raise PositivityError(
                    f"no fitted observations in cell ({cell}) of the "
                    f"{self.spec.target!r} model", state=cell)
            return self.table[code]
        if n is None:
            n = 1
        design = [np.ones(n, dtype=np.float64)]
        design += [feats[name].astype(np.float64)
                   for name in self.spec.conditioning]
        eta = np.column_stack(design) @ self.beta
        return _sigmoid(eta)

    def prob_of(self, feats, value):
        p1 = self.prob_one(feats)
        value = np.asarray(value)
        return np.where(value == 1, p1, 1.0 - p1)

    def snapshot(self):
        """Stable text rendering of the fitted parameters."""
        buf = io.StringIO()
        cond = ", ".join(self.spec.conditioning) or "(intercept only)"
        buf.write(f"model {self.spec.target} | {cond} "
                  f"[{self.spec.family}] n={self.n_obs}\n")
        if self.spec.family == "saturated":
            for code in range(self.table.shape[0]):
                if self.counts[code] == 0:
                    continue
                cell = _decode_cell(self.spec, self.cards, code) \
                    or "(all records)"
                buf.write(f"  {cell}: p={self.table[code]:.10g} "
                          f"n={int(self.counts[code])}\n")
        else:
            names = ("intercept",) + self.spec.conditioning
            for name, b in zip(names, self.beta):
                buf.write(f"  {name}: {b:+.10g}\n")
            buf.write(f"  iterations={self.diagnostics['iterations']} "
                      f"loglik={self.diagnostics['loglik']:.10g}\n")
        return buf.getvalue()


def predict(model, record, value=1, **overrides):
    """Probability that the model target equals ``value`` for one
    person-period record, with optional counterfactual feature
    overrides (for example ``z=1`` or ``a_prev=0``)."""
    used = set()

    def atom(part):
        if part in overrides:
            used.add(part)
            return int(overrides[part])
        if part == "k":
            return record.k
        if part.endswith(_LAG_SUFFIX):
            raise ConfigError(
                f"feature {part!r} needs panel context; pass it as an "
                f"override")
        return int(getattr(record, part))

    feats = {}
    for name in model.spec.conditioning:
        if name in overrides:
            used.add(name)
            val = int(overrides[name])
        else:
            val = 1
            for part in name.split("*"):
                val *= atom(part)
        feats[name] = np.asarray([val])
    unused = set(overrides) - used
    if unused:
        raise ConfigError(
            f"overrides {sorted(unused)} are not features of this model")
    return float(model.prob_of(feats, value)[0])


def fit_model(panel, spec):
    """Fit one model specification on every record of the panel."""
    if spec.target == "c" and not panel.has_crossover:
        raise DataError("panel has no crossover column to model")
    y = panel.column(spec.target).astype(np.float64)
    n_obs = y.shape[0]
    if n_obs == 0:
        raise DataError(f"cannot fit {spec.target!r} model on empty panel")
    feats = feature_columns(panel, spec.conditioning)

    if spec.family == "saturated":
        cards = _cell_cards(spec, panel.horizon)
        size = 1
        for c in cards:
            size *= c
        code = _encode_cells(spec, feats, cards)
        if not spec.conditioning:
            code = np.zeros(n_obs, dtype=np.int64)
            size = 1
        counts = np.bincount(code, minlength=size)
        ones = np.bincount(code, weights=y, minlength=size)
        table = np.zeros(size, dtype=np.float64)
        nz = counts > 0
        table[nz] = ones[nz] / counts[nz]
        return FittedModel(spec=spec, horizon=panel.horizon, n_obs=n_obs,
                           table=table, counts=counts, cards=cards,
                           diagnostics={"cells": int(nz.sum()),
                                        "empty_cells": int(size - nz.sum())})

    # pooled logistic via iteratively reweighted least squares
    design = [np.ones(n_obs, dtype=np.float64)]
    design += [feats[name].astype(np.float64) for name in spec.conditioning]
    X = np.column_stack(design)
    mean_y = y.mean()
    if mean_y in (0.0, 1.0):
        raise FitError(
            f"target {spec.target!r} is constant ({int(mean_y)}) over the "
            f"fitting records", diagnostics={"n": n_obs})
    beta = np.zeros(X.shape[1], dtype=np.float64)
    ll_prev = -np.inf
    for it in range(1, 101):
        eta = X @ beta
        mu = _sigmoid(eta)
        w = mu * (1.0 - mu)
        if not np.isfinite(w).all() or w.max() == 0.0:
            raise FitError("degenerate working weights in IRLS",
                           diagnostics={"iteration": it})
        XtWX = (X * w[:, None]).T @ X
        grad = X.T @ (y - mu)
        try:
            delta = np.linalg.solve(XtWX, grad)
        except np.linalg.LinAlgError as exc:
            raise FitError(
                f"singular information matrix in IRLS (collinear or "
                f"unidentified features): {exc}",
                diagnostics={"iteration": it}) from exc
        beta = beta + delta
        if np.abs(beta).max() > 40.0:
            raise FitError(
                "runaway coefficients in IRLS (suspected perfect "
                "separation)",
                diagnostics={"iteration": it,
                             "max_abs_beta": float(np.abs(beta).max())})
        ll = _log_likelihood(y, X @ beta)
        if np.abs(delta).max() < 1e-10 or abs(ll - ll_prev) < 1e-12:
            return FittedModel(
                spec=spec, horizon=panel.horizon, n_obs=n_obs, beta=beta,
                diagnostics={"iterations": it, "loglik": float(ll),
                             "max_delta": float(np.abs(delta).max())})
        ll_prev = ll
    raise FitError("IRLS failed to converge in 100 iterations",
                   diagnostics={"loglik": float(ll_prev)})


@dataclass
class ModelSet:
    """The fitted batch of nuisance models behind the weighted
    estimators."""

    models: dict
    horizon: int

    @classmethod
    def fit(cls, panel, specs=None):
        if specs is None:
            specs = default_specs()
            if not panel.has_crossover:
                specs = {k: v for k, v in specs.items() if k != "crossover"}
        fitted = {name: fit_model(panel, spec)
                  for name, spec in specs.items()}
        return cls(models=fitted, horizon=panel.horizon)

    def __getitem__(self, name):
        if name not in self.models:
            raise ConfigError(
                f"model {name!r} was not fitted; have "
                f"{sorted(self.models)}")
        return self.models[name]

    def __contains__(self, name):
        return name in self.models

    def snapshot(self):
        return "".join(self.models[name].snapshot()
                       for name in sorted(self.models))
