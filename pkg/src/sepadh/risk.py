"""Discrete-time hazard and cumulative-incidence curves."""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def cumulative_from_hazards(hazards):
    """Product-formula cumulative incidence: R_k = R_{k-1} + (1-R_{k-1}) l_k."""
    hazards = np.asarray(hazards, dtype=np.float64)
    risk = np.empty_like(hazards)
    alive = 1.0
    for i, lam in enumerate(hazards):
        risk[i] = (1.0 - alive) + alive * lam
        alive *= 1.0 - lam
    return risk


@dataclass
class RiskCurve:
    """Per-interval hazards and cumulative incidence for one intervention.

    ``atrisk_mass`` is the (possibly weighted) denominator behind each
    hazard. Bootstrap bands, when present, are percentile intervals at
    ``level``. ``truncated_at`` records the first interval whose risk set
    was empty; the arrays stop just before it.
    """

    ks: np.ndarray
    hazard: np.ndarray
    risk: np.ndarray
    atrisk_mass: np.ndarray
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    level: float | None = None
    label: str = ""
    truncated_at: int | None = None

    @classmethod
    def from_hazards(cls, hazards, atrisk_mass, **kw):
        hazards = np.asarray(hazards, dtype=np.float64)
        ks = np.arange(1, hazards.shape[0] + 1, dtype=np.int64)
        return cls(ks=ks, hazard=hazards, risk=cumulative_from_hazards(hazards),
                   atrisk_mass=np.asarray(atrisk_mass, dtype=np.float64), **kw)

    def __len__(self):
        return self.ks.shape[0]

    def risk_at(self, k):
        idx = np.flatnonzero(self.ks == k)
        if idx.shape[0] != 1:
            raise DomainError(f"no interval {k} in this curve")
        return float(self.risk[idx[0]])

    @property
    def final_risk(self):
        if len(self) == 0:
            return 0.0
        return float(self.risk[-1])

    def with_band(self, lo, hi, level):
        return RiskCurve(ks=self.ks, hazard=self.hazard, risk=self.risk,
                         atrisk_mass=self.atrisk_mass,
                         lo=np.asarray(lo, dtype=np.float64),
                         hi=np.asarray(hi, dtype=np.float64), level=level,
                         label=self.label, truncated_at=self.truncated_at)

    def to_csv(self, dest=None):
        """Serialize as ``k,lambda,risk,lo,hi,atrisk_mass`` (lo/hi blank
        when no bootstrap band is attached)."""
        buf = io.StringIO()
        buf.write("k,lambda,risk,lo,hi,atrisk_mass\n")
        for i in range(len(self)):
            lo = "" if self.lo is None else format(self.lo[i], ".10g")
            hi = "" if self.hi is None else format(self.hi[i], ".10g")
            buf.write(f"{self.ks[i]},{self.hazard[i]:.10g},{self.risk[i]:.10g},"
                      f"{lo},{hi},{self.atrisk_mass[i]:.10g}\n")
        text = buf.getvalue()
        if dest is None:
            return text
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w", encoding="utf-8") as fh:
                fh.write(text)
        return None


@dataclass
class PrevalenceCurve:
    """Weighted per-interval prevalence of one binary panel variable."""

    variable: str
    ks: np.ndarray
    value: np.ndarray
    atrisk_mass: np.ndarray
    label: str = ""
    truncated_at: int | None = None

    def to_csv(self, dest=None):
        buf = io.StringIO()
        buf.write(f"k,{self.variable},atrisk_mass\n")
        for i in range(self.ks.shape[0]):
            buf.write(f"{self.ks[i]},{self.value[i]:.10g},"
                      f"{self.atrisk_mass[i]:.10g}\n")
        text = buf.getvalue()
        if dest is None:
            return text
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w", encoding="utf-8") as fh:
                fh.write(text)
        return None


def hazards_from_counts(events, at_risk, horizon, label=""):
    """Hazard curve from per-interval event and risk-set counts, truncating
    with a warning at the first empty risk set."""
    events = np.asarray(events, dtype=np.float64)
    at_risk = np.asarray(at_risk, dtype=np.float64)
    truncated_at = None
    usable = horizon
    empty = np.flatnonzero(at_risk[:horizon] <= 0)
    if empty.shape[0]:
        truncated_at = int(empty[0]) + 1
        usable = truncated_at - 1
        warnings.warn(
            f"empty risk set at interval {truncated_at}; curve truncated "
            f"({label or 'curve'})", stacklevel=3)
    hazards = np.zeros(usable, dtype=np.float64)
    nz = at_risk[:usable] > 0
    hazards[nz] = events[:usable][nz] / at_risk[:usable][nz]
    return RiskCurve.from_hazards(hazards, at_risk[:usable], label=label,
                                  truncated_at=truncated_at)


def empirical_cumulative_incidence(panel, arm):
    """Unweighted hazards and cumulative incidence of one arm: events over
    records at risk, interval by interval."""
    rows = np.flatnonzero(panel.column("z") == arm)
    if rows.shape[0] == 0:
        raise DomainError(f"no records in arm {arm}")
    ks = panel.column("k")[rows]
    ys = panel.column("y")[rows]
    at_risk = np.bincount(ks, minlength=panel.horizon + 1)[1:]
    events = np.bincount(ks, weights=ys.astype(np.float64),
                         minlength=panel.horizon + 1)[1:]
    return hazards_from_counts(events, at_risk, panel.horizon,
                               label=f"empirical arm {arm}")
