"""Longitudinal two-arm trial simulator with adherence dynamics.

Generates person-period panels from a discrete-time structural model in
which a randomized indicator acts through two separate channels: one
driving adherence and its covariate process, the other driving the
outcome process. Factual trials set both channels to the arm value;
counterfactual runs may split them.

Within each interval the draw order is: adherence-side covariate,
outcome-side covariate, adherence, outcome (then optional treatment
switching). Failure is absorbing. Draws come from counter-based
substreams keyed by (seed, channel pair, interval, variable slot), with
individual i always at vector position i, so enlarging the cohort or the
horizon never perturbs existing trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .panel import Panel

# Substream slots, in within-interval draw order.
_SLOT_LA, _SLOT_LY, _SLOT_A, _SLOT_Y, _SLOT_C = range(5)

DEFAULT_COEFFICIENTS = {
    # p(L_A=1) = b0 + b1*a_prev + b2*z_a*a_prev
    "l_a": (0.05, 0.035, -0.035),
    # p(L_Y=1) = b0 + b1*a_prev + b2*z_y*a_prev
    "l_y": (0.95, -0.60, -0.15),
    # p(A=1) = b0 + b1*z_a*a_prev + b2*l_a + b3*l_y
    "a": (0.6, 0.2, 0.0, 0.0),
    # p(Y=1) = b0 + b1*l_y + b2*a + b3*l_a
    "y": (0.035, 0.01, -0.03, 0.01),
}

# Adherence-equation variants: 1 = past adherence only, 2 = adds the
# adherence-side covariate, 3 = adds the outcome-side covariate too.
ADHERENCE_MODELS = {
    1: (0.6, 0.2, 0.0, 0.0),
    2: (0.6, 0.2, -0.5, 0.0),
    3: (0.6, 0.2, -0.5, 0.2),
}

DEFAULT_CROSSOVER = (0.06, 0.08, 0.02)


@dataclass(frozen=True)
class StructuralEquations:
    """Linear-probability kernels for the four panel variables.

    Each tuple holds the coefficients documented in
    ``DEFAULT_COEFFICIENTS``; ``crossover`` (optional) parameterizes
    p(C=1) = b0 + b1*(1-a) + b2*l_y, drawn after adherence. All kernels
    accept scalars or aligned numpy arrays.
    """

    l_a: tuple = DEFAULT_COEFFICIENTS["l_a"]
    l_y: tuple = DEFAULT_COEFFICIENTS["l_y"]
    a: tuple = DEFAULT_COEFFICIENTS["a"]
    y: tuple = DEFAULT_COEFFICIENTS["y"]
    crossover: tuple | None = None

    def p_la(self, a_prev, z_a):
        b = self.l_a
        return b[0] + b[1] * a_prev + b[2] * (z_a * a_prev)

    def p_ly(self, a_prev, z_y):
        b = self.l_y
        return b[0] + b[1] * a_prev + b[2] * (z_y * a_prev)

    def p_a(self, a_prev, l_a, l_y, z_a):
        b = self.a
        return b[0] + b[1] * (z_a * a_prev) + b[2] * l_a + b[3] * l_y

    def p_y(self, l_a, l_y, a):
        b = self.y
        return b[0] + b[1] * l_y + b[2] * a + b[3] * l_a

    def p_c(self, a, l_y):
        if self.crossover is None:
            raise ConfigError("no crossover coefficients configured")
        b = self.crossover
        return b[0] + b[1] * (1 - a) + b[2] * l_y

    def validate(self):
        """Check every probability over the full binary parent grid lies in
        [0, 1]; raise ConfigError naming the first offending state."""
        bits = (0, 1)
        for a_prev in bits:
            for z in bits:
                for name, p in (("l_a", self.p_la(a_prev, z)),
                                ("l_y", self.p_ly(a_prev, z))):
                    if not 0.0 <= p <= 1.0:
                        raise ConfigError(
                            f"{name} probability {p:g} outside [0, 1] at "
                            f"a_prev={a_prev}, z={z}")
        for a_prev in bits:
            for l_a in bits:
                for l_y in bits:
                    for z in bits:
                        p = self.p_a(a_prev, l_a, l_y, z)
                        if not 0.0 <= p <= 1.0:
                            raise ConfigError(
                                f"a probability {p:g} outside [0, 1] at "
                                f"a_prev={a_prev}, l_a={l_a}, l_y={l_y}, "
                                f"z={z}")
        for l_a in bits:
            for l_y in bits:
                for a in bits:
                    p = self.p_y(l_a, l_y, a)
                    if not 0.0 <= p <= 1.0:
                        raise ConfigError(
                            f"y probability {p:g} outside [0, 1] at "
                            f"l_a={l_a}, l_y={l_y}, a={a}")
                    if self.crossover is not None:
                        pc = self.p_c(a, l_y)
                        if not 0.0 <= pc <= 1.0:
                            raise ConfigError(
                                f"crossover probability {pc:g} outside "
                                f"[0, 1] at a={a}, l_y={l_y}")
        return self

    @classmethod
    def adherence_model(cls, which, crossover=None, **overrides):
        """The three stock scenarios, selected by adherence-equation
        variant (1, 2 or 3)."""
        if which not in ADHERENCE_MODELS:
            raise ConfigError(
                f"unknown adherence model {which!r}; expected one of "
                f"{sorted(ADHERENCE_MODELS)}")
        eq = cls(a=ADHERENCE_MODELS[which], crossover=crossover, **overrides)
        return eq.validate()


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one simulated dataset."""

    n_per_arm: int
    horizon: int
    seed: int
    adherence_model: int = 1
    equations: StructuralEquations | None = None
    crossover: bool = False
    referent_za: int = 1
    referent_zy: int = 0
    label: str = ""

    def __post_init__(self):
        if self.n_per_arm < 0:
            raise ConfigError(f"n_per_arm must be >= 0, got {self.n_per_arm}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        for name in ("referent_za", "referent_zy"):
            if getattr(self, name) not in (0, 1):
                raise ConfigError(f"{name} must be 0 or 1")
        object.__setattr__(self, "equations", self.resolve_equations())

    def resolve_equations(self):
        eq = self.equations
        if eq is None:
            eq = StructuralEquations.adherence_model(self.adherence_model)
        if self.crossover and eq.crossover is None:
            eq = replace(eq, crossover=DEFAULT_CROSSOVER)
        if not self.crossover and eq.crossover is not None:
            eq = replace(eq, crossover=None)
        return eq.validate()


def _stream(seed, z_a, z_y, k, slot):
    ss = np.random.SeedSequence([int(seed), int(z_a), int(z_y),
                                 int(k), int(slot)])
    return np.random.Generator(np.random.PCG64(ss))


def _simulate_channels(cfg, z_a, z_y, id_offset=0):
    """One cohort of ``n_per_arm`` trajectories under channel values
    (z_a, z_y). Returns column arrays for the surviving person-periods."""
    eq = cfg.equations
    n = cfg.n_per_arm
    with_c = eq.crossover is not None

    cols = {name: [] for name in
            ("id", "k", "z", "a", "l_a", "l_y", "y", "c")}
    ids = np.arange(n, dtype=np.int64) + id_offset
    at_risk = np.ones(n, dtype=bool)
    a_prev = np.zeros(n, dtype=np.int8)

    for k in range(1, cfg.horizon + 1):
        if not at_risk.any():
            break
        u_la = _stream(cfg.seed, z_a, z_y, k, _SLOT_LA).random(n)
        u_ly = _stream(cfg.seed, z_a, z_y, k, _SLOT_LY).random(n)
        u_a = _stream(cfg.seed, z_a, z_y, k, _SLOT_A).random(n)
        u_y = _stream(cfg.seed, z_a, z_y, k, _SLOT_Y).random(n)

        l_a = (u_la < eq.p_la(a_prev, z_a)).astype(np.int8)
        l_y = (u_ly < eq.p_ly(a_prev, z_y)).astype(np.int8)
        a = (u_a < eq.p_a(a_prev, l_a, l_y, z_a)).astype(np.int8)
        y = (u_y < eq.p_y(l_a, l_y, a)).astype(np.int8)
        if with_c:
            u_c = _stream(cfg.seed, z_a, z_y, k, _SLOT_C).random(n)
            c = (u_c < eq.p_c(a, l_y)).astype(np.int8)
        else:
            c = np.zeros(n, dtype=np.int8)

        live = np.flatnonzero(at_risk)
        cols["id"].append(ids[live])
        cols["k"].append(np.full(live.shape[0], k, dtype=np.int32))
        cols["z"].append(np.full(live.shape[0], z_a, dtype=np.int8))
        cols["a"].append(a[live])
        cols["l_a"].append(l_a[live])
        cols["l_y"].append(l_y[live])
        cols["y"].append(y[live])
        cols["c"].append(c[live])

        gone = y.astype(bool)
        if with_c:
            gone |= c.astype(bool)
        at_risk &= ~gone
        a_prev = a

    out = {}
    for name, chunks in cols.items():
        if name == "c" and not with_c:
            continue
        if chunks:
            out[name] = np.concatenate(chunks)
        else:
            dt = np.int64 if name == "id" else (
                np.int32 if name == "k" else np.int8)
            out[name] = np.zeros(0, dtype=dt)
    return out


def _assemble(parts, cfg, intervention):
    names = list(parts[0])
    columns = {name: np.concatenate([p[name] for p in parts])
               for name in names}
    return Panel(**columns, horizon=cfg.horizon,
                 covariate_layout=("l_a", "l_y"),
                 intervention=intervention, validate=False)


def simulate_trial(cfg):
    """Two-arm randomized trial: arm z sets both channels to z. Arm 0
    holds ids 0..n-1, arm 1 ids n..2n-1."""
    parts = [_simulate_channels(cfg, 0, 0, id_offset=0),
             _simulate_channels(cfg, 1, 1, id_offset=cfg.n_per_arm)]
    return _assemble(parts, cfg, intervention=None)


def simulate_counterfactual(cfg, z_a, z_y):
    """One cohort with the adherence channel held at ``z_a`` and the
    outcome channel at ``z_y``. With z_a == z_y == z this reproduces the
    draws of trial arm z exactly (ids start at 0). The panel's ``z``
    column records ``z_a``; the channel pair is kept in
    ``panel.intervention``."""
    for name, v in (("z_a", z_a), ("z_y", z_y)):
        if v not in (0, 1):
            raise ConfigError(f"{name} must be 0 or 1, got {v!r}")
    part = _simulate_channels(cfg, z_a, z_y, id_offset=0)
    return _assemble([part], cfg, intervention=(z_a, z_y))
