"""Exact finite-state oracles for the separable-effect estimands.

Everything here works on a ``DiscreteDgp``: four conditional Bernoulli
kernels over full variable histories, each taking the channel value
relevant to the variable it generates. Three computations are offered:

* ``enumerate_gformula``: the iterated-expectation formula for the
  interventional risk, by exhaustive enumeration of trajectories
  (exponential in the horizon, guarded to short horizons).
* ``markov_gformula``: the same quantity for order-1 kernels, by a
  state-space recursion that scales to long horizons.
* ``exact_weighted_representation``: the weighted hazard representation
  of the same risk, evaluated in exact arithmetic on the factual law of
  one arm, with randomization-probability ratios obtained from the
  two-arm mixture by Bayes rule. Agreement with the g-formula certifies
  the weight algebra without any sampling noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, PositivityError
from .risk import cumulative_from_hazards

_MAX_ENUM_HORIZON = 8


class _Kahan:
    """Compensated accumulator, so trajectory masses sum exactly enough
    for 1e-10 comparisons."""

    __slots__ = ("total", "carry")

    def __init__(self):
        self.total = 0.0
        self.carry = 0.0

    def add(self, x):
        y = x - self.carry
        t = self.total + y
        self.carry = (t - self.total) - y
        self.total = t

    @property
    def value(self):
        return self.total


@dataclass(frozen=True)
class DiscreteDgp:
    """Four history-conditional kernels.

    Each kernel is ``fn(k, z, a_hist, la_hist, ly_hist) -> P(var = 1)``
    where ``z`` is the channel value for that variable (adherence
    channel for ``p_la``/``p_a``, outcome channel for ``p_ly``/``p_y``)
    and the histories are tuples of past values. At interval k the
    stage-appropriate prefix lengths are: ``p_la`` sees k-1 of each;
    ``p_ly`` sees la up to k; ``p_a`` sees both covariates up to k;
    ``p_y`` sees a up to k as well. The factual law of arm z feeds z to
    every kernel.
    """

    horizon: int
    p_la: callable
    p_ly: callable
    p_a: callable
    p_y: callable

    @classmethod
    def from_equations(cls, eq, horizon):
        """Wrap order-1 structural equations (the simulator's kernels)."""

        def p_la(k, z, a_hist, la_hist, ly_hist):
            a_prev = a_hist[-1] if a_hist else 0
            return float(eq.p_la(a_prev, z))

        def p_ly(k, z, a_hist, la_hist, ly_hist):
            a_prev = a_hist[-1] if a_hist else 0
            return float(eq.p_ly(a_prev, z))

        def p_a(k, z, a_hist, la_hist, ly_hist):
            a_prev = a_hist[-1] if a_hist else 0
            return float(eq.p_a(a_prev, la_hist[-1], ly_hist[-1], z))

        def p_y(k, z, a_hist, la_hist, ly_hist):
            return float(eq.p_y(la_hist[-1], ly_hist[-1], a_hist[-1]))

        return cls(horizon=horizon, p_la=p_la, p_ly=p_ly, p_a=p_a, p_y=p_y)

    @classmethod
    def from_random_tables(cls, rng, horizon, lo=0.05, hi=0.95):
        """Arbitrary full-history kernels with probabilities bounded away
        from 0 and 1, for equivalence batteries."""
        if horizon > 3:
            raise DomainError("random-table kernels support horizon <= 3")

        tables = ({}, {}, {}, {})

        def make(idx):
            def kernel(k, z, a_hist, la_hist, ly_hist):
                key = (k, int(z), tuple(a_hist), tuple(la_hist),
                       tuple(ly_hist))
                tab = tables[idx]
                if key not in tab:
                    tab[key] = float(rng.uniform(lo, hi))
                return tab[key]
            return kernel

        return cls(horizon=horizon, p_la=make(0), p_ly=make(1),
                   p_a=make(2), p_y=make(3))


def _check_horizon(dgp, horizon):
    if horizon is None:
        horizon = dgp.horizon
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    if horizon > _MAX_ENUM_HORIZON:
        raise DomainError(
            f"exhaustive enumeration is exponential in the horizon; "
            f"{horizon} exceeds the guard of {_MAX_ENUM_HORIZON}")
    return horizon


def enumerate_gformula(dgp, z_a, z_y, horizon=None):
    """Interventional risk by interval under channel pair (z_a, z_y),
    by full trajectory enumeration. Returns an array of length K with
    cumulative incidence at 1..K."""
    horizon = _check_horizon(dgp, horizon)
    deaths = [_Kahan() for _ in range(horizon)]

    def walk(k, mass, a_hist, la_hist, ly_hist):
        if k > horizon or mass == 0.0:
            return
        pla = dgp.p_la(k, z_a, a_hist, la_hist, ly_hist)
        for l_a in (0, 1):
            m1 = mass * (pla if l_a else 1.0 - pla)
            if m1 == 0.0:
                continue
            la2 = la_hist + (l_a,)
            ply = dgp.p_ly(k, z_y, a_hist, la2, ly_hist)
            for l_y in (0, 1):
                m2 = m1 * (ply if l_y else 1.0 - ply)
                if m2 == 0.0:
                    continue
                ly2 = ly_hist + (l_y,)
                pa = dgp.p_a(k, z_a, a_hist, la2, ly2)
                for a in (0, 1):
                    m3 = m2 * (pa if a else 1.0 - pa)
                    if m3 == 0.0:
                        continue
                    a2 = a_hist + (a,)
                    py = dgp.p_y(k, z_y, a2, la2, ly2)
                    deaths[k - 1].add(m3 * py)
                    walk(k + 1, m3 * (1.0 - py), a2, la2, ly2)

    walk(1, 1.0, (), (), ())
    return np.cumsum([d.value for d in deaths])


def markov_gformula(eq, z_a, z_y, horizon):
    """Interventional risk for order-1 structural equations by a
    recursion on the (previous adherence) state. Exact at any horizon."""
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    # mass[a_prev] = P(alive through k-1, A_{k-1} = a_prev)
    mass = np.array([1.0, 0.0], dtype=np.float64)
    risks = np.empty(horizon, dtype=np.float64)
    dead = 0.0
    for _k in range(1, horizon + 1):
        nxt = np.zeros(2, dtype=np.float64)
        for a_prev in (0, 1):
            m = mass[a_prev]
            if m == 0.0:
                continue
            pla = eq.p_la(a_prev, z_a)
            ply = eq.p_ly(a_prev, z_y)
            for l_a in (0, 1):
                m1 = m * (pla if l_a else 1.0 - pla)
                for l_y in (0, 1):
                    m2 = m1 * (ply if l_y else 1.0 - ply)
                    if m2 == 0.0:
                        continue
                    pa = eq.p_a(a_prev, l_a, l_y, z_a)
                    for a in (0, 1):
                        m3 = m2 * (pa if a else 1.0 - pa)
                        if m3 == 0.0:
                            continue
                        py = eq.p_y(l_a, l_y, a)
                        dead += m3 * py
                        nxt[a] += m3 * (1.0 - py)
        risks[_k - 1] = dead
        mass = nxt
    return risks


def _positivity(state_desc):
    raise PositivityError(
        "the weighting arm's factual law has zero mass on a state the "
        "intervention reaches", state=state_desc)


def exact_weighted_representation(dgp, z_a, z_y, horizon=None,
                                  variant="w_y"):
    """Risk under (z_a, z_y) via the weighted hazard representation.

    ``variant`` picks which transported factor carries the reweighting:
    ``"w_y"`` evaluates outcome-density ratios on the factual law of arm
    z_a; ``"w_a"`` evaluates adherence-density ratios on the factual law
    of arm z_y. Both multiply in a pair of randomization-probability
    ratios computed exactly from the two-arm mixture (equal arm shares,
    so each conditional arm probability is proportional to the state's
    mass under that arm's law).

    Trajectories the target mixture gives zero mass contribute zero
    weight and are pruned; a state with positive target mass but zero
    factual mass is a structural positivity violation and raises.
    """
    horizon = _check_horizon(dgp, horizon)
    if variant not in ("w_y", "w_a"):
        raise ConfigError(f"unknown weighting variant {variant!r}")
    if z_a == z_y:
        variant_arm = z_a
    else:
        variant_arm = z_a if variant == "w_y" else z_y

    num = [_Kahan() for _ in range(horizon)]
    den = [_Kahan() for _ in range(horizon)]

    # Masses carried along a trajectory: under the arm-z_a law, the
    # arm-z_y law, and the mixed target (g-formula) law.
    def walk(k, m_za, m_zy, m_g, w, a_hist, la_hist, ly_hist):
        m_f = m_za if variant_arm == z_a else m_zy
        if k > horizon or (m_f == 0.0 and m_g == 0.0) or w is None:
            return
        state = f"k={k}, a_hist={a_hist}, la_hist={la_hist}, " \
                f"ly_hist={ly_hist}"
        if m_f == 0.0:
            _positivity(state)

        pla_za = dgp.p_la(k, z_a, a_hist, la_hist, ly_hist)
        pla_zy = dgp.p_la(k, z_y, a_hist, la_hist, ly_hist)
        for l_a in (0, 1):
            f_la_za = pla_za if l_a else 1.0 - pla_za
            f_la_zy = pla_zy if l_a else 1.0 - pla_zy
            m1_za = m_za * f_la_za
            m1_zy = m_zy * f_la_zy
            m1_g = m_g * f_la_za          # covariate-a factor uses z_a
            la2 = la_hist + (l_a,)
            w1 = w
            if variant == "w_a":
                # ratio pair: arm z_a over arm z_y at the post-l_a state,
                # times arm z_y over arm z_a at the pre-l_a state
                w1 = _apply_pair(w1, m1_za, m1_zy, m_za, m_zy, m1_g,
                                 f"{state}, l_a={l_a}")

            ply_za = dgp.p_ly(k, z_a, a_hist, la2, ly_hist)
            ply_zy = dgp.p_ly(k, z_y, a_hist, la2, ly_hist)
            for l_y in (0, 1):
                f_ly_za = ply_za if l_y else 1.0 - ply_za
                f_ly_zy = ply_zy if l_y else 1.0 - ply_zy
                m2_za = m1_za * f_ly_za
                m2_zy = m1_zy * f_ly_zy
                m2_g = m1_g * f_ly_zy     # covariate-y factor uses z_y
                ly2 = ly_hist + (l_y,)
                w2 = w1
                if variant == "w_y":
                    # arm z_y over arm z_a at the post-l_y state, times
                    # arm z_a over arm z_y at the post-l_a state
                    w2 = _apply_pair(w2, m2_zy, m2_za, m1_zy, m1_za, m2_g,
                                     f"{state}, l_a={l_a}, l_y={l_y}")
                if w2 is None:
                    continue

                pa_za = dgp.p_a(k, z_a, a_hist, la2, ly2)
                pa_zy = dgp.p_a(k, z_y, a_hist, la2, ly2)
                for a in (0, 1):
                    f_a_za = pa_za if a else 1.0 - pa_za
                    f_a_zy = pa_zy if a else 1.0 - pa_zy
                    m3_za = m2_za * f_a_za
                    m3_zy = m2_zy * f_a_zy
                    m3_g = m2_g * f_a_za  # adherence factor uses z_a
                    a2 = a_hist + (a,)
                    w3 = w2
                    m3_f = m3_za if variant_arm == z_a else m3_zy
                    if variant == "w_a":
                        f_num, f_den = f_a_za, f_a_zy
                        if f_den == 0.0:
                            if m3_g > 0.0:
                                _positivity(
                                    f"{state}, l_a={l_a}, l_y={l_y}, a={a}")
                            continue
                        w3 = w2 * (f_num / f_den)
                    if m3_f == 0.0:
                        if m3_g > 0.0:
                            _positivity(
                                f"{state}, l_a={l_a}, l_y={l_y}, a={a}")
                        continue
                    if w3 == 0.0 and m3_g == 0.0:
                        continue

                    py_za = dgp.p_y(k, z_a, a2, la2, ly2)
                    py_zy = dgp.p_y(k, z_y, a2, la2, ly2)
                    for yv in (0, 1):
                        f_y_za = py_za if yv else 1.0 - py_za
                        f_y_zy = py_zy if yv else 1.0 - py_zy
                        m4_f = m3_f * (f_y_za if variant_arm == z_a
                                       else f_y_zy)
                        m4_g = m3_g * f_y_zy   # outcome factor uses z_y
                        if variant == "w_y":
                            f_den = f_y_za
                            if f_den == 0.0:
                                if m4_g > 0.0:
                                    _positivity(
                                        f"{state}, l_a={l_a}, l_y={l_y}, "
                                        f"a={a}, y={yv}")
                                continue
                            w4 = w3 * (f_y_zy / f_den)
                        else:
                            w4 = w3
                        contrib = m4_f * w4
                        den[k - 1].add(contrib)
                        if yv == 1:
                            num[k - 1].add(contrib)
                        else:
                            m4_za = m3_za * f_y_za
                            m4_zy = m3_zy * f_y_zy
                            walk(k + 1, m4_za, m4_zy, m4_g, w4,
                                 a2, la2, ly2)

    walk(1, 1.0, 1.0, 1.0, 1.0, (), (), ())
    hazards = np.empty(horizon, dtype=np.float64)
    for i in range(horizon):
        d = den[i].value
        if d <= 0.0:
            _positivity(f"weighted risk set empty at interval {i + 1}")
        hazards[i] = num[i].value / d
    return cumulative_from_hazards(hazards)


def _apply_pair(w, num_hi, den_hi, num_lo, den_lo, m_g, state_desc):
    """Multiply w by (num_hi/den_hi) * (den_lo/num_lo): a randomization-
    probability ratio at the later state times the inverse ratio at the
    earlier state. Returns None when the target law is already absent
    (weight collapses to zero for good) so the caller can prune.
    """
    if w is None:
        return None
    if den_hi == 0.0 or num_lo == 0.0:
        # one arm never reaches the state, so the probability ratio is
        # undefined; a trajectory with no target mass carries no estimand
        # weight and can be pruned, otherwise it is a true violation
        if m_g == 0.0:
            return None
        _positivity(state_desc)
    return w * (num_hi / den_hi) * (den_lo / num_lo)


def check_equivalence(dgp, z_a, z_y, horizon=None, tol=1e-10):
    """G-formula versus both weighted representations, per interval.
    Returns (g, w_y, w_a, max_abs_gap)."""
    horizon = _check_horizon(dgp, horizon)
    g = enumerate_gformula(dgp, z_a, z_y, horizon)
    wy = exact_weighted_representation(dgp, z_a, z_y, horizon, "w_y")
    wa = exact_weighted_representation(dgp, z_a, z_y, horizon, "w_a")
    gap = max(np.abs(wy - g).max(), np.abs(wa - g).max())
    return g, wy, wa, float(gap), bool(gap < tol)
