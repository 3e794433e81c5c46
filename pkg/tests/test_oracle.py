import numpy as np
import pytest

from sepadh.errors import ConfigError, DomainError, PositivityError
from sepadh.oracle import (DiscreteDgp, check_equivalence, enumerate_gformula,
                           exact_weighted_representation, markov_gformula)
from sepadh.simulate import StructuralEquations


def stock_dgp(model, horizon):
    eq = StructuralEquations.adherence_model(model)
    return DiscreteDgp.from_equations(eq, horizon), eq


def test_first_interval_risk_is_exact():
    dgp, eq = stock_dgp(1, 1)
    for z_a in (0, 1):
        for z_y in (0, 1):
            risk = enumerate_gformula(dgp, z_a, z_y)
            assert risk[0] == pytest.approx(0.027, abs=1e-15)


def test_two_interval_contrast_model_1():
    _, eq = stock_dgp(1, 2)
    assert markov_gformula(eq, 1, 0, 2)[-1] == pytest.approx(0.046179, abs=1e-12)
    assert markov_gformula(eq, 1, 1, 2)[-1] == pytest.approx(0.0452925, abs=1e-12)


def test_markov_matches_enumeration():
    for model in (1, 2, 3):
        dgp, eq = stock_dgp(model, 3)
        for pair in ((1, 0), (1, 1), (0, 0)):
            enum = enumerate_gformula(dgp, *pair)
            markov = markov_gformula(eq, *pair, 3)
            np.testing.assert_allclose(markov, enum, rtol=0, atol=1e-12)


def test_risks_are_monotone_in_k():
    dgp, _ = stock_dgp(2, 4)
    risk = enumerate_gformula(dgp, 1, 0)
    assert np.all(np.diff(risk) > 0)


def test_weighted_representations_match_gformula_stock():
    for model in (1, 2, 3):
        dgp, _ = stock_dgp(model, 3)
        for pair in ((1, 0), (1, 1), (0, 0)):
            g, wy, wa, gap, ok = check_equivalence(dgp, *pair)
            assert ok, (model, pair, gap)
            assert gap < 1e-10


def test_weighted_representations_match_gformula_random():
    rng = np.random.default_rng(20260818)
    for trial in range(10):
        horizon = int(rng.integers(1, 4))
        dgp = DiscreteDgp.from_random_tables(rng, horizon)
        pair = (int(rng.integers(0, 2)), int(rng.integers(0, 2)))
        g, wy, wa, gap, ok = check_equivalence(dgp, *pair)
        assert ok, (trial, pair, gap)


def test_identity_pair_equals_factual_arm_law():
    # with both channels equal the weights collapse and all three
    # computations walk the same factual law
    dgp, _ = stock_dgp(3, 3)
    for z in (0, 1):
        g, wy, wa, gap, ok = check_equivalence(dgp, z, z)
        assert gap < 1e-14


def test_model_3_channel_pair_without_support():
    # adherence model 3 forces A=1 at (a_prev=1, l_a=0, l_y=1, z=1), so
    # under (z_a=0, z_y=1) the arm-probability ratio hits a state only
    # the outcome channel can reach and positivity genuinely fails
    dgp, _ = stock_dgp(3, 3)
    with pytest.raises(PositivityError) as err:
        exact_weighted_representation(dgp, 0, 1, variant="w_y")
    assert "state" in str(err.value)


def test_enumeration_horizon_guard():
    dgp, _ = stock_dgp(1, 9)
    with pytest.raises(DomainError):
        enumerate_gformula(dgp, 1, 0)
    with pytest.raises(DomainError):
        enumerate_gformula(dgp, 1, 0, horizon=0)


def test_markov_reaches_long_horizons():
    _, eq = stock_dgp(1, 24)
    risk = markov_gformula(eq, 1, 0, 24)
    assert risk.shape == (24,)
    assert 0 < risk[-1] < 1
    np.testing.assert_allclose(
        risk[:3], enumerate_gformula(DiscreteDgp.from_equations(eq, 3), 1, 0),
        atol=1e-12)


def test_unknown_variant_rejected():
    dgp, _ = stock_dgp(1, 2)
    with pytest.raises(ConfigError):
        exact_weighted_representation(dgp, 1, 0, variant="w_q")


def test_random_tables_deterministic_and_guarded():
    a = DiscreteDgp.from_random_tables(np.random.default_rng(5), 2)
    b = DiscreteDgp.from_random_tables(np.random.default_rng(5), 2)
    np.testing.assert_allclose(enumerate_gformula(a, 1, 0),
                               enumerate_gformula(b, 1, 0), atol=0)
    with pytest.raises(DomainError):
        DiscreteDgp.from_random_tables(np.random.default_rng(5), 4)


def test_random_table_probabilities_bounded():
    rng = np.random.default_rng(123)
    dgp = DiscreteDgp.from_random_tables(rng, 2, lo=0.2, hi=0.4)
    p = dgp.p_a(1, 1, (0,), (0, 1), (1, 0))
    assert 0.2 <= p <= 0.4
