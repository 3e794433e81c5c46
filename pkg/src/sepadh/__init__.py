"""Separable-effects pipeline for adherence in two-arm trials.

Simulate longitudinal trials with adherence dynamics, check graphical
identification of the two-channel estimand on a causal DAG, estimate
the channel-specific risks by inverse-probability weighting with
bootstrap intervals, and certify weighted representations against the
g-formula by exact enumeration.
"""

__version__ = "0.1.0"

from .errors import (BootstrapError, ConfigError, DataError, DomainError,
                     FitError, GraphConstructionError, GraphError,
                     NumericalError, PanelParseError, PanelValidationError,
                     PositivityError, SepadhError, WeightError)
from .graphs import (CausalDag, IdentificationReport, Node,
                     build_separable_dag, check_identification,
                     classify_covariates, d_separated, format_dag,
                     load_fixture, merge_components, parse_dag)
from .ipw import (EstimateReport, WeightSeries, bootstrap_risk,
                  compose_weights, crossover_weights, estimate_separable,
                  weighted_marginal, weighted_risk, weights_a, weights_y)
from .models import (FittedModel, ModelSet, ModelSpec, default_specs,
                     fit_model, predict)
from .oracle import (DiscreteDgp, check_equivalence, enumerate_gformula,
                     exact_weighted_representation, markov_gformula)
from .panel import (Panel, PersonPeriod, at_risk, emit_csv, ingest_csv,
                    resample_individuals)
from .risk import (PrevalenceCurve, RiskCurve, cumulative_from_hazards,
                   empirical_cumulative_incidence)
from .simulate import (ScenarioConfig, StructuralEquations,
                       simulate_counterfactual, simulate_trial)

__all__ = [name for name in dir() if not name.startswith("_")]
