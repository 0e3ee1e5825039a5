"""Simulation and analysis of sequential parallel comparison design (SPCD) trials."""

__version__ = "0.1.0"

from .analytic import AnalyticCell, expected_estimates, misclass_q1, population_threshold, unbiasedness_conditions
from .classify import ClassifierSpec, classify_fixed, empirical_npv, oracle_classify, quantile_threshold
from .estimators import EstimateSet, estimate, theta1, theta2, theta_weighted
from .mixture_em import InitSpec, MixtureFit, em_fit, identifiability_diagnostics, posterior_responsibility
from .montecarlo import CellSummary, GridSpec, run_cell, run_grid
from .trial import EstimandSet, TrialDataset, TrialParams, simulate_trial, true_estimands
