"""Multilevel stochastic block model: simulation, variational EM, ICL selection."""
from mlvsbm.generate import design_params, sample_network, simulate_design
from mlvsbm.icl import icl_mlvsbm, icl_sbm, penalty_mlvsbm, penalty_sbm
from mlvsbm.model import exact_log_likelihood, m_step, variational_bound
from mlvsbm.network import MultilevelNetwork, apply_mask, load_bundle, load_network, validate
from mlvsbm.params import Assignments, ModelParams, SBMParams
from mlvsbm.predict import ari, auc, dyad_probabilities, prediction_experiment
from mlvsbm.selection import SelectOptions, select
from mlvsbm.vem import FitOptions, fit, fit_sbm, ve_step

__version__ = "0.1.0"
