"""Exact and loopy inference, likelihood, EM and decay measurement."""
from .._jtree import WidthExceeded
from .decay import DecayProfile, decay_profile, marginal_table
from .em import EMHistory, em_fit, q_function, q_gradient
from .exact import (InferenceResult, enumerate_log_prob, enumerate_oracle, exact_inference,
                    log_partition, pairwise_joints)
from .lbp import lbp
from .likelihood import LikelihoodInfo, log_prob_partial, loglik_exact, loglik_observed

__all__ = [
    "DecayProfile", "EMHistory", "InferenceResult", "LikelihoodInfo", "WidthExceeded",
    "decay_profile", "em_fit", "enumerate_log_prob", "enumerate_oracle", "exact_inference",
    "lbp", "log_partition", "log_prob_partial", "loglik_exact", "loglik_observed", "marginal_table",
    "pairwise_joints", "q_function", "q_gradient",
]
