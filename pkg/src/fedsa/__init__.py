"""Heterogeneous federated stochastic approximation under Markovian sampling."""
from .algorithms import (FederatedConfig, RunTrace, corollary1_eta, fedhsa_round, local_sa_round,
                         run, single_agent_sa)
from .operators import (ProblemFleet, gen_finitesum_fleet, gen_mrp_fleet, gen_quadratic_fleet,
                        load_instance, measure_constants, save_instance)

__version__ = "0.1.0"

__all__ = [
    "FederatedConfig", "ProblemFleet", "RunTrace", "corollary1_eta", "fedhsa_round",
    "gen_finitesum_fleet", "gen_mrp_fleet", "gen_quadratic_fleet", "load_instance",
    "local_sa_round", "measure_constants", "run", "save_instance", "single_agent_sa",
]
