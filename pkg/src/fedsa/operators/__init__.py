from .agents import (AgentOperator, FiniteSumAgent, MrpAgent, QuadraticAgent, finitesum_noisy,
                     mrp_expected, mrp_noisy, quadratic_expected, quadratic_noisy)
from .fleet import ProblemConstants, ProblemFleet, fleet_expected, measure_constants
from .generators import gen_finitesum_fleet, gen_mrp_fleet, gen_quadratic_fleet, generate
from .instance_io import fleet_from_dict, fleet_to_dict, load_instance, save_instance

__all__ = [
    "AgentOperator", "FiniteSumAgent", "MrpAgent", "QuadraticAgent", "ProblemConstants",
    "ProblemFleet", "finitesum_noisy", "fleet_expected", "fleet_from_dict", "fleet_to_dict",
    "gen_finitesum_fleet", "gen_mrp_fleet", "gen_quadratic_fleet", "generate",
    "load_instance", "measure_constants", "mrp_expected", "mrp_noisy", "quadratic_expected",
    "quadratic_noisy", "save_instance",
]
