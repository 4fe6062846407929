from .config import ExperimentSpec, load_spec, parse_seeds, spec_from_dict
from .experiments import (chain_info, evaluate_checks, gen_instance, prop1_experiment,
                          resolve_fleet, resolve_workers, run_algorithms, run_tasks, sweep_agents)
from .output import (emit_plot_svg, mean_columns, read_trace_csv, write_json,
                     write_mean_trace_csv, write_trace_csv)

__all__ = [
    "ExperimentSpec", "chain_info", "emit_plot_svg", "evaluate_checks", "gen_instance",
    "load_spec", "mean_columns", "parse_seeds", "prop1_experiment", "read_trace_csv",
    "resolve_fleet", "resolve_workers", "run_algorithms", "run_tasks", "spec_from_dict",
    "sweep_agents", "write_json", "write_mean_trace_csv", "write_trace_csv",
]
