"""Experiment specification files (JSON).

A spec names a problem (generator parameters or an instance file), the
algorithms to run, the federated settings and the seeds. ``M``, ``H``, ``T``
and the step size have no defaults: a spec that omits one is rejected.

Example::

    {
      "id": "quadratic-compare",
      "problem": {"family": "quadratic", "M": 20, "d": 10, "hetero": 1.0,
                  "cond": 2.0, "seed": 0, "noise": {"sigma_eps": 0.1, "q": 0.5}},
      "algorithms": ["fedhsa", "local_sa"],
      "H": 10, "T": 2000, "eta": 0.001,
      "sampling_mode": "markov",
      "seeds": [0, 1, 2, 3, 4],
      "checks": {"fedhsa_floor_below_local": true}
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..algorithms import ALGORITHMS, SCHEDULES, FederatedConfig
from ..errors import ConfigError, FedsaError
from ..operators.agents import MODES

KNOWN_KEYS = {
    "id", "problem", "algorithms", "H", "T", "eta", "alpha_g", "sampling_mode", "schedule",
    "schedule_mu", "seeds", "outputs", "stationary_start", "fresh_anchor", "theta0",
    "window_fraction", "M_list", "checks", "epsilon",
}
KNOWN_CHECKS = {
    "fedhsa_floor_below_local", "min_separation_se", "max_final_d", "min_floor_ratio",
    "slope_range", "max_alpha_ratio", "floors_decreasing",
}


@dataclass
class ExperimentSpec:
    problem: dict
    algorithms: list[str]
    H: int
    T: int
    eta: float | None
    seeds: list[int]
    id: str = "experiment"
    alpha_g: float = 1.0
    sampling_mode: str = "markov"
    schedule: str = "constant"
    schedule_mu: float | None = None
    outputs: str | None = None
    stationary_start: bool = True
    fresh_anchor: bool = False
    theta0: object = "zero"
    window_fraction: float = 0.2
    M_list: list[int] | None = None
    checks: dict = field(default_factory=dict)
    epsilon: float = 0.01
    base_dir: Path = field(default_factory=Path.cwd)

    def federated_config(self, seed: int) -> FederatedConfig:
        return FederatedConfig(H=self.H, T=self.T, eta=self.eta, alpha_g=self.alpha_g,
                               sampling_mode=self.sampling_mode, schedule=self.schedule,
                               schedule_mu=self.schedule_mu, master_seed=seed,
                               stationary_start=self.stationary_start,
                               fresh_anchor=self.fresh_anchor)

    def with_overrides(self, **kwargs) -> "ExperimentSpec":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in
               ("id", "problem", "algorithms", "H", "T", "eta", "alpha_g", "sampling_mode",
                "schedule", "schedule_mu", "seeds", "stationary_start", "fresh_anchor",
                "theta0", "window_fraction", "M_list", "checks")}
        out["problem"] = dict(self.problem)
        return out


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _int(data: dict, key: str, lo: int = 1) -> int:
    if key not in data:
        _fail(key, "required field is missing")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(key, f"expected an integer, got {value!r}")
    if value < lo:
        _fail(key, f"must be >= {lo}, got {value}")
    return value


def _number(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if positive and value <= 0:
        _fail(path, f"must be positive, got {value}")
    return float(value)


def _problem(data: dict) -> dict:
    if "problem" not in data:
        _fail("problem", "required field is missing")
    problem = data["problem"]
    if not isinstance(problem, dict):
        _fail("problem", "expected an object")
    if "instance" in problem:
        if not isinstance(problem["instance"], str):
            _fail("problem.instance", "expected a file path")
        return dict(problem)
    if problem.get("family") not in ("quadratic", "mrp", "finitesum"):
        _fail("problem.family", f"expected quadratic, mrp or finitesum, got {problem.get('family')!r}")
    for key in ("M", "d"):
        if key not in problem:
            _fail(f"problem.{key}", "required field is missing")
        if isinstance(problem[key], bool) or not isinstance(problem[key], int) or problem[key] < 1:
            _fail(f"problem.{key}", f"expected a positive integer, got {problem[key]!r}")
    if problem["family"] == "mrp" and "S" not in problem:
        _fail("problem.S", "required field is missing")
    return dict(problem)


def _seeds(value, path: str = "seeds") -> list[int]:
    if isinstance(value, int) and not isinstance(value, bool):
        if value < 1:
            _fail(path, "need at least one seed")
        return list(range(value))
    if not isinstance(value, list) or not value:
        _fail(path, "expected a non-empty list of integers or a seed count")
    for j, s in enumerate(value):
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            _fail(f"{path}[{j}]", f"expected a nonnegative integer, got {s!r}")
    return list(value)


def parse_seeds(text: str) -> list[int]:
    """``"5"`` means seeds 0..4; ``"3,7,9"`` lists them explicitly."""
    text = text.strip()
    try:
        if "," in text:
            return _seeds([int(t) for t in text.split(",") if t.strip()], "--seeds")
        return _seeds(int(text), "--seeds")
    except ValueError:
        raise ConfigError(f"--seeds: cannot parse {text!r}") from None


def spec_from_dict(data: dict, base_dir: Path | None = None, require_run_fields: bool = True) -> ExperimentSpec:
    if not isinstance(data, dict):
        raise ConfigError("<root>: expected a JSON object")
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        _fail(unknown[0], "unknown field")
    problem = _problem(data)
    algorithms = data.get("algorithms", ["fedhsa", "local_sa"])
    if not isinstance(algorithms, list) or not algorithms:
        _fail("algorithms", "expected a non-empty list")
    for j, a in enumerate(algorithms):
        if a not in ALGORITHMS:
            _fail(f"algorithms[{j}]", f"expected one of {ALGORITHMS}, got {a!r}")
    schedule = data.get("schedule", "constant")
    if schedule not in SCHEDULES:
        _fail("schedule", f"expected one of {SCHEDULES}, got {schedule!r}")
    H = _int(data, "H") if require_run_fields or "H" in data else 2
    T = _int(data, "T") if require_run_fields or "T" in data else 1
    eta = None
    if schedule == "constant":
        if "eta" not in data:
            _fail("eta", "required field is missing")
        eta = _number(data["eta"], "eta")
        if eta < 0:
            _fail("eta", "must be nonnegative")
    schedule_mu = None
    if schedule == "corollary1":
        if "schedule_mu" not in data:
            _fail("schedule_mu", "required by the corollary1 schedule")
        schedule_mu = _number(data["schedule_mu"], "schedule_mu", positive=True)
    mode = data.get("sampling_mode", "markov")
    if mode not in MODES:
        _fail("sampling_mode", f"expected one of {MODES}, got {mode!r}")
    if "seeds" in data:
        seeds = _seeds(data["seeds"])
    elif require_run_fields:
        _fail("seeds", "required field is missing")
    else:
        seeds = [0]
    window = _number(data.get("window_fraction", 0.2), "window_fraction", positive=True)
    if window > 1:
        _fail("window_fraction", "must lie in (0, 1]")
    M_list = data.get("M_list")
    if M_list is not None:
        if not isinstance(M_list, list) or not M_list:
            _fail("M_list", "expected a non-empty list of agent counts")
        for j, m in enumerate(M_list):
            if isinstance(m, bool) or not isinstance(m, int) or m < 1:
                _fail(f"M_list[{j}]", f"expected a positive integer, got {m!r}")
    checks = data.get("checks", {})
    if not isinstance(checks, dict):
        _fail("checks", "expected an object")
    for key in checks:
        if key not in KNOWN_CHECKS:
            _fail(f"checks.{key}", "unknown check")
    theta0 = data.get("theta0", "zero")
    if not (theta0 in ("zero", "star") or isinstance(theta0, list)):
        _fail("theta0", "expected 'zero', 'star' or a list of numbers")
    for key in ("stationary_start", "fresh_anchor"):
        if key in data and not isinstance(data[key], bool):
            _fail(key, "expected true or false")
    spec = ExperimentSpec(
        problem=problem, algorithms=list(algorithms), H=H, T=T, eta=eta, seeds=seeds,
        id=str(data.get("id", "experiment")),
        alpha_g=_number(data.get("alpha_g", 1.0), "alpha_g", positive=True),
        sampling_mode=mode, schedule=schedule, schedule_mu=schedule_mu,
        outputs=data.get("outputs"), stationary_start=data.get("stationary_start", True),
        fresh_anchor=data.get("fresh_anchor", False), theta0=theta0, window_fraction=window,
        M_list=M_list, checks=dict(checks),
        epsilon=_number(data.get("epsilon", 0.01), "epsilon", positive=True),
        base_dir=Path(base_dir) if base_dir is not None else Path.cwd())
    try:
        spec.federated_config(seeds[0])
    except FedsaError as exc:
        raise ConfigError(f"<config>: {exc}") from None
    return spec


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_spec(path, require_run_fields: bool = True) -> ExperimentSpec:
    path = Path(path)
    data = read_json(path)
    try:
        return spec_from_dict(data, path.parent, require_run_fields)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
