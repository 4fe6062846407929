"""Problem-instance files: one JSON document per fleet.

Floats are written with Python's shortest round-trip representation, so a
save/load cycle reproduces every array bitwise.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..markov import GaussMarkovProcess
from .agents import FiniteSumAgent, MrpAgent, QuadraticAgent
from .fleet import ProblemFleet

FORMAT_VERSION = 1


def _agent_to_dict(agent) -> dict:
    if isinstance(agent, QuadraticAgent):
        return {"A": agent.A.tolist(), "b": agent.b.tolist(), "c": agent.c,
                "Q": agent.noise.Q.tolist(), "sigma_eps": agent.noise.sigma_eps}
    if isinstance(agent, MrpAgent):
        return {"P": agent.chain.transition.tolist(), "reward": agent.reward.tolist(),
                "gamma": agent.gamma, "Phi": agent.Phi.tolist()}
    if isinstance(agent, FiniteSumAgent):
        return {"A": agent.A.tolist(), "b": agent.b.tolist(), "c": agent.c.tolist(),
                "index_P": agent.index_chain.transition.tolist()}
    raise TypeError(f"cannot serialise {type(agent).__name__}")


def _agent_from_dict(family: str, data: dict):
    if family == "quadratic":
        noise = GaussMarkovProcess(np.array(data["Q"]), float(data["sigma_eps"]))
        return QuadraticAgent(np.array(data["A"]), np.array(data["b"]), float(data["c"]), noise)
    if family == "mrp":
        return MrpAgent(np.array(data["P"]), np.array(data["reward"]), float(data["gamma"]),
                        np.array(data["Phi"]))
    if family == "finitesum":
        return FiniteSumAgent(np.array(data["A"]), np.array(data["b"]), np.array(data["c"]),
                              np.array(data["index_P"]))
    raise ConfigError(f"family: unknown problem family {family!r}")


def fleet_to_dict(fleet: ProblemFleet) -> dict:
    noise = fleet.generator_params.get("noise") if fleet.generator_params else None
    return {
        "format_version": FORMAT_VERSION,
        "family": fleet.family,
        "d": fleet.dim,
        "M": fleet.M,
        "seed": fleet.seed,
        "noise": noise,
        "generator_params": fleet.generator_params,
        "agents": [_agent_to_dict(a) for a in fleet.agents],
    }


def fleet_from_dict(data: dict) -> ProblemFleet:
    for key in ("family", "d", "M", "agents"):
        if key not in data:
            raise ConfigError(f"{key}: missing from instance")
    family = data["family"]
    agents = []
    for i, item in enumerate(data["agents"]):
        try:
            agents.append(_agent_from_dict(family, item))
        except KeyError as exc:
            raise ConfigError(f"agents[{i}].{exc.args[0]}: missing") from None
    fleet = ProblemFleet(agents, family, data.get("seed"), data.get("generator_params"))
    if fleet.M != int(data["M"]) or fleet.dim != int(data["d"]):
        raise ConfigError("M/d: header disagrees with the agent list")
    return fleet


def save_instance(fleet: ProblemFleet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(fleet_to_dict(fleet)) + "\n")
    return path


def load_instance(path) -> ProblemFleet:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return fleet_from_dict(data)
