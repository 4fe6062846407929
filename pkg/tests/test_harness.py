import json
import subprocess
import sys

import numpy as np
import pytest

from fedsa import FederatedConfig, run
from fedsa.errors import ConfigError, EmptyInput
from fedsa.harness import (emit_plot_svg, load_spec, parse_seeds, read_trace_csv,
                           resolve_workers, spec_from_dict, write_mean_trace_csv,
                           write_trace_csv)
from fedsa.harness.cli import main
from fedsa.operators import gen_quadratic_fleet

QUAD = {"family": "quadratic", "M": 4, "d": 3, "hetero": 1.0, "cond": 2.0, "seed": 0,
        "noise": {"sigma_eps": 0.1, "q": 0.5}}


def spec_dict(**kw):
    base = {"id": "t", "problem": dict(QUAD), "H": 4, "T": 60, "eta": 0.01, "seeds": [0, 1, 2]}
    base.update(kw)
    return base


def write_spec(tmp_path, name="spec.json", **kw):
    path = tmp_path / name
    path.write_text(json.dumps(spec_dict(**kw), indent=1))
    return path


def small_trace(T=3, seed=0):
    fleet = gen_quadratic_fleet(3, 2, 1.0, 2.0, {"sigma_eps": 0.1}, seed=0)
    return run(fleet, FederatedConfig(H=2, T=T, eta=0.05, master_seed=seed))


# ---------------------------------------------------------------- config

@pytest.mark.parametrize("missing,path", [("H", "H"), ("T", "T"), ("eta", "eta"), ("seeds", "seeds")])
def test_spec_requires_run_fields(missing, path):
    data = spec_dict()
    del data[missing]
    with pytest.raises(ConfigError, match=f"^{path}:"):
        spec_from_dict(data)


def test_spec_requires_fleet_size():
    data = spec_dict()
    del data["problem"]["M"]
    with pytest.raises(ConfigError, match=r"problem\.M"):
        spec_from_dict(data)


def test_spec_field_diagnostics():
    with pytest.raises(ConfigError, match=r"algorithms\[1\]"):
        spec_from_dict(spec_dict(algorithms=["fedhsa", "sgd"]))
    with pytest.raises(ConfigError, match="unknown field"):
        spec_from_dict(spec_dict(colour="red"))
    with pytest.raises(ConfigError, match=r"seeds\[1\]"):
        spec_from_dict(spec_dict(seeds=[0, -1]))
    with pytest.raises(ConfigError, match="checks.nope"):
        spec_from_dict(spec_dict(checks={"nope": 1}))
    with pytest.raises(ConfigError, match="H"):
        spec_from_dict(spec_dict(H=0))


def test_spec_parse_error_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "H": 3,\n  "T": ,\n}')
    with pytest.raises(ConfigError, match="line 3 column 8"):
        load_spec(path)


def test_seed_parsing():
    assert parse_seeds("3") == [0, 1, 2]
    assert parse_seeds("4,9, 2") == [4, 9, 2]
    with pytest.raises(ConfigError):
        parse_seeds("a,b")
    with pytest.raises(ConfigError):
        parse_seeds("0")


def test_workers_env_fallback(monkeypatch):
    monkeypatch.setenv("FEDSA_WORKERS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    monkeypatch.setenv("FEDSA_WORKERS", "many")
    with pytest.raises(ConfigError):
        resolve_workers(None)


# ---------------------------------------------------------------- CSV and SVG

def test_trace_csv_format_and_round_trip(tmp_path):
    tr = small_trace(T=3)
    path = write_trace_csv(tr, tmp_path / "t.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "round,d_t,max_drift,theta_norm"
    assert len(lines) == 5
    assert lines[2].split(",")[1] == "%.17g" % tr.d[1]
    back = read_trace_csv(path)
    assert np.array_equal(back["d_t"], tr.d)
    assert np.array_equal(back["max_drift"], tr.max_drift)
    assert list(back["round"]) == [0, 1, 2, 3]


def test_mean_trace_csv(tmp_path):
    traces = [small_trace(T=5, seed=s) for s in range(3)]
    path = write_mean_trace_csv(traces, tmp_path / "mean.csv")
    back = read_trace_csv(path)
    want = (traces[0].d + traces[1].d + traces[2].d) / 3
    assert np.array_equal(back["d_t"], want)


def test_svg_constant_trace_is_horizontal(tmp_path):
    csv = tmp_path / "flat.csv"
    csv.write_text("round,d_t,max_drift,theta_norm\n0,0.5,0,0\n1,0.5,0,0\n2,0.5,0,0\n")
    svg = emit_plot_svg([csv], tmp_path / "p.svg").read_text()
    assert svg.count("<polyline") == 1
    pts = svg.split('points="')[1].split('"')[0].split()
    assert len({p.split(",")[1] for p in pts}) == 1
    assert ">flat<" in svg


def test_svg_two_traces_and_empty_input(tmp_path):
    a = write_trace_csv(small_trace(seed=0), tmp_path / "alpha.csv")
    b = write_trace_csv(small_trace(seed=1), tmp_path / "beta.csv")
    svg = emit_plot_svg([a, b], tmp_path / "p.svg").read_text()
    assert svg.count("<polyline") == 2
    assert ">alpha<" in svg and ">beta<" in svg
    with pytest.raises(EmptyInput):
        emit_plot_svg([], tmp_path / "none.svg")
    assert not (tmp_path / "none.svg").exists()


# ---------------------------------------------------------------- CLI

def test_compare_writes_outputs_and_passes(tmp_path):
    spec = write_spec(tmp_path, checks={"max_final_d": {"fedhsa": 10.0}})
    out = tmp_path / "out"
    assert main(["compare", "--config", str(spec), "--out", str(out), "--plot"]) == 0
    names = {p.name for p in out.iterdir()}
    for algo in ("fedhsa", "local_sa"):
        assert {f"{algo}_seed0.csv", f"{algo}_seed2.csv", f"{algo}_mean.csv"} <= names
    assert "plot.svg" in names
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] is True
    assert summary["floors"]["fedhsa"]["n_seeds"] == 3
    assert "tau_bar" in summary["theorem_ingredients"]


def test_failed_check_exits_with_two(tmp_path):
    spec = write_spec(tmp_path, checks={"max_final_d": {"fedhsa": 1e-300}})
    assert main(["run", "--config", str(spec), "--out", str(tmp_path / "o")]) == 2


def test_errors_exit_with_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "line 1" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1


def test_outputs_identical_across_worker_counts(tmp_path):
    spec = write_spec(tmp_path)
    main(["compare", "--config", str(spec), "--out", str(tmp_path / "w1"), "--workers", "1"])
    main(["compare", "--config", str(spec), "--out", str(tmp_path / "w3"), "--workers", "3"])
    for f in sorted((tmp_path / "w1").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "w3" / f.name).read_bytes()


def test_seeds_and_fresh_anchor_flags(tmp_path):
    spec = write_spec(tmp_path)
    out = tmp_path / "o"
    assert main(["run", "--config", str(spec), "--out", str(out), "--seeds", "5,6",
                 "--fresh-anchor"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seeds"] == [5, 6]
    assert summary["config"]["fresh_anchor"] is True
    assert (out / "fedhsa_seed6.csv").exists()


def test_sweep_agents(tmp_path):
    spec = write_spec(tmp_path, algorithms=["fedhsa"], T=80, M_list=[1, 2, 4],
                      checks={"max_alpha_ratio": 10.0})
    out = tmp_path / "sweep"
    assert main(["sweep-agents", "--config", str(spec), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert [r["M"] for r in summary["floors"]] == [1, 2, 4]
    assert summary["speedup_slope"]["fedhsa"] is not None
    assert (out / "floors.csv").read_text().startswith("M,algorithm,floor,stderr\n")
    assert (out / "M2" / "fedhsa_mean.csv").exists()


def test_sweep_fleets_are_prefixes(tmp_path):
    # the M=2 sweep point must equal a direct run on the 2-agent prefix
    spec = write_spec(tmp_path, algorithms=["fedhsa"], M_list=[2, 4], seeds=[0])
    main(["sweep-agents", "--config", str(spec), "--out", str(tmp_path / "s")])
    fleet = gen_quadratic_fleet(4, 3, 1.0, 2.0, {"sigma_eps": 0.1, "q": 0.5}, seed=0).prefix(2)
    tr = run(fleet, FederatedConfig(H=4, T=60, eta=0.01, master_seed=0), "fedhsa")
    back = read_trace_csv(tmp_path / "s" / "M2" / "fedhsa_seed0.csv")
    assert np.array_equal(back["d_t"], tr.d)


def test_prop1_gen_and_chain_info(tmp_path):
    spec = tmp_path / "p.json"
    spec.write_text(json.dumps({"problem": {"family": "mrp", "M": 3, "S": 6, "d": 2, "seed": 1},
                                "eta": 0.2}))
    assert main(["prop1", "--config", str(spec), "--out", str(tmp_path / "p")]) == 0
    report = json.loads((tmp_path / "p" / "prop1.json").read_text())
    assert report["relative_error"] <= 1e-8
    inst = tmp_path / "inst.json"
    assert main(["gen", "--config", str(spec), "--out", str(inst)]) == 0
    assert main(["chain-info", "--config", str(inst), "--out", str(tmp_path / "c"),
                 "--epsilon", "0.05"]) == 0
    info = json.loads((tmp_path / "c" / "chain_info.json").read_text())
    assert len(info["agents"]) == 3
    assert info["agents"][0]["epsilon"] == 0.05
    assert sum(info["agents"][0]["stationary"]) == pytest.approx(1.0)


def test_instance_problem_in_spec(tmp_path):
    inst = tmp_path / "inst.json"
    main(["gen", "--config", str(write_spec(tmp_path)), "--out", str(inst)])
    spec = write_spec(tmp_path, "from_inst.json", problem={"instance": "inst.json"}, seeds=[0])
    direct = write_spec(tmp_path, "direct.json", seeds=[0])
    main(["run", "--config", str(spec), "--out", str(tmp_path / "a")])
    main(["run", "--config", str(direct), "--out", str(tmp_path / "b")])
    assert ((tmp_path / "a" / "fedhsa_seed0.csv").read_bytes()
            == (tmp_path / "b" / "fedhsa_seed0.csv").read_bytes())


def test_console_entry_point(tmp_path):
    spec = write_spec(tmp_path, seeds=[0], T=10)
    res = subprocess.run([sys.executable, "-m", "fedsa", "run", "--config", str(spec),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "fedhsa: floor" in res.stdout
