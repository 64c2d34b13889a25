import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from banditlab.errors import ConfigError, InvalidInputError
from banditlab.harness import (
    ExperimentConfig,
    SummaryRow,
    cell_seed,
    emit_plot,
    eval_formula,
    read_summary,
    read_traces,
    run_experiment,
    subsample,
    sweep,
)


def base(**over):
    data = {
        "instance": {"kind": "top_k", "params": {"m": 4, "k": 2}, "seed": 1},
        "T": 600,
        "trials": 3,
        "seed": 5,
        "agents": ["combucb1", "cts_gaussian"],
    }
    data.update(over)
    return data


def singleton(arm=(1.0, 1.0), **over):
    inst = {"kind": "explicit", "params": {"arms": [list(arm)]}, "theta": [0.3, -0.1]}
    return base(instance=inst, **over)


def read_bytes(out: Path) -> dict:
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*.csv"))}


# ---- config ----------------------------------------------------------------

def test_formulas():
    assert eval_formula("25/eps^2", {"eps": 0.5}) == 100.0
    assert eval_formula(7, {}) == 7.0
    with pytest.raises(ConfigError):
        eval_formula("1/x", {})
    with pytest.raises(ConfigError):
        eval_formula("__import__('os')", {})
    with pytest.raises(ConfigError):
        eval_formula("1/0", {})


def test_resolve_T_formula_and_delta():
    data = base(instance={"kind": "end_of_optimism", "params": {"eps": 0.1}}, T="25/eps^2", delta="1/T",
                agents=["linucb"])
    cfg = ExperimentConfig.from_mapping(data)
    _, T, delta = cfg.resolve(None)
    assert T == 2500 and delta == pytest.approx(1 / 2500)


@pytest.mark.parametrize("over", [
    {"bogus": 1},
    {"trials": 0},
    {"T": "0.2"},
    {"delta": 2.0},
    {"agents": ["not_an_agent"]},
    {"agents": ["combucb1", "combucb1"]},
    {"agents": [{"id": "combucb1", "params": {"nope": 1}}]},
    {"sweep": {"param": "m", "values": []}},
    {"sweep": {"param": "eps", "values": [0.1]}},
    {"constant_profile": "lavish"},
    {"mc_samples": 1},
])
def test_invalid_configs_rejected(over):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(base(**over))


def test_unknown_instance_field_rejected():
    data = base()
    data["instance"] = {**data["instance"], "colour": "red"}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(data)


def test_env_seed_override(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("instance: {kind: top_k, params: {m: 4, k: 2}}\nT: 10\ntrials: 1\nseed: 3\nagents: [combucb1]\n")
    assert ExperimentConfig.load(path, env={}).seed == 3
    assert ExperimentConfig.load(path, env={"BANDITLAB_SEED": "99"}).seed == 99
    with pytest.raises(ConfigError):
        ExperimentConfig.load(path, env={"BANDITLAB_SEED": "abc"})
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.yaml", env={})


def test_stride_default():
    cfg = ExperimentConfig.from_mapping(base())
    assert cfg.stride(100) == 1 and cfg.stride(10_000) == 5 and cfg.stride(1999) == 1
    assert ExperimentConfig.from_mapping(base(trace_stride=7)).stride(10_000) == 7


def test_to_dict_round_trip():
    cfg = ExperimentConfig.from_mapping(base(sweep={"param": "m", "values": [4, 5]}))
    again = ExperimentConfig.from_mapping(cfg.to_dict())
    assert again == cfg


# ---- subsampling and summaries --------------------------------------------------

@given(st.integers(1, 500), st.integers(1, 60))
def test_subsample_keeps_final_step(T, stride):
    cum = np.cumsum(np.arange(T, dtype=float))
    steps, vals = subsample(cum, stride)
    assert steps[-1] == T and vals[-1] == cum[-1]
    assert np.all(np.diff(steps) > 0) and np.all(np.diff(steps)[:-1] == stride)
    assert np.array_equal(vals, cum[steps - 1])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30))
def test_summary_row_math(finals):
    row = SummaryRow.of(0.1, "a", finals)
    n = len(finals)
    assert row.trials == n
    assert row.mean_final_regret == pytest.approx(math.fsum(finals) / n, abs=1e-6)
    if n == 1:
        assert row.std_err == 0.0
    else:
        mean = math.fsum(finals) / n
        sd = math.sqrt(math.fsum((f - mean) ** 2 for f in finals) / (n - 1))
        assert row.std_err == pytest.approx(sd / math.sqrt(n), rel=1e-9, abs=1e-9)


def test_cell_seed_distinct_streams():
    a = cell_seed(1, "x", 0).generate_state(4)
    assert np.array_equal(a, cell_seed(1, "x", 0).generate_state(4))
    for other in (cell_seed(2, "x", 0), cell_seed(1, "y", 0), cell_seed(1, "x", 1)):
        assert not np.array_equal(a, other.generate_state(4))


# ---- run_experiment ----------------------------------------------------------

@pytest.mark.parametrize("arm,agents", [
    ((1.0, 1.0), ["combucb1", "cts_gaussian", "regret_med_full", "gw_ae"]),
    ((0.5, 0.7), ["linucb", "thompson"]),
])
def test_singleton_traces_are_zero(tmp_path, arm, agents):
    cfg = ExperimentConfig.from_mapping(singleton(arm, trials=2, agents=agents))
    res = run_experiment(cfg, tmp_path)
    assert not res.errors
    assert len(res.summary) == len(agents)
    for row in res.summary:
        assert row.mean_final_regret == 0.0 and row.std_err == 0.0 and row.trials == 2
    for label in agents:
        traces = read_traces(tmp_path / f"traces_{label}.csv")
        assert sorted(traces) == [0, 1]
        assert all(np.all(v == 0) for _, v in traces.values())


def test_summary_recomputable_from_traces(tmp_path):
    cfg = ExperimentConfig.from_mapping(base(trials=5))
    res = run_experiment(cfg, tmp_path)
    rows = read_summary(tmp_path / "summary.csv")
    assert [r.agent for r in rows] == ["combucb1", "cts_gaussian"]
    for row in rows:
        traces = read_traces(tmp_path / f"traces_{row.agent}.csv")
        finals = np.array([v[-1] for _, (_, v) in sorted(traces.items())])
        assert abs(row.mean_final_regret - finals.mean()) <= 1e-12 * max(1.0, abs(finals.mean()))
        se = finals.std(ddof=1) / math.sqrt(len(finals))
        assert abs(row.std_err - se) <= 1e-12 * max(1.0, se)
        assert row.trials == 5
        # final step recorded exactly
        assert all(s[-1] == 600 for s, _ in traces.values())
    assert res.summary[0].line() == (tmp_path / "summary.csv").read_text().splitlines()[1]


def test_manifest_contents(tmp_path):
    import json
    cfg = ExperimentConfig.from_mapping(base(trials=1))
    run_experiment(cfg, tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seeds"]["seed"] == 5
    assert man["resolved"] == [{"param": None, "T": 600, "delta": pytest.approx(1 / 600)}]
    assert {"numpy", "scipy", "python", "banditlab"} <= set(man["versions"])
    assert ExperimentConfig.from_mapping(man["config"]) == cfg


def test_same_seed_byte_identical_across_threads(tmp_path):
    cfg = ExperimentConfig.from_mapping(base(trials=4, trace_stride=50))
    run_experiment(cfg, tmp_path / "a", threads=1)
    run_experiment(cfg, tmp_path / "b", threads=1)
    run_experiment(cfg, tmp_path / "c", threads=4)
    a = read_bytes(tmp_path / "a")
    assert a and a == read_bytes(tmp_path / "b") == read_bytes(tmp_path / "c")


def test_different_seed_changes_output(tmp_path):
    run_experiment(ExperimentConfig.from_mapping(base(trials=2)), tmp_path / "a")
    run_experiment(ExperimentConfig.from_mapping(base(trials=2, seed=6)), tmp_path / "b")
    assert read_bytes(tmp_path / "a") != read_bytes(tmp_path / "b")


def test_agent_errors_recorded_and_run_continues(tmp_path):
    # pure exploration needs semi-bandit feedback; the bandit instance makes every cell fail
    data = base(instance={"kind": "end_of_optimism", "params": {"eps": 0.1}}, agents=["pure_explore", "linucb"],
                trials=2)
    res = run_experiment(ExperimentConfig.from_mapping(data), tmp_path)
    assert len(res.errors) == 2 and {e["agent"] for e in res.errors} == {"pure_explore"}
    assert [r.agent for r in res.summary] == ["linucb"] and res.summary[0].trials == 2
    assert (tmp_path / "traces_linucb.csv").exists()


def test_identification_output(tmp_path):
    data = {"instance": {"kind": "explicit", "params": {"arms": [[1.0, 0.0], [0.0, 1.0]]}, "theta": [1.0, 0.0]},
            "T": 10, "trials": 3, "seed": 1, "agents": ["pure_explore"]}
    res = run_experiment(ExperimentConfig.from_mapping(data), tmp_path)
    assert not res.errors
    lines = (tmp_path / "identification_pure_explore.csv").read_text().splitlines()
    assert lines[0] == "trial,recommended,correct,samples" and len(lines) == 4


# ---- sweep -----------------------------------------------------------------------

def test_single_value_sweep_matches_run(tmp_path):
    plain = ExperimentConfig.from_mapping(base(trials=2))
    swept = ExperimentConfig.from_mapping(base(trials=2, sweep={"param": "m", "values": [4]}))
    a = run_experiment(plain, tmp_path / "a")
    b = sweep(swept, tmp_path / "b")
    assert [(r.agent, r.mean_final_regret, r.std_err) for r in a.summary] == \
        [(r.agent, r.mean_final_regret, r.std_err) for r in b.summary]
    for label in ("combucb1", "cts_gaussian"):
        assert (tmp_path / "a" / f"traces_{label}.csv").read_bytes() == \
            (tmp_path / "b" / "m=4" / f"traces_{label}.csv").read_bytes()


def test_eps_sweep_one_row_per_point_and_agent(tmp_path):
    data = base(instance={"kind": "end_of_optimism", "params": {"eps": 0.2}}, T="4/eps^2",
                agents=["linucb", "thompson"], trials=2, sweep={"param": "eps", "values": [0.2, 0.1, 0.05]})
    res = sweep(ExperimentConfig.from_mapping(data), tmp_path)
    keys = [(r.param, r.agent) for r in res.summary]
    assert keys == [(e, a) for e in (0.2, 0.1, 0.05) for a in ("linucb", "thompson")]
    rows = read_summary(tmp_path / "summary.csv")
    assert [float(r.param) for r in rows] == [k[0] for k in keys]
    # each point runs at its own resolved horizon
    last = read_traces(tmp_path / "eps=0.05" / "traces_linucb.csv")[0][0][-1]
    assert last == 1600


def test_sweep_without_block_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        sweep(ExperimentConfig.from_mapping(base()), tmp_path)


# ---- plots -----------------------------------------------------------------------

def test_plot_empty_input_errors(tmp_path):
    with pytest.raises(InvalidInputError):
        emit_plot([], "curves", tmp_path / "x.svg")
    empty = tmp_path / "traces_e.csv"
    empty.write_text("trial,step,cum_regret\n")
    with pytest.raises(InvalidInputError):
        emit_plot([empty], "curves", tmp_path / "x.svg")


def test_plot_malformed_csv_reports_line(tmp_path):
    bad = tmp_path / "traces_bad.csv"
    bad.write_text("trial,step,cum_regret\n0,1,0.5\n0,2,oops\n")
    with pytest.raises(ValueError, match=r":3:"):
        emit_plot([bad], "curves", tmp_path / "x.svg")
    bad_summary = tmp_path / "summary.csv"
    bad_summary.write_text("param,agent,mean_final_regret,std_err,trials\n,a,1.0\n")
    with pytest.raises(ValueError, match=r":2:"):
        emit_plot([bad_summary], "sweep", tmp_path / "y.svg")


def test_plot_single_trial_has_no_band(tmp_path):
    run_experiment(ExperimentConfig.from_mapping(base(trials=1, agents=["combucb1"])), tmp_path)
    series = emit_plot([tmp_path / "traces_combucb1.csv"], "curves", tmp_path / "p.svg")
    assert len(series) == 1 and series[0].half_width is None
    assert (tmp_path / "p.svg").read_text().lstrip().startswith("<?xml")


def test_plot_band_equals_std_err(tmp_path):
    res = run_experiment(ExperimentConfig.from_mapping(base(trials=4)), tmp_path)
    paths = [tmp_path / "traces_combucb1.csv", tmp_path / "traces_cts_gaussian.csv"]
    series = emit_plot(paths, "curves", tmp_path / "p.svg")
    for s, row in zip(series, res.summary):
        assert s.label == row.agent
        assert abs(s.half_width[-1] - row.std_err) <= 1e-12 * max(1.0, row.std_err)
        assert abs(s.mean[-1] - row.mean_final_regret) <= 1e-12 * max(1.0, row.mean_final_regret)
    swept = emit_plot([tmp_path / "summary.csv"], "sweep", tmp_path / "s.svg")
    assert [float(s.half_width[0]) for s in swept] == [r.std_err for r in res.summary]


def test_plot_deterministic(tmp_path):
    run_experiment(ExperimentConfig.from_mapping(base(trials=3)), tmp_path)
    paths = [tmp_path / "traces_combucb1.csv"]
    emit_plot(paths, "curves", tmp_path / "a.svg", title="t")
    emit_plot(paths, "curves", tmp_path / "b.svg", title="t")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
