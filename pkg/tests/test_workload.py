from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from grainsched.allocator import AFFINITY_KUBELET, DEFAULT_KUBELET
from grainsched.errors import ConfigError
from grainsched.model import GiB, Profile, ResourceQuantity
from grainsched.perf import PerfParams
from grainsched.planner import GranularityPolicy
from grainsched.scheduler import SchedulerMode
from grainsched.workload import (CATALOG, PRESET_MATRIX, SETTINGS, Arrival, GeneratorSpec,
                                 ScenarioSpec, calibrated_perf, generate, load_perf,
                                 load_scenario, preset, scenario_from_dict)


def test_catalog():
    assert {b.name: b.profile for b in CATALOG.values()} == {
        "EP-DGEMM": Profile.CPU, "EP-STREAM": Profile.MEMORY, "G-FFT": Profile.NETWORK,
        "G-RandomRing": Profile.NETWORK, "MiniFE": Profile.CPU_MEMORY}
    assert {b.name: b.base_runtime_s for b in CATALOG.values()} == {
        "EP-DGEMM": 240, "EP-STREAM": 180, "G-FFT": 150, "G-RandomRing": 120, "MiniFE": 300}
    for b in CATALOG.values():
        assert b.n_tasks == 16 and b.total_resources == ResourceQuantity(16_000, 32 * GiB)


def test_exp1():
    jobs = generate(preset("exp1"))
    assert [j.submit_time_s for j in jobs] == [60 * i for i in range(10)]
    assert {j.benchmark for j in jobs} == {"EP-DGEMM"}
    assert jobs[0].job_id == "EP-DGEMM-1" and jobs[-1].job_id == "EP-DGEMM-10"


def test_exp2_is_deterministic_per_seed():
    assert generate(preset("exp2", seed=7)) == generate(preset("exp2", seed=7))
    assert generate(preset("exp2"), 7) == generate(preset("exp2", seed=7))
    assert generate(preset("exp2"), 7) != generate(preset("exp2"), 8)


def test_exp2_needs_a_seed():
    with pytest.raises(ConfigError):
        generate(preset("exp2"))


@given(st.integers(0, 2 ** 32))
def test_exp2_recipe(seed):
    jobs = generate(preset("exp2"), seed)
    assert Counter(j.benchmark for j in jobs) == {name: 4 for name in CATALOG}
    times = [j.submit_time_s for j in jobs]
    assert times == sorted(times) and all(0 <= t <= 1200 for t in times)


def test_exp3_reuses_exp2_arrivals():
    a = [(j.benchmark, j.submit_time_s) for j in generate(preset("exp3"), 5)]
    b = [(j.benchmark, j.submit_time_s) for j in generate(preset("exp2"), 5)]
    assert a == b
    assert PRESET_MATRIX["exp3"] == ["KUBEFLOW", "VOLCANO", "CM", "CM_S_TG", "CM_G_TG"]


def test_unknown_preset_is_named():
    with pytest.raises(ConfigError, match="'exp9'"):
        preset("exp9")


def test_settings_matrix():
    s = SETTINGS
    assert s["NONE"].kubelet == DEFAULT_KUBELET
    assert all(s[k].kubelet == AFFINITY_KUBELET for k in s if k != "NONE")
    assert s["CM_S_TG"].planner is GranularityPolicy.SCALE
    assert s["CM_G_TG"].scheduler is SchedulerMode.TASKGROUP
    assert s["CM_G"].scheduler is SchedulerMode.BASELINE
    assert preset("exp2").with_setting("kubeflow").name == "KUBEFLOW"
    with pytest.raises(ConfigError):
        preset("exp2").with_setting("fastest")


def test_empty_and_explicit_arrivals():
    assert generate(ScenarioSpec("e")) == []
    assert generate(ScenarioSpec("e", generator=GeneratorSpec("none"))) == []
    spec = ScenarioSpec("x", arrivals=(Arrival("MiniFE", Fraction(9)), Arrival("G-FFT", Fraction(2))))
    jobs = generate(spec)
    assert [(j.benchmark, j.submit_time_s) for j in jobs] == [("G-FFT", 2), ("MiniFE", 9)]
    with pytest.raises(ConfigError):
        generate(ScenarioSpec("x", arrivals=(Arrival("HPL", Fraction(0)),)))


def test_runtime_scale_applies_to_generated_jobs():
    spec = preset("exp1").with_perf(PerfParams.from_dict({"runtime_scale": 2}))
    assert generate(spec)[0].base_runtime_s == 480


def test_scenarios_default_to_bundled_params():
    assert preset("exp2").perf == calibrated_perf() == ScenarioSpec("x").perf


def test_scenario_file(tmp_path):
    f = tmp_path / "s.yaml"
    f.write_text("""
name: small
setting: CM_S_TG
cluster: {worker_nodes: 2}
perf: {alpha_net_other: 0.5}
benchmarks:
  HPL: {profile: cpu, base_runtime_s: 60}
arrivals:
  - {benchmark: HPL, submit_time_s: 1.5}
  - {benchmark: EP-STREAM, submit_time_s: 0}
""")
    spec = load_scenario(f)
    assert spec.name == "small" and spec.cluster.worker_nodes == 2
    assert spec.planner is GranularityPolicy.SCALE
    assert spec.perf.alpha_net_other == Fraction(1, 2)
    assert [j.job_id for j in generate(spec)] == ["EP-STREAM-1", "HPL-1"]
    assert generate(spec)[1].submit_time_s == Fraction(3, 2)


@pytest.mark.parametrize("data", [
    {"colour": "red"},
    {"cluster": {"worker_nodes": "four"}},
    {"arrivals": [{"benchmark": "nope"}]},
    {"generator": {"seed": 3}},
    {"planner": "diagonal"},
    {"perf": {"beta_mig": 3}},
    {"benchmarks": {"New": {"base_runtime_s": 3}}},
])
def test_bad_scenarios(data):
    with pytest.raises(ConfigError):
        scenario_from_dict(data)


def test_scenario_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1,\n")
    with pytest.raises(ConfigError):
        load_scenario(bad)


def test_load_perf_accepts_both_layouts(tmp_path):
    flat = tmp_path / "flat.yaml"
    flat.write_text("domain_bandwidth_gbps: 30\n")
    nested = tmp_path / "nested.yaml"
    nested.write_text("perf:\n  domain_bandwidth_gbps: 30\ncalibration: {}\n")
    assert load_perf(flat) == load_perf(nested)
    assert load_perf(flat).domain_bandwidth_gbps == 30
