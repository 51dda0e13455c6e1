import random
from dataclasses import replace

import pytest
import yaml

from grainsched.errors import ConfigError
from grainsched.experiments import (Target, TargetSet, calibrate, compare, load_space,
                                    load_targets, matrix, measure, parse_space, parse_targets,
                                    relative_delta, sample_params)
from grainsched.perf import PerfParams
from grainsched.workload import CORE_SCENARIOS, preset


def test_relative_delta():
    assert relative_delta(100, 65) == pytest.approx(0.35)
    assert relative_delta(100, 120) < 0
    with pytest.raises(ConfigError):
        relative_delta(0, 1)


def test_compare_two_scenarios_shape():
    table = compare(matrix("exp2", ["CM", "CM_G_TG"]), [7], baseline="CM")
    assert [(r.scenario, r.seed) for r in table.rows] == \
        [("CM", 7), ("CM_G_TG", 7), ("CM", None), ("CM_G_TG", None)]
    cm, tg = table.rows[0], table.rows[1]
    assert cm.delta_response == 0
    assert tg.delta_response == (cm.overall_response_s - tg.overall_response_s) / cm.overall_response_s
    header = table.to_csv().splitlines()[0].split(",")
    assert header[:6] == ["scenario", "seed", "overall_response_s", "makespan_s",
                          "delta_response", "delta_makespan"]
    assert "run_s[EP-STREAM]" in header


def test_compare_core_matrix_defaults_to_none_baseline():
    table = compare(matrix("exp2"), [2])
    assert table.baseline == "NONE"
    assert [r.scenario for r in table.rows if r.is_mean] == CORE_SCENARIOS
    assert table.mean_row("NONE").delta_makespan == 0


def test_compare_means_average_the_seeds():
    table = compare(matrix("exp2", ["CM", "CM_S"]), [1, 2])
    rows = [r for r in table.seed_rows() if r.scenario == "CM_S"]
    assert table.mean_row("CM_S").makespan_s == sum(r.makespan_s for r in rows) / 2
    stream = [x for r in rows for x in table.reports[("CM_S", r.seed)].run_times("EP-STREAM")]
    assert table.mean_row("CM_S").run_mean("EP-STREAM") == sum(stream) / len(stream)


def test_compare_errors():
    specs = matrix("exp2", ["CM", "CM_G_TG"])
    with pytest.raises(ConfigError, match="baseline"):
        compare(specs, [1], baseline="NONE")
    with pytest.raises(ConfigError):
        compare(specs[:1], [1])
    other = preset("exp1").with_setting("CM_G_TG")
    with pytest.raises(ConfigError, match="different workload"):
        compare([specs[0], other], [1])


def test_compare_output_is_deterministic():
    a = compare(matrix("exp3", ["KUBEFLOW", "CM"]), [4])
    b = compare(matrix("exp3", ["KUBEFLOW", "CM"]), [4])
    assert (a.to_csv(), a.to_json()) == (b.to_csv(), b.to_json())


SMALL = TargetSet("exp2", (1, 2), (
    Target("resp", "overall_response_s", "CM_G_TG", "CM", 0.19, 0.10),
    Target("stream", "run_s", "CM_S_TG", "CM_S", 0.33, 0.10, 0.5, "EP-STREAM"),
), screen_seeds=1, keep_fraction=0.5)


def test_bundled_targets_and_space():
    t = load_targets()
    names = {x.name: x for x in t.targets}
    assert {(x.scenario, x.baseline, x.metric, x.improvement) for x in t.targets} >= {
        ("CM_G_TG", "NONE", "overall_response_s", 0.35),
        ("CM_G_TG", "CM", "overall_response_s", 0.19),
        ("CM_G_TG", "NONE", "makespan_s", 0.34),
        ("CM_G_TG", "CM", "makespan_s", 0.11),
        ("CM_S_TG", "CM_S", "run_s", 0.33)}
    assert names["stream_run_tg_vs_s"].benchmark == "EP-STREAM"
    assert t.seeds == (1, 2, 3, 4, 5)
    assert {d.label for d in load_space()} >= {"domain_bandwidth_gbps", "beta_mig.memory"}


def test_budget_one_returns_the_single_sample():
    dims = load_space()
    result = calibrate(SMALL, dims, budget=1, seed=4)
    assert result.params == sample_params(dims, random.Random(4), PerfParams())
    assert result.evaluated_full == 1


def test_calibration_residuals_match_an_independent_rerun():
    result = calibrate(SMALL, load_space(), budget=6, seed=1)
    table = compare(matrix("exp2", ["CM", "CM_G_TG", "CM_S", "CM_S_TG"], result.params), [1, 2])
    cm, tg = table.mean_row("CM"), table.mean_row("CM_G_TG")
    resp = float((cm.overall_response_s - tg.overall_response_s) / cm.overall_response_s)
    s, stg = table.mean_row("CM_S"), table.mean_row("CM_S_TG")
    stream = float((s.run_mean("EP-STREAM") - stg.run_mean("EP-STREAM")) / s.run_mean("EP-STREAM"))
    assert result.achieved == pytest.approx({"resp": resp, "stream": stream})
    assert result.residuals["resp"] == pytest.approx((resp - 0.19) / 0.19)
    assert result.objective == pytest.approx(((resp - .19) / .19) ** 2 + 0.5 * ((stream - .33) / .33) ** 2)
    doc = yaml.safe_load(result.params_yaml())
    assert PerfParams.from_dict(doc["perf"]) == result.params
    assert [t["name"] for t in doc["calibration"]["targets"]] == ["resp", "stream"]


def test_calibration_is_seeded():
    a = calibrate(SMALL, load_space(), budget=3, seed=9)
    b = calibrate(SMALL, load_space(), budget=3, seed=9)
    assert a.params == b.params and a.achieved == b.achieved


def test_unreachable_target_sets_warning():
    impossible = replace(SMALL, targets=(Target("x", "makespan_s", "CM_G_TG", "CM", 0.95, 0.01),))
    result = calibrate(impossible, load_space(), budget=2)
    assert result.warning
    assert result.report()["warning"] is True


def test_degenerate_box_still_reports():
    dims = parse_space({"runtime_scale": [1, 1]})
    result = calibrate(SMALL, dims, budget=2)
    assert result.params.runtime_scale == 1


def test_target_and_space_validation():
    with pytest.raises(ConfigError, match="no calibration targets"):
        parse_targets({"targets": []})
    with pytest.raises(ConfigError):
        parse_targets({"targets": [{"metric": "throughput", "scenario": "CM", "baseline": "NONE",
                                    "improvement": 0.1}]})
    with pytest.raises(ConfigError):
        parse_targets({"targets": [{"metric": "run_s", "scenario": "CM", "baseline": "NONE",
                                    "improvement": 0.1}]})
    with pytest.raises(ConfigError):
        parse_space({"runtime_scale": [3, 1]})
    with pytest.raises(ConfigError):
        parse_space({"warp": [0, 1]})
    with pytest.raises(ConfigError):
        parse_space({})
    with pytest.raises(ConfigError):
        calibrate(SMALL, load_space(), budget=0)
    with pytest.raises(ConfigError):
        calibrate(replace(SMALL, targets=()), load_space(), budget=1)


def test_measure_uses_the_given_seeds():
    p = preset("exp2").perf
    one = measure(p, SMALL, [1])
    assert set(one) == {"resp", "stream"}
    assert measure(p, SMALL, [1]) == one
