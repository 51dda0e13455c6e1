from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from grainsched.errors import ConfigError, InvariantError
from grainsched.model import (GiB, ZERO, ClusterConfig, CpuAssignment, CpuMode, GranularityPlan,
                              JobSpec, Profile, ResourceQuantity, resource_scale)

from conftest import make_cluster, make_job

R = ResourceQuantity(16_000, 32 * GiB)


@pytest.mark.parametrize("n, expected", [
    (4, ResourceQuantity(4000, 8 * GiB)),
    (0, ZERO),
    (16, R),
])
def test_resource_scale_examples(n, expected):
    assert resource_scale(R, n, 16) == expected


def test_resource_scale_indivisible_names_field():
    with pytest.raises(ConfigError, match="cpu_millicores"):
        resource_scale(ResourceQuantity(1001, 16), 1, 16)
    with pytest.raises(ConfigError, match="memory_bytes"):
        resource_scale(ResourceQuantity(1600, 17), 1, 16)


def test_resource_scale_rejects_out_of_range_tasks():
    with pytest.raises(ConfigError):
        resource_scale(R, 17, 16)


def test_subtraction_below_zero_is_an_error():
    with pytest.raises(InvariantError):
        ResourceQuantity(1, 1) - ResourceQuantity(2, 0)
    with pytest.raises((ConfigError, InvariantError)):
        ResourceQuantity(-1, 0)


@st.composite
def partitions(draw):
    n_total = draw(st.integers(1, 64))
    cuts = sorted(draw(st.lists(st.integers(0, n_total), max_size=8)))
    bounds = [0, *cuts, n_total]
    return n_total, [b - a for a, b in zip(bounds, bounds[1:])]


@given(partitions(), st.integers(1, 2000), st.integers(1, 4096))
def test_scale_conserves_over_any_partition(part, cpu_unit, mem_unit):
    n_total, parts = part
    r = ResourceQuantity(cpu_unit * n_total, mem_unit * n_total)
    total = ZERO
    for k in parts:
        total = total + resource_scale(r, k, n_total)
    assert total == r


@given(st.integers(1, 64), st.data())
def test_scale_is_monotone(n_total, data):
    a = data.draw(st.integers(0, n_total))
    b = data.draw(st.integers(a, n_total))
    r = ResourceQuantity(1000 * n_total, GiB * n_total)
    assert resource_scale(r, a, n_total).fits_in(resource_scale(r, b, n_total))


def test_jobspec_validation():
    with pytest.raises(ConfigError):
        make_job(n_tasks=0)
    with pytest.raises(ConfigError):
        make_job(cpu=16_001)
    with pytest.raises(ConfigError):
        make_job(runtime=0)
    with pytest.raises(ConfigError):
        make_job(submit=-1)
    assert make_job().benchmark == "j"


def test_granularity_plan_validation():
    GranularityPlan(4, 16, 4)
    with pytest.raises(InvariantError):
        GranularityPlan(1, 1, 2)
    with pytest.raises(InvariantError):
        GranularityPlan(0, 1, 1)


def test_profile_parse_accepts_config_spellings():
    assert Profile.parse("cpu-memory") is Profile.CPU_MEMORY
    assert Profile.parse("Network") is Profile.NETWORK
    with pytest.raises(ConfigError):
        Profile.parse("gpu")


def test_cpu_assignment_consistency():
    with pytest.raises(InvariantError):
        CpuAssignment(CpuMode.SHARED, frozenset({1}), ((0, 1),))
    with pytest.raises(InvariantError):
        CpuAssignment(CpuMode.EXCLUSIVE, frozenset({1, 2}), ((0, 1),))
    a = CpuAssignment(CpuMode.EXCLUSIVE, frozenset({3, 2}), ((0, 2),))
    assert a.render() == "exclusive cpus=2,3 numa=0:2"


def test_default_cluster_matches_testbed():
    cfg = ClusterConfig()
    assert cfg.allocatable_cpus_per_node == 32
    cluster = make_cluster()
    assert cluster.worker_node_ids() == ["node-1", "node-2", "node-3", "node-4"]
    node = cluster.node("node-1")
    assert [len(d.allocatable_cpus) for d in node.domains] == [16, 16]
    # the two lowest ids of each socket are reserved
    assert min(node.domains[0].allocatable_cpus) == 2
    assert min(node.domains[1].allocatable_cpus) == 20
    assert node.allocatable == ResourceQuantity(32_000, 256 * GiB)
    assert cluster.control_plane.node_id == "control-plane"


def test_binding_bookkeeping():
    cluster = make_cluster()
    cluster.record_binding("p", "node-1", ("j", 0))
    assert cluster.groups_on_node("node-1") == {("j", 0)}
    with pytest.raises(InvariantError):
        cluster.record_binding("p", "node-2")
    with pytest.raises(InvariantError):
        cluster.record_binding("q", "node-9")
    cluster.drop_binding("p")
    assert cluster.groups_on_node("node-1") == set()
    with pytest.raises(InvariantError):
        cluster.drop_binding("p")
