import copy
import random

import pytest
from hypothesis import given, settings, strategies as st

from grainsched.allocator import (AFFINITY_KUBELET, DEFAULT_KUBELET, CpuManager, KubeletPolicy,
                                  TopologyManager, admit_pod, release_pod)
from grainsched.errors import ConfigError, InvariantError
from grainsched.model import GiB, CpuMode, PodRole, PodSpec, ResourceQuantity

from conftest import make_cluster

STATIC_NONE = KubeletPolicy(CpuManager.STATIC, TopologyManager.NONE)


def pod(name, cpus, mem_gib=1):
    return PodSpec(name, "j", PodRole.WORKER, cpus, ResourceQuantity(cpus * 1000, mem_gib * GiB), 0)


def node():
    return make_cluster(nodes=1).node("node-1")


def occupy(n, domain_id, count):
    d = n.domain(domain_id)
    d.free_exclusive_cpus.difference_update(sorted(d.free_exclusive_cpus)[:count])


def test_small_pod_packs_into_domain_zero():
    n = node()
    a = admit_pod(pod("p", 4), n, AFFINITY_KUBELET)
    assert a.mode is CpuMode.EXCLUSIVE
    assert a.spread == {0: 4}
    assert a.cpu_ids == {2, 3, 4, 5}


def test_only_fitting_domain_is_used():
    n = node()
    occupy(n, 0, 8)
    a = admit_pod(pod("p", 16), n, AFFINITY_KUBELET)
    assert a.spread == {1: 16}


def test_split_when_no_domain_fits():
    n = node()
    occupy(n, 0, 8)
    occupy(n, 1, 8)
    a = admit_pod(pod("p", 16), n, AFFINITY_KUBELET)
    assert a.spread == {0: 8, 1: 8}
    assert n.free_exclusive_count() == 0


def test_prefers_domain_with_most_free():
    n = node()
    occupy(n, 0, 4)
    assert admit_pod(pod("p", 2), n, AFFINITY_KUBELET).spread == {1: 2}


def test_topology_none_takes_lowest_ids():
    n = node()
    occupy(n, 0, 14)
    a = admit_pod(pod("p", 4), n, STATIC_NONE)
    assert a.cpu_ids == {16, 17, 20, 21}
    assert a.spread == {0: 2, 1: 2}


def test_cpu_manager_none_is_shared():
    n = node()
    a = admit_pod(pod("p", 4), n, DEFAULT_KUBELET)
    assert a.mode is CpuMode.SHARED and not a.cpu_ids
    assert n.free_exclusive_count() == 32
    assert n.allocated == ResourceQuantity(4000, GiB)


def test_capacity_violation_is_internal_error():
    n = node()
    with pytest.raises(InvariantError):
        admit_pod(pod("p", 33), n, AFFINITY_KUBELET)
    n2 = node()
    fractional = PodSpec("f", "j", PodRole.WORKER, 1, ResourceQuantity(500, GiB), 0)
    with pytest.raises(InvariantError):
        admit_pod(fractional, n2, AFFINITY_KUBELET)


def test_admit_release_restores_state():
    n = node()
    before = copy.deepcopy(n)
    admit_pod(pod("p", 20), n, AFFINITY_KUBELET)
    release_pod("p", n)
    assert n == before


def test_release_unknown_and_double_release():
    n = node()
    with pytest.raises(InvariantError):
        release_pod("ghost", n)
    admit_pod(pod("p", 2), n, AFFINITY_KUBELET)
    release_pod("p", n)
    with pytest.raises(InvariantError):
        release_pod("p", n)


def test_release_isolation():
    n = node()
    admit_pod(pod("a", 4), n, AFFINITY_KUBELET)
    b = admit_pod(pod("b", 4), n, AFFINITY_KUBELET)
    release_pod("a", n)
    assert n.bindings["b"][1] == b
    free = {c for d in n.domains for c in d.free_exclusive_cpus}
    assert not b.cpu_ids & free


def test_kubelet_policy_strings():
    assert KubeletPolicy.parse({"cpu_manager": "static", "topology_manager": "best-effort"}) \
        == AFFINITY_KUBELET
    assert KubeletPolicy.parse({}) == DEFAULT_KUBELET
    with pytest.raises(ConfigError):
        KubeletPolicy.parse({"cpu_manager": "dynamic"})


def check_node(n, policy):
    held = [c for _, a in n.bindings.values() for c in a.cpu_ids]
    assert len(held) == len(set(held)), "cpu held twice"
    free = {c for d in n.domains for c in d.free_exclusive_cpus}
    assert not set(held) & free
    taken = sum(len(d.allocatable_cpus) - len(d.free_exclusive_cpus) for d in n.domains)
    if policy.exclusive:
        assert taken == sum(r.whole_cpus for r, _ in n.bindings.values())
    assert n.allocated.fits_in(n.allocatable)


@settings(max_examples=150)
@given(st.lists(st.tuples(st.booleans(), st.integers(1, 16)), min_size=1, max_size=40),
       st.sampled_from([AFFINITY_KUBELET, STATIC_NONE, DEFAULT_KUBELET]))
def test_random_admit_release_sequences(ops, policy):
    n = node()
    pristine = copy.deepcopy(n)
    live, serial = [], 0
    for admit, cpus in ops:
        if admit or not live:
            if n.free_exclusive_count() < cpus or not pod("x", cpus).resources.fits_in(n.free):
                continue
            free_per_domain = [len(d.free_exclusive_cpus) for d in n.domains]
            a = admit_pod(pod(f"p{serial}", cpus), n, policy)
            if policy is AFFINITY_KUBELET and len(a.spread) > 1:
                # split only when no single domain could hold the pod
                assert max(free_per_domain) < cpus
            live.append(f"p{serial}")
            serial += 1
        else:
            release_pod(live.pop(cpus % len(live)), n)
        check_node(n, policy)
    for p in live:
        release_pod(p, n)
    assert n == pristine
