import math

import pytest

from socsched.profiles import (
    JobProfile,
    PeSpec,
    ProfileError,
    ResourceProfile,
    TaskSpec,
    load_bundled,
    mean_exec_time,
    parse_job_profile,
    parse_profiles,
    parse_resource_profile,
    serialize_job_profile,
    serialize_resource_profile,
    validate_dag,
)

from conftest import make_resources, random_instance


def test_parse_single_task_entry_equals_exit():
    job = parse_job_profile("job j\ntask 0 exec 1:5\n")
    assert job.entry_ids == {0}
    assert job.exit_ids == {0}


def test_parse_rejects_smallest_cycle():
    text = "job j\ntask 0 exec 1:5\ntask 1 exec 1:5\nedge 0 1 1\nedge 1 0 1\n"
    with pytest.raises(ProfileError, match="cycle"):
        parse_job_profile(text)


def test_cycle_error_names_task_sequence():
    text = (
        "job j\ntask 0 exec 1:5\ntask 1 exec 1:5\ntask 2 exec 1:5\n"
        "edge 0 1 1\nedge 1 2 1\nedge 2 0 1\n"
    )
    with pytest.raises(ProfileError) as err:
        parse_job_profile(text)
    msg = str(err.value)
    assert "->" in msg and "0" in msg and "1" in msg and "2" in msg


def test_empty_job_is_rejected():
    with pytest.raises(ProfileError, match="no entry task"):
        parse_job_profile("job j\n")


def test_unknown_directive_rejected_with_line():
    with pytest.raises(ProfileError, match="line 2"):
        parse_job_profile("job j\nbogus 1 2 3\n")


def test_unsupported_task_rejected():
    job = JobProfile(
        "j",
        (
            TaskSpec(0, (), {1: 5.0}),
            TaskSpec(1, ((0, 1.0),), {1: 5.0}),
            TaskSpec(2, ((1, 1.0),), {}),
        ),
    )
    with pytest.raises(ProfileError, match="no resource type"):
        validate_dag(job)


def test_pair_validation_rejects_orphan_type():
    job = parse_job_profile("job j\ntask 0 exec 9:5\n")
    with pytest.raises(ProfileError, match="type"):
        parse_profiles(serialize_job_profile(job), "pe 0 type 1\n")


def test_roundtrip_is_identity_after_normalization(canonical, wifi):
    for job, res in (canonical, wifi):
        jtext = serialize_job_profile(job)
        rtext = serialize_resource_profile(res)
        job2, res2 = parse_profiles(jtext, rtext)
        assert job2 == job
        assert res2 == res
        assert serialize_job_profile(job2) == jtext
        assert serialize_resource_profile(res2) == rtext


def test_wifi_row4_exec_times(wifi):
    job, _ = wifi
    t4 = job.by_id[4]
    assert t4.exec_times == {1: 118, 2: 296, 5: 3, 6: 2}
    assert not any(t4.supports(x) for x in (3, 4, 7))


def test_wifi_inventory_counts(wifi):
    _, res = wifi
    counts = {}
    for pe in res.pes:
        counts[pe.type_id] = counts.get(pe.type_id, 0) + 1
    assert counts == {1: 4, 2: 4, 3: 1, 4: 1, 5: 2, 6: 2, 7: 3}
    assert res.type_count == 7


def test_canonical_is_valid_ten_tasks(canonical):
    job, res = canonical
    assert len(job.tasks) == 10
    validate_dag(job)
    assert res.type_count == 3


def test_mean_exec_time_examples(wifi):
    job, _ = wifi
    one_each_12 = ResourceProfile(pes=(PeSpec(0, 1), PeSpec(1, 2)))
    assert mean_exec_time(job.by_id[1], one_each_12) == pytest.approx((4 + 22) / 2)
    one_each_1256 = ResourceProfile(
        pes=(PeSpec(0, 1), PeSpec(1, 2), PeSpec(2, 5), PeSpec(3, 6))
    )
    assert mean_exec_time(job.by_id[4], one_each_1256) == pytest.approx(104.75)


def test_mean_exec_time_singleton_and_uniform_multiset():
    task = TaskSpec(0, (), {1: 7.0, 2: 9.0})
    single = ResourceProfile(pes=(PeSpec(0, 2),))
    assert mean_exec_time(task, single) == 9.0
    uniform = ResourceProfile(pes=tuple(PeSpec(i, 1) for i in range(5)))
    assert mean_exec_time(task, uniform) == 7.0


def test_mean_exec_counts_pe_instances():
    # Two type-1 PEs and one type-2 PE weight type 1 twice.
    task = TaskSpec(0, (), {1: 3.0, 2: 9.0})
    res = ResourceProfile(pes=(PeSpec(0, 1), PeSpec(1, 1), PeSpec(2, 2)))
    assert mean_exec_time(task, res) == pytest.approx(5.0)


def test_topological_order_respects_every_edge():
    import numpy as np

    rng = np.random.default_rng(7)
    for _ in range(50):
        job, _ = random_instance(rng, n_tasks=10)
        order = job.topological_order()
        pos = {tid: i for i, tid in enumerate(order)}
        for t in job.tasks:
            for pred, _ in t.predecessors:
                assert pos[pred] < pos[t.task_id]


def test_exec_times_must_be_positive_finite():
    with pytest.raises(ProfileError):
        parse_job_profile("job j\ntask 0 exec 1:0\n")
    with pytest.raises(ProfileError):
        parse_job_profile("job j\ntask 0 exec 1:inf\n")
    with pytest.raises(ProfileError):
        parse_job_profile("job j\ntask 0 exec 1:5\ntask 1 exec 1:5\nedge 0 1 -2\n")


def test_comm_cost_zero_allowed():
    job = parse_job_profile("job j\ntask 0 exec 1:5\ntask 1 exec 1:5\nedge 0 1 0\n")
    assert job.comm_cost[(0, 1)] == 0.0


def test_resource_parse_errors():
    with pytest.raises(ProfileError, match="no PEs"):
        parse_resource_profile("# nothing\n")
    with pytest.raises(ProfileError, match="duplicate"):
        parse_resource_profile("pe 0 type 1\npe 0 type 2\n")


def test_bundled_names():
    for name in ("canonical", "wifi", "toy"):
        job, res = load_bundled(name)
        validate_dag(job)
    with pytest.raises(ProfileError):
        load_bundled("nope")
