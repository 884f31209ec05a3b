import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecmkit import (
    SchemaError,
    builtin_haswell,
    builtin_kernels,
    build_nol_problem,
    build_ol_problem,
    core_timing,
    frontend_bound,
    min_cycles,
)
from ecmkit.errors import CapabilityError
from ecmkit.kernels import KernelModel
from ecmkit.machine import MachineModel, MemoryModel, NumaConfig, PortSpec
from ecmkit.scheduler import SchedItem, SchedulingProblem

from oracles import brute_force_min_cycles, matching_min_cycles

HASWELL = builtin_haswell()
KERNELS = builtin_kernels()


def problem(*items):
    return SchedulingProblem(tuple(SchedItem(f"u{i}", frozenset(ports), mult) for i, (ports, mult) in enumerate(items)))


@pytest.mark.parametrize(
    "items,expected",
    [
        ([({2, 3}, 4)], 2),
        ([({2, 3}, 8)], 4),
        ([({2, 3}, 6), ({2, 3, 7}, 2)], 3),
        ([], 0),
        ([({0}, 1)], 1),
        ([({0, 1, 2}, 7)], 3),
    ],
)
def test_min_cycles_known_cases(items, expected):
    assert min_cycles(problem(*items)) == expected


def test_empty_port_set_rejected():
    with pytest.raises(SchemaError, match="non-empty"):
        SchedItem("u", frozenset())


def test_nol_examples():
    assert min_cycles(build_nol_problem(KERNELS["stream_triad"], HASWELL)) == 3
    assert min_cycles(build_nol_problem(KERNELS["store"], HASWELL)) == 2
    assert min_cycles(build_nol_problem(KERNELS["load"], HASWELL)) == 1
    assert min_cycles(build_nol_problem(KERNELS["schoenauer_triad"], HASWELL)) == 4
    assert min_cycles(build_nol_problem(KERNELS["schoenauer_triad_opt"], HASWELL)) == 3


def test_ol_examples():
    assert min_cycles(build_ol_problem(KERNELS["ddot"], HASWELL)) == 1
    assert min_cycles(build_ol_problem(KERNELS["load"], HASWELL)) == 2
    assert min_cycles(build_ol_problem(KERNELS["schoenauer_triad_opt"], HASWELL)) == 1


def test_lea_excluded_from_nol():
    nol = build_nol_problem(KERNELS["schoenauer_triad_opt"], HASWELL)
    assert all("lea" not in item.label for item in nol.items)


def test_frontend_bound_examples():
    assert frontend_bound(KERNELS["update"], HASWELL) == 2
    assert frontend_bound(KERNELS["ddot"], HASWELL) == 2
    empty = KernelModel("empty", (), 8, ())
    assert frontend_bound(empty, HASWELL) == 0


# (t_ol, t_nol) per kernel on the built-in machine
CORE_TIMINGS = {
    "ddot": (1, 2),
    "load": (2, 1),
    "store": (0, 2),
    "update": (2, 2),
    "copy": (0, 2),
    "stream_triad": (1, 3),
    "schoenauer_triad": (1, 4),
}


@pytest.mark.parametrize("name,expected", sorted(CORE_TIMINGS.items()))
def test_core_timing_reference_kernels(name, expected):
    timing = core_timing(KERNELS[name], HASWELL)
    assert (timing.t_ol, timing.t_nol) == expected


def test_update_charged_to_overlap_component():
    # two multiplies cannot co-retire in one cycle next to the store traffic
    timing = core_timing(KERNELS["update"], HASWELL)
    assert timing.t_ol == 2
    assert timing.frontend_cycles == 2


def test_opt_variant_addressing_faster_but_frontend_bound():
    timing = core_timing(KERNELS["schoenauer_triad_opt"], HASWELL)
    assert timing.t_nol == 3
    assert timing.bottleneck == "frontend"


def test_core_timing_respects_frontend_invariant():
    for kernel in KERNELS.values():
        timing = core_timing(kernel, HASWELL)
        assert max(timing.t_ol, timing.t_nol) >= timing.frontend_cycles


def test_core_timing_order_independent():
    rng = random.Random(3)
    for kernel in KERNELS.values():
        baseline = core_timing(kernel, HASWELL)
        uops = list(kernel.uops)
        for _ in range(4):
            rng.shuffle(uops)
            shuffled = KernelModel(kernel.name, kernel.streams, kernel.element_bytes, tuple(uops))
            assert core_timing(shuffled, HASWELL) == baseline


def test_missing_capability_raises():
    no_fma = MachineModel(
        name="tiny",
        frequency_ghz=HASWELL.frequency_ghz,
        retire_width=4,
        store_uop_weight=2,
        ports=(PortSpec(0, frozenset({"add"})), PortSpec(2, frozenset({"load-agu-full"})), PortSpec(4, frozenset({"store-data"}))),
        boundaries=HASWELL.boundaries,
        memory=MemoryModel(default_bandwidth_gbs=HASWELL.memory.default_bandwidth_gbs),
        numa=NumaConfig(1, 1, False),
    )
    with pytest.raises(CapabilityError, match="fma"):
        build_ol_problem(KERNELS["ddot"], no_fma)


def _random_problem(rng, max_uops=10, max_ports=8):
    n_ports = rng.randint(1, max_ports)
    universe = rng.sample(range(8), n_ports)
    n_uops = rng.randint(0, max_uops)
    sets = []
    for _ in range(n_uops):
        k = rng.randint(1, n_ports)
        sets.append(frozenset(rng.sample(universe, k)))
    return sets


def test_min_cycles_agrees_with_exhaustive_oracle():
    rng = random.Random(0xEC)
    for _ in range(300):
        sets = _random_problem(rng)
        expected = brute_force_min_cycles(sets)
        items = tuple(SchedItem(f"u{i}", s) for i, s in enumerate(sets))
        assert min_cycles(SchedulingProblem(items)) == expected


def test_min_cycles_agrees_with_matching_oracle():
    rng = random.Random(0xCE)
    for _ in range(150):
        sets = _random_problem(rng, max_uops=8, max_ports=6)
        items = tuple(SchedItem(f"u{i}", s) for i, s in enumerate(sets))
        assert min_cycles(SchedulingProblem(items)) == matching_min_cycles(sets)


def test_multiplicities_equivalent_to_repeated_items():
    rng = random.Random(5)
    for _ in range(50):
        sets = _random_problem(rng, max_uops=6)
        if not sets:
            continue
        expanded = tuple(SchedItem(f"u{i}", s) for i, s in enumerate(sets))
        mults = {}
        for s in sets:
            mults[s] = mults.get(s, 0) + 1
        grouped = tuple(SchedItem(f"g{i}", s, m) for i, (s, m) in enumerate(mults.items()))
        assert min_cycles(SchedulingProblem(expanded)) == min_cycles(SchedulingProblem(grouped))


port_sets = st.sets(st.integers(min_value=0, max_value=7), min_size=1, max_size=8).map(frozenset)


@settings(max_examples=150, deadline=None)
@given(st.lists(port_sets, min_size=0, max_size=9), port_sets)
def test_min_cycles_monotone_in_uops(sets, extra):
    base = SchedulingProblem(tuple(SchedItem(f"u{i}", s) for i, s in enumerate(sets)))
    grown = SchedulingProblem(base.items + (SchedItem("extra", extra),))
    assert min_cycles(grown) >= min_cycles(base)


@settings(max_examples=150, deadline=None)
@given(st.lists(port_sets, min_size=1, max_size=9), st.integers(min_value=0, max_value=7), st.data())
def test_min_cycles_monotone_in_ports(sets, new_port, data):
    index = data.draw(st.integers(min_value=0, max_value=len(sets) - 1))
    base = SchedulingProblem(tuple(SchedItem(f"u{i}", s) for i, s in enumerate(sets)))
    widened_sets = list(sets)
    widened_sets[index] = widened_sets[index] | {new_port}
    widened = SchedulingProblem(tuple(SchedItem(f"u{i}", s) for i, s in enumerate(widened_sets)))
    assert min_cycles(widened) <= min_cycles(base)
