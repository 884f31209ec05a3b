import json
import random

import pytest

from ecmkit import (
    SchemaError,
    bandwidth_signature,
    builtin_kernels,
    load_kernel,
    stream_counts,
    stream_signature,
    with_nt_stores,
)
from ecmkit.kernels import KernelModel, Stream, UopGroup, consistency_warnings

ALL_BUILTINS = (
    "ddot",
    "load",
    "store",
    "update",
    "copy",
    "stream_triad",
    "schoenauer_triad",
    "schoenauer_triad_opt",
    "stream_triad_nt",
    "schoenauer_triad_nt",
)


def test_builtin_set_complete():
    assert set(builtin_kernels()) == set(ALL_BUILTINS)


@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_builtins_validate_without_warnings(name):
    kernel = builtin_kernels()[name]
    assert consistency_warnings(kernel) == []


# expected (explicit loads, RFO streams, write streams) per kernel
STREAM_COLUMNS = {
    "ddot": (2, 0, 0),
    "load": (1, 0, 0),
    "store": (0, 1, 1),
    "update": (1, 0, 1),
    "copy": (1, 1, 1),
    "stream_triad": (2, 1, 1),
    "schoenauer_triad": (3, 1, 1),
}


@pytest.mark.parametrize("name,expected", sorted(STREAM_COLUMNS.items()))
def test_stream_columns_recomputed(name, expected):
    counts = stream_counts(builtin_kernels()[name])
    assert (counts.explicit_loads, counts.rfo_streams, counts.write_streams) == expected


@pytest.mark.parametrize(
    "name,expected",
    [
        ("ddot", (2, 0, 0)),
        ("copy", (1, 1, 0)),
        ("update", (1, 1, 0)),
        ("schoenauer_triad", (3, 1, 0)),
        ("stream_triad_nt", (2, 0, 1)),
    ],
)
def test_stream_signature(name, expected):
    assert stream_signature(builtin_kernels()[name]) == expected


def test_stream_signature_empty_kernel():
    kernel = KernelModel("noop", (), 8, (UopGroup(1, "add"),))
    assert stream_signature(kernel) == (0, 0, 0)


def test_bandwidth_signature_groups_readmodifywrite_with_stores():
    kernels = builtin_kernels()
    assert bandwidth_signature(kernels["update"]) == (0, 1, 0)
    assert bandwidth_signature(kernels["store"]) == (0, 1, 0)
    assert bandwidth_signature(kernels["copy"]) == (1, 1, 0)
    assert bandwidth_signature(kernels["stream_triad_nt"]) == (2, 0, 1)


def test_signatures_invariant_under_stream_order():
    rng = random.Random(7)
    for name, kernel in builtin_kernels().items():
        streams = list(kernel.streams)
        for _ in range(5):
            rng.shuffle(streams)
            shuffled = KernelModel(name, tuple(streams), kernel.element_bytes, kernel.uops)
            assert stream_signature(shuffled) == stream_signature(kernel)
            assert bandwidth_signature(shuffled) == bandwidth_signature(kernel)


def test_nt_flag_only_on_writes():
    with pytest.raises(SchemaError, match="nontemporal"):
        Stream("A", "read", nontemporal=True)


def test_duplicate_array_names_rejected():
    with pytest.raises(SchemaError, match="unique"):
        KernelModel("bad", (Stream("A", "read"), Stream("A", "write")), 8, ())


def test_with_nt_stores_toggles_only_writes():
    triad = builtin_kernels()["stream_triad"]
    nt = with_nt_stores(triad)
    assert [s.nontemporal for s in nt.streams] == [False, False, True]
    back = with_nt_stores(nt, nontemporal=False)
    assert back == triad


DDOT_FILE = {
    "name": "ddot",
    "element_bytes": 8,
    "streams": [{"array": "A", "access": "read"}, {"array": "B", "access": "read"}],
    "uops": [
        {"count": 4, "class": "load", "addressing": "base-index-offset"},
        {"count": 2, "class": "fma"},
    ],
    "flops_per_iteration": 2,
}


def test_load_kernel_matches_builtin(tmp_path):
    path = tmp_path / "ddot.json"
    path.write_text(json.dumps(DDOT_FILE))
    assert load_kernel(path) == builtin_kernels()["ddot"]


def test_load_kernel_nt_read_rejected(tmp_path):
    data = dict(DDOT_FILE, streams=[{"array": "A", "access": "read", "nontemporal": True}])
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(SchemaError, match="'A'"):
        load_kernel(path)


def test_load_kernel_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(dict(DDOT_FILE, body="s += A[i]*B[i]")))
    with pytest.raises(SchemaError, match="body"):
        load_kernel(path)


def test_inconsistent_uops_warn_but_load(tmp_path):
    data = dict(
        DDOT_FILE,
        uops=[{"count": 3, "class": "load", "addressing": "base-index-offset"}, {"count": 2, "class": "fma"}],
    )
    path = tmp_path / "odd.json"
    path.write_text(json.dumps(data))
    with pytest.warns(UserWarning, match="3 load uops"):
        kernel = load_kernel(path)
    assert kernel.uop_count("load") == 3


def test_addressing_required_for_memory_uops():
    with pytest.raises(SchemaError, match="addressing"):
        UopGroup(2, "load")
    with pytest.raises(SchemaError, match="addressing"):
        UopGroup(2, "fma", addressing="offset-only")


def test_element_bytes_must_divide_cacheline():
    with pytest.raises(SchemaError, match="element_bytes"):
        KernelModel("bad", (), 10, ())
