"""Loop kernels declared as data streams plus per-cache-line uop groups.

A kernel is normalized to one cache line (64 B) of per-stream progress: uop
counts are per cache line of work, so with 8-byte elements and 32-byte vector
memory operations a unit-stride stream contributes two loads or stores per
line. Ships the built-in streaming benchmark set.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import SchemaError
from .machine import CACHE_LINE_BYTES

ACCESS_KINDS = ("read", "write", "readwrite")
UOP_CLASSES = ("load", "store", "fma", "add", "mul", "lea")
MEMORY_CLASSES = ("load", "store")
ADDRESSING_MODES = ("base-index-offset", "offset-only")

VECTOR_OP_BYTES = 32  # width assumed by the stream/uop consistency check


class KernelConsistencyWarning(UserWarning):
    """Uop counts do not match what the declared streams imply."""


@dataclass(frozen=True)
class Stream:
    """One array touched by the loop."""

    array_name: str
    access: str
    nontemporal: bool = False

    def __post_init__(self):
        if self.access not in ACCESS_KINDS:
            raise SchemaError(f"stream {self.array_name!r}: access must be one of {ACCESS_KINDS}")
        if self.nontemporal and self.access != "write":
            raise SchemaError(f"stream {self.array_name!r}: nontemporal is only valid with access='write'")


@dataclass(frozen=True)
class UopGroup:
    """A number of identical uops issued per cache line of work."""

    count: int
    uop_class: str
    addressing: str | None = None

    def __post_init__(self):
        if not isinstance(self.count, int) or isinstance(self.count, bool) or self.count < 1:
            raise SchemaError(f"uop group: count must be an integer >= 1, got {self.count!r}")
        if self.uop_class not in UOP_CLASSES:
            raise SchemaError(f"uop group: class must be one of {UOP_CLASSES}, got {self.uop_class!r}")
        if self.uop_class in MEMORY_CLASSES:
            if self.addressing not in ADDRESSING_MODES:
                raise SchemaError(f"uop group ({self.uop_class}): addressing must be one of {ADDRESSING_MODES}")
        elif self.addressing is not None:
            raise SchemaError(f"uop group ({self.uop_class}): addressing only applies to load/store uops")


@dataclass(frozen=True)
class KernelModel:
    name: str
    streams: tuple[Stream, ...]
    element_bytes: int
    uops: tuple[UopGroup, ...]
    flops_per_iteration: int = 0  # reporting only, feeds no prediction

    def __post_init__(self):
        if self.element_bytes < 1 or CACHE_LINE_BYTES % self.element_bytes != 0:
            raise SchemaError(f"kernel {self.name!r}: element_bytes must divide {CACHE_LINE_BYTES}")
        names = [s.array_name for s in self.streams]
        if len(names) != len(set(names)):
            raise SchemaError(f"kernel {self.name!r}: stream array names must be unique")

    def uop_count(self, uop_class: str) -> int:
        return sum(g.count for g in self.uops if g.uop_class == uop_class)


@dataclass(frozen=True)
class StreamCounts:
    """Stream tally as reported for a kernel: explicit loads, implicit
    write-allocate loads, and written streams."""

    explicit_loads: int
    rfo_streams: int
    write_streams: int


def _tally(kernel: KernelModel) -> tuple[int, int, int, int]:
    reads = sum(1 for s in kernel.streams if s.access == "read")
    readwrites = sum(1 for s in kernel.streams if s.access == "readwrite")
    writes = sum(1 for s in kernel.streams if s.access == "write" and not s.nontemporal)
    nt_writes = sum(1 for s in kernel.streams if s.access == "write" and s.nontemporal)
    return reads, readwrites, writes, nt_writes


def stream_signature(kernel: KernelModel) -> tuple[int, int, int]:
    """Reporting signature (explicit load streams, store streams, NT store streams).

    A read-modify-write stream appears on both sides: its load is explicit
    and its line is stored to.
    """
    reads, readwrites, writes, nt_writes = _tally(kernel)
    return (reads + readwrites, writes + readwrites, nt_writes)


def bandwidth_signature(kernel: KernelModel) -> tuple[int, int, int]:
    """Access-pattern key used to pick a sustained-bandwidth table entry.

    Unlike stream_signature, a read-modify-write stream counts on the store
    side only: its memory-boundary traffic (line in, dirty line out) matches a
    plain store stream's pattern, and bandwidth is measured per pattern.
    """
    reads, readwrites, writes, nt_writes = _tally(kernel)
    return (reads, writes + readwrites, nt_writes)


def stream_counts(kernel: KernelModel) -> StreamCounts:
    reads, readwrites, writes, nt_writes = _tally(kernel)
    return StreamCounts(
        explicit_loads=reads + readwrites,
        rfo_streams=writes,
        write_streams=writes + nt_writes + readwrites,
    )


def load_streams_with_rfo(kernel: KernelModel) -> int:
    """Streams that load cache lines: explicit reads, read-modify-writes and
    write-allocate misses."""
    counts = stream_counts(kernel)
    return counts.explicit_loads + counts.rfo_streams


def with_nt_stores(kernel: KernelModel, nontemporal: bool = True) -> KernelModel:
    """Variant of `kernel` with every write stream's non-temporal flag set/cleared."""
    streams = tuple(
        replace(s, nontemporal=nontemporal) if s.access == "write" else s for s in kernel.streams
    )
    return replace(kernel, streams=streams)


def consistency_warnings(kernel: KernelModel) -> list[str]:
    """Mismatches between declared uops and what the streams imply.

    Only meaningful for 8-byte elements with 32-byte vector memory ops (two
    per cache line and stream); scalar or exotic kernels simply warn.
    """
    if kernel.element_bytes != 8:
        return []
    ops_per_cl = CACHE_LINE_BYTES // VECTOR_OP_BYTES
    reads, readwrites, writes, nt_writes = _tally(kernel)
    problems = []
    expected_loads = ops_per_cl * (reads + readwrites)
    actual_loads = kernel.uop_count("load")
    if actual_loads != expected_loads:
        problems.append(
            f"kernel {kernel.name!r}: {actual_loads} load uops per cache line, "
            f"but streams imply {expected_loads}"
        )
    expected_stores = ops_per_cl * (writes + nt_writes + readwrites)
    actual_stores = kernel.uop_count("store")
    if actual_stores != expected_stores:
        problems.append(
            f"kernel {kernel.name!r}: {actual_stores} store uops per cache line, "
            f"but streams imply {expected_stores}"
        )
    return problems


def _kernel(name, streams, uops, flops) -> KernelModel:
    return KernelModel(name=name, streams=tuple(streams), element_bytes=8, uops=tuple(uops), flops_per_iteration=flops)


def builtin_kernels() -> dict[str, KernelModel]:
    """The built-in streaming kernels, double precision, one cache line of work.

    Includes the base set (ddot, load, store, update, copy, stream_triad,
    schoenauer_triad), the simple-AGU/LEA addressing variant of the Schoenauer
    triad, and non-temporal-store variants of both triads.
    """
    bio = "base-index-offset"
    kernels = [
        _kernel(
            "ddot",
            [Stream("A", "read"), Stream("B", "read")],
            [UopGroup(4, "load", bio), UopGroup(2, "fma")],
            flops=2,
        ),
        _kernel(
            "load",
            [Stream("A", "read")],
            [UopGroup(2, "load", bio), UopGroup(2, "add")],
            flops=1,
        ),
        _kernel(
            "store",
            [Stream("A", "write")],
            [UopGroup(2, "store", bio)],
            flops=0,
        ),
        _kernel(
            "update",
            [Stream("A", "readwrite")],
            [UopGroup(2, "load", bio), UopGroup(2, "store", bio), UopGroup(2, "mul")],
            flops=1,
        ),
        _kernel(
            "copy",
            [Stream("B", "read"), Stream("A", "write")],
            [UopGroup(2, "load", bio), UopGroup(2, "store", bio)],
            flops=0,
        ),
        _kernel(
            "stream_triad",
            [Stream("B", "read"), Stream("C", "read"), Stream("A", "write")],
            [UopGroup(4, "load", bio), UopGroup(2, "store", bio), UopGroup(2, "fma")],
            flops=2,
        ),
        _kernel(
            "schoenauer_triad",
            [Stream("B", "read"), Stream("C", "read"), Stream("D", "read"), Stream("A", "write")],
            [UopGroup(6, "load", bio), UopGroup(2, "store", bio), UopGroup(2, "fma")],
            flops=2,
        ),
        _kernel(
            "schoenauer_triad_opt",
            [Stream("B", "read"), Stream("C", "read"), Stream("D", "read"), Stream("A", "write")],
            [
                UopGroup(6, "load", bio),
                UopGroup(2, "store", "offset-only"),
                UopGroup(1, "lea"),
                UopGroup(2, "fma"),
            ],
            flops=2,
        ),
    ]
    by_name = {k.name: k for k in kernels}
    for base in ("stream_triad", "schoenauer_triad"):
        nt = with_nt_stores(by_name[base])
        by_name[f"{base}_nt"] = replace(nt, name=f"{base}_nt")
    return by_name


# ---------------------------------------------------------------------------
# file schema


def kernel_from_dict(data: dict, context: str = "kernel") -> KernelModel:
    if not isinstance(data, dict):
        raise SchemaError(f"{context}: expected an object")
    allowed = {"name", "element_bytes", "streams", "uops", "flops_per_iteration"}
    unknown = set(data) - allowed
    if unknown:
        raise SchemaError(f"{context}: unknown key(s) {sorted(unknown)}")
    missing = {"name", "element_bytes", "streams", "uops"} - set(data)
    if missing:
        raise SchemaError(f"{context}: missing key(s) {sorted(missing)}")

    streams = []
    for i, entry in enumerate(data["streams"]):
        ctx = f"{context}: streams[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{ctx}: expected an object")
        unknown = set(entry) - {"array", "access", "nontemporal"}
        if unknown:
            raise SchemaError(f"{ctx}: unknown key(s) {sorted(unknown)}")
        if "array" not in entry or "access" not in entry:
            raise SchemaError(f"{ctx}: needs 'array' and 'access'")
        streams.append(Stream(entry["array"], entry["access"], bool(entry.get("nontemporal", False))))

    uops = []
    for i, entry in enumerate(data["uops"]):
        ctx = f"{context}: uops[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{ctx}: expected an object")
        unknown = set(entry) - {"count", "class", "addressing"}
        if unknown:
            raise SchemaError(f"{ctx}: unknown key(s) {sorted(unknown)}")
        if "count" not in entry or "class" not in entry:
            raise SchemaError(f"{ctx}: needs 'count' and 'class'")
        uops.append(UopGroup(entry["count"], entry["class"], entry.get("addressing")))

    return KernelModel(
        name=data["name"],
        streams=tuple(streams),
        element_bytes=data["element_bytes"],
        uops=tuple(uops),
        flops_per_iteration=data.get("flops_per_iteration", 0),
    )


def load_kernel(path) -> KernelModel:
    """Load and validate a kernel file; uop/stream mismatches warn, not fail."""
    path = Path(path)
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    kernel = kernel_from_dict(data, context=str(path))
    for message in consistency_warnings(kernel):
        warnings.warn(message, KernelConsistencyWarning, stacklevel=2)
    return kernel
