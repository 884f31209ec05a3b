"""Machine descriptions: issue-port inventory, cache-boundary widths, sustained
memory bandwidths and NUMA layout, plus the built-in Haswell reference model.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from ._num import as_fraction
from .errors import SchemaError

CACHE_LINE_BYTES = 64

PORT_CAPABILITIES = frozenset(
    {
        "load-agu-full",
        "agu-simple",
        "store-data",
        "fma",
        "mul",
        "add",
        "lea",
        "branch",
        "shuffle",
    }
)

BOUNDARY_NAMES = ("L1L2", "L2L3")

# stream-signature key of a bandwidth table entry
Signature = tuple[int, int, int]


@dataclass(frozen=True)
class PortSpec:
    """One issue port and the uop classes it can execute."""

    id: int
    capabilities: frozenset[str]

    def __post_init__(self):
        if not isinstance(self.id, int) or isinstance(self.id, bool) or self.id < 0:
            raise SchemaError(f"port id must be a small non-negative integer, got {self.id!r}")
        if not self.capabilities:
            raise SchemaError(f"port {self.id}: capabilities must be non-empty")
        unknown = set(self.capabilities) - PORT_CAPABILITIES
        if unknown:
            raise SchemaError(f"port {self.id}: unknown capabilities {sorted(unknown)}")


@dataclass(frozen=True)
class CacheBoundary:
    """Width of one cache-hierarchy boundary in bytes per core cycle."""

    name: str
    bytes_per_cycle: int

    def __post_init__(self):
        if self.name not in BOUNDARY_NAMES:
            raise SchemaError(f"CacheBoundary: name must be one of {BOUNDARY_NAMES}, got {self.name!r}")
        b = self.bytes_per_cycle
        if not isinstance(b, int) or isinstance(b, bool) or b <= 0:
            raise SchemaError(f"CacheBoundary {self.name}: bytes_per_cycle must be a positive integer")
        # cycles per cache line must be an exact small rational
        if CACHE_LINE_BYTES % b != 0 and b % CACHE_LINE_BYTES != 0:
            raise SchemaError(
                f"CacheBoundary {self.name}: bytes_per_cycle {b} must divide "
                f"{CACHE_LINE_BYTES} or be a multiple of it"
            )

    def cycles_per_cl(self) -> Fraction:
        return Fraction(CACHE_LINE_BYTES, self.bytes_per_cycle)


@dataclass(frozen=True)
class MemoryModel:
    """Sustained-bandwidth table keyed by stream signature.

    Keys are (load streams, store streams, non-temporal store streams); values
    are GB/s, per NUMA domain when the machine runs with domain clustering
    enabled. Lookups never fail: unknown signatures fall back to the default.
    """

    default_bandwidth_gbs: Fraction
    bandwidth_table: dict[Signature, Fraction] = field(default_factory=dict)
    # non-clustered chip bandwidth = n_domains * per-domain * derating
    noncod_derating: Fraction = Fraction(1)

    def __post_init__(self):
        if self.default_bandwidth_gbs <= 0:
            raise SchemaError("memory: default_bandwidth_gbs must be > 0")
        for sig, gbs in self.bandwidth_table.items():
            if gbs <= 0:
                raise SchemaError(f"memory: bandwidth for signature {sig} must be > 0")
        if self.noncod_derating <= 0:
            raise SchemaError("memory: noncod_derating must be > 0")

    def lookup(self, signature: Signature) -> Fraction:
        return self.bandwidth_table.get(tuple(signature), self.default_bandwidth_gbs)


@dataclass(frozen=True)
class NumaConfig:
    """NUMA domain layout of one chip."""

    n_domains: int
    cores_per_domain: int
    cod_enabled: bool

    def __post_init__(self):
        if self.n_domains < 1:
            raise SchemaError("numa: domains must be >= 1")
        if self.cores_per_domain < 1:
            raise SchemaError("numa: cores_per_domain must be >= 1")

    @property
    def total_cores(self) -> int:
        return self.n_domains * self.cores_per_domain


@dataclass(frozen=True)
class MachineModel:
    """Everything the model needs to know about one processor."""

    name: str
    frequency_ghz: Fraction
    retire_width: int
    store_uop_weight: int
    ports: tuple[PortSpec, ...]
    boundaries: tuple[CacheBoundary, ...]
    memory: MemoryModel
    numa: NumaConfig

    def __post_init__(self):
        if self.frequency_ghz <= 0:
            raise SchemaError("frequency_ghz must be > 0")
        if self.retire_width < 1:
            raise SchemaError("retire_width must be >= 1")
        if self.store_uop_weight < 1:
            raise SchemaError("store_uop_weight must be >= 1")
        ids = [p.id for p in self.ports]
        if len(ids) != len(set(ids)):
            raise SchemaError("port ids must be unique")
        names = [b.name for b in self.boundaries]
        if sorted(names) != sorted(BOUNDARY_NAMES):
            raise SchemaError(f"boundaries must contain exactly one of each of {BOUNDARY_NAMES}")

    def boundary(self, name: str) -> CacheBoundary:
        for b in self.boundaries:
            if b.name == name:
                return b
        raise KeyError(name)

    def cycles_per_cl(self, boundary_name: str) -> Fraction:
        return self.boundary(boundary_name).cycles_per_cl()

    def ports_with(self, capability: str) -> frozenset[int]:
        return frozenset(p.id for p in self.ports if capability in p.capabilities)

    def bandwidth(self, signature: Signature, mode: str | None = None) -> Fraction:
        """Sustained GB/s for a stream signature: per-domain in clustered mode,
        full chip otherwise."""
        if mode is None:
            mode = "cod" if self.numa.cod_enabled else "noncod"
        per_domain = self.memory.lookup(signature)
        if mode == "cod":
            return per_domain
        if mode == "noncod":
            return per_domain * self.numa.n_domains * self.memory.noncod_derating
        raise ValueError(f"mode must be 'cod' or 'noncod', got {mode!r}")


def lookup_bandwidth(machine: MachineModel, signature: Signature) -> Fraction:
    """Bandwidth-table hit for an exact signature, else the default. Never fails."""
    return machine.memory.lookup(signature)


def builtin_haswell() -> MachineModel:
    """Embedded 14-core dual-domain Haswell server model (Xeon E5-2695 v3 class).

    Port layout: FMA units on ports 0 and 1, the single vector add unit on
    port 1, multiply on 0 and 1, full address generation on 2 and 3, store
    data on 4, the offset-only address unit on 7, fast LEA on 1 and 5
    (overridable via a machine file), branches on 0 and 6, shuffle on 5.
    Bandwidths are per-domain sustained values for each measured access
    pattern; non-temporal signatures reuse their regular counterpart since
    only the transferred volume changes.
    """
    table = {
        (1, 0, 0): "32.4",
        (2, 0, 0): "32.4",
        (0, 1, 0): "23.6",
        (1, 1, 0): "26.3",
        (2, 1, 0): "27.1",
        (3, 1, 0): "27.8",
        (0, 0, 1): "23.6",
        (2, 0, 1): "27.1",
        (3, 0, 1): "27.8",
    }
    return MachineModel(
        name="haswell",
        frequency_ghz=Fraction("2.3"),
        retire_width=4,
        store_uop_weight=2,
        ports=(
            PortSpec(0, frozenset({"fma", "mul", "branch"})),
            PortSpec(1, frozenset({"fma", "mul", "add", "lea"})),
            PortSpec(2, frozenset({"load-agu-full"})),
            PortSpec(3, frozenset({"load-agu-full"})),
            PortSpec(4, frozenset({"store-data"})),
            PortSpec(5, frozenset({"shuffle", "lea"})),
            PortSpec(6, frozenset({"branch"})),
            PortSpec(7, frozenset({"agu-simple"})),
        ),
        boundaries=(
            CacheBoundary("L1L2", 64),
            CacheBoundary("L2L3", 32),
        ),
        memory=MemoryModel(
            default_bandwidth_gbs=Fraction("27.1"),
            bandwidth_table={sig: Fraction(gbs) for sig, gbs in table.items()},
        ),
        numa=NumaConfig(n_domains=2, cores_per_domain=7, cod_enabled=True),
    )


# ---------------------------------------------------------------------------
# file schema


def _check_keys(obj: dict, required: set[str], optional: set[str], context: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{context}: expected an object")
    unknown = set(obj) - required - optional
    if unknown:
        raise SchemaError(f"{context}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"{context}: missing key(s) {sorted(missing)}")


def _as_int(value, context: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{context}: expected an integer, got {value!r}")
    return value


def _as_number(value, context: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{context}: expected a number, got {value!r}")
    return as_fraction(value)


def machine_from_dict(data: dict, context: str = "machine") -> MachineModel:
    """Build and validate a MachineModel from a parsed machine file."""
    _check_keys(
        data,
        {"name", "frequency_ghz", "retire_width", "store_uop_weight", "ports", "boundaries", "memory", "numa"},
        set(),
        context,
    )
    if not isinstance(data["name"], str):
        raise SchemaError(f"{context}: name must be a string")

    ports = []
    for i, entry in enumerate(data["ports"]):
        ctx = f"{context}: ports[{i}]"
        _check_keys(entry, {"id", "capabilities"}, set(), ctx)
        caps = entry["capabilities"]
        if not isinstance(caps, list) or not all(isinstance(c, str) for c in caps):
            raise SchemaError(f"{ctx}: capabilities must be a list of strings")
        ports.append(PortSpec(_as_int(entry["id"], f"{ctx}: id"), frozenset(caps)))

    boundaries = []
    for i, entry in enumerate(data["boundaries"]):
        ctx = f"{context}: boundaries[{i}]"
        _check_keys(entry, {"name", "bytes_per_cycle"}, set(), ctx)
        bpc = entry["bytes_per_cycle"]
        if isinstance(bpc, float) and bpc.is_integer():
            bpc = int(bpc)
        boundaries.append(CacheBoundary(entry["name"], bpc))

    mem = data["memory"]
    _check_keys(mem, {"default_bandwidth_gbs"}, {"table", "noncod_derating"}, f"{context}: memory")
    table: dict[Signature, Fraction] = {}
    for i, row in enumerate(mem.get("table", [])):
        ctx = f"{context}: memory.table[{i}]"
        _check_keys(row, {"loads", "stores", "nt_stores", "gbs"}, set(), ctx)
        sig = (
            _as_int(row["loads"], f"{ctx}: loads"),
            _as_int(row["stores"], f"{ctx}: stores"),
            _as_int(row["nt_stores"], f"{ctx}: nt_stores"),
        )
        if sig in table:
            raise SchemaError(f"{ctx}: duplicate signature {sig}")
        table[sig] = _as_number(row["gbs"], f"{ctx}: gbs")
    memory = MemoryModel(
        default_bandwidth_gbs=_as_number(mem["default_bandwidth_gbs"], f"{context}: memory.default_bandwidth_gbs"),
        bandwidth_table=table,
        noncod_derating=_as_number(mem.get("noncod_derating", 1), f"{context}: memory.noncod_derating"),
    )

    numa_obj = data["numa"]
    _check_keys(numa_obj, {"domains", "cores_per_domain", "cod"}, set(), f"{context}: numa")
    if not isinstance(numa_obj["cod"], bool):
        raise SchemaError(f"{context}: numa.cod must be a boolean")
    numa = NumaConfig(
        n_domains=_as_int(numa_obj["domains"], f"{context}: numa.domains"),
        cores_per_domain=_as_int(numa_obj["cores_per_domain"], f"{context}: numa.cores_per_domain"),
        cod_enabled=numa_obj["cod"],
    )

    return MachineModel(
        name=data["name"],
        frequency_ghz=_as_number(data["frequency_ghz"], f"{context}: frequency_ghz"),
        retire_width=_as_int(data["retire_width"], f"{context}: retire_width"),
        store_uop_weight=_as_int(data["store_uop_weight"], f"{context}: store_uop_weight"),
        ports=tuple(ports),
        boundaries=tuple(boundaries),
        memory=memory,
        numa=numa,
    )


def load_machine(path) -> MachineModel:
    """Load and validate a machine file (JSON, schema above)."""
    path = Path(path)
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return machine_from_dict(data, context=str(path))


def _json_number(value: Fraction):
    return int(value) if value.denominator == 1 else float(value)


def serialize_machine(machine: MachineModel) -> dict:
    """Schema-shaped dict for a machine; json.dump of it reloads field-identically."""
    out = {
        "name": machine.name,
        "frequency_ghz": _json_number(machine.frequency_ghz),
        "retire_width": machine.retire_width,
        "store_uop_weight": machine.store_uop_weight,
        "ports": [{"id": p.id, "capabilities": sorted(p.capabilities)} for p in machine.ports],
        "boundaries": [{"name": b.name, "bytes_per_cycle": b.bytes_per_cycle} for b in machine.boundaries],
        "memory": {
            "default_bandwidth_gbs": _json_number(machine.memory.default_bandwidth_gbs),
            "table": [
                {"loads": sig[0], "stores": sig[1], "nt_stores": sig[2], "gbs": _json_number(gbs)}
                for sig, gbs in sorted(machine.memory.bandwidth_table.items())
            ],
        },
        "numa": {
            "domains": machine.numa.n_domains,
            "cores_per_domain": machine.numa.cores_per_domain,
            "cod": machine.numa.cod_enabled,
        },
    }
    if machine.memory.noncod_derating != 1:
        out["memory"]["noncod_derating"] = _json_number(machine.memory.noncod_derating)
    return out
