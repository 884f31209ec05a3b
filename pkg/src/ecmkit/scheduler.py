"""In-core cycle counts per cache line from minimum-makespan uop-to-port
assignment, plus the frontend retirement bound.

The core time splits into two components: cycles spent on loads and stores,
which block concurrent L1-L2 traffic, and cycles spent on arithmetic, which
overlaps with it. Each component is the minimum number of cycles needed to
place its uops on allowed issue ports at one uop per port and cycle. The
retirement frontend caps total throughput and, when it binds, the deficit is
charged to the arithmetic component.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

from .errors import CapabilityError, SchemaError
from .kernels import KernelModel
from .machine import MachineModel

# arithmetic uop class -> port capability that executes it
_ARITH_CAPABILITY = {"fma": "fma", "add": "add", "mul": "mul", "lea": "lea"}

_SEARCH_NODE_BUDGET = 200_000


@dataclass(frozen=True)
class SchedItem:
    """`multiplicity` identical uops, each needing one of the allowed ports."""

    label: str
    ports: frozenset[int]
    multiplicity: int = 1

    def __post_init__(self):
        if not self.ports:
            raise SchemaError(f"uop {self.label!r}: allowed-port set must be non-empty")
        if self.multiplicity < 1:
            raise SchemaError(f"uop {self.label!r}: multiplicity must be >= 1")


@dataclass(frozen=True)
class SchedulingProblem:
    items: tuple[SchedItem, ...]

    def total_uops(self) -> int:
        return sum(it.multiplicity for it in self.items)


@dataclass(frozen=True)
class CoreTiming:
    """Cycles per cache line of work for the two in-core components."""

    t_ol: int
    t_nol: int
    frontend_cycles: int
    bottleneck: str


def min_cycles(problem: SchedulingProblem) -> int:
    """Minimum T such that every uop fits on an allowed port with no port
    receiving more than T uops."""
    cycles, _ = _binding_bound(problem)
    return cycles


def _binding_bound(problem: SchedulingProblem) -> tuple[int, frozenset[int] | None]:
    """Makespan and the port subset that forces it.

    By a Hall-condition argument the optimum equals the maximum over port
    subsets S of ceil(load(S) / |S|), where load(S) counts uops whose whole
    allowed set lies inside S. Only unions of the distinct allowed sets can
    attain the maximum, so enumerating that closure suffices. Ties break
    toward the smallest subset, then lexicographic port ids.
    """
    items = [(it.ports, it.multiplicity) for it in problem.items]
    if not items:
        return 0, None

    closure: set[frozenset[int]] = {ports for ports, _ in items}
    frontier = list(closure)
    while frontier:
        s = frontier.pop()
        for t in list(closure):
            u = s | t
            if u not in closure:
                closure.add(u)
                frontier.append(u)

    best_cycles = 0
    best_subset: frozenset[int] | None = None
    for subset in sorted(closure, key=lambda s: (len(s), sorted(s))):
        load = sum(mult for ports, mult in items if ports <= subset)
        bound = ceil(load / len(subset))
        if bound > best_cycles:
            best_cycles, best_subset = bound, subset
    return best_cycles, best_subset


def _agu_ports(machine: MachineModel, addressing: str) -> frozenset[int]:
    full = machine.ports_with("load-agu-full")
    if addressing == "offset-only":
        return full | machine.ports_with("agu-simple")
    return full


def build_nol_problem(kernel: KernelModel, machine: MachineModel) -> SchedulingProblem:
    """Load/store uops only. A load occupies one full address-generation port
    (the offset-only unit serves store addresses, not loads); a store splits
    into an address uop and a data uop."""
    full = machine.ports_with("load-agu-full")
    data = machine.ports_with("store-data")
    items = []
    for g in kernel.uops:
        if g.uop_class == "load":
            if not full:
                raise CapabilityError(f"kernel {kernel.name!r} needs load-agu-full ports")
            items.append(SchedItem(f"load[{g.addressing}]", full, g.count))
        elif g.uop_class == "store":
            addr = _agu_ports(machine, g.addressing)
            if not addr:
                raise CapabilityError(f"kernel {kernel.name!r} needs address-generation ports")
            if not data:
                raise CapabilityError(f"kernel {kernel.name!r} needs store-data ports")
            items.append(SchedItem(f"store-address[{g.addressing}]", addr, g.count))
            items.append(SchedItem("store-data", data, g.count))
    return SchedulingProblem(tuple(items))


def build_ol_problem(kernel: KernelModel, machine: MachineModel) -> SchedulingProblem:
    """Arithmetic uops only (fma, add, mul, lea)."""
    items = []
    for g in kernel.uops:
        capability = _ARITH_CAPABILITY.get(g.uop_class)
        if capability is None:
            continue
        ports = machine.ports_with(capability)
        if not ports:
            raise CapabilityError(f"kernel {kernel.name!r} needs {capability} ports")
        items.append(SchedItem(g.uop_class, ports, g.count))
    return SchedulingProblem(tuple(items))


def frontend_bound(kernel: KernelModel, machine: MachineModel) -> int:
    """Cycles the retirement frontend needs: stores weigh store_uop_weight
    retire slots, everything else one."""
    slots = 0
    for g in kernel.uops:
        weight = machine.store_uop_weight if g.uop_class == "store" else 1
        slots += g.count * weight
    return ceil(slots / machine.retire_width)


# ---------------------------------------------------------------------------
# joint retire/port pairing
#
# The arithmetic component can exceed its pure port makespan: every cycle
# retires at most retire_width slots, so arithmetic uops must share retire
# groups with the load/store traffic and may be forced apart. The span search
# below finds the fewest distinct cycles the arithmetic uops can occupy in any
# feasible joint schedule (per-cycle port capacity of one, per-cycle retire
# budget, a store issuing address, data and retire slots in one cycle).


class _BudgetExceeded(Exception):
    pass


@dataclass(frozen=True)
class _Unit:
    port_choices: tuple[frozenset[int], ...]  # one port from each set, all in the same cycle
    weight: int
    overlapping: bool


def _joint_units(kernel: KernelModel, machine: MachineModel) -> tuple[list[_Unit], list[_Unit]]:
    full = machine.ports_with("load-agu-full")
    data = machine.ports_with("store-data")
    nol: list[_Unit] = []
    ol: list[_Unit] = []
    for g in sorted(kernel.uops, key=lambda g: (g.uop_class, g.addressing or "")):
        if g.uop_class == "load":
            nol.extend([_Unit((full,), 1, False)] * g.count)
        elif g.uop_class == "store":
            addr = _agu_ports(machine, g.addressing)
            nol.extend([_Unit((addr, data), machine.store_uop_weight, False)] * g.count)
        else:
            ports = machine.ports_with(_ARITH_CAPABILITY[g.uop_class])
            ol.extend([_Unit((ports,), 1, True)] * g.count)
    return nol, ol


def _port_choices(requirements, used: set[int]):
    if len(requirements) == 1:
        for p in sorted(requirements[0] - used):
            yield (p,)
        return
    first, second = requirements
    for a in sorted(first - used):
        for b in sorted(second - used):
            if a != b:
                yield (a, b)


def _co_schedulable(units: list[_Unit], n_cycles: int, ol_window: int, width: int, budget: list[int]) -> bool:
    """Can all units be placed, overlapping ones within cycles < ol_window?"""
    ports_used: list[set[int]] = [set() for _ in range(n_cycles)]
    slots_used = [0] * n_cycles

    def place(i: int, min_cycle: int) -> bool:
        if i == len(units):
            return True
        unit = units[i]
        limit = ol_window if unit.overlapping else n_cycles
        # identical neighbours are interchangeable; force non-decreasing cycles
        start = min_cycle if i > 0 and units[i - 1] == unit else 0
        for c in range(start, limit):
            budget[0] -= 1
            if budget[0] <= 0:
                raise _BudgetExceeded
            if slots_used[c] + unit.weight > width:
                continue
            for combo in _port_choices(unit.port_choices, ports_used[c]):
                ports_used[c].update(combo)
                slots_used[c] += unit.weight
                if place(i + 1, c):
                    return True
                slots_used[c] -= unit.weight
                ports_used[c].difference_update(combo)
        return False

    return place(0, 0)


def _pairing_span(kernel: KernelModel, machine: MachineModel, t_nol: int, raw_ol: int, fe: int) -> int:
    """Fewest distinct cycles the arithmetic uops can span alongside the
    load/store schedule; falls back to the pure port makespan if the search
    budget runs out."""
    nol_units, ol_units = _joint_units(kernel, machine)
    if not ol_units or not nol_units:
        return raw_ol
    width = machine.retire_width
    if any(u.weight > width for u in nol_units + ol_units):
        return raw_ol  # a single uop exceeds the retire budget; pairing model void

    joint = SchedulingProblem(build_nol_problem(kernel, machine).items + build_ol_problem(kernel, machine).items)
    makespan = max(t_nol, raw_ol, fe, min_cycles(joint))
    # stores first, then loads, then arithmetic: most constrained first
    units = sorted(nol_units, key=lambda u: (-u.weight, -len(u.port_choices))) + ol_units
    try:
        for extra in range(0, 9):
            total = makespan + extra
            budget = [_SEARCH_NODE_BUDGET]
            for span in range(raw_ol, total + 1):
                if _co_schedulable(units, total, span, width, budget):
                    return span
    except _BudgetExceeded:
        pass
    return raw_ol


def _ports_label(ports: frozenset[int]) -> str:
    ids = ",".join(str(p) for p in sorted(ports))
    return f"port {ids}" if len(ports) == 1 else f"ports {ids}"


def core_timing(kernel: KernelModel, machine: MachineModel) -> CoreTiming:
    """Both in-core cycle components plus the binding constraint.

    t_nol is the load/store port makespan. t_ol starts from the arithmetic
    port makespan, grows if retire pairing forces the arithmetic uops across
    more cycles, and absorbs any remaining frontend deficit so that
    max(t_ol, t_nol) never undercuts the retirement bound.
    """
    t_nol, nol_subset = _binding_bound(build_nol_problem(kernel, machine))
    raw_ol, ol_subset = _binding_bound(build_ol_problem(kernel, machine))
    fe = frontend_bound(kernel, machine)

    t_ol = raw_ol
    retire_limited = False
    if raw_ol > 0:
        span = _pairing_span(kernel, machine, t_nol, raw_ol, fe)
        if span > raw_ol:
            t_ol = span
            retire_limited = True
    if max(t_ol, t_nol) < fe:
        t_ol = fe
        retire_limited = True

    t_core = max(t_ol, t_nol)
    candidates = []
    if t_core > 0:
        if t_nol == t_core and nol_subset is not None:
            candidates.append(nol_subset)
        if t_ol == t_core and not retire_limited and ol_subset is not None:
            candidates.append(ol_subset)
    if candidates:
        bottleneck = _ports_label(min(candidates, key=lambda s: (len(s), sorted(s))))
    elif t_core > 0:
        bottleneck = "frontend"
    else:
        bottleneck = "none"
    return CoreTiming(t_ol=t_ol, t_nol=t_nol, frontend_cycles=fe, bottleneck=bottleneck)
