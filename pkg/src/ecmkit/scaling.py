"""Multi-core performance: single-core predictions scaled linearly until the
memory-bandwidth ceiling binds, per NUMA domain or per chip, plus
non-temporal-store speedup estimates. Performance is in MUp/s (million loop
iterations per second).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil

from .kernels import KernelModel, bandwidth_signature, with_nt_stores
from .machine import CACHE_LINE_BYTES, MachineModel
from .model import ECMPrediction, PenaltyConfig, apply_penalty, ecm_input, predict
from .traffic import nt_volume_ratio, traffic

PINNING_POLICIES = ("domain-sequential", "round-robin")


@dataclass(frozen=True)
class PerformancePoint:
    cores: int
    performance_mups: Fraction
    bandwidth_bound: bool


@dataclass(frozen=True)
class ScalingCurve:
    mode: str
    points: tuple[PerformancePoint, ...]
    # first core count from which every point is bandwidth bound; None if never
    saturation_cores: int | None
    # bandwidth-bound performance at the full requested core count; None if compute bound
    ceiling_mups: Fraction | None


@dataclass(frozen=True)
class BandwidthCeiling:
    per_domain_mups: Fraction | None
    per_chip_mups: Fraction | None
    compute_bound: bool


@dataclass(frozen=True)
class NtEstimate:
    """Expected gain from non-temporal stores: the exact memory-volume ratio
    and the bandwidth-ceiling estimates for both variants."""

    volume_ratio: Fraction
    regular: BandwidthCeiling
    nontemporal: BandwidthCeiling


def _resolve_mode(machine: MachineModel, mode: str | None) -> str:
    if mode is None:
        return "cod" if machine.numa.cod_enabled else "noncod"
    if mode not in ("cod", "noncod"):
        raise ValueError(f"mode must be 'cod' or 'noncod', got {mode!r}")
    return mode


def iterations_per_cacheline(kernel: KernelModel) -> int:
    return CACHE_LINE_BYTES // kernel.element_bytes


def single_core_performance(pred: ECMPrediction, kernel: KernelModel, machine: MachineModel) -> Fraction:
    """MUp/s for one core with data from memory: f * iterations per line / t_mem."""
    if pred.t_mem == 0:
        raise ValueError("prediction has zero memory-level cycles")
    return machine.frequency_ghz * 1000 * iterations_per_cacheline(kernel) / pred.t_mem


def bandwidth_ceiling(kernel: KernelModel, machine: MachineModel, mode: str | None = None) -> BandwidthCeiling:
    """Memory-bandwidth-bound performance per domain and per chip."""
    mode = _resolve_mode(machine, mode)
    bytes_per_it = traffic(kernel).mem_bytes_per_iteration
    if bytes_per_it == 0:
        return BandwidthCeiling(None, None, compute_bound=True)
    if mode == "cod":
        per_domain = machine.bandwidth(bandwidth_signature(kernel), "cod") * 1000 / bytes_per_it
        return BandwidthCeiling(per_domain, per_domain * machine.numa.n_domains, compute_bound=False)
    per_chip = machine.bandwidth(bandwidth_signature(kernel), "noncod") * 1000 / bytes_per_it
    return BandwidthCeiling(None, per_chip, compute_bound=False)


def scale(
    kernel: KernelModel,
    machine: MachineModel,
    mode: str | None = None,
    max_cores: int | None = None,
    pinning: str = "domain-sequential",
    penalty: PenaltyConfig | None = None,
) -> ScalingCurve:
    """Performance for 1..max_cores: linear in the single-core prediction until
    capped by the bandwidth of the occupied domains (clustered mode) or of the
    chip. Domain-sequential pinning fills one domain before the next;
    round-robin spreads cores across domains.
    """
    mode = _resolve_mode(machine, mode)
    if pinning not in PINNING_POLICIES:
        raise ValueError(f"pinning must be one of {PINNING_POLICIES}")
    total = machine.numa.total_cores
    if max_cores is None:
        max_cores = total
    if not 1 <= max_cores <= total:
        raise ValueError(f"max_cores must be in 1..{total}, got {max_cores}")

    pred = predict(ecm_input(kernel, machine, mode))
    if penalty is not None:
        pred = apply_penalty(pred, kernel, penalty)
    p1 = single_core_performance(pred, kernel, machine)
    ceiling = bandwidth_ceiling(kernel, machine, mode)

    points = []
    last_cap: Fraction | None = None
    for n in range(1, max_cores + 1):
        linear = n * p1
        if ceiling.compute_bound:
            points.append(PerformancePoint(n, linear, bandwidth_bound=False))
            continue
        if mode == "cod":
            if pinning == "domain-sequential":
                occupied = ceil(n / machine.numa.cores_per_domain)
            else:
                occupied = min(n, machine.numa.n_domains)
            cap = occupied * ceiling.per_domain_mups
        else:
            cap = ceiling.per_chip_mups
        last_cap = cap
        points.append(PerformancePoint(n, min(linear, cap), bandwidth_bound=linear >= cap))

    saturation = None
    for point in reversed(points):
        if not point.bandwidth_bound:
            break
        saturation = point.cores
    return ScalingCurve(mode=mode, points=tuple(points), saturation_cores=saturation, ceiling_mups=last_cap)


def nt_speedup(kernel: KernelModel, machine: MachineModel, mode: str | None = None) -> NtEstimate:
    """Estimated non-temporal-store gain for a kernel with write streams.

    The ratio is exact memory-volume arithmetic; the absolute numbers are
    bandwidth ceilings for the regular and non-temporal variants.
    """
    ratio = nt_volume_ratio(kernel)  # raises if there is nothing to toggle
    regular = bandwidth_ceiling(with_nt_stores(kernel, nontemporal=False), machine, mode)
    nontemporal = bandwidth_ceiling(with_nt_stores(kernel, nontemporal=True), machine, mode)
    return NtEstimate(volume_ratio=ratio, regular=regular, nontemporal=nontemporal)
