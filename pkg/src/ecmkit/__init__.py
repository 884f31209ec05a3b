"""Analytic runtime prediction for streaming loop kernels.

Loop runtime per cache line of work decomposes into in-core execution and
per-level data-transfer cycles, combined by an overlap rule; multi-core
performance scales the single-core prediction up to the memory-bandwidth
ceiling. Machines and kernels are declarative (built-in or JSON files).
"""

from .errors import CapabilityError, ECMParseError, SchemaError
from .kernels import (
    KernelModel,
    Stream,
    UopGroup,
    bandwidth_signature,
    builtin_kernels,
    load_kernel,
    stream_counts,
    stream_signature,
    with_nt_stores,
)
from .machine import (
    CacheBoundary,
    MachineModel,
    MemoryModel,
    NumaConfig,
    PortSpec,
    builtin_haswell,
    load_machine,
    lookup_bandwidth,
    serialize_machine,
)
from .model import (
    ECMInput,
    ECMPrediction,
    Measurement,
    ModelError,
    PenaltyConfig,
    apply_penalty,
    ecm_input,
    format_cycles,
    format_ecm,
    mem_cycles_per_cl,
    model_error,
    parse_ecm,
    predict,
    read_measurements,
)
from .scaling import (
    BandwidthCeiling,
    NtEstimate,
    PerformancePoint,
    ScalingCurve,
    bandwidth_ceiling,
    nt_speedup,
    scale,
    single_core_performance,
)
from .scheduler import (
    CoreTiming,
    SchedItem,
    SchedulingProblem,
    build_nol_problem,
    build_ol_problem,
    core_timing,
    frontend_bound,
    min_cycles,
)
from .traffic import TrafficProfile, nt_volume_ratio, traffic

__version__ = "0.1.0"

__all__ = [
    "BandwidthCeiling",
    "CacheBoundary",
    "CapabilityError",
    "CoreTiming",
    "ECMInput",
    "ECMParseError",
    "ECMPrediction",
    "KernelModel",
    "MachineModel",
    "Measurement",
    "MemoryModel",
    "ModelError",
    "NtEstimate",
    "NumaConfig",
    "PenaltyConfig",
    "PerformancePoint",
    "PortSpec",
    "ScalingCurve",
    "SchedItem",
    "SchedulingProblem",
    "SchemaError",
    "Stream",
    "TrafficProfile",
    "UopGroup",
    "apply_penalty",
    "bandwidth_ceiling",
    "bandwidth_signature",
    "build_nol_problem",
    "build_ol_problem",
    "builtin_haswell",
    "builtin_kernels",
    "core_timing",
    "ecm_input",
    "format_cycles",
    "format_ecm",
    "frontend_bound",
    "load_kernel",
    "load_machine",
    "lookup_bandwidth",
    "mem_cycles_per_cl",
    "min_cycles",
    "model_error",
    "nt_speedup",
    "nt_volume_ratio",
    "parse_ecm",
    "predict",
    "read_measurements",
    "scale",
    "serialize_machine",
    "single_core_performance",
    "stream_counts",
    "stream_signature",
    "traffic",
    "with_nt_stores",
]
