"""Intra-chip metrics: allocation ratio, load imbalance, memory and compute efficiency.

All sums run in a fixed order (ascending task_id / section_id) through the
compensated kernels in :mod:`dfbench.kernels`, so results do not depend on
record order or platform.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import reduce

from . import kernels
from .errors import DomainError, ValidationError
from .hardware import HardwareSpec, RooflinePoint, attainable
from .trace import SectionRecord, TaskRecord, TraceSet
from .workload import WorkloadProfile

log = logging.getLogger(__name__)


def allocation_ratio(r_used: int, r_all: int) -> float:
    if r_all < 1:
        raise ValidationError("r_all must be >= 1", field="r_all")
    if r_used < 0:
        raise ValidationError("r_used must be non-negative", field="r_used")
    if r_used > r_all:
        raise ValidationError(f"impossible allocation: {r_used} units used but only {r_all} exist", field="r_used")
    return r_used / r_all


def _by_section(sections):
    return sorted(sections, key=lambda s: s.section_id)


def _clamp(x, values):
    return min(max(x, min(values)), max(values))


def weighted_allocation(sections, r_all: int, kind: str) -> float:
    """Runtime-weighted mean of per-section allocation ratios."""
    secs = _by_section(sections)
    if not secs:
        raise DomainError("no sections")
    ratios = [allocation_ratio(s.units.get(kind, 0), r_all) for s in secs]
    runtimes = [s.runtime_s for s in secs]
    if not any(r > 0 for r in runtimes):
        raise DomainError("no time weight")
    return _clamp(kernels.weighted_mean(ratios, runtimes), ratios)


def _included(tasks, kind):
    inc, dropped = [], []
    for t in sorted(tasks, key=lambda t: t.task_id):
        (inc if t.units.get(kind, 0) > 0 else dropped).append(t)
    return inc, dropped


def load_imbalance(tasks, kind: str) -> float:
    """Resource-weighted mean of T_min / T_i over tasks that hold ``kind`` units."""
    inc, dropped = _included(tasks, kind)
    if dropped:
        log.warning("load imbalance: %d task(s) with zero %s units excluded", len(dropped), kind)
    if not inc:
        raise DomainError(f"no task holds any {kind} units")
    for t in inc:
        if t.throughput is None:
            raise DomainError(f"missing throughput for task {t.task_id}")
        if t.throughput <= 0:
            raise DomainError(f"zero throughput in task {t.task_id}")
    units = [t.units[kind] for t in inc]
    # dividing out the common factor keeps LI exactly invariant to R scaling
    g = reduce(math.gcd, units)
    units = [u // g for u in units]
    li = kernels.load_imbalance(units, [t.throughput for t in inc])
    return min(li, 1.0)


def weighted_load_imbalance(sections) -> float:
    secs = _by_section(sections)
    if not secs:
        raise DomainError("no sections")
    for s in secs:
        if s.li is None:
            raise DomainError(f"missing li on section {s.section_id}")
    runtimes = [s.runtime_s for s in secs]
    if not any(r > 0 for r in runtimes):
        raise DomainError("no time weight")
    lis = [s.li for s in secs]
    return _clamp(kernels.weighted_mean(lis, runtimes), lis)


@dataclass(frozen=True)
class MemoryFractions:
    config: float
    training: float
    total: float


def memory_breakdown(config_bytes: int, training_bytes: int, capacity_bytes: int) -> MemoryFractions:
    if capacity_bytes <= 0:
        raise ValidationError("on-chip memory capacity must be positive", field="onchip_memory_bytes")
    if config_bytes < 0 or training_bytes < 0:
        raise ValidationError("memory byte counts must be non-negative", field="memory_bytes")
    total = config_bytes + training_bytes
    if total > capacity_bytes:
        raise ValidationError(f"capacity exceeded: {total} bytes used of {capacity_bytes}", field="memory_bytes")
    return MemoryFractions(config_bytes / capacity_bytes, training_bytes / capacity_bytes, total / capacity_bytes)


def compute_efficiency(achieved_tflops: float, spec: HardwareSpec, precision: str) -> float:
    """Achieved over peak; may exceed 1 for inconsistent inputs (reports clamp and warn)."""
    if achieved_tflops < 0:
        raise ValidationError("achieved TFLOP/s must be non-negative", field="achieved_tflops")
    return achieved_tflops * 1e12 / spec.peak(precision)


def roofline_place(
    profile_or_ai,
    achieved_tflops: float | None,
    spec: HardwareSpec,
    precision: str,
    label: str = "",
) -> RooflinePoint:
    ai = profile_or_ai.arithmetic_intensity if isinstance(profile_or_ai, WorkloadProfile) else float(profile_or_ai)
    achieved = None if achieved_tflops is None else achieved_tflops * 1e12
    return attainable(spec, precision, ai, achieved, label)


# -- per-trace report -------------------------------------------------------------


@dataclass
class Tier1Report:
    allocation_ratio: dict = field(default_factory=dict)
    weighted_allocation: dict = field(default_factory=dict)
    load_imbalance: dict = field(default_factory=dict)
    weighted_li: float | None = None
    memory_fractions: MemoryFractions | None = None
    compute_efficiency: float | None = None
    roofline: RooflinePoint | None = None
    compute_utilization: float | None = None
    li_granularity: str | None = None
    provenance: dict = field(default_factory=dict)
    not_computable: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


MULTI_CHIP = ("TP", "PP")

METRICS = (
    "allocation_ratio",
    "weighted_allocation",
    "load_imbalance",
    "weighted_li",
    "memory_fractions",
    "compute_efficiency",
    "roofline",
)


def _kinds(records, spec):
    present = set()
    for r in records:
        present.update(k for k, v in r.units.items() if v > 0)
    return [k for k in spec.resource_totals if k in present]


def analyze(trace: TraceSet, spec: HardwareSpec, profile: WorkloadProfile | None = None) -> Tier1Report:
    """Compute every Tier-1 metric the trace supports.

    Metrics the inputs cannot support land in ``not_computable`` with a
    reason; impossible inputs (allocation above the chip total, memory above
    capacity) still raise.
    """
    meta = trace.metadata
    rep = Tier1Report(li_granularity=meta.li_granularity, compute_utilization=meta.compute_utilization)
    prov = meta.provenance

    used_kinds = {k for r in (*trace.tasks, *trace.sections) for k, v in r.units.items() if v > 0}
    foreign = sorted(used_kinds - set(spec.resource_totals))
    if foreign:
        raise ValidationError(f"trace uses {foreign[0]} units but {spec.name} has none", field="units")

    # TP and PP traces span several chips; their totals scale with the degree
    chips = meta.parallelism.degree if meta.parallelism.strategy in MULTI_CHIP else 1

    if trace.tasks:
        kinds = _kinds(trace.tasks, spec)
        for kind in kinds:
            used = sum(t.units.get(kind, 0) for t in trace.tasks)
            rep.allocation_ratio[kind] = allocation_ratio(used, chips * spec.resource_totals[kind])
        if not kinds:
            rep.not_computable["allocation_ratio"] = "missing units: no task holds allocated units"
        for kind in kinds:
            try:
                rep.load_imbalance[kind] = load_imbalance(trace.tasks, kind)
            except DomainError as exc:
                rep.not_computable.setdefault("load_imbalance", {})[kind] = str(exc)
            dropped = [t.task_id for t in trace.tasks if t.units.get(kind, 0) == 0]
            if dropped:
                rep.warnings.append(f"load_imbalance[{kind}]: excluded zero-unit task(s) {', '.join(sorted(dropped))}")
        if not kinds:
            rep.not_computable["load_imbalance"] = "missing units: no task holds allocated units"
    else:
        rep.not_computable["allocation_ratio"] = "missing tasks"
        rep.not_computable["load_imbalance"] = "missing tasks"

    if trace.sections:
        for kind in _kinds(trace.sections, spec):
            try:
                rep.weighted_allocation[kind] = weighted_allocation(trace.sections, chips * spec.resource_totals[kind], kind)
            except DomainError as exc:
                rep.not_computable.setdefault("weighted_allocation", {})[kind] = str(exc)
        try:
            rep.weighted_li = weighted_load_imbalance(trace.sections)
        except DomainError as exc:
            rep.not_computable["weighted_li"] = str(exc)
    else:
        rep.not_computable["weighted_allocation"] = "missing sections"
        rep.not_computable["weighted_li"] = "missing sections"

    mem = None
    if any(t.memory_bytes for t in trace.tasks):
        mem = {
            "config": sum((t.memory_bytes or {}).get("config", 0) for t in trace.tasks),
            "training": sum((t.memory_bytes or {}).get("training", 0) for t in trace.tasks),
        }
    elif meta.memory_bytes:
        mem = {"config": meta.memory_bytes.get("config", 0), "training": meta.memory_bytes.get("training", 0)}
    if mem is None:
        rep.not_computable["memory_fractions"] = "missing memory_bytes"
    elif spec.onchip_memory_bytes <= 0:
        rep.not_computable["memory_fractions"] = "missing onchip_memory_bytes"
    else:
        rep.memory_fractions = memory_breakdown(mem["config"], mem["training"], spec.onchip_memory_bytes)

    precision_known = meta.precision in spec.peak_flops_per_s
    if meta.achieved_tflops is None:
        rep.not_computable["compute_efficiency"] = "missing achieved_tflops"
    elif not precision_known:
        rep.not_computable["compute_efficiency"] = f"missing peak for precision {meta.precision}"
    else:
        eff = compute_efficiency(meta.achieved_tflops, spec, meta.precision)
        if eff > 1.0:
            rep.warnings.append(f"compute_efficiency {eff!r} exceeds 1; clamped")
            eff = 1.0
        rep.compute_efficiency = eff

    ai = meta.arithmetic_intensity
    ai_source = "ingested"
    if ai is None and profile is not None:
        ai, ai_source = profile.arithmetic_intensity, "workload-model"
    if ai is None:
        rep.not_computable["roofline"] = "missing arithmetic_intensity"
    elif spec.global_bw_bytes_per_s is None:
        rep.not_computable["roofline"] = "missing global_bw_bytes_per_s"
    elif not precision_known:
        rep.not_computable["roofline"] = f"missing peak for precision {meta.precision}"
    else:
        rep.roofline = roofline_place(ai, meta.achieved_tflops, spec, meta.precision)
        rep.provenance["roofline_ai"] = ai_source

    for m in METRICS:
        if m not in rep.not_computable or isinstance(rep.not_computable[m], dict):
            rep.provenance.setdefault(m, prov)
    return rep
