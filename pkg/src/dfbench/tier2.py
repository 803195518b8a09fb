"""Inter-chip scalability and deployment-optimization metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import kernels
from .errors import DomainError, ValidationError

DEFAULT_THETA = 0.10


@dataclass(frozen=True)
class ScalingResult:
    strategy: str
    degree: int
    throughput: float
    speedup: float
    efficiency: float
    sublinear: bool = False
    commentary: tuple = ()


def scaling_efficiency(baseline: float, scaled: float, degree: int, strategy: str = "DP", commentary=()) -> ScalingResult:
    if baseline <= 0:
        raise ValidationError("baseline throughput must be positive", field="baseline")
    if scaled <= 0:
        raise ValidationError("scaled throughput must be positive", field="scaled")
    if degree < 1:
        raise ValidationError("degree must be >= 1", field="degree")
    speedup = scaled / baseline
    eff = speedup / degree
    return ScalingResult(strategy, degree, float(scaled), speedup, eff, eff < 1.0, tuple(commentary))


def weight_streaming_penalty(full: float, streaming: float) -> float:
    """Fractional throughput lost when weights are streamed instead of resident."""
    if full <= 0:
        raise ValidationError("resident-weights throughput must be positive", field="full")
    if streaming < 0:
        raise ValidationError("streaming throughput must be non-negative", field="streaming")
    # difference first: exact for comparable magnitudes, so one rounding in total
    return (full - streaming) / full


@dataclass(frozen=True)
class TPStep:
    degree_from: int
    degree_to: int
    throughput_from: float
    throughput_to: float
    degradation: float
    crosses_node_boundary: bool
    inter_machine: bool


def tp_degradation(runs, devices_per_node: int) -> list:
    """Throughput loss between consecutive TP degrees.

    ``runs`` holds ScalingResults or ``(degree, throughput)`` pairs. A step is
    flagged when it moves from within one node to spanning several.
    """
    pairs = []
    for r in runs:
        if isinstance(r, ScalingResult):
            pairs.append((r.degree, r.throughput))
        else:
            d, t = r
            pairs.append((int(d), float(t)))
    if len(pairs) < 2:
        raise ValidationError("need at least two TP runs", field="runs")
    pairs.sort()
    degrees = [d for d, _ in pairs]
    if len(set(degrees)) != len(degrees):
        raise ValidationError("TP runs must have distinct degrees", field="runs")
    steps = []
    for (d0, t0), (d1, t1) in zip(pairs, pairs[1:]):
        if t0 <= 0:
            raise DomainError(f"TP{d0} throughput must be positive")
        steps.append(
            TPStep(
                d0, d1, t0, t1, (t0 - t1) / t0,
                crosses_node_boundary=d0 <= devices_per_node < d1,
                inter_machine=d1 > devices_per_node,
            )
        )
    return steps


def pp_system_throughput(stage_layers, per_layer_capacity: float) -> float:
    """System throughput of an equal-cost-per-layer pipeline: set by its fullest stage."""
    stages = [int(x) for x in stage_layers]
    if any(x < 0 for x in stages):
        raise ValidationError("stage layer counts must be non-negative", field="stage_layers")
    i = kernels.max_load_index(stages)
    if i < 0:
        raise DomainError("all pipeline stages are empty")
    return per_layer_capacity / stages[i]


@dataclass(frozen=True)
class PipelinePlan:
    stage_layers: tuple
    embedding_stage: int | None
    predicted_relative_throughput: float

    @property
    def max_stage_load(self) -> int:
        return max(self.stage_layers) if self.stage_layers else 0

    @property
    def bottleneck_stage(self) -> int:
        return kernels.max_load_index(self.stage_layers)


def pp_assign(total_layers: int, devices: int, pin_embedding: bool = True) -> PipelinePlan:
    """Spread decoder layers over pipeline stages, minimizing the fullest stage.

    With ``pin_embedding`` stage 0 hosts only the embedding and carries no
    decoder layers. Earlier decoder stages take the remainder.
    """
    if total_layers < 0:
        raise ValidationError("total_layers must be non-negative", field="total_layers")
    need = 2 if pin_embedding else 1
    if devices < need:
        raise ValidationError(
            f"{'a pinned embedding needs' if pin_embedding else 'need'} at least {need} devices, got {devices}",
            field="devices",
        )
    usable = devices - 1 if pin_embedding else devices
    layers = kernels.split_even(total_layers, usable)
    stages = ([0] + layers) if pin_embedding else layers
    top = layers[0] if layers else 0
    rel = 1.0 / top if top else 0.0
    return PipelinePlan(tuple(stages), 0 if pin_embedding else None, rel)


def batch_knee(sweep, theta: float = DEFAULT_THETA):
    """Smallest batch after which throughput gains per batch doubling stay below ``theta``.

    ``sweep`` is a sequence of ``(batch, tokens/s)`` with strictly increasing
    batches. The gain between neighbouring points is normalized to one
    doubling: ``(T1/T0) ** (1 / log2(B1/B0)) - 1``. Returns ``None`` when the
    gain never settles below ``theta``.
    """
    pts = [(float(b), float(t)) for b, t in sweep]
    if len(pts) < 3:
        raise ValidationError("batch knee needs at least 3 points", field="sweep")
    for (b0, _), (b1, _) in zip(pts, pts[1:]):
        if b1 <= b0:
            raise ValidationError("batches must be strictly increasing without duplicates", field="sweep")
    if pts[0][0] <= 0:
        raise ValidationError("batch sizes must be positive", field="sweep")
    if any(t <= 0 for _, t in pts):
        raise DomainError("batch sweep throughputs must be positive")
    gains = [per_doubling_gain(b0, t0, b1, t1) for (b0, t0), (b1, t1) in zip(pts, pts[1:])]
    knee = None
    for i in range(len(gains) - 1, -1, -1):
        if gains[i] < theta:
            knee = i
        else:
            break
    if knee is None:
        return None
    b = pts[knee][0]
    return int(b) if b.is_integer() else b


def per_doubling_gain(b0, t0, b1, t1) -> float:
    return (t1 / t0) ** (1.0 / math.log2(b1 / b0)) - 1.0


def precision_gain(base: float, optimized: float) -> float:
    if base <= 0:
        raise ValidationError("base throughput must be positive", field="base")
    return (optimized - base) / base


# -- sweep analysis ----------------------------------------------------------------


@dataclass(frozen=True)
class SweepRun:
    """One run of a sweep, already normalized to tokens/s."""

    label: str
    strategy: str
    degree: int
    throughput: float
    precision: str = ""
    batch_size: int | None = None
    stage_layers: tuple | None = None
    comm_overhead: float | None = None
    platform: str = ""


SWEEP_KINDS = ("dp", "streaming", "tp", "pp", "batch", "precision")


def infer_kind(runs) -> str | None:
    strategies = {r.strategy for r in runs}
    if "weight-streaming" in strategies:
        return "streaming"
    if "TP" in strategies:
        return "tp"
    if "PP" in strategies:
        return "pp"
    if len({r.precision for r in runs}) > 1:
        return "precision"
    if len({r.batch_size for r in runs}) > 1:
        return "batch"
    if len({r.degree for r in runs}) > 1:
        return "dp"
    return None


@dataclass
class SweepResult:
    kind: str | None
    runs: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    not_computable: str | None = None


def analyze_sweep(runs, kind: str | None = None, theta: float = DEFAULT_THETA, devices_per_node: int = 1) -> SweepResult:
    runs = list(runs)
    kind = kind or infer_kind(runs)
    res = SweepResult(kind, runs)
    if len(runs) < 2:
        res.not_computable = "sweep has a single run"
        return res
    if kind is None:
        res.not_computable = "runs do not vary in strategy, degree, batch or precision"
        return res
    if kind not in SWEEP_KINDS:
        raise ValidationError(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}", field="kind")

    if kind == "dp":
        ordered = sorted(runs, key=lambda r: r.degree)
        base = ordered[0]
        res.values["baseline"] = {"label": base.label, "degree": base.degree, "throughput": base.throughput}
        scaling = []
        for r in ordered[1:]:
            rel = r.degree / base.degree
            if not rel.is_integer():
                raise ValidationError(f"{r.label}: degree {r.degree} is not a multiple of baseline degree {base.degree}")
            note = (f"{r.label} vs {base.label}",)
            if r.comm_overhead is not None:
                note += (f"ingested comm_overhead {r.comm_overhead!r}",)
            scaling.append(scaling_efficiency(base.throughput, r.throughput, int(rel), "DP", note))
        res.values["scaling_efficiency"] = scaling
    elif kind == "streaming":
        streaming = [r for r in runs if r.strategy == "weight-streaming"]
        resident = [r for r in runs if r.strategy != "weight-streaming"]
        if len(streaming) != 1 or len(resident) != 1:
            res.not_computable = "streaming sweep needs exactly one resident and one streaming run"
            return res
        res.values["weight_streaming_penalty"] = weight_streaming_penalty(resident[0].throughput, streaming[0].throughput)
    elif kind == "tp":
        res.values["tp_degradation"] = tp_degradation([(r.degree, r.throughput) for r in runs], devices_per_node)
    elif kind == "pp":
        rows = []
        ref_capacity = None
        for r in sorted(runs, key=lambda r: (r.degree, sum(r.stage_layers or ()))):
            if not r.stage_layers:
                raise ValidationError(f"{r.label}: PP run lacks stage_layers", field="stage_layers")
            top = max(r.stage_layers)
            capacity = r.throughput * top
            if ref_capacity is None:
                ref_capacity = capacity
            rows.append({
                "label": r.label,
                "degree": r.degree,
                "stage_layers": list(r.stage_layers),
                "max_stage_load": top,
                "bottleneck_stage": kernels.max_load_index(r.stage_layers),
                "throughput": r.throughput,
                "implied_per_layer_capacity": capacity,
                "pp_system_throughput": pp_system_throughput(r.stage_layers, ref_capacity),
            })
        res.values["reference_per_layer_capacity"] = ref_capacity
        res.values["pp_system_throughput"] = rows
    elif kind == "batch":
        if any(r.batch_size is None for r in runs):
            raise ValidationError("batch sweep runs need a workload with batch_size", field="batch_size")
        pts = sorted((r.batch_size, r.throughput) for r in runs)
        if len(pts) < 3:
            res.not_computable = "batch knee needs at least 3 points"
            return res
        res.values["theta"] = theta
        res.values["batch_knee"] = batch_knee(pts, theta)
        res.values["gains_per_doubling"] = [
            {"from": b0, "to": b1, "gain": per_doubling_gain(b0, t0, b1, t1)}
            for (b0, t0), (b1, t1) in zip(pts, pts[1:])
        ]
    elif kind == "precision":
        base = runs[0]
        res.values["base"] = {"label": base.label, "precision": base.precision, "throughput": base.throughput}
        res.values["precision_gain"] = [
            {"label": r.label, "precision": r.precision, "throughput": r.throughput,
             "gain": precision_gain(base.throughput, r.throughput)}
            for r in runs[1:]
        ]
    return res
