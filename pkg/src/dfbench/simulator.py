"""Abstract models of three accelerator mapping strategies.

* whole-graph kernel placement with elastic PE shrinking (wafer-scale engine),
* section partitioning under the O0 / O1 / O3 compile modes (RDU),
* layer-grouped pipelines with a pinned embedding stage (IPU).

Each plan can be turned into a synthetic :class:`~dfbench.trace.TraceSet`
whose metrics follow in closed form from the plan. Calibration constants are
plain defaults on the dataclasses below, not measurements.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import CapacityError, InvariantViolation, ValidationError
from .hardware import HardwareSpec, PRESETS
from .tier2 import PipelinePlan, pp_assign, pp_system_throughput
from .trace import Parallelism, RunMetadata, SectionRecord, TaskRecord, TraceSet
from .workload import ModelConfig

OP_VOCABULARY = (
    "norm1",
    "qkv_proj",
    "attn_score",
    "attn_context",
    "out_proj",
    "residual1",
    "norm2",
    "mlp_up",
    "activation",
    "mlp_down",
    "residual2",
)

DEFAULT_FUSION = (
    ("norm1",),
    ("qkv_proj", "attn_score", "attn_context", "out_proj"),
    ("residual1",),
    ("norm2",),
    ("mlp_up", "activation", "mlp_down"),
    ("residual2",),
)


@dataclass(frozen=True)
class OpNode:
    name: str
    flops: float
    io_bytes: float


@dataclass(frozen=True)
class DecoderGraph:
    """Forward ops of one decoder block, repeated ``num_layers`` times."""

    ops: tuple
    num_layers: int

    @property
    def layer_flops(self) -> float:
        return sum(op.flops for op in self.ops)


def build_decoder_graph(cfg: ModelConfig) -> DecoderGraph:
    """Per-layer forward ops with 2mnk matmul FLOPs and tensor-shape I/O bytes.

    Elementwise costs per token: norms ``5h``, residual adds ``h``, GELU
    ``8f`` (gpt2-style) or SwiGLU ``4f`` (llama2-style).
    """
    h, f = cfg.hidden_size, cfg.ffn_size
    B, S, nh, pb = cfg.batch_size, cfg.seq_len, cfg.num_heads, cfg.precision_bytes
    N = B * S
    gated = cfg.family == "llama2-style"
    up_cols = 2 * f if gated else f
    act = N * h * pb
    flops = {
        "norm1": 5 * N * h,
        "qkv_proj": 2 * N * h * 3 * h,
        "attn_score": 2 * B * S * S * h,
        "attn_context": 2 * B * S * S * h,
        "out_proj": 2 * N * h * h,
        "residual1": N * h,
        "norm2": 5 * N * h,
        "mlp_up": 2 * N * h * up_cols,
        "activation": (4 if gated else 8) * N * f,
        "mlp_down": 2 * N * f * h,
        "residual2": N * h,
    }
    scores = B * nh * S * S * pb
    io = {
        "norm1": 2 * act + 2 * h * pb,
        "qkv_proj": act + 3 * act + 3 * h * h * pb,
        "attn_score": 2 * act + scores,
        "attn_context": scores + act + act,
        "out_proj": 2 * act + h * h * pb,
        "residual1": 3 * act,
        "norm2": 2 * act + 2 * h * pb,
        "mlp_up": act + N * up_cols * pb + h * up_cols * pb,
        "activation": N * up_cols * pb + N * f * pb,
        "mlp_down": N * f * pb + act + f * h * pb,
        "residual2": 3 * act,
    }
    ops = tuple(OpNode(name, float(flops[name]), float(io[name])) for name in OP_VOCABULARY)
    return DecoderGraph(ops, cfg.num_layers)


# -- RDU section partitioning ---------------------------------------------------


@dataclass(frozen=True)
class RduCostModel:
    """Maps op work onto PCU / PMU demand and runtime."""

    flops_per_pcu: float = 2.0e8
    bytes_per_pmu: float = 5.0e5
    pcu_flops_per_s: float = 0.4e12
    max_splits_per_decoder: int = 3
    total_pcu: int = 640
    total_pmu: int = 640

    def demand(self, op: OpNode) -> tuple:
        pcu = max(1, math.ceil(op.flops / self.flops_per_pcu))
        pmu = max(1, math.ceil(op.io_bytes / self.bytes_per_pmu))
        return pcu, pmu


@dataclass(frozen=True)
class Section:
    ops: tuple
    invocations: int
    pcu: int
    pmu: int
    flops: float
    decoders: tuple | None = None


@dataclass(frozen=True)
class SectionPlan:
    mode: str
    sections: tuple
    total_layers: int

    @property
    def decoder_ratio(self) -> float:
        """Decoder sections per decoder (O3 only)."""
        return len(self.sections) / self.total_layers if self.total_layers else 0.0


def _group(graph, fusion):
    names = [op.name for op in graph.ops]
    covered = [n for g in fusion for n in g]
    if sorted(covered) != sorted(names):
        raise ValidationError("fusion map must cover every op exactly once", field="fusion")
    return [tuple(g) for g in sorted(fusion, key=lambda g: min(names.index(n) for n in g))]


def partition_sections(graph: DecoderGraph, mode: str, budget: int | None = None, cost: RduCostModel = RduCostModel(), fusion=DEFAULT_FUSION) -> SectionPlan:
    """Split the decoder graph into sections for compile mode O0, O1 or O3.

    O0 and O1 share one graph across layers (``invocations = num_layers``).
    O3 packs consecutive whole decoders greedily under a PCU ``budget``; a
    decoder larger than the budget is split over consecutive ops into at most
    ``cost.max_splits_per_decoder`` sections.
    """
    if not graph.ops:
        raise ValidationError("empty graph", field="graph")
    by_name = {op.name: op for op in graph.ops}
    L = graph.num_layers
    mode = mode.upper()

    def make(names, invocations, decoders=None):
        pcu = pmu = 0
        fl = 0.0
        for n in names:
            c, m = cost.demand(by_name[n])
            pcu, pmu, fl = pcu + c, pmu + m, fl + by_name[n].flops
        return Section(tuple(names), invocations, min(pcu, cost.total_pcu), min(pmu, cost.total_pmu), fl, decoders)

    if mode == "O0":
        return SectionPlan("O0", tuple(make((op.name,), L) for op in graph.ops), L)
    if mode == "O1":
        return SectionPlan("O1", tuple(make(g, L) for g in _group(graph, fusion)), L)
    if mode != "O3":
        raise ValidationError(f"unknown compile mode {mode!r}; expected O0, O1 or O3", field="mode")

    if budget is None or budget <= 0:
        raise ValidationError("O3 needs a positive PCU budget per section", field="budget")
    demands = [cost.demand(op) for op in graph.ops]
    worst = max(d[0] for d in demands)
    if worst > budget:
        raise CapacityError(f"budget {budget} PCUs is smaller than one op's requirement ({worst})")
    decoder_pcu = sum(d[0] for d in demands)
    sections = []
    if decoder_pcu <= budget:
        per = budget // decoder_pcu
        for start in range(0, L, per):
            ids = tuple(range(start, min(L, start + per)))
            names = [op.name for op in graph.ops] * len(ids)
            s = make(names, 1, ids)
            sections.append(Section(tuple(op.name for op in graph.ops), 1, s.pcu, s.pmu, s.flops, ids))
    else:
        # first-fit over consecutive ops inside one decoder
        chunks, cur, used = [], [], 0
        for op, (c, _) in zip(graph.ops, demands):
            if cur and used + c > budget:
                chunks.append(cur)
                cur, used = [], 0
            cur.append(op.name)
            used += c
        chunks.append(cur)
        if len(chunks) > cost.max_splits_per_decoder:
            raise CapacityError(
                f"a decoder needs {len(chunks)} sections at budget {budget}, above max_splits_per_decoder={cost.max_splits_per_decoder}"
            )
        for layer in range(L):
            for names in chunks:
                sections.append(make(names, 1, (layer,)))
    return SectionPlan("O3", tuple(sections), L)


# -- WSE kernel placement ---------------------------------------------------------


@dataclass(frozen=True)
class WseCalibration:
    """Defaults chosen so 1 and 6 layers land on 33% and 60% of the chip."""

    preferred_kernel_pes: int = 45_900
    overhead_pes: int = 234_600
    transmission_fraction: float = 0.45
    fail_layers: int = 78


@dataclass(frozen=True)
class Kernel:
    layer: int
    compute_pes: int
    transmission_pes: int

    @property
    def pes(self) -> int:
        return self.compute_pes + self.transmission_pes


@dataclass(frozen=True)
class PlacementPlan:
    kernels: tuple
    overhead_pes: int
    total_pes_used: int
    pe_total: int
    cap: float = 0.93

    @property
    def allocation_ratio(self) -> float:
        return self.total_pes_used / self.pe_total


def wse_place(layers: int, chip: HardwareSpec | None = None, cap: float = 0.93, calib: WseCalibration = WseCalibration()) -> PlacementPlan:
    """Give each decoder kernel its preferred PE count until the cap binds, then shrink."""
    chip = chip or PRESETS["wse2"]
    if layers < 1:
        raise ValidationError("need at least one layer", field="layers")
    if not 0 < cap <= 1:
        raise ValidationError("cap must lie in (0, 1]", field="cap")
    if layers >= calib.fail_layers:
        raise CapacityError(f"{layers} layers do not fit on {chip.name} (compile fails from {calib.fail_layers} layers)")
    total = chip.resource_totals["PE"]
    budget = math.floor(cap * total)
    kernel_budget = budget - calib.overhead_pes
    if kernel_budget < layers:
        raise CapacityError(f"no PEs left for {layers} kernels after {calib.overhead_pes} overhead PEs")
    per_kernel = min(calib.preferred_kernel_pes, kernel_budget // layers)
    tx = math.floor(per_kernel * calib.transmission_fraction)
    kernels = tuple(Kernel(i, per_kernel - tx, tx) for i in range(layers))
    used = calib.overhead_pes + per_kernel * layers
    if used > cap * total:
        raise InvariantViolation(f"placement uses {used} PEs, above the cap of {cap * total}")
    return PlacementPlan(kernels, calib.overhead_pes, used, total, cap)


# -- trace synthesis ------------------------------------------------------------------


@dataclass(frozen=True)
class CostModel:
    """Linear synthesis model: throughput proportional to units held."""

    tokens_per_s_per_unit: float = 10.0
    flops_per_unit_s: float = 1.0e9


def _meta(platform, precision, workload, parallelism=None, **kw):
    return RunMetadata(
        platform=platform,
        precision=precision,
        workload=workload,
        parallelism=parallelism or Parallelism(),
        provenance="compile-time",
        **kw,
    )


def synthesize_trace(plan, cfg: ModelConfig | None = None, cost: CostModel = CostModel(), *, platform=None, precision=None, per_layer_capacity: float = 100.0, jitter: float = 0.0, seed: int = 0) -> TraceSet:
    """Emit a schema-valid trace for ``plan``.

    ``jitter`` perturbs each throughput by a seeded uniform factor in
    ``[1 - jitter, 1 + jitter]`` for noisier oracle fixtures.
    """
    rng = random.Random(seed)

    def noisy(x):
        return x * (1.0 + rng.uniform(-jitter, jitter)) if jitter else x

    if isinstance(plan, PlacementPlan):
        layer_flops = build_decoder_graph(cfg).layer_flops if cfg is not None else 1.0e9
        tasks = []
        if plan.overhead_pes:
            tasks.append(TaskRecord("overhead", "compute", {"PE": plan.overhead_pes},
                                    noisy(cost.tokens_per_s_per_unit * plan.overhead_pes)))
        for k in plan.kernels:
            for kind, pes in (("compute", k.compute_pes), ("transmission", k.transmission_pes)):
                if pes:
                    tasks.append(TaskRecord(
                        f"L{k.layer:03d}.{kind}", kind, {"PE": pes},
                        noisy(cost.tokens_per_s_per_unit * pes),
                        layer_flops / (pes * cost.flops_per_unit_s),
                    ))
        meta = _meta(platform or "wse2", precision or "fp16", cfg, li_granularity="kernel",
                     notes="synthetic: wse_place")
        return TraceSet(meta, tuple(tasks), ())

    if isinstance(plan, SectionPlan):
        graph = build_decoder_graph(cfg) if cfg is not None else None
        rdu = RduCostModel()
        secs = []
        for i, s in enumerate(plan.sections):
            li = 1.0
            if graph is not None:
                by_name = {op.name: op for op in graph.ops}
                uniq = list(dict.fromkeys(s.ops))
                dem = [rdu.demand(by_name[n]) for n in uniq]
                rates = [d[0] / by_name[n].flops if by_name[n].flops else 1.0 for n, d in zip(uniq, dem)]
                slow = min(rates)
                li = sum(slow / r * d[0] for r, d in zip(rates, dem)) / sum(d[0] for d in dem)
            runtime = s.invocations * s.flops / (s.pcu * cost.flops_per_unit_s)
            secs.append(SectionRecord(i, noisy(runtime), {"PCU": s.pcu, "PMU": s.pmu}, s.invocations, min(li, 1.0)))
        meta = _meta(platform or "sn30-rdu", precision or "bf16", cfg, li_granularity="operator",
                     notes=f"synthetic: partition_sections mode {plan.mode}")
        return TraceSet(meta, (), tuple(secs))

    if isinstance(plan, PipelinePlan):
        tasks = []
        tiles = PRESETS["bow2000-ipu"].resource_totals["tile"]
        for i, n in enumerate(plan.stage_layers):
            # the embedding stage is costed as one layer's worth of work
            work = n if n else 1
            tasks.append(TaskRecord(f"stage{i:02d}", "compute", {"tile": tiles}, noisy(per_layer_capacity / work)))
        par = Parallelism("PP", len(plan.stage_layers), tuple(plan.stage_layers))
        meta = _meta(platform or "bow2000-ipu", precision or "fp16", cfg, par,
                     system_throughput=pp_system_throughput(plan.stage_layers, per_layer_capacity),
                     notes="synthetic: pp_assign")
        return TraceSet(meta, tuple(tasks), ())

    raise ValidationError(f"cannot synthesize a trace from {type(plan).__name__}", field="plan")


def simulate(strategy: str, cfg: ModelConfig, *, budget: int | None = None, devices: int | None = None, cap: float = 0.93, jitter: float = 0.0, seed: int = 0):
    """Build a plan and its trace for one named strategy: o0, o1, o3, wse or pp."""
    s = strategy.lower()
    if s in ("o0", "o1", "o3"):
        graph = build_decoder_graph(cfg)
        if s == "o3" and budget is None:
            budget = RduCostModel().total_pcu
        plan = partition_sections(graph, s, budget)
    elif s == "wse":
        plan = wse_place(cfg.num_layers, cap=cap)
    elif s == "pp":
        if devices is None:
            raise ValidationError("pp simulation needs a device count", field="devices")
        plan = pp_assign(cfg.num_layers, devices, pin_embedding=True)
    else:
        raise ValidationError(f"unknown strategy {strategy!r}; expected o0, o1, o3, wse or pp", field="strategy")
    return plan, synthesize_trace(plan, cfg, jitter=jitter, seed=seed)


def plan_to_dict(plan) -> dict:
    if isinstance(plan, SectionPlan):
        return {
            "type": "section-plan",
            "mode": plan.mode,
            "total_layers": plan.total_layers,
            "section_count": len(plan.sections),
            "sections": [
                {"ops": list(s.ops), "decoders": list(s.decoders) if s.decoders is not None else None,
                 "invocations": s.invocations, "units": {"PCU": s.pcu, "PMU": s.pmu}, "flops": s.flops}
                for s in plan.sections
            ],
        }
    if isinstance(plan, PlacementPlan):
        return {
            "type": "placement-plan",
            "cap": plan.cap,
            "pe_total": plan.pe_total,
            "overhead_pes": plan.overhead_pes,
            "total_pes_used": plan.total_pes_used,
            "allocation_ratio": plan.allocation_ratio,
            "kernels": [{"layer": k.layer, "compute_pes": k.compute_pes, "transmission_pes": k.transmission_pes}
                        for k in plan.kernels],
        }
    if isinstance(plan, PipelinePlan):
        return {
            "type": "pipeline-plan",
            "stage_layers": list(plan.stage_layers),
            "embedding_stage": plan.embedding_stage,
            "max_stage_load": plan.max_stage_load,
            "predicted_relative_throughput": plan.predicted_relative_throughput,
        }
    raise ValidationError(f"unknown plan type {type(plan).__name__}")
