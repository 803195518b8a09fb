"""Profiling-trace schema: line-delimited JSON records.

Line 1 is a ``metadata`` record carrying ``schema_version``; every further
line is a ``task`` or ``section`` record. Field names match the dataclass
fields below. ``emit_trace`` writes the canonical form (fixed field order,
``None`` fields omitted, shortest round-trip floats), so
``emit_trace(parse_trace(x))`` is stable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import TraceError, ValidationError
from .hardware import RESOURCE_KINDS
from .workload import ModelConfig

SCHEMA_VERSION = 1

TASK_KINDS = ("compute", "transmission")
STRATEGIES = ("none", "DP", "TP", "PP", "weight-streaming")
THROUGHPUT_UNITS = ("tokens/s", "samples/s")
PROVENANCE = ("compile-time", "runtime")
MEMORY_KINDS = ("config", "training")


@dataclass(frozen=True)
class Parallelism:
    strategy: str = "none"
    degree: int = 1
    stage_layers: tuple | None = None


@dataclass(frozen=True)
class RunMetadata:
    platform: str
    precision: str
    workload: ModelConfig | None = None
    parallelism: Parallelism = field(default_factory=Parallelism)
    achieved_tflops: float | None = None
    system_throughput: float | None = None
    throughput_unit_in_source: str = "tokens/s"
    provenance: str = "runtime"
    li_granularity: str | None = None
    arithmetic_intensity: float | None = None
    memory_bytes: dict | None = None
    compute_utilization: float | None = None
    comm_overhead: float | None = None
    notes: str | None = None

    def system_tokens_per_s(self, workload: ModelConfig | None = None) -> float | None:
        """System throughput converted to tokens/s (``None`` if absent)."""
        if self.system_throughput is None:
            return None
        cfg = self.workload or workload
        seq = cfg.seq_len if cfg is not None else None
        return normalize_throughput(self.system_throughput, self.throughput_unit_in_source, seq)


@dataclass(frozen=True)
class TaskRecord:
    task_id: str
    kind: str
    units: dict
    throughput: float | None = None
    runtime_s: float | None = None
    memory_bytes: dict | None = None


@dataclass(frozen=True)
class SectionRecord:
    section_id: int
    runtime_s: float
    units: dict
    invocations: int = 1
    li: float | None = None


@dataclass(frozen=True)
class TraceSet:
    metadata: RunMetadata
    tasks: tuple = ()
    sections: tuple = ()

    def __post_init__(self):
        if not self.tasks and not self.sections:
            raise ValidationError("a trace needs at least one task or section record", field="tasks")
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "sections", tuple(self.sections))


def normalize_throughput(value: float, unit: str, seq_len: int | None = None) -> float:
    """Convert a throughput to tokens/s."""
    if value < 0:
        raise ValidationError("throughput must be non-negative", field="throughput")
    if unit == "tokens/s":
        return float(value)
    if unit == "samples/s":
        if seq_len is None or seq_len < 1:
            raise ValidationError("samples/s needs a sequence length to convert to tokens/s", field="seq_len")
        return float(value) * seq_len
    raise ValidationError(f"unknown throughput unit {unit!r}; expected one of {THROUGHPUT_UNITS}", field="throughput_unit_in_source")


# -- field checking -------------------------------------------------------------


class _Checker:
    """Collects field problems for one record with its line number."""

    def __init__(self, line: int, issues: list):
        self.line = line
        self.issues = issues
        self.bad = False

    def fail(self, field_name, message):
        self.issues.append({"line": self.line, "field": field_name, "message": message})
        self.bad = True

    def number(self, d, name, required=False, minimum=0.0, strict=False, maximum=None):
        if name not in d or d[name] is None:
            if required:
                self.fail(name, f"missing required field {name}")
            return None
        v = d[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(name, f"{name} must be a number, got {v!r}")
            return None
        v = float(v)
        if v != v or v in (float("inf"), float("-inf")):
            self.fail(name, f"{name} must be finite")
            return None
        if (strict and v <= minimum) or v < minimum:
            self.fail(name, f"{name} must be {'>' if strict else '>='} {minimum}, got {v!r}")
            return None
        if maximum is not None and v > maximum:
            self.fail(name, f"{name} must be <= {maximum}, got {v!r}")
            return None
        return v

    def integer(self, d, name, required=False, minimum=0):
        if name not in d or d[name] is None:
            if required:
                self.fail(name, f"missing required field {name}")
            return None
        v = d[name]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(name, f"{name} must be an integer, got {v!r}")
            return None
        if v < minimum:
            self.fail(name, f"{name} must be >= {minimum}, got {v}")
            return None
        return v

    def string(self, d, name, required=False, choices=None):
        if name not in d or d[name] is None:
            if required:
                self.fail(name, f"missing required field {name}")
            return None
        v = d[name]
        if not isinstance(v, str):
            self.fail(name, f"{name} must be a string, got {v!r}")
            return None
        if choices is not None and v not in choices:
            self.fail(name, f"{name} must be one of {list(choices)}, got {v!r}")
            return None
        return v

    def count_map(self, d, name, keys, required=False):
        if name not in d or d[name] is None:
            if required:
                self.fail(name, f"missing required field {name}")
            return None
        v = d[name]
        if not isinstance(v, dict):
            self.fail(name, f"{name} must be a mapping")
            return None
        out = {}
        for k in keys:
            if k in v:
                n = v[k]
                if isinstance(n, bool) or not isinstance(n, int) or n < 0:
                    self.fail(f"{name}.{k}", f"{name}.{k} must be a non-negative integer, got {n!r}")
                else:
                    out[k] = n
        extra = sorted(set(v) - set(keys))
        if extra:
            self.fail(name, f"{name} has unknown key(s) {extra}; expected {list(keys)}")
        return out

    def unknown(self, d, allowed):
        extra = sorted(set(d) - set(allowed) - {"record"})
        for k in extra:
            self.fail(k, f"unknown field {k}")


_META_FIELDS = (
    "schema_version", "platform", "precision", "workload", "parallelism", "achieved_tflops",
    "system_throughput", "throughput_unit_in_source", "provenance", "li_granularity",
    "arithmetic_intensity", "memory_bytes", "compute_utilization", "comm_overhead", "notes",
)
_TASK_FIELDS = ("task_id", "kind", "units", "throughput", "runtime_s", "memory_bytes")
_SECTION_FIELDS = ("section_id", "runtime_s", "units", "invocations", "li")


def _metadata(d: dict, ck: _Checker) -> RunMetadata | None:
    ck.unknown(d, _META_FIELDS)
    if "schema_version" not in d:
        ck.fail("schema_version", "metadata record must carry schema_version")
    elif d["schema_version"] != SCHEMA_VERSION:
        ck.fail("schema_version", f"schema version mismatch: file has {d['schema_version']!r}, reader supports {SCHEMA_VERSION}")
    platform = ck.string(d, "platform", required=True)
    precision = ck.string(d, "precision", required=True)
    workload = None
    if d.get("workload") is not None:
        try:
            workload = ModelConfig.from_dict(d["workload"])
        except ValidationError as exc:
            ck.fail(f"workload.{exc.field}" if exc.field else "workload", str(exc))
    par = Parallelism()
    if d.get("parallelism") is not None:
        p = d["parallelism"]
        if not isinstance(p, dict):
            ck.fail("parallelism", "parallelism must be a mapping")
        else:
            extra = sorted(set(p) - {"strategy", "degree", "stage_layers"})
            if extra:
                ck.fail("parallelism", f"parallelism has unknown key(s) {extra}")
            strategy = ck.string(p, "strategy", required=True, choices=STRATEGIES)
            degree = ck.integer(p, "degree", required=True, minimum=1)
            stages = p.get("stage_layers")
            if stages is not None:
                if not isinstance(stages, list) or any(isinstance(x, bool) or not isinstance(x, int) or x < 0 for x in stages):
                    ck.fail("parallelism.stage_layers", "stage_layers must be a list of non-negative integers")
                    stages = None
                else:
                    stages = tuple(stages)
            if strategy == "PP" and degree is not None:
                if stages is None:
                    ck.fail("parallelism.stage_layers", "PP runs must list stage_layers")
                elif len(stages) != degree:
                    ck.fail("parallelism.stage_layers", f"stage_layers has {len(stages)} entries but degree is {degree}")
            if strategy is not None and degree is not None:
                par = Parallelism(strategy, degree, stages)
    mem = ck.count_map(d, "memory_bytes", MEMORY_KINDS)
    meta = dict(
        achieved_tflops=ck.number(d, "achieved_tflops"),
        system_throughput=ck.number(d, "system_throughput"),
        throughput_unit_in_source=ck.string(d, "throughput_unit_in_source", choices=THROUGHPUT_UNITS) or "tokens/s",
        provenance=ck.string(d, "provenance", choices=PROVENANCE) or "runtime",
        li_granularity=ck.string(d, "li_granularity"),
        arithmetic_intensity=ck.number(d, "arithmetic_intensity"),
        memory_bytes=mem,
        compute_utilization=ck.number(d, "compute_utilization", maximum=1.0),
        comm_overhead=ck.number(d, "comm_overhead"),
        notes=ck.string(d, "notes"),
    )
    if ck.bad:
        return None
    return RunMetadata(platform=platform, precision=precision, workload=workload, parallelism=par, **meta)


def _task(d: dict, ck: _Checker) -> TaskRecord | None:
    ck.unknown(d, _TASK_FIELDS)
    task_id = ck.string(d, "task_id", required=True)
    kind = ck.string(d, "kind", required=True, choices=TASK_KINDS)
    units = ck.count_map(d, "units", RESOURCE_KINDS, required=True)
    throughput = ck.number(d, "throughput")
    runtime = ck.number(d, "runtime_s")
    mem = ck.count_map(d, "memory_bytes", MEMORY_KINDS)
    if ck.bad:
        return None
    return TaskRecord(task_id, kind, units, throughput, runtime, mem)


def _section(d: dict, ck: _Checker) -> SectionRecord | None:
    ck.unknown(d, _SECTION_FIELDS)
    sid = ck.integer(d, "section_id", required=True)
    runtime = ck.number(d, "runtime_s", required=True)
    units = ck.count_map(d, "units", RESOURCE_KINDS, required=True)
    inv = ck.integer(d, "invocations", minimum=1)
    li = ck.number(d, "li", minimum=0.0, strict=True, maximum=1.0)
    if ck.bad:
        return None
    return SectionRecord(sid, runtime, units, 1 if inv is None else inv, li)


def parse_trace(source) -> TraceSet:
    """Parse trace text (str or bytes); raise TraceError listing every problem."""
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TraceError([{"line": None, "message": f"trace is not valid UTF-8: {exc}"}]) from None
    issues: list = []
    meta = None
    tasks, sections = [], []
    seen_tasks, seen_sections = {}, {}
    # JSONL is split on \n alone; splitlines() would also break on U+2028 and friends
    lines = [ln.rstrip("\r") for ln in source.split("\n")]
    first = True
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            d = json.loads(raw)
        except json.JSONDecodeError as exc:
            issues.append({"line": lineno, "column": exc.colno, "message": f"syntax error: {exc.msg}"})
            first = False
            continue
        ck = _Checker(lineno, issues)
        if not isinstance(d, dict):
            ck.fail(None, "record must be a JSON object")
            first = False
            continue
        rec = d.get("record")
        if first:
            first = False
            if rec != "metadata":
                ck.fail("record", "line 1 must be the metadata record")
                continue
            meta = _metadata(d, ck)
            continue
        if rec == "task":
            t = _task(d, ck)
            if t is not None:
                if t.task_id in seen_tasks:
                    ck.fail("task_id", f"duplicate task_id {t.task_id!r} (first on line {seen_tasks[t.task_id]})")
                else:
                    seen_tasks[t.task_id] = lineno
                    tasks.append(t)
        elif rec == "section":
            s = _section(d, ck)
            if s is not None:
                if s.section_id in seen_sections:
                    ck.fail("section_id", f"duplicate section_id {s.section_id} (first on line {seen_sections[s.section_id]})")
                else:
                    seen_sections[s.section_id] = lineno
                    sections.append(s)
        elif rec == "metadata":
            ck.fail("record", "only line 1 may be a metadata record")
        else:
            ck.fail("record", f"unknown record type {rec!r}")
    if first:
        issues.append({"line": None, "message": "empty trace: no metadata record"})
    if not issues and not tasks and not sections:
        issues.append({"line": None, "message": "trace has no task or section records"})
    if issues:
        raise TraceError(issues)
    return TraceSet(meta, tuple(tasks), tuple(sections))


# -- canonical emission ---------------------------------------------------------


def _ordered(d: dict, keys) -> dict:
    return {k: d[k] for k in keys if k in d and d[k] is not None}


def metadata_dict(m: RunMetadata) -> dict:
    par = {"strategy": m.parallelism.strategy, "degree": m.parallelism.degree}
    if m.parallelism.stage_layers is not None:
        par["stage_layers"] = list(m.parallelism.stage_layers)
    d = {
        "record": "metadata",
        "schema_version": SCHEMA_VERSION,
        "platform": m.platform,
        "precision": m.precision,
        "workload": m.workload.to_dict() if m.workload is not None else None,
        "parallelism": par,
        "achieved_tflops": m.achieved_tflops,
        "system_throughput": m.system_throughput,
        "throughput_unit_in_source": m.throughput_unit_in_source,
        "provenance": m.provenance,
        "li_granularity": m.li_granularity,
        "arithmetic_intensity": m.arithmetic_intensity,
        "memory_bytes": _ordered(m.memory_bytes, MEMORY_KINDS) if m.memory_bytes is not None else None,
        "compute_utilization": m.compute_utilization,
        "comm_overhead": m.comm_overhead,
        "notes": m.notes,
    }
    return {k: v for k, v in d.items() if v is not None}


def task_dict(t: TaskRecord) -> dict:
    d = {
        "record": "task",
        "task_id": t.task_id,
        "kind": t.kind,
        "units": _ordered(t.units, RESOURCE_KINDS),
        "throughput": t.throughput,
        "runtime_s": t.runtime_s,
        "memory_bytes": _ordered(t.memory_bytes, MEMORY_KINDS) if t.memory_bytes is not None else None,
    }
    return {k: v for k, v in d.items() if v is not None}


def section_dict(s: SectionRecord) -> dict:
    d = {
        "record": "section",
        "section_id": s.section_id,
        "runtime_s": s.runtime_s,
        "units": _ordered(s.units, RESOURCE_KINDS),
        "invocations": s.invocations,
        "li": s.li,
    }
    return {k: v for k, v in d.items() if v is not None}


def _line(d: dict) -> str:
    return json.dumps(d, ensure_ascii=False, separators=(", ", ": "), allow_nan=False)


def emit_trace(ts: TraceSet) -> str:
    out = [_line(metadata_dict(ts.metadata))]
    out += [_line(task_dict(t)) for t in ts.tasks]
    out += [_line(section_dict(s)) for s in ts.sections]
    return "\n".join(out) + "\n"


def read_trace(path) -> TraceSet:
    with open(path, "rb") as fh:
        return parse_trace(fh.read())
