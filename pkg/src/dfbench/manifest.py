"""Run manifests: which workload, hardware and traces a report covers."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ValidationError
from .hardware import HardwareSpec, Registry, get_preset, load_spec, load_yaml, spec_from_mapping
from .tier2 import DEFAULT_THETA, SWEEP_KINDS
from .workload import DEFAULT_BYTES_PER_PARAM, DEFAULT_C_ACT, ModelConfig

MANIFEST_FIELDS = ("schema_version", "workload", "hardware", "traces", "options", "sweeps", "notes")
TRACE_SOURCES = ("measured", "fixture", "synthetic")
OPTION_FIELDS = ("theta", "li_granularity", "c_act", "bytes_per_param", "attention_scores", "pp_devices", "pp_pin_embedding", "precision")


@dataclass(frozen=True)
class TraceRef:
    path: str
    role: str
    notes: str | None = None
    source: str = "measured"

    @property
    def sweep(self) -> str | None:
        return self.role.split(":", 1)[1] if self.role.startswith("sweep:") else None


@dataclass(frozen=True)
class Options:
    theta: float = DEFAULT_THETA
    li_granularity: str | None = None
    c_act: float = DEFAULT_C_ACT
    bytes_per_param: float = DEFAULT_BYTES_PER_PARAM
    attention_scores: bool = False
    pp_devices: int | None = None
    pp_pin_embedding: bool = True
    precision: str | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in OPTION_FIELDS}


@dataclass(frozen=True)
class RunManifest:
    workload: ModelConfig | None
    hardware: tuple
    traces: tuple
    options: Options = Options()
    sweeps: dict = field(default_factory=dict)
    base_dir: str = "."
    path: str | None = None

    def resolve(self, p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    def registry(self) -> Registry:
        return Registry(self.hardware)


def _options(d) -> Options:
    if d is None:
        return Options()
    if not isinstance(d, dict):
        raise ValidationError("options must be a mapping", field="options")
    unknown = sorted(set(d) - set(OPTION_FIELDS))
    if unknown:
        raise ValidationError(f"unknown option(s): {', '.join(unknown)}", field=f"options.{unknown[0]}")
    o = Options(**d)
    if not isinstance(o.theta, (int, float)) or isinstance(o.theta, bool) or not 0 < o.theta < 1:
        raise ValidationError("options.theta must lie in (0, 1)", field="options.theta")
    if not isinstance(o.c_act, (int, float)) or isinstance(o.c_act, bool) or o.c_act < 0:
        raise ValidationError("options.c_act must be non-negative", field="options.c_act")
    if not isinstance(o.bytes_per_param, (int, float)) or isinstance(o.bytes_per_param, bool) or o.bytes_per_param <= 0:
        raise ValidationError("options.bytes_per_param must be positive", field="options.bytes_per_param")
    if not isinstance(o.attention_scores, bool):
        raise ValidationError("options.attention_scores must be a boolean", field="options.attention_scores")
    if not isinstance(o.pp_pin_embedding, bool):
        raise ValidationError("options.pp_pin_embedding must be a boolean", field="options.pp_pin_embedding")
    if o.pp_devices is not None and (isinstance(o.pp_devices, bool) or not isinstance(o.pp_devices, int) or o.pp_devices < 1):
        raise ValidationError("options.pp_devices must be a positive integer", field="options.pp_devices")
    return o


def _hardware(entry, base_dir) -> list:
    if entry is None:
        return []
    items = entry if isinstance(entry, list) else [entry]
    specs = []
    for item in items:
        if isinstance(item, dict):
            specs.append(spec_from_mapping(item))
        elif isinstance(item, str):
            specs.append(resolve_spec(item, base_dir))
        else:
            raise ValidationError("hardware entries must be preset names, spec paths or inline mappings", field="hardware")
    return specs


def resolve_spec(name_or_path: str, base_dir: str = ".") -> HardwareSpec:
    """A preset name, or a path to a spec file."""
    candidate = name_or_path if os.path.isabs(name_or_path) else os.path.join(base_dir, name_or_path)
    if os.path.isfile(candidate):
        with open(candidate, "rb") as fh:
            return load_spec(fh.read())
    if os.sep in name_or_path or name_or_path.endswith((".yaml", ".yml", ".spec")):
        raise FileNotFoundError(f"hardware spec file not found: {name_or_path}")
    return get_preset(name_or_path)


def manifest_from_mapping(data, base_dir: str = ".", path: str | None = None) -> RunManifest:
    if not isinstance(data, dict):
        raise ValidationError("manifest must be a mapping")
    unknown = sorted(set(data) - set(MANIFEST_FIELDS))
    if unknown:
        raise ValidationError(f"unknown manifest field(s): {', '.join(unknown)}", field=unknown[0])
    if data.get("schema_version", 1) != 1:
        raise ValidationError(f"unsupported manifest schema_version {data.get('schema_version')!r}", field="schema_version")
    workload = ModelConfig.from_dict(data["workload"]) if data.get("workload") is not None else None
    traces = data.get("traces")
    if not traces:
        raise ValidationError("manifest lists no traces", field="traces")
    if not isinstance(traces, list):
        raise ValidationError("traces must be a list", field="traces")
    refs = []
    for i, t in enumerate(traces):
        if isinstance(t, str):
            t = {"path": t, "role": "tier1"}
        if not isinstance(t, dict) or "path" not in t:
            raise ValidationError(f"traces[{i}] needs a path", field=f"traces[{i}].path")
        extra = sorted(set(t) - {"path", "role", "notes", "source"})
        if extra:
            raise ValidationError(f"traces[{i}] has unknown field(s) {extra}", field=f"traces[{i}]")
        role = t.get("role", "tier1")
        if role != "tier1" and not (isinstance(role, str) and role.startswith("sweep:") and len(role) > 6):
            raise ValidationError(f"traces[{i}].role must be 'tier1' or 'sweep:<name>', got {role!r}", field=f"traces[{i}].role")
        source = t.get("source", "measured")
        if source not in TRACE_SOURCES:
            raise ValidationError(f"traces[{i}].source must be one of {TRACE_SOURCES}", field=f"traces[{i}].source")
        refs.append(TraceRef(str(t["path"]), role, t.get("notes"), source))
    sweeps = data.get("sweeps") or {}
    if not isinstance(sweeps, dict):
        raise ValidationError("sweeps must be a mapping", field="sweeps")
    for name, cfg in sweeps.items():
        if not isinstance(cfg, dict) or set(cfg) - {"kind", "notes"}:
            raise ValidationError(f"sweeps.{name} may only set kind and notes", field=f"sweeps.{name}")
        if cfg.get("kind") is not None and cfg["kind"] not in SWEEP_KINDS:
            raise ValidationError(f"sweeps.{name}.kind must be one of {SWEEP_KINDS}", field=f"sweeps.{name}.kind")
    return RunManifest(
        workload=workload,
        hardware=tuple(_hardware(data.get("hardware"), base_dir)),
        traces=tuple(refs),
        options=_options(data.get("options")),
        sweeps=dict(sweeps),
        base_dir=base_dir,
        path=path,
    )


def load_manifest(path: str) -> RunManifest:
    with open(path, "rb") as fh:
        data = load_yaml(fh.read(), "manifest")
    return manifest_from_mapping(data, os.path.dirname(os.path.abspath(path)), path)
