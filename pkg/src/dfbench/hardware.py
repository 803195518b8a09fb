"""Per-chip hardware descriptions and roofline construction."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .errors import DomainError, ParseError, ValidationError
from .units import parse_quantity

RESOURCE_KINDS = ("PE", "PCU", "PMU", "tile")
COMPUTE_BOUND = "compute-bound"
MEMORY_BOUND = "memory-bound"


@dataclass(frozen=True)
class HardwareSpec:
    name: str
    resource_totals: dict
    onchip_memory_bytes: int
    global_bw_bytes_per_s: float | None
    peak_flops_per_s: dict
    shared_bw_bytes_per_s: float | None = None
    devices_per_node: int = 1
    notes: str = ""

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValidationError("name must be a non-empty string", field="name")
        if not isinstance(self.resource_totals, dict) or not self.resource_totals:
            raise ValidationError("resource_totals must be a non-empty mapping", field="resource_totals")
        totals = {}
        for kind in RESOURCE_KINDS:
            if kind in self.resource_totals:
                n = self.resource_totals[kind]
                if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                    raise ValidationError(f"resource_totals.{kind} must be an integer >= 1", field=f"resource_totals.{kind}")
                totals[kind] = n
        unknown = set(self.resource_totals) - set(RESOURCE_KINDS)
        if unknown:
            raise ValidationError(
                f"unknown resource kind(s) {sorted(unknown)}; expected {RESOURCE_KINDS}",
                field="resource_totals",
            )
        object.__setattr__(self, "resource_totals", totals)
        if isinstance(self.onchip_memory_bytes, bool) or not isinstance(self.onchip_memory_bytes, int) or self.onchip_memory_bytes < 0:
            raise ValidationError("onchip_memory_bytes must be a non-negative integer", field="onchip_memory_bytes")
        if self.global_bw_bytes_per_s is not None:
            if not _is_number(self.global_bw_bytes_per_s) or self.global_bw_bytes_per_s <= 0:
                raise ValidationError("global_bw_bytes_per_s must be positive", field="global_bw_bytes_per_s")
            object.__setattr__(self, "global_bw_bytes_per_s", float(self.global_bw_bytes_per_s))
        if self.shared_bw_bytes_per_s is not None:
            if not _is_number(self.shared_bw_bytes_per_s) or self.shared_bw_bytes_per_s < 0:
                raise ValidationError("shared_bw_bytes_per_s must be non-negative", field="shared_bw_bytes_per_s")
            object.__setattr__(self, "shared_bw_bytes_per_s", float(self.shared_bw_bytes_per_s))
        if not isinstance(self.peak_flops_per_s, dict) or not self.peak_flops_per_s:
            raise ValidationError("peak_flops_per_s must be a non-empty mapping", field="peak_flops_per_s")
        peaks = {}
        for label in sorted(self.peak_flops_per_s):
            v = self.peak_flops_per_s[label]
            if not _is_number(v) or v <= 0:
                raise ValidationError(f"peak_flops_per_s.{label} must be positive", field=f"peak_flops_per_s.{label}")
            peaks[str(label)] = float(v)
        object.__setattr__(self, "peak_flops_per_s", peaks)
        if isinstance(self.devices_per_node, bool) or not isinstance(self.devices_per_node, int) or self.devices_per_node < 1:
            raise ValidationError("devices_per_node must be an integer >= 1", field="devices_per_node")

    def peak(self, precision: str) -> float:
        try:
            return self.peak_flops_per_s[precision]
        except KeyError:
            raise ValidationError(
                f"{self.name} has no peak for precision {precision!r}; known: {sorted(self.peak_flops_per_s)}",
                field="precision",
            ) from None

    def bandwidth(self) -> float:
        if self.global_bw_bytes_per_s is None:
            raise ValidationError(
                f"{self.name} has no global memory bandwidth; supply global_bw_bytes_per_s in a spec file",
                field="global_bw_bytes_per_s",
            )
        return self.global_bw_bytes_per_s

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: d[k] for k in SPEC_FIELDS if d[k] is not None}


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


@dataclass(frozen=True)
class RooflinePoint:
    ai: float
    attainable_flops: float
    regime: str
    achieved_flops: float | None = None
    label: str = ""


def ridge_point(spec: HardwareSpec, precision: str) -> float:
    return spec.peak(precision) / spec.bandwidth()


def attainable(spec: HardwareSpec, precision: str, ai: float, achieved_flops: float | None = None, label: str = "") -> RooflinePoint:
    """Place ``ai`` on the global-memory roofline; ties at the ridge are compute-bound."""
    if ai < 0:
        raise DomainError("arithmetic intensity must be non-negative")
    peak = spec.peak(precision)
    bw = spec.bandwidth()
    if ai >= peak / bw:
        return RooflinePoint(float(ai), peak, COMPUTE_BOUND, achieved_flops, label)
    return RooflinePoint(float(ai), min(peak, ai * bw), MEMORY_BOUND, achieved_flops, label)


# -- spec files ---------------------------------------------------------------

SPEC_FIELDS = (
    "name",
    "resource_totals",
    "onchip_memory_bytes",
    "shared_bw_bytes_per_s",
    "global_bw_bytes_per_s",
    "peak_flops_per_s",
    "devices_per_node",
    "notes",
)
_REQUIRED = ("name", "resource_totals", "global_bw_bytes_per_s", "peak_flops_per_s")


def load_yaml(source, what: str = "document"):
    """Parse the structured-text config format, mapping errors to ParseError."""
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"{what} is not valid UTF-8: {exc}") from None
    try:
        return yaml.safe_load(source)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ParseError(f"malformed {what}: {exc.problem or exc}", line, col) from None
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed {what}: {exc}") from None


def spec_from_mapping(data) -> HardwareSpec:
    if not isinstance(data, dict):
        raise ValidationError("hardware spec must be a mapping")
    unknown = sorted(set(data) - set(SPEC_FIELDS))
    if unknown:
        raise ValidationError(f"unknown hardware spec field(s): {', '.join(unknown)}", field=unknown[0])
    for f in _REQUIRED:
        if data.get(f) is None:
            raise ValidationError(f"hardware spec is missing required field {f}", field=f)
    peaks = data["peak_flops_per_s"]
    if not isinstance(peaks, dict):
        raise ValidationError("peak_flops_per_s must be a mapping of precision to FLOP/s", field="peak_flops_per_s")
    totals = data["resource_totals"]
    if not isinstance(totals, dict):
        raise ValidationError("resource_totals must be a mapping", field="resource_totals")

    def q(name, dim):
        v = data.get(name)
        return None if v is None else parse_quantity(v, dim, field=name)

    onchip = q("onchip_memory_bytes", "bytes")
    if isinstance(onchip, float):
        if not onchip.is_integer():
            raise ValidationError("onchip_memory_bytes must be a whole number of bytes", field="onchip_memory_bytes")
        onchip = int(onchip)
    return HardwareSpec(
        name=data["name"],
        resource_totals=dict(totals),
        onchip_memory_bytes=0 if onchip is None else onchip,
        global_bw_bytes_per_s=q("global_bw_bytes_per_s", "bandwidth"),
        shared_bw_bytes_per_s=q("shared_bw_bytes_per_s", "bandwidth"),
        peak_flops_per_s={str(k): parse_quantity(v, "flops", field=f"peak_flops_per_s.{k}") for k, v in peaks.items()},
        devices_per_node=data.get("devices_per_node", 1),
        notes=data.get("notes", "") or "",
    )


def load_spec(source) -> HardwareSpec:
    """Parse a hardware spec file (str or bytes)."""
    return spec_from_mapping(load_yaml(source, "hardware spec"))


def emit_spec(spec: HardwareSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=False, allow_unicode=True)


# -- presets ------------------------------------------------------------------

PRESETS = {
    "wse2": HardwareSpec(
        name="wse2",
        resource_totals={"PE": 850_000},
        onchip_memory_bytes=40 * 2**30,
        shared_bw_bytes_per_s=20e15,
        global_bw_bytes_per_s=20e15,
        peak_flops_per_s={"fp16": 1.69e15},
        devices_per_node=1,
        notes=(
            "850,000 PEs, 40 GB on-chip SRAM, 20 PB/s memory bandwidth (vendor datasheet). "
            "peak fp16 derived: 338 TFLOP/s achieved at ~20% efficiency -> 1.69 PFLOP/s."
        ),
    ),
    "sn30-rdu": HardwareSpec(
        name="sn30-rdu",
        resource_totals={"PCU": 640, "PMU": 640},
        onchip_memory_bytes=0,
        global_bw_bytes_per_s=0.2e12,
        peak_flops_per_s={"bf16": 2.782e14},
        devices_per_node=2,
        notes=(
            "4 tiles x 160 PCUs and 160 PMUs per RDU; 2 RDUs per SN30 node; 0.2 TB/s DDR bandwidth. "
            "PMU capacity not published (onchip_memory_bytes=0). "
            "peak bf16 derived: 50.64 TFLOP/s achieved at 18.2% efficiency -> 278.2 TFLOP/s."
        ),
    ),
    "bow2000-ipu": HardwareSpec(
        name="bow2000-ipu",
        resource_totals={"tile": 1472},
        onchip_memory_bytes=1472 * 64 * 2**10,
        global_bw_bytes_per_s=None,
        peak_flops_per_s={"fp16": 143e12 / 0.41},
        devices_per_node=4,
        notes=(
            "1,472 tiles per IPU with 64 KB each; 4 IPUs per Bow-2000 sharing 256 GB DDR. "
            "DDR bandwidth not published: supply global_bw_bytes_per_s for roofline use. "
            "peak fp16 derived: 143 TFLOP/s achieved at 41% efficiency."
        ),
    ),
}


def get_preset(name: str) -> HardwareSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown hardware preset {name!r}; known: {sorted(PRESETS)}", field="hardware") from None


class Registry:
    """Name -> HardwareSpec lookup seeded with the builtin presets."""

    def __init__(self, specs=()):
        self._specs = dict(PRESETS)
        for s in specs:
            self.add(s)

    def add(self, spec: HardwareSpec) -> None:
        self._specs[spec.name] = spec

    def get(self, name: str) -> HardwareSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise ValidationError(f"unknown platform {name!r}; known: {sorted(self._specs)}", field="platform") from None

    def __contains__(self, name) -> bool:
        return name in self._specs

    def names(self):
        return sorted(self._specs)
