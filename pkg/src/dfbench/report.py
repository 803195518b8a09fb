"""Report assembly: structured JSON first, Markdown rendered as a projection of it."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import os
import re
import tempfile

from . import __version__
from .errors import TraceError, ValidationError
from .hardware import HardwareSpec, RooflinePoint, attainable, ridge_point
from .manifest import RunManifest
from .svgplot import roofline_svg
from .tier1 import METRICS as TIER1_METRICS
from .tier1 import analyze
from .tier2 import SweepRun, analyze_sweep, pp_assign
from .trace import TraceSet, read_trace
from .workload import profile as workload_profile

TIER2_METRICS = (
    "scaling_efficiency",
    "weight_streaming_penalty",
    "tp_degradation",
    "pp_system_throughput",
    "pp_assign",
    "batch_knee",
    "precision_gain",
)

_KIND_METRICS = {
    "dp": ("scaling_efficiency",),
    "streaming": ("weight_streaming_penalty",),
    "tp": ("tp_degradation",),
    "pp": ("pp_system_throughput",),
    "batch": ("batch_knee",),
    "precision": ("precision_gain",),
}


def num(x) -> str:
    """Shortest round-trip text for a JSON scalar."""
    return json.dumps(x, allow_nan=False)


def nc(reason: str) -> dict:
    return {"not_computable": reason}


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_atomic(path: str, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partial output."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


# -- loading ---------------------------------------------------------------------


@dataclasses.dataclass
class LoadedTrace:
    ref: object
    trace: TraceSet
    digest: str


def load_traces(manifest: RunManifest, role_filter=None) -> list:
    out = []
    cache = {}
    for ref in manifest.traces:
        if role_filter is not None and not role_filter(ref):
            continue
        full = manifest.resolve(ref.path)
        if full not in cache:
            try:
                cache[full] = (read_trace(full), sha256_file(full))
            except TraceError as exc:
                raise TraceError([{"path": ref.path, **i} for i in exc.issues]) from None
        trace, digest = cache[full]
        out.append(LoadedTrace(ref, trace, digest))
    return out


def _spec_for(manifest: RunManifest, platform: str, override: HardwareSpec | None) -> HardwareSpec:
    if override is not None and override.name == platform:
        return override
    return manifest.registry().get(platform)


# -- sections --------------------------------------------------------------------


def workload_section(manifest: RunManifest) -> dict:
    if manifest.workload is None:
        return nc("missing workload")
    o = manifest.options
    prof = workload_profile(manifest.workload, o.c_act, o.attention_scores, o.bytes_per_param)
    return {
        "config": manifest.workload.to_dict(),
        "param_count": prof.param_count,
        "training_flops": prof.flops_per_step,
        "weight_traffic_bytes": prof.weight_traffic_bytes,
        "activation_bytes": prof.activation_bytes,
        "arithmetic_intensity": prof.arithmetic_intensity,
        "c_act": prof.c_act,
        "attention_scores": prof.attention_scores,
        "bytes_per_param": prof.bytes_per_param,
        "formulas": dict(prof.formulas),
    }


def _per_kind(values: dict, reasons) -> dict:
    if isinstance(reasons, str):
        return nc(reasons)
    out = dict(values)
    for k, why in (reasons or {}).items():
        out[k] = nc(why)
    return out if out else nc("missing units")


def _roofline_dict(p: RooflinePoint, spec: HardwareSpec, precision: str, source: str) -> dict:
    return {
        "ai": p.ai,
        "ai_source": source,
        "attainable_flops": p.attainable_flops,
        "achieved_flops": p.achieved_flops,
        "regime": p.regime,
        "ridge_point": ridge_point(spec, precision),
    }


def tier1_entry(lt: LoadedTrace, manifest: RunManifest, spec_override=None) -> dict:
    meta = lt.trace.metadata
    spec = _spec_for(manifest, meta.platform, spec_override)
    prof = None
    cfg = meta.workload or manifest.workload
    if cfg is not None:
        o = manifest.options
        prof = workload_profile(cfg, o.c_act, o.attention_scores, o.bytes_per_param)
    rep = analyze(lt.trace, spec, prof)
    why = rep.not_computable
    metrics = {
        "allocation_ratio": _per_kind(rep.allocation_ratio, why.get("allocation_ratio")),
        "weighted_allocation": _per_kind(rep.weighted_allocation, why.get("weighted_allocation")),
        "load_imbalance": _per_kind(rep.load_imbalance, why.get("load_imbalance")),
        "weighted_li": rep.weighted_li if rep.weighted_li is not None else nc(why["weighted_li"]),
        "memory_fractions": (
            dataclasses.asdict(rep.memory_fractions) if rep.memory_fractions is not None else nc(why["memory_fractions"])
        ),
        "compute_efficiency": (
            rep.compute_efficiency if rep.compute_efficiency is not None else nc(why["compute_efficiency"])
        ),
        "roofline": (
            _roofline_dict(rep.roofline, spec, meta.precision, rep.provenance.get("roofline_ai", "ingested"))
            if rep.roofline is not None
            else nc(why["roofline"])
        ),
    }
    return {
        "trace": lt.ref.path,
        "source": lt.ref.source,
        "platform": meta.platform,
        "precision": meta.precision,
        "provenance": meta.provenance,
        "li_granularity": manifest.options.li_granularity or meta.li_granularity,
        "compute_utilization": meta.compute_utilization,
        "metrics": metrics,
        "metric_provenance": {m: (lt.ref.source if lt.ref.source == "fixture" else meta.provenance) for m in TIER1_METRICS},
        "warnings": list(rep.warnings),
    }


def _stem(path: str) -> str:
    base = os.path.basename(path)
    return base[: -len(".jsonl")] if base.endswith(".jsonl") else os.path.splitext(base)[0]


def _jsonable(v):
    if dataclasses.is_dataclass(v):
        return {k: _jsonable(x) for k, x in dataclasses.asdict(v).items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def sweep_entry(name: str, members: list, manifest: RunManifest, spec_override=None) -> dict:
    cfg = manifest.sweeps.get(name) or {}
    platforms = sorted({m.trace.metadata.platform for m in members})
    entry = {"name": name, "kind": cfg.get("kind"), "platforms": platforms, "runs": []}
    runs = []
    missing = []
    for m in members:
        meta = m.trace.metadata
        wl = meta.workload or manifest.workload
        tps = meta.system_tokens_per_s(manifest.workload)
        row = {
            "label": _stem(m.ref.path),
            "trace": m.ref.path,
            "platform": meta.platform,
            "strategy": meta.parallelism.strategy,
            "degree": meta.parallelism.degree,
            "precision": meta.precision,
            "batch_size": wl.batch_size if wl is not None else None,
            "system_throughput": meta.system_throughput,
            "throughput_unit_in_source": meta.throughput_unit_in_source,
            "tokens_per_s": tps,
        }
        if meta.parallelism.stage_layers is not None:
            row["stage_layers"] = list(meta.parallelism.stage_layers)
        entry["runs"].append(row)
        if tps is None:
            missing.append(row["label"])
            continue
        runs.append(SweepRun(
            label=row["label"], strategy=meta.parallelism.strategy, degree=meta.parallelism.degree,
            throughput=tps, precision=meta.precision, batch_size=row["batch_size"],
            stage_layers=meta.parallelism.stage_layers, comm_overhead=meta.comm_overhead, platform=meta.platform,
        ))
    if missing:
        entry["not_computable"] = f"missing system_throughput in {', '.join(missing)}"
        return entry
    dpn = _spec_for(manifest, platforms[0], spec_override).devices_per_node
    res = analyze_sweep(runs, cfg.get("kind"), manifest.options.theta, dpn)
    entry["kind"] = res.kind
    if len(platforms) == 1:
        entry["devices_per_node"] = dpn
    if res.not_computable:
        entry["not_computable"] = res.not_computable
        for metric in _KIND_METRICS.get(res.kind, TIER2_METRICS):
            entry.setdefault("metrics", {})[metric] = nc(res.not_computable)
    else:
        entry["metrics"] = _jsonable(res.values)
    return entry


def pp_plan_section(manifest: RunManifest, sweeps: list) -> dict:
    o = manifest.options
    devices = o.pp_devices
    origin = "options.pp_devices"
    if devices is None:
        pp_degrees = [r["degree"] for s in sweeps if s.get("kind") == "pp" for r in s["runs"]]
        if pp_degrees:
            devices, origin = max(pp_degrees), "largest PP degree in sweeps"
    if devices is None:
        return nc("missing pp_devices")
    if manifest.workload is None:
        return nc("missing workload")
    plan = pp_assign(manifest.workload.num_layers, devices, o.pp_pin_embedding)
    return {
        "devices": devices,
        "devices_from": origin,
        "total_layers": manifest.workload.num_layers,
        "stage_layers": list(plan.stage_layers),
        "embedding_stage": plan.embedding_stage,
        "max_stage_load": plan.max_stage_load,
        "bottleneck_stage": plan.bottleneck_stage,
        "predicted_relative_throughput": plan.predicted_relative_throughput,
    }


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def roofline_groups(manifest: RunManifest, tier1: list, spec_override=None) -> list:
    groups = {}
    for e in tier1:
        groups.setdefault((e["platform"], e["precision"]), []).append(e)
    out = []
    for (platform, precision), entries in sorted(groups.items()):
        spec = _spec_for(manifest, platform, spec_override)
        g = {"platform": platform, "precision": precision}
        if spec.global_bw_bytes_per_s is None:
            g.update(nc("missing global_bw_bytes_per_s"))
        elif precision not in spec.peak_flops_per_s:
            g.update(nc(f"missing peak for precision {precision}"))
        else:
            g["peak_flops"] = spec.peak(precision)
            g["bandwidth"] = spec.bandwidth()
            g["ridge_point"] = ridge_point(spec, precision)
            g["points"] = [
                {"label": _stem(e["trace"]), **{k: e["metrics"]["roofline"][k] for k in ("ai", "attainable_flops", "achieved_flops", "regime")}}
                for e in entries if "not_computable" not in e["metrics"]["roofline"]
            ]
            g["files"] = [f"roofline_{_safe(platform)}_{_safe(precision)}.csv", f"roofline_{_safe(platform)}_{_safe(precision)}.svg"]
        out.append(g)
    return out


# -- roofline artifacts ------------------------------------------------------------


def roofline_points(spec: HardwareSpec, precision: str, ais=(), labelled=()) -> list:
    """Points for bare AI values plus ``(label, ai, achieved_flops)`` triples."""
    pts = [attainable(spec, precision, float(a), None, f"ai={float(a)!r}") for a in ais]
    pts += [attainable(spec, precision, float(a), ach, lab) for lab, a, ach in labelled]
    return pts


def points_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ai", "attainable", "achieved", "regime", "label"])
    for p in points:
        w.writerow([repr(p.ai), repr(p.attainable_flops), "" if p.achieved_flops is None else repr(p.achieved_flops), p.regime, p.label])
    return buf.getvalue()


def write_roofline(out_dir: str, spec: HardwareSpec, precision: str, points) -> list:
    """Write the CSV and SVG pair; raises if the hardware lacks a bandwidth."""
    peak, bw = spec.peak(precision), spec.bandwidth()
    stem = f"roofline_{_safe(spec.name)}_{_safe(precision)}"
    csv_path = os.path.join(out_dir, stem + ".csv")
    svg_path = os.path.join(out_dir, stem + ".svg")
    write_atomic(csv_path, points_csv(points))
    write_atomic(svg_path, roofline_svg(f"{spec.name} roofline ({precision})", peak, bw, points))
    return [csv_path, svg_path]


# -- top level ---------------------------------------------------------------------


def _inputs(manifest: RunManifest, loaded: list) -> list:
    seen = []
    if manifest.path is not None:
        seen.append({"path": os.path.basename(manifest.path), "role": "manifest", "sha256": sha256_file(manifest.path)})
    for lt in loaded:
        seen.append({"path": lt.ref.path, "role": lt.ref.role, "sha256": lt.digest})
    return seen


def build_report(manifest: RunManifest, parts=("tier1", "tier2"), spec_override: HardwareSpec | None = None) -> dict:
    want_t1 = "tier1" in parts
    want_t2 = "tier2" in parts
    loaded = load_traces(
        manifest,
        lambda r: (want_t1 and r.role == "tier1") or (want_t2 and r.sweep is not None),
    )
    report = {
        "tool": {"name": "dfbench", "version": __version__},
        "inputs": _inputs(manifest, loaded),
        "options": manifest.options.to_dict(),
        "workload": workload_section(manifest),
        "metric_names": {"tier1": list(TIER1_METRICS) if want_t1 else [], "tier2": list(TIER2_METRICS) if want_t2 else []},
    }
    if want_t1:
        t1 = [tier1_entry(lt, manifest, spec_override) for lt in loaded if lt.ref.role == "tier1"]
        if not t1:
            raise ValidationError("manifest has no tier1 traces", field="traces")
        report["tier1"] = t1
        report["roofline"] = roofline_groups(manifest, t1, spec_override)
    if want_t2:
        groups = {}
        for lt in loaded:
            if lt.ref.sweep is not None:
                groups.setdefault(lt.ref.sweep, []).append(lt)
        if not groups:
            raise ValidationError("manifest has no sweep traces", field="traces")
        sweeps = [sweep_entry(name, groups[name], manifest, spec_override) for name in sorted(groups)]
        report["tier2"] = {"sweeps": sweeps, "pp_assign": pp_plan_section(manifest, sweeps)}
    return report


def write_roofline_artifacts(out_dir: str, manifest: RunManifest, report: dict, spec_override=None) -> list:
    paths = []
    for g in report.get("roofline", []):
        if "not_computable" in g:
            continue
        spec = _spec_for(manifest, g["platform"], spec_override)
        pts = [RooflinePoint(p["ai"], p["attainable_flops"], p["regime"], p["achieved_flops"], p["label"]) for p in g["points"]]
        paths += write_roofline(out_dir, spec, g["precision"], pts)
    return paths


# -- markdown ------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, dict) and set(v) == {"not_computable"}:
        return f"not computable: {v['not_computable']}"
    if v is None:
        return "n/a"
    if isinstance(v, str):
        return v.replace("|", "\\|")
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_cell(x) for x in v) + "]"
    if isinstance(v, dict):
        return ", ".join(f"{k}={_cell(x)}" for k, x in v.items())
    return num(v)


def _table(header, rows) -> list:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(_cell(c) for c in r) + " |" for r in rows]
    return out + [""]


def _metric_rows(metrics: dict) -> list:
    rows = []
    for name, v in metrics.items():
        if isinstance(v, dict) and "not_computable" not in v and name in ("allocation_ratio", "weighted_allocation", "load_imbalance"):
            rows += [[name, kind, x] for kind, x in v.items()]
        else:
            rows.append([name, "", v])
    return rows


def _sweep_md(s: dict) -> list:
    out = [f"### sweep {s['name']} ({s['kind'] or 'unclassified'})", ""]
    out += _table(
        ["run", "platform", "strategy", "degree", "precision", "batch_size", "tokens_per_s"],
        [[r["label"], r["platform"], r["strategy"], r["degree"], r["precision"], r["batch_size"], r["tokens_per_s"]] for r in s["runs"]],
    )
    if "not_computable" in s:
        out += [f"{name}: not computable: {s['not_computable']}" for name in s.get("metrics", {})] or [f"not computable: {s['not_computable']}"]
        out += [""]
        return out
    m = s["metrics"]
    if "scaling_efficiency" in m:
        out += ["#### scaling_efficiency", ""]
        out += _table(["strategy", "degree", "throughput", "speedup", "efficiency", "sublinear", "commentary"],
                      [[r["strategy"], r["degree"], r["throughput"], r["speedup"], r["efficiency"], r["sublinear"], r["commentary"]]
                       for r in m["scaling_efficiency"]])
    if "weight_streaming_penalty" in m:
        out += [f"weight_streaming_penalty: {num(m['weight_streaming_penalty'])}", ""]
    if "tp_degradation" in m:
        out += ["#### tp_degradation", ""]
        out += _table(["degree_from", "degree_to", "throughput_from", "throughput_to", "degradation", "crosses_node_boundary", "inter_machine"],
                      [[r[k] for k in ("degree_from", "degree_to", "throughput_from", "throughput_to", "degradation", "crosses_node_boundary", "inter_machine")]
                       for r in m["tp_degradation"]])
    if "pp_system_throughput" in m:
        out += ["#### pp_system_throughput", ""]
        out += [f"reference_per_layer_capacity: {num(m['reference_per_layer_capacity'])}", ""]
        out += _table(["run", "degree", "stage_layers", "max_stage_load", "bottleneck_stage", "throughput", "pp_system_throughput"],
                      [[r[k] for k in ("label", "degree", "stage_layers", "max_stage_load", "bottleneck_stage", "throughput", "pp_system_throughput")]
                       for r in m["pp_system_throughput"]])
    if "batch_knee" in m:
        out += [f"batch_knee: {_cell(m['batch_knee'])} (theta {num(m['theta'])})", ""]
        out += _table(["from", "to", "gain"], [[g["from"], g["to"], g["gain"]] for g in m["gains_per_doubling"]])
    if "precision_gain" in m:
        b = m["base"]
        out += ["#### precision_gain", "", f"base: {b['label']} {b['precision']} {num(b['throughput'])}", ""]
        out += _table(["run", "precision", "throughput", "gain"],
                      [[r["label"], r["precision"], r["throughput"], r["gain"]] for r in m["precision_gain"]])
    return out


def render_md(report: dict) -> str:
    t = report["tool"]
    out = [f"# {t['name']} report", "", f"tool version {t['version']}", "", "## Inputs", ""]
    out += _table(["path", "role", "sha256"], [[i["path"], i["role"], i["sha256"]] for i in report["inputs"]])
    out += ["## Workload", ""]
    w = report["workload"]
    if "not_computable" in w:
        out += [_cell(w), ""]
    else:
        out += _table(["field", "value"], [[k, v] for k, v in w["config"].items()])
        out += _table(["quantity", "value", "formula"], [
            ["param_count", w["param_count"], w["formulas"]["param_count"]],
            ["training_flops", w["training_flops"], w["formulas"]["training_flops"]],
            ["weight_traffic_bytes", w["weight_traffic_bytes"], "bytes_per_param * P"],
            ["activation_bytes", w["activation_bytes"], w["formulas"]["activation_memory"]],
            ["arithmetic_intensity", w["arithmetic_intensity"], w["formulas"]["arithmetic_intensity"]],
        ])
        out += [f"c_act {num(w['c_act'])}, bytes_per_param {num(w['bytes_per_param'])}, attention_scores {num(w['attention_scores'])}", ""]

    if "tier1" in report:
        out += ["## Tier 1", ""]
        for e in report["tier1"]:
            out += [f"### {e['trace']}", "", f"platform {e['platform']}, precision {e['precision']}, provenance {e['provenance']}, source {e['source']}", ""]
            if e["li_granularity"]:
                out += [f"li_granularity: {e['li_granularity']}", ""]
            if e["compute_utilization"] is not None:
                out += [f"compute_utilization (ingested): {num(e['compute_utilization'])}", ""]
            out += _table(["metric", "resource", "value"], _metric_rows(e["metrics"]))
            out += [f"- warning: {x}" for x in e["warnings"]] + ([""] if e["warnings"] else [])
        out += ["## Roofline", ""]
        for g in report["roofline"]:
            if "not_computable" in g:
                out += [f"{g['platform']} {g['precision']}: not computable: {g['not_computable']}", ""]
                continue
            out += [f"### {g['platform']} {g['precision']}", "",
                    f"peak_flops {num(g['peak_flops'])}, bandwidth {num(g['bandwidth'])}, ridge_point {num(g['ridge_point'])}", ""]
            out += _table(["point", "ai", "attainable_flops", "achieved_flops", "regime"],
                          [[p["label"], p["ai"], p["attainable_flops"], p["achieved_flops"], p["regime"]] for p in g["points"]])

    if "tier2" in report:
        out += ["## Tier 2", ""]
        for s in report["tier2"]["sweeps"]:
            out += _sweep_md(s)
        pp = report["tier2"]["pp_assign"]
        out += ["### pp_assign", ""]
        if "not_computable" in pp:
            out += [_cell(pp), ""]
        else:
            out += _table(["field", "value"], [[k, v] for k, v in pp.items()])
    return "\n".join(out).rstrip("\n") + "\n"
