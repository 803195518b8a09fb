"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 internal invariant violation.
Errors go to stderr as ``{"errors": [...]}``.
"""
from __future__ import annotations

import dataclasses
import json
import os
import sys

import click

from . import __version__, kernels
from .errors import DfbenchError, InvariantViolation, ValidationError
from .manifest import load_manifest, resolve_spec
from .report import build_report, dumps, render_md, roofline_points, write_atomic, write_roofline, write_roofline_artifacts
from .simulator import plan_to_dict, simulate
from .trace import emit_trace, read_trace
from .workload import ModelConfig

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4


def _fail(code: int, errors: list):
    click.echo(json.dumps({"errors": errors}, sort_keys=True), err=True)
    sys.exit(code)


def _load(manifest_path, theta):
    m = load_manifest(manifest_path)
    if theta is not None:
        if not 0 < theta < 1:
            raise ValidationError("--theta must lie in (0, 1)", field="theta")
        m = dataclasses.replace(m, options=dataclasses.replace(m.options, theta=theta))
    return m


def _spec(value):
    if value is None:
        return None
    return resolve_spec(value, os.getcwd())


def _emit(report, out_dir, fmt) -> list:
    paths = []
    if fmt in ("json", "both"):
        p = os.path.join(out_dir, "report.json")
        write_atomic(p, dumps(report))
        paths.append(p)
    if fmt in ("md", "both"):
        p = os.path.join(out_dir, "report.md")
        write_atomic(p, render_md(report))
        paths.append(p)
    return paths


def _done(paths):
    click.echo(json.dumps({"written": paths}))


manifest_opt = click.option("--manifest", "manifest_path", required=True, type=click.Path(dir_okay=False), help="Run manifest file.")
out_opt = click.option("--out", "out_dir", default=".", show_default=True, type=click.Path(file_okay=False), help="Output directory.")
spec_opt = click.option("--spec", "spec", default=None, help="Hardware preset name or spec file overriding the registry entry of the same name.")
theta_opt = click.option("--theta", type=float, default=None, help="Batch-knee threshold per doubling.")
format_opt = click.option("--format", "fmt", type=click.Choice(["json", "md", "both"]), default="both", show_default=True)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="dfbench")
def cli():
    """Benchmark metrics for dataflow AI accelerators."""


@cli.command()
@manifest_opt
@out_opt
@spec_opt
@theta_opt
@format_opt
def tier1(manifest_path, out_dir, spec, theta, fmt):
    """Intra-chip metrics for every tier1 trace in the manifest."""
    m = _load(manifest_path, theta)
    _done(_emit(build_report(m, ("tier1",), _spec(spec)), out_dir, fmt))


@cli.command()
@manifest_opt
@out_opt
@spec_opt
@theta_opt
@format_opt
def tier2(manifest_path, out_dir, spec, theta, fmt):
    """Scaling and deployment metrics for every sweep in the manifest."""
    m = _load(manifest_path, theta)
    _done(_emit(build_report(m, ("tier2",), _spec(spec)), out_dir, fmt))


@cli.command()
@manifest_opt
@out_opt
@spec_opt
@theta_opt
@format_opt
def report(manifest_path, out_dir, spec, theta, fmt):
    """Tier-1, Tier-2 and roofline artifacts in one pass."""
    m = _load(manifest_path, theta)
    override = _spec(spec)
    rep = build_report(m, ("tier1", "tier2"), override)
    paths = _emit(rep, out_dir, fmt)
    paths += write_roofline_artifacts(out_dir, m, rep, override)
    _done(paths)


@cli.command()
@click.option("--spec", "spec", required=True, help="Hardware preset name or spec file.")
@click.option("--ai", "ais", type=float, multiple=True, help="Arithmetic intensity to place; repeatable.")
@click.option("--manifest", "manifest_path", default=None, type=click.Path(dir_okay=False), help="Add the manifest's tier1 traces on this platform.")
@click.option("--precision", default=None, help="Peak label; defaults to the hardware's only one.")
@out_opt
def roofline(spec, ais, manifest_path, precision, out_dir):
    """Roofline points file and SVG plot for one hardware spec."""
    hw = _spec(spec)
    if precision is None:
        if len(hw.peak_flops_per_s) != 1:
            raise ValidationError(f"{hw.name} has several peaks; pick one with --precision", field="precision")
        precision = next(iter(hw.peak_flops_per_s))
    hw.peak(precision)
    hw.bandwidth()
    labelled = []
    if manifest_path is not None:
        m = load_manifest(manifest_path)
        rep = build_report(m, ("tier1",), hw)
        for e in rep["tier1"]:
            r = e["metrics"]["roofline"]
            if e["platform"] == hw.name and e["precision"] == precision and "not_computable" not in r:
                labelled.append((os.path.basename(e["trace"]), r["ai"], r["achieved_flops"]))
    pts = roofline_points(hw, precision, ais, labelled)
    _done(write_roofline(out_dir, hw, precision, pts))


@cli.command(name="simulate")
@click.option("--mode", type=click.Choice(["o0", "o1", "o3"]), default=None, help="RDU compile mode.")
@click.option("--wse", "wse", is_flag=True, help="Wafer-scale kernel placement.")
@click.option("--pp", "pp", is_flag=True, help="Pipeline stage assignment.")
@click.option("--layers", type=int, default=12, show_default=True)
@click.option("--hidden", type=int, default=768, show_default=True)
@click.option("--heads", type=int, default=12, show_default=True)
@click.option("--vocab", type=int, default=50257, show_default=True)
@click.option("--seq-len", type=int, default=1024, show_default=True)
@click.option("--batch", type=int, default=1, show_default=True)
@click.option("--family", type=click.Choice(["gpt2-style", "llama2-style"]), default="gpt2-style", show_default=True)
@click.option("--devices", type=int, default=None, help="Pipeline device count (--pp).")
@click.option("--budget", type=int, default=None, help="PCU budget per O3 section.")
@click.option("--cap", type=float, default=0.93, show_default=True, help="PE allocation cap (--wse).")
@click.option("--jitter", type=float, default=0.0, show_default=True, help="Relative throughput noise.")
@click.option("--seed", type=int, default=0, show_default=True)
@out_opt
def simulate_cmd(mode, wse, pp, layers, hidden, heads, vocab, seq_len, batch, family, devices, budget, cap, jitter, seed, out_dir):
    """Synthesize a mapping plan and its trace."""
    chosen = [s for s, on in ((mode, mode is not None), ("wse", wse), ("pp", pp)) if on]
    if len(chosen) != 1:
        raise ValidationError("choose exactly one of --mode, --wse or --pp", field="strategy")
    cfg = ModelConfig(family=family, hidden_size=hidden, num_layers=layers, num_heads=heads,
                      vocab_size=vocab, seq_len=seq_len, batch_size=batch)
    plan, trace = simulate(chosen[0], cfg, budget=budget, devices=devices, cap=cap, jitter=jitter, seed=seed)
    tpath = os.path.join(out_dir, "trace.jsonl")
    ppath = os.path.join(out_dir, "plan.json")
    write_atomic(tpath, emit_trace(trace))
    write_atomic(ppath, json.dumps(plan_to_dict(plan), indent=2, allow_nan=False) + "\n")
    _done([tpath, ppath])


@cli.command()
@click.option("--manifest", "manifest_path", default=None, type=click.Path(dir_okay=False))
@click.option("--trace", "traces", multiple=True, type=click.Path(dir_okay=False), help="Trace file; repeatable.")
@click.option("--spec", "specs", multiple=True, help="Hardware spec file or preset; repeatable.")
def validate(manifest_path, traces, specs):
    """Check manifests, traces and spec files without computing anything."""
    if not (manifest_path or traces or specs):
        raise ValidationError("nothing to validate; pass --manifest, --trace or --spec")
    checked = []
    errors = []

    def attempt(kind, path, fn):
        try:
            fn()
            checked.append({"kind": kind, "path": path})
        except DfbenchError as exc:
            errors.append({"path": path, **exc.to_dict()})

    if manifest_path:
        def check_manifest():
            m = load_manifest(manifest_path)
            for ref in m.traces:
                full = m.resolve(ref.path)
                attempt("trace", ref.path, lambda full=full: read_trace(full))
        attempt("manifest", manifest_path, check_manifest)
    for t in traces:
        attempt("trace", t, lambda t=t: read_trace(t))
    for s in specs:
        attempt("spec", s, lambda s=s: _spec(s))
    if errors:
        _fail(EXIT_VALIDATION, errors)
    click.echo(json.dumps({"valid": True, "checked": checked}))


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="dfbench", standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        _fail(EXIT_VALIDATION, [{"code": "usage", "message": exc.format_message()}])
    except click.exceptions.Abort:
        _fail(EXIT_VALIDATION, [{"code": "aborted", "message": "aborted"}])
    except InvariantViolation as exc:
        _fail(EXIT_INTERNAL, [exc.to_dict()])
    except DfbenchError as exc:
        _fail(EXIT_VALIDATION, [exc.to_dict()])
    except OSError as exc:
        _fail(EXIT_IO, [{"code": "io", "message": f"{exc.filename or ''}: {exc.strerror or exc}".lstrip(": ")}])
    except Exception as exc:  # anything else is a bug, not bad input
        _fail(EXIT_INTERNAL, [{"code": "internal", "message": f"{type(exc).__name__}: {exc}"}])
    sys.exit(EXIT_OK)


# backend name is useful when reporting benchmark numbers
cli.add_command(click.Command("backend", callback=lambda: click.echo(kernels.BACKEND), help="Print the active kernel backend."))
