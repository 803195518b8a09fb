"""Independent reference implementations used as test oracles.

Everything here is written from the metric definitions with exact rational
arithmetic, without touching the package's kernels.
"""
from __future__ import annotations

from fractions import Fraction


def allocation(r_used, r_all) -> Fraction:
    return Fraction(r_used, r_all)


def weighted_allocation(sections, r_all, kind) -> Fraction:
    num = sum(Fraction(s.runtime_s) * Fraction(s.units.get(kind, 0), r_all) for s in sections)
    den = sum(Fraction(s.runtime_s) for s in sections)
    return num / den


def load_imbalance(pairs) -> Fraction:
    """``pairs`` of (units, throughput); zero-unit entries are skipped."""
    pairs = [(Fraction(r), Fraction(t)) for r, t in pairs if r > 0]
    tmin = min(t for _, t in pairs)
    return sum(tmin / t * r for r, t in pairs) / sum(r for r, _ in pairs)


def weighted_li(sections) -> Fraction:
    num = sum(Fraction(s.runtime_s) * Fraction(s.li) for s in sections)
    den = sum(Fraction(s.runtime_s) for s in sections)
    return num / den


def rel_err(got: float, want: Fraction) -> float:
    if want == 0:
        return abs(got)
    return float(abs(Fraction(got) - want) / abs(want))


def gpt2_tensors(h, L, V, S, ffn=None, bias=True):
    """Named parameter tensors of a GPT-2 style decoder, counted tensor by tensor."""
    f = ffn if ffn is not None else 4 * h
    t = {"wte": V * h, "wpe": S * h}
    for i in range(L):
        p = f"h{i}."
        t[p + "ln_1.weight"] = h
        t[p + "ln_1.bias"] = h
        t[p + "attn.c_attn.weight"] = h * 3 * h
        t[p + "attn.c_proj.weight"] = h * h
        t[p + "ln_2.weight"] = h
        t[p + "ln_2.bias"] = h
        t[p + "mlp.c_fc.weight"] = h * f
        t[p + "mlp.c_proj.weight"] = f * h
        if bias:
            t[p + "attn.c_attn.bias"] = 3 * h
            t[p + "attn.c_proj.bias"] = h
            t[p + "mlp.c_fc.bias"] = f
            t[p + "mlp.c_proj.bias"] = h
    t["ln_f.weight"] = h
    t["ln_f.bias"] = h
    return t


def llama_tensors(h, L, V, f):
    """Tied input/output embedding, so only one V x h table."""
    t = {"embed_tokens": V * h, "norm": h}
    for i in range(L):
        p = f"layers.{i}."
        for proj in ("q", "k", "v", "o"):
            t[p + f"self_attn.{proj}_proj"] = h * h
        for proj in ("gate", "up"):
            t[p + f"mlp.{proj}_proj"] = h * f
        t[p + "mlp.down_proj"] = f * h
        t[p + "input_layernorm"] = h
        t[p + "post_attention_layernorm"] = h
    return t


def random_traceset(rng, spec):
    """A TraceSet whose units fit ``spec`` (single chip), with tasks and sections."""
    from dfbench.trace import RunMetadata, SectionRecord, TaskRecord, TraceSet

    kinds = list(spec.resource_totals)
    n_tasks = rng.randint(1, 40)
    tasks = []
    budget = {k: spec.resource_totals[k] for k in kinds}
    for i in range(n_tasks):
        units = {}
        for k in kinds:
            take = rng.randint(0, max(0, budget[k] // (n_tasks - i)))
            budget[k] -= take
            units[k] = take
        tasks.append(TaskRecord(f"t{i:03d}", rng.choice(["compute", "transmission"]), units,
                                throughput=rng.uniform(1e-3, 1e6)))
    # every kind needs at least one task holding units
    for k in kinds:
        if all(t.units[k] == 0 for t in tasks) and budget[k] > 0:
            t0 = tasks[0]
            tasks[0] = TaskRecord(t0.task_id, t0.kind, {**t0.units, k: 1}, t0.throughput)
    sections = []
    for j in range(rng.randint(1, 30)):
        units = {k: rng.randint(0, spec.resource_totals[k]) for k in kinds}
        sections.append(SectionRecord(j, rng.uniform(1e-6, 1e3), units, rng.randint(1, 8), rng.uniform(1e-3, 1.0)))
    rng.shuffle(tasks)
    rng.shuffle(sections)
    return TraceSet(RunMetadata(spec.name, "bf16"), tuple(tasks), tuple(sections))


def tier1_oracle(trace, spec):
    """Exact values of the four intra-chip metrics, summed naively."""
    out = {"allocation_ratio": {}, "weighted_allocation": {}, "load_imbalance": {}}
    for k, total in spec.resource_totals.items():
        used = sum(t.units.get(k, 0) for t in trace.tasks)
        if used:
            out["allocation_ratio"][k] = allocation(used, total)
            out["load_imbalance"][k] = load_imbalance([(t.units.get(k, 0), t.throughput) for t in trace.tasks])
        if any(s.units.get(k, 0) for s in trace.sections):
            out["weighted_allocation"][k] = weighted_allocation(trace.sections, total, k)
    out["weighted_li"] = weighted_li(trace.sections)
    return out
