import json
import os

import pytest
import yaml

from dfbench.trace import read_trace


def errors(proc):
    return json.loads(proc.stderr)["errors"]


def write_manifest(tmp_path, data, name="m.manifest"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def small_manifest(fixtures_dir, **over):
    data = {
        "workload": {"family": "gpt2-style", "hidden_size": 768, "num_layers": 12, "num_heads": 12,
                     "vocab_size": 50257, "seq_len": 1024, "batch_size": 8},
        "hardware": ["wse2"],
        "traces": [{"path": os.path.join(fixtures_dir, "traces", "wse_pe_allocation_L12.jsonl"), "role": "tier1"}],
    }
    data.update(over)
    return data


def test_tier1_table_manifest(cli, fixtures_dir, tmp_path):
    p = cli("tier1", "--manifest", os.path.join(fixtures_dir, "pe_allocation.manifest"), "--out", str(tmp_path))
    assert p.returncode == 0, p.stderr
    assert sorted(os.listdir(tmp_path)) == ["report.json", "report.md"]
    rep = json.loads((tmp_path / "report.json").read_text())
    assert "tier2" not in rep
    ratios = [e["metrics"]["allocation_ratio"]["PE"] for e in rep["tier1"]]
    assert [round(r, 3) for r in ratios] == [0.33, 0.6, 0.85, 0.87, 0.91, 0.88, 0.92, 0.92, 0.92, 0.92, 0.92, 0.92, 0.93]


def test_format_flag(cli, fixtures_dir, tmp_path):
    p = cli("tier1", "--manifest", os.path.join(fixtures_dir, "pe_allocation.manifest"), "--out", str(tmp_path), "--format", "md")
    assert p.returncode == 0
    assert os.listdir(tmp_path) == ["report.md"]


def test_missing_memory_is_explicit(cli, fixtures_dir, tmp_path):
    m = write_manifest(tmp_path, small_manifest(fixtures_dir))
    assert cli("tier1", "--manifest", m, "--out", str(tmp_path)).returncode == 0
    entry = json.loads((tmp_path / "report.json").read_text())["tier1"][0]
    assert entry["metrics"]["memory_fractions"] == {"not_computable": "missing memory_bytes"}
    assert "not computable: missing memory_bytes" in (tmp_path / "report.md").read_text()


def test_tier2_fixture(cli, fixtures_dir, tmp_path):
    p = cli("tier2", "--manifest", os.path.join(fixtures_dir, "paper.manifest"), "--out", str(tmp_path), "--format", "json")
    assert p.returncode == 0, p.stderr
    rep = json.loads((tmp_path / "report.json").read_text())
    sweeps = {s["name"]: s for s in rep["tier2"]["sweeps"]}
    assert round(sweeps["wse_dp"]["metrics"]["scaling_efficiency"][0]["efficiency"], 3) == 0.742
    assert sweeps["wse_dp4_mini"]["metrics"]["scaling_efficiency"] == {"not_computable": "sweep has a single run"}
    assert rep["tier2"]["pp_assign"]["max_stage_load"] == 4


def test_theta_flag(cli, fixtures_dir, tmp_path):
    p = cli("tier2", "--manifest", os.path.join(fixtures_dir, "paper.manifest"), "--out", str(tmp_path), "--theta", "0.005", "--format", "json")
    assert p.returncode == 0, p.stderr
    sweeps = {s["name"]: s for s in json.loads((tmp_path / "report.json").read_text())["tier2"]["sweeps"]}
    assert sweeps["wse_batch"]["metrics"]["batch_knee"] is None
    bad = cli("tier2", "--manifest", os.path.join(fixtures_dir, "paper.manifest"), "--out", str(tmp_path), "--theta", "2")
    assert bad.returncode == 2 and errors(bad)[0]["field"] == "theta"


def test_validation_error_exit_2(cli, fixtures_dir, tmp_path):
    m = write_manifest(tmp_path, small_manifest(fixtures_dir, traces=[]))
    p = cli("tier1", "--manifest", m, "--out", str(tmp_path))
    assert p.returncode == 2
    assert errors(p)[0]["field"] == "traces"
    assert not os.path.exists(tmp_path / "report.json")


def test_bad_trace_exit_2(cli, fixtures_dir, tmp_path):
    t = tmp_path / "bad.jsonl"
    t.write_text('{"record": "metadata", "schema_version": 1, "platform": "wse2", "precision": "fp16"}\n{"record": "task"}\n')
    m = write_manifest(tmp_path, small_manifest(fixtures_dir, traces=[str(t)]))
    p = cli("tier1", "--manifest", m, "--out", str(tmp_path))
    assert p.returncode == 2
    errs = errors(p)
    assert errs[0]["issues"][0]["line"] == 2
    assert errs[0]["issues"][0]["path"].endswith("bad.jsonl")


def test_usage_error_exit_2(cli):
    p = cli("tier1")
    assert p.returncode == 2
    assert errors(p)[0]["code"] == "usage"


def test_io_error_exit_3(cli, fixtures_dir, tmp_path):
    p = cli("tier1", "--manifest", str(tmp_path / "absent.manifest"), "--out", str(tmp_path))
    assert p.returncode == 3
    m = write_manifest(tmp_path, small_manifest(fixtures_dir, traces=[str(tmp_path / "absent.jsonl")]))
    assert cli("tier1", "--manifest", m, "--out", str(tmp_path)).returncode == 3
    blocker = tmp_path / "file"
    blocker.write_text("x")
    ok = write_manifest(tmp_path, small_manifest(fixtures_dir))
    assert cli("tier1", "--manifest", ok, "--out", str(blocker / "sub")).returncode == 3


def test_internal_error_exit_4(tmp_path, monkeypatch, capsys):
    import dfbench.cli as cli_mod
    from dfbench.errors import InvariantViolation

    def boom(*a, **k):
        raise InvariantViolation("placement over cap")

    monkeypatch.setattr(cli_mod, "simulate", boom)
    with pytest.raises(SystemExit) as e:
        cli_mod.main(["simulate", "--wse", "--out", str(tmp_path)])
    assert e.value.code == 4
    assert "placement over cap" in capsys.readouterr().err

    def bug(*a, **k):
        raise KeyError("x")

    monkeypatch.setattr(cli_mod, "simulate", bug)
    with pytest.raises(SystemExit) as e:
        cli_mod.main(["simulate", "--wse", "--out", str(tmp_path)])
    assert e.value.code == 4
    assert json.loads(capsys.readouterr().err)["errors"][0]["code"] == "internal"


def test_roofline_presets(cli, tmp_path):
    p = cli("roofline", "--spec", "wse2", "--ai", "8.9", "--ai", "28", "--out", str(tmp_path))
    assert p.returncode == 0, p.stderr
    rows = (tmp_path / "roofline_wse2_fp16.csv").read_text().splitlines()
    assert rows[0] == "ai,attainable,achieved,regime,label"
    assert all(r.split(",")[3] == "compute-bound" for r in rows[1:]) and len(rows) == 3
    p = cli("roofline", "--spec", "sn30-rdu", "--ai", "28", "--out", str(tmp_path))
    row = (tmp_path / "roofline_sn30-rdu_bf16.csv").read_text().splitlines()[1].split(",")
    assert float(row[1]) == pytest.approx(5.6e12) and row[3] == "memory-bound"
    svg = (tmp_path / "roofline_sn30-rdu_bf16.svg").read_text()
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert 'width="800"' in svg and 'height="600"' in svg and svg.count('r="6"') == 1


def test_roofline_without_workloads(cli, tmp_path):
    p = cli("roofline", "--spec", "wse2", "--out", str(tmp_path))
    assert p.returncode == 0
    assert (tmp_path / "roofline_wse2_fp16.csv").read_text().splitlines() == ["ai,attainable,achieved,regime,label"]
    assert "<circle" not in (tmp_path / "roofline_wse2_fp16.svg").read_text()


def test_roofline_needs_bandwidth(cli, fixtures_dir, tmp_path):
    p = cli("roofline", "--spec", "bow2000-ipu", "--ai", "10", "--out", str(tmp_path))
    assert p.returncode == 2
    assert "global_bw_bytes_per_s" in errors(p)[0]["message"]
    spec = os.path.join(fixtures_dir, "hardware", "bow2000-ipu-assumed-bw.yaml")
    assert cli("roofline", "--spec", spec, "--ai", "10", "--out", str(tmp_path)).returncode == 0


def test_roofline_from_manifest(cli, fixtures_dir, tmp_path):
    p = cli("roofline", "--spec", "wse2", "--manifest", os.path.join(fixtures_dir, "paper.manifest"), "--out", str(tmp_path))
    assert p.returncode == 0, p.stderr
    rows = (tmp_path / "roofline_wse2_fp16.csv").read_text().splitlines()[1:]
    labels = {r.split(",")[4] for r in rows}
    assert {"wse_roofline_ai28.jsonl", "wse_roofline_ai8_9.jsonl"} <= labels


def test_simulate_examples(cli, tmp_path):
    counts = []
    for L in (12, 48):
        out = tmp_path / f"o1_{L}"
        out.mkdir()
        assert cli("simulate", "--mode", "o1", "--layers", str(L), "--out", str(out)).returncode == 0
        counts.append(json.loads((out / "plan.json").read_text())["section_count"])
        assert len(read_trace(str(out / "trace.jsonl")).sections) == counts[-1]
    assert counts[0] == counts[1] == 6
    fail = cli("simulate", "--wse", "--layers", "78", "--out", str(tmp_path))
    assert fail.returncode == 2 and "78" in errors(fail)[0]["message"]
    pp = tmp_path / "pp"
    pp.mkdir()
    assert cli("simulate", "--pp", "--layers", "30", "--devices", "16", "--out", str(pp)).returncode == 0
    assert json.loads((pp / "plan.json").read_text())["max_stage_load"] == 2
    assert cli("simulate", "--out", str(tmp_path)).returncode == 2
    assert cli("simulate", "--mode", "o7", "--out", str(tmp_path)).returncode == 2


def test_simulate_deterministic(cli, tmp_path):
    outs = []
    for i in range(2):
        d = tmp_path / str(i)
        d.mkdir()
        assert cli("simulate", "--wse", "--layers", "24", "--jitter", "0.1", "--seed", "9", "--out", str(d)).returncode == 0
        outs.append(((d / "trace.jsonl").read_bytes(), (d / "plan.json").read_bytes()))
    assert outs[0] == outs[1]


def test_validate(cli, fixtures_dir, tmp_path):
    p = cli("validate", "--manifest", os.path.join(fixtures_dir, "paper.manifest"), "--spec", "wse2")
    assert p.returncode == 0, p.stderr
    assert json.loads(p.stdout)["valid"] is True
    bad = tmp_path / "spec.yaml"
    bad.write_text("name: x\nresource_totals: {PE: 1}\npeak_flops_per_s: {fp16: 1}\n")
    p = cli("validate", "--spec", str(bad))
    assert p.returncode == 2 and errors(p)[0]["field"] == "global_bw_bytes_per_s"
    assert cli("validate").returncode == 2


def test_backend_and_version(cli):
    p = cli("backend")
    assert p.returncode == 0 and p.stdout.strip() in ("cython", "python")
    p = cli("--version")
    assert p.returncode == 0 and "0.1.0" in p.stdout
