import hashlib
import json
import os
import re

import pytest

from dfbench.hardware import get_preset
from dfbench.report import dumps, write_atomic
from dfbench.svgplot import roofline_svg

NUMBER = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?(?:e[+-]?\d+)?(?![\w.])")


@pytest.fixture(scope="module")
def full_report(tmp_path_factory):
    from conftest import FIXTURES, run_cli
    out = tmp_path_factory.mktemp("report")
    p = run_cli("report", "--manifest", os.path.join(FIXTURES, "paper.manifest"), "--out", str(out))
    assert p.returncode == 0, p.stderr
    return out


def json_tokens(obj, acc):
    if isinstance(obj, dict):
        for k, v in obj.items():
            json_tokens(k, acc)
            json_tokens(v, acc)
    elif isinstance(obj, list):
        for v in obj:
            json_tokens(v, acc)
    elif isinstance(obj, bool) or obj is None:
        pass
    elif isinstance(obj, (int, float)):
        acc.add(json.dumps(obj))
    else:
        acc.update(NUMBER.findall(str(obj)))
    return acc


def test_every_md_number_is_in_json(full_report):
    rep = json.loads((full_report / "report.json").read_text())
    md = (full_report / "report.md").read_text()
    have = json_tokens(rep, set())
    md_numbers = NUMBER.findall(md)
    assert len(md_numbers) > 300
    missing = sorted({n for n in md_numbers if n not in have})
    assert missing == []


def test_report_lists_every_metric(full_report):
    rep = json.loads((full_report / "report.json").read_text())
    md = (full_report / "report.md").read_text()
    for name in rep["metric_names"]["tier1"]:
        assert all(name in e["metrics"] for e in rep["tier1"])
        assert name in md
    text = json.dumps(rep["tier2"])
    for name in rep["metric_names"]["tier2"]:
        assert name in text and name in md


def test_inputs_have_digests(full_report, fixtures_dir):
    rep = json.loads((full_report / "report.json").read_text())
    first = rep["inputs"][0]
    assert first["path"] == "paper.manifest"
    with open(os.path.join(fixtures_dir, "paper.manifest"), "rb") as fh:
        assert first["sha256"] == hashlib.sha256(fh.read()).hexdigest()
    assert rep["tool"]["version"] == "0.1.0"


def test_provenance_marks_fixture_traces(full_report):
    rep = json.loads((full_report / "report.json").read_text())
    by = {e["trace"]: e for e in rep["tier1"]}
    assert set(by["traces/wse_pe_allocation_L1.jsonl"]["metric_provenance"].values()) == {"fixture"}
    assert by["sim/wse_place_L24.jsonl"]["metric_provenance"]["allocation_ratio"] == "compile-time"


def test_json_floats_round_trip(full_report):
    text = (full_report / "report.json").read_text()
    rep = json.loads(text)
    assert dumps(rep) == text
    assert "NaN" not in text and "Infinity" not in text


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "a.txt"
    write_atomic(str(target), "one")
    write_atomic(str(target), "two")
    assert target.read_text() == "two"
    assert os.listdir(tmp_path) == ["a.txt"]


def test_svg_structure():
    spec = get_preset("sn30-rdu")
    from dfbench.hardware import attainable
    pts = [attainable(spec, "bf16", a, None, f"p{a}") for a in (1.0, 28.0, 5000.0)]
    svg = roofline_svg("sn30", spec.peak("bf16"), spec.bandwidth(), pts)
    assert svg == roofline_svg("sn30", spec.peak("bf16"), spec.bandwidth(), pts)
    assert svg.count('r="6"') == 3
    assert svg.count("<polyline") == 1
    assert "ridge" in svg
    assert svg.rstrip().endswith("</svg>")


def test_report_is_byte_deterministic(cli, fixtures_dir, tmp_path):
    digests = []
    for i in range(2):
        out = tmp_path / str(i)
        out.mkdir()
        assert cli("report", "--manifest", os.path.join(fixtures_dir, "paper.manifest"), "--out", str(out)).returncode == 0
        digests.append({f: hashlib.sha256((out / f).read_bytes()).hexdigest() for f in sorted(os.listdir(out))})
    assert digests[0] == digests[1]
    assert len(digests[0]) == 6
