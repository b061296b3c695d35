import hashlib
import json
import subprocess
import sys

import pytest

from trafficimg.cli import main
from trafficimg.pcap_io import read_pcap, write_pcap


@pytest.fixture
def corpus_dir(tmp_path, small_corpus):
    d = tmp_path / "real"
    d.mkdir()
    for i, f in enumerate(small_corpus["streaming"]):
        write_pcap(f.packets, d / f"s{i:03d}.pcap")
    return d


def digest(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_encode_decode_validate(tmp_path, amazon):
    write_pcap(amazon.packets, tmp_path / "a.pcap")
    assert main(["encode", "--pcap", str(tmp_path / "a.pcap"), "--image", str(tmp_path / "a.png")]) == 0
    assert main(["decode", "--image", str(tmp_path / "a.png"), "--pcap", str(tmp_path / "b.pcap")]) == 0
    assert main(["validate", "--pcap", str(tmp_path / "b.pcap"), "--out", str(tmp_path / "v.json")]) == 0
    doc = json.loads((tmp_path / "v.json").read_text())
    assert doc["compliant"] and doc["violation_count"] == 0
    back = read_pcap(tmp_path / "b.pcap")
    assert [p.ip_header for p in back] == [p.ip_header for p in amazon.packets]


def test_generate_zero(tmp_path, corpus_dir):
    prof = tmp_path / "p.json"
    assert main(["profile", "--pcap-dir", str(corpus_dir), "--label", "streaming", "--out", str(prof)]) == 0
    out = tmp_path / "gen"
    assert main(["generate", "--profile", str(prof), "--count", "0", "--out-dir", str(out)]) == 0
    assert out.is_dir() and not list(out.iterdir())


def run_pipeline(root, corpus_dir, seed):
    prof = root / "p.json"
    assert main(["profile", "--pcap-dir", str(corpus_dir), "--label", "streaming", "--out", str(prof)]) == 0
    assert main(["generate", "--profile", str(prof), "--count", "4", "--seed", str(seed),
                 "--out-dir", str(root / "gen")]) == 0
    synth = root / "synth"
    synth.mkdir()
    for img in sorted((root / "gen").glob("*.png")):
        assert main(["repair", "--image", str(img), "--profile", str(prof), "--seed", str(seed),
                     "--pcap", str(synth / (img.stem + ".pcap")),
                     "--report", str(root / (img.stem + ".repair.json"))]) == 0
    assert main(["compare", "--real-dir", str(corpus_dir), "--synth-dir", str(synth),
                 "--mode", "bit", "--out", str(root / "compare.json")]) == 0
    first = sorted(synth.glob("*.pcap"))[0]
    assert main(["report", "--pcap", str(first), "--against", str(sorted(corpus_dir.glob("*.pcap"))[0]),
                 "--out", str(root / "report.json")]) == 0


def test_full_pipeline_deterministic(tmp_path, corpus_dir, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    run_pipeline(a, corpus_dir, 5)
    run_pipeline(b, corpus_dir, 5)
    da, db = digest(a), digest(b)
    # repair reports record their own paths; compare everything else byte for byte
    paths = {k for k in da if not k.endswith(".repair.json")}
    assert paths and all(da[k] == db[k] for k in paths)
    assert {"compare.json", "compare.png", "report.json", "report.png"} <= set(da)
    cmp = json.loads((a / "compare.json").read_text())
    assert cmp["mode"] == "bit" and max(cmp["all_features"][k] for k in ("jsd", "tvd", "hd")) < 0.15
    for k in (k for k in da if k.endswith(".repair.json")):
        ra, rb = (json.loads((r / k).read_text()) for r in (a, b))
        ra.pop("config"), rb.pop("config")
        assert ra == rb and ra["compliant"]
    assert "Avg. JSD" in capsys.readouterr().out


def test_env_seed(tmp_path, corpus_dir, monkeypatch):
    prof = tmp_path / "p.json"
    main(["profile", "--pcap-dir", str(corpus_dir), "--label", "streaming", "--out", str(prof)])
    monkeypatch.setenv("TRAFFICIMG_SEED", "42")
    monkeypatch.setenv("TRAFFICIMG_PROFILE", str(prof))
    monkeypatch.setenv("TRAFFICIMG_OUT_DIR", str(tmp_path / "envgen"))
    assert main(["generate", "--count", "1"]) == 0
    assert [p.name for p in (tmp_path / "envgen").iterdir()] == ["streaming_000042.png"]


def test_usage_errors(capsys):
    assert main(["bogus"]) == 1
    assert main(["encode", "--pcap", "x.pcap"]) == 1
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["error"] == "usage"


def test_data_errors(tmp_path, capsys):
    assert main(["decode", "--image", str(tmp_path / "none.png"), "--pcap", str(tmp_path / "o.pcap")]) == 2
    doc = json.loads(capsys.readouterr().err.strip())
    assert doc["error"] == "data" and doc["file"].endswith("none.png")
    (tmp_path / "junk.pcap").write_bytes(b"garbage" * 10)
    assert main(["validate", "--pcap", str(tmp_path / "junk.pcap"), "--out", str(tmp_path / "v.json")]) == 2
    assert not (tmp_path / "o.pcap").exists()


def test_validate_reports_violations(tmp_path, amazon):
    import dataclasses
    p = amazon.packets[0]
    bad = dataclasses.replace(p, transport_header=p.transport_header[:16] + b"\x00\x00" + p.transport_header[18:])
    write_pcap([bad] + list(amazon.packets[1:]), tmp_path / "bad.pcap")
    assert main(["validate", "--pcap", str(tmp_path / "bad.pcap"), "--out", str(tmp_path / "v.json")]) == 2
    assert json.loads((tmp_path / "v.json").read_text())["violation_count"] == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "trafficimg", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
    res = subprocess.run([sys.executable, "-m", "trafficimg"], capture_output=True, text=True)
    assert res.returncode == 1


def test_output_directories_created(tmp_path, amazon):
    write_pcap(amazon.packets, tmp_path / "a.pcap")
    img = tmp_path / "new" / "deeper" / "a.png"
    assert main(["encode", "--pcap", str(tmp_path / "a.pcap"), "--image", str(img)]) == 0
    assert main(["validate", "--pcap", str(tmp_path / "a.pcap"), "--out", str(tmp_path / "v" / "v.json")]) == 0
    assert img.is_file() and (tmp_path / "v" / "v.json").is_file()
