import io
import json
import re

import numpy as np
import pytest

from polar_lab.cli import main
from polar_lab.estimators import PolarEncoder
from polar_lab.code_model import load_spec

from conftest import CONFIGS

R12_K64 = str(CONFIGS / "r12_k64.cfg")
TOY = str(CONFIGS / "toy_all_info.cfg")


def run(*argv):
    out = io.StringIO()
    rc = main([str(a) for a in argv], out)
    return rc, out.getvalue()


def stable(text):
    return "\n".join(line for line in text.splitlines() if not line.startswith("timing:"))


def test_construct_all_info():
    rc, text = run("construct", "--spec", TOY)
    assert rc == 0
    assert "frozen=0" in text
    listed = next(line for line in text.splitlines() if line.startswith("frozen_positions:"))
    assert listed.split(":", 1)[1].split() == []


def test_construct_table_code():
    rc, text = run("construct", "--spec", CONFIGS / "r45_k64.cfg")
    assert rc == 0 and "shortened=48" in text and "info=72" in text


def test_encode_binary_hex_and_random(tmp_path):
    (tmp_path / "m.txt").write_text("00001111\n0x0F\n\n11111111\n")
    rc, text = run("encode", "--spec", TOY, "--input", tmp_path / "m.txt")
    assert rc == 0
    assert text.splitlines() == ["00001111", "00001111", "11111111"]
    rc, a = run("encode", "--spec", R12_K64, "--random", 3, "--seed", 1)
    rc2, b = run("encode", "--spec", R12_K64, "--random", 3, "--seed", 1)
    assert rc == rc2 == 0 and a == b and len(a.split()) == 3
    assert all(len(line) == 128 for line in a.split())


def test_encode_errors(tmp_path, capsys):
    (tmp_path / "bad.txt").write_text("0102\n")
    rc, _ = run("encode", "--spec", TOY, "--input", tmp_path / "bad.txt")
    assert rc == 2 and "line 1" in capsys.readouterr().err
    (tmp_path / "short.txt").write_text("0101\n")
    rc, _ = run("encode", "--spec", TOY, "--input", tmp_path / "short.txt")
    assert rc == 2 and "expected 8" in capsys.readouterr().err
    rc, _ = run("encode", "--spec", tmp_path / "missing.cfg")
    assert rc == 2


def test_decode_file(tmp_path, rng):
    spec = load_spec(R12_K64)
    msgs = rng.integers(0, 2, (3, spec.k_info), dtype=np.uint8)
    cws = PolarEncoder(spec).fit_transform(msgs)
    llrs = (1.0 - 2.0 * cws) * 4.0 + 0.3 * rng.standard_normal(cws.shape)
    (tmp_path / "l.txt").write_text("\n".join(" ".join(f"{v:.4f}" for v in r) for r in llrs))
    for extra in ([], ["--list", "8"], ["--decoder", "sc", "--backend", "reference"]):
        rc, text = run("decode", "--spec", R12_K64, "--input", tmp_path / "l.txt", *extra)
        assert rc == 0
        lines = text.splitlines()
        assert len(lines) == 3
        for line, msg in zip(lines, msgs):
            bits, crc, _ = line.split()
            assert bits == "".join(map(str, msg)) and crc == "crc=ok"
    (tmp_path / "bad.txt").write_text("1 2 3\n")
    assert run("decode", "--spec", R12_K64, "--input", tmp_path / "bad.txt")[0] == 2


def test_sim_output_is_reproducible(tmp_path):
    args = ("sim", "--spec", R12_K64, "--ebn0", 2.0, "--target-errors", 20, "--seed", 3)
    rc, a = run(*args, "--csv", tmp_path / "s.csv")
    rc2, b = run(*args)
    assert rc == rc2 == 0
    assert stable(a) == stable(b)
    assert re.search(r"^timing: elapsed_s=[\d.]+$", a, re.M)
    assert "frame_errors=20" in a and "stop=ErrorTarget" in a
    header, values = (tmp_path / "s.csv").read_text().splitlines()
    assert header.startswith("ebn0_db,frames,frame_errors")
    assert run("sim", "--spec", R12_K64)[0] == 2


def test_sim_noiseless():
    rc, text = run("sim", "--spec", R12_K64, "--noiseless", "--ebn0", 0, "--max-frames", 1000)
    assert rc == 0 and "frame_errors=0" in text and "stop=FrameCap" in text


def test_gen_writes_source_and_manifest(tmp_path):
    target = tmp_path / "dec.py"
    rc, text = run("gen", "--spec", R12_K64, "--emit", target, "--backend", "python")
    assert rc == 0 and target.exists()
    manifest = json.loads((tmp_path / "dec.manifest.json").read_text())
    assert manifest["spec"]["k_info"] == 64
    assert [p["list_size"] for p in manifest["programs"]] == [1, 2, 4, 8, 16, 32]
    rc, _ = run("gen", "--spec", R12_K64, "--emit", tmp_path / "d8.py", "--list", 8)
    assert rc == 0


def test_verify_reports_zero_mismatches():
    rc, text = run("verify", "--spec", R12_K64, "--frames", 300, "--seed", 7)
    assert rc == 0
    lines = [line for line in text.splitlines() if "interpreter" in line]
    assert len(lines) == 6
    assert all(line.endswith("300 frames, 0 mismatches") for line in lines)
    rc, text = run("verify", "--spec", R12_K64, "--frames", 50, "--list", 4, "--emit",
                   "--backend", "python")
    assert rc == 0 and "L=4 emitted: 50 frames, 0 mismatches" in text


def test_explore_subcommand(tmp_path):
    rc, _ = run("explore", "--spec", CONFIGS / "r45_k64.cfg", "--crc-widths", 9)
    assert rc == 2
    rc, text = run("explore", "--spec", CONFIGS / "r45_k64.cfg", "--constructions", "5g",
                   "--crc-widths", 8, "--lists", 4, "--ebn0-range", 0, 0.5,
                   "--target-fer", 1e-4, "--target-errors", 5, "--backend", "python")
    assert rc == 0
    header, line = stable(text).splitlines()
    assert header.startswith("k_info,rate,construction") and line.endswith("Unreached")


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code != 0
    with pytest.raises(SystemExit) as exc:
        main(["sim", "--spec", R12_K64, "--bogus"])
    assert exc.value.code != 0
