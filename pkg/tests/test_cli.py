import csv
import io
import os
import subprocess
import sys

import pytest

from oracles import concat_str, inverse_bwt, naive_suffix_array
from seedmap.bench import HEADER
from seedmap.cli import main
from seedmap.fmindex import FMIndex
from seedmap.pipeline import parse_record
from seedmap.refseq import decode, write_fasta, write_fastq

from test_fmindex import bwt_string


@pytest.fixture(scope="module")
def files(tmp_path_factory, small_ref, mapped_dataset):
    d = tmp_path_factory.mktemp("cli")
    fa, fq, idx = d / "ref.fa", d / "reads.fq", d / "ref.idx"
    with open(fa, "wb") as fh:
        write_fasta(small_ref, fh)
    with open(fq, "wb") as fh:
        write_fastq(mapped_dataset[0][:300], fh)
    assert main(["index", str(fa), str(idx)]) == 0
    return fa, fq, idx


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_tiny_index_round_trip(tmp_path, capsys):
    fa = tmp_path / "t.fa"
    fa.write_text(">one\nACGTTGCA\nNNAC\n>two\nGGATTACA\n")
    code, out, _ = run(capsys, ["index", str(fa), str(tmp_path / "t.idx")])
    assert code == 0
    assert out.splitlines()[0] == "n_ref\t20"
    idx = FMIndex.load(tmp_path / "t.idx")
    assert [r.name for r in idx.records] == ["one", "two"]
    text = decode(idx.text[:idx.n_ref])
    assert len(text) == 20 and text.startswith("ACGTTGCA")
    concat = concat_str(text)
    assert inverse_bwt(bwt_string(idx)) == concat
    assert idx.suffix_array.tolist() == naive_suffix_array(concat)


def test_rebuild_is_byte_identical(files, tmp_path, capsys):
    fa, _, idx = files
    assert run(capsys, ["index", str(fa), str(tmp_path / "again.idx")])[0] == 0
    assert (tmp_path / "again.idx").read_bytes() == idx.read_bytes()


def test_missing_input(tmp_path, capsys):
    code, out, err = run(capsys, ["index", str(tmp_path / "nope.fa"), str(tmp_path / "x.idx")])
    assert code == 2 and out == "" and "nope.fa" in err
    code, out, err = run(capsys, ["mem", str(tmp_path / "nope.idx"), str(tmp_path / "r.fq")])
    assert code == 2 and out == "" and err


def test_mem_matches_library_and_is_deterministic(files, capsys, small_index, mapped_dataset):
    _, fq, idx = files
    code, base, _ = run(capsys, ["mem", str(idx), str(fq)])
    assert code == 0
    lines = base.splitlines()
    assert sum(1 for ln in lines if ln.endswith("\t*")) < 5
    first = parse_record("\n".join(ln for ln in lines if ln.split("\t")[0] == "r0"))
    assert first.read_id == "r0" and first.hits
    for extra in (["--threads", "8"], ["-t", "2", "--batch-size", "64"], ["--prefetch", "off"],
                  ["--chunk-bytes", "5000", "-t", "3"], ["--lane-width", "8"]):
        code, out, _ = run(capsys, ["mem", str(idx), str(fq)] + extra)
        assert code == 0 and out == base, extra


def test_output_file(files, tmp_path, capsys):
    _, fq, idx = files
    code, out, _ = run(capsys, ["mem", str(idx), str(fq), "-o", str(tmp_path / "o.txt")])
    assert code == 0 and out == ""
    assert (tmp_path / "o.txt").read_text() == run(capsys, ["mem", str(idx), str(fq)])[1]


@pytest.mark.parametrize("bad", [["--threads", "0"], ["-k", "x"], ["-B", "-1"],
                                 ["--prefetch", "maybe"], ["--mem-cap", "-3"],
                                 ["--batch-size", "0"], ["--bogus"]])
def test_invalid_flags_never_run(files, capsys, tmp_path, bad):
    _, fq, idx = files
    out_path = tmp_path / "o.txt"
    with pytest.raises(SystemExit) as info:
        main(["mem", str(idx), str(fq), "-o", str(out_path)] + bad)
    assert info.value.code == 1
    assert not out_path.exists()
    assert capsys.readouterr().out == ""


def test_bad_fastq_is_format_error(files, tmp_path, capsys):
    _, _, idx = files
    fq = tmp_path / "bad.fq"
    fq.write_text("@r1\nACGT\n+\nII\n")
    code, _, err = run(capsys, ["mem", str(idx), str(fq)])
    assert code == 2 and "r1" in err


def test_corrupt_index_is_format_error(files, tmp_path, capsys):
    _, fq, idx = files
    bad = tmp_path / "bad.idx"
    data = bytearray(idx.read_bytes())
    data[len(data) // 2] ^= 0xFF
    bad.write_bytes(bytes(data))
    (tmp_path / "bad.idx.rec").write_bytes((idx.parent / "ref.idx.rec").read_bytes())
    code, out, err = run(capsys, ["mem", str(bad), str(fq)])
    assert code == 2 and out == "" and err


def test_mem_cap_from_env(files, tmp_path, capsys, monkeypatch):
    fa, fq, idx = files
    monkeypatch.setenv("SEEDMAP_MEM_CAP", "1K")
    code, out, err = run(capsys, ["mem", str(idx), str(fq)])
    assert code == 2 and out == "" and "cap" in err
    code, _, err = run(capsys, ["index", str(fa), str(tmp_path / "x.idx")])
    assert code == 2 and "cap" in err
    # the flag wins over the environment
    assert run(capsys, ["mem", str(idx), str(fq), "--mem-cap", "1G"])[0] == 0


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as info:
        main(["mem", "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out.split("options:", 1)[1]
    for flag, default in (("--threads", "1"), ("--batch-size", "512"), ("--min-seed-len", "19"),
                          ("--max-occ", "500"), ("--match", "1"), ("--mismatch", "4"),
                          ("--gap-open", "6"), ("--gap-extend", "1"), ("--band", "100"),
                          ("--zdrop", "100"), ("--end-bonus", "5"), ("--prefetch", "on"),
                          ("--chunk-bytes", "1000000")):
        assert flag in text
        tail = text.split(flag, 1)[1].split("\n  -", 1)[0]
        assert f"(default: {default})" in " ".join(tail.split()), flag


def test_bench_csv(files, capsys):
    _, fq, idx = files
    code, out, _ = run(capsys, ["bench", str(idx), str(fq), "--repeat", "1"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert tuple(rows[0].keys()) == HEADER
    stages = [r["stage"] for r in rows]
    assert stages == ["SMEM", "SAL", "CHAIN", "BSW_batched", "BSW_scalar"]
    pct = sum(float(r["pct"]) for r in rows if r["pct"])
    assert abs(pct - 100.0) < 0.5
    bsw = rows[3]
    assert 0 < float(bsw["useful_ratio"]) <= 1 and float(bsw["speedup"]) > 0
    assert int(bsw["jobs"]) == int(rows[4]["jobs"]) > 0


def test_console_entry_point(files):
    _, fq, idx = files
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "seedmap", "mem", str(idx), str(fq)],
                          capture_output=True, text=True, env=env, timeout=600)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0].startswith("r0\t")
    proc = subprocess.run([sys.executable, "-m", "seedmap"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage" in proc.stderr
