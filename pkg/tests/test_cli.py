"""Driver behavior: pipeline outputs, exit codes, formatting, checking."""

import json
import subprocess
import sys

import pytest

from conftest import CORPUS, snapshot
from revec.cli import (
    EXIT_CHECK, EXIT_NOFILE, EXIT_PARSE, EXIT_VERIFY, PipelineConfig,
    check_equivalence, main, run_pipeline,
)
from revec import textio


def cli(*argv):
    return main(list(argv))


def test_run_fig6_emits_wide_ir_and_stats(tmp_path, capsys):
    rc = cli("run", "--target", "gen256", "--emit", "both",
             str(CORPUS / "widen_add_sat.vir"))
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["schema_version"] == 1
    assert "packus.i32.256" in doc["ir"]
    fn = doc["functions"][0]
    assert fn["unroll_factor"] == 2
    assert sum(fn["packs_by_kind"].values()) == 5
    assert fn["applied_any"]


def test_gen128_makes_no_transformations(corpus_files, capsys):
    for f in corpus_files:
        rc = cli("run", "--target", "gen128", "--emit", "stats", str(f))
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        for fn in doc["functions"]:
            assert not fn["applied_any"], f


def test_exit_codes(tmp_path, capsys):
    assert cli("run", str(tmp_path / "missing.vir")) == EXIT_NOFILE

    bad = tmp_path / "bad.vir"
    bad.write_text("func @f( {")
    assert cli("run", str(bad)) == EXIT_PARSE

    unverifiable = tmp_path / "unverifiable.vir"
    unverifiable.write_text("""
func @f(%p: ptr<i32>) {
entry:
  %a = load <4 x i32> %p
  %b = load <4 x i32> %p
  %s = shuffle %a, %b, [0, 99]
  ret
}
""")
    assert cli("run", str(unverifiable)) == EXIT_VERIFY
    capsys.readouterr()


def test_fmt_is_canonical_and_idempotent(tmp_path, capsys):
    rc = cli("fmt", str(CORPUS / "sum_i32.vir"))
    assert rc == 0
    once = capsys.readouterr().out
    f2 = tmp_path / "canon.vir"
    f2.write_text(once)
    rc = cli("fmt", str(f2))
    assert rc == 0
    assert capsys.readouterr().out == once


def test_check_passes_and_reports(capsys):
    rc = cli("check", "--target", "gen256", "--check", "5",
             str(CORPUS / "sum_i32.vir"))
    out = capsys.readouterr().out
    assert rc == 0
    assert "PASS @sum_i32 (5 inputs)" in out


def test_check_requires_at_least_one_input():
    cfg = PipelineConfig(target="gen256", input_path=str(CORPUS / "sum_i32.vir"))
    module, originals, _ = run_pipeline(cfg)
    with pytest.raises(ValueError):
        check_equivalence(originals["sum_i32"], module.functions[0], 0, seed=0)


def test_negative_control_fails_with_echoed_input():
    cfg = PipelineConfig(target="gen256", input_path=str(CORPUS / "sum_i32.vir"))
    module, originals, _ = run_pipeline(cfg)
    fn = module.functions[0]
    sabotaged = snapshot(fn)
    for blk in sabotaged.blocks:
        for ins in blk.instrs:
            if ins.op == "const" and isinstance(ins.payload, list) and \
                    not ins.type.elem.is_float and ins.type.count >= 4:
                ins.payload = [lane if lane is None else lane + 1
                               for lane in ins.payload]
                break
    res = check_equivalence(originals["sum_i32"], sabotaged, 20, seed=0)
    assert res["verdict"] == "FAIL"
    mm = res["mismatch"]
    assert mm["input_index"] == 0
    assert mm["buffer"] == "out"
    assert "buffers" in mm and "in" in mm["buffers"]  # the input is echoed
    assert mm["before"] != mm["after"]


def test_costs_override_flips_gap_copy(tmp_path, capsys):
    costs = tmp_path / "zero_gather.costs"
    costs.write_text("gather * 0\n")
    rc = cli("run", "--target", "gen256", "--emit", "stats",
             str(CORPUS / "gap_copy.vir"))
    doc = json.loads(capsys.readouterr().out)
    assert not doc["functions"][0]["applied_any"]
    rc = cli("run", "--target", "gen256", "--emit", "stats",
             "--costs", str(costs), str(CORPUS / "gap_copy.vir"))
    doc = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert doc["functions"][0]["applied_any"]


def test_stats_are_deterministic(capsys):
    rc = cli("run", "--target", "gen256", "--emit", "stats",
             str(CORPUS / "two_chains.vir"))
    first = capsys.readouterr().out
    rc = cli("run", "--target", "gen256", "--emit", "stats",
             str(CORPUS / "two_chains.vir"))
    assert capsys.readouterr().out == first and rc == 0


def test_console_entry_point_subprocess():
    proc = subprocess.run(
        [sys.executable, "-m", "revec.cli", "check", "--target", "gen256",
         "--check", "3", str(CORPUS / "mulhi_scale.vir")],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "PASS @mulhi_scale" in proc.stdout


def test_check_exit_code_on_failure(tmp_path):
    # a kernel checked against itself passes; force a FAIL through a stub
    # pipeline by checking a file whose transform is sabotaged is covered
    # above at the API level; here verify EXIT_CHECK is distinct
    assert EXIT_CHECK == 4


def test_imap_flag_roundtrip(tmp_path, capsys):
    db = tmp_path / "imap.txt"
    rc = cli("discover-conversions", "--cases", "50", "-o", str(db))
    assert rc == 0
    rc = cli("run", "--target", "gen256", "--emit", "stats",
             "--imap", str(db), str(CORPUS / "widen_add_sat.vir"))
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["functions"][0]["applied_any"]
