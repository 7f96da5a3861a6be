"""Structural verification and the rewriting utilities."""

import pytest

from conftest import parse_corpus
from revec import textio
from revec.ir import IRError, erase_dead, replace_all_uses, verify
from revec.textio import VerifyError


def parse_one(src):
    return textio.parse(src).functions[0]


def test_corpus_verifies(corpus_files):
    for f in corpus_files:
        mod = textio.parse_file(f)
        for fn in mod.functions:
            assert verify(fn) == []


def test_mask_index_out_of_range():
    src = """
func @f(%p: ptr<i16>) {
entry:
  %x = load <8 x i16> %p
  %y = load <8 x i16> %p
  %s = shuffle %x, %y, [0, 16]
  ret
}
"""
    with pytest.raises(VerifyError) as e:
        textio.parse(src)
    assert "mask index out of range" in str(e.value)


def test_phi_missing_predecessor_label():
    src = """
func @f(%p: ptr<i32>, %n: i64) {
entry:
  %zero = const i64 0
  %cnd = icmp slt i64 %zero, %n
  condbr %cnd, a, b
a:
  br join
b:
  br join
join:
  %m = phi [a: %zero]
  ret
}
"""
    with pytest.raises(VerifyError) as e:
        textio.parse(src)
    assert "do not match predecessors" in str(e.value)


def test_store_result_and_block_shape():
    # hand-built: a block without terminator
    fn = parse_corpus("sum_i32.vir").functions[0]
    fn.blocks[0].instrs.pop()  # drop `br loop`
    diags = verify(fn)
    assert any("missing terminator" in d for d in diags)


REPLACE_SRC = """
func @f(%p: ptr<i32>) {
entry:
  %a = load <4 x i32> %p
  %b = add <4 x i32> %a, %a
  %c = add <4 x i32> %b, %a
  store <4 x i32> %c, %p
  ret
}
"""


def test_replace_all_uses_rewires():
    fn = parse_one(REPLACE_SRC)
    replace_all_uses(fn, "b", "a")
    uses = fn.uses()
    assert "b" not in uses
    assert verify(fn) == []


def test_replace_all_uses_identity_when_unused():
    fn = parse_one(REPLACE_SRC)
    replace_all_uses(fn, "c", "b")  # the store now uses %b; %c is dead
    snap = textio.print_function(fn)
    replace_all_uses(fn, "c", "b")  # zero uses of %c: nothing changes
    assert textio.print_function(fn) == snap
    assert verify(fn) == []


def test_replace_all_uses_type_mismatch():
    fn = parse_one(REPLACE_SRC)
    with pytest.raises(IRError):
        replace_all_uses(fn, "b", "p")


def test_replace_all_uses_dominance_violation():
    src = """
func @f(%p: ptr<i32>) {
entry:
  %a = load <4 x i32> %p
  %b = add <4 x i32> %a, %a
  %c = add <4 x i32> %b, %b
  store <4 x i32> %a, %p
  ret
}
"""
    fn = parse_one(src)
    # %c is defined after the use of %b in %c itself; replacing uses of %a
    # (used by %b, earlier) with %c must fail
    with pytest.raises(IRError):
        replace_all_uses(fn, "a", "c")


def test_erase_dead_removes_unused_const():
    src = """
func @f(%p: ptr<i32>) {
entry:
  %k = const <4 x i32> [1, 2, 3, 4]
  %x = load <4 x i32> %p
  store <4 x i32> %x, %p
  ret
}
"""
    fn = parse_one(src)
    erase_dead(fn)
    assert all(ins.name != "k" for ins in fn.blocks[0].instrs)
    assert verify(fn) == []


def test_erase_dead_keeps_stores():
    src = """
func @f(%p: ptr<i32>) {
entry:
  %x = load <4 x i32> %p
  store <4 x i32> %x, %p
  ret
}
"""
    fn = parse_one(src)
    erase_dead(fn)
    assert sum(1 for ins in fn.blocks[0].instrs if ins.op == "store") == 1


def test_erase_dead_chain_in_one_call():
    src = """
func @f(%p: ptr<i32>) {
entry:
  %a = load <4 x i32> %p
  %b = add <4 x i32> %a, %a
  %c = add <4 x i32> %b, %b
  ret
}
"""
    fn = parse_one(src)
    erase_dead(fn)
    assert [ins.op for ins in fn.blocks[0].instrs] == ["ret"]


def test_erase_dead_idempotent(corpus_files):
    for f in corpus_files:
        fn = textio.parse_file(f).functions[0]
        erase_dead(fn)
        once = textio.print_function(fn)
        erase_dead(fn)
        assert textio.print_function(fn) == once
