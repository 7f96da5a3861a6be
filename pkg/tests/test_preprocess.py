"""Loop discovery, store chains, unroll factors, unrolling, reduction
splitting, and preprocessing oracle equivalence."""

import math
import random

import pytest

from conftest import assert_equivalent, parse_corpus, snapshot, target
from revec import textio
from revec.interp import Buffer, MemoryImage, eval_function
from revec.ir import scalar, verify
from revec.preprocess import (
    analyze_store_chains, compute_unroll_factor, find_inner_loops,
    find_reduction_chains, identity_lane, preprocess, split_reductions,
    unroll_loop,
)


def one_loop(fn):
    loops = find_inner_loops(fn)
    assert len(loops) == 1
    return loops[0]


def test_fig6_loop_shape():
    fn = parse_corpus("widen_add_sat.vir").functions[0]
    loop = one_loop(fn)
    assert loop.header == loop.latch == "loop"
    assert loop.trip_count == 64
    assert loop.step == 4  # i32 elements per iteration


def test_u16_kernel_steps_eight_elements():
    fn = parse_corpus("phadd_bias.vir").functions[0]
    assert one_loop(fn).step == 8


def test_straight_line_has_no_loops():
    fn = parse_corpus("gap_copy.vir").functions[0]
    assert find_inner_loops(fn) == []


NESTED_SRC = """
func @nested(%in: ptr<i32>, %out: ptr<i32>) {
entry:
  %zero = const i64 0
  %four = const i64 4
  %limit = const i64 16
  br outer
outer:
  %oi = phi [entry: %zero, latchck: %oi.next]
  br inner
inner:
  %ii = phi [outer: %zero, inner: %ii.next]
  %p = ptradd %in, %ii
  %x = load <4 x i32> %p
  %q = ptradd %out, %ii
  store <4 x i32> %x, %q
  %ii.next = add i64 %ii, %four
  %c1 = icmp slt i64 %ii.next, %limit
  condbr %c1, inner, latchck
latchck:
  %oi.next = add i64 %oi, %four
  %c2 = icmp slt i64 %oi.next, %limit
  condbr %c2, outer, exit
exit:
  ret
}
"""


def test_only_innermost_loops_returned():
    fn = textio.parse(NESTED_SRC).functions[0]
    loops = find_inner_loops(fn)
    assert [lp.header for lp in loops] == ["inner"]


def test_store_chain_of_one_store():
    fn = parse_corpus("widen_add_sat.vir").functions[0]
    chains = analyze_store_chains(fn, one_loop(fn))
    assert len(chains) == 1
    ch = chains[0]
    assert ch.chain_width == 128 and len(ch.stores) == 1
    assert ch.consecutive_across_iterations


def test_adjacent_store_pair_makes_one_chain():
    fn = parse_corpus("interleave_u16.vir").functions[0]
    chains = analyze_store_chains(fn, one_loop(fn))
    assert len(chains) == 1
    ch = chains[0]
    assert len(ch.stores) == 2 and ch.chain_width == 256
    assert ch.consecutive_across_iterations


def test_two_bases_make_two_chains():
    fn = parse_corpus("two_chains.vir").functions[0]
    chains = analyze_store_chains(fn, one_loop(fn))
    assert len(chains) == 2
    assert {ch.base for ch in chains} == {"mirror", "shifted"}


UF_TABLE_SRC = {
    128: """
func @scw128(%in: ptr<i16>, %out: ptr<i16>) {
entry:
  %zero = const i64 0
  %eight = const i64 8
  %limit = const i64 64
  br loop
loop:
  %iv = phi [entry: %zero, loop: %iv.next]
  %p = ptradd %in, %iv
  %x = load <8 x i16> %p
  %q = ptradd %out, %iv
  store <8 x i16> %x, %q
  %iv.next = add i64 %iv, %eight
  %cmp = icmp slt i64 %iv.next, %limit
  condbr %cmp, loop, exit
exit:
  ret
}
""",
    256: """
func @scw256(%in: ptr<i16>, %out: ptr<i16>) {
entry:
  %zero = const i64 0
  %eight = const i64 8
  %sixteen = const i64 16
  %limit = const i64 64
  br loop
loop:
  %iv = phi [entry: %zero, loop: %iv.next]
  %p0 = ptradd %in, %iv
  %x = load <8 x i16> %p0
  %q0 = ptradd %out, %iv
  store <8 x i16> %x, %q0
  %iv8 = add i64 %iv, %eight
  %q1 = ptradd %out, %iv8
  store <8 x i16> %x, %q1
  %iv.next = add i64 %iv, %sixteen
  %cmp = icmp slt i64 %iv.next, %limit
  condbr %cmp, loop, exit
exit:
  ret
}
""",
}


@pytest.mark.parametrize("vw,scw,uf", [
    (128, 128, 1), (128, 256, 1),
    (256, 128, 2), (256, 256, 1),
    (512, 128, 4), (512, 256, 2),
])
def test_unroll_factor_table(vw, scw, uf):
    fn = textio.parse(UF_TABLE_SRC[scw]).functions[0]
    loop = one_loop(fn)
    assert compute_unroll_factor(fn, loop, target(vw)) == uf
    if uf > 1:
        # uf is the least positive integer with uf*SCW a multiple of VW
        assert (uf * scw) % vw == 0
        assert all((k * scw) % vw != 0 for k in range(1, uf))
        assert uf == math.lcm(vw, scw) // scw


def test_non_consecutive_chain_gives_uf_1():
    # stores advance 16 elements per iteration but write only 8: the chain
    # does not extend across iterations
    src = UF_TABLE_SRC[128].replace("%iv.next = add i64 %iv, %eight",
                                    "%sixteen = const i64 16\n  %iv.next = add i64 %iv, %sixteen")
    fn = textio.parse(src).functions[0]
    loop = one_loop(fn)
    chains = analyze_store_chains(fn, loop)
    assert not chains[0].consecutive_across_iterations
    assert compute_unroll_factor(fn, loop, target(256)) == 1


def test_unroll_divisible_trip():
    fn = parse_corpus("widen_add_sat.vir").functions[0]
    orig = snapshot(fn)
    loop = one_loop(fn)
    applied, diag = unroll_loop(fn, loop, 2)
    assert applied and diag is None
    assert verify(fn) == []
    stores = [i for i in fn.block("loop").instrs if i.op == "store"]
    assert len(stores) == 2
    assert len(fn.blocks) == 3  # no remainder block
    assert_equivalent(orig, fn, trials=20)
    # 32 main iterations
    mem = MemoryImage({"in": Buffer(scalar("i32"), [0] * 256),
                       "out": Buffer(scalar("u16"), [0] * 512)})
    _, _, trace = eval_function(fn, {}, mem)
    assert trace.block_counts["loop"] == 32


def test_unroll_with_remainder():
    fn = parse_corpus("two_chains.vir").functions[0]  # trip 33
    orig = snapshot(fn)
    loop = one_loop(fn)
    applied, _ = unroll_loop(fn, loop, 2)
    assert applied
    assert verify(fn) == []
    labels = [b.label for b in fn.blocks]
    assert "loop.rem" in labels
    mem = MemoryImage({"in": Buffer(scalar("i32"), [0] * 132),
                       "mirror": Buffer(scalar("i32"), [0] * 132),
                       "shifted": Buffer(scalar("i32"), [0] * 132)})
    _, _, trace = eval_function(fn, {}, mem)
    assert trace.block_counts["loop"] == 16      # 33 // 2
    assert trace.block_counts["loop.rem"] == 1   # 33 % 2
    assert_equivalent(orig, fn, trials=20)


def test_unroll_refuses_uf_1_and_unknown_trip():
    fn = parse_corpus("widen_add_sat.vir").functions[0]
    loop = one_loop(fn)
    applied, diag = unroll_loop(fn, loop, 1)
    assert not applied and "unroll factor" in diag

    # unknown trip count: limit is a parameter
    src = UF_TABLE_SRC[128].replace("(%in: ptr<i16>, %out: ptr<i16>)",
                                    "(%in: ptr<i16>, %out: ptr<i16>, %n: i64)")
    src = src.replace("%limit = const i64 64\n", "")
    src = src.replace("%limit", "%n")
    fn = textio.parse(src).functions[0]
    loop = one_loop(fn)
    assert loop.trip_count is None
    applied, diag = unroll_loop(fn, loop, 2)
    assert not applied and "compile-time constant" in diag


def test_split_sum_by_two():
    fn = parse_corpus("sum_i32.vir").functions[0]
    orig = snapshot(fn)
    loop = one_loop(fn)
    unroll_loop(fn, loop, 2)
    loop = one_loop(fn)
    assert split_reductions(fn, loop, 2) == 1
    assert verify(fn) == []
    phis = [i for i in fn.block("loop").phis() if i.type.__class__.__name__ == "Vec"]
    assert len(phis) == 2
    # epilogue folds the accumulators with the same opcode
    exit_adds = [i for i in fn.block("exit").instrs if i.op == "add"]
    assert exit_adds, "missing epilogue fold"
    assert_equivalent(orig, fn, trials=30)


def test_split_max_by_four_uses_min_identity_and_tree():
    fn = parse_corpus("max_reduce_i16.vir").functions[0]
    orig = snapshot(fn)
    loop = one_loop(fn)
    unroll_loop(fn, loop, 4)
    loop = one_loop(fn)
    assert split_reductions(fn, loop, 4) == 1
    assert verify(fn) == []
    # three fresh accumulators seeded with the smallest i16
    idents = [i for i in fn.block("entry").instrs
              if i.op == "const" and isinstance(i.payload, list)
              and i.payload == [-32768] * 8]
    assert len(idents) >= 3
    # balanced fold: 3 icmp+select pairs in the exit block
    sels = [i for i in fn.block("exit").instrs if i.op == "select"]
    assert len(sels) == 3
    assert_equivalent(orig, fn, trials=30)


def test_identity_table():
    i16 = scalar("i16")
    u8 = scalar("u8")
    assert identity_lane("add", i16) == 0
    assert identity_lane("xor", i16) == 0
    assert identity_lane("and", i16) == -1
    assert identity_lane("and", u8) == 255
    assert identity_lane("smax", i16) == -32768
    assert identity_lane("smin", i16) == 32767
    assert identity_lane("umax", u8) == 0
    assert identity_lane("umin", u8) == 255


def test_split_refused_when_accumulator_read_in_loop():
    src = """
func @f(%in: ptr<i32>, %out: ptr<i32>) {
entry:
  %iv0 = const i64 0
  %zero = const <4 x i32> [0, 0, 0, 0]
  %four = const i64 4
  %limit = const i64 32
  br loop
loop:
  %acc = phi [entry: %zero, loop: %upd]
  %iv = phi [entry: %iv0, loop: %iv.next]
  %p = ptradd %in, %iv
  %x = load <4 x i32> %p
  %upd = add <4 x i32> %acc, %x
  %q = ptradd %out, %iv
  store <4 x i32> %acc, %q
  %iv.next = add i64 %iv, %four
  %cmp = icmp slt i64 %iv.next, %limit
  condbr %cmp, loop, exit
exit:
  ret
}
"""
    fn = textio.parse(src).functions[0]
    loop = one_loop(fn)
    assert find_reduction_chains(fn, loop) == []
    unroll_loop(fn, loop, 2)
    assert split_reductions(fn, one_loop(fn), 2) == 0


def test_fadd_requires_reassoc():
    fn = parse_corpus("fadd_reduce.vir").functions[0]
    fn.reassoc = False
    loop = one_loop(fn)
    assert find_reduction_chains(fn, loop) == []
    fn.reassoc = True
    assert len(find_reduction_chains(fn, loop)) == 1


def test_preprocess_is_oracle_equivalent():
    rng = random.Random(0)
    for name in ("widen_add_sat.vir", "sum_i32.vir", "two_chains.vir"):
        for bits in (256, 512):
            fn = parse_corpus(name).functions[0]
            orig = snapshot(fn)
            preprocess(fn, target(bits))
            assert verify(fn) == []
            assert_equivalent(orig, fn, trials=25, seed=rng.randrange(1 << 30))


def test_split_updates_count_matches_uf():
    fn = parse_corpus("sad_accumulate.vir").functions[0]
    loop = one_loop(fn)
    unroll_loop(fn, loop, 4)
    loop = one_loop(fn)
    chains = find_reduction_chains(fn, loop)
    assert len(chains) == 1 and len(chains[0].links) == 4
