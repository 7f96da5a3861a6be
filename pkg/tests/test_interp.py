"""Interpreter semantics against independent scalar references."""

import random

import pytest

from conftest import CORPUS, random_memory
from revec import textio
from revec.interp import (
    Buffer, EvalError, MemoryImage, count_dynamic_ops, eval_function,
    width_ratio,
)
from revec.intrinsics import SEMANTICS, eval_intrinsic
from revec.ir import scalar


def run(fn, buffers, args=None, fuel=10 ** 8):
    mem = MemoryImage({k: Buffer(scalar(t), list(d)) for k, (t, d) in buffers.items()})
    return eval_function(fn, args or {}, mem, fuel)


def test_vector_add():
    src = """
func @f(%p: ptr<i32>) {
entry:
  %a = const <4 x i32> [1, 2, 3, 4]
  %b = const <4 x i32> [10, 20, 30, 40]
  %c = add <4 x i32> %a, %b
  %zero = const i64 0
  %q = ptradd %p, %zero
  store <4 x i32> %c, %q
  ret
}
"""
    fn = textio.parse(src).functions[0]
    _, mem, _ = run(fn, {"p": ("i32", [0] * 4)})
    assert mem.buffers["p"].data == [11, 22, 33, 44]


def test_sum_reduction_over_1_to_8():
    src = """
func @sum8(%in: ptr<i32>, %out: ptr<i32>) {
entry:
  %iv0 = const i64 0
  %zero = const <4 x i32> [0, 0, 0, 0]
  %four = const i64 4
  %limit = const i64 8
  br loop
loop:
  %acc = phi [entry: %zero, loop: %upd]
  %iv = phi [entry: %iv0, loop: %iv.next]
  %pin = ptradd %in, %iv
  %x = load <4 x i32> %pin
  %upd = add <4 x i32> %acc, %x
  %iv.next = add i64 %iv, %four
  %cmp = icmp slt i64 %iv.next, %limit
  condbr %cmp, loop, exit
exit:
  %h1 = shuffle %upd, %upd, [2, 3, u, u]
  %t1 = add <4 x i32> %upd, %h1
  %h2 = shuffle %t1, %t1, [1, u, u, u]
  %t2 = add <4 x i32> %t1, %h2
  %pout = ptradd %out, %iv0
  store <4 x i32> %t2, %pout
  ret
}
"""
    fn = textio.parse(src).functions[0]
    _, mem, _ = run(fn, {"in": ("i32", list(range(1, 9))), "out": ("i32", [0] * 4)})
    assert mem.buffers["out"].data[0] == 36


def _sat_u16(v):
    return min(65535, max(0, v))


def test_fig6_kernel_against_scalar_reference():
    """Derived oracle: each input quad yields the saturated +5 sums followed
    by the saturated pair-swapped originals."""
    fn = textio.parse_file(CORPUS / "widen_add_sat.vir").functions[0]
    data = list(range(-8, 248))
    _, mem, trace = run(fn, {"in": ("i32", data), "out": ("u16", [0] * 512)})
    got = mem.buffers["out"].data
    want = []
    for k in range(64):
        quad = data[4 * k:4 * k + 4]
        want.extend(_sat_u16(v + 5) for v in quad)
        want.extend(_sat_u16(quad[i ^ 1]) for i in range(4))
    assert got == want
    # 64 iterations, every vector op at width 128
    summary = count_dynamic_ops(trace)
    assert summary["vector_ops_by_width"] == {128: 320}
    assert trace.block_counts["loop"] == 64


def test_intrinsic_examples():
    assert eval_intrinsic("packus.i32.128",
                          [[70000, -5, 0, 65535], [1, 2, 3, 4]]) == \
        [65535, 0, 0, 65535, 1, 2, 3, 4]
    a = [1, -2, 3, -4, 5, -6, 7, -8]
    b = [100, 200, -300, -400, 32767, 1, 0, -1]
    assert eval_intrinsic("phadd.i16.128", [a, b]) == \
        [-1, -1, -1, -1, 300, -700, -32768, -1]


def _scalar_reference(family, a, b):
    """Per-128-bit-lane scalar models, written independently of the kernels."""
    if family == "packus.i32":
        sat = lambda v: min(65535, max(0, v))
        return [sat(v) for v in a] + [sat(v) for v in b]
    if family == "packss.i16":
        sat = lambda v: min(127, max(-128, v))
        return [sat(v) for v in a] + [sat(v) for v in b]
    if family == "phadd.i16":
        wrap = lambda v: (v + 2 ** 15) % 2 ** 16 - 2 ** 15
        return [wrap(a[i] + a[i + 1]) for i in range(0, 8, 2)] + \
               [wrap(b[i] + b[i + 1]) for i in range(0, 8, 2)]
    if family == "avg.u8":
        return [(x + y + 1) // 2 for x, y in zip(a, b)]
    if family == "mulhi.i16":
        return [(x * y - ((x * y) % 2 ** 16)) // 2 ** 16 for x, y in zip(a, b)]
    if family == "sad.u8":
        return [sum(abs(x - y) for x, y in zip(a[:8], b[:8])),
                sum(abs(x - y) for x, y in zip(a[8:], b[8:]))]
    raise AssertionError(family)


def _rand_operand(rng, vt):
    if vt.elem.signed:
        lo, hi = -(1 << (vt.elem.bits - 1)), (1 << (vt.elem.bits - 1)) - 1
    else:
        lo, hi = 0, (1 << vt.elem.bits) - 1
    return [rng.randint(lo, hi) for _ in range(vt.count)]


def test_lane_decomposition_of_every_family():
    """eval(F.w, X, Y) equals the concatenation over 128-bit lanes of the
    independent scalar reference; this is what makes vertical packing
    sound."""
    rng = random.Random(99)
    for name, d in SEMANTICS.items():
        factor = d.width // 128
        for _ in range(40):
            ops = [_rand_operand(rng, t) for t in d.operand_types]
            got = eval_intrinsic(name, ops)
            want = []
            pers = [t.count // factor for t in d.operand_types]
            for j in range(factor):
                chunk = [lanes[j * per:(j + 1) * per]
                         for lanes, per in zip(ops, pers)]
                want.extend(_scalar_reference(d.family, *chunk))
            assert got == want, name


def test_avg_of_equal_inputs():
    rng = random.Random(3)
    for _ in range(50):
        x = [rng.randint(0, 255) for _ in range(16)]
        assert eval_intrinsic("avg.u8.128", [x, x]) == x


def test_shuffle_undef_lanes_are_zero():
    src = """
func @f(%p: ptr<i32>) {
entry:
  %zero = const i64 0
  %q = ptradd %p, %zero
  %x = load <4 x i32> %q
  %s = shuffle %x, %x, [3, u, 0, u]
  store <4 x i32> %s, %q
  ret
}
"""
    fn = textio.parse(src).functions[0]
    _, mem, _ = run(fn, {"p": ("i32", [7, 8, 9, 10])})
    assert mem.buffers["p"].data == [10, 0, 7, 0]


def test_determinism():
    fn = textio.parse_file(CORPUS / "widen_add_sat.vir").functions[0]
    rng = random.Random(1)
    args, mem = random_memory(fn, rng)
    r1 = eval_function(fn, args, mem)
    r2 = eval_function(fn, args, mem)
    assert r1[0] == r2[0]
    assert r1[1] == r2[1]
    assert r1[2].op_counts == r2[2].op_counts


def test_fuel_exhaustion():
    fn = textio.parse_file(CORPUS / "widen_add_sat.vir").functions[0]
    buffers = {"in": ("i32", [0] * 256), "out": ("u16", [0] * 512)}
    with pytest.raises(EvalError) as e:
        run(fn, buffers, fuel=50)
    assert e.value.kind == "fuel"


def test_out_of_bounds_is_an_error():
    fn = textio.parse_file(CORPUS / "widen_add_sat.vir").functions[0]
    with pytest.raises(EvalError) as e:
        run(fn, {"in": ("i32", [0] * 16), "out": ("u16", [0] * 512)})
    assert e.value.kind == "oob"


def test_unknown_intrinsic_is_an_error():
    src = """
func @f(%p: ptr<i16>) {
entry:
  %zero = const i64 0
  %q = ptradd %p, %zero
  %x = load <8 x i16> %q
  %h = call @phadd.i16.128(%x, %x)
  store <8 x i16> %h, %q
  ret
}
"""
    fn = textio.parse(src).functions[0]
    # sabotage the callee after verification
    for ins in fn.blocks[0].instrs:
        if ins.op == "call":
            ins.callee = "phadd.i16.512"
    with pytest.raises(EvalError) as e:
        run(fn, {"p": ("i16", [0] * 8)})
    assert e.value.kind == "intrinsic"


def test_dynamic_count_summary_and_ratio():
    fn = textio.parse_file(CORPUS / "widen_add_sat.vir").functions[0]
    _, _, trace = run(fn, {"in": ("i32", [0] * 256), "out": ("u16", [0] * 512)})
    s = count_dynamic_ops(trace)
    assert s["vector_total"] == 320
    assert width_ratio(s, 128, 256) is None  # no wide ops yet
    from revec.interp import ExecTrace
    empty = count_dynamic_ops(ExecTrace())
    assert empty["vector_total"] == 0 and empty["vector_ops_by_width"] == {}
