"""Pure-Python lane kernels.

Per-lane arithmetic for the interpreter: wraparound two's-complement binops,
comparisons, shuffles, and the 128-bit reference procedures of the seeded
intrinsic families. Lane values are canonical Python ints: signed lanes in
[-2^(b-1), 2^(b-1)), unsigned lanes in [0, 2^b). Floats are rounded to
binary32 after every operation.

revec.kernels prefers the compiled twin (_kernels_c) and falls back to this
module; both must stay behaviorally identical (tests/test_kernels.py checks
parity).
"""

import math
import struct

BACKEND = "python"

OP_ADD = 0
OP_SUB = 1
OP_MUL = 2
OP_AND = 3
OP_OR = 4
OP_XOR = 5
OP_SHL = 6
OP_LSHR = 7
OP_ASHR = 8

PRED_EQ = 0
PRED_NE = 1
PRED_SLT = 2
PRED_SLE = 3
PRED_SGT = 4
PRED_SGE = 5
PRED_ULT = 6
PRED_ULE = 7
PRED_UGT = 8
PRED_UGE = 9


def canon_int(v, bits, signed):
    """Reduce an arbitrary int to the canonical lane value of the type."""
    v &= (1 << bits) - 1
    if signed and v >= 1 << (bits - 1):
        v -= 1 << bits
    return v


def f32_round(x):
    try:
        return struct.unpack("<f", struct.pack("<f", x))[0]
    except OverflowError:
        return math.inf if x > 0 else -math.inf


def binop_int(op, a, b, bits, signed):
    mask = (1 << bits) - 1
    half = 1 << (bits - 1)
    out = []
    for x, y in zip(a, b):
        if op == OP_ADD:
            r = x + y
        elif op == OP_SUB:
            r = x - y
        elif op == OP_MUL:
            r = x * y
        elif op == OP_AND:
            r = x & y
        elif op == OP_OR:
            r = x | y
        elif op == OP_XOR:
            r = x ^ y
        else:
            ux = x & mask
            amt = y
            if amt < 0 or amt >= bits:
                if op == OP_ASHR:
                    r = -1 if ux >= half else 0
                else:
                    r = 0
            elif op == OP_SHL:
                r = ux << amt
            elif op == OP_LSHR:
                r = ux >> amt
            else:  # OP_ASHR
                sx = ux - (1 << bits) if ux >= half else ux
                r = sx >> amt
        r &= mask
        if signed and r >= half:
            r -= 1 << bits
        out.append(r)
    return out


def binop_f32(op, a, b):
    out = []
    for x, y in zip(a, b):
        if op == OP_ADD:
            r = x + y
        elif op == OP_SUB:
            r = x - y
        elif op == OP_MUL:
            r = x * y
        else:
            raise ValueError("unsupported f32 op %d" % op)
        out.append(f32_round(r))
    return out


def icmp_int(pred, a, b, bits, signed, true_lane):
    """Lane-wise compare; lanes of the result are true_lane (all ones in the
    operand type) or 0. Operands arrive canonical, so s/u preds reinterpret
    the bit pattern."""
    mask = (1 << bits) - 1
    half = 1 << (bits - 1)
    out = []
    for x, y in zip(a, b):
        ux, uy = x & mask, y & mask
        sx = ux - (1 << bits) if ux >= half else ux
        sy = uy - (1 << bits) if uy >= half else uy
        if pred == PRED_EQ:
            t = ux == uy
        elif pred == PRED_NE:
            t = ux != uy
        elif pred == PRED_SLT:
            t = sx < sy
        elif pred == PRED_SLE:
            t = sx <= sy
        elif pred == PRED_SGT:
            t = sx > sy
        elif pred == PRED_SGE:
            t = sx >= sy
        elif pred == PRED_ULT:
            t = ux < uy
        elif pred == PRED_ULE:
            t = ux <= uy
        elif pred == PRED_UGT:
            t = ux > uy
        else:
            t = ux >= uy
        out.append(true_lane if t else 0)
    return out


def select_lanes(m, a, b):
    return [x if c != 0 else y for c, x, y in zip(m, a, b)]


def shuffle_lanes(a, b, mask, zero):
    """mask entries index concat(a, b); -1 is the undef sentinel and yields
    the fixed zero lane of the element type."""
    la = len(a)
    out = []
    for e in mask:
        if e < 0:
            out.append(zero)
        elif e < la:
            out.append(a[e])
        else:
            out.append(b[e - la])
    return out


def _clamp(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def packus_i32(a, b):
    """4+4 i32 lanes -> 8 u16 lanes, unsigned saturation."""
    return [_clamp(v, 0, 65535) for v in a] + [_clamp(v, 0, 65535) for v in b]


def packss_i16(a, b):
    """8+8 i16 lanes -> 16 i8 lanes, signed saturation."""
    return [_clamp(v, -128, 127) for v in a] + [_clamp(v, -128, 127) for v in b]


def phadd_i16(a, b):
    """8+8 i16 lanes -> 8 i16 lanes of wrapping pairwise sums."""
    out = []
    for lanes in (a, b):
        for i in range(0, 8, 2):
            out.append(canon_int(lanes[i] + lanes[i + 1], 16, True))
    return out


def avg_u8(a, b):
    """16+16 u8 lanes -> 16 u8 rounding averages."""
    return [(x + y + 1) >> 1 for x, y in zip(a, b)]


def mulhi_i16(a, b):
    """8+8 i16 lanes -> 8 i16 lanes: high half of the signed 32-bit product."""
    return [(x * y) >> 16 for x, y in zip(a, b)]


def sad_u8(a, b):
    """16+16 u8 lanes -> 2 u64 lanes: sum of absolute differences per 8-byte
    group."""
    out = []
    for g in (0, 8):
        s = 0
        for i in range(g, g + 8):
            d = a[i] - b[i]
            s += d if d >= 0 else -d
        out.append(s)
    return out
