# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled lane kernels; behavioral twin of revec._kernels_py.

Integer lanes are canonical Python ints (signed in [-2^(b-1), 2^(b-1)),
unsigned in [0, 2^b)); arithmetic runs on C uint64 with explicit masking so
wraparound matches the pure backend bit for bit.
"""

BACKEND = "cython"

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

cdef unsigned long long ALL64 = 0xFFFFFFFFFFFFFFFFULL


cdef inline unsigned long long _mask_for(int bits):
    if bits >= 64:
        return ALL64
    return ((<unsigned long long>1) << bits) - 1


cdef inline unsigned long long _to_bits(object v, unsigned long long mask):
    # Canonical lanes fit in int64 (signed) or uint64 (unsigned).
    cdef long long sv
    if v < 0:
        sv = v
        return (<unsigned long long>sv) & mask
    return (<unsigned long long>v) & mask


cdef inline object _from_bits(unsigned long long r, unsigned long long half,
                              bint signed, int bits):
    cdef long long out
    if signed and (r & half):
        if bits >= 64:
            out = <long long>r
        else:
            out = <long long>r - (<long long>half << 1)
        return out
    return r


def canon_int(v, int bits, bint signed):
    cdef unsigned long long half = (<unsigned long long>1) << (bits - 1)
    masked = v & (((<object>1) << bits) - 1)  # arbitrary-precision input
    cdef unsigned long long u = <unsigned long long>masked
    return _from_bits(u, half, signed, bits)


def f32_round(x):
    cdef float f = <double>x
    return <double>f


def binop_int(int op, list a, list b, int bits, bint signed):
    cdef unsigned long long mask = _mask_for(bits)
    cdef unsigned long long half = (<unsigned long long>1) << (bits - 1)
    cdef Py_ssize_t i, n = len(a)
    cdef unsigned long long ux, uy, r
    cdef long long amt
    cdef list out = [0] * n
    for i in range(n):
        ux = _to_bits(a[i], mask)
        uy = _to_bits(b[i], mask)
        if op == OP_ADD:
            r = (ux + uy) & mask
        elif op == OP_SUB:
            r = (ux - uy) & mask
        elif op == OP_MUL:
            r = (ux * uy) & mask
        elif op == OP_AND:
            r = ux & uy
        elif op == OP_OR:
            r = ux | uy
        elif op == OP_XOR:
            r = ux ^ uy
        else:
            amt = b[i]
            if amt < 0 or amt >= bits:
                if op == OP_ASHR and (ux & half):
                    r = mask
                else:
                    r = 0
            elif op == OP_SHL:
                r = (ux << amt) & mask
            elif op == OP_LSHR:
                r = ux >> amt
            else:  # OP_ASHR
                if ux & half:
                    if bits >= 64:
                        r = <unsigned long long>((<long long>ux) >> amt)
                    else:
                        r = ((ux >> amt) | (mask & ~(mask >> amt))) & mask
                else:
                    r = ux >> amt
        out[i] = _from_bits(r, half, signed, bits)
    return out


def binop_f32(int op, list a, list b):
    cdef Py_ssize_t i, n = len(a)
    cdef double x, y
    cdef float f
    cdef list out = [0.0] * n
    for i in range(n):
        x = a[i]
        y = b[i]
        if op == OP_ADD:
            f = <float>(x + y)
        elif op == OP_SUB:
            f = <float>(x - y)
        elif op == OP_MUL:
            f = <float>(x * y)
        else:
            raise ValueError("unsupported f32 op %d" % op)
        out[i] = <double>f
    return out


def icmp_int(int pred, list a, list b, int bits, bint signed, true_lane):
    cdef unsigned long long mask = _mask_for(bits)
    cdef unsigned long long half = (<unsigned long long>1) << (bits - 1)
    cdef Py_ssize_t i, n = len(a)
    cdef unsigned long long ux, uy
    cdef long long sx, sy
    cdef bint t
    cdef list out = [0] * n
    for i in range(n):
        ux = _to_bits(a[i], mask)
        uy = _to_bits(b[i], mask)
        if ux & half:
            sx = <long long>ux if bits >= 64 else <long long>ux - (<long long>half << 1)
        else:
            sx = <long long>ux
        if uy & half:
            sy = <long long>uy if bits >= 64 else <long long>uy - (<long long>half << 1)
        else:
            sy = <long long>uy
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
        out[i] = true_lane if t else 0
    return out


def select_lanes(list m, list a, list b):
    cdef Py_ssize_t i, n = len(m)
    cdef list out = [None] * n
    for i in range(n):
        out[i] = a[i] if m[i] != 0 else b[i]
    return out


def shuffle_lanes(list a, list b, mask, zero):
    cdef Py_ssize_t la = len(a)
    cdef Py_ssize_t n = len(mask)
    cdef Py_ssize_t i
    cdef long long e
    cdef list out = [None] * n
    for i in range(n):
        e = mask[i]
        if e < 0:
            out[i] = zero
        elif e < la:
            out[i] = a[e]
        else:
            out[i] = b[e - la]
    return out


cdef inline long long _clamp(long long v, long long lo, long long hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def packus_i32(list a, list b):
    cdef Py_ssize_t i
    cdef list out = [0] * 8
    for i in range(4):
        out[i] = _clamp(a[i], 0, 65535)
        out[i + 4] = _clamp(b[i], 0, 65535)
    return out


def packss_i16(list a, list b):
    cdef Py_ssize_t i
    cdef list out = [0] * 16
    for i in range(8):
        out[i] = _clamp(a[i], -128, 127)
        out[i + 8] = _clamp(b[i], -128, 127)
    return out


def phadd_i16(list a, list b):
    cdef Py_ssize_t i
    cdef long long s
    cdef list out = [0] * 8
    for i in range(4):
        s = (<long long>a[2 * i]) + (<long long>a[2 * i + 1])
        out[i] = ((s + 32768) & 0xFFFF) - 32768
        s = (<long long>b[2 * i]) + (<long long>b[2 * i + 1])
        out[i + 4] = ((s + 32768) & 0xFFFF) - 32768
    return out


def avg_u8(list a, list b):
    cdef Py_ssize_t i
    cdef list out = [0] * 16
    for i in range(16):
        out[i] = ((<long long>a[i]) + (<long long>b[i]) + 1) >> 1
    return out


def mulhi_i16(list a, list b):
    cdef Py_ssize_t i
    cdef list out = [0] * 8
    for i in range(8):
        out[i] = ((<long long>a[i]) * (<long long>b[i])) >> 16
    return out


def sad_u8(list a, list b):
    cdef Py_ssize_t i
    cdef long long d, s0 = 0, s1 = 0
    for i in range(8):
        d = (<long long>a[i]) - (<long long>b[i])
        s0 += d if d >= 0 else -d
        d = (<long long>a[i + 8]) - (<long long>b[i + 8])
        s1 += d if d >= 0 else -d
    return [s0, s1]
