"""Reference interpreter: executable semantics for every opcode and seeded
intrinsic. Ground truth for equivalence checking, conversion fuzzing, and
dynamic operation counts.

Vector values are lists of canonical lane values; pointers are
(parameter name, element offset) pairs; arithmetic wraps in two's
complement. Undef shuffle/const lanes evaluate to a fixed zero.
"""

from dataclasses import dataclass, field

from revec import kernels
from revec.ir import BINOPS, Ptr, Scalar, Vec, opcode_class
from revec.intrinsics import IntrinsicError, eval_intrinsic

DEFAULT_FUEL = 10 ** 8

_BINOP_IDS = {
    "add": kernels.OP_ADD, "sub": kernels.OP_SUB, "mul": kernels.OP_MUL,
    "and": kernels.OP_AND, "or": kernels.OP_OR, "xor": kernels.OP_XOR,
    "shl": kernels.OP_SHL, "lshr": kernels.OP_LSHR, "ashr": kernels.OP_ASHR,
}

_PRED_IDS = {
    "eq": kernels.PRED_EQ, "ne": kernels.PRED_NE,
    "slt": kernels.PRED_SLT, "sle": kernels.PRED_SLE,
    "sgt": kernels.PRED_SGT, "sge": kernels.PRED_SGE,
    "ult": kernels.PRED_ULT, "ule": kernels.PRED_ULE,
    "ugt": kernels.PRED_UGT, "uge": kernels.PRED_UGE,
}


class EvalError(Exception):
    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind  # 'oob' | 'fuel' | 'intrinsic' | 'args' | 'trap'


@dataclass
class Buffer:
    elem: Scalar
    data: list

    def copy(self):
        return Buffer(self.elem, list(self.data))


@dataclass
class MemoryImage:
    buffers: dict = field(default_factory=dict)   # param name -> Buffer

    def copy(self):
        return MemoryImage({k: b.copy() for k, b in self.buffers.items()})

    def __eq__(self, other):
        if set(self.buffers) != set(other.buffers):
            return False
        return all(self.buffers[k].elem == other.buffers[k].elem
                   and self.buffers[k].data == other.buffers[k].data
                   for k in self.buffers)


@dataclass
class ExecTrace:
    op_counts: dict = field(default_factory=dict)   # (class, width bits) -> count
    total: int = 0
    block_counts: dict = field(default_factory=dict)


def _true_lane(elem):
    return -1 if elem.signed else (1 << elem.bits) - 1


def _const_value(ins):
    t = ins.type
    if isinstance(t, Vec):
        zero = 0.0 if t.elem.is_float else 0
        return [zero if lane is None else lane for lane in ins.payload]
    return ins.payload


def eval_function(fn, args, memory, fuel=DEFAULT_FUEL):
    """Run fn to completion. args maps scalar parameter names to values;
    memory supplies a Buffer per pointer parameter. Returns
    (return value or None, final MemoryImage, ExecTrace)."""
    env = {}
    for pname, ptype in fn.params:
        if isinstance(ptype, Ptr):
            buf = memory.buffers.get(pname)
            if buf is None:
                raise EvalError("args", "no buffer bound to %%%s" % pname)
            if buf.elem != ptype.elem:
                raise EvalError("args", "buffer %%%s has element type %s, expected %s"
                                % (pname, buf.elem, ptype.elem))
            env[pname] = (pname, 0)
        else:
            if pname not in args:
                raise EvalError("args", "missing scalar argument %%%s" % pname)
            env[pname] = args[pname]

    mem = memory.copy()
    trace = ExecTrace()
    counts = trace.op_counts
    blocks = {blk.label: blk for blk in fn.blocks}
    cur = fn.blocks[0]
    prev = None
    ret_val = None

    while True:
        trace.block_counts[cur.label] = trace.block_counts.get(cur.label, 0) + 1
        # phis read their incoming values simultaneously at block entry
        phi_writes = []
        idx = 0
        instrs = cur.instrs
        n = len(instrs)
        while idx < n and instrs[idx].op == "phi":
            ins = instrs[idx]
            k = ins.labels.index(prev)
            phi_writes.append((ins.name, env[ins.operands[k]]))
            idx += 1
        for name, val in phi_writes:
            env[name] = val
        trace.total += idx
        if idx:
            counts[("phi", 0)] = counts.get(("phi", 0), 0) + idx

        jump = None
        while idx < n:
            ins = instrs[idx]
            idx += 1
            trace.total += 1
            if trace.total > fuel:
                raise EvalError("fuel", "fuel exhausted after %d instructions" % fuel)
            op = ins.op
            if op in ("br", "condbr", "ret"):
                if op == "br":
                    jump = ins.labels[0]
                elif op == "condbr":
                    jump = ins.labels[0] if env[ins.operands[0]] else ins.labels[1]
                else:
                    ret_val = env[ins.operands[0]] if ins.operands else None
                    return ret_val, mem, trace
                break
            _eval_instr(ins, env, mem, counts)
        if jump is None:
            raise EvalError("trap", "block %s fell through" % cur.label)
        prev = cur.label
        cur = blocks[jump]


def _count(counts, cls, width):
    key = (cls, width)
    counts[key] = counts.get(key, 0) + 1


def _eval_instr(ins, env, mem, counts):
    op = ins.op
    t = ins.type
    if op in BINOPS:
        a = env[ins.operands[0]]
        b = env[ins.operands[1]]
        if isinstance(t, Vec):
            _count(counts, "arith", t.bits)
            if t.elem.is_float:
                env[ins.name] = kernels.binop_f32(_BINOP_IDS[op], a, b)
            else:
                env[ins.name] = kernels.binop_int(_BINOP_IDS[op], a, b,
                                                  t.elem.bits, t.elem.signed)
        else:
            _count(counts, "arith", 0)
            env[ins.name] = kernels.binop_int(_BINOP_IDS[op], [a], [b], 64, True)[0]
    elif op == "icmp":
        a = env[ins.operands[0]]
        b = env[ins.operands[1]]
        if isinstance(t, Vec):
            _count(counts, "arith", t.bits)
            env[ins.name] = kernels.icmp_int(_PRED_IDS[ins.pred], a, b,
                                             t.elem.bits, t.elem.signed,
                                             _true_lane(t.elem))
        else:
            _count(counts, "arith", 0)
            env[ins.name] = kernels.icmp_int(_PRED_IDS[ins.pred], [a], [b], 64, True, 1)[0]
    elif op == "select":
        m = env[ins.operands[0]]
        a = env[ins.operands[1]]
        b = env[ins.operands[2]]
        if isinstance(t, Vec):
            _count(counts, "arith", t.bits)
            env[ins.name] = kernels.select_lanes(m, a, b)
        else:
            _count(counts, "arith", 0)
            env[ins.name] = a if m else b
    elif op == "const":
        _count(counts, "const", t.bits if isinstance(t, Vec) else 0)
        env[ins.name] = _const_value(ins)
    elif op == "load":
        base, off = env[ins.operands[0]]
        buf = mem.buffers[base]
        end = off + t.count
        if off < 0 or end > len(buf.data):
            raise EvalError("oob", "load of %%%s[%d:%d] out of bounds (len %d)"
                            % (base, off, end, len(buf.data)))
        _count(counts, "load", t.bits)
        env[ins.name] = buf.data[off:end]
    elif op == "store":
        val = env[ins.operands[0]]
        base, off = env[ins.operands[1]]
        buf = mem.buffers[base]
        end = off + len(val)
        if off < 0 or end > len(buf.data):
            raise EvalError("oob", "store to %%%s[%d:%d] out of bounds (len %d)"
                            % (base, off, end, len(buf.data)))
        _count(counts, "store", len(val) * buf.elem.bits)
        buf.data[off:end] = val
    elif op == "ptradd":
        base, off = env[ins.operands[0]]
        env[ins.name] = (base, off + env[ins.operands[1]])
    elif op == "shuffle":
        a = env[ins.operands[0]]
        b = env[ins.operands[1]]
        _count(counts, "shuffle", t.bits)
        mask = [-1 if e is None else e for e in ins.mask]
        zero = 0.0 if t.elem.is_float else 0
        env[ins.name] = kernels.shuffle_lanes(a, b, mask, zero)
    elif op == "extract_subvec":
        src = env[ins.operands[0]]
        _count(counts, "shuffle", t.bits)
        env[ins.name] = src[ins.start:ins.start + t.count]
    elif op == "call":
        ops = [env[o] for o in ins.operands]
        _count(counts, "call", t.bits if isinstance(t, Vec) else 0)
        try:
            env[ins.name] = eval_intrinsic(ins.callee, ops)
        except IntrinsicError as e:
            raise EvalError("intrinsic", str(e))
    elif op == "phi":
        raise EvalError("trap", "phi %%%s not at block head" % ins.name)
    else:
        raise EvalError("trap", "cannot evaluate opcode %r" % op)


# ---------------------------------------------------------------------------
# Dynamic-count summaries

VECTOR_OP_CLASSES = ("load", "store", "arith", "shuffle", "call")


def count_dynamic_ops(trace):
    """Totals per (class, width) plus a vector-op histogram by width.
    Vector ops are loads/stores/arithmetic/shuffles/calls at width >= 128;
    phis and constant materializations are bookkeeping, not work."""
    by_width = {}
    vector_total = 0
    for (cls, width), n in trace.op_counts.items():
        if cls in VECTOR_OP_CLASSES and width >= 128:
            by_width[width] = by_width.get(width, 0) + n
            vector_total += n
    return {
        "by_class_width": dict(trace.op_counts),
        "vector_ops_by_width": by_width,
        "vector_total": vector_total,
        "total": trace.total,
    }


def width_ratio(summary, narrow, wide):
    """narrow-width vector ops / wide-width vector ops (None if no wide ops)."""
    w = summary["vector_ops_by_width"].get(wide, 0)
    n = summary["vector_ops_by_width"].get(narrow, 0)
    if w == 0:
        return None
    return n / w
