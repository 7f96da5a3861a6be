"""Typed vector SSA IR: types, instructions, structural verification.

Values are named (SSA, one def per name); instructions additionally carry a
function-unique uid so passes can refer to stores and other result-less
instructions. Vector values must total 128/256/512 bits; scalar i64 is for
addressing and loop control, scalar i1 for branching.
"""

from dataclasses import dataclass, field, replace

SCALAR_BITS = {
    "i1": 1,
    "i8": 8, "u8": 8,
    "i16": 16, "u16": 16,
    "i32": 32, "u32": 32,
    "i64": 64, "u64": 64,
    "f32": 32,
}

LEGAL_VECTOR_BITS = (128, 256, 512)

BINOPS = ("add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr")
F32_BINOPS = ("add", "sub", "mul")
ICMP_PREDS = ("eq", "ne", "slt", "sle", "sgt", "sge", "ult", "ule", "ugt", "uge")
TERMINATORS = ("br", "condbr", "ret")

OPCODES = BINOPS + (
    "icmp", "select", "const", "load", "store", "ptradd", "phi",
    "shuffle", "call", "extract_subvec",
) + TERMINATORS


class IRError(Exception):
    pass


@dataclass(frozen=True)
class Scalar:
    kind: str

    @property
    def bits(self):
        return SCALAR_BITS[self.kind]

    @property
    def signed(self):
        return self.kind[0] == "i" and self.kind != "i1"

    @property
    def is_float(self):
        return self.kind == "f32"

    def __str__(self):
        return self.kind


@dataclass(frozen=True)
class Vec:
    elem: Scalar
    count: int

    @property
    def bits(self):
        return self.count * self.elem.bits

    def __str__(self):
        return "<%d x %s>" % (self.count, self.elem)


@dataclass(frozen=True)
class Ptr:
    elem: Scalar

    def __str__(self):
        return "ptr<%s>" % self.elem


I1 = Scalar("i1")
I64 = Scalar("i64")


def scalar(kind):
    if kind not in SCALAR_BITS:
        raise IRError("unknown scalar type %r" % kind)
    return Scalar(kind)


@dataclass
class Instr:
    op: str
    name: str | None = None          # result value name, None for stores etc.
    type: object = None              # result type (Scalar/Vec/Ptr), None if no result
    operands: list = field(default_factory=list)   # value names
    pred: str | None = None          # icmp predicate
    payload: object = None           # const: int/float or list of lanes (None lane = undef)
    mask: list | None = None         # shuffle mask, None entry = undef
    labels: list | None = None       # phi incoming labels / branch targets
    callee: str | None = None        # call intrinsic name
    start: int | None = None         # extract_subvec lane offset
    uid: int = -1
    span: object = None

    @property
    def is_terminator(self):
        return self.op in TERMINATORS

    def clone(self):
        return replace(
            self,
            operands=list(self.operands),
            mask=None if self.mask is None else list(self.mask),
            labels=None if self.labels is None else list(self.labels),
            payload=list(self.payload) if isinstance(self.payload, list) else self.payload,
        )


@dataclass
class Block:
    label: str
    instrs: list = field(default_factory=list)

    @property
    def terminator(self):
        return self.instrs[-1] if self.instrs else None

    def phis(self):
        out = []
        for ins in self.instrs:
            if ins.op != "phi":
                break
            out.append(ins)
        return out


@dataclass
class Function:
    name: str
    params: list = field(default_factory=list)     # (name, type) pairs
    blocks: list = field(default_factory=list)
    reassoc: bool = False
    _next_uid: int = 0
    _next_tmp: int = 0

    def assign_uids(self):
        for blk in self.blocks:
            for ins in blk.instrs:
                if ins.uid < 0:
                    ins.uid = self._next_uid
                    self._next_uid += 1

    def fresh_name(self, hint="t"):
        names = self.value_names()
        while True:
            cand = "%s.%d" % (hint, self._next_tmp)
            self._next_tmp += 1
            if cand not in names:
                return cand

    def value_names(self):
        names = {p for p, _ in self.params}
        for blk in self.blocks:
            for ins in blk.instrs:
                if ins.name is not None:
                    names.add(ins.name)
        return names

    def block(self, label):
        for blk in self.blocks:
            if blk.label == label:
                return blk
        raise IRError("no block %r in @%s" % (label, self.name))

    def def_sites(self):
        """value name -> ('param', index) or (block_label, instr_index)."""
        sites = {}
        for i, (p, _) in enumerate(self.params):
            sites[p] = ("param", i)
        for blk in self.blocks:
            for i, ins in enumerate(blk.instrs):
                if ins.name is not None:
                    sites[ins.name] = (blk.label, i)
        return sites

    def types(self):
        """value name -> type for params and every defining instruction."""
        out = {p: t for p, t in self.params}
        for blk in self.blocks:
            for ins in blk.instrs:
                if ins.name is not None:
                    out[ins.name] = ins.type
        return out

    def uses(self):
        """value name -> list of (block_label, instr_index, operand_index)."""
        out = {}
        for blk in self.blocks:
            for i, ins in enumerate(blk.instrs):
                for k, opnd in enumerate(ins.operands):
                    out.setdefault(opnd, []).append((blk.label, i, k))
        return out


@dataclass
class Module:
    functions: list = field(default_factory=list)
    target: str | None = None

    def function(self, name):
        for fn in self.functions:
            if fn.name == name:
                return fn
        raise IRError("no function @%s" % name)


# ---------------------------------------------------------------------------
# CFG helpers


def successors(blk):
    term = blk.terminator
    if term is None or term.op == "ret":
        return []
    return list(term.labels)


def predecessors(fn):
    preds = {blk.label: [] for blk in fn.blocks}
    for blk in fn.blocks:
        for s in successors(blk):
            if s in preds:
                preds[s].append(blk.label)
    return preds


def dominators(fn):
    """Iterative dataflow; block label -> set of dominating labels."""
    labels = [blk.label for blk in fn.blocks]
    if not labels:
        return {}
    preds = predecessors(fn)
    entry = labels[0]
    dom = {lb: set(labels) for lb in labels}
    dom[entry] = {entry}
    changed = True
    while changed:
        changed = False
        for lb in labels[1:]:
            p = [dom[q] for q in preds[lb]]
            new = set.intersection(*p) if p else set()
            new = new | {lb}
            if new != dom[lb]:
                dom[lb] = new
                changed = True
    return dom


# ---------------------------------------------------------------------------
# Verification


def _check_operand_count(ins, n, diags):
    if len(ins.operands) != n:
        diags.append("%s: expected %d operands, got %d" % (ins.op, n, len(ins.operands)))
        return False
    return True


def verify(fn, intrinsics=None):
    """Structural verification. Returns a list of diagnostic strings; empty
    means the function is well formed. `intrinsics` optionally maps call
    names to (operand types, result type) for signature checking."""
    diags = []
    if not fn.blocks:
        diags.append("@%s: function has no blocks" % fn.name)
        return diags

    labels = [blk.label for blk in fn.blocks]
    if len(set(labels)) != len(labels):
        diags.append("@%s: duplicate block labels" % fn.name)
        return diags

    # single def per name
    seen = {p for p, _ in fn.params}
    for blk in fn.blocks:
        for ins in blk.instrs:
            if ins.name is not None:
                if ins.name in seen:
                    diags.append("%%%s: defined more than once" % ins.name)
                seen.add(ins.name)

    # block shape: one terminator, at the end; phis only at the head
    for blk in fn.blocks:
        if not blk.instrs:
            diags.append("block %s: empty (needs a terminator)" % blk.label)
            continue
        for i, ins in enumerate(blk.instrs):
            if ins.is_terminator and i != len(blk.instrs) - 1:
                diags.append("block %s: terminator %s before end" % (blk.label, ins.op))
            if ins.op == "phi" and i > 0 and blk.instrs[i - 1].op != "phi":
                diags.append("block %s: phi %%%s not at block head" % (blk.label, ins.name))
        if not blk.instrs[-1].is_terminator:
            diags.append("block %s: missing terminator" % blk.label)

    # branch targets
    for blk in fn.blocks:
        term = blk.terminator
        if term is not None and term.op in ("br", "condbr"):
            for t in term.labels or []:
                if t not in labels:
                    diags.append("block %s: branch to unknown block %r" % (blk.label, t))

    if diags:
        return diags

    preds = predecessors(fn)
    if preds[labels[0]]:
        diags.append("entry block %s must not have predecessors" % labels[0])

    # phi incoming labels match CFG predecessors exactly
    for blk in fn.blocks:
        for ins in blk.phis():
            inc = ins.labels or []
            if sorted(inc) != sorted(preds[blk.label]):
                diags.append(
                    "phi %%%s: incoming labels %s do not match predecessors %s"
                    % (ins.name, sorted(inc), sorted(preds[blk.label])))

    types = fn.types()
    defs = fn.def_sites()

    # operand references resolve
    for blk in fn.blocks:
        for ins in blk.instrs:
            for opnd in ins.operands:
                if opnd not in defs:
                    diags.append("%s in %s: unknown value %%%s" % (ins.op, blk.label, opnd))
    if diags:
        return diags

    # per-opcode typing
    for blk in fn.blocks:
        for ins in blk.instrs:
            _verify_types(fn, blk, ins, types, intrinsics, diags)

    # vector width legality
    for blk in fn.blocks:
        for ins in blk.instrs:
            t = ins.type
            if isinstance(t, Vec) and t.bits not in LEGAL_VECTOR_BITS:
                diags.append("%%%s: vector width %d not in %s"
                             % (ins.name, t.bits, list(LEGAL_VECTOR_BITS)))

    # dominance
    dom = dominators(fn)
    order = {blk.label: i for i, blk in enumerate(fn.blocks)}
    pos = {}
    for blk in fn.blocks:
        for i, ins in enumerate(blk.instrs):
            if ins.name is not None:
                pos[ins.name] = (blk.label, i)

    def dominates(def_name, use_block, use_idx):
        site = defs[def_name]
        if site[0] == "param":
            return True
        dblk, didx = pos[def_name]
        if dblk == use_block:
            return didx < use_idx
        return dblk in dom[use_block]

    for blk in fn.blocks:
        for i, ins in enumerate(blk.instrs):
            if ins.op == "phi":
                for opnd, lab in zip(ins.operands, ins.labels or []):
                    if lab in preds[blk.label]:
                        end = len(fn.block(lab).instrs)
                        if not dominates(opnd, lab, end):
                            diags.append("phi %%%s: %%%s does not dominate edge from %s"
                                         % (ins.name, opnd, lab))
            else:
                for opnd in ins.operands:
                    if not dominates(opnd, blk.label, i):
                        diags.append("%s in %s: use of %%%s not dominated by its definition"
                                     % (ins.op, blk.label, opnd))
    return diags


def _verify_types(fn, blk, ins, types, intrinsics, diags):
    op = ins.op
    ts = [types.get(o) for o in ins.operands]

    def err(msg):
        diags.append("%s in %s: %s" % (op, blk.label, msg))

    if op in BINOPS:
        if not _check_operand_count(ins, 2, diags):
            return
        if ts[0] != ts[1] or ts[0] != ins.type:
            err("operand/result types differ")
            return
        t = ins.type
        if isinstance(t, Vec):
            if t.elem.is_float and op not in F32_BINOPS:
                err("opcode not defined for f32 lanes")
        elif isinstance(t, Scalar):
            if t.kind != "i64":
                err("scalar arithmetic is i64-only")
        else:
            err("bad operand type")
    elif op == "icmp":
        if not _check_operand_count(ins, 2, diags):
            return
        if ins.pred not in ICMP_PREDS:
            err("unknown predicate %r" % ins.pred)
        if ts[0] != ts[1]:
            err("operand types differ")
            return
        if isinstance(ts[0], Vec):
            if ts[0].elem.is_float:
                err("icmp not defined for f32 lanes")
            if ins.type != ts[0]:
                err("vector icmp result must match operand type")
        elif ts[0] == I64:
            if ins.type != I1:
                err("scalar icmp result must be i1")
        else:
            err("icmp operands must be vectors or i64")
    elif op == "select":
        if not _check_operand_count(ins, 3, diags):
            return
        if ts[1] != ts[2] or ts[1] != ins.type:
            err("selected operand types differ")
        if isinstance(ins.type, Vec):
            if ts[0] != ins.type:
                err("vector select mask must match value type")
        elif ts[0] != I1:
            err("scalar select mask must be i1")
    elif op == "const":
        t = ins.type
        if isinstance(t, Vec):
            if not isinstance(ins.payload, list) or len(ins.payload) != t.count:
                err("payload length does not match lane count")
                return
            for lane in ins.payload:
                if lane is None:
                    continue
                if t.elem.is_float:
                    continue
                lo, hi = _lane_range(t.elem)
                if not (lo <= lane <= hi):
                    err("lane %r out of range for %s" % (lane, t.elem))
        elif isinstance(t, Scalar):
            if t.kind != "i64" or not isinstance(ins.payload, int):
                err("scalar consts are i64-only")
        else:
            err("bad const type")
    elif op == "load":
        if not _check_operand_count(ins, 1, diags):
            return
        if not isinstance(ts[0], Ptr):
            err("operand is not a pointer")
            return
        if not isinstance(ins.type, Vec) or ins.type.elem != ts[0].elem:
            err("load type must be a vector of the pointee type")
    elif op == "store":
        if not _check_operand_count(ins, 2, diags):
            return
        if ins.name is not None:
            err("store has no result")
        if not isinstance(ts[0], Vec):
            err("stored value must be a vector")
            return
        if not isinstance(ts[1], Ptr) or ts[1].elem != ts[0].elem:
            err("pointer type does not match stored value")
    elif op == "ptradd":
        if not _check_operand_count(ins, 2, diags):
            return
        if not isinstance(ts[0], Ptr) or ts[1] != I64:
            err("ptradd takes (ptr, i64)")
        elif ins.type != ts[0]:
            err("result type must equal pointer type")
    elif op == "phi":
        if len(ins.operands) != len(ins.labels or []):
            err("incoming value/label count mismatch")
        for t in ts:
            if t != ins.type:
                err("incoming value type differs from phi type")
                break
    elif op == "shuffle":
        if not _check_operand_count(ins, 2, diags):
            return
        if not isinstance(ts[0], Vec) or ts[0] != ts[1]:
            err("shuffle operands must be vectors of one type")
            return
        n2 = ts[0].count * 2
        for e in ins.mask or []:
            if e is not None and not (0 <= e < n2):
                err("mask index out of range")
                break
        want = Vec(ts[0].elem, len(ins.mask or []))
        if ins.type != want:
            err("result type must be %s" % want)
    elif op == "call":
        if intrinsics is not None:
            sig = intrinsics.get(ins.callee)
            if sig is None:
                err("unknown intrinsic @%s" % ins.callee)
            else:
                opnd_types, res_type = sig
                if list(ts) != list(opnd_types):
                    err("operand types do not match @%s signature" % ins.callee)
                if ins.type != res_type:
                    err("result type does not match @%s signature" % ins.callee)
    elif op == "extract_subvec":
        if not _check_operand_count(ins, 1, diags):
            return
        if not isinstance(ts[0], Vec) or not isinstance(ins.type, Vec):
            err("operand and result must be vectors")
            return
        if ins.type.elem != ts[0].elem:
            err("element type changes")
        if ins.start is None or ins.start < 0 or ins.start + ins.type.count > ts[0].count:
            err("lane range out of bounds")
    elif op == "br":
        pass
    elif op == "condbr":
        if ts and ts[0] != I1:
            err("condition must be i1")
    elif op == "ret":
        pass
    else:
        err("unknown opcode")


def _lane_range(elem):
    if elem.signed:
        return -(1 << (elem.bits - 1)), (1 << (elem.bits - 1)) - 1
    return 0, (1 << elem.bits) - 1


# ---------------------------------------------------------------------------
# Rewriting utilities


def replace_all_uses(fn, old, new):
    """Rewire every use of value `old` to `new`. Types must match and the
    definition of `new` must dominate every rewritten use."""
    types = fn.types()
    if old not in types or new not in types:
        raise IRError("unknown value in replace_all_uses")
    if types[old] != types[new]:
        raise IRError("type mismatch: %%%s is %s, %%%s is %s"
                      % (old, types[old], new, types[new]))

    defs = fn.def_sites()
    dom = dominators(fn)
    preds = predecessors(fn)
    pos = {}
    for blk in fn.blocks:
        for i, ins in enumerate(blk.instrs):
            if ins.name is not None:
                pos[ins.name] = (blk.label, i)

    def dominates_use(use_block, use_idx):
        if defs[new][0] == "param":
            return True
        dblk, didx = pos[new]
        if dblk == use_block:
            return didx < use_idx
        return dblk in dom[use_block]

    for blk in fn.blocks:
        for i, ins in enumerate(blk.instrs):
            for k, opnd in enumerate(ins.operands):
                if opnd != old:
                    continue
                if ins.op == "phi":
                    lab = ins.labels[k]
                    ok = dominates_use(lab, len(fn.block(lab).instrs))
                else:
                    ok = dominates_use(blk.label, i)
                if not ok:
                    raise IRError("%%%s does not dominate a use of %%%s" % (new, old))
                ins.operands[k] = new
    return fn


def erase_dead(fn):
    """Remove side-effect-free instructions with no uses, to a fixpoint.
    Stores, calls and terminators are never removed."""
    while True:
        used = set()
        for blk in fn.blocks:
            for ins in blk.instrs:
                used.update(ins.operands)
        removed = False
        for blk in fn.blocks:
            keep = []
            for ins in blk.instrs:
                dead = (
                    ins.name is not None
                    and ins.name not in used
                    and ins.op not in ("store", "call")
                    and not ins.is_terminator
                )
                if dead:
                    removed = True
                else:
                    keep.append(ins)
            blk.instrs = keep
        if not removed:
            return fn


# ---------------------------------------------------------------------------
# Targets and costs

COST_CLASSES = ("load", "store", "shuffle", "arith", "call", "phi", "const",
                "gather", "extract")


def opcode_class(op):
    if op in BINOPS or op in ("icmp", "select"):
        return "arith"
    if op in ("shuffle", "extract_subvec"):
        return "shuffle"
    if op in ("load", "store", "call", "phi", "const"):
        return op
    return None


class CostTable:
    """Integer cost per (class, width-in-bits). Default: 1 everywhere."""

    def __init__(self, entries=None):
        self.entries = dict(entries or {})

    def cost(self, cls, width):
        if (cls, width) in self.entries:
            return self.entries[(cls, width)]
        if (cls, None) in self.entries:
            return self.entries[(cls, None)]
        return 1

    @staticmethod
    def parse(text):
        """One entry per line: `<class> <width|*> <cost>`; `;` comments."""
        entries = {}
        for ln, raw in enumerate(text.splitlines(), 1):
            line = raw.split(";")[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in COST_CLASSES:
                raise IRError("bad cost table line %d: %r" % (ln, raw))
            width = None if parts[1] == "*" else int(parts[1])
            entries[(parts[0], width)] = int(parts[2])
        return CostTable(entries)


@dataclass
class TargetDesc:
    name: str
    max_vector_bits: int
    legal_intrinsics: frozenset
    cost: CostTable

    @staticmethod
    def generic(bits, intrinsic_widths, cost=None):
        """intrinsic_widths: name -> width in bits; legal = widths <= bits."""
        if bits not in LEGAL_VECTOR_BITS:
            raise IRError("bad target width %d" % bits)
        legal = frozenset(n for n, w in intrinsic_widths.items() if w <= bits)
        return TargetDesc("gen%d" % bits, bits, legal, cost or CostTable())
