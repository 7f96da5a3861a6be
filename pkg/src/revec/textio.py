"""Textual IR (.vir): a total parser and a canonical printer.

The printer renumbers values %0, %1, ... in program order; parse(print(m))
is structurally identical to m. `;` starts a line comment. Any byte input
produces either a module or a ParseError/VerifyError, never a crash.
"""

import re
from dataclasses import dataclass

from revec import intrinsics
from revec.ir import (
    BINOPS, ICMP_PREDS, I1, I64, Block, Function, Instr, Module, Ptr, Scalar,
    SCALAR_BITS, Vec, verify,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __str__(self):
        return "%s:%d:%d" % (self.file, self.line, self.column)


class ParseError(Exception):
    def __init__(self, message, span):
        super().__init__("%s: %s" % (span, message))
        self.message = message
        self.span = span


class VerifyError(Exception):
    def __init__(self, fn_name, diags):
        super().__init__("@%s: %s" % (fn_name, "; ".join(diags)))
        self.fn_name = fn_name
        self.diags = diags


_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t\r]+)
      | (?P<comment>;[^\n]*)
      | (?P<nl>\n)
      | (?P<num>[+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
      | (?P<punct>[(){}\[\]<>,:=@%])
    """,
    re.VERBOSE,
)


def _tokenize(text, filename):
    line, col = 1, 1
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError("unexpected character %r" % text[pos],
                             SourceSpan(filename, line, col))
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            col = 1
        elif kind not in ("ws", "comment"):
            out.append((kind, tok, SourceSpan(filename, line, col)))
            col += len(tok)
        else:
            col += len(tok)
        pos = m.end()
    out.append(("eof", "", SourceSpan(filename, line, col)))
    return out


class _Parser:
    def __init__(self, text, filename):
        self.toks = _tokenize(text, filename)
        self.i = 0
        self.filename = filename

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        if t[0] != "eof":
            self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, tok[2])

    def expect_punct(self, ch):
        kind, tok, span = self.next()
        if kind != "punct" or tok != ch:
            raise ParseError("expected %r, found %r" % (ch, tok or "end of input"), span)

    def expect_ident(self, what="identifier"):
        kind, tok, span = self.next()
        if kind != "ident":
            raise ParseError("expected %s, found %r" % (what, tok or "end of input"), span)
        return tok

    def accept_punct(self, ch):
        kind, tok, _ = self.peek()
        if kind == "punct" and tok == ch:
            self.next()
            return True
        return False

    def accept_ident(self, word):
        kind, tok, _ = self.peek()
        if kind == "ident" and tok == word:
            self.next()
            return True
        return False

    def parse_int(self):
        kind, tok, span = self.next()
        if kind != "num" or any(c in tok for c in ".eE"):
            raise ParseError("expected integer, found %r" % tok, span)
        return int(tok)

    def parse_value(self):
        self.expect_punct("%")
        kind, tok, span = self.next()
        if kind not in ("ident", "num") or (kind == "num" and not tok.isdigit()):
            raise ParseError("expected value name after %%, found %r" % tok, span)
        return tok

    # -- types ------------------------------------------------------------

    def parse_type(self):
        kind, tok, span = self.peek()
        if kind == "punct" and tok == "<":
            self.next()
            count = self.parse_int()
            x = self.expect_ident()
            if x != "x":
                self.error("expected 'x' in vector type")
            elem = self.parse_scalar()
            self.expect_punct(">")
            if count < 1:
                raise ParseError("vector count must be >= 1", span)
            return Vec(elem, count)
        if kind == "ident" and tok == "ptr":
            self.next()
            self.expect_punct("<")
            elem = self.parse_scalar()
            self.expect_punct(">")
            return Ptr(elem)
        return self.parse_scalar()

    def parse_scalar(self):
        kind, tok, span = self.next()
        if kind != "ident" or tok not in SCALAR_BITS:
            raise ParseError("expected scalar type, found %r" % tok, span)
        return Scalar(tok)

    # -- module / function ------------------------------------------------

    def parse_module(self):
        mod = Module()
        if self.accept_ident("target"):
            mod.target = self.expect_ident("target name")
        while True:
            kind, tok, span = self.peek()
            if kind == "eof":
                return mod
            if kind == "ident" and tok == "func":
                mod.functions.append(self.parse_function())
            else:
                raise ParseError("expected 'func', found %r" % tok, span)

    def parse_function(self):
        self.expect_ident()  # func
        self.expect_punct("@")
        name = self.expect_ident("function name")
        fn = Function(name=name)
        self.expect_punct("(")
        if not self.accept_punct(")"):
            while True:
                pname = self.parse_value()
                self.expect_punct(":")
                ptype = self.parse_type()
                fn.params.append((pname, ptype))
                if self.accept_punct(")"):
                    break
                self.expect_punct(",")
        if self.accept_ident("reassoc"):
            fn.reassoc = True
        self.expect_punct("{")
        while not self.accept_punct("}"):
            fn.blocks.append(self.parse_block())
        return fn

    def parse_block(self):
        label = self.expect_ident("block label")
        self.expect_punct(":")
        blk = Block(label=label)
        while True:
            kind, tok, span = self.peek()
            if kind == "eof":
                self.error("unterminated block %r" % label)
            if kind == "punct" and tok == "}":
                return blk
            if kind == "ident" and tok not in OP_KEYWORDS and self.toks[self.i + 1][1] == ":":
                return blk  # next block label
            blk.instrs.append(self.parse_instr())

    # -- instructions ------------------------------------------------------

    def parse_instr(self):
        kind, tok, span = self.peek()
        name = None
        if kind == "punct" and tok == "%":
            name = self.parse_value()
            self.expect_punct("=")
        opk, op, opspan = self.next()
        if opk != "ident" or op not in OP_KEYWORDS:
            raise ParseError("expected opcode, found %r" % op, opspan)
        ins = Instr(op=op, name=name, span=opspan)

        if op in BINOPS:
            ins.type = self.parse_type()
            ins.operands = [self.parse_value()]
            self.expect_punct(",")
            ins.operands.append(self.parse_value())
        elif op == "icmp":
            pred = self.expect_ident("predicate")
            if pred not in ICMP_PREDS:
                raise ParseError("unknown icmp predicate %r" % pred, opspan)
            ins.pred = pred
            opnd_type = self.parse_type()
            ins.operands = [self.parse_value()]
            self.expect_punct(",")
            ins.operands.append(self.parse_value())
            ins.type = opnd_type if isinstance(opnd_type, Vec) else I1
        elif op == "select":
            ins.operands = [self.parse_value()]
            self.expect_punct(",")
            ins.operands.append(self.parse_value())
            self.expect_punct(",")
            ins.operands.append(self.parse_value())
        elif op == "const":
            ins.type = self.parse_type()
            if isinstance(ins.type, Vec):
                ins.payload = self.parse_lanes(ins.type.elem.is_float)
            else:
                ins.payload = self.parse_number(getattr(ins.type, "kind", "") == "f32")
        elif op == "load":
            ins.type = self.parse_type()
            ins.operands = [self.parse_value()]
        elif op == "store":
            self.parse_type()  # redundant value type, kept for readability
            ins.operands = [self.parse_value()]
            self.expect_punct(",")
            ins.operands.append(self.parse_value())
        elif op == "ptradd":
            ins.operands = [self.parse_value()]
            self.expect_punct(",")
            ins.operands.append(self.parse_value())
        elif op == "phi":
            self.expect_punct("[")
            ins.labels = []
            while True:
                lab = self.expect_ident("block label")
                self.expect_punct(":")
                ins.labels.append(lab)
                ins.operands.append(self.parse_value())
                if self.accept_punct("]"):
                    break
                self.expect_punct(",")
        elif op == "shuffle":
            ins.operands = [self.parse_value()]
            self.expect_punct(",")
            ins.operands.append(self.parse_value())
            self.expect_punct(",")
            ins.mask = self.parse_mask()
        elif op == "call":
            self.expect_punct("@")
            ins.callee = self.expect_ident("intrinsic name")
            self.expect_punct("(")
            if not self.accept_punct(")"):
                while True:
                    ins.operands.append(self.parse_value())
                    if self.accept_punct(")"):
                        break
                    self.expect_punct(",")
            sig = intrinsics.SEMANTICS.get(ins.callee)
            ins.type = sig.result_type if sig else None
        elif op == "extract_subvec":
            ins.type = self.parse_type()
            ins.operands = [self.parse_value()]
            self.expect_punct(",")
            ins.start = self.parse_int()
        elif op == "br":
            ins.labels = [self.expect_ident("block label")]
        elif op == "condbr":
            ins.operands = [self.parse_value()]
            self.expect_punct(",")
            t = self.expect_ident("block label")
            self.expect_punct(",")
            f = self.expect_ident("block label")
            ins.labels = [t, f]
        elif op == "ret":
            kind, tok, _ = self.peek()
            if kind == "punct" and tok == "%":
                ins.operands = [self.parse_value()]
        return ins

    def parse_number(self, is_float):
        kind, tok, span = self.next()
        if kind != "num":
            raise ParseError("expected number, found %r" % tok, span)
        if any(c in tok for c in ".eE"):
            if not is_float:
                raise ParseError("float literal in integer context", span)
            return float(tok)
        return float(tok) if is_float else int(tok)

    def parse_lanes(self, is_float):
        self.expect_punct("[")
        lanes = []
        if self.accept_punct("]"):
            return lanes
        while True:
            if self.accept_ident("u"):
                lanes.append(None)
            else:
                lanes.append(self.parse_number(is_float))
            if self.accept_punct("]"):
                return lanes
            self.expect_punct(",")

    def parse_mask(self):
        self.expect_punct("[")
        mask = []
        if self.accept_punct("]"):
            return mask
        while True:
            if self.accept_ident("u"):
                mask.append(None)
            else:
                mask.append(self.parse_int())
            if self.accept_punct("]"):
                return mask
            self.expect_punct(",")


OP_KEYWORDS = set(BINOPS) | {
    "icmp", "select", "const", "load", "store", "ptradd", "phi",
    "shuffle", "call", "extract_subvec", "br", "condbr", "ret",
}


def _resolve_types(fn):
    """Fill in types the grammar leaves implicit (select/ptradd/phi/shuffle)."""
    types = {p: t for p, t in fn.params}
    pending = []
    for blk in fn.blocks:
        for ins in blk.instrs:
            if ins.name is None:
                continue
            if ins.type is not None:
                types[ins.name] = ins.type
            else:
                pending.append(ins)
    changed = True
    while pending and changed:
        changed = False
        still = []
        for ins in pending:
            t = None
            if ins.op == "ptradd":
                t = types.get(ins.operands[0])
            elif ins.op == "select":
                t = types.get(ins.operands[1])
            elif ins.op == "phi":
                for o in ins.operands:
                    t = types.get(o)
                    if t is not None:
                        break
            elif ins.op == "shuffle":
                src = types.get(ins.operands[0])
                if isinstance(src, Vec):
                    t = Vec(src.elem, len(ins.mask or []))
            elif ins.op == "call":
                pass  # unknown intrinsic; verify reports it
            if t is not None:
                ins.type = t
                types[ins.name] = t
                changed = True
            else:
                still.append(ins)
        pending = still
    diags = []
    for ins in pending:
        if ins.op == "call":
            diags.append("call @%s: unknown intrinsic" % ins.callee)
        else:
            diags.append("%s %%%s: cannot infer type" % (ins.op, ins.name))
    return diags


def parse(text, filename="<input>"):
    """Parse a .vir source into a verified Module."""
    mod = _Parser(text, filename).parse_module()
    sigs = intrinsics.signatures()
    for fn in mod.functions:
        fn.assign_uids()
        diags = _resolve_types(fn)
        if diags:
            raise VerifyError(fn.name, diags)
        diags = verify(fn, intrinsics=sigs)
        if diags:
            raise VerifyError(fn.name, diags)
    return mod


def parse_file(path):
    with open(path, "r", encoding="utf-8") as f:
        return parse(f.read(), filename=str(path))


# ---------------------------------------------------------------------------
# Printing


def _fmt_lane(v):
    if v is None:
        return "u"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def print_module(mod):
    out = []
    if mod.target:
        out.append("target %s" % mod.target)
        out.append("")
    for fn in mod.functions:
        out.append(print_function(fn))
    return "\n".join(out)


def print_function(fn):
    rename = {}
    for p, _ in fn.params:
        rename[p] = str(len(rename))
    for blk in fn.blocks:
        for ins in blk.instrs:
            if ins.name is not None:
                rename[ins.name] = str(len(rename))

    def v(name):
        return "%" + rename.get(name, name)

    types = fn.types()
    lines = []
    params = ", ".join("%s: %s" % (v(p), t) for p, t in fn.params)
    flags = " reassoc" if fn.reassoc else ""
    lines.append("func @%s(%s)%s {" % (fn.name, params, flags))
    for blk in fn.blocks:
        lines.append("%s:" % blk.label)
        for ins in blk.instrs:
            lines.append("  " + _print_instr(ins, v, types))
    lines.append("}")
    return "\n".join(lines) + "\n"


def _print_instr(ins, v, types):
    op = ins.op
    lhs = "%s = " % v(ins.name) if ins.name is not None else ""
    if op in BINOPS:
        return "%s%s %s %s, %s" % (lhs, op, ins.type, v(ins.operands[0]), v(ins.operands[1]))
    if op == "icmp":
        return "%sicmp %s %s %s, %s" % (lhs, ins.pred, types[ins.operands[0]],
                                        v(ins.operands[0]), v(ins.operands[1]))
    if op == "select":
        return "%sselect %s, %s, %s" % (lhs, v(ins.operands[0]), v(ins.operands[1]),
                                        v(ins.operands[2]))
    if op == "const":
        if isinstance(ins.type, Vec):
            body = ", ".join(_fmt_lane(x) for x in ins.payload)
            return "%sconst %s [%s]" % (lhs, ins.type, body)
        return "%sconst %s %s" % (lhs, ins.type, _fmt_lane(ins.payload))
    if op == "load":
        return "%sload %s %s" % (lhs, ins.type, v(ins.operands[0]))
    if op == "store":
        return "store %s %s, %s" % (types[ins.operands[0]], v(ins.operands[0]),
                                    v(ins.operands[1]))
    if op == "ptradd":
        return "%sptradd %s, %s" % (lhs, v(ins.operands[0]), v(ins.operands[1]))
    if op == "phi":
        pairs = sorted(zip(ins.labels, ins.operands))
        body = ", ".join("%s: %s" % (lab, v(o)) for lab, o in pairs)
        return "%sphi [%s]" % (lhs, body)
    if op == "shuffle":
        body = ", ".join(_fmt_lane(e) for e in ins.mask)
        return "%sshuffle %s, %s, [%s]" % (lhs, v(ins.operands[0]), v(ins.operands[1]), body)
    if op == "call":
        args = ", ".join(v(o) for o in ins.operands)
        return "%scall @%s(%s)" % (lhs, ins.callee, args)
    if op == "extract_subvec":
        return "%sextract_subvec %s %s, %d" % (lhs, ins.type, v(ins.operands[0]), ins.start)
    if op == "br":
        return "br %s" % ins.labels[0]
    if op == "condbr":
        return "condbr %s, %s, %s" % (v(ins.operands[0]), ins.labels[0], ins.labels[1])
    if op == "ret":
        return "ret %s" % v(ins.operands[0]) if ins.operands else "ret"
    raise AssertionError("unprintable op %r" % op)


def structurally_equal(m1, m2):
    """Equality up to canonical value renaming."""
    return print_module(m1) == print_module(m2)
