"""Seeded intrinsic families and their executable semantics.

Every family is defined by a 128-bit reference procedure; the 256/512-bit
variants apply that procedure independently per 128-bit lane, which is
exactly the property that makes vertical operand packing sound. phadd.i16
deliberately has no 512-bit variant.
"""

from dataclasses import dataclass

from revec import kernels
from revec.ir import Scalar, Vec


@dataclass(frozen=True)
class Intrinsic:
    name: str
    family: str
    width: int                  # vector width in bits
    operand_types: tuple        # of Vec
    result_type: object         # Vec


def _vec(kind, count):
    return Vec(Scalar(kind), count)


# family -> (widths, per-128 operand types, per-128 result type, base proc)
_FAMILIES = {
    "packus.i32": ((128, 256, 512),
                   (_vec("i32", 4), _vec("i32", 4)), _vec("u16", 8),
                   kernels.packus_i32),
    "packss.i16": ((128, 256, 512),
                   (_vec("i16", 8), _vec("i16", 8)), _vec("i8", 16),
                   kernels.packss_i16),
    "phadd.i16": ((128, 256),
                  (_vec("i16", 8), _vec("i16", 8)), _vec("i16", 8),
                  kernels.phadd_i16),
    "avg.u8": ((128, 256, 512),
               (_vec("u8", 16), _vec("u8", 16)), _vec("u8", 16),
               kernels.avg_u8),
    "mulhi.i16": ((128, 256, 512),
                  (_vec("i16", 8), _vec("i16", 8)), _vec("i16", 8),
                  kernels.mulhi_i16),
    "sad.u8": ((128, 256, 512),
               (_vec("u8", 16), _vec("u8", 16)), _vec("u64", 2),
               kernels.sad_u8),
}


def _widen(vec, factor):
    return Vec(vec.elem, vec.count * factor)


def _build_table():
    table = {}
    procs = {}
    for family, (widths, base_ops, base_res, proc) in _FAMILIES.items():
        for w in widths:
            f = w // 128
            name = "%s.%d" % (family, w)
            table[name] = Intrinsic(
                name=name,
                family=family,
                width=w,
                operand_types=tuple(_widen(t, f) for t in base_ops),
                result_type=_widen(base_res, f),
            )
            procs[name] = proc
    return table, procs


SEMANTICS, _PROCS = _build_table()


def signatures():
    """name -> (operand types, result type), for ir.verify."""
    return {n: (d.operand_types, d.result_type) for n, d in SEMANTICS.items()}


def widths():
    """name -> vector width in bits, for TargetDesc construction."""
    return {n: d.width for n, d in SEMANTICS.items()}


class IntrinsicError(Exception):
    pass


def eval_intrinsic(name, operands):
    """Apply an intrinsic to lane-value lists. 256/512-bit variants run the
    family's 128-bit procedure once per 128-bit lane and concatenate."""
    d = SEMANTICS.get(name)
    if d is None:
        raise IntrinsicError("unknown intrinsic @%s" % name)
    if len(operands) != len(d.operand_types):
        raise IntrinsicError("@%s: expected %d operands" % (name, len(d.operand_types)))
    for lanes, t in zip(operands, d.operand_types):
        if len(lanes) != t.count:
            raise IntrinsicError("@%s: operand lane count %d != %d"
                                 % (name, len(lanes), t.count))
    factor = d.width // 128
    proc = _PROCS[name]
    if factor == 1:
        return proc(*operands)
    out = []
    pers = [t.count // factor for t in d.operand_types]
    for j in range(factor):
        chunk = [lanes[j * per:(j + 1) * per] for lanes, per in zip(operands, pers)]
        out.extend(proc(*chunk))
    return out
