"""Lane-kernel backend selection.

Prefers the compiled extension (revec._kernels_c); falls back to the pure
Python twin. Set REVEC_PURE_PYTHON=1 to force the fallback (used by the
benchmark and the parity tests).
"""

import os

if os.environ.get("REVEC_PURE_PYTHON"):
    from revec import _kernels_py as _impl
else:
    try:
        from revec import _kernels_c as _impl  # type: ignore[attr-defined]
    except ImportError:
        from revec import _kernels_py as _impl

BACKEND = _impl.BACKEND

OP_ADD = _impl.OP_ADD
OP_SUB = _impl.OP_SUB
OP_MUL = _impl.OP_MUL
OP_AND = _impl.OP_AND
OP_OR = _impl.OP_OR
OP_XOR = _impl.OP_XOR
OP_SHL = _impl.OP_SHL
OP_LSHR = _impl.OP_LSHR
OP_ASHR = _impl.OP_ASHR

PRED_EQ = _impl.PRED_EQ
PRED_NE = _impl.PRED_NE
PRED_SLT = _impl.PRED_SLT
PRED_SLE = _impl.PRED_SLE
PRED_SGT = _impl.PRED_SGT
PRED_SGE = _impl.PRED_SGE
PRED_ULT = _impl.PRED_ULT
PRED_ULE = _impl.PRED_ULE
PRED_UGT = _impl.PRED_UGT
PRED_UGE = _impl.PRED_UGE

canon_int = _impl.canon_int
f32_round = _impl.f32_round
binop_int = _impl.binop_int
binop_f32 = _impl.binop_f32
icmp_int = _impl.icmp_int
select_lanes = _impl.select_lanes
shuffle_lanes = _impl.shuffle_lanes
packus_i32 = _impl.packus_i32
packss_i16 = _impl.packss_i16
phadd_i16 = _impl.phadd_i16
avg_u8 = _impl.avg_u8
mulhi_i16 = _impl.mulhi_i16
sad_u8 = _impl.sad_u8
