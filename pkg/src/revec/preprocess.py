"""Preprocessing passes that expose widening opportunities.

Finds canonical inner loops, analyzes store addresses as affine forms in the
iteration index, computes the unroll factor from store-chain and reduction
phi widths (UF = max(lcm(VW, W)/W, UF) over consecutive chains W=SCW and
reduction phis W=PW), unrolls constant-trip loops with a non-unrolled
remainder loop, and splits associative reduction variables into one
accumulator per unrolled update.
"""

import math
from dataclasses import dataclass

from revec.ir import Block, Instr, Ptr, Vec, verify

UF_CAP = 8

REDUCTION_BINOPS = {"add", "and", "or", "xor"}
MINMAX_KINDS = {"sgt": "smax", "slt": "smin", "ugt": "umax", "ult": "umin"}


@dataclass
class NaturalLoop:
    header: str
    latch: str
    body: list                    # block labels
    exit: str
    preheader: str
    induction: str | None = None  # controlling phi name
    trip_count: int | None = None
    step: int | None = None       # elements advanced per iteration
    cmp_name: str | None = None   # the exit compare
    cmp_pred: str | None = None
    limit: int | None = None
    init: int | None = None


@dataclass(frozen=True)
class AddressExpr:
    base: str
    c0: int
    c1: int  # coefficient on the 0-based iteration index


@dataclass
class StoreChain:
    base: str
    stores: list                  # Instr, ascending by offset
    value_type: object            # Vec
    offsets: list                 # c0 per store
    c1: int
    consecutive_across_iterations: bool = False

    @property
    def store_width(self):
        return self.value_type.bits

    @property
    def chain_width(self):
        return self.store_width * len(self.stores)


@dataclass
class ReductionChain:
    phi: Instr
    kind: str                     # add/and/or/xor/smin/smax/umin/umax/fadd
    links: list                   # per update: Instr or (icmp Instr, select Instr)
    other_operands: list          # the non-carried operand of each update

    @property
    def update_names(self):
        out = []
        for link in self.links:
            out.append(link[1].name if isinstance(link, tuple) else link.name)
        return out


# ---------------------------------------------------------------------------
# Loop discovery


def find_inner_loops(fn, diagnostics=None):
    """Innermost canonical loops (single latch, single exit). Loops failing
    canonical form are skipped, with a note in `diagnostics` if given."""
    from revec.ir import dominators, predecessors, successors

    dom = dominators(fn)
    preds = predecessors(fn)
    notes = diagnostics if diagnostics is not None else []

    back_edges = []
    for blk in fn.blocks:
        for s in successors(blk):
            if s in dom[blk.label]:
                back_edges.append((blk.label, s))

    loops = []
    for latch, header in back_edges:
        body = {header}
        stack = [latch]
        while stack:
            b = stack.pop()
            if b in body:
                continue
            body.add(b)
            stack.extend(preds[b])
        loops.append((header, latch, body))

    # keep innermost only: no other loop strictly nested inside
    inner = []
    for header, latch, body in loops:
        nested = any(h2 != header and h2 in body for h2, _, b2 in loops)
        if nested:
            continue
        inner.append((header, latch, body))

    out = []
    for header, latch, body in inner:
        latches = [p for p in preds[header] if p in body]
        if len(latches) != 1:
            notes.append("loop %s: multiple latches" % header)
            continue
        exits = set()
        for b in body:
            for s in successors(fn.block(b)):
                if s not in body:
                    exits.add(s)
        if len(exits) != 1:
            notes.append("loop %s: not a single-exit loop" % header)
            continue
        pre = [p for p in preds[header] if p not in body]
        if len(pre) != 1:
            notes.append("loop %s: needs exactly one preheader" % header)
            continue
        loop = NaturalLoop(header=header, latch=latch,
                           body=sorted(body, key=[b.label for b in fn.blocks].index),
                           exit=exits.pop(), preheader=pre[0])
        _analyze_trip(fn, loop)
        out.append(loop)
    out.sort(key=lambda lp: [b.label for b in fn.blocks].index(lp.header))
    return out


def induction_steps(fn, loop_or_label):
    """Affine phis of a single-block loop: name -> (const init, const step).
    The step is the total constant added along the phi's latch chain."""
    header = loop_or_label if isinstance(loop_or_label, str) else loop_or_label.header
    blk = fn.block(header)
    defs = {ins.name: ins for b in fn.blocks for ins in b.instrs if ins.name}
    out = {}
    for phi in blk.phis():
        if len(phi.operands) != 2 or header not in (phi.labels or []):
            continue
        latch_idx = phi.labels.index(header)
        init_name = phi.operands[1 - latch_idx]
        latch_name = phi.operands[latch_idx]
        init_ins = defs.get(init_name)
        if init_ins is None or init_ins.op != "const" or isinstance(init_ins.type, Vec):
            continue
        step = _chain_step(defs, phi.name, latch_name)
        if step is None:
            continue
        out[phi.name] = (init_ins.payload, step)
    return out


def _chain_step(defs, phi_name, latch_name):
    total = 0
    cur = latch_name
    for _ in range(64):
        if cur == phi_name:
            return total
        ins = defs.get(cur)
        if ins is None or ins.op != "add" or isinstance(ins.type, Vec):
            return None
        a, b = ins.operands
        ca = defs.get(a)
        cb = defs.get(b)
        if cb is not None and cb.op == "const" and not isinstance(cb.type, Vec):
            total += cb.payload
            cur = a
        elif ca is not None and ca.op == "const" and not isinstance(ca.type, Vec):
            total += ca.payload
            cur = b
        else:
            return None
    return None


def _analyze_trip(fn, loop):
    """Fill induction/trip_count/step from the latch's exit test. The
    canonical shape is `icmp {slt|ult|ne} i64 %iv.next, %limit` followed by
    `condbr %cmp, header, exit` with constant init/step/limit."""
    blk = fn.block(loop.latch)
    term = blk.terminator
    if term.op != "condbr" or term.labels[0] != loop.header or term.labels[1] != loop.exit:
        return
    defs = {ins.name: ins for b in fn.blocks for ins in b.instrs if ins.name}
    cmp_ins = defs.get(term.operands[0])
    if cmp_ins is None or cmp_ins.op != "icmp" or cmp_ins.pred not in ("slt", "ult", "ne"):
        return
    limit_ins = defs.get(cmp_ins.operands[1])
    if limit_ins is None or limit_ins.op != "const" or isinstance(limit_ins.type, Vec):
        return
    ivs = induction_steps(fn, loop.header)
    for phi_name, (init, step) in ivs.items():
        phi = defs[phi_name]
        latch_idx = phi.labels.index(loop.latch)
        if phi.operands[latch_idx] != cmp_ins.operands[0]:
            continue
        if step <= 0:
            continue
        limit = limit_ins.payload
        if cmp_ins.pred in ("slt", "ult"):
            trips = max(1, -(-(limit - init) // step))
        else:  # ne
            if (limit - init) % step != 0:
                return
            trips = (limit - init) // step
            if trips < 1:
                return
        loop.induction = phi_name
        loop.trip_count = trips
        loop.step = step
        loop.cmp_name = cmp_ins.name
        loop.cmp_pred = cmp_ins.pred
        loop.limit = limit
        loop.init = init
        return


# ---------------------------------------------------------------------------
# Affine addresses and store chains


def affine_scalar(fn, ivs, name, _defs=None, _seen=None):
    """Value -> (c0, c1) with value = c0 + c1*k for iteration index k, or
    None if not affine. `ivs` maps induction phi names to (init, step)."""
    defs = _defs if _defs is not None else {
        ins.name: ins for b in fn.blocks for ins in b.instrs if ins.name}
    seen = _seen if _seen is not None else set()
    if name in seen:
        return None
    seen = seen | {name}
    if name in ivs:
        init, step = ivs[name]
        return (init, step)
    ins = defs.get(name)
    if ins is None:
        return None  # parameter or unknown
    if ins.op == "const" and not isinstance(ins.type, Vec):
        return (ins.payload, 0)
    if ins.op in ("add", "sub") and not isinstance(ins.type, Vec):
        a = affine_scalar(fn, ivs, ins.operands[0], defs, seen)
        b = affine_scalar(fn, ivs, ins.operands[1], defs, seen)
        if a is None or b is None:
            return None
        if ins.op == "add":
            return (a[0] + b[0], a[1] + b[1])
        return (a[0] - b[0], a[1] - b[1])
    if ins.op == "mul" and not isinstance(ins.type, Vec):
        a = affine_scalar(fn, ivs, ins.operands[0], defs, seen)
        b = affine_scalar(fn, ivs, ins.operands[1], defs, seen)
        if a is None or b is None:
            return None
        if a[1] == 0:
            return (a[0] * b[0], a[0] * b[1])
        if b[1] == 0:
            return (a[0] * b[0], b[0] * a[1])
        return None
    return None


def address_of(fn, ivs, ptr_name, _defs=None):
    """Pointer value -> AddressExpr(base param, c0, c1), or None (opaque)."""
    defs = _defs if _defs is not None else {
        ins.name: ins for b in fn.blocks for ins in b.instrs if ins.name}
    params = {p for p, t in fn.params if isinstance(t, Ptr)}
    c0, c1 = 0, 0
    cur = ptr_name
    for _ in range(64):
        if cur in params:
            return AddressExpr(cur, c0, c1)
        ins = defs.get(cur)
        if ins is None or ins.op != "ptradd":
            return None
        off = affine_scalar(fn, ivs, ins.operands[1], defs)
        if off is None:
            return None
        c0 += off[0]
        c1 += off[1]
        cur = ins.operands[0]
    return None


def analyze_store_chains(fn, loop):
    """Maximal chains of adjacent vector stores in the loop body, ordered by
    ascending offset. consecutive_across_iterations means unrolling extends
    the chain: the per-iteration advance equals the elements stored."""
    ivs = induction_steps(fn, loop.header) if loop is not None else {}
    blocks = loop.body if loop is not None else [b.label for b in fn.blocks]
    defs = {ins.name: ins for b in fn.blocks for ins in b.instrs if ins.name}
    types = fn.types()

    groups = {}
    for label in blocks:
        for ins in fn.block(label).instrs:
            if ins.op != "store":
                continue
            vt = types[ins.operands[0]]
            if not isinstance(vt, Vec):
                continue
            addr = address_of(fn, ivs, ins.operands[1], defs)
            if addr is None:
                continue
            groups.setdefault((addr.base, addr.c1, vt), []).append((addr.c0, ins))

    chains = []
    for (base, c1, vt), items in groups.items():
        items.sort(key=lambda t: t[0])
        run = [items[0]]
        for off, ins in items[1:]:
            if off == run[-1][0] + vt.count:
                run.append((off, ins))
            else:
                chains.append(_mk_chain(base, run, vt, c1))
                run = [(off, ins)]
        chains.append(_mk_chain(base, run, vt, c1))
    chains.sort(key=lambda ch: (ch.base, ch.offsets[0]))
    return chains


def _mk_chain(base, run, vt, c1):
    chain = StoreChain(base=base, stores=[ins for _, ins in run],
                       value_type=vt, offsets=[off for off, _ in run], c1=c1)
    chain.consecutive_across_iterations = (c1 == vt.count * len(run))
    return chain


# ---------------------------------------------------------------------------
# Unroll factor


def compute_unroll_factor(fn, loop, target, chains=None):
    """UF starts at 1; every consecutive store chain with SCW < VW and every
    reduction phi with PW < VW raises it to lcm(VW, W)/W. Chains are visited
    fewest-stores-first. Capped at 8."""
    vw = target.max_vector_bits
    uf = 1
    if chains is None:
        chains = analyze_store_chains(fn, loop)
    for chain in sorted(chains, key=lambda ch: len(ch.stores)):
        scw = chain.chain_width
        if scw < vw and chain.consecutive_across_iterations:
            uf = max(math.lcm(vw, scw) // scw, uf)
    for red in find_reduction_chains(fn, loop):
        pw = red.phi.type.bits
        if pw < vw:
            uf = max(math.lcm(vw, pw) // pw, uf)
    return min(uf, UF_CAP)


# ---------------------------------------------------------------------------
# Reduction chains


def find_reduction_chains(fn, loop):
    """Loop-carried vector accumulators updated by an associative operation
    (add/and/or/xor, icmp+select min/max idioms, f32 add under reassoc)
    whose intermediate values have no other uses and whose header phi is
    consumed only by the update chain."""
    header = fn.block(loop.header)
    if loop.latch != loop.header or len(loop.body) != 1:
        return []
    defs = {ins.name: ins for b in fn.blocks for ins in b.instrs if ins.name}
    body_defs = {ins.name for ins in header.instrs if ins.name}
    uses = fn.uses()

    out = []
    for phi in header.phis():
        if not isinstance(phi.type, Vec):
            continue
        if len(phi.operands) != 2:
            continue
        latch_idx = phi.labels.index(loop.header)
        latch_val = phi.operands[latch_idx]

        chain = _walk_reduction(fn, loop, phi, latch_val, defs, body_defs, uses)
        if chain is not None:
            out.append(chain)
    return out


def _in_loop_uses(uses, loop, name, skip_phi=None):
    out = []
    for (blab, idx, k) in uses.get(name, []):
        if blab == loop.header:
            out.append((blab, idx, k))
    return out


def _walk_reduction(fn, loop, phi, latch_val, defs, body_defs, uses):
    header = fn.block(loop.header)
    instr_at = {ins.name: ins for ins in header.instrs if ins.name}

    # the phi itself must have no uses outside the loop
    for (blab, idx, k) in uses.get(phi.name, []):
        if blab != loop.header:
            return None

    kind = None
    links = []
    others = []
    cur = phi.name
    for _ in range(64):
        users = [header.instrs[idx] for (_, idx, _) in _in_loop_uses(uses, loop, cur)]
        users = [u for u in users if u is not phi]
        if not users:
            return None
        binops = [u for u in users if u.op in REDUCTION_BINOPS or
                  (u.op == "add" and isinstance(u.type, Vec) and u.type.elem.is_float)]
        selects = [u for u in users if u.op == "select"]
        icmps = [u for u in users if u.op == "icmp"]

        if len(users) == 1 and binops:
            u = binops[0]
            if not isinstance(u.type, Vec):
                return None
            k = "fadd" if u.type.elem.is_float else u.op
            if k == "fadd" and (u.op != "add" or not fn.reassoc):
                return None
            if kind is None:
                kind = k
            elif kind != k:
                return None
            other = u.operands[1] if u.operands[0] == cur else u.operands[0]
            if _depends_on(fn, other, phi.name, instr_at):
                return None
            links.append(u)
            others.append(other)
            nxt = u.name
        elif len(users) == 2 and len(selects) == 1 and len(icmps) == 1:
            c, s = icmps[0], selects[0]
            k = _minmax_kind(c, s, cur)
            if k is None:
                return None
            if kind is None:
                kind = k
            elif kind != k:
                return None
            other = c.operands[1] if c.operands[0] == cur else c.operands[0]
            if _depends_on(fn, other, phi.name, instr_at):
                return None
            # the icmp feeds only this select
            c_uses = uses.get(c.name, [])
            if len(c_uses) != 1:
                return None
            links.append((c, s))
            others.append(other)
            nxt = s.name
        else:
            return None

        if nxt == latch_val:
            # intermediate links may not leak; only the final one may
            for link in links[:-1]:
                nm = link[1].name if isinstance(link, tuple) else link.name
                for (blab, idx, k2) in uses.get(nm, []):
                    ins2 = fn.block(blab).instrs[idx]
                    if blab != loop.header:
                        return None
                    if ins2 is phi:
                        return None
            return ReductionChain(phi=phi, kind=kind, links=links, other_operands=others)
        cur = nxt
    return None


def _minmax_kind(c, s, cur):
    if s.operands[0] != c.name:
        return None
    a, b = c.operands
    if cur not in (a, b):
        return None
    sa, sb = s.operands[1], s.operands[2]
    kind = MINMAX_KINDS.get(c.pred)
    if kind is None:
        return None
    if (sa, sb) == (a, b):
        return kind
    if (sa, sb) == (b, a):
        flip = {"smax": "smin", "smin": "smax", "umax": "umin", "umin": "umax"}
        return flip[kind]
    return None


def _depends_on(fn, name, phi_name, instr_at, _seen=None):
    if name == phi_name:
        return True
    seen = _seen if _seen is not None else set()
    if name in seen:
        return False  # a cycle through some other phi
    seen.add(name)
    ins = instr_at.get(name)
    if ins is None:
        return False  # defined outside the loop
    return any(_depends_on(fn, o, phi_name, instr_at, seen) for o in ins.operands)


def identity_lane(kind, elem):
    if kind in ("add", "or", "xor"):
        return 0
    if kind == "fadd":
        return 0.0
    if kind == "and":
        return -1 if elem.signed else (1 << elem.bits) - 1
    if kind == "smax":
        return -(1 << (elem.bits - 1))
    if kind == "smin":
        return (1 << (elem.bits - 1)) - 1
    if kind == "umax":
        return 0
    if kind == "umin":
        return (1 << elem.bits) - 1
    raise ValueError("no identity for %r" % kind)


# ---------------------------------------------------------------------------
# Unrolling


def _uniq(taken, base):
    cand = base
    while cand in taken:
        cand += "_"
    taken.add(cand)
    return cand


def unroll_loop(fn, loop, uf):
    """Replicate the single-block loop body uf times (values chained through
    the loop-carried phis), multiply the induction step by uf, and emit a
    non-unrolled remainder loop for trip_count % uf leftover iterations.
    Returns (applied, diagnostic)."""
    if uf < 2:
        return False, "unroll factor %d < 2" % uf
    if loop.trip_count is None:
        return False, "loop %s: trip count is not a compile-time constant" % loop.header
    if loop.header != loop.latch or len(loop.body) != 1:
        return False, "loop %s: not a single-block loop" % loop.header
    trips = loop.trip_count
    main_trips, rem = trips // uf, trips % uf
    if main_trips < 1:
        return False, "loop %s: trip count %d below unroll factor" % (loop.header, trips)

    blk = fn.block(loop.header)
    phis = blk.phis()
    body = blk.instrs[len(phis):-1]
    term = blk.instrs[-1]
    taken = set(fn.value_names())

    latch_of = {}
    for phi in phis:
        latch_of[phi.name] = phi.operands[phi.labels.index(loop.latch)]

    # sub-iteration r=0 is the original body; carried values start at the phis
    carried = {phi.name: phi.name for phi in phis}
    remap = dict(carried)
    for ins in body:
        if ins.name:
            remap[ins.name] = ins.name

    copies = []
    for r in range(1, uf):
        carried = {p: remap.get(latch_of[p], latch_of[p]) for p in carried}
        remap = dict(carried)
        for ins in body:
            new = ins.clone()
            new.uid = -1
            new.operands = [remap.get(o, o) for o in new.operands]
            if new.name:
                new.name = _uniq(taken, "%s.u%d" % (new.name, r))
                remap[ins.name] = new.name
            copies.append(new)
    final = remap

    # outside values must see the last sub-iteration (or the remainder loop)
    outside_map = {}
    for ins in body:
        if ins.name:
            outside_map[ins.name] = final[ins.name]
    for phi in phis:
        # value of the carried variable in the last executed iteration;
        # patched to the remainder phi below when a remainder exists
        outside_map[phi.name] = carried[phi.name]

    new_term = term.clone()
    new_term.operands = [final.get(o, o) for o in new_term.operands]

    defs = {ins.name: ins for b in fn.blocks for ins in b.instrs if ins.name}

    # rebuild the loop block
    for phi in phis:
        idx = phi.labels.index(loop.latch)
        phi.operands[idx] = final.get(latch_of[phi.name], latch_of[phi.name])
    blk.instrs = phis + body + copies + [new_term]

    rem_label = None
    if rem > 0:
        rem_label = _relabel(fn, loop.header + ".rem")
        rem_remap = {}
        rem_phis = []
        for phi in phis:
            rp = phi.clone()
            rp.uid = -1
            rp.name = _uniq(taken, phi.name + ".rem")
            main_in = final.get(latch_of[phi.name], latch_of[phi.name])
            rp.labels = [loop.header, rem_label]
            rp.operands = [main_in, None]  # latch side patched after body clone
            rem_phis.append(rp)
            rem_remap[phi.name] = rp.name
        rem_body = []
        for ins in body:
            new = ins.clone()
            new.uid = -1
            new.operands = [rem_remap.get(o, o) for o in new.operands]
            if new.name:
                new.name = _uniq(taken, ins.name + ".rem")
                rem_remap[ins.name] = new.name
            rem_body.append(new)
        for rp, phi in zip(rem_phis, phis):
            rp.operands[1] = rem_remap.get(latch_of[phi.name], latch_of[phi.name])
        rem_term = term.clone()
        rem_term.uid = -1
        rem_term.operands = [rem_remap.get(o, o) for o in rem_term.operands]
        rem_term.labels = [rem_label, loop.exit]
        rem_block = Block(label=rem_label, instrs=rem_phis + rem_body + [rem_term])

        # main loop now exits into the remainder loop, with a lowered limit
        new_term.labels = [loop.header, rem_label]
        main_limit = loop.init + main_trips * uf * loop.step
        cmp_final_name = final[loop.cmp_name]
        cmp_final = next(i for i in blk.instrs if i.name == cmp_final_name)
        limit_ins = defs[cmp_final.operands[1]]
        lim_name = _uniq(taken, "limit.main")
        pre_blk = fn.block(loop.preheader)
        pre_blk.instrs.insert(len(pre_blk.instrs) - 1,
                              Instr(op="const", name=lim_name, type=limit_ins.type,
                                    payload=main_limit))
        cmp_final.operands[1] = lim_name

        pos = [b.label for b in fn.blocks].index(loop.header)
        fn.blocks.insert(pos + 1, rem_block)

        for ins in body:
            if ins.name:
                outside_map[ins.name] = rem_remap[ins.name]
        for phi in phis:
            outside_map[phi.name] = rem_remap[phi.name]

        # phis elsewhere that named the loop as predecessor now see the
        # remainder loop
        for b in fn.blocks:
            if b.label in (loop.header, rem_label):
                continue
            for p in b.phis():
                p.labels = [rem_label if l == loop.header else l for l in p.labels]

    inside = {loop.header, rem_label} if rem_label else {loop.header}
    for b in fn.blocks:
        if b.label in inside:
            continue
        for ins in b.instrs:
            ins.operands = [outside_map.get(o, o) for o in ins.operands]

    fn.assign_uids()
    return True, None


def _relabel(fn, base):
    labels = {b.label for b in fn.blocks}
    cand = base
    while cand in labels:
        cand += "_"
    return cand


# ---------------------------------------------------------------------------
# Reduction splitting


def split_reductions(fn, loop, uf):
    """Give each of the uf unrolled updates its own accumulator: fresh phis
    initialized to the original incoming value (first) and the operation's
    identity (rest), and an epilogue tree folding the accumulators back.
    Integer results are bit-identical. Returns the number of chains split."""
    if uf < 2:
        return 0
    chains = [c for c in find_reduction_chains(fn, loop) if len(c.links) == uf]
    header = fn.block(loop.header)
    taken = set(fn.value_names())
    split = 0

    for chain in chains:
        phi = chain.phi
        elem = phi.type.elem
        latch_idx = phi.labels.index(loop.latch)
        entry_label = phi.labels[1 - latch_idx]
        entry_val = phi.operands[1 - latch_idx]

        pre_blk = fn.block(loop.preheader)
        new_phis = []
        for i, link in enumerate(chain.links):
            name = _uniq(taken, "%s.s%d" % (phi.name, i + 1))
            if i == 0:
                init = entry_val
            else:
                ident = identity_lane(chain.kind, elem)
                cname = _uniq(taken, "%s.id%d" % (phi.name, i + 1))
                pre_blk.instrs.insert(
                    len(pre_blk.instrs) - 1,
                    Instr(op="const", name=cname, type=phi.type,
                          payload=[ident] * phi.type.count))
                init = cname
            p = Instr(op="phi", name=name, type=phi.type,
                      operands=[init, None], labels=[entry_label, loop.latch])
            new_phis.append(p)

        # rebind each update to its own accumulator
        for i, link in enumerate(chain.links):
            carried_in = phi.name if i == 0 else chain.update_names[i - 1]
            ins_list = link if isinstance(link, tuple) else (link,)
            for ins in ins_list:
                ins.operands = [new_phis[i].name if o == carried_in else o
                                for o in ins.operands]
            new_phis[i].operands[1] = chain.update_names[i]

        # drop the original phi, prepend the accumulators
        header.instrs.remove(phi)
        header.instrs[0:0] = new_phis

        # epilogue: fold the accumulators; placed in the exit block unless a
        # remainder loop consumes the live-out on the loop's exit edge
        uses = fn.uses()
        live_out = chain.update_names[-1]
        outside_instrs = [fn.block(b).instrs[i] for (b, i, _) in uses.get(live_out, [])
                          if b != loop.header]
        needs_edge_value = any(ins.op == "phi" for ins in outside_instrs)
        if needs_edge_value:
            target_blk = header
            insert_at = len(header.instrs) - 1
        else:
            target_blk = fn.block(loop.exit)
            insert_at = len(target_blk.phis())

        fold_instrs, fold_name = _fold_tree(chain, phi.type, taken)
        target_blk.instrs[insert_at:insert_at] = fold_instrs

        for ins in outside_instrs:
            ins.operands = [fold_name if o == live_out else o for o in ins.operands]
        split += 1

    fn.assign_uids()
    return split


def _fold_tree(chain, vtype, taken):
    """Balanced fold of the accumulator updates with the chain's operation."""
    vals = list(chain.update_names)
    out = []
    level = 0
    while len(vals) > 1:
        nxt = []
        for i in range(0, len(vals) - 1, 2):
            a, b = vals[i], vals[i + 1]
            if chain.kind in ("smax", "smin", "umax", "umin"):
                pred = {"smax": "sgt", "smin": "slt", "umax": "ugt", "umin": "ult"}[chain.kind]
                cn = _uniq(taken, "%s.foldc%d" % (chain.phi.name, len(out)))
                sn = _uniq(taken, "%s.fold%d" % (chain.phi.name, len(out)))
                out.append(Instr(op="icmp", name=cn, type=vtype, pred=pred,
                                 operands=[a, b]))
                out.append(Instr(op="select", name=sn, type=vtype,
                                 operands=[cn, a, b]))
                nxt.append(sn)
            else:
                op = "add" if chain.kind == "fadd" else chain.kind
                sn = _uniq(taken, "%s.fold%d" % (chain.phi.name, len(out)))
                out.append(Instr(op=op, name=sn, type=vtype, operands=[a, b]))
                nxt.append(sn)
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
        level += 1
    return out, vals[0]


# ---------------------------------------------------------------------------
# Pipeline entry


def preprocess(fn, target):
    """Unroll + split every canonical inner loop. Returns per-function stats:
    {'unroll_factor', 'reductions_split', 'notes'}."""
    notes = []
    stats = {"unroll_factor": 1, "reductions_split": 0, "notes": notes}
    loops = find_inner_loops(fn, diagnostics=notes)
    for loop in loops:
        uf = compute_unroll_factor(fn, loop, target)
        if uf < 2:
            continue
        applied, diag = unroll_loop(fn, loop, uf)
        if not applied:
            notes.append(diag)
            continue
        stats["unroll_factor"] = max(stats["unroll_factor"], uf)
        fresh = [l for l in find_inner_loops(fn) if l.header == loop.header]
        if fresh:
            stats["reductions_split"] += split_reductions(fn, fresh[0], uf)
    diags = verify(fn)
    if diags:
        raise AssertionError("preprocess broke @%s: %s" % (fn.name, diags))
    return stats
