"""Pack-graph widening.

Seeds packs from adjacent vector stores and same-typed vector phis, grows a
graph along use-def operand columns (isomorphic + independent + adjacent
memory + shuffle rules), classifies shuffle packs against patterns A-D,
gathers non-mergeable leaves with shuffle trees, gates on an additive cost
model, and rewrites the function to wide vectors.
"""

from dataclasses import dataclass, field

from revec.ir import (
    BINOPS, Instr, Vec, erase_dead, opcode_class, verify,
)
from revec.preprocess import _uniq, address_of, induction_steps

PACK_KINDS = ("store-root", "phi-root", "lifted-op", "intrinsic-call",
              "shuffle", "load", "gather-leaf")
PATTERNS = ("A", "B", "C", "D", "GATHER")


@dataclass
class Pack:
    members: list                 # Instr, in column (or address) order
    kind: str
    block: str
    pattern: str | None = None
    operand_info: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def p(self):
        return len(self.members)

    def narrow_type(self, types):
        m = self.members[0]
        if m.op == "store":
            return types[m.operands[0]]
        return m.type

    def member_uids(self):
        return tuple(m.uid for m in self.members)


@dataclass
class ChildPack:
    pack: object


@dataclass
class ChildConst:
    lanes: list
    vtype: object


@dataclass
class CostReport:
    benefit: int = 0
    gather_cost: int = 0
    extract_cost: int = 0

    @property
    def profitable(self):
        return self.benefit > self.gather_cost + self.extract_cost


@dataclass
class RevecGraph:
    block: str
    roots: list
    nodes: list
    pattern_counts: dict = field(default_factory=dict)

    def packs_by_kind(self):
        out = {}
        for p in self.nodes:
            out[p.kind] = out.get(p.kind, 0) + 1
        return out

    def mergeable_nodes(self):
        return [p for p in self.nodes if p.kind != "gather-leaf"]


def _pow2_at_most(n):
    p = 1
    while p * 2 <= n:
        p *= 2
    return p


# ---------------------------------------------------------------------------
# Root packs


def find_root_packs(fn, block_label, target):
    """Adjacent-store chains and same-typed vector phi groups, chunked into
    packs of at most VF_max = VW/SW members (power of two, >= 2). Store
    packs come first, ordered by ascending address."""
    blk = fn.block(block_label)
    types = fn.types()
    ivs = induction_steps(fn, block_label)
    pos = {ins.uid: i for i, ins in enumerate(blk.instrs)}

    roots = []
    for base, run in _store_runs(fn, blk, types, ivs):
        vt = types[run[0][1].operands[0]]
        vf = target.max_vector_bits // vt.bits
        i = 0
        while len(run) - i >= 2:
            p = min(_pow2_at_most(len(run) - i), _pow2_at_most(vf))
            if p < 2:
                break
            members = [ins for _, ins in run[i:i + p]]
            if _memory_safe(fn, blk, types, ivs, members, pos):
                roots.append(Pack(members=members, kind="store-root",
                                  block=block_label))
            i += p

    groups = {}
    for phi in blk.phis():
        if isinstance(phi.type, Vec):
            groups.setdefault(phi.type, []).append(phi)
    for vt, phis in groups.items():
        vf = target.max_vector_bits // vt.bits
        i = 0
        while len(phis) - i >= 2:
            p = min(_pow2_at_most(len(phis) - i), _pow2_at_most(vf))
            if p < 2:
                break
            roots.append(Pack(members=phis[i:i + p], kind="phi-root",
                              block=block_label))
            i += p
    return roots


def _store_runs(fn, blk, types, ivs):
    """Maximal same-base adjacent store runs in the block. Runs are ordered
    by the program position of their first store (seeding follows discovery
    order); stores within a run ascend by address."""
    pos = {ins.uid: i for i, ins in enumerate(blk.instrs)}
    groups = {}
    for ins in blk.instrs:
        if ins.op != "store":
            continue
        vt = types[ins.operands[0]]
        if not isinstance(vt, Vec):
            continue
        addr = address_of(fn, ivs, ins.operands[1])
        if addr is None:
            continue
        groups.setdefault((addr.base, addr.c1, vt), []).append((addr.c0, ins))
    out = []
    for (base, _, vt), items in groups.items():
        items.sort(key=lambda t: t[0])
        run = [items[0]]
        for off, ins in items[1:]:
            if off == run[-1][0] + vt.count:
                run.append((off, ins))
            else:
                out.append((base, run))
                run = [(off, ins)]
        out.append((base, run))
    out.sort(key=lambda br: min(pos[ins.uid] for _, ins in br[1]))
    return out


def _ranges_overlap(a0, a1, b0, b1):
    return a0 < b1 and b0 < a1


def _memory_safe(fn, blk, types, ivs, members, pos):
    """No aliasing memory effect between the first and last member. Pointer
    params are pairwise non-aliasing; intrinsic calls are pure."""
    lo = min(pos[m.uid] for m in members)
    hi = max(pos[m.uid] for m in members)
    uids = {m.uid for m in members}
    is_store_pack = members[0].op == "store"

    spans = []
    base = None
    for m in members:
        ptr = m.operands[1] if m.op == "store" else m.operands[0]
        addr = address_of(fn, ivs, ptr)
        if addr is None:
            return False
        base = addr.base
        vt = types[m.operands[0]] if m.op == "store" else m.type
        spans.append((addr.c0, addr.c0 + vt.count))

    for i in range(lo + 1, hi):
        ins = blk.instrs[i]
        if ins.uid in uids:
            continue
        if ins.op == "store":
            addr = address_of(fn, ivs, ins.operands[1])
            if addr is None:
                return False
            if addr.base != base:
                continue
            vt = types[ins.operands[0]]
            if any(_ranges_overlap(addr.c0, addr.c0 + vt.count, s0, s1)
                   for s0, s1 in spans):
                return False
        elif ins.op == "load" and is_store_pack:
            addr = address_of(fn, ivs, ins.operands[0])
            if addr is None:
                return False
            if addr.base != base:
                continue
            if any(_ranges_overlap(addr.c0, addr.c0 + ins.type.count, s0, s1)
                   for s0, s1 in spans):
                return False
    return True


# ---------------------------------------------------------------------------
# Graph construction


class _Builder:
    def __init__(self, fn, block_label, target, imap):
        self.fn = fn
        self.blk = fn.block(block_label)
        self.block_label = block_label
        self.target = target
        self.imap = imap
        self.types = fn.types()
        self.defs = {ins.name: ins for b in fn.blocks for ins in b.instrs if ins.name}
        self.def_block = {}
        for b in fn.blocks:
            for ins in b.instrs:
                if ins.name:
                    self.def_block[ins.name] = b.label
        self.ivs = induction_steps(fn, block_label)
        self.pos = {ins.uid: i for i, ins in enumerate(self.blk.instrs)}
        self.memo = {}
        self.nodes = []
        self.pattern_counts = {p: 0 for p in PATTERNS}

    def register(self, pack):
        self.nodes.append(pack)
        return pack

    def grow_root(self, root):
        self.memo[root.member_uids()] = root
        self.register(root)
        if root.kind == "store-root":
            col = [m.operands[0] for m in root.members]
            root.operand_info = [self.child_for_column(root, col)]
        else:  # phi-root
            self.grow_phi(root)
        return root

    def grow_phi(self, pack):
        first = pack.members[0]
        labels = list(first.labels)
        pack.extra["labels"] = labels
        pack.operand_info = []
        for lab in labels:
            col = []
            for m in pack.members:
                col.append(m.operands[m.labels.index(lab)])
            # operands of a phi live on the incoming edge, not in this block
            pack.operand_info.append(self.child_for_column(pack, col, from_block=lab))

    def child_for_column(self, parent, col, from_block=None):
        """Build the child descriptor for one operand column."""
        insts = [self.defs.get(v) for v in col]

        if all(i is not None and i.op == "const" for i in insts):
            lanes = []
            for i in insts:
                lanes.extend(i.payload)
            vt = insts[0].type
            return ChildConst(lanes, Vec(vt.elem, len(lanes)))

        key = tuple(i.uid if i is not None else ("v", v) for i, v in zip(insts, col))
        if key in self.memo:
            return ChildPack(self.memo[key])

        pack = self.try_pack(col, insts, from_block)
        if pack is None:
            pack = self.gather_leaf(col)
        self.memo[key] = pack
        self.register(pack)
        if pack.kind == "shuffle" and pack.pattern == "D":
            views = pack.extra["views"]
            alpha = [v[0] for v in views]
            beta = [v[1] for v in views]
            pack.extra["alpha"] = self.child_for_column(pack, alpha)
            pack.extra["beta"] = self.child_for_column(pack, beta)
        elif pack.kind in ("lifted-op", "intrinsic-call"):
            arity = len(pack.members[0].operands)
            pack.operand_info = [
                self.child_for_column(pack, [m.operands[k] for m in pack.members])
                for k in range(arity)]
        elif pack.kind == "phi-root":
            self.grow_phi(pack)
        elif pack.kind == "load":
            pack.operand_info = []
        return ChildPack(pack)

    def gather_leaf(self, col):
        return Pack(members=[self.defs.get(v) for v in col], kind="gather-leaf",
                    block=self.block_label, extra={"values": list(col)})

    def try_pack(self, col, insts, from_block=None):
        """A column becomes a mergeable pack iff the isomorphism,
        independence, memory-adjacency, and shuffle conditions all hold."""
        if any(i is None for i in insts):
            return None
        if len(set(col)) != len(col):
            return None
        home = self.block_label if from_block is None else from_block
        if any(self.def_block[v] != home for v in col):
            return None
        if home != self.block_label:
            # cross-block operands are gathered on their edge
            return None
        first = insts[0]
        if any(i.op != first.op or i.type != first.type for i in insts):
            return None
        if not self._independent(insts):
            return None

        p = len(insts)
        wide_bits = first.type.bits * p if isinstance(first.type, Vec) else None
        if first.op in ("shuffle", "extract_subvec"):
            if wide_bits is None or wide_bits > self.target.max_vector_bits:
                return None
            return self.shuffle_pack(insts)
        if not isinstance(first.type, Vec) or wide_bits > self.target.max_vector_bits:
            return None
        if first.op == "load":
            offsets = []
            for i in insts:
                addr = address_of(self.fn, self.ivs, i.operands[0])
                if addr is None:
                    return None
                offsets.append((addr.base, addr.c0, addr.c1))
            base0, off0, c10 = offsets[0]
            for j, (b, o, c1) in enumerate(offsets):
                if b != base0 or c1 != c10 or o != off0 + j * first.type.count:
                    return None
            if not _memory_safe(self.fn, self.blk, self.types, self.ivs, insts, self.pos):
                return None
            return Pack(members=list(insts), kind="load", block=self.block_label)
        if first.op == "call":
            if any(i.callee != first.callee for i in insts):
                return None
            wide = self.imap.get((first.callee, p))
            if wide is None or wide not in self.target.legal_intrinsics:
                return None
            return Pack(members=list(insts), kind="intrinsic-call",
                        block=self.block_label, extra={"wide_name": wide})
        if first.op == "phi":
            return Pack(members=list(insts), kind="phi-root", block=self.block_label)
        if first.op in BINOPS or first.op == "select" or \
                (first.op == "icmp" and all(i.pred == first.pred for i in insts)):
            return Pack(members=list(insts), kind="lifted-op", block=self.block_label)
        return None

    def _independent(self, insts):
        uids = {i.uid for i in insts}
        names = {i.name for i in insts if i.name}

        def reaches(name, seen):
            ins = self.defs.get(name)
            if ins is None or ins.op == "phi":
                return False
            if name in seen:
                return False
            seen.add(name)
            for o in ins.operands:
                if o in names or reaches(o, seen):
                    return True
            return False

        for i in insts:
            for o in i.operands:
                if o in names and o != i.name:
                    return False
                if reaches(o, set()):
                    return False
        return True

    # -- shuffle patterns --------------------------------------------------

    def shuffle_pack(self, insts):
        views = []
        for i in insts:
            if i.op == "extract_subvec":
                src = i.operands[0]
                views.append((src, src, list(range(i.start, i.start + i.type.count))))
            else:
                views.append((i.operands[0], i.operands[1],
                              [None if e is None else e for e in i.mask]))
        pack = Pack(members=list(insts), kind="shuffle", block=self.block_label,
                    extra={"views": views})
        pack.pattern = self.classify(pack)
        self.pattern_counts[pack.pattern] += 1
        if pack.pattern == "GATHER":
            leaf = Pack(members=list(insts), kind="gather-leaf",
                        block=self.block_label, pattern="GATHER",
                        extra={"values": [i.name for i in insts]})
            return leaf
        return pack

    def classify(self, pack):
        views = pack.extra["views"]
        p = len(views)
        a_vals = [v[0] for v in views]
        b_vals = [v[1] for v in views]
        masks = [v[2] for v in views]
        n = self.types[a_vals[0]].count

        # A: sequential subvector extraction of one shared source
        if len(set(a_vals)) == 1:
            lens_ok = all(len(m) == n // p and n % p == 0 for m in masks)
            flat = [e for m in masks for e in m]
            if lens_ok and all(e is not None and e < n for e in flat) \
                    and flat == list(range(n)):
                return "A"
        # B: identical left operands and identical right operands
        if len(set(a_vals)) == 1 and len(set(b_vals)) == 1:
            return "B"
        # C: one shared operand, the others mergeable constants
        if len(set(a_vals)) == 1 and self._mergeable_consts(b_vals) is not None:
            return "C"
        if len(set(b_vals)) == 1 and self._mergeable_consts(a_vals) is not None:
            return "C"
        # D: generic lane widening
        if self._all_consts(a_vals) or self._all_consts(b_vals) \
                or len(set(a_vals)) == 1 or len(set(b_vals)) == 1 \
                or all(m == masks[0] for m in masks):
            return "D"
        return "GATHER"

    def _all_consts(self, vals):
        return _all_consts(self.defs, vals)

    def _mergeable_consts(self, vals):
        return _mergeable_consts(self.defs, vals)


def _all_consts(defs, vals):
    return all(defs.get(v) is not None and defs[v].op == "const" for v in vals)


def _mergeable_consts(defs, vals):
    """Elementwise merge of constant operands through undef lanes; None if
    the values are not all constants or defined lanes conflict."""
    if not _all_consts(defs, vals):
        return None
    payloads = [defs[v].payload for v in vals]
    merged = list(payloads[0])
    for pl in payloads[1:]:
        for k, lane in enumerate(pl):
            if lane is None:
                continue
            if merged[k] is None:
                merged[k] = lane
            elif merged[k] != lane:
                return None
    return merged


def _prune_unreachable(graph):
    """Keep only packs reachable from the roots (demotions can orphan
    children, which must not count toward benefit)."""
    reachable = []
    seen = set()
    stack = list(graph.roots)
    while stack:
        pk = stack.pop()
        if id(pk) in seen:
            continue
        seen.add(id(pk))
        reachable.append(pk)
        if pk.kind == "gather-leaf":
            continue
        for ch in pk.operand_info:
            if isinstance(ch, ChildPack):
                stack.append(ch.pack)
        for k in ("alpha", "beta"):
            ch = pk.extra.get(k)
            if isinstance(ch, ChildPack):
                stack.append(ch.pack)
    order = {id(pk): i for i, pk in enumerate(graph.nodes)}
    reachable.sort(key=lambda pk: order.get(id(pk), 1 << 30))
    graph.nodes = reachable


def build_graph(fn, roots, target, imap):
    """Grow the widening graph for the given root packs (all in one block)."""
    if not roots:
        raise ValueError("build_graph needs at least one root")
    builder = _Builder(fn, roots[0].block, target, imap)
    for root in roots:
        builder.grow_root(root)
    graph = RevecGraph(block=roots[0].block, roots=list(roots),
                       nodes=builder.nodes,
                       pattern_counts=builder.pattern_counts)
    _demote_unextractable(fn, graph)
    _prune_unreachable(graph)
    return graph


def _demote_unextractable(fn, graph):
    """A mergeable pack whose member has an out-of-graph use positioned
    before the pack's insertion point cannot be widened (the extract would
    not dominate the use); demote such packs to gather leaves."""
    blk = fn.block(graph.block)
    pos = {ins.uid: i for i, ins in enumerate(blk.instrs)}
    uses = fn.uses()
    changed = True
    while changed:
        changed = False
        member_uids = set()
        for pk in graph.mergeable_nodes():
            member_uids.update(m.uid for m in pk.members)
        for pk in graph.mergeable_nodes():
            if pk.kind in ("store-root", "phi-root"):
                continue
            if pk.kind == "load":
                # wide loads hoist to the first member (memory-safe by the
                # pack's no-intervening-aliasing-store check)
                insert_at = min(pos[m.uid] for m in pk.members)
            else:
                insert_at = max(pos[m.uid] for m in pk.members)
            bad = False
            for m in pk.members:
                if m.name is None:
                    continue
                for (blab, idx, _) in uses.get(m.name, []):
                    user = fn.block(blab).instrs[idx]
                    if user.uid in member_uids:
                        continue
                    if blab == graph.block and pos.get(user.uid, 1 << 30) < insert_at:
                        bad = True
            if bad:
                pk.kind = "gather-leaf"
                pk.extra["values"] = [m.name for m in pk.members]
                pk.operand_info = []
                changed = True


# ---------------------------------------------------------------------------
# Cost model


def estimate_profit(graph, target, fn):
    """Additive model: each mergeable pack contributes p*cost(narrow) -
    cost(wide); each gather leaf costs (p-1) tree shuffles; every
    out-of-graph use of a widened member costs one extract."""
    types = fn.types()
    cost = target.cost
    report = CostReport()

    member_uids = set()
    for pk in graph.mergeable_nodes():
        member_uids.update(m.uid for m in pk.members)

    for pk in graph.nodes:
        if pk.kind == "gather-leaf":
            vt = types[pk.extra["values"][0]]
            if isinstance(vt, Vec):
                report.gather_cost += (pk.p - 1) * cost.cost("gather", vt.bits * pk.p)
            continue
        vt = pk.narrow_type(types)
        cls = opcode_class(pk.members[0].op)
        narrow = cost.cost(cls, vt.bits)
        wide = 0 if pk.pattern == "A" else cost.cost(cls, vt.bits * pk.p)
        report.benefit += pk.p * narrow - wide

    uses = fn.uses()
    for pk in graph.mergeable_nodes():
        vt = pk.narrow_type(types)
        for m in pk.members:
            if m.name is None:
                continue
            for (blab, idx, _) in uses.get(m.name, []):
                user = fn.block(blab).instrs[idx]
                if user.uid not in member_uids:
                    report.extract_cost += cost.cost("extract", vt.bits * pk.p)
    return report


# ---------------------------------------------------------------------------
# Gather trees


def gather_tree(fn, values, vtype, taken, hint="gat"):
    """Binary tree of identity-mask shuffles concatenating len(values)
    same-typed narrow values; p-1 shuffles, element t of value j lands at
    wide lane j*m + t."""
    instrs = []
    level = [(v, vtype.count) for v in values]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            (va, ca), (vb, cb) = level[i], level[i + 1]
            name = _uniq(taken, "%s%d" % (hint, len(instrs)))
            instrs.append(Instr(op="shuffle", name=name,
                                type=Vec(vtype.elem, ca + cb),
                                operands=[va, vb],
                                mask=list(range(ca + cb))))
            nxt.append((name, ca + cb))
        level = nxt
    return instrs, level[0][0]


def gather_pack(fn, pack, types, taken):
    vals = pack.extra["values"]
    vts = {types[v] for v in vals}
    if len(vts) != 1:
        raise ValueError("gather of mixed member types")
    return gather_tree(fn, vals, vts.pop(), taken)


# ---------------------------------------------------------------------------
# Transformation


class _Transformer:
    def __init__(self, fn, graph, imap):
        self.fn = fn
        self.graph = graph
        self.blk = fn.block(graph.block)
        self.imap = imap
        self.types = fn.types()
        self.defs = {ins.name: ins for b in fn.blocks for ins in b.instrs if ins.name}
        self.taken = set(fn.value_names())
        self.wide = {}        # id(pack) -> wide value name
        self.anchor = {}      # id(pack) -> wide def Instr (None for pattern A)

    def insert_before(self, blk, anchor_ins, new_instrs):
        idx = blk.instrs.index(anchor_ins)
        blk.instrs[idx:idx] = new_instrs

    def run(self):
        for root in self.graph.roots:
            self.widen(root)
        self.rewire_and_erase()

    def wide_type(self, pack):
        vt = pack.narrow_type(self.types)
        return Vec(vt.elem, vt.count * pack.p)

    def last_member(self, pack):
        pos = {ins.uid: i for i, ins in enumerate(self.blk.instrs)}
        return max(pack.members, key=lambda m: pos[m.uid])

    def first_member(self, pack):
        pos = {ins.uid: i for i, ins in enumerate(self.blk.instrs)}
        return min(pack.members, key=lambda m: pos[m.uid])

    def materialize_child(self, child, blk, anchor):
        """Wide value for a child descriptor; consts and gather trees are
        emitted at the consumption point (anchor in blk)."""
        if isinstance(child, ChildConst):
            name = _uniq(self.taken, "wconst")
            ins = Instr(op="const", name=name, type=child.vtype,
                        payload=list(child.lanes))
            self.insert_before(blk, anchor, [ins])
            return name
        pack = child.pack
        if pack.kind == "gather-leaf":
            key = (id(pack), blk.label, id(anchor))
            if key in self.wide:
                return self.wide[key]
            instrs, name = gather_pack(self.fn, pack, self.types, self.taken)
            self.insert_before(blk, anchor, instrs)
            self.wide[key] = name
            return name
        return self.widen(pack)

    def widen(self, pack):
        key = id(pack)
        if key in self.wide:
            return self.wide[key]

        if pack.kind == "phi-root":
            name = _uniq(self.taken, "wphi")
            labels = pack.extra["labels"]
            ins = Instr(op="phi", name=name, type=self.wide_type(pack),
                        operands=[None] * len(labels), labels=list(labels))
            self.wide[key] = name
            self.anchor[key] = ins
            # keep the phi prefix intact: insert after the last member phi
            idx = max(self.blk.instrs.index(m) for m in pack.members) + 1
            self.blk.instrs[idx:idx] = [ins]
            for k, lab in enumerate(labels):
                child = pack.operand_info[k]
                if isinstance(child, ChildPack) and child.pack.kind != "gather-leaf":
                    ins.operands[k] = self.widen(child.pack)
                else:
                    # consts and gathers materialize on the incoming edge
                    inc = self.fn.block(lab)
                    ins.operands[k] = self.materialize_child(child, inc,
                                                             inc.instrs[-1])
            return name

        if pack.kind == "shuffle":
            return self.widen_shuffle(pack)

        anchor_member = self.last_member(pack)
        wide_instrs = []

        if pack.kind == "load":
            anchor_member = self.first_member(pack)
            name = _uniq(self.taken, "wload")
            ins = Instr(op="load", name=name, type=self.wide_type(pack),
                        operands=[pack.members[0].operands[0]])
            wide_instrs.append(ins)
        elif pack.kind == "store-root":
            self.wide[key] = None  # stores produce no value
            child = pack.operand_info[0]
            val = self.materialize_child(child, self.blk, anchor_member)
            ins = Instr(op="store", operands=[val, pack.members[0].operands[1]])
            self.insert_before(self.blk, anchor_member, [ins])
            self.anchor[key] = ins
            return None
        elif pack.kind == "intrinsic-call":
            name = _uniq(self.taken, "wcall")
            ops = [self.materialize_child(ch, self.blk, anchor_member)
                   for ch in pack.operand_info]
            from revec.intrinsics import SEMANTICS
            ins = Instr(op="call", name=name, callee=pack.extra["wide_name"],
                        type=SEMANTICS[pack.extra["wide_name"]].result_type,
                        operands=ops)
            wide_instrs.append(ins)
        elif pack.kind == "lifted-op":
            name = _uniq(self.taken, "w" + pack.members[0].op)
            ops = [self.materialize_child(ch, self.blk, anchor_member)
                   for ch in pack.operand_info]
            ins = Instr(op=pack.members[0].op, name=name,
                        type=self.wide_type(pack), operands=ops,
                        pred=pack.members[0].pred)
            wide_instrs.append(ins)
        else:
            raise AssertionError("cannot widen pack kind %r" % pack.kind)

        self.insert_before(self.blk, anchor_member, wide_instrs)
        self.wide[key] = name
        self.anchor[key] = wide_instrs[-1]
        return name

    def widen_shuffle(self, pack):
        key = id(pack)
        views = pack.extra["views"]
        masks = [v[2] for v in views]
        p = len(views)
        n = self.types[views[0][0]].count
        pattern = pack.pattern
        anchor_member = self.last_member(pack)

        if pattern == "A":
            self.wide[key] = views[0][0]
            self.anchor[key] = None
            return views[0][0]

        if pattern == "B":
            mask = [e for m in masks for e in m]
            a, b = views[0][0], views[0][1]
            name = _uniq(self.taken, "wshuf")
            ins = Instr(op="shuffle", name=name,
                        type=Vec(self.types[a].elem, len(mask)),
                        operands=[a, b], mask=mask)
        elif pattern == "C":
            a_vals = [v[0] for v in views]
            b_vals = [v[1] for v in views]
            merged_b = _mergeable_consts(self.defs, b_vals)
            cname = _uniq(self.taken, "wmerge")
            if len(set(a_vals)) == 1 and merged_b is not None:
                shared, merged, ctype = a_vals[0], merged_b, self.types[b_vals[0]]
                ops = [shared, cname]
            else:
                shared = b_vals[0]
                merged = _mergeable_consts(self.defs, a_vals)
                ctype = self.types[a_vals[0]]
                ops = [cname, shared]
            cins = Instr(op="const", name=cname, type=ctype, payload=merged)
            mask = [e for m in masks for e in m]
            name = _uniq(self.taken, "wshuf")
            ins = Instr(op="shuffle", name=name,
                        type=Vec(self.types[shared].elem, len(mask)),
                        operands=ops, mask=mask)
            self.insert_before(self.blk, anchor_member, [cins])
        else:  # D
            alpha = pack.extra["alpha"]
            beta = pack.extra["beta"]
            wa = self.materialize_child(alpha, self.blk, anchor_member)
            wb = self.materialize_child(beta, self.blk, anchor_member)
            mask = []
            for i, m in enumerate(masks, start=1):
                for e in m:
                    if e is None:
                        mask.append(None)
                    elif e < n:
                        mask.append(e + n * (i - 1))
                    else:
                        mask.append(e + n * (p - 1) + n * (i - 1))
            name = _uniq(self.taken, "wshuf")
            ins = Instr(op="shuffle", name=name,
                        type=Vec(self.types[views[0][0]].elem, len(mask)),
                        operands=[wa, wb], mask=mask)

        self.insert_before(self.blk, anchor_member, [ins])
        self.wide[key] = name
        self.anchor[key] = ins
        return name

    def rewire_and_erase(self):
        mergeable = self.graph.mergeable_nodes()
        member_uids = set()
        for pk in mergeable:
            member_uids.update(m.uid for m in pk.members)

        # out-of-graph uses of widened members are fed by subvector extracts;
        # resolve use sites to instruction objects first, since inserting the
        # extracts shifts block indices
        user_objs = {}
        for b in self.fn.blocks:
            for ins in b.instrs:
                for o in ins.operands:
                    user_objs.setdefault(o, []).append(ins)
        for pk in mergeable:
            wide_name = self.wide.get(id(pk))
            anchor = self.anchor.get(id(pk))
            vt = pk.narrow_type(self.types)
            for j, m in enumerate(pk.members):
                if m.name is None:
                    continue
                outside = [u for u in user_objs.get(m.name, [])
                           if u.uid not in member_uids and u.name != wide_name]
                if not outside:
                    continue
                if anchor is None:
                    continue  # pattern A: the narrow extract stays as-is
                ename = _uniq(self.taken, "wext")
                eins = Instr(op="extract_subvec", name=ename,
                             type=vt, operands=[wide_name],
                             start=j * vt.count)
                ablk = next(b for b in self.fn.blocks if anchor in b.instrs)
                idx = ablk.instrs.index(anchor) + 1
                while idx < len(ablk.instrs) and ablk.instrs[idx].op == "phi":
                    idx += 1
                ablk.instrs[idx:idx] = [eins]
                for user in outside:
                    user.operands = [ename if o == m.name else o for o in user.operands]

        # drop replaced narrow instructions. A member survives only if some
        # instruction outside the replaced set still uses it (covers pattern
        # A leftovers and values shared with gather trees); phi/update
        # cycles between members are erased together.
        members = [m for pk in mergeable for m in pk.members]
        fresh_users = {}
        for b in self.fn.blocks:
            for ins in b.instrs:
                for o in ins.operands:
                    fresh_users.setdefault(o, []).append(ins)
        survivors = set()
        changed = True
        while changed:
            changed = False
            for m in members:
                if m.name is None or m.uid in survivors:
                    continue
                for user in fresh_users.get(m.name, []):
                    if user.uid not in member_uids or user.uid in survivors:
                        survivors.add(m.uid)
                        changed = True
                        break
        for b in self.fn.blocks:
            b.instrs = [ins for ins in b.instrs
                        if ins.uid not in member_uids or ins.uid in survivors]
        self.fn.assign_uids()


def transform_graph(fn, graph, imap):
    """Rewrite fn so every mergeable pack in the graph becomes one wide
    instruction; gather-leaves are concatenated with shuffle trees and
    out-of-graph uses are satisfied with subvector extracts."""
    _Transformer(fn, graph, imap).run()
    diags = verify(fn)
    if diags:
        raise AssertionError("transform broke @%s: %s" % (fn.name, diags))
    return fn


# ---------------------------------------------------------------------------
# Per-block driver


def revectorize_block(fn, block_label, target, imap):
    """Seed, grow, gate, transform; one root at a time until all roots in
    the block are exhausted. Rejected roots are not retried. Returns
    per-graph stats dictionaries."""
    stats = []
    roots = find_root_packs(fn, block_label, target)
    for root in roots:
        graph = build_graph(fn, [root], target, imap)
        report = estimate_profit(graph, target, fn)
        entry = {
            "root": root.kind,
            "packs_by_kind": graph.packs_by_kind(),
            "pattern_counts": {k: v for k, v in graph.pattern_counts.items() if v},
            "cost": {
                "benefit": report.benefit,
                "gather_cost": report.gather_cost,
                "extract_cost": report.extract_cost,
                "profitable": report.profitable,
            },
            "applied": False,
        }
        if report.profitable:
            transform_graph(fn, graph, imap)
            entry["applied"] = True
        stats.append(entry)
    return stats
