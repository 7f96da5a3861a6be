"""Narrow-to-wide intrinsic conversion discovery.

For each narrow intrinsic and vectorization factor p in {2, 4, 8}, fuzzes
the candidate of the same family at p times the width: p narrow invocations
on vertically sliced operands must equal one wide invocation on the full
operands for every test case (random cases plus the repeated-byte corner
patterns 0x00, 0x55, 0xAA, 0xFF combined across operands). The interpreter's
semantics table is the ground truth.
"""

import random
from dataclasses import dataclass
from itertools import product

from revec.intrinsics import SEMANTICS, eval_intrinsic

FACTORS = (2, 4, 8)
CORNER_BYTES = (0x00, 0x55, 0xAA, 0xFF)
DEFAULT_RANDOM_CASES = 2000
DB_VERSION = 1


@dataclass(frozen=True)
class TestCase:
    operands: tuple       # one byte string per operand
    provenance: str       # 'corner' | 'random'


def gen_testcases(vtype, arity, n_random, seed):
    """Corner cases (all combinations of the four repeated byte patterns
    across operands) followed by n_random random cases; deterministic for a
    fixed seed."""
    nbytes = vtype.bits // 8
    cases = [TestCase(tuple(bytes([pat]) * nbytes for pat in combo), "corner")
             for combo in product(CORNER_BYTES, repeat=arity)]
    rng = random.Random(seed)
    for _ in range(n_random):
        cases.append(TestCase(tuple(rng.randbytes(nbytes) for _ in range(arity)),
                              "random"))
    return cases


def lanes_from_bytes(data, vtype):
    """Little-endian decode into canonical lane values."""
    eb = vtype.elem.bits // 8
    signed = vtype.elem.signed
    return [int.from_bytes(data[i * eb:(i + 1) * eb], "little", signed=signed)
            for i in range(vtype.count)]


class IntrinsicMap:
    """(narrow intrinsic name, factor p) -> wide intrinsic name, with the
    number of passing test cases as evidence."""

    def __init__(self, entries=None):
        self.entries = dict(entries or {})  # (narrow, p) -> (wide, tests)

    def add(self, narrow, p, wide, tests):
        self.entries[(narrow, p)] = (wide, tests)

    def lookup(self, name, p):
        ent = self.entries.get((name, p))
        return ent[0] if ent else None

    def for_target(self, target):
        """Plain {(narrow, p): wide} dict restricted to the target's legal
        intrinsic set."""
        return {(n, p): w for (n, p), (w, _) in self.entries.items()
                if w in target.legal_intrinsics and n in target.legal_intrinsics}

    def dumps(self):
        lines = ["; revec-conversions %d" % DB_VERSION]
        body = ["%s  %d  %s  %d" % (n, p, w, t)
                for (n, p), (w, t) in self.entries.items()]
        lines.extend(sorted(body))
        return "\n".join(lines) + "\n"

    @staticmethod
    def loads(text):
        imap = IntrinsicMap()
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith(";"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError("bad conversion entry: %r" % raw)
            imap.add(parts[0], int(parts[1]), parts[2], int(parts[3]))
        return imap

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.dumps())

    @staticmethod
    def load(path):
        with open(path, "r", encoding="utf-8") as f:
            return IntrinsicMap.loads(f.read())


def _check_conversion(narrow, wide, p, cases):
    """True iff p narrow runs on vertically sliced operands concatenate to
    the wide run for every case."""
    nd = SEMANTICS[narrow]
    wd = SEMANTICS[wide]
    pers = [t.count for t in nd.operand_types]
    for case in cases:
        wide_ops = [lanes_from_bytes(data, t)
                    for data, t in zip(case.operands, wd.operand_types)]
        got = eval_intrinsic(wide, wide_ops)
        want = []
        for j in range(p):
            slices = [lanes[j * per:(j + 1) * per]
                      for lanes, per in zip(wide_ops, pers)]
            want.extend(eval_intrinsic(narrow, slices))
        if got != want:
            return False
    return True


def _candidates(semantics):
    for narrow, nd in semantics.items():
        for p in FACTORS:
            wide = "%s.%d" % (nd.family, nd.width * p)
            wd = semantics.get(wide)
            if wd is None:
                continue
            if len(wd.operand_types) != len(nd.operand_types):
                continue
            if any(w.elem != n.elem for w, n in zip(wd.operand_types, nd.operand_types)):
                continue
            yield narrow, p, wide


def _case_seed(seed, wide):
    # stable per-signature sub-seed so candidate order cannot matter
    return (seed * 1000003 + sum(ord(c) for c in wide)) & 0x7FFFFFFF


def discover_conversions(semantics=None, n_random=DEFAULT_RANDOM_CASES, seed=0):
    """Fuzz every same-family candidate pair; an entry is recorded only when
    all cases pass. Absence of a conversion is a valid outcome."""
    semantics = semantics if semantics is not None else SEMANTICS
    imap = IntrinsicMap()
    for narrow, p, wide in _candidates(semantics):
        wd = semantics[wide]
        cases = gen_testcases(wd.operand_types[0], len(wd.operand_types),
                              n_random, _case_seed(seed, wide))
        if _check_conversion(narrow, wide, p, cases):
            imap.add(narrow, p, wide, len(cases))
    return imap


def replay(imap, n_random=1000, seed=1):
    """Re-check every recorded conversion on fresh cases; returns the list
    of entries that fail (expected empty)."""
    bad = []
    for (narrow, p), (wide, _) in imap.entries.items():
        wd = SEMANTICS[wide]
        cases = gen_testcases(wd.operand_types[0], len(wd.operand_types),
                              n_random, _case_seed(seed, wide) ^ 0x5A5A5A)
        if not _check_conversion(narrow, wide, p, cases):
            bad.append((narrow, p, wide))
    return bad
