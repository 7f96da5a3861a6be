"""Test-case generation, conversion discovery, and the database format."""

from pathlib import Path

from revec.equiv import (
    IntrinsicMap, discover_conversions, gen_testcases, lanes_from_bytes,
    replay,
)
from revec.intrinsics import SEMANTICS
from revec.ir import Scalar, Vec, TargetDesc
from revec.intrinsics import widths

DB_PATH = Path(__file__).resolve().parent.parent / "src" / "revec" / "data" / "conversions.txt"


def test_corner_only_cases():
    vt = Vec(Scalar("i32"), 4)
    cases = gen_testcases(vt, 1, 0, seed=0)
    assert len(cases) == 4
    assert sorted(c.operands[0][0] for c in cases) == [0x00, 0x55, 0xAA, 0xFF]
    assert all(c.provenance == "corner" for c in cases)
    cases2 = gen_testcases(vt, 2, 0, seed=0)
    assert len(cases2) == 16  # all pattern combinations across two operands


def test_corner_pattern_lanes():
    vt = Vec(Scalar("i8"), 16)
    cases = gen_testcases(vt, 1, 0, seed=0)
    x55 = next(c for c in cases if c.operands[0][0] == 0x55)
    assert lanes_from_bytes(x55.operands[0], Vec(Scalar("u8"), 16)) == [85] * 16


def test_generation_is_deterministic():
    vt = Vec(Scalar("i16"), 8)
    a = gen_testcases(vt, 2, 2000, seed=1)
    b = gen_testcases(vt, 2, 2000, seed=1)
    assert a == b
    c = gen_testcases(vt, 2, 2000, seed=2)
    assert a != c


def test_lane_decode():
    vt = Vec(Scalar("i16"), 2)
    assert lanes_from_bytes(b"\xff\xff\x01\x00", vt) == [-1, 1]
    vtu = Vec(Scalar("u16"), 2)
    assert lanes_from_bytes(b"\xff\xff\x01\x00", vtu) == [65535, 1]


def test_discovery_finds_the_expected_conversions():
    imap = discover_conversions(n_random=200, seed=0)
    assert imap.lookup("packus.i32.128", 2) == "packus.i32.256"
    assert imap.lookup("packus.i32.128", 4) == "packus.i32.512"
    assert imap.lookup("phadd.i16.128", 2) == "phadd.i16.256"
    assert imap.lookup("phadd.i16.128", 4) is None
    assert imap.lookup("phadd.i16.128", 8) is None


def test_discovery_is_complete_on_seeded_families():
    imap = discover_conversions(n_random=100, seed=3)
    for name, d in SEMANTICS.items():
        for p in (2, 4):
            wide = "%s.%d" % (d.family, d.width * p)
            if wide in SEMANTICS:
                assert imap.lookup(name, p) == wide, (name, p)


def test_replay_soundness():
    imap = discover_conversions(n_random=300, seed=0)
    assert replay(imap, n_random=300, seed=77) == []


def test_target_filtering():
    imap = discover_conversions(n_random=50, seed=0)
    t128 = TargetDesc.generic(128, widths())
    t256 = TargetDesc.generic(256, widths())
    assert imap.for_target(t128) == {}
    f256 = imap.for_target(t256)
    assert all(SEMANTICS[w].width <= 256 for w in f256.values())
    assert ("packus.i32.128", 2) in f256
    assert ("packus.i32.128", 4) not in f256  # 512-bit target only


def test_db_round_trip_and_format():
    imap = discover_conversions(n_random=50, seed=0)
    text = imap.dumps()
    lines = text.splitlines()
    assert lines[0] == "; revec-conversions 1"
    body = lines[1:]
    assert body == sorted(body)
    for line in body:
        narrow, p, wide, tests = line.split()
        assert int(p) in (2, 4, 8) and int(tests) > 0
        assert SEMANTICS[narrow].width * int(p) == SEMANTICS[wide].width
    again = IntrinsicMap.loads(text)
    assert again.entries == imap.entries


def test_shipped_db_regenerates_byte_identically():
    shipped = DB_PATH.read_text()
    imap = discover_conversions()  # default seed and case count
    assert imap.dumps() == shipped
