import copy
import random
from pathlib import Path

import pytest

from revec import textio
from revec.interp import Buffer, MemoryImage, eval_function
from revec.ir import Ptr, TargetDesc
from revec.intrinsics import widths
from revec.kernels import f32_round

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


@pytest.fixture(scope="session")
def corpus_files():
    files = sorted(CORPUS.glob("*.vir"))
    assert files, "corpus missing"
    return files


def parse_corpus(name):
    return textio.parse_file(CORPUS / name)


def target(bits, cost=None):
    return TargetDesc.generic(bits, widths(), cost)


def random_memory(fn, rng, buflen=1024):
    args = {}
    mem = MemoryImage()
    for pname, ptype in fn.params:
        if isinstance(ptype, Ptr):
            elem = ptype.elem
            if elem.is_float:
                data = [f32_round(rng.uniform(-1000.0, 1000.0)) for _ in range(buflen)]
            elif elem.signed:
                lo, hi = -(1 << (elem.bits - 1)), (1 << (elem.bits - 1)) - 1
                data = [rng.randint(lo, hi) for _ in range(buflen)]
            else:
                data = [rng.randint(0, (1 << elem.bits) - 1) for _ in range(buflen)]
            mem.buffers[pname] = Buffer(elem, data)
        else:
            args[pname] = rng.randint(0, 16)
    return args, mem


def assert_equivalent(original, transformed, trials=30, seed=0, buflen=1024,
                      rel=0.0):
    rng = random.Random(seed)
    for t in range(trials):
        args, mem = random_memory(original, rng, buflen)
        ret_b, mem_b, _ = eval_function(original, args, mem)
        ret_a, mem_a, _ = eval_function(transformed, args, mem)
        if rel == 0.0:
            assert ret_b == ret_a, "return mismatch on trial %d" % t
            assert mem_b == mem_a, "memory mismatch on trial %d" % t
        else:
            for name, buf in mem_b.buffers.items():
                got = mem_a.buffers[name].data
                for i, (x, y) in enumerate(zip(buf.data, got)):
                    if x != y:
                        assert abs(x - y) <= rel * max(abs(x), abs(y)), \
                            "trial %d: %s[%d] %r vs %r" % (t, name, i, x, y)


def snapshot(fn):
    return copy.deepcopy(fn)
