"""Command-line driver.

Subcommands:
  revec run   --target gen256 --emit ir|stats|both [-o OUT] file.vir
  revec check --target gen256 --check N [--seed S] file.vir
  revec discover-conversions [-o OUT] [--seed S] [--cases N]
  revec fmt file.vir [-o OUT]

Exit codes: 0 ok, 1 file not found, 2 parse error, 3 verification failure,
4 equivalence-check failure.
"""

import argparse
import copy
import json
import random
import sys
from dataclasses import dataclass
from importlib import resources

from revec import equiv, interp, textio
from revec.intrinsics import widths
from revec.ir import CostTable, Ptr, TargetDesc, erase_dead, verify
from revec.kernels import f32_round
from revec.preprocess import preprocess
from revec.widen import revectorize_block

SCHEMA_VERSION = 1
TARGETS = ("gen128", "gen256", "gen512")
DEFAULT_BUFLEN = 4096
F32_REL_TOL = 1e-5

EXIT_OK = 0
EXIT_NOFILE = 1
EXIT_PARSE = 2
EXIT_VERIFY = 3
EXIT_CHECK = 4


@dataclass
class PipelineConfig:
    target: str
    input_path: str
    emit: str = "stats"              # ir | stats | both
    check_inputs: int = 0
    seed: int = 0
    imap_path: str | None = None
    costs_path: str | None = None
    out_path: str | None = None
    buflen: int = DEFAULT_BUFLEN
    fuel: int = interp.DEFAULT_FUEL


def make_target(name, costs_path=None):
    if name not in TARGETS:
        raise ValueError("unknown target %r (choose from %s)" % (name, ", ".join(TARGETS)))
    cost = CostTable()
    if costs_path:
        with open(costs_path, "r", encoding="utf-8") as f:
            cost = CostTable.parse(f.read())
    return TargetDesc.generic(int(name[3:]), widths(), cost)


def load_imap(path=None):
    if path is None:
        text = resources.files("revec").joinpath("data/conversions.txt").read_text()
        return equiv.IntrinsicMap.loads(text)
    return equiv.IntrinsicMap.load(path)


def run_pipeline(cfg):
    """Parse, preprocess, widen profitable graphs block by block, clean up.
    Returns (module, original functions, per-function stats)."""
    module = textio.parse_file(cfg.input_path)
    target = make_target(cfg.target, cfg.costs_path)
    imap = load_imap(cfg.imap_path).for_target(target)

    originals = {}
    stats = []
    for fn in module.functions:
        originals[fn.name] = copy.deepcopy(fn)
        pstats = preprocess(fn, target)
        fstats = {
            "name": fn.name,
            "unroll_factor": pstats["unroll_factor"],
            "reductions_split": pstats["reductions_split"],
            "graphs": [],
        }
        for label in [blk.label for blk in fn.blocks]:
            fstats["graphs"].extend(revectorize_block(fn, label, target, imap))
        erase_dead(fn)
        diags = verify(fn)
        if diags:
            raise AssertionError("pipeline broke @%s: %s" % (fn.name, diags))

        packs = {}
        patterns = {}
        for g in fstats["graphs"]:
            for k, v in g["packs_by_kind"].items():
                packs[k] = packs.get(k, 0) + v
            for k, v in g["pattern_counts"].items():
                patterns[k] = patterns.get(k, 0) + v
        fstats["packs_by_kind"] = packs
        fstats["pattern_counts"] = patterns
        fstats["applied_any"] = any(g["applied"] for g in fstats["graphs"])
        stats.append(fstats)
    return module, originals, stats


# ---------------------------------------------------------------------------
# Equivalence checking


def _random_inputs(fn, rng, buflen):
    args = {}
    mem = interp.MemoryImage()
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
            mem.buffers[pname] = interp.Buffer(elem, data)
        else:
            args[pname] = rng.randint(0, 16)
    return args, mem


def _lanes_match(a, b, rel):
    if isinstance(a, float) or isinstance(b, float):
        if a == b:
            return True
        return abs(a - b) <= rel * max(abs(a), abs(b))
    return a == b


def _compare(fn, before, after, rel_for_f32):
    """(buffer name, index, got, want) of the first mismatch, else None."""
    ret_b, mem_b, _ = before
    ret_a, mem_a, _ = after
    if type(ret_b) is not type(ret_a) or (
            isinstance(ret_b, list) and len(ret_b) != len(ret_a)):
        return ("<return>", -1, ret_a, ret_b)
    if isinstance(ret_b, list):
        for i, (x, y) in enumerate(zip(ret_b, ret_a)):
            if not _lanes_match(y, x, rel_for_f32):
                return ("<return>", i, y, x)
    elif ret_b != ret_a:
        return ("<return>", -1, ret_a, ret_b)
    for name, buf in mem_b.buffers.items():
        got = mem_a.buffers[name].data
        rel = rel_for_f32 if buf.elem.is_float else 0.0
        for i, (x, y) in enumerate(zip(buf.data, got)):
            if not _lanes_match(y, x, rel):
                return (name, i, y, x)
    return None


def check_equivalence(original, transformed, n_inputs, seed, buflen=DEFAULT_BUFLEN,
                      fuel=interp.DEFAULT_FUEL):
    """Run both versions on n_inputs seeded random inputs. PASS iff every
    input matches bit-exactly (1e-5 relative for reassoc-f32 buffers).
    Returns a result dict with a verdict and dynamic op counts."""
    if n_inputs < 1:
        raise ValueError("equivalence checking needs at least one input")
    rel = F32_REL_TOL if original.reassoc else 0.0
    result = {"verdict": "PASS", "inputs": n_inputs, "mismatch": None}
    for i in range(n_inputs):
        rng = random.Random((seed << 20) ^ (i * 7919) ^ len(original.name))
        args, mem = _random_inputs(original, rng, buflen)
        try:
            before = interp.eval_function(original, args, mem, fuel)
            after = interp.eval_function(transformed, args, mem, fuel)
        except interp.EvalError as e:
            result["verdict"] = "INDETERMINATE"
            result["mismatch"] = {"input_index": i, "error": "%s: %s" % (e.kind, e)}
            return result
        if i == 0:
            result["dyn_vector_ops_before"] = \
                interp.count_dynamic_ops(before[2])["vector_ops_by_width"]
            result["dyn_vector_ops_after"] = \
                interp.count_dynamic_ops(after[2])["vector_ops_by_width"]
        bad = _compare(original, before, after, rel)
        if bad is not None:
            result["verdict"] = "FAIL"
            result["mismatch"] = {
                "input_index": i, "buffer": bad[0], "index": bad[1],
                "after": bad[2], "before": bad[3],
                "args": args,
                "buffers": {k: v.data for k, v in mem.buffers.items()},
            }
            return result
    return result


# ---------------------------------------------------------------------------
# Entry points


def _emit(cfg, module, stats, check_results=None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "target": cfg.target,
        "functions": stats,
    }
    if check_results is not None:
        for fstats in doc["functions"]:
            fstats["check"] = check_results.get(fstats["name"])
    text = None
    if cfg.emit == "ir":
        text = textio.print_module(module)
    elif cfg.emit == "stats":
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        doc["ir"] = textio.print_module(module)
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if cfg.out_path:
        with open(cfg.out_path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(cfg):
    module, _, stats = run_pipeline(cfg)
    _emit(cfg, module, stats)
    return EXIT_OK


def cmd_check(cfg):
    module, originals, stats = run_pipeline(cfg)
    results = {}
    worst = EXIT_OK
    for fn in module.functions:
        res = check_equivalence(originals[fn.name], fn, cfg.check_inputs,
                                cfg.seed, cfg.buflen, cfg.fuel)
        results[fn.name] = res
        print("%s @%s (%d inputs)" % (res["verdict"], fn.name, res["inputs"]))
        if res["verdict"] == "FAIL":
            print("  first mismatch: %s" % json.dumps(
                {k: res["mismatch"][k] for k in ("input_index", "buffer", "index",
                                                 "before", "after")}))
            worst = EXIT_CHECK
    if cfg.out_path:
        _emit(cfg, module, stats, results)
    return worst


def cmd_fmt(cfg):
    module = textio.parse_file(cfg.input_path)
    text = textio.print_module(module)
    if cfg.out_path:
        with open(cfg.out_path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_discover(args):
    imap = equiv.discover_conversions(n_random=args.cases, seed=args.seed)
    text = imap.dumps()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _build_parser():
    ap = argparse.ArgumentParser(prog="revec",
                                 description="widen narrow vector IR to a "
                                             "target's full vector width")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("input", help=".vir source file")
        p.add_argument("--target", default="gen256", choices=TARGETS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--imap", default=None, help="conversion database path")
        p.add_argument("--costs", default=None, help="cost table override path")
        p.add_argument("-o", dest="output", default=None, help="output path")

    p_run = sub.add_parser("run", help="run the widening pipeline")
    common(p_run)
    p_run.add_argument("--emit", default="both", choices=("ir", "stats", "both"))

    p_check = sub.add_parser("check", help="pipeline + random-input equivalence")
    common(p_check)
    p_check.add_argument("--check", dest="inputs", type=int, default=100,
                         metavar="N", help="random inputs per function")
    p_check.add_argument("--buflen", type=int, default=DEFAULT_BUFLEN)

    p_fmt = sub.add_parser("fmt", help="parse and reprint canonically")
    p_fmt.add_argument("input")
    p_fmt.add_argument("-o", dest="output", default=None)

    p_disc = sub.add_parser("discover-conversions",
                            help="fuzz the intrinsic table for conversions")
    p_disc.add_argument("--seed", type=int, default=0)
    p_disc.add_argument("--cases", type=int, default=equiv.DEFAULT_RANDOM_CASES)
    p_disc.add_argument("-o", dest="output", default=None)
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "discover-conversions":
            return cmd_discover(args)
        cfg = PipelineConfig(
            target=getattr(args, "target", "gen256"),
            input_path=args.input,
            seed=getattr(args, "seed", 0),
            imap_path=getattr(args, "imap", None),
            costs_path=getattr(args, "costs", None),
            out_path=args.output,
        )
        if args.command == "run":
            cfg.emit = args.emit
            return cmd_run(cfg)
        if args.command == "check":
            cfg.emit = "stats"
            cfg.check_inputs = args.inputs
            cfg.buflen = args.buflen
            return cmd_check(cfg)
        if args.command == "fmt":
            return cmd_fmt(cfg)
        raise AssertionError("unhandled command")
    except FileNotFoundError as e:
        print("error: file not found: %s" % e.filename, file=sys.stderr)
        return EXIT_NOFILE
    except textio.ParseError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_PARSE
    except textio.VerifyError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
