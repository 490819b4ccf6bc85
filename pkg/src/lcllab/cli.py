"""Command-line front door.

Exit codes: 0 success, 1 violations found by check/detect, 2 invalid input.
All JSON is written with sorted keys so equal runs give equal bytes.
"""

import argparse
import json
import math
import sys
from collections import Counter

from . import detectors, gadgets, ghz
from .depsim import QuantumPiOutcome, constant_outcome, simulate, trivial_problem
from .graph import BOT, ContractViolation, GraphError, components, from_dict, to_dict, to_dot, untuple
from .graph import _jsonable as jsonable
from .lcl import BudgetExceeded
from .localsim import PROGRAMS, MemoryBudgetExceeded, RoundLimit, run_sync


class InputError(Exception):
    """Bad command-line input; reported with exit code 2."""


def _dump(obj):
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read_json(path):
    if not path:
        raise InputError("--in is required")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not JSON: {exc}") from exc


def _read_graph(path):
    d = _read_json(path)
    if not isinstance(d, dict) or "n" not in d:
        raise InputError(f"{path} is not a graph document")
    return from_dict(d)


def _read_bipartite(path):
    d = _read_json(path)
    if not isinstance(d, dict) or "whites" not in d:
        raise InputError(f"{path} is not a bipartite document")
    return gadgets.BipartiteInstance.from_dict(d)


def _read_labels(path):
    d = _read_json(path)
    if isinstance(d, dict):
        for key in ("outputs", "labels", "out"):
            if key in d:
                d = d[key]
                break
    if not isinstance(d, list):
        raise InputError(f"{path} holds no label list")
    return [untuple(x) for x in d]


def _report(violations):
    return {"violations": [x.to_dict() for x in violations], "count": len(violations)}


# verbs


def cmd_gen(args):
    if args.kind == "tree":
        g = gadgets.build_tree_gadget(args.h)
    elif args.kind == "octopus":
        eta = tuple(int(x) for x in args.eta.split(",")) if args.eta else (1,) * (1 << (args.h - 1))
        g = gadgets.build_octopus(gadgets.OctopusSpec.uniform(args.h, eta, args.w))
    elif args.kind == "bipartite":
        b = gadgets.random_bipartite(args.n, args.delta, args.seed)
        _emit(args, _dump(b.to_dict()))
        return 0
    else:
        b = gadgets.random_bipartite(args.n, args.delta, args.seed)
        h = args.h or max(1, math.ceil(math.log2(b.whites + b.blacks)))
        g = gadgets.lift(b, h).graph
    _emit(args, _dump(to_dict(g)))
    return 0


def cmd_lift(args):
    b = _read_bipartite(args.input)
    h = args.h or max(1, math.ceil(math.log2(b.whites + b.blacks)))
    _emit(args, _dump(to_dict(gadgets.lift(b, h).graph)))
    return 0


def cmd_compress(args):
    b, _ = gadgets.compress(_read_graph(args.input))
    _emit(args, _dump(b.to_dict()))
    return 0


STRUCTURAL = {"tree": gadgets.check_tree, "octopus": gadgets.check_octopus, "proper": gadgets.check_proper}


def _check_labeled(problem, g, out):
    if len(out) != g.n:
        raise InputError(f"{len(out)} labels for {g.n} nodes")
    if problem == "badtree":
        return detectors.check_badtree(g, g.marks(), out)
    if problem == "badoctopus":
        return detectors.check_badoctopus(g, g.marks(), out)
    if problem == "badgraph":
        return detectors.check_badgraph(g, out)
    if problem == "promise":
        return ghz.check_promise(g, out)
    return ghz.check_pi(g, out)


def cmd_check(args):
    if args.problem in STRUCTURAL:
        found = STRUCTURAL[args.problem](_read_graph(args.input))
    elif args.problem == "iterghz":
        b = _read_bipartite(args.input)
        if not args.labels:
            raise InputError("--labels is required for iterghz")
        sol = _read_labels(args.labels)
        if len(sol) != len(b.edges):
            raise InputError(f"{len(sol)} labels for {len(b.edges)} edges")
        found = ghz.check_linearizable(ghz.ITERGHZ, b, sol)
    else:
        if not args.labels:
            raise InputError(f"--labels is required for {args.problem}")
        found = _check_labeled(args.problem, _read_graph(args.input), _read_labels(args.labels))
    _emit(args, _dump(dict(_report(found), problem=args.problem)))
    return 1 if found else 0


def cmd_detect(args):
    g = _read_graph(args.input)
    if args.problem == "badtree":
        out, _, radii = detectors.solve_badtree(g, g.marks())
    elif args.problem == "badoctopus":
        out, radii, _ = detectors.solve_badoctopus(g, g.marks())
    else:
        out, radii = detectors.solve_badgraph(g)
    flagged = sum(1 for x in out if x != BOT)
    doc = {
        "problem": args.problem,
        "outputs": out,
        "radii": radii,
        "flagged": flagged,
        "max_radius": max(radii, default=0),
    }
    _emit(args, _dump(doc))
    return 1 if flagged else 0


def _histogram(values):
    return {str(k): c for k, c in sorted(Counter(values).items())}


def cmd_run(args):
    if args.mode == "sync":
        g = _read_graph(args.input)
        prog = PROGRAMS[args.program]()
        trace = run_sync(g, prog, seed=args.seed, max_rounds=args.max_rounds)
        doc = dict(trace.to_dict(), program=args.program, seed=args.seed)
    elif args.mode == "quantum":
        b = _read_bipartite(args.input)
        q = ghz.quantum_solve_iterghz(b, args.seed)
        labels = ghz.bits_to_labels(b, q.bits)
        doc = {
            "seed": args.seed,
            "bits": q.bits,
            "labels": labels,
            "lucky": sum(q.lucky),
            "rounds": q.rounds,
            "max_norm_drift": q.max_norm_drift,
            "violations": len(ghz.check_linearizable(ghz.ITERGHZ, b, labels)),
        }
    elif args.mode == "pi":
        g = _read_graph(args.input)
        run = ghz.solve_pi(g, args.seed)
        doc = {
            "seed": args.seed,
            "outputs": run.out,
            "radii": run.radii,
            "radius_histogram": _histogram(run.radii),
            "max_radius": max(run.radii, default=0),
            "badgraph_radius": run.badgraph_radius,
            "violations": len(ghz.check_pi(g, run.out)),
        }
    else:
        doc = _run_depsim(args)
    _emit(args, _dump(doc))
    return 0


def _run_depsim(args):
    g = _read_graph(args.input)
    if args.problem == "pi":
        p = ghz.pi_problem()
    elif args.problem == "trivial":
        p = trivial_problem()
    else:
        raise InputError("depsim supports --problem pi or trivial")
    outcome = QuantumPiOutcome() if args.oracle == "quantum" else constant_outcome(0)
    ok, totals, trials = 0, [], []
    for t in range(args.trials):
        res = simulate(outcome, p, g, seed=args.seed + t, eps=args.eps)
        ok += res.valid
        totals.append(res.stats["locality"]["total"])
        trials.append(res.stats)
    return {
        "problem": args.problem,
        "oracle": args.oracle,
        "seed": args.seed,
        "trials": args.trials,
        "successes": ok,
        "success_rate": ok / args.trials if args.trials else None,
        "locality_histogram": _histogram(totals),
        "clustering": trials,
    }


def cmd_stats(args):
    d = _read_json(args.input)
    if isinstance(d, dict) and "whites" in d:
        b = gadgets.BipartiteInstance.from_dict(d)
        doc = {
            "kind": "bipartite",
            "whites": b.whites,
            "blacks": b.blacks,
            "edges": len(b.edges),
            "white_degree_histogram": _histogram(b.white_degree(w) for w in range(b.whites)),
            "black_degree_histogram": _histogram(len(b.black_edges(k)) for k in range(b.blacks)),
        }
    else:
        g = _read_graph(args.input)
        doc = {
            "kind": "graph",
            "n": g.n,
            "m": g.m,
            "components": len(components(g)),
            "degree_histogram": _histogram(g.degree(v) for v in range(g.n)),
            "node_labels": _histogram(str(x) for x in g.labels),
        }
        if args.problem in STRUCTURAL:
            doc["violations"] = len(STRUCTURAL[args.problem](g))
    _emit(args, _dump(doc))
    return 0


def cmd_export(args):
    g = _read_graph(args.input)
    _emit(args, to_dot(g))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="lcllab", description="LCL gadget and locality lab")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--in", dest="input", required=True)
        p.add_argument("--out")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen", help="generate an instance")
    p.add_argument("kind", choices=["tree", "octopus", "bipartite", "hard"])
    p.add_argument("--h", type=int, default=None, help="tree height, head height, or lift port height")
    p.add_argument("--eta", help="octopus leaf multiplicities, comma separated")
    p.add_argument("--w", type=int, default=1, help="octopus port height")
    p.add_argument("--n", type=int, default=4, help="white nodes")
    p.add_argument("--delta", type=int, default=4, help="maximum white degree")
    common(p, needs_input=False)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("lift", help="lift a bipartite instance")
    p.add_argument("--h", type=int, default=None)
    common(p)
    p.set_defaults(fn=cmd_lift)

    p = sub.add_parser("compress", help="contract a proper instance")
    common(p)
    p.set_defaults(fn=cmd_compress)

    problems = sorted(STRUCTURAL) + ["badtree", "badoctopus", "badgraph", "promise", "pi", "iterghz"]
    p = sub.add_parser("check", help="check an instance or a labeling")
    p.add_argument("--problem", required=True, choices=problems)
    p.add_argument("--labels")
    common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("detect", help="run an error detector")
    p.add_argument("--problem", required=True, choices=["badtree", "badoctopus", "badgraph"])
    common(p)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("run", help="run an algorithm")
    p.add_argument("mode", choices=["sync", "quantum", "pi", "depsim"])
    p.add_argument("--program", choices=sorted(PROGRAMS), default="flood")
    p.add_argument("--max-rounds", type=int, default=1000)
    p.add_argument("--problem", default="pi")
    p.add_argument("--oracle", choices=["quantum", "constant"], default="quantum")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--eps", type=float, default=None)
    common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("stats", help="summary statistics")
    p.add_argument("--problem", choices=sorted(STRUCTURAL))
    common(p)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("export", help="write Graphviz DOT")
    common(p)
    p.set_defaults(fn=cmd_export)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        if args.verb == "gen" and args.kind in ("tree", "octopus") and args.h is None:
            args.h = 2
        return args.fn(args)
    except (InputError, GraphError, ContractViolation, gadgets.InvalidInstance, ValueError) as exc:
        print(f"lcllab: {exc}", file=sys.stderr)
        return 2
    except (BudgetExceeded, RoundLimit, MemoryBudgetExceeded) as exc:
        print(f"lcllab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
