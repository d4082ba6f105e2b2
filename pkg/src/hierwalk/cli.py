"""Command line interface: generate / spectrum / walk / classical / sparsify /
experiment subcommands."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import classical as cb
from . import lieb as lb
from . import qwalk as qw
from . import sparsify as spf
from . import spectral as spec_mod
from .core import SupergraphSpec, assemble_hierarchical, effective_hamiltonian
from .ensemble1d import sample_factor_line, welded_tree_line
from .errors import HierwalkError
from .experiments import run_experiment, write_outputs


def _load_spec(path: str) -> SupergraphSpec:
    with open(path) as fh:
        return SupergraphSpec.from_json_dict(json.load(fh)["spec"])


def _save_json(obj, path: str | None):
    text = json.dumps(obj, indent=1)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        print(text)


def cmd_generate(args) -> int:
    if args.kind == "line":
        if args.welded:
            spc, _ = welded_tree_line(args.n)
        else:
            factors = {int(f): 1.0 for f in args.factors.split(",")}
            spc = sample_factor_line(args.n, args.D, factors, args.seed)
    else:
        if args.fluct == "bgff":
            lattice = lb.build_lieb(args.N, args.d)
            fields = lb.sample_bgff(lattice, J=lb.mountain_bias(args.N, args.d, args.D, args.f),
                                    g=args.g, seed=args.seed)[0]
            _save_json({"mode": fields.mode,
                        "phi": {str(k): v for k, v in fields.phi.items()}}, args.out)
            return 0
        spc, _ = lb.build_mountain_spec(args.N, args.d, args.D, args.f,
                                        fluct=args.fluct, seed=args.seed)
    spec_dict = spc.to_json_dict()
    spec_dict.pop("metadata", None)
    _save_json({"spec": spec_dict}, args.out)
    return 0


def cmd_spectrum(args) -> int:
    spc = _load_spec(args.infile)
    heff = effective_hamiltonian(spc)
    summ = spec_mod.spectrum(heff.matrix, tol=args.tol)
    _save_json({"eigenvalues": summ.eigenvalues.tolist(), "gap": summ.gap,
                "zero_count": summ.zero_count, "tol": summ.tol}, args.out)
    return 0


def cmd_walk(args) -> int:
    spc = _load_spec(args.infile)
    trials = args.trials if args.mode == "mc" else 0
    rep = qw.traversal_protocol(spc, trials=trials, seed=args.seed)
    _save_json({"tau": rep.tau, "gap": rep.gap, "overlap": rep.overlap,
                "p_exact": rep.p_exact, "bound": rep.bound,
                "channel_energy": rep.channel_energy,
                "success_rate": rep.success_rate, "trials": rep.trials,
                "satisfied": rep.satisfied}, args.out)
    return 0 if rep.satisfied else 1


def cmd_classical(args) -> int:
    spc = _load_spec(args.infile)
    graph = assemble_hierarchical(spc, args.seed)
    out = cb.traversal_success_rate(graph, args.Q, args.policy, args.trials, args.seed)
    _save_json(out, args.out)
    return 0


def cmd_sparsify(args) -> int:
    with open(args.t) as fh:
        t = np.asarray(json.load(fh), dtype=float)
    dense = spf.dense_from_effective(t, args.N)
    if args.method == "poisson":
        graph, scale = spf.poisson_sparsify(dense, args.D, args.seed)
        info = {"scale": scale}
    else:
        res = spf.bvn_sparsify(dense, args.D, args.seed)
        graph = res.graph
        info = {"scale": res.scale, "rewired": res.rewired,
                "unmatched_two_cycles": res.unmatched_two_cycles}
    payload = graph.to_json_dict()
    payload["sparsify"] = info
    _save_json(payload, args.out)
    return 0


def cmd_experiment(args) -> int:
    with open(args.config) as fh:
        config = json.load(fh)
    records = run_experiment(config, jobs=args.jobs)
    out = config.get("out", "records")
    write_outputs(records, out)
    bad = [r for r in records if not r.ok]
    print(f"{len(records)} records -> {out}.csv / {out}.json; {len(bad)} failed assertions")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hierwalk")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a hierarchical graph spec")
    gsub = g.add_subparsers(dest="kind", required=True)
    gl = gsub.add_parser("line")
    gl.add_argument("--n", type=int, required=True)
    gl.add_argument("--D", type=int, default=6)
    gl.add_argument("--factors", default="2,3")
    gl.add_argument("--seed", type=int, default=0)
    gl.add_argument("--welded", action="store_true")
    gl.add_argument("--out")
    gl.set_defaults(func=cmd_generate)
    gb = gsub.add_parser("lieb")
    gb.add_argument("--N", type=int, required=True)
    gb.add_argument("--d", type=int, default=2)
    gb.add_argument("--D", type=int, default=30)
    gb.add_argument("--f", type=int, default=10)
    gb.add_argument("--fluct", choices=["none", "ice", "dimer", "bgff"], default="none")
    gb.add_argument("--g", type=float, default=1.0)
    gb.add_argument("--seed", type=int, default=0)
    gb.add_argument("--out")
    gb.set_defaults(func=cmd_generate)

    s = sub.add_parser("spectrum", help="eigenvalues and gap of a spec")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--tol", type=float, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    w = sub.add_parser("walk", help="traversal protocol on a spec")
    w.add_argument("--in", dest="infile", required=True)
    w.add_argument("--trials", type=int, default=200)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--mode", choices=["exact", "mc"], default="exact")
    w.add_argument("--out")
    w.set_defaults(func=cmd_walk)

    c = sub.add_parser("classical", help="oracle-model classical baseline")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--Q", type=int, required=True)
    c.add_argument("--policy", choices=["rw", "nbw", "dfs"], default="nbw")
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classical)

    sp = sub.add_parser("sparsify", help="dense-from-t then sparsify")
    sp.add_argument("--t", required=True, help="JSON matrix of hoppings")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--D", type=int, required=True)
    sp.add_argument("--method", choices=["poisson", "bvn"], default="poisson")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sparsify)

    e = sub.add_parser("experiment", help="run a registered experiment")
    e.add_argument("--config", required=True)
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HierwalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
