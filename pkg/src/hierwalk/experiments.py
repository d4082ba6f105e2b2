"""Experiment registry: named parameter sweeps with CSV/JSON records."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import classical as cb
from . import lieb as lb
from . import qwalk as qw
from . import sparsify as spf
from . import spectral as spec_mod
from .core import assemble_hierarchical
from .ensemble1d import sample_factor_line, welded_tree_line
from .errors import UnknownExperiment

CSV_HEADER = "# hierwalk-record-v1"
DEFAULT_CAPS = {"vertices": 10**6, "dense_dim": 8000}


@dataclass
class ExperimentRecord:
    experiment: str
    params: dict
    measured: dict
    wall_time: float
    ok: bool = True
    note: str = ""

    def flat(self) -> dict:
        # wall time stays out of the CSV so reruns are byte-identical
        row = {"experiment": self.experiment, "ok": int(self.ok), "note": self.note}
        for k, v in self.params.items():
            row[k] = v
        for k, v in self.measured.items():
            row[k] = v
        return row

    def to_json_dict(self) -> dict:
        return {"experiment": self.experiment, "params": self.params,
                "measured": self.measured, "wall_time": self.wall_time,
                "ok": self.ok, "note": self.note}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentRecord":
        return cls(**d)


def _caps(config: dict) -> dict:
    caps = dict(DEFAULT_CAPS)
    caps.update(config.get("caps", {}))
    env = os.environ.get("HIERWALK_CAP")
    if env:
        v = int(env)
        caps = {k: min(c, v) for k, c in caps.items()}
    return caps


# ---------------------------------------------------------------------------
# registered experiments
# ---------------------------------------------------------------------------

def _default_factors(degree: int) -> dict:
    return {2: 1.0, 3: 1.0} if degree == 6 else {1: 1.0}


def run_scaling_1d(config: dict) -> list[ExperimentRecord]:
    grid = config.get("grid", {})
    ns = grid.get("n", list(range(9, 42, 4)))
    seeds = config.get("seeds", list(range(50)))
    degree = grid.get("degree", 6)
    factors = {int(k): v for k, v in grid.get("factors", _default_factors(degree)).items()}
    records = []
    for n in ns:
        for seed in seeds:
            t0 = time.perf_counter()
            spc = sample_factor_line(n, degree, factors, seed)
            rep = qw.traversal_protocol(spc)
            records.append(ExperimentRecord(
                experiment="scaling_1d",
                params={"n": n, "seed": seed, "degree": degree},
                measured={"gap": rep.gap, "overlap": rep.overlap,
                          "tau": rep.tau, "p_exact": rep.p_exact,
                          "log_inv_P": math.log(1.0 / rep.p_exact)},
                wall_time=time.perf_counter() - t0,
                ok=rep.satisfied))
    return records


def run_lieb_2d(config: dict) -> list[ExperimentRecord]:
    grid = config.get("grid", {})
    Ns = grid.get("N", [3, 4, 5])
    degree = grid.get("degree", 30)
    f = grid.get("f", 10)
    fluct = grid.get("fluct", "ice")
    seeds = config.get("seeds", [0])
    records = []
    for N in Ns:
        for seed in seeds:
            t0 = time.perf_counter()
            spc, assignment = lb.build_mountain_spec(N, 2, degree, f,
                                                     fluct=fluct, seed=seed)
            lattice = lb.LiebLattice(N, 2)
            h = spec_mod.lieb_hamiltonian(assignment, lattice)
            summ = spec_mod.spectrum(h)
            bound = spec_mod.snake_gap_bound(assignment, lattice, h)
            expected = (N - 1) ** 2 + 1
            records.append(ExperimentRecord(
                experiment="lieb_2d",
                params={"N": N, "seed": seed, "degree": degree, "f": f, "fluct": fluct},
                measured={"zero_modes": summ.zero_count, "expected_zero_modes": expected,
                          "gap": summ.gap, "snake_bound": bound},
                wall_time=time.perf_counter() - t0,
                ok=(summ.zero_count == expected and bound <= summ.gap)))
    return records


def run_lieb_highd(config: dict) -> list[ExperimentRecord]:
    grid = config.get("grid", {})
    combos = grid.get("Nd", [[3, 3]])
    records = []
    for N, d in combos:
        t0 = time.perf_counter()
        assignment = lb.mountain_ratios(N, d, 30, 10)
        lattice = lb.LiebLattice(N, d)
        h = spec_mod.lieb_hamiltonian(assignment, lattice)
        summ = spec_mod.spectrum(h)
        expected = (d - 1) * N**d - d * N**(d - 1) + 2
        records.append(ExperimentRecord(
            experiment="lieb_highd",
            params={"N": N, "d": d},
            measured={"zero_modes": summ.zero_count, "expected_zero_modes": expected,
                      "gap": summ.gap},
            wall_time=time.perf_counter() - t0,
            ok=summ.zero_count == expected))
    return records


def run_sparsified_welded(config: dict) -> list[ExperimentRecord]:
    grid = config.get("grid", {})
    n = grid.get("n", 4)
    n_total = min(grid.get("n_total", 1200), _caps(config)["dense_dim"])
    degrees = grid.get("degree", [64, 128])
    horizon = grid.get("horizon", 8.0)
    seeds = config.get("seeds", [0, 1, 2])
    _, chain = welded_tree_line(n)
    dense = spf.dense_from_effective(chain.matrix, n_total)
    a_full = dense.full_adjacency()
    init_vec = np.zeros(dense.n_total)
    init_vec[0] = 1.0
    exit_vec = np.zeros(dense.n_total)
    exit_vec[-1] = 1.0
    p_dense = qw.exit_probability_time_avg(a_full, init_vec, exit_vec, horizon)
    records = []
    for degree in degrees:
        for seed in seeds:
            t0 = time.perf_counter()
            for method in ("poisson", "bvn"):
                if method == "poisson":
                    graph, scale = spf.poisson_sparsify(dense, degree, seed)
                else:
                    res = spf.bvn_sparsify(dense, degree, seed)
                    graph, scale = res.graph, res.scale
                adj = graph.adjacency().toarray() * scale
                dist = spf.operator_distance(a_full, adj)
                p_sparse = qw.exit_probability_time_avg(adj, init_vec, exit_vec, horizon)
                records.append(ExperimentRecord(
                    experiment="sparsified_welded",
                    params={"n": n, "n_total": n_total, "degree": degree,
                            "seed": seed, "method": method, "horizon": horizon},
                    measured={"p_dense": p_dense, "p_sparse": p_sparse,
                              "op_distance": dist, "gate": p_dense / (4 * horizon)},
                    wall_time=time.perf_counter() - t0,
                    ok=p_sparse >= p_dense / 2))
    return records


def run_anderson_diag(config: dict) -> list[ExperimentRecord]:
    grid = config.get("grid", {})
    ns = grid.get("n", list(range(10, 41, 10)))
    hopping = grid.get("hopping", 1.0)
    seeds = config.get("seeds", list(range(10)))
    records = []
    lyap = spec_mod.lyapunov(spec_mod.uniform_onsite(), energy=0.5,
                             length=grid.get("length", 10**5),
                             trials=grid.get("trials", 8), seed=seeds[0])
    for n in ns:
        for seed in seeds:
            t0 = time.perf_counter()
            h = spec_mod.anderson_chain(n, hopping, seed)
            init_vec = np.zeros(n)
            init_vec[0] = 1.0
            exit_vec = np.zeros(n)
            exit_vec[-1] = 1.0
            p_inf = qw.exit_probability_infinite_time(h, init_vec, exit_vec)
            ub = qw.amplitude_upper_bound(h, init_vec, exit_vec)
            records.append(ExperimentRecord(
                experiment="anderson_diag",
                params={"n": n, "seed": seed},
                measured={"p_infinite": p_inf, "upper_bound": ub,
                          "lambda_f": lyap["lambda_f"], "lambda_f_stderr": lyap["stderr"]},
                wall_time=time.perf_counter() - t0,
                ok=p_inf <= ub + 1e-12))
    return records


def run_classical_vs_quantum(config: dict) -> list[ExperimentRecord]:
    grid = config.get("grid", {})
    ns = grid.get("n", [6, 8, 10])
    trials = grid.get("trials", 300)
    seeds = config.get("seeds", [0])
    records = []
    cap = _caps(config)["vertices"]
    for n in ns:
        for seed in seeds:
            t0 = time.perf_counter()
            spc, _ = welded_tree_line(n)
            graph = assemble_hierarchical(spc, seed, cap=cap)
            Q = 10 * n * n
            cl = cb.traversal_success_rate(graph, Q, "nbw", trials, seed)
            rep = qw.traversal_protocol(spc)
            records.append(ExperimentRecord(
                experiment="classical_vs_quantum",
                params={"n": n, "seed": seed, "Q": Q, "trials": trials},
                measured={"classical_rate": cl["success_rate"],
                          "quantum_p": rep.p_exact, "tau": rep.tau},
                wall_time=time.perf_counter() - t0))
    return records


def run_dos_dyson(config: dict) -> list[ExperimentRecord]:
    grid = config.get("grid", {})
    eps_list = grid.get("eps", [math.exp(-4), math.exp(-6)])
    n_sites = grid.get("n_sites", 144)
    trials = grid.get("trials", 200)
    degree = grid.get("degree", 6)
    factors = {int(k): v for k, v in grid.get("factors", _default_factors(degree)).items()}
    seed = config.get("seeds", [0])[0]

    def sampler(n, s):
        spc = sample_factor_line((n + 2) // 2 + 1, degree, factors, s)
        return spec_mod.hoppings_of_line_spec(spc)[:n - 1]

    records = []
    for eps in eps_list:
        t0 = time.perf_counter()
        out = spec_mod.dos_window(sampler, n_sites, eps, trials, seed)
        records.append(ExperimentRecord(
            experiment="dos_dyson",
            params={"eps": eps, "n_sites": n_sites, "trials": trials, "seed": seed},
            measured=out,
            wall_time=time.perf_counter() - t0))
    return records


REGISTRY = {
    "scaling_1d": run_scaling_1d,
    "lieb_2d": run_lieb_2d,
    "lieb_highd": run_lieb_highd,
    "sparsified_welded": run_sparsified_welded,
    "anderson_diag": run_anderson_diag,
    "classical_vs_quantum": run_classical_vs_quantum,
    "dos_dyson": run_dos_dyson,
}


def run_experiment(config: dict, jobs: int = 1) -> list[ExperimentRecord]:
    """Execute a registered experiment; grid points may run on a thread pool,
    with records sorted so the output is reproducible either way."""
    name = config.get("experiment")
    if name not in REGISTRY:
        raise UnknownExperiment(f"no experiment named {name!r}")
    config = dict(config)
    config["caps"] = _caps(config)
    if jobs > 1 and name == "scaling_1d":
        seeds = config.get("seeds", list(range(50)))
        chunks = [dict(config, seeds=[s]) for s in seeds]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            nested = pool.map(REGISTRY[name], chunks)
        records = [r for sub in nested for r in sub]
    else:
        records = REGISTRY[name](config)
    records.sort(key=lambda r: json.dumps(r.params, sort_keys=True, default=str))
    return records


def records_to_csv(records: list[ExperimentRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    if not records:
        return buf.getvalue()
    keys: list[str] = []
    for r in records:
        for k in r.flat():
            if k not in keys:
                keys.append(k)
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for r in records:
        row = {k: _fmt(v) for k, v in r.flat().items()}
        writer.writerow(row)
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_outputs(records: list[ExperimentRecord], out_prefix: str) -> None:
    with open(out_prefix + ".csv", "w") as fh:
        fh.write(records_to_csv(records))
    with open(out_prefix + ".json", "w") as fh:
        json.dump([r.to_json_dict() for r in records], fh, indent=1)
