"""Seeded experiments behind the ``qconv`` subcommands.

Each ``cmd_*`` takes an :class:`ExperimentConfig` and returns a result record
(a plain dict).  Assertions carry a citation label and a margin; scans of
conjectures only record.  ``write_outputs`` serializes deterministically.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .convolution import (
    ConvolutionParams,
    NoValidParams,
    QubitConvolution,
    TripleConvolutionParams,
    find_params,
    find_triple_params,
    iterate_convolution,
)
from .entropy import max_relative, relative_entropy, renyi_relative, trace_distance, von_neumann
from .magic import (
    Unbounded,
    clt_bound,
    cssa_check,
    difference_constant,
    doubling_constant,
    is_zero_mean,
    magic_measure_direct,
    magic_measure_msps,
    mean_state,
    pinsker_trace_bound,
    qist_bound,
    renyi_clt_bound,
    ruzsa_divergence,
    subadditivity_counterexamples,
    symmetrized_ruzsa,
    to_zero_mean,
    tripling_constant,
    triangle_check,
)
from .phase_space import BudgetExceeded, SystemShape, is_prime
from .stabilizers import (
    build_catalog,
    enumerate_pure_stabilizers,
    is_stabilizer_pure,
    random_clifford,
)
from .states import DensityMatrix, diagonal_state, maximally_mixed, partial_trace, random_density, save_state, t_state, tensor

SCHEMA_VERSION = 1
CONFIG_VERSION = 1
ARTIFACT_VERSION = "0.1.0"

EXPERIMENTS = ("clt", "doubling", "qist", "ruzsa", "cssa-scan", "triangle-scan", "magic-measure", "params")

CITE = {
    "clt_monotone": "entropic q-CLT: entropy nondecreasing along self-convolution",
    "clt_limit": "entropic q-CLT: convergence to the mean state",
    "clt_rate": "magic-gap rate bound on relative entropy",
    "pinsker": "magic-gap rate bound on trace distance",
    "renyi_rate": "Renyi q-CLT rate bound",
    "doubling_stab": "doubling constant equals 1 on stabilizer states",
    "doubling_ge1": "doubling constant at least 1",
    "qist": "quantum inverse sumset bound via magic gap",
    "rz_positive": "Ruzsa divergence positivity",
    "rz_tensor": "Ruzsa divergence additivity under tensor product",
    "rz_clifford": "Ruzsa divergence Clifford invariance",
    "rz_ptrace": "Ruzsa divergence monotone under partial trace",
    "rz_convex": "Ruzsa divergence convex in the first argument",
    "rz_concave": "Ruzsa divergence concave in the second argument",
    "rz_msps": "Ruzsa self-divergence vanishes exactly on MSPS",
    "counterexample": "no subadditivity or superadditivity for convolution",
    "pfr_exact": "exact-case PFR: shared stabilizer group gives zero symmetrized divergence",
    "cssa_stab": "CSSA holds on stabilizer triples",
    "cssa_diag": "CSSA holds on computational-diagonal triples",
    "tri_stab": "triangle inequality holds on stabilizer triples",
    "tri_flat": "triangle inequality with maximally mixed middle state",
    "mrz_routes": "magic measure equals min over MSPS of D(rho || rho box sigma)",
    "mrz_msps": "magic measure vanishes on MSPS",
    "mrz_monotone": "magic measure monotone under stabilizer channels",
}

DEFAULT_TOLS = {"monotone": 1e-9, "bound": 1e-8, "check": 1e-8, "exact": 1e-9, "routes": 1e-8}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    d: int = 7
    n: int = 1
    params: object = "auto"  # "auto" or [s, t]; qubits use K
    K: int = 3
    triple_params: object = "auto"  # "auto" or [s, t, l, m]
    trials: int = 20
    rank: object = "full"  # "full", "pure" or an integer
    seed: int = 0
    N: int = 6
    fixture: str | None = None  # "stabilizer", "t_state" or None for random states
    samples: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    clt_limit: dict = field(default_factory=lambda: {"gap_min": 0.3, "max_relative_entropy": 1e-3})
    workers: int = 1

    @property
    def shape(self) -> SystemShape:
        return SystemShape(self.d, self.n)

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLS[key]))


_KEYS = {f for f in ExperimentConfig.__dataclass_fields__} | {"config_version"}


def config_from_dict(doc: dict, experiment: str | None = None) -> ExperimentConfig:
    doc = dict(doc or {})
    unknown = set(doc) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    version = doc.pop("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {version}")
    if experiment is not None:
        if doc.get("experiment", experiment) != experiment:
            raise ConfigError(f"config is for {doc['experiment']!r}, not {experiment!r}")
        doc["experiment"] = experiment
    if doc.get("experiment") not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {doc.get('experiment')!r}")
    cfg = ExperimentConfig(**doc)
    _validate(cfg)
    return cfg


def load_config(path, experiment: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text()) if path else {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_dict(doc, experiment)


def _validate(cfg: ExperimentConfig) -> None:
    if not is_prime(int(cfg.d)):
        raise ConfigError(f"d must be prime, got {cfg.d}")
    if cfg.n < 1 or cfg.trials < 0 or cfg.N < 1 or cfg.workers < 1:
        raise ConfigError("n, N and workers must be positive and trials nonnegative")
    if cfg.fixture not in (None, "stabilizer", "t_state"):
        raise ConfigError(f"unknown fixture {cfg.fixture!r}")
    if cfg.fixture == "t_state" and (cfg.d, cfg.n) != (2, 1):
        raise ConfigError("the T-state fixture needs d=2, n=1")
    if not (cfg.rank in ("full", "pure") or isinstance(cfg.rank, int)):
        raise ConfigError(f"rank must be 'full', 'pure' or an integer, got {cfg.rank!r}")
    if cfg.d == 2 and cfg.K % 2 == 0:
        raise ConfigError("qubit convolution needs odd K")
    unknown = set(cfg.tolerances) - set(DEFAULT_TOLS)
    if unknown:
        raise ConfigError(f"unknown tolerances: {sorted(unknown)}")
    if cfg.experiment == "clt" and cfg.d == 2 and cfg.N % 2 == 0:
        raise ConfigError("qubit CLT runs need odd N")
    try:
        cfg.shape
    except (ValueError, BudgetExceeded) as exc:
        raise ConfigError(str(exc)) from None


def resolve_params(cfg: ExperimentConfig, balanced: bool = False):
    if cfg.d == 2:
        return QubitConvolution(cfg.K)
    try:
        if cfg.params == "auto":
            return find_params(cfg.d, balanced)
        s, t = cfg.params
        p = ConvolutionParams(cfg.d, int(s), int(t))
    except (NoValidParams, ValueError, TypeError) as exc:
        raise ConfigError(f"convolution parameters: {exc}") from None
    if balanced and not p.balanced:
        raise ConfigError(f"{cfg.experiment} needs balanced parameters, got ({p.s}, {p.t})")
    return p


def resolve_triple(cfg: ExperimentConfig) -> TripleConvolutionParams:
    try:
        if cfg.triple_params == "auto":
            return find_triple_params(cfg.d)
        s, t, l, m = cfg.triple_params
        return TripleConvolutionParams(ConvolutionParams(cfg.d, int(s), int(t)), int(l), int(m))
    except (NoValidParams, ValueError, TypeError) as exc:
        raise ConfigError(f"triple parameters: {exc}") from None


def _params_json(p):
    if isinstance(p, QubitConvolution):
        return {"K": p.K}
    if isinstance(p, TripleConvolutionParams):
        return dict(zip("stlm", p.as_tuple()))
    return {"s": p.s, "t": p.t}


# --------------------------------------------------------------------------- #
# record helpers
# --------------------------------------------------------------------------- #


class Record:
    """Accumulates assertions; ``margin >= -tol`` means pass."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.assertions: dict = {}
        self.failures: list = []

    def check(self, key: str, margin: float, tol: float, trial=None, state=None) -> None:
        a = self.assertions.setdefault(key, {"citation": CITE[key], "count": 0, "min_margin": math.inf, "tol": tol, "holds": True})
        a["count"] += 1
        a["min_margin"] = min(a["min_margin"], float(margin))
        if not margin >= -tol:
            a["holds"] = False
            self.failures.append({"assertion": key, "trial": trial, "margin": float(margin), "state": state})

    def passed(self) -> bool:
        return all(a["holds"] for a in self.assertions.values())

    def finish(self, trials: list, aggregates: dict, extra: dict | None = None) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "artifact_version": ARTIFACT_VERSION,
            "experiment": self.cfg.experiment,
            "config": asdict(self.cfg),
            "passed": self.passed(),
            "assertions": {k: self.assertions[k] for k in sorted(self.assertions)},
            "aggregates": aggregates,
            "trials": trials,
            "failures": [{k: v for k, v in f.items() if k != "state"} for f in self.failures],
        }
        if extra:
            out.update(extra)
        out["_failed_states"] = [f for f in self.failures if f.get("state") is not None]
        return out


def trial_seeds(cfg: ExperimentConfig) -> list:
    return np.random.SeedSequence(cfg.seed).spawn(cfg.trials)


def sample_state(shape: SystemShape, rank, rng) -> DensityMatrix:
    if rank == "pure":
        return random_density(shape, 1, rng)
    if rank == "full":
        return random_density(shape, None, rng)
    return random_density(shape, int(rank), rng)


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# --------------------------------------------------------------------------- #
# clt
# --------------------------------------------------------------------------- #


def _clt_inputs(cfg: ExperimentConfig) -> list:
    sh = cfg.shape
    if cfg.fixture == "t_state":
        return [t_state()]
    if cfg.fixture == "stabilizer":
        cat = enumerate_pure_stabilizers(sh)
        zm = [r for r in cat.pure_states if is_zero_mean(r)]
        return zm[: max(cfg.trials, 1)]
    return [sample_state(sh, cfg.rank, np.random.default_rng(s)) for s in trial_seeds(cfg)]


def _clt_trial(job):
    i, rho, cfg = job
    params = resolve_params(cfg)
    displaced = None
    if not is_zero_mean(rho):
        rho, x = to_zero_mean(rho)
        displaced = {"p": list(x.p), "q": list(x.q)}
    rep = mean_state(rho)
    pur = rho.purity()
    traj = iterate_convolution(rho, cfg.N, params)
    steps = list(range(1, cfg.N + 1, 2)) if rho.d == 2 else list(range(1, cfg.N + 1))
    rows = []
    for N, s in zip(steps, traj):
        M = mean_state(s).mean  # equals M(rho) for qudits; qubit networks may flip Y phases
        D = relative_entropy(s, M)
        b = clt_bound(rep, pur, N)
        rb = renyi_clt_bound(rep, pur, N)
        rows.append({
            "trial": i, "N": N, "entropy": von_neumann(s), "relative_entropy": D, "bound": b.value,
            "trace_distance": trace_distance(s, M), "pinsker_bound": pinsker_trace_bound(rep, pur, N),
            "linear_bound": b.linear, "renyi2": renyi_relative(s, M, 2), "renyi_inf": max_relative(s, M),
            "renyi_bound": rb,
        })
    return {"trial": i, "gap": rep.gap, "rank": rep.rank, "purity": pur, "displaced_by": displaced, "rows": rows,
            "final_state": traj[-1], "state": rho}


def cmd_clt_run(cfg: ExperimentConfig) -> dict:
    rec = Record(cfg)
    inputs = _clt_inputs(cfg)
    results = _map(_clt_trial, [(i, r, cfg) for i, r in enumerate(inputs)], cfg.workers)
    tm, tb = cfg.tol("monotone"), cfg.tol("bound")
    trace_rows, trials = [], []
    for res in results:
        rows, i = res["rows"], res["trial"]
        for a, b in zip(rows, rows[1:]):
            rec.check("clt_monotone", b["entropy"] - a["entropy"], tm, i, res["state"])
            rec.check("clt_monotone", a["relative_entropy"] - b["relative_entropy"], tm, i, res["state"])
        for r in rows:
            rec.check("clt_rate", r["bound"] - r["relative_entropy"], tb, i, res["state"])
            rec.check("pinsker", r["pinsker_bound"] - r["trace_distance"], tb, i, res["state"])
            for key in ("relative_entropy", "renyi2", "renyi_inf"):
                rec.check("renyi_rate", r["renyi_bound"] - r[key], tb, i, res["state"])
        lim = cfg.clt_limit or {}
        if lim and cfg.fixture is None and res["gap"] >= lim.get("gap_min", 0.3):
            rec.check("clt_limit", lim.get("max_relative_entropy", 1e-3) - rows[-1]["relative_entropy"], 0.0, i, res["state"])
        trace_rows.extend(rows)
        trials.append({k: res[k] for k in ("trial", "gap", "rank", "purity", "displaced_by")}
                      | {"final_relative_entropy": rows[-1]["relative_entropy"]})
    agg = {
        "trials": len(trials),
        "max_final_relative_entropy": max((t["final_relative_entropy"] for t in trials), default=0.0),
        "min_gap": min((t["gap"] for t in trials), default=0.0),
    }
    return rec.finish(trials, agg, {"params": _params_json(resolve_params(cfg)), "_trace": trace_rows})


# --------------------------------------------------------------------------- #
# doubling / qist
# --------------------------------------------------------------------------- #


def _ensemble(cfg: ExperimentConfig, rank=None) -> list:
    sh = cfg.shape
    if cfg.fixture == "stabilizer":
        return list(enumerate_pure_stabilizers(sh).pure_states)
    if cfg.fixture == "t_state":
        return [t_state()]
    return [sample_state(sh, rank or cfg.rank, np.random.default_rng(s)) for s in trial_seeds(cfg)]


def cmd_doubling(cfg: ExperimentConfig) -> dict:
    rec = Record(cfg)
    params = resolve_params(cfg)
    trials = []
    for i, rho in enumerate(_ensemble(cfg)):
        row = {"trial": i, "doubling": doubling_constant(rho, params), "doubling_renyi2": doubling_constant(rho, params, 2.0)}
        if rho.d == 2:
            tr = tripling_constant(rho)
            row.update(tripling_difference=tr.difference, tripling_exponential=tr.exponential)
        else:
            row["difference"] = difference_constant(rho, params)
        rec.check("doubling_ge1", row["doubling"] - 1, cfg.tol("exact"), i, rho)
        if cfg.fixture == "stabilizer":
            rec.check("doubling_stab", -abs(row["doubling"] - 1), cfg.tol("exact"), i, rho)
        trials.append(row)
    agg = {"trials": len(trials), "max_doubling": max((t["doubling"] for t in trials), default=1.0)}
    return rec.finish(trials, agg, {"params": _params_json(params)})


def cmd_qist(cfg: ExperimentConfig) -> dict:
    rec = Record(cfg)
    params = resolve_params(cfg)
    trials = []
    pure_only = cfg.rank == "pure" or cfg.fixture is not None
    for i, psi in enumerate(_ensemble(cfg)):
        rep = mean_state(psi)
        C = doubling_constant(psi, params)
        row = {"trial": i, "doubling": C, "relative_entropy": relative_entropy(psi, rep.mean), "rank": rep.rank, "gap": rep.gap}
        if pure_only:
            try:
                row["bound"] = qist_bound(psi, C, rep)
                rec.check("qist", row["bound"] - row["relative_entropy"], cfg.tol("bound"), i, psi)
            except Unbounded:
                row["bound"] = math.inf
        trials.append(row)
    agg = {"trials": len(trials), "pure": pure_only}
    return rec.finish(trials, agg, {"params": _params_json(params)})


# --------------------------------------------------------------------------- #
# ruzsa
# --------------------------------------------------------------------------- #


def cmd_ruzsa(cfg: ExperimentConfig) -> dict:
    rec = Record(cfg)
    sh1 = SystemShape(cfg.d, 1)
    sh2 = SystemShape(cfg.d, 2)
    params = resolve_params(cfg)
    tol = cfg.tol("check")
    trials = []
    for i, seed in enumerate(trial_seeds(cfg)):
        rng = np.random.default_rng(seed)
        a, b, c = (sample_state(sh1, cfg.rank, rng) for _ in range(3))
        rz = ruzsa_divergence(a, b, params)
        rec.check("rz_positive", rz, tol, i, a)
        U = random_clifford(sh1, 6, rng)
        rec.check("rz_clifford", -abs(ruzsa_divergence(a.conjugate(U), b.conjugate(U), params) - rz), tol, i, a)
        w = rng.dirichlet(np.ones(3))
        mix = DensityMatrix(w[0] * a.op + w[1] * b.op + w[2] * c.op, sh1)
        parts = [a, b, c]
        cvx = sum(wi * ruzsa_divergence(x, b, params) for wi, x in zip(w, parts)) - ruzsa_divergence(mix, b, params)
        ccv = ruzsa_divergence(a, mix, params) - sum(wi * ruzsa_divergence(a, x, params) for wi, x in zip(w, parts))
        rec.check("rz_convex", cvx, tol, i, a)
        rec.check("rz_concave", ccv, tol, i, a)
        a2, b2 = (sample_state(sh1, cfg.rank, rng) for _ in range(2))
        add = ruzsa_divergence(tensor(a, a2), tensor(b, b2), params) - rz - ruzsa_divergence(a2, b2, params)
        rec.check("rz_tensor", -abs(add), tol, i, a)
        A, B = sample_state(sh2, cfg.rank, rng), sample_state(sh2, cfg.rank, rng)
        full = ruzsa_divergence(A, B, params)
        mono = min(full - ruzsa_divergence(partial_trace(A, k), partial_trace(B, k), params) for k in (0, 1))
        rec.check("rz_ptrace", mono, tol, i, A)
        trials.append({"trial": i, "ruzsa": rz, "tensor_defect": add, "convexity_margin": cvx,
                       "concavity_margin": ccv, "ptrace_margin": mono})

    ce = subadditivity_counterexamples(sh1, params)
    a, b = ce["not_subadditive"], ce["not_superadditive"]
    rec.check("counterexample", a["S_conv"] - a["S_sum"] - ce["ceiling"], cfg.tol("exact"))
    rec.check("counterexample", -abs(b["S_conv"] - ce["ceiling"]), cfg.tol("exact"))
    rec.check("counterexample", 1e-12 - max(a["dev_from_flat"], b["dev_from_flat"]), 0.0)

    msps_stats = {}
    try:
        cat = build_catalog(sh1)
        msps_vals = [abs(ruzsa_divergence(e.state, e.state, params)) for e in cat.msps]
        for v in msps_vals:
            rec.check("rz_msps", -v, tol)
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(cfg.trials + 1)[-1])
        non = []
        for _ in range(10):
            j, k = rng.choice(len(cat.pure_states), 2, replace=False)
            mixed = DensityMatrix(0.7 * cat.pure_states[j].op + 0.3 * cat.pure_states[k].op, sh1)
            non.append(ruzsa_divergence(mixed, mixed, params))
            rec.check("rz_msps", non[-1] - tol, 0.0)
        pfr = []
        by_group: dict = {}
        for rho, g in zip(cat.pure_states, cat.groups):
            by_group.setdefault(tuple(x for x, _ in g.generators), []).append(rho)
        for members in by_group.values():
            for x, y in zip(members, members[1:]):
                rec.check("pfr_exact", 0.0 if is_stabilizer_pure(x) and is_stabilizer_pure(y) else -1.0, 0.0)
                pfr.append(symmetrized_ruzsa(x, y, params))
                rec.check("pfr_exact", -abs(pfr[-1]), tol)
        msps_stats = {"msps": len(msps_vals), "max_msps_self_divergence": max(msps_vals),
                      "min_nonmsps_self_divergence": min(non), "pfr_pairs": len(pfr)}
    except BudgetExceeded as exc:
        msps_stats = {"skipped": str(exc)}
    agg = {"trials": len(trials), "counterexamples": ce, "catalog": msps_stats}
    return rec.finish(trials, agg, {"params": _params_json(params)})


# --------------------------------------------------------------------------- #
# conjecture scans
# --------------------------------------------------------------------------- #


def _diagonal(sh: SystemShape, rng) -> DensityMatrix:
    return diagonal_state(rng.dirichlet(np.ones(sh.dim)), sh)


def _triples(rng, pool: list, count: int):
    for _ in range(count):
        idx = rng.integers(len(pool), size=3)
        yield tuple(int(i) for i in idx), tuple(pool[i] for i in idx)


def _scan_summary(checks: list) -> dict:
    m = [c.margin for c in checks]
    return {"count": len(m), "min_margin": min(m) if m else None, "violations": sum(not c.holds for c in checks)}


def cmd_cssa_scan(cfg: ExperimentConfig) -> dict:
    rec = Record(cfg)
    tp = resolve_triple(cfg)
    sh = cfg.shape
    tol = cfg.tol("check")
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3)]
    n_stab = int(cfg.samples.get("stabilizer", 500))
    n_diag = int(cfg.samples.get("diagonal", 100))
    n_rand = int(cfg.samples.get("random", cfg.trials))

    cat = enumerate_pure_stabilizers(sh)
    stab = []
    for idx, (r, s, t) in _triples(streams[0], list(cat.pure_states), n_stab):
        c = cssa_check(r, s, t, tp, tol)
        rec.check("cssa_stab", c.margin, tol, idx)
        stab.append(c)
    diag = []
    for i in range(n_diag):
        r, s, t = (_diagonal(sh, streams[1]) for _ in range(3))
        c = cssa_check(r, s, t, tp, tol)
        rec.check("cssa_diag", c.margin, tol, i, r)
        diag.append(c)
    rand, trials = [], []
    for i in range(n_rand):
        r, s, t = (sample_state(sh, cfg.rank, streams[2]) for _ in range(3))
        c = cssa_check(r, s, t, tp, tol)
        if not c.holds:
            c = cssa_check(r, s, t, tp, tol, fast=False)
        rand.append(c)
        trials.append({"trial": i, "lhs": c.lhs, "rhs": c.rhs, "holds": c.holds})
    agg = {"stabilizer": _scan_summary(stab), "diagonal": _scan_summary(diag), "random": _scan_summary(rand)}
    return rec.finish(trials, agg, {"params": _params_json(tp)})


def cmd_triangle_scan(cfg: ExperimentConfig) -> dict:
    rec = Record(cfg)
    params = resolve_params(cfg, balanced=True)
    sh = cfg.shape
    tol = cfg.tol("check")
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3)]
    cat = enumerate_pure_stabilizers(sh)
    stab = []
    for idx, (r, s, t) in _triples(streams[0], list(cat.pure_states), int(cfg.samples.get("stabilizer", 200))):
        c = triangle_check(r, s, t, params, tol)
        rec.check("tri_stab", c.margin, tol, idx)
        stab.append(c)
    flat = maximally_mixed(sh)
    flats = []
    for i in range(int(cfg.samples.get("flat", 20))):
        r, t = sample_state(sh, cfg.rank, streams[1]), sample_state(sh, cfg.rank, streams[1])
        c = triangle_check(r, flat, t, params, tol)
        rec.check("tri_flat", c.margin, tol, i, r)
        flats.append(c)
    rand, trials = [], []
    for i in range(int(cfg.samples.get("random", cfg.trials))):
        r, s, t = (sample_state(sh, cfg.rank, streams[2]) for _ in range(3))
        c = triangle_check(r, s, t, params, tol)
        rand.append(c)
        trials.append({"trial": i, "lhs": c.lhs, "rhs": c.rhs, "holds": c.holds})
    agg = {"stabilizer": _scan_summary(stab), "flat_middle": _scan_summary(flats), "random": _scan_summary(rand)}
    return rec.finish(trials, agg, {"params": _params_json(params)})


# --------------------------------------------------------------------------- #
# magic measure
# --------------------------------------------------------------------------- #


def cmd_magic_measure(cfg: ExperimentConfig) -> dict:
    rec = Record(cfg)
    params = resolve_params(cfg)
    sh = cfg.shape
    tol = cfg.tol("routes")
    cat = build_catalog(sh)
    pure = list(cat.pure_states)
    msps = [e.state for e in cat.msps]
    inputs = _ensemble(cfg)
    trials = []
    for i, rho in enumerate(inputs):
        direct, arg = magic_measure_direct(rho, params, pure)
        alt = magic_measure_msps(rho, params, msps)
        rec.check("mrz_routes", -abs(direct - alt), tol, i, rho)
        trials.append({"trial": i, "direct": direct, "argmin": arg, "msps_route": alt})
    for j, s in enumerate(msps):
        rec.check("mrz_msps", -abs(magic_measure_direct(s, params, pure)[0]), tol, j)
        rec.check("mrz_msps", -abs(magic_measure_msps(s, params, msps)), tol, j)
    mono = []
    if sh.n == 1:
        sh2 = SystemShape(sh.d, 2)
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(cfg.trials + 1)[-1])
        for i, rho in enumerate(inputs[: int(cfg.samples.get("channels", 5))]):
            anc = pure[int(rng.integers(len(pure)))]
            U = random_clifford(sh2, 6, rng)
            out = partial_trace(tensor(rho, anc).conjugate(U), 1)
            before = trials[i]["direct"]
            after = magic_measure_direct(out, params, pure)[0]
            rec.check("mrz_monotone", before - after, tol, i, rho)
            mono.append(before - after)
    agg = {
        "trials": len(trials),
        "max_route_gap": max((abs(t["direct"] - t["msps_route"]) for t in trials), default=0.0),
        "catalog_pure": len(pure),
        "catalog_msps": len(msps),
        "min_channel_margin": min(mono) if mono else None,
    }
    return rec.finish(trials, agg, {"params": _params_json(params)})


# --------------------------------------------------------------------------- #
# params
# --------------------------------------------------------------------------- #


def cmd_params(d: int) -> dict:
    if not is_prime(d):
        raise ConfigError(f"d must be prime, got {d}")
    out = {"schema_version": SCHEMA_VERSION, "artifact_version": ARTIFACT_VERSION, "experiment": "params", "d": d}
    for key, fn in (("params", lambda: find_params(d)), ("balanced", lambda: find_params(d, True)),
                    ("triple", lambda: find_triple_params(d))):
        try:
            p = fn()
            out[key] = {"feasible": True, "values": _params_json(p)}
        except NoValidParams as exc:
            out[key] = {"feasible": False, "searched": exc.searched, "certificate": str(exc)}
    out["passed"] = True
    return out


COMMANDS = {
    "clt": cmd_clt_run,
    "doubling": cmd_doubling,
    "qist": cmd_qist,
    "ruzsa": cmd_ruzsa,
    "cssa-scan": cmd_cssa_scan,
    "triangle-scan": cmd_triangle_scan,
    "magic-measure": cmd_magic_measure,
}


def run(cfg: ExperimentConfig) -> dict:
    try:
        if cfg.experiment == "params":
            return cmd_params(cfg.d)
        return COMMANDS[cfg.experiment](cfg)
    except BudgetExceeded as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------- #
# output
# --------------------------------------------------------------------------- #

TRACE_COLUMNS = ["trial", "N", "entropy", "relative_entropy", "bound", "trace_distance", "pinsker_bound",
                 "linear_bound", "renyi2", "renyi_inf", "renyi_bound"]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_outputs(result: dict, out_dir, wall_clock: float | None = None) -> Path:
    """``results.json`` (deterministic), ``trace.csv`` when present, state dumps for failures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = dict(result)
    trace = result.pop("_trace", None)
    failed = result.pop("_failed_states", [])
    if failed:
        dump = out / "failures"
        dump.mkdir(exist_ok=True)
        paths = []
        for k, f in enumerate(failed):
            p = dump / f"failure_{k:03d}_{f['assertion']}_trial{f['trial']}.json"
            save_state(f["state"], p, assertion=f["assertion"], trial=_clean(f["trial"]), margin=f["margin"])
            paths.append(str(p.relative_to(out)))
        result["failure_dumps"] = paths
    (out / "results.json").write_text(json.dumps(_clean(result), indent=1, sort_keys=True) + "\n")
    if trace is not None:
        with open(out / "trace.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS + ["log_relative_entropy", "log_bound"])
            w.writeheader()
            for r in trace:
                row = {k: repr(float(r[k])) if k not in ("trial", "N") else r[k] for k in TRACE_COLUMNS}
                row["log_relative_entropy"] = repr(math.log(r["relative_entropy"])) if r["relative_entropy"] > 0 else "-inf"
                row["log_bound"] = repr(math.log(r["bound"])) if r["bound"] > 0 else "-inf"
                w.writerow(row)
    if wall_clock is not None:
        (out / "timing.json").write_text(json.dumps({"wall_clock_s": wall_clock}) + "\n")
    return out / "results.json"


def timed_run(cfg: ExperimentConfig) -> tuple:
    t0 = time.perf_counter()
    res = run(cfg)
    return res, time.perf_counter() - t0
