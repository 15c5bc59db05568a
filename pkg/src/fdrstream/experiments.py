"""Registry of reproducible experiments.

An experiment is a function ``(params, seed, jobs) -> ExperimentOutput``.
``run_experiment`` merges defaults, runs it, writes ``results.csv`` and
``summary.csv`` under ``<output_dir>/<name>/`` and optionally an SVG plot.
"""
from __future__ import annotations

import ast
import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .detector import DetectorConfig, Windowing, run_stream
from .errors import ConfigurationError
from .generator import (GaussianStd, LabeledSeries, MixtureConfig, OraclePValueConfig, StudentDF,
                        gaussian_sf, generate_mixture, generate_oracle_pvalues, student_matched_shift)
from .metrics import RejectionDistribution, theoretical_fdr_empirical_bh
from .multiple_testing import LORD3, MBH, calibration_cardinality, mbh_alpha_prime
from .prds import BONFERRONI_THRESHOLD, TABLE_N, TABLE_SHIFTS, run_overlap_grid
from .pvalues import CalibrationSpec, PValueKind, Strategy
from .rng import make_rng
from .simulation import oracle_window_counts, oracle_windows, simulate_window

log = logging.getLogger(__name__)


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str


@dataclass
class ExperimentOutput:
    results: list
    summary: list
    checks: list = field(default_factory=list)


@dataclass
class ExperimentSpec:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    replications: Optional[int] = None
    output_dir: str = "results"
    quick: bool = False
    jobs: int = 1
    plot: bool = False


@dataclass(frozen=True)
class Experiment:
    name: str
    anchor: str
    defaults: dict
    runner: Callable
    reps_key: str
    plot_x: str = "n"
    plot_y: tuple = ("fdr",)


def paper_n_grid(top=200):
    """``{10k} U {10k - 1}`` for k = 1..top, sorted."""
    return sorted({10 * k for k in range(1, top + 1)} | {10 * k - 1 for k in range(1, top + 1)})


def pmap(fn, tasks, jobs=1):
    """Ordered map, in-process or over a process pool."""
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


QUICK_TOLERANCE_SCALE = 2.0


def _tol(p, x):
    """Absolute tolerance ``x``, widened under the quick preset."""
    return x * (QUICK_TOLERANCE_SCALE if p.get("_quick") else 1.0)


def _se(x):
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")


def _ref(name):
    return GaussianStd() if name == "gaussian" else StudentDF(5)


# ---------------------------------------------------------------- window experiments over n

def _window_cell(task):
    (dist, delta_n, m1, n, p) = task
    ref = _ref(dist)
    delta = delta_n if dist == "gaussian" else student_matched_shift(delta_n, 5)
    key = (0 if dist == "gaussian" else 1, int(round(delta_n * 100)), m1, n)
    kinds = tuple(p["kinds"])
    res = simulate_window(n, p["m"], m1, p["alpha"], ref, delta, p["replications"], p["seed"], key=key, kinds=kinds)
    rows = []
    for kind, r in res.items():
        s = r.summary()
        row = {"scenario": dist, "delta": delta_n, "m1": m1, "n": n, "kind": kind, **s}
        if kind == "empirical":
            rd = RejectionDistribution.from_samples(r.r_i, p["m"])
            row["fdr_formula"] = theoretical_fdr_empirical_bh(n, p["m"], p["m"] - m1, p["alpha"], rd)
        else:
            row["fdr_formula"] = float("nan")
        rows.append(row)
    return rows


def _n_sweep(p, seed, jobs, dists, deltas, m1s, kinds):
    p = dict(p, seed=seed, kinds=kinds)
    tasks = [(d, delta, m1, n, p) for d in dists for delta in deltas for m1 in m1s for n in p["n_grid"]]
    rows = [r for chunk in pmap(_window_cell, tasks, jobs) for r in chunk]
    return rows


def _fdr_vs_n(p, seed, jobs):
    rows = _n_sweep(p, seed, jobs, p["scenarios"], p["deltas"], [p["m1"]], ("empirical",))
    checks = []
    cell = {(r["scenario"], r["delta"], r["n"]): r for r in rows}
    for d in p["scenarios"]:
        for delta in p["deltas"]:
            for lo, hi in ((999, 1000), (1999, 2000)):
                if (d, delta, lo) in cell and (d, delta, hi) in cell:
                    a, b = cell[(d, delta, lo)]["fdr"], cell[(d, delta, hi)]["fdr"]
                    ok = abs(a - 0.099) <= _tol(p, 0.006) and b - a >= 0.03
                    checks.append(Check(f"spike {d} delta={delta} n=({lo},{hi})", ok,
                                        f"FDR({lo})={a:.4f} FDR({hi})={b:.4f} gap={b - a:.4f}"))
    if {"gaussian", "student"} <= set(p["scenarios"]):
        for delta in p["deltas"]:
            gaps = [abs(cell[("gaussian", delta, n)]["fdr"] - cell[("student", delta, n)]["fdr"]) for n in p["n_grid"]]
            checks.append(Check(f"thin vs thick delta={delta}", max(gaps) <= _tol(p, 0.02), f"max gap {max(gaps):.4f} (target {_tol(p, 0.02):g})"))
    return ExperimentOutput(rows, rows, checks)


def _fnr_vs_n(p, seed, jobs):
    rows = []
    grid = [calibration_cardinality(p["m"], p["alpha"], ell) for ell in range(1, p["ell_max"] + 1)]
    for delta, m1 in p["cases"]:
        q = dict(p, n_grid=grid)
        rows += _n_sweep(q, seed, jobs, ["gaussian"], [delta], [m1], ("empirical", "oracle"))
    for r in rows:
        r["ell"] = (r["n"] + 1) * p["alpha"] / p["m"]
    summary = [r for r in rows if r["kind"] == "empirical"]
    oracle = {(r["delta"], r["m1"]): r["fnr"] for r in rows if r["kind"] == "oracle"}
    for r in summary:
        r["fnr_true_pvalues"] = oracle[(r["delta"], r["m1"])]
    return ExperimentOutput(rows, summary, [])


def _conformal_compare(p, seed, jobs):
    rows = _n_sweep(p, seed, jobs, ["gaussian"], [p["delta"]], [p["m1"]], ("empirical", "conformal"))
    cell = {(r["kind"], r["n"]): r for r in rows}
    worst = min(cell[("conformal", n)]["fnr"] - cell[("empirical", n)]["fnr"] for n in p["n_grid"])
    checks = [Check("conformal FNR >= empirical FNR", worst >= 0, f"min difference {worst:.4f}")]
    bound = (p["m"] - p["m1"]) * p["alpha"] / p["m"]
    for n in (1000, 2000):
        if ("conformal", n) in cell:
            c = cell[("conformal", n)]
            checks.append(Check(f"conformal FDR bound n={n}", c["fdr"] <= bound + 3 * c["fdr_se"],
                                f"FDR={c['fdr']:.4f} se={c['fdr_se']:.4f} bound={bound:.4f}"))
    return ExperimentOutput(rows, rows, checks)


def _intermediate_drops(p, seed, jobs):
    rows = _n_sweep(p, seed, jobs, ["gaussian"], [p["delta"]], list(p["m1_values"]), ("empirical",))
    pmf_rows = []
    for m1 in p["m1_values"]:
        for n in p["pmf_n"]:
            res = simulate_window(n, p["m"], m1, p["alpha"], GaussianStd(), p["delta"], p["replications"], seed,
                                  key=(9, m1, n))["empirical"]
            rd = RejectionDistribution.from_samples(res.r_i, p["m"])
            for k in range(1, p["pmf_kmax"] + 1):
                pmf_rows.append({"m1": m1, "n": n, "k": k, "p_r_i": rd[k], "p_r": float(np.mean(res.rejections == k))})
    return ExperimentOutput(rows + pmf_rows, rows, [])


# ---------------------------------------------------------------- oracle window experiments

def _mfdr_cell(task):
    alpha, pi, di, delta, p = task
    m, K, B = p["m"], p["windows"], p["replications"]
    m1 = int(round(pi * m))
    rng = make_rng(p["seed"], int(alpha * 1000), int(pi * 1000), di)
    pv = oracle_windows(rng, B * K, m, m1, delta)
    rows = []
    levels = {"BH": alpha, "mBH": mbh_alpha_prime(alpha, m, pi)}
    for name, level in levels.items():
        r, fp, fn = (a.reshape(B, K) for a in oracle_window_counts(pv, m1, level, m))
        fdp = np.where(r > 0, fp / np.maximum(r, 1), 0.0)
        mfdr = np.where(r.sum(axis=1) > 0, fp.sum(axis=1) / np.maximum(r.sum(axis=1), 1), 0.0)
        fnr = (fn / m1).mean(axis=1) if m1 else np.zeros(B)
        for b in range(B):
            rows.append({"alpha": alpha, "pi": pi, "delta": delta, "method": name, "replication": b,
                         "mfdr": float(mfdr[b]), "fdr": float(fdp[b].mean()), "fnr": float(fnr[b])})
    return rows


def _summarise(rows, keys, metrics):
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out = []
    for key, grp in groups.items():
        row = dict(zip(keys, key))
        for mname in metrics:
            v = [g[mname] for g in grp]
            row[mname] = float(np.mean(v))
            row[mname + "_se"] = _se(v)
        row["replications"] = len(grp)
        out.append(row)
    return out


def _mfdr_atypicity(p, seed, jobs):
    p = dict(p, seed=seed)
    deltas = np.logspace(0, p["log10_delta_max"], p["delta_points"]).tolist()
    tasks = [(a, pi, di, d, p) for a in p["alphas"] for pi in p["pis"] for di, d in enumerate(deltas)]
    rows = [r for chunk in pmap(_mfdr_cell, tasks, jobs) for r in chunk]
    summary = _summarise(rows, ("alpha", "pi", "delta", "method"), ("mfdr", "fdr", "fnr"))
    checks = []
    plateau = [s for s in summary if s["alpha"] == 0.2 and s["pi"] == 0.07 and s["method"] == "mBH" and s["delta"] >= 100]
    if plateau:
        target = (1 - 0.07) * 0.2
        worst = max(abs(s["mfdr"] - target) for s in plateau)
        fnr = max(s["fnr"] for s in plateau)
        checks.append(Check("mBH mFDR plateau alpha=0.2 pi=0.07", worst <= _tol(p, 0.015) and fnr == 0,
                            f"max |mFDR - {target:.3f}| = {worst:.4f}, max FNR = {fnr:.4f}"))
    return ExperimentOutput(rows, summary, checks)


def oracle_stream(pi, delta, T, seed, key):
    p, lab = generate_oracle_pvalues(OraclePValueConfig(pi, delta, T), rng=make_rng(seed, *key))
    return LabeledSeries(p, lab)


def _oracle_config(alpha, pi, m, windowing):
    return DetectorConfig(m, windowing, MBH(alpha, pi), PValueKind.ORACLE, survival=_identity)


def _identity(x):
    return x


def _disover_cell(task):
    alpha, pi, di, delta, b, p = task
    m = p["m"]
    series = oracle_stream(pi, delta, p["T"], p["seed"], (int(alpha * 1000), int(pi * 1000), di, b))
    row = {"alpha": alpha, "pi": pi, "delta": delta, "replication": b}
    for w in (Windowing.DISJOINT, Windowing.OVERLAPPING):
        res = run_stream(series, _oracle_config(alpha, pi, m, w))
        c = res.confusion(start=m)
        row[f"mfdr_{w.value}"] = c.false_positives / c.rejections if c.rejections else 0.0
        row[f"fnr_{w.value}"] = c.false_negatives / c.anomalies if c.anomalies else 0.0
    return row


def _disjoint_vs_overlap(p, seed, jobs):
    p = dict(p, seed=seed)
    deltas = list(p["deltas"])
    tasks = [(a, pi, di, d, b, p) for a in p["alphas"] for pi in p["pis"] for di, d in enumerate(deltas)
             for b in range(p["replications"])]
    rows = pmap(_disover_cell, tasks, jobs)
    summary = _summarise(rows, ("alpha", "pi", "delta"),
                         ("mfdr_disjoint", "mfdr_overlapping", "fnr_disjoint", "fnr_overlapping"))
    checks = []
    for s in summary:
        if s["alpha"] == 0.1 and s["pi"] == 0.01 and s["delta"] == 1000:
            dm = abs(s["mfdr_disjoint"] - s["mfdr_overlapping"])
            dn = abs(s["fnr_disjoint"] - s["fnr_overlapping"])
            checks.append(Check("disjoint vs overlapping delta=1000", dm <= _tol(p, 0.02) and dn <= _tol(p, 0.02),
                                f"|d mFDR|={dm:.4f} |d FNR|={dn:.4f}"))
    return ExperimentOutput(rows, summary, checks)


def _convergence_cell(task):
    alpha, pi, b, p = task
    m, T, step = p["m"], p["T"], p["checkpoint"]
    series = oracle_stream(pi, p["delta"], T, p["seed"], (int(alpha * 1000), int(pi * 1000), b))
    res = run_stream(series, _oracle_config(alpha, pi, m, Windowing.OVERLAPPING))
    d = res.decision.astype(bool) & res.decided
    fp = np.cumsum(d & (series.labels == 0))
    r = np.cumsum(d)
    ts = np.arange(step, T + 1, step)
    return [{"alpha": alpha, "pi": pi, "replication": b, "t": int(t),
             "fdp": float(fp[t - 1] / r[t - 1]) if r[t - 1] else 0.0} for t in ts]


def _convergence(p, seed, jobs):
    p = dict(p, seed=seed)
    tasks = [(a, pi, b, p) for a in p["alphas"] for pi in p["pis"] for b in range(p["replications"])]
    rows = [r for chunk in pmap(_convergence_cell, tasks, jobs) for r in chunk]
    groups = {}
    for r in rows:
        groups.setdefault((r["alpha"], r["pi"], r["t"]), []).append(r["fdp"])
    summary = []
    for (a, pi, t), v in groups.items():
        v = np.array(v)
        summary.append({"alpha": a, "pi": pi, "t": t, "median_fdp": float(np.median(v)),
                        "q025": float(np.quantile(v, 0.025)), "q975": float(np.quantile(v, 0.975)),
                        "mean_fdp": float(v.mean()), "share_in_band": float(np.mean((v >= 0.03) & (v <= 0.07))),
                        "replications": int(v.size)})
    checks = []
    for s in summary:
        if s["alpha"] == 0.05 and s["pi"] == 0.02 and s["t"] == 2000:
            checks.append(Check("convergence at T=2000", s["share_in_band"] >= 0.9,
                                f"{s['share_in_band']:.2f} of runs with FDP in [0.03, 0.07] (target 0.90)"))
    return ExperimentOutput(rows, summary, checks)


# ---------------------------------------------------------------- detector comparison

MODES = ("oracle", "fixed", "sliding-star", "sliding")


def _standard_normal(rng, size):
    return rng.standard_normal(size)


def compare_cell(task):
    """All policy/p-value combinations on one generated series."""
    delta, di, alpha, b, p = task
    T, m, pi = p["T"], p["m"], p["pi"]
    series = generate_mixture(MixtureConfig(pi, GaussianStd(), delta, T), rng=make_rng(p["seed"], di, b))
    n = calibration_cardinality(m, alpha, 1)
    calib = make_rng(p["seed"], 1000 + int(alpha * 1000), b).standard_normal(n)
    rows = []
    for pname in p["policies"]:
        policy = MBH(alpha, pi) if pname == "mBH" else LORD3(alpha)
        for mode in p["modes"]:
            if mode == "oracle":
                cfg = DetectorConfig(m, Windowing.OVERLAPPING, policy, PValueKind.ORACLE, survival=gaussian_sf)
            else:
                strat = {"fixed": Strategy.FIXED, "sliding-star": Strategy.SLIDING_ORACLE,
                         "sliding": Strategy.SLIDING_ESTIMATED}[mode]
                cfg = DetectorConfig(m, Windowing.OVERLAPPING, policy, PValueKind(p["pvalue"]),
                                     CalibrationSpec(strat, n, initial=calib), force_n=True)
            c = run_stream(series, cfg).confusion()
            rows.append({"policy": pname, "mode": mode, "alpha": alpha, "delta": delta, "replication": b,
                         "n": n, "fdp": c.false_positives / c.rejections if c.rejections else 0.0,
                         "fnp": c.false_negatives / c.anomalies if c.anomalies else 0.0,
                         "rejections": c.rejections})
    return rows


def _compare_lord(p, seed, jobs):
    p = dict(p, seed=seed)
    tasks = [(d, di, a, b, p) for di, d in enumerate(p["deltas"]) for a in p["alphas"]
             for b in range(p["replications"])]
    rows = [r for chunk in pmap(compare_cell, tasks, jobs) for r in chunk]
    summary = _summarise(rows, ("policy", "mode", "alpha", "delta"), ("fdp", "fnp"))
    for s in summary:
        s["fdr"], s["fdr_se"], s["fnr"], s["fnr_se"] = s.pop("fdp"), s.pop("fdp_se"), s.pop("fnp"), s.pop("fnp_se")
    cell = {(s["policy"], s["mode"], s["alpha"], s["delta"]): s for s in summary}
    checks = []
    targets = [(("mBH", "oracle", 0.1, 4.0), "fdr", lambda v: abs(v - 0.101) <= _tol(p, 0.03), f"0.101 +- {_tol(p, 0.03):g}"),
               (("mBH", "oracle", 0.1, 4.0), "fnr", lambda v: abs(v - 0.020) <= _tol(p, 0.03), f"0.020 +- {_tol(p, 0.03):g}"),
               (("mBH", "sliding", 0.1, 4.0), "fdr", lambda v: v >= 0.25, ">= 0.25"),
               (("LORD", "sliding-star", 0.1, 4.0), "fnr", lambda v: v >= 0.6, ">= 0.6")]
    for key, metric, ok, text in targets:
        if key in cell:
            v = cell[key][metric]
            checks.append(Check(f"{key[0]}/{key[1]} {metric}", bool(ok(v)), f"{v:.4f} (target {text})"))
    return ExperimentOutput(rows, summary, checks)


# ---------------------------------------------------------------- tables

def _overlap_tables(p, seed, jobs):
    cells, tests = run_overlap_grid(tuple(p["n_values"]), seed=seed, replications=p["replications"],
                                    n_permutations=p["n_permutations"], shifts=tuple(p["shifts"]))
    rows = [{"strategy": c["strategy"], "n": c["n"], "replication": i, "fdp": float(v)}
            for c in cells for i, v in enumerate(c["fdp"])]
    summary = [{k: v for k, v in c.items() if k != "fdp"} for c in cells]
    summary += [{"strategy": "permutation p-value", "n": n, "fdr": pv} for n, pv in tests.items()]
    worst = min(tests.values())
    checks = [Check("overlap strategies indistinguishable", worst > BONFERRONI_THRESHOLD,
                    f"smallest permutation p-value {worst:.4f} (threshold {BONFERRONI_THRESHOLD})")]
    return ExperimentOutput(rows, summary, checks)


def _heuristic_table(p, seed, jobs):
    rows, summary, checks = [], [], []
    for ai, a in enumerate(p["alphas"]):
        kinds = ("oracle", "empirical")
        n = calibration_cardinality(p["m"], a, 1)
        res = simulate_window(n, p["m"], p["m1"], a, GaussianStd(), p["delta"], p["replications"], seed,
                              key=(ai,), kinds=kinds)
        for kind, r in res.items():
            for b in range(r.rejections.size):
                rows.append({"alpha": a, "kind": kind, "replication": b, "r": int(r.rejections[b]), "r_i": int(r.r_i[b])})
            er, eri = float(r.rejections.mean()), float(r.r_i.mean())
            summary.append({"alpha": a, "kind": kind, "n": n if kind != "oracle" else "", "e_r": er, "e_r_i": eri,
                            "gap": eri - er - 1.0, "gap_se": _se(r.r_i - r.rejections),
                            "power_prediction": p["m1"] / (1 - a), "replications": r.rejections.size})
            if kind == "oracle":
                checks.append(Check(f"heuristic alpha={a}", abs(eri - er - 1) <= _tol(p, 0.3),
                                    f"E[R]={er:.3f} E[R(i)]={eri:.3f} gap={eri - er - 1:+.3f}"))
    return ExperimentOutput(rows, summary, checks)


EXPERIMENTS = {e.name: e for e in [
    Experiment("FdrVsN", "FDR against calibration size, thin and thick tails", dict(
        m=100, m1=1, alpha=0.1, deltas=[3.5, 4.0], scenarios=["gaussian", "student"],
        n_grid=paper_n_grid(), replications=10_000), _fdr_vs_n, "replications"),
    Experiment("FnrVsN", "FNR on the tuned calibration sizes n = l*m/alpha - 1", dict(
        m=100, alpha=0.1, ell_max=20, cases=[[4.0, 1], [3.5, 1], [3.0, 1], [3.0, 5]], replications=10_000),
        _fnr_vs_n, "replications", plot_y=("fnr",)),
    Experiment("MfdrAtypicity", "mFDR and FNR of BH and mBH against atypicity", dict(
        m=100, windows=50, replications=100, alphas=[0.05, 0.1, 0.2], pis=[0.01, 0.07],
        log10_delta_max=4.0, delta_points=25), _mfdr_atypicity, "replications", plot_x="delta", plot_y=("mfdr", "fnr")),
    Experiment("DisjointVsOverlap", "mBH on disjoint against overlapping windows", dict(
        m=100, T=10_000, replications=100, alphas=[0.1, 0.2], pis=[0.01, 0.02],
        deltas=[10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0, 10_000.0]), _disjoint_vs_overlap, "replications",
        plot_x="delta", plot_y=("mfdr_disjoint", "mfdr_overlapping")),
    Experiment("Convergence", "cumulative FDP of mBH against series length", dict(
        m=100, T=10_000, replications=100, alphas=[0.05, 0.1, 0.2], pis=[0.02, 0.01], delta=1000.0,
        checkpoint=100), _convergence, "replications", plot_x="t", plot_y=("median_fdp",)),
    Experiment("CompareLord", "mBH against LORD3 for four p-value estimators", dict(
        m=100, T=10_000, pi=0.01, deltas=[3.0, 3.5, 4.0], alphas=[0.1, 0.2], replications=100,
        policies=["mBH", "LORD"], modes=list(MODES), pvalue="empirical"), _compare_lord, "replications",
        plot_x="delta", plot_y=("fdr", "fnr")),
    Experiment("OverlapTables", "FDR under overlapping calibration sets and permutation tests", dict(
        n_values=list(TABLE_N), shifts=list(TABLE_SHIFTS), replications=1000, n_permutations=10_000),
        _overlap_tables, "replications"),
    Experiment("HeuristicTable", "E[R] against E[R(i)] for BH", dict(
        m=100, m1=2, delta=4.0, alphas=[0.05, 0.1, 0.2], replications=1000), _heuristic_table, "replications",
        plot_x="alpha", plot_y=("e_r", "e_r_i")),
    Experiment("ConformalCompare", "empirical against conformal p-values under BH", dict(
        m=100, m1=1, alpha=0.1, delta=4.0, n_grid=paper_n_grid(), replications=10_000), _conformal_compare,
        "replications", plot_y=("fdr", "fnr")),
    Experiment("IntermediateDrops", "FDR against n for several anomaly counts, with the law of R(i)", dict(
        m=100, alpha=0.1, delta=4.0, m1_values=[1, 2, 3, 4], n_grid=paper_n_grid(), replications=10_000,
        pmf_n=[999, 1000], pmf_kmax=10), _intermediate_drops, "replications"),
]}

ALIASES = {name.lower(): name for name in EXPERIMENTS}
ALIASES.update({"".join("-" + c.lower() if c.isupper() else c for c in name).lstrip("-"): name for name in EXPERIMENTS})


def resolve_name(name):
    key = str(name).strip()
    if key in EXPERIMENTS:
        return key
    try:
        return ALIASES[key.lower()]
    except KeyError:
        raise ConfigurationError(f"unknown experiment {name!r}; try one of {', '.join(EXPERIMENTS)}") from None


def parse_value(text):
    """Literal from an INI / CLI string; bare words stay strings."""
    if not isinstance(text, str):
        return text
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def effective_params(spec: ExperimentSpec):
    exp = EXPERIMENTS[resolve_name(spec.name)]
    params = dict(exp.defaults)
    unknown = set(spec.params) - set(params)
    if unknown:
        raise ConfigurationError(f"unknown parameter(s) for {exp.name}: {', '.join(sorted(unknown))}")
    params.update({k: parse_value(v) for k, v in spec.params.items()})
    if spec.replications is not None:
        params[exp.reps_key] = int(spec.replications)
    elif spec.quick:
        params[exp.reps_key] = max(10, params[exp.reps_key] // 10)
    params["_quick"] = bool(spec.quick)
    return params


def write_rows(path, rows):
    keys = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n", restval="")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def run_experiment(spec: ExperimentSpec) -> ExperimentOutput:
    exp = EXPERIMENTS[resolve_name(spec.name)]
    params = effective_params(spec)
    out = exp.runner(params, spec.seed, spec.jobs)
    if spec.output_dir:
        target = os.path.join(spec.output_dir, exp.name)
        try:
            os.makedirs(target, exist_ok=True)
            write_rows(os.path.join(target, "results.csv"), out.results)
            write_rows(os.path.join(target, "summary.csv"), out.summary)
        except OSError as err:
            raise ConfigurationError(f"cannot write to {target}: {err}") from None
        if spec.plot:
            plot_summary(exp, out.summary, os.path.join(target, "summary.svg"))
    return out


def plot_summary(exp: Experiment, summary, path):
    """Line plot of the summary; silently skipped when matplotlib is missing."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib is not installed; skipping %s", path)
        return False
    rows = [r for r in summary if isinstance(r.get(exp.plot_x), (int, float))]
    grouping = ("delta", "alpha", "pi")
    series_keys = [k for k in rows[0] if k not in (exp.plot_x, "replications")
                   and (k in grouping or not isinstance(rows[0][k], float))] if rows else []
    fig, axes = plt.subplots(1, len(exp.plot_y), figsize=(6 * len(exp.plot_y), 4), squeeze=False)
    for ax, y in zip(axes[0], exp.plot_y):
        groups = {}
        for r in rows:
            if y in r:
                groups.setdefault(tuple(r[k] for k in series_keys), []).append((r[exp.plot_x], r[y]))
        for key, pts in groups.items():
            pts.sort()
            ax.plot([a for a, _ in pts], [b for _, b in pts], label=" ".join(map(str, key)), lw=1)
        if exp.plot_x == "delta":
            ax.set_xscale("log")
        ax.set_xlabel(exp.plot_x)
        ax.set_ylabel(y)
        if 0 < len(groups) <= 12:
            ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True
