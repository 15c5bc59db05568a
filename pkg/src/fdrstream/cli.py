"""Command-line entry point: ``fdrstream {simulate,detect,experiment,list,show-config}``.

Exit codes: 0 success, 1 usage or configuration error, 2 failed ``--check``.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys

import numpy as np

from . import __version__
from .detector import DetectorConfig, Windowing, run_stream
from .errors import FdrStreamError
from .experiments import EXPERIMENTS, ExperimentSpec, parse_value, resolve_name, run_experiment
from .generator import (MixtureConfig, OraclePValueConfig, generate_mixture, generate_oracle_pvalues,
                        parse_ref_dist, read_series_csv)
from .metrics import fdp, fnp
from .multiple_testing import BH, LORD3, MBH, calibration_cardinality, policy_level
from .pvalues import CalibrationSpec, PValueKind, Strategy
from .rng import make_rng
from .scoring import parse_score

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2
RUN_KEYS = {"seed": int, "jobs": int, "quick": bool, "plot": bool, "out": str, "replications": int}
LOW_POWER_WARNING = ("warning: LORD3 with conformal p-values has weak power; the smallest attainable "
                     "p-value 1/(n+1) rarely clears the LORD thresholds")

log = logging.getLogger("fdrstream")


class UsageExit(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse exits with 2 by default; 2 is reserved for failed checks
        self.print_usage(sys.stderr)
        raise UsageExit(f"{self.prog}: error: {message}")


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config(path):
    """Flat ``key = value`` file; section headers are optional and ignored."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise UsageExit(f"cannot read config {path}: {err}") from None
    try:
        cp.read_string("[__flat__]\n" + text)
    except configparser.Error as err:
        raise UsageExit(f"config {path}: {err}") from None
    out = {}
    for section in cp.sections():
        out.update(cp[section])
    return out


def build_parser():
    p = Parser(prog="fdrstream", description="Streaming anomaly detection with FDR control.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=Parser)

    s = sub.add_parser("simulate", help="generate a labelled series as CSV")
    s.add_argument("--length", type=int, default=10_000)
    s.add_argument("--pi", type=float, default=0.01)
    s.add_argument("--shift", type=float, default=4.0, help="anomaly value (mixture) or atypicity delta (oracle)")
    s.add_argument("--ref", default="gaussian", help="gaussian or studentN")
    s.add_argument("--oracle", action="store_true", help="emit oracle p-values instead of observations")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-labels", action="store_true")
    s.add_argument("--out", "-o", default="-")

    d = sub.add_parser("detect", help="run the detector on a t,value[,label] CSV")
    d.add_argument("input", help="CSV path or - for stdin")
    d.add_argument("--out", "-o", default="-")
    d.add_argument("--config", help="flat key = value file; CLI flags win")
    d.add_argument("--policy", choices=["bh", "mbh", "lord3"])
    d.add_argument("--alpha", type=float)
    d.add_argument("--pi", type=float, help="prior anomaly proportion for mbh")
    d.add_argument("--pvalue", choices=[k.value for k in PValueKind])
    d.add_argument("--calibration", choices=[s.value for s in Strategy])
    d.add_argument("--n", type=int, help="calibration size (default: smallest admissible)")
    d.add_argument("--shift-frac", type=float, help="shift proportion for overlapping-shift calibration")
    d.add_argument("--window", type=int)
    d.add_argument("--windowing", choices=[w.value for w in Windowing])
    d.add_argument("--score", help="identity, zscore, knn:K or kde:H")
    d.add_argument("--ref", help="reference law for oracle p-values, fresh calibration and score training")
    d.add_argument("--train-size", type=int)
    d.add_argument("--warm-start", action="store_true", default=None,
                   help="pre-fill the calibration set from the reference law")
    d.add_argument("--force-n", action="store_true", default=None)
    d.add_argument("--summary", action="store_true", default=None)
    d.add_argument("--seed", type=int)

    e = sub.add_parser("experiment", help="run a named experiment")
    e.add_argument("name")
    e.add_argument("--config")
    e.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="parameter override")
    e.add_argument("--seed", type=int)
    e.add_argument("--jobs", type=int)
    e.add_argument("--replications", type=int)
    e.add_argument("--quick", action="store_true", default=None)
    e.add_argument("--plot", action="store_true", default=None)
    e.add_argument("--out")
    e.add_argument("--check", action="store_true", help="compare against stored targets; exit 2 on failure")

    sub.add_parser("list", help="list experiments")
    c = sub.add_parser("show-config", help="print experiment defaults")
    c.add_argument("name", nargs="?")
    return p


def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w", newline="")


def cmd_simulate(a):
    if a.oracle:
        p, lab = generate_oracle_pvalues(OraclePValueConfig(a.pi, a.shift, a.length, a.seed))
        from .generator import LabeledSeries
        series = LabeledSeries(p, lab)
    else:
        series = generate_mixture(MixtureConfig(a.pi, parse_ref_dist(a.ref), a.shift, a.length, a.seed))
    fh = _open_out(a.out)
    try:
        series.to_csv(fh, include_labels=not a.no_labels)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


DETECT_DEFAULTS = dict(policy="mbh", alpha=0.1, pi=0.01, pvalue="empirical", calibration="sliding", n=None,
                       shift_frac=None, window=100, windowing="overlapping", score="identity", ref="gaussian",
                       train_size=1000, warm_start=False, force_n=False, summary=False, seed=0)
DETECT_TYPES = dict(alpha=float, pi=float, n=int, shift_frac=float, window=int, train_size=int,
                    warm_start=_bool, force_n=_bool, summary=_bool, seed=int)


def _detect_options(a):
    opts = dict(DETECT_DEFAULTS)
    if a.config:
        for k, v in read_config(a.config).items():
            key = k.replace("-", "_")
            if key not in opts:
                raise UsageExit(f"unknown detect option {k!r} in {a.config}")
            try:
                opts[key] = DETECT_TYPES.get(key, str)(v)
            except ValueError as err:
                raise UsageExit(f"{a.config}: {k}: {err}") from None
    for k in DETECT_DEFAULTS:
        v = getattr(a, k, None)
        if v is not None:
            opts[k] = v
    return opts


def build_detector(opts):
    """DetectorConfig and the rng used for any reference draws."""
    rng = make_rng(opts["seed"], 1)
    ref = parse_ref_dist(opts["ref"])
    alpha = opts["alpha"]
    policy = {"bh": lambda: BH(alpha), "mbh": lambda: MBH(alpha, opts["pi"]), "lord3": lambda: LORD3(alpha)}[opts["policy"]]()
    m = opts["window"]
    train = ref.sample(rng, opts["train_size"]) if opts["score"] not in ("identity",) else None
    score = parse_score(opts["score"], train)
    n = opts["n"]
    if n is None:
        level = alpha if isinstance(policy, LORD3) else policy_level(policy, m)
        n = calibration_cardinality(m, level, 1)
    initial = score(ref.sample(rng, n)) if opts["warm_start"] else None
    cal = CalibrationSpec(opts["calibration"], n, initial=initial, shift=opts["shift_frac"])
    config = DetectorConfig(m, opts["windowing"], policy, opts["pvalue"], cal, score,
                            survival=(lambda s: ref.sf(s)) if opts["pvalue"] == "oracle" else None,
                            reference=lambda r, size: ref.sample(r, size), force_n=opts["force_n"])
    return config, rng


def cmd_detect(a):
    opts = _detect_options(a)
    series = read_series_csv(sys.stdin if a.input == "-" else a.input)
    config, rng = build_detector(opts)
    if opts["policy"] == "lord3" and opts["pvalue"] == "conformal":
        print(LOW_POWER_WARNING, file=sys.stderr)
    if opts["pvalue"] == "oracle" and opts["score"] != "identity":
        print("warning: oracle p-values apply the reference survival function to the scores", file=sys.stderr)
    res = run_stream(series, config, rng=rng)
    fh = _open_out(a.out)
    try:
        res.to_csv(fh)
        if opts["summary"] and series.labels is not None:
            c = res.confusion()
            fh.write(f"# summary\n# rejections,{c.rejections}\n# anomalies,{c.anomalies}\n"
                     f"# FDP,{float(fdp(c)):.6f}\n# FNP,{float(fnp(c)):.6f}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_experiment(a):
    name = resolve_name(a.name)
    run = {"seed": 0, "jobs": 1, "quick": False, "plot": False, "out": "results", "replications": None}
    params = {}
    if a.config:
        for k, v in read_config(a.config).items():
            if k in RUN_KEYS:
                try:
                    run[k] = (_bool if RUN_KEYS[k] is bool else RUN_KEYS[k])(v)
                except ValueError as err:
                    raise UsageExit(f"{a.config}: {k}: {err}") from None
            else:
                params[k] = v
    for item in a.set:
        k, eq, v = item.partition("=")
        if not eq:
            raise UsageExit(f"--set expects KEY=VALUE, got {item!r}")
        params[k.strip()] = v.strip()
    for k in RUN_KEYS:
        v = getattr(a, k, None)
        if v is not None:
            run[k] = v
    spec = ExperimentSpec(name, params, seed=run["seed"], replications=run["replications"], output_dir=run["out"],
                          quick=run["quick"], jobs=max(1, run["jobs"]), plot=run["plot"])
    out = run_experiment(spec)
    print(f"{name}: wrote {len(out.results)} result rows and {len(out.summary)} summary rows to {run['out']}/{name}/")
    failed = 0
    for c in out.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        failed += not c.passed
    if a.check:
        if not out.checks:
            print(f"{name} has no stored targets")
        return EXIT_CHECK if failed else EXIT_OK
    return EXIT_OK


def cmd_list(a):
    width = max(map(len, EXPERIMENTS))
    for e in EXPERIMENTS.values():
        print(f"{e.name:<{width}}  {e.anchor}")
    return EXIT_OK


def _fmt_value(v):
    return repr(v) if not isinstance(v, str) else v


def cmd_show_config(a):
    names = [resolve_name(a.name)] if a.name else list(EXPERIMENTS)
    print("[run]")
    print("seed = 0\njobs = 1\nquick = false\nplot = false\nout = results")
    for name in names:
        print(f"\n[{name}]")
        for k, v in EXPERIMENTS[name].defaults.items():
            print(f"{k} = {_fmt_value(v)}")
    print("\n[detect]")
    for k, v in DETECT_DEFAULTS.items():
        print(f"{k} = {'' if v is None else v}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "detect": cmd_detect, "experiment": cmd_experiment,
            "list": cmd_list, "show-config": cmd_show_config}


def main(argv=None):
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if not a.command:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[a.command](a)
    except UsageExit as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except (FdrStreamError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
