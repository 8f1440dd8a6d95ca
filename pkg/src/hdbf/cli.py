"""Command-line interface: ``hdbf {test,simulate,power,are,bias}``.

Exit codes: 0 success, 1 internal error, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .core import read_csv
from .exceptions import HDBFError, InputError
from .power import (
    DesignSpec,
    PopulationSpec,
    are,
    drift_hu,
    drift_proposed,
    power_hu,
    power_proposed,
    solve_are_roots,
)
from .presets import bias_preset, preset
from .sim import SimConfig, estimator_bias_study, load_config, run_monte_carlo
from .stats import ALL_METHODS, TestMethod, evaluate_methods, statistic_T, statistic_TCH

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2


def _methods(choice: str):
    if choice == "all":
        return ALL_METHODS
    return (TestMethod(choice),)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit(records: list[dict], fmt: str, output=None, footer: list[str] | None = None, extra: dict | None = None):
    """Write ``records`` as CSV (header + rows, optional ``#`` footer) or JSON."""
    buf = io.StringIO()
    if fmt == "json":
        payload = {"records": records}
        if extra:
            payload.update(extra)
        json.dump(_clean(payload), buf, indent=2, default=_json_default, allow_nan=False)
        buf.write("\n")
    else:
        if records:
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(list(records[0]))
            for r in records:
                w.writerow([_fmt(v) for v in r.values()])
        for line in footer or []:
            buf.write(f"# {line}\n")
    text = buf.getvalue()
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(output, "w", newline="") as fh:
            fh.write(text)


def _clean(v):
    # strict JSON has no NaN; failed or undefined quantities become null
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (float, np.floating)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, str) and v == "":
        return None
    return v


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, TestMethod):
        return o.value
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_test(args) -> int:
    if not args.input:
        raise InputError("test needs --input CSV")
    data = read_csv(args.input)
    results = evaluate_methods(data, _methods(args.method), args.alpha)
    records, failed = [], []
    for m, r in results.items():
        if isinstance(r, Exception):
            # the raw statistic is still well defined; only its standardization failed
            stat = statistic_TCH(data) if m is TestMethod.THHAT else statistic_T(data)
            nan = float("nan")
            records.append({"method": m.value, "statistic": stat, "sigma": nan, "z": nan,
                            "p_value": nan, "reject": ""})
            failed.append((m, r))
            continue
        d = r.as_dict()
        records.append({k: d[k] for k in ("method", "statistic", "sigma", "z", "p_value", "reject")})
    emit(records, args.format, args.output,
         extra={"alpha": args.alpha, "k": data.k, "p": data.p, "sizes": data.sizes.tolist()})
    for m, exc in failed:
        print(f"hdbf: error: {m.value}: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_INPUT if failed else EXIT_OK


def _campaigns(args):
    if args.preset:
        return preset(args.preset, replications=args.reps or 5000, seed=args.seed or 0, alpha=args.alpha or 0.05)
    if not args.config:
        raise InputError("simulate needs --config FILE or --preset KEY")
    cfg = load_config(args.config)
    overrides = {}
    if args.reps is not None:
        overrides["replications"] = args.reps
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if args.method != "all":
        overrides["methods"] = _methods(args.method)
    if overrides:
        cfg = SimConfig(**{**{f: getattr(cfg, f) for f in ("model", "replications", "seed", "alpha", "methods")}, **overrides})
    from .presets import Campaign

    return [Campaign(str(args.config), cfg, None)]


def cmd_simulate(args) -> int:
    records, details = [], []
    for camp in _campaigns(args):
        res = run_monte_carlo(camp.config, threads=args.threads)
        records.extend(res.rows())
        info = {
            "label": camp.label,
            "config_digest": res.config_digest,
            "model": camp.config.model.name,
            **{k: v for k, v in asdict(camp.config.model).items() if k != "rho"},
            "replications": res.replications,
            "seed": res.seed,
            "alpha": camp.config.alpha,
            "rates": {m.value: r.rate for m, r in res.rates.items()},
            "se": {m.value: r.se for m, r in res.rates.items()},
            "failures": {m.value: r.failures for m, r in res.rates.items()},
        }
        if camp.reference is not None:
            info["published"] = dict(zip([m.value for m in ALL_METHODS], camp.reference))
        details.append(info)
    emit(records, args.format, args.output, extra={"campaigns": details})
    return EXIT_OK


def _load_population(path):
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if "means" not in spec:
        raise InputError(f"{path}: 'means' is required")
    if "sizes" in spec:
        sizes = np.asarray(spec["sizes"], dtype=float)
        design, n = DesignSpec.from_sizes(sizes), float(sizes.sum())
    elif "lambdas" in spec and "n" in spec:
        design, n = DesignSpec(spec["lambdas"]), float(spec["n"])
    else:
        raise InputError(f"{path}: give 'sizes', or 'lambdas' together with 'n'")
    means = spec["means"]
    if "covariances" in spec:
        pop = PopulationSpec.from_covariances(means, [np.asarray(c) for c in spec["covariances"]], n)
    elif "traces" in spec:
        pop = PopulationSpec(means, spec["traces"], n)
    elif "tr_sigma2" in spec:
        pop = PopulationSpec.homogeneous(means, spec["tr_sigma2"], n)
    else:
        raise InputError(f"{path}: give one of 'covariances', 'traces' or 'tr_sigma2'")
    return design, pop


def cmd_power(args) -> int:
    if not args.input:
        raise InputError("power needs --input SPEC.json")
    design, pop = _load_population(args.input)
    alpha = args.alpha or 0.05
    rec = {
        "alpha": alpha,
        "power_proposed": power_proposed(design, pop, alpha),
        "power_hu": power_hu(design, pop, alpha),
        "drift_proposed": drift_proposed(design, pop),
        "drift_hu": drift_hu(design, pop),
    }
    if pop.is_homogeneous and rec["drift_hu"] > 0:
        rec["are"] = are(design, pop)
    emit([rec], args.format, args.output)
    return EXIT_OK


def cmd_are(args) -> int:
    if args.tau is None or args.tau == 0:
        raise InputError("are needs a nonzero --tau")
    curve = solve_are_roots(args.tau, num=args.num, lo=args.lo, hi=args.hi)
    records = [{"lambda3": float(x), "are": float(y)} for x, y in zip(curve.lambda3, curve.are)]
    emit(records, args.format, args.output,
         footer=[f"root,{r!r}" for r in curve.roots],
         extra={"tau": curve.tau, "roots": list(curve.roots)})
    return EXIT_OK


def cmd_bias(args) -> int:
    published = None
    if args.preset:
        bp = bias_preset(args.preset)
        p, n1 = bp.p, bp.n1
        published = bp
    else:
        if args.p is None or args.n1 is None:
            raise InputError("bias needs --p and --n1, or --preset table7:pP,nN")
        p, n1 = args.p, args.n1
    denom = args.denominator or ("published" if published else "exact")
    if denom == "exact":
        ref = None
    elif denom == "published":
        if published is None:
            raise InputError("--denominator published is only available with a table7 preset")
        ref = published.published_trace
    else:
        try:
            ref = float(denom)
        except ValueError:
            raise InputError(f"--denominator must be exact, published or a number, got {denom!r}") from None
    res = estimator_bias_study(p, n1, args.reps or 5000, seed=args.seed or 0,
                               innovation=args.innovation, denominator=ref)
    extra = {}
    if published is not None:
        extra["published"] = dict(zip(("split_mean", "split_sd", "bs_mean", "bs_sd"), published.reference))
    emit([asdict(res)], args.format, args.output, extra=extra)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", "-i", help="input file (CSV data for 'test', JSON spec for 'power')")
    common.add_argument("--output", "-o", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--alpha", type=float, default=None, help="nominal level (default 0.05)")
    common.add_argument("--method", choices=("t1", "t2", "th", "all"), default="all")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--reps", type=int, default=None, help="Monte Carlo replications")
    common.add_argument("--preset", help="named table configuration, e.g. table1:p400,n100")

    parser = argparse.ArgumentParser(prog="hdbf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", parents=[common], help="run the k-sample tests on a CSV file")
    p.add_argument("csv", nargs="?", help="same as --input")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo size/power campaign")
    p.add_argument("--config", "-c", help="campaign config file")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $HDBF_THREADS)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("power", parents=[common], help="asymptotic power of both tests")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("are", parents=[common], help="ARE curve and its roots for a given tau")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--num", type=int, default=2000, help="grid points")
    p.add_argument("--lo", type=float, default=1e-4)
    p.add_argument("--hi", type=float, default=1 - 1e-4)
    p.set_defaults(func=cmd_are)

    p = sub.add_parser("bias", parents=[common], help="trace-estimator bias study")
    p.add_argument("--p", type=int)
    p.add_argument("--n1", type=int)
    p.add_argument("--innovation", choices=("chisq4", "normal"), default="chisq4")
    p.add_argument("--denominator", help="exact | published | NUMBER (default: published for presets, else exact)")
    p.set_defaults(func=cmd_bias)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "csv", None) and not args.input:
        args.input = args.csv
    if args.alpha is not None and not 0 < args.alpha < 1:
        print("hdbf: error: --alpha must lie in (0, 1)", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "test" and args.alpha is None:
        args.alpha = 0.05
    try:
        return args.func(args)
    except (HDBFError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"hdbf: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"hdbf: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"hdbf: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
