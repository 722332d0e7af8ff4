"""Command line entry point.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure
(outputs written so far are kept).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import choo_siow, max_score, policy, reporting, spectral
from .affinity import estimate_affinity, estimate_with_errors
from .entropic import synthetic_market
from .errors import AssortMatchError, NotConverged, NumericalError, ValidationError
from .market_data import (
    AttributeSchema,
    OccupationTable,
    correlation_matrix,
    flexibility_index,
    joint_proportion,
    likelihood_ratio,
    load_couples,
    standardize,
    summary_statistics,
)

log = logging.getLogger("assortmatch")

OUT_ENV = "ASSORTMATCH_OUT"
FORMAT_VERSION = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_int(name):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise ValidationError(f"--{name}: expected an integer, got {text!r}") from None
        if v < 1:
            raise ValidationError(f"--{name}: must be at least 1, got {v}")
        return v

    return parse


def _positive_float(name):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise ValidationError(f"--{name}: expected a number, got {text!r}") from None
        if not v > 0:
            raise ValidationError(f"--{name}: must be positive, got {v}")
        return v

    return parse


def build_parser():
    p = _Parser(prog="assortmatch", description="Marriage-market sorting estimators")
    p.add_argument("--verbose", "-v", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, input_required=True, nargs=None):
        sp.add_argument("--input", required=input_required, nargs=nargs)
        sp.add_argument("--out", default=".")
        sp.add_argument("--config", default=None, help="YAML/JSON file; its values supersede flags")
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("simulate", help="draw couples from a known affinity matrix")
    common(s, input_required=False)
    s.add_argument("--truth", required=True, help="matrix CSV with attribute labels")
    s.add_argument("--n", type=_positive_int("n"), default=5000)
    s.add_argument("--sigma", type=_positive_float("sigma"), default=1.0)
    s.add_argument("--types", type=_positive_int("types"), default=200)
    s.add_argument("--stage", default=None, help="stage label written on every row")

    s = sub.add_parser("estimate", help="estimate the affinity matrix with bootstrap errors")
    common(s)
    s.add_argument("--schema", required=True)
    s.add_argument("--tol", type=_positive_float("tol"), default=1e-6)
    s.add_argument("--bootstrap-reps", type=int, default=2000)
    s.add_argument("--year", default=None)
    s.add_argument("--stage", default=None)

    s = sub.add_parser("saliency", help="SVD of an affinity matrix, optionally with a rank test")
    common(s)
    s.add_argument("--convention", choices=("positive", "table6"), default="positive")
    s.add_argument("--couples", default=None)
    s.add_argument("--schema", default=None)
    s.add_argument("--rank", type=int, default=None)
    s.add_argument("--bootstrap-reps", type=int, default=200)
    s.add_argument("--level", type=float, default=0.05)

    s = sub.add_parser("trend", help="normalize per-period matrices to unit Frobenius norm")
    common(s, nargs="+")
    s.add_argument("--labels", nargs="+", default=None)

    s = sub.add_parser("choo-siow", help="discrete surplus from matched and unmatched counts")
    common(s)
    s.add_argument("--schema", required=True)
    s.add_argument("--attr", required=True)
    s.add_argument("--bins", required=True, type=_floats)
    s.add_argument("--female-bins", type=_floats, default=None)
    s.add_argument("--unmatched-male", default=None)
    s.add_argument("--unmatched-female", default=None)
    s.add_argument("--floor", type=_positive_float("floor"), default=choo_siow.DEFAULT_FLOOR)

    s = sub.add_parser("maxscore", help="matching maximum score by stage")
    common(s)
    s.add_argument("--schema", required=True)
    s.add_argument("--stage", default=None)
    s.add_argument("--spec", choices=("diagonal", "full"), default="diagonal")
    s.add_argument("--inequalities", type=_positive_int("inequalities"), required=True)
    s.add_argument("--runs", type=_positive_int("runs"), default=100)
    s.add_argument("--population", type=_positive_int("population"), default=1000)
    s.add_argument("--iterations", type=_positive_int("iterations"), default=300)
    s.add_argument("--pin", action="append", default=None, help="name=value; defaults to the first attribute = 1")
    s.add_argument("--domain", type=_floats, default=list(max_score.DEFAULT_DOMAIN))

    s = sub.add_parser("policy", help="fertility policy effects under preference mixtures")
    common(s)

    s = sub.add_parser("describe", help="descriptive statistics of a couples file")
    common(s)
    s.add_argument("--schema", required=True)
    s.add_argument("--attr", default=None)
    s.add_argument("--bins", type=_floats, default=None)
    s.add_argument("--occupations", default=None)
    s.add_argument("--signs", type=_floats, default=None)
    return p


def _apply_config(args, parser):
    if not args.config:
        return args
    data = yaml.safe_load(Path(args.config).read_text()) or {}
    if not isinstance(data, dict):
        raise ValidationError("config file must hold a mapping")
    data.pop("version", None)
    allowed = set(vars(args)) - {"command", "config", "verbose"}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest not in allowed:
            raise ValidationError(f"unknown config key {key!r} for command {args.command!r}")
        current = getattr(args, dest)
        default = parser_defaults(args.command).get(dest)
        if current != default and current != value:
            log.warning("config value for %r supersedes the command-line flag", key)
        setattr(args, dest, value)
    return args


_DEFAULTS: dict[str, dict] = {}


def parser_defaults(command):
    if not _DEFAULTS:
        p = build_parser()
        for name, sp in p._subparsers._group_actions[0].choices.items():
            _DEFAULTS[name] = {a.dest: a.default for a in sp._actions}
    return _DEFAULTS[command]


def _out_dir(args) -> Path:
    out = Path(os.environ.get(OUT_ENV) or args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args, stage=None, year=None):
    schema = AttributeSchema.from_file(args.schema)
    sample = load_couples(args.input, schema)
    if sample.dropped:
        log.info("dropped %d incomplete rows", sample.dropped)
    if year is not None:
        sample = sample.for_year(year)
    if stage is not None:
        sample = sample.for_stage(stage)
    return schema, sample


def cmd_simulate(args):
    A, names, cols = reporting.read_matrix_csv(args.truth)
    if A.shape[0] != A.shape[1] or names != cols:
        raise ValidationError("truth matrix must be square with matching row and column labels")
    market = synthetic_market(A, args.n, sigma=args.sigma, n_types=args.types, seed=args.seed, names=tuple(names))
    sample = market.sample
    if args.stage:
        from dataclasses import replace

        sample = replace(sample, stage=np.array([args.stage] * sample.n))
    out = _out_dir(args)
    sample.write_csv(out / "couples.csv")
    AttributeSchema.continuous(names).write(out / "schema.json")
    reporting.write_matrix_csv(out / "truth.csv", A, names)
    meta = {
        "format_version": FORMAT_VERSION,
        "n": args.n,
        "sigma": args.sigma,
        "types": args.types,
        "seed": args.seed,
        "names": names,
        "truth": A,
        "equilibrium_iterations": market.matching.iterations,
        "marginal_error": market.matching.marginal_error,
    }
    (out / "simulate.json").write_text(reporting.dumps(meta))
    return 0


def cmd_estimate(args):
    if args.bootstrap_reps != 0 and args.bootstrap_reps < 2:
        raise ValidationError("--bootstrap-reps must be 0 or at least 2")
    _, sample = _load(args, stage=args.stage, year=args.year)
    sample, moments = standardize(sample)
    if args.bootstrap_reps:
        est = estimate_with_errors(sample, reps=args.bootstrap_reps, seed=args.seed, outer_tol=args.tol)
    else:
        est = estimate_affinity(sample, outer_tol=args.tol)
    out = _out_dir(args)
    reporting.emit_report(est, "table5", out / "affinity")
    reporting.write_matrix_csv(out / "B.csv", est.B, est.names)
    if not est.converged:
        raise NotConverged(f"affinity estimation did not converge (residual {np.max(np.abs(est.moment_residuals)):.3e})")
    return 0


def cmd_saliency(args):
    B, names, cols = reporting.read_matrix_csv(args.input)
    dec = spectral.saliency(B, convention=args.convention)
    out = _out_dir(args)
    reporting.emit_report(dec, "table6", out / "saliency", names=names)
    if args.rank is not None:
        if not (args.couples and args.schema):
            raise ValidationError("--rank needs --couples and --schema")
        schema = AttributeSchema.from_file(args.schema)
        sample, _ = standardize(load_couples(args.couples, schema))
        res = spectral.rank_test(sample, args.rank, reps=args.bootstrap_reps, level=args.level, seed=args.seed)
        summary = {
            "k": res.k,
            "method": res.method,
            "reject": res.reject,
            "level": res.level,
            "statistic": res.statistic,
            "critical": res.critical,
            "pvalue": res.pvalue,
            "df": res.df,
            "lambda_draws": res.lambda_draws,
            "failures": res.estimate.bootstrap_failures,
        }
        (out / "rank_test.json").write_text(reporting.dumps(summary))
    return 0


def cmd_trend(args):
    mats, names = [], []
    for path in args.input:
        M, rn, _ = reporting.read_matrix_csv(path)
        mats.append(M)
        names.append(rn)
    labels = args.labels or [Path(p).stem for p in args.input]
    series = spectral.normalize_series(mats, labels, names)
    reporting.emit_report(series, "table7", _out_dir(args) / "trend")
    return 0


def _read_singles(path, schema, attr):
    import csv

    if path is None:
        return None
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or attr not in reader.fieldnames:
            from .errors import MissingColumn

            raise MissingColumn(attr)
        vals = [schema.encode(attr, row[attr] or "", r) for r, row in enumerate(reader, start=1)]
    return np.array([v for v in vals if v is not None])


def cmd_choo_siow(args):
    schema, sample = _load(args)
    if args.attr not in schema.names:
        raise ValidationError(f"attribute {args.attr!r} is not in the schema")
    um = _read_singles(args.unmatched_male, schema, args.attr)
    uf = _read_singles(args.unmatched_female, schema, args.attr)
    table = choo_siow.tabulate(sample, um, uf, args.attr, args.bins, args.female_bins)
    surface = choo_siow.surplus_surface(table, args.floor)
    reporting.emit_report(surface, "heatmap", _out_dir(args) / f"choo_siow_{args.attr}")
    return 0


def _pins(args, names):
    if not args.pin:
        return None
    pins = {}
    for item in args.pin:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValidationError(f"--pin expects name=value, got {item!r}")
        try:
            pins[key.strip()] = float(val)
        except ValueError:
            raise ValidationError(f"--pin {item!r}: value is not a number") from None
    return pins


def cmd_maxscore(args):
    if len(args.domain) != 2:
        raise ValidationError("--domain expects lo,hi")
    schema, sample = _load(args)
    sample, _ = standardize(sample)
    kind = "diagonal" if args.spec == "diagonal" else "full_interaction"
    spec = max_score.ScoreSpec.with_pins(kind, schema.names, _pins(args, schema.names), tuple(args.domain))
    if args.stage is not None:
        stages = [args.stage]
    elif sample.stage is not None:
        from .market_data import STAGES

        present = set(sample.stage.tolist())
        stages = [s for s in STAGES if s in present]
    else:
        stages = [None]
    fits = {}
    for st in stages:
        part = sample if st is None else sample.for_stage(st)
        ineq = max_score.generate_inequalities(part, args.inequalities, seed=args.seed, stage=st)
        fits[st or "All"] = max_score.fit_max_score(
            ineq, spec, runs=args.runs, population=args.population, iterations=args.iterations, seed=args.seed
        )
    reporting.emit_report(fits, "table9", _out_dir(args) / "maxscore")
    return 0


def _scenario_mixture(entry):
    if "deltas" in entry:
        return policy.PreferenceMixture(tuple(entry["deltas"]), tuple(entry["probs"]))
    return policy.PreferenceMixture.two_type(entry["delta_L"], entry["delta_H"], entry["p_H"])


def cmd_policy(args):
    data = yaml.safe_load(Path(args.input).read_text())
    if not isinstance(data, dict) or "base" not in data or "mixtures" not in data:
        raise ValidationError("scenario file needs 'base' and 'mixtures'")
    unknown = set(data) - {"base", "mixtures", "version"}
    if unknown:
        raise ValidationError(f"unknown scenario keys: {sorted(unknown)}")
    base_cfg = dict(data["base"])
    base_cfg.setdefault("delta", 0.0)
    try:
        base = policy.HouseholdParams(**base_cfg)
    except TypeError as exc:
        raise ValidationError(f"bad 'base' block: {exc}") from None
    rows = {}
    for k, entry in enumerate(data["mixtures"]):
        try:
            mix = _scenario_mixture(entry)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"mixture {k}: missing or bad field {exc}") from None
        label = entry.get("label") or ("/".join(f"{d:g}" for d in mix.deltas) + " @ " + "/".join(f"{p:g}" for p in mix.probs))
        rows[label] = policy.mixture_effects(mix, base)
    reporting.emit_report(rows, "policy", _out_dir(args) / "policy")
    return 0


def cmd_describe(args):
    _, sample = _load(args)
    result = {
        "n": sample.n,
        "dropped": sample.dropped,
        "summary": summary_statistics(sample),
        "correlation_male": correlation_matrix(sample, "male"),
        "correlation_female": correlation_matrix(sample, "female"),
        "names": sample.names,
    }
    lines = [f"Couples: {sample.n} (dropped {sample.dropped})", ""]
    for gender in ("female", "male"):
        rows = [
            [nm, str(st["N"]), reporting.fmt(st["mean"]), reporting.fmt(st["median"]), reporting.fmt(st["sd"]),
             reporting.fmt(st["min"]), reporting.fmt(st["max"])]
            for nm, st in result["summary"][gender].items()
        ]
        lines.append(f"{gender}")
        lines.append(reporting._grid(rows, ["", "N", "mean", "median", "sd", "min", "max"]))
        C = result[f"correlation_{gender}"]
        lines.append(f"{gender} correlations")
        lines.append(reporting._grid([[nm, *map(reporting.fmt, C[i])] for i, nm in enumerate(sample.names)], ["", *sample.names]))
    if args.attr is not None:
        if args.bins is None:
            raise ValidationError("--attr needs --bins")
        P = joint_proportion(sample, args.attr, args.bins)
        result["joint_proportion"] = P
        result["likelihood_ratio"] = likelihood_ratio(P)
    if args.occupations is not None:
        result["flexibility_index"] = _flexibility(args)
    out = _out_dir(args)
    (out / "describe.txt").write_text("\n".join(lines))
    (out / "describe.json").write_text(reporting.dumps(result))
    return 0


def _flexibility(args):
    import csv

    with open(args.occupations, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "occupation" not in rows[0] or "category" not in rows[0]:
        raise ValidationError("occupation file needs 'occupation' and 'category' columns")
    chars = [c for c in rows[0] if c not in ("occupation", "category")]
    signs = args.signs or [1.0] * len(chars)
    table = OccupationTable(
        tuple(r["occupation"] for r in rows),
        np.array([[float(r[c]) for c in chars] for r in rows]),
        {r["occupation"]: r["category"] for r in rows},
        np.array(signs),
        tuple(chars),
    )
    return flexibility_index(table)


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "saliency": cmd_saliency,
    "trend": cmd_trend,
    "choo-siow": cmd_choo_siow,
    "maxscore": cmd_maxscore,
    "policy": cmd_policy,
    "describe": cmd_describe,
}


def run(argv=None) -> int:
    """Parse ``argv`` and execute one command; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
        args = _apply_config(args, parser)
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, IsADirectoryError, PermissionError, yaml.YAMLError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except AssortMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if not isinstance(exc, OSError) else 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
