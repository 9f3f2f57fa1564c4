"""Command-line entry point: ``monet <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import (ML_FEATURES, ML_TARGET, CountryConfig, MlSettings,
                     SamplerSettings)
from .dataset import COUNTRIES, write_dataset_csv
from .errors import MonetError
from .ml import ModelKind
from .report import PipelineReport, load_json_report, render_report

log = logging.getLogger("monet")

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2
VAR_KEYS = {"m1": "log_m1", "ngdp": "log_ngdp", "prices": "log_ngdp", "gold": "log_gold"}


def _print(obj):
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        return str(o)
    json.dump(obj, sys.stdout, indent=2, default=default)
    sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# shared argument groups

def _data_args(p):
    p.add_argument("--country", required=True, type=str.upper)
    p.add_argument("--data", help="dataset CSV (default: $MONET_DATA_DIR/monet_data.csv)")
    p.add_argument("--synthetic", action="store_true", help="use simulated data")
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--seed", type=int, default=20240101)


def _sampler_args(p):
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--target-accept", type=float, default=0.8)
    p.add_argument("--max-tree-depth", type=int, default=10)


def _cv_args(p):
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--trees", type=int, default=500)


def _config(args, **extra) -> CountryConfig:
    sampler = SamplerSettings(args.chains, args.warmup, args.draws, args.target_accept,
                              args.max_tree_depth) if hasattr(args, "chains") else SamplerSettings()
    ml = (MlSettings(args.folds, args.repeats, args.test_fraction, args.trees)
          if hasattr(args, "folds") else MlSettings())
    return CountryConfig(args.country, start=args.start, end=args.end, data_path=args.data,
                         synthetic=args.synthetic, seed=args.seed, sampler=sampler, ml=ml, **extra)


def _dataset(cfg: CountryConfig):
    from .pipeline import _load
    return _load(cfg)


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(args) -> int:
    cfg = CountryConfig.load(args.config)
    if args.output_dir:
        cfg = CountryConfig.from_dict({**cfg.as_dict(), "output_dir": args.output_dir})
    from .pipeline import run_pipeline
    report = run_pipeline(cfg)
    out = Path(cfg.output_dir)
    for fmt in args.format.split(","):
        sub = out if fmt == "json" else out / fmt
        for p in render_report(report, fmt, sub):
            log.info("wrote %s", p)
    for s in report.stages:
        print(f"{s.name:<11} {s.status}{': ' + s.reason if s.reason else ''}")
    return EXIT_PARTIAL if report.failed else EXIT_OK


def cmd_ingest(args) -> int:
    cfg = _config(args)
    ds = _dataset(cfg)
    if args.out:
        write_dataset_csv([ds], args.out)
    _print({"country": ds.country, "start": str(ds.stamps[0]), "end": str(ds.stamps[-1]),
            "quarters": len(ds), "data_hash": ds.content_hash()})
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .quantity import (QuantityInputs, ScenarioDelta, classify_scenario, predict_m1,
                           total_differential)
    inputs = QuantityInputs(args.lambda_p, args.lambda_gold, args.beta)
    delta = ScenarioDelta(args.d_lambda_p, args.d_lambda_gold)
    verdict = classify_scenario(inputs, delta)
    _print({"level": predict_m1(inputs), "differential": total_differential(inputs, delta),
            "case": verdict.case, "label": verdict.label})
    return EXIT_OK


def cmd_distfit(args) -> int:
    from .distfit import select_distribution
    ds = _dataset(_config(args))
    out, rows = {}, []
    for v in args.variables.split(","):
        key = VAR_KEYS[v.lower()] if args.log else v.lower().replace("prices", "ngdp")
        sel = select_distribution(ds.column(key), method=args.method)
        out[key] = {"fits": [{"family": f.family.value, "param1": f.param1, "param2": f.param2,
                              "log_lik": f.log_lik, "bic": f.bic} for f in sel.fits],
                    "skipped": {k.value: r for k, r in sel.skipped.items()}}
        rows += [{"variable": key, "family": f.family.value, "param1": f.param1,
                  "param2": f.param2, "bic": f.bic, "rank": i + 1} for i, f in enumerate(sel.fits)]
    if args.format == "markdown":
        from .report import markdown_table
        sys.stdout.write(markdown_table("distfit", "fits", rows))
    elif args.format == "csv":
        import csv
        w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    else:
        _print(out)
    return EXIT_OK


def cmd_direction(args) -> int:
    from .regress import compare_directions, seed_for
    cfg = _config(args)
    ds = _dataset(cfg)
    a, b = (s.strip().lower() for s in args.pair.split(","))
    chain = cfg.sampler.chain_config(seed_for(cfg.seed, "direction"))
    ka, kb = VAR_KEYS[a], VAR_KEYS[b]
    from .pipeline import LABEL
    v = compare_directions(ds.column(ka), ds.column(kb), config=chain,
                           y_name=LABEL[ka], x_name=LABEL[kb])
    _print(v.as_dict())
    return EXIT_OK


def cmd_reset(args) -> int:
    import itertools
    from .pipeline import LOG_VARS
    from .regress import reset_bayes_bootstrap, seed_for
    cfg = _config(args)
    ds = _dataset(cfg)
    rows = []
    for (a, la), (b, lb) in itertools.permutations(LOG_VARS, 2):
        r = reset_bayes_bootstrap(ds.column(a), ds.column(b), "all", args.replicates,
                                  seed_for(cfg.seed, "reset", a, b))
        rows.append({"model": f"{la} ~ {lb}", **r.as_dict()})
    _print(rows)
    return EXIT_OK


def cmd_bglm(args) -> int:
    from .regress import fit_bglm, seed_for
    from .regress.terms import GlmSpec
    cfg = _config(args, family=args.family, link=args.link, terms=args.spec)
    ds = _dataset(cfg)
    chain = cfg.sampler.chain_config(seed_for(cfg.seed, "bglm"))
    if args.search:
        from .pipeline import search_bglm
        base = cfg.spec()
        cands = [GlmSpec(f, l, base.response, base.terms)
                 for f in ("gaussian", "gamma") for l in ("identity", "log")]
        _print(search_bglm(ds, cands, chain))
        return EXIT_OK
    fit = fit_bglm(ds, cfg.spec(), config=chain)
    _print({"formula": fit.spec.formula, "family": fit.spec.family, "link": fit.spec.link,
            "coefficients": fit.summary(), "loo": fit.loo.as_dict(),
            "healthy": fit.diagnostics.healthy, "flags": fit.diagnostics.flags()})
    return EXIT_OK


def _ml_data(ds):
    X = np.column_stack([ds.column(f) for f in ML_FEATURES])
    return X, ds.column(ML_TARGET)


def cmd_ml(args) -> int:
    from .ml import default_grid, train_model
    from .regress import seed_for
    cfg = _config(args)
    X, y = _ml_data(_dataset(cfg))
    tm = train_model(args.kind, X, y, default_grid(args.kind, X.shape[1], args.trees),
                     cfg.ml.plan(seed_for(cfg.seed, "ml")))
    _print({"kind": tm.kind.value, "params": tm.params, **tm.report.as_dict()})
    return EXIT_OK


def cmd_ensemble(args) -> int:
    from .ml import default_grid, ensemble_gate, ensemble_report, stack_members, train_model
    from .regress import seed_for
    cfg = _config(args)
    X, y = _ml_data(_dataset(cfg))
    plan = cfg.ml.plan(seed_for(cfg.seed, "ml"))
    members = [train_model(k, X, y, default_grid(k, X.shape[1], args.trees), plan)
               for k in args.members.split(",")]
    ens = stack_members(members, X, y)
    rep = ensemble_report(ens, X, y)
    gate = ensemble_gate(rep, [m.report for m in members])
    _print({"stacking": ens.as_dict(), "ensemble": rep.as_dict(),
            "members": [m.report.as_dict() for m in members], "gate": gate.label})
    return EXIT_OK


def cmd_report(args) -> int:
    report: PipelineReport = load_json_report(args.input)
    for p in render_report(report, args.format, args.out):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="monet", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.add_argument("--format", default="json,markdown,csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ingest", help="load and validate one country's series")
    _data_args(p)
    p.add_argument("--out", help="write the aligned series as CSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("simulate", help="evaluate the quantity model for one scenario")
    p.add_argument("--lambda-p", type=float, required=True, help="nominal GDP level")
    p.add_argument("--lambda-gold", type=float, required=True, help="gold price")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--d-lambda-p", type=float, default=0.0)
    p.add_argument("--d-lambda-gold", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("distfit", help="rank candidate distributions by BIC")
    _data_args(p)
    p.add_argument("--variables", default="m1,ngdp,gold")
    p.add_argument("--method", default="MGE", choices=["MGE", "MLE"])
    p.add_argument("--no-log", dest="log", action="store_false")
    p.add_argument("--format", default="json", choices=["json", "csv", "markdown"])
    p.set_defaults(func=cmd_distfit)

    p = sub.add_parser("direction", help="compare y=f(x) against x=f(y) by ELPD-LOO")
    _data_args(p)
    _sampler_args(p)
    p.add_argument("--pair", default="m1,gold")
    p.set_defaults(func=cmd_direction)

    p = sub.add_parser("reset", help="Bayesian-bootstrap RESET tests for all orientations")
    _data_args(p)
    p.add_argument("--replicates", type=int, default=1000)
    p.set_defaults(func=cmd_reset)

    p = sub.add_parser("bglm", help="fit the Bayesian GLM")
    _data_args(p)
    _sampler_args(p)
    p.add_argument("--spec", help="term list, e.g. 'log(ngdp) + ns(gold, df=5)'")
    p.add_argument("--family", choices=["gaussian", "gamma"])
    p.add_argument("--link", choices=["identity", "log"])
    p.add_argument("--search", action="store_true", help="rank family/link candidates")
    p.set_defaults(func=cmd_bglm)

    p = sub.add_parser("ml", help="train one ML model by repeated CV")
    _data_args(p)
    _cv_args(p)
    p.add_argument("--kind", required=True, type=lambda s: ModelKind.parse(s).value,
                   choices=[k.value for k in ModelKind])
    p.set_defaults(func=cmd_ml)

    p = sub.add_parser("ensemble", help="stack ML members and apply the adoption gate")
    _data_args(p)
    _cv_args(p)
    p.add_argument("--members", default="BRNN,QRF")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("report", help="render a saved JSON report")
    p.add_argument("--input", required=True)
    p.add_argument("--format", default="markdown", choices=["markdown", "csv", "json"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "country", None) and args.country not in COUNTRIES:
        print(f"error: unknown country {args.country!r}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except MonetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
