"""End-to-end analysis of one country, in stage order."""
from __future__ import annotations

import itertools
import logging
from importlib import metadata
from typing import Optional

import numpy as np

from .config import ML_FEATURES, ML_TARGET, CountryConfig
from .dataset import CountryDataset, load_country_dataset, log_view, simulate_country_dataset
from .distfit import select_distribution
from .errors import MonetError
from .evalkit import gvif, point_metrics
from .ml import default_grid, ensemble_gate, ensemble_report, stack_members, train_model
from .regress import compare_directions, fit_bglm, reset_bayes_bootstrap, seed_for
from .regress.direction import CAVEAT
from .regress.terms import GlmSpec
from .report import STAGE_ORDER, PipelineReport, Stage

logger = logging.getLogger(__name__)

LOG_VARS = (("log_m1", "log(M1)"), ("log_ngdp", "log(NGDP)"), ("log_gold", "log(Gold)"))
DIRECTION_PAIRS = (("log_m1", "log_ngdp"), ("log_m1", "log_gold"), ("log_ngdp", "log_gold"))
LABEL = dict(LOG_VARS)


class _StageFailed(Exception):
    pass


def _run_stage(report: PipelineReport, name: str, fn, *deps: Optional[Stage]) -> Stage:
    stage = Stage(name)
    missing = [d.name for d in deps if d is None or d.status != "ok"]
    if missing:
        stage.status = "skipped"
        stage.reason = "depends on failed stage(s): " + ", ".join(missing)
    else:
        try:
            fn(stage)
        except (MonetError, ValueError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
            logger.warning("stage %s failed: %s", name, exc)
            stage.status = "failed"
            stage.reason = f"{type(exc).__name__}: {exc}"
            stage.tables = {}
    report.stages.append(stage)
    return stage


def _load(config: CountryConfig) -> CountryDataset:
    start, end = config.date_range()
    path = config.resolved_data_path()
    if path is None:
        return simulate_country_dataset(config.country, start, end,
                                        seed_for(config.seed, "simulate", config.country))
    return load_country_dataset(path, config.country, (start, end))


def run_pipeline(config: CountryConfig, data: Optional[CountryDataset] = None) -> PipelineReport:
    """Run every stage for ``config``; failures are recorded, dependants skipped."""
    report = PipelineReport(config.country)
    state: dict = {}
    seed = config.seed
    chain = config.sampler

    def load(stage):
        ds = data if data is not None else _load(config)
        if ds.country != config.country:
            raise ValueError(f"dataset is for {ds.country}, config for {config.country}")
        state["data"] = ds
        stage.add("coverage", [{"country": ds.country, "start": str(ds.stamps[0]),
                                "end": str(ds.stamps[-1]), "quarters": len(ds),
                                "source": "synthetic" if config.synthetic and data is None
                                else "file" if data is None else "in-memory"}])

    def logs(stage):
        lv = log_view(state["data"])
        ds = state["data"]
        rows = []
        for key, label in LOG_VARS:
            v = ds.column(key)
            rows.append({"variable": label, "n": len(v), "min": float(v.min()),
                         "max": float(v.max()), "mean": float(v.mean()),
                         "sd": float(v.std(ddof=1))})
        state["logs"] = lv
        stage.add("summary", rows)

    def direction(stage):
        ds = state["data"]
        rows = []
        for a, b in DIRECTION_PAIRS:
            cfg = chain.chain_config(seed_for(seed, "direction"))
            v = compare_directions(ds.column(a), ds.column(b), config=cfg,
                                   y_name=LABEL[a], x_name=LABEL[b])
            fa, fb = v.fits
            rows.append({"pair": f"{LABEL[a]}, {LABEL[b]}", "y": LABEL[a], "x": LABEL[b],
                         "log_fit_ratio": v.log_fit_ratio, "elpd_x_to_y": v.elpd_x_to_y,
                         "elpd_y_to_x": v.elpd_y_to_x, "elpd_diff": v.elpd_diff,
                         "se_diff": v.se_diff, "verdict": v.preferred,
                         "orientation": v.orientation,
                         "healthy_y_on_x": fa.diagnostics.healthy,
                         "healthy_x_on_y": fb.diagnostics.healthy})
        stage.add("verdicts", rows)
        stage.add("notes", [{"note": CAVEAT}])

    def reset(stage):
        ds = state["data"]
        rows = []
        for (a, la), (b, lb) in itertools.permutations(LOG_VARS, 2):
            r = reset_bayes_bootstrap(ds.column(a), ds.column(b), "all", config.reset_replicates,
                                      seed_for(seed, "reset", a, b))
            rows.append({"model": f"{la} ~ {lb}", "squares": r.mean_p_squares,
                         "cubes": r.mean_p_cubes, "both": r.mean_p_both,
                         "replicates": r.replicates})
        stage.add("mean_p", rows)

    def distfit(stage):
        ds = state["data"]
        rows, skipped = [], []
        for key, label in LOG_VARS:
            sel = select_distribution(ds.column(key))
            for rank, f in enumerate(sel.fits, 1):
                rows.append({"variable": label, "family": f.family.value, "param1": f.param1,
                             "param2": f.param2, "log_lik": f.log_lik, "bic": f.bic, "rank": rank})
            for fam, why in sel.skipped.items():
                skipped.append({"variable": label, "family": fam.value, "reason": why})
        stage.add("fits", rows)
        if skipped:
            stage.add("skipped", skipped)

    def bglm(stage):
        spec: GlmSpec = config.spec()
        fit = fit_bglm(state["data"], spec, config=chain.chain_config(seed_for(seed, "bglm")))
        state["fit"] = fit
        stage.add("model", [{"formula": fit.spec.formula, "family": spec.family, "link": spec.link,
                             "healthy": fit.diagnostics.healthy,
                             "divergences": int(fit.diagnostics.divergences),
                             "gradient_check_max_error": fit.gradient_error}])
        stage.add("coefficients", fit.summary())
        for t in fit.spec.terms:
            if t.kind == "weibull":
                stage.add("weibull_transform", [{"term": t.label, "shape": t.shape, "scale": t.scale}])
        flags = fit.diagnostics.flags()
        if flags:
            stage.add("flags", [{"flag": f} for f in flags])

    def metrics(stage):
        fit = state["fit"]
        loo = fit.loo
        pm = point_metrics(fit.y, fit.fitted, family=fit.spec.family)
        k = loo.pareto_k
        perf = [("ELPD-LOO", loo.elpd_loo), ("SE of ELPD-LOO", loo.se_elpd), ("P-LOO", loo.p_loo),
                ("LOO-IC", loo.looic), ("SE-MC of ELPD-LOO", loo.mc_se),
                ("Max Pareto k", float(k.max())), ("Share of k < 0.5", float(np.mean(k < 0.5))),
                ("Observations with k >= 0.7", float(len(loo.flagged))),
                ("MAE", pm.mae), ("MAE % of response minimum", pm.mae_pct_min),
                ("RMSE", pm.rmse), ("RMSE % of response minimum", pm.rmse_pct_min),
                ("Response minimum", float(fit.y.min())), ("Response maximum", float(fit.y.max()))]
        if pm.r2 is not None:
            perf.append(("R2", pm.r2))
        groups = fit.design.groups
        if len(groups) >= 2:
            g = gvif(fit.design.X, groups)
            for name, val in zip(g.terms, g.gvif_corrected):
                perf.append((f"GVIF corrected by df: {name}", float(val)))
            stage.add("gvif", [{"term": t, "gvif": float(v), "df": int(d), "gvif_corrected": float(c)}
                               for t, v, d, c in zip(g.terms, g.gvif, g.df, g.gvif_corrected)])
        stage.add("performance", [{"statistic": s, "value": v} for s, v in perf])
        stage.add("pareto_k", [{"observation": i + 1, "k": float(x)} for i, x in enumerate(k)])
        signs = []
        coef = fit.coef_mean
        for t in fit.spec.terms:
            cols = [c for c in fit.coef_names if c in t.column_names()]
            vals = [coef[c] for c in cols]
            if t.variable in ("log_ngdp", "ngdp", "log_prices", "prices"):
                ok = all(v > 0 for v in vals)
                signs.append({"term": t.label, "expected": "+", "observed": _signs(vals), "pass": ok})
            elif "gold" in t.variable:
                signs.append({"term": t.label, "expected": "+/-", "observed": _signs(vals),
                              "pass": bool(np.all(np.isfinite(vals)))})
        stage.add("sign_check", signs)
        if loo.notes:
            stage.add("loo_notes", [{"note": n} for n in loo.notes])

    def ml(stage):
        ds = state["data"]
        X = np.column_stack([ds.column(f) for f in ML_FEATURES])
        y = ds.column(ML_TARGET)
        plan = config.ml.plan(seed_for(seed, "ml"))
        models, rows, errors = {}, [], []
        for kind in config.ml.kinds:
            grid = config.ml.grids.get(kind) or default_grid(kind, X.shape[1], config.ml.n_trees)
            try:
                tm = train_model(kind, X, y, grid, plan)
            except MonetError as exc:
                errors.append({"kind": kind, "error": f"{type(exc).__name__}: {exc}"})
                continue
            models[kind] = tm
            rows.append(_cv_row(kind, tm.report, params=tm.params))
        if not models:
            raise MonetError("no ML model could be trained")
        state["ml"] = models
        state["Xy"] = (X, y)
        stage.add("cv", rows)
        if errors:
            stage.add("errors", errors)

    def stacking(stage):
        X, y = state["Xy"]
        models = state["ml"]
        coef_rows, dev_rows, cv_rows, errors = [], [], [], []
        state["ensembles"] = {}
        for a, b in itertools.combinations(models, 2):
            pair = f"{a}+{b}"
            try:
                ens = stack_members([models[a], models[b]], X, y)
            except MonetError as exc:
                errors.append({"pair": pair, "error": f"{type(exc).__name__}: {exc}"})
                continue
            rep = ensemble_report(ens, X, y)
            state["ensembles"][pair] = (ens, rep, (a, b))
            coef_rows += [{"pair": pair, **r} for r in ens.coefficient_table()]
            d = ens.as_dict()
            dev_rows.append({"pair": pair, "null_deviance": d["null_deviance"], "df_null": d["df_null"],
                             "residual_deviance": d["residual_deviance"],
                             "df_residual": d["df_residual"], "dispersion": d["dispersion"]})
            cv_rows.append(_cv_row(pair, rep))
        if not state["ensembles"]:
            raise MonetError("no ensemble could be stacked" + (f": {errors[0]['error']}" if errors else ""))
        stage.add("coefficients", coef_rows)
        stage.add("deviance", dev_rows)
        stage.add("cv", cv_rows)
        if errors:
            stage.add("errors", errors)

    def gate(stage):
        rows = []
        models = state["ml"]
        for pair, (ens, rep, members) in state["ensembles"].items():
            dec = ensemble_gate(rep, [models[m].report for m in members])
            rows.append({"pair": pair, "decision": dec.label, "adopt": dec.adopt,
                         "ensemble_test_rmse": rep.test.rmse, "ensemble_test_mae": rep.test.mae})
        stage.add("decisions", rows)

    s_load = _run_stage(report, "load", load)
    s_logs = _run_stage(report, "log_views", logs, s_load)
    _run_stage(report, "direction", direction, s_logs)
    _run_stage(report, "reset", reset, s_logs)
    _run_stage(report, "distfit", distfit, s_logs)
    s_bglm = _run_stage(report, "bglm", bglm, s_logs)
    _run_stage(report, "metrics", metrics, s_bglm)
    s_ml = _run_stage(report, "ml", ml, s_logs)
    s_stack = _run_stage(report, "stacking", stacking, s_ml)
    _run_stage(report, "gate", gate, s_stack)

    prov = Stage("provenance")
    report.provenance = _provenance(config, state.get("data"))
    prov.add("settings", [{"key": k, "value": str(v)} for k, v in report.provenance.items()])
    report.stages.append(prov)
    assert tuple(s.name for s in report.stages) == STAGE_ORDER
    return report


def _signs(vals) -> str:
    return "".join("+" if v > 0 else "-" if v < 0 else "0" for v in vals)


def _cv_row(name, rep, params=None) -> dict:
    row = {"model": name}
    if params is not None:
        row["params"] = ", ".join(f"{k}={v}" for k, v in params.items())
    for part in ("train", "test"):
        m = getattr(rep, part)
        row.update({f"{part}_mae": m.mae, f"{part}_rmse": m.rmse, f"{part}_r2": m.r2,
                    f"{part}_mae_pct_min": m.mae_pct_min, f"{part}_rmse_pct_min": m.rmse_pct_min})
    row["cv_rmse_mean"] = float(np.mean(rep.fold_rmse))
    row["cv_rmse_sd"] = float(np.std(rep.fold_rmse, ddof=1)) if len(rep.fold_rmse) > 1 else 0.0
    row["cv_mae_mean"] = float(np.mean(rep.fold_mae))
    row["folds_evaluated"] = len(rep.fold_rmse)
    return row


def _provenance(config: CountryConfig, data: Optional[CountryDataset]) -> dict:
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    out = {
        "seed": config.seed,
        "data_hash": data.content_hash() if data is not None else None,
        "config_hash": config.config_hash(),
        "package_version": version,
        "stage_order": ",".join(STAGE_ORDER),
        "chains": config.sampler.chains, "warmup": config.sampler.warmup,
        "draws": config.sampler.draws, "target_accept": config.sampler.target_accept,
        "max_tree_depth": config.sampler.max_tree_depth,
        "reset_replicates": config.reset_replicates,
        "cv_folds": config.ml.folds, "cv_repeats": config.ml.repeats,
        "cv_test_fraction": config.ml.test_fraction, "ml_trees": config.ml.n_trees,
        "ml_kinds": ",".join(config.ml.kinds),
        "bglm_formula": config.spec().formula,
        "bglm_family": config.spec().family, "bglm_link": config.spec().link,
    }
    for k, v in config.filled_defaults().items():
        out[f"default.{k}"] = v
    return out


def search_bglm(data, candidates, config) -> list[dict]:
    """Fit each (family, link) candidate and rank by ELPD-LOO, then MAE, then RMSE."""
    rows = []
    for spec in candidates:
        try:
            fit = fit_bglm(data, spec, config=config)
        except MonetError as exc:
            rows.append({"family": spec.family, "link": spec.link, "formula": spec.formula,
                         "error": str(exc)})
            continue
        pm = point_metrics(fit.y, fit.fitted, family=None)
        rows.append({"family": spec.family, "link": spec.link, "formula": spec.formula,
                     "elpd_loo": fit.loo.elpd_loo, "mae": pm.mae, "rmse": pm.rmse,
                     "healthy": fit.diagnostics.healthy})
    ok = sorted((r for r in rows if "error" not in r),
                key=lambda r: (-r["elpd_loo"], r["mae"], r["rmse"]))
    for i, r in enumerate(ok, 1):
        r["rank"] = i
    return ok + [r for r in rows if "error" in r]
