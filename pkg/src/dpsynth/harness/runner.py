"""Pipeline stages: synthesize bundles, evaluate them, write reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..data import (
    Dataset,
    Schema,
    association_matrix,
    concat,
    discretize,
    group_variables,
    load_dataset,
    load_schema,
    read_text,
)
from ..metrics import (
    UndefinedMetric,
    correlation_metrics,
    make_result,
    marginal_means,
    nist_classification,
    nist_clustering,
    nist_regression,
    null_pmse_bootstrap,
    null_pmse_parametric,
    pmse,
    propensity_scores,
    rescale,
    specks,
)
from ..metrics.results import BASE_METRICS, axis_order, metric_info, regression_metrics
from ..models import cv_select_cp
from ..privacy import BudgetAccountant, PrivacyParams, SeededRng
from ..synth import ALGORITHMS, SynthesisConfig, read_manifest, read_replicates, synthesize, write_bundle
from ..synth.marginals import GroupingPlan
from .config import RunConfig

log = logging.getLogger(__name__)

EXIT_OK, EXIT_DEGRADED, EXIT_FAILED = 0, 1, 2
NOT_APPLICABLE = "not applicable"

# why a value is missing: the schema rules the metric out, the synthetic data
# does not support it, or computing it failed (only the last is degradation)
NA, UNDEFINED, FAILED = "n/a", "undefined", "failed"

# top-level stream tags under the master seed
_S_SYNTH, _S_CP, _S_NULL, _S_METRICS = 1, 2, 3, 4


class HarnessError(RuntimeError):
    pass


@dataclass
class Context:
    cfg: RunConfig
    schema: Schema
    original: Dataset
    public: Dataset
    plan: GroupingPlan
    warnings: list[str] = field(default_factory=list)


def ensure_writable(directory: Path) -> None:
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=directory, prefix=".probe-"):
            pass
    except OSError as exc:
        raise HarnessError(f"output directory {directory} is not writable: {exc}") from None


def load_context(cfg: RunConfig, unsafe_public_fallback: bool = False) -> Context:
    schema = load_schema(read_text(cfg.codebook))
    original = load_dataset(schema, read_text(cfg.original), cfg.load_policy)
    notes = []
    if original.clamp_count:
        notes.append(f"clamped {original.clamp_count} out-of-range values in the original")
    if cfg.public is not None:
        public = load_dataset(schema, read_text(cfg.public), cfg.load_policy)
    elif unsafe_public_fallback:
        msg = ("UNSAFE: no public data configured; grouping uses the original data, "
               "which leaks information outside the privacy budget")
        log.warning(msg)
        notes.append(msg)
        public = original
    else:
        raise HarnessError(
            "no public data configured; set [data] public or pass --unsafe-public-fallback "
            "to group on the original (this leaks)"
        )
    plan = group_variables(
        association_matrix(discretize(public)),
        threshold=cfg.group_threshold,
        max_group_size=cfg.max_group_size,
        max_cells=cfg.max_cells,
    )
    return Context(cfg, schema, original, public, plan, notes)


def eps_label(eps: float) -> str:
    return f"eps_{eps:g}"


def bundle_dir(cfg: RunConfig, algorithm: str, eps: float) -> Path:
    return cfg.out / "synth" / algorithm / eps_label(eps)


def _stream(algorithm: str, eps: float) -> tuple[int, int]:
    # keyed by value, not grid position, so editing the grid leaves other cells alone
    return ALGORITHMS.index(algorithm), int(round(eps * 1e6))


# -- synth ---------------------------------------------------------------------


def _synth_job(ctx: Context, algorithm: str, eps: float) -> tuple[str, float, str]:
    cfg = ctx.cfg
    params = PrivacyParams(eps, cfg.delta if algorithm == "dpsyn" else 0.0)
    scfg = SynthesisConfig(
        algorithm, params, replicates=cfg.replicates, synthetic_rows=cfg.synthetic_rows,
        threshold=cfg.threshold, master_seed=cfg.seed,
    )
    rng = SeededRng(cfg.seed, (_S_SYNTH, *_stream(algorithm, eps)))
    bundle = synthesize(discretize(ctx.original), ctx.plan, scfg, BudgetAccountant(params), rng)
    extra = {
        "config_hash": cfg.config_hash,
        "epsilon_total": eps,
        "delta_total": params.delta,
        "groups": [list(g) for g in ctx.plan.groups],
    }
    path = write_bundle(bundle, bundle_dir(cfg, algorithm, eps), extra)
    return algorithm, eps, str(path.parent)


def cmd_synth(ctx: Context, resume: bool = False, jobs: int = 1) -> list[Path]:
    """Write one bundle per (algorithm, ε). With ``resume``, bundles whose
    manifest carries this config's hash are kept; a foreign hash is refused."""
    cfg = ctx.cfg
    ensure_writable(cfg.out)
    todo, done = [], []
    for alg in cfg.algorithms:
        for eps in cfg.epsilons:
            d = bundle_dir(cfg, alg, eps)
            if resume and (d / "manifest.json").exists():
                found = read_manifest(d).get("config_hash")
                if found != cfg.config_hash:
                    raise HarnessError(
                        f"{d} was produced by a different configuration (hash {str(found)[:12]}, "
                        f"this run {cfg.config_hash[:12]}); remove it or choose another --out"
                    )
                log.info("reusing %s", d)
                done.append(d)
                continue
            todo.append((alg, eps))
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_synth_job, ctx, a, e) for a, e in todo]
            written = [f.result() for f in futures]
    else:
        written = [_synth_job(ctx, a, e) for a, e in todo]
    done.extend(Path(p) for _, _, p in written)
    order = {bundle_dir(cfg, a, e): i for i, (a, e) in enumerate(
        (a, e) for a in cfg.algorithms for e in cfg.epsilons)}
    return sorted(done, key=lambda p: order.get(p, len(order)))


# -- evaluate ------------------------------------------------------------------


def metric_names(cfg: RunConfig, schema: Schema) -> list[str]:
    names = [n for n in BASE_METRICS if n != "nist_regression" or cfg.nist_columns]
    for spec in cfg.regressions:
        names += [m.name for m in regression_metrics(spec.name)]
    return [n for n in names if cfg.wants(n)]


@dataclass
class Shared:
    cp: float | None
    null_cart: float | None
    notes: dict


def shared_quantities(ctx: Context, first_synthetic: Dataset) -> Shared:
    """CART cp from cross-validation on the first (original, replicate) pair,
    and the bootstrap null for the CART pMSE-ratio, both reused everywhere."""
    cfg = ctx.cfg
    wants_cart = any(cfg.wants(n) for n in ("pmse_ratio_cart", "specks_cart"))
    if not wants_cart:
        return Shared(None, None, {})
    stacked = concat([ctx.original, first_synthetic])
    labels = np.r_[np.zeros(ctx.original.n), np.ones(first_synthetic.n)]
    cp = cv_select_cp(
        stacked.values, labels, cfg.cp_grid, folds=cfg.cv_folds,
        rng=SeededRng(cfg.seed, (_S_CP,)), min_leaf=cfg.min_leaf,
        categorical=ctx.schema.categorical_mask(),
    )
    null = None
    notes = {}
    if cfg.wants("pmse_ratio_cart"):
        try:
            null = null_pmse_bootstrap(
                ctx.original, "cart", reps=cfg.bootstrap_reps,
                rng=SeededRng(cfg.seed, (_S_NULL,)), cp=cp, min_leaf=cfg.min_leaf,
            )
        except ValueError as exc:
            notes["null_pmse_cart"] = str(exc)
    return Shared(cp, null, notes)


def replicate_metrics(ctx: Context, synth: Dataset, shared: Shared, rng: SeededRng) -> dict:
    """``name -> (value, None, None)`` or ``(None, reason, kind)`` for one replicate."""
    cfg, orig = ctx.cfg, ctx.original
    wanted = set(metric_names(cfg, ctx.schema))
    out: dict[str, tuple] = {}

    def run(names, fn):
        names = [n for n in names if n in wanted]
        if not names:
            return
        try:
            vals = fn()
        except UndefinedMetric as exc:
            for n in names:
                out[n] = (None, str(exc), UNDEFINED)
            return
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            for n in names:
                out[n] = (None, f"{type(exc).__name__}: {exc}", FAILED)
            return
        for n in names:
            v = vals[n]
            out[n] = v if isinstance(v, tuple) else (float(v), None, None)

    def marginals():
        chi, ks = marginal_means(orig, synth)
        return {
            "chisq_pvalue_mean": (chi, None, None) if chi is not None else (None, f"{NOT_APPLICABLE}: no categorical columns", NA),
            "ks_pvalue_mean": (ks, None, None) if ks is not None else (None, f"{NOT_APPLICABLE}: no continuous columns", NA),
        }

    def propensity(classifier):
        run_ = propensity_scores(orig, synth, classifier, cp=shared.cp, min_leaf=cfg.min_leaf)
        observed = pmse(run_.scores, run_.c)
        if classifier == "glm":
            null = null_pmse_parametric(run_.k, run_.c, run_.N)
        else:
            null = shared.null_cart
        if null is None:
            ratio = (None, "null pMSE unavailable", FAILED)
        elif null <= 0:
            # root-only trees at the shared cp: the ratio is 0/0, not a failure
            ratio = (None, "null pMSE is 0 at the selected cp", UNDEFINED)
        else:
            ratio = observed / null
        return {f"pmse_ratio_{classifier}": ratio, f"specks_{classifier}": specks(run_)}

    ob, sb = discretize(orig), discretize(synth)
    run(["chisq_pvalue_mean", "ks_pvalue_mean"], marginals)
    run(["nist_classification"], lambda: {"nist_classification": nist_classification(
        ob, sb, reps=cfg.nist_classification_reps, rng=rng.child(0))})
    run(["pmse_ratio_glm", "specks_glm"], lambda: propensity("glm"))
    run(["pmse_ratio_cart", "specks_cart"], lambda: propensity("cart"))
    run(["nist_clustering"], lambda: {"nist_clustering": nist_clustering(
        ob, sb, reps=cfg.nist_clustering_reps, rng=rng.child(1))})
    if cfg.nist_columns:
        c = cfg.nist_columns
        run(["nist_regression"], lambda: {"nist_regression": nist_regression(
            orig, synth, c["city"], c["gender"], c["wage"])})
    if cfg.regressions:
        names = [m.name for s in cfg.regressions for m in regression_metrics(s.name)]

        def correlations():
            vals = {}
            for name, res in correlation_metrics(orig, synth, cfg.regressions).items():
                if res.absent:
                    kind = UNDEFINED if res.undefined else FAILED
                    vals[f"ci_overlap_{name}"] = vals[f"std_diff_{name}"] = (None, res.absent_reason, kind)
                else:
                    vals[f"ci_overlap_{name}"] = res.mean_ci_overlap
                    vals[f"std_diff_{name}"] = res.mean_std_diff
            return vals

        run(names, correlations)
    return out


def _evaluate_bundle(ctx: Context, directory: Path, shared: Shared, names: list[str]) -> dict:
    cfg = ctx.cfg
    manifest = read_manifest(directory)
    alg, eps = manifest["algorithm"], float(manifest["epsilon_total"])
    reps = read_replicates(directory, ctx.schema)
    base = SeededRng(cfg.seed, (_S_METRICS, *_stream(alg, eps)))
    per = {n: [] for n in names}
    reasons: dict[str, list[str]] = {n: [] for n in names}
    kinds: dict[str, set] = {n: set() for n in names}
    caught = Counter()
    for r, synth in enumerate(reps):
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            vals = replicate_metrics(ctx, synth, shared, base.child(r))
        caught.update(str(x.message) for x in w)
        for n in names:
            v, why, kind = vals.get(n, (None, "not computed", FAILED))
            per[n].append(v)
            if why:
                reasons[n].append(f"replicate {r}: {why}")
                kinds[n].add(kind)
    params = PrivacyParams(eps, float(manifest.get("delta_total", 0.0)))
    metrics = []
    for n in names:
        res = make_result(n, per[n], params)
        if kinds[n]:
            res.details["absence"] = sorted(kinds[n])
        if res.absent:
            res.absent_reason = "; ".join(dict.fromkeys(reasons[n])) or res.absent_reason
        elif reasons[n]:
            res.details["partial"] = reasons[n]
        metrics.append(res.as_dict() | {"details": res.details})
    run_warnings = list(manifest.get("warnings", []))
    run_warnings += [f"{msg} (x{count})" for msg, count in sorted(caught.items())]
    return {
        "algorithm": alg,
        "epsilon": eps,
        "delta": params.delta,
        "replicates": len(reps),
        "epsilon_per_replicate": manifest["epsilon_per_replicate"],
        "bundle": str(directory),
        "config_hash": manifest.get("config_hash"),
        "ledger": manifest.get("ledger"),
        "warnings": run_warnings,
        "metrics": metrics,
    }


def is_degraded(metric: dict) -> bool:
    """A metric degrades the run only when computing it failed somewhere."""
    return FAILED in metric.get("details", {}).get("absence", [])


def cmd_evaluate(ctx: Context, bundles: list[Path] | None = None, jobs: int = 1) -> tuple[dict, bool]:
    """Evaluate bundles and write ``report.json``, ``metrics.csv`` and
    ``aggregates.csv`` under the output directory. Returns ``(report, degraded)``."""
    cfg = ctx.cfg
    ensure_writable(cfg.out)
    if bundles is None:
        bundles = [bundle_dir(cfg, a, e) for a in cfg.algorithms for e in cfg.epsilons]
    bundles = [Path(b) for b in bundles]
    missing = [str(b) for b in bundles if not (b / "manifest.json").exists()]
    if missing:
        raise HarnessError(f"no complete bundle (manifest) at: {', '.join(missing)}")
    if not bundles:
        raise HarnessError("nothing to evaluate")

    first = read_replicates(bundles[0], ctx.schema)[0]
    shared = shared_quantities(ctx, first)
    names = axis_order(metric_names(cfg, ctx.schema))
    if jobs > 1 and len(bundles) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_evaluate_bundle, ctx, b, shared, names) for b in bundles]
            runs = [f.result() for f in futures]
    else:
        runs = [_evaluate_bundle(ctx, b, shared, names) for b in bundles]

    report = {
        "meta": {
            "config_hash": cfg.config_hash,
            "seed": cfg.seed,
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "n_original": ctx.original.n,
            "columns": ctx.schema.names,
            "groups": [[ctx.schema.names[c] for c in g] for g in ctx.plan.groups],
            "cart_cp": shared.cp,
            "null_pmse_cart": shared.null_cart,
            "shared_notes": shared.notes,
            "metrics": names,
        },
        "runs": runs,
        "warnings": list(ctx.warnings),
    }
    _atomic_write(cfg.out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    _atomic_write(cfg.out / "metrics.csv", metrics_csv(report))
    _atomic_write(cfg.out / "aggregates.csv", aggregates_csv(report))
    degraded = any(is_degraded(m) for r in runs for m in r["metrics"])
    return report, degraded


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}-", suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def metrics_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "category", "algorithm", "epsilon", "replicate", "value"])
    for run in report["runs"]:
        for m in run["metrics"]:
            for r, v in enumerate(m["per_replicate"]):
                w.writerow([m["name"], m["category"], run["algorithm"], _fmt(run["epsilon"]), r, _fmt(v)])
    return buf.getvalue()


def aggregate_rows(report: dict) -> list[dict]:
    """Replicate means recomputed from the stored per-replicate values."""
    rows = []
    for run in report["runs"]:
        for m in run["metrics"]:
            vals = [v for v in m["per_replicate"] if v is not None]
            value = None if m["absent_reason"] or not vals else float(np.mean(vals))
            rows.append({
                "metric": m["name"],
                "category": m["category"],
                "orientation": metric_info(m["name"]).orientation,
                "algorithm": run["algorithm"],
                "epsilon": run["epsilon"],
                "replicates": len(vals),
                "value": value,
                "rescaled": rescale(m["name"], value),
                "absent_reason": m["absent_reason"] or "",
            })
    return rows


def aggregates_csv(report: dict) -> str:
    buf = io.StringIO()
    fields = ["metric", "category", "orientation", "algorithm", "epsilon", "replicates",
              "value", "rescaled", "absent_reason"]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in aggregate_rows(report):
        w.writerow(row | {k: _fmt(row[k]) for k in ("epsilon", "value", "rescaled")})
    return buf.getvalue()


# -- report --------------------------------------------------------------------


def cmd_report(report_path: Path, out_dir: Path | None = None) -> tuple[list[Path], list[str]]:
    """Tables and one radar chart per algorithm. Returns ``(files, notes)``."""
    from . import plotting, report as tables

    report_path = Path(report_path)
    try:
        report = json.loads(report_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise HarnessError(f"cannot read report {report_path}: {exc}") from None
    out_dir = Path(out_dir) if out_dir else report_path.parent
    ensure_writable(out_dir)
    rows = aggregate_rows(report)
    files = []
    _atomic_write(out_dir / "aggregates.csv", aggregates_csv(report))
    files.append(out_dir / "aggregates.csv")
    for category, text in tables.category_tables_csv(rows).items():
        path = out_dir / f"table_{category}.csv"
        _atomic_write(path, text)
        files.append(path)
    _atomic_write(out_dir / "report.md", tables.markdown_report(report, rows))
    files.append(out_dir / "report.md")
    notes = []
    for alg in dict.fromkeys(r["algorithm"] for r in report["runs"]):
        path = out_dir / f"radar_{alg}.svg"
        try:
            plotting.radar_chart(alg, [r for r in rows if r["algorithm"] == alg], path)
            files.append(path)
        except plotting.DegenerateChart as exc:
            notes.append(f"{alg}: radar chart skipped ({exc})")
    return files, notes


# -- leakage scan ----------------------------------------------------------------


def scan_for_leaks(paths, original_csv_text: str) -> list[str]:
    """Names of output files containing any original data record verbatim."""
    records = [ln.strip() for ln in original_csv_text.splitlines()[1:] if ln.strip()]
    hits = []
    for p in paths:
        p = Path(p)
        if not p.is_file():
            continue
        text = p.read_text(encoding="utf-8", errors="replace")
        if any(rec in text for rec in records):
            hits.append(str(p))
    return hits


def cmd_pipeline(ctx: Context, jobs: int = 1) -> int:
    cfg = ctx.cfg
    bundles = cmd_synth(ctx, resume=True, jobs=jobs)
    report, degraded = cmd_evaluate(ctx, bundles, jobs=jobs)
    files, notes = cmd_report(cfg.out / "report.json")
    for n in notes:
        log.warning(n)
    outputs = [cfg.out / "report.json", cfg.out / "metrics.csv", *files]
    leaks = scan_for_leaks(outputs, read_text(cfg.original))
    if leaks:
        raise HarnessError(f"original records found verbatim in: {', '.join(leaks)}")
    return EXIT_DEGRADED if degraded else EXIT_OK
