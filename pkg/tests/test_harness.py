import csv
import io
import json
import math

import numpy as np
import pytest

from dpsynth.harness import (
    EXIT_DEGRADED,
    EXIT_FAILED,
    EXIT_OK,
    ConfigError,
    HarnessError,
    cmd_evaluate,
    cmd_report,
    cmd_synth,
    load_config,
    load_context,
    parse_config,
    scan_for_leaks,
)
from dpsynth.harness.cli import run as cli_run
from dpsynth.harness.plotting import DegenerateChart, polygon_values, radar_chart
from dpsynth.harness.runner import (
    FAILED,
    UNDEFINED,
    aggregates_csv,
    is_degraded,
    replicate_metrics,
    shared_quantities,
)
from dpsynth.metrics import rescale
from dpsynth.synth import read_manifest
from dpsynth.synth.bundle import replicate_name
from dpsynth.toy import CODEBOOK, ORIGINAL, PUBLIC

ROWS = 300


def _write_inputs(tmp_path, public=True):
    orig = ORIGINAL.read_text().splitlines()
    (tmp_path / "codebook.txt").write_text(CODEBOOK.read_text())
    (tmp_path / "original.csv").write_text("\n".join(orig[: ROWS + 1]) + "\n")
    if public:
        pub = PUBLIC.read_text().splitlines()
        (tmp_path / "public.csv").write_text("\n".join(pub[: ROWS + 1]) + "\n")


def _config(tmp_path, *, algorithms="fieldgroups", epsilons="1", replicates=3,
            select="chisq_pvalue_mean, ks_pvalue_mean, specks_glm", extra="", public=True, seed=7):
    _write_inputs(tmp_path, public)
    text = f"""\
[data]
codebook = codebook.txt
original = original.csv
{"public = public.csv" if public else ""}

[synthesis]
algorithms = {algorithms}
epsilons = {epsilons}
delta = 1e-5
replicates = {replicates}

[grouping]
threshold = 0.2

[metrics]
select = {select}
bootstrap_reps = 3
nist_clustering_reps = 10
nist_classification_reps = 20
cv_folds = 3
{extra}
[run]
seed = {seed}
out = out
"""
    path = tmp_path / "run.ini"
    path.write_text(text)
    return path


# config


def test_config_defaults(tmp_path):
    cfg = parse_config("[data]\ncodebook = c.txt\noriginal = o.csv\n", tmp_path)
    assert cfg.epsilons == (0.1, 1.0, 10.0) and cfg.replicates == 3 and cfg.public is None
    assert cfg.codebook == (tmp_path / "c.txt").resolve() and cfg.metrics is None


@pytest.mark.parametrize("body, needle", [
    ("[synthesis]\nepsilons = 1, 0.1\n", "ascending"),
    ("[synthesis]\nepsilons = 0, 1\n", "positive"),
    ("[synthesis]\nreplicates = 0\n", "replicates"),
    ("[synthesis]\nalgorithms = magic\n", "unknown algorithms"),
    ("[synthesis]\ndelta = 0\n", "delta"),
    ("[metrics]\nselect = bogus\n", "unknown metrics"),
    ("[extras]\nx = 1\n", "unknown sections"),
    ("[nist_regression]\ncity = c\n", "needs"),
    ("[regression.m]\nfamily = logistic\n", "needs"),
])
def test_config_errors(tmp_path, body, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config("[data]\ncodebook = c.txt\noriginal = o.csv\n" + body, tmp_path)


def test_config_hash_canonical(tmp_path):
    base = "[data]\ncodebook = c.txt\noriginal = o.csv\n[run]\nseed = 3\n"
    shuffled = "# comment\n[run]\nseed =   3\nout = elsewhere\n\n[data]\noriginal = o.csv\ncodebook = c.txt\n"
    a, b = parse_config(base, tmp_path), parse_config(shuffled, tmp_path)
    assert a.config_hash == b.config_hash
    assert parse_config(base.replace("3", "4"), tmp_path).config_hash != a.config_hash


def test_regression_sections(tmp_path):
    cfg = parse_config(
        "[data]\ncodebook = c.txt\noriginal = o.csv\n"
        "[regression.m1]\nfamily = logistic\noutcome = y\npredictors = a, b\npositive_level = yes\n", tmp_path)
    spec = cfg.regressions[0]
    assert (spec.name, spec.predictors, spec.positive_level) == ("m1", ("a", "b"), "yes")
    assert cfg.wants("ci_overlap_m1")


def test_seed_and_out_overrides(tmp_path):
    path = _config(tmp_path)
    cfg = load_config(path, seed=99, out=tmp_path / "o2")
    assert cfg.seed == 99 and cfg.out == (tmp_path / "o2").resolve()
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.ini")


# public fallback


def test_public_required_unless_flagged(tmp_path):
    cfg = load_config(_config(tmp_path, public=False))
    with pytest.raises(HarnessError, match="unsafe-public-fallback"):
        load_context(cfg)
    ctx = load_context(cfg, unsafe_public_fallback=True)
    assert any("UNSAFE" in w for w in ctx.warnings)


# synth


def test_synth_writes_bundle(tmp_path):
    ctx = load_context(load_config(_config(tmp_path)))
    (d,) = cmd_synth(ctx)
    assert sorted(p.name for p in d.glob("replicate_*.csv")) == [replicate_name(i) for i in range(3)]
    manifest = read_manifest(d)
    assert manifest["epsilon_per_replicate"] == pytest.approx(1 / 3)
    assert manifest["config_hash"] == ctx.cfg.config_hash


def test_synth_rerun_byte_identical(tmp_path):
    path = _config(tmp_path)
    (a,) = cmd_synth(load_context(load_config(path, out=tmp_path / "a")))
    (b,) = cmd_synth(load_context(load_config(path, out=tmp_path / "b")))
    for i in range(3):
        assert (a / replicate_name(i)).read_bytes() == (b / replicate_name(i)).read_bytes()


def test_unwritable_out_exits_2(tmp_path):
    path = _config(tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = cli_run(["synth", "--config", str(path), "--out", str(blocker / "sub")])
    assert code == EXIT_FAILED
    assert not list(tmp_path.rglob("manifest.json"))


def test_resume_reuses_and_refuses_foreign_hash(tmp_path):
    path = _config(tmp_path)
    ctx = load_context(load_config(path))
    (d,) = cmd_synth(ctx)
    stamp = (d / replicate_name(0)).stat().st_mtime_ns
    assert cmd_synth(ctx, resume=True) == [d]
    assert (d / replicate_name(0)).stat().st_mtime_ns == stamp
    other = load_context(load_config(path, seed=8))
    with pytest.raises(HarnessError, match="different configuration"):
        cmd_synth(other, resume=True)


# evaluate


def test_evaluate_bookkeeping(tmp_path):
    ctx = load_context(load_config(_config(
        tmp_path, algorithms="fieldgroups, dpsyn", epsilons="0.5, 1, 5", replicates=5)))
    cmd_synth(ctx)
    report, degraded = cmd_evaluate(ctx)
    assert not degraded and len(report["runs"]) == 6
    assert {(r["algorithm"], r["epsilon"]) for r in report["runs"]} == {
        (a, e) for a in ("fieldgroups", "dpsyn") for e in (0.5, 1.0, 5.0)}
    for r in report["runs"]:
        assert r["replicates"] == 5
        for m in r["metrics"]:
            assert len(m["per_replicate"]) == 5
            assert m["value"] == pytest.approx(np.mean(m["per_replicate"]))
    rows = list(csv.DictReader(io.StringIO((ctx.cfg.out / "metrics.csv").read_text())))
    assert len(rows) == 6 * 3 * 5
    # aggregates recomputed from the persisted report are identical
    first = (ctx.cfg.out / "aggregates.csv").read_bytes()
    persisted = json.loads((ctx.cfg.out / "report.json").read_text())
    assert aggregates_csv(persisted).encode() == first
    cmd_report(ctx.cfg.out / "report.json")
    assert (ctx.cfg.out / "aggregates.csv").read_bytes() == first


def test_copy_is_optimal_on_every_metric(tmp_path):
    extra = ("[nist_regression]\ncity = city\ngender = gender\nwage = wage\n"
             "[regression.emp]\nfamily = logistic\noutcome = employed\npredictors = age, education\n"
             "[regression.kids]\nfamily = poisson\noutcome = children\npredictors = age\n")
    # a small fixed cp keeps the bootstrap null positive on a copy
    extra = "cp_grid = 0.0001\n" + extra
    ctx = load_context(load_config(_config(tmp_path, select="all", extra=extra)))
    shared = shared_quantities(ctx, ctx.original)
    from dpsynth.privacy import SeededRng

    vals = replicate_metrics(ctx, ctx.original, shared, SeededRng(0))
    assert len(vals) == 13
    for name, (v, why, _) in vals.items():
        assert why is None, name
        assert rescale(name, v) == pytest.approx(1.0, abs=1e-9), name


def test_failed_metric_degrades_exit_code(tmp_path):
    extra = "[regression.bad]\nfamily = logistic\noutcome = wage\npredictors = age\n"
    path = _config(tmp_path, select="chisq_pvalue_mean, ci_overlap_bad, std_diff_bad", extra=extra)
    assert cli_run(["synth", "--config", str(path)]) == EXIT_OK
    assert cli_run(["evaluate", "--config", str(path)]) == EXIT_DEGRADED
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    bad = [m for m in report["runs"][0]["metrics"] if m["name"] == "ci_overlap_bad"][0]
    assert bad["value"] is None and "categorical" in bad["absent_reason"]


def test_undefined_absence_is_not_degradation():
    assert is_degraded({"details": {"absence": [FAILED]}})
    assert not is_degraded({"details": {"absence": [UNDEFINED]}})
    assert not is_degraded({"details": {}})


def test_evaluate_needs_bundles(tmp_path):
    ctx = load_context(load_config(_config(tmp_path)))
    with pytest.raises(HarnessError, match="no complete bundle"):
        cmd_evaluate(ctx)


# report


def _report(values_by_eps, metrics):
    runs = []
    for eps, vals in values_by_eps.items():
        runs.append({"algorithm": "alg", "epsilon": eps, "metrics": [
            {"name": n, "category": c, "per_replicate": [v], "absent_reason": None if v is not None else "gone"}
            for (n, c), v in zip(metrics, vals)]})
    meta = {"config_hash": "0" * 64, "seed": 0, "n_original": 10, "groups": [["a"]], "cart_cp": None}
    return {"meta": meta, "runs": runs}


AXES = [("chisq_pvalue_mean", "marginal"), ("specks_glm", "joint"), ("nist_clustering", "joint"),
        ("pmse_ratio_glm", "joint"), ("std_diff_m", "correlation")]


def _write_report(tmp_path, report):
    path = tmp_path / "report.json"
    path.write_text(json.dumps(report))
    return path


def test_degenerate_chart_rejected_tables_kept(tmp_path):
    path = _write_report(tmp_path, _report({1.0: [0.4]}, AXES[:1]))
    files, notes = cmd_report(path)
    assert any("skipped" in n for n in notes)
    names = {f.name for f in files}
    assert "table_marginal.csv" in names and "report.md" in names
    assert not list(tmp_path.glob("*.svg"))


def test_perfect_copy_full_polygon(tmp_path):
    path = _write_report(tmp_path, _report({1.0: [1.0, 0.0, 0.0, 0.0, 0.0]}, AXES))
    files, notes = cmd_report(path)
    assert not notes and (tmp_path / "radar_alg.svg").exists()
    from dpsynth.harness.runner import aggregate_rows

    _, _, polys = polygon_values(aggregate_rows(json.loads(path.read_text())))
    assert polys[1.0] == [1.0] * 5


def test_monotone_eps_nested_polygons(tmp_path):
    report = _report({
        0.1: [0.1, 0.6, 0.5, math.exp(9), 8.0],
        1.0: [0.5, 0.3, 0.2, math.exp(4), 3.0],
        10.0: [0.9, 0.05, 0.02, 1.5, 0.5],
    }, AXES)
    from dpsynth.harness.runner import aggregate_rows

    rows = aggregate_rows(report)
    axes, cats, polys = polygon_values(rows)
    assert cats == ["marginal", "joint", "joint", "joint", "correlation"]
    lo, mid, hi = polys[0.1], polys[1.0], polys[10.0]
    assert all(a <= b <= c for a, b, c in zip(lo, mid, hi))
    assert radar_chart("alg", rows, tmp_path / "r.svg").stat().st_size > 0


def test_absent_metric_annotated(tmp_path):
    rows_report = _report({1.0: [0.5, None, 0.1, 2.0, 1.0]}, AXES)
    path = _write_report(tmp_path, rows_report)
    cmd_report(path)
    svg = (tmp_path / "radar_alg.svg").read_text()
    assert "(absent)" in svg
    md = (tmp_path / "report.md").read_text()
    assert "-" in md


def test_radar_needs_three_axes(tmp_path):
    from dpsynth.harness.runner import aggregate_rows

    rows = aggregate_rows(_report({1.0: [0.5, 0.5]}, AXES[:2]))
    with pytest.raises(DegenerateChart):
        radar_chart("alg", rows, tmp_path / "x.svg")


# leakage and CLI


def test_leak_scanner(tmp_path):
    original = "a,b\n1,2\n3,4\n"
    clean = tmp_path / "clean.csv"
    clean.write_text("metric,value\nx,0.5\n")
    dirty = tmp_path / "dirty.md"
    dirty.write_text("oops 3,4 here\n")
    assert scan_for_leaks([clean, dirty, tmp_path / "none"], original) == [str(dirty)]


def test_pipeline_outputs_and_no_leaks(tmp_path):
    path = _config(tmp_path, epsilons="1, 10")
    assert cli_run(["pipeline", "--config", str(path)]) == EXIT_OK
    out = tmp_path / "out"
    for name in ("report.json", "metrics.csv", "aggregates.csv", "report.md", "radar_fieldgroups.svg"):
        assert (out / name).exists(), name
    outputs = [p for p in out.iterdir() if p.is_file()]
    assert scan_for_leaks(outputs, (tmp_path / "original.csv").read_text()) == []
    # second run resumes from the bundles written by the first
    assert cli_run(["pipeline", "--config", str(path)]) == EXIT_OK


def test_cli_errors(tmp_path, capsys):
    assert cli_run(["synth", "--config", str(tmp_path / "missing.ini")]) == EXIT_FAILED
    assert "error" in capsys.readouterr().err
    assert cli_run(["report", str(tmp_path / "nope.json")]) == EXIT_FAILED
    path = _config(tmp_path)
    assert cli_run(["synth", "--config", str(path), "--seed", "-1"]) == EXIT_FAILED
    with pytest.raises(SystemExit):
        cli_run(["bogus"])
