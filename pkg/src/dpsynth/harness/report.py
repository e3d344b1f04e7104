"""Human-readable tables: one per metric category, ε across columns."""
from __future__ import annotations

import csv
import io

from ..metrics.results import CATEGORIES


def _grid(rows: list[dict], category: str):
    eps = sorted({r["epsilon"] for r in rows})
    keyed = {}
    for r in rows:
        if r["category"] == category:
            keyed.setdefault((r["metric"], r["algorithm"]), {})[r["epsilon"]] = r
    return eps, keyed


def _cell(r: dict | None) -> str:
    if r is None:
        return ""
    if r["value"] is None:
        return "-"
    return f"{r['value']:.4g}"


def category_tables_csv(rows: list[dict]) -> dict[str, str]:
    out = {}
    for cat in CATEGORIES:
        eps, keyed = _grid(rows, cat)
        if not keyed:
            continue
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "orientation", "algorithm", *[f"eps={e:g}" for e in eps]])
        for (metric, alg), by_eps in keyed.items():
            orient = next(iter(by_eps.values()))["orientation"]
            w.writerow([metric, orient, alg, *[
                "" if by_eps.get(e) is None or by_eps[e]["value"] is None else repr(by_eps[e]["value"])
                for e in eps
            ]])
        out[cat] = buf.getvalue()
    return out


def markdown_report(report: dict, rows: list[dict]) -> str:
    meta = report["meta"]
    lines = [
        "# Utility report",
        "",
        f"- config hash: `{meta['config_hash'][:16]}`",
        f"- seed: {meta['seed']}",
        f"- original rows: {meta['n_original']}",
        f"- column groups: {', '.join('(' + ', '.join(g) + ')' for g in meta['groups'])}",
        f"- shared CART cp: {meta['cart_cp']}",
        "",
        "Entries are replicate means; `-` marks an absent metric.",
    ]
    for cat in CATEGORIES:
        eps, keyed = _grid(rows, cat)
        if not keyed:
            continue
        lines += ["", f"## {cat.capitalize()} metrics", ""]
        lines.append("| metric | better | algorithm | " + " | ".join(f"ε={e:g}" for e in eps) + " |")
        lines.append("|---|---|---|" + "---|" * len(eps))
        for (metric, alg), by_eps in keyed.items():
            orient = next(iter(by_eps.values()))["orientation"].split("-")[0]
            lines.append(f"| {metric} | {orient} | {alg} | " + " | ".join(_cell(by_eps.get(e)) for e in eps) + " |")
    absent = [r for r in rows if r["value"] is None and r["absent_reason"]]
    if absent:
        lines += ["", "## Absent metrics", ""]
        for r in absent:
            lines.append(f"- {r['metric']} ({r['algorithm']}, ε={r['epsilon']:g}): {r['absent_reason']}")
    warns = list(report.get("warnings", []))
    for run in report["runs"]:
        warns += [f"{run['algorithm']} ε={run['epsilon']:g}: {w}" for w in run.get("warnings", [])]
    if warns:
        lines += ["", "## Warnings", ""] + [f"- {w}" for w in warns]
    return "\n".join(lines) + "\n"
