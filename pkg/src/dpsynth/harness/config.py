"""Run configuration: an INI file with fixed sections.

::

    [data]
    codebook = codebook.txt        # paths are relative to the config file
    original = original.csv
    public = public.csv            # optional
    load_policy = strict           # strict | clamp

    [synthesis]
    algorithms = fieldgroups, dpsyn
    epsilons = 0.1, 1, 10          # ascending, positive
    delta = 1e-5                   # used by dpsyn only
    replicates = 3
    synthetic_rows = match-original
    threshold = default

    [grouping]
    threshold = 0.3
    max_group_size = 3
    max_cells = 1000000

    [metrics]
    select = all                   # or a comma list of metric names
    nist_clustering_reps = 100
    nist_classification_reps = 300
    bootstrap_reps = 100
    cv_folds = 10
    cp_grid = 0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05
    min_leaf = 20

    [nist_regression]              # optional
    city = city
    gender = gender
    wage = wage

    [regression.NAME]              # zero or more
    family = logistic              # logistic | poisson
    outcome = employed
    predictors = age, education
    positive_level = yes           # logistic only, optional

    [run]
    seed = 0
    out = out                      # omitted: ./out under the working directory
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from ..metrics.correlation import RegressionSpec
from ..metrics.results import BASE_METRICS
from ..models import DEFAULT_CP_GRID, DEFAULT_MIN_LEAF
from ..synth import ALGORITHMS

DEFAULT_EPSILONS = (0.1, 1.0, 10.0)
KNOWN_SECTIONS = {"data", "synthesis", "grouping", "metrics", "nist_regression", "run"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    codebook: Path
    original: Path
    public: Path | None
    load_policy: str = "strict"
    algorithms: tuple[str, ...] = ALGORITHMS
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    delta: float = 1e-5
    replicates: int = 3
    synthetic_rows: int | str = "match-original"
    threshold: str | float = "default"
    group_threshold: float = 0.3
    max_group_size: int = 3
    max_cells: int = 10**6
    metrics: tuple[str, ...] | None = None  # None = every metric
    nist_clustering_reps: int = 100
    nist_classification_reps: int = 300
    bootstrap_reps: int = 100
    cv_folds: int = 10
    cp_grid: tuple[float, ...] = DEFAULT_CP_GRID
    min_leaf: int = DEFAULT_MIN_LEAF
    nist_columns: dict | None = None
    regressions: list[RegressionSpec] = field(default_factory=list)
    seed: int = 0
    out: Path = Path("out")
    canonical: str = ""

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(f"{self.canonical}\nseed={self.seed}".encode()).hexdigest()

    def wants(self, metric: str) -> bool:
        return self.metrics is None or metric in self.metrics


def _floats(text: str, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def canonicalize(parser: configparser.ConfigParser) -> str:
    """Sorted sections and keys with stripped values; [run] out is excluded
    because moving the output directory does not change the run."""
    lines = []
    for section in sorted(parser.sections()):
        lines.append(f"[{section}]")
        for key in sorted(parser[section]):
            if section == "run" and key == "out":
                continue
            lines.append(f"{key}={parser[section][key].strip()}")
    return "\n".join(lines)


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    base = Path(base_dir)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    unknown = [s for s in parser.sections() if s not in KNOWN_SECTIONS and not s.startswith("regression.")]
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")
    if "data" not in parser:
        raise ConfigError("missing [data] section")
    data = parser["data"]

    def path(key, required=True):
        if key not in data:
            if required:
                raise ConfigError(f"[data] needs '{key}'")
            return None
        return (base / data[key].strip()).resolve()

    kw = {"codebook": path("codebook"), "original": path("original"), "public": path("public", False)}
    kw["load_policy"] = data.get("load_policy", "strict").strip()
    if kw["load_policy"] not in ("strict", "clamp"):
        raise ConfigError("load_policy must be strict or clamp")

    try:
        if "synthesis" in parser:
            s = parser["synthesis"]
            if "algorithms" in s:
                kw["algorithms"] = _names(s["algorithms"])
            if "epsilons" in s:
                kw["epsilons"] = _floats(s["epsilons"], "epsilons")
            kw["delta"] = s.getfloat("delta", 1e-5)
            kw["replicates"] = s.getint("replicates", 3)
            rows = s.get("synthetic_rows", "match-original").strip()
            kw["synthetic_rows"] = rows if rows == "match-original" else int(rows)
            thr = s.get("threshold", "default").strip()
            kw["threshold"] = thr if thr == "default" else float(thr)
        if "grouping" in parser:
            g = parser["grouping"]
            kw["group_threshold"] = g.getfloat("threshold", 0.3)
            kw["max_group_size"] = g.getint("max_group_size", 3)
            kw["max_cells"] = g.getint("max_cells", 10**6)
        if "metrics" in parser:
            m = parser["metrics"]
            sel = m.get("select", "all").strip()
            kw["metrics"] = None if sel == "all" else _names(sel)
            for key in ("nist_clustering_reps", "nist_classification_reps", "bootstrap_reps",
                        "cv_folds", "min_leaf"):
                if key in m:
                    kw[key] = m.getint(key)
            if "cp_grid" in m:
                kw["cp_grid"] = _floats(m["cp_grid"], "cp_grid")
        if "run" in parser:
            kw["seed"] = parser["run"].getint("seed", 0)
            if "out" in parser["run"]:
                kw["out"] = (base / parser["run"]["out"].strip()).resolve()
        if "out" not in kw:
            kw["out"] = Path("out").resolve()  # omitted: relative to the working directory
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    if "nist_regression" in parser:
        nr = parser["nist_regression"]
        missing = [k for k in ("city", "gender", "wage") if k not in nr]
        if missing:
            raise ConfigError(f"[nist_regression] needs {', '.join(missing)}")
        kw["nist_columns"] = {k: nr[k].strip() for k in ("city", "gender", "wage")}

    specs = []
    for section in parser.sections():
        if not section.startswith("regression."):
            continue
        r = parser[section]
        name = section[len("regression."):]
        for key in ("family", "outcome", "predictors"):
            if key not in r:
                raise ConfigError(f"[{section}] needs '{key}'")
        specs.append(RegressionSpec(
            name, r["family"].strip(), r["outcome"].strip(), _names(r["predictors"]),
            r.get("positive_level", None) and r["positive_level"].strip(),
        ))
    kw["regressions"] = specs

    cfg = RunConfig(canonical=canonicalize(parser), **kw)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    bad = [a for a in cfg.algorithms if a not in ALGORITHMS]
    if bad or not cfg.algorithms:
        raise ConfigError(f"unknown algorithms {bad}; choose from {', '.join(ALGORITHMS)}")
    eps = cfg.epsilons
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("epsilons must be positive")
    if list(eps) != sorted(set(eps)):
        raise ConfigError("epsilons must be strictly ascending")
    if cfg.replicates < 1:
        raise ConfigError("replicates must be at least 1")
    if "dpsyn" in cfg.algorithms and not 0 < cfg.delta < 1:
        raise ConfigError("dpsyn needs 0 < delta < 1")
    if not 0 <= cfg.group_threshold <= 1:
        raise ConfigError("grouping threshold must lie in [0, 1]")
    if cfg.metrics is not None:
        known = set(BASE_METRICS) | {f"{p}_{s.name}" for s in cfg.regressions for p in ("ci_overlap", "std_diff")}
        unknown = [m for m in cfg.metrics if m not in known]
        if unknown:
            raise ConfigError(f"unknown metrics {unknown}")
    names = [s.name for s in cfg.regressions]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate regression names")


def load_config(path, seed: int | None = None, out=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text, path.parent)
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.out = Path(out).resolve()
    return cfg
