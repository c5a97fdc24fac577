"""Experiment configs, repetition-averaged runs, sweeps and comparison tables.

Config files are flat ``key = value`` lines grouped under optional
``[section]`` headers::

    [problem]
    kind = quadratic
    n = 10
    zeta_bar = 10

    [algorithm]
    variant = kgt
    K = 20
    T = 250

Key names are unique across sections, so a key may also appear before the
first header. A ``[sweep]`` section turns the file into a sweep: every entry
there is an axis with comma-separated values, e.g. ``K = 1, 20``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import algorithms as alg
from .metrics import CSV_COLUMNS, MetricsRecord, format_float
from .problems import NoiseModel, make_problem
from .topology import TopologyError, make_topology

__all__ = [
    "ConfigError",
    "RunConfig",
    "SweepConfig",
    "Summary",
    "parse_config",
    "parse_config_text",
    "run_repetitions",
    "execute",
    "execute_sweep",
    "mean_trace",
    "rounds_to_threshold",
    "compare_report",
    "write_trace",
    "SUMMARY_COLUMNS",
]

ConfigError = alg.ConfigError


def _to_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _to_int(s: str) -> int:
    f = float(s)
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {s!r}")
    return int(f)


def _to_floats(s: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in s.split(",") if tok.strip())


# section -> key -> parser
SCHEMA = {
    "problem": {"kind": str, "n": _to_int, "d": _to_int, "zeta_bar": float, "c": float,
                "data_seed": _to_int, "x0": float},
    "topology": {"topology": str},
    "algorithm": {"variant": str, "K": _to_int, "eta": float, "eta_c": float, "eta_s": float,
                  "T": _to_int, "correction_init": str, "tracking_init": str},
    "noise": {"sigma": float, "noise_seed": _to_int},
    "runner": {"repetitions": _to_int, "collect_local_metrics": _to_bool, "output": str,
               "thresholds": _to_floats, "threshold_metric": str, "potential_v": float},
}
KEY_SECTION = {k: sec for sec, keys in SCHEMA.items() for k in keys}
KEY_PARSER = {k: fn for keys in SCHEMA.values() for k, fn in keys.items()}
REQUIRED = ("variant",)
SWEEP_FIXED = ("output", "repetitions", "collect_local_metrics", "thresholds",
               "threshold_metric", "potential_v")
MAX_GRID = 10_000


@dataclass(frozen=True)
class RunConfig:
    variant: str
    kind: str = "quadratic"
    n: int = 10
    d: int = 10
    zeta_bar: float = 0.0
    c: float = 0.0
    data_seed: int = 0
    x0: float = 0.0
    topology: str = "ring"
    K: int = 1
    eta_c: float = 1e-3
    eta_s: float = 1.0
    T: int = 100
    correction_init: Optional[str] = None
    tracking_init: Optional[str] = None
    sigma: float = 1.0
    noise_seed: int = 0
    repetitions: int = 3
    collect_local_metrics: bool = False
    output: str = "out"
    thresholds: tuple = ()
    threshold_metric: str = "grad_norm_sq"
    potential_v: float = 2.0

    def problem_block(self) -> tuple:
        return (self.kind, self.n, self.d, self.c, self.data_seed)

    def build_problem(self):
        return make_problem(self.kind, self.n, self.d, self.zeta_bar, self.c, self.data_seed)

    def build_topology(self):
        return make_topology(self.topology, self.n)

    def hyperparams(self) -> alg.HyperParams:
        return alg.HyperParams(self.variant, self.K, self.eta_c, self.eta_s, self.T,
                               self.correction_init, self.tracking_init)

    def noise(self, repetition: int = 0) -> NoiseModel:
        return NoiseModel(self.sigma, self.noise_seed + repetition)

    def x_init(self) -> np.ndarray:
        return np.full(self.d, self.x0)

    def validate(self) -> None:
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.kind not in ("quadratic", "nonconvex"):
            raise ConfigError(f"kind must be quadratic or nonconvex, got {self.kind!r}")
        if self.kind == "nonconvex" and not self.c > 0:
            raise ConfigError("nonconvex problems need c > 0")
        if self.kind == "quadratic" and self.c != 0:
            raise ConfigError("c only applies to kind = nonconvex")
        if self.n < 1 or self.d < 1:
            raise ConfigError(f"n and d must be >= 1, got n={self.n}, d={self.d}")
        if self.zeta_bar < 0 or self.sigma < 0:
            raise ConfigError("zeta_bar and sigma must be nonnegative")
        if self.data_seed < 0 or self.noise_seed < 0:
            raise ConfigError("seeds must be nonnegative")
        if self.threshold_metric not in CSV_COLUMNS:
            raise ConfigError(f"unknown threshold_metric {self.threshold_metric!r}")
        if not self.potential_v > 1:
            raise ConfigError(f"potential_v must exceed 1, got {self.potential_v}")
        if self.topology.startswith("file:"):
            if not Path(self.topology[5:]).is_file():
                raise ConfigError(f"topology file not found: {self.topology[5:]}")
            self.build_topology()
        elif self.topology not in ("ring", "complete", "disconnected"):
            raise ConfigError(f"unknown topology {self.topology!r}")
        self.hyperparams()


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    axes: dict
    max_grid: int = MAX_GRID

    def grid(self) -> list[RunConfig]:
        names = list(self.axes)
        points = []
        for values in itertools.product(*(self.axes[k] for k in names)):
            cfg = dataclasses.replace(self.base, **dict(zip(names, values)))
            points.append(_fit_inits(cfg))
        return points

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.axes.values())


def _fit_inits(cfg: RunConfig) -> RunConfig:
    # a sweep's init modes apply only to the variants that use them
    changes = {}
    if cfg.correction_init is not None and cfg.variant not in alg._CORRECTION_VARIANTS:
        changes["correction_init"] = None
    if cfg.tracking_init is not None and cfg.variant not in alg._TRACKING_VARIANTS:
        changes["tracking_init"] = None
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _fail(msg, lineno=None):
    where = f"line {lineno}: " if lineno is not None else ""
    raise ConfigError(where + msg)


def parse_config_text(text: str, base_dir: Union[str, Path] = ".") -> Union[RunConfig, SweepConfig]:
    """Parse config text; relative ``file:`` topology paths resolve against ``base_dir``."""
    values: dict = {}
    lines: dict = {}
    axes: dict = {}
    max_grid = MAX_GRID
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                _fail(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA and section != "sweep":
                _fail(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            _fail(f"expected key = value, got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))

        if section == "sweep":
            if key == "max_grid":
                try:
                    max_grid = _to_int(val)
                except ValueError as exc:
                    _fail(f"max_grid: {exc}", lineno)
                continue
            if key not in KEY_SECTION or key in SWEEP_FIXED or key == "eta":
                _fail(f"unknown sweep axis {key!r}", lineno)
            if key in axes:
                _fail(f"duplicate sweep axis {key!r}", lineno)
            try:
                axes[key] = [KEY_PARSER[key](tok.strip()) for tok in val.split(",") if tok.strip()]
            except ValueError as exc:
                _fail(f"{key}: {exc}", lineno)
            if not axes[key]:
                _fail(f"sweep axis {key!r} has no values", lineno)
            lines[key] = lineno
            continue

        if key not in KEY_SECTION:
            _fail(f"unknown key {key!r}", lineno)
        if section is not None and KEY_SECTION[key] != section:
            _fail(f"key {key!r} belongs in [{KEY_SECTION[key]}], not [{section}]", lineno)
        if key in values:
            _fail(f"duplicate key {key!r}", lineno)
        try:
            values[key] = KEY_PARSER[key](val)
        except ValueError as exc:
            _fail(f"{key}: {exc}", lineno)
        lines[key] = lineno

    for key in REQUIRED:
        if key not in values and key not in axes:
            _fail(f"missing required key {key!r}")

    if "eta" in values and "eta_c" in values:
        _fail("give either eta or eta_c, not both", lines["eta_c"])
    eta_s = values.get("eta_s", 1.0)
    if "eta" in values:
        values["eta_c"] = values.pop("eta") / eta_s
    if values.get("kind") == "nonconvex" and "c" not in values:
        values["c"] = 1.0
    topo = values.get("topology")
    if topo and topo.startswith("file:"):
        p = Path(topo[5:])
        if not p.is_absolute():
            values["topology"] = "file:" + str(Path(base_dir) / p)

    variant = values.pop("variant", axes.get("variant", [None])[0])
    base = RunConfig(variant=variant, **values)
    if not axes:
        _validate_at(base, lines)
        return base
    sweep = SweepConfig(base, axes, max_grid)
    if sweep.size > max_grid:
        _fail(f"sweep grid has {sweep.size} points, limit is {max_grid}")
    for cfg in sweep.grid():
        _validate_at(cfg, lines)
    return sweep


def _validate_at(cfg: RunConfig, lines: dict) -> None:
    # attach the line of the first key the validation message mentions
    try:
        cfg.validate()
    except (ConfigError, TopologyError) as exc:
        words = re.findall(r"[A-Za-z_0-9]+", str(exc))
        bad = next((w for w in words if w in lines), None)
        _fail(str(exc), lines.get(bad))


def parse_config(path) -> Union[RunConfig, SweepConfig]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, path.parent)


# -- execution ---------------------------------------------------------------

@dataclass
class Summary:
    config: RunConfig
    status: str
    records: list = field(repr=False)
    traces: list = field(default_factory=list, repr=False)
    diverged_round: Optional[int] = None

    def final(self, metric: str) -> float:
        return float(getattr(self.records[-1], metric)) if self.records else math.nan

    def best(self, metric: str) -> float:
        vals = [getattr(r, metric) for r in self.records]
        vals = [v for v in vals if not math.isnan(v)]
        return float(min(vals)) if vals else math.nan

    def row(self) -> dict:
        cfg = self.config
        row = {
            "variant": cfg.variant, "K": cfg.K, "zeta_bar": cfg.zeta_bar,
            "sigma": cfg.sigma, "eta_c": cfg.eta_c, "eta_s": cfg.eta_s, "T": cfg.T,
            "topology": cfg.topology, "kind": cfg.kind, "n": cfg.n, "d": cfg.d,
            "repetitions": cfg.repetitions, "status": self.status,
            "diverged_round": "" if self.diverged_round is None else self.diverged_round,
            "final_grad_norm_sq": self.final("grad_norm_sq"),
            "best_grad_norm_sq": self.best("grad_norm_sq"),
            "final_f_gap": self.final("f_gap"),
            "best_f_gap": self.best("f_gap"),
        }
        for thr in cfg.thresholds:
            r = rounds_to_threshold(self.records, cfg.threshold_metric, thr)
            row[f"rounds_to_{cfg.threshold_metric}<={thr:g}"] = "" if r is None else r
        return row


SUMMARY_COLUMNS = ("variant", "K", "zeta_bar", "sigma", "eta_c", "eta_s", "T", "topology",
                   "kind", "n", "d", "repetitions", "status", "diverged_round",
                   "final_grad_norm_sq", "best_grad_norm_sq", "final_f_gap", "best_f_gap")


def mean_trace(traces: list) -> list:
    """Pointwise arithmetic mean of each metric across repetitions.

    Traces of unequal length (a diverged repetition) are cut to the shortest.
    """
    if not traces:
        return []
    length = min(len(t) for t in traces)
    out = []
    for i in range(length):
        rows = [t[i] for t in traces]
        rec = MetricsRecord(rows[0].round, rows[0].comm_rounds, rows[0].grad_evals, math.nan)
        for col in CSV_COLUMNS[3:]:
            setattr(rec, col, float(np.mean([getattr(r, col) for r in rows])))
        out.append(rec)
    return out


def run_repetitions(cfg: RunConfig) -> Summary:
    problem = cfg.build_problem()
    W = cfg.build_topology()
    hp = cfg.hyperparams()
    traces, status, div_round = [], "ok", None
    for rep in range(cfg.repetitions):
        try:
            recs = alg.run(problem, cfg.noise(rep), hp, W, cfg.x_init(),
                           collect_local=cfg.collect_local_metrics, v=cfg.potential_v)
        except alg.DivergenceError as exc:
            recs = exc.records
            status = "diverged"
            div_round = exc.round if div_round is None else min(div_round, exc.round)
        traces.append(recs)
    return Summary(cfg, status, mean_trace(traces), traces, div_round)


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def write_trace(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow(rec.row())


def _write_local(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("round", "step", "drift"))
        for rec in records:
            for k, e in enumerate(rec.drift_steps or ()):
                w.writerow((rec.round, k, format_float(e)))


def write_rows(rows: list, path, columns=None) -> None:
    if columns is None:
        columns = list(SUMMARY_COLUMNS)
        for r in rows:
            columns += [k for k in r if k not in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_csv_cell(r.get(c, "")) for c in columns])


def execute(cfg: RunConfig, outdir=None) -> Summary:
    """Run all repetitions of ``cfg`` and write the traces and summary under ``outdir``."""
    out = Path(outdir if outdir is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    summary = run_repetitions(cfg)
    for rep, recs in enumerate(summary.traces):
        write_trace(recs, out / f"trace_rep{rep}.csv")
        if cfg.collect_local_metrics:
            _write_local(recs, out / f"local_drift_rep{rep}.csv")
    write_trace(summary.records, out / "trace_mean.csv")
    write_rows([summary.row()], out / "summary.csv")
    return summary


def _point_label(cfg: RunConfig, axes) -> str:
    parts = [f"{k}={getattr(cfg, k)}" for k in axes]
    return "_".join(parts).replace("/", "-").replace(":", "-")


def execute_sweep(sweep: SweepConfig, outdir=None) -> list[Summary]:
    """Run every grid point; divergence is recorded per point, never fatal."""
    out = Path(outdir if outdir is not None else sweep.base.output)
    out.mkdir(parents=True, exist_ok=True)
    summaries = []
    for idx, cfg in enumerate(sweep.grid()):
        summaries.append(execute(cfg, out / f"point{idx:04d}_{_point_label(cfg, sweep.axes)}"))
    write_rows([s.row() for s in summaries], out / "summary.csv")
    if len(summaries) >= 2 and len({s.config.problem_block() for s in summaries}) == 1:
        table = compare_report(summaries)
        write_rows(table, out / "comparison.csv", columns=list(table[0]))
    return summaries


def rounds_to_threshold(trace, metric: str, threshold: float) -> Optional[int]:
    """First round whose ``metric`` is ``<= threshold``, or ``None``."""
    if metric not in CSV_COLUMNS:
        raise KeyError(f"unknown metric {metric!r}")
    for rec in trace:
        if getattr(rec, metric) <= threshold:
            return rec.round
    return None


def compare_report(summaries: list) -> list[dict]:
    """Table keyed by (variant, K, zeta_bar) with a heterogeneity-robustness ratio.

    The ratio is final ``f_gap`` at the largest ``zeta_bar`` over final
    ``f_gap`` at the smallest, within each (variant, K) group.
    """
    if len(summaries) < 2:
        raise ValueError("comparison needs at least two summaries")
    blocks = {s.config.problem_block() for s in summaries}
    if len(blocks) != 1:
        raise ValueError(f"summaries do not share a problem block: {sorted(blocks)}")

    groups: dict = {}
    for s in summaries:
        groups.setdefault((s.config.variant, s.config.K), []).append(s)
    ratio = {}
    for key, members in groups.items():
        lo = min(members, key=lambda s: s.config.zeta_bar)
        hi = max(members, key=lambda s: s.config.zeta_bar)
        ratio[key] = hi.final("f_gap") / lo.final("f_gap") if lo.final("f_gap") != 0 else math.inf

    table = []
    for s in summaries:
        row = s.row()
        table.append({
            "variant": row["variant"], "K": row["K"], "zeta_bar": row["zeta_bar"],
            "status": row["status"],
            "final_grad_norm_sq": row["final_grad_norm_sq"],
            "final_f_gap": row["final_f_gap"],
            **{k: v for k, v in row.items() if k.startswith("rounds_to_")},
            "robustness_ratio": ratio[(s.config.variant, s.config.K)],
        })
    return table


def render_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(rows[0]))
    for r in rows:
        w.writerow([_csv_cell(v) for v in r.values()])
    return buf.getvalue()
