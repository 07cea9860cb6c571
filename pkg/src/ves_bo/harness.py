"""Seeded Bayesian-optimization runs, suites, the KS equivalence study and plots.

Run-level CSV columns::

    repeat,iteration,phase,x0..x{d-1},y,best_y,regret,k_star,beta_star,jensen_gap,wallclock_s

``iteration`` counts every evaluation (initial design included); ``phase`` is
``init`` or ``bo``.  ``regret`` is ``f* - best_y`` when the optimum is known and
``-best_y`` otherwise.  Floats are written with 17 significant digits, missing
values as empty fields.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import acquisition as acq
from .acq_optimizer import OptimizerConfig
from .acquisition import AcqKind, AcquisitionSpec
from .benchmarks import Benchmark, get_benchmark
from .errors import ConfigError, VesError
from .gp_model import FitConfig, ObservationSet, fit_map
from .posterior_paths import MaxSearchConfig, draw_paths
from .rng import stream, stream_seed
from .special_math import ks_two_sample

log = logging.getLogger(__name__)

REGRET_FLOOR = 1e-12
KS_SEED_OFFSET = 1_000_003


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a set of BO runs.

    ``n_features`` sets the random-feature count of posterior paths; the path
    count is ``acquisition.mc_samples``.  ``record_wallclock=False`` writes
    empty timing fields so that repeated runs give byte-identical files.
    """

    benchmark: str
    acquisition: AcquisitionSpec = field(default_factory=AcquisitionSpec)
    n_init: int = 20
    n_iters: int = 100
    n_repeats: int = 10
    seed_base: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    gp_fit: FitConfig = field(default_factory=FitConfig)
    output_dir: Path | None = None
    n_features: int = 1024
    search: MaxSearchConfig = field(default_factory=MaxSearchConfig)
    workers: int = 1
    record_wallclock: bool = True

    def __post_init__(self):
        if self.n_init < 2:
            raise ConfigError("n_init must be at least 2")
        if self.n_iters < 0:
            raise ConfigError("n_iters must be non-negative")
        if self.n_repeats < 1:
            raise ConfigError("n_repeats must be at least 1")
        if self.seed_base < 0:
            raise ConfigError("seed_base must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.output_dir is not None:
            object.__setattr__(self, "output_dir", Path(self.output_dir))

    def with_acquisition(self, kind, **changes) -> "ExperimentConfig":
        return replace(self, acquisition=replace(self.acquisition, kind=AcqKind(kind), **changes))

    def resolve_benchmark(self) -> Benchmark:
        try:
            return get_benchmark(self.benchmark)
        except KeyError as exc:
            raise ConfigError(f"unknown benchmark {self.benchmark!r}") from exc


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    phase: str
    x: np.ndarray
    y: float
    best_y: float
    regret: float
    k_star: float | None = None
    beta_star: float | None = None
    jensen_gap: float | None = None
    wallclock_s: float | None = None


@dataclass
class RegretTrace:
    """Per-evaluation records of one BO run."""

    benchmark: str
    acquisition: str
    repeat: int
    d: int
    records: list = field(default_factory=list)
    error: str | None = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def y(self) -> np.ndarray:
        return np.array([r.y for r in self.records])

    @property
    def best_y(self) -> np.ndarray:
        return np.array([r.best_y for r in self.records])

    @property
    def regret(self) -> np.ndarray:
        return np.array([r.regret for r in self.records])

    def init_regret(self) -> float:
        """Regret after the initial design."""
        return [r.regret for r in self.records if r.phase == "init"][-1]

    def final_regret(self) -> float:
        return self.records[-1].regret

    def bo_wallclock(self) -> np.ndarray:
        return np.array([r.wallclock_s for r in self.records if r.phase == "bo"], dtype=float)

    def header(self) -> list[str]:
        return (["repeat", "iteration", "phase"] + [f"x{j}" for j in range(self.d)]
                + ["y", "best_y", "regret", "k_star", "beta_star", "jensen_gap", "wallclock_s"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for r in self.records:
            w.writerow([self.repeat, r.iteration, r.phase, *map(fmt_float, r.x),
                        fmt_float(r.y), fmt_float(r.best_y), fmt_float(r.regret),
                        fmt_float(r.k_star), fmt_float(r.beta_star), fmt_float(r.jensen_gap),
                        fmt_float(r.wallclock_s)])
        return buf.getvalue()


def fmt_float(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return "%.17g" % float(v)


def read_trace_csv(path) -> RegretTrace:
    """Parse a run CSV back into a trace (benchmark and acquisition come from the directory names)."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    d = sum(1 for h in head if h.startswith("x") and h[1:].isdigit())
    opt = lambda s: float(s) if s != "" else None  # noqa: E731
    recs = []
    for row in rows[1:]:
        xs = np.array([float(v) for v in row[3:3 + d]])
        rest = row[3 + d:]
        recs.append(IterationRecord(int(row[1]), row[2], xs, float(rest[0]), float(rest[1]),
                                    float(rest[2]), opt(rest[3]), opt(rest[4]), opt(rest[5]),
                                    opt(rest[6])))
    repeat = int(rows[1][0]) if len(rows) > 1 else 0
    return RegretTrace(path.parent.parent.name, path.parent.name, repeat, d, recs)


class RunError(VesError, RuntimeError):
    """A BO run failed; ``trace`` holds the records collected before the failure."""

    def __init__(self, message: str, trace: RegretTrace):
        super().__init__(message)
        self.trace = trace


def _run_dir(config: ExperimentConfig) -> Path | None:
    if config.output_dir is None:
        return None
    bench = config.benchmark.replace(":", "_")
    return config.output_dir / bench / config.acquisition.kind.value


def _select(kind: AcqKind, config: ExperimentConfig, obs: ObservationSet, repeat: int, it: int):
    """Fit the surrogate and pick the next unit-cube point; returns ``(x, k, beta, gap)``."""
    spec = config.acquisition
    if kind == AcqKind.RANDOM:
        return stream(config.seed_base, repeat, "random-search", it).uniform(size=obs.d), None, None, None
    fit_cfg = replace(config.gp_fit, seed=stream_seed(config.seed_base, repeat, "gp-fit", it))
    gp = fit_map(obs, fit_cfg)
    if kind == AcqKind.LOG_EI:
        return acq.select_log_ei(gp, config.optimizer), None, None, None
    bundle = draw_paths(gp, n_paths=spec.mc_samples, n_features=config.n_features,
                        seed=stream_seed(config.seed_base, repeat, "paths", it), search=config.search)
    if kind == AcqKind.MES:
        return acq.select_mes(gp, bundle, config.optimizer), None, None, None
    sel = acq.ves_inner_loop(gp, bundle, spec, config.optimizer)
    if kind == AcqKind.VES_GAMMA:
        p, m = sel.params[-1], sel.moments[-1]
        return sel.x, p.k, p.beta, m.jensen_gap
    return sel.x, None, None, None


def run_bo(config: ExperimentConfig, repeat_index: int) -> RegretTrace:
    """One seeded BO run: uniform initial design, then ``n_iters`` acquisition steps.

    On failure the partial trace is written (when an output directory is set)
    and a :class:`RunError` carrying it is raised.
    """
    bench = config.resolve_benchmark()
    kind = config.acquisition.kind
    trace = RegretTrace(bench.name, kind.value, repeat_index, bench.d)
    init = stream(config.seed_base, repeat_index, "init-design").uniform(size=(config.n_init, bench.d))
    obs = ObservationSet.empty(bench.d)
    best = -math.inf

    def record(it, phase, u, y, k=None, beta=None, gap=None, secs=None):
        nonlocal best
        best = max(best, y)
        secs = secs if config.record_wallclock else None
        trace.records.append(IterationRecord(it, phase, np.array(u, dtype=float), y, best,
                                             bench.regret(best), k, beta, gap, secs))

    for i, u in enumerate(init):
        y = float(bench.evaluate_unit(u))
        obs = obs.add(u, y)
        record(i, "init", u, y)

    try:
        for t in range(config.n_iters):
            it = config.n_init + t
            start = time.perf_counter()
            u, k, beta, gap = _select(kind, config, obs, repeat_index, it)
            u = np.clip(u, 0.0, 1.0)
            y = float(bench.evaluate_unit(u))
            secs = time.perf_counter() - start
            obs = obs.add(u, y)
            record(it, "bo", u, y, k, beta, gap, secs)
    except VesError as exc:
        trace.error = f"{type(exc).__name__}: {exc}"
        log.error("run %s/%s repeat %d failed at row %d: %s", bench.name, kind.value,
                  repeat_index, len(trace), trace.error)
        _write_trace(config, trace)
        raise RunError(trace.error, trace) from exc
    _write_trace(config, trace)
    return trace


def _write_trace(config: ExperimentConfig, trace: RegretTrace):
    out = _run_dir(config)
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / f"run_{trace.repeat:03d}.csv").write_text(trace.to_csv())
    if trace.error:
        (out / f"run_{trace.repeat:03d}.error").write_text(trace.error + "\n")


@dataclass(frozen=True)
class AggregateRow:
    acquisition: str
    iteration: int
    phase: str
    n_runs: int
    metric: str
    mean: float
    std: float


@dataclass
class SuiteResult:
    config: ExperimentConfig
    traces: list
    failures: list
    aggregate: list

    @property
    def n_completed(self) -> int:
        return len(self.traces)

    def final_regrets(self) -> np.ndarray:
        return np.array([t.final_regret() for t in self.traces])

    def init_regrets(self) -> np.ndarray:
        return np.array([t.init_regret() for t in self.traces])


def aggregate_traces(traces: list, has_optimum: bool = True) -> list[AggregateRow]:
    """Mean and (population) std per iteration of log10 regret, or of ``-best_y`` without ``f*``."""
    if not traces:
        return []
    n = min(len(t) for t in traces)
    reg = np.stack([t.regret[:n] for t in traces])
    if has_optimum:
        metric, vals = "log10_regret", np.log10(np.maximum(reg, REGRET_FLOOR))
    else:
        metric, vals = "neg_best_y", reg
    name = traces[0].acquisition
    phases = [r.phase for r in traces[0].records[:n]]
    return [AggregateRow(name, i, phases[i], len(traces), metric, float(vals[:, i].mean()),
                         float(vals[:, i].std())) for i in range(n)]


AGG_HEADER = ["acquisition", "iteration", "phase", "n_runs", "metric", "mean", "std"]


def aggregate_to_csv(rows: list[AggregateRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_HEADER)
    for r in rows:
        w.writerow([r.acquisition, r.iteration, r.phase, r.n_runs, r.metric,
                    fmt_float(r.mean), fmt_float(r.std)])
    return buf.getvalue()


def read_aggregate_csv(path) -> list[AggregateRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [AggregateRow(r["acquisition"], int(r["iteration"]), r["phase"], int(r["n_runs"]),
                             r["metric"], float(r["mean"]), float(r["std"])) for r in reader]


def _run_one(args):
    config, repeat = args
    try:
        return run_bo(config, repeat)
    except RunError as exc:
        return exc


def run_suite(config: ExperimentConfig) -> SuiteResult:
    """Run ``n_repeats`` independent repeats and aggregate the completed ones.

    Repeats run in a process pool when ``config.workers > 1``.  Failed repeats
    are collected in ``failures``; the aggregate's ``n_runs`` column shows how
    many runs it covers.
    """
    jobs = [(config, r) for r in range(config.n_repeats)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    traces = [r for r in results if isinstance(r, RegretTrace)]
    failures = [r for r in results if isinstance(r, RunError)]
    has_opt = config.resolve_benchmark().optimum_value is not None
    rows = aggregate_traces(traces, has_opt)
    out = _run_dir(config)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "aggregate.csv").write_text(aggregate_to_csv(rows))
    return SuiteResult(config, traces, failures, rows)


# ---------------------------------------------------------------------------
# KS equivalence study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KsRow:
    iteration: int
    statistic_d: float
    p_value: float
    passed: bool


@dataclass
class KsReport:
    methods: tuple
    rows: list
    alpha: float = 0.05

    @property
    def passing_rate(self) -> float:
        return sum(r.passed for r in self.rows) / len(self.rows) if self.rows else float("nan")

    @property
    def p_values(self) -> np.ndarray:
        return np.array([r.p_value for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "D", "p", "pass"])
        for r in self.rows:
            w.writerow([r.iteration, fmt_float(r.statistic_d), fmt_float(r.p_value), int(r.passed)])
        return buf.getvalue()


def ks_compare_traces(a: list, b: list, alpha: float = 0.05, methods=("a", "b")) -> KsReport:
    """Per-iteration two-sample KS tests on the values observed at each BO step."""
    if len(a) != len(b) or not a:
        raise ConfigError(f"KS study needs equal, non-zero completed run counts (got {len(a)} and {len(b)})")
    rows = []
    n = min(len(t) for t in a + b)
    for i in range(n):
        if a[0].records[i].phase != "bo":
            continue
        ya = [t.records[i].y for t in a]
        yb = [t.records[i].y for t in b]
        res = ks_two_sample(ya, yb)
        rows.append(KsRow(a[0].records[i].iteration, res.statistic_d, res.p_value, res.p_value >= alpha))
    return KsReport(tuple(methods), rows, alpha)


def ks_equivalence_study(config: ExperimentConfig, methods=(AcqKind.LOG_EI, AcqKind.VES_EXP),
                         alpha: float = 0.05, suites: tuple | None = None) -> KsReport:
    """Compare two acquisitions run from independent seeds with per-iteration KS tests.

    The first method uses ``config.seed_base``; the second uses a shifted base so
    the two never share random streams (this also holds when both methods are
    the same).  Precomputed ``suites`` may be passed to skip the runs.
    """
    kinds = tuple(AcqKind(m) for m in methods)
    if suites is None:
        first = run_suite(config.with_acquisition(kinds[0]))
        second_cfg = replace(config.with_acquisition(kinds[1]),
                             seed_base=config.seed_base + KS_SEED_OFFSET)
        if config.output_dir is not None and kinds[0] == kinds[1]:
            second_cfg = replace(second_cfg, output_dir=config.output_dir / "replicate")
        suites = (first, run_suite(second_cfg))
    a, b = suites
    report = ks_compare_traces(a.traces, b.traces, alpha, tuple(k.value for k in kinds))
    if config.output_dir is not None:
        config.output_dir.mkdir(parents=True, exist_ok=True)
        (config.output_dir / "ks_report.csv").write_text(report.to_csv())
    return report


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

def emit_plot(aggregate: list[AggregateRow], output) -> Path:
    """Mean curves with one-std bands per acquisition, written as SVG.

    Only iterations present in every series are drawn; disjoint series are an error.
    """
    if not aggregate:
        raise ConfigError("nothing to plot")
    series: dict[str, dict[int, AggregateRow]] = {}
    for r in aggregate:
        series.setdefault(r.acquisition, {})[r.iteration] = r
    common = sorted(set.intersection(*(set(s) for s in series.values())))
    if not common:
        raise ConfigError("the series share no iterations")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    metric = aggregate[0].metric
    with matplotlib.rc_context({"svg.fonttype": "none", "svg.hashsalt": "ves-bo"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        it = np.array(common)
        for name, rows in series.items():
            mean = np.array([rows[i].mean for i in common])
            std = np.array([rows[i].std for i in common])
            (line,) = ax.plot(it, mean, label=name, lw=1.5)
            line.set_gid(f"series-{name}")
            band = ax.fill_between(it, mean - std, mean + std, alpha=0.2, color=line.get_color())
            band.set_gid(f"band-{name}")
        ax.set_xlabel("evaluation")
        ax.set_ylabel("log10 simple regret" if metric == "log10_regret" else "negative best value")
        ax.legend()
        fig.tight_layout()
        output = Path(output)
        output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(output, format="svg", metadata={"Date": None})
        plt.close(fig)
    return output
