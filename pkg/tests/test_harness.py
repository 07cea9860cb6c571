import csv
import re
from dataclasses import replace

import numpy as np
import pytest

from ves_bo import harness as H
from ves_bo.acq_optimizer import OptimizerConfig
from ves_bo.acquisition import AcqKind, AcquisitionSpec
from ves_bo.errors import ConfigError
from ves_bo.posterior_paths import MaxSearchConfig
from ves_bo.rng import stream

FAST_OPT = OptimizerConfig(n_raw=128, n_starts=2, max_local_steps=10)
FAST_SEARCH = MaxSearchConfig(n_candidates=128, refine_steps=3)


def fast_config(tmp_path=None, **kw):
    base = dict(benchmark="branin", n_init=6, n_iters=3, n_repeats=2, optimizer=FAST_OPT,
                search=FAST_SEARCH, acquisition=AcquisitionSpec(mc_samples=16, inner_iters=2),
                output_dir=tmp_path)
    base.update(kw)
    return H.ExperimentConfig(**base)


def test_header_schema(tmp_path):
    trace = H.run_bo(fast_config(tmp_path), 0)
    text = (tmp_path / "branin" / "ves_gamma" / "run_000.csv").read_text()
    assert text.splitlines()[0] == ("repeat,iteration,phase,x0,x1,y,best_y,regret,"
                                    "k_star,beta_star,jensen_gap,wallclock_s")
    assert len(trace) == 9


def test_init_only_run():
    trace = H.run_bo(fast_config(n_init=20, n_iters=0), 0)
    assert len(trace) == 20
    assert all(r.phase == "init" for r in trace.records)
    assert trace.final_regret() == trace.init_regret()


@pytest.mark.parametrize("kind", list(AcqKind))
def test_every_acquisition_runs_and_monotone(kind):
    trace = H.run_bo(fast_config().with_acquisition(kind), 1)
    best = trace.best_y
    assert np.all(np.diff(best) >= 0)
    assert np.all(np.diff(trace.regret) <= 0) and np.all(trace.regret >= -1e-6)
    bo = [r for r in trace.records if r.phase == "bo"]
    if kind == AcqKind.VES_GAMMA:
        assert all(r.k_star is not None and r.beta_star is not None for r in bo)
    else:
        assert all(r.k_star is None and r.beta_star is None for r in bo)
    assert all(r.wallclock_s is not None and r.wallclock_s >= 0 for r in bo)


def test_float_format_17_digits(tmp_path):
    H.run_bo(fast_config(tmp_path), 0)
    rows = list(csv.reader((tmp_path / "branin" / "ves_gamma" / "run_000.csv").open()))
    y = rows[1][5]
    assert float(y) == float("%.17g" % float(y))
    assert y == "%.17g" % float(y)
    assert rows[1][8] == ""  # init rows have no k_star


def test_byte_identical_reruns(tmp_path):
    cfg_a = fast_config(tmp_path / "a", record_wallclock=False)
    cfg_b = fast_config(tmp_path / "b", record_wallclock=False)
    H.run_bo(cfg_a, 0)
    H.run_bo(cfg_b, 0)
    a = (tmp_path / "a" / "branin" / "ves_gamma" / "run_000.csv").read_bytes()
    b = (tmp_path / "b" / "branin" / "ves_gamma" / "run_000.csv").read_bytes()
    assert a == b


def test_repeats_use_distinct_streams():
    a = H.run_bo(fast_config(n_iters=0), 0)
    b = H.run_bo(fast_config(n_iters=0), 1)
    assert not np.array_equal(np.stack([r.x for r in a.records]), np.stack([r.x for r in b.records]))


def test_streams_independent_of_new_purposes():
    first = stream(3, 1, "init-design").uniform(size=5)
    stream(3, 1, "something-new").uniform(size=5)
    assert np.array_equal(first, stream(3, 1, "init-design").uniform(size=5))
    assert not np.array_equal(first, stream(3, 2, "init-design").uniform(size=5))


def test_suite_single_repeat_aggregate(tmp_path):
    res = H.run_suite(fast_config(tmp_path, n_repeats=1))
    assert len(res.aggregate) == 9
    assert all(r.std == 0.0 and r.n_runs == 1 for r in res.aggregate)
    expected = np.log10(np.maximum(res.traces[0].regret, H.REGRET_FLOOR))
    assert np.allclose([r.mean for r in res.aggregate], expected)
    back = H.read_aggregate_csv(tmp_path / "branin" / "ves_gamma" / "aggregate.csv")
    assert back == res.aggregate


def test_suite_reproducible_means():
    cfg = fast_config().with_acquisition("log_ei")
    a, b = H.run_suite(cfg), H.run_suite(cfg)
    assert [r.mean for r in a.aggregate] == [r.mean for r in b.aggregate]


def test_suite_without_optimum_reports_negative_best():
    res = H.run_suite(fast_config(benchmark="gp:2:0.25:0", n_repeats=1).with_acquisition("log_ei"))
    assert res.aggregate[0].metric == "neg_best_y"
    assert res.aggregate[-1].mean == pytest.approx(-res.traces[0].best_y[-1])


def test_partial_failure_recorded(tmp_path, monkeypatch):
    real = H._select

    def flaky(kind, config, obs, repeat, it):
        if repeat == 1 and it == 7:
            from ves_bo.errors import OptimizationError
            raise OptimizationError("injected")
        return real(kind, config, obs, repeat, it)

    monkeypatch.setattr(H, "_select", flaky)
    res = H.run_suite(fast_config(tmp_path).with_acquisition("log_ei"))
    assert res.n_completed == 1 and len(res.failures) == 1
    assert len(res.failures[0].trace) == 7
    assert res.aggregate[0].n_runs == 1
    out = tmp_path / "branin" / "log_ei"
    assert (out / "run_001.error").read_text().startswith("OptimizationError")
    assert len((out / "run_001.csv").read_text().splitlines()) == 8


def test_trace_csv_round_trip(tmp_path):
    trace = H.run_bo(fast_config(tmp_path), 0)
    back = H.read_trace_csv(tmp_path / "branin" / "ves_gamma" / "run_000.csv")
    assert back.to_csv() == trace.to_csv()


def test_ks_self_comparison_and_report(tmp_path):
    cfg = fast_config(tmp_path, n_iters=4, n_repeats=4)
    rep = H.ks_equivalence_study(cfg, methods=("log_ei", "log_ei"))
    assert len(rep.rows) == 4
    text = (tmp_path / "ks_report.csv").read_text().splitlines()
    assert text[0] == "iteration,D,p,pass"
    assert all(re.fullmatch(r"\d+,[0-9.e-]+,[0-9.e-]+,[01]", line) for line in text[1:])
    assert (tmp_path / "replicate").exists()


def test_ks_unequal_counts():
    a = H.run_suite(fast_config(n_repeats=2, n_iters=1).with_acquisition("random"))
    b = H.run_suite(fast_config(n_repeats=3, n_iters=1).with_acquisition("random"))
    with pytest.raises(ConfigError):
        H.ks_equivalence_study(fast_config(), suites=(a, b))


def test_plot_svg(tmp_path):
    rows = []
    for kind in ("log_ei", "random"):
        rows += H.run_suite(fast_config(n_repeats=2).with_acquisition(kind)).aggregate
    out = H.emit_plot(rows, tmp_path / "p.svg")
    svg = out.read_text()
    assert svg.startswith("<?xml")
    assert 'id="series-log_ei"' in svg and 'id="series-random"' in svg
    assert 'id="band-log_ei"' in svg
    assert ">log_ei<" in svg and ">random<" in svg  # legend text stays text


def test_plot_single_series(tmp_path):
    rows = [H.AggregateRow("mes", i, "bo", 3, "log10_regret", -0.01 * i, 0.1) for i in range(120)]
    svg = H.emit_plot(rows, tmp_path / "one.svg").read_text()
    assert svg.count('id="series-mes"') == 1 and svg.count('id="band-mes"') == 1


def test_plot_errors(tmp_path):
    with pytest.raises(ConfigError):
        H.emit_plot([], tmp_path / "x.svg")
    rows = [H.AggregateRow("a", 0, "init", 1, "m", 0, 0), H.AggregateRow("b", 5, "bo", 1, "m", 0, 0)]
    with pytest.raises(ConfigError):
        H.emit_plot(rows, tmp_path / "x.svg")


def test_config_validation():
    with pytest.raises(ConfigError):
        H.ExperimentConfig("branin", n_init=1)
    with pytest.raises(ConfigError):
        H.ExperimentConfig("branin", n_repeats=0)
    with pytest.raises(ConfigError):
        H.run_bo(H.ExperimentConfig("no-such-function"), 0)


def test_parallel_matches_serial():
    cfg = fast_config(n_repeats=2).with_acquisition("log_ei")
    serial = H.run_suite(replace(cfg, record_wallclock=False))
    par = H.run_suite(replace(cfg, record_wallclock=False, workers=2))
    assert [t.to_csv() for t in serial.traces] == [t.to_csv() for t in par.traces]
