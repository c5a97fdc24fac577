import math

import numpy as np
import pytest

from kgt.metrics import CSV_COLUMNS, MetricsRecord
from kgt.runner import (
    ConfigError,
    RunConfig,
    SweepConfig,
    compare_report,
    execute,
    execute_sweep,
    mean_trace,
    parse_config,
    parse_config_text,
    rounds_to_threshold,
    run_repetitions,
)

MINIMAL = """
[problem]
n = 10
zeta_bar = 10
[topology]
topology = ring
[algorithm]
variant = kgt
K = 20
T = 250
[noise]
sigma = 1
"""


def test_minimal_config():
    cfg = parse_config_text(MINIMAL)
    assert isinstance(cfg, RunConfig)
    assert (cfg.variant, cfg.n, cfg.K, cfg.T, cfg.zeta_bar, cfg.sigma) == ("kgt", 10, 20, 250, 10.0, 1.0)
    assert cfg.repetitions == 3
    assert cfg.eta_c == 1e-3 and cfg.eta_s == 1.0


def test_unknown_key_names_key_and_line():
    with pytest.raises(ConfigError, match=r"line 3: unknown key 'etaa_c'"):
        parse_config_text("variant = kgt\n[algorithm]\netaa_c = 0.1\n")


@pytest.mark.parametrize("text,pattern", [
    ("K = 3\n", "missing required key 'variant'"),
    ("variant = kgt\nK = three\n", "line 2: K"),
    ("variant = kgt\nK = 2.5\n", "line 2: K"),
    ("variant = kgt\n[problem]\nK = 2\n", "line 3: key 'K' belongs in"),
    ("variant = kgt\nK = 2\nK = 3\n", "line 3: duplicate"),
    ("variant = kgt\n[bogus]\n", "line 2: unknown section"),
    ("variant = kgt\njunk\n", "line 2: expected key = value"),
    ("variant = kgt\nrepetitions = 0\n", "line 2: repetitions"),
    ("variant = kgt\neta = 0.1\neta_c = 0.1\n", "line 3: give either"),
    ("variant = kgt\ntopology = file:/nonexistent/w.txt\n", "line 2: topology file not found"),
    ("variant = gt\ncorrection_init = zero\n", "correction_init"),
    ("variant = kgt\nkind = quadratic\nc = 1\n", "line 3: c only"),
])
def test_parse_errors(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config_text(text)


def test_eta_is_split_over_eta_s():
    cfg = parse_config_text("variant = kgt\neta = 0.01\neta_s = 0.5\n")
    assert cfg.eta_c == pytest.approx(0.02)
    assert cfg.hyperparams().eta == pytest.approx(0.01)


def test_nonconvex_default_c():
    assert parse_config_text("variant = kgt\nkind = nonconvex\n").c == 1.0


def test_topology_file_relative_to_config(tmp_path):
    np.savetxt(tmp_path / "w.txt", np.full((4, 4), 0.25))
    (tmp_path / "c.ini").write_text("variant = kgt\nn = 4\ntopology = file:w.txt\n")
    cfg = parse_config(tmp_path / "c.ini")
    assert cfg.build_topology().p == 1.0
    (tmp_path / "bad.ini").write_text("variant = kgt\nn = 5\ntopology = file:w.txt\n")
    with pytest.raises(ConfigError, match="line 3"):
        parse_config(tmp_path / "bad.ini")


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.ini")


def test_sweep_parse_and_limit():
    sw = parse_config_text("[algorithm]\nvariant = kgt\n[sweep]\nK = 1, 20\nzeta_bar = 0, 1, 10\n")
    assert isinstance(sw, SweepConfig) and sw.size == 6
    assert {(c.K, c.zeta_bar) for c in sw.grid()} == {(k, z) for k in (1, 20) for z in (0, 1, 10)}
    with pytest.raises(ConfigError, match="limit"):
        parse_config_text("variant = kgt\n[sweep]\nmax_grid = 5\nK = 1, 2, 3\nT = 1, 2\n")
    with pytest.raises(ConfigError, match="line 3"):
        parse_config_text("variant = kgt\n[sweep]\nrepetitions = 1, 2\n")


def test_sweep_drops_inapplicable_inits():
    sw = parse_config_text("variant = kgt\ncorrection_init = zero\n[sweep]\nvariant = kgt, gt\n")
    by = {c.variant: c for c in sw.grid()}
    assert by["kgt"].correction_init == "zero" and by["gt"].correction_init is None


def _rec(t, g):
    return MetricsRecord(t, t, t, g, f_gap=g, consensus=0.0, client_drift=0.0, gamma=0.0, potential=g)


def test_rounds_to_threshold():
    trace = [_rec(t, 10.0 / (t + 1)) for t in range(10)]
    assert rounds_to_threshold(trace, "grad_norm_sq", 100.0) == 0
    assert rounds_to_threshold(trace, "grad_norm_sq", 2.0) == 4
    assert rounds_to_threshold(trace, "f_gap", 0.0) is None
    with pytest.raises(KeyError):
        rounds_to_threshold(trace, "loss", 1.0)


def test_rounds_to_threshold_noisy_run():
    cfg = RunConfig("kgt", K=2, T=30, x0=1.0, repetitions=1)
    s = run_repetitions(cfg)
    assert rounds_to_threshold(s.records, "grad_norm_sq", 0.0) is None
    assert rounds_to_threshold(s.records, "grad_norm_sq", math.inf) == 0


def test_mean_trace_is_arithmetic_mean():
    a = [_rec(t, 1.0) for t in range(3)]
    b = [_rec(t, 3.0) for t in range(3)]
    m = mean_trace([a, b])
    assert [r.grad_norm_sq for r in m] == [2.0] * 3
    assert mean_trace([a, b[:2]])[-1].round == 1


def test_single_noiseless_repetition_mean_equals_trace(tmp_path):
    cfg = RunConfig("kgt", K=3, T=20, sigma=0.0, zeta_bar=2.0, repetitions=1)
    execute(cfg, tmp_path)
    assert (tmp_path / "trace_mean.csv").read_bytes() == (tmp_path / "trace_rep0.csv").read_bytes()


def test_execute_outputs_and_determinism(tmp_path):
    cfg = RunConfig("periodical_gt", K=4, T=25, zeta_bar=3.0, thresholds=(1.0, 1e-30),
                    collect_local_metrics=True)
    for d in ("a", "b"):
        execute(cfg, tmp_path / d)
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["local_drift_rep0.csv", "local_drift_rep1.csv", "local_drift_rep2.csv", "summary.csv",
                     "trace_mean.csv", "trace_rep0.csv", "trace_rep1.csv", "trace_rep2.csv"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    header = (tmp_path / "a" / "trace_mean.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    summary = (tmp_path / "a" / "summary.csv").read_text().splitlines()
    assert "rounds_to_grad_norm_sq<=1" in summary[0] and "rounds_to_grad_norm_sq<=1e-30" in summary[0]
    assert len((tmp_path / "a" / "local_drift_rep0.csv").read_text().splitlines()) == 1 + 25 * 4


def test_repetitions_use_offset_seeds():
    s = run_repetitions(RunConfig("kgt", K=2, T=5, noise_seed=7, repetitions=2))
    t = run_repetitions(RunConfig("kgt", K=2, T=5, noise_seed=8, repetitions=1))
    assert [r.row() for r in s.traces[1]] == [r.row() for r in t.traces[0]]


def test_divergence_is_recorded(tmp_path):
    cfg = RunConfig("dsgd", K=5, eta_c=2.0, T=200, repetitions=2)
    s = execute(cfg, tmp_path)
    assert s.status == "diverged" and s.diverged_round is not None
    row = (tmp_path / "summary.csv").read_text().splitlines()[1]
    assert ",diverged," in row


def test_full_method_sweep(tmp_path):
    text = """
    [problem]
    n = 10
    [algorithm]
    variant = kgt
    T = 10
    [runner]
    repetitions = 1
    [sweep]
    variant = dsgd, kgt, periodical_gt, periodical_gt_fullgrad, large_batch_gt
    zeta_bar = 0, 1, 10
    K = 1, 20
    """
    sw = parse_config_text(text)
    summaries = execute_sweep(sw, tmp_path / "a")
    assert len(summaries) == 30
    lines = (tmp_path / "a" / "summary.csv").read_text().splitlines()
    assert len(lines) == 31
    comp = (tmp_path / "a" / "comparison.csv").read_text().splitlines()
    assert len(comp) == 31 and "robustness_ratio" in comp[0]
    # grid-point outputs do not depend on execution order
    reordered = SweepConfig(sw.base, dict(reversed(list(sw.axes.items()))))
    again = execute_sweep(reordered, tmp_path / "b")
    key = lambda s: (s.config.variant, s.config.zeta_bar, s.config.K)
    rows_a = {key(s): [r.row() for r in s.records] for s in summaries}
    rows_b = {key(s): [r.row() for r in s.records] for s in again}
    assert rows_a == rows_b


def test_compare_report():
    s = run_repetitions(RunConfig("kgt", K=2, T=10, zeta_bar=1.0, repetitions=1))
    table = compare_report([s, s])
    assert len(table) == 2 and table[0]["robustness_ratio"] == 1.0
    with pytest.raises(ValueError):
        compare_report([s])
    other = run_repetitions(RunConfig("kgt", K=2, T=10, n=5, repetitions=1))
    with pytest.raises(ValueError):
        compare_report([s, other])
