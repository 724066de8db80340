import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from cpldc.cli import DEFAULT_SWEEPS, RunConfig, SyntheticSpec, generate_synthetic, main, run_single, run_sweep
from cpldc.kernel import KernelParams
from cpldc.metrics import modularity, nmi, pwf
from cpldc.network import load_linqs

GOLDEN = Path(__file__).parent / "golden"
GOLDEN_SPEC = '{"n": 6, "K": 2, "d": 3, "out_degree": 2, "seed": 5}'
SMALL = SyntheticSpec(n=30, K=2, d=3, out_degree=4, seed=2)
# run-specific fields that legitimately differ from the stored golden report
VOLATILE = {"wall_time"}
VOLATILE_CONFIG = {"out", "content", "cites"}


def _close(a, b, path="report"):
    """Structural equality with a relative tolerance on floats."""
    assert type(a) is type(b) or {type(a), type(b)} <= {int, float}, path
    if isinstance(a, dict):
        assert sorted(a) == sorted(b), path
        for key in a:
            _close(a[key], b[key], f"{path}.{key}")
    elif isinstance(a, list):
        assert len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            _close(x, y, f"{path}[{i}]")
    elif isinstance(a, float):
        assert a == pytest.approx(b, rel=1e-6), path
    else:
        assert a == b, path


def test_generate_matches_golden_files(tmp_path):
    for out in (tmp_path / "a", tmp_path / "b"):
        assert main(["--generate", GOLDEN_SPEC, "--out", str(out)]) == 0
    for name in ("synthetic.content", "synthetic.cites", "truth.json"):
        first = (tmp_path / "a" / name).read_bytes()
        assert first == (tmp_path / "b" / name).read_bytes()
        assert first == (GOLDEN / name).read_bytes()


def test_generated_dataset_round_trips(tmp_path):
    assert main(["--generate", '{"n": 50, "K": 3, "seed": 1}', "--out", str(tmp_path)]) == 0
    network, content = load_linqs(tmp_path / "synthetic.content", tmp_path / "synthetic.cites")
    truth = json.loads((tmp_path / "truth.json").read_text())
    assert network.n == 50 and content.n == 50
    assert network.labels.tolist() == truth["labels"]
    np.testing.assert_allclose(np.sum(truth["gamma"], axis=1), 1.0, atol=1e-12)
    assert len(truth["t"]) == 50 and len(truth["z"]) == network.num_links


def test_report_and_trace_match_golden(tmp_path):
    for name in ("synthetic.content", "synthetic.cites"):
        shutil.copy(GOLDEN / name, tmp_path / name)
    args = ["--content", str(tmp_path / "synthetic.content"), "--cites", str(tmp_path / "synthetic.cites"),
            "--k", "2", "--max-iters", "5", "--out", str(tmp_path / "run")]
    assert main(args) == 0
    got = json.loads((tmp_path / "run" / "report.json").read_text())
    want = json.loads((GOLDEN / "report.json").read_text())
    for report in (got, want):
        for key in VOLATILE:
            report.pop(key)
        for key in VOLATILE_CONFIG:
            report["config"].pop(key)
    _close(got, want)

    with open(tmp_path / "run" / "trace.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    with open(GOLDEN / "trace.csv", newline="") as fh:
        golden_rows = list(csv.reader(fh))
    assert rows[0] == golden_rows[0] == ["iteration", "bound"]
    assert [r[0] for r in rows] == [r[0] for r in golden_rows]
    np.testing.assert_allclose([float(r[1]) for r in rows[1:]], [float(r[1]) for r in golden_rows[1:]], rtol=1e-6)


def test_report_is_self_contained(tmp_path):
    cfg = RunConfig(synthetic=SMALL, max_iters=15, out=str(tmp_path))
    report = run_single(cfg)
    stored = json.loads((tmp_path / "report.json").read_text())
    again = run_single(RunConfig.from_dict(stored["config"]))
    for key, value in report["metrics"].items():
        assert abs(again["metrics"][key] - value) <= 1e-10
    # metrics are recomputable from the stored assignment
    network, _, _ = generate_synthetic(SMALL)
    assignment = stored["assignment"]
    assert stored["metrics"]["nmi"] == pytest.approx(nmi(network.labels, assignment), abs=1e-12)
    assert stored["metrics"]["pwf"] == pytest.approx(pwf(network.labels, assignment), abs=1e-12)
    assert stored["metrics"]["modularity"] == pytest.approx(modularity(network, assignment), abs=1e-12)
    assert "gamma" not in stored
    assert stored["K"] == 2  # defaults to the number of labels


def test_emit_gamma(tmp_path):
    report = run_single(RunConfig(synthetic=SMALL, max_iters=3, emit_gamma=True))
    gamma = np.array(report["gamma"])
    assert gamma.shape == (30, 2)
    np.testing.assert_allclose(gamma.sum(axis=1), 1.0, atol=1e-12)


def test_sweep_csv_layout(tmp_path):
    cfg = RunConfig(synthetic=SMALL, max_iters=5, sweep_param="sigma2", sweep_values=(1.0, 5.0, 10.0),
                    out=str(tmp_path))
    reports, _ = run_sweep(cfg)
    with open(tmp_path / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["param", "value", "status", "nmi", "pwf", "modularity", "final_bound", "iterations"]
    assert len(rows) == 3
    assert [float(r["value"]) for r in rows] == [1.0, 5.0, 10.0]
    for i, (row, report) in enumerate(zip(rows, reports)):
        assert row["status"] == "ok"
        assert float(row["final_bound"]) == report["final_bound"]
        assert report["config"]["seed"] == i
        assert report["config"]["kernel"]["sigma2"] == float(row["value"])
        assert (tmp_path / f"point_{i}" / "report.json").exists()


def test_single_value_sweep_equals_run_single():
    base = RunConfig(synthetic=SMALL, max_iters=10, kernel=KernelParams(sigma2=2.0))
    single = run_single(base)
    reports, _ = run_sweep(RunConfig(synthetic=SMALL, max_iters=10, sweep_param="sigma2", sweep_values=(2.0,)))
    assert reports[0]["assignment"] == single["assignment"]
    assert reports[0]["final_bound"] == single["final_bound"]
    assert reports[0]["metrics"] == single["metrics"]


def test_failed_sweep_points_are_flagged_not_dropped(tmp_path):
    # sigma2 <= 0 is rejected by the kernel for that point only
    cfg = RunConfig(synthetic=SMALL, max_iters=3, sweep_param="sigma2", sweep_values=(2.0, -1.0, 5.0),
                    out=str(tmp_path))
    reports, rows = run_sweep(cfg)
    assert [r[2] for r in rows] == ["ok", "error", "ok"]
    assert reports[1] is None
    with open(tmp_path / "sweep.csv", newline="") as fh:
        assert len(list(csv.DictReader(fh))) == 3


def test_parallel_sweep_matches_serial():
    cfg = RunConfig(synthetic=SMALL, max_iters=5, sweep_param="theta", sweep_values=(0.5, 2.0))
    serial, _ = run_sweep(cfg, jobs=1)
    parallel, _ = run_sweep(cfg, jobs=2)
    for a, b in zip(serial, parallel):
        assert a["assignment"] == b["assignment"] and a["final_bound"] == b["final_bound"]


def test_missing_file_gives_error_json(tmp_path, capsys):
    code = main(["--content", str(tmp_path / "nope.content"), "--cites", str(tmp_path / "nope.cites"),
                 "--out", str(tmp_path)])
    assert code == 1
    error = json.loads((tmp_path / "error.json").read_text())
    assert error["error"] == "FileNotFoundError"
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"


@pytest.mark.parametrize("argv", [
    [],  # no dataset
    ["--content", "x.content"],  # cites missing
    ["--synthetic", '{"n": 10}', "--sweep", "k="],  # empty sweep
    ["--synthetic", '{"bogus": 1}'],
])
def test_invalid_configs_exit_nonzero(argv):
    assert main(argv) == 1


def test_default_sweep_grid_and_module_entry_point(tmp_path):
    spec = json.dumps({"n": 20, "K": 2, "d": 3, "out_degree": 3, "seed": 4})
    proc = subprocess.run(
        [sys.executable, "-m", "cpldc", "--synthetic", spec, "--max-iters", "2", "--sweep", "theta",
         "--out", str(tmp_path)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    with open(tmp_path / "sweep.csv", newline="") as fh:
        values = [float(r["value"]) for r in csv.DictReader(fh)]
    assert values == [0.1, 0.5, 1.0, 2.0, 5.0]


@pytest.mark.slow
def test_theta_sweep_bound_and_nmi_trend_together():
    cfg = RunConfig(synthetic=SyntheticSpec(seed=0), max_iters=300, sweep_param="theta",
                    sweep_values=tuple(DEFAULT_SWEEPS["theta"]))
    reports, _ = run_sweep(cfg)
    bounds = [r["final_bound"] for r in reports]
    nmis = [r["metrics"]["nmi"] for r in reports]
    assert stats.spearmanr(bounds, nmis).statistic > 0
