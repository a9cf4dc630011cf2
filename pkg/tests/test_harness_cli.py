import math
import subprocess
import sys

import pytest
import yaml

from dpsummary.cli import main
from dpsummary.harness import (METRIC_FIELDS, ExperimentConfig, pct_increase, read_metrics,
                               run_experiment, summarize)

SMALL = {
    "owner_sizes": [30, 30, 30, 30], "validation_size": 40, "sizes": [5, 10], "repetitions": 5,
    "d": 32, "seed": 7, "write_traces": True,
}


def write_cfg(path, **over):
    path.write_text(yaml.safe_dump({**SMALL, **over}))
    return path


def test_config_rejects_bad_values(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(sizes=[0])
    with pytest.raises(ValueError):
        ExperimentConfig(algorithms=["magic"])
    with pytest.raises(ValueError):
        ExperimentConfig(data="csv")
    bad = tmp_path / "list.yaml"
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ValueError):
        ExperimentConfig.from_yaml(bad)


def test_metrics_schema_and_rows(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    path = run_experiment(cfg, tmp_path)
    rows = read_metrics(path)
    assert path.read_text().splitlines()[0] == ",".join(METRIC_FIELDS)
    assert len(rows) == 2 * 5 * 3
    for r in rows:
        if r["alg"] == "greedy":
            assert float(r["pct_vs_greedy"]) == 0.0 and r["eps"] == "inf"
        if r["alg"] == "uniform":
            assert int(r["accessed"]) == int(r["size"])
        if r["alg"] == "private":
            assert int(r["accessed"]) <= 4 * int(r["size"])
            assert 0 < float(r["eps"]) < math.inf
    assert len(list((tmp_path / "traces").iterdir())) == 10
    stats = summarize(rows)
    assert set(stats) == {(a, s) for a in ("private", "greedy", "uniform") for s in (5, 10)}


def test_failing_algorithm_gives_missing_row(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "owner_sizes": [2, 2], "sizes": [5],
                                      "repetitions": 1, "algorithms": ["greedy", "uniform"]})
    rows = read_metrics(run_experiment(cfg, tmp_path))
    uni = [r for r in rows if r["alg"] == "uniform"][0]
    assert all(uni[k] == "NA" for k in METRIC_FIELDS[3:])
    meta = (tmp_path / "metadata.json").read_text()
    assert "DataError" in meta


def test_pct_increase():
    assert pct_increase(1.5, 1.0) == pytest.approx(50.0)


def test_run_is_byte_identical_and_parallel_matches(tmp_path):
    cfg_path = write_cfg(tmp_path / "c.yaml", repetitions=2)
    outs = []
    for name, workers in (("a", "1"), ("b", "1"), ("c", "2")):
        assert main(["run", str(cfg_path), "--out", str(tmp_path / name), "--workers", workers]) == 0
        outs.append(tmp_path / name)
    for f in ("metrics.csv", "traces/private_p5_rep1.csv"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() == (outs[2] / f).read_bytes()
    assert (outs[0] / "metadata.json").read_bytes() == (outs[1] / "metadata.json").read_bytes()


def test_seed_override_changes_results(tmp_path):
    cfg_path = write_cfg(tmp_path / "c.yaml", repetitions=1, sizes=[5])
    main(["run", str(cfg_path), "--out", str(tmp_path / "a")])
    main(["run", str(cfg_path), "--out", str(tmp_path / "b"), "--seed", "8"])
    assert (tmp_path / "a/metrics.csv").read_bytes() != (tmp_path / "b/metrics.csv").read_bytes()


def test_dump_ledger(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path / "c.yaml", repetitions=1, sizes=[5], mode="noise_off")
    assert main(["run", str(cfg_path), "--out", str(tmp_path / "o"), "--dump-ledger"]) == 0
    out = capsys.readouterr().out
    assert "owners: events=0" in out and "greedy" in out


def test_compose_presets(capsys):
    assert main(["compose", "--preset", "summary"]) == 0
    out = capsys.readouterr().out
    line = [l for l in out.splitlines() if l.startswith("advanced (log 1/d~)")][0]
    assert abs(float(line.split()[-1]) - 0.043) <= 0.002
    assert main(["compose", "--preset", "validation"]) == 0
    out = capsys.readouterr().out
    best = float([l for l in out.splitlines() if l.startswith("composed")][0].split()[-1])
    assert 1.0 <= best <= 2.0 and "reported figure:       1.4" in out


def test_compose_explicit(capsys):
    assert main(["compose", "--eps", "0.01", "--iters", "1656", "--delta", "0.01"]) == 0
    out = capsys.readouterr().out
    assert "advanced (log 1/d~):   1.3178" in out


def test_bad_arguments_exit_nonzero(tmp_path):
    assert main(["compose"]) == 2
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "x.yaml", "--mode", "loud"])
    assert exc.value.code != 0


def test_oracle_subcommand(capsys):
    assert main(["oracle", "--instances", "3", "--n-points", "7", "--p", "2"]) == 0
    assert "violations: 0" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dpsummary", "compose", "--preset", "summary"],
                          capture_output=True, text=True, check=True)
    assert "composed (min)" in proc.stdout
