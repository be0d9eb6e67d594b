import csv
import json

import numpy as np
import pytest

from etsafe.cli import main, oracle_trials
from etsafe.experiment import ConfigError, bundled_config, load_config


def bundled(name):
    return json.loads(bundled_config(name).read_text())


def write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg, indent=2))
    return str(p)


def short(name, t_final):
    cfg = bundled(name)
    cfg["sim"]["t_final"] = t_final
    cfg.pop("output_dir")
    return cfg


def test_sigma_out_of_range_reports_line(tmp_path, capsys):
    cfg = bundled("counterexample_naive.json")
    cfg["trigger"]["sigma"] = 1.5
    path = write(tmp_path, "bad.json", cfg)
    assert main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    line = next(i + 1 for i, l in enumerate(open(path)) if '"sigma"' in l)
    assert f"bad.json:{line}: trigger.sigma" in err


def test_invalid_json(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "system": {"name": "counterexample"},\n  "x0": [0.5, 0.5,]\n}\n')
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "broken.json:3:" in capsys.readouterr().err


@pytest.mark.parametrize("mutate,key", [
    (lambda c: c["system"].update(name="pendulum"), "system.name"),
    (lambda c: c.update(x0=[0.5]), "x0"),
    (lambda c: c["sim"].update(rel_tol=-1), "sim"),
    (lambda c: c["sim"].update(step=0.1), "sim.step"),
    (lambda c: c["trigger"].update(variant="magic"), "trigger.variant"),
    (lambda c: c["assertions"].update(speed=True), "assertions.speed"),
    (lambda c: c["certificate"].update(b=-0.1), "certificate.b"),
])
def test_config_errors(tmp_path, mutate, key):
    cfg = bundled("counterexample_naive.json")
    mutate(cfg)
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, "c.json", cfg))
    assert ".".join(exc.value.path).startswith(key)
    assert exc.value.line is not None


def test_strong_without_margin_rejected(tmp_path):
    cfg = bundled("counterexample_strong.json")
    cfg["certificate"]["b"] = 0.0
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "c.json", cfg))


def test_infeasible_exit_code(tmp_path):
    cfg = short("counterexample_naive.json", 1.0)
    cfg["trigger"]["variant"] = "naive_safety"
    cfg["x0"] = [0.8, 0.8]
    assert main(["run", "--quiet", "--config", write(tmp_path, "n.json", cfg),
                 "--out", str(tmp_path / "o")]) == 3


def test_assertion_failure_exit_code(tmp_path):
    cfg = bundled("scalar_stabilization.json")
    cfg["assertions"]["shrinkage"] = True
    assert main(["run", "--quiet", "--config", write(tmp_path, "s.json", cfg),
                 "--out", str(tmp_path / "o")]) == 1
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["assertions"]["passed"] is False


def test_run_artifacts(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--quiet", "--config", "scalar_stabilization", "--out", str(out),
                 "--plots", "on"]) == 0
    with open(out / "events.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "t_i", "dt_i", "x1", "u1", "h"]
    with open(out / "trace.csv") as fh:
        trace = list(csv.reader(fh))
    assert trace[0] == ["t", "x1", "h", "err_norm", "residual"]
    # floats round-trip through 17 significant digits
    dt = rows[2][2]
    assert float(dt) == pytest.approx(np.sqrt(2) - 1, abs=1e-9)
    assert len(dt.replace("-", "").replace(".", "").lstrip("0").split("e")[0]) == 17
    assert rows[-1][2] == ""
    rep = json.loads((out / "report.json").read_text())
    assert {"miet", "safety", "shrinkage", "certification", "parameters"} <= set(rep)
    for name in ("h_vs_t.png", "interevent.png", "phase.png"):
        assert (out / name).stat().st_size > 0


def test_compare_identical(tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", "scalar_stabilization", "scalar_stabilization", "--out", str(out),
                 "--quiet"]) == 0
    joint = json.loads((out / "compare.json").read_text())
    a, b = joint.values()
    assert a == b
    ea = (out / "scalar_stabilization_a" / "events.csv").read_bytes()
    assert ea == (out / "scalar_stabilization_b" / "events.csv").read_bytes()


def test_compare_naive_vs_strong(tmp_path):
    a = write(tmp_path, "naive.json", short("counterexample_naive.json", 4.0))
    b = write(tmp_path, "strong.json", short("counterexample_strong.json", 4.0))
    out = tmp_path / "cmp"
    main(["compare", a, b, "--out", str(out), "--plots", "on", "--quiet"])
    joint = json.loads((out / "compare.json").read_text())
    assert joint["naive"]["miet"]["min"] < joint["strong"]["miet"]["min"]
    assert (out / "interevent.png").exists()


def test_compare_mismatch(tmp_path, capsys):
    cfg = short("counterexample_naive.json", 1.0)
    cfg["x0"] = [0.1, 0.2]
    path = write(tmp_path, "other.json", cfg)
    assert main(["compare", "counterexample_strong", path, "--out", str(tmp_path / "c")]) == 2
    assert main(["compare", "counterexample_strong", "scalar_stabilization",
                 "--out", str(tmp_path / "c")]) == 2


def test_batch_parallel(tmp_path):
    a = write(tmp_path, "a.json", bundled("scalar_stabilization.json"))
    b = write(tmp_path, "b.json", short("counterexample_strong.json", 1.0))
    out = tmp_path / "batch"
    assert main(["run", "--quiet", "--config", a, "--config", b, "--parallel", "2",
                 "--out", str(out)]) == 0
    assert (out / "a" / "events.csv").exists() and (out / "b" / "report.json").exists()


def test_validate_oracle_small(capsys):
    assert main(["validate-oracle", "--seed", "3", "--trials", "25"]) == 0
    assert "25/25 passed" in capsys.readouterr().out
    assert main(["validate-oracle", "--trials", "0"]) == 2


def test_validate_oracle_reproducible():
    a = oracle_trials(seed=7, trials=20)
    b = oracle_trials(seed=7, trials=20)
    assert all(np.array_equal(p, q) for p, q in zip(a, b))
    c = oracle_trials(seed=8, trials=20)
    assert not np.array_equal(a[0], c[0])
