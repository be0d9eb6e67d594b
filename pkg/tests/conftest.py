import time

import hypothesis
import numpy as np
import pytest

from etsafe.experiment import bundled_config, load_config, run_experiment

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.load_profile("default")

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
_SESSION_START = time.perf_counter()


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    elapsed = time.perf_counter() - _SESSION_START
    tr.write_line(f"total session time {elapsed:.1f}s (target < 60s)")


def _run_bundled(name, tmp_path_factory):
    exp = load_config(bundled_config(name))
    out = tmp_path_factory.mktemp(name.removesuffix(".json"))
    t0 = time.perf_counter()
    res = run_experiment(exp, out)
    res.elapsed = time.perf_counter() - t0
    res.out_dir = out
    return res


@pytest.fixture(scope="session")
def strong_run(tmp_path_factory):
    return _run_bundled("counterexample_strong.json", tmp_path_factory)


@pytest.fixture(scope="session")
def naive_run(tmp_path_factory):
    return _run_bundled("counterexample_naive.json", tmp_path_factory)


@pytest.fixture(scope="session")
def stab_run(tmp_path_factory):
    return _run_bundled("scalar_stabilization.json", tmp_path_factory)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
