import copy
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from etsafe.analysis import (build_report, certify_trajectory, miet_report, safety_report,
                             shrinkage_report)
from etsafe.sim import EventLog, SimConfig, simulate
from etsafe.systems import counterexample_system
from etsafe.triggers import SignedNaiveSafety


def synthetic(times, event_tol=1e-10):
    return EventLog(event_times=list(times), event_tol=event_tol)


def test_empty_log_is_vacuous():
    log = EventLog()
    m = miet_report(log, 0.1)
    assert m.count == 0 and m.passed is True
    assert safety_report(log).passed
    assert shrinkage_report(log).inconclusive
    assert certify_trajectory(log, None, None, None).checked == 0


def test_single_interval():
    m = miet_report(synthetic([0.0, 0.25]), 0.1)
    assert (m.min, m.median, m.max, m.count) == (0.25, 0.25, 0.25, 1)
    assert m.passed


def test_miet_tolerance_edge():
    log = synthetic([0.0, 1.0, 2.0 - 5e-11])
    assert miet_report(log, 1.0).passed
    assert not miet_report(synthetic([0.0, 1.0, 2.0 - 2e-10]), 1.0).passed
    assert miet_report(log, None).passed is None


def test_constant_intervals_not_flagged():
    rep = shrinkage_report(synthetic(np.arange(50) * 0.3))
    assert rep.ratio == pytest.approx(1.0) and not rep.flagged and not rep.inconclusive


def test_geometric_intervals_flagged():
    ie = 0.5 ** np.linspace(0, 8, 40)
    rep = shrinkage_report(synthetic(np.concatenate([[0.0], np.cumsum(ie)])))
    assert rep.flagged and rep.ratio > 10


def test_too_few_intervals_inconclusive():
    rep = shrinkage_report(synthetic(np.arange(20) * 1.0))  # 19 intervals
    assert rep.inconclusive and rep.ratio is None and not rep.flagged


@given(st.lists(st.floats(1e-6, 10.0), min_size=1, max_size=40), st.floats(0, 10), st.floats(0, 10))
def test_miet_pass_monotone_in_tau(ie, a, b):
    log = synthetic(np.concatenate([[0.0], np.cumsum(ie)]))
    lo, hi = sorted((a, b))
    if miet_report(log, hi).passed:
        assert miet_report(log, lo).passed


def test_reports_do_not_mutate(strong_run):
    log = strong_run.log
    snapshot = copy.deepcopy(log)
    exp = strong_run.exp
    first = build_report(log, exp.tau, exp.sys, exp.cert, exp.law)
    second = build_report(log, exp.tau, exp.sys, exp.cert, exp.law)
    assert first == second
    assert log.event_times == snapshot.event_times
    assert [s.t for s in log.samples] == [s.t for s in snapshot.samples]


def test_strong_run_reports(strong_run):
    rep = strong_run.report
    assert rep["miet"]["pass"] and rep["safety"]["pass"]
    assert not rep["shrinkage"]["flagged"]
    law = strong_run.exp.law
    assert rep["certification"]["min_slack"] >= (1 - law.sigma) * law.d - 1e-6
    assert rep["certification"]["fd_ok"]


def test_naive_run_fails_shifted_tau(naive_run, strong_run):
    tau = strong_run.exp.tau
    assert not miet_report(naive_run.log, tau).passed
    assert naive_run.report["shrinkage"]["flagged"]


def test_event_instants_have_exact_margin(strong_run):
    exp = strong_run.exp
    law, cert, sys = exp.law, exp.cert, exp.sys
    log = strong_run.log
    at_events = EventLog(event_times=log.event_times[:1], event_states=log.event_states[:1],
                         held_inputs=log.held_inputs[:1], samples=[log.samples[0]])
    s = log.samples[0]
    hdot = float(cert.gradient(s.x) @ sys.dynamics(s.x, log.held_inputs[0]))
    expected = hdot + law.beta(s.h) - (1 - law.sigma) * law.d
    assert certify_trajectory(at_events, sys, cert, law).min_slack == expected


def test_exterior_signed_naive_slack():
    sys, cert = counterexample_system()
    law = SignedNaiveSafety(cert.iota, cert.alpha, 0.5)
    log = simulate(sys, cert, law, [0.8, 0.8], SimConfig(t_final=1.0))
    rep = certify_trajectory(log, sys, cert, law)
    assert rep.min_slack >= -1e-6 and rep.fd_ok


def test_stabilization_slack(stab_run):
    rep = stab_run.report["certification"]
    assert rep["min_slack"] >= -1e-6 and rep["fd_ok"]


def test_report_keys(strong_run):
    rep = strong_run.report
    assert {"min", "median", "max", "count", "pass"} <= set(rep["miet"])
    assert set(rep["safety"]) == {"min_h", "pass"}
    assert {"ratio", "flagged"} <= set(rep["shrinkage"])
    assert "min_slack" in rep["certification"]
    assert math.isfinite(rep["miet"]["tau"])
