import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyharm.errors import NotApplicableError, ParameterError
from polyharm.exponents import (
    classify_regime,
    compute_exponents,
    growth_delta,
    run_bootstrap,
    validate_trace,
)


def test_exponent_values():
    p = compute_exponents(3.0, 3.0, 1)
    assert p.alpha == pytest.approx(1.0) and p.beta == pytest.approx(1.0)
    p = compute_exponents(2.0, 3.0, 1)
    assert p.alpha == pytest.approx(6 / 5) and p.beta == pytest.approx(8 / 5)
    p = compute_exponents(1.5, 1.5, 1)
    assert p.alpha == pytest.approx(4.0) and p.beta == pytest.approx(4.0)


def test_exponent_swap():
    p = compute_exponents(3.0, 2.0, 1)
    assert p.swapped and p.p == 2.0 and p.q == 3.0
    assert p.alpha <= p.beta


def test_exponent_errors():
    with pytest.raises(ParameterError):
        compute_exponents(0.5, 1.0, 1)
    with pytest.raises(ParameterError):
        compute_exponents(-1.0, 3.0, 1)
    with pytest.raises(ParameterError):
        compute_exponents(1.0, math.inf, 1)


def test_regimes():
    assert classify_regime(compute_exponents(1.5, 1.5, 1), 3, 1) == "bounded"
    assert classify_regime(compute_exponents(2.0, 3.0, 1), 3, 1) == "singular"
    assert classify_regime(compute_exponents(2.0, 2.0, 1), 3, 1) == "border"
    assert classify_regime(compute_exponents(2.0, 2.0, 2), 2, 2) == "low_dimension"


@given(p=st.floats(0.3, 5.0), q=st.floats(0.3, 5.0))
@settings(max_examples=80)
def test_regime_swap_invariance(p, q):
    if p * q <= 1.0 + 1e-9:
        return
    a = classify_regime(compute_exponents(p, q, 1), 3, 1)
    b = classify_regime(compute_exponents(q, p, 1), 3, 1)
    assert a == b


def test_monotone_bounded_threshold():
    # for fixed q the bounded set in p is an interval reaching down to pq -> 1+
    q, m, n = 2.0, 1, 3
    flags = []
    for p in [0.51, 0.7, 1.0, 1.3, 1.7, 2.0, 2.5, 3.0, 4.0, 5.0]:
        params = compute_exponents(p, q, m)
        flags.append(classify_regime(params, n, m) == "bounded")
    assert flags[0]
    dropped = False
    for flag in flags:
        if not flag:
            dropped = True
        else:
            assert not dropped, "bounded set in p is not an interval"


def test_worked_trace_a():
    tr = run_bootstrap(1.5, 1.5, 1, 3)
    assert tr.initial_k == pytest.approx(1.95, abs=1e-12)
    assert tr.rounds == []
    assert tr.k_bar == pytest.approx(1.95, abs=1e-12)
    # final k1 is the midpoint of ((n+m)q/2m, 1/A) = (3, 3.714...)
    assert tr.k1_final == pytest.approx(0.5 * (3.0 + 3.7142857142857144), abs=1e-9)
    assert validate_trace(tr) == []


def test_worked_trace_b():
    tr = run_bootstrap(1.2, 1.2, 1, 4)
    assert tr.initial_k == pytest.approx(5 / 3 * 0.98, abs=1e-12)
    assert len(tr.rounds) == 1
    assert tr.rounds[0].eta == pytest.approx(0.99733333333, abs=1e-9)
    assert tr.rounds[0].rho == pytest.approx(0.86, abs=1e-12)
    assert tr.k_bar == pytest.approx(1.8992248062, abs=1e-9)
    assert tr.k1_final == pytest.approx(3.6566901408, abs=1e-9)
    assert validate_trace(tr) == []


def test_not_applicable_gates():
    with pytest.raises(NotApplicableError, match="border"):
        run_bootstrap(2.0, 2.0, 1, 3)
    with pytest.raises(NotApplicableError, match="singular"):
        run_bootstrap(2.0, 3.0, 1, 3)
    with pytest.raises(NotApplicableError, match="low_dimension"):
        run_bootstrap(1.5, 1.5, 2, 2)


def test_validator_catches_injected_faults():
    tr = run_bootstrap(1.2, 1.2, 1, 4)
    bad = replace(tr.rounds[0], rho=1.01)
    tr_bad = replace_rounds(tr, [bad])
    msgs = validate_trace(tr_bad)
    assert any("(3.19)" in s and "rho < 1" in s for s in msgs)

    bad2 = replace(tr.rounds[0], k1=tr.q)
    tr_bad2 = replace_rounds(tr, [bad2])
    msgs2 = validate_trace(tr_bad2)
    assert any("(3.11)" in s for s in msgs2)


def replace_rounds(trace, rounds):
    from copy import deepcopy

    out = deepcopy(trace)
    out.rounds = rounds
    return out


@given(p=st.floats(0.2, 5.0), q=st.floats(0.2, 5.0),
       nm=st.sampled_from([(3, 1), (4, 1), (3, 2), (4, 2)]))
@settings(max_examples=150, deadline=None)
def test_bootstrap_validates_everywhere(p, q, nm):
    n, m = nm
    if p * q <= 1.0 + 1e-6:
        return
    params = compute_exponents(p, q, m)
    if classify_regime(params, n, m) != "bounded":
        return
    # within ~1e-4 of the regime border the fixed midpoint rules need
    # O(1/margin) rounds; stay outside that sliver
    cap = (n + m) / (n - m)
    if params.p > cap * (1 - 1e-4) or params.beta < (n - m) * (1 + 1e-4):
        return
    tr = run_bootstrap(p, q, m, n)
    assert tr.terminated
    assert validate_trace(tr) == []
    if tr.rounds:
        delta = growth_delta(tr)
        ks = [r.k for r in tr.rounds] + [tr.k_bar]
        for a, b in zip(ks, ks[1:]):
            assert b / a >= 1 + delta - 1e-12
