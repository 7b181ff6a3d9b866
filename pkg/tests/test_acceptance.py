"""Acceptance battery: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (visible with ``pytest -s`` or in
the captured output) and asserts the criterion's verdict.
"""


from polyharm.acceptance import (
    AcceptanceConfig,
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
)

CFG = AcceptanceConfig()


def _check(result):
    line = f"{result['status'].upper()} {result['id']}: {result['name']}"
    print(line)
    assert result["status"] == "pass", result


def test_criterion_1_green_kernel_oracle():
    _check(criterion_1(CFG))


def test_criterion_2_solve_oracles():
    _check(criterion_2(CFG))


def test_criterion_3_green_lower_bounds():
    _check(criterion_3(CFG))


def test_criterion_4_eigenpair():
    _check(criterion_4(CFG))


def test_criterion_5_bounded_estimates():
    _check(criterion_5(CFG))


def test_criterion_6_falsification():
    _check(criterion_6(CFG))


def test_criterion_7_lemma_constant():
    _check(criterion_7(CFG))


def test_criterion_8_bootstrap_engine():
    _check(criterion_8(CFG))


def test_criterion_9_counterexample_pipeline():
    _check(criterion_9(CFG))


def test_criterion_10_determinism():
    _check(criterion_10(CFG))
