import numpy as np
import pytest

from polyharm.errors import NotApplicableError, ParameterError, ResolutionError
from polyharm.geometry import (
    BallProblem,
    GradingSpec,
    build_grid,
    cone_contains,
    default_cone,
    weighted_norm,
)
from polyharm.green import build_kernel
from polyharm.potential import apply_green_operator
from polyharm.singular import (
    SingularSystem,
    build_singular_rhs,
    construct_counterexample,
    counterexample_grid,
    near_vertex_max,
    verify_pointwise_lower_bound,
    verify_system_residual,
)


def _focus_grid(n, level=0):
    region = default_cone(n)
    grading = GradingSpec(focus=region.x0, focus_radius=region.cap_radius, rings=6 + level)
    return region, build_grid(BallProblem(n, 1), level, grading)


def test_rhs_vanishes_off_cone():
    region, grid = _focus_grid(3)
    f = build_singular_rhs(BallProblem(3, 1), 1.0, region, grid)
    outside = ~cone_contains(region, grid.nodes)
    assert np.all(f.values[outside] == 0)
    assert np.all(f.values[~outside] > 0)


def test_rhs_exponent_gate():
    region, grid = _focus_grid(3)
    with pytest.raises(ParameterError):
        build_singular_rhs(BallProblem(3, 1), 2.0, region, grid)  # = n - m
    with pytest.raises(ParameterError):
        build_singular_rhs(BallProblem(3, 1), -0.1, region, grid)
    with pytest.raises(ParameterError):
        build_singular_rhs(BallProblem(3, 3), 0.5, region, grid)  # n <= m


def test_rhs_weighted_norm_stabilizes():
    region = default_cone(3)
    norms = []
    for level in (1, 2):
        grid = counterexample_grid(BallProblem(3, 1), region, level)
        f = build_singular_rhs(BallProblem(3, 1), 1.0, region, grid)
        norms.append(weighted_norm(f, 1, 1))
    assert abs(norms[1] - norms[0]) / norms[0] <= 0.05


def test_pointwise_lower_bound_homogeneity_and_stability():
    region = default_cone(3)
    kern = build_kernel(3, 1)
    consts = []
    for level in (0, 1):
        grid = counterexample_grid(BallProblem(3, 1), region, level)
        f = build_singular_rhs(BallProblem(3, 1), 1.0, region, grid)
        u = apply_green_operator(kern, f)
        c = verify_pointwise_lower_bound(u, 1.0, region)
        assert c > 0
        consts.append(c)
        scaled = type(u)(u.grid, 3.0 * u.values, u.provenance)
        assert verify_pointwise_lower_bound(scaled, 1.0, region) == pytest.approx(3 * c, rel=1e-12)
    assert abs(consts[1] - consts[0]) / consts[0] <= 0.30


def test_pointwise_lower_bound_critical_case():
    # n = 2, m = 1 runs through the 2m = n kernel branch
    region = default_cone(2)
    kern = build_kernel(2, 1)
    grid = counterexample_grid(BallProblem(2, 1), region, 1)
    f = build_singular_rhs(BallProblem(2, 1), 0.5, region, grid)
    u = apply_green_operator(kern, f)
    assert verify_pointwise_lower_bound(u, 0.5, region) > 0


def test_no_cone_nodes_is_resolution_error():
    # a narrow cone that no plain level-0 node hits
    region = default_cone(3)
    narrow = type(region)(x0=region.x0, half_aperture=1e-3, cap_radius=1e-2)
    grid = build_grid(BallProblem(3, 1), 0)
    kern = build_kernel(3, 1)
    u = apply_green_operator(kern, build_singular_rhs(BallProblem(3, 1), 1.0, region, grid))
    assert not cone_contains(narrow, grid.nodes).any()
    with pytest.raises(ResolutionError):
        verify_pointwise_lower_bound(u, 1.0, narrow)


def test_regime_gate():
    with pytest.raises(NotApplicableError):
        construct_counterexample(1.5, 1.5, 1, 3)


def test_symmetric_counterexample():
    system = construct_counterexample(3.0, 3.0, 1, 3, level=1)
    assert system.sup_a() == pytest.approx(system.sup_b(), rel=1.0)  # within a factor 2
    assert system.residual_u <= 1e-2 and system.residual_v <= 1e-2
    assert np.all(system.a.values >= 0) and np.all(system.b.values >= 0)


def test_swapped_inputs_match():
    direct = construct_counterexample(2.0, 3.0, 1, 3, level=0)
    swapped = construct_counterexample(3.0, 2.0, 1, 3, level=0)
    # u of the swapped system plays the role of v and vice versa
    assert swapped.exponents.swapped
    assert direct.sup_a() == pytest.approx(swapped.sup_b(), rel=1e-9)
    assert direct.sup_b() == pytest.approx(swapped.sup_a(), rel=1e-9)


def test_fault_injection_detected():
    kern = build_kernel(3, 1)
    system = construct_counterexample(2.0, 3.0, 1, 3, level=0)
    system.a = type(system.a)(system.a.grid, 2.0 * system.a.values, "constructed-rhs")
    r_u, r_v = verify_system_residual(system, kern)
    assert r_u > 0.5
    assert r_v <= 1e-10


def test_degenerate_system_guarded():
    kern = build_kernel(3, 1)
    system = construct_counterexample(2.0, 3.0, 1, 3, level=0)
    zero = type(system.u)(system.u.grid, np.zeros(system.u.grid.node_count), "oracle")
    broken = SingularSystem(
        exponents=system.exponents, region=system.region, u=zero, v=zero,
        phi=system.phi, psi=system.psi, a=system.a, b=system.b,
        lower_bound_u=0.0, lower_bound_v=0.0, residual_u=0.0, residual_v=0.0,
    )
    with pytest.raises(ParameterError):
        verify_system_residual(broken, kern)


def test_near_vertex_max_requires_nodes():
    system = construct_counterexample(2.0, 3.0, 1, 3, level=0)
    with pytest.raises(ResolutionError):
        near_vertex_max(system.u, system.region, 1e-9)
