
import numpy as np
import pytest

from polyharm.errors import ConvergenceError, ParameterError
from polyharm.geometry import BallProblem, build_grid, weighted_integral
from polyharm.green import build_kernel
from polyharm.potential import SampledField, apply_green_operator, constant_field
from polyharm.spectral import eigen_moment, principal_eigenpair, verify_sandwich

DISK_LAMBDA = 2.404825557695773**2  # square of the first Bessel-J0 zero


@pytest.fixture(scope="module")
def disk_pair():
    kern = build_kernel(2, 1)
    return kern, principal_eigenpair(kern, build_grid(BallProblem(2, 1), 1))


def test_disk_eigenvalue(disk_pair):
    _, pair = disk_pair
    assert pair.eigenvalue == pytest.approx(DISK_LAMBDA, rel=0.01)


def test_eigenfunction_normalized_positive(disk_pair):
    _, pair = disk_pair
    grid = pair.eigenfunction.grid
    assert np.all(pair.eigenfunction.values > 0)
    assert weighted_integral(grid, pair.eigenfunction.values) == pytest.approx(1.0, abs=1e-8)
    c1, c2 = verify_sandwich(pair)
    assert 0 < c1 <= c2


def test_rayleigh_consistency(disk_pair):
    kern, pair = disk_pair
    grid = pair.eigenfunction.grid
    gphi = apply_green_operator(kern, pair.eigenfunction)
    lhs = pair.eigenvalue * weighted_integral(grid, gphi.values, 1)
    rhs = weighted_integral(grid, pair.eigenfunction.values, 1)
    assert lhs == pytest.approx(rhs, rel=1e-4)


def test_moments(disk_pair):
    _, pair = disk_pair
    grid = pair.eigenfunction.grid
    assert eigen_moment(constant_field(grid), pair) == pytest.approx(1.0, abs=1e-8)
    assert eigen_moment(SampledField(grid, np.zeros(grid.node_count)), pair) == 0.0
    other = build_grid(BallProblem(2, 1), 0)
    with pytest.raises(ParameterError):
        eigen_moment(constant_field(other), pair)


def test_prop23_chain(disk_pair):
    # integral f d^m <= K * integral u phi with one K across the family
    kern, pair = disk_pair
    grid = pair.eigenfunction.grid
    c1, _ = verify_sandwich(pair)
    K = pair.eigenvalue / c1 * 1.05
    for values in (np.ones(grid.node_count), np.exp(-grid.radii() ** 2),
                   grid.distances() ** -0.9):
        f = SampledField(grid, values)
        u = apply_green_operator(kern, f)
        assert weighted_integral(grid, f.values, 1) <= K * eigen_moment(u, pair)


def test_sandwich_stability_biharmonic_disk():
    kern = build_kernel(2, 2)
    c1s = []
    for level in (1, 2):
        pair = principal_eigenpair(kern, build_grid(BallProblem(2, 2), level))
        c1, c2 = verify_sandwich(pair)
        assert 0 < c1 <= c2
        c1s.append(c1)
    assert abs(c1s[1] - c1s[0]) / c1s[0] <= 0.20


def test_moment_of_singular_solution_stabilizes():
    # the d^m-comparable moment of the unbounded solutions stays finite
    from polyharm.singular import construct_counterexample

    kern = build_kernel(3, 1)
    moments = []
    for level in (0, 1):
        system = construct_counterexample(2.0, 3.0, 1, 3, level=level)
        pair = principal_eigenpair(kern, system.u.grid)
        moments.append((eigen_moment(system.u, pair), eigen_moment(system.v, pair)))
    for a, b in zip(*moments):
        assert abs(b - a) / a <= 0.10


def test_nonconvergence_error():
    kern = build_kernel(2, 1)
    grid = build_grid(BallProblem(2, 1), 0)
    with pytest.raises(ConvergenceError) as err:
        principal_eigenpair(kern, grid, max_iters=1)
    assert err.value.residual is not None
    with pytest.raises(ParameterError):
        principal_eigenpair(kern, grid, tol=-1.0)
