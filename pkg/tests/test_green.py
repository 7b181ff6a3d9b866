import math

import numpy as np
import pytest

from polyharm.errors import DomainError, ParameterError, SingularPointError
from polyharm.geometry import BallProblem, build_grid
from polyharm.green import (
    SampleSpec,
    build_kernel,
    dump_kernel_matrix,
    eval_green,
    fundamental_constant,
    normalization_constant,
    tail_integral,
    verify_green_lower_bound,
)
from polyharm.potential import nystrom_matrix

SUPPORTED = [(2, 1), (3, 1), (4, 1), (2, 2), (3, 2), (4, 2), (2, 3), (3, 3), (4, 3)]


def _ball_sample(n, count, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(count, n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * rng.random((count, 1)) ** (1 / n) * 0.999


def test_image_method_oracle():
    kern = build_kernel(3, 1)
    X, Y = _ball_sample(3, 1000, 1), _ball_sample(3, 1000, 2)
    t = np.linalg.norm(X - Y, axis=1)
    yn = np.linalg.norm(Y, axis=1)
    image = (1 / (4 * math.pi)) * (1 / t - 1 / (yn * np.linalg.norm(X - Y / yn[:, None] ** 2, axis=1)))
    rel = np.abs(kern.pairs(X, Y) - image) / image
    assert rel.max() <= 1e-10


def test_point_value():
    kern = build_kernel(3, 1)
    assert eval_green(kern, [0, 0, 0], [0.5, 0, 0]) == pytest.approx(1 / (4 * math.pi), rel=1e-14)


def test_disk_log_kernel():
    kern = build_kernel(2, 1)
    X, Y = _ball_sample(2, 500, 3), _ball_sample(2, 500, 4)
    t = np.linalg.norm(X - Y, axis=1)
    kap = np.sqrt(t**2 + (1 - np.sum(X * X, 1)) * (1 - np.sum(Y * Y, 1)))
    ref = np.log(kap / t) / (2 * math.pi)
    assert np.max(np.abs(kern.pairs(X, Y) - ref) / ref) < 1e-11


@pytest.mark.parametrize("n,m", SUPPORTED)
def test_symmetry_and_positivity(n, m):
    kern = build_kernel(n, m)
    X, Y = _ball_sample(n, 10_000, 5), _ball_sample(n, 10_000, 6)
    g = kern.pairs(X, Y)
    assert g.min() > 0
    swapped = kern.pairs(Y, X)
    assert np.max(np.abs(g - swapped) / g) <= 1e-12


def test_boundary_vanishing_rate():
    # fixed x, y -> boundary along a ray: G -> 0 with G/d(y)^m in a bounded band
    for n, m in [(3, 1), (3, 2)]:
        kern = build_kernel(n, m)
        x = np.zeros(n)
        x[0] = 0.3
        direction = np.ones(n) / math.sqrt(n)
        dists = 10.0 ** -np.linspace(1, 5, 30)
        Y = (1 - dists)[:, None] * direction
        g = kern.pairs(np.tile(x, (30, 1)), Y)
        assert np.all(np.diff(g) < 0) or g[-1] < g[0]
        assert g[-1] < 1e-4
        band = g / dists**m
        assert band.max() / band.min() <= 100


def test_normalization_calibration():
    # subcritical constant = free-space coefficient / tail integral
    for n, m in [(3, 1), (4, 1)]:
        assert normalization_constant(n, m) == pytest.approx(
            fundamental_constant(n, m) / tail_integral(n, m), rel=1e-14
        )
    # critical disk case matches the classical log kernel constant 1/(2 pi)
    assert normalization_constant(2, 1) == pytest.approx(1 / (2 * math.pi), rel=1e-14)


def test_series_and_closed_form_agree_across_switch():
    # pairs straddling A - 1 = 0.05 must agree between the two code paths
    kern = build_kernel(3, 2)
    rng = np.random.default_rng(7)
    base = rng.normal(size=(200, 3))
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    X = 0.97 * base
    for scale in (0.9695, 0.9705):
        Y = scale * np.roll(base, 1, axis=0)
        g = kern.pairs(X, Y)
        assert np.all(g > 0)
    # force series (deep boundary) vs closed form (interior) consistency via
    # a path continuous in the separation
    x = np.array([[0.99, 0, 0]])
    seps = np.linspace(0.001, 0.2, 80)
    Y = np.stack([0.99 - seps, np.zeros(80), np.zeros(80)], axis=1)
    vals = kern.pairs(np.repeat(x, 80, axis=0), Y)
    assert np.all(np.isfinite(vals)) and np.all(vals > 0)
    # no jump at the branch switch: successive ratios stay near 1
    ratios = vals[1:] / vals[:-1]
    assert ratios.max() < 1.35 and ratios.min() > 0.65


def test_eval_errors():
    kern = build_kernel(3, 1)
    with pytest.raises(SingularPointError):
        eval_green(kern, [0.1, 0, 0], [0.1, 0, 0])
    with pytest.raises(DomainError):
        eval_green(kern, [1.0, 0, 0], [0.1, 0, 0])
    with pytest.raises(DomainError):
        eval_green(kern, [0.1, 0, 0], [0, 1.2, 0])
    with pytest.raises(ParameterError):
        build_kernel(5, 1)
    with pytest.raises(ParameterError):
        build_kernel(3, 4)


def test_lower_bound_case_gate():
    kern = build_kernel(3, 1)
    with pytest.raises(ParameterError):
        verify_green_lower_bound(kern, "g3")


@pytest.mark.parametrize("n,m,case", [(3, 1, "g1"), (2, 1, "g2"), (2, 2, "g3")])
def test_lower_bound_reports(n, m, case):
    rep = verify_green_lower_bound(build_kernel(n, m), case, SampleSpec(levels=3, base_pairs=200))
    mins = [e["min_ratio"] for e in rep.per_level]
    assert mins[-1] > 0
    assert all(b <= a + 1e-15 for a, b in zip(mins, mins[1:]))  # nested prefixes
    doc = rep.to_doc()
    assert doc["case"] == case and len(doc["per_level"]) == 3


def test_kernel_matrix_dump(tmp_path):
    kern = build_kernel(2, 1)
    grid = build_grid(BallProblem(2, 1), 0)
    path = tmp_path / "kernel.bin"
    dump_kernel_matrix(kern, grid, path)
    raw = path.read_bytes()
    header, _, body = raw.partition(b"\n")
    assert header.decode().startswith("polyharm-kernel v1 n=2 m=1")
    mat = np.frombuffer(body, dtype="<f8").reshape(grid.node_count, grid.node_count)
    assert np.array_equal(mat, nystrom_matrix(kern, grid))
    assert np.all(np.diag(mat) >= 0)
