"""Exact polyharmonic Dirichlet Green function on the unit ball.

The kernel is evaluated from the classical closed form

    G(x, y) = k * |x-y|^(2m-n) * I(A),   A = kappa / |x-y|,
    kappa^2 = |x|^2 |y|^2 - 2 x.y + 1,
    I(A) = integral_1^A (v^2 - 1)^(m-1) v^(1-n) dv,

where the inner integral is elementary for integer (m, n) and is
expanded term by term.  Two algebraic identities keep the evaluation
stable everywhere:

* kappa^2 - |x-y|^2 = (1 - |x|^2)(1 - |y|^2), so A - 1 is computed
  without cancellation near the boundary;
* for A - 1 small the inner integral switches to a power series in
  A - 1 (the closed form would cancel m leading digits there).

The normalization constant is fixed by calibration: for 2m < n it is
the free-space kernel coefficient divided by I(inf), for (m, n) = (1, 2)
it reproduces the classical disk log kernel, and the same closed form
extends both to every supported case (verified by the f == 1 polynomial
solve oracles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import DomainError, ParameterError, SingularPointError
from .geometry import BallProblem, QuadratureGrid, ball_volume, sphere_area
from . import geometry

NEAR_DIAGONAL_GUARD = 1e-9
_SERIES_SWITCH = 0.05
_SERIES_TERMS = 30
MAX_ORDER = 3


def normalization_constant(n: int, m: int) -> float:
    """k_{m,n} in Boggio's closed form."""
    return 2.0 * math.gamma(n / 2) / (4**m * math.pi ** (n / 2) * math.factorial(m - 1) ** 2)


def fundamental_constant(n: int, m: int) -> float:
    """Free-space kernel coefficient of |x|^(2m-n) for 2m < n."""
    if 2 * m >= n:
        raise ParameterError("fundamental power-law constant requires 2m < n")
    return math.gamma(n / 2 - m) / (4**m * math.pi ** (n / 2) * math.factorial(m - 1))


def tail_integral(n: int, m: int) -> float:
    """I(inf) = integral_1^inf (v^2-1)^(m-1) v^(1-n) dv for 2m < n."""
    if 2 * m >= n:
        raise ParameterError("the inner integral converges at infinity only for 2m < n")
    return 0.5 * math.gamma((n - 2 * m) / 2) * math.gamma(m) / math.gamma(n / 2)


class GreenKernel:
    """Immutable evaluator for G_m on the unit ball in R^n."""

    def __init__(self, problem: BallProblem):
        n, m = problem.n, problem.m
        if n > geometry.MAX_GRID_DIMENSION or m > MAX_ORDER:
            raise ParameterError(f"kernel supports n <= 4 and m <= 3, got (n, m) = ({n}, {m})")
        self.problem = problem
        if 2 * m < n:
            self.case = "subcritical"
        elif 2 * m == n:
            self.case = "critical"
        else:
            self.case = "supercritical"
        self.normalization = normalization_constant(n, m)
        # (v^2-1)^(m-1) = sum_j b_j v^(2j);  s_j = 2j+2-n after integration.
        self._b = [math.comb(m - 1, j) * (-1) ** (m - 1 - j) for j in range(m)]
        self._s = [2 * j + 2 - n for j in range(m)]
        self._series = self._series_coefficients()
        if self.case == "subcritical":
            self.tail = tail_integral(n, m)
        if self.case == "critical":
            self.log_tail_constant = math.fsum(
                self._b[j] / (n - 2 * j - 2) for j in range(m - 1)
            )

    def _series_coefficients(self) -> npt.NDArray:
        """Coefficients of (2+s)^(m-1) (1+s)^(1-n) divided by (m+d)."""
        n, m = self.problem.n, self.problem.m
        poly_a = np.zeros(_SERIES_TERMS)
        for i in range(m):
            poly_a[i] = math.comb(m - 1, i) * 2.0 ** (m - 1 - i)
        poly_b = np.zeros(_SERIES_TERMS)
        poly_b[0] = 1.0
        for j in range(_SERIES_TERMS - 1):
            poly_b[j + 1] = poly_b[j] * (1 - n - j) / (j + 1)
        prod = np.convolve(poly_a, poly_b)[:_SERIES_TERMS]
        return prod / (m + np.arange(_SERIES_TERMS))

    # -- core evaluation ----------------------------------------------------

    def _core(self, t2, pp):
        """G from exact squared distances t2 and pp = (1-|x|^2)(1-|y|^2).

        kappa^2 = t2 + pp is an algebraic identity of Boggio's A(x, y);
        building on it keeps every quantity cancellation-free.  Entries
        with |x-y| below the near-diagonal guard evaluate to 0 and are
        reported through the collision mask.
        """
        n, m = self.problem.n, self.problem.m
        collide = t2 < NEAR_DIAGONAL_GUARD**2
        t = np.sqrt(np.where(collide, 1.0, t2))
        kap = np.sqrt(t2 + pp)
        a = pp / (t * (kap + t))
        small = a < _SERIES_SWITCH

        inner = np.zeros(np.broadcast(t, kap).shape)
        tpow = t ** (2 * m - n) if 2 * m != n else 1.0
        for j in range(m):
            s = self._s[j]
            e = 2 * m - 2 - 2 * j
            if s == 0:
                # s == 0 forces 2j+2 == n, hence 2m-n == e.
                logs = np.log(kap) - np.log(t)
                inner += self._b[j] * (logs if e == 0 else logs * t**e)
            else:
                lead = kap**s if e == 0 else kap**s * t**e
                inner += (self._b[j] / s) * (lead - tpow)
        if np.any(small):
            idx = np.nonzero(small)
            asub = a[idx]
            poly = np.zeros_like(asub)
            for c in self._series[::-1]:
                poly = poly * asub + c
            inner[idx] = t[idx] ** (2 * m - n) * asub**m * poly
        out = self.normalization * inner
        out[collide] = 0.0
        return out, collide

    def pairs(self, X: npt.NDArray, Y: npt.NDArray) -> npt.NDArray:
        """G(X[i], Y[i]) for matched rows; 0 at guarded near-diagonal pairs."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        diff = X - Y
        t2 = np.einsum("ij,ij->i", diff, diff)
        pp = np.maximum(1.0 - np.sum(X * X, axis=1), 0.0) * np.maximum(
            1.0 - np.sum(Y * Y, axis=1), 0.0
        )
        vals, _ = self._core(t2, pp)
        return vals

    def block(self, X: npt.NDArray, Y: npt.NDArray):
        """(len(X), len(Y)) kernel matrix plus the near-diagonal mask."""
        X = np.ascontiguousarray(X, dtype=float)
        Y = np.ascontiguousarray(Y, dtype=float)
        xx = np.sum(X * X, axis=1)
        yy = np.sum(Y * Y, axis=1)
        t2 = np.maximum(xx[:, None] + yy[None, :] - 2.0 * (X @ Y.T), 0.0)
        # The matmul form carries ~1e-15 cancellation noise; pairs that
        # might sit under the near-diagonal guard are recomputed exactly.
        sus = t2 < 1e-12
        if np.any(sus):
            ii, jj = np.nonzero(sus)
            d = X[ii] - Y[jj]
            t2[ii, jj] = np.einsum("ij,ij->i", d, d)
        pp = np.maximum(1.0 - xx, 0.0)[:, None] * np.maximum(1.0 - yy, 0.0)[None, :]
        return self._core(t2, pp)

    def diagonal_value(self, x) -> float:
        """Limit G(x, x); finite only in the supercritical case 2m > n."""
        n, m = self.problem.n, self.problem.m
        if 2 * m <= n:
            raise SingularPointError("G(x, x) diverges for 2m <= n")
        kx = 1.0 - float(np.dot(x, x))
        return self.normalization * kx ** (2 * m - n) / (2 * m - n)

    def singular_cell_weights(self, nodes: npt.NDArray, cell_radii: npt.NDArray) -> npt.NDArray:
        """Quadrature weight of the kernel over each node's own cell.

        The cell is modelled as the equal-volume ball; the kernel splits
        into its leading radial singularity (integrated in closed form
        over that ball) plus its finite diagonal part (times the cell
        volume).  For 2m > n the kernel is bounded and the plain weight
        applies.
        """
        n, m = self.problem.n, self.problem.m
        k = self.normalization
        kx = 1.0 - np.sum(nodes * nodes, axis=1)
        w = ball_volume(n) * cell_radii**n
        if self.case == "subcritical":
            sing = k * self.tail * sphere_area(n) * cell_radii ** (2 * m) / (2 * m)
            reg = -k * kx ** (2 * m - n) / (n - 2 * m)
            return np.maximum(sing + w * reg, 0.0)
        if self.case == "critical":
            val = k * w * (-np.log(cell_radii) + 1.0 / n + np.log(kx) + self.log_tail_constant)
            return np.maximum(val, 0.0)
        return w * k * kx ** (2 * m - n) / (2 * m - n)


def build_kernel(n: int, m: int) -> GreenKernel:
    return GreenKernel(BallProblem(n=n, m=m))


def eval_green(kernel: GreenKernel, x, y) -> float:
    """Green function value at a single interior pair x != y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (kernel.problem.n,) or y.shape != (kernel.problem.n,):
        raise ParameterError(f"points must have dimension n={kernel.problem.n}")
    if np.dot(x, x) >= 1.0 or np.dot(y, y) >= 1.0:
        raise DomainError("kernel arguments must lie strictly inside the unit ball")
    if np.linalg.norm(x - y) < NEAR_DIAGONAL_GUARD:
        raise SingularPointError("x and y coincide to within the near-diagonal guard")
    return float(kernel.pairs(x[None, :], y[None, :])[0])


# ---------------------------------------------------------------------------
# lower-bound verification
# ---------------------------------------------------------------------------

_CASE_FOR_SIGN = {1: "g1", 0: "g2", -1: "g3"}


@dataclass(frozen=True)
class SampleSpec:
    """Nested quasi-random pair sample: counts double per level."""

    levels: int = 4
    base_pairs: int = 400
    seed: int = 0


@dataclass
class MinRatioReport:
    """Empirical minimum of G / RHS over sampled pairs, per density level."""

    case: str
    n: int
    m: int
    sample_count: int
    min_ratio: float
    per_level: list

    def to_doc(self) -> dict:
        return {
            "case": self.case,
            "n": self.n,
            "m": self.m,
            "sample_count": self.sample_count,
            "min_ratio": self.min_ratio,
            "per_level": self.per_level,
        }


def _halton_block(start: int, count: int, dims: int, seed: int) -> npt.NDArray:
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29][:dims]
    idx = np.arange(start + 1, start + count + 1)
    cols = [geometry._halton(idx, p) for p in primes]
    u = np.stack(cols, axis=-1)
    # Cranley-Patterson rotation keyed by the seed keeps runs distinct yet
    # deterministic.
    rot = np.random.default_rng(seed).random(dims)
    return np.mod(u + rot, 1.0)


def _ball_map(u: npt.NDArray, n: int) -> npt.NDArray:
    r = u[:, 0] ** (1.0 / n) * (1.0 - 1e-9)
    if n == 2:
        th = 2 * math.pi * u[:, 1]
        d = np.stack([np.cos(th), np.sin(th)], axis=-1)
    elif n == 3:
        z = 2 * u[:, 1] - 1
        th = 2 * math.pi * u[:, 2]
        s = np.sqrt(np.maximum(1 - z**2, 0))
        d = np.stack([s * np.cos(th), s * np.sin(th), z], axis=-1)
    else:
        chi = geometry._s3_polar_from_uniform(u[:, 1])
        z = 2 * u[:, 2] - 1
        th = 2 * math.pi * u[:, 3]
        s = np.sqrt(np.maximum(1 - z**2, 0))
        d = np.stack(
            [np.cos(chi), np.sin(chi) * s * np.cos(th), np.sin(chi) * s * np.sin(th), np.sin(chi) * z],
            axis=-1,
        )
    return r[:, None] * d


def _sphere_map(u: npt.NDArray, n: int) -> npt.NDArray:
    filled = np.concatenate([np.full((u.shape[0], 1), 0.5), u], axis=1)
    pts = _ball_map(filled, n)
    norms = np.linalg.norm(pts, axis=1, keepdims=True)
    return pts / norms


def _sample_pairs(n: int, start: int, count: int, seed: int):
    """Four strata: bulk, near-diagonal, near-boundary, boundary-diagonal."""
    xs, ys = [], []
    u = _halton_block(start, count, 2 * n, seed)
    xs.append(_ball_map(u[:, :n], n))
    ys.append(_ball_map(u[:, n:], n))

    u = _halton_block(start, count, 2 * n + 1, seed + 1)
    x = _ball_map(u[:, :n], n)
    w = _sphere_map(u[:, n : 2 * n - 1], n)
    delta = 10.0 ** (-1.0 - 5.0 * u[:, 2 * n])
    y = x + delta[:, None] * w
    bad = np.linalg.norm(y, axis=1) >= 1.0 - 1e-9
    y[bad] = x[bad] - delta[bad, None] * w[bad]
    xs.append(x)
    ys.append(y)

    u = _halton_block(start, count, 2 * n, seed + 2)
    d1 = 10.0 ** (-0.5 - 4.0 * u[:, n - 1])
    d2 = 10.0 ** (-0.5 - 4.0 * u[:, 2 * n - 1])
    xs.append((1.0 - d1)[:, None] * _sphere_map(u[:, : n - 1], n))
    ys.append((1.0 - d2)[:, None] * _sphere_map(u[:, n : 2 * n - 1], n))

    u = _halton_block(start, count, 2 * n + 1, seed + 3)
    d1 = 10.0 ** (-0.5 - 4.0 * u[:, n - 1])
    x = (1.0 - d1)[:, None] * _sphere_map(u[:, : n - 1], n)
    w = _sphere_map(u[:, n : 2 * n - 1], n)
    step = d1 * 10.0 ** (-2.0 * u[:, 2 * n])
    y = x + step[:, None] * w
    bad = np.linalg.norm(y, axis=1) >= 1.0 - 1e-9
    y[bad] = x[bad] - step[bad, None] * w[bad]
    xs.append(x)
    ys.append(y)

    X = np.concatenate(xs)
    Y = np.concatenate(ys)
    keep = (
        (np.linalg.norm(X, axis=1) < 1.0 - 1e-10)
        & (np.linalg.norm(Y, axis=1) < 1.0 - 1e-10)
        & (np.linalg.norm(X - Y, axis=1) >= 1e-8)
    )
    return X[keep], Y[keep]


def lower_bound_rhs(case: str, n: int, m: int, X: npt.NDArray, Y: npt.NDArray) -> npt.NDArray:
    """The case's comparison function, without its implicit constant."""
    t = np.linalg.norm(X - Y, axis=1)
    dx = 1.0 - np.linalg.norm(X, axis=1)
    dy = 1.0 - np.linalg.norm(Y, axis=1)
    if case == "g1":
        return t ** (2 * m - n) * np.minimum(1.0, dx**m * dy**m / t ** (2 * m))
    if case == "g2":
        return np.log1p(dx**m * dy**m / t ** (2 * m))
    if case == "g3":
        return (
            dx ** (m - n / 2)
            * dy ** (m - n / 2)
            * np.minimum(1.0, dx ** (n / 2) * dy ** (n / 2) / t**n)
        )
    raise ParameterError(f"unknown lower-bound case {case!r}")


def verify_green_lower_bound(kernel: GreenKernel, case: str,
                             spec: SampleSpec | None = None) -> MinRatioReport:
    """Sample pairs and record min G/RHS per nested density level."""
    spec = spec or SampleSpec()
    n, m = kernel.problem.n, kernel.problem.m
    expected = _CASE_FOR_SIGN[int(np.sign(n - 2 * m))]
    if case != expected:
        raise ParameterError(
            f"case {case} does not match (n, m) = ({n}, {m}); sign of 2m-n selects {expected}"
        )
    per_level = []
    running = math.inf
    total = 0
    start = 0
    for level in range(spec.levels):
        count = spec.base_pairs * 2**level
        X, Y = _sample_pairs(n, start, count, spec.seed)
        start += count
        g = kernel.pairs(X, Y)
        rhs = lower_bound_rhs(case, n, m, X, Y)
        ratio = g / rhs
        running = min(running, float(np.min(ratio)))
        total += X.shape[0]
        per_level.append({"level": level, "pairs": total, "min_ratio": running})
    return MinRatioReport(case=case, n=n, m=m, sample_count=total,
                          min_ratio=running, per_level=per_level)


def dump_kernel_matrix(kernel: GreenKernel, grid: QuadratureGrid, path) -> None:
    """Dense Nystrom matrix (weights folded in, corrected diagonal) on disk."""
    from .potential import nystrom_matrix

    mat = nystrom_matrix(kernel, grid)
    header = f"polyharm-kernel v1 n={kernel.problem.n} m={kernel.problem.m} count={grid.node_count}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode())
        fh.write(mat.astype("<f8").tobytes())
