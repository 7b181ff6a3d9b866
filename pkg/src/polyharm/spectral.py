"""Principal eigenpair of the polyharmonic operator via power iteration.

The discrete Green operator is positivity improving, so plain power
iteration from the constant start vector converges to the principal
pair; no deflation is needed.  The eigenvalue of the differential
operator is the reciprocal of the integral-operator eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ParameterError
from .geometry import QuadratureGrid
from .green import GreenKernel
from .potential import SampledField, apply_green_operator, nystrom_matrix
from .reporting import stable_sum

_DENSE_LIMIT = 7000


@dataclass
class EigenPair:
    """Converged (lambda, phi) with phi > 0 and integral phi = 1."""

    eigenvalue: float
    eigenfunction: SampledField
    order: int
    iterations: int
    residual: float

    def to_doc(self) -> dict:
        c1, c2 = verify_sandwich(self)
        return {
            "n": self.eigenfunction.grid.n,
            "m": self.order,
            "lambda": self.eigenvalue,
            "iterations": self.iterations,
            "residual": self.residual,
            "c1": c1,
            "c2": c2,
        }


def principal_eigenpair(kernel: GreenKernel, grid: QuadratureGrid, tol: float = 1e-8,
                        residual_tol: float = 1e-6, max_iters: int = 200) -> EigenPair:
    """Power iteration phi <- G[phi] / integral G[phi] from phi == 1.

    The eigenvalue estimate is integral phi / integral G[phi].
    Convergence requires both the relative eigenvalue change below
    ``tol`` and the sup-norm residual ||G[phi] - phi/lambda|| / ||phi||
    below ``residual_tol`` (the eigenvalue settles first).
    """
    if tol <= 0 or residual_tol <= 0:
        raise ParameterError("tolerances must be positive")
    w = grid.weights
    if grid.node_count <= _DENSE_LIMIT:
        mat = nystrom_matrix(kernel, grid)

        def apply(vec):
            return mat @ vec
    else:
        def apply(vec):
            f = SampledField(grid=grid, values=vec, provenance="constructed-rhs")
            return apply_green_operator(kernel, f).values

    phi = np.ones(grid.node_count)
    phi /= stable_sum(w * phi)
    lam_prev = np.inf
    residual = np.inf
    for it in range(1, max_iters + 1):
        gphi = apply(phi)
        mass = stable_sum(w * gphi)
        if mass <= 0:
            raise ConvergenceError("Green operator lost positivity during iteration")
        lam = stable_sum(w * phi) / mass
        residual = float(np.max(np.abs(gphi - phi / lam)) / np.max(np.abs(phi)))
        phi = gphi / mass
        if abs(lam - lam_prev) <= tol * abs(lam) and residual <= residual_tol:
            phi /= stable_sum(w * phi)
            fn = SampledField(grid=grid, values=phi, provenance="solved-potential")
            return EigenPair(eigenvalue=float(lam), eigenfunction=fn,
                             order=kernel.problem.m, iterations=it, residual=residual)
        lam_prev = lam
    raise ConvergenceError(
        f"power iteration did not converge in {max_iters} iterations", residual=residual
    )


def verify_sandwich(pair: EigenPair) -> tuple:
    """Empirical constants (c1, c2) with c1 d^m <= phi <= c2 d^m on the grid."""
    grid = pair.eigenfunction.grid
    ratios = pair.eigenfunction.values / grid.distances() ** pair.order
    return float(np.min(ratios)), float(np.max(ratios))


def eigen_moment(u: SampledField, pair: EigenPair) -> float:
    """Quadrature value of integral u * phi over the shared grid."""
    grid = pair.eigenfunction.grid
    if u.grid is not grid and not (
        u.grid.node_count == grid.node_count and np.array_equal(u.grid.nodes, grid.nodes)
    ):
        raise ParameterError("field and eigenfunction live on different grids")
    return stable_sum(grid.weights * u.values * pair.eigenfunction.values)
