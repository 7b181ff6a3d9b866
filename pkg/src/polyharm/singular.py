"""Constructive unbounded solutions from cone-singular right-hand sides.

The pipeline: put f(x) = |x - x0|^-(a+2m) on a revolution cone with
vertex x0 on the boundary (integrable against d^m exactly when
a < n - m), solve through the Green operator, check the pointwise lower
bound u >= C |x - x0|^-a on the cone, and in the singular regime
assemble the coefficient pair a = phi / v^p, b = psi / u^q, which is
bounded precisely because the solutions obey matching lower bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import InvariantViolation, NotApplicableError, ParameterError, ResolutionError
from .exponents import ExponentParams, classify_regime, compute_exponents
from .geometry import (
    BallProblem,
    ConeRegion,
    GradingSpec,
    QuadratureGrid,
    cone_contains,
    default_cone,
    vertex_distances,
)
from .green import GreenKernel
from .potential import SampledField, _study_grid, apply_green_operator


def build_singular_rhs(problem: BallProblem, exponent: float, region: ConeRegion,
                       grid: QuadratureGrid) -> SampledField:
    """Sample |x - x0|^-(exponent + 2m) restricted to the cone onto ``grid``.

    Requires 0 < exponent < n - m, which is exactly the integrability
    condition for the d^m-weighted L1 norm of the result.
    """
    n, m = problem.n, problem.m
    if n <= m:
        raise ParameterError("cone-singular data needs n > m (no admissible exponent otherwise)")
    if not (0 < exponent < n - m):
        raise ParameterError(
            f"exponent must lie in (0, n - m) = (0, {n - m}) for integrability, got {exponent}"
        )
    if grid.n != n or region.dim != n:
        raise ParameterError("grid/region dimension mismatch")
    inside = cone_contains(region, grid.nodes)
    rho = vertex_distances(region, grid.nodes)
    values = np.zeros(grid.node_count)
    values[inside] = rho[inside] ** (-(exponent + 2 * m))
    return SampledField(grid=grid, values=values, provenance="constructed-rhs")


def _statistics_mask(field: SampledField, region: ConeRegion) -> npt.NDArray:
    """Cone nodes admissible for sup/min statistics.

    Nodes closer to the vertex than their own cell radius carry
    quadrature-dominated values and are excluded.
    """
    grid = field.grid
    inside = cone_contains(region, grid.nodes)
    rho = vertex_distances(region, grid.nodes)
    return inside & (rho >= grid.cell_radii())


def verify_pointwise_lower_bound(u: SampledField, exponent: float, region: ConeRegion) -> float:
    """Empirical C: min over admissible cone nodes of u(x) |x - x0|^exponent."""
    mask = _statistics_mask(u, region)
    if not np.any(mask):
        raise ResolutionError("grid has no cone nodes; refine or declare a focus")
    rho = vertex_distances(region, u.grid.nodes[mask])
    return float(np.min(u.values[mask] * rho**exponent))


@dataclass
class SingularSystem:
    """A solution pair of the nonlinear system with unbounded u, v."""

    exponents: ExponentParams
    region: ConeRegion
    u: SampledField
    v: SampledField
    phi: SampledField
    psi: SampledField
    a: SampledField
    b: SampledField
    lower_bound_u: float
    lower_bound_v: float
    residual_u: float
    residual_v: float

    def sup_a(self) -> float:
        return float(np.max(self.a.values))

    def sup_b(self) -> float:
        return float(np.max(self.b.values))

    def to_doc(self) -> dict:
        return {
            "params": self.exponents.to_doc(),
            "sup_a": self.sup_a(),
            "sup_b": self.sup_b(),
            "C_u": self.lower_bound_u,
            "C_v": self.lower_bound_v,
            "residual_u": self.residual_u,
            "residual_v": self.residual_v,
        }


def counterexample_grid(problem: BallProblem, region: ConeRegion, level: int) -> QuadratureGrid:
    """Study grid: capped base plus focus shells refined with ``level``."""
    grading = GradingSpec(focus=region.x0, focus_radius=region.cap_radius, rings=6 + level)
    from .potential import _BASE_CAP

    return _study_grid(problem, min(level, _BASE_CAP[problem.n]), grading, shell_level=level)


def construct_counterexample(p: float, q: float, m: int, n: int,
                             grid: QuadratureGrid | None = None,
                             region: ConeRegion | None = None,
                             level: int = 1) -> SingularSystem:
    """Build (u, v, a, b) solving the system with unbounded u, v.

    Applicable only in the singular regime max(alpha, beta) < n - m.
    The data exponents are the derived alpha, beta themselves (matched
    to the original (p, q) order), never free parameters.
    """
    params = compute_exponents(p, q, m)
    regime = classify_regime(params, n, m)
    if regime != "singular":
        raise NotApplicableError(
            f"counterexample needs the singular regime: max(alpha, beta) = "
            f"{max(params.alpha, params.beta):.6g} vs n - m = {n - m} gives '{regime}'"
        )
    alpha_u = params.beta if params.swapped else params.alpha
    beta_v = params.alpha if params.swapped else params.beta
    problem = BallProblem(n=n, m=m)
    region = region or default_cone(n)
    if grid is None:
        grid = counterexample_grid(problem, region, level)
    kernel = GreenKernel(problem)

    phi = build_singular_rhs(problem, alpha_u, region, grid)
    psi = build_singular_rhs(problem, beta_v, region, grid)
    u = apply_green_operator(kernel, phi)
    v = apply_green_operator(kernel, psi)

    inside = cone_contains(region, grid.nodes)
    a_vals = np.zeros(grid.node_count)
    b_vals = np.zeros(grid.node_count)
    a_vals[inside] = phi.values[inside] / v.values[inside] ** p
    b_vals[inside] = psi.values[inside] / u.values[inside] ** q
    a = SampledField(grid=grid, values=a_vals, provenance="constructed-rhs")
    b = SampledField(grid=grid, values=b_vals, provenance="constructed-rhs")

    system = SingularSystem(
        exponents=params, region=region, u=u, v=v, phi=phi, psi=psi, a=a, b=b,
        lower_bound_u=verify_pointwise_lower_bound(u, alpha_u, region),
        lower_bound_v=verify_pointwise_lower_bound(v, beta_v, region),
        residual_u=math.nan, residual_v=math.nan,
    )
    system.residual_u, system.residual_v = verify_system_residual(system, kernel)
    _validate_system(system)
    return system


def verify_system_residual(system: SingularSystem, kernel: GreenKernel) -> tuple:
    """Relative sup deviation of (G[a v^p], G[b u^q]) from (u, v).

    The coefficients satisfy a v^p = phi and b u^q = psi nodewise by
    construction, so any residual beyond rounding measures re-quadrature
    error; an injected fault in a or b shows up directly.
    """
    p, q = _system_powers(system)
    sup_u = float(np.max(np.abs(system.u.values)))
    sup_v = float(np.max(np.abs(system.v.values)))
    if sup_u == 0 or sup_v == 0:
        raise ParameterError("degenerate system: zero solution has no relative residual")
    rhs_u = SampledField(system.u.grid, system.a.values * system.v.values**p, "constructed-rhs")
    rhs_v = SampledField(system.u.grid, system.b.values * system.u.values**q, "constructed-rhs")
    u2 = apply_green_operator(kernel, rhs_u)
    v2 = apply_green_operator(kernel, rhs_v)
    r_u = float(np.max(np.abs(u2.values - system.u.values))) / sup_u
    r_v = float(np.max(np.abs(v2.values - system.v.values))) / sup_v
    return r_u, r_v


def _system_powers(system: SingularSystem) -> tuple:
    if system.exponents.swapped:
        return system.exponents.q, system.exponents.p
    return system.exponents.p, system.exponents.q


def near_vertex_max(u: SampledField, region: ConeRegion, radius: float) -> float:
    """Max |u| over admissible nodes within ``radius`` of the cone vertex."""
    mask = _statistics_mask(u, region)
    rho = vertex_distances(region, u.grid.nodes)
    mask &= rho <= radius
    if not np.any(mask):
        raise ResolutionError(f"no admissible nodes within {radius:.3g} of the vertex")
    return float(np.max(np.abs(u.values[mask])))


def _validate_system(system: SingularSystem) -> None:
    if np.any(system.a.values < 0) or np.any(system.b.values < 0):
        raise InvariantViolation("coefficients a, b must be nonnegative")
    if np.any(system.u.values <= 0) or np.any(system.v.values <= 0):
        raise InvariantViolation("solutions u, v must be positive at interior nodes")
    if system.lower_bound_u <= 0 or system.lower_bound_v <= 0:
        raise InvariantViolation("pointwise lower-bound constants must be positive")
    if not (system.residual_u <= 1e-2 and system.residual_v <= 1e-2):
        raise InvariantViolation(
            f"system residuals too large: ({system.residual_u:.3g}, {system.residual_v:.3g})"
        )
