"""Green-operator application and the weighted a priori estimate studies.

The representation formula u(x) = integral G(x, y) f(y) dy is the only
solver in the package: solving the order-2m Dirichlet problem means
applying the kernel to a sampled right-hand side with the node's own
cell handled by a singularity-corrected weight.

Estimate studies solve across a refinement ladder and report the ratio
of solution norm to data norm per level; a trend is declared *bounded*
when the last two ratios agree to 10% and *growing* only from a
monotone x4 increase over at least four levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import InvariantViolation, ParameterError
from .geometry import (
    BallProblem,
    ConeRegion,
    GradingSpec,
    QuadratureGrid,
    build_grid,
    default_cone,
    weighted_integral,
    weighted_norm,
)
from .green import GreenKernel
from .reporting import canonical_csv

_PAIR_BLOCK = 6_000_000

PROVENANCES = ("constructed-rhs", "solved-potential", "oracle")


@dataclass(eq=False)
class SampledField:
    """Real values attached to the nodes of one grid."""

    grid: QuadratureGrid
    values: npt.NDArray
    provenance: str = "constructed-rhs"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.node_count,):
            raise ParameterError("field values must match the grid node count")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("field values must be finite (NaN/Inf forbidden)")
        if self.provenance not in PROVENANCES:
            raise ParameterError(f"unknown provenance {self.provenance!r}")


def field_from_function(grid: QuadratureGrid, fn, provenance: str = "constructed-rhs") -> SampledField:
    """Sample a callable of the node coordinates onto a grid."""
    return SampledField(grid=grid, values=np.asarray(fn(grid.nodes), dtype=float),
                        provenance=provenance)


def constant_field(grid: QuadratureGrid, value: float = 1.0) -> SampledField:
    return SampledField(grid=grid, values=np.full(grid.node_count, float(value)))


def apply_green_operator(kernel: GreenKernel, f: SampledField,
                         eval_points: npt.NDArray | None = None,
                         eval_grid: QuadratureGrid | None = None) -> SampledField | npt.NDArray:
    """Apply the Green operator to ``f``: u(x) = sum_j w_j G(x, y_j) f_j.

    Evaluation points default to the source grid nodes.  Wherever an
    evaluation point coincides with a source node (the j = i term, or a
    shared node between nested grids) the plain product w_j G is replaced
    by the singularity-corrected cell weight.  Linear in ``f``.
    """
    grid = f.grid
    if kernel.problem.n != grid.n:
        raise ParameterError("kernel dimension does not match the source grid")
    if eval_grid is not None:
        X = eval_grid.nodes
    elif eval_points is not None:
        X = np.atleast_2d(np.asarray(eval_points, dtype=float))
    else:
        X = grid.nodes

    support = np.flatnonzero(f.values != 0.0)
    sparse = support.size < 0.6 * grid.node_count
    src_idx = support if sparse else np.arange(grid.node_count)
    Y = grid.nodes[src_idx]
    fy = f.values[src_idx]
    wf = grid.weights[src_idx] * fy
    diag = kernel.singular_cell_weights(Y, grid.cell_radii()[src_idx])

    out = np.zeros(X.shape[0])
    if Y.shape[0]:
        rows = max(1, _PAIR_BLOCK // Y.shape[0])
        for lo in range(0, X.shape[0], rows):
            hi = min(lo + rows, X.shape[0])
            g, collide = kernel.block(X[lo:hi], Y)
            out[lo:hi] = g @ wf
            if np.any(collide):
                ii, jj = np.nonzero(collide)
                np.add.at(out, lo + ii, diag[jj] * fy[jj])

    if eval_grid is not None:
        return SampledField(grid=eval_grid, values=out, provenance="solved-potential")
    if eval_points is not None:
        return out
    return SampledField(grid=grid, values=out, provenance="solved-potential")


def nystrom_matrix(kernel: GreenKernel, grid: QuadratureGrid) -> npt.NDArray:
    """Dense discrete Green operator M[i, j] = w_j G(x_i, y_j), corrected diagonal."""
    g, collide = kernel.block(grid.nodes, grid.nodes)
    mat = g * grid.weights[None, :]
    diag = kernel.singular_cell_weights(grid.nodes, grid.cell_radii())
    ii, jj = np.nonzero(collide)
    mat[ii, jj] = diag[jj]
    return mat


def solve_at_center(kernel: GreenKernel, f: SampledField) -> float:
    """u(0) by direct quadrature of the representation formula."""
    return float(apply_green_operator(kernel, f, eval_points=np.zeros((1, kernel.problem.n)))[0])


# ---------------------------------------------------------------------------
# estimate reports
# ---------------------------------------------------------------------------

GROWTH_FACTOR = 4.0
GROWTH_MIN_LEVELS = 4
BOUNDED_WINDOW = 0.10


def classify_trend(ratios) -> str:
    """bounded / growing / inconclusive, recomputable from stored ratios."""
    r = [float(v) for v in ratios]
    if len(r) >= GROWTH_MIN_LEVELS:
        monotone = all(b > a for a, b in zip(r, r[1:]))
        if monotone and r[-1] >= GROWTH_FACTOR * r[0]:
            return "growing"
    if len(r) >= 2 and abs(r[-1] - r[-2]) <= BOUNDED_WINDOW * abs(r[-2]):
        return "bounded"
    return "inconclusive"


@dataclass
class EstimateReport:
    """Per-level norm ratios for one estimate, with the trend verdict."""

    estimate_id: str
    params: dict
    levels: list = field(default_factory=list)
    trend: str = "inconclusive"
    empirical_constant: float | None = None

    def add_level(self, level: int, ratio: float, **extra) -> None:
        entry = {"level": int(level), "ratio": float(ratio)}
        entry.update(extra)
        self.levels.append(entry)

    def finalize(self) -> "EstimateReport":
        ratios = [entry["ratio"] for entry in self.levels]
        self.trend = classify_trend(ratios)
        self.empirical_constant = max(ratios) if self.trend == "bounded" else None
        return self

    def ratios(self) -> list:
        return [entry["ratio"] for entry in self.levels]

    def to_doc(self) -> dict:
        params = {}
        for key, val in self.params.items():
            params[key] = val if not (isinstance(val, float) and math.isinf(val)) else "inf"
        return {
            "estimate_id": self.estimate_id,
            "params": params,
            "levels": self.levels,
            "trend": self.trend,
            "empirical_C": self.empirical_constant,
        }

    def to_csv(self) -> str:
        keys = sorted({k for entry in self.levels for k in entry})
        keys.remove("level")
        keys.remove("ratio")
        header = ["level", "ratio"] + keys
        rows = [[entry["level"], entry["ratio"]] + [entry.get(k) for k in keys] for entry in self.levels]
        return canonical_csv(header, rows)


def default_rhs_family(problem: BallProblem, grid: QuadratureGrid) -> list:
    """Smooth positive profiles plus one admissible boundary-singular one."""
    r = grid.radii()
    d = grid.distances()
    m = problem.m
    return [
        ("one", SampledField(grid=grid, values=np.ones(grid.node_count))),
        ("one_plus_r", SampledField(grid=grid, values=1.0 + r)),
        ("gauss", SampledField(grid=grid, values=np.exp(-(r**2)))),
        ("boundary_singular", SampledField(grid=grid, values=d ** (-m + 0.1))),
    ]


_ESTIMATE_CASES = ("prop21_1", "prop21_2", "prop23", "lemma_propDS")


def _check_estimate_preconditions(case: str, n: int, m: int, params: dict) -> None:
    if case == "prop21_1":
        if n > m:
            raise ParameterError(f"prop21_1 requires n <= m, got n={n} > m={m}")
        return
    p = params.get("p")
    q = params.get("q")
    if case == "prop21_2":
        if not (1 <= p <= q):
            raise ParameterError("prop21_2 requires 1 <= p <= q")
        if 1.0 / p - (0.0 if math.isinf(q) else 1.0 / q) >= 2 * m / (n + m):
            raise ParameterError("prop21_2 requires 1/p - 1/q < 2m/(n+m)")
        return
    if case == "prop23":
        k = params.get("k")
        if k is None or k < 1:
            raise ParameterError("prop23 requires k >= 1")
        if n > m and k >= (n + m) / (n - m):
            raise ParameterError(f"prop23 requires k < (n+m)/(n-m) = {(n + m) / (n - m):.6g}")
        return
    if case == "lemma_propDS":
        theta = params.get("theta")
        if theta is None or not (0 <= theta <= 1):
            raise ParameterError("lemma_propDS requires theta in [0, 1]")
        if params.get("supremum_form"):
            if 2 * m <= n:
                raise ParameterError("the supremum form of the lemma requires 2m > n")
            return
        alpha = params.get("alpha")
        if not (1 <= p <= q):
            raise ParameterError("lemma_propDS requires 1 <= p <= q")
        gap = 1.0 / p - (0.0 if math.isinf(q) else 1.0 / q)
        cap = min(2 * m / n, 1.0)
        if gap >= cap:
            raise ParameterError("lemma_propDS requires 1/p - 1/q < min(2m/n, 1)")
        if alpha is None or not (gap < alpha <= cap):
            raise ParameterError("lemma_propDS requires alpha in (1/p - 1/q, min(2m/n, 1)]")
        return
    raise ParameterError(f"unknown estimate case {case!r}; expected one of {_ESTIMATE_CASES}")


def _estimate_ratio(kernel: GreenKernel, case: str, params: dict,
                    f: SampledField, u_eval: SampledField) -> float:
    n, m = kernel.problem.n, kernel.problem.m
    if case == "prop21_1":
        return weighted_norm(u_eval, math.inf, 0) / weighted_norm(f, 1, m)
    if case == "prop21_2":
        return weighted_norm(u_eval, params["q"], m) / weighted_norm(f, params["p"], m)
    if case == "prop23":
        return weighted_norm(u_eval, params["k"], m) / weighted_norm(u_eval, 1, m)
    theta = params["theta"]
    if params.get("supremum_form"):
        du = u_eval.grid.distances()
        df = f.grid.distances()
        wu = SampledField(u_eval.grid, u_eval.values * du ** (-m + theta * n), "oracle")
        wf = SampledField(f.grid, f.values * df ** (m - (1 - theta) * n), "oracle")
        return weighted_norm(wu, math.inf, 0) / weighted_norm(wf, 1, 0)
    alpha = params["alpha"]
    du = u_eval.grid.distances()
    df = f.grid.distances()
    wu = SampledField(u_eval.grid, u_eval.values * du ** (-m + theta * n * alpha), "oracle")
    wf = SampledField(f.grid, f.values * df ** (m - (1 - theta) * n * alpha), "oracle")
    return weighted_norm(wu, params["q"], 0) / weighted_norm(wf, params["p"], 0)


def verify_estimate(kernel: GreenKernel, case: str, params: dict,
                    rhs_names: tuple = ("one", "one_plus_r", "gauss", "boundary_singular"),
                    levels=(0, 1, 2), eval_level: int = 1) -> EstimateReport:
    """Bounded-regime study: solve for a family of data and track the ratio.

    The solution norm is measured on a fixed evaluation grid while the
    source quadrature refines through ``levels``; the reported per-level
    ratio is the maximum over the right-hand-side family.
    """
    n, m = kernel.problem.n, kernel.problem.m
    _check_estimate_preconditions(case, n, m, params)
    problem = kernel.problem
    eval_grid = build_grid(problem, eval_level)
    report = EstimateReport(estimate_id=case, params=dict(params, n=n, m=m))
    for level in levels:
        grid = build_grid(problem, level)
        family = [fam for fam in default_rhs_family(problem, grid) if fam[0] in rhs_names]
        worst = 0.0
        detail = {}
        for name, f in family:
            u = apply_green_operator(kernel, f, eval_grid=eval_grid)
            ratio = _estimate_ratio(kernel, case, params, f, u)
            detail[f"ratio_{name}"] = float(ratio)
            worst = max(worst, ratio)
        report.add_level(level, worst, **detail)
    return report.finalize()


# ---------------------------------------------------------------------------
# falsification of the a priori estimate (final Proposition)
# ---------------------------------------------------------------------------


def falsification_alpha_window(n: int, m: int, p: float, q: float) -> tuple:
    """Admissible exponent window ((n+m)/q, (n+m)/p - 2m) ∩ (0, n-m).

    The upper endpoint is the one forced by the integrability computation
    (p < (n+m)/(alpha+2m)), not the misprinted (n+m)/(p-2m).
    """
    lo = max((n + m) / q if not math.isinf(q) else 0.0, 0.0)
    hi = min((n + m) / p - 2 * m, float(n - m))
    return lo, hi


def falsify_estimate(kernel: GreenKernel, p: float, q: float,
                     levels: int = 4, alpha: float | None = None,
                     region: ConeRegion | None = None,
                     exploratory: bool = False) -> EstimateReport:
    """Counterexample study: cone-singular data drives ||u||_q / ||f||_p up.

    Requires 1/p - 1/q > 2m/(n-m) (the proved hypothesis).  With
    ``exploratory`` the weaker band 1/p - 1/q > 2m/(n+m) is admitted and
    the outcome is reported rather than asserted.  Alongside the growing
    ratio the study records ||f|| per level, which must stabilize: the
    data really belongs to its weighted Lebesgue space.
    """
    from .singular import build_singular_rhs

    n, m = kernel.problem.n, kernel.problem.m
    if n <= m:
        raise ParameterError("falsification requires n > m")
    if not (1 <= p <= q):
        raise ParameterError("falsification requires 1 <= p <= q (q may be inf)")
    gap = 1.0 / p - (0.0 if math.isinf(q) else 1.0 / q)
    threshold = 2 * m / (n - m) if not exploratory else 2 * m / (n + m)
    if gap <= threshold + 1e-12:
        raise ParameterError(
            f"requires 1/p - 1/q > {threshold:.6g} (strict); got {gap:.6g}"
        )
    lo, hi = falsification_alpha_window(n, m, p, q)
    if not lo < hi:
        raise ParameterError(f"empty admissible-alpha interval ({lo:.6g}, {hi:.6g})")
    if alpha is None:
        alpha = 0.5 * (lo + hi)
    elif not (lo < alpha < hi):
        raise ParameterError(f"alpha={alpha} outside admissible interval ({lo:.6g}, {hi:.6g})")

    region = region or default_cone(n)
    problem = kernel.problem
    report = EstimateReport(
        estimate_id="final_proposition" if not exploratory else "remark2_band",
        params={"n": n, "m": m, "p": p, "q": q, "alpha": alpha},
    )
    for level in range(levels):
        grading = GradingSpec(focus=region.x0, focus_radius=region.cap_radius,
                              rings=6 + level)
        grid = _study_grid(problem, min(level, _BASE_CAP[n]), grading, shell_level=level)
        f = build_singular_rhs(problem, alpha, region, grid)
        u = apply_green_operator(kernel, f)
        uq = weighted_norm(u, q, m)
        fp = weighted_norm(f, p, m)
        report.add_level(level, uq / fp, u_norm=float(uq), f_norm=float(fp))
    return report.finalize()


# Study ladders refine the focus shells fully but cap the base tensor
# level per dimension so desk-scale solves stay dense-affordable.
_BASE_CAP = {2: 3, 3: 1, 4: 0}


def _study_grid(problem: BallProblem, base_level: int, grading: GradingSpec,
                shell_level: int) -> QuadratureGrid:
    """Grid with independently refined base and focus-shell resolution."""
    from . import geometry as G

    nodes, weights = G._base_grid(problem.n, base_level, grading.boundary_exponent)
    x0 = np.asarray(grading.focus)
    keep = np.linalg.norm(nodes - x0, axis=1) >= grading.focus_radius
    nodes, weights = nodes[keep], weights[keep]
    shell_spec = GradingSpec(boundary_exponent=grading.boundary_exponent,
                             focus=grading.focus, focus_radius=grading.focus_radius,
                             rings=grading.rings - shell_level)
    sn, sw = G._focus_shells(problem.n, shell_spec, shell_level)
    grid = QuadratureGrid(n=problem.n, level=shell_level, grading=grading,
                          nodes=np.concatenate([nodes, sn]),
                          weights=np.concatenate([weights, sw]))
    grid.validate()
    return grid


# ---------------------------------------------------------------------------
# Lemma "x": v / d^m >= C * integral h d^m
# ---------------------------------------------------------------------------


def verify_lemma_x(kernel: GreenKernel, h: SampledField) -> float:
    """Empirical constant min_x (v(x)/d^m(x)) / integral h d^m for v = G[h].

    The evaluation set is the grid plus the ball center (where the
    minimum of v/d^m sits for radial data; grid nodes alone would bias
    the constant up by the innermost node radius).
    """
    if np.any(h.values < 0):
        raise ParameterError("lemma requires h >= 0")
    if not np.any(h.values > 0):
        raise ParameterError("lemma requires h not identically zero")
    m = kernel.problem.m
    moment = weighted_integral(h.grid, h.values, m)
    if not np.isfinite(moment) or moment <= 0:
        raise ParameterError("h must have a finite positive weighted integral")
    v = apply_green_operator(kernel, h)
    ratios = v.values / h.grid.distances() ** m
    center = apply_green_operator(kernel, h, eval_points=np.zeros((1, kernel.problem.n)))[0]
    c_emp = min(float(np.min(ratios)), float(center)) / moment
    if c_emp <= 0:
        raise InvariantViolation("lemma constant came out non-positive")
    return c_emp
