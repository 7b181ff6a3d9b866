"""Unit-ball geometry: distance weight, quadrature grids, cone regions.

The domain is always the open unit ball in R^n (n = 2, 3, 4).  Grids are
tensor products of a boundary-graded radial rule with uniform angular
midpoint rules for n = 2, 3 and a Halton low-discrepancy rule for n = 4.
A grid may additionally carry geometrically refined spherical shells
around a declared boundary focus point; those shells cover the slice
``B ∩ ball(x0, R)`` exactly in polar coordinates around ``x0`` and are
what make cone-singular integrands quadrable.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from hashlib import sha256
from pathlib import Path

import numpy as np
import numpy.typing as npt

from .errors import DomainError, InvariantViolation, ParameterError
from .reporting import stable_sum

MAX_GRID_DIMENSION = 4
INTERIOR_MARGIN = 1e-10
CACHE_ENV_VAR = "POLYHARM_CACHE_DIR"
_GRID_MAGIC = "polyharm-grid v1"

# Base tensor counts at level 0, doubled per level and per direction.
_BASE_COUNTS = {2: (10, 16), 3: (8, 6, 12)}
_BASE_COUNT_4D = 2048
# Focus-shell counts at level 0: radial-from-vertex, cap-polar, azimuthal.
_SHELL_COUNTS = {2: (3, 8), 3: (3, 5, 8), 4: (3, 5, 2, 3)}


def ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n."""
    return n * ball_volume(n)


@dataclass(frozen=True)
class BallProblem:
    """Problem instance: spatial dimension n and operator order m."""

    n: int
    m: int

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 2):
            raise ParameterError(f"dimension n must be an integer >= 2, got {self.n!r}")
        if not (isinstance(self.m, (int, np.integer)) and self.m >= 1):
            raise ParameterError(f"order m must be an integer >= 1, got {self.m!r}")


def distance_to_boundary(x) -> float:
    """Distance 1 - |x| from a point of the closed unit ball to its boundary."""
    r = float(np.linalg.norm(np.asarray(x, dtype=float)))
    if r > 1.0 + 1e-12:
        raise DomainError(f"point with |x| = {r:.6g} lies outside the closed unit ball")
    return max(1.0 - r, 0.0)


def boundary_distances(points: npt.NDArray) -> npt.NDArray:
    """Vectorized ``distance_to_boundary`` for an (N, n) array of points."""
    r = np.linalg.norm(points, axis=-1)
    if np.any(r > 1.0 + 1e-12):
        raise DomainError("some points lie outside the closed unit ball")
    return np.maximum(1.0 - r, 0.0)


@dataclass(frozen=True)
class GradingSpec:
    """Grading descriptor: boundary exponent plus optional focus refinement.

    ``boundary_exponent`` >= 1 controls radial clustering toward |x| = 1
    (nodes at 1 - (1-t)^g).  When ``focus`` is a boundary point, the grid
    adds ``rings`` geometric shells (radius halving per shell) filling
    ``B ∩ ball(focus, focus_radius)``; base nodes inside that slice are
    dropped so the shells own it.
    """

    boundary_exponent: int = 2
    focus: tuple | None = None
    focus_radius: float = 0.5
    rings: int = 6

    def __post_init__(self):
        if self.boundary_exponent < 1:
            raise ParameterError("grading exponent must be >= 1")
        if self.focus is not None:
            object.__setattr__(self, "focus", tuple(float(c) for c in self.focus))
            fr = np.linalg.norm(self.focus)
            if abs(fr - 1.0) > 1e-9:
                raise ParameterError("focus point must lie on the unit sphere")
            if not (0 < self.focus_radius <= 1) or self.rings < 1:
                raise ParameterError("focus_radius must be in (0,1] and rings >= 1")

    def token(self) -> str:
        tok = f"b{self.boundary_exponent}"
        if self.focus is not None:
            coords = "_".join(format(c, ".17g") for c in self.focus)
            tok += f";f={coords};R={format(self.focus_radius, '.17g')};s={self.rings}"
        return tok


@dataclass(eq=False)
class QuadratureGrid:
    """Interior nodes with positive weights summing to ~|B|."""

    n: int
    level: int
    grading: GradingSpec
    nodes: npt.NDArray
    weights: npt.NDArray

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    def radii(self) -> npt.NDArray:
        return np.linalg.norm(self.nodes, axis=1)

    def distances(self) -> npt.NDArray:
        return np.maximum(1.0 - self.radii(), 0.0)

    def cell_radii(self) -> npt.NDArray:
        """Equal-volume ball radius per node cell, used for singular cells."""
        return (self.weights / ball_volume(self.n)) ** (1.0 / self.n)

    def validate(self) -> None:
        if self.nodes.shape != (self.weights.shape[0], self.n):
            raise InvariantViolation("node/weight shape mismatch")
        if not np.all(np.isfinite(self.nodes)) or not np.all(np.isfinite(self.weights)):
            raise InvariantViolation("grid contains non-finite entries")
        if np.any(self.weights <= 0):
            raise InvariantViolation("grid contains non-positive weights")
        if np.any(np.linalg.norm(self.nodes, axis=1) >= 1.0 - INTERIOR_MARGIN):
            raise InvariantViolation("grid node touches the boundary margin")


@dataclass(frozen=True)
class ConeRegion:
    """Revolution cone with vertex on the boundary, truncated inside B.

    The region is {x : angle(x - x0, axis) <= half_aperture,
    0 < |x - x0| < cap_radius}.  Defaults (aperture pi/6, cap 1/2,
    axis = -x0) visibly satisfy the containment in the unit ball.
    """

    x0: tuple
    axis: tuple = None
    half_aperture: float = math.pi / 6
    cap_radius: float = 0.5

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if abs(np.linalg.norm(x0) - 1.0) > 1e-9:
            raise ParameterError("cone vertex x0 must lie on the unit sphere")
        object.__setattr__(self, "x0", tuple(x0))
        axis = -x0 if self.axis is None else np.asarray(self.axis, dtype=float)
        na = np.linalg.norm(axis)
        if na == 0:
            raise ParameterError("cone axis must be a nonzero vector")
        axis = axis / na
        if np.dot(axis, x0) >= 0:
            raise ParameterError("cone axis must point inward")
        object.__setattr__(self, "axis", tuple(axis))
        if not (0 < self.half_aperture < math.pi / 2):
            raise ParameterError("half_aperture must be in (0, pi/2)")
        if not (0 < self.cap_radius <= 1):
            raise ParameterError("cap_radius must be in (0, 1]")

    @property
    def dim(self) -> int:
        return len(self.x0)


def default_cone(n: int) -> ConeRegion:
    """Default cone at x0 = e1 with aperture pi/6 and cap radius 1/2."""
    x0 = np.zeros(n)
    x0[0] = 1.0
    return ConeRegion(x0=tuple(x0))


def cone_contains(region: ConeRegion, x) -> bool | npt.NDArray:
    """Membership predicate for the truncated cone; accepts (N, n) arrays."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    dx = pts - np.asarray(region.x0)
    rho = np.linalg.norm(dx, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = np.where(rho > 0, dx @ np.asarray(region.axis) / np.where(rho > 0, rho, 1.0), -1.0)
    inside = (rho > 0) & (rho < region.cap_radius) & (cosang >= math.cos(region.half_aperture) - 1e-12)
    return bool(inside[0]) if single else inside


def vertex_distances(region: ConeRegion, points: npt.NDArray) -> npt.NDArray:
    return np.linalg.norm(points - np.asarray(region.x0), axis=1)


# ---------------------------------------------------------------------------
# grid construction
# ---------------------------------------------------------------------------


def _radial_rule(count: int, gamma: int):
    """Boundary-graded midpoint rule on (0,1): r = 1-(1-t)^gamma."""
    t = (np.arange(count) + 0.5) / count
    r = 1.0 - (1.0 - t) ** gamma
    jac = gamma * (1.0 - t) ** (gamma - 1) / count
    return r, jac


def _halton(indices: npt.NDArray, base: int) -> npt.NDArray:
    idx = indices.astype(np.int64).copy()
    out = np.zeros(idx.shape, dtype=float)
    f = 1.0
    while np.any(idx > 0):
        f /= base
        out += f * (idx % base)
        idx //= base
    return out


def _s3_polar_from_uniform(u: npt.NDArray) -> npt.NDArray:
    """Invert the S^3 polar-angle CDF (chi - sin chi cos chi)/pi = u."""
    lo = np.zeros_like(u)
    hi = np.full_like(u, math.pi)
    target = u * math.pi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        val = mid - np.sin(mid) * np.cos(mid)
        high = val > target
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    return 0.5 * (lo + hi)


def _base_grid(n: int, level: int, gamma: int):
    if n == 2:
        nr, nt = (c * 2**level for c in _BASE_COUNTS[2])
        r, jac = _radial_rule(nr, gamma)
        theta = 2 * math.pi * (np.arange(nt) + 0.5) / nt
        rr, tt = np.meshgrid(r, theta, indexing="ij")
        nodes = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
        w = (jac * r)[:, None] * np.full(nt, 2 * math.pi / nt)[None, :]
        return nodes, w.reshape(-1)
    if n == 3:
        nr, nmu, nt = (c * 2**level for c in _BASE_COUNTS[3])
        r, jac = _radial_rule(nr, gamma)
        mu = -1.0 + 2.0 * (np.arange(nmu) + 0.5) / nmu
        theta = 2 * math.pi * (np.arange(nt) + 0.5) / nt
        rr, mm, tt = np.meshgrid(r, mu, theta, indexing="ij")
        s = np.sqrt(1.0 - mm**2)
        nodes = np.stack([rr * s * np.cos(tt), rr * s * np.sin(tt), rr * mm], axis=-1).reshape(-1, 3)
        w = (jac * r**2)[:, None, None] * np.full((nmu, nt), (2.0 / nmu) * (2 * math.pi / nt))[None, :, :]
        return nodes, w.reshape(-1)
    if n == 4:
        count = _BASE_COUNT_4D * 16**level
        idx = np.arange(1, count + 1)
        # clamp keeps 1 - r >= 1e-8, clear of the interior margin
        u0 = np.minimum(_halton(idx, 2), 1.0 - 1e-4)
        t = u0
        r = 1.0 - (1.0 - t) ** gamma
        jac = gamma * (1.0 - t) ** (gamma - 1)
        chi = _s3_polar_from_uniform(_halton(idx, 3))
        z = 2.0 * _halton(idx, 5) - 1.0
        az = 2 * math.pi * _halton(idx, 7)
        sz = np.sqrt(np.maximum(1.0 - z**2, 0.0))
        omega = np.stack(
            [np.cos(chi), np.sin(chi) * sz * np.cos(az), np.sin(chi) * sz * np.sin(az), np.sin(chi) * z],
            axis=-1,
        )
        nodes = r[:, None] * omega
        w = 2 * math.pi**2 * r**3 * jac / count
        return nodes, w
    raise ParameterError(f"unsupported dimension n={n}; grids are implemented for n <= 4")


def _complement_frame(axis: npt.NDArray) -> npt.NDArray:
    """Orthonormal complement of ``axis`` via a Householder reflection."""
    n = axis.size
    e1 = np.zeros(n)
    e1[0] = 1.0
    v = axis - e1
    nv = np.linalg.norm(v)
    if nv < 1e-14:
        q = np.eye(n)
    else:
        v = v / nv
        q = np.eye(n) - 2.0 * np.outer(v, v)
    return q[:, 1:]


def _shell_rows(n: int, rho: float, drho: float, counts, frame, axis, x0):
    """Nodes/weights on the spherical slice {|y-x0| = rho} ∩ B.

    Membership y in B is exactly (y - x0)·axis > rho/2 for axis = -x0,
    so the slice is a polar cap of half-angle arccos(rho/2) around axis.
    """
    mu_max = 1.0
    mu_min = rho / 2.0
    if n == 2:
        (_, narc) = counts
        tmax = math.acos(mu_min)
        tgrid = -tmax + 2 * tmax * (np.arange(narc) + 0.5) / narc
        dirs = np.outer(np.cos(tgrid), axis) + np.outer(np.sin(tgrid), frame[:, 0])
        w = rho * drho * (2 * tmax / narc) * np.ones(narc)
        return x0 + rho * dirs, w
    if n == 3:
        (_, nmu, naz) = counts
        mu = mu_min + (mu_max - mu_min) * (np.arange(nmu) + 0.5) / nmu
        azv = 2 * math.pi * (np.arange(naz) + 0.5) / naz
        mm, aa = np.meshgrid(mu, azv, indexing="ij")
        s = np.sqrt(np.maximum(1.0 - mm**2, 0.0))
        dirs = (
            mm[..., None] * axis
            + (s * np.cos(aa))[..., None] * frame[:, 0]
            + (s * np.sin(aa))[..., None] * frame[:, 1]
        ).reshape(-1, 3)
        w = rho**2 * drho * ((mu_max - mu_min) / nmu) * (2 * math.pi / naz) * np.ones(dirs.shape[0])
        return x0 + rho * dirs, w
    if n == 4:
        (_, npsi, nz, naz) = counts
        psi_max = math.acos(mu_min)
        psi = psi_max * (np.arange(npsi) + 0.5) / npsi
        z = -1.0 + 2.0 * (np.arange(nz) + 0.5) / nz
        azv = 2 * math.pi * (np.arange(naz) + 0.5) / naz
        pp, zz, aa = np.meshgrid(psi, z, azv, indexing="ij")
        sz = np.sqrt(np.maximum(1.0 - zz**2, 0.0))
        fib = (
            (sz * np.cos(aa))[..., None] * frame[:, 0]
            + (sz * np.sin(aa))[..., None] * frame[:, 1]
            + zz[..., None] * frame[:, 2]
        )
        dirs = (np.cos(pp)[..., None] * axis + np.sin(pp)[..., None] * fib).reshape(-1, 4)
        w = (
            rho**3
            * drho
            * (np.sin(pp) ** 2 * (psi_max / npsi) * (2.0 / nz) * (2 * math.pi / naz)
            ).reshape(-1)
        )
        return x0 + rho * dirs, w
    raise ParameterError(f"unsupported dimension n={n}")


def _focus_shells(n: int, grading: GradingSpec, level: int):
    x0 = np.asarray(grading.focus, dtype=float)
    axis = -x0
    frame = _complement_frame(axis)
    counts = tuple(c * 2**level if i == 0 else c for i, c in enumerate(_SHELL_COUNTS[n]))
    rings = grading.rings + level
    all_nodes, all_w = [], []
    radius = grading.focus_radius
    for s in range(1, rings + 1):
        hi = radius * 2.0 ** (1 - s)
        lo = radius * 2.0**-s
        nrho = counts[0]
        drho = (hi - lo) / nrho
        for i in range(nrho):
            rho = lo + (i + 0.5) * drho
            pts, w = _shell_rows(n, rho, drho, counts, frame, axis, x0)
            all_nodes.append(pts)
            all_w.append(w)
    return np.concatenate(all_nodes), np.concatenate(all_w)


def build_grid(problem: BallProblem, level: int, grading: GradingSpec | None = None,
               use_cache: bool = True) -> QuadratureGrid:
    """Build the level-``level`` quadrature grid for ``problem``.

    Product grid (radial x angular) for n = 2, 3 and Halton sampling with
    weights for n = 4, radially graded toward the boundary, locally
    refined in geometric shells around ``grading.focus`` when given.
    Deterministic for fixed inputs; cached on disk keyed by
    (n, level, grading).
    """
    grading = grading or GradingSpec()
    if not isinstance(level, (int, np.integer)) or level < 0:
        raise ParameterError(f"refinement level must be an integer >= 0, got {level!r}")
    if problem.n > MAX_GRID_DIMENSION:
        raise ParameterError(
            f"unsupported dimension n={problem.n}; grids are implemented for n <= {MAX_GRID_DIMENSION}"
        )
    if grading.focus is not None and len(grading.focus) != problem.n:
        raise ParameterError("focus point dimension does not match the problem")

    if use_cache:
        cached = _load_cached_grid(problem.n, level, grading)
        if cached is not None:
            return cached

    nodes, weights = _base_grid(problem.n, level, grading.boundary_exponent)
    if grading.focus is not None:
        x0 = np.asarray(grading.focus)
        keep = np.linalg.norm(nodes - x0, axis=1) >= grading.focus_radius
        nodes, weights = nodes[keep], weights[keep]
        sn, sw = _focus_shells(problem.n, grading, level)
        nodes = np.concatenate([nodes, sn])
        weights = np.concatenate([weights, sw])

    grid = QuadratureGrid(n=problem.n, level=int(level), grading=grading,
                          nodes=np.ascontiguousarray(nodes), weights=np.ascontiguousarray(weights))
    grid.validate()
    if use_cache:
        _store_cached_grid(grid)
    return grid


# ---------------------------------------------------------------------------
# weighted norms
# ---------------------------------------------------------------------------


def weighted_integral(grid: QuadratureGrid, values: npt.NDArray, weight_power: float = 0.0) -> float:
    """Quadrature value of the d^weight_power weighted integral of ``values``."""
    if weight_power == 0:
        return stable_sum(grid.weights * values)
    return stable_sum(grid.weights * values * grid.distances() ** weight_power)


def weighted_norm(field, p: float, weight_power: float) -> float:
    """Weighted Lebesgue norm (integral of |u|^p d^weight_power)^(1/p).

    ``p = inf`` returns the plain grid supremum of |u| (the weighted
    sup-norm is defined as the unweighted one).
    """
    if p < 1:
        raise ParameterError(f"norm exponent p must be >= 1, got {p}")
    values = np.asarray(field.values, dtype=float)
    if math.isinf(p):
        return float(np.max(np.abs(values))) if values.size else 0.0
    total = weighted_integral(field.grid, np.abs(values) ** p, weight_power)
    return total ** (1.0 / p)


# ---------------------------------------------------------------------------
# disk cache
# ---------------------------------------------------------------------------


def cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV_VAR, ".cache"))


def _cache_path(n: int, level: int, grading: GradingSpec) -> Path:
    token = grading.token()
    digest = sha256(token.encode()).hexdigest()[:12]
    return cache_dir() / f"grid-n{n}-L{level}-{digest}.bin"


def _grid_header(n: int, level: int, grading: GradingSpec) -> str:
    return f"{_GRID_MAGIC} n={n} level={level} grading={grading.token()}\n"


def save_grid(grid: QuadratureGrid, path: Path) -> None:
    """Write a grid in the binary cache format (header, nodes, weights)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _grid_header(grid.n, grid.level, grid.grading)
    with open(path, "wb") as fh:
        fh.write(header.encode())
        fh.write(grid.nodes.astype("<f8").tobytes())
        fh.write(grid.weights.astype("<f8").tobytes())


def load_grid(path: Path) -> QuadratureGrid:
    """Read a grid from the binary cache format; raises on any corruption."""
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = raw[:nl].decode()
    m = re.fullmatch(rf"{re.escape(_GRID_MAGIC)} n=(\d+) level=(\d+) grading=(\S+)", header)
    if m is None:
        raise ParameterError(f"not a polyharm grid file: {path}")
    n, level = int(m.group(1)), int(m.group(2))
    grading = _parse_grading_token(m.group(3))
    body = np.frombuffer(raw[nl + 1 :], dtype="<f8")
    if body.size % (n + 1) != 0:
        raise ParameterError(f"truncated grid file: {path}")
    count = body.size // (n + 1)
    nodes = body[: count * n].reshape(count, n).copy()
    weights = body[count * n :].copy()
    grid = QuadratureGrid(n=n, level=level, grading=grading, nodes=nodes, weights=weights)
    grid.validate()
    return grid


def _parse_grading_token(token: str) -> GradingSpec:
    parts = token.split(";")
    m = re.fullmatch(r"b(\d+)", parts[0])
    if m is None:
        raise ParameterError(f"bad grading token {token!r}")
    kwargs = {"boundary_exponent": int(m.group(1))}
    for part in parts[1:]:
        key, _, val = part.partition("=")
        if key == "f":
            kwargs["focus"] = tuple(float(c) for c in val.split("_"))
        elif key == "R":
            kwargs["focus_radius"] = float(val)
        elif key == "s":
            kwargs["rings"] = int(val)
        else:
            raise ParameterError(f"bad grading token {token!r}")
    return GradingSpec(**kwargs)


def _load_cached_grid(n: int, level: int, grading: GradingSpec):
    path = _cache_path(n, level, grading)
    if not path.exists():
        return None
    try:
        grid = load_grid(path)
        if grid.n != n or grid.level != level or grid.grading.token() != grading.token():
            raise ParameterError("cache key mismatch")
        return grid
    except Exception:
        # Corrupt cache entries are rebuilt transparently.
        return None


def _store_cached_grid(grid: QuadratureGrid) -> None:
    path = _cache_path(grid.n, grid.level, grid.grading)
    try:
        from filelock import FileLock

        path.parent.mkdir(parents=True, exist_ok=True)
        with FileLock(str(path) + ".lock"):
            if not path.exists():
                save_grid(grid, path)
    except OSError:
        pass
