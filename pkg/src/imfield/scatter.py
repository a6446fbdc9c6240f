"""Volume-potential scattering generator and a data-reduction demo.

The outgoing resolvent kernel R(x, y) of the perturbed Helmholtz operator
satisfies the volume integral equation

    R(x, y) = -G(x - y) + integral_Omega G(x - z) v(z) R(z, y) dz,

with G(x) = (i/4) H_0(kappa |x|) the free outgoing kernel and v a bounded
complex potential supported on a rectangle Omega. The equation is
discretized by a Nystrom method on the cell centers of an n x n grid with
product integration of the logarithmic part of G: the cell weight is the
exact integral of -(1/2 pi) ln|x - z| over the cell (closed form) plus the
midpoint value of the smooth remainder. That keeps the weight matrix
symmetric and the scheme second order, where plain midpoint stalls at
O(n^-1 log n) on the diagonal.

Far-field links implemented here: for |x| large,

    R(x, y)          ~ -(1/2) sqrt(1/(2 pi kappa |x|)) e^{i(kappa|x| + pi/4)}
                       psi(y, -kappa x/|x|),
    psi_sc(x, k)     ~ e^{i kappa |x|} / sqrt(|x|) A(k, kappa x/|x|),

where psi(., k) = e^{i k .} + psi_sc is the total plane-wave field with
incident wavevector k, |k| = kappa, and A is the scattering amplitude.
Both prefactors are inverted at several radii and extrapolated in 1/|x|.

gkl_reduce demonstrates the reduction of the data Im R(x, y) on a line to
the full complex R: the free part is removed analytically (Im G is the
smooth function (1/4) J_0(kappa |x - y|)), the remainder D = R + G radiates
from Omega only, so its weighted imaginary part on the line's two rays
feeds the far-field extraction / Karp / line-trace pipeline, and G is added
back at the end.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .specfun import EULER_GAMMA, _reduce_phase, hankel1
from .fields import ImSamples, RayGeometry
from .farfield import (extract_all, extract_sequence_extrapolated,
                       make_schedule, schedule_abscissas)
from .karp import karp_from_farfield
from .propagate import (HalfPlaneSpec, LineSpec, _trusted_radius,
                        karp_line_trace)

__all__ = [
    "PotentialGrid",
    "GreenOperatorMatrix",
    "green_operator_matrix",
    "solve_lippmann_schwinger",
    "check_reciprocity",
    "plane_wave_solution",
    "psi_plus_farfield",
    "scattering_amplitude",
    "GklReport",
    "gkl_reduce",
    "potential_to_dict",
    "potential_from_dict",
]


@dataclass(frozen=True, eq=False)
class PotentialGrid:
    """Complex potential sampled on the n x n cell centers of a rectangle.

    bbox = (x0, y0, x1, y1); cell (i, j) is centered at
    (x0 + (i + 1/2) hx, y0 + (j + 1/2) hy), i.e. the first index walks the
    x axis. v vanishes identically outside the rectangle.
    """

    bbox: tuple
    n: int
    v: np.ndarray
    kappa: float

    def __post_init__(self):
        box = tuple(float(b) for b in self.bbox)
        if len(box) != 4 or not all(np.isfinite(box)):
            raise ValueError("bbox must be (x0, y0, x1, y1), finite")
        if box[2] <= box[0] or box[3] <= box[1]:
            raise ValueError("bbox must have positive width and height")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        vv = np.asarray(self.v, dtype=complex)
        if vv.shape != (self.n, self.n):
            raise ValueError("v must have shape (n, n)")
        if not np.all(np.isfinite(vv)):
            raise ValueError("v must be finite")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        object.__setattr__(self, "bbox", box)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "v", vv)
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def cell_size(self):
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) / self.n, (y1 - y0) / self.n

    @property
    def v_flat(self) -> np.ndarray:
        return self.v.reshape(-1)

    @property
    def is_free(self) -> bool:
        return not np.any(self.v)

    def centers(self) -> np.ndarray:
        """Cell centers, shape (n*n, 2), first index of v varying slowest."""
        x0, y0, _, _ = self.bbox
        hx, hy = self.cell_size
        xs = x0 + (np.arange(self.n) + 0.5) * hx
        ys = y0 + (np.arange(self.n) + 0.5) * hy
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx.reshape(-1), gy.reshape(-1)], axis=1)

    def center_point(self):
        x0, y0, x1, y1 = self.bbox
        return np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])


@dataclass(frozen=True, eq=False)
class GreenOperatorMatrix:
    """Dense discretization of u -> integral_Omega G(x - z) v(z) u(z) dz.

    weights[i, j] is the corrected cell integral of G about center i; the
    operator matrix is weights * v (column scaling), evaluated on centers.
    weights is symmetric because the kernel and the cell geometry are.
    """

    kappa: float
    weights: np.ndarray
    v_flat: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex)
        vf = np.asarray(self.v_flat, dtype=complex)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] != vf.size:
            raise ValueError("weights must be square and match v")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "v_flat", vf)
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def matrix(self) -> np.ndarray:
        return self.weights * self.v_flat[None, :]


def _log_primitive(x, y):
    """F with d2F/dxdy = ln sqrt(x^2 + y^2); odd in each argument.

    Corner differences of F integrate ln|z| exactly over any axis-aligned
    rectangle, including rectangles containing the origin.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * x * y * (np.log(r2) - 3.0)
        out = np.where(r2 > 0.0, out, 0.0)
        ax = np.where(x != 0.0, 0.5 * x * x * np.arctan(
            np.divide(y, x, out=np.zeros_like(y + x), where=x != 0.0)), 0.0)
        ay = np.where(y != 0.0, 0.5 * y * y * np.arctan(
            np.divide(x, y, out=np.zeros_like(y + x), where=y != 0.0)), 0.0)
    return out + ax + ay


def _log_rect_integral(u, w, hx, hy):
    """integral of ln|z| over the rectangle with center (u, w), sides hx, hy.

    The singular point is the coordinate origin; it may lie inside, on the
    boundary of, or far from the rectangle.
    """
    p, q = 0.5 * hx, 0.5 * hy
    return (_log_primitive(u + p, w + q) - _log_primitive(u - p, w + q)
            - _log_primitive(u + p, w - q) + _log_primitive(u - p, w - q))


def _weight_rows(points, centers, hx, hy, kappa):
    """Corrected cell weights, shape (len(points), len(centers)).

    Row i approximates cell integrals of G(x_i - z): midpoint of the smooth
    remainder G + (1/2 pi) ln plus the exact log integral. Valid for any
    x_i, on a cell center included.
    """
    pts = np.asarray(points, dtype=float)
    cen = np.asarray(centers, dtype=float)
    area = hx * hy
    c0 = 0.25j + (np.log(2.0) - EULER_GAMMA - np.log(kappa)) / (2.0 * np.pi)
    out = np.empty((pts.shape[0], cen.shape[0]), dtype=complex)
    # chunk the rows to bound the temporaries at desk scale
    chunk = max(1, int(2 ** 21 // max(cen.shape[0], 1)))
    for lo in range(0, pts.shape[0], chunk):
        block = pts[lo:lo + chunk]
        dx = cen[None, :, 0] - block[:, None, 0]
        dy = cen[None, :, 1] - block[:, None, 1]
        d = np.hypot(dx, dy)
        smooth = np.full(d.shape, c0, dtype=complex)
        pos = d > 0.0
        if np.any(pos):
            dp = d[pos]
            smooth[pos] = 0.25j * hankel1(0, kappa * dp) \
                + np.log(dp) / (2.0 * np.pi)
        logint = _log_rect_integral(dx, dy, hx, hy)
        out[lo:lo + chunk] = area * smooth - logint / (2.0 * np.pi)
    return out


def green_operator_matrix(grid: PotentialGrid) -> GreenOperatorMatrix:
    """Assemble the dense corrected-weight operator for the grid."""
    hx, hy = grid.cell_size
    w = _weight_rows(grid.centers(), grid.centers(), hx, hy, grid.kappa)
    return GreenOperatorMatrix(kappa=grid.kappa, weights=w, v_flat=grid.v_flat)


class _SolverCore:
    """Factored interior system for one grid, shared across source points."""

    __slots__ = ("weights", "inv", "cond", "centers")

    def __init__(self, grid: PotentialGrid):
        gom = green_operator_matrix(grid)
        self.weights = gom.weights
        self.centers = grid.centers()
        n2 = self.weights.shape[0]
        a = -gom.matrix
        a.flat[::n2 + 1] += 1.0
        try:
            inv = np.linalg.inv(a)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(
                "interior system is singular: the unique-solvability "
                "condition fails for this potential and kappa") from exc
        cond = float(np.linalg.norm(a, 1) * np.linalg.norm(inv, 1))
        if not np.isfinite(cond) or cond > 1e12:
            raise RuntimeError(
                f"interior system is near-singular (cond ~ {cond:.3g}): the "
                "unique-solvability condition fails for this potential and "
                "kappa; it is reported rather than regularized")
        self.inv = inv
        self.cond = cond


_CORES = weakref.WeakKeyDictionary()


def _core(grid: PotentialGrid) -> _SolverCore:
    core = _CORES.get(grid)
    if core is None:
        core = _SolverCore(grid)
        _CORES[grid] = core
    return core


def _free_kernel(kappa, x):
    """G(x) = (i/4) H_0(kappa |x|) on points of shape (..., 2)."""
    pts = np.asarray(x, dtype=float)
    d = np.hypot(pts[..., 0], pts[..., 1])
    if np.any(d == 0.0):
        raise ValueError("free kernel is singular at zero separation")
    return 0.25j * hankel1(0, kappa * d)


class ResolventEvaluator:
    """Field R(., y) anywhere in the plane, from solved interior values.

    correction(x) is the integral term alone; it is smooth across x = y and
    vanishes identically for a zero potential (built without any solve).
    """

    __slots__ = ("kappa", "y", "_coeff", "_cells")

    def __init__(self, kappa, y, coeff, cells):
        self.kappa = float(kappa)
        self.y = np.array(y, dtype=float)
        self._coeff = coeff
        self._cells = cells

    def correction(self, x):
        pts = np.asarray(x, dtype=float)
        if pts.shape[-1] != 2:
            raise ValueError("x must have shape (..., 2)")
        if self._coeff is None:
            out = np.zeros(pts.shape[:-1], dtype=complex)
            return complex(out) if pts.ndim == 1 else out
        flat = pts.reshape(-1, 2)
        hx, hy, cen = self._cells
        rows = _weight_rows(flat, cen, hx, hy, self.kappa)
        vals = rows @ self._coeff
        return complex(vals[0]) if pts.ndim == 1 else vals.reshape(pts.shape[:-1])

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        free = -_free_kernel(self.kappa, pts - self.y)
        return free + self.correction(pts)


def solve_lippmann_schwinger(grid: PotentialGrid, y) -> ResolventEvaluator:
    """Evaluator for the outgoing resolvent kernel R(., y) of the grid.

    For a zero potential the free kernel -G(x - y) is returned without
    assembling or solving anything. Otherwise the interior values on the
    cell centers solve (I - W diag(v)) u = -G(. - y) with the corrected
    weight matrix W, and the evaluator applies one more corrected
    quadrature of G v u plus the free term. Raises RuntimeError when the
    interior system is (near-)singular, i.e. the unique-solvability
    condition fails at this kappa.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (2,):
        raise ValueError("y must be a point in the plane")
    if grid.is_free:
        return ResolventEvaluator(grid.kappa, y, None, None)
    core = _core(grid)
    hx, hy = grid.cell_size
    gap = np.hypot(core.centers[:, 0] - y[0], core.centers[:, 1] - y[1])
    if np.min(gap) < 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        raise ValueError("y coincides with a cell center; offset it")
    rhs = -0.25j * hankel1(0, grid.kappa * gap)
    u = core.inv @ rhs
    coeff = grid.v_flat * u
    return ResolventEvaluator(grid.kappa, y, coeff, (hx, hy, core.centers))


def check_reciprocity(grid: PotentialGrid, x, y) -> float:
    """|R(x,y) - R(y,x)| / max(|R(x,y)|, tiny); zero for a free grid."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rxy = solve_lippmann_schwinger(grid, y)(x)
    ryx = solve_lippmann_schwinger(grid, x)(y)
    return abs(rxy - ryx) / max(abs(rxy), 1e-300)


class PlaneWaveEvaluator:
    """Total field psi(., k) = e^{i k .} + scattered part for one incident k."""

    __slots__ = ("kappa", "k", "_coeff", "_cells")

    def __init__(self, kappa, k, coeff, cells):
        self.kappa = float(kappa)
        self.k = np.array(k, dtype=float)
        self._coeff = coeff
        self._cells = cells

    def scattered(self, x):
        pts = np.asarray(x, dtype=float)
        if pts.shape[-1] != 2:
            raise ValueError("x must have shape (..., 2)")
        if self._coeff is None:
            out = np.zeros(pts.shape[:-1], dtype=complex)
            return complex(out) if pts.ndim == 1 else out
        flat = pts.reshape(-1, 2)
        hx, hy, cen = self._cells
        rows = _weight_rows(flat, cen, hx, hy, self.kappa)
        vals = rows @ self._coeff
        return complex(vals[0]) if pts.ndim == 1 else vals.reshape(pts.shape[:-1])

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        return np.exp(1j * (pts @ self.k)) + self.scattered(pts)


def plane_wave_solution(grid: PotentialGrid, k) -> PlaneWaveEvaluator:
    """Total field for an incident plane wave e^{i k x}, |k| = kappa."""
    k = np.asarray(k, dtype=float)
    if k.shape != (2,):
        raise ValueError("k must be a planar wavevector")
    if abs(float(np.hypot(*k)) - grid.kappa) > 1e-9 * grid.kappa:
        raise ValueError("|k| must equal kappa")
    if grid.is_free:
        return PlaneWaveEvaluator(grid.kappa, k, None, None)
    core = _core(grid)
    hx, hy = grid.cell_size
    rhs = np.exp(1j * (core.centers @ k))
    u = core.inv @ rhs
    coeff = grid.v_flat * u
    return PlaneWaveEvaluator(grid.kappa, k, coeff, (hx, hy, core.centers))


def _unit(vec, name):
    v = np.asarray(vec, dtype=float)
    if v.shape != (2,):
        raise ValueError(f"{name} must be a planar vector")
    norm = float(np.hypot(*v))
    if norm == 0.0:
        raise ValueError(f"{name} must be nonzero")
    return v / norm


def psi_plus_farfield(grid: PotentialGrid, y, direction, radii) -> complex:
    """Total plane-wave field psi(y, k) for k = -kappa*direction, read off R.

    At large |x| the kernel behaves like
    -(1/2) sqrt(1/(2 pi kappa |x|)) e^{i(kappa|x| + pi/4)} psi(y, -kappa x/|x|);
    the prefactor is inverted at each radius (all >= 100 wavelengths) and the
    estimates are extrapolated to 1/|x| -> 0. For a zero potential the result
    reduces to the plane wave e^{i k y}.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (2,):
        raise ValueError("y must be a point in the plane")
    xhat = _unit(direction, "direction")
    r = np.unique(np.asarray(radii, dtype=float))
    if r.size < 2:
        raise ValueError("need at least two distinct radii")
    lam = 2.0 * np.pi / grid.kappa
    if np.min(r) < 100.0 * lam:
        raise ValueError("radii must all be >= 100 wavelengths")
    field = solve_lippmann_schwinger(grid, y)
    vals = field(np.multiply.outer(r, xhat))
    phase = _reduce_phase(grid.kappa * r) + 0.25 * np.pi
    pref = -0.5 * np.sqrt(1.0 / (2.0 * np.pi * grid.kappa * r)) \
        * np.exp(1j * phase)
    depth = min(3, r.size - 1)
    return extract_sequence_extrapolated(list(zip(r, vals / pref)), depth)


def scattering_amplitude(grid: PotentialGrid, k, directions, radii=None):
    """Amplitudes A(k, kappa x_hat) for each observation direction x_hat.

    The scattered part of the plane-wave field behaves like
    e^{i kappa |x|} / sqrt(|x|) A at large |x|; the prefactor is inverted on
    a geometric radius ladder (default 200 wavelengths doubled three times)
    and extrapolated in 1/|x|. Returns a complex array, one entry per
    direction; identically zero for a zero potential.
    """
    lam = 2.0 * np.pi / grid.kappa
    if radii is None:
        radii = 200.0 * lam * 2.0 ** np.arange(4)
    r = np.unique(np.asarray(radii, dtype=float))
    if r.size < 2:
        raise ValueError("need at least two distinct radii")
    if np.min(r) < 100.0 * lam:
        raise ValueError("radii must all be >= 100 wavelengths")
    field = plane_wave_solution(grid, k)
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if dirs.shape[-1] != 2:
        raise ValueError("directions must have shape (m, 2)")
    depth = min(3, r.size - 1)
    damp = np.sqrt(r) * np.exp(-1j * _reduce_phase(grid.kappa * r))
    out = np.empty(dirs.shape[0], dtype=complex)
    for i in range(dirs.shape[0]):
        xhat = _unit(dirs[i], "directions")
        vals = field.scattered(np.multiply.outer(r, xhat)) * damp
        out[i] = extract_sequence_extrapolated(list(zip(r, vals)), depth)
    return out


@dataclass(frozen=True)
class GklReport:
    """Recovered vs direct resolvent table on line points Lambda x Lambda.

    Diagonal entries are NaN (R is singular at coinciding arguments). The
    defects are max |T - T^T| over off-diagonal pairs, and all three metrics
    are relative to the largest off-diagonal direct value.
    """

    s_points: np.ndarray
    recovered: np.ndarray
    direct: np.ndarray
    max_rel_err: float
    defect_recovered: float
    defect_direct: float


def _noise_schedule(kappa, order, data_tol):
    """Extraction schedule matched to the accuracy of the supplied samples.

    Estimating the j-th far-field coefficient amplifies sample errors by
    r^j, so the top radius is capped at (0.03 / data_tol)^(1/order); the
    machine-accuracy default schedules would turn solver-grade data into
    noise in the high coefficients.
    """
    lam = 2.0 * np.pi / kappa
    r_max = (0.03 / data_tol) ** (1.0 / order)
    if r_max < 6.0 * lam:
        raise ValueError("order too high for the sample accuracy: the "
                         "usable radius window collapses")
    s0 = max(3.0 * lam, r_max / 8.0)
    growth = (r_max / s0) ** (1.0 / 9.0)
    return make_schedule(kappa, s0=s0, growth=growth, count=10)


def _offdiag_scale(table):
    mask = ~np.eye(table.shape[0], dtype=bool)
    return float(np.max(np.abs(table[mask])))


def _table_defect(table, scale):
    mask = ~np.eye(table.shape[0], dtype=bool)
    gap = np.abs(table - table.T)[mask]
    return float(np.max(gap)) / scale


def gkl_reduce(grid: PotentialGrid, line: LineSpec, interval, order: int,
               n_points: int = 5, gap_modes=None,
               data_tol: float = 1e-6) -> GklReport:
    """Recover complex R(x, y) on Lambda x Lambda from Im R sampled on the line.

    Lambda is n_points equally spaced points of the interval (given in the
    line's abscissa). For each source y in Lambda the free part is removed,
    D = R + G, whose imaginary part on the line is Im R + (1/4) J_0(kappa
    |x - y|); D radiates from Omega only, so weighted samples of Im D on the
    line's two rays run through the far-field / Karp / trace pipeline, and
    the recovered D is turned back into R by subtracting G analytically.
    Returns the recovered and directly solved tables with relative error and
    reciprocity-defect metrics. The line must keep clear of Omega; data_tol
    is the absolute accuracy of the sampled imaginary parts (solver grade by
    default) and bounds the extraction radii.
    """
    if not isinstance(line, LineSpec):
        raise ValueError("line must be a LineSpec")
    s_min, s_max = float(interval[0]), float(interval[1])
    if not s_max > s_min:
        raise ValueError("interval must satisfy s_min < s_max")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if order < 1:
        raise ValueError("order must be >= 1")
    kappa = grid.kappa
    lam = 2.0 * np.pi / kappa
    p0 = np.asarray(line.point)
    theta = np.asarray(line.theta)
    nu = np.array([-theta[1], theta[0]])

    # the support must sit on one side of the line, at least a quarter
    # wavelength away, or R is not a radiation solution past the line
    x0, y0, x1, y1 = grid.bbox
    corners = np.array([[x0, y0], [x0, y1], [x1, y0], [x1, y1]])
    offs = (corners - p0) @ nu
    if np.min(offs) * np.max(offs) <= 0 or np.min(np.abs(offs)) < 0.25 * lam:
        raise ValueError("line must keep clear of the potential support")

    center = grid.center_point()
    s_q = float((center - p0) @ theta)  # foot of the support center
    origin = p0 + s_q * theta
    spec = HalfPlaneSpec(line=line, normal=tuple(nu))
    s_pts = np.linspace(s_min, s_max, n_points)
    lam_pts = p0 + np.multiply.outer(s_pts, theta)

    schedule = _noise_schedule(kappa, order, data_tol)
    sched_abs = schedule_abscissas(schedule)
    ray_plus = RayGeometry(origin=tuple(origin), direction=tuple(theta))
    ray_minus = RayGeometry(origin=tuple(origin), direction=tuple(-theta))
    pts_plus = origin + np.multiply.outer(sched_abs, theta)
    pts_minus = origin - np.multiply.outer(sched_abs, theta)
    rad_plus = np.hypot(pts_plus[:, 0], pts_plus[:, 1])
    rad_minus = np.hypot(pts_minus[:, 0], pts_minus[:, 1])

    hx, hy = grid.cell_size
    if grid.is_free:
        coeffs = [None] * n_points
    else:
        core = _core(grid)
        rows_plus = _weight_rows(pts_plus, core.centers, hx, hy, kappa)
        rows_minus = _weight_rows(pts_minus, core.centers, hx, hy, kappa)
        rows_lam = _weight_rows(lam_pts, core.centers, hx, hy, kappa)
        coeffs = []
        for j in range(n_points):
            gap = np.hypot(core.centers[:, 0] - lam_pts[j, 0],
                           core.centers[:, 1] - lam_pts[j, 1])
            rhs = -0.25j * hankel1(0, kappa * gap)
            coeffs.append(grid.v_flat * (core.inv @ rhs))

    recovered = np.full((n_points, n_points), np.nan + 0j, dtype=complex)
    direct = np.full((n_points, n_points), np.nan + 0j, dtype=complex)
    gap_cache = {"extent": 0.0, "pts": None, "rows": None}

    def gap_data(extent):
        # dense two-sided coverage of |xi| <= extent, reused across sources
        if extent > gap_cache["extent"]:
            m = int(np.ceil(extent / (lam / 12.0)))
            xs = (np.arange(m) + 0.5) * (lam / 12.0)
            xs = np.concatenate([-xs[::-1], xs])
            gap_cache["pts"] = origin + np.multiply.outer(xs, theta)
            gap_cache["rows"] = _weight_rows(gap_cache["pts"], core.centers,
                                             hx, hy, kappa)
            gap_cache["extent"] = extent
        return gap_cache["pts"], gap_cache["rows"]

    for j in range(n_points):
        coeff = coeffs[j]
        if coeff is None:
            d_trace = None  # D vanishes identically for a free grid
        else:
            d_plus = rows_plus @ coeff
            d_minus = rows_minus @ coeff
            sp = ImSamples(ray=ray_plus, abscissas=sched_abs,
                           values=np.sqrt(rad_plus) * d_plus.imag, kappa=kappa)
            sm = ImSamples(ray=ray_minus, abscissas=sched_abs,
                           values=np.sqrt(rad_minus) * d_minus.imag, kappa=kappa)
            kc = karp_from_farfield(extract_all(sp, sm, order, schedule))
            xi_gap = _trusted_radius(kc)
            gap_pts, gap_rows = gap_data(xi_gap + lam)
            trace = karp_line_trace(
                kc, spec, S=xi_gap + 12.0 * lam + abs(s_q),
                im_points=gap_pts, im_values=(gap_rows @ coeff).imag,
                gap_center=tuple(center), gap_modes=gap_modes)
            d_trace = trace.func(s_pts)
        for i in range(n_points):
            if i == j:
                continue
            g = _free_kernel(kappa, lam_pts[i] - lam_pts[j])
            recovered[i, j] = (0.0 if d_trace is None else d_trace[i]) - g
            direct[i, j] = (-g if coeff is None
                            else rows_lam[i] @ coeff - g)

    scale = _offdiag_scale(direct)
    mask = ~np.eye(n_points, dtype=bool)
    err = float(np.max(np.abs((recovered - direct)[mask]))) / scale
    return GklReport(s_points=s_pts, recovered=recovered, direct=direct,
                     max_rel_err=err,
                     defect_recovered=_table_defect(recovered, scale),
                     defect_direct=_table_defect(direct, scale))


def potential_to_dict(grid: PotentialGrid) -> dict:
    """JSON-ready dict; v is row-major over the (n, n) cell array."""
    return {
        "bbox": list(grid.bbox),
        "n": grid.n,
        "kappa": grid.kappa,
        "v": [[val.real, val.imag] for val in grid.v_flat],
    }


def potential_from_dict(data: dict) -> PotentialGrid:
    """Inverse of potential_to_dict."""
    n = int(data["n"])
    flat = np.array([complex(re, im) for re, im in data["v"]])
    if flat.size != n * n:
        raise ValueError("v must hold n*n entries")
    return PotentialGrid(bbox=tuple(data["bbox"]), n=n,
                         v=flat.reshape(n, n), kappa=float(data["kappa"]))
