"""Recovery of far-field coefficients from weighted imaginary-part samples.

The field behaves like sqrt(2/(pi kappa r)) e^{i(kappa r - pi/4)}
sum_j f_j(phi) r^-j along a ray, so I(r) = sqrt(r) Im(psi) mixes Re f and
Im f through known sine/cosine weights. Two samples a quarter-period apart
give a well-conditioned 2x2 real system for f_0; higher coefficients follow
recursively by subtracting the known part of the expansion and re-weighting
the remainder, and every estimate is accelerated by polynomial extrapolation
in 1/r.

Abscissa convention: all extraction operations interpret an abscissa s as
the distance |x| from the expansion origin (the frame in which the f_j are
defined). extract_all re-expresses raw line samples in such a frame
automatically; the lower-level operations expect it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fields import ImSamples
from .specfun import _reduce_phase

__all__ = [
    "FarFieldCoeffs",
    "ExtractionSchedule",
    "make_schedule",
    "schedule_abscissas",
    "weighted_im",
    "extract_f0_two_point",
    "extract_next_coeff",
    "extract_sequence_extrapolated",
    "extract_all",
    "extract_least_squares",
    "farfield_to_dict",
    "farfield_from_dict",
]


@dataclass(frozen=True, eq=False)
class FarFieldCoeffs:
    """Far-field coefficients at an antipodal pair of angles.

    f_plus[j] = f_j(phi) and f_minus[j] = f_j(phi + pi), expressed in the
    frame centered at origin_shift (a point q in the plane).
    """

    kappa: float
    phi: float
    f_plus: list
    f_minus: list
    origin_shift: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        fp = [complex(v) for v in self.f_plus]
        fm = [complex(v) for v in self.f_minus]
        if len(fp) != len(fm):
            raise ValueError("f_plus and f_minus must have equal length")
        q = tuple(float(v) for v in self.origin_shift)
        if len(q) != 2:
            raise ValueError("origin_shift must be a point in the plane")
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "f_plus", fp)
        object.__setattr__(self, "f_minus", fm)
        object.__setattr__(self, "origin_shift", q)

    @property
    def order(self) -> int:
        return len(self.f_plus) - 1


@dataclass(frozen=True, eq=False)
class ExtractionSchedule:
    """Radii (near-geometric, increasing), pair offset tau, extrapolation depth."""

    radii: np.ndarray
    tau: float
    extrapolation_depth: int = 3

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or r.size < 1:
            raise ValueError("radii must be a nonempty 1-d sequence")
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ValueError("radii must be positive and strictly increasing")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.extrapolation_depth < 0:
            raise ValueError("extrapolation_depth must be >= 0")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "extrapolation_depth",
                           int(self.extrapolation_depth))


def make_schedule(kappa: float, s0: float = None, growth: float = 2.0,
                  count: int = 11, tau: float = None, depth: int = 3,
                  snap: bool = True) -> ExtractionSchedule:
    """Near-geometric radius schedule s0 * growth^k, k = 0..count-1.

    tau defaults to a quarter period pi/(2 kappa), the best-conditioned
    choice (|sin(kappa tau)| = 1). With snap=True each radius is moved to
    the nearest integer multiple of the wavelength 2 pi / kappa, which
    freezes the residual oscillation e^{2 i kappa r} of the two-point
    estimator across the schedule: the remaining error is then a smooth
    power series in 1/r, exactly what polynomial extrapolation removes.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if s0 is None:
        s0 = 1e3 / kappa
    if tau is None:
        tau = np.pi / (2.0 * kappa)
    if growth <= 1.0:
        raise ValueError("growth must exceed 1")
    if count < 1:
        raise ValueError("count must be >= 1")
    raw = s0 * growth ** np.arange(count)
    if snap:
        lam = 2.0 * np.pi / kappa
        n = np.maximum(np.round(raw / lam), 1.0)
        radii = np.unique(n) * lam
    else:
        radii = raw
    return ExtractionSchedule(radii=radii, tau=float(tau), extrapolation_depth=depth)


def schedule_abscissas(schedule: ExtractionSchedule) -> np.ndarray:
    """Sorted unique abscissas an extraction needs: every radius and its pair."""
    r = schedule.radii
    return np.unique(np.concatenate([r, r + schedule.tau]))


def weighted_im(psi_im: float, r: float) -> float:
    """I-value sqrt(r) * Im(psi); raises for r <= 0."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("r must be positive")
    out = np.sqrt(r_arr) * np.asarray(psi_im, dtype=float)
    return float(out) if out.ndim == 0 else out


def _two_point_solve(b1: float, b2: float, r: float, tau: float, kappa: float):
    """Solve the 2x2 system  sin(a) Re f + cos(a) Im f = b  at a(r), a(r+tau)."""
    st = np.sin(kappa * tau)
    if abs(st) < 1e-6:
        raise ValueError("tau is too close to a resonance: |sin(kappa tau)| < 1e-6")
    # reduce kappa*r mod 2 pi before subtracting pi/4: at r ~ 1e5 the naive
    # phase loses ~1e-11 rad, which the recursion amplifies by r^{n+1}
    alpha = _reduce_phase(kappa * r) - 0.25 * np.pi
    beta = _reduce_phase(kappa * (r + tau)) - 0.25 * np.pi
    mat = np.array([[np.sin(alpha), np.cos(alpha)],
                    [np.sin(beta), np.cos(beta)]])
    rhs = np.array([b1, b2])
    re_f, im_f = np.linalg.solve(mat, rhs)
    return complex(re_f, im_f)


def extract_f0_two_point(I_x: float, I_y: float, r: float, tau: float,
                         kappa: float) -> complex:
    """Leading far-field coefficient from one sample pair, error O(1/r).

    I_x and I_y are the weighted imaginary parts at distances r and r + tau
    from the expansion origin.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if tau <= 0:
        raise ValueError("tau must be positive")
    scale = np.sqrt(np.pi * kappa / 2.0)
    return _two_point_solve(scale * I_x, scale * I_y, r, tau, kappa)


def _model_I(known, s, kappa: float):
    """I-value of the truncated expansion with coefficients known[0..n] at s."""
    s = np.asarray(s, dtype=float)
    poly = np.zeros(s.shape, dtype=complex)
    for j, f in enumerate(known):
        poly += f * s ** (-float(j))
    phase = _reduce_phase(kappa * s) - 0.25 * np.pi
    return np.sqrt(2.0 / (np.pi * kappa)) * np.imag(
        (np.cos(phase) + 1j * np.sin(phase)) * poly
    )


def _lookup(samples: ImSamples, s: float) -> float:
    a = samples.abscissas
    i = int(np.argmin(np.abs(a - s)))
    if abs(a[i] - s) > 1e-9 * max(1.0, abs(s)):
        raise ValueError(f"required abscissa {s!r} not present in samples")
    return float(samples.values[i])


def extract_next_coeff(samples: ImSamples, known, r: float, tau: float) -> complex:
    """One induction step: estimate f_{n+1} given f_0..f_n, at radius r.

    Subtracts the model I-values of the known part, re-weights the remainder
    by s^{n+1} (which behaves like a leading-order far field with
    coefficient f_{n+1}), and applies the two-point solve at (r, r + tau).
    Emits a RuntimeWarning when float rounding amplified by r^{n+1} can no
    longer be neglected.
    """
    known = [complex(f) for f in known]
    n = len(known) - 1
    if n < 0:
        raise ValueError("known must contain at least f_0")
    kappa = samples.kappa
    power = float(r) ** (n + 1)
    unc = 2.22e-16 * max(1.0, max(abs(f) for f in known))
    if unc * power > 0.1:
        warnings.warn(
            "coefficient uncertainty amplified by r^(n+1) exceeds 0.1; "
            "reduce the radius or the order",
            RuntimeWarning,
            stacklevel=2,
        )
    vals = []
    for s in (r, r + tau):
        I_data = _lookup(samples, s)
        I_model = float(_model_I(known, s, kappa))
        vals.append(s ** (n + 1) * (I_data - I_model))
    return extract_f0_two_point(vals[0], vals[1], r, tau, kappa)


def extract_sequence_extrapolated(estimates, depth: int) -> complex:
    """Polynomial extrapolation of (r_k, v_k) to r = infinity in powers of 1/r.

    Builds the Neville tableau on nodes 1/r_k and returns the depth-level
    entry of the last row; depth 0 is the raw estimate at the largest radius.
    """
    pts = [(float(r), complex(v)) for r, v in estimates]
    if not pts:
        raise ValueError("estimates must be nonempty")
    if any(r <= 0 for r, _ in pts):
        raise ValueError("radii must be positive")
    if depth < 0 or depth > len(pts) - 1:
        raise ValueError("depth must satisfy 0 <= depth <= len(estimates) - 1")
    t = np.array([1.0 / r for r, _ in pts])
    if len(np.unique(t)) != len(t):
        raise ValueError("radii must be distinct")
    tab = np.array([v for _, v in pts], dtype=complex)
    # column j of the tableau, kept in place: tab[k] = P_{k-j..k}(0);
    # increment form keeps constant sequences exactly constant
    for j in range(1, depth + 1):
        for k in range(len(pts) - 1, j - 1, -1):
            tab[k] = tab[k] + t[k] * (tab[k] - tab[k - 1]) / (t[k - j] - t[k])
    return complex(tab[-1])


def _line_frame(samples_plus: ImSamples, samples_minus: ImSamples):
    """Validate collinear, oppositely-oriented rays; return (q, theta, xi_p, xi_m).

    xi_p/xi_m are the signed line coordinates (relative to q, along theta) of
    the two ray origins.
    """
    rp, rm = samples_plus.ray, samples_minus.ray
    dp = rp.orientation * np.asarray(rp.direction)
    dm = rm.orientation * np.asarray(rm.direction)
    if abs(dp @ dm + 1.0) > 1e-12:
        raise ValueError("rays must point in opposite directions")
    op = np.asarray(rp.origin)
    om = np.asarray(rm.origin)
    gap = om - op
    cross = gap[0] * dp[1] - gap[1] * dp[0]
    if abs(cross) > 1e-9 * max(1.0, float(np.hypot(*gap))):
        raise ValueError("rays are not collinear")
    q = 0.5 * (op + om)
    theta = dp
    xi_p = float((op - q) @ theta)
    xi_m = float((om - q) @ theta)
    return q, theta, xi_p, xi_m


def _shifted_samples(samples: ImSamples, q, theta, sign: int) -> ImSamples:
    """Re-express samples in the frame centered at q on the line.

    sign +1 for the ray along theta, -1 for the opposite ray. The new
    abscissa is the distance from q, and values are re-weighted from
    sqrt(|x|) (global frame) to sqrt(|x - q|).
    """
    ray = samples.ray
    o = np.asarray(ray.origin)
    d = ray.orientation * np.asarray(ray.direction)
    pts = o + np.multiply.outer(samples.abscissas, d)
    xi = (pts - q) @ (sign * np.asarray(theta))
    if np.any(xi <= 0):
        raise ValueError("a sample lies on the wrong side of the shift point")
    r_global = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(r_global == 0):
        raise ValueError("a sample sits at the global origin; cannot re-weight")
    vals = samples.values * np.sqrt(xi / r_global)
    order = np.argsort(xi)
    from .fields import RayGeometry

    new_ray = RayGeometry(origin=(float(q[0]), float(q[1])),
                          direction=(float(sign * theta[0]),
                                     float(sign * theta[1])))
    return ImSamples(ray=new_ray, abscissas=xi[order], values=vals[order],
                     kappa=samples.kappa, noise_sigma=samples.noise_sigma)


def _extract_angle(samples: ImSamples, n: int,
                   schedule: ExtractionSchedule) -> list:
    """Run the full recursion at one angle on frame-consistent samples."""
    kappa = samples.kappa
    radii = schedule.radii
    tau = schedule.tau
    depth = schedule.extrapolation_depth
    known = []
    for j in range(n + 1):
        ests = []
        for r in radii:
            if j == 0:
                v = extract_f0_two_point(
                    _lookup(samples, r), _lookup(samples, r + tau),
                    r, tau, kappa,
                )
            else:
                v = extract_next_coeff(samples, known, r, tau)
            ests.append((r, v))
        d = min(max(depth, n - j + 1), len(ests) - 1)
        known.append(extract_sequence_extrapolated(ests, d))
    return known


def extract_all(samples_plus: ImSamples, samples_minus: ImSamples, n: int,
                schedule: ExtractionSchedule) -> FarFieldCoeffs:
    """Far-field coefficients f_0..f_n at both angles of a sampled line.

    The two rays must lie on one line with opposite directions. The
    expansion origin q is the midpoint of the two ray origins; abscissas are
    re-expressed as distances from q and values re-weighted accordingly, so
    the returned coefficients live in the shifted frame (origin_shift = q).
    Every schedule radius r and its pair r + tau must be resolvable in both
    sample sets after the shift.
    """
    if samples_plus.kappa != samples_minus.kappa:
        raise ValueError("sample sets disagree on kappa")
    kappa = samples_plus.kappa
    if abs(np.sin(kappa * schedule.tau)) < 0.5:
        raise ValueError("schedule tau violates |sin(kappa tau)| >= 0.5")
    q, theta, _, _ = _line_frame(samples_plus, samples_minus)
    shifted_p = _shifted_samples(samples_plus, q, theta, +1)
    shifted_m = _shifted_samples(samples_minus, q, theta, -1)
    f_plus = _extract_angle(shifted_p, n, schedule)
    f_minus = _extract_angle(shifted_m, n, schedule)
    phi = float(np.arctan2(theta[1], theta[0]))
    return FarFieldCoeffs(kappa=kappa, phi=phi, f_plus=f_plus, f_minus=f_minus,
                          origin_shift=(float(q[0]), float(q[1])))


def extract_least_squares(samples: ImSamples, n: int, model_order: int = None):
    """All coefficients at once by linear least squares on the I-model.

    Fits I(s) = sqrt(2/(pi kappa)) Im(e^{i(kappa s - pi/4)} sum_j f_j s^-j)
    in the real unknowns (Re f_j, Im f_j). The fitted model order may exceed
    the reported order n to absorb tail bias. Raises when the sample set is
    too small, spans less than one wavelength, or yields a design matrix
    with condition number above 1e12.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    s = samples.abscissas
    kappa = samples.kappa
    if s.size < 4 * (n + 1):
        raise ValueError("need at least 4(n+1) samples")
    lam = 2.0 * np.pi / kappa
    if s[-1] - s[0] < lam:
        raise ValueError("samples must span at least one wavelength")
    if model_order is None:
        model_order = n + 2
    model_order = max(model_order, n)
    scale = np.sqrt(2.0 / (np.pi * kappa))
    phase = _reduce_phase(kappa * s) - 0.25 * np.pi
    cols = []
    smid = np.median(s)
    for j in range(model_order + 1):
        base = (smid / s) ** float(j)  # normalized to condition the fit
        cols.append(scale * np.sin(phase) * base)   # Re f_j
        cols.append(scale * np.cos(phase) * base)   # Im f_j
    design = np.stack(cols, axis=1)
    cond = np.linalg.cond(design)
    if cond > 1e12:
        raise ValueError(f"design matrix is rank deficient (cond={cond:.3g})")
    sol, *_ = np.linalg.lstsq(design, samples.values, rcond=None)
    out = []
    for j in range(n + 1):
        re_f, im_f = sol[2 * j], sol[2 * j + 1]
        out.append(complex(re_f, im_f) * smid ** float(j))
    return out


def farfield_to_dict(c: FarFieldCoeffs) -> dict:
    """JSON-ready dict for far-field coefficients."""
    return {
        "kappa": c.kappa,
        "phi": c.phi,
        "q": list(c.origin_shift),
        "f_plus": [[v.real, v.imag] for v in c.f_plus],
        "f_minus": [[v.real, v.imag] for v in c.f_minus],
    }


def farfield_from_dict(data: dict) -> FarFieldCoeffs:
    """Inverse of farfield_to_dict."""
    return FarFieldCoeffs(
        kappa=float(data["kappa"]),
        phi=float(data["phi"]),
        f_plus=[complex(re, im) for re, im in data["f_plus"]],
        f_minus=[complex(re, im) for re, im in data["f_minus"]],
        origin_shift=tuple(data.get("q", (0.0, 0.0))),
    )
