"""Tests for the volume-potential solver and the line data-reduction demo."""

import warnings

import numpy as np
import pytest
from scipy import special

from imfield import (
    LineSpec,
    PotentialGrid,
    check_reciprocity,
    gkl_reduce,
    green_operator_matrix,
    hankel1,
    plane_wave_solution,
    potential_from_dict,
    potential_to_dict,
    psi_plus_farfield,
    scattering_amplitude,
    solve_lippmann_schwinger,
)
from imfield.scatter import _log_rect_integral, _weight_rows
from imfield.specfun import _reduce_phase

KAPPA = 4.0
LAM = 2.0 * np.pi / KAPPA
BOX = (-0.5, -0.5, 0.5, 0.5)

# cell integrals of ln|z| and of (i/4) H_0(kappa |z|), adaptive-quadrature
# oracle values (polar coordinates around the singular point)
LOG_SELF_CELL = -4.420811845392822e-03           # centered, sides 0.03125
LOG_OFFSET_RECT = -8.083013358335996e-03         # center (.05,-.02), .04 x .07
W_SELF = 5.057453426430e-04 + 2.439817154944e-04j    # kappa=4, h=0.03125
W_NEIGHBOR = 3.384333853504694e-04 + 2.430295922307401e-04j   # offset (h, 0)
W_DIAGONAL = 2.838771707881083e-04 + 2.420793279775371e-04j   # offset (h, h)


def gauss_grid(n, amp=4.0, cx=0.0, cy=0.0, width=0.18, kappa=KAPPA,
               phase=0.0):
    x0, y0, x1, y1 = BOX
    hx = (x1 - x0) / n
    xs = x0 + (np.arange(n) + 0.5) * hx
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    v = amp * np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2.0 * width ** 2))
    if phase:
        v = v * np.exp(1j * phase)
    return PotentialGrid(bbox=BOX, n=n, v=v, kappa=kappa)


def free_grid(n=8):
    return PotentialGrid(bbox=BOX, n=n, v=np.zeros((n, n)), kappa=KAPPA)


def free_kernel(x, y):
    d = np.hypot(x[0] - y[0], x[1] - y[1])
    return 0.25j * complex(hankel1(0, KAPPA * d))


def test_potential_grid_validation():
    with pytest.raises(ValueError):
        PotentialGrid(bbox=(0.0, 0.0, -1.0, 1.0), n=4, v=np.zeros((4, 4)),
                      kappa=KAPPA)
    with pytest.raises(ValueError):
        PotentialGrid(bbox=BOX, n=4, v=np.zeros((3, 4)), kappa=KAPPA)
    with pytest.raises(ValueError):
        PotentialGrid(bbox=BOX, n=4, v=np.full((4, 4), np.nan), kappa=KAPPA)
    with pytest.raises(ValueError):
        PotentialGrid(bbox=BOX, n=4, v=np.zeros((4, 4)), kappa=0.0)
    with pytest.raises(ValueError):
        PotentialGrid(bbox=BOX, n=0, v=np.zeros((0, 0)), kappa=KAPPA)


def test_potential_json_round_trip():
    rng = np.random.default_rng(3)
    v = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    grid = PotentialGrid(bbox=(-0.3, 0.1, 0.9, 0.7), n=5, v=v, kappa=2.5)
    data = potential_to_dict(grid)
    assert set(data) == {"bbox", "n", "kappa", "v"}
    assert len(data["v"]) == 25
    back = potential_from_dict(data)
    assert back.bbox == grid.bbox
    assert back.n == grid.n and back.kappa == grid.kappa
    assert np.array_equal(back.v, grid.v)


def test_log_rect_integral_oracle():
    got = _log_rect_integral(0.0, 0.0, 0.03125, 0.03125)
    assert abs(got - LOG_SELF_CELL) <= 1e-15
    got = _log_rect_integral(0.05, -0.02, 0.04, 0.07)
    assert abs(got - LOG_OFFSET_RECT) <= 1e-15


def test_cell_weights_match_quadrature_oracle():
    h = 0.03125
    cells = np.array([[0.0, 0.0], [h, 0.0], [h, h]])
    rows = _weight_rows(np.zeros((1, 2)), cells, h, h, KAPPA)[0]
    for got, exact in zip(rows, (W_SELF, W_NEIGHBOR, W_DIAGONAL)):
        assert abs(got - exact) <= 2e-3 * abs(exact)


def test_green_operator_symmetric():
    grid = gauss_grid(10, amp=2.0, cx=0.07)
    gom = green_operator_matrix(grid)
    w = gom.weights
    assert np.all(np.isfinite(w))
    scale = np.max(np.abs(w))
    assert np.max(np.abs(w - w.T)) <= 1e-14 * scale
    # operator matrix is the weight matrix with columns scaled by v
    assert np.allclose(gom.matrix, w * grid.v_flat[None, :], rtol=0, atol=0)


def test_free_resolvent_identity():
    grid = free_grid()
    y = np.array([0.3, -2.0])
    field = solve_lippmann_schwinger(grid, y)
    for x in ([1.4, 0.7], [-0.2, 0.1], [12.0, -3.0]):
        assert field(np.asarray(x)) == -free_kernel(x, y)
    assert field.correction(np.array([1.0, 1.0])) == 0.0


def test_resolvent_singularity_and_center_hit():
    grid = gauss_grid(8)
    y = np.array([0.0, -1.3])
    field = solve_lippmann_schwinger(grid, y)
    with pytest.raises(ValueError):
        field(y)
    # a source exactly on a cell center leaves the right-hand side undefined
    center0 = grid.centers()[0]
    with pytest.raises(ValueError):
        solve_lippmann_schwinger(grid, center0)


def test_born_first_order_small_v():
    # fine-grid quadrature of G (x-z) v(z) (-G(z-y)) as independent oracle
    amp = 1e-3
    grid = gauss_grid(20, amp=amp)
    y = np.array([0.0, -1.3])
    x = np.array([0.9, 1.1])
    r_val = solve_lippmann_schwinger(grid, y)(x)
    nf = 80
    hf = 1.0 / nf
    xs = -0.5 + (np.arange(nf) + 0.5) * hf
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    zz = np.stack([gx.ravel(), gy.ravel()], axis=1)
    vz = amp * np.exp(-(zz[:, 0] ** 2 + zz[:, 1] ** 2) / (2.0 * 0.18 ** 2))
    g_x = 0.25j * special.hankel1(0, KAPPA * np.hypot(*(zz - x).T))
    g_y = 0.25j * special.hankel1(0, KAPPA * np.hypot(*(zz - y).T))
    born1 = np.sum(g_x * vz * (-g_y)) * hf * hf
    assert abs((r_val + free_kernel(x, y)) - born1) <= 1e-3 * abs(born1)


def test_born_order_slope():
    # residual after removing the first Born term scales like ||v||^2
    grid0 = gauss_grid(12, amp=1.0)
    y = np.array([0.0, -1.3])
    x = np.array([0.9, 1.1])
    r_free = -free_kernel(x, y)
    lam0 = 1e-5
    scaled = PotentialGrid(bbox=BOX, n=12, v=lam0 * grid0.v, kappa=KAPPA)
    born1 = (solve_lippmann_schwinger(scaled, y)(x) - r_free) / lam0
    lams = np.array([1e-1, 1e-2, 1e-3])
    res = []
    for lam in lams:
        g = PotentialGrid(bbox=BOX, n=12, v=lam * grid0.v, kappa=KAPPA)
        r = solve_lippmann_schwinger(g, y)(x)
        res.append(abs(r - r_free - lam * born1))
    slope = np.polyfit(np.log(lams), np.log(res), 1)[0]
    assert abs(slope - 2.0) <= 0.2


def test_grid_refinement_second_order():
    y = np.array([0.0, -1.3])
    pts = np.array([[0.9, 1.1], [-1.4, 0.3]])
    vals = {n: solve_lippmann_schwinger(gauss_grid(n), y)(pts)
            for n in (8, 16, 32)}
    e_coarse = np.max(np.abs(vals[8] - vals[32]))
    e_fine = np.max(np.abs(vals[16] - vals[32]))
    assert e_fine <= 5e-6
    assert e_coarse >= 3.5 * e_fine


def test_reciprocity_free_exact():
    assert check_reciprocity(free_grid(), (1.2, 0.4), (-0.8, -1.0)) == 0.0


def test_reciprocity_within_discretization():
    rng = np.random.default_rng(17)
    x = np.array([1.2, 0.4])
    y = np.array([-0.8, -1.0])
    for trial in range(3):
        amp = rng.uniform(2.0, 5.0)
        cx, cy = rng.uniform(-0.1, 0.1, size=2)
        phase = 0.0 if trial < 2 else rng.uniform(0.2, 0.6)
        grid = gauss_grid(16, amp=amp, cx=cx, cy=cy, phase=phase)
        fine = gauss_grid(32, amp=amp, cx=cx, cy=cy, phase=phase)
        defect = check_reciprocity(grid, x, y)
        r_c = solve_lippmann_schwinger(grid, y)(x)
        r_f = solve_lippmann_schwinger(fine, y)(x)
        estimate = abs(r_c - r_f) / abs(r_c)
        assert defect <= 5.0 * estimate


def test_singular_system_reported():
    # scale v by a reciprocal eigenvalue so the interior system is singular
    grid = gauss_grid(8, amp=1.0)
    w = green_operator_matrix(grid).weights
    mu = np.linalg.eigvals(w * grid.v_flat[None, :])
    mu0 = mu[np.argmax(np.abs(mu))]
    bad = PotentialGrid(bbox=BOX, n=8, v=grid.v / mu0, kappa=KAPPA)
    with pytest.raises(RuntimeError, match="unique-solvability"):
        solve_lippmann_schwinger(bad, (0.0, -2.0))


def test_plane_wave_free_and_validation():
    grid = free_grid()
    k = KAPPA * np.array([0.6, 0.8])
    psi = plane_wave_solution(grid, k)
    pts = np.array([[0.3, 0.2], [-1.0, 2.0]])
    assert np.array_equal(psi(pts), np.exp(1j * (pts @ k)))
    with pytest.raises(ValueError):
        plane_wave_solution(grid, 1.01 * k)


def test_psi_plus_farfield_free_plane_wave():
    direction = np.array([np.cos(0.4), np.sin(0.4)])
    radii = 100.0 * LAM * 2.0 ** np.arange(4)
    y = (0.3, 0.2)
    got = psi_plus_farfield(free_grid(), y, direction, radii)
    want = np.exp(1j * (-KAPPA * direction) @ np.asarray(y))
    assert abs(got - want) <= 1e-9


def test_psi_plus_farfield_matches_plane_wave_solve():
    grid = gauss_grid(24, amp=0.5)
    direction = np.array([np.cos(0.4), np.sin(0.4)])
    radii = 100.0 * LAM * 2.0 ** np.arange(4)
    y = np.array([0.3, 0.2])
    got = psi_plus_farfield(grid, y, direction, radii)
    want = plane_wave_solution(grid, -KAPPA * direction)(y)
    assert abs(got - want) <= 1e-3 * abs(want)


def test_psi_plus_farfield_residual_slope():
    # raw per-radius estimates approach the extrapolated value like 1/r
    grid = gauss_grid(24, amp=0.5)
    direction = np.array([np.cos(0.4), np.sin(0.4)])
    radii = 100.0 * LAM * 2.0 ** np.arange(4)
    y = np.array([0.3, 0.2])
    final = psi_plus_farfield(grid, y, direction, radii)
    field = solve_lippmann_schwinger(grid, y)
    resid = []
    for r in radii:
        pref = -0.5 * np.sqrt(1.0 / (2.0 * np.pi * KAPPA * r)) \
            * np.exp(1j * (_reduce_phase(KAPPA * r) + 0.25 * np.pi))
        resid.append(abs(field(r * direction) / pref - final))
    slope = np.polyfit(np.log(radii), np.log(resid), 1)[0]
    assert slope <= -0.9


def test_farfield_radii_validation():
    grid = free_grid()
    with pytest.raises(ValueError):
        psi_plus_farfield(grid, (0.0, 0.0), (1.0, 0.0), [50.0 * LAM, 200.0 * LAM])
    with pytest.raises(ValueError):
        psi_plus_farfield(grid, (0.0, 0.0), (1.0, 0.0), [400.0 * LAM])
    with pytest.raises(ValueError):
        scattering_amplitude(grid, (KAPPA, 0.0), [(1.0, 0.0)],
                             radii=[50.0 * LAM, 200.0 * LAM])


def test_amplitude_free_zero():
    k = KAPPA * np.array([1.0, 0.0])
    a = scattering_amplitude(free_grid(), k, [(1.0, 0.0), (0.0, 1.0)])
    assert np.array_equal(a, np.zeros(2, dtype=complex))


def test_amplitude_rotational_symmetry():
    # exactly lattice-symmetric radial v; the 8 symmetry images of one
    # (incident, observation) pair must give one amplitude
    n = 24
    idx = np.arange(n) - (n - 1) / 2.0
    d2 = idx[:, None] ** 2 + idx[None, :] ** 2
    v = 3.0 * np.exp(-d2 / (n * n * 2.0 * 0.18 ** 2))
    grid = PotentialGrid(bbox=BOX, n=n, v=v, kappa=KAPPA)
    k0 = KAPPA * np.array([np.cos(0.35), np.sin(0.35)])
    x0 = np.array([np.cos(1.6), np.sin(1.6)])

    def rot90(t):
        return np.array([-t[1], t[0]])

    pairs = [(k0, x0)]
    for _ in range(3):
        pairs.append((rot90(pairs[-1][0]), rot90(pairs[-1][1])))
    for refl in (lambda t: np.array([t[0], -t[1]]),
                 lambda t: np.array([t[1], t[0]])):
        pairs.append((refl(k0), refl(x0)))
        pairs.append((rot90(refl(k0)), rot90(refl(x0))))
    vals = np.array([scattering_amplitude(grid, k, [xh])[0]
                     for k, xh in pairs])
    assert np.max(np.abs(vals - vals[0])) <= 1e-6


def test_amplitude_born_fourier():
    # A ~ c_B vhat(k - kappa x_hat), error shrinking like ||v||^2
    c_born = 0.25 * np.sqrt(2.0 / (np.pi * KAPPA)) * np.exp(0.25j * np.pi)
    k = KAPPA * np.array([1.0, 0.0])
    xhat = np.array([np.cos(1.1), np.sin(1.1)])
    xi = k - KAPPA * xhat
    gaps = {}
    for amp in (0.2, 0.05):
        grid = gauss_grid(32, amp=amp)
        a_val = scattering_amplitude(grid, k, [xhat])[0]
        cells = grid.centers()
        area = grid.cell_size[0] * grid.cell_size[1]
        vhat = np.sum(grid.v_flat * np.exp(1j * (cells @ xi))) * area
        gaps[amp] = abs(a_val - c_born * vhat)
        if amp == 0.05:
            assert gaps[amp] <= 5e-3 * abs(a_val)
    ratio = gaps[0.2] / gaps[0.05]
    assert 10.0 <= ratio <= 24.0


LINE = LineSpec(point=(0.0, -2.0), theta=(1.0, 0.0))


def test_gkl_free_case_exact():
    report = gkl_reduce(free_grid(), LINE, (-3.0, 3.0), order=3)
    assert report.max_rel_err == 0.0
    assert report.defect_recovered == 0.0 and report.defect_direct == 0.0
    assert np.all(np.isnan(report.recovered.real[np.eye(5, dtype=bool)]))
    y = np.array([LINE.point[0] - 3.0, LINE.point[1]])
    x = np.array([LINE.point[0] + 3.0, LINE.point[1]])
    assert report.recovered[4, 0] == -free_kernel(x, y)


def test_gkl_small_real_v():
    grid = gauss_grid(24, amp=4.0, cx=0.05, cy=-0.08, width=0.16)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        report = gkl_reduce(grid, LINE, (-3.0, 3.0), order=3)
    assert report.max_rel_err <= 1e-2
    assert report.defect_direct <= 1e-8
    # triangle inequality ties the recovered defect to the recovery error
    assert report.defect_recovered <= 2.0 * report.max_rel_err \
        + report.defect_direct
    assert report.s_points.shape == (5,)


def test_gkl_complex_v_tilted_line():
    theta = np.array([2.0, 1.0]) / np.sqrt(5.0)
    line = LineSpec(point=(1.0, -1.8), theta=tuple(theta))
    grid = gauss_grid(24, amp=4.0, cx=0.05, cy=-0.08, width=0.16, phase=0.4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        report = gkl_reduce(grid, line, (-3.0, 3.0), order=3)
    assert report.max_rel_err <= 1e-2


def test_gkl_validation():
    grid = gauss_grid(8)
    with pytest.raises(ValueError):
        gkl_reduce(grid, LineSpec(point=(0.0, 0.0), theta=(1.0, 0.0)),
                   (-2.0, 2.0), order=3)
    with pytest.raises(ValueError):
        gkl_reduce(grid, LineSpec(point=(0.0, -0.55), theta=(1.0, 0.0)),
                   (-2.0, 2.0), order=3)
    with pytest.raises(ValueError):
        gkl_reduce(grid, LINE, (2.0, -2.0), order=3)
    with pytest.raises(ValueError):
        gkl_reduce(grid, LINE, (-2.0, 2.0), order=3, n_points=1)
    with pytest.raises(ValueError):
        gkl_reduce(grid, LINE, (-2.0, 2.0), order=9)
