import numpy as np
import pytest

from proxgp import (
    EvalGrid,
    burgers_true,
    elliptic_forcing,
    elliptic_laplacian_true,
    elliptic_true,
    error_report,
)


def test_elliptic_true_center():
    assert elliptic_true((0.5, 0.5)) == pytest.approx(1.0, abs=1e-14)


def test_elliptic_true_boundary_zero():
    for y in np.linspace(0, 1, 7):
        assert elliptic_true((0.0, y)) == pytest.approx(0.0, abs=1e-13)
        assert elliptic_true((1.0, y)) == pytest.approx(0.0, abs=1e-13)


def test_elliptic_true_off_center_value():
    want = np.sin(np.pi / 8) ** 2 + 4.0
    assert elliptic_true((0.125, 0.125)) == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(4.146447, abs=1e-6)


def test_elliptic_forcing_center():
    assert elliptic_forcing((0.5, 0.5)) == pytest.approx(2 * np.pi**2 + 1, rel=1e-13)


def test_elliptic_forcing_origin():
    assert elliptic_forcing((0.0, 0.0)) == pytest.approx(0.0, abs=1e-12)


def test_laplacian_matches_stencil():
    # five-point-per-axis central stencil on the prescribed solution,
    # in extended precision so the h^2 division does not eat the signal
    rng = np.random.default_rng(7)

    def u_ld(p):
        x1, x2 = np.longdouble(p[0]), np.longdouble(p[1])
        return np.sin(np.pi * x1) * np.sin(np.pi * x2) + 4 * np.sin(
            4 * np.pi * x1
        ) * np.sin(4 * np.pi * x2)

    h = np.longdouble(1e-4)
    scale = 0.0
    worst = 0.0
    for _ in range(100):
        p = rng.uniform(0.01, 0.99, size=2)
        fd = np.longdouble(0)
        for axis in range(2):
            shifts = []
            for s in (-2, -1, 0, 1, 2):
                q = p.astype(np.longdouble).copy()
                q[axis] += s * h
                shifts.append(u_ld(q))
            fd += (
                -shifts[0] + 16 * shifts[1] - 30 * shifts[2] + 16 * shifts[3] - shifts[4]
            ) / (12 * h * h)
        closed = elliptic_laplacian_true(p)
        worst = max(worst, abs(float(fd) - closed))
        scale = max(scale, abs(closed))
    assert worst <= 1e-5 * max(scale, 1.0)


def test_burgers_initial_condition():
    assert burgers_true(0.0, 0.4) == pytest.approx(-np.sin(0.4 * np.pi), rel=1e-14)


def test_burgers_odd_symmetry_at_origin():
    for t in (0.0, 0.1, 0.5, 1.0):
        assert abs(burgers_true(t, 0.0)) <= 1e-12


def test_burgers_boundary_values_small():
    for t in np.linspace(0.0, 1.0, 20):
        assert abs(burgers_true(t, -1.0)) <= 1e-6
        assert abs(burgers_true(t, 1.0)) <= 1e-6


def test_burgers_quadrature_refinement():
    # doubling the default node count must not move any value by > 1e-8
    for t, x in [(0.5, 0.5), (0.2, -0.3), (0.9, 0.8), (0.05, 0.1), (0.99, -0.97)]:
        v = burgers_true(t, x)
        v2 = burgers_true(t, x, quad_nodes=256)
        assert abs(v - v2) <= 1e-8


def test_burgers_satisfies_pde():
    # central differences on the quadrature solution itself
    rng = np.random.default_rng(11)
    nu, h = 0.2, 1e-4
    for _ in range(50):
        t = rng.uniform(0.05, 0.95)
        x = rng.uniform(-0.9, 0.9)
        u = burgers_true(t, x, nu)
        ut = (burgers_true(t + h, x, nu) - burgers_true(t - h, x, nu)) / (2 * h)
        ux = (burgers_true(t, x + h, nu) - burgers_true(t, x - h, nu)) / (2 * h)
        uxx = (
            burgers_true(t, x + h, nu) - 2 * u + burgers_true(t, x - h, nu)
        ) / (h * h)
        assert abs(ut + u * ux - nu * uxx) <= 1e-3


def test_burgers_rejects_bad_arguments():
    with pytest.raises(ValueError):
        burgers_true(-0.1, 0.0)
    with pytest.raises(ValueError):
        burgers_true(0.5, 0.0, nu=0.0)


def test_burgers_vectorized_matches_scalar():
    t = np.array([0.1, 0.4, 0.8])
    x = np.array([-0.5, 0.2, 0.9])
    vals = burgers_true(t, x)
    for i in range(3):
        assert vals[i] == pytest.approx(burgers_true(t[i], x[i]), rel=1e-14)


def test_error_report_identical():
    u = np.random.default_rng(0).random((5, 5))
    rep = error_report(u, u)
    assert rep.linf == 0.0 and rep.rel_l2 == 0.0 and not rep.abs_diff.any()


def test_error_report_constant_offset():
    u = np.zeros((4, 4))
    rep = error_report(u + 0.25, u + 1.0)
    assert rep.linf == pytest.approx(0.75)


def test_error_report_hand_computed():
    rng = np.random.default_rng(13)
    a, b = rng.random((3, 3)), rng.random((3, 3))
    rep = error_report(a, b)
    diff = a - b
    assert rep.linf == pytest.approx(np.max(np.abs(diff)))
    assert rep.rel_l2 == pytest.approx(
        np.sqrt(np.sum(diff**2)) / np.sqrt(np.sum(b**2))
    )
    assert np.allclose(rep.abs_diff, np.abs(diff))


def test_error_report_shape_mismatch():
    with pytest.raises(ValueError):
        error_report(np.zeros((2, 2)), np.zeros((3, 2)))


def test_eval_grid_points_inside_closed_domain():
    grid = EvalGrid(lower=(0.0, -1.0), upper=(1.0, 1.0), resolution=(5, 9))
    pts = grid.points()
    assert pts.shape == (45, 2)
    assert pts[:, 0].min() == 0.0 and pts[:, 0].max() == 1.0
    assert pts[:, 1].min() == -1.0 and pts[:, 1].max() == 1.0


def test_eval_grid_validates_resolution():
    with pytest.raises(ValueError):
        EvalGrid(lower=(0.0,), upper=(1.0,), resolution=(1,))
