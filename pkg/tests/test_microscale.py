import numpy as np
import pytest

from stokes_darcy.geometry import BoundaryLayerStripe, UnitCellGeometry
from stokes_darcy.microscale import (
    MicroscaleError,
    StripeSolver,
    admissible_offsets,
    richardson,
    solve_bl_beta,
    solve_bl_t,
    solve_cell,
    sweep_interface,
    write_cell_csv,
)

H = 1 / 32
SQUARE = UnitCellGeometry("square", 0.5)


@pytest.fixture(scope="module")
def cell():
    return solve_cell(SQUARE, H, extrapolate=False)


def test_cell_solution_properties(cell):
    assert cell.k_tilde > 0
    assert cell.max_divergence <= 1e-10
    # square d = 0.5 on a 32 grid occupies cells 8..23; faces between them carry no flow
    assert np.all(cell.w1[8:24, 9:24] == 0.0)
    assert abs(cell.pi.mean()) < 1e-12 * max(1.0, np.abs(cell.pi).max())


def test_rotated_forcing_gives_same_permeability(cell):
    other = solve_cell(SQUARE, H, direction=1, extrapolate=False)
    assert other.k_tilde == pytest.approx(cell.k_tilde, rel=1e-10, abs=0)


@pytest.mark.parametrize("shape", ["square", "circle", "rhombus"])
def test_permeability_decreases_with_size(shape):
    ks = [solve_cell(UnitCellGeometry(shape, d), H, extrapolate=False).k_tilde for d in (0.25, 0.5, 0.75)]
    assert ks[0] > ks[1] > ks[2] > 0


def test_empty_cell_rejected():
    with pytest.raises(MicroscaleError, match="incompatible"):
        solve_cell(UnitCellGeometry("circle", 0.0), H)


def test_richardson_helper():
    # k_h = 1 + h^2 with h = 1/4, 1/2, 1
    val, p = richardson(1 + 1 / 16, 1 + 1 / 4, 2.0)
    assert val == pytest.approx(1.0) and p == pytest.approx(2.0)
    assert richardson(1.0, 1.1, 1.05) == (None, None)


def test_extrapolated_cell_and_csv(tmp_path):
    sol = solve_cell(SQUARE, H)
    assert sol.k_tilde_richardson is not None and sol.richardson_order > 1
    assert abs(sol.k_tilde_richardson - sol.k_tilde) < abs(sol.k_tilde) * 0.05
    write_cell_csv(tmp_path / "c.csv", sol)
    head, row = (tmp_path / "c.csv").read_text().splitlines()
    assert head == "shape,d,h,k_tilde,k_tilde_richardson,geometry_approximate"
    assert row.startswith("square,5.000000000e-01,3.125000000e-02,")


def test_shear_layer_oracle():
    # no inclusions, t = 0 at the bottom, unit traction jump across the line:
    # t1 = -(y + l) below the line and -(y_I + l) above it
    base = UnitCellGeometry("square", 0.0)
    l = 4
    stripe = BoundaryLayerStripe(base, a=0.25, l=l)
    sol = solve_bl_t(stripe, H)
    yI = stripe.interface_height
    y = -l + (np.arange(sol.u.shape[0]) + 0.5) * H
    exact = np.where(y < yI, -(y + l), -(yI + l))[:, None] * np.ones_like(sol.u)
    assert np.max(np.abs(sol.u - exact)) <= 1e-10
    assert np.max(np.abs(sol.v)) <= 1e-10
    assert sol.constant == pytest.approx(-(yI + l), abs=1e-10)


def test_zero_jump_gives_zero_solution():
    sol = solve_bl_beta(BoundaryLayerStripe(SQUARE, a=H), None, H)
    assert sol.constant == 0.0
    assert np.all(sol.u == 0.0) and np.all(sol.v == 0.0)


def test_signs_and_decay(cell):
    stripe = BoundaryLayerStripe(SQUARE, a=H)
    solver = StripeSolver(SQUARE, H)
    t = solver.t_problem(stripe)
    beta = solver.beta_problem(stripe, cell)
    assert t.constant < 0 and beta.constant < 0
    assert t.max_divergence <= 1e-10 and beta.max_divergence <= 1e-10
    # the far field is a constant shear-free flow; its oscillating part has decayed
    assert beta.decay_ratio <= 1e-3 and t.decay_ratio <= 1e-3
    assert beta.far_field == pytest.approx(beta.constant, rel=1e-6)


def test_decomposition_cross_check(cell):
    # gamma = beta - w below the line is smooth across it and solves Stokes with
    # force -e1 below the line and bottom data -w; its line value equals M
    stripe = BoundaryLayerStripe(SQUARE, a=3 * H)
    solver = StripeSolver(SQUARE, H)
    beta = solver.beta_problem(stripe, cell)
    m = solver.line_index(stripe)
    ms = solver.ops
    force = np.zeros((ms.ny, ms.nx))
    force[:m] = -1.0
    b = ms.rhs(force_u=force, bottom_u=-(cell.w1[0] + cell.w1[-1]) / 2, bottom_v=-cell.w2[0])
    u, _, _, _ = ms.solve(b)
    assert ((u[m] + u[m - 1]) / 2).sum() * H == pytest.approx(beta.constant, rel=1e-10)


def test_cutoff_depth_study(cell):
    stripe4 = BoundaryLayerStripe(SQUARE, a=H, l=4)
    stripe6 = BoundaryLayerStripe(SQUARE, a=H, l=6)
    t4, t6 = solve_bl_t(stripe4, H), solve_bl_t(stripe6, H)
    b4, b6 = solve_bl_beta(stripe4, cell, H), solve_bl_beta(stripe6, cell, H)
    assert abs(t6.constant - t4.constant) < 0.005 * abs(t4.constant)
    assert abs(b6.constant - b4.constant) < 0.005 * abs(b4.constant)
    assert b6.top_velocity < b4.top_velocity


def test_misaligned_interface_rejected(cell):
    with pytest.raises(MicroscaleError, match="aligned"):
        solve_bl_beta(BoundaryLayerStripe(SQUARE, a=0.02), cell, H)
    with pytest.raises(MicroscaleError, match="step"):
        solve_bl_beta(BoundaryLayerStripe(SQUARE, a=1 / 64), solve_cell(SQUARE, 1 / 64, extrapolate=False), H)


def test_sweep_monotone_and_csv(tmp_path, cell):
    a = admissible_offsets(SQUARE, H, 6)
    table = sweep_interface(SQUARE, a, H, cell=cell)
    assert table.monotone is True
    assert all(r.N_tau < 0 and r.M_tau1 < 0 and r.R > 0 for r in table.rows)
    table.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "a,N_tau,M_tau1,R" and len(lines) == 7
    single = sweep_interface(SQUARE, a[:1], H, cell=cell)
    assert len(single.rows) == 1 and single.monotone is None
    threaded = sweep_interface(SQUARE, a, H, cell=cell, workers=2)
    for r1, r2 in zip(table.rows, threaded.rows):
        assert r1.R == pytest.approx(r2.R, rel=1e-10, abs=0)


def test_sweep_rejects_unsorted():
    with pytest.raises(ValueError):
        sweep_interface(SQUARE, [2 * H, H], H)
