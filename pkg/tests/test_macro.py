import math
import re

import numpy as np
import pytest

from stokes_darcy.grid import GridError, Rect
from stokes_darcy.macro import (
    InterfaceCoefficients,
    InvariantError,
    PorousMediumParams,
    ProblemSpec,
    apply_operator,
    assemble,
    interface_flux,
    porous_boundary_outflux,
    solve_coupled,
)
from stokes_darcy.mms import mms_spec, sample_exact

from stencil_2x2 import expected_rows

COEF = InterfaceCoefficients(eps=0.1, N_tau=-0.3, M_tau1=-0.05)


def unit_spec(h, **kw):
    base = dict(ff_rect=Rect(0, 1, 0.5, 1), pm_rect=Rect(0, 1, 0, 0.5), h=h,
                coefficients=COEF, medium=PorousMediumParams(1e-2))
    base.update(kw)
    return ProblemSpec(**base)


def test_homogeneous_problem_has_zero_solution():
    spec = unit_spec(1 / 32, pm_dirichlet=(("bottom", -math.inf, math.inf), ("left", -math.inf, math.inf)))
    fld, rep = solve_coupled(spec)
    assert rep.residual <= 1e-12
    for var in ("u", "v", "p_ff", "p_pm"):
        assert np.all(getattr(fld, var) == 0.0)


def _name_to_index(grid, name):
    m = re.fullmatch(r"(\w+)\[(\d+)(?:,(\d+))?\]", name)
    var, i, j = m.group(1), int(m.group(2)), m.group(3)
    if j is None:
        return int(grid.ghost_index(var, i))
    return int(grid.index(var, i, int(j)))


def test_2x2_rows_match_hand_assembly():
    k = 1e-2
    spec = ProblemSpec(ff_rect=Rect(0, 1, 1, 2), pm_rect=Rect(0, 1, 0, 1), h=0.5,
                       coefficients=COEF, medium=PorousMediumParams(k))
    grid = spec.grid()
    A = assemble(spec, grid).matrix.toarray()
    slip, grad, _ = COEF.tangential(k)
    assert slip == pytest.approx(0.03) and grad == pytest.approx(-0.0005)
    table = expected_rows(0.5, k, slip, grad)
    assert len(table) == grid.n_unknowns == A.shape[0]
    for row_name, entries in table.items():
        expect = np.zeros(grid.n_unknowns)
        for col_name, val in entries.items():
            expect[_name_to_index(grid, col_name)] += val
        got = A[_name_to_index(grid, row_name)]
        assert np.allclose(got, expect, rtol=0, atol=1e-13), row_name


def test_apply_operator_matches_matrix_product():
    spec = mms_spec(1 / 8)
    grid = spec.grid()
    system = assemble(spec, grid)
    x = np.random.default_rng(7).standard_normal(grid.n_unknowns)
    r = apply_operator(spec, grid, grid.unpack(x))
    assert np.max(np.abs(r - (system.rhs - system.matrix @ x))) <= 1e-14 * max(1.0, np.abs(system.rhs).max())
    assert np.array_equal(apply_operator(spec, grid, grid.zeros()), system.rhs)


def test_apply_operator_layout_mismatch():
    spec = mms_spec(1 / 8)
    other = mms_spec(1 / 16).grid()
    with pytest.raises(ValueError):
        apply_operator(spec, spec.grid(), other.zeros())


def test_truncation_error_is_second_order():
    norms = []
    for h in (1 / 32, 1 / 64):
        spec = mms_spec(h)
        grid = spec.grid()
        norms.append(np.abs(apply_operator(spec, grid, sample_exact(grid))).max())
    assert 3.4 <= norms[0] / norms[1] <= 4.6


def test_classical_mode_rows_equal_generalised_rows_under_identification():
    k, eps, alpha = 1e-4, 0.1, 0.8
    gen = InterfaceCoefficients(eps=eps, N_tau=-math.sqrt(k) / (alpha * eps), M_tau1=-k / eps**2)
    bj = InterfaceCoefficients(eps=eps, N_tau=-1.0, M_tau1=-1.0, mode="classical_bj", alpha_bj=alpha)
    assert gen.tangential(k) == pytest.approx(bj.tangential(k), rel=1e-14)
    spec_g = unit_spec(1 / 8, coefficients=gen, medium=PorousMediumParams(k))
    spec_b = unit_spec(1 / 8, coefficients=bj, medium=PorousMediumParams(k))
    grid = spec_g.grid()
    Ag, Ab = assemble(spec_g, grid).matrix, assemble(spec_b, grid).matrix
    rows = grid.ghost_index("u_bot", np.arange(grid.sizes["u_bot"]))
    assert np.allclose(Ag[rows].toarray(), Ab[rows].toarray(), rtol=1e-13, atol=0)


def _lid(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    u = np.where(np.abs(y - 1.0) < 1e-12, 1.0, 0.0) + 0 * x
    return u, np.zeros_like(u)


def test_lid_driven_cavity_flux_balance():
    h = 1 / 16
    spec = unit_spec(h, ff_velocity=_lid, pm_dirichlet=(("bottom", 0.0, h),))
    grid = spec.grid()
    fld, _ = solve_coupled(spec, grid, tol=1e-12)
    assert np.abs(fld.v[0]).max() > 1e-3  # genuine exchange across the interface
    out = porous_boundary_outflux(spec, grid, fld)
    assert abs(out["left"]) + abs(out["right"]) < 1e-15  # sealed sides
    assert abs(interface_flux(grid, fld) - out["bottom"]) <= 1e-12


def test_porous_source_is_balanced_by_boundary_fluxes():
    h = 1 / 16
    spec = unit_spec(h, ff_velocity=_lid, pm_dirichlet=(("bottom", 0.0, 0.5),),
                     mass_pm=lambda x, y: np.ones(np.shape(x)))
    grid = spec.grid()
    fld, _ = solve_coupled(spec, grid, tol=1e-12)
    out = porous_boundary_outflux(spec, grid, fld)
    source = 0.5 * 1.0  # unit source over the porous box
    # volume flux leaving the porous box through Gamma is +v there
    assert interface_flux(grid, fld) + sum(out.values()) == pytest.approx(source, abs=1e-12)


def test_invariant_errors():
    with pytest.raises(InvariantError, match="Gamma_pm"):
        unit_spec(1 / 8, pm_dirichlet=())
    with pytest.raises(InvariantError, match="N_tau"):
        InterfaceCoefficients(eps=0.1, N_tau=0.2, M_tau1=-0.1)
    with pytest.raises(InvariantError, match="M_tau1"):
        InterfaceCoefficients(eps=0.1, N_tau=-0.2, M_tau1=0.1)
    with pytest.raises(InvariantError, match="alpha_bj"):
        InterfaceCoefficients(eps=0.1, N_tau=-0.2, M_tau1=-0.1, mode="classical_bj")
    with pytest.raises(InvariantError, match="isotropic"):
        InterfaceCoefficients(eps=0.1, N_tau=-0.2, M_tau1=-0.1, N_s=0.1)
    with pytest.raises(InvariantError):
        PorousMediumParams(0.0)
    spec = unit_spec(1 / 8, pm_dirichlet=(("bottom", 5.0, 6.0),))
    with pytest.raises(InvariantError):
        assemble(spec)
    with pytest.raises(GridError):
        solve_coupled(ProblemSpec(ff_rect=Rect(0, 1, 0.5, 0.625), pm_rect=Rect(0, 1, 0, 0.5), h=1 / 8,
                                  coefficients=COEF, medium=PorousMediumParams(1e-2)))


def test_k_tilde_scaling():
    m = PorousMediumParams.from_k_tilde(0.013, 0.1)
    assert m.k == pytest.approx(0.013 * 0.01, rel=1e-15)
    assert m.k_tilde(0.1) == pytest.approx(0.013, rel=1e-14)


def test_anisotropic_coefficients_assemble_and_solve():
    coef = InterfaceCoefficients(eps=0.1, N_tau=-0.3, M_tau1=-0.05, N_s=0.05, M_tau2=-0.01, isotropic=False)
    spec = unit_spec(1 / 8, coefficients=coef, ff_velocity=_lid)
    fld, rep = solve_coupled(spec)
    assert rep.residual <= 1e-10 and fld.is_finite()
