import math

import mpmath as mp
import numpy as np
import pytest

from stokes_darcy.mms import (
    REFERENCE_ERRORS,
    MmsCase,
    exact_solution,
    interface_residuals,
    level_errors,
    mms_forcing,
    run_convergence,
)

CASE = MmsCase()


def test_exact_solution_examples():
    u, v, _, ppm = exact_solution(0.0, 0.5)
    assert u == 0.0 and v == pytest.approx(-math.sqrt(2) / 2)
    assert ppm == pytest.approx(math.sqrt(2) / (2 * 1e-6))
    y = np.linspace(0, 1, 11)
    assert np.allclose(exact_solution(1.0, y)[1], 0.0, atol=1e-16)
    u, v, _, _ = exact_solution(0.5, 0.5)
    assert u == pytest.approx(0.5) and v == pytest.approx(-0.5)


def test_case_constants():
    assert CASE.N_tau == pytest.approx(-0.3183, abs=5e-5)
    assert CASE.M_tau1 == pytest.approx(-2e-6 * 1.05 / (math.pi * 0.01), rel=1e-14)
    assert CASE.M_tau1 < 0 and CASE.N_s == 0 and CASE.M_tau2 == 0


def test_porous_mass_forcing_example():
    f = mms_forcing(0.0, 0.25)[3]
    assert f == pytest.approx(-(math.sqrt(2) / 2) * math.exp(-0.25) * (1 - math.pi**2 / 4), rel=1e-14)
    assert np.all(mms_forcing(np.linspace(0, 1, 5), 0.7)[2] == 0.0)


def _exact_mp(x, y, k):
    a = mp.pi / 2
    e = mp.exp(y - mp.mpf("0.5")) / k
    s2 = mp.sqrt(2) / 2
    return (mp.sin(a * x) * mp.cos(a * y), -mp.cos(a * x) * mp.sin(a * y),
            s2 * mp.cos(a * x) * (e - a), s2 * mp.cos(a * x) * e)


def _fd_forcing(x, y, k, d=mp.mpf("1e-5")):
    """-div T and -k lap p by centred differences, in 40-digit arithmetic."""
    x, y = mp.mpf(x), mp.mpf(y)
    c = _exact_mp(x, y, k)
    xp, xm = _exact_mp(x + d, y, k), _exact_mp(x - d, y, k)
    yp, ym = _exact_mp(x, y + d, k), _exact_mp(x, y - d, k)
    lap = [(xp[n] + xm[n] + yp[n] + ym[n] - 4 * c[n]) / d**2 for n in range(4)]
    fu = -lap[0] + (xp[2] - xm[2]) / (2 * d)
    fv = -lap[1] + (yp[2] - ym[2]) / (2 * d)
    return float(fu), float(fv), float(-k * lap[3])


def test_forcing_matches_finite_differences():
    rng = np.random.default_rng(11)
    x = rng.uniform(0.01, 0.99, 1000)
    y = rng.uniform(0.01, 0.99, 1000)
    fu, fv, _, fpm = mms_forcing(x, y)
    k = mp.mpf("1e-6")
    with mp.workdps(40):
        oracle = np.array([_fd_forcing(a, b, k) for a, b in zip(x, y)])
    for closed, fd in zip((fu, fv, fpm), oracle.T):
        assert np.max(np.abs(closed - fd) / np.abs(fd)) < 1e-6


def test_interface_identities_hold_pointwise():
    x = np.linspace(0, 1, 101)
    for r in interface_residuals(x, relative=True):
        assert np.max(np.abs(r)) <= 1e-12
    # mass and tangential terms are O(1), so there the bound holds absolutely
    r_mass, _, r_tan = interface_residuals(x)
    assert np.max(np.abs(r_mass)) <= 1e-12 and np.max(np.abs(r_tan)) <= 1e-12


def test_tangential_identity_closed_form():
    x = np.linspace(0, 1, 101)
    eps = CASE.eps
    closed = (-0.05 + (1 + 0.5 * eps)) * math.sqrt(2) / 2 * np.sin(math.pi * x / 2)
    assert np.max(np.abs(closed - exact_solution(x, 0.5)[0])) <= 1e-12


def test_coarsest_level_within_factor_three():
    lev = level_errors(1 / 8)
    for var, ref in zip(("u", "v", "p_ff", "p_pm"), REFERENCE_ERRORS[8]):
        assert ref / 3 <= lev.errors[var] <= 3 * ref


def test_convergence_orders_and_csv(tmp_path):
    rep = run_convergence([1 / 8, 1 / 16, 1 / 32, 1 / 64], csv_path=tmp_path / "c.csv")
    for o in rep.orders()[1:]:
        for var, rate in o.items():
            assert 1.8 <= rate <= 2.2, (var, rate)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == ",".join(rep.HEADER)
    assert len(lines) == 5


def test_levels_must_halve():
    with pytest.raises(ValueError, match="halve"):
        run_convergence([1 / 8, 1 / 32])
