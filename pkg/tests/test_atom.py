"""Unit tests of the atomic steady state, susceptibility and the closed-form
two-level expressions. Reference values come from independent oracles
(nullspace of the full superoperator, dense eigen-decompositions)."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringob.atom import (
    AtomParams,
    BranchPoint,
    CellResponse,
    DegenerateDenominator,
    DriveParams,
    OpticalConstants,
    SingularSteadyState,
    SteadyStateProblem,
    ZeroDrive,
    absorption_factor,
    apply_relaxation,
    build_hamiltonian,
    steady_state,
    susceptibility,
    two_level_im_rho12,
    two_level_im_rho32,
)

finite = st.floats(-5.0, 5.0, allow_nan=False)
rate = st.floats(0.05, 5.0, allow_nan=False)


def lindblad_atom(eps1, eps2, g21, g23, k1=0.0, k2=0.0, k3=0.0):
    """AtomParams with dephasings consistent with population decay."""
    gamma = np.zeros((3, 3))
    gamma[1, 0] = g21
    gamma[1, 2] = g23
    half = 0.5 * (g21 + g23)
    Gamma = np.array([
        [0.0, half + k1 + k2, k1 + k3],
        [half + k1 + k2, 0.0, half + k2 + k3],
        [k1 + k3, half + k2 + k3, 0.0],
    ])
    return AtomParams(eps1=eps1, eps2=eps2, gamma=gamma, Gamma=Gamma)


class TestHamiltonian:
    def test_default_detunings_diagonal(self):
        atom = AtomParams()   # eps1 = 0.7, eps2 = -0.7
        H = build_hamiltonian(atom, DriveParams(0.0, 0.0))
        assert np.allclose(np.diag(H), [0.0, 0.7, -1.4])

    def test_coupling_layout(self):
        H = build_hamiltonian(AtomParams(eps1=0.0, eps2=0.0), DriveParams(1.5, 2.5))
        expected = np.array([
            [0.0, 1.5, 0.0],
            [1.5, 0.0, 2.5],
            [0.0, 2.5, 0.0],
        ])
        assert np.allclose(H, expected)

    def test_hermitian(self):
        H = build_hamiltonian(AtomParams(eps1=1.0, eps2=-2.0), DriveParams(0.3, 0.8))
        assert np.allclose(H, H.conj().T)

    def test_no_direct_1_3_coupling(self):
        H = build_hamiltonian(AtomParams(), DriveParams(1.0, 1.0))
        assert H[0, 2] == 0.0 and H[2, 0] == 0.0


class TestRelaxation:
    @given(finite, finite, rate, rate,
           st.lists(st.floats(-1.0, 1.0), min_size=6, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_trace_preserving(self, eps1, eps2, g21, g23, entries):
        atom = lindblad_atom(eps1, eps2, g21, g23)
        a, b, c, d, e, f = entries
        rho = np.array([
            [a, b + 1j * c, d],
            [b - 1j * c, e, f],
            [d, f, 1.0 - a - e],
        ], dtype=complex)
        out = apply_relaxation(rho, atom)
        assert abs(np.trace(out)) < 1e-12

    def test_population_flow_direction(self):
        # all population in |2>: it must decay into |1> and |3>
        atom = AtomParams()
        rho = np.zeros((3, 3), dtype=complex)
        rho[1, 1] = 1.0
        out = apply_relaxation(rho, atom)
        assert out[1, 1].real < 0
        assert out[0, 0].real > 0 and out[2, 2].real > 0

    def test_coherence_damping(self):
        atom = AtomParams()
        rho = np.zeros((3, 3), dtype=complex)
        rho[0, 1] = rho[1, 0] = 0.5
        out = apply_relaxation(rho, atom)
        assert out[0, 1].real == pytest.approx(-0.5 * 0.5)


def nullspace_steady_state(atom, drive):
    """Independent oracle: smallest singular vector of the full generator."""
    problem = SteadyStateProblem(atom)
    M = problem.full_matrix(drive.omega1, drive.omega2)
    _, _, vh = np.linalg.svd(M)
    vec = vh[-1].conj()
    rho = vec.reshape(3, 3)
    rho = rho / np.trace(rho)
    return rho


class TestSteadyState:
    def test_matches_nullspace_oracle(self):
        atom = AtomParams()
        drive = DriveParams(1.0, 0.5)
        dm = steady_state(atom, drive)
        oracle = nullspace_steady_state(atom, drive)
        assert np.abs(dm.rho - oracle).max() < 1e-12

    def test_residual_trace_hermiticity(self):
        atom = lindblad_atom(0.7, -0.7, 3.0, 3.0)
        dm = steady_state(atom, DriveParams(2.0, 0.3))
        assert dm.residual < 1e-10
        assert dm.trace_defect < 1e-10
        assert dm.hermiticity_defect < 1e-10
        assert dm.min_eigenvalue > -1e-8

    @given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
           st.floats(0.05, 3.0), st.floats(0.05, 3.0))
    @settings(max_examples=40, deadline=None)
    def test_physicality_lindblad(self, eps1, eps2, om1, om2):
        atom = lindblad_atom(eps1, eps2, 2.0, 1.0, k1=0.1, k2=0.2, k3=0.05)
        dm = steady_state(atom, DriveParams(om1, om2))
        assert dm.residual < 1e-10
        assert dm.min_eigenvalue > -1e-8

    def test_singular_without_drive(self):
        # Omega = 0 with no ground-state mixing: steady state not unique
        atom = AtomParams()
        with pytest.raises(SingularSteadyState) as err:
            steady_state(atom, DriveParams(0.0, 0.0))
        assert err.value.cond > 1e12

    def test_batch_agrees_with_scalar(self):
        atom = AtomParams()
        problem = SteadyStateProblem(atom)
        om1 = np.array([0.5, 1.0, 2.0])
        om2 = np.array([0.2, 1.0, 0.1])
        rho, res, ok = problem.solve_batch(om1, om2)
        assert ok.all()
        for k in range(3):
            dm = steady_state(atom, DriveParams(float(om1[k]), float(om2[k])))
            assert np.abs(rho[k] - dm.rho).max() < 1e-12
            assert res[k] < 1e-10

    def test_gauge_symmetry_sign_flip(self):
        # |rho| entries are invariant under Omega_1 -> -Omega_1 is not
        # meaningful for intensities; instead swap-symmetric parameters must
        # produce the mirrored state
        atom = AtomParams(eps1=0.0, eps2=0.0)
        dm_ab = steady_state(atom, DriveParams(1.3, 0.4))
        atom_sw = AtomParams(eps1=0.0, eps2=0.0,
                             gamma=atom.gamma[::-1, ::-1].copy(),
                             Gamma=atom.Gamma[::-1, ::-1].copy())
        dm_ba = steady_state(atom_sw, DriveParams(0.4, 1.3))
        P = np.eye(3)[::-1]
        assert np.abs(dm_ab.rho - P @ dm_ba.rho @ P).max() < 1e-10


class TestCoherenceBalance:
    def test_population_balance_identity(self):
        """Im rho_21 = -gamma_21 rho_22 / (2 Omega_1), same for mode 2."""
        atom = AtomParams()
        drive = DriveParams(1.7, 0.6)
        dm = steady_state(atom, drive)
        g21 = atom.gamma[1, 0]
        g23 = atom.gamma[1, 2]
        p22 = dm.rho[1, 1].real
        assert dm.rho[1, 0].imag == pytest.approx(-g21 * p22 / (2 * drive.omega1), rel=1e-9)
        assert dm.rho[1, 2].imag == pytest.approx(-g23 * p22 / (2 * drive.omega2), rel=1e-9)

    def test_ratio_equal_rates(self):
        atom = AtomParams()
        drive = DriveParams(0.5, 2.0)
        dm = steady_state(atom, drive)
        ratio = dm.rho[1, 0].imag / dm.rho[1, 2].imag
        assert ratio == pytest.approx(drive.omega2 / drive.omega1, rel=1e-9)


class TestSusceptibility:
    def test_absorptive_sign(self):
        atom = AtomParams()
        drive = DriveParams(1.0, 1.0)
        dm = steady_state(atom, drive)
        constants = OpticalConstants()
        for mode in (1, 2):
            chi = susceptibility(dm, drive, constants, mode)
            assert chi.imag < 0

    def test_zero_drive_raises(self):
        atom = AtomParams()
        dm = steady_state(atom, DriveParams(1.0, 1.0))
        with pytest.raises(ZeroDrive):
            susceptibility(dm, DriveParams(0.0, 1.0), OpticalConstants(), 1)

    def test_absorption_factor_passive(self):
        res = absorption_factor(-1e-6j, OpticalConstants())
        assert 0 < res.eta < 1
        assert not res.gain

    def test_absorption_factor_gain_flag(self):
        res = absorption_factor(+1e-6j, OpticalConstants())
        assert res.eta > 1
        assert res.gain

    def test_transparent_limit(self):
        res = absorption_factor(0.0 + 0.0j, OpticalConstants())
        assert res.eta == pytest.approx(1.0)

    def test_branch_point(self):
        with pytest.raises(BranchPoint):
            absorption_factor(-1.0 / (4.0 * np.pi), OpticalConstants())

    def test_coupling_override(self):
        c = OpticalConstants(C1=2.0, C2=3.0)
        assert c.coupling(1) == 2.0
        assert c.coupling(2) == 3.0

    def test_include_length(self):
        with_l = OpticalConstants(include_length=True)
        without = OpticalConstants(include_length=False)
        chi = -1e-7j
        e1 = absorption_factor(chi, with_l).eta
        e2 = absorption_factor(chi, without).eta
        # L = 5 cm multiplies the exponent
        assert np.log(e1) == pytest.approx(5.0 * np.log(e2), rel=1e-9)


class TestTwoLevelForms:
    @given(st.floats(0.1, 4.0), st.floats(0.1, 4.0), st.floats(-2.0, 2.0),
           rate, rate, rate)
    @settings(max_examples=100, deadline=None)
    def test_identity_between_forms(self, om1, om2, delta, g21, g23, G21):
        try:
            lhs = two_level_im_rho32(om1, om2, delta, g21, g23, G21)
            rhs = two_level_im_rho12(om1, om2, delta, g21, G21) * g21 * om1 / (g23 * om2)
        except DegenerateDenominator:
            return
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_pole_raises(self):
        # denominator zero: 4 om1^2 G = g ((om2-d)^2 + G^2)
        g21, G21, delta = 1.0, 1.0, 0.0
        om2 = 1.0
        om1 = np.sqrt(g21 * ((om2 - delta) ** 2 + G21**2) / (4 * G21))
        with pytest.raises(DegenerateDenominator):
            two_level_im_rho12(float(om1), om2, delta, g21, G21)

    def test_frozen_value(self):
        # default rates, on-resonance mode 2
        val = two_level_im_rho12(1.0, 0.7, 0.7, 3.0, 0.5)
        # 1*3*0.5 / (4*1*0.5 - 3*(0^2+0.25)) = 1.5/1.25
        assert val == pytest.approx(1.2, rel=1e-12)


class TestCellResponse:
    def test_etas_flag_nonpositive(self):
        resp = CellResponse(AtomParams(), OpticalConstants())
        e1, e2, ok = resp.etas([1.0, 0.0, -1.0], [1.0, 1.0, 1.0])
        assert ok.tolist() == [True, False, False]
        assert np.isnan(e1[1]) and np.isnan(e2[2])

    def test_eta_bounds(self):
        resp = CellResponse(AtomParams(), OpticalConstants())
        e1, e2, ok = resp.etas(np.geomspace(0.01, 100, 20), np.geomspace(0.01, 100, 20))
        assert ok.all()
        assert (e1 > 0).all() and (e2 > 0).all()
        assert (e1 <= 1.0 + 1e-12).all()

    def test_strong_drive_transparency(self):
        # saturated transition: eta_1 approaches 1 at very strong drive
        resp = CellResponse(AtomParams(), OpticalConstants())
        e1, _, ok = resp.etas([1e6], [1e6])
        assert ok[0]
        assert e1[0] > 0.99


class TestValidation:
    def test_gamma_shape(self):
        with pytest.raises(ValueError):
            AtomParams(gamma=np.zeros((2, 2)))

    def test_negative_rate(self):
        g = np.zeros((3, 3))
        g[1, 0] = -1.0
        with pytest.raises(ValueError):
            AtomParams(gamma=g)

    def test_asymmetric_big_gamma(self):
        G = np.zeros((3, 3))
        G[0, 1] = 1.0
        with pytest.raises(ValueError):
            AtomParams(Gamma=G)

    def test_negative_drive(self):
        with pytest.raises(ValueError):
            DriveParams(-1.0, 0.0)

    def test_constants_positive(self):
        with pytest.raises(ValueError):
            OpticalConstants(L=-1.0)
