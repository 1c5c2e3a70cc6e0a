import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clebsch_mhd import spectral as sp
from clebsch_mhd.clebsch import (
    FIELD_NAMES,
    N_FIELDS,
    Q_INDEX,
    ClebschState,
    ClebschTangent,
    EquationOfState,
    canonical_rhs,
    energy_budget,
    enthalpy,
    hamiltonian,
    internal_energy,
    lagrangian,
    lagrangian_density,
    reconstruct,
)
from clebsch_mhd.invariants import magnetic_helicity
from clebsch_mhd.recipes import single_mode_state, static_state
from clebsch_mhd.spectral import Grid
from clebsch_mhd.verification import _smooth_direction, gateaux_error

from .conftest import STRONG, random_state

VOLUME = (2 * np.pi) ** 3


def state_from(grid, **fields):
    fields.setdefault("rho", np.ones(grid.shape))
    return ClebschState.from_fields(grid, **fields)


class TestEquationOfState:
    def test_closed_form_at_unit_density(self, eos):
        rho = np.ones(4)
        assert internal_energy(rho, eos) == pytest.approx(1.5, rel=1e-15)
        assert enthalpy(rho, eos) == pytest.approx(2.5, rel=1e-15)

    def test_enthalpy_minus_energy_is_pressure_over_density(self, eos):
        rho = np.linspace(0.3, 3.0, 11)
        assert np.allclose(enthalpy(rho, eos) - internal_energy(rho, eos), eos.K * rho ** (eos.gamma - 1), rtol=1e-14)

    def test_enthalpy_is_derivative_of_energy_density(self):
        eos = EquationOfState(gamma=1.4, K=0.7)
        rho = np.linspace(0.5, 2.0, 7)
        h = 1e-5
        fd = ((rho + h) * internal_energy(rho + h, eos) - (rho - h) * internal_energy(rho - h, eos)) / (2 * h)
        assert np.max(np.abs(fd / enthalpy(rho, eos) - 1)) <= 1e-8

    def test_floor(self, eos):
        with pytest.raises(sp.DensityFloorError):
            internal_energy(np.array([1.0, 0.05]), eos)

    @pytest.mark.parametrize("kwargs", [dict(gamma=1.0), dict(K=0.0), dict(rho_floor=-1.0)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            EquationOfState(**kwargs)


class TestStateContainers:
    def test_field_layout(self, grid8):
        assert N_FIELDS == 14 == len(FIELD_NAMES)
        s = state_from(grid8, phi0=np.full(grid8.shape, 2.0))
        assert s.phi0[0, 0, 0] == 2.0 and s.rho.shape == grid8.shape and s.alpha.shape == (3, *grid8.shape)

    def test_requires_positive_density(self, grid8):
        with pytest.raises(sp.DensityFloorError):
            state_from(grid8, rho=np.zeros(grid8.shape))

    def test_rejects_nonfinite(self, grid8):
        rho = np.ones(grid8.shape)
        rho[1, 2, 3] = np.inf
        with pytest.raises(sp.NonFiniteFieldError):
            state_from(grid8, rho=rho)

    def test_displaced_is_a_new_value(self, grid8):
        s = static_state(grid8)
        before = s.data.copy()
        t = ClebschTangent.zeros(grid8)
        t.data[0] = 1.0
        s2 = s.displaced(t, 0.5)
        assert np.array_equal(s.data, before)
        assert np.all(s2.phi0 == 0.5)

    def test_symplectic_maps_are_inverse(self, grid8, rng):
        t = ClebschTangent(grid8, rng.standard_normal((N_FIELDS, *grid8.shape)))
        assert np.array_equal(t.symplectic().symplectic_inverse().data, t.data)
        assert np.array_equal(t.symplectic().symplectic().data, -t.data)

    def test_tangent_algebra(self, grid8, rng):
        a = ClebschTangent(grid8, rng.standard_normal((N_FIELDS, *grid8.shape)))
        b = ClebschTangent(grid8, rng.standard_normal((N_FIELDS, *grid8.shape)))
        assert np.allclose((2 * a + b - a).data, (a + b).data)

    def test_grid_mismatch(self, grid8, grid16):
        with pytest.raises(sp.GridMismatchError):
            lagrangian_density(static_state(grid8), ClebschTangent.zeros(grid16), EquationOfState())


class TestReconstruction:
    def test_quiescent(self, grid8):
        r = reconstruct(static_state(grid8))
        assert sp.max_norm(r.V) == 0.0 and sp.max_norm(r.B) == 0.0 and sp.max_norm(r.A) == 0.0

    def test_potential_flow(self, grid16):
        x, _, _ = grid16.coordinates()
        V = reconstruct(state_from(grid16, phi0=np.sin(x))).V
        assert sp.max_norm(V[0] + np.cos(x)) <= 1e-12 and sp.max_norm(V[1:]) <= 1e-12

    def test_single_pair_velocity(self, grid16):
        _, y, _ = grid16.coordinates()
        mu = np.zeros((3, *grid16.shape))
        alpha = np.zeros_like(mu)
        mu[0], alpha[0] = 1.0, np.sin(y)
        V = reconstruct(state_from(grid16, mu=mu, alpha=alpha)).V
        assert sp.max_norm(V[1] + np.cos(y)) <= 1e-12 and sp.max_norm(V[[0, 2]]) <= 1e-12

    def test_single_mode_magnetic_field_and_potential(self, grid16):
        x, y, _ = grid16.coordinates()
        r = reconstruct(single_mode_state(grid16))
        assert sp.max_norm(r.B[2] - np.cos(x) * np.cos(y)) <= 1e-12 and sp.max_norm(r.B[:2]) <= 1e-12
        assert sp.max_norm(r.A[1] - np.sin(x) * np.cos(y)) <= 1e-12 and sp.max_norm(r.A[[0, 2]]) <= 1e-12

    def test_no_mu_no_field(self, grid16):
        s = random_state(grid16, seed=1)
        s = ClebschState(grid16, np.where(np.isin(np.arange(N_FIELDS), [5, 6, 7])[:, None, None, None], 0.0, s.data))
        assert sp.max_norm(reconstruct(s).B) == 0.0

    @pytest.mark.parametrize("seed", range(3))
    def test_magnetic_field_is_solenoidal(self, grid16, seed):
        B = reconstruct(random_state(grid16, seed=seed)).B
        assert sp.max_norm(sp.div(grid16, B)) <= 1e-10 * sp.max_norm(B)

    @pytest.mark.parametrize("seed", range(3))
    def test_helicity_is_gauge_independent(self, grid16, seed):
        r = reconstruct(random_state(grid16, seed=seed))
        clebsch = magnetic_helicity(grid16, r.B, r.A)
        coulomb = magnetic_helicity(grid16, r.B)
        assert abs(clebsch - coulomb) <= 1e-9 * abs(coulomb)


class TestHamiltonian:
    def test_thermal_only(self, grid8, eos):
        assert hamiltonian(static_state(grid8), eos) == pytest.approx(1.5 * VOLUME, rel=1e-14)
        assert hamiltonian(static_state(grid8), eos) == pytest.approx(372.0753201635979, rel=1e-14)

    def test_single_mode_magnetic_energy(self, grid16, eos):
        assert energy_budget(single_mode_state(grid16), eos).magnetic == pytest.approx(VOLUME / 8, rel=1e-13)

    @pytest.mark.parametrize("seed", range(3))
    def test_two_evaluation_paths_agree(self, grid16, eos, seed):
        s = random_state(grid16, seed=seed, **STRONG)
        assert hamiltonian(s, eos) == pytest.approx(energy_budget(s, eos).total, rel=1e-12)


class TestCanonicalRHS:
    def test_static_state_only_advances_phi0(self, grid8, eos):
        rhs = canonical_rhs(static_state(grid8, 1.3), eos)
        assert np.allclose(rhs.phi0, enthalpy(np.array(1.3), eos), rtol=1e-15)
        assert sp.max_norm(rhs.data[1:]) == 0.0

    @pytest.mark.parametrize("form", ["printed", "variational"])
    def test_phi_is_advected(self, state16, eos, form):
        rhs = canonical_rhs(state16, eos, form)
        r = reconstruct(state16)
        transport = np.sum(r.V[None] * r.grad_phi, axis=1)
        assert sp.max_norm(rhs.phi + transport) <= 1e-12 * sp.max_norm(transport)

    def test_forms_differ_only_by_aliasing(self, grid24, eos):
        # a weak state is resolved at 24^3, so the two couplings agree closely
        s = random_state(grid24, seed=2)
        a, b = canonical_rhs(s, eos, "printed"), canonical_rhs(s, eos, "variational")
        assert sp.max_norm(a.data - b.data) <= 1e-8 * sp.max_norm(b.data)

    def test_unknown_form(self, state16, eos):
        with pytest.raises(ValueError):
            canonical_rhs(state16, eos, "weak")

    def test_mass_flux_integrates_to_zero(self, state16, eos):
        rhs = canonical_rhs(state16, eos)
        assert abs(sp.integrate(state16.grid, rhs.rho)) <= 1e-12 * sp.integrate(state16.grid, np.abs(rhs.rho))

    @pytest.mark.parametrize("seed", range(2))
    def test_gradient_matches_finite_differences(self, grid16, eos, seed):
        s = random_state(grid16, seed=seed, **STRONG)
        grad = canonical_rhs(s, eos).symplectic_inverse().data
        rng = np.random.default_rng(seed)
        for _ in range(5):
            d = _smooth_direction(grid16, rng, s.data)
            assert gateaux_error(lambda u: hamiltonian(u, eos), s, d, grad, (1e-5,)) <= 1e-6

    def test_variational_form_conserves_energy_rate(self, state16, eos):
        # the discrete energy is stationary along the flow; the scale is the size of the cancelling q-part
        rhs = canonical_rhs(state16, eos)
        eps = 1e-4
        rate = (hamiltonian(state16.displaced(rhs, eps), eos) - hamiltonian(state16.displaced(rhs, -eps), eos)) / (2 * eps)
        grad = rhs.symplectic_inverse().data
        scale = sp.integrate(state16.grid, np.abs(np.sum(grad[Q_INDEX] * rhs.data[Q_INDEX], axis=0)))
        assert abs(rate) <= 1e-8 * scale


class TestLagrangian:
    def test_zero_velocity(self, state16, eos):
        zero = ClebschTangent.zeros(state16.grid)
        from clebsch_mhd.clebsch import hamiltonian_density

        assert np.array_equal(lagrangian_density(state16, zero, eos), -hamiltonian_density(state16, eos))

    def test_static_state(self, grid8, eos):
        s = static_state(grid8)
        assert lagrangian(s, canonical_rhs(s, eos), eos) == pytest.approx((2.5 - 1.5) * VOLUME, rel=1e-14)

    @settings(max_examples=10, deadline=None)
    @given(a=st.floats(-2, 2), b=st.floats(-2, 2), seed=st.integers(0, 1000))
    def test_affine_in_velocities(self, a, b, seed):
        grid = Grid.cube(8)
        eos = EquationOfState()
        s = random_state(grid, seed=seed)
        rng = np.random.default_rng(seed)
        w1, w2 = (ClebschTangent(grid, rng.standard_normal((N_FIELDS, *grid.shape))) for _ in range(2))
        zero = ClebschTangent.zeros(grid)
        base = lagrangian(s, zero, eos)
        lhs = lagrangian(s, a * w1 + b * w2, eos) - base
        rhs = a * (lagrangian(s, w1, eos) - base) + b * (lagrangian(s, w2, eos) - base)
        assert lhs == pytest.approx(rhs, abs=1e-10 * (1 + abs(base)))
