import numpy as np
import pytest

from clebsch_mhd import gauge as gg
from clebsch_mhd import spectral as sp
from clebsch_mhd.clebsch import reconstruct
from clebsch_mhd.invariants import (
    WeightFunction,
    cross_helicity_primed,
    generalized_helicity,
    generalized_mass,
    magnetic_helicity,
    total_mass,
)
from clebsch_mhd.recipes import static_state
from clebsch_mhd.verification import _smooth_direction, gateaux_error

from .conftest import random_state

CONSERVING = ["C1", "C2", "C3", "GM:poly", "GH:poly"]
ALL = [*CONSERVING, "remark"]


def gen(name):
    return gg.GaugeGenerator.parse(name)


class TestGenerators:
    @pytest.mark.parametrize("name", ALL)
    def test_parse_round_trip(self, name):
        assert gen(name).name == name

    def test_weighted_default_and_unknown(self):
        assert gen("GM").name == "GM:one"
        with pytest.raises(ValueError):
            gen("C9")
        with pytest.raises(ValueError):
            gen("C1:poly")
        with pytest.raises(ValueError):
            gen("GH:nope")

    def test_weight_requirements(self):
        with pytest.raises(ValueError):
            gg.GaugeGenerator(gg.GaugeKind.GENERALIZED_MASS)
        with pytest.raises(ValueError):
            gg.GaugeGenerator(gg.GaugeKind.MASS, WeightFunction.constant())

    def test_all_generators(self):
        gens = gg.all_generators()
        assert [g.kind for g in gens] == list(gg.GaugeKind)
        assert [g.conserving for g in gens] == [True] * 5 + [False]

    def test_mass_generator_shifts_phi0_only(self, state16):
        du = gg.gauge_velocity(state16, gen("C1"))
        assert np.all(du.phi0 == 1.0) and sp.max_norm(du.data[1:]) == 0.0

    def test_helicity_generator_vanishes_without_field(self, grid16):
        s = random_state(grid16, seed=0, sigma_amp=0.0, phi_amp=0.5, alpha_amp=0.5)
        assert sp.max_norm(reconstruct(s).B) == 0.0
        assert sp.max_norm(gg.gauge_velocity(s, gen("C2")).data) == 0.0


class TestInfinitesimalInvariance:
    @pytest.mark.parametrize("name", CONSERVING)
    def test_physical_fields_are_unchanged(self, gauge_state, name):
        assert gg.physical_invariance_infinitesimal(gauge_state, gen(name)).max() <= 1e-10

    def test_static_state(self, grid8):
        for name in CONSERVING:
            assert gg.physical_invariance_infinitesimal(static_state(grid8), gen(name)).max() == 0.0


class TestFiniteFlows:
    def test_zero_epsilon_is_identity(self, state16):
        assert np.array_equal(gg.flow(state16, gen("C3"), 0.0, 4).data, state16.data)

    def test_mass_flow_shifts_phi0_exactly(self, state16):
        s1 = gg.flow(state16, gen("C1"), 0.5, 5)
        assert sp.max_norm(s1.phi0 - state16.phi0 - 0.5) <= 1e-14
        assert np.array_equal(s1.data[1:], state16.data[1:])

    def test_rejects_bad_arguments(self, state16):
        with pytest.raises(ValueError):
            gg.flow(state16, gen("C1"), 0.1, 0)
        with pytest.raises(ValueError):
            gg.flow(state16, gen("C1"), float("nan"))

    @pytest.mark.parametrize("name", ["C1", "C2", "GM:poly", "GH:poly"])
    def test_flow_leaves_physical_fields(self, gauge_state, name):
        s1 = gg.flow(gauge_state, gen(name), 0.1, 20)
        assert gg.physical_change(gauge_state, s1).max() <= 1e-8

    def test_cross_helicity_flow_converges_at_fourth_order(self, gauge_state):
        conv = gg.flow_convergence(gauge_state, gen("C3"), 0.1, (5, 10, 20))
        assert max(conv.changes) <= 1e-8
        assert not conv.saturated and conv.order == pytest.approx(4.0, abs=0.3)

    def test_saturated_flow_reports_no_order(self, state16):
        conv = gg.flow_convergence(state16, gen("C1"), 0.1, (2, 4, 8))
        assert conv.saturated and conv.order is None

    def test_convergence_needs_three_counts(self, state16):
        with pytest.raises(ValueError):
            gg.flow_convergence(state16, gen("C1"), 0.1, (2, 4))


class TestNoetherCharges:
    def test_charges_equal_invariants(self, state16):
        g, r = state16.grid, reconstruct(state16)
        w = WeightFunction.polynomial()
        expected = {
            "C1": total_mass(g, state16.rho),
            "C2": magnetic_helicity(g, r.B, r.A),
            "C3": cross_helicity_primed(state16),
            "GM:poly": generalized_mass(state16, w),
            "GH:poly": generalized_helicity(state16, w),
        }
        for name, value in expected.items():
            assert gg.noether_charge(state16, gen(name)) == pytest.approx(value, rel=1e-10), name

    @pytest.mark.parametrize("name", CONSERVING)
    def test_generator_is_the_symplectic_gradient_of_its_charge(self, state16, name):
        g = gen(name)
        grad = gg.gauge_velocity(state16, g).symplectic_inverse().data
        d = _smooth_direction(state16.grid, np.random.default_rng(0), state16.data)
        assert gateaux_error(lambda u: gg.noether_charge(u, g), state16, d, grad) <= 1e-8

    def test_remark_has_no_charge(self, state16):
        g = gen("remark")
        s = state16.displaced(gg.gauge_velocity(state16, gen("C1")), 1.0)
        grad = gg.gauge_velocity(s, g).symplectic_inverse().data
        d = _smooth_direction(s.grid, np.random.default_rng(0), s.data)
        assert gateaux_error(lambda u: gg.noether_charge(u, g), s, d, grad) >= 1e-2


class TestActionVariation:
    @pytest.mark.parametrize("name", CONSERVING)
    def test_conserving_generators_close(self, gauge_state, name):
        assert gg.action_variation(gauge_state, gen(name)).relative_gap <= 1e-8

    def test_remark_leaves_a_gap(self, gauge_state):
        s = gauge_state.displaced(gg.gauge_velocity(gauge_state, gen("C1")), 1.0)
        assert gg.action_variation(s, gen("remark")).relative_gap >= 1e-3

    def test_directional_derivative_is_exact_for_quadratics(self, state16):
        d = gg.gauge_velocity(state16, gen("C1"))
        out = gg.directional_derivative(lambda u: u.phi0**2, state16, d)
        assert sp.max_norm(out - 2 * state16.phi0) <= 1e-9


class TestReport:
    def test_mass_report(self, state16, tmp_path):
        report = gg.gauge_report(state16, gen("C1"), 1.0, 4)
        assert report.phi0_mean_shift == pytest.approx(1.0, abs=1e-14)
        assert report.change.max() <= 1e-13
        assert report.charge_after == pytest.approx(report.charge_before, rel=1e-14)
        assert len(report.per_substep) == 4
        assert "phi0_mean_shift: " in report.to_text()
        report.write_csv(tmp_path / "r.csv")
        assert (tmp_path / "r.csv").read_text().splitlines()[0] == "substep,change_rho,change_V,change_B"

    def test_charge_probe(self, state16):
        states = [state16, gg.flow(state16, gen("C2"), 0.05, 5)]
        drift = gg.charge_conservation_probe(states, gen("C1"))
        assert drift.max_relative_drift <= 1e-14
