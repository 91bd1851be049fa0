import numpy as np
import pytest

from coopsense.analysis import (
    BirthTimeDist,
    GridSpec,
    QuadratureConfig,
    Scenario3,
    ScenarioCoop,
    coop_conditional,
    coop_distribution,
    heatmap,
    interferer_distribution,
)
from coopsense.analysis.montecarlo import (
    mc_coop_conditional,
    mc_interferer_distribution,
)

RATES_T = 5000 / 2.1e6

# coarse settings keep the module tests quick; acceptance re-runs the
# headline features at full resolution
FAST = QuadratureConfig(ti_nodes=16, eta_nodes=16,
                        area_grid=GridSpec(-60, 180, -120, 120, 24, 20))


class TestBirthTimeDist:
    def test_uniform_mass(self):
        b = BirthTimeDist(RATES_T)
        assert b.mass(-RATES_T, RATES_T) == pytest.approx(1.0)
        assert b.mass(-RATES_T, 0.0) == pytest.approx(0.5)

    def test_bad_mass_rejected(self):
        with pytest.raises(ValueError):
            BirthTimeDist(RATES_T, density=lambda u: np.full_like(u, 1.0))

    def test_custom_density_sampling(self):
        T = RATES_T
        tri = lambda u: np.maximum(T - np.abs(u), 0.0) / T ** 2
        b = BirthTimeDist(T, density=tri)
        draws = b.sample(20000, np.random.default_rng(0))
        assert abs(np.mean(np.abs(draws)) - T / 3) < 0.02 * T


class TestInterfererDistribution:
    def test_reflection_invariance(self):
        # the conditional outage depends only on |t_i|, so mirroring the
        # birth-time density about zero cannot change the average
        T = RATES_T
        s = Scenario3((0, 0), (60, 0), (90, 10))
        skew = lambda u: (u + T) / (2 * T ** 2)
        mirror = lambda u: (T - u) / (2 * T ** 2)
        a = interferer_distribution(s, BirthTimeDist(T, skew), FAST)
        b = interferer_distribution(s, BirthTimeDist(T, mirror), FAST)
        assert a == pytest.approx(b, rel=1e-9)

    def test_point_value_matches_monte_carlo(self):
        s = Scenario3((0, 0), (60, 0), (90, 0))
        got = interferer_distribution(s)
        mc = mc_interferer_distribution(s, 2 * 10 ** 6, np.random.default_rng(4))
        assert got == pytest.approx(mc, abs=5e-3)

    def test_argmax_beyond_destination(self):
        sc = ScenarioCoop((0, 0), (60, 0), (10, 0))
        hm = heatmap("interferer", sc, GridSpec(-60, 180, -120, 120, 60, 48))
        x, y = hm.argmax_position()
        assert x > 60
        assert abs(y) < 20

    def test_argmax_stable_on_enlarged_region(self):
        # the gated outage tends to a positive constant far away (the access
        # gate and the interference attenuation share the path-loss exponent),
        # so the peak is a feature of the studied region; it must stay behind
        # the destination when the region grows moderately
        sc = ScenarioCoop((0, 0), (60, 0), (10, 0))
        hm = heatmap("interferer", sc, GridSpec(-90, 240, -150, 150, 44, 40))
        x, y = hm.argmax_position()
        assert x > 60
        assert abs(y) < 20


class TestCoopConditional:
    SC = ScenarioCoop((0, 0), (60, 0), (10, 0))
    T = RATES_T

    def test_saturates_for_adjacent_cooperator(self):
        sc = ScenarioCoop((0, 0), (60, 0), (0.5, 0))
        assert coop_conditional(sc, -self.T / 2, FAST) == pytest.approx(1.0, abs=1e-6)

    def test_in_unit_interval(self):
        for t_i in (-self.T / 2, self.T / 2):
            v = coop_conditional(self.SC, t_i, FAST)
            assert 0.0 <= v <= 1.0

    def test_matches_nested_monte_carlo(self):
        rng = np.random.default_rng(12)
        for t_i in (-self.T / 2, self.T / 3):
            got = coop_conditional(self.SC, t_i)
            mc = mc_coop_conditional(self.SC, t_i, 2 * 10 ** 6, rng)
            assert got == pytest.approx(mc, abs=1e-2)


class TestCoopDistribution:
    SC = ScenarioCoop((0, 0), (60, 0), (10, 0))
    T = RATES_T

    def test_halves_combine_to_full(self):
        minus = coop_distribution(self.SC, domain=(-self.T, 0.0), quad=FAST)
        plus = coop_distribution(self.SC, domain=(0.0, self.T), quad=FAST)
        full = coop_distribution(self.SC, quad=FAST)
        assert full == pytest.approx(0.5 * minus + 0.5 * plus, abs=1e-12)

    def test_unnormalized_integral(self):
        raw = coop_distribution(self.SC, domain=(-self.T, 0.0), quad=FAST,
                                conditional=False)
        cond = coop_distribution(self.SC, domain=(-self.T, 0.0), quad=FAST)
        assert raw == pytest.approx(0.5 * cond, rel=1e-12)

    def test_empty_domain_rejected(self):
        with pytest.raises(ValueError):
            coop_distribution(self.SC, domain=(0.0, 0.0), quad=FAST)

    def test_near_source_beats_near_destination(self):
        near_s = ScenarioCoop((0, 0), (60, 0), (8, 4))
        near_d = ScenarioCoop((0, 0), (60, 0), (56, 4))
        for dom in ((-self.T, 0.0), (0.0, self.T)):
            a = coop_distribution(near_s, domain=dom, quad=FAST)
            b = coop_distribution(near_d, domain=dom, quad=FAST)
            assert a > b


class TestHeatmap:
    SC = ScenarioCoop((0, 0), (60, 0), (10, 0))

    def test_unknown_quantity(self):
        with pytest.raises(ValueError):
            heatmap("bogus", self.SC)

    def test_values_in_unit_interval(self):
        hm = heatmap("interferer", self.SC, GridSpec(-60, 180, -120, 120, 20, 16))
        finite = hm.values[np.isfinite(hm.values)]
        assert np.all((finite >= 0) & (finite <= 1))

    def test_cells_on_fixed_nodes_are_skipped(self):
        grid = GridSpec(-10, 10, -10, 10, 5, 5)  # center cell sits on the source
        hm = heatmap("interferer", self.SC, grid)
        i = np.argmin(np.abs(hm.xs))
        j = np.argmin(np.abs(hm.ys))
        assert np.isnan(hm.values[i, j])

    def test_axis_symmetry(self):
        hm = heatmap("interferer", self.SC, GridSpec(-60, 180, -120, 120, 24, 20))
        assert np.allclose(hm.values, hm.values[:, ::-1], rtol=1e-9, atol=1e-15)

    def test_coop_minus_argmax_near_source(self):
        hm = heatmap("coop_minus", self.SC,
                     GridSpec(-60, 180, -120, 120, 12, 10), quad=FAST)
        x, y = hm.argmax_position()
        assert np.hypot(x, y) <= 25
