import numpy as np
import pytest

from cempid.cem import (BLOWUP_COST, CemConfig, CemState, cem_update,
                        minimize, sample_population)
from cempid.errors import EmptyEliteError


def make_config(dim=10, N=25, rho=0.2, noise=0.01, init_var=1.0):
    return CemConfig(population_N=N, elite_fraction_rho=rho, noise_var=noise,
                     init_mean=np.zeros(dim), init_var=init_var)


class TestConfig:
    def test_elite_count(self):
        assert make_config(N=25, rho=0.2).elite_count == 5

    def test_empty_elite_rejected(self):
        with pytest.raises(EmptyEliteError):
            make_config(N=3, rho=0.1)

    def test_invalid_values(self):
        with pytest.raises(ValueError):
            make_config(N=0)
        with pytest.raises(ValueError):
            make_config(rho=1.5)
        with pytest.raises(ValueError):
            make_config(noise=-0.1)
        with pytest.raises(ValueError):
            make_config(init_var=0.0)


class TestSamplePopulation:
    def test_degenerate_variance_collapses_to_mean(self, rng):
        state = CemState(mean=np.arange(10.0), variance=np.full(10, 1e-30))
        pop = sample_population(state, 5, rng)
        for cand in pop:
            assert np.max(np.abs(cand - state.mean)) < 1e-10

    def test_population_shape(self, rng):
        state = CemState(mean=np.zeros(2918), variance=np.ones(2918))
        pop = sample_population(state, 25, rng)
        assert len(pop) == 25
        assert all(c.shape == (2918,) for c in pop)

    def test_deterministic_per_seed(self):
        state = CemState(mean=np.zeros(8), variance=np.ones(8))
        a = sample_population(state, 4, np.random.default_rng(3))
        b = sample_population(state, 4, np.random.default_rng(3))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))


class TestCemUpdate:
    def test_identical_candidates(self):
        cfg = make_config(dim=4, N=5, rho=0.4, noise=0.25)
        state = CemState(mean=np.zeros(4), variance=np.ones(4))
        cand = np.array([1.0, -2.0, 3.0, 0.5])
        scored = [(cand.copy(), 1.0)] * 5
        out = cem_update(state, scored, cfg)
        np.testing.assert_allclose(out.mean, cand)
        assert np.array_equal(out.variance, np.full(4, 0.25))
        assert out.iteration == 1

    def test_argmin_selection(self):
        cfg = make_config(dim=2, N=3, rho=1 / 3, noise=0.0)
        state = CemState(mean=np.zeros(2), variance=np.ones(2))
        w = [np.array([1.0, 1.0]), np.array([2.0, 2.0]), np.array([3.0, 3.0])]
        out = cem_update(state, list(zip(w, [3.0, 1.0, 2.0])), cfg)
        np.testing.assert_allclose(out.mean, w[1])

    def test_tie_break_by_lower_index(self):
        cfg = make_config(dim=1, N=3, rho=1 / 3, noise=0.0)
        state = CemState(mean=np.zeros(1), variance=np.ones(1))
        w = [np.array([10.0]), np.array([20.0]), np.array([30.0])]
        out = cem_update(state, list(zip(w, [1.0, 1.0, 1.0])), cfg)
        np.testing.assert_allclose(out.mean, w[0])

    def test_nonfinite_costs_replaced(self):
        cfg = make_config(dim=1, N=4, rho=0.5, noise=0.0)
        state = CemState(mean=np.zeros(1), variance=np.ones(1))
        w = [np.array([float(i)]) for i in range(4)]
        costs = [np.inf, 5.0, np.nan, 2.0]
        out = cem_update(state, list(zip(w, costs)), cfg)
        # elites are candidates 3 (cost 2) and 1 (cost 5)
        np.testing.assert_allclose(out.mean, [(3.0 + 1.0) / 2])

    def test_all_nonfinite_uses_blowup_sentinel(self):
        cfg = make_config(dim=1, N=2, rho=1.0, noise=0.0)
        state = CemState(mean=np.zeros(1), variance=np.ones(1))
        w = [np.array([1.0]), np.array([2.0])]
        out = cem_update(state, list(zip(w, [np.inf, np.nan])), cfg)
        assert out.history[-1][1] == BLOWUP_COST + 1.0

    def test_variance_floor(self, rng):
        cfg = make_config(dim=6, N=10, rho=0.3, noise=0.07)
        state = CemState(mean=np.zeros(6), variance=np.ones(6))
        scored = [(rng.standard_normal(6), float(rng.uniform())) for _ in range(10)]
        out = cem_update(state, scored, cfg)
        assert np.all(out.variance >= 0.07)

    def test_elite_invariance_to_worse_candidates(self, rng):
        # same elite count; an extra candidate worse than every elite
        state = CemState(mean=np.zeros(3), variance=np.ones(3))
        scored = [(rng.standard_normal(3), c) for c in (1.0, 2.0, 3.0, 4.0)]
        cfg_small = make_config(dim=3, N=4, rho=0.5, noise=0.01)
        out_small = cem_update(state, scored, cfg_small)
        cfg_big = make_config(dim=3, N=5, rho=0.4, noise=0.01)
        out_big = cem_update(state, scored + [(rng.standard_normal(3), 99.0)],
                             cfg_big)
        np.testing.assert_allclose(out_small.mean, out_big.mean)
        np.testing.assert_allclose(out_small.variance, out_big.variance)

    def test_cost_translation_invariance(self, rng):
        state = CemState(mean=np.zeros(3), variance=np.ones(3))
        cfg = make_config(dim=3, N=6, rho=0.5, noise=0.02)
        w = [rng.standard_normal(3) for _ in range(6)]
        costs = [4.0, 1.0, 3.0, 6.0, 2.0, 5.0]
        a = cem_update(state, list(zip(w, costs)), cfg)
        b = cem_update(state, list(zip(w, [c + 100.0 for c in costs])), cfg)
        np.testing.assert_allclose(a.mean, b.mean)
        np.testing.assert_allclose(a.variance, b.variance)

    def test_history_best_non_increasing(self, rng):
        cfg = make_config(dim=4, N=8, rho=0.25, noise=0.05)
        state = CemState.initial(cfg)
        gen = np.random.default_rng(0)
        for _ in range(20):
            pop = sample_population(state, 8, gen)
            scored = [(w, float(w @ w)) for w in pop]
            state = cem_update(state, scored, cfg)
        bests = [h[1] for h in state.history]
        assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))


class TestMinimize:
    def test_degenerate_single_candidate(self):
        cfg = make_config(dim=3, N=1, rho=1.0, noise=0.0)
        best, state = minimize(lambda w, e, i: float(w @ w), cfg, 1,
                               np.random.default_rng(5))
        np.testing.assert_allclose(state.mean, best)

    def test_deterministic_history(self):
        cfg = make_config(dim=6, N=10, rho=0.3, noise=0.02)

        def run():
            return minimize(lambda w, e, i: float(w @ w), cfg, 15,
                            np.random.default_rng(21))

        _, s1 = run()
        _, s2 = run()
        assert s1.history == s2.history

    def test_workers_do_not_change_result(self):
        cfg = make_config(dim=6, N=12, rho=0.25, noise=0.02)

        def objective(w, epoch, idx):
            rng = np.random.default_rng(1000 * epoch + idx)
            return float(w @ w) + rng.uniform(0, 1e-3)

        _, s1 = minimize(objective, cfg, 10, np.random.default_rng(4), workers=1)
        _, s2 = minimize(objective, cfg, 10, np.random.default_rng(4), workers=8)
        assert s1.history == s2.history
        np.testing.assert_allclose(s1.mean, s2.mean)

    def test_sphere_convergence_small_dimension(self):
        # the update rule contracts quickly when the elite statistics are
        # informative relative to the dimension
        cfg = make_config(dim=32, N=25, rho=0.2, noise=0.01)
        ratios = []
        for seed in (0, 1, 2):
            history = []
            minimize(lambda w, e, i: float(w @ w), cfg, 100,
                     np.random.default_rng(seed),
                     on_epoch=lambda ep, c, s, b: history.append(s.history[-1][2]))
            ratios.append(history[-1] / history[0])
        assert max(ratios) < 0.05

    def test_best_ever_tracked(self):
        cfg = make_config(dim=4, N=6, rho=0.5, noise=0.05)
        seen = []

        def objective(w, epoch, idx):
            cost = float(w @ w)
            seen.append(cost)
            return cost

        best, state = minimize(objective, cfg, 12, np.random.default_rng(2))
        assert float(best @ best) == pytest.approx(min(seen))
        assert state.history[-1][1] == pytest.approx(min(seen))

    def test_rejects_zero_epochs(self):
        with pytest.raises(ValueError):
            minimize(lambda w, e, i: 0.0, make_config(), 0,
                     np.random.default_rng(0))
