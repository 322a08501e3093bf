import math

import numpy as np
import pytest

from scorecompose import gmm as G
from scorecompose import guidance as Gd
from scorecompose.sampler import (NonFiniteScoreError, SamplerConfig, make_total_score,
                                  ve_reverse_sample)
from scorecompose.scenario import build_appendix_scenario
from scorecompose.schedules import ScheduleSpec, ve_log_linear


def exact_score(mean, std):
    return lambda x, s: -(x - mean) / (std * std + s * s)


def config(steps=200, n=5000, seed=1, **kw):
    return SamplerConfig(schedule=ScheduleSpec(steps=steps), n_samples=n, master_seed=seed, **kw)


class TestReverseSampler:
    def test_exact_score_reproduces_target(self):
        v = ve_reverse_sample(exact_score(-2.0, 0.225), config()).values
        assert abs(v.mean() + 2.0) < 0.05
        assert abs(v.std(ddof=1) - 0.225) < 0.02

    @pytest.mark.parametrize("terminal_noise", [False, True])
    def test_zero_score_variance(self, terminal_noise):
        # no drift: Var = sigma_0^2 + sum of injected increments
        sig = ve_log_linear(ScheduleSpec())
        last = sig[-1] if terminal_noise else sig[-2]
        expected = math.sqrt(2 * sig[0] ** 2 - last ** 2)
        v = ve_reverse_sample(lambda x, s: np.zeros_like(x),
                              config(n=100_000, terminal_noise=terminal_noise)).values
        assert v.std(ddof=1) == pytest.approx(expected, rel=0.03)

    def test_deterministic(self):
        a = ve_reverse_sample(exact_score(-2.0, 0.225), config(n=700)).values
        b = ve_reverse_sample(exact_score(-2.0, 0.225), config(n=700)).values
        assert a.tobytes() == b.tobytes()

    def test_worker_count_invariance(self):
        score = make_total_score(build_appendix_scenario(), Gd.TcCfg())
        a = ve_reverse_sample(score, config(n=1300), workers=1).values
        b = ve_reverse_sample(score, config(n=1300), workers=4).values
        assert a.tobytes() == b.tobytes()

    def test_samples_are_prefix_stable(self):
        # sample i depends only on (seed, i)
        a = ve_reverse_sample(exact_score(0.0, 1.0), config(n=300)).values
        b = ve_reverse_sample(exact_score(0.0, 1.0), config(n=1000)).values
        assert a.tobytes() == b[:300].tobytes()

    def test_different_seeds_differ(self):
        a = ve_reverse_sample(exact_score(0.0, 1.0), config(n=50, seed=1)).values
        b = ve_reverse_sample(exact_score(0.0, 1.0), config(n=50, seed=2)).values
        assert not np.array_equal(a, b)

    def test_trajectory_endpoint(self):
        batch = ve_reverse_sample(exact_score(-2.0, 0.225), config(n=300, record_trajectories=True))
        assert batch.trajectories.shape == (201, 300)
        assert batch.trajectories[200].tobytes() == batch.values.tobytes()

    def test_non_finite_score_aborts(self):
        def bad(x, s):
            return np.where(s < 1.0, np.nan, 0.0) * np.ones_like(x)
        with pytest.raises(NonFiniteScoreError) as info:
            ve_reverse_sample(bad, config(n=10))
        sig = ve_log_linear(ScheduleSpec())
        assert info.value.step == int(np.argmax(sig < 1.0))
        assert "step" in str(info.value)

    def test_requires_ve_schedule(self):
        with pytest.raises(ValueError):
            ve_reverse_sample(exact_score(0, 1), SamplerConfig(schedule=ScheduleSpec(kind="logsnr-linear")))

    def test_convergence_in_steps(self):
        # seed-averaged errors shrink when the step count doubles
        errs = {}
        for steps in (200, 400):
            runs = [ve_reverse_sample(exact_score(-2.0, 0.225), config(steps=steps, seed=s)).values
                    for s in range(1, 6)]
            errs[steps] = (abs(np.mean([r.mean() for r in runs]) + 2.0),
                           abs(np.mean([r.std(ddof=1) for r in runs]) - 0.225))
        assert errs[400][0] < errs[200][0]
        assert errs[400][1] < errs[200][1]
        assert errs[200][0] < 0.05 and errs[200][1] < 0.1 * 0.225


class TestTotalScore:
    def test_no_guidance_is_enhancement_score(self):
        scen = build_appendix_scenario()
        f = make_total_score(scen, Gd.NoGuidance())
        x = np.linspace(-5, 5, 11)
        for s in (0.005, 1.0, 80.0):
            np.testing.assert_array_equal(f(x, s), -(x + 1.6) / (0.405 ** 2 + s * s))

    def test_tc_cfg_matches_analytic_posterior(self):
        scen = build_appendix_scenario()
        f = make_total_score(scen, Gd.TcCfg(1e4))
        g = make_total_score(scen, Gd.AnalyticPosterior(1e4))
        rng = np.random.default_rng(7)
        x = rng.uniform(-12, 12, 1000)
        sig = np.exp(rng.uniform(math.log(0.005), math.log(80), 1000))
        for xi, si in zip(x, sig):
            assert abs(f(np.array([xi]), si)[0] - g(np.array([xi]), si)[0]) <= 1e-10

    def test_score_average_arithmetic(self):
        scen = build_appendix_scenario()
        f = make_total_score(scen, Gd.ScoreAverage(0.5))
        # at x = -2.8, sigma = 0: s_enh = 1.2/0.164025, s_cond = -1.2/0.81
        expected = 0.5 * (1.2 / 0.405 ** 2) + 0.5 * (-1.2 / 0.81)
        assert f(np.array([-2.8]), 0.0)[0] == pytest.approx(expected, rel=1e-14)

    def test_gated_strategy_falls_back_at_high_noise(self):
        scen = build_appendix_scenario()
        gated = make_total_score(scen, Gd.TcCfg(1e4, gate=Gd.LogSnrGate(-1.0)))
        plain = make_total_score(scen, Gd.NoGuidance())
        x = np.linspace(-5, 5, 11)
        np.testing.assert_array_equal(gated(x, 80.0), plain(x, 80.0))
        assert not np.array_equal(gated(x, 0.5), plain(x, 0.5))

    def test_bad_target_component(self):
        scen = build_appendix_scenario()
        object.__setattr__(scen, "target_component", 5)
        with pytest.raises(IndexError):
            make_total_score(scen, Gd.NoGuidance())
