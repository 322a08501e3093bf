"""Fast invariant checks behind ``scorecompose selftest``.

Checks look functions up through their modules at call time, so a patched
implementation is what gets checked.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import gmm as gmm_core
from . import guidance, schedules
from .scenario import build_appendix_scenario

CHECKS: list[tuple[str, Callable[[], None]]] = []


def check(name: str):
    def register(fn):
        CHECKS.append((name, fn))
        return fn
    return register


def _prior():
    return build_appendix_scenario().tts_prior


_MIXTURES = [
    lambda: _prior(),
    lambda: gmm_core.Gmm1D.from_arrays([-1.0, 0.5, 3.0], [0.3, 1.2, 0.7], [0.2, 0.5, 0.3]),
    lambda: gmm_core.Gmm1D.single(-2.0, 0.225),
]
_SIGMAS = [0.0, 0.005, 0.3, 1.0, 5.0, 80.0]
_GRID = np.linspace(-12.0, 12.0, 241)


@check("mixture_score_identity")
def _mixture_score_identity():
    for make in _MIXTURES:
        g = make()
        for s in _SIGMAS:
            r = gmm_core.component_posterior(g, _GRID, s)
            cond = np.stack([gmm_core.conditional_score(g, _GRID, s, k) for k in range(len(g))], axis=-1)
            lhs = gmm_core.score(g, _GRID, s)
            assert np.max(np.abs(lhs - np.sum(r * cond, axis=-1))) <= 1e-10


@check("bayes_identity")
def _bayes_identity():
    for make in _MIXTURES:
        g = make()
        for s in _SIGMAS:
            for k in range(len(g)):
                lhs = gmm_core.posterior_guidance_score(g, _GRID, s, k)
                rhs = gmm_core.conditional_score(g, _GRID, s, k) - gmm_core.score(g, _GRID, s)
                assert np.max(np.abs(lhs - rhs)) <= 1e-12


@check("score_finite_difference")
def _score_finite_difference():
    g, h = _prior(), 1e-5
    for x in (-6.0, -3.0, -1.0, 0.5, 2.5, 5.0):
        fd = (gmm_core.log_density(g, x + h) - gmm_core.log_density(g, x - h)) / (2 * h)
        exact = gmm_core.score(g, x)
        assert abs(fd - exact) <= 1e-6 * max(abs(exact), 1.0)


@check("posterior_normalization")
def _posterior_normalization():
    g = _prior()
    x = np.linspace(-50.0, 50.0, 201)
    for s in (0.0, 1e-6, 80.0):
        assert np.max(np.abs(gmm_core.component_posterior(g, x, s).sum(axis=-1) - 1.0)) <= 1e-12


@check("velocity_roundtrip")
def _velocity_roundtrip():
    rng = np.random.default_rng(0)
    for t in rng.uniform(0, 1, 50):
        level = schedules.vp_shifted_cosine(t)
        x, eps = rng.normal(size=20), rng.normal(size=20)
        z = level.alpha * x + level.sigma * eps
        v = schedules.velocity_from(x, eps, level)
        assert np.max(np.abs(schedules.x_from_velocity(z, v, level) - x)) <= 1e-12
        assert np.max(np.abs(schedules.eps_from_velocity(z, v, level) - eps)) <= 1e-12


@check("schedule_boundaries")
def _schedule_boundaries():
    sig = schedules.ve_log_linear(schedules.ScheduleSpec(steps=200, sigma_init=80.0, sigma_final=0.005))
    assert sig[0] == 80.0 and sig[-1] == 0.005 and np.all(np.diff(sig) < 0)
    assert abs(schedules.vp_shifted_cosine(0.0).alpha - 1.0) <= 1e-3
    assert abs(schedules.vp_shifted_cosine(1.0).alpha) <= 1e-3
    levels = schedules.logsnr_linear_schedule(
        schedules.ScheduleSpec(kind="logsnr-linear", steps=256, logsnr_min=-8.0, logsnr_max=10.0))
    lams = np.array([schedules.logsnr(lv) for lv in levels])
    assert len(levels) == 257 and np.all(np.diff(lams) > 0)


@check("tc_cfg_equivalence")
def _tc_cfg_equivalence():
    g, rho = _prior(), 1e4
    for s in (0.005, 0.1, 1.0, 10.0, 80.0):
        base = -(_GRID + 1.6) / (0.405 ** 2 + s * s)
        a = guidance.tc_cfg(base, gmm_core.conditional_score(g, _GRID, s, 0), gmm_core.score(g, _GRID, s), rho)
        b = guidance.analytic_posterior_guided(base, gmm_core.posterior_guidance_score(g, _GRID, s, 0), rho)
        assert np.max(np.abs(a - b)) <= 1e-10


def run_checks(echo: Callable[[str], None] = print) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:  # any failure, including errors, fails the check
            ok = False
            detail = f": {exc}" if str(exc) else ""
            echo(f"FAIL {name}{detail}")
        else:
            echo(f"ok   {name}")
    return ok

