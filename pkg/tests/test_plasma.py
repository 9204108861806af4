"""Tests for the Metropolis sampler and its exact cross-checks.

The log-weight identities are exact and tested tightly.  Stochastic
checks run with pinned seeds and compare against closed-form references
(the y-integrated occupation picture makes interval counts and the
excess distribution exactly computable), so failures indicate a sampler
bug rather than bad luck.
"""

import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from laughlin.expansion import amplitudes
from laughlin.correlations import (
    occupation_finite,
    occupation_infinite,
    rod_expectations,
)
from laughlin.lattice import ConfigError, ModelParams
from laughlin.renewal import build_model
from laughlin import plasma


@pytest.fixture(scope="module")
def run_p3_n2(tables_p3):
    params = ModelParams(3, 2, 1.0)
    mc = plasma.McConfig(sweeps=30000, burn_in=1000, thinning=3,
                         seed=7, chains=2)
    return plasma.metropolis_run(params, mc)


@pytest.fixture(scope="module")
def run_p3_n4(tables_p3):
    params = ModelParams(3, 4, 1.0)
    mc = plasma.McConfig(sweeps=40000, burn_in=1000, thinning=4,
                         seed=13, chains=2)
    return plasma.metropolis_run(params, mc)


# -- log weight ---------------------------------------------------------------------


def test_single_particle_weight_is_gaussian():
    params = ModelParams(3, 1, 1.0)
    for x in (-1.7, 0.0, 0.4, 2.2):
        state = np.array([[x, 0.9]])
        assert plasma.log_weight(state, params) == pytest.approx(-x * x, abs=1e-14)


def test_label_exchange_invariance():
    params = ModelParams(3, 4, 0.8)
    rng = np.random.default_rng(5)
    for _ in range(20):
        state = np.column_stack([rng.normal(scale=3.0, size=4),
                                 rng.uniform(0, 2 * math.pi / 0.8, size=4)])
        base = plasma.log_weight(state, params)
        perm = rng.permutation(4)
        assert plasma.log_weight(state[perm], params) == pytest.approx(
            base, rel=1e-12)


def test_sorted_form_identity():
    # log w + sum_k (x_(k) - (k-1) p gamma)^2 - pair terms is the constant
    # p^2 gamma^2 sum_{k<N} k^2, independent of the configuration.
    params = ModelParams(3, 5, 0.7)
    g, p, N = params.gamma, params.p, params.N
    const = p * p * g * g * sum(k * k for k in range(N))
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        state = np.column_stack([rng.normal(scale=2.5, size=N),
                                 rng.uniform(0, 2 * math.pi / g, size=N)])
        order = np.argsort(state[:, 0])
        xs, ys = state[order, 0], state[order, 1]
        pairs = 0.0
        for j in range(N):
            for k in range(j + 1, N):
                d = g * (xs[j] - xs[k])
                pairs += p * math.log(math.expm1(d) ** 2
                                      + 4 * math.exp(d)
                                      * math.sin(0.5 * g * (ys[k] - ys[j])) ** 2)
        shifted = -sum((xs[k] - k * p * g) ** 2 for k in range(N))
        direct = plasma.log_weight(state, params)
        worst = max(worst, abs(direct - (shifted + pairs + const)))
    assert worst < 1e-10


def test_coincident_points_have_zero_weight():
    params = ModelParams(3, 2, 1.0)
    state = np.array([[0.3, 1.1], [0.3, 1.1]])
    assert plasma.log_weight(state, params) == -math.inf


def test_log_weight_shape_validation():
    params = ModelParams(3, 2, 1.0)
    with pytest.raises(ConfigError):
        plasma.log_weight(np.zeros((3, 2)), params)
    with pytest.raises(ConfigError):
        plasma.log_weight(np.zeros((2, 3)), params)


# -- configuration ------------------------------------------------------------------


def test_mcconfig_validation():
    with pytest.raises(ConfigError):
        plasma.McConfig(sweeps=0)
    with pytest.raises(ConfigError):
        plasma.McConfig(sweeps=100, thinning=0)
    with pytest.raises(ConfigError):
        plasma.McConfig(sweeps=100, sigma_x=-0.1)
    with pytest.raises(ConfigError):
        plasma.McConfig(sweeps=100, chains=0)


def test_sweeps_below_thinning_rejected():
    params = ModelParams(3, 2, 1.0)
    with pytest.raises(ConfigError):
        plasma.metropolis_run(params, plasma.McConfig(sweeps=3, thinning=5))


def test_frozen_proposal_chain_is_constant():
    params = ModelParams(3, 3, 1.0)
    mc = plasma.McConfig(sweeps=200, burn_in=10, thinning=2, sigma_x=0.0,
                         sigma_y=0.0, seed=4, tune=False, chains=1)
    run = plasma.metropolis_run(params, mc)
    first = run.samples[0, 0]
    assert np.all(run.samples == first[None, None, :, :])
    assert run.acceptance == 1.0
    assert run.pathological


# -- sampler statistics -------------------------------------------------------------


def test_single_particle_variance():
    # N=1 reduces to x ~ Normal(0, 1/2) with uniform y.
    run = plasma.metropolis_run(
        ModelParams(3, 1, 1.0),
        plasma.McConfig(sweeps=20000, burn_in=500, thinning=5, seed=3,
                        chains=2))
    x = run.pooled()[:, :, 0].ravel()
    assert abs(x.mean()) < 0.03
    assert abs(x.var() - 0.5) < 0.03
    assert not run.pathological


def test_tuned_acceptance_in_band(run_p3_n4):
    assert 0.2 < run_p3_n4.acceptance < 0.8
    assert not run_p3_n4.pathological
    assert len(run_p3_n4.chain_acceptance) == 2


def test_split_rhat_near_one(run_p3_n4):
    assert abs(run_p3_n4.rhat - 1.0) < 0.05


def test_y_marginal_uniform(run_p3_n4):
    pooled = run_p3_n4.pooled()
    est = plasma.density_histogram(pooled, np.linspace(-4, 13, 35),
                                   ModelParams(3, 4, 1.0))
    critical = 1.63 / math.sqrt(pooled.shape[0] * pooled.shape[1])
    assert est.y_ks < critical


def test_density_histogram_normalization(run_p3_n4):
    params = ModelParams(3, 4, 1.0)
    est = plasma.density_histogram(run_p3_n4.pooled(),
                                   np.linspace(-30, 40, 71), params)
    mass = float(np.sum(est.density * np.diff(est.edges)))
    assert mass == pytest.approx(params.N, abs=1e-12)
    with pytest.raises(ConfigError):
        plasma.density_histogram(run_p3_n4.pooled(), np.array([1.0]), params)


def test_batch_stderr_scaling():
    rng = np.random.default_rng(0)
    series = rng.normal(size=5000)
    se = plasma.batch_stderr(series)
    assert 0.5 / math.sqrt(5000) < se < 2.0 / math.sqrt(5000)


# -- excess statistics --------------------------------------------------------------


def test_excess_zero_on_lattice_configuration():
    # Particles frozen on the root lattice split every cut exactly.
    params = ModelParams(3, 4, 1.0)
    xs = np.array([0.0, 3.0, 6.0, 9.0])
    samples = np.zeros((10, 4, 2))
    samples[:, :, 0] = xs
    cuts = [1.5, 4.5, 7.5]
    stats = plasma.measure_excess(samples, cuts, params)
    for c in cuts:
        assert stats.p_zero[c] == 1.0
        assert stats.histogram[c] == {0: 1.0}
        assert stats.tail[c] == ()


def test_excess_when_all_particles_left():
    params = ModelParams(3, 4, 1.0)
    samples = np.zeros((5, 4, 2))
    samples[:, :, 0] = -50.0
    stats = plasma.measure_excess(samples, [4.5], params)
    # all four particles sit left of the k=2 cut, so K = 4 - 2
    assert stats.histogram[4.5] == {2: 1.0}
    assert stats.p_zero[4.5] == 0.0
    assert stats.tail[4.5] == (1.0, 1.0)


def test_excess_invalid_cut_rejected():
    params = ModelParams(3, 4, 1.0)
    samples = np.zeros((5, 4, 2))
    with pytest.raises(ConfigError):
        plasma.measure_excess(samples, [0.37], params)
    with pytest.raises(ConfigError):
        plasma.measure_excess(samples, [-1.5], params)


def test_exact_excess_zero_frozen_value(tables_p3):
    amp = amplitudes(tables_p3[1], 1.0)
    assert plasma.exact_excess_zero(amp, 1.5) == pytest.approx(
        0.9198075274580999, rel=1e-12)
    with pytest.raises(ConfigError):
        plasma.exact_excess_zero(amp, 2.0)


def test_excess_zero_quadrature_oracle(tables_p3):
    # Integrate |psi|^2 for two particles directly.  The y integral of
    # the pair factor leaves sum_k C(3,k)^2 exp(2 k gamma (min - max)),
    # so the check reduces to a two-dimensional quadrature.
    g = 1.0
    amp = amplitudes(tables_p3[1], g)
    coef = [math.comb(3, k) ** 2 for k in range(4)]

    def f(x1, x2):
        top, bot = max(x1, x2), min(x1, x2)
        a = g * (bot - top)
        ang = sum(c * math.exp(2 * k * a) for k, c in enumerate(coef))
        return math.exp(6 * g * top - x1 * x1 - x2 * x2) * ang

    lim = 9.0
    norm, _ = dblquad(f, -lim, lim, -lim, lim, epsabs=1e-11, epsrel=1e-11)
    split, _ = dblquad(lambda x2, x1: f(x1, x2), -lim, 1.5,
                       lambda x1: 1.5, lim, epsabs=1e-11, epsrel=1e-11)
    quad_p0 = 2.0 * split / norm
    assert quad_p0 == pytest.approx(plasma.exact_excess_zero(amp, 1.5),
                                    abs=5e-9)


def test_excess_sampler_matches_exact(run_p3_n2, tables_p3):
    amp = amplitudes(tables_p3[1], 1.0)
    exact = plasma.exact_excess_zero(amp, 1.5)
    stats = plasma.measure_excess(run_p3_n2.pooled(), [1.5],
                                  ModelParams(3, 2, 1.0))
    z = abs(stats.p_zero[1.5] - exact) / stats.p_zero_stderr[1.5]
    assert z < 3.0
    # the tail probabilities are a decreasing sequence by construction
    tail = stats.tail[1.5]
    assert all(a >= b for a, b in zip(tail, tail[1:]))


# -- interval counts against exact occupations --------------------------------------


def test_interval_weights_cover_all_particles(tables_p3):
    occ = occupation_finite(amplitudes(tables_p3[3], 1.0))
    total = plasma.orbital_interval_weights(occ, 1.0, -60.0, 60.0)
    assert total == pytest.approx(4.0, abs=1e-9)


def test_annulus_occupations_match_exact(run_p3_n4, tables_p3):
    occ = occupation_finite(amplitudes(tables_p3[3], 1.0))
    pooled = run_p3_n4.pooled()
    for k in range(occ.size):
        a, b = (k - 0.5), (k + 0.5)
        expect = plasma.orbital_interval_weights(occ, 1.0, a, b)
        counts = np.sum((pooled[:, :, 0] > a) & (pooled[:, :, 0] <= b),
                        axis=1)
        z = abs(counts.mean() - expect) / plasma.batch_stderr(counts)
        assert z < 3.0, f"annulus {k}: z = {z:.2f}"


# -- bulk phase profile -------------------------------------------------------------


def test_phase_profile_against_renewal(tables_p3, model_p3_g1):
    params = ModelParams(3, 12, 1.0)
    occ = occupation_infinite(model_p3_g1,
                              rod_expectations(tables_p3, 1.0))
    run = plasma.metropolis_run(
        params, plasma.McConfig(sweeps=6000, burn_in=600, thinning=4,
                                seed=21, chains=2))
    prof = plasma.phase_profile(run.pooled(), params, occ)
    assert prof.predicted == pytest.approx(prof.predicted.sum() * np.ones(6) / 6,
                                           abs=0.2)  # sanity: normalized shape
    assert prof.predicted.sum() == pytest.approx(1.0, abs=1e-12)
    # profile is symmetric for this lattice: centers at phases 0, 1, 2
    assert prof.predicted[1] == pytest.approx(prof.predicted[4], rel=1e-9)
    assert np.max(np.abs(prof.zscores)) < 5.0
    assert prof.contrast > 0.5


def test_phase_profile_validation(model_p3_g1, tables_p3):
    occ = occupation_infinite(model_p3_g1,
                              rod_expectations(tables_p3, 1.0))
    samples = np.zeros((4, 2, 2))
    with pytest.raises(ConfigError):
        plasma.phase_profile(samples, ModelParams(3, 2, 1.0), occ)
    with pytest.raises(ConfigError):
        plasma.phase_profile(samples, ModelParams(3, 12, 1.0), occ[:2])
