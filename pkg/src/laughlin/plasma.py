"""Metropolis sampling of the continuum measure |Psi_N|^2.

The squared wave function is read as a Boltzmann weight for N charges
on the cylinder.  The log-weight uses the factored pair form
2p [gamma max(x_j, x_k) + ln|1 - e^{gamma(x_min - x_max) + i gamma dy}|],
which never exponentiates a positive number, so it stays finite at any
separation; coincident points give -inf and are simply never accepted.

Sampling uses single-particle proposals, Gaussian in x and
uniform-wrapped in y, with widths tuned by short pilot runs.  Particle
labels are never sorted while sampling; order statistics appear only
in the excess measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .lattice import ConfigError, ModelParams


@dataclass(frozen=True)
class McConfig:
    """Sampler schedule: all counts positive; the seed fixes every chain."""

    sweeps: int
    burn_in: int = 500
    thinning: int = 5
    sigma_x: float = 0.5
    sigma_y: float = 0.5
    seed: int = 0
    chains: int = 2
    tune: bool = True

    def __post_init__(self):
        if min(self.sweeps, self.burn_in, self.thinning, self.chains) <= 0:
            raise ConfigError("sweeps, burn_in, thinning, chains must be positive")
        if self.sigma_x < 0 or self.sigma_y < 0:
            raise ConfigError("proposal widths must be nonnegative")


@dataclass
class PlasmaState:
    """N particle coordinates (x, y with y in [0, 2 pi R)) plus cached log-weight."""

    coordinates: np.ndarray
    log_weight: float


def _pair_terms(xi: float, yi: float, xs: np.ndarray, ys: np.ndarray,
                params: ModelParams) -> float:
    g = params.gamma
    dx = np.abs(xi - xs)
    top = 0.5 * (xi + xs + dx)
    ea = np.exp(-g * dx)
    mod = np.expm1(-g * dx) ** 2 + 4.0 * ea * np.sin(0.5 * g * (yi - ys)) ** 2
    with np.errstate(divide="ignore"):
        logs = np.log(mod)
    return 2.0 * params.p * float(np.sum(g * top + 0.5 * logs))


def _particle_energy(coords: np.ndarray, i: int, params: ModelParams) -> float:
    """Log-weight terms involving particle i: its Gaussian plus its pairs."""
    mask = np.arange(coords.shape[0]) != i
    xi, yi = coords[i]
    return -xi * xi + _pair_terms(xi, yi, coords[mask, 0], coords[mask, 1],
                                  params)


def log_weight(state, params: ModelParams) -> float:
    """log |Psi|^2 up to a state-independent constant; -inf at coincidences."""
    coords = np.asarray(getattr(state, "coordinates", state), dtype=float)
    if coords.shape != (params.N, 2):
        raise ConfigError(f"expected coordinate shape {(params.N, 2)}")
    total = -float(np.sum(coords[:, 0] ** 2))
    for i in range(1, params.N):
        total += _pair_terms(coords[i, 0], coords[i, 1],
                             coords[:i, 0], coords[:i, 1], params)
    return total


def initial_state(params: ModelParams, rng: np.random.Generator) -> PlasmaState:
    """Particles near the root-configuration positions, random y."""
    circ = 2.0 * math.pi / params.gamma
    coords = np.empty((params.N, 2))
    coords[:, 0] = params.p * params.gamma * np.arange(params.N) \
        + 0.05 * rng.standard_normal(params.N)
    coords[:, 1] = rng.uniform(0.0, circ, params.N)
    return PlasmaState(coords, log_weight(coords, params))


def _run_chain(params: ModelParams, mc: McConfig, rng: np.random.Generator,
               sigma: tuple[float, float], n_keep: int):
    circ = 2.0 * math.pi / params.gamma
    state = initial_state(params, rng)
    coords = state.coordinates
    sx, sy = sigma
    accepted = 0
    proposed = 0
    kept = np.empty((n_keep, params.N, 2))
    stored = 0
    total_sweeps = mc.burn_in + n_keep * mc.thinning
    for sweep in range(total_sweeps):
        for i in range(params.N):
            old = coords[i].copy()
            e_old = _particle_energy(coords, i, params)
            coords[i, 0] = old[0] + sx * rng.standard_normal()
            coords[i, 1] = (old[1] + sy * rng.uniform(-1.0, 1.0)) % circ
            e_new = _particle_energy(coords, i, params)
            proposed += 1
            if math.log(1.0 - rng.uniform()) < e_new - e_old:
                accepted += 1
            else:
                coords[i] = old
        if sweep >= mc.burn_in and (sweep - mc.burn_in) % mc.thinning == 0:
            kept[stored] = coords
            stored += 1
    return kept[:stored], accepted / proposed


def _tune_widths(params: ModelParams, mc: McConfig,
                 rng: np.random.Generator) -> tuple[float, float]:
    sx, sy = mc.sigma_x, mc.sigma_y
    pilot = replace(mc, burn_in=50, thinning=1, tune=False)
    for _ in range(8):
        _, acc = _run_chain(params, pilot, rng, (sx, sy), 150)
        if acc < 0.30:
            sx *= 0.7
            sy *= 0.7
        elif acc > 0.60:
            sx *= 1.4
            sy *= 1.4
        else:
            break
    return sx, sy


@dataclass
class McRun:
    params: ModelParams
    config: McConfig
    sigma: tuple[float, float]
    samples: np.ndarray
    acceptance: float
    chain_acceptance: tuple[float, ...]
    rhat: float

    @property
    def pathological(self) -> bool:
        return not 0.01 <= self.acceptance <= 0.99

    def pooled(self) -> np.ndarray:
        c, n, N, _ = self.samples.shape
        return self.samples.reshape(c * n, N, 2)


def _split_rhat(series: np.ndarray) -> float:
    """Potential scale reduction over split chains of a scalar series."""
    half = series.shape[1] // 2
    if half < 2:
        return math.nan
    chunks = np.concatenate([series[:, :half], series[:, half:2 * half]])
    means = chunks.mean(axis=1)
    variances = chunks.var(axis=1, ddof=1)
    W = variances.mean()
    B = half * means.var(ddof=1)
    if W == 0.0:
        return math.nan
    return math.sqrt((half - 1) / half + B / (W * half))


def metropolis_run(params: ModelParams, mc: McConfig) -> McRun:
    """Sample |Psi|^2 with mc.chains independent chains.

    Chains get independent generators spawned from the master seed, so
    the result is reproducible given (seed, chains).  The number of
    kept samples per chain is sweeps // thinning.
    """
    n_keep = mc.sweeps // mc.thinning
    if n_keep < 1:
        raise ConfigError("sweeps shorter than one thinning interval")
    seeds = np.random.SeedSequence(mc.seed).spawn(mc.chains + 1)
    sigma = (mc.sigma_x, mc.sigma_y)
    if mc.tune:
        sigma = _tune_widths(params, mc, np.random.default_rng(seeds[-1]))
    samples = np.empty((mc.chains, n_keep, params.N, 2))
    accs = []
    for c in range(mc.chains):
        rng = np.random.default_rng(seeds[c])
        kept, acc = _run_chain(params, mc, rng, sigma, n_keep)
        samples[c] = kept
        accs.append(acc)
    rhat = _split_rhat(samples[:, :, :, 0].sum(axis=2))
    return McRun(params=params, config=mc, sigma=sigma, samples=samples,
                 acceptance=float(np.mean(accs)),
                 chain_acceptance=tuple(accs), rhat=rhat)


def batch_stderr(series: np.ndarray, nbatches: int = 50) -> float:
    """Standard error of the mean by batch means (>= 50 batches)."""
    series = np.asarray(series, dtype=float).ravel()
    if series.size < 2 * nbatches:
        nbatches = max(2, series.size // 2)
    size = series.size // nbatches
    means = series[: nbatches * size].reshape(nbatches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(nbatches))


# -- observables -----------------------------------------------------------------

@dataclass
class ExcessStats:
    """Particle-excess statistics at cut positions (k - 1/2) p gamma.

    ``histogram[xbar]`` maps the integer excess K to its frequency;
    ``p_zero`` and ``p_zero_stderr`` are per-xbar; ``tail[xbar]`` lists
    P(|K| >= n) for n = 1, 2, ...
    """

    xbars: tuple[float, ...]
    histogram: dict[float, dict[int, float]]
    p_zero: dict[float, float]
    p_zero_stderr: dict[float, float]
    tail: dict[float, tuple[float, ...]]


def measure_excess(samples: np.ndarray, xbars, params: ModelParams
                   ) -> ExcessStats:
    """Excess K = #{x_j <= xbar} - k at each cut xbar = (k - 1/2) p gamma."""
    samples = np.asarray(samples)
    if samples.ndim == 4:
        samples = samples.reshape(-1, *samples.shape[2:])
    xs = samples[:, :, 0]
    step = params.p * params.gamma
    hist: dict[float, dict[int, float]] = {}
    p_zero: dict[float, float] = {}
    p_err: dict[float, float] = {}
    tails: dict[float, tuple[float, ...]] = {}
    xbars = tuple(float(x) for x in xbars)
    for xbar in xbars:
        k = xbar / step + 0.5
        if abs(k - round(k)) > 1e-9 or round(k) < 1:
            raise ConfigError(f"cut {xbar} is not of the form (k - 1/2) p gamma")
        k = int(round(k))
        K = np.sum(xs <= xbar, axis=1) - k
        values, counts = np.unique(K, return_counts=True)
        freq = counts / K.size
        hist[xbar] = {int(v): float(f) for v, f in zip(values, freq)}
        p_zero[xbar] = hist[xbar].get(0, 0.0)
        p_err[xbar] = batch_stderr(K == 0)
        nmax = int(np.max(np.abs(values))) if values.size else 0
        tails[xbar] = tuple(float(np.mean(np.abs(K) >= n))
                            for n in range(1, nmax + 1))
    return ExcessStats(xbars=xbars, histogram=hist, p_zero=p_zero,
                       p_zero_stderr=p_err, tail=tails)


@dataclass
class DensityEstimate:
    edges: np.ndarray
    centers: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    y_ks: float
    nsamples: int


def density_histogram(samples: np.ndarray, bins: np.ndarray,
                      params: ModelParams) -> DensityEstimate:
    """x-histogram normalized to N particles, with a y-uniformity statistic.

    The y marginal is exactly uniform by rotation invariance; y_ks is
    the Kolmogorov-Smirnov distance of the pooled wrapped y values
    from the uniform law, a cheap detector for sampler bugs.
    """
    samples = np.asarray(samples)
    if samples.ndim == 4:
        samples = samples.reshape(-1, *samples.shape[2:])
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ConfigError("bins must be increasing edges")
    nsamp = samples.shape[0]
    widths = np.diff(edges)
    per_sample = np.stack([np.histogram(s[:, 0], bins=edges)[0]
                           for s in samples])
    density = per_sample.mean(axis=0) / widths
    stderr = np.array([batch_stderr(per_sample[:, b]) for b in
                       range(widths.size)]) / widths
    ys = np.sort(samples[:, :, 1].ravel()) * params.gamma / (2.0 * math.pi)
    if ys.size:
        up = np.arange(1, ys.size + 1) / ys.size
        y_ks = float(max(np.max(up - ys), np.max(ys - up + 1.0 / ys.size)))
    else:
        y_ks = math.nan
    return DensityEstimate(edges=edges, centers=0.5 * (edges[:-1] + edges[1:]),
                           density=density, stderr=stderr, y_ks=y_ks,
                           nsamples=nsamp)


# -- exact references for cross-validation ------------------------------------------

def orbital_interval_weights(occ: np.ndarray, gamma: float, a: float, b: float
                             ) -> float:
    """Expected particle count with x in [a, b] from exact occupations.

    After integrating out y, cross terms between occupation
    configurations vanish, so each orbital contributes its occupation
    times the Gaussian mass of [a, b] around its center.
    """
    from scipy.special import erf
    k = np.arange(occ.size)
    w = 0.5 * (erf(b - k * gamma) - erf(a - k * gamma))
    return float(occ @ w)


@dataclass
class PhaseProfile:
    """Bulk density folded by x mod (p gamma), against the renewal prediction."""

    edges: np.ndarray
    observed: np.ndarray
    stderr: np.ndarray
    predicted: np.ndarray
    window: tuple[float, float]
    nsamples: int

    @property
    def zscores(self) -> np.ndarray:
        return (self.observed - self.predicted) / self.stderr

    @property
    def contrast(self) -> float:
        """Peak-to-trough spread of the observed profile, in units of its mean."""
        return float((self.observed.max() - self.observed.min())
                     / self.observed.mean())


def phase_profile(samples: np.ndarray, params: ModelParams,
                  bulk_occ: np.ndarray, nbins: int = 6,
                  window: tuple[float, float] = (0.3, 0.7)) -> PhaseProfile:
    """Fold bulk x samples by the lattice period and compare to occupations.

    The window is given as fractions of the droplet length and snapped
    inward to whole periods so every phase bin covers the same number
    of orbitals.  bulk_occ is the length-p vector of stationary
    occupations; the prediction is the wrapped-Gaussian mix it induces.
    """
    from scipy.special import erf
    samples = np.asarray(samples)
    if samples.ndim == 4:
        samples = samples.reshape(-1, *samples.shape[2:])
    bulk_occ = np.asarray(bulk_occ, dtype=float)
    if bulk_occ.size != params.p:
        raise ConfigError(f"need {params.p} bulk occupations, got {bulk_occ.size}")
    period = params.p * params.gamma
    length = (params.N - 1) * period
    lo = math.ceil(window[0] * length / period) * period
    hi = math.floor(window[1] * length / period) * period
    if hi - lo < period:
        raise ConfigError("window too narrow to hold one full period")
    edges = np.linspace(0.0, period, nbins + 1)
    xs = samples[:, :, 0]
    inside = (xs >= lo) & (xs < hi)
    phase = np.where(inside, np.mod(xs, period), -1.0)
    per_sample = np.stack([np.histogram(row[row >= 0], bins=edges)[0]
                           for row in phase]).astype(float)
    totals = per_sample.sum(axis=1)
    if totals.sum() == 0:
        raise ConfigError("no samples fell inside the bulk window")
    observed = per_sample.sum(axis=0) / totals.sum()
    # batch the fractions, not the raw counts: the window total fluctuates
    nb = min(50, per_sample.shape[0])
    cut = (per_sample.shape[0] // nb) * nb
    batches = per_sample[:cut].reshape(nb, -1, nbins).sum(axis=1)
    fr = batches / batches.sum(axis=1, keepdims=True)
    stderr = fr.std(axis=0, ddof=1) / math.sqrt(nb)
    # wrapped Gaussian mass of each phase bin, weighted by occupation
    predicted = np.zeros(nbins)
    reach = int(math.ceil(6.0 / period)) + 1
    for r in range(params.p):
        for j in range(-reach, reach + 1):
            c = r * params.gamma + j * period
            predicted += bulk_occ[r] * 0.5 * (erf(edges[1:] - c)
                                              - erf(edges[:-1] - c))
    predicted /= predicted.sum()
    return PhaseProfile(edges=edges, observed=observed, stderr=stderr,
                        predicted=predicted, window=(lo, hi),
                        nsamples=samples.shape[0])


def exact_excess_zero(amp, xbar: float) -> float:
    """P(K = 0) at the cut from the exact amplitude table.

    Conditioned on an occupation configuration, the y-marginal makes
    the particle x's independent Gaussians at the occupied centers, so
    the count left of the cut is a sum of independent Bernoullis.
    """
    from scipy.special import erf
    step = amp.p * amp.gamma
    k = xbar / step + 0.5
    if abs(k - round(k)) > 1e-9 or round(k) < 1:
        raise ConfigError(f"cut {xbar} is not of the form (k - 1/2) p gamma")
    k = int(round(k))
    total = 0.0
    norm = 0.0
    for m, A in amp.items_occ():
        w2 = A * A
        norm += w2
        probs = [0.5 * (1.0 + erf(xbar - mi * amp.gamma)) for mi in m]
        dist = np.zeros(len(m) + 1)
        dist[0] = 1.0
        for q in probs:
            dist[1:] = dist[1:] * (1 - q) + dist[:-1] * q
            dist[0] *= 1 - q
        if k <= len(m):
            total += w2 * dist[k]
    return total / norm