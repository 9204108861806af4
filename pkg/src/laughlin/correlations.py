"""Finite-N, finite-domain and infinite-volume correlation functions.

Diagonal observables factorize over rods: conditioned on the renewal
structure, the expectation of a product of occupation numbers is the
product of single-rod expectations nu_n(s).  Finite-N expectations are
exact sums over the amplitude table; infinite-volume expectations
combine the rod expectations with the stationary renewal measure,

    <n_k> = mu^{-1} sum_n p_n sum_{j=0}^{n-1} nu_n(k mod p + p j),

which is p-periodic and sums to one particle per period by construction.
Pair correlations split into a same-rod part and a two-rod part bridged
by the renewal function; the truncation of rod sizes at the model's Nmax
is converted into a reported error estimate via the long-interval bound.

Conventions: orbitals are indexed 0..p(N-1) for a finite table; the
occupation basis is ordered by increasing orbital, and fermionic signs
follow from filling orbitals in increasing order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from laughlin.expansion import AmplitudeTable, CoefficientTable, amplitudes
from laughlin.lattice import (ConfigError, config_to_occupation,
                              enumerate_partitions, partition_of,
                              renewal_points)
from laughlin.renewal import RenewalModel, long_interval_bound


# -- finite N ----------------------------------------------------------------

def occupation_finite(amp: AmplitudeTable) -> np.ndarray:
    """<n_k> for k = 0..p(N-1), normalized by C_N; sums to N."""
    occ = np.zeros(amp.num_orbitals)
    norm = 0.0
    for m, A in amp.items_occ():
        w = A * A
        norm += w
        for k in m:
            occ[k] += w
    return occ / norm


def pair_moment_finite(amp: AmplitudeTable, k: int, l: int) -> float:
    """<n_k n_{k+l}> by direct occupation counting."""
    num = 0.0
    norm = 0.0
    for m, A in amp.items_occ():
        w = A * A
        norm += w
        n = config_to_occupation(m, amp.num_orbitals)
        k2 = k + l
        if k < len(n) and k2 < len(n):
            num += w * n[k] * n[k2]
    return num / norm


def _apply_string(n: list[int], creation, annihilation, fermionic: bool
                  ) -> tuple[tuple[int, ...], float] | None:
    """Apply c*_{creation} ... c_{annihilation} to the occupation config.

    Both tuples are in left-to-right operator order, so the rightmost
    operator acts first.  Returns (resulting config, matrix factor) or
    None if the string annihilates the state.  Fermionic signs count the
    occupied orbitals below the acted site.
    """
    factor = 1.0
    for site in reversed(tuple(annihilation)):
        if n[site] == 0:
            return None
        if fermionic:
            factor *= (-1) ** sum(n[:site])
            n[site] = 0
        else:
            factor *= math.sqrt(n[site])
            n[site] -= 1
    for site in reversed(tuple(creation)):
        if fermionic:
            if n[site]:
                return None
            factor *= (-1) ** sum(n[:site])
            n[site] = 1
        else:
            factor *= math.sqrt(n[site] + 1)
            n[site] += 1
    return tuple(n), factor


def moments_finite(amp: AmplitudeTable, creation, annihilation) -> float:
    """Normalized expectation of a Wick-ordered monomial.

    ``creation`` and ``annihilation`` list the orbital indices of the
    c* and c factors in left-to-right operator order.  Index sums must
    match for a nonzero value (momentum around the cylinder).
    """
    creation = tuple(creation)
    annihilation = tuple(annihilation)
    if len(creation) != len(annihilation):
        raise ConfigError("unbalanced operator string")
    sites = amp.num_orbitals
    if any(not 0 <= s < sites for s in creation + annihilation):
        raise ConfigError("operator site out of range")
    if sum(creation) != sum(annihilation):
        return 0.0
    fermionic = amp.p % 2 == 1
    by_occ = {config_to_occupation(m, sites): A for m, A in amp.items_occ()}
    total = 0.0
    norm = 0.0
    for occ, A in by_occ.items():
        norm += A * A
        out = _apply_string(list(occ), creation, annihilation, fermionic)
        if out is None:
            continue
        target, factor = out
        A2 = by_occ.get(target)
        if A2 is not None:
            total += A2 * factor * A
    return total / norm


# -- quasi-state decomposition ------------------------------------------------

@dataclass
class QuasiStateDecomposition:
    """Rank-one-per-pair decomposition of the normalized projector.

    ``basis`` orders the admissible configurations and ``amps`` their
    occupation amplitudes; ``weights[X]`` and ``omega[X]`` give the
    probability and the operator block of each rod partition X (keyed by
    its tuple of rod lengths).  Partitions whose configuration class is
    empty carry weight zero and no block.
    """

    p: int
    N: int
    gamma: float
    basis: tuple[tuple[int, ...], ...]
    amps: np.ndarray
    weights: dict[tuple[int, ...], float]
    omega: dict[tuple[int, ...], np.ndarray]
    u_norm_sq: dict[tuple[int, ...], float]

    def reconstruction(self) -> np.ndarray:
        """sum_X p_N(X) omega_X, which must equal |Psi><Psi| / C_N."""
        dim = len(self.basis)
        out = np.zeros((dim, dim))
        for X, block in self.omega.items():
            out += self.weights[X] * block
        return out

    def projector(self) -> np.ndarray:
        return np.outer(self.amps, self.amps) / (self.amps @ self.amps)

    def diagonal_value(self, X: tuple[int, ...], site: int) -> float:
        """omega_X(n_site) evaluated as a state on the diagonal algebra."""
        block = self.omega[X]
        # Diagonal observable: only the diagonal of the block survives.
        return float(sum(block[i, i] * sum(1 for v in m if v == site)
                         for i, m in enumerate(self.basis) if site in m))


def quasi_state(amp: AmplitudeTable, max_partitions: int = 256
                ) -> QuasiStateDecomposition:
    """Decompose |Psi><Psi|/C_N over rod partitions.

    Every ordered pair (Y, Z) of partitions contributes |u_Y><u_Z| to
    the block of the partition X with R(X) = R(Y) n R(Z); scaling by
    ||u_X||^{-2} makes each block a state on diagonal observables, and
    the weights p_N(X) = ||u_X||^2 / C_N rebuild the projector exactly.
    """
    p, N = amp.p, amp.N
    parts = enumerate_partitions(N)
    if len(parts) > max_partitions:
        raise ConfigError(f"{len(parts)} partitions exceed the sector limit")
    basis = tuple(sorted(amp.amp))
    index = {m: i for i, m in enumerate(basis)}
    amps = np.array([amp.occ_amp(m) for m in basis])
    C = float(amps @ amps)

    vectors: dict[tuple[int, ...], np.ndarray] = {
        X: np.zeros(len(basis)) for X in parts}
    for m in basis:
        X = partition_of(m, p).lengths
        vectors[X][index[m]] = amp.occ_amp(m)

    bounds = {X: set(renewal_points_from_lengths(p, X)) for X in parts}
    norms = {X: float(v @ v) for X, v in vectors.items()}
    blocks: dict[tuple[int, ...], np.ndarray] = {}
    for Y in parts:
        if norms[Y] == 0.0:
            continue
        for Z in parts:
            if norms[Z] == 0.0:
                continue
            meet = sorted(bounds[Y] & bounds[Z])
            X = tuple((b - a) // p for a, b in zip(meet, meet[1:]))
            if X not in blocks:
                blocks[X] = np.zeros((len(basis), len(basis)))
            blocks[X] += np.outer(vectors[Y], vectors[Z])

    weights = {}
    omega = {}
    for X in parts:
        if norms[X] == 0.0:
            weights[X] = 0.0
            continue
        weights[X] = norms[X] / C
        omega[X] = blocks[X] / norms[X]
    return QuasiStateDecomposition(p=p, N=N, gamma=amp.gamma, basis=basis,
                                   amps=amps, weights=weights, omega=omega,
                                   u_norm_sq=norms)


def renewal_points_from_lengths(p: int, lengths) -> tuple[int, ...]:
    pts = [0]
    for n in lengths:
        pts.append(pts[-1] + p * n)
    return tuple(pts)


# -- rod expectations and the infinite volume ---------------------------------

@dataclass
class RodExpectations:
    """Occupation profile of the normalized irreducible rod states.

    ``nu[n-1][s]`` is the expectation of n_s (s = 0..pn-1) inside a rod
    of n particles; ``pair[n-1][(s, t)]`` the corresponding diagonal
    pair moment.  Rod classes that are empty (alpha_n = 0, e.g. every
    n >= 2 at p = 1) are flagged in ``empty`` and carry zero profiles.
    """

    p: int
    nmax: int
    nu: tuple[tuple[float, ...], ...]
    pair: tuple[dict[tuple[int, int], float], ...]
    empty: tuple[bool, ...]

    def nu_at(self, n: int, s: int) -> float:
        if 0 <= s < self.p * n:
            return self.nu[n - 1][s]
        return 0.0

    def pair_at(self, n: int, s: int, t: int) -> float:
        if s > t:
            s, t = t, s
        if 0 <= s and t < self.p * n:
            return self.pair[n - 1].get((s, t), 0.0)
        return 0.0


def rod_expectations(tables: list[CoefficientTable], gamma: float
                     ) -> RodExpectations:
    """nu_n profiles and in-rod pair moments from the irreducible classes."""
    p = tables[0].p
    nu = []
    pair = []
    empty = []
    for table in tables:
        n = table.N
        sites = p * n
        profile = np.zeros(sites)
        moments: dict[tuple[int, int], float] = {}
        alpha = 0.0
        amp = amplitudes(table, gamma)
        for m, A in amp.items_occ():
            if len(renewal_points(m, p)) != 2:
                continue
            w = A * A
            alpha += w
            occ = config_to_occupation(m, sites)
            for s, ns in enumerate(occ):
                if ns:
                    profile[s] += w * ns
                    for t in range(s, sites):
                        if occ[t]:
                            pairval = ns * occ[t] if t != s else ns * ns
                            moments[(s, t)] = moments.get((s, t), 0.0) \
                                + w * pairval
        if alpha == 0.0:
            empty.append(True)
            nu.append(tuple(0.0 for _ in range(sites)))
            pair.append({})
            continue
        empty.append(False)
        nu.append(tuple(profile / alpha))
        pair.append({k: v / alpha for k, v in moments.items()})
    return RodExpectations(p=p, nmax=len(tables), nu=tuple(nu),
                           pair=tuple(pair), empty=tuple(empty))


def occupation_infinite(model: RenewalModel, rods: RodExpectations,
                        override: bool = False) -> np.ndarray:
    """Bulk occupations <n_0..n_{p-1}>; exactly p-periodic, summing to 1."""
    model.require_converged(override)
    if rods.p != model.p:
        raise ConfigError("rod expectations and model disagree on p")
    nmax = min(model.Nmax, rods.nmax)
    occ = np.zeros(model.p)
    for k in range(model.p):
        total = 0.0
        for n in range(1, nmax + 1):
            pn = model.pn[n - 1]
            if pn == 0.0:
                continue
            total += pn * sum(rods.nu_at(n, k + model.p * j)
                              for j in range(n))
        occ[k] = total / model.mu
    return occ


def _psi_split(model: RenewalModel, rods: RodExpectations, s: int) -> float:
    """sum_n p_n nu_n(s): weight that a rod started s sites back covers s."""
    total = 0.0
    for n in range(1, min(model.Nmax, rods.nmax) + 1):
        if model.pn[n - 1]:
            total += model.pn[n - 1] * rods.nu_at(n, s)
    return total


@dataclass(frozen=True)
class PairCorrelation:
    value: float
    truncated: float
    error_estimate: float


def pair_infinite(model: RenewalModel, rods: RodExpectations, k: int, l: int,
                  override: bool = False) -> PairCorrelation:
    """<n_k n_{k+l}> in the bulk, with the truncated correlation.

    Same-rod part: both sites inside one rod, using in-rod pair moments.
    Split part: the left rod ends at or before the second site, a
    renewal bridge u_c crosses the gap, and an independent rod covers
    the second site.  Rod sizes beyond Nmax are out of reach of the
    exact tables; their weight is estimated by the long-interval bound
    and reported as the error.
    """
    model.require_converged(override)
    p = model.p
    k = k % p
    if l < 0:
        raise ConfigError("site separation must be >= 0")
    nmax = min(model.Nmax, rods.nmax)

    same = 0.0
    for n in range(1, nmax + 1):
        pn = model.pn[n - 1]
        if pn == 0.0:
            continue
        for j in range(n):
            s = k + p * j
            if s + l <= p * n - 1:
                same += pn * rods.pair_at(n, s, s + l)
    same /= model.mu

    split = 0.0
    if l >= 1:
        u = model.renewal_sequence(l // p + 1)
        for n1 in range(1, nmax + 1):
            pn1 = model.pn[n1 - 1]
            if pn1 == 0.0:
                continue
            for j in range(n1):
                s1 = k + p * j
                if s1 >= p * n1:
                    break
                reach = p * n1 - s1  # distance from site k to rod1's end
                if reach > l:
                    continue
                left = pn1 * rods.nu_at(n1, s1)
                if left == 0.0:
                    continue
                for c in range((l - reach) // p + 1):
                    s2 = l - reach - p * c
                    split += left * u[c] * _psi_split(model, rods, s2)
        split /= model.mu

    occ = occupation_infinite(model, rods, override=override)
    value = same + split
    truncated = value - occ[k] * occ[(k + l) % p]
    err = 2.0 * long_interval_bound(model, model.Nmax + 1)
    return PairCorrelation(value=value, truncated=truncated,
                           error_estimate=err)


def occupation_finite_via_renewal(model: RenewalModel, rods: RodExpectations,
                                  N: int) -> np.ndarray:
    """Finite-N occupations reassembled from the renewal description.

    <n_k>_N = sum over the covering rod (start a, size n) of
    u_a p_n u_{N-a-n} / u_N * nu_n(k - pa).  Must reproduce
    occupation_finite exactly; exercises the amplitude factorization,
    the rod profiles, and the renewal bridge in one identity.
    """
    if N > model.Nmax:
        raise ConfigError(f"N={N} exceeds Nmax={model.Nmax}")
    p = model.p
    u = model.renewal_sequence(N)
    occ = np.zeros(p * (N - 1) + 1)
    for k in range(len(occ)):
        total = 0.0
        for a in range(k // p + 1):
            for n in range(1, N - a + 1):
                s = k - p * a
                if s >= p * n:
                    continue
                total += u[a] * model.pn[n - 1] * u[N - a - n] \
                    * rods.nu_at(n, s)
        occ[k] = total / u[N]
    return occ


def bulk_epsilon(model: RenewalModel, rods: RodExpectations, N: int, k: int
                 ) -> float:
    """Bound on |<n_k>_N - <n_{k mod p}>_inf| from bridge-weight defects.

    Both occupations weight the same rod profiles; the finite system
    weights a covering rod (start a, size n) by u_a p_n u_{N-a-n} / u_N,
    the infinite one by p_n / mu (with rods allowed to start at any
    a, including outside [0, N-n]).  Summing |weight difference| times
    nu over the full index set bounds the gap by the triangle
    inequality, up to rod sizes beyond Nmax.
    """
    if N > model.Nmax:
        raise ConfigError(f"N={N} exceeds Nmax={model.Nmax}")
    p = model.p
    u = model.renewal_sequence(N)
    total = 0.0
    for j in range(model.Nmax):
        a = k // p - j
        for n in range(j + 1, model.Nmax + 1):
            s = (k % p) + p * j
            if s >= p * n:
                continue
            w_fin = u[a] * u[N - a - n] / u[N] if 0 <= a <= N - n else 0.0
            total += abs(w_fin - 1.0 / model.mu) * model.pn[n - 1] \
                * rods.nu_at(n, s)
    return total


# -- continuum density and off-diagonal bound ---------------------------------

def density_profile(occ: np.ndarray, gamma: float, xs: np.ndarray,
                    k_start: int = 0) -> np.ndarray:
    """One-particle density per unit area on the cylinder axis grid.

    ``occ[i]`` is the occupation of orbital k_start + i; the density is
    rho(x) = (2 pi R)^{-1} pi^{-1/2} sum_k <n_k> exp(-(x - k gamma)^2).
    """
    xs = np.asarray(xs, dtype=float)
    ks = (k_start + np.arange(len(occ))) * gamma
    gauss = np.exp(-(xs[:, None] - ks[None, :]) ** 2)
    return gamma / (2.0 * math.pi ** 1.5) * (gauss @ np.asarray(occ))


def one_particle_matrix(occ: np.ndarray, gamma: float, z, zp,
                        k_start: int = 0) -> complex:
    """rho_1(z; z') = sum_k <n_k> psi_k(z) conj(psi_k(z'))."""
    x, y = z
    xp, yp = zp
    ks = k_start + np.arange(len(occ))
    phase = np.exp(1j * ks * gamma * (y - yp))
    gauss = np.exp(-0.5 * (x - ks * gamma) ** 2 - 0.5 * (xp - ks * gamma) ** 2)
    return complex(gamma / (2.0 * math.pi ** 1.5)
                   * np.sum(np.asarray(occ) * phase * gauss))


@dataclass(frozen=True)
class OffdiagReport:
    K_fitted: float
    K_analytic: float
    max_violation: float

    @property
    def ok(self) -> bool:
        return self.max_violation <= 1e-12 * max(self.K_analytic, 1.0)


def offdiag_bound_check(amp: AmplitudeTable, nx: int = 41, ndy: int = 5
                        ) -> OffdiagReport:
    """Scan |rho_1(z; z')| against K exp(-(x-x')^2 / 4) on a grid.

    The analytic constant comes from completing the square in the two
    Gaussians: (x-kg)^2 + (x'-kg)^2 = 2(xbar-kg)^2 + (x-x')^2/2, so
    K(xbar) = (2 pi R)^{-1} pi^{-1/2} sum_k <n_k> exp(-(xbar-kg)^2/2).
    The fitted constant is the largest observed ratio; it can never
    exceed the analytic one, and the report records the worst gap.
    """
    gamma = amp.gamma
    occ = occupation_finite(amp)
    L = gamma * (len(occ) - 1)
    xs = np.linspace(-2.0, L + 2.0, nx)
    dys = np.linspace(0.0, math.pi / gamma, ndy)
    ks = np.arange(len(occ)) * gamma

    def K_at(xbar):
        return gamma / (2.0 * math.pi ** 1.5) * float(
            occ @ np.exp(-0.5 * (xbar - ks) ** 2))

    K_analytic = max(K_at(x) for x in xs)
    K_fitted = 0.0
    worst = -math.inf
    for x in xs:
        for xp in xs:
            envelope = math.exp(-0.25 * (x - xp) ** 2)
            bound_here = K_at(0.5 * (x + xp)) * envelope
            for dy in dys:
                val = abs(one_particle_matrix(occ, gamma, (x, 0.0), (xp, dy)))
                K_fitted = max(K_fitted, val / envelope)
                worst = max(worst, val - bound_here)
    return OffdiagReport(K_fitted=K_fitted, K_analytic=K_analytic,
                         max_violation=worst)


# -- finite domain -------------------------------------------------------------

@dataclass(frozen=True)
class DomainReport:
    a: float
    b: float
    weights: np.ndarray
    norm: float
    occupations: np.ndarray


def domain_weighted(amp: AmplitudeTable, a: float, b: float) -> DomainReport:
    """Occupations and norm with the x-integration restricted to [a, b].

    Per-orbital weights w_k = (1/sqrt(pi)) int_a^b exp(-(x-kg)^2) dx;
    the restricted norm is C_N^L = sum A^2 prod_k w_k^{n_k} and the
    occupations weight every particle except the counted one:
    <n_k>^L = sum A^2 n_k prod w^{n - delta_k} / C_N^L.
    """
    if not a < b:
        raise ConfigError(f"empty domain [{a}, {b}]")
    gamma = amp.gamma
    ks = np.arange(amp.num_orbitals) * gamma
    w = 0.5 * (erf(b - ks) - erf(a - ks))
    norm = 0.0
    occ = np.zeros(amp.num_orbitals)
    for m, A in amp.items_occ():
        wprod = 1.0
        for k in m:
            wprod *= w[k]
        norm += A * A * wprod
        for k in set(m):
            nk = sum(1 for v in m if v == k)
            # One factor of w_k is dropped for the counted particle; do
            # not divide, since w_k may vanish on remote domains.
            dropped = 1.0
            seen = False
            for v in m:
                if v == k and not seen:
                    seen = True
                    continue
                dropped *= w[v]
            occ[k] += A * A * nk * dropped
    if norm <= 0:
        raise ConfigError("domain carries no weight")
    return DomainReport(a=a, b=b, weights=w, norm=norm, occupations=occ / norm)


# -- periodicity ---------------------------------------------------------------

@dataclass(frozen=True)
class PeriodReport:
    period: int
    margin: float
    used: str
    tolerance: float
    deviations: tuple[float, ...]


def period_test(model: RenewalModel, rods: RodExpectations,
                tol: float = 1e-8, override: bool = False) -> PeriodReport:
    """Smallest lattice shift fixing the bulk correlations.

    Shifts d = 1..p are compared on the occupation p-vector; if the
    occupations alone would declare a period smaller than p, the pair
    moments up to separation 2p are consulted as well, so flat first
    moments cannot fake a short period.
    """
    p = model.p
    occ = occupation_infinite(model, rods, override=override)
    devs = []
    for d in range(1, p + 1):
        devs.append(max(abs(occ[k] - occ[(k + d) % p]) for k in range(p)))
    if any(dev <= tol for dev in devs[:-1]):
        pairs = {(k, l): pair_infinite(model, rods, k, l,
                                       override=override).value
                 for k in range(p) for l in range(1, 2 * p + 1)}
        for d in range(1, p + 1):
            pair_dev = max(abs(pairs[(k, l)] - pairs[((k + d) % p, l)])
                           for k in range(p) for l in range(1, 2 * p + 1))
            devs[d - 1] = max(devs[d - 1], pair_dev)
        used = "occupations+pair_moments"
    else:
        used = "occupations"
    period = next(d for d in range(1, p + 1) if devs[d - 1] <= tol)
    rejected = [devs[d - 1] for d in range(1, period)]
    margin = min(rejected) if rejected else math.inf
    return PeriodReport(period=period, margin=margin, used=used,
                        tolerance=tol, deviations=tuple(devs))
