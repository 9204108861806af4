"""Renewal-process description of the cylinder state.

The squared amplitudes factorise over rods (maximal stretches between
renewal points), so the exact norms C_N organise into a renewal process:

* irreducible weights ``alpha_n``: squared occupation amplitudes summed
  over configurations whose only renewal points are the endpoints;
* activity ``r``: the root in (0, 1] of sum_n alpha_n r^n = 1, turning
  ``p_n = alpha_n r^n`` into a waiting-time distribution with mean
  ``mu = sum_n n p_n``;
* renewal function ``u_N = C_N r^N``, equal to the convolution
  ``u_N = sum_k p_k u_{N-k}`` and converging to 1/mu.

Everything is built from a finite Nmax, so r carries a truncation bias.
The model reports the root shift between Nmax and Nmax-1 and a geometric
estimate of the waiting-time mass beyond Nmax; by construction the
truncated p_n sum to one exactly, so the literal missing mass is not
observable and the estimate extrapolates the decay of the last two
weights instead.  Models whose estimated tail exceeds 1% refuse to feed
infinite-volume quantities unless overridden.

Positions and window arguments below are in rod coordinates: rod
coordinate a means lattice position p*a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from laughlin.expansion import (CoefficientTable, _config_factorial,
                                amplitudes, expand_all)
from laughlin.lattice import (ConfigError, enumerate_partitions,
                              renewal_points)

TAIL_THRESHOLD = 0.01


class UnconvergedError(RuntimeError):
    """Raised when infinite-volume output is requested from a model whose
    truncation tail is too large."""


def norms_from_tables(tables: list[CoefficientTable], gamma: float) -> np.ndarray:
    """Squared norms C_0..C_Nmax; C_0 = 1 is the empty-product convention."""
    out = [1.0]
    for table in tables:
        out.append(amplitudes(table, gamma).norm_sq())
    return np.array(out)


def _squared_amplitude_poly(table: CoefficientTable, irreducible_only: bool
                            ) -> dict[int, Fraction]:
    """Sum of A_N(n)^2 as an exact polynomial in x = exp(-gamma^2).

    The squared Gaussian factor of every configuration is an integer
    power x^(p^2 S_N - sum m_j^2), so norms and irreducible weights are
    polynomials with nonnegative rational coefficients and can be
    manipulated without rounding.
    """
    p, N = table.p, table.N
    base = p * p * sum(j * j for j in range(N))
    poly: dict[int, Fraction] = {}
    for m, c in table.coeffs.items():
        if irreducible_only and len(renewal_points(m, p)) != 2:
            continue
        expo = base - sum(mj * mj for mj in m)
        coeff = Fraction(c * c, _config_factorial(m))
        poly[expo] = poly.get(expo, Fraction(0)) + coeff
    return poly


def _poly_eval(poly: dict[int, Fraction], x: float) -> float:
    return math.fsum(float(c) * x ** e for e, c in poly.items())


def _poly_mul(a: dict[int, Fraction], b: dict[int, Fraction]
              ) -> dict[int, Fraction]:
    out: dict[int, Fraction] = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = ea + eb
            out[e] = out.get(e, Fraction(0)) + ca * cb
    return out


def irreducible_weights(tables: list[CoefficientTable], gamma: float
                        ) -> tuple[np.ndarray, float]:
    """Weights alpha_1..alpha_Nmax plus the recursion cross-check residual.

    Direct route: sum A_n(m)^2 over configurations m whose renewal set
    is just {0, pn}.  Cross-check: alpha_N = C_N - sum_{k<N} alpha_k
    C_{N-k}.  Both sides are exact polynomials in exp(-gamma^2), so the
    comparison is done term by term in rational arithmetic: a correct
    expansion gives residual 0.0 identically, and any disagreement is
    reported at the scale of C_N.  (A floating-point recursion would be
    limited by cancellation to ~1e-15 absolute, far too coarse for the
    smallest alpha_n; the exact route couples the expansion, the renewal
    detection, and the norms with no numerical slack.)
    """
    p = tables[0].p
    x = math.exp(-gamma * gamma)
    irr = [_squared_amplitude_poly(t, True) for t in tables]
    full = [_squared_amplitude_poly(t, False) for t in tables]
    direct = np.array([_poly_eval(q, x) for q in irr])

    residual = 0.0
    for n in range(1, len(tables) + 1):
        defect = dict(full[n - 1])
        for k in range(1, n):
            for e, c in _poly_mul(irr[k - 1], full[n - k - 1]).items():
                defect[e] = defect.get(e, Fraction(0)) - c
        for e, c in irr[n - 1].items():
            defect[e] = defect.get(e, Fraction(0)) - c
        defect = {e: c for e, c in defect.items() if c != 0}
        if defect:
            scale = max(_poly_eval(full[n - 1], x), 1.0)
            residual = max(residual, abs(_poly_eval(defect, x)) / scale)
    return direct, residual


def solve_activity(alpha: np.ndarray, tol: float = 1e-12,
                   extended: bool = False) -> float:
    """Root r in (0, 1] of sum_n alpha_n r^n = 1.

    The left side is strictly increasing in r with value 0 at r = 0, and
    alpha_1 = 1 guarantees a value >= 1 at r = 1, so the root exists and
    is unique.  Bisection to the requested tolerance, then a few Newton
    steps to polish to machine precision.  ``extended`` redoes the
    arithmetic in long double as a round-off check at large gamma, where
    the alpha_n span many orders of magnitude.
    """
    alpha = np.asarray(alpha, dtype=np.longdouble if extended else np.float64)
    one = alpha.dtype.type(1.0)
    if len(alpha) == 0 or not alpha[0] > 0:
        raise ConfigError("alpha_1 must be positive to solve for the activity")

    def f(r):
        total = alpha.dtype.type(0.0)
        for a in alpha[::-1]:
            total = (total + a) * r
        return total - one

    def df(r):
        total = alpha.dtype.type(0.0)
        for n in range(len(alpha), 0, -1):
            total = total * r + n * alpha[n - 1]
        return total

    if f(one) < 0:
        raise ConfigError(
            "truncated weights sum below 1 at r=1; tail-dominated model")
    lo, hi = alpha.dtype.type(0.0), one
    while hi - lo > tol * hi:
        mid = (lo + hi) / 2
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    r = (lo + hi) / 2
    for _ in range(3):
        slope = df(r)
        if slope <= 0:
            break
        r = min(r - f(r) / slope, one)
    return float(r)


@dataclass(frozen=True)
class RenewalModel:
    """Waiting-time description extracted from exact norms at fixed gamma.

    ``C[n]``, ``alpha[n-1]``, ``pn[n-1]`` follow the index conventions of
    the module docstring; ``c_sub`` is the empirical constant
    max C_{N+M} / (C_N C_M) over computed pairs.
    """

    p: int
    gamma: float
    Nmax: int
    C: tuple[float, ...]
    alpha: tuple[float, ...]
    alpha_residual: float
    r: float
    pn: tuple[float, ...]
    mu: float
    tail_mass: float
    root_shift: float
    c_sub: float

    @property
    def unconverged(self) -> bool:
        return self.tail_mass > TAIL_THRESHOLD

    def require_converged(self, override: bool = False) -> None:
        if self.unconverged and not override:
            raise UnconvergedError(
                f"estimated waiting-time tail {self.tail_mass:.3g} exceeds "
                f"{TAIL_THRESHOLD}; pass override to proceed anyway")

    def renewal_sequence(self, kmax: int) -> np.ndarray:
        """u_0..u_kmax by the convolution recursion."""
        u = np.zeros(kmax + 1)
        u[0] = 1.0
        for k in range(1, kmax + 1):
            u[k] = sum(self.pn[n - 1] * u[k - n]
                       for n in range(1, min(k, self.Nmax) + 1))
        return u


def _tail_estimate(pn: np.ndarray) -> float:
    """Geometric extrapolation of the waiting-time mass beyond Nmax."""
    if len(pn) < 2 or pn[-1] <= 0 or pn[-2] <= 0:
        return 0.0
    q = min(pn[-1] / pn[-2], 0.99)
    return float(pn[-1] * q / (1.0 - q))


def build_model(p: int, Nmax: int, gamma: float,
                tables: list[CoefficientTable] | None = None,
                cap: int | None = None, extended_recheck: bool = False
                ) -> RenewalModel:
    """Assemble the renewal model from exact tables up to Nmax."""
    if tables is None:
        tables = expand_all(p, Nmax, cap=cap)
    tables = tables[:Nmax]
    if len(tables) < Nmax:
        raise ConfigError(f"need tables up to N={Nmax}, got {len(tables)}")
    alpha, residual = irreducible_weights(tables, gamma)
    C = norms_from_tables(tables, gamma)
    r = solve_activity(alpha)
    if extended_recheck:
        r_ext = solve_activity(alpha, extended=True)
        if abs(r - r_ext) > 1e-9 * r:
            raise ConfigError(
                f"double/extended precision roots disagree: {r} vs {r_ext}")
    pn = alpha * r ** np.arange(1, Nmax + 1)
    mu = float(np.arange(1, Nmax + 1) @ pn)
    root_shift = abs(r - solve_activity(alpha[:-1])) if Nmax >= 2 else 0.0
    csub = 1.0
    for n in range(1, Nmax):
        for m in range(1, Nmax - n + 1):
            csub = max(csub, C[n + m] / (C[n] * C[m]))
    return RenewalModel(p=p, gamma=gamma, Nmax=Nmax, C=tuple(C),
                        alpha=tuple(alpha), alpha_residual=residual, r=r,
                        pn=tuple(pn), mu=mu, tail_mass=_tail_estimate(pn),
                        root_shift=root_shift, c_sub=csub)


@dataclass(frozen=True)
class RenewalFunctionReport:
    """u sequence with its internal consistency and convergence record.

    ``consistency`` is the worst relative gap between C_N r^N and the
    convolution values over N <= Nmax.  ``sup_dev[d]`` is
    sup_{d <= k <= kmax} |u_k - 1/mu|, nonincreasing in d by definition.
    """

    u: np.ndarray
    consistency: float
    sup_dev: np.ndarray


def renewal_function(model: RenewalModel, kmax: int | None = None
                     ) -> RenewalFunctionReport:
    """Renewal sequence u_0..u_kmax with convergence diagnostics."""
    if kmax is None:
        kmax = 4 * model.Nmax
    u = model.renewal_sequence(kmax)
    worst = 0.0
    for n in range(model.Nmax + 1):
        closed = model.C[n] * model.r ** n
        worst = max(worst, abs(u[n] - closed) / max(abs(closed), 1e-300))
    dev = np.abs(u - 1.0 / model.mu)
    sup_dev = np.maximum.accumulate(dev[::-1])[::-1]
    return RenewalFunctionReport(u=u, consistency=worst, sup_dev=sup_dev)


def partition_probability(model: RenewalModel, lengths, N: int | None = None
                          ) -> float:
    """Probability p_N(X) = prod alpha_{n_i} / C_N of a rod partition."""
    lengths = tuple(int(n) for n in lengths)
    if not lengths or any(n < 1 for n in lengths):
        raise ConfigError(f"rod lengths must be positive, got {lengths}")
    total = sum(lengths)
    if N is not None and N != total:
        raise ConfigError(f"lengths sum to {total}, expected N={N}")
    if total > model.Nmax:
        raise ConfigError(f"partition of {total} exceeds Nmax={model.Nmax}")
    num = 1.0
    for n in lengths:
        num *= model.alpha[n - 1]
    return num / model.C[total]


@dataclass(frozen=True)
class WindowEvent:
    """A pinned renewal at rod coordinate ``start`` followed by rods of
    the given ``lengths`` (possibly none)."""

    start: int
    lengths: tuple[int, ...] = ()

    @property
    def end(self) -> int:
        return self.start + sum(self.lengths)


def stationary_event_probability(model: RenewalModel,
                                 events: WindowEvent | list[WindowEvent],
                                 override: bool = False) -> float:
    """Stationary probability of one or two pinned window events.

    A single window costs mu^{-1} prod p_{n_i}; a second window is tied
    to the first by the renewal bridge u_gap, which is what makes the
    process clustering.
    """
    model.require_converged(override)
    if isinstance(events, WindowEvent):
        events = [events]
    if not 1 <= len(events) <= 2:
        raise ConfigError("expected one or two window events")
    for ev in events:
        if any(n < 1 for n in ev.lengths):
            raise ConfigError(f"rod lengths must be positive: {ev}")
        if any(n > model.Nmax for n in ev.lengths):
            raise ConfigError(f"rod length beyond Nmax={model.Nmax}: {ev}")
    prob = 1.0 / model.mu
    for n in events[0].lengths:
        prob *= model.pn[n - 1]
    if len(events) == 2:
        first, second = events
        gap = second.start - first.end
        if gap < 0:
            raise ConfigError("windows overlap or are out of order")
        prob *= model.renewal_sequence(gap)[gap]
        for n in second.lengths:
            prob *= model.pn[n - 1]
    return prob


def finite_window_probability(model: RenewalModel, N: int,
                              events: WindowEvent | list[WindowEvent]
                              ) -> float:
    """Probability of pinned window events under the length-N state.

    Bridges u_a (before), u_gap (between) and u_{N-end} (after), divided
    by u_N; reduces to p_N(X) when the windows exhaust the system.
    """
    if isinstance(events, WindowEvent):
        events = [events]
    if not 1 <= len(events) <= 2:
        raise ConfigError("expected one or two window events")
    if N > model.Nmax:
        raise ConfigError(f"N={N} exceeds Nmax={model.Nmax}")
    u = model.renewal_sequence(N)
    prev_end = 0
    prob = 1.0
    for ev in events:
        gap = ev.start - prev_end
        if gap < 0 or ev.end > N:
            raise ConfigError("windows overlap, disordered, or exceed N")
        prob *= u[gap]
        for n in ev.lengths:
            if n > model.Nmax:
                raise ConfigError(f"rod length beyond Nmax={model.Nmax}")
            prob *= model.pn[n - 1]
        prev_end = ev.end
    return prob * u[N - prev_end] / u[N]


def no_renewal_probability(model: RenewalModel, N: int, positions) -> float:
    """Exact probability that none of the rod coordinates in ``positions``
    is a renewal point of a length-N system.

    Enumerates all 2^(N-1) partitions, so meant for small N.
    """
    if N > model.Nmax:
        raise ConfigError(f"N={N} exceeds Nmax={model.Nmax}")
    banned = set(int(a) for a in positions)
    total = 0.0
    for lengths in enumerate_partitions(N):
        boundary = {0}
        s = 0
        for n in lengths:
            s += n
            boundary.add(s)
        if boundary & banned:
            continue
        total += partition_probability(model, lengths)
    return total


def long_interval_bound(model: RenewalModel, d: int) -> float:
    """Bound c_sub * sum_{k>=d} k p_k on the no-renewal probability of a
    window of d rods; the waiting-time mass beyond Nmax enters through
    the same geometric extrapolation the model uses for its tail."""
    if d < 1:
        raise ConfigError(f"window length must be >= 1, got {d}")
    pn = np.asarray(model.pn)
    k = np.arange(1, model.Nmax + 1)
    total = float((k[d - 1:] @ pn[d - 1:]) if d <= model.Nmax else 0.0)
    if len(pn) >= 2 and pn[-1] > 0 and pn[-2] > 0:
        q = min(pn[-1] / pn[-2], 0.99)
        # sum_{k>Nmax} k p_k with p_k ~ p_Nmax q^(k-Nmax)
        n0 = model.Nmax
        start = max(d, n0 + 1)
        head = pn[-1] * q ** (start - n0)
        total += float(head * (start + q / (1 - q)) / (1 - q))
    return model.c_sub * total
