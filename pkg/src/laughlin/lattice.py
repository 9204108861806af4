"""Orbital-lattice bookkeeping for Laughlin states on a cylinder.

A filling-1/p Laughlin state of N particles lives on the one-particle
orbital lattice {0, ..., pN-p}.  Everything in this module is integer
combinatorics on that lattice: orbital configurations (sorted tuples of
orbital indices), occupation configurations (per-site particle counts),
the dominance/admissibility condition, renewal points of a configuration,
and partitions of the site block {0, ..., pN-1} into rods of length p*n.

Conventions
-----------
* An orbital configuration is stored canonically as a weakly increasing
  tuple ``m = (m_1, ..., m_N)``.  For fermions (p odd) nonzero amplitudes
  are strictly increasing, but the canonical form does not enforce that.
* A renewal point of ``m`` is a value pk, 0 <= k <= N, with
  ``m_1 + ... + m_k == p*k*(k-1)/2``; k = 0 and k = N always qualify.
* Rod partitions split {0, ..., pN-1} into consecutive intervals of
  lengths ``p*n_i``; they are encoded by the composition (n_1, ..., n_D).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class ConfigError(ValueError):
    """Raised for parameter values outside the model's domain."""


class CapExceeded(RuntimeError):
    """Raised when a requested computation exceeds the configured size cap."""


#: Default particle-number caps for exact enumeration, keyed by p.
#: Anything above these is refused unless the caller raises the cap
#: explicitly; coefficient growth and configuration counts blow up fast.
DEFAULT_N_CAP = {1: 10, 2: 10, 3: 8}


@dataclass(frozen=True)
class ModelParams:
    """Model parameters: exponent p, inverse radius gamma, particle number N.

    Lengths are in units of the magnetic length, so gamma = 1/R fixes the
    cylinder circumference 2*pi/gamma.  p odd means fermions, p even bosons.
    """

    p: int
    N: int
    gamma: float

    def __post_init__(self):
        if not isinstance(self.p, int) or self.p < 1:
            raise ConfigError(f"p must be an integer >= 1, got {self.p!r}")
        if not isinstance(self.N, int) or self.N < 1:
            raise ConfigError(f"N must be an integer >= 1, got {self.N!r}")
        if not (isinstance(self.gamma, (int, float)) and math.isfinite(self.gamma)
                and self.gamma > 0):
            raise ConfigError(f"gamma must be a finite float > 0, got {self.gamma!r}")

    @property
    def fermionic(self) -> bool:
        return self.p % 2 == 1

    @property
    def num_orbitals(self) -> int:
        """Number of sites of the one-particle lattice {0, ..., pN-p}."""
        return self.p * (self.N - 1) + 1

    @property
    def orbitals(self) -> range:
        return range(self.num_orbitals)

    @property
    def root_config(self) -> tuple[int, ...]:
        """The maximally spread configuration (0, p, 2p, ...)."""
        return tuple(self.p * j for j in range(self.N))

    @property
    def radius(self) -> float:
        return 1.0 / self.gamma

    @property
    def circumference(self) -> float:
        return 2.0 * math.pi / self.gamma

    def check_cap(self, cap: int | None = None) -> None:
        """Raise :class:`CapExceeded` if N is beyond the enumeration cap."""
        if cap is None:
            cap = DEFAULT_N_CAP.get(self.p, 8)
        if self.N > cap:
            raise CapExceeded(
                f"N={self.N} exceeds the cap {cap} for p={self.p}; "
                "pass a larger cap explicitly to override")


def staircase(p: int, k: int) -> int:
    """Minimal admissible partial sum p*k*(k-1)/2 of the first k orbitals."""
    return p * k * (k - 1) // 2


def total_momentum(p: int, N: int) -> int:
    """Sum of orbital indices common to every nonzero configuration."""
    return staircase(p, N)


def is_canonical(m: tuple[int, ...]) -> bool:
    return all(a <= b for a, b in zip(m, m[1:]))


def is_admissible(m: tuple[int, ...], p: int) -> bool:
    """Dominance test for a canonical configuration.

    Every partial sum of the weakly increasing tuple ``m`` must sit on or
    above the staircase p*k*(k-1)/2, with equality for the full sum.
    Nonzero expansion coefficients occur only on admissible configurations.
    """
    if not is_canonical(m):
        raise ConfigError(f"configuration {m} is not sorted")
    if m and m[0] < 0:
        return False
    s = 0
    for k, mk in enumerate(m, start=1):
        s += mk
        if s < staircase(p, k):
            return False
    return s == staircase(p, len(m))


def renewal_points(m: tuple[int, ...], p: int) -> tuple[int, ...]:
    """Lattice positions pk where the partial sums of ``m`` hit the staircase.

    Includes the trivial points 0 and pN.  The configuration must be
    canonical (weakly increasing); admissibility is not required, but for
    inadmissible configurations the result is not meaningful.
    """
    if not is_canonical(m):
        raise ConfigError(f"configuration {m} is not sorted")
    points = [0]
    s = 0
    for k, mk in enumerate(m, start=1):
        s += mk
        if s == staircase(p, k):
            points.append(p * k)
    return tuple(points)


def renewal_points_occupation(n: tuple[int, ...], p: int) -> tuple[int, ...]:
    """Renewal points read off an occupation configuration.

    pj is a renewal point iff the first pj sites hold exactly j particles
    and those particles carry the minimal total momentum p*j*(j-1)/2.
    Equivalent to :func:`renewal_points` on the sorted orbital tuple.
    """
    N = sum(n)
    points = []
    count = 0
    moment = 0
    for site in range(len(n) + 1):
        if site % p == 0:
            j = site // p
            if count == j and moment == staircase(p, j):
                points.append(site)
        if site < len(n):
            count += n[site]
            moment += site * n[site]
    # Sites beyond len(n) are empty; pN is always a renewal point.
    last = p * N
    if points[-1] != last:
        points.append(last)
    return tuple(points)


@dataclass(frozen=True)
class RodPartition:
    """Partition of the site block {0, ..., pN-1} into consecutive rods.

    ``lengths`` is the composition (n_1, ..., n_D) of N; rod i covers the
    p*n_i sites starting right after rod i-1.
    """

    p: int
    lengths: tuple[int, ...]

    def __post_init__(self):
        if not self.lengths or any(n < 1 for n in self.lengths):
            raise ConfigError(f"invalid rod lengths {self.lengths}")

    @property
    def N(self) -> int:
        return sum(self.lengths)

    @property
    def boundaries(self) -> tuple[int, ...]:
        """Renewal points 0 = b_0 < b_1 < ... < b_D = pN delimiting the rods."""
        out = [0]
        for n in self.lengths:
            out.append(out[-1] + self.p * n)
        return tuple(out)

    @property
    def intervals(self) -> tuple[range, ...]:
        b = self.boundaries
        return tuple(range(b[i], b[i + 1]) for i in range(len(self.lengths)))

    @classmethod
    def from_intervals(cls, p: int, intervals) -> "RodPartition":
        intervals = [sorted(iv) for iv in intervals]
        intervals.sort(key=lambda iv: iv[0])
        pos = 0
        lengths = []
        for iv in intervals:
            if iv[0] != pos or iv != list(range(iv[0], iv[-1] + 1)) \
                    or len(iv) % p != 0:
                raise ConfigError(f"intervals {intervals} do not tile a rod block")
            lengths.append(len(iv) // p)
            pos = iv[-1] + 1
        return cls(p, tuple(lengths))


def partition_of(m: tuple[int, ...], p: int) -> RodPartition:
    """Rod partition generated by the renewal points of ``m``."""
    pts = renewal_points(m, p)
    lengths = tuple((b - a) // p for a, b in zip(pts, pts[1:]))
    return RodPartition(p, lengths)


def enumerate_partitions(N: int, cap: int = 20) -> list[tuple[int, ...]]:
    """All 2**(N-1) compositions of N, in lexicographic order."""
    if N > cap:
        raise CapExceeded(f"2**{N - 1} compositions exceed the cap (N={N} > {cap})")

    out: list[tuple[int, ...]] = []

    def rec(prefix, remaining):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for first in range(1, remaining + 1):
            rec(prefix + [first], remaining - first)

    rec([], N)
    return out


def translate_config(m: tuple[int, ...], p: int, shift: int) -> tuple[int, ...]:
    """Shift a configuration by ``shift`` rod units (p orbitals each)."""
    return tuple(mj + p * shift for mj in m)


def enumerate_admissible(p: int, N: int, fermionic: bool | None = None,
                         cap: int | None = None) -> list[tuple[int, ...]]:
    """All admissible canonical configurations, lexicographically ordered.

    Depth-first construction of weakly (strictly, for fermions) increasing
    tuples with partial-sum pruning against the staircase; branches that
    cannot reach the required total are cut as well.
    """
    if fermionic is None:
        fermionic = p % 2 == 1
    if cap is None:
        cap = DEFAULT_N_CAP.get(p, 8)
    if N > cap:
        raise CapExceeded(f"N={N} exceeds the cap {cap} for p={p}")

    total = staircase(p, N)
    mmax = p * (N - 1)
    out: list[tuple[int, ...]] = []
    step = 1 if fermionic else 0

    def rec(prefix, s):
        k = len(prefix)
        if k == N:
            if s == total:
                out.append(tuple(prefix))
            return
        lo = prefix[-1] + step if prefix else 0
        for mk in range(lo, mmax + 1):
            s2 = s + mk
            if s2 < staircase(p, k + 1):
                continue
            rest = N - k - 1
            # Remaining entries are >= mk (+step each for fermions) and
            # <= mmax; prune when the total is out of reach either way.
            lo_rest = rest * mk + step * rest * (rest + 1) // 2
            if s2 + lo_rest > total:
                break
            if s2 + rest * mmax - step * rest * (rest - 1) // 2 < total:
                continue
            rec(prefix + [mk], s2)

    rec([], 0)
    return out


def config_to_occupation(m: tuple[int, ...], num_sites: int) -> tuple[int, ...]:
    n = [0] * num_sites
    for mj in m:
        if not 0 <= mj < num_sites:
            raise ConfigError(f"orbital {mj} outside lattice of {num_sites} sites")
        n[mj] += 1
    return tuple(n)


def occupation_to_config(n: tuple[int, ...]) -> tuple[int, ...]:
    out = []
    for site, nk in enumerate(n):
        out.extend([site] * nk)
    return tuple(out)
