"""Degeneracy laws sigma and their summability certificates.

A degeneracy law is a continuous, strictly increasing function
sigma : [0, T_max] -> [0, infinity) with sigma(0) = 0.  It multiplies the
second-order operator in the equation

    sigma_{sgn(u)}(|Du|) F(D^2 u) = f,

so the equation loses ellipticity exactly where the gradient vanishes.  How
fast sigma vanishes at 0 is measured through its inverse: for a modulus
ratio theta in (0, 1) the series

    sum_{k >= 1} sigma^{-1}(theta^k)

converges iff sigma degenerates slowly enough (a Dini-type condition).  The
partial sums of that series drive every quantitative construction downstream,
so this module exposes them directly, together with a three-valued verdict
(``dini`` / ``not-dini`` / ``inconclusive``) that is only ever emitted with a
finite-sample certificate behind it.

Families
--------
power(p)             sigma(t) = t**p
power-log(p, q)      sigma(t) = t**p * (1 + log(1 + 1/t))**(-q)
exponential-flat     sigma(t) = exp(1 - 1/t), flat to all orders at 0
tabulated(points)    monotone piecewise-linear interpolant through (0, 0)
scaled(base, c, m)   sigma(t) = c * base(m * t), closed under rescaling

The power family satisfies the Dini condition for every p > 0; the
exponential-flat law does not (its inverse decays only harmonically,
sigma^{-1}(theta^k) = 1 / (1 + k log(1/theta))).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

INVERSE_TOL = 1e-10
_MONOTONE_SAMPLES = 64

# Verdict thresholds for dini_sum.  A convergence certificate requires tail
# term ratios at most 1 - DINI_MARGIN and a non-increasing ratio trend (up to
# RATIO_TREND_SLACK per step), which is what makes the geometric tail bound
# b_K * rho / (1 - rho) legitimate.  A divergence certificate requires
# k * b_k non-decreasing on the tail (harmonic comparison).
DINI_MARGIN = 1e-2
RATIO_TREND_SLACK = 1e-4
_MIN_PROBE_TERMS = 3


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, (arr.ndim == 0)


class DegeneracyLaw:
    """Common interface: call for sigma(t), ``inverse`` for sigma^{-1}(s)."""

    family = "abstract"
    t_max = math.inf

    def _raw(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, t):
        arr, scalar = _as_array(t)
        if np.any(arr < 0.0):
            raise DomainError(f"{self.family}: sigma evaluated at negative t")
        if np.any(arr > self.t_max * (1.0 + 1e-12)):
            raise DomainError(
                f"{self.family}: t exceeds domain cap t_max={self.t_max}"
            )
        out = self._raw(np.minimum(arr, self.t_max))
        return float(out) if scalar else out

    def inverse(self, s):
        """Solve sigma(t) = s on [0, t_max] to tolerance INVERSE_TOL.

        Subclasses override with closed forms where available; this generic
        version bisects, which is valid for any strictly increasing law.
        """
        arr, scalar = _as_array(s)
        s_top = self(self.t_max)
        if np.any(arr < 0.0) or np.any(arr > s_top * (1.0 + 1e-12)):
            raise DomainError(
                f"{self.family}: inverse target outside [0, sigma(t_max)]"
            )
        out = np.array([self._bisect_inverse(float(si)) for si in np.atleast_1d(arr)])
        out = out.reshape(arr.shape)
        return float(out) if scalar else out

    def _bisect_inverse(self, s: float) -> float:
        if s == 0.0:
            return 0.0
        lo, hi = 0.0, self.t_max
        f_lo = -s
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            f_mid = self(mid) - s
            if abs(f_mid) <= INVERSE_TOL * max(1.0, s):
                return mid
            if (f_mid > 0.0) == (f_lo > 0.0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
            if hi - lo <= 1e-17 * max(1.0, hi):
                break
        return 0.5 * (lo + hi)

    def _check_monotone(self):
        # Construction-time sanity: strictly increasing on (0, t_max].
        t = np.linspace(self.t_max / _MONOTONE_SAMPLES, self.t_max, _MONOTONE_SAMPLES)
        v = self(t)
        if np.any(np.diff(v) <= 0.0):
            raise DomainError(f"{self.family}: law is not strictly increasing")
        if self(0.0) != 0.0:
            raise DomainError(f"{self.family}: sigma(0) must be 0")

    def primitive(self, t):
        """P(t) = integral of sigma from 0 to t, for t in [0, t_max].

        This is the flux potential of the one-dimensional equation:
        d/dx P(u') = sigma(u') u''.  Families without a closed form use a
        dense cached trapezoid table, accurate to ~(t_max/2^14)^2.
        """
        arr, scalar = _as_array(t)
        if np.any(arr < 0.0) or np.any(arr > self.t_max * (1.0 + 1e-12)):
            raise DomainError(f"{self.family}: primitive argument outside [0, t_max]")
        table = getattr(self, "_prim_table", None)
        if table is None:
            ts = np.linspace(0.0, self.t_max, 16385)
            vals = self._raw(ts)
            ps = np.concatenate(
                ([0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(ts)))
            )
            table = (ts, ps)
            object.__setattr__(self, "_prim_table", table)
        out = np.interp(np.minimum(arr, self.t_max), table[0], table[1])
        return float(out) if scalar else out


@dataclass(frozen=True)
class PowerLaw(DegeneracyLaw):
    """sigma(t) = t**p with exact inverse s**(1/p)."""

    p: float
    t_max: float = 10.0
    family = "power"

    def __post_init__(self):
        if not (self.p > 0.0 and math.isfinite(self.p)):
            raise DomainError("power: exponent p must be positive and finite")
        if self.t_max <= 0.0:
            raise DomainError("power: t_max must be positive")

    def _raw(self, t):
        return np.power(t, self.p)

    def inverse(self, s):
        arr, scalar = _as_array(s)
        s_top = self.t_max ** self.p
        if np.any(arr < 0.0) or np.any(arr > s_top * (1.0 + 1e-12)):
            raise DomainError("power: inverse target outside [0, sigma(t_max)]")
        out = np.power(arr, 1.0 / self.p)
        return float(out) if scalar else out

    def primitive(self, t):
        arr, scalar = _as_array(t)
        if np.any(arr < 0.0) or np.any(arr > self.t_max * (1.0 + 1e-12)):
            raise DomainError("power: primitive argument outside [0, t_max]")
        out = np.power(arr, 1.0 + self.p) / (1.0 + self.p)
        return float(out) if scalar else out


@dataclass(frozen=True)
class PowerLogLaw(DegeneracyLaw):
    """sigma(t) = t**p * (1 + log(1 + 1/t))**(-q).

    For q > 0 the logarithmic factor sharpens the degeneracy; q < 0 softens
    it.  Strict monotonicity is checked at construction because large
    negative q can break it.
    """

    p: float
    q: float
    t_max: float = 10.0
    family = "power-log"

    def __post_init__(self):
        if not (self.p > 0.0 and math.isfinite(self.p)):
            raise DomainError("power-log: exponent p must be positive and finite")
        if not math.isfinite(self.q):
            raise DomainError("power-log: exponent q must be finite")
        if self.t_max <= 0.0:
            raise DomainError("power-log: t_max must be positive")
        self._check_monotone()

    def _raw(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0.0
        tp = t[pos]
        out[pos] = tp ** self.p * (1.0 + np.log1p(1.0 / tp)) ** (-self.q)
        return out


@dataclass(frozen=True)
class ExponentialFlatLaw(DegeneracyLaw):
    """sigma(t) = exp(1 - 1/t): every derivative vanishes at t = 0.

    The inverse is 1 / (1 - log s), so sigma^{-1}(theta^k) decays like
    1 / (k log(1/theta)) and its series diverges: the canonical non-Dini law.
    """

    t_max: float = 10.0
    family = "exponential-flat"

    def __post_init__(self):
        if self.t_max <= 0.0:
            raise DomainError("exponential-flat: t_max must be positive")

    def _raw(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0.0
        out[pos] = np.exp(1.0 - 1.0 / t[pos])
        return out

    def inverse(self, s):
        arr, scalar = _as_array(s)
        s_top = math.exp(1.0 - 1.0 / self.t_max)
        if np.any(arr < 0.0) or np.any(arr > s_top * (1.0 + 1e-12)):
            raise DomainError(
                "exponential-flat: inverse target outside [0, sigma(t_max)]"
            )
        out = np.zeros_like(arr) if arr.ndim else np.zeros(1)
        flat = np.atleast_1d(arr)
        res = np.zeros_like(flat)
        pos = flat > 0.0
        res[pos] = 1.0 / (1.0 - np.log(flat[pos]))
        out = res.reshape(arr.shape)
        return float(out) if scalar else out


@dataclass(frozen=True)
class TabulatedLaw(DegeneracyLaw):
    """Monotone piecewise-linear law through (0, 0) and given breakpoints.

    ``points`` is a sequence of (t, sigma(t)) pairs with both coordinates
    strictly increasing and positive.  The domain cap is the last abscissa.
    The inverse of a strictly increasing piecewise-linear map is obtained
    exactly by swapping coordinates.
    """

    points: tuple
    family = "tabulated"
    t_max: float = field(init=False)

    def __post_init__(self):
        pts = tuple((float(a), float(b)) for a, b in self.points)
        if len(pts) < 1:
            raise DomainError("tabulated: need at least one breakpoint")
        ts = np.array([p[0] for p in pts])
        ss = np.array([p[1] for p in pts])
        if np.any(ts <= 0.0) or np.any(ss <= 0.0):
            raise DomainError("tabulated: breakpoints must be strictly positive")
        if np.any(np.diff(ts) <= 0.0) or np.any(np.diff(ss) <= 0.0):
            raise DomainError("tabulated: breakpoints must be strictly increasing")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_ts", np.concatenate(([0.0], ts)))
        object.__setattr__(self, "_ss", np.concatenate(([0.0], ss)))
        object.__setattr__(self, "t_max", float(ts[-1]))

    def _raw(self, t):
        return np.interp(t, self._ts, self._ss)

    def inverse(self, s):
        arr, scalar = _as_array(s)
        if np.any(arr < 0.0) or np.any(arr > self._ss[-1] * (1.0 + 1e-12)):
            raise DomainError("tabulated: inverse target outside [0, sigma(t_max)]")
        out = np.interp(arr, self._ss, self._ts)
        return float(out) if scalar else out


@dataclass(frozen=True)
class ScaledLaw(DegeneracyLaw):
    """sigma(t) = prefactor * base(argscale * t).

    This is the closure operation of the rescaling cascade: zooming the
    equation in by a factor r and renormalizing the solution by mu turns a
    law sigma into a scaled copy of itself, never into a new family.
    """

    base: DegeneracyLaw
    prefactor: float
    argscale: float
    family = "scaled"
    t_max: float = field(init=False)

    def __post_init__(self):
        if self.prefactor <= 0.0 or self.argscale <= 0.0:
            raise DomainError("scaled: prefactor and argscale must be positive")
        object.__setattr__(self, "t_max", self.base.t_max / self.argscale)

    def _raw(self, t):
        return self.prefactor * self.base._raw(np.asarray(t) * self.argscale)

    def inverse(self, s):
        arr, scalar = _as_array(s)
        out = np.asarray(self.base.inverse(np.asarray(arr) / self.prefactor))
        out = out / self.argscale
        return float(out) if scalar else out

    def primitive(self, t):
        arr, scalar = _as_array(t)
        out = (self.prefactor / self.argscale) * np.asarray(
            self.base.primitive(np.asarray(arr) * self.argscale)
        )
        return float(out) if scalar else out


def law_from_config(cfg: dict) -> DegeneracyLaw:
    """Build a law from a plain dict, e.g. {"family": "power", "p": 2.0}."""
    from .errors import ConfigError

    if not isinstance(cfg, dict) or "family" not in cfg:
        raise ConfigError("degeneracy law config must be a dict with a 'family' key")
    fam = cfg["family"]
    keys = set(cfg) - {"family"}
    try:
        if fam == "power":
            allowed = {"p", "t_max"}
            if not keys <= allowed:
                raise ConfigError(f"power law: unknown keys {sorted(keys - allowed)}")
            return PowerLaw(p=float(cfg["p"]), t_max=float(cfg.get("t_max", 10.0)))
        if fam == "power-log":
            allowed = {"p", "q", "t_max"}
            if not keys <= allowed:
                raise ConfigError(
                    f"power-log law: unknown keys {sorted(keys - allowed)}"
                )
            return PowerLogLaw(
                p=float(cfg["p"]),
                q=float(cfg["q"]),
                t_max=float(cfg.get("t_max", 10.0)),
            )
        if fam == "exponential-flat":
            allowed = {"t_max"}
            if not keys <= allowed:
                raise ConfigError(
                    f"exponential-flat law: unknown keys {sorted(keys - allowed)}"
                )
            return ExponentialFlatLaw(t_max=float(cfg.get("t_max", 10.0)))
        if fam == "tabulated":
            allowed = {"points"}
            if not keys <= allowed:
                raise ConfigError(
                    f"tabulated law: unknown keys {sorted(keys - allowed)}"
                )
            return TabulatedLaw(points=tuple(map(tuple, cfg["points"])))
    except KeyError as exc:
        raise ConfigError(f"{fam} law: missing parameter {exc}") from None
    raise ConfigError(f"unknown degeneracy law family {fam!r}")


@dataclass(frozen=True)
class DiniReport:
    """Finite-sample certificate for the series sum_k sigma^{-1}(theta^k).

    ``verdict`` is one of:

    * ``dini``: tail ratios stay below 1 - DINI_MARGIN with a non-increasing
      trend, so the geometric tail bound in ``tail_estimate`` is certified.
    * ``not-dini``: k * term_k is non-decreasing on the tail, so the series
      dominates a harmonic series and diverges; ``tail_estimate`` is inf.
    * ``inconclusive``: neither certificate fired at this depth;
      ``tail_estimate`` is nan.
    """

    theta: float
    K: int
    terms: tuple
    partial_sums: tuple
    verdict: str
    tail_estimate: float


def dini_sum(law: DegeneracyLaw, theta: float, K: int) -> DiniReport:
    """Partial sums and verdict for sum_{k=1}^{K} sigma^{-1}(theta^k)."""
    if not (0.0 < theta < 1.0):
        raise DomainError("dini_sum: theta must lie in (0, 1)")
    if K < 1:
        raise DomainError("dini_sum: K must be at least 1")
    powers = theta ** np.arange(1, K + 1, dtype=float)
    terms = np.asarray(law.inverse(powers), dtype=float)
    sums = np.cumsum(terms)
    verdict, tail = _classify_tail(terms)
    return DiniReport(
        theta=float(theta),
        K=int(K),
        terms=tuple(terms.tolist()),
        partial_sums=tuple(sums.tolist()),
        verdict=verdict,
        tail_estimate=tail,
    )


def _classify_tail(terms: np.ndarray):
    # Probe the second half of the term list; discard an underflowed-to-zero
    # suffix (terms below ~5e-324 carry a trivially convergent tail).
    pos = np.flatnonzero(terms > 0.0)
    if pos.size == 0:
        return "dini", 0.0
    last = pos[-1]
    probe_lo = max(0, (last + 1) // 2)
    b = terms[probe_lo : last + 1]
    underflowed = last < terms.size - 1
    if b.size < _MIN_PROBE_TERMS + 1:
        if underflowed:
            return "dini", 0.0
        return "inconclusive", math.nan

    k = np.arange(probe_lo + 1, last + 2, dtype=float)
    kb = k * b
    if not underflowed and np.all(np.diff(kb) >= -1e-12 * kb[:-1]):
        return "not-dini", math.inf

    ratios = b[1:] / b[:-1]
    trend_ok = np.all(np.diff(ratios) <= RATIO_TREND_SLACK * ratios[:-1])
    if trend_ok and np.max(ratios) <= 1.0 - DINI_MARGIN:
        rho = float(np.max(ratios))
        return "dini", float(terms[last] * rho / (1.0 - rho))
    return "inconclusive", math.nan


def a_sequence(law1: DegeneracyLaw, law2: DegeneracyLaw, theta: float, K: int):
    """a_k = max(sigma_1^{-1}(theta^k), sigma_2^{-1}(theta^k)), k = 1..K.

    This is the driving sequence of the modulus construction: a_k bounds how
    large a gradient can be while both laws keep the equation below the
    k-th modulus level theta^k.
    """
    if not (0.0 < theta < 1.0):
        raise DomainError("a_sequence: theta must lie in (0, 1)")
    if K < 0:
        raise DomainError("a_sequence: K must be non-negative")
    if K == 0:
        return []
    powers = theta ** np.arange(1, K + 1, dtype=float)
    b1 = np.asarray(law1.inverse(powers), dtype=float)
    b2 = np.asarray(law2.inverse(powers), dtype=float)
    return np.maximum(b1, b2).tolist()
