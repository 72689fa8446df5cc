"""Uniformly elliptic operators and the Pucci extremal envelope.

For ellipticity constants 0 < lam <= Lam, the admissible coefficient class is

    A(lam, Lam) = { A symmetric : lam |xi|^2 <= xi' A xi <= Lam |xi|^2 },

and the Pucci extremal operators are the envelope of all linear traces:

    P_minus(M) = inf_{A in A} tr(A M) = lam * sum(e_i^+) + Lam * sum(e_i^-)
    P_plus(M)  = sup_{A in A} tr(A M) = Lam * sum(e_i^+) + lam * sum(e_i^-)

where e_i are the eigenvalues of M and e^+ = max(e, 0), e^- = min(e, 0).
The closed form follows by diagonalizing M and optimizing each eigenvalue's
coefficient independently; the infimum is attained at
A* = lam * proj_{e>0} + Lam * proj_{e<=0}.

An operator F is uniformly (lam, Lam)-elliptic iff

    P_minus(M - N) <= F(M) - F(N) <= P_plus(M - N)   for all symmetric M, N,

which is the property ``check_ellipticity`` samples.  All operators here are
normalized with F(0) = 0 so the sign conventions of the transmission problem
are unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

ELLIPTICITY_TOL = 1e-9
OPERATOR_KINDS = ("trace", "pucci-minus", "pucci-plus", "bellman-min-of-traces")


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric d x d matrix, d in {1, 2, 3}, stored as the upper triangle.

    ``upper`` lists entries row by row: (m11,), (m11, m12, m22), or
    (m11, m12, m13, m22, m23, m33).
    """

    d: int
    upper: tuple

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise DomainError("SymMatrix: dimension d must be 1, 2 or 3")
        need = self.d * (self.d + 1) // 2
        vals = tuple(float(v) for v in self.upper)
        if len(vals) != need:
            raise DomainError(
                f"SymMatrix: expected {need} upper-triangle entries, got {len(vals)}"
            )
        if not all(np.isfinite(vals)):
            raise DomainError("SymMatrix: entries must be finite")
        object.__setattr__(self, "upper", vals)

    @classmethod
    def from_array(cls, arr) -> "SymMatrix":
        a = np.asarray(arr, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError("SymMatrix.from_array: need a square 2-d array")
        d = a.shape[0]
        if not np.allclose(a, a.T, atol=1e-12 * max(1.0, float(np.abs(a).max()))):
            raise DomainError("SymMatrix.from_array: array is not symmetric")
        iu = np.triu_indices(d)
        return cls(d=d, upper=tuple(a[iu]))

    @property
    def matrix(self) -> np.ndarray:
        a = np.zeros((self.d, self.d))
        iu = np.triu_indices(self.d)
        a[iu] = self.upper
        a.T[iu] = self.upper
        return a

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues; exact to LAPACK precision for d <= 3."""
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class EllipticityPair:
    """Ellipticity constants 0 < lam <= Lam."""

    lam: float
    Lam: float

    def __post_init__(self):
        if not (0.0 < self.lam <= self.Lam and np.isfinite(self.Lam)):
            raise DomainError("EllipticityPair: need 0 < lam <= Lam < inf")


def _eigs(M) -> np.ndarray:
    if isinstance(M, SymMatrix):
        return M.eigenvalues()
    a = np.asarray(M, dtype=float)
    if a.ndim == 0:
        return a.reshape(1)
    if a.ndim >= 2 and a.shape[-1] == a.shape[-2]:
        return np.linalg.eigvalsh(a)
    raise DomainError("expected a SymMatrix or a (batched) square array")


def pucci_minus(M, pair: EllipticityPair):
    """P_minus(M) = lam * sum(e^+) + Lam * sum(e^-).  Batched arrays allowed."""
    e = _eigs(M)
    val = pair.lam * np.sum(np.maximum(e, 0.0), axis=-1) + pair.Lam * np.sum(
        np.minimum(e, 0.0), axis=-1
    )
    return float(val) if np.ndim(val) == 0 else val


def pucci_plus(M, pair: EllipticityPair):
    """P_plus(M) = Lam * sum(e^+) + lam * sum(e^-) = -P_minus(-M)."""
    e = _eigs(M)
    val = pair.Lam * np.sum(np.maximum(e, 0.0), axis=-1) + pair.lam * np.sum(
        np.minimum(e, 0.0), axis=-1
    )
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class EllipticOperator:
    """A concrete F(M): trace, a Pucci extremal, or a min of traces.

    ``coefficients`` is only used by the bellman kind: a tuple of symmetric
    coefficient matrices A_i, each with spectrum inside [lam, Lam], and
    F(M) = min_i tr(A_i M).  All kinds satisfy F(0) = 0 and are uniformly
    (lam, Lam)-elliptic.
    """

    kind: str
    pair: EllipticityPair
    coefficients: tuple = ()

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise DomainError(
                f"EllipticOperator: kind must be one of {OPERATOR_KINDS}"
            )
        if self.kind == "trace":
            if not (self.pair.lam <= 1.0 <= self.pair.Lam):
                raise DomainError(
                    "trace operator needs lam <= 1 <= Lam to be admissible"
                )
        if self.kind == "bellman-min-of-traces":
            if len(self.coefficients) == 0:
                raise DomainError("bellman operator needs at least one coefficient")
            mats = []
            for A in self.coefficients:
                sym = A if isinstance(A, SymMatrix) else SymMatrix.from_array(A)
                e = sym.eigenvalues()
                if e[0] < self.pair.lam - ELLIPTICITY_TOL or e[-1] > self.pair.Lam + ELLIPTICITY_TOL:
                    raise DomainError(
                        "bellman coefficient spectrum escapes [lam, Lam]: "
                        f"eigenvalues {e.tolist()}"
                    )
                mats.append(sym)
            object.__setattr__(self, "coefficients", tuple(mats))
        elif self.coefficients:
            raise DomainError(f"{self.kind} operator takes no coefficients")

    def apply(self, M) -> float:
        mat = M.matrix if isinstance(M, SymMatrix) else np.asarray(M, dtype=float)
        if self.kind == "trace":
            return float(np.trace(mat))
        if self.kind == "pucci-minus":
            return pucci_minus(mat, self.pair)
        if self.kind == "pucci-plus":
            return pucci_plus(mat, self.pair)
        return min(float(np.trace(A.matrix @ mat)) for A in self.coefficients)

    def __call__(self, M) -> float:
        return self.apply(M)


@dataclass(frozen=True)
class EllipticityReport:
    passed: bool
    samples: int
    worst_low_slack: float
    worst_high_slack: float
    counterexample: tuple | None


def check_ellipticity(
    op: EllipticOperator, d: int, samples: int = 2000, seed: int = 0
) -> EllipticityReport:
    """Sample the two-sided Pucci envelope property on random matrix pairs.

    Draws symmetric M, N with entries uniform in [-1, 1] and verifies

        P_minus(M - N) - tol <= F(M) - F(N) <= P_plus(M - N) + tol.

    Slacks are reported so a failure shows how badly the envelope broke.
    """
    if d not in (1, 2, 3):
        raise DomainError("check_ellipticity: d must be 1, 2 or 3")
    rng = np.random.default_rng(seed)
    worst_low = np.inf
    worst_high = np.inf
    for i in range(samples):
        B = rng.uniform(-1.0, 1.0, size=(2, d, d))
        M = (B[0] + B[0].T) / 2.0
        N = (B[1] + B[1].T) / 2.0
        diff = op.apply(M) - op.apply(N)
        low = diff - pucci_minus(M - N, op.pair)
        high = pucci_plus(M - N, op.pair) - diff
        worst_low = min(worst_low, low)
        worst_high = min(worst_high, high)
        if low < -ELLIPTICITY_TOL or high < -ELLIPTICITY_TOL:
            return EllipticityReport(
                passed=False,
                samples=i + 1,
                worst_low_slack=float(worst_low),
                worst_high_slack=float(worst_high),
                counterexample=(M.tolist(), N.tolist()),
            )
    return EllipticityReport(
        passed=True,
        samples=samples,
        worst_low_slack=float(worst_low),
        worst_high_slack=float(worst_high),
        counterexample=None,
    )
