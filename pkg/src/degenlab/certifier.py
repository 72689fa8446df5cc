"""Discrete certificates for the two viscosity inequalities.

A continuous viscosity solution of sigma_{sgn(u)}(|Du + q|) F(D^2 u) = f
with |f| <= C0 satisfies, at every point and for every C^2 test function
phi touching u there,

    touching from above:  min_i [sigma_i(|D phi + q|) F(D^2 phi)] <= C0
    touching from below:  max_i [sigma_i(|D phi + q|) F(D^2 phi)] >= -C0

(the min/max over the two phase products absorbs the unknown interface;
note it ranges over the products, so for F < 0 the larger law yields the
smaller product).  The
discrete counterpart tested here enumerates quadratic test functions at
every interior node x0:

* the base candidate is the second-order Taylor polynomial of the grid
  field (central differences for p = D phi and M = D^2 phi);
* the gradient is perturbed by +-eta_grad along the axes and the Hessian
  by +-eta_hess v v' over the stencil directions v, sweeping the O(h^2) /
  O(h) uncertainty of those finite differences;
* a candidate counts as touching from above if u - phi <= eta_touch on
  the full window of radius rho_test cells around x0 (phi is anchored at
  u(x0)), and symmetrically from below.

Every surviving candidate must satisfy its inequality up to eta_cert.
This is a necessary-condition certificate: nodes where no candidate
survives the touching filter (kinks sharper than the quadratic family)
constrain nothing, exactly as points without test functions constrain
nothing in the continuous definition.

Defaults eta_cert = 10 h, eta_touch = h^2, eta_grad = h^2 / 2 and
eta_hess = h / 2 match the accuracy at which a C^2 function's gradient
and Hessian are recoverable from exact grid samples, so exact solutions
pass while O(1) equation violations fail by a margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import SymMatrix
from .errors import DomainError
from .grids import DiscreteField
from .problem import ProblemInstance

_DEFAULT_RHO_TEST = 3


@dataclass(frozen=True)
class CertifierConfig:
    """Tolerances of the discrete certificate; None means the h-default."""

    rho_test: int = _DEFAULT_RHO_TEST
    eta_cert: float | None = None
    eta_touch: float | None = None
    eta_grad: float | None = None
    eta_hess: float | None = None

    def resolved(self, h: float):
        return (
            self.rho_test,
            self.eta_cert if self.eta_cert is not None else 10.0 * h,
            self.eta_touch if self.eta_touch is not None else h * h,
            self.eta_grad if self.eta_grad is not None else 0.5 * h * h,
            self.eta_hess if self.eta_hess is not None else 0.5 * h,
        )


@dataclass(frozen=True)
class TouchingTest:
    """One concrete quadratic test function at one node."""

    center: tuple
    rho_test: int
    p: tuple
    M: SymMatrix
    side: str


@dataclass(frozen=True)
class CertificateReport:
    side: str
    checked_nodes: int
    tested_candidates: int
    violations: tuple
    max_violation: float
    eta_cert: float
    eta_touch: float
    passed: bool
    witness: TouchingTest | None
    sigma_saturated: bool


def certify_min(u: DiscreteField, prob: ProblemInstance,
                cfg: CertifierConfig = CertifierConfig()) -> CertificateReport:
    """Check min_i sigma_i(|p + q|) F(M) <= C0 + eta_cert from above."""
    return _certify(u, prob, cfg, side="above")


def certify_max(u: DiscreteField, prob: ProblemInstance,
                cfg: CertifierConfig = CertifierConfig()) -> CertificateReport:
    """Check max_i sigma_i(|p + q|) F(M) >= -C0 - eta_cert from below."""
    return _certify(u, prob, cfg, side="below")


def _certify(u: DiscreteField, prob: ProblemInstance, cfg: CertifierConfig,
             side: str) -> CertificateReport:
    grid = u.grid
    h = grid.h
    rho, eta_cert, eta_touch, eta_grad, eta_hess = cfg.resolved(h)
    if rho < 1:
        raise DomainError("certifier: rho_test must be at least one cell")
    if 2 * rho + 1 > grid.n:
        raise DomainError("certifier: test window does not fit on the grid")
    u.assert_finite()

    if grid.d == 1:
        state = _State1D(u.values, grid, prob, rho)
    else:
        state = _State2D(u.values, grid, prob, rho)

    q = prob.q_vector(grid.d)
    C0 = prob.C0
    sign = 1.0 if side == "above" else -1.0
    best_slack = np.full(state.block_shape, -np.inf)
    best_combo = np.full(state.block_shape, -1, dtype=int)
    tested = 0
    saturated = False

    for combo_id, (dp, dM) in enumerate(state.combos(eta_grad, eta_hess)):
        tested += 1
        # touching filter: u - phi <= eta_touch on the window (side above),
        # phi anchored at u(x0); mirrored for below.
        defect = state.touch_defect(dp, dM, sign)
        ok = defect <= eta_touch
        if not np.any(ok):
            continue
        e_val, sat = state.inequality_value(dp, dM, q, side)
        saturated = saturated or sat
        slack = np.where(ok, sign * e_val - C0, -np.inf)
        upd = slack > best_slack
        best_slack = np.where(upd, slack, best_slack)
        best_combo = np.where(upd, combo_id, best_combo)

    finite = np.isfinite(best_slack)
    max_violation = float(best_slack[finite].max()) if np.any(finite) else -np.inf
    viol_idx = np.argwhere(finite & (best_slack > eta_cert))
    violations = tuple(
        (state.node_index(tuple(ij)), side, float(best_slack[tuple(ij)]))
        for ij in viol_idx
    )
    witness = None
    if np.any(finite) and max_violation > eta_cert:
        flat = np.where(finite, best_slack, -np.inf)
        ij = tuple(np.unravel_index(int(np.argmax(flat)), flat.shape))
        witness = state.witness(ij, int(best_combo[ij]), eta_grad, eta_hess, side, rho)

    return CertificateReport(
        side=side,
        checked_nodes=int(np.prod(state.block_shape)),
        tested_candidates=tested,
        violations=violations,
        max_violation=max_violation,
        eta_cert=eta_cert,
        eta_touch=eta_touch,
        passed=max_violation <= eta_cert,
        witness=witness,
        sigma_saturated=saturated,
    )


def _law_pair_values(prob, speed):
    """(sigma_plus, sigma_minus) evaluated with saturation at each t_max."""
    sat = False
    out = []
    for law in (prob.sigma_plus, prob.sigma_minus):
        if np.any(speed > law.t_max):
            sat = True
        out.append(law(np.minimum(speed, law.t_max)))
    return out[0], out[1], sat


class _State1D:
    def __init__(self, u, grid, prob, rho):
        self.h = grid.h
        self.prob = prob
        self.rho = rho
        n = grid.n
        self.sl = slice(rho, n - rho)
        self.block_shape = (n - 2 * rho,)
        self.offsets = range(-rho, rho + 1)
        c = u[self.sl]
        self.D = {
            s: u[rho + s : n - rho + s] - c for s in self.offsets
        }
        h = self.h
        self.p_base = (self.D[1] - self.D[-1]) / (2 * h)
        self.m_base = (self.D[1] + self.D[-1]) / (h * h)

    def combos(self, eta_grad, eta_hess):
        for dp in (0.0, eta_grad, -eta_grad):
            for dm in (0.0, eta_hess, -eta_hess):
                yield (dp,), (dm,)

    def touch_defect(self, dp, dM, sign):
        p = self.p_base + dp[0]
        m = self.m_base + dM[0]
        h = self.h
        worst = np.full(self.block_shape, -np.inf)
        for s in self.offsets:
            if s == 0:
                continue
            x = s * h
            phi = p * x + 0.5 * m * x * x
            np.maximum(worst, sign * (self.D[s] - phi), out=worst)
        return worst

    def inequality_value(self, dp, dM, q, side):
        p = self.p_base + dp[0]
        m = self.m_base + dM[0]
        speed = np.abs(p + q[0])
        sp, sm, sat = _law_pair_values(self.prob, speed)
        F = self._f_of(m)
        # min/max ranges over the two products sigma_i * F, not the laws:
        # for F < 0 the larger law gives the smaller product.
        if side == "above":
            return np.minimum(sp * F, sm * F), sat
        return np.maximum(sp * F, sm * F), sat

    def _f_of(self, m):
        op = self.prob.operator
        if op.kind == "trace":
            return m
        if op.kind == "pucci-minus":
            return op.pair.lam * np.maximum(m, 0.0) + op.pair.Lam * np.minimum(m, 0.0)
        if op.kind == "pucci-plus":
            return op.pair.Lam * np.maximum(m, 0.0) + op.pair.lam * np.minimum(m, 0.0)
        vals = [A.matrix[0, 0] * m for A in op.coefficients]
        return np.minimum.reduce(vals)

    def node_index(self, ij):
        return (int(ij[0]) + self.rho,)

    def witness(self, ij, combo_id, eta_grad, eta_hess, side, rho):
        combo = list(self.combos(eta_grad, eta_hess))[combo_id]
        dp, dM = combo
        p = float(self.p_base[ij] + dp[0])
        m = float(self.m_base[ij] + dM[0])
        return TouchingTest(
            center=self.node_index(ij), rho_test=rho, p=(p,),
            M=SymMatrix(d=1, upper=(m,)), side=side,
        )


class _State2D:
    _HESS_DIRS = (
        (1.0, 0.0),
        (0.0, 1.0),
        (np.sqrt(0.5), np.sqrt(0.5)),
        (np.sqrt(0.5), -np.sqrt(0.5)),
    )

    def __init__(self, u, grid, prob, rho):
        self.h = grid.h
        self.prob = prob
        self.rho = rho
        n = grid.n
        self.sl = slice(rho, n - rho)
        self.block_shape = (n - 2 * rho, n - 2 * rho)
        self.offsets = [
            (si, sj)
            for si in range(-rho, rho + 1)
            for sj in range(-rho, rho + 1)
            if (si, sj) != (0, 0)
        ]
        c = u[self.sl, self.sl]
        self.D = {}
        for si, sj in self.offsets:
            self.D[(si, sj)] = (
                u[rho + si : n - rho + si, rho + sj : n - rho + sj] - c
            )
        h = self.h
        D = self.D
        self.px = (D[(1, 0)] - D[(-1, 0)]) / (2 * h)
        self.py = (D[(0, 1)] - D[(0, -1)]) / (2 * h)
        self.mxx = (D[(1, 0)] + D[(-1, 0)]) / (h * h)
        self.myy = (D[(0, 1)] + D[(0, -1)]) / (h * h)
        self.mxy = (D[(1, 1)] + D[(-1, -1)] - D[(1, -1)] - D[(-1, 1)]) / (4 * h * h)

    def combos(self, eta_grad, eta_hess):
        grads = [(0.0, 0.0)]
        for e in ((1.0, 0.0), (0.0, 1.0)):
            grads.append((eta_grad * e[0], eta_grad * e[1]))
            grads.append((-eta_grad * e[0], -eta_grad * e[1]))
        hess = [(0.0, 0.0, 0.0)]
        for v in self._HESS_DIRS:
            vv = (v[0] * v[0], v[0] * v[1], v[1] * v[1])
            hess.append(tuple(eta_hess * w for w in vv))
            hess.append(tuple(-eta_hess * w for w in vv))
        for dp in grads:
            for dM in hess:
                yield dp, dM

    def touch_defect(self, dp, dM, sign):
        px = self.px + dp[0]
        py = self.py + dp[1]
        mxx = self.mxx + dM[0]
        mxy = self.mxy + dM[1]
        myy = self.myy + dM[2]
        h = self.h
        worst = np.full(self.block_shape, -np.inf)
        for si, sj in self.offsets:
            x, y = si * h, sj * h
            phi = px * x + py * y + 0.5 * (mxx * x * x + 2 * mxy * x * y + myy * y * y)
            np.maximum(worst, sign * (self.D[(si, sj)] - phi), out=worst)
        return worst

    def inequality_value(self, dp, dM, q, side):
        px = self.px + dp[0]
        py = self.py + dp[1]
        speed = np.hypot(px + q[0], py + q[1])
        sp, sm, sat = _law_pair_values(self.prob, speed)
        F = self._f_of(self.mxx + dM[0], self.mxy + dM[1], self.myy + dM[2])
        # min/max ranges over the two products sigma_i * F, not the laws:
        # for F < 0 the larger law gives the smaller product.
        if side == "above":
            return np.minimum(sp * F, sm * F), sat
        return np.maximum(sp * F, sm * F), sat

    def _f_of(self, mxx, mxy, myy):
        op = self.prob.operator
        if op.kind == "trace":
            return mxx + myy
        if op.kind in ("pucci-minus", "pucci-plus"):
            mean = 0.5 * (mxx + myy)
            rad = np.hypot(0.5 * (mxx - myy), mxy)
            e1, e2 = mean - rad, mean + rad
            lam, Lam = op.pair.lam, op.pair.Lam
            if op.kind == "pucci-minus":
                return (
                    lam * (np.maximum(e1, 0) + np.maximum(e2, 0))
                    + Lam * (np.minimum(e1, 0) + np.minimum(e2, 0))
                )
            return (
                Lam * (np.maximum(e1, 0) + np.maximum(e2, 0))
                + lam * (np.minimum(e1, 0) + np.minimum(e2, 0))
            )
        vals = [
            A.matrix[0, 0] * mxx + 2 * A.matrix[0, 1] * mxy + A.matrix[1, 1] * myy
            for A in op.coefficients
        ]
        return np.minimum.reduce(vals)

    def node_index(self, ij):
        return (int(ij[0]) + self.rho, int(ij[1]) + self.rho)

    def witness(self, ij, combo_id, eta_grad, eta_hess, side, rho):
        combo = list(self.combos(eta_grad, eta_hess))[combo_id]
        dp, dM = combo
        p = (float(self.px[ij] + dp[0]), float(self.py[ij] + dp[1]))
        M = SymMatrix(
            d=2,
            upper=(
                float(self.mxx[ij] + dM[0]),
                float(self.mxy[ij] + dM[1]),
                float(self.myy[ij] + dM[2]),
            ),
        )
        return TouchingTest(center=self.node_index(ij), rho_test=rho, p=p, M=M, side=side)
