"""Dense two-phase simplex for tiny LPs, plus the two LPs of the solver:
the maximum supportable task size and the primal recovery step.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .model import Allocation, Scenario

_PIVOT_EPS = 1e-11
_MAX_PIVOTS = 10_000


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    pass


class InfeasibleRecovery(RuntimeError):
    """Recovery LP has no solution; the multipliers are not accurate enough."""


@dataclass
class LinearProgram:
    """minimize c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lower <= x <= upper."""

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "ub")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "eq")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, float).ravel()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, float).ravel()
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bounds must have one entry per variable")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ValueError("bounds must allow a finite value")

    @property
    def n(self) -> int:
        return self.c.size

    def residuals(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Scaled violations of every row and bound (positive = violated)."""
        viol = [self.A_ub @ x - self.b_ub, np.abs(self.A_eq @ x - self.b_eq)]
        scale = [1 + np.abs(self.b_ub), 1 + np.abs(self.b_eq)]
        viol += [self.lower - x, x - self.upper]
        scale += [1 + np.abs(np.where(np.isfinite(self.lower), self.lower, 0)),
                  1 + np.abs(np.where(np.isfinite(self.upper), self.upper, 0))]
        return np.concatenate(viol), np.concatenate(scale)

    def is_satisfied(self, x: np.ndarray, rtol: float = 1e-8) -> bool:
        viol, scale = self.residuals(x)
        return bool(np.all(viol <= rtol * scale))


def _rows(A, b, n, name):
    if A is None and b is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.size == 0:
        A = A.reshape(0, n)
    if A.shape[1] != n or A.shape[0] != b.size:
        raise ValueError(f"A_{name} has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    value: float = float("nan")
    pivots: int = field(default=0, repr=False)


def _to_standard_form(lp: LinearProgram):
    """Map to min c'z, A_ub' z <= b_ub', A_eq' z = b_eq', z >= 0.

    Returns the standard-form data and an affine map x = offset + M z.
    """
    n = lp.n
    cols = []  # (column of M, offset contribution)
    offset = np.zeros(n)
    extra_ub = []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lo):
            offset[j] = lo
            cols.append(e)
            if np.isfinite(hi):
                extra_ub.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    M = np.array(cols).T
    nz = M.shape[1]
    c = lp.c @ M
    A_ub = lp.A_ub @ M
    b_ub = lp.b_ub - lp.A_ub @ offset
    if extra_ub:
        rows = np.zeros((len(extra_ub), nz))
        for k, (col, width) in enumerate(extra_ub):
            rows[k, col] = 1.0
        A_ub = np.vstack([A_ub, rows])
        b_ub = np.concatenate([b_ub, [w for _, w in extra_ub]])
    A_eq = lp.A_eq @ M
    b_eq = lp.b_eq - lp.A_eq @ offset
    const = float(lp.c @ offset)
    return c, A_ub, b_ub, A_eq, b_eq, M, offset, const


def _equilibrate(A, b):
    """Unit infinity-norm rows, then unit infinity-norm columns."""
    r = np.abs(A).max(axis=1) if A.size else np.zeros(0)
    r[r == 0] = 1.0
    A = A / r[:, None]
    b = b / r
    s = np.abs(A).max(axis=0) if A.size else np.ones(A.shape[1])
    s[s == 0] = 1.0
    return A / s, b, s


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _simplex(T, basis, allowed, counter):
    """Bland's-rule primal simplex on tableau T (last row = reduced costs,
    last column = rhs). Returns False if unbounded."""
    m = T.shape[0] - 1
    while True:
        if counter[0] > _MAX_PIVOTS:
            raise LpError("pivot limit exceeded")
        cost = T[-1, :-1]
        entering = -1
        for j in np.flatnonzero(allowed):
            if cost[j] < -_PIVOT_EPS:
                entering = j
                break
        if entering < 0:
            return True
        column = T[:m, entering]
        best_row = -1
        best_ratio = np.inf
        for i in range(m):
            if column[i] <= _PIVOT_EPS:
                continue
            ratio = T[i, -1] / column[i]
            tie = 1e-14 * max(1.0, abs(ratio))
            if best_row < 0 or ratio < best_ratio - tie or (
                    ratio <= best_ratio + tie and basis[i] < basis[best_row]):
                best_ratio = ratio
                best_row = i
        if best_row < 0:
            return False
        _pivot(T, basis, best_row, entering)
        counter[0] += 1


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve a small dense LP by two-phase simplex with Bland's rule.

    Deterministic for identical input. Rows and columns are equilibrated
    before pivoting, and an optimal answer is audited against the original
    constraints.
    """
    c, A_ub, b_ub, A_eq, b_eq, M, offset, const = _to_standard_form(lp)
    nz = c.size
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    A = np.vstack([np.hstack([A_ub, np.eye(m_ub)]),
                   np.hstack([A_eq, np.zeros((m_eq, m_ub))])])
    b = np.concatenate([b_ub, b_eq])
    m, ncols = A.shape
    A, b, colscale = _equilibrate(A, b)
    cost = np.concatenate([c, np.zeros(m_ub)]) / colscale

    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # A slack whose row kept its sign is a ready basic column; every other
    # row gets an artificial.
    basis = np.full(m, -1)
    for i in range(m_ub):
        if not neg[i]:
            basis[i] = nz + i
    art_rows = np.flatnonzero(basis < 0)
    n_art = art_rows.size
    T = np.zeros((m + 1, ncols + n_art + 1))
    T[:m, :ncols] = A
    T[:m, -1] = b
    for k, i in enumerate(art_rows):
        T[i, ncols + k] = 1.0
        basis[i] = ncols + k
    # slack columns were rescaled by equilibration; renormalise their basic rows
    for i in range(m):
        if basis[i] < ncols:
            T[i] /= T[i, basis[i]]

    counter = [0]
    if n_art:
        T[-1, ncols:ncols + n_art] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        allowed = np.ones(ncols + n_art, dtype=bool)
        _simplex(T, basis, allowed, counter)
        if -T[-1, -1] > 1e-9 * (1.0 + np.abs(b).max(initial=0.0)):
            return LpSolution(LpStatus.INFEASIBLE, pivots=counter[0])
        # drive remaining artificials out of the basis; drop redundant rows
        keep = np.ones(m + 1, dtype=bool)
        for i in range(m):
            if basis[i] >= ncols:
                cand = np.flatnonzero(np.abs(T[i, :ncols]) > 1e-9)
                if cand.size:
                    _pivot(T, basis, i, cand[0])
                else:
                    keep[i] = False
        T = T[keep]
        basis = basis[keep[:-1]]
        T = np.delete(T, np.s_[ncols:ncols + n_art], axis=1)

    T[-1] = 0.0
    T[-1, :ncols] = cost
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    if not _simplex(T, basis, np.ones(ncols, dtype=bool), counter):
        return LpSolution(LpStatus.UNBOUNDED, pivots=counter[0])

    y = np.zeros(ncols)
    y[basis] = T[:-1, -1]
    z = y[:nz] / colscale[:nz]
    x = offset + M @ z
    if not lp.is_satisfied(x):
        raise LpError("simplex optimum fails its own constraint audit")
    return LpSolution(LpStatus.OPTIMAL, x, float(lp.c @ x), counter[0])


# --------------------------------------------------------------------------
# Applications


def max_supportable_bits(scenario: Scenario) -> tuple[float, Allocation]:
    """Largest task the system can finish in one block.

    Every node runs at full power and full clock; variables are
    (tau1, tau2, tau3, l_u, l_h, l_a). Returns the maximum and a witness
    schedule achieving it.
    """
    s = scenario
    T = s.block_length_s
    r01 = s.rate_user_helper(s.p_user_max_w)
    r0 = s.rate_user_ap(s.p_user_max_w)
    r1 = s.rate_helper_ap(s.p_helper_max_w)
    # bits enter in Mbit so that time and bit columns are comparable
    mb = 1e6
    c = np.array([0, 0, 0, -1, -1, -1.0])
    A_ub = np.array([
        [-r01 / mb, 0, 0, 0, 1, 0],
        [0, -r01 / mb, 0, 0, 0, 1],
    ])
    b_ub = np.zeros(2)
    A_eq = np.array([
        [0, 0, 0, s.cycles_per_bit_user, 0, 0],
        [s.f_helper_max_hz, 0, 0, 0, s.cycles_per_bit_helper * mb, 0],
        [1, 1, 1, 0, 0, mb / s.f_ap_max_hz],
        [0, (r0 - r01) / mb, r1 / mb, 0, 0, 0],
    ])
    b_eq = np.array([T * s.f_user_max_hz / mb, T * s.f_helper_max_hz, T, 0.0])
    upper = np.array([T, T, T, np.inf, np.inf, np.inf])
    sol = solve_lp(LinearProgram(c, A_ub, b_ub, A_eq, b_eq, upper=upper))
    if sol.status is not LpStatus.OPTIMAL:
        raise LpError(f"capacity LP returned {sol.status.value}")
    tau1, tau2, tau3, l_u, l_h, l_a = np.maximum(sol.x, 0.0)
    witness = Allocation(
        tau1_s=min(tau1, T), tau2_s=min(tau2, T), tau3_s=min(tau3, T),
        p1_w=s.p_user_max_w if tau1 > 0 else 0.0,
        p2_w=s.p_user_max_w if tau2 > 0 else 0.0,
        p3_w=s.p_helper_max_w if tau3 > 0 else 0.0,
        bits_local=l_u * mb, bits_helper=l_h * mb, bits_ap=l_a * mb,
    )
    return (l_u + l_h + l_a) * mb, witness


def _recovery_lp(p_opt, m1_opt, scenario, l_u=None):
    """Recovery LP over (tau1, tau2, tau3, l_a[Mbit]) with the local bits
    fixed, or over (..., l_u[Mbit]) minimising l_u when ``l_u`` is None."""
    s = scenario
    T = s.block_length_s
    L = s.task_bits
    p1, p2, p3 = (float(p) for p in p_opt)
    r01_1 = s.rate_user_helper(p1)
    r0_2 = s.rate_user_ap(p2)
    r01_2 = s.rate_user_helper(p2)
    r1_3 = s.rate_helper_ap(p3)
    helper_cost = s.kappa_helper * (s.cycles_per_bit_helper * m1_opt) ** 3
    mb = 1e6
    c = np.array([p1 - helper_cost, p2, p3, 0.0])
    A_ub = np.array([
        [-(m1_opt + r01_1) / mb, 0, 0, 0],
        [0, -r0_2 / mb, -r1_3 / mb, 1],
        [0, -r01_2 / mb, 0, 1],
        [1, 1, 1, mb / s.f_ap_max_hz],
    ])
    b_ub = np.array([-m1_opt * T / mb, 0, 0, T])
    A_eq = np.array([[-m1_opt / mb, 0, 0, 1]])
    upper = np.array([T, T, T, np.inf])
    if l_u is not None:
        b_eq = np.array([(L - l_u - m1_opt * T) / mb])
        return LinearProgram(c, A_ub, b_ub, A_eq, b_eq, upper=upper), helper_cost * T
    A_ub = np.hstack([A_ub, np.zeros((4, 1))])
    A_eq = np.array([[-m1_opt / mb, 0, 0, 1, 1]])
    b_eq = np.array([(L - m1_opt * T) / mb])
    upper = np.append(upper, min(L, s.local_bits_cap) / mb)
    return LinearProgram([0, 0, 0, 0, 1.0], A_ub, b_ub, A_eq, b_eq, upper=upper), 0.0


def _assemble(x, p_opt, m1_opt, l_u, scenario):
    T = scenario.block_length_s
    p1, p2, p3 = (float(p) for p in p_opt)
    tau1, tau2, tau3 = (float(min(max(t, 0.0), T)) for t in x[:3])
    l_h = m1_opt * (T - tau1)
    l_a = scenario.task_bits - l_u - l_h
    if l_a <= 1e-9 * scenario.task_bits:
        # rounding residue; keep the partition exact
        l_a = 0.0
        l_u = max(scenario.task_bits - l_h, 0.0)
    alloc = Allocation(
        tau1_s=tau1, tau2_s=tau2, tau3_s=tau3,
        p1_w=p1 if tau1 > 0 else 0.0,
        p2_w=p2 if tau2 > 0 else 0.0,
        p3_w=p3 if tau3 > 0 else 0.0,
        bits_local=l_u, bits_helper=l_h, bits_ap=l_a,
    )
    return (tau1, tau2, tau3), l_a, alloc


def recover_primal(p_opt, m1_opt: float, l_u_opt: float, scenario: Scenario):
    """Slot lengths and AP bits given the powers, helper computing rate and
    local bits read off the optimal multipliers.

    Minimises the offloading plus helper-computing energy, which is linear
    in the slot lengths once powers and the helper rate are fixed.
    Returns ``(taus, l_a, allocation)``. Raises :class:`InfeasibleRecovery`
    if no schedule is consistent with the inputs.
    """
    lp, _ = _recovery_lp(p_opt, m1_opt, scenario, l_u_opt)
    sol = solve_lp(lp)
    if sol.status is not LpStatus.OPTIMAL:
        raise InfeasibleRecovery(f"recovery LP is {sol.status.value}")
    return _assemble(sol.x, p_opt, m1_opt, l_u_opt, scenario)


def refit_local_bits(p_opt, m1_opt: float, scenario: Scenario, xtol: float = 1e-9):
    """Recovery with the local bit count re-optimised.

    With powers and helper rate fixed, the optimal recovery cost is convex
    and piecewise linear in l_u; adding the cubic local computing energy
    keeps it convex, so a bounded scalar search finds the best l_u. This
    rescues multipliers that pin l_u slightly off, where the plain recovery
    is infeasible or leaves a visible duality gap.
    """
    s = scenario
    low_lp, _ = _recovery_lp(p_opt, m1_opt, s)
    low = solve_lp(low_lp)
    if low.status is not LpStatus.OPTIMAL:
        raise InfeasibleRecovery("no local bit count makes the recovery feasible")
    lo = float(low.x[4]) * 1e6
    hi = min(s.task_bits, s.local_bits_cap)
    lo = min(lo, hi)
    ku = s.kappa_user * s.cycles_per_bit_user ** 3 / s.block_length_s ** 2

    def cost(l_u):
        lp, const = _recovery_lp(p_opt, m1_opt, s, l_u)
        sol = solve_lp(lp)
        if sol.status is not LpStatus.OPTIMAL:
            return np.inf
        return sol.value + const + ku * l_u ** 3

    if hi - lo > xtol * max(hi, 1.0):
        res = minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                              options={"xatol": xtol * max(hi, 1.0)})
        candidates = [lo, hi, float(res.x)]
    else:
        candidates = [hi]
    best = min(candidates, key=cost)
    return recover_primal(p_opt, m1_opt, best, s)
