"""Lagrange-dual solver for the joint computation/communication cooperation
problem.

The dual function splits into five independent subproblems that have
closed-form minimisers. The dual is maximised with a central-cut ellipsoid
method, and the primal schedule is then recovered from a small LP.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .lp import (InfeasibleRecovery, max_supportable_bits, recover_primal,
                 refit_local_bits)
from .model import (Allocation, ConstraintReport, EnergyBreakdown, Scenario,
                    total_energy, validate_allocation)

log = logging.getLogger(__name__)

LN2 = math.log(2.0)

# Multipliers attached to bit-valued constraints are handled in J/Mbit inside
# the ellipsoid so that all five coordinates are of order one.
BIT_UNIT = 1e6
DUAL_SCALE = np.array([1 / BIT_UNIT, 1 / BIT_UNIT, 1 / BIT_UNIT, 1.0, 1 / BIT_UNIT])


class TauRule(str, enum.Enum):
    """Sign structure of a slot-length subproblem: the objective is linear
    in the slot length with slope rho."""

    FULL = "T"      # rho < 0
    ZERO = "0"      # rho > 0
    FREE = "any"    # rho == 0; evaluated as 0

    @classmethod
    def from_rho(cls, rho: float) -> "TauRule":
        if rho < 0:
            return cls.FULL
        if rho > 0:
            return cls.ZERO
        return cls.FREE

    def length(self, T: float) -> float:
        return T if self is TauRule.FULL else 0.0


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE_TASK = "infeasible_task"
    NOT_CONVERGED = "not_converged"


@dataclass(frozen=True)
class DualPoint:
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda3: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda2, self.lambda3, self.mu1, self.mu2])

    @classmethod
    def from_array(cls, x) -> "DualPoint":
        return cls(*(float(v) for v in x))

    @property
    def is_feasible(self) -> bool:
        return min(self.lambda1, self.lambda2, self.lambda3, self.mu1) >= 0


@dataclass(frozen=True)
class Subproblem1:
    p1: float
    m1: float
    rho1: float
    alpha1: float
    beta1: float
    rule: TauRule


@dataclass(frozen=True)
class Subproblem2:
    p2: float
    rho2: float
    alpha2: float
    rule: TauRule


@dataclass(frozen=True)
class Subproblem3:
    p3: float
    rho3: float
    alpha3: float
    rule: TauRule


@dataclass(frozen=True)
class SubproblemSolution:
    sub1: Subproblem1
    sub2: Subproblem2
    sub3: Subproblem3
    l_u: float
    l_a: float
    taus: tuple[float, float, float]
    l_h: float
    values: tuple[float, float, float, float, float]

    @property
    def powers(self) -> tuple[float, float, float]:
        return (self.sub1.p1, self.sub2.p2, self.sub3.p3)


@dataclass(frozen=True)
class DualEvaluation:
    value: float
    solution: SubproblemSolution
    subgradient: np.ndarray


def _clamp(x, lo, hi):
    return min(hi, max(x, lo))


def solve_subproblem1(dual: DualPoint, scenario: Scenario) -> Subproblem1:
    """User->helper offloading and helper computing."""
    s = scenario
    lam1, mu1, mu2 = dual.lambda1, dual.mu1, dual.mu2
    a = s.snr_user_helper
    B = s.bandwidth_hz
    c, kappa = s.cycles_per_bit_helper, s.kappa_helper
    pmax = s.p_user_max_w
    m_cap = s.helper_rate_cap

    p1 = _clamp(lam1 * B / LN2 - 1.0 / a, 0.0, pmax)
    if mu2 - lam1 >= 0:
        m1 = _clamp(math.sqrt((mu2 - lam1) / (3 * kappa * c ** 3)), 0.0, m_cap)
    else:
        m1 = 0.0
    marginal = lam1 * B * a / (LN2 * (1 + p1 * a))
    alpha1 = marginal - 1.0 if p1 == pmax else 0.0
    beta1 = mu2 - lam1 - 3 * kappa * c ** 3 * m1 ** 2 if m1 == m_cap else 0.0
    rho1 = (mu1 - lam1 * s.rate_user_helper(p1) + 2 * kappa * (c * m1) ** 3
            + p1 * marginal - alpha1 * pmax + beta1 * m_cap)
    return Subproblem1(p1, m1, rho1, alpha1, beta1, TauRule.from_rho(rho1))


def solve_subproblem2(dual: DualPoint, scenario: Scenario) -> Subproblem2:
    """User broadcast slot, heard by both the helper and the AP."""
    s = scenario
    lam2, lam3, mu1 = dual.lambda2, dual.lambda3, dual.mu1
    a = s.snr_user_ap
    b = s.snr_user_helper
    k = LN2 / s.bandwidth_hz
    pmax = s.p_user_max_w

    u = k * a * b
    v = k * (a + b) - (lam2 + lam3) * a * b
    w = k - lam2 * a - lam3 * b
    disc = v * v - 4 * u * w
    if disc < 0:
        if disc < -1e-12 * v * v:
            raise ArithmeticError(f"negative discriminant {disc} in broadcast-slot power")
        disc = 0.0
    # v > 0 makes the textbook root cancel badly; use the conjugate form
    if v > 0:
        root = -2 * w / (v + math.sqrt(disc)) if w != 0 else 0.0
    else:
        root = (math.sqrt(disc) - v) / (2 * u)
    p2 = _clamp(root, 0.0, pmax)

    m_ap = lam2 * s.bandwidth_hz * a / ((1 + p2 * a) * LN2)
    m_h = lam3 * s.bandwidth_hz * b / ((1 + p2 * b) * LN2)
    alpha2 = m_h + m_ap - 1.0 if p2 == pmax else 0.0
    rho2 = (mu1 - lam2 * s.rate_user_ap(p2) + p2 * m_ap
            - lam3 * s.rate_user_helper(p2) + p2 * m_h - alpha2 * pmax)
    return Subproblem2(p2, rho2, alpha2, TauRule.from_rho(rho2))


def solve_subproblem3(dual: DualPoint, scenario: Scenario) -> Subproblem3:
    """Helper->AP forwarding slot."""
    s = scenario
    lam2, mu1 = dual.lambda2, dual.mu1
    a = s.snr_helper_ap
    pmax = s.p_helper_max_w
    p3 = _clamp(lam2 * s.bandwidth_hz / LN2 - 1.0 / a, 0.0, pmax)
    marginal = lam2 * s.bandwidth_hz * a / ((1 + p3 * a) * LN2)
    alpha3 = marginal - 1.0 if p3 == pmax else 0.0
    rho3 = mu1 + p3 * marginal - lam2 * s.rate_helper_ap(p3) - alpha3 * pmax
    return Subproblem3(p3, rho3, alpha3, TauRule.from_rho(rho3))


def solve_subproblem4(dual: DualPoint, scenario: Scenario) -> float:
    """Bits computed locally."""
    s = scenario
    if dual.mu2 <= 0:
        return 0.0
    T = s.block_length_s
    return _clamp(T * math.sqrt(dual.mu2 / (3 * s.kappa_user * s.cycles_per_bit_user ** 3)),
                  0.0, s.local_bits_cap)


def ap_bits_slope(dual: DualPoint, scenario: Scenario) -> float:
    return dual.lambda2 + dual.lambda3 + dual.mu1 / scenario.f_ap_max_hz - dual.mu2


def solve_subproblem5(dual: DualPoint, scenario: Scenario) -> float:
    """Bits offloaded to the AP: all or nothing, ties to nothing."""
    return scenario.task_bits if ap_bits_slope(dual, scenario) < 0 else 0.0


def eval_dual(dual: DualPoint, scenario: Scenario) -> DualEvaluation:
    """Dual function value, minimisers and a subgradient at ``dual``."""
    if not dual.is_feasible:
        raise ValueError(f"dual point outside the nonnegative orthant: {dual}")
    s = scenario
    T, L = s.block_length_s, s.task_bits
    lam1, lam2, lam3, mu1, mu2 = dual.as_array()

    sp1 = solve_subproblem1(dual, s)
    sp2 = solve_subproblem2(dual, s)
    sp3 = solve_subproblem3(dual, s)
    l_u = solve_subproblem4(dual, s)
    l_a = solve_subproblem5(dual, s)
    tau1, tau2, tau3 = sp1.rule.length(T), sp2.rule.length(T), sp3.rule.length(T)
    l_h = sp1.m1 * (T - tau1)

    r01_1 = s.rate_user_helper(sp1.p1)
    r0_2, r01_2 = s.rate_user_ap(sp2.p2), s.rate_user_helper(sp2.p2)
    r1_3 = s.rate_helper_ap(sp3.p3)
    kh = s.kappa_helper * s.cycles_per_bit_helper ** 3
    v1 = (tau1 * (sp1.p1 + mu1 - lam1 * r01_1)
          + (T - tau1) * (kh * sp1.m1 ** 3 + (lam1 - mu2) * sp1.m1))
    v2 = tau2 * (sp2.p2 + mu1 - lam2 * r0_2 - lam3 * r01_2)
    v3 = tau3 * (sp3.p3 + mu1 - lam2 * r1_3)
    v4 = s.kappa_user * s.cycles_per_bit_user ** 3 * l_u ** 3 / T ** 2 - mu2 * l_u
    v5 = ap_bits_slope(dual, s) * l_a
    value = v1 + v2 + v3 + v4 + v5 - mu1 * T + mu2 * L

    subgradient = np.array([
        l_h - tau1 * r01_1,
        l_a - tau2 * r0_2 - tau3 * r1_3,
        l_a - tau2 * r01_2,
        tau1 + tau2 + tau3 + l_a / s.f_ap_max_hz - T,
        L - l_u - l_h - l_a,
    ])
    sol = SubproblemSolution(sp1, sp2, sp3, l_u, l_a, (tau1, tau2, tau3), l_h,
                             (v1, v2, v3, v4, v5))
    return DualEvaluation(value, sol, subgradient)


# --------------------------------------------------------------------------
# Dual maximisation


@dataclass(frozen=True)
class EllipsoidConfig:
    """Settings in normalised multiplier units (J/Mbit and W)."""

    center: float = 1.0
    radius: float = 1e3
    eps_rel: float = 1e-6
    eps_abs: float = 1e-12
    max_iters: int = 5000


@dataclass
class EllipsoidResult:
    dual: DualPoint
    value: float
    converged: bool
    iterations: int
    best_values: list[float] = field(repr=False, default_factory=list)
    evaluation: DualEvaluation | None = field(repr=False, default=None)


def ellipsoid_maximize(scenario: Scenario, config: EllipsoidConfig = EllipsoidConfig()) -> EllipsoidResult:
    """Maximise the dual function over lambda >= 0, mu1 >= 0 (mu2 free).

    Central-cut ellipsoid iterations in normalised coordinates. Points
    outside the orthant get a feasibility cut on the violated coordinate;
    feasible points get an objective cut along the subgradient. Stops when
    the ellipsoid bound on the remaining improvement, sqrt(g' P g), falls
    below eps_abs + eps_rel * |g|. The best feasible centre is returned.
    """
    n = 5
    x = np.full(n, config.center)
    P = np.eye(n) * config.radius ** 2
    best = None
    best_x = None
    best_eval = None
    trace: list[float] = []
    converged = False
    k = 0
    for k in range(1, config.max_iters + 1):
        if np.any(x[:4] < 0):
            i = int(np.argmin(x[:4]))
            a = np.zeros(n)
            a[i] = -1.0  # keep x_i >= current value
        else:
            ev = eval_dual(DualPoint.from_array(x * DUAL_SCALE), scenario)
            if best is None or ev.value > best:
                best, best_x, best_eval = ev.value, x.copy(), ev
            grad = ev.subgradient * DUAL_SCALE
            a = -grad
            width = math.sqrt(max(float(grad @ P @ grad), 0.0))
            if width <= config.eps_abs + config.eps_rel * abs(ev.value):
                trace.append(best)
                converged = True
                break
        if best is not None:
            trace.append(best)
        Pa = P @ a
        denom = float(a @ Pa)
        if denom <= 0:
            converged = best is not None
            break
        g = Pa / math.sqrt(denom)
        x = x - g / (n + 1)
        P = (n * n / (n * n - 1.0)) * (P - (2.0 / (n + 1)) * np.outer(g, g))
        P = 0.5 * (P + P.T)
    if best is None:
        raise RuntimeError("ellipsoid never visited a dual-feasible point")
    return EllipsoidResult(DualPoint.from_array(best_x * DUAL_SCALE), best, converged, k,
                           trace, best_eval)


# --------------------------------------------------------------------------
# Full pipeline


@dataclass
class SolveReport:
    status: SolveStatus
    allocation: Allocation | None = None
    energy: EnergyBreakdown | None = None
    dual_value: float = float("nan")
    duality_gap: float = float("nan")
    iterations: int = 0
    dual: DualPoint | None = None
    l_max_bits: float = float("nan")
    constraints: ConstraintReport | None = field(default=None, repr=False)

    @property
    def energy_j(self) -> float:
        return self.energy.e_total_j if self.energy is not None else float("nan")


def gap_tolerance(primal: float) -> float:
    return max(1e-6, 1e-3 * abs(primal))


def solve_joint(scenario: Scenario, config: EllipsoidConfig = EllipsoidConfig(),
                tolerance: float = 1e-9) -> SolveReport:
    """Minimum-energy schedule for one scenario.

    Feasibility gate, dual maximisation, closed-form powers/rates at the
    optimal multipliers, LP recovery of slot lengths, validation. One retry
    with a 10x tighter ellipsoid tolerance if recovery fails.
    """
    s = scenario
    l_max, _ = max_supportable_bits(s)
    if s.task_bits > l_max:
        return SolveReport(SolveStatus.INFEASIBLE_TASK, l_max_bits=l_max)
    if s.task_bits == 0:
        alloc = Allocation()
        return SolveReport(SolveStatus.OPTIMAL, alloc, total_energy(alloc, s), 0.0, 0.0,
                           dual=DualPoint(), l_max_bits=l_max,
                           constraints=validate_allocation(alloc, s, tolerance))

    report = None
    for attempt in range(2):
        result = ellipsoid_maximize(s, config)
        report = _recover(s, result, tolerance)
        report.l_max_bits = l_max
        if report.status is SolveStatus.OPTIMAL:
            return report
        log.info("recovery attempt %d failed; tightening ellipsoid tolerance", attempt + 1)
        config = EllipsoidConfig(config.center, config.radius, config.eps_rel / 10,
                                 config.eps_abs / 10, config.max_iters)
    return report


def _recover(s: Scenario, result: EllipsoidResult, tolerance: float) -> SolveReport:
    """Primal schedule from the multipliers.

    Two recoveries are tried: the plain LP with the local bits read off the
    multipliers, and the same LP with the local bits re-optimised (robust
    when the multipliers pin l_u slightly off). The cheaper valid one wins.
    """
    sol = result.evaluation.solution
    report = SolveReport(SolveStatus.NOT_CONVERGED, dual_value=result.value,
                         iterations=result.iterations, dual=result.dual)
    best = None
    for recover in (lambda: recover_primal(sol.powers, sol.sub1.m1, sol.l_u, s),
                    lambda: refit_local_bits(sol.powers, sol.sub1.m1, s)):
        try:
            _, _, alloc = recover()
        except InfeasibleRecovery:
            continue
        energy = total_energy(alloc, s)
        checks = validate_allocation(alloc, s, tolerance)
        candidate = (checks.feasible, -energy.e_total_j, alloc, energy, checks)
        if best is None or candidate[:2] > best[:2]:
            best = candidate
    if best is None:
        return report
    feasible, _, alloc, energy, checks = best
    gap = energy.e_total_j - result.value
    report.allocation, report.energy, report.duality_gap = alloc, energy, gap
    report.constraints = checks
    tol = gap_tolerance(energy.e_total_j)
    if feasible and -tol <= gap <= tol:
        report.status = SolveStatus.OPTIMAL
    return report
