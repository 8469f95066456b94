"""Benchmark schemes: local computing only, computation cooperation (helper
computes part of the task), and communication cooperation (helper relays
part of the task to the AP).

The restricted problems are two- or three-dimensional and convex, so they
are solved directly by bracketing grids and bounded scalar minimisation,
independently of the dual solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .dual import SolveStatus, solve_joint
from .model import Allocation, Scenario, invert_rate, total_energy

SCHEMES = ("local", "computation_coop", "communication_coop", "joint")


@dataclass(frozen=True)
class SchemeResult:
    scheme: str
    energy_j: float
    allocation: Allocation | None
    feasible: bool
    status: str = "optimal"


def _infeasible(name: str) -> SchemeResult:
    return SchemeResult(name, math.inf, None, False, "infeasible")


def _minimize_convex(f, lo, hi, grid=17, xtol=1e-10):
    """Minimise a convex f on [lo, hi]: coarse grid bracket, then Brent.

    Returns (x, f(x)).
    """
    if hi <= lo:
        return lo, f(lo)
    xs = np.linspace(lo, hi, grid)
    fs = np.array([f(x) for x in xs])
    i = int(np.argmin(fs))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    best_x, best_f = float(xs[i]), float(fs[i])
    if math.isfinite(best_f):
        res = minimize_scalar(f, bounds=(a, b), method="bounded",
                              options={"xatol": xtol * max(hi - lo, 1e-300)})
        if res.fun < best_f:
            best_x, best_f = float(res.x), float(res.fun)
    return best_x, best_f


def local_only(scenario: Scenario) -> SchemeResult:
    """Whole task computed at the user over the full block."""
    s = scenario
    if s.cycles_per_bit_user * s.task_bits > s.block_length_s * s.f_user_max_hz:
        return _infeasible("local")
    alloc = Allocation(bits_local=s.task_bits)
    return SchemeResult("local", total_energy(alloc, s).e_total_j, alloc, True)


def _local_energy(s: Scenario, l_u: float) -> float:
    return s.kappa_user * (s.cycles_per_bit_user * l_u) ** 3 / s.block_length_s ** 2


def computation_coop(scenario: Scenario) -> SchemeResult:
    """Split between local computing and helper computing; no AP offloading."""
    s = scenario
    T, L = s.block_length_s, s.task_bits
    r01_max = s.rate_user_helper(s.p_user_max_w)
    helper_rate = s.helper_rate_cap
    lo = max(0.0, L - s.local_bits_cap)
    # offloading and helper computing share the block
    hi = min(L, T / (1 / r01_max + 1 / helper_rate))
    if lo > hi:
        return _infeasible("computation_coop")

    def helper(l_h):
        """Best (tau1, energy) for sending and computing l_h at the helper."""
        if l_h <= 0:
            return 0.0, 0.0
        t_lo = l_h / r01_max
        t_hi = T - l_h / helper_rate
        if t_lo > t_hi:
            return math.nan, math.inf

        def cost(tau1):
            if tau1 <= 0 or tau1 >= T:
                return math.inf
            p1 = invert_rate(l_h, tau1, s.gain_user_helper, s.noise_helper_w,
                             s.bandwidth_hz, s.capacity_gap)
            return tau1 * min(p1, s.p_user_max_w) + s.kappa_helper * (
                s.cycles_per_bit_helper * l_h) ** 3 / (T - tau1) ** 2

        return _minimize_convex(cost, t_lo, t_hi)

    def outer(l_h):
        return helper(l_h)[1] + _local_energy(s, L - l_h)

    l_h, _ = _minimize_convex(outer, lo, hi)
    tau1, _ = helper(l_h)
    p1 = invert_rate(l_h, tau1, s.gain_user_helper, s.noise_helper_w, s.bandwidth_hz,
                     s.capacity_gap) if l_h > 0 else 0.0
    alloc = Allocation(tau1_s=tau1, p1_w=min(p1, s.p_user_max_w),
                       bits_local=L - l_h, bits_helper=l_h)
    return SchemeResult("computation_coop", total_energy(alloc, s).e_total_j, alloc, True)


def _relay_power(s: Scenario, l_a, tau2, tau3):
    """Cheapest (p2, p3, energy) carrying l_a bits over the relay slots."""
    if l_a <= 0:
        return 0.0, 0.0, 0.0
    B, gap = s.bandwidth_hz, s.capacity_gap
    r1_max = s.rate_helper_ap(s.p_helper_max_w)
    p_first = invert_rate(l_a, tau2, s.gain_user_helper, s.noise_helper_w, B, gap)
    p_direct = invert_rate(max(l_a - tau3 * r1_max, 0.0), tau2, s.gain_user_ap,
                           s.noise_ap_w, B, gap)
    lo = max(p_first, p_direct)
    if not lo <= s.p_user_max_w * (1 + 1e-12):
        return math.nan, math.nan, math.inf
    lo = min(lo, s.p_user_max_w)

    def forward(p2):
        residual = l_a - tau2 * s.rate_user_ap(p2)
        if residual <= 1e-9 * l_a:
            return 0.0
        return invert_rate(residual, tau3, s.gain_helper_ap, s.noise_ap_w, B, gap)

    def cost(p2):
        p3 = forward(p2)
        if not p3 <= s.p_helper_max_w * (1 + 1e-12):
            return math.inf
        return tau2 * p2 + (tau3 * p3 if p3 > 0 else 0.0)

    p2, e = _minimize_convex(cost, lo, s.p_user_max_w, grid=9)
    p3 = min(forward(p2), s.p_helper_max_w)
    return p2, p3, e


def communication_coop(scenario: Scenario, literal_time_budget: bool = False) -> SchemeResult:
    """Split between local computing and relayed offloading to the AP.

    The relay slots share the block with the AP execution time l_a/f_a.
    With ``literal_time_budget`` the relay slots instead fill the whole
    block (tau2 + tau3 = T) and AP execution time is ignored.
    """
    s = scenario
    T, L = s.block_length_s, s.task_bits
    r01_max = s.rate_user_helper(s.p_user_max_w)
    r0_max = s.rate_user_ap(s.p_user_max_w)
    r1_max = s.rate_helper_ap(s.p_helper_max_w)

    def available(l_a):
        return T if literal_time_budget else T - l_a / s.f_ap_max_hz

    def tau2_range(l_a):
        """Feasible broadcast-slot lengths at full power; tau3 takes the rest."""
        avail = available(l_a)
        lo, hi = l_a / r01_max, avail
        # tau2 r0 + (avail - tau2) r1 >= l_a
        need = l_a - avail * r1_max
        if r0_max > r1_max:
            lo = max(lo, need / (r0_max - r1_max))
        elif r0_max < r1_max:
            hi = min(hi, need / (r0_max - r1_max))
        elif need > 0:
            return 1.0, 0.0
        return max(lo, 0.0), hi

    def feasible(l_a):
        lo, hi = tau2_range(l_a)
        return lo <= hi

    la_lo = max(0.0, L - s.local_bits_cap)
    if not feasible(la_lo):
        return _infeasible("communication_coop")
    la_hi = L
    if not feasible(la_hi):
        a, b = la_lo, la_hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            a, b = (mid, b) if feasible(mid) else (a, mid)
            if b - a <= 1e-12 * L:
                break
        la_hi = a

    def relay(l_a):
        """Best (tau2, energy) for relaying l_a bits."""
        if l_a <= 0:
            return 0.0, 0.0
        lo, hi = tau2_range(l_a)
        if lo > hi:
            return math.nan, math.inf
        return _minimize_convex(
            lambda t2: _relay_power(s, l_a, t2, available(l_a) - t2)[2] if t2 > 0 else math.inf,
            lo, hi, grid=9)

    def outer(l_a):
        return relay(l_a)[1] + _local_energy(s, L - l_a)

    l_a, _ = _minimize_convex(outer, la_lo, la_hi)
    if l_a > 0:
        tau2, _ = relay(l_a)
        tau3 = available(l_a) - tau2
        p2, p3, _ = _relay_power(s, l_a, tau2, tau3)
        if p3 == 0:
            tau3 = 0.0
    else:
        tau2 = tau3 = p2 = p3 = 0.0
    alloc = Allocation(tau2_s=tau2, tau3_s=tau3, p2_w=p2, p3_w=p3,
                       bits_local=L - l_a, bits_ap=l_a)
    return SchemeResult("communication_coop", total_energy(alloc, s).e_total_j, alloc, True)


def joint(scenario: Scenario, **kwargs) -> SchemeResult:
    report = solve_joint(scenario, **kwargs)
    if report.status is SolveStatus.INFEASIBLE_TASK:
        return _infeasible("joint")
    return SchemeResult("joint", report.energy_j, report.allocation,
                        report.status is SolveStatus.OPTIMAL, report.status.value)


def run_scheme(name: str, scenario: Scenario, literal_time_budget: bool = False) -> SchemeResult:
    if name == "local":
        return local_only(scenario)
    if name == "computation_coop":
        return computation_coop(scenario)
    if name == "communication_coop":
        return communication_coop(scenario, literal_time_budget)
    if name == "joint":
        return joint(scenario)
    raise ValueError(f"unknown scheme {name!r}; expected one of {SCHEMES}")
