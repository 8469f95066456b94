"""Brute-force reference minimiser of the joint energy problem.

Grid search over slot lengths and bit partition with closed-form or
line-searched powers. Shares only the rate/energy model with the dual
solver, so it can be used to validate it. Accuracy is limited by the grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Allocation, Scenario, invert_rate, total_energy

_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class GridSpec:
    """Resolution of the brute-force search.

    tau_points: points on each of the tau1 and tau2 axes. tau3 is not
        gridded: it takes whatever time is left, since a longer forwarding
        slot never costs more energy.
    bit_points: points on each of the local and helper bit axes (the AP
        share is the remainder).
    power_points: golden-section steps for the broadcast power.
    refinements: zoom rounds around the incumbent, each shrinking every
        axis span by ``shrink``.
    """

    tau_points: int = 25
    bit_points: int = 40
    power_points: int = 60
    refinements: int = 2
    shrink: float = 5.0

    def __post_init__(self):
        if min(self.tau_points, self.bit_points, self.power_points) < 2:
            raise ValueError("every grid axis needs at least 2 points")
        if self.refinements < 0 or self.shrink <= 1:
            raise ValueError("refinements must be >= 0 and shrink > 1")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """From ``"tau,bits,power,refinements"`` (trailing fields optional)."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        names = ["tau_points", "bit_points", "power_points", "refinements"]
        if not 1 <= len(parts) <= len(names):
            raise ValueError(f"bad grid spec {text!r}")
        return cls(**{n: int(p) for n, p in zip(names, parts)})


MODES = ("joint", "computation", "communication")


def _relay_cost(s: Scenario, tau2, tau3, l_a, steps):
    """Cheapest broadcast + forward energy for l_a bits; inf if infeasible.

    Returns (cost, p2, p3) broadcast to a common shape.
    """
    tau2, tau3, l_a = np.broadcast_arrays(tau2, tau3, l_a)
    B, gap = s.bandwidth_hz, s.capacity_gap
    h01, h0, h1 = s.gain_user_helper, s.gain_user_ap, s.gain_helper_ap
    n1, n0 = s.noise_helper_w, s.noise_ap_w
    pu, ph = s.p_user_max_w, s.p_helper_max_w

    active = (l_a > 0) & (tau2 > 0) & (tau3 >= 0)
    t2 = np.where(active, tau2, 1.0)
    t3 = np.where(active, tau3, 0.0)
    la = np.where(active, l_a, 0.0)
    r1_max = B * math.log2(1 + ph * h1 / (gap * n0))
    lo_helper = invert_rate(la, t2, h01, n1, B, gap)
    lo_forward = invert_rate(np.maximum(la - t3 * r1_max, 0.0), t2, h0, n0, B, gap)
    lo = np.maximum(lo_helper, lo_forward)
    feasible = active & (lo <= pu)
    lo = np.where(feasible, lo, 0.0)
    hi = np.full(lo.shape, pu)

    def cost(p2):
        residual = la - t2 * B * np.log2(1 + p2 * h0 / (gap * n0))
        residual = np.where(residual > 1e-9 * np.maximum(la, 1.0), residual, 0.0)
        p3 = invert_rate(residual, t3, h1, n0, B, gap)
        p3 = np.where(p3 <= ph * (1 + 1e-12), np.minimum(p3, ph), np.inf)
        forward = np.where(np.isfinite(p3), t3 * np.nan_to_num(p3, posinf=0.0), np.inf)
        return t2 * p2 + forward, p3

    a, b = lo.copy(), hi.copy()
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = cost(c)[0], cost(d)[0]
    for _ in range(steps):
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        d_new = np.where(left, c, a + _GOLDEN * (b - a))
        c_new = np.where(left, b - _GOLDEN * (b - a), d)
        c, d = c_new, d_new
        fc, fd = cost(c)[0], cost(d)[0]
    best_p2 = np.where(fc <= fd, c, d)
    best_cost, best_p3 = cost(best_p2)
    # endpoints guard against a minimiser sitting on the interval boundary
    for p2 in (lo, hi):
        f, p3 = cost(p2)
        better = f < best_cost
        best_cost = np.where(better, f, best_cost)
        best_p2 = np.where(better, p2, best_p2)
        best_p3 = np.where(better, p3, best_p3)

    best_cost = np.where(feasible, best_cost, np.inf)
    best_cost = np.where(l_a == 0, 0.0, best_cost)
    best_cost = np.where(l_a < 0, np.inf, best_cost)
    best_p2 = np.where(l_a > 0, best_p2, 0.0)
    best_p3 = np.where(l_a > 0, best_p3, 0.0)
    return best_cost, best_p2, best_p3


def _helper_cost(s: Scenario, tau1, l_h):
    T = s.block_length_s
    tau1, l_h = np.broadcast_arrays(tau1, l_h)
    window = T - tau1
    ok = (l_h >= 0) & ((l_h == 0) | ((tau1 > 0) & (window > 0)))
    ok &= s.cycles_per_bit_helper * l_h <= window * s.f_helper_max_hz * (1 + 1e-12)
    t1 = np.where(ok, tau1, 1.0)
    lh = np.where(ok, l_h, 0.0)
    p1 = invert_rate(lh, t1, s.gain_user_helper, s.noise_helper_w, s.bandwidth_hz,
                     s.capacity_gap)
    ok &= p1 <= s.p_user_max_w
    w = np.where(window > 0, window, 1.0)
    cost = t1 * p1 + s.kappa_helper * (s.cycles_per_bit_helper * lh) ** 3 / w ** 2
    return np.where(ok, np.where(lh > 0, cost, 0.0), np.inf)


def _local_cost(s: Scenario, l_u):
    ok = (l_u >= 0) & (l_u <= s.task_bits) & (
        s.cycles_per_bit_user * l_u <= s.block_length_s * s.f_user_max_hz * (1 + 1e-12))
    lu = np.where(ok, l_u, 0.0)
    cost = s.kappa_user * (s.cycles_per_bit_user * lu) ** 3 / s.block_length_s ** 2
    return np.where(ok, cost, np.inf)


def _axis(center, span, lo, hi, n):
    """n points spanning ``span``, placed around ``center`` inside [lo, hi]."""
    span = min(span, hi - lo)
    start = min(max(center - span / 2, lo), hi - span)
    return start + np.linspace(0.0, span, n)


def _search(s, mode, tau1, tau2, u0, h0, step, n_u, n_h, steps):
    """Evaluate one grid; returns (energy, tau1, tau2, l_u, l_h)."""
    T, L = s.block_length_s, s.task_bits
    l_u = u0 + step * np.arange(n_u)
    l_h = h0 + step * np.arange(n_h)
    k = np.arange(n_u + n_h - 1)
    l_a = L - u0 - h0 - step * k
    l_a = np.where(np.abs(l_a) <= 1e-9 * max(L, 1.0), 0.0, l_a)

    U = _local_cost(s, l_u)                                    # (n_u,)
    H = _helper_cost(s, tau1[:, None], l_h[None, :])           # (n1, n_h)
    tau3 = (T - tau1[:, None, None] - tau2[None, :, None]
            - l_a[None, None, :] / s.f_ap_max_hz)              # (n1, n2, K)
    R, _, _ = _relay_cost(s, tau2[None, :, None], np.maximum(tau3, 0.0),
                          l_a[None, None, :], steps)
    R = np.where(tau3 >= -1e-15 * T, R, np.inf)
    # time must also fit when nothing goes to the AP
    R = np.where(tau1[:, None, None] + tau2[None, :, None] <= T * (1 + 1e-12), R, np.inf)
    if mode == "computation":
        R = np.where(l_a[None, None, :] == 0, R, np.inf)

    idx = np.arange(n_u)[:, None] + np.arange(n_h)[None, :]    # (n_u, n_h) -> k
    total = (U[None, None, :, None] + H[:, None, None, :]
             + R[:, :, idx])                                   # (n1, n2, n_u, n_h)
    flat = int(np.argmin(total))
    best = float(total.flat[flat])
    i1, i2, iu, ih = np.unravel_index(flat, total.shape)
    return best, float(tau1[i1]), float(tau2[i2]), float(l_u[iu]), float(l_h[ih])


def _assemble(s: Scenario, tau1, tau2, l_u, l_h, steps) -> Allocation:
    T, L = s.block_length_s, s.task_bits
    l_u, l_h = max(l_u, 0.0), max(l_h, 0.0)
    l_a = max(L - l_u - l_h, 0.0)
    if l_a <= 1e-9 * max(L, 1.0):
        l_a = 0.0
        l_u = L - l_h
    if l_h == 0:
        tau1 = 0.0
    if l_a == 0:
        tau2 = 0.0
    tau3 = max(T - tau1 - tau2 - l_a / s.f_ap_max_hz, 0.0) if l_a > 0 else 0.0
    p1 = invert_rate(l_h, tau1, s.gain_user_helper, s.noise_helper_w, s.bandwidth_hz,
                     s.capacity_gap) if l_h > 0 else 0.0
    _, p2, p3 = _relay_cost(s, np.array(tau2), np.array(tau3), np.array(l_a), steps)
    p2, p3 = float(p2), float(p3)
    if p3 == 0.0:
        tau3 = 0.0
    return Allocation(tau1_s=tau1, tau2_s=tau2, tau3_s=tau3,
                      p1_w=min(float(p1), s.p_user_max_w), p2_w=p2,
                      p3_w=min(p3, s.p_helper_max_w),
                      bits_local=l_u, bits_helper=l_h, bits_ap=l_a)


def brute_force_min_energy(scenario: Scenario, grid: GridSpec = GridSpec(),
                           mode: str = "joint") -> tuple[float, Allocation | None]:
    """Minimum energy found on the grid, and the schedule attaining it.

    ``mode`` restricts the search: "computation" pins l_a = tau2 = tau3 = 0,
    "communication" pins l_h = tau1 = 0. Returns ``(inf, None)`` when no
    grid point is feasible.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    s = scenario
    T, L = s.block_length_s, s.task_bits
    if L == 0:
        return 0.0, Allocation()

    n_t, n_b = grid.tau_points, grid.bit_points
    tau_span = T
    bit_span = L
    tau1 = np.linspace(0.0, T, n_t) if mode != "communication" else np.zeros(1)
    tau2 = np.linspace(0.0, T, n_t) if mode != "computation" else np.zeros(1)
    n_h = n_b if mode != "communication" else 1
    u0 = h0 = 0.0
    step = L / (n_b - 1)

    best = _search(s, mode, tau1, tau2, u0, h0, step, n_b, n_h, grid.power_points)
    for _ in range(grid.refinements):
        if not math.isfinite(best[0]):
            break
        _, t1, t2, lu, lh = best
        tau_span /= grid.shrink
        bit_span /= grid.shrink
        if mode != "communication":
            tau1 = _axis(t1, tau_span, 0.0, T, n_t)
        if mode != "computation":
            tau2 = _axis(t2, tau_span, 0.0, T, n_t)
        step = bit_span / (n_b - 1)
        u0 = _axis(lu, bit_span, 0.0, L, n_b)[0]
        if mode != "communication":
            h0 = _axis(lh, bit_span, 0.0, L, n_b)[0]
        candidate = _search(s, mode, tau1, tau2, u0, h0, step, n_b, n_h, grid.power_points)
        if candidate[0] < best[0]:
            best = candidate

    if not math.isfinite(best[0]):
        return math.inf, None
    alloc = _assemble(s, *best[1:], grid.power_points)
    return total_energy(alloc, s).e_total_j, alloc
