"""Shared scenario builders. Gains are computed by hand here rather than
through the experiments module so model tests stay independent of it."""
import itertools

import numpy as np

from meccoop.model import Scenario


def gain(d):
    return 1e-6 * (d / 10.0) ** -3


def default_scenario(D=120.0, T=0.1, L=2e4, **changes):
    s = Scenario(
        bandwidth_hz=1e6,
        gain_user_helper=gain(D),
        gain_user_ap=gain(250.0),
        gain_helper_ap=gain(250.0 - D),
        noise_helper_w=1e-10,
        noise_ap_w=1e-10,
        p_user_max_w=10.0,
        p_helper_max_w=10.0,
        cycles_per_bit_user=1e3,
        cycles_per_bit_helper=1e3,
        kappa_user=1e-27,
        kappa_helper=0.3e-27,
        f_user_max_hz=2e9,
        f_helper_max_hz=3e9,
        f_ap_max_hz=5e9,
        block_length_s=T,
        task_bits=L,
    )
    return s.replace(**changes) if changes else s


def random_scenarios(n, seed):
    """(D, T, L) drawn from D in [50, 200] m, T in [0.02, 0.2] s, L in [0.005, 0.05] Mbit."""
    rng = np.random.default_rng(seed)
    return [default_scenario(D=rng.uniform(50, 200), T=rng.uniform(0.02, 0.2),
                           L=rng.uniform(0.005, 0.05) * 1e6) for _ in range(n)]


def random_duals(n, seed):
    """Multipliers in SI units around the magnitudes seen at the optimum."""
    from meccoop.dual import DualPoint
    rng = np.random.default_rng(seed)
    return [DualPoint(rng.uniform(0, 3e-6), rng.uniform(0, 3e-6), rng.uniform(0, 3e-6),
                      rng.uniform(0, 0.5), rng.uniform(-1e-6, 3e-6)) for _ in range(n)]


def vertex_enumeration(c, A_ub, b_ub, A_eq, b_eq, upper):
    """Minimum over every basic solution of a bounded LP, or None if infeasible.

    Constraint set: A_ub x <= b_ub, A_eq x = b_eq, 0 <= x <= upper.
    """
    n = len(c)
    G = np.vstack([A_ub, -np.eye(n), np.eye(n)])
    h = np.concatenate([b_ub, np.zeros(n), upper])
    m_eq = len(b_eq)
    best = None
    for rows in itertools.combinations(range(len(h)), n - m_eq):
        M = np.vstack([A_eq, G[list(rows)]])
        rhs = np.concatenate([b_eq, h[list(rows)]])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, rhs)
        if np.all(G @ x <= h + 1e-9) and np.allclose(A_eq @ x, b_eq, atol=1e-9):
            v = float(c @ x)
            if best is None or v < best:
                best = v
    return best


def random_lp(rng):
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 6))
    m_eq = int(rng.integers(0, min(n, 2)))
    c = rng.normal(size=n)
    A_ub = rng.normal(size=(m, n))
    b_ub = rng.normal(size=m) + 0.5
    A_eq = rng.normal(size=(m_eq, n))
    b_eq = rng.normal(size=m_eq)
    upper = rng.uniform(0.5, 5.0, size=n)
    return c, A_ub, b_ub, A_eq, b_eq, upper


def l_max_sweep(s, n=400):
    """Independent 2-D sweep: tau1 on a grid, then tau2 on a grid with tau3
    fixed by the relay equality and l_a limited by both the broadcast rate
    and the leftover AP time."""
    T = s.block_length_s
    r01 = s.rate_user_helper(s.p_user_max_w)
    r0 = s.rate_user_ap(s.p_user_max_w)
    r1 = s.rate_helper_ap(s.p_helper_max_w)
    l_u = T * s.f_user_max_hz / s.cycles_per_bit_user
    best = 0.0
    for tau1 in np.linspace(0, T, n):
        l_h = (T - tau1) * s.f_helper_max_hz / s.cycles_per_bit_helper
        if l_h > tau1 * r01:
            continue
        tau2 = np.linspace(0, T - tau1, n)
        tau3 = tau2 * max(r01 - r0, 0.0) / r1
        ok = tau1 + tau2 + tau3 <= T
        l_a = np.minimum(tau2 * r01, s.f_ap_max_hz * (T - tau1 - tau2 - tau3))
        l_a = np.where(ok, np.maximum(l_a, 0.0), 0.0)
        best = max(best, l_u + l_h + float(l_a.max()))
    return best


# Each objective is written in the original (energy, slot, bits) variables,
# independently of the closed forms.

def sub_objectives(d, s):
    lam1, lam2, lam3, mu1, mu2 = d.as_array()
    T = s.block_length_s

    def f1(E, tau, l_h):
        p = E / tau if tau > 0 else 0.0
        helper = s.kappa_helper * (s.cycles_per_bit_helper * l_h) ** 3 / (T - tau) ** 2 \
            if l_h > 0 else 0.0
        return E + helper + mu1 * tau - lam1 * tau * s.rate_user_helper(p) + (lam1 - mu2) * l_h

    def f2(E, tau):
        p = E / tau if tau > 0 else 0.0
        return E + mu1 * tau - lam2 * tau * s.rate_user_ap(p) - lam3 * tau * s.rate_user_helper(p)

    def f3(E, tau):
        p = E / tau if tau > 0 else 0.0
        return E + mu1 * tau - lam2 * tau * s.rate_helper_ap(p)

    def f4(l_u):
        return s.kappa_user * (s.cycles_per_bit_user * l_u) ** 3 / T ** 2 - mu2 * l_u

    def f5(l_a):
        return (lam2 + lam3 + mu1 / s.f_ap_max_hz - mu2) * l_a

    return f1, f2, f3, f4, f5
