"""Three-node system model: link rates, offloading and computing energies,
and constraint checks for candidate schedules.

All quantities are SI: bits, seconds, watts, joules, hertz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

DEFAULT_TOLERANCE = 1e-9
_LN2 = math.log(2.0)


class DomainError(ValueError):
    """Raised when an operation is evaluated outside its mathematical domain."""


@dataclass(frozen=True)
class Scenario:
    """Physical and computational parameters of one problem instance."""

    bandwidth_hz: float
    gain_user_helper: float
    gain_user_ap: float
    gain_helper_ap: float
    noise_helper_w: float
    noise_ap_w: float
    p_user_max_w: float
    p_helper_max_w: float
    cycles_per_bit_user: float
    cycles_per_bit_helper: float
    kappa_user: float
    kappa_helper: float
    f_user_max_hz: float
    f_helper_max_hz: float
    f_ap_max_hz: float
    block_length_s: float
    task_bits: float
    capacity_gap: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite, got {value}")
            if f.name == "task_bits":
                if value < 0:
                    raise ValueError(f"task_bits must be >= 0, got {value}")
            elif f.name == "capacity_gap":
                if value < 1:
                    raise ValueError(f"capacity_gap must be >= 1, got {value}")
            elif value <= 0:
                raise ValueError(f"{f.name} must be > 0, got {value}")

    def replace(self, **changes) -> "Scenario":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return Scenario(**values)

    # Link rates at a given power. The noise is scaled by the capacity gap.
    def rate_user_helper(self, power_w):
        return achievable_rate(power_w, self.gain_user_helper, self.noise_helper_w,
                               self.bandwidth_hz, self.capacity_gap)

    def rate_user_ap(self, power_w):
        return achievable_rate(power_w, self.gain_user_ap, self.noise_ap_w,
                               self.bandwidth_hz, self.capacity_gap)

    def rate_helper_ap(self, power_w):
        return achievable_rate(power_w, self.gain_helper_ap, self.noise_ap_w,
                               self.bandwidth_hz, self.capacity_gap)

    @property
    def snr_user_helper(self) -> float:
        """Received SNR per watt on the user->helper link."""
        return self.gain_user_helper / (self.capacity_gap * self.noise_helper_w)

    @property
    def snr_user_ap(self) -> float:
        return self.gain_user_ap / (self.capacity_gap * self.noise_ap_w)

    @property
    def snr_helper_ap(self) -> float:
        return self.gain_helper_ap / (self.capacity_gap * self.noise_ap_w)

    @property
    def local_bits_cap(self) -> float:
        """Most bits the user can compute within the block at full clock."""
        return self.block_length_s * self.f_user_max_hz / self.cycles_per_bit_user

    @property
    def helper_rate_cap(self) -> float:
        """Helper computing throughput (bits/s) at full clock."""
        return self.f_helper_max_hz / self.cycles_per_bit_helper


@dataclass(frozen=True)
class Allocation:
    """A candidate schedule: slot lengths, transmit powers, bit partition.

    The AP execution slot is not stored; see :meth:`tau4_s`.
    """

    tau1_s: float = 0.0
    tau2_s: float = 0.0
    tau3_s: float = 0.0
    p1_w: float = 0.0
    p2_w: float = 0.0
    p3_w: float = 0.0
    bits_local: float = 0.0
    bits_helper: float = 0.0
    bits_ap: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{f.name} must be finite and >= 0, got {value}")

    def tau4_s(self, scenario: Scenario) -> float:
        return self.bits_ap / scenario.f_ap_max_hz

    @property
    def taus(self) -> tuple[float, float, float]:
        return (self.tau1_s, self.tau2_s, self.tau3_s)

    @property
    def powers(self) -> tuple[float, float, float]:
        return (self.p1_w, self.p2_w, self.p3_w)

    @property
    def bits(self) -> tuple[float, float, float]:
        return (self.bits_local, self.bits_helper, self.bits_ap)


@dataclass(frozen=True)
class EnergyBreakdown:
    e_offload_1_j: float
    e_offload_2_j: float
    e_offload_3_j: float
    e_compute_user_j: float
    e_compute_helper_j: float
    e_total_j: float = field(init=False)

    def __post_init__(self):
        total = self.e_offload_1_j
        total += self.e_offload_2_j
        total += self.e_offload_3_j
        total += self.e_compute_user_j
        total += self.e_compute_helper_j
        object.__setattr__(self, "e_total_j", total)


@dataclass(frozen=True)
class ConstraintCheck:
    label: str
    slack: float
    scale: float
    satisfied: bool


@dataclass(frozen=True)
class ConstraintReport:
    checks: tuple[ConstraintCheck, ...]
    tolerance: float

    @property
    def feasible(self) -> bool:
        return all(c.satisfied for c in self.checks)

    @property
    def violations(self) -> list[ConstraintCheck]:
        return [c for c in self.checks if not c.satisfied]

    def __getitem__(self, label: str) -> ConstraintCheck:
        for c in self.checks:
            if c.label == label:
                return c
        raise KeyError(label)


def path_loss_gain(distance_m, beta0, d0_m, exponent):
    """Linear power gain ``beta0 * (d / d0) ** -exponent``."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    gain = beta0 * (d / d0_m) ** (-exponent)
    return float(gain) if gain.ndim == 0 else gain


def achievable_rate(power_w, gain, noise_w, bandwidth_hz, capacity_gap=1.0):
    """Rate in bits/s: ``B log2(1 + P h / (gap * noise))``.

    Accepts scalars or numpy arrays for ``power_w``.
    """
    if np.ndim(power_w) == 0:
        if power_w < 0:
            raise DomainError(f"power must be >= 0, got {power_w}")
        return bandwidth_hz * math.log1p(power_w * gain / (capacity_gap * noise_w)) / _LN2
    power_w = np.asarray(power_w, dtype=float)
    if np.any(power_w < 0):
        raise DomainError("power must be >= 0")
    return bandwidth_hz * np.log1p(power_w * gain / (capacity_gap * noise_w)) / _LN2


def invert_rate(bits, duration_s, gain, noise_w, bandwidth_hz, capacity_gap=1.0):
    """Power needed to push ``bits`` through the link in ``duration_s``.

    Returns ``inf`` when positive bits must be sent in zero time.
    """
    if np.ndim(bits) == 0 and np.ndim(duration_s) == 0:
        if bits < 0 or duration_s < 0:
            raise DomainError("bits and duration must be >= 0")
        if bits == 0:
            return 0.0
        if duration_s == 0:
            return math.inf
        exponent = bits / (duration_s * bandwidth_hz) * _LN2
        if exponent > 700:
            return math.inf
        return math.expm1(exponent) * capacity_gap * noise_w / gain
    bits, duration_s = np.broadcast_arrays(np.asarray(bits, float), np.asarray(duration_s, float))
    out = np.zeros(bits.shape)
    pos = bits > 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        exponent = np.where(pos, bits / (duration_s * bandwidth_hz), 0.0)
        out = np.where(pos, np.expm1(exponent * _LN2) * capacity_gap * noise_w / gain, 0.0)
    out = np.where(pos & (duration_s <= 0), np.inf, out)
    return out if out.ndim else float(out)


def compute_energy(bits, window_s, kappa, cycles_per_bit):
    """CPU energy ``kappa c^3 l^3 / window^2`` at the constant clock finishing on time."""
    if bits < 0:
        raise DomainError(f"bits must be >= 0, got {bits}")
    if bits == 0:
        return 0.0
    if window_s <= 0:
        raise DomainError("positive bits need a positive computing window")
    return kappa * cycles_per_bit ** 3 * bits ** 3 / window_s ** 2


def total_energy(alloc: Allocation, scenario: Scenario) -> EnergyBreakdown:
    """Energy of a schedule. A slot of zero length spends nothing."""
    T = scenario.block_length_s
    if alloc.bits_helper > 0 and alloc.tau1_s >= T:
        raise DomainError("helper has no computing time left (tau1 = T)")
    e1 = alloc.tau1_s * alloc.p1_w if alloc.tau1_s > 0 else 0.0
    e2 = alloc.tau2_s * alloc.p2_w if alloc.tau2_s > 0 else 0.0
    e3 = alloc.tau3_s * alloc.p3_w if alloc.tau3_s > 0 else 0.0
    eu = compute_energy(alloc.bits_local, T, scenario.kappa_user, scenario.cycles_per_bit_user)
    eh = compute_energy(alloc.bits_helper, T - alloc.tau1_s, scenario.kappa_helper,
                        scenario.cycles_per_bit_helper)
    return EnergyBreakdown(e1, e2, e3, eu, eh)


def _leq(label, lhs, rhs, tol):
    scale = max(abs(lhs), abs(rhs))
    slack = rhs - lhs
    return ConstraintCheck(label, slack, scale, slack >= -tol * scale)


def _eq(label, lhs, rhs, tol):
    scale = max(abs(lhs), abs(rhs))
    slack = -abs(lhs - rhs)
    return ConstraintCheck(label, slack, scale, slack >= -tol * scale)


def validate_allocation(alloc: Allocation, scenario: Scenario,
                        tolerance: float = DEFAULT_TOLERANCE) -> ConstraintReport:
    """Check every constraint of the energy-minimisation problem.

    Slack is ``rhs - lhs`` for inequalities and ``-|lhs - rhs|`` for
    equalities; an entry is satisfied when slack >= -tolerance times the
    larger side.
    """
    s = scenario
    T = s.block_length_s
    tau1, tau2, tau3 = alloc.taus
    p1, p2, p3 = alloc.powers
    # a zero-length slot carries nothing whatever power is stored
    r1 = tau1 * s.rate_user_helper(p1) if tau1 > 0 else 0.0
    r2_direct = tau2 * s.rate_user_ap(p2) if tau2 > 0 else 0.0
    r2_helper = tau2 * s.rate_user_helper(p2) if tau2 > 0 else 0.0
    r3 = tau3 * s.rate_helper_ap(p3) if tau3 > 0 else 0.0
    l_u, l_h, l_a = alloc.bits
    checks = [
        _eq("task_partition", l_u + l_h + l_a, s.task_bits, tolerance),
        _leq("helper_link", l_h, r1, tolerance),
        _leq("relay_to_ap", l_a, r2_direct + r3, tolerance),
        _leq("relay_first_hop", l_a, r2_helper, tolerance),
        _leq("user_cpu", s.cycles_per_bit_user * l_u, T * s.f_user_max_hz, tolerance),
        _leq("helper_cpu", s.cycles_per_bit_helper * l_h, (T - tau1) * s.f_helper_max_hz,
             tolerance),
        _leq("time_budget", tau1 + tau2 + tau3 + l_a / s.f_ap_max_hz, T, tolerance),
        _leq("p1_max", p1, s.p_user_max_w, tolerance),
        _leq("p2_max", p2, s.p_user_max_w, tolerance),
        _leq("p3_max", p3, s.p_helper_max_w, tolerance),
    ]
    for i, tau in enumerate(alloc.taus, start=1):
        checks.append(_leq(f"tau{i}_max", tau, T, tolerance))
    return ConstraintReport(tuple(checks), tolerance)


def local_only_allocation(scenario: Scenario) -> Allocation:
    """Everything computed at the user; feasible iff the user CPU cap allows it."""
    return Allocation(bits_local=scenario.task_bits)
