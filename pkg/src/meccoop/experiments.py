"""Parameter sweeps over block length, task size or helper position.

Configs are plain text, one ``section.key = value`` per line. A
``[section]`` header prefixes the keys that follow it; ``#`` starts a
comment. Units follow the config key suffixes and are converted to SI in
:func:`build_scenario`.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dual import SolveReport, SolveStatus, solve_joint
from .model import Scenario, path_loss_gain
from .schemes import SCHEMES, SchemeResult, run_scheme

SWEEP_VARIABLES = ("T", "L", "D")
ALLOC_COLUMNS = ("tau1_s", "tau2_s", "tau3_s", "p1_w", "p2_w", "p3_w",
                 "bits_local", "bits_helper", "bits_ap")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    user_ap_distance_m: float = 250.0
    helper_distance_m: float = 120.0
    beta0_db: float = -60.0
    d0_m: float = 10.0
    pathloss_exponent: float = 3.0
    bandwidth_mhz: float = 1.0
    noise_dbm: float = -70.0
    capacity_gap: float = 1.0
    user_kappa: float = 1e-27
    user_cycles_per_bit: float = 1e3
    user_f_max_ghz: float = 2.0
    user_p_max_dbm: float = 40.0
    helper_kappa: float = 0.3e-27
    helper_cycles_per_bit: float = 1e3
    helper_f_max_ghz: float = 3.0
    helper_p_max_dbm: float = 40.0
    ap_f_max_ghz: float = 5.0
    block_length_s: float = 0.1
    bits_mbits: float = 0.02
    sweep_variable: str = "T"
    sweep_start: float = 0.02
    sweep_stop: float = 0.10
    sweep_step: float = 0.01
    schemes: tuple[str, ...] = SCHEMES
    output: str = ""
    seed: int = 0  # reserved: the model is deterministic
    workers: int = 1
    literal_comm_time: bool = False
    tolerance: float = 1e-9

    def __post_init__(self):
        if not 0 < self.helper_distance_m < self.user_ap_distance_m:
            raise ConfigError("helper distance must lie strictly between user and AP")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep.variable must be one of {SWEEP_VARIABLES}")
        if not (self.sweep_step > 0 and self.sweep_stop >= self.sweep_start):
            raise ConfigError("sweep range is empty")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ConfigError(f"unknown schemes {unknown}; expected a subset of {SCHEMES}")
        if self.workers < 1:
            raise ConfigError("run.workers must be >= 1")

    def sweep_values(self) -> list[float]:
        n = int(math.floor((self.sweep_stop - self.sweep_start) / self.sweep_step + 1e-9)) + 1
        # rounding keeps 0.02 + 3*0.01 from printing as 0.049999...
        return [round(self.sweep_start + i * self.sweep_step, 12) for i in range(n)]


# dotted config key -> ExperimentConfig field
KEYS = {
    "layout.user_ap_distance_m": "user_ap_distance_m",
    "layout.helper_distance_m": "helper_distance_m",
    "pathloss.beta0_db": "beta0_db",
    "pathloss.d0_m": "d0_m",
    "pathloss.exponent": "pathloss_exponent",
    "radio.bandwidth_mhz": "bandwidth_mhz",
    "radio.noise_dbm": "noise_dbm",
    "radio.capacity_gap": "capacity_gap",
    "user.kappa": "user_kappa",
    "user.cycles_per_bit": "user_cycles_per_bit",
    "user.f_max_ghz": "user_f_max_ghz",
    "user.p_max_dbm": "user_p_max_dbm",
    "helper.kappa": "helper_kappa",
    "helper.cycles_per_bit": "helper_cycles_per_bit",
    "helper.f_max_ghz": "helper_f_max_ghz",
    "helper.p_max_dbm": "helper_p_max_dbm",
    "ap.f_max_ghz": "ap_f_max_ghz",
    "task.block_length_s": "block_length_s",
    "task.bits_mbits": "bits_mbits",
    "sweep.variable": "sweep_variable",
    "sweep.start": "sweep_start",
    "sweep.stop": "sweep_stop",
    "sweep.step": "sweep_step",
    "run.schemes": "schemes",
    "run.output": "output",
    "run.seed": "seed",
    "run.workers": "workers",
    "run.tolerance": "tolerance",
    "schemes.literal_comm_time": "literal_comm_time",
}


def _convert(name: str, raw: str):
    kind = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind == "str":
            return raw
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {name}") from None


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values = {}
    section = ""
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        if section and "." not in key:
            key = f"{section}.{key}"
        if key not in KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[KEYS[key]] = _convert(KEYS[key], raw)
    try:
        return replace(base or ExperimentConfig(), **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def _dbm_to_w(dbm):
    return 10 ** ((dbm - 30) / 10)


def build_scenario(config: ExperimentConfig, sweep_value: float | None = None) -> Scenario:
    """Scenario at one sweep point (``None`` keeps the config's base values).

    T is in seconds, L in Mbits, D in meters.
    """
    c = config
    T, L, D = c.block_length_s, c.bits_mbits, c.helper_distance_m
    if sweep_value is not None:
        if c.sweep_variable == "T":
            T = sweep_value
        elif c.sweep_variable == "L":
            L = sweep_value
        else:
            D = sweep_value
    if not 0 < D < c.user_ap_distance_m:
        raise ConfigError(f"helper distance {D} outside (0, {c.user_ap_distance_m})")
    beta0 = 10 ** (c.beta0_db / 10)
    gain = lambda d: path_loss_gain(d, beta0, c.d0_m, c.pathloss_exponent)
    noise = _dbm_to_w(c.noise_dbm)
    try:
        return Scenario(
            bandwidth_hz=c.bandwidth_mhz * 1e6,
            gain_user_helper=gain(D),
            gain_user_ap=gain(c.user_ap_distance_m),
            gain_helper_ap=gain(c.user_ap_distance_m - D),
            noise_helper_w=noise,
            noise_ap_w=noise,
            p_user_max_w=_dbm_to_w(c.user_p_max_dbm),
            p_helper_max_w=_dbm_to_w(c.helper_p_max_dbm),
            cycles_per_bit_user=c.user_cycles_per_bit,
            cycles_per_bit_helper=c.helper_cycles_per_bit,
            kappa_user=c.user_kappa,
            kappa_helper=c.helper_kappa,
            f_user_max_hz=c.user_f_max_ghz * 1e9,
            f_helper_max_hz=c.helper_f_max_ghz * 1e9,
            f_ap_max_hz=c.ap_f_max_ghz * 1e9,
            block_length_s=T,
            task_bits=L * 1e6,
            capacity_gap=c.capacity_gap,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class SweepRow:
    sweep_value: float
    results: dict[str, SchemeResult] = field(default_factory=dict)
    joint: SolveReport | None = None

    @property
    def converged(self) -> bool:
        return self.joint is None or self.joint.status is not SolveStatus.NOT_CONVERGED


def run_point(config: ExperimentConfig, value: float) -> SweepRow:
    s = build_scenario(config, value)
    row = SweepRow(value)
    row.joint = solve_joint(s, tolerance=config.tolerance)
    for name in config.schemes:
        if name == "joint":
            rep = row.joint
            if rep.status is SolveStatus.INFEASIBLE_TASK:
                row.results[name] = SchemeResult(name, math.inf, None, False, "infeasible")
            else:
                row.results[name] = SchemeResult(name, rep.energy_j, rep.allocation,
                                                 rep.status is SolveStatus.OPTIMAL,
                                                 rep.status.value)
        else:
            row.results[name] = run_scheme(name, s, config.literal_comm_time)
    return row


def _point(args):
    return run_point(*args)


def run_sweep(config: ExperimentConfig) -> list[SweepRow]:
    """Every sweep point, in sweep order. Empty scheme list gives no rows."""
    if not config.schemes:
        return []
    jobs = [(config, v) for v in config.sweep_values()]
    if config.workers == 1:
        return [run_point(*j) for j in jobs]
    with ProcessPoolExecutor(config.workers) as pool:
        return list(pool.map(_point, jobs))


def _fmt(x: float) -> str:
    return format(x, ".17g")


def csv_header(config: ExperimentConfig) -> list[str]:
    head = [f"sweep_{config.sweep_variable}"]
    head += [f"energy_{name}_j" for name in config.schemes]
    head += [f"joint_{c}" for c in ALLOC_COLUMNS]
    return head + ["joint_dual_value_j", "joint_duality_gap_j", "joint_status"]


def format_rows(config: ExperimentConfig, rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(config))
    for row in rows:
        out = [_fmt(row.sweep_value)]
        for name in config.schemes:
            r = row.results[name]
            out.append(_fmt(r.energy_j) if r.allocation is not None else "infeasible")
        rep = row.joint
        if rep.allocation is not None:
            a = rep.allocation
            out += [_fmt(getattr(a, c)) for c in ALLOC_COLUMNS]
            out += [_fmt(rep.dual_value), _fmt(rep.duality_gap)]
        else:
            out += [""] * (len(ALLOC_COLUMNS) + 2)
        out.append(rep.status.value)
        w.writerow(out)
    return buf.getvalue()


def sweep_to_csv(config: ExperimentConfig, path=None) -> tuple[str, list[SweepRow]]:
    rows = run_sweep(config)
    text = format_rows(config, rows)
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text, rows


def as_array(rows: list[SweepRow], scheme: str) -> np.ndarray:
    """(sweep value, energy) pairs for one scheme; infeasible points are nan."""
    return np.array([(r.sweep_value, r.results[scheme].energy_j
                      if r.results[scheme].allocation is not None else np.nan)
                     for r in rows])
