"""Acceptance criteria, one test each. Every test records a PASS/FAIL line
that is printed in the pytest summary (and directly when run with -s)."""
import functools
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from helpers import (l_max_sweep, default_scenario, random_duals, random_lp, random_scenarios,
                     sub_objectives, vertex_enumeration)
from meccoop import cli
from meccoop.dual import DualPoint, SolveStatus, ellipsoid_maximize, eval_dual, solve_joint
from meccoop.lp import LinearProgram, LpStatus, max_supportable_bits, solve_lp
from meccoop.model import Allocation, total_energy
from meccoop.oracle import GridSpec, brute_force_min_energy
from meccoop.schemes import communication_coop, computation_coop, local_only



def record(n, name, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    ACCEPTANCE.append((n, verdict, name, detail))
    print(f"[{verdict}] {n:2d}. {name}: {detail}")
    assert ok, detail


@functools.lru_cache(maxsize=None)
def twenty_scenarios():
    """Joint and oracle runs on the 20 randomized scenarios, timed."""
    out = []
    t0 = time.perf_counter()
    for s in random_scenarios(20, seed=2024):
        t = time.perf_counter()
        rep = solve_joint(s)
        t_solve = time.perf_counter() - t
        e_oracle, _ = brute_force_min_energy(s, GridSpec())
        out.append((s, rep, t_solve, e_oracle))
    return out, time.perf_counter() - t0


def test_01_local_closed_form():
    s = default_scenario(T=0.1, L=0.02e6)
    e = local_only(s).energy_j
    times = []
    for _ in range(20):
        t = time.perf_counter()
        local_only(s)
        times.append(time.perf_counter() - t)
    rel = abs(e - 8e-4) / 8e-4
    record(1, "local-only closed form", rel <= 1e-9 and min(times) < 1e-3,
           f"E = {e:.12g} J, rel err {rel:.1e}, {min(times) * 1e6:.0f} us")


def test_02_oracle_equivalence():
    runs, elapsed = twenty_scenarios()
    rel = [abs(rep.energy_j - e) / e for _, rep, _, e in runs]
    record(2, "dual solver vs brute-force oracle", max(rel) <= 0.02 and elapsed <= 60,
           f"max rel diff {max(rel):.2e} over 20 scenarios, {elapsed:.1f} s total")


def test_03_strong_duality():
    runs, _ = twenty_scenarios()
    bad = [rep for _, rep, _, _ in runs
           if rep.status is not SolveStatus.OPTIMAL
           or abs(rep.duality_gap) > max(1e-6, 1e-3 * rep.energy_j)]
    worst = max(abs(rep.duality_gap) / max(1e-6, 1e-3 * rep.energy_j) for _, rep, _, _ in runs)
    slowest = max(t for _, _, t, _ in runs)
    record(3, "strong duality", not bad and slowest < 1.0,
           f"{len(bad)} violations, worst gap/tolerance {worst:.2e}, slowest solve {slowest:.2f} s")


def test_04_block_length_ordering():
    Ts = [0.02, 0.03, 0.05, 0.1]
    table = {}
    for T in Ts:
        s = default_scenario(D=120, T=T, L=0.02e6)
        table[T] = (local_only(s).energy_j, computation_coop(s).energy_j,
                    communication_coop(s).energy_j, solve_joint(s).energy_j)
    a = all(j <= min(loc, comp, comm) + 1e-6 for loc, comp, comm, j in table.values())
    b_start = table[0.02][2] < table[0.02][1]
    b_reverse = any(table[T][1] < table[T][2] for T in Ts[1:])
    c = all(comp <= loc + 1e-12 and comm <= loc + 1e-12 for loc, comp, comm, _ in table.values())
    first_reverse = next((T for T in Ts[1:] if table[T][1] < table[T][2]), None)
    record(4, "block-length sweep ordering", a and b_start and b_reverse and c,
           f"(a) joint lowest {a}; (b) comm<comp at T=0.02 {b_start}, reversed from "
           f"T={first_reverse}; (c) coop <= local {c}")


def test_05_task_size_behaviour():
    small = default_scenario(T=0.1, L=0.01e6)
    large = default_scenario(T=0.1, L=0.08e6)
    e_loc_s, e_joint_s = local_only(small).energy_j, solve_joint(small).energy_j
    e_loc_l, e_joint_l = local_only(large).energy_j, solve_joint(large).energy_j
    close = abs(e_loc_s - e_joint_s) / e_joint_s
    gain = 1 - e_joint_l / e_loc_l
    record(5, "task-size sweep behaviour", close <= 0.05 and gain > 0.20,
           f"local vs joint at 0.01 Mbit: {close:.1%} apart; joint saves {gain:.1%} at 0.08 Mbit")


def test_06_subproblem_minimality():
    s = default_scenario(T=0.05, L=3e4)
    T = s.block_length_s
    rng = np.random.default_rng(6)
    violations = 0
    for d in random_duals(10, seed=66):
        v = eval_dual(d, s).solution.values
        f1, f2, f3, f4, f5 = sub_objectives(d, s)
        for _ in range(200):
            t = rng.uniform(0, T, size=3)
            checks = [
                (v[0], f1(rng.uniform(0, t[0] * s.p_user_max_w), t[0],
                          rng.uniform(0, (T - t[0]) * s.helper_rate_cap))),
                (v[1], f2(rng.uniform(0, t[1] * s.p_user_max_w), t[1])),
                (v[2], f3(rng.uniform(0, t[2] * s.p_helper_max_w), t[2])),
                (v[3], f4(rng.uniform(0, s.local_bits_cap))),
                (v[4], f5(rng.uniform(0, s.task_bits))),
            ]
            violations += sum(closed > rand + 1e-12 * (1 + abs(closed)) for closed, rand in checks)
    record(6, "per-subproblem minimality", violations == 0,
           f"{violations} violations in 10 duals x 200 points x 5 subproblems")


def test_07_weak_duality():
    violations = worst = 0
    for k, (D, T, L) in enumerate([(120, 0.1, 2e4), (60, 0.05, 1e4), (180, 0.2, 5e4),
                                   (120, 0.02, 3e4), (90, 0.15, 1e5)]):
        s = default_scenario(D=D, T=T, L=L)
        primal = total_energy(Allocation(bits_local=L), s).e_total_j
        # half spread over the orthant, half scattered around the dual optimum
        rng = np.random.default_rng(700 + k)
        centre = ellipsoid_maximize(s).dual.as_array()
        near = [DualPoint.from_array(centre * rng.lognormal(0, 0.3, 5)) for _ in range(50)]
        for d in random_duals(50, seed=700 + k) + near:
            g = eval_dual(d, s).value
            worst = max(worst, g / primal)
            violations += g > primal
    record(7, "weak duality", violations == 0,
           f"{violations} violations in 500 evaluations, max g/primal {worst:.3f}")


def test_08_feasibility_gate():
    rng = np.random.default_rng(8)
    worst = 0.0
    gate_ok = True
    for _ in range(10):
        s = default_scenario(D=rng.uniform(50, 200), T=rng.uniform(0.02, 0.2))
        l_max, _ = max_supportable_bits(s)
        worst = max(worst, abs(l_max - l_max_sweep(s)) / l_max)
    for T in (0.02, 0.1):
        s = default_scenario(T=T)
        l_max, _ = max_supportable_bits(s)
        above = solve_joint(s.replace(task_bits=l_max * (1 + 1e-3))).status
        below = solve_joint(s.replace(task_bits=l_max * (1 - 1e-3))).status
        gate_ok &= above is SolveStatus.INFEASIBLE_TASK and below is not SolveStatus.INFEASIBLE_TASK
    record(8, "feasibility gate", worst <= 5e-3 and gate_ok,
           f"max rel diff vs sweep oracle {worst:.2e}; gate at L_max(1 +/- 1e-3) {gate_ok}")


def test_09_lp_suite():
    rng = np.random.default_rng(9)
    matched = mismatched = 0
    while matched + mismatched < 50:
        c, A_ub, b_ub, A_eq, b_eq, upper = random_lp(rng)
        expect = vertex_enumeration(c, A_ub, b_ub, A_eq, b_eq, upper)
        if expect is None:
            continue
        sol = solve_lp(LinearProgram(c, A_ub, b_ub, A_eq, b_eq, upper=upper))
        ok = sol.status is LpStatus.OPTIMAL and abs(sol.value - expect) <= 1e-8 * max(1, abs(expect))
        matched += ok
        mismatched += not ok
    infeasible = solve_lp(LinearProgram([1.0], A_ub=[[1.0]], b_ub=[-1.0])).status
    unbounded = solve_lp(LinearProgram([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0])).status
    ok = (mismatched == 0 and infeasible is LpStatus.INFEASIBLE
          and unbounded is LpStatus.UNBOUNDED)
    record(9, "LP unit suite", ok,
           f"{matched}/50 match vertex enumeration; infeasible -> {infeasible.value}, "
           f"unbounded -> {unbounded.value}")


def test_10_sweep_determinism(tmp_path):
    cfg = tmp_path / "block_length.cfg"
    cfg.write_text("[task]\nbits_mbits = 0.02\n[sweep]\nvariable = T\nstart = 0.02\n"
                   "stop = 0.05\nstep = 0.01\n")
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    codes = [cli.main(["sweep", "--config", str(cfg), "--out", str(o)]) for o in outs]
    a, b = (o.read_bytes() for o in outs)
    record(10, "sweep determinism", codes == [0, 0] and a == b and len(a) > 0,
           f"exit codes {codes}, {len(a)} bytes, identical {a == b}")
