"""Acceptance checks, one test per criterion.

Run alone with ``pytest tests/test_acceptance.py -v -s`` (or execute this
file).  Every criterion prints a ``PASS``/``FAIL`` line immediately and the
lines are repeated in the terminal summary.
"""

import dataclasses
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ACCEPTANCE_LINES, gaussian
from dispersive_cq.app import build_problem, compare_schemes, make_scheme, run_simulation
from dispersive_cq.config import load_preset
from dispersive_cq.convolution import BlockLadder, DirectConvolution
from dispersive_cq.discretization import MaterialLayout, build_mesh, build_operators, cfl_bound
from dispersive_cq.material import DebyePole, MaterialModel, PhysicalConstants, chi_hat, tissue_model
from dispersive_cq.steppers import Scheme, dissipation_residual, energy, field_energy
from dispersive_cq.weights import (
    symbol,
    weights_for_layout,
    weights_debye_recurrence,
    weights_fft,
    weights_recurrence,
)

C = PhysicalConstants()


def report(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def preset(tmp_path, **changes):
    cfg = load_preset("tissue-interface", tmp_path)
    return dataclasses.replace(cfg, **changes)


def vacuum_config(tmp_path, **changes):
    cfg = preset(tmp_path, **changes)
    mesh = build_mesh(cfg.z_min, cfg.z_max, cfg.n_cells)
    return dataclasses.replace(cfg, layout=MaterialLayout.uniform(mesh, "air"))


def read_energy(path):
    return np.loadtxt(path, delimiter=",", skiprows=1)


def read_snapshot(path):
    return np.loadtxt(path, delimiter=",", skiprows=1)


# 1 ------------------------------------------------------------------------


def test_c1_scheme_equivalence(tmp_path):
    cfg = preset(tmp_path, n_cells=512, n_steps=1000)
    rep = compare_schemes(cfg, ["ade", "cq-direct"], tolerance=1e-10)
    rel = rep.relative
    ok = report("1 ADE vs CQ(direct) equivalence, 1000 steps, n_cells=512",
                rep.passed,
                "max rel diff e={e:.2e} h={h:.2e} p={p:.2e} (tol 1e-10)".format(**rel))
    assert ok


# 2 ------------------------------------------------------------------------


def test_c2_energy_identity(tmp_path):
    cfg = preset(tmp_path, n_steps=2000)
    problem = build_problem(cfg)
    sim = make_scheme(problem, "ade", 2000)
    e0 = sim.energy().energy
    bound = 1e-12 * max(e0, 1e-30)
    worst = 0.0
    for _ in range(2000):
        prev = sim.state.snapshot()
        sim.step()
        rep = dissipation_residual(prev, sim.state, problem.ops, problem.tau)
        worst = max(worst, abs(rep.residual) * problem.tau)
    ok = report("2 discrete energy identity, 2000 ADE steps on the preset", worst <= bound,
                f"max |dE + tau D| = {worst:.2e} J/m^2, bound {bound:.2e}")
    assert ok


@settings(max_examples=20, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.5, 1e5), st.floats(1e-12, 1e-3)), min_size=1, max_size=6),
    st.floats(0.0, 10.0),
    st.floats(0.2, 1.0),
)
def test_c2_energy_identity_property(poles, eps_prime, cfl):
    model = MaterialModel("m", eps_prime, tuple(DebyePole(d, t) for d, t in poles))
    mesh = build_mesh(-1.0, 1.0, 128)
    layout = MaterialLayout.from_list([(-1, 0.5, "air"), (0.5, 0.7, "m"), (0.7, 1, "air")])
    ops = build_operators(mesh, layout, {"air": MaterialModel.vacuum(), "m": model})
    tau = cfl * cfl_bound(ops)
    sim = Scheme(ops, tau, "ade", gaussian)
    e0 = sim.energy().energy
    for _ in range(300):
        prev = sim.state.snapshot()
        sim.step()
        rep = dissipation_residual(prev, sim.state, ops, tau)
        assert abs(rep.residual) * tau <= 1e-12 * max(e0, 1e-30)


# 3, 4 ---------------------------------------------------------------------


def vacuum_energies(cfl_fraction, n_steps, n_cells=512):
    """Staggered energy and unstaggered field norm per step, stopping once the norm exceeds 10 E0."""
    ops = build_operators(build_mesh(-1, 1, n_cells),
                          MaterialLayout.from_list([(-1, 1, "air")]),
                          {"air": MaterialModel.vacuum()})
    tau = cfl_fraction * cfl_bound(ops)
    sim = Scheme(ops, tau, "ade", gaussian)
    e0 = sim.energy().energy
    staggered, norm = [e0], [field_energy(sim.state, ops)]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_steps):
            sim.step()
            staggered.append(energy(sim.state, ops).energy)
            norm.append(field_energy(sim.state, ops))
            if not norm[-1] <= 10 * e0:
                break
    return np.array(staggered), np.array(norm)


def test_c3_vacuum_conservation(tmp_path):
    cfg = vacuum_config(tmp_path, n_cells=512, n_steps=10_000, cfl_fraction=0.99,
                        outputs=dataclasses.replace(preset(tmp_path).outputs, snapshot_stride=10_000))
    res = run_simulation(cfg)
    e = read_energy(res.energy_path)[:, 2]
    drift = np.max(np.abs(e - e[0])) / e[0]
    ok = report("3 vacuum energy conservation, 1e4 steps at 0.99 tau_max", drift <= 1e-12,
                f"max |E^n - E^0| / E^0 = {drift:.2e} (tol 1e-12)")
    assert ok


def test_c4_stable_below_bound():
    staggered, norm = vacuum_energies(0.99, 10_000)
    e0 = staggered[0]
    ok = np.max(staggered) <= 2 * e0 and np.max(norm) <= 2 * e0 and norm.size == 10_001
    report("4a CFL: bounded at 0.99 tau_max over 1e4 steps", ok,
           f"max E/E0 = {np.max(staggered) / e0:.6f}, max field norm / E0 = {np.max(norm) / e0:.6f}")
    assert ok


def _blowup_step(fraction):
    staggered, norm = vacuum_energies(fraction, 1000)
    e0 = staggered[0]
    over = np.nonzero(~(norm <= 10 * e0))[0]
    return (over[0] if over.size else None), np.max(np.abs(staggered)) / e0


@pytest.mark.xfail(strict=True, reason="tau_max = 1/sqrt(lambda_max) is the energy-positivity "
                   "bound, half the leapfrog stability limit; 1.5 tau_max is a stable Courant "
                   "number of 0.75. See decisions ledger")
def test_c4_unstable_at_one_and_a_half():
    step, stag = _blowup_step(1.5)
    ok = step is not None
    report("4b CFL: energy > 10 E0 within 1e3 steps at 1.5 tau_max", ok,
           f"field norm exceeds 10 E0 at step {step}; staggered energy max |E|/E0 = {stag:.6f}")
    assert ok


def test_c4_unstable_beyond_leapfrog_limit():
    step, _ = _blowup_step(2.05)
    below, _ = _blowup_step(2.0)
    ok = step is not None and below is None
    report("4c CFL: field norm > 10 E0 within 1e3 steps at 2.05 tau_max, bounded at 2 tau_max",
           ok, f"blow-up at step {step}; at 2.0 tau_max: {'none' if below is None else below}")
    assert ok


# 5 ------------------------------------------------------------------------

N_WEIGHTS = 2001  # omega_0 .. omega_2000
TAU_PRESET = 2.9317199238519047e-12


def fft_vs_recurrence():
    out = []
    for pole in tissue_model().poles:
        model = MaterialModel("pole", 0.0, (pole,))
        fft = weights_fft(model, C, TAU_PRESET, N_WEIGHTS).weights
        ref = weights_debye_recurrence(pole, C, TAU_PRESET, N_WEIGHTS).weights
        out.append((pole, fft, ref))
    return out


@pytest.mark.xfail(strict=True, reason="weights of the fastest pole drop below the FFT noise "
                   "floor from n=84 on and underflow to zero near n=2000; see decisions ledger")
def test_c5_weights_entrywise_relative():
    worst = []
    for pole, fft, ref in fft_vs_recurrence():
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(fft - ref) / np.abs(ref)
        rel = np.where(np.isnan(rel), np.inf, rel)
        bad = np.nonzero(rel > 1e-7)[0]
        worst.append((pole, np.max(rel), bad[0] if bad.size else None))
    ok = all(w <= 1e-7 for _, w, _ in worst)
    detail = "; ".join(
        f"tau={p.tau_relax:.2e}: " + ("ok" if first is None else f"fails from n={first}")
        for p, _, first in worst
    )
    report("5a FFT vs recurrence weights, entrywise relative error <= 1e-7, N=2000", ok, detail)
    assert ok


def test_c5_weights_scaled_and_generating_function():
    errors = []
    for pole, fft, ref in fft_vs_recurrence():
        errors.append(np.max(np.abs(fft - ref)) / np.max(np.abs(ref)))
    # entrywise relative error for every weight above the double-precision noise floor
    floor_ok = True
    for pole, fft, ref in fft_vs_recurrence():
        keep = np.abs(ref) >= 1e-12 * np.max(np.abs(ref))
        floor_ok &= np.max(np.abs(fft - ref)[keep] / np.abs(ref)[keep]) <= 1e-7
    ok_a = report("5b FFT vs recurrence weights, error / max|omega| <= 1e-7, N=2000",
                  max(errors) <= 1e-7 and floor_ok,
                  "per pole " + ", ".join(f"{e:.1e}" for e in errors)
                  + "; entrywise relative on |omega_n| >= 1e-12 max|omega|: "
                  + ("ok" if floor_ok else "violated"))

    tissue = tissue_model()
    fft = weights_fft(tissue, C, TAU_PRESET, N_WEIGHTS).weights
    rng = np.random.default_rng(2024)
    xi = 0.9 * np.sqrt(rng.uniform(size=20)) * np.exp(2j * np.pi * rng.uniform(size=20))
    series = np.polynomial.polynomial.polyval(xi, fft)
    exact = C.eps0 * np.asarray(chi_hat(tissue, symbol(xi, TAU_PRESET)))
    scale = C.eps0 * chi_hat(tissue, 0.0).real
    gen_err = np.max(np.abs(series - exact)) / scale
    ok_b = report("5c generating function at 20 random |xi| <= 0.9", gen_err <= 1e-8,
                  f"max error / (eps0 chi(0)) = {gen_err:.2e} (tol 1e-8)")
    assert ok_a and ok_b


# 6 ------------------------------------------------------------------------


def test_c6_focq_fidelity_and_memory():
    tissue = tissue_model()
    transfer = lambda lam: C.eps0 * np.asarray(chi_hat(tissue, lam))
    n = 4096
    table = weights_recurrence(tissue, C, TAU_PRESET, (1 << 14) + 1)
    rng = np.random.default_rng(6)
    hist = rng.standard_normal(n)
    direct = DirectConvolution(table, 1)
    ladder = BlockLadder(transfer, table, 1, n, base=2, contour_nodes=24)
    diff = scale = 0.0
    for e in hist:
        direct.append([e])
        ladder.append([e])
        p = direct.query()[0]
        diff = max(diff, abs(ladder.query()[0] - p))
        scale = max(scale, abs(p))
    max_e = np.max(np.abs(hist))
    ok_a = report("6a FOCQ vs direct, 4096 steps, tissue kernel, B=2, K=24",
                  diff <= 1e-6 * max_e and diff <= 1e-6 * scale,
                  f"|focq - direct| = {diff:.2e} C/m^2 = {diff / max_e:.2e} max|e| "
                  f"= {diff / scale:.2e} max|p|")

    marks = [1 << 12, 1 << 13, 1 << 14]
    big = BlockLadder(transfer, table, 1, marks[-1])
    counts = []
    zero = np.zeros(1)
    for k in range(1, marks[-1] + 1):
        big.append(zero)
        if k in marks:
            counts.append(big.stored_vectors)
    inc = np.diff(counts)
    slope, icpt = np.polyfit(np.log2(marks), counts, 1)
    resid = np.max(np.abs(np.polyval([slope, icpt], np.log2(marks)) - counts))
    kq, base = 24, 2
    bound = [3 * base * kq * np.log2(m) + base for m in marks]
    ok_b = report("6b FOCQ stored vectors at n = 2^12, 2^13, 2^14",
                  np.all(inc > 0) and np.all(inc <= 2 * base * kq) and resid <= kq
                  and all(c <= b for c, b in zip(counts, bound)),
                  f"counts {counts}, doubling increments {list(inc)}, "
                  f"fit {slope:.1f} log2 n + {icpt:.1f}; direct would hold {marks}")
    assert ok_a and ok_b


# 7 ------------------------------------------------------------------------


def synthetic(n_poles):
    taus = np.logspace(-12, -6, n_poles)
    return MaterialModel(f"m{n_poles}", 3.0, tuple(DebyePole(10.0 / n_poles, t) for t in taus))


def _timing_setup(kind, model, n_steps):
    mesh = build_mesh(-1.0, 1.0, 4096)
    layout = MaterialLayout.from_list([(-1, 0.3, "air"), (0.3, 0.9, "m"), (0.9, 1, "air")])
    mats = {"air": MaterialModel.vacuum(), "m": model}
    ops = build_operators(mesh, layout, mats)
    tau = 0.9 * cfl_bound(ops)
    tables = weights_for_layout(layout, mats, C, tau, n_steps + 2) if kind != "ade" else None
    return lambda: Scheme(ops, tau, kind, gaussian, tables, horizon=n_steps)


def step_times(kind, models, n_steps=300, repeats=9):
    """Best per-step time of each model; runs are interleaved so load drift hits all alike.

    Weight tables and operators are built outside the timed region.
    """
    makers = [_timing_setup(kind, m, n_steps) for m in models]
    best = [np.inf] * len(models)
    for _ in range(repeats):
        for i, make in enumerate(makers):
            sim = make()
            t0 = time.perf_counter()
            for _ in range(n_steps):
                sim.step()
            best[i] = min(best[i], (time.perf_counter() - t0) / n_steps)
    return best


def test_c7_pole_count_independence():
    models = [synthetic(1), synthetic(50)]
    ok = True
    parts = []
    for kind in ("cq-direct", "cq-focq"):
        t1, t50 = step_times(kind, models)
        ratio = max(t1, t50) / min(t1, t50)
        ok &= ratio <= 1.2
        parts.append(f"{kind}: {t1 * 1e6:.0f} vs {t50 * 1e6:.0f} us/step (ratio {ratio:.3f})")
    a1, a50 = step_times("ade", models)
    parts.append(f"ade: {a1 * 1e6:.0f} vs {a50 * 1e6:.0f} us/step (x{a50 / a1:.1f})")
    ok = report("7 CQ step time, 1 vs 50 poles, within 20%; ADE grows", ok and a50 > a1,
                "; ".join(parts))
    assert ok


# 8 ------------------------------------------------------------------------


def test_c8_qualitative_reproduction(tmp_path):
    outputs = dataclasses.replace(preset(tmp_path).outputs, snapshot_stride=100)
    tissue = run_simulation(preset(tmp_path / "tissue", outputs=outputs))
    vacuum = run_simulation(vacuum_config(tmp_path / "vacuum", outputs=outputs))
    c_tau = C.c0 * tissue.tau
    snaps_t = {int(p.stem.split("_")[1]): read_snapshot(p) for p in tissue.snapshots}
    snaps_v = {int(p.stem.split("_")[1]): read_snapshot(p) for p in vacuum.snapshots}
    h = (snaps_t[0][1, 0] - snaps_t[0][0, 0])
    z_mid = snaps_t[0][:, 0] + h / 2

    # (a) reflected pulse: tissue minus vacuum, left of the interface
    n_a = 800
    diff = snaps_t[n_a][:, 2] - snaps_v[n_a][:, 2]
    left = (z_mid > -0.3) & (z_mid < 0.45)
    k = np.argmax(np.abs(diff) * left)
    expected = 0.5 - (n_a * c_tau - 0.5)
    incident = 5.0  # half of the initial amplitude travels to the right
    refl = abs(diff[k])
    ok_a = abs(z_mid[k] - expected) <= 0.05 and 0.1 * incident <= refl < incident
    report("8a partial reflection at z = 0.5", ok_a,
           f"reflected peak at z={z_mid[k]:.3f} (expected {expected:.3f}), "
           f"|h| = {refl:.2f} of incident {incident:.1f}")

    # (b) slower propagation inside [0.5, 0.7]: track the peak of |h_y|
    steps = [700, 800, 900, 1000, 1100, 1200]
    inside = (z_mid > 0.5) & (z_mid < 0.7)
    pos = [z_mid[np.argmax(np.abs(snaps_t[n][:, 2]) * inside)] for n in steps]
    speed = np.polyfit(np.array(steps) * c_tau, pos, 1)[0]
    vac_steps = [500, 600, 700]
    vac_snaps = run_peak_positions(vacuum, vac_steps, z_mid)
    vac_speed = np.polyfit(np.array(vac_steps) * c_tau, vac_snaps, 1)[0]
    ok_b = 0 < speed < 0.5 and abs(vac_speed - 1) < 0.05
    report("8b slower propagation inside the tissue", ok_b,
           f"peak speed in tissue {speed:.3f} c, in vacuum {vac_speed:.3f} c")

    # (c) energy is monotone and drops while the pulse overlaps the medium
    e = read_energy(tissue.energy_path)[:, 2]
    rise = np.max(np.diff(e))
    drop = 1 - e[1600] / e[400]
    ok_c = rise <= 1e-12 * e[0] and drop > 0.05
    report("8c monotone energy decay while the pulse overlaps the tissue", ok_c,
           f"max E^(n+1) - E^n = {rise / e[0]:.1e} E0, E drops {100 * drop:.1f}% "
           f"between steps 400 and 1600")
    assert ok_a and ok_b and ok_c


def run_peak_positions(result, steps, z_mid):
    """Peak of the right-moving vacuum pulse (searched in z > 0)."""
    out = []
    for n in steps:
        path = next(p for p in result.snapshots if p.stem == f"snapshot_{n:06d}")
        snap = read_snapshot(path)
        out.append(z_mid[np.argmax(snap[:, 2] * (z_mid > 0))])
    return out


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
