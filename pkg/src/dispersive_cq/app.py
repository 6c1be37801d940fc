"""Run drivers: config -> operators -> weights -> scheme -> CSV files.

Output formats
--------------
Snapshot ``snapshot_<n>.csv``, header ``z,e_x,h_y,p_x``.  Row ``k`` holds the
node coordinate ``z_k`` with ``e_x`` and ``p_x`` at that node at ``t = n tau``
and ``h_y`` of element ``k`` (midpoint ``z_k + h/2``) at ``t = (n + 1/2) tau``.

Energy CSV, header ``n,t,E,D,residual``: the discrete energy ``E^n`` (J/m^2),
the dissipation over the step ``n-1 -> n`` and the energy-balance residual
``(E^n - E^{n-1}) / tau + D``.  ``D`` and ``residual`` are NaN for ``n = 0``;
all three are NaN in CQ runs without the shadow ADE.

Comparison CSV, header ``n,t,diff_e,diff_h,diff_p``: max-norm differences of
every scheme against the first one.

All floats are written with 17 significant digits.
"""

from __future__ import annotations

import csv
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import SCHEMES, SimConfig
from .discretization import DiscreteOperators, build_mesh, build_operators, cfl_bound
from .material import PhysicalConstants
from .steppers import EnergyReport, Scheme, dissipation_residual
from .weights import ContourParams, WeightTable, dump_tables, weights_for_layout

log = logging.getLogger(__name__)

FLOAT_FMT = "{:.16e}"


class NumericalError(RuntimeError):
    """Non-finite field values, usually a CFL violation."""


class CFLWarning(UserWarning):
    pass


def fmt(x: float) -> str:
    return FLOAT_FMT.format(float(x))


@dataclass
class Problem:
    config: SimConfig
    ops: DiscreteOperators
    tau: float
    tau_max: float
    constants: PhysicalConstants


def build_problem(config: SimConfig, constants: PhysicalConstants | None = None) -> Problem:
    constants = constants or PhysicalConstants()
    mesh = build_mesh(config.z_min, config.z_max, config.n_cells)
    ops = build_operators(mesh, config.layout, config.materials, constants)
    tau_max = cfl_bound(ops)
    tau = config.dt if config.dt is not None else config.cfl_fraction * tau_max
    if tau > tau_max:
        warnings.warn(f"dt = {tau:.6e} s exceeds the CFL bound {tau_max:.6e} s", CFLWarning,
                      stacklevel=2)
    return Problem(config, ops, tau, tau_max, constants)


def weight_tables(problem: Problem, n_steps: int) -> dict[str, WeightTable]:
    cfg = problem.config
    n_weights = n_steps + 2
    params = None
    if cfg.weights.method == "fft":
        d = ContourParams.default(n_weights)
        params = ContourParams(cfg.weights.fft_length or d.fft_length, cfg.weights.rho or d.radius)
    return weights_for_layout(cfg.layout, cfg.materials, problem.constants, problem.tau,
                              n_weights, cfg.weights.method, params)


def make_scheme(problem: Problem, kind: str, n_steps: int, tables=None, shadow=False) -> Scheme:
    if kind not in SCHEMES:
        raise ValueError(f"unknown scheme {kind!r}")
    cfg = problem.config
    if kind != "ade" and tables is None:
        tables = weight_tables(problem, n_steps)
    focq = dict(base=cfg.focq.base, contour_nodes=cfg.focq.contour_nodes,
                tolerance=cfg.focq.tolerance)
    return Scheme(problem.ops, problem.tau, kind, cfg.initial_condition, tables,
                  horizon=n_steps, focq=focq, shadow=shadow)


def _check_finite(scheme: Scheme) -> None:
    s = scheme.state
    if not (np.all(np.isfinite(s.e)) and np.all(np.isfinite(s.h_half))
            and np.all(np.isfinite(s.p))):
        raise NumericalError(f"non-finite field values at step {s.n}")


def write_snapshot(path: Path, ops: DiscreteOperators, scheme: Scheme) -> None:
    s = scheme.state
    z = ops.mesh.nodes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z", "e_x", "h_y", "p_x"])
        for k in range(z.size):
            w.writerow([fmt(z[k]), fmt(s.e[k]), fmt(s.h_half[k]), fmt(s.p[k])])


def _energy_row(report: EnergyReport, tau: float) -> list[str]:
    nan = float("nan")
    e = report.energy if report.computable else nan
    return [str(report.n), fmt(report.n * tau), fmt(e), fmt(report.dissipation), fmt(report.residual)]


def write_plot_script(path: Path, energy_path: Path, snapshots: Sequence[Path]) -> None:
    base = path.parent
    rel = lambda p: os.path.relpath(p, base)
    lines = [
        "# gnuplot script; run from this directory: gnuplot plot.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,600",
        "set output 'energy.png'",
        "set xlabel 't [s]'",
        "set ylabel 'E [J/m^2]'",
        f"plot '{rel(energy_path)}' using 2:3 with lines",
        "set output 'h_y.png'",
        "set xlabel 'z [m]'",
        "set ylabel 'h_y [A/m]'",
    ]
    if snapshots:
        parts = [f"'{rel(p)}' using 1:3 with lines title '{p.stem}'" for p in snapshots]
        lines.append("plot " + ", \\\n     ".join(parts))
    path.write_text("\n".join(lines) + "\n")


@dataclass
class RunResult:
    scheme: str
    n_steps: int
    tau: float
    tau_max: float
    energy_initial: float
    energy_final: float
    snapshots: list[Path] = field(default_factory=list)
    energy_path: Path | None = None
    plot_path: Path | None = None
    weight_files: list[Path] = field(default_factory=list)
    stored_vectors: int | None = None
    peak_stored_vectors: int | None = None
    focq_degraded: bool = False

    def summary(self) -> dict:
        return {
            "scheme": self.scheme,
            "n_steps": self.n_steps,
            "tau": fmt(self.tau),
            "tau_max": fmt(self.tau_max),
            "energy_initial": fmt(self.energy_initial),
            "energy_final": fmt(self.energy_final),
            "stored_vectors": self.stored_vectors,
            "peak_stored_vectors": self.peak_stored_vectors,
            "focq_degraded": self.focq_degraded,
        }


def _peak_stored(scheme: Scheme) -> int | None:
    engine = scheme.state.engine
    if engine is None:
        return None
    peaks = [getattr(e, "peak_stored", e.stored_vectors) for _, e in engine.parts]
    return int(sum(peaks))


def run_simulation(
    config: SimConfig,
    scheme: str | None = None,
    n_steps: int | None = None,
    dump_weights: str | os.PathLike | None = None,
) -> RunResult:
    """Step the configured scheme and write snapshot, energy and plot files."""
    kind = scheme or config.scheme
    n_steps = config.n_steps if n_steps is None else n_steps
    problem = build_problem(config)
    tau = problem.tau
    tables = None
    weight_files = []
    if kind != "ade" or dump_weights or config.weights.dump_path:
        tables = weight_tables(problem, n_steps)
        target = dump_weights or config.resolve(config.weights.dump_path)
        if target:
            weight_files = dump_tables(tables, target)
    sim = make_scheme(problem, kind, n_steps, tables, shadow=config.shadow_ade)

    out = config.outputs
    snap_dir = config.resolve(out.snapshot_dir)
    energy_path = config.resolve(out.energy_path)
    plot_path = config.resolve(out.plot_script)
    for p in (snap_dir, energy_path.parent, plot_path.parent):
        p.mkdir(parents=True, exist_ok=True)

    snapshots = []

    def snap():
        path = snap_dir / f"snapshot_{sim.state.n:06d}.csv"
        write_snapshot(path, problem.ops, sim)
        snapshots.append(path)

    first = sim.energy()
    with open(energy_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "t", "E", "D", "residual"])
        writer.writerow(_energy_row(first, tau))
        snap()
        report = first
        for _ in range(n_steps):
            prev = sim.state.snapshot()
            sim.step()
            _check_finite(sim)
            with np.errstate(over="ignore", invalid="ignore"):
                report = dissipation_residual(prev, sim.state, problem.ops, tau)
            if report.computable and not np.isfinite(report.energy):
                raise NumericalError(f"energy overflow at step {sim.state.n}")
            writer.writerow(_energy_row(report, tau))
            if sim.state.n % out.snapshot_stride == 0 or sim.state.n == n_steps:
                snap()

    write_plot_script(plot_path, energy_path, snapshots)
    engine = sim.state.engine
    return RunResult(
        scheme=kind,
        n_steps=n_steps,
        tau=tau,
        tau_max=problem.tau_max,
        energy_initial=first.energy,
        energy_final=report.energy,
        snapshots=snapshots,
        energy_path=energy_path,
        plot_path=plot_path,
        weight_files=weight_files,
        stored_vectors=engine.stored_vectors if engine is not None else None,
        peak_stored_vectors=_peak_stored(sim),
        focq_degraded=bool(engine.degraded) if engine is not None else False,
    )


@dataclass
class ComparisonReport:
    schemes: tuple[str, ...]
    tolerance: float
    diff_e: np.ndarray
    diff_h: np.ndarray
    diff_p: np.ndarray
    scale_e: float
    scale_h: float
    scale_p: float
    tau: float
    path: Path | None = None

    @property
    def relative(self) -> dict[str, float]:
        """Global max differences divided by the max magnitude of each field."""
        out = {}
        for name in ("e", "h", "p"):
            diff = getattr(self, f"diff_{name}")
            scale = getattr(self, f"scale_{name}")
            top = float(diff.max()) if diff.size else 0.0
            out[name] = top / scale if scale > 0 else top
        return out

    @property
    def max_relative(self) -> float:
        return max(self.relative.values())

    @property
    def passed(self) -> bool:
        return self.max_relative <= self.tolerance


def compare_schemes(
    config: SimConfig,
    schemes: Sequence[str],
    tolerance: float | None = None,
    n_steps: int | None = None,
    write: bool = True,
) -> ComparisonReport:
    """Run ``schemes`` in lockstep on one discretization and diff them against the first."""
    schemes = tuple(schemes)
    if len(schemes) < 2:
        raise ValueError("need at least two schemes to compare")
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    tolerance = config.compare_tolerance if tolerance is None else tolerance
    n_steps = config.n_steps if n_steps is None else n_steps
    problem = build_problem(config)
    tables = weight_tables(problem, n_steps) if any(s != "ade" for s in schemes) else None
    sims = [make_scheme(problem, s, n_steps, tables) for s in schemes]

    diffs = np.zeros((3, n_steps + 1))
    scales = np.zeros(3)

    def account(n):
        ref = sims[0].state
        fields = lambda st: (st.e, st.h_half, st.p)
        for sim in sims:
            for i, x in enumerate(fields(sim.state)):
                scales[i] = max(scales[i], float(np.max(np.abs(x))))
        for sim in sims[1:]:
            for i, (a, b) in enumerate(zip(fields(ref), fields(sim.state))):
                diffs[i, n] = max(diffs[i, n], float(np.max(np.abs(a - b))))

    account(0)
    for n in range(1, n_steps + 1):
        for sim in sims:
            sim.step()
            _check_finite(sim)
        account(n)

    path = config.resolve(config.outputs.comparison_path) if write else None
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "t", "diff_e", "diff_h", "diff_p"])
            for n in range(n_steps + 1):
                w.writerow([str(n), fmt(n * problem.tau)] + [fmt(d) for d in diffs[:, n]])
    return ComparisonReport(schemes, tolerance, diffs[0], diffs[1], diffs[2],
                            *scales, tau=problem.tau, path=path)
