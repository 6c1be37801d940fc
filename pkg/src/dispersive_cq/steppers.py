"""Leapfrog time stepping for dispersive media, ADE and convolution-quadrature forms.

Time staggering: after ``n`` steps a state holds ``e^n`` and the total memory
polarization ``p^n`` at ``t = n tau`` together with ``h^{n+1/2}`` and
``h^{n-1/2}``.  One step first solves the (diagonal) electric update for
``e^{n+1}`` using ``h^{n+1/2}``, then advances ``h^{n+3/2} = h^{n+1/2} -
tau M_h^-1 C e^{n+1}``.

Both schemes share the magnetic update and the electric balance

    M_e (e^{n+1} - e^n) + M_l (p^{n+1} - p^n) = tau C^T h^{n+1/2}.

They differ in how ``p^{n+1}`` is tied to the electric field:

* ADE: every pole carries its own nodal polarization, advanced with the
  trapezoidal rule ``p_i^{n+1} = A_i p_i^n + B_i (e^{n+1} + e^n) / 2``.
* CQ: ``p^{n+1} = omega_0 e^{n+1} + q^{n+1}`` where the history term ``q`` comes
  from a convolution engine; the cost per step does not depend on the number
  of poles.

Energy in 1D is per unit cross-section, i.e. J/m^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .convolution import BlockLadder, DirectConvolution, RegionConvolution
from .discretization import DiscreteOperators
from .material import chi_hat
from .weights import WeightTable

MODES = ("ade", "cq")


@dataclass
class SimState:
    n: int
    h_half: np.ndarray
    h_half_prev: np.ndarray
    e: np.ndarray
    p: np.ndarray
    mode: str = "ade"
    poles: dict[str, np.ndarray] = field(default_factory=dict)
    engine: RegionConvolution | None = None
    shadow: "SimState | None" = None

    @property
    def has_pole_states(self) -> bool:
        return self.mode == "ade" or self.shadow is not None

    def pole_states(self) -> dict[str, np.ndarray]:
        if self.mode == "ade":
            return self.poles
        if self.shadow is not None:
            return self.shadow.poles
        raise ValueError("pole states are not tracked in CQ mode without a shadow ADE")

    def snapshot(self) -> "SimState":
        """Copy of the field data; the convolution engine is not copied."""
        return replace(
            self,
            h_half=self.h_half.copy(),
            h_half_prev=self.h_half_prev.copy(),
            e=self.e.copy(),
            p=self.p.copy(),
            poles={k: v.copy() for k, v in self.poles.items()},
            engine=None,
            shadow=self.shadow.snapshot() if self.shadow is not None else None,
        )


@dataclass(frozen=True)
class EnergyReport:
    """Energy ``E^n`` and, for a step ``n-1 -> n``, the dissipation and the
    residual ``(E^n - E^{n-1}) / tau + D``.

    ``computable`` is False when the pole-resolved quantities are unavailable
    (CQ without shadow); ``energy`` then omits the polarization term and
    ``dissipation``/``residual`` are NaN.
    """

    n: int
    energy: float
    dissipation: float = float("nan")
    residual: float = float("nan")
    computable: bool = True


def sample_initial_h(ops: DiscreteOperators, initial_h) -> np.ndarray:
    mid = ops.mesh.midpoints
    if initial_h is None:
        return np.zeros(ops.n_cells)
    if callable(initial_h):
        return np.asarray(initial_h(mid), dtype=float) * np.ones(ops.n_cells)
    h0 = np.asarray(initial_h, dtype=float)
    if h0.ndim == 0:
        return np.full(ops.n_cells, float(h0))
    if h0.shape != (ops.n_cells,):
        raise ValueError("initial h must have one value per element")
    return h0.copy()


def init_state(
    ops: DiscreteOperators,
    initial_h=None,
    mode: str = "ade",
    engine: RegionConvolution | None = None,
    initial_e=None,
    initial_p=None,
    shadow: bool = False,
) -> SimState:
    """Zero electric field and polarization, ``h`` sampled at element midpoints.

    The samples are used for both ``h^{-1/2}`` and ``h^{1/2}``; with ``e^0 = 0``
    the first magnetic update is then satisfied exactly.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    for label, value in (("electric field", initial_e), ("polarization", initial_p)):
        if value is not None and np.any(np.asarray(value) != 0):
            raise ValueError(f"nonzero initial {label} is not supported")
    h0 = sample_initial_h(ops, initial_h)
    n = ops.n_nodes
    state = SimState(0, h0.copy(), h0.copy(), np.zeros(n), np.zeros(n), mode)
    if mode == "ade":
        state.poles = {r.name: np.zeros((r.n_poles, r.nodes.size)) for r in ops.dispersive_regions}
    else:
        if engine is None:
            raise ValueError("CQ mode needs a convolution engine")
        engine.append(state.e)
        state.engine = engine
        if shadow:
            state.shadow = init_state(ops, h0, "ade")
    return state


def pole_coefficients(poles, eps0: float, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """``A_i = (2 r_i - 1) / (2 r_i + 1)`` and ``B_i = 2 eps0 d_eps_i / (2 r_i + 1)``, ``r_i = tau_i / tau``."""
    rhat = np.array([p.tau_relax for p in poles]) / tau
    deps = np.array([p.delta_eps for p in poles])
    a = (2.0 * rhat - 1.0) / (2.0 * rhat + 1.0)
    b = 2.0 * eps0 * deps / (2.0 * rhat + 1.0)
    return a, b


def advance_poles(pol: np.ndarray, a: np.ndarray, b: np.ndarray, e_old, e_new) -> np.ndarray:
    """Trapezoidal step of ``tau_i dp_i/dt + p_i = eps0 d_eps_i e`` for all poles at once."""
    avg = 0.5 * (np.asarray(e_new) + np.asarray(e_old))
    return a[:, None] * pol + b[:, None] * avg[None, :]


def _advance_h(state: SimState, ops: DiscreteOperators, tau: float) -> None:
    state.h_half_prev = state.h_half
    state.h_half = state.h_half - tau * (ops.curl @ state.e) / ops.m_h


def ade_step(state: SimState, ops: DiscreteOperators, tau: float) -> SimState:
    """Advance an ADE state by one step in place and return it."""
    if state.mode != "ade":
        raise ValueError("ade_step needs an ADE state")
    eps0 = ops.constants.eps0
    e_old = state.e
    rhs = ops.m_e * e_old + tau * ops.curl_t(state.h_half)
    diag = ops.m_e.copy()
    coeffs = {}
    for region in ops.dispersive_regions:
        idx = region.nodes
        a, b = pole_coefficients(region.model.poles, eps0, tau)
        coeffs[region.name] = (a, b)
        pol = state.poles[region.name]
        ml = ops.m_lumped[idx]
        half_b = 0.5 * np.sum(b)
        diag[idx] += ml * half_b
        rhs[idx] -= ml * (half_b * e_old[idx] + (a - 1.0) @ pol)

    e_new = rhs / diag
    p_new = np.zeros_like(state.p)
    for region in ops.dispersive_regions:
        idx = region.nodes
        a, b = coeffs[region.name]
        pol = advance_poles(state.poles[region.name], a, b, e_old[idx], e_new[idx])
        state.poles[region.name] = pol
        p_new[idx] = np.sum(pol, axis=0)

    state.e = e_new
    state.p = p_new
    _advance_h(state, ops, tau)
    state.n += 1
    return state


def node_omega0(ops: DiscreteOperators, tables: Mapping[str, WeightTable]) -> np.ndarray:
    w0 = np.zeros(ops.n_nodes)
    for region in ops.regions:
        table = tables.get(region.name)
        if table is not None:
            w0[region.nodes] = table.omega0
    return w0


def cq_step(
    state: SimState,
    ops: DiscreteOperators,
    omega0: np.ndarray,
    tau: float,
) -> SimState:
    """Advance a CQ state by one step in place and return it.

    ``omega0`` holds the leading weight of every node (see :func:`node_omega0`);
    the history part of the polarization is taken from ``state.engine``.
    """
    if state.mode != "cq":
        raise ValueError("cq_step needs a CQ state")
    q = state.engine.memory()
    ml = ops.m_lumped
    rhs = ops.m_e * state.e + ml * (state.p - q) + tau * ops.curl_t(state.h_half)
    e_new = rhs / (ops.m_e + omega0 * ml)
    state.p = omega0 * e_new + q
    state.e = e_new
    state.engine.append(e_new)
    _advance_h(state, ops, tau)
    state.n += 1
    if state.shadow is not None:
        ade_step(state.shadow, ops, tau)
    return state


def build_engine(
    ops: DiscreteOperators,
    tables: Mapping[str, WeightTable],
    kind: str = "direct",
    horizon: int | None = None,
    base: int = 2,
    contour_nodes: int = 24,
    tolerance: float = 1e-6,
) -> RegionConvolution:
    """Convolution engine over all regions whose weight table is not identically zero."""
    parts = []
    for region in ops.regions:
        table = tables[region.name]
        if table.is_zero:
            continue
        if kind == "direct":
            engine = DirectConvolution(table, region.nodes.size)
        elif kind == "focq":
            if horizon is None:
                raise ValueError("the FOCQ engine needs a step horizon")
            model, eps0 = region.model, ops.constants.eps0
            engine = BlockLadder(
                lambda lam, model=model: eps0 * np.asarray(chi_hat(model, lam)),
                table,
                region.nodes.size,
                horizon + 1,
                base=base,
                contour_nodes=contour_nodes,
                tolerance=tolerance,
            )
        else:
            raise ValueError(f"unknown engine {kind!r}")
        parts.append((region.nodes, engine))
    return RegionConvolution(ops.n_nodes, parts)


def energy(state: SimState, ops: DiscreteOperators) -> EnergyReport:
    """Discrete energy ``E^n``.

    ``E^n = 1/2 [(h^{n+1/2}, h^{n-1/2})_{M_h} + |e^n|^2_{M_e} + sum_i |p_i^n|^2_{M_p,i}]``.
    """
    value = float(np.sum(ops.m_h * state.h_half * state.h_half_prev))
    value += float(np.sum(ops.m_e * state.e * state.e))
    computable = state.has_pole_states
    if computable:
        pols = state.pole_states()
        for region in ops.dispersive_regions:
            _, m_p = ops.pole_masses(region)
            pol = pols[region.name]
            value += float(np.sum(m_p * pol * pol))
    return EnergyReport(state.n, 0.5 * value, computable=computable)


def field_energy(state: SimState, ops: DiscreteOperators) -> float:
    """``1/2 (|h^{n+1/2}|^2_{M_h} + |e^n|^2_{M_e})``.

    Unlike :func:`energy` this is a norm for every time step, so it exposes
    leapfrog instability; the staggered energy stays exactly constant in
    vacuum even when the fields blow up.
    """
    return 0.5 * float(np.sum(ops.m_h * state.h_half**2) + np.sum(ops.m_e * state.e**2))


def dissipation(prev: SimState, curr: SimState, ops: DiscreteOperators, tau: float) -> float:
    """``sum_i |(p_i^{n+1} - p_i^n) / tau|^2_{M_d,i}``."""
    total = 0.0
    p_old, p_new = prev.pole_states(), curr.pole_states()
    for region in ops.dispersive_regions:
        m_d, _ = ops.pole_masses(region)
        dp = (p_new[region.name] - p_old[region.name]) / tau
        total += float(np.sum(m_d * dp * dp))
    return total


def dissipation_residual(
    prev: SimState, curr: SimState, ops: DiscreteOperators, tau: float
) -> EnergyReport:
    """Energy report of ``curr`` including the balance over the step ``prev -> curr``.

    ``residual = (E^{n+1} - E^n) / tau + D^{n+1/2}`` vanishes up to round-off
    for ADE trajectories.  Without pole states the report is marked as not
    computable instead of returning zero.
    """
    e_new = energy(curr, ops)
    if not (prev.has_pole_states and curr.has_pole_states):
        return e_new
    e_old = energy(prev, ops)
    d = dissipation(prev, curr, ops, tau)
    res = (e_new.energy - e_old.energy) / tau + d
    return EnergyReport(curr.n, e_new.energy, d, res, True)


class Scheme:
    """A stepping scheme bound to operators, time step and initial data."""

    def __init__(
        self,
        ops: DiscreteOperators,
        tau: float,
        kind: str,
        initial_h=None,
        tables: Mapping[str, WeightTable] | None = None,
        horizon: int | None = None,
        focq: Mapping | None = None,
        shadow: bool = False,
    ):
        self.ops = ops
        self.tau = tau
        self.kind = kind
        if kind == "ade":
            self.state = init_state(ops, initial_h, "ade")
            self._step: Callable = lambda: ade_step(self.state, ops, tau)
        elif kind in ("cq-direct", "cq-focq"):
            if tables is None:
                raise ValueError("CQ schemes need weight tables")
            engine_kind = "direct" if kind == "cq-direct" else "focq"
            engine = build_engine(ops, tables, engine_kind, horizon=horizon, **dict(focq or {}))
            self.state = init_state(ops, initial_h, "cq", engine=engine, shadow=shadow)
            w0 = node_omega0(ops, tables)
            self._step = lambda: cq_step(self.state, ops, w0, tau)
        else:
            raise ValueError(f"unknown scheme {kind!r}")

    def step(self) -> SimState:
        return self._step()

    def energy(self) -> EnergyReport:
        return energy(self.state, self.ops)
