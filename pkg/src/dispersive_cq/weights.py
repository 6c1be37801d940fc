"""Convolution quadrature weights for the trapezoidal-rule symbol.

The weights ``omega_n`` are the Taylor coefficients of

    eps0 * chi(s(xi)),   s(xi) = 2 (1 - xi) / (tau (1 + xi)),

so that the memory polarization is ``p^n = sum_k omega_{n-k} e^k``.  Two
routes are provided: a contour/FFT route that only needs point evaluations of
the transfer function, and the closed-form geometric recurrence available for
Debye poles, which serves as the reference.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import fft as sp_fft

from .material import DebyePole, MaterialModel, PhysicalConstants, chi_hat, validate_model

# Tolerated imaginary residue of the FFT route, relative to max |omega|.
IMAG_TOLERANCE = 1e-10


class WeightError(RuntimeError):
    """The FFT route failed its realness check or a table is too short."""


@dataclass(frozen=True)
class WeightTable:
    """Weights ``omega_0 .. omega_N`` (F/m) for one material and time step."""

    tau_step: float
    weights: np.ndarray
    material_name: str = ""

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weight table needs at least one entry")
        if not np.all(np.isfinite(w)):
            raise ValueError("weight table contains non-finite entries")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    @property
    def n_max(self) -> int:
        return self.weights.size - 1

    @property
    def omega0(self) -> float:
        return float(self.weights[0])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.weights)

    def __add__(self, other: "WeightTable") -> "WeightTable":
        if other.tau_step != self.tau_step or len(other) != len(self):
            raise ValueError("can only add tables with equal step and length")
        return WeightTable(self.tau_step, self.weights + other.weights, self.material_name)

    def dump_csv(self, path) -> None:
        """Write columns ``n, omega_n`` with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "omega_n"])
            for n, w in enumerate(self.weights):
                writer.writerow([n, f"{w:.16e}"])


@dataclass(frozen=True)
class ContourParams:
    """FFT length ``L`` and circle radius ``rho`` of the contour route."""

    fft_length: int
    radius: float

    @classmethod
    def default(cls, n_weights: int) -> "ContourParams":
        """``rho = eps**(1/(2N))`` and ``L`` = next power of two >= max(2N, 512)."""
        n = max(int(n_weights) - 1, 1)
        rho = np.finfo(float).eps ** (1.0 / (2 * n))
        length = 1 << int(np.ceil(np.log2(max(2 * n, 512))))
        return cls(length, float(rho))

    def check(self, n_weights: int) -> None:
        if self.fft_length < n_weights:
            raise ValueError(f"fft_length {self.fft_length} < number of weights {n_weights}")
        if not 0.0 < self.radius < 1.0:
            raise ValueError("contour radius must lie in (0, 1)")


def symbol(xi, tau_step: float):
    """Trapezoidal-rule symbol ``2 (1 - xi) / (tau (1 + xi))``."""
    xi = np.asarray(xi)
    xi = xi.astype(np.result_type(xi.dtype, np.complex128))
    return 2.0 * (1.0 - xi) / (tau_step * (1.0 + xi))


def weights_fft(
    model: MaterialModel,
    constants: PhysicalConstants,
    tau_step: float,
    n_weights: int,
    params: ContourParams | None = None,
) -> WeightTable:
    """Weights from samples of ``eps0 chi`` on the circle ``|xi| = rho``.

    ``omega_n ~ (L rho^n)^-1 sum_l eps0 chi(s(rho e^{i phi_l})) e^{-i n phi_l}``.
    The samples are made exactly conjugate-symmetric before the transform.
    Sampling and transform run in ``np.longdouble``: the rescaling by
    ``rho**-n`` amplifies round-off by up to ``eps**-1/2``, and the extra
    digits of the x86 extended format absorb most of that.  On platforms
    where ``longdouble`` is plain double the absolute error is of order
    ``sqrt(eps) * max|omega|``.  Aliasing adds ``O(rho^L)``.
    """
    if tau_step <= 0:
        raise ValueError("tau_step must be positive")
    if n_weights < 1:
        raise ValueError("need at least one weight")
    params = params or ContourParams.default(n_weights)
    params.check(n_weights)
    L = params.fft_length
    ld = np.longdouble
    rho = ld(params.radius)
    two_pi = ld(2) * np.arccos(ld(-1))

    phi = two_pi * np.arange(L, dtype=ld) / L
    samples = ld(constants.eps0) * np.asarray(
        chi_hat(model, symbol(rho * np.exp(1j * phi), tau_step))
    )
    # realness check on the unscaled coefficients, before rho^-n amplifies round-off
    raw = sp_fft.fft(samples) / L
    peak = np.max(np.abs(raw))
    if peak > 0 and np.max(np.abs(raw.imag)) > IMAG_TOLERANCE * peak:
        raise WeightError("FFT weights failed the conjugate-symmetry check")

    half = L // 2
    samples[half + 1 :] = np.conj(samples[1 : L - half][::-1])
    samples[0] = samples[0].real
    if L % 2 == 0:
        samples[half] = samples[half].real
    coeffs = sp_fft.fft(samples)[:n_weights].real / L
    omega = coeffs * rho ** -np.arange(n_weights, dtype=ld)
    return WeightTable(tau_step, omega.astype(float), model.name)


def weights_debye_recurrence(
    pole: DebyePole,
    constants: PhysicalConstants,
    tau_step: float,
    n_weights: int,
    name: str = "",
) -> WeightTable:
    """Exact weights of one Debye pole.

    With ``r = tau_relax / tau_step``, ``a = 1 + 2r`` and ``b = 1 - 2r`` the
    generating function is ``eps0 delta_eps (1 + xi) / (a + b xi)``, hence
    ``omega_0 = eps0 delta_eps / a``, ``omega_1 = eps0 delta_eps 4r / a^2`` and
    ``omega_n = (-b/a) omega_{n-1}`` for ``n >= 2``.
    """
    if tau_step <= 0:
        raise ValueError("tau_step must be positive")
    r = pole.tau_relax / tau_step
    a = 1.0 + 2.0 * r
    ratio = (2.0 * r - 1.0) / a
    scale = constants.eps0 * pole.delta_eps
    w = np.empty(n_weights)
    w[0] = scale / a
    if n_weights > 1:
        w[1:] = (scale * 4.0 * r / (a * a)) * ratio ** np.arange(n_weights - 1)
    return WeightTable(tau_step, w, name)


def weights_recurrence(
    model: MaterialModel,
    constants: PhysicalConstants,
    tau_step: float,
    n_weights: int,
) -> WeightTable:
    """Exact weights of a multipole Debye model (per-pole tables summed in pole order)."""
    total = np.zeros(n_weights)
    for pole in model.poles:
        total = total + weights_debye_recurrence(pole, constants, tau_step, n_weights).weights
    return WeightTable(tau_step, total, model.name)


def weights_for_layout(
    layout,
    materials: Mapping[str, MaterialModel],
    constants: PhysicalConstants,
    tau_step: float,
    n_weights: int,
    method: str = "recurrence",
    params: ContourParams | None = None,
) -> dict[str, WeightTable]:
    """One weight table per distinct material referenced by ``layout``.

    Spatial dependence of the weights is carried by the material regions, not
    by individual nodes.  ``method`` is ``"recurrence"`` (exact, Debye only)
    or ``"fft"``.
    """
    tables = {}
    for name in layout.material_names():
        if name not in materials:
            raise KeyError(f"layout references unknown material {name!r}")
        model = materials[name]
        validate_model(model).raise_if_invalid()
        if method == "recurrence":
            tables[name] = weights_recurrence(model, constants, tau_step, n_weights)
        elif method == "fft":
            tables[name] = weights_fft(model, constants, tau_step, n_weights, params)
        else:
            raise ValueError(f"unknown weight method {method!r}")
    return tables


def dump_tables(tables: Mapping[str, WeightTable], path) -> list[Path]:
    """Dump every table to ``<path>/<material>.csv`` (or ``path`` if only one and it ends in .csv)."""
    path = Path(path)
    if path.suffix == ".csv" and len(tables) == 1:
        (table,) = tables.values()
        path.parent.mkdir(parents=True, exist_ok=True)
        table.dump_csv(path)
        return [path]
    path.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in tables.items():
        target = path / f"weights_{name}.csv"
        table.dump_csv(target)
        written.append(target)
    return written
