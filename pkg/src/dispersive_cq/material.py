"""Multipole Debye media and their susceptibility transfer functions.

A material is described by its high-frequency susceptibility ``eps_inf_prime``
(so that the relative permittivity at infinite frequency is
``eps_inf = 1 + eps_inf_prime``) and a finite list of Debye poles.  Each pole
contributes ``delta_eps / (1 + s * tau_relax)`` to the memory part of the
susceptibility, where ``s`` is the Laplace variable in rad/s.

Poles are kept sorted by ascending relaxation time.  Every summation over
poles in this package uses that order, so round-off is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Relative tolerance for "s sits on the pole -1/tau": |1 + s tau| < TOL (1 + |s tau|).
POLE_TOLERANCE = 1e-14
# Poles weaker than this are dropped at construction (they would divide by ~0
# in the auxiliary mass matrices).
NEGLIGIBLE_DELTA_EPS = 1e-30


class PoleError(ValueError):
    """Raised when the transfer function is evaluated on one of its poles."""


class MaterialError(ValueError):
    """Raised when a material model violates its invariants."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Vacuum permittivity and permeability in SI units."""

    eps0: float = 8.8541878128e-12
    mu0: float = 4e-7 * np.pi

    @property
    def c0(self) -> float:
        """Speed of light in vacuum, m/s."""
        return 1.0 / np.sqrt(self.eps0 * self.mu0)


@dataclass(frozen=True)
class DebyePole:
    """A single Debye relaxation term.

    Parameters
    ----------
    delta_eps : float
        Susceptibility increment ``eps_s - eps_inf'`` of this component.
    tau_relax : float
        Relaxation time in seconds.
    """

    delta_eps: float
    tau_relax: float

    @classmethod
    def from_corner(cls, delta_eps: float, omega_corner: float) -> "DebyePole":
        """Build a pole written as ``delta_eps / (1 + j w / omega_corner)``.

        The relaxation time is ``1 / omega_corner``.
        """
        return cls(float(delta_eps), 1.0 / float(omega_corner))


@dataclass(frozen=True)
class MaterialModel:
    """Global high-frequency susceptibility plus an ordered list of Debye poles."""

    name: str
    eps_inf_prime: float = 0.0
    poles: tuple[DebyePole, ...] = field(default_factory=tuple)

    def __post_init__(self):
        kept = [
            p
            for p in self.poles
            if not (0.0 < p.delta_eps < NEGLIGIBLE_DELTA_EPS)
        ]
        ordered = tuple(sorted(kept, key=lambda p: p.tau_relax))
        object.__setattr__(self, "poles", ordered)
        object.__setattr__(self, "eps_inf_prime", float(self.eps_inf_prime))

    @property
    def eps_inf(self) -> float:
        return 1.0 + self.eps_inf_prime

    @property
    def is_dispersive(self) -> bool:
        return len(self.poles) > 0

    @classmethod
    def vacuum(cls, name: str = "air") -> "MaterialModel":
        return cls(name=name)

    @classmethod
    def from_corners(
        cls,
        name: str,
        eps_inf_prime: float,
        terms: Iterable[tuple[float, float]],
    ) -> "MaterialModel":
        """Build a model from ``(delta_eps, omega_corner)`` pairs."""
        poles = tuple(DebyePole.from_corner(d, w) for d, w in terms)
        return cls(name=name, eps_inf_prime=eps_inf_prime, poles=poles)


def _check_pole(one_plus_stau, stau):
    bad = np.abs(one_plus_stau) < POLE_TOLERANCE * (1.0 + np.abs(stau))
    if np.any(bad):
        raise PoleError("s coincides with a pole -1/tau_relax of the transfer function")


def chi_hat_pole(pole: DebyePole, s):
    """Transfer function ``delta_eps / (1 + s tau)`` of one pole.

    ``s`` may be a complex scalar or an array; the result has the same shape.
    """
    stau = np.asarray(s) * pole.tau_relax
    denom = 1.0 + stau
    _check_pole(denom, stau)
    out = pole.delta_eps / denom
    return out if np.ndim(out) else complex(out)


def chi_hat(model: MaterialModel, s):
    """Memory susceptibility of ``model`` at Laplace frequency ``s``.

    The poles are summed in stored order (ascending ``tau_relax``).  A model
    without poles returns zero.
    """
    s = np.asarray(s)
    s = s.astype(np.result_type(s.dtype, np.complex128))  # keeps clongdouble
    total = np.zeros_like(s)
    for pole in model.poles:
        total = total + chi_hat_pole(pole, s)
    return total if np.ndim(total) else complex(total)


@dataclass
class ValidationReport:
    name: str
    errors: list[str]
    eps_inf: float
    static_susceptibility: float

    @property
    def valid(self) -> bool:
        return not self.errors

    def raise_if_invalid(self):
        if self.errors:
            raise MaterialError(f"material {self.name!r}: " + "; ".join(self.errors))


def validate_model(model: MaterialModel) -> ValidationReport:
    """Check the invariants of ``model`` and report ``eps_inf`` and chi(0)."""
    errors = []
    if not np.isfinite(model.eps_inf_prime) or model.eps_inf_prime < 0:
        errors.append("eps_inf_prime must be non-negative")
    for i, pole in enumerate(model.poles):
        if not (np.isfinite(pole.delta_eps) and pole.delta_eps > 0):
            errors.append(f"pole {i}: delta_eps must be positive")
        if not (np.isfinite(pole.tau_relax) and pole.tau_relax > 0):
            errors.append(f"pole {i}: tau_relax must be positive")
    static = float(sum(p.delta_eps for p in model.poles))
    return ValidationReport(model.name, errors, model.eps_inf, static)


# Five-pole biological tissue model as (delta_eps, corner angular frequency).
TISSUE_TERMS: Sequence[tuple[float, float]] = (
    (8.5e5, 138 * np.pi),
    (8.19e3, 86e3 * np.pi),
    (1.19e3, 1.34e6 * np.pi),
    (32.0, 460e6 * np.pi),
    (45.8, 40e9 * np.pi),
)
TISSUE_EPS_INF_PRIME = 3.3


def tissue_model(name: str = "tissue") -> MaterialModel:
    """Five-pole Debye tissue model with ``eps_inf' = 3.3``."""
    return MaterialModel.from_corners(name, TISSUE_EPS_INF_PRIME, TISSUE_TERMS)
