"""Uniform periodic 1D mesh, lumped mass matrices and the discrete curl.

Layout of the unknowns (periodic, ``n`` cells and ``n`` nodes)::

    node:     0     1     2          n-1   (n == 0)
              |-----|-----|-- ... ---|-----|
    element:     0     1                n-1

``e`` and the polarizations are nodal (P1, vertex-rule lumped), ``h`` is
elementwise constant (P0).  The discrete curl maps nodes to elements,
``(C e)_j = e_{j+1} - e_j``, so that ``(C^T h)_k = h_{k-1} - h_k``.

A node takes the material of the element on its right.  On an interface node
between air (left) and tissue (right) that means tissue; on the far side of
the tissue slab the interface node is air.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .material import MaterialModel, PhysicalConstants, validate_model

log = logging.getLogger(__name__)

CFL_SEED = 20200417
CFL_TOL = 1e-12
CFL_MAXITER = 20000


class MeshError(ValueError):
    pass


class LayoutError(ValueError):
    pass


class CFLError(RuntimeError):
    """The largest generalized eigenvalue could not be resolved."""


@dataclass(frozen=True)
class Mesh1D:
    z_min: float
    z_max: float
    n_cells: int
    periodic: bool = True

    @property
    def h(self) -> float:
        return (self.z_max - self.z_min) / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return self.z_min + self.h * np.arange(self.n_cells)

    @property
    def midpoints(self) -> np.ndarray:
        return self.z_min + self.h * (np.arange(self.n_cells) + 0.5)

    @property
    def length(self) -> float:
        return self.z_max - self.z_min


def build_mesh(z_min: float, z_max: float, n_cells: int) -> Mesh1D:
    if not (np.isfinite(z_min) and np.isfinite(z_max)) or z_max <= z_min:
        raise MeshError(f"invalid extents ({z_min}, {z_max})")
    if int(n_cells) != n_cells or n_cells < 2:
        raise MeshError(f"need at least 2 cells, got {n_cells}")
    return Mesh1D(float(z_min), float(z_max), int(n_cells))


@dataclass(frozen=True)
class Segment:
    z_start: float
    z_end: float
    material: str


@dataclass(frozen=True)
class MaterialLayout:
    """Intervals ``[z_start, z_end)`` tagged with material names.

    Segments must be ordered, must not overlap and must tile the domain;
    :meth:`validate` checks this against a mesh.
    """

    segments: tuple[Segment, ...]

    @classmethod
    def from_list(cls, items: Sequence) -> "MaterialLayout":
        segs = []
        for item in items:
            if isinstance(item, Segment):
                segs.append(item)
            elif isinstance(item, Mapping):
                segs.append(Segment(float(item["start"]), float(item["end"]), str(item["material"])))
            else:
                a, b, name = item
                segs.append(Segment(float(a), float(b), str(name)))
        return cls(tuple(sorted(segs, key=lambda s: s.z_start)))

    @classmethod
    def uniform(cls, mesh: Mesh1D, material: str) -> "MaterialLayout":
        return cls((Segment(mesh.z_min, mesh.z_max, material),))

    def material_names(self) -> list[str]:
        seen = []
        for seg in self.segments:
            if seg.material not in seen:
                seen.append(seg.material)
        return seen

    def validate(self, z_min: float, z_max: float, atol: float = 1e-12) -> None:
        if not self.segments:
            raise LayoutError("layout is empty")
        scale = atol * max(1.0, abs(z_max - z_min))
        for seg in self.segments:
            if seg.z_end <= seg.z_start:
                raise LayoutError(f"empty or reversed interval [{seg.z_start}, {seg.z_end}]")
        if abs(self.segments[0].z_start - z_min) > scale:
            raise LayoutError("layout does not start at the domain boundary")
        if abs(self.segments[-1].z_end - z_max) > scale:
            raise LayoutError("layout does not end at the domain boundary")
        for left, right in zip(self.segments, self.segments[1:]):
            if right.z_start < left.z_end - scale:
                raise LayoutError(
                    f"intervals [{left.z_start}, {left.z_end}] and "
                    f"[{right.z_start}, {right.z_end}] overlap"
                )
            if right.z_start > left.z_end + scale:
                raise LayoutError(f"gap between {left.z_end} and {right.z_start}")

    def element_materials(self, mesh: Mesh1D) -> list[str]:
        """Material of every element, looked up at the element midpoint."""
        starts = np.array([s.z_start for s in self.segments])
        idx = np.searchsorted(starts, mesh.midpoints, side="right") - 1
        idx = np.clip(idx, 0, len(self.segments) - 1)
        return [self.segments[i].material for i in idx]


@dataclass
class Region:
    """Nodes sharing one material."""

    name: str
    model: MaterialModel
    nodes: np.ndarray

    @property
    def n_poles(self) -> int:
        return len(self.model.poles)


@dataclass
class DiscreteOperators:
    """Diagonal mass matrices (stored as vectors) and the sparse curl.

    ``m_h``: element mass ``mu0 h``; ``m_e``: nodal mass ``eps0 eps_inf h``;
    ``m_lumped``: nodal mass ``h``.  Per-pole masses are
    ``M_d,i = tau_i / (eps0 d_eps_i) M_lumped`` and
    ``M_p,i = 1 / (eps0 d_eps_i) M_lumped`` on the nodes of the pole's region.
    """

    mesh: Mesh1D
    constants: PhysicalConstants
    m_h: np.ndarray
    m_e: np.ndarray
    m_lumped: np.ndarray
    curl: sp.csr_matrix
    regions: list[Region] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    @property
    def n_cells(self) -> int:
        return self.mesh.n_cells

    @property
    def dispersive_regions(self) -> list[Region]:
        return [r for r in self.regions if r.n_poles]

    def curl_t(self, h: np.ndarray) -> np.ndarray:
        return self.curl.T @ h

    def pole_masses(self, region: Region) -> tuple[np.ndarray, np.ndarray]:
        """``(M_d, M_p)`` for ``region`` as arrays of shape ``(n_poles, n_region_nodes)``."""
        eps0 = self.constants.eps0
        ml = self.m_lumped[region.nodes]
        tau = np.array([p.tau_relax for p in region.model.poles])[:, None]
        deps = np.array([p.delta_eps for p in region.model.poles])[:, None]
        m_p = ml[None, :] / (eps0 * deps)
        return tau * m_p, m_p


def curl_matrix(n: int) -> sp.csr_matrix:
    rows = np.repeat(np.arange(n), 2)
    cols = np.column_stack([np.arange(n), (np.arange(n) + 1) % n]).ravel()
    vals = np.tile([-1.0, 1.0], n)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def build_operators(
    mesh: Mesh1D,
    layout: MaterialLayout,
    materials: Mapping[str, MaterialModel],
    constants: PhysicalConstants | None = None,
) -> DiscreteOperators:
    constants = constants or PhysicalConstants()
    layout.validate(mesh.z_min, mesh.z_max)
    for name in layout.material_names():
        if name not in materials:
            raise LayoutError(f"layout references unknown material {name!r}")
        validate_model(materials[name]).raise_if_invalid()

    node_material = layout.element_materials(mesh)
    regions = []
    eps_inf = np.empty(mesh.n_nodes)
    for name in layout.material_names():
        nodes = np.array([k for k, m in enumerate(node_material) if m == name], dtype=int)
        if nodes.size == 0:
            continue
        model = materials[name]
        eps_inf[nodes] = model.eps_inf
        regions.append(Region(name, model, nodes))

    h = mesh.h
    return DiscreteOperators(
        mesh=mesh,
        constants=constants,
        m_h=np.full(mesh.n_cells, constants.mu0 * h),
        m_e=constants.eps0 * eps_inf * h,
        m_lumped=np.full(mesh.n_nodes, h),
        curl=curl_matrix(mesh.n_cells),
        regions=regions,
    )


def stiffness_matrix(ops: DiscreteOperators) -> sp.csr_matrix:
    """``C^T M_h^-1 C``."""
    return (ops.curl.T @ sp.diags(1.0 / ops.m_h) @ ops.curl).tocsr()


def cfl_bound(ops: DiscreteOperators, seed: int = CFL_SEED, tol: float = CFL_TOL) -> float:
    """Largest stable leapfrog step ``1 / sqrt(lambda_max)``.

    ``lambda_max`` is the top eigenvalue of ``C^T M_h^-1 C x = lambda M_e x``,
    computed on the symmetrized operator by implicitly restarted Lanczos
    (ARPACK) from a seeded start vector.  Lanczos is the Krylov acceleration
    of power iteration; plain power iteration stalls on the clustered top of
    the periodic Laplacian spectrum.  Raises :class:`CFLError` after
    ``CFL_MAXITER`` restarts.
    """
    k = stiffness_matrix(ops)
    d = 1.0 / np.sqrt(ops.m_e)
    n = ops.n_nodes
    if n <= 8:
        a = (d[:, None] * k.toarray()) * d[None, :]
        lam = float(np.linalg.eigvalsh(a)[-1])
    else:
        op = LinearOperator((n, n), matvec=lambda x: d * (k @ (d * x)), dtype=float)
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            vals = eigsh(op, k=1, which="LA", v0=v0, tol=tol, maxiter=CFL_MAXITER,
                         return_eigenvectors=False)
        except ArpackNoConvergence as exc:
            raise CFLError("eigenvalue iteration did not converge") from exc
        lam = float(vals[0])
    if lam <= 0:
        raise CFLError("non-positive spectral radius; operator is degenerate")
    return 1.0 / np.sqrt(lam)
