"""Transient plane-stress finite elements on triangulated plates.

Constant-strain triangles, lumped mass, no damping, average-acceleration
Newmark time integration. Degrees of freedom interleave as (u_x, u_y) per node:
node n owns DOFs 2n and 2n+1.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite
from scipy.sparse.linalg import splu

from .errors import AssemblyError, SolverError
from .geometry import Mesh


@dataclass(frozen=True)
class Material:
    """Homogeneous isotropic linear-elastic plate material."""

    youngs_modulus: float = 200e9   # Pa
    poisson_ratio: float = 0.3
    density: float = 7850.0         # kg/m^3
    thickness: float = 0.01         # m

    def __post_init__(self):
        if self.youngs_modulus <= 0:
            raise AssemblyError(f"E must be > 0, got {self.youngs_modulus}")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise AssemblyError(f"nu must be in [0, 0.5), got {self.poisson_ratio}")
        if self.density <= 0 or self.thickness <= 0:
            raise AssemblyError("density and thickness must be > 0")

    @property
    def d_matrix(self) -> np.ndarray:
        """Plane-stress constitutive matrix (3x3, Pa)."""
        e, nu = self.youngs_modulus, self.poisson_ratio
        return (e / (1.0 - nu**2)) * np.array(
            [
                [1.0, nu, 0.0],
                [nu, 1.0, 0.0],
                [0.0, 0.0, (1.0 - nu) / 2.0],
            ]
        )


STEEL = Material()


@dataclass(frozen=True)
class SystemMatrices:
    """Assembled global operators plus the constrained DOF set."""

    stiffness: sp.csr_matrix          # (2N, 2N), N/m
    mass: sp.csr_matrix               # (2N, 2N), kg, diagonal (lumped)
    fixed_dofs: frozenset[int] = field(default_factory=frozenset)

    @property
    def n_dofs(self) -> int:
        return self.stiffness.shape[0]

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        if self.fixed_dofs:
            mask[list(self.fixed_dofs)] = False
        return np.nonzero(mask)[0]


@dataclass(frozen=True)
class DynamicResponse:
    """Nodal kinematics over the time grid; constrained DOFs stay zero."""

    displacements: np.ndarray  # (N, 2, T), m
    accelerations: np.ndarray  # (N, 2, T), m/s^2


def _element_geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Per-element B matrices (K, 3, 6) and signed areas (K,)."""
    tri = mesh.triangles
    p = mesh.nodes[tri]  # (K, 3, 2)
    x, y = p[..., 0], p[..., 1]
    # b_i = y_j - y_k, c_i = x_k - x_j with (i, j, k) cyclic
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area2 = x[:, 0] * b[:, 0] + x[:, 1] * b[:, 1] + x[:, 2] * b[:, 2]
    if np.any(area2 <= 0):
        bad = int(np.argmax(area2 <= 0))
        raise AssemblyError(f"element {bad} has non-positive area {area2[bad] / 2.0:.3e}")
    k = len(tri)
    bmat = np.zeros((k, 3, 6))
    for i in range(3):
        bmat[:, 0, 2 * i] = b[:, i]
        bmat[:, 1, 2 * i + 1] = c[:, i]
        bmat[:, 2, 2 * i] = c[:, i]
        bmat[:, 2, 2 * i + 1] = b[:, i]
    bmat /= area2[:, None, None]
    return bmat, area2 / 2.0


def assemble(
    mesh: Mesh, material: Material, fixed_nodes: np.ndarray | None = None
) -> SystemMatrices:
    """Assemble global stiffness and lumped mass for a mesh.

    `fixed_nodes` lists node ids whose two DOFs are constrained to zero; it may
    be omitted for modal/rigid-body analysis of the unconstrained operator.
    """
    bmat, areas = _element_geometry(mesh)
    d = material.d_matrix
    t_pl = material.thickness
    ke = t_pl * areas[:, None, None] * np.einsum("kji,jl,klm->kim", bmat, d, bmat)

    tri = mesh.triangles
    dof = np.empty((len(tri), 6), dtype=np.int64)
    dof[:, 0::2] = 2 * tri
    dof[:, 1::2] = 2 * tri + 1
    rows = np.repeat(dof, 6, axis=1).ravel()
    cols = np.tile(dof, (1, 6)).ravel()
    n_dofs = 2 * mesh.n_nodes
    stiffness = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()

    # lumped mass: each element spreads rho*t*A equally over its three nodes
    node_mass = np.zeros(mesh.n_nodes)
    share = material.density * t_pl * areas / 3.0
    np.add.at(node_mass, tri[:, 0], share)
    np.add.at(node_mass, tri[:, 1], share)
    np.add.at(node_mass, tri[:, 2], share)
    mass = sp.diags(np.repeat(node_mass, 2)).tocsr()

    fixed = frozenset()
    if fixed_nodes is not None and len(fixed_nodes):
        fixed = frozenset(
            int(d) for n in np.asarray(fixed_nodes).ravel() for d in (2 * n, 2 * n + 1)
        )
    return SystemMatrices(stiffness=stiffness, mass=mass, fixed_dofs=fixed)


def newmark_solve(
    sys: SystemMatrices, load_history: np.ndarray, dt: float
) -> DynamicResponse:
    """Integrate M a + K u = F(t) from rest with average-acceleration Newmark.

    beta = 1/4, gamma = 1/2 (unconditionally stable); zero initial displacement
    and velocity; constrained DOFs pinned to zero at every step. `load_history`
    is (2N, T) nodal forces in newtons.
    """
    if dt <= 0:
        raise SolverError(f"dt must be > 0, got {dt}")
    n_dofs, n_steps = load_history.shape
    if n_dofs != sys.n_dofs:
        raise SolverError(
            f"load history has {n_dofs} DOFs but the system has {sys.n_dofs}"
        )
    free = sys.free_dofs
    kff = sys.stiffness[free][:, free].tocsc()
    mff = sys.mass[free][:, free]
    m_diag = mff.diagonal()
    if np.any(m_diag <= 0):
        raise SolverError("lumped mass has non-positive entries")

    k_eff = (kff + (4.0 / dt**2) * mff).tocsc()
    try:
        lu = splu(k_eff)
    except RuntimeError as exc:  # singular factorization
        raise SolverError(f"effective matrix is singular: {exc}") from None

    u = np.zeros((len(free), n_steps))
    a = np.zeros((len(free), n_steps))
    f = load_history[free]
    # initial acceleration from dynamic equilibrium at rest: M a0 = F0 - K*0
    a[:, 0] = f[:, 0] / m_diag
    v = np.zeros(len(free))
    for t in range(n_steps - 1):
        rhs = f[:, t + 1] + m_diag * (
            (4.0 / dt**2) * u[:, t] + (4.0 / dt) * v + a[:, t]
        )
        u_next = lu.solve(rhs)
        a_next = (4.0 / dt**2) * (u_next - u[:, t]) - (4.0 / dt) * v - a[:, t]
        v = v + 0.5 * dt * (a[:, t] + a_next)
        u[:, t + 1] = u_next
        a[:, t + 1] = a_next

    n_nodes = sys.n_dofs // 2
    disp = np.zeros((sys.n_dofs, n_steps))
    acc = np.zeros((sys.n_dofs, n_steps))
    disp[free] = u
    acc[free] = a
    return DynamicResponse(
        displacements=disp.reshape(n_nodes, 2, n_steps),
        accelerations=acc.reshape(n_nodes, 2, n_steps),
    )


def recover_stress(mesh: Mesh, material: Material, u: np.ndarray) -> np.ndarray:
    """Nodal stress (N, 3) from nodal displacements (N, 2).

    Element stresses are constant (D B u_e); nodal values average adjacent
    element stresses weighted by element area.
    """
    if not np.all(np.isfinite(u)):
        raise AssemblyError("displacements contain non-finite values")
    multi = u.ndim == 3  # (N, 2, T) batch over frames
    ue = u if multi else u[..., None]
    bmat, areas = _element_geometry(mesh)
    d = material.d_matrix
    tri = mesh.triangles
    # gather element displacement vectors (K, 6, T), DOFs interleaved per node
    ue = ue[tri].reshape(len(tri), 6, ue.shape[-1])
    sigma_e = np.einsum("ij,kjm,kmt->kit", d, bmat, ue)  # (K, 3, T)

    weighted = sigma_e * areas[:, None, None]
    nodal = np.zeros((mesh.n_nodes, 3, ue.shape[-1]))
    wsum = np.zeros(mesh.n_nodes)
    for v in range(3):
        np.add.at(nodal, tri[:, v], weighted)
        np.add.at(wsum, tri[:, v], areas)
    nodal /= wsum[:, None, None]
    return nodal if multi else nodal[..., 0]


def von_mises(sxx, syy, sxy):
    """Plane-stress von Mises equivalent stress (elementwise)."""
    return np.sqrt(sxx**2 + syy**2 - sxx * syy + 3.0 * sxy**2)


def tributary_areas(mesh: Mesh) -> np.ndarray:
    """Per-node tributary area (m^2): one third of each adjacent element."""
    _, areas = _element_geometry(mesh)
    out = np.zeros(mesh.n_nodes)
    for v in range(3):
        np.add.at(out, mesh.triangles[:, v], areas / 3.0)
    return out


def dump_matrices(sys: SystemMatrices, stiffness_path: str, mass_path: str) -> None:
    """Debug export of K and M in MatrixMarket text format."""
    mmwrite(stiffness_path, sys.stiffness)
    mmwrite(mass_path, sys.mass)
