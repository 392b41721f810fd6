"""Time-harmonic 2D eddy-current solver on triangle meshes.

Unknowns are the out-of-plane magnetic vector potential A = e_z A_z,
discretized with first-order nodal elements and pinned to zero on the
outer boundary, plus one complex constant u_i per conductor representing
the z-gradient of the electric scalar potential. Each conductor carries an
imposed total current I_i, enforced through its constraint row.

Sign convention, used consistently everywhere: the electric field inside
conductor i is E_z = -j omega A_z - u_i and the constraint reads

    integral_{conductor i} sigma (-j omega A_z - u_i) dA = +I_i

so the conductor row assembles as j omega (C^T a)_i + sigma|Omega_i| u_i
= -I_i. For omega > 0 the conductor rows are scaled by 1/(j omega), which
makes the full matrix complex symmetric (equal to its transpose, not
Hermitian). At omega = 0 the coupling term vanishes physically and the
system is assembled in its block-triangular DC reduction instead, where
sigma|Omega_i| u_i = -I_i gives the uniform DC current density directly.

A consequence worth spelling out: u_i = -Z_i I_i for a single conductor,
so the per-unit-length impedance is -u_i/I_i and the total ohmic loss is
-Re(sum_i conj(u_i) I_i)/2. Losses are integrated with the three-point
edge-midpoint rule, which is exact for the quadratic integrand |E_z|^2,
so the power balance against -Re(sum conj(u) I)/2 holds to solver
precision rather than to quadrature error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, SingularSystem
from .geometry import ExcitationSpec, MaterialSpec
from .mesher import TriMesh

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FEProblem:
    mesh: TriMesh
    material: MaterialSpec = field(default_factory=MaterialSpec)
    excitation: ExcitationSpec = field(default_factory=ExcitationSpec)
    currents: tuple[complex, ...] = ()

    def __post_init__(self):
        names = self.mesh.conductor_names()
        if not names:
            raise AssemblyError("mesh has no conductor groups")
        for name in names:
            if len(self.mesh.region_triangles(name)) == 0:
                raise AssemblyError(f"conductor group {name} has no triangles")
        if self.material.conductivity_S_per_m <= 0:
            raise AssemblyError("conductor conductivity must be positive")
        if not self.currents:
            amp = self.excitation.current_amplitude_A
            object.__setattr__(
                self, "currents", tuple(complex(amp) for _ in names))
        if len(self.currents) != len(names):
            raise AssemblyError(
                f"{len(self.currents)} currents for {len(names)} conductors")

    @property
    def conductor_count(self) -> int:
        return len(self.mesh.conductor_names())


@dataclass(eq=False)
class AssembledSystem:
    matrix: sp.csc_matrix
    rhs: np.ndarray
    free_nodes: np.ndarray       # mesh node index per nodal DOF
    node_dof: np.ndarray         # node -> DOF index, -1 on the Dirichlet rim
    conductor_offset: int        # first conductor DOF
    omega: float
    coupling: np.ndarray         # (num_nodes, N) real: sigma * int N_i over conductor
    cond_area: np.ndarray        # (N,) conductor areas
    currents: np.ndarray


@dataclass(eq=False)
class SolveResult:
    a_z: np.ndarray              # complex, per mesh node (0 on Gamma_out)
    u: np.ndarray                # complex, per conductor
    residual_norm: float
    dof_count: int


@dataclass(eq=False)
class ElementFields:
    B: np.ndarray                # (m, 2) complex, tesla
    H: np.ndarray                # (m, 2) complex, A/m
    E_z: np.ndarray              # (m,) complex, V/m (centroid value)
    J_z: np.ndarray              # (m,) complex, A/m^2, zero off conductors


def _element_gradients(mesh: TriMesh):
    """Areas and P1 shape-function gradient components per triangle."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
                  - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    domain_area = float(np.sum(np.abs(area)))
    if np.any(area <= 1e-16 * domain_area):
        raise AssemblyError("degenerate triangle in mesh")
    # grad N_i = (b_i, c_i): b_i = (y_j - y_k) / 2A, c_i = (x_k - x_j) / 2A
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]],
                 axis=1) / (2 * area[:, None])
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]],
                 axis=1) / (2 * area[:, None])
    return area, b, c


def assemble(problem: FEProblem) -> AssembledSystem:
    """Build the constrained linear system for the A-v formulation."""
    mesh = problem.mesh
    nu = problem.material.reluctivity
    sigma = problem.material.conductivity_S_per_m
    omega = problem.excitation.angular_frequency
    names = mesh.conductor_names()
    ncond = len(names)
    area, b, c = _element_gradients(mesh)
    tris = mesh.triangles.astype(np.int64)
    n_nodes = mesh.num_nodes

    # nodal stiffness: nu * area * (b_i b_j + c_i c_j), every triangle
    ke = nu * area[:, None, None] * (b[:, :, None] * b[:, None, :]
                                     + c[:, :, None] * c[:, None, :])
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    vals = ke.astype(complex).ravel()

    # conductor triangles add the eddy mass and the coupling columns
    mass_pattern = (np.ones((3, 3)) + np.eye(3)) / 12.0
    coupling = np.zeros((n_nodes, ncond))
    cond_area = np.zeros(ncond)
    if omega > 0:
        extra_rows, extra_cols, extra_vals = [], [], []
    for k, name in enumerate(names):
        idx = mesh.region_triangles(name)
        cond_area[k] = np.sum(area[idx])
        tk = tris[idx]
        np.add.at(coupling, tk.ravel(),
                  np.repeat(sigma * area[idx] / 3.0, 3)[:, None]
                  * (np.arange(ncond) == k)[None, :])
        if omega > 0:
            me = (1j * omega * sigma) * area[idx, None, None] * mass_pattern
            extra_rows.append(np.repeat(tk, 3, axis=1).ravel())
            extra_cols.append(np.tile(tk, (1, 3)).ravel())
            extra_vals.append(me.ravel())
    if omega > 0 and extra_rows:
        rows = np.concatenate([rows] + extra_rows)
        cols = np.concatenate([cols] + extra_cols)
        vals = np.concatenate([vals] + extra_vals)

    nodal = sp.coo_matrix((vals, (rows, cols)),
                          shape=(n_nodes, n_nodes)).tocsr()

    # Dirichlet elimination on the outer rim
    rim = np.unique(mesh.boundary_edges)
    node_dof = np.full(n_nodes, -1, dtype=np.int64)
    free = np.setdiff1d(np.arange(n_nodes), rim)
    node_dof[free] = np.arange(len(free))
    k_ff = nodal[free][:, free]
    c_f = sp.csr_matrix(coupling[free])

    currents = np.asarray(problem.currents, dtype=complex)
    d_diag = sigma * cond_area
    if omega > 0:
        scale = 1.0 / (1j * omega)
        matrix = sp.bmat([[k_ff, c_f],
                          [c_f.T, sp.diags(d_diag * scale)]], format="csc")
        rhs = np.concatenate([np.zeros(len(free), dtype=complex),
                              -currents * scale])
    else:
        zero = sp.csr_matrix((ncond, len(free)))
        matrix = sp.bmat([[k_ff, c_f],
                          [zero, sp.diags(d_diag.astype(complex))]],
                         format="csc")
        rhs = np.concatenate([np.zeros(len(free), dtype=complex), -currents])

    return AssembledSystem(matrix=matrix, rhs=rhs, free_nodes=free,
                           node_dof=node_dof, conductor_offset=len(free),
                           omega=omega, coupling=coupling,
                           cond_area=cond_area, currents=currents)


def solve(system: AssembledSystem) -> SolveResult:
    """Direct sparse solve with one step of iterative refinement."""
    try:
        lu = spla.splu(system.matrix)
    except RuntimeError as exc:
        raise SingularSystem(f"factorization failed: {exc}") from exc
    x = lu.solve(system.rhs)
    if not np.all(np.isfinite(x.view(float))):
        raise SingularSystem("solution contains non-finite entries")
    resid = system.rhs - system.matrix @ x
    x = x + lu.solve(resid)
    bnorm = np.linalg.norm(system.rhs)
    rnorm = np.linalg.norm(system.rhs - system.matrix @ x)
    if bnorm > 0:
        rnorm /= bnorm
    if rnorm > RESIDUAL_TOL:
        raise SingularSystem(f"relative residual {rnorm:.2e} above tolerance")

    n_nodes = len(system.node_dof)
    a_z = np.zeros(n_nodes, dtype=complex)
    a_z[system.free_nodes] = x[:system.conductor_offset]
    u = x[system.conductor_offset:]
    return SolveResult(a_z=a_z, u=u, residual_norm=float(rnorm),
                       dof_count=len(x))


def solve_problem(problem: FEProblem) -> SolveResult:
    return solve(assemble(problem))


def conductor_currents(result: SolveResult, problem: FEProblem) -> np.ndarray:
    """Recompute each conductor's total current from the solved fields."""
    mesh = problem.mesh
    sigma = problem.material.conductivity_S_per_m
    omega = problem.excitation.angular_frequency
    area, _, _ = _element_gradients(mesh)
    names = mesh.conductor_names()
    out = np.zeros(len(names), dtype=complex)
    tris = mesh.triangles
    for k, name in enumerate(names):
        idx = mesh.region_triangles(name)
        a_mean = result.a_z[tris[idx]].mean(axis=1)  # exact for linear A
        ints_a = np.sum(a_mean * area[idx])
        out[k] = sigma * (-1j * omega * ints_a - result.u[k] * np.sum(area[idx]))
    return out


def derive_fields(result: SolveResult, problem: FEProblem) -> ElementFields:
    """Element-constant B and H everywhere, centroid E_z and J_z."""
    mesh = problem.mesh
    sigma = problem.material.conductivity_S_per_m
    nu = problem.material.reluctivity
    omega = problem.excitation.angular_frequency
    _, b, c = _element_gradients(mesh)
    a_tri = result.a_z[mesh.triangles]
    # B = curl(e_z A_z) = (dA/dy, -dA/dx), constant per P1 triangle
    bx = np.sum(a_tri * c, axis=1)
    by = -np.sum(a_tri * b, axis=1)
    B = np.column_stack([bx, by])
    a_centroid = a_tri.mean(axis=1)
    E = -1j * omega * a_centroid
    J = np.zeros_like(E)
    for k, name in enumerate(mesh.conductor_names()):
        idx = mesh.region_triangles(name)
        E[idx] = -1j * omega * a_centroid[idx] - result.u[k]
        J[idx] = sigma * E[idx]
    return ElementFields(B=B, H=nu * B, E_z=E, J_z=J)


def element_loss(result: SolveResult, problem: FEProblem) -> np.ndarray:
    """Ohmic loss per triangle, W/m, exact for the P1 solution.

    |E_z|^2 is quadratic over each triangle, so the edge-midpoint rule
    integrates it exactly; zero outside conductors.
    """
    mesh = problem.mesh
    sigma = problem.material.conductivity_S_per_m
    omega = problem.excitation.angular_frequency
    area, _, _ = _element_gradients(mesh)
    loss = np.zeros(mesh.num_triangles)
    a_tri = result.a_z[mesh.triangles]
    mids = 0.5 * (a_tri + np.roll(a_tri, -1, axis=1))  # A at edge midpoints
    for k, name in enumerate(mesh.conductor_names()):
        idx = mesh.region_triangles(name)
        e_mid = -1j * omega * mids[idx] - result.u[k]
        loss[idx] = (sigma / 2.0) * (area[idx] / 3.0) * np.sum(
            np.abs(e_mid) ** 2, axis=1)
    return loss


@dataclass(frozen=True)
class ConductorReport:
    index: int                   # 1-based, matches Omega_c_<index>
    name: str
    current_A: complex
    u_V_per_m: complex
    loss_W_per_m: float
    area_m2: float
    loss_density_mean: float     # W/m^3
    loss_density_max: float


def conductor_report(result: SolveResult, problem: FEProblem) -> list[ConductorReport]:
    mesh = problem.mesh
    area, _, _ = _element_gradients(mesh)
    losses = element_loss(result, problem)
    currents = conductor_currents(result, problem)
    reports = []
    for k, name in enumerate(mesh.conductor_names()):
        idx = mesh.region_triangles(name)
        dens = losses[idx] / area[idx]
        reports.append(ConductorReport(
            index=k + 1, name=name,
            current_A=complex(currents[k]),
            u_V_per_m=complex(result.u[k]),
            loss_W_per_m=float(np.sum(losses[idx])),
            area_m2=float(np.sum(area[idx])),
            loss_density_mean=float(dens.mean()),
            loss_density_max=float(dens.max())))
    return reports


def total_loss(result: SolveResult, problem: FEProblem) -> float:
    return float(np.sum(element_loss(result, problem)))


def power_balance(result: SolveResult, problem: FEProblem) -> tuple[float, float]:
    """(summed element loss, -Re(sum conj(u) I)/2); equal up to roundoff."""
    direct = total_loss(result, problem)
    currents = np.asarray(problem.currents, dtype=complex)
    via_u = -0.5 * float(np.real(np.sum(np.conj(result.u) * currents)))
    return direct, via_u


def impedance_per_length(result: SolveResult, problem: FEProblem,
                         conductor: int = 0) -> complex:
    """Per-unit-length impedance -u_i / I_i, ohm/m."""
    current = complex(problem.currents[conductor])
    if current == 0:
        raise ZeroDivisionError("impedance undefined for zero imposed current")
    return -complex(result.u[conductor]) / current
