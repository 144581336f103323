"""Uniform 1D linear-element meshes, element matrices and banded assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lapack, solve_banded

# Guard for N**q, M**q with negative q near zero density (cells/cm^3).
DENSITY_FLOOR = 1e-3

_DIFF = np.array([[1.0, -1.0], [-1.0, 1.0]])
_CONV = np.array([[-1.0, -1.0], [1.0, 1.0]])
_MASS = np.array([[2.0, 1.0], [1.0, 2.0]])


@dataclass(frozen=True)
class Mesh:
    n_elements: int
    x_left: float
    x_right: float
    nodes: np.ndarray = field(repr=False)
    h: float

    @property
    def n_nodes(self) -> int:
        return self.n_elements + 1

    @property
    def length(self) -> float:
        return self.x_right - self.x_left


def build_mesh(n: int, a: float, b: float) -> Mesh:
    if int(n) != n or n < 1:
        raise ValueError(f"need at least one element, got n={n}")
    if not a < b:
        raise ValueError(f"empty interval ({a}, {b})")
    n = int(n)
    h = (b - a) / n
    nodes = a + h * np.arange(n + 1)
    nodes[-1] = b
    return Mesh(n, float(a), float(b), nodes, h)


def _check_h(h: float) -> None:
    if not h > 0:
        raise ValueError(f"element length must be positive, got {h}")


def element_mass(h: float, lumped: bool = False) -> np.ndarray:
    _check_h(h)
    if lumped:
        return 0.5 * h * np.eye(2)
    return h / 6.0 * _MASS


def mech_element_blocks(p, h: float) -> dict[str, np.ndarray]:
    """Element matrices of the linearized velocity/strain system.

    ``S_ev`` carries the factor ``1 - eps0`` from the strain equation
    linearized about ``eps0``; it is the plain matrix when ``eps0 = 0``.
    """
    _check_h(h)
    return {
        "S_vv": p.mu / h * _DIFF,
        "S_ve": 0.5 * p.stiffness * _CONV,
        "S_ev": 0.5 * (1.0 - p.eps0) * _CONV,
        "S_ee": p.alpha * h / 6.0 * _MASS,
    }


def mech_element_matrix(p, h: float, dt: float) -> np.ndarray:
    """4x4 backward Euler element matrix in local order (v0, e0, v1, e1)."""
    b = mech_element_blocks(p, h)
    m = element_mass(h)
    vv = p.rho_t * m + dt * b["S_vv"]
    ve = dt * b["S_ve"]
    ev = dt * b["S_ev"]
    ee = m + dt * b["S_ee"]
    out = np.empty((4, 4))
    out[0::2, 0::2] = vv
    out[0::2, 1::2] = ve
    out[1::2, 0::2] = ev
    out[1::2, 1::2] = ee
    return out


def reaction_factors(p, c, N, M, rho):
    """Nodal coefficients f^c, f^N, f^M, g^rho, f^rho used by the chemistry blocks."""
    c, N, M, rho = (np.asarray(a, dtype=float) for a in (c, N, M, rho))
    if np.any(p.a_c_II + c <= 0) or np.any(p.a_c_I + c <= 0) or np.any(p.a_c_IV + c <= 0):
        raise ValueError("negative chemokine concentration beyond model validity")
    F = N + M
    mmp_inhibit = 1.0 + p.a_c_III * c
    if np.any(mmp_inhibit <= 0):
        raise ValueError("negative chemokine concentration beyond model validity")
    secreting = N + p.eta_I * M
    mmp = (N + p.eta_II * M) * rho / mmp_inhibit
    crowd = 1.0 - p.kappa_F * F
    enh_c = c / (p.a_c_I + c)
    f_c = p.k_c / (p.a_c_II + c) * secreting - p.delta_c * mmp
    f_N = p.r_F * (1.0 + p.r_F_max * enh_c) * crowd * np.maximum(N, DENSITY_FLOOR) ** p.q
    f_M = p.r_F * (1.0 + p.r_F_max) * enh_c * crowd * np.maximum(M, DENSITY_FLOOR) ** p.q
    g_rho = p.delta_rho * mmp
    f_rho = p.k_rho * (1.0 + p.k_rho_max * c / (p.a_c_IV + c)) * secreting
    return f_c, f_N, f_M, g_rho, f_rho


def chem_element_blocks(p, c, N, M, rho, h: float) -> dict[str, np.ndarray]:
    """Chemistry element matrices and load vectors for every element.

    Nodal arrays of length ``n + 1`` give blocks stacked with shape
    ``(n, 2, 2)`` (matrices) and ``(n, 2)`` (vectors); a single element is
    the case ``n = 1``. Reaction coefficients are sampled at element end
    points; the concentration gradient is the element-constant slope.
    """
    _check_h(h)
    c, N, M, rho = (np.asarray(a, dtype=float) for a in (c, N, M, rho))
    f_c, f_N, f_M, g_rho, f_rho = reaction_factors(p, c, N, M, rho)
    grad_c = np.diff(c) / h
    F = N + M
    F_sum = F[:-1] + F[1:]

    def diag(v):
        out = np.zeros((v.size - 1, 2, 2))
        out[:, 0, 0] = v[:-1]
        out[:, 1, 1] = v[1:]
        return out

    ne = c.size - 1
    diffusion = (p.D_F / (2.0 * h) * F_sum)[:, None, None] * _DIFF
    chemotaxis = -0.5 * p.chi_F * grad_c[:, None, None] * _CONV
    mass6 = h / 6.0 * _MASS
    S_c = np.broadcast_to(p.D_c / h * _DIFF, (ne, 2, 2)) - 0.5 * h * diag(f_c)
    S_N = diffusion + chemotaxis - 0.5 * h * diag(f_N - p.k_F * c) + p.delta_N * mass6
    S_M = diffusion + chemotaxis - 0.5 * h * diag(f_M) + p.delta_M * mass6
    S_rho = 0.5 * h * diag(g_rho)
    cN = c * N
    F_M = 0.5 * h * p.k_F * np.stack([cN[:-1], cN[1:]], axis=1)
    F_rho = 0.5 * h * np.stack([f_rho[:-1], f_rho[1:]], axis=1)
    return {"S_c": S_c, "S_N": S_N, "S_M": S_M, "S_rho": S_rho, "F_M": F_M, "F_rho": F_rho}


@dataclass
class AssembledSystem:
    """Banded global operator in LAPACK/``solve_banded`` layout.

    ``ab[bw + i - j, j] = A[i, j]`` with equal lower and upper bandwidth ``bw``.
    """

    ab: np.ndarray
    bw: int
    rhs: np.ndarray
    constrained: list[tuple[int, float]] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.ab.shape[1]

    def apply_dirichlet(self, constraints) -> None:
        n, bw = self.size, self.bw
        for row, value in constraints:
            for j in range(max(0, row - bw), min(n, row + bw + 1)):
                self.ab[bw + row - j, j] = 0.0
            self.ab[bw, row] = 1.0
            self.rhs[row] = value
            self.constrained.append((row, value))

    def to_dense(self) -> np.ndarray:
        n, bw = self.size, self.bw
        A = np.zeros((n, n))
        for d in range(-bw, bw + 1):
            j = np.arange(max(0, -d), min(n, n - d))
            A[j + d, j] = self.ab[bw + d, j]
        return A

    def matvec(self, x: np.ndarray) -> np.ndarray:
        n, bw = self.size, self.bw
        y = np.zeros(n)
        for d in range(-bw, bw + 1):
            j = np.arange(max(0, -d), min(n, n - d))
            y[j + d] += self.ab[bw + d, j] * x[j]
        return y

    def solve(self, rhs: np.ndarray | None = None) -> np.ndarray:
        b = self.rhs if rhs is None else rhs
        x = solve_banded((self.bw, self.bw), self.ab, b, check_finite=False)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite solution of the assembled system")
        return x

    def factorize(self) -> BandedLU:
        return BandedLU(self)


class BandedLU:
    """LU factors of an :class:`AssembledSystem`, reusable for many right-hand sides."""

    def __init__(self, system: AssembledSystem):
        bw, n = system.bw, system.size
        work = np.zeros((3 * bw + 1, n))
        work[bw:, :] = system.ab
        self._lu, self._piv, info = lapack.dgbtrf(work, bw, bw)
        if info != 0:
            raise np.linalg.LinAlgError(f"singular banded system (dgbtrf info={info})")
        self.bw = bw

    def solve(self, b: np.ndarray) -> np.ndarray:
        x, info = lapack.dgbtrs(self._lu, self.bw, self.bw, b, self._piv)
        if info != 0 or not np.all(np.isfinite(x)):
            raise FloatingPointError("banded back-substitution failed")
        return x


def _element_dofs(n_elements: int, m: int) -> np.ndarray:
    base = np.arange(n_elements)[:, None] * m
    return np.concatenate([base + k for k in range(2 * m)], axis=1)


def assemble(
    mesh: Mesh,
    blocks: np.ndarray | Callable[[int], np.ndarray],
    loads: np.ndarray | None = None,
    dirichlet=(),
    dofs_per_node: int = 1,
) -> AssembledSystem:
    """Scatter element matrices (and optional load vectors) into a banded system.

    ``blocks`` is either an array of shape ``(n_elements, 2m, 2m)`` (a single
    ``(2m, 2m)`` block is reused on every element) or a callable mapping an
    element index to its block. Local dof order is node-major:
    ``(node0 dof0..dof{m-1}, node1 dof0..)``. ``dirichlet`` pairs refer to
    global dof indices.
    """
    m = dofs_per_node
    ne = mesh.n_elements
    if callable(blocks):
        blocks = np.stack([np.asarray(blocks(e), dtype=float) for e in range(ne)])
    blocks = np.asarray(blocks, dtype=float)
    if blocks.shape == (2 * m, 2 * m):
        blocks = np.broadcast_to(blocks, (ne, 2 * m, 2 * m))
    if blocks.shape != (ne, 2 * m, 2 * m):
        raise ValueError(
            f"block shape {blocks.shape} does not match mesh with {ne} elements"
            f" and {m} dof(s) per node"
        )
    n = m * mesh.n_nodes
    bw = 2 * m - 1
    ab = np.zeros((2 * bw + 1, n))
    dofs = _element_dofs(ne, m)
    # Elements touching the same entry are added in increasing element order.
    for a in range(2 * m):
        for b in range(2 * m):
            i, j = dofs[:, a], dofs[:, b]
            np.add.at(ab, (bw + i - j, j), blocks[:, a, b])
    rhs = np.zeros(n)
    if loads is not None:
        loads = np.asarray(loads, dtype=float)
        if loads.shape != (ne, 2 * m):
            raise ValueError(f"load shape {loads.shape} does not match mesh")
        for a in range(2 * m):
            np.add.at(rhs, dofs[:, a], loads[:, a])
    system = AssembledSystem(ab, bw, rhs)
    system.apply_dirichlet(dirichlet)
    return system


def assemble_dense(mesh: Mesh, blocks: np.ndarray, dofs_per_node: int = 1) -> np.ndarray:
    """Reference dense assembly, used to check :func:`assemble`."""
    m = dofs_per_node
    n = m * mesh.n_nodes
    A = np.zeros((n, n))
    blocks = np.asarray(blocks, dtype=float)
    if blocks.ndim == 2:
        blocks = np.broadcast_to(blocks, (mesh.n_elements,) + blocks.shape)
    for e, dofs in enumerate(_element_dofs(mesh.n_elements, m)):
        A[np.ix_(dofs, dofs)] += blocks[e]
    return A


def tridiag_from_elements(blocks: np.ndarray) -> np.ndarray:
    """Fast scalar assembly: ``(n, 2, 2)`` element blocks to a ``(3, n+1)`` banded matrix."""
    ne = blocks.shape[0]
    ab = np.zeros((3, ne + 1))
    ab[1, :-1] += blocks[:, 0, 0]
    ab[1, 1:] += blocks[:, 1, 1]
    ab[0, 1:] = blocks[:, 0, 1]
    ab[2, :-1] = blocks[:, 1, 0]
    return ab


def scatter_loads(loads: np.ndarray) -> np.ndarray:
    out = np.zeros(loads.shape[0] + 1)
    out[:-1] += loads[:, 0]
    out[1:] += loads[:, 1]
    return out
