"""Independent checks: dense spectra of periodic finite-difference operators
and a finite-difference reference solver for cross-validating the FEM runs."""

from __future__ import annotations

import json

import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve_banded
from scipy.optimize import linear_sum_assignment

from .chemistry import FIELDS, ChemState
from .fem import DENSITY_FLOOR, build_mesh
from .mechanics import MechState, Trajectory
from .stability import chem_discrete_spectrum, mech_discrete_spectrum

MAX_DENSE = 2048


def dense_spectrum(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("operator must be square")
    if A.shape[0] > MAX_DENSE:
        raise ValueError(f"dense eigen-solve limited to dimension {MAX_DENSE}")
    eigs = np.linalg.eigvals(A).astype(complex)
    return eigs[np.lexsort((eigs.imag, eigs.real))]


def _circulant(n, stencil):
    """Periodic matrix with ``stencil = {offset: weight}`` on every row."""
    C = np.zeros((n, n))
    idx = np.arange(n)
    for off, w in stencil.items():
        C[idx, (idx + off) % n] += w
    return C


def build_periodic_fdm_operator(system: str, p, n: int) -> np.ndarray:
    """Operator ``A`` of ``y' + A y = 0`` for divided differences on a periodic unit grid.

    ``system`` is ``"mech"`` (unknowns ``[v, eps]``) or ``"chem"``
    (unknowns ``[c, N, M, rho]``), each block of size ``n``.
    """
    if n < 4:
        raise ValueError("need at least 4 grid points")
    h = 1.0 / n
    lap = _circulant(n, {-1: 1.0, 0: -2.0, 1: 1.0}) / h**2
    cdiff = _circulant(n, {-1: -1.0, 1: 1.0}) / (2 * h)
    I = np.eye(n)
    Z = np.zeros((n, n))
    if system == "mech":
        return np.block(
            [
                [-p.mu / p.rho_t * lap, -p.stiffness / p.rho_t * cdiff],
                [-cdiff, p.alpha * I],
            ]
        )
    if system == "chem":
        Nb, rb = p.N_bar, p.rho_bar
        kin_N = p.delta_N - p.r_F * (1 - p.kappa_F * Nb) * Nb**p.q
        kin_c = (p.delta_c * rb - p.k_c / p.a_c_II) * Nb
        return np.block(
            [
                [-p.D_c * lap + kin_c * I, Z, Z, Z],
                [p.chi_F * Nb * lap + p.k_F * Nb * I, -p.D_F * Nb * lap + kin_N * I, Z, Z],
                [-p.k_F * Nb * I, Z, -p.D_F * Nb * lap + p.delta_M * I, Z],
                [Z, -p.k_rho * I, -p.k_rho * p.eta_I * I, p.delta_rho * Nb * rb * I],
            ]
        )
    raise ValueError(f"unknown system {system!r}")


def analytic_periodic_spectrum(system: str, p, n: int) -> np.ndarray:
    h = 1.0 / n
    out = []
    for beta in range(n):
        if system == "mech":
            out.extend(mech_discrete_spectrum(beta, h, p))
        else:
            out.extend(chem_discrete_spectrum(beta, h, p).values())
    return np.array(out, dtype=complex)


def max_matching_gap(a, b) -> float:
    """Largest distance under the optimal one-to-one pairing of two eigenvalue multisets."""
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("multisets differ in size")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def von_neumann_check(system: str, p, n: int, tol: float = 1e-8) -> dict:
    dense = dense_spectrum(build_periodic_fdm_operator(system, p, n))
    gap = max_matching_gap(dense, analytic_periodic_spectrum(system, p, n))
    return {"check": f"von-neumann-{system}", "n": n, "max_abs_gap": gap, "pass": gap <= tol}


def report_ndjson(records) -> str:
    return "".join(json.dumps(r) + "\n" for r in records)


# -- finite-difference reference solvers -------------------------------------


def _fdm_mech_run(p, n, ic, dt, t_end, sample_every):
    x0, x1 = ic.domain
    mesh = build_mesh(n, x0, x1)
    h = mesh.h
    m = mesh.n_nodes
    # Unknown ordering [v_0..v_n, eps_0..eps_n]; dense is fine at reference sizes.
    A = np.zeros((2 * m, 2 * m))
    iv, ie = np.arange(m), m + np.arange(m)
    for i in range(1, m - 1):
        A[iv[i], iv[i - 1]] += -p.mu / (p.rho_t * h**2)
        A[iv[i], iv[i]] += 2 * p.mu / (p.rho_t * h**2)
        A[iv[i], iv[i + 1]] += -p.mu / (p.rho_t * h**2)
        A[iv[i], ie[i + 1]] += -p.stiffness / (p.rho_t * 2 * h)
        A[iv[i], ie[i - 1]] += p.stiffness / (p.rho_t * 2 * h)
    coup = 1.0 - p.eps0
    for i in range(m):
        # Second-order one-sided differences at the ends.
        if i == 0:
            for j, w in ((0, -3.0), (1, 4.0), (2, -1.0)):
                A[ie[i], iv[j]] -= coup * w / (2 * h)
        elif i == m - 1:
            for j, w in ((i, 3.0), (i - 1, -4.0), (i - 2, 1.0)):
                A[ie[i], iv[j]] -= coup * w / (2 * h)
        else:
            A[ie[i], iv[i + 1]] += -coup / (2 * h)
            A[ie[i], iv[i - 1]] += coup / (2 * h)
        A[ie[i], ie[i]] += p.alpha
    K = np.eye(2 * m) + dt * A
    for r in (iv[0], iv[-1]):
        K[r, :] = 0.0
        K[r, r] = 1.0
    lu = lu_factor(K)
    y = np.concatenate([ic.v, ic.eps]).astype(float)
    traj = Trajectory(("v", "eps"), mesh.nodes.copy())
    steps = int(round(t_end / dt))
    traj.record(0.0, {"v": y[:m], "eps": y[m:]}, {})
    for k in range(1, steps + 1):
        rhs = y.copy()
        rhs[[iv[0], iv[-1]]] = 0.0
        y = lu_solve(lu, rhs)
        if k % sample_every == 0 or k == steps:
            traj.record(k * dt, {"v": y[:m], "eps": y[m:]}, {})
    traj.final = MechState(steps * dt, y[:m].copy(), y[m:].copy())
    return traj


def _tridiag_solve(lower, diag, upper, rhs):
    ab = np.zeros((3, diag.size))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def _fdm_chem_run(p, n, ic, dt, t_end, sample_every, tol=1e-8, max_iter=50):
    x0, x1 = ic.domain
    mesh = build_mesh(n, x0, x1)
    h = mesh.h
    m = mesh.n_nodes
    # Control-volume widths: half cells at both ends.
    w = np.full(m, h)
    w[[0, -1]] = 0.5 * h
    old = {f: np.asarray(getattr(ic, f), dtype=float).copy() for f in FIELDS}
    dirichlet = {"c": 0.0, "N": p.N_bar, "M": 0.0}
    traj = Trajectory(FIELDS, mesh.nodes.copy())
    traj.record(0.0, old, {})
    steps = int(round(t_end / dt))

    def transport(D_face, drift_face):
        """Tridiagonal flux operator: flux_{i+1/2} = -D (z_{i+1}-z_i)/h + drift * z_avg."""
        lower = np.zeros(m - 1)
        upper = np.zeros(m - 1)
        diag = np.zeros(m)
        # d/dz of -(flux_{i+1/2} - flux_{i-1/2}) / w_i, moved to the left-hand side.
        a = D_face / h
        diag[:-1] += a + 0.5 * drift_face
        upper += -a + 0.5 * drift_face
        diag[1:] += a - 0.5 * drift_face
        lower += -a - 0.5 * drift_face
        return lower, diag, upper

    for k in range(1, steps + 1):
        it = {f: v.copy() for f, v in old.items()}
        for _ in range(max_iter):
            c, N, M, rho = (it[f] for f in FIELDS)
            inhibit = 1.0 + p.a_c_III * c
            mmp = (N + p.eta_II * M) * rho / inhibit
            sec = N + p.eta_I * M
            crowd = 1.0 - p.kappa_F * (N + M)
            enh = c / (p.a_c_I + c)
            lam = {
                "c": -(p.k_c / (p.a_c_II + c) * sec - p.delta_c * mmp),
                "N": -(p.r_F * (1 + p.r_F_max * enh) * crowd * np.maximum(N, DENSITY_FLOOR) ** p.q
                       - p.k_F * c - p.delta_N),
                "M": -(p.r_F * (1 + p.r_F_max) * enh * crowd * np.maximum(M, DENSITY_FLOOR) ** p.q
                       - p.delta_M),
                "rho": p.delta_rho * mmp,
            }
            src = {
                "c": 0.0,
                "N": 0.0,
                "M": p.k_F * c * N,
                "rho": p.k_rho * (1 + p.k_rho_max * c / (p.a_c_IV + c)) * sec,
            }
            F_face = 0.5 * ((N + M)[:-1] + (N + M)[1:])
            grad_c = np.diff(c) / h
            new = {}
            for f in FIELDS:
                if f == "c":
                    lower, diag, upper = transport(np.full(m - 1, p.D_c), np.zeros(m - 1))
                elif f in ("N", "M"):
                    lower, diag, upper = transport(p.D_F * F_face, p.chi_F * grad_c)
                else:
                    lower = upper = np.zeros(m - 1)
                    diag = np.zeros(m)
                d = w / dt + diag + w * lam[f]
                rhs = w * old[f] / dt + w * src[f]
                lo, up = lower.copy(), upper.copy()
                if f in dirichlet:
                    d[0], up[0], rhs[0] = 1.0, 0.0, dirichlet[f]
                base = it[f]
                resid = rhs - d * base
                resid[:-1] -= up * base[1:]
                resid[1:] -= lo * base[:-1]
                new[f] = base + _tridiag_solve(lo, d, up, resid)
            incr = max(
                np.max(np.abs(new[f] - it[f])) / max(np.max(np.abs(new[f])), 1e-300) for f in FIELDS
            )
            it = new
            if incr < tol:
                break
        old = it
        if k % sample_every == 0 or k == steps:
            traj.record(k * dt, old, {})
    traj.final = ChemState(steps * dt, *(old[f] for f in FIELDS))
    return traj


class ReferenceIC:
    """Initial fields for :func:`fdm_reference_run`, sampled on the reference grid."""

    def __init__(self, domain, **fields):
        self.domain = domain
        for k, v in fields.items():
            setattr(self, k, np.asarray(v, dtype=float))


def fdm_reference_run(system: str, p, n: int, ic, dt: float, t_end: float, sample_every: int = 1):
    """Backward Euler on a finite-difference semi-discretization.

    Boundary handling mirrors the FEM solvers: mechanics has ``v = 0`` at
    both ends and one-sided strain rows; chemistry has Dirichlet values at
    the left end and zero flux at the right end.
    """
    if not dt > 0 or t_end < dt:
        raise ValueError("need dt > 0 and t_end >= dt")
    if system == "mech":
        return _fdm_mech_run(p, n, ic, dt, t_end, sample_every)
    if system == "chem":
        return _fdm_chem_run(p, n, ic, dt, t_end, sample_every)
    raise ValueError(f"unknown system {system!r}")
