"""Reaction-transport chemistry: kinetics and the lumped-mass Picard solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .fem import DENSITY_FLOOR, Mesh, chem_element_blocks, scatter_loads, tridiag_from_elements
from .mechanics import Trajectory, _sample_steps

log = logging.getLogger(__name__)

FIELDS = ("c", "N", "M", "rho")
DEFAULT_DT = 0.1
BOUNDARY_LAYOUTS = ("left", "both")


class PicardDivergence(RuntimeError):
    """Picard iterations did not reach the increment tolerance."""

    def __init__(self, msg, state=None, increments=None):
        super().__init__(msg)
        self.state = state
        self.increments = increments


@dataclass
class ChemState:
    t: float
    c: np.ndarray
    N: np.ndarray
    M: np.ndarray
    rho: np.ndarray

    def copy(self) -> ChemState:
        return ChemState(self.t, *(getattr(self, f).copy() for f in FIELDS))

    def fields(self) -> dict[str, np.ndarray]:
        return {f: getattr(self, f) for f in FIELDS}

    @classmethod
    def equilibrium(cls, p, mesh: Mesh, t: float = 0.0) -> ChemState:
        n = mesh.n_nodes
        return cls(t, np.zeros(n), np.full(n, p.N_bar), np.zeros(n), np.full(n, p.rho_bar))


@dataclass(frozen=True)
class PicardSettings:
    tol: float = 1e-8
    max_iter: int = 50
    strict: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Picard tol must be positive")
        if self.max_iter < 1:
            raise ValueError("Picard max_iter must be at least 1")


def reaction_terms(c, N, M, rho, p):
    """Pointwise kinetics ``(R_c, R_N, R_M, R_rho, g)`` of the four constituents."""
    c, N, M, rho = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (c, N, M, rho)))
    dens = (p.a_c_I + c, p.a_c_II + c, p.a_c_IV + c, 1.0 + p.a_c_III * c)
    if any(np.any(d <= 0) for d in dens):
        raise ValueError("nonpositive denominator: chemokine concentration out of range")
    g = (N + p.eta_II * M) * rho / (1.0 + p.a_c_III * c)
    secreting = N + p.eta_I * M
    crowd = 1.0 - p.kappa_F * (N + M)
    enh = c / (p.a_c_I + c)
    R_c = p.k_c * c / (p.a_c_II + c) * secreting - p.delta_c * g * c
    R_N = (
        p.r_F * (1.0 + p.r_F_max * enh) * crowd * N * np.maximum(N, DENSITY_FLOOR) ** p.q
        - p.k_F * c * N
        - p.delta_N * N
    )
    R_M = (
        p.r_F * (1.0 + p.r_F_max) * enh * crowd * M * np.maximum(M, DENSITY_FLOOR) ** p.q
        + p.k_F * c * N
        - p.delta_M * M
    )
    R_rho = p.k_rho * (1.0 + p.k_rho_max * c / (p.a_c_IV + c)) * secreting - p.delta_rho * g * rho
    return R_c, R_N, R_M, R_rho, g


def equilibrium_residuals(p) -> dict[str, float]:
    """Relative residuals of the relations defining ``q`` and ``k_rho``."""
    q_res = p.delta_N - p.r_F * (1.0 - p.kappa_F * p.N_bar) * p.N_bar**p.q
    R = reaction_terms(0.0, p.N_bar, 0.0, p.rho_bar, p)
    return {
        "q": abs(q_res) / p.delta_N,
        "k_rho": abs(float(R[3])) / (p.k_rho * p.N_bar),
        "R_N": abs(float(R[1])) / (p.delta_N * p.N_bar),
    }


def _banded_matvec(ab, x):
    y = ab[1] * x
    y[:-1] += ab[0, 1:] * x[1:]
    y[1:] += ab[2, :-1] * x[:-1]
    return y


class ChemStepper:
    """Backward Euler step with monolithic Picard iterations on a fixed mesh.

    Boundary layout: ``x_left`` carries the Dirichlet values ``c = 0``,
    ``N = N_bar``, ``M = 0``; ``x_right`` (wound centre) is zero-flux.
    Collagen has no boundary condition. ``boundary="both"`` applies the
    Dirichlet values at both ends (a full wound rather than half of one).
    """

    def __init__(
        self, p, mesh: Mesh, dt: float, settings: PicardSettings | None = None, boundary: str = "left"
    ):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if boundary not in BOUNDARY_LAYOUTS:
            raise ValueError(f"boundary must be one of {BOUNDARY_LAYOUTS}")
        self.boundary = boundary
        self.p, self.mesh, self.dt = p, mesh, dt
        self.settings = settings or PicardSettings()
        # Lumped mass: h/2 on the end nodes, h inside.
        lumped = np.full(mesh.n_nodes, mesh.h)
        lumped[[0, -1]] = 0.5 * mesh.h
        self.lumped = lumped
        self.dirichlet = {"c": 0.0, "N": p.N_bar, "M": 0.0}
        self.last_iterations = 0

    def _solve_field(self, blocks, old, load, bc, base):
        """Solve for the update about ``base`` so that exact equilibria stay exact."""
        S = tridiag_from_elements(blocks)
        resid = self.lumped * (old - base) - self.dt * _banded_matvec(S, base)
        if load is not None:
            resid += self.dt * scatter_loads(load)
        ab = self.dt * S
        ab[1] += self.lumped
        if bc is not None:
            ends = [0, -1] if self.boundary == "both" else [0]
            for i in ends:
                ab[1, i] = 1.0
                resid[i] = bc - base[i]
            ab[0, 1] = 0.0
            if self.boundary == "both":
                ab[2, -2] = 0.0
        return base + solve_banded((1, 1), ab, resid, check_finite=False)

    def step(self, state: ChemState) -> ChemState:
        p, h, s = self.p, self.mesh.h, self.settings
        if state.c.shape != (self.mesh.n_nodes,):
            raise ValueError("state does not match mesh")
        old = state.fields()
        it = {f: v.copy() for f, v in old.items()}
        for k in range(1, s.max_iter + 1):
            b = chem_element_blocks(p, it["c"], it["N"], it["M"], it["rho"], h)
            new = {
                "c": self._solve_field(b["S_c"], old["c"], None, self.dirichlet["c"], it["c"]),
                "N": self._solve_field(b["S_N"], old["N"], None, self.dirichlet["N"], it["N"]),
                "M": self._solve_field(b["S_M"], old["M"], b["F_M"], self.dirichlet["M"], it["M"]),
                "rho": self._solve_field(b["S_rho"], old["rho"], b["F_rho"], None, it["rho"]),
            }
            incr = {}
            for f in FIELDS:
                if not np.all(np.isfinite(new[f])):
                    raise FloatingPointError(f"non-finite {f} at t={state.t + self.dt:g}")
                scale = max(np.max(np.abs(new[f])), np.finfo(float).tiny)
                incr[f] = np.max(np.abs(new[f] - it[f])) / scale
            it = new
            if max(incr.values()) < s.tol:
                break
        else:
            self.last_iterations = s.max_iter
            result = ChemState(state.t + self.dt, **it)
            if s.strict:
                raise PicardDivergence(
                    f"Picard did not converge in {s.max_iter} iterations at "
                    f"t={result.t:g}: {incr}",
                    result,
                    incr,
                )
            log.warning("Picard not converged at t=%g: %s", result.t, incr)
            return result
        self.last_iterations = k
        return ChemState(state.t + self.dt, **it)


def chem_step(
    state: ChemState, p, mesh: Mesh, dt: float, ps: PicardSettings | None = None, boundary: str = "left"
) -> ChemState:
    return ChemStepper(p, mesh, dt, ps, boundary).step(state)


def deviation_summary(state: ChemState, p) -> dict:
    eq = {"c": 0.0, "N": p.N_bar, "M": 0.0, "rho": p.rho_bar}
    out = {}
    for f in FIELDS:
        v = getattr(state, f)
        out[f"min_{f}"] = float(v.min())
        out[f"max_{f}"] = float(v.max())
        out[f"max_dev_{f}"] = float(np.max(np.abs(v - eq[f])))
        out[f"center_{f}"] = float(v[-1])
    return out


def run_chem(
    p,
    mesh: Mesh,
    ic: ChemState,
    dt: float = DEFAULT_DT,
    t_end: float = 1.0,
    observers=(),
    settings: PicardSettings | None = None,
    sample_times=None,
    sample_every: int | None = None,
    boundary: str = "left",
) -> Trajectory:
    """Advance ``ic`` to ``t_end``; observers receive ``(t, nodes, c, N, M, rho)``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_end < dt:
        raise ValueError("t_end must be at least one step")
    n_steps = int(round(t_end / dt))
    wanted = _sample_steps(sample_times, dt, t_end)
    wanted = set(wanted) if wanted is not None else None
    stepper = ChemStepper(p, mesh, dt, settings, boundary)
    traj = Trajectory(FIELDS, mesh.nodes.copy())
    max_iters = 0
    negative_flag = False

    def sample(k, s):
        take = (
            (wanted is not None and k in wanted)
            or (sample_every is not None and k % sample_every == 0)
            or (wanted is None and sample_every is None)
        )
        if not take:
            return
        diag = deviation_summary(s, p)
        diag["picard_iterations"] = stepper.last_iterations
        traj.record(s.t, s.fields(), diag)
        for obs in observers:
            obs(s.t, mesh.nodes, s.c, s.N, s.M, s.rho)

    state = ic.copy()
    sample(0, state)
    for k in range(1, n_steps + 1):
        state = stepper.step(state)
        state.t = k * dt
        max_iters = max(max_iters, stepper.last_iterations)
        if not negative_flag and _has_negative(state, p):
            negative_flag = True
            log.warning("negative density at t=%g", state.t)
        sample(k, state)
    traj.final = state
    traj.max_picard_iterations = max_iters
    traj.negative_density = negative_flag
    return traj


def _has_negative(state: ChemState, p) -> bool:
    scales = {"c": max(np.max(np.abs(state.c)), 1e-300), "N": p.N_bar, "M": 1.0, "rho": p.rho_bar}
    return any(np.min(getattr(state, f)) < -1e-9 * scales[f] for f in FIELDS)
