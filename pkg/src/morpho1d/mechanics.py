"""Backward Euler integration of the linearized velocity/strain system."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .fem import Mesh, assemble, element_mass, mech_element_matrix

log = logging.getLogger(__name__)

DEFAULT_DT = 0.01


@dataclass
class MechState:
    t: float
    v: np.ndarray
    eps: np.ndarray

    def copy(self) -> MechState:
        return MechState(self.t, self.v.copy(), self.eps.copy())


def _interleave(v, eps):
    y = np.empty(2 * v.size)
    y[0::2] = v
    y[1::2] = eps
    return y


class MechStepper:
    """Holds the factorized block system for one ``(p, mesh, dt)`` triple."""

    def __init__(self, p, mesh: Mesh, dt: float):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.p, self.mesh, self.dt = p, mesh, dt
        n = mesh.n_nodes
        dirichlet = [(0, 0.0), (2 * (n - 1), 0.0)]
        system = assemble(
            mesh, mech_element_matrix(p, mesh.h, dt), dirichlet=dirichlet, dofs_per_node=2
        )
        self._lu = system.factorize()
        mass = assemble(mesh, element_mass(mesh.h))
        self._mass = mass
        self._v_rows = np.array([0, 2 * (n - 1)])

    def step(self, state: MechState) -> MechState:
        mesh = self.mesh
        if state.v.shape != (mesh.n_nodes,) or state.eps.shape != (mesh.n_nodes,):
            raise ValueError("state does not match mesh")
        rhs = _interleave(self.p.rho_t * self._mass.matvec(state.v), self._mass.matvec(state.eps))
        rhs[self._v_rows] = 0.0
        y = self._lu.solve(rhs)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError("non-finite mechanics state")
        return MechState(state.t + self.dt, y[0::2].copy(), y[1::2].copy())


def mech_step(state: MechState, p, mesh: Mesh, dt: float) -> MechState:
    """One backward Euler step. Use :class:`MechStepper` to reuse the factorization."""
    return MechStepper(p, mesh, dt).step(state)


def strain_integral(state: MechState, mesh: Mesh) -> float:
    """Integral of the strain, ``1^T M eps`` with the consistent mass matrix."""
    # Column sums of the consistent mass matrix: h/2 at the ends, h inside.
    eps = state.eps
    return float(mesh.h * (eps.sum() - 0.5 * (eps[0] + eps[-1])))


def mech_energy(state: MechState, mesh: Mesh, p) -> float:
    """Discrete energy ``rho_t v'Mv + E sqrt(rho_bar)/(1 - eps0) eps'M eps``.

    The coupling blocks are skew apart from the boundary rows where ``v = 0``,
    so backward Euler never increases this quantity.
    """
    if p.eps0 >= 1:
        raise ValueError("energy is not positive definite for eps0 >= 1")
    m = element_mass(mesh.h)

    def quad(u):
        a, b = u[:-1], u[1:]
        return float(np.sum(m[0, 0] * a * a + 2 * m[0, 1] * a * b + m[1, 1] * b * b))

    return p.rho_t * quad(state.v) + p.stiffness / (1.0 - p.eps0) * quad(state.eps)


@dataclass
class Trajectory:
    """Sampled states of a run plus per-sample diagnostics."""

    fields: tuple[str, ...]
    nodes: np.ndarray
    times: list[float] = field(default_factory=list)
    samples: dict[str, list[np.ndarray]] = field(default_factory=dict)
    diagnostics: list[dict] = field(default_factory=list)
    final: object = None

    def record(self, t: float, values: dict[str, np.ndarray], diag: dict) -> None:
        self.times.append(t)
        for name in self.fields:
            self.samples.setdefault(name, []).append(np.array(values[name], dtype=float))
        self.diagnostics.append({"t": t, **diag})

    def array(self, name: str) -> np.ndarray:
        return np.array(self.samples[name])


def _sample_steps(times, dt, t_end):
    """Map requested sample times to step counts (rounded to the nearest step)."""
    if times is None:
        return None
    return sorted({int(round(t / dt)) for t in times if 0 <= t <= t_end + 0.5 * dt})


def run_mech(
    p,
    mesh: Mesh,
    ic: MechState,
    dt: float = DEFAULT_DT,
    t_end: float = 1.0,
    observers=(),
    sample_times=None,
    sample_every: int | None = None,
) -> Trajectory:
    """Advance ``ic`` to ``t_end`` and record samples.

    Samples are taken at ``sample_times`` (days), every ``sample_every``
    steps, or at every step when neither is given. Each observer is called
    as ``obs(t, nodes, v, eps)`` at every sample.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_end < dt:
        raise ValueError("t_end must be at least one step")
    n_steps = int(round(t_end / dt))
    wanted = _sample_steps(sample_times, dt, t_end)
    wanted = set(wanted) if wanted is not None else None

    stepper = MechStepper(p, mesh, dt)
    traj = Trajectory(("v", "eps"), mesh.nodes.copy())
    eps_eq = strain_integral(ic, mesh) / mesh.length

    def sample(k, s):
        take = (
            (wanted is not None and k in wanted)
            or (sample_every is not None and k % sample_every == 0)
            or (wanted is None and sample_every is None)
        )
        if not take:
            return
        diag = {
            "max_abs_v": float(np.max(np.abs(s.v))),
            "max_abs_eps_dev": float(np.max(np.abs(s.eps - eps_eq))),
            "min_v": float(s.v.min()),
            "min_eps": float(s.eps.min()),
            "strain_integral": strain_integral(s, mesh),
        }
        traj.record(s.t, {"v": s.v, "eps": s.eps}, diag)
        for obs in observers:
            obs(s.t, mesh.nodes, s.v, s.eps)

    state = ic.copy()
    sample(0, state)
    for k in range(1, n_steps + 1):
        state = stepper.step(state)
        state.t = k * dt
        sample(k, state)
    traj.final = state
    log.info("mechanics run finished at t=%g after %d steps", state.t, n_steps)
    return traj
