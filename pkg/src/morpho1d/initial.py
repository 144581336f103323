"""Initial perturbations: sines about an equilibrium and piecewise-linear knot bumps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import Mesh

SPLINE_KNOTS = 21


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str = "sine"
    amplitude: float = 0.0
    wavenumber: int = 1
    knot_values: tuple[float, ...] = ()
    equilibrium_offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("sine", "uniform-spline"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "sine" and self.wavenumber < 1:
            raise ValueError("sine wavenumber must be >= 1")
        if self.kind == "uniform-spline":
            knots = self.knot_values
            if len(knots) != SPLINE_KNOTS:
                raise ValueError(f"need {SPLINE_KNOTS} knots, got {len(knots)}")
            if knots[0] != 0 or knots[-1] != 0:
                raise ValueError("end knots must be zero")
            if min(knots) < 0:
                raise ValueError("knot values must be nonnegative")

    @classmethod
    def alternating(cls, high: float, low: float, offset: float = 0.0) -> PerturbationSpec:
        """Zero end knots with interior knots ``high, low, high, ..., high``."""
        interior = [high if i % 2 == 0 else low for i in range(SPLINE_KNOTS - 2)]
        return cls("uniform-spline", knot_values=(0.0, *interior, 0.0), equilibrium_offset=offset)

    def evaluate(self, mesh: Mesh) -> np.ndarray:
        return sine_ic(self, mesh) if self.kind == "sine" else spline_ic(self, mesh)


def sine_ic(spec: PerturbationSpec, mesh: Mesh) -> np.ndarray:
    if spec.kind != "sine":
        raise ValueError(f"expected a sine perturbation, got {spec.kind!r}")
    xi = (mesh.nodes - mesh.x_left) / mesh.length
    return spec.equilibrium_offset + spec.amplitude * np.sin(2 * np.pi * spec.wavenumber * xi)


def spline_ic(spec: PerturbationSpec, mesh: Mesh) -> np.ndarray:
    if spec.kind != "uniform-spline":
        raise ValueError(f"expected a uniform-spline perturbation, got {spec.kind!r}")
    knots_x = np.linspace(mesh.x_left, mesh.x_right, len(spec.knot_values))
    return spec.equilibrium_offset + np.interp(mesh.nodes, knots_x, spec.knot_values)


def paper_chem_ic(p, mesh: Mesh, wavenumber: int = 10, phase_shift: bool = False):
    """Chemistry initial state of the validation runs.

    Fibroblasts and collagen get sines of amplitude 10 and 1e-2 about their
    equilibria; myofibroblasts and chemokines get alternating 6/3 and
    2e-15/0.5e-15 knot bumps (``phase_shift`` swaps high and low).
    """
    from .chemistry import ChemState

    hi_lo = (lambda a, b: (b, a)) if phase_shift else (lambda a, b: (a, b))
    N = PerturbationSpec("sine", 10.0, wavenumber, equilibrium_offset=p.N_bar).evaluate(mesh)
    rho = PerturbationSpec("sine", 1e-2, wavenumber, equilibrium_offset=p.rho_bar).evaluate(mesh)
    M = PerturbationSpec.alternating(*hi_lo(6.0, 3.0)).evaluate(mesh)
    c = PerturbationSpec.alternating(*hi_lo(2e-15, 0.5e-15)).evaluate(mesh)
    return ChemState(0.0, c, N, M, rho)


def paper_mech_ic(mesh: Mesh, wavenumber: int = 10, amplitude: float = 1.0, eps0: float = 0.0):
    from .mechanics import MechState

    spec = PerturbationSpec("sine", amplitude, wavenumber)
    v = spec.evaluate(mesh)
    v[[0, -1]] = 0.0
    return MechState(0.0, v, eps0 + spec.evaluate(mesh))
