"""Closed-form Fourier spectra and stability verdicts for both subsystems.

Convention: modes evolve as ``y' + A y = 0``, so a mode is stable when
every eigenvalue of ``A`` has nonnegative real part.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

STABILITY_TOL = 1e-12
MAX_MODES = 200


def sci(x: float, digits: int = 5) -> str:
    """Compact number format: ``3.5556e-4`` for small or large values, ``2.7891`` otherwise."""
    if x == 0 or 1e-3 <= abs(x) < 1e4:
        return f"{x:.{digits}g}"
    mant, exp = f"{x:.{digits - 1}e}".split("e")
    return f"{mant}e{int(exp)}"


def _order(pair):
    return tuple(sorted(pair, key=lambda z: (z.real, z.imag), reverse=True))


def mech_continuous_spectrum(k: int, p, eps0: float | None = None) -> tuple[complex, complex]:
    """Eigenvalue pair ``(lam_plus, lam_minus)`` of Fourier mode ``k`` on a unit domain."""
    eps0 = p.eps0 if eps0 is None else eps0
    kk = (2 * math.pi * k) ** 2
    diff = kk * p.mu / p.rho_t
    if p.alpha == 0:
        disc = diff**2 + 4 * kk * p.stiffness * (eps0 - 1) / p.rho_t
        root = cmath.sqrt(disc)
        return 0.5 * diff + 0.5 * root, 0.5 * diff - 0.5 * root
    tr = diff + p.alpha
    disc = tr**2 - 4 * kk * (p.alpha * p.mu + p.stiffness) / p.rho_t
    root = cmath.sqrt(disc)
    return 0.5 * tr + 0.5 * root, 0.5 * tr - 0.5 * root


def mech_continuous_matrix(k: int, p, eps0: float | None = None) -> np.ndarray:
    """2x2 mode matrix whose eigenvalues :func:`mech_continuous_spectrum` returns."""
    eps0 = p.eps0 if eps0 is None else eps0
    kappa = 2 * math.pi * k
    coupling = (1 - eps0) if p.alpha == 0 else 1.0
    return np.array(
        [
            [kappa**2 * p.mu / p.rho_t, -1j * kappa * p.stiffness / p.rho_t],
            [-1j * kappa * coupling, p.alpha],
        ]
    )


def viscosity_bound(p, eps0: float | None = None, domain_size: float = 1.0) -> float:
    """Smallest viscosity giving real eigenvalues for the first mode (elastic case)."""
    eps0 = p.eps0 if eps0 is None else eps0
    if eps0 > 1:
        raise ValueError("viscosity bound undefined for eps0 > 1")
    return math.sqrt(p.rho_t * p.stiffness * (1 - eps0)) / math.pi * domain_size


def chem_continuous_spectrum(k: int, p) -> dict[str, float]:
    """Eigenvalues keyed by the constituent whose decay they describe."""
    kk = (2 * math.pi * k) ** 2
    return {
        "N": kk * p.D_F * p.N_bar + p.delta_N - p.r_F * (1 - p.kappa_F * p.N_bar) * p.N_bar**p.q,
        "M": kk * p.D_F * p.N_bar + p.delta_M,
        "c": kk * p.D_c + p.delta_c * p.N_bar * p.rho_bar - p.k_c * p.N_bar / p.a_c_II,
        "rho": p.delta_rho * p.N_bar * p.rho_bar,
    }


def chem_threshold(p) -> float:
    """Chemokine decay rate below which constant perturbations grow."""
    denom = p.a_c_II * p.rho_bar
    if denom == 0:
        raise ZeroDivisionError("a_c_II * rho_bar is zero")
    return p.k_c / denom


def _discrete_symbol(beta, h):
    return 4.0 / h**2 * math.sin(math.pi * beta * h) ** 2


def mech_discrete_spectrum(beta: int, h: float, p) -> tuple[complex, complex]:
    """Eigenvalue pair of mode ``beta`` for the central-difference semi-discretization."""
    if not h > 0:
        raise ValueError("h must be positive")
    diff = p.mu / p.rho_t * _discrete_symbol(beta, h)
    tr = p.alpha + diff
    det = p.alpha * diff + p.stiffness / (p.rho_t * h**2) * math.sin(2 * math.pi * beta * h) ** 2
    root = cmath.sqrt(tr**2 - 4 * det)
    return 0.5 * tr + 0.5 * root, 0.5 * tr - 0.5 * root


def mech_discrete_matrix(beta: int, h: float, p) -> np.ndarray:
    if not h > 0:
        raise ValueError("h must be positive")
    d1 = math.sin(2 * math.pi * beta * h) / h
    return np.array(
        [
            [p.mu / p.rho_t * _discrete_symbol(beta, h), -1j * d1 * p.stiffness / p.rho_t],
            [-1j * d1, p.alpha],
        ]
    )


def chem_discrete_spectrum(beta: int, h: float, p) -> dict[str, float]:
    if not h > 0:
        raise ValueError("h must be positive")
    s = _discrete_symbol(beta, h)
    return {
        "N": p.D_F * p.N_bar * s + p.delta_N - p.r_F * (1 - p.kappa_F * p.N_bar) * p.N_bar**p.q,
        "M": p.D_F * p.N_bar * s + p.delta_M,
        "c": p.D_c * s + (p.delta_c * p.rho_bar - p.k_c / p.a_c_II) * p.N_bar,
        "rho": p.delta_rho * p.N_bar * p.rho_bar,
    }


@dataclass
class SpectralReport:
    system: str
    modes: list[tuple[int, list[complex]]]
    verdict: str
    binding_constraint: str
    thresholds: dict[str, float] = field(default_factory=dict)

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"

    def lines(self) -> list[str]:
        head = "STABLE" if self.stable else "UNSTABLE"
        out = [f"{head}: {self.binding_constraint}"]
        out += [f"threshold {k} = {sci(v)}" for k, v in self.thresholds.items()]
        return out

    def ndjson(self) -> str:
        rows = []
        for mode, eigs in self.modes:
            rows.append(
                json.dumps(
                    {
                        "system": self.system,
                        "mode": mode,
                        "eigenvalues": [{"re": z.real, "im": z.imag} for z in eigs],
                    }
                )
            )
        return "\n".join(rows) + "\n"


SYSTEMS = ("mech-continuous", "mech-discrete", "chem-continuous", "chem-discrete")


def stability_verdict(
    p,
    system: str,
    modes=None,
    h: float | None = None,
    domain_size: float = 1.0,
    eps0: float | None = None,
) -> SpectralReport:
    """Scan a mode range and decide stability by the sign of the real parts."""
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}; expected one of {SYSTEMS}")
    discrete = system.endswith("discrete")
    if discrete and h is None:
        raise ValueError("discrete systems need an element length h")
    if modes is None:
        n = int(round(1 / h)) if discrete else MAX_MODES + 1
        modes = range(0, min(n, MAX_MODES + 1))
    modes = list(modes)
    if not modes:
        raise ValueError("empty mode range")
    eps0 = p.eps0 if eps0 is None else eps0

    thresholds: dict[str, float] = {}
    table = []
    worst = (math.inf, None, None)
    for m in modes:
        if system == "mech-continuous":
            eigs = dict(zip(("plus", "minus"), mech_continuous_spectrum(m, p, eps0)))
        elif system == "mech-discrete":
            eigs = dict(zip(("plus", "minus"), mech_discrete_spectrum(m, h, p)))
        elif system == "chem-continuous":
            eigs = {k: complex(v) for k, v in chem_continuous_spectrum(m, p).items()}
        else:
            eigs = {k: complex(v) for k, v in chem_discrete_spectrum(m, h, p).items()}
        table.append((m, list(_order(eigs.values()))))
        for name, z in eigs.items():
            if z.real < worst[0]:
                worst = (z.real, m, name)

    stable = worst[0] >= -STABILITY_TOL
    mode_word = "beta" if discrete else "k"
    if system.startswith("mech"):
        if eps0 <= 1:
            thresholds["mu_min"] = viscosity_bound(p, eps0, domain_size)
        thresholds["eps0_max"] = 1.0
        if stable:
            binding = "all mechanical modes have nonnegative real part"
        elif p.alpha == 0 and eps0 > 1:
            binding = f"eps0 <= 1 violated (eps0 = {eps0:g}) at {mode_word}={worst[1]}"
        else:
            binding = f"negative real part at {mode_word}={worst[1]}"
    else:
        thr = chem_threshold(p)
        thresholds["delta_c_min"] = thr
        if stable:
            binding = f"chemokine decay meets threshold {sci(thr)}"
        elif worst[2] == "c":
            binding = (
                f"chemokine decay below threshold {sci(thr)} at {mode_word}={worst[1]}"
            )
        else:
            binding = f"{worst[2]} eigenvalue negative at {mode_word}={worst[1]}"
    return SpectralReport(system, table, "stable" if stable else "unstable", binding, thresholds)


def _gap_order(hs, gaps):
    hs, gaps = np.asarray(hs, dtype=float), np.asarray(gaps, dtype=float)
    if np.any(gaps < 1e-13):
        return None
    slope, _ = np.polyfit(np.log(hs), np.log(gaps), 1)
    return float(slope)


def consistency_order(mode: str, beta: int, h_sequence, p) -> dict[str, float | None]:
    """Observed order ``r`` of the gap between discrete and continuous eigenvalues.

    ``mode`` is ``"mech"`` or ``"chem"``. Branches whose gap vanishes
    (below 1e-13) report ``None``.
    """
    hs = list(h_sequence)
    if len(hs) < 3:
        raise ValueError("need at least three element lengths")
    for a, b in zip(hs, hs[1:]):
        if not math.isclose(b, a / 2, rel_tol=1e-12):
            raise ValueError("element lengths must halve successively")
    out: dict[str, float | None] = {}
    if mode == "mech":
        cont = mech_continuous_spectrum(beta, p, eps0=0.0)
        for i, name in enumerate(("plus", "minus")):
            gaps = [abs(mech_discrete_spectrum(beta, h, p)[i] - cont[i]) for h in hs]
            out[name] = _gap_order(hs, gaps)
    elif mode == "chem":
        cont = chem_continuous_spectrum(beta, p)
        for name in cont:
            gaps = [abs(chem_discrete_spectrum(beta, h, p)[name] - cont[name]) for h in hs]
            out[name] = _gap_order(hs, gaps)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return out
