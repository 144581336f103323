"""Built-in verification suite: oracle comparisons plus the model invariants.

Each check returns ``(passed, detail)``. :func:`run_suite` collects them as
``{check, pass, detail}`` records; ``quick`` shortens the long runs.
"""

from __future__ import annotations

import logging
import math
import tempfile
from pathlib import Path

import numpy as np

from .chemistry import FIELDS, ChemState, PicardSettings, equilibrium_residuals, run_chem
from .fem import (
    assemble,
    assemble_dense,
    build_mesh,
    element_mass,
    mech_element_blocks,
    mech_element_matrix,
)
from .initial import PerturbationSpec, paper_chem_ic, paper_mech_ic
from .io import emit_timeseries
from .mechanics import MechState, MechStepper, mech_energy, run_mech, strain_integral
from .oracle import ReferenceIC, fdm_reference_run, von_neumann_check
from .params import ParameterSet, dump_parameters, load_parameters
from .stability import (
    mech_continuous_matrix,
    mech_continuous_spectrum,
    mech_discrete_matrix,
    mech_discrete_spectrum,
    stability_verdict,
    viscosity_bound,
)

log = logging.getLogger(__name__)

MECH_SET = dict(mu=1.0, alpha=0.22)


def _mech_params(**kw) -> ParameterSet:
    return load_parameters(**{**MECH_SET, **kw})


# -- parameters ---------------------------------------------------------------


def check_param_round_trip(quick=True):
    p = _mech_params(delta_c=3e-4, eps0=0.1)
    q = load_parameters(dump_parameters(p))
    same = all(
        float(getattr(p, k)).hex() == float(getattr(q, k)).hex() for k in p.as_dict(derived=True)
    )
    return same, "dump/load reproduces every field bit for bit"


def check_derived_constants(quick=True):
    res = equilibrium_residuals(_mech_params())
    worst = max(res.values())
    return worst <= 1e-12, f"relative residuals {res}"


# -- finite element assembly -------------------------------------------------


def check_fem_row_column_sums(quick=True):
    p = _mech_params()
    mesh = build_mesh(8, 0.0, 1.0)
    b = mech_element_blocks(p, mesh.h)
    S_vv = assemble(mesh, b["S_vv"]).to_dense()
    S_ev = assemble(mesh, b["S_ev"]).to_dense()
    M = assemble(mesh, element_mass(mesh.h)).to_dense()
    ML = assemble(mesh, element_mass(mesh.h, lumped=True)).to_dense()
    rows = max(np.abs(b["S_vv"].sum(axis=1)).max(), np.abs(S_vv.sum(axis=1)).max())
    cols = np.abs(S_ev.sum(axis=0)[1:-1]).max()
    mass = np.abs(M.sum(axis=1) - ML.sum(axis=1)).max()
    ok = rows <= 1e-12 * p.mu / mesh.h and cols <= 1e-14 and mass <= 1e-15
    return ok, f"S_vv rows {rows:.2e}, S_ev interior cols {cols:.2e}, mass rows {mass:.2e}"


def check_fem_dense_assembly(quick=True):
    p = _mech_params()
    worst = 0.0
    for n in range(1, 9):
        mesh = build_mesh(n, 0.0, 1.0)
        for blk, m in ((mech_element_matrix(p, mesh.h, 0.01), 2), (element_mass(mesh.h), 1)):
            fast = assemble(mesh, blk, dofs_per_node=m).to_dense()
            worst = max(worst, np.abs(fast - assemble_dense(mesh, blk, m)).max())
    return worst <= 1e-14, f"max entry gap {worst:.2e} for n <= 8"


# -- mechanics -----------------------------------------------------------------


def check_strain_conservation(quick=True):
    p = _mech_params(alpha=0.0)
    mesh = build_mesh(200 if quick else 1000, 0.0, 5.0)
    stepper = MechStepper(p, mesh, 0.01)
    state = paper_mech_ic(mesh, wavenumber=3)
    # Shift so the integral is well away from zero.
    state.eps += 0.3
    I0 = strain_integral(state, mesh)
    prev, worst_step = I0, 0.0
    for _ in range(200):
        state = stepper.step(state)
        cur = strain_integral(state, mesh)
        worst_step = max(worst_step, abs(cur - prev) / abs(prev))
        prev = cur
    total = abs(prev - I0) / abs(I0)
    return max(worst_step, total) <= 1e-10, f"per step {worst_step:.2e}, overall {total:.2e}"


def check_strain_dissipation(quick=True):
    p = _mech_params()
    mesh = build_mesh(200, 0.0, 5.0)
    ic = paper_mech_ic(mesh, wavenumber=3)
    ic.eps += 0.3
    tr = run_mech(p, mesh, ic, 0.01, 20.0 if quick else 100.0)
    I = np.abs([d["strain_integral"] for d in tr.diagnostics])
    monotone = bool(np.all(np.diff(I) <= 1e-15 * I[0]))
    return monotone and I[-1] < I[0], f"|I| from {I[0]:.3g} to {I[-1]:.3g}, monotone={monotone}"


def check_unconditional_stability(quick=True):
    worst_rise, growth = 0.0, 0.0
    n = 200 if quick else 1000
    mesh = build_mesh(n, 0.0, 5.0)
    ic = paper_mech_ic(mesh)
    y0 = max(np.abs(ic.v).max(), np.abs(ic.eps).max())
    for mu in (1.0, 100.0):
        p = _mech_params(mu=mu)
        for dt in (1e-3, 1e-2, 1e-1, 1.0, 10.0):
            state = ic.copy()
            stepper = MechStepper(p, mesh, dt)
            W = mech_energy(state, mesh, p)
            for _ in range(200):
                state = stepper.step(state)
                W_new = mech_energy(state, mesh, p)
                worst_rise = max(worst_rise, (W_new - W) / W)
                W = W_new
                growth = max(growth, np.abs(state.v).max() / y0, np.abs(state.eps).max() / y0)
    # Energy bounds the sup norm up to the ratio of the two weights.
    limit = 2.0 * math.sqrt(p.stiffness / p.rho_t)
    ok = worst_rise <= 1e-12 and growth <= limit
    return ok, f"largest relative energy rise {worst_rise:.2e}; sup-norm growth {growth:.3f} (limit {limit:.2f})"


def midpoint_sign_changes(p, mesh, t_end=30.0, dt=0.01) -> int:
    """Sign changes of the midpoint velocity for a k=1 sine start."""
    tr = run_mech(p, mesh, paper_mech_ic(mesh, wavenumber=1), dt, t_end)
    vm = tr.array("v")[:, mesh.n_elements // 2]
    scale = np.abs(vm).max()
    s = np.sign(vm[np.abs(vm) > 1e-8 * scale])
    return int(np.sum(s[1:] != s[:-1]))


def check_oscillation_regime(quick=True):
    # With v = 0 at both ends the slowest mode is half a wave over the
    # domain, i.e. the first periodic mode of a domain twice as long.
    mesh = build_mesh(200, 0.0, 5.0)
    bound = viscosity_bound(_mech_params(alpha=0.0), domain_size=2 * mesh.length)
    rows, ok = [], True
    for f in (0.5, 0.75, 1.25, 2.0):
        n = midpoint_sign_changes(_mech_params(alpha=0.0, mu=f * bound), mesh)
        ok &= (n > 0) == (f < 1)
        rows.append(f"{f:g}x:{n}")
    return ok, f"bound {bound:.4g}; sign changes " + ", ".join(rows)


# -- chemistry -------------------------------------------------------------------


def check_chem_equilibrium(quick=True):
    p = _mech_params()
    mesh = build_mesh(200, 0.0, 1.0)
    eq = ChemState.equilibrium(p, mesh)
    tr = run_chem(p, mesh, eq, 0.1, 10.0, sample_every=100)
    dev = max(np.abs(getattr(tr.final, f) - getattr(eq, f)).max() for f in FIELDS)
    return dev <= 1e-10, f"max deviation after 100 steps {dev:.2e}"


def check_mech_equilibrium(quick=True):
    p = _mech_params()
    mesh = build_mesh(200, 0.0, 5.0)
    eq = MechState(0.0, np.zeros(mesh.n_nodes), np.zeros(mesh.n_nodes))
    tr = run_mech(p, mesh, eq, 0.01, 1.0, sample_every=100)
    dev = max(np.abs(tr.final.v).max(), np.abs(tr.final.eps).max())
    return dev <= 1e-10, f"max deviation after 100 steps {dev:.2e}"


def check_lumping_monotonicity(quick=True):
    p = _mech_params()
    mesh = build_mesh(200, 0.0, 1.0)
    ic = ChemState.equilibrium(p, mesh)
    ic.c = 1e-15 * np.sin(np.pi * mesh.nodes) ** 2
    scale = np.abs(ic.c).max()
    tr = run_chem(p, mesh, ic, 0.1, 20.0, sample_every=1)
    c = tr.array("c")
    grow_max = np.max(c[1:].max(axis=1) - c[:-1].max(axis=1))
    drop_min = np.max(c[:-1].min(axis=1) - c[1:].min(axis=1))
    worst = max(grow_max, drop_min) / scale
    return worst <= 1e-6, f"largest new-extremum excursion {worst:.2e} of scale"


def check_mirror_symmetry(quick=True):
    p = _mech_params()
    mesh = build_mesh(100, 0.0, 1.0)
    x = mesh.nodes
    ic = ChemState.equilibrium(p, mesh)
    bump = np.exp(-((x - 0.3) / 0.1) ** 2) * np.sin(np.pi * x)
    ic.c, ic.N = 1e-15 * bump, p.N_bar + 10 * bump
    ic.M, ic.rho = 3 * bump, p.rho_bar + 1e-2 * bump
    mirrored = ChemState(0.0, *(getattr(ic, f)[::-1].copy() for f in FIELDS))
    a = run_chem(p, mesh, ic, 0.1, 5.0, sample_every=10, boundary="both")
    b = run_chem(p, mesh, mirrored, 0.1, 5.0, sample_every=10, boundary="both")
    worst = 0.0
    for f in FIELDS:
        A, B = a.array(f), b.array(f)[:, ::-1]
        scale = max(np.abs(A).max(), 1e-300)
        worst = max(worst, np.abs(A - B).max() / scale)
    return worst <= 1e-9, f"max mirrored gap {worst:.2e} (relative to field scale)"


def check_picard_consistency(quick=True):
    p = _mech_params()
    mesh = build_mesh(200, 0.0, 1.0)
    ic = paper_chem_ic(p, mesh)
    tol = 1e-3
    runs = [
        run_chem(p, mesh, ic, 0.1, 10.0, settings=PicardSettings(tol=t), sample_every=100).final
        for t in (tol, tol / 2)
    ]
    worst = max(
        np.abs(getattr(runs[0], f) - getattr(runs[1], f)).max()
        / max(np.abs(getattr(runs[1], f)).max(), 1e-300)
        for f in FIELDS
    )
    return worst < tol, f"day-10 change {worst:.2e} for tol {tol:g} -> {tol / 2:g}"


# -- stability -----------------------------------------------------------------


def check_mech_spectra_nonnegative(quick=True):
    worst = math.inf
    for mu in (0.1, 1.0, 100.0):
        for alpha in (0.01, 0.22, 5.0):
            p = _mech_params(mu=mu, alpha=alpha)
            for k in range(0, 60):
                worst = min(worst, *(z.real for z in mech_continuous_spectrum(k, p)))
            for h in (1 / 8, 1 / 64, 1 / 512):
                for beta in range(0, int(round(1 / h))):
                    worst = min(worst, *(z.real for z in mech_discrete_spectrum(beta, h, p)))
    return worst >= -1e-12, f"smallest real part {worst:.3e}"


def check_root_identities(quick=True):
    worst = 0.0
    for alpha in (0.0, 0.22):
        p = _mech_params(alpha=alpha, eps0=0.2 if alpha == 0 else 0.0)
        cases = [(mech_continuous_matrix(k, p), mech_continuous_spectrum(k, p)) for k in (1, 2, 7)]
        cases += [(mech_discrete_matrix(b, 1 / 64, p), mech_discrete_spectrum(b, 1 / 64, p)) for b in (1, 5, 20)]
        for A, (lp, lm) in cases:
            tr, det = np.trace(A), np.linalg.det(A)
            worst = max(worst, abs(lp + lm - tr) / abs(tr), abs(lp * lm - det) / abs(det))
    return worst <= 1e-12, f"worst relative trace/det gap {worst:.2e}"


def check_complex_iff_below_bound(quick=True):
    ok, rows = True, 0
    for eps0 in (0.0, 0.5, 0.9):
        for L in (1.0, 5.0):
            # k = 1 on a domain of length L is k = 1 on the unit domain with lengths scaled by 1/L.
            bound = viscosity_bound(_mech_params(alpha=0.0), eps0, L)
            for f in (0.5, 0.99, 1.01, 2.0):
                p = _mech_params(alpha=0.0, mu=f * bound, eps0=eps0)
                lp, lm = _mode_on_domain(p, L)
                is_complex = abs(lp.imag) > 0
                ok &= is_complex == (f < 1)
                rows += 1
    return ok, f"{rows} grid points"


def _mode_on_domain(p, L):
    kappa = 2 * math.pi / L
    diff = kappa**2 * p.mu / p.rho_t
    disc = complex(diff**2 + 4 * kappa**2 * p.stiffness * (p.eps0 - 1) / p.rho_t)
    root = disc**0.5
    return 0.5 * diff + 0.5 * root, 0.5 * diff - 0.5 * root


def check_delta_c_monotone(quick=True):
    grid = np.linspace(1e-4, 1e-3, 19)
    verdicts = [stability_verdict(_mech_params(delta_c=d), "chem-continuous").stable for d in grid]
    ok = all(b or not a for a, b in zip(verdicts, verdicts[1:]))
    hgrid = [stability_verdict(_mech_params(delta_c=d), "chem-discrete", h=1 / 200).stable for d in grid]
    ok &= all(b or not a for a, b in zip(hgrid, hgrid[1:]))
    first = grid[verdicts.index(True)] if True in verdicts else None
    return ok, f"first stable delta_c on grid {first}"


# -- initial conditions ----------------------------------------------------------


def check_ic_boundaries(quick=True):
    p = _mech_params()
    chem_mesh = build_mesh(200, 0.0, 1.0)
    ic = paper_chem_ic(p, chem_mesh)
    ok = ic.c[0] == 0 and ic.N[0] == p.N_bar and ic.M[0] == 0
    mech = paper_mech_ic(build_mesh(1000, 0.0, 5.0))
    ok &= mech.v[0] == 0 and mech.v[-1] == 0
    spline = PerturbationSpec.alternating(6.0, 3.0).evaluate(chem_mesh)
    ok &= bool(spline.min() >= 0)
    return bool(ok), "Dirichlet nodes exact; spline nonnegative"


# -- oracle ---------------------------------------------------------------------


def check_von_neumann(quick=True):
    p = _mech_params()
    recs = [von_neumann_check(s, p, n) for s in ("mech", "chem") for n in (8, 16, 32, 64)]
    worst = max(r["max_abs_gap"] for r in recs)
    return all(r["pass"] for r in recs), f"max gap {worst:.2e}"


def extrema_gap(fem, fdm) -> float:
    """Relative gap of min and max, scaled by the field's infinity norm."""
    scale = max(np.abs(fem).max(), np.abs(fdm).max(), 1e-300)
    return max(abs(fem.min() - fdm.min()), abs(fem.max() - fdm.max())) / scale


def _mech_pair(mu, n, t_end=1.0):
    p = _mech_params(mu=mu)
    mesh = build_mesh(n, 0.0, 5.0)
    ic = paper_mech_ic(mesh)
    a = run_mech(p, mesh, ic, 0.01, t_end, sample_every=100).final
    ref = ReferenceIC((0.0, 5.0), v=ic.v, eps=ic.eps)
    b = fdm_reference_run("mech", p, n, ref, 0.01, t_end, 100).final
    return extrema_gap(a.v, b.v), extrema_gap(a.eps, b.eps)


def check_fem_fdm_mech(quick=True):
    gv, ge = _mech_pair(100.0, 1000)
    ok = max(gv, ge) <= 0.05
    # At mu = 1 the strain extremum sits on the boundary node, where the FEM
    # strain is first-order accurate; require the gap to shrink with h.
    coarse = _mech_pair(1.0, 500)
    fine = _mech_pair(1.0, 1000)
    order = math.log2(coarse[1] / fine[1])
    ok &= fine[0] <= 0.05 and order >= 0.9
    return ok, (
        f"mu=100 gaps v {gv:.2%} eps {ge:.2%}; mu=1 gaps v {fine[0]:.2%} "
        f"eps {fine[1]:.2%} (order {order:.2f} under refinement)"
    )


def check_fem_fdm_chem(quick=True):
    p = _mech_params(delta_c=5e-4)
    mesh = build_mesh(200, 0.0, 1.0)
    ic = paper_chem_ic(p, mesh)
    t_end = 40.0 if quick else 400.0
    a = run_chem(p, mesh, ic, 0.1, t_end, sample_every=1000).final
    b = fdm_reference_run("chem", p, 200, ReferenceIC((0.0, 1.0), **ic.fields()), 0.1, t_end, 1000).final
    eq = {"c": 0.0, "N": p.N_bar, "M": 0.0, "rho": p.rho_bar}
    worst = 0.0
    for f in FIELDS:
        da, db = getattr(a, f) - eq[f], getattr(b, f) - eq[f]
        worst = max(worst, extrema_gap(da, db))
    return worst <= 0.05, f"worst day-{t_end:g} deviation-extrema gap {worst:.2%}"


# -- output ---------------------------------------------------------------------


def check_csv_determinism(quick=True):
    p = _mech_params()
    mesh = build_mesh(50, 0.0, 5.0)
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i in range(2):
            tr = run_mech(p, mesh, paper_mech_ic(mesh), 0.01, 0.5, sample_every=10)
            files = emit_timeseries(tr, Path(tmp) / str(i))
            blobs.append([f.read_bytes() for f in files])
    return blobs[0] == blobs[1], f"{len(blobs[0])} files compared byte for byte"


CHECKS = {
    "params.round_trip": check_param_round_trip,
    "params.derived_constants": check_derived_constants,
    "fem.row_column_sums": check_fem_row_column_sums,
    "fem.dense_assembly": check_fem_dense_assembly,
    "mech.equilibrium": check_mech_equilibrium,
    "mech.strain_conservation": check_strain_conservation,
    "mech.strain_dissipation": check_strain_dissipation,
    "mech.unconditional_stability": check_unconditional_stability,
    "mech.oscillation_regime": check_oscillation_regime,
    "chem.equilibrium": check_chem_equilibrium,
    "chem.lumping_monotonicity": check_lumping_monotonicity,
    "chem.mirror_symmetry": check_mirror_symmetry,
    "chem.picard_consistency": check_picard_consistency,
    "stability.mech_nonnegative": check_mech_spectra_nonnegative,
    "stability.root_identities": check_root_identities,
    "stability.complex_iff_below_bound": check_complex_iff_below_bound,
    "stability.delta_c_monotone": check_delta_c_monotone,
    "ic.boundaries": check_ic_boundaries,
    "oracle.von_neumann": check_von_neumann,
    "oracle.fem_fdm_mech": check_fem_fdm_mech,
    "oracle.fem_fdm_chem": check_fem_fdm_chem,
    "cli.csv_determinism": check_csv_determinism,
}


def run_suite(quick: bool = True, names=None) -> list[dict]:
    out = []
    for name, fn in CHECKS.items():
        if names is not None and name not in names:
            continue
        try:
            ok, detail = fn(quick)
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        log.info("%s %s", name, "pass" if ok else "FAIL")
        out.append({"check": name, "pass": bool(ok), "detail": detail})
    return out
