import numpy as np
import pytest

from morpho1d.chemistry import (
    FIELDS,
    ChemState,
    ChemStepper,
    PicardDivergence,
    PicardSettings,
    chem_step,
    deviation_summary,
    equilibrium_residuals,
    reaction_terms,
    run_chem,
)
from morpho1d.fem import build_mesh
from morpho1d.initial import paper_chem_ic


@pytest.fixture
def mesh():
    return build_mesh(200, 0.0, 1.0)


def test_kinetics_vanish_at_equilibrium(params):
    R_c, R_N, R_M, R_rho, g = reaction_terms(0.0, params.N_bar, 0.0, params.rho_bar, params)
    assert R_c == 0 and R_M == 0
    assert abs(R_N) <= 1e-12 * params.delta_N * params.N_bar
    assert abs(R_rho) <= 1e-12 * params.k_rho * params.N_bar
    assert g == pytest.approx(params.N_bar * params.rho_bar, rel=1e-15)
    assert max(equilibrium_residuals(params).values()) <= 1e-12


def test_secretion_half_saturation(params):
    c = params.a_c_II
    R_c, *_ = reaction_terms(c, 1.0, 0.0, 0.0, params)
    assert R_c == pytest.approx(0.5 * params.k_c, rel=1e-14)
    cs = np.logspace(-12, -4, 50)
    frac = cs / (params.a_c_II + cs)
    assert np.all(np.diff(frac) > 0) and frac[-1] < 1


def test_crowded_fibroblasts_decline(params):
    N = 2 * params.N_bar
    _, R_N, *_ = reaction_terms(0.0, N, 0.0, params.rho_bar, params)
    expected = params.r_F * (1 - params.kappa_F * N) * N ** (1 + params.q) - params.delta_N * N
    assert R_N == pytest.approx(expected, rel=1e-12)
    assert R_N < 0


def test_kinetics_reject_bad_denominator(params):
    with pytest.raises(ValueError):
        reaction_terms(-1.0, 1.0, 0.0, 0.1, params)


def test_picard_settings_validation():
    with pytest.raises(ValueError):
        PicardSettings(tol=0.0)
    with pytest.raises(ValueError):
        PicardSettings(max_iter=0)


def test_equilibrium_is_fixed_point(params, mesh):
    eq = ChemState.equilibrium(params, mesh)
    stepper = ChemStepper(params, mesh, 0.1)
    s = eq
    for _ in range(100):
        s = stepper.step(s)
        assert stepper.last_iterations == 1
    for f in FIELDS:
        assert np.abs(getattr(s, f) - getattr(eq, f)).max() <= 1e-10


def test_dirichlet_values_after_every_step(params, mesh):
    tr = run_chem(params, mesh, paper_chem_ic(params, mesh), 0.1, 2.0)
    assert np.all(tr.array("c")[:, 0] == 0)
    assert np.all(tr.array("N")[:, 0] == params.N_bar)
    assert np.all(tr.array("M")[:, 0] == 0)


def test_picard_iterations_on_day_one(make_params, mesh):
    p = make_params(delta_c=5e-4)
    tr = run_chem(p, mesh, paper_chem_ic(p, mesh), 0.1, 1.0)
    assert tr.max_picard_iterations <= 10
    assert not tr.negative_density


def test_picard_failure_is_reported(params, mesh):
    ic = paper_chem_ic(params, mesh)
    with pytest.raises(PicardDivergence) as err:
        chem_step(ic, params, mesh, 0.1, PicardSettings(tol=1e-300, max_iter=2))
    assert err.value.state is not None
    lax = chem_step(ic, params, mesh, 0.1, PicardSettings(tol=1e-300, max_iter=2, strict=False))
    assert np.all(np.isfinite(lax.N))


def test_dt_must_be_positive(params, mesh):
    with pytest.raises(ValueError):
        chem_step(ChemState.equilibrium(params, mesh), params, mesh, 0.0)


def test_picard_tolerance_consistency(params, mesh):
    ic = paper_chem_ic(params, mesh)
    tol = 1e-3
    a, b = (
        run_chem(params, mesh, ic, 0.1, 10.0, settings=PicardSettings(tol=t), sample_every=100).final
        for t in (tol, tol / 2)
    )
    for f in FIELDS:
        ref = np.abs(getattr(b, f)).max()
        assert np.abs(getattr(a, f) - getattr(b, f)).max() <= tol * max(ref, 1e-300)


def test_no_new_chemokine_extrema(params, mesh):
    ic = ChemState.equilibrium(params, mesh)
    ic.c = 1e-15 * np.sin(np.pi * mesh.nodes) ** 2
    c = run_chem(params, mesh, ic, 0.1, 20.0).array("c")
    scale = 1e-15
    assert np.max(c[1:].max(1) - c[:-1].max(1)) <= 1e-6 * scale
    assert np.max(c[:-1].min(1) - c[1:].min(1)) <= 1e-6 * scale


def test_mirror_symmetry_with_symmetric_boundaries(params):
    mesh = build_mesh(100, 0.0, 1.0)
    x = mesh.nodes
    bump = np.exp(-((x - 0.25) / 0.1) ** 2) * np.sin(np.pi * x)
    ic = ChemState(0.0, 1e-15 * bump, params.N_bar + 10 * bump, 3 * bump, params.rho_bar + 0.01 * bump)
    mirrored = ChemState(0.0, *(getattr(ic, f)[::-1].copy() for f in FIELDS))
    a = run_chem(params, mesh, ic, 0.1, 5.0, boundary="both", sample_every=5)
    b = run_chem(params, mesh, mirrored, 0.1, 5.0, boundary="both", sample_every=5)
    for f in FIELDS:
        A, B = a.array(f), b.array(f)[:, ::-1]
        assert np.abs(A - B).max() <= 1e-9 * np.abs(A).max()


def test_unknown_boundary_layout(params, mesh):
    with pytest.raises(ValueError):
        ChemStepper(params, mesh, 0.1, boundary="right")


def test_deviation_summary(params, mesh):
    s = ChemState.equilibrium(params, mesh)
    s.N[-1] += 5.0
    d = deviation_summary(s, params)
    assert d["max_dev_N"] == 5.0
    assert d["center_N"] == params.N_bar + 5.0
    assert d["max_dev_c"] == 0.0


def test_negative_density_is_flagged_not_clipped(make_params, mesh):
    p = make_params(delta_c=5e-4)
    ic = ChemState.equilibrium(p, mesh)
    ic.M = np.where(np.arange(mesh.n_nodes) % 2 == 0, 0.0, 5.0)
    ic.M[0] = 0.0
    ic.c[100] = -1e-12
    tr = run_chem(p, mesh, ic, 0.1, 0.2)
    assert tr.negative_density
    assert tr.array("c")[0, 100] == -1e-12
