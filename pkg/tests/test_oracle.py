import json

import numpy as np
import pytest

from morpho1d.chemistry import ChemState, run_chem
from morpho1d.fem import build_mesh
from morpho1d.initial import paper_chem_ic, paper_mech_ic
from morpho1d.mechanics import MechState, run_mech
from morpho1d.oracle import (
    ReferenceIC,
    analytic_periodic_spectrum,
    build_periodic_fdm_operator,
    dense_spectrum,
    fdm_reference_run,
    max_matching_gap,
    report_ndjson,
    von_neumann_check,
)
from morpho1d.verify import extrema_gap


def test_rotation_spectrum():
    np.testing.assert_allclose(dense_spectrum([[0, 1], [-1, 0]]), [-1j, 1j], atol=1e-15)
    with pytest.raises(ValueError):
        dense_spectrum(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        dense_spectrum(np.zeros((2049, 2049)))


def test_diffusion_stencil_rows(make_params):
    p = make_params(mu=1.0, rho_t=1.0)
    A = build_periodic_fdm_operator("mech", p, 4)
    h = 0.25
    np.testing.assert_allclose(A[0, :4], np.array([2, -1, 0, -1]) / h**2)
    # Central difference rows annihilate constants.
    np.testing.assert_allclose(A[4:, :4].sum(1), 0, atol=1e-12)
    with pytest.raises(ValueError):
        build_periodic_fdm_operator("mech", p, 3)


def test_collagen_row(params):
    n = 8
    A = build_periodic_fdm_operator("chem", params, n)
    r = 3 * n  # first rho row; blocks are [c, N, M, rho]
    assert A[r, r] == pytest.approx(params.delta_rho * params.N_bar * params.rho_bar)
    assert A[r, n] == pytest.approx(-params.k_rho)
    assert A[r, 2 * n] == pytest.approx(-params.k_rho * params.eta_I)


@pytest.mark.parametrize("system", ["mech", "chem"])
@pytest.mark.parametrize("n", [8, 16, 32, 64])
def test_von_neumann(params, system, n):
    rec = von_neumann_check(system, params, n)
    assert rec["pass"] and rec["max_abs_gap"] <= 1e-8
    assert json.loads(report_ndjson([rec]))["check"] == rec["check"]


def test_matching_gap_is_permutation_invariant():
    a = np.array([1 + 1j, 2, 3 - 1j])
    assert max_matching_gap(a, a[::-1]) == 0
    assert max_matching_gap(a, a + 1e-3) == pytest.approx(1e-3)


def test_analytic_spectrum_size(params):
    assert analytic_periodic_spectrum("mech", params, 16).size == 32
    assert analytic_periodic_spectrum("chem", params, 16).size == 64


def test_zero_perturbation_returns_equilibrium(params):
    mesh = build_mesh(40, 0.0, 1.0)
    eq = ChemState.equilibrium(params, mesh)
    tr = fdm_reference_run("chem", params, 40, ReferenceIC((0.0, 1.0), **eq.fields()), 0.1, 1.0)
    for f, v in eq.fields().items():
        np.testing.assert_array_equal(getattr(tr.final, f), v)
    z = np.zeros(41)
    m = fdm_reference_run("mech", params, 40, ReferenceIC((0.0, 5.0), v=z, eps=z), 0.01, 0.1)
    assert not np.any(m.final.v) and not np.any(m.final.eps)


def test_fdm_rejects_bad_input(params):
    ic = ReferenceIC((0.0, 1.0), v=np.zeros(5), eps=np.zeros(5))
    with pytest.raises(ValueError):
        fdm_reference_run("mech", params, 4, ic, 0.0, 1.0)
    with pytest.raises(ValueError):
        fdm_reference_run("heat", params, 4, ic, 0.1, 1.0)


def test_mech_cross_validation_viscous(make_params):
    p = make_params(mu=100.0)
    mesh = build_mesh(1000, 0.0, 5.0)
    ic = paper_mech_ic(mesh)
    a = run_mech(p, mesh, ic, 0.01, 1.0, sample_every=100).final
    b = fdm_reference_run("mech", p, 1000, ReferenceIC((0.0, 5.0), v=ic.v, eps=ic.eps), 0.01, 1.0, 100).final
    assert extrema_gap(a.v, b.v) <= 0.05
    assert extrema_gap(a.eps, b.eps) <= 0.05


def test_mech_cross_validation_gap_shrinks_with_h(make_params):
    # The mu = 1 strain extremum sits on the boundary node; the gap is first order there.
    p = make_params(mu=1.0)
    gaps = []
    for n in (250, 500, 1000):
        mesh = build_mesh(n, 0.0, 5.0)
        ic = paper_mech_ic(mesh)
        a = run_mech(p, mesh, ic, 0.01, 1.0, sample_every=100).final
        b = fdm_reference_run("mech", p, n, ReferenceIC((0.0, 5.0), v=ic.v, eps=ic.eps), 0.01, 1.0, 100).final
        assert extrema_gap(a.v, b.v) <= 0.05
        gaps.append(extrema_gap(a.eps, b.eps))
    assert np.log2(gaps[0] / gaps[1]) > 0.8 and np.log2(gaps[1] / gaps[2]) > 0.8


@pytest.mark.slow
def test_chem_cross_validation_stable_case(make_params):
    p = make_params(delta_c=5e-4)
    mesh = build_mesh(200, 0.0, 1.0)
    ic = paper_chem_ic(p, mesh)
    a = run_chem(p, mesh, ic, 0.1, 400.0, sample_every=4000).final
    b = fdm_reference_run("chem", p, 200, ReferenceIC((0.0, 1.0), **ic.fields()), 0.1, 400.0, 4000).final
    eq = {"c": 0.0, "N": p.N_bar, "M": 0.0, "rho": p.rho_bar}
    for f in eq:
        assert extrema_gap(getattr(a, f) - eq[f], getattr(b, f) - eq[f]) <= 0.05
