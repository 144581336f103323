import numpy as np
import pytest

from morpho1d.fem import build_mesh
from morpho1d.initial import (
    SPLINE_KNOTS,
    PerturbationSpec,
    paper_chem_ic,
    paper_mech_ic,
    sine_ic,
    spline_ic,
)


@pytest.fixture
def mesh():
    return build_mesh(200, 0.0, 1.0)


def test_fibroblast_sine_range(params, mesh):
    N = sine_ic(PerturbationSpec("sine", 10.0, 10, equilibrium_offset=params.N_bar), mesh)
    assert N.min() >= 9990 and N.max() <= 10010
    assert N.max() - N.min() > 19.9


def test_zero_amplitude_is_constant(mesh):
    f = sine_ic(PerturbationSpec("sine", 0.0, 3, equilibrium_offset=0.1125), mesh)
    assert np.all(f == 0.1125)


def test_alternating_spline(mesh):
    spec = PerturbationSpec.alternating(6.0, 3.0)
    assert spec.knot_values[:4] == (0.0, 6.0, 3.0, 6.0) and spec.knot_values[-2:] == (6.0, 0.0)
    f = spline_ic(spec, mesh)
    assert f.min() >= 0 and f[0] == 0 and f[-1] == 0
    assert f.max() == 6.0


def test_zero_knots_give_zero_field(mesh):
    f = spline_ic(PerturbationSpec("uniform-spline", knot_values=(0.0,) * SPLINE_KNOTS), mesh)
    assert not np.any(f)


@pytest.mark.parametrize(
    "kw",
    [
        dict(kind="cosine"),
        dict(kind="sine", wavenumber=0),
        dict(kind="uniform-spline", knot_values=(0.0,) * 5),
        dict(kind="uniform-spline", knot_values=(1.0,) + (0.0,) * 20),
        dict(kind="uniform-spline", knot_values=(0.0, -1.0) + (0.0,) * 19),
    ],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        PerturbationSpec(**kw)


def test_kind_mismatch(mesh):
    with pytest.raises(ValueError):
        sine_ic(PerturbationSpec.alternating(1, 0), mesh)
    with pytest.raises(ValueError):
        spline_ic(PerturbationSpec("sine", 1.0, 1), mesh)


def test_validation_ic_boundary_values(params, mesh):
    ic = paper_chem_ic(params, mesh)
    assert ic.c[0] == 0 and ic.N[0] == params.N_bar and ic.M[0] == 0
    assert ic.c.max() == 2e-15 and ic.M.max() == 6.0
    swapped = paper_chem_ic(params, mesh, phase_shift=True)
    assert swapped.M[10] == 3.0 and ic.M[10] == 6.0
    m = paper_mech_ic(build_mesh(1000, 0.0, 5.0))
    assert m.v[0] == 0 and m.v[-1] == 0
    assert np.abs(m.eps).max() == pytest.approx(1.0, abs=1e-4)
