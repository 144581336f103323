import json
import math
from types import SimpleNamespace

import numpy as np
import pytest

from morpho1d.stability import (
    SYSTEMS,
    chem_continuous_spectrum,
    chem_discrete_spectrum,
    chem_threshold,
    consistency_order,
    mech_continuous_matrix,
    mech_continuous_spectrum,
    mech_discrete_matrix,
    mech_discrete_spectrum,
    sci,
    stability_verdict,
    viscosity_bound,
)

HS = [2.0**-k for k in range(6, 10)]


def test_mech_zero_mode(make_params):
    assert mech_continuous_spectrum(0, make_params(alpha=0.0)) == (0, 0)
    lp, lm = mech_continuous_spectrum(0, make_params(alpha=0.3))
    assert {lp, lm} == {0.3, 0.0}


def test_mech_elastic_at_unit_eps0(make_params):
    p = make_params(alpha=0.0, eps0=1.0, mu=2.0)
    lp, lm = mech_continuous_spectrum(3, p)
    assert lm == 0
    assert lp == pytest.approx((6 * math.pi) ** 2 * 2.0 / p.rho_t, rel=1e-14)


def test_viscosity_bound(make_params):
    p = make_params(alpha=0.0)
    assert viscosity_bound(p, 0.0, 5.0) == pytest.approx(13.9454, abs=1e-4)
    assert viscosity_bound(p, 1.0, 5.0) == 0.0
    assert viscosity_bound(p, 0.0, 5.0) == pytest.approx(5 * viscosity_bound(p, 0.0, 1.0), rel=1e-15)
    with pytest.raises(ValueError):
        viscosity_bound(p, 1.5)


def test_chem_zero_mode(make_params):
    lam = chem_continuous_spectrum(0, make_params(delta_c=5e-4))
    assert abs(lam["N"]) < 1e-15
    assert lam["c"] == pytest.approx(0.1625, rel=1e-4)
    assert chem_continuous_spectrum(0, make_params(delta_c=3e-4))["c"] == pytest.approx(-0.0625, rel=1e-4)


def test_chem_threshold(make_params):
    assert 3.55e-4 <= chem_threshold(make_params()) <= 3.56e-4
    assert chem_threshold(SimpleNamespace(k_c=0.0, a_c_II=1e-8, rho_bar=0.1)) == 0.0
    with pytest.raises(ZeroDivisionError):
        chem_threshold(SimpleNamespace(k_c=1.0, a_c_II=0.0, rho_bar=0.1))


def test_discrete_zero_frequency(params):
    h = 1 / 64
    for beta in (0, 64):
        lp, lm = mech_discrete_spectrum(beta, h, params)
        assert {round(lp.real, 12), round(lm.real, 12)} == {params.alpha, 0.0}
    assert chem_discrete_spectrum(0, h, params) == pytest.approx(chem_continuous_spectrum(0, params))


def test_discrete_mech_nonnegative_everywhere(make_params):
    for mu in (0.01, 1, 100):
        p = make_params(mu=mu, alpha=0.22)
        for h in (1 / 8, 1 / 100, 1 / 1000):
            for beta in range(int(1 / h)):
                assert min(z.real for z in mech_discrete_spectrum(beta, h, p)) >= -1e-12


@pytest.mark.parametrize("alpha", [0.0, 0.22])
def test_root_identities(make_params, alpha):
    p = make_params(alpha=alpha, eps0=0.3 if alpha == 0 else 0.0)
    for k in (1, 4):
        for A, (lp, lm) in (
            (mech_continuous_matrix(k, p), mech_continuous_spectrum(k, p)),
            (mech_discrete_matrix(k, 1 / 32, p), mech_discrete_spectrum(k, 1 / 32, p)),
        ):
            assert lp + lm == pytest.approx(np.trace(A), rel=1e-12)
            assert lp * lm == pytest.approx(np.linalg.det(A), rel=1e-12)
            eig = np.linalg.eigvals(A)
            for lam in (lp, lm):
                assert np.abs(eig - lam).min() <= 1e-10 * abs(lam)


def test_complex_iff_below_bound_unit_domain(make_params):
    for eps0 in (0.0, 0.4, 0.95):
        b = viscosity_bound(make_params(alpha=0.0), eps0, 1.0)
        for f, expect in ((0.5, True), (0.999, True), (1.001, False), (3.0, False)):
            lp, _ = mech_continuous_spectrum(1, make_params(alpha=0.0, mu=f * b, eps0=eps0))
            assert (lp.imag != 0) == expect


def test_verdict_examples(make_params):
    r = stability_verdict(make_params(alpha=0.0, eps0=1.5), "mech-continuous")
    assert not r.stable and "eps0 <= 1" in r.binding_constraint
    assert stability_verdict(make_params(delta_c=5e-4), "chem-continuous", modes=range(101)).stable
    r = stability_verdict(make_params(delta_c=3e-4), "chem-discrete", h=0.005)
    assert not r.stable
    bad = [m for m, eigs in r.modes if min(z.real for z in eigs) < 0]
    good = [m for m, eigs in r.modes if min(z.real for z in eigs) >= 0]
    assert bad and good and max(bad) < min(good)


def test_verdict_message_and_ndjson(make_params):
    r = stability_verdict(make_params(delta_c=3e-4), "chem-continuous", modes=range(3))
    assert r.lines()[0].startswith("UNSTABLE: chemokine decay below threshold 3.5556e-4")
    rows = [json.loads(line) for line in r.ndjson().splitlines()]
    assert [row["mode"] for row in rows] == [0, 1, 2]
    assert len(rows[0]["eigenvalues"]) == 4


def test_verdict_errors(params):
    with pytest.raises(ValueError):
        stability_verdict(params, "nonsense")
    with pytest.raises(ValueError):
        stability_verdict(params, "mech-discrete")
    with pytest.raises(ValueError):
        stability_verdict(params, "chem-continuous", modes=[])
    assert set(SYSTEMS) == {"mech-continuous", "mech-discrete", "chem-continuous", "chem-discrete"}


def test_verdict_monotone_in_delta_c(make_params):
    verdicts = [stability_verdict(make_params(delta_c=d), "chem-continuous").stable
                for d in np.linspace(1e-4, 1e-3, 37)]
    first = verdicts.index(True)
    assert all(verdicts[first:]) and not any(verdicts[:first])


@pytest.mark.parametrize("mu", [1.0, 100.0])
def test_consistency_order_mech(make_params, mu):
    r = consistency_order("mech", 1, HS, make_params(mu=mu))
    assert 1.9 <= r["plus"] <= 2.1 and 1.9 <= r["minus"] <= 2.1


def test_consistency_order_chem(params):
    r = consistency_order("chem", 1, [1 / 64, 1 / 128, 1 / 256], params)
    assert 1.9 <= r["c"] <= 2.1
    assert r["rho"] is None


def test_consistency_order_rejects_bad_sequences(params):
    with pytest.raises(ValueError):
        consistency_order("mech", 1, [0.1, 0.05], params)
    with pytest.raises(ValueError):
        consistency_order("mech", 1, [0.1, 0.04, 0.02], params)
    with pytest.raises(ValueError):
        consistency_order("bogus", 1, HS, params)


def test_sci_format():
    assert sci(3.5555555e-4) == "3.5556e-4"
    assert sci(13.94540587) == "13.945"
    assert sci(1.0) == "1"
