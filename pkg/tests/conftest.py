import pytest

from morpho1d.params import load_parameters


@pytest.fixture
def params():
    """Default constants with the mechanics pair used by the oscillatory runs."""
    return load_parameters(mu=1.0, alpha=0.22)


@pytest.fixture
def make_params():
    def make(**kw):
        kw.setdefault("mu", 1.0)
        kw.setdefault("alpha", 0.22)
        return load_parameters(**kw)

    return make
