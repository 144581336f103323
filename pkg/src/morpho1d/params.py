"""Model constants, derived equilibrium constants and config-file parsing."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping


class ParameterError(ValueError):
    """Raised for missing, malformed or out-of-range parameters."""


# Default values of the wound-healing constants (cm, day, g, cells).
TABLE1: dict[str, float] = {
    "D_c": 2.88e-3,
    "D_F": 1e-7,
    "chi_F": 3e-7,
    "k_c": 4e-13,
    "r_F": 9.24e-1,
    "r_F_max": 2.0,
    "k_rho_max": 10.0,
    "a_c_I": 1e-8,
    "a_c_II": 1e-8,
    "a_c_III": 2e8,
    "a_c_IV": 1e-9,
    "eta_I": 2.0,
    "eta_II": 5e-1,
    "k_F": 1.08e-7,
    "kappa_F": 1e-6,
    "delta_N": 2e-2,
    "delta_M": 6e-2,
    "delta_rho": 6e-6,
    "N_bar": 1e4,
    "M_bar": 0.0,
    "c_bar": 0.0,
    "rho_bar": 1.125e-1,
    "rho_t": 1.09,
    "E": 2.1e2,
}

# Keys that carry a default without appearing in TABLE1.
EXTRA_DEFAULTS: dict[str, float] = {
    "delta_c": 5e-4,
    "eps0": 0.0,
    "xi": 0.0,
    "R": 0.0,
}

REQUIRED_NO_DEFAULT = ("mu", "alpha")

POSITIVE_KEYS = (
    "D_c", "D_F", "chi_F", "k_c", "r_F", "r_F_max", "k_rho_max",
    "a_c_I", "a_c_II", "a_c_III", "a_c_IV", "eta_I", "eta_II", "k_F",
    "kappa_F", "delta_N", "delta_M", "delta_c", "delta_rho", "N_bar",
    "rho_bar", "rho_t", "E", "mu",
)
NONNEGATIVE_KEYS = ("alpha", "xi", "R")


def derive_q(delta_N: float, r_F: float, kappa_F: float, N_bar: float) -> float:
    """Exponent ``q`` that makes ``N_bar`` a zero of the fibroblast kinetics."""
    crowding = r_F * (1.0 - kappa_F * N_bar)
    if N_bar <= 0 or crowding <= 0 or delta_N <= 0:
        raise ParameterError("q undefined: logarithm of a nonpositive argument")
    if N_bar == 1.0:
        raise ParameterError("q undefined for N_bar = 1")
    return (math.log(delta_N) - math.log(crowding)) / math.log(N_bar)


def derive_k_rho(delta_rho: float, rho_bar: float) -> float:
    """Collagen secretion rate balancing degradation at the equilibrium."""
    if delta_rho < 0 or rho_bar < 0:
        raise ParameterError("k_rho requires delta_rho >= 0 and rho_bar >= 0")
    return delta_rho * rho_bar**2


@dataclass(frozen=True)
class ParameterSet:
    mu: float
    alpha: float
    D_c: float = TABLE1["D_c"]
    D_F: float = TABLE1["D_F"]
    chi_F: float = TABLE1["chi_F"]
    k_c: float = TABLE1["k_c"]
    r_F: float = TABLE1["r_F"]
    r_F_max: float = TABLE1["r_F_max"]
    k_rho_max: float = TABLE1["k_rho_max"]
    a_c_I: float = TABLE1["a_c_I"]
    a_c_II: float = TABLE1["a_c_II"]
    a_c_III: float = TABLE1["a_c_III"]
    a_c_IV: float = TABLE1["a_c_IV"]
    eta_I: float = TABLE1["eta_I"]
    eta_II: float = TABLE1["eta_II"]
    k_F: float = TABLE1["k_F"]
    kappa_F: float = TABLE1["kappa_F"]
    delta_N: float = TABLE1["delta_N"]
    delta_M: float = TABLE1["delta_M"]
    delta_c: float = EXTRA_DEFAULTS["delta_c"]
    delta_rho: float = TABLE1["delta_rho"]
    N_bar: float = TABLE1["N_bar"]
    M_bar: float = TABLE1["M_bar"]
    c_bar: float = TABLE1["c_bar"]
    rho_bar: float = TABLE1["rho_bar"]
    rho_t: float = TABLE1["rho_t"]
    E: float = TABLE1["E"]
    eps0: float = EXTRA_DEFAULTS["eps0"]
    xi: float = EXTRA_DEFAULTS["xi"]
    R: float = EXTRA_DEFAULTS["R"]
    q: float = field(init=False)
    k_rho: float = field(init=False)

    def __post_init__(self):
        for f in fields(self):
            if not f.init:
                continue
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParameterError(f"{f.name} must be numeric, got {value!r}")
            if not math.isfinite(value):
                raise ParameterError(f"{f.name} must be finite")
            object.__setattr__(self, f.name, float(value))
        bad = positivity_violations(self)
        if bad:
            raise ParameterError("positivity violated: " + ", ".join(bad))
        object.__setattr__(
            self, "q", derive_q(self.delta_N, self.r_F, self.kappa_F, self.N_bar)
        )
        object.__setattr__(self, "k_rho", derive_k_rho(self.delta_rho, self.rho_bar))

    @property
    def stiffness(self) -> float:
        """Collagen-dependent Young's modulus at equilibrium, E * sqrt(rho_bar)."""
        return self.E * math.sqrt(self.rho_bar)

    def with_overrides(self, **overrides: float) -> ParameterSet:
        return replace(self, **overrides)

    def as_dict(self, derived: bool = False) -> dict[str, float]:
        d = asdict(self)
        if not derived:
            d.pop("q")
            d.pop("k_rho")
        return d


def positivity_violations(p) -> list[str]:
    out = [k for k in POSITIVE_KEYS if getattr(p, k) <= 0]
    out += [k for k in NONNEGATIVE_KEYS if getattr(p, k) < 0]
    if p.M_bar != 0:
        out.append("M_bar (must be 0)")
    if p.c_bar != 0:
        out.append("c_bar (must be 0)")
    return out


_INIT_KEYS = {f.name for f in fields(ParameterSet) if f.init}


def parse_config_text(text: str) -> tuple[dict[str, float], dict[str, str]]:
    """Split a ``name = value`` document into numeric and string entries.

    Blank lines and ``#`` comments are ignored. Keys containing a dot
    (``experiment.t_end``, ``ic.N.kind``) are kept as raw strings so
    other modules can interpret them; plain keys must be numeric.
    """
    numeric: dict[str, float] = {}
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected 'name = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParameterError(f"line {lineno}: empty key")
        if "." in key:
            raw[key] = value
            continue
        try:
            numeric[key] = float(value)
        except ValueError:
            raise ParameterError(f"line {lineno}: {key} is not numeric: {value!r}") from None
    return numeric, raw


def load_parameters(
    source: str | Path | Mapping[str, float] | None = None, **overrides: float
) -> ParameterSet:
    """Build a :class:`ParameterSet` from a config path, text, or mapping.

    Missing keys fall back to the defaults; ``mu`` and ``alpha`` have none.
    """
    if source is None:
        values: dict[str, float] = {}
    elif isinstance(source, Mapping):
        values = dict(source)
    elif isinstance(source, Path) or (isinstance(source, str) and "=" not in source):
        values, _ = parse_config_text(Path(source).read_text(encoding="utf-8"))
    else:
        values, _ = parse_config_text(source)
    values.update(overrides)
    unknown = set(values) - _INIT_KEYS
    if unknown:
        raise ParameterError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    missing = [k for k in REQUIRED_NO_DEFAULT if k not in values]
    if missing:
        raise ParameterError(f"missing required parameter(s): {', '.join(missing)}")
    return ParameterSet(**values)


def dump_parameters(p: ParameterSet) -> str:
    """Serialize to the config format; ``repr`` keeps floats round-trip exact."""
    return "".join(f"{k} = {v!r}\n" for k, v in p.as_dict().items())


def _fmt(x: float) -> str:
    if 1e-3 <= abs(x) < 1e4:
        return f"{x:.5g}"
    mant, exp = f"{x:.4e}".split("e")
    return f"{mant}e{int(exp)}"


@dataclass
class ValidationReport:
    positivity_violations: list[str]
    eps0_ok: bool
    chemokine_ok: bool
    chemokine_threshold: float
    viscosity_ok: bool | None
    viscosity_bound: float | None

    @property
    def ok(self) -> bool:
        return (
            not self.positivity_violations
            and self.eps0_ok
            and self.chemokine_ok
            and self.viscosity_ok is not False
        )

    def lines(self) -> list[str]:
        out = []
        if self.positivity_violations:
            out.append("positivity violated: " + ", ".join(self.positivity_violations))
        out.append(f"eps0 <= 1: {'yes' if self.eps0_ok else 'NO'}")
        out.append(
            f"delta_c >= k_c/(a_c_II*rho_bar) = {_fmt(self.chemokine_threshold)}: "
            f"{'yes' if self.chemokine_ok else 'NO'}"
        )
        if self.viscosity_bound is not None:
            out.append(
                f"mu >= {self.viscosity_bound:.5g} (real k=1 eigenvalues): "
                f"{'yes' if self.viscosity_ok else 'NO'}"
            )
        return out


def validate_parameters(p, domain_size: float = 1.0) -> ValidationReport:
    """Advisory check of positivity and the stability relations; never mutates ``p``."""
    threshold = p.k_c / (p.a_c_II * p.rho_bar)
    if p.eps0 <= 1:
        bound = math.sqrt(p.rho_t * p.E * math.sqrt(p.rho_bar) * (1 - p.eps0)) / math.pi
        bound *= domain_size
        visc_ok = p.mu >= bound
    else:
        bound, visc_ok = None, None
    return ValidationReport(
        positivity_violations=positivity_violations(p),
        eps0_ok=p.eps0 <= 1,
        chemokine_ok=p.delta_c >= threshold,
        chemokine_threshold=threshold,
        viscosity_ok=visc_ok,
        viscosity_bound=bound,
    )
