"""Experiment config blocks and CSV/NDJSON output of trajectories."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chemistry import FIELDS, ChemState, PicardSettings
from .fem import Mesh, build_mesh
from .initial import PerturbationSpec
from .mechanics import MechState
from .params import ParameterError, ParameterSet, load_parameters, parse_config_text


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


@dataclass
class Experiment:
    params: ParameterSet
    mesh: Mesh
    dt: float
    t_end: float
    sample_times: list[float] | None = None
    sample_every: int | None = None
    ics: dict[str, PerturbationSpec] = field(default_factory=dict)
    picard: PicardSettings = field(default_factory=PicardSettings)

    def mech_ic(self) -> MechState:
        v = self._field("v", 0.0)
        v[[0, -1]] = 0.0
        return MechState(0.0, v, self._field("eps", self.params.eps0))

    def chem_ic(self) -> ChemState:
        p = self.params
        eq = {"c": 0.0, "N": p.N_bar, "M": 0.0, "rho": p.rho_bar}
        return ChemState(0.0, *(self._field(f, eq[f]) for f in FIELDS))

    def _field(self, name, default_offset):
        spec = self.ics.get(name)
        if spec is None:
            return np.full(self.mesh.n_nodes, float(default_offset))
        return spec.evaluate(self.mesh)


def parse_perturbation(block: dict[str, str], default_offset: float) -> PerturbationSpec:
    kind = block.get("kind", "sine")
    offset = float(block.get("offset", default_offset))
    if kind == "sine":
        return PerturbationSpec(
            "sine",
            amplitude=float(block.get("amplitude", 0.0)),
            wavenumber=int(float(block.get("wavenumber", 1))),
            equilibrium_offset=offset,
        )
    if kind == "uniform-spline":
        if "knots" in block:
            return PerturbationSpec(
                "uniform-spline", knot_values=tuple(_floats(block["knots"])), equilibrium_offset=offset
            )
        if "alternate" in block:
            hi, lo = _floats(block["alternate"])
            return PerturbationSpec.alternating(hi, lo, offset)
        raise ParameterError("uniform-spline needs 'knots' or 'alternate'")
    raise ParameterError(f"unknown perturbation kind {kind!r}")


def load_experiment(
    text: str,
    overrides: dict[str, str] | None = None,
    default_dt: float = 0.01,
    default_domain=(1000, 0.0, 5.0),
) -> Experiment:
    """Parse a config document: parameter keys plus ``mesh.*``, ``run.*``,
    ``picard.*`` and ``ic.<field>.*`` entries. ``overrides`` holds
    ``--set key=value`` pairs and wins over the document."""
    numeric, raw = parse_config_text(text)
    for key, value in (overrides or {}).items():
        if "." in key:
            raw[key] = value
        else:
            try:
                numeric[key] = float(value)
            except ValueError:
                raise ParameterError(f"{key} is not numeric: {value!r}") from None
    p = load_parameters(numeric)
    n, a, b = default_domain
    mesh = build_mesh(
        int(float(raw.get("mesh.n", n))), float(raw.get("mesh.a", a)), float(raw.get("mesh.b", b))
    )
    dt = float(raw.get("run.dt", default_dt))
    t_end = float(raw.get("run.t_end", dt))
    samples = _floats(raw["run.samples"]) if "run.samples" in raw else None
    every = int(float(raw["run.sample_every"])) if "run.sample_every" in raw else None
    picard = PicardSettings(
        tol=float(raw.get("picard.tol", 1e-8)), max_iter=int(float(raw.get("picard.max_iter", 50)))
    )
    eq = {"v": 0.0, "eps": p.eps0, "c": 0.0, "N": p.N_bar, "M": 0.0, "rho": p.rho_bar}
    blocks: dict[str, dict[str, str]] = {}
    for key, value in raw.items():
        parts = key.split(".")
        if parts[0] == "ic":
            if len(parts) != 3 or parts[1] not in eq:
                raise ParameterError(f"bad initial-condition key {key!r}")
            blocks.setdefault(parts[1], {})[parts[2]] = value
        elif parts[0] not in ("mesh", "run", "picard"):
            raise ParameterError(f"unknown config key {key!r}")
    ics = {name: parse_perturbation(b, eq[name]) for name, b in blocks.items()}
    return Experiment(p, mesh, dt, t_end, samples, every, ics, picard)


def emit_timeseries(trajectory, destination, force: bool = False) -> list[Path]:
    """Write ``<field>.csv`` (header ``t,x,value``) per field plus ``summary.ndjson``."""
    if not trajectory.times:
        raise ValueError("empty trajectory")
    dest = Path(destination)
    names = [f"{f}.csv" for f in trajectory.fields] + ["summary.ndjson"]
    if dest.exists() and not force and any((dest / n).exists() for n in names):
        raise FileExistsError(f"{dest} already holds output; use --force to overwrite")
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    x = trajectory.nodes
    for f in trajectory.fields:
        path = dest / f"{f}.csv"
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,x,value\n")
            for t, values in zip(trajectory.times, trajectory.samples[f]):
                ts = repr(float(t))
                fh.writelines(f"{ts},{xi!r},{vi!r}\n" for xi, vi in zip(x.tolist(), values.tolist()))
        written.append(path)
    path = dest / "summary.ndjson"
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in trajectory.diagnostics:
            fh.write(json.dumps(rec) + "\n")
    written.append(path)
    return written


def read_timeseries(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]
