"""State snapshots.

A snapshot is a directory holding one ``.npy`` array per field family and a
``snapshot.json`` manifest::

    <dir>/snapshot.json   {"format", "formulation", "time", "grid": {"n", "lengths"},
                           "eos": {"gamma", "K", "rho_floor"}, "families": {name: shape}}
    <dir>/<family>.npy    float64 array, component axis first for vector families

Clebsch families are ``phi0 rho alpha mu phi beta``; Eulerian families are
``rho V B``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .clebsch import ClebschState, EquationOfState
from .noncanonical import PhysicalState
from .spectral import Grid

FORMAT_VERSION = 1
MANIFEST = "snapshot.json"
FAMILIES = {
    "clebsch": ("phi0", "rho", "alpha", "mu", "phi", "beta"),
    "eulerian": ("rho", "V", "B"),
}


def save(directory: str | Path, state: ClebschState | PhysicalState,
         eos: EquationOfState | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    kind = "clebsch" if isinstance(state, ClebschState) else "eulerian"
    families = {}
    for name in FAMILIES[kind]:
        arr = np.ascontiguousarray(getattr(state, name), dtype=np.float64)
        np.save(directory / f"{name}.npy", arr)
        families[name] = list(arr.shape)
    g = state.grid
    meta = {
        "format": FORMAT_VERSION,
        "formulation": kind,
        "time": float(state.time),
        "grid": {"n": list(g.shape), "lengths": list(g.lengths)},
        "eos": None if eos is None else {"gamma": eos.gamma, "K": eos.K, "rho_floor": eos.rho_floor},
        "families": families,
    }
    (directory / MANIFEST).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return directory


def read_manifest(directory: str | Path) -> dict:
    meta = json.loads((Path(directory) / MANIFEST).read_text())
    if meta.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported snapshot format {meta.get('format')!r}")
    return meta


def load(directory: str | Path) -> ClebschState | PhysicalState:
    directory = Path(directory)
    meta = read_manifest(directory)
    grid = Grid(*meta["grid"]["n"], *meta["grid"]["lengths"])
    kind = meta["formulation"]
    if kind not in FAMILIES:
        raise ValueError(f"unknown formulation {kind!r}")
    fields = {name: np.load(directory / f"{name}.npy", allow_pickle=False) for name in FAMILIES[kind]}
    if kind == "clebsch":
        return ClebschState.from_fields(grid, **fields, time=meta["time"])
    return PhysicalState.from_fields(grid, fields["rho"], fields["V"], fields["B"], meta["time"], check_b=False)


def load_eos(directory: str | Path) -> EquationOfState | None:
    eos = read_manifest(directory)["eos"]
    return None if eos is None else EquationOfState(**eos)
