"""Self-describing solution container: one JSON header line plus raw field blocks.

Layout:

    line 1   magic "VORTEXLINE-SOLUTION 1"
    line 2   one-line JSON header (sorted keys): geometry, divisor, tau,
             branch, solver diagnostics, and a manifest of field blocks
    then     the field blocks back to back, row-major float64,
             little-endian, in manifest order

The header carries everything needed to rebuild the parameter set, so a
loaded solution supports the same derived-field computations as a fresh
one; v is stored bit-exactly, making round-trips reproducible.
"""

from __future__ import annotations

import json

import numpy as np

from .surface import GridField, TorusGeometry, torus_point
from .vortex import (
    DegenerateSolution,
    TaubesSolution,
    VortexParams,
    bradlow_limit,
    divisor,
    vortex_params,
)

__all__ = ["save_solution", "load_solution"]

_MAGIC = b"VORTEXLINE-SOLUTION 1"


def _header_dict(params: VortexParams) -> dict:
    geom = params.geometry
    div = params.divisor
    return {
        "geometry": {
            "period_ratio": [geom.period_ratio.real, geom.period_ratio.imag],
            "scale": geom.scale,
            "grid": list(geom.grid_dims),
        },
        "divisor": {
            "points": [[p.s, p.t] for p in div.points],
            "multiplicities": list(div.multiplicities),
        },
        "tau": params.tau,
    }


def save_solution(sol, path) -> None:
    """Write a TaubesSolution or DegenerateSolution container."""
    header = _header_dict(sol.params)
    blocks: list[np.ndarray] = []
    if isinstance(sol, DegenerateSolution):
        header["branch"] = "degenerate"
        header["fields"] = []
    elif isinstance(sol, TaubesSolution):
        header["branch"] = "interior"
        header["newton_iters"] = sol.newton_iters
        header["residual_linf"] = sol.residual_linf
        header["residual_history"] = list(sol.residual_history)
        header["bradlow_defect"] = sol.bradlow_defect
        v = np.ascontiguousarray(sol.v.values, dtype="<f8")
        header["fields"] = [
            {"name": "v", "dtype": "<f8", "shape": list(v.shape), "bytes": v.nbytes}
        ]
        blocks.append(v)
    else:
        raise TypeError(f"cannot serialize {type(sol).__name__}")
    with open(path, "wb") as fh:
        fh.write(_MAGIC + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for b in blocks:
            fh.write(b.tobytes())


def load_solution(path):
    """Read a container back into a solution object."""
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != _MAGIC:
            raise ValueError(f"{path} is not a vortexline solution container")
        header = json.loads(fh.readline().decode())
        payload = fh.read()
    geom = TorusGeometry(
        period_ratio=complex(*header["geometry"]["period_ratio"]),
        scale=float(header["geometry"]["scale"]),
        grid_dims=tuple(int(n) for n in header["geometry"]["grid"]),
    )
    pts = [torus_point(geom, lattice=st) for st in header["divisor"]["points"]]
    div = divisor(geom, pts, header["divisor"]["multiplicities"])
    params = vortex_params(geom, div, header["tau"])
    if header["branch"] == "degenerate":
        return bradlow_limit(params)
    fields = {}
    offset = 0
    for entry in header["fields"]:
        n = int(entry["bytes"])
        arr = np.frombuffer(payload[offset : offset + n], dtype=entry["dtype"])
        fields[entry["name"]] = arr.reshape([int(s) for s in entry["shape"]]).copy()
        offset += n
    if "v" not in fields:
        raise ValueError(f"{path}: container lacks the v field")
    return TaubesSolution(
        params=params,
        v=GridField(geom, fields["v"]),
        newton_iters=int(header["newton_iters"]),
        residual_linf=float(header["residual_linf"]),
        residual_history=tuple(header["residual_history"]),
        bradlow_defect=float(header["bradlow_defect"]),
    )
