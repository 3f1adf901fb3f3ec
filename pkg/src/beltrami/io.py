"""Grid container (``BELT``), CSV export and JSON helpers."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .grid import ComplexGrid, GridSpec
from .solver import PrincipalSolution

__all__ = [
    "MAGIC",
    "VERSION",
    "write_grid",
    "read_grid",
    "write_grid_csv",
    "write_solution",
    "solution_sidecar",
    "to_jsonable",
    "dump_json",
    "dumps_json",
]

MAGIC = b"BELT"
VERSION = 1
_HEADER = struct.Struct("<4sIIdd")


def write_grid(path, grid: ComplexGrid) -> None:
    """Header ``magic, version u32, n u32, L f64, rho f64`` then ``n*n`` complex64, row-major."""
    spec = grid.spec
    payload = np.ascontiguousarray(grid.values, dtype="<c8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, spec.n, spec.half_width, spec.support_radius))
        fh.write(payload.tobytes(order="C"))


def read_grid(path) -> ComplexGrid:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, L, rho = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = data[_HEADER.size :]
    if len(body) != 8 * n * n:
        raise ValueError(f"{path}: payload has {len(body)} bytes, expected {8 * n * n}")
    values = np.frombuffer(body, dtype="<c8").reshape(n, n).astype(np.complex128)
    return ComplexGrid(GridSpec(n, L, rho), values)


def write_grid_csv(path, grid: ComplexGrid, stride: int = 1) -> None:
    """Rows ``j,k,Re z,Im z,Re g,Im g``; ``stride`` thins the output for plotting."""
    z = grid.spec.z
    g = grid.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "k", "re_z", "im_z", "re_g", "im_g"])
        for j in range(0, grid.spec.n, stride):
            for k in range(0, grid.spec.n, stride):
                w.writerow([j, k, repr(z[j, k].real), repr(z[j, k].imag), repr(g[j, k].real), repr(g[j, k].imag)])


def to_jsonable(x):
    """Complex numbers become ``[re, im]``; numpy scalars and arrays become Python values."""
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [to_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, Path):
        return str(x)
    return x


def dumps_json(obj, indent: int | None = 2) -> str:
    return json.dumps(to_jsonable(obj), indent=indent, sort_keys=True, allow_nan=True)


def dump_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj) + "\n")


def solution_sidecar(sol: PrincipalSolution, structure: str = "") -> dict:
    return {
        "w": sol.w_infinity,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "k_bound": sol.k_bound,
        "structure": structure,
        "spec": sol.spec.as_dict(),
    }


def write_solution(directory, sol: PrincipalSolution, stem: str = "solution", structure: str = "") -> dict:
    """Write ``omega``, ``f - wz``, ``d_z f`` and ``d_zbar f`` grids plus the JSON sidecar."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, grid in (("omega", sol.omega), ("correction", sol.f_values), ("dz", sol.dz_f), ("dzbar", sol.dzbar_f)):
        p = d / f"{stem}.{name}.belt"
        write_grid(p, grid)
        files[name] = p.name
    meta = solution_sidecar(sol, structure)
    meta["files"] = files
    dump_json(d / f"{stem}.json", meta)
    return meta
