"""Problem bundles on disk: a JSON manifest plus CSV arrays.

Manifest layout (paths are relative to the manifest's directory)::

    {
      "b": "b.csv",
      "block1": {"map": MAP, "regularizer": REG | null},
      "block2": {"map": MAP, "regularizer": REG | null},
      "f3": {"kind": "canonical"}
            | {"kind": "quadratic", "Q": "Q.csv", "q": "q.csv", "sigma": s, "L": l}
    }

    MAP = {"kind": "dense", "matrix": "A1.csv"}
        | {"kind": "identity", "dim": N}
        | {"kind": "rank_one_column", "m": M, "n": N}
        | {"kind": "entry_mask", "shape": [M, N], "indices": "mask1.csv"}
        | {"kind": "empty"}

    REG = {"kind": "l1" | "nuclear" | "zero" | "squared_l2",
           "beta": number,
           "box": {"lo": number | [numbers], "hi": number | [numbers]} | null,
           "shape": [M, N]}          # nuclear only

CSV files are row-major, comma separated, no header, one matrix row (or one
vector entry) per line, floats written with ``repr`` so they round-trip
exactly. Entry-mask files hold one ``row,col`` pair per line.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .problem import Block, BlockMap, RlsdProblem
from .regularizers import Canonical, Regularizer, StronglyConvexSmooth


def write_csv(path, a):
    a = np.asarray(a)
    lines = []
    if a.ndim == 1:
        lines = [_fmt(v) for v in a]
    elif a.ndim == 2:
        lines = [",".join(_fmt(v) for v in row) for row in a]
    else:
        raise InvalidInputError("only vectors and matrices can be written as CSV")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def _fmt(v):
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    return repr(float(v))


def read_csv(path, dtype=float):
    text = Path(path).read_text()
    rows = [line.split(",") for line in text.splitlines() if line.strip()]
    if not rows:
        return np.zeros(0, dtype=dtype)
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise InvalidInputError(f"{path}: ragged CSV rows")
    try:
        a = np.array([[dtype(v) for v in r] for r in rows], dtype=dtype)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from exc
    return a[:, 0] if a.shape[1] == 1 else a


def json_dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _map_to_json(bmap, directory, tag):
    if bmap.kind == "dense":
        name = f"A{tag}.csv"
        write_csv(directory / name, bmap.matrix)
        return {"kind": "dense", "matrix": name}
    if bmap.kind == "identity":
        return {"kind": "identity", "dim": bmap.input_dim}
    if bmap.kind == "rank_one_column":
        m, n = bmap.shape2d
        return {"kind": "rank_one_column", "m": m, "n": n}
    if bmap.kind == "entry_mask":
        name = f"mask{tag}.csv"
        write_csv(directory / name, bmap.indices)
        return {"kind": "entry_mask", "shape": list(bmap.shape2d), "indices": name}
    return {"kind": "empty"}


def _map_from_json(d, directory, output_dim):
    kind = d.get("kind")
    if kind == "dense":
        A = read_csv(directory / d["matrix"])
        return BlockMap.dense(A.reshape(A.shape[0], -1))
    if kind == "identity":
        return BlockMap.identity(d["dim"])
    if kind == "rank_one_column":
        return BlockMap.rank_one_column(d["m"], d["n"])
    if kind == "entry_mask":
        idx = read_csv(directory / d["indices"], dtype=int)
        return BlockMap.entry_mask(d["shape"], idx.reshape(-1, 2))
    if kind == "empty":
        return BlockMap.empty(output_dim)
    raise InvalidInputError(f"unknown block map kind {kind!r}")


def write_problem(p, directory, name="problem.json"):
    """Write ``p`` as a bundle into ``directory``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_csv(directory / "b.csv", p.b)
    manifest = {"b": "b.csv"}
    for tag, blk in (("1", p.block1), ("2", p.block2)):
        manifest[f"block{tag}"] = {
            "map": _map_to_json(blk.map, directory, tag),
            "regularizer": None if blk.reg is None else blk.reg.to_json(),
        }
    if isinstance(p.f3, StronglyConvexSmooth):
        write_csv(directory / "Q.csv", p.f3.Q)
        write_csv(directory / "q.csv", p.f3.q)
        manifest["f3"] = {"kind": "quadratic", "Q": "Q.csv", "q": "q.csv",
                          "sigma": p.f3.sigma, "L": p.f3.L}
    else:
        manifest["f3"] = {"kind": "canonical"}
    path = directory / name
    json_dump(manifest, path)
    return path


def read_problem(path):
    """Load and validate a bundle manifest. Raises InvalidInputError or OSError."""
    path = Path(path)
    directory = path.parent
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON ({exc})") from exc
    try:
        b = np.atleast_1d(read_csv(directory / manifest["b"])).reshape(-1)
        blocks = []
        for tag in ("block1", "block2"):
            d = manifest[tag]
            bmap = _map_from_json(d["map"], directory, b.shape[0])
            reg = d.get("regularizer")
            blocks.append(Block(bmap, None if reg is None else Regularizer.from_json(reg)))
        f3d = manifest.get("f3", {"kind": "canonical"})
        if f3d["kind"] == "canonical":
            f3 = Canonical()
        elif f3d["kind"] == "quadratic":
            Q = read_csv(directory / f3d["Q"])
            q = np.atleast_1d(read_csv(directory / f3d["q"]))
            f3 = StronglyConvexSmooth(Q.reshape(q.shape[0], q.shape[0]), q,
                                      f3d["sigma"], f3d["L"])
        else:
            raise InvalidInputError(f"unknown f3 kind {f3d['kind']!r}")
    except KeyError as exc:
        raise InvalidInputError(f"{path}: missing field {exc}") from exc
    return RlsdProblem(blocks[0], blocks[1], b, f3)
