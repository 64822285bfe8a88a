"""Plain-text snapshots of learned state.

Layout: a ``coopcache-snapshot <kind>`` line, ``key value...`` header lines,
a ``dims`` line, then the values in row-major order, one row per line.
Floats are written with ``repr`` so a save/load round trip is exact.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .qlearning import QTable
from .vfa import VfaParams

__all__ = ["save_qtable", "load_qtable", "save_vfa", "load_vfa"]

MAGIC = "coopcache-snapshot"


def _row(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_qtable(table: QTable, path) -> None:
    lines = [f"{MAGIC} qtable", f"candidates {table.n_candidates}",
             f"actions {table.n_actions}", "dims {} {}".format(*table.shape)]
    lines += [_row(r) for r in table.values]
    Path(path).write_text("\n".join(lines) + "\n")


def _read(path, kind):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != f"{MAGIC} {kind}":
        raise ValueError(f"{path}: not a {kind} snapshot")
    header = {}
    i = 1
    while not lines[i].startswith("dims"):
        key, *vals = lines[i].split()
        header[key] = vals
        i += 1
    dims = tuple(int(v) for v in lines[i].split()[1:])
    rows = [np.array(line.split(), dtype=float) for line in lines[i + 1:] if line.strip()]
    return header, dims, rows


def load_qtable(path) -> QTable:
    header, dims, rows = _read(path, "qtable")
    values = np.array(rows, dtype=float).reshape(dims)
    return QTable(int(header["candidates"][0]), int(header["actions"][0]), values)


def save_vfa(params: VfaParams, path) -> None:
    lines = [f"{MAGIC} vfa",
             f"omega1 {params.omega1!r}", f"omega2 {params.omega2!r}",
             f"delta {params.delta!r}", f"gamma {params.gamma!r}",
             f"dims 3 {params.C}",
             _row([params.beta] * params.C), _row(params.eta), _row(params.xi)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_vfa(path) -> VfaParams:
    header, dims, rows = _read(path, "vfa")
    if len(rows) != 3 or dims != (3, len(rows[0])):
        raise ValueError(f"{path}: malformed vfa snapshot")
    return VfaParams(C=dims[1], omega1=float(header["omega1"][0]),
                     omega2=float(header["omega2"][0]), delta=float(header["delta"][0]),
                     gamma=float(header["gamma"][0]), beta=float(rows[0][0]),
                     eta=rows[1], xi=rows[2])
