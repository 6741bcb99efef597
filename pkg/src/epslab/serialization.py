"""CSV + JSON-sidecar output with fixed formatting for byte-identical reruns."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .numerics import PhaseSpaceGrid, make_field


def fmt(x) -> str:
    """17 significant digits, the shortest width that round-trips any double."""
    return format(float(x), ".17g")


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def field_to_csv(field) -> str:
    """Rows ``q, p, value`` (real) or ``q, p, re, im`` (complex), q varying fastest."""
    g = field.grid
    vals = field.values
    cplx = np.iscomplexobj(vals)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "p", "re", "im"] if cplx else ["q", "p", "value"])
    q = [fmt(x) for x in g.q]
    for i, p in enumerate(g.p):
        ps = fmt(p)
        row = vals[i]
        if cplx:
            for j in range(g.n_q):
                w.writerow([q[j], ps, fmt(row[j].real), fmt(row[j].imag)])
        else:
            for j in range(g.n_q):
                w.writerow([q[j], ps, fmt(row[j])])
    return buf.getvalue()


def samples_to_csv(axis_name: str, axis, values) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([axis_name, "re", "im"])
    for x, v in zip(axis, np.asarray(values, dtype=np.complex128)):
        w.writerow([fmt(x), fmt(v.real), fmt(v.imag)])
    return buf.getvalue()


def field_metadata(field, extra=None) -> dict:
    meta = {
        "label": field.label,
        "grid": field.grid.to_dict(),
        "dtype": "complex" if np.iscomplexobj(field.values) else "real",
        "edge_exclusion": field.edge,
        "warnings": list(field.warnings),
    }
    if extra:
        meta.update(extra)
    return meta


def read_field(csv_path):
    """Load a field written by :func:`write_field` (grid taken from the sidecar)."""
    csv_path = Path(csv_path)
    meta_path = csv_path.with_name(csv_path.name[: -len(".csv")] + ".meta.json")
    meta = json.loads(meta_path.read_text())
    grid = PhaseSpaceGrid.from_dict(meta["grid"])
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.n_p * grid.n_q:
        raise InvalidInputError("CSV row count does not match the grid")
    if meta["dtype"] == "complex":
        vals = (data[:, 2] + 1j * data[:, 3]).reshape(grid.shape)
    else:
        vals = data[:, 2].reshape(grid.shape)
    return make_field(grid, vals, meta.get("label", ""), edge=meta.get("edge_exclusion", 0))


class OutputWriter:
    """Collects files in memory and writes them only on :meth:`commit`.

    Failures before commit leave no partial output; each file is written to a
    temporary name and renamed into place.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def add_field(self, stem: str, field, extra=None):
        self.add(f"{stem}.csv", field_to_csv(field))
        self.add(f"{stem}.meta.json", dumps_json(field_metadata(field, extra)))

    def add_json(self, name: str, obj):
        self.add(name, dumps_json(obj))

    def commit(self) -> list:
        self.directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name in sorted(self.files):
            target = self.directory / name
            tmp = target.with_name(target.name + ".tmp")
            tmp.write_text(self.files[name])
            os.replace(tmp, target)
            written.append(str(target))
        return written
