"""File formats: node/edge/observation CSVs, null tables, reports and run configs."""

from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, InvalidInputError
from .model import UNIFORM, TabulatedNull, UniformNull

logger = logging.getLogger(__name__)


def _read_rows(path, required, optional=()):
    """Yield ``(line_number, row_dict)`` after checking the header."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise InvalidInputError(f"{path}:1: missing column(s) {', '.join(missing)}")
        unknown = [c for c in header if c not in required and c not in optional]
        if unknown:
            raise InvalidInputError(f"{path}:1: unexpected column(s) {', '.join(unknown)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not x.strip() for x in rec):
                continue
            if len(rec) != len(header):
                raise InvalidInputError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}"
                )
            rows.append((lineno, {h: x.strip() for h, x in zip(header, rec)}))
    return rows


def _float(path, lineno, name, text):
    try:
        val = float(text)
    except ValueError:
        raise InvalidInputError(f"{path}:{lineno}: {name} {text!r} is not a number") from None
    if not math.isfinite(val):
        raise InvalidInputError(f"{path}:{lineno}: {name} must be finite")
    return val


def read_nodes(path):
    """Node file ``vertex_id,lat,lon``. Returns ``(ids, coords)``."""
    ids, coords = [], []
    for lineno, row in _read_rows(path, ("vertex_id", "lat", "lon")):
        vid = row["vertex_id"]
        if not vid:
            raise InvalidInputError(f"{path}:{lineno}: empty vertex_id")
        if vid in ids:
            raise InvalidInputError(f"{path}:{lineno}: duplicate vertex_id {vid!r}")
        ids.append(vid)
        coords.append((_float(path, lineno, "lat", row["lat"]),
                       _float(path, lineno, "lon", row["lon"])))
    if not ids:
        raise InvalidInputError(f"{path}: no vertices")
    return ids, np.array(coords)


def read_edges(path, vertex_ids):
    """Undirected edge file ``src,dst``; duplicates and self-loops are rejected."""
    known = set(vertex_ids)
    seen = set()
    edges = []
    for lineno, row in _read_rows(path, ("src", "dst")):
        s, d = row["src"], row["dst"]
        for v in (s, d):
            if v not in known:
                raise InvalidInputError(f"{path}:{lineno}: unknown vertex_id {v!r}")
        if s == d:
            raise InvalidInputError(f"{path}:{lineno}: self-loop on {s!r}")
        key = frozenset((s, d))
        if key in seen:
            raise InvalidInputError(f"{path}:{lineno}: duplicate edge {s!r}-{d!r}")
        seen.add(key)
        edges.append((s, d))
    return edges


def write_nodes(path, vertex_ids, coords):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id", "lat", "lon"])
        for vid, (lat, lon) in zip(vertex_ids, coords):
            w.writerow([vid, repr(float(lat)), repr(float(lon))])


def write_edges(path, graph):
    ids = graph.vertex_ids
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst"])
        for i, j in zip(*np.nonzero(np.triu(graph.adjacency))):
            w.writerow([ids[i], ids[j]])


def read_observations(path, vertex_ids):
    """Observation file ``vertex_id,time,p_value[,theta]``.

    Returns a dict with vertex indices, raw times, p-values, optional theta
    and the raw text rows (kept so outputs echo the input exactly).
    """
    index = {v: i for i, v in enumerate(vertex_ids)}
    rows = _read_rows(path, ("vertex_id", "time", "p_value"), ("theta",))
    if not rows:
        raise InvalidInputError(f"{path}: no observations")
    has_theta = "theta" in rows[0][1]
    v, t, p, th, raw = [], [], [], [], []
    zeros = 0
    for lineno, row in rows:
        vid = row["vertex_id"]
        if vid not in index:
            raise InvalidInputError(f"{path}:{lineno}: unknown vertex_id {vid!r}")
        pv = _float(path, lineno, "p_value", row["p_value"])
        if not 0.0 <= pv <= 1.0:
            raise InvalidInputError(f"{path}:{lineno}: p_value {pv!r} outside [0, 1]")
        zeros += pv == 0.0
        v.append(index[vid])
        t.append(_float(path, lineno, "time", row["time"]))
        p.append(pv)
        if has_theta:
            if row["theta"] not in ("0", "1"):
                raise InvalidInputError(f"{path}:{lineno}: theta must be 0 or 1")
            th.append(int(row["theta"]))
        raw.append(row)
    if zeros:
        logger.warning("%s: %d p-values equal to 0 will be clamped", path, zeros)
    return {
        "vertices": np.array(v, dtype=np.int64),
        "times": np.array(t),
        "pvalues": np.array(p),
        "theta": np.array(th, dtype=np.int8) if has_theta else None,
        "rows": raw,
    }


def write_observations(path, vertex_ids, obs, raw_times):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        header = ["vertex_id", "time", "p_value"]
        if obs.theta is not None:
            header.append("theta")
        w.writerow(header)
        for m in range(obs.M):
            rec = [vertex_ids[obs.vertices[m]], repr(float(raw_times[m])), repr(float(obs.pvalues[m]))]
            if obs.theta is not None:
                rec.append(int(obs.theta[m]))
            w.writerow(rec)


def read_null_table(path) -> TabulatedNull:
    """Tabulated null density ``p,density`` with p ascending over [0, 1]."""
    p, d = [], []
    for lineno, row in _read_rows(path, ("p", "density")):
        p.append(_float(path, lineno, "p", row["p"]))
        d.append(_float(path, lineno, "density", row["density"]))
    try:
        return TabulatedNull(p, d)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None


def null_to_json(null) -> dict:
    if isinstance(null, UniformNull):
        return {"kind": "uniform"}
    return {"kind": "tabulated", "p": null.grid.tolist(), "density": null.density.tolist()}


def null_from_json(spec: dict):
    if spec.get("kind") == "uniform":
        return UNIFORM
    if spec.get("kind") == "tabulated":
        return TabulatedNull(spec["p"], spec["density"])
    raise InvalidInputError(f"unknown null density kind {spec.get('kind')!r}")


def write_json(path, payload):
    with Path(path).open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path):
    try:
        with Path(path).open() as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None


def write_table(path, columns, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else x


# --- run configuration ---------------------------------------------------

REQUIRED = object()


def parse_int(text):
    return int(text)


def parse_float(text):
    val = float(text)
    if not math.isfinite(val):
        raise ValueError("not finite")
    return val


def parse_int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def parse_float_list(text):
    return [parse_float(x) for x in text.split(",") if x.strip()]


def parse_str(text):
    if not text:
        raise ValueError("empty")
    return text


def read_config(path, schema: dict) -> dict:
    """Flat ``key = value`` file checked against ``schema``.

    ``schema`` maps each key to ``(parser, default)``; a default of
    :data:`REQUIRED` makes the key mandatory and ``None`` leaves it unset.
    Blank lines and ``#`` comments are ignored; unknown or repeated keys are
    errors. Relative paths are kept as written.
    """
    path = Path(path)
    values = {}
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, text = (s.strip() for s in line.partition("="))
            if key not in schema:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: key {key!r} given twice")
            parser = schema[key][0]
            try:
                values[key] = parser(text)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {text!r} ({exc})") from None
    for key, (_, default) in schema.items():
        if key not in values:
            if default is REQUIRED:
                raise ConfigError(f"{path}: missing required key {key!r}")
            values[key] = default
    return values


def resolve(base: Path, value):
    """Resolve a config path relative to the config file's directory."""
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p
