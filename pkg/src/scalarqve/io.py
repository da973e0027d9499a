"""File formats: spectrum/scan/report CSV, binary rasters, heatmap images
and run manifests.

Spectrum CSV layout::

    # scalarqve-spectrum 1
    # <key>: <json value>        (config hash, grid, solver, q, m, ...)
    kx,ky,F
    <row-major nodes, kx slow, 17 significant digits>

Nothing time- or machine-dependent is written to the CSV, so repeated runs
of the same configuration produce identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import struct
import tempfile

import numpy as np

from .sweep import MomentumGrid, ScanTable, Spectrum

CSV_MAGIC = "# scalarqve-spectrum 1"
RASTER_MAGIC = b"SQVERAS1"
_CSV_META_KEYS = ("config_hash", "grid", "field", "solver", "q", "m", "A_end",
                  "density_measure")


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_spectrum_csv(spectrum: Spectrum, path) -> None:
    g = spectrum.grid
    lines = [CSV_MAGIC]
    meta = dict(spectrum.metadata)
    meta["grid"] = g.to_dict()
    for key in _CSV_META_KEYS:
        if key in meta:
            lines.append(f"# {key}: {json.dumps(meta[key], sort_keys=True)}")
    lines.append("kx,ky,F")
    kx, ky = g.kx, g.ky
    for i in range(kx.size):
        for j in range(ky.size):
            lines.append(f"{fmt(kx[i])},{fmt(ky[j])},{fmt(spectrum.values[i, j])}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spectrum_csv(path) -> Spectrum:
    meta = {}
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != CSV_MAGIC:
            raise ValueError(f"{path}: not a spectrum CSV")
        line = fh.readline()
        while line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = json.loads(value)
            line = fh.readline()
        if line.strip() != "kx,ky,F":
            raise ValueError(f"{path}: missing column header")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    gd = meta.get("grid")
    if gd is None:
        raise ValueError(f"{path}: missing grid metadata")
    grid = MomentumGrid(tuple(gd["kx"]), tuple(gd["ky"]), gd["kz"])
    nx, ny = grid.shape
    if data.shape[0] != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} rows, found {data.shape[0]}")
    return Spectrum(grid, data[:, 2].reshape(nx, ny).copy(), meta)


def write_raster_bin(spectrum: Spectrum, path) -> None:
    """Row-major little-endian float64 values behind a JSON header."""
    header = {
        "grid": spectrum.grid.to_dict(),
        "dtype": "<f8",
        "order": "row-major; index [i, j] = (kx[i], ky[j]); kx slow",
        "shape": list(spectrum.grid.shape),
        "config_hash": spectrum.metadata.get("config_hash"),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(RASTER_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(spectrum.values, dtype="<f8").tobytes())


def read_raster_bin(path) -> Spectrum:
    with open(path, "rb") as fh:
        if fh.read(len(RASTER_MAGIC)) != RASTER_MAGIC:
            raise ValueError(f"{path}: not a scalarqve raster")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n))
        data = np.frombuffer(fh.read(), dtype="<f8")
    gd = header["grid"]
    grid = MomentumGrid(tuple(gd["kx"]), tuple(gd["ky"]), gd["kz"])
    return Spectrum(grid, data.reshape(grid.shape).copy(),
                    {"config_hash": header.get("config_hash")})


def raster_image(spectrum: Spectrum, scale="linear") -> np.ndarray:
    """Normalized ``[0, 1]`` image: rows are ky (top = largest), columns kx."""
    v = np.nan_to_num(np.asarray(spectrum.values, dtype=float), nan=0.0)
    peak = v.max() if v.size else 0.0
    if peak <= 0:
        img = np.zeros_like(v)
    elif scale == "linear":
        img = np.clip(v / peak, 0.0, 1.0)
    elif scale == "log":
        floor = 1e-12 * peak
        img = (np.log10(np.maximum(v, floor)) - math.log10(floor)) / 12.0
    else:
        raise ValueError("scale must be 'linear' or 'log'")
    return img.T[::-1]


def export_raster(spectrum: Spectrum, path, scale="linear", cmap="viridis") -> str:
    """Write a lossless PNG heatmap (one pixel per grid node) plus a JSON
    sidecar ``<path>.json`` describing the pixel-to-momentum mapping."""
    from matplotlib import image as mpimg

    img = raster_image(spectrum, scale)
    mpimg.imsave(path, img, vmin=0.0, vmax=1.0, cmap=cmap, format="png",
                 metadata={"Software": None})
    g = spectrum.grid
    sidecar = {
        "image": os.path.basename(str(path)),
        "width": g.shape[0],
        "height": g.shape[1],
        "columns": {"axis": "kx", "min": g.kx_range[0], "max": g.kx_range[1]},
        "rows": {"axis": "ky", "top": g.ky_range[1], "bottom": g.ky_range[0]},
        "scale": scale,
        "log_floor_relative": 1e-12 if scale == "log" else None,
        "peak_F": _finite_or_none(spectrum.peak),
        "colormap": cmap,
        "config_hash": spectrum.metadata.get("config_hash"),
    }
    side = str(path) + ".json"
    with open(side, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return side


def write_scan_csv(table: ScanTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([table.parameter, "density", "peak_F", "keldysh_gamma", "failed", "error"])
        for r in table.rows:
            w.writerow([fmt(r.value), fmt(r.density), fmt(r.peak_F), fmt(r.keldysh_gamma),
                        int(r.failed), r.error])


def read_scan_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


SEMICLASSICAL_COLUMNS = ("kx", "ky", "kz", "pair_count", "K1", "K2", "alpha",
                         "F_boson", "F_fermion", "F_exact", "flagged")


def write_semiclassical_csv(rows, path) -> None:
    """``rows`` are dicts keyed by :data:`SEMICLASSICAL_COLUMNS`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SEMICLASSICAL_COLUMNS)
        for r in rows:
            out = []
            for c in SEMICLASSICAL_COLUMNS:
                v = r.get(c)
                if c in ("pair_count", "flagged"):
                    out.append(int(v))
                elif v is None:
                    out.append("nan")
                else:
                    out.append(fmt(v))
            w.writerow(out)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json_atomic(obj, path) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(_sanitize(obj), fh, indent=2, sort_keys=True, allow_nan=False,
                      default=_json_default)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _finite_or_none(x):
    return float(x) if math.isfinite(x) else None


def _sanitize(o):
    """Non-finite floats become ``null`` so the output stays strict JSON."""
    if isinstance(o, dict):
        return {k: _sanitize(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_sanitize(v) for v in o]
    if isinstance(o, (float, np.floating)):
        return _finite_or_none(float(o))
    return o


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return _sanitize(o.tolist())
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")
