"""Serialization: campaign CSVs, JSON summaries, loop collections, and the
bitmap scene format with its arc-annotation sidecar.

All float formatting goes through repr (shortest round-trip), so a rerun
with the same seed produces byte-identical files.
"""

from __future__ import annotations

import csv
import json
import struct

import numpy as np

from .extremal import GridDomain
from .paths import LoopSample
from .raster import OccupancyRaster

__all__ = ["write_campaign_csv", "read_campaign_csv", "write_formulas_csv",
           "read_formulas_csv", "write_summary_json", "read_summary_json",
           "write_loops", "read_loops", "write_cluster_csv",
           "write_scene", "read_scene", "write_domain", "read_domain"]

CAMPAIGN_COLUMNS = ["c", "k", "lambda", "r", "trials",
                    "successes_or_mean", "stderr"]
FORMULA_COLUMNS = ["c", "kappa", "xi2", "xi4", "xi6", "d0", "d1", "d2"]

_MAGIC = b"LSBM"
_VERSION = 1
_LOOPS_FORMAT = "loopsoup-loops-v1"


def _fmt(x):
    return repr(float(x))


def write_campaign_csv(path, rows):
    """rows: iterables matching CAMPAIGN_COLUMNS."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CAMPAIGN_COLUMNS)
        for row in rows:
            c, k, lam, r, trials, val, err = row
            w.writerow([_fmt(c), int(k), _fmt(lam), _fmt(r), int(trials),
                        _fmt(val), _fmt(err)])


def read_campaign_csv(path):
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd)
        if header != CAMPAIGN_COLUMNS:
            raise ValueError(f"unexpected header {header}")
        rows = []
        for row in rd:
            rows.append((float(row[0]), int(row[1]), float(row[2]),
                         float(row[3]), int(row[4]), float(row[5]),
                         float(row[6])))
    return rows


def write_formulas_csv(path, table):
    """table: iterables matching FORMULA_COLUMNS."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(FORMULA_COLUMNS)
        for row in table:
            w.writerow([_fmt(v) for v in row])


def read_formulas_csv(path):
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd)
        if header != FORMULA_COLUMNS:
            raise ValueError(f"unexpected header {header}")
        return [tuple(float(v) for v in row) for row in rd]


def write_summary_json(path, run_config, **payload):
    """JSON summary embedding the exact run configuration.

    ``run_config``: dict of the fully resolved configuration; ``payload``:
    slope/stderr/oracle/z-score and anything else worth keeping.
    """
    doc = {"config": run_config}
    doc.update(payload)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True, default=float)
        f.write("\n")


def read_summary_json(path):
    with open(path) as f:
        return json.load(f)


# ---------------------------------------------------------------------------
# Loop collections (line-oriented JSON, versioned)
# ---------------------------------------------------------------------------


def write_loops(path, loops, config=None):
    """Header line (format tag + config echo), then one JSON record per
    loop: root, duration, vertex array."""
    with open(path, "w") as f:
        f.write(json.dumps({"format": _LOOPS_FORMAT,
                            "config": config or {},
                            "count": len(loops)},
                           sort_keys=True, default=float) + "\n")
        for lp in loops:
            rec = {"root": [float(lp.root[0]), float(lp.root[1])],
                   "duration": float(lp.duration),
                   "vertices": np.asarray(lp.trace).tolist(),
                   "exits_region": bool(lp.exits_region)}
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_loops(path):
    with open(path) as f:
        header = json.loads(f.readline())
        if header.get("format") != _LOOPS_FORMAT:
            raise ValueError(f"not a loop file: {header.get('format')}")
        loops = []
        for line in f:
            rec = json.loads(line)
            loops.append(LoopSample(root=tuple(rec["root"]),
                                    duration=rec["duration"],
                                    trace=np.asarray(rec["vertices"]),
                                    exits_region=rec["exits_region"]))
        if len(loops) != header["count"]:
            raise ValueError(f"expected {header['count']} loops, "
                             f"read {len(loops)}")
    return loops, header.get("config", {})


def write_cluster_csv(path, cluster_set):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["cluster", "size", "diameter", "x0", "y0", "x1", "y1"])
        for i, cl in enumerate(cluster_set.clusters):
            w.writerow([i, len(cl.members), _fmt(cl.diameter)]
                       + [_fmt(v) for v in cl.bbox])


# ---------------------------------------------------------------------------
# Bitmap scenes and grid domains
# ---------------------------------------------------------------------------


def write_scene(path, raster: OccupancyRaster):
    """Compact bitmap: magic, version, width, height, origin, cell, then
    the occupancy bits packed row-major (x-major, as stored)."""
    nx, ny = raster.bits.shape
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<III", _VERSION, nx, ny))
        f.write(struct.pack("<ddd", raster.origin[0], raster.origin[1],
                            raster.cell))
        f.write(np.packbits(raster.bits.reshape(-1)).tobytes())


def read_scene(path):
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError("not a scene bitmap")
        version, nx, ny = struct.unpack("<III", f.read(12))
        if version != _VERSION:
            raise ValueError(f"unsupported scene version {version}")
        x0, y0, cell = struct.unpack("<ddd", f.read(24))
        packed = np.frombuffer(f.read(), dtype=np.uint8)
    bits = np.unpackbits(packed, count=nx * ny).astype(bool).reshape(nx, ny)
    return OccupancyRaster((x0, y0), cell, bits)


def write_domain(path, dom: GridDomain):
    """GridDomain as a scene bitmap (occupied = not free) plus a JSON
    sidecar at path + '.arcs.json' listing flat cell indices of the arcs."""
    write_scene(path, OccupancyRaster((0.0, 0.0), dom.cell, ~dom.free))
    sidecar = {"arc1": np.flatnonzero(dom.arc1.reshape(-1)).tolist(),
               "arc2": np.flatnonzero(dom.arc2.reshape(-1)).tolist()}
    with open(str(path) + ".arcs.json", "w") as f:
        json.dump(sidecar, f, sort_keys=True)
        f.write("\n")


def read_domain(path):
    ras = read_scene(path)
    with open(str(path) + ".arcs.json") as f:
        sidecar = json.load(f)
    free = ~ras.bits
    a1 = np.zeros(free.size, dtype=bool)
    a2 = np.zeros(free.size, dtype=bool)
    a1[sidecar["arc1"]] = True
    a2[sidecar["arc2"]] = True
    return GridDomain(free, a1.reshape(free.shape), a2.reshape(free.shape),
                      ras.cell)
