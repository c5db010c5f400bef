"""File formats: presence/absence CSVs, float formatting, manifests.

Floats are serialized with ``repr`` (shortest round-trip), so identical
inputs produce byte-identical files and reloading is exact. Infinite
summary values are written as the tagged strings ``INF``/``-INF``
rather than anything a CSV reader would silently coerce.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os

import numpy as np

from .errors import IngestError

__all__ = [
    "fmt",
    "parse_float",
    "read_presence_csvs",
    "write_presence_csvs",
    "standardize_columns",
    "write_json",
    "sha256_of_dict",
]


def fmt(x) -> str:
    """Shortest round-trip decimal form; tagged extremes for +-inf."""
    x = float(x)
    if math.isinf(x):
        return "INF" if x > 0 else "-INF"
    if math.isnan(x):
        return "NA"
    return repr(x)


def parse_float(s: str) -> float:
    if s == "INF":
        return math.inf
    if s == "-INF":
        return -math.inf
    if s in ("NA", ""):
        return math.nan
    return float(s)


def write_json(doc: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256_of_dict(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()[:16]


def standardize_columns(M: np.ndarray) -> np.ndarray:
    """Center each column to mean 0 and scale to standard deviation 1."""
    M = np.asarray(M, dtype=float)
    mu = M.mean(axis=0)
    sd = M.std(axis=0)
    if np.any(sd == 0):
        bad = int(np.nonzero(sd == 0)[0][0])
        raise IngestError(f"covariate column {bad + 1} is constant; cannot standardize")
    return (M - mu) / sd


def read_presence_csvs(sites_path: str, species_path: str):
    """Parse the two-file site/species schema.

    Sites file: header ``site_id,x,y[,cov...]``, one row per site.
    Species file: header ``site_id,<name>...``, entries strictly 0/1.
    Rows are matched by site_id (order need not agree). Returns
    ``(site_ids, coords, covariates, covariate_names, Y, species_names)``
    with raw (unstandardized) covariates.
    """
    with open(sites_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 3 or rows[0][0] != "site_id":
        raise IngestError(f"{sites_path}: expected header starting 'site_id,x,y'")
    cov_names = rows[0][3:]
    site_ids, coords, covs = [], [], []
    for rno, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise IngestError(f"{sites_path}:{rno}: expected {len(rows[0])} fields, got {len(row)}")
        site_ids.append(row[0])
        try:
            coords.append((float(row[1]), float(row[2])))
            covs.append([float(v) for v in row[3:]])
        except ValueError as exc:
            raise IngestError(f"{sites_path}:{rno}: non-numeric value ({exc})") from None
    if len(set(site_ids)) != len(site_ids):
        dup = next(s for s in site_ids if site_ids.count(s) > 1)
        raise IngestError(f"{sites_path}: duplicated site_id {dup!r}")

    with open(species_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "site_id" or len(rows[0]) < 2:
        raise IngestError(f"{species_path}: expected header 'site_id,<species>...'")
    species_names = rows[0][1:]
    y_by_site = {}
    for rno, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise IngestError(f"{species_path}:{rno}: expected {len(rows[0])} fields, got {len(row)}")
        vals = []
        for cno, v in enumerate(row[1:], start=2):
            if v not in ("0", "1"):
                raise IngestError(
                    f"{species_path}:{rno}: column {cno} ({species_names[cno - 2]}) "
                    f"has non-binary entry {v!r}"
                )
            vals.append(float(v))
        y_by_site[row[0]] = vals

    missing = [s for s in site_ids if s not in y_by_site]
    if missing:
        raise IngestError(f"{species_path}: missing rows for site_ids {missing[:5]}")
    extra = [s for s in y_by_site if s not in set(site_ids)]
    if extra:
        raise IngestError(f"{species_path}: unknown site_ids {extra[:5]}")

    Y = np.array([y_by_site[s] for s in site_ids])
    return (
        tuple(site_ids),
        np.array(coords),
        np.array(covs).reshape(len(site_ids), len(cov_names)),
        tuple(cov_names),
        Y,
        tuple(species_names),
    )


def write_presence_csvs(
    site_ids, coords, covariates, cov_names, Y, species_names,
    sites_path: str, species_path: str,
) -> None:
    coords = np.asarray(coords, dtype=float)
    covariates = np.asarray(covariates, dtype=float)
    Y = np.asarray(Y)
    with open(sites_path, "w", newline="") as fh:
        fh.write(",".join(["site_id", "x", "y", *cov_names]) + "\n")
        for i, sid in enumerate(site_ids):
            fields = [sid, fmt(coords[i, 0]), fmt(coords[i, 1])]
            fields += [fmt(v) for v in covariates[i]]
            fh.write(",".join(fields) + "\n")
    with open(species_path, "w", newline="") as fh:
        fh.write(",".join(["site_id", *species_names]) + "\n")
        for i, sid in enumerate(site_ids):
            fh.write(",".join([sid, *(str(int(v)) for v in Y[i])]) + "\n")


def acquire_lock(out_dir: str):
    """Advisory lockfile guarding an output directory against concurrent runs."""
    from filelock import FileLock

    return FileLock(os.path.join(out_dir, ".jsdm-odds.lock"))
