"""Odds ratios for ordered K-category abundance tables.

For a species pair classified into K ordered categories (absent, rare,
common, ...), the 2x2 odds ratio generalizes three ways, each a
positive number that equals 1 everywhere exactly when the table is an
outer product of its margins:

* local: association between adjacent categories of both species;
* global: the 2x2 odds ratio of the table collapsed at a cut (k, k');
* cumulative: the ratio of the conditional cumulative odds
  odds(Y' <= k' | Y = k) / odds(Y' <= k' | Y = k+1).

At K = 2 all three coincide with the binary odds ratio. Tables may be
supplied directly or derived from a latent bivariate normal with
per-species cutpoints, in which case every cell is a rectangle
probability. This module only evaluates dependence summaries; it does
not fit ordinal models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StructuralError
from .prob_core import BvnParams, bvn_cdf, cell_probs
from .io import fmt, parse_float

__all__ = [
    "OrdinalTable",
    "local_odds",
    "global_odds",
    "cumulative_odds",
    "ordinal_table_from_gaussian",
    "independence_table",
    "write_ordinal_csv",
    "read_ordinal_csv",
]


@dataclass(frozen=True)
class OrdinalTable:
    """K x K joint category probabilities; rows index the first species.

    Categories are ordered 1..K. Cells must be nonnegative and sum to 1
    within 1e-10.
    """

    cells: np.ndarray

    def __post_init__(self):
        c = np.array(self.cells, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 2:
            raise StructuralError(f"cells must be square K x K with K >= 2, got {c.shape}")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise DomainError("cells must be finite and nonnegative")
        if abs(float(c.sum()) - 1.0) > 1e-10:
            raise DomainError(f"cells must sum to 1 within 1e-10, got {c.sum()!r}")
        c.setflags(write=False)
        object.__setattr__(self, "cells", c)

    @property
    def K(self) -> int:
        return self.cells.shape[0]


def _check_split(t: OrdinalTable, k: int, kp: int) -> None:
    if not (1 <= k <= t.K - 1 and 1 <= kp <= t.K - 1):
        raise StructuralError(f"split ({k}, {kp}) must lie in 1..{t.K - 1}")


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    if num > 0:
        return math.inf
    raise DomainError("odds ratio indeterminate: numerator and denominator both zero")


def local_odds(t: OrdinalTable, k: int, kp: int) -> float:
    """Adjacent-category odds ratio at (k, k'), 1-based."""
    _check_split(t, k, kp)
    c = t.cells
    return _ratio(c[k - 1, kp - 1] * c[k, kp], c[k - 1, kp] * c[k, kp - 1])


def global_odds(t: OrdinalTable, k: int, kp: int) -> float:
    """Odds ratio of the table collapsed to 2x2 at cut (k, k')."""
    _check_split(t, k, kp)
    c = t.cells
    a = float(c[:k, :kp].sum())
    b = float(c[:k, kp:].sum())
    cc = float(c[k:, :kp].sum())
    d = float(c[k:, kp:].sum())
    return _ratio(a * d, b * cc)


def cumulative_odds(t: OrdinalTable, k: int, kp: int) -> float:
    """Ratio of conditional cumulative odds between adjacent rows.

    odds(Y' <= k' | Y = k) divided by odds(Y' <= k' | Y = k+1).
    """
    _check_split(t, k, kp)
    c = t.cells
    row_hi, row_lo = c[k - 1], c[k]
    if row_hi.sum() <= 0 or row_lo.sum() <= 0:
        raise DomainError(f"conditioning rows {k}, {k + 1} must have positive mass")
    a1 = float(row_hi[:kp].sum())
    b1 = float(row_hi[kp:].sum())
    a2 = float(row_lo[:kp].sum())
    b2 = float(row_lo[kp:].sum())
    return _ratio(a1 * b2, b1 * a2)


def independence_table(marg1, marg2) -> OrdinalTable:
    """Outer-product table of two category distributions."""
    m1 = np.asarray(marg1, dtype=float)
    m2 = np.asarray(marg2, dtype=float)
    return OrdinalTable(np.outer(m1 / m1.sum(), m2 / m2.sum()))


def _check_cutpoints(cuts: np.ndarray, who: str) -> None:
    if cuts.ndim != 1 or cuts.size < 1:
        raise StructuralError(f"{who}: need at least one cutpoint")
    if not np.all(np.isfinite(cuts)):
        raise DomainError(f"{who}: cutpoints must be finite")
    if np.any(np.diff(cuts) <= 0):
        raise DomainError(f"{who}: cutpoints must be strictly increasing")


def ordinal_table_from_gaussian(
    mu1: float, mu2: float, rho: float, cutpoints_1, cutpoints_2
) -> OrdinalTable:
    """K x K table induced by a latent bivariate normal and cutpoints.

    Category k for a species means its latent variable falls in
    [c_{k-1}, c_k) with c_0 = -inf, c_K = +inf; each cell is the
    rectangle probability between consecutive cutpoints. Both species
    must use K - 1 cutpoints. At K = 2 with cutpoint 0 this reduces to
    the binary presence/absence cells exactly.
    """
    c1 = np.asarray(cutpoints_1, dtype=float)
    c2 = np.asarray(cutpoints_2, dtype=float)
    _check_cutpoints(c1, "cutpoints_1")
    _check_cutpoints(c2, "cutpoints_2")
    if c1.size != c2.size:
        raise StructuralError("both species need the same category count")
    bp = BvnParams(mu1, mu2, rho)  # validates means and correlation

    if c1.size == 1 and c1[0] == 0.0 and c2[0] == 0.0:
        t = cell_probs(bp)
        return OrdinalTable(np.array([[t.p00, t.p01], [t.p10, t.p11]]))

    e1 = np.concatenate(([-np.inf], c1 - mu1, [np.inf]))
    e2 = np.concatenate(([-np.inf], c2 - mu2, [np.inf]))
    F = bvn_cdf(e1[:, None], e2[None, :], rho)
    cells = F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]
    return OrdinalTable(np.clip(cells, 0.0, 1.0))


def write_ordinal_csv(t: OrdinalTable, path: str) -> None:
    """Row-major CSV with a leading ``K,<K>`` header line."""
    with open(path, "w") as fh:
        fh.write(f"K,{t.K}\n")
        for row in t.cells:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_ordinal_csv(path: str) -> OrdinalTable:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("K,"):
        raise StructuralError(f"{path}: expected leading 'K,<K>' header")
    K = int(lines[0].split(",")[1])
    if len(lines) != K + 1:
        raise StructuralError(f"{path}: expected {K} rows after header, got {len(lines) - 1}")
    cells = np.array([[parse_float(v) for v in ln.split(",")] for ln in lines[1:]])
    if cells.shape != (K, K):
        raise StructuralError(f"{path}: expected {K} columns per row")
    return OrdinalTable(cells)
