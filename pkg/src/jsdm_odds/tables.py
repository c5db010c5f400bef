"""Algebra of 2x2 presence/absence probability tables.

A pair of species at a location induces four joint probabilities: both
absent, only the second present, only the first present, both present.
The odds ratio ``theta = p11*p00 / (p10*p01)`` measures departure from
independence: above 1 the species encourage joint occurrence (sympatry),
below 1 they discourage it (allopatry), and 1 is exact independence.

Tables need not sum to 1: the odds ratio is invariant to rescaling all
four cells, which matters because for rare species pairs all cells are
nearly zero. Log odds are computed in log space so that subnormal cells
still yield finite results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "PairTable",
    "odds_ratio",
    "log10_odds_ratio",
    "classify_dependence",
    "renormalize",
    "DEFAULT_CLASSIFY_TOL",
]

#: Default relative tolerance for :func:`classify_dependence`.
DEFAULT_CLASSIFY_TOL = 1e-6


@dataclass(frozen=True)
class PairTable:
    """Joint presence/absence probabilities for a species pair.

    First index is the row species, second the column species; 0 marks
    absence and 1 presence, so ``p01`` is "row species absent, column
    species present". Cells must be nonnegative with a positive, finite
    total but are not required to sum to 1 (see :func:`renormalize`).
    """

    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self):
        cells = (self.p00, self.p01, self.p10, self.p11)
        if any(not math.isfinite(c) for c in cells):
            raise DomainError(f"table cells must be finite, got {cells}")
        if any(c < 0 for c in cells):
            raise DomainError(f"table cells must be nonnegative, got {cells}")
        if self.total() <= 0:
            raise DomainError("table cells must have a positive total")

    def total(self) -> float:
        return self.p00 + self.p01 + self.p10 + self.p11

    @property
    def row_margin(self) -> float:
        """P(row species present): p10 + p11."""
        return self.p10 + self.p11

    @property
    def col_margin(self) -> float:
        """P(column species present): p01 + p11."""
        return self.p01 + self.p11

    def transpose(self) -> "PairTable":
        """Swap the two species (p01 <-> p10); theta is unchanged."""
        return PairTable(self.p00, self.p10, self.p01, self.p11)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p00, self.p01, self.p10, self.p11)


def odds_ratio(t: PairTable) -> float:
    """Odds ratio theta = p11*p00 / (p10*p01).

    Returns ``math.inf`` when an off-diagonal cell is zero while both
    diagonal cells are positive (the tagged "infinite association"
    extreme). A table where both a diagonal and an off-diagonal cell
    vanish has an indeterminate odds ratio and raises ``DomainError``.
    """
    if t.p10 > 0 and t.p01 > 0:
        if t.p11 == 0.0 or t.p00 == 0.0:
            return 0.0
        num = t.p11 * t.p00
        den = t.p10 * t.p01
        if num > 0 and den > 0:
            return num / den
        # A product underflowed; redo the arithmetic in log space.
        return math.exp(
            math.log(t.p11) + math.log(t.p00) - math.log(t.p10) - math.log(t.p01)
        )
    if t.p11 > 0 and t.p00 > 0:
        return math.inf
    raise DomainError(
        "odds ratio is indeterminate: a diagonal and an off-diagonal cell both vanish"
    )


def log10_odds_ratio(t: PairTable) -> float:
    """Base-10 log odds ratio, evaluated cellwise in log space.

    Survives tables whose cells are subnormal (the product p11*p00 would
    underflow to zero) as long as each cell is individually nonzero.
    Returns ``+/-inf`` for the tagged extreme tables of
    :func:`odds_ratio`.
    """
    cells = t.as_tuple()
    if all(c > 0 for c in cells):
        logs = [math.log(c) for c in cells]  # p00, p01, p10, p11
        return (logs[3] + logs[0] - logs[2] - logs[1]) / math.log(10.0)
    theta = odds_ratio(t)
    if theta == 0.0:
        return -math.inf
    if math.isinf(theta):
        return math.inf
    return math.log10(theta)


def classify_dependence(t: PairTable, tol: float = DEFAULT_CLASSIFY_TOL) -> str:
    """Label a table ``"sympatric"``, ``"allopatric"`` or ``"independent"``.

    Sympatry means the joint presence cell exceeds the product of the
    presence margins, i.e. co-occurrence is encouraged; allopatry means
    it is discouraged. ``tol`` is the relative dead-band around exact
    independence. The table is renormalized first so the comparison is
    scale-free.
    """
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")
    n = renormalize(t)
    expected = n.row_margin * n.col_margin
    if n.p11 > expected * (1.0 + tol):
        return "sympatric"
    if n.p11 < expected * (1.0 - tol):
        return "allopatric"
    return "independent"


def renormalize(t: PairTable) -> PairTable:
    """Rescale cells to sum to 1; the odds ratio is unchanged.

    Division is exact enough that theta is preserved to ~1e-12 relative
    even for subnormal inputs, because each cell is divided by the same
    total.
    """
    total = t.total()
    if total <= 0 or not math.isfinite(total):
        raise DomainError(f"cannot renormalize table with total {total}")
    return PairTable(t.p00 / total, t.p01 / total, t.p10 / total, t.p11 / total)
