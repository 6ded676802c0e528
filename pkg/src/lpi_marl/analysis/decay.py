"""Polynomial decay certificates for interaction matrices.

A nonnegative matrix ``A`` on a graph is ``(nu, mu)``-decay when every
distance-weighted row sum and column sum ``sum_j A_ij (dist(i, j) + 1)^mu``
is at most ``nu``. The certificate records the smallest such ``nu`` and the
row or column attaining it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lpi_marl.analysis.interaction import InteractionMatrix
from lpi_marl.exceptions import ModelError
from lpi_marl.logging import get_logger

logger = get_logger(__name__)

# Relative slack used when comparing certified constants.
_SLACK = 1e-12


@dataclass(frozen=True)
class DecayCertificate:
    """Certified decay constant.

    Attributes:
        mu: Decay exponent
        nu: Largest weighted row or column sum
        witness: ``("row" | "col", index, weighted sum)`` attaining ``nu``
    """

    mu: float
    nu: float
    witness: tuple[str, int, float]

    def tail_bound(self, radius: int) -> float:
        """``nu / (radius + 1)^mu``, the bound on any row's mass beyond ``radius``."""
        return self.nu / (radius + 1) ** self.mu

    def describe(self) -> str:
        side, index, value = self.witness
        return f"mu={self.mu!r} nu={self.nu!r} witness={side}:{index}:{value!r}"


def _entries_and_dist(
    A: InteractionMatrix | np.ndarray, dist: np.ndarray | None
) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(A, InteractionMatrix):
        return A.entries, A.dist if dist is None else dist
    if dist is None:
        raise ModelError("A bare matrix needs the graph distance matrix")
    return np.asarray(A, dtype=float), np.asarray(dist)


def weighted(A: InteractionMatrix | np.ndarray, mu: float, dist: np.ndarray | None = None) -> np.ndarray:
    """``A_ij (dist(i, j) + 1)^mu``."""
    entries, d = _entries_and_dist(A, dist)
    return entries * (d + 1.0) ** mu


def decay_check(
    A: InteractionMatrix | np.ndarray, mu: float, dist: np.ndarray | None = None
) -> DecayCertificate:
    """Certify the decay constant of ``A`` for exponent ``mu``.

    Args:
        A: Interaction matrix, or a bare array together with ``dist``
        mu: Decay exponent (>= 0)
        dist: Graph distances, required for bare arrays

    Returns:
        The certificate with ``nu = max(max row sum, max column sum)``
    """
    if mu < 0:
        raise ModelError(f"Decay exponent must be nonnegative, got {mu}")
    w = weighted(A, mu, dist)
    rows = w.sum(axis=1)
    cols = w.sum(axis=0)
    r, c = int(np.argmax(rows)), int(np.argmax(cols))
    if rows[r] >= cols[c]:
        witness = ("row", r, float(rows[r]))
    else:
        witness = ("col", c, float(cols[c]))
    return DecayCertificate(mu=float(mu), nu=witness[2], witness=witness)


def tail_sums(
    A: InteractionMatrix | np.ndarray, radius: int, dist: np.ndarray | None = None
) -> np.ndarray:
    """Per row, the mass ``sum_{j : dist(i, j) > radius} A_ij``."""
    entries, d = _entries_and_dist(A, dist)
    return np.where(d > radius, entries, 0.0).sum(axis=1)


def tail_bound_holds(
    A: InteractionMatrix | np.ndarray,
    certificate: DecayCertificate,
    dist: np.ndarray | None = None,
) -> bool:
    """Check ``tail_sums(A, k) <= nu / (k + 1)^mu`` for every radius up to the diameter."""
    _, d = _entries_and_dist(A, dist)
    for radius in range(int(d.max()) + 1):
        bound = certificate.tail_bound(radius)
        if np.any(tail_sums(A, radius, d) > bound * (1 + _SLACK) + _SLACK):
            return False
    return True


@dataclass
class DecayAlgebraReport:
    """Certified constants of a combination against their algebraic bounds.

    Attributes:
        sum_nu: Certified constant of ``c A + c' A'``
        sum_bound: ``c nu + c' nu'``
        product_nu: Certified constant of ``A A'``
        product_bound: ``nu nu'``
    """

    sum_nu: float
    sum_bound: float
    product_nu: float
    product_bound: float

    @property
    def holds(self) -> bool:
        return self.sum_nu <= self.sum_bound * (1 + _SLACK) + _SLACK and (
            self.product_nu <= self.product_bound * (1 + _SLACK) + _SLACK
        )


def decay_algebra_checks(
    A: np.ndarray,
    A2: np.ndarray,
    c: float,
    c2: float,
    mu: float,
    dist: np.ndarray,
) -> DecayAlgebraReport:
    """Compare the decay constants of ``c A + c2 A2`` and ``A A2`` with their bounds.

    Args:
        A: First nonnegative matrix
        A2: Second nonnegative matrix
        c: Nonnegative weight of ``A``
        c2: Nonnegative weight of ``A2``
        mu: Decay exponent
        dist: Graph distances
    """
    nu = decay_check(A, mu, dist).nu
    nu2 = decay_check(A2, mu, dist).nu
    return DecayAlgebraReport(
        sum_nu=decay_check(c * A + c2 * A2, mu, dist).nu,
        sum_bound=c * nu + c2 * nu2,
        product_nu=decay_check(A @ A2, mu, dist).nu,
        product_bound=nu * nu2,
    )


def write_matrix_csv(
    A: InteractionMatrix, certificate: DecayCertificate | None, path: str | Path
) -> None:
    """Write a matrix as CSV under comment lines naming its kind and certificate."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        handle.write(f"# kind={A.kind.value}\n")
        if certificate is not None:
            handle.write(f"# {certificate.describe()}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["row"] + [str(j) for j in range(A.n)])
        for i in range(A.n):
            writer.writerow([str(i)] + [repr(float(v)) for v in A.entries[i]])
    logger.info(f"Wrote {A.kind.value} matrix to {path}")
