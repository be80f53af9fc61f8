"""Uniform grids with ghost nodes and centered difference operators.

A grid row is a plain float array of length ``J + 3``; node ``j`` (for
``j = -1 .. J+1``) lives at array index ``j + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Grid:
    a: float
    b: float
    j_count: int

    @property
    def dx(self):
        return (self.b - self.a) / self.j_count

    @property
    def nodes(self):
        """Coordinates of nodes ``-1 .. J+1``."""
        j = np.arange(-1, self.j_count + 2)
        x = self.a + (j * (self.b - self.a)) / self.j_count
        x[1] = self.a
        x[-2] = self.b
        return x

    @property
    def interior(self):
        """Coordinates of the physical nodes ``0 .. J``."""
        return self.nodes[1:-1]

    def new_row(self):
        return np.zeros(self.j_count + 3)


def build_grid(a, b, j_count):
    a, b = float(a), float(b)
    if not b > a:
        raise DomainError(f"invalid domain [{a}, {b}]")
    if int(j_count) != j_count or j_count < 4:
        raise DomainError(f"j_count must be an integer >= 4, got {j_count!r}")
    return Grid(a, b, int(j_count))


def _check_j(g, j):
    if not 0 <= j <= g.j_count:
        raise IndexError(f"j={j} outside 0..{g.j_count}")


def grad_centered(row, g, j):
    _check_j(g, j)
    k = j + 1
    return (row[k + 1] - row[k - 1]) / (2.0 * g.dx)


def lap_centered(row, g, j):
    _check_j(g, j)
    k = j + 1
    return (row[k + 1] + row[k - 1] - 2.0 * row[k]) / (g.dx * g.dx)


def grad_all(row, g):
    """``grad_centered`` at every ``j = 0 .. J``."""
    return (row[2:] - row[:-2]) / (2.0 * g.dx)


def lap_all(row, g):
    return (row[2:] + row[:-2] - 2.0 * row[1:-1]) / (g.dx * g.dx)


def apply_ghosts(row, g, c, d):
    """Set the ghost values so the centered gradient is ``c`` at A and ``d`` at B.

    Returns a new row; the input is not modified.
    """
    out = np.array(row, dtype=float, copy=True)
    out[0] = out[2] - 2.0 * c * g.dx
    out[-1] = out[-3] + 2.0 * d * g.dx
    return out


def sample_row(fn, g, c, d):
    """Evaluate ``fn`` at every node and impose the Neumann ghosts."""
    return apply_ghosts(np.asarray(fn(g.nodes), dtype=float), g, c, d)
