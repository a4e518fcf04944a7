"""Minimum-cube pruning of corridors.

Each cube is shrunk inward by gamma_r / 2 on every side; the corridor is
cut after the first cube whose shrunk rectangle contains the target.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corridor_model import Corridor, Cube

__all__ = ["PruningError", "ShrunkRect", "shrunk_rect", "first_containing_index", "prune_corridor"]

# side lengths within this of gamma_r count as exactly gamma_r
_SIDE_TOL = 1e-9


class PruningError(ValueError):
    pass


@dataclass(frozen=True)
class ShrunkRect:
    """Inward-shrunk rectangle of a cube; vertices clockwise from the top left."""

    A: tuple[float, float]
    B: tuple[float, float]
    C: tuple[float, float]
    D: tuple[float, float]

    @property
    def x_lo(self) -> float:
        return self.A[0]

    @property
    def x_hi(self) -> float:
        return self.B[0]

    @property
    def y_lo(self) -> float:
        return self.D[1]

    @property
    def y_hi(self) -> float:
        return self.A[1]

    def contains(self, point: tuple[float, float], tol: float = 0.0) -> bool:
        """Closed-interval membership (the boundary counts as inside)."""
        x, y = point
        return self.x_lo - tol <= x <= self.x_hi + tol and self.y_lo - tol <= y <= self.y_hi + tol


def shrunk_rect(c: Cube, gamma_r: float) -> ShrunkRect:
    h = 0.5 * gamma_r
    for side, name in ((c.x_u - c.x_l, "x"), (c.y_u - c.y_l, "y")):
        if side < gamma_r - _SIDE_TOL * max(1.0, gamma_r):
            raise PruningError(f"cube {name}-side {side:.6g} is shorter than gamma_r = {gamma_r:.6g}")
    x_lo, x_hi = c.x_l + h, c.x_u - h
    y_lo, y_hi = c.y_l + h, c.y_u - h
    # a side of exactly gamma_r collapses to the centre line
    if x_lo > x_hi:
        x_lo = x_hi = 0.5 * (c.x_l + c.x_u)
    if y_lo > y_hi:
        y_lo = y_hi = 0.5 * (c.y_l + c.y_u)
    return ShrunkRect(A=(x_lo, y_hi), B=(x_hi, y_hi), C=(x_hi, y_lo), D=(x_lo, y_lo))


def first_containing_index(c: Corridor, target: tuple[float, float], gamma_r: float) -> int | None:
    """Zero-based index of the first cube whose shrunk rectangle holds ``target``."""
    for k, cube in enumerate(c.cubes):
        if shrunk_rect(cube, gamma_r).contains(target):
            return k
    return None


def prune_corridor(c: Corridor, target: tuple[float, float], gamma_r: float) -> Corridor:
    """Cubes up to and including the first one containing ``target``; cubes are unchanged."""
    k = first_containing_index(c, target, gamma_r)
    if k is None:
        raise PruningError(
            f"vehicle {c.vehicle_id}: no cube's shrunk rectangle contains the target {tuple(target)}"
        )
    return Corridor(c.vehicle_id, tuple(c.cubes[: k + 1]))
