"""Board pose, grid partition and point-to-cell classification.

Board coordinates ``(u, v)`` are millimetres with the origin at the board's top-left
corner, ``u`` running right along the width and ``v`` running down along the height.
The board frame's z axis is the plane normal.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Optional, Sequence

import numpy as np

from .geometry import GeometryError, Plane, RigidTransform, apply, invert

ON_PLANE_TOLERANCE_MM = 1.0


class NotOnPlane(GeometryError):
    pass


class InvalidGrid(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoardModel:
    pose: RigidTransform  # board frame -> world frame
    width_mm: float = 1910.0
    height_mm: float = 1290.0
    bottom_edge_above_ground_mm: float = 1000.0

    def __post_init__(self):
        if not (self.width_mm > 0 and self.height_mm > 0):
            raise ValueError("board dimensions must be positive")
        object.__setattr__(self, "_to_board", invert(self.pose))

    @classmethod
    def from_layout(cls, width_mm: float = 1910.0, height_mm: float = 1290.0,
                    bottom_edge_above_ground_mm: float = 1000.0) -> BoardModel:
        """Board standing in the world plane ``y = 0``, centred on ``x = 0``.

        World axes: x to the viewer's right, y from the viewer towards the board, z up.
        """
        R = np.array([[1.0, 0.0, 0.0],
                      [0.0, 0.0, 1.0],
                      [0.0, -1.0, 0.0]])
        top_left = (-width_mm / 2.0, 0.0, bottom_edge_above_ground_mm + height_mm)
        pose = RigidTransform(R, top_left, "board", "world")
        return cls(pose, width_mm, height_mm, bottom_edge_above_ground_mm)

    @property
    def plane(self) -> Plane:
        return Plane(self.pose.translation, self.pose.rotation[:, 2])

    @property
    def to_board(self) -> RigidTransform:
        return self._to_board

    def to_world(self, u: float, v: float) -> np.ndarray:
        return apply(self.pose, (u, v, 0.0))


def to_board_coords(p, board: BoardModel) -> tuple[float, float]:
    """World point on the board plane -> ``(u, v)`` in mm."""
    q = apply(board.to_board, p)
    if abs(q[2]) > ON_PLANE_TOLERANCE_MM:
        raise NotOnPlane(f"point is {q[2]:.3f} mm off the board plane")
    return float(q[0]), float(q[1])


@dataclass(frozen=True)
class CellResult:
    cell_id: Optional[int]
    u: float
    v: float

    @property
    def out_of_board(self) -> bool:
        return self.cell_id is None


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    width_mm: float
    height_mm: float
    u_edges: tuple[float, ...]
    v_edges: tuple[float, ...]
    numbering: tuple[int, ...]  # row-major position -> cell id

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    @property
    def cell_ids(self) -> list[int]:
        return list(range(1, self.n_cells + 1))

    @property
    def cell_bounds(self) -> dict[int, tuple[float, float, float, float]]:
        """``{cell_id: (u_min, u_max, v_min, v_max)}``."""
        out = {}
        for r in range(self.rows):
            for c in range(self.cols):
                cid = self.numbering[r * self.cols + c]
                out[cid] = (self.u_edges[c], self.u_edges[c + 1], self.v_edges[r], self.v_edges[r + 1])
        return out

    def cell_center(self, cell_id: int) -> tuple[float, float]:
        u0, u1, v0, v1 = self.cell_bounds[cell_id]
        return (u0 + u1) / 2.0, (v0 + v1) / 2.0

    def position(self, cell_id: int) -> tuple[int, int]:
        """0-based ``(row, col)`` of a cell."""
        i = self.numbering.index(cell_id)
        return divmod(i, self.cols)

    @property
    def label(self) -> str:
        return f"{self.rows}x{self.cols}"


def _edges(length: float, n: int) -> tuple[float, ...]:
    e = [length * i / n for i in range(n)]
    e.append(float(length))
    return tuple(e)


def build_grid(board: BoardModel, rows: int, cols: int,
               numbering: Optional[Sequence[int]] = None) -> GridSpec:
    """Uniform ``rows x cols`` partition of the board.

    Ids run row-major from 1 at the top-left unless ``numbering`` gives an explicit
    row-major list of ids.
    """
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise InvalidGrid(f"invalid grid {rows}x{cols}")
    rows, cols = int(rows), int(cols)
    n = rows * cols
    if numbering is None:
        numbering = range(1, n + 1)
    numbering = tuple(int(i) for i in numbering)
    if sorted(numbering) != list(range(1, n + 1)):
        raise InvalidGrid(f"numbering must be a permutation of 1..{n}")
    return GridSpec(rows, cols, float(board.width_mm), float(board.height_mm),
                    _edges(board.width_mm, cols), _edges(board.height_mm, rows), numbering)


def parse_grid(text: str) -> tuple[int, int]:
    """``"2x3"`` -> ``(2, 3)``."""
    try:
        r, c = text.lower().split("x")
        rows, cols = int(r), int(c)
    except ValueError:
        raise InvalidGrid(f"grid must look like RxC, got {text!r}") from None
    if rows < 1 or cols < 1:
        raise InvalidGrid(f"invalid grid {text!r}")
    return rows, cols


def _index(x: float, edges: tuple[float, ...]) -> int:
    n = len(edges) - 1
    i = min(max(int(math.floor(x * n / edges[-1])), 0), n - 1)
    # float division can land one cell off right at an edge
    while i > 0 and x < edges[i]:
        i -= 1
    while i < n - 1 and x >= edges[i + 1]:
        i += 1
    return i


def classify(p, grid: GridSpec) -> CellResult:
    """Cell containing ``p = (u, v)``.

    Cells are half-open ``[u_min, u_max) x [v_min, v_max)``; the right and bottom
    outer edges belong to the last column/row.
    """
    u, v = float(p[0]), float(p[1])
    if not (0.0 <= u <= grid.width_mm and 0.0 <= v <= grid.height_mm):
        return CellResult(None, u, v)
    r = _index(v, grid.v_edges)
    c = _index(u, grid.u_edges)
    return CellResult(grid.numbering[r * grid.cols + c], u, v)


def _index_array(x: np.ndarray, edges: tuple[float, ...]) -> np.ndarray:
    e = np.asarray(edges)
    n = len(e) - 1
    i = np.clip(np.floor(x * n / e[-1]).astype(np.int64), 0, n - 1)
    i = np.where((i > 0) & (x < e[i]), i - 1, i)
    i = np.where((i < n - 1) & (x >= e[np.minimum(i + 1, n)]), i + 1, i)
    return i


def classify_many(u, v, grid: GridSpec) -> np.ndarray:
    """Vectorised :func:`classify`; returns cell ids with 0 for out-of-board."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    inside = (u >= 0) & (u <= grid.width_mm) & (v >= 0) & (v <= grid.height_mm)
    uc = np.where(inside, u, 0.0)
    vc = np.where(inside, v, 0.0)
    pos = _index_array(vc, grid.v_edges) * grid.cols + _index_array(uc, grid.u_edges)
    ids = np.asarray(grid.numbering)[pos]
    return np.where(inside, ids, 0)
