"""Structured triangulations of axis-aligned rectangles."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "BoundaryTag",
    "TriMesh",
    "rectangle_mesh",
    "unit_square_mesh",
    "boundary_vertices",
    "write_mesh",
]


class BoundaryTag(enum.IntEnum):
    GAMMA0 = 0  # no-slip (Dirichlet) part
    GAMMA1 = 1  # slip part


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Structured triangle mesh of ``[x0, x1] x [y0, y1]``.

    Vertex ``(i, j)`` has index ``j * (nx + 1) + i``. Cell ``(i, j)`` is split
    by its lower-left to upper-right diagonal into triangles ``2 * (j * nx + i)``
    (below the diagonal) and ``2 * (j * nx + i) + 1`` (above it). All
    triangles are counterclockwise.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    nx: int
    ny: int
    bounds: tuple = (0.0, 1.0, 0.0, 1.0)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def h(self) -> float:
        x0, x1, y0, y1 = self.bounds
        return max((x1 - x0) / self.nx, (y1 - y0) / self.ny)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edges(self) -> np.ndarray:
        """All distinct edges as sorted vertex pairs."""
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)


def rectangle_mesh(nx: int, ny: int, bounds=(0.0, 1.0, 0.0, 1.0)) -> TriMesh:
    """Triangulate a rectangle with ``nx * ny`` cells, two triangles each.

    The top side ``y = y1`` is tagged as the slip boundary, the other three
    sides as the no-slip boundary.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"grid dimensions must be positive integers, got {nx!r} x {ny!r}")
    nx, ny = int(nx), int(ny)
    x0, x1, y0, y1 = map(float, bounds)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate rectangle bounds")

    # i/n first, then scale, so the unit square gets exact lattice values
    xs = x0 + (x1 - x0) * (np.arange(nx + 1) / nx)
    ys = y0 + (y1 - y0) * (np.arange(ny + 1) / ny)
    xs[-1], ys[-1] = x1, y1
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    tri = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tri[0::2] = np.column_stack([v00, v10, v11])
    tri[1::2] = np.column_stack([v00, v11, v01])

    def vid(ii, jj):
        return jj * (nx + 1) + ii

    ar_x = np.arange(nx)
    ar_y = np.arange(ny)
    bottom = np.column_stack([vid(ar_x, 0), vid(ar_x + 1, 0)])
    right = np.column_stack([vid(nx, ar_y), vid(nx, ar_y + 1)])
    top = np.column_stack([vid(ar_x + 1, ny), vid(ar_x, ny)])
    left = np.column_stack([vid(0, ar_y + 1), vid(0, ar_y)])
    edges = np.vstack([bottom, right, top, left]).astype(np.int64)
    tags = np.full(len(edges), int(BoundaryTag.GAMMA0), dtype=np.int8)
    tags[nx + ny : 2 * nx + ny] = int(BoundaryTag.GAMMA1)

    for a in (vertices, tri, edges, tags):
        a.setflags(write=False)
    return TriMesh(vertices, tri, edges, tags, nx, ny, (x0, x1, y0, y1))


def unit_square_mesh(n: int) -> TriMesh:
    """``n x n`` structured mesh of the unit square, ``h = 1/n``."""
    return rectangle_mesh(n, n)


def boundary_vertices(mesh: TriMesh, tag: BoundaryTag) -> set[int]:
    """Vertices incident to at least one boundary edge carrying `tag`.

    Corner vertices of the slip side belong to both tag sets.
    """
    sel = mesh.boundary_edges[mesh.edge_tags == int(tag)]
    return set(int(v) for v in np.unique(sel))


def write_mesh(mesh: TriMesh, path) -> None:
    """Write a plain-text node/element file.

    Header ``nv nt nbe``, then one ``x y`` line per vertex, one ``i j k``
    line per triangle and one ``i j tag`` line per boundary edge
    (tag 0 = no-slip, 1 = slip).
    """
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    lines += [f"{a} {b} {t}" for (a, b), t in zip(mesh.boundary_edges, mesh.edge_tags)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh_counts(path) -> tuple[int, int, int]:
    """Header counts of a file written by `write_mesh`."""
    with open(path) as fh:
        nv, nt, nbe = (int(s) for s in fh.readline().split())
    return nv, nt, nbe
