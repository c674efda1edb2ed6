"""Checkpoint grid: ground-truth coordinates and the adjacency graph.

Grid files are CSV::

    id,x_m,y_m
    0,0.0,0.0
    1,2.5,0.0
    #edges
    0,1
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

import numpy as np

from .exceptions import DanglingEdge, DataError, DuplicateId, EmptyGrid, NegativeCoordinate


def _median_nn_spacing(coords: np.ndarray) -> float:
    if len(coords) < 2:
        return 0.0
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    return float(np.median(dist.min(axis=1)))


@dataclass(frozen=True)
class CheckpointGrid:
    """Immutable set of checkpoints with an undirected adjacency graph."""

    points: MappingProxyType
    edges: frozenset
    nominal_spacing_m: float = field(default=0.0)

    @classmethod
    def from_points(cls, points, edges=(), nominal_spacing_m=None):
        pts = {}
        for cid, (x, y) in dict(points).items():
            cid = int(cid)
            x, y = float(x), float(y)
            if x < 0 or y < 0:
                raise NegativeCoordinate(f"checkpoint {cid} at ({x}, {y})")
            pts[cid] = (x, y)
        norm_edges = set()
        for a, b in edges:
            a, b = int(a), int(b)
            for end in (a, b):
                if end not in pts:
                    raise DanglingEdge(f"edge ({a}, {b}) references unknown checkpoint {end}")
            norm_edges.add((min(a, b), max(a, b)))
        if nominal_spacing_m is None:
            ids = sorted(pts)
            nominal_spacing_m = _median_nn_spacing(np.array([pts[i] for i in ids]).reshape(-1, 2))
        return cls(MappingProxyType(dict(sorted(pts.items()))), frozenset(norm_edges), float(nominal_spacing_m))

    def __len__(self):
        return len(self.points)

    @property
    def ids(self) -> list[int]:
        return list(self.points)

    def coords(self, ids=None) -> np.ndarray:
        ids = self.ids if ids is None else ids
        return np.array([self.points[int(i)] for i in ids], dtype=float).reshape(-1, 2)

    def is_adjacent(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def neighbors(self, cid: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == cid:
                out.append(b)
            elif b == cid:
                out.append(a)
        return sorted(out)

    def adjacency_list(self) -> dict[int, list[int]]:
        adj = {cid: [] for cid in self.points}
        for a, b in sorted(self.edges):
            adj[a].append(b)
            adj[b].append(a)
        return {cid: sorted(v) for cid, v in adj.items()}

    def is_connected(self) -> bool:
        if not self.points:
            return False
        adj = self.adjacency_list()
        start = next(iter(self.points))
        seen = {start}
        queue = deque([start])
        while queue:
            for nb in adj[queue.popleft()]:
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        return len(seen) == len(self.points)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "x_m", "y_m"])
        for cid, (x, y) in self.points.items():
            w.writerow([cid, repr(x), repr(y)])
        buf.write("#edges\n")
        for a, b in sorted(self.edges):
            w.writerow([a, b])
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def parse_grid(text: str) -> CheckpointGrid:
    points: dict[int, tuple[float, float]] = {}
    edges = []
    section = "points"
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.lower().startswith("#edges"):
            section = "edges"
            continue
        if line.startswith("#"):
            continue
        row = [c.strip() for c in line.split(",")]
        if section == "points":
            if row[0] == "id":
                continue
            if len(row) != 3:
                raise DataError(f"grid line {line_no}: expected id,x_m,y_m")
            cid = int(row[0])
            if cid in points:
                raise DuplicateId(f"checkpoint id {cid} repeated at line {line_no}")
            points[cid] = (float(row[1]), float(row[2]))
        else:
            if row[0] == "id_a":
                continue
            if len(row) != 2:
                raise DataError(f"grid line {line_no}: expected id_a,id_b")
            edges.append((int(row[0]), int(row[1])))
    return CheckpointGrid.from_points(points, edges)


def load_grid(path) -> CheckpointGrid:
    return parse_grid(Path(path).read_text(encoding="utf-8"))


def linear_order(grid: CheckpointGrid) -> list[int]:
    """Checkpoint ids sorted by (y, x), ties broken by id."""
    return sorted(grid.points, key=lambda cid: (grid.points[cid][1], grid.points[cid][0], cid))


def thin_grid(grid: CheckpointGrid, parity: str) -> CheckpointGrid:
    """Keep every second checkpoint of the (y, x) ordering.

    ``parity="even"`` keeps positions 0, 2, 4, ...; ``"odd"`` the rest, so the
    two results partition the grid. Edges are restricted to the kept points.
    """
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    offset = 0 if parity == "even" else 1
    keep = set(linear_order(grid)[offset::2])
    pts = {cid: xy for cid, xy in grid.points.items() if cid in keep}
    edges = [(a, b) for a, b in grid.edges if a in keep and b in keep]
    return CheckpointGrid.from_points(pts, edges)


def nearest_checkpoint(grid: CheckpointGrid, xy) -> int:
    if not grid.points:
        raise EmptyGrid("cannot query an empty grid")
    ids = grid.ids  # ascending, so argmin's first hit is the smallest id
    coords = grid.coords(ids)
    d2 = ((coords - np.asarray(xy, dtype=float)) ** 2).sum(axis=1)
    return ids[int(np.argmin(d2))]
