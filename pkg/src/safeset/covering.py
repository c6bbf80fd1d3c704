"""Axis-aligned delta-coverings of a box and neighbourhood membership.

The neighbourhood of a centroid ``c`` is the closed box ``|c - s| <= delta``
(element-wise).  ``build_covering`` lays centroids on a regular grid with
spacing ``2 * delta`` starting at ``lower + delta``; the last cell of a
dimension is clamped onto the upper bound.  Integer dimensions use odd integer
spacing so every centroid is an integer.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import INTEGER, OssSpec

_TOL = 1e-9


def _tol(delta: np.ndarray) -> np.ndarray:
    return _TOL * np.maximum(1.0, np.abs(delta))


def validate_delta(space: OssSpec, delta) -> np.ndarray:
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if delta.shape != (space.ndim,):
        raise ValueError(f"delta has {delta.size} entries, space has {space.ndim} dimensions")
    if np.any(~np.isfinite(delta)) or np.any(delta <= 0):
        raise ValueError("delta must be strictly positive on every dimension")
    return delta


@dataclass(frozen=True)
class Grid:
    """Per-dimension centroid coordinates of a regular covering."""

    axes: tuple[np.ndarray, ...]
    steps: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def centroid(self, flat: int) -> np.ndarray:
        idx = np.unravel_index(flat, self.shape)
        return np.array([self.axes[d][i] for d, i in enumerate(idx)])

    def candidates(self, x: float, dim: int, delta: float, tol: float) -> list[int]:
        axis = self.axes[dim]
        n = len(axis)
        i0 = int(math.floor((x - axis[0]) / self.steps[dim] + 0.5))
        i0 = min(max(i0, 0), n - 1)
        return [i for i in range(max(i0 - 1, 0), min(i0 + 2, n)) if abs(axis[i] - x) <= delta + tol]


def _axis(lo: float, hi: float, d: float, integer: bool) -> tuple[np.ndarray, float]:
    if integer:
        r = math.floor(d + _TOL)
        step = 2 * r + 1
        n = max(1, math.ceil((hi - lo + 1) / step - _TOL))
        axis = np.minimum(lo + r + step * np.arange(n), hi)
        return axis.astype(float), float(step)
    n = max(1, math.ceil((hi - lo) / (2 * d) - _TOL))
    axis = np.minimum(lo + d + 2 * d * np.arange(n), hi)
    return axis, 2 * d


class CoveringSet:
    """Finite set of centroids whose delta-neighbourhoods form the covered region.

    Centroids that sit on the construction grid carry their flat grid index in
    ``cells``; centroids added elsewhere (e.g. grown around escaping states)
    carry ``-1`` and are looked up by scanning.
    """

    def __init__(self, space: OssSpec, delta, centroids, grid: Grid | None = None, cells=None):
        self.space = space
        self.delta = validate_delta(space, delta)
        self.centroids = np.asarray(centroids, dtype=float).reshape(-1, space.ndim)
        self.grid = grid
        if cells is None:
            cells = np.full(len(self.centroids), -1, dtype=np.int64)
        self.cells = np.asarray(cells, dtype=np.int64)
        if len(self.cells) != len(self.centroids):
            raise ValueError("cells and centroids differ in length")
        self._pos = {int(c): i for i, c in enumerate(self.cells) if c >= 0}
        self._off = np.flatnonzero(self.cells < 0)
        self._tol = _tol(self.delta)

    def __len__(self) -> int:
        return len(self.centroids)

    def __repr__(self) -> str:
        return f"CoveringSet({len(self)} centroids, delta={self.delta.tolist()})"

    def subset(self, positions) -> "CoveringSet":
        positions = np.asarray(positions, dtype=np.int64)
        return CoveringSet(self.space, self.delta, self.centroids[positions], self.grid, self.cells[positions])

    def with_cells(self, cells) -> "CoveringSet":
        """Covering made of the given grid cells (sorted, duplicates dropped)."""
        if self.grid is None:
            raise ValueError("covering has no grid")
        cells = np.unique(np.asarray(list(cells), dtype=np.int64))
        cents = np.array([self.grid.centroid(int(c)) for c in cells]).reshape(-1, self.space.ndim)
        return CoveringSet(self.space, self.delta, cents, self.grid, cells)

    def add(self, centroid) -> "CoveringSet":
        centroid = np.asarray(centroid, dtype=float).reshape(1, -1)
        return CoveringSet(self.space, self.delta, np.vstack([self.centroids, centroid]), self.grid,
                           np.append(self.cells, -1))

    def grid_cells(self, state) -> list[int]:
        """Flat indices of every grid cell whose neighbourhood holds ``state``."""
        if self.grid is None:
            return []
        per_dim = []
        for d in range(self.space.ndim):
            c = self.grid.candidates(float(state[d]), d, float(self.delta[d]), float(self._tol[d]))
            if not c:
                return []
            per_dim.append(c)
        return [int(np.ravel_multi_index(idx, self.grid.shape)) for idx in itertools.product(*per_dim)]

    def membership(self, state) -> int | None:
        """Lowest centroid position whose neighbourhood contains ``state``."""
        state = np.asarray(state, dtype=float)
        if state.shape != (self.space.ndim,):
            raise ValueError("dimension mismatch")
        best = None
        for cell in self.grid_cells(state):
            pos = self._pos.get(cell)
            if pos is not None and (best is None or pos < best):
                best = pos
        if len(self._off):
            diff = np.abs(self.centroids[self._off] - state)
            hit = np.flatnonzero(np.all(diff <= self.delta + self._tol, axis=1))
            if len(hit):
                pos = int(self._off[hit[0]])
                if best is None or pos < best:
                    best = pos
        return best

    def contains(self, state) -> bool:
        return self.membership(state) is not None

    def keys(self) -> set:
        """Hashable identities used for centroid-level set arithmetic."""
        return {centroid_key(c) for c in self.centroids}

    def compatible(self, other: "CoveringSet") -> bool:
        return (self.space.ndim == other.space.ndim
                and np.allclose(self.delta, other.delta)
                and np.allclose(self.space.lower, other.space.lower)
                and np.allclose(self.space.upper, other.space.upper))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([d.name for d in self.space.dims] + ["cell"])
            for c, cell in zip(self.centroids, self.cells):
                w.writerow([repr(float(x)) for x in c] + [int(cell)])

    @classmethod
    def from_csv(cls, path, space: OssSpec, delta) -> "CoveringSet":
        full = build_covering(space, delta)
        rows = []
        cells = []
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            has_cell = header[-1] == "cell"
            for row in r:
                if not row:
                    continue
                rows.append([float(x) for x in row[: space.ndim]])
                cells.append(int(row[-1]) if has_cell else -1)
        return cls(space, delta, np.array(rows).reshape(-1, space.ndim), full.grid, cells)


def centroid_key(c) -> tuple:
    return tuple(round(float(x), 9) + 0.0 for x in c)


def build_covering(space: OssSpec, delta) -> CoveringSet:
    delta = validate_delta(space, delta)
    axes = []
    steps = []
    for d, dim in enumerate(space.dims):
        axis, step = _axis(dim.lower, dim.upper, float(delta[d]), dim.kind == INTEGER)
        axes.append(axis)
        steps.append(step)
    grid = Grid(tuple(axes), np.array(steps))
    mesh = np.meshgrid(*axes, indexing="ij")
    centroids = np.stack([m.reshape(-1) for m in mesh], axis=1)
    return CoveringSet(space, delta, centroids, grid, np.arange(grid.size))


def neighborhood_contains(centroid, delta, state) -> bool:
    centroid = np.asarray(centroid, dtype=float)
    state = np.asarray(state, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if centroid.shape != state.shape or centroid.shape != delta.shape:
        raise ValueError("dimension mismatch")
    return bool(np.all(np.abs(centroid - state) <= delta + _tol(delta)))


def covering_membership(cover: CoveringSet, state) -> int | None:
    return cover.membership(state)
