"""Ground spaces, metrics, and transport cost matrices.

A ground space is a finite set of points with a metric; a cost matrix holds
pairwise distances raised to a power p between the input points and a chosen
subset of output points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Ring:
    """k points on a cycle with hop distance min(|i-j|, k-|i-j|)."""

    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"ring needs at least 2 points, got k={self.k}")

    @property
    def size(self) -> int:
        return self.k

    def distance_matrix(self) -> np.ndarray:
        idx = np.arange(self.k)
        diff = np.abs(idx[:, None] - idx[None, :])
        return np.minimum(diff, self.k - diff).astype(float)


@dataclass(frozen=True)
class Grid:
    """rows x cols cells; Euclidean distance between cell centers, scaled by cell_size."""

    rows: int
    cols: int
    cell_size: float = 1.0

    def __post_init__(self):
        if self.rows * self.cols < 1:
            raise ValueError("grid must contain at least one cell")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def centers(self) -> np.ndarray:
        r, c = np.divmod(np.arange(self.size), self.cols)
        return self.cell_size * np.stack([r + 0.5, c + 0.5], axis=1)

    def distance_matrix(self) -> np.ndarray:
        xy = self.centers()
        diff = xy[:, None, :] - xy[None, :, :]
        return np.sqrt((diff**2).sum(axis=2))


@dataclass(frozen=True)
class PointCloud:
    """Explicit coordinate vectors with a euclidean or cosine metric.

    Cosine distance is 1 - <x,y>/(|x||y|), clipped to [0, 2]; it requires all
    vectors to be nonzero.
    """

    points: np.ndarray = field(repr=False)
    metric: str = "euclidean"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a nonempty (n, d) array")
        if self.metric not in ("euclidean", "cosine"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == "cosine" and np.any(np.linalg.norm(pts, axis=1) == 0):
            raise ValueError("cosine metric requires all vectors to be nonzero")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def distance_matrix(self) -> np.ndarray:
        if self.metric == "euclidean":
            diff = self.points[:, None, :] - self.points[None, :, :]
            return np.sqrt((diff**2).sum(axis=2))
        norms = np.linalg.norm(self.points, axis=1)
        cos = (self.points @ self.points.T) / np.outer(norms, norms)
        return np.clip(1.0 - cos, 0.0, 2.0)


GroundSpace = Ring | Grid | PointCloud


@dataclass(frozen=True)
class CostMatrix:
    """k x k_v matrix of d(x_i, v_j)**p transport costs.

    ``costs`` entries are nonnegative and finite; ``p`` >= 1 is the distance
    power, kept so that costs can be mapped back to raw distances.
    """

    costs: np.ndarray = field(repr=False)
    p: float

    def __post_init__(self):
        c = np.asarray(self.costs, dtype=float)
        if c.ndim != 2 or c.size == 0:
            raise ValueError("costs must be a nonempty 2-d array")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise ValueError("costs must be finite and nonnegative")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        object.__setattr__(self, "costs", c)

    @property
    def k(self) -> int:
        return self.costs.shape[0]

    @property
    def k_v(self) -> int:
        return self.costs.shape[1]

    def distances(self) -> np.ndarray:
        """Raw distances d = costs**(1/p)."""
        return self.costs ** (1.0 / self.p)

    @property
    def max_cost(self) -> float:
        return float(self.costs.max())


def build_cost_matrix(
    space: GroundSpace, output_subset: list[int] | None = None, p: float = 2.0
) -> CostMatrix:
    """Cost matrix between all points of ``space`` and an output subset.

    Parameters
    ----------
    space : Ring, Grid, or PointCloud
    output_subset : indices of the points usable as outputs; None keeps all.
    p : distance power, >= 1.

    Returns
    -------
    CostMatrix with entries d(x_i, v_j)**p, one column per output index.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    n = space.size
    if output_subset is None:
        subset = np.arange(n)
    else:
        subset = np.asarray(output_subset, dtype=int)
        if subset.size == 0:
            raise ValueError("output_subset must not be empty")
        if np.any(subset < 0) or np.any(subset >= n):
            raise ValueError(f"output_subset indices must lie in [0, {n})")
    d = space.distance_matrix()[:, subset]
    return CostMatrix(costs=d**p, p=float(p))


# --- file formats ----------------------------------------------------------
#
# CSV cost matrix: one header line "k,k_v,p" with the actual values, then k
# rows of k_v comma-separated costs.  JSON cost matrix: {"p": ..., "costs":
# [[...], ...]}.


def save_cost_csv(cm: CostMatrix, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{cm.k},{cm.k_v},{cm.p!r}\n")
        for row in cm.costs:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def load_cost_csv(path: str | Path) -> CostMatrix:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 3:
            raise ValueError("cost CSV header must be 'k,k_v,p'")
        k, k_v, p = int(header[0]), int(header[1]), float(header[2])
        costs = np.loadtxt(fh, delimiter=",", ndmin=2)
    if costs.shape != (k, k_v):
        raise ValueError(f"cost CSV body {costs.shape} does not match header ({k}, {k_v})")
    return CostMatrix(costs=costs, p=p)


def cost_to_json(cm: CostMatrix) -> dict:
    return {"p": cm.p, "costs": cm.costs.tolist()}


def cost_from_json(obj: dict) -> CostMatrix:
    return CostMatrix(costs=np.asarray(obj["costs"], dtype=float), p=float(obj["p"]))


def save_cost(cm: CostMatrix, path: str | Path) -> None:
    """Write a cost matrix; format chosen by extension (.csv or .json)."""
    path = Path(path)
    if path.suffix == ".csv":
        save_cost_csv(cm, path)
    else:
        path.write_text(json.dumps(cost_to_json(cm)))


def load_cost(path: str | Path) -> CostMatrix:
    path = Path(path)
    if path.suffix == ".csv":
        return load_cost_csv(path)
    return cost_from_json(json.loads(path.read_text()))


def save_points_csv(cloud: PointCloud, path: str | Path) -> None:
    n, dim = cloud.points.shape
    with open(path, "w") as fh:
        fh.write(f"{n},{dim},{cloud.metric}\n")
        for row in cloud.points:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def load_points_csv(path: str | Path) -> PointCloud:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 3:
            raise ValueError("point CSV header must be 'n,dim,metric'")
        n, dim, metric = int(header[0]), int(header[1]), header[2]
        pts = np.loadtxt(fh, delimiter=",", ndmin=2)
    if pts.shape != (n, dim):
        raise ValueError(f"point CSV body {pts.shape} does not match header ({n}, {dim})")
    return PointCloud(points=pts, metric=metric)
