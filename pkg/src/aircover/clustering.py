"""Discovery and workspace partitioning.

A zigzag sweep finds the users that lost service, an incrementally built
clustering-feature tree groups them into UAV-sized clusters, and each cluster
gets a minimal enclosing circle plus a lattice workspace box for its UAV.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_array

from .scenario import Bounds3, Scene, UserEquipment


class ClusteringFeature:
    """Running (count, linear sum, squared-norm sum) summary of a point set."""

    __slots__ = ("n", "ls", "ss")

    def __init__(self, dim: int):
        self.n = 0
        self.ls = np.zeros(dim, dtype=float)
        self.ss = 0.0

    @classmethod
    def from_point(cls, p: np.ndarray) -> "ClusteringFeature":
        cf = cls(len(p))
        cf.add_point(p)
        return cf

    def add_point(self, p: np.ndarray) -> None:
        self.n += 1
        self.ls += p
        self.ss += float(p @ p)

    def merge(self, other: "ClusteringFeature") -> None:
        self.n += other.n
        self.ls += other.ls
        self.ss += other.ss

    def copy(self) -> "ClusteringFeature":
        cf = ClusteringFeature(len(self.ls))
        cf.n = self.n
        cf.ls = self.ls.copy()
        cf.ss = self.ss
        return cf

    def centroid(self) -> np.ndarray:
        return self.ls / self.n

    def radius(self) -> float:
        # RMS distance from the centroid; clamp tiny negatives from rounding
        c = self.ls / self.n
        return math.sqrt(max(self.ss / self.n - float(c @ c), 0.0))

    def radius_with(self, p: np.ndarray) -> float:
        """Radius the entry would have after absorbing p, without mutating."""
        n = self.n + 1
        ls = self.ls + p
        ss = self.ss + float(p @ p)
        c = ls / n
        return math.sqrt(max(ss / n - float(c @ c), 0.0))


class _LeafEntry:
    __slots__ = ("cf", "members")

    def __init__(self, cf: ClusteringFeature, members: list[int]):
        self.cf = cf
        self.members = members


class _NodeEntry:
    __slots__ = ("cf", "child")

    def __init__(self, cf: ClusteringFeature, child: "CfNode"):
        self.cf = cf
        self.child = child


class CfNode:
    """Tree node; entries are leaf entries or child pointers."""

    __slots__ = ("is_leaf", "entries")

    def __init__(self, is_leaf: bool):
        self.is_leaf = is_leaf
        self.entries: list = []


def _node_cf(node: CfNode) -> ClusteringFeature:
    cf = None
    for e in node.entries:
        if cf is None:
            cf = e.cf.copy()
        else:
            cf.merge(e.cf)
    return cf


def _nearest_entry(entries: list, p: np.ndarray) -> int:
    """Index of the entry whose centroid is nearest to p; ties to the lowest index."""
    best = 0
    best_d = np.inf
    for i, e in enumerate(entries):
        c = e.cf.centroid()
        d = float(np.sum((c - p) ** 2))
        if d < best_d:
            best, best_d = i, d
    return best


class CfTree:
    """Incremental clustering-feature tree.

    A point descends by nearest child centroid and merges into the nearest
    leaf entry when the merged entry radius stays within the threshold;
    otherwise it opens a new entry. Overfull nodes split on the two
    farthest-apart entry centroids, remaining entries joining the nearer seed.
    Insertion order is the caller's responsibility and fixes the result.
    """

    def __init__(
        self,
        threshold: float,
        branching_factor: int = 8,
        leaf_capacity: int = 8,
        dim: int = 2,
    ):
        if threshold < 0:
            raise ValueError("threshold must be non-negative")
        if branching_factor < 2 or leaf_capacity < 1:
            raise ValueError("branching_factor must be >= 2 and leaf_capacity >= 1")
        self.threshold = threshold
        self.branching_factor = branching_factor
        self.leaf_capacity = leaf_capacity
        self.dim = dim
        self.root: CfNode | None = None
        self.n_points = 0

    def insert(self, point, member_id: int) -> None:
        p = np.asarray(point, dtype=float)
        if len(p) != self.dim:
            raise ValueError(f"expected {self.dim}-dimensional point, got {len(p)}")
        self.n_points += 1
        if self.root is None:
            leaf = CfNode(is_leaf=True)
            leaf.entries.append(_LeafEntry(ClusteringFeature.from_point(p), [member_id]))
            self.root = leaf
            return

        path: list[tuple[CfNode, int]] = []
        node = self.root
        while not node.is_leaf:
            idx = _nearest_entry(node.entries, p)
            path.append((node, idx))
            node = node.entries[idx].child

        idx = _nearest_entry(node.entries, p)
        entry = node.entries[idx]
        if entry.cf.radius_with(p) <= self.threshold:
            entry.cf.add_point(p)
            entry.members.append(member_id)
        else:
            node.entries.append(_LeafEntry(ClusteringFeature.from_point(p), [member_id]))

        split = self._split(node) if len(node.entries) > self.leaf_capacity else None
        for parent, eidx in reversed(path):
            if split is None:
                parent.entries[eidx].cf = _node_cf(parent.entries[eidx].child)
            else:
                a, b = split
                parent.entries[eidx] = _NodeEntry(_node_cf(a), a)
                parent.entries.insert(eidx + 1, _NodeEntry(_node_cf(b), b))
                split = (
                    self._split(parent)
                    if len(parent.entries) > self.branching_factor
                    else None
                )
        if split is not None:
            a, b = split
            root = CfNode(is_leaf=False)
            root.entries.append(_NodeEntry(_node_cf(a), a))
            root.entries.append(_NodeEntry(_node_cf(b), b))
            self.root = root

    def _split(self, node: CfNode) -> tuple[CfNode, CfNode]:
        """Split an overfull node on its two farthest-apart entry centroids."""
        centroids = [e.cf.centroid() for e in node.entries]
        n = len(centroids)
        si, sj = 0, 1
        best = -1.0
        for i in range(n):
            for j in range(i + 1, n):
                d = float(np.sum((centroids[i] - centroids[j]) ** 2))
                if d > best:
                    best, si, sj = d, i, j
        a = CfNode(is_leaf=node.is_leaf)
        b = CfNode(is_leaf=node.is_leaf)
        ca, cb = centroids[si], centroids[sj]
        for i, e in enumerate(node.entries):
            if i == si:
                a.entries.append(e)
            elif i == sj:
                b.entries.append(e)
            else:
                da = float(np.sum((centroids[i] - ca) ** 2))
                db = float(np.sum((centroids[i] - cb) ** 2))
                (a if da <= db else b).entries.append(e)
        return a, b

    def leaf_entries(self) -> list[_LeafEntry]:
        """Leaf entries in left-to-right tree order."""
        if self.root is None:
            return []
        out: list[_LeafEntry] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.extend(node.entries)
            else:
                stack.extend(e.child for e in reversed(node.entries))
        return out

    def clusters(self) -> list[list[int]]:
        """Member-id lists, one per leaf entry, in deterministic tree order."""
        return [list(e.members) for e in self.leaf_entries()]


class CfTreeClusterer(ClusterMixin, BaseEstimator):
    """Scikit-learn front end for the clustering-feature tree.

    Rows of X are inserted in order; each leaf entry of the finished tree is
    one cluster. ``threshold`` caps the RMS radius an entry may reach when
    absorbing a point.
    """

    def __init__(
        self,
        threshold: float = 60.0,
        branching_factor: int = 8,
        leaf_capacity: int = 8,
    ):
        self.threshold = threshold
        self.branching_factor = branching_factor
        self.leaf_capacity = leaf_capacity

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        tree = CfTree(
            threshold=self.threshold,
            branching_factor=self.branching_factor,
            leaf_capacity=self.leaf_capacity,
            dim=X.shape[1],
        )
        for i, row in enumerate(X):
            tree.insert(row, i)
        members = tree.clusters()
        labels = np.full(X.shape[0], -1, dtype=int)
        for label, ids in enumerate(members):
            labels[ids] = label
        self.tree_ = tree
        self.cluster_members_ = [np.asarray(ids, dtype=int) for ids in members]
        self.labels_ = labels
        self.n_clusters_ = len(members)
        self.centroids_ = (
            np.vstack([e.cf.centroid() for e in tree.leaf_entries()])
            if members
            else np.empty((0, X.shape[1]))
        )
        return self


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    radius: float

    def contains(self, x: float, y: float, tol: float = 1e-9) -> bool:
        return math.hypot(x - self.cx, y - self.cy) <= self.radius + tol


def _circle_two(ax: float, ay: float, bx: float, by: float) -> Circle:
    cx = (ax + bx) / 2.0
    cy = (ay + by) / 2.0
    return Circle(cx, cy, math.hypot(ax - cx, ay - cy))


def _circumcircle(ax, ay, bx, by, cx, cy) -> Circle | None:
    # offset to the triangle's bounding-box center for numerical stability
    ox = (min(ax, bx, cx) + max(ax, bx, cx)) / 2.0
    oy = (min(ay, by, cy) + max(ay, by, cy)) / 2.0
    ax -= ox
    ay -= oy
    bx -= ox
    by -= oy
    cx -= ox
    cy -= oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(
        math.hypot(ux - ax, uy - ay),
        math.hypot(ux - bx, uy - by),
        math.hypot(ux - cx, uy - cy),
    )
    return Circle(ux + ox, uy + oy, r)


def minimal_enclosing_circle(points) -> Circle:
    """Smallest circle containing every point.

    Incremental construction: grow the circle each time a point falls
    outside, constraining first one then two boundary points. Deterministic
    in the input order.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected an (n, 2) array of points")
    if len(pts) == 0:
        raise ValueError("cannot enclose zero points")

    c = Circle(float(pts[0][0]), float(pts[0][1]), 0.0)
    for i in range(1, len(pts)):
        px, py = float(pts[i][0]), float(pts[i][1])
        if not c.contains(px, py):
            c = _mec_one(pts[: i + 1], px, py)
    return c


def _mec_one(pts, px, py) -> Circle:
    """Smallest circle over pts with (px, py) on the boundary."""
    c = Circle(px, py, 0.0)
    for j in range(len(pts) - 1):
        qx, qy = float(pts[j][0]), float(pts[j][1])
        if not c.contains(qx, qy):
            if c.radius == 0.0:
                c = _circle_two(px, py, qx, qy)
            else:
                c = _mec_two(pts[: j + 1], px, py, qx, qy)
    return c


def _mec_two(pts, px, py, qx, qy) -> Circle:
    """Smallest circle over pts with both (px, py) and (qx, qy) on the boundary."""
    circ = _circle_two(px, py, qx, qy)
    left: Circle | None = None
    right: Circle | None = None
    dx, dy = qx - px, qy - py
    for k in range(len(pts)):
        rx, ry = float(pts[k][0]), float(pts[k][1])
        if circ.contains(rx, ry):
            continue
        cross = dx * (ry - py) - dy * (rx - px)
        c = _circumcircle(px, py, qx, qy, rx, ry)
        if c is None:
            continue
        c_cross = dx * (c.cy - py) - dy * (c.cx - px)
        if cross > 0.0 and (
            left is None or c_cross > dx * (left.cy - py) - dy * (left.cx - px)
        ):
            left = c
        elif cross < 0.0 and (
            right is None or c_cross < dx * (right.cy - py) - dy * (right.cx - px)
        ):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left.radius <= right.radius else right


def sweep_rows(bounds: Bounds3, interval: float) -> np.ndarray:
    """Evenly spaced sweep-row y positions covering the scene.

    Row spacing never exceeds the interval, so every ground point lies within
    half an interval of some row. A degenerate extent still yields one row.
    """
    if interval <= 0:
        raise ValueError("sweep interval must be positive")
    extent = bounds.ymax - bounds.ymin
    if extent <= 0:
        return np.array([bounds.ymin])
    n_rows = int(math.ceil(extent / interval)) + 1
    return np.linspace(bounds.ymin, bounds.ymax, n_rows)


def sweep_path(bounds: Bounds3, interval: float) -> list[tuple[float, float]]:
    """Boustrophedon waypoints: row ends alternating left-right and right-left."""
    rows = sweep_rows(bounds, interval)
    path = []
    for k, y in enumerate(rows):
        ends = [(bounds.xmin, y), (bounds.xmax, y)]
        if k % 2 == 1:
            ends.reverse()
        path.extend(ends)
    return path


def zigzag_sweep(scene: Scene, interval: float) -> tuple[UserEquipment, ...]:
    """Users discovered as unserved, in sweep order.

    Each unserved user responds on the sweep row nearest to it; discovery
    order is row by row, along the row in flight direction (alternating),
    with user id breaking exact ties.
    """
    rows = sweep_rows(scene.bounds, interval)
    spacing = rows[1] - rows[0] if len(rows) > 1 else 1.0

    def key(ue: UserEquipment):
        k = int(math.floor((ue.position.y - scene.bounds.ymin) / spacing + 0.5))
        k = min(max(k, 0), len(rows) - 1)
        x = ue.position.x if k % 2 == 0 else -ue.position.x
        return (k, x, ue.id)

    return tuple(sorted(scene.unserved_ues(), key=key))


@dataclass(frozen=True)
class Workspace:
    """Inclusive integer lattice box a UAV may move in."""

    x0: int
    x1: int
    y0: int
    y1: int
    z0: int
    z1: int

    def contains(self, cell: tuple[int, int, int]) -> bool:
        x, y, z = cell
        return (
            self.x0 <= x <= self.x1
            and self.y0 <= y <= self.y1
            and self.z0 <= z <= self.z1
        )

    def clamp(self, x: int, y: int, z: int) -> tuple[int, int, int]:
        return (
            min(max(x, self.x0), self.x1),
            min(max(y, self.y0), self.y1),
            min(max(z, self.z0), self.z1),
        )

    def n_cells(self) -> int:
        return (
            (self.x1 - self.x0 + 1)
            * (self.y1 - self.y0 + 1)
            * (self.z1 - self.z0 + 1)
        )


@dataclass(frozen=True)
class Assignment:
    """One UAV's responsibility: members, enclosing circle, motion box."""

    uav_id: int
    member_ids: tuple[int, ...]
    circle: Circle
    workspace: Workspace
    initial_position: tuple[int, int, int]


def _lattice_box(
    bounds: Bounds3, xlo: float, xhi: float, ylo: float, yhi: float
) -> Workspace:
    x0 = int(math.floor(max(xlo, bounds.xmin)))
    x1 = int(math.ceil(min(xhi, bounds.xmax)))
    y0 = int(math.floor(max(ylo, bounds.ymin)))
    y1 = int(math.ceil(min(yhi, bounds.ymax)))
    bx0, bx1 = int(math.ceil(bounds.xmin)), int(math.floor(bounds.xmax))
    by0, by1 = int(math.ceil(bounds.ymin)), int(math.floor(bounds.ymax))
    z0 = int(math.ceil(bounds.zmin))
    z1 = int(math.floor(bounds.zmax))
    x0, x1 = max(x0, bx0), min(x1, bx1)
    y0, y1 = max(y0, by0), min(y1, by1)
    if bx0 > bx1 or by0 > by1 or z0 > z1:
        raise ValueError("scene bounds contain no lattice cell")
    if x1 < x0:
        # the interval holds no lattice point (tiny cluster between cells):
        # snap to the nearest in-bounds cell
        x0 = x1 = min(max(round((xlo + xhi) / 2.0), bx0), bx1)
    if y1 < y0:
        y0 = y1 = min(max(round((ylo + yhi) / 2.0), by0), by1)
    return Workspace(x0, x1, y0, y1, z0, z1)


def _draw_initial_positions(
    workspaces: list[Workspace], seed: int
) -> list[tuple[int, int, int]]:
    """One distinct lattice cell per UAV, each from its own seeded stream."""
    occupied: set[tuple[int, int, int]] = set()
    positions = []
    for uav_id, ws in enumerate(workspaces):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3, uav_id)))
        while True:
            cell = (
                int(rng.integers(ws.x0, ws.x1 + 1)),
                int(rng.integers(ws.y0, ws.y1 + 1)),
                int(rng.integers(ws.z0, ws.z1 + 1)),
            )
            if cell not in occupied:
                break
        occupied.add(cell)
        positions.append(cell)
    return positions


def assign_uavs(
    clusters: list[list[int]],
    scene: Scene,
    d_thruav_units: float,
) -> list[Assignment]:
    """Give every cluster a UAV: enclosing circle, workspace box, start cell.

    The workspace is the circle's bounding square clipped to the scene,
    spanning the whole scene altitude band. Every circle must fit within the
    UAV link range; a larger circle means the partition cannot be served and
    is an error here, as is an empty cluster.
    """
    ue_by_id = {ue.id: ue for ue in scene.ues}
    circles = []
    workspaces = []
    for members in clusters:
        if not members:
            raise ValueError("cannot assign a UAV to an empty cluster")
        pts = np.array(
            [(ue_by_id[i].position.x, ue_by_id[i].position.y) for i in members]
        )
        circle = minimal_enclosing_circle(pts)
        if circle.radius > d_thruav_units:
            raise ValueError(
                f"cluster enclosing radius {circle.radius:.3f} exceeds the UAV "
                f"link range {d_thruav_units:.3f}"
            )
        circles.append(circle)
        workspaces.append(
            _lattice_box(
                scene.bounds,
                circle.cx - circle.radius,
                circle.cx + circle.radius,
                circle.cy - circle.radius,
                circle.cy + circle.radius,
            )
        )
    positions = _draw_initial_positions(workspaces, scene.rng_seed)
    return [
        Assignment(
            uav_id=i,
            member_ids=tuple(clusters[i]),
            circle=circles[i],
            workspace=workspaces[i],
            initial_position=positions[i],
        )
        for i in range(len(clusters))
    ]


def shared_assignments(
    scene: Scene, n_uavs: int, unserved_ids: list[int]
) -> list[Assignment]:
    """Workspace sharing for the unpartitioned baseline.

    Every UAV gets the bounding box of the failed stations' coverage discs
    (clipped to the scene) and the full member pool; responsibility is
    resolved dynamically by the trainer, so no circle-fit check applies.
    """
    if n_uavs < 1:
        raise ValueError("need at least one UAV")
    failed = [t for t in scene.tbs if not t.active]
    if not failed:
        raise ValueError("no failed base stations: nothing to cover")
    xlo = min(t.position.x - t.coverage_radius for t in failed)
    xhi = max(t.position.x + t.coverage_radius for t in failed)
    ylo = min(t.position.y - t.coverage_radius for t in failed)
    yhi = max(t.position.y + t.coverage_radius for t in failed)
    ws = _lattice_box(scene.bounds, xlo, xhi, ylo, yhi)
    ue_by_id = {ue.id: ue for ue in scene.ues}
    pts = np.array(
        [(ue_by_id[i].position.x, ue_by_id[i].position.y) for i in unserved_ids]
    )
    circle = minimal_enclosing_circle(pts) if len(pts) else Circle(0.0, 0.0, 0.0)
    positions = _draw_initial_positions([ws] * n_uavs, scene.rng_seed)
    return [
        Assignment(
            uav_id=i,
            member_ids=tuple(unserved_ids),
            circle=circle,
            workspace=ws,
            initial_position=positions[i],
        )
        for i in range(n_uavs)
    ]


def assignments_to_json(assignments: list[Assignment]) -> str:
    doc = {
        "schema_version": 1,
        "clusters": [
            {
                "uav_id": a.uav_id,
                "member_ids": list(a.member_ids),
                "circle": {"cx": a.circle.cx, "cy": a.circle.cy, "radius": a.circle.radius},
                "workspace": {
                    "x0": a.workspace.x0,
                    "x1": a.workspace.x1,
                    "y0": a.workspace.y0,
                    "y1": a.workspace.y1,
                    "z0": a.workspace.z0,
                    "z1": a.workspace.z1,
                },
                "initial_position": list(a.initial_position),
            }
            for a in assignments
        ],
    }
    return json.dumps(doc, indent=2)


def assignments_from_json(text: str) -> list[Assignment]:
    doc = json.loads(text)
    if doc.get("schema_version") != 1:
        raise ValueError(f"unsupported clusters schema_version: {doc.get('schema_version')!r}")
    out = []
    for c in doc["clusters"]:
        ws = c["workspace"]
        out.append(
            Assignment(
                uav_id=c["uav_id"],
                member_ids=tuple(c["member_ids"]),
                circle=Circle(c["circle"]["cx"], c["circle"]["cy"], c["circle"]["radius"]),
                workspace=Workspace(
                    ws["x0"], ws["x1"], ws["y0"], ws["y1"], ws["z0"], ws["z1"]
                ),
                initial_position=tuple(c["initial_position"]),
            )
        )
    return out
