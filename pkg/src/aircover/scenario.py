"""World model: terrestrial base stations, ground users, and disaster state.

Positions are in abstract grid units; ``Scene.scale_m_per_unit`` converts to
meters for radio computations. User positions are continuous, station motion
elsewhere in the package happens on the integer lattice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

SCENE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Position3:
    """A point in scene units."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class Bounds3:
    """Axis-aligned scene box, inclusive on both ends."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    zmin: float
    zmax: float

    def contains(self, p: Position3) -> bool:
        return (
            self.xmin <= p.x <= self.xmax
            and self.ymin <= p.y <= self.ymax
            and self.zmin <= p.z <= self.zmax
        )


@dataclass(frozen=True)
class Tbs:
    """Terrestrial base station; ``active`` drops to False in a disaster."""

    id: int
    position: Position3
    coverage_radius: float
    active: bool = True


@dataclass(frozen=True)
class UserEquipment:
    """Ground user. ``cs`` is the connection state (1 = served by ``serving``)."""

    id: int
    position: Position3
    cs: int = 1
    serving: int | None = None


def distance(station: Position3, terminal: Position3) -> float:
    """Link distance from a base station to a ground terminal.

    Horizontal separation plus the station's own altitude; the terminal's
    altitude is ignored (ground-projection convention, terminals are treated
    as being at z = 0 for geometry).
    """
    dx = station.x - terminal.x
    dy = station.y - terminal.y
    return float(np.sqrt(dx * dx + dy * dy + station.z * station.z))


@dataclass(frozen=True)
class Scene:
    """Immutable snapshot of the world. Build variants with ``dataclasses.replace``."""

    bounds: Bounds3
    scale_m_per_unit: float
    rng_seed: int
    tbs: tuple[Tbs, ...]
    ues: tuple[UserEquipment, ...]

    def unserved_ues(self) -> tuple[UserEquipment, ...]:
        return tuple(ue for ue in self.ues if ue.cs == 0)

    def to_json(self) -> str:
        doc = {
            "schema_version": SCENE_SCHEMA_VERSION,
            "bounds": {
                "xmin": self.bounds.xmin,
                "xmax": self.bounds.xmax,
                "ymin": self.bounds.ymin,
                "ymax": self.bounds.ymax,
                "zmin": self.bounds.zmin,
                "zmax": self.bounds.zmax,
            },
            "scale_m_per_unit": self.scale_m_per_unit,
            "rng_seed": self.rng_seed,
            "tbs": [
                {
                    "id": t.id,
                    "x": t.position.x,
                    "y": t.position.y,
                    "z": t.position.z,
                    "coverage_radius": t.coverage_radius,
                    "active": t.active,
                }
                for t in self.tbs
            ],
            "ues": [
                {
                    "id": u.id,
                    "x": u.position.x,
                    "y": u.position.y,
                    "z": u.position.z,
                    "cs": u.cs,
                    "serving": u.serving,
                }
                for u in self.ues
            ],
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "Scene":
        doc = json.loads(text)
        version = doc.get("schema_version")
        if version != SCENE_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported scene schema_version: {version!r} "
                f"(expected {SCENE_SCHEMA_VERSION})"
            )
        b = doc["bounds"]
        bounds = Bounds3(
            b["xmin"], b["xmax"], b["ymin"], b["ymax"], b["zmin"], b["zmax"]
        )
        tbs = tuple(
            Tbs(
                id=t["id"],
                position=Position3(t["x"], t["y"], t["z"]),
                coverage_radius=t["coverage_radius"],
                active=t["active"],
            )
            for t in doc["tbs"]
        )
        ues = tuple(
            UserEquipment(
                id=u["id"],
                position=Position3(u["x"], u["y"], u["z"]),
                cs=u["cs"],
                serving=u["serving"],
            )
            for u in doc["ues"]
        )
        return Scene(
            bounds=bounds,
            scale_m_per_unit=doc["scale_m_per_unit"],
            rng_seed=doc["rng_seed"],
            tbs=tbs,
            ues=ues,
        )


def generate_ues(
    tbs_list: tuple[Tbs, ...] | list[Tbs],
    total_ues: int,
    rng: np.random.Generator,
    ue_height_units: float = 1.5 / 20.0,
) -> tuple[UserEquipment, ...]:
    """Drop users uniformly inside each station's coverage disc.

    The total is split evenly across stations with the remainder handed out
    round-robin to the lowest station ids. Uniformity on the disc comes from
    the inverse-CDF radius r = R*sqrt(u). Every user starts connected (cs = 1)
    to its generating station. Ids are assigned in generation order, grouped
    by ascending station id.
    """
    if total_ues < 0:
        raise ValueError("total_ues must be non-negative")
    stations = sorted(tbs_list, key=lambda t: t.id)
    n = len(stations)
    if n == 0:
        if total_ues > 0:
            raise ValueError("cannot place users without base stations")
        return ()
    base, rem = divmod(total_ues, n)
    ues: list[UserEquipment] = []
    next_id = 0
    for i, t in enumerate(stations):
        count = base + (1 if i < rem else 0)
        for _ in range(count):
            u = rng.random()
            phi = 2.0 * np.pi * rng.random()
            r = t.coverage_radius * np.sqrt(u)
            pos = Position3(
                t.position.x + r * np.cos(phi),
                t.position.y + r * np.sin(phi),
                ue_height_units,
            )
            ues.append(UserEquipment(id=next_id, position=pos, cs=1, serving=t.id))
            next_id += 1
    return tuple(ues)


def apply_disaster(scene: Scene, state_vector: list[int] | tuple[int, ...]) -> Scene:
    """Return a new scene with the given station up/down state applied.

    ``state_vector[i]`` is 1 to keep station i active, 0 to bring it down.
    Users whose serving station went down become unserved (cs = 0, no server);
    users of active stations are left untouched. Idempotent for a fixed vector.
    """
    if len(state_vector) != len(scene.tbs):
        raise ValueError(
            f"state vector length {len(state_vector)} does not match "
            f"{len(scene.tbs)} base stations"
        )
    for s in state_vector:
        if s not in (0, 1):
            raise ValueError(f"state vector entries must be 0 or 1, got {s!r}")
    new_tbs = tuple(
        replace(t, active=bool(state_vector[i])) for i, t in enumerate(scene.tbs)
    )
    active_ids = {t.id for t in new_tbs if t.active}
    new_ues = []
    for ue in scene.ues:
        if ue.serving is not None and ue.serving not in active_ids:
            new_ues.append(replace(ue, cs=0, serving=None))
        else:
            new_ues.append(ue)
    return replace(scene, tbs=new_tbs, ues=tuple(new_ues))


def select_tbs(ue: UserEquipment, tbs_list: tuple[Tbs, ...] | list[Tbs]) -> Tbs | None:
    """Pick the serving station for a user: nearest active one in range.

    A station is a candidate when it is active and its link distance is at
    most its coverage radius. Ties on distance go to the lowest station id.
    Returns None when no candidate exists.
    """
    best: Tbs | None = None
    best_d = np.inf
    for t in sorted(tbs_list, key=lambda t: t.id):
        if not t.active:
            continue
        d = distance(t.position, ue.position)
        if d <= t.coverage_radius and d < best_d:
            best, best_d = t, d
    return best


def build_grid_scene(
    n_side: int = 2,
    quadrant_units: float = 260.0,
    altitude_units: float = 60.0,
    scale_m_per_unit: float = 20.0,
    tbs_coverage_units: float = 120.0,
    tbs_height_units: float = 5.0,
    total_ues: int = 400,
    seed: int = 0,
    ue_height_units: float = 1.5 / 20.0,
) -> Scene:
    """Build the default world: an n x n grid of station quadrants.

    Each station sits at its quadrant center so its coverage disc lies fully
    inside the scene bounds. User placement consumes the scene-generation
    random stream (SeedSequence spawn key (0,)).
    """
    if tbs_coverage_units > quadrant_units / 2.0:
        raise ValueError("station coverage disc does not fit inside its quadrant")
    side = n_side * quadrant_units
    bounds = Bounds3(0.0, side, 0.0, side, 0.0, altitude_units)
    tbs = []
    tbs_id = 0
    for gy in range(n_side):
        for gx in range(n_side):
            center = Position3(
                (gx + 0.5) * quadrant_units,
                (gy + 0.5) * quadrant_units,
                tbs_height_units,
            )
            tbs.append(
                Tbs(
                    id=tbs_id,
                    position=center,
                    coverage_radius=tbs_coverage_units,
                    active=True,
                )
            )
            tbs_id += 1
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    ues = generate_ues(tbs, total_ues, rng, ue_height_units=ue_height_units)
    return Scene(
        bounds=bounds,
        scale_m_per_unit=scale_m_per_unit,
        rng_seed=seed,
        tbs=tuple(tbs),
        ues=ues,
    )
