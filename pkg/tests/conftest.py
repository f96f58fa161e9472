"""Shared builders for unit and acceptance tests."""

import math

from aircover.clustering import Assignment, Circle, Workspace
from aircover.harness import config_from_dict
from aircover.scenario import Bounds3, Position3, Scene, Tbs, UserEquipment


REFERENCE_THRESHOLD_M = 160.0


def reference_config(agents=None, **run_overrides):
    """The headline restoration scenario: 4 stations, state (0,1,1,0),
    400 users, battery 300, with the partition threshold and service rate
    threshold the acceptance runs use (see the README sensitivity notes)."""
    run = {"seed": 0, "episodes": 10000,
           "birch_threshold_m": REFERENCE_THRESHOLD_M}
    run.update(run_overrides)
    agent_doc = {"rate_threshold_bps": 1e3}
    agent_doc.update(agents or {})
    return config_from_dict({"agents": agent_doc, "run": run})


def single_agent_cube():
    """One UAV, one user, a 3x3x3 lattice: small enough to solve exactly.

    The user sits at (0.3, 0.4) under a failed station; with a link range of
    2 lattice units, 13 of the 27 cells serve it (checked geometrically).
    """
    tbs = (
        Tbs(id=0, position=Position3(1.0, 1.0, 0.25), coverage_radius=2.0,
            active=False),
    )
    ue = UserEquipment(id=0, position=Position3(0.3, 0.4, 0.075), cs=0,
                       serving=None)
    scene = Scene(
        bounds=Bounds3(0.0, 2.0, 0.0, 2.0, 0.0, 2.0),
        scale_m_per_unit=20.0,
        rng_seed=0,
        tbs=tbs,
        ues=(ue,),
    )
    workspace = Workspace(0, 2, 0, 2, 0, 2)
    assignments = [
        Assignment(uav_id=0, member_ids=(0,), circle=Circle(0.3, 0.4, 0.0),
                   workspace=workspace, initial_position=(0, 0, 0))
    ]
    return scene, assignments, workspace


def cube_covering_cells(d_thruav_units=2.0):
    """Cells of the 3x3x3 lattice within link range of the cube's user."""
    cov = set()
    for x in range(3):
        for y in range(3):
            for z in range(3):
                if math.hypot(x - 0.3, y - 0.4, z) <= d_thruav_units:
                    cov.add((x, y, z))
    return cov
