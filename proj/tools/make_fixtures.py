#!/usr/bin/env python3
"""Regenerates the world fixtures under scenarios/worlds/.

Features are placed every `spacing` meters along each featured wall, with a
seeded height in [-0.5, 0.5] m. Output is deterministic.
"""
import json
import math
import pathlib
import random
import sys

SPACING = 0.25
HEIGHT_RANGE = 0.5


def featured_world(walls, featured, centerline, half_width, seed, description, spacing=SPACING,
                   heights=True):
    rng = random.Random(seed)
    features = []
    next_id = 0
    for wi in featured:
        (x1, y1), (x2, y2) = walls[wi]
        length = math.hypot(x2 - x1, y2 - y1)
        n = int(math.floor(length / spacing + 1e-9))
        for i in range(1, n):
            s = i * spacing / length
            pos = [round(x1 + s * (x2 - x1), 6), round(y1 + s * (y2 - y1), 6)]
            f = {"id": next_id, "pos": pos, "wall": wi}
            if heights:
                f["height"] = round(rng.uniform(-HEIGHT_RANGE, HEIGHT_RANGE), 4)
            features.append(f)
            next_id += 1
    world = {
        "description": description,
        "feature_spacing_m": spacing,
        "walls": walls,
        "features": features,
        "corridor_half_width": half_width,
    }
    if centerline:
        world["centerline"] = centerline
    return world


def straight(length, tail, seed):
    walls = [[[-2, -2], [-2, length + tail]], [[2, -2], [2, length + tail]]]
    return featured_world(walls, [0, 1], [[0, 0], [0, length]], 2.0, seed,
                          f"Straight corridor, R = 2 m, {length} m centerline")


def l_corridor():
    walls = [
        [[-2, -2], [-2, 6]],    # 0 inner left wall, ends at the corner
        [[2, -2], [2, 10]],     # 1 outer right wall
        [[2, 10], [-16, 10]],   # 2 end wall / outer wall of the second leg
        [[-2, 6], [-16, 6]],    # 3 inner wall of the second leg
        [[-2, -2], [2, -2]],    # 4 back wall
    ]
    return featured_world(walls, [0, 1, 2, 3], [[0, 0], [0, 8], [-10, 8]], 2.0, 2,
                          "L corridor, R = 2 m, 90 degree left turn at y = 8")


def u_corridor():
    walls = [
        [[-2, -2], [-2, 5]],     # 0 inner wall of the first leg
        [[2, -2], [2, 9]],       # 1 outer wall of the first leg
        [[2, 9], [-10, 9]],      # 2 outer wall of the middle leg
        [[-2, 5], [-6, 5]],      # 3 inner wall of the middle leg
        [[-10, 9], [-10, -10]],  # 4 outer wall of the last leg
        [[-6, 5], [-6, -10]],    # 5 inner wall of the last leg
        [[-2, -2], [2, -2]],     # 6 back wall
    ]
    return featured_world(walls, [0, 1, 2, 3, 4, 5], [[0, 0], [0, 7], [-8, 7], [-8, -1]], 2.0, 3,
                          "U corridor, R = 2 m, two left turns")


def single_wall(length, seed):
    walls = [[[-2, -5], [-2, length + 8]]]
    return featured_world(walls, [0], [[0, 0], [0, length]], 2.0, seed,
                          f"Single featured wall on the left at x = -2, {length} m centerline")


def tau_trace():
    walls = [[[-2, -5], [-2, 30]], [[2, -5], [2, 30]]]
    return {
        "description": "Straight corridor with one feature on the left wall",
        "walls": walls,
        "features": [{"id": 0, "pos": [-2, 6], "wall": 0}],
        "corridor_half_width": 2.0,
        "centerline": [[0, 0], [0, 25]],
    }


def open_world():
    return {"description": "No walls, no features", "walls": [], "features": [],
            "corridor_half_width": 2.0}


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else
                       pathlib.Path(__file__).resolve().parent.parent / "scenarios" / "worlds")
    out.mkdir(parents=True, exist_ok=True)
    worlds = {
        "straight_corridor.json": straight(20, 8, 1),
        "straight_corridor_long.json": straight(80, 8, 11),
        "l_corridor.json": l_corridor(),
        "u_corridor.json": u_corridor(),
        "single_wall.json": single_wall(20, 4),
        "single_wall_long.json": single_wall(60, 14),
        "tau_trace.json": tau_trace(),
        "open_world.json": open_world(),
    }
    for name, world in worlds.items():
        (out / name).write_text(json.dumps(world, indent=1) + "\n")


if __name__ == "__main__":
    main()
