#!/usr/bin/env python3
"""Builds the bundled mini-benchmark and its golden outputs.

Everything here is computed independently of the Rust crate: georeferencing,
nearest-neighbour ordering, waypoint-file formatting, trajectory lengths and
the three RMSE metrics (DTW by exhaustive enumeration of warping paths, KNN by
full scan).

Run from this directory:  python3 gen_testdata.py
"""

import json
import math
import random
from pathlib import Path

from PIL import Image, ImageDraw

HERE = Path(__file__).resolve().parent
BENCH = HERE / "mini-benchmark"
EMPTY = HERE / "empty-scene"
GOLDEN = HERE / "golden"

R = 6_371_000.0
SIZE = 500
ALT = 100.0
PROMPT = (
    "Plan a quadcopter survey that visits every building at 100 m altitude, "
    "then return home and land where it took off.\n"
)

SCENES = {
    "scene_a": {
        "top_left": (40.0042, -100.0031),
        "bottom_right": (39.9997, -99.9972),
        "buildings": [(22.4, 31.0), (61.8, 18.2), (74.0, 66.6), (35.5, 80.1)],
        # (pixel offset in px, visiting order) for the hand-made plan
        "truth_jitter": [(4, -3), (-5, 2), (3, 6), (-2, -4)],
        "truth_order": [0, 1, 2, 3],
        "truth_extra": [],
    },
    "scene_b": {
        "top_left": (33.4512, -112.0741),
        "bottom_right": (33.4470, -112.0691),
        "buildings": [(48.0, 52.5), (12.6, 70.2), (83.3, 40.4)],
        "truth_jitter": [(-6, 5), (2, -2), (5, 5)],
        "truth_order": [1, 0, 2],
        "truth_extra": [],
    },
    "scene_c": {
        "top_left": (45.5231, -122.6789),
        "bottom_right": (45.5186, -122.6725),
        "buildings": [(30.2, 28.8), (55.0, 45.5), (70.7, 72.1), (20.9, 62.4), (88.1, 15.0)],
        "truth_jitter": [(3, 3), (-4, 1), (2, -5), (6, 2), (-3, -3)],
        "truth_order": [0, 4, 1, 2, 3],
        # the operator added a detour point over open ground
        "truth_extra": [(50.0, 90.0)],
    },
}


def pixel_to_geo(x, y, tl, br):
    fy = y / SIZE
    fx = x / SIZE
    return (tl[0] + fy * (br[0] - tl[0]), tl[1] + fx * (br[1] - tl[1]))


def haversine(a, b):
    p1, p2 = math.radians(a[0]), math.radians(b[0])
    dp = math.radians(b[0] - a[0])
    dl = math.radians(b[1] - a[1])
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * R * math.asin(min(1.0, math.sqrt(h)))


def greedy_order(points, home):
    remaining = list(points)
    out = []
    cur = home
    while remaining:
        best = min(range(len(remaining)), key=lambda i: (haversine(cur, remaining[i]), i))
        cur = remaining.pop(best)
        out.append(cur)
    return out


def wpl_line(seq, frame, cmd, lat, lon, alt):
    cur = 1 if seq == 0 else 0
    z = "0.000000"
    return f"{seq}\t{cur}\t{frame}\t{cmd}\t{z}\t{z}\t{z}\t{z}\t{lat:.8f}\t{lon:.8f}\t{alt:.6f}\t1\n"


def survey_wpl(home, targets, takeoff_at_home=True):
    lines = ["QGC WPL 110\n", wpl_line(0, 0, 16, home[0], home[1], 0.0)]
    t = home if takeoff_at_home else (0.0, 0.0)
    lines.append(wpl_line(1, 3, 22, t[0], t[1], ALT))
    for p in targets:
        lines.append(wpl_line(len(lines) - 1, 3, 16, p[0], p[1], ALT))
    n = len(lines) - 1
    lines.append(wpl_line(n, 3, 20, 0.0, 0.0, 0.0))
    lines.append(wpl_line(n + 1, 3, 21, 0.0, 0.0, 0.0))
    return "".join(lines)


def parse_trajectory(text):
    rows = [l.split("\t") for l in text.splitlines()[1:] if l.strip()]
    home = (float(rows[0][8]), float(rows[0][9]))
    pts = []
    for r in rows:
        cmd = int(r[3])
        pos = (float(r[8]), float(r[9]))
        if cmd == 16:
            pts.append(pos)
        elif cmd == 22 and pos != (0.0, 0.0):
            pts.append(pos)
        elif cmd == 20:
            pts.append(home)
    out = []
    for p in pts:
        if not out or out[-1] != p:
            out.append(p)
    return out


def project(p, origin):
    x = math.radians(p[1] - origin[1]) * R * math.cos(math.radians(origin[0]))
    y = math.radians(p[0] - origin[0]) * R
    return (x, y)


def sq(a, b):
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


def dtw_brute(g, t):
    n, m = len(g), len(t)
    best = [math.inf, 0]

    def walk(i, j, cost, cells):
        cost += sq(g[i], t[j])
        cells += 1
        if (i, j) == (n - 1, m - 1):
            if cost < best[0]:
                best[0], best[1] = cost, cells
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, cost, cells)
        if i + 1 < n:
            walk(i + 1, j, cost, cells)
        if j + 1 < m:
            walk(i, j + 1, cost, cells)

    walk(0, 0, 0.0, 0)
    return math.sqrt(best[0] / best[1])


def metrics(gen_text, truth_text):
    gt, tt = parse_trajectory(gen_text), parse_trajectory(truth_text)
    origin = tt[0]
    g = [project(p, origin) for p in gt]
    t = [project(p, origin) for p in tt]
    k = min(len(g), len(t))
    return {
        "generated_length_m": sum(haversine(a, b) for a, b in zip(gt, gt[1:])),
        "truth_length_m": sum(haversine(a, b) for a, b in zip(tt, tt[1:])),
        "generated_points": len(gt),
        "truth_points": len(tt),
        "knn": math.sqrt(sum(min(sq(p, q) for q in t) for p in g) / len(g)),
        "dtw": dtw_brute(g, t),
        "sequential": math.sqrt(sum(sq(g[i], t[i]) for i in range(k)) / k),
    }


def draw_scene(path, buildings, seed):
    rng = random.Random(seed)
    img = Image.new("RGB", (SIZE, SIZE), (96, 128, 72))
    d = ImageDraw.Draw(img)
    for _ in range(6):
        x, y = rng.randrange(SIZE), rng.randrange(SIZE)
        d.line([(x, 0), (SIZE - x, SIZE)], fill=(150, 150, 150), width=8)
        d.line([(0, y), (SIZE, SIZE - y)], fill=(150, 150, 150), width=6)
    for px, py in buildings:
        cx, cy = px / 100 * SIZE, py / 100 * SIZE
        w, h = rng.randrange(14, 30), rng.randrange(14, 30)
        d.rectangle([cx - w, cy - h, cx + w, cy + h], fill=(190, 180, 170), outline=(60, 60, 60))
    img.save(path, optimize=True)


def write(path, text):
    path.write_text(text, newline="\n")


def meta_json(tl, br):
    return json.dumps(
        {
            "top_left": {"lat": tl[0], "lon": tl[1]},
            "bottom_right": {"lat": br[0], "lon": br[1]},
            "width_px": SIZE,
            "height_px": SIZE,
        },
        indent=2,
    ) + "\n"


def main():
    for d in (BENCH, EMPTY, GOLDEN):
        d.mkdir(exist_ok=True)
    write(BENCH / "prompt.txt", PROMPT)
    write(EMPTY / "prompt.txt", PROMPT)
    goldens = {}
    for n, (name, s) in enumerate(sorted(SCENES.items())):
        tl, br = s["top_left"], s["bottom_right"]
        draw_scene(BENCH / f"{name}.png", s["buildings"], n)
        write(BENCH / f"{name}.meta.json", meta_json(tl, br))
        write(
            BENCH / f"{name}.detections.json",
            json.dumps({"building": [list(b) for b in s["buildings"]]}, indent=2) + "\n",
        )

        home = pixel_to_geo(0.1 * SIZE, 0.1 * SIZE, tl, br)
        # same arithmetic as the markup parser: percent / 100 * size
        targets = [pixel_to_geo(x / 100 * SIZE, y / 100 * SIZE, tl, br) for x, y in s["buildings"]]
        generated = survey_wpl(home, greedy_order(targets, home))
        write(GOLDEN / f"{name}.waypoints", generated)

        truth_pts = []
        for i in s["truth_order"]:
            (x, y), (jx, jy) = s["buildings"][i], s["truth_jitter"][i]
            truth_pts.append(pixel_to_geo(x / 100 * SIZE + jx, y / 100 * SIZE + jy, tl, br))
        for x, y in s["truth_extra"]:
            truth_pts.append(pixel_to_geo(x / 100 * SIZE, y / 100 * SIZE, tl, br))
        truth = survey_wpl(home, truth_pts, takeoff_at_home=False)
        write(BENCH / f"{name}.truth.waypoints", truth)
        goldens[name] = metrics(generated, truth)

    write(GOLDEN / "evaluate.json", json.dumps(goldens, indent=2, sort_keys=True) + "\n")

    tl, br = (41.0030, -96.0040), (40.9985, -95.9981)
    draw_scene(EMPTY / "bare_field.png", [], 7)
    write(EMPTY / "bare_field.meta.json", meta_json(tl, br))
    write(EMPTY / "bare_field.detections.json", json.dumps({"building": []}, indent=2) + "\n")


if __name__ == "__main__":
    main()
