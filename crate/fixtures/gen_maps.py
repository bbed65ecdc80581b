"""Regenerates the fixture maps in fixtures/maps.

The maps are hand-built reconstructions of typical test environments: a
warehouse-like block layout and diagonal passages lined with 45-degree
obstacles. They are not measured copies of any original map.
"""

import math
from pathlib import Path

OUT = Path(__file__).parent / "maps"


def write(name, width_m, height_m, res, occupied):
    w, h = round(width_m / res), round(height_m / res)
    rows = []
    for iy in reversed(range(h)):
        y = (iy + 0.5) * res
        rows.append("".join("#" if occupied((ix + 0.5) * res, y) else "." for ix in range(w)))
    text = f"mapgrid {w} {h} {res} 0 0\n" + "\n".join(rows) + "\n"
    (OUT / name).write_text(text)


def border(x, y, w=20.0, h=20.0, t=0.3):
    return x < t or y < t or x > w - t or y > h - t


def case1(x, y):
    # Shelving blocks on a regular lattice with 2 m aisles, plus two walls
    # that force detours.
    if border(x, y):
        return True
    for cx in (4.0, 8.0, 12.0, 16.0):
        for cy in (4.0, 8.5, 13.0):
            if abs(x - cx) <= 1.0 and abs(y - cy) <= 1.25:
                return True
    if 5.5 <= y <= 6.0 and 0.0 <= x <= 14.0:
        return True
    if 15.0 <= y <= 15.5 and 6.0 <= x <= 20.0:
        return True
    return False


def strip(x, y, ax, ay, bx, by, half_width):
    dx, dy = bx - ax, by - ay
    length = math.hypot(dx, dy)
    ux, uy = dx / length, dy / length
    s = (x - ax) * ux + (y - ay) * uy
    s = min(max(s, 0.0), length)
    px, py = ax + s * ux, ay + s * uy
    return math.hypot(x - px, y - py) <= half_width


def diag1(x, y):
    # A single 45-degree passage corner to corner, with rotated pillars
    # along its walls.
    free = strip(x, y, 1.5, 1.5, 18.5, 18.5, 1.6)
    for cx, cy in ((6.0, 4.5), (12.5, 11.0)):
        u, v = ((x - cx) + (y - cy)) / math.sqrt(2), ((y - cy) - (x - cx)) / math.sqrt(2)
        if abs(u) <= 0.8 and abs(v) <= 0.4:
            free = False
    return not free or border(x, y)


def diag2(x, y):
    # Zig-zag of diagonal passages joined at two bends.
    pts = [(1.5, 2.0), (8.0, 8.5), (13.0, 3.5), (18.5, 9.0), (11.0, 16.5)]
    free = any(strip(x, y, *pts[i], *pts[i + 1], 1.5) for i in range(len(pts) - 1))
    return not free or border(x, y)


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    write("case1.map", 20.0, 20.0, 0.1, case1)
    write("diag1.map", 20.0, 20.0, 0.1, diag1)
    write("diag2.map", 20.0, 20.0, 0.1, diag2)
    write("diag1_fine.map", 20.0, 20.0, 0.05, diag1)
    write("empty20.map", 20.0, 20.0, 0.1, lambda x, y: False)
