#!/usr/bin/env python3
"""Generates the synthetic DEM and zone polygons used by the shipped scenarios.

The terrain is a smooth sum of hills and valleys on a gentle regional slope,
3000 m x 2500 m at 10 m spacing. Zone polygons are irregular outlines scaled so
their areas match the mission briefing figures to under a square metre.

Usage: python3 tools/make_terrain.py [output_dir]   (default: scenarios/)
"""

import json
import math
import sys
from pathlib import Path

NCOLS, NROWS, CELL = 300, 250, 10.0
X0, Y0 = 0.0, 0.0

HILLS = [  # (x, y, sigma, amplitude)
    (700, 1900, 380, 95), (1500, 1250, 450, 70), (2350, 1900, 330, 85),
    (2200, 600, 420, 110), (900, 700, 300, -40), (1900, 2200, 260, 45),
    (400, 1200, 250, 55), (2700, 1200, 350, -35), (1250, 350, 300, 50),
]

ZONES = {  # id: (people, target area m^2, centre, base outline)
    "A": (25, 432734.0, (820, 1450), [(-1, -0.8), (0.2, -1.05), (1.05, -0.55), (0.95, 0.6), (0.1, 1.0), (-0.9, 0.75)]),
    "B": (27, 470233.0, (1800, 1820), [(-1.1, -0.5), (-0.2, -0.9), (0.9, -0.7), (1.1, 0.4), (0.3, 0.85), (-0.8, 0.7)]),
    "C": (26, 613709.0, (1850, 820), [(-1.0, -0.6), (0.0, -0.95), (1.0, -0.7), (1.05, 0.5), (0.2, 0.75), (-0.95, 0.65)]),
}


def elevation(x, y):
    z = 420.0 + 0.035 * x + 0.02 * y
    for hx, hy, s, a in HILLS:
        z += a * math.exp(-((x - hx) ** 2 + (y - hy) ** 2) / (2 * s * s))
    return z


def area(poly):
    s = 0.0
    for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
        s += x0 * y1 - x1 * y0
    return abs(s) / 2


def zone_polygon(target, centre, outline):
    k = math.sqrt(target / area(outline))
    poly = [(round(centre[0] + k * u, 3), round(centre[1] + k * v, 3)) for u, v in outline]
    assert abs(area(poly) - target) < 1.0, (area(poly), target)
    return poly


def write_terrain(path):
    with open(path, "w") as f:
        f.write(f"ncols {NCOLS}\nnrows {NROWS}\nxllcorner {X0}\nyllcorner {Y0}\n"
                f"cellsize {CELL}\nNODATA_value -9999\n")
        for r in range(NROWS):
            y = Y0 + (NROWS - r - 0.5) * CELL
            f.write(" ".join(f"{elevation(X0 + (c + 0.5) * CELL, y):.2f}" for c in range(NCOLS)))
            f.write("\n")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "scenarios")
    out.mkdir(parents=True, exist_ok=True)
    write_terrain(out / "terrain.asc")
    zones = []
    for zid, (people, target, centre, outline) in ZONES.items():
        zones.append({"id": zid, "person_count": people,
                      "polygon": [list(p) for p in zone_polygon(target, centre, outline)]})
    (out / "zones.json").write_text(json.dumps(zones, indent=2) + "\n")


if __name__ == "__main__":
    main()
