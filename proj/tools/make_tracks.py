#!/usr/bin/env python3
# Copyright 2026 The viab Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the shipped track and obstacle layouts into data/."""

import argparse
import json
import math
import os

STEP = 0.05  # centreline vertex spacing [m]


class Turtle:
    def __init__(self, x, y, heading):
        self.x, self.y, self.h = x, y, heading
        self.pts = [(x, y)]

    def straight(self, length):
        n = max(1, round(length / STEP))
        for _ in range(n):
            self.x += length / n * math.cos(self.h)
            self.y += length / n * math.sin(self.h)
            self.pts.append((self.x, self.y))

    def arc(self, radius, angle):
        """Left turn for angle > 0."""
        n = max(1, round(abs(angle) * radius / STEP))
        sign = 1.0 if angle > 0 else -1.0
        cx = self.x - sign * radius * math.sin(self.h)
        cy = self.y + sign * radius * math.cos(self.h)
        a0 = math.atan2(self.y - cy, self.x - cx)
        for k in range(1, n + 1):
            a = a0 + angle * k / n
            self.pts.append((cx + radius * math.cos(a), cy + radius * math.sin(a)))
        self.h += angle
        self.x, self.y = self.pts[-1]


def s_curve_track():
    r_end, r_s, theta = 2.2, 2.0, 0.5
    length = 4.6
    t = Turtle(2.2, 0.0, 0.0)
    t.straight(length)
    t.arc(r_end, math.pi)
    bump = 4.0 * r_s * math.sin(theta)
    t.straight((length - bump) / 2)
    t.arc(r_s, theta)
    t.arc(r_s, -2.0 * theta)
    t.arc(r_s, theta)
    t.straight((length - bump) / 2)
    t.arc(r_end, math.pi)
    pts = t.pts[:-1]  # the last vertex closes onto the first
    gap = math.dist(t.pts[-1], t.pts[0])
    assert gap < 1e-9, gap
    return [[round(x, 6) + 0.0, round(y, 6) + 0.0] for x, y in pts]


def box(cx, cy, hx, hy):
    return [[cx - hx, cy - hy], [cx + hx, cy - hy], [cx + hx, cy + hy], [cx - hx, cy + hy]]


def walls(centerline, spacing, thickness, half_length):
    """Thin walls across the track every `spacing` metres of centreline."""
    pts = centerline + [centerline[0]]
    out, next_at, s = [], spacing / 2, 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        seg = math.dist((x0, y0), (x1, y1))
        tx, ty = (x1 - x0) / seg, (y1 - y0) / seg
        while next_at <= s + seg:
            a = (next_at - s) / seg
            cx, cy = x0 + a * (x1 - x0), y0 + a * (y1 - y0)
            wall = []
            for along, across in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
                dx, dy = along * thickness / 2, across * half_length
                wall.append([round(cx + dx * tx - dy * ty, 6) + 0.0,
                             round(cy + dx * ty + dy * tx, 6) + 0.0])
            out.append(wall)
            next_at += spacing
        s += seg
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    track = {
        "format": "viab-track",
        "version": 1,
        "half_width": 0.6,
        "progress_pieces": 488,
        "centerline": s_curve_track(),
        "obstacles": [],
    }
    layouts = {
        # A small block near the outer edge of the bottom straight.
        "obstacles_easy.json": [box(4.5, -0.45, 0.12, 0.1)],
        # Two staggered blocks on the bottom straight forcing a slalom.
        "obstacles_hard.json": [box(3.4, -0.3, 0.12, 0.3), box(5.6, 0.3, 0.12, 0.3)],
        # A wall across the full width of the bottom straight.
        "obstacles_wall.json": [box(4.5, 0.0, 0.1, 0.8)],
        # Walls all around the loop, closer together than a U-turn needs.
        "obstacles_block.json": walls(track["centerline"], 0.55, 0.06, 0.8),
    }
    with open(os.path.join(args.out, "track_scurve.json"), "w") as f:
        json.dump(track, f, indent=1)
        f.write("\n")
    for name, obstacles in layouts.items():
        with open(os.path.join(args.out, name), "w") as f:
            json.dump({"format": "viab-obstacles", "version": 1, "obstacles": obstacles},
                      f, indent=1)
            f.write("\n")


if __name__ == "__main__":
    main()
