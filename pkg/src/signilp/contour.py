"""Boundary tracing and polygon simplification on binary masks."""
from __future__ import annotations

import math

import numpy as np

# Moore neighbourhood, clockwise starting west (x, y offsets; y grows down)
_MOORE = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)]


def trace_boundary(mask: np.ndarray) -> list[tuple[int, int]]:
    """Outer boundary of the region containing the first set pixel in scan order.

    Moore-neighbour tracing with Jacob's stopping criterion.  Returns (x, y)
    pixel coordinates in clockwise order; a single pixel yields one point.
    """
    pad = np.pad(np.asarray(mask, dtype=bool), 1)
    ys, xs = np.nonzero(pad)
    if len(ys) == 0:
        return []
    start = (int(xs[0]), int(ys[0]))  # nonzero() is row-major: topmost, then leftmost
    # we entered start from the west, so the backtrack neighbour is index 0
    out = [start]
    cur, back = start, 0
    first_move = None
    while True:
        found = None
        for k in range(1, 9):
            d = (back + k) % 8
            nx, ny = cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1]
            if pad[ny, nx]:
                found = (nx, ny, d)
                break
        if found is None:  # isolated pixel
            break
        nx, ny, d = found
        # the neighbour checked just before d is background; restart from it
        prev = (d + 7) % 8
        px, py = cur[0] + _MOORE[prev][0], cur[1] + _MOORE[prev][1]
        nxt = (nx, ny)
        move = (cur, nxt)
        if first_move is None:
            first_move = move
        elif move == first_move:
            break
        # backtrack direction as seen from the new pixel
        back = _MOORE.index((px - nx, py - ny)) if (px - nx, py - ny) in _MOORE else 0
        cur = nxt
        out.append(cur)
    if len(out) > 1 and out[-1] == out[0]:
        out.pop()
    return [(x - 1, y - 1) for x, y in out]


def _seg_dist(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    n = float(np.hypot(*ab))
    if n == 0:
        return np.hypot(*(p - a).T)
    return np.abs(ab[0] * (p[:, 1] - a[1]) - ab[1] * (p[:, 0] - a[0])) / n


def douglas_peucker(points, epsilon: float) -> list[tuple[float, float]]:
    """Open-curve simplification; endpoints are kept."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        return [(float(p[0]), float(p[1])) for p in pts]
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        d = _seg_dist(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > epsilon:
            m = i + 1 + k
            keep[m] = True
            stack.append((i, m))
            stack.append((m, j))
    return [(float(p[0]), float(p[1])) for p in pts[keep]]


def simplify_closed(points, epsilon: float) -> list[tuple[float, float]]:
    """Douglas-Peucker on a closed boundary.

    The curve is split at the point farthest from the first point, each half
    is simplified, and any vertex still within ``epsilon`` of the chord
    joining its neighbours is dropped (this removes the arbitrary start).
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 4:
        return [(float(p[0]), float(p[1])) for p in pts]
    far = int(np.argmax(np.hypot(*(pts - pts[0]).T)))
    a = douglas_peucker(pts[:far + 1], epsilon)
    b = douglas_peucker(np.vstack([pts[far:], pts[:1]]), epsilon)
    poly = a[:-1] + b[:-1]
    changed = True
    while changed and len(poly) > 3:
        changed = False
        for i in range(len(poly)):
            p, q, r = (np.asarray(poly[i - 1]), np.asarray(poly[i]), np.asarray(poly[(i + 1) % len(poly)]))
            if _seg_dist(q[None, :], p, r)[0] <= epsilon:
                del poly[i]
                changed = True
                break
    return poly


def perimeter(points) -> float:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    return float(np.hypot(*(np.roll(pts, -1, axis=0) - pts).T).sum())


def radius_ratio(points) -> float:
    """max/min distance of boundary points from their centroid."""
    pts = np.asarray(points, dtype=float)
    r = np.hypot(*(pts - pts.mean(axis=0)).T)
    return float(r.max() / max(r.min(), 1e-9))


def edge_angles(poly) -> list[float]:
    """Direction of each polygon edge in degrees, folded into [0, 180)."""
    out = []
    for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
        out.append(math.degrees(math.atan2(y1 - y0, x1 - x0)) % 180.0)
    return out


def is_simple(poly) -> bool:
    """True when no two non-adjacent edges cross."""
    n = len(poly)
    if n < 3:
        return False

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 1e-12) - (v < -1e-12)

    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            a, b = edges[i]
            c, d = edges[j]
            if orient(a, b, c) * orient(a, b, d) < 0 and orient(c, d, a) * orient(c, d, b) < 0:
                return False
    return True
