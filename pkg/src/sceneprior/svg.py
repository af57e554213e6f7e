"""Static SVG rendering of a trajectory over a house map."""

from __future__ import annotations

CELL = 20

_WALL = "#3b3b3b"
_FLOOR = "#f4f1ea"
_PATH = "#1f5fbf"
_GOAL = "#d0342c"
_VIEW = "#f2b8b5"
_OBJ = "#6b8e23"


def trajectory_record(house, episode, result) -> dict:
    """Self-contained JSON record for :func:`render_trajectory`."""
    goal = episode.goal(house)
    walls = [[x, y] for y in range(house.height) for x in range(house.width) if not house.is_free((x, y))]
    out = {
        "house": house.name,
        "episode_id": episode.episode_id,
        "width": house.width,
        "height": house.height,
        "walls": walls,
        "objects": [[o.cell[0], o.cell[1], o.name] for o in house.objects],
        "goal": list(goal.cell),
        "viewpoints": [list(v) for v in goal.viewpoints],
        "poses": [list(p) for p in result.poses],
        "success": bool(result.success),
    }
    if result.beliefs:
        out["beliefs"] = [list(b) for b in result.beliefs]
    return out


def _f(v: float) -> str:
    s = f"{v:.1f}"
    return s[:-2] if s.endswith(".0") else s


def render_trajectory(record: dict) -> str:
    poses = record.get("poses") or []
    cells = [p[:2] for p in poses]
    points = cells + [record.get("goal") or []] + list(record.get("viewpoints", []))
    points = [p for p in points if p]
    width = record.get("width") or (max((p[0] for p in points), default=0) + 1)
    height = record.get("height") or (max((p[1] for p in points), default=0) + 1)
    W, H = width * CELL, height * CELL

    def cx(x):
        return x * CELL + CELL / 2

    def cy(y):  # SVG y grows downward; world +y is up
        return (height - 1 - y) * CELL + CELL / 2

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
             f'<rect x="0" y="0" width="{W}" height="{H}" fill="{_FLOOR}"/>']
    for x, y in record.get("walls", []):
        lines.append(f'<rect x="{x * CELL}" y="{(height - 1 - y) * CELL}" width="{CELL}" height="{CELL}" fill="{_WALL}"/>')
    for x, y in record.get("viewpoints", []):
        lines.append(f'<rect x="{x * CELL}" y="{(height - 1 - y) * CELL}" width="{CELL}" height="{CELL}" fill="{_VIEW}"/>')
    for obj in record.get("objects", []):
        lines.append(f'<circle cx="{_f(cx(obj[0]))}" cy="{_f(cy(obj[1]))}" r="4" fill="{_OBJ}"><title>{obj[2]}</title></circle>')
    if record.get("goal"):
        gx, gy = record["goal"]
        lines.append(f'<circle cx="{_f(cx(gx))}" cy="{_f(cy(gy))}" r="7" fill="none" stroke="{_GOAL}" stroke-width="2"/>')
    if len(cells) > 1:
        pts = " ".join(f"{_f(cx(x))},{_f(cy(y))}" for x, y in cells)
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{_PATH}" stroke-width="2"/>')
    if cells:
        sx, sy = cells[0]
        lines.append(f'<rect class="start" x="{_f(cx(sx) - 5)}" y="{_f(cy(sy) - 5)}" width="10" height="10" fill="{_PATH}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
