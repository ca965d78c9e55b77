"""Offline rendering: map and dispatch-timeline figures, command CSV,
and the terminal box-drawing map.

The figure functions import matplotlib lazily and force the Agg
backend, so they work headless and nothing else in the package pays
the import cost.
"""

from __future__ import annotations

import csv
from datetime import datetime

from .model import MapIcon, MapPolyline


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_map_png(walls: list[MapPolyline], icons: list[MapIcon], path: str) -> None:
    """Top-view floor plan: walls in their configured width/color, icons
    as labelled markers; controllable icons (oid != 0) ring-marked."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(8, 5))
    for wall in walls:
        xs = [v[0] for v in wall.vertices]
        ys = [v[1] for v in wall.vertices]
        r, g, b = wall.rgb
        ax.plot(xs, ys, linewidth=wall.width, color=(r / 255, g / 255, b / 255),
                solid_capstyle="round")
    for icon in sorted(icons, key=lambda i: (i.oid, i.name)):
        x, y = icon.pos
        controllable = icon.oid != 0
        ax.plot([x], [y], marker="o", markersize=9 if controllable else 7,
                color="#2a7ae2" if controllable else "#999999",
                markeredgecolor="#1b4e91" if controllable else "#777777")
        label = f"{icon.name} [{icon.oid}]" if controllable else icon.name
        ax.annotate(label, (x, y), textcoords="offset points", xytext=(6, 6), fontsize=8)
    ax.set_aspect("equal")
    ax.invert_yaxis()  # map origin is the top-left corner
    ax.set_title("Home top view")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


_OUTCOME_COLORS = {"ok": "#2e8b57", "skipped": "#e69500", "error": "#c0392b"}


def render_timeline_png(entries: list[dict], path: str) -> None:
    """Dispatch trace as a scatter over time, one lane per actor."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(9, 4))
    if entries:
        t0 = datetime.fromisoformat(entries[0]["t"])
        actors = sorted({e["actor"] for e in entries})
        lanes = {a: i for i, a in enumerate(actors)}
        for entry in entries:
            seconds = (datetime.fromisoformat(entry["t"]) - t0).total_seconds()
            lane = lanes[entry["actor"]]
            color = _OUTCOME_COLORS.get(entry["outcome"], "#555555")
            ax.plot([seconds], [lane], marker="o", color=color)
            text = entry["verb"]
            if entry.get("param"):
                text += f" ({entry['param']})"
            ax.annotate(text, (seconds, lane), textcoords="offset points",
                        xytext=(4, 6), fontsize=7, rotation=20)
        ax.set_yticks(range(len(actors)))
        ax.set_yticklabels(actors)
        ax.set_xlabel(f"seconds since {entries[0]['t']}")
        ax.margins(x=0.08, y=0.25)
    else:
        ax.text(0.5, 0.5, "empty trace", ha="center", va="center")
        ax.set_xticks([])
        ax.set_yticks([])
    ax.set_title("Command dispatch timeline")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_commands_csv(entries: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "actor", "verb", "param", "outcome", "provenance"])
        for e in entries:
            writer.writerow([
                e["t"], e["actor"], e["verb"], e.get("param", ""),
                e["outcome"], ">".join(e.get("provenance", [])),
            ])


# ---------------------------------------------------------------------------
# terminal map

def _glyph(name: str) -> str:
    words = [w for w in name.split() if w]
    if len(words) >= 2:
        return (words[0][0] + words[1][0]).upper()
    return (name + "?")[:2].upper()


def ascii_map(walls: list[MapPolyline], icons: list[MapIcon], scale: int = 2) -> str:
    """Walls as box-drawing lines on a grid (coordinates divided by
    ``scale``), icons as two-letter glyphs, plus an OID legend."""
    points = [v for w in walls for v in w.vertices] + [i.pos for i in icons]
    if not points:
        return "(empty map)\n"
    cols = max(p[0] for p in points) // scale + 2
    rows = max(p[1] for p in points) // scale + 2
    grid = [[" "] * cols for _ in range(rows)]

    def mark(x: int, y: int, ch: str) -> None:
        if not (0 <= y < rows and 0 <= x < cols):
            return
        cur = grid[y][x]
        if (cur == "─" and ch == "│") or (cur == "│" and ch == "─") or cur == "┼":
            grid[y][x] = "┼"
        else:
            grid[y][x] = ch

    for wall in walls:
        verts = [(x // scale, y // scale) for x, y in wall.vertices]
        for (x1, y1), (x2, y2) in zip(verts, verts[1:]):
            if y1 == y2:
                for x in range(min(x1, x2), max(x1, x2) + 1):
                    mark(x, y1, "─")
            elif x1 == x2:
                for y in range(min(y1, y2), max(y1, y2) + 1):
                    mark(x1, y, "│")
            else:  # rough diagonal
                steps = max(abs(x2 - x1), abs(y2 - y1))
                for i in range(steps + 1):
                    mark(round(x1 + (x2 - x1) * i / steps),
                         round(y1 + (y2 - y1) * i / steps), "·")

    legend = []
    for icon in sorted(icons, key=lambda i: (i.oid, i.name)):
        gx, gy = icon.pos[0] // scale, icon.pos[1] // scale
        glyph = _glyph(icon.name)
        if 0 <= gy < rows and 0 <= gx < cols:
            grid[gy][gx] = glyph[0]
            if gx + 1 < cols:
                grid[gy][gx + 1] = glyph[1]
        if icon.oid != 0:
            legend.append(f"  {glyph}  {icon.name}  (oid {icon.oid}, selectable)")
        else:
            legend.append(f"  {glyph}  {icon.name}")
    body = "\n".join("".join(row).rstrip() for row in grid)
    return body + "\n\n" + "\n".join(legend) + "\n"
