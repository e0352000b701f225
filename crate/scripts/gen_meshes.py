"""Generate the mesh files shipped under meshes/.

Annulus family: Delaunay triangulations of the disc of radius 1 centered at
the origin with a circular hole of radius 0.4 centered at (0.25, 0.25).
Boundary edges are written as arcs of the corresponding circle.

Voronoi fixtures: Lloyd-relaxed Voronoi cells clipped to the unit square.

Usage: python3 scripts/gen_meshes.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay, Voronoi
from shapely.geometry import Polygon, box

OUTER = ((0.0, 0.0), 1.0)
HOLE = ((0.25, 0.25), 0.4)


def circle_points(center, radius, n, phase=0.0):
    t = phase + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def annulus(h, seed, smooth=10):
    rng = np.random.default_rng(seed)
    (co, ro), (ch, rh) = OUTER, HOLE
    n_out = int(np.ceil(2.0 * np.pi * ro / h))
    n_hole = int(np.ceil(2.0 * np.pi * rh / h))
    outer = circle_points(co, ro, n_out)
    hole = circle_points(ch, rh, n_hole, phase=0.5)
    # Hexagonal lattice with a small jitter, kept away from both circles.
    xs = np.arange(-1.0, 1.0 + h, h)
    ys = np.arange(-1.0, 1.0 + h, h * np.sqrt(3.0) / 2.0)
    pts = []
    for j, y in enumerate(ys):
        for x in xs:
            pts.append((x + 0.5 * h * (j % 2), y))
    pts = np.array(pts) + rng.uniform(-0.08 * h, 0.08 * h, size=(len(pts), 2))
    r_out = np.hypot(pts[:, 0] - co[0], pts[:, 1] - co[1])
    r_hole = np.hypot(pts[:, 0] - ch[0], pts[:, 1] - ch[1])
    keep = (r_out < ro - 0.45 * h) & (r_hole > rh + 0.45 * h)
    verts = np.vstack([outer, hole, pts[keep]])
    n_fixed = n_out + n_hole

    def triangulate(v):
        t = Delaunay(v).simplices
        cent = v[t].mean(axis=1)
        inside = (np.hypot(cent[:, 0] - co[0], cent[:, 1] - co[1]) < ro) & (
            np.hypot(cent[:, 0] - ch[0], cent[:, 1] - ch[1]) > rh
        )
        return t[inside]

    # Laplacian smoothing of the free nodes evens out the band next to the circles.
    for _ in range(smooth):
        tri = triangulate(verts)
        acc = np.zeros_like(verts)
        deg = np.zeros(len(verts))
        for i in range(3):
            a, b = tri[:, i], tri[:, (i + 1) % 3]
            np.add.at(acc, a, verts[b])
            np.add.at(acc, b, verts[a])
            np.add.at(deg, a, 1)
            np.add.at(deg, b, 1)
        free = np.arange(len(verts)) >= n_fixed
        verts[free] = acc[free] / deg[free, None]
    tri = triangulate(verts)
    # Counter-clockwise orientation.
    a, b, c = verts[tri[:, 0]], verts[tri[:, 1]], verts[tri[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    tri[cross < 0] = tri[cross < 0][:, [0, 2, 1]]

    on_circle = np.full(len(verts), -1)
    on_circle[:n_out] = 0
    on_circle[n_out : n_out + n_hole] = 1
    count = {}
    for t in tri:
        for i in range(3):
            e = tuple(sorted((t[i], t[(i + 1) % 3])))
            count[e] = count.get(e, 0) + 1
    arcs = []
    for t in tri:
        for i in range(3):
            va, vb = t[i], t[(i + 1) % 3]
            if count[tuple(sorted((va, vb)))] == 1:
                g = on_circle[va]
                if g < 0 or on_circle[vb] != g:
                    raise RuntimeError(f"boundary edge {va}-{vb} is not on a single circle")
                arcs.append((va, vb, g))
    if len(arcs) != n_out + n_hole:
        raise RuntimeError("boundary circles are not resolved by the triangulation")
    return verts, [list(t) for t in tri], [OUTER, HOLE], arcs


def voronoi_square(n_cells, seed, lloyd=30):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 1.0, size=(n_cells, 2))
    square = box(0.0, 0.0, 1.0, 1.0)
    for _ in range(lloyd + 1):
        # Mirror the seeds across the four sides so that every cell is bounded.
        mirrored = [pts]
        for axis, value in ((0, 0.0), (0, 1.0), (1, 0.0), (1, 1.0)):
            m = pts.copy()
            m[:, axis] = 2.0 * value - m[:, axis]
            mirrored.append(m)
        vor = Voronoi(np.vstack(mirrored))
        polys = []
        for i in range(len(pts)):
            region = vor.regions[vor.point_region[i]]
            poly = Polygon(vor.vertices[region]).intersection(square)
            polys.append(poly)
        pts = np.array([[p.centroid.x, p.centroid.y] for p in polys])
    index = {}
    verts = []

    def vid(x, y):
        key = (round(x, 9), round(y, 9))
        if key not in index:
            index[key] = len(verts)
            verts.append((float(key[0]), float(key[1])))
        return index[key]

    cells = []
    for poly in polys:
        poly = poly.simplify(0.0)
        coords = list(poly.exterior.coords)[:-1]
        if not poly.exterior.is_ccw:
            coords = coords[::-1]
        loop = []
        for x, y in coords:
            v = vid(x, y)
            if not loop or loop[-1] != v:
                loop.append(v)
        if loop[0] == loop[-1]:
            loop.pop()
        cells.append(loop)
    return np.array(verts), cells, [], []


def write(path, verts, cells, geoms, arcs, header):
    with open(path, "w") as f:
        f.write(f"# {header}\n")
        f.write(f"vertices {len(verts)}\n")
        for x, y in verts:
            f.write(f"{x:.17g} {y:.17g}\n")
        if geoms:
            f.write(f"geometries {len(geoms)}\n")
            for (cx, cy), r in geoms:
                f.write(f"circle {cx:.17g} {cy:.17g} {r:.17g}\n")
        f.write(f"cells {len(cells)}\n")
        for c in cells:
            f.write(f"{len(c)} " + " ".join(str(v) for v in c) + "\n")
        if arcs:
            f.write(f"arcs {len(arcs)}\n")
            for va, vb, g in arcs:
                f.write(f"{va} {vb} {g}\n")


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "meshes"
    out.mkdir(parents=True, exist_ok=True)
    for level, h in enumerate([0.1016, 0.0508, 0.0254]):
        verts, cells, geoms, arcs = annulus(h, seed=7 + level)
        write(out / f"annulus_{level}.msh", verts, cells, geoms, arcs,
              f"annulus with hole, level {level}, {len(cells)} curved-boundary triangles")
        print(f"annulus_{level}: {len(cells)} cells")
    for n in (64, 256):
        verts, cells, geoms, arcs = voronoi_square(n, seed=n)
        write(out / f"voronoi_{n}.msh", verts, cells, geoms, arcs, f"Lloyd-relaxed Voronoi mesh of the unit square, {n} cells")
        print(f"voronoi_{n}: {len(cells)} cells")


if __name__ == "__main__":
    main()
