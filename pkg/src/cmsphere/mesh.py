"""Icosahedral geodesic triangulations with six-way macro-element splits.

Each macro triangle carries the geometry needed by the quadratic spline
elements: a barycenter, a split point on every edge, and prefactored
inverse vertex matrices for barycentric solves on the macro triangle and
on each of its six sub-triangles. Split points are shared through a global
edge table so neighboring triangles see bit-identical geometry.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTriangle, LocationFailure, RefinementTooDeep
from .geom import cart_to_sph, great_circle_distance, radial_project, vertex_frames

MAX_LEVEL = 10

# Six sub-triangles of a macro element, as indices into the entity list
# [corner0, corner1, corner2, split01, split12, split20, center].
SUB_VERTS = np.array(
    [
        [0, 3, 6],
        [1, 6, 3],
        [6, 1, 4],
        [4, 6, 2],
        [5, 6, 2],
        [6, 5, 0],
    ]
)

# Entity indices of the spoke endpoints in counterclockwise order around
# the barycenter; the wedge between spokes j and j+1 is sub-triangle j.
SPOKES = np.array([0, 3, 1, 4, 2, 5])

# Rows of the coefficient vector (length 19) that form each sub-triangle's
# quadratic in the order (c200, c020, c002, c110, c011, c101).
SUB_COEF = np.array(
    [
        [0, 12, 18, 3, 15, 4],
        [1, 18, 12, 7, 15, 8],
        [18, 1, 13, 7, 6, 16],
        [13, 18, 2, 16, 10, 11],
        [14, 18, 2, 17, 10, 9],
        [18, 14, 0, 17, 5, 4],
    ]
)

_BARY_TOL = 1e-12
_GRID_SENTINEL = np.iinfo(np.int64).max


@dataclass
class Location:
    """Result of point location: macro triangle, sub-triangle, coordinates."""

    triangle: int
    sub: int
    bary: np.ndarray


@dataclass
class SphereMesh:
    level: int
    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    adjacency: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    centers: np.ndarray
    splits: np.ndarray
    macro_inv: np.ndarray
    sub_inv: np.ndarray
    spoke_normals: np.ndarray
    rs: np.ndarray
    center_bary: np.ndarray
    grid_start: np.ndarray
    spline_geom: object = field(default=None, repr=False, compare=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]


def _icosahedron():
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts = radial_project(verts)
    tris = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    # Enforce outward (counterclockwise seen from outside) orientation.
    dets = np.linalg.det(verts[tris])
    flip = dets < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return verts, tris


def _edge_table(n_verts, tris):
    """Unique edges, per-triangle edge ids, and sorted endpoint pairs.

    Edge slot j of a triangle joins its vertices j and (j+1) % 3.
    """
    slots = tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    lo = slots.min(axis=1)
    hi = slots.max(axis=1)
    keys = lo * np.int64(n_verts) + hi
    uniq, inverse = np.unique(keys, return_inverse=True)
    edges = np.stack([uniq // n_verts, uniq % n_verts], axis=1)
    tri_edges = inverse.reshape(-1, 3)
    return edges, tri_edges


def _refine_once(verts, tris):
    n_verts = verts.shape[0]
    edges, tri_edges = _edge_table(n_verts, tris)
    mids = radial_project(verts[edges[:, 0]] + verts[edges[:, 1]])
    mid_idx = n_verts + np.arange(edges.shape[0], dtype=np.int64)
    m = mid_idx[tri_edges]
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    m01, m12, m20 = m[:, 0], m[:, 1], m[:, 2]
    children = np.stack(
        [
            np.stack([v0, m01, m20], axis=1),
            np.stack([v1, m12, m01], axis=1),
            np.stack([v2, m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    return np.vstack([verts, mids]), children


def _adjacency(n_tris, tri_edges):
    """Neighbor triangle across each edge slot."""
    flat = tri_edges.ravel()
    order = np.argsort(flat, kind="stable")
    # Every edge of a closed surface appears in exactly two slots; after
    # sorting by edge id the two occurrences are adjacent.
    paired = order.reshape(-1, 2)
    owner = paired // 3
    adj = np.empty(n_tris * 3, dtype=np.int64)
    adj[paired[:, 0]] = owner[:, 1]
    adj[paired[:, 1]] = owner[:, 0]
    return adj.reshape(-1, 3)


def _edge_split_points(verts, edges, edge_tris_pair, centers):
    """Split point on each edge, shared by both adjacent macro triangles.

    The quadratic macro-elements are C1 across a shared edge only when the
    split point lies on the great circle through the barycenters of the two
    adjacent triangles, so each split is the intersection of that circle
    with the edge's own great circle, taken on the arc between the
    endpoints. On the base icosahedron this coincides with the normalized
    chord midpoint; on refined meshes it differs at order h^2.
    """
    a = verts[edges[:, 0]]
    b = verts[edges[:, 1]]
    c1 = centers[edge_tris_pair[:, 0]]
    c2 = centers[edge_tris_pair[:, 1]]
    line = np.cross(np.cross(c1, c2), np.cross(a, b))
    sign = np.sum(line * (a + b), axis=-1)
    if np.any(np.abs(sign) < 1e-14) or np.any(
        np.linalg.norm(line, axis=-1) < 1e-14
    ):
        raise DegenerateTriangle("edge and barycenter great circles coincide")
    return radial_project(np.sign(sign)[:, None] * line)


def _edge_triangle_pairs(tri_edges):
    """The two triangles incident to each edge, lower slot first."""
    flat = tri_edges.ravel()
    order = np.argsort(flat, kind="stable")
    return (order.reshape(-1, 2)) // 3


def _edge_weights(splits, a, b):
    """Weights (r, s) with split = r a + s b for unit a, b on one great circle."""
    d = np.sum(a * b, axis=-1)
    den = 1.0 - d * d
    if np.any(den < 1e-12):
        raise DegenerateTriangle("edge endpoints are (anti)parallel")
    pa = np.sum(splits * a, axis=-1)
    pb = np.sum(splits * b, axis=-1)
    r = (pa - d * pb) / den
    s = (pb - d * pa) / den
    return r, s


def _build_grid(centers, cells_theta, cells_lam):
    lam, theta = cart_to_sph(centers)
    it = np.clip((theta / np.pi * cells_theta).astype(np.int64), 0, cells_theta - 1)
    il = np.clip(
        (lam / (2.0 * np.pi) * cells_lam).astype(np.int64), 0, cells_lam - 1
    )
    grid = np.full((cells_theta, cells_lam), _GRID_SENTINEL, dtype=np.int64)
    np.minimum.at(grid, (it, il), np.arange(centers.shape[0], dtype=np.int64))
    # Flood empty cells from filled neighbors (wrapping in longitude).
    while np.any(grid == _GRID_SENTINEL):
        best = grid.copy()
        for shifted in (
            np.roll(grid, 1, axis=1),
            np.roll(grid, -1, axis=1),
            np.vstack([grid[:1], grid[:-1]]),
            np.vstack([grid[1:], grid[-1:]]),
        ):
            best = np.minimum(best, shifted)
        grid = np.where(grid == _GRID_SENTINEL, best, grid)
    return grid


def build_icosahedral(level):
    """Build the level-times refined icosahedral triangulation.

    Parameters
    ----------
    level : int
        Number of 4-to-1 refinements, between 0 and MAX_LEVEL.

    Returns
    -------
    SphereMesh
    """
    if not 0 <= level <= MAX_LEVEL:
        raise RefinementTooDeep(
            "refinement level %r outside [0, %d]" % (level, MAX_LEVEL)
        )
    verts, tris = _icosahedron()
    for _ in range(level):
        verts, tris = _refine_once(verts, tris)

    edges, tri_edges = _edge_table(verts.shape[0], tris)
    adjacency = _adjacency(tris.shape[0], tri_edges)
    centers = radial_project(verts[tris].sum(axis=1))
    edge_splits = _edge_split_points(
        verts, edges, _edge_triangle_pairs(tri_edges), centers
    )
    splits = edge_splits[tri_edges]

    corners = verts[tris]
    r, s = _edge_weights(
        splits,
        corners,
        corners[:, [1, 2, 0], :],
    )
    if np.any(r <= 0.0) or np.any(s <= 0.0):
        raise DegenerateTriangle("edge split point fell outside its edge arc")
    rs = np.stack([r, s], axis=-1)

    macro = corners.transpose(0, 2, 1)
    dets = np.linalg.det(macro)
    if np.any(np.abs(dets) < 1e-12):
        raise DegenerateTriangle("macro triangle vertices are nearly coplanar")
    if np.any(dets < 0):
        raise DegenerateTriangle("macro triangle with inward orientation")
    macro_inv = np.linalg.inv(macro)

    entities = np.concatenate([corners, splits, centers[:, None, :]], axis=1)
    sub_mats = entities[:, SUB_VERTS, :].transpose(0, 1, 3, 2)
    sub_dets = np.linalg.det(sub_mats)
    if np.any(np.abs(sub_dets) < 1e-12):
        raise DegenerateTriangle("sub-triangle vertices are nearly coplanar")
    sub_inv = np.linalg.inv(sub_mats)

    spoke_normals = np.cross(centers[:, None, :], entities[:, SPOKES, :])
    center_bary = np.einsum("tij,tj->ti", macro_inv, centers)
    g1, g2 = vertex_frames(verts)

    cells = int(min(256, max(8, 2 ** (level + 2))))
    grid = _build_grid(centers, cells, cells)

    return SphereMesh(
        level=level,
        vertices=verts,
        triangles=tris,
        edges=edges,
        tri_edges=tri_edges,
        adjacency=adjacency,
        g1=g1,
        g2=g2,
        centers=centers,
        splits=splits,
        macro_inv=macro_inv,
        sub_inv=sub_inv,
        spoke_normals=spoke_normals,
        rs=rs,
        center_bary=center_bary,
        grid_start=grid,
    )


def _grid_seed(mesh, p):
    lam, theta = cart_to_sph(p)
    ct, cl = mesh.grid_start.shape
    it = np.clip((theta / np.pi * ct).astype(np.int64), 0, ct - 1)
    il = np.clip((lam / (2.0 * np.pi) * cl).astype(np.int64), 0, cl - 1)
    return mesh.grid_start[it, il]


def _macro_bary(mesh, tri, p):
    return np.einsum("kij,kj->ki", mesh.macro_inv[tri], p)


def locate_batch(mesh, p):
    """Locate unit points in the triangulation.

    Walks from a gridded start triangle toward each query, crossing the
    edge with the most negative barycentric coordinate; containment allows
    coordinates down to -1e-12. Points on shared boundaries resolve to the
    lowest containing triangle index so repeat runs agree exactly.

    Parameters
    ----------
    mesh : SphereMesh
    p : array, shape (n, 3)

    Returns
    -------
    tri : int array, shape (n,)
    sub : int array, shape (n,)
    bary : array, shape (n, 3)
        Spherical barycentric coordinates in the located sub-triangle.

    Raises
    ------
    LocationFailure
        If a walk exceeds 4 * n_triangles steps.
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    n = p.shape[0]

    cur = _grid_seed(mesh, p)
    prev = np.full(n, -1, dtype=np.int64)
    active = np.arange(n)
    max_steps = 4 * mesh.n_triangles
    steps = 0
    while active.size:
        b = _macro_bary(mesh, cur[active], p[active])
        inside = b.min(axis=1) >= -_BARY_TOL
        moving = active[~inside]
        if moving.size == 0:
            break
        bm = b[~inside]
        order = np.argsort(bm, axis=1)
        first = order[:, 0]
        nxt = mesh.adjacency[cur[moving], (first + 1) % 3]
        # Avoid bouncing straight back; take the second-worst edge instead.
        bounce = nxt == prev[moving]
        if np.any(bounce):
            second = order[:, 1]
            use2 = bounce & (np.take_along_axis(bm, second[:, None], 1)[:, 0] < -_BARY_TOL)
            nxt[use2] = mesh.adjacency[cur[moving][use2], (second[use2] + 1) % 3]
        prev[moving] = cur[moving]
        cur[moving] = nxt
        active = moving
        steps += 1
        if steps > max_steps:
            raise LocationFailure("point location walk exceeded %d steps" % max_steps)

    # Deterministic ties: points within tolerance of an edge move to the
    # lowest-index triangle that also contains them.
    for _ in range(8):
        b = _macro_bary(mesh, cur, p)
        near = b <= _BARY_TOL
        if not np.any(near):
            break
        adj = mesh.adjacency[cur]
        improved = False
        for coord in range(3):
            # Coordinate `coord` vanishing means the point sits on the edge
            # joining the other two vertices, edge slot (coord + 1) % 3.
            c = np.where(near[:, coord], adj[:, (coord + 1) % 3], cur)
            better = c < cur
            if not np.any(better):
                continue
            bb = _macro_bary(mesh, c[better], p[better])
            ok = bb.min(axis=1) >= -_BARY_TOL
            idx = np.where(better)[0][ok]
            if idx.size:
                cur[idx] = c[better][ok]
                improved = True
        if not improved:
            break

    d = np.einsum("ksj,kj->ks", mesh.spoke_normals[cur], p)
    score = np.minimum(d, -np.roll(d, -1, axis=1))
    sub = score.argmax(axis=1)
    bary = np.einsum("kij,kj->ki", mesh.sub_inv[cur, sub], p)
    if single:
        return cur[0], sub[0], bary[0]
    return cur, sub, bary


def locate(mesh, p):
    """Locate a single unit point; see locate_batch."""
    tri, sub, bary = locate_batch(mesh, np.asarray(p, dtype=float).reshape(3))
    return Location(triangle=int(tri), sub=int(sub), bary=bary)


def edge_arc_lengths(mesh):
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    return great_circle_distance(a, b)


def h_max(mesh):
    """Longest edge arc, the mesh size parameter."""
    return float(edge_arc_lengths(mesh).max())


def triangle_areas(mesh):
    """Spherical areas via l'Huilier's theorem, shape (n_triangles,)."""
    v = mesh.vertices[mesh.triangles]
    a = great_circle_distance(v[:, 1], v[:, 2])
    b = great_circle_distance(v[:, 2], v[:, 0])
    c = great_circle_distance(v[:, 0], v[:, 1])
    s = 0.5 * (a + b + c)
    t = (
        np.tan(0.5 * s)
        * np.tan(0.5 * (s - a))
        * np.tan(0.5 * (s - b))
        * np.tan(0.5 * (s - c))
    )
    return 4.0 * np.arctan(np.sqrt(np.maximum(t, 0.0)))


def save_mesh(mesh, vertices_path, triangles_path):
    """Write plain-text vertex ("x y z") and triangle ("i j k") tables."""
    np.savetxt(vertices_path, mesh.vertices, fmt="%.17g")
    np.savetxt(triangles_path, mesh.triangles, fmt="%d")
