import numpy as np

from cmsphere.geom import radial_project
from cmsphere.mesh import _edge_triangle_pairs


def locate_in_triangle(mesh, tri, pts):
    """Sub-triangle index and spherical barycentric coords of pts, with the
    macro triangle forced to tri (one entry per point). Lets a point on a
    shared edge be evaluated from either side."""
    d = np.einsum("esj,ej->es", mesh.spoke_normals[tri], pts)
    score = np.minimum(d, -np.roll(d, -1, axis=1))
    sub = score.argmax(axis=1)
    bary = np.einsum("eij,ej->ei", mesh.sub_inv[tri, sub], pts)
    return sub, bary


def edge_jumps(spline, n_pts):
    """Largest cross-edge value and transversal-derivative disagreement of a
    scalar spline, sampled at n_pts interior points per macro edge."""
    mesh = spline.mesh
    pair = _edge_triangle_pairs(mesh.tri_edges)
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    normal = radial_project(np.cross(a, b))
    c0 = 0.0
    c1 = 0.0
    for t in np.linspace(0.05, 0.95, n_pts):
        pts = radial_project((1.0 - t) * a + t * b)
        vals = []
        ders = []
        for side in range(2):
            tri = pair[:, side]
            sub, bary = locate_in_triangle(mesh, tri, pts)
            vals.append(spline.eval_located(tri, sub, bary)[:, 0])
            ders.append(spline.derivative_located(tri, sub, bary, normal)[:, 0])
        c0 = max(c0, np.abs(vals[1] - vals[0]).max())
        c1 = max(c1, np.abs(ders[1] - ders[0]).max())
    return c0, c1
