"""Sphere-valued map splines, their composition chains, and Jacobians.

A SphereMap interpolates the three Cartesian components of a backward map
over one remapping window and projects evaluations radially back onto the
sphere. A MapChain composes the per-window submaps, newest first, and
carries the chain rule for tangent vectors and Jacobian determinants
through the projection.

Jacobian determinants are taken in the deterministic vertex frames of
geom.vertex_frames; since g1 x g2 equals the base point everywhere, the
per-submap determinants compose multiplicatively along a chain.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroVector
from .geom import project_differential, vertex_frames
from .mesh import build_icosahedral
from .spline import HermiteData, MacroSpline, interpolate

# Map evaluations whose pre-projection norm falls below this are treated as
# failures; a healthy map stays within a tenth of the unit sphere.
MIN_PRE_NORM = 1e-6

_CHAIN_FORMAT = 1


class SphereMap:
    """One window's interpolated backward map."""

    def __init__(self, spline):
        self.spline = spline

    @property
    def mesh(self):
        return self.spline.mesh

    @classmethod
    def from_hermite(cls, mesh, values, d1, d2):
        """Interpolate map component data given at the mesh vertices.

        values, d1, d2 : arrays, shape (n_vertices, 3)
            Cartesian components and their frame derivatives.

        Raises
        ------
        ValueError
            If any vertex value norm is outside [0.5, 1.5].
        """
        norms = np.linalg.norm(values, axis=1)
        if np.any(norms < 0.5) or np.any(norms > 1.5):
            raise ValueError("map vertex values stray too far from the sphere")
        return cls(interpolate(mesh, HermiteData(values, d1, d2)))

    @classmethod
    def identity(cls, mesh):
        """The identity map: component c has gradient (g1[c], g2[c])."""
        return cls.from_hermite(mesh, mesh.vertices.copy(), mesh.g1.copy(), mesh.g2.copy())

    def eval_raw(self, p):
        """Componentwise spline values before projection, shape (n, 3)."""
        return self.spline.eval(np.atleast_2d(np.asarray(p, dtype=float)))

    def eval(self, p):
        """Mapped points on the sphere.

        Raises
        ------
        ZeroVector
            If a pre-projection value has norm below MIN_PRE_NORM.
        """
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        raw = self.eval_raw(p)
        n = np.linalg.norm(raw, axis=-1, keepdims=True)
        if np.any(n < MIN_PRE_NORM):
            raise ZeroVector("map value collapsed toward the origin")
        out = raw / n
        return out[0] if single else out

    def differential(self, p, v):
        """Push tangent vectors v at p through the projected map."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        single = p.ndim == 1
        pts = np.atleast_2d(p)
        vs = np.atleast_2d(v)
        raw = self.eval_raw(pts)
        w = self.spline.derivative(pts, vs)
        out = project_differential(raw, w)
        return out[0] if single else out

    def _located_jet(self, pts, tangents):
        """Shared evaluation for chains: mapped points, pushed tangents, det.

        tangents has shape (n, q, 3); the pushed tangents keep that shape.
        Returns (points, pushed, dets) where dets are the frame Jacobian
        determinants at pts.
        """
        from .mesh import locate_batch

        tri, sub, bary = locate_batch(self.mesh, pts)
        raw = self.spline.eval_located(tri, sub, bary)
        n = np.linalg.norm(raw, axis=-1, keepdims=True)
        if np.any(n < MIN_PRE_NORM):
            raise ZeroVector("map value collapsed toward the origin")
        out = raw / n

        ga, gb = vertex_frames(pts)
        wa = self.spline.derivative_located(tri, sub, bary, ga)
        wb = self.spline.derivative_located(tri, sub, bary, gb)
        pa = project_differential(raw, wa)
        pb = project_differential(raw, wb)
        oa, ob = vertex_frames(out)
        m11 = np.sum(pa * oa, axis=-1)
        m12 = np.sum(pa * ob, axis=-1)
        m21 = np.sum(pb * oa, axis=-1)
        m22 = np.sum(pb * ob, axis=-1)
        dets = m11 * m22 - m12 * m21

        pushed = None
        if tangents is not None:
            q = tangents.shape[1]
            flatv = tangents.reshape(-1, 3)
            rep = np.repeat(np.arange(pts.shape[0]), q)
            w = self.spline.derivative_located(tri[rep], sub[rep], bary[rep], flatv)
            pushed = project_differential(raw[rep], w).reshape(tangents.shape)
        return out, pushed, dets

    def jacobian(self, p):
        """Frame Jacobian determinant of the projected map at p."""
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        _, _, dets = self._located_jet(np.atleast_2d(p), None)
        return float(dets[0]) if single else dets


@dataclass
class MapChain:
    """Backward map as a composition of per-window submaps.

    maps[0] covers the earliest window; evaluation composes newest first,
    so the full map is maps[0] o maps[1] o ... o maps[-1]. breaks holds the
    window boundary times, len(maps) + 1 entries. An empty chain is the
    identity.
    """

    mesh: object
    maps: list = field(default_factory=list)
    breaks: list = field(default_factory=lambda: [0.0])

    @property
    def n_submaps(self):
        return len(self.maps)

    def eval(self, p):
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        out = np.atleast_2d(p)
        for m in reversed(self.maps):
            out = m.eval(out)
        return out[0] if single else out

    def eval_with_jacobian(self, p):
        """Mapped points and the chained Jacobian determinant."""
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        out = np.atleast_2d(p)
        dets = np.ones(out.shape[0])
        for m in reversed(self.maps):
            out, _, d = m._located_jet(out, None)
            dets = dets * d
        if single:
            return out[0], float(dets[0])
        return out, dets

    def jacobian(self, p):
        return self.eval_with_jacobian(p)[1]

    def jet(self, p, tangents):
        """Push points and per-point tangent bundles through the chain.

        p : (n, 3); tangents : (n, q, 3). Returns (points, tangents) of the
        same shapes. An empty chain returns the inputs unchanged.
        """
        out = np.atleast_2d(np.asarray(p, dtype=float))
        tang = np.asarray(tangents, dtype=float)
        for m in reversed(self.maps):
            out, tang, _ = m._located_jet(out, tang)
        return out, tang


def save_chain(chain, path):
    """Serialize a chain: refinement level, window breaks, coefficients.

    Keys: format (int), level (int), breaks (n_maps + 1,), coeffs
    (n_maps, n_triangles, 19, 3).
    """
    coeffs = np.stack([m.spline.coeffs for m in chain.maps], axis=0) if chain.maps else np.zeros(
        (0, chain.mesh.n_triangles, 19, 3)
    )
    np.savez_compressed(
        path,
        format=_CHAIN_FORMAT,
        level=chain.mesh.level,
        breaks=np.asarray(chain.breaks, dtype=float),
        coeffs=coeffs,
    )


def load_chain(path, mesh=None):
    """Rebuild a serialized chain, reconstructing the mesh if not supplied."""
    with np.load(path) as z:
        if int(z["format"]) != _CHAIN_FORMAT:
            raise ValueError("unknown chain format %r" % int(z["format"]))
        level = int(z["level"])
        breaks = [float(t) for t in z["breaks"]]
        coeffs = z["coeffs"]
    if mesh is None:
        mesh = build_icosahedral(level)
    elif mesh.level != level:
        raise ValueError("chain was saved at refinement %d, mesh is %d" % (level, mesh.level))
    maps = [SphereMap(MacroSpline(mesh, c, scalar=False)) for c in coeffs]
    return MapChain(mesh=mesh, maps=maps, breaks=breaks)
