"""Velocity fields for the standard transport tests, with exact references.

Each flow bundles its velocity with whatever exact information it admits: a
closed-form backward map, a closed-form solution, or just the fact that the
field retraces itself so the final map is the identity. Fields built in a
rotating frame share the RotatingFrame helper.
"""

from dataclasses import dataclass

import numpy as np

from .geom import cart_to_sph, rotation_matrix, rotate_about_axis, sph_to_cart

_Z = np.array([0.0, 0.0, 1.0])


@dataclass
class Flow:
    """A velocity field u(points, t) plus its reference data.

    exact_map, when set, sends (points, t) to the time-zero footpoints.
    exact_solution, when set, gives the transported scalar at (points, t);
    its t = 0 restriction doubles as the initial condition. reversing means
    the field retraces itself over [0, T], so the map at T is the identity.
    default_tracer names the tracer used when the caller picks none; None
    means the flow carries its own initial condition via exact_solution.
    """

    name: str
    T: float
    velocity: object
    divergence_free: bool
    reversing: bool = False
    exact_map: object = None
    exact_solution: object = None
    default_tracer: str = "cosine_bells"


@dataclass(frozen=True)
class RotatingFrame:
    """Time-dependent orthogonal frame R(t) = pre Rz(rate t) post."""

    pre: np.ndarray
    rate: float
    post: np.ndarray

    def matrix(self, t):
        return self.pre @ rotation_matrix(_Z, self.rate * t) @ self.post


def _rx(angle):
    return rotation_matrix(np.array([1.0, 0.0, 0.0]), angle)


def _ry(angle):
    return rotation_matrix(np.array([0.0, 1.0, 0.0]), angle)


def solid_body(alpha=0.0, T=1.0):
    """Rigid rotation with one period over [0, T], axis tilted by alpha."""
    rate = 2.0 * np.pi / T
    axis = np.array([np.sin(alpha), 0.0, np.cos(alpha)])
    omega = rate * axis

    def velocity(p, t):
        return np.cross(omega, np.asarray(p, dtype=float))

    def exact_map(p, t):
        return rotate_about_axis(p, axis, -rate * t)

    return Flow(
        name="solid_body",
        T=T,
        velocity=velocity,
        divergence_free=True,
        reversing=False,
        exact_map=exact_map,
    )


def _deform_prime(q, t, T):
    """Deformation velocity in its co-rotating frame, rows of q primed."""
    amp = 4.0 * np.cos(np.pi * t / T) * q[..., 1]
    out = np.stack(
        [-q[..., 2], np.zeros_like(amp), q[..., 0]], axis=-1
    )
    return amp[..., None] * out


def deformational(alpha=0.0, T=5.0):
    """Rotation plus a deformation that retraces itself over [0, T].

    The deformation is expressed in a frame co-rotating with the rigid
    part, so the two components stay aligned for every tilt alpha.
    """
    rate = 2.0 * np.pi / T
    axis = np.array([np.sin(alpha), 0.0, np.cos(alpha)])
    omega = rate * axis
    frame = RotatingFrame(pre=_ry(alpha), rate=rate, post=np.eye(3))

    def velocity(p, t):
        p = np.asarray(p, dtype=float)
        m = frame.matrix(t)
        q = p @ m
        return np.cross(omega, p) + _deform_prime(q, t, T) @ m.T

    return Flow(
        name="deformational",
        T=T,
        velocity=velocity,
        divergence_free=True,
        reversing=True,
    )


def vortex_rate(rho, T):
    """Angular rate of the twin vortices as a function of rho = 3 sin(theta').

    Finite everywhere; the removable singularity at rho = 0 is set to 0,
    which leaves the velocity unchanged since the azimuthal direction
    vector vanishes there too.
    """
    rho = np.asarray(rho, dtype=float)
    safe = np.where(rho == 0.0, 1.0, rho)
    w = np.tanh(safe) / (safe * np.cosh(safe) ** 2)
    w = np.where(rho == 0.0, 0.0, w)
    return (2.0 * np.pi / T) * 1.5 * np.sqrt(3.0) * w


def _vortex_prime(q, T):
    """Vortex velocity in its own frame: azimuthal rotation at vortex_rate."""
    s = np.hypot(q[..., 0], q[..., 1])
    w = vortex_rate(3.0 * s, T)
    out = np.stack([-q[..., 1], q[..., 0], np.zeros_like(w)], axis=-1)
    return w[..., None] * out


def _vortex_solution(q, t, T):
    """Closed-form tracer in the vortex frame, rows of q primed."""
    lam, theta = cart_to_sph(q)
    rho = 3.0 * np.sin(theta)
    w = vortex_rate(rho, T)
    return 1.0 - np.tanh(0.2 * rho * np.sin(lam - w * t))


def static_vortex(T=1.0):
    """Twin vortices fixed on the equator, with a closed-form solution."""
    rot = _rx(-0.5 * np.pi)

    def velocity(p, t):
        p = np.asarray(p, dtype=float)
        q = p @ rot
        return _vortex_prime(q, T) @ rot.T

    def exact_solution(p, t):
        return _vortex_solution(np.asarray(p, dtype=float) @ rot, t, T)

    def exact_map(p, t):
        q = np.asarray(p, dtype=float) @ rot
        lam, theta = cart_to_sph(q)
        w = vortex_rate(3.0 * np.sin(theta), T)
        return sph_to_cart(lam - w * t, theta) @ rot.T

    return Flow(
        name="static_vortex",
        T=T,
        velocity=velocity,
        divergence_free=True,
        exact_map=exact_map,
        exact_solution=exact_solution,
        default_tracer=None,
    )


def moving_vortex(T=1.0):
    """Twin vortices swept along by a rigid rotation about the z axis."""
    rate = 2.0 * np.pi / T
    omega = rate * _Z
    frame = RotatingFrame(pre=np.eye(3), rate=rate, post=_rx(-0.5 * np.pi))

    def velocity(p, t):
        p = np.asarray(p, dtype=float)
        m = frame.matrix(t)
        q = p @ m
        return np.cross(omega, p) + _vortex_prime(q, T) @ m.T

    def exact_solution(p, t):
        q = np.asarray(p, dtype=float) @ frame.matrix(t)
        return _vortex_solution(q, t, T)

    def exact_map(p, t):
        q = np.asarray(p, dtype=float) @ frame.matrix(t)
        lam, theta = cart_to_sph(q)
        w = vortex_rate(3.0 * np.sin(theta), T)
        return sph_to_cart(lam - w * t, theta) @ frame.matrix(0.0).T

    return Flow(
        name="moving_vortex",
        T=T,
        velocity=velocity,
        divergence_free=True,
        exact_map=exact_map,
        exact_solution=exact_solution,
        default_tracer=None,
    )


def compressible(T=1.0):
    """Divergent field that retraces itself over [0, T].

    The angular rates are lam_dot = u sin(theta), theta_dot = v with
    u = -sin^2(lam/2) sin(2 theta) sin^2(theta) cos(pi t / T) and
    v = (1/2) sin(lam) sin^3(theta) cos(pi t / T).
    """

    def velocity(p, t):
        p = np.asarray(p, dtype=float)
        lam, theta = cart_to_sph(p)
        st, ct = np.sin(theta), np.cos(theta)
        sl, cl = np.sin(lam), np.cos(lam)
        amp = np.cos(np.pi * t / T)
        u = -np.sin(0.5 * lam) ** 2 * (2.0 * st * ct) * st**2 * amp
        v = 0.5 * sl * st**3 * amp
        e_lam = np.stack([-sl, cl, np.zeros_like(sl)], axis=-1)
        e_theta = np.stack([ct * cl, ct * sl, -st], axis=-1)
        return (u * st**2)[..., None] * e_lam + v[..., None] * e_theta

    return Flow(
        name="compressible",
        T=T,
        velocity=velocity,
        divergence_free=False,
        reversing=True,
    )


FLOWS = {
    "solid_body": solid_body,
    "deformational": deformational,
    "static_vortex": static_vortex,
    "moving_vortex": moving_vortex,
    "compressible": compressible,
}


def get_flow(name, **params):
    """Look up a flow constructor by name and build it."""
    try:
        make = FLOWS[name]
    except KeyError:
        raise ValueError(
            "unknown flow %r; choose from %s" % (name, ", ".join(sorted(FLOWS)))
        )
    return make(**params)
