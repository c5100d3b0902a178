"""Rigid-body poses, quaternion rotations, and frame transforms.

Conventions used throughout the package:

* Points are plain numpy arrays, one row per point.
* Quaternions are (w, x, y, z) and are NOT renormalized anywhere.  The
  rotation matrix is the homogeneous quadratic form, so R(s*q) = s^2 R(q)
  and R is a proper rotation exactly when ||q|| = 1.  Keeping the raw
  algebraic form makes every entry of R a polynomial in the four
  components, which is what the analytic pose gradients differentiate.
* world_to_body applies the exact matrix inverse of R (for unit
  quaternions this is just the transpose).  Using the true inverse rather
  than the transpose means central finite differences over raw quaternion
  components agree with the analytic formulas even off the unit sphere.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


def _as_finite_array(x, name, shape=None):
    a = np.asarray(x, dtype=float)
    if shape is not None and a.shape != shape:
        raise InvalidArgumentError(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return a


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("w", "x", "y", "z"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise InvalidArgumentError(f"quaternion component {name} is not finite")

    def as_array(self):
        return np.array([self.w, self.x, self.y, self.z])

    def norm(self):
        return float(np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2))

    @staticmethod
    def identity():
        return Quaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_array(a):
        a = _as_finite_array(a, "quaternion", (4,))
        return Quaternion(a[0], a[1], a[2], a[3])


@dataclass(frozen=True)
class Pose3:
    """Rigid placement of a 3D body: p_world = R(q) p_body + translation.

    rotation_center is an optional offset subtracted from world points
    before the rotation is undone (zero for bodies whose local frame is
    centered where they rotate).
    """

    rotation: Quaternion
    translation: np.ndarray
    rotation_center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "translation",
                           _as_finite_array(self.translation, "translation", (3,)))
        object.__setattr__(self, "rotation_center",
                           _as_finite_array(self.rotation_center, "rotation_center", (3,)))

    @staticmethod
    def identity():
        return Pose3(Quaternion.identity(), np.zeros(3))


@dataclass(frozen=True)
class Pose2:
    """Rigid placement of a 2D body: p_world = R(heading) p_body + translation."""

    heading: float
    translation: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.heading):
            raise InvalidArgumentError("heading is not finite")
        object.__setattr__(self, "translation",
                           _as_finite_array(self.translation, "translation", (2,)))

    @staticmethod
    def identity():
        return Pose2(0.0, np.zeros(2))


def rotation_from_quaternion(q):
    """3x3 rotation matrix of a quaternion, as a homogeneous quadratic form.

    No normalization is applied: rotation_from_quaternion(s*q) equals
    s^2 * rotation_from_quaternion(q).  For unit q the result is a proper
    rotation (orthogonal, determinant +1).
    """
    if not isinstance(q, Quaternion):
        q = Quaternion.from_array(q)
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array([
        [w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ])


def rotation_partials(q):
    """Partial derivatives of rotation_from_quaternion w.r.t. (w, x, y, z).

    Returns a (4, 3, 3) array: entry [0] is dR/dw, then dR/dx, dR/dy,
    dR/dz.  These are exact derivatives of the homogeneous form, valid at
    any (not necessarily unit) quaternion.
    """
    if not isinstance(q, Quaternion):
        q = Quaternion.from_array(q)
    w, x, y, z = q.w, q.x, q.y, q.z
    dw = 2.0 * np.array([[w, -z, y], [z, w, -x], [-y, x, w]])
    dx = 2.0 * np.array([[x, y, z], [y, -x, -w], [z, w, -x]])
    dy = 2.0 * np.array([[-y, x, w], [x, y, z], [-w, z, -y]])
    dz = 2.0 * np.array([[-z, -w, x], [w, -z, y], [x, y, z]])
    return np.stack([dw, dx, dy, dz])


def rotation2(theta):
    """2x2 rotation matrix for a heading angle."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation2_partial(theta):
    """Derivative of rotation2 w.r.t. the heading angle."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[-s, -c], [c, -s]])


def _points_2d(points, dim, name):
    p = _as_finite_array(points, name)
    single = p.ndim == 1
    if single:
        p = p[None, :]
    if p.ndim != 2 or p.shape[1] != dim:
        raise InvalidArgumentError(f"{name} must be ({dim},) or (k,{dim}), got {p.shape}")
    return p, single


def world_to_body(points, pose):
    """Map world points into the body frame of a pose.

    For Pose3 this solves R(q) p_body = p_world - t - c exactly, so the
    transform is the true inverse of body_to_world for any finite
    quaternion.  Accepts a single point (n,) or a stack (k, n).
    """
    if isinstance(pose, Pose3):
        p, single = _points_2d(points, 3, "points")
        r = rotation_from_quaternion(pose.rotation)
        shifted = p - pose.translation - pose.rotation_center
        try:
            out = np.linalg.solve(r, shifted.T).T
        except np.linalg.LinAlgError:
            raise InvalidArgumentError("pose rotation is singular (zero quaternion?)")
        return out[0] if single else out
    if isinstance(pose, Pose2):
        p, single = _points_2d(points, 2, "points")
        r = rotation2(pose.heading)
        out = (p - pose.translation) @ r  # (p-t) @ R == R^T (p-t) rowwise
        return out[0] if single else out
    raise InvalidArgumentError(f"unsupported pose type {type(pose).__name__}")


def body_to_world(points, pose):
    """Inverse of world_to_body."""
    if isinstance(pose, Pose3):
        p, single = _points_2d(points, 3, "points")
        r = rotation_from_quaternion(pose.rotation)
        out = p @ r.T + pose.translation + pose.rotation_center
        return out[0] if single else out
    if isinstance(pose, Pose2):
        p, single = _points_2d(points, 2, "points")
        r = rotation2(pose.heading)
        out = p @ r.T + pose.translation
        return out[0] if single else out
    raise InvalidArgumentError(f"unsupported pose type {type(pose).__name__}")


def centroid(points):
    """Arithmetic mean of a nonempty point set."""
    p = _as_finite_array(points, "points")
    if p.ndim != 2 or p.shape[0] == 0:
        raise InvalidArgumentError("points must be a nonempty (k, n) array")
    return p.mean(axis=0)
