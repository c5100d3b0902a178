"""Shared generators and finite-difference harnesses for the test suite.

Gradient checks filter for active-set stability: a central difference is
accepted only when every probe point reproduces the same (active_body,
active_obstacle, degenerate) signature as the base configuration, so the
comparison never straddles a nonsmooth point of beta.
"""

import itertools

import numpy as np

from minscale.geometry import Pose2, Pose3, Quaternion, body_to_world
from minscale.gradient import assemble_active_system, grad_scale_se2, grad_scale_se3
from minscale.oracle import point_strictly_inside_hull
from minscale.scale import ConvexSetH, ConvexSetV, min_scale_vrep
from minscale.sdlp import SolverParams

FD_H = 1e-6
PARAMS = SolverParams()


# ---------------------------------------------------------- random geometry

def random_body(rng, dim, k_hi=10):
    """Random V-rep body whose centroid seed is strictly interior."""
    while True:
        k = int(rng.integers(dim + 2, k_hi + 1))
        points = rng.normal(size=(k, dim))
        body = ConvexSetV(points)
        if point_strictly_inside_hull(body.seed, points, margin=1e-6):
            return body


def random_pair(rng, dim, d_lo=0.0, d_hi=5.0):
    """Body plus an obstacle cloud offset along a random direction.

    The offset range spans contained, colliding, touching-ish and separated
    pairs; d_lo > 1.5 or so yields mostly separated ones.
    """
    body = random_body(rng, dim)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    k = int(rng.integers(1, 9))
    obstacle = rng.normal(size=(k, dim)) * 0.8 + direction * rng.uniform(d_lo, d_hi)
    return body, obstacle


def box_corners(center, half, rot=None):
    """V-rep corners of a (rotated) axis box."""
    center = np.asarray(center, dtype=float)
    half = np.asarray(half, dtype=float)
    n = center.shape[0]
    signs = np.array(list(itertools.product(*[(-1.0, 1.0)] * n)))
    corners = signs * half
    if rot is not None:
        corners = corners @ np.asarray(rot).T
    return corners + center


def box_h(center, half, rot=None):
    """H-rep of the same (rotated) box, via the generic a x <= b converter."""
    center = np.asarray(center, dtype=float)
    half = np.asarray(half, dtype=float)
    n = center.shape[0]
    axes = np.eye(n) if rot is None else np.asarray(rot, dtype=float)
    a = np.vstack([axes.T, -axes.T])
    b = a @ center + np.concatenate([half, half])
    return ConvexSetH.from_inequalities(a, b, center)


def rotation_nd(rng, n):
    """Random rotation matrix from a QR factorization."""
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def hull_h(points, margin=1e-7):
    """H-rep of the hull of a full-dimensional point set (qhull facets)."""
    from scipy.spatial import ConvexHull

    points = np.asarray(points, dtype=float)
    hull = ConvexHull(points)
    a = hull.equations[:, :-1]
    b = -hull.equations[:, -1]
    center = points[hull.vertices].mean(axis=0)
    if np.any(b - a @ center <= margin):
        return None
    return ConvexSetH.from_inequalities(a, b, center)


# ------------------------------------------------- gradient case generators

CASES_SE2 = {
    "2+1": dict(
        body=lambda rng: ConvexSetV(rng.normal(size=(6, 2))),
        obstacle=lambda rng: rng.normal(size=(1, 2)) + np.array([5.0, 0.0]),
        split=(2, 1), seed=0),
    "1+2": dict(
        body=lambda rng: ConvexSetV(
            np.array([[2.0, 0.0], [-1.0, 0.8], [-1.0, -0.8]])
            + 0.05 * rng.normal(size=(3, 2)), np.zeros(2)),
        obstacle=lambda rng: np.array([[5.0, 6.0], [5.0, -6.0]])
        + 0.3 * rng.normal(size=(2, 2)),
        split=(1, 2), seed=1),
}

_BAR = np.array([[x, y, z] for x in (-0.4, 0.4) for y in (-3.0, 3.0)
                 for z in (-0.4, 0.4)])
_TETRA = np.array([[2.5, 0.0, 0.0], [-1.0, 1.0, 1.0], [-1.0, -1.0, 1.0],
                   [-1.0, 0.0, -1.4]])

CASES_SE3 = {
    "3+1": dict(
        body=lambda rng: ConvexSetV(rng.normal(size=(8, 3))),
        obstacle=lambda rng: rng.normal(size=(1, 3)) + np.array([6.0, 0.0, 0.0]),
        split=(3, 1), seed=0),
    "2+2": dict(
        body=lambda rng: ConvexSetV(_BAR + 0.05 * rng.normal(size=_BAR.shape)),
        obstacle=lambda rng: np.array([[3.0, -4.0, 0.3], [3.0, 4.0, -0.2]])
        + 0.3 * rng.normal(size=(2, 3)),
        split=(2, 2), seed=1),
    "1+3": dict(
        body=lambda rng: ConvexSetV(_TETRA + 0.05 * rng.normal(size=(4, 3)),
                                    np.zeros(3)),
        obstacle=lambda rng: np.array([[6.0, 0.0, 8.0], [6.0, 7.0, -6.0],
                                       [6.0, -7.0, -6.0]])
        + 0.3 * rng.normal(size=(3, 3)),
        split=(1, 3), seed=2),
}


def _key(result):
    return (tuple(sorted(result.active_body)),
            tuple(sorted(result.active_obstacle)), result.degenerate)


def _beta_key_se2(body, obstacle_world, translation, heading):
    result = min_scale_vrep(body, obstacle_world, Pose2(heading, translation), PARAMS)
    return result.beta, _key(result)


def _beta_key_se3(body, obstacle_world, translation, quat):
    pose = Pose3(Quaternion.from_array(quat), translation)
    result = min_scale_vrep(body, obstacle_world, pose, PARAMS)
    return result.beta, _key(result)


def fd_se2(body, obstacle_world, translation, heading, key):
    """Central differences over (tx, ty, theta); None if the key moves."""
    grad = np.empty(3)
    for i in range(2):
        step = np.zeros(2)
        step[i] = FD_H
        bp, kp = _beta_key_se2(body, obstacle_world, translation + step, heading)
        bm, km = _beta_key_se2(body, obstacle_world, translation - step, heading)
        if kp != key or km != key:
            return None
        grad[i] = (bp - bm) / (2.0 * FD_H)
    bp, kp = _beta_key_se2(body, obstacle_world, translation, heading + FD_H)
    bm, km = _beta_key_se2(body, obstacle_world, translation, heading - FD_H)
    if kp != key or km != key:
        return None
    grad[2] = (bp - bm) / (2.0 * FD_H)
    return grad


def fd_se3(body, obstacle_world, translation, quat, key):
    """Central differences over (t, raw q); None if the key moves."""
    grad = np.empty(7)
    for i in range(3):
        step = np.zeros(3)
        step[i] = FD_H
        bp, kp = _beta_key_se3(body, obstacle_world, translation + step, quat)
        bm, km = _beta_key_se3(body, obstacle_world, translation - step, quat)
        if kp != key or km != key:
            return None
        grad[i] = (bp - bm) / (2.0 * FD_H)
    for i in range(4):
        step = np.zeros(4)
        step[i] = FD_H
        bp, kp = _beta_key_se3(body, obstacle_world, translation, quat + step)
        bm, km = _beta_key_se3(body, obstacle_world, translation, quat - step)
        if kp != key or km != key:
            return None
        grad[3 + i] = (bp - bm) / (2.0 * FD_H)
    return grad


def random_unit_quaternion(rng):
    v = rng.normal(size=4)
    return v / np.linalg.norm(v)


def collect_se2(case, need, max_trials=40000, seed=None):
    """Accepted (analytic, fd, context) gradient pairs for one 2D case.

    context is (body, obstacle_world, pose, result) for tests that need to
    re-derive quantities from the configuration.
    """
    spec = CASES_SE2[case]
    rng = np.random.default_rng(spec["seed"] if seed is None else seed)
    accepted = []
    for _ in range(max_trials):
        if len(accepted) >= need:
            break
        heading = rng.uniform(-np.pi, np.pi)
        translation = rng.normal(size=2)
        pose = Pose2(heading, translation)
        obstacle_world = body_to_world(spec["obstacle"](rng), pose)
        body = spec["body"](rng)
        result = min_scale_vrep(body, obstacle_world, pose, PARAMS)
        if result.degenerate:
            continue
        if (len(result.active_body), len(result.active_obstacle)) != spec["split"]:
            continue
        fd = fd_se2(body, obstacle_world, translation, heading, _key(result))
        if fd is None:
            continue
        g = grad_scale_se2(assemble_active_system(body, result, pose), pose)
        analytic = np.concatenate([g.d_beta_d_t, [g.d_beta_d_theta]])
        accepted.append((analytic, fd, (body, obstacle_world, pose, result)))
    return accepted


def collect_se3(case, need, max_trials=40000, seed=None):
    """Accepted (analytic, fd, context) gradient pairs for one 3D case."""
    spec = CASES_SE3[case]
    rng = np.random.default_rng(spec["seed"] if seed is None else seed)
    accepted = []
    for _ in range(max_trials):
        if len(accepted) >= need:
            break
        quat = random_unit_quaternion(rng)
        translation = rng.normal(size=3)
        pose = Pose3(Quaternion.from_array(quat), translation)
        obstacle_world = body_to_world(spec["obstacle"](rng), pose)
        body = spec["body"](rng)
        result = min_scale_vrep(body, obstacle_world, pose, PARAMS)
        if result.degenerate:
            continue
        if (len(result.active_body), len(result.active_obstacle)) != spec["split"]:
            continue
        fd = fd_se3(body, obstacle_world, translation, quat, _key(result))
        if fd is None:
            continue
        g = grad_scale_se3(assemble_active_system(body, result, pose), pose)
        analytic = np.concatenate([g.d_beta_d_t, g.d_beta_d_q])
        accepted.append((analytic, fd, (body, obstacle_world, pose, result)))
    return accepted


def grad_norm_err(pairs):
    """Worst |analytic - fd| / max(|fd|, 1e-3) over all pairs and components.

    A value <= 1e-4 is exactly the acceptance rule max(1e-4 relative,
    1e-7 absolute).
    """
    worst = 0.0
    for analytic, fd, _ in pairs:
        err = np.abs(analytic - fd) / np.maximum(np.abs(fd), 1e-3)
        worst = max(worst, float(err.max()))
    return worst
