"""Minimum collision scale between convex bodies and obstacles.

A body (convex point set with a seed point strictly inside its hull, or a
bounded intersection of halfspaces) is dilated about its seed by a factor
beta >= 0.  The minimum collision scale is the dilation at which the body
first touches the obstacle: beta > 1 means the placed body is separated
from the obstacle, beta < 1 means it collides, and beta = 0 means the seed
itself lies inside the obstacle.  Both representations reduce to a single
LP in n+1 variables, solved by the incremental solver in `sdlp`.

Constraint rows are laid out body-first, then obstacle, then (V-rep only)
an explicit -beta <= 0 row, so active-set indices map mechanically back to
input points and halfspaces; the gradient module relies on that layout.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateBodyError, InvalidArgumentError, NumericalError
from .geometry import centroid, world_to_body
from .sdlp import LowDimLP, LpStatus, SolverParams, active_set, solve


def _read_only(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ConvexSetV:
    """Convex set given by its points (one per row); hull implied.

    seed is the point the set dilates about.  It defaults to the centroid,
    which is interior whenever the hull is full-dimensional.  Obstacles
    never use their seed.
    """

    points: np.ndarray
    seed: np.ndarray = None

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] not in (2, 3):
            raise InvalidArgumentError(f"points must be (k, 2) or (k, 3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidArgumentError("points contain non-finite values")
        s = centroid(p) if self.seed is None else np.asarray(self.seed, dtype=float)
        if s.shape != (p.shape[1],):
            raise InvalidArgumentError(f"seed must have shape ({p.shape[1]},), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise InvalidArgumentError("seed contains non-finite values")
        object.__setattr__(self, "points", _read_only(p))
        object.__setattr__(self, "seed", _read_only(s))

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class ConvexSetH:
    """Convex set {x : normals[i] . (x - interior_point) <= 1}.

    Normals come pre-scaled so every right-hand side is 1; use
    from_inequalities to convert a generic a x <= b description.  At least
    n+1 halfspaces are needed for the set to be bounded; fewer are
    accepted, but such a set is necessarily unbounded.
    """

    normals: np.ndarray
    interior_point: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.normals, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] not in (2, 3):
            raise InvalidArgumentError(f"normals must be (k, 2) or (k, 3), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError("normals contain non-finite values")
        if np.any(np.abs(a).max(axis=1) == 0.0):
            raise InvalidArgumentError("normals contain a zero row")
        p = np.asarray(self.interior_point, dtype=float)
        if p.shape != (a.shape[1],):
            raise InvalidArgumentError(
                f"interior_point must have shape ({a.shape[1]},), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidArgumentError("interior_point contains non-finite values")
        object.__setattr__(self, "normals", _read_only(a))
        object.__setattr__(self, "interior_point", _read_only(p))

    @property
    def dim(self):
        return self.normals.shape[1]

    @classmethod
    def from_inequalities(cls, a, b, interior_point):
        """Normalize {x : a x <= b} about a strictly interior point.

        Each row is divided by its slack b_i - a_i . p at the interior
        point; rows with slack <= 1e-12 are rejected, since the point must
        be strictly inside every halfspace for the normalization to exist.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        p = np.asarray(interior_point, dtype=float)
        if a.ndim != 2 or b.shape != (a.shape[0],) or p.shape != (a.shape[1],):
            raise InvalidArgumentError("expected a (k, n), b (k,), interior_point (n,)")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(p))):
            raise InvalidArgumentError("inequality data contains non-finite values")
        slack = b - a @ p
        if np.any(slack <= 1e-12):
            raise InvalidArgumentError(
                "interior_point is not strictly inside {a x <= b} (min slack "
                f"{slack.min():.3e})")
        return cls(a / slack[:, None], p)


@dataclass(frozen=True)
class ScaleResult:
    """Outcome of a minimum-scale query.

    beta: the touching scale, >= 0.
    certificate: V-rep, the separating functional alpha: every body point
        has alpha . (p - seed) <= 1 and every obstacle point
        alpha . (p - seed) >= beta.  H-rep, the witness point x lying in
        both the beta-scaled body and the obstacle.
    active_body / active_obstacle: the LP basis rows split by side, as
        indices into the input points (or halfspaces); together exactly
        n+1 of them when not degenerate.
    tight_body / tight_obstacle: every row tight at the solution within
        act_eps; a superset of the basis when constraints tie.
    degenerate: True when the tight set or the basis does not consist of
        exactly n+1 body/obstacle rows.  Gradients taken there are only
        subgradients.
    active_body_points, active_obstacle_points_body,
    active_obstacle_points_world: cached coordinates of the active rows
        for gradient assembly.  tight_obstacle_points_body /
    tight_obstacle_points_world cache the full tight obstacle rows, which
        subgradient selection draws on.  World coordinates are present
        only when the query involved a pose; H-rep results cache nothing.
    """

    beta: float
    certificate: np.ndarray
    active_body: tuple
    active_obstacle: tuple
    degenerate: bool
    tight_body: tuple = ()
    tight_obstacle: tuple = ()
    active_body_points: np.ndarray = None
    active_obstacle_points_body: np.ndarray = None
    active_obstacle_points_world: np.ndarray = None
    tight_obstacle_points_body: np.ndarray = None
    tight_obstacle_points_world: np.ndarray = None


def _obstacle_points(obstacle, n):
    pts = obstacle.points if hasattr(obstacle, "points") else obstacle
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidArgumentError("obstacle must be a nonempty (k, n) point array")
    if n is not None and pts.shape[1] != n:
        raise InvalidArgumentError(
            f"obstacle dimension {pts.shape[1]} does not match body dimension {n}")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("obstacle points contain non-finite values")
    return pts


def vrep_scale_lp(body, obstacle_points):
    """The LP in z = (alpha, beta) whose maximum beta is the V-rep scale.

    Rows, in order:
      (p_b - s) . alpha <= 1       one per body point
      (p_o - s) . alpha >= beta    one per obstacle point
      beta >= 0                    explicit last row

    Feasible at z = 0 by construction, so the solve can only come back
    optimal or unbounded (the latter iff the seed is not strictly inside
    the body hull).
    """
    if not isinstance(body, ConvexSetV):
        raise InvalidArgumentError("body must be a ConvexSetV")
    n = body.dim
    pts = _obstacle_points(obstacle_points, n)
    kb = body.points.shape[0]
    ko = pts.shape[0]
    a = np.zeros((kb + ko + 1, n + 1))
    b = np.zeros(kb + ko + 1)
    a[:kb, :n] = body.points - body.seed
    b[:kb] = 1.0
    a[kb:kb + ko, :n] = -(pts - body.seed)
    a[kb:kb + ko, n] = 1.0
    a[-1, n] = -1.0
    c = np.zeros(n + 1)
    c[n] = 1.0
    return LowDimLP(n + 1, c, a, b)


def min_scale_vrep_bodyframe(body, obstacle_points, params=None):
    """Minimum scale of a V-rep body against obstacle points in the body frame."""
    if params is None:
        params = SolverParams()
    n = body.dim if isinstance(body, ConvexSetV) else None
    pts = _obstacle_points(obstacle_points, n)
    lp = vrep_scale_lp(body, pts)
    sol = solve(lp, params)
    if sol.status == LpStatus.UNBOUNDED:
        raise DegenerateBodyError(
            "no finite scale: the seed is not strictly inside the body hull")
    if sol.status != LpStatus.OPTIMAL:
        raise NumericalError("scale LP reported infeasible, yet it is feasible at zero")
    n = body.dim
    kb = body.points.shape[0]
    beta_row = kb + pts.shape[0]
    basis = list(sol.active_basis)
    tight = active_set(lp, sol, params)
    active_body = tuple(i for i in basis if i < kb)
    active_obstacle = tuple(i - kb for i in basis if kb <= i < beta_row)
    tight_obstacle = tuple(i - kb for i in tight if kb <= i < beta_row)
    degenerate = (len(tight) != n + 1 or len(basis) != n + 1
                  or len(active_body) + len(active_obstacle) != n + 1)
    return ScaleResult(
        beta=max(0.0, float(sol.value)),
        certificate=_read_only(sol.z[:n]),
        active_body=active_body,
        active_obstacle=active_obstacle,
        degenerate=degenerate,
        tight_body=tuple(i for i in tight if i < kb),
        tight_obstacle=tight_obstacle,
        active_body_points=_read_only(body.points[list(active_body)]),
        active_obstacle_points_body=_read_only(pts[list(active_obstacle)]),
        active_obstacle_points_world=None,
        tight_obstacle_points_body=_read_only(pts[list(tight_obstacle)]),
        tight_obstacle_points_world=None,
    )


def min_scale_vrep(body, obstacle_world, pose, params=None):
    """Minimum scale against world-frame obstacle points under a body pose.

    Obstacle points are pulled into the body frame (the exact inverse
    transform), the body-frame LP is solved there, and the world
    coordinates of the active obstacle points are kept on the result for
    gradient assembly.
    """
    pts_w = _obstacle_points(obstacle_world, None)
    pts_b = world_to_body(pts_w, pose)
    res = min_scale_vrep_bodyframe(body, pts_b, params)
    return replace(
        res,
        active_obstacle_points_world=_read_only(pts_w[list(res.active_obstacle)]),
        tight_obstacle_points_world=_read_only(pts_w[list(res.tight_obstacle)]),
    )


def hrep_scale_lp(body, obstacle):
    """The LP in z = (x, beta) whose maximum of -beta is the H-rep scale.

    Rows, in order:
      alpha_b . x - beta <= alpha_b . p_b   x inside the beta-scaled body
      alpha_o . x <= 1 + alpha_o . p_o      x inside the obstacle

    For a bounded body the optimum beta is automatically >= 0, reaching 0
    exactly when p_b lies in the obstacle.
    """
    if not isinstance(body, ConvexSetH) or not isinstance(obstacle, ConvexSetH):
        raise InvalidArgumentError("min_scale_hrep expects ConvexSetH body and obstacle")
    n = body.dim
    if obstacle.dim != n:
        raise InvalidArgumentError(
            f"obstacle dimension {obstacle.dim} does not match body dimension {n}")
    kb = body.normals.shape[0]
    ko = obstacle.normals.shape[0]
    a = np.zeros((kb + ko, n + 1))
    b = np.empty(kb + ko)
    a[:kb, :n] = body.normals
    a[:kb, n] = -1.0
    b[:kb] = body.normals @ body.interior_point
    a[kb:, :n] = obstacle.normals
    b[kb:] = 1.0 + obstacle.normals @ obstacle.interior_point
    c = np.zeros(n + 1)
    c[n] = -1.0
    return LowDimLP(n + 1, c, a, b)


def min_scale_hrep(body, obstacle, params=None):
    """Minimum scale between H-rep body and obstacle; witness on the result."""
    if params is None:
        params = SolverParams()
    lp = hrep_scale_lp(body, obstacle)
    sol = solve(lp, params)
    if sol.status == LpStatus.INFEASIBLE:
        raise InvalidArgumentError("obstacle halfspaces bound an empty region")
    if sol.status == LpStatus.UNBOUNDED:
        raise DegenerateBodyError(
            "scale unbounded below: body halfspaces leave a recession direction")
    n = body.dim
    kb = body.normals.shape[0]
    basis = list(sol.active_basis)
    tight = active_set(lp, sol, params)
    active_body = tuple(i for i in basis if i < kb)
    active_obstacle = tuple(i - kb for i in basis if i >= kb)
    degenerate = len(tight) != n + 1 or len(basis) != n + 1
    return ScaleResult(
        beta=max(0.0, float(sol.z[n])),
        certificate=_read_only(sol.z[:n]),
        active_body=active_body,
        active_obstacle=active_obstacle,
        degenerate=degenerate,
        tight_body=tuple(i for i in tight if i < kb),
        tight_obstacle=tuple(i - kb for i in tight if i >= kb),
    )


def is_colliding(result, threshold=1.0):
    """Whether the configuration collides: beta < threshold.

    threshold 1 is exact touching; larger values add a safety margin
    (scales inside [1, threshold) then count as collisions).
    """
    return bool(result.beta < threshold)
