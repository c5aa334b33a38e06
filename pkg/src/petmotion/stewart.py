"""Six-string parallel (Stewart) measurement kinematics.

The base points sit on the imaging ring (frame I), the platform points on
the helmet (frame H).  A pose here is always the helmet with respect to the
ring.  Twists are ``[v (mm/s), w (deg/s)]`` with ``v`` the velocity of the
helmet origin and ``w`` the angular velocity, both expressed in the ring
frame; the leg Jacobian uses the same units, so ``ldot = J @ twist``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, Twist, exp_so3, exp_so3_array

DEG = np.pi / 180.0
COND_LIMIT = 1e12
_I6 = np.eye(6)


class NoConvergence(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"forward kinematics did not converge after {iterations} iterations "
                         f"(max leg residual {residual:.3e} mm)")
        self.residual = residual
        self.iterations = iterations


class SingularJacobian(RuntimeError):
    def __init__(self, cond: float):
        super().__init__(f"leg Jacobian is singular (condition number {cond:.3e})")
        self.cond = cond


@dataclass
class StewartGeometry:
    """Attachment points of the six strings.

    Parameters
    ----------
    base_points : (6, 3) array
        String exits on the imaging ring, ring frame, mm.
    platform_points : (6, 3) array
        String attachments on the helmet, helmet frame, mm.
    nominal_pose : Pose
        Helmet pose in the ring frame at the nominal configuration.
    """

    base_points: np.ndarray
    platform_points: np.ndarray
    nominal_pose: Pose = field(default_factory=Pose.identity)
    nominal_lengths: np.ndarray = field(init=False)

    def __post_init__(self):
        self.base_points = np.asarray(self.base_points, dtype=float).reshape(6, 3)
        self.platform_points = np.asarray(self.platform_points, dtype=float).reshape(6, 3)
        for name, pts in (("base", self.base_points), ("platform", self.platform_points)):
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            d[np.diag_indices(6)] = np.inf
            if d.min() <= 1e-9:
                raise ValueError(f"two {name} points coincide")
        self.nominal_lengths = inverse_kinematics(self.nominal_pose, self)
        if np.any(self.nominal_lengths <= 0):
            raise ValueError("nominal leg lengths must be positive")


def circle_points(radius: float, angles_deg, z: float = 0.0) -> np.ndarray:
    a = np.radians(np.asarray(angles_deg, dtype=float))
    return np.column_stack([radius * np.cos(a), radius * np.sin(a), np.full(a.shape, z)])


def canonical_geometry() -> StewartGeometry:
    """Stand-in 6-6 layout used when no measured attachment points are given.

    Base points on a 150 mm circle in the ring plane, helmet points on a
    110 mm circle 120 mm above it, helmet and ring origins coincident at
    the nominal configuration.
    """
    base = circle_points(150.0, [25, 95, 145, 215, 265, 335])
    plat = circle_points(110.0, [35, 85, 155, 205, 275, 325], z=120.0)
    return StewartGeometry(base, plat, Pose.identity())


def _legs(rotation, translation, geom):
    rh = geom.platform_points @ rotation.T
    d = rh + translation - geom.base_points
    return rh, d


def inverse_kinematics(pose: Pose, geom: StewartGeometry) -> np.ndarray:
    """Leg lengths ``||R h_i + t - b_i||`` in mm."""
    _, d = _legs(pose.rotation, pose.translation, geom)
    return np.sqrt(np.einsum("ij,ij->i", d, d))


def _jacobian_rad(rotation, translation, geom):
    rh = geom.platform_points @ rotation.T
    d = rh + (translation - geom.base_points)
    lengths = np.sqrt((d * d).sum(axis=1))
    u = d / lengths[:, None]
    j = np.empty((6, 6))
    j[:, :3] = u
    j[:, 3] = rh[:, 1] * u[:, 2] - rh[:, 2] * u[:, 1]
    j[:, 4] = rh[:, 2] * u[:, 0] - rh[:, 0] * u[:, 2]
    j[:, 5] = rh[:, 0] * u[:, 1] - rh[:, 1] * u[:, 0]
    return j, lengths


def leg_jacobian(pose: Pose, geom: StewartGeometry) -> np.ndarray:
    """6x6 matrix mapping a twist (mm/s, deg/s) to leg rates (mm/s).

    Row i is ``[u_i, (pi/180) * (R h_i) x u_i]`` with ``u_i`` the unit leg
    direction.
    """
    j, _ = _jacobian_rad(pose.rotation, pose.translation, geom)
    j[:, 3:] *= DEG
    return j


def jacobian_condition(pose: Pose, geom: StewartGeometry) -> float:
    j, _ = _jacobian_rad(pose.rotation, pose.translation, geom)
    s = np.linalg.svd(j, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf


def twist_from_leg_rates(pose: Pose, geom: StewartGeometry, rates) -> Twist:
    """Solve ``J @ twist = rates`` for the helmet twist."""
    j = leg_jacobian(pose, geom)
    cond = np.linalg.cond(j)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularJacobian(cond)
    return Twist.from_vector(np.linalg.solve(j, np.asarray(rates, dtype=float)))


def forward_kinematics(lengths, geom: StewartGeometry, seed: Pose | None = None, *,
                       tol: float = 1e-9, max_iter: int = 50) -> Pose:
    """Pose whose leg lengths match ``lengths``.

    Damped Gauss-Newton on the six leg residuals, warm-started from
    ``seed`` (the previous solution in a sequential loop, or the nominal
    pose).  Rotation increments go through the exponential map so the
    iterate stays a rotation.  Levenberg damping starts at 1e-6 and is
    multiplied by 10 whenever a step would increase the residual.

    Raises
    ------
    NoConvergence
        No pose within ``tol`` (mm, max over legs) after ``max_iter`` steps.
    SingularJacobian
        Condition number of the leg Jacobian above 1e12 at an iterate.
    """
    target = np.asarray(lengths, dtype=float)
    if seed is None:
        seed = geom.nominal_pose
    rot = seed.rotation.copy()
    trans = seed.translation.copy()
    _, d = _legs(rot, trans, geom)
    res = np.sqrt(np.einsum("ij,ij->i", d, d)) - target
    err = np.abs(res).max()
    lam = 1e-6
    it = 0
    while err >= tol:
        if it >= max_iter:
            raise NoConvergence(float(err), it)
        it += 1
        j, _ = _jacobian_rad(rot, trans, geom)
        if it == 1:
            # the condition check uses the first iterate; later ones are within a Newton step of it
            sv = np.linalg.svd(j, compute_uv=False)
            if sv[-1] <= 0 or sv[0] / sv[-1] > COND_LIMIT:
                raise SingularJacobian(sv[0] / sv[-1] if sv[-1] > 0 else np.inf)
        jtj = j.T @ j
        g = j.T @ res
        while True:
            step = -np.linalg.solve(jtj + lam * _I6, g)
            new_rot = exp_so3(step[3:]) @ rot
            new_trans = trans + step[:3]
            d = geom.platform_points @ new_rot.T + (new_trans - geom.base_points)
            new_res = np.sqrt((d * d).sum(axis=1)) - target
            new_err = np.abs(new_res).max()
            if new_err < err or lam > 1e8:
                break
            lam *= 10.0
        if new_err >= err:
            raise NoConvergence(float(err), it)
        rot, trans, res, err = new_rot, new_trans, new_res, new_err
        lam = max(lam * 0.1, 1e-6)
    return Pose(rot, trans)


def _jacobian_array(rot, trans, geom):
    """Batched :func:`_jacobian_rad` over (n, 3, 3) rotations and (n, 3) translations."""
    rh = np.einsum("nij,kj->nki", rot, geom.platform_points)
    d = rh + (trans[:, None, :] - geom.base_points)
    u = d / np.sqrt((d * d).sum(axis=2))[..., None]
    j = np.empty(rot.shape[:1] + (6, 6))
    j[..., :3] = u
    j[..., 3] = rh[..., 1] * u[..., 2] - rh[..., 2] * u[..., 1]
    j[..., 4] = rh[..., 2] * u[..., 0] - rh[..., 0] * u[..., 2]
    j[..., 5] = rh[..., 0] * u[..., 1] - rh[..., 1] * u[..., 0]
    return j


def leg_jacobians(rotations, translations, geom: StewartGeometry) -> np.ndarray:
    """(n, 6, 6) leg Jacobians (mm/s per mm/s and deg/s) for a batch of poses."""
    j = _jacobian_array(np.asarray(rotations, dtype=float).reshape(-1, 3, 3),
                        np.asarray(translations, dtype=float).reshape(-1, 3), geom)
    j[..., 3:] *= DEG
    return j


class PoseTracker:
    """Forward kinematics for a stream of leg readings.

    A block of readings is solved together, starting every sample from the
    previous solution and iterating with the inverse Jacobian factored
    there (a chord method).  That is cheap when the samples stay close to
    the previous solution, as consecutive 1 kHz readings do.  Samples that
    have not converged after ``chord_iter`` steps go through
    :func:`forward_kinematics`.  Every accepted pose meets the same ``tol``
    as the direct solver.

    Singular-Jacobian and convergence errors carry an ``index`` attribute
    giving the offending row of the block.
    """

    def __init__(self, geom: StewartGeometry, seed: Pose | None = None, tol: float = 1e-9,
                 chord_iter: int = 12):
        self.geom = geom
        self.tol = tol
        self.chord_iter = chord_iter
        self.pose = geom.nominal_pose if seed is None else seed
        j = _jacobian_array(self.pose.rotation[None], self.pose.translation[None], geom)
        self._jinv = self._inverses(j)[-1]

    def _inverses(self, j):
        u, s, vt = np.linalg.svd(j)
        cond = np.where(s[:, -1] > 0, s[:, 0] / np.where(s[:, -1] > 0, s[:, -1], 1.0), np.inf)
        bad = np.flatnonzero(cond > COND_LIMIT)
        if len(bad):
            exc = SingularJacobian(float(cond[bad[0]]))
            exc.index = int(bad[0])
            raise exc
        return np.einsum("nji,nj,nkj->nik", vt, 1.0 / s, u)

    def _residuals(self, rot, trans, target):
        g = self.geom
        d = np.einsum("nij,kj->nki", rot, g.platform_points) + (trans[:, None, :] - g.base_points)
        return np.sqrt((d * d).sum(axis=2)) - target

    def update_many(self, lengths, rates):
        """Solve a block of readings.

        Returns (n, 3, 3) rotations, (n, 3) translations and (n, 6) twists
        (mm/s, deg/s) in the ring frame.
        """
        target = np.atleast_2d(np.asarray(lengths, dtype=float))
        n = len(target)
        rot = np.repeat(self.pose.rotation[None], n, axis=0)
        trans = np.repeat(self.pose.translation[None], n, axis=0)
        res = self._residuals(rot, trans, target)
        active = np.abs(res).max(axis=1) >= self.tol
        for _ in range(self.chord_iter):
            if not active.any():
                break
            step = res[active] @ self._jinv.T
            rot[active] = exp_so3_array(-step[:, 3:]) @ rot[active]
            trans[active] -= step[:, :3]
            res[active] = self._residuals(rot[active], trans[active], target[active])
            active = np.abs(res).max(axis=1) >= self.tol
        for i in np.flatnonzero(active):
            seed = Pose(self.pose.rotation, self.pose.translation) if i == 0 else Pose(rot[i - 1], trans[i - 1])
            try:
                p = forward_kinematics(target[i], self.geom, seed, tol=self.tol)
            except (NoConvergence, SingularJacobian) as exc:
                exc.index = int(i)
                raise
            rot[i], trans[i] = p.rotation, p.translation
        jinv = self._inverses(_jacobian_array(rot, trans, self.geom))
        tw = np.einsum("nij,nj->ni", jinv, np.atleast_2d(np.asarray(rates, dtype=float)))
        tw[:, 3:] /= DEG
        self.pose = Pose(rot[-1].copy(), trans[-1].copy())
        self._jinv = jinv[-1]
        return rot, trans, tw

    def update(self, lengths, rates) -> tuple[Pose, Twist]:
        """Pose for one reading and the twist for ``rates`` at that pose."""
        rot, trans, tw = self.update_many(lengths, rates)
        return Pose(rot[0], trans[0]), Twist.from_vector(tw[0])


def measure(lengths, rates, geom: StewartGeometry, seed: Pose | None = None) -> tuple[Pose, Twist]:
    """Forward kinematics plus the twist from leg rates at the solved pose."""
    return PoseTracker(geom, forward_kinematics(lengths, geom, seed)).update(lengths, rates)
