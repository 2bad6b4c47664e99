"""Reverse operation: expand star points into equivalence classes and choose
consistent representatives using the dash information.

All geometry here works in a frame with the symmetry axis along Z (points are
rotated in and out at the boundary).  Angle comparisons are frame independent,
so the dash-side vectors are used as given -- but note they must already have
their per-pixel ray rotation reversed (see `symmetry.undash_map`); `reverse_map`
does this itself when a camera is passed.

For continuous folds the candidate azimuth offset is recovered exactly from
the dot product p . p_r = rho*rho_r*cos(delta) + z*z_r instead of a
small-angle spherical shortcut; this is what makes the round trip exact on
clean data.  A reference triple's mirror ambiguity (reflections preserve all
pairwise angles) is resolved by matching the sign of the triple product
against the dash side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geom import rotation_to_axis, wrap_angle, angles_between
from .symmetry import INFINITE, PointMap, SymmetrySpec, CameraModel, fold_multiplier, undash_map

_DEGENERATE_COS = 1e-9


@dataclass
class RansacConfig:
    num_samples: int = 16
    collinearity_epsilon: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")


@dataclass
class EquivalenceClass:
    """The object points mapping to one star value.

    Finite folds list all n members (ordered by k); the continuous fold is
    described by its circle (axis frame azimuth is free, rho and z fixed).
    """

    axis: np.ndarray
    rho: float
    z: float
    members: Optional[np.ndarray] = None  # (n, 3), original frame
    frame: np.ndarray = field(default_factory=lambda: np.eye(3))

    @property
    def continuous(self) -> bool:
        return self.members is None

    @property
    def size(self) -> int:
        if self.continuous:
            raise ValueError("continuous class has no finite size")
        return self.members.shape[0]

    def member_at(self, azimuth: float) -> np.ndarray:
        """Class member at a given axis-frame azimuth (original frame coords)."""
        p = np.array([self.rho * np.cos(azimuth), self.rho * np.sin(azimuth), self.z])
        return self.frame.T @ p


@dataclass
class ReferenceSet:
    """Three (object point, aligned dash point) pairs used for disambiguation."""

    points: np.ndarray  # (3, 3) p_r
    dash: np.ndarray    # (3, 3) p'_r with the ray rotation reversed

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(3, 3)
        self.dash = np.asarray(self.dash, dtype=float).reshape(3, 3)
        if _triangle_area(self.points) <= 1e-12:
            raise ValueError("reference points are collinear")


def _triangle_area(pts: np.ndarray) -> float:
    return 0.5 * float(np.linalg.norm(np.cross(pts[1] - pts[0], pts[2] - pts[0])))


def equivalence_class(star_pt, axis, fold) -> EquivalenceClass:
    """Invert the star transform into the full set of candidate object points."""
    A = rotation_to_axis(axis)
    q = A @ np.asarray(star_pt, dtype=float)
    phi = wrap_angle(np.arctan2(q[1], q[0]))
    rho = float(np.hypot(q[0], q[1]))
    z = float(q[2])
    if fold == INFINITE:
        return EquivalenceClass(axis=np.asarray(axis, dtype=float), rho=rho, z=z,
                                members=None, frame=A)
    n = int(fold_multiplier(fold))
    theta = 2.0 * np.pi / n
    az = phi / n + theta * np.arange(n)
    members = np.stack([rho * np.cos(az), rho * np.sin(az), np.full(n, z)], axis=-1)
    return EquivalenceClass(axis=np.asarray(axis, dtype=float), rho=rho, z=z,
                            members=members @ A, frame=A)


def _class_members_grid(star_axis_frame: np.ndarray, n: int) -> np.ndarray:
    """(N, n, 3) candidate members (axis frame) for a batch of star points."""
    phi = wrap_angle(np.arctan2(star_axis_frame[:, 1], star_axis_frame[:, 0]))
    rho = np.hypot(star_axis_frame[:, 0], star_axis_frame[:, 1])
    z = star_axis_frame[:, 2]
    theta = 2.0 * np.pi / n
    az = phi[:, None] / n + theta * np.arange(n)[None, :]
    return np.stack([rho[:, None] * np.cos(az), rho[:, None] * np.sin(az),
                     np.broadcast_to(z[:, None], az.shape)], axis=-1)


def _candidate_scores(candidates: np.ndarray, dash: np.ndarray,
                      ref_points: np.ndarray, ref_dash: np.ndarray) -> np.ndarray:
    """(N, M) angle-error sums of per-pixel candidates against the references.

    candidates: (N, M, 3) object-side candidates, dash: (N, 3) aligned dash
    vectors, ref_points/ref_dash: (R, 3).
    """
    target = angles_between(dash[None, :, :], ref_dash[:, None, :])      # (R, N)
    got = angles_between(candidates[None, :, :, :], ref_points[:, None, None, :])  # (R, N, M)
    return np.sum(np.abs(got - target[:, :, None]), axis=0)


def disambiguate_point(cls: EquivalenceClass, dash_pt, refs: ReferenceSet) -> np.ndarray:
    """Pick the class member with the smallest angle-error sum to the references.

    `dash_pt` and the reference dash vectors must have the per-pixel ray
    rotation already reversed.  Ties break to the lowest candidate index.
    """
    dash_pt = np.asarray(dash_pt, dtype=float)
    if np.linalg.norm(dash_pt) < 1e-15:
        raise ValueError("dash point must be nonzero")
    if cls.continuous:
        cands = continuous_candidates(cls, dash_pt, refs)
    else:
        if cls.size == 0:
            raise ValueError("empty equivalence class")
        cands = cls.members
    scores = _candidate_scores(cands[None, :, :], dash_pt[None, :],
                               refs.points, refs.dash)[0]
    return cands[int(np.argmin(scores))]


def continuous_candidates(cls: EquivalenceClass, dash_pt, refs: ReferenceSet) -> np.ndarray:
    """Candidate object points on a continuous class circle, two per reference.

    For each reference the azimuth offset delta to the class point above the
    reference is solved exactly from the dot product; its arccos argument is
    clamped, so noisy data degrades to delta = 0 (the point above the
    reference).  Near-degenerate references (class point above the reference
    almost perpendicular to it, or vanishing radii) are skipped.  With no
    usable reference the azimuth-0 member is returned.
    """
    dash_pt = np.asarray(dash_pt, dtype=float)
    cands, valid = _continuous_candidates_grid(
        np.array([[cls.rho, cls.z]]), dash_pt[None, :],
        refs.points @ cls.frame.T, refs.dash)
    keep = valid[0]
    if not np.any(keep):
        return cls.member_at(0.0)[None, :]
    out = cands[0][keep]
    return out @ cls.frame  # back to the original frame


def _continuous_candidates_grid(rho_z: np.ndarray, dash: np.ndarray,
                                ref_points_axis: np.ndarray, ref_dash: np.ndarray):
    """Vectorized continuous candidates (axis frame).

    rho_z: (N, 2) class circles, dash: (N, 3), ref_points_axis: (R, 3) in the
    axis frame, ref_dash: (R, 3).  Returns ((N, 2R, 3) candidates, (N, 2R)
    validity).
    """
    rho, z = rho_z[:, 0], rho_z[:, 1]
    norm_p = np.hypot(rho, z)
    R = ref_points_axis.shape[0]
    N = rho.shape[0]

    phi_r = np.arctan2(ref_points_axis[:, 1], ref_points_axis[:, 0])
    rho_r = np.hypot(ref_points_axis[:, 0], ref_points_axis[:, 1])
    z_r = ref_points_axis[:, 2]
    norm_r = np.linalg.norm(ref_points_axis, axis=-1)

    cos_target = np.cos(angles_between(dash[None, :, :], ref_dash[:, None, :]))  # (R, N)

    # class point directly above each reference; skip when nearly perpendicular
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_above = (rho[None, :] * rho_r[:, None] + z[None, :] * z_r[:, None]) / \
            (norm_p[None, :] * norm_r[:, None])
        cos_delta = (norm_p[None, :] * norm_r[:, None] * cos_target
                     - z[None, :] * z_r[:, None]) / (rho[None, :] * rho_r[:, None])
    usable = (np.abs(cos_above) >= _DEGENERATE_COS) & \
             (rho[None, :] * rho_r[:, None] > 1e-15) & np.isfinite(cos_delta)
    delta = np.arccos(np.clip(cos_delta, -1.0, 1.0))  # (R, N)

    az = np.stack([phi_r[:, None] + delta, phi_r[:, None] - delta], axis=-1)  # (R, N, 2)
    az = np.transpose(az, (1, 0, 2)).reshape(N, 2 * R)
    cands = np.stack([rho[:, None] * np.cos(az), rho[:, None] * np.sin(az),
                      np.broadcast_to(z[:, None], az.shape)], axis=-1)
    valid = np.repeat(np.transpose(usable), 2, axis=1)
    return cands, valid


def _scene_scale(points: np.ndarray) -> float:
    scale = 2.0 * float(np.max(np.linalg.norm(points, axis=-1))) if len(points) else 1.0
    return scale if scale > 0 else 1.0


def _finite_reference_from_triple(members3: np.ndarray, dash3: np.ndarray):
    """Expand a pixel triple into the best internally consistent reference set.

    members3: (3, n, 3) class members (axis frame) of the three pixels; the
    first pixel's member 0 is fixed, the remaining n^2 combinations are scored
    by the triple's internal pairwise angle errors.
    """
    n = members3.shape[1]
    p1 = members3[0, 0]
    t12 = angles_between(dash3[0], dash3[1])
    t13 = angles_between(dash3[0], dash3[2])
    t23 = angles_between(dash3[1], dash3[2])
    a12 = angles_between(p1[None, :], members3[1])            # (n,)
    a13 = angles_between(p1[None, :], members3[2])            # (n,)
    a23 = angles_between(members3[1][:, None, :], members3[2][None, :, :])  # (n, n)
    score = np.abs(a12 - t12)[:, None] + np.abs(a13 - t13)[None, :] + np.abs(a23 - t23)
    k2, k3 = np.unravel_index(int(np.argmin(score)), (n, n))
    points = np.stack([p1, members3[1, k2], members3[2, k3]])
    return points, float(score[k2, k3])


def _continuous_reference_from_triple(rho_z3: np.ndarray, dash3: np.ndarray, scale: float):
    """Build an internally consistent reference triple on continuous classes.

    The first point is fixed at azimuth 0; the second and third are recovered
    through the exact azimuth offsets, and the mirror branch is resolved by
    matching the triple product sign of the dash side.  Returns None for
    degenerate triples.
    """
    det_dash = float(np.linalg.det(dash3))
    if abs(det_dash) < 1e-9 * scale**3:
        return None
    p1 = np.array([rho_z3[0, 0], 0.0, rho_z3[0, 1]])

    c2, v2 = _continuous_candidates_grid(rho_z3[1:2], dash3[1:2], p1[None, :], dash3[0:1])
    if not v2[0, 0]:
        return None
    p2 = c2[0, 0]  # +delta branch; the sign is fixed by chirality below

    refs_p = np.stack([p1, p2])
    c3, v3 = _continuous_candidates_grid(rho_z3[2:3], dash3[2:3], refs_p, dash3[0:2])
    if not np.any(v3[0]):
        return None
    s3 = _candidate_scores(c3, dash3[2:3], refs_p, dash3[0:2])[0]
    s3 = np.where(v3[0], s3, np.inf)
    p3 = c3[0, int(np.argmin(s3))]

    points = np.stack([p1, p2, p3])
    det_obj = float(np.linalg.det(points))
    if abs(det_obj) < 1e-12 * scale**3:
        return None
    if np.sign(det_obj) != np.sign(det_dash):
        points = points * np.array([1.0, -1.0, 1.0])  # reflect about the ref-1 plane
    return points


def _iter_triples(rng: np.random.Generator, max_attempts: int, n_points: int):
    for _ in range(max_attempts):
        yield rng.choice(n_points, size=3, replace=False)


def _select_references_detailed(star_axis: np.ndarray, dash: np.ndarray,
                                spec: SymmetrySpec, cfg: RansacConfig):
    """RANSAC over pixel triples; returns (refs in axis frame, diagnostics)."""
    N = star_axis.shape[0]
    if N < 3:
        raise ValueError("need at least 3 valid pixels for reference selection")
    scale = _scene_scale(star_axis)
    min_area = cfg.collinearity_epsilon * scale**2
    rng = np.random.default_rng(cfg.seed)

    continuous = spec.fold == INFINITE
    if continuous:
        rho = np.hypot(star_axis[:, 0], star_axis[:, 1])
        rho_z = np.stack([rho, star_axis[:, 2]], axis=-1)
        n = None
        members = None
    else:
        n = int(fold_multiplier(spec.fold))
        members = _class_members_grid(star_axis, n)
        rho_z = None

    best = None
    totals = []
    found = 0
    for idx in _iter_triples(rng, 20 * cfg.num_samples, N):
        if found >= cfg.num_samples:
            break
        dash3 = dash[idx]
        if np.any(np.linalg.norm(dash3, axis=-1) < 1e-15):
            continue
        if continuous:
            points = _continuous_reference_from_triple(rho_z[idx], dash3, scale)
            if points is None:
                continue
        else:
            points, _ = _finite_reference_from_triple(members[idx], dash3)
        if _triangle_area(points) <= min_area:
            continue
        total = _total_error(members, rho_z, dash, points, dash3)
        totals.append(total)
        found += 1
        if best is None or total < best[0]:
            best = (total, points, dash3)

    if best is None:
        raise ValueError("no noncollinear reference triple found")
    total, points, dash3 = best
    return points, dash3, {"total_error": total, "sample_totals": totals}


def _total_error(members, rho_z, dash, ref_points_axis, ref_dash) -> float:
    scores = _pixel_scores(members, rho_z, dash, ref_points_axis, ref_dash)[0]
    return float(np.sum(np.min(scores, axis=1)))


def _pixel_scores(members, rho_z, dash, ref_points_axis, ref_dash):
    """Per-pixel candidate scores; returns (scores (N, M), candidates (N, M, 3))."""
    if members is not None:
        cands = members
        scores = _candidate_scores(cands, dash, ref_points_axis, ref_dash)
    else:
        cands, valid = _continuous_candidates_grid(rho_z, dash, ref_points_axis, ref_dash)
        scores = _candidate_scores(cands, dash, ref_points_axis, ref_dash)
        scores = np.where(valid, scores, np.inf)
        # pixels with no usable reference fall back to the azimuth-0 member,
        # scored honestly so they cannot flatter a reference sample's total
        none_ok = ~np.any(valid, axis=1)
        if np.any(none_ok):
            fallback = np.stack([rho_z[none_ok, 0], np.zeros(none_ok.sum()),
                                 rho_z[none_ok, 1]], axis=-1)
            cands = cands.copy()
            scores = scores.copy()
            cands[none_ok, 0] = fallback
            scores[none_ok, 0] = _candidate_scores(
                fallback[:, None, :], dash[none_ok], ref_points_axis, ref_dash)[:, 0]
    return scores, cands


def select_references(star_map: PointMap, dash_map: PointMap, spec: SymmetrySpec,
                      cfg: RansacConfig, cam: Optional[CameraModel] = None) -> ReferenceSet:
    """Choose the reference triple with the smallest total angle error.

    Finite folds only (the continuous construction lives in `reverse_map`).
    Pass the camera when `dash_map` still carries the per-pixel ray rotation.
    """
    if spec.fold == INFINITE:
        raise ValueError("reference triple expansion needs a finite fold")
    star_axis, dash, _ = _aligned_arrays(star_map, dash_map, spec, cam)
    points_axis, ref_dash, _ = _select_references_detailed(star_axis, dash, spec, cfg)
    A = rotation_to_axis(spec.axis)
    return ReferenceSet(points_axis @ A, ref_dash)


def _aligned_arrays(star_map: PointMap, dash_map: PointMap, spec: SymmetrySpec,
                    cam: Optional[CameraModel]):
    if not np.array_equal(star_map.mask, dash_map.mask):
        raise ValueError("star and dash maps must share the same mask")
    if cam is not None:
        dash_map = undash_map(dash_map, cam)
    A = rotation_to_axis(spec.axis)
    star_axis = star_map.valid_points() @ A.T
    dash = dash_map.valid_points()
    return star_axis, dash, A


def reverse_map(star_map: PointMap, dash_map: PointMap, spec: SymmetrySpec,
                cfg: Optional[RansacConfig] = None,
                cam: Optional[CameraModel] = None) -> PointMap:
    """Regain consistent object points from star and dash maps.

    The result equals the true map up to one global symmetry rotation.  Pass
    the camera when `dash_map` is the raw dash output (ray rotation still
    applied); without a camera the dash map is assumed to be aligned already.
    Two-axis specs are not disambiguated (single-axis only).
    """
    return reverse_map_detailed(star_map, dash_map, spec, cfg, cam)[0]


def reverse_map_detailed(star_map: PointMap, dash_map: PointMap, spec: SymmetrySpec,
                         cfg: Optional[RansacConfig] = None,
                         cam: Optional[CameraModel] = None):
    if spec.has_secondary:
        raise NotImplementedError("disambiguation supports a single symmetry axis")
    cfg = cfg or RansacConfig()
    star_axis, dash, A = _aligned_arrays(star_map, dash_map, spec, cam)

    ref_points_axis, ref_dash, info = _select_references_detailed(star_axis, dash, spec, cfg)

    if spec.fold == INFINITE:
        rho = np.hypot(star_axis[:, 0], star_axis[:, 1])
        rho_z = np.stack([rho, star_axis[:, 2]], axis=-1)
        scores, cands = _pixel_scores(None, rho_z, dash, ref_points_axis, ref_dash)
    else:
        n = int(fold_multiplier(spec.fold))
        members = _class_members_grid(star_axis, n)
        scores, cands = _pixel_scores(members, None, dash, ref_points_axis, ref_dash)

    pick = np.argmin(scores, axis=1)
    chosen_axis = cands[np.arange(len(pick)), pick]
    chosen = chosen_axis @ A  # back to the original frame

    points = np.zeros_like(star_map.points)
    points[star_map.mask] = chosen
    out = PointMap(points, star_map.mask.copy())
    refs = ReferenceSet(ref_points_axis @ A, ref_dash)
    return out, {"references": refs, **info}


def best_global_alignment(truth: PointMap, recovered: PointMap, spec: SymmetrySpec):
    """Best single symmetry rotation g with recovered ~= g(truth).

    Returns (g, max pixel error).  Finite folds enumerate the group; the
    continuous fold fits the azimuth by least squares in the axis frame.
    """
    if not np.array_equal(truth.mask, recovered.mask):
        raise ValueError("maps must share the same mask")
    p = truth.valid_points()
    r = recovered.valid_points()
    A = rotation_to_axis(spec.axis)

    if spec.fold == INFINITE:
        pa, ra = p @ A.T, r @ A.T
        C = float(np.sum(ra[:, 0] * pa[:, 0] + ra[:, 1] * pa[:, 1]))
        S = float(np.sum(ra[:, 1] * pa[:, 0] - ra[:, 0] * pa[:, 1]))
        phi = float(np.arctan2(S, C))
        from .geom import rot_z
        g = A.T @ rot_z(phi) @ A
        return g, float(np.max(np.linalg.norm(p @ g.T - r, axis=-1)))

    from .symmetry import symmetry_group
    best = None
    for g in symmetry_group(spec):
        err = float(np.max(np.linalg.norm(p @ g.T - r, axis=-1))) if len(p) else 0.0
        if best is None or err < best[1]:
            best = (g, err)
    return best
