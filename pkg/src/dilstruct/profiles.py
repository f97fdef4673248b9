"""Metric profiles: rescaled-ball snapshots, distortion against the
tangent cone, curvature-dimension slope fitting and curvature recovery."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dilstruct.dilation import DilationStructure, tangent_distance
from dilstruct.metric import OutOfDomainError

FLAT_TOL = 1e-9


@dataclass
class ProfileSeries:
    base: np.ndarray
    sample: np.ndarray  # includes the base point at index 0
    eps_list: np.ndarray
    rescaled: dict  # eps -> (n, n) matrix of (1/eps) d(dil(x,eps,u), dil(x,eps,v))
    tangent: np.ndarray

    def csv_rows(self) -> list[list]:
        return [[float(e), float(profile_distortion(self, e))] for e in self.eps_list]


@dataclass
class CurvEstimate:
    flat: bool
    slope: float | None
    curvature_scale: float | None  # prefactor M in distortion ~ M * eps^slope
    r2: float | None
    distortions: dict


def sample_profile(
    S: DilationStructure, x, n: int, eps_list, seed: int = 0, grid=None
) -> ProfileSeries:
    """Deterministic sample of n points in the unit tangent-distance ball
    at x, with the rescaled distance matrices and the tangent matrix."""
    if n < 4:
        raise ValueError("need at least 4 sample points")
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    r = S.domain_radius(x)
    if not np.isfinite(r):
        r = 2.0

    def tdist(u, v):
        if S.tangent_dist is not None:
            return S.tangent_dist(x, u, v)
        rep = tangent_distance(S, x, u, v, grid)
        return float(rep.limit)

    pts = [x]
    attempts = 0
    while len(pts) < n + 1:
        attempts += 1
        if attempts > 200 * n:
            raise OutOfDomainError("domain too small to sample the unit ball")
        cand = x + r * rng.uniform(-1.0, 1.0, size=S.dim)
        try:
            if S.dist(x, cand) > r:
                continue
            if tdist(x, cand) <= 1.0:
                pts.append(cand)
        except OutOfDomainError:
            continue
    sample = np.array(pts)
    m = len(sample)
    tangent = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            tangent[i, j] = tangent[j, i] = tdist(sample[i], sample[j])
    eps_list = np.asarray(eps_list, dtype=float)
    rescaled = {}
    for e in eps_list:
        mat = np.zeros((m, m))
        dil_pts = [S.dil(x, e, p) for p in sample]
        for i in range(m):
            for j in range(i + 1, m):
                mat[i, j] = mat[j, i] = S.dist(dil_pts[i], dil_pts[j]) / e
        rescaled[float(e)] = mat
    return ProfileSeries(base=x, sample=sample, eps_list=eps_list, rescaled=rescaled, tangent=tangent)


def profile_distortion(series: ProfileSeries, eps: float) -> float:
    """Identity-correspondence distortion of the rescaled ball against the
    tangent matrix; an upper bound for the pointed GH distance between the
    profile element and the cone."""
    mat = series.rescaled[float(eps)]
    return float(np.abs(mat - series.tangent).max())


def curvdim_estimate(series: ProfileSeries, flat_tol: float = FLAT_TOL) -> CurvEstimate:
    """Log-log slope of distortion against scale.

    The flat flag short-circuits the fit when every distortion is below
    flat_tol (metric cones); the slope is fitted on the three smallest
    scales to limit higher-order contamination.
    """
    eps = np.sort(series.eps_list)[::-1]
    dist = {float(e): profile_distortion(series, e) for e in eps}
    if all(v < flat_tol for v in dist.values()):
        return CurvEstimate(flat=True, slope=None, curvature_scale=None, r2=None, distortions=dist)
    tail = [e for e in eps if dist[float(e)] > flat_tol][-3:]
    if len(tail) < 2:
        return CurvEstimate(flat=False, slope=None, curvature_scale=None, r2=None, distortions=dist)
    lx = np.log([float(e) for e in tail])
    ly = np.log([dist[float(e)] for e in tail])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(((ly - pred) ** 2).sum())
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return CurvEstimate(
        flat=False,
        slope=float(slope),
        curvature_scale=float(math.exp(intercept)),
        r2=float(r2),
        distortions=dist,
    )


def sectional_curvature_from_profile(
    series: ProfileSeries, estimate: CurvEstimate, log_map
) -> float:
    """Recover the sectional curvature from the fitted distortion prefactor.

    The quadratic distortion coefficient of a Riemannian profile is
    K/6 times the maximum over sampled pairs of
    (|u|^2 |v|^2 - <u,v>^2) / d(u,v) in tangent coordinates, so K is the
    fitted prefactor divided by that geometric factor.
    """
    if estimate.flat or estimate.slope is None:
        raise ValueError("no curvature estimate for a flat profile")
    # re-fit the prefactor at the integer-snapped exponent, which removes
    # the intercept bias of a slightly off slope
    beta = max(1, round(estimate.slope))
    eps_tail = sorted(estimate.distortions)[:3]
    prefactor = float(np.median([estimate.distortions[e] / e**beta for e in eps_tail]))
    x = series.base
    vecs = [np.asarray(log_map(x, p), dtype=float) for p in series.sample]
    coef = 0.0
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            u, v = vecs[i], vecs[j]
            du = series.tangent[i, j]
            if du <= 1e-12:
                continue
            area2 = float(u @ u) * float(v @ v) - float(u @ v) ** 2
            coef = max(coef, area2 / du)
    if coef <= 0:
        raise ValueError("sample contains no independent pair")
    return 6.0 * prefactor / coef
