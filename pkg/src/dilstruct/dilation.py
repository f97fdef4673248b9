"""Dilation structures: the based-contraction abstraction, approximate
group operations, axiom verification, tangent-space extraction,
derivatives of curves, differentials of maps, and equivalence probes.

Points are coordinate vectors (numpy arrays); a structure is a distance
function plus a field of based dilations dil(x, eps, y) defined for
eps in (0, inf) on a declared domain radius around each point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dilstruct.limits import ConvergenceReport, default_grid, extract_limit
from dilstruct.metric import OutOfDomainError

EXACT_TOL = 1e-12


class TangentConstructionError(RuntimeError):
    def __init__(self, message, triple=None, report=None):
        super().__init__(message)
        self.triple = triple
        self.report = report


@dataclass(frozen=True)
class DilationStructure:
    """A point domain with a distance and a field of based dilations.

    ``dil(x, 1, y) = y`` and ``dil(x, eps, dil(x, mu, y)) = dil(x, eps*mu, y)``
    must hold exactly by construction; the remaining axioms are scale
    limits and are checked numerically by :func:`verify_axioms`.
    """

    name: str
    dim: int
    dist: object  # (x, y) -> float
    dil: object  # (x, eps, y) -> point
    domain_radius: object  # (x) -> float
    tangent_dist: object = None  # optional exact (x, u, v) -> float
    meta: dict = field(default_factory=dict)

    def require_in_domain(self, x, y, what: str = "dilation"):
        r = self.domain_radius(x)
        d = self.dist(x, y)
        if d > r:
            raise OutOfDomainError(
                f"{what} on {self.name}: point at distance {d:.3g} exceeds domain radius {r:.3g}"
            )


def approx_difference(S: DilationStructure, x, eps: float, u, v):
    """dil(dil(x,eps,u), 1/eps, dil(x,eps,v)): the approximate difference."""
    S.require_in_domain(x, u, "approx_difference (u)")
    S.require_in_domain(x, v, "approx_difference (v)")
    w = S.dil(x, eps, u)
    return S.dil(w, 1.0 / eps, S.dil(x, eps, v))


def approx_sum(S: DilationStructure, x, eps: float, u, v):
    """dil(x, 1/eps, dil(dil(x,eps,u), eps, v)): the approximate sum."""
    S.require_in_domain(x, u, "approx_sum (u)")
    S.require_in_domain(x, v, "approx_sum (v)")
    w = S.dil(x, eps, u)
    return S.dil(x, 1.0 / eps, S.dil(w, eps, v))


def approx_inverse(S: DilationStructure, x, eps: float, u):
    """Approximate inverse of u relative to x, as the difference against x."""
    return approx_difference(S, x, eps, u, x)


def tangent_distance(S: DilationStructure, x, u, v, grid=None, tol=1e-6) -> ConvergenceReport:
    """Extract d^x(u,v) = lim (1/eps) d(dil(x,eps,u), dil(x,eps,v)).

    The report carries cone-property residuals at mu = 1/2, 1/4 and a
    degeneracy flag (limit 0 for distinct arguments).
    """
    S.require_in_domain(x, u, "tangent_distance (u)")
    S.require_in_domain(x, v, "tangent_distance (v)")

    def sampler_for(uu, vv):
        return lambda e: S.dist(S.dil(x, e, uu), S.dil(x, e, vv)) / e

    rep = extract_limit(sampler_for(u, v), grid, tol=tol)
    residuals = {}
    if rep.limit is not None:
        for mu in (0.5, 0.25):
            sub = extract_limit(sampler_for(S.dil(x, mu, u), S.dil(x, mu, v)), grid, tol=tol)
            if sub.limit is not None:
                residuals[mu] = abs(float(rep.limit) - float(sub.limit) / mu)
    rep.extra["cone_residuals"] = residuals
    sep = S.dist(u, v)
    rep.extra["degenerate"] = bool(
        rep.limit is not None and sep > 1e-9 and float(rep.limit) < tol
    )
    return rep


@dataclass
class TangentSpaceModel:
    """Extracted local group structure at a base point.

    ``sum``/``inverse`` evaluate scale limits of the approximate operations
    on demand; ``tangent_dilate`` is the dilation field at the base point,
    acting on the tangent cone as a family of group morphisms.
    """

    base: np.ndarray
    sum: object
    inverse: object
    tangent_dilate: object
    tangent_dist: object
    sample: list
    residuals: dict
    tol: float


def build_tangent_model(
    S: DilationStructure, x, sample, grid=None, tol=1e-6
) -> TangentSpaceModel:
    """Extract the tangent group operations at x and validate them on a sample.

    Raises TangentConstructionError with the offending pair/triple when any
    required limit fails its Cauchy test or a group-law residual exceeds
    10 * tol on the sample.  The default grid stops at 2^-12: dilation
    compositions amplify coordinate roundoff like 1/eps^2, so deeper grids
    lose accuracy rather than gain it.
    """
    grid = default_grid(2, 12) if grid is None else np.asarray(grid, dtype=float)

    def sum_op(u, v):
        rep = extract_limit(lambda e: approx_sum(S, x, e, u, v), grid, tol=tol)
        if not rep.cauchy_ok or rep.partial:
            raise TangentConstructionError("approximate sum did not converge", (x, u, v), rep)
        return rep.limit

    def inv_op(u):
        rep = extract_limit(lambda e: approx_inverse(S, x, e, u), grid, tol=tol)
        if not rep.cauchy_ok or rep.partial:
            raise TangentConstructionError("approximate inverse did not converge", (x, u), rep)
        return rep.limit

    def tdist(u, v):
        if S.tangent_dist is not None:
            return S.tangent_dist(x, u, v)
        rep = tangent_distance(S, x, u, v, grid, tol=tol)
        if not rep.cauchy_ok:
            raise TangentConstructionError("tangent distance did not converge", (x, u, v), rep)
        return float(rep.limit)

    tdil = lambda eps, u: S.dil(x, eps, u)  # noqa: E731

    # group-law residuals are coordinate distances: gauge-type metrics
    # square-root-amplify machine-precision coordinate agreement
    chart = lambda a, b: float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))  # noqa: E731
    residuals = {
        "neutral": 0.0,
        "inverse": 0.0,
        "assoc": 0.0,
        "left_isometry": 0.0,
        "morphism": 0.0,
    }
    pts = list(sample)
    for u in pts:
        residuals["neutral"] = max(residuals["neutral"], chart(sum_op(x, u), u))
        residuals["inverse"] = max(residuals["inverse"], chart(sum_op(u, inv_op(u)), x))
    for u, v, w in zip(pts, pts[1:] + pts[:1], pts[2:] + pts[:2]):
        lhs = sum_op(u, sum_op(v, w))
        rhs = sum_op(sum_op(u, v), w)
        residuals["assoc"] = max(residuals["assoc"], chart(lhs, rhs))
        residuals["left_isometry"] = max(
            residuals["left_isometry"], abs(tdist(sum_op(u, v), sum_op(u, w)) - tdist(v, w))
        )
        mu = 0.5
        residuals["morphism"] = max(
            residuals["morphism"],
            chart(S.dil(x, mu, sum_op(u, v)), sum_op(S.dil(x, mu, u), S.dil(x, mu, v))),
        )
    worst = max(residuals, key=residuals.get)
    if residuals[worst] > 10 * tol:
        raise TangentConstructionError(
            f"tangent group law failed on the sample: {worst} residual {residuals[worst]:.3g}",
            None,
            residuals,
        )
    return TangentSpaceModel(
        base=np.asarray(x, dtype=float),
        sum=sum_op,
        inverse=inv_op,
        tangent_dilate=tdil,
        tangent_dist=tdist,
        sample=pts,
        residuals=residuals,
        tol=tol,
    )


@dataclass
class AxiomCheck:
    axiom: str
    passed: bool
    detail: dict


@dataclass
class AxiomReport:
    checks: list[AxiomCheck]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, axiom: str) -> AxiomCheck:
        for c in self.checks:
            if c.axiom == axiom:
                return c
        raise KeyError(axiom)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [
                {"axiom": c.axiom, "passed": bool(c.passed), "detail": _plain(c.detail)}
                for c in self.checks
            ],
        }

    def to_json(self) -> str:
        import json

        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_rows(self) -> list[list]:
        rows = []
        for c in self.checks:
            pts = c.detail.get("per_sample", {None: c.detail.get("worst", float("nan"))})
            for key, val in pts.items():
                rows.append([c.axiom, "" if key is None else key, int(c.passed), float(val)])
        return rows


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _ball_point(S, x, radius, direction, shrink=0.5, max_iter=200):
    """A point at d-distance <= radius from x along a coordinate direction."""
    y = np.asarray(x, dtype=float) + direction
    for _ in range(max_iter):
        if S.dist(x, y) <= radius:
            return y
        y = np.asarray(x, dtype=float) + shrink * (y - np.asarray(x, dtype=float))
    raise OutOfDomainError("could not shrink a perturbation into the target ball")


def verify_axioms(S: DilationStructure, sample, grid=None, rng=None, tol=1e-6) -> AxiomReport:
    """Check A0..A4 on a point sample: A1/A2 exactly, A0 with fitted ball
    constants, A3/A4 through limit extraction with uniform Cauchy flags."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    rng = np.random.default_rng(0) if rng is None else rng
    pts = [np.asarray(p, dtype=float) for p in sample]
    x = pts[0]
    checks = []

    # chart-coordinate residual for the exactness checks (gauge-type
    # metrics square-root-amplify coordinate roundoff near zero)
    chart = lambda a, b: float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))  # noqa: E731

    # A1: dil(x,1,y) = y, dil(x,eps,x) = x, and dil(x,eps,y) -> x
    worst = 0.0
    for y in pts[1:]:
        worst = max(worst, chart(S.dil(x, 1.0, y), y))
        for eps in (0.9, 0.5, 0.1):
            worst = max(worst, chart(S.dil(x, eps, x), x))
    shrink = extract_limit(lambda e: S.dist(S.dil(x, e, pts[1]), x), grid, tol=tol)
    a1_pass = worst <= EXACT_TOL and float(shrink.limit) <= 10 * tol
    checks.append(AxiomCheck("A1", a1_pass, {"worst": worst, "shrink_limit": float(shrink.limit)}))

    # A2: dil(x, eps, dil(x, mu, y)) = dil(x, eps*mu, y), exact
    worst = 0.0
    wit = None
    for y in pts[1:]:
        for eps, mu in ((0.5, 0.25), (0.3, 2.0), (1.7, 0.4), (0.05, 0.9)):
            r = chart(S.dil(x, eps, S.dil(x, mu, y)), S.dil(x, eps * mu, y))
            if r > worst:
                worst, wit = r, (float(eps), float(mu))
    checks.append(AxiomCheck("A2", worst <= EXACT_TOL, {"worst": worst, "witness": wit}))

    # A0: fitted inclusion constant sup d(x, dil(x, 1/eps, y)) over y in B(x, eps)
    ratios = []
    for eps in grid[:: max(1, len(grid) // 5)]:
        for _ in range(8):
            direction = eps * rng.standard_normal(S.dim)
            y = _ball_point(S, x, eps, direction)
            ratios.append(S.dist(x, S.dil(x, 1.0 / eps, y)))
    a_fit = float(max(ratios))
    stable = a_fit < np.inf and (min(ratios) == 0 or a_fit / max(min(ratios), 1e-12) < 1e6)
    checks.append(
        AxiomCheck("A0", bool(stable), {"A": max(a_fit, 1.0) * 1.01, "B": 2 * max(a_fit, 1.0), "sup_ratio": a_fit})
    )

    # A3: tangent distance limits, uniform Cauchy + nondegeneracy over the sample
    per = {}
    a3_pass = True
    for i, u in enumerate(pts[1:4], start=1):
        for v in pts[i + 1 : i + 3]:
            rep = tangent_distance(S, x, u, v, grid, tol=tol)
            key = f"pair{i}-{S.dist(u, v):.3g}"
            per[key] = float(rep.limit) if rep.limit is not None else float("nan")
            if not rep.cauchy_ok or rep.extra["degenerate"]:
                a3_pass = False
    checks.append(AxiomCheck("A3", a3_pass, {"per_sample": per}))

    # A4: approximate differences converge, uniformly over sampled triples
    a4_pass = True
    per = {}
    for i, (u, v) in enumerate(zip(pts[1:4], pts[2:5])):
        rep = extract_limit(
            lambda e: approx_difference(S, x, e, u, v), grid, tol=tol
        )
        per[f"triple{i}"] = rep.spread
        if not rep.cauchy_ok or rep.partial:
            a4_pass = False
    checks.append(AxiomCheck("A4", a4_pass, {"per_sample": per}))
    return AxiomReport(checks=checks)


@dataclass
class DerivativeSample:
    curve: object
    t: float
    velocity: object  # point, or None when the limit fails
    spread: float
    cauchy_ok: bool


def derivative_and_rnp_scan(S: DilationStructure, curve, t_grid, eps_grid=None, tol=1e-5):
    """Scan a curve for dilation-sense derivatives.

    At each t the candidate velocity is the limit of dil(c(t), 1/eps, c(t+eps));
    the fraction of t values where the limit exists is the rectifiability
    (Radon-Nikodym) diagnostic of the structure along this curve.
    """
    out = []
    for t in t_grid:
        t = float(t)
        room = curve.t1 - t
        if eps_grid is None:
            egrid = default_grid(4, 14) * min(1.0, room / default_grid(4, 14)[0] * 0.5)
        else:
            egrid = np.asarray(eps_grid, dtype=float)
        egrid = egrid[egrid < room]
        ct = curve.evaluate(t)
        rep = extract_limit(
            lambda e: S.dil(ct, 1.0 / e, curve.evaluate(t + e)),
            egrid,
            tol=tol,
        )
        ok = rep.cauchy_ok and not rep.partial
        out.append(
            DerivativeSample(
                curve=curve,
                t=t,
                velocity=rep.limit if ok else None,
                spread=rep.spread,
                cauchy_ok=ok,
            )
        )
    return out


def derivable_fraction(samples) -> float:
    return sum(1 for s in samples if s.cauchy_ok) / max(1, len(samples))


def pansu_differential_check(
    f, S_src: DilationStructure, S_dst: DilationStructure, x, Df, sample, grid=None, tol=1e-6
) -> ConvergenceReport:
    """Differentiability probe for f at x against a candidate morphism Df.

    Samples sup over the unit-ball sample of
    (1/eps) d_dst(f(dil_src(x,eps,u)), dil_dst(f(x), eps, Df(u)))
    and passes iff the extracted limit vanishes.
    """
    fx = f(x)
    pts = [np.asarray(u, dtype=float) for u in sample]

    def sampler(e):
        worst = 0.0
        for u in pts:
            a = f(S_src.dil(x, e, u))
            b = S_dst.dil(fx, e, Df(u))
            worst = max(worst, S_dst.dist(a, b) / e)
        return worst

    rep = extract_limit(sampler, grid, tol=tol)
    rep.extra["pass"] = bool(rep.limit is not None and float(rep.limit) <= 10 * tol)
    return rep


@dataclass
class EquivalenceReport:
    verdict: str  # "equivalent" | "not-equivalent" | "inconclusive"
    q_maps: dict
    p_maps: dict
    bilipschitz_slope: float
    detail: dict


def equivalence_probe(
    S1: DilationStructure, S2: DilationStructure, x, sample, grid=None, tol=1e-6
) -> EquivalenceReport:
    """Estimate the transition maps between two structures on one domain.

    Extracts Q(u) = lim dil2(x, 1/eps, dil1(x, eps, u)) and the symmetric
    P(u); non-convergence of either, or an identity map whose small-scale
    metric ratio drifts across the grid (log-log slope away from 0), gives
    a not-equivalent verdict.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    pts = [np.asarray(u, dtype=float) for u in sample]
    q_maps, p_maps = {}, {}
    all_ok = True
    partial = False
    for i, u in enumerate(pts):
        rq = extract_limit(
            lambda e: S2.dil(x, 1.0 / e, S1.dil(x, e, u)),
            grid,
            tol=tol,
        )
        rp = extract_limit(
            lambda e: S1.dil(x, 1.0 / e, S2.dil(x, e, u)),
            grid,
            tol=tol,
        )
        q_maps[i] = rq
        p_maps[i] = rp
        partial = partial or rq.partial or rp.partial
        all_ok = all_ok and rq.cauchy_ok and rp.cauchy_ok

    # identity bilipschitz probe: ratio of the two metrics on shrinking pairs
    u, v = pts[0], pts[1 % len(pts)]
    ratios = []
    for e in grid:
        a, b = S1.dil(x, e, u), S1.dil(x, e, v)
        d1, d2 = S1.dist(a, b), S2.dist(a, b)
        if d1 > 0 and d2 > 0:
            ratios.append((e, d2 / d1))
    slope = 0.0
    if len(ratios) >= 3:
        le = np.log([r[0] for r in ratios])
        lr = np.log([r[1] for r in ratios])
        slope = float(np.polyfit(le, lr, 1)[0])

    if not all_ok or abs(slope) > 0.05:
        verdict = "not-equivalent"
    elif partial:
        verdict = "inconclusive"
    else:
        verdict = "equivalent"
    return EquivalenceReport(
        verdict=verdict,
        q_maps=q_maps,
        p_maps=p_maps,
        bilipschitz_slope=slope,
        detail={"all_cauchy": all_ok, "partial": partial},
    )
