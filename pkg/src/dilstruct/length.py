"""Length functionals at scale, Carnot-Caratheodory distance by horizontal
control optimization, length representation, tempered checks, and
desk-scale Gamma-convergence diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from dilstruct.dilation import DilationStructure, derivative_and_rnp_scan, tangent_distance
from dilstruct.limits import default_grid
from dilstruct.metric import PolylineCurve, reparameterize_unit_speed, variation_length
from dilstruct.spaces.carnot import CarnotGroup


@dataclass
class HorizontalControlCurve:
    """Piecewise-constant horizontal controls on [0, 1]."""

    base: np.ndarray
    controls: np.ndarray  # (n, m)

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.controls = np.atleast_2d(np.asarray(self.controls, dtype=float))
        if len(self.controls) < 1:
            raise ValueError("need at least one control cell")

    @property
    def cells(self) -> int:
        return len(self.controls)


@dataclass
class LengthSample:
    eps: float
    value: float
    curve: PolylineCurve


def _group_of(space) -> CarnotGroup:
    if isinstance(space, CarnotGroup):
        return space
    G = space.meta.get("group")
    if G is None and space.meta.get("kind") == "euclidean":
        # flat space is the step-1 (abelian) group
        n = space.dim
        G = CarnotGroup(layer_dims=(n,), bracket=np.zeros((n, n, n)), name=space.name)
    if G is None:
        raise ValueError("operation requires a Carnot handle")
    return G


def rescaled_length(S: DilationStructure, x, eps: float, curve: PolylineCurve) -> LengthSample:
    """(1/eps) times the variation of the pointwise-dilated polyline."""
    for p in curve.samples:
        S.require_in_domain(x, p, "rescaled_length")
    dilated = PolylineCurve(
        knots=curve.knots, samples=np.array([S.dil(x, eps, p) for p in curve.samples])
    )
    val = variation_length(dilated, S.dist) / eps
    return LengthSample(eps=float(eps), value=float(val), curve=dilated)


def scale_family_curve(S: DilationStructure, x, eps: float, curve: PolylineCurve) -> PolylineCurve:
    """Membership normalization for the scale-eps curve family: dilate,
    reparameterize by arc length, then rescale the horizon back to [0, 1]."""
    dilated = PolylineCurve(
        knots=curve.knots, samples=np.array([S.dil(x, eps, p) for p in curve.samples])
    )
    unit = reparameterize_unit_speed(dilated, S.dist)
    span = unit.t1 - unit.t0
    return PolylineCurve(knots=(unit.knots - unit.t0) / span, samples=unit.samples)


def integrate_horizontal(space, hc: HorizontalControlCurve):
    """Exact per-cell exponential steps of piecewise-constant controls.

    Returns (endpoint, length); the endpoint is the group product of the
    cell exponentials, the length is the sum of control norms times the
    cell width (the horizontal metric is Euclidean on the first layer).
    """
    G = _group_of(space)
    dt = 1.0 / hc.cells
    g = np.asarray(hc.base, dtype=float)
    length = 0.0
    for u in hc.controls:
        g = G.multiply(g, G.embed_horizontal(dt * u))
        length += dt * float(np.linalg.norm(u))
    return g, length


def horizontal_polyline(space, hc: HorizontalControlCurve) -> PolylineCurve:
    G = _group_of(space)
    dt = 1.0 / hc.cells
    pts = [np.asarray(hc.base, dtype=float)]
    for u in hc.controls:
        pts.append(G.multiply(pts[-1], G.embed_horizontal(dt * u)))
    return PolylineCurve(knots=np.linspace(0.0, 1.0, hc.cells + 1), samples=np.array(pts))


# -- CC distance by penalized energy minimization ----------------------

@dataclass
class CCConfig:
    cells: tuple = (8, 16, 32)
    multistarts: int = 8
    penalty0: float = 1e2
    penalty_max: float = 1e14
    endpoint_tol: float = 1e-8
    seed: int = 0
    maxiter: int = 400


@dataclass
class CCResult:
    value: float
    controls: np.ndarray
    endpoint_error: float
    converged: bool
    trace: list = field(default_factory=list)  # (stage, penalty, length, endpoint_error)

    def witness(self, base) -> HorizontalControlCurve:
        return HorizontalControlCurve(base=base, controls=self.controls)

    def to_json(self) -> str:
        import json

        return json.dumps(
            {
                "value": self.value,
                "endpoint_error": self.endpoint_error,
                "converged": self.converged,
                "controls": self.controls.tolist(),
            },
            sort_keys=True,
        )


def _mul_jacobians(G: CarnotGroup, a, b):
    """Jacobians of the truncated-BCH product with respect to both factors."""
    n = G.dim
    T = G.bracket
    I = np.eye(n)
    B_right = np.einsum("ijk,j->ki", T, b)  # d B(a,b) / d a
    B_left = np.einsum("ijk,i->kj", T, a)  # d B(a,b) / d b
    Ja = I + 0.5 * B_right
    Jb = I + 0.5 * B_left
    if G.step >= 3:
        ab = np.einsum("ijk,i,j->k", T, a, b)
        Bab_right = np.einsum("ijk,j->ki", T, ab)  # d B(x, ab) / d x
        Ba_left = np.einsum("ijk,i->kj", T, a)  # B(a, .)
        Bb_left = np.einsum("ijk,i->kj", T, b)  # B(b, .)
        Ja = Ja + (Bab_right + Ba_left @ B_right - Bb_left @ B_right) / 12.0
        Jb = Jb + (Ba_left @ B_left - Bab_right - Bb_left @ B_left) / 12.0
    return Ja, Jb


def _endpoint_and_grad(G: CarnotGroup, controls, dt, target):
    """Endpoint residual, its squared norm, and the gradient of the squared
    norm with respect to the controls (adjoint sweep through the product)."""
    n_cells, m = controls.shape
    gs = [np.zeros(G.dim)]
    hs = []
    for u in controls:
        h = G.embed_horizontal(dt * u)
        hs.append(h)
        gs.append(G.multiply(gs[-1], h))
    e = gs[-1] - target
    lam = 2.0 * e
    grad = np.zeros_like(controls)
    for k in range(n_cells - 1, -1, -1):
        Ja, Jb = _mul_jacobians(G, gs[k], hs[k])
        grad[k] = dt * (Jb.T @ lam)[:m]
        lam = Ja.T @ lam
    return e, float(e @ e), grad


def _refine_controls(controls, n_new):
    reps = n_new // len(controls)
    return np.repeat(controls, reps, axis=0)


def _start_controls(G, target, n, rng, style):
    m = G.layer_dims[0]
    t = (np.arange(n) + 0.5) / n
    hor = np.tile(G.horizontal_part(target), (n, 1))
    if style == 0:
        loop = np.zeros((n, m))
    else:
        amp = 1.0 + rng.uniform(0.0, 2.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        sign = rng.choice([-1.0, 1.0])
        loop = np.zeros((n, m))
        loop[:, 0] = amp * np.cos(2 * np.pi * t * sign + phase)
        loop[:, 1 % m] = amp * np.sin(2 * np.pi * t * sign + phase)
        loop += 0.3 * rng.standard_normal((n, m))
    return hor + 2.0 * np.pi * loop * 0.5


def cc_distance(space, x, y, config: CCConfig | None = None) -> CCResult:
    """Upper bound for the CC distance, certified by a feasible witness.

    Minimizes the control energy under a doubling endpoint penalty
    (multistart, warm-started cell refinement); the reported value is the
    length of the best witness whose endpoint error is below tolerance.
    """
    cfg = config or CCConfig()
    G = _group_of(space)
    x = np.asarray(x, dtype=float)
    target = G.multiply(G.invert(x), np.asarray(y, dtype=float))
    best = None
    trace = []

    for start in range(cfg.multistarts):
        # per-start stream: starts are independent of evaluation order
        rng = np.random.default_rng([cfg.seed, start])
        controls = _start_controls(G, target, cfg.cells[0], rng, style=start)
        for n in cfg.cells:
            if len(controls) != n:
                controls = _refine_controls(controls, n)
            dt = 1.0 / n
            w = cfg.penalty0
            while w <= cfg.penalty_max:
                def objective(flat, w=w, n=n, dt=dt):
                    u = flat.reshape(n, -1)
                    e, e2, ge = _endpoint_and_grad(G, u, dt, target)
                    energy = dt * float((u * u).sum())
                    g = 2.0 * dt * u + w * ge
                    return energy + w * e2, g.ravel()

                res = minimize(
                    objective,
                    controls.ravel(),
                    jac=True,
                    method="L-BFGS-B",
                    options={"maxiter": cfg.maxiter, "ftol": 1e-18, "gtol": 1e-14},
                )
                controls = res.x.reshape(n, -1)
                _, e2, _ = _endpoint_and_grad(G, controls, dt, target)
                err = math.sqrt(e2)
                length = dt * float(np.linalg.norm(controls, axis=1).sum())
                trace.append((start, w, length, err))
                if err < cfg.endpoint_tol:
                    break
                w *= 4.0
        if err < cfg.endpoint_tol and (best is None or length < best.value):
            best = CCResult(
                value=length,
                controls=controls.copy(),
                endpoint_error=err,
                converged=True,
            )
    if best is None:
        best = CCResult(
            value=length, controls=controls, endpoint_error=err, converged=False
        )
    best.trace = trace
    return best


def trace_csv_rows(result: CCResult) -> list[list]:
    return [[int(s), float(w), float(l), float(e)] for s, w, l, e in result.trace]


# -- length representation ---------------------------------------------

@dataclass
class LengthRepresentationReport:
    applicable: bool
    variation: float
    quadrature: float
    relative_gap: float
    non_derivable_ts: list


def length_representation_check(
    S: DilationStructure, curve: PolylineCurve, t_grid=None, eps_grid=None, tol=1e-5
) -> LengthRepresentationReport:
    """Compare the curve's variation with the quadrature of the tangent-space
    speed t -> d^{c(t)}(c(t), c'(t)).  Inapplicable when the derivative scan
    fails anywhere on the grid."""
    if t_grid is None:
        mids = 0.5 * (curve.knots[:-1] + curve.knots[1:])
        t_grid = mids
    samples = derivative_and_rnp_scan(S, curve, t_grid, eps_grid)
    bad = [s.t for s in samples if not s.cauchy_ok]
    variation = variation_length(curve, S.dist)
    if bad:
        return LengthRepresentationReport(False, variation, math.nan, math.nan, bad)
    widths = np.diff(curve.knots)
    if len(t_grid) != len(widths):
        widths = np.full(len(t_grid), (curve.t1 - curve.t0) / len(t_grid))
    quad = 0.0
    for s, w in zip(samples, widths):
        ct = curve.evaluate(s.t)
        if S.tangent_dist is not None:
            speed = S.tangent_dist(ct, ct, s.velocity)
        else:
            rep = tangent_distance(S, ct, ct, s.velocity, tol=tol)
            speed = float(rep.limit)
        quad += float(w) * speed
    gap = abs(quad - variation) / max(variation, 1e-300)
    return LengthRepresentationReport(True, variation, quad, gap, [])


# -- tempered checks ----------------------------------------------------

@dataclass
class TemperedReport:
    c_low: float
    C_high: float
    passed: bool
    slope: float
    phi: dict


def tempered_check(
    S_test: DilationStructure,
    S_background: DilationStructure,
    x,
    sample_pairs,
    grid=None,
    drift_tol: float = 0.1,
) -> TemperedReport:
    """Fit the two-sided comparison constants between a distance and the
    tangent distance of a background structure, along rescaled pairs.

    The verdict fails when the per-scale ratio envelope drifts in log-log
    (slope beyond drift_tol) over the smallest grid decade, i.e. when no
    constants can be bounded away from 0 and infinity.
    """
    grid = default_grid(2, 12) if grid is None else np.asarray(grid, dtype=float)
    per_eps_max, per_eps_min = {}, {}
    for u, v in sample_pairs:
        denom = (
            S_background.tangent_dist(x, u, v)
            if S_background.tangent_dist is not None
            else float(tangent_distance(S_background, x, u, v, grid).limit)
        )
        if denom <= 0:
            continue
        for e in grid:
            a = S_background.dil(x, e, u)
            b = S_background.dil(x, e, v)
            r = S_test.dist(a, b) / e / denom
            per_eps_max[e] = max(per_eps_max.get(e, 0.0), r)
            per_eps_min[e] = min(per_eps_min.get(e, math.inf), r)
    eps = np.array(sorted(per_eps_max, reverse=True))
    highs = np.array([per_eps_max[e] for e in eps])
    lows = np.array([per_eps_min[e] for e in eps])
    c_low = float(lows.min())
    C_high = float(highs.max())
    # trend over the smallest decade of the grid
    tail = eps <= eps.min() * 10.0
    slope = float(np.polyfit(np.log(eps[tail]), np.log(highs[tail]), 1)[0])
    passed = bool(np.isfinite(C_high) and c_low > 0 and abs(slope) <= drift_tol)
    phi = {}
    for u, v in sample_pairs[:4]:
        two = sorted(grid)[:2]
        phi[str(len(phi))] = max(S_test.dist(x, S_background.dil(x, e, u)) / e for e in two)
    return TemperedReport(c_low=c_low, C_high=C_high, passed=passed, slope=slope, phi=phi)


# -- Gamma-convergence diagnostics --------------------------------------

@dataclass
class GammaCurveDiagnostic:
    limit_value: float
    scale_values: list
    recovery_gap: float
    liminf_slack: float
    monotone: bool


@dataclass
class GammaReport:
    curves: list[GammaCurveDiagnostic]

    @property
    def max_recovery_gap(self) -> float:
        return max(c.recovery_gap for c in self.curves)

    @property
    def max_liminf_slack(self) -> float:
        return max(c.liminf_slack for c in self.curves)


def gamma_diagnostic(
    S: DilationStructure, x, curves, eps_seq=None, families=None
) -> GammaReport:
    """Desk-scale evidence for Gamma-convergence of the rescaled lengths.

    For each test curve: the constant-family (recovery) values l^x_eps(c)
    against the candidate limit (variation under the tangent distance), and
    the liminf slack of the limit value against the tail of a converging
    family (the constant family unless one is supplied)."""
    eps_seq = default_grid(2, 12) if eps_seq is None else np.asarray(eps_seq, dtype=float)
    out = []
    for ci, curve in enumerate(curves):
        if S.tangent_dist is not None:
            limit_value = float(
                sum(
                    S.tangent_dist(x, curve.samples[i], curve.samples[i + 1])
                    for i in range(len(curve) - 1)
                )
            )
        else:
            limit_value = float(
                sum(
                    tangent_distance(S, x, curve.samples[i], curve.samples[i + 1]).limit
                    for i in range(len(curve) - 1)
                )
            )
        family = families[ci] if families is not None else (lambda e, c=curve: c)
        values = []
        for e in eps_seq:
            c_e = family(float(e))
            c_e = scale_family_curve(S, x, e, c_e)
            values.append(variation_length(c_e, S.dist) / e)
        tail = values[-max(3, len(values) // 3):]
        liminf_slack = max(0.0, limit_value - min(tail))
        recovery_gap = abs(values[-1] - limit_value)
        diffs = np.diff(values)
        monotone = bool(np.all(diffs <= 1e-12) or np.all(diffs >= -1e-12))
        out.append(
            GammaCurveDiagnostic(
                limit_value=limit_value,
                scale_values=[float(v) for v in values],
                recovery_gap=float(recovery_gap),
                liminf_slack=float(liminf_slack),
                monotone=monotone,
            )
        )
    return GammaReport(curves=out)
