"""Coherent projections on Carnot groups: scale-indexed projections that
commute with a background (degree-one) dilation field and induce the
graded dilations.  Includes the word machinery for horizontal
connectivity, short curves, and the candidate tangent-space operations."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from dilstruct.dilation import DilationStructure
from dilstruct.limits import extract_limit
from dilstruct.metric import PolylineCurve
from dilstruct.spaces.carnot import CarnotGroup, carnot_handle


class NestingError(ValueError):
    def __init__(self, step: int, dist: float, rho: float):
        super().__init__(
            f"word letter at step {step} exits the nesting radius ({dist:.3g} > {rho:.3g})"
        )
        self.step = step


def background_handle(G: CarnotGroup) -> DilationStructure:
    """Degree-one dilation structure on the group chart: all frame
    coordinates scale linearly, the distance is the chart Euclidean one.
    For step <= 2 the rescaled distances are scale-independent, so the
    tangent distance is the left-translated Euclidean norm, exactly."""

    def dist(u, v):
        return float(np.linalg.norm(np.asarray(v, float) - np.asarray(u, float)))

    def dil(x, eps, y):
        a = G.multiply(G.invert(x), y)
        return G.multiply(x, eps * np.asarray(a, float))

    def left_jac(x):
        T = G.bracket
        n = G.dim
        J = np.eye(n) + 0.5 * np.einsum("ijk,i->kj", T, np.asarray(x, float))
        if G.step >= 3:
            Bx = np.einsum("ijk,i->kj", T, np.asarray(x, float))
            J = J + (Bx @ Bx) / 12.0
        return J

    def tangent_dist(x, u, v):
        a = G.multiply(G.invert(x), u)
        b = G.multiply(G.invert(x), v)
        return float(np.linalg.norm(left_jac(x) @ (a - b)))

    return DilationStructure(
        name=f"{G.name}-background",
        dim=G.dim,
        dist=dist,
        dil=dil,
        domain_radius=lambda x: np.inf,
        tangent_dist=tangent_dist,
        meta={"kind": "carnot-background", "group": G},
    )


@dataclass
class CoherentProjection:
    """The graded coherent projection of a Carnot group in first-kind
    exponential coordinates: coordinate i of x^{-1}u scales by
    eps^(deg_i - 1), so the horizontal layer is fixed and the limit
    projection kills all higher layers."""

    group: CarnotGroup
    background: DilationStructure = field(init=False)
    induced: DilationStructure = field(init=False)

    def __post_init__(self):
        self.background = background_handle(self.group)
        self.induced = carnot_handle(self.group)

    def q(self, x, eps: float, u) -> np.ndarray:
        """Q^x_eps u; eps = 0 gives the limit projection Q^x."""
        G = self.group
        a = G.multiply(G.invert(np.asarray(x, float)), np.asarray(u, float))
        if eps == 0.0:
            scale = (G.deg == 1).astype(float)
        else:
            scale = np.asarray(eps, dtype=float) ** (G.deg - 1)
        return G.multiply(np.asarray(x, float), a * scale)

    def horizontal(self, x, u, tol: float = 1e-12) -> bool:
        return bool(np.linalg.norm(np.asarray(u, float) - self.q(x, 0.0, u)) <= tol)


def q_project(P: CoherentProjection, x, eps: float, u) -> np.ndarray:
    return P.q(x, eps, u)


def _theta_val(P, x, e, u, v):
    w = P.induced.dil(x, e, u)
    return P.background.dil(x, 1.0 / e, P.q(w, 1.0 / e, P.induced.dil(x, e, v)))


def theta_identity_residual(P: CoherentProjection, x, e: float, u, v) -> float:
    """Per-scale residual of theta against the composition of the
    approximate background sum with the induced difference."""
    uu = P.q(x, e, u)
    w = P.induced.dil(x, e, u)
    delta = P.induced.dil(w, 1.0 / e, P.induced.dil(x, e, v))
    wb = P.background.dil(x, e, uu)
    sig = P.background.dil(x, 1.0 / e, P.background.dil(wb, e, delta))
    return float(np.linalg.norm(_theta_val(P, x, e, u, v) - sig))


def theta(P: CoherentProjection, x, eps: float, u, v, grid=None, tol=1e-6):
    """Theta^x_eps(u,v) with its scale-limit report.

    The report's extra carries the exact per-eps composition identity
    residual against the approximate-sum-of-projections form.
    """
    value = _theta_val(P, x, eps, u, v)
    rep = extract_limit(
        lambda e: _theta_val(P, x, e, u, v),
        grid,
        tol=tol,
    )
    rep.extra["identity_residual"] = max(
        theta_identity_residual(P, x, e, u, v) for e in (eps, 0.5, 0.125)
    )
    return value, rep


def coherent_exact_residuals(P: CoherentProjection, x, u, v, eps_list=(1.0, 0.7, 0.25, 0.04)) -> dict:
    """Per-scale exact identities of the projection: inverse, semigroup,
    identity at 1, fixed base, commutation with background dilations,
    commutation of induced and background dilations, and the Theta
    composition identity."""
    x = np.asarray(x, float)
    out = {k: 0.0 for k in ("inverse", "semigroup", "at_one", "fixed_base", "commute_Q_bar", "commute_dil", "theta_identity")}
    out["at_one"] = float(np.linalg.norm(P.q(x, 1.0, u) - np.asarray(u, float)))
    for e in eps_list:
        out["inverse"] = max(
            out["inverse"], float(np.linalg.norm(P.q(x, 1.0 / e, P.q(x, e, u)) - np.asarray(u, float)))
        )
        out["fixed_base"] = max(out["fixed_base"], float(np.linalg.norm(P.q(x, e, x) - x)))
        for m in eps_list:
            out["semigroup"] = max(
                out["semigroup"],
                float(np.linalg.norm(P.q(x, e, P.q(x, m, u)) - P.q(x, e * m, u))),
            )
            out["commute_Q_bar"] = max(
                out["commute_Q_bar"],
                float(
                    np.linalg.norm(
                        P.q(x, e, P.background.dil(x, m, u))
                        - P.background.dil(x, m, P.q(x, e, u))
                    )
                ),
            )
            out["commute_dil"] = max(
                out["commute_dil"],
                float(
                    np.linalg.norm(
                        P.induced.dil(x, e, P.background.dil(x, m, u))
                        - P.background.dil(x, m, P.induced.dil(x, e, u))
                    )
                ),
            )
        out["theta_identity"] = max(out["theta_identity"], theta_identity_residual(P, x, e, u, v))
    return out


def coherent_limit_checks(P: CoherentProjection, x, u, v, grid=None, tol=1e-6) -> dict:
    """Limit relations: idempotence of the limit projection, the
    reconstruction of the induced difference through Theta, and the
    morphism property of the limit projection."""
    B, D = P.background, P.induced

    def delta(S, e, a, b):
        w = S.dil(x, e, a)
        return S.dil(w, 1.0 / e, S.dil(x, e, b))

    d_rep = extract_limit(lambda e: delta(D, e, u, v), grid, tol=tol)
    th_rep = extract_limit(lambda e: _theta_val(P, x, e, u, v), grid, tol=tol)
    qu = P.q(x, 0.0, u)
    qv = P.q(x, 0.0, v)
    recon_rhs = extract_limit(
        lambda e: delta(B, e, qu, np.asarray(th_rep.limit, float)), grid, tol=tol
    )
    morph_lhs = P.q(x, 0.0, np.asarray(d_rep.limit, float))
    morph_rhs = extract_limit(lambda e: delta(B, e, qu, qv), grid, tol=tol)
    # idempotence through the scale family, not the closed form
    q_fam = extract_limit(lambda e: P.q(x, e, P.q(x, e, u)), grid, tol=tol)
    q_idem = float(np.linalg.norm(np.asarray(q_fam.limit) - qu))
    return {
        "q_idempotent": q_idem,
        "recon": float(np.linalg.norm(np.asarray(d_rep.limit) - np.asarray(recon_rhs.limit))),
        "morph": float(np.linalg.norm(morph_lhs - np.asarray(morph_rhs.limit))),
        "all_cauchy": bool(
            d_rep.cauchy_ok and th_rep.cauchy_ok and recon_rhs.cauchy_ok
            and morph_rhs.cauchy_ok and q_fam.cauchy_ok
        ),
    }


def condition_a_report(P: CoherentProjection, x, pairs, eps_list=(1.0, 0.5, 0.1, 0.02)) -> dict:
    """Fitted Lipschitz constant of the induced dilations against the
    background distance, per scale; condition (A) holds when the fit is
    stable across the grid."""
    fits = {}
    for e in eps_list:
        worst = 0.0
        for u, v in pairs:
            a = P.induced.dil(x, e, u)
            b = P.induced.dil(x, e, v)
            denom = P.background.dist(u, v)
            if denom > 0:
                worst = max(worst, P.background.dist(a, b) / e / denom)
        fits[float(e)] = worst
    vals = np.array(list(fits.values()))
    return {
        "L": float(vals.max()),
        "per_eps": fits,
        "stable": bool(vals.max() / max(vals.min(), 1e-300) < 10.0),
    }


# -- word machinery ------------------------------------------------------

@dataclass
class WordProgram:
    """Letters and per-step projection weights for the recursive word map.

    Empty ``weights`` means every step uses the limit projection; otherwise
    one weight in (0, 1] per letter.
    """

    base: np.ndarray
    eps: float
    letters: list
    weights: list = field(default_factory=list)
    rho: float = math.inf

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.letters = [np.asarray(q, dtype=float) for q in self.letters]
        if self.weights and len(self.weights) != len(self.letters):
            raise ValueError("need one weight per letter (or none)")

    def to_json(self) -> str:
        return json.dumps(
            {
                "base": self.base.tolist(),
                "eps": self.eps,
                "letters": [q.tolist() for q in self.letters],
                "weights": list(self.weights),
                "rho": self.rho if math.isfinite(self.rho) else None,
            },
            sort_keys=True,
        )


def psi_word(P: CoherentProjection, program: WordProgram) -> list:
    """Trajectory of the recursive word map: one point per prefix.

    Each step projects the rescaled letter at the rescaled current point
    and pulls the result back; steps whose letters exit the nesting radius
    (in the scaled background distance) raise NestingError.
    """
    x = program.base
    e = program.eps
    B, D = P.background, P.induced
    trajectory = [x]
    for k, letter in enumerate(program.letters, start=1):
        current = trajectory[-1]
        scaled = (1.0 / e) * B.dist(B.dil(x, e, letter), B.dil(x, e, current))
        if scaled > program.rho:
            raise NestingError(k, scaled, program.rho)
        w = program.weights[k - 1] if program.weights else 0.0
        nxt = D.dil(x, 1.0 / e, P.q(D.dil(x, e, current), w, D.dil(x, e, letter)))
        trajectory.append(nxt)
    return trajectory


@dataclass
class ChowSolution:
    base: np.ndarray
    target: np.ndarray
    eps: float
    n_letters: int
    letters: list
    increments: np.ndarray  # (N, m) horizontal increments
    endpoint: np.ndarray
    endpoint_error: float
    segment_lengths: list
    fitted_constant: float
    short_curve: PolylineCurve | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "base": self.base.tolist(),
                "target": self.target.tolist(),
                "eps": self.eps,
                "n_letters": self.n_letters,
                "letters": [q.tolist() for q in self.letters],
                "increments": self.increments.tolist(),
                "endpoint_error": self.endpoint_error,
                "segment_lengths": self.segment_lengths,
                "fitted_constant": self.fitted_constant,
            },
            sort_keys=True,
        )


def _letters_from_increments(P: CoherentProjection, x, increments):
    """Letters whose word trajectory realizes the given horizontal
    increments: the step-k letter is the current point translated by the
    embedded increment."""
    G = P.group
    psi = np.zeros(G.dim)
    letters = []
    for h in increments:
        letters.append(G.multiply(np.asarray(x, float), G.multiply(psi, G.embed_horizontal(h))))
        psi = G.multiply(psi, G.embed_horizontal(h))
    return letters


def _forward_increments(G: CarnotGroup, increments) -> np.ndarray:
    out = np.zeros(G.dim)
    for h in increments:
        out = G.multiply(out, G.embed_horizontal(h))
    return out


def chow_connect(
    P: CoherentProjection, x, z, eps: float = 1.0, n_letters: int = 4, tol: float = 1e-9
) -> ChowSolution:
    """Connect x to z with a word of projected horizontal moves.

    Seeds with one horizontal move plus a closing triangle (three moves
    whose enclosed area supplies the vertical gap), then polishes by
    damped Gauss-Newton on the exact forward word map.  The solution is
    forward-verified through psi_word before acceptance.
    """
    G = P.group
    if G.step > 2:
        raise ValueError("word connectivity solver supports step <= 2 groups")
    m = G.layer_dims[0]
    x = np.asarray(x, float)
    z = np.asarray(z, float)
    zeta = G.multiply(G.invert(x), z)
    if n_letters < 4:
        raise ValueError("need at least 4 letters (one move plus a closing triangle)")

    # seed: horizontal move, then a triangle enclosing the residual area
    incr = np.zeros((n_letters, m))
    incr[0] = G.horizontal_part(zeta)
    resid = G.multiply(G.invert(_forward_increments(G, incr)), zeta)
    vert = resid[G.layer_slice(2)]
    if np.linalg.norm(vert) > 1e-14 * max(1.0, float(np.linalg.norm(zeta))) and m >= 2:
        area = float(vert[0])
        s = math.sqrt(2.0 * abs(area))
        a = np.zeros(m)
        b = np.zeros(m)
        a[0], b[1] = s, math.copysign(s, area)
        incr[1], incr[2], incr[3] = a, b, -a - b

    # damped Gauss-Newton on the forward map
    flat = incr.ravel().copy()
    for _ in range(60):
        end = _forward_increments(G, flat.reshape(n_letters, m))
        r = end - zeta
        if np.linalg.norm(r) < tol:
            break
        jac = np.zeros((G.dim, flat.size))
        h_fd = 1e-7
        for c in range(flat.size):
            pert = flat.copy()
            pert[c] += h_fd
            jac[:, c] = (_forward_increments(G, pert.reshape(n_letters, m)) - end) / h_fd
        lam = 1e-10
        step = np.linalg.solve(jac.T @ jac + lam * np.eye(flat.size), -jac.T @ r)
        flat = flat + step
    incr = flat.reshape(n_letters, m)

    letters = _letters_from_increments(P, x, incr)
    program = WordProgram(base=x, eps=eps, letters=letters)
    trajectory = psi_word(P, program)
    endpoint = trajectory[-1]
    err = P.background.dist(endpoint, z)
    seg = [float(np.linalg.norm(h)) for h in incr]
    eta = P.background.dist(x, z)
    fitted = max(seg) / eta ** (1.0 / G.step) if eta > 0 else 0.0
    sol = ChowSolution(
        base=x,
        target=z,
        eps=eps,
        n_letters=n_letters,
        letters=letters,
        increments=incr,
        endpoint=endpoint,
        endpoint_error=float(err),
        segment_lengths=seg,
        fitted_constant=float(fitted),
    )
    sol.short_curve = assemble_short_curve(P, sol)
    return sol


def assemble_short_curve(
    P: CoherentProjection, sol: ChowSolution, samples_per_segment: int = 16
) -> PolylineCurve:
    """Concatenation of the background dilation flows of the projected
    letters; each segment runs from one trajectory point to the next."""
    G = P.group
    x = sol.base
    psi = np.zeros(G.dim)
    knots = [0.0]
    pts = [x.copy()]
    for k, h in enumerate(sol.increments):
        seg_end = G.multiply(psi, G.embed_horizontal(h))
        y0 = G.multiply(x, psi)
        y1 = G.multiply(x, seg_end)
        for i in range(1, samples_per_segment + 1):
            t = i / samples_per_segment
            pts.append(P.background.dil(y0, t, y1))
            knots.append(k + t)
        psi = seg_end
    return PolylineCurve(knots=np.array(knots), samples=np.array(pts))


def short_curve_and_condB(P: CoherentProjection, sol: ChowSolution, a_list=(1.0, 0.5, 0.25, 0.1, 0.05)) -> dict:
    """Per-segment ratio of background length to endpoint distance on the
    initial piece [0, a], and its trend toward 1 as a -> 0."""
    curve = sol.short_curve or assemble_short_curve(P, sol)
    B = P.background
    G = P.group
    x = sol.base
    psi = np.zeros(G.dim)
    ratios = {}
    for k, h in enumerate(sol.increments):
        if np.linalg.norm(h) == 0:
            psi = G.multiply(psi, G.embed_horizontal(h))
            continue
        y0 = G.multiply(x, psi)
        psi = G.multiply(psi, G.embed_horizontal(h))
        y1 = G.multiply(x, psi)
        seg_ratios = []
        for a in a_list:
            n_sub = 32
            sub = [B.dil(y0, a * i / n_sub, y1) for i in range(n_sub + 1)]
            length = sum(B.dist(sub[i], sub[i + 1]) for i in range(n_sub))
            chord = B.dist(sub[0], sub[-1])
            seg_ratios.append(length / chord if chord > 0 else 1.0)
        ratios[k] = seg_ratios
    last = [r[-1] for r in ratios.values()] or [1.0]
    return {
        "curve": curve,
        "ratios": ratios,
        "limit_ok": bool(max(abs(r - 1.0) for r in last) < 1e-6),
    }


# -- candidate tangent operations ---------------------------------------

@dataclass
class RingTangentOps:
    """Tangent-space dilations and projections re-based at an arbitrary
    tangent point, with the candidate length functional."""

    P: CoherentProjection
    x: np.ndarray

    def sum(self, u, v):
        G = self.P.group
        return G.multiply(
            self.x,
            G.multiply(
                G.multiply(G.invert(self.x), np.asarray(u, float)),
                G.multiply(G.invert(self.x), np.asarray(v, float)),
            ),
        )

    def difference(self, u, v):
        G = self.P.group
        return G.multiply(
            self.x,
            G.multiply(
                G.invert(G.multiply(G.invert(self.x), np.asarray(u, float))),
                G.multiply(G.invert(self.x), np.asarray(v, float)),
            ),
        )

    def dilate_at(self, u, mu, v):
        return self.sum(u, self.P.induced.dil(self.x, mu, self.difference(u, v)))

    def project_at(self, u, v, mu: float = 0.0):
        return self.sum(u, self.P.q(self.x, mu, self.difference(u, v)))

    def is_horizontal_polyline(self, curve: PolylineCurve, tol: float = 1e-9) -> bool:
        for i in range(len(curve) - 1):
            d = self.difference(curve.samples[i], curve.samples[i + 1])
            if np.linalg.norm(d - self.P.q(self.x, 0.0, d)) > tol:
                return False
        return True

    def candidate_length(self, curve: PolylineCurve) -> float:
        """Integral of the background tangent norm of the cell velocities."""
        total = 0.0
        for i in range(len(curve) - 1):
            dt = curve.knots[i + 1] - curve.knots[i]
            u = self.difference(curve.samples[i], curve.samples[i + 1])
            # velocity of the cell's dilation flow, normalized per unit time
            vel = self.P.induced.dil(self.x, 1.0 / dt, u)
            total += dt * self.P.background.tangent_dist(self.x, self.x, vel)
        return float(total)

    def projected_length(self, curve: PolylineCurve) -> float:
        proj = np.array([self.P.q(self.x, 0.0, p) for p in curve.samples])
        pc = PolylineCurve(knots=curve.knots, samples=proj)
        return float(
            sum(
                self.P.background.tangent_dist(self.x, pc.samples[i], pc.samples[i + 1])
                for i in range(len(pc) - 1)
            )
        )


def ring_tangent_ops(P: CoherentProjection, x, curve: PolylineCurve | None = None) -> dict:
    """Candidate tangent bundle at x with the length-projection report:
    the gap between the candidate length of a horizontal polyline and the
    background length of its projection, the dilation homogeneity of the
    candidate length, and the bracket-generation probe (a commutator of
    horizontal points acquires a vertical component)."""
    ops = RingTangentOps(P=P, x=np.asarray(x, float))
    G = P.group
    report = {"ops": ops, "applicable": None, "length_projection_gap": None, "homogeneity_gap": None}
    if curve is not None:
        if not ops.is_horizontal_polyline(curve):
            report["applicable"] = False
            return report
        report["applicable"] = True
        l_cand = ops.candidate_length(curve)
        l_proj = ops.projected_length(curve)
        report["length_projection_gap"] = abs(l_cand - l_proj) / max(l_cand, 1e-300)
        mu = 0.5
        dilated = PolylineCurve(
            knots=curve.knots,
            samples=np.array([P.induced.dil(x, mu, p) for p in curve.samples]),
        )
        report["homogeneity_gap"] = abs(ops.candidate_length(dilated) - mu * l_cand)
    h1 = G.embed_horizontal(np.eye(G.layer_dims[0])[0])
    h2 = G.embed_horizontal(np.eye(G.layer_dims[0])[1 % G.layer_dims[0]])
    a = G.multiply(np.asarray(x, float), h1)
    b = G.multiply(np.asarray(x, float), h2)
    comm = ops.sum(a, ops.sum(b, ops.sum(ops.difference(a, x), ops.difference(b, x))))
    rel = G.multiply(G.invert(np.asarray(x, float)), comm)
    report["commutator_vertical"] = float(np.linalg.norm(rel[G.layer_slice(2)]))
    return report
