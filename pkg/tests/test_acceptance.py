"""Acceptance suite: one test per criterion, each printing a pass/fail
line with its runtime.  Run with `pytest tests/test_acceptance.py -v -s`.
"""
import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from dilstruct import cli
from dilstruct.coherent import (
    CoherentProjection,
    WordProgram,
    chow_connect,
    coherent_exact_residuals,
    coherent_limit_checks,
    psi_word,
    ring_tangent_ops,
)
from dilstruct.dilation import (
    approx_difference,
    approx_inverse,
    approx_sum,
    derivable_fraction,
    derivative_and_rnp_scan,
)
from dilstruct.gh import Relation, bar_generalize, gh_exact_small, relation_stats
from dilstruct.length import CCConfig, cc_distance, tempered_check
from dilstruct.limits import default_grid, extract_limit
from dilstruct.metric import FiniteMetricSpace, PolylineCurve
from dilstruct.profiles import (
    curvdim_estimate,
    profile_distortion,
    sample_profile,
    sectional_curvature_from_profile,
)
from dilstruct.spaces import construct_space
from dilstruct.spaces.carnot import engel, carnot_handle, heisenberg


@contextmanager
def criterion(num, label, budget=None):
    t0 = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"criterion {num:2d} [{label}]: FAIL", flush=True)
        raise
    elapsed = time.perf_counter() - t0
    print(f"criterion {num:2d} [{label}]: PASS ({elapsed:.1f}s)", flush=True)
    if budget is not None:
        assert elapsed < budget, f"runtime {elapsed:.1f}s exceeds budget {budget}s"


def chart_dist(a, b):
    return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))


def test_criterion_01_approximate_operation_identities():
    """Exact composition identities of the approximate operations, to
    1e-12 in chart coordinates, 1000 draws per structure."""
    specs = ["euclidean 2", "snowflake 2 0.5", "nonstandard 1.0", "heisenberg", "sphere"]
    with criterion(1, "approximate-operation identities", budget=10.0):
        for spec in specs:
            S = construct_space(spec)
            rng = np.random.default_rng(42)
            worst = 0.0
            for _ in range(1000):
                x, u, v, w = (0.25 * rng.uniform(-1, 1, S.dim) for _ in range(4))
                eps = float(rng.uniform(0.05, 1.0))
                w_pt = S.dil(x, eps, u)
                inv_u = approx_inverse(S, x, eps, u)
                checks = (
                    (approx_difference(S, x, eps, u, approx_sum(S, x, eps, u, v)), v),
                    (approx_sum(S, x, eps, u, approx_difference(S, x, eps, u, v)), v),
                    (
                        approx_difference(S, x, eps, u, v),
                        approx_sum(S, w_pt, eps, inv_u, v),
                    ),
                    (approx_inverse(S, w_pt, eps, inv_u), u),
                    (
                        approx_sum(S, x, eps, u, approx_sum(S, w_pt, eps, v, w)),
                        approx_sum(S, x, eps, approx_sum(S, x, eps, u, v), w),
                    ),
                    (inv_u, approx_difference(S, x, eps, u, x)),
                    (approx_sum(S, x, eps, x, u), u),
                )
                for lhs, rhs in checks:
                    worst = max(worst, chart_dist(lhs, rhs))
            assert worst < 1e-12, f"{spec}: worst identity residual {worst:.3e}"


def test_criterion_02_gh_calculus():
    """Relation-statistics inequalities on 200 generalized relations, and
    symmetry plus the triangle inequality for the exact GH distance."""
    with criterion(2, "GH calculus", budget=30.0):
        rng = np.random.default_rng(7)

        def line_space(xs, prefix):
            xs = np.asarray(xs, dtype=float)
            return FiniteMetricSpace(
                ids=[f"{prefix}{i}" for i in range(len(xs))],
                dmat=np.abs(xs[:, None] - xs[None, :]),
            )

        for _ in range(200):
            eps = float(rng.integers(52, 410)) / 1024.0
            mu = float(rng.integers(52, 410)) / 1024.0
            X = line_space([0, eps, 2 * eps, 3 * eps, float(rng.uniform(0, 3)) * eps], "x")
            Y = line_space([0, mu, 2 * mu, 3 * mu, float(rng.uniform(0, 3)) * mu], "y")
            pool = [("x1", "y1"), ("x1", "y2"), ("x2", "y1"), ("x2", "y2")]
            pairs = {("x1", "y1"), ("x2", "y2")} if rng.random() < 0.5 else {
                ("x1", "y2"),
                ("x2", "y1"),
            }
            pairs |= {pool[rng.integers(4)]}
            rel = Relation(src=X, dst=Y, pairs=pairs)
            bar = bar_generalize(rel, eps, mu)
            s, sb = relation_stats(rel), relation_stats(bar)
            tol = 1e-12
            assert s.resolution <= s.accuracy + tol
            assert s.precision <= s.accuracy + tol
            assert s.resolution + 2 * eps <= sb.resolution + tol
            assert sb.resolution <= s.accuracy + 2 * (eps + mu) + tol
            assert s.precision + 2 * mu <= sb.precision + tol
            assert sb.precision <= s.accuracy + 2 * (eps + mu) + tol
            assert abs(sb.accuracy - s.accuracy) <= 2 * (eps + mu) + tol

        for _ in range(50):
            spaces = [
                FiniteMetricSpace.from_points(rng.uniform(0, 1, (int(rng.integers(2, 4)), 2)))
                for _ in range(3)
            ]
            d01 = gh_exact_small(spaces[0], spaces[1]).value
            d10 = gh_exact_small(spaces[1], spaces[0]).value
            d12 = gh_exact_small(spaces[1], spaces[2]).value
            d02 = gh_exact_small(spaces[0], spaces[2]).value
            assert abs(d01 - d10) <= 1e-9
            assert d02 <= d01 + d12 + 1e-9


def test_criterion_03_conical_exactness():
    """Scale-independent rescaled distances for Carnot and snowflake
    handles; flat profile flags below the 1e-9 distortion threshold.

    Grid depth per space: the identity is exact in exact arithmetic, but
    the m-th root in a step-m gauge amplifies coordinate roundoff like
    eps^-(m-1), so each grid stops where that stays below 1e-12."""
    with criterion(3, "conical exactness"):
        rng = np.random.default_rng(3)
        cases = (
            (construct_space("heisenberg"), default_grid(1, 5)),
            (carnot_handle(engel()), default_grid(1, 4)),
            (construct_space("snowflake 2 0.5"), default_grid(1, 6)),
        )
        for S, grid in cases:
            for _ in range(25):
                x, u, v = (rng.uniform(-1.0, 1.0, S.dim) for _ in range(3))
                base = S.dist(u, v)
                for e in grid:
                    val = S.dist(S.dil(x, e, u), S.dil(x, e, v)) / e
                    assert abs(val - base) < 1e-12
        for spec in ("heisenberg", "snowflake 2 0.5"):
            S = construct_space(spec)
            series = sample_profile(S, np.zeros(S.dim), 6, [0.4, 0.2, 0.1, 0.05], seed=5)
            assert all(profile_distortion(series, e) < 1e-9 for e in series.eps_list)
            assert curvdim_estimate(series).flat


def test_criterion_04_tangent_group_construction():
    """Extracted approximate sums against the conical-group form, and the
    isometry of extracted left translations for the tangent distance."""
    with criterion(4, "tangent group construction"):
        S = construct_space("heisenberg")
        g = S.meta["group"]
        rng = np.random.default_rng(11)
        grid = default_grid(2, 12)
        worst_sum = 0.0
        worst_iso = 0.0
        for _ in range(200):
            x, u, v = (rng.uniform(-0.4, 0.4, 3) for _ in range(3))
            rep = extract_limit(lambda e: approx_sum(S, x, e, u, v), grid)
            oracle = g.multiply(
                x, g.multiply(g.multiply(g.invert(x), u), g.multiply(g.invert(x), v))
            )
            worst_sum = max(worst_sum, chart_dist(rep.limit, oracle))
        assert worst_sum < 1e-6, f"sum extraction error {worst_sum:.3e}"

        def tangent_dist_extracted(x, a, b):
            rep = extract_limit(lambda e: S.dist(S.dil(x, e, a), S.dil(x, e, b)) / e, grid)
            return float(rep.limit)

        for _ in range(25):
            x, u, v, w = (rng.uniform(-0.4, 0.4, 3) for _ in range(4))
            tu = np.asarray(extract_limit(lambda e: approx_sum(S, x, e, u, v), grid).limit)
            tw = np.asarray(extract_limit(lambda e: approx_sum(S, x, e, u, w), grid).limit)
            worst_iso = max(
                worst_iso,
                abs(tangent_dist_extracted(x, tu, tw) - tangent_dist_extracted(x, v, w)),
            )
        assert worst_iso < 1e-5, f"left-translation isometry residual {worst_iso:.3e}"


def test_criterion_05_curvature_recovery():
    """Unit-sphere curvature from the profile distortions: quadratic
    slope and the curvature coefficient within 10 percent."""
    with criterion(5, "curvature recovery", budget=60.0):
        S = construct_space("sphere")
        series = sample_profile(S, np.zeros(2), 12, [0.4, 0.2, 0.1, 0.05], seed=11)
        est = curvdim_estimate(series)
        assert not est.flat
        assert 1.8 <= est.slope <= 2.2, f"slope {est.slope:.3f}"
        k = sectional_curvature_from_profile(series, est, S.meta["log3"])
        assert abs(k - 1.0) <= 0.1, f"recovered curvature {k:.4f}"


def test_criterion_06_rnp_dichotomy():
    """A line segment is derivable everywhere in the flat plane and
    nowhere under the twisted dilations."""
    with criterion(6, "rectifiability dichotomy"):
        t = np.linspace(0.0, 1.0, 11)
        curve = PolylineCurve(knots=t, samples=np.stack([t, 0 * t], axis=1))
        ts = np.linspace(0.1, 0.7, 7)
        flat = derivative_and_rnp_scan(construct_space("euclidean 2"), curve, ts)
        assert derivable_fraction(flat) == 1.0
        twisted = derivative_and_rnp_scan(construct_space("nonstandard 1.0"), curve, ts)
        assert derivable_fraction(twisted) == 0.0
        assert all(s.spread > 0.5 for s in twisted)


def test_criterion_07_cc_distance():
    """Horizontal and vertical Carnot-Caratheodory distances on the
    Heisenberg group, certified by feasible witnesses."""
    with criterion(7, "CC distance", budget=120.0):
        S = construct_space("heisenberg")
        res1 = cc_distance(S, np.zeros(3), np.array([1.0, 0.0, 0.0]), CCConfig(seed=0))
        assert res1.converged and res1.endpoint_error < 1e-8
        assert abs(res1.value - 1.0) <= 0.01, f"horizontal value {res1.value:.4f}"
        res2 = cc_distance(S, np.zeros(3), np.array([0.0, 0.0, 1.0]), CCConfig(seed=0))
        assert res2.converged and res2.endpoint_error < 1e-8
        target = 2 * math.sqrt(math.pi)
        assert abs(res2.value - target) <= 0.02 * target, f"vertical value {res2.value:.4f}"


def test_criterion_08_chow_connectivity():
    """100 random targets in a gauge ball connected by 4-letter words,
    forward-verified; the segment-bound constant is stable across two
    decades of background distance."""
    with criterion(8, "generalized Chow connectivity"):
        P = CoherentProjection(group=heisenberg())
        g = P.group
        x = np.zeros(3)
        rng = np.random.default_rng(17)
        worst = 0.0
        n_connected = 0
        while n_connected < 100:
            z = rng.uniform(-0.5, 0.5, 3)
            if g.gauge_norm(z) > 0.5:
                continue
            n_connected += 1
            sol = chow_connect(P, x, z, n_letters=4)
            traj = psi_word(P, WordProgram(base=x, eps=1.0, letters=sol.letters))
            err = P.background.dist(traj[-1], z)
            worst = max(worst, err)
        assert worst < 1e-6, f"worst forward-verified endpoint error {worst:.3e}"

        fits = []
        for scale in (1e-1, 1e-2, 1e-3):
            dec = 0.0
            for _ in range(20):
                direction = rng.standard_normal(3)
                z = scale * direction / np.linalg.norm(direction)
                dec = max(dec, chow_connect(P, x, z).fitted_constant)
            dec = max(dec, chow_connect(P, x, np.array([0.0, 0.0, scale])).fitted_constant)
            fits.append(dec)
        assert max(fits) / min(fits) <= 1.25, f"decade fits {fits}"


def test_criterion_09_coherent_projection_identities():
    """Per-scale coherent-projection identities at machine precision,
    limit relations at extraction tolerance, and the candidate length
    against the projected background length."""
    with criterion(9, "coherent projection identities"):
        P = CoherentProjection(group=heisenberg())
        g = P.group
        rng = np.random.default_rng(23)
        for _ in range(50):
            x, u, v = (rng.uniform(-0.5, 0.5, 3) for _ in range(3))
            res = coherent_exact_residuals(P, x, u, v)
            assert max(res.values()) < 1e-12, res

        x, u, v = (rng.uniform(-0.4, 0.4, 3) for _ in range(3))
        lim = coherent_limit_checks(P, x, u, v)
        assert lim["all_cauchy"]
        assert lim["q_idempotent"] < 1e-6
        assert lim["recon"] < 1e-6
        assert lim["morph"] < 1e-6

        for _ in range(10):
            x = rng.uniform(-0.4, 0.4, 3)
            incs = 0.3 * rng.standard_normal((3, 2))
            pts = [np.zeros(3)]
            for h in incs:
                pts.append(g.multiply(pts[-1], g.embed_horizontal(h)))
            curve = PolylineCurve(
                knots=np.arange(4.0), samples=np.array([g.multiply(x, p) for p in pts])
            )
            rep = ring_tangent_ops(P, x, curve)
            assert rep["applicable"]
            assert rep["length_projection_gap"] < 1e-6
            assert rep["homogeneity_gap"] < 1e-12


def test_criterion_10_tempered_dichotomy():
    """The flat plane is tempered against itself with unit constants; the
    gauge distance against the flat background blows up on vertical pairs
    at least as fast as the -0.4 power of the scale."""
    with criterion(10, "tempered dichotomy"):
        E = construct_space("euclidean 2")
        rng = np.random.default_rng(29)
        pts = [rng.uniform(-0.5, 0.5, 2) for _ in range(8)]
        rep = tempered_check(E, E, np.zeros(2), list(zip(pts[::2], pts[1::2])))
        assert rep.passed
        assert abs(rep.c_low - 1.0) <= 1e-9
        assert abs(rep.C_high - 1.0) <= 1e-9

        H = construct_space("heisenberg")
        flat3 = construct_space("euclidean 3")
        pairs = [
            (np.array([0.0, 0.0, 0.2]), np.array([0.0, 0.0, -0.1])),
            (np.array([0.0, 0.0, 0.35]), np.array([0.0, 0.0, 0.1])),
        ]
        rep = tempered_check(H, flat3, np.zeros(3), pairs)
        assert not rep.passed
        assert rep.slope <= -0.4, f"ratio growth exponent {rep.slope:.3f}"


ACCEPTANCE_SUITE = """
seed = 13

[axioms]
op = validate-axioms
space = heisenberg
samples = 5
radius = 0.3

[tangent]
op = tangent
space = heisenberg
samples = 4

[gh]
op = gh
points = 3

[profile]
op = profile
space = sphere
samples = 6

[curvdim-flat]
op = curvdim
space = heisenberg
samples = 5
expect_flat = true

[gamma]
op = gamma
space = euclidean 2
"""


def test_criterion_11_determinism(tmp_path):
    """Identical config and seed produce byte-identical report bundles."""
    with criterion(11, "deterministic reports"):
        cfg = tmp_path / "suite.cfg"
        cfg.write_text(ACCEPTANCE_SUITE)
        outs = []
        for name in ("run-a", "run-b"):
            _, exps = cli.parse_config_text(ACCEPTANCE_SUITE)
            bundle = cli.run_suite(exps, jobs=2)
            out = tmp_path / name
            cli.emit_report(bundle, out, "both")
            outs.append(out)
        names_a = sorted(p.name for p in outs[0].iterdir())
        names_b = sorted(p.name for p in outs[1].iterdir())
        assert names_a == names_b
        for name in names_a:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
        doc = json.loads((outs[0] / "bundle.json").read_text())
        assert doc["passed"]
